import pytest
from hypothesis import strategies as st

from conftest import prop
from immunipass.did import (
    B58_ALPHABET,
    Did,
    DidDocument,
    Resolver,
    b58decode,
    b58encode,
    did_key_from_public_key,
    parse_did,
    public_key_from_did_key,
    resolve,
    split_did_url,
)
from immunipass.errors import InvalidKey, MalformedDid, NotFound
from immunipass.fixtures import GOLDEN_SUBJECT, golden_issuer_document
from immunipass.keys import public_bytes, signing_key_from_seed

# published did:key example for the all-zero Ed25519 seed
ZERO_SEED_DID = "did:key:z6MkiTBz1ymuepAQ4HEHYSF1H8quG5GLVVQR3djdX3mDooWp"
ZERO_SEED_PUBLIC = "3b6a27bcceb6a42d62a3a8d02a6f0d73653215771de243a63ac048a18b59da29"


def b58_bytewise(data: bytes) -> str:
    """Independent oracle: the carry-array base conversion used by Bitcoin Core."""
    digits = [0]
    for byte in data:
        carry = byte
        for i in range(len(digits)):
            carry += digits[i] << 8
            digits[i], carry = carry % 58, carry // 58
        while carry:
            digits.append(carry % 58)
            carry //= 58
    zeros = len(data) - len(data.lstrip(b"\0"))
    text = "".join(B58_ALPHABET[d] for d in reversed(digits)).lstrip("1")
    return "1" * zeros + text


@prop(st.binary(max_size=40))
def test_base58_matches_bytewise_oracle_and_round_trips(data):
    assert b58encode(data) == b58_bytewise(data)
    assert b58decode(b58encode(data)) == data


def test_base58_rejects_ambiguous_characters():
    for bad in "0OIl":
        with pytest.raises(ValueError):
            b58decode("z" + bad)


def test_did_key_of_zero_seed_matches_published_example():
    pk = public_bytes(signing_key_from_seed(bytes(32)))
    assert pk.hex() == ZERO_SEED_PUBLIC
    did, doc = did_key_from_public_key(pk)
    assert str(did) == ZERO_SEED_DID
    assert doc.authentication_keys() == [pk]
    assert public_key_from_did_key(parse_did(ZERO_SEED_DID)) == pk


def test_golden_subject_did_key_parses_and_round_trips():
    pk = public_key_from_did_key(GOLDEN_SUBJECT)
    assert len(pk) == 32
    assert did_key_from_public_key(pk)[0] == GOLDEN_SUBJECT
    assert resolve(GOLDEN_SUBJECT, None).id == GOLDEN_SUBJECT


@pytest.mark.parametrize("text", ["did::", "did:key", "did:KEY:z6Mk", "urn:key:abc", "did:key:a b", ""])
def test_malformed_dids(text):
    with pytest.raises(MalformedDid):
        parse_did(text)


def test_wrong_length_key_is_invalid():
    with pytest.raises(InvalidKey):
        did_key_from_public_key(bytes(31))
    too_short = Did("key", "z" + b58encode(b"\xed\x01" + bytes(31)))
    with pytest.raises(MalformedDid):
        public_key_from_did_key(too_short)


def test_did_url_split():
    did, frag = split_did_url("did:sim:louis#key-1")
    assert (did, frag) == (Did("sim", "louis"), "key-1")
    for bad in ["did:sim:louis", "did:sim:louis#", "did:sim:louis#a#b"]:
        with pytest.raises(MalformedDid):
            split_did_url(bad)


def test_resolution_dispatch():
    with pytest.raises(NotFound):
        resolve("did:sim:nobody", None)
    with pytest.raises(NotFound):
        resolve("did:web:vc.transmute.world", None)
    issuer = golden_issuer_document()
    assert Resolver(None, {issuer.id: issuer})(str(issuer.id)) == issuer


def test_document_text_round_trip_and_update_versioning():
    doc = golden_issuer_document()
    assert DidDocument.loads(doc.dumps()) == doc
    updated = doc.with_update(doc.updated_at)
    assert updated.version == doc.version + 1


def test_sim_did_parses():
    assert parse_did("did:sim:hospital-01") == Did("sim", "hospital-01")


def test_distinct_keys_give_distinct_dids():
    a = did_key_from_public_key(public_bytes(signing_key_from_seed(bytes(32))))[0]
    b = did_key_from_public_key(public_bytes(signing_key_from_seed(bytes(31) + b"\x01")))[0]
    assert a != b
