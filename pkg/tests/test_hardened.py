import hashlib

import pytest
from hypothesis import assume
from hypothesis import strategies as st

from conftest import prop
from immunipass.canonical import SeededEntropy
from immunipass.errors import DecryptionFailure
from immunipass.hardened import SALT_SIZE, commit, commitment_value, open_sealed, seal, verify_commitment
from immunipass.keys import agreement_key_from_bytes, public_bytes
from immunipass.registry import SealedAnchor

preimages = st.binary(min_size=1, max_size=96)
secrets = st.binary(min_size=32, max_size=32)


def test_commitment_is_sha256_of_salt_then_preimage():
    salt, data = bytes(range(32)), b"claims||signature"
    assert commitment_value(salt, data) == hashlib.sha256(salt + data).digest()


def test_commit_draws_a_full_salt():
    c = commit(b"x", SeededEntropy(1))
    assert len(c.salt) == SALT_SIZE
    assert commit(b"x", SeededEntropy(2)).commitment != c.commitment


def test_empty_preimage_refused():
    with pytest.raises(ValueError):
        commit(b"")


@prop(preimages, preimages, st.integers(0, 2**32))
def test_commitment_binding(a, b, seed):
    c = commit(a, SeededEntropy(seed))
    assert verify_commitment(c.commitment, c.salt, a)
    if a != b:
        assert not verify_commitment(c.commitment, c.salt, b)


@prop(preimages, secrets, secrets)
def test_commitment_binding_across_salts(data, salt, other_salt):
    assume(salt != other_salt)
    assert not verify_commitment(commitment_value(salt, data), other_salt, data)


@prop(secrets, secrets, st.integers(0, 2**32))
def test_seal_open_round_trip(value, holder_seed, seed):
    holder = agreement_key_from_bytes(holder_seed)
    anchor = seal(value, public_bytes(holder), SeededEntropy(seed))
    assert open_sealed(anchor, holder) == value
    assert open_sealed(anchor, holder_seed) == value


def _flip(data: bytes, index: int) -> bytes:
    i = index % len(data)
    return data[:i] + bytes([data[i] ^ 0x01]) + data[i + 1:]


@prop(secrets, secrets, st.integers(0, 2**32), st.sampled_from(["ciphertext", "nonce", "ephemeral", "key"]),
       st.integers(0, 1000))
def test_sealed_tamper_fails_authenticated(value, holder_seed, seed, part, index):
    holder = agreement_key_from_bytes(holder_seed)
    anchor = seal(value, public_bytes(holder), SeededEntropy(seed))
    secret = holder_seed
    if part == "ciphertext":
        anchor = SealedAnchor(anchor.ephemeral_public_key, anchor.nonce, _flip(anchor.ciphertext, index))
    elif part == "nonce":
        anchor = SealedAnchor(anchor.ephemeral_public_key, _flip(anchor.nonce, index), anchor.ciphertext)
    elif part == "ephemeral":
        anchor = SealedAnchor(_flip(anchor.ephemeral_public_key, index), anchor.nonce, anchor.ciphertext)
    else:
        secret = _flip(holder_seed, index)
        # X25519 clamping ignores a few bits of the secret; skip flips that leave the key unchanged
        assume(public_bytes(agreement_key_from_bytes(secret)) != public_bytes(holder))
    with pytest.raises(DecryptionFailure):
        open_sealed(anchor, secret)


def test_seal_requires_digest_length():
    with pytest.raises(ValueError):
        seal(b"short", public_bytes(agreement_key_from_bytes(bytes(32))))


def test_commit_twice_gives_distinct_commitments():
    entropy = SeededEntropy(9)
    a, b = commit(b"same", entropy), commit(b"same", entropy)
    assert a.commitment != b.commitment and a.salt != b.salt
    assert not verify_commitment(a.commitment, b.salt, b"same")


def test_seal_twice_gives_distinct_ciphertexts():
    holder = agreement_key_from_bytes(bytes(range(32)))
    entropy = SeededEntropy(9)
    a, b = seal(bytes(32), public_bytes(holder), entropy), seal(bytes(32), public_bytes(holder), entropy)
    assert a.ephemeral_public_key != b.ephemeral_public_key and a.ciphertext != b.ciphertext


def test_dictionary_over_four_candidates_fails_without_salt():
    from immunipass.attacks import FLAGS, ClaimTemplate, PublicContext, dictionary_attack
    from immunipass.credential import signed_preimage
    from immunipass.fixtures import golden_credential

    vc = golden_credential()
    anchor = commit(signed_preimage(vc), SeededEntropy(3)).anchor()
    known = {k: v for k, v in vc.body.claims.items() if k not in ("IgM", "IgG")}
    report = dictionary_attack(anchor, ClaimTemplate(known, {"IgM": FLAGS, "IgG": FLAGS}),
                               PublicContext.from_credential(vc))
    assert not report.succeeded and report.work == 4
