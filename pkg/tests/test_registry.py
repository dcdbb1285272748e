import pytest
from hypothesis import strategies as st

from conftest import T0, prop
from immunipass.canonical import SeededEntropy, digest
from immunipass.did import TESTING_FACILITY, Did, DidDocument, ServiceEndpoint, VerificationMethod
from immunipass.errors import InsufficientQuorum, InvalidEntry, MalformedChain, StaleVersion
from immunipass.keys import new_signing_key, public_bytes
from immunipass.registry import (
    GENESIS_PREV,
    Authority,
    Block,
    CredentialAnchor,
    DidDocPublish,
    DidDocUpdate,
    PlainHash,
    RegistryChain,
    SaltedCommitmentAnchor,
    append_block,
    find_anchor,
    public_event_log,
    verify_chain,
)

ENTROPY = SeededEntropy(b"registry tests")
AUTHORITIES = tuple(Authority(f"authority-{i}", new_signing_key(ENTROPY)) for i in range(1, 4))
OUTSIDER = Authority("authority-1", new_signing_key(ENTROPY))


def sim_doc(name: str, version: int = 1, endpoints=()) -> DidDocument:
    did = Did("sim", name)
    key_id = did.url("key-1")
    return DidDocument(did, (VerificationMethod(key_id, public_bytes(new_signing_key(SeededEntropy(name)))),),
                       (key_id,), endpoints, version, T0)


def anchor_entry(n: int, who: str = "louis") -> CredentialAnchor:
    return CredentialAnchor(PlainHash(digest(n.to_bytes(4, "big"))), Did("sim", who))


def build(n_blocks: int, quorum: int = 2) -> RegistryChain:
    chain = RegistryChain.create(AUTHORITIES, quorum)
    for i in range(n_blocks):
        chain = append_block(chain, [anchor_entry(i)], AUTHORITIES[:quorum], T0)
    return chain


SAMPLE = build(4)
SAMPLE_BYTES = SAMPLE.dumps()


def test_genesis_links_to_zero_digest():
    assert SAMPLE.blocks[0].prev_hash == GENESIS_PREV == bytes(32)
    assert SAMPLE.blocks[1].prev_hash == SAMPLE.blocks[0].header_digest()


def test_header_digest_layout():
    b = SAMPLE.blocks[2]
    assert b.header_digest() == digest(b"\0" * 7 + b"\x02", b.prev_hash, b"2021-03-01T09:00:00Z", b.entries_bytes())


def test_two_of_three_quorum():
    chain = RegistryChain.create(AUTHORITIES, 2)
    with pytest.raises(InsufficientQuorum):
        append_block(chain, [anchor_entry(0)], AUTHORITIES[:1], T0)
    with pytest.raises(InsufficientQuorum):
        append_block(chain, [anchor_entry(0)], [AUTHORITIES[0], AUTHORITIES[0]], T0)
    with pytest.raises(InsufficientQuorum):
        append_block(chain, [anchor_entry(0)], [AUTHORITIES[1], OUTSIDER], T0)
    chain = append_block(chain, [anchor_entry(0)], AUTHORITIES[1:], T0)
    assert verify_chain(chain).accepted


def test_document_versioning():
    chain = RegistryChain.create(AUTHORITIES, 2)
    chain = append_block(chain, [DidDocPublish(sim_doc("h"))], AUTHORITIES, T0)
    with pytest.raises(StaleVersion):
        append_block(chain, [DidDocUpdate(sim_doc("h", version=3))], AUTHORITIES, T0)
    with pytest.raises(InvalidEntry):
        append_block(chain, [DidDocPublish(sim_doc("h"))], AUTHORITIES, T0)
    with pytest.raises(StaleVersion):
        append_block(chain, [DidDocPublish(sim_doc("k", version=2))], AUTHORITIES, T0)
    chain = append_block(chain, [DidDocUpdate(sim_doc("h", version=2))], AUTHORITIES, T0)
    assert chain.latest_document(Did("sim", "h")).version == 2


def test_timestamps_never_regress():
    from datetime import timedelta

    with pytest.raises(InvalidEntry):
        append_block(SAMPLE, [anchor_entry(9)], AUTHORITIES, T0 - timedelta(seconds=1))


def test_byte_flip_in_block_one_rejects_at_height_one():
    tampered = Block(1, SAMPLE.blocks[1].prev_hash, SAMPLE.blocks[1].timestamp, (anchor_entry(99),),
                     SAMPLE.blocks[1].signatures)
    chain = RegistryChain(SAMPLE.authority_set, SAMPLE.quorum,
                          SAMPLE.blocks[:1] + (tampered,) + SAMPLE.blocks[2:])
    verdict = verify_chain(chain)
    assert not verdict.accepted and verdict.height == 1
    assert str(verdict) == f"Reject({verdict.reason}) at block 1"


def test_find_anchor_returns_earliest():
    dup = append_block(SAMPLE, [anchor_entry(1, "marie"), anchor_entry(1)], AUTHORITIES, T0)
    assert find_anchor(dup, digest((1).to_bytes(4, "big"))) == (1, 0)
    assert find_anchor(dup, digest(b"absent")) is None
    salted = append_block(SAMPLE, [CredentialAnchor(SaltedCommitmentAnchor(bytes(32)), Did("sim", "x"))],
                          AUTHORITIES, T0)
    assert find_anchor(salted, bytes(32)) == (4, 0)


def test_event_log_shows_facility_endpoint_added_by_update():
    chain = RegistryChain.create(AUTHORITIES, 2)
    chain = append_block(chain, [DidDocPublish(sim_doc("h"))], AUTHORITIES, T0)
    endpoint = ServiceEndpoint("did:sim:h#testing", TESTING_FACILITY, "https://h.example/covid")
    chain = append_block(chain, [DidDocUpdate(sim_doc("h", 2, (endpoint,)))], AUTHORITIES, T0)
    log = public_event_log(chain)
    assert [(e.kind, e.endpoint_types) for e in log] == [("DidDocPublish", ()), ("DidDocUpdate", (TESTING_FACILITY,))]


def test_empty_chain_round_trips_and_verifies():
    empty = RegistryChain.create(AUTHORITIES, 2)
    assert RegistryChain.loads(empty.dumps()) == empty
    assert verify_chain(empty).accepted


@pytest.mark.parametrize("cut", [1, 2, -1])
def test_truncated_file_is_malformed(cut):
    lines = SAMPLE_BYTES.split(b"\n")
    if cut == -1:
        data = SAMPLE_BYTES[:-5]
    else:
        data = b"\n".join(lines[: len(lines) - 1 - cut]) + b"\n"
    with pytest.raises(MalformedChain):
        RegistryChain.loads(data)


def test_quorum_bounds():
    with pytest.raises(InvalidEntry):
        RegistryChain.create(AUTHORITIES, 4)
    with pytest.raises(InvalidEntry):
        RegistryChain.create(AUTHORITIES, 0)


@prop(st.lists(st.integers(0, 5), min_size=1, max_size=6))
def test_append_only(batches):
    chain = RegistryChain.create(AUTHORITIES, 2)
    history = [chain]
    for n, size in enumerate(batches):
        chain = append_block(chain, [anchor_entry(n * 10 + j) for j in range(size)], AUTHORITIES[:2], T0)
        history.append(chain)
    for earlier, later in zip(history, history[1:]):
        assert later.blocks[: len(earlier.blocks)] == earlier.blocks
        assert len(later.blocks) == len(earlier.blocks) + 1
        assert later.dumps().split(b"\n")[1:-2][: len(earlier.blocks)] == earlier.dumps().split(b"\n")[1:-2]
    assert verify_chain(chain).accepted


@prop(st.integers(1, 3), st.lists(st.integers(0, 2), max_size=4), st.booleans())
def test_quorum_soundness(quorum, signer_indexes, forge):
    """A block verifies iff it carries at least `quorum` distinct valid member signatures."""
    chain = RegistryChain.create(AUTHORITIES, quorum)
    block = Block(0, GENESIS_PREV, T0, (anchor_entry(0),))
    header = block.header_digest()
    signatures = []
    for i in signer_indexes:
        key = OUTSIDER.signing_key if forge and i == 0 else AUTHORITIES[i].signing_key
        signatures.append((AUTHORITIES[i].id, key.sign(header)))
    forged = Block(0, GENESIS_PREV, T0, block.entries, tuple(signatures))
    verdict = verify_chain(RegistryChain(chain.authority_set, quorum, (forged,)))
    distinct = len(set(signer_indexes)) == len(signer_indexes)
    honest = not (forge and 0 in signer_indexes)
    assert verdict.accepted == (distinct and honest and len(signer_indexes) >= quorum)
    if signer_indexes and distinct and honest and len(signer_indexes) >= quorum:
        assert verify_chain(append_block(chain, block.entries, [AUTHORITIES[i] for i in signer_indexes], T0)).accepted


HEADER_END = SAMPLE_BYTES.index(b"\n") + 1


def _flipped_chain(position: int, mask: int):
    data = bytearray(SAMPLE_BYTES)
    data[position] ^= mask
    try:
        return RegistryChain.loads(bytes(data))
    except MalformedChain:
        return None


@prop(st.integers(HEADER_END, len(SAMPLE_BYTES) - 1), st.integers(1, 255))
def test_hash_link_integrity(position, mask):
    """Any byte change in a block or closing line is caught by the parser or by verification."""
    chain = _flipped_chain(position, mask)
    assert chain is None or not verify_chain(chain).accepted


@prop(st.integers(0, HEADER_END - 1), st.integers(1, 255))
def test_header_change_caught_by_pinned_authorities(position, mask):
    chain = _flipped_chain(position, mask)
    assert chain is None or not verify_chain(chain, trusted=AUTHORITIES).accepted


def test_pinned_authorities_accept_the_genuine_file():
    assert verify_chain(RegistryChain.loads(SAMPLE_BYTES), trusted=AUTHORITIES).accepted
    assert verify_chain(SAMPLE, trusted=AUTHORITIES[:2]).reason == "UntrustedAuthoritySet"


def test_signature_removed_below_quorum_rejects():
    last = SAMPLE.blocks[-1]
    thinned = Block(last.height, last.prev_hash, last.timestamp, last.entries, last.signatures[:1])
    verdict = verify_chain(RegistryChain(SAMPLE.authority_set, 2, SAMPLE.blocks[:-1] + (thinned,)))
    assert (verdict.reason, verdict.height) == ("InsufficientQuorum", 3)


def test_three_events_in_timestamp_order():
    from datetime import timedelta

    chain = RegistryChain.create(AUTHORITIES, 2)
    facility = ServiceEndpoint("did:sim:h#testing", TESTING_FACILITY, "https://h.example/covid")
    chain = append_block(chain, [DidDocPublish(sim_doc("h", endpoints=(facility,)))], AUTHORITIES, T0)
    chain = append_block(chain, [DidDocPublish(sim_doc("p"))], AUTHORITIES, T0 + timedelta(minutes=1))
    chain = append_block(chain, [anchor_entry(0, "p")], AUTHORITIES, T0 + timedelta(minutes=2))
    log = public_event_log(chain)
    assert [(str(e.did), e.kind) for e in log] == [("did:sim:h", "DidDocPublish"), ("did:sim:p", "DidDocPublish"),
                                                   ("did:sim:p", "CredentialAnchor")]
    assert [e.timestamp for e in log] == sorted(e.timestamp for e in log)


def test_empty_chain_has_no_events():
    assert public_event_log(RegistryChain.create(AUTHORITIES, 2)) == []
