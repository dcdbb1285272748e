"""Simulated proof-of-authority registry.

An append-only, hash-chained block sequence. Every block is signed by at
least ``quorum`` distinct members of a fixed authority set; entries publish or
update ``did:sim`` documents, or anchor a credential fingerprint submitted by
a holder. Chains are immutable values: :func:`append_block` returns a new
chain that shares every earlier block.

The ``.chain`` file is newline-delimited canonical text: one header line
(authority public keys and quorum), one line per block, and a closing line
naming the block count and head digest so that truncation is detectable.
Nothing in the file is secret.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from functools import cached_property
from typing import Any, Iterable, NamedTuple, Sequence, Union

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from . import canonical
from .canonical import DIGEST_SIZE, digest, format_datetime, from_hex, parse_datetime, to_hex
from .did import Did, DidDocument, parse_did
from .errors import (
    InsufficientQuorum,
    InvalidEntry,
    MalformedChain,
    NonCanonicalValue,
    PassportError,
    StaleVersion,
    Verdict,
)
from .keys import KEY_SIZE, SIGNATURE_SIZE, public_bytes, verify_signature

GENESIS_PREV = bytes(DIGEST_SIZE)
CHAIN_FORMAT = "immunipass-chain/1"


@dataclass(frozen=True)
class PlainHash:
    digest: bytes

    def __post_init__(self):
        if len(self.digest) != DIGEST_SIZE:
            raise InvalidEntry("plain hash anchor must be 32 octets")


@dataclass(frozen=True)
class SaltedCommitmentAnchor:
    commitment: bytes

    def __post_init__(self):
        if len(self.commitment) != DIGEST_SIZE:
            raise InvalidEntry("salted commitment anchor must be 32 octets")


@dataclass(frozen=True)
class SealedAnchor:
    ephemeral_public_key: bytes
    nonce: bytes
    ciphertext: bytes

    def __post_init__(self):
        if len(self.ephemeral_public_key) != KEY_SIZE:
            raise InvalidEntry("sealed anchor ephemeral key must be 32 octets")


AnchorPayload = Union[PlainHash, SaltedCommitmentAnchor, SealedAnchor]


@dataclass(frozen=True)
class DidDocPublish:
    document: DidDocument


@dataclass(frozen=True)
class DidDocUpdate:
    document: DidDocument


@dataclass(frozen=True)
class CredentialAnchor:
    anchor: AnchorPayload
    submitted_for: Did


RegistryEntry = Union[DidDocPublish, DidDocUpdate, CredentialAnchor]


def anchor_to_document(anchor: AnchorPayload) -> dict[str, Any]:
    if isinstance(anchor, PlainHash):
        return {"type": "PlainHash", "digestHex": to_hex(anchor.digest)}
    if isinstance(anchor, SaltedCommitmentAnchor):
        return {"type": "SaltedCommitment", "commitmentHex": to_hex(anchor.commitment)}
    return {
        "type": "SealedCiphertext",
        "ephemeralPublicKeyHex": to_hex(anchor.ephemeral_public_key),
        "nonceHex": to_hex(anchor.nonce),
        "ciphertextHex": to_hex(anchor.ciphertext),
    }


def anchor_from_document(doc: dict[str, Any]) -> AnchorPayload:
    kind = doc["type"]
    if kind == "PlainHash":
        return PlainHash(from_hex(doc["digestHex"], DIGEST_SIZE))
    if kind == "SaltedCommitment":
        return SaltedCommitmentAnchor(from_hex(doc["commitmentHex"], DIGEST_SIZE))
    if kind == "SealedCiphertext":
        return SealedAnchor(
            from_hex(doc["ephemeralPublicKeyHex"], KEY_SIZE),
            from_hex(doc["nonceHex"]),
            from_hex(doc["ciphertextHex"]),
        )
    raise NonCanonicalValue(f"unknown anchor type {kind!r}")


def entry_to_document(entry: RegistryEntry) -> dict[str, Any]:
    if isinstance(entry, (DidDocPublish, DidDocUpdate)):
        return {"kind": type(entry).__name__, "document": entry.document.to_document()}
    return {
        "kind": "CredentialAnchor",
        "anchor": anchor_to_document(entry.anchor),
        "submittedFor": str(entry.submitted_for),
    }


def entry_from_document(doc: dict[str, Any]) -> RegistryEntry:
    kind = doc["kind"]
    if kind == "DidDocPublish":
        return DidDocPublish(DidDocument.from_document(doc["document"]))
    if kind == "DidDocUpdate":
        return DidDocUpdate(DidDocument.from_document(doc["document"]))
    if kind == "CredentialAnchor":
        return CredentialAnchor(anchor_from_document(doc["anchor"]), parse_did(doc["submittedFor"]))
    raise NonCanonicalValue(f"unknown entry kind {kind!r}")


@dataclass(frozen=True)
class Authority:
    id: str
    signing_key: Ed25519PrivateKey = field(repr=False, compare=False)

    @property
    def public(self) -> "AuthorityInfo":
        return AuthorityInfo(self.id, public_bytes(self.signing_key))


@dataclass(frozen=True)
class AuthorityInfo:
    id: str
    public_key: bytes


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    timestamp: datetime
    entries: tuple[RegistryEntry, ...]
    signatures: tuple[tuple[str, bytes], ...] = ()

    def entries_bytes(self) -> bytes:
        return canonical.encode([entry_to_document(e) for e in self.entries])

    def header_digest(self) -> bytes:
        """Digest the authorities sign and the next block links to."""
        return digest(
            self.height.to_bytes(8, "big"),
            self.prev_hash,
            format_datetime(self.timestamp).encode("ascii"),
            self.entries_bytes(),
        )

    def to_document(self) -> dict[str, Any]:
        return {
            "height": self.height,
            "prevHashHex": to_hex(self.prev_hash),
            "timestamp": format_datetime(self.timestamp),
            "entries": [entry_to_document(e) for e in self.entries],
            "signatures": [{"authority": a, "signatureHex": to_hex(s)} for a, s in self.signatures],
        }

    @classmethod
    def from_document(cls, doc: dict[str, Any]) -> "Block":
        return cls(
            height=doc["height"],
            prev_hash=from_hex(doc["prevHashHex"], DIGEST_SIZE),
            timestamp=parse_datetime(doc["timestamp"]),
            entries=tuple(entry_from_document(e) for e in doc["entries"]),
            signatures=tuple(
                (s["authority"], from_hex(s["signatureHex"], SIGNATURE_SIZE)) for s in doc["signatures"]
            ),
        )


class Event(NamedTuple):
    timestamp: datetime
    did: Did
    kind: str
    endpoint_types: tuple[str, ...]


def _apply(docs: dict[Did, DidDocument], entry: RegistryEntry) -> None:
    if isinstance(entry, DidDocPublish):
        doc = entry.document
        if doc.id.method != "sim":
            raise InvalidEntry(f"only did:sim documents live on the registry, got {doc.id}")
        if doc.id in docs:
            raise InvalidEntry(f"{doc.id} is already published")
        if doc.version != 1:
            raise StaleVersion(f"first publication of {doc.id} must be version 1, got {doc.version}")
        docs[doc.id] = doc
    elif isinstance(entry, DidDocUpdate):
        doc = entry.document
        prior = docs.get(doc.id)
        if prior is None:
            raise InvalidEntry(f"update for unpublished {doc.id}")
        if doc.version != prior.version + 1:
            raise StaleVersion(f"{doc.id}: version {doc.version} does not follow {prior.version}")
        docs[doc.id] = doc
    elif isinstance(entry, CredentialAnchor):
        if not isinstance(entry.anchor, (PlainHash, SaltedCommitmentAnchor, SealedAnchor)):
            raise InvalidEntry(f"unknown anchor payload {entry.anchor!r}")
    else:
        raise InvalidEntry(f"unknown entry {entry!r}")


@dataclass(frozen=True)
class RegistryChain:
    authority_set: tuple[AuthorityInfo, ...]
    quorum: int
    blocks: tuple[Block, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "authority_set", tuple(self.authority_set))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        ids = [a.id for a in self.authority_set]
        if len(set(ids)) != len(ids):
            raise InvalidEntry("authority ids must be unique")
        if not 1 <= self.quorum <= len(ids):
            raise InvalidEntry(f"quorum {self.quorum} outside 1..{len(ids)}")

    @classmethod
    def create(cls, authorities: Iterable[Authority | AuthorityInfo], quorum: int) -> "RegistryChain":
        infos = tuple(a.public if isinstance(a, Authority) else a for a in authorities)
        return cls(infos, quorum)

    @property
    def head_digest(self) -> bytes:
        return self.blocks[-1].header_digest() if self.blocks else GENESIS_PREV

    @cached_property
    def _documents(self) -> dict[Did, DidDocument]:
        docs: dict[Did, DidDocument] = {}
        for block in self.blocks:
            for entry in block.entries:
                _apply(docs, entry)
        return docs

    def latest_document(self, did: Did) -> DidDocument | None:
        return self._documents.get(did)

    def anchors_for(self, did: Did) -> list[tuple[int, int, AnchorPayload]]:
        return [
            (block.height, i, entry.anchor)
            for block in self.blocks
            for i, entry in enumerate(block.entries)
            if isinstance(entry, CredentialAnchor) and entry.submitted_for == did
        ]

    def dumps(self) -> bytes:
        header = {
            "format": CHAIN_FORMAT,
            "quorum": self.quorum,
            "authorities": [{"id": a.id, "publicKeyHex": to_hex(a.public_key)} for a in self.authority_set],
        }
        footer = {"end": len(self.blocks), "headHex": to_hex(self.head_digest)}
        lines = [canonical.encode(header)]
        lines += [canonical.encode(b.to_document()) for b in self.blocks]
        lines.append(canonical.encode(footer))
        return b"\n".join(lines) + b"\n"

    @classmethod
    def loads(cls, data: bytes | str) -> "RegistryChain":
        """Parse a ``.chain`` file. Only structure is checked here; use :func:`verify_chain` for integrity."""
        if isinstance(data, str):
            data = data.encode("utf-8")
        if not data.endswith(b"\n"):
            raise MalformedChain("chain file is truncated (no final newline)")
        lines = data[:-1].split(b"\n")
        if len(lines) < 2:
            raise MalformedChain("chain file needs a header and a closing line")
        try:
            header = canonical.decode(lines[0])
            footer = canonical.decode(lines[-1])
            if header.get("format") != CHAIN_FORMAT:
                raise MalformedChain(f"unknown chain format {header.get('format')!r}")
            authorities = tuple(
                AuthorityInfo(a["id"], from_hex(a["publicKeyHex"], KEY_SIZE)) for a in header["authorities"]
            )
            blocks = tuple(Block.from_document(canonical.decode(line)) for line in lines[1:-1])
            if set(footer) != {"end", "headHex"} or footer["end"] != len(blocks):
                raise MalformedChain(f"closing line names {footer.get('end')} blocks, file has {len(blocks)}")
            chain = cls(authorities, header["quorum"], blocks)
            head = from_hex(footer["headHex"], DIGEST_SIZE)
        except MalformedChain:
            raise
        except (PassportError, KeyError, TypeError, AttributeError, ValueError) as exc:
            raise MalformedChain(f"unparseable chain file: {exc}") from None
        if head != chain.head_digest:
            raise MalformedChain("closing line does not match the head block")
        return chain


def append_block(
    chain: RegistryChain,
    entries: Sequence[RegistryEntry],
    signers: Sequence[Authority],
    timestamp: datetime,
) -> RegistryChain:
    members = {a.id: a.public_key for a in chain.authority_set}
    signing = {}
    for signer in signers:
        if members.get(signer.id) != public_bytes(signer.signing_key):
            raise InsufficientQuorum(f"{signer.id} is not a member of this chain's authority set")
        signing[signer.id] = signer
    if len(signing) < chain.quorum:
        raise InsufficientQuorum(f"{len(signing)} distinct signers, quorum is {chain.quorum}")
    if chain.blocks and timestamp < chain.blocks[-1].timestamp:
        raise InvalidEntry("block timestamp precedes its parent")
    docs = dict(chain._documents)
    for entry in entries:
        _apply(docs, entry)
    block = Block(len(chain.blocks), chain.head_digest, timestamp, tuple(entries))
    header = block.header_digest()
    signatures = tuple((aid, signing[aid].signing_key.sign(header)) for aid in sorted(signing))
    block = Block(block.height, block.prev_hash, block.timestamp, block.entries, signatures)
    return RegistryChain(chain.authority_set, chain.quorum, chain.blocks + (block,))


def verify_chain(chain: RegistryChain, trusted: Iterable[Authority | AuthorityInfo] | None = None) -> Verdict:
    """Check heights, hash links, timestamps, quorum signatures and entry rules block by block.

    The authority set in the file header is the trust root and is not itself
    hash-linked; pass ``trusted`` to pin it to a known set.
    """
    if trusted is not None:
        pinned = tuple(a.public if isinstance(a, Authority) else a for a in trusted)
        if pinned != chain.authority_set:
            return Verdict.reject("UntrustedAuthoritySet", "file header names a different authority set")
    members = {a.id: a.public_key for a in chain.authority_set}
    docs: dict[Did, DidDocument] = {}
    prev = GENESIS_PREV
    prev_time = None
    for i, block in enumerate(chain.blocks):
        if block.height != i:
            return Verdict.reject("HeightGap", f"expected height {i}, found {block.height}", height=i)
        if block.prev_hash != prev:
            return Verdict.reject("LinkBroken", "prev_hash does not match parent digest", height=i)
        if prev_time is not None and block.timestamp < prev_time:
            return Verdict.reject("TimestampRegression", height=i)
        header = block.header_digest()
        valid = set()
        for aid, sig in block.signatures:
            if aid not in members or aid in valid:
                return Verdict.reject("BadSignature", f"unknown or repeated signer {aid!r}", height=i)
            if not verify_signature(members[aid], sig, header):
                return Verdict.reject("BadSignature", f"signature by {aid} does not verify", height=i)
            valid.add(aid)
        if len(valid) < chain.quorum:
            return Verdict.reject("InsufficientQuorum", f"{len(valid)} of {chain.quorum} signatures", height=i)
        try:
            for entry in block.entries:
                _apply(docs, entry)
        except PassportError as exc:
            return Verdict.reject(type(exc).__name__, str(exc), height=i)
        prev = header
        prev_time = block.timestamp
    return Verdict.accept()


def find_anchor(chain: RegistryChain, value: bytes) -> tuple[int, int] | None:
    """Locate the earliest plain-hash or salted-commitment anchor equal to ``value``."""
    for block in chain.blocks:
        for i, entry in enumerate(block.entries):
            if not isinstance(entry, CredentialAnchor):
                continue
            anchor = entry.anchor
            if isinstance(anchor, PlainHash) and anchor.digest == value:
                return block.height, i
            if isinstance(anchor, SaltedCommitmentAnchor) and anchor.commitment == value:
                return block.height, i
    return None


def public_event_log(chain: RegistryChain) -> list[Event]:
    events = []
    for block in chain.blocks:
        for i, entry in enumerate(block.entries):
            if isinstance(entry, (DidDocPublish, DidDocUpdate)):
                did, types = entry.document.id, tuple(entry.document.endpoint_types())
            else:
                did, types = entry.submitted_for, ()
            events.append(((block.timestamp, block.height, i), Event(block.timestamp, did, type(entry).__name__, types)))
    events.sort(key=lambda pair: pair[0])
    return [event for _, event in events]
