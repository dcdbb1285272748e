"""Decentralized identifiers: syntax, did:key derivation, documents and resolution.

Two methods resolve here. ``did:key`` is self-certifying: the identifier
embeds the Ed25519 public key, so the document is derived locally.
``did:sim`` documents live on the simulated registry and resolve to the
latest published version. Any other method (e.g. ``did:web``) parses as an
opaque identifier and can only be resolved through a :class:`Resolver`
stub table.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Any, Mapping, Protocol

from . import canonical
from .canonical import format_datetime, from_hex, parse_datetime, to_hex
from .errors import InvalidKey, MalformedDid, NonCanonicalValue, NotFound
from .keys import KEY_SIZE, load_public_key

B58_ALPHABET = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"
ED25519_MULTICODEC = b"\xed\x01"
KEY_ALGORITHM = "ed25519"
TESTING_FACILITY = "CovidTestingFacility"

_DID_RE = re.compile(r"did:([a-z0-9]+):([A-Za-z0-9._-]+)\Z")
_FRAGMENT_RE = re.compile(r"[A-Za-z0-9._-]+\Z")
_EPOCH = canonical.utc(1970, 1, 1)


def b58encode(data: bytes) -> str:
    n = int.from_bytes(data, "big")
    out = []
    while n:
        n, rem = divmod(n, 58)
        out.append(B58_ALPHABET[rem])
    pad = len(data) - len(data.lstrip(b"\0"))
    return "1" * pad + "".join(reversed(out))


def b58decode(text: str) -> bytes:
    n = 0
    for ch in text:
        idx = B58_ALPHABET.find(ch)
        if idx < 0:
            raise ValueError(f"invalid base58 character {ch!r}")
        n = n * 58 + idx
    pad = len(text) - len(text.lstrip("1"))
    body = n.to_bytes((n.bit_length() + 7) // 8, "big") if n else b""
    return b"\0" * pad + body


@dataclass(frozen=True, order=True)
class Did:
    method: str
    method_id: str

    def __post_init__(self):
        if not _DID_RE.match(f"did:{self.method}:{self.method_id}"):
            raise MalformedDid(f"malformed DID did:{self.method}:{self.method_id}")

    def __str__(self) -> str:
        return f"did:{self.method}:{self.method_id}"

    def url(self, fragment: str) -> str:
        return f"{self}#{fragment}"


def parse_did(text: str) -> Did:
    if not isinstance(text, str):
        raise MalformedDid(f"DID must be text, got {type(text).__name__}")
    m = _DID_RE.match(text)
    if not m:
        raise MalformedDid(f"malformed DID {text!r}")
    return Did(m.group(1), m.group(2))


def split_did_url(text: str) -> tuple[Did, str]:
    """Split ``did:...#fragment`` into the DID and its fragment."""
    base, sep, fragment = text.partition("#")
    if not sep or not _FRAGMENT_RE.match(fragment):
        raise MalformedDid(f"malformed DID URL {text!r}")
    return parse_did(base), fragment


@dataclass(frozen=True)
class VerificationMethod:
    id: str
    public_key: bytes
    algorithm: str = KEY_ALGORITHM

    def __post_init__(self):
        split_did_url(self.id)
        if len(self.public_key) != KEY_SIZE:
            raise InvalidKey(f"verification key must be {KEY_SIZE} octets")


@dataclass(frozen=True)
class ServiceEndpoint:
    id: str
    type: str
    url: str


@dataclass(frozen=True)
class DidDocument:
    id: Did
    verification_methods: tuple[VerificationMethod, ...]
    authentication: tuple[str, ...]
    service_endpoints: tuple[ServiceEndpoint, ...] = ()
    version: int = 1
    updated_at: datetime = field(default=_EPOCH)

    def __post_init__(self):
        object.__setattr__(self, "verification_methods", tuple(self.verification_methods))
        object.__setattr__(self, "authentication", tuple(self.authentication))
        object.__setattr__(self, "service_endpoints", tuple(self.service_endpoints))
        if self.version < 1:
            raise NonCanonicalValue("DID document version must be >= 1")
        ids = [vm.id for vm in self.verification_methods]
        if len(set(ids)) != len(ids):
            raise NonCanonicalValue("duplicate verification method id")
        for ref in self.authentication:
            if ref not in ids:
                raise NonCanonicalValue(f"authentication entry {ref} names no verification method")
        format_datetime(self.updated_at)

    def method(self, key_id: str) -> VerificationMethod | None:
        for vm in self.verification_methods:
            if vm.id == key_id:
                return vm
        return None

    def authentication_keys(self) -> list[bytes]:
        return [vm.public_key for vm in self.verification_methods if vm.id in self.authentication]

    def endpoint_types(self) -> list[str]:
        return [s.type for s in self.service_endpoints]

    def with_update(self, updated_at: datetime, **changes: Any) -> "DidDocument":
        return replace(self, version=self.version + 1, updated_at=updated_at, **changes)

    def to_document(self) -> dict[str, Any]:
        return {
            "id": str(self.id),
            "verificationMethod": [
                {"id": vm.id, "type": vm.algorithm, "publicKeyHex": to_hex(vm.public_key)}
                for vm in self.verification_methods
            ],
            "authentication": list(self.authentication),
            "service": [
                {"id": s.id, "type": s.type, "serviceEndpoint": s.url} for s in self.service_endpoints
            ],
            "version": self.version,
            "updated": format_datetime(self.updated_at),
        }

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "DidDocument":
        try:
            expected = {"id", "verificationMethod", "authentication", "service", "version", "updated"}
            if set(doc) != expected:
                raise NonCanonicalValue(f"DID document fields {sorted(doc)} != {sorted(expected)}")
            return cls(
                id=parse_did(doc["id"]),
                verification_methods=tuple(
                    VerificationMethod(vm["id"], from_hex(vm["publicKeyHex"], KEY_SIZE), vm["type"])
                    for vm in doc["verificationMethod"]
                ),
                authentication=tuple(doc["authentication"]),
                service_endpoints=tuple(
                    ServiceEndpoint(s["id"], s["type"], s["serviceEndpoint"]) for s in doc["service"]
                ),
                version=doc["version"],
                updated_at=parse_datetime(doc["updated"]),
            )
        except (KeyError, TypeError) as exc:
            raise NonCanonicalValue(f"malformed DID document: {exc!r}") from None

    def dumps(self) -> bytes:
        """Canonical text form, as written to ``.diddoc`` fixtures."""
        return canonical.encode(self.to_document())

    @classmethod
    def loads(cls, data: bytes | str) -> "DidDocument":
        return cls.from_document(canonical.decode(data))


def did_key_from_public_key(pk: bytes) -> tuple[Did, DidDocument]:
    """Derive the ``did:key`` identifier and its single-key document."""
    pk = bytes(pk)
    load_public_key(pk)
    did = Did("key", "z" + b58encode(ED25519_MULTICODEC + pk))
    key_id = did.url(did.method_id)
    doc = DidDocument(
        id=did,
        verification_methods=(VerificationMethod(key_id, pk),),
        authentication=(key_id,),
    )
    return did, doc


def public_key_from_did_key(did: Did) -> bytes:
    if did.method != "key" or not did.method_id.startswith("z"):
        raise MalformedDid(f"{did} is not a base58btc did:key")
    try:
        raw = b58decode(did.method_id[1:])
    except ValueError as exc:
        raise MalformedDid(str(exc)) from None
    if not raw.startswith(ED25519_MULTICODEC) or len(raw) != len(ED25519_MULTICODEC) + KEY_SIZE:
        raise MalformedDid(f"{did} does not carry an Ed25519 multicodec key")
    return raw[len(ED25519_MULTICODEC):]


class DocumentSource(Protocol):
    def latest_document(self, did: Did) -> DidDocument | None: ...


def resolve(did: Did | str, registry: DocumentSource | None) -> DidDocument:
    if isinstance(did, str):
        did = parse_did(did)
    if did.method == "key":
        try:
            pk = public_key_from_did_key(did)
            return did_key_from_public_key(pk)[1]
        except InvalidKey as exc:
            raise MalformedDid(f"{did}: {exc}") from None
    if did.method == "sim":
        doc = registry.latest_document(did) if registry is not None else None
        if doc is None:
            raise NotFound(f"{did} is not published on the registry")
        return doc
    raise NotFound(f"no resolver for method {did.method!r}")


class Resolver:
    """Resolve against a registry snapshot, with a local stub table for other methods.

    >>> Resolver(None)(parse_did("did:sim:nobody"))
    Traceback (most recent call last):
    ...
    immunipass.errors.NotFound: did:sim:nobody is not published on the registry
    """

    def __init__(self, registry: DocumentSource | None, stubs: Mapping[Did, DidDocument] | None = None):
        self.registry = registry
        self.stubs = dict(stubs or {})

    def __call__(self, did: Did | str) -> DidDocument:
        if isinstance(did, str):
            did = parse_did(did)
        if did in self.stubs:
            return self.stubs[did]
        return resolve(did, self.registry)
