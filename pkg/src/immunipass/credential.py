"""Immunity credential documents, canonical bytes, issuer proofs and verification.

Claim values are plain Python values; the supported kinds and their
canonical literal forms are

========  =========================  ==============================
kind      Python type                canonical form
========  =========================  ==============================
text      ``str``                    JSON string (NFC)
flag      ``bool``                   ``true`` / ``false``
date      ``datetime.date``          ``{"date":"1958-07-17"}``
datetime  ``datetime.datetime``      ``{"datetime":"...T..:..:..Z"}``
bytes     ``bytes``                  ``{"bytes":"<lowercase hex>"}``
========  =========================  ==============================

Two verification profiles exist. ``STRICT`` checks the issuer signature
byte-for-byte over the canonical body. ``PERMISSIVE`` is a deliberately
broken verifier that models the signature exclusion / replacement pitfalls of
detachable proofs over ambiguous serializations: it checks the signature over
a schema projection of the raw document, renders unknown ``*_display`` fields,
accepts a detached proof for any digest it has seen before, and accepts a
proof-less credential when the registry holds an anchor for its subject.
"""

from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass
from datetime import date, datetime
from typing import Any, Iterable, Mapping, Protocol

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from . import canonical
from .canonical import digest, format_date, format_datetime, from_hex, parse_date, parse_datetime, to_hex
from .did import Did, DidDocument, parse_did, split_did_url
from .errors import InvalidBody, MalformedDid, NonCanonicalValue, NotFound, PassportError, Verdict
from .keys import SIGNATURE_SIZE, verify_signature

PROOF_ALGORITHM = "ed25519-canonical-v1"
REQUIRED_TYPES = ("VerifiableCredential", "ImmunoglobulinDetectionTestCard")
SCHEMA_FIELDS = ("givenName", "familyName", "birthDate", "IgM", "IgG")
OPTIONAL_FIELDS = ("image",)
CLAIM_KINDS: dict[str, type] = {
    "givenName": str,
    "familyName": str,
    "birthDate": date,
    "IgM": bool,
    "IgG": bool,
    "image": bytes,
}
MAX_BYTES_CLAIM = 1 << 20
DISPLAY_SUFFIX = "_display"

_BODY_KEYS = ("id", "type", "issuer", "issuanceDate", "expirationDate", "credentialSubject")


class Attachment(str, enum.Enum):
    EMBEDDED = "Embedded"
    DETACHED = "Detached"


class VerifyProfile(str, enum.Enum):
    STRICT = "Strict"
    PERMISSIVE = "Permissive"


ClaimValue = str | bool | date | datetime | bytes


def encode_claim(value: ClaimValue) -> Any:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        return value
    if isinstance(value, datetime):
        return {"datetime": format_datetime(value)}
    if isinstance(value, date):
        return {"date": format_date(value)}
    if isinstance(value, (bytes, bytearray)):
        if len(value) > MAX_BYTES_CLAIM:
            raise NonCanonicalValue("bytes claim exceeds 1 MiB")
        return {"bytes": to_hex(value)}
    raise NonCanonicalValue(f"unsupported claim value {value!r}")


def decode_claim(raw: Any) -> ClaimValue:
    if isinstance(raw, (bool, str)):
        return raw
    if isinstance(raw, dict) and len(raw) == 1:
        (tag, text), = raw.items()
        if tag == "date":
            return parse_date(text)
        if tag == "datetime":
            return parse_datetime(text)
        if tag == "bytes":
            out = from_hex(text)
            if len(out) > MAX_BYTES_CLAIM:
                raise NonCanonicalValue("bytes claim exceeds 1 MiB")
            return out
    raise NonCanonicalValue(f"unrecognised claim encoding {raw!r:.60}")


def _claim_matches_kind(name: str, value: Any) -> bool:
    kind = CLAIM_KINDS[name]
    if kind is date:
        return isinstance(value, date) and not isinstance(value, datetime)
    if kind is bytes:
        return isinstance(value, (bytes, bytearray))
    return isinstance(value, kind)


@dataclass(frozen=True)
class CredentialBody:
    id: str
    credential_types: tuple[str, ...]
    issuer_did: Did
    issuance_date: datetime
    expiration_date: datetime
    subject_did: Did
    claims: Mapping[str, ClaimValue]

    def __post_init__(self):
        object.__setattr__(self, "credential_types", tuple(self.credential_types))
        claims = {}
        for name, value in dict(self.claims).items():
            if isinstance(value, str):
                value = unicodedata.normalize("NFC", value)
            elif isinstance(value, bytearray):
                value = bytes(value)
            claims[name] = value
        object.__setattr__(self, "claims", claims)
        object.__setattr__(self, "id", unicodedata.normalize("NFC", self.id))
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise InvalidBody("credential id must be a non-empty URI string")
        missing = [t for t in REQUIRED_TYPES if t not in self.credential_types]
        if missing:
            raise InvalidBody(f"credential types lack {missing}")
        if len(set(self.credential_types)) != len(self.credential_types):
            raise InvalidBody("duplicate credential type")
        if not isinstance(self.issuer_did, Did) or not isinstance(self.subject_did, Did):
            raise InvalidBody("issuer and subject must be parsed DIDs")
        try:
            format_datetime(self.issuance_date)
            format_datetime(self.expiration_date)
        except NonCanonicalValue as exc:
            raise InvalidBody(str(exc)) from None
        if not self.issuance_date < self.expiration_date:
            raise InvalidBody("issuance date must precede expiration date")
        names = set(self.claims)
        if not set(SCHEMA_FIELDS) <= names or not names <= set(SCHEMA_FIELDS) | set(OPTIONAL_FIELDS):
            raise InvalidBody(f"claim fields {sorted(names)} do not match the immunity card schema")
        for name, value in self.claims.items():
            if not _claim_matches_kind(name, value):
                raise InvalidBody(f"claim {name} has wrong kind {type(value).__name__}")
            if isinstance(value, bytes) and len(value) > MAX_BYTES_CLAIM:
                raise InvalidBody(f"claim {name} exceeds 1 MiB")

    def to_document(self) -> dict[str, Any]:
        subject: dict[str, Any] = {"id": str(self.subject_did)}
        for name, value in self.claims.items():
            subject[name] = encode_claim(value)
        return {
            "id": self.id,
            "type": list(self.credential_types),
            "issuer": str(self.issuer_did),
            "issuanceDate": format_datetime(self.issuance_date),
            "expirationDate": format_datetime(self.expiration_date),
            "credentialSubject": subject,
        }

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "CredentialBody":
        if not isinstance(doc, Mapping) or set(doc) != set(_BODY_KEYS):
            raise InvalidBody(f"credential body fields {sorted(doc) if isinstance(doc, Mapping) else doc!r}")
        subject = doc["credentialSubject"]
        if not isinstance(subject, Mapping) or "id" not in subject:
            raise InvalidBody("credentialSubject must carry an id")
        types = doc["type"]
        if not isinstance(types, list) or not all(isinstance(t, str) for t in types):
            raise InvalidBody("type must be a list of names")
        try:
            return cls(
                id=doc["id"],
                credential_types=tuple(types),
                issuer_did=parse_did(doc["issuer"]),
                issuance_date=parse_datetime(doc["issuanceDate"]),
                expiration_date=parse_datetime(doc["expirationDate"]),
                subject_did=parse_did(subject["id"]),
                claims={k: decode_claim(v) for k, v in subject.items() if k != "id"},
            )
        except MalformedDid as exc:
            raise InvalidBody(str(exc)) from None


def canonicalize(body: CredentialBody) -> bytes:
    body.validate()
    return canonical.encode(body.to_document())


def parse(data: bytes | str) -> CredentialBody:
    return CredentialBody.from_document(canonical.decode(data))


def body_digest(body: CredentialBody) -> bytes:
    return digest(canonicalize(body))


@dataclass(frozen=True)
class Proof:
    verification_method: str
    created: datetime
    signature: bytes
    attachment: Attachment = Attachment.EMBEDDED
    body_digest: bytes | None = None
    algorithm: str = PROOF_ALGORITHM

    def __post_init__(self):
        object.__setattr__(self, "attachment", Attachment(self.attachment))
        if len(self.signature) != SIGNATURE_SIZE:
            raise NonCanonicalValue(f"signature must be {SIGNATURE_SIZE} octets")
        if self.attachment is Attachment.DETACHED:
            if self.body_digest is None or len(self.body_digest) != canonical.DIGEST_SIZE:
                raise NonCanonicalValue("detached proof needs a 32-octet body digest")
        elif self.body_digest is not None:
            raise NonCanonicalValue("embedded proof carries no body digest")

    def signed_message(self, body_bytes: bytes) -> bytes:
        if self.attachment is Attachment.DETACHED:
            return self.body_digest
        return body_bytes

    def to_document(self) -> dict[str, Any]:
        doc = {
            "type": self.algorithm,
            "verificationMethod": self.verification_method,
            "created": format_datetime(self.created),
            "signatureHex": to_hex(self.signature),
            "attachment": self.attachment.value,
        }
        if self.body_digest is not None:
            doc["bodyDigestHex"] = to_hex(self.body_digest)
        return doc

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "Proof":
        try:
            if doc["type"] != PROOF_ALGORITHM:
                raise NonCanonicalValue(f"unsupported proof algorithm {doc['type']!r}")
            extra = set(doc) - {"type", "verificationMethod", "created", "signatureHex", "attachment", "bodyDigestHex"}
            if extra:
                raise NonCanonicalValue(f"unknown proof fields {sorted(extra)}")
            raw_digest = doc.get("bodyDigestHex")
            return cls(
                verification_method=doc["verificationMethod"],
                created=parse_datetime(doc["created"]),
                signature=from_hex(doc["signatureHex"], SIGNATURE_SIZE),
                attachment=Attachment(doc["attachment"]),
                body_digest=from_hex(raw_digest, canonical.DIGEST_SIZE) if raw_digest is not None else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise NonCanonicalValue(f"malformed proof: {exc!r}") from None


@dataclass(frozen=True)
class VerifiableCredential:
    body: CredentialBody
    proof: Proof

    def to_document(self) -> dict[str, Any]:
        doc = self.body.to_document()
        doc["proof"] = self.proof.to_document()
        return doc

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "VerifiableCredential":
        doc = dict(doc)
        proof = doc.pop("proof", None)
        if proof is None:
            raise InvalidBody("credential carries no proof")
        return cls(CredentialBody.from_document(doc), Proof.from_document(proof))

    def dumps(self) -> bytes:
        """Canonical text form, the content of a ``.vc`` file (without trailing newline)."""
        return canonical.encode(self.to_document())

    @classmethod
    def loads(cls, data: bytes | str) -> "VerifiableCredential":
        return cls.from_document(load_document(data))


def load_document(data: bytes | str) -> dict[str, Any]:
    """Decode a ``.vc`` file into its raw document, keeping any unknown fields."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    doc = canonical.decode(data.rstrip(b"\n"))
    if not isinstance(doc, dict):
        raise NonCanonicalValue("credential file must hold one object")
    return doc


def signed_preimage(vc: VerifiableCredential) -> bytes:
    """Octets a registry anchor commits to: the canonical body followed by the issuer signature."""
    return canonicalize(vc.body) + vc.proof.signature


def anchor_digest(vc: VerifiableCredential) -> bytes:
    return digest(signed_preimage(vc))


def sign_credential(
    body: CredentialBody,
    issuer_key: Ed25519PrivateKey,
    mode: Attachment = Attachment.EMBEDDED,
    *,
    verification_method: str | None = None,
    created: datetime | None = None,
) -> VerifiableCredential:
    body_bytes = canonicalize(body)
    method = verification_method or body.issuer_did.url("key-1")
    try:
        signer_did, _ = split_did_url(method)
    except MalformedDid as exc:
        raise InvalidBody(str(exc)) from None
    if signer_did != body.issuer_did:
        raise InvalidBody(f"verification method {method} does not belong to issuer {body.issuer_did}")
    mode = Attachment(mode)
    if mode is Attachment.DETACHED:
        bdig = digest(body_bytes)
        proof = Proof(method, created or body.issuance_date, issuer_key.sign(bdig), mode, bdig)
    else:
        proof = Proof(method, created or body.issuance_date, issuer_key.sign(body_bytes), mode)
    return VerifiableCredential(body, proof)


class AnchorIndex(Protocol):
    def anchors_for(self, did: Did) -> list[Any]: ...


def _resolve_key(resolver, method: str, issuer: Did | None) -> tuple[bytes | None, Verdict | None]:
    try:
        owner, _ = split_did_url(method)
    except MalformedDid:
        return None, Verdict.reject("UnknownVerificationMethod", f"malformed method {method!r}")
    if issuer is not None and owner != issuer:
        return None, Verdict.reject("UnknownVerificationMethod", f"{method} is not a key of {issuer}")
    try:
        doc: DidDocument = resolver(owner)
    except (NotFound, MalformedDid, PassportError) as exc:
        return None, Verdict.reject("ResolutionFailure", str(exc))
    vm = doc.method(method)
    if vm is None:
        return None, Verdict.reject("UnknownVerificationMethod", f"{method} not in document of {owner}")
    return vm.public_key, None


def _check_validity(body: CredentialBody, now: datetime | None) -> Verdict | None:
    if now is None:
        return None
    if now >= body.expiration_date:
        return Verdict.reject("Expired", f"expired at {format_datetime(body.expiration_date)}")
    if now < body.issuance_date:
        return Verdict.reject("NotYetValid", f"valid from {format_datetime(body.issuance_date)}")
    return None


def display_claims(subject: Mapping[str, Any]) -> dict[str, Any]:
    """What a permissive verifier renders: schema claims, overridden by ``<name>_display`` fields."""
    shown: dict[str, Any] = {}
    for name, raw in subject.items():
        if name == "id" or name.endswith(DISPLAY_SUFFIX):
            continue
        try:
            shown[name] = decode_claim(raw)
        except NonCanonicalValue:
            shown[name] = raw
    for name, raw in subject.items():
        if name.endswith(DISPLAY_SUFFIX):
            shown[name[: -len(DISPLAY_SUFFIX)]] = raw
    return shown


def _project(doc: Mapping[str, Any]) -> dict[str, Any]:
    projected = {k: doc[k] for k in _BODY_KEYS if k in doc and k != "credentialSubject"}
    subject = doc.get("credentialSubject")
    if isinstance(subject, Mapping):
        keep = ("id",) + SCHEMA_FIELDS + OPTIONAL_FIELDS
        projected["credentialSubject"] = {k: v for k, v in subject.items() if k in keep}
    return projected


def verify_credential(
    vc: VerifiableCredential | Mapping[str, Any],
    resolver,
    profile: VerifyProfile = VerifyProfile.STRICT,
    *,
    now: datetime | None = None,
    registry: AnchorIndex | None = None,
    seen_digests: Iterable[bytes] = (),
) -> Verdict:
    """Check an issuer proof under ``profile``.

    ``vc`` may be a parsed credential or the raw document read from a
    ``.vc`` file; raw documents are how injected or stripped fields reach the
    verifier. Expiry is only enforced when ``now`` is supplied.
    """
    doc = vc.to_document() if isinstance(vc, VerifiableCredential) else dict(vc)
    if VerifyProfile(profile) is VerifyProfile.STRICT:
        return _verify_strict(doc, resolver, now)
    return _verify_permissive(doc, resolver, now, registry, frozenset(seen_digests))


def _verify_strict(doc: dict[str, Any], resolver, now: datetime | None) -> Verdict:
    raw_proof = doc.pop("proof", None)
    if raw_proof is None:
        return Verdict.reject("SignatureMismatch", "no proof attached")
    try:
        proof = Proof.from_document(raw_proof)
        body_bytes = canonical.encode(doc)
        issuer = parse_did(doc.get("issuer"))
    except PassportError as exc:
        return Verdict.reject("SignatureMismatch", str(exc))
    key, failure = _resolve_key(resolver, proof.verification_method, issuer)
    if failure is not None:
        return failure
    if proof.attachment is Attachment.DETACHED and proof.body_digest != digest(body_bytes):
        return Verdict.reject("SignatureMismatch", "detached proof names a different body")
    if not verify_signature(key, proof.signature, proof.signed_message(body_bytes)):
        return Verdict.reject("SignatureMismatch", "issuer signature does not cover these bytes")
    try:
        body = CredentialBody.from_document(doc)
    except PassportError as exc:
        return Verdict.reject("InvalidBody", str(exc))
    if canonicalize(body) != body_bytes:
        return Verdict.reject("SignatureMismatch", "signed bytes are not the canonical body")
    expired = _check_validity(body, now)
    if expired is not None:
        return expired
    return Verdict.accept(display=dict(body.claims))


def _verify_permissive(
    doc: dict[str, Any], resolver, now: datetime | None, registry: AnchorIndex | None, seen: frozenset[bytes]
) -> Verdict:
    raw_proof = doc.pop("proof", None)
    projected = _project(doc)
    try:
        body = CredentialBody.from_document(projected)
    except PassportError as exc:
        return Verdict.reject("InvalidBody", str(exc))
    display = display_claims(doc.get("credentialSubject", {}))

    if raw_proof is None:
        # signature exclusion: an on-chain anchor for the subject stands in for the proof
        anchors = registry.anchors_for(body.subject_did) if registry is not None else []
        if not anchors:
            return Verdict.reject("SignatureMismatch", "no proof and no anchor for subject")
    else:
        try:
            proof = Proof.from_document(raw_proof)
        except PassportError as exc:
            return Verdict.reject("SignatureMismatch", str(exc))
        key, failure = _resolve_key(resolver, proof.verification_method, None)
        if failure is not None:
            return failure
        body_bytes = canonical.encode(projected)
        if not verify_signature(key, proof.signature, proof.signed_message(body_bytes)):
            return Verdict.reject("SignatureMismatch", "signature does not cover projected body")
        if proof.attachment is Attachment.DETACHED:
            if proof.body_digest != digest(body_bytes) and proof.body_digest not in seen:
                return Verdict.reject("SignatureMismatch", "detached digest unknown")
    expired = _check_validity(body, now)
    if expired is not None:
        return expired
    return Verdict.accept(display=display)


def one_calendar_year(start: datetime) -> datetime:
    """Same wall-clock instant one year later; 29 February maps to 28 February."""
    try:
        return start.replace(year=start.year + 1)
    except ValueError:
        return start.replace(year=start.year + 1, day=28)


def validity_window(issued: datetime) -> tuple[datetime, datetime]:
    return issued, one_calendar_year(issued)


__all__ = [
    "Attachment",
    "ClaimValue",
    "CredentialBody",
    "Proof",
    "VerifiableCredential",
    "VerifyProfile",
    "anchor_digest",
    "body_digest",
    "canonicalize",
    "display_claims",
    "load_document",
    "parse",
    "sign_credential",
    "signed_preimage",
    "verify_credential",
]
