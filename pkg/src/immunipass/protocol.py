"""Issuer / holder / verifier actors for the immunity-passport flow.

Step 1: hospital and patient register ``did:sim`` identifiers on the
registry. Step 2: the hospital signs the test result; the patient anchors a
fingerprint of the signed credential on-chain. Step 3: the patient presents
the credential; the verifier checks the issuer signature, the anchor and the
validity window.

``Profile.BASELINE`` follows that flow as published: plain-hash anchors and
bare-credential presentations. ``Profile.HARDENED`` anchors a salted
commitment (or a sealed ciphertext) and binds every presentation to a
verifier-signed, single-use challenge with the holder's key.
"""

from __future__ import annotations

import enum
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from typing import Any, Mapping, Sequence

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from . import canonical
from .canonical import Entropy, digest, format_datetime, from_hex, parse_datetime, system_entropy, to_hex
from .credential import (
    REQUIRED_TYPES,
    CredentialBody,
    VerifiableCredential,
    VerifyProfile,
    canonicalize,
    sign_credential,
    signed_preimage,
    validity_window,
    verify_credential,
)
from .did import TESTING_FACILITY, Did, DidDocument, Resolver, ServiceEndpoint, VerificationMethod, parse_did
from .errors import InvalidBody, InvalidChallenge, MissingCredential, PassportError, Verdict
from .hardened import commit, commitment_value, open_sealed, seal
from .keys import SIGNATURE_SIZE, new_agreement_key, new_signing_key, public_bytes, seed_bytes, verify_signature
from .registry import (
    Authority,
    CredentialAnchor,
    DidDocPublish,
    PlainHash,
    RegistryChain,
    SealedAnchor,
    append_block,
    find_anchor,
)

NONCE_SIZE = 16
CHALLENGE_TTL = timedelta(minutes=5)


class Profile(str, enum.Enum):
    BASELINE = "Baseline"
    HARDENED = "Hardened"


class ActorKind(str, enum.Enum):
    HOSPITAL = "hospital"
    PATIENT = "patient"
    VERIFIER = "verifier"


class AnchorMode(str, enum.Enum):
    PLAIN = "plain"
    SALTED = "salted"
    SEALED = "sealed"


@dataclass(frozen=True)
class Consortium:
    """The proof-of-authority writers. Holds the authority secrets; chains only see public keys."""

    authorities: tuple[Authority, ...]
    quorum: int

    @classmethod
    def generate(cls, n: int = 3, quorum: int = 2, entropy: Entropy = system_entropy) -> "Consortium":
        return cls(tuple(Authority(f"authority-{i + 1}", new_signing_key(entropy)) for i in range(n)), quorum)

    def genesis(self) -> RegistryChain:
        return RegistryChain.create(self.authorities, self.quorum)

    def append(self, chain: RegistryChain, entries: Sequence, timestamp: datetime) -> RegistryChain:
        return append_block(chain, entries, self.authorities[: self.quorum], timestamp)


@dataclass(frozen=True)
class Issuer:
    name: str
    did: Did
    signing_key: Ed25519PrivateKey = field(repr=False, compare=False)

    @property
    def key_id(self) -> str:
        return self.did.url("key-1")


@dataclass(frozen=True)
class HolderState:
    name: str
    did: Did
    signing_key: Ed25519PrivateKey = field(repr=False, compare=False)
    credential: VerifiableCredential | None = None
    anchor_mode: AnchorMode | None = None
    anchor_secret: bytes | None = field(default=None, repr=False)

    @property
    def key_id(self) -> str:
        return self.did.url("key-1")


@dataclass(frozen=True)
class Challenge:
    nonce: bytes
    verifier_did: Did
    expires_at: datetime
    verifier_signature: bytes | None = None

    def message(self) -> bytes:
        return _framed(self.nonce, str(self.verifier_did).encode(), format_datetime(self.expires_at).encode())

    def to_document(self) -> dict[str, Any]:
        doc = {
            "nonceHex": to_hex(self.nonce),
            "verifier": str(self.verifier_did),
            "expires": format_datetime(self.expires_at),
        }
        if self.verifier_signature is not None:
            doc["signatureHex"] = to_hex(self.verifier_signature)
        return doc

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "Challenge":
        sig = doc.get("signatureHex")
        return cls(
            from_hex(doc["nonceHex"], NONCE_SIZE),
            parse_did(doc["verifier"]),
            parse_datetime(doc["expires"]),
            from_hex(sig, SIGNATURE_SIZE) if sig is not None else None,
        )


@dataclass
class VerifierState:
    """A relying party. Mutable: remembers issued and spent nonces and every presentation it saw."""

    name: str
    did: Did
    signing_key: Ed25519PrivateKey = field(repr=False)
    issued: dict[bytes, Challenge] = field(default_factory=dict)
    seen_nonces: set[bytes] = field(default_factory=set)
    retained: list["Presentation"] = field(default_factory=list)


def _framed(*parts: bytes) -> bytes:
    return b"".join(len(p).to_bytes(4, "big") + p for p in parts)


def holder_proof_message(body: CredentialBody, challenge: Challenge) -> bytes:
    return _framed(
        canonicalize(body),
        challenge.nonce,
        str(challenge.verifier_did).encode(),
        format_datetime(challenge.expires_at).encode(),
    )


@dataclass(frozen=True)
class HolderProof:
    challenge: Challenge
    signature: bytes


@dataclass(frozen=True)
class Disclosure:
    """Secret the holder hands over so the verifier can match the on-chain anchor."""

    mode: AnchorMode
    secret: bytes


@dataclass(frozen=True)
class Presentation:
    credential: VerifiableCredential
    holder_proof: HolderProof | None = None
    disclosed_secret: Disclosure | None = None

    def to_document(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"credential": self.credential.to_document()}
        if self.holder_proof is not None:
            doc["holderProof"] = {
                "challenge": self.holder_proof.challenge.to_document(),
                "signatureHex": to_hex(self.holder_proof.signature),
            }
        if self.disclosed_secret is not None:
            doc["disclosure"] = {"mode": self.disclosed_secret.mode.value, "secretHex": to_hex(self.disclosed_secret.secret)}
        return doc

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "Presentation":
        proof = doc.get("holderProof")
        disclosure = doc.get("disclosure")
        return cls(
            VerifiableCredential.from_document(doc["credential"]),
            HolderProof(Challenge.from_document(proof["challenge"]), from_hex(proof["signatureHex"], SIGNATURE_SIZE))
            if proof
            else None,
            Disclosure(AnchorMode(disclosure["mode"]), from_hex(disclosure["secretHex"])) if disclosure else None,
        )

    def dumps(self) -> bytes:
        return canonical.encode(self.to_document())

    @classmethod
    def loads(cls, data: bytes | str) -> "Presentation":
        return cls.from_document(canonical.decode(data))


@dataclass(frozen=True)
class VerifierDecision:
    verdict: Verdict
    checks: tuple[tuple[str, bool], ...]

    @property
    def accepted(self) -> bool:
        return self.verdict.accepted

    def __str__(self) -> str:
        marks = " ".join(f"{name}={'pass' if ok else 'FAIL'}" for name, ok in self.checks)
        return f"{self.verdict} [{marks}]"


def _actor_document(did: Did, key: Ed25519PrivateKey, kind: ActorKind, name: str, now: datetime) -> DidDocument:
    key_id = did.url("key-1")
    services = ()
    if kind is ActorKind.HOSPITAL:
        services = (ServiceEndpoint(did.url("testing"), TESTING_FACILITY, f"https://{name}.example/covid-testing"),)
    return DidDocument(
        id=did,
        verification_methods=(VerificationMethod(key_id, public_bytes(key)),),
        authentication=(key_id,),
        service_endpoints=services,
        version=1,
        updated_at=now,
    )


def register_actor(
    kind: ActorKind | str,
    name: str,
    chain: RegistryChain,
    consortium: Consortium,
    now: datetime,
    entropy: Entropy = system_entropy,
):
    """Create an actor with a fresh key and publish its ``did:sim`` document in one block."""
    kind = ActorKind(kind)
    did = Did("sim", name)
    key = new_signing_key(entropy)
    chain = consortium.append(chain, [DidDocPublish(_actor_document(did, key, kind, name, now))], now)
    if kind is ActorKind.HOSPITAL:
        return Issuer(name, did, key), chain
    if kind is ActorKind.PATIENT:
        return HolderState(name, did, key), chain
    return VerifierState(name, did, key), chain


def issue_test_result(
    hospital: Issuer,
    patient_did: Did,
    identity: Mapping[str, Any],
    igm: bool,
    igg: bool,
    now: datetime,
    entropy: Entropy = system_entropy,
) -> VerifiableCredential:
    photo = identity.get("image")
    if not isinstance(photo, (bytes, bytearray)) or not photo:
        raise InvalidBody("identity check needs a photo digest to embed in the credential")
    issued, expires = validity_window(now)
    claims = {
        "givenName": identity["givenName"],
        "familyName": identity["familyName"],
        "birthDate": identity["birthDate"],
        "IgM": bool(igm),
        "IgG": bool(igg),
        "image": bytes(photo),
    }
    body = CredentialBody(
        id=f"urn:uuid:{uuid.UUID(bytes=entropy(16), version=4)}",
        credential_types=REQUIRED_TYPES,
        issuer_did=hospital.did,
        issuance_date=issued,
        expiration_date=expires,
        subject_did=patient_did,
        claims=claims,
    )
    return sign_credential(body, hospital.signing_key, verification_method=hospital.key_id, created=now)


def anchor_credential(
    holder: HolderState,
    vc: VerifiableCredential,
    profile: Profile | str,
    chain: RegistryChain,
    consortium: Consortium,
    now: datetime,
    mode: AnchorMode | str = AnchorMode.SALTED,
    entropy: Entropy = system_entropy,
) -> tuple[HolderState, RegistryChain]:
    """Submit the credential fingerprint to an authority, which writes it in the next block."""
    if vc.body.subject_did != holder.did:
        raise MissingCredential(f"{holder.did} is not the subject of {vc.body.id}")
    preimage = signed_preimage(vc)
    if Profile(profile) is Profile.BASELINE:
        payload, mode, secret = PlainHash(digest(preimage)), AnchorMode.PLAIN, None
    elif AnchorMode(mode) is AnchorMode.SEALED:
        ephemeral = new_agreement_key(entropy)
        payload = seal(digest(preimage), public_bytes(ephemeral), entropy)
        mode, secret = AnchorMode.SEALED, seed_bytes(ephemeral)
    else:
        salted = commit(preimage, entropy)
        payload, mode, secret = salted.anchor(), AnchorMode.SALTED, salted.salt
    chain = consortium.append(chain, [CredentialAnchor(payload, holder.did)], now)
    return replace(holder, credential=vc, anchor_mode=mode, anchor_secret=secret), chain


def issue_challenge(
    verifier: VerifierState,
    profile: Profile | str,
    now: datetime,
    entropy: Entropy = system_entropy,
    ttl: timedelta = CHALLENGE_TTL,
) -> Challenge:
    challenge = Challenge(entropy(NONCE_SIZE), verifier.did, now + ttl)
    if Profile(profile) is Profile.HARDENED:
        challenge = replace(challenge, verifier_signature=verifier.signing_key.sign(challenge.message()))
    verifier.issued[challenge.nonce] = challenge
    return challenge


def _challenge_signed_by(challenge: Challenge, resolver) -> bool:
    if challenge.verifier_signature is None:
        return False
    try:
        doc = resolver(challenge.verifier_did)
    except PassportError:
        return False
    return any(verify_signature(pk, challenge.verifier_signature, challenge.message()) for pk in doc.authentication_keys())


def present(
    holder: HolderState,
    verifier_did: Did,
    challenge: Challenge | None,
    profile: Profile | str,
    *,
    now: datetime | None = None,
    resolver=None,
) -> Presentation:
    if holder.credential is None:
        raise MissingCredential(f"{holder.did} holds no credential")
    disclosure = None
    if holder.anchor_secret is not None:
        disclosure = Disclosure(holder.anchor_mode, holder.anchor_secret)
    if Profile(profile) is Profile.BASELINE:
        return Presentation(holder.credential, None, disclosure)

    if challenge is None or challenge.verifier_signature is None:
        raise InvalidChallenge("hardened presentations need a verifier-signed challenge")
    if challenge.verifier_did != verifier_did:
        raise InvalidChallenge(f"challenge names {challenge.verifier_did}, not {verifier_did}")
    if now is not None and now >= challenge.expires_at:
        raise InvalidChallenge("challenge has expired")
    if resolver is not None and not _challenge_signed_by(challenge, resolver):
        raise InvalidChallenge("challenge signature does not verify")
    signature = holder.signing_key.sign(holder_proof_message(holder.credential.body, challenge))
    return Presentation(holder.credential, HolderProof(challenge, signature), disclosure)


def _anchor_matches(chain: RegistryChain, vc: VerifiableCredential, disclosure: Disclosure | None) -> bool:
    preimage = signed_preimage(vc)
    if disclosure is None or disclosure.mode is AnchorMode.PLAIN:
        return find_anchor(chain, digest(preimage)) is not None
    if disclosure.mode is AnchorMode.SALTED:
        return find_anchor(chain, commitment_value(disclosure.secret, preimage)) is not None
    target = digest(preimage)
    for _, _, anchor in chain.anchors_for(vc.body.subject_did):
        if isinstance(anchor, SealedAnchor):
            try:
                if open_sealed(anchor, disclosure.secret) == target:
                    return True
            except PassportError:
                continue
    return False


def verify_presentation(
    verifier: VerifierState,
    presentation: Presentation,
    chain: RegistryChain,
    now: datetime,
    profile: Profile | str,
    resolver=None,
) -> VerifierDecision:
    """Run every applicable check and reject with the first failing check's reason."""
    profile = Profile(profile)
    resolver = resolver or Resolver(chain)
    vc = presentation.credential
    verifier.retained.append(presentation)
    checks: list[tuple[str, bool]] = []
    reasons: list[str] = []

    def record(name: str, ok: bool, reason: str) -> None:
        checks.append((name, ok))
        if not ok:
            reasons.append(reason)

    sig = verify_credential(vc, resolver, VerifyProfile.STRICT)
    record("issuer_signature", sig.accepted, sig.reason or "")
    record("anchor_match", _anchor_matches(chain, vc, presentation.disclosed_secret), "AnchorNotFound")
    body = vc.body
    in_window = body.issuance_date <= now < body.expiration_date
    record("expiry", in_window, "Expired" if now >= body.expiration_date else "NotYetValid")

    if profile is Profile.HARDENED:
        proof = presentation.holder_proof
        bound = False
        if proof is not None:
            try:
                keys = resolver(body.subject_did).authentication_keys()
            except PassportError:
                keys = []
            message = holder_proof_message(body, proof.challenge)
            bound = any(verify_signature(pk, proof.signature, message) for pk in keys)
        record("holder_binding", bound, "HolderBindingFailure")

        fresh, why = False, "InvalidChallenge"
        if proof is not None:
            ch = proof.challenge
            if ch.verifier_did != verifier.did:
                why = "InvalidChallenge"
            elif ch.verifier_signature is None or not verify_signature(
                public_bytes(verifier.signing_key), ch.verifier_signature, ch.message()
            ):
                why = "InvalidChallenge"
            elif verifier.issued.get(ch.nonce) != ch:
                why = "InvalidChallenge"
            elif ch.nonce in verifier.seen_nonces:
                why = "ReplayedChallenge"
            elif now >= ch.expires_at:
                why = "InvalidChallenge"
            else:
                fresh = True
            if ch.verifier_did == verifier.did:
                verifier.seen_nonces.add(ch.nonce)
        record("challenge_freshness", fresh, why)

    verdict = Verdict.reject(reasons[0]) if reasons else Verdict.accept(display=dict(body.claims))
    return VerifierDecision(verdict, tuple(checks))
