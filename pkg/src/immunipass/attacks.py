"""Adversaries against the immunity-passport flow.

Each attack returns an :class:`AttackReport`. Attackers only ever receive
public values: anchors read from a chain, a captured presentation, a
credential envelope, the public event log.
"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import Any, Iterable, Mapping, Sequence

from . import canonical
from .canonical import digest, format_datetime, from_hex, parse_datetime, to_hex
from .credential import (
    OPTIONAL_FIELDS,
    SCHEMA_FIELDS,
    VerifiableCredential,
    VerifyProfile,
    encode_claim,
    verify_credential,
)
from .did import TESTING_FACILITY, Did, parse_did
from .protocol import HolderProof, Presentation, Profile, VerifierState, issue_challenge, verify_presentation
from .registry import AnchorPayload, Event, PlainHash, RegistryChain, SaltedCommitmentAnchor

FLAGS = (False, True)


@dataclass
class AttackReport:
    name: str
    profile: str
    succeeded: bool
    work: int
    narrative: str
    recovered: Any = None
    elapsed: float = 0.0
    details: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.work < 1:
            raise ValueError("an attack performs at least one oracle query")
        if self.succeeded and not self.recovered:
            raise ValueError("a successful attack must carry its evidence")

    def to_text(self, timings: bool = True) -> str:
        """Render as ``key: value`` lines; ``timings=False`` drops the only non-deterministic field."""
        lines = [
            f"attack: {self.name}",
            f"profile: {self.profile}",
            f"succeeded: {str(self.succeeded).lower()}",
            f"work: {self.work}",
        ]
        if timings:
            lines.append(f"elapsed_s: {self.elapsed:.6f}")
        lines.append(f"recovered: {_render(self.recovered)}")
        for key in sorted(self.details):
            lines.append(f"{key}: {_render(self.details[key])}")
        lines.append(f"narrative: {self.narrative}")
        return "\n".join(lines) + "\n"


def _render(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, Mapping):
        return "{" + ", ".join(f"{k}={_render(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + "; ".join(_render(v) for v in value) + "]"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, datetime):
        return format_datetime(value)
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, bytes):
        return value.hex()
    return str(value)


# -- dictionary attack -------------------------------------------------------


@dataclass(frozen=True)
class DateRange(Sequence):
    """Every calendar day from ``start`` to ``end`` inclusive."""

    start: date
    end: date

    def __len__(self) -> int:
        return max(0, (self.end - self.start).days + 1)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return self.start + timedelta(days=i)


@dataclass(frozen=True)
class ClaimTemplate:
    known: Mapping[str, Any]
    unknown: Mapping[str, Sequence[Any]]

    def __post_init__(self):
        overlap = set(self.known) & set(self.unknown)
        if overlap:
            raise ValueError(f"fields both known and unknown: {sorted(overlap)}")
        names = set(self.known) | set(self.unknown)
        if not set(SCHEMA_FIELDS) <= names <= set(SCHEMA_FIELDS) | set(OPTIONAL_FIELDS):
            raise ValueError(f"template fields {sorted(names)} do not cover the credential schema")

    @property
    def size(self) -> int:
        n = 1
        for domain in self.unknown.values():
            n *= len(domain)
        return n

    def candidate(self, index: int) -> dict[str, Any]:
        """Mixed-radix decode; the first unknown field is the outermost loop."""
        out = {}
        for name, domain in reversed(list(self.unknown.items())):
            index, digit = divmod(index, len(domain))
            out[name] = domain[digit]
        return {name: out[name] for name in self.unknown}


@dataclass(frozen=True)
class PublicContext:
    """Credential envelope the adversary is assumed to hold: everything except the claims."""

    credential_id: str
    credential_types: tuple[str, ...]
    issuer_did: Did
    subject_did: Did
    issuance_date: datetime
    expiration_date: datetime
    signature: bytes

    @classmethod
    def from_credential(cls, vc: VerifiableCredential) -> "PublicContext":
        b = vc.body
        return cls(b.id, b.credential_types, b.issuer_did, b.subject_did, b.issuance_date, b.expiration_date, vc.proof.signature)

    def to_document(self) -> dict[str, Any]:
        return {
            "id": self.credential_id,
            "type": list(self.credential_types),
            "issuer": str(self.issuer_did),
            "subject": str(self.subject_did),
            "issuanceDate": format_datetime(self.issuance_date),
            "expirationDate": format_datetime(self.expiration_date),
            "signatureHex": to_hex(self.signature),
        }

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "PublicContext":
        return cls(
            doc["id"],
            tuple(doc["type"]),
            parse_did(doc["issuer"]),
            parse_did(doc["subject"]),
            parse_datetime(doc["issuanceDate"]),
            parse_datetime(doc["expirationDate"]),
            from_hex(doc["signatureHex"], 64),
        )


def _anchor_target(anchor: AnchorPayload) -> bytes:
    if isinstance(anchor, PlainHash):
        return anchor.digest
    if isinstance(anchor, SaltedCommitmentAnchor):
        return anchor.commitment
    return anchor.ciphertext


def _scan(template: ClaimTemplate, context: PublicContext, target: bytes, lo: int, hi: int) -> tuple[int | None, int]:
    """Try candidates ``lo..hi-1``; return (first matching index or None, digests computed)."""
    subject: dict[str, Any] = {"id": str(context.subject_did)}
    subject.update({k: encode_claim(v) for k, v in template.known.items()})
    doc = {
        "id": context.credential_id,
        "type": list(context.credential_types),
        "issuer": str(context.issuer_did),
        "issuanceDate": format_datetime(context.issuance_date),
        "expirationDate": format_datetime(context.expiration_date),
        "credentialSubject": subject,
    }
    canonical.encode(doc)  # validates the fixed part once; the loop uses the unchecked encoder
    encoded = {name: [encode_claim(v) for v in domain] for name, domain in template.unknown.items()}
    names = list(template.unknown)
    radices = [len(encoded[n]) for n in names]
    signature = context.signature
    encode = canonical.encode_unchecked
    work = 0
    for index in range(lo, hi):
        rest = index
        for name, radix in zip(reversed(names), reversed(radices)):
            rest, digit = divmod(rest, radix)
            subject[name] = encoded[name][digit]
        work += 1
        if digest(encode(doc), signature) == target:
            return index, work
    return None, work


def _scan_args(args):
    return _scan(*args)


def dictionary_attack(
    anchor: AnchorPayload,
    template: ClaimTemplate,
    context: PublicContext,
    chain: RegistryChain | None = None,
    *,
    workers: int = 1,
) -> AttackReport:
    """Enumerate the template's unknown claims until a candidate reproduces the anchor.

    ``anchor=None`` picks the subject's first on-chain anchor from ``chain``.
    With ``workers > 1`` the index space is split into contiguous chunks;
    the lowest matching index wins, and ``work`` sums every digest computed.
    """
    start = time.perf_counter()
    if anchor is None:
        if chain is None:
            raise ValueError("need an anchor or a chain to read it from")
        found = chain.anchors_for(context.subject_did)
        if not found:
            raise ValueError(f"no anchor on chain for {context.subject_did}")
        anchor = found[0][2]
    target = _anchor_target(anchor)
    total = template.size
    if workers <= 1 or total < 4096:
        match, work = _scan(template, context, target, 0, total)
    else:
        step = -(-total // workers)
        jobs = [(template, context, target, lo, min(lo + step, total)) for lo in range(0, total, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_args, jobs))
        work = sum(w for _, w in results)
        hits = [m for m, _ in results if m is not None]
        match = min(hits) if hits else None
    elapsed = time.perf_counter() - start

    kind = type(anchor).__name__
    attacked = Profile.BASELINE.value if isinstance(anchor, PlainHash) else Profile.HARDENED.value
    if match is not None:
        recovered = template.candidate(match)
        narrative = (
            f"{kind} anchor reversed after {work} of {total} candidates: the hash of a "
            f"low-entropy claim set is a lookup key, not a commitment"
        )
        return AttackReport("dictionary", attacked, True, work, narrative, recovered, elapsed,
                            {"anchor": kind, "domain_size": total, "candidate_index": match})
    narrative = f"exhausted all {total} candidates against the {kind} without a match"
    return AttackReport("dictionary", attacked, False, max(work, 1), narrative, None, elapsed,
                        {"anchor": kind, "domain_size": total})


# -- replay attack -----------------------------------------------------------


def replay_attack(
    captured: Presentation,
    second_verifier: VerifierState,
    chain: RegistryChain,
    now: datetime,
    profile: Profile | str,
    *,
    strategy: str = "verbatim",
    entropy=None,
) -> AttackReport:
    """Show a presentation captured by one verifier to another.

    ``strategy="fresh_challenge"`` asks the second verifier for a new
    challenge and splices it into the captured holder proof; the adversary
    holds no holder key, so it cannot re-sign.
    """
    start = time.perf_counter()
    profile = Profile(profile)
    replayed = captured
    if strategy == "fresh_challenge" and captured.holder_proof is not None:
        kwargs = {"entropy": entropy} if entropy is not None else {}
        fresh = issue_challenge(second_verifier, profile, now, **kwargs)
        replayed = Presentation(captured.credential, HolderProof(fresh, captured.holder_proof.signature), captured.disclosed_secret)
    elif strategy not in ("verbatim", "fresh_challenge"):
        raise ValueError(f"unknown replay strategy {strategy!r}")
    decision = verify_presentation(second_verifier, replayed, chain, now, profile)
    elapsed = time.perf_counter() - start
    details = {"decision": str(decision.verdict), "checks": dict(decision.checks), "strategy": strategy}
    if decision.accepted:
        narrative = (
            f"{second_verifier.did} accepted a copied presentation; using the credential "
            f"needs no holder secret, so whoever saw it can reuse it"
        )
        return AttackReport("replay", profile.value, True, 1, narrative, {"presentation": replayed.credential.body.id}, elapsed, details)
    narrative = f"{second_verifier.did} rejected the replay: {decision.verdict.reason}"
    return AttackReport("replay", profile.value, False, 1, narrative, None, elapsed, details)


# -- signature tampering -----------------------------------------------------


class Mutation(str, enum.Enum):
    STRIP_PROOF = "StripProof"
    REATTACH_FOREIGN_PROOF = "ReattachForeignProof"
    RAW_FIELD_INJECTION = "RawFieldInjection"


def mutate(vc: VerifiableCredential, mutation: Mutation | str, foreign: VerifiableCredential | None = None) -> dict[str, Any]:
    """Raw document an adversary hands the verifier. Every mutation flips the displayed IgG result."""
    mutation = Mutation(mutation)
    doc = vc.to_document()
    flipped = not vc.body.claims["IgG"]
    if mutation is Mutation.RAW_FIELD_INJECTION:
        doc["credentialSubject"]["IgG_display"] = "positive" if flipped else "negative"
    elif mutation is Mutation.STRIP_PROOF:
        del doc["proof"]
        doc["credentialSubject"]["IgG"] = flipped
    else:
        if foreign is None:
            raise ValueError("ReattachForeignProof needs a donor credential")
        doc["credentialSubject"]["IgG"] = flipped
        doc["proof"] = foreign.proof.to_document()
    return doc


def _semantically_altered(original: Mapping[str, Any], shown: Mapping[str, Any]) -> bool:
    return any(shown.get(k) != v for k, v in original.items())


def signature_tamper_attack(
    vc: VerifiableCredential,
    mutation: Mutation | str,
    profile: VerifyProfile | str,
    resolver,
    *,
    foreign: VerifiableCredential | None = None,
    registry: RegistryChain | None = None,
    now: datetime | None = None,
    seen_digests: Iterable[bytes] = (),
) -> AttackReport:
    start = time.perf_counter()
    mutation, profile = Mutation(mutation), VerifyProfile(profile)
    doc = mutate(vc, mutation, foreign)
    verdict = verify_credential(doc, resolver, profile, now=now, registry=registry, seen_digests=seen_digests)
    altered = verdict.accepted and _semantically_altered(vc.body.claims, verdict.display)
    elapsed = time.perf_counter() - start
    details = {"mutation": mutation.value, "verdict": str(verdict)}
    if altered:
        shown = {k: verdict.display[k] for k in vc.body.claims if verdict.display.get(k) != vc.body.claims[k]}
        narrative = f"{profile.value} verifier accepted {mutation.value}; it now shows {_render(shown)}"
        return AttackReport("tamper", profile.value, True, 1, narrative, shown, elapsed, details)
    narrative = f"{profile.value} verifier did not accept an altered credential ({verdict})"
    return AttackReport("tamper", profile.value, False, 1, narrative, None, elapsed, details)


# -- correlation -------------------------------------------------------------


@dataclass(frozen=True)
class Inference:
    patient: Did
    facility: Did
    timestamp: datetime

    def __str__(self) -> str:
        return f"{self.patient} tested at {self.facility} @ {format_datetime(self.timestamp)}"


def correlation_attack(
    log: Sequence[Event],
    ground_truth: Iterable[tuple[Did, Did, datetime]] | None = None,
) -> AttackReport:
    """Link each anchoring patient to the testing facility active just before the anchor.

    Facilities are recognised by their ``CovidTestingFacility`` service
    endpoint. When several facilities share the latest preceding timestamp the
    link is reported as ambiguous and the earliest-logged one is used.
    """
    start = time.perf_counter()
    last_seen: dict[Did, tuple[int, datetime]] = {}
    inferences: list[Inference] = []
    ambiguous: list[str] = []
    for position, event in enumerate(log):
        if TESTING_FACILITY in event.endpoint_types:
            last_seen[event.did] = (position, event.timestamp)
            continue
        if event.kind != "CredentialAnchor":
            continue
        candidates = [(t, -p, did) for did, (p, t) in last_seen.items() if t <= event.timestamp and did != event.did]
        if not candidates:
            continue
        latest = max(t for t, _, _ in candidates)
        tied = sorted((-negp, did) for t, negp, did in candidates if t == latest)
        facility = tied[0][1]
        if len(tied) > 1:
            ambiguous.append(f"{event.did}: " + " | ".join(str(d) for _, d in tied))
        inferences.append(Inference(event.did, facility, event.timestamp))
    elapsed = time.perf_counter() - start

    truth = None if ground_truth is None else {tuple(t) for t in ground_truth}
    if truth is None:
        correct = inferences
    else:
        correct = [i for i in inferences if (i.patient, i.facility, i.timestamp) in truth]
    details = {"events": len(log), "correct": len(correct), "ambiguous": ambiguous or None}
    if correct:
        narrative = (
            f"linked {len(correct)} of {len(inferences)} anchoring patients to a testing facility "
            f"and test day from the public log alone"
        )
        return AttackReport("correlate", "any", True, max(1, len(log)), narrative, [str(i) for i in inferences], elapsed, details)
    narrative = "no patient could be linked to a testing facility"
    return AttackReport("correlate", "any", False, max(1, len(log)), narrative, [str(i) for i in inferences] or None, elapsed, details)


def expected_success(attack: str, profile: Profile | str) -> bool:
    """Outcome each attack should have against each protocol profile."""
    if attack == "correlate":
        return True
    return Profile(profile) is Profile.BASELINE

