from __future__ import annotations

import functools
from collections import Counter
from contextlib import contextmanager
from datetime import timedelta, timezone

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from immunipass.canonical import SeededEntropy, utc
from immunipass.credential import REQUIRED_TYPES, CredentialBody
from immunipass.did import Did
from immunipass.protocol import ActorKind, Consortium, register_actor

# every property suite runs at least this many randomized cases
PROPERTY_CASES = 500
PROPERTY = settings(max_examples=PROPERTY_CASES, deadline=None, suppress_health_check=[HealthCheck.too_slow])

# completed (non-rejected) cases per property test, across the session
CASES: Counter = Counter()


def prop(*strategies):
    """``@given`` at PROPERTY_CASES examples that also counts the cases that ran to completion."""

    def decorate(fn):
        @functools.wraps(fn)
        def counted(*args, **kwargs):
            result = fn(*args, **kwargs)
            CASES[fn.__name__] += 1
            return result

        return PROPERTY(given(*strategies)(counted))

    return decorate


# acceptance-criterion results, printed at the end of the run
ACCEPTANCE: list[tuple[str, bool, str]] = []


@contextmanager
def criterion(label: str):
    notes: list[str] = []
    try:
        yield notes
    except BaseException as exc:
        ACCEPTANCE.append((label, False, f"{type(exc).__name__}: {exc}".splitlines()[0]))
        raise
    ACCEPTANCE.append((label, True, "; ".join(notes)))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")

T0 = utc(2021, 3, 1, 9, 0, 0)

names = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=24)
whole_seconds = st.datetimes(
    min_value=utc(1971, 1, 1).replace(tzinfo=None),
    max_value=utc(2090, 1, 1).replace(tzinfo=None),
    timezones=st.just(timezone.utc),
).map(lambda d: d.replace(microsecond=0))
sim_dids = st.from_regex(r"[a-z][a-z0-9-]{0,11}", fullmatch=True).map(lambda s: Did("sim", s))


@st.composite
def bodies(draw) -> CredentialBody:
    issued = draw(whole_seconds)
    lifetime = draw(st.integers(1, 3 * 365 * 86400))
    claims = {
        "givenName": draw(names),
        "familyName": draw(names),
        "birthDate": draw(st.dates()),
        "IgM": draw(st.booleans()),
        "IgG": draw(st.booleans()),
    }
    if draw(st.booleans()):
        claims["image"] = draw(st.binary(min_size=0, max_size=48))
    return CredentialBody(
        id=draw(st.from_regex(r"urn:uuid:[0-9a-f]{8}", fullmatch=True)),
        credential_types=REQUIRED_TYPES,
        issuer_did=draw(sim_dids),
        issuance_date=issued,
        expiration_date=issued + timedelta(seconds=lifetime),
        subject_did=draw(sim_dids),
        claims=claims,
    )


@pytest.fixture
def world():
    """A registry with one hospital, one patient and two verifiers, all seeded."""
    entropy = SeededEntropy(7)
    consortium = Consortium.generate(3, 2, entropy)
    chain = consortium.genesis()
    hospital, chain = register_actor(ActorKind.HOSPITAL, "stanford-health", chain, consortium, T0, entropy)
    patient, chain = register_actor(ActorKind.PATIENT, "louis", chain, consortium, T0, entropy)
    acme, chain = register_actor(ActorKind.VERIFIER, "employer-acme", chain, consortium, T0, entropy)
    globex, chain = register_actor(ActorKind.VERIFIER, "employer-globex", chain, consortium, T0, entropy)
    return dict(entropy=entropy, consortium=consortium, chain=chain, hospital=hospital, patient=patient,
                acme=acme, globex=globex)
