"""Exit criteria for the build, one test per criterion.

Each test records a PASS/FAIL line that is printed in the "acceptance
criteria" section at the end of the pytest run. Tolerances are pinned below.
"""

import subprocess
import sys
from datetime import date

import pytest

import test_canonical
import test_credential
import test_hardened
import test_registry
from conftest import CASES, PROPERTY_CASES, criterion
from test_attacks import calendar_day_count
from immunipass.attacks import (
    FLAGS,
    ClaimTemplate,
    DateRange,
    Mutation,
    PublicContext,
    correlation_attack,
    dictionary_attack,
    signature_tamper_attack,
)
from immunipass.canonical import SeededEntropy
from immunipass.credential import Attachment, VerifyProfile, anchor_digest, sign_credential
from immunipass.fixtures import (
    GOLDEN_SUBJECT,
    golden_body,
    golden_credential,
    golden_issuer_key,
    golden_resolver,
    load_anchor_fixture,
    scenario_path,
)
from immunipass.protocol import Consortium
from immunipass.registry import CredentialAnchor, PlainHash, RegistryChain, public_event_log, verify_chain
from immunipass.scenario import run_scenario

pytestmark = pytest.mark.acceptance

# pinned tolerances
DAY_COUNT = 44195  # 1900-01-01..2020-12-31 inclusive
FULL_WORK_LIMIT = 4 * DAY_COUNT
FULL_TIME_LIMIT_S = 10.0
FLAGS_WORK_LIMIT = 4
FLAGS_TIME_LIMIT_S = 0.010
HARDENED_REPLAY_REASONS = {"HolderBindingFailure", "ReplayedChallenge", "InvalidChallenge"}
SEED = 42

DOMAINS = {"birthDate": DateRange(date(1900, 1, 1), date(2020, 12, 31)), "IgM": FLAGS, "IgG": FLAGS}


def template(unknown):
    claims = golden_credential().body.claims
    return ClaimTemplate({k: v for k, v in claims.items() if k not in unknown}, {k: DOMAINS[k] for k in unknown})


def context():
    # only the envelope and signature; the claims are what the adversary is after
    return PublicContext.from_document(PublicContext.from_credential(golden_credential()).to_document())


def test_c1_dictionary_attack_recovers_golden_claims():
    with criterion("C1 dictionary attack on Baseline PlainHash") as notes:
        assert len(DOMAINS["birthDate"]) == calendar_day_count(1900, 2020) == DAY_COUNT
        anchor = load_anchor_fixture("golden-plain.anchor")
        full = dictionary_attack(anchor, template(["birthDate", "IgM", "IgG"]), context())
        assert full.succeeded
        assert full.recovered == {"birthDate": date(1958, 7, 17), "IgM": False, "IgG": True}
        assert full.work <= FULL_WORK_LIMIT, full.work
        assert full.elapsed < FULL_TIME_LIMIT_S, full.elapsed
        flags = dictionary_attack(anchor, template(["IgM", "IgG"]), context())
        assert flags.succeeded and flags.recovered == {"IgM": False, "IgG": True}
        assert flags.work <= FLAGS_WORK_LIMIT, flags.work
        assert flags.elapsed < FLAGS_TIME_LIMIT_S, flags.elapsed
        notes.append(f"work={full.work}<={FULL_WORK_LIMIT} t={full.elapsed:.2f}s<{FULL_TIME_LIMIT_S}s")
        notes.append(f"flags work={flags.work}<={FLAGS_WORK_LIMIT} t={flags.elapsed * 1000:.2f}ms<10ms")


def test_c2_dictionary_attack_fails_on_salted_commitment():
    with criterion("C2 dictionary attack on Hardened SaltedCommitment") as notes:
        plain = load_anchor_fixture("golden-plain.anchor")
        salted = load_anchor_fixture("golden-salted.anchor")
        assert plain == PlainHash(anchor_digest(golden_credential()))
        t = template(["birthDate", "IgM", "IgG"])
        report = dictionary_attack(salted, t, context())
        assert not report.succeeded and report.recovered is None
        assert report.work == t.size == FULL_WORK_LIMIT
        notes.append(f"exhausted {report.work} candidates, no match")


def _replays(profile):
    report = run_scenario(scenario_path(f"{profile}_attacked.scenario"), seed=SEED)
    return report, [r for _, r, _, _ in report.attacks if r.name == "replay"]


def test_c3_replay_differential():
    with criterion("C3 replay: Baseline accepts, Hardened rejects") as notes:
        base_run, base = _replays("baseline")
        hard_run, hard = _replays("hardened")
        assert base and all(r.succeeded for r in base)
        assert all(r.details["decision"] == "Accept" for r in base)
        assert hard and not any(r.succeeded for r in hard)
        reasons = {r.details["decision"].split("(")[1].split(")")[0] for r in hard}
        assert reasons <= HARDENED_REPLAY_REASONS, reasons
        again = [_replays(p)[1] for p in ("baseline", "hardened")]
        assert [[r.to_text(timings=False) for r in rs] for rs in again] == \
            [[r.to_text(timings=False) for r in rs] for rs in (base, hard)]
        notes.append(f"Baseline {len(base)}/{len(base)} accepted; Hardened reasons {sorted(reasons)}; deterministic")


TAMPER_EXPECTED = {
    (Mutation.STRIP_PROOF, VerifyProfile.STRICT): False,
    (Mutation.REATTACH_FOREIGN_PROOF, VerifyProfile.STRICT): False,
    (Mutation.RAW_FIELD_INJECTION, VerifyProfile.STRICT): False,
    (Mutation.STRIP_PROOF, VerifyProfile.PERMISSIVE): True,
    (Mutation.REATTACH_FOREIGN_PROOF, VerifyProfile.PERMISSIVE): False,
    (Mutation.RAW_FIELD_INJECTION, VerifyProfile.PERMISSIVE): True,
}


def test_c4_tamper_differential():
    with criterion("C4 signature tamper: 6 mutation x profile cells") as notes:
        vc = golden_credential()
        donor = sign_credential(golden_body(igm=True, igg=False), golden_issuer_key(), Attachment.DETACHED)
        consortium = Consortium.generate(3, 2, SeededEntropy(SEED))
        registry = consortium.append(consortium.genesis(), [CredentialAnchor(PlainHash(anchor_digest(vc)), GOLDEN_SUBJECT)],
                                     vc.body.issuance_date)
        cells = {}
        for (mutation, profile), expected in TAMPER_EXPECTED.items():
            report = signature_tamper_attack(vc, mutation, profile, golden_resolver(), foreign=donor, registry=registry)
            cells[(mutation, profile)] = report.succeeded
        mismatched = [k for k, v in cells.items() if v != TAMPER_EXPECTED[k]]
        assert not mismatched, mismatched
        notes.append("6/6 cells match (Strict rejects all; Permissive falls to StripProof and RawFieldInjection)")


def test_c5_correlation_from_public_chain_file(tmp_path):
    with criterion("C5 correlation on two-patient interleaved scenario") as notes:
        run = run_scenario(scenario_path("two_patient_interleaved.scenario"), seed=SEED, out=tmp_path)
        public = RegistryChain.loads((tmp_path / "two_patient_interleaved.chain").read_bytes())
        assert verify_chain(public).accepted
        report = correlation_attack(public_event_log(public), run.ground_truth)
        assert report.details["correct"] >= 1
        notes.append(f"{report.details['correct']} correct link(s) of {len(run.ground_truth)} patients")


PROPERTY_SUITES = {
    "canonicalization injectivity and round-trip": [
        test_canonical.test_json_round_trip,
        test_canonical.test_json_injective,
        test_canonical.test_body_round_trip,
        test_canonical.test_body_canonicalization_injective,
    ],
    "strict tamper-evidence under single-field mutation": [
        test_credential.test_strict_rejects_every_single_field_mutation,
    ],
    "registry append-only, quorum soundness, hash-link integrity": [
        test_registry.test_append_only,
        test_registry.test_quorum_soundness,
        test_registry.test_hash_link_integrity,
        test_registry.test_header_change_caught_by_pinned_authorities,
    ],
    "commitment binding": [
        test_hardened.test_commitment_binding,
        test_hardened.test_commitment_binding_across_salts,
    ],
    "seal/open round-trip and authenticated failure": [
        test_hardened.test_seal_open_round_trip,
        test_hardened.test_sealed_tamper_fails_authenticated,
    ],
}


@pytest.mark.parametrize("suite", sorted(PROPERTY_SUITES))
def test_c6_property_suites(suite):
    with criterion(f"C6 property suite: {suite}") as notes:
        for fn in PROPERTY_SUITES[suite]:
            name = fn.__name__
            before = CASES[name]
            fn()
            ran = CASES[name] - before
            assert ran >= PROPERTY_CASES, f"{name} ran {ran} cases"
            notes.append(f"{name}={ran}")


def test_c7_reproducible_runs(tmp_path):
    with criterion("C7 scenario run --seed 42 twice is byte-identical") as notes:
        for name in ("baseline_attacked", "hardened_attacked"):
            outputs = []
            for i in range(2):
                out = tmp_path / f"{name}-{i}"
                proc = subprocess.run([sys.executable, "-m", "immunipass", "scenario", "run", name, "--seed", str(SEED),
                                       "--out", str(out)], capture_output=True)
                assert proc.returncode == 0, proc.stderr.decode()
                outputs.append(((out / f"{name}.chain").read_bytes(), (out / f"{name}.report").read_bytes(),
                                proc.stdout))
            assert outputs[0] == outputs[1]
            notes.append(f"{name} identical")


@pytest.mark.parametrize("name", ["baseline_honest", "hardened_honest"])
def test_c8_honest_flow_accepts(name):
    with criterion(f"C8 honest flow: {name}") as notes:
        report = run_scenario(scenario_path(f"{name}.scenario"), seed=SEED)
        assert report.ok
        assert verify_chain(report.chain).accepted
        verifies = [o for o in report.outcomes if o.action.verb == "verify"]
        assert verifies and all(o.outcome == "accept" for o in verifies)
        assert all("FAIL" not in o.detail for o in verifies)
        notes.append(verifies[-1].detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
