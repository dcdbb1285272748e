"""Command-line entry point.

Exit codes: 0 when every outcome matched expectations, 1 on a mismatch
(or a failed verification), 2 on usage, parse or I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .attacks import expected_success
from .canonical import SeededEntropy, system_entropy, to_hex
from .did import did_key_from_public_key
from .errors import ActionFailure, MalformedChain, PassportError, ScriptParseError
from .fixtures import scenario_path
from .keys import new_signing_key, public_bytes, seed_bytes
from .protocol import Profile
from .registry import RegistryChain, verify_chain
from .report import render_event_table, render_report, write_artifacts
from .scenario import ScenarioRun, load_script, parse_script, resolve_script_path

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2

_ATTACK_SCRIPTS = {
    "dictionary": "attack dictionary louis unknown={unknown} expect=auto",
    "replay": "attack replay from=employer-acme to=employer-globex strategy={strategy} expect=auto",
    "tamper": "attack tamper louis mutation={mutation} expect=auto",
    "correlate": "attack correlate expect=auto",
}


def cmd_scenario_run(args) -> int:
    script = load_script(resolve_script_path(args.script))
    if args.profile:
        script = replace(script, profile=Profile(args.profile))
    report = ScenarioRun(script, args.seed).run()
    if args.out:
        paths = write_artifacts(report, Path(args.out), figures=args.figures)
        for kind, path in paths.items():
            print(f"wrote {kind}\t{path}", file=sys.stderr)
    sys.stdout.write(render_report(report))
    return EXIT_OK if report.ok else EXIT_MISMATCH


def cmd_scenario_list(args) -> int:
    root = scenario_path("")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".scenario"):
            print(entry.name)
    return EXIT_OK


def cmd_registry_inspect(args) -> int:
    try:
        data = Path(args.chain).read_bytes()
    except OSError as exc:
        print(f"IoError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        chain = RegistryChain.loads(data)
    except MalformedChain as exc:
        print(f"MalformedChain: {exc}", file=sys.stderr)
        return EXIT_USAGE
    verdict = verify_chain(chain)
    print(f"authorities\t{','.join(a.id for a in chain.authority_set)}\tquorum={chain.quorum}")
    print(f"blocks\t{len(chain.blocks)}")
    sys.stdout.write(render_event_table(chain))
    print(f"verdict\t{verdict}")
    if not verdict.accepted and verdict.detail:
        print(f"detail\t{verdict.detail}")
    return EXIT_OK if verdict.accepted else EXIT_MISMATCH


def _attack_script(args) -> str:
    base = scenario_path("two_patient_interleaved.scenario" if args.name == "correlate" else "baseline_honest.scenario")
    lines = [ln for ln in base.read_text(encoding="utf-8").splitlines() if not ln.startswith(("profile", "attack"))]
    lines.insert(0, f"profile {args.profile}")
    if args.name == "replay":
        lines.insert(lines.index("register verifier employer-acme") + 1, "register verifier employer-globex")
    template = _ATTACK_SCRIPTS[args.name]
    lines.append(template.format(unknown=args.unknown, strategy=args.strategy, mutation=args.mutation))
    return "\n".join(lines) + "\n"


def cmd_attack(args) -> int:
    if args.name == "correlate" and args.chain:
        from .attacks import correlation_attack
        from .registry import public_event_log

        try:
            chain = RegistryChain.loads(Path(args.chain).read_bytes())
        except (OSError, MalformedChain) as exc:
            print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        report = correlation_attack(public_event_log(chain))
        sys.stdout.write(report.to_text())
        return EXIT_OK if report.succeeded == expected_success("correlate", args.profile) else EXIT_MISMATCH

    script = parse_script(_attack_script(args), name=f"attack-{args.name}-{args.profile.lower()}")
    run = ScenarioRun(script, args.seed).run()
    index, report, expected, matched = run.attacks[-1]
    sys.stdout.write(report.to_text())
    print(f"expected: {expected}")
    if args.out:
        write_artifacts(run, Path(args.out), figures=args.figures)
    return EXIT_OK if matched and run.ok else EXIT_MISMATCH


def cmd_keygen(args) -> int:
    entropy = SeededEntropy(args.seed) if args.seed is not None else system_entropy
    key = new_signing_key(entropy)
    did, _ = did_key_from_public_key(public_bytes(key))
    print(f"did\t{did}")
    print(f"public_key\t{to_hex(public_bytes(key))}")
    print(f"secret_seed\t{to_hex(seed_bytes(key))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="immunipass", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    scen = sub.add_parser("scenario", help="run scripted protocol scenarios")
    scen_sub = scen.add_subparsers(dest="action", required=True)
    run = scen_sub.add_parser("run", help="replay a .scenario script")
    run.add_argument("script", help="path to a .scenario file, or the name of a shipped one")
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--out", help="directory for the .chain, .report and .perf.tsv files")
    run.add_argument("--profile", choices=[p.value for p in Profile], help="override the script's profile")
    run.add_argument("--figures", action="store_true", help="also render PNG figures into --out")
    run.set_defaults(func=cmd_scenario_run)
    ls = scen_sub.add_parser("list", help="list shipped scenarios")
    ls.set_defaults(func=cmd_scenario_list)

    reg = sub.add_parser("registry", help="inspect registry chain files")
    reg_sub = reg.add_subparsers(dest="action", required=True)
    insp = reg_sub.add_parser("inspect", help="print the public event log and re-verify a .chain file")
    insp.add_argument("chain")
    insp.set_defaults(func=cmd_registry_inspect)

    atk = sub.add_parser("attack", help="run one attack against a fresh scenario")
    atk.add_argument("name", choices=sorted(_ATTACK_SCRIPTS))
    atk.add_argument("--profile", choices=[p.value for p in Profile], default=Profile.BASELINE.value)
    atk.add_argument("--seed", type=int, default=42)
    atk.add_argument("--unknown", default="birthDate,IgM,IgG", help="dictionary: comma-separated unknown claims")
    atk.add_argument("--strategy", default="verbatim", choices=["verbatim", "fresh_challenge"])
    atk.add_argument("--mutation", default="RawFieldInjection",
                     choices=["RawFieldInjection", "StripProof", "ReattachForeignProof"])
    atk.add_argument("--chain", help="correlate: read this public .chain file instead of a fresh scenario")
    atk.add_argument("--out")
    atk.add_argument("--figures", action="store_true")
    atk.set_defaults(func=cmd_attack)

    kg = sub.add_parser("keygen", help="generate an Ed25519 key and its did:key")
    kg.add_argument("--seed", type=int)
    kg.set_defaults(func=cmd_keygen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScriptParseError as exc:
        print(f"ScriptParseError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ActionFailure as exc:
        print(f"ActionFailure: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except PassportError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
