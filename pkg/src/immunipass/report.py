"""Run-report rendering: tab-delimited text, a timings file and optional figures.

The ``.report`` file is a pure function of (script, seed): wall-clock
timings go to the separate ``.perf.tsv`` so that two runs with one seed
produce identical reports.
"""

from __future__ import annotations

from pathlib import Path

from .canonical import format_datetime
from .registry import RegistryChain, public_event_log, verify_chain

REPORT_HEADER = "# immunipass run report v1"


def _cell(value) -> str:
    return str(value).replace("\t", " ").replace("\n", " ")


def render_report(report) -> str:
    s = report.script
    lines = [
        REPORT_HEADER,
        f"scenario\t{s.name}",
        f"profile\t{s.profile.value}",
        f"seed\t{report.seed}",
        f"authorities\t{s.authorities}\t{s.quorum}",
        f"blocks\t{len(report.chain.blocks)}",
        f"chain_sha256\t{report.chain_digest}",
        f"chain_verdict\t{verify_chain(report.chain)}",
        f"status\t{'expected' if report.ok else 'MISMATCH'}",
        "",
        "[actions]",
        "index\tline\taction\toutcome\texpected\tmatch\tdetail",
    ]
    for o in report.outcomes:
        lines.append("\t".join(_cell(x) for x in (
            o.index, o.action.line, o.action.text, o.outcome, o.expected or "-", "yes" if o.matched else "NO", o.detail)))
    lines += ["", "[attacks]", "index\tattack\tprofile\tsucceeded\twork\texpected\tmatch"]
    for index, r, expected, matched in report.attacks:
        lines.append("\t".join(_cell(x) for x in (
            index, r.name, r.profile, str(r.succeeded).lower(), r.work, expected or "-", "yes" if matched else "NO")))
    for index, r, _, _ in report.attacks:
        lines += ["", f"[attack {index}]", r.to_text(timings=False).rstrip("\n")]
    return "\n".join(lines) + "\n"


def render_perf(report) -> str:
    lines = ["index\taction\telapsed_s"]
    lines += [f"{o.index}\t{_cell(o.action.text)}\t{o.elapsed:.6f}" for o in report.outcomes]
    lines.append(f"total\t-\t{report.wall_clock:.6f}")
    return "\n".join(lines) + "\n"


def render_event_table(chain: RegistryChain) -> str:
    lines = ["timestamp\tdid\tevent\tendpoint_types"]
    for e in public_event_log(chain):
        lines.append(f"{format_datetime(e.timestamp)}\t{e.did}\t{e.kind}\t{','.join(e.endpoint_types) or '-'}")
    return "\n".join(lines) + "\n"


def write_artifacts(report, out: Path, figures: bool = False) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    name = report.script.name
    paths = {
        "chain": out / f"{name}.chain",
        "report": out / f"{name}.report",
        "perf": out / f"{name}.perf.tsv",
    }
    paths["chain"].write_bytes(report.chain_bytes)
    paths["report"].write_text(render_report(report), encoding="utf-8")
    paths["perf"].write_text(render_perf(report), encoding="utf-8")
    if figures:
        from .plotting import plot_attack_work, plot_event_timeline

        paths["timeline"] = plot_event_timeline(report.chain, out / f"{name}.timeline.png")
        if report.attacks:
            paths["attacks"] = plot_attack_work([r for _, r, _, _ in report.attacks], out / f"{name}.attacks.png")
    return paths
