"""Figures for run reports. Uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .did import TESTING_FACILITY  # noqa: E402
from .registry import RegistryChain, public_event_log  # noqa: E402

_KIND_STYLE = {
    "DidDocPublish": dict(marker="o", color="tab:blue", label="DID publish"),
    "DidDocUpdate": dict(marker="s", color="tab:purple", label="DID update"),
    "CredentialAnchor": dict(marker="D", color="tab:red", label="credential anchor"),
}
_SAVE = dict(dpi=120, bbox_inches="tight", metadata={"Software": None})


def plot_event_timeline(chain: RegistryChain, path: Path) -> Path:
    """One row per DID, one marker per public event; testing facilities are ringed."""
    events = public_event_log(chain)
    dids = []
    for e in events:
        if e.did not in dids:
            dids.append(e.did)
    fig, ax = plt.subplots(figsize=(8, 0.5 * len(dids) + 1.5))
    seen_labels = set()
    for e in events:
        style = dict(_KIND_STYLE[e.kind])
        label = style.pop("label")
        y = dids.index(e.did)
        ax.scatter([e.timestamp], [y], s=50, zorder=3, label=None if label in seen_labels else label, **style)
        seen_labels.add(label)
        if TESTING_FACILITY in e.endpoint_types:
            ax.scatter([e.timestamp], [y], s=180, facecolors="none", edgecolors="black", zorder=2,
                       label=None if "facility" in seen_labels else "testing facility endpoint")
            seen_labels.add("facility")
    ax.set_yticks(range(len(dids)))
    ax.set_yticklabels([str(d) for d in dids], fontsize=8)
    ax.set_xlabel("block timestamp (logical clock)")
    ax.set_title("What any observer of the registry sees")
    if events:
        ax.legend(fontsize=8, loc="upper left", bbox_to_anchor=(1.01, 1.0))
    fig.autofmt_xdate()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def plot_attack_work(reports, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = [f"{r.name}\n({r.profile})" for r in reports]
    colors = ["tab:red" if r.succeeded else "tab:green" for r in reports]
    ax.bar(range(len(reports)), [r.work for r in reports], color=colors)
    ax.set_xticks(range(len(reports)))
    ax.set_xticklabels(labels, fontsize=7, rotation=30, ha="right")
    ax.set_yscale("log")
    ax.set_ylabel("oracle queries (work)")
    ax.set_title("Attack work; red = attack succeeded")
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path
