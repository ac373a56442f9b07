"""Figure rendering for run directories.

Every figure is emitted as a self-contained SVG next to a CSV twin with
the exact plotted rows, so tooling never scrapes graphics. SVG output is
made byte-reproducible by pinning the hash salt and stripping the date.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

matplotlib.rcParams["svg.hashsalt"] = "gramvar"

_KIND_COLORS = {"micro": "tab:blue", "macro": "tab:orange"}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _write_csv(path: Path, rows: list[list[str]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _empty(path: Path, title: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.set_title(title)
    ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
    ax.set_xticks([])
    ax.set_yticks([])
    _save(fig, path)


def render_node_scatter(
    rows: list[dict],
    full_f: float | None,
    majority_share: float | None,
    svg_path: str | Path,
    csv_path: str | Path,
    title: str = "Predictive power per grammar node",
) -> None:
    """Weighted F per node against node size, with the two baselines.

    ``rows`` carry node_kind, node_id, n_constructions, degenerate,
    weighted_f. Zero rows still produce a valid (empty) figure.
    """
    svg_path, csv_path = Path(svg_path), Path(csv_path)
    out = [["node_kind", "node_id", "n_constructions", "degenerate", "weighted_f"]]
    for r in rows:
        out.append(
            [
                r["node_kind"],
                r["node_id"],
                str(r["n_constructions"]),
                "1" if r["degenerate"] else "0",
                f"{r['weighted_f']:.6f}",
            ]
        )
    if full_f is not None:
        out.append(["baseline", "full_grammar", "", "", f"{full_f:.6f}"])
    if majority_share is not None:
        out.append(["baseline", "majority_share", "", "", f"{majority_share:.6f}"])
    _write_csv(csv_path, out)

    if not rows:
        _empty(svg_path, title)
        return
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for kind in ("micro", "macro"):
        xs = [r["n_constructions"] for r in rows if r["node_kind"] == kind]
        ys = [r["weighted_f"] for r in rows if r["node_kind"] == kind]
        if xs:
            ax.scatter(xs, ys, s=18, alpha=0.7, label=kind, color=_KIND_COLORS[kind])
    if full_f is not None:
        ax.axhline(full_f, color="black", lw=1, label="full grammar")
    if majority_share is not None:
        ax.axhline(majority_share, color="gray", lw=1, ls="--", label="majority share")
    ax.set_xscale("log")
    ax.set_xlabel("constructions in node")
    ax.set_ylabel("weighted F")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    _save(fig, svg_path)


def render_unmasking(
    rows: list[dict],
    svg_path: str | Path,
    csv_path: str | Path,
    title: str = "Unmasking: accuracy under feature removal",
) -> None:
    """Weighted F by round, one line per (granularity, stage) group."""
    svg_path, csv_path = Path(svg_path), Path(csv_path)
    out = [["granularity", "stage", "round", "weighted_f", "removed"]]
    for r in rows:
        out.append(
            [
                r["granularity"],
                r["stage"],
                str(r["round"]),
                f"{r['weighted_f']:.6f}",
                str(r["removed"]),
            ]
        )
    _write_csv(csv_path, out)

    if not rows:
        _empty(svg_path, title)
        return
    fig, ax = plt.subplots(figsize=(7, 4.5))
    groups: dict[tuple[str, str], list[dict]] = {}
    for r in rows:
        groups.setdefault((r["granularity"], r["stage"]), []).append(r)
    for (gran, stage), rs in sorted(groups.items()):
        rs = sorted(rs, key=lambda r: r["round"])
        ax.plot(
            [r["round"] for r in rs],
            [r["weighted_f"] for r in rs],
            lw=1.2,
            label=f"{gran}/{stage}",
        )
    ax.set_xlabel("round")
    ax.set_ylabel("weighted F")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, svg_path)


def render_correlation_summary(
    summaries: dict[str, dict],
    svg_path: str | Path,
    csv_path: str | Path,
    title: str = "Error-similarity correlation with reference",
) -> None:
    """Quantile summary per node kind: box spans q25-q75, whiskers span
    min-max, the marker sits at the median."""
    svg_path, csv_path = Path(svg_path), Path(csv_path)
    cols = ["kind", "count", "missing", "min", "q25", "median", "q75", "max"]
    out = [cols]
    for kind in sorted(summaries):
        s = summaries[kind]
        out.append(
            [kind, str(s.get("count", 0)), str(s.get("missing", 0))]
            + [f"{s[c]:.6f}" if c in s else "" for c in cols[3:]]
        )
    _write_csv(csv_path, out)

    plottable = {k: s for k, s in summaries.items() if s.get("count", 0) > 0}
    if not plottable:
        _empty(svg_path, title)
        return
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for x, kind in enumerate(sorted(plottable)):
        s = plottable[kind]
        color = _KIND_COLORS.get(kind, "tab:green")
        ax.vlines(x, s["min"], s["max"], color=color, lw=1)
        ax.vlines(x, s["q25"], s["q75"], color=color, lw=8, alpha=0.5)
        ax.plot([x], [s["median"]], "o", color=color)
    ax.set_xticks(range(len(plottable)))
    ax.set_xticklabels(sorted(plottable))
    ax.set_ylabel("Pearson r vs reference")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, svg_path)
