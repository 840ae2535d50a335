"""Figure rendering from command outputs.

Everything here draws values already present in CSV/JSON files produced by
the other subcommands; no statistics are recomputed and no raw time-series
files are read. Styling is pinned so identical inputs render identical
pixels.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .errors import InputError
from .graphs import HIDDEN, TopologyGraph
from .spectral import read_grid_csv

_STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "figure.autolayout": True,
}
_META = {"Software": "cyclonet-figviz"}


def _read_diagnostics(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        content = [l for l in fh if not l.startswith("#")]
    r = csv.DictReader(content)
    for row in r:
        rows.append({
            "j": int(row["j"]), "i": int(row["i"]),
            "block_norm": float(row["block_norm"]),
            "flatness": float(row["flatness"]),
            "mean_phase": float(row["mean_phase"]),
            "noise_floor": float(row.get("noise_floor", "nan")),
            "decision": row["decision"],
        })
    if not rows:
        raise InputError(f"{path}: empty diagnostics CSV")
    return rows


def render_norms(diagnostics_csv, out_path, truth_csv=None) -> Path:
    """Grouped per-node bar chart of inverse-PSD block norms, with optional
    exact-value overlay."""
    rows = _read_diagnostics(diagnostics_csv)
    truth = {}
    if truth_csv:
        truth = {(r["j"], r["i"]): r["block_norm"]
                 for r in _read_diagnostics(truth_csv)}
    groups: dict[int, list[dict]] = {}
    for r in rows:
        groups.setdefault(r["j"], []).append(r)
    with plt.rc_context(_STYLE):
        ncols = 2
        nrows = math.ceil(len(groups) / ncols)
        fig, axes = plt.subplots(nrows, ncols,
                                 figsize=(7.2, 1.9 * nrows), squeeze=False)
        for ax in axes.ravel():
            ax.set_visible(False)
        for k, j in enumerate(sorted(groups)):
            ax = axes[k // ncols][k % ncols]
            ax.set_visible(True)
            part = sorted(groups[j], key=lambda r: r["i"])
            xs = np.arange(len(part))
            ax.bar(xs, [r["block_norm"] for r in part],
                   color="#4878a8", label="estimated")
            if truth:
                tv = [truth.get((r["j"], r["i"]), float("nan")) for r in part]
                ax.plot(xs, tv, "k_", markersize=12, label="exact")
            ax.set_xticks(xs, [str(r["i"]) for r in part])
            ax.set_title(f"blocks into node {j}", fontsize=8)
            ax.set_yscale("log")
        handles, labels = axes[0][0].get_legend_handles_labels()
        if handles:
            fig.legend(handles, labels, loc="upper right", fontsize=7)
        out = Path(out_path)
        fig.savefig(out, metadata=_META)
        plt.close(fig)
    return out


def _parse_edges(text: str) -> list[tuple[int, int]]:
    out = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            a, b = chunk.split(":")
            out.append((int(a), int(b)))
        except ValueError as exc:
            raise InputError(f"bad edge {chunk!r}; expected j:i") from exc
    if not out:
        raise InputError("no edges requested")
    return out


def render_phases(dump_csv, edges, out_path, diagnostics_csv=None) -> Path:
    """Eigenvalue phase traces of selected inverse-PSD blocks versus
    frequency, with the circular mean as a horizontal rule and the recorded
    flatness as an annotation."""
    grid = read_grid_csv(dump_csv)
    if isinstance(edges, str):
        edges = _parse_edges(edges)
    notes = {}
    if diagnostics_csv:
        for r in _read_diagnostics(diagnostics_csv):
            notes[(r["j"], r["i"])] = r
            notes[(r["i"], r["j"])] = r
    with plt.rc_context(_STYLE):
        ncols = 2
        nrows = math.ceil(len(edges) / ncols)
        fig, axes = plt.subplots(nrows, ncols,
                                 figsize=(7.2, 2.2 * nrows), squeeze=False)
        for ax in axes.ravel():
            ax.set_visible(False)
        for k, (j, i) in enumerate(edges):
            ax = axes[k // ncols][k % ncols]
            ax.set_visible(True)
            if j not in grid.node_ids or i not in grid.node_ids:
                plt.close(fig)
                raise InputError(f"edge ({j},{i}) not present in {dump_csv}")
            lam = np.linalg.eigvals(grid.block(j, i))
            phases = np.angle(lam)
            for t in range(phases.shape[1]):
                ax.plot(grid.frequencies, phases[:, t], ".",
                        markersize=3, label=f"eig {t + 1}")
            note = notes.get((j, i))
            if note is not None:
                ax.axhline(note["mean_phase"], color="crimson", lw=0.8)
                ax.annotate(f"flatness {note['flatness']:.3g} rad",
                            xy=(0.03, 0.05), xycoords="axes fraction",
                            fontsize=7, color="crimson")
            ax.set_ylim(-np.pi, np.pi)
            ax.set_title(f"block ({j},{i})", fontsize=8)
            ax.set_xlabel("omega")
        out = Path(out_path)
        fig.savefig(out, metadata=_META)
        plt.close(fig)
    return out


def _graph_positions(g: TopologyGraph) -> dict[int, tuple[float, float]]:
    """Deterministic layout: nodes on a circle in id order."""
    n = len(g.node_ids)
    pos = {}
    for k, node in enumerate(g.node_ids):
        ang = 2 * np.pi * k / max(n, 1) + np.pi / 2
        pos[node] = (math.cos(ang), math.sin(ang))
    return pos


def render_graphs(stage_jsons, out_path) -> Path:
    """Panels of graph stages (e.g. kin graph, pruned topology, final)."""
    stages = []
    for p in stage_jsons:
        doc = json.loads(Path(p).read_text())
        stages.append((Path(p).stem, TopologyGraph.from_json_dict(doc)))
    if not stages:
        raise InputError("no stage files given")
    with plt.rc_context(_STYLE):
        ncols = 2 if len(stages) > 1 else 1
        nrows = math.ceil(len(stages) / ncols)
        fig, axes = plt.subplots(nrows, ncols,
                                 figsize=(4.0 * ncols, 3.4 * nrows),
                                 squeeze=False)
        for ax in axes.ravel():
            ax.set_visible(False)
        for k, (name, g) in enumerate(stages):
            ax = axes[k // ncols][k % ncols]
            ax.set_visible(True)
            pos = _graph_positions(g)
            for (a, b) in g.edge_list():
                xa, ya = pos[a]
                xb, yb = pos[b]
                ax.plot([xa, xb], [ya, yb], "-", color="#777777", lw=1.0,
                        zorder=1)
            for node in g.node_ids:
                x, y = pos[node]
                hiddenish = g.labels.get(node) == HIDDEN
                ax.scatter([x], [y], s=260,
                           facecolor="white" if hiddenish else "#cfe0f0",
                           edgecolor="#333333",
                           linestyle="--" if hiddenish else "-", zorder=2)
                ax.annotate(str(node), (x, y), ha="center", va="center",
                            fontsize=8, zorder=3)
            ax.set_title(name, fontsize=9)
            ax.set_aspect("equal")
            ax.set_axis_off()
        out = Path(out_path)
        fig.savefig(out, metadata=_META)
        plt.close(fig)
    return out


def render_sweep(sweep_csv, out_path) -> Path:
    """Edge-F1 versus sample count: per-seed points and the median curve."""
    with open(sweep_csv, newline="") as fh:
        content = [l for l in fh if not l.startswith("#")]
    rows = list(csv.DictReader(content))
    if not rows:
        raise InputError(f"{sweep_csv}: empty sweep CSV")
    by_n: dict[int, list[float]] = {}
    for r in rows:
        by_n.setdefault(int(r["n"]), []).append(float(r["f1"]))
    ns = sorted(by_n)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.4, 3.4))
        for n in ns:
            ax.plot([n] * len(by_n[n]), by_n[n], "o", color="#4878a8",
                    alpha=0.5, markersize=4)
        ax.plot(ns, [float(np.median(by_n[n])) for n in ns], "k-o",
                markersize=5, label="median")
        ax.set_xscale("log")
        ax.set_xlabel("samples per node")
        ax.set_ylabel("edge F1")
        ax.set_ylim(-0.02, 1.05)
        ax.legend(fontsize=8)
        out = Path(out_path)
        fig.savefig(out, metadata=_META)
        plt.close(fig)
    return out


def dispatch(args) -> int:
    if args.figcmd == "norms":
        render_norms(args.input, args.out, truth_csv=args.truth)
    elif args.figcmd == "phases":
        render_phases(args.input, args.edges, args.out,
                      diagnostics_csv=args.diagnostics)
    elif args.figcmd == "graphs":
        render_graphs(args.inputs, args.out)
    elif args.figcmd == "sweep":
        render_sweep(args.input, args.out)
    else:
        raise InputError(f"unknown figviz command {args.figcmd!r}")
    print(f"wrote {args.out}")
    return 0
