"""Command-line front end.

Subcommands: ``simulate``, ``learn``, ``learn-latent``, ``eval``, ``sweep``,
``oracle-dump``, and ``figviz``. Tabular outputs are CSV with a header row
preceded by ``# key=value`` provenance lines echoing the effective
configuration; graphs are emitted as JSON and DOT. Every command is
deterministic given its inputs, seed, and configuration.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import CyclonetError, InputError, NumericalError
from .evaluate import evaluate_topology
from .fullobs import (LearnerConfig, reconstruct_topology,
                      write_diagnostics_csv, ORACLE_TOL)
from .graphs import TopologyGraph, topology_of
from .latent import reconstruct_latent
from .netsim import NetworkSpec, simulate
from .series import read_dataset, write_csv, write_cyg1
from .spectral import (dump_grid_csv, exact_inverse_psd,
                       exact_observed_inverse_psd)

_CONFIG_FIELDS = [f.name for f in dataclasses.fields(LearnerConfig)]


def load_spec(ref: str) -> NetworkSpec:
    """Load a network spec from a path, or ``builtin:<name>`` for a spec
    shipped inside the package."""
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        res = resources.files("cyclonet").joinpath(f"data/{name}.json")
        if not res.is_file():
            raise InputError(f"no builtin spec named {name!r}")
        return NetworkSpec.from_json_dict(json.loads(res.read_text()))
    path = Path(ref)
    if not path.exists():
        raise InputError(f"spec file not found: {ref}")
    return NetworkSpec.load(path)


def _effective_config(args) -> LearnerConfig:
    """flags > config file > defaults"""
    base = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = json.load(fh)
        unknown = set(base) - set(_CONFIG_FIELDS)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
    merged = {}
    for name in _CONFIG_FIELDS:
        flag = getattr(args, name, None)
        if flag is not None:
            merged[name] = flag
        elif name in base:
            merged[name] = base[name]
    return LearnerConfig(**merged)


def _config_lines(config: LearnerConfig, extra: dict | None = None) -> list[str]:
    d = config.to_dict()
    d.update(extra or {})
    return [f"{k}={d[k]}" for k in sorted(d)]


def _add_learner_flags(p: argparse.ArgumentParser, latent: bool,
                       oracle: bool = True) -> None:
    p.add_argument("--config", help="JSON config file (flags take precedence)")
    p.add_argument("--period", type=int, help="override the lifting period")
    p.add_argument("--max-period", type=int, dest="max_period")
    p.add_argument("--detect-threshold", type=float, dest="detect_threshold")
    p.add_argument("--segment-blocks", type=int, dest="segment_blocks",
                   help="Welch segment length in blocks")
    p.add_argument("--overlap", type=float)
    p.add_argument("--window", choices=["hann", "rect"])
    p.add_argument("--ridge", type=float)
    p.add_argument("--rho", type=float, help="kin-graph block-norm threshold")
    if latent:
        p.add_argument("--tau", type=float,
                       help="observed-graph block-norm threshold")
    p.add_argument("--flatness-tol", type=float, dest="flatness_tol")
    p.add_argument("--magnitude-floor", type=float, dest="magnitude_floor")
    p.add_argument("--ratio-tol", type=float, dest="ratio_tol")
    if oracle:
        p.add_argument("--oracle", action="store_true",
                       help="use the exact spectra of --spec instead of "
                            "estimates")
        p.add_argument("--spec", help="network spec (needed with --oracle)")
        p.add_argument("--freqs", type=int, default=128,
                       help="frequency count for --oracle grids")


def _oracle_config(config: LearnerConfig, args) -> LearnerConfig:
    """In oracle mode, thresholds not given explicitly drop to the exact-zero
    scale."""
    updates = {}
    if args.rho is None:
        updates["rho"] = ORACLE_TOL
    if getattr(args, "tau", None) is None:
        updates["tau"] = ORACLE_TOL
    if args.flatness_tol is None:
        updates["flatness_tol"] = ORACLE_TOL
    return dataclasses.replace(config, **updates)


def _write_graph(outdir: Path, stem: str, g: TopologyGraph) -> None:
    (outdir / f"{stem}.json").write_text(g.to_json() + "\n")
    (outdir / f"{stem}.dot").write_text(g.to_dot(stem))


def cmd_simulate(args) -> int:
    net = load_spec(args.spec)
    if args.n <= 0:
        raise InputError("--n must be positive")
    series = simulate(net, args.n, args.seed, burn_in=args.burn_in,
                      full_output=args.full)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        write_csv(out, series)
    else:
        write_cyg1(out, series)
    print(f"wrote {len(series)} series x {args.n} samples to {out}")
    return 0


def cmd_learn(args) -> int:
    config = _effective_config(args)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.oracle:
        if not args.spec:
            raise InputError("--oracle requires --spec")
        net = load_spec(args.spec)
        config = _oracle_config(config, args)
        omegas = 2 * np.pi * np.arange(args.freqs) / args.freqs
        grid = exact_inverse_psd(net, omegas, period=config.period)
        result = reconstruct_topology([], config, grid=grid)
    else:
        series = read_dataset(args.data)
        result = reconstruct_topology(series, config)
    extra = {"period_used": result.period, "mode":
             "oracle" if args.oracle else "estimate"}
    _write_graph(outdir, "topology", result.topology)
    _write_graph(outdir, "moral", result.moral)
    write_diagnostics_csv(outdir / "diagnostics.csv", result.diagnostics,
                          _config_lines(config, extra))
    dump_grid_csv(outdir / "inverse_psd.csv", result.grid,
                  _config_lines(config, extra))
    print(f"period={result.period} moral_edges={len(result.moral.edges)} "
          f"topology_edges={len(result.topology.edges)}")
    return 0


def cmd_learn_latent(args) -> int:
    config = _effective_config(args)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.oracle:
        if not args.spec:
            raise InputError("--oracle requires --spec")
        net = load_spec(args.spec)
        config = _oracle_config(config, args)
        omegas = 2 * np.pi * np.arange(args.freqs) / args.freqs
        grid = exact_observed_inverse_psd(net, omegas, period=config.period)
        result = reconstruct_latent([], config, grid=grid)
    else:
        series = read_dataset(args.data)
        result = reconstruct_latent(series, config)
    extra = {"period_used": result.period,
             "mode": "oracle" if args.oracle else "estimate"}
    (outdir / "latent_result.json").write_text(result.to_json() + "\n")
    _write_graph(outdir, "gc", result.gc)
    _write_graph(outdir, "observed_topology", result.observed_topology)
    _write_graph(outdir, "final", result.final)
    write_diagnostics_csv(outdir / "diagnostics.csv", result.diagnostics,
                          _config_lines(config, extra))
    dump_grid_csv(outdir / "inverse_psd.csv", result.grid,
                  _config_lines(config, extra))
    print(f"period={result.period} leaves={sorted(result.leaves)} "
          f"hidden={sorted(result.hidden_inserted)} "
          f"final_edges={len(result.final.edges)}")
    return 0


def _truth_topology(net: NetworkSpec) -> TopologyGraph:
    return topology_of(net.generative_graph(), hidden=net.hidden)


def cmd_eval(args) -> int:
    doc = json.loads(Path(args.estimated).read_text())
    if "final" in doc:  # a latent result document
        est = TopologyGraph.from_json_dict(doc["final"])
    else:
        est = TopologyGraph.from_json_dict(doc)
    truth = _truth_topology(load_spec(args.truth_spec))
    metrics = evaluate_topology(est, truth)
    payload = metrics.to_dict()
    if args.out:
        Path(args.out).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    net = load_spec(args.spec)
    truth = _truth_topology(net)
    ns = [int(v) for v in args.n.split(",") if v]
    seeds = [int(v) for v in args.seeds.split(",") if v]
    if not ns or not seeds:
        raise InputError("need at least one N and one seed")
    config = _effective_config(args)
    period = net.period()
    omegas = 2 * np.pi * np.arange(args.slope_segment_blocks) \
        / args.slope_segment_blocks
    oracle = exact_inverse_psd(net, omegas, period=period)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in ns:
        for seed in seeds:
            series = simulate(net, n, seed, full_output=True)
            result = reconstruct_topology(series, config)
            metrics = evaluate_topology(result.topology, truth)
            err = _phi_inv_error(series, net, period,
                                 args.slope_segment_blocks, config, oracle)
            rows.append([n, seed, repr(metrics.edge_precision),
                         repr(metrics.edge_recall), repr(metrics.edge_f1),
                         int(metrics.exact_match), repr(err)])
    with open(out, "w", newline="") as fh:
        for line in _config_lines(config, {
                "slope_segment_blocks": args.slope_segment_blocks}):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["n", "seed", "precision", "recall", "f1", "exact",
                    "phi_inv_max_err"])
        w.writerows(rows)
    print(f"wrote {len(rows)} sweep rows to {out}")
    return 0


def _phi_inv_error(series, net, period, segment_blocks, config, oracle) -> float:
    from .series import lift
    from .spectral import estimate_block_psd, invert_psd
    lifted = [lift(s, period) for s in series]
    phi = estimate_block_psd(lifted, segment_blocks, config.overlap,
                             config.window)
    inv = invert_psd(phi, config.ridge)
    return float(np.abs(inv.matrices - oracle.matrices).max())


def cmd_oracle_dump(args) -> int:
    net = load_spec(args.spec)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    omegas = 2 * np.pi * np.arange(args.freqs) / args.freqs
    config = LearnerConfig(rho=ORACLE_TOL, tau=ORACLE_TOL,
                           flatness_tol=ORACLE_TOL, period=args.period)
    header = _config_lines(config, {"mode": "oracle", "spec": Path(args.spec).name
                                    if not args.spec.startswith("builtin:")
                                    else args.spec})
    if args.observed_only and net.hidden:
        grid = exact_observed_inverse_psd(net, omegas, period=args.period)
    else:
        grid = exact_inverse_psd(net, omegas, period=args.period)
    dump_grid_csv(outdir / "inverse_psd.csv", grid, header)
    result = reconstruct_topology([], config, grid=grid)
    write_diagnostics_csv(outdir / "diagnostics.csv", result.diagnostics,
                          header)
    _write_graph(outdir, "truth_topology", _truth_topology(net))
    _write_graph(outdir, "moral", result.moral)
    _write_graph(outdir, "topology", result.topology)
    print(f"oracle dump in {outdir} ({grid.matrices.shape[0]} frequencies, "
          f"T={grid.block_size})")
    return 0


def cmd_figviz(args) -> int:
    from . import figviz
    return figviz.dispatch(args)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cyclonet",
        description="Simulate networks of dynamically coupled agents with "
                    "cyclostationary inputs and reconstruct their topology "
                    "from time series.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a dataset from a spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=10_000, dest="burn_in")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "cyg1"], default="cyg1")
    p.add_argument("--full", action="store_true",
                   help="emit hidden nodes too")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("learn", help="full-observability reconstruction")
    p.add_argument("--data", help="dataset file (csv or cyg1)")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_learner_flags(p, latent=False)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("learn-latent",
                       help="reconstruction with hidden nodes (radial nets)")
    p.add_argument("--data", help="dataset file (csv or cyg1)")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_learner_flags(p, latent=True)
    p.set_defaults(func=cmd_learn_latent)

    p = sub.add_parser("eval", help="score a reconstruction against truth")
    p.add_argument("--estimated", required=True,
                   help="topology JSON or latent result JSON")
    p.add_argument("--truth-spec", required=True, dest="truth_spec")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="metrics across sample sizes and seeds")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", required=True, help="comma-separated sample counts")
    p.add_argument("--seeds", required=True, help="comma-separated seeds")
    p.add_argument("--out", required=True)
    p.add_argument("--slope-segment-blocks", type=int, default=32,
                   dest="slope_segment_blocks")
    _add_learner_flags(p, latent=False, oracle=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle-dump",
                       help="exact spectra and diagnostics for a spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--freqs", type=int, default=128)
    p.add_argument("--period", type=int)
    p.add_argument("--observed-only", action="store_true",
                   dest="observed_only")
    p.set_defaults(func=cmd_oracle_dump)

    p = sub.add_parser("figviz", help="render figures from command outputs")
    fig_sub = p.add_subparsers(dest="figcmd", required=True)
    q = fig_sub.add_parser("norms")
    q.add_argument("--input", required=True, help="diagnostics CSV")
    q.add_argument("--truth", help="oracle diagnostics CSV overlay")
    q.add_argument("--out", required=True)
    q = fig_sub.add_parser("phases")
    q.add_argument("--input", required=True, help="spectral dump CSV")
    q.add_argument("--diagnostics", help="diagnostics CSV for annotations")
    q.add_argument("--edges", required=True,
                   help="comma list like 10:3,10:4")
    q.add_argument("--out", required=True)
    q = fig_sub.add_parser("graphs")
    q.add_argument("--inputs", required=True, nargs="+",
                   help="graph stage JSON files")
    q.add_argument("--out", required=True)
    q = fig_sub.add_parser("sweep")
    q.add_argument("--input", required=True, help="sweep CSV")
    q.add_argument("--out", required=True)
    p.set_defaults(func=cmd_figviz)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except CyclonetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
