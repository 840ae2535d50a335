"""Acceptance suite: one test per acceptance criterion, each printing a
PASS/FAIL line (run with ``pytest -s tests/test_acceptance.py`` to see them).

The latent reproduction criterion is implemented exactly as stated and is
expected to fail on estimated spectra at this sample size: certifying that
the two-hop bridges over hidden nodes are not true edges requires the
four-hop inverse-PSD blocks, whose exact magnitude (max-abs entry 0.0006 to
0.0012 here) lies an order of magnitude below the smallest achievable
estimation noise floor at 628400 samples. The companion oracle test shows
the algorithms recover the tree exactly once estimation noise is removed.
"""
import warnings

import numpy as np

import cyclonet as cn
from cyclonet.errors import StructureError
from cyclonet.evaluate import evaluate_topology
from cyclonet.fullobs import (LearnerConfig, ORACLE_TOL, phase_profile,
                              reconstruct_topology)
from cyclonet.latent import reconstruct_latent
from cyclonet.series import ScalarSeries, lift, unlift
from cyclonet.spectral import (estimate_block_psd, exact_inverse_psd,
                               exact_observed_inverse_psd, invert_psd,
                               welch_cross_psd)

from conftest import BENCH_N, TRUE_EDGES
from _gen import (brute_cut_pair, brute_sep, make_dag_spec,
                  make_radial_hidden_spec, make_shared_children_spec,
                  make_tree_spec, random_graph, truth_topology)

LADDER = [39275, 78550, 157100, 314200, 628400]
SWEEP_SEEDS = [1, 2, 3, 4, 5]
ORACLE_CFG = LearnerConfig(rho=ORACLE_TOL, tau=ORACLE_TOL,
                           flatness_tol=ORACLE_TOL)


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {name}: {status}" + (f" ({detail})" if detail else ""))


NAMED_SPOUSES = [(2, 10), (5, 10), (5, 11), (8, 11)]


class TestFullObservabilityReproduction:
    def test_criterion(self, bench11_dataset, bench11_truth):
        ok = True
        details = []
        for label, cfg in (("auto", LearnerConfig()),
                           ("lifted", LearnerConfig(period=2))):
            res = reconstruct_topology(bench11_dataset, cfg)
            exact = set(res.topology.edges) == set(bench11_truth.edges)
            in_moral = all(res.moral.has_edge(a, b)
                           for (a, b) in NAMED_SPOUSES)
            classified = all(
                d.decision == "spurious" for d in res.diagnostics
                if tuple(sorted((d.i, d.j))) in NAMED_SPOUSES)
            details.append(f"{label}[T={res.period}]: exact={exact} "
                           f"spouses_in_moral={in_moral} "
                           f"spurious={classified}")
            ok = ok and exact and in_moral and classified
        report("full-observability reproduction", ok, "; ".join(details))
        assert ok, details


class TestLatentReproduction:
    def test_criterion(self, bench11_dataset):
        observed = [s for s in bench11_dataset if s.node_id <= 9]
        checks = {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                res = reconstruct_latent(observed, LearnerConfig())
                checks["leaves"] = res.leaves == {1, 9}
                checks["nonleaves"] = res.nonleaves == set(range(2, 9))
                rejected = {
                    tuple(sorted(d for d in (dg.i, dg.j)))
                    for dg in res.diagnostics
                    if dg.decision == "spurious" and np.isfinite(dg.flatness)}
                checks["phase_rejections"] = {(1, 3), (7, 9)} <= rejected
                truth = cn.TopologyGraph.build(
                    range(1, 12), TRUE_EDGES, hidden=[10, 11])
                m = evaluate_topology(res.final, truth)
                checks["final_tree"] = m.exact_match
            except StructureError as exc:
                checks["pipeline"] = False
                checks["error"] = str(exc)
        ok = all(v for v in checks.values() if isinstance(v, bool))
        report("latent reproduction (estimated)", ok, str(checks))
        assert ok, (
            f"data-driven latent reconstruction cannot resolve the "
            f"sub-noise four-hop blocks at N={BENCH_N}: {checks}")

    def test_oracle_companion(self, oracle_oo_grid, bench11_hidden):
        res = reconstruct_latent([], ORACLE_CFG, grid=oracle_oo_grid)
        m = evaluate_topology(res.final, truth_topology(bench11_hidden))
        ok = (m.exact_match and res.leaves == {1, 9}
              and res.nonleaves == set(range(2, 9)))
        report("latent reproduction (oracle companion)", ok)
        assert ok


class TestOracleZeroPatterns:
    def test_criterion(self):
        from cyclonet.graphs import moralize
        from test_spectral import latent_zero_patterns
        om = 2 * np.pi * np.arange(32) / 32
        bad = []
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            spec = make_radial_hidden_spec(rng,
                                           n_hidden=1 + seed % 2)
            grid = exact_inverse_psd(spec, om)
            kin = moralize(spec.generative_graph())
            ids = grid.node_ids
            for a in range(len(ids)):
                for b in range(a + 1, len(ids)):
                    if not kin.has_edge(ids[a], ids[b]):
                        if grid.block_norm(ids[b], ids[a]) > 1e-12:
                            bad.append((seed, "nonkin", ids[a], ids[b]))
            bad += [(seed, v) for v in latent_zero_patterns(spec, om)]
        report("oracle zero patterns (20 specs)", not bad, f"{bad[:5]}")
        assert not bad


class TestOracleEndToEnd:
    def test_full_observability(self):
        om = 2 * np.pi * np.arange(96) / 96
        fails = []
        for seed in range(20):
            rng = np.random.default_rng(2000 + seed)
            if seed < 9:
                spec = make_tree_spec(rng, complex_weights=True)
            elif seed < 14:
                spec = make_tree_spec(rng, complex_weights=False)
            elif seed < 17:
                spec = make_dag_spec(rng)
            else:
                spec = make_shared_children_spec(rng)
            res = reconstruct_topology([], ORACLE_CFG,
                                       grid=exact_inverse_psd(spec, om))
            if set(res.topology.edges) != set(truth_topology(spec).edges):
                fails.append(seed)
        report("oracle end-to-end, full observability (20 specs)",
               not fails, f"failed seeds {fails}")
        assert not fails

    def test_latent(self):
        om = 2 * np.pi * np.arange(96) / 96
        fails = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for seed in range(20):
                rng = np.random.default_rng(3000 + seed)
                spec = make_radial_hidden_spec(rng, n_hidden=1 + seed % 2)
                grid = exact_observed_inverse_psd(spec, om)
                res = reconstruct_latent([], ORACLE_CFG, grid=grid)
                m = evaluate_topology(res.final, truth_topology(spec))
                if not m.exact_match:
                    fails.append((seed, m.edge_f1))
        report("oracle end-to-end, latent (20 specs)", not fails,
               f"failed {fails}")
        assert not fails


class TestPhaseFlatnessSeparation:
    def test_criterion(self):
        from cyclonet.graphs import moralize, topology_of
        om = 2 * np.pi * np.arange(64) / 64
        redraws = 0
        worst_spouse, worst_true = 0.0, np.inf
        for seed in range(12):
            rng = np.random.default_rng(4000 + seed)
            spec = make_tree_spec(rng, complex_weights=True)
            for attempt in (0, 1):
                grid = exact_inverse_psd(spec, om)
                g = spec.generative_graph()
                topo = topology_of(g)
                kin = moralize(g)
                spouses = [e for e in kin.edge_list()
                           if e not in topo.edge_list()]
                trues = topo.edge_list()
                sp = max((phase_profile(grid, (b, a)).flatness
                          for (a, b) in spouses), default=0.0)
                tr = min(phase_profile(grid, (b, a)).flatness
                         for (a, b) in trues)
                if sp < 1e-6 and tr > 0.1:
                    worst_spouse = max(worst_spouse, sp)
                    worst_true = min(worst_true, tr)
                    break
                if attempt == 0:
                    # suspected pathological draw: one redraw permitted
                    redraws += 1
                    spec = make_tree_spec(
                        np.random.default_rng(8000 + seed))
                else:
                    worst_spouse = max(worst_spouse, sp)
                    worst_true = min(worst_true, tr)
        ok = worst_spouse < 1e-6 and worst_true > 0.1 and redraws <= 1
        report("phase flatness separation", ok,
               f"spouse<= {worst_spouse:.2e}, true>= {worst_true:.3f}, "
               f"redraws={redraws}")
        assert ok


class TestEstimatorConvergence:
    def test_criterion(self, bench11, bench11_truth):
        period = bench11.period()
        slope_blocks = 32
        om = 2 * np.pi * np.arange(slope_blocks) / slope_blocks
        oracle = exact_inverse_psd(bench11, om, period=period)
        f1 = {n: [] for n in LADDER}
        err = {n: [] for n in LADDER}
        for n in LADDER:
            for seed in SWEEP_SEEDS:
                series = cn.simulate(bench11, n, seed=seed)
                res = reconstruct_topology(series, LearnerConfig())
                m = evaluate_topology(res.topology, bench11_truth)
                f1[n].append(m.edge_f1)
                lifted = [lift(s, period) for s in series]
                phi = estimate_block_psd(lifted, slope_blocks)
                inv = invert_psd(phi)
                err[n].append(
                    float(np.abs(inv.matrices - oracle.matrices).max()))
        med_f1 = [float(np.median(f1[n])) for n in LADDER]
        med_err = [float(np.median(err[n])) for n in LADDER]
        slope = float(np.polyfit(np.log(LADDER), np.log(med_err), 1)[0])
        nondecreasing = all(a <= b + 1e-12
                            for a, b in zip(med_f1, med_f1[1:]))
        ok = (nondecreasing and med_f1[-1] == 1.0
              and -0.65 <= slope <= -0.35)
        report("estimator convergence", ok,
               f"median F1 {med_f1}, slope {slope:.3f}")
        assert ok, (med_f1, slope)


class TestCombinatoricsOracle:
    def test_criterion(self):
        rng = np.random.default_rng(5000)
        mismatches = 0
        graphs = 0
        while graphs < 200:
            g = random_graph(rng)
            graphs += 1
            nodes = list(g.node_ids)
            for _ in range(3):
                i, j = (int(v) for v in
                        rng.choice(nodes, size=2, replace=False))
                rest = [n for n in nodes if n not in (i, j)]
                z = {n for n in rest if rng.random() < 0.35}
                if cn.sep(g, i, z, j) != brute_sep(g, i, z, j):
                    mismatches += 1
            for (a, b) in g.edge_list():
                if cn.is_cut_pair(g, a, b) != brute_cut_pair(g, a, b):
                    mismatches += 1
        report("combinatorics oracle (200 graphs)", mismatches == 0,
               f"{mismatches} mismatches")
        assert mismatches == 0


class TestLiftingChecks:
    def test_criterion(self, bench11_dataset):
        rng = np.random.default_rng(6000)
        ok_round = True
        for t in (1, 2, 3, 5):
            x = ScalarSeries(rng.standard_normal(997)
                             + 1j * rng.standard_normal(997))
            n = (997 // t) * t
            ok_round &= np.array_equal(unlift(lift(x, t)).samples,
                                       x.samples[:n])

        # split-half covariance stationarity of the lifted benchmark series
        from test_series import brute_shift_invariant
        worst_drift = 0.0
        for s in bench11_dataset[:4]:
            drift = brute_shift_invariant(s, 2, lags=(0, 1))
            worst_drift = max(worst_drift, drift)
        nb = bench11_dataset[0].sample_count // 2
        bound = 5.0 / np.sqrt(nb // 2)
        ok_stat = worst_drift < bound

        # the T=1 pipeline is the plain scalar pipeline, block for block
        series = [s for s in bench11_dataset[:3]]
        lifted = [lift(s, 1) for s in series]
        grid = estimate_block_psd(lifted, 32)
        ok_scalar = True
        for a in range(3):
            for b in range(3):
                xa = series[a].samples - series[a].samples.mean()
                xb = series[b].samples - series[b].samples.mean()
                direct = welch_cross_psd(xa, xb, 32)
                blk = grid.block(series[a].node_id, series[b].node_id)[:, 0, 0]
                ok_scalar &= bool(np.abs(direct - blk).max() < 1e-10)

        ok = ok_round and ok_stat and ok_scalar
        report("lifting and stationarity checks", ok,
               f"round={ok_round} stationarity={ok_stat} "
               f"(drift {worst_drift:.4f} < {bound:.4f}) scalar={ok_scalar}")
        assert ok


class TestFigvizGolden:
    def test_criterion(self, tmp_path):
        import csv
        from pathlib import Path
        from cyclonet.figviz import (render_graphs, render_norms,
                                     render_phases, render_sweep)
        golden = Path(__file__).parent.parent / "golden" / "bench11_oracle"
        ok = True
        try:
            a1 = render_norms(golden / "diagnostics.csv", tmp_path / "n1.png",
                              truth_csv=golden / "diagnostics.csv")
            a2 = render_norms(golden / "diagnostics.csv", tmp_path / "n2.png",
                              truth_csv=golden / "diagnostics.csv")
            ok &= a1.read_bytes() == a2.read_bytes()
            p1 = render_phases(golden / "inverse_psd.csv",
                               "10:3,10:4,10:2,10:5", tmp_path / "p1.png",
                               diagnostics_csv=golden / "diagnostics.csv")
            p2 = render_phases(golden / "inverse_psd.csv",
                               "10:3,10:4,10:2,10:5", tmp_path / "p2.png",
                               diagnostics_csv=golden / "diagnostics.csv")
            ok &= p1.read_bytes() == p2.read_bytes()
            g1 = render_graphs([golden / "truth_topology.json",
                                golden / "moral.json",
                                golden / "topology.json"],
                               tmp_path / "g1.png")
            g2 = render_graphs([golden / "truth_topology.json",
                                golden / "moral.json",
                                golden / "topology.json"],
                               tmp_path / "g2.png")
            ok &= g1.read_bytes() == g2.read_bytes()
            render_sweep(golden / "sweep.csv", tmp_path / "s.png")
        except Exception as exc:  # any rendering failure fails the criterion
            ok = False
            detail = f"exception {exc}"
        with open(golden / "diagnostics.csv") as fh:
            rows = list(csv.DictReader(
                l for l in fh if not l.startswith("#")))
        flat = {(int(r["j"]), int(r["i"])): float(r["flatness"])
                for r in rows}
        for pair in [(10, 2), (10, 5)]:
            key = pair if pair in flat else (pair[1], pair[0])
            ok &= flat[key] < 0.1
        report("figviz golden regeneration", ok)
        assert ok
