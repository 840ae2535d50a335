import warnings

import numpy as np
import pytest

import cyclonet as cn
from cyclonet.errors import StructureError
from cyclonet.evaluate import evaluate_topology
from cyclonet.fullobs import LearnerConfig, ORACLE_TOL
from cyclonet.graphs import TopologyGraph, hop_distance
from cyclonet.latent import (build_gc, insert_hidden_nodes,
                             learn_observed_topology, reconstruct_latent)
from cyclonet.netsim import FilterSpec, InputSpec, NetworkSpec
from cyclonet.spectral import exact_observed_inverse_psd

from _gen import make_radial_hidden_spec, truth_topology

ORACLE_CFG = LearnerConfig(rho=ORACLE_TOL, tau=ORACLE_TOL,
                           flatness_tol=ORACLE_TOL)


class TestBuildGc:
    def test_bench_oracle_support(self, oracle_oo_grid, bench11_hidden):
        gc = build_gc(oracle_oo_grid, tau=1e-6)
        truth = truth_topology(bench11_hidden)
        for (a, b) in gc.edge_list():
            assert hop_distance(truth, a, b) <= 4
        # the two-hop bridges over the hidden nodes must be present
        for e in [(3, 4), (6, 7), (1, 3), (4, 6), (7, 9)]:
            assert gc.has_edge(*e)
        # four-hop pairs across one hidden node are present too
        for e in [(2, 5), (5, 8)]:
            assert gc.has_edge(*e)

    def test_no_hidden_equals_moral(self, bench11, oracle_grid):
        from cyclonet.fullobs import moral_graph
        net = NetworkSpec(bench11.node_ids, bench11.edge_filters,
                          bench11.input_specs, frozenset())
        om = oracle_grid.frequencies
        gc = build_gc(exact_observed_inverse_psd(net, om), tau=1e-6)
        assert gc.edges == moral_graph(oracle_grid, 1e-6).edges


class TestLearnObservedTopology:
    def test_bench_oracle(self, oracle_oo_grid):
        gc = build_gc(oracle_oo_grid, tau=1e-6)
        topo, leaves, nonleaves, profiles = learn_observed_topology(
            gc, oracle_oo_grid, ORACLE_TOL, 0.05, 3.0)
        assert leaves == {1, 9}
        assert nonleaves == set(range(2, 9))
        assert sorted(topo.edges) == [(1, 2), (2, 3), (4, 5), (5, 6),
                                      (7, 8), (8, 9)]
        # the two-hop leaf candidates are rejected by phase flatness
        rejected = {tuple(sorted(p.edge)) for p in profiles
                    if p.is_flat(ORACLE_TOL, 3.0)}
        assert rejected == {(1, 3), (7, 9)}

    def test_triangle_gc_has_no_certified_edges(self):
        gc = TopologyGraph.build([1, 2, 3], [(1, 2), (2, 3), (1, 3)])
        mats = np.broadcast_to(np.eye(3, dtype=complex), (4, 3, 3)).copy()
        grid = cn.SpectralGrid(np.arange(4.0), 1, (1, 2, 3), mats,
                               kind="inverse_psd")
        with pytest.raises(StructureError):
            learn_observed_topology(gc, grid, 0.1, 0.05, 3.0)

    def test_path_keeps_interior_edges(self):
        gc = TopologyGraph.build(range(1, 6),
                                 [(1, 2), (2, 3), (3, 4), (4, 5)])
        mats = np.broadcast_to(np.eye(5, dtype=complex), (4, 5, 5)).copy()
        grid = cn.SpectralGrid(np.arange(4.0), 1, tuple(range(1, 6)), mats,
                               kind="inverse_psd")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            topo, leaves, nonleaves, _ = learn_observed_topology(
                gc, grid, 0.1, 0.05, 3.0)
        assert (2, 3) in topo.edges and (3, 4) in topo.edges
        assert leaves == {1, 5}


class TestInsertHidden:
    def test_bench_components_joined(self, oracle_oo_grid):
        gc = build_gc(oracle_oo_grid, tau=1e-6)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            topo, _, _, _ = learn_observed_topology(
                gc, oracle_oo_grid, ORACLE_TOL, 0.05, 3.0)
        final, hidden, notes = insert_hidden_nodes(topo, gc)
        assert len(hidden) == 2
        assert sorted(hidden) == [10, 11]
        h1 = next(h for h in hidden if final.has_edge(3, h))
        h2 = next(h for h in hidden if final.has_edge(6, h))
        assert final.has_edge(4, h1) and final.has_edge(7, h2)

    def test_connected_input_is_identity(self):
        topo = TopologyGraph.build([1, 2, 3], [(1, 2), (2, 3)])
        gc = topo
        final, hidden, _ = insert_hidden_nodes(topo, gc)
        assert hidden == frozenset()
        assert final.edges == topo.edges

    def test_three_branch_hub_merges_to_one_hidden(self):
        """Three components all adjacent to one true hidden hub collapse to
        a single hidden node after merging."""
        rng = np.random.default_rng(5)
        # star of three chains of length 3 around hidden node 10
        edges = []
        nodes = [10]
        nid = 0
        for _ in range(3):
            prev = 10
            for depth in range(3):
                nid += 1
                nodes.append(nid)
                edges.append((prev, nid))
                prev = nid
        shapes = {n: np.concatenate([[1.0], rng.uniform(-0.5, 0.5, 3)])
                  for n in nodes}
        fs = {}
        for (i, j) in edges:
            fs[(i, j)] = FilterSpec(0.14 * shapes[i])
            fs[(j, i)] = FilterSpec(0.14 * shapes[j])
        net = NetworkSpec(tuple(sorted(nodes)), fs,
                          {n: InputSpec() for n in nodes},
                          hidden=frozenset({10}))
        om = 2 * np.pi * np.arange(64) / 64
        grid = exact_observed_inverse_psd(net, om)
        res = reconstruct_latent([], ORACLE_CFG, grid=grid)
        assert len(res.hidden_inserted) == 1
        h = next(iter(res.hidden_inserted))
        assert len(res.final.neighbors(h)) == 3
        m = evaluate_topology(res.final, truth_topology(net))
        assert m.exact_match


class TestReconstructLatent:
    def test_bench_oracle_exact(self, oracle_oo_grid, bench11_hidden):
        res = reconstruct_latent([], ORACLE_CFG, grid=oracle_oo_grid)
        truth = truth_topology(bench11_hidden)
        m = evaluate_topology(res.final, truth)
        assert m.exact_match and m.hidden_placement_match
        assert res.leaves == {1, 9}
        # structural postconditions
        assert set(res.observed_topology.edges) <= set(res.gc.edges)
        n, e = len(res.final.node_ids), len(res.final.edges)
        assert e == n - 1  # tree

    def test_fully_observed_matches_fullobs(self, bench11, oracle_grid):
        net = NetworkSpec(bench11.node_ids, bench11.edge_filters,
                          bench11.input_specs, frozenset())
        om = oracle_grid.frequencies
        grid = exact_observed_inverse_psd(net, om)
        res = reconstruct_latent([], ORACLE_CFG, grid=grid)
        from cyclonet.fullobs import reconstruct_topology
        full = reconstruct_topology([], ORACLE_CFG, grid=oracle_grid)
        assert res.hidden_inserted == frozenset()
        assert res.final.edges == full.topology.edges

    def test_oracle_random_radial_specs(self):
        om = 2 * np.pi * np.arange(96) / 96
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for seed in range(5):
                rng = np.random.default_rng(700 + seed)
                spec = make_radial_hidden_spec(
                    rng, n_hidden=int(rng.integers(1, 3)))
                grid = exact_observed_inverse_psd(spec, om)
                res = reconstruct_latent([], ORACLE_CFG, grid=grid)
                m = evaluate_topology(res.final, truth_topology(spec))
                assert m.exact_match, f"seed {seed}: f1={m.edge_f1}"

    def test_result_serialization(self, oracle_oo_grid):
        res = reconstruct_latent([], ORACLE_CFG, grid=oracle_oo_grid)
        doc = res.to_json_dict()
        assert doc["leaves"] == [1, 9]
        assert len(doc["hidden"]) == 2
        for h in doc["hidden"]:
            assert len(h["neighbors"]) >= 2
        back = TopologyGraph.from_json_dict(doc["final"])
        assert back.edges == res.final.edges
