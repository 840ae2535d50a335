"""Topology reconstruction from observed nodes only, for bidirected radial
networks with well-separated hidden nodes.

Three stages work off the observed-block inverse PSD:

1. ``build_gc``: threshold block norms into an undirected graph whose edges
   join nodes within four true hops of each other.
2. ``learn_observed_topology``: an edge of that graph is a true edge between
   non-leaf nodes exactly when deleting its two endpoints disconnects the
   graph; remaining nodes are leaves, and each leaf keeps only those
   candidate edges whose eigenvalue phases are not flat (flat means the pair
   is two hops apart, not adjacent).
3. ``insert_hidden_nodes``: two components of the observed topology are
   joined through a fresh hidden node when attachment points exist whose
   neighborhoods form cliques in the stage-1 graph; hidden nodes sharing an
   observed neighbor are merged.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

from .errors import InputError, StructureError
from .fullobs import (LearnerConfig, PhaseProfile, EdgeDiagnostic,
                      estimate_inverse_grid, phase_profile, diagnostics_from)
from .graphs import TopologyGraph, connected_components, is_cut_pair
from .series import ScalarSeries
from .spectral import SpectralGrid


@dataclass(frozen=True)
class LatentResult:
    gc: TopologyGraph
    observed_topology: TopologyGraph
    leaves: frozenset[int]
    nonleaves: frozenset[int]
    final: TopologyGraph
    hidden_inserted: frozenset[int]
    period: int
    grid: SpectralGrid
    diagnostics: list[EdgeDiagnostic]
    config: LearnerConfig
    warnings: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "gc": self.gc.to_json_dict(),
            "observed_topology": self.observed_topology.to_json_dict(),
            "leaves": sorted(self.leaves),
            "nonleaves": sorted(self.nonleaves),
            "final": self.final.to_json_dict(),
            "hidden": [
                {"id": h, "neighbors": sorted(self.final.neighbors(h))}
                for h in sorted(self.hidden_inserted)
            ],
            "period": self.period,
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def build_gc(grid: SpectralGrid, tau: float) -> TopologyGraph:
    """Threshold the observed-node inverse PSD into an undirected graph."""
    if tau <= 0:
        raise InputError("tau must be positive")
    if grid.kind != "inverse_psd":
        raise InputError("build_gc expects an inverse PSD grid")
    ids = grid.node_ids
    edges = []
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            if grid.block_norm(ids[b], ids[a]) > tau:
                edges.append((ids[a], ids[b]))
    return TopologyGraph.build(ids, edges)


def learn_observed_topology(gc: TopologyGraph, grid: SpectralGrid,
                            flatness_tol: float, magnitude_floor: float,
                            ratio_tol: float
                            ) -> tuple[TopologyGraph, frozenset[int],
                                       frozenset[int], list[PhaseProfile]]:
    """Recover the topology restricted to observed nodes from gc.

    Returns (observed topology, leaves, non-leaves, leaf-edge profiles).
    Raises StructureError when no edge passes the separation test, since the
    leaf stage is then meaningless.
    """
    kept = []
    nonleaves: set[int] = set()
    for (a, b) in gc.edge_list():
        if is_cut_pair(gc, a, b):
            kept.append((a, b))
            nonleaves |= {a, b}
    if not nonleaves:
        raise StructureError(
            "no non-leaf edges survive the separation test; the graph is "
            "too small or the threshold stage failed")
    leaves = frozenset(set(gc.node_ids) - nonleaves)

    profiles = []
    leaf_edges = []
    for a in sorted(leaves):
        hits = []
        for b in sorted(gc.neighbors(a)):
            if b not in nonleaves:
                continue
            prof = phase_profile(grid, (a, b), magnitude_floor)
            profiles.append(prof)
            if not prof.is_flat(flatness_tol, ratio_tol):
                hits.append((a, b))
        leaf_edges += hits
        if len(hits) > 1:
            warnings.warn(
                f"leaf {a} kept {len(hits)} edges; a leaf should have degree "
                f"one (threshold miscalibration?)")
    topo = TopologyGraph.build(gc.node_ids, kept + leaf_edges)
    return topo, leaves, frozenset(nonleaves), profiles


def _quad_is_clique(gc: TopologyGraph, quad: tuple[int, ...]) -> bool:
    for x in range(len(quad)):
        for y in range(x + 1, len(quad)):
            if quad[x] == quad[y] or not gc.has_edge(quad[x], quad[y]):
                return False
    return True


def insert_hidden_nodes(observed_topology: TopologyGraph, gc: TopologyGraph
                        ) -> tuple[TopologyGraph, frozenset[int], list[str]]:
    """Join disconnected components of the observed topology through fresh
    hidden nodes.

    For each component pair, attachment points (c, e) qualify when every
    neighbor b of c and every neighbor f of e (within their components)
    closes a four-clique {b, c, e, f} in gc; the first qualifying pair in
    ascending order wins. Hidden nodes that end up sharing an observed
    neighbor are merged afterwards. Components left unconnected produce a
    warning entry, not an error.
    """
    comps = connected_components(observed_topology)
    notes: list[str] = []
    for comp in comps:
        if len(comp) < 3:
            notes.append(f"component {sorted(comp)} has fewer than 3 nodes")
    next_id = max(gc.node_ids, default=0)
    new_edges: list[tuple[int, int]] = list(observed_topology.edge_list())
    hidden_ids: list[int] = []
    adj = observed_topology.adjacency()

    for x in range(len(comps)):
        for y in range(x + 1, len(comps)):
            placed = False
            alternatives = []
            for c in sorted(comps[x]):
                for e in sorted(comps[y]):
                    if not gc.has_edge(c, e):
                        continue
                    nbrs_c = sorted(adj[c])
                    nbrs_e = sorted(adj[e])
                    if not nbrs_c or not nbrs_e:
                        continue
                    ok = all(
                        _quad_is_clique(gc, (b, c, e, f))
                        for b in nbrs_c for f in nbrs_e)
                    if ok:
                        alternatives.append((c, e))
            if alternatives:
                c, e = alternatives[0]
                next_id += 1
                hidden_ids.append(next_id)
                new_edges += [(c, next_id), (e, next_id)]
                placed = True
                if len(alternatives) > 1:
                    notes.append(
                        f"components {x},{y}: multiple attachments "
                        f"{alternatives}, used {alternatives[0]}")
            if not placed:
                notes.append(
                    f"components {sorted(comps[x])} and {sorted(comps[y])} "
                    f"not joined (no qualifying attachment pair)")

    # merge hidden nodes that share an observed neighbor, transitively
    merged = True
    while merged:
        merged = False
        for a in list(hidden_ids):
            for b in list(hidden_ids):
                if b <= a:
                    continue
                na = {v for (u, v) in _edges_of(new_edges, a)}
                nb = {v for (u, v) in _edges_of(new_edges, b)}
                if na & nb:
                    new_edges = [
                        (u if u != b else a, v if v != b else a)
                        for (u, v) in new_edges]
                    new_edges = [e for e in new_edges if e[0] != e[1]]
                    hidden_ids.remove(b)
                    merged = True
                    break
            if merged:
                break

    # canonicalize hidden ids to be dense above the observed range
    base = max(observed_topology.node_ids, default=0)
    relabel = {h: base + k + 1 for k, h in enumerate(sorted(hidden_ids))}
    final_edges = {tuple(sorted((relabel.get(u, u), relabel.get(v, v))))
                   for (u, v) in new_edges}
    hidden_final = sorted(relabel.values())
    nodes = list(observed_topology.node_ids) + hidden_final
    final = TopologyGraph.build(nodes, final_edges, hidden=hidden_final)
    return final, frozenset(hidden_final), notes


def _edges_of(edges: list[tuple[int, int]], n: int) -> list[tuple[int, int]]:
    out = []
    for (u, v) in edges:
        if u == n:
            out.append((u, v))
        elif v == n:
            out.append((v, u))
    return out


def reconstruct_latent(series: list[ScalarSeries],
                       config: LearnerConfig = LearnerConfig(),
                       grid: SpectralGrid | None = None) -> LatentResult:
    """Full latent pipeline from observed series (or a precomputed
    observed-block inverse PSD grid)."""
    if grid is None:
        if len(series) < 3:
            raise InputError("need at least three observed nodes")
        lengths = {s.sample_count for s in series}
        if len(lengths) != 1:
            raise InputError("series lengths differ")
        grid, t = estimate_inverse_grid(series, config)
    else:
        if grid.kind != "inverse_psd":
            raise InputError("grid must be an inverse PSD")
        t = grid.block_size

    gc = build_gc(grid, config.tau)
    topo_o, leaves, nonleaves, profiles = learn_observed_topology(
        gc, grid, config.flatness_tol, config.magnitude_floor,
        config.ratio_tol)
    final, hidden, notes = insert_hidden_nodes(topo_o, gc)
    final = TopologyGraph(
        final.node_ids, final.edges, final.labels,
        {**{n: ("leaf" if n in leaves else "nonleaf")
            for n in topo_o.node_ids},
         **{h: "nonleaf" for h in hidden}})
    diags = diagnostics_from(grid, gc, profiles, topo_o)
    return LatentResult(gc, topo_o, leaves, frozenset(nonleaves), final,
                        hidden, t, grid, diags, config, tuple(notes))
