"""Undirected/directed graph containers and the combinatorial primitives used
by the topology learners: moralization, vertex separation, cut-pair tests,
hop distances, and the structural admissibility checks for latent recovery.

Node identifiers are dense positive integers. Undirected edges are stored
once as sorted pairs ``(min, max)``. All structures are value-like and never
mutated after construction.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from math import gcd, inf
from typing import Iterable, Mapping

from .errors import InputError

OBSERVED = "observed"
HIDDEN = "hidden"


def _norm_edge(a: int, b: int) -> tuple[int, int]:
    if a == b:
        raise InputError(f"self-loop on node {a} is not allowed")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class TopologyGraph:
    """Undirected graph with per-node observed/hidden labels and optional
    leaf/non-leaf role tags."""

    node_ids: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    labels: Mapping[int, str] = field(default_factory=dict)
    roles: Mapping[int, str] = field(default_factory=dict)

    @staticmethod
    def build(nodes: Iterable[int], edges: Iterable[tuple[int, int]],
              hidden: Iterable[int] = (), roles: Mapping[int, str] | None = None
              ) -> "TopologyGraph":
        node_ids = tuple(sorted(set(nodes)))
        node_set = set(node_ids)
        es = frozenset(_norm_edge(a, b) for a, b in edges)
        for a, b in es:
            if a not in node_set or b not in node_set:
                raise InputError(f"edge ({a},{b}) references unknown node")
        hidden = set(hidden)
        if not hidden <= node_set:
            raise InputError(f"hidden nodes {hidden - node_set} not in graph")
        labels = {n: (HIDDEN if n in hidden else OBSERVED) for n in node_ids}
        return TopologyGraph(node_ids, es, labels, dict(roles or {}))

    def __post_init__(self):
        for a, b in self.edges:
            if a == b:
                raise InputError(f"self-loop on node {a}")
            if a not in self.labels or b not in self.labels:
                if a not in self.node_ids or b not in self.node_ids:
                    raise InputError(f"edge ({a},{b}) references unknown node")

    @property
    def hidden_nodes(self) -> set[int]:
        return {n for n in self.node_ids if self.labels.get(n) == HIDDEN}

    @property
    def observed_nodes(self) -> set[int]:
        return {n for n in self.node_ids if self.labels.get(n) != HIDDEN}

    def has_edge(self, a: int, b: int) -> bool:
        return _norm_edge(a, b) in self.edges

    def neighbors(self, n: int) -> set[int]:
        if n not in self.labels and n not in self.node_ids:
            raise InputError(f"unknown node {n}")
        out = set()
        for a, b in self.edges:
            if a == n:
                out.add(b)
            elif b == n:
                out.add(a)
        return out

    def adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {n: set() for n in self.node_ids}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def subgraph(self, keep: Iterable[int]) -> "TopologyGraph":
        keep = set(keep)
        return TopologyGraph(
            tuple(sorted(keep)),
            frozenset(e for e in self.edges if e[0] in keep and e[1] in keep),
            {n: l for n, l in self.labels.items() if n in keep},
            {n: r for n, r in self.roles.items() if n in keep},
        )

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def to_json_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n, "label": self.labels.get(n, OBSERVED),
                 "role": self.roles.get(n, "unknown")}
                for n in self.node_ids
            ],
            "edges": [[a, b] for a, b in self.edge_list()],
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "TopologyGraph":
        nodes = [int(n["id"]) for n in doc["nodes"]]
        hidden = [int(n["id"]) for n in doc["nodes"] if n.get("label") == HIDDEN]
        roles = {int(n["id"]): n["role"] for n in doc["nodes"]
                 if n.get("role", "unknown") != "unknown"}
        return TopologyGraph.build(nodes, [tuple(e) for e in doc["edges"]],
                                   hidden=hidden, roles=roles)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    def to_dot(self, name: str = "G") -> str:
        """DOT export; hidden nodes are rendered dashed."""
        lines = [f"graph {name} {{"]
        for n in self.node_ids:
            style = ' [style=dashed]' if self.labels.get(n) == HIDDEN else ""
            lines.append(f"  {n}{style};")
        for a, b in self.edge_list():
            lines.append(f"  {a} -- {b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DirectedGenerativeGraph:
    """Directed graph of the generative model: edge (i, j) means node i is
    driven by node j (a nonzero filter from j into i), i.e. j -> i."""

    node_ids: tuple[int, ...]
    directed_edges: frozenset[tuple[int, int]]

    @staticmethod
    def build(nodes: Iterable[int], edges: Iterable[tuple[int, int]]
              ) -> "DirectedGenerativeGraph":
        node_ids = tuple(sorted(set(nodes)))
        node_set = set(node_ids)
        es = set()
        for i, j in edges:
            if i == j:
                raise InputError(f"self-loop on node {i} is not allowed")
            if i not in node_set or j not in node_set:
                raise InputError(f"edge ({i},{j}) references unknown node")
            es.add((i, j))
        return DirectedGenerativeGraph(node_ids, frozenset(es))

    def parents(self, i: int) -> set[int]:
        return {j for (a, j) in self.directed_edges if a == i}

    def children(self, j: int) -> set[int]:
        return {a for (a, i) in self.directed_edges if i == j}

    def spouses(self, j: int) -> set[int]:
        out = set()
        for k in self.children(j):
            out |= self.parents(k)
        out.discard(j)
        return out

    def is_bidirected(self) -> bool:
        return all((j, i) in self.directed_edges for (i, j) in self.directed_edges)


def topology_of(g: DirectedGenerativeGraph,
                hidden: Iterable[int] = ()) -> TopologyGraph:
    """Undirected skeleton: one edge per parent/child relation."""
    edges = {_norm_edge(i, j) for (i, j) in g.directed_edges}
    return TopologyGraph.build(g.node_ids, edges, hidden=hidden)


def moralize(g: DirectedGenerativeGraph,
             hidden: Iterable[int] = ()) -> TopologyGraph:
    """Kin topology: skeleton plus an edge between every pair of nodes that
    share a child."""
    edges = {_norm_edge(i, j) for (i, j) in g.directed_edges}
    for k in g.node_ids:
        ps = sorted(g.parents(k))
        for a in range(len(ps)):
            for b in range(a + 1, len(ps)):
                edges.add(_norm_edge(ps[a], ps[b]))
    return TopologyGraph.build(g.node_ids, edges, hidden=hidden)


def connected_components(g: TopologyGraph) -> list[set[int]]:
    """Connected components, each a node set, ordered by smallest member."""
    adj = g.adjacency()
    seen: set[int] = set()
    comps = []
    for start in g.node_ids:
        if start in seen:
            continue
        comp = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in comp:
                    comp.add(v)
                    queue.append(v)
        seen |= comp
        comps.append(comp)
    return sorted(comps, key=min)


def hop_distance(g: TopologyGraph, i: int, j: int) -> float:
    """Shortest path length between i and j; ``math.inf`` when disconnected."""
    if i not in g.node_ids or j not in g.node_ids:
        raise InputError(f"unknown node in pair ({i},{j})")
    if i == j:
        return 0
    adj = g.adjacency()
    dist = {i: 0}
    queue = deque([i])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                if v == j:
                    return dist[v]
                queue.append(v)
    return inf


def degree(g: TopologyGraph, i: int) -> int:
    return len(g.neighbors(i))


def sep(g: TopologyGraph, i: int, z: Iterable[int], j: int) -> bool:
    """True iff every path from i to j passes through the separator set z."""
    z = set(z)
    nodes = set(g.node_ids)
    if i == j:
        raise InputError("separation endpoints must differ")
    for n in (i, j, *z):
        if n not in nodes:
            raise InputError(f"unknown node {n}")
    if i in z or j in z:
        raise InputError("endpoints may not be members of the separator")
    adj = g.adjacency()
    seen = {i}
    queue = deque([i])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v in z or v in seen:
                continue
            if v == j:
                return False
            seen.add(v)
            queue.append(v)
    return True


def is_cut_pair(g: TopologyGraph, a: int, b: int) -> bool:
    """True iff removing {a, b} leaves the remaining nodes in two or more
    connected components, i.e. nonempty I, J exist with sep(I, {a,b}, J)."""
    if not g.has_edge(a, b):
        raise InputError(f"({a},{b}) is not an edge")
    rest = [n for n in g.node_ids if n not in (a, b)]
    if len(rest) < 2:
        return False
    return len(connected_components(g.subgraph(rest))) >= 2


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the five structural admissibility checks. ``violations``
    maps an assumption index to the offending node pairs/ids."""

    passed: dict[int, bool]
    violations: dict[int, list]

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def summary(self) -> str:
        lines = []
        for k in sorted(self.passed):
            status = "pass" if self.passed[k] else f"FAIL {self.violations[k]}"
            lines.append(f"assumption {k}: {status}")
        return "\n".join(lines)


def lcm_of(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = out * v // gcd(out, v)
    return out


def check_assumptions(g: DirectedGenerativeGraph, hidden: Iterable[int],
                      periods: Mapping[int, int]) -> AssumptionReport:
    """Check the five structural conditions the latent learner relies on.

    1. any two nodes share at most one common child;
    2. every directed edge is reciprocated (bidirected dynamics);
    3. each hidden node's input period divides the observed-lcm period;
    4. hidden nodes are pairwise >= 4 hops apart in the topology;
    5. the topology is radial (a tree per component) and every hidden node
       is >= 3 hops from every leaf.
    """
    hidden = set(hidden)
    topo = topology_of(g, hidden=hidden)
    passed: dict[int, bool] = {}
    viol: dict[int, list] = {k: [] for k in range(1, 6)}

    nodes = list(g.node_ids)
    for x in range(len(nodes)):
        for y in range(x + 1, len(nodes)):
            i, j = nodes[x], nodes[y]
            common = g.children(i) & g.children(j)
            if len(common) > 1:
                viol[1].append((i, j, sorted(common)))
    passed[1] = not viol[1]

    for (i, j) in sorted(g.directed_edges):
        if (j, i) not in g.directed_edges:
            viol[2].append((i, j))
    passed[2] = not viol[2]

    observed = [n for n in g.node_ids if n not in hidden]
    t_obs = lcm_of(periods.get(n, 1) for n in observed) if observed else 1
    for h in sorted(hidden):
        th = periods.get(h, 1)
        if t_obs % th != 0:
            viol[3].append((h, th, t_obs))
    passed[3] = not viol[3]

    hs = sorted(hidden)
    for x in range(len(hs)):
        for y in range(x + 1, len(hs)):
            d = hop_distance(topo, hs[x], hs[y])
            if d < 4:
                viol[4].append((hs[x], hs[y], d))
    passed[4] = not viol[4]

    n_edges = len(topo.edges)
    n_nodes = len(topo.node_ids)
    n_comps = len(connected_components(topo))
    is_forest = n_edges == n_nodes - n_comps
    if not is_forest:
        viol[5].append("cycle present")
    leaves = [n for n in topo.node_ids if degree(topo, n) == 1]
    for h in sorted(hidden):
        for l in leaves:
            d = hop_distance(topo, h, l)
            if d < 3:
                viol[5].append((h, l, d))
    passed[5] = not viol[5]

    return AssumptionReport(passed, {k: v for k, v in viol.items() if v})
