"""Graph-versus-truth scoring.

Hidden nodes recovered by a learner carry arbitrary fresh ids, so scoring
first searches the (small) space of injections between estimated and true
hidden nodes for the one maximizing edge agreement, then computes set
metrics under that correspondence.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

from .errors import InputError
from .graphs import TopologyGraph

_MAX_HIDDEN_FOR_MATCHING = 7


@dataclass(frozen=True)
class EvalMetrics:
    edge_precision: float
    edge_recall: float
    edge_f1: float
    exact_match: bool
    hidden_count_match: bool
    hidden_placement_match: bool

    def to_dict(self) -> dict:
        return {
            "edge_precision": self.edge_precision,
            "edge_recall": self.edge_recall,
            "edge_f1": self.edge_f1,
            "exact_match": self.exact_match,
            "hidden_count_match": self.hidden_count_match,
            "hidden_placement_match": self.hidden_placement_match,
        }


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _scores(est_edges: set, true_edges: set) -> tuple[float, float, float]:
    tp = len(est_edges & true_edges)
    precision = tp / len(est_edges) if est_edges else (1.0 if not true_edges else 0.0)
    recall = tp / len(true_edges) if true_edges else 1.0
    return precision, recall, _f1(precision, recall)


def _relabeled(edges, mapping) -> set:
    return {tuple(sorted((mapping.get(a, a), mapping.get(b, b))))
            for (a, b) in edges}


def evaluate_topology(estimated: TopologyGraph, truth: TopologyGraph
                      ) -> EvalMetrics:
    """Score an estimated topology against the truth, treating hidden-node
    labels as free. Observed node ids must agree between the two graphs."""
    est_hidden = sorted(estimated.hidden_nodes)
    true_hidden = sorted(truth.hidden_nodes)
    if estimated.observed_nodes != truth.observed_nodes:
        raise InputError(
            "observed node sets differ; metrics are only defined over a "
            "common observed universe")
    if max(len(est_hidden), len(true_hidden)) > _MAX_HIDDEN_FOR_MATCHING:
        raise InputError("too many hidden nodes for exhaustive matching")

    best = None
    if len(est_hidden) <= len(true_hidden):
        small, large, est_small = est_hidden, true_hidden, True
    else:
        small, large, est_small = true_hidden, est_hidden, False
    for image in permutations(large, len(small)):
        mapping = dict(zip(small, image))
        if est_small:
            est_edges = _relabeled(estimated.edges, mapping)
            true_edges = set(truth.edges)
        else:
            est_edges = set(estimated.edges)
            true_edges = _relabeled(truth.edges, mapping)
        p, r, f1 = _scores(est_edges, true_edges)
        cand = (f1, p, r, est_edges, true_edges)
        if best is None or cand[:3] > best[:3]:
            best = cand
    f1, precision, recall, est_edges, true_edges = (
        best[0], best[1], best[2], best[3], best[4])
    hidden_count = len(est_hidden) == len(true_hidden)
    placement = hidden_count and est_edges == true_edges
    return EvalMetrics(precision, recall, f1, placement,
                       hidden_count, placement)
