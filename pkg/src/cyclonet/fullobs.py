"""Full-observability topology reconstruction.

Pipeline: detect per-node periods, lift, estimate the blocked inverse PSD,
build the kin (moral) graph from block norms, then delete every edge whose
inverse-PSD block has frequency-flat eigenvalue phases. Flat phases are the
signature of a strict-spouse pair: its block is a frequency-independent
complex scalar times a Hermitian positive-semidefinite matrix, so all
eigenvalue phases collapse onto one constant.

On estimated spectra the raw phase spread never reaches zero, so the
spurious decision also accepts profiles whose spread is explained by the
estimation noise budget: flat if ``flatness < max(flatness_tol, ratio_tol *
noise_floor)`` where the floor is predicted from the Welch averaging count.
Exact grids carry no averaging count, the floor is zero, and the rule
reduces to the plain threshold.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .errors import InputError
from .graphs import TopologyGraph
from .series import ScalarSeries, detect_period, lcm_periods, lift
from .spectral import SpectralGrid, estimate_block_psd, invert_psd

DEFAULT_RHO = 0.03
DEFAULT_FLATNESS_TOL = 0.1
DEFAULT_MAGNITUDE_FLOOR = 0.05
DEFAULT_RATIO_TOL = 3.0
DEFAULT_SEGMENT_BLOCKS = 16
ORACLE_TOL = 1e-6


@dataclass(frozen=True)
class LearnerConfig:
    """Shared knobs for the estimation-based learners."""

    period: int | None = None          # None: detect per node and take lcm
    max_period: int = 16
    detect_threshold: float = 10.0
    segment_blocks: int = DEFAULT_SEGMENT_BLOCKS
    overlap: float = 0.5
    window: str = "hann"
    ridge: float = 0.0
    rho: float = DEFAULT_RHO
    tau: float = DEFAULT_RHO
    flatness_tol: float = DEFAULT_FLATNESS_TOL
    magnitude_floor: float = DEFAULT_MAGNITUDE_FLOOR
    ratio_tol: float = DEFAULT_RATIO_TOL

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PhaseProfile:
    """Pooled eigenvalue-phase summary of one inverse-PSD block."""

    edge: tuple[int, int]
    eigenvalues: np.ndarray          # (F, T)
    flatness: float                  # weighted circular std, radians
    mean_phase: float
    noise_floor: float               # predicted flatness of a flat profile
    pooled_count: int

    @property
    def ratio(self) -> float:
        if self.noise_floor == 0.0:
            return float("inf") if self.flatness > 0 else 0.0
        return self.flatness / self.noise_floor

    def is_flat(self, flatness_tol: float, ratio_tol: float) -> bool:
        return self.flatness < max(flatness_tol, ratio_tol * self.noise_floor)


def _weighted_circular_stats(lam: np.ndarray, weights: np.ndarray
                             ) -> tuple[float, float]:
    z = (weights * lam / np.abs(lam)).sum() / weights.sum()
    r = min(abs(z), 1.0)
    std = float(np.sqrt(max(0.0, -2.0 * np.log(r)))) if r > 0 else float("inf")
    return std, float(np.angle(z))


def phase_profile(grid: SpectralGrid, edge: tuple[int, int],
                  magnitude_floor: float = DEFAULT_MAGNITUDE_FLOOR
                  ) -> PhaseProfile:
    """Eigenvalues of the edge block at every grid frequency, pooled into a
    magnitude-weighted circular phase-spread statistic.

    Eigenvalues below ``magnitude_floor`` times the profile peak are left
    out of the pool; a fully degenerate profile (everything at zero) raises
    a warning and reports zero flatness so the edge reads as spurious.
    """
    if grid.kind != "inverse_psd":
        raise InputError("phase profiles are computed on an inverse PSD grid")
    j, i = edge
    blk = grid.block(j, i)
    lam = np.linalg.eigvals(blk)               # (F, T)
    mag = np.abs(lam)
    peak = mag.max()
    if peak == 0.0:
        warnings.warn(f"degenerate phase profile on edge {edge}; "
                      f"treating as spurious")
        return PhaseProfile(edge, lam, 0.0, 0.0, 0.0, 0)
    keep = mag >= magnitude_floor * peak
    lam_k = lam[keep]
    w = mag[keep]
    flat, mean = _weighted_circular_stats(lam_k, w)

    floor = 0.0
    if grid.n_averages:
        t = grid.block_size
        pj, pi = grid._pos(j), grid._pos(i)
        dj = grid.matrices[:, pj * t:(pj + 1) * t, pj * t:(pj + 1) * t] \
            .diagonal(axis1=1, axis2=2).real.mean(axis=1)
        di = grid.matrices[:, pi * t:(pi + 1) * t, pi * t:(pi + 1) * t] \
            .diagonal(axis1=1, axis2=2).real.mean(axis=1)
        sig = np.sqrt(dj * di / grid.n_averages)       # per-entry noise, (F,)
        sig2 = np.broadcast_to(sig[:, None], mag.shape)[keep] ** 2
        phase_var = np.minimum(sig2 / np.maximum(w, 1e-300) ** 2, 2.0)
        floor = float(np.sqrt((w * phase_var).sum() / w.sum()))
    return PhaseProfile(edge, lam, flat, mean, floor, int(keep.sum()))


def moral_graph(grid: SpectralGrid, rho: float = DEFAULT_RHO) -> TopologyGraph:
    """Edge (l, p) wherever the inverse-PSD block norm clears the threshold."""
    if rho <= 0:
        raise InputError("rho must be positive")
    if grid.kind != "inverse_psd":
        raise InputError("moral_graph expects an inverse PSD grid")
    edges = []
    ids = grid.node_ids
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            if grid.block_norm(ids[b], ids[a]) > rho:
                edges.append((ids[a], ids[b]))
    return TopologyGraph.build(ids, edges)


def prune_spurious(moral: TopologyGraph, grid: SpectralGrid,
                   flatness_tol: float = DEFAULT_FLATNESS_TOL,
                   magnitude_floor: float = DEFAULT_MAGNITUDE_FLOOR,
                   ratio_tol: float = DEFAULT_RATIO_TOL
                   ) -> tuple[TopologyGraph, list[PhaseProfile]]:
    """Remove every moral edge whose phase profile is flat."""
    profiles = []
    keep = []
    for (a, b) in moral.edge_list():
        prof = phase_profile(grid, (b, a), magnitude_floor)
        profiles.append(prof)
        if not prof.is_flat(flatness_tol, ratio_tol):
            keep.append((a, b))
    topo = TopologyGraph.build(moral.node_ids, keep)
    return topo, profiles


@dataclass(frozen=True)
class EdgeDiagnostic:
    j: int
    i: int
    block_norm: float
    flatness: float
    mean_phase: float
    noise_floor: float
    decision: str  # "true" | "spurious" | "absent"


@dataclass(frozen=True)
class TopologyResult:
    topology: TopologyGraph
    moral: TopologyGraph
    period: int
    grid: SpectralGrid
    diagnostics: list[EdgeDiagnostic]
    config: LearnerConfig


def lift_all(series: list[ScalarSeries], config: LearnerConfig
             ) -> tuple[list, int]:
    """Pick the lifting period (detected or overridden) and lift everything."""
    if config.period is not None:
        if config.period < 1:
            raise InputError("period override must be >= 1")
        t = config.period
    else:
        periods = [detect_period(s, config.max_period, config.detect_threshold)
                   for s in series]
        t = lcm_periods(periods)
    return [lift(s, t) for s in series], t


def estimate_inverse_grid(series: list[ScalarSeries], config: LearnerConfig
                          ) -> tuple[SpectralGrid, int]:
    lifted, t = lift_all(series, config)
    phi = estimate_block_psd(lifted, config.segment_blocks, config.overlap,
                             config.window)
    return invert_psd(phi, config.ridge), t


def diagnostics_from(grid: SpectralGrid, moral: TopologyGraph,
                     profiles: list[PhaseProfile], topology: TopologyGraph
                     ) -> list[EdgeDiagnostic]:
    by_edge = {tuple(sorted(p.edge)): p for p in profiles}
    out = []
    ids = grid.node_ids
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            i, j = ids[a], ids[b]
            norm = grid.block_norm(j, i)
            prof = by_edge.get((i, j))
            if prof is None:
                out.append(EdgeDiagnostic(j, i, norm, float("nan"),
                                          float("nan"), float("nan"), "absent"))
            else:
                decision = "true" if topology.has_edge(i, j) else "spurious"
                out.append(EdgeDiagnostic(j, i, norm, prof.flatness,
                                          prof.mean_phase, prof.noise_floor,
                                          decision))
    return out


def reconstruct_topology(series: list[ScalarSeries],
                         config: LearnerConfig = LearnerConfig(),
                         grid: SpectralGrid | None = None) -> TopologyResult:
    """Run the whole full-observability pipeline on nodal series.

    A precomputed inverse-PSD ``grid`` (e.g. an exact one) bypasses the
    estimation stage; series are then only used for node identities.
    """
    if grid is None:
        if len(series) < 2:
            raise InputError("need at least two nodes")
        lengths = {s.sample_count for s in series}
        if len(lengths) != 1:
            raise InputError("series lengths differ")
        grid, t = estimate_inverse_grid(series, config)
    else:
        if grid.kind != "inverse_psd":
            raise InputError("grid must be an inverse PSD")
        t = grid.block_size
    moral = moral_graph(grid, config.rho)
    topo, profiles = prune_spurious(moral, grid, config.flatness_tol,
                                    config.magnitude_floor, config.ratio_tol)
    diags = diagnostics_from(grid, moral, profiles, topo)
    return TopologyResult(topo, moral, t, grid, diags, config)


def write_diagnostics_csv(path, diags: list[EdgeDiagnostic],
                          header_lines: Iterable[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["j", "i", "block_norm", "flatness", "mean_phase",
                    "noise_floor", "decision"])
        for d in diags:
            w.writerow([d.j, d.i, repr(d.block_norm), repr(d.flatness),
                        repr(d.mean_phase), repr(d.noise_floor), d.decision])
