"""Blocked power spectral density estimation and its exact counterpart.

The estimator runs Welch cross-spectra over every pair of lifted component
streams and assembles per-frequency Hermitian matrices of size mT x mT. The
exact route evaluates ``(I - H)^* Phi_E^{-1} (I - H)`` from a known network,
which is the quantity the whole reconstruction rests on; the latent variant
additionally exposes the observed-block decomposition used to reason about
hidden nodes.

Phase convention: ``Phi_xy(omega) = sum_tau E[x(k+tau) y(k)^*] e^{-i omega
tau}``, so for x = h * y the cross-over-auto ratio is the filter response
``sum_n h(n) e^{-i omega n}``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .errors import InputError, NumericalError, SingularityError
from .netsim import NetworkSpec, lifted_transfer_block
from .series import LiftedSeries

log = logging.getLogger(__name__)

# Effective independent-average fraction for hann windows at 50% overlap.
_HANN_OVERLAP_EFF = 0.95
_COND_LIMIT = 1e12
_EIG_CLIP = 1e-10


@dataclass(frozen=True)
class SpectralGrid:
    """Per-frequency blocked Hermitian matrices over a node set.

    ``matrices[f]`` is the mT x mT matrix at ``frequencies[f]``; node block
    (j, i) occupies rows ``pos(j)*T:(pos(j)+1)*T`` and the matching columns,
    with ``pos`` the position of the node id in ``node_ids``. ``n_averages``
    carries the effective Welch averaging count (None for exact grids) so
    later stages can budget estimation noise.
    """

    frequencies: np.ndarray
    block_size: int
    node_ids: tuple[int, ...]
    matrices: np.ndarray
    kind: str = "psd"  # "psd" | "inverse_psd"
    n_averages: float | None = None

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        m = np.asarray(self.matrices)
        if f.ndim != 1 or f.size < 2:
            raise InputError("need at least two frequency points")
        dim = len(self.node_ids) * self.block_size
        if m.shape != (f.size, dim, dim):
            raise InputError(
                f"matrix stack shape {m.shape} inconsistent with "
                f"{len(self.node_ids)} nodes of block size {self.block_size}")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "matrices", m)

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    def _pos(self, node: int) -> int:
        try:
            return self.node_ids.index(node)
        except ValueError:
            raise InputError(f"node {node} not in grid") from None

    def block(self, j: int, i: int) -> np.ndarray:
        """The (j, i) node block as an (F, T, T) stack."""
        t = self.block_size
        a, b = self._pos(j), self._pos(i)
        return self.matrices[:, a * t:(a + 1) * t, b * t:(b + 1) * t]

    def block_norm(self, j: int, i: int) -> float:
        """Entrywise infinity norm over the block and all frequencies."""
        return float(np.abs(self.block(j, i)).max())

    def hermitian_defect(self) -> float:
        h = np.abs(self.matrices - self.matrices.conj().transpose(0, 2, 1))
        scale = max(np.abs(self.matrices).max(), 1e-300)
        return float(h.max() / scale)


def _window(name: str, length: int) -> np.ndarray:
    if name == "hann":
        # periodic (DFT-even) hann
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)
    if name == "rect":
        return np.ones(length)
    raise InputError(f"unknown window {name!r}")


def _segment_ffts(streams: np.ndarray, seg_len: int, overlap: float,
                  window: str) -> tuple[np.ndarray, float, float]:
    """FFT every windowed segment of every stream.

    streams: (n_streams, n_samples). Returns (V, norm, n_eff) where V has
    shape (n_segments, n_streams, seg_len) and ``sum_s V V^H / (n_segments *
    norm)`` is the cross-PSD estimate.
    """
    n = streams.shape[1]
    if seg_len < 2:
        raise InputError("segment length must be >= 2")
    if n < 2 * seg_len:
        raise InputError(
            f"series too short for Welch: {n} samples < 2 segments of {seg_len}")
    if not 0 <= overlap < 1:
        raise InputError("overlap must lie in [0, 1)")
    step = max(1, int(round(seg_len * (1.0 - overlap))))
    w = _window(window, seg_len)
    n_seg = (n - seg_len) // step + 1
    idx = np.arange(seg_len)[None, :] + step * np.arange(n_seg)[:, None]
    segs = streams[:, idx]                       # (n_streams, n_seg, L)
    v = np.fft.fft(segs * w[None, None, :], axis=-1)
    v = v.transpose(1, 0, 2)                     # (n_seg, n_streams, L)
    norm = float(np.sum(w * w))
    eff = n_seg if overlap == 0 else n_seg * _HANN_OVERLAP_EFF
    return v, norm, eff


def welch_cross_psd(x: np.ndarray, y: np.ndarray, segment_length: int = 256,
                    overlap: float = 0.5, window: str = "hann") -> np.ndarray:
    """Welch cross spectral density of two equally long complex streams on
    the full FFT grid. The auto case comes out real and nonnegative."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("streams must be one-dimensional and equally long")
    auto = x is y or np.array_equal(x, y)
    x = x - x.mean()
    y = x if auto else y - y.mean()
    v, norm, _ = _segment_ffts(np.stack([x, y]), segment_length, overlap, window)
    spec = (v[:, 0, :] * v[:, 1, :].conj()).mean(axis=0) / norm
    if auto:
        spec = spec.real.clip(min=0.0).astype(complex)
    return spec


def estimate_block_psd(lifted: list[LiftedSeries], segment_blocks: int = 16,
                       overlap: float = 0.5, window: str = "hann"
                       ) -> SpectralGrid:
    """Assemble the blocked PSD of all nodes from their lifted series.

    Component streams are ordered (node, phase); the result is Hermitian by
    construction since it averages outer products of segment FFT vectors.
    """
    if not lifted:
        raise InputError("no series given")
    t = lifted[0].period
    counts = {s.block_count for s in lifted}
    if len(counts) != 1:
        raise InputError(f"block counts differ: {sorted(counts)}")
    if any(s.period != t for s in lifted):
        raise InputError("all series must share the lifting period")
    lifted = sorted(lifted, key=lambda s: s.node_id)
    node_ids = tuple(s.node_id for s in lifted)
    streams = np.concatenate([s.blocks.T for s in lifted], axis=0)
    streams = streams - streams.mean(axis=1, keepdims=True)
    v, norm, eff = _segment_ffts(streams, segment_blocks, overlap, window)
    phi = np.einsum("sif,sjf->fij", v, v.conj()) / (v.shape[0] * norm)
    freqs = 2.0 * np.pi * np.arange(segment_blocks) / segment_blocks
    return SpectralGrid(freqs, t, node_ids, phi, kind="psd", n_averages=eff)


def invert_psd(grid: SpectralGrid, ridge: float = 0.0) -> SpectralGrid:
    """Per-frequency Hermitian inverse of ``Phi + ridge I``.

    Negative eigenvalues (possible at low sample counts) are clipped to a
    small positive floor before inversion. If the conditioning is still
    hopeless an automatic ridge is applied once with a warning; failure
    after that names the offending frequency.
    """
    if ridge < 0:
        raise InputError("ridge must be nonnegative")
    if grid.kind != "psd":
        raise InputError("invert_psd expects a PSD grid")
    mats = 0.5 * (grid.matrices + grid.matrices.conj().transpose(0, 2, 1))
    dim = mats.shape[1]
    out = np.empty_like(mats)
    for f in range(mats.shape[0]):
        a = mats[f]
        if ridge:
            a = a + ridge * np.eye(dim)
        vals, vecs = np.linalg.eigh(a)
        floor = _EIG_CLIP * max(vals[-1], 0.0)
        vals = np.maximum(vals, floor)
        if vals[-1] <= 0 or vals[-1] / max(vals[0], 1e-300) > _COND_LIMIT:
            auto = 1e-8 * np.trace(a).real / dim
            log.warning("invert_psd: singular at omega=%.4f, ridging by %.3e",
                        grid.frequencies[f], auto)
            vals = vals + auto
            if vals[-1] <= 0 or vals[-1] / vals[0] > _COND_LIMIT:
                raise SingularityError(
                    f"PSD matrix not invertible at omega="
                    f"{grid.frequencies[f]:.6f}")
        inv = (vecs / vals[None, :]) @ vecs.conj().T
        out[f] = 0.5 * (inv + inv.conj().T)
    return replace(grid, matrices=out, kind="inverse_psd")


# ---------------------------------------------------------------------------
# exact (oracle) spectra
# ---------------------------------------------------------------------------

def _input_block_psd(net: NetworkSpec, node: int, period: int,
                     omegas: np.ndarray) -> np.ndarray:
    """Exact lifted input PSD block of one node, (F, T, T)."""
    spec = net.input_specs[node]
    if period % spec.period != 0:
        raise InputError(
            f"node {node}: input period {spec.period} does not divide the "
            f"lifting period {period}")
    pattern = spec.modulation_at(np.arange(period))
    diag = (np.abs(pattern) ** 2) * spec.variance
    base = np.broadcast_to(np.diag(diag.astype(complex)),
                           (omegas.size, period, period)).copy()
    if spec.shaping is not None:
        g = lifted_transfer_block(spec.shaping, period, omegas)
        base = g @ base @ g.conj().transpose(0, 2, 1)
    return base


def assemble_transfer(net: NetworkSpec, period: int,
                      omegas: np.ndarray) -> np.ndarray:
    """Stacked lifted transfer matrix H(omega), shape (F, nT, nT), with zero
    diagonal blocks, over all nodes of the network in id order."""
    ids = net.node_ids
    n = len(ids)
    pos = {node: k for k, node in enumerate(ids)}
    h = np.zeros((omegas.size, n * period, n * period), dtype=complex)
    for (i, j), f in net.edge_filters.items():
        if f.is_zero:
            continue
        blk = lifted_transfer_block(f, period, omegas)
        a, b = pos[i], pos[j]
        h[:, a * period:(a + 1) * period, b * period:(b + 1) * period] = blk
    return h


def _exact_pieces(net: NetworkSpec, omegas: np.ndarray, period: int | None
                  ) -> tuple[int, np.ndarray, np.ndarray, np.ndarray]:
    t = period or net.period()
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    h = assemble_transfer(net, t, omegas)
    dim = h.shape[1]
    a = np.eye(dim)[None] - h
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[..., -1].min() < 1e-6:
        raise NumericalError(
            "ill-posed network: (I - H) nearly singular on the grid")
    phi_e = np.zeros_like(h)
    for k, node in enumerate(net.node_ids):
        phi_e[:, k * t:(k + 1) * t, k * t:(k + 1) * t] = \
            _input_block_psd(net, node, t, omegas)
    return t, omegas, a, phi_e


def exact_inverse_psd(net: NetworkSpec, omegas: np.ndarray,
                      period: int | None = None) -> SpectralGrid:
    """Exact inverse PSD ``(I-H)^* Phi_E^{-1} (I-H)`` over all nodes."""
    t, omegas, a, phi_e = _exact_pieces(net, omegas, period)
    try:
        phi_e_inv = np.linalg.inv(phi_e)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"input PSD not invertible: {exc}") from exc
    ah = a.conj().transpose(0, 2, 1)
    mats = ah @ phi_e_inv @ a
    mats = 0.5 * (mats + mats.conj().transpose(0, 2, 1))
    return SpectralGrid(omegas, t, net.node_ids, mats, kind="inverse_psd")


def exact_psd(net: NetworkSpec, omegas: np.ndarray,
              period: int | None = None) -> SpectralGrid:
    """Exact forward PSD ``(I-H)^{-1} Phi_E (I-H)^{-*}`` over all nodes."""
    t, omegas, a, phi_e = _exact_pieces(net, omegas, period)
    g = np.linalg.inv(a)
    mats = g @ phi_e @ g.conj().transpose(0, 2, 1)
    mats = 0.5 * (mats + mats.conj().transpose(0, 2, 1))
    return SpectralGrid(omegas, t, net.node_ids, mats, kind="psd")


def exact_observed_inverse_psd(net: NetworkSpec, omegas: np.ndarray,
                               period: int | None = None) -> SpectralGrid:
    """Exact inverse of the observed-node PSD block (what a learner without
    the hidden series is really estimating)."""
    full = exact_psd(net, omegas, period)
    t = full.block_size
    keep = [k for k, node in enumerate(net.node_ids) if node not in net.hidden]
    rows = np.concatenate([np.arange(k * t, (k + 1) * t) for k in keep])
    sub = full.matrices[np.ix_(np.arange(full.matrices.shape[0]), rows, rows)]
    inv = np.linalg.inv(sub)
    inv = 0.5 * (inv + inv.conj().transpose(0, 2, 1))
    return SpectralGrid(full.frequencies, t, net.observed_ids, inv,
                        kind="inverse_psd")


@dataclass(frozen=True)
class OracleComponents:
    """Exact decomposition of the observed-node inverse PSD in the presence
    of hidden nodes: ``Phi_oo^{-1} = Gamma + Delta + Sigma`` with
    ``Sigma = -Psi^* Lambda^{-1} Psi``, plus the plain partition blocks of
    the full inverse (J)."""

    observed_ids: tuple[int, ...]
    hidden_ids: tuple[int, ...]
    block_size: int
    frequencies: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    psi: np.ndarray
    j_oo: np.ndarray
    j_oh: np.ndarray
    j_ho: np.ndarray
    j_hh: np.ndarray
    phi_oo_inv: np.ndarray

    def grid(self, which: str = "phi_oo_inv") -> SpectralGrid:
        mats = getattr(self, which)
        ids = self.observed_ids if which != "lam" else self.hidden_ids
        return SpectralGrid(self.frequencies, self.block_size, ids, mats,
                            kind="inverse_psd")

    def block(self, name: str, j: int, i: int) -> np.ndarray:
        mats = getattr(self, name)
        rows = self.hidden_ids if name in ("lam", "psi") else self.observed_ids
        cols = self.hidden_ids if name == "lam" else self.observed_ids
        t = self.block_size
        a, b = rows.index(j), cols.index(i)
        return mats[:, a * t:(a + 1) * t, b * t:(b + 1) * t]


def exact_latent_components(net: NetworkSpec, omegas: np.ndarray,
                            period: int | None = None) -> OracleComponents:
    """Evaluate the observed/hidden decomposition exactly.

    Requires a nonempty hidden set and no hidden-hidden edges (guaranteed
    when hidden nodes are at least two hops apart)."""
    if not net.hidden:
        raise InputError("hidden set is empty")
    t, omegas, a, phi_e = _exact_pieces(net, omegas, period)
    ids = net.node_ids
    obs = [k for k, n in enumerate(ids) if n not in net.hidden]
    hid = [k for k, n in enumerate(ids) if n in net.hidden]
    h = np.eye(a.shape[1])[None] - a  # recover H

    def part(mat, rows, cols):
        r = np.concatenate([np.arange(k * t, (k + 1) * t) for k in rows])
        c = np.concatenate([np.arange(k * t, (k + 1) * t) for k in cols])
        return mat[np.ix_(np.arange(mat.shape[0]), r, c)]

    h_oo = part(h, obs, obs)
    h_oh = part(h, obs, hid)
    h_ho = part(h, hid, obs)
    h_hh = part(h, hid, hid)
    if np.abs(h_hh).max() > 0:
        raise InputError(
            "hidden-hidden edges present; the latent decomposition assumes "
            "hidden nodes are non-adjacent")
    phi_eo_inv = np.linalg.inv(part(phi_e, obs, obs))
    phi_eh_inv = np.linalg.inv(part(phi_e, hid, hid))

    eye_o = np.eye(h_oo.shape[1])[None]
    adj = lambda x: x.conj().transpose(0, 2, 1)
    a_oo = eye_o - h_oo
    gamma = adj(a_oo) @ phi_eo_inv @ a_oo
    delta = adj(h_ho) @ phi_eh_inv @ h_ho
    lam = adj(h_oh) @ phi_eo_inv @ h_oh + phi_eh_inv
    psi = adj(h_oh) @ phi_eo_inv @ a_oo + phi_eh_inv @ h_ho
    try:
        lam_inv = np.linalg.inv(lam)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"Lambda singular on the grid: {exc}") from exc
    sigma = -adj(psi) @ lam_inv @ psi

    j_oo = gamma + delta
    j_oh = -adj(psi)
    j_ho = -psi
    j_hh = lam
    phi_oo_inv = exact_observed_inverse_psd(net, omegas, t).matrices
    return OracleComponents(
        observed_ids=net.observed_ids,
        hidden_ids=tuple(n for n in ids if n in net.hidden),
        block_size=t, frequencies=omegas,
        gamma=gamma, delta=delta, sigma=sigma, lam=lam, psi=psi,
        j_oo=j_oo, j_oh=j_oh, j_ho=j_ho, j_hh=j_hh,
        phi_oo_inv=phi_oo_inv)


def dump_grid_csv(path, grid: SpectralGrid,
                  header_lines: Iterable[str] = ()) -> None:
    """Spectral dump: one row per (omega, node pair, block entry)."""
    t = grid.block_size
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["omega", "i", "j", "p", "t", "re", "im"])
        for f, om in enumerate(grid.frequencies):
            for i in grid.node_ids:
                for j in grid.node_ids:
                    blk = grid.block(i, j)
                    for p in range(t):
                        for tt in range(t):
                            v = blk[f, p, tt]
                            w.writerow([repr(float(om)), i, j, p, tt,
                                        repr(float(v.real)), repr(float(v.imag))])


def read_grid_csv(path) -> SpectralGrid:
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            rows.append(line.strip())
    r = csv.reader(rows)
    header = next(r)
    if header[:5] != ["omega", "i", "j", "p", "t"]:
        raise InputError(f"{path}: not a spectral dump")
    data = [(float(a), int(b), int(c), int(d), int(e), float(re), float(im))
            for a, b, c, d, e, re, im in r]
    if not data:
        raise InputError(f"{path}: empty spectral dump")
    freqs = sorted({d[0] for d in data})
    ids = tuple(sorted({d[1] for d in data}))
    t = max(d[3] for d in data) + 1
    fpos = {v: k for k, v in enumerate(freqs)}
    npos = {v: k for k, v in enumerate(ids)}
    mats = np.zeros((len(freqs), len(ids) * t, len(ids) * t), dtype=complex)
    for om, i, j, p, tt, re, im in data:
        mats[fpos[om], npos[i] * t + p, npos[j] * t + tt] = complex(re, im)
    return SpectralGrid(np.asarray(freqs), t, ids, mats, kind="inverse_psd")
