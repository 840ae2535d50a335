"""Scalar complex time series, the block-lifting map to vector stationary
processes, cyclic period detection, and the dataset file formats.

A period-T cyclostationary scalar series becomes an ordinary vector
stationary series once consecutive length-T stretches are stacked into
blocks; every estimator downstream works on those blocks.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from math import gcd

import numpy as np

from .errors import InputError

_MAGIC = b"CYG1"


@dataclass(frozen=True)
class ScalarSeries:
    """A single node's complex-valued samples."""

    samples: np.ndarray
    node_id: int = 0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=complex)
        if arr.ndim != 1:
            raise InputError("samples must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise InputError(f"non-finite samples in node {self.node_id}")
        object.__setattr__(self, "samples", arr)

    @property
    def sample_count(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class LiftedSeries:
    """Blocked view of a scalar series: block k is
    ``[x(kT), ..., x(kT+T-1)]``; a trailing partial block is discarded."""

    blocks: np.ndarray  # shape (n_blocks, period)
    node_id: int = 0

    def __post_init__(self):
        arr = np.asarray(self.blocks, dtype=complex)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise InputError("blocks must be (n_blocks, period) with period >= 1")
        object.__setattr__(self, "blocks", arr)

    @property
    def period(self) -> int:
        return self.blocks.shape[1]

    @property
    def block_count(self) -> int:
        return self.blocks.shape[0]


def lift(x: ScalarSeries, period: int) -> LiftedSeries:
    if period < 1:
        raise InputError("period must be >= 1")
    n_blocks = x.sample_count // period
    return LiftedSeries(x.samples[: n_blocks * period].reshape(n_blocks, period),
                        node_id=x.node_id)


def unlift(x: LiftedSeries) -> ScalarSeries:
    return ScalarSeries(x.blocks.reshape(-1), node_id=x.node_id)


def lcm_periods(periods: list[int]) -> int:
    if not periods:
        raise InputError("period list is empty")
    out = 1
    for p in periods:
        if p < 1:
            raise InputError(f"invalid period {p}")
        out = out * p // gcd(out, p)
    return out


def detect_period(x: ScalarSeries, max_period: int = 16,
                  threshold: float = 10.0) -> int:
    """Estimate the cyclic period of a zero-mean series from the amplitude
    spectrum of its demeaned instantaneous power ``|x(k)|^2``.

    Bins whose amplitude exceeds ``threshold`` times the spectrum median are
    treated as cyclic lines. Each line at cycle frequency ``alpha`` (cycles
    per sample, folded into (0, 1/2]) contributes the integer nearest to
    ``1/alpha`` when the rounding error is below 1%; the result is the least
    common multiple of those contributions, 1 if no line is found.

    Amplitude modulation that leaves ``|x|`` untouched (e.g. a deterministic
    unit-modulus sign pattern) produces no line and detects as period 1:
    such a process is distributionally stationary.
    """
    n = x.sample_count
    if max_period < 1:
        raise InputError("max_period must be >= 1")
    if n < 16 * max_period:
        raise InputError(
            f"series too short for detection: {n} < 16*{max_period}")
    power = np.abs(x.samples) ** 2
    u = power - power.mean()
    amp = np.abs(np.fft.fft(u))
    half = amp[1: n // 2 + 1]          # fold: alpha and 1-alpha are aliases
    med = np.median(half)
    if med <= 0:
        return 1
    flagged = np.nonzero(half > threshold * med)[0] + 1
    periods = []
    for f in flagged:
        alpha = f / n
        q = 1.0 / alpha
        qi = int(round(q))
        if qi < 2 or qi > max_period:
            continue
        if abs(q - qi) > 0.01:
            continue
        periods.append(qi)
    if not periods:
        return 1
    t = lcm_periods(periods)
    return t if t <= max_period else 1


# ---------------------------------------------------------------------------
# dataset files: CSV (text) and CYG1 (packed binary)
# ---------------------------------------------------------------------------

def dataset_to_array(series: list[ScalarSeries]) -> np.ndarray:
    """Stack equally long series into an (n_samples, n_nodes) array,
    columns ordered by node id."""
    series = sorted(series, key=lambda s: s.node_id)
    lengths = {s.sample_count for s in series}
    if len(lengths) != 1:
        raise InputError(f"series lengths differ: {sorted(lengths)}")
    return np.column_stack([s.samples for s in series])


def write_csv(path, series: list[ScalarSeries]) -> None:
    series = sorted(series, key=lambda s: s.node_id)
    data = dataset_to_array(series)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["k"]
        for s in series:
            header += [f"node{s.node_id}_re", f"node{s.node_id}_im"]
        w.writerow(header)
        for k in range(data.shape[0]):
            row = [k]
            for j in range(data.shape[1]):
                row += [repr(float(data[k, j].real)), repr(float(data[k, j].imag))]
            w.writerow(row)


def read_csv(path) -> list[ScalarSeries]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if not header or header[0] != "k":
            raise InputError(f"{path}: not a dataset CSV (missing 'k' column)")
        ids = []
        for col in header[1::2]:
            if not (col.startswith("node") and col.endswith("_re")):
                raise InputError(f"{path}: malformed column name {col!r}")
            ids.append(int(col[4:-3]))
        rows = [row for row in r if row]
    data = np.empty((len(rows), len(ids)), dtype=complex)
    for k, row in enumerate(rows):
        vals = [float(v) for v in row[1:]]
        data[k] = np.asarray(vals[0::2]) + 1j * np.asarray(vals[1::2])
    return [ScalarSeries(data[:, j], node_id=ids[j]) for j in range(len(ids))]


def write_cyg1(path, series: list[ScalarSeries]) -> None:
    """Packed little-endian binary: magic, u32 node count, u32 sample count,
    u32 node ids, then row-major complex64 (one row per sample)."""
    series = sorted(series, key=lambda s: s.node_id)
    data = dataset_to_array(series).astype(np.complex64)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", data.shape[1], data.shape[0]))
        fh.write(struct.pack(f"<{data.shape[1]}I", *[s.node_id for s in series]))
        fh.write(np.ascontiguousarray(data).view(np.float32).astype("<f4").tobytes())


def read_cyg1(path) -> list[ScalarSeries]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise InputError(f"{path}: bad magic {magic!r}")
        m, n = struct.unpack("<II", fh.read(8))
        ids = struct.unpack(f"<{m}I", fh.read(4 * m))
        raw = np.frombuffer(fh.read(), dtype="<f4")
    if raw.size != 2 * m * n:
        raise InputError(f"{path}: truncated payload")
    data = raw.astype(np.float32).view(np.complex64).reshape(n, m)
    return [ScalarSeries(data[:, j].astype(complex), node_id=ids[j])
            for j in range(m)]


def read_dataset(path) -> list[ScalarSeries]:
    """Dispatch on content: CYG1 magic else CSV."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == _MAGIC:
        return read_cyg1(path)
    return read_csv(path)
