"""Brain graph construction from ROI time series."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from tga.errors import ConstantSignalError, DataError, DimensionError

DEGREE_FLOOR = 1e-12


@dataclass
class TimeSeries:
    """A ``T x N`` signal matrix for one subject (T time points, N ROIs)."""

    subject_id: str
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise DimensionError(f"time series for {self.subject_id!r} must be 2-D, got {self.data.shape}")
        if self.data.shape[0] < 2:
            raise DataError(f"time series for {self.subject_id!r} needs at least 2 time points")
        if not np.all(np.isfinite(self.data)):
            raise DataError(f"time series for {self.subject_id!r} has non-finite entries")

    @property
    def n_rois(self) -> int:
        return self.data.shape[1]


@dataclass
class BrainGraph:
    adjacency: np.ndarray
    features: np.ndarray
    degrees: np.ndarray
    subject_id: str = ""
    _mp: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def mp_matrix(self) -> np.ndarray:
        """Normalized message-passing matrix of the full graph (cached)."""
        if self._mp is None:
            self._mp = normalize_adjacency(self.adjacency)
        return self._mp


def pearson_matrix(ts: TimeSeries | np.ndarray) -> np.ndarray:
    """Pairwise Pearson correlation of the columns of a ``T x N`` matrix.

    Raises:
        ConstantSignalError: if a column has zero variance.
    """
    data = ts.data if isinstance(ts, TimeSeries) else np.asarray(ts, dtype=np.float64)
    centered = data - data.mean(axis=0)
    std = np.sqrt(np.mean(centered**2, axis=0))
    for j in np.flatnonzero(std == 0.0):
        raise ConstantSignalError(int(j))
    z = centered / std
    corr = (z.T @ z) / data.shape[0]
    corr = 0.5 * (corr + corr.T)
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return corr


def weighted_degree(a: np.ndarray) -> np.ndarray:
    """Node strength: sum of absolute off-diagonal weights per row."""
    a = np.abs(np.asarray(a, dtype=np.float64))
    return a.sum(axis=1) - np.diag(a)


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization ``D^-1/2 |A| D^-1/2``.

    Degrees are row sums of ``|A|`` including the diagonal, floored at 1e-12
    so isolated rows come out as zeros instead of NaN.
    """
    abs_a = np.abs(np.asarray(a, dtype=np.float64))
    deg = np.maximum(abs_a.sum(axis=1), DEGREE_FLOOR)
    inv_sqrt = 1.0 / np.sqrt(deg)
    return inv_sqrt[:, None] * abs_a * inv_sqrt[None, :]


def build_graph(ts: TimeSeries) -> BrainGraph:
    adjacency = pearson_matrix(ts)
    return BrainGraph(
        adjacency=adjacency,
        features=adjacency,
        degrees=weighted_degree(adjacency),
        subject_id=ts.subject_id,
    )


def read_series_csv(path: str | Path, subject_id: str | None = None) -> TimeSeries:
    """Load a comma-separated ``T x N`` series, skipping one header row if the
    first row does not parse as numbers."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if rows:
        try:
            [float(x) for x in rows[0]]
        except ValueError:
            rows = rows[1:]
    try:
        data = np.array([[float(x) for x in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.size == 0:
        raise DataError(f"{path}: ragged or empty table")
    return TimeSeries(subject_id=subject_id or path.stem, data=data)


def write_series_csv(ts: TimeSeries, path: str | Path) -> None:
    # repr-precision floats so a reload is bit-exact
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in ts.data:
            writer.writerow([repr(float(x)) for x in row])
