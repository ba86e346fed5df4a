"""Grid occupancy of a 2-D embedding and its Shannon entropy (nats)."""

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import ValidationError

INFLATE = 1e-9
DEFAULT_ALPHA = 0.8


@dataclass(frozen=True)
class GridSpec:
    g: int
    base: tuple[float, float]
    cell_size: tuple[float, float]

    def __post_init__(self):
        if self.g < 2:
            raise ValidationError(f"grid needs g >= 2, got {self.g}")
        if not (self.cell_size[0] > 0 and self.cell_size[1] > 0):
            raise ValidationError("cell sizes must be positive")


@dataclass
class GridHistogram:
    spec: GridSpec
    counts: np.ndarray
    cells: np.ndarray  # (N, 2) row/col of every point

    @property
    def total(self):
        return int(self.counts.sum())


def auto_g(m):
    """Cells per axis so that the grid has at least ``m`` cells."""
    return max(2, math.ceil(math.sqrt(m)))


def fit_grid(coords, g):
    """Bounding-box grid whose top edges are nudged so the maxima land inside."""
    y = np.asarray(coords, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != 2 or y.shape[0] < 1:
        raise ValidationError("coords must be an (N, 2) array with N >= 1")
    if not np.isfinite(y).all():
        raise ValidationError("coords must be finite")
    lo = y.min(axis=0)
    span = y.max(axis=0) - lo
    cs = []
    for r in span:
        cs.append(float(r * (1.0 + INFLATE) / g) if r > 0 else 1.0)
    return GridSpec(int(g), (float(lo[0]), float(lo[1])), (cs[0], cs[1]))


def _counts_numpy(y, spec):
    idx = np.floor((y - np.asarray(spec.base)) / np.asarray(spec.cell_size)).astype(np.int64)
    np.clip(idx, 0, spec.g - 1, out=idx)
    counts = np.bincount(idx[:, 0] * spec.g + idx[:, 1], minlength=spec.g * spec.g).reshape(spec.g, spec.g)
    return counts.astype(np.int64), idx


def histogram(coords, spec):
    """Count points per cell; cell = floor((y - base) / cell_size) clamped to the grid."""
    y = np.ascontiguousarray(coords, dtype=np.float64)
    base = np.asarray(spec.base)
    cs = np.asarray(spec.cell_size)
    rel = (y - base) / cs
    # beyond the clamping slack the grid was not fitted on these points
    slack = 1e-6 * spec.g
    if (rel < -slack).any() or (rel > spec.g * (1.0 + 1e-6) + slack).any():
        k = int(np.flatnonzero(((rel < -slack) | (rel > spec.g * (1.0 + 1e-6) + slack)).any(axis=1))[0])
        raise ValidationError(f"point {k} at {tuple(y[k])} lies outside the grid")
    if _accel.use_numba():
        from ._kernels import grid_counts

        counts, cells = grid_counts(y, spec.base[0], spec.base[1], spec.cell_size[0], spec.cell_size[1], spec.g)
    else:
        counts, cells = _counts_numpy(y, spec)
    return GridHistogram(spec, counts, cells)


def grid_entropy(h):
    counts = np.asarray(h.counts if isinstance(h, GridHistogram) else h, dtype=np.float64).ravel()
    total = counts.sum()
    if total < 1:
        raise ValidationError("empty histogram")
    p = counts[counts > 0] / total
    return float(max(0.0, -(p * np.log(p)).sum()))


def max_entropy(g):
    return math.log(g * g)


def entropy_threshold(h_baseline, g, alpha=DEFAULT_ALPHA):
    """``(H_max - H_b) * alpha + H_b`` with ``H_max = ln(g^2)``."""
    if not 0 <= alpha <= 1:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
    h_max = max_entropy(g)
    if h_baseline > h_max + 1e-12:
        raise ValidationError(f"baseline entropy {h_baseline} exceeds ln(g^2) = {h_max}")
    # convex-combination form so alpha = 0 and alpha = 1 hit the endpoints exactly
    return alpha * h_max + (1.0 - alpha) * h_baseline
