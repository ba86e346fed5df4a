"""High-dimensional affinities: distances, conditional rows, perplexity.

All entropies of conditional rows are measured in bits, so the local
perplexity is ``2 ** H``.  Rows are stabilised by subtracting the smallest
off-diagonal squared distance before exponentiating.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

LN2 = math.log(2.0)


@dataclass
class Dataset:
    """An ``N x D`` feature matrix plus the source index of every row."""

    features: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValidationError(f"features must be a 2-D matrix, got shape {x.shape}")
        bad = ~np.isfinite(x).all(axis=1)
        if bad.any():
            raise ValidationError(f"non-finite feature value in row {int(np.flatnonzero(bad)[0])}")
        self.features = x
        if self.ids is None:
            self.ids = np.arange(x.shape[0], dtype=np.int64)
        else:
            self.ids = np.asarray(self.ids, dtype=np.int64)
            if self.ids.shape != (x.shape[0],):
                raise ValidationError("ids must hold one entry per feature row")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    def require_pipeline_size(self):
        if self.n < 3:
            raise ValidationError(f"the pipeline needs at least 3 samples, got {self.n}")


def pairwise_sq_dists(data):
    """Dense matrix of squared Euclidean distances.

    Accepts a :class:`Dataset` or a raw 2-D array.  The Gram expansion is
    corrected by clipping at zero and forcing an exact zero diagonal and
    exact symmetry.
    """
    if not isinstance(data, Dataset):
        data = Dataset(data)
    x = data.features
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    d2 = 0.5 * (d2 + d2.T)
    np.fill_diagonal(d2, 0.0)
    # the Gram trick loses precision for near-duplicate points; redo those exactly
    close = d2 < 1e-6 * max(float(sq.max(initial=0.0)), 1e-300)
    if close.any():
        ii, jj = np.nonzero(np.triu(close, 1))
        diff = x[ii] - x[jj]
        exact = np.einsum("ij,ij->i", diff, diff)
        d2[ii, jj] = exact
        d2[jj, ii] = exact
    return d2


def sigma_bounds(d2, low=1e-3, high=1e3):
    """Default bandwidth search interval scaled by the median pairwise distance."""
    iu = np.triu_indices(d2.shape[0], 1)
    dist = np.sqrt(d2[iu])
    dist = dist[dist > 0]
    med = float(np.median(dist)) if dist.size else 1.0
    return low * med, high * med


def _check_row(d2_row, i):
    d2_row = np.asarray(d2_row, dtype=np.float64)
    n = d2_row.shape[0]
    if n < 2:
        raise ValidationError("a conditional row needs at least 2 points")
    if not 0 <= i < n:
        raise ValidationError(f"row index {i} out of range for {n} points")
    return d2_row, n


def conditional_row(d2_row, i, sigma):
    """Gaussian conditional affinities ``p_{j|i}`` of point ``i``.

    Returns a length-``N`` vector with a zero self-entry that sums to one.
    """
    d2_row, n = _check_row(d2_row, i)
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    off = np.ones(n, dtype=bool)
    off[i] = False
    shift = d2_row[off].min()
    if d2_row[off].max() == 0.0:
        warnings.warn(f"row {i}: all neighbours coincide, using a uniform row", RuntimeWarning, stacklevel=2)
    a = d2_row - shift
    a[i] = 0.0  # the self term is dropped; keep its exponent from overflowing
    w = np.exp(-a / (2.0 * sigma * sigma))
    w[i] = 0.0
    return w / w.sum()


def conditional_matrix(d2, sigma):
    """Stack :func:`conditional_row` over all rows (vectorised)."""
    d2 = np.asarray(d2, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    n = d2.shape[0]
    masked = d2.copy()
    np.fill_diagonal(masked, np.inf)
    shift = masked.min(axis=1)
    w = np.exp(-(masked - shift[:, None]) / (2.0 * sigma[:, None] ** 2))
    w[np.arange(n), np.arange(n)] = 0.0
    return w / w.sum(axis=1, keepdims=True)


def row_entropy_bits(p_row):
    p = np.asarray(p_row, dtype=np.float64)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def local_perplexity(p_row):
    """``2 ** H`` where ``H`` is the base-2 entropy of the row."""
    return float(2.0 ** row_entropy_bits(p_row))


def check_target(target, n):
    if not (1.0 < target <= n - 1):
        raise ValidationError(f"target perplexity {target} outside (1, {n - 1}]")


def perplexity_error(sigma_i, d2_row_i, i, target):
    """``|R_i(sigma) - target|``."""
    d2_row_i, n = _check_row(d2_row_i, i)
    check_target(target, n)
    return abs(local_perplexity(conditional_row(d2_row_i, i, sigma_i)) - target)


def perplexity_entropy_derivative(sigma_i, d2_row_i, i):
    """Analytic ``dH/dsigma`` of the base-2 row entropy.

    Uses the closed form
    ``-1/(sigma^3 ln 2) * sum_j p_j (d_j - D)(ln p_j + 1)`` with
    ``D = sum_k p_k d_k``; zero-probability entries contribute nothing.
    """
    d2_row_i, _ = _check_row(d2_row_i, i)
    p = conditional_row(d2_row_i, i, sigma_i)
    mask = p > 0
    mask[i] = False
    pm, dm = p[mask], d2_row_i[mask]
    dbar = float((pm * dm).sum())
    s = float((pm * (dm - dbar) * (np.log(pm) + 1.0)).sum())
    return -s / (sigma_i**3 * LN2)


def perplexity_derivative(sigma_i, d2_row_i, i):
    """``dR/dsigma = R ln 2 dH/dsigma``."""
    d2_row_i, _ = _check_row(d2_row_i, i)
    r = local_perplexity(conditional_row(d2_row_i, i, sigma_i))
    return r * LN2 * perplexity_entropy_derivative(sigma_i, d2_row_i, i)


def symmetrize(p_cond):
    """Joint affinities ``(p_{i|j} + p_{j|i}) / 2N``."""
    p = np.asarray(p_cond, dtype=np.float64)
    n = p.shape[0]
    pj = (p + p.T) / (2.0 * n)
    np.fill_diagonal(pj, 0.0)
    return pj


def certified_derivative_signs(d2_row, i, sigmas):
    """Sign of ``dH/dsigma`` at each sigma, or 0 where rounding could flip it.

    The derivative is evaluated in the closed form of
    :func:`perplexity_entropy_derivative` together with a first-order bound
    on its floating-point error; a sign is reported only when the value
    exceeds that bound.  Counting sign changes of the result therefore
    never counts rounding noise.
    """
    d2_row, n = _check_row(d2_row, i)
    sig = np.atleast_1d(np.asarray(sigmas, dtype=np.float64))
    if not (sig > 0).all():
        raise ValidationError("sigmas must be positive")
    off = np.ones(n, dtype=bool)
    off[i] = False
    d = d2_row[off]
    w = np.exp(-(d - d.min())[None, :] / (2.0 * sig[:, None] ** 2))
    p = w / w.sum(axis=1, keepdims=True)
    pos = p > 0
    lnp = np.log(np.where(pos, p, 1.0))
    dbar = (p * d).sum(axis=1, keepdims=True)
    dev = d[None, :] - dbar
    val = -np.where(pos, p * dev * (lnp + 1.0), 0.0).sum(axis=1)
    lp = np.where(pos, p * (np.abs(lnp) + 1.0), 0.0)
    # each product carries a few ulps, the mean D carries about n ulps
    eps = np.finfo(np.float64).eps
    bound = 8.0 * n * eps * ((lp * np.abs(dev)).sum(axis=1) + np.abs(dbar[:, 0]) * lp.sum(axis=1))
    out = np.where(np.abs(val) > bound, np.sign(val), 0.0)
    return out.astype(np.int64)


def sign_changes(signs):
    """Number of sign flips in a sequence, skipping zeros (uncertified points)."""
    s = np.asarray(signs)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))
