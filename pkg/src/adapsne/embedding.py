"""2-D t-SNE embedding by momentum gradient descent on KL(P || Q)."""

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import NumericalError, ValidationError


@dataclass
class EmbedConfig:
    iterations: int = 500
    learning_rate: float | None = None  # None -> 200 / sqrt(N)
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    exaggeration_factor: float = 4.0
    exaggeration_iters: int = 50
    init: str = "seeded-gaussian"
    init_std: float = 1e-4
    seed: int = 0
    recenter: bool = True

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError("iterations must be positive")
        if self.learning_rate is not None and not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        for name in ("momentum_early", "momentum_late"):
            if not 0 <= getattr(self, name) < 1:
                raise ValidationError(f"{name} must lie in [0, 1)")
        if self.exaggeration_factor < 1:
            raise ValidationError("exaggeration_factor must be >= 1")
        if not 0 <= self.exaggeration_iters < self.iterations:
            raise ValidationError("exaggeration_iters must be in [0, iterations)")
        if self.init not in ("seeded-gaussian", "provided"):
            raise ValidationError(f"unknown init {self.init!r}")

    def rate(self, n):
        return self.learning_rate if self.learning_rate is not None else 200.0 / np.sqrt(n)


@dataclass
class Embedding:
    coords: np.ndarray
    iteration: int = 0
    kl_trace: list = field(default_factory=list)

    @property
    def final_kl(self):
        return self.kl_trace[-1][1] if self.kl_trace else float("nan")


def _sq_dists_2d(y):
    diff = y[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def student_t_affinities(coords):
    """Student-t (one degree of freedom) joint affinities and their normaliser."""
    y = np.asarray(coords, dtype=np.float64)
    w = 1.0 / (1.0 + _sq_dists_2d(y))
    np.fill_diagonal(w, 0.0)
    z = w.sum()
    return w / z, float(z)


def kl_divergence(p, q):
    """``sum p_ij ln(p_ij / q_ij)`` over pairs with ``p_ij > 0``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    np.fill_diagonal(mask, False)
    if (q[mask] <= 0).any():
        raise ValidationError("q vanishes where p is positive")
    pm = p[mask]
    return float(max(0.0, (pm * np.log(pm / q[mask])).sum()))


def _grad_numpy(p, y):
    w = 1.0 / (1.0 + _sq_dists_2d(y))
    np.fill_diagonal(w, 0.0)
    z = w.sum()
    m = (p - w / z) * w
    return 4.0 * (m.sum(axis=1)[:, None] * y - m @ y), z


def kl_gradient(p, coords):
    """Exact gradient of ``kl_divergence(p, student_t_affinities(coords))``."""
    p = np.asarray(p, dtype=np.float64)
    y = np.ascontiguousarray(coords, dtype=np.float64)
    if _accel.use_numba():
        from ._kernels import tsne_grad

        return tsne_grad(p, y)[0]
    return _grad_numpy(p, y)[0]


def initial_coords(n, config):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
    return config.init_std * rng.standard_normal((n, 2))


def embed(p, config=None, init=None):
    """Minimise KL(P || Q) from a seeded Gaussian start (or ``init``).

    P is multiplied by ``exaggeration_factor`` for the first
    ``exaggeration_iters`` iterations; the momentum switches from early to
    late at the same point.  ``kl_trace`` holds ``(iteration, KL)`` against
    the unexaggerated P every 10 iterations and at the end.
    """
    config = config or EmbedConfig()
    p = np.asarray(p, dtype=np.float64)
    n = p.shape[0]
    if config.init == "provided" or init is not None:
        if init is None:
            raise ValidationError("init='provided' needs initial coordinates")
        y = np.array(init, dtype=np.float64)
        if y.shape != (n, 2):
            raise ValidationError(f"initial coordinates must have shape ({n}, 2)")
    else:
        y = initial_coords(n, config)
    if config.recenter:
        y -= y.mean(axis=0)

    if _accel.use_numba():
        from ._kernels import tsne_grad as grad_fn
        from ._kernels import tsne_kl

        pos = p[p > 0]
        plogp = float((pos * np.log(pos)).sum())

        def kl_at(y):
            return max(0.0, float(tsne_kl(p, y, plogp)))
    else:
        grad_fn = _grad_numpy

        def kl_at(y):
            return kl_divergence(p, student_t_affinities(y)[0])

    lr = config.rate(n)
    update = np.zeros_like(y)
    trace = []
    p_ex = p * config.exaggeration_factor

    def record(it):
        trace.append((it, kl_at(y)))

    record(0)
    for it in range(config.iterations):
        early = it < config.exaggeration_iters
        mom = config.momentum_early if early else config.momentum_late
        g, _ = grad_fn(p_ex if early else p, y)
        update = mom * update - lr * g
        y = y + update
        if config.recenter:
            y -= y.mean(axis=0)
        if not np.isfinite(y).all():
            raise NumericalError(f"non-finite coordinates at iteration {it + 1}; lower the learning rate")
        if (it + 1) % 10 == 0 or it + 1 == config.iterations:
            record(it + 1)
    return Embedding(coords=y, iteration=config.iterations, kl_trace=trace)
