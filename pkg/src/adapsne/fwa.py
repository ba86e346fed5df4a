"""Fireworks search for per-point Gaussian bandwidths.

The optimiser is scalar: one search per data point, each minimising
``|R_i(sigma) - target|`` over ``[sigma_lo, sigma_hi]``.  A generation is
explode -> mutate -> select, with fixed-capacity spark and mutant pools.

Random numbers
--------------
Every search consumes a fixed-length block of uniforms drawn up front from
numpy's PCG64 generator (see :func:`fwa_draws`), laid out as::

    [n_fireworks init draws in [0, 1)]
    then per generation: [n_sparks_total spark biases][n_mutants mutation draws]

with biases and mutation draws mapped to ``[-1, 1)``.  Row ``i`` of
:func:`solve_all_bandwidths` seeds its block with
``SeedSequence(seed, spawn_key=(i,))``, so rows are independent streams and
results do not depend on evaluation order or thread count.  Both the numpy
and numba backends consume the same block.
"""

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import _accel
from .affinity import check_target, sigma_bounds
from .errors import NumericalError, ValidationError

XI = 1e-12


@dataclass
class FwaConfig:
    n_fireworks: int = 8
    n_sparks_total: int = 40
    amplitude_max: float | None = None
    n_mutants: int | None = None
    generations: int = 30
    bounds: tuple[float, float] | None = None
    seed: int = 0
    mutation: str = "symmetric"
    # floor on spark amplitude as a fraction of amplitude_max, decaying
    # geometrically from the first value to the second over the generations
    min_amplitude: tuple[float, float] | None = (1e-1, 1e-6)
    # coordinates used by solve_all_bandwidths: "log" searches ln(sigma)
    search_space: str = "log"

    def __post_init__(self):
        if self.n_mutants is None:
            self.n_mutants = self.n_fireworks
        if self.n_fireworks < 2:
            raise ValidationError("n_fireworks must be >= 2")
        if self.n_sparks_total < self.n_fireworks:
            raise ValidationError("n_sparks_total must be >= n_fireworks")
        if self.generations < 1:
            raise ValidationError("generations must be >= 1")
        if self.n_mutants < 1:
            raise ValidationError("n_mutants must be >= 1")
        if self.mutation not in ("symmetric", "literal"):
            raise ValidationError(f"mutation must be 'symmetric' or 'literal', got {self.mutation!r}")
        if self.search_space not in ("log", "linear"):
            raise ValidationError(f"search_space must be 'log' or 'linear', got {self.search_space!r}")
        if self.min_amplitude is not None:
            a, b = self.min_amplitude
            if not (a > 0 and b > 0):
                raise ValidationError("min_amplitude fractions must be positive")
            self.min_amplitude = (float(a), float(b))
        if self.amplitude_max is not None and not self.amplitude_max > 0:
            raise ValidationError("amplitude_max must be positive")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not lo < hi:
                raise ValidationError(f"bounds must satisfy lo < hi, got {self.bounds}")
            self.bounds = (float(lo), float(hi))

    def with_bounds(self, bounds):
        cfg = FwaConfig(**{**self.__dict__, "bounds": tuple(bounds)})
        return cfg

    @property
    def amplitude(self):
        if self.amplitude_max is not None:
            return float(self.amplitude_max)
        lo, hi = self.bounds
        return (hi - lo) / 4.0

    @property
    def evaluations(self):
        """Exact number of objective evaluations one search performs."""
        return self.n_fireworks + self.generations * (self.n_sparks_total + self.n_mutants)


class ObjectiveHandle:
    """Counts evaluations of a scalar objective.

    ``fn`` maps one sigma to a fitness.  ``batch_fn``, when given, maps an
    array of sigmas to an array of fitnesses and is used for whole pools.
    """

    def __init__(self, fn: Callable[[float], float], batch_fn=None):
        self.fn = fn
        self.batch_fn = batch_fn
        self.count = 0

    def __call__(self, sigma):
        self.count += 1
        return float(self.fn(float(sigma)))

    def evaluate(self, sigmas):
        sigmas = np.asarray(sigmas, dtype=np.float64)
        self.count += sigmas.size
        if self.batch_fn is not None:
            out = np.asarray(self.batch_fn(sigmas), dtype=np.float64)
        else:
            out = np.array([float(self.fn(float(s))) for s in sigmas])
        bad = np.isnan(out)
        if bad.any():
            raise NumericalError(f"objective returned NaN at sigma={sigmas[np.flatnonzero(bad)[0]]!r}")
        return out


@dataclass
class FwaPopulation:
    """Fireworks plus the fixed-capacity spark (SPK), elite (POP) and mutant (MUT) pools."""

    fireworks: np.ndarray
    fitness: np.ndarray
    sparks: np.ndarray
    spark_fitness: np.ndarray
    spark_owner: np.ndarray
    elites: np.ndarray
    elite_fitness: np.ndarray
    mutants: np.ndarray
    mutant_fitness: np.ndarray
    best: tuple[float, float] = (np.nan, np.inf)
    n_sparks: int = 0
    n_mutants: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def empty(cls, config):
        n, m, k = config.n_fireworks, config.n_sparks_total, config.n_mutants
        return cls(
            fireworks=np.zeros(n), fitness=np.full(n, np.inf),
            sparks=np.zeros(m), spark_fitness=np.full(m, np.inf), spark_owner=np.zeros(m, dtype=np.int64),
            elites=np.zeros(n), elite_fitness=np.full(n, np.inf),
            mutants=np.zeros(k), mutant_fitness=np.full(k, np.inf),
        )


class FwaResult(NamedTuple):
    sigma: float
    fitness: float
    evaluations: int


def fwa_draws(config, row=None):
    """The uniform block consumed by one search (layout in the module docstring)."""
    ss = np.random.SeedSequence(config.seed) if row is None else np.random.SeedSequence(config.seed, spawn_key=(int(row),))
    rng = np.random.Generator(np.random.PCG64(ss))
    n, per_gen = config.n_fireworks, config.n_sparks_total + config.n_mutants
    u = rng.random(n + config.generations * per_gen)
    u[n:] = 2.0 * u[n:] - 1.0
    return u


def _argbest(pos, fit):
    # lowest fitness, then smaller position, then earlier slot
    order = np.lexsort((np.arange(pos.size), pos, fit))
    return order[0]


def min_amplitude(config, gen):
    """Amplitude floor for generation ``gen`` (0-based); 0 when disabled."""
    if not config.min_amplitude:
        return 0.0
    a, b = config.min_amplitude
    t = gen / (config.generations - 1) if config.generations > 1 else 1.0
    return config.amplitude * a * (b / a) ** t


def spark_allocation(fitness, n_sparks_total, amplitude_max, amplitude_floor=0.0):
    """Spark counts and amplitudes for each firework.

    Better (lower) fitness gets more sparks and a smaller amplitude.  Counts
    are at least one and are adjusted to sum to ``n_sparks_total``: surplus
    sparks go to the best fireworks first, deficits are taken from the worst.
    """
    f = np.asarray(fitness, dtype=np.float64)
    fmax, fmin = f.max(), f.min()
    share = fmax - f + XI
    raw = n_sparks_total * share / share.sum()
    counts = np.maximum(1, np.rint(raw)).astype(np.int64)
    diff = n_sparks_total - int(counts.sum())
    if diff > 0:
        order = np.argsort(-raw, kind="stable")
        j = 0
        while diff > 0:
            counts[order[j % f.size]] += 1
            diff -= 1
            j += 1
    elif diff < 0:
        order = np.argsort(raw, kind="stable")
        j = 0
        while diff < 0:
            k = order[j % f.size]
            if counts[k] > 1:
                counts[k] -= 1
                diff += 1
            j += 1
    amps = amplitude_max * (f - fmin + XI) / (fmax - fmin + XI)
    return counts, np.maximum(amps, amplitude_floor)


def fwa_init(config, objective, draws=None):
    """Place ``n_fireworks`` uniformly in the bounds and evaluate them."""
    lo, hi = config.bounds
    if draws is None:
        draws = fwa_draws(config)[: config.n_fireworks]
    pop = FwaPopulation.empty(config)
    pop.fireworks[:] = lo + (hi - lo) * np.asarray(draws[: config.n_fireworks])
    np.clip(pop.fireworks, lo, hi, out=pop.fireworks)
    pop.fitness[:] = objective.evaluate(pop.fireworks)
    k = _argbest(pop.fireworks, pop.fitness)
    pop.best = (float(pop.fireworks[k]), float(pop.fitness[k]))
    pop.history.append(pop.best[1])
    return pop


def explode(pop, config, objective, bias, gen=0):
    """Fill the spark pool; ``bias`` holds ``n_sparks_total`` draws in [-1, 1]."""
    lo, hi = config.bounds
    counts, amps = spark_allocation(pop.fitness, config.n_sparks_total, config.amplitude, min_amplitude(config, gen))
    owner = np.repeat(np.arange(config.n_fireworks), counts)
    pos = pop.fireworks[owner] + amps[owner] * np.asarray(bias[: config.n_sparks_total])
    np.clip(pos, lo, hi, out=pos)
    pop.sparks[:] = pos
    pop.spark_owner[:] = owner
    pop.spark_fitness[:] = objective.evaluate(pos)
    pop.n_sparks = config.n_sparks_total
    start = 0
    for k, c in enumerate(counts):
        seg = slice(start, start + c)
        j = start + int(np.argmin(pop.spark_fitness[seg]))
        pop.elites[k], pop.elite_fitness[k] = pop.sparks[j], pop.spark_fitness[j]
        start += c
    return pop


def mutate(pop, config, objective, u):
    """Fill the mutant pool from the current fireworks.

    The step scale is the spread of spark fitness.  ``u`` holds
    ``n_mutants`` draws in [-1, 1]; with ``mutation="literal"`` the draws are
    ignored and every mutant moves right by the full spread.
    """
    if pop.n_sparks == 0:
        raise ValidationError("mutate needs an exploded spark pool")
    lo, hi = config.bounds
    fs = pop.spark_fitness[: pop.n_sparks]
    delta = float(fs.max() - fs.min())
    src = pop.fireworks[np.arange(config.n_mutants) % config.n_fireworks]
    if config.mutation == "literal":
        pos = src + delta
    else:
        pos = src + delta * np.asarray(u[: config.n_mutants])
    np.clip(pos, lo, hi, out=pos)
    pop.mutants[:] = pos
    pop.mutant_fitness[:] = objective.evaluate(pos)
    pop.n_mutants = config.n_mutants
    return pop


def select(pop, config):
    """Keep the ``n_fireworks`` best of fireworks, sparks and mutants."""
    pos = np.concatenate([pop.fireworks, pop.sparks[: pop.n_sparks], pop.mutants[: pop.n_mutants]])
    fit = np.concatenate([pop.fitness, pop.spark_fitness[: pop.n_sparks], pop.mutant_fitness[: pop.n_mutants]])
    order = np.lexsort((np.arange(pos.size), pos, fit))
    # exact copies of a position are one solution; keep its first slot
    keep = np.ones(order.size, dtype=bool)
    keep[1:] = pos[order[1:]] != pos[order[:-1]]
    order = np.concatenate([order[keep], order[~keep]])[: config.n_fireworks]
    pop.fireworks[:] = pos[order]
    pop.fitness[:] = fit[order]
    if fit[order[0]] < pop.best[1]:
        pop.best = (float(pos[order[0]]), float(fit[order[0]]))
    pop.n_sparks = pop.n_mutants = 0
    pop.history.append(pop.best[1])
    return pop


def fwa_search(objective, config, row=None, draws=None, population=False):
    """Run init plus ``generations`` rounds of explode/mutate/select.

    Returns ``FwaResult(sigma, fitness, evaluations)`` for the best point
    ever evaluated.  With ``population=True`` also returns the final
    population (its ``history`` is the best-so-far fitness per generation).
    """
    if config.bounds is None:
        raise ValidationError("fwa_search needs config.bounds")
    if not isinstance(objective, ObjectiveHandle):
        objective = ObjectiveHandle(objective)
    if draws is None:
        draws = fwa_draws(config, row)
    n, m, k = config.n_fireworks, config.n_sparks_total, config.n_mutants
    start = objective.count
    pop = fwa_init(config, objective, draws[:n])
    off = n
    for gen in range(config.generations):
        explode(pop, config, objective, draws[off: off + m], gen)
        mutate(pop, config, objective, draws[off + m: off + m + k])
        select(pop, config)
        off += m + k
    res = FwaResult(pop.best[0], pop.best[1], objective.count - start)
    return (res, pop) if population else res


def row_perplexities(d2_row, i, sigmas):
    """Local perplexity of row ``i`` at each bandwidth in ``sigmas``.

    Uses ``H = ln Z + <a>`` (nats) with ``a_j = (d_j - d_min) / 2 sigma^2``,
    which needs one exponential per entry and no logarithms of probabilities.
    """
    d = np.asarray(d2_row, dtype=np.float64)
    sig = np.atleast_1d(np.asarray(sigmas, dtype=np.float64))
    off = np.ones(d.size, dtype=bool)
    off[i] = False
    dd = d[off]
    dd = dd - dd.min()
    a = dd[None, :] / (2.0 * sig[:, None] ** 2)
    w = np.exp(-a)
    z = w.sum(axis=1)
    h = np.log(z) + (w * a).sum(axis=1) / z
    return np.exp(h)


def perplexity_objective(d2_row, i, target, log_space=False):
    """``ObjectiveHandle`` for ``|R_i(sigma) - target|`` on one row.

    With ``log_space=True`` the handle takes ``ln(sigma)`` instead of sigma.
    """
    d2_row = np.asarray(d2_row, dtype=np.float64)
    check_target(target, d2_row.size)

    def batch(s):
        s = np.asarray(s, dtype=np.float64)
        return np.abs(row_perplexities(d2_row, i, np.exp(s) if log_space else s) - target)

    return ObjectiveHandle(lambda s: float(batch(np.array([s]))[0]), batch)


@dataclass
class BandwidthResult:
    """Per-row bandwidths with the fitness each search reached."""

    sigma: np.ndarray
    fitness: np.ndarray
    evaluations: np.ndarray
    bounds: tuple[float, float]

    def summary(self):
        return {
            "fitness_min": float(self.fitness.min()),
            "fitness_median": float(np.median(self.fitness)),
            "fitness_max": float(self.fitness.max()),
            "evaluations_per_row": int(self.evaluations[0]) if self.evaluations.size else 0,
            "evaluations_total": int(self.evaluations.sum()),
        }


def solve_all_bandwidths(d2, target, config=None):
    """Independent fireworks search for every row's bandwidth.

    ``config.bounds`` is the sigma interval and defaults to
    :func:`adapsne.affinity.sigma_bounds`.  With ``search_space="log"`` the
    search runs on ``ln(sigma)`` over the log of those bounds (amplitudes are
    then in log units); returned sigmas are always in distance units.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    n = d2.shape[0]
    config = config or FwaConfig()
    check_target(target, n)
    bounds = config.bounds if config.bounds is not None else sigma_bounds(d2)
    log_space = config.search_space == "log"
    if log_space:
        if bounds[0] <= 0:
            raise ValidationError("log-space bandwidth search needs a positive lower bound")
        search = config.with_bounds((np.log(bounds[0]), np.log(bounds[1])))
    else:
        search = config.with_bounds(bounds)

    if _accel.use_numba():
        from ._kernels import POW2, fwa_rows

        draws = np.stack([fwa_draws(search, i) for i in range(n)])
        floors = np.array([min_amplitude(search, g) for g in range(search.generations)])
        pos, fit = fwa_rows(
            d2, float(target), draws, search.bounds[0], search.bounds[1], search.amplitude, floors,
            search.n_fireworks, search.n_sparks_total, search.n_mutants, search.generations,
            search.mutation == "literal", log_space, POW2,
        )
        bad = np.flatnonzero(np.isnan(fit))
        if bad.size:
            raise NumericalError(f"row {int(bad[0])}: objective returned NaN")
        evals = np.full(n, search.evaluations, dtype=np.int64)
    else:
        pos, fit = np.empty(n), np.empty(n)
        evals = np.empty(n, dtype=np.int64)
        for i in range(n):
            try:
                r = fwa_search(perplexity_objective(d2[i], i, target, log_space), search, row=i)
            except NumericalError as exc:
                raise NumericalError(f"row {i}: {exc}") from exc
            pos[i], fit[i], evals[i] = r
    sigma = np.exp(pos) if log_space else pos
    # exp(ln lo) can round just outside the interval
    np.clip(sigma, bounds[0], bounds[1], out=sigma)
    return BandwidthResult(sigma, fit, evals, (float(bounds[0]), float(bounds[1])))
