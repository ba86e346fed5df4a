"""Entropy-guided outer loop that retunes the target perplexity.

Each evaluation runs bandwidth search -> joint affinities -> embedding ->
grid entropy.  Starting from ``pi0`` the first step is ``+ceil(delta_pi)``;
later steps divide the last entropy change by a forward-difference slope
probed at the current perplexity::

    step = ceil((H_k - H_{k-1}) / (slope + epsilon))

The step is capped at ``max_step`` in magnitude, a zero step is replaced by
one unit in the previous direction, and the new perplexity is clamped into
``(1, N - 1]`` and moved off values already visited.
"""

import logging
import math
import time
from dataclasses import dataclass, field

from .affinity import Dataset, check_target, conditional_matrix, pairwise_sq_dists, symmetrize
from .embedding import EmbedConfig, embed
from .errors import AdapsneError, ValidationError
from .fwa import FwaConfig, solve_all_bandwidths
from .grid import DEFAULT_ALPHA, auto_g, entropy_threshold, fit_grid, grid_entropy, histogram, max_entropy
from .sampler import ExemplarSet, grid_sample, keep_ratio_to_m

log = logging.getLogger(__name__)

TOL = 1e-9


@dataclass
class PipelineConfig:
    fwa: FwaConfig = field(default_factory=FwaConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    g: int | None = None  # None -> ceil(sqrt(m))
    alpha: float = DEFAULT_ALPHA
    pi0: float = 30.0
    delta_pi: float = 2.0
    epsilon: float = 1e-8
    max_iters: int = 12
    max_step: int = 16
    m: int | None = None
    keep_ratio: float | None = 0.1
    pick: str = "centroid"
    sampler_mode: str = "round-robin"
    sampler_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValidationError("alpha must lie in [0, 1]")
        if not self.delta_pi > 0:
            raise ValidationError("delta_pi must be positive")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if self.max_iters < 0:
            raise ValidationError("max_iters must be >= 0")
        if self.max_step < 1:
            raise ValidationError("max_step must be >= 1")
        if self.g is not None and self.g < 2:
            raise ValidationError("g must be >= 2")
        if self.pick not in ("centroid", "random"):
            raise ValidationError(f"unknown pick rule {self.pick!r}")
        if self.sampler_mode not in ("round-robin", "proportional"):
            raise ValidationError(f"unknown sampling mode {self.sampler_mode!r}")

    def exemplar_count(self, n):
        if self.m is not None:
            if not 1 <= self.m <= n:
                raise ValidationError(f"m must lie in [1, {n}], got {self.m}")
            return int(self.m)
        if self.keep_ratio is None:
            raise ValidationError("either m or keep_ratio must be set")
        return keep_ratio_to_m(self.keep_ratio, n)

    def grid_size(self, n):
        return self.g if self.g is not None else auto_g(self.exemplar_count(n))


@dataclass
class Evaluation:
    pi_t: float
    entropy: float
    embedding: object
    histogram: object
    bandwidths: object


@dataclass
class ControllerState:
    k: int = 0
    history: list = field(default_factory=list)  # Evaluation per accepted step
    h_baseline: float = float("nan")
    h_threshold: float = float("nan")
    direction: int = 1

    @property
    def pis(self):
        return [e.pi_t for e in self.history]


@dataclass
class RunResult:
    exemplars: ExemplarSet
    state: ControllerState
    final: Evaluation
    termination: str
    probes: list
    timings: dict
    g: int
    m: int


class AdapSNE:
    """One run of the entropy-guided sampler on a fixed dataset.

    Evaluations are memoised by target perplexity, so probes and revisits
    cost nothing extra.
    """

    def __init__(self, dataset, config=None):
        if not isinstance(dataset, Dataset):
            dataset = Dataset(dataset)
        dataset.require_pipeline_size()
        self.data = dataset
        self.config = config or PipelineConfig()
        self.n = dataset.n
        self.g = self.config.grid_size(self.n)
        self.m = self.config.exemplar_count(self.n)
        self.d2 = pairwise_sq_dists(dataset)
        self.cache = {}
        self.probes = []
        self.timings = {"fwa": 0.0, "affinity": 0.0, "embed": 0.0, "entropy": 0.0, "sampling": 0.0}

    def _key(self, pi_t):
        return round(float(pi_t), 9)

    def evaluate_perplexity(self, pi_t):
        key = self._key(pi_t)
        if key in self.cache:
            return self.cache[key]
        check_target(pi_t, self.n)
        try:
            t0 = time.perf_counter()
            bw = solve_all_bandwidths(self.d2, pi_t, self.config.fwa)
            t1 = time.perf_counter()
            p = symmetrize(conditional_matrix(self.d2, bw.sigma))
            t2 = time.perf_counter()
            emb = embed(p, self.config.embed)
            t3 = time.perf_counter()
            h = histogram(emb.coords, fit_grid(emb.coords, self.g))
            ent = grid_entropy(h)
            t4 = time.perf_counter()
        except AdapsneError as exc:
            raise type(exc)(f"at target perplexity {pi_t}: {exc}") from exc
        self.timings["fwa"] += t1 - t0
        self.timings["affinity"] += t2 - t1
        self.timings["embed"] += t3 - t2
        self.timings["entropy"] += t4 - t3
        ev = Evaluation(float(pi_t), ent, emb, h, bw)
        self.cache[key] = ev
        return ev

    # admissible perplexities: pi0 + integer, clamped into (1, N - 1]
    def _lowest(self):
        frac = self.config.pi0 - math.floor(self.config.pi0)
        return 1.0 + frac if frac > TOL else 2.0

    def _clamp(self, pi):
        return min(max(pi, self._lowest()), float(self.n - 1))

    def _visited(self, pi, state):
        return any(abs(pi - q) < TOL for q in state.pis)

    def _place(self, pi, direction, state):
        """Clamp ``pi`` and walk one unit at a time off visited values."""
        lo, hi = self._lowest(), float(self.n - 1)
        cand = self._clamp(pi)
        for d in (direction, -direction):
            x = cand
            while lo - TOL <= x <= hi + TOL:
                if not self._visited(x, state):
                    return x
                x += d
        return None

    def slope(self, pi_k):
        """Forward difference of H at ``pi_k`` (backward when the probe leaves the range)."""
        dp = self.config.delta_pi
        h_k = self.evaluate_perplexity(pi_k).entropy
        hi = float(self.n - 1)
        if pi_k + dp <= hi + TOL:
            probe = pi_k + dp
            h_p = self.evaluate_perplexity(probe).entropy
            s = (h_p - h_k) / dp
        elif pi_k - dp > 1.0:
            probe = pi_k - dp
            h_p = self.evaluate_perplexity(probe).entropy
            s = (h_k - h_p) / dp
        else:
            return float("nan")
        self.probes.append({"pi_t": probe, "H": h_p})
        return s

    def raw_step(self, state):
        cfg = self.config
        if state.k == 0:
            return math.ceil(cfg.delta_pi)
        h_k = state.history[-1].entropy
        h_prev = state.history[-2].entropy
        s = self.slope(state.history[-1].pi_t)
        if not math.isfinite(s):
            log.warning("entropy slope is not finite at pi_t=%s; taking a fixed step", state.history[-1].pi_t)
            return math.ceil(cfg.delta_pi)
        ratio = (h_k - h_prev) / (s + cfg.epsilon)
        # the cap is applied by the caller; keep ceil() away from huge floats
        return math.ceil(max(-1e9, min(1e9, ratio)))

    def next_perplexity(self, state):
        """The next target perplexity, or ``None`` when every admissible value was tried."""
        cfg = self.config
        step = max(-cfg.max_step, min(cfg.max_step, self.raw_step(state)))
        if step == 0:
            step = state.direction
        state.direction = 1 if step > 0 else -1
        return self._place(state.history[-1].pi_t + step, state.direction, state)

    def run(self):
        cfg = self.config
        check_target(cfg.pi0, self.n)
        state = ControllerState()
        first = self.evaluate_perplexity(cfg.pi0)
        state.history.append(first)
        state.h_baseline = first.entropy
        state.h_threshold = entropy_threshold(first.entropy, self.g, cfg.alpha)
        termination = "iteration-cap"
        while True:
            current = state.history[-1]
            if current.entropy >= state.h_threshold:
                termination = "threshold-met"
                break
            if state.k >= cfg.max_iters:
                break
            pi_next = self.next_perplexity(state)
            if pi_next is None:
                termination = "search-exhausted"
                break
            state.history.append(self.evaluate_perplexity(pi_next))
            state.k += 1
        final = state.history[-1]
        t0 = time.perf_counter()
        ex = grid_sample(final.embedding.coords, final.histogram, self.m, cfg.sampler_seed, cfg.pick, cfg.sampler_mode)
        self.timings["sampling"] += time.perf_counter() - t0
        return RunResult(ex, state, final, termination, list(self.probes), dict(self.timings), self.g, self.m)


def run_adapsne(dataset, config=None):
    """Run the full loop and grid-sample the final embedding."""
    return AdapSNE(dataset, config).run()

