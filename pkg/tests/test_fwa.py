import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adapsne.affinity import pairwise_sq_dists, sigma_bounds
from adapsne.errors import NumericalError, ValidationError
from adapsne.fwa import (
    FwaConfig,
    FwaPopulation,
    ObjectiveHandle,
    explode,
    fwa_draws,
    fwa_init,
    fwa_search,
    min_amplitude,
    mutate,
    perplexity_objective,
    row_perplexities,
    select,
    solve_all_bandwidths,
    spark_allocation,
)

import oracles


def v_objective(center=3.0):
    return ObjectiveHandle(lambda s: abs(s - center), lambda s: np.abs(np.asarray(s) - center))


def cfg(**kw):
    kw.setdefault("bounds", (0.0, 10.0))
    return FwaConfig(**kw)


# config -------------------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        {"n_fireworks": 1},
        {"n_sparks_total": 4},
        {"generations": 0},
        {"bounds": (2.0, 2.0)},
        {"mutation": "sideways"},
        {"amplitude_max": -1.0},
        {"n_mutants": 0},
    ],
)
def test_invalid_configs(kw):
    with pytest.raises(ValidationError):
        cfg(**kw)


def test_defaults():
    c = cfg()
    assert (c.n_fireworks, c.n_sparks_total, c.n_mutants, c.generations) == (8, 40, 8, 30)
    assert c.amplitude == 2.5  # (hi - lo) / 4
    assert c.evaluations == 8 + 30 * (40 + 8) == 1448


# init -----------------------------------------------------------------------


def test_init_is_deterministic():
    a = fwa_init(cfg(seed=7), v_objective())
    b = fwa_init(cfg(seed=7), v_objective())
    assert np.array_equal(a.fireworks, b.fireworks)
    assert not np.array_equal(a.fireworks, fwa_init(cfg(seed=8), v_objective()).fireworks)


def test_init_constant_objective():
    pop = fwa_init(cfg(), ObjectiveHandle(lambda s: 0.7))
    assert pop.best[1] == 0.7


def test_init_best_is_min_of_redrawn_positions():
    c = cfg(n_fireworks=5, n_sparks_total=5, seed=3)
    obj = v_objective()
    pop = fwa_init(c, obj)
    assert obj.count == 5
    # re-evaluate f at each drawn position independently
    u = fwa_draws(c)[:5]
    pos = 0.0 + 10.0 * u
    assert np.array_equal(pop.fireworks, pos)
    assert pop.best[1] == min(abs(p - 3.0) for p in pos)


# explosion -------------------------------------------------------------------


def test_equal_fitness_gives_equal_allocation():
    counts, amps = spark_allocation(np.full(8, 0.4), 40, 2.0)
    assert list(counts) == [5] * 8
    assert np.allclose(amps, 2.0)
    counts, _ = spark_allocation(np.full(3, 1.0), 10, 1.0)
    assert counts.sum() == 10 and counts.max() - counts.min() <= 1


def test_best_firework_gets_most_sparks_and_smallest_amplitude():
    f = np.array([1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    counts, amps = spark_allocation(f, 40, 2.0)
    h_counts, raw, h_amps = oracles.allocation_by_hand(list(f), 40, 2.0)
    # by hand: 40 for the best, 1 for each other firework, then trim the surplus of 7 from the best
    assert h_counts == [1, 1, 40, 1, 1, 1, 1, 1]
    assert list(counts) == [1, 1, 33, 1, 1, 1, 1, 1]
    assert counts.argmax() == 2 and amps.argmin() == 2
    np.testing.assert_allclose(amps, h_amps, rtol=1e-12)
    assert amps[2] == pytest.approx(2e-12)


def test_allocation_matches_hand_recipe_when_rounding_sums_exactly():
    f = [0.1, 0.5, 0.9, 0.3]
    counts, amps = spark_allocation(np.array(f), 20, 1.0)
    h_counts, _, h_amps = oracles.allocation_by_hand(f, 20, 1.0)
    if sum(h_counts) == 20:
        assert list(counts) == h_counts
    np.testing.assert_allclose(amps, h_amps, rtol=1e-12)


@given(st.lists(st.floats(0, 100), min_size=2, max_size=12), st.integers(0, 60))
@settings(max_examples=150, deadline=None)
def test_allocation_invariants(f, extra):
    f = np.array(f)
    total = f.size + extra
    counts, amps = spark_allocation(f, total, 3.0, amplitude_floor=0.01)
    assert counts.sum() == total and (counts >= 1).all()
    assert (amps >= 0.01).all() and (amps <= 3.0 + 1e-12).all()
    # better fitness never gets fewer sparks
    for a in range(f.size):
        for b in range(f.size):
            if f[b] - f[a] > 1e-9 * f.max():
                assert counts[a] >= counts[b]
                assert amps[a] <= amps[b]


def test_spark_clipped_at_the_upper_bound():
    c = cfg(n_fireworks=2, n_sparks_total=4, amplitude_max=0.5, min_amplitude=None)
    pop = FwaPopulation.empty(c)
    pop.fireworks[:] = 9.8
    pop.fitness[:] = 1.0
    explode(pop, c, v_objective(), np.ones(4))
    assert np.array_equal(pop.sparks, np.full(4, 10.0))


def test_explode_fills_pool_and_elites():
    c = cfg(seed=1)
    obj = v_objective()
    pop = fwa_init(c, obj)
    u = fwa_draws(c)
    explode(pop, c, obj, u[8:48])
    assert obj.count == 8 + 40
    assert pop.n_sparks == 40 and (pop.sparks >= 0).all() and (pop.sparks <= 10).all()
    for k in range(8):
        own = pop.spark_fitness[pop.spark_owner == k]
        assert pop.elite_fitness[k] == own.min()


def test_amplitude_floor_decays_geometrically():
    c = cfg(generations=11, amplitude_max=1.0)
    assert min_amplitude(c, 0) == pytest.approx(0.1)
    assert min_amplitude(c, 10) == pytest.approx(1e-6)
    assert min_amplitude(c, 5) == pytest.approx(np.sqrt(0.1 * 1e-6))
    assert min_amplitude(cfg(min_amplitude=None), 3) == 0.0


# mutation ---------------------------------------------------------------------


def _pop_with_sparks(c, fw, spark_fit):
    pop = FwaPopulation.empty(c)
    pop.fireworks[:] = fw
    pop.fitness[:] = 0.5
    pop.spark_fitness[: len(spark_fit)] = spark_fit
    pop.n_sparks = len(spark_fit)
    return pop


def test_zero_spread_mutants_stay_put():
    c = cfg(n_fireworks=2, n_sparks_total=2)
    pop = _pop_with_sparks(c, [2.0, 6.0], [0.3, 0.3])
    mutate(pop, c, v_objective(), np.array([0.9, -0.4]))
    assert np.array_equal(pop.mutants, [2.0, 6.0])


def test_mutation_step_is_spark_spread():
    c = cfg(n_fireworks=2, n_sparks_total=2)
    pop = _pop_with_sparks(c, [3.0, 3.0], [0.2, 1.4])
    mutate(pop, c, v_objective(), np.array([1.0, -1.0]))
    np.testing.assert_allclose(pop.mutants, [4.2, 1.8], rtol=1e-15)


def test_literal_mutation_moves_right():
    c = cfg(n_fireworks=2, n_sparks_total=2, mutation="literal")
    pop = _pop_with_sparks(c, [3.0, 9.5], [0.2, 1.4])
    mutate(pop, c, v_objective(), np.array([-1.0, -1.0]))
    np.testing.assert_allclose(pop.mutants, [4.2, 10.0])


def test_mutant_clipped_to_upper_bound():
    c = cfg(n_fireworks=2, n_sparks_total=2)
    pop = _pop_with_sparks(c, [9.9, 9.9], [0.0, 5.0])
    mutate(pop, c, v_objective(), np.array([1.0, 0.5]))
    assert np.array_equal(pop.mutants, [10.0, 10.0])


def test_mutate_needs_sparks():
    c = cfg()
    with pytest.raises(ValidationError):
        mutate(FwaPopulation.empty(c), c, v_objective(), np.zeros(8))


# selection -------------------------------------------------------------------


def test_select_top_n():
    c = cfg(n_fireworks=2, n_sparks_total=2, n_mutants=1)
    pop = FwaPopulation.empty(c)
    pop.fireworks[:] = [1.0, 2.0]
    pop.fitness[:] = [3.0, 5.0]
    pop.sparks[:] = [4.0, 5.0]
    pop.spark_fitness[:] = [1.0, 7.0]
    pop.mutants[:] = [6.0]
    pop.mutant_fitness[:] = [2.0]
    pop.n_sparks, pop.n_mutants = 2, 1
    select(pop, c)
    assert list(pop.fitness) == [1.0, 2.0]
    assert list(pop.fireworks) == [4.0, 6.0]
    assert pop.best == (4.0, 1.0)


def test_select_matches_full_sort_oracle():
    rng = np.random.default_rng(9)
    c = cfg(n_fireworks=7, n_sparks_total=15, n_mutants=8)
    pos = rng.uniform(0, 10, 30)
    fit = rng.integers(0, 6, 30).astype(float)  # plenty of fitness ties
    pop = FwaPopulation.empty(c)
    pop.fireworks[:], pop.fitness[:] = pos[:7], fit[:7]
    pop.sparks[:], pop.spark_fitness[:] = pos[7:22], fit[7:22]
    pop.mutants[:], pop.mutant_fitness[:] = pos[22:], fit[22:]
    pop.n_sparks, pop.n_mutants = 15, 8
    select(pop, c)
    expect = sorted(range(30), key=lambda k: (fit[k], pos[k], k))[:7]
    assert np.array_equal(pop.fireworks, pos[expect])
    assert np.array_equal(pop.fitness, fit[expect])


def test_select_never_worsens_best():
    c = cfg(seed=4)
    obj = v_objective(7.3)
    pop = fwa_init(c, obj)
    u = fwa_draws(c)
    off = 8
    for gen in range(5):
        before = pop.best[1]
        explode(pop, c, obj, u[off: off + 40], gen)
        mutate(pop, c, obj, u[off + 40: off + 48])
        select(pop, c)
        assert pop.best[1] <= before
        assert pop.best[1] <= pop.fitness.min()
        off += 48


# search ---------------------------------------------------------------------


def test_search_finds_the_v_minimum():
    res = fwa_search(v_objective(), cfg())
    assert abs(res.sigma - 3.0) < 0.05 and res.fitness < 0.05
    assert res.evaluations == 1448


@given(st.integers(0, 2**63 - 1), st.integers(2, 6), st.integers(0, 10), st.integers(1, 4), st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_search_invariants(seed, n, extra, mutants, gens):
    c = cfg(seed=seed, n_fireworks=n, n_sparks_total=n + extra, n_mutants=mutants, generations=gens)
    seen = []

    def batch(s):
        s = np.asarray(s)
        seen.extend(s.tolist())
        return np.abs(np.sin(s)) + 0.1 * s

    obj = ObjectiveHandle(lambda s: float(batch(np.array([s]))[0]), batch)
    res, pop = fwa_search(obj, c, population=True)
    assert res.evaluations == obj.count == n + gens * (n + extra + mutants)
    assert min(seen) >= 0.0 and max(seen) <= 10.0
    assert all(b <= a for a, b in zip(pop.history, pop.history[1:]))
    assert res.fitness <= pop.history[0]
    assert res == fwa_search(ObjectiveHandle(lambda s: float(batch(np.array([s]))[0]), batch), c)


def test_nan_objective_names_sigma():
    obj = ObjectiveHandle(lambda s: float("nan") if s > 5 else s)
    with pytest.raises(NumericalError, match="sigma="):
        fwa_search(obj, cfg())


def test_equidistant_row_is_solved_every_generation():
    row = np.array([0.0, 2.0, 2.0, 2.0, 2.0])
    res, pop = fwa_search(perplexity_objective(row, 0, 4.0), cfg(bounds=(0.01, 10.0)), population=True)
    assert res.fitness == pytest.approx(0.0, abs=1e-12)
    assert max(pop.history) == pytest.approx(0.0, abs=1e-12)


def test_row_perplexities_match_loop():
    row = np.random.default_rng(0).exponential(size=12)
    row[3] = 0.0
    sig = np.array([0.05, 0.4, 3.0, 40.0])
    r = row_perplexities(row, 3, sig)
    for s, v in zip(sig, r):
        assert v == pytest.approx(oracles.perplexity_loop(oracles.conditional_row_naive_stable(row, 3, s)), rel=1e-12)


def test_witness_row_search_beats_grid_scan(data_dir):
    doc = json.loads((data_dir / "witness.json").read_text())
    row, t = np.array(doc["d2_row"]), doc["target"]
    lo, hi = doc["sigma_bounds"]
    opt = oracles.grid_scan_min(row, 0, t, lo, hi)
    res = fwa_search(perplexity_objective(row, 0, t, log_space=True), cfg(bounds=(np.log(lo), np.log(hi))))
    assert res.fitness <= 1.05 * opt + 1e-12


# all rows ---------------------------------------------------------------------


def test_simplex_rows_have_zero_fitness(backend):
    x = np.eye(5)  # equidistant simplex
    bw = solve_all_bandwidths(pairwise_sq_dists(x), 4.0)
    assert np.allclose(bw.fitness, 0.0, atol=1e-12)
    assert ((bw.sigma >= bw.bounds[0]) & (bw.sigma <= bw.bounds[1])).all()


def test_blob_rows_match_grid_scan(backend):
    x = np.random.default_rng(21).normal(size=(50, 4))
    d2 = pairwise_sq_dists(x)
    bw = solve_all_bandwidths(d2, 10.0, FwaConfig(seed=5))
    lo, hi = sigma_bounds(d2)
    ok = sum(bw.fitness[i] <= 1.05 * oracles.grid_scan_min(d2[i], i, 10.0, lo, hi) + 1e-12 for i in range(50))
    assert ok >= 48  # 95 percent of 50 rows, rounded up
    assert (bw.evaluations == 1448).all()


def test_row_streams_are_independent():
    x = np.random.default_rng(2).normal(size=(12, 3))
    d2 = pairwise_sq_dists(x)
    c = FwaConfig(seed=11, search_space="linear", generations=5)
    bw = solve_all_bandwidths(d2, 5.0, c)
    search = c.with_bounds(sigma_bounds(d2))
    from adapsne import _accel

    prev = _accel.set_backend("numpy")
    try:
        one = fwa_search(perplexity_objective(d2[7], 7, 5.0), search, row=7)
    finally:
        _accel.set_backend(prev)
    assert bw.fitness[7] == pytest.approx(one.fitness, rel=1e-9, abs=1e-12)


def test_bad_target_rejected():
    with pytest.raises(ValidationError):
        solve_all_bandwidths(pairwise_sq_dists(np.eye(4)), 3.5)
