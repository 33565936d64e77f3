import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from civic_lens import goldset
from civic_lens.goldset import CityProfile, DistributionSpec, GoldSetError, StateProfile

SPEC = DistributionSpec()

city_strategy = st.builds(
    lambda i, pop, d, r, ind: CityProfile(f"city{i:02d}", pop, d, r, ind),
    st.just(0), st.integers(1000, 999_999), st.integers(0, 50_000), st.integers(0, 50_000), st.integers(0, 3000),
).filter(lambda c: c.dem_votes + c.rep_votes + c.ind_votes > 0)


@st.composite
def pools(draw):
    n = draw(st.integers(3, 9))
    cities = [draw(city_strategy) for _ in range(n)]
    cities = [CityProfile(f"city{i:02d}", c.population, c.dem_votes, c.rep_votes, c.ind_votes)
              for i, c in enumerate(cities)]
    order = draw(st.permutations(range(n)))
    return [cities[i] for i in order], draw(st.integers(1, n))


def as_tuples(cities):
    return [(c.name, c.population, (c.dem_votes, c.rep_votes, c.ind_votes)) for c in cities]


STATE = StateProfile.from_vectors((0.35, 0.3, 0.2, 0.1, 0.05), (0.5, 0.45, 0.05), SPEC)


def test_kl_reference_value():
    assert goldset.kl_divergence((0.5, 0.5), (0.25, 0.75)) == pytest.approx(0.143841, abs=1e-6)
    assert goldset.kl_divergence((0.5, 0.5), (0.25, 0.75)) == pytest.approx(oracles.kl_two_term((.5, .5), (.25, .75)))


def test_kl_edge_cases():
    assert goldset.kl_divergence((1.0, 0.0), (0.5, 0.5)) == pytest.approx(math.log(2))
    with pytest.raises(GoldSetError, match="support"):
        goldset.kl_divergence((0.5, 0.5), (1.0, 0.0))
    with pytest.raises(GoldSetError):
        goldset.kl_divergence((0.5, 0.6), (0.5, 0.5))
    with pytest.raises(GoldSetError):
        goldset.kl_divergence((1.0,), (0.5, 0.5))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=2, max_size=8).filter(lambda v: sum(v) > 0))
def test_kl_self_zero_and_non_negative(v):
    p = goldset.smooth(np.array(v) / sum(v), 1e-9)
    q = goldset.smooth(np.array(v[::-1]) / sum(v), 1e-9)
    assert abs(p.sum() - 1) <= 1e-12 and abs(q.sum() - 1) <= 1e-12
    assert goldset.kl_divergence(p, p) == 0.0
    assert goldset.kl_divergence(p, q) >= -1e-12


def test_population_vector_matches_oracle_and_clamps():
    cities = [CityProfile("a", 500, 1, 1, 0), CityProfile("b", 4000, 1, 1, 0), CityProfile("c", 2_000_000, 1, 1, 0),
              CityProfile("d", 1_000_000, 1, 1, 0)]
    with pytest.warns(UserWarning, match="outside bin range"):
        vec = goldset.build_pop_vector(cities)
    ref = oracles.pop_hist([c.population for c in cities], SPEC.population_bins, SPEC.smoothing_epsilon)
    assert np.allclose(vec, ref, rtol=0, atol=1e-15)
    assert abs(vec.sum() - 1) <= 1e-12


def test_political_vector():
    cities = [CityProfile("a", 5000, 10, 30, 0), CityProfile("b", 5000, 30, 10, 20)]
    vec = goldset.build_pol_vector(cities)
    assert np.allclose(vec, oracles.vote_share([(10, 30, 0), (30, 10, 20)], 1e-9), atol=1e-15)
    with pytest.raises(GoldSetError, match="all-zero"):
        goldset.political_vector((0, 0, 0))


def test_spec_and_profile_validation():
    with pytest.raises(GoldSetError):
        DistributionSpec(population_bins=(3.0, 3.0))
    with pytest.raises(GoldSetError):
        DistributionSpec(smoothing_epsilon=0)
    with pytest.raises(GoldSetError):
        CityProfile("x", 0, 1, 1, 1)
    with pytest.raises(GoldSetError):
        StateProfile.from_vectors((1, 1), (1, 1, 1))
    assert len(DistributionSpec.uniform(4).population_bins) == 5


@settings(max_examples=60, deadline=None)
@given(pools(), st.integers(0, 2**31))
def test_dedup_sampling_finds_global_optimum(pool, seed):
    cities, k = pool
    res = goldset.select_gold_set(cities, STATE, k, n_subsets=math.comb(len(cities), k), seed=seed)
    score, names = oracles.exhaustive_best_subset(as_tuples(cities), k, list(STATE.pop), list(STATE.pol),
                                                  SPEC.population_bins, SPEC.smoothing_epsilon)
    assert res.selected == names
    assert res.divergence == pytest.approx(score, abs=1e-12)
    assert res.evaluated == math.comb(len(cities), k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ex = goldset.exhaustive_gold_set(cities, STATE, k)
    assert ex.selected == names


def test_partial_sampling_is_reproducible_and_no_worse_than_its_draws():
    rng = np.random.default_rng(1)
    cities = [CityProfile(f"c{i:02d}", int(10 ** rng.uniform(3, 6)), int(rng.integers(1, 9000)),
                          int(rng.integers(1, 9000)), int(rng.integers(0, 500))) for i in range(12)]
    a = goldset.select_gold_set(cities, STATE, 4, n_subsets=50, seed=7)
    b = goldset.select_gold_set(list(cities), STATE, 4, n_subsets=50, seed=7)
    assert a.to_dict() == b.to_dict()
    assert a.evaluated == 50
    best = goldset.exhaustive_gold_set(cities, STATE, 4)
    assert a.divergence >= best.divergence
    assert a.divergence == pytest.approx((a.kl_pop + a.kl_pol) / 2)


def test_selection_validation():
    cities = [CityProfile("a", 5000, 1, 1, 0), CityProfile("a", 6000, 1, 1, 0)]
    with pytest.raises(GoldSetError, match="duplicate"):
        goldset.select_gold_set(cities, STATE, 1, 10)
    with pytest.raises(GoldSetError):
        goldset.select_gold_set(cities[:1], STATE, 2, 10)
    with pytest.raises(GoldSetError):
        goldset.select_gold_set(cities[:1], STATE, 1, 0)


def test_read_cities(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("name,population,dem_votes,rep_votes,ind_votes\nAlpena,10000,2000,3000,100\n")
    assert goldset.read_cities(path) == [CityProfile("Alpena", 10000, 2000, 3000, 100)]
    path.write_text("name,population\nAlpena,1\n")
    with pytest.raises(GoldSetError, match="expected columns"):
        goldset.read_cities(path)
    path.write_text("name,population,dem_votes,rep_votes,ind_votes\nAlpena,many,1,1,1\n")
    with pytest.raises(GoldSetError, match=":2:"):
        goldset.read_cities(path)
