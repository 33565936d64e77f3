"""Representative city subsets by distribution matching.

A candidate subset is scored by the mean of two KL divergences against the
state: one over a log10-population histogram of its cities, one over its
pooled (D, R, I) vote shares.  Random subsets are drawn and the lowest score
wins.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class GoldSetError(ValueError):
    pass


@dataclass(frozen=True)
class CityProfile:
    name: str
    population: int
    dem_votes: int
    rep_votes: int
    ind_votes: int

    def __post_init__(self):
        if not self.name:
            raise GoldSetError("city name must be non-empty")
        if not self.population > 0:
            raise GoldSetError(f"{self.name}: population must be positive")
        if min(self.dem_votes, self.rep_votes, self.ind_votes) < 0:
            raise GoldSetError(f"{self.name}: vote counts must be non-negative")

    @property
    def votes(self) -> np.ndarray:
        return np.array([self.dem_votes, self.rep_votes, self.ind_votes], dtype=float)


@dataclass(frozen=True)
class DistributionSpec:
    population_bins: tuple = (3.0, 3.6, 4.2, 4.8, 5.4, 6.0)
    smoothing_epsilon: float = 1e-9

    def __post_init__(self):
        edges = tuple(float(e) for e in self.population_bins)
        if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise GoldSetError("population_bins must be at least two strictly increasing edges")
        if not self.smoothing_epsilon > 0:
            raise GoldSetError("smoothing_epsilon must be positive")
        object.__setattr__(self, "population_bins", edges)

    @classmethod
    def uniform(cls, n_bins: int = 5, lo: float = 3.0, hi: float = 6.0, eps: float = 1e-9) -> "DistributionSpec":
        return cls(tuple(np.linspace(lo, hi, n_bins + 1).tolist()), eps)


@dataclass(frozen=True)
class StateProfile:
    pop: np.ndarray
    pol: np.ndarray

    @classmethod
    def from_cities(cls, cities: Sequence[CityProfile], spec: DistributionSpec = DistributionSpec()) -> "StateProfile":
        return cls(build_pop_vector(cities, spec), build_pol_vector(cities, spec))

    @classmethod
    def from_vectors(cls, pop, pol, spec: DistributionSpec = DistributionSpec()) -> "StateProfile":
        pop = np.asarray(pop, dtype=float)
        if pop.size != len(spec.population_bins) - 1:
            raise GoldSetError("state population vector does not match the bin count")
        return cls(smooth(pop / pop.sum(), spec.smoothing_epsilon), political_vector(pol, spec))


@dataclass
class GoldSetResult:
    selected: tuple
    divergence: float
    kl_pop: float
    kl_pol: float
    n_subsets: int
    seed: int
    evaluated: int = 0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "selected": list(self.selected),
            "mean_kl": self.divergence,
            "kl_population": self.kl_pop,
            "kl_political": self.kl_pol,
            "n_subsets": self.n_subsets,
            "evaluated": self.evaluated,
            "seed": self.seed,
        }


def smooth(p: np.ndarray, eps: float) -> np.ndarray:
    q = np.asarray(p, dtype=float) + eps
    return q / q.sum()


def build_pop_vector(cities: Sequence[CityProfile], spec: DistributionSpec = DistributionSpec()) -> np.ndarray:
    """Smoothed histogram of the cities over log10-population bins.

    Cities outside the bin range are counted in the nearest edge bin.
    """
    if not cities:
        raise GoldSetError("no cities")
    edges = np.asarray(spec.population_bins)
    counts = np.zeros(edges.size - 1)
    for c in cities:
        x = math.log10(c.population)
        if x < edges[0] or x > edges[-1]:
            warnings.warn(f"{c.name}: population {c.population} outside bin range; using edge bin", stacklevel=2)
        b = int(np.searchsorted(edges, x, side="right")) - 1
        counts[min(max(b, 0), counts.size - 1)] += 1
    return smooth(counts / counts.sum(), spec.smoothing_epsilon)


def political_vector(votes, spec: DistributionSpec = DistributionSpec()) -> np.ndarray:
    v = np.asarray(votes, dtype=float)
    if v.shape != (3,) or np.any(v < 0):
        raise GoldSetError("political vector needs three non-negative components")
    if v.sum() == 0:
        raise GoldSetError("all-zero votes")
    return smooth(v / v.sum(), spec.smoothing_epsilon)


def build_pol_vector(cities: Sequence[CityProfile], spec: DistributionSpec = DistributionSpec()) -> np.ndarray:
    """Pooled vote shares (D, R, I) of the cities, smoothed."""
    if not cities:
        raise GoldSetError("no cities")
    return political_vector(sum(c.votes for c in cities), spec)


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats, with 0 * ln(0 / q) taken as 0."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise GoldSetError("p and q must be vectors of equal length")
    if np.any(p < 0) or np.any(q < 0):
        raise GoldSetError("probabilities must be non-negative")
    if abs(p.sum() - 1) > 1e-9 or abs(q.sum() - 1) > 1e-9:
        raise GoldSetError("probability vectors must sum to 1")
    support = p > 0
    if np.any(q[support] == 0):
        raise GoldSetError("unsmoothed support mismatch")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def score_subset(cities: Sequence[CityProfile], state: StateProfile, spec: DistributionSpec) -> tuple[float, float, float]:
    kp = kl_divergence(build_pop_vector(cities, spec), state.pop)
    kq = kl_divergence(build_pol_vector(cities, spec), state.pol)
    return (kp + kq) / 2.0, kp, kq


def select_gold_set(candidates: Sequence[CityProfile], state: StateProfile, subset_size: int, n_subsets: int,
                    seed: int = 0, spec: DistributionSpec = DistributionSpec()) -> GoldSetResult:
    """Lowest mean-KL subset among ``n_subsets`` distinct random draws.

    Draws are deduplicated, so asking for at least C(n, k) subsets examines
    every subset.  Equal scores go to the alphabetically smallest name tuple.
    """
    names = [c.name for c in candidates]
    if len(set(names)) != len(names):
        raise GoldSetError("duplicate candidate names")
    n = len(candidates)
    if not 1 <= subset_size <= n:
        raise GoldSetError(f"subset_size must lie in [1, {n}]")
    if n_subsets < 1:
        raise GoldSetError("n_subsets must be at least 1")
    build_pop_vector(candidates, spec)  # surfaces out-of-range warnings once
    target = min(n_subsets, math.comb(n, subset_size))
    rng = np.random.default_rng(seed)
    seen: set[tuple] = set()
    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        while len(seen) < target:
            pick = tuple(sorted(rng.choice(n, size=subset_size, replace=False).tolist(), key=names.__getitem__))
            if pick in seen:
                continue
            seen.add(pick)
            subset = [candidates[i] for i in pick]
            score = score_subset(subset, state, spec)
            key = (score[0], tuple(names[i] for i in pick))
            if best is None or key < best[0]:
                best = (key, score)
    (_, sel), (mean, kp, kq) = best
    return GoldSetResult(sel, mean, kp, kq, n_subsets, seed, evaluated=len(seen))


def exhaustive_gold_set(candidates: Sequence[CityProfile], state: StateProfile, subset_size: int,
                        spec: DistributionSpec = DistributionSpec()) -> GoldSetResult:
    """Brute-force minimum over every subset; practical for small pools."""
    import itertools

    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for combo in itertools.combinations(sorted(candidates, key=lambda c: c.name), subset_size):
            score = score_subset(combo, state, spec)
            key = (score[0], tuple(c.name for c in combo))
            if best is None or key < best[0]:
                best = (key, score)
    (_, sel), (mean, kp, kq) = best
    return GoldSetResult(sel, mean, kp, kq, math.comb(len(candidates), subset_size), -1,
                         evaluated=math.comb(len(candidates), subset_size))


CITY_COLUMNS = ("name", "population", "dem_votes", "rep_votes", "ind_votes")


def read_cities(path) -> list[CityProfile]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(CITY_COLUMNS) - set(reader.fieldnames):
            raise GoldSetError(f"{path}: expected columns {', '.join(CITY_COLUMNS)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(CityProfile(row["name"].strip(), int(row["population"]), int(row["dem_votes"]),
                                       int(row["rep_votes"]), int(row["ind_votes"])))
            except ValueError as exc:
                raise GoldSetError(f"{path}:{lineno}: {exc}") from exc
    if not out:
        raise GoldSetError(f"{path}: no cities")
    return out
