"""Brute-force reference: explicit enumeration of every composite alternative.

Only meant for small instances; it is the independent check the DAG
machinery is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, combinations_with_replacement
from math import comb

import numpy as np
from scipy.special import logsumexp

from .core import Bounds, ItemUniverse, Observation, count_matrix
from .errors import ConfigurationError, GuardError

MAX_ENUMERATION = 10_000_000


def lmdc_size(m: int, bounds: Bounds) -> int:
    return sum(comb(m, s) for s in range(bounds.lower, bounds.upper + 1))


def count_lmdc_size(m: int, bounds: Bounds) -> int:
    """Number of multisets of ``m`` item types with total count in bounds."""
    return sum(comb(m + s - 1, s) for s in range(bounds.lower, bounds.upper + 1))


@dataclass(frozen=True, eq=False)
class EnumeratedChoiceSet:
    """All alternatives as rows of an (n_alternatives, m) count matrix."""

    bounds: Bounds
    counts: np.ndarray

    def __len__(self) -> int:
        return self.counts.shape[0]

    def log_probabilities(self, item_utils, mu: float = 1.0) -> np.ndarray:
        u = self.counts @ np.asarray(item_utils, dtype=float) / mu
        return u - logsumexp(u)

    def probabilities(self, item_utils, mu: float = 1.0) -> np.ndarray:
        return np.exp(self.log_probabilities(item_utils, mu))

    def index(self) -> dict:
        return {tuple(row): r for r, row in enumerate(self.counts.tolist())}


def _guard(size: int, limit: int) -> None:
    if size > limit:
        raise GuardError(f"enumeration of {size} alternatives exceeds limit {limit}", size)


def enumerate_lmdc(m: int, bounds: Bounds, limit: int = MAX_ENUMERATION) -> EnumeratedChoiceSet:
    bounds.check(m)
    _guard(lmdc_size(m, bounds), limit)
    rows = []
    for s in range(bounds.lower, bounds.upper + 1):
        for combo in combinations(range(m), s):
            row = np.zeros(m, dtype=np.int64)
            row[list(combo)] = 1
            rows.append(row)
    return EnumeratedChoiceSet(bounds, np.array(rows, dtype=np.int64).reshape(-1, m))


def enumerate_count_lmdc(m: int, bounds: Bounds, limit: int = MAX_ENUMERATION) -> EnumeratedChoiceSet:
    if m < 1:
        raise ConfigurationError("need at least one item")
    _guard(count_lmdc_size(m, bounds), limit)
    rows = []
    for s in range(bounds.lower, bounds.upper + 1):
        for combo in combinations_with_replacement(range(m), s):
            rows.append(np.bincount(np.array(combo, dtype=np.int64), minlength=m))
    return EnumeratedChoiceSet(bounds, np.array(rows, dtype=np.int64).reshape(-1, m))


def brute_force_loglik(universe: ItemUniverse, observations, beta, mu: float = 1.0,
                       counts_allowed: bool = False, limit: int = MAX_ENUMERATION) -> float:
    """Log-likelihood by explicit softmax over each bounds group's choice set."""
    v = universe.x @ np.asarray(beta, dtype=float)
    by_bounds = {}
    for obs in observations:
        by_bounds.setdefault(obs.bounds, []).append(obs)
    total = 0.0
    enum = enumerate_count_lmdc if counts_allowed else enumerate_lmdc
    for b, group in sorted(by_bounds.items()):
        cs = enum(universe.m, b, limit)
        log_norm = logsumexp(cs.counts @ v / mu)
        chosen = count_matrix(group, universe.m) @ v / mu
        total += float(chosen.sum() - len(group) * log_norm)
    return total


def brute_force_probability(universe: ItemUniverse, obs: Observation, beta, mu: float = 1.0,
                            counts_allowed: bool = False) -> float:
    return float(np.exp(brute_force_loglik(universe, [obs], beta, mu, counts_allowed)))
