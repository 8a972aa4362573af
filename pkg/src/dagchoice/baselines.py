"""Comparison models: independent single choices, and MNL over a sampled choice set."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from .core import Bounds, ItemUniverse, Observation, ParameterVector, count_matrix, item_utilities
from .errors import ConfigurationError, DataError


def _check_items(obs: Observation, universe: ItemUniverse) -> None:
    for i in obs.items:
        if i >= universe.m:
            raise DataError(f"observation {obs.id}: unknown item id {i}")


def sc_base_probability(obs: Observation, universe: ItemUniverse, params: ParameterVector) -> float:
    """Product of single-item MNL probabilities over the whole universe.

    Bounds play no role; a count ``c`` contributes the item's probability ``c`` times.
    """
    _check_items(obs, universe)
    u = item_utilities(universe, params.beta) / params.mu
    logp = u - logsumexp(u)
    return float(np.exp(sum(c * logp[i] for i, c in obs.selections)))


@dataclass(frozen=True)
class SampledChoiceSet:
    """Deduplicated composites seen in a set of observations.

    ``provenance`` maps each composite key to the ids of the observations that
    contributed it; ``bounds`` maps it to every bounds pair it was seen under.
    """

    composites: tuple = ()
    provenance: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.composites)

    def __contains__(self, key) -> bool:
        if isinstance(key, Observation):
            key = key.key
        return key in self.provenance

    @staticmethod
    def size_of(key) -> int:
        return sum(c for _, c in key)

    def feasible_for(self, b: Bounds) -> list:
        """Composites whose total size lies within ``b``."""
        return [k for k in self.composites if self.size_of(k) in b]

    def count_matrix(self, m: int, b: Optional[Bounds] = None) -> np.ndarray:
        keys = self.composites if b is None else self.feasible_for(b)
        out = np.zeros((len(keys), m), dtype=np.int64)
        for r, key in enumerate(keys):
            for i, c in key:
                out[r, i] = c
        return out


def build_sampled_choice_set(observations: Sequence[Observation]) -> SampledChoiceSet:
    composites, provenance, bounds = [], {}, {}
    for obs in observations:
        key = obs.key
        if key not in provenance:
            composites.append(key)
            provenance[key] = []
            bounds[key] = []
        provenance[key].append(obs.id)
        if obs.bounds not in bounds[key]:
            bounds[key].append(obs.bounds)
    return SampledChoiceSet(
        tuple(composites),
        {k: tuple(v) for k, v in provenance.items()},
        {k: tuple(v) for k, v in bounds.items()},
    )


def mc_base_probability(obs: Observation, choice_set: SampledChoiceSet, universe: ItemUniverse,
                        params: ParameterVector) -> float:
    """Softmax over the composites of ``choice_set`` feasible for ``obs.bounds``; 0 if absent."""
    _check_items(obs, universe)
    if obs.key not in choice_set:
        return 0.0
    keys = choice_set.feasible_for(obs.bounds)
    u = choice_set.count_matrix(universe.m, obs.bounds) @ item_utilities(universe, params.beta) / params.mu
    return float(softmax(u)[keys.index(obs.key)])


# -- likelihood models -------------------------------------------------------


class SCBase:
    """Log-likelihood of independent single-item choices; concave in beta."""

    family = "sc-base"

    def __init__(self, universe: ItemUniverse, observations: Sequence[Observation], mu: float = 1.0):
        self.universe = universe
        self.observations = list(observations)
        self.mu = float(mu)
        self.counts = count_matrix(self.observations, universe.m)

    @property
    def n_params(self) -> int:
        return self.universe.n_attributes

    def loglik_obs(self, beta) -> np.ndarray:
        u = item_utilities(self.universe, beta) / self.mu
        return self.counts @ (u - logsumexp(u))

    def loglik(self, beta) -> float:
        return float(self.loglik_obs(beta).sum())

    def loglik_and_grad(self, beta):
        u = item_utilities(self.universe, beta) / self.mu
        p = softmax(u)
        x = self.universe.x
        n_draws = self.counts.sum(axis=0)
        ll = float(n_draws @ (u - logsumexp(u)))
        grad = (n_draws @ x - n_draws.sum() * (p @ x)) / self.mu
        return ll, grad

    def gradient(self, beta) -> np.ndarray:
        return self.loglik_and_grad(beta)[1]


class MCBase:
    """MNL over a sampled choice set, restricted per observation to feasible sizes."""

    family = "mc-base"

    def __init__(self, universe: ItemUniverse, observations: Sequence[Observation],
                 choice_set: Optional[SampledChoiceSet] = None, mu: float = 1.0):
        self.universe = universe
        self.observations = list(observations)
        self.mu = float(mu)
        self.choice_set = choice_set if choice_set is not None else build_sampled_choice_set(self.observations)
        self.missing_ids = [o.id for o in self.observations if o not in self.choice_set]
        counts = count_matrix(self.observations, universe.m)
        self.groups = []
        by_bounds = {}
        for n, obs in enumerate(self.observations):
            by_bounds.setdefault(obs.bounds, []).append(n)
        for b in sorted(by_bounds):
            idx = np.array(by_bounds[b], dtype=np.int64)
            present = np.array([self.observations[i] in self.choice_set for i in idx], dtype=bool)
            self.groups.append((idx, counts[idx], present, self.choice_set.count_matrix(universe.m, b)))

    @property
    def n_params(self) -> int:
        return self.universe.n_attributes

    def loglik_obs(self, beta) -> np.ndarray:
        v = item_utilities(self.universe, beta) / self.mu
        out = np.zeros(len(self.observations))
        for idx, counts, present, G in self.groups:
            norm = logsumexp(G @ v) if len(G) else -np.inf
            out[idx] = np.where(present, counts @ v - norm, -np.inf)
        return out

    def loglik(self, beta) -> float:
        return float(self.loglik_obs(beta).sum())

    def loglik_and_grad(self, beta):
        v = item_utilities(self.universe, beta) / self.mu
        x = self.universe.x
        ll = 0.0
        grad = np.zeros(self.n_params)
        for idx, counts, present, G in self.groups:
            if not present.all():
                return -np.inf, np.full(self.n_params, np.nan)
            u = G @ v
            p = softmax(u)
            ll += float(counts.sum(axis=0) @ v - len(idx) * logsumexp(u))
            grad += (counts.sum(axis=0) @ x - len(idx) * (p @ G @ x)) / self.mu
        return ll, grad

    def gradient(self, beta) -> np.ndarray:
        return self.loglik_and_grad(beta)[1]


def baseline_log_likelihood(model: str, observations: Sequence[Observation], universe: ItemUniverse,
                            params: ParameterVector, choice_set: Optional[SampledChoiceSet] = None) -> float:
    """Summed log-probability under ``"sc-base"`` or ``"mc-base"``.

    An observation with zero probability makes the result ``-inf``; the
    offending ids are named in a ``RuntimeWarning``.
    """
    if model == "sc-base":
        return SCBase(universe, observations, params.mu).loglik(params.beta)
    if model == "mc-base":
        if choice_set is None:
            raise ConfigurationError("mc-base needs a sampled choice set")
        mc = MCBase(universe, observations, choice_set, params.mu)
        if mc.missing_ids:
            warnings.warn(f"zero-probability observations under mc-base: {mc.missing_ids}", RuntimeWarning)
            return -np.inf
        return mc.loglik(params.beta)
    raise ConfigurationError(f"unknown baseline {model!r}")
