"""Nested recursive logit: node-varying scales ``mu_k = exp(gamma . w_k)``.

The value recursion ``V(k) = mu_k * logsumexp((v(a|k) + V(a)) / mu_k)`` is
solved by the same backward level sweep as plain RL. Gradients with respect
to both utility and scale coefficients come from reverse-mode
differentiation of that finite sweep.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ItemUniverse, Observation, ParameterVector, count_matrix, item_utilities
from .dag import ChoiceDag, NodeId, PathInDag, build_dags
from .errors import ConfigurationError, DataError, MappingError, ModelError
from .recursive_logit import (
    ValueTable,
    arc_features,
    arc_probabilities,
    arc_utilities,
    check_feasible,
    group_by_bounds,
    path_probability,
    sweep_values,
)

SPECIAL_SELECTORS = ("const", "count")


@dataclass(frozen=True)
class ScaleSpec:
    """Which node attributes enter the scale function.

    Selectors are ``"const"`` (always 1), ``"count"`` (selection count ``c``
    at the node) or the name of an item attribute, read from the item that
    owns the node's tier (0 at the origin and destination).
    """

    selectors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "selectors", tuple(self.selectors))

    @classmethod
    def parse(cls, text: str) -> "ScaleSpec":
        parts = [p.strip() for p in (text or "").split(",") if p.strip()]
        return cls(tuple(parts))

    @property
    def size(self) -> int:
        return len(self.selectors)

    def validate(self, universe: ItemUniverse) -> None:
        for sel in self.selectors:
            if sel not in SPECIAL_SELECTORS and sel not in universe.attribute_names:
                raise ConfigurationError(
                    f"unknown scale attribute {sel!r}; choose from "
                    f"{SPECIAL_SELECTORS + universe.attribute_names}"
                )

    @property
    def count_only(self) -> bool:
        return all(s in SPECIAL_SELECTORS for s in self.selectors)


def _node_features(tier: int, count: int, m: int, spec: ScaleSpec, universe: ItemUniverse) -> np.ndarray:
    row = np.zeros(spec.size)
    for g, sel in enumerate(spec.selectors):
        if sel == "const":
            row[g] = 1.0
        elif sel == "count":
            row[g] = count
        elif 1 <= tier <= m:
            row[g] = universe.x[tier - 1, universe.attribute_names.index(sel)]
    return row


def scale_features(dag: ChoiceDag, spec: ScaleSpec, universe: ItemUniverse) -> np.ndarray:
    """(n_nodes, G) scale attribute matrix."""
    spec.validate(universe)
    W = np.zeros((dag.n_nodes, spec.size))
    for g, sel in enumerate(spec.selectors):
        if sel == "const":
            W[:, g] = 1.0
        elif sel == "count":
            W[:, g] = dag.node_count
        else:
            col = np.append(0.0, universe.x[:, universe.attribute_names.index(sel)])
            tier = dag.node_tier.copy()
            tier[(tier < 1) | (tier > dag.m)] = 0
            W[:, g] = col[tier]
    return W


def node_scale(node: NodeId, spec: ScaleSpec, universe: ItemUniverse, gamma, m: Optional[int] = None) -> float:
    spec.validate(universe)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (spec.size,):
        raise ConfigurationError(f"gamma has shape {gamma.shape}, scale spec needs {spec.size}")
    m = universe.m if m is None else m
    return float(np.exp(_node_features(node.tier, node.count, m, spec, universe) @ gamma))


def node_scales(dag: ChoiceDag, spec: ScaleSpec, universe: ItemUniverse, gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (spec.size,):
        raise ConfigurationError(f"gamma has shape {gamma.shape}, scale spec needs {spec.size}")
    return np.exp(scale_features(dag, spec, universe) @ gamma)


def solve_nested_value(dag: ChoiceDag, arc_utils, scales) -> ValueTable:
    scales = np.asarray(scales, dtype=float)
    if scales.shape != (dag.n_nodes,) or np.any(~(scales > 0)):
        raise ConfigurationError("scales must be positive, one per node")
    arc_utils = np.asarray(arc_utils, dtype=float)
    V = sweep_values(dag, arc_utils, scales)
    if not np.isfinite(V[dag.origin]):
        raise ModelError(f"{dag!r} has no feasible origin-destination path")
    return ValueTable(V, arc_utils, scales)


def nested_path_probability(dag: ChoiceDag, table: ValueTable, path: PathInDag) -> float:
    return path_probability(dag, table, path)


def nested_value_iteration(dag: ChoiceDag, arc_utils, scales, y0, n_iter: int) -> list:
    """Synchronous iterates of ``z_k = sum_a M_ka z_a^(mu_a/mu_k) + b_k`` in log form.

    Works on ``y = log z`` so the start vector is any real vector; returns
    the value functions ``V = mu * y`` for iterations ``0..n_iter``.
    """
    arc_utils = np.asarray(arc_utils, dtype=float)
    scales = np.asarray(scales, dtype=float)
    src, dst = dag.arc_src, dag.arc_dst
    ratio = scales[dst] / scales[src]
    logM = arc_utils / scales[src]
    y = np.asarray(y0, dtype=float).copy()
    out = [scales * y]
    for _ in range(n_iter):
        s = logM + ratio * y[dst]
        new = np.full(dag.n_nodes, -np.inf)
        for k in range(dag.n_nodes):
            lo, hi = dag.out_start[k], dag.out_start[k + 1]
            if hi > lo:
                seg = s[lo:hi]
                mx = seg.max()
                new[k] = mx + np.log(np.exp(seg - mx).sum()) if np.isfinite(mx) else -np.inf
        new[dag.destination] = 0.0
        y = new
        out.append(scales * y)
    return out


# -- likelihood ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _NestedGroup:
    dag: ChoiceDag
    index: np.ndarray
    arc_use: np.ndarray  # (n_g, A) sparse-ish usage, kept dense per group
    features: np.ndarray
    W: np.ndarray


def _arc_usage(dag: ChoiceDag, observations: Sequence[Observation], m: int) -> np.ndarray:
    """(N, A) matrix of arc traversal counts for each observation's path."""
    from .recursive_logit import paths_for_counts

    counts = count_matrix(observations, m)
    paths = paths_for_counts(dag, counts)
    src, dst = paths[:, :-1], paths[:, 1:]
    keys = dag.arc_src * dag.n_nodes + dag.arc_dst
    q = src * dag.n_nodes + dst
    pad = src == dag.destination
    pos = np.clip(np.searchsorted(keys, q), 0, dag.n_arcs - 1)
    if np.any((keys[pos] != q) & ~pad):
        raise MappingError("observation path uses a missing arc")
    use = np.zeros((len(observations), dag.n_arcs))
    rows = np.broadcast_to(np.arange(len(observations))[:, None], pos.shape)
    np.add.at(use, (rows[~pad], pos[~pad]), 1.0)
    return use


class NestedRecursiveLogit:
    """Nested RL log-likelihood and gradient for parameters ``theta = [beta, gamma]``."""

    def __init__(self, universe: ItemUniverse, observations: Sequence[Observation],
                 variant: str, scale_spec: ScaleSpec, dags: Optional[dict] = None):
        scale_spec.validate(universe)
        self.universe = universe
        self.observations = list(observations)
        self.variant = variant
        self.scale_spec = scale_spec
        dags = dict(dags) if dags else {}
        self.groups = []
        for b, idx in group_by_bounds(self.observations).items():
            dag = dags.get(b) or build_dags(variant, universe.m, [b])[b]
            obs = [self.observations[i] for i in idx]
            check_feasible(dag, obs)
            self.groups.append(_NestedGroup(
                dag, idx, _arc_usage(dag, obs, universe.m),
                arc_features(dag, universe.x), scale_features(dag, scale_spec, universe),
            ))
        self.dags = {g.dag.bounds: g.dag for g in self.groups}

    @property
    def n_beta(self) -> int:
        return self.universe.n_attributes

    @property
    def n_params(self) -> int:
        return self.n_beta + self.scale_spec.size

    def split(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ConfigurationError(f"theta has shape {theta.shape}, expected ({self.n_params},)")
        return theta[:self.n_beta], theta[self.n_beta:]

    def _solve(self, g: _NestedGroup, v, gamma) -> ValueTable:
        mu = np.exp(g.W @ gamma)
        return solve_nested_value(g.dag, arc_utilities(g.dag, v), mu)

    def loglik_obs(self, theta) -> np.ndarray:
        beta, gamma = self.split(theta)
        v = item_utilities(self.universe, beta)
        out = np.zeros(len(self.observations))
        for g in self.groups:
            table = self._solve(g, v, gamma)
            with np.errstate(divide="ignore"):
                logp = np.log(arc_probabilities(g.dag, table))
            logp = np.where(np.isfinite(logp), logp, 0.0)
            out[g.index] = g.arc_use @ logp
        return out

    def loglik(self, theta) -> float:
        return float(self.loglik_obs(theta).sum())

    def loglik_and_grad(self, theta):
        beta, gamma = self.split(theta)
        v = item_utilities(self.universe, beta)
        ll = 0.0
        grad = np.zeros(self.n_params)
        for g in self.groups:
            table = self._solve(g, v, gamma)
            gl, gb, gg = _reverse_sweep(g.dag, table, g.arc_use.sum(axis=0), g.features, g.W)
            ll += gl
            grad[:self.n_beta] += gb
            grad[self.n_beta:] += gg
        return float(ll), grad

    def gradient(self, theta) -> np.ndarray:
        return self.loglik_and_grad(theta)[1]


def _reverse_sweep(dag: ChoiceDag, table: ValueTable, weight: np.ndarray, features, W):
    """Log-likelihood of weighted arc usage and its gradient in (beta, gamma)."""
    V, u, mu = table.V, table.arc_utils, np.asarray(table.mu, dtype=float)
    src, dst = dag.arc_src, dag.arc_dst
    used = weight > 0
    mu_src = mu[src]
    w = weight[used]
    term = (u[used] + V[dst[used]] - V[src[used]]) / mu_src[used]
    ll = float(w @ term)

    gV = np.zeros(dag.n_nodes)
    gu = np.zeros(dag.n_arcs)
    gmu = np.zeros(dag.n_nodes)
    np.add.at(gV, dst[used], w / mu_src[used])
    np.add.at(gV, src[used], -w / mu_src[used])
    gu[used] += w / mu_src[used]
    np.add.at(gmu, src[used], -w * term / mu_src[used])

    P = arc_probabilities(dag, table)
    with np.errstate(invalid="ignore"):
        uv = np.where(P > 0, u + V[dst], 0.0)
    for lvl in reversed(dag.levels):
        nodes, arcs = lvl.nodes, lvl.arcs
        finite = np.isfinite(V[nodes])
        adj = np.where(finite, gV[nodes], 0.0)
        a_arc = adj[lvl.segment] * P[arcs]
        np.add.at(gV, dst[arcs], a_arc)
        gu[arcs] += a_arc
        expect = np.add.reduceat(P[arcs] * uv[arcs], lvl.starts)
        Vk = np.where(finite, V[nodes], 0.0)
        gmu[nodes] += adj * (Vk - expect) / mu[nodes]
    return ll, features.T @ gu, W.T @ (gmu * mu)


def nested_log_likelihood(dags: dict, universe: ItemUniverse, observations, params: ParameterVector,
                          scale_spec: ScaleSpec) -> float:
    if not observations:
        return 0.0
    variant = next(iter(dags.values())).variant
    model = NestedRecursiveLogit(universe, observations, variant, scale_spec, dags)
    return model.loglik(_theta(params, scale_spec))


def nested_log_likelihood_gradient(dags: dict, universe: ItemUniverse, observations,
                                   params: ParameterVector, scale_spec: ScaleSpec) -> np.ndarray:
    variant = next(iter(dags.values())).variant
    model = NestedRecursiveLogit(universe, observations, variant, scale_spec, dags)
    return model.gradient(_theta(params, scale_spec))


def _theta(params: ParameterVector, spec: ScaleSpec) -> np.ndarray:
    gamma = params.gamma if params.gamma is not None else np.zeros(spec.size)
    if len(gamma) != spec.size:
        raise ConfigurationError(f"gamma has length {len(gamma)}, scale spec needs {spec.size}")
    return np.concatenate([params.beta, gamma])
