"""Recursive logit on choice DAGs.

Value functions are obtained by one backward sweep over the DAG's height
levels with a per-node log-sum-exp. Because the graph is acyclic this is the
exact fixed point of ``(I - M) z = b`` (the same answer value iteration
reaches after at most ``height(origin) + 1`` synchronous passes), but it never
leaves the log domain. ``solve_value_linear`` and ``value_iteration`` are the
literal linear-system routes, kept as independent cross-checks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from .core import Bounds, ItemUniverse, Observation, count_matrix, item_utilities
from .dag import ArcKind, ChoiceDag, PathInDag, build_dags
from .errors import DataError, MappingError, ModelError

NEG_INF = -np.inf


def arc_utilities(dag: ChoiceDag, item_utils) -> np.ndarray:
    """Per-arc utility: ``v_i`` on select/repeat arcs, 0 on skip/terminate arcs."""
    v = np.append(np.asarray(item_utils, dtype=float), 0.0)
    return v[dag.arc_item]


def arc_features(dag: ChoiceDag, x) -> np.ndarray:
    """(A, K) attribute rows per arc; zero rows for skip/terminate arcs."""
    x = np.asarray(x, dtype=float)
    return np.vstack([x, np.zeros((1, x.shape[1]))])[dag.arc_item]


@dataclass(frozen=True, eq=False)
class ValueTable:
    """Value function ``V`` per node together with the inputs that produced it.

    ``mu`` is a scalar for plain RL and a per-node array for nested RL.
    """

    V: np.ndarray
    arc_utils: np.ndarray
    mu: object = 1.0

    def source_scale(self, dag: ChoiceDag) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.mu, dtype=float), (dag.n_nodes,))[dag.arc_src]

    @property
    def z(self) -> np.ndarray:
        return np.exp(self.V / self.mu)

    def at(self, dag: ChoiceDag, tier: int, count: int) -> float:
        return float(self.V[dag.index(tier, count)])


def _segment_logsumexp(s: np.ndarray, starts: np.ndarray, segment: np.ndarray) -> np.ndarray:
    mx = np.maximum.reduceat(s, starts)
    shift = np.where(np.isfinite(mx), mx, 0.0)
    total = np.add.reduceat(np.exp(s - shift[segment]), starts)
    with np.errstate(divide="ignore"):
        return shift + np.log(total)


def sweep_values(dag: ChoiceDag, arc_utils: np.ndarray, node_scale: np.ndarray) -> np.ndarray:
    """Backward log-sum-exp sweep with per-node scales (constant for plain RL)."""
    V = np.full(dag.n_nodes, NEG_INF)
    V[dag.destination] = 0.0
    for lvl in dag.levels:
        mu_src = node_scale[dag.arc_src[lvl.arcs]]
        s = (arc_utils[lvl.arcs] + V[dag.arc_dst[lvl.arcs]]) / mu_src
        V[lvl.nodes] = node_scale[lvl.nodes] * _segment_logsumexp(s, lvl.starts, lvl.segment)
    return V


def solve_value(dag: ChoiceDag, arc_utils, mu: float = 1.0) -> ValueTable:
    arc_utils = np.asarray(arc_utils, dtype=float)
    V = sweep_values(dag, arc_utils, np.full(dag.n_nodes, float(mu)))
    if not np.isfinite(V[dag.origin]):
        raise ModelError(f"{dag!r} has no feasible origin-destination path")
    return ValueTable(V, arc_utils, float(mu))


def arc_probabilities(dag: ChoiceDag, table: ValueTable) -> np.ndarray:
    """``P(a|k)`` for every arc; 0 for arcs out of or into dead nodes."""
    V = table.V
    src_ok = np.isfinite(V[dag.arc_src])
    with np.errstate(invalid="ignore"):
        logp = (table.arc_utils + V[dag.arc_dst] - V[dag.arc_src]) / table.source_scale(dag)
    return np.where(src_ok, np.exp(np.where(src_ok, logp, NEG_INF)), 0.0)


def arc_probability(dag: ChoiceDag, table: ValueTable, arc: int) -> float:
    src = int(dag.arc_src[arc])
    if not np.isfinite(table.V[src]):
        raise ModelError(f"arc probability undefined at dead node {dag.node(src).label}")
    mu = table.source_scale(dag)[arc]
    return float(np.exp((table.arc_utils[arc] + table.V[dag.arc_dst[arc]] - table.V[src]) / mu))


def path_probability(dag: ChoiceDag, table: ValueTable, path: PathInDag) -> float:
    """Product of arc probabilities along ``path``."""
    arcs = dag.path_arcs(path)
    return float(np.prod([arc_probability(dag, table, a) for a in arcs]))


# -- batched path utilities ------------------------------------------------


def paths_for_counts(dag: ChoiceDag, counts) -> np.ndarray:
    """Node-index paths for each row of an (N, m) count matrix.

    Rows are padded on the right with the destination index.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n, m = counts.shape
    if m != dag.m:
        raise MappingError(f"count matrix has {m} columns, DAG has m={dag.m}")
    out = np.full((n, dag.max_path_nodes), dag.destination, dtype=np.int64)
    out[:, 0] = dag.origin
    if dag.variant in ("bic", "muc"):
        sizes = counts.sum(axis=1)
        if np.any(counts > 1) or np.any(counts < 0):
            raise MappingError("plain DAG variants need 0/1 selections")
        bad = (sizes < dag.bounds.lower) | (sizes > dag.bounds.upper)
        if np.any(bad):
            raise MappingError(f"{int(bad.sum())} subsets have sizes outside {dag.bounds}")
        lookup = np.full((dag.m + 2, dag.m + 1), -1, dtype=np.int64)
        lookup[dag.node_tier, dag.node_count] = np.arange(dag.n_nodes)
        cum = np.cumsum(counts, axis=1)
        if dag.variant == "bic":
            out[:, 1:m + 1] = lookup[np.arange(1, m + 1)[None, :], cum]
        else:
            rows = np.arange(n)
            for j in range(m):
                sel = counts[:, j] > 0
                out[rows[sel], cum[sel, j]] = lookup[j + 1, cum[sel, j]]
        return out
    for r in range(n):
        obs = Observation(str(r), dag.bounds, tuple((i, int(c)) for i, c in enumerate(counts[r]) if c))
        nodes = dag.subset_to_path(obs).nodes
        out[r, :len(nodes)] = nodes
    return out


def path_log_probabilities(dag: ChoiceDag, table: ValueTable, paths: np.ndarray) -> np.ndarray:
    """Log-probability of each padded path produced by ``paths_for_counts``."""
    paths = np.asarray(paths, dtype=np.int64)
    with np.errstate(divide="ignore"):
        logp_arc = np.log(arc_probabilities(dag, table))
    src, dst = paths[:, :-1], paths[:, 1:]
    pad = src == dag.destination
    keys = dag.arc_src * dag.n_nodes + dag.arc_dst
    q = src * dag.n_nodes + dst
    pos = np.clip(np.searchsorted(keys, q), 0, max(len(keys) - 1, 0))
    found = keys[pos] == q
    if np.any(~found & ~pad):
        raise MappingError("path uses an arc that does not exist")
    return np.where(pad, 0.0, logp_arc[pos]).sum(axis=1)


# -- gradients -------------------------------------------------------------


def value_gradient(dag: ChoiceDag, table: ValueTable, features: np.ndarray) -> np.ndarray:
    """dV/dbeta per node, (n_nodes, K), by the forward-sensitivity sweep.

    ``dV(k) = sum_a P(a|k) (x_{a|k} + dV(a))``, evaluated level by level.
    """
    K = features.shape[1]
    dV = np.zeros((dag.n_nodes, K))
    P = arc_probabilities(dag, table)
    for lvl in dag.levels:
        arcs = lvl.arcs
        contrib = P[arcs, None] * (features[arcs] + dV[dag.arc_dst[arcs]])
        dV[lvl.nodes] = np.add.reduceat(contrib, lvl.starts, axis=0)
    return dV


# -- literal linear-system routes ------------------------------------------


def transition_matrix(dag: ChoiceDag, arc_utils, mu: float = 1.0) -> sp.csr_matrix:
    """Sparse ``M`` with ``M[k, a] = exp(v(a|k) / mu)`` for every arc."""
    data = np.exp(np.asarray(arc_utils, dtype=float) / mu)
    return sp.csr_matrix((data, (dag.arc_src, dag.arc_dst)), shape=(dag.n_nodes, dag.n_nodes))


def _rhs(dag: ChoiceDag) -> np.ndarray:
    b = np.zeros(dag.n_nodes)
    b[dag.destination] = 1.0
    return b


def solve_value_linear(dag: ChoiceDag, arc_utils, mu: float = 1.0) -> np.ndarray:
    """``z`` from ``(I - M) z = b``; ``I - M`` is unit upper triangular in node order."""
    A = (sp.identity(dag.n_nodes, format="csr") - transition_matrix(dag, arc_utils, mu)).tocsr()
    return spsolve_triangular(A, _rhs(dag), lower=False)


def value_gradient_linear(dag: ChoiceDag, arc_utils, features, mu: float = 1.0) -> np.ndarray:
    """dV/dbeta from ``dz = (I - M)^{-1} (dM) z`` and ``dV = mu dz / z``."""
    arc_utils = np.asarray(arc_utils, dtype=float)
    M = transition_matrix(dag, arc_utils, mu)
    A = (sp.identity(dag.n_nodes, format="csr") - M).tocsr()
    z = spsolve_triangular(A, _rhs(dag), lower=False)
    weights = np.exp(arc_utils / mu) / mu
    out = np.zeros((dag.n_nodes, features.shape[1]))
    for q in range(features.shape[1]):
        dM = sp.csr_matrix((weights * features[:, q], (dag.arc_src, dag.arc_dst)), shape=M.shape)
        dz = spsolve_triangular(A, dM @ z, lower=False)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[:, q] = np.where(z > 0, mu * dz / z, 0.0)
    return out


def value_iteration(dag: ChoiceDag, arc_utils, z0, n_iter: int, mu: float = 1.0) -> list:
    """Synchronous iterates ``z^{t+1} = M z^t + b``; returns ``[z^0, ..., z^n_iter]``."""
    M = transition_matrix(dag, arc_utils, mu)
    b = _rhs(dag)
    zs = [np.asarray(z0, dtype=float)]
    for _ in range(n_iter):
        zs.append(M @ zs[-1] + b)
    return zs


# -- sampling ----------------------------------------------------------------


def sample_counts(dag: ChoiceDag, table: ValueTable, n: int, rng) -> np.ndarray:
    """(n, m) count matrix of i.i.d. path draws by sequential arc choice."""
    rng = np.random.default_rng(rng)
    counts = np.zeros((n, dag.m), dtype=np.int64)
    if n == 0:
        return counts
    P = arc_probabilities(dag, table)
    cum = np.zeros(dag.n_arcs)
    for k in range(dag.n_nodes):
        lo, hi = dag.out_start[k], dag.out_start[k + 1]
        if hi > lo:
            c = np.cumsum(P[lo:hi])
            c /= c[-1] if c[-1] > 0 else 1.0
            c[-1] = 1.0
            cum[lo:hi] = c
    keys = dag.arc_src + cum
    state = np.full(n, dag.origin, dtype=np.int64)
    for _ in range(dag.max_path_nodes - 1):
        active = np.flatnonzero(state != dag.destination)
        if active.size == 0:
            break
        u = rng.random(active.size)
        arcs = np.searchsorted(keys, state[active] + u, side="right")
        items = dag.arc_item[arcs]
        sel = items >= 0
        np.add.at(counts, (active[sel], items[sel]), 1)
        state[active] = dag.arc_dst[arcs]
    return counts


def sample_paths(dag: ChoiceDag, table: ValueTable, n: int, rng_seed=None, prefix: str = "s") -> list:
    """``n`` observations drawn from the path distribution of ``table``."""
    counts = sample_counts(dag, table, n, rng_seed)
    return [
        Observation(f"{prefix}{r}", dag.bounds, tuple((int(i), int(row[i])) for i in np.flatnonzero(row)))
        for r, row in enumerate(counts)
    ]


# -- likelihood ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Group:
    bounds: Bounds
    dag: ChoiceDag
    index: np.ndarray  # observation positions
    x_obs: np.ndarray  # (n_g, K) summed attributes per observation
    features: np.ndarray  # (A, K) arc features


def group_by_bounds(observations: Sequence[Observation]) -> dict:
    groups = {}
    for n, obs in enumerate(observations):
        groups.setdefault(obs.bounds, []).append(n)
    return {b: np.array(groups[b], dtype=np.int64) for b in sorted(groups)}


def check_feasible(dag: ChoiceDag, observations) -> None:
    for obs in observations:
        try:
            dag._check_obs(obs)
        except MappingError as exc:
            raise DataError(str(exc)) from None


class RecursiveLogit:
    """Log-likelihood and gradient of the RL model over a fixed data set.

    Observations are grouped by bounds; each group shares one DAG and one
    value table per evaluation. Group results are summed in bounds order.
    """

    def __init__(self, universe: ItemUniverse, observations: Sequence[Observation],
                 variant: str = "bic", mu: float = 1.0, dags: Optional[dict] = None,
                 threads: int = 1):
        self.universe = universe
        self.observations = list(observations)
        self.variant = variant
        self.mu = float(mu)
        self.threads = max(1, int(threads))
        x = universe.x
        counts = count_matrix(self.observations, universe.m)
        x_obs = counts @ x
        index = group_by_bounds(self.observations)
        dags = dict(dags) if dags else {}
        self.groups = []
        for b, idx in index.items():
            dag = dags.get(b) or build_dags(variant, universe.m, [b])[b]
            check_feasible(dag, (self.observations[i] for i in idx))
            self.groups.append(_Group(b, dag, idx, x_obs[idx], arc_features(dag, x)))
        self.dags = {g.bounds: g.dag for g in self.groups}

    @property
    def n_params(self) -> int:
        return self.universe.n_attributes

    def _map(self, fn):
        if self.threads > 1 and len(self.groups) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                return list(pool.map(fn, self.groups))
        return [fn(g) for g in self.groups]

    def _group_eval(self, beta, grad: bool):
        v = item_utilities(self.universe, beta)

        def run(g: _Group):
            table = solve_value(g.dag, arc_utilities(g.dag, v), self.mu)
            v0 = table.V[g.dag.origin]
            ll = (g.x_obs.sum(axis=0) @ beta - len(g.index) * v0) / self.mu
            if not grad:
                return ll, None
            dV = value_gradient(g.dag, table, g.features)[g.dag.origin]
            return ll, (g.x_obs.sum(axis=0) - len(g.index) * dV) / self.mu

        return self._map(run)

    def loglik(self, beta) -> float:
        beta = np.asarray(beta, dtype=float)
        return float(sum(ll for ll, _ in self._group_eval(beta, False)))

    def loglik_and_grad(self, beta):
        beta = np.asarray(beta, dtype=float)
        res = self._group_eval(beta, True)
        ll = float(sum(r[0] for r in res))
        g = np.zeros(self.n_params)
        for _, gg in res:
            g += gg
        return ll, g

    def gradient(self, beta) -> np.ndarray:
        return self.loglik_and_grad(beta)[1]

    def loglik_obs(self, beta) -> np.ndarray:
        """Per-observation log-likelihood, in input order."""
        beta = np.asarray(beta, dtype=float)
        v = item_utilities(self.universe, beta)
        out = np.zeros(len(self.observations))
        for g in self.groups:
            table = solve_value(g.dag, arc_utilities(g.dag, v), self.mu)
            out[g.index] = (g.x_obs @ beta - table.V[g.dag.origin]) / self.mu
        return out


def log_likelihood(dags_by_bounds: dict, universe: ItemUniverse, observations, params) -> float:
    """Sum over observations of ``(v(path) - V(origin)) / mu``."""
    if not observations:
        return 0.0
    variant = next(iter(dags_by_bounds.values())).variant if dags_by_bounds else "bic"
    model = RecursiveLogit(universe, observations, variant, params.mu, dags_by_bounds)
    return model.loglik(params.beta)


def log_likelihood_gradient(dags_by_bounds: dict, universe: ItemUniverse, observations, params) -> np.ndarray:
    if not observations:
        return np.zeros(universe.n_attributes)
    variant = next(iter(dags_by_bounds.values())).variant if dags_by_bounds else "bic"
    model = RecursiveLogit(universe, observations, variant, params.mu, dags_by_bounds)
    return model.gradient(params.beta)
