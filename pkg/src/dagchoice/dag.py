"""Tiered choice DAGs whose origin-destination paths are composite alternatives.

Nodes are ``p^c_j``: tier ``j`` (item ``j-1`` for ``1 <= j <= m``) and
running selection count ``c``. Node indices are assigned in ``(tier, count)``
lexicographic order, which is a topological order for every variant: arcs
either move to a later tier or, for the count variants, stay in the tier and
raise the count by one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Sequence

import numpy as np

from .core import Bounds, Observation
from .errors import ConfigurationError, MappingError

VARIANTS = ("bic", "muc", "bic-count", "muc-count")


class ArcKind(IntEnum):
    SKIP = 0
    SELECT = 1
    REPEAT = 2
    TERMINATE = 3


@dataclass(frozen=True)
class NodeId:
    tier: int
    count: int
    kind: str  # "origin" | "internal" | "destination"

    @property
    def label(self) -> str:
        if self.kind == "destination":
            return "d"
        return f"p^{self.count}_{self.tier}"


@dataclass(frozen=True)
class Arc:
    source: NodeId
    target: NodeId
    kind: ArcKind
    item: int  # -1 for skip / terminate


@dataclass(frozen=True)
class PathInDag:
    nodes: tuple  # node indices, origin first, destination last

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True, eq=False)
class Level:
    """Nodes at one height (longest arc-distance to the destination) and their arcs."""

    nodes: np.ndarray
    arcs: np.ndarray
    starts: np.ndarray  # segment offsets into ``arcs`` for np.*.reduceat
    segment: np.ndarray  # per-arc position of its source inside ``nodes``


class ChoiceDag:
    """Immutable tiered DAG for one ``(m, bounds, variant)`` configuration.

    Arcs are stored in CSR form sorted by source node: ``arc_src``,
    ``arc_dst``, ``arc_kind``, ``arc_item`` and ``out_start``.
    """

    def __init__(self, variant: str, m: int, bounds: Bounds, keys, arcs):
        self.variant = variant
        self.m = m
        self.bounds = bounds
        self.n_nodes = len(keys)
        self.node_tier = np.array([t for t, _ in keys], dtype=np.int64)
        self.node_count = np.array([c for _, c in keys], dtype=np.int64)
        self._index = {k: i for i, k in enumerate(keys)}
        self.origin = 0
        self.destination = self.n_nodes - 1

        arcs = sorted((self._index[s], self._index[t], int(kind), item) for s, t, kind, item in arcs)
        arr = np.array(arcs, dtype=np.int64).reshape(-1, 4)
        self.arc_src, self.arc_dst, self.arc_kind, self.arc_item = (arr[:, q].copy() for q in range(4))
        self.out_start = np.searchsorted(self.arc_src, np.arange(self.n_nodes + 1)).astype(np.int64)
        for a in (self.node_tier, self.node_count, self.arc_src, self.arc_dst,
                  self.arc_kind, self.arc_item, self.out_start):
            a.setflags(write=False)
        if np.any(self.arc_dst <= self.arc_src):
            raise AssertionError("node order is not topological")
        self._arc_lookup = {(s, t): a for a, (s, t) in enumerate(zip(self.arc_src.tolist(), self.arc_dst.tolist()))}

    # -- basic queries -------------------------------------------------

    @property
    def n_arcs(self) -> int:
        return int(self.arc_src.shape[0])

    def index(self, tier: int, count: int) -> int:
        try:
            return self._index[(tier, count)]
        except KeyError:
            raise MappingError(f"node p^{count}_{tier} does not exist in this DAG") from None

    def has_node(self, tier: int, count: int) -> bool:
        return (tier, count) in self._index

    def node(self, i: int) -> NodeId:
        t, c = int(self.node_tier[i]), int(self.node_count[i])
        if i == self.destination:
            kind = "destination"
        elif i == self.origin:
            kind = "origin"
        else:
            kind = "internal"
        return NodeId(t, c, kind)

    @property
    def nodes(self) -> list:
        return [self.node(i) for i in range(self.n_nodes)]

    def out_arcs(self, i: int) -> range:
        return range(int(self.out_start[i]), int(self.out_start[i + 1]))

    def arc(self, a: int) -> Arc:
        return Arc(self.node(int(self.arc_src[a])), self.node(int(self.arc_dst[a])),
                   ArcKind(int(self.arc_kind[a])), int(self.arc_item[a]))

    def arc_between(self, src: int, dst: int) -> int:
        try:
            return self._arc_lookup[(src, dst)]
        except KeyError:
            raise MappingError(
                f"no arc {self.node(src).label} -> {self.node(dst).label}"
            ) from None

    @cached_property
    def dead_ends(self) -> frozenset:
        """Non-destination nodes without outgoing arcs."""
        deg = np.diff(self.out_start)
        return frozenset(int(i) for i in np.flatnonzero(deg == 0) if i != self.destination)

    @cached_property
    def height(self) -> np.ndarray:
        """Longest arc-distance to the destination (0 for destination and dead ends)."""
        h = np.zeros(self.n_nodes, dtype=np.int64)
        src, dst = self.arc_src, self.arc_dst
        for i in range(self.n_nodes - 1, -1, -1):
            lo, hi = self.out_start[i], self.out_start[i + 1]
            if hi > lo:
                h[i] = 1 + h[dst[lo:hi]].max()
        h.setflags(write=False)
        return h

    @cached_property
    def levels(self) -> tuple:
        """Sweep schedule: levels of increasing height, each fully determined by lower ones."""
        out = []
        h = self.height
        deg = np.diff(self.out_start)
        for level in range(1, int(h.max()) + 1):
            nodes = np.flatnonzero((h == level) & (deg > 0))
            if nodes.size == 0:
                continue
            arcs = np.concatenate([np.arange(self.out_start[k], self.out_start[k + 1]) for k in nodes])
            seg_len = deg[nodes]
            starts = np.concatenate([[0], np.cumsum(seg_len)[:-1]])
            segment = np.repeat(np.arange(nodes.size), seg_len)
            out.append(Level(nodes, arcs, starts, segment))
        return tuple(out)

    @property
    def max_path_nodes(self) -> int:
        return int(self.height[self.origin]) + 1

    def __repr__(self):
        return (f"ChoiceDag(variant={self.variant!r}, m={self.m}, bounds={self.bounds}, "
                f"nodes={self.n_nodes}, arcs={self.n_arcs})")

    def to_dot(self) -> str:
        """Graphviz DOT dump; dashed edges carry zero utility."""
        lines = ["digraph choice_dag {", "  rankdir=LR;"]
        for i in range(self.n_nodes):
            lines.append(f'  n{i} [label="{self.node(i).label}"];')
        for a in range(self.n_arcs):
            kind = ArcKind(int(self.arc_kind[a]))
            style = "solid" if kind in (ArcKind.SELECT, ArcKind.REPEAT) else "dashed"
            label = f' label="s{self.arc_item[a] + 1}"' if style == "solid" else ""
            lines.append(f"  n{self.arc_src[a]} -> n{self.arc_dst[a]} [style={style}{label}];")
        lines.append("}")
        return "\n".join(lines)

    # -- subset <-> path -------------------------------------------------

    def _check_obs(self, obs: Observation) -> None:
        if obs.size not in self.bounds:
            raise MappingError(f"observation {obs.id}: size {obs.size} outside {self.bounds}")
        for i, c in obs.selections:
            if not 0 <= i < self.m:
                raise MappingError(f"observation {obs.id}: unknown item id {i}")
            if c > 1 and not self.variant.endswith("count"):
                raise MappingError(f"observation {obs.id}: repeated item {i} on plain DAG {self.variant}")

    def _node_keys_for(self, counts: Sequence[int]) -> list:
        m, dest = self.m, (self.m + 1, 0)
        keys = [(0, 0)]
        if self.variant == "bic":
            c = 0
            for j in range(1, m + 1):
                c += counts[j - 1]
                keys.append((j, c))
        elif self.variant == "muc":
            c = 0
            for j in range(1, m + 1):
                if counts[j - 1]:
                    c += 1
                    keys.append((j, c))
        elif self.variant == "bic-count":
            c = 0
            for j in range(1, m + 1):
                keys.append((j, c))
                for _ in range(counts[j - 1]):
                    c += 1
                    keys.append((j, c))
        else:  # muc-count
            c = 0
            for j in range(1, m + 1):
                for _ in range(counts[j - 1]):
                    c += 1
                    keys.append((j, c))
        keys.append(dest)
        return keys

    def subset_to_path(self, obs: Observation) -> PathInDag:
        self._check_obs(obs)
        keys = self._node_keys_for(obs.count_vector(self.m).tolist())
        nodes = tuple(self.index(t, c) for t, c in keys)
        for s, t in zip(nodes[:-1], nodes[1:]):
            self.arc_between(s, t)
        return PathInDag(nodes)

    def path_arcs(self, path: PathInDag) -> list:
        nodes = tuple(path.nodes)
        if not nodes or nodes[0] != self.origin or nodes[-1] != self.destination:
            raise MappingError("path must run from origin to destination")
        return [self.arc_between(s, t) for s, t in zip(nodes[:-1], nodes[1:])]

    def path_to_subset(self, path: PathInDag, id: str = "path") -> Observation:
        counts = {}
        for a in self.path_arcs(path):
            if self.arc_kind[a] in (ArcKind.SELECT, ArcKind.REPEAT):
                item = int(self.arc_item[a])
                counts[item] = counts.get(item, 0) + 1
        return Observation(id, self.bounds, tuple(counts.items()))

    def path_from_labels(self, labels: Sequence[tuple]) -> PathInDag:
        """Path from ``(tier, count)`` pairs; ``"d"`` stands for the destination."""
        nodes = []
        for key in labels:
            nodes.append(self.destination if key == "d" else self.index(*key))
        return PathInDag(tuple(nodes))

    def count_paths(self) -> int:
        """Exact number of origin-destination paths (single backward pass)."""
        n = [0] * self.n_nodes
        n[self.destination] = 1
        dst = self.arc_dst.tolist()
        start = self.out_start.tolist()
        for i in range(self.n_nodes - 2, -1, -1):
            n[i] = sum(n[dst[a]] for a in range(start[i], start[i + 1]))
        return n[self.origin]


# -- builders ------------------------------------------------------------


def _validate(m: int, bounds: Bounds, repeats: bool = False) -> None:
    if m < 1:
        raise ConfigurationError(f"need at least one item, got m={m}")
    if not isinstance(bounds, Bounds):
        raise ConfigurationError("bounds must be a Bounds instance")
    if not repeats:
        bounds.check(m)


def build_bic(m: int, bounds: Bounds) -> ChoiceDag:
    """Binary-choice DAG: one select/skip decision per item.

    Nodes that reach the upper bound keep skipping through the remaining
    tiers (zero-utility forced arcs) before terminating.
    """
    _validate(m, bounds)
    L, U = bounds.lower, bounds.upper
    keys = [(j, c) for j in range(m + 1) for c in range(min(j, U) + 1)] + [(m + 1, 0)]
    arcs = []
    for j in range(m):
        for c in range(min(j, U) + 1):
            arcs.append(((j, c), (j + 1, c), ArcKind.SKIP, -1))
            if c < U:
                arcs.append(((j, c), (j + 1, c + 1), ArcKind.SELECT, j))
    for c in range(min(m, U) + 1):
        if c >= L:
            arcs.append(((m, c), (m + 1, 0), ArcKind.TERMINATE, -1))
    return ChoiceDag("bic", m, bounds, keys, arcs)


def build_muc(m: int, bounds: Bounds) -> ChoiceDag:
    """Multi-choice DAG: each arc jumps straight to the next selected item."""
    _validate(m, bounds)
    L, U = bounds.lower, bounds.upper
    keys = [(0, 0)] + [(j, c) for j in range(1, m + 1) for c in range(1, min(j, U) + 1)] + [(m + 1, 0)]
    arcs = []
    for j, c in keys[:-1]:
        if c < U:
            for jn in range(j + 1, m + 1):
                arcs.append(((j, c), (jn, c + 1), ArcKind.SELECT, jn - 1))
        if c >= L:
            arcs.append(((j, c), (m + 1, 0), ArcKind.TERMINATE, -1))
    return ChoiceDag("muc", m, bounds, keys, arcs)


def build_bic_count(m: int, bounds: Bounds) -> ChoiceDag:
    """Binary-choice DAG with in-tier repeat arcs for multiple discrete counts."""
    _validate(m, bounds, repeats=True)
    L, U = bounds.lower, bounds.upper
    keys = [(0, 0)] + [(j, c) for j in range(1, m + 1) for c in range(U + 1)] + [(m + 1, 0)]
    arcs = [((0, 0), (1, 0), ArcKind.SKIP, -1)]
    for j in range(1, m + 1):
        for c in range(U + 1):
            if c < U:
                arcs.append(((j, c), (j, c + 1), ArcKind.REPEAT, j - 1))
            if j < m:
                arcs.append(((j, c), (j + 1, c), ArcKind.SKIP, -1))
            elif c >= L:
                arcs.append(((j, c), (m + 1, 0), ArcKind.TERMINATE, -1))
    return ChoiceDag("bic-count", m, bounds, keys, arcs)


def build_muc_count(m: int, bounds: Bounds) -> ChoiceDag:
    """Multi-choice DAG with in-tier repeat arcs for multiple discrete counts."""
    _validate(m, bounds, repeats=True)
    L, U = bounds.lower, bounds.upper
    keys = [(0, 0)] + [(j, c) for j in range(1, m + 1) for c in range(1, U + 1)] + [(m + 1, 0)]
    arcs = []
    for j, c in keys[:-1]:
        if c < U:
            if j > 0:
                arcs.append(((j, c), (j, c + 1), ArcKind.REPEAT, j - 1))
            for jn in range(j + 1, m + 1):
                arcs.append(((j, c), (jn, c + 1), ArcKind.SELECT, jn - 1))
        if c >= L:
            arcs.append(((j, c), (m + 1, 0), ArcKind.TERMINATE, -1))
    return ChoiceDag("muc-count", m, bounds, keys, arcs)


_BUILDERS = {
    "bic": build_bic,
    "muc": build_muc,
    "bic-count": build_bic_count,
    "muc-count": build_muc_count,
}


def build_dag(variant: str, m: int, bounds: Bounds) -> ChoiceDag:
    try:
        builder = _BUILDERS[variant]
    except KeyError:
        raise ConfigurationError(f"unknown DAG variant {variant!r}; expected one of {VARIANTS}") from None
    return builder(m, bounds)


def variant_name(dag: str, count_mode: bool) -> str:
    if dag not in ("bic", "muc"):
        raise ConfigurationError(f"unknown DAG {dag!r}; expected 'bic' or 'muc'")
    return f"{dag}-count" if count_mode else dag


def build_dags(variant: str, m: int, bounds_set) -> dict:
    """One DAG per distinct bounds, keyed by ``Bounds``."""
    return {b: build_dag(variant, m, b) for b in sorted(set(bounds_set))}


def bic_node_count_formula(m: int, U: int) -> float:
    return m + m * U - U**2 / 2 + U / 2 + 2


def muc_node_count_formula(m: int, U: int) -> float:
    return m * U - U**2 / 2 + U / 2 + 2


def bic_arc_count_formula(m: int, L: int, U: int) -> float:
    """Reference closed-form arc count; exceeds the built graph by ``m - U``."""
    return 2 * m + 2 * m * U - U**2 - L + 1


def muc_arc_count_formula(m: int, L: int, U: int) -> float:
    """Reference closed-form arc count; matches the built graph only when ``U = m`` and ``L >= 1``."""
    base = m**2 * U / 2 - m * U**2 / 2 + m * U + 2 * m + U**3 / 6 - U**2 / 2 + U / 3
    if L == 0:
        return base + 2
    return base - m * L + L**2 / 2 - 3 * L / 2 + 1
