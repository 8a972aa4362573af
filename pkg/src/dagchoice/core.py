"""Domain types: items, parameters, bounds and observations."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DataError


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Item:
    id: int
    attributes: np.ndarray
    name: str = ""

    def __post_init__(self):
        attrs = _frozen_array(self.attributes).reshape(-1)
        if not np.all(np.isfinite(attrs)):
            raise DataError(f"item {self.id}: non-finite attribute value")
        object.__setattr__(self, "attributes", attrs)
        if not self.name:
            object.__setattr__(self, "name", str(self.id))


@dataclass(frozen=True)
class ItemUniverse:
    """The m elemental alternatives and their attribute matrix.

    ``items[i].id == i`` always holds; external labels live in ``Item.name``.
    """

    items: tuple
    attribute_names: tuple

    def __post_init__(self):
        items = tuple(self.items)
        names = tuple(str(a) for a in self.attribute_names)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "attribute_names", names)
        for i, item in enumerate(items):
            if item.id != i:
                raise DataError(f"item ids must be dense in [0, m); position {i} has id {item.id}")
            if item.attributes.shape[0] != len(names):
                raise DataError(
                    f"item {i} has {item.attributes.shape[0]} attributes, expected {len(names)}"
                )
        labels = [it.name for it in items]
        if len(set(labels)) != len(labels):
            raise DataError("item names must be unique")
        x = np.zeros((len(items), len(names)))
        for it in items:
            x[it.id] = it.attributes
        x.setflags(write=False)
        object.__setattr__(self, "_x", x)
        object.__setattr__(self, "_by_name", {it.name: it.id for it in items})

    @classmethod
    def from_matrix(cls, x, attribute_names=None, names=None) -> "ItemUniverse":
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise DataError("attribute matrix must be two-dimensional")
        m, k = x.shape
        attribute_names = attribute_names or [f"x{q}" for q in range(k)]
        names = names or [str(i) for i in range(m)]
        return cls(
            items=tuple(Item(i, x[i], str(names[i])) for i in range(m)),
            attribute_names=tuple(attribute_names),
        )

    @property
    def m(self) -> int:
        return len(self.items)

    @property
    def n_attributes(self) -> int:
        return len(self.attribute_names)

    @property
    def x(self) -> np.ndarray:
        """(m, K) attribute matrix."""
        return self._x

    def index_of(self, name: str) -> int:
        try:
            return self._by_name[str(name)]
        except KeyError:
            raise DataError(f"unknown item {name!r}") from None

    def permuted(self, order: Sequence[int]) -> "ItemUniverse":
        """Universe whose item ``j`` is the old item ``order[j]``."""
        order = list(order)
        if sorted(order) != list(range(self.m)):
            raise ConfigurationError("order must be a permutation of range(m)")
        return ItemUniverse.from_matrix(
            self.x[order], self.attribute_names, [self.items[i].name for i in order]
        )


@dataclass(frozen=True)
class ParameterVector:
    beta: np.ndarray
    gamma: Optional[np.ndarray] = None
    mu: float = 1.0

    def __post_init__(self):
        beta = _frozen_array(self.beta).reshape(-1)
        if not np.all(np.isfinite(beta)):
            raise ConfigurationError("beta must be finite")
        object.__setattr__(self, "beta", beta)
        if self.gamma is not None:
            gamma = _frozen_array(self.gamma).reshape(-1)
            if not np.all(np.isfinite(gamma)):
                raise ConfigurationError("gamma must be finite")
            object.__setattr__(self, "gamma", gamma)
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ConfigurationError(f"mu must be positive and finite, got {self.mu}")


@dataclass(frozen=True, order=True)
class Bounds:
    lower: int
    upper: int

    def __post_init__(self):
        if int(self.lower) != self.lower or int(self.upper) != self.upper:
            raise ConfigurationError("bounds must be integers")
        object.__setattr__(self, "lower", int(self.lower))
        object.__setattr__(self, "upper", int(self.upper))
        if self.lower < 0 or self.upper < 1 or self.lower > self.upper:
            raise ConfigurationError(
                f"invalid bounds [{self.lower}, {self.upper}]: need 0 <= L <= U and U >= 1"
            )

    def check(self, m: int) -> None:
        if self.upper > m:
            raise ConfigurationError(f"bounds [{self.lower}, {self.upper}] exceed m={m}")

    def __contains__(self, size: int) -> bool:
        return self.lower <= size <= self.upper

    def __str__(self) -> str:
        return f"[{self.lower},{self.upper}]"


@dataclass(frozen=True)
class Observation:
    """A chosen composite alternative.

    ``selections`` is a sorted tuple of ``(item_id, count)`` pairs. Plain
    subsets carry count 1 for every selected item.
    """

    id: str
    bounds: Bounds
    selections: tuple = field(default=())

    def __post_init__(self):
        sel = tuple(sorted((int(i), int(c)) for i, c in self.selections))
        ids = [i for i, _ in sel]
        if len(set(ids)) != len(ids):
            raise DataError(f"observation {self.id}: duplicate item ids")
        if any(c < 1 for _, c in sel):
            raise DataError(f"observation {self.id}: counts must be >= 1")
        if any(i < 0 for i in ids):
            raise DataError(f"observation {self.id}: negative item id")
        object.__setattr__(self, "selections", sel)
        if self.size not in self.bounds:
            raise DataError(
                f"observation {self.id}: total count {self.size} outside bounds {self.bounds}"
            )

    @classmethod
    def from_items(cls, id, bounds: Bounds, items: Iterable[int]) -> "Observation":
        """Build from a flat item list; repeated ids become counts."""
        return cls(str(id), bounds, tuple(Counter(int(i) for i in items).items()))

    @property
    def size(self) -> int:
        return sum(c for _, c in self.selections)

    @property
    def is_plain(self) -> bool:
        return all(c == 1 for _, c in self.selections)

    @property
    def items(self) -> tuple:
        return tuple(i for i, _ in self.selections)

    @property
    def key(self) -> tuple:
        """Hashable composite-alternative identity, independent of id and bounds."""
        return self.selections

    def count_vector(self, m: int) -> np.ndarray:
        out = np.zeros(m, dtype=np.int64)
        for i, c in self.selections:
            if i >= m:
                raise DataError(f"observation {self.id}: unknown item id {i}")
            out[i] = c
        return out


@dataclass(frozen=True)
class SubsetUtility:
    value: float

    def __float__(self) -> float:
        return self.value


def item_utility(item: Item, params: ParameterVector) -> float:
    if item.attributes.shape != params.beta.shape:
        raise ConfigurationError(
            f"item has {item.attributes.shape[0]} attributes but beta has {params.beta.shape[0]}"
        )
    return float(item.attributes @ params.beta)


def item_utilities(universe: ItemUniverse, beta) -> np.ndarray:
    """Vector of elemental utilities ``x_i . beta`` for every item."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (universe.n_attributes,):
        raise ConfigurationError(
            f"beta has length {beta.shape}, universe has {universe.n_attributes} attributes"
        )
    return universe.x @ beta


def subset_utility(obs: Observation, universe: ItemUniverse, params: ParameterVector) -> SubsetUtility:
    total = 0.0
    for i, c in obs.selections:
        if i >= universe.m:
            raise DataError(f"observation {obs.id}: unknown item id {i}")
        total += c * item_utility(universe.items[i], params)
    return SubsetUtility(total)


def count_matrix(observations: Sequence[Observation], m: int) -> np.ndarray:
    """(N, m) matrix of selection counts."""
    out = np.zeros((len(observations), m), dtype=np.int64)
    for n, obs in enumerate(observations):
        for i, c in obs.selections:
            if i >= m:
                raise DataError(f"observation {obs.id}: unknown item id {i}")
            out[n, i] = c
    return out
