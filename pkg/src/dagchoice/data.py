"""Synthetic data generation, CSV ingestion, splitting and bounds grouping.

File formats (UTF-8 CSV, header required):

* items: ``item_id,<attr_1>,...,<attr_K>``; header order fixes the attribute order.
* observations: ``obs_id,L,U,items`` where ``items`` is a ``;``-separated list of
  item ids (repeats allowed in count mode). ``L`` and ``U`` may be left empty, or
  the two columns omitted, when bounds rules are supplied.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import Bounds, ItemUniverse, Observation, item_utilities
from .dag import build_dag
from .errors import ConfigurationError, DataError
from .recursive_logit import arc_utilities, group_by_bounds as _group_indices, sample_counts, solve_value

DEFAULT_BETA = (-0.5, -0.02, -0.1)


@dataclass(frozen=True)
class SyntheticSpec:
    """Synthetic experiment settings.

    All attributes but the last are log-normal(0, 1) draws; the last is the
    constant 1. Observations come from the exact choice distribution.
    """

    m: int
    bounds: Bounds
    n_attributes: int = 3
    beta_true: tuple = DEFAULT_BETA
    n_estimation: int = 1000
    n_prediction: int = 250
    seed: int = 0
    count_mode: bool = False

    def __post_init__(self):
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        if self.n_attributes < 1:
            raise ConfigurationError("need at least one attribute")
        if len(self.beta_true) != self.n_attributes:
            raise ConfigurationError(
                f"beta_true has {len(self.beta_true)} entries, n_attributes is {self.n_attributes}"
            )
        if self.n_estimation < 0 or self.n_prediction < 0:
            raise ConfigurationError("observation counts must be non-negative")
        if not self.count_mode:
            self.bounds.check(self.m)


@dataclass(frozen=True)
class Dataset:
    universe: ItemUniverse
    observations: tuple
    splits: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        n = len(self.observations)
        splits = {}
        for name, idx in self.splits.items():
            idx = tuple(int(i) for i in idx)
            if any(i < 0 or i >= n for i in idx):
                raise DataError(f"split {name!r} indexes outside the observation list")
            if len(set(idx)) != len(idx):
                raise DataError(f"split {name!r} has repeated indices")
            splits[name] = idx
        names = list(splits)
        for a in range(len(names)):
            for b in range(a + 1, len(names)):
                if set(splits[names[a]]) & set(splits[names[b]]):
                    raise DataError(f"splits {names[a]!r} and {names[b]!r} overlap")
        object.__setattr__(self, "splits", splits)

    def subset(self, name: str) -> list:
        if name not in self.splits:
            raise DataError(f"no split named {name!r}; have {sorted(self.splits)}")
        return [self.observations[i] for i in self.splits[name]]


def synthetic_universe(spec: SyntheticSpec, rng) -> ItemUniverse:
    x = np.ones((spec.m, spec.n_attributes))
    x[:, :-1] = rng.lognormal(mean=0.0, sigma=1.0, size=(spec.m, spec.n_attributes - 1))
    names = [f"x{q}" for q in range(spec.n_attributes - 1)] + ["const"]
    return ItemUniverse.from_matrix(x, names)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw attributes, then ``n_estimation + n_prediction`` exact choice draws."""
    rng = np.random.default_rng(spec.seed)
    universe = synthetic_universe(spec, rng)
    dag = build_dag("bic-count" if spec.count_mode else "bic", spec.m, spec.bounds)
    v = item_utilities(universe, np.array(spec.beta_true))
    table = solve_value(dag, arc_utilities(dag, v))
    n = spec.n_estimation + spec.n_prediction
    counts = sample_counts(dag, table, n, rng)
    obs = tuple(
        Observation(f"o{r}", spec.bounds, tuple((int(i), int(row[i])) for i in np.flatnonzero(row)))
        for r, row in enumerate(counts)
    )
    splits = {
        "estimation": range(spec.n_estimation),
        "prediction": range(spec.n_estimation, n),
    }
    return Dataset(universe, obs, splits)


# -- bounds rules --------------------------------------------------------------


def parse_bounds_rules(text: str) -> list:
    """``"1-2,3-5"`` -> ``[Bounds(1, 2), Bounds(3, 5)]``; brackets must not overlap."""
    rules = []
    for part in (text or "").split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            b = Bounds(int(lo), int(hi) if sep else int(lo))
        except ValueError as exc:
            raise ConfigurationError(f"bad bounds rule {part!r}: {exc}") from None
        rules.append(b)
    if not rules:
        raise ConfigurationError("empty bounds rules")
    rules.sort()
    for a, b in zip(rules, rules[1:]):
        if b.lower <= a.upper:
            raise ConfigurationError(f"bounds rules {a} and {b} overlap")
    return rules


def infer_bounds(size: int, rules: Sequence[Bounds]) -> Bounds:
    for b in rules:
        if size in b:
            return b
    raise DataError(f"size {size} matches no bounds rule {[str(b) for b in rules]}")


def apply_bounds_rules(observations: Sequence[Observation], rules: Sequence[Bounds]) -> list:
    """Replace each observation's bounds by the rule bracket containing its size."""
    return [Observation(o.id, infer_bounds(o.size, rules), o.selections) for o in observations]


def group_by_bounds(observations: Sequence[Observation], rules: Optional[Sequence[Bounds]] = None) -> dict:
    """Map from bounds to index arrays; with ``rules`` the bounds are inferred from sizes."""
    if rules is not None:
        observations = apply_bounds_rules(observations, rules)
    return _group_indices(observations)


def split(dataset: Dataset, fraction: float, seed: int = 0, names=("estimation", "holdout")) -> Dataset:
    """Seeded shuffle, then the first ``fraction`` goes to ``names[0]``."""
    if not 0.0 < fraction < 1.0:
        raise ConfigurationError(f"split fraction must be in (0, 1), got {fraction}")
    n = len(dataset.observations)
    n_first = int(round(fraction * n))
    if n_first == 0 or n_first == n:
        raise ConfigurationError(f"split of {n} observations at {fraction} leaves one side empty")
    order = np.random.default_rng(seed).permutation(n)
    return Dataset(dataset.universe, dataset.observations,
                   {names[0]: order[:n_first].tolist(), names[1]: order[n_first:].tolist()})


# -- CSV -----------------------------------------------------------------------


def _open(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    return path.open(newline="", encoding="utf-8")


def load_items(path) -> ItemUniverse:
    with _open(path) as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file", [1])
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "item_id":
        raise DataError(f"{path}: first column must be 'item_id'", [1])
    attrs = header[1:]
    if not attrs:
        raise DataError(f"{path}: no attribute columns", [1])
    names, values, bad = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            bad.append((lineno, f"expected {len(header)} columns, got {len(row)}"))
            continue
        try:
            vals = [float(c) for c in row[1:]]
        except ValueError:
            bad.append((lineno, "non-numeric attribute"))
            continue
        if not np.all(np.isfinite(vals)):
            bad.append((lineno, "non-finite attribute"))
            continue
        if row[0].strip() in names:
            bad.append((lineno, f"duplicate item id {row[0].strip()!r}"))
            continue
        names.append(row[0].strip())
        values.append(vals)
    if bad:
        raise DataError(f"{path}: " + "; ".join(f"line {n}: {msg}" for n, msg in bad), [n for n, _ in bad])
    if not names:
        raise DataError(f"{path}: no items", [1])
    return ItemUniverse.from_matrix(np.array(values), attrs, names)


def load_observations(path, universe: ItemUniverse, count_mode: bool = False,
                      bounds_rules: Optional[Sequence[Bounds]] = None) -> list:
    with _open(path) as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file", [1])
    header = [h.strip() for h in rows[0]]
    has_bounds = header == ["obs_id", "L", "U", "items"]
    if not has_bounds and header != ["obs_id", "items"]:
        raise DataError(f"{path}: header must be 'obs_id,L,U,items' (or 'obs_id,items' with bounds rules)", [1])
    if not has_bounds and bounds_rules is None:
        raise DataError(f"{path}: no L,U columns and no bounds rules given", [1])
    out, bad, seen = [], [], set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            bad.append((lineno, f"expected {len(header)} columns, got {len(row)}"))
            continue
        oid = row[0].strip()
        items_field = row[-1].strip()
        try:
            ids = [universe.index_of(t.strip()) for t in items_field.split(";") if t.strip()]
        except DataError as exc:
            bad.append((lineno, str(exc)))
            continue
        if not count_mode and len(set(ids)) != len(ids):
            bad.append((lineno, "repeated item outside count mode"))
            continue
        try:
            if has_bounds and row[1].strip() and row[2].strip():
                b = Bounds(int(row[1]), int(row[2]))
            elif bounds_rules is not None:
                b = infer_bounds(len(ids), bounds_rules)
            else:
                raise DataError("missing bounds")
            if not count_mode:
                b.check(universe.m)
            obs = Observation.from_items(oid, b, ids)
        except (ValueError, DataError) as exc:
            bad.append((lineno, str(exc)))
            continue
        if oid in seen:
            bad.append((lineno, f"duplicate obs_id {oid!r}"))
            continue
        seen.add(oid)
        out.append(obs)
    if bad:
        raise DataError(f"{path}: " + "; ".join(f"line {n}: {msg}" for n, msg in bad), [n for n, _ in bad])
    return out


def write_items(universe: ItemUniverse, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["item_id", *universe.attribute_names])
        for item in universe.items:
            w.writerow([item.name, *(repr(float(a)) for a in item.attributes)])


def write_observations(observations: Sequence[Observation], universe: ItemUniverse, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["obs_id", "L", "U", "items"])
        for o in observations:
            ids = [universe.items[i].name for i, c in o.selections for _ in range(c)]
            w.writerow([o.id, o.bounds.lower, o.bounds.upper, ";".join(ids)])


# -- JSON ----------------------------------------------------------------------


def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "attribute_names": list(ds.universe.attribute_names),
        "items": [{"name": it.name, "attributes": it.attributes.tolist()} for it in ds.universe.items],
        "observations": [
            {"id": o.id, "L": o.bounds.lower, "U": o.bounds.upper,
             "selections": [[i, c] for i, c in o.selections]}
            for o in ds.observations
        ],
        "splits": {k: list(v) for k, v in ds.splits.items()},
    }


def dataset_from_dict(d: dict) -> Dataset:
    try:
        universe = ItemUniverse.from_matrix(
            np.array([it["attributes"] for it in d["items"]], dtype=float).reshape(len(d["items"]), -1),
            d["attribute_names"], [it["name"] for it in d["items"]],
        )
        obs = [Observation(o["id"], Bounds(o["L"], o["U"]), tuple(map(tuple, o["selections"])))
               for o in d["observations"]]
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed dataset JSON: {exc}") from None
    return Dataset(universe, obs, d.get("splits", {}))


def dump_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(json.dumps(dataset_to_dict(ds), indent=1), encoding="utf-8")


def load_dataset(path) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    try:
        return dataset_from_dict(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
