"""Random-forest regression of national energy consumption from its drivers.

Greedy CART trees (variance-minimizing splits, midpoint thresholds between
consecutive distinct feature values) are bagged over n-out-of-n bootstrap
samples. Every stochastic choice is drawn from per-tree splitmix64 streams
derived from (seed, tree index), so a model is a pure function of its
inputs: rebuilding with any thread count, or with the other kernel
backend, yields bit-identical trees.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ._backend import kernels
from .errors import DomainError, SchemaError
from .rng import SplitMix64, bootstrap_indices, stream_seed

_UNLIMITED_DEPTH = 2**31 - 1

#: Canonical driver names, in schema order (economic block then climate block).
DRIVER_COLUMNS = (
    "gdp_usd2015",
    "population",
    "urban_population",
    "urbanization",
    "temperature_k",
    "precipitation_mm",
    "co2_ppm",
    "ch4_ppb",
    "aerosol_aod550",
    "water_vapor_kgm2",
)

_FIELD_BY_COLUMN = {
    "gdp_usd2015": "gdp",
    "population": "population",
    "urban_population": "urban_population",
    "urbanization": "urbanization",
    "temperature_k": "temperature",
    "precipitation_mm": "precipitation",
    "co2_ppm": "co2",
    "ch4_ppb": "ch4",
    "aerosol_aod550": "aerosol_aod550",
    "water_vapor_kgm2": "water_vapor",
}


@dataclass(frozen=True)
class FeatureVector:
    """One country-year of driver values.

    The named fields are the canonical drivers; ``extra`` carries any
    additional named features for forward compatibility.
    """

    gdp: float
    population: float
    urban_population: float
    urbanization: float
    temperature: float
    precipitation: float
    co2: float
    ch4: float
    aerosol_aod550: float
    water_vapor: float
    extra: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in _FIELD_BY_COLUMN.values():
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValueError(f"driver {name!r} must be finite, got {v!r}")
        for name, v in self.extra.items():
            if not math.isfinite(v):
                raise ValueError(f"extra driver {name!r} must be finite, got {v!r}")
        if self.urban_population < 0 or self.population < self.urban_population:
            raise ValueError(
                f"population ({self.population}) must be >= urban_population "
                f"({self.urban_population}) >= 0")
        if not 0.0 <= self.urbanization <= 1.0:
            raise ValueError(f"urbanization must lie in [0, 1], got {self.urbanization}")

    def value(self, column: str) -> float:
        """Driver value by schema column name (canonical or extra)."""
        fld = _FIELD_BY_COLUMN.get(column)
        if fld is not None:
            return float(getattr(self, fld))
        if column in self.extra:
            return float(self.extra[column])
        raise SchemaError(f"unknown feature {column!r}")

    def as_array(self, columns: Sequence[str] = DRIVER_COLUMNS) -> np.ndarray:
        return np.array([self.value(c) for c in columns], dtype=np.float64)


@dataclass(frozen=True)
class Hyperparams:
    """Forest training knobs. ``mtry=None`` resolves to ceil(p/3) at fit time."""

    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 2
    max_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_leaf < 1:
            raise ValueError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError(f"mtry must be >= 1, got {self.mtry}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError(f"max_depth must be >= 0, got {self.max_depth}")

    def resolved(self, n_features: int) -> "Hyperparams":
        mtry = self.mtry if self.mtry is not None else math.ceil(n_features / 3)
        if not 1 <= mtry <= n_features:
            raise ValueError(f"mtry must lie in [1, {n_features}], got {mtry}")
        return replace(self, mtry=mtry)


@dataclass(frozen=True)
class Metrics:
    """Goodness-of-fit pair: coefficient of determination and RMSE (EJ)."""

    r2: float
    rmse: float


@dataclass(frozen=True)
class Tree:
    """One regression tree as flat preorder arrays; feature -1 marks leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.predict_tree(self.feature, self.threshold, self.left,
                                    self.right, self.value, X)

    def used_features(self) -> list[int]:
        return sorted({int(f) for f in self.feature if f >= 0})


@dataclass(frozen=True)
class ForestModel:
    """Trained ensemble plus everything needed to reproduce it."""

    trees: tuple[Tree, ...]
    hyper: Hyperparams
    oob_rmse: float
    feature_names: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        """Mean of per-tree predictions for each row of ``X``."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise SchemaError(f"expected {self.n_features} feature columns, "
                              f"got shape {X.shape}")
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.predict_matrix(X)
        return acc / len(self.trees)

    def predict(self, x: FeatureVector) -> float:
        """Prediction for a single driver vector (features resolved by name)."""
        row = x.as_array(self.feature_names).reshape(1, -1)
        return float(self.predict_matrix(row)[0])


def fit_tree(X: np.ndarray, y: np.ndarray, hyper: Hyperparams,
             rng_stream: SplitMix64) -> Tree:
    """Grow a single CART tree on all rows, drawing mtry-subsets from ``rng_stream``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.size or y.size == 0:
        raise ValueError("X must be (n, p) with matching non-empty target vector")
    hp = hyper.resolved(X.shape[1])
    if X.shape[0] < 2 * hp.min_leaf:
        raise ValueError(f"need at least {2 * hp.min_leaf} rows, got {X.shape[0]}")
    idx = np.arange(X.shape[0], dtype=np.int64)
    tree, used = _build(X, y, idx, hp, rng_stream.seed, rng_stream.counter)
    rng_stream.counter += used
    return tree


def _build(X, y, idx, hp, seed, counter0):
    max_depth = _UNLIMITED_DEPTH if hp.max_depth is None else hp.max_depth
    out = kernels.build_tree(X, y, idx, hp.mtry, hp.min_leaf, max_depth,
                             seed, counter0)
    feature, threshold, left, right, value, cover, used = out
    return Tree(feature, threshold, left, right, value, cover), used


def fit_forest(X: np.ndarray, y: np.ndarray, hyper: Hyperparams,
               feature_names: Sequence[str] | None = None,
               jobs: int = 1, bootstrap: bool = True) -> ForestModel:
    """Train the ensemble.

    Tree ``t`` draws its bootstrap sample and its feature subsets from
    streams seeded by (hyper.seed, t), making the result independent of
    ``jobs``. ``bootstrap=False`` is a test hook that trains every tree on
    the full sample.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 10:
        raise ValueError(f"need at least 10 rows to train a forest, got {n}")
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(p))
    feature_names = tuple(feature_names)
    if len(feature_names) != p:
        raise ValueError("feature_names length must match the number of columns")
    hp = hyper.resolved(p)

    def one_tree(t: int):
        boot_seed = stream_seed(hp.seed, 2 * t)
        node_seed = stream_seed(hp.seed, 2 * t + 1)
        if bootstrap:
            idx = bootstrap_indices(boot_seed, n)
        else:
            idx = np.arange(n, dtype=np.int64)
        tree, _ = _build(X, y, idx, hp, node_seed, 0)
        return tree, idx

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one_tree, range(hp.n_trees)))
    else:
        results = [one_tree(t) for t in range(hp.n_trees)]

    trees = tuple(tree for tree, _ in results)

    # out-of-bag error, accumulated in tree order for reproducibility
    oob_sum = np.zeros(n)
    oob_count = np.zeros(n, dtype=np.int64)
    if bootstrap:
        for tree, idx in results:
            inbag = np.bincount(idx, minlength=n) > 0
            oob = np.nonzero(~inbag)[0]
            if oob.size:
                oob_sum[oob] += tree.predict_matrix(X[oob])
                oob_count[oob] += 1
    seen = oob_count > 0
    if seen.any():
        resid = oob_sum[seen] / oob_count[seen] - y[seen]
        oob_rmse = float(np.sqrt(np.dot(resid, resid) / resid.size))
    else:
        oob_rmse = float("nan")

    return ForestModel(trees, hp, oob_rmse, feature_names)


def evaluate(model: ForestModel, X: np.ndarray, y: np.ndarray) -> Metrics:
    """R^2 and RMSE of the model on an evaluation set."""
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("evaluation set must be non-empty")
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise DomainError("R^2 is undefined when evaluation targets have zero variance")
    pred = model.predict_matrix(X)
    sse = float(np.sum((pred - y) ** 2))
    return Metrics(r2=1.0 - sse / sst, rmse=math.sqrt(sse / y.size))


SCHEMA_VERSION = 1


def model_to_dict(model: ForestModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "kscale-forest",
        "feature_names": list(model.feature_names),
        "hyper": {
            "n_trees": model.hyper.n_trees,
            "mtry": model.hyper.mtry,
            "min_leaf": model.hyper.min_leaf,
            "max_depth": model.hyper.max_depth,
            "seed": model.hyper.seed,
        },
        "oob_rmse": model.oob_rmse,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
                "cover": t.cover.tolist(),
            }
            for t in model.trees
        ],
    }


def model_from_dict(doc: dict) -> ForestModel:
    if doc.get("kind") != "kscale-forest":
        raise SchemaError(f"not a forest model file (kind={doc.get('kind')!r})")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported model schema version {doc.get('schema_version')!r}")
    trees = tuple(
        Tree(
            np.asarray(t["feature"], dtype=np.int32),
            np.asarray(t["threshold"], dtype=np.float64),
            np.asarray(t["left"], dtype=np.int32),
            np.asarray(t["right"], dtype=np.int32),
            np.asarray(t["value"], dtype=np.float64),
            np.asarray(t["cover"], dtype=np.int64),
        )
        for t in doc["trees"]
    )
    hyper = Hyperparams(**doc["hyper"])
    return ForestModel(trees, hyper, float(doc["oob_rmse"]), tuple(doc["feature_names"]))


def save_model(model: ForestModel, path) -> None:
    """Write the model as deterministic JSON (byte-stable for a fixed model)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> ForestModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
