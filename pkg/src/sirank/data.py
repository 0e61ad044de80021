"""Feature schema, query/item records, JSONL I/O, standardization, splits."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, ParseError, SchemaError, ValidationError

MAX_ITEMS_PER_QUERY = 25
MIN_ITEMS_PER_QUERY = 2


@dataclass(frozen=True)
class QueryFeature:
    name: str
    kind: str  # "numeric" or "categorical"
    cardinality: int | None = None
    embedding_dim: int | None = None


@dataclass(frozen=True)
class FeatureSchema:
    """Declares query features plus the fixed / scale-variant item features.

    Scale-variant features are the ones whose scale can legitimately change at
    prediction time (price-like quantities). They stay raw end to end and only
    reach a model through the wide part's log. Fixed item features feed both
    paths, so their raw values must be strictly positive as well.
    """

    query_features: tuple[QueryFeature, ...]
    item_features_fixed: tuple[str, ...]
    item_features_scalevariant: tuple[str, ...]

    def __post_init__(self):
        names = [f.name for f in self.query_features]
        names += list(self.item_features_fixed) + list(self.item_features_scalevariant)
        if len(set(names)) != len(names):
            dup = sorted(n for n in set(names) if names.count(n) > 1)
            raise SchemaError(f"duplicate feature names: {dup}")
        if len(self.item_features_scalevariant) < 1:
            raise SchemaError("schema needs at least one scale-variant item feature")
        for f in self.query_features:
            if f.kind == "numeric":
                if f.cardinality is not None or f.embedding_dim is not None:
                    raise SchemaError(f"numeric feature {f.name!r} must not set cardinality or embedding_dim")
            elif f.kind == "categorical":
                if f.cardinality is None or f.cardinality < 2:
                    raise SchemaError(f"categorical feature {f.name!r} needs cardinality >= 2")
                if f.embedding_dim is None or f.embedding_dim < 1:
                    raise SchemaError(f"categorical feature {f.name!r} needs embedding_dim >= 1")
            else:
                raise SchemaError(f"feature {f.name!r} has unknown kind {f.kind!r}")

    @property
    def numeric_query_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.query_features if f.kind == "numeric")

    @property
    def categorical_query_features(self) -> tuple[QueryFeature, ...]:
        return tuple(f for f in self.query_features if f.kind == "categorical")

    @property
    def k1(self) -> int:
        return len(self.item_features_fixed)

    @property
    def k2(self) -> int:
        return len(self.item_features_scalevariant)

    @property
    def query_repr_dim(self) -> int:
        """Width of the processed query representation (numerics + embeddings)."""
        return len(self.numeric_query_names) + sum(
            f.embedding_dim for f in self.categorical_query_features
        )

    def to_json(self) -> dict:
        return {
            "query_features": [
                {
                    "name": f.name,
                    "kind": f.kind,
                    **({"cardinality": f.cardinality, "embedding_dim": f.embedding_dim}
                       if f.kind == "categorical" else {}),
                }
                for f in self.query_features
            ],
            "item_features_fixed": list(self.item_features_fixed),
            "item_features_scalevariant": list(self.item_features_scalevariant),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureSchema":
        try:
            feats = tuple(
                QueryFeature(
                    name=f["name"],
                    kind=f["kind"],
                    cardinality=f.get("cardinality"),
                    embedding_dim=f.get("embedding_dim"),
                )
                for f in obj["query_features"]
            )
            return cls(
                query_features=feats,
                item_features_fixed=tuple(obj["item_features_fixed"]),
                item_features_scalevariant=tuple(obj["item_features_scalevariant"]),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema object: {exc}") from exc

    def fingerprint(self) -> str:
        payload = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def save_schema(schema: FeatureSchema, path):
    with open(path, "w") as fh:
        json.dump(schema.to_json(), fh, indent=2)
        fh.write("\n")


def load_schema(path) -> FeatureSchema:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return FeatureSchema.from_json(obj)


@dataclass
class ItemRecord:
    item_id: str
    fixed: np.ndarray          # raw, strictly positive, shape (K1,)
    scalevariant: np.ndarray   # raw, strictly positive, shape (K2,)
    label: int
    deep_fixed: np.ndarray | None = None  # standardized copy, filled by apply_standardization


@dataclass
class QueryRecord:
    query_id: str
    numeric: np.ndarray        # raw numeric query values, schema order
    category_ids: np.ndarray   # int ids, schema categorical order
    num_nights: int
    exchange_rate: float
    items: list[ItemRecord]
    deep_numeric: np.ndarray | None = None

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def booked_index(self) -> int:
        for j, it in enumerate(self.items):
            if it.label == 1:
                return j
        raise ValidationError(f"query {self.query_id}: no booked item")

    def labels(self) -> np.ndarray:
        return np.array([it.label for it in self.items], dtype=np.float64)

    def fixed_matrix(self) -> np.ndarray:
        return np.stack([it.fixed for it in self.items])

    def scalevariant_matrix(self) -> np.ndarray:
        return np.stack([it.scalevariant for it in self.items])

    def deep_fixed_matrix(self) -> np.ndarray:
        if self.items and self.items[0].deep_fixed is None:
            raise ContractError(f"query {self.query_id}: dataset not standardized")
        return np.stack([it.deep_fixed for it in self.items])


@dataclass
class Dataset:
    schema: FeatureSchema
    queries: list[QueryRecord]
    stats: "StandardizationStats | None" = None

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)


# ---------------------------------------------------------------------------
# JSONL I/O

def _require(cond: bool, query_id: str, rule: str):
    if not cond:
        raise ValidationError(f"query {query_id}: {rule}")


def _finite_positive(arr: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(arr)) and np.all(arr > 0))


def _parse_query_obj(obj: dict, schema: FeatureSchema) -> QueryRecord:
    qid = obj.get("query_id")
    if not isinstance(qid, str) or not qid:
        raise ValidationError("record without a string query_id")
    qvals = obj.get("query")
    _require(isinstance(qvals, dict), qid, "missing query feature object")

    numeric = np.empty(len(schema.numeric_query_names), dtype=np.float64)
    for i, name in enumerate(schema.numeric_query_names):
        _require(name in qvals, qid, f"missing query feature {name!r}")
        v = qvals[name]
        _require(isinstance(v, (int, float)) and not isinstance(v, bool), qid,
                 f"query feature {name!r} is not numeric")
        numeric[i] = float(v)
    _require(bool(np.all(np.isfinite(numeric))), qid, "non-finite query feature value")

    cats = schema.categorical_query_features
    category_ids = np.empty(len(cats), dtype=np.int64)
    for i, f in enumerate(cats):
        _require(f.name in qvals, qid, f"missing query feature {f.name!r}")
        v = qvals[f.name]
        _require(isinstance(v, int) and not isinstance(v, bool), qid,
                 f"categorical feature {f.name!r} must be an integer id")
        _require(0 <= v < f.cardinality, qid,
                 f"categorical feature {f.name!r} id {v} out of range [0, {f.cardinality})")
        category_ids[i] = v
    known = set(schema.numeric_query_names) | {f.name for f in cats}
    extra = sorted(set(qvals) - known)
    _require(not extra, qid, f"unknown query features {extra}")

    nights = obj.get("num_nights")
    _require(isinstance(nights, int) and not isinstance(nights, bool) and nights > 0,
             qid, "num_nights must be a positive integer")
    rate = obj.get("exchange_rate")
    _require(isinstance(rate, (int, float)) and not isinstance(rate, bool)
             and math.isfinite(rate) and rate > 0,
             qid, "exchange_rate must be a positive finite number")

    raw_items = obj.get("items")
    _require(isinstance(raw_items, list), qid, "missing items list")
    _require(MIN_ITEMS_PER_QUERY <= len(raw_items) <= MAX_ITEMS_PER_QUERY, qid,
             f"items count {len(raw_items)} outside [{MIN_ITEMS_PER_QUERY}, {MAX_ITEMS_PER_QUERY}]")

    items = []
    for raw in raw_items:
        iid = raw.get("item_id")
        _require(isinstance(iid, str) and bool(iid), qid, "item without a string item_id")
        fixed = np.empty(schema.k1, dtype=np.float64)
        for i, name in enumerate(schema.item_features_fixed):
            _require(name in raw.get("fixed", {}), qid, f"item {iid}: missing fixed feature {name!r}")
            fixed[i] = float(raw["fixed"][name])
        sv = np.empty(schema.k2, dtype=np.float64)
        for i, name in enumerate(schema.item_features_scalevariant):
            _require(name in raw.get("scalevariant", {}), qid,
                     f"item {iid}: missing scale-variant feature {name!r}")
            sv[i] = float(raw["scalevariant"][name])
        _require(_finite_positive(fixed), qid, f"item {iid}: fixed features must be finite and > 0")
        _require(_finite_positive(sv), qid, f"item {iid}: scale-variant features must be finite and > 0")
        label = raw.get("label")
        _require(label in (0, 1) and not isinstance(label, bool), qid,
                 f"item {iid}: label must be 0 or 1")
        items.append(ItemRecord(item_id=iid, fixed=fixed, scalevariant=sv, label=int(label)))

    booked = sum(it.label for it in items)
    _require(booked != 0, qid, "no booked item")
    _require(booked == 1, qid, "multiple booked items")

    return QueryRecord(
        query_id=qid,
        numeric=numeric,
        category_ids=category_ids,
        num_nights=int(nights),
        exchange_rate=float(rate),
        items=items,
    )


def load_dataset(path, schema: FeatureSchema) -> Dataset:
    """Read a JSONL dataset, validating every record against the schema."""
    queries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ParseError(f"{path}: line {lineno}: expected a JSON object")
            queries.append(_parse_query_obj(obj, schema))
    return Dataset(schema=schema, queries=queries)


def _query_to_obj(q: QueryRecord, schema: FeatureSchema) -> dict:
    qvals: dict = {}
    for name, v in zip(schema.numeric_query_names, q.numeric):
        qvals[name] = float(v)
    for f, v in zip(schema.categorical_query_features, q.category_ids):
        qvals[f.name] = int(v)
    return {
        "query_id": q.query_id,
        "query": qvals,
        "num_nights": int(q.num_nights),
        "exchange_rate": float(q.exchange_rate),
        "items": [
            {
                "item_id": it.item_id,
                "fixed": {n: float(v) for n, v in zip(schema.item_features_fixed, it.fixed)},
                "scalevariant": {
                    n: float(v) for n, v in zip(schema.item_features_scalevariant, it.scalevariant)
                },
                "label": int(it.label),
            }
            for it in q.items
        ],
    }


def save_dataset(ds: Dataset, path):
    """Write raw records as JSONL, one query object per line."""
    if ds.stats is not None:
        raise ContractError("refusing to save a standardized view; save the raw dataset")
    with open(path, "w") as fh:
        for q in ds.queries:
            fh.write(json.dumps(_query_to_obj(q, ds.schema), sort_keys=True))
            fh.write("\n")


# ---------------------------------------------------------------------------
# standardization

@dataclass(frozen=True)
class StandardizationStats:
    """Train-split mean and std for every deep-path numeric feature.

    Scale-variant stats are present only when the stats were fitted for a
    deep-only model, which standardizes those features into its dense stack.
    A scale-invariant model never standardizes them, so there they stay None.
    """

    numeric_names: tuple[str, ...]
    numeric_mean: np.ndarray
    numeric_std: np.ndarray
    fixed_names: tuple[str, ...]
    fixed_mean: np.ndarray
    fixed_std: np.ndarray
    scalevariant_names: tuple[str, ...] | None = None
    scalevariant_mean: np.ndarray | None = None
    scalevariant_std: np.ndarray | None = None

    @property
    def covers_scalevariant(self) -> bool:
        return self.scalevariant_names is not None

    def to_json(self) -> dict:
        obj = {
            "numeric": {n: [float(m), float(s)] for n, m, s in
                        zip(self.numeric_names, self.numeric_mean, self.numeric_std)},
            "fixed": {n: [float(m), float(s)] for n, m, s in
                      zip(self.fixed_names, self.fixed_mean, self.fixed_std)},
        }
        if self.covers_scalevariant:
            obj["scalevariant"] = {n: [float(m), float(s)] for n, m, s in
                                   zip(self.scalevariant_names, self.scalevariant_mean,
                                       self.scalevariant_std)}
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "StandardizationStats":
        def unpack(d):
            names = tuple(d.keys())
            mean = np.array([d[n][0] for n in names], dtype=np.float64)
            std = np.array([d[n][1] for n in names], dtype=np.float64)
            return names, mean, std

        nn, nm, ns = unpack(obj["numeric"])
        fn, fm, fs = unpack(obj["fixed"])
        kwargs = {}
        if "scalevariant" in obj:
            sn, sm, ss = unpack(obj["scalevariant"])
            kwargs = {"scalevariant_names": sn, "scalevariant_mean": sm, "scalevariant_std": ss}
        return cls(numeric_names=nn, numeric_mean=nm, numeric_std=ns,
                   fixed_names=fn, fixed_mean=fm, fixed_std=fs, **kwargs)


def _fit_columns(rows: np.ndarray, names) -> tuple[np.ndarray, np.ndarray]:
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    for name, s in zip(names, std):
        if s <= 0.0:
            raise ValidationError(f"feature {name!r} has zero variance on the training split")
    return mean, std


def fit_standardization(train: Dataset, schema: FeatureSchema,
                        include_scalevariant: bool = False) -> StandardizationStats:
    """Fit per-feature mean/std on the training split only.

    include_scalevariant covers the deep-only baseline, whose dense stack
    consumes standardized scale-variant values. Invariant models must fit
    with the default so the stats cover exactly their deep-path features.
    """
    if len(train) == 0:
        raise ValidationError("cannot fit standardization on an empty dataset")
    numeric_rows = np.stack([q.numeric for q in train.queries])
    fixed_rows = np.concatenate([q.fixed_matrix() for q in train.queries])
    n_mean, n_std = _fit_columns(numeric_rows, schema.numeric_query_names)
    f_mean, f_std = _fit_columns(fixed_rows, schema.item_features_fixed)
    kwargs = {}
    if include_scalevariant:
        sv_rows = np.concatenate([q.scalevariant_matrix() for q in train.queries])
        s_mean, s_std = _fit_columns(sv_rows, schema.item_features_scalevariant)
        kwargs = {"scalevariant_names": schema.item_features_scalevariant,
                  "scalevariant_mean": s_mean, "scalevariant_std": s_std}
    return StandardizationStats(
        numeric_names=schema.numeric_query_names, numeric_mean=n_mean, numeric_std=n_std,
        fixed_names=schema.item_features_fixed, fixed_mean=f_mean, fixed_std=f_std,
        **kwargs,
    )


def apply_standardization(ds: Dataset, stats: StandardizationStats) -> Dataset:
    """Return a view with standardized deep-path copies filled in.

    Raw values are kept untouched: the wide path logs raw features, and the
    perturbation cases rescale raw scale-variant values after the fact.
    Applying twice would shift the copies again, so it is refused.
    """
    if ds.stats is not None:
        raise ContractError("dataset is already standardized")
    if stats.numeric_names != ds.schema.numeric_query_names:
        raise SchemaError(f"stats cover query numerics {stats.numeric_names}, "
                          f"schema declares {ds.schema.numeric_query_names}")
    if stats.fixed_names != ds.schema.item_features_fixed:
        raise SchemaError(f"stats cover fixed features {stats.fixed_names}, "
                          f"schema declares {ds.schema.item_features_fixed}")
    if stats.covers_scalevariant and stats.scalevariant_names != ds.schema.item_features_scalevariant:
        raise SchemaError("stats cover scale-variant features not in the schema")

    queries = []
    for q in ds.queries:
        items = [
            replace(it, deep_fixed=(it.fixed - stats.fixed_mean) / stats.fixed_std)
            for it in q.items
        ]
        queries.append(replace(
            q,
            deep_numeric=(q.numeric - stats.numeric_mean) / stats.numeric_std,
            items=items,
        ))
    return Dataset(schema=ds.schema, queries=queries, stats=stats)


# ---------------------------------------------------------------------------
# splitting

def split_holdout(ds: Dataset, seed: int) -> tuple[Dataset, Dataset, Dataset]:
    """Split whole queries into train/validation/test at 63/7/30.

    The test share is 30% of everything and validation is 10% of the
    remaining 70%, which nets out to 7% overall.
    """
    n = len(ds)
    if n < 10:
        raise ValidationError(f"need at least 10 queries to split, got {n}")
    n_test = round(0.30 * n)
    n_val = round(0.07 * n)
    n_train = n - n_test - n_val
    perm = np.random.default_rng(seed).permutation(n)
    idx_train = np.sort(perm[:n_train])
    idx_val = np.sort(perm[n_train:n_train + n_val])
    idx_test = np.sort(perm[n_train + n_val:])

    def take(idx):
        return Dataset(schema=ds.schema, queries=[ds.queries[i] for i in idx])

    return take(idx_train), take(idx_val), take(idx_test)
