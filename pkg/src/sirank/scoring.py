"""Two-part ranking scorer: a deep stack over query and fixed item features
plus a wide bilinear term over a compressed query vector and logged raw item
features. Pairwise score differences from the combined scorer do not move
when every scale-variant value in a query is multiplied by a constant, which
is the property the whole package exists to demonstrate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .data import Dataset, FeatureSchema, QueryRecord, StandardizationStats
from .errors import ConfigError, ContractError, DomainError, SchemaError

MODES = ("sir", "deep_only")
DEFAULT_WIDTHS = (64, 32, 16)
DEFAULT_L = 4
CHECKPOINT_VERSION = 1


@dataclass
class SirModel:
    schema: FeatureSchema
    mode: str
    widths: tuple[int, ...]
    compressor_dim: int
    params: ad.ParameterSet
    stats: StandardizationStats | None = None

    @property
    def wide_len(self) -> int:
        return self.compressor_dim * (self.schema.k1 + self.schema.k2)


def build_model(schema: FeatureSchema, mode: str = "sir",
                widths: tuple[int, ...] = DEFAULT_WIDTHS,
                compressor_dim: int = DEFAULT_L, seed: int = 0,
                stats: StandardizationStats | None = None) -> SirModel:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}, expected one of {MODES}")
    if not widths or any(w < 1 for w in widths):
        raise ConfigError(f"invalid dense widths {widths}")
    m_prime = schema.query_repr_dim
    if not compressor_dim < m_prime:
        raise ConfigError(
            f"compressor output {compressor_dim} must be smaller than the "
            f"query representation width {m_prime}")

    rng = np.random.default_rng(seed)
    params = ad.ParameterSet()
    for f in schema.categorical_query_features:
        params.add(f"emb_{f.name}", ad.init_embedding_table(rng, f.cardinality, f.embedding_dim))

    deep_in = m_prime + schema.k1
    if mode == "deep_only":
        deep_in += schema.k2
    prev = deep_in
    for i, width in enumerate(widths):
        params.add(f"deep_w{i}", ad.init_dense_weight(rng, prev, width))
        params.add(f"deep_b{i}", np.zeros(width))
        prev = width
    params.add("head_w", ad.init_dense_weight(rng, prev, 1))
    params.add("head_b", np.zeros(1))

    if mode == "sir":
        params.add("fs_w", ad.init_dense_weight(rng, m_prime, compressor_dim))
        params.add("fs_b", np.zeros(compressor_dim))
        k = schema.k1 + schema.k2
        params.add("wide_w", ad.init_dense_weight(rng, compressor_dim * k, 1).reshape(-1))

    return SirModel(schema=schema, mode=mode, widths=tuple(widths),
                    compressor_dim=compressor_dim, params=params, stats=stats)


# ---------------------------------------------------------------------------
# graph construction


def _query_repr(model: SirModel, query: QueryRecord) -> ad.Tensor:
    if query.deep_numeric is None:
        raise ContractError(f"query {query.query_id}: standardized features missing, "
                            "apply_standardization first")
    parts = [query.deep_numeric]
    for f, cid in zip(model.schema.categorical_query_features, query.category_ids):
        parts.append(ad.embedding_lookup(model.params[f"emb_{f.name}"], int(cid), feature=f.name))
    return ad.concat(parts)


def _deep_item_block(model: SirModel, query: QueryRecord, item_indices) -> np.ndarray:
    items = [query.items[j] for j in item_indices]
    fixed = np.stack([it.deep_fixed for it in items])
    if model.mode != "deep_only":
        return fixed
    stats = model.stats
    if stats is None or not stats.covers_scalevariant:
        raise ContractError("deep_only scoring needs standardization stats that "
                            "cover the scale-variant features")
    raw = np.stack([it.scalevariant for it in items])
    return np.concatenate([fixed, (raw - stats.scalevariant_mean) / stats.scalevariant_std], axis=1)


def _build_deep(model: SirModel, query: QueryRecord, item_indices,
                q_repr: ad.Tensor) -> ad.Tensor:
    d = len(item_indices)
    deep_items = _deep_item_block(model, query, item_indices)
    if not np.all(np.isfinite(deep_items)) or not np.all(np.isfinite(query.deep_numeric)):
        raise DomainError(f"query {query.query_id}: non-finite deep-path input")
    h = ad.concat_cols([ad.repeat_rows(q_repr, d), deep_items])
    for i in range(len(model.widths)):
        h = ad.relu(ad.affine(h, model.params[f"deep_w{i}"], model.params[f"deep_b{i}"]))
    return ad.reshape(ad.affine(h, model.params["head_w"], model.params["head_b"]), (d,))


def _build_wide(model: SirModel, query: QueryRecord, item_indices,
                q_repr: ad.Tensor) -> ad.Tensor:
    d = len(item_indices)
    m_prime = model.schema.query_repr_dim
    s_row = ad.affine(ad.reshape(q_repr, (1, m_prime)),
                      model.params["fs_w"], model.params["fs_b"])
    wide_raw = np.concatenate(
        [np.stack([query.items[j].fixed for j in item_indices]),
         np.stack([query.items[j].scalevariant for j in item_indices])], axis=1)
    _check_wide_positive(model.schema, query, item_indices, wide_raw)
    v = ad.log(wide_raw)
    k = model.schema.k1 + model.schema.k2
    w_mat = ad.reshape(model.params["wide_w"], (model.compressor_dim, k))
    sw = ad.matmul(s_row, w_mat)               # (1, K): row of per-feature weights
    return ad.reshape(ad.matmul(v, ad.reshape(sw, (k, 1))), (d,))


def build_score_graph(model: SirModel, query: QueryRecord,
                      item_indices=None) -> ad.Tensor:
    """Assemble the scoring graph for one query; returns the (D,) score node.

    The same weights score every item (one branch per item, all identical),
    so stacking items as rows is just the batched form of that sharing.
    """
    if item_indices is None:
        item_indices = range(query.n_items)
    item_indices = list(item_indices)
    if not item_indices:
        raise ContractError("cannot score an empty item selection")
    q_repr = _query_repr(model, query)
    deep = _build_deep(model, query, item_indices, q_repr)
    if model.mode == "deep_only":
        return deep
    return ad.add(deep, _build_wide(model, query, item_indices, q_repr))


def _check_wide_positive(schema, query, item_indices, wide_raw):
    if np.all(wide_raw > 0):
        return
    names = list(schema.item_features_fixed) + list(schema.item_features_scalevariant)
    rows, cols = np.nonzero(~(wide_raw > 0))
    j, kk = int(rows[0]), int(cols[0])
    raise DomainError(
        f"query {query.query_id}, item {query.items[item_indices[j]].item_id}: "
        f"wide-path feature {names[kk]!r} must be > 0, got {wide_raw[j, kk]}")


# ---------------------------------------------------------------------------
# public scoring ops


def score_query(model: SirModel, query: QueryRecord, mode: str | None = None) -> np.ndarray:
    if mode is not None and mode != model.mode:
        raise ContractError(f"model was built for mode {model.mode!r}, not {mode!r}")
    return build_score_graph(model, query).data.copy()


def score_deep(model: SirModel, query: QueryRecord, j: int) -> float:
    """Deep-part score of item j; reads query features and fixed features only."""
    idx = list(range(query.n_items))
    return float(_build_deep(model, query, idx, _query_repr(model, query)).data[j])


def score_wide(model: SirModel, query: QueryRecord, j: int) -> float:
    if model.mode != "sir":
        raise ContractError("deep_only models have no wide part")
    idx = list(range(query.n_items))
    return float(_build_wide(model, query, idx, _query_repr(model, query)).data[j])


@dataclass(frozen=True)
class Ranking:
    """Positions 1..D assigned to item indices; order[r] is the item at rank r+1."""

    order: np.ndarray

    def positions(self) -> np.ndarray:
        pos = np.empty(len(self.order), dtype=np.int64)
        pos[self.order] = np.arange(1, len(self.order) + 1)
        return pos

    def position_of(self, j: int) -> int:
        return int(np.nonzero(self.order == j)[0][0]) + 1


def rank(scores: np.ndarray) -> Ranking:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise DomainError(f"scores must be a nonempty vector, got shape {list(scores.shape)}")
    if np.any(np.isnan(scores)):
        raise DomainError("cannot rank NaN scores")
    # descending by score, ties broken by ascending item index
    order = np.lexsort((np.arange(scores.size), -scores))
    return Ranking(order=order)


def scale_query(query: QueryRecord, c: float) -> QueryRecord:
    """Multiply every item's scale-variant vector by c, leaving the rest alone."""
    if not (c > 0) or not np.isfinite(c):
        raise DomainError(f"scale factor must be a positive finite number, got {c}")
    items = [replace(it, scalevariant=it.scalevariant * c) for it in query.items]
    return replace(query, items=items)


def invariance_gap(model: SirModel, query: QueryRecord, c: float) -> float:
    """Largest change in any pairwise score difference after scaling by c."""
    base = score_query(model, query)
    scaled = score_query(model, scale_query(query, c))
    delta = scaled - base
    return float(np.max(delta) - np.min(delta))


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: SirModel, path, provenance: dict | None = None):
    if model.stats is None:
        raise ContractError("refusing to checkpoint a model without standardization stats")
    obj = {
        "version": CHECKPOINT_VERSION,
        "provenance": provenance or {},
        "mode": model.mode,
        "widths": list(model.widths),
        "compressor_dim": model.compressor_dim,
        "schema_fingerprint": model.schema.fingerprint(),
        "stats": model.stats.to_json(),
        "params": {
            name: {"shape": list(t.data.shape), "data": [float(v) for v in t.data.reshape(-1)]}
            for name, t in model.params.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(obj, fh)
        fh.write("\n")


def load_checkpoint(path, schema: FeatureSchema) -> SirModel:
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("version") != CHECKPOINT_VERSION:
        raise SchemaError(f"unsupported checkpoint version {obj.get('version')}")
    if obj["schema_fingerprint"] != schema.fingerprint():
        raise SchemaError(
            "checkpoint was trained against a different feature schema "
            f"(fingerprint {obj['schema_fingerprint'][:12]}..., "
            f"expected {schema.fingerprint()[:12]}...)")
    params = ad.ParameterSet()
    for name, spec in obj["params"].items():
        params.add(name, np.array(spec["data"], dtype=np.float64).reshape(spec["shape"]))
    return SirModel(
        schema=schema,
        mode=obj["mode"],
        widths=tuple(obj["widths"]),
        compressor_dim=obj["compressor_dim"],
        params=params,
        stats=StandardizationStats.from_json(obj["stats"]),
    )
