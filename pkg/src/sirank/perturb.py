"""Test-time rescaling of designated price-like features.

Each case multiplies the target columns by a per-query scalar: the number of
nights (1), the query's exchange rate (2), both in sequence (3), or one fixed
conversion rate applied to every query (4). Multipliers come from stored
per-query auxiliaries, never fresh randomness, so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, QueryRecord
from .errors import ConfigError

DEFAULT_TARGETS = ("price", "discount")
DEFAULT_RATE = 1200.0
CASE_IDS = (1, 2, 3, 4)


@dataclass(frozen=True)
class PerturbationCase:
    case_id: int
    targets: tuple[str, ...] = DEFAULT_TARGETS
    rate: float = DEFAULT_RATE

    def __post_init__(self):
        if self.case_id not in CASE_IDS:
            raise ConfigError(f"case must be one of {CASE_IDS}, got {self.case_id}")
        if not self.targets:
            raise ConfigError("need at least one target feature")
        if not (self.rate > 0):
            raise ConfigError(f"rate must be > 0, got {self.rate}")

    def factors(self, query: QueryRecord) -> tuple[float, ...]:
        """Per-query multipliers, applied left to right."""
        if self.case_id == 1:
            return (float(query.num_nights),)
        if self.case_id == 2:
            return (float(query.exchange_rate),)
        if self.case_id == 3:
            return (float(query.num_nights), float(query.exchange_rate))
        return (self.rate,)


def apply_case(ds: Dataset, case: PerturbationCase) -> Dataset:
    """Return a copy of ds with the case's rescaling applied per query.

    Labels, fixed features, and query features are untouched; any
    standardized deep-path copies carry over unchanged, since the rescaling
    only touches raw scale-variant values.
    """
    sv_names = ds.schema.item_features_scalevariant
    missing = sorted(set(case.targets) - set(sv_names))
    if missing:
        raise ConfigError(f"target features {missing} are not scale-variant "
                          f"features of the schema (has {list(sv_names)})")
    cols = np.array([sv_names.index(t) for t in case.targets], dtype=np.int64)

    queries = []
    for q in ds.queries:
        factors = case.factors(q)
        items = []
        for it in q.items:
            sv = it.scalevariant.copy()
            for f in factors:
                sv[cols] = sv[cols] * f
            items.append(replace(it, scalevariant=sv))
        queries.append(replace(q, items=items))
    return Dataset(schema=ds.schema, queries=queries, stats=ds.stats)
