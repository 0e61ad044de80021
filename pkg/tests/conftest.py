"""Hand-built fixtures, deliberately independent of the package's generator."""

import numpy as np
import pytest

from sirank.data import Dataset, FeatureSchema, ItemRecord, QueryFeature, QueryRecord

CURRENCIES = [1.0, 0.85, 7.1, 110.0, 1200.0]


def tiny_schema() -> FeatureSchema:
    return FeatureSchema(
        query_features=(
            QueryFeature("num_nights", "numeric"),
            QueryFeature("exchange_rate", "numeric"),
            QueryFeature("lead_days", "numeric"),
            QueryFeature("device_type", "categorical", cardinality=3, embedding_dim=2),
        ),
        item_features_fixed=("star_rating", "review_score"),
        item_features_scalevariant=("price", "discount"),
    )


def hand_dataset(n_queries=12, seed=0, items=(3, 6)) -> Dataset:
    rng = np.random.default_rng(seed)
    schema = tiny_schema()
    queries = []
    for qi in range(n_queries):
        d = int(rng.integers(items[0], items[1] + 1))
        booked = int(rng.integers(d))
        recs = [
            ItemRecord(
                item_id=f"q{qi}-i{j}",
                fixed=rng.uniform(0.5, 5.0, size=schema.k1),
                scalevariant=rng.uniform(20.0, 400.0, size=schema.k2),
                label=int(j == booked),
            )
            for j in range(d)
        ]
        nights = int(rng.integers(1, 15))
        rate = float(rng.choice(CURRENCIES))
        queries.append(QueryRecord(
            query_id=f"q{qi}",
            numeric=np.array([float(nights), rate, float(rng.normal())]),
            category_ids=np.array([int(rng.integers(3))], dtype=np.int64),
            num_nights=nights,
            exchange_rate=rate,
            items=recs,
        ))
    return Dataset(schema=schema, queries=queries)


@pytest.fixture
def schema():
    return tiny_schema()


@pytest.fixture
def dataset():
    return hand_dataset()
