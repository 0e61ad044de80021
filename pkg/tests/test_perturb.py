import numpy as np
import pytest

from sirank.data import apply_standardization, fit_standardization
from sirank.errors import ConfigError
from sirank.metrics import mean_ndcg
from sirank.perturb import PerturbationCase, apply_case
from sirank.scoring import build_model, rank, score_query

from conftest import hand_dataset


def test_case_validation():
    with pytest.raises(ConfigError):
        PerturbationCase(case_id=5)
    with pytest.raises(ConfigError):
        PerturbationCase(case_id=4, rate=0.0)
    with pytest.raises(ConfigError):
        PerturbationCase(case_id=1, targets=())


def test_unknown_target_rejected():
    ds = hand_dataset(n_queries=4)
    with pytest.raises(ConfigError, match="taxes"):
        apply_case(ds, PerturbationCase(case_id=1, targets=("price", "taxes")))


def test_case1_with_single_night_is_identity():
    ds = hand_dataset(n_queries=6, seed=1)
    for q in ds.queries:
        q.num_nights = 1
        q.numeric[0] = 1.0
    out = apply_case(ds, PerturbationCase(case_id=1))
    for q0, q1 in zip(ds.queries, out.queries):
        for i0, i1 in zip(q0.items, q1.items):
            np.testing.assert_array_equal(i0.scalevariant, i1.scalevariant)


def test_case4_multiplies_targets_exactly():
    ds = hand_dataset(n_queries=6, seed=2)
    out = apply_case(ds, PerturbationCase(case_id=4))
    for q0, q1 in zip(ds.queries, out.queries):
        for i0, i1 in zip(q0.items, q1.items):
            np.testing.assert_array_equal(i1.scalevariant, i0.scalevariant * 1200.0)


def test_case2_uses_per_query_rate():
    ds = hand_dataset(n_queries=8, seed=3)
    out = apply_case(ds, PerturbationCase(case_id=2))
    for q0, q1 in zip(ds.queries, out.queries):
        for i0, i1 in zip(q0.items, q1.items):
            np.testing.assert_array_equal(i1.scalevariant, i0.scalevariant * q0.exchange_rate)


def test_case3_equals_sequential_composition():
    ds = hand_dataset(n_queries=10, seed=4)
    via_case3 = apply_case(ds, PerturbationCase(case_id=3))
    stepwise = apply_case(apply_case(ds, PerturbationCase(case_id=1)),
                          PerturbationCase(case_id=2))
    for q0, q1 in zip(via_case3.queries, stepwise.queries):
        for i0, i1 in zip(q0.items, q1.items):
            np.testing.assert_array_equal(i0.scalevariant, i1.scalevariant)


def test_partial_target_selection():
    ds = hand_dataset(n_queries=4, seed=5)
    out = apply_case(ds, PerturbationCase(case_id=4, targets=("discount",)))
    for q0, q1 in zip(ds.queries, out.queries):
        for i0, i1 in zip(q0.items, q1.items):
            assert i1.scalevariant[0] == i0.scalevariant[0]
            assert i1.scalevariant[1] == i0.scalevariant[1] * 1200.0


def test_everything_else_untouched_and_input_unmodified():
    ds = hand_dataset(n_queries=6, seed=6)
    snapshot = [(q.numeric.copy(), q.fixed_matrix().copy(), q.scalevariant_matrix().copy(),
                 q.labels().copy()) for q in ds.queries]
    out = apply_case(ds, PerturbationCase(case_id=3))
    for q, (numeric, fixed, sv, labels) in zip(ds.queries, snapshot):
        np.testing.assert_array_equal(q.numeric, numeric)
        np.testing.assert_array_equal(q.fixed_matrix(), fixed)
        np.testing.assert_array_equal(q.scalevariant_matrix(), sv)  # input intact
    for q, q_out, (numeric, fixed, sv, labels) in zip(ds.queries, out.queries, snapshot):
        np.testing.assert_array_equal(q_out.numeric, numeric)
        np.testing.assert_array_equal(q_out.fixed_matrix(), fixed)
        np.testing.assert_array_equal(q_out.labels(), labels)
        assert q_out.num_nights == q.num_nights


def test_multiplier_constant_within_query():
    ds = hand_dataset(n_queries=8, seed=7)
    for case_id in (1, 2, 3, 4):
        out = apply_case(ds, PerturbationCase(case_id=case_id))
        for q0, q1 in zip(ds.queries, out.queries):
            ratios = np.concatenate([
                (i1.scalevariant / i0.scalevariant)
                for i0, i1 in zip(q0.items, q1.items)
            ])
            assert np.max(ratios) - np.min(ratios) < 1e-9 * np.max(ratios)


def test_sir_rankings_survive_every_case():
    ds = hand_dataset(n_queries=10, seed=8)
    std = apply_standardization(ds, fit_standardization(ds, ds.schema))
    model = build_model(std.schema, widths=(8, 4), compressor_dim=2, seed=1, stats=std.stats)
    base = mean_ndcg(model, std)
    for case_id in (1, 2, 3, 4):
        perturbed = apply_case(std, PerturbationCase(case_id=case_id))
        for q0, q1 in zip(std.queries, perturbed.queries):
            np.testing.assert_array_equal(
                rank(score_query(model, q1)).order, rank(score_query(model, q0)).order)
        after = mean_ndcg(model, perturbed)
        assert abs(after.mean - base.mean) < 1e-9
