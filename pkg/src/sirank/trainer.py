"""Per-query SGD training with validation-based early stopping, plus the
full loss-by-mode experiment grid and its report rendering."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .data import Dataset, apply_standardization, fit_standardization, split_holdout
from .errors import ConfigError, ContractError, DomainError, TrainingError
from .losses import (
    DEFAULT_SOFTRANK_SIGMA,
    LOSS_NAMES,
    SOFTRANK_LIST_SIZE,
    loss_by_name,
)
from .metrics import bonferroni, mean_ndcg, random_ranker_mean_ndcg, two_sample_t_test
from .perturb import DEFAULT_RATE, DEFAULT_TARGETS, CASE_IDS, PerturbationCase, apply_case
from .scoring import (
    DEFAULT_L,
    DEFAULT_WIDTHS,
    MODES,
    SirModel,
    build_model,
    build_score_graph,
    invariance_gap,
)

IMPROVEMENT_EPS = 1e-6
ALPHA = 0.05

# Step sizes differ per loss because the score-gradient scales do: RankNet sums
# up to n-1 pair gradients, ListNet gradients are probability differences
# bounded by 1, SoftRank gradients are derivatives of an NDCG in [0, 1].
DEFAULT_LEARNING_RATES = {
    "ranknet": 0.01,
    "lambdarank": 0.05,
    "listnet": 0.3,
    "listmle": 0.01,
    "softrank": 0.1,
}


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "ranknet"
    mode: str = "sir"
    max_epochs: int = 100
    patience: int = 20
    learning_rate: float | None = None  # None picks the per-loss default
    sigma: float = DEFAULT_SOFTRANK_SIGMA
    seed: int = 0
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    compressor_dim: int = DEFAULT_L

    def __post_init__(self):
        if self.loss not in LOSS_NAMES:
            raise ConfigError(f"unknown loss {self.loss!r}, expected one of {LOSS_NAMES}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if not (1 <= self.patience < self.max_epochs):
            raise ConfigError(f"patience {self.patience} must be in [1, max_epochs)")
        if not (self.sigma > 0):
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        if self.learning_rate is not None and self.learning_rate < 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.learning_rate}")

    @property
    def resolved_learning_rate(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return DEFAULT_LEARNING_RATES[self.loss]


@dataclass
class TrainHistory:
    train_loss: list[float]
    val_ndcg: list[float]
    stopping_reason: str  # "max_epochs" or "early_stop"
    best_epoch: int

    def to_json(self) -> dict:
        return {
            "train_loss": [float(v) for v in self.train_loss],
            "val_ndcg": [float(v) for v in self.val_ndcg],
            "stopping_reason": self.stopping_reason,
            "best_epoch": int(self.best_epoch),
        }


def _check_prepared(ds: Dataset, mode: str, role: str):
    if ds.stats is None:
        raise ContractError(f"{role} split is not standardized")
    if mode == "deep_only" and not ds.stats.covers_scalevariant:
        raise ContractError(f"{role} split stats must cover scale-variant features "
                            "for deep_only training")


def _softrank_indices(query, epoch_rng: np.random.Generator) -> list[int]:
    booked = query.booked_index
    negatives = [j for j in range(query.n_items) if j != booked]
    keep = SOFTRANK_LIST_SIZE - 1
    if len(negatives) > keep:
        negatives = sorted(epoch_rng.choice(negatives, size=keep, replace=False).tolist())
    return sorted([booked] + negatives)


def train(train_ds: Dataset, val_ds: Dataset, config: TrainConfig) -> tuple[SirModel, TrainHistory]:
    """SGD over one query at a time, stopping when validation NDCG stalls.

    Returns the model restored to its best-validation epoch.
    """
    _check_prepared(train_ds, config.mode, "training")
    _check_prepared(val_ds, config.mode, "validation")
    if val_ds.stats.to_json() != train_ds.stats.to_json():
        raise ContractError("validation split was standardized with different stats "
                            "than the training split")
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise ContractError("need nonempty training and validation splits")

    model = build_model(train_ds.schema, mode=config.mode, widths=config.widths,
                        compressor_dim=config.compressor_dim, seed=config.seed,
                        stats=train_ds.stats)
    loss_fn = loss_by_name(config.loss, config.sigma)
    lr = config.resolved_learning_rate

    train_losses: list[float] = []
    val_curve: list[float] = []
    best = -np.inf
    best_epoch = 0
    best_snapshot = model.params.snapshot()
    bad_epochs = 0
    stopping = "max_epochs"

    for epoch in range(config.max_epochs):
        epoch_rng = np.random.default_rng([config.seed, epoch])
        order = epoch_rng.permutation(len(train_ds))
        total = 0.0
        for qi in order:
            q = train_ds.queries[qi]
            item_indices = None
            labels = q.labels()
            if config.loss == "softrank" and q.n_items > SOFTRANK_LIST_SIZE:
                item_indices = _softrank_indices(q, epoch_rng)
                labels = labels[item_indices]
            try:
                scores = build_score_graph(model, q, item_indices)
                if not np.all(np.isfinite(scores.data)):
                    raise TrainingError("scores became non-finite; training diverged")
                out = loss_fn(scores.data, labels)
                loss_node = ad.attach_loss(scores, out.value, out.score_gradients)
                ad.backward(loss_node, model.params)
                ad.sgd_step(model.params, lr)
            except (TrainingError, DomainError) as exc:
                raise TrainingError(
                    f"epoch {epoch}, query {q.query_id}: {exc}") from exc
            total += out.value
        train_losses.append(total / len(train_ds))

        val = mean_ndcg(model, val_ds).mean
        val_curve.append(val)
        if val > best + IMPROVEMENT_EPS:
            best = val
            best_epoch = epoch
            best_snapshot = model.params.snapshot()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                stopping = "early_stop"
                break

    model.params.restore(best_snapshot)
    history = TrainHistory(train_loss=train_losses, val_ndcg=val_curve,
                           stopping_reason=stopping, best_epoch=best_epoch)
    return model, history


# ---------------------------------------------------------------------------
# experiment grid


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    losses: tuple[str, ...] = LOSS_NAMES
    max_epochs: int = 100
    patience: int = 20
    learning_rate: float | None = None
    sigma: float = DEFAULT_SOFTRANK_SIGMA
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    compressor_dim: int = DEFAULT_L
    targets: tuple[str, ...] = DEFAULT_TARGETS
    rate: float = DEFAULT_RATE

    def __post_init__(self):
        unknown = [l for l in self.losses if l not in LOSS_NAMES]
        if unknown:
            raise ConfigError(f"unknown losses {unknown}")
        if not self.losses:
            raise ConfigError("need at least one loss")


@dataclass
class CellResult:
    loss: str
    mode: str
    seed: int
    val_ndcg: float | None = None
    test_ndcg: float | None = None
    case_ndcg: dict[int, float] = field(default_factory=dict)
    invariance_gap_c1200: float | None = None
    history: TrainHistory | None = None
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "loss": self.loss,
            "mode": self.mode,
            "seed": int(self.seed),
            "val_ndcg": self.val_ndcg,
            "test_ndcg": self.test_ndcg,
            "case_ndcg": {str(k): v for k, v in sorted(self.case_ndcg.items())},
            "invariance_gap_c1200": self.invariance_gap_c1200,
            "history": self.history.to_json() if self.history else None,
            "error": self.error,
        }


@dataclass
class TestCell:
    loss: str
    condition: str  # "test" or "case1".."case4"
    baseline_mean: float
    sir_mean: float
    t: float
    p_value: float
    significant: bool

    def to_json(self) -> dict:
        return {
            "loss": self.loss, "condition": self.condition,
            "baseline_mean": self.baseline_mean, "sir_mean": self.sir_mean,
            "t": self.t, "p_value": self.p_value, "significant": self.significant,
        }


@dataclass
class ExperimentReport:
    cells: list[CellResult]
    tests: list[TestCell]
    meta: dict

    def to_json(self) -> dict:
        return {
            "meta": self.meta,
            "cells": [c.to_json() for c in self.cells],
            "tests": [t.to_json() for t in self.tests],
        }

    def cell(self, loss: str, mode: str) -> CellResult:
        for c in self.cells:
            if c.loss == loss and c.mode == mode:
                return c
        raise KeyError(f"no cell for loss={loss} mode={mode}")


CONDITIONS = ("test",) + tuple(f"case{cid}" for cid in CASE_IDS)
ROW_ORDER = ("deep_only", "sir")  # baseline row first, invariant row second


def _cell_seed(base_seed: int, loss_index: int, mode_index: int) -> int:
    return base_seed * 100 + loss_index * 10 + mode_index


def run_experiment(ds: Dataset, config: ExperimentConfig) -> ExperimentReport:
    """Train every loss in both modes on one split, evaluate under all
    perturbation cases, and compare the mode pairs with one-sided t-tests."""
    train_raw, val_raw, test_raw = split_holdout(ds, seed=config.seed)

    prepared: dict[str, tuple[Dataset, Dataset, Dataset, dict[int, Dataset]]] = {}
    for mode in MODES:
        stats = fit_standardization(train_raw, ds.schema,
                                    include_scalevariant=(mode == "deep_only"))
        tr = apply_standardization(train_raw, stats)
        va = apply_standardization(val_raw, stats)
        te = apply_standardization(test_raw, stats)
        cases = {
            cid: apply_case(te, PerturbationCase(cid, targets=config.targets, rate=config.rate))
            for cid in CASE_IDS
        }
        prepared[mode] = (tr, va, te, cases)

    cells: list[CellResult] = []
    per_query: dict[tuple[str, str, str], np.ndarray] = {}
    for li, loss in enumerate(config.losses):
        for mi, mode in enumerate(ROW_ORDER):
            seed = _cell_seed(config.seed, li, mi)
            cell = CellResult(loss=loss, mode=mode, seed=seed)
            cells.append(cell)
            tr, va, te, cases = prepared[mode]
            tc = TrainConfig(loss=loss, mode=mode, max_epochs=config.max_epochs,
                             patience=config.patience, learning_rate=config.learning_rate,
                             sigma=config.sigma, seed=seed, widths=config.widths,
                             compressor_dim=config.compressor_dim)
            try:
                model, history = train(tr, va, tc)
            except TrainingError as exc:
                cell.error = str(exc)
                continue
            cell.history = history
            cell.val_ndcg = float(history.val_ndcg[history.best_epoch])
            clean = mean_ndcg(model, te)
            cell.test_ndcg = clean.mean
            per_query[(loss, mode, "test")] = clean.per_query
            for cid, ds_case in cases.items():
                res = mean_ndcg(model, ds_case)
                cell.case_ndcg[cid] = res.mean
                per_query[(loss, mode, f"case{cid}")] = res.per_query
            cell.invariance_gap_c1200 = float(max(
                invariance_gap(model, q, 1200.0) for q in te.queries))

    n_comparisons = len(CONDITIONS) * len(config.losses)
    threshold = bonferroni(ALPHA, n_comparisons)
    tests: list[TestCell] = []
    for loss in config.losses:
        for condition in CONDITIONS:
            key_b = (loss, "deep_only", condition)
            key_s = (loss, "sir", condition)
            if key_b not in per_query or key_s not in per_query:
                continue
            res = two_sample_t_test(per_query[key_b], per_query[key_s])
            tests.append(TestCell(
                loss=loss, condition=condition,
                baseline_mean=float(per_query[key_b].mean()),
                sir_mean=float(per_query[key_s].mean()),
                t=res.t, p_value=res.p_value,
                significant=bool(res.p_value < threshold),
            ))

    meta = {
        "seed": config.seed,
        "n_queries": len(ds),
        "split_sizes": [len(train_raw), len(val_raw), len(test_raw)],
        "losses": list(config.losses),
        "alpha": ALPHA,
        "n_comparisons": n_comparisons,
        "significance_threshold": threshold,
        "random_ranker_test_ndcg": random_ranker_mean_ndcg(test_raw),
        "learning_rates": {
            loss: (config.learning_rate if config.learning_rate is not None
                   else DEFAULT_LEARNING_RATES[loss])
            for loss in config.losses
        },
        "max_epochs": config.max_epochs,
        "patience": config.patience,
        "widths": list(config.widths),
        "compressor_dim": config.compressor_dim,
        "targets": list(config.targets),
        "rate": config.rate,
    }
    return ExperimentReport(cells=cells, tests=tests, meta=meta)


# ---------------------------------------------------------------------------
# rendering


def _fmt(v: float | None) -> str:
    return "  n/a " if v is None else f"{v:.4f}"


def render_text(report: ExperimentReport) -> str:
    """Aligned table: one row per trained model, NDCG per condition; a star
    marks conditions where the deep-only counterpart scored significantly
    lower than the invariant variant."""
    stars = {(t.loss, t.condition): t.significant for t in report.tests}
    lines = []
    header = f"{'model':<22} {'val':>8} {'test':>8} " + " ".join(
        f"{c:>8}" for c in CONDITIONS[1:])
    lines.append(header)
    lines.append("-" * len(header))
    for cell in report.cells:
        name = cell.loss if cell.mode == "deep_only" else f"{cell.loss} (inv)"
        if cell.error:
            lines.append(f"{name:<22} failed: {cell.error}")
            continue
        row = [f"{name:<22}", f"{_fmt(cell.val_ndcg):>8}", f"{_fmt(cell.test_ndcg):>8}"]
        for cid in CASE_IDS:
            mark = "*" if cell.mode == "sir" and stars.get((cell.loss, f"case{cid}")) else " "
            row.append(f"{_fmt(cell.case_ndcg.get(cid)):>7}{mark}")
        lines.append(" ".join(row))
    lines.append("")
    lines.append(f"star: counterpart significantly lower, one-sided Welch p < "
                 f"{report.meta['significance_threshold']:g} "
                 f"(alpha {report.meta['alpha']}, {report.meta['n_comparisons']} comparisons)")
    lines.append(f"random-ranker test NDCG: {report.meta['random_ranker_test_ndcg']:.4f}")
    return "\n".join(lines) + "\n"


def render_csv(report: ExperimentReport) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["loss", "mode", "val_ndcg", "test_ndcg"]
                    + [f"case{cid}_ndcg" for cid in CASE_IDS]
                    + ["invariance_gap_c1200", "error"])
    for cell in report.cells:
        writer.writerow([
            cell.loss, cell.mode, cell.val_ndcg, cell.test_ndcg,
            *[cell.case_ndcg.get(cid) for cid in CASE_IDS],
            cell.invariance_gap_c1200, cell.error or "",
        ])
    writer.writerow([])
    writer.writerow(["loss", "condition", "baseline_mean", "sir_mean", "t", "p_value",
                     "significant"])
    for t in report.tests:
        writer.writerow([t.loss, t.condition, t.baseline_mean, t.sir_mean, t.t,
                         t.p_value, t.significant])
    return buf.getvalue()
