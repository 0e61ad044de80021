"""Scale-invariant ranking models and experiment tooling.

The scoring core combines a deep tower over scale-free features with a wide
bilinear term over logarithms of scale-variant features, which makes pairwise
score differences exactly invariant to per-query positive rescaling. The rest
of the package supplies synthetic retrieval data, five classic ranking losses
on a small reverse-mode tape, NDCG and test statistics, perturbation cases,
and a trainer that reproduces the full loss-by-mode comparison grid.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContractError,
    DomainError,
    ParseError,
    SchemaError,
    ShapeError,
    SirankError,
    TrainingError,
    ValidationError,
)
from .autodiff import ParameterSet, Tensor, backward, gradient_check, sgd_step
from .data import (
    Dataset,
    FeatureSchema,
    ItemRecord,
    QueryFeature,
    QueryRecord,
    StandardizationStats,
    apply_standardization,
    fit_standardization,
    load_dataset,
    load_schema,
    save_dataset,
    save_schema,
    split_holdout,
)
from .generator import GeneratorConfig, generate
from .scoring import (
    MODES,
    Ranking,
    SirModel,
    build_model,
    build_score_graph,
    invariance_gap,
    load_checkpoint,
    rank,
    save_checkpoint,
    scale_query,
    score_query,
)
from .losses import (
    LOSS_NAMES,
    LossOutput,
    RankDistribution,
    lambdarank_loss,
    listmle_loss,
    listnet_loss,
    loss_by_name,
    pairwise_win_prob,
    rank_distribution,
    ranknet_loss,
    softrank_objective,
)
from .metrics import (
    EvalResult,
    TTestResult,
    bonferroni,
    mean_ndcg,
    ndcg,
    random_ranker_mean_ndcg,
    two_sample_t_test,
)
from .perturb import CASE_IDS, DEFAULT_TARGETS, PerturbationCase, apply_case
from .trainer import (
    ExperimentConfig,
    ExperimentReport,
    TrainConfig,
    TrainHistory,
    render_csv,
    render_text,
    run_experiment,
    train,
)

__all__ = [
    "__version__",
    # errors
    "SirankError", "ShapeError", "DomainError", "ValidationError", "ParseError",
    "SchemaError", "ConfigError", "ContractError", "TrainingError",
    # tape
    "Tensor", "ParameterSet", "backward", "gradient_check", "sgd_step",
    # data
    "FeatureSchema", "QueryFeature", "ItemRecord", "QueryRecord", "Dataset",
    "StandardizationStats", "load_dataset", "save_dataset", "load_schema",
    "save_schema", "fit_standardization", "apply_standardization", "split_holdout",
    # synthetic data
    "GeneratorConfig", "generate",
    # scoring
    "MODES", "SirModel", "build_model", "build_score_graph", "score_query",
    "rank", "Ranking", "scale_query", "invariance_gap", "save_checkpoint",
    "load_checkpoint",
    # losses
    "LOSS_NAMES", "LossOutput", "loss_by_name", "ranknet_loss", "lambdarank_loss",
    "listnet_loss", "listmle_loss", "softrank_objective", "rank_distribution",
    "RankDistribution", "pairwise_win_prob",
    # metrics
    "ndcg", "mean_ndcg", "EvalResult", "random_ranker_mean_ndcg",
    "two_sample_t_test", "TTestResult", "bonferroni",
    # perturbation
    "PerturbationCase", "apply_case", "CASE_IDS", "DEFAULT_TARGETS",
    # training
    "TrainConfig", "TrainHistory", "train", "ExperimentConfig", "ExperimentReport",
    "run_experiment", "render_text", "render_csv",
]
