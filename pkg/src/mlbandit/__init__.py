"""Upper-confidence second-order learning for multilabel classification
and ranking with partial feedback."""

from .environment import (
    Dataset,
    GroundTruthModel,
    ModelError,
    ParseError,
    Round,
    dump_dataset,
    gen_context,
    gen_ground_truth,
    load_dataset,
    marginals,
    sample_labels,
)
from .harness import ExperimentConfig, RoundMetrics, read_csv, run_experiment, write_csv
from .learner import (
    ClassState,
    ConfigError,
    FeedbackError,
    Learner,
    LearnerConfig,
    PredictionTrace,
    confidence_width,
    project,
)
from .losses import (
    CostStructure,
    LossParams,
    bayes_optimal_ranking,
    bayes_optimal_subset,
    brute_force_bayes,
    expected_loss_ac,
    expected_p_rank,
    loss_ac_full,
    loss_ac_reduced,
    p_rank_loss,
    rank_loss_full,
    regret_round,
)
from .surrogate import (
    DomainError,
    SurrogateKind,
    SurrogateSpec,
    clip,
    eval_g,
    eval_loss,
    eval_p,
    logistic_spec,
    square_spec,
)

__version__ = "0.1.0"
