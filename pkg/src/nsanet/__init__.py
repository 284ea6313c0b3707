"""One-hidden-layer ReLU networks with annealed node and feature pruning.

Train small tabular classifiers that start wide, shed hidden nodes along a
decaying schedule (keeping the largest normalized output weights), and
optionally shed input features by group weight, ending at an exact target
size. Includes XOR-style synthetic data, evaluation metrics, and a seeded
experiment harness with a CLI.
"""

from .anneal import (
    AnnealSchedule,
    PruneTrace,
    feature_schedule,
    node_schedule,
    run_fsa_nsa,
    run_nsa,
    schedule_value,
)
from .data import (
    CsvSchema,
    Dataset,
    SplitSpec,
    StandardizeTransform,
    gen_xor,
    load_csv,
    save_csv,
    split,
    standardize,
    xor_labels,
)
from .metrics import EvalReport, HitTimeResult, accuracy, auc, evaluate, hit_time
from .model import (
    FeatureRelevance,
    MlpModel,
    feature_relevance,
    forward,
    load_model,
    model_from_dict,
    model_to_dict,
    node_importance,
    normalize_nodes,
    prune_features,
    prune_nodes,
    save_model,
)
from .train import (
    AdamHyper,
    AdamState,
    Grads,
    TrainConfig,
    adam_step,
    init_adam_state,
    init_model,
    loss_and_grad,
    mean_loss,
    train_epoch,
    train_model,
)

__version__ = "0.1.0"
