"""Bayes-factor-gated iterative neural-network pruning at desk scale."""

from .bayes import (
    AFTER_PRUNE,
    BEFORE_PRUNE,
    BayesFactorRecord,
    PosteriorRecord,
    PriorSpec,
    bayes_factor,
    gate,
    log_likelihood,
    log_prior,
    posterior_record,
)
from .data import BatchIterator, LabeledDataset, batches, load_dataset, normalize
from .experiment import (
    ExperimentConfig,
    MetricsRow,
    SummaryRow,
    emit_traces,
    evaluate,
    make_grid_configs,
    run,
    run_grid,
    train_epoch,
)
from .models import ModelSpec, build_cnn, build_fcn, build_model
from .nn import (
    BatchGradients,
    Conv2D,
    Dense,
    Flatten,
    MaxPool2D,
    Network,
    ReLU,
    backward,
    loss_and_gradients,
    softmax_cross_entropy,
)
from .optim import SGD, Adam, make_optimizer
from .pruning import PruneState, apply_mask, magnitude_prune, random_prune, sparsity

__version__ = "0.1.0"
