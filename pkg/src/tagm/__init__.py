"""Attention-gated recurrent sequence classification.

A scalar gate per timestep, produced by a bi-directional scorer over the
whole sequence, decides how much of each observation enters the recurrent
state; noisy timesteps can be shut out entirely. Includes plain-RNN and
attention-pooling baselines, exact BPTT with a finite-difference oracle,
RMSprop training, a synthetic noisy-sequence benchmark generator, and
binary dataset/checkpoint formats.
"""

from .attention import AttentionParams, AttentionTrace, attention_backward, attention_forward, localization_ratio
from .baselines import RnnParams, amnn_backward, amnn_forward, plain_rnn_backward, plain_rnn_forward
from .data import (
    Dataset,
    FormatError,
    GenConfig,
    Sequence,
    as_multilabel,
    export_csv,
    generate,
    load_checkpoint,
    load_dataset,
    save_checkpoint,
    save_dataset,
    with_train_subset,
)
from .gated_unit import CellParams, CellTrace, cell_backward, cell_forward
from .heads import HeadParams, bce_loss, nll_loss, sigmoid_head, softmax_head
from .numerics import DimensionError, affine, clip_elementwise, relu, sigmoid, softmax_stable
from .training import (
    AmnnModel,
    GradCheckReport,
    GridSearchResult,
    PlainRnnModel,
    TagmModel,
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    attention_profile,
    average_precision_per_class,
    backward_full,
    evaluate,
    forward_full,
    gradient_check,
    grid_search,
    init_model,
    model_size,
    param_count,
    predict_proba,
    rmsprop_step,
    train,
)

__version__ = "0.1.0"
