"""Multi-label concept detection: label encoding, sample-averaged F1, soft-F1
losses with analytic gradients, a sigmoid classification head and its
training loop."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .labels import (
    CATEGORIES,
    Dataset,
    LabeledSample,
    LabelVocabulary,
    build_vocabulary,
    concept_frequency_histogram,
    cui_count_histogram,
    decode,
    encode,
    label_cardinality,
    label_density,
)
from .losses import LossOutput, LossSpec, bce, one_minus_soft_f1, product_loss, soft_f1_components, sum_loss
from .metrics import SampleScore, mean_f1, sample_f1, threshold_predictions
from .model import HeadConfig, ModelParams, backward, forward, init_model, predict
from .training import (
    EpochRecord,
    PlateauPolicy,
    TrainingConfig,
    augment_hflip,
    nadam_step,
    reduce_lr_on_plateau,
    split_validation,
    train,
)
