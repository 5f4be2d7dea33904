"""Deterministic end-to-end robustness certification for neural-net training.

certitrain trains small networks by propagating interval bounds through every
forward and backward pass of SGD over a perturbed training set, producing
interval-valued parameters that capture all models an attacker could reach,
then certifies test predictions against combined training-time and test-time
perturbations.
"""

from .certifier import (
    CERTIFIED_CORRECT,
    CERTIFIED_WRONG,
    NOT_CERTIFIED,
    CertificationResult,
    SampleResult,
    certified_accuracy,
    certify_sample,
    write_results_csv,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    Dataset,
    fetch_mnist,
    filter_classes,
    gen_two_moons,
    load_mnist17,
    load_mnist_idx,
    split_dataset,
    write_idx_images,
    write_idx_labels,
)
from .interval import IntervalTensor, apply_monotonic, rump_matmul
from .layers import RELU, SIGMOID, ActivationLayer, LinearLayer
from .losses import (
    BINARY_CROSS_ENTROPY,
    CROSS_ENTROPY,
    bce_grad_interval,
    bce_loss_interval,
    ce_grad_interval,
    ce_loss_interval,
    logsoftmax_interval,
    one_hot,
    softmax_interval,
)
from .model import IntervalModel, build_model, model_from_params
from .oracle import exact_matmul_hull, finite_diff_check, replay_containment
from .trainer import (
    DivergenceError,
    PerturbedDataset,
    TrainConfig,
    TrainTrace,
    accuracy,
    lift_to_interval,
    make_schedule,
    pretrain_concrete,
    sgd_step,
    train_certified,
)

__version__ = "0.1.0"
