"""Stochastic subgradient training of the regularized hinge objective.

One uniformly sampled example per step; on a margin violation every
template shrinks and moves toward its chosen frame, and the cost of the
realized ordering moves by eta (sign per the configured update mode).
The MIL and pooled-SVM baselines are the M=1 restriction with the cost
table frozen at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import LomoError, Rng, child_seed
from .inference import FrameSequence, InferenceConfig, latent_assign
from .model import MAX_TEMPLATES, LomoModel, init_model

VARIANTS = ("lomo", "mil", "svm_pool")
COST_UPDATES = ("gradient", "literal")
POOLING_MODES = ("mean", "max")


@dataclass
class LabeledSequence:
    sequence: FrameSequence
    label: int  # +1 or -1
    group: str = ""

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise LomoError(f"label must be +1 or -1, got {self.label!r}")


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    max_iter=None means 100 passes' worth of uniform samples (100 * |data|).
    Variants mil and svm_pool force a single template and keep costs at 0;
    pooling applies to svm_pool inputs only.
    """

    num_templates: int = 3
    eta: float = 0.05
    reg_lambda: float = 1e-5
    exclusion_t: int = 5
    max_iter: int | None = None
    seed: int = 42
    variant: str = "lomo"
    cost_update: str = "gradient"
    pooling: str = "mean"

    def __post_init__(self):
        self.variant = str(self.variant).lower()
        self.cost_update = str(self.cost_update).lower()
        self.pooling = str(self.pooling).lower()
        if self.variant not in VARIANTS:
            raise LomoError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.cost_update not in COST_UPDATES:
            raise LomoError(
                f"cost_update must be one of {COST_UPDATES}, got {self.cost_update!r}"
            )
        if self.pooling not in POOLING_MODES:
            raise LomoError(f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}")
        if self.variant != "lomo":
            self.num_templates = 1  # MIL / pooled SVM are the single-template restriction
        if not 1 <= self.num_templates <= MAX_TEMPLATES:
            raise LomoError(
                f"num_templates must be in 1..{MAX_TEMPLATES}, got {self.num_templates}"
            )
        if not self.eta > 0:
            raise LomoError(f"eta must be > 0, got {self.eta}")
        if self.reg_lambda < 0:
            raise LomoError(f"reg_lambda must be >= 0, got {self.reg_lambda}")
        if self.exclusion_t < 0:
            raise LomoError(f"exclusion_t must be >= 0, got {self.exclusion_t}")
        if self.max_iter is not None and self.max_iter < 1:
            raise LomoError(f"max_iter must be >= 1, got {self.max_iter}")

    @property
    def freeze_costs(self) -> bool:
        return self.variant != "lomo"

    def inference_config(self) -> InferenceConfig:
        return InferenceConfig(exclusion_t=self.exclusion_t)


def objective(model: LomoModel, data, reg_lambda: float, cfg: TrainConfig) -> float:
    """(lambda/2) * sum ||w_i||^2 + mean hinge [1 - y*s]_+ over the data."""
    if not data:
        raise LomoError("objective needs at least one example")
    icfg = cfg.inference_config()
    reg = 0.5 * reg_lambda * float(np.sum(model.templates * model.templates))
    hinge = 0.0
    for ex in data:
        s = latent_assign(model, ex.sequence, icfg).total
        hinge += max(0.0, 1.0 - ex.label * s)
    return reg + hinge / len(data)


def sgd_step(model: LomoModel, example: LabeledSequence, cfg: TrainConfig) -> LomoModel:
    """One subgradient step; returns the input model when the margin holds."""
    icfg = cfg.inference_config()
    assign = latent_assign(model, example.sequence, icfg)
    y = example.label
    if y * assign.total >= 1.0:
        return model
    eta = cfg.eta
    m = model.num_templates
    shrink = 1.0 - cfg.reg_lambda * eta
    picked = example.sequence.frames[np.array(assign.chosen) - 1]  # (M, d)
    templates = model.templates * shrink + (eta * y / m) * picked
    costs = model.costs.copy()
    if not cfg.freeze_costs:
        if cfg.cost_update == "gradient":
            costs[assign.perm - 1] += eta * y
        else:
            costs[assign.perm - 1] -= eta
    return LomoModel(templates, costs)


def _min_frames(m: int, t: int) -> int:
    # worst case: every pick is interior and removes a full 2t+1 window
    return (m - 1) * (2 * t + 1) + 1


def _validate_train_data(data, cfg: TrainConfig) -> int:
    if not data:
        raise LomoError("training data is empty")
    labels = {ex.label for ex in data}
    if labels != {-1, 1}:
        only = "+1" if labels == {1} else "-1"
        raise LomoError(f"training data contains only label {only}")
    dim = data[0].sequence.dim
    need = _min_frames(cfg.num_templates, cfg.exclusion_t)
    for ex in data:
        seq = ex.sequence
        if seq.dim != dim:
            raise LomoError(
                f"sequence {seq.id or '<unnamed>'}: dimension {seq.dim} differs from {dim}"
            )
        if seq.num_frames < need:
            raise LomoError(
                f"sequence {seq.id or '<unnamed>'}: {seq.num_frames} frames is too short "
                f"for M={cfg.num_templates}, t={cfg.exclusion_t} (needs >= {need})"
            )
        if cfg.variant == "svm_pool" and seq.num_frames != 1:
            raise LomoError(
                f"sequence {seq.id or '<unnamed>'}: svm_pool expects pre-pooled "
                f"single-frame sequences, got {seq.num_frames} frames"
            )
    return dim


def train(data, cfg: TrainConfig) -> LomoModel:
    """Run max_iter uniform-with-replacement subgradient steps from cfg.seed."""
    data = list(data)
    dim = _validate_train_data(data, cfg)
    rng = Rng(cfg.seed)
    model = init_model(dim, cfg.num_templates, rng)
    iters = cfg.max_iter if cfg.max_iter is not None else 100 * len(data)
    n = len(data)
    for _ in range(iters):
        model = sgd_step(model, data[rng.randint(n)], cfg)
    return model


def train_ova(data, cfg: TrainConfig, classes=None) -> dict[str, LomoModel]:
    """One binary model per class (sorted order fixes the per-class child seed).

    `data` is a sequence of (FrameSequence, class label) pairs; passing an
    explicit class list makes a missing class an error rather than a silent
    omission (used by cross-validation on sparse folds).
    """
    data = list(data)
    if not data:
        raise LomoError("training data is empty")
    present = sorted({label for _, label in data})
    classes = sorted(classes) if classes is not None else present
    if len(classes) < 2:
        raise LomoError(f"one-vs-all needs >= 2 classes, got {classes}")
    models: dict[str, LomoModel] = {}
    for idx, name in enumerate(classes):
        if name not in present:
            raise LomoError(f"class {name!r} has zero examples in training data")
        relabeled = [
            LabeledSequence(seq, 1 if label == name else -1) for seq, label in data
        ]
        sub_cfg = replace(cfg, seed=child_seed(cfg.seed, idx))
        models[name] = train(relabeled, sub_cfg)
    return models
