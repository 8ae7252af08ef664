"""Scoring: greedy latent assignment with temporal exclusion.

Templates pick frames one at a time in fixed order; each pick removes a
window of neighboring frames from later picks. The ordering cost of the
realized rank pattern is added to the mean template score afterwards, so
the greedy choice itself never sees the cost table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LomoError
from .model import LomoModel, perm_index, rank_pattern


@dataclass
class FrameSequence:
    """One sequence: frames is an (N, d) float64 array, plus an id string."""

    frames: np.ndarray
    id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise LomoError(
                f"sequence {self.id or '<unnamed>'}: frames must be (N, d), "
                f"got shape {self.frames.shape}"
            )
        if self.frames.shape[0] < 1:
            raise LomoError(f"sequence {self.id or '<unnamed>'}: needs at least one frame")
        if not np.isfinite(self.frames).all():
            raise LomoError(f"sequence {self.id or '<unnamed>'}: non-finite frame values")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class InferenceConfig:
    """exclusion_t: frames removed on each side of a chosen frame."""

    exclusion_t: int = 5

    def __post_init__(self):
        if self.exclusion_t < 0:
            raise LomoError(f"exclusion_t must be >= 0, got {self.exclusion_t}")


@dataclass(frozen=True)
class LatentAssignment:
    chosen: tuple[int, ...]  # 1-based frame index per template
    template_scores: tuple[float, ...]
    perm: int  # 1-based lexicographic index of the rank pattern
    ordering_cost: float
    total: float


def latent_assign(model: LomoModel, seq: FrameSequence, cfg: InferenceConfig) -> LatentAssignment:
    """Greedy per-template argmax with closed exclusion window [k-t, k+t]."""
    if model.dim != seq.dim:
        raise LomoError(
            f"dimension mismatch: model d={model.dim}, sequence "
            f"{seq.id or '<unnamed>'} d={seq.dim}"
        )
    n = seq.num_frames
    m = model.num_templates
    t = cfg.exclusion_t
    alive = np.ones(n, dtype=bool)
    chosen: list[int] = []
    scores: list[float] = []
    for i in range(m):
        if not alive.any():
            raise LomoError(
                f"sequence too short for M,t: N={n} frames cannot supply "
                f"M={m} picks with exclusion_t={t}"
                + (f" (sequence {seq.id})" if seq.id else "")
            )
        row = seq.frames @ model.templates[i]
        masked = np.where(alive, row, -np.inf)
        f = int(np.argmax(masked))  # first occurrence = lowest frame index
        chosen.append(f + 1)
        scores.append(float(row[f]))
        alive[max(0, f - t) : f + t + 1] = False
    perm = perm_index(rank_pattern(chosen))
    cost = float(model.costs[perm - 1])
    total = float(np.mean(scores)) + cost
    return LatentAssignment(
        chosen=tuple(chosen),
        template_scores=tuple(scores),
        perm=perm,
        ordering_cost=cost,
        total=total,
    )


def score(model: LomoModel, seq: FrameSequence, cfg: InferenceConfig) -> float:
    """Sequence score; the decision boundary is 0."""
    return latent_assign(model, seq, cfg).total


def fuse_scores(scores) -> float:
    """Late fusion: arithmetic mean of per-model scores."""
    values = [float(s) for s in scores]
    if not values:
        raise LomoError("fuse_scores needs at least one score")
    return float(np.mean(values))


def ova_predict(
    models: dict[str, LomoModel], seq: FrameSequence, cfg: InferenceConfig
) -> tuple[str, dict[str, float]]:
    """One-vs-all: argmax class score, ties to the lexicographically smallest."""
    if not models:
        raise LomoError("ova_predict needs at least one model")
    scores: dict[str, float] = {}
    best_class = None
    best_score = -np.inf
    for name in sorted(models):
        s = score(models[name], seq, cfg)
        scores[name] = s
        if s > best_score:
            best_class = name
            best_score = s
    return best_class, scores
