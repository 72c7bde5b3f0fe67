"""
Scalar loss and penalty functions of the restoration-prior GAN objective, plus
the multi-level replay-buffer policy. Pure functions over precomputed scores
and features; no networks are involved.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TypeVar

import numpy as np
import numpy.typing as npt

from .errors import ParameterError, ShapeError

T = TypeVar("T")

PROBABILITY_CLAMP = 1.0 - 1e-12
PROBABILITY_FLOOR = 1e-12
DEFAULT_PROPORTIONS = (0.5, 0.3, 0.2)
DEFAULT_BUFFER_CAPACITY = 1000


@dataclass(frozen=True)
class LossWeights:
    """``gamma`` weights the adversarial term, ``lam`` the artifacts penalty."""

    gamma: float = 0.0
    lam: float = 0.0

    def __post_init__(self) -> None:
        for name, value in (("gamma", self.gamma), ("lambda", self.lam)):
            if not (math.isfinite(value) and value >= 0.0):
                raise ParameterError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class BufferPolicy:
    proportions: tuple[float, ...] = DEFAULT_PROPORTIONS
    capacity: int = DEFAULT_BUFFER_CAPACITY

    def __post_init__(self) -> None:
        props = tuple(float(p) for p in self.proportions)
        object.__setattr__(self, "proportions", props)
        if not props or any(not math.isfinite(p) or p < 0.0 for p in props):
            raise ParameterError(f"proportions must be non-negative, got {list(props)}")
        if abs(math.fsum(props) - 1.0) > 1e-9:
            raise ParameterError(f"proportions must sum to 1, got {math.fsum(props)}")
        if self.capacity < 1:
            raise ParameterError(f"capacity must be > 0, got {self.capacity}")


def _finite(*values: float) -> None:
    if not all(math.isfinite(v) for v in values):
        raise ParameterError(f"scores must be finite, got {values}")


def artifacts_penalty(d_generated: float, d_sharp: float) -> float:
    """Positive part of the critic's score gap: ``max(d_generated - d_sharp, 0)``."""
    _finite(d_generated, d_sharp)
    return max(d_generated - d_sharp, 0.0)


def wasserstein_estimate(
    scores_corrupted: Sequence[float], scores_observed: Sequence[float]
) -> float:
    """Empirical earth-mover estimate: difference of the two mean critic scores."""
    if len(scores_corrupted) == 0 or len(scores_observed) == 0:
        raise ParameterError("score lists must be non-empty")
    a = np.asarray(scores_corrupted, dtype=np.float64)
    b = np.asarray(scores_observed, dtype=np.float64)
    return math.fsum(a) / a.size - math.fsum(b) / b.size


def _probability(p: float, what: str) -> float:
    if not (math.isfinite(p) and 0.0 <= p <= 1.0):
        raise ParameterError(f"{what} must be a probability in [0, 1], got {p}")
    return p


def _log_one_minus(p: float, what: str) -> float:
    return math.log1p(-min(_probability(p, what), PROBABILITY_CLAMP))


def cgan_generator_loss(d_fake: float) -> float:
    """``log(1 - d_fake)``; ``d_fake`` is clamped at 1 - 1e-12 so the value stays finite."""
    return _log_one_minus(d_fake, "d_fake")


def cgan_objective(d_real: Sequence[float], d_fake: Sequence[float]) -> float:
    """
    Empirical conditional-GAN value ``mean(log D(real)) + mean(log(1 - D(fake)))``.

    Probabilities are clamped to [1e-12, 1 - 1e-12] before the logarithm.
    """
    if len(d_real) == 0 or len(d_fake) == 0:
        raise ParameterError("probability lists must be non-empty")
    real_terms = [math.log(max(_probability(p, "d_real"), PROBABILITY_FLOOR)) for p in d_real]
    fake_terms = [_log_one_minus(p, "d_fake") for p in d_fake]
    return math.fsum(real_terms) / len(real_terms) + math.fsum(fake_terms) / len(fake_terms)


def content_loss(features_a: npt.ArrayLike, features_b: npt.ArrayLike) -> float:
    """Mean squared difference over all C*H*W feature elements."""
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"feature shapes differ: {a.shape} vs {b.shape}", a.shape, b.shape)
    if a.size == 0:
        raise ShapeError("feature tensors are empty", a.shape, b.shape)
    diff = a - b
    return float(np.mean(diff * diff))


def total_loss(content: float, adversarial: float, penalty: float, weights: LossWeights) -> float:
    """``content + gamma * adversarial + lambda * penalty``."""
    return content + weights.gamma * adversarial + weights.lam * penalty


def buffer_counts(policy: BufferPolicy) -> tuple[int, ...]:
    """
    Per-level counts summing to ``capacity`` by largest-remainder rounding;
    ties go to the earlier level.
    """
    exact = [policy.capacity * p for p in policy.proportions]
    counts = [math.floor(x) for x in exact]
    short = policy.capacity - sum(counts)
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return tuple(counts)


def buffer_sample(
    items_by_level: Sequence[Sequence[T]],
    policy: BufferPolicy,
    seed: int,
) -> list[T]:
    """
    Fill a replay buffer of ``policy.capacity`` items, drawing ``buffer_counts``
    items from each level (without replacement when the level holds enough),
    then shuffling. Deterministic per seed.
    """
    if len(items_by_level) != len(policy.proportions):
        raise ParameterError(
            f"expected {len(policy.proportions)} levels, got {len(items_by_level)}"
        )
    if any(len(items) == 0 for items in items_by_level):
        raise ParameterError("every level must hold at least one item")
    rng = np.random.default_rng(seed)
    buffer: list[T] = []
    for items, count in zip(items_by_level, buffer_counts(policy), strict=True):
        picks = rng.choice(len(items), size=count, replace=count > len(items))
        buffer.extend(items[int(i)] for i in picks)
    order = rng.permutation(len(buffer))
    return [buffer[int(i)] for i in order]
