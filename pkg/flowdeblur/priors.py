"""
In-process solvers of the prior sub-problem ``argmin_Z beta/2 ||I* - Z||^2 + gamma p(Z)``.

- ``IdentityPrior``: p = 0, returns I* unchanged.
- ``TvPrior``: isotropic total variation, solved by projected dual ascent on
  the dual of the TV proximal problem, one plane at a time.

The observed image is part of the interface (learned priors use it); both
priors here ignore it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .imaging import FloatArray, Image

logger = logging.getLogger(__name__)

DEFAULT_TV_WEIGHTS = (0.08, 0.04, 0.02)
DEFAULT_TV_ITERS = 50
DEFAULT_TV_STEP = 0.248


@dataclass(frozen=True)
class TvParams:
    """
    TV prox settings. ``weight`` is a scalar or one value per level; levels
    beyond the list reuse its last entry.
    """

    weight: float | tuple[float, ...] = DEFAULT_TV_WEIGHTS
    inner_iters: int = DEFAULT_TV_ITERS
    step: float = DEFAULT_TV_STEP

    def __post_init__(self) -> None:
        if isinstance(self.weight, (list, tuple)):
            weights: tuple[float, ...] = tuple(float(w) for w in self.weight)
            if not weights:
                raise ParameterError("TV weight list is empty")
            object.__setattr__(self, "weight", weights)
        else:
            weights = (float(self.weight),)
            object.__setattr__(self, "weight", weights[0])
        if any(not math.isfinite(w) or w < 0.0 for w in weights):
            raise ParameterError(f"TV weights must be finite and >= 0, got {list(weights)}")
        if not 0.0 < self.step <= 0.25:
            raise ParameterError(f"TV dual step must lie in (0, 0.25], got {self.step}")
        if self.inner_iters < 0:
            raise ParameterError(f"inner_iters must be >= 0, got {self.inner_iters}")

    def weight_for(self, level: int) -> float:
        if isinstance(self.weight, tuple):
            return self.weight[min(max(level, 1), len(self.weight)) - 1]
        return float(self.weight)


def gradient(plane: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Forward differences with a zero last row/column (Neumann boundary)."""
    gx = np.zeros_like(plane)
    gy = np.zeros_like(plane)
    gx[:, :-1] = plane[:, 1:] - plane[:, :-1]
    gy[:-1, :] = plane[1:, :] - plane[:-1, :]
    return gx, gy


def divergence(px: FloatArray, py: FloatArray) -> FloatArray:
    """Negative adjoint of ``gradient``."""
    div = np.zeros_like(px)
    div[:, :-1] += px[:, :-1]
    div[:, 1:] -= px[:, :-1]
    div[:-1, :] += py[:-1, :]
    div[1:, :] -= py[:-1, :]
    return div


def total_variation(image: Image) -> float:
    """Isotropic TV summed over channels."""
    total = 0.0
    for plane in image.data:
        gx, gy = gradient(plane)
        total += float(np.sum(np.sqrt(gx * gx + gy * gy)))
    return total


def tv_objective(z: Image, target: Image, weight: float) -> float:
    """``1/2 ||z - target||^2 + weight * TV(z)``."""
    diff = z.data - target.data
    return 0.5 * float(np.vdot(diff, diff)) + weight * total_variation(z)


def _dual_projection(g: FloatArray, weight: float, iters: int, step: float) -> FloatArray:
    px = np.zeros_like(g)
    py = np.zeros_like(g)
    scaled = g / weight
    for _ in range(iters):
        gx, gy = gradient(divergence(px, py) - scaled)
        norm = np.sqrt(gx * gx + gy * gy)
        denom = 1.0 + step * norm
        px = (px + step * gx) / denom
        py = (py + step * gy) / denom
    return g - weight * divergence(px, py)


def identity_denoise(deconvolved: Image, observed: Image | None = None, level: int = 1) -> Image:
    """Baseline prior p = 0."""
    return deconvolved


def tv_denoise(image: Image, params: TvParams, level: int = 1) -> Image:
    """
    Approximate prox of ``weight * TV`` at ``image`` using ``params.inner_iters``
    dual-ascent steps; ``weight`` is taken for ``level``.

    The iterate is returned only if it does not raise the prox objective above
    its value at ``image`` itself; otherwise ``image`` is returned.
    """
    weight = params.weight_for(level)
    if weight == 0.0 or params.inner_iters == 0:
        return image
    planes = [_dual_projection(p, weight, params.inner_iters, params.step) for p in image.data]
    candidate = Image(np.stack(planes))
    if tv_objective(candidate, image, weight) > tv_objective(image, image, weight):
        logger.debug("TV iterate worse than its input at weight %g; keeping input", weight)
        return image
    return candidate


class IdentityPrior:
    def denoise(self, deconvolved: Image, observed: Image, level: int) -> Image:
        deconvolved.same_shape(observed, "deconvolved and observed images")
        return identity_denoise(deconvolved, observed, level)


class TvPrior:
    """Total-variation prior with a per-level weight schedule."""

    def __init__(self, params: TvParams | None = None) -> None:
        self.params = params or TvParams()

    def denoise(self, deconvolved: Image, observed: Image, level: int) -> Image:
        deconvolved.same_shape(observed, "deconvolved and observed images")
        return tv_denoise(deconvolved, self.params, level)
