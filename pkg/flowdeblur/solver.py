"""
Half-quadratic splitting deblurring engine.

Each level n alternates

1. the x-step, ``I*_n = (K^T K + beta_n I)^-1 (beta_n Z_{n-1} + K^T O)``, solved
   by conjugate gradient on the normal operator, and
2. the prior step, ``Z_n = prior.denoise(I*_n, O, n)``,

starting from ``Z_0 = O`` with strictly increasing beta. ``global_iterate``
feeds the restored image back through flow estimation and the whole solve.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .blur import BlurOperator, BoundaryPolicy
from .errors import NumericalError, ParameterError, ShapeError
from .imaging import FloatArray, Image, MotionFlowMap, format_psnr
from .metrics import psnr

logger = logging.getLogger(__name__)

DEFAULT_BETAS = (0.01, 0.05, 0.25)
DEFAULT_CG_TOL = 1e-5
DEFAULT_CG_MAX_ITER = 200
DEFAULT_GLOBAL_ITERATIONS = 3

LinearMap = Callable[[Image], Image]
FlowSource = Callable[[Image], MotionFlowMap]


@runtime_checkable
class DenoiserPrior(Protocol):
    """Solver of the prior sub-problem: maps (I*, O, level) to Z."""

    def denoise(self, deconvolved: Image, observed: Image, level: int) -> Image: ...


@dataclass(frozen=True)
class HqsSchedule:
    """Per-level coupling weights and solver limits."""

    betas: tuple[float, ...] = DEFAULT_BETAS
    cg_tol: float = DEFAULT_CG_TOL
    cg_max_iter: int = DEFAULT_CG_MAX_ITER
    global_iterations: int = DEFAULT_GLOBAL_ITERATIONS

    def __post_init__(self) -> None:
        betas = tuple(float(b) for b in self.betas)
        object.__setattr__(self, "betas", betas)
        if not betas:
            raise ParameterError("schedule needs at least one beta")
        if any(not math.isfinite(b) or b <= 0.0 for b in betas):
            raise ParameterError(f"betas must be finite and > 0, got {list(betas)}")
        if any(b1 <= b0 for b0, b1 in zip(betas, betas[1:], strict=False)):
            raise ParameterError(f"betas must be strictly increasing, got {list(betas)}")
        if not self.cg_tol > 0.0:
            raise ParameterError(f"cg_tol must be > 0, got {self.cg_tol}")
        if self.cg_max_iter < 1:
            raise ParameterError(f"cg_max_iter must be >= 1, got {self.cg_max_iter}")
        if self.global_iterations < 1:
            raise ParameterError(f"global_iterations must be >= 1, got {self.global_iterations}")

    @property
    def levels(self) -> int:
        return len(self.betas)

    @classmethod
    def geometric(
        cls,
        levels: int,
        first: float = DEFAULT_BETAS[0],
        ratio: float = 5.0,
        cg_tol: float = DEFAULT_CG_TOL,
        cg_max_iter: int = DEFAULT_CG_MAX_ITER,
        global_iterations: int = DEFAULT_GLOBAL_ITERATIONS,
    ) -> HqsSchedule:
        """``levels`` betas starting at ``first``, each ``ratio`` times the previous."""
        if levels < 1:
            raise ParameterError(f"levels must be >= 1, got {levels}")
        return cls(
            betas=tuple(first * ratio**k for k in range(levels)),
            cg_tol=cg_tol,
            cg_max_iter=cg_max_iter,
            global_iterations=global_iterations,
        )


@dataclass(frozen=True)
class CgResult:
    x: Image
    iterations: int
    residual: float
    residuals: tuple[float, ...]


@dataclass(frozen=True)
class LevelRecord:
    global_iteration: int
    level: int
    beta: float
    cg_iterations: int
    cg_residual: float
    psnr: float | None = None


@dataclass(frozen=True)
class GlobalSummary:
    global_iteration: int
    levels: int
    cg_iterations: int
    max_residual: float
    mean_abs_change: float
    psnr: float | None = None


@dataclass
class SolveTrace:
    """Accumulates per-level and per-global-iteration records of a solve."""

    levels: list[LevelRecord] = field(default_factory=list)
    summaries: list[GlobalSummary] = field(default_factory=list)

    HEADER = "global_iter\tlevel\tbeta\tcg_iters\tresidual\tpsnr\tchange"

    def to_tsv(self) -> str:
        lines = [self.HEADER]
        iterations = {r.global_iteration for r in self.levels}
        iterations |= {s.global_iteration for s in self.summaries}
        for t in sorted(iterations):
            for r in self.levels:
                if r.global_iteration != t:
                    continue
                lines.append(
                    f"{t}\t{r.level}\t{r.beta:.6g}\t{r.cg_iterations}\t{r.cg_residual:.3e}\t"
                    f"{_psnr_cell(r.psnr)}\t"
                )
            for s in self.summaries:
                if s.global_iteration != t:
                    continue
                lines.append(
                    f"{t}\t*\t\t{s.cg_iterations}\t{s.max_residual:.3e}\t"
                    f"{_psnr_cell(s.psnr)}\t{s.mean_abs_change:.6g}"
                )
        return "\n".join(lines) + "\n"

    def write_tsv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")


def _psnr_cell(value: float | None) -> str:
    return "" if value is None else format_psnr(value)


def _dot(a: FloatArray, b: FloatArray) -> float:
    return float(np.vdot(a, b))


def cg_solve(
    apply: LinearMap,
    rhs: Image,
    tol: float = DEFAULT_CG_TOL,
    max_iter: int = DEFAULT_CG_MAX_ITER,
    x0: Image | None = None,
    callback: Callable[[Image, int], None] | None = None,
) -> CgResult:
    """
    Conjugate gradient for a symmetric positive definite ``apply``.

    Starts from ``x0`` (default: ``rhs``), so an identity ``apply`` returns
    ``rhs`` after 0 iterations. Stops once the relative residual
    ``||apply(x) - rhs|| / ||rhs||`` drops to ``tol`` or after ``max_iter``
    iterations, returning the best iterate seen. ``residuals`` holds the best
    relative residual after every iteration (index 0: the start point).

    Raises:
        NumericalError: a non-finite value appeared; carries the residual trace.
    """
    b = rhs.data
    shape = rhs.shape
    bnorm = math.sqrt(_dot(b, b))
    if bnorm == 0.0:
        return CgResult(Image(np.zeros(shape)), 0, 0.0, (0.0,))

    def _apply(arr: FloatArray) -> FloatArray:
        try:
            return apply(Image(arr)).data
        except ParameterError as e:
            raise NumericalError(f"operator produced invalid values: {e}", residuals) from e

    residuals: list[float] = []
    x = np.array((x0 if x0 is not None else rhs).data, dtype=np.float64)
    r = b - _apply(x)
    rs = _dot(r, r)
    best = math.sqrt(rs) / bnorm
    best_x = x.copy()
    residuals.append(best)
    if not math.isfinite(best):
        raise NumericalError("initial residual is not finite", residuals)

    iterations = 0
    p = r.copy()
    while best > tol and iterations < max_iter:
        iterations += 1
        ap = _apply(p)
        pap = _dot(p, ap)
        if not math.isfinite(pap):
            raise NumericalError(f"non-finite curvature at CG iteration {iterations}", residuals)
        if pap <= 0.0:
            logger.warning("CG breakdown at iteration %d (p^T A p = %g)", iterations, pap)
            residuals.append(best)
            break
        alpha = rs / pap
        x += alpha * p
        r -= alpha * ap
        rs_new = _dot(r, r)
        if not math.isfinite(rs_new):
            raise NumericalError(f"non-finite residual at CG iteration {iterations}", residuals)
        rel = math.sqrt(rs_new) / bnorm
        if rel < best:
            best = rel
            best_x = x.copy()
        residuals.append(best)
        logger.debug("cg iteration %d: relative residual %.3e", iterations, rel)
        if callback is not None:
            callback(Image(x), iterations)
        p = r + (rs_new / rs) * p
        rs = rs_new

    return CgResult(Image(best_x), iterations, best, tuple(residuals))


def _operator(
    flow: MotionFlowMap, boundary: BoundaryPolicy | str, operator: BlurOperator | None
) -> BlurOperator:
    if operator is not None:
        return operator
    return BlurOperator(flow, boundary)


def solve_x_step(
    Z: Image,
    O: Image,
    flow: MotionFlowMap,
    beta: float,
    schedule: HqsSchedule,
    boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
    operator: BlurOperator | None = None,
    callback: Callable[[Image, int], None] | None = None,
) -> CgResult:
    """Deconvolution sub-problem with its CG statistics; see ``x_step``."""
    if not beta > 0.0:
        raise ParameterError(f"beta must be > 0 for the x-step, got {beta}")
    Z.same_shape(O, "auxiliary and observed images")
    op = _operator(flow, boundary, operator)
    rhs = Image(beta * Z.data + op.adjoint(O).data)
    return cg_solve(
        lambda x: op.normal(x, beta),
        rhs,
        tol=schedule.cg_tol,
        max_iter=schedule.cg_max_iter,
        callback=callback,
    )


def x_step(
    Z: Image,
    O: Image,
    flow: MotionFlowMap,
    beta: float,
    schedule: HqsSchedule,
    boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
    operator: BlurOperator | None = None,
) -> Image:
    """``argmin_x beta/2 ||x - Z||^2 + 1/2 ||K x - O||^2`` via CG on ``K^T K + beta I``."""
    return solve_x_step(Z, O, flow, beta, schedule, boundary, operator).x


def hqs_objective(
    x: Image,
    Z: Image,
    O: Image,
    flow: MotionFlowMap,
    beta: float,
    boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
    operator: BlurOperator | None = None,
) -> float:
    """Value of the deconvolution sub-problem objective at ``x``."""
    op = _operator(flow, boundary, operator)
    data = op.forward(x).data - O.data
    coupling = x.data - Z.data
    return 0.5 * _dot(data, data) + 0.5 * beta * _dot(coupling, coupling)


def hqs_deblur(
    O: Image,
    flow: MotionFlowMap,
    prior: DenoiserPrior,
    schedule: HqsSchedule,
    boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
    reference: Image | None = None,
    trace: SolveTrace | None = None,
    global_iteration: int = 1,
) -> tuple[Image, SolveTrace]:
    """
    Run every level of the splitting loop on observation ``O``.

    Records land in ``trace`` as they are produced, so a caller holding the
    trace keeps the completed levels when a later level raises.
    """
    flow.matches(O)
    trace = trace if trace is not None else SolveTrace()
    op = BlurOperator(flow, boundary)
    z = O
    for level, beta in enumerate(schedule.betas, start=1):
        cg = solve_x_step(z, O, flow, beta, schedule, operator=op)
        z = prior.denoise(cg.x, O, level)
        if z.shape != O.shape:
            raise ShapeError(
                f"prior returned shape {z.shape} for input {O.shape}", O.shape, z.shape
            )
        quality = psnr(z, reference) if reference is not None else None
        trace.levels.append(
            LevelRecord(global_iteration, level, beta, cg.iterations, cg.residual, quality)
        )
        logger.info(
            "iter %d level %d: beta=%g cg_iters=%d residual=%.3e%s",
            global_iteration,
            level,
            beta,
            cg.iterations,
            cg.residual,
            f" psnr={format_psnr(quality)}" if quality is not None else "",
        )
    return z, trace


def global_iterate(
    O: Image,
    flow_source: FlowSource,
    prior: DenoiserPrior,
    schedule: HqsSchedule,
    boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
    reference: Image | None = None,
    trace: SolveTrace | None = None,
) -> tuple[Image, SolveTrace]:
    """
    Repeat flow estimation and the full solve ``schedule.global_iterations`` times.

    Iteration t deblurs the result of iteration t-1 using
    ``flow_source(result_{t-1})``; iteration 1 starts from ``O``.
    """
    trace = trace if trace is not None else SolveTrace()
    result = O
    for t in range(1, schedule.global_iterations + 1):
        flow = flow_source(result)
        before = len(trace.levels)
        restored, _ = hqs_deblur(
            result,
            flow,
            prior,
            schedule,
            boundary=boundary,
            reference=reference,
            trace=trace,
            global_iteration=t,
        )
        records: Sequence[LevelRecord] = trace.levels[before:]
        change = float(np.mean(np.abs(restored.data - result.data)))
        quality = psnr(restored, reference) if reference is not None else None
        trace.summaries.append(
            GlobalSummary(
                global_iteration=t,
                levels=len(records),
                cg_iterations=sum(r.cg_iterations for r in records),
                max_residual=max((r.cg_residual for r in records), default=0.0),
                mean_abs_change=change,
                psnr=quality,
            )
        )
        logger.info(
            "global iteration %d/%d: mean |change|=%.3e%s",
            t,
            schedule.global_iterations,
            change,
            f" psnr={format_psnr(quality)}" if quality is not None else "",
        )
        result = restored
    return result, trace
