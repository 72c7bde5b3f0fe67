"""
Spatially-varying linear-motion blur operator.

Every pixel carries its own kernel stamp, rasterized from the pixel's (u, v)
motion as a segment from (-u/2, -v/2) to (+u/2, +v/2): midpoint supersampling
(256 samples per pixel of segment length) with bilinear splatting, then
normalization to unit sum.

``BlurOperator`` assembles all stamps once into a sparse matrix with the
boundary policy folded into the column indices, so the adjoint is the exact
matrix transpose of the forward application.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
from scipy import sparse

from .errors import ParameterError
from .imaging import FloatArray, Image, MotionFlowMap

logger = logging.getLogger(__name__)

SAMPLES_PER_PIXEL = 256


class BoundaryPolicy(str, Enum):
    """How taps falling outside the image are resolved."""

    REPLICATE = "replicate"
    ZERO = "zero"

    @classmethod
    def parse(cls, value: str | BoundaryPolicy) -> BoundaryPolicy:
        try:
            return cls(value)
        except ValueError as e:
            allowed = ", ".join(m.value for m in cls)
            raise ParameterError(f"unknown boundary mode {value!r} (allowed: {allowed})") from e


@dataclass(frozen=True)
class Tap:
    dx: int
    dy: int
    weight: float


@dataclass(frozen=True)
class KernelStamp:
    """
    Normalized stencil for one pixel.

    ``anchor`` is the (row, col) of the zero offset inside ``to_array()``.
    """

    anchor: tuple[int, int]
    taps: tuple[Tap, ...]

    def total(self) -> float:
        return math.fsum(t.weight for t in self.taps)

    def to_array(self) -> FloatArray:
        rows = 2 * self.anchor[0] + 1
        cols = 2 * self.anchor[1] + 1
        out = np.zeros((rows, cols))
        for t in self.taps:
            out[self.anchor[0] + t.dy, self.anchor[1] + t.dx] += t.weight
        return out


IntArray = npt.NDArray[np.int64]


@dataclass(frozen=True)
class Splat:
    """
    Flat stamp entries for a batch of motions: entry i adds ``weight[i]`` at
    offset ``(dx[i], dy[i])`` of motion ``owner[i]``.

    Offsets may repeat within one owner; consumers sum duplicates.
    """

    owner: IntArray
    dx: IntArray
    dy: IntArray
    weight: FloatArray


def _sample_counts(u: FloatArray, v: FloatArray) -> IntArray:
    length = np.hypot(u, v)
    return np.maximum(1, np.ceil(SAMPLES_PER_PIXEL * length)).astype(np.int64)


def _position(motion: FloatArray, n: IntArray, k: IntArray | int) -> FloatArray:
    """Coordinate of sample ``k`` out of ``n`` midpoint samples along ``motion``."""
    return motion * ((k + 0.5) / n - 0.5)


def _cell_changes(motion: FloatArray, n: IntArray) -> tuple[IntArray, IntArray]:
    """
    Sample indices where ``floor(_position(...))`` changes, with their owners.

    The estimate from solving for the integer crossing is off by at most one
    sample; it is corrected against the sampled positions themselves.
    """
    first = np.floor(_position(motion, n, 0))
    last = np.floor(_position(motion, n, n - 1))
    counts = np.abs(last - first).astype(np.int64)
    owner = np.repeat(np.arange(motion.size), counts)
    if owner.size == 0:
        return owner, owner.copy()

    i = np.arange(owner.size) - (np.cumsum(counts) - counts)[owner]
    m, no = motion[owner], n[owner]
    up = m > 0.0
    level = np.where(up, first[owner] + 1 + i, first[owner] - i)
    estimate = no * (level / m + 0.5) - 0.5
    guess = np.where(up, np.ceil(estimate), np.floor(estimate) + 1).astype(np.int64)

    def crossed(k: IntArray) -> npt.NDArray[np.bool_]:
        pos = _position(m, no, k)
        return np.where(up, pos >= level, pos < level)

    k = np.where(crossed(guess - 1), guess - 1, np.where(crossed(guess), guess, guess + 1))
    return owner, np.clip(k, 1, no - 1)


def splat(u: FloatArray, v: FloatArray) -> Splat:
    """
    Normalized stamp entries for a batch of motions.

    The samples of one motion are split into runs that stay inside one pixel
    cell. Within a run the bilinear weights are quadratic in the sample index,
    so each run contributes four corner weights summed in closed form instead
    of one splat per sample.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    count = u.size
    n = _sample_counts(u, v)
    span = int(n.max(initial=1)) + 1

    xo, xk = _cell_changes(u, n)
    yo, yk = _cell_changes(v, n)
    keys = np.unique(np.concatenate([np.arange(count) * span, xo * span + xk, yo * span + yk]))
    owner = keys // span
    start = keys % span
    end = n[owner].copy()
    same = owner[1:] == owner[:-1]
    end[:-1][same] = start[1:][same]

    uo, vo, no = u[owner], v[owner], n[owner]
    mid = (start + end - 1) // 2
    cx = np.floor(_position(uo, no, mid))
    cy = np.floor(_position(vo, no, mid))
    fx = _position(uo, no, start) - cx
    fy = _position(vo, no, start) - cy
    bx = uo / no
    by = vo / no

    length = (end - start).astype(np.float64)
    j1 = length * (length - 1.0) / 2.0
    j2 = (length - 1.0) * length * (2.0 * length - 1.0) / 6.0
    sx = length * fx + bx * j1
    sy = length * fy + by * j1
    sxy = length * fx * fy + (fx * by + fy * bx) * j1 + bx * by * j2

    weight = np.concatenate([length - sx - sy + sxy, sx - sxy, sy - sxy, sxy]) / np.tile(no, 4)
    dx = np.concatenate([cx, cx + 1, cx, cx + 1]).astype(np.int64)
    dy = np.concatenate([cy, cy, cy + 1, cy + 1]).astype(np.int64)
    owner = np.tile(owner, 4)

    keep = weight > 0.0
    owner, dx, dy, weight = owner[keep], dx[keep], dy[keep], weight[keep]
    weight = weight / np.bincount(owner, weights=weight, minlength=count)[owner]
    return Splat(owner=owner, dx=dx, dy=dy, weight=weight)


def stamp_radius(u: FloatArray, v: FloatArray) -> int:
    """Half-side of the dense grid that holds every stamp for these motions."""
    m = float(max(np.abs(u).max(initial=0.0), np.abs(v).max(initial=0.0)))
    return int(math.ceil(m / 2.0)) + 1


def rasterize(u: FloatArray, v: FloatArray, radius: int) -> FloatArray:
    """
    Dense stamps for a batch of motions.

    Returns an array ``(len(u), 2*radius+1, 2*radius+1)`` whose entry
    ``[p, radius+dy, radius+dx]`` is the weight of offset (dx, dy) for motion p.
    """
    s = splat(u, v)
    count = np.asarray(u).size
    side = 2 * radius + 1
    idx = s.owner * (side * side) + (s.dy + radius) * side + (s.dx + radius)
    dense = np.bincount(idx, weights=s.weight, minlength=count * side * side)
    return dense.reshape(count, side, side)


def kernel_from_motion(u: float, v: float) -> KernelStamp:
    """
    Rasterize one linear-motion segment into a normalized stamp.

    ``(0, 0)`` yields the identity stamp: a single tap ``(0, 0, 1.0)``.
    """
    if not (math.isfinite(u) and math.isfinite(v)):
        raise ParameterError(f"motion must be finite, got ({u}, {v})")
    ua = np.array([u], dtype=np.float64)
    va = np.array([v], dtype=np.float64)
    radius = stamp_radius(ua, va)
    dense = rasterize(ua, va, radius)[0]
    rows, cols = np.nonzero(dense > 0.0)
    taps = tuple(
        Tap(dx=int(c) - radius, dy=int(r) - radius, weight=float(dense[r, c]))
        for r, c in zip(rows, cols, strict=True)
    )
    return KernelStamp(anchor=(radius, radius), taps=taps)


class BlurOperator:
    """
    Sparse matrix K acting on row-major pixel vectors, one stamp per row.

    Channels are blurred independently with the same K.
    """

    def __init__(
        self,
        flow: MotionFlowMap,
        boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
    ) -> None:
        self.flow = flow
        self.boundary = BoundaryPolicy.parse(boundary)
        self.width = flow.width
        self.height = flow.height
        self.matrix = self._assemble()
        self._transpose = self.matrix.T.tocsr()
        logger.debug(
            "assembled %dx%d blur operator (%s boundary, %d taps)",
            self.width,
            self.height,
            self.boundary.value,
            self.matrix.nnz,
        )

    def _assemble(self) -> sparse.csr_matrix:
        h, w = self.height, self.width
        pixels = h * w
        s = splat(self.flow.u.ravel(), self.flow.v.ravel())
        pixel, weight = s.owner, s.weight
        ti = pixel // w + s.dy
        tj = pixel % w + s.dx
        if self.boundary is BoundaryPolicy.REPLICATE:
            ti = np.clip(ti, 0, h - 1)
            tj = np.clip(tj, 0, w - 1)
        else:
            keep = (ti >= 0) & (ti < h) & (tj >= 0) & (tj < w)
            pixel, ti, tj, weight = pixel[keep], ti[keep], tj[keep], weight[keep]
        # tocsr sums repeated (pixel, column) entries.
        coo = sparse.coo_matrix((weight, (pixel, ti * w + tj)), shape=(pixels, pixels))
        return coo.tocsr()

    def _apply(self, mat: sparse.csr_matrix, image: Image) -> Image:
        self.flow.matches(image)
        planes = image.data.reshape(image.channels, -1).T
        out = np.asarray(mat @ planes).T.reshape(image.shape)
        return Image(out)

    def forward(self, sharp: Image) -> Image:
        """K x: output pixel (i, j) = sum of weight * sharp(i+dy, j+dx) over its stamp."""
        return self._apply(self.matrix, sharp)

    def adjoint(self, residual: Image) -> Image:
        """K^T y: scatter each pixel through its own stamp with reversed offsets."""
        return self._apply(self._transpose, residual)

    def normal(self, x: Image, beta: float) -> Image:
        """(K^T K + beta I) x."""
        if not beta >= 0.0:
            raise ParameterError(f"beta must be >= 0, got {beta}")
        ktk = self.adjoint(self.forward(x))
        return Image(ktk.data + beta * x.data)


def forward_blur(
    sharp: Image,
    flow: MotionFlowMap,
    boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
) -> Image:
    flow.matches(sharp)
    return BlurOperator(flow, boundary).forward(sharp)


def adjoint_blur(
    residual: Image,
    flow: MotionFlowMap,
    boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
) -> Image:
    flow.matches(residual)
    return BlurOperator(flow, boundary).adjoint(residual)


def normal_apply(
    x: Image,
    flow: MotionFlowMap,
    beta: float,
    boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
) -> Image:
    flow.matches(x)
    return BlurOperator(flow, boundary).normal(x, beta)
