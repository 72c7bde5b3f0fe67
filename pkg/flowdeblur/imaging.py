"""
Value types shared by every module: planar images and motion-flow maps.

Both types are immutable after construction: the backing arrays are copied and
marked read-only, so operations always return new objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import ParameterError, ShapeError

FloatArray = npt.NDArray[np.float64]

# Rec. 601 luma weights, used wherever a 3-channel image is reduced to one plane.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _frozen(array: npt.ArrayLike, dtype: type) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Image:
    """
    Planar floating-point raster, nominal range [0, 1].

    ``data`` has shape ``(channels, height, width)``; channels is 1 or 3.
    """

    data: FloatArray

    def __post_init__(self) -> None:
        arr = _frozen(self.data, np.float64)
        if arr.ndim != 3:
            raise ShapeError(f"image data must be (channels, height, width), got ndim={arr.ndim}")
        if arr.shape[0] not in (1, 3):
            raise ShapeError(f"image must have 1 or 3 channels, got {arr.shape[0]}")
        if arr.shape[1] == 0 or arr.shape[2] == 0:
            raise ShapeError("image must have positive width and height")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("image samples must be finite")
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_hwc(cls, array: npt.ArrayLike) -> Image:
        """Build from an ``(H, W)`` or ``(H, W, C)`` array."""
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim == 2:
            return cls(arr[np.newaxis])
        return cls(np.moveaxis(arr, -1, 0))

    @classmethod
    def zeros(cls, width: int, height: int, channels: int = 1) -> Image:
        return cls(np.zeros((channels, height, width)))

    @classmethod
    def constant(cls, value: float, width: int, height: int, channels: int = 1) -> Image:
        return cls(np.full((channels, height, width), float(value)))

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    def to_hwc(self) -> FloatArray:
        """Interleaved ``(H, W, C)`` copy."""
        return np.ascontiguousarray(np.moveaxis(self.data, 0, -1))

    def luma(self) -> FloatArray:
        """Single ``(H, W)`` plane; Rec. 601 weights for colour images."""
        if self.channels == 1:
            return np.array(self.data[0])
        r, g, b = LUMA_WEIGHTS
        return r * self.data[0] + g * self.data[1] + b * self.data[2]

    def clipped(self) -> Image:
        return Image(np.clip(self.data, 0.0, 1.0))

    def same_shape(self, other: Image, what: str = "images") -> None:
        """Raise ``ShapeError`` unless ``other`` has identical dimensions."""
        if self.shape != other.shape:
            raise ShapeError(
                f"{what} differ in shape: {self.shape} vs {other.shape}",
                expected=self.shape,
                actual=other.shape,
            )


@dataclass(frozen=True)
class MotionFlowMap:
    """
    Per-pixel linear motion: ``u`` horizontal, ``v`` vertical, in pixels.

    Components are stored as float32 arrays of shape ``(height, width)``,
    which is also their on-disk precision.
    """

    u: npt.NDArray[np.float32]
    v: npt.NDArray[np.float32]

    def __post_init__(self) -> None:
        u = _frozen(self.u, np.float32)
        v = _frozen(self.v, np.float32)
        if u.ndim != 2 or u.shape != v.shape:
            raise ShapeError(
                f"flow components must be equal 2-D arrays, got {u.shape} and {v.shape}"
            )
        if u.size == 0:
            raise ShapeError("flow map must have positive width and height")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ParameterError("flow components must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, width: int, height: int) -> MotionFlowMap:
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    @classmethod
    def constant(cls, u: float, v: float, width: int, height: int) -> MotionFlowMap:
        return cls(np.full((height, width), u), np.full((height, width), v))

    @property
    def height(self) -> int:
        return int(self.u.shape[0])

    @property
    def width(self) -> int:
        return int(self.u.shape[1])

    def max_magnitude(self) -> float:
        """Largest ``max(|u|, |v|)`` over all pixels."""
        return float(max(np.abs(self.u).max(), np.abs(self.v).max()))

    def matches(self, image: Image) -> None:
        """Raise ``ShapeError`` unless the flow covers ``image`` pixel-for-pixel."""
        if (self.height, self.width) != (image.height, image.width):
            raise ShapeError(
                f"flow is {self.width}x{self.height} but image is {image.width}x{image.height}",
                expected=(image.height, image.width),
                actual=(self.height, self.width),
            )


@dataclass(frozen=True)
class MetricReport:
    """Quality figures for one restored/reference pair."""

    psnr: float
    ssim: float
    flow_mse: float | None = field(default=None)

    def row(self) -> list[str]:
        cells = [format_psnr(self.psnr), f"{self.ssim:.6f}"]
        if self.flow_mse is not None:
            cells.append(f"{self.flow_mse:.6f}")
        return cells


def format_psnr(value: float) -> str:
    """PSNR cell; identical inputs print as ``inf``."""
    return "inf" if np.isinf(value) else f"{value:.4f}"
