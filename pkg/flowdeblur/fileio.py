"""
Lossless raster I/O (PNG, 8/16-bit) and the MFLO binary flow format.

MFLO layout, little-endian::

    b"MFLO" | u32 width | u32 height | width*height f32 u (row-major) | width*height f32 v

Readers validate the complete header and payload length before constructing
anything, so malformed input never yields a partial object.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path

import cv2
import numpy as np

from .errors import FlowFormatError, ImageIOError, ParameterError
from .imaging import Image, MotionFlowMap

logger = logging.getLogger(__name__)

FLOW_MAGIC = b"MFLO"
_FLOW_HEADER = struct.Struct("<4sII")

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_PNG_IEND = b"\x00\x00\x00\x00IEND\xaeB`\x82"
_SUPPORTED_SUFFIXES = {".png"}


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------


def decode_png(payload: bytes, source: str = "<bytes>") -> Image:
    """Decode PNG bytes into an image with samples mapped linearly to [0, 1]."""
    if not payload.startswith(_PNG_SIGNATURE):
        raise ImageIOError(f"{source}: not a PNG file")
    if payload.find(_PNG_IEND, len(_PNG_SIGNATURE)) < 0:
        raise ImageIOError(f"{source}: truncated PNG (missing IEND chunk)")
    raw = cv2.imdecode(np.frombuffer(payload, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageIOError(f"{source}: PNG could not be decoded")

    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageIOError(f"{source}: unsupported sample type {raw.dtype}")

    if raw.ndim == 2:
        hwc = raw[:, :, np.newaxis]
    elif raw.shape[2] == 3:
        hwc = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
    elif raw.shape[2] == 4:
        logger.warning("%s: dropping alpha channel", source)
        hwc = cv2.cvtColor(raw, cv2.COLOR_BGRA2RGB)
    else:
        raise ImageIOError(f"{source}: unsupported channel count {raw.shape[2]}")
    return Image.from_hwc(hwc.astype(np.float64) / scale)


def encode_png(image: Image, bit_depth: int = 8) -> bytes:
    """Encode as PNG; samples are clipped to [0, 1] and rounded to the bit depth."""
    if bit_depth == 8:
        scale, dtype = 255.0, np.uint8
    elif bit_depth == 16:
        scale, dtype = 65535.0, np.uint16
    else:
        raise ParameterError(f"bit_depth must be 8 or 16, got {bit_depth}")
    quantized = np.rint(np.clip(image.to_hwc(), 0.0, 1.0) * scale).astype(dtype)
    if image.channels == 3:
        quantized = cv2.cvtColor(quantized, cv2.COLOR_RGB2BGR)
    else:
        quantized = quantized[:, :, 0]
    ok, buf = cv2.imencode(".png", quantized)
    if not ok:
        raise ImageIOError("PNG encoding failed")
    return bytes(buf.tobytes())


def read_image(path: str | Path) -> Image:
    """
    Load an 8- or 16-bit PNG.

    Raises:
        ImageIOError: unsupported format, missing, unreadable or truncated file.
    """
    p = Path(path)
    if p.suffix.lower() not in _SUPPORTED_SUFFIXES:
        raise ImageIOError(f"{p}: unsupported format {p.suffix!r} (PNG only)")
    try:
        payload = p.read_bytes()
    except OSError as e:
        raise ImageIOError(f"{p}: {e.strerror or e}") from e
    return decode_png(payload, source=str(p))


def write_image(image: Image, path: str | Path, bit_depth: int = 8) -> None:
    """
    Write ``image`` as PNG at ``bit_depth`` (8 or 16).

    Raises:
        ImageIOError: unsupported format or unwritable destination.
    """
    p = Path(path)
    if p.suffix.lower() not in _SUPPORTED_SUFFIXES:
        raise ImageIOError(f"{p}: unsupported format {p.suffix!r} (PNG only)")
    payload = encode_png(image, bit_depth)
    try:
        p.write_bytes(payload)
    except OSError as e:
        raise ImageIOError(f"{p}: {e.strerror or e}") from e


# ---------------------------------------------------------------------------
# Flow maps
# ---------------------------------------------------------------------------


def encode_flow(flow: MotionFlowMap) -> bytes:
    header = _FLOW_HEADER.pack(FLOW_MAGIC, flow.width, flow.height)
    u = np.ascontiguousarray(flow.u, dtype="<f4").tobytes()
    v = np.ascontiguousarray(flow.v, dtype="<f4").tobytes()
    return header + u + v


def decode_flow(payload: bytes, source: str = "<bytes>") -> MotionFlowMap:
    """
    Parse an MFLO buffer.

    Raises:
        FlowFormatError: bad magic, zero dimensions or payload size mismatch.
    """
    if len(payload) < _FLOW_HEADER.size:
        raise FlowFormatError(f"{source}: {len(payload)} bytes is shorter than the MFLO header")
    magic, width, height = _FLOW_HEADER.unpack_from(payload)
    if magic != FLOW_MAGIC:
        raise FlowFormatError(f"{source}: bad magic {magic!r}, expected {FLOW_MAGIC!r}")
    if width == 0 or height == 0:
        raise FlowFormatError(f"{source}: zero dimension {width}x{height}")
    count = width * height
    expected = _FLOW_HEADER.size + 8 * count
    if len(payload) != expected:
        raise FlowFormatError(
            f"{source}: size mismatch, {width}x{height} needs {expected} bytes, got {len(payload)}"
        )
    body = np.frombuffer(payload, dtype="<f4", offset=_FLOW_HEADER.size, count=2 * count)
    u = body[:count].reshape(height, width)
    v = body[count:].reshape(height, width)
    try:
        return MotionFlowMap(u, v)
    except ParameterError as e:
        raise FlowFormatError(f"{source}: {e}") from e


def read_flow(path: str | Path) -> MotionFlowMap:
    p = Path(path)
    return decode_flow(p.read_bytes(), source=str(p))


def write_flow(flow: MotionFlowMap, path: str | Path) -> None:
    Path(path).write_bytes(encode_flow(flow))
