"""
Frame codec for the external-denoiser protocol (little-endian).

Request::

    b"DNZ1" | u32 level | u32 width | u32 height | u32 channels
    | channels*height*width f32 I* | channels*height*width f32 O

Reply::

    b"DNZ2" | u32 width | u32 height | u32 channels | channels*height*width f32

Samples are planar: channel-major, then rows, then columns. Every frame is
length-prefixed by its header, so a reader always knows how many bytes to wait
for.
"""

from __future__ import annotations

import struct
import sys
from collections.abc import Callable
from typing import IO

import numpy as np
import numpy.typing as npt

from .errors import MalformedReplyError, ShapeError
from .imaging import Image

REQUEST_MAGIC = b"DNZ1"
REPLY_MAGIC = b"DNZ2"
REQUEST_HEADER = struct.Struct("<4sIIII")
REPLY_HEADER = struct.Struct("<4sIII")

# Refuse replies that would allocate more than this many samples.
MAX_SAMPLES = 1 << 28

F32 = np.dtype("<f4")


def _plane_bytes(image: Image) -> bytes:
    return np.ascontiguousarray(image.data, dtype=F32).tobytes()


def encode_request(deconvolved: Image, observed: Image, level: int) -> bytes:
    deconvolved.same_shape(observed, "deconvolved and observed images")
    c, h, w = deconvolved.shape
    header = REQUEST_HEADER.pack(REQUEST_MAGIC, level, w, h, c)
    return header + _plane_bytes(deconvolved) + _plane_bytes(observed)


def encode_reply(samples: npt.ArrayLike) -> bytes:
    """Reply frame for a ``(channels, height, width)`` array."""
    arr = np.ascontiguousarray(samples, dtype=F32)
    if arr.ndim != 3:
        raise ShapeError(f"reply samples must be (channels, height, width), got ndim={arr.ndim}")
    c, h, w = arr.shape
    return REPLY_HEADER.pack(REPLY_MAGIC, w, h, c) + arr.tobytes()


def read_exact(stream: IO[bytes], size: int) -> bytes:
    """Read exactly ``size`` bytes or raise ``MalformedReplyError`` on early EOF."""
    chunks: list[bytes] = []
    remaining = size
    while remaining > 0:
        chunk = stream.read(remaining)
        if not chunk:
            got = size - remaining
            raise MalformedReplyError(f"stream closed after {got} of {size} bytes")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_reply(stream: IO[bytes]) -> npt.NDArray[np.float32]:
    """
    Read one reply frame; returns float32 samples shaped ``(channels, height, width)``.

    Raises:
        MalformedReplyError: bad magic, oversized frame or truncated payload.
    """
    magic, w, h, c = REPLY_HEADER.unpack(read_exact(stream, REPLY_HEADER.size))
    if magic != REPLY_MAGIC:
        raise MalformedReplyError(f"bad reply magic {magic!r}, expected {REPLY_MAGIC!r}")
    count = w * h * c
    if count == 0 or count > MAX_SAMPLES:
        raise MalformedReplyError(f"implausible reply dimensions {w}x{h}x{c}")
    body = read_exact(stream, count * F32.itemsize)
    return np.frombuffer(body, dtype=F32).astype(np.float32).reshape(c, h, w)


Request = tuple[int, npt.NDArray[np.float32], npt.NDArray[np.float32]]


def read_request(stream: IO[bytes]) -> Request | None:
    """
    Child side: read one request frame, or ``None`` on a clean EOF before a frame.

    Returns ``(level, deconvolved, observed)`` with ``(channels, height, width)`` arrays.
    """
    first = stream.read(REQUEST_HEADER.size)
    if not first:
        return None
    header = first + read_exact(stream, REQUEST_HEADER.size - len(first))
    magic, level, w, h, c = REQUEST_HEADER.unpack(header)
    if magic != REQUEST_MAGIC:
        raise MalformedReplyError(f"bad request magic {magic!r}, expected {REQUEST_MAGIC!r}")
    count = w * h * c
    body = read_exact(stream, 2 * count * F32.itemsize)
    planes = np.frombuffer(body, dtype=F32).astype(np.float32)
    return level, planes[:count].reshape(c, h, w), planes[count:].reshape(c, h, w)


Transform = Callable[[int, npt.NDArray[np.float32], npt.NDArray[np.float32]], npt.ArrayLike]


def serve(
    transform: Transform,
    stdin: IO[bytes] | None = None,
    stdout: IO[bytes] | None = None,
) -> int:
    """
    Denoiser executable loop: answer every request with
    ``transform(level, deconvolved, observed)`` until stdin closes.

    Returns the number of requests answered.
    """
    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer
    answered = 0
    while (request := read_request(stdin)) is not None:
        stdout.write(encode_reply(transform(*request)))
        stdout.flush()
        answered += 1
    return answered
