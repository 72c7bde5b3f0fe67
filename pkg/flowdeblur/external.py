"""
External denoiser prior: a long-lived child process speaking the DNZ frame
protocol (see ``wire``) over its binary stdin/stdout.

One child serves every level of a solve. A reader thread drains the child's
stdout into a queue so a slow or silent child never blocks the writer and a
reply wait can time out.
"""

from __future__ import annotations

import atexit
import logging
import queue
import subprocess
import threading
from collections.abc import Sequence
from dataclasses import dataclass, field
from types import TracebackType
from typing import IO, Any

import numpy as np
import numpy.typing as npt

from .commands import resolve_command, split_command
from .errors import (
    ExternalProcessError,
    MalformedReplyError,
    ProcessTimeoutError,
    ReplyShapeError,
    SpawnError,
)
from .imaging import Image
from .wire import encode_request, read_reply

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 60.0

_EOF = object()


@dataclass(frozen=True)
class ExternalDenoiserConfig:
    """Command line of the denoiser child and the per-request reply timeout in seconds."""

    command: tuple[str, ...]
    timeout: float = DEFAULT_TIMEOUT
    env: dict[str, str] | None = field(default=None, compare=False)

    @classmethod
    def from_command(
        cls, command: str | Sequence[str], timeout: float = DEFAULT_TIMEOUT
    ) -> ExternalDenoiserConfig:
        return cls(command=tuple(split_command(command)), timeout=timeout)


class ExternalDenoiser:
    """
    Prior backed by an external process. Starts lazily on the first request.

    Use as a context manager, or call ``close()``; a started child is also
    closed at interpreter exit.
    """

    def __init__(self, config: ExternalDenoiserConfig) -> None:
        if not config.timeout > 0:
            raise ExternalProcessError(f"timeout must be > 0, got {config.timeout}", config.command)
        self.config = config
        self._argv: list[str] = list(config.command)
        self._process: subprocess.Popen[bytes] | None = None
        self._replies: queue.Queue[Any] = queue.Queue()
        self._reader_thread: threading.Thread | None = None
        self._lock = threading.Lock()
        self.requests = 0

    @property
    def running(self) -> bool:
        return self._process is not None and self._process.poll() is None

    def start(self) -> None:
        """Spawn the child and its reply reader."""
        if self._process is not None:
            return
        self._argv = resolve_command(self.config.command)
        stderr = None if logger.isEnabledFor(logging.DEBUG) else subprocess.DEVNULL
        try:
            self._process = subprocess.Popen(
                self._argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=stderr,
                env=self.config.env,
                bufsize=0,
            )
        except OSError as e:
            raise SpawnError(f"cannot start denoiser: {e}", self._argv) from e
        logger.debug("started denoiser pid=%d: %s", self._process.pid, " ".join(self._argv))
        self._reader_thread = threading.Thread(
            target=self._read_replies, args=(self._process.stdout, self._replies), daemon=True
        )
        self._reader_thread.start()
        atexit.register(self.close)

    def _read_replies(self, stdout: IO[bytes] | None, replies: queue.Queue[Any]) -> None:
        """Background thread: parse reply frames until EOF or a framing error."""
        if stdout is None:
            return
        while True:
            try:
                replies.put(read_reply(stdout))
            except MalformedReplyError as e:
                replies.put(e)
                return
            except (ValueError, OSError):
                replies.put(_EOF)
                return

    def close(self) -> None:
        """Close stdin, give the child a moment to exit, then terminate or kill it."""
        process, self._process = self._process, None
        if process is None:
            return
        try:
            if process.stdin:
                process.stdin.close()
        except OSError:
            pass
        try:
            process.wait(timeout=2)
        except subprocess.TimeoutExpired:
            process.terminate()
            try:
                process.wait(timeout=2)
            except subprocess.TimeoutExpired:
                process.kill()
                process.wait()
        if self._reader_thread and self._reader_thread.is_alive():
            self._reader_thread.join(timeout=1)
        self._reader_thread = None
        self._replies = queue.Queue()
        atexit.unregister(self.close)
        logger.debug("denoiser exited with code %s", process.returncode)

    def __enter__(self) -> ExternalDenoiser:
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self.close()

    def _exchange(self, frame: bytes) -> npt.NDArray[np.float32]:
        process = self._process
        assert process is not None and process.stdin is not None
        try:
            process.stdin.write(frame)
            process.stdin.flush()
        except (BrokenPipeError, ValueError, OSError) as e:
            self.close()
            raise MalformedReplyError(f"denoiser closed its input: {e}", self._argv) from e
        try:
            reply = self._replies.get(timeout=self.config.timeout)
        except queue.Empty:
            self.close()
            raise ProcessTimeoutError(
                f"denoiser gave no reply within {self.config.timeout:g}s", self._argv
            ) from None
        if reply is _EOF:
            self.close()
            raise MalformedReplyError("denoiser exited without a reply", self._argv)
        if isinstance(reply, MalformedReplyError):
            self.close()
            raise MalformedReplyError(str(reply), self._argv) from reply
        samples: npt.NDArray[np.float32] = reply
        return samples

    def denoise(self, deconvolved: Image, observed: Image, level: int) -> Image:
        """
        Send (I*, O, level), return the child's Z.

        Reply samples that equal the float32 rendering of the request's I* are
        restored to I*'s exact value, so a child that echoes its input yields
        I* bit for bit.

        Raises:
            ReplyShapeError: reply dimensions differ from I*.
            MalformedReplyError: bad frame, early exit or non-finite samples.
            ProcessTimeoutError: no reply within the configured timeout.
        """
        frame = encode_request(deconvolved, observed, level)
        with self._lock:
            self.start()
            samples = self._exchange(frame)
            self.requests += 1
        if samples.shape != deconvolved.shape:
            self.close()
            raise ReplyShapeError(
                f"denoiser replied {samples.shape}, expected {deconvolved.shape}",
                expected=deconvolved.shape,
                actual=tuple(samples.shape),
                command=self._argv,
            )
        if not np.all(np.isfinite(samples)):
            self.close()
            raise MalformedReplyError("denoiser replied with non-finite samples", self._argv)
        sent = deconvolved.data.astype(np.float32)
        restored = np.where(samples == sent, deconvolved.data, samples.astype(np.float64))
        logger.debug("denoiser answered level %d (%d requests so far)", level, self.requests)
        return Image(restored)


def external_denoise(
    deconvolved: Image,
    observed: Image,
    level: int,
    config: ExternalDenoiserConfig,
) -> Image:
    """One-shot request on a fresh child."""
    with ExternalDenoiser(config) as denoiser:
        return denoiser.denoise(deconvolved, observed, level)
