"""
Flow providers: callables mapping the current image to a MotionFlowMap, fed to
``solver.global_iterate``.

- ``OracleFlowProvider``: the stored ground-truth flow on the first call and a
  zero residual flow afterwards (noiseless synthetic data is fully explained by
  its stored flow).
- ``StaticFlowProvider``: the same stored flow on every call.
- ``CommandFlowProvider``: runs an external estimator per call, passing the
  image as a 16-bit PNG on stdin and reading an MFLO buffer from stdout.
"""

from __future__ import annotations

import logging
import subprocess
from collections.abc import Sequence

from .commands import resolve_command
from .errors import FlowFormatError, FlowProviderError, ShapeError
from .fileio import decode_flow, encode_png
from .imaging import Image, MotionFlowMap

logger = logging.getLogger(__name__)

DEFAULT_FLOW_TIMEOUT = 120.0


class StaticFlowProvider:
    def __init__(self, flow: MotionFlowMap) -> None:
        self.flow = flow
        self.calls = 0

    def __call__(self, image: Image) -> MotionFlowMap:
        self.flow.matches(image)
        self.calls += 1
        return self.flow


class OracleFlowProvider(StaticFlowProvider):
    def __call__(self, image: Image) -> MotionFlowMap:
        self.flow.matches(image)
        self.calls += 1
        if self.calls == 1:
            return self.flow
        return MotionFlowMap.zeros(self.flow.width, self.flow.height)


class CommandFlowProvider:
    """External flow estimator invoked once per call."""

    def __init__(self, command: str | Sequence[str], timeout: float = DEFAULT_FLOW_TIMEOUT) -> None:
        self.argv = resolve_command(command)
        self.timeout = timeout
        self.calls = 0

    def __call__(self, image: Image) -> MotionFlowMap:
        payload = encode_png(image, bit_depth=16)
        try:
            result = subprocess.run(
                self.argv,
                input=payload,
                capture_output=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as e:
            raise FlowProviderError(
                f"flow estimator timed out after {self.timeout:g}s", self.argv
            ) from e
        except OSError as e:
            raise FlowProviderError(f"cannot run flow estimator: {e}", self.argv) from e
        self.calls += 1
        if result.returncode != 0:
            detail = result.stderr.decode("utf-8", errors="replace").strip()[:500]
            raise FlowProviderError(
                f"flow estimator exited with code {result.returncode}: {detail}", self.argv
            )
        try:
            flow = decode_flow(result.stdout, source="flow estimator stdout")
            flow.matches(image)
        except (FlowFormatError, ShapeError) as e:
            raise FlowProviderError(str(e), self.argv) from e
        logger.debug("flow estimator call %d: max |flow| %.3f", self.calls, flow.max_magnitude())
        return flow
