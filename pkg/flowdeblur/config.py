"""
Run configuration: built-in defaults, then an optional ``key=value`` config
file, then command-line flags.

Config file lines are ``key = value``; ``#`` starts a comment, keys are flag
names with ``-`` or ``_``. List values (``betas``, ``tv-weight``) are
comma-separated.
"""

from __future__ import annotations

import logging
import os
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .blur import BoundaryPolicy
from .errors import ConfigError, ParameterError
from .external import DEFAULT_TIMEOUT, ExternalDenoiserConfig
from .priors import DEFAULT_TV_ITERS, DEFAULT_TV_STEP, DEFAULT_TV_WEIGHTS, TvParams
from .providers import DEFAULT_FLOW_TIMEOUT
from .solver import DEFAULT_CG_MAX_ITER, DEFAULT_CG_TOL, DEFAULT_GLOBAL_ITERATIONS, HqsSchedule
from .synth import DEFAULT_CEILING, DEFAULT_NOISE_SIGMA, DEFAULT_SMOOTHNESS, FlowGenParams

ENV_LOG_LEVEL = "FLOWDEBLUR_LOG_LEVEL"
ENV_QUIET = "FLOWDEBLUR_QUIET"

COMMANDS = ("generate", "blur", "deblur", "eval")
PRIORS = ("identity", "tv", "external")
DEFAULT_LEVELS = 3


def float_list(text: str) -> tuple[float, ...]:
    """Parse ``"0.01, 0.05,0.25"`` into floats."""
    try:
        values = tuple(float(part) for part in text.replace(" ", "").split(",") if part)
    except ValueError as e:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from e
    if not values:
        raise ConfigError("expected at least one number")
    return values


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one subcommand run; built by ``build_run_config``."""

    command: str
    # generate
    sharp_dir: Path | None = None
    per_image: int = 1
    test_fraction: float = 0.0
    workers: int = 1
    # generate / blur
    ceiling: float = DEFAULT_CEILING
    smoothness: float = DEFAULT_SMOOTHNESS
    seed: int = 0
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    flow_out: Path | None = None
    # blur / deblur
    input: Path | None = None
    out: Path | None = None
    flow: Path | None = None
    boundary: str = BoundaryPolicy.REPLICATE.value
    bit_depth: int = 8
    # deblur
    flow_cmd: str | None = None
    flow_timeout: float = DEFAULT_FLOW_TIMEOUT
    oracle: bool = False
    levels: int | None = None
    betas: tuple[float, ...] | None = None
    prior: str = "tv"
    tv_weight: tuple[float, ...] = DEFAULT_TV_WEIGHTS
    tv_iters: int = DEFAULT_TV_ITERS
    tv_step: float = DEFAULT_TV_STEP
    denoiser_cmd: str | None = None
    denoiser_timeout: float = DEFAULT_TIMEOUT
    global_iters: int = DEFAULT_GLOBAL_ITERATIONS
    cg_tol: float = DEFAULT_CG_TOL
    cg_max_iter: int = DEFAULT_CG_MAX_ITER
    trace: Path | None = None
    reference: Path | None = None
    # eval
    pair: tuple[tuple[Path, Path], ...] = field(default_factory=tuple)
    flow_pair: tuple[tuple[Path, Path], ...] = field(default_factory=tuple)
    manifest: Path | None = None
    restored_dir: Path | None = None

    def schedule(self) -> HqsSchedule:
        if self.betas is not None:
            return HqsSchedule(
                betas=self.betas,
                cg_tol=self.cg_tol,
                cg_max_iter=self.cg_max_iter,
                global_iterations=self.global_iters,
            )
        return HqsSchedule.geometric(
            self.levels or DEFAULT_LEVELS,
            cg_tol=self.cg_tol,
            cg_max_iter=self.cg_max_iter,
            global_iterations=self.global_iters,
        )

    def tv_params(self) -> TvParams:
        return TvParams(weight=self.tv_weight, inner_iters=self.tv_iters, step=self.tv_step)

    def flow_params(self) -> FlowGenParams:
        return FlowGenParams(
            ceiling=self.ceiling,
            smoothness=self.smoothness,
            seed=self.seed,
            noise_sigma=self.noise_sigma,
        )

    def denoiser_config(self) -> ExternalDenoiserConfig:
        if not self.denoiser_cmd:
            raise ConfigError("--prior external needs --denoiser-cmd")
        return ExternalDenoiserConfig.from_command(self.denoiser_cmd, self.denoiser_timeout)

    @property
    def trace_path(self) -> Path | None:
        if self.trace is not None:
            return self.trace
        if self.out is not None:
            return self.out.with_suffix(".trace.tsv")
        return None


# Converters for values read from a config file; flags arrive already typed.
_FILE_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "sharp_dir": Path,
    "per_image": int,
    "test_fraction": float,
    "workers": int,
    "ceiling": float,
    "smoothness": float,
    "seed": int,
    "noise_sigma": float,
    "flow_out": Path,
    "input": Path,
    "out": Path,
    "flow": Path,
    "boundary": str,
    "bit_depth": int,
    "flow_cmd": str,
    "flow_timeout": float,
    "oracle": _bool,
    "levels": int,
    "betas": float_list,
    "prior": str,
    "tv_weight": float_list,
    "tv_iters": int,
    "tv_step": float,
    "denoiser_cmd": str,
    "denoiser_timeout": float,
    "global_iters": int,
    "cg_tol": float,
    "cg_max_iter": int,
    "trace": Path,
    "reference": Path,
    "manifest": Path,
    "restored_dir": Path,
}


def load_config_file(path: str | Path) -> dict[str, Any]:
    """
    Read a ``key=value`` config file into typed values.

    Raises:
        ConfigError: unreadable file, malformed line, unknown key or bad value.
    """
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{p}: {e.strerror or e}") from e
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        name = key.replace("-", "_")
        convert = _FILE_CONVERTERS.get(name)
        if convert is None:
            raise ConfigError(f"{p}:{lineno}: unknown key {key!r}")
        try:
            values[name] = convert(value)
        except (ValueError, ConfigError) as e:
            raise ConfigError(f"{p}:{lineno}: bad value for {key!r}: {e}") from e
    return values


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError(f"{cfg.command}: missing {', '.join(missing)}")


def validate(cfg: RunConfig) -> None:
    """
    Check a run configuration before any work starts.

    Raises:
        ConfigError: missing or contradictory options, or out-of-domain values.
    """
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}")
    try:
        BoundaryPolicy.parse(cfg.boundary)
        if cfg.bit_depth not in (8, 16):
            raise ConfigError(f"--bit-depth must be 8 or 16, got {cfg.bit_depth}")

        if cfg.command == "generate":
            _require(cfg, "sharp_dir", "out")
            if cfg.per_image < 1:
                raise ConfigError(f"--per-image must be >= 1, got {cfg.per_image}")
            if not 0.0 <= cfg.test_fraction < 1.0:
                raise ConfigError(f"--test-fraction must lie in [0, 1), got {cfg.test_fraction}")
            if cfg.workers < 1:
                raise ConfigError(f"--workers must be >= 1, got {cfg.workers}")
            cfg.flow_params()

        elif cfg.command == "blur":
            _require(cfg, "input", "out")
            if (cfg.flow is None) == (cfg.flow_out is None):
                raise ConfigError("blur: give exactly one of --flow or --flow-out")
            cfg.flow_params()

        elif cfg.command == "deblur":
            _require(cfg, "input", "out")
            if (cfg.flow is None) == (cfg.flow_cmd is None):
                raise ConfigError("deblur: give exactly one of --flow or --flow-cmd")
            if cfg.oracle and cfg.flow is None:
                raise ConfigError("deblur: --oracle needs --flow")
            if cfg.flow_timeout <= 0 or cfg.denoiser_timeout <= 0:
                raise ConfigError("timeouts must be > 0")
            if cfg.prior not in PRIORS:
                raise ConfigError(f"--prior must be one of {', '.join(PRIORS)}, got {cfg.prior!r}")
            if cfg.levels is not None and cfg.levels < 1:
                raise ConfigError(f"--levels must be >= 1, got {cfg.levels}")
            if cfg.betas is not None and cfg.levels is not None and len(cfg.betas) != cfg.levels:
                raise ConfigError(f"--levels {cfg.levels} disagrees with {len(cfg.betas)} betas")
            cfg.schedule()
            if cfg.prior == "tv":
                cfg.tv_params()
            elif cfg.prior == "external":
                cfg.denoiser_config()

        elif cfg.command == "eval":
            if not (cfg.pair or cfg.flow_pair or cfg.manifest):
                raise ConfigError("eval: give --pair, --flow-pair or --manifest")
            if cfg.restored_dir is not None and cfg.manifest is None:
                raise ConfigError("eval: --restored-dir needs --manifest")
            if cfg.workers < 1:
                raise ConfigError(f"--workers must be >= 1, got {cfg.workers}")
    except ParameterError as e:
        raise ConfigError(str(e)) from e


def build_run_config(
    command: str,
    flags: Mapping[str, Any],
    config_file: str | Path | None = None,
) -> RunConfig:
    """
    Layer defaults, config file and flags, then validate.

    ``flags`` holds only options given on the command line (``None`` values are
    ignored).
    """
    known = {f.name for f in fields(RunConfig)}
    values: dict[str, Any] = {}
    if config_file is not None:
        values.update(load_config_file(config_file))
    values.update({k: v for k, v in flags.items() if k in known and v is not None})
    for key in ("pair", "flow_pair"):
        if key in values:
            values[key] = tuple((Path(a), Path(b)) for a, b in values[key])
    if "tv_weight" in values and isinstance(values["tv_weight"], (int, float)):
        values["tv_weight"] = (float(values["tv_weight"]),)
    values.pop("command", None)
    try:
        cfg = RunConfig(command=command, **values)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    validate(cfg)
    return cfg


def log_level_from_env(default: str = "INFO") -> int:
    """Level from ``FLOWDEBLUR_LOG_LEVEL``; ``FLOWDEBLUR_QUIET=1`` forces WARNING."""
    if os.environ.get(ENV_QUIET, "").strip() in ("1", "true", "yes"):
        return logging.WARNING
    name = os.environ.get(ENV_LOG_LEVEL, default).strip().upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO
