"""
CLI: flowdeblur generate / blur / deblur / eval.

Logs go to stderr, machine-readable results to stdout. Exit codes: 0 success,
1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .blur import BoundaryPolicy, forward_blur
from .config import (
    COMMANDS,
    PRIORS,
    RunConfig,
    build_run_config,
    float_list,
    log_level_from_env,
)
from .errors import ConfigError, FlowDeblurError
from .external import ExternalDenoiser
from .fileio import read_flow, read_image, write_flow, write_image
from .imaging import Image, format_psnr
from .metrics import evaluate, flow_mse
from .priors import IdentityPrior, TvPrior
from .providers import CommandFlowProvider, OracleFlowProvider, StaticFlowProvider
from .solver import DenoiserPrior, FlowSource, SolveTrace, global_iterate
from .synth import build_dataset, generate_pair, read_manifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _flag_list(text: str) -> tuple[float, ...]:
    try:
        return float_list(text)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def build_parser() -> argparse.ArgumentParser:
    """Flags default to ``None`` so a config file can fill what the command line omits."""
    parser = argparse.ArgumentParser(
        prog="flowdeblur",
        description="Spatially-varying motion deblurring by half-quadratic splitting",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Only warnings and errors")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value file; flags override it")

    synth = argparse.ArgumentParser(add_help=False)
    synth.add_argument("--ceiling", type=float, help="Max |u|,|v| in pixels (default 23)")
    synth.add_argument("--smoothness", type=float, help="Flow correlation length in pixels")
    synth.add_argument("--seed", type=int, help="RNG seed (default 0)")
    synth.add_argument("--noise-sigma", type=float, help="Gaussian noise std (default 0.01)")

    boundary = argparse.ArgumentParser(add_help=False)
    boundary.add_argument(
        "--boundary", choices=[b.value for b in BoundaryPolicy], help="Out-of-image taps"
    )

    p = sub.add_parser(
        "generate", parents=[common, synth, boundary], help="Build a synthetic dataset"
    )
    p.add_argument("--sharp-dir", type=Path, help="Directory of sharp PNG images")
    p.add_argument("--out", type=Path, help="Output directory")
    p.add_argument("--per-image", type=int, help="Pairs per sharp image (default 1)")
    p.add_argument("--test-fraction", type=float, help="Share of sharp images held out as test.tsv")
    p.add_argument("--workers", type=int, help="Parallel pair generation threads")

    p = sub.add_parser("blur", parents=[common, synth, boundary], help="Blur one image")
    p.add_argument("--input", type=Path, help="Sharp PNG")
    p.add_argument("--out", type=Path, help="Blurred PNG to write")
    p.add_argument("--flow", type=Path, help="Stored MFLO flow to apply")
    p.add_argument("--flow-out", type=Path, help="Sample a flow and write it here")
    p.add_argument("--bit-depth", type=int, choices=[8, 16], help="Output PNG depth")

    p = sub.add_parser("deblur", parents=[common, boundary], help="Restore one image")
    p.add_argument("--input", type=Path, help="Blurred PNG")
    p.add_argument("--out", type=Path, help="Restored PNG to write")
    p.add_argument("--flow", type=Path, help="Stored MFLO flow (non-blind)")
    p.add_argument(
        "--oracle",
        action="store_true",
        default=None,
        help="Treat --flow as exact: later global iterations use zero residual flow",
    )
    p.add_argument("--flow-cmd", help="Flow estimator command: PNG on stdin, MFLO on stdout")
    p.add_argument("--flow-timeout", type=float, help="Seconds per flow estimate")
    p.add_argument("--levels", type=int, help="Splitting levels (betas x5 from 0.01)")
    p.add_argument("--betas", type=_flag_list, help="Comma-separated increasing betas")
    p.add_argument("--prior", choices=PRIORS, help="Denoiser prior (default tv)")
    p.add_argument("--tv-weight", type=_flag_list, help="TV weight, scalar or per level")
    p.add_argument("--tv-iters", type=int, help="TV dual-ascent iterations")
    p.add_argument("--tv-step", type=float, help="TV dual step in (0, 0.25]")
    p.add_argument("--denoiser-cmd", help="External denoiser command (DNZ frames on stdio)")
    p.add_argument("--denoiser-timeout", type=float, help="Seconds per denoiser reply")
    p.add_argument("--global-iters", type=int, help="Global iterations (default 3)")
    p.add_argument("--cg-tol", type=float, help="Relative CG tolerance")
    p.add_argument("--cg-max-iter", type=int, help="CG iteration cap")
    p.add_argument("--trace", type=Path, help="Trace TSV (default <out>.trace.tsv)")
    p.add_argument("--reference", type=Path, help="Sharp PNG for per-level PSNR in the trace")
    p.add_argument("--bit-depth", type=int, choices=[8, 16], help="Output PNG depth")

    p = sub.add_parser("eval", parents=[common], help="Report PSNR/SSIM and flow MSE")
    p.add_argument("--pair", nargs=2, action="append", metavar=("A", "B"), help="Image pair")
    p.add_argument("--flow-pair", nargs=2, action="append", metavar=("A", "B"), help="Flow pair")
    p.add_argument("--manifest", type=Path, help="Dataset manifest.tsv")
    p.add_argument("--restored-dir", type=Path, help="Restored images named like the blurred ones")
    p.add_argument("--workers", type=int, help="Parallel evaluation threads")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """One stderr handler on the package logger; flags override the environment."""
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    else:
        level = log_level_from_env()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger("flowdeblur")
    for old in list(root.handlers):
        root.removeHandler(old)
    root.addHandler(handler)
    root.setLevel(level)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(cfg: RunConfig) -> int:
    assert cfg.sharp_dir is not None and cfg.out is not None
    manifest = build_dataset(
        cfg.sharp_dir,
        cfg.out,
        cfg.per_image,
        cfg.flow_params(),
        test_fraction=cfg.test_fraction,
        workers=cfg.workers,
        boundary=cfg.boundary,
    )
    print(manifest.path)
    return EXIT_OK


def cmd_blur(cfg: RunConfig) -> int:
    assert cfg.input is not None and cfg.out is not None
    sharp = read_image(cfg.input)
    if cfg.flow is not None:
        flow = read_flow(cfg.flow)
        flow.matches(sharp)
        if cfg.noise_sigma > 0.0:
            blurred, _ = generate_pair(sharp, cfg.flow_params(), cfg.boundary, flow=flow)
        else:
            blurred = forward_blur(sharp, flow, cfg.boundary).clipped()
    else:
        assert cfg.flow_out is not None
        blurred, flow = generate_pair(sharp, cfg.flow_params(), cfg.boundary)
        write_flow(flow, cfg.flow_out)
        print(cfg.flow_out)
    write_image(blurred, cfg.out, bit_depth=cfg.bit_depth)
    logger.info("blurred %s -> %s (max |flow| %.2f)", cfg.input, cfg.out, flow.max_magnitude())
    print(cfg.out)
    return EXIT_OK


def _flow_source(cfg: RunConfig, observed: Image) -> FlowSource:
    if cfg.flow_cmd is not None:
        return CommandFlowProvider(cfg.flow_cmd, timeout=cfg.flow_timeout)
    assert cfg.flow is not None
    flow = read_flow(cfg.flow)
    flow.matches(observed)
    return OracleFlowProvider(flow) if cfg.oracle else StaticFlowProvider(flow)


def _prior(cfg: RunConfig) -> DenoiserPrior:
    if cfg.prior == "identity":
        return IdentityPrior()
    if cfg.prior == "external":
        return ExternalDenoiser(cfg.denoiser_config())
    return TvPrior(cfg.tv_params())


def cmd_deblur(cfg: RunConfig) -> int:
    """Restore ``--input``; the trace is written even when the solve fails."""
    assert cfg.input is not None and cfg.out is not None
    observed = read_image(cfg.input)
    reference = read_image(cfg.reference) if cfg.reference is not None else None
    if reference is not None:
        reference.same_shape(observed, "reference and input images")
    flow_source = _flow_source(cfg, observed)
    schedule = cfg.schedule()
    trace = SolveTrace()
    prior = _prior(cfg)
    logger.info(
        "deblurring %s: %d levels, betas %s, prior %s, %d global iterations",
        cfg.input,
        schedule.levels,
        ",".join(f"{b:g}" for b in schedule.betas),
        cfg.prior,
        schedule.global_iterations,
    )
    try:
        restored, _ = global_iterate(
            observed,
            flow_source,
            prior,
            schedule,
            boundary=cfg.boundary,
            reference=reference,
            trace=trace,
        )
    finally:
        if isinstance(prior, ExternalDenoiser):
            prior.close()
        trace_path = cfg.trace_path
        if trace_path is not None:
            trace.write_tsv(trace_path)
    write_image(restored, cfg.out, bit_depth=cfg.bit_depth)
    print(cfg.out)
    return EXIT_OK


def _mean(values: Sequence[float]) -> float:
    if any(math.isinf(v) for v in values):
        return math.inf
    return math.fsum(values) / len(values)


def _image_row(a: Path, b: Path) -> list[str]:
    return [str(a), str(b), *evaluate(read_image(a), read_image(b)).row()]


def _flow_row(a: Path, b: Path) -> list[str]:
    fa = read_flow(a)
    fb = read_flow(b)
    peak_u = float(max(np.abs(fa.u).max(), np.abs(fb.u).max()))
    peak_v = float(max(np.abs(fa.v).max(), np.abs(fb.v).max()))
    return [str(a), str(b), f"{flow_mse(fa, fb):.6f}", f"{peak_u:.4f}", f"{peak_v:.4f}"]


def _print_table(header: Sequence[str], rows: list[list[str]], mean_columns: Sequence[int]) -> None:
    print("\t".join(header))
    for row in rows:
        print("\t".join(row))
    mean_row = ["mean"] + [""] * (len(header) - 1)
    for col in mean_columns:
        values = [float(row[col]) for row in rows]
        mean = _mean(values)
        mean_row[col] = format_psnr(mean) if header[col] == "psnr" else f"{mean:.6f}"
    print("\t".join(mean_row))


def cmd_eval(cfg: RunConfig) -> int:
    """Tab-separated metric tables; missing inputs are listed and nothing is computed."""
    image_pairs: list[tuple[Path, Path]] = list(cfg.pair)
    flow_pairs: list[tuple[Path, Path]] = list(cfg.flow_pair)
    manifest_flows: list[Path] = []
    if cfg.manifest is not None:
        for row in read_manifest(cfg.manifest).rows:
            restored = cfg.restored_dir / row.blurred.name if cfg.restored_dir else row.blurred
            image_pairs.append((restored, row.sharp))
            manifest_flows.append(row.flow)

    wanted = [p for pair in image_pairs + flow_pairs for p in pair] + manifest_flows
    missing = sorted({str(p) for p in wanted if not p.is_file()})
    if missing:
        logger.error("missing input files:\n  %s", "\n  ".join(missing))
        return EXIT_FAILURE

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        image_rows = list(pool.map(lambda ab: _image_row(*ab), image_pairs))
        flow_rows = list(pool.map(lambda ab: _flow_row(*ab), flow_pairs))

    if image_rows:
        header = ["a", "b", "psnr", "ssim"]
        if manifest_flows:
            header.append("max_flow")
            offset = len(cfg.pair)
            for i, flow_path in enumerate(manifest_flows):
                image_rows[offset + i].append(f"{read_flow(flow_path).max_magnitude():.4f}")
            for row in image_rows[:offset]:
                row.append("")
        _print_table(header, image_rows, [2, 3])
    if flow_rows:
        _print_table(["a", "b", "flow_mse", "max_abs_u", "max_abs_v"], flow_rows, [2, 3, 4])
    return EXIT_OK


_HANDLERS = {
    "generate": cmd_generate,
    "blur": cmd_blur,
    "deblur": cmd_deblur,
    "eval": cmd_eval,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point for the ``flowdeblur`` console script."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(verbose=args.verbose, quiet=args.quiet)
    if args.command not in COMMANDS:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    flags: dict[str, Any] = vars(args).copy()
    config_file = flags.pop("config", None)
    for key in ("verbose", "quiet", "command"):
        flags.pop(key, None)
    try:
        cfg = build_run_config(args.command, flags, config_file)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    try:
        return _HANDLERS[cfg.command](cfg)
    except (FlowDeblurError, OSError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
