"""
Synthetic non-uniform blur data: smooth random motion-flow fields under a
magnitude ceiling, blurred/sharp pairs, and on-disk datasets with a TSV
manifest (``sharp\\tblurred\\tflow\\tseed``).
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .blur import BoundaryPolicy, forward_blur
from .errors import DatasetError, FlowDeblurError, ImageIOError, ParameterError
from .fileio import read_image, write_flow, write_image
from .imaging import Image, MotionFlowMap

logger = logging.getLogger(__name__)

DEFAULT_CEILING = 23.0
DEFAULT_SMOOTHNESS = 16.0
DEFAULT_NOISE_SIGMA = 0.01

MANIFEST_NAME = "manifest.tsv"
TRAIN_MANIFEST_NAME = "train.tsv"
TEST_MANIFEST_NAME = "test.tsv"
MANIFEST_HEADER = ("sharp", "blurred", "flow", "seed")


@dataclass(frozen=True)
class FlowGenParams:
    """
    ``ceiling`` bounds max(|u|, |v|) in pixels (0 yields the zero flow);
    ``smoothness`` is the Gaussian correlation length of the field.
    """

    ceiling: float = DEFAULT_CEILING
    smoothness: float = DEFAULT_SMOOTHNESS
    seed: int = 0
    noise_sigma: float = DEFAULT_NOISE_SIGMA

    def __post_init__(self) -> None:
        if not (math.isfinite(self.ceiling) and self.ceiling >= 0.0):
            raise ParameterError(f"ceiling must be finite and >= 0, got {self.ceiling}")
        if not (math.isfinite(self.smoothness) and self.smoothness >= 1.0):
            raise ParameterError(f"smoothness must be >= 1, got {self.smoothness}")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0.0):
            raise ParameterError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.seed < 0:
            raise ParameterError(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class ManifestRow:
    sharp: Path
    blurred: Path
    flow: Path
    seed: int


@dataclass(frozen=True)
class Manifest:
    path: Path
    rows: tuple[ManifestRow, ...]


def _float32_ceiling(ceiling: float) -> float:
    """Largest float32 not above ``ceiling``."""
    c = np.float32(ceiling)
    return float(np.nextafter(c, np.float32(0)) if float(c) > ceiling else c)


def sample_flow(
    width: int,
    height: int,
    params: FlowGenParams,
    rng: np.random.Generator | None = None,
) -> MotionFlowMap:
    """
    Gaussian-filtered white noise per component (u and v drawn independently),
    scaled jointly so max(|u|, |v|) is a uniform draw in [ceiling/2, ceiling],
    then hard-clipped to the ceiling.
    """
    if width < 1 or height < 1:
        raise ParameterError(f"flow dimensions must be positive, got {width}x{height}")
    rng = rng if rng is not None else np.random.default_rng(params.seed)
    fields = [
        gaussian_filter(rng.standard_normal((height, width)), params.smoothness, mode="reflect")
        for _ in range(2)
    ]
    amplitude = rng.uniform(0.5, 1.0) * params.ceiling
    peak = max(float(np.abs(f).max()) for f in fields)
    if peak == 0.0 or params.ceiling == 0.0:
        return MotionFlowMap.zeros(width, height)
    c = _float32_ceiling(params.ceiling)
    u, v = (np.clip((f * (amplitude / peak)).astype(np.float32), -c, c) for f in fields)
    return MotionFlowMap(u, v)


def generate_pair(
    sharp: Image,
    params: FlowGenParams,
    boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
    flow: MotionFlowMap | None = None,
) -> tuple[Image, MotionFlowMap]:
    """
    Blur ``sharp`` with a sampled (or given) flow, add Gaussian noise of
    ``noise_sigma`` and clamp to [0, 1]. Returns ``(blurred, flow)``.
    """
    rng = np.random.default_rng(params.seed)
    if flow is None:
        flow = sample_flow(sharp.width, sharp.height, params, rng)
    blurred = forward_blur(sharp, flow, boundary)
    if params.noise_sigma > 0.0:
        noise = rng.normal(0.0, params.noise_sigma, size=blurred.data.shape)
        blurred = Image(blurred.data + noise)
    return blurred.clipped(), flow


def _pair_seeds(root: int, count: int) -> list[int]:
    children = np.random.SeedSequence(root).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def list_sharp_images(sharp_dir: str | Path) -> list[Path]:
    root = Path(sharp_dir)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a directory")
    images = sorted(p for p in root.iterdir() if p.is_file() and p.suffix.lower() == ".png")
    if not images:
        raise DatasetError(f"{root}: no PNG images found")
    return images


def write_manifest(path: Path, rows: list[ManifestRow] | tuple[ManifestRow, ...]) -> None:
    """Blurred and flow paths are written relative to the manifest's directory."""
    base = path.parent.resolve()
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for row in rows:
            writer.writerow(
                [
                    str(row.sharp),
                    row.blurred.resolve().relative_to(base).as_posix(),
                    row.flow.resolve().relative_to(base).as_posix(),
                    row.seed,
                ]
            )


def read_manifest(path: str | Path) -> Manifest:
    """Parse a manifest; relative paths resolve against its directory."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"{p}: {e}") from e
    lines = text.splitlines()
    if not lines or tuple(lines[0].split("\t")) != MANIFEST_HEADER:
        raise DatasetError(f"{p}: missing manifest header {'/'.join(MANIFEST_HEADER)}")
    rows: list[ManifestRow] = []
    for n, line in enumerate(csv.reader(lines[1:], delimiter="\t"), start=2):
        if not line:
            continue
        if len(line) != len(MANIFEST_HEADER):
            raise DatasetError(f"{p}:{n}: expected {len(MANIFEST_HEADER)} columns, got {len(line)}")
        sharp, blurred, flow, seed = line
        try:
            seed_value = int(seed)
        except ValueError as e:
            raise DatasetError(f"{p}:{n}: bad seed {seed!r}") from e
        rows.append(
            ManifestRow(p.parent / sharp, p.parent / blurred, p.parent / flow, seed_value)
        )
    return Manifest(p, tuple(rows))


def _split(images: list[Path], test_fraction: float, seed: int) -> set[Path]:
    n_test = min(len(images), int(round(test_fraction * len(images))))
    if n_test == 0:
        return set()
    order = np.random.default_rng(seed).permutation(len(images))
    return {images[i] for i in order[:n_test]}


def build_dataset(
    sharp_dir: str | Path,
    out_dir: str | Path,
    count_per_image: int,
    params: FlowGenParams,
    test_fraction: float = 0.0,
    workers: int = 1,
    boundary: BoundaryPolicy | str = BoundaryPolicy.REPLICATE,
) -> Manifest:
    """
    Generate ``count_per_image`` pairs for every PNG in ``sharp_dir``.

    Writes ``blurred/<stem>_<k>.png`` (16-bit), ``flow/<stem>_<k>.flo`` and
    ``manifest.tsv`` under ``out_dir``; with ``test_fraction > 0`` also
    ``train.tsv`` and ``test.tsv``, splitting by sharp image.

    Raises:
        DatasetError: no input images, unreadable input or unwritable output.
    """
    if count_per_image < 1:
        raise ParameterError(f"count_per_image must be >= 1, got {count_per_image}")
    if not 0.0 <= test_fraction < 1.0:
        raise ParameterError(f"test_fraction must lie in [0, 1), got {test_fraction}")
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    images = list_sharp_images(sharp_dir)
    out = Path(out_dir)
    try:
        (out / "blurred").mkdir(parents=True, exist_ok=True)
        (out / "flow").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetError(f"{out}: cannot create output directories: {e}") from e

    seeds = _pair_seeds(params.seed, len(images) * count_per_image)
    jobs = [
        (sharp_path, k, seeds[i * count_per_image + k])
        for i, sharp_path in enumerate(images)
        for k in range(count_per_image)
    ]

    def run(job: tuple[Path, int, int]) -> ManifestRow:
        sharp_path, k, seed = job
        try:
            sharp = read_image(sharp_path)
        except ImageIOError as e:
            raise DatasetError(str(e)) from e
        blurred, flow = generate_pair(sharp, replace(params, seed=seed), boundary)
        name = f"{sharp_path.stem}_{k:03d}"
        blurred_path = out / "blurred" / f"{name}.png"
        flow_path = out / "flow" / f"{name}.flo"
        try:
            write_image(blurred, blurred_path, bit_depth=16)
            write_flow(flow, flow_path)
        except (ImageIOError, OSError) as e:
            raise DatasetError(f"cannot write pair {name}: {e}") from e
        logger.debug("wrote %s (seed %d, max |flow| %.2f)", name, seed, flow.max_magnitude())
        return ManifestRow(sharp_path.resolve(), blurred_path, flow_path, seed)

    try:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, jobs))
    except FlowDeblurError:
        raise
    except OSError as e:
        raise DatasetError(str(e)) from e

    manifest_path = out / MANIFEST_NAME
    try:
        write_manifest(manifest_path, rows)
        if test_fraction > 0.0:
            held_out = _split(images, test_fraction, params.seed)
            resolved = {p.resolve() for p in held_out}
            write_manifest(out / TRAIN_MANIFEST_NAME, [r for r in rows if r.sharp not in resolved])
            write_manifest(out / TEST_MANIFEST_NAME, [r for r in rows if r.sharp in resolved])
    except OSError as e:
        raise DatasetError(f"{manifest_path}: {e}") from e
    logger.info("generated %d pairs from %d sharp images into %s", len(rows), len(images), out)
    return Manifest(manifest_path, tuple(rows))
