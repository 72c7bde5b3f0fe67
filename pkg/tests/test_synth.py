"""Synthetic flows, blurred pairs and datasets."""

import math

import numpy as np
import pytest

from flowdeblur import (
    DatasetError,
    FlowGenParams,
    Image,
    MotionFlowMap,
    ParameterError,
    build_dataset,
    forward_blur,
    generate_pair,
    read_flow,
    read_image,
    sample_flow,
    write_image,
)
from flowdeblur.synth import read_manifest


@pytest.fixture
def sharp_dir(tmp_path, rng):
    root = tmp_path / "sharp"
    root.mkdir()
    for name in ("alpha", "beta"):
        write_image(Image(rng.uniform(size=(3, 20, 24))), root / f"{name}.png")
    (root / "notes.txt").write_text("ignored")
    return root


def test_flow_params_validation() -> None:
    for bad in (
        {"ceiling": -1.0},
        {"ceiling": math.inf},
        {"smoothness": 0.5},
        {"noise_sigma": -0.01},
        {"seed": -3},
    ):
        with pytest.raises(ParameterError):
            FlowGenParams(**bad)
    assert FlowGenParams(ceiling=0.0).ceiling == 0.0


def test_sample_flow_is_deterministic_per_seed() -> None:
    a = sample_flow(32, 24, FlowGenParams(seed=7))
    b = sample_flow(32, 24, FlowGenParams(seed=7))
    c = sample_flow(32, 24, FlowGenParams(seed=8))
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.v, b.v)
    assert not np.array_equal(a.u, c.u)


def test_sample_flow_respects_ceiling() -> None:
    params = FlowGenParams()
    rng = np.random.default_rng(0)
    peaks = [sample_flow(16, 16, params, rng).max_magnitude() for _ in range(1000)]
    assert max(peaks) <= 23.0
    assert min(peaks) >= 0.5 * 23.0 - 1e-4


def test_sample_flow_uses_the_range_of_a_larger_ceiling() -> None:
    params = FlowGenParams(ceiling=46.0)
    rng = np.random.default_rng(3)
    peaks = [sample_flow(16, 16, params, rng).max_magnitude() for _ in range(100)]
    assert max(peaks) >= 23.0
    assert max(peaks) <= 46.0


def test_sample_flow_is_smooth() -> None:
    flow = sample_flow(48, 48, FlowGenParams(seed=5))
    step = np.abs(np.diff(flow.u, axis=1)).mean()
    assert step < 0.2 * np.abs(flow.u).max()


def test_zero_ceiling_without_noise_reproduces_sharp(random_image) -> None:
    sharp = random_image(10, 9, channels=3)
    blurred, flow = generate_pair(sharp, FlowGenParams(ceiling=0.0, noise_sigma=0.0))
    assert flow.max_magnitude() == 0.0
    np.testing.assert_array_equal(blurred.data, sharp.data)


def test_generate_pair_is_deterministic(random_image) -> None:
    sharp = random_image(20, 16)
    a, fa = generate_pair(sharp, FlowGenParams(ceiling=6.0, seed=11))
    b, fb = generate_pair(sharp, FlowGenParams(ceiling=6.0, seed=11))
    np.testing.assert_array_equal(a.data, b.data)
    np.testing.assert_array_equal(fa.u, fb.u)
    assert a.data.min() >= 0.0 and a.data.max() <= 1.0


def test_noise_statistics(rng) -> None:
    """Mean absolute noise of N(0, 0.01) is 0.01 * sqrt(2/pi)."""
    sharp = Image(rng.uniform(0.2, 0.8, size=(1, 64, 64)))
    flow = MotionFlowMap.constant(2.0, 1.0, 64, 64)
    blurred, _ = generate_pair(sharp, FlowGenParams(noise_sigma=0.01, seed=4), flow=flow)
    residual = blurred.data - forward_blur(sharp, flow).data
    expected = 0.01 * math.sqrt(2 / math.pi)
    assert abs(np.abs(residual).mean() - expected) < 0.2 * expected


def test_build_dataset_writes_pairs_and_manifest(sharp_dir, tmp_path) -> None:
    out = tmp_path / "data"
    manifest = build_dataset(sharp_dir, out, 3, FlowGenParams(ceiling=5.0, seed=2))
    assert len(manifest.rows) == 6
    assert manifest.path == out / "manifest.tsv"
    lines = manifest.path.read_text().splitlines()
    assert lines[0] == "sharp\tblurred\tflow\tseed"
    assert lines[1].split("\t")[1] == "blurred/alpha_000.png"
    for row in read_manifest(manifest.path).rows:
        blurred = read_image(row.blurred)
        flow = read_flow(row.flow)
        assert blurred.shape == (3, 20, 24)
        assert flow.max_magnitude() <= 5.0
        assert row.sharp.is_file()
    assert len({row.seed for row in manifest.rows}) == 6


def test_build_dataset_is_reproducible(sharp_dir, tmp_path) -> None:
    params = FlowGenParams(ceiling=5.0, seed=9)
    a = build_dataset(sharp_dir, tmp_path / "a", 2, params)
    b = build_dataset(sharp_dir, tmp_path / "b", 2, params, workers=3)
    assert a.path.read_bytes() == b.path.read_bytes()
    for ra, rb in zip(a.rows, b.rows, strict=True):
        assert ra.blurred.read_bytes() == rb.blurred.read_bytes()
        assert ra.flow.read_bytes() == rb.flow.read_bytes()


def test_build_dataset_splits_by_sharp_image(sharp_dir, tmp_path) -> None:
    out = tmp_path / "split"
    build_dataset(sharp_dir, out, 2, FlowGenParams(ceiling=5.0), test_fraction=0.5)
    train = read_manifest(out / "train.tsv").rows
    test = read_manifest(out / "test.tsv").rows
    assert len(train) == 2 and len(test) == 2
    assert {r.sharp for r in train}.isdisjoint({r.sharp for r in test})


def test_build_dataset_without_images(tmp_path) -> None:
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(DatasetError, match="no PNG"):
        build_dataset(empty, tmp_path / "out", 1, FlowGenParams())
    with pytest.raises(DatasetError, match="not a directory"):
        build_dataset(tmp_path / "missing", tmp_path / "out", 1, FlowGenParams())


def test_read_manifest_rejects_bad_header(tmp_path) -> None:
    bad = tmp_path / "manifest.tsv"
    bad.write_text("a\tb\n")
    with pytest.raises(DatasetError, match="header"):
        read_manifest(bad)
