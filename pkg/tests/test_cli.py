"""End-to-end runs of the flowdeblur command line through ``main``."""

import shlex

import numpy as np
import pytest
from conftest import double_command, piecewise_constant

from flowdeblur import (
    HqsSchedule,
    Image,
    MotionFlowMap,
    TvParams,
    TvPrior,
    hqs_deblur,
    psnr,
    read_image,
    write_flow,
    write_image,
)
from flowdeblur.cli import main


@pytest.fixture
def scene(tmp_path, rng):
    """A sharp 16-bit image and a constant flow on disk."""
    sharp = piecewise_constant(rng, 24, 20)
    sharp_path = tmp_path / "sharp.png"
    write_image(sharp, sharp_path, bit_depth=16)
    flow_path = tmp_path / "flow.flo"
    write_flow(MotionFlowMap.constant(3.0, 1.0, 24, 20), flow_path)
    return sharp_path, flow_path


def test_no_command_is_usage_error(capsys) -> None:
    assert main([]) == 2
    assert capsys.readouterr().out == ""


def test_bad_flag_value_exits_2() -> None:
    with pytest.raises(SystemExit) as info:
        main(["deblur", "--prior", "magic"])
    assert info.value.code == 2


def test_bad_config_writes_nothing(tmp_path, scene) -> None:
    sharp_path, flow_path = scene
    conf = tmp_path / "run.conf"
    conf.write_text("levels = 0\n")
    out = tmp_path / "restored.png"
    argv = ["deblur", "--config", str(conf), "--input", str(sharp_path), "--flow", str(flow_path)]
    assert main([*argv, "--out", str(out)]) == 2
    assert not out.exists()
    assert not out.with_suffix(".trace.tsv").exists()


def test_blur_then_deblur_improves_psnr(tmp_path, scene, capsys) -> None:
    sharp_path, _ = scene
    blurred = tmp_path / "blurred.png"
    sampled = tmp_path / "sampled.flo"
    argv = ["blur", "--input", str(sharp_path), "--out", str(blurred), "--flow-out", str(sampled)]
    assert main([*argv, "--ceiling", "4", "--seed", "3", "--bit-depth", "16"]) == 0
    assert capsys.readouterr().out.splitlines() == [str(sampled), str(blurred)]

    restored = tmp_path / "restored.png"
    argv = ["deblur", "--input", str(blurred), "--flow", str(sampled), "--oracle"]
    assert main([*argv, "--out", str(restored), "--reference", str(sharp_path)]) == 0
    sharp = read_image(sharp_path)
    assert psnr(read_image(restored), sharp) > psnr(read_image(blurred), sharp)
    trace = restored.with_suffix(".trace.tsv").read_text().splitlines()
    assert trace[0].startswith("global_iter\tlevel\tbeta")
    assert sum(1 for line in trace if line.split("\t")[1] == "*") == 3


def test_zero_flow_identity_prior_reproduces_input(tmp_path, scene) -> None:
    sharp_path, _ = scene
    zero = tmp_path / "zero.flo"
    write_flow(MotionFlowMap.zeros(24, 20), zero)
    out = tmp_path / "out.png"
    argv = ["deblur", "--input", str(sharp_path), "--flow", str(zero), "--prior", "identity"]
    assert main([*argv, "--out", str(out), "--bit-depth", "16"]) == 0
    np.testing.assert_array_equal(read_image(out).data, read_image(sharp_path).data)


def test_single_global_iteration_matches_one_solve(tmp_path, scene) -> None:
    sharp_path, flow_path = scene
    out = tmp_path / "cli.png"
    argv = ["deblur", "--input", str(sharp_path), "--flow", str(flow_path), "--global-iters", "1"]
    assert main([*argv, "--out", str(out)]) == 0

    observed = read_image(sharp_path)
    flow = MotionFlowMap.constant(3.0, 1.0, 24, 20)
    restored, _ = hqs_deblur(observed, flow, TvPrior(TvParams()), HqsSchedule(global_iterations=1))
    direct = tmp_path / "direct.png"
    write_image(restored, direct)
    assert out.read_bytes() == direct.read_bytes()


def test_external_failure_exits_1_and_flushes_trace(tmp_path, scene) -> None:
    sharp_path, flow_path = scene
    out = tmp_path / "out.png"
    trace = tmp_path / "trace.tsv"
    argv = ["deblur", "--input", str(sharp_path), "--flow", str(flow_path), "--out", str(out)]
    argv += ["--trace", str(trace), "--prior", "external"]
    argv += ["--denoiser-cmd", shlex.join(double_command("garbage_denoiser"))]
    assert main(argv) == 1
    assert not out.exists()
    assert trace.read_text().startswith("global_iter\t")


def test_generate_and_eval_manifest(tmp_path, rng, capsys) -> None:
    sharp_dir = tmp_path / "sharp"
    sharp_dir.mkdir()
    for name in ("a", "b"):
        write_image(Image(rng.uniform(size=(1, 16, 16))), sharp_dir / f"{name}.png")
    out = tmp_path / "data"
    argv = ["generate", "--sharp-dir", str(sharp_dir), "--out", str(out), "--per-image", "3"]
    assert main([*argv, "--ceiling", "6", "--seed", "7"]) == 0
    manifest = out / "manifest.tsv"
    assert capsys.readouterr().out.strip() == str(manifest)
    first = manifest.read_bytes()
    assert len(first.decode().splitlines()) == 1 + 6

    assert main([*argv, "--ceiling", "6", "--seed", "7"]) == 0
    assert manifest.read_bytes() == first
    capsys.readouterr()

    assert main(["eval", "--manifest", str(manifest)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "a\tb\tpsnr\tssim\tmax_flow"
    assert len(lines) == 1 + 6 + 1
    assert all(float(line.split("\t")[4]) <= 6.0 for line in lines[1:-1])
    assert lines[-1].startswith("mean\t")


def test_eval_constant_offset_and_identical_pairs(tmp_path, capsys) -> None:
    dark, grey = tmp_path / "dark.png", tmp_path / "grey.png"
    write_image(Image.zeros(16, 16), dark)
    write_image(Image.constant(0.5, 16, 16), grey, bit_depth=16)
    assert main(["eval", "--pair", str(dark), str(grey), "--pair", str(dark), str(dark)]) == 0
    rows = [line.split("\t") for line in capsys.readouterr().out.splitlines()]
    assert abs(float(rows[1][2]) - 6.0206) < 1e-3
    assert rows[2][2:4] == ["inf", "1.000000"]
    assert rows[3][2] == "inf"


def test_eval_flow_pair_against_itself(tmp_path, scene, capsys) -> None:
    _, flow_path = scene
    assert main(["eval", "--flow-pair", str(flow_path), str(flow_path)]) == 0
    rows = [line.split("\t") for line in capsys.readouterr().out.splitlines()]
    assert rows[0] == ["a", "b", "flow_mse", "max_abs_u", "max_abs_v"]
    assert rows[1][2:] == ["0.000000", "3.0000", "1.0000"]


def test_eval_missing_files_exit_1(tmp_path, scene, capsys) -> None:
    sharp_path, _ = scene
    assert main(["eval", "--pair", str(sharp_path), str(tmp_path / "gone.png")]) == 1
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "gone.png" in captured.err
