"""PNG and MFLO file I/O."""

import struct

import cv2
import numpy as np
import pytest

from flowdeblur import FlowFormatError, Image, ImageIOError, MotionFlowMap
from flowdeblur.fileio import (
    decode_flow,
    decode_png,
    encode_flow,
    encode_png,
    read_flow,
    read_image,
    write_flow,
    write_image,
)


def test_png_16bit_keeps_precision(tmp_path, random_image) -> None:
    img = random_image(9, 7, channels=3)
    path = tmp_path / "x.png"
    write_image(img, path, bit_depth=16)
    back = read_image(path)
    assert back.shape == img.shape
    assert np.max(np.abs(back.data - img.data)) <= 0.5 / 65535 + 1e-12


def test_png_8bit_quantizes_to_nearest_level(tmp_path) -> None:
    img = Image.constant(0.5, 4, 4)
    path = tmp_path / "g.png"
    write_image(img, path)
    assert read_image(path).data[0, 0, 0] == pytest.approx(128 / 255)


def test_png_channel_order_is_rgb(tmp_path) -> None:
    """A red image stays red through the BGR-native codec."""
    red = Image(np.stack([np.ones((3, 3)), np.zeros((3, 3)), np.zeros((3, 3))]))
    path = tmp_path / "red.png"
    write_image(red, path)
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    assert raw[0, 0].tolist() == [0, 0, 255]
    np.testing.assert_array_equal(read_image(path).data, red.data)


def test_alpha_channel_is_dropped(tmp_path) -> None:
    rgba = np.zeros((2, 2, 4), dtype=np.uint8)
    rgba[..., 1] = 255
    rgba[..., 3] = 10
    path = tmp_path / "a.png"
    cv2.imwrite(str(path), rgba)
    img = read_image(path)
    assert img.channels == 3
    assert img.data[1].min() == 1.0


def test_truncated_png_is_rejected(random_image) -> None:
    payload = encode_png(random_image())
    with pytest.raises(ImageIOError, match="truncated"):
        decode_png(payload[: len(payload) // 2])
    with pytest.raises(ImageIOError, match="not a PNG"):
        decode_png(b"GIF89a" + payload)


def test_png_with_bytes_after_iend_still_decodes(random_image) -> None:
    img = random_image(6, 5)
    payload = encode_png(img, bit_depth=16)
    back = decode_png(payload + b"trailing metadata\x00\x01")
    np.testing.assert_allclose(back.data, img.data, atol=0.5 / 65535 + 1e-12)
    with pytest.raises(ImageIOError, match="truncated"):
        decode_png(payload[:-12])


def test_png_16bit_ramp_stays_strictly_increasing(tmp_path) -> None:
    ramp = Image(np.linspace(0.0, 1.0, 4096).reshape(1, 1, 4096))
    path = tmp_path / "ramp.png"
    write_image(ramp, path, bit_depth=16)
    back = read_image(path).data[0, 0]
    assert np.all(np.diff(back) > 0.0)
    assert back[0] == 0.0 and back[-1] == 1.0


@pytest.mark.parametrize("bit_depth", [8, 16])
def test_all_black_png_reads_back_as_zeros(tmp_path, bit_depth: int) -> None:
    path = tmp_path / "black.png"
    write_image(Image.zeros(5, 4, channels=3), path, bit_depth=bit_depth)
    back = read_image(path)
    assert back.shape == (3, 4, 5)
    assert not back.data.any()


def test_unsupported_suffix_and_missing_file(tmp_path) -> None:
    with pytest.raises(ImageIOError, match="unsupported"):
        read_image(tmp_path / "x.jpg")
    with pytest.raises(ImageIOError):
        read_image(tmp_path / "missing.png")
    with pytest.raises(ImageIOError):
        write_image(Image.zeros(2, 2), tmp_path / "x.bmp")


def test_flow_layout_is_header_then_u_then_v() -> None:
    u = np.arange(6, dtype=np.float32).reshape(2, 3)
    flow = MotionFlowMap(u, -u)
    payload = encode_flow(flow)
    assert payload[:12] == struct.pack("<4sII", b"MFLO", 3, 2)
    body = np.frombuffer(payload[12:], dtype="<f4")
    np.testing.assert_array_equal(body[:6], u.ravel())
    np.testing.assert_array_equal(body[6:], -u.ravel())


def test_flow_file_round_trip_is_exact(tmp_path, rng) -> None:
    flow = MotionFlowMap(rng.normal(size=(5, 7)) * 10, rng.normal(size=(5, 7)) * 10)
    path = tmp_path / "f.flo"
    write_flow(flow, path)
    back = read_flow(path)
    np.testing.assert_array_equal(back.u, flow.u)
    np.testing.assert_array_equal(back.v, flow.v)


@pytest.mark.parametrize(
    "payload, message",
    [
        (b"MFL", "shorter"),
        (struct.pack("<4sII", b"FLOW", 1, 1) + b"\x00" * 8, "magic"),
        (struct.pack("<4sII", b"MFLO", 0, 3), "zero"),
        (struct.pack("<4sII", b"MFLO", 2, 2) + b"\x00" * 31, "size mismatch"),
        (struct.pack("<4sII", b"MFLO", 2, 2) + b"\x00" * 33, "size mismatch"),
    ],
)
def test_malformed_flow_is_rejected(payload: bytes, message: str) -> None:
    with pytest.raises(FlowFormatError, match=message):
        decode_flow(payload)
