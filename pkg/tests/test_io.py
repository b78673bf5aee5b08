import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from dlsphere import io
from dlsphere.errors import ParameterError, ParseError
from dlsphere.model import make_rng


@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6), elements=st.floats(allow_nan=False, allow_infinity=False)))
@settings(max_examples=60, deadline=None)
def test_matrix_roundtrip_bit_exact(tmp_path_factory, m):
    path = tmp_path_factory.mktemp("m") / "m.csv"
    io.write_matrix(path, m)
    back = io.read_matrix(path)
    assert back.shape == m.shape
    assert np.array_equal(back.view(np.uint64), m.view(np.uint64))


def test_matrix_gzip_and_layout(tmp_path):
    m = make_rng(0).standard_normal((3, 4))
    io.write_matrix(tmp_path / "a.csv.gz", m)
    assert np.array_equal(io.read_matrix(tmp_path / "a.csv.gz"), m)
    io.write_matrix(tmp_path / "a.csv", np.array([[1.0, 0.1]]))
    assert (tmp_path / "a.csv").read_text() == "1,2\n1,0.10000000000000001\n"


def test_matrix_parse_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("2,2\n1,2\n")
    with pytest.raises(ParseError):
        io.read_matrix(p)
    p.write_text("x,2\n")
    with pytest.raises(ParseError):
        io.read_matrix(p)
    p.write_text("1,2\n1,a\n")
    with pytest.raises(ParseError):
        io.read_matrix(p)


def test_pgm_p2_literal():
    img = io.parse_pgm(b"P2 2 2 255 0 255 128 64")
    assert (img.width, img.height, img.maxval) == (2, 2, 255)
    assert img.pixels.tolist() == [[0, 255], [128, 64]]


def test_pgm_comments_and_p5_twin():
    p2 = io.parse_pgm(b"P2\n# a comment\n2 2\n# another\n255\n0 255\n128 64\n")
    p5 = io.parse_pgm(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
    assert np.array_equal(p2.pixels, p5.pixels)
    assert (p2.width, p2.height, p2.maxval) == (p5.width, p5.height, p5.maxval)


def test_pgm_16bit_big_endian():
    img = io.parse_pgm(b"P5 2 1 65535\n" + bytes([0x01, 0x02, 0xFF, 0xFF]))
    assert img.pixels.tolist() == [[258, 65535]]


def test_pgm_errors_report_offsets():
    with pytest.raises(ParseError) as exc:
        io.parse_pgm(b"P6 2 2 255\n")
    assert exc.value.offset == 0
    with pytest.raises(ParseError) as exc:
        io.parse_pgm(b"P5 2 2 255\n" + bytes([1, 2, 3]))
    assert exc.value.offset == 14
    with pytest.raises(ParseError) as exc:
        io.parse_pgm(b"P2 2 2 255 0 1 2")
    assert exc.value.offset == 16
    with pytest.raises(ParseError):
        io.parse_pgm(b"P2 2 x 255")
    with pytest.raises(ParseError):
        io.parse_pgm(b"P2 1 1 10 11")
    with pytest.raises(ParseError):
        io.parse_pgm(b"P2 1 1 0 0")


def test_pgm_write_read_roundtrip(tmp_path):
    px = make_rng(1).integers(0, 1000, size=(5, 7))
    img = io.GrayImage(7, 5, 1000, px)
    for binary in (True, False):
        path = tmp_path / f"i{binary}.pgm"
        io.write_pgm(path, img, binary=binary)
        back = io.read_pgm(path)
        assert np.array_equal(back.pixels, px) and back.maxval == 1000


def test_gray_image_invariants():
    with pytest.raises(ParameterError):
        io.GrayImage(1, 1, 10, [[11]])
    with pytest.raises(ParameterError):
        io.GrayImage(1, 1, 0, [[0]])


def test_patches_order_and_counts():
    px = np.arange(16 * 16).reshape(16, 16) % 251
    img = io.GrayImage(16, 16, 255, px)
    cols = io.extract_patches(img, 8)
    assert cols.shape == (64, 4)
    # second patch is the top-right block, vectorized column-major
    assert np.array_equal(cols[:, 1], px[:8, 8:16].flatten(order="F").astype(float))
    assert np.array_equal(cols[:, 2], px[8:16, :8].flatten(order="F").astype(float))
    one = io.GrayImage(8, 8, 255, px[:8, :8])
    assert np.array_equal(io.extract_patches(one, 8)[:, 0], px[:8, :8].flatten(order="F"))
    const = io.GrayImage(16, 16, 255, np.full((16, 16), 7))
    assert np.all(io.extract_patches(const, 8) == 7.0)


def test_patches_512_image():
    img = io.GrayImage(512, 512, 255, np.zeros((512, 512), dtype=int))
    assert io.extract_patches(img, 8).shape == (64, 4096)


def test_patches_remainder_and_small():
    img = io.GrayImage(10, 9, 255, np.ones((9, 10), dtype=int))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        assert io.extract_patches(img, 8).shape == (64, 1)
    assert rec
    with pytest.raises(ParameterError):
        io.extract_patches(io.GrayImage(4, 4, 255, np.ones((4, 4), dtype=int)), 8)


def test_patches_center_and_unit_norm():
    px = make_rng(2).integers(0, 255, size=(16, 16))
    cols = io.extract_patches(io.GrayImage(16, 16, 255, px), 8, center=True, unit_norm=True)
    assert np.allclose(cols.mean(axis=0), 0, atol=1e-15)
    assert np.allclose(np.linalg.norm(cols, axis=0), 1)


def test_json_canonical():
    a = io.dumps({"b": np.float64(1.5), "a": [np.int64(2), np.nan], "c": np.array([1.0])})
    assert a == io.dumps({"c": [1.0], "a": [2, None], "b": 1.5})
    assert a.index('"a"') < a.index('"b"') < a.index('"c"')
