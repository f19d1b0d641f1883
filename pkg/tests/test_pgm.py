import numpy as np
import pytest

from stall_sentinel.errors import PgmError
from stall_sentinel.pgm import read_pgm, write_pgm


def test_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    pixels = rng.integers(0, 256, size=(13, 21), dtype=np.uint8)
    path = tmp_path / "a.pgm"
    write_pgm(path, pixels)
    back = read_pgm(path)
    assert back.dtype == np.uint8
    assert np.array_equal(back, pixels)


def test_read_is_deterministic(tmp_path):
    pixels = np.arange(64, dtype=np.uint8).reshape(8, 8)
    path = tmp_path / "a.pgm"
    write_pgm(path, pixels)
    assert np.array_equal(read_pgm(path), read_pgm(path))


def test_header_comments_and_whitespace(tmp_path):
    raster = bytes(range(6))
    data = b"P5 # magic\n# a comment line\n 3\t2 # dims\n255\n" + raster
    path = tmp_path / "c.pgm"
    path.write_bytes(data)
    assert np.array_equal(read_pgm(path), np.arange(6, dtype=np.uint8).reshape(2, 3))


def test_ppm_luminance_conversion(tmp_path):
    rng = np.random.default_rng(3)
    rgb = rng.integers(0, 256, size=(4, 5, 3), dtype=np.uint8)
    path = tmp_path / "c.ppm"
    header = b"P6\n5 4\n255\n"
    path.write_bytes(header + rgb.tobytes())
    got = read_pgm(path)
    for y in range(4):
        for x in range(5):
            r, g, b = (float(v) for v in rgb[y, x])
            expect = int(np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5))
            assert got[y, x] == min(max(expect, 0), 255)


@pytest.mark.parametrize(
    "data,fragment",
    [
        (b"P4\n2 2\n255\n" + bytes(4), "magic"),
        (b"P5\n2 2\n1000\n" + bytes(8), "maxval"),
        (b"P5\n0 2\n255\n", "dimensions"),
        (b"P5\n2 -1\n255\n", "dimensions"),
        (b"P5\n2 2\n255\n" + bytes(3), "raster bytes"),
        (b"P5\n2 x\n255\n" + bytes(4), "height"),
        (b"P5\n2", "truncated"),
    ],
)
def test_malformed_inputs(tmp_path, data, fragment):
    path = tmp_path / "bad.pgm"
    path.write_bytes(data)
    with pytest.raises(PgmError, match=fragment):
        read_pgm(path)


def test_missing_file(tmp_path):
    with pytest.raises(PgmError, match="unreadable"):
        read_pgm(tmp_path / "nope.pgm")


def test_write_rejects_bad_arrays(tmp_path):
    with pytest.raises(PgmError, match="2-D"):
        write_pgm(tmp_path / "x.pgm", np.zeros(4, dtype=np.uint8))
    with pytest.raises(PgmError, match="uint8"):
        write_pgm(tmp_path / "x.pgm", np.zeros((2, 2), dtype=np.float32))


def test_write_noncontiguous_view(tmp_path):
    base = np.arange(100, dtype=np.uint8).reshape(10, 10)
    view = base[::2, ::2]
    path = tmp_path / "v.pgm"
    write_pgm(path, view)
    assert np.array_equal(read_pgm(path), view)
