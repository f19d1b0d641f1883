"""Minimal binary PGM (P5) and PPM (P6) reader plus PGM writer.

Only 8-bit (maxval 255) images are supported. Color PPM input is converted
to luminance with the BT.601 weights 0.299/0.587/0.114 and floor(x + 0.5)
rounding, so the conversion is reproducible bit for bit.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import PgmError

_WHITESPACE = b" \t\n\r\x0b\x0c"


def _fail(path: Path, reason: str) -> PgmError:
    return PgmError(f"{path}: {reason}")


def _next_token(data: bytes, pos: int, path: Path) -> tuple[bytes, int]:
    # Skip whitespace and '#' comments, then collect one token.
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in _WHITESPACE:
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise _fail(path, "truncated header")
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE:
        pos += 1
    return data[start:pos], pos


def _header_int(data: bytes, pos: int, path: Path, what: str) -> tuple[int, int]:
    token, pos = _next_token(data, pos, path)
    try:
        value = int(token)
    except ValueError:
        raise _fail(path, f"bad {what} field {token!r}") from None
    return value, pos


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a P5/P6 file and return a (height, width) uint8 luminance array.

    Raises PgmError on malformed content (bad magic, maxval != 255,
    truncated pixel data).
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise _fail(path, f"unreadable: {exc}") from exc

    magic, pos = _next_token(data, 0, path)
    if magic not in (b"P5", b"P6"):
        raise _fail(path, f"unsupported magic {magic!r} (want P5 or P6)")
    width, pos = _header_int(data, pos, path, "width")
    height, pos = _header_int(data, pos, path, "height")
    maxval, pos = _header_int(data, pos, path, "maxval")
    if width <= 0 or height <= 0:
        raise _fail(path, f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise _fail(path, f"unsupported maxval {maxval} (want 255)")
    pos += 1  # single whitespace byte separates header from raster

    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise _fail(path, f"expected {expected} raster bytes, got {len(raster)}")

    pixels = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return pixels.reshape(height, width).copy()
    rgb = pixels.reshape(height, width, 3).astype(np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    """Write a 2-D uint8 array as binary PGM (P5, maxval 255)."""
    path = Path(path)
    if pixels.ndim != 2:
        raise _fail(path, f"need a 2-D array, got shape {pixels.shape}")
    if pixels.dtype != np.uint8:
        raise _fail(path, f"need uint8 pixels, got {pixels.dtype}")
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    path.write_bytes(header + np.ascontiguousarray(pixels).tobytes())
