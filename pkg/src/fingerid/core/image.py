"""Grayscale images, binary PGM (P5) I/O and intensity normalization."""

from __future__ import annotations

import re

import numpy as np


class PgmError(ValueError):
    """Raised when bytes cannot be decoded as an 8-bit binary PGM."""


class GrayImage:
    """An 8-bit grayscale image backed by a read-only (height, width) array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels, dtype=np.uint8)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be 2-D and non-empty, got shape {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        self.pixels = arr

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.all(self.pixels == other.pixels))

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


_PGM_HEADER = re.compile(rb"^P5\s(?:#[^\n]*\n|\s)*?(\d+)\s(?:#[^\n]*\n|\s)*?(\d+)\s(?:#[^\n]*\n|\s)*?(\d+)\s")


def read_pgm(data: bytes) -> GrayImage:
    """Decode a binary (P5) 8-bit PGM."""
    if not data.startswith(b"P5"):
        raise PgmError("not a binary PGM (missing P5 magic)")
    # Tokenize the header by hand: three ASCII integers, '#' comments allowed.
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end == -1:
                raise PgmError("unterminated comment in header")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise PgmError("malformed PGM header")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PgmError("malformed PGM header")
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise PgmError(f"only 8-bit PGM supported (maxval 255, got {maxval})")
    if width < 1 or height < 1:
        raise PgmError(f"invalid dimensions {width}x{height}")
    expected = width * height
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise PgmError(f"truncated raster: expected {expected} bytes, got {len(raster)}")
    return GrayImage(np.frombuffer(raster, dtype=np.uint8).reshape(height, width))


def write_pgm(img: GrayImage) -> bytes:
    """Encode as binary P5; read_pgm(write_pgm(img)) is bit-exact."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def normalize_image(img: GrayImage, target_mean: float = 100.0, target_var: float = 100.0) -> GrayImage:
    """Shift and scale intensities to the requested mean and variance.

    A zero-variance input cannot be rescaled and comes back as a constant
    image at the target mean.
    """
    if target_var <= 0:
        raise ValueError("target_var must be positive")
    pix = img.pixels.astype(np.float64)
    mean = pix.mean()
    var = pix.var()
    if var == 0.0:
        out = np.full_like(pix, target_mean)
    else:
        out = target_mean + (pix - mean) * np.sqrt(target_var / var)
    return GrayImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))
