"""Grayscale image container, binary PGM ingestion and pixel bit-depth truncation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PgmError(ValueError):
    """Raised when a PGM file cannot be parsed."""


class GrayImage:
    """Immutable row-major 8-bit grayscale raster.

    The pixel array is locked after construction so an image can be shared
    freely between pipeline stages.
    """

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self.data = arr

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @classmethod
    def from_bytes(cls, width: int, height: int, payload: bytes) -> "GrayImage":
        if len(payload) != width * height:
            raise ValueError(
                f"payload has {len(payload)} bytes, expected {width * height}"
            )
        arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
        return cls(arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(
            np.array_equal(self.data, other.data)
        )

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True)
class QuantSpec:
    """Pixel bit-depth: keep the top `pixel_bits` bits, clear the rest."""

    pixel_bits: int

    def __post_init__(self):
        if not 1 <= self.pixel_bits <= 8:
            raise ValueError(f"pixel_bits must be in [1, 8], got {self.pixel_bits}")

    @property
    def mask(self) -> int:
        return (0xFF << (8 - self.pixel_bits)) & 0xFF


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited header token, skipping '#' comments."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PgmError("malformed header: unexpected end of file")
    return buf[start:pos], pos


def load_pgm(path) -> GrayImage:
    """Load a binary (P5) PGM file with maxval <= 255.

    The pixel bytes are taken verbatim; no scaling is applied.
    """
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:2] != b"P5":
        raise PgmError("malformed header: not a binary PGM (P5) file")
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _read_token(buf, pos)
        if not tok.isdigit():
            raise PgmError(f"malformed header: non-numeric field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise PgmError(f"malformed header: bad dimensions {width}x{height}")
    if maxval > 255:
        raise PgmError(f"unsupported maxval {maxval} (must be <= 255)")
    if maxval == 0:
        raise PgmError("malformed header: maxval 0")
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(buf) or not buf[pos : pos + 1].isspace():
        raise PgmError("malformed header: missing separator before payload")
    pos += 1
    payload = buf[pos : pos + width * height]
    if len(payload) < width * height:
        raise PgmError(
            f"truncated payload: expected {width * height} bytes, got {len(payload)}"
        )
    return GrayImage.from_bytes(width, height, payload)


def write_pgm(path, img: GrayImage) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P5 {img.width} {img.height} 255\n".encode("ascii"))
        fh.write(img.data.tobytes())


def quantize_pixels(img: GrayImage, spec: QuantSpec | int) -> GrayImage:
    """Clear the low (8 - pixel_bits) bits of every pixel.

    Values stay in the 8-bit container (no right shift), so magnitudes remain
    comparable across bit-depth settings.
    """
    if isinstance(spec, int):
        spec = QuantSpec(spec)
    if spec.pixel_bits == 8:
        return img
    return GrayImage(img.data & np.uint8(spec.mask))
