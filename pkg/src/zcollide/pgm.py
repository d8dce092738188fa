"""16-bit binary PGM (P5) export of height fields."""

from __future__ import annotations

import os

import numpy as np

from .detector import FieldKind, HeightField
from .pipeline import RenderTargets

MAXVAL = 65535


def quantize(depth: np.ndarray, coverage: np.ndarray, clear_depth: float) -> np.ndarray:
    """``round(d * 65535)`` with uncovered texels forced to the clear value."""
    d = np.where(coverage, depth, clear_depth)
    return np.rint(np.clip(d, 0.0, 1.0) * MAXVAL).astype(np.uint16)


def encode_pgm16(samples: np.ndarray) -> bytes:
    samples = np.asarray(samples, dtype=np.uint16)
    h, w = samples.shape
    header = f"P5\n{w} {h}\n{MAXVAL}\n".encode("ascii")
    return header + samples.astype(">u2").tobytes()


def _clear_value(field: HeightField | RenderTargets) -> float:
    if isinstance(field, HeightField):
        return 0.0 if field.kind is FieldKind.OBJECT_FRONT else 1.0
    uncovered = ~field.coverage
    return float(field.depth[uncovered][0]) if uncovered.any() else 1.0


def dump_height_field(field: HeightField | RenderTargets, path: str | os.PathLike,
                      clear_depth: float | None = None) -> None:
    """Write the field as a 16-bit P5 PGM; row 0 is the top of the viewport."""
    targets = field.targets if isinstance(field, HeightField) else field
    clear = _clear_value(field) if clear_depth is None else clear_depth
    data = encode_pgm16(quantize(targets.depth, targets.coverage, clear))
    with open(path, "wb") as fh:
        fh.write(data)


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    out, pos = [], 0
    while len(out) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        out.append(data[start:pos])
    return out, pos + 1  # single whitespace byte before the raster


def read_pgm16(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    (magic, w, h, maxval), offset = _tokens(data, 4)
    if magic != b"P5":
        raise ValueError(f"not a binary PGM (magic {magic!r})")
    w, h, maxval = int(w), int(h), int(maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    raster = np.frombuffer(data, dtype=dtype, count=w * h, offset=offset)
    return raster.reshape(h, w).astype(np.uint16)


def load_height_map(path: str | os.PathLike) -> np.ndarray:
    """Normalized depths back from a dump (within 1/65535 of the originals)."""
    return read_pgm16(path).astype(np.float64) / MAXVAL
