"""Minimal PGM (P2/P5, maxval 255) and CSV grid readers and writers."""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import ImageRangeError, SchemaError
from .imaging import Image, Padding


def _tokens(data: bytes, count: int):
    """First ``count`` header tokens (skipping comments) and the offset after them."""
    out = []
    pos = 0
    pat = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)")
    while len(out) < count:
        m = pat.match(data, pos)
        if not m:
            raise SchemaError("truncated PGM header")
        out.append(m.group(2))
        pos = m.end()
    return out, pos


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _tokens(data, 4)
    if magic not in (b"P2", b"P5"):
        raise SchemaError(f"unsupported PGM magic {magic!r}")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise SchemaError(f"only maxval 255 is supported, got {maxval}")
    if magic == b"P5":
        raw = np.frombuffer(data[pos + 1: pos + 1 + w * h], dtype=np.uint8)
        if raw.size != w * h:
            raise SchemaError("truncated P5 pixel data")
    else:
        raw = np.array(data[pos:].split(), dtype=np.int64)
        if raw.size != w * h:
            raise SchemaError(f"expected {w * h} samples, found {raw.size}")
        if raw.min(initial=0) < 0 or raw.max(initial=0) > 255:
            raise ImageRangeError("P2 sample outside 0..255")
    return raw.reshape(h, w).astype(float) / 255.0


def write_pgm(path, pixels, binary: bool = True) -> None:
    px = np.asarray(pixels, dtype=float)
    if px.min() < 0 or px.max() > 1:
        raise ImageRangeError("intensities must lie in [0, 1]")
    q = np.rint(px * 255).astype(np.uint8)
    h, w = q.shape
    if binary:
        Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + q.tobytes())
    else:
        rows = "\n".join(" ".join(str(int(x)) for x in r) for r in q)
        Path(path).write_text(f"P2\n{w} {h}\n255\n{rows}\n")


def read_csv(path) -> np.ndarray:
    try:
        px = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except ValueError as exc:
        raise SchemaError(f"bad CSV grid: {exc}") from exc
    return px


def write_csv(path, pixels) -> None:
    np.savetxt(path, np.asarray(pixels, dtype=float), delimiter=",", fmt="%.17g")


def load_image(path, padding=Padding.BLACK) -> Image:
    p = Path(path)
    px = read_pgm(p) if p.suffix.lower() == ".pgm" else read_csv(p)
    return Image(px, padding)


def save_image(path, img) -> None:
    px = img.pixels if isinstance(img, Image) else img
    p = Path(path)
    if p.suffix.lower() == ".pgm":
        write_pgm(p, px)
    else:
        write_csv(p, px)
