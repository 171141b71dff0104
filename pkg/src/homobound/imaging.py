"""Images, padding, bilinear interpolation and pixel curves ``G(kappa)``.

Interpolation cells are anchored at integer pixel centres: cell ``(r, c)``
spans rows ``r..r+1`` and columns ``c..c+1``.  Corner samples outside the
image are imputed individually by the padding rule.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from . import geometry as geo
from .errors import DomainContainsCritical, ImageRangeError, NonFiniteCoordinate
from .geometry import CameraIntrinsics, PerturbationScenario, PixelCoord

# preimage coordinates are clipped here before integer conversion
_COORD_CLIP = 1e12


class Padding(str, Enum):
    BLACK = "black"
    GRAY = "gray"
    REPLICATE = "replicate"
    REFLECT = "reflect"
    WRAP = "wrap"

    @property
    def periodic(self) -> bool:
        return self in (Padding.REFLECT, Padding.WRAP)

    def period(self, n: int) -> int:
        return n if self is Padding.WRAP else 2 * (n - 1)


_FILL = {Padding.BLACK: 0.0, Padding.GRAY: 0.5}


@dataclass(frozen=True, eq=False)
class Image:
    """Single-channel ``h x w`` intensity grid in [0, 1]."""

    pixels: np.ndarray
    padding: Padding = Padding.BLACK

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float, copy=True)
        if px.ndim != 2 or min(px.shape) < 2:
            raise ValueError(f"image must be 2-D with h, w >= 2, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise ImageRangeError("intensities must lie in [0, 1]")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "padding", Padding(self.padding))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self):
        return self.pixels.shape

    def with_pixels(self, pixels) -> "Image":
        return Image(pixels, self.padding)

    @cached_property
    def cell_table(self) -> "CellGradientTable":
        return CellGradientTable(self)


def _map_index(idx, n, mode: Padding):
    """Map integer indices into ``[0, n)``; second value flags in-bounds entries."""
    idx = np.asarray(idx, dtype=np.int64)
    inside = (idx >= 0) & (idx < n)
    if mode is Padding.WRAP:
        return np.mod(idx, n), inside
    if mode is Padding.REFLECT:
        period = 2 * (n - 1)
        m = np.mod(idx, period)
        return np.where(m >= n, period - m, m), inside
    return np.clip(idx, 0, n - 1), inside


def sample_padded(img: Image, i, j):
    """Intensity at integer row ``i`` / column ``j``, padded outside the image."""
    h, w = img.shape
    ii, in_r = _map_index(i, h, img.padding)
    jj, in_c = _map_index(j, w, img.padding)
    vals = img.pixels[ii, jj]
    fill = _FILL.get(img.padding)
    if fill is not None:
        vals = np.where(in_r & in_c, vals, fill)
    return float(vals) if np.ndim(vals) == 0 else vals


def bilinear(img: Image, u0, v0):
    """Bilinear interpolation at continuous column ``u0`` and row ``v0``."""
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(v0))):
        raise NonFiniteCoordinate("bilinear interpolation at a non-finite coordinate")
    out = _bilinear(img, u0, v0)
    return float(out) if out.ndim == 0 else out


def _bilinear(img: Image, u0, v0):
    u0 = np.clip(u0, -_COORD_CLIP, _COORD_CLIP)
    v0 = np.clip(v0, -_COORD_CLIP, _COORD_CLIP)
    c0 = np.floor(u0)
    r0 = np.floor(v0)
    a = u0 - c0
    b = v0 - r0
    c0 = c0.astype(np.int64)
    r0 = r0.astype(np.int64)
    p00 = sample_padded(img, r0, c0)
    p01 = sample_padded(img, r0, c0 + 1)
    p10 = sample_padded(img, r0 + 1, c0)
    p11 = sample_padded(img, r0 + 1, c0 + 1)
    val = (1 - a) * (1 - b) * p00 + a * (1 - b) * p01 + (1 - a) * b * p10 + a * b * p11
    return np.clip(val, 0.0, 1.0)


@dataclass(frozen=True)
class PixelCurveContext:
    """The curve ``G(kappa)`` of output pixel ``(i, j)`` (row, column)."""

    image: Image
    intr: CameraIntrinsics
    scenario: PerturbationScenario
    i: int
    j: int

    def __post_init__(self):
        h, w = self.image.shape
        if not (0 <= self.i < h and 0 <= self.j < w):
            raise IndexError(f"pixel ({self.i}, {self.j}) outside {h}x{w} image")

    @property
    def pixel(self) -> PixelCoord:
        return PixelCoord(float(self.j), float(self.i))

    def batch(self) -> "CurveBatch":
        return CurveBatch(self.image, self.intr, self.scenario,
                          np.array([self.i]), np.array([self.j]))


def pixel_value(ctx: PixelCurveContext, kappa):
    u0, v0 = geo.preimage(ctx.intr, ctx.scenario, kappa, ctx.pixel)
    return bilinear(ctx.image, u0, v0)


def render(img: Image, intr: CameraIntrinsics, s: PerturbationScenario, kappa: float) -> Image:
    """The whole transformed image at parameter ``kappa``."""
    h, w = img.shape
    rows, cols = np.mgrid[0:h, 0:w]
    u0, v0 = geo.preimage(intr, s, kappa, (cols.astype(float), rows.astype(float)))
    return img.with_pixels(bilinear(img, u0, v0))


# --------------------------------------------------------------------------
# interpolation gradients


class CellGradientTable:
    """Per-cell sups of ``|dI/du|`` and ``|dI/dv|`` with O(1) rectangle max queries.

    Inside cell ``(r, c)`` the u-derivative is a convex mix of the two
    horizontal corner differences, so its sup is the larger of the two
    (likewise for v).  Cells are stored on an extended index range that covers
    all distinct padded behaviour, and a 2-D sparse table answers range maxima.
    """

    def __init__(self, img: Image):
        self.padding = img.padding
        h, w = img.shape
        self.rows = self._axis(h)
        self.cols = self._axis(w)
        r = np.arange(self.rows[0], self.rows[0] + self.rows[1])[:, None]
        c = np.arange(self.cols[0], self.cols[0] + self.cols[1])[None, :]
        p00 = sample_padded(img, r, c)
        p01 = sample_padded(img, r, c + 1)
        p10 = sample_padded(img, r + 1, c)
        p11 = sample_padded(img, r + 1, c + 1)
        du = np.maximum(np.abs(p01 - p00), np.abs(p11 - p10))
        dv = np.maximum(np.abs(p10 - p00), np.abs(p11 - p01))
        self._tables = (_sparse_table(du), _sparse_table(dv))
        self.n = (h, w)

    def _axis(self, n):
        # (first cell index, number of cells); one period suffices when periodic
        if self.padding.periodic:
            return 0, self.padding.period(n)
        # cells -2 and n lie wholly in the padding and stand for everything beyond
        return -2, n + 3

    def _ranges(self, lo, hi, n, axis):
        """Integer cell ranges -> up to two offset ranges in the table.

        Periodic ranges that wrap past the end split in two; the second
        range equals the first when no split is needed.
        """
        start, count = axis
        if self.padding.periodic:
            span = hi - lo + 1
            full = span >= count
            a0 = np.where(full, 0, np.mod(lo, count))
            a1 = np.where(full, count - 1, a0 + span - 1)
            wraps = a1 >= count
            first = (a0, np.where(wraps, count - 1, a1))
            second = (np.where(wraps, 0, a0), np.where(wraps, a1 - count, a1))
            return first, second
        last = start + count - 1
        r = (np.clip(lo, start, last) - start, np.clip(hi, start, last) - start)
        return r, r

    def query(self, u_lo, u_hi, v_lo, v_hi):
        """``(sup|dI/du|, sup|dI/dv|)`` over cells meeting each rectangle."""
        u_lo, u_hi, v_lo, v_hi = (
            np.clip(np.asarray(x, dtype=float), -_COORD_CLIP, _COORD_CLIP)
            for x in (u_lo, u_hi, v_lo, v_hi)
        )
        # cell c meets [lo, hi] iff c <= hi and c + 1 >= lo
        c_lo = (np.ceil(u_lo) - 1).astype(np.int64)
        c_hi = np.floor(u_hi).astype(np.int64)
        r_lo = (np.ceil(v_lo) - 1).astype(np.int64)
        r_hi = np.floor(v_hi).astype(np.int64)
        h, w = self.n
        rr = self._ranges(r_lo, r_hi, h, self.rows)
        cc = self._ranges(c_lo, c_hi, w, self.cols)
        out = tuple(
            np.maximum.reduce([_range_max(t, *r, *c) for r in rr for c in cc])
            for t in self._tables
        )
        if np.ndim(out[0]) == 0:
            return float(out[0]), float(out[1])
        return out


def _sparse_table(a):
    R, C = a.shape
    kr = int(np.floor(np.log2(R))) + 1
    kc = int(np.floor(np.log2(C))) + 1
    T = np.zeros((kr, kc, R, C))
    T[0, 0] = a
    for j in range(1, kc):
        step = 1 << (j - 1)
        T[0, j, :, : C - step] = np.maximum(T[0, j - 1, :, : C - step], T[0, j - 1, :, step:])
    for i in range(1, kr):
        step = 1 << (i - 1)
        T[i, :, : R - step] = np.maximum(T[i - 1, :, : R - step], T[i - 1, :, step:])
    return T


def _log2_floor(n):
    return np.floor(np.log2(np.maximum(n, 1))).astype(np.int64)


def _range_max(T, r0, r1, c0, c1):
    kr = _log2_floor(r1 - r0 + 1)
    kc = _log2_floor(c1 - c0 + 1)
    r1b = r1 - (1 << kr) + 1
    c1b = c1 - (1 << kc) + 1
    return np.maximum(
        np.maximum(T[kr, kc, r0, c0], T[kr, kc, r1b, c0]),
        np.maximum(T[kr, kc, r0, c1b], T[kr, kc, r1b, c1b]),
    )


def interp_gradient_bound(img: Image, u_range, v_range):
    """``(sup|dI/du|, sup|dI/dv|)`` over interpolation cells meeting the rectangle."""
    return img.cell_table.query(u_range[0], u_range[1], v_range[0], v_range[1])


def preimage_box(intr: CameraIntrinsics, s: PerturbationScenario, p, B=None):
    """Rectangle ``(u_range, v_range)`` containing the preimage path over ``B``.

    Exact extrema of each coordinate (endpoints plus interior stationary
    points), widened by one interpolation cell on each side.
    """
    lo, hi = s.domain if B is None else B
    u, v = float(p[0]), float(p[1])
    if geo.domain_hits_critical(intr, s.with_domain(lo, hi), u, v):
        raise DomainContainsCritical(f"[{lo}, {hi}] meets a critical value at {p}")
    box = _box(intr, s.kind, s.z, np.array([u]), np.array([v]), np.array([lo]), np.array([hi]),
               [a[None] for a in geo.stationary_angles(intr, s.kind, u, v)])
    return (float(box[0][0]), float(box[1][0])), (float(box[2][0]), float(box[3][0]))


def _box(intr, kind, z, u, v, lo, hi, angles):
    grad_u, grad_v, ext_u, ext_v = angles
    ku = geo.candidates_in(lo, hi, np.concatenate([ext_u, grad_u], axis=1))
    kv = geo.candidates_in(lo, hi, np.concatenate([ext_v, grad_v], axis=1))
    u0, _ = geo.preimage_array(intr, kind, z, ku, u[:, None], v[:, None])
    _, v0 = geo.preimage_array(intr, kind, z, kv, u[:, None], v[:, None])
    return u0.min(axis=1) - 1.0, u0.max(axis=1) + 1.0, v0.min(axis=1) - 1.0, v0.max(axis=1) + 1.0


@dataclass(eq=False)
class CurveBatch:
    """Vectorised pixel curves for a set of output pixels of one image.

    Every method takes ``idx`` (positions into ``rows``/``cols``) together with
    per-entry parameters, so heterogeneous pixels can be evaluated in one call.
    """

    image: Image
    intr: CameraIntrinsics
    scenario: PerturbationScenario
    rows: np.ndarray
    cols: np.ndarray
    _angles: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64).ravel()
        self.cols = np.asarray(self.cols, dtype=np.int64).ravel()
        self.u = self.cols.astype(float)
        self.v = self.rows.astype(float)
        self._angles = geo.stationary_angles(self.intr, self.scenario.kind, self.u, self.v)

    def __len__(self):
        return len(self.rows)

    def check_domain(self, lo=None, hi=None):
        s = self.scenario
        if lo is not None:
            s = PerturbationScenario(s.kind, (lo, hi), s.camera_height)
        bad = geo.domain_hits_critical(self.intr, s, self.u, self.v)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise DomainContainsCritical(
                f"domain {s.domain} meets a critical value at pixel "
                f"({self.rows[k]}, {self.cols[k]})"
            )

    def values(self, idx, kappa):
        u0, v0 = geo.preimage_array(self.intr, self.scenario.kind, self.scenario.z,
                                    kappa, self.u[idx], self.v[idx])
        return _bilinear(self.image, u0, v0)

    def values_grid(self, kappas):
        """``G`` for every pixel (rows) at every parameter in ``kappas`` (columns)."""
        k = np.asarray(kappas, dtype=float)[None, :]
        u0, v0 = geo.preimage_array(self.intr, self.scenario.kind, self.scenario.z,
                                    k, self.u[:, None], self.v[:, None])
        return _bilinear(self.image, u0, v0)

    def geom_sup(self, idx, lo, hi):
        """``(sup|du0/dk|, sup|dv0/dk|)`` over ``[lo, hi]`` per entry."""
        gu_ang, gv_ang, _, _ = self._angles
        u = self.u[idx][:, None]
        v = self.v[idx][:, None]
        kind, z = self.scenario.kind, self.scenario.z
        ku = geo.candidates_in(lo, hi, gu_ang[idx])
        kv = geo.candidates_in(lo, hi, gv_ang[idx])
        du, _ = geo.gradient_array(self.intr, kind, z, ku, u, v)
        _, dv = geo.gradient_array(self.intr, kind, z, kv, u, v)
        return np.abs(du).max(axis=1), np.abs(dv).max(axis=1)

    def box(self, idx, lo, hi):
        angles = tuple(a[idx] for a in self._angles)
        return _box(self.intr, self.scenario.kind, self.scenario.z,
                    self.u[idx], self.v[idx], np.asarray(lo, float), np.asarray(hi, float), angles)

    def interp_sup(self, idx, lo, hi):
        u_lo, u_hi, v_lo, v_hi = self.box(idx, lo, hi)
        return self.image.cell_table.query(u_lo, u_hi, v_lo, v_hi)
