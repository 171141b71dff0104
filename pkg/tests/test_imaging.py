import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from homobound import geometry as geo
from homobound.errors import DomainContainsCritical, ImageRangeError, NonFiniteCoordinate
from homobound.geometry import CameraIntrinsics, PerturbationScenario, ScenarioKind as K
from homobound.imaging import (
    CurveBatch,
    Image,
    Padding,
    PixelCurveContext,
    bilinear,
    interp_gradient_bound,
    pixel_value,
    preimage_box,
    render,
    sample_padded,
)

from conftest import DEG, stock_scenarios

MODES = list(Padding)
images = arrays(np.float64, st.tuples(st.integers(2, 7), st.integers(2, 7)),
                elements=st.floats(0, 1))


def test_image_validation():
    with pytest.raises(ImageRangeError):
        Image(np.array([[0.0, 1.5], [0, 0]]))
    with pytest.raises(ValueError):
        Image(np.zeros((1, 5)))
    img = Image(np.zeros((2, 3)), "wrap")
    assert img.padding is Padding.WRAP and img.shape == (2, 3)
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 1.0


# ---------------------------------------------------------------- padding


def test_padding_examples():
    px = np.array([[0.2, 0.4], [0.6, 0.8]])
    assert sample_padded(Image(px, "black"), -1, 0) == 0.0
    assert sample_padded(Image(px, "gray"), 5, 5) == 0.5
    assert sample_padded(Image(px, "replicate"), -3, 1) == 0.4
    row = Image(np.array([[0.1, 0.2, 0.3], [0.1, 0.2, 0.3]]), "wrap")
    assert sample_padded(row, 0, 4) == 0.2
    refl = Image(np.array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]), "reflect")
    # mirror without repeating the border: ... c b | a b c | b a ...
    assert [sample_padded(refl, 0, j) for j in (-2, -1, 3, 4)] == [0.3, 0.2, 0.2, 0.1]


@given(images, st.integers(-30, 30), st.integers(-30, 30))
def test_wrap_and_reflect_periodicity(px, i, j):
    h, w = px.shape
    wrap = Image(px, "wrap")
    assert sample_padded(wrap, i, j) == sample_padded(wrap, i + h, j) == sample_padded(wrap, i, j - w)
    refl = Image(px, "reflect")
    # symmetric about the -0.5/w-0.5 edges, without duplicating the border
    assert sample_padded(refl, i, -j) == sample_padded(refl, i, j)
    assert sample_padded(refl, i, (w - 1) + j) == sample_padded(refl, i, (w - 1) - j)
    assert sample_padded(refl, -i, j) == sample_padded(refl, i, j)


@given(images, st.integers(-20, 20), st.integers(-20, 20))
def test_in_bounds_samples_are_stored_values(px, i, j):
    for m in MODES:
        img = Image(px, m)
        if 0 <= i < px.shape[0] and 0 <= j < px.shape[1]:
            assert sample_padded(img, i, j) == px[i, j]
        elif m is Padding.REPLICATE:
            assert sample_padded(img, i, j) == px[np.clip(i, 0, px.shape[0] - 1), np.clip(j, 0, px.shape[1] - 1)]


# ---------------------------------------------------------------- bilinear


def test_bilinear_examples():
    img = Image(np.array([[0.0, 1.0], [1.0, 1.0]]))
    assert bilinear(img, 0.5, 0.5) == 0.75
    assert bilinear(img, 1.0, 0.0) == 1.0
    assert bilinear(img, -100.0, 300.0) == 0.0
    with pytest.raises(NonFiniteCoordinate):
        bilinear(img, math.nan, 0.0)


@given(images, st.sampled_from(MODES), st.floats(-50, 50), st.floats(-50, 50))
def test_bilinear_range(px, mode, u, v):
    val = bilinear(Image(px, mode), u, v)
    assert 0.0 <= val <= 1.0


@given(images, st.sampled_from(MODES))
def test_bilinear_at_integer_points(px, mode):
    img = Image(px, mode)
    h, w = px.shape
    rows, cols = np.mgrid[0:h, 0:w]
    assert np.array_equal(bilinear(img, cols.astype(float), rows.astype(float)), px)


@given(images, st.sampled_from(MODES), st.floats(-3, 8), st.floats(-3, 8), st.floats(0, 1))
def test_bilinear_cell_lipschitz(px, mode, u, v, frac):
    img = Image(px, mode)
    c0 = math.floor(u)
    u2 = c0 + frac  # same cell
    gu, _ = interp_gradient_bound(img, (c0, c0 + 1), (v, v))
    assert abs(bilinear(img, u2, v) - bilinear(img, u, v)) <= gu * abs(u2 - u) + 1e-12


# ---------------------------------------------------------------- gradient bound


def test_interp_gradient_examples():
    assert interp_gradient_bound(Image(np.full((5, 5), 0.3), "replicate"), (-3, 9), (-3, 9)) == (0.0, 0.0)
    stripe = np.zeros((6, 7))
    stripe[:, 3] = 1.0
    gu, gv = interp_gradient_bound(Image(stripe, "replicate"), (1, 5), (1, 4))
    assert (gu, gv) == (1.0, 0.0)


def _brute_sup(img, u_lo, u_hi, v_lo, v_hi):
    best_u = best_v = 0.0
    for r in range(math.ceil(v_lo) - 1, math.floor(v_hi) + 1):
        for c in range(math.ceil(u_lo) - 1, math.floor(u_hi) + 1):
            p00, p01 = sample_padded(img, r, c), sample_padded(img, r, c + 1)
            p10, p11 = sample_padded(img, r + 1, c), sample_padded(img, r + 1, c + 1)
            best_u = max(best_u, abs(p01 - p00), abs(p11 - p10))
            best_v = max(best_v, abs(p10 - p00), abs(p11 - p01))
    return best_u, best_v


@given(images, st.sampled_from(MODES), st.floats(-25, 25), st.floats(0, 30),
       st.floats(-25, 25), st.floats(0, 30))
def test_interp_gradient_matches_brute_force(px, mode, u0, du, v0, dv):
    img = Image(px, mode)
    got = interp_gradient_bound(img, (u0, u0 + du), (v0, v0 + dv))
    assert got == _brute_sup(img, u0, u0 + du, v0, v0 + dv)


def test_interp_gradient_dominates_finite_differences(rng):
    img = Image(rng.random((8, 8)), "black")
    gu, gv = interp_gradient_bound(img, (-2, 10), (-2, 10))
    u = rng.uniform(-1.5, 8.5, 10_000)
    v = rng.uniform(-1.5, 8.5, 10_000)
    # stay inside the cell so the probe sees a single bilinear piece
    h = 1e-7
    u = np.clip(u, np.floor(u) + h, np.floor(u) + 1 - 2 * h)
    v = np.clip(v, np.floor(v) + h, np.floor(v) + 1 - 2 * h)
    fu = np.abs(bilinear(img, u + h, v) - bilinear(img, u, v)) / h
    fv = np.abs(bilinear(img, u, v + h) - bilinear(img, u, v)) / h
    assert fu.max() <= gu + 1e-6 and fv.max() <= gv + 1e-6


# ---------------------------------------------------------------- pixel curves


def test_pixel_value_identity_and_constant(rng):
    px = rng.random((9, 11))
    intr = CameraIntrinsics.for_image(9, 11)
    for s in stock_scenarios():
        ctx = PixelCurveContext(Image(px), intr, s, 4, 7)
        assert pixel_value(ctx, 0.0) == px[4, 7]
        const = PixelCurveContext(Image(np.full((9, 11), 0.7), "replicate"), intr, s, 2, 3)
        assert pixel_value(const, s.domain[1]) == pytest.approx(0.7, abs=1e-15)
    with pytest.raises(IndexError):
        PixelCurveContext(Image(px), intr, stock_scenarios()[0], 9, 0)


def test_step_edge_crosses_half_once():
    h, w = 15, 30
    px = np.zeros((h, w))
    px[:, 15:] = 1.0
    intr = CameraIntrinsics.for_image(h, w)
    s = PerturbationScenario(K.YAW, (0.0, 20 * DEG))
    ctx = PixelCurveContext(Image(px, "replicate"), intr, s, 7, 10)
    ks = np.linspace(*s.domain, 20_001)
    g = ctx.batch().values_grid(ks)[0]
    assert np.all(np.diff(g) >= -1e-15)
    assert np.count_nonzero(np.diff(np.sign(g - 0.5))) == 1


@pytest.mark.parametrize("mode", MODES)
def test_render_identity(mode, rng):
    img = Image(rng.random((7, 9)), mode)
    intr = CameraIntrinsics.for_image(7, 9)
    for s in stock_scenarios():
        out = render(img, intr, s, 0.0)
        assert np.array_equal(out.pixels, img.pixels) and out.padding is img.padding


def test_render_quarter_turn(rng):
    px = rng.random((29, 29))
    intr = CameraIntrinsics.for_image(29, 29)
    s = PerturbationScenario(K.ROLL, (0, math.pi / 2))
    out = render(Image(px), intr, s, math.pi / 2).pixels
    # out[i, j] samples source (u0, v0) = (xc - (i - yc), yc + (j - xc))
    np.testing.assert_allclose(out, np.rot90(px, k=1), atol=1e-12)


def test_render_transz_contracts_rows(rng):
    h, w = 21, 6
    px = rng.random((h, w))
    intr = CameraIntrinsics.for_image(h, w)
    s = PerturbationScenario(K.TRANS_Z, (0, 10), 10.0)
    out = render(Image(px), intr, s, 10.0).pixels
    yc = intr.yc
    for i in range(h):
        src = yc + 0.5 * (i - yc)
        r0 = math.floor(src)
        b = src - r0
        ref = (1 - b) * px[r0] + (b * px[r0 + 1] if b else 0.0)
        np.testing.assert_allclose(out[i], ref, atol=1e-12)


# ---------------------------------------------------------------- preimage box


def test_preimage_box_degenerate_and_linear():
    intr = CameraIntrinsics(28.0, 13.5, 13.5)
    s = PerturbationScenario(K.YAW, (0.0, 0.1))
    (ul, uh), (vl, vh) = preimage_box(intr, s, (3.0, 4.0), (0.05, 0.05))
    u0, v0 = geo.preimage(intr, s, 0.05, (3.0, 4.0))
    assert (ul, uh, vl, vh) == pytest.approx((u0 - 1, u0 + 1, v0 - 1, v0 + 1))
    sy = PerturbationScenario(K.TRANS_Y, (0.0, 2.0), 10.0)
    (ul, uh), _ = preimage_box(intr, sy, (3.0, 20.0))
    ends = sorted(geo.preimage(intr, sy, k, (3.0, 20.0)).u for k in (0.0, 2.0))
    assert (ul + 1, uh - 1) == pytest.approx(ends)


def test_preimage_box_rejects_critical():
    intr = CameraIntrinsics(10.0, 0.0, 0.0)
    with pytest.raises(DomainContainsCritical):
        preimage_box(intr, PerturbationScenario(K.YAW, (0.0, 1.5)), (20.0, 0.0))


def test_preimage_box_contains_quarter_arc():
    intr = CameraIntrinsics(28.0, 13.5, 13.5)
    s = PerturbationScenario(K.ROLL, (0.0, math.pi / 2))
    for t in np.linspace(0, 2 * math.pi, 12, endpoint=False):
        p = (13.5 + math.cos(t), 13.5 + math.sin(t))
        (ul, uh), (vl, vh) = preimage_box(intr, s, p)
        u0, v0 = geo.preimage_array(intr, s.kind, 0.0, np.linspace(0, math.pi / 2, 10_000), *p)
        assert ul + 1 <= u0.min() + 1e-12 and u0.max() - 1e-12 <= uh - 1
        assert vl + 1 <= v0.min() + 1e-12 and v0.max() - 1e-12 <= vh - 1


@pytest.mark.parametrize("kind", list(K))
def test_preimage_box_containment(kind, rng):
    intr = CameraIntrinsics(28.0, 13.5, 13.5)
    dom = (-40 * DEG, 40 * DEG) if kind.is_rotation else (-2.0, 3.0)
    s = PerturbationScenario(kind, dom, None if kind.is_rotation else 10.0)
    ks = np.linspace(*dom, 10_000)
    for _ in range(100):
        p = rng.uniform(0, 27, 2)
        (ul, uh), (vl, vh) = preimage_box(intr, s, p)
        u0, v0 = geo.preimage_array(intr, kind, s.z, ks, *p)
        assert ul <= u0.min() and u0.max() <= uh and vl <= v0.min() and v0.max() <= vh


def test_curve_batch_matches_scalar_api(rng):
    img = Image(rng.random((10, 12)), "reflect")
    intr = CameraIntrinsics.for_image(10, 12)
    rows = rng.integers(0, 10, 30)
    cols = rng.integers(0, 12, 30)
    for s in stock_scenarios():
        cb = CurveBatch(img, intr, s, rows, cols)
        ks = np.linspace(*s.domain, 7)
        grid = cb.values_grid(ks)
        for n in range(30):
            ctx = PixelCurveContext(img, intr, s, int(rows[n]), int(cols[n]))
            assert grid[n] == pytest.approx([pixel_value(ctx, k) for k in ks], abs=1e-15)
