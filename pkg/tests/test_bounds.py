import itertools
import math

import numpy as np
import pytest
from hypothesis import example, given, strategies as st

from homobound.bounds import (
    BoundConfig,
    LinearSegment,
    PiecewiseLinearBound,
    Side,
    bound_image,
    bound_pixel,
    eps_max,
    f_bound,
    fit_segment,
    lipschitz_constant,
    polytope_area,
    split_domain,
)
from homobound.bounds import serialize
from homobound.errors import (
    DegenerateSamples,
    DomainContainsCritical,
    EmptyDomain,
    IterationBudgetExhausted,
    SchemaError,
)
from homobound.geometry import CameraIntrinsics, PerturbationScenario, ScenarioKind as K
from homobound.imaging import Image, PixelCurveContext

from conftest import DEG, stock_scenarios


def curve(ctx, ks):
    return ctx.batch().values_grid(ks)[0]


# ---------------------------------------------------------------- partition


def test_split_domain_examples():
    assert split_domain((0, 1), 2) == [(0, 0.5), (0.5, 1)]
    assert split_domain((0, 1), 1) == [(0, 1)]
    parts = split_domain((-5 * DEG, 5 * DEG), 4)
    assert len(parts) == 4 and all(b - a == pytest.approx(2.5 * DEG) for a, b in parts)
    with pytest.raises(EmptyDomain):
        split_domain((1, 0), 2)
    with pytest.raises(ValueError):
        split_domain((0, 1), 0)


@given(st.floats(-10, 10), st.floats(0, 10), st.integers(1, 16))
def test_split_domain_covers(lo, width, q):
    parts = split_domain((lo, lo + width), q)
    assert parts[0][0] == lo and parts[-1][1] == lo + width
    assert all(parts[k][1] == parts[k + 1][0] for k in range(q - 1))


# ---------------------------------------------------------------- fitting


def brute_fit(xs, ys, side):
    """Exhaustive support-pair enumeration with the documented tie-break."""
    sgn = 1.0 if side is Side.LOWER else -1.0
    y = sgn * np.asarray(ys)
    cands = [(0.0, yi) for yi in y]
    for i, j in itertools.combinations(range(len(xs)), 2):
        if xs[i] != xs[j]:
            w = (y[j] - y[i]) / (xs[j] - xs[i])
            cands.append((w, y[i] - w * xs[i]))
    best = None
    for w, b in cands:
        if np.all(w * xs + b <= y + 1e-12):
            gap = np.mean(y - (w * xs + b))
            key = (round(gap, 10), abs(w), b)
            if best is None or key < best[0]:
                best = (key, w, b)
    return sgn * best[1], sgn * best[2], best[0][0]


def test_fit_examples():
    ks = np.array([0.0, 0.5, 1.0, 3.0])
    seg = fit_segment(np.c_[ks, 2 * ks + 1], Side.LOWER)
    assert (seg.w, seg.b) == pytest.approx((2, 1))
    seg = fit_segment([(0, 0), (1, 1), (2, 0)], Side.LOWER)
    w, b, _ = brute_fit(np.array([0.0, 1, 2]), [0.0, 1, 0], Side.LOWER)
    assert (seg.w, seg.b) == pytest.approx((w, b))
    for side in Side:
        seg = fit_segment(np.c_[ks, np.full(4, 0.3)], side)
        assert (seg.w, seg.b) == pytest.approx((0.0, 0.3))
    with pytest.raises(DegenerateSamples):
        fit_segment([(1, 0), (1, 1)])


@given(st.lists(st.floats(0, 1), min_size=2, max_size=9), st.sampled_from(list(Side)),
       st.floats(0.1, 3))
@example([0.0, 1.0, 0.0], Side.UPPER, 1.6248936821647963)  # centroid one ulp off the middle sample
def test_fit_matches_support_pair_enumeration(ys, side, span):
    xs = np.linspace(0, span, len(ys))
    seg = fit_segment(np.c_[xs, ys], side)
    w, b, gap = brute_fit(xs, ys, side)
    sgn = 1 if side is Side.LOWER else -1
    mine = np.mean(sgn * (np.asarray(ys) - (seg.w * xs + seg.b)))
    assert mine == pytest.approx(gap, abs=1e-9)
    # feasible and touching
    resid = sgn * (np.asarray(ys) - (seg.w * xs + seg.b))
    assert resid.min() >= -1e-12 and resid.min() <= 1e-12
    assert abs(seg.w) <= abs(w) + 1e-9


# ---------------------------------------------------------------- eps_max


def test_f_bound_example():
    assert f_bound(1, 2, 3, 2) == 4.5


def test_eps_max_examples():
    v = eps_max(lambda k: k, (0, 1), lambda a, b: 1.0, 0.01, 1000)
    assert 1.0 <= v <= 1.01
    J = lambda k: -(k - 0.3) ** 2
    L = lambda a, b: 2 * max(abs(a - 0.3), abs(b - 0.3))
    v = eps_max(J, (0, 1), L, 1e-3, 10_000)
    assert 0.0 <= v <= 1e-3


def test_eps_max_budget():
    J = lambda k: math.sin(40 * k)
    with pytest.raises(IterationBudgetExhausted) as exc:
        eps_max(J, (0, 3), lambda a, b: 40.0, 1e-6, 20)
    assert exc.value.bound >= 1.0 and exc.value.iterations > 20


@given(st.floats(1, 30), st.floats(-3, 3), st.floats(0.001, 0.1))
def test_eps_max_certificate_property(freq, phase, eps):
    J = lambda k: math.sin(freq * k + phase) + 0.3 * k
    L = lambda a, b: freq + 0.3
    v = eps_max(J, (0, 2), L, eps, 100_000)
    grid = np.linspace(0, 2, 20_001)
    gmax = np.max(np.sin(freq * grid + phase) + 0.3 * grid)
    assert gmax <= v + 1e-12
    assert v <= gmax + eps + (freq + 0.3) * (grid[1] - grid[0])


# ---------------------------------------------------------------- segments/area


def test_polytope_area_examples():
    lo = [LinearSegment(0, 0, 0, 2)]
    hi = [LinearSegment(0, 1, 0, 2)]
    assert polytope_area(PiecewiseLinearBound(lo, hi)) == 2.0
    same = [LinearSegment(0.3, 0.1, 0, 2)]
    assert polytope_area(PiecewiseLinearBound(same, same)) == 0.0


@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-1, 1)), min_size=2, max_size=2),
       st.lists(st.tuples(st.floats(-2, 2), st.floats(-1, 1)), min_size=2, max_size=2),
       st.floats(0, 0.2), st.floats(0, 0.2))
def test_polytope_area_matches_riemann(lows, ups, sl, su):
    parts = split_domain((0.0, 1.0), 2)
    b = PiecewiseLinearBound([LinearSegment(w, c, *p) for (w, c), p in zip(lows, parts)],
                             [LinearSegment(w, c, *p) for (w, c), p in zip(ups, parts)], sl, su)
    n = 1_000_000
    mid = (np.arange(n) + 0.5) / n
    ref = np.mean(b.ub_star(mid) - b.lb_star(mid))
    assert polytope_area(b) == pytest.approx(ref, rel=1e-6, abs=1e-9)


def test_envelope_semantics():
    parts = split_domain((0.0, 1.0), 2)
    b = PiecewiseLinearBound([LinearSegment(1, 0, *parts[0]), LinearSegment(-1, 1, *parts[1])],
                             [LinearSegment(0, 2, *parts[0]), LinearSegment(0, 3, *parts[1])], 0.1, 0.0)
    # lines are global: at 0.25 the second lower line (0.75) dominates
    assert b.lb(0.25) == 0.75 and b.lb_star(0.25) == pytest.approx(0.65)
    assert b.ub(0.9) == 2.0
    assert b.value_range() == pytest.approx((0.4, 2.0))


# ---------------------------------------------------------------- Lipschitz


def test_lipschitz_constant_image_is_slope(intr28):
    img = Image(np.full((28, 28), 0.4), "replicate")
    for s in stock_scenarios():
        ctx = PixelCurveContext(img, intr28, s, 5, 9)
        bud = lipschitz_constant(ctx, LinearSegment(-0.7, 0.2, *s.domain))
        assert bud.L == pytest.approx(0.7)
        assert bud.interp_u == bud.interp_v == 0.0


def test_lipschitz_rejects_critical():
    img = Image(np.zeros((4, 4)))
    intr = CameraIntrinsics(1.0, 0.0, 0.0)
    s = PerturbationScenario(K.YAW, (0.0, 1.5))
    with pytest.raises(DomainContainsCritical):
        lipschitz_constant(PixelCurveContext(img, intr, s, 0, 3), LinearSegment(0, 0, 0, 1.5))


def test_lipschitz_transy_single_cell():
    # a horizontal ramp makes G linear in kappa for dy
    px = np.tile(np.linspace(0, 1, 28), (28, 1))
    intr = CameraIntrinsics.for_image(28, 28)
    s = PerturbationScenario(K.TRANS_Y, (0.0, 1.0), 10.0)
    ctx = PixelCurveContext(Image(px, "replicate"), intr, s, 20, 14)
    ks = np.linspace(0, 1, 100_001)
    g = curve(ctx, ks)
    slope = (g[-1] - g[0])
    seg = LinearSegment(slope, g[0], 0, 1)
    J = seg(ks) - g
    assert np.ptp(J) < 1e-12
    L = lipschitz_constant(ctx, seg).L
    assert np.max(np.abs(np.diff(J)) / np.diff(ks)) <= L + 1e-9


@pytest.mark.parametrize("s", stock_scenarios(), ids=lambda s: s.kind.value)
def test_lipschitz_dominates_grid_slope(s, intr28, rng):
    img = Image(rng.random((28, 28)))
    ks = np.linspace(*s.domain, 100_001)
    for _ in range(10):
        i, j = rng.integers(0, 28, 2)
        ctx = PixelCurveContext(img, intr28, s, int(i), int(j))
        w = rng.normal()
        seg = LinearSegment(w, 0.5, *s.domain)
        J = seg(ks) - curve(ctx, ks)
        sub = sorted(rng.uniform(*s.domain, 2))
        m = (ks >= sub[0]) & (ks <= sub[1])
        L_full = lipschitz_constant(ctx, seg).L
        L_sub = lipschitz_constant(ctx, seg, sub).L
        assert np.max(np.abs(np.diff(J)) / np.diff(ks)) <= L_full + 1e-9
        if m.sum() > 2:
            Js, kss = J[m], ks[m]
            assert np.max(np.abs(np.diff(Js)) / np.diff(kss)) <= L_sub + 1e-9


# ---------------------------------------------------------------- synthesis


def check_sound(ctx, b, n=10_000):
    ks = np.linspace(*ctx.scenario.domain, n)
    g = curve(ctx, ks)
    assert np.all(b.lb_star(ks) - 1e-9 <= g) and np.all(g <= b.ub_star(ks) + 1e-9)
    # the sound bound differs from the fitted one by exactly the shift
    assert np.array_equal(b.lb(ks) - b.shift_lower, b.lb_star(ks))


def test_bound_pixel_constant_image(intr28):
    img = Image(np.full((28, 28), 0.25), "replicate")
    for s in stock_scenarios():
        ctx = PixelCurveContext(img, intr28, s, 3, 3)
        b = bound_pixel(ctx, eps=0.01)
        check_sound(ctx, b)
        assert b.shift_lower == pytest.approx(0.01) and b.shift_upper == pytest.approx(0.01)
        assert b.lb(0.5 * sum(s.domain)) == pytest.approx(0.25)


def test_bound_pixel_transy_linear_curve():
    px = np.tile(np.linspace(0, 1, 28), (28, 1))
    intr = CameraIntrinsics.for_image(28, 28)
    s = PerturbationScenario(K.TRANS_Y, (0.0, 1.0), 10.0)
    ctx = PixelCurveContext(Image(px, "replicate"), intr, s, 20, 14)
    b = bound_pixel(ctx, q=1)
    check_sound(ctx, b)
    assert b.shift_lower <= 0.01 + 1e-12 and b.shift_upper <= 0.01 + 1e-12


def test_bound_pixel_yaw_random_image(rng, intr28):
    img = Image(rng.random((28, 28)))
    s = PerturbationScenario(K.YAW, (0.0, 10 * DEG))
    for _ in range(25):
        i, j = rng.integers(0, 28, 2)
        ctx = PixelCurveContext(img, intr28, s, int(i), int(j))
        check_sound(ctx, bound_pixel(ctx))


@pytest.mark.parametrize("mode", ["black", "gray", "replicate", "reflect", "wrap"])
def test_bound_image_sound_all_paddings(mode, rng):
    img = Image(rng.random((10, 12)), mode)
    intr = CameraIntrinsics.for_image(10, 12)
    for s in stock_scenarios():
        bs = bound_image(img, intr, s, BoundConfig(q=2, n_s=17))
        for i in range(10):
            for j in range(12):
                check_sound(PixelCurveContext(img, intr, s, i, j), bs[i, j], 2000)


def test_bound_image_small_constant():
    img = Image(np.full((2, 2), 0.6))
    s = PerturbationScenario(K.YAW, (0, 2 * DEG))
    bs = bound_image(img, CameraIntrinsics.for_image(2, 2, f=10), s)
    assert len(bs) == 4


def test_kappa_zero_contains_original(rng, intr28):
    img = Image(rng.random((28, 28)))
    s = PerturbationScenario(K.PITCH, (-3 * DEG, 3 * DEG))
    bs = bound_image(img, intr28, s)
    for i in range(28):
        for j in range(28):
            b = bs[i, j]
            assert b.lb_star(0.0) <= img.pixels[i, j] <= b.ub_star(0.0)


def test_area_non_increasing_in_q(rng, intr28):
    img = Image(rng.random((28, 28)))
    s = PerturbationScenario(K.YAW, (0, 10 * DEG))
    areas = [bound_image(img, intr28, s, BoundConfig(q=q)).total_area for q in (1, 2, 4)]
    assert areas[0] >= areas[1] >= areas[2]


def test_budget_exhaustion_still_sound(rng, intr28):
    img = Image(rng.random((28, 28)))
    s = PerturbationScenario(K.YAW, (0, 10 * DEG))
    ctx = PixelCurveContext(img, intr28, s, 14, 3)
    b = bound_pixel(ctx, eps=1e-6, max_iters=8)
    assert b.warnings >= 1
    check_sound(ctx, b)


def test_bound_image_deterministic_across_threads(rng, intr28):
    img = Image(rng.random((28, 28)))
    s = PerturbationScenario(K.ROLL, (0, 4 * DEG))
    a = bound_image(img, intr28, s, BoundConfig(threads=1, chunk=100))
    b = bound_image(img, intr28, s, BoundConfig(threads=4, chunk=37))
    assert serialize.dumps(a) == serialize.dumps(b)


# ---------------------------------------------------------------- serialization


def test_serialize_round_trip(rng, intr28, tmp_path):
    img = Image(rng.random((28, 28)))
    s = PerturbationScenario(K.TRANS_Z, (0.0, 1.0), 10.0)
    bs = bound_image(img, intr28, s, BoundConfig(q=3, n_s=9))
    path = tmp_path / "b.jsonl"
    serialize.save(bs, path)
    back = serialize.load(path)
    assert back.shape == bs.shape and back.scenario == bs.scenario and back.intr == bs.intr
    for x, y in zip(bs.bounds, back.bounds):
        assert x.lower == y.lower and x.upper == y.upper
        assert (x.shift_lower, x.shift_upper, x.iterations) == (y.shift_lower, y.shift_upper, y.iterations)
    assert serialize.dumps(back) == path.read_text()


def test_serialize_rejects_garbage():
    with pytest.raises(SchemaError):
        serialize.loads("")
    with pytest.raises(SchemaError):
        serialize.loads('{"format": "other"}')
    head = ('{"format": "homobound-bounds", "version": 1, "shape": [1, 2], '
            '"scenario": {"kind": "yaw", "domain": [0, 0.1], "camera_height": null}, '
            '"intrinsics": {"f": 2, "xc": 0.5, "yc": 0}, "config": {}}')
    with pytest.raises(SchemaError):
        serialize.loads(head + "\n")
