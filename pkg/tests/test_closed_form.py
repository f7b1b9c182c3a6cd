"""Exact kernels: frozen oracle values, independent quadrature cross-checks,
symmetry, boundary vanishing rates, and extrapolated boundary Laplacians.

Every frozen constant below was derived independently of the library code:
either by hand from the antiderivative of the profile integral, by solving
the radial clamped problem, or (in this file, at test time) by mpmath
numerical quadrature of the defining integral.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest

from plategreen.closed_form import (
    ClosedFormEvaluator,
    Constants,
    DifferenceResult,
    ball_green,
    ball_radial_oracle,
    bilaplacian_xy,
    boggio_profile,
    closed_form_evaluator,
    fundamental_radial,
    gamma0,
    halfspace_green,
    laplacian_y,
)
from plategreen.errors import OutsideDomain, PoleError
from plategreen.geometry import DomainSpec, sample_pairs

BALL2 = DomainSpec.unit_ball(2)
BALL3 = DomainSpec.unit_ball(3)
BALL4 = DomainSpec.unit_ball(4)
BALL5 = DomainSpec.unit_ball(5)
HALF3 = DomainSpec.half_space(3)
HALF4 = DomainSpec.half_space(4)

# ---------------------------------------------------------------------------
# frozen oracle values (hand-derived; derivations in the comments)
# ---------------------------------------------------------------------------

# ball volumes: pi^(n/2) / Gamma(n/2 + 1)
E3 = 4.0 * math.pi / 3.0
E4 = math.pi**2 / 2.0
E5 = 8.0 * math.pi**2 / 15.0

# fundamental-solution coefficient 1/(2(n-4)(n-2)n e_n)
GAMMA5 = 1.0 / (16.0 * math.pi**2)  # = 15/(2*1*3*5*8 pi^2)
GAMMA3 = -1.0 / (8.0 * math.pi)  # negative: (3-4) = -1

# half-space kernel, n=3, x=(-1,0,0), y=(-2,0,0): separation 1, reflected
# distance 3, profile integral of (v^2-1)/v^2 over [1,3] = [v + 1/v] = 4/3,
# prefactor 1/(16 pi)
HALFSPACE_N3_XY = 1.0 / (12.0 * math.pi)

# ball kernel at the centre pole: radial solution (1-r)^2/(16 pi)
BALL_N3_CENTER_HALF = 1.0 / (64.0 * math.pi)
BALL_N3_DIAG_CENTER = 1.0 / (16.0 * math.pi)

# boundary Laplacian of the half-space kernel, n=3: the kernel pinched
# between x=(x1,xbar) and a wall point w reduces (exactly) to
#   Lap_y H(x, w) = 1/(2 pi |x - w|^3),
# obtained by expanding H(x, w - h e1) = h^2/(2 pi |x-w|^3) + O(h^3).
def halfspace_lap_y_exact(x, w):
    return 1.0 / (2.0 * math.pi * float(np.linalg.norm(np.asarray(x) - np.asarray(w))) ** 3)


# mixed boundary bilaplacian of the half-space kernel, n=3, |x-y|=1:
# with p = s+t, q = s-t the kernel at depth pair (s,t) is
# ((p^2-q^2)^2/4)/(16 pi) + higher order = s^2 t^2/(4 pi) + ..., so the
# normal-normal fourth derivative is 4/(4 pi) = 1/pi.
HALFSPACE_N3_BILAP = 1.0 / math.pi

# ball boundary Laplacian from the radial oracle (1-r)^2/(16 pi):
# second radial derivative at r=1 is 2/(16 pi)
BALL_N3_LAP_FROM_CENTER = 1.0 / (8.0 * math.pi)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


def test_ball_volumes_frozen():
    assert Constants(3).e_n == pytest.approx(E3, abs=1e-14)
    assert Constants(4).e_n == pytest.approx(E4, abs=1e-14)
    assert Constants(5).e_n == pytest.approx(E5, abs=1e-14)


def test_ball_volume_against_mpmath():
    for n in range(2, 9):
        exact = float(mp.pi ** (n / 2) / mp.gamma(n / 2 + 1))
        assert Constants(n).e_n == pytest.approx(exact, rel=1e-15)


def test_gamma_n_values_and_sign():
    assert Constants(5).gamma_n == pytest.approx(GAMMA5, rel=1e-15)
    assert Constants(3).gamma_n == pytest.approx(GAMMA3, rel=1e-15)
    assert Constants(3).gamma_n < 0.0
    for n in (2, 4):
        with pytest.raises(ValueError):
            Constants(n).gamma_n


def test_prefactor():
    assert Constants(3).prefactor == pytest.approx(1.0 / (16.0 * math.pi), rel=1e-15)
    assert Constants(4).prefactor == pytest.approx(1.0 / (8.0 * math.pi**2), rel=1e-15)


# ---------------------------------------------------------------------------
# fundamental solution
# ---------------------------------------------------------------------------


def test_gamma0_frozen_values():
    x3 = np.zeros(3)
    assert gamma0(3, x3, [1.0, 0.0, 0.0]) == pytest.approx(-1.0 / (8 * math.pi), abs=1e-15)
    x4 = np.zeros(4)
    assert gamma0(4, x4, [1.0, 0.0, 0.0, 0.0]) == 0.0
    x5 = np.zeros(5)
    assert gamma0(5, x5, [2.0, 0.0, 0.0, 0.0, 0.0]) == pytest.approx(
        1.0 / (32.0 * math.pi**2), rel=1e-14
    )


def test_gamma0_grid_matches_closed_forms():
    rs = np.array([0.1, 0.2, 0.5, 1.0, 2.0, 3.3, 5.0, 7.5, 10.0])
    for r in rs:
        assert abs(float(fundamental_radial(3, r)) - (-r / (8 * math.pi))) <= 1e-13
        assert abs(float(fundamental_radial(4, r)) - (-math.log(r) / (8 * math.pi**2))) <= 1e-13
        assert abs(float(fundamental_radial(5, r)) - GAMMA5 / r) <= 1e-13
        assert abs(float(fundamental_radial(6, r)) - Constants(6).gamma_n / r**2) <= 1e-13
        assert abs(float(fundamental_radial(2, r)) - r**2 * math.log(r) / (8 * math.pi)) <= 1e-13


def test_gamma0_pole_behaviour():
    z = np.zeros(4)
    with pytest.raises(PoleError):
        gamma0(4, z, z)
    z5 = np.zeros(5)
    with pytest.raises(PoleError):
        gamma0(5, z5, z5)
    # n = 3 extends continuously: value 0 at coincident points
    z3 = np.zeros(3)
    assert gamma0(3, z3, z3) == 0.0
    assert gamma0(2, np.zeros(2), np.zeros(2)) == 0.0


# ---------------------------------------------------------------------------
# the profile antiderivative against independent quadrature
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7])
@pytest.mark.parametrize("big_a", [1.0 + 1e-6, 1.5, 3.0, 10.0, 250.0])
def test_profile_matches_mpmath_quadrature(n, big_a):
    pref = Constants(n).prefactor
    with mp.workdps(40):
        exact = float(mp.quad(lambda v: (v**2 - 1) * v ** (1 - n), [1, big_a]))
    got = boggio_profile(n, 1.0, big_a) / pref
    assert got == pytest.approx(exact, rel=1e-11, abs=1e-18)


# ---------------------------------------------------------------------------
# half-space kernel
# ---------------------------------------------------------------------------


def test_halfspace_frozen_value():
    v = halfspace_green(3, [-1.0, 0.0, 0.0], [-2.0, 0.0, 0.0])
    assert v == pytest.approx(HALFSPACE_N3_XY, abs=1e-15)


def test_halfspace_wall_point_zero_and_rejections():
    assert halfspace_green(3, [-1.0, 0.0, 0.0], [0.0, 3.0, 0.0]) == 0.0
    assert halfspace_green(5, np.full(5, -0.5), np.array([0.0, 1, 2, 3, 4.0])) == 0.0
    with pytest.raises(OutsideDomain):
        halfspace_green(3, [0.5, 0.0, 0.0], [-1.0, 0.0, 0.0])
    with pytest.raises(PoleError):
        halfspace_green(4, np.full(4, -1.0), np.full(4, -1.0))


def test_halfspace_symmetry_and_positivity():
    pairs = sample_pairs(HALF3, 200, "uniform", seed=5)
    for x, y in pairs:
        a = halfspace_green(3, x, y)
        b = halfspace_green(3, y, x)
        assert abs(a - b) <= 1e-12
        assert a > 0.0
    pairs4 = sample_pairs(DomainSpec.half_space(4), 100, "uniform", seed=6)
    for x, y in pairs4:
        if np.array_equal(x, y):
            continue
        assert halfspace_green(4, x, y) > 0.0
        assert abs(halfspace_green(4, x, y) - halfspace_green(4, y, x)) <= 1e-12


def test_halfspace_against_mpmath_definition():
    # direct high-precision evaluation of the defining profile integral
    rng_pairs = sample_pairs(HALF3, 10, "uniform", seed=11)
    c = Constants(3)
    for x, y in rng_pairs:
        r = float(np.linalg.norm(x - y))
        star = x.copy()
        star[0] = -star[0]
        big_a = float(np.linalg.norm(star - y)) / r
        with mp.workdps(30):
            exact = c.prefactor * r * float(
                mp.quad(lambda v: (v**2 - 1) / v**2, [1, big_a])
            )
        assert halfspace_green(3, x, y) == pytest.approx(exact, rel=1e-10)


# ---------------------------------------------------------------------------
# ball kernel
# ---------------------------------------------------------------------------


def test_ball_frozen_values():
    z = np.zeros(3)
    assert ball_green(3, z, [0.5, 0.0, 0.0]) == pytest.approx(BALL_N3_CENTER_HALF, abs=1e-15)
    assert ball_green(3, z, z) == pytest.approx(BALL_N3_DIAG_CENTER, abs=1e-15)
    assert ball_radial_oracle(0.5) == pytest.approx(BALL_N3_CENTER_HALF, abs=1e-18)
    assert ball_radial_oracle(0.0) == pytest.approx(BALL_N3_DIAG_CENTER, abs=1e-18)


def test_ball_matches_radial_oracle_everywhere():
    z = np.zeros(3)
    for rho in np.linspace(0.02, 0.98, 25):
        y = np.array([0.3, -0.8, 0.52])
        y = rho * y / np.linalg.norm(y)
        assert ball_green(3, z, y) == pytest.approx(ball_radial_oracle(rho), rel=1e-13)


def test_ball_boundary_zero_and_rejections():
    assert ball_green(3, np.zeros(3), [1.0, 0.0, 0.0]) == 0.0
    with pytest.raises(OutsideDomain):
        ball_green(3, np.zeros(3), [1.5, 0.0, 0.0])
    with pytest.raises(PoleError):
        ball_green(4, np.full(4, 0.1), np.full(4, 0.1))
    with pytest.raises(PoleError):
        ball_green(5, np.zeros(5), np.zeros(5))


def test_ball_positivity_random_pairs():
    for n, dom in ((2, BALL2), (3, BALL3), (4, BALL4), (5, BALL5)):
        for strat in ("uniform", "boundary-biased", "near-diagonal"):
            for x, y in sample_pairs(dom, 334, strat, seed=17):
                if np.array_equal(x, y):
                    continue
                assert ball_green(n, x, y) > 0.0, (n, strat, x, y)


def test_ball_symmetry():
    for n, dom in ((2, BALL2), (3, BALL3), (4, BALL4)):
        for x, y in sample_pairs(dom, 150, "uniform", seed=23):
            assert abs(ball_green(n, x, y) - ball_green(n, y, x)) <= 1e-12


def test_ball_diagonal_extension_n2():
    x = np.array([0.3, -0.2])
    assert ball_green(2, x, x) == pytest.approx(
        (1.0 - float(x @ x)) ** 2 / (16.0 * math.pi), rel=1e-13
    )


def test_ball_n2_disk_radial_form():
    # center-pole disk kernel: (1 - r^2 + 2 r^2 log r)/(16 pi), derived from
    # the radial clamped solve in the plane
    z = np.zeros(2)
    for r in (0.1, 0.4, 0.75, 0.95):
        y = np.array([r, 0.0])
        exact = (1.0 - r**2 + 2.0 * r**2 * math.log(r)) / (16.0 * math.pi)
        assert ball_green(2, z, y) == pytest.approx(exact, rel=1e-12)


# ---------------------------------------------------------------------------
# boundary vanishing rates
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "n, dom, x, p",
    [
        (3, HALF3, np.array([-1.0, 0.2, 0.0]), np.array([0.0, -0.3, 0.4])),
        (3, BALL3, np.array([0.2, 0.1, -0.3]), np.array([0.0, 0.6, 0.8])),
        (4, BALL4, np.array([0.2, 0.1, -0.3, 0.0]), np.array([0.0, 0.6, 0.8, 0.0])),
    ],
)
def test_boundary_vanishing_rates(n, dom, x, p):
    from plategreen.geometry import boundary_normal

    ev = closed_form_evaluator(dom)
    nu = boundary_normal(dom, p)
    for h in (1e-2, 1e-3):
        val = ev.evaluate(x, p - h * nu)
        grad = (ev.evaluate(x, p - h * nu) - ev.evaluate(x, p - 2 * h * nu)) / h
        assert abs(val) <= 5.0 * h**2  # quadratic vanishing
        assert abs(grad) <= 5.0 * h  # linear vanishing of the slope
    # the rate really is quadratic: shrinking h by 10 shrinks H by ~100
    v1 = ev.evaluate(x, p - 1e-2 * nu)
    v2 = ev.evaluate(x, p - 1e-3 * nu)
    assert v1 / v2 == pytest.approx(100.0, rel=0.1)


def test_tangential_derivative_of_kernel_is_zero_on_wall():
    # the kernel vanishes identically along the boundary
    x = np.array([-1.0, 0.0, 0.0])
    for t in np.linspace(-2, 2, 9):
        assert halfspace_green(3, x, np.array([0.0, t, 0.3])) == 0.0


def test_near_pole_positivity():
    for n, dom in ((3, BALL3), (4, BALL4), (5, BALL5), (3, HALF3), (4, HALF4)):
        ev = closed_form_evaluator(dom)
        from plategreen.geometry import distance_to_boundary

        for x, _ in sample_pairs(dom, 60, "uniform", seed=31):
            d = distance_to_boundary(dom, x)
            step = 0.009 * d
            y = x.copy()
            y[-1] += step
            assert ev.evaluate(x, y) > 0.0


# ---------------------------------------------------------------------------
# vectorized evaluation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("dom", [BALL2, BALL3, BALL4, BALL5, HALF3, HALF4])
def test_evaluate_many_matches_scalar(dom):
    ev = closed_form_evaluator(dom)
    pairs = sample_pairs(dom, 80, "uniform", seed=3)
    xs = np.array([p[0] for p in pairs])
    ys = np.array([p[1] for p in pairs])
    batch = ev.evaluate_many(xs, ys)
    for i, (x, y) in enumerate(pairs):
        assert batch[i] == pytest.approx(ev.evaluate(x, y), rel=1e-13, abs=1e-16)


def test_evaluate_many_chunks_bit_identical():
    ev = closed_form_evaluator(BALL3)
    pairs = sample_pairs(BALL3, 64, "near-diagonal", seed=9)
    xs = np.array([p[0] for p in pairs])
    ys = np.array([p[1] for p in pairs])
    whole = ev.evaluate_many(xs, ys)
    parts = np.concatenate(
        [ev.evaluate_many(xs[i : i + 7], ys[i : i + 7]) for i in range(0, 64, 7)]
    )
    assert (whole == parts).all()


# ---------------------------------------------------------------------------
# extrapolated boundary Laplacians
# ---------------------------------------------------------------------------


def test_laplacian_y_halfspace_exact():
    ev = closed_form_evaluator(HALF3)
    x = np.array([-1.0, 0.0, 0.0])
    w = np.zeros(3)
    res = laplacian_y(ev, x, w)
    assert isinstance(res, DifferenceResult)
    exact = halfspace_lap_y_exact(x, w)  # = 1/(2 pi)
    assert exact == pytest.approx(1.0 / (2.0 * math.pi), rel=1e-15)
    assert res.value == pytest.approx(exact, rel=1e-6)
    assert not res.low_confidence
    assert float(res) == res.value


def test_laplacian_y_second_ladder_agrees():
    ev = closed_form_evaluator(HALF3)
    x = np.array([-1.0, 0.3, -0.2])
    w = np.array([0.0, -0.4, 0.1])
    a = laplacian_y(ev, x, w)
    b = laplacian_y(ev, x, w, steps=(7e-3, 3.5e-3, 1.75e-3))
    assert a.value == pytest.approx(b.value, rel=1e-6)
    assert a.value == pytest.approx(halfspace_lap_y_exact(x, w), rel=1e-6)


def test_laplacian_y_decays_monotonically_along_wall():
    ev = closed_form_evaluator(HALF3)
    x = np.array([-1.0, 0.0, 0.0])
    vals = [
        laplacian_y(ev, x, np.array([0.0, t, 0.0])).value for t in (0.0, 1.0, 2.0, 4.0, 8.0)
    ]
    assert all(v > 0 for v in vals)
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_laplacian_y_ball_center():
    ev = closed_form_evaluator(BALL3)
    res = laplacian_y(ev, np.zeros(3), np.array([0.0, 0.0, 1.0]))
    assert res.value == pytest.approx(BALL_N3_LAP_FROM_CENTER, rel=1e-6)
    assert not res.low_confidence


def test_laplacian_y_requires_boundary_point():
    ev = closed_form_evaluator(BALL3)
    with pytest.raises(OutsideDomain):
        laplacian_y(ev, np.zeros(3), np.array([0.0, 0.0, 0.5]))


def test_bilaplacian_frozen_value_and_scaling():
    ev = closed_form_evaluator(HALF3)
    x = np.zeros(3)
    y = np.array([0.0, 1.0, 0.0])
    res = bilaplacian_xy(ev, x, y)
    assert res.value == pytest.approx(HALFSPACE_N3_BILAP, rel=1e-5)
    assert res.value > 0
    # doubling the boundary separation rescales by 2^-n = 1/8
    res2 = bilaplacian_xy(ev, x, np.array([0.0, 2.0, 0.0]))
    assert res2.value / res.value == pytest.approx(0.125, abs=1e-4)


def test_bilaplacian_ball_antipodal_positive():
    ev = closed_form_evaluator(BALL3)
    res = bilaplacian_xy(ev, np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0]))
    assert res.value > 0
    assert not res.low_confidence


def test_bilaplacian_rejects_close_points():
    ev = closed_form_evaluator(BALL3)
    p = np.array([0.0, 0.0, 1.0])
    q = np.array([0.0, math.sin(0.01), math.cos(0.01)])
    with pytest.raises(PoleError):
        bilaplacian_xy(ev, p, q)


def test_evaluator_factory_and_protocol():
    ev = closed_form_evaluator(BALL3)
    assert ev.method == "ClosedFormBall"
    assert ev.dimension == 3
    assert ev.accuracy <= 1e-12
    ev2 = closed_form_evaluator(HALF3)
    assert ev2.method == "ClosedFormHalfSpace"
    with pytest.raises(ValueError):
        closed_form_evaluator(DomainSpec.ellipsoid(2.0, 1.0))
