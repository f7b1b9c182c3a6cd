"""Cubature engine tests against independently derived integrals.

Every expected number below is either elementary (volumes, moments) or was
computed with mpmath from a closed-form reduction noted next to it.
"""

import math

import numpy as np
import pytest

from plategreen.closed_form import Constants, ball_green
from plategreen.errors import QuadratureError
from plategreen.geometry import DomainSpec, PerturbationMap, boundary_normal
from plategreen.quadrature import (
    QuadratureResult,
    ball_axisymmetric_integral,
    boundary_quadrature,
    cubature_rule,
    singular_convolution,
    sphere_area,
    sphere_rule,
    unit_ball_chord,
    volume_integral,
)

B2 = DomainSpec.unit_ball(2)
B3 = DomainSpec.unit_ball(3)
B4 = DomainSpec.unit_ball(4)
E3 = DomainSpec.ellipsoid(1.3, 0.8, 1.1)

# mpmath: 4*2*ellipe(1 - 1/4)
ELLIPSE_2_1_PERIMETER = 9.688448220547676198428503
# mpmath: arc length of the polar curve r = 1 + 0.15 cos(tau)
LIMACON_015_LENGTH = 6.318578207562576017429356
# mpmath: 2*pi*int rho^2 * (2/(A*B)) * [log(rho+0.4) - log|rho-0.4|] drho,
# A = rho^2 + 0.16, B = 0.8*rho: the double-pole integral
# int_B |z-x|^-2 |z-y|^-2 dz at x = (0,0,0.4), y = (0,0,-0.4).
DOUBLE_POLE_04 = 26.58715388941522570853181
# Newton potential of the unit ball at an interior point: 2*pi*(1 - |y|^2/3)
NEWTON_AT = lambda p: 2.0 * math.pi * (1.0 - float(p @ p) / 3.0)  # noqa: E731
# int_{B3} exp(z_3) dz = 4*pi*(k cosh k - sinh k)/k^3 at k = 1 -> 4*pi/e
EXP_BALL = 4.622909399163686871640373


def dfact(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def sphere_monomial(exps: tuple[int, int, int]) -> float:
    """int_{S^2} prod y_i^{e_i} dS for even exponents (else zero)."""
    if any(e % 2 for e in exps):
        return 0.0
    num = 1.0
    for e in exps:
        num *= dfact(e - 1)
    return 4.0 * math.pi * num / dfact(sum(exps) + 1)


class TestSphereRules:
    def test_level0_is_50_points_degree_11(self):
        dirs, w = sphere_rule(3, 0)
        assert dirs.shape == (50, 3)
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, rtol=0, atol=1e-15)
        assert abs(float(np.sum(w)) - 4.0 * math.pi) < 1e-13
        # exact for all monomials of total degree <= 11
        for ex in range(0, 12, 2):
            for ey in range(0, 12 - ex, 2):
                for ez in range(0, 12 - ex - ey, 2):
                    got = float(np.sum(w * dirs[:, 0] ** ex * dirs[:, 1] ** ey * dirs[:, 2] ** ez))
                    exact = sphere_monomial((ex, ey, ez))
                    assert got == pytest.approx(exact, rel=1e-13, abs=1e-13)
        # odd monomials vanish identically by symmetry of the point set
        for ex, ey, ez in [(1, 0, 0), (3, 2, 0), (1, 1, 1), (5, 4, 2)]:
            got = float(np.sum(w * dirs[:, 0] ** ex * dirs[:, 1] ** ey * dirs[:, 2] ** ez))
            assert abs(got) < 1e-13

    def test_level0_not_degree_12(self):
        dirs, w = sphere_rule(3, 0)
        got = float(np.sum(w * dirs[:, 0] ** 12))
        assert abs(got - sphere_monomial((12, 0, 0))) > 1e-6

    def test_product_level_handles_higher_degree(self):
        dirs, w = sphere_rule(3, 1)
        for exps in [(12, 0, 0), (8, 4, 2), (6, 6, 2)]:
            got = float(
                np.sum(w * dirs[:, 0] ** exps[0] * dirs[:, 1] ** exps[1] * dirs[:, 2] ** exps[2])
            )
            assert got == pytest.approx(sphere_monomial(exps), rel=1e-12)

    def test_circle_rule(self):
        dirs, w = sphere_rule(2, 0)
        assert abs(float(np.sum(w)) - 2.0 * math.pi) < 1e-13
        assert float(np.sum(w * dirs[:, 0] ** 2)) == pytest.approx(math.pi, rel=1e-13)
        assert float(np.sum(w * dirs[:, 0] ** 2 * dirs[:, 1] ** 2)) == pytest.approx(
            math.pi / 4.0, rel=1e-12
        )

    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_high_dimensional_moments(self, n):
        dirs, w = sphere_rule(n, 0)
        area = sphere_area(n)
        assert float(np.sum(w)) == pytest.approx(area, rel=1e-12)
        for i in (0, n - 1):
            assert float(np.sum(w * dirs[:, i] ** 2)) == pytest.approx(area / n, rel=1e-11)
            assert float(np.sum(w * dirs[:, i] ** 4)) == pytest.approx(
                3.0 * area / (n * (n + 2)), rel=1e-11
            )
        assert float(np.sum(w * dirs[:, 0] ** 2 * dirs[:, n - 1] ** 2)) == pytest.approx(
            area / (n * (n + 2)), rel=1e-11
        )

    def test_chord_lands_on_sphere(self):
        rng = np.random.default_rng(7)
        for n in (2, 3, 5):
            c = rng.uniform(-0.4, 0.4, size=n)
            omega = rng.normal(size=(13, n))
            omega /= np.linalg.norm(omega, axis=1)[:, None]
            r = unit_ball_chord(c, omega)
            assert np.all(r > 0)
            ends = c[None, :] + r[:, None] * omega
            assert np.allclose(np.linalg.norm(ends, axis=1), 1.0, rtol=0, atol=1e-14)


class TestVolumeIntegral:
    def test_ball_volume(self):
        res = volume_integral(B3, lambda z: np.ones(len(z)))
        assert isinstance(res, QuadratureResult)
        assert res.converged
        assert float(res) == pytest.approx(4.0 * math.pi / 3.0, abs=1e-12)
        assert res.error < 1e-12

    def test_inverse_distance_singular_center(self):
        res = volume_integral(
            B3, lambda z: 1.0 / np.linalg.norm(z, axis=1), singular_at=[np.zeros(3)]
        )
        assert res.converged
        assert res.value == pytest.approx(2.0 * math.pi, abs=1e-12)

    def test_clamped_kernel_from_center(self):
        f = lambda z: np.array([ball_green(3, np.zeros(3), zi) for zi in z])  # noqa: E731
        res = volume_integral(B3, f, singular_at=[np.zeros(3)])
        assert res.converged
        assert res.value == pytest.approx(1.0 / 120.0, abs=1e-14)

    @pytest.mark.parametrize("n,budget", [(5, 600_000), (6, 4_000_000)])
    def test_radial_power_high_dimensions(self, n, budget):
        d = DomainSpec.unit_ball(n)
        res = volume_integral(
            d,
            lambda z: np.linalg.norm(z, axis=1) ** (4 - n),
            singular_at=[np.zeros(n)],
            budget=budget,
        )
        exact = n * Constants(n).e_n / 4.0
        assert res.converged
        assert res.value == pytest.approx(exact, rel=1e-12)

    def test_logarithmic_kernel_dimension_four(self):
        # int_{B4} log(1/|y|) dy = |S^3| / 16 = pi^2 / 8
        res = volume_integral(
            B4,
            lambda z: -np.log(np.linalg.norm(z, axis=1)),
            singular_at=[np.zeros(4)],
        )
        assert res.converged
        assert res.value == pytest.approx(math.pi**2 / 8.0, rel=1e-9)

    def test_logarithmic_kernel_disk(self):
        res = volume_integral(
            B2,
            lambda z: -np.log(np.linalg.norm(z, axis=1)),
            singular_at=[np.zeros(2)],
        )
        assert res.converged
        assert res.value == pytest.approx(math.pi / 2.0, rel=1e-9)

    def test_anisotropic_smooth_integrand(self):
        res = volume_integral(B3, lambda z: np.exp(z[:, 2]))
        assert res.converged
        assert res.value == pytest.approx(EXP_BALL, rel=1e-12)

    def test_ellipsoid_volume_and_moment(self):
        res = volume_integral(E3, lambda z: np.ones(len(z)))
        assert res.value == pytest.approx(1.3 * 0.8 * 1.1 * 4.0 * math.pi / 3.0, rel=1e-13)
        res = volume_integral(E3, lambda z: z[:, 0] ** 2)
        # int x1^2 = a1^3 a2 a3 * (4 pi / 15)
        assert res.value == pytest.approx(1.3**3 * 0.8 * 1.1 * 4.0 * math.pi / 15.0, rel=1e-12)

    def test_mapped_ball_volumes(self):
        # det of the poly_bump Jacobian is (1+e u1)^(n-1) (1+2 e u1); odd
        # powers of u1 integrate to zero, leaving (4pi/3)(1+e^2) in 3D and
        # pi(1+e^2/2) in 2D.
        eps = 0.15
        m = PerturbationMap(kind="poly_bump", epsilon=eps, axis=0)
        res = volume_integral(DomainSpec.mapped_ball(m, 3), lambda z: np.ones(len(z)))
        assert res.value == pytest.approx(4.0 * math.pi / 3.0 * (1 + eps**2), rel=1e-12)
        res = volume_integral(DomainSpec.mapped_ball(m, 2), lambda z: np.ones(len(z)))
        assert res.value == pytest.approx(math.pi * (1 + eps**2 / 2.0), rel=1e-12)

    def test_rectangle(self):
        # int_0^2 sin x dx * int_0^1.5 cos y dy = (1 - cos 2) sin 1.5
        d = DomainSpec.rectangle(2.0, 1.5)
        res = volume_integral(d, lambda z: np.sin(z[:, 0]) * np.cos(z[:, 1]))
        assert res.converged
        assert res.value == pytest.approx((1 - math.cos(2.0)) * math.sin(1.5), rel=1e-13)

    def test_scalar_only_callable_accepted(self):
        res = volume_integral(B3, lambda p: 1.0)
        assert res.value == pytest.approx(4.0 * math.pi / 3.0, abs=1e-12)

    def test_deterministic(self):
        f = lambda z: np.cos(z[:, 0]) * np.exp(z[:, 1])  # noqa: E731
        a = volume_integral(B3, f)
        b = volume_integral(B3, f)
        assert a.value == b.value
        assert a.error == b.error

    @pytest.mark.parametrize(
        "name,f,sing",
        [
            ("volume", lambda z: np.ones(len(z)), None),
            ("inv-dist", lambda z: 1.0 / np.linalg.norm(z, axis=1), [np.zeros(3)]),
            (
                "kernel",
                lambda z: np.array([ball_green(3, np.zeros(3), zi) for zi in z]),
                [np.zeros(3)],
            ),
        ],
    )
    def test_error_estimate_monotone_under_budget_doubling(self, name, f, sing):
        prev = math.inf
        for k in range(9):
            res = volume_integral(B3, f, singular_at=sing, budget=1000 * 2**k)
            assert res.error < prev, f"{name}: estimate grew at budget {1000 * 2 ** k}"
            prev = res.error

    def test_halfspace_rejected(self):
        with pytest.raises(QuadratureError):
            volume_integral(DomainSpec.half_space(3), lambda z: np.ones(len(z)))

    def test_three_centers_rejected(self):
        pts = [np.zeros(3), np.array([0.1, 0, 0]), np.array([0.2, 0, 0])]
        with pytest.raises(QuadratureError):
            volume_integral(B3, lambda z: np.ones(len(z)), singular_at=pts)

    def test_rectangle_singular_rejected(self):
        d = DomainSpec.rectangle(1.0, 1.0)
        with pytest.raises(QuadratureError):
            volume_integral(d, lambda z: np.ones(len(z)), singular_at=[np.array([0.5, 0.5])])


class TestSingularConvolution:
    def test_double_pole_pair(self):
        x = np.array([0.0, 0.0, 0.4])
        y = np.array([0.0, 0.0, -0.4])
        ker = lambda p, Z: 1.0 / np.sum((Z - p) ** 2, axis=1)  # noqa: E731
        res = singular_convolution(
            B3, ker, lambda z: np.ones(len(z)), ker, x, y, budget=3_000_000
        )
        assert res.value == pytest.approx(-DOUBLE_POLE_04, abs=2e-3)
        # the reported estimate must dominate the actual error
        assert abs(res.value + DOUBLE_POLE_04) <= res.error

    def test_newton_potential_two_center_path(self):
        x = np.array([0.3, 0.1, -0.2])
        y = np.array([-0.4, 0.2, 0.1])
        one = lambda p, Z: np.ones(len(Z))  # noqa: E731
        newton = lambda p, Z: 1.0 / np.linalg.norm(Z - p, axis=1)  # noqa: E731
        res = singular_convolution(B3, one, lambda z: np.ones(len(z)), newton, x, y)
        assert res.value == pytest.approx(-NEWTON_AT(y), abs=5e-3)

    def test_single_center_path_is_spectral(self):
        x = np.array([0.3, 0.1, -0.2])
        one = lambda p, Z: np.ones(len(Z))  # noqa: E731
        newton = lambda p, Z: 1.0 / np.linalg.norm(Z - p, axis=1)  # noqa: E731
        res = singular_convolution(B3, newton, lambda z: np.ones(len(z)), one, x, x)
        assert res.converged
        assert res.value == pytest.approx(-NEWTON_AT(x), abs=1e-10)

    def test_vanishing_density_short_circuits(self):
        calls = {"n": 0}

        def ker(p, Z):
            calls["n"] += len(Z)
            return np.ones(len(Z))

        res = singular_convolution(
            B3, ker, lambda z: np.zeros(len(z)), ker,
            np.array([0.2, 0.0, 0.0]), np.array([-0.2, 0.0, 0.0]),
        )
        assert res.value == 0.0
        assert res.error == 0.0
        assert res.converged
        assert calls["n"] == 0

    def test_kernels_only_probed_where_density_lives(self):
        seen = {"n": 0}

        def ker(p, Z):
            seen["n"] += len(Z)
            return np.ones(len(Z))

        def half(z):
            return np.where(z[:, 2] > 0.0, 1.0, 0.0)

        count = {"total": 0, "nonzero": 0}

        def density(z):
            count["total"] += len(z)
            vals = half(z)
            count["nonzero"] += int(np.count_nonzero(vals))
            return vals

        singular_convolution(
            B3, ker, density, ker,
            np.array([0.0, 0.0, 0.3]), np.array([0.0, 0.0, 0.5]),
        )
        # each of the two kernels sees exactly the nodes with nonzero density
        assert 0 < count["nonzero"] < count["total"]
        assert seen["n"] == 2 * count["nonzero"]

    def test_boundary_center_rejected(self):
        ker = lambda p, Z: np.ones(len(Z))  # noqa: E731
        with pytest.raises(QuadratureError):
            singular_convolution(
                B3, ker, lambda z: np.ones(len(z)), ker,
                np.array([0.2, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]),
            )


class TestBoundaryQuadrature:
    def test_sphere_area_and_moment(self):
        res = boundary_quadrature(B3, lambda z: np.ones(len(z)))
        assert res.converged
        assert res.value == pytest.approx(4.0 * math.pi, abs=1e-12)
        res = boundary_quadrature(B3, lambda z: z[:, 0] ** 2)
        assert res.value == pytest.approx(4.0 * math.pi / 3.0, abs=1e-12)

    def test_ellipse_perimeter(self):
        d = DomainSpec.ellipsoid(2.0, 1.0)
        res = boundary_quadrature(d, lambda z: np.ones(len(z)))
        assert res.converged
        assert res.value == pytest.approx(ELLIPSE_2_1_PERIMETER, rel=1e-12)

    def test_mapped_disk_perimeter(self):
        m = PerturbationMap(kind="poly_bump", epsilon=0.15, axis=0)
        d = DomainSpec.mapped_ball(m, 2)
        res = boundary_quadrature(d, lambda z: np.ones(len(z)))
        assert res.value == pytest.approx(LIMACON_015_LENGTH, rel=1e-11)

    @pytest.mark.parametrize(
        "domain,volume",
        [
            (E3, 1.3 * 0.8 * 1.1 * 4.0 * math.pi / 3.0),
            (
                DomainSpec.mapped_ball(PerturbationMap(kind="poly_bump", epsilon=0.15, axis=0), 3),
                4.0 * math.pi / 3.0 * (1 + 0.15**2),
            ),
        ],
    )
    def test_divergence_identity(self, domain, volume):
        # int_boundary x . nu dS = n |Omega|
        def flux(z):
            return np.array([float(p @ boundary_normal(domain, p)) for p in z])

        res = boundary_quadrature(domain, flux, tol=1e-8)
        assert res.value == pytest.approx(3.0 * volume, rel=1e-8)

    def test_zero_function(self):
        res = boundary_quadrature(B3, lambda z: np.zeros(len(z)))
        assert res.value == 0.0
        assert res.converged

    def test_unsupported_domains(self):
        with pytest.raises(QuadratureError):
            boundary_quadrature(DomainSpec.rectangle(1.0, 1.0), lambda z: np.ones(len(z)))
        with pytest.raises(QuadratureError):
            boundary_quadrature(DomainSpec.half_space(3), lambda z: np.ones(len(z)))


class TestCubatureRule:
    @pytest.mark.parametrize(
        "domain,volume",
        [
            (B3, 4.0 * math.pi / 3.0),
            (E3, 1.3 * 0.8 * 1.1 * 4.0 * math.pi / 3.0),
            (
                DomainSpec.mapped_ball(PerturbationMap(kind="poly_bump", epsilon=0.15, axis=0), 3),
                4.0 * math.pi / 3.0 * (1 + 0.15**2),
            ),
        ],
    )
    def test_weights_sum_to_volume(self, domain, volume):
        rule = cubature_rule(domain, level=1)
        assert float(np.sum(rule.weights)) == pytest.approx(volume, rel=1e-9)
        assert rule.singular_center is None
        assert rule.order == 1

    def test_nodes_strictly_inside(self):
        rule = cubature_rule(E3, level=1, center=np.array([0.5, 0.1, -0.2]))
        axes = np.array([1.3, 0.8, 1.1])
        lev = np.sum((rule.nodes / axes) ** 2, axis=1)
        assert np.all(lev < 1.0)
        assert np.all(rule.weights > 0.0)
        np.testing.assert_allclose(rule.singular_center, [0.5, 0.1, -0.2])

    def test_centered_rule_absorbs_inverse_distance(self):
        c = np.array([0.3, 0.0, 0.0])
        rule = cubature_rule(B3, level=2, center=c)
        vals = 1.0 / np.linalg.norm(rule.nodes - c, axis=1)
        assert rule.apply(vals) == pytest.approx(NEWTON_AT(c), abs=1e-12)

    def test_center_outside_rejected(self):
        with pytest.raises(QuadratureError):
            cubature_rule(B3, level=1, center=np.array([1.5, 0.0, 0.0]))


class TestAxisymmetricReduction:
    def test_axis_second_moment(self):
        # int_{B3} (rho t)^2 dy = 4 pi / 15
        v = ball_axisymmetric_integral(3, lambda rho, t: rho**2 * t**2)
        assert v == pytest.approx(4.0 * math.pi / 15.0, rel=1e-13)

    def test_radial_power_dimension_five(self):
        v = ball_axisymmetric_integral(5, lambda rho, t: 1.0 / rho)
        assert v == pytest.approx(5.0 * Constants(5).e_n / 4.0, rel=1e-12)

    def test_exponential_matches_full_cubature(self):
        v = ball_axisymmetric_integral(3, lambda rho, t: np.exp(rho * t))
        assert v == pytest.approx(EXP_BALL, rel=1e-12)

    def test_radial_panels_sharpen_peaked_profiles(self):
        peak = lambda rho, t: 1.0 / np.sqrt((rho - 0.5) ** 2 + 1e-4)  # noqa: E731
        coarse = ball_axisymmetric_integral(3, peak, level=1)
        fine = ball_axisymmetric_integral(3, peak, radial_panels=(0.5,), level=3)
        finest = ball_axisymmetric_integral(
            3, peak, radial_panels=(0.45, 0.5, 0.55), level=5
        )
        assert abs(fine - finest) < abs(coarse - finest)
        assert abs(fine - finest) < 1e-7


def test_result_casts_to_float():
    res = volume_integral(B3, lambda z: np.ones(len(z)))
    assert float(res) == res.value
