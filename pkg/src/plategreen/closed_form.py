"""Exact clamped-plate kernels on the half-space and the unit ball.

This module provides the whole-space fundamental solution of the squared
Laplacian, the classical half-space and unit-ball Green's functions of the
clamped plate (built from a one-dimensional profile integral evaluated by its
antiderivative — never by numeric quadrature), and Richardson-extrapolated
boundary Laplacians of any Green evaluator.

The two-argument kernels share one algebraic skeleton::

    H(x, y) = prefactor(n) * |x - y|^(4-n) * F(A),
    F(A)    = integral over v in [1, A] of (v^2 - 1) v^(1-n) dv,

where ``A = s / |x - y|`` and ``s`` is the "reflected" distance:
``s^2 = |x - y|^2 + 4 d(x) d(y)`` on the half-space and
``s^2 = |x - y|^2 + (1 - |x|^2)(1 - |y|^2)`` on the unit ball.  Both product
forms are evaluated as written (they avoid the catastrophic cancellation of
the raw expressions near the boundary, where ``s -> |x - y|``).

Dimension notes
---------------
* n = 3: the kernels extend continuously to the diagonal; the ball kernel is
  defined there (value ``(1 - |x|^2) / (16 pi)``).
* n = 4: logarithmic antiderivative; pole at coincident points.
* n >= 5: power antiderivative; pole at coincident points.
* n = 2: provided for the planar demonstrations but tagged outside the scope
  of the positivity theory this package audits, which requires n >= 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from plategreen.errors import OutsideDomain, PoleError
from plategreen.geometry import DomainSpec, as_point, boundary_normal

__all__ = [
    "Constants",
    "GreenEvaluator",
    "ClosedFormEvaluator",
    "DifferenceResult",
    "gamma0",
    "gamma0_gradient",
    "fundamental_radial",
    "halfspace_green",
    "ball_green",
    "ball_radial_oracle",
    "boggio_profile",
    "closed_form_evaluator",
    "laplacian_y",
    "bilaplacian_xy",
    "DEFAULT_STEPS",
]

#: Default step ladder for the boundary differencing (halved twice).
DEFAULT_STEPS: tuple[float, ...] = (1e-2, 5e-3, 2.5e-3)


@dataclass(frozen=True)
class Constants:
    """Dimension-dependent constants of the biharmonic kernels.

    ``e_n`` is the volume of the n-dimensional unit ball, ``gamma_n`` the
    coefficient of the whole-space fundamental solution for n outside
    {2, 4} (negative for n = 3), and ``prefactor`` the constant
    ``1 / (4 n e_n)`` multiplying the profile integral.
    """

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension must be >= 2")

    @property
    def e_n(self) -> float:
        return math.pi ** (self.n / 2.0) / math.gamma(self.n / 2.0 + 1.0)

    @property
    def gamma_n(self) -> float:
        if self.n in (2, 4):
            raise ValueError("gamma_n is defined only for n outside {2, 4}")
        n = self.n
        return 1.0 / (2.0 * (n - 4.0) * (n - 2.0) * n * self.e_n)

    @property
    def prefactor(self) -> float:
        return 1.0 / (4.0 * self.n * self.e_n)


# ---------------------------------------------------------------------------
# Whole-space fundamental solution
# ---------------------------------------------------------------------------


def fundamental_radial(n: int, r):
    """Radial profile of the fundamental solution at separation ``r``.

    Vectorized over ``r`` (array input gives array output).  ``r = 0`` is
    allowed only for n in {2, 3}, where the profile extends continuously.
    """
    r = np.asarray(r, dtype=float)
    if n == 3:
        out = -r / (8.0 * math.pi)
    elif n == 4:
        if np.any(r == 0.0):
            raise PoleError("fundamental solution has a pole at r = 0 for n = 4")
        out = -np.log(r) / (8.0 * math.pi**2)
    elif n >= 5:
        if np.any(r == 0.0):
            raise PoleError("fundamental solution has a pole at r = 0 for n >= 5")
        out = Constants(n).gamma_n * r ** (4.0 - n)
    elif n == 2:
        # Planar form, outside the n >= 3 positivity theory.
        out = np.where(r == 0.0, 0.0, r**2 * np.log(np.maximum(r, 1e-300))) / (
            8.0 * math.pi
        )
    else:
        raise ValueError("dimension must be >= 2")
    return out if out.ndim else float(out)


def gamma0(n: int, x, y) -> float:
    """Fundamental solution of the squared Laplacian on all of R^n."""
    x = as_point(x, None)
    y = as_point(y, x.size)
    if n != x.size:
        raise OutsideDomain(f"points have dimension {x.size}, expected {n}")
    r = float(np.linalg.norm(x - y))
    return float(fundamental_radial(n, r))


def gamma0_gradient(n: int, x, y) -> np.ndarray:
    """Gradient in the second argument of the fundamental solution."""
    x = as_point(x, None)
    y = as_point(y, x.size)
    if n != x.size:
        raise OutsideDomain(f"points have dimension {x.size}, expected {n}")
    diff = y - x
    r = float(np.linalg.norm(diff))
    if r == 0.0:
        raise PoleError("the fundamental-solution gradient has a pole at r = 0")
    if n == 2:
        return diff * (2.0 * math.log(r) + 1.0) / (8.0 * math.pi)
    if n == 3:
        return -diff / (8.0 * math.pi * r)
    if n == 4:
        return -diff / (8.0 * math.pi**2 * r**2)
    return Constants(n).gamma_n * (4.0 - n) * r ** (2.0 - n) * diff


# ---------------------------------------------------------------------------
# The shared profile integral
# ---------------------------------------------------------------------------


#: Switch to the series form of the profile when A - 1 falls below this.
_SERIES_CUT = 1e-2


def _profile_series(n: int, u):
    """F(1 + u) by the expansion around the lower limit (u small).

    Substituting ``v = 1 + w`` gives ``F = integral of w (2 + w) (1 + w)^(1-n)
    over [0, u]``; expanding the binomial termwise yields a series in ``u``
    starting at ``u^2`` that is immune to the cancellation of the closed
    antiderivative as A -> 1.  Vectorized over ``u``.
    """
    alpha = 1.0 - n
    total = 0.0 * u
    binom_prev2 = 0.0  # C(alpha, -1)
    binom_prev1 = 1.0  # C(alpha, 0)
    upow = u * u
    for j in range(1, 24):
        b = 2.0 * binom_prev1 + binom_prev2
        total = total + b * upow / (j + 1.0)
        binom_prev2, binom_prev1 = (
            binom_prev1,
            binom_prev1 * (alpha - j + 1.0) / j,
        )
        upow = upow * u
    return total


def _profile_antiderivative(n: int, big_a: float) -> float:
    """F(A) = integral over [1, A] of (v^2 - 1) v^(1-n) dv, closed form."""
    if big_a < 1.0:
        raise ValueError("profile upper limit must be >= 1")
    if big_a == 1.0:
        return 0.0
    if big_a - 1.0 < _SERIES_CUT:
        return float(_profile_series(n, big_a - 1.0))
    if n == 2:
        return (big_a**2 - 1.0) / 2.0 - math.log(big_a)
    if n == 4:
        return math.log(big_a) + (big_a**-2 - 1.0) / 2.0
    return (big_a ** (4.0 - n) - 1.0) / (4.0 - n) - (big_a ** (2.0 - n) - 1.0) / (
        2.0 - n
    )


def boggio_profile(n: int, r: float, s: float, cross: float | None = None) -> float:
    """Kernel value ``prefactor * r^(4-n) * F(s / r)`` at separation ``r``.

    ``s >= r`` is the reflected distance.  ``cross``, when provided, is the
    exact product ``s^2 - r^2`` (available in closed form on both domains);
    it lets the near-boundary regime ``A -> 1`` be evaluated without the
    cancellation of forming ``s - r``.  At ``r = 0`` the continuous extension
    is returned for n in {2, 3} and a pole is signalled otherwise.
    """
    if s < r:
        raise ValueError("reflected distance must satisfy s >= r")
    pref = Constants(n).prefactor
    if r == 0.0:
        if n == 3:
            return pref * s
        if n == 2:
            return pref * s**2 / 2.0
        raise PoleError("kernel has a pole at coincident points for n >= 4")
    if s == r:
        return 0.0
    scale = pref * r ** (4.0 - n)
    if cross is not None:
        u = cross / (r * (s + r))
        if u < _SERIES_CUT:
            return scale * float(_profile_series(n, u))
    return scale * _profile_antiderivative(n, s / r)


# ---------------------------------------------------------------------------
# Half-space kernel
# ---------------------------------------------------------------------------


def halfspace_green(n: int, x, y) -> float:
    """Clamped-plate kernel of the half-space {x_1 < 0}.

    Positive for distinct interior points, zero when either argument lies on
    the wall, symmetric in its arguments to machine precision.
    """
    if n < 2:
        raise ValueError("dimension must be >= 2")
    x = as_point(x, n)
    y = as_point(y, n)
    if x[0] > 0.0 or y[0] > 0.0:
        raise OutsideDomain("points must lie in the half-space {x_1 <= 0}")
    if x[0] == 0.0 or y[0] == 0.0:
        return 0.0
    r2 = float(np.sum((x - y) ** 2))
    r = math.sqrt(r2)
    if r == 0.0 and n >= 4:
        raise PoleError("coincident points")
    cross = 4.0 * x[0] * y[0]
    s = math.sqrt(r2 + cross)
    return boggio_profile(n, r, s, cross=cross)


# ---------------------------------------------------------------------------
# Unit-ball kernel
# ---------------------------------------------------------------------------


def ball_green(n: int, x, y) -> float:
    """Clamped-plate kernel of the open unit ball.

    The reflected distance is ``s = sqrt(|x-y|^2 + (1-|x|^2)(1-|y|^2))``,
    the stable product form of ``|x||y| . |x/|x|^2 - y|``.  Positive for
    distinct interior points, zero when either argument reaches the sphere.
    The n = 3 kernel extends continuously to the diagonal with value
    ``(1 - |x|^2) / (16 pi)`` (n = 2: ``(1 - |x|^2)^2 / (16 pi)``).
    """
    if n < 2:
        raise ValueError("dimension must be >= 2")
    x = as_point(x, n)
    y = as_point(y, n)
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx > 1.0 or ny > 1.0:
        raise OutsideDomain("points must lie in the closed unit ball")
    if nx == 1.0 or ny == 1.0:
        return 0.0
    r2 = float(np.sum((x - y) ** 2))
    r = math.sqrt(r2)
    if r == 0.0 and n >= 4:
        raise PoleError("coincident points")
    # (1-|x|^2)(1-|y|^2) without cancellation near the sphere
    bx = (1.0 - nx) * (1.0 + nx)
    by = (1.0 - ny) * (1.0 + ny)
    cross = bx * by
    s = math.sqrt(r2 + cross)
    return boggio_profile(n, r, s, cross=cross)


def ball_radial_oracle(rho: float) -> float:
    """Independent n = 3 oracle: kernel of the unit ball at pole 0, radius rho.

    Solves the radial problem directly: for a unit point load at the centre
    the kernel is ``c0 + c1 rho + c2 rho^2 - rho/(8 pi)`` (biharmonic radial
    solutions 1, rho, rho^2 plus the fundamental part); the clamped
    conditions at rho = 1 and boundedness fix ``(1 - rho)^2 / (16 pi)``.
    """
    if not 0.0 <= rho <= 1.0:
        raise OutsideDomain("radius must lie in [0, 1]")
    return (1.0 - rho) ** 2 / (16.0 * math.pi)


# ---------------------------------------------------------------------------
# Evaluator objects
# ---------------------------------------------------------------------------


@runtime_checkable
class GreenEvaluator(Protocol):
    """Anything that can evaluate a Green's function on a fixed domain."""

    domain: DomainSpec
    dimension: int
    method: str
    accuracy: float

    def evaluate(self, x, y) -> float: ...


@dataclass(frozen=True)
class ClosedFormEvaluator:
    """Exact kernel evaluator on the half-space or the unit ball."""

    domain: DomainSpec
    dimension: int
    method: str
    accuracy: float = 1e-12

    def evaluate(self, x, y) -> float:
        if self.method == "ClosedFormHalfSpace":
            return halfspace_green(self.dimension, x, y)
        return ball_green(self.dimension, x, y)

    def evaluate_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized evaluation, one kernel value per row pair.

        Pure elementwise arithmetic plus per-row reductions, so the result
        for each row never depends on which other rows share the call:
        chunked and whole-batch evaluation agree bit for bit.
        """
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        n = self.dimension
        r2 = np.sum((xs - ys) ** 2, axis=1)
        if self.method == "ClosedFormHalfSpace":
            cross = 4.0 * xs[:, 0] * ys[:, 0]
        else:
            nx2 = np.sum(xs * xs, axis=1)
            ny2 = np.sum(ys * ys, axis=1)
            cross = (1.0 - nx2) * (1.0 - ny2)
        s = np.sqrt(r2 + cross)
        r = np.sqrt(r2)
        pref = Constants(n).prefactor
        with np.errstate(divide="ignore", invalid="ignore"):
            big_a = np.where(r > 0.0, s / np.where(r > 0.0, r, 1.0), np.inf)
            if n == 2:
                prof = (big_a**2 - 1.0) / 2.0 - np.log(big_a)
            elif n == 4:
                prof = np.log(big_a) + (big_a**-2.0 - 1.0) / 2.0
            else:
                prof = (big_a ** (4.0 - n) - 1.0) / (4.0 - n) - (
                    big_a ** (2.0 - n) - 1.0
                ) / (2.0 - n)
            # near-boundary rows: series in the stable u = cross/(r(s+r))
            u = cross / np.where(r > 0.0, r * (s + r), 1.0)
            small = (r > 0.0) & (u < _SERIES_CUT)
            if np.any(small):
                prof = np.where(small, _profile_series(n, np.where(small, u, 0.0)), prof)
            vals = pref * r ** (4.0 - n) * prof
        if n == 3:
            vals = np.where(r == 0.0, pref * s, vals)
        elif n == 2:
            vals = np.where(r == 0.0, pref * s**2 / 2.0, vals)
        elif np.any(r == 0.0):
            raise PoleError("coincident points in batch for n >= 4")
        return np.where(s == r, 0.0, vals)


def closed_form_evaluator(domain: DomainSpec) -> ClosedFormEvaluator:
    """Exact evaluator for a HalfSpace or UnitBall domain."""
    if domain.kind == "HalfSpace":
        return ClosedFormEvaluator(domain, domain.dim, "ClosedFormHalfSpace")
    if domain.kind == "UnitBall":
        return ClosedFormEvaluator(domain, domain.dim, "ClosedFormBall")
    raise ValueError("closed forms exist only on the half-space and unit ball")


# ---------------------------------------------------------------------------
# Boundary Laplacians by Richardson-extrapolated differences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DifferenceResult:
    """An extrapolated difference value with its own error diagnostic.

    ``spread`` is the absolute disagreement of the last two extrapolants;
    ``low_confidence`` is set when that disagreement exceeds 1e-5 relative
    to the value.
    """

    value: float
    spread: float
    low_confidence: bool

    def __float__(self) -> float:
        return self.value


def _richardson(raw: list[float], leading_order: int = 2) -> DifferenceResult:
    """Extrapolate a halving sequence D(h), D(h/2), ...

    The stencils below are second-order accurate with a full error expansion
    in integer powers of h, so stage ``j`` of the ratio-2 tableau eliminates
    the ``h^(leading_order + j - 1)`` term.  The value is the deepest
    extrapolant; the spread compares it with the second-deepest (the last
    two extrapolants of the ladder).
    """
    levels = len(raw)
    tableau = [list(raw)]
    for j in range(1, levels):
        fac = 2.0 ** (leading_order + j - 1)
        prev = tableau[-1]
        tableau.append(
            [
                (fac * prev[i + 1] - prev[i]) / (fac - 1.0)
                for i in range(levels - j)
            ]
        )
    value = tableau[-1][0]
    prev_best = tableau[-2][-1] if levels >= 2 else value
    spread = abs(value - prev_best)
    low = spread > 1e-5 * max(abs(value), 1e-14)
    return DifferenceResult(value=value, spread=spread, low_confidence=low)


def _check_ladder(steps: tuple[float, ...]) -> tuple[float, ...]:
    steps = tuple(float(h) for h in steps)
    if len(steps) < 2:
        raise ValueError("the step ladder needs at least two rungs")
    for a, b in zip(steps, steps[1:]):
        if not math.isclose(b, a / 2.0, rel_tol=1e-12):
            raise ValueError("the step ladder must halve at every rung")
    return steps


def laplacian_y(
    ev: GreenEvaluator,
    x,
    y,
    steps: tuple[float, ...] = DEFAULT_STEPS,
) -> DifferenceResult:
    """Laplacian in the second argument at a boundary point ``y``.

    Because the kernel and its normal derivative vanish along the boundary,
    every tangential contribution to the Laplacian drops out and the value
    reduces to the second normal derivative.  With the boundary value and
    slope both known to be zero, two inward samples give the second-order
    stencil ``D(h) = (8 f(h) - f(2h)) / (2 h^2)`` with ``f(h) = ev(x, y - h
    nu)``, which is then Richardson-extrapolated over the halving ladder
    ``steps``.
    """
    x = as_point(x, ev.dimension)
    y = as_point(y, ev.dimension)
    nu = boundary_normal(ev.domain, y)
    steps = _check_ladder(steps)
    raw = [
        (8.0 * ev.evaluate(x, y - h * nu) - ev.evaluate(x, y - 2.0 * h * nu))
        / (2.0 * h**2)
        for h in steps
    ]
    return _richardson(raw)


def bilaplacian_xy(
    ev: GreenEvaluator,
    x,
    y,
    steps: tuple[float, ...] = DEFAULT_STEPS,
) -> DifferenceResult:
    """Mixed Laplacian in both arguments at distinct boundary points.

    Reduces to the normal-normal fourth derivative for the same reason as
    :func:`laplacian_y`; measured by the tensor product of the one-variable
    second-order stencil (samples at depths h and 2h in each argument) and
    Richardson-extrapolated.
    """
    x = as_point(x, ev.dimension)
    y = as_point(y, ev.dimension)
    steps = _check_ladder(steps)
    if float(np.linalg.norm(x - y)) <= 5.0 * max(steps):
        raise PoleError(
            "boundary points must stay several steps apart for the mixed difference"
        )
    nu_x = boundary_normal(ev.domain, x)
    nu_y = boundary_normal(ev.domain, y)

    def f(hx: float, hy: float) -> float:
        return ev.evaluate(x - hx * nu_x, y - hy * nu_y)

    raw = [
        (
            16.0 * f(h, h)
            - 2.0 * f(h, 2.0 * h)
            - 2.0 * f(2.0 * h, h)
            + 0.25 * f(2.0 * h, 2.0 * h)
        )
        / h**4
        for h in steps
    ]
    return _richardson(raw)


# Convenience alias used by callers that only need a function of one point.
KernelFunction = Callable[[np.ndarray, np.ndarray], float]
