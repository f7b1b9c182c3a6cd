"""Analytic domain descriptions, boundary geometry, and point sampling.

Domains are closed-form descriptions (half-space, unit ball, ellipsoid,
smoothly mapped ball, 2-D rectangle), never meshes: distances and normals are
computed from the defining equations, so the audit layers can trust them to
tight tolerances.  Meshes appear only inside the numerical solver module.

Conventions
-----------
* The half-space is ``{x : x_1 < 0}``; its boundary is the hyperplane
  ``x_1 = 0`` with outward normal ``+e_1``.
* The unit ball is centred at the origin with radius 1.
* An ellipsoid is axis-aligned with strictly positive semiaxes.
* A mapped ball is the image of the closed unit ball under a polynomial
  perturbation map that is the identity at ``epsilon = 0``.
* The rectangle is ``(0, a) x (0, b)`` in 2-D only; it has corners, so it is
  provided solely for the finite-difference oracle and every audit run on it
  is flagged as outside the smooth-domain scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from plategreen.errors import DimensionMismatch, OutsideDomain
from plategreen.rng import Stream

__all__ = [
    "Point",
    "PerturbationMap",
    "DomainSpec",
    "as_point",
    "inside",
    "distance_to_boundary",
    "boundary_normal",
    "nearest_boundary_point",
    "sample_pairs",
    "sample_points",
    "map_point",
    "map_jacobian",
    "map_inverse",
    "boundary_mesh",
    "fibonacci_sphere",
    "diameter",
]

#: A point is a finite 1-D float vector; helpers accept any array-like.
Point = np.ndarray

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def as_point(coords, dim: int | None = None) -> Point:
    """Validate and normalize a coordinate vector."""
    x = np.asarray(coords, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"point must be a 1-D vector, got shape {x.shape}")
    if dim is not None and x.size != dim:
        raise DimensionMismatch(f"point has dimension {x.size}, expected {dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point coordinates must be finite")
    return x


# ---------------------------------------------------------------------------
# Perturbation maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationMap:
    """A global polynomial coordinate map, identity at ``epsilon = 0``.

    Two closed-form families are provided:

    ``axis_stretch``
        ``psi(x) = x + epsilon * x_axis * e_axis`` — stretches one coordinate
        by the factor ``1 + epsilon``.  Maps the unit ball onto an
        axis-aligned ellipsoid.
    ``poly_bump``
        ``psi(x) = x * (1 + epsilon * x_axis)`` — a polynomial bump whose
        Jacobian determinant ``(1 + eps*x_a)^(n-1) (1 + 2 eps*x_a)`` stays
        positive on the closed unit ball for ``epsilon < 0.5``.

    Both have closed-form Jacobians and are invertible on a neighbourhood of
    the closed unit ball for the epsilons accepted here.
    """

    kind: str
    epsilon: float
    axis: int = 0
    description: str = ""

    def __post_init__(self):
        if self.kind not in ("axis_stretch", "poly_bump"):
            raise ValueError(f"unknown perturbation map kind {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.kind == "poly_bump" and self.epsilon >= 0.5:
            raise ValueError("poly_bump requires epsilon < 0.5 for invertibility")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "epsilon": self.epsilon,
            "axis": self.axis,
            "description": self.description,
        }

    @staticmethod
    def from_json(doc: dict) -> "PerturbationMap":
        return PerturbationMap(
            kind=doc["kind"],
            epsilon=float(doc["epsilon"]),
            axis=int(doc.get("axis", 0)),
            description=doc.get("description", ""),
        )


def map_point(m: PerturbationMap, x: Point) -> Point:
    """Forward image ``psi(x)``."""
    x = np.asarray(x, dtype=float)
    if m.epsilon == 0.0:
        return x.copy()
    y = x.copy()
    if m.kind == "axis_stretch":
        y[..., m.axis] = (1.0 + m.epsilon) * x[..., m.axis]
        return y
    # poly_bump
    scale = 1.0 + m.epsilon * x[..., m.axis]
    return x * (scale[..., None] if x.ndim > 1 else scale)


def map_jacobian(m: PerturbationMap, x: Point) -> np.ndarray:
    """Jacobian matrix of the forward map at ``x``."""
    x = as_point(x)
    n = x.size
    if m.kind == "axis_stretch":
        jac = np.eye(n)
        jac[m.axis, m.axis] = 1.0 + m.epsilon
        return jac
    # poly_bump: psi = x (1 + eps x_a)  =>  J = (1+eps x_a) I + eps x e_a^T
    jac = (1.0 + m.epsilon * x[m.axis]) * np.eye(n)
    jac[:, m.axis] += m.epsilon * x
    return jac


def map_inverse(m: PerturbationMap, y: Point, tol: float = 1e-13) -> Point:
    """Preimage ``psi^{-1}(y)`` by Newton iteration (closed form for stretch)."""
    y = as_point(y)
    if m.epsilon == 0.0:
        return y.copy()
    if m.kind == "axis_stretch":
        x = y.copy()
        x[m.axis] = y[m.axis] / (1.0 + m.epsilon)
        return x
    x = y.copy()
    for _ in range(60):
        r = map_point(m, x) - y
        if np.max(np.abs(r)) < tol:
            return x
        x = x - np.linalg.solve(map_jacobian(m, x), r)
    return x


# ---------------------------------------------------------------------------
# Domain specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    """An analytic domain description.

    ``kind`` is one of ``HalfSpace``, ``UnitBall``, ``Ellipsoid``,
    ``MappedBall``, ``Rectangle``.  Construct through the classmethods,
    which validate the kind-specific fields.
    """

    kind: str
    dim: int
    semiaxes: tuple[float, ...] | None = None
    map: PerturbationMap | None = None
    sides: tuple[float, float] | None = None

    # -- constructors -------------------------------------------------------

    @staticmethod
    def half_space(dim: int) -> "DomainSpec":
        if dim < 2:
            raise ValueError("dimension must be >= 2")
        return DomainSpec(kind="HalfSpace", dim=dim)

    @staticmethod
    def unit_ball(dim: int) -> "DomainSpec":
        if dim < 2:
            raise ValueError("dimension must be >= 2")
        return DomainSpec(kind="UnitBall", dim=dim)

    @staticmethod
    def ellipsoid(*semiaxes: float) -> "DomainSpec":
        axes = tuple(float(a) for a in semiaxes)
        if len(axes) < 2:
            raise ValueError("an ellipsoid needs at least 2 semiaxes")
        if any(a <= 0 for a in axes):
            raise ValueError("semiaxes must be positive")
        return DomainSpec(kind="Ellipsoid", dim=len(axes), semiaxes=axes)

    @staticmethod
    def mapped_ball(m: PerturbationMap, dim: int) -> "DomainSpec":
        return DomainSpec(kind="MappedBall", dim=dim, map=m)

    @staticmethod
    def rectangle(a: float, b: float) -> "DomainSpec":
        if a <= 0 or b <= 0:
            raise ValueError("rectangle sides must be positive")
        return DomainSpec(kind="Rectangle", dim=2, sides=(float(a), float(b)))

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind, "dim": self.dim}
        if self.semiaxes is not None:
            doc["semiaxes"] = list(self.semiaxes)
        if self.map is not None:
            doc["map"] = self.map.to_json()
            doc["epsilon"] = self.map.epsilon
        if self.sides is not None:
            doc["sides"] = list(self.sides)
        return doc

    @staticmethod
    def from_json(doc: dict) -> "DomainSpec":
        kind = doc["kind"]
        dim = int(doc["dim"])
        if kind == "HalfSpace":
            return DomainSpec.half_space(dim)
        if kind == "UnitBall":
            return DomainSpec.unit_ball(dim)
        if kind == "Ellipsoid":
            return DomainSpec.ellipsoid(*doc["semiaxes"])
        if kind == "MappedBall":
            return DomainSpec.mapped_ball(PerturbationMap.from_json(doc["map"]), dim)
        if kind == "Rectangle":
            return DomainSpec.rectangle(*doc["sides"])
        raise ValueError(f"unknown domain kind {kind!r}")

    @property
    def smooth(self) -> bool:
        """True for C^infinity boundaries (everything except Rectangle)."""
        return self.kind != "Rectangle"


def diameter(d: DomainSpec) -> float:
    """Domain diameter (nominal unit scale 2.0 for the unbounded half-space)."""
    if d.kind == "UnitBall":
        return 2.0
    if d.kind == "Ellipsoid":
        return 2.0 * max(d.semiaxes)
    if d.kind == "HalfSpace":
        return 2.0  # sampling happens in a unit-scale box next to the wall
    if d.kind == "Rectangle":
        return math.hypot(*d.sides)
    # MappedBall: estimate from a deterministic boundary mesh
    pts, _ = boundary_mesh(d, 64 if d.dim == 2 else 256)
    return 2.0 * float(np.max(np.linalg.norm(pts, axis=1)))


# ---------------------------------------------------------------------------
# Membership, distance, normals
# ---------------------------------------------------------------------------


def inside(d: DomainSpec, x: Point) -> bool:
    """True iff ``x`` lies in the open domain."""
    x = as_point(x, d.dim)
    if d.kind == "HalfSpace":
        return bool(x[0] < 0.0)
    if d.kind == "UnitBall":
        return bool(x @ x < 1.0)
    if d.kind == "Ellipsoid":
        a = np.asarray(d.semiaxes)
        return bool(np.sum((x / a) ** 2) < 1.0)
    if d.kind == "Rectangle":
        a, b = d.sides
        return bool(0.0 < x[0] < a and 0.0 < x[1] < b)
    # MappedBall
    u = map_inverse(d.map, x)
    return bool(u @ u < 1.0)


def _ellipsoid_nearest(semiaxes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Nearest boundary point of an axis-aligned ellipsoid, interior ``x``.

    Stationary points of ``|p - x|^2`` on the boundary satisfy
    ``p_i (a_i^2 + t) = a_i^2 x_i`` for a multiplier ``t``.  All branches are
    enumerated: the generic branch solves a monotone scalar equation for
    ``t`` by bisection; coordinates with ``x_i = 0`` additionally admit
    branches with ``t = -a_i^2``.  The minimizer over all real candidates is
    returned — robust for every interior point including the centre and
    points on symmetry axes.
    """
    a = np.asarray(semiaxes, dtype=float)
    sgn = np.where(x < 0.0, -1.0, 1.0)
    xa = np.abs(x)
    # Coordinates below float resolvability behave exactly like zeros: the
    # bisection below cannot separate the multiplier from the pole -min a^2
    # when (a_i x_i)^2 underflows against it.  Folding them to zero moves the
    # foot point by less than 1e-14 * min(a).
    nz = a * xa > 1e-14 * float(np.min(a)) ** 2
    candidates: list[np.ndarray] = []

    if nz.any():
        a2 = a[nz] ** 2
        w = (a[nz] * xa[nz]) ** 2
        a2min = float(np.min(a2))
        # Multiplier t lies in (-a2min, 0); solve theta(t) = 1 in the
        # pole-offset variable q = t + a2min, bisected geometrically so that
        # q keeps full relative precision even when the root hugs the pole
        # (foot points near the ends of the shortest axis).
        gaps = a2 - a2min  # exact zeros at the pole axes
        gaps_l = [float(g) for g in gaps]
        w_l = [float(v) for v in w]

        def theta(q: float) -> float:
            return sum(v / (g + q) ** 2 for g, v in zip(gaps_l, w_l))

        w_pole = float(np.sum(w[gaps == 0.0]))
        q_hi = a2min  # q = a2min is t = 0, where theta < 1 (interior point)
        q_lo = min(math.sqrt(w_pole) / 2.0, q_hi / 2.0) if w_pole > 0.0 else q_hi
        while theta(q_lo) <= 1.0 and q_lo > 1e-300:
            q_lo /= 16.0
        for _ in range(240):
            if q_hi <= q_lo * (1.0 + 4e-16):
                break
            q_mid = math.sqrt(q_lo * q_hi)
            if theta(q_mid) > 1.0:
                q_lo = q_mid
            else:
                q_hi = q_mid
        q = math.sqrt(q_lo * q_hi)
        p = np.zeros_like(x)
        p[nz] = xa[nz] * a2 / (gaps + q)
        if np.all(np.isfinite(p)):
            candidates.append(p)

    for v in sorted(set(a[~nz] ** 2)):
        if nz.any() and np.any(np.abs(a[nz] ** 2 - v) < 1e-12 * v):
            continue  # branch impossible: multiplier hits a used axis
        p = np.zeros_like(x)
        p[nz] = xa[nz] * a[nz] ** 2 / (a[nz] ** 2 - v)
        s2 = 1.0 - float(np.sum((p[nz] / a[nz]) ** 2))
        if s2 <= 0.0 or not np.all(np.isfinite(p)):
            continue
        i = int(np.argmax((~nz) & (np.abs(a**2 - v) < 1e-30)))
        p[i] = a[i] * math.sqrt(s2)
        candidates.append(p)

    best = min(candidates, key=lambda p: float(np.sum((p - xa) ** 2)))
    return sgn * best


def _mapped_nearest(m: PerturbationMap, x: np.ndarray, dim: int) -> np.ndarray:
    """Nearest boundary point of a mapped ball by damped projected gradient.

    Minimizes ``|psi(u) - x|^2`` over the unit sphere with Armijo
    backtracking (200-iteration cap, tolerance 1e-12 on the projected
    gradient), multi-started from the preimage direction and the coordinate
    axes.
    """

    def objective(u: np.ndarray) -> float:
        r = map_point(m, u) - x
        return float(r @ r)

    starts = []
    u0 = map_inverse(m, x)
    nrm = float(np.linalg.norm(u0))
    starts.append(u0 / nrm if nrm > 1e-12 else np.eye(dim)[0])
    for i in range(dim):
        for s in (1.0, -1.0):
            starts.append(s * np.eye(dim)[i])

    best_u, best_f = None, math.inf
    for u in starts:
        u = u / np.linalg.norm(u)
        f = objective(u)
        for _ in range(200):
            r = map_point(m, u) - x
            g = 2.0 * map_jacobian(m, u).T @ r
            g_tan = g - (g @ u) * u
            gnorm = float(np.linalg.norm(g_tan))
            if gnorm < 1e-12:
                break
            eta, improved = 0.5, False
            for _ in range(60):
                u_new = u - eta * g_tan
                u_new = u_new / np.linalg.norm(u_new)
                f_new = objective(u_new)
                if f_new <= f - 1e-4 * eta * gnorm * gnorm:
                    improved = True
                    break
                eta *= 0.5
            if not improved:
                break
            u, f = u_new, f_new
        if f < best_f:
            best_u, best_f = u, f
    return map_point(m, best_u)


def nearest_boundary_point(d: DomainSpec, x: Point) -> Point:
    """Closest point of the boundary to the interior point ``x``."""
    x = as_point(x, d.dim)
    if not inside(d, x):
        raise OutsideDomain("nearest_boundary_point requires an interior point")
    if d.kind == "HalfSpace":
        p = x.copy()
        p[0] = 0.0
        return p
    if d.kind == "UnitBall":
        nrm = float(np.linalg.norm(x))
        if nrm < 1e-300:
            return np.eye(d.dim)[0].astype(float)
        return x / nrm
    if d.kind == "Ellipsoid":
        return _ellipsoid_nearest(np.asarray(d.semiaxes), x)
    if d.kind == "Rectangle":
        a, b = d.sides
        gaps = [x[0], a - x[0], x[1], b - x[1]]
        k = int(np.argmin(gaps))
        p = x.copy()
        p[0 if k < 2 else 1] = [0.0, a, 0.0, b][k]
        return p
    return _mapped_nearest(d.map, x, d.dim)


def distance_to_boundary(d: DomainSpec, x: Point) -> float:
    """Euclidean distance from the interior point ``x`` to the boundary."""
    x = as_point(x, d.dim)
    if not inside(d, x):
        raise OutsideDomain("distance_to_boundary requires an interior point")
    if d.kind == "HalfSpace":
        return float(-x[0])
    if d.kind == "UnitBall":
        return float(1.0 - np.linalg.norm(x))
    if d.kind == "Rectangle":
        a, b = d.sides
        return float(min(x[0], a - x[0], x[1], b - x[1]))
    p = nearest_boundary_point(d, x)
    return float(np.linalg.norm(p - x))


def boundary_normal(d: DomainSpec, p: Point, tol: float = 1e-8) -> Point:
    """Outward unit normal at the boundary point ``p``.

    Rejects points farther than ``tol`` from the boundary and rectangle
    corners (where no normal exists).
    """
    p = as_point(p, d.dim)
    if d.kind == "HalfSpace":
        if abs(p[0]) > tol:
            raise OutsideDomain("point is not on the half-space boundary")
        nu = np.zeros(d.dim)
        nu[0] = 1.0
        return nu
    if d.kind == "UnitBall":
        nrm = float(np.linalg.norm(p))
        if abs(nrm - 1.0) > tol:
            raise OutsideDomain("point is not on the unit sphere")
        return p / nrm
    if d.kind == "Ellipsoid":
        a = np.asarray(d.semiaxes)
        level = float(np.sum((p / a) ** 2))
        if abs(level - 1.0) > 4.0 * tol:
            raise OutsideDomain("point is not on the ellipsoid boundary")
        grad = p / a**2
        return grad / np.linalg.norm(grad)
    if d.kind == "Rectangle":
        a, b = d.sides
        gaps = np.array([p[0], a - p[0], p[1], b - p[1]])
        on = np.abs(gaps) <= tol
        if not on.any():
            raise OutsideDomain("point is not on the rectangle boundary")
        if on.sum() > 1:
            raise OutsideDomain("rectangle corner: normal undefined")
        k = int(np.argmax(on))
        nu = np.zeros(2)
        nu[0 if k < 2 else 1] = -1.0 if k in (0, 2) else 1.0
        return nu
    # MappedBall: Nanson's formula through the preimage on the sphere
    u = map_inverse(d.map, p)
    nrm = float(np.linalg.norm(u))
    if abs(nrm - 1.0) > 10.0 * tol:
        raise OutsideDomain("point is not on the mapped-ball boundary")
    u = u / nrm
    jac_inv_t = np.linalg.inv(map_jacobian(d.map, u)).T
    nu = jac_inv_t @ u
    return nu / np.linalg.norm(nu)


# ---------------------------------------------------------------------------
# Deterministic boundary meshes (collocation substrate)
# ---------------------------------------------------------------------------


def fibonacci_sphere(count: int) -> np.ndarray:
    """``count`` well-spread points on the unit 2-sphere (Fibonacci lattice)."""
    k = np.arange(count, dtype=float)
    z = 1.0 - 2.0 * (k + 0.5) / count
    phi = 2.0 * math.pi * ((k / _GOLDEN) % 1.0)
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def _unit_sphere_mesh(dim: int, count: int, offset: float = 0.5) -> np.ndarray:
    if dim == 2:
        theta = 2.0 * math.pi * (np.arange(count) + offset) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if dim == 3:
        return fibonacci_sphere(count)
    raise ValueError("deterministic boundary meshes are provided for dim 2 and 3")


def boundary_mesh(d: DomainSpec, count: int, offset: float = 0.5):
    """Deterministic boundary points and outward normals.

    Returns ``(points, normals)`` with shape ``(count, dim)`` each.  The
    ``offset`` shifts the underlying parameter lattice so that independent
    meshes (collocation vs. validation) do not share points.
    """
    if d.kind == "Rectangle":
        raise OutsideDomain("boundary meshes are not provided for rectangles")
    if d.kind == "HalfSpace":
        raise OutsideDomain("the half-space boundary is unbounded; no mesh")
    u = _unit_sphere_mesh(d.dim, count, offset)
    if d.kind == "UnitBall":
        return u.copy(), u.copy()
    if d.kind == "Ellipsoid":
        a = np.asarray(d.semiaxes)
        pts = u * a
        normals = pts / a**2
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        return pts, normals
    # MappedBall
    pts = np.array([map_point(d.map, ui) for ui in u])
    normals = np.empty_like(pts)
    for i, ui in enumerate(u):
        jac_inv_t = np.linalg.inv(map_jacobian(d.map, ui)).T
        nu = jac_inv_t @ ui
        normals[i] = nu / np.linalg.norm(nu)
    return pts, normals


# ---------------------------------------------------------------------------
# Random sampling
# ---------------------------------------------------------------------------


def _uniform_direction(stream: Stream, dim: int, count: int) -> np.ndarray:
    v = stream.normal((count, dim))
    nrm = np.linalg.norm(v, axis=1, keepdims=True)
    bad = nrm[:, 0] < 1e-12
    if bad.any():
        v[bad] = np.eye(dim)[0]
        nrm[bad] = 1.0
    return v / nrm


def _uniform_in_domain(d: DomainSpec, stream: Stream, count: int) -> np.ndarray:
    """Uniform interior samples (for mapped balls: pushed-forward ball law)."""
    n = d.dim
    if d.kind == "Rectangle":
        a, b = d.sides
        u = stream.uniform((count, 2))
        u = 1e-12 + (1.0 - 2e-12) * u
        return u * np.array([a, b])
    if d.kind == "HalfSpace":
        # unit-scale box hugging the wall: x_1 in (-1, 0), others in (-1, 1)
        u = stream.uniform((count, n))
        x = 2.0 * u - 1.0
        x[:, 0] = -(1e-12 + (1.0 - 2e-12) * u[:, 0])
        return x
    dirs = _uniform_direction(stream, n, count)
    r = stream.uniform(count) ** (1.0 / n) * (1.0 - 1e-12)
    balls = dirs * r[:, None]
    if d.kind == "UnitBall":
        return balls
    if d.kind == "Ellipsoid":
        return balls * np.asarray(d.semiaxes)
    return np.array([map_point(d.map, b) for b in balls])


def _boundary_random(d: DomainSpec, stream: Stream, count: int) -> np.ndarray:
    """Random boundary points (used only to bias interior samples)."""
    n = d.dim
    if d.kind == "HalfSpace":
        u = stream.uniform((count, n - 1))
        pts = np.zeros((count, n))
        pts[:, 1:] = 2.0 * u - 1.0
        return pts
    if d.kind == "Rectangle":
        a, b = d.sides
        perim = 2.0 * (a + b)
        s = stream.uniform(count) * perim
        pts = np.empty((count, 2))
        for i, si in enumerate(s):
            if si < a:
                pts[i] = (si, 0.0)
            elif si < a + b:
                pts[i] = (a, si - a)
            elif si < 2 * a + b:
                pts[i] = (2 * a + b - si, b)
            else:
                pts[i] = (0.0, perim - si)
        return pts
    dirs = _uniform_direction(stream, n, count)
    if d.kind == "UnitBall":
        return dirs
    if d.kind == "Ellipsoid":
        return dirs * np.asarray(d.semiaxes)
    return np.array([map_point(d.map, u) for u in dirs])


def _boundary_biased(d: DomainSpec, stream: Stream, count: int) -> np.ndarray:
    """Interior points with boundary distance concentrated in (0, 0.1)."""
    out = np.empty((count, d.dim))
    filled = 0
    while filled < count:
        todo = count - filled
        pts = _boundary_random(d, stream, todo)
        depth = 1e-3 + stream.uniform(todo) * (0.0995 - 1e-3)
        for p, t in zip(pts, depth):
            try:
                nu = boundary_normal(d, p, tol=1e-6)
            except OutsideDomain:
                continue
            x = p - t * nu
            if inside(d, x) and distance_to_boundary(d, x) < 0.1:
                out[filled] = x
                filled += 1
                if filled == count:
                    break
    return out


def sample_points(d: DomainSpec, count: int, strategy: str, stream: Stream) -> np.ndarray:
    """Interior samples under a named strategy (see :func:`sample_pairs`)."""
    if strategy == "uniform":
        return _uniform_in_domain(d, stream, count)
    if strategy == "boundary-biased":
        return _boundary_biased(d, stream, count)
    raise ValueError(f"unknown point strategy {strategy!r}")


def sample_pairs(
    d: DomainSpec, count: int, strategy: str, seed: int
) -> list[tuple[Point, Point]]:
    """Deterministic interior point pairs for audits.

    Strategies:

    ``uniform``
        both points uniform in the domain (mapped balls: push-forward law).
    ``boundary-biased``
        both points drawn near the boundary with distance in (0, 0.1).
    ``near-diagonal``
        first point uniform; separation log-uniform in (1e-4, 0.1).

    The same ``(domain, count, strategy, seed)`` always produces the same
    pairs, bit for bit (see :mod:`plategreen.rng`).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    stream = Stream(seed, "pairs", d.kind, d.dim, strategy)
    if strategy in ("uniform", "boundary-biased"):
        xs = sample_points(d, count, strategy, stream)
        ys = sample_points(d, count, strategy, stream)
        return [(x, y) for x, y in zip(xs, ys)]
    if strategy != "near-diagonal":
        raise ValueError(f"unknown pair strategy {strategy!r}")
    xs = _uniform_in_domain(d, stream, count)
    pairs: list[tuple[Point, Point]] = []
    for x in xs:
        sep = 10.0 ** (-4.0 + 3.0 * float(stream.uniform(1)[0]))
        y = None
        for _ in range(200):
            direction = _uniform_direction(stream, d.dim, 1)[0]
            cand = x + sep * direction
            if inside(d, cand):
                y = cand
                break
            sep *= 0.7
        if y is None:  # pragma: no cover - extreme corner safeguard
            y = x + 1e-8 * (nearest_boundary_point(d, x) - x)
        pairs.append((x, y))
    return pairs
