"""Flow integration, linearized holonomy and the projective-line calculus.

The holonomy of W is represented in the model's distinguished frame: a
`HolonomyMap` carries the 4x4 frame-transport matrix of the time-t flow
together with its induced 2x2 action modulo W on the declared quotient
frame.  Lines in the quotient plane are `ProjectivePoint`s (angles in
[0, pi)), and the cross-ratio of four such lines is computed from
homogeneous determinants, never from affine charts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .geometry import (
    DistributionSpec,
    DomainError,
    FieldHandle,
    GeometryError,
    Point,
    TangentVector,
)
from .models import LieAlgebraModel

DEFAULT_STEP = 1e-3
E_INVARIANCE_TOL = 1e-8


class DynamicsError(GeometryError):
    pass


# ---------------------------------------------------------------------------
# Flow integration


def _rk4_path(model, W: FieldHandle, p: Point, t: float, step: float,
              checkpoints=None, with_jacobian=True):
    """Fixed-step RK4 for the flow of W with the variational equation.

    Returns (final coords, final Jacobian, checkpoint dict time -> (x, J)).
    Checkpoint times must lie between 0 and t (inclusive) with the sign
    of t.
    """
    xs = p.array.copy()
    jac = np.eye(4)
    wanted = sorted(checkpoints or [], key=abs)
    out = {}

    def rhs(x):
        return model.coord_components(W, x)

    def rhs_jac(x, j):
        return model.coord_jacobian(W, x) @ j

    elapsed = 0.0
    remaining = t
    sgn = 1.0 if t >= 0 else -1.0
    h0 = abs(step) * sgn
    widx = 0
    while widx < len(wanted) and abs(wanted[widx]) <= 1e-15:
        out[wanted[widx]] = (xs.copy(), jac.copy())
        widx += 1
    while abs(remaining) > 1e-15:
        h = h0 if abs(remaining) > abs(h0) else remaining
        # stop exactly on the next checkpoint
        if widx < len(wanted):
            to_cp = wanted[widx] - elapsed
            if abs(to_cp) < abs(h):
                h = to_cp
        try:
            model.check_region(xs, "flow")
            k1 = rhs(xs)
            k2 = rhs(xs + 0.5 * h * k1)
            k3 = rhs(xs + 0.5 * h * k2)
            k4 = rhs(xs + h * k3)
            if with_jacobian:
                j1 = rhs_jac(xs, jac)
                j2 = rhs_jac(xs + 0.5 * h * k1, jac + 0.5 * h * j1)
                j3 = rhs_jac(xs + 0.5 * h * k2, jac + 0.5 * h * j2)
                j4 = rhs_jac(xs + h * k3, jac + h * j3)
                jac = jac + (h / 6.0) * (j1 + 2 * j2 + 2 * j3 + j4)
            xs = xs + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        except DomainError as exc:
            raise DomainError(
                f"trajectory left the valid region near t = {elapsed:.6g}: {exc}"
            ) from exc
        elapsed += h
        remaining = t - elapsed
        if widx < len(wanted) and abs(wanted[widx] - elapsed) < 1e-12:
            out[wanted[widx]] = (xs.copy(), jac.copy())
            widx += 1
    model.check_region(xs, "flow")
    return xs, jac, out


def integrate_flow(model, W: FieldHandle, p: Point, t: float,
                   step: float = DEFAULT_STEP) -> Point:
    """Time-t flow of W from p; exact on algebra/suspension backends."""
    if t == 0.0:
        return p
    if isinstance(model, LieAlgebraModel):
        return model.flow_point(p, t, coeffs=W.coeffs)
    if step == 0.0:
        raise DynamicsError("integration step must be nonzero")
    xs, _, _ = _rk4_path(model, W, p, t, step, with_jacobian=False)
    return model.point(xs)


# ---------------------------------------------------------------------------
# Holonomy


@dataclass(frozen=True)
class QuotientFrame:
    """Two E-sections transverse to W plus the W vector, at one point."""

    u1: TangentVector
    u2: TangentVector
    w: TangentVector

    @property
    def matrix(self):
        return np.column_stack([self.u1.array, self.u2.array, self.w.array])

    def reduce(self, v):
        """Coordinates of v in (u1, u2) modulo W, plus the E-residual."""
        coeffs, res, rank, _ = np.linalg.lstsq(self.matrix, np.asarray(v),
                                               rcond=None)
        if rank < 3:
            raise DynamicsError("quotient frame degenerate")
        resid = float(np.sqrt(res[0])) if res.size else float(
            np.linalg.norm(self.matrix @ coeffs - v)
        )
        return coeffs[:2], resid


def quotient_frame(model, p: Point) -> QuotientFrame:
    if model.quotient is None or model.w_handle is None:
        raise DynamicsError("model has no declared quotient frame")
    u1, u2 = model.quotient
    return QuotientFrame(u1.at(p), u2.at(p), model.w_handle.at(p))


@dataclass(frozen=True)
class HolonomyMap:
    """Frame transport of the time-t flow of W and its quotient action.

    `full` maps frame components at `source` to frame components at
    `target` (direction "forward"); `quotient` is the induced 2x2 map on
    the declared E/W frames.  `e_residual` is the worst transverse leak
    of E-frame images out of E.
    """

    source: Point
    target: Point
    t: float
    full: tuple
    quotient: tuple
    direction: str = "forward"
    e_residual: float = 0.0

    @property
    def full_array(self):
        return np.asarray(self.full, dtype=float)

    @property
    def quotient_array(self):
        return np.asarray(self.quotient, dtype=float)

    def inverse(self) -> "HolonomyMap":
        return HolonomyMap(
            source=self.target,
            target=self.source,
            t=-self.t,
            full=tuple(map(tuple, np.linalg.inv(self.full_array))),
            quotient=tuple(map(tuple, np.linalg.inv(self.quotient_array))),
            direction="forward" if self.direction == "backward" else "backward",
            e_residual=self.e_residual,
        )


def _assemble_holonomy(model, p, q, t, full):
    """Quotient block of `full` in the declared frames at p and q."""
    src = quotient_frame(model, p)
    tgt = quotient_frame(model, q)
    cols = np.column_stack([src.u1.array, src.u2.array])
    block = np.zeros((2, 2))
    worst = 0.0
    for j in range(2):
        img = full @ cols[:, j]
        red, resid = tgt.reduce(img)
        block[:, j] = red
        worst = max(worst, resid / max(np.linalg.norm(img), 1e-300))
    return HolonomyMap(
        source=p, target=q, t=t,
        full=tuple(map(tuple, full)),
        quotient=tuple(map(tuple, block)),
        e_residual=worst,
    )


def identity_holonomy(model, p: Point) -> HolonomyMap:
    """The t = 0 holonomy at p (useful for reading planes at a fiber)."""
    return _assemble_holonomy(model, p, p, 0.0, np.eye(4))


def linearized_holonomy(model, W: FieldHandle, p: Point, t: float,
                        step: float = DEFAULT_STEP) -> HolonomyMap:
    """Frame transport of Dphi_t along the orbit of W through p."""
    return holonomy_series(model, W, p, [t], step)[0]


def holonomy_series(model, W: FieldHandle, p: Point, times, step=DEFAULT_STEP):
    """HolonomyMaps at several times from a single orbit integration.

    Times may mix signs; forward and backward legs are integrated
    separately.  Algebra backends are exact.
    """
    times = list(times)
    if isinstance(model, LieAlgebraModel):
        if W.coeffs is None:
            raise DynamicsError("algebra backend needs a constant-coefficient W")
        ad = model.ad_matrix(W.coeffs)
        maps = []
        for t in times:
            q = model.flow_point(p, t, coeffs=W.coeffs)
            maps.append(_assemble_holonomy(model, p, q, t, expm(-t * ad)))
        return maps

    by_time = {}
    for sgn in (1.0, -1.0):
        leg = sorted({t for t in times if math.copysign(1.0, t) == sgn
                      and t != 0.0}, key=abs)
        if not leg:
            continue
        _, _, cps = _rk4_path(model, W, p, leg[-1], step, checkpoints=leg)
        framed_p = model.frame_matrix(p)
        for t in leg:
            xs, jac = cps[t]
            q = model.point(xs)
            full = np.linalg.solve(model.frame_matrix(q), jac @ framed_p)
            by_time[t] = _assemble_holonomy(model, p, q, t, full)
    if any(t == 0.0 for t in times):
        by_time[0.0] = _assemble_holonomy(model, p, p, 0.0, np.eye(4))
    return [by_time[t] for t in times]


# ---------------------------------------------------------------------------
# Projective line


@dataclass(frozen=True)
class ProjectivePoint:
    """A line through 0 in a fixed 2-frame, as an angle in [0, pi).

    When built from a vector, the exact unit representative is kept so
    components that are exactly zero are not perturbed by the angle
    round trip (cos(pi/2) is not zero in floating point)."""

    angle: float
    vec: tuple | None = None

    def __post_init__(self):
        if not math.isfinite(self.angle):
            raise DynamicsError("non-finite projective angle")
        object.__setattr__(self, "angle", self.angle % math.pi)

    @classmethod
    def from_vector(cls, v) -> "ProjectivePoint":
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0.0:
            raise DynamicsError("zero vector has no projective class")
        u = v / n
        return cls(math.atan2(u[1], u[0]), vec=(float(u[0]), float(u[1])))

    @property
    def vector(self):
        if self.vec is not None:
            return np.array(self.vec)
        return np.array([math.cos(self.angle), math.sin(self.angle)])


def projective_separation(a: ProjectivePoint, b: ProjectivePoint) -> float:
    d = abs(a.angle - b.angle) % math.pi
    return min(d, math.pi - d)


def act_on_projective(H, x: ProjectivePoint) -> ProjectivePoint:
    """Image of the line x under a HolonomyMap or raw 2x2 matrix."""
    mat = H.quotient_array if isinstance(H, HolonomyMap) else np.asarray(H)
    if abs(np.linalg.det(mat)) < 1e-300:
        raise DynamicsError("singular quotient block")
    return ProjectivePoint.from_vector(mat @ x.vector)


def _det2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _cross_ratio_raw(x1, x2, x3, z):
    """Determinant cross-ratio, no distinctness guards."""
    v1, v2, v3, vz = x1.vector, x2.vector, x3.vector, z.vector
    num = _det2(v3, v1) * _det2(vz, v2)
    den = _det2(vz, v1) * _det2(v3, v2)
    if den == 0.0:
        return math.inf
    return num / den


def cross_ratio(x1: ProjectivePoint, x2: ProjectivePoint,
                x3: ProjectivePoint, z: ProjectivePoint,
                tol: float = 1e-12):
    """Cross-ratio [x1, x2, x3, z]; infinite exactly when z = x1.

    Normalized so z = x3 gives 1 and z = x2 gives 0.  The basis points
    x1, x2, x3 must be pairwise distinct (angular separation > tol).
    """
    pts = [x1, x2, x3]
    for i in range(3):
        for j in range(i + 1, 3):
            if projective_separation(pts[i], pts[j]) <= tol:
                raise DynamicsError(
                    f"cross-ratio basis points {i + 1} and {j + 1} coincide"
                )
    if projective_separation(z, x1) <= tol:
        return math.inf
    return _cross_ratio_raw(x1, x2, x3, z)


def chain_relation_residual(x, a, a2, b2, b, y) -> float:
    """|[x,a',b',y] - [x,a,b,y][a,a',b',b][a,a',b,y][x,a,b',b]|."""
    pts = [x, a, a2, b2, b, y]
    for i in range(6):
        for j in range(i + 1, 6):
            if projective_separation(pts[i], pts[j]) <= 1e-12:
                raise DynamicsError("chain relation needs pairwise distinct points")
    lhs = cross_ratio(x, a2, b2, y)
    factors = [
        cross_ratio(x, a, b, y),
        cross_ratio(a, a2, b2, b),
        cross_ratio(a, a2, b, y),
        cross_ratio(x, a, b2, b),
    ]
    if not all(math.isfinite(f) for f in factors) or not math.isfinite(lhs):
        raise DynamicsError("chain relation factor is infinite")
    return abs(lhs - math.prod(factors))


def is_cyclically_ordered(points) -> bool:
    """True iff the angles meet the points in the given cyclic order.

    Traversal is once around [0, pi) starting from the first point, in
    the orientation of increasing angle.
    """
    if len(points) < 3:
        raise DynamicsError("cyclic order needs at least 3 points")
    rel = [(p.angle - points[0].angle) % math.pi for p in points]
    for i in range(1, len(rel)):
        for j in range(i):
            if abs(rel[i] - rel[j]) < 1e-15:
                raise DynamicsError("duplicate points in cyclic-order test")
    seq = rel[1:]
    return seq[0] > 0.0 and all(seq[i] < seq[i + 1] for i in range(len(seq) - 1))


# ---------------------------------------------------------------------------
# Plane transport to a source fiber


def plane_to_projective(model, H: HolonomyMap, D: DistributionSpec) -> ProjectivePoint:
    """Class of the W-containing plane D(target), read at the source fiber.

    The plane is evaluated at H.target, transported by H.full and
    reduced modulo W at H.source; the surviving direction is returned.
    """
    cols = D.matrix(H.target)
    src = quotient_frame(model, H.source)
    reduced = np.column_stack([src.reduce(H.full_array @ cols[:, j])[0]
                               for j in range(cols.shape[1])])
    u, s, _ = np.linalg.svd(reduced)
    if s[0] == 0.0:
        raise DynamicsError("plane collapses into W under transport")
    return ProjectivePoint.from_vector(u[:, 0])


@dataclass(frozen=True)
class SeriesRow:
    t: float
    theta_plus: float
    theta_minus: float
    cr: float


def projective_series(model, D_plus: DistributionSpec, D_minus: DistributionSpec,
                      p: Point, times, step=DEFAULT_STEP):
    """Rows (t, theta(d+), theta(d-), cross-ratio) at the source fiber.

    The cross-ratio column is [d+(0), d+(t), d-(t), d-(0)], evaluated by
    the raw determinant formula so the t = 0 row is exactly 1.
    """
    maps = holonomy_series(model, model.w_handle, p, list(times), step)
    id_map = _assemble_holonomy(model, p, p, 0.0, np.eye(4))
    d_plus0 = plane_to_projective(model, id_map, D_plus)
    d_minus0 = plane_to_projective(model, id_map, D_minus)
    rows = []
    for H in maps:
        dp = plane_to_projective(model, H, D_plus)
        dm = plane_to_projective(model, H, D_minus)
        rows.append(SeriesRow(
            t=H.t,
            theta_plus=dp.angle,
            theta_minus=dm.angle,
            cr=_cross_ratio_raw(d_plus0, dp, dm, d_minus0),
        ))
    return rows
