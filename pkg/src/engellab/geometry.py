"""Core geometric primitives on 4-manifold models.

Points and tangent vectors, vector-field handles, Lie brackets, rank
tests, the skew transverse form of a rank-3 plane field and the
characteristic-line extraction built on it.

Tangent-vector components are always expressed in the model's
distinguished global frame; chart-coordinate components only appear
internally when differentiating.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_RANK_TOL = 1e-8
DEFAULT_FD_STEP = 1e-4


class GeometryError(ValueError):
    pass


class RankError(GeometryError):
    pass


class DomainError(GeometryError):
    """A stencil or trajectory left the chart's valid region."""


class IntegrablePointError(GeometryError):
    """The transverse form vanishes: the plane field is integrable at p."""


@dataclass(frozen=True)
class Point:
    """Chart coordinates of a point; periodic coordinates normalized."""

    coords: tuple

    def __post_init__(self):
        if not all(np.isfinite(self.coords)):
            raise GeometryError(f"non-finite point coordinates {self.coords}")

    @property
    def array(self):
        return np.asarray(self.coords, dtype=float)


@dataclass(frozen=True)
class TangentVector:
    """Components in the model's global frame, based at `base`."""

    base: Point
    components: tuple

    def __post_init__(self):
        if not all(np.isfinite(self.components)):
            raise GeometryError(f"non-finite components {self.components}")

    @property
    def array(self):
        return np.asarray(self.components, dtype=float)

    def norm(self):
        return float(np.linalg.norm(self.array))


@dataclass(frozen=True)
class FieldHandle:
    """A vector field as an evaluator Point -> frame components.

    `coeffs` is set when the field has constant frame components (the
    left-invariant case); such handles bracket exactly on algebra
    backends.  `coord_field` / `coord_jacobian`, when present, give the
    chart-coordinate components and their analytic Jacobian.
    """

    name: str
    evaluator: object  # Callable[[Point], np.ndarray] (frame components)
    coeffs: tuple | None = None
    coord_field: object | None = None     # Callable[[np.ndarray], np.ndarray]
    coord_jacobian: object | None = None  # Callable[[np.ndarray], np.ndarray]
    scheme: str = "analytic"
    fd_step: float = DEFAULT_FD_STEP

    def __call__(self, p: Point) -> np.ndarray:
        if self.coeffs is not None:
            return np.asarray(self.coeffs, dtype=float)
        return np.asarray(self.evaluator(p), dtype=float)

    def at(self, p: Point) -> TangentVector:
        return TangentVector(p, tuple(self(p)))


def combine(name, handles, weights):
    """Pointwise linear combination of handles (same model)."""
    weights = tuple(float(w) for w in weights)
    if all(h.coeffs is not None for h in handles):
        coeffs = sum(
            w * np.asarray(h.coeffs) for h, w in zip(handles, weights)
        )
        return FieldHandle(name, None, coeffs=tuple(coeffs))

    def ev(p):
        return sum(w * h(p) for h, w in zip(handles, weights))

    cf = None
    cj = None
    if all(h.coord_field is not None for h in handles):
        def cf(xs, _h=handles, _w=weights):  # noqa: E731
            return sum(w * h.coord_field(xs) for h, w in zip(_h, _w))
    if all(h.coord_jacobian is not None for h in handles):
        def cj(xs, _h=handles, _w=weights):  # noqa: E731
            return sum(w * h.coord_jacobian(xs) for h, w in zip(_h, _w))
    return FieldHandle(name, ev, coord_field=cf, coord_jacobian=cj)


@dataclass(frozen=True)
class DistributionSpec:
    """A rank-k plane field given by k spanning field handles."""

    rank: int
    frame: tuple
    name: str = ""

    def __post_init__(self):
        if self.rank not in (1, 2, 3):
            raise GeometryError(f"unsupported distribution rank {self.rank}")
        if len(self.frame) != self.rank:
            raise GeometryError("frame length must equal rank")

    def matrix(self, p: Point, tol=DEFAULT_RANK_TOL):
        """4 x rank matrix of frame components; checks independence."""
        cols = np.column_stack([h(p) for h in self.frame])
        res = span_rank([TangentVector(p, tuple(c)) for c in cols.T], tol)
        if res.rank < self.rank:
            raise RankError(
                f"frame of '{self.name or 'distribution'}' degenerate at "
                f"{p.coords} (rank {res.rank} < {self.rank})"
            )
        return cols


@dataclass(frozen=True)
class RankResult:
    rank: int
    margin: float  # smallest retained singular value (0 for rank 0)
    singular_values: tuple = field(default=())


def span_rank(vectors, tol=DEFAULT_RANK_TOL) -> RankResult:
    """Numerical rank of a list of TangentVectors at a common base point."""
    if not vectors:
        raise GeometryError("span_rank needs at least one vector")
    base = vectors[0].base
    for v in vectors[1:]:
        if not np.allclose(v.base.array, base.array):
            raise GeometryError("span_rank: vectors have different base points")
    mat = np.column_stack([v.array for v in vectors])
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] == 0.0:
        return RankResult(0, 0.0, tuple(sv))
    kept = sv[sv > tol * sv[0]]
    return RankResult(int(kept.size), float(kept[-1]) if kept.size else 0.0, tuple(sv))


def lie_bracket(model, X: FieldHandle, Y: FieldHandle, p: Point) -> TangentVector:
    """[X, Y](p) in frame components; exact on algebra backends."""
    return TangentVector(p, tuple(model.bracket(X, Y, p)))


@dataclass(frozen=True)
class TransverseForm:
    """Skew 3x3 matrix of E-transverse bracket components at a point."""

    matrix: tuple            # 3x3 nested tuple
    complement_index: int    # standard-basis vector used as the complement
    base: Point

    @property
    def array(self):
        return np.asarray(self.matrix, dtype=float)


def transverse_form(model, E: DistributionSpec, p: Point) -> TransverseForm:
    """Entry (i,j): component of [e_i, e_j](p) transverse to E(p).

    The complement vector n is the standard frame vector with the
    largest residual from the numerical span of E; it is recorded so
    results are reproducible.
    """
    if E.rank != 3:
        raise GeometryError("transverse_form needs a rank-3 distribution")
    cols = E.matrix(p)
    q, _ = np.linalg.qr(cols)
    residuals = [
        np.linalg.norm(e - q @ (q.T @ e)) for e in np.eye(4)
    ]
    n_idx = int(np.argmax(residuals))
    basis = np.column_stack([cols, np.eye(4)[n_idx]])
    omega = np.zeros((3, 3))
    for i in range(3):
        for j in range(i + 1, 3):
            br = model.bracket(E.frame[i], E.frame[j], p)
            coeffs = np.linalg.solve(basis, br)
            omega[i, j] = coeffs[3]
            omega[j, i] = -coeffs[3]
    return TransverseForm(tuple(map(tuple, omega)), n_idx, p)


def characteristic_line(model, E: DistributionSpec, p: Point,
                        zero_tol=1e-12) -> TangentVector:
    """Unit vector spanning the kernel of the transverse form of E at p.

    For a skew 3x3 form the kernel is spanned by (w23, -w13, w12) in
    frame coordinates.  Sign follows the model's declared W-orientation
    when one exists, else first-nonzero-component-positive.
    """
    tf = transverse_form(model, E, p)
    om = tf.array
    scale = np.abs(om).max()
    if scale <= zero_tol:
        raise IntegrablePointError(
            f"transverse form vanishes at {p.coords}: integrable point"
        )
    kf = np.array([om[1, 2], -om[0, 2], om[0, 1]])
    cols = E.matrix(p)
    v = cols @ kf
    v = v / np.linalg.norm(v)
    w_handle = getattr(model, "w_handle", None)
    oriented = False
    if w_handle is not None:
        w = w_handle(p)
        d = float(v @ w)
        if abs(d) > 0.1 * np.linalg.norm(w):
            v = v if d > 0 else -v
            oriented = True
    if not oriented:
        nz = np.flatnonzero(np.abs(v) > 1e-10)
        if nz.size and v[nz[0]] < 0:
            v = -v
    return TangentVector(p, tuple(v))


@dataclass(frozen=True)
class EvenContactReport:
    passed: bool
    tol: float
    margins: tuple          # per-sample largest |entry| of the transverse form
    worst_margin: float
    worst_sample: tuple

    def as_dict(self):
        return {
            "passed": self.passed,
            "tol": self.tol,
            "worst_margin": self.worst_margin,
            "worst_sample": list(self.worst_sample),
            "margins": list(self.margins),
        }


def is_even_contact(model, E: DistributionSpec, samples, tol=1e-6) -> EvenContactReport:
    """Pass iff the transverse form is nonzero with margin > tol everywhere."""
    if E.rank != 3:
        raise GeometryError("even contact check needs rank 3")
    margins = []
    for p in samples:
        om = transverse_form(model, E, p).array
        margins.append(float(np.abs(om).max()))
    worst = int(np.argmin(margins))
    return EvenContactReport(
        passed=bool(min(margins) > tol),
        tol=tol,
        margins=tuple(margins),
        worst_margin=margins[worst],
        worst_sample=tuple(samples[worst].coords),
    )


def induced_even_contact_basis(model, D: DistributionSpec, p: Point):
    """Columns (X, Y, [X,Y]) for a rank-2 distribution at p."""
    if D.rank != 2:
        raise GeometryError("need a rank-2 distribution")
    x = D.frame[0](p)
    y = D.frame[1](p)
    b = model.bracket(D.frame[0], D.frame[1], p)
    return np.column_stack([x, y, b])


def subspace_distance(A, B):
    """Largest principal angle (radians) between column spans of A, B."""
    qa, _ = np.linalg.qr(A)
    qb, _ = np.linalg.qr(B)
    sv = np.linalg.svd(qa.T @ qb, compute_uv=False)
    sv = np.clip(sv, -1.0, 1.0)
    return float(np.arccos(sv.min()))


def orientation_agreement(model, D1: DistributionSpec, D2: DistributionSpec,
                          p: Point, tol=1e-6) -> int:
    """Compare the orientations the two planes induce on their common E.

    +1 if the bases (X1, Y1, [X1,Y1]) and (X2, Y2, [X2,Y2]) of the
    common 3-space have positive relative determinant, -1 otherwise.
    """
    b1 = induced_even_contact_basis(model, D1, p)
    b2 = induced_even_contact_basis(model, D2, p)
    if subspace_distance(b1, b2) > tol:
        raise GeometryError(
            "induced even contact structures differ beyond tolerance"
        )
    rel = np.linalg.lstsq(b1, b2, rcond=None)[0]
    det = np.linalg.det(rel)
    if det == 0.0:
        raise RankError("degenerate induced bases")
    return 1 if det > 0 else -1
