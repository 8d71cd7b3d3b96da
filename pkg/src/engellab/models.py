"""Concrete 4-manifold backends.

Three kinds of model:

* `LieAlgebraModel` - structure constants of a 4-dimensional Lie algebra
  with designated frame roles; brackets and holonomy are exact.
* `ChartModel` - vector fields given by parsed coordinate expressions on
  a box (with optional periodic coordinates); brackets and holonomy go
  through derivatives of the expressions or central differences.
* `SuspensionModel` - a 3-dimensional base algebra with a designated
  Anosov field X, extended by a central circle direction, with flow
  field W = X + d/dtheta.

`builtin` provides the three reference models ("sol", "prolongation",
"sl2-suspension") together with their declared distributions, and
`load_model` ingests the JSON model-file format.
"""

from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np
from scipy.linalg import expm

from .expressions import FieldExpression, ParseError
from .geometry import (
    DistributionSpec,
    DomainError,
    FieldHandle,
    GeometryError,
    Point,
    combine,
)

TWO_PI = 2.0 * math.pi

JACOBI_TOL = 1e-9
ANTISYM_TOL = 1e-12


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Lie algebra backend


class LieAlgebraModel:
    """4-dimensional Lie algebra with left-invariant frame fields.

    All tangent data lives in the frame basis; points carry coordinates
    only for bookkeeping (left-invariant quantities do not depend on
    them).  Brackets, holonomy and divergence are exact.
    """

    kind = "lie"
    homogeneous = True

    def __init__(self, constants, names=None, periods=None):
        c = np.asarray(constants, dtype=float)
        if c.shape != (4, 4, 4):
            raise ModelError(f"structure constants must be 4x4x4, got {c.shape}")
        if not np.isfinite(c).all():
            raise ModelError("non-finite structure constants")
        anti = np.abs(c + np.transpose(c, (1, 0, 2))).max()
        if anti > ANTISYM_TOL:
            raise ModelError(
                f"structure constants not antisymmetric (residual {anti:.3e})"
            )
        res, triple = _jacobi_residual(c)
        if res > JACOBI_TOL:
            raise ModelError(
                f"Jacobi identity fails on basis triple {triple} "
                f"(residual {res:.3e})"
            )
        self.constants = c
        self.jacobi_residual = res
        self.names = list(names) if names else [f"e{i}" for i in range(4)]
        if len(self.names) != 4:
            raise ModelError("need 4 basis names")
        self.periods = list(periods) if periods else [None] * 4
        self.distributions = {}
        self.w_handle = None
        self.E = None
        self.quotient = None
        self.chart_twin = None
        self._handles = {
            name: FieldHandle(name, None, coeffs=tuple(np.eye(4)[i]))
            for i, name in enumerate(self.names)
        }

    # -- points ------------------------------------------------------------
    def point(self, coords=(0.0, 0.0, 0.0, 0.0)) -> Point:
        coords = [float(v) for v in coords]
        for i, per in enumerate(self.periods):
            if per is not None:
                coords[i] = coords[i] % per
        return Point(tuple(coords))

    def default_samples(self, n=5, rng=None):
        rng = rng or np.random.default_rng(0)
        pts = []
        for _ in range(n):
            c = rng.uniform(-1.0, 1.0, size=4)
            pts.append(self.point(c))
        return pts

    # -- fields ------------------------------------------------------------
    def handle(self, name) -> FieldHandle:
        if name in self._handles:
            return self._handles[name]
        coeffs = self._parse_combo(name)
        h = FieldHandle(name, None, coeffs=tuple(coeffs))
        self._handles[name] = h
        return h

    def handle_from_coeffs(self, name, coeffs) -> FieldHandle:
        h = FieldHandle(name, None, coeffs=tuple(float(v) for v in coeffs))
        self._handles[name] = h
        return h

    def _parse_combo(self, text):
        """Resolve simple 'A+B' / 'A-B' combinations of basis names."""
        for sep, sign in (("+", 1.0), ("-", -1.0)):
            if sep in text:
                left, right = text.split(sep, 1)
                left, right = left.strip(), right.strip()
                if left in self._handles and right in self._handles:
                    return (
                        np.asarray(self._handles[left].coeffs)
                        + sign * np.asarray(self._handles[right].coeffs)
                    )
        raise ModelError(f"unknown field '{text}'")

    def frame_matrix(self, p: Point):
        return np.eye(4)

    # -- algebraic operations ----------------------------------------------
    def bracket_coeffs(self, a, b):
        return np.einsum("i,j,ijk->k", np.asarray(a), np.asarray(b), self.constants)

    def bracket(self, X: FieldHandle, Y: FieldHandle, p: Point):
        if X.coeffs is None or Y.coeffs is None:
            raise ModelError(
                "algebra backend brackets need constant frame coefficients; "
                "use a chart realization for point-dependent fields"
            )
        return self.bracket_coeffs(X.coeffs, Y.coeffs)

    def ad_matrix(self, coeffs):
        """Matrix of ad_V: column j holds [V, e_j] in frame components."""
        v = np.asarray(coeffs, dtype=float)
        return np.einsum("a,ajk->kj", v, self.constants)

    def flow_point(self, p: Point, t: float, coeffs=None) -> Point:
        """Exact orbit bookkeeping: left-invariant data is point-free."""
        coords = list(p.coords)
        w = np.asarray(coeffs if coeffs is not None else self.w_handle.coeffs)
        for i, per in enumerate(self.periods):
            if per is not None:
                coords[i] = (coords[i] + t * w[i]) % per
        return Point(tuple(coords))

    # -- declarations -------------------------------------------------------
    def declare(self, w, E_names, quotient_names, distributions=None):
        self.w_handle = self.handle(w) if isinstance(w, str) else w
        self.E = DistributionSpec(3, tuple(self.handle(n) if isinstance(n, str) else n
                                           for n in E_names), name="E")
        self.quotient = tuple(self.handle(n) if isinstance(n, str) else n
                              for n in quotient_names)
        self.distributions = {"E": self.E}
        for dname, frame in (distributions or {}).items():
            hs = tuple(self.handle(n) if isinstance(n, str) else n for n in frame)
            self.distributions[dname] = DistributionSpec(len(hs), hs, name=dname)
        return self


def _jacobi_residual(c):
    """Max Jacobi residual over all basis triples, plus the worst triple."""
    comp = np.einsum("abm,mck->abck", c, c)
    res = (
        comp
        + np.transpose(comp, (1, 2, 0, 3))
        + np.transpose(comp, (2, 0, 1, 3))
    )
    worst = np.unravel_index(np.argmax(np.abs(res)), res.shape)
    return float(np.abs(res).max()), tuple(int(i) for i in worst[:3])


def make_lie_model(constants, frame_roles=None, names=None) -> LieAlgebraModel:
    """Validate structure constants and designate frame roles.

    frame_roles maps role labels (at least "W") to basis names or
    indices; "E" and "quotient" entries declare the even contact frame.
    """
    model = LieAlgebraModel(constants, names=names)
    roles = dict(frame_roles or {})

    def resolve(v):
        return model.names[v] if isinstance(v, int) else v

    if "W" in roles:
        w = resolve(roles["W"])
        e_names = [resolve(n) for n in roles.get("E", [])] or None
        quot = [resolve(n) for n in roles.get("quotient", [])] or None
        if e_names and quot:
            model.declare(w, e_names, quot)
        else:
            model.w_handle = model.handle(w)
    return model


# ---------------------------------------------------------------------------
# Suspension backend


class SuspensionModel(LieAlgebraModel):
    """Mapping-torus model: base algebra x central circle, W = X + dtheta.

    Realized on N x S^1 via the standard untwisting of the time-one
    mapping torus; the circle coordinate is the last one.
    """

    kind = "suspension"

    def __init__(self, base_constants, base_names, anosov, circle_name="theta",
                 period=TWO_PI):
        b = np.asarray(base_constants, dtype=float)
        if b.shape != (3, 3, 3):
            raise ModelError(f"base constants must be 3x3x3, got {b.shape}")
        c = np.zeros((4, 4, 4))
        c[:3, :3, :3] = b
        names = list(base_names) + [circle_name]
        super().__init__(c, names=names, periods=[None, None, None, period])
        if anosov not in base_names:
            raise ModelError(f"anosov role '{anosov}' not among base names")
        x_idx = names.index(anosov)
        w = np.eye(4)[x_idx] + np.eye(4)[3]
        self.w_handle = self.handle_from_coeffs("W", w)
        self.circle_index = 3


# ---------------------------------------------------------------------------
# Chart backend


class _ChartField:
    """Compiled coordinate components of one named field."""

    def __init__(self, name, exprs, variables):
        if len(exprs) != 4:
            raise ModelError(f"field '{name}' needs 4 component expressions")
        self.name = name
        self.exprs = [
            e if isinstance(e, FieldExpression) else FieldExpression(e, variables)
            for e in exprs
        ]

    def __call__(self, xs):
        return np.array([e(xs) for e in self.exprs])

    def jacobian(self, xs):
        return np.array([e.gradient(xs) for e in self.exprs])


class ChartModel:
    """Vector fields from parsed expressions on a coordinate box."""

    kind = "chart"
    homogeneous = False

    def __init__(self, coordinates, fields, frame, periods=None,
                 valid_region=None):
        self.coordinates = tuple(coordinates)
        if len(self.coordinates) != 4:
            raise ModelError("chart models are 4-dimensional")
        self.periods = list(periods) if periods else [None] * 4
        self.valid_region = (
            [tuple(b) for b in valid_region]
            if valid_region
            else [(-50.0, 50.0)] * 4
        )
        self.fields = {}
        for name, exprs in fields.items():
            self.fields[name] = _ChartField(name, exprs, self.coordinates)
        self.frame_names = list(frame)
        if len(self.frame_names) != 4:
            raise ModelError("need 4 frame fields")
        for n in self.frame_names:
            if n not in self.fields:
                raise ModelError(f"frame field '{n}' not defined")
        self.names = self.frame_names
        self._handles = {}
        self.distributions = {}
        self.w_handle = None
        self.E = None
        self.quotient = None
        self.chart_twin = None

    # -- points -------------------------------------------------------------
    def point(self, coords) -> Point:
        coords = [float(v) for v in coords]
        for i, per in enumerate(self.periods):
            if per is not None:
                coords[i] = coords[i] % per
        return Point(tuple(coords))

    def check_region(self, xs, context="evaluation"):
        for i, (lo, hi) in enumerate(self.valid_region):
            if self.periods[i] is not None:
                continue
            if not (lo <= xs[i] <= hi):
                raise DomainError(
                    f"{context} left the valid region in coordinate "
                    f"'{self.coordinates[i]}' ({xs[i]:.6g} not in [{lo}, {hi}])"
                )

    def default_samples(self, n=5, rng=None):
        rng = rng or np.random.default_rng(0)
        pts = []
        for _ in range(n):
            c = []
            for i, per in enumerate(self.periods):
                if per is not None:
                    c.append(rng.uniform(0.0, per))
                else:
                    c.append(rng.uniform(-0.5, 0.5))
            pts.append(self.point(c))
        return pts

    # -- fields -------------------------------------------------------------
    def frame_matrix(self, p: Point):
        xs = p.array
        self.check_region(xs)
        return np.column_stack([self.fields[n](xs) for n in self.frame_names])

    def handle(self, name, scheme="analytic", fd_step=1e-4) -> FieldHandle:
        key = (name, scheme, fd_step)
        if key in self._handles:
            return self._handles[key]
        if name not in self.fields:
            raise ModelError(f"unknown field '{name}'")
        fld = self.fields[name]
        if name in self.frame_names:
            coeffs = tuple(np.eye(4)[self.frame_names.index(name)])
            h = FieldHandle(name, None, coeffs=coeffs, coord_field=fld,
                            coord_jacobian=fld.jacobian, scheme=scheme,
                            fd_step=fd_step)
        else:
            def ev(p, _f=fld, _m=self):
                return np.linalg.solve(_m.frame_matrix(p), _f(p.array))

            h = FieldHandle(name, ev, coord_field=fld,
                            coord_jacobian=fld.jacobian, scheme=scheme,
                            fd_step=fd_step)
        self._handles[key] = h
        return h

    def coord_components(self, handle: FieldHandle, xs):
        """Coordinate components of a handle at raw coordinates xs."""
        if handle.coord_field is not None:
            return np.asarray(handle.coord_field(xs))
        p = self.point(xs)
        return self.frame_matrix(p) @ handle(p)

    def coord_jacobian(self, handle: FieldHandle, xs):
        if handle.scheme == "analytic" and handle.coord_jacobian is not None:
            return np.asarray(handle.coord_jacobian(xs))
        h = handle.fd_step
        jac = np.zeros((4, 4))
        for j in range(4):
            dx = np.zeros(4)
            dx[j] = h
            self.check_region(xs + dx, "difference stencil")
            self.check_region(xs - dx, "difference stencil")
            jac[:, j] = (
                self.coord_components(handle, xs + dx)
                - self.coord_components(handle, xs - dx)
            ) / (2.0 * h)
        return jac

    def bracket(self, X: FieldHandle, Y: FieldHandle, p: Point):
        xs = p.array
        self.check_region(xs, "bracket")
        a = self.coord_components(X, xs)
        b = self.coord_components(Y, xs)
        ja = self.coord_jacobian(X, xs)
        jb = self.coord_jacobian(Y, xs)
        br = jb @ a - ja @ b
        return np.linalg.solve(self.frame_matrix(p), br)

    def bracket_handle(self, X: FieldHandle, Y: FieldHandle, name=None) -> FieldHandle:
        """[X, Y] as a new handle (for nested Engel brackets)."""
        def cf(xs, _m=self, _x=X, _y=Y):
            a = _m.coord_components(_x, xs)
            b = _m.coord_components(_y, xs)
            ja = _m.coord_jacobian(_x, xs)
            jb = _m.coord_jacobian(_y, xs)
            return jb @ a - ja @ b

        def ev(p, _m=self, _cf=cf):
            return np.linalg.solve(_m.frame_matrix(p), _cf(p.array))

        return FieldHandle(name or f"[{X.name},{Y.name}]", ev, coord_field=cf,
                           scheme="fd", fd_step=max(X.fd_step, Y.fd_step))

    def declare(self, w, E_names, quotient_names, distributions=None):
        self.w_handle = self.handle(w) if isinstance(w, str) else w
        self.E = DistributionSpec(3, tuple(self.handle(n) if isinstance(n, str) else n
                                           for n in E_names), name="E")
        self.quotient = tuple(self.handle(n) if isinstance(n, str) else n
                              for n in quotient_names)
        self.distributions = {"E": self.E}
        for dname, frame in (distributions or {}).items():
            hs = tuple(self.handle(n) if isinstance(n, str) else n for n in frame)
            self.distributions[dname] = DistributionSpec(len(hs), hs, name=dname)
        return self


# ---------------------------------------------------------------------------
# Exact holonomy and divergence


def exact_holonomy(model, t: float):
    """Pushforward of the invariant frame under the time-t flow of W.

    Equals exp(-t * ad_W) in the frame basis; for suspensions ad_W acts
    on the base algebra and fixes the circle direction.
    """
    if not isinstance(model, LieAlgebraModel):
        raise ModelError("exact holonomy needs an algebra or suspension backend")
    if model.w_handle is None or model.w_handle.coeffs is None:
        raise ModelError("model has no designated W")
    ad = model.ad_matrix(model.w_handle.coeffs)
    return expm(-t * ad)


def divergence(model, W: FieldHandle, p: Point) -> float:
    """Divergence of W with respect to the frame volume form.

    Zero means the holonomy of W preserves the frame volume.
    """
    if isinstance(model, LieAlgebraModel):
        if W.coeffs is None:
            raise ModelError("algebra backend needs constant coefficients")
        return float(-np.trace(model.ad_matrix(W.coeffs)))
    xs = p.array
    jac = model.coord_jacobian(W, xs)
    div = float(np.trace(jac))
    # frame-volume correction: subtract W . grad(log det frame)
    h = 1e-5
    w = model.coord_components(W, xs)
    for j in range(4):
        dx = np.zeros(4)
        dx[j] = h
        ld_p = math.log(abs(np.linalg.det(model.frame_matrix(model.point(xs + dx)))))
        ld_m = math.log(abs(np.linalg.det(model.frame_matrix(model.point(xs - dx)))))
        div -= w[j] * (ld_p - ld_m) / (2.0 * h)
    return div


def parse_field_expression(text, variables=("w", "x", "y", "z")) -> FieldExpression:
    """Parse one scalar component expression (position-reporting errors)."""
    return FieldExpression(text, variables)


# ---------------------------------------------------------------------------
# Built-in models

SOL_NAMES = ["X", "Y", "Z", "W"]


def _sol_constants():
    c = np.zeros((4, 4, 4))

    def setb(i, j, k, v):
        c[i, j, k] = v
        c[j, i, k] = -v

    setb(0, 1, 2, 1.0)    # [X, Y] = Z
    setb(3, 0, 0, -1.0)   # [W, X] = -X
    setb(3, 1, 1, 1.0)    # [W, Y] = Y
    return c


def _sol_chart():
    fields = {
        "X": ["exp(-w)", "0", "0", "0"],
        "Y": ["0", "exp(w)", "x*exp(w)", "0"],
        "Z": ["0", "0", "1", "0"],
        "W": ["0", "0", "0", "1"],
        "X+Y": ["exp(-w)", "exp(w)", "x*exp(w)", "0"],
        "X-Y": ["exp(-w)", "-exp(w)", "-(x*exp(w))", "0"],
    }
    m = ChartModel(("x", "y", "z", "w"), fields, ["X", "Y", "Z", "W"])
    m.declare("W", ["X", "Y", "W"], ["X", "Y"],
              {"D+": ["W", "X+Y"], "D-": ["W", "X-Y"]})
    return m


def _builtin_sol():
    m = LieAlgebraModel(_sol_constants(), names=SOL_NAMES)
    m.declare("W", ["X", "Y", "W"], ["X", "Y"],
              {"D+": ["W", "X+Y"], "D-": ["W", "X-Y"]})
    m.chart_twin = _sol_chart()
    return m


def _builtin_prolongation():
    fields = {
        "X": ["1", "0", "0", "0"],
        "Y": ["0", "1", "x", "0"],
        "Z": ["0", "0", "1", "0"],
        "T": ["0", "0", "0", "1"],
        "L+": ["cos(t)", "sin(t)", "x*sin(t)", "0"],
        "L-": ["cos(t)", "-sin(t)", "-(x*sin(t))", "0"],
    }
    m = ChartModel(("x", "y", "z", "t"), fields, ["X", "Y", "Z", "T"],
                   periods=[None, None, None, TWO_PI])
    m.declare("T", ["X", "Y", "T"], ["X", "Y"],
              {"D+": ["T", "L+"], "D-": ["T", "L-"]})
    return m


SL2_BASE_NAMES = ["U+", "U-", "X"]


def _sl2_base_constants():
    b = np.zeros((3, 3, 3))

    def setb(i, j, k, v):
        b[i, j, k] = v
        b[j, i, k] = -v

    setb(2, 0, 0, 1.0)    # [X, U+] = U+
    setb(2, 1, 1, -1.0)   # [X, U-] = -U-
    setb(0, 1, 2, 2.0)    # [U+, U-] = 2X
    return b


def _sl2_chart():
    fields = {
        "U+": ["0", "0", "1", "0"],
        "U-": ["exp(-x)", "2*v", "-(v^2)", "0"],
        "X": ["0", "1", "-v", "0"],
        "TH": ["0", "0", "0", "1"],
        "W": ["0", "1", "-v", "1"],
    }
    m = ChartModel(("u", "x", "v", "th"), fields, ["U+", "U-", "X", "TH"],
                   periods=[None, None, None, TWO_PI])
    m.declare("W", ["U+", "U-", "W"], ["U+", "U-"])
    return m


def _builtin_sl2_suspension():
    m = SuspensionModel(_sl2_base_constants(), SL2_BASE_NAMES, anosov="X")
    m.E = DistributionSpec(3, (m.handle("U+"), m.handle("U-"), m.w_handle),
                           name="E")
    m.quotient = (m.handle("U+"), m.handle("U-"))
    m.distributions = {"E": m.E}
    m.chart_twin = _sl2_chart()
    return m


BUILTIN_NAMES = ("sol", "prolongation", "sl2-suspension")


def builtin(name: str):
    """Construct one of the reference models with declared distributions."""
    if name == "sol":
        return _builtin_sol()
    if name == "prolongation":
        return _builtin_prolongation()
    if name == "sl2-suspension":
        return _builtin_sl2_suspension()
    raise ModelError(
        f"unknown builtin '{name}' (expected one of {', '.join(BUILTIN_NAMES)})"
    )


# ---------------------------------------------------------------------------
# Model-file ingestion

_COMMON_KEYS = {"type", "dimension", "roles", "distributions", "quotient"}
_ALLOWED_KEYS = {
    "lie": _COMMON_KEYS | {"constants", "names"},
    "chart": _COMMON_KEYS | {"fields", "coordinates", "frame", "periods",
                             "valid_region"},
    "suspension": _COMMON_KEYS | {"constants", "names", "circle"},
}


def _schema_error(pointer, message):
    raise ModelError(f"model file invalid at {pointer}: {message}")


def _reject_non_finite(value):
    raise ModelError(f"model file contains non-finite number '{value}'")


def model_from_dict(doc):
    if not isinstance(doc, dict):
        _schema_error("/", "document must be an object")
    mtype = doc.get("type")
    if mtype not in _ALLOWED_KEYS:
        _schema_error("/type", f"expected one of {sorted(_ALLOWED_KEYS)}, got {mtype!r}")
    for key in doc:
        if key not in _ALLOWED_KEYS[mtype]:
            _schema_error(f"/{key}", f"unknown key for type '{mtype}'")
    if doc.get("dimension") != 4:
        _schema_error("/dimension", f"only dimension 4 is supported, got "
                      f"{doc.get('dimension')!r}")

    roles = doc.get("roles", {})
    dists = doc.get("distributions", {})
    quotient = doc.get("quotient")

    if mtype == "lie":
        if "constants" not in doc:
            _schema_error("/constants", "required for type 'lie'")
        model = LieAlgebraModel(doc["constants"], names=doc.get("names"))
        if "W" not in roles:
            _schema_error("/roles/W", "a designated W is required")
        w = roles["W"]
        w = model.names[w] if isinstance(w, int) else w
        e_names = dists.get("E")
        if e_names and quotient:
            model.declare(w, e_names, quotient,
                          {k: v for k, v in dists.items() if k != "E"})
        else:
            model.w_handle = model.handle(w)
            for dname, frame in dists.items():
                hs = tuple(model.handle(n) for n in frame)
                model.distributions[dname] = DistributionSpec(len(hs), hs,
                                                              name=dname)
        return model

    if mtype == "suspension":
        if "constants" not in doc:
            _schema_error("/constants", "required for type 'suspension'")
        circle = doc.get("circle", {})
        anosov = roles.get("anosov")
        if anosov is None:
            _schema_error("/roles/anosov", "a designated Anosov field is required")
        model = SuspensionModel(
            doc["constants"],
            doc.get("names", ["e0", "e1", "e2"]),
            anosov=anosov,
            circle_name=circle.get("name", "theta"),
            period=circle.get("period", TWO_PI),
        )
        if quotient:
            model.quotient = tuple(model.handle(n) for n in quotient)
        e_names = dists.get("E")
        if e_names:
            hs = tuple(model.w_handle if n == "W" else model.handle(n)
                       for n in e_names)
            model.E = DistributionSpec(3, hs, name="E")
            model.distributions["E"] = model.E
        return model

    # chart
    coords = doc.get("coordinates")
    if not coords:
        _schema_error("/coordinates", "required for type 'chart'")
    fields = doc.get("fields")
    if not isinstance(fields, dict):
        _schema_error("/fields", "required mapping name -> 4 expressions")
    frame = doc.get("frame")
    if not frame:
        _schema_error("/frame", "required list of 4 frame field names")
    parsed = {}
    for name, exprs in fields.items():
        if not isinstance(exprs, list) or len(exprs) != 4:
            _schema_error(f"/fields/{name}", "expected 4 component expressions")
        try:
            parsed[name] = exprs
            for k, e in enumerate(exprs):
                FieldExpression(e, coords)
        except ParseError as exc:
            _schema_error(f"/fields/{name}/{k}", str(exc))
    model = ChartModel(coords, parsed, frame, periods=doc.get("periods"),
                       valid_region=doc.get("valid_region"))
    if "W" in roles:
        e_names = dists.get("E")
        if e_names and quotient:
            model.declare(roles["W"], e_names, quotient,
                          {k: v for k, v in dists.items() if k != "E"})
        else:
            model.w_handle = model.handle(roles["W"])
    return model


def load_model(path):
    """Load and validate a model-file JSON document."""
    with open(path) as fh:
        try:
            doc = json.load(fh, parse_constant=_reject_non_finite)
        except json.JSONDecodeError as exc:
            raise ModelError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(doc)


def shipped_model_path(name):
    """Path of a packaged model file (sol.json etc.)."""
    return resources.files("engellab").joinpath("data", f"{name}.json")
