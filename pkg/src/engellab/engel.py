"""Engel and bi-Engel verification, flow mollification and construction.

`is_engel` checks the bracket-generating ladder of a rank-2 plane
field, `certify_bi_engel` the shared-structure / opposite-orientation /
one-dimensional-intersection conditions of a pair, and
`construct_bi_engel` builds such a pair from a weakly hyperbolic
splitting by convolving the splitting sections along the flow.
Rotation profiles quantify how far a transported plane turns around the
characteristic direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .dynamics import (
    ProjectivePoint,
    holonomy_series,
    identity_holonomy,
    plane_to_projective,
    projective_separation,
    quotient_frame,
)
from .geometry import (
    DistributionSpec,
    FieldHandle,
    GeometryError,
    Point,
    characteristic_line,
    combine,
    induced_even_contact_basis,
    orientation_agreement,
    subspace_distance,
)
from .hyperbolicity import (
    CertificateRefused,
    QuotientMetric,
    SplittingEstimate,
    certify_weak_hyperbolicity,
)
from .models import LieAlgebraModel

DEFAULT_KAPPA = 30.0
DEFAULT_QUADRATURE_STEPS = 61


class ConstructionError(GeometryError):
    pass


# ---------------------------------------------------------------------------
# Engel verification


@dataclass(frozen=True)
class EngelReport:
    passed: bool
    tol: float
    samples: tuple            # sample coordinates
    rank3_margins: tuple      # smallest retained sv of (X, Y, [X,Y])
    rank4_margins: tuple      # smallest retained sv of the 5-vector span
    failures: tuple           # (sample coords, reason)

    def as_dict(self):
        return {
            "passed": self.passed,
            "tol": self.tol,
            "samples": [list(s) for s in self.samples],
            "rank3_margins": list(self.rank3_margins),
            "rank4_margins": list(self.rank4_margins),
            "failures": [{"sample": list(s), "reason": r}
                         for s, r in self.failures],
        }


def _bracket_handle(model, X: FieldHandle, Y: FieldHandle) -> FieldHandle:
    if isinstance(model, LieAlgebraModel):
        coeffs = model.bracket_coeffs(X.coeffs, Y.coeffs)
        return FieldHandle(f"[{X.name},{Y.name}]", None, coeffs=tuple(coeffs))
    return model.bracket_handle(X, Y)


def is_engel(model, D: DistributionSpec, samples, tol: float = 1e-6):
    """Check [D,D] has rank 3 and [[D,D],[D,D]] has rank 4 at samples.

    Returns (EngelReport, induced E DistributionSpec) so downstream
    checks can reuse the frame (X, Y, [X,Y]).
    """
    if D.rank != 2:
        raise GeometryError("Engel check needs a rank-2 distribution")
    X, Y = D.frame
    B = _bracket_handle(model, X, Y)
    BX = _bracket_handle(model, X, B)
    BY = _bracket_handle(model, Y, B)
    r3, r4, fails = [], [], []
    for p in samples:
        v = [X.at(p), Y.at(p), B.at(p)]
        m3 = float(np.linalg.svd(
            np.column_stack([t.array for t in v]), compute_uv=False)[-1])
        r3.append(m3)
        v4 = v + [BX.at(p), BY.at(p)]
        m4 = float(np.linalg.svd(
            np.column_stack([t.array for t in v4]), compute_uv=False)[-1])
        r4.append(m4)
        if m3 <= tol:
            fails.append((tuple(p.coords), f"rank-3 margin {m3:.3e} <= tol"))
        elif m4 <= tol:
            fails.append((tuple(p.coords), f"rank-4 margin {m4:.3e} <= tol"))
    report = EngelReport(
        passed=not fails,
        tol=tol,
        samples=tuple(tuple(p.coords) for p in samples),
        rank3_margins=tuple(r3),
        rank4_margins=tuple(r4),
        failures=tuple(fails),
    )
    induced = DistributionSpec(3, (X, Y, B), name=f"[{D.name or 'D'} induced E]")
    return report, induced


def characteristic_containment(model, D: DistributionSpec,
                               E: DistributionSpec, samples) -> float:
    """Max angle between the characteristic line of E and the plane D."""
    worst = 0.0
    for p in samples:
        w = characteristic_line(model, E, p).array
        q, _ = np.linalg.qr(D.matrix(p))
        ortho = w - q @ (q.T @ w)
        worst = max(worst, math.asin(min(1.0, float(np.linalg.norm(ortho)))))
    return worst


# ---------------------------------------------------------------------------
# Bi-Engel certification


@dataclass(frozen=True)
class BiEngelCertificate:
    passed: bool
    tol: float
    shared_e_residual: float
    orientation_product: int         # worst-case sign over the grid
    intersection_margin: float       # min projective angle of the two legs mod W
    coincidence_witnesses: tuple     # sample coords where the margin collapses
    engel_plus: EngelReport
    engel_minus: EngelReport
    reasons: tuple

    def as_dict(self):
        return {
            "passed": self.passed,
            "tol": self.tol,
            "shared_e_residual": self.shared_e_residual,
            "orientation_product": self.orientation_product,
            "intersection_margin": self.intersection_margin,
            "coincidence_witnesses": [list(w) for w in
                                      self.coincidence_witnesses],
            "engel_plus": self.engel_plus.as_dict(),
            "engel_minus": self.engel_minus.as_dict(),
            "reasons": list(self.reasons),
        }


def _plane_line_mod_w(model, D: DistributionSpec, p: Point) -> ProjectivePoint:
    return plane_to_projective(model, identity_holonomy(model, p), D)


def _refine_coincidence(model, D_plus, D_minus, p: Point):
    """Locally minimize the intersection margin along periodic coordinates."""
    periodic = [i for i, per in enumerate(model.periods) if per is not None]
    if not periodic:
        return p
    idx = periodic[0]
    base = list(p.coords)

    def margin(v):
        c = list(base)
        c[idx] = v
        q = model.point(c)
        return projective_separation(_plane_line_mod_w(model, D_plus, q),
                                     _plane_line_mod_w(model, D_minus, q))

    v0 = base[idx]
    res = minimize_scalar(margin, bracket=None,
                          bounds=(v0 - 0.5, v0 + 0.5), method="bounded",
                          options={"xatol": 1e-10})
    base[idx] = float(res.x)
    return model.point(base)


def certify_bi_engel(model, D_plus: DistributionSpec, D_minus: DistributionSpec,
                     samples, tol: float | None = None) -> BiEngelCertificate:
    """Shared E, opposite orientations, one-dimensional intersection."""
    if tol is None:
        tol = 1e-6 if isinstance(model, LieAlgebraModel) else 1e-3
    rep_p, _ = is_engel(model, D_plus, samples)
    rep_m, _ = is_engel(model, D_minus, samples)
    reasons = []
    if not rep_p.passed:
        reasons.append("first plane fails the Engel check")
    if not rep_m.passed:
        reasons.append("second plane fails the Engel check")

    shared = 0.0
    orient_worst = -1
    margin = math.inf
    witnesses = []
    orient_fail = False
    for p in samples:
        b1 = induced_even_contact_basis(model, D_plus, p)
        b2 = induced_even_contact_basis(model, D_minus, p)
        shared = max(shared, subspace_distance(b1, b2))
        try:
            sign = orientation_agreement(model, D_plus, D_minus, p, tol=10 * tol)
            if sign != -1:
                orient_fail = True
                orient_worst = sign
        except GeometryError:
            orient_fail = True
        m = projective_separation(_plane_line_mod_w(model, D_plus, p),
                                  _plane_line_mod_w(model, D_minus, p))
        margin = min(margin, m)
        if m <= tol:
            witnesses.append(tuple(_refine_coincidence(
                model, D_plus, D_minus, p).coords))
    if shared >= tol:
        reasons.append(f"induced even contact structures differ "
                       f"(residual {shared:.3e})")
    if orient_fail:
        reasons.append("induced orientations do not oppose everywhere")
    if margin <= tol:
        reasons.append(f"intersection margin collapses "
                       f"({len(witnesses)} coincidence witnesses)")
    return BiEngelCertificate(
        passed=not reasons,
        tol=tol,
        shared_e_residual=shared,
        orientation_product=orient_worst if not orient_fail else +1,
        intersection_margin=margin,
        coincidence_witnesses=tuple(witnesses),
        engel_plus=rep_p,
        engel_minus=rep_m,
        reasons=tuple(reasons),
    )


# ---------------------------------------------------------------------------
# Mollification along the flow


def _bump_weights(kappa: float, quadrature_steps: int):
    """Simpson nodes/weights for the scaled unit-mass bump on [-1/k, 1/k]."""
    n = quadrature_steps if quadrature_steps % 2 == 1 else quadrature_steps + 1

    def bump(s):
        if abs(s) >= 1.0:
            return 0.0
        return math.exp(-1.0 / (1.0 - s * s))

    # normalization of the unscaled bump, fixed high-resolution Simpson
    m = 4001
    xs = np.linspace(-1.0, 1.0, m)
    vals = np.array([bump(x) for x in xs])
    w = np.ones(m)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    c = 1.0 / float((w * vals).sum() * (xs[1] - xs[0]) / 3.0)

    nodes = np.linspace(-1.0 / kappa, 1.0 / kappa, n)
    hvals = np.array([kappa * c * bump(kappa * s) for s in nodes])
    sw = np.ones(n)
    sw[1:-1:2] = 4.0
    sw[2:-1:2] = 2.0
    sw *= (nodes[1] - nodes[0]) / 3.0
    return nodes, sw * hvals


def mollify_along_flow(model, W: FieldHandle, X: FieldHandle,
                       kappa: float = DEFAULT_KAPPA,
                       quadrature_steps: int = DEFAULT_QUADRATURE_STEPS,
                       check_samples=None, step: float = 1e-3) -> FieldHandle:
    """Convolve X along the flow of W with a compactly supported bump.

    Evaluates int h_k(s) (frame transport of X(phi_{-s} p) to p) ds by
    composite Simpson.  The result must stay a section of E transverse
    to W at the check samples, else the handle is refused.
    """
    if kappa <= 0:
        raise ConstructionError("mollifier width must be positive")
    nodes, weights = _bump_weights(kappa, quadrature_steps)

    if isinstance(model, LieAlgebraModel) and X.coeffs is not None:
        from scipy.linalg import expm
        ad = model.ad_matrix(W.coeffs)
        kernel = sum(w * expm(-s * ad) for s, w in zip(nodes, weights))
        out = FieldHandle(f"mollified({X.name})", None,
                          coeffs=tuple(kernel @ np.asarray(X.coeffs)))
    else:
        inner = [(s, w) for s, w in zip(nodes, weights) if w != 0.0]

        def ev(p, _m=model, _W=W, _X=X, _nodes=inner, _step=step):
            maps = holonomy_series(_m, _W, p, [-s for s, _ in _nodes], _step)
            acc = np.zeros(4)
            for (s, w), H in zip(_nodes, maps):
                comps = _X(H.target)
                acc = acc + w * np.linalg.solve(H.full_array, comps)
            return acc

        out = FieldHandle(f"mollified({X.name})", ev)

    pts = list(check_samples) if check_samples is not None \
        else model.default_samples(3)
    for p in pts:
        qf = quotient_frame(model, p)
        red, resid = qf.reduce(out(p))
        scale = max(float(np.linalg.norm(out(p))), 1e-300)
        if resid / scale > 1e-6 or np.linalg.norm(red) / scale < 1e-8:
            raise ConstructionError(
                f"mollified section lost E-transversality at {p.coords}"
            )
    return out


# ---------------------------------------------------------------------------
# Forward construction


def construct_bi_engel(model, W: FieldHandle, splitting: SplittingEstimate,
                       kappa: float = DEFAULT_KAPPA,
                       quadrature_steps: int = DEFAULT_QUADRATURE_STEPS,
                       metric: QuotientMetric | None = None,
                       certificate=None, samples=None, step: float = 1e-3):
    """Planes span{W, Z+ + Z-} and span{W, Z+ - Z-} from a splitting.

    Z+- are the mollified unit sections of the splitting lines.  The
    splitting must certify weakly hyperbolic (c_hat > 0); the returned
    pair is re-verified with is_engel and certify_bi_engel.  Algebra
    backends only: the splitting sections are constant in the invariant
    frame there.
    """
    if not isinstance(model, LieAlgebraModel):
        raise ConstructionError(
            "construction needs an algebra backend (invariant splitting "
            "sections); realize chart models through their algebra twin"
        )
    if certificate is None:
        try:
            certificate = certify_weak_hyperbolicity(model, W, splitting,
                                                     metric=metric, step=step)
        except CertificateRefused as exc:
            raise ConstructionError(
                f"splitting does not certify weakly hyperbolic: {exc}"
            ) from exc
    if certificate.c_hat <= 0:
        raise ConstructionError("construction needs a positive rate c_hat")

    sample = splitting.samples[0]
    qf = quotient_frame(model, sample.point)
    cols = np.column_stack([qf.u1.array, qf.u2.array])
    g = (metric.matrix(0) if metric is not None else np.eye(2))
    sections = []
    for line in (sample.e_plus, sample.e_minus):
        v2 = line.vector
        v2 = v2 / math.sqrt(float(v2 @ g @ v2))
        amb = cols @ v2
        raw = FieldHandle("splitting-section", None, coeffs=tuple(amb))
        sections.append(mollify_along_flow(model, W, raw, kappa=kappa,
                                           quadrature_steps=quadrature_steps,
                                           step=step))
    z_plus, z_minus = sections
    leg_plus = combine("Z+ + Z-", [z_plus, z_minus], [1.0, 1.0])
    leg_minus = combine("Z+ - Z-", [z_plus, z_minus], [1.0, -1.0])
    d_plus = DistributionSpec(2, (W, leg_plus), name="constructed D+")
    d_minus = DistributionSpec(2, (W, leg_minus), name="constructed D-")

    pts = list(samples) if samples is not None else model.default_samples(5)
    for D in (d_plus, d_minus):
        report, _ = is_engel(model, D, pts)
        if not report.passed:
            raise ConstructionError(
                f"constructed plane fails the Engel check at "
                f"{report.failures[0][0]}; local rate gap "
                f"{certificate.alpha_gap:.6g}"
            )
    cert = certify_bi_engel(model, d_plus, d_minus, pts)
    if not cert.passed:
        raise ConstructionError(
            f"constructed pair fails certification: {'; '.join(cert.reasons)}"
        )
    return d_plus, d_minus


# ---------------------------------------------------------------------------
# Rotation profiles


@dataclass(frozen=True)
class RotationProfile:
    seed: tuple
    times: tuple
    angles: tuple              # unwrapped, radians
    total_variation: float
    variation_forward: float
    variation_backward: float
    monotone: bool
    full_turn: bool
    returns: tuple             # times t != 0 with theta(t) = theta(0) mod pi
    step: float

    def as_dict(self):
        return {
            "seed": list(self.seed),
            "total_variation": self.total_variation,
            "variation_forward": self.variation_forward,
            "variation_backward": self.variation_backward,
            "monotone": self.monotone,
            "full_turn": self.full_turn,
            "returns": list(self.returns),
            "step": self.step,
        }

    def rows(self):
        """CSV rows (t, theta, cumulative total variation)."""
        out = []
        acc = 0.0
        prev = None
        for t, a in zip(self.times, self.angles):
            if prev is not None:
                acc += abs(a - prev)
            prev = a
            out.append((t, a, acc))
        return out


def _unwrap(raw_angles):
    """Nearest-representative unwrapping mod pi; None if a jump is ambiguous."""
    out = [raw_angles[0]]
    for a in raw_angles[1:]:
        prev = out[-1]
        delta = (a - prev + math.pi / 2.0) % math.pi - math.pi / 2.0
        if abs(delta) >= math.pi / 2.0 - 1e-9:
            return None
        out.append(prev + delta)
    return out


def _leg_angles(model, W, D, p, T, dt, step):
    if T == 0.0:
        return [0.0], [plane_to_projective(
            model, identity_holonomy(model, p), D).angle]
    n = max(1, int(math.ceil(abs(T) / dt)))
    times = [T * (k + 1) / n for k in range(n)]
    maps = holonomy_series(model, W, p, times, step)
    angles = [plane_to_projective(model, H, D).angle for H in maps]
    return times, angles


def rotation_profile(model, W: FieldHandle, D: DistributionSpec, p: Point,
                     T: float = 20.0, step: float = 1e-3,
                     dt: float = 0.05, containment_tol: float = 1e-4) -> RotationProfile:
    """Unwrapped angle of the transported plane around W over [-T, T].

    The plane must contain W along the orbit; the sampling interval is
    halved until unwrapping is unambiguous (floor 1e-5)."""
    if model.E is not None:
        cont = characteristic_containment(model, D, model.E, [p])
        if cont > containment_tol:
            raise GeometryError(
                f"plane does not contain the characteristic direction "
                f"(angle {cont:.3e})"
            )
    theta0 = plane_to_projective(model, identity_holonomy(model, p), D).angle
    current_dt = dt
    while True:
        tf, af = _leg_angles(model, W, D, p, T, current_dt, step)
        tb, ab = _leg_angles(model, W, D, p, -T, current_dt, step)
        uf = _unwrap([theta0] + af)
        ub = _unwrap([theta0] + ab)
        if uf is not None and ub is not None:
            break
        current_dt /= 2.0
        if current_dt < 1e-5:
            raise GeometryError(
                "unwrapping ambiguous at the minimum step: refine inputs"
            )
    times = [-t for t in reversed(tb)] + [0.0] + tf
    angles = list(reversed(ub[1:])) + [theta0] + uf[1:]
    var_f = sum(abs(uf[i + 1] - uf[i]) for i in range(len(uf) - 1))
    var_b = sum(abs(ub[i + 1] - ub[i]) for i in range(len(ub) - 1))
    deltas = [angles[i + 1] - angles[i] for i in range(len(angles) - 1)]
    monotone = all(d >= -1e-12 for d in deltas) or all(d <= 1e-12 for d in deltas)
    returns = []
    f = [math.sin(a - theta0) for a in angles]
    for i in range(len(f) - 1):
        if times[i] == 0.0 or times[i + 1] == 0.0:
            continue
        if f[i] == 0.0 and times[i] != 0.0:
            hit = times[i]
        elif f[i] * f[i + 1] < 0.0:
            frac = abs(f[i]) / (abs(f[i]) + abs(f[i + 1]))
            hit = times[i] + frac * (times[i + 1] - times[i])
        else:
            continue
        if not returns or abs(hit - returns[-1]) > 2.0 * current_dt:
            returns.append(hit)
    return RotationProfile(
        seed=tuple(p.coords),
        times=tuple(times),
        angles=tuple(angles),
        total_variation=var_f + var_b,
        variation_forward=var_f,
        variation_backward=var_b,
        monotone=monotone,
        full_turn=(var_f >= math.pi or var_b >= math.pi),
        returns=tuple(returns),
        step=current_dt,
    )
