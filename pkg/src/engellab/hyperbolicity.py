"""Invariant splittings of E/W and weak-hyperbolicity certificates.

The quotient action of the time-t flow used throughout this module is
A(t) = Q(t)^{-1}, the inverse of the HolonomyMap quotient block; with
the frame-transport convention of `dynamics` this is the direction that
relatively expands E+ on the hyperbolic built-in models.  Certificates
record the extraction parameters so runs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    DynamicsError,
    HolonomyMap,
    ProjectivePoint,
    act_on_projective,
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
)
from .models import LieAlgebraModel, divergence

DEFAULT_T = 20.0
DEFAULT_DT = 0.25
DEFAULT_SAFETY = 1e-6
GAP_FLOOR = 1e-12


class InconclusiveError(GeometryError):
    """Numerics could not decide (no dominance detected)."""


class CertificateRefused(GeometryError):
    """A certificate check failed; the message carries the worst witness."""


# ---------------------------------------------------------------------------
# Splitting estimates


@dataclass(frozen=True)
class SplittingSample:
    point: Point
    e_plus: ProjectivePoint
    e_minus: ProjectivePoint
    convergence_gap: float

    def __post_init__(self):
        if projective_separation(self.e_plus, self.e_minus) <= GAP_FLOOR:
            raise DynamicsError(
                f"splitting degenerate at {self.point.coords}: E+ = E-"
            )


@dataclass(frozen=True)
class SplittingEstimate:
    samples: tuple
    T: float
    method: str

    def swapped(self) -> "SplittingEstimate":
        """Roles of E+ and E- exchanged (for refusal tests)."""
        return SplittingEstimate(
            tuple(
                SplittingSample(s.point, s.e_minus, s.e_plus, s.convergence_gap)
                for s in self.samples
            ),
            self.T,
            self.method,
        )

    def as_dict(self):
        return {
            "T": self.T,
            "method": self.method,
            "samples": [
                {
                    "point": list(s.point.coords),
                    "theta_plus": s.e_plus.angle,
                    "theta_minus": s.e_minus.angle,
                    "convergence_gap": s.convergence_gap,
                }
                for s in self.samples
            ],
        }


def _ordered4(a, b, c, d, slack=1e-12):
    """b, c inside the projective interval from a to d, either orientation.

    Tolerates coincidences below `slack` (converged checkpoints)."""
    pts = [a, b, c, d]
    for orient in (pts, pts[::-1]):
        rel = [(p.angle - orient[0].angle) % math.pi for p in orient]
        ok = True
        for i in range(1, 4):
            if rel[i] < rel[i - 1] - slack:
                ok = False
                break
        if ok:
            return True
    return False


def _plane_series(model, D_plus, D_minus, p, times, step, gap_floor):
    maps = holonomy_series(model, model.w_handle, p, times, step)
    dp, dm = [], []
    for H in maps:
        here = identity_holonomy(model, H.target)
        raw_gap = projective_separation(
            plane_to_projective(model, here, D_plus),
            plane_to_projective(model, here, D_minus),
        )
        if raw_gap < gap_floor:
            raise DynamicsError(
                f"planes coincide along the orbit at t = {H.t:.6g}"
            )
        dp.append(plane_to_projective(model, H, D_plus))
        dm.append(plane_to_projective(model, H, D_minus))
    return dp, dm


def estimate_splitting_from_planes(model, D_plus: DistributionSpec,
                                   D_minus: DistributionSpec, p: Point,
                                   T: float = DEFAULT_T, checkpoints: int = 20,
                                   step: float = 1e-3,
                                   gap_floor: float = GAP_FLOOR) -> SplittingSample:
    """Finite-horizon plane-limit surrogate for the invariant splitting.

    E- is the forward limit of both transported planes, E+ the backward
    one; monotone trapping of the nested projective intervals is
    verified at every checkpoint pair.
    """
    if T < 0:
        raise DynamicsError("plane-limit horizon must be nonnegative")
    if T == 0.0:
        maps = holonomy_series(model, model.w_handle, p, [0.0], step)
        x = plane_to_projective(model, maps[0], D_plus)
        y = plane_to_projective(model, maps[0], D_minus)
        return SplittingSample(p, x, y, projective_separation(x, y))
    times = [T * (k + 1) / checkpoints for k in range(checkpoints)]
    fp, fm = _plane_series(model, D_plus, D_minus, p, times, step, gap_floor)
    bp, bm = _plane_series(model, D_plus, D_minus, p,
                           [-t for t in times], step, gap_floor)
    for series_p, series_m in ((fp, fm), (bp, bm)):
        prev_p, prev_m = series_p[0], series_m[0]
        for xp, xm in zip(series_p[1:], series_m[1:]):
            if not _ordered4(prev_p, xp, xm, prev_m):
                raise DynamicsError(
                    "projective trapping violated: not bi-Engel along orbit"
                )
            prev_p, prev_m = xp, xm
    gap_fwd = projective_separation(fp[-1], fm[-1])
    gap_bwd = projective_separation(bp[-1], bm[-1])
    e_plus, e_minus = _power_refine(model, model.w_handle, p, bp[-1], fp[-1],
                                    step)
    return SplittingSample(p, e_plus=e_plus, e_minus=e_minus,
                           convergence_gap=max(gap_fwd, gap_bwd))


def splitting_gap_series(model, D_plus, D_minus, p, horizons, step=1e-3):
    """(T, convergence gap) pairs for decay-rate fitting."""
    out = []
    for T in horizons:
        s = estimate_splitting_from_planes(model, D_plus, D_minus, p, T=T,
                                           checkpoints=8, step=step)
        out.append((T, s.convergence_gap))
    return out


def _power_refine(model, W, p, e_plus, e_minus, step, t0=2.0, iterations=12):
    """Polish estimated splitting lines by quotient power iteration.

    Finite-horizon estimates carry angle noise at machine scale which
    later gets amplified by e^{ct}; iterating the time-t0 quotient map
    drives each line onto the map's own invariant direction."""
    H = holonomy_series(model, W, p, [t0], step)[0]
    a = _quotient_action(H)
    a_back = np.linalg.inv(a)
    vp = e_plus.vector
    vm = e_minus.vector
    for _ in range(iterations):
        vp = a @ vp
        vp = vp / np.linalg.norm(vp)
        vm = a_back @ vm
        vm = vm / np.linalg.norm(vm)
    return ProjectivePoint.from_vector(vp), ProjectivePoint.from_vector(vm)


def _quotient_action(H: HolonomyMap):
    q = H.quotient_array
    det = np.linalg.det(q)
    if abs(det) < 1e-300:
        raise DynamicsError("singular quotient holonomy")
    return np.linalg.inv(q)


def estimate_splitting_from_flow(model, W: FieldHandle, p: Point,
                                 T: float = DEFAULT_T, step: float = 1e-3,
                                 agree_tol: float = 1e-6) -> SplittingSample:
    """Power-direction splitting: dominant directions of the quotient flow.

    Three seed lines and a shorter-horizon rerun guard against unlucky
    seed alignment and rotation-like (non-dominated) quotient dynamics.
    """
    seeds = [ProjectivePoint(math.pi / 4),
             ProjectivePoint(math.pi / 4 + 0.7),
             ProjectivePoint(math.pi / 4 - 0.9)]
    maps = holonomy_series(model, W, p, [T, -T, 0.85 * T, -0.85 * T], step)
    a_fwd, a_bwd = _quotient_action(maps[0]), _quotient_action(maps[1])
    a_fwd_s, a_bwd_s = _quotient_action(maps[2]), _quotient_action(maps[3])

    def settle(mat, mat_short):
        imgs = [act_on_projective(mat, s) for s in seeds]
        shorts = [act_on_projective(mat_short, s) for s in seeds]
        groups = []
        for img, sh in zip(imgs, shorts):
            if projective_separation(img, sh) > agree_tol:
                continue  # not horizon-stable for this seed
            groups.append(img)
        for cand in groups:
            near = [g for g in groups
                    if projective_separation(g, cand) <= agree_tol]
            if len(near) >= 2:
                return cand
        raise InconclusiveError(
            "no dominance detected: seed lines fail to settle on a "
            "common direction (rotation-like quotient dynamics?)"
        )

    e_plus = settle(a_fwd, a_fwd_s)
    e_minus = settle(a_bwd, a_bwd_s)
    e_plus, e_minus = _power_refine(model, W, p, e_plus, e_minus, step)
    if projective_separation(e_plus, e_minus) <= agree_tol:
        raise InconclusiveError(
            "forward and backward dominant directions coincide"
        )
    gap = max(
        projective_separation(act_on_projective(a_fwd, seeds[0]),
                              act_on_projective(a_fwd_s, seeds[0])),
        projective_separation(act_on_projective(a_bwd, seeds[0]),
                              act_on_projective(a_bwd_s, seeds[0])),
    )
    return SplittingSample(p, e_plus=e_plus, e_minus=e_minus,
                           convergence_gap=max(gap, GAP_FLOOR * 10))


def estimate_splitting(model, p_samples, method="plane-limit", W=None,
                       D_plus=None, D_minus=None, T=DEFAULT_T,
                       step=1e-3, checkpoints=20) -> SplittingEstimate:
    """Splitting over a sample grid by either method."""
    entries = []
    for p in p_samples:
        if method == "plane-limit":
            entries.append(estimate_splitting_from_planes(
                model, D_plus, D_minus, p, T=T, checkpoints=checkpoints,
                step=step))
        elif method == "power-direction":
            entries.append(estimate_splitting_from_flow(
                model, W or model.w_handle, p, T=T, step=step))
        else:
            raise DynamicsError(f"unknown splitting method '{method}'")
    return SplittingEstimate(tuple(entries), T, method)


# ---------------------------------------------------------------------------
# Quotient metrics


@dataclass(frozen=True)
class QuotientMetric:
    """Per-sample SPD 2x2 matrices in the declared quotient frame."""

    points: tuple
    matrices: tuple

    def __post_init__(self):
        for p, m in zip(self.points, self.matrices):
            ev = np.linalg.eigvalsh(np.asarray(m, dtype=float))
            if ev.min() <= 0.0:
                raise GeometryError(
                    f"metric not positive definite at {p.coords} "
                    f"(eigenvalues {tuple(ev)})"
                )

    @classmethod
    def identity(cls, points) -> "QuotientMetric":
        eye = ((1.0, 0.0), (0.0, 1.0))
        return cls(tuple(points), tuple(eye for _ in points))

    def matrix(self, i):
        return np.asarray(self.matrices[i], dtype=float)


def average_metric(model, W: FieldHandle, g0: QuotientMetric, T: float = 5.0,
                   quadrature_steps: int = 61, step: float = 1e-3) -> QuotientMetric:
    """Flow-averaged metric (1/T) int_0^T (pullback of g) dt, per sample.

    Composite Simpson quadrature; refused if roundoff destroys positive
    definiteness at any sample.
    """
    if T <= 0:
        return g0
    if quadrature_steps < 3:
        raise GeometryError("need at least 3 quadrature nodes")
    n = quadrature_steps if quadrature_steps % 2 == 1 else quadrature_steps + 1
    nodes = np.linspace(0.0, T, n)
    weights = np.ones(n)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= (nodes[1] - nodes[0]) / 3.0
    out = []
    for i, p in enumerate(g0.points):
        g = g0.matrix(i)
        maps = holonomy_series(model, W, p, list(nodes[1:]), step)
        acc = weights[0] * g
        for wgt, H in zip(weights[1:], maps):
            a = _quotient_action(H)
            acc = acc + wgt * (a.T @ g @ a)
        avg = acc / T
        avg = 0.5 * (avg + avg.T)
        if np.linalg.eigvalsh(avg).min() <= 0.0:
            raise GeometryError(
                f"averaged metric lost positive definiteness at {p.coords}"
            )
        out.append(tuple(map(tuple, avg)))
    return QuotientMetric(g0.points, tuple(out))


# ---------------------------------------------------------------------------
# Certificates


@dataclass(frozen=True)
class HyperbolicityCertificate:
    c_hat: float
    K_hat: float
    T: float
    dt: float
    step: float
    grid: tuple                 # sample coordinates
    margins: tuple              # per-sample min of log(l+/l-) - c_hat t
    strong_flags: tuple | None  # (b+, b-) when genuinely hyperbolic
    alpha_gap: float
    alpha_consistent: bool
    method: str
    reverified: bool

    def as_dict(self):
        d = {
            "c_hat": self.c_hat,
            "K_hat": self.K_hat,
            "T": self.T,
            "dt": self.dt,
            "step": self.step,
            "grid": [list(g) for g in self.grid],
            "margins": list(self.margins),
            "alpha_gap": self.alpha_gap,
            "alpha_consistent": self.alpha_consistent,
            "method": self.method,
            "reverified": self.reverified,
        }
        if self.strong_flags is not None:
            d["strong_flags"] = {"b_plus": self.strong_flags[0],
                                 "b_minus": self.strong_flags[1]}
        return d


def _metric_norm(g, v):
    return math.sqrt(float(v @ g @ v))


def _lambda_series(model, W, sample: SplittingSample, g, times, step):
    """(lambda+(t), lambda-(t)) for unit vectors along E+/E-."""
    vp = sample.e_plus.vector
    vm = sample.e_minus.vector
    vp = vp / _metric_norm(g, vp)
    vm = vm / _metric_norm(g, vm)
    maps = holonomy_series(model, W, sample.point, times, step)
    lp, lm = [], []
    for H in maps:
        a = _quotient_action(H)
        lp.append(_metric_norm(g, a @ vp))
        lm.append(_metric_norm(g, a @ vm))
    return np.array(lp), np.array(lm)


def _alpha_rates(model, W, sample: SplittingSample, step, h=1e-4):
    """One-sided growth rates of the frame-transport coefficient on E+-."""
    maps = holonomy_series(model, W, sample.point, [h, -h], step)
    out = []
    for v in (sample.e_plus.vector, sample.e_minus.vector):
        coeff = []
        for H in maps:
            img = H.quotient_array @ v
            coeff.append(abs(float(img @ v)))
        out.append((math.log(coeff[0]) - math.log(coeff[1])) / (2.0 * h))
    alpha_plus, alpha_minus = out
    return alpha_plus, alpha_minus


def certify_weak_hyperbolicity(model, W: FieldHandle,
                               splitting: SplittingEstimate,
                               metric: QuotientMetric | None = None,
                               T: float = DEFAULT_T, dt: float = DEFAULT_DT,
                               step: float = 1e-3,
                               safety: float = DEFAULT_SAFETY) -> HyperbolicityCertificate:
    """Certify |Dphi_t v+|/|v+| >= K e^{ct} |Dphi_t v-|/|v-| on the grid.

    c_hat is the infimum of checkpoint log-ratio slopes minus a safety
    margin; K_hat the worst residual ratio at c_hat.  Refused (with the
    worst witness) if any checkpoint ratio is non-positive or c_hat <= 0.
    """
    points = [s.point for s in splitting.samples]
    if metric is None:
        metric = QuotientMetric.identity(points)
    times = [dt * (k + 1) for k in range(int(round(T / dt)))]
    rates = []       # per sample, per checkpoint: log(l+/l-)/t
    ratios = []      # per sample array of log(l+/l-)
    series = []
    for i, sample in enumerate(splitting.samples):
        g = metric.matrix(i)
        lp, lm = _lambda_series(model, W, sample, g, times, step)
        series.append((lp, lm))
        r = np.log(lp) - np.log(lm)
        if (r <= 0.0).any():
            k = int(np.argmin(r))
            raise CertificateRefused(
                f"weak hyperbolicity fails at sample {sample.point.coords}, "
                f"t = {times[k]:.6g}: log ratio {r[k]:.6g} <= 0"
            )
        ratios.append(r)
        rates.append(r / np.asarray(times))
    c_hat = float(min(rt.min() for rt in rates)) - safety
    if c_hat <= 0.0:
        raise CertificateRefused(
            f"extracted rate c_hat = {c_hat:.6g} is not positive"
        )
    margins = []
    k_hat = math.inf
    for r in ratios:
        m = r - c_hat * np.asarray(times)
        margins.append(float(m.min()))
        k_hat = min(k_hat, float(np.exp(m.min())))
    if min(margins) < 0.0:
        raise CertificateRefused(
            f"negative margin {min(margins):.6g} after rate extraction"
        )

    # strong (genuine) hyperbolicity flags
    b_plus = math.inf
    b_minus = math.inf
    for lp, lm in series:
        b_plus = min(b_plus, float((np.log(lp) / np.asarray(times)).min()))
        b_minus = min(b_minus, float((-np.log(lm) / np.asarray(times)).min()))
    strong = None
    if b_plus - safety > 0.0 and b_minus - safety > 0.0:
        strong = (b_plus - safety, b_minus - safety)

    # independent route through the infinitesimal rates
    alpha_gap = math.inf
    for sample in splitting.samples:
        a_plus, a_minus = _alpha_rates(model, W, sample, step)
        alpha_gap = min(alpha_gap, a_minus - a_plus)
    alpha_consistent = c_hat <= alpha_gap + 1e-3

    # re-verify the certified inequality at every checkpoint
    reverified = True
    for i, sample in enumerate(splitting.samples):
        g = metric.matrix(i)
        lp, lm = _lambda_series(model, W, sample, g, times, step)
        for t, a, b in zip(times, lp, lm):
            if a < k_hat * math.exp(c_hat * t) * b * (1.0 - 1e-12):
                reverified = False
    if not reverified:
        raise CertificateRefused("certificate failed independent re-verification")

    return HyperbolicityCertificate(
        c_hat=c_hat, K_hat=k_hat, T=T, dt=dt, step=step,
        grid=tuple(tuple(p.coords) for p in points),
        margins=tuple(margins), strong_flags=strong,
        alpha_gap=float(alpha_gap), alpha_consistent=alpha_consistent,
        method=splitting.method, reverified=True,
    )


# ---------------------------------------------------------------------------
# Diagnostics


def invariance_residual(model, W: FieldHandle, splitting: SplittingEstimate,
                        t: float, step: float = 1e-3) -> float:
    """Max angle between the transported and declared E+- over the grid.

    The declared splitting at the flowed point is read from the same
    sample (valid for the homogeneous built-ins, where the splitting is
    frame-constant)."""
    worst = 0.0
    for sample in splitting.samples:
        H = holonomy_series(model, W, sample.point, [t], step)[0]
        a = _quotient_action(H)
        for line in (sample.e_plus, sample.e_minus):
            moved = act_on_projective(a, line)
            worst = max(worst, projective_separation(moved, line))
    return worst


def _dalpha_complement(model, p):
    cols = model.E.matrix(p)
    q, _ = np.linalg.qr(cols)
    residuals = [np.linalg.norm(e - q @ (q.T @ e)) for e in np.eye(4)]
    n_idx = int(np.argmax(residuals))
    return np.column_stack([cols, np.eye(4)[n_idx]])


def dalpha(model, U: FieldHandle, V: FieldHandle, p: Point) -> float:
    """dalpha(U, V) = -(E-transverse component of [U, V]) at p."""
    if model.E is None:
        raise GeometryError("model has no declared even contact structure")
    basis = _dalpha_complement(model, p)
    br = model.bracket(U, V, p)
    coeffs = np.linalg.solve(basis, br)
    return -float(coeffs[3])


def isotropy_residual(model, splitting: SplittingEstimate,
                      p: Point | None = None) -> float:
    """Self-pairing of each splitting line under dalpha (zero in 4D).

    Requires an invariant defining form: an algebra backend whose W has
    vanishing divergence."""
    if not isinstance(model, LieAlgebraModel):
        raise GeometryError(
            "isotropy residual needs an invariant defining form "
            "(algebra backend)"
        )
    if abs(divergence(model, model.w_handle, model.point())) > 1e-10:
        raise GeometryError("W is not volume preserving: no invariant form")
    worst = 0.0
    for sample in splitting.samples:
        if p is not None and not np.allclose(sample.point.array, p.array):
            continue
        qf = quotient_frame(model, sample.point)
        cols = np.column_stack([qf.u1.array, qf.u2.array])
        for line in (sample.e_plus, sample.e_minus):
            amb = cols @ line.vector
            h = FieldHandle("splitting-line", None, coeffs=tuple(amb))
            worst = max(worst, abs(dalpha(model, h, h, sample.point)))
    return worst
