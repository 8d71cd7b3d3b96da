import math

import numpy as np
import pytest

from engellab import models
from engellab.dynamics import DynamicsError, ProjectivePoint, projective_separation
from engellab.geometry import FieldHandle, GeometryError
from engellab.hyperbolicity import (
    CertificateRefused,
    InconclusiveError,
    QuotientMetric,
    average_metric,
    certify_weak_hyperbolicity,
    dalpha,
    estimate_splitting,
    estimate_splitting_from_flow,
    estimate_splitting_from_planes,
    invariance_residual,
    isotropy_residual,
    splitting_gap_series,
)


@pytest.fixture(scope="module")
def sol_split(sol):
    return estimate_splitting(
        sol, [sol.point()], method="plane-limit",
        D_plus=sol.distributions["D+"], D_minus=sol.distributions["D-"])


@pytest.fixture(scope="module")
def sl2_split(sl2):
    return estimate_splitting(sl2, [sl2.point()], method="power-direction",
                              W=sl2.w_handle)


@pytest.fixture(scope="module")
def rotation_model():
    # ad_W has complex eigenvalues on the quotient: no real invariant line
    c = np.zeros((4, 4, 4))

    def setb(i, j, k, v):
        c[i, j, k] = v
        c[j, i, k] = -v

    setb(3, 0, 1, 1.0)   # [W, X] = Y
    setb(3, 1, 0, -1.0)  # [W, Y] = -X
    m = models.LieAlgebraModel(c, names=["X", "Y", "Z", "W"])
    m.declare("W", ["X", "Y", "W"], ["X", "Y"])
    return m


def test_plane_limit_recovers_sol_eigendirections(sol, sol_split):
    s = sol_split.samples[0]
    # E- = [X] (angle 0), E+ = [Y] (angle pi/2)
    assert projective_separation(s.e_minus, ProjectivePoint(0.0)) < 1e-6
    assert projective_separation(s.e_plus, ProjectivePoint(math.pi / 2)) < 1e-6
    assert s.convergence_gap < 1e-6


def test_plane_limit_zero_horizon_returns_raw_angles(sol):
    s = estimate_splitting_from_planes(
        sol, sol.distributions["D+"], sol.distributions["D-"], sol.point(),
        T=0.0)
    assert s.e_plus.angle == pytest.approx(math.pi / 4, abs=1e-12)
    assert s.e_minus.angle == pytest.approx(3 * math.pi / 4, abs=1e-12)
    assert s.convergence_gap == pytest.approx(math.pi / 2, abs=1e-12)


def test_gap_decay_rate_is_two(sol):
    horizons = [2.0 + k for k in range(14)]  # T in [2, 15]
    series = splitting_gap_series(sol, sol.distributions["D+"],
                                  sol.distributions["D-"], sol.point(),
                                  horizons)
    ts = np.array([t for t, _ in series])
    gaps = np.array([g for _, g in series])
    slope = np.polyfit(ts, np.log(gaps), 1)[0]
    assert abs(slope + 2.0) < 0.05


def test_methods_agree_on_both_hyperbolic_builtins(sol, sl2):
    for model in (sol, sl2):
        plane = estimate_splitting_from_planes(
            model, model.distributions.get("D+") or _sl2_planes(model)[0],
            model.distributions.get("D-") or _sl2_planes(model)[1],
            model.point(), T=20.0)
        flow = estimate_splitting_from_flow(model, model.w_handle,
                                            model.point(), T=20.0)
        assert projective_separation(plane.e_plus, flow.e_plus) < 1e-6
        assert projective_separation(plane.e_minus, flow.e_minus) < 1e-6


def _sl2_planes(sl2):
    from engellab.geometry import DistributionSpec, combine
    up, um = sl2.handle("U+"), sl2.handle("U-")
    plus = combine("U+ + U-", [up, um], [1.0, 1.0])
    minus = combine("U+ - U-", [up, um], [1.0, -1.0])
    return (DistributionSpec(2, (sl2.w_handle, plus), name="P+"),
            DistributionSpec(2, (sl2.w_handle, minus), name="P-"))


def test_power_direction_sl2_eigendirections(sl2, sl2_split):
    s = sl2_split.samples[0]
    # E+ = [U+] (angle 0), E- = [U-] (angle pi/2) in the (U+, U-) frame
    assert projective_separation(s.e_plus, ProjectivePoint(0.0)) < 1e-9
    assert projective_separation(s.e_minus, ProjectivePoint(math.pi / 2)) < 1e-9


def test_rotation_dynamics_is_inconclusive(rotation_model):
    with pytest.raises(InconclusiveError):
        estimate_splitting_from_flow(rotation_model,
                                     rotation_model.w_handle,
                                     rotation_model.point())


def test_cross_ratio_growth_exceeds_alpha_power(sol):
    from engellab.dynamics import projective_series
    times = [float(k) for k in range(1, 16)]
    rows = projective_series(sol, sol.distributions["D+"],
                             sol.distributions["D-"], sol.point(), times)
    alpha = rows[0].cr  # first-step value, > 1
    assert alpha > 1.0
    for row in rows:
        assert row.cr > alpha ** math.floor(row.t) - 1e-9 \
            or row.cr == pytest.approx(alpha ** math.floor(row.t), rel=1e-9)
    crs = [r.cr for r in rows]
    assert all(crs[i] < crs[i + 1] for i in range(len(crs) - 1))


# --- certificates -------------------------------------------------------------


def test_certify_sol_rate(sol, sol_split):
    cert = certify_weak_hyperbolicity(sol, sol.w_handle, sol_split)
    assert cert.c_hat == pytest.approx(2.0, abs=1e-3)
    assert cert.K_hat >= 1.0
    assert cert.K_hat == pytest.approx(1.0, abs=1e-6)
    assert cert.reverified
    assert cert.alpha_consistent
    assert cert.alpha_gap == pytest.approx(2.0, abs=1e-3)
    assert min(cert.margins) >= 0.0


def test_certify_swapped_splitting_refused(sol, sol_split):
    with pytest.raises(CertificateRefused):
        certify_weak_hyperbolicity(sol, sol.w_handle, sol_split.swapped())


def test_certify_sl2_strong_flags(sl2, sl2_split):
    cert = certify_weak_hyperbolicity(sl2, sl2.w_handle, sl2_split)
    assert cert.c_hat == pytest.approx(2.0, abs=1e-3)
    assert cert.strong_flags is not None
    b_plus, b_minus = cert.strong_flags
    assert b_plus == pytest.approx(1.0, abs=1e-3)
    assert b_minus == pytest.approx(1.0, abs=1e-3)


def test_averaged_metric_gives_unit_k(sol, sol_split):
    g0 = QuotientMetric.identity([s.point for s in sol_split.samples])
    avg = average_metric(sol, sol.w_handle, g0, T=5.0)
    cert = certify_weak_hyperbolicity(sol, sol.w_handle, sol_split, metric=avg)
    assert cert.K_hat == pytest.approx(1.0, abs=1e-6)


def test_average_metric_zero_horizon_is_identity(sol, sol_split):
    g0 = QuotientMetric.identity([s.point for s in sol_split.samples])
    assert average_metric(sol, sol.w_handle, g0, T=0.0) is g0


def test_c_hat_metric_independent(sol, sol_split):
    g0 = QuotientMetric.identity([s.point for s in sol_split.samples])
    once = average_metric(sol, sol.w_handle, g0, T=5.0)
    twice = average_metric(sol, sol.w_handle, once, T=5.0)
    c1 = certify_weak_hyperbolicity(sol, sol.w_handle, sol_split,
                                    metric=once).c_hat
    c2 = certify_weak_hyperbolicity(sol, sol.w_handle, sol_split,
                                    metric=twice).c_hat
    c0 = certify_weak_hyperbolicity(sol, sol.w_handle, sol_split).c_hat
    assert abs(c1 - c2) < 1e-9
    assert abs(c1 - c0) < 1e-6


def test_metric_positive_definiteness_enforced(sol):
    with pytest.raises(GeometryError):
        QuotientMetric((sol.point(),), (((1.0, 0.0), (0.0, -1.0)),))


def test_w_negation_swaps_splitting(sol):
    neg_w = FieldHandle("-W", None,
                        coeffs=tuple(-np.asarray(sol.w_handle.coeffs)))
    fwd = estimate_splitting_from_flow(sol, sol.w_handle, sol.point())
    bwd = estimate_splitting_from_flow(sol, neg_w, sol.point())
    assert projective_separation(fwd.e_plus, bwd.e_minus) < 1e-9
    assert projective_separation(fwd.e_minus, bwd.e_plus) < 1e-9


def test_invariance_residual(sol, sol_split):
    assert invariance_residual(sol, sol.w_handle, sol_split, 0.0) == 0.0
    for t in (1.0, 3.0, 5.0):
        assert invariance_residual(sol, sol.w_handle, sol_split, t) < 1e-8


def test_perturbed_splitting_flagged(sol, sol_split):
    from engellab.hyperbolicity import SplittingEstimate, SplittingSample
    s = sol_split.samples[0]
    perturbed = SplittingEstimate(
        (SplittingSample(s.point,
                         ProjectivePoint(s.e_plus.angle + 0.1),
                         s.e_minus, s.convergence_gap),),
        sol_split.T, sol_split.method)
    res = invariance_residual(sol, sol.w_handle, perturbed, 1.0)
    assert res > 0.01


def test_isotropy_residual_zero(sol, sl2, sol_split, sl2_split):
    assert isotropy_residual(sol, sol_split) < 1e-10
    assert isotropy_residual(sl2, sl2_split) < 1e-10


def test_dalpha_cross_values(sol, sl2):
    assert abs(dalpha(sol, sol.handle("X"), sol.handle("Y"),
                      sol.point())) == pytest.approx(1.0, abs=1e-12)
    assert dalpha(sol, sol.handle("X"), sol.handle("X"), sol.point()) == 0.0
    assert abs(dalpha(sl2, sl2.handle("U+"), sl2.handle("U-"),
                      sl2.point())) == pytest.approx(2.0, abs=1e-12)


def test_isotropy_needs_invariant_form(prolongation, sol_split):
    with pytest.raises(GeometryError):
        isotropy_residual(prolongation, sol_split)


def test_degenerate_splitting_sample_rejected(sol):
    from engellab.hyperbolicity import SplittingSample
    with pytest.raises(DynamicsError):
        SplittingSample(sol.point(), ProjectivePoint(0.3),
                        ProjectivePoint(0.3), 0.0)


def test_plane_limit_negative_horizon_rejected(sol):
    with pytest.raises(DynamicsError):
        estimate_splitting_from_planes(sol, sol.distributions["D+"],
                                       sol.distributions["D-"], sol.point(),
                                       T=-1.0)


def test_trapping_violation_detected(rotation_model):
    # rotating quotient dynamics moves both lines without nesting them
    from engellab.geometry import DistributionSpec
    m = rotation_model
    Dp = DistributionSpec(2, (m.w_handle, m.handle("X")), name="RP")
    Dm = DistributionSpec(2, (m.w_handle, m.handle("Y")), name="RM")
    with pytest.raises(DynamicsError):
        estimate_splitting_from_planes(m, Dp, Dm, m.point(), T=20.0)
