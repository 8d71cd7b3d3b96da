"""End-to-end acceptance checks, one test per certified claim.

Each test prints a single `[criterion N] PASS/FAIL` line summarizing the
claim it asserts, so a verbose run reads as a checklist.
"""

import json
import math
import time

import numpy as np
import pytest

from engellab import models
from engellab.cli import main
from engellab.dynamics import ProjectivePoint, projective_separation, projective_series
from engellab.engel import certify_bi_engel, construct_bi_engel, is_engel, \
    characteristic_containment, rotation_profile
from engellab.geometry import FieldHandle, subspace_distance
from engellab.hyperbolicity import (
    dalpha,
    estimate_splitting,
    estimate_splitting_from_flow,
    estimate_splitting_from_planes,
    isotropy_residual,
    splitting_gap_series,
)
from engellab.models import divergence


def run_cli(tmp_path, *argv, name="report.json"):
    out = tmp_path / name
    code = main(list(argv) + ["-o", str(out)])
    return code, json.loads(out.read_text())


def report(n, ok, detail):
    print(f"[criterion {n}] {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def test_criterion_1_sol_rate_constant(tmp_path):
    t0 = time.perf_counter()
    code_e, rep_e = run_cli(tmp_path, "certify-hyperbolic", "--model", "sol",
                            "--average-T", "5", name="exact.json")
    code_c, rep_c = run_cli(tmp_path, "certify-hyperbolic", "--model", "sol",
                            "--chart", "--horizon", "10", "--step", "1e-3",
                            "--samples", "1", name="chart.json")
    elapsed = time.perf_counter() - t0
    c_exact = rep_e["certificate"]["c_hat"]
    c_chart = rep_c["certificate"]["c_hat"]
    k_avg = rep_e["averaged_certificate"]["K_hat"]
    ok = (code_e == 0 and code_c == 0
          and abs(c_exact - 2.0) < 1e-3
          and abs(c_chart - 2.0) < 5e-2
          and abs(k_avg - 1.0) < 1e-6
          and elapsed < 10.0)
    assert report(1, ok,
                  f"c_hat exact {c_exact:.6f}, chart {c_chart:.6f}, "
                  f"averaged K_hat {k_avg:.9f}, {elapsed:.1f}s")


def test_criterion_2_splitting_convergence(sol):
    series = splitting_gap_series(sol, sol.distributions["D+"],
                                  sol.distributions["D-"], sol.point(),
                                  [2.0 + k for k in range(14)])
    ts = np.array([t for t, _ in series])
    gaps = np.array([g for _, g in series])
    slope = float(np.polyfit(ts, np.log(gaps), 1)[0])
    s = estimate_splitting_from_planes(
        sol, sol.distributions["D+"], sol.distributions["D-"], sol.point(),
        T=20.0)
    err_minus = projective_separation(s.e_minus, ProjectivePoint(0.0))
    err_plus = projective_separation(s.e_plus, ProjectivePoint(math.pi / 2))
    ok = (abs(slope + 2.0) < 0.05 and err_minus < 1e-6 and err_plus < 1e-6)
    assert report(2, ok,
                  f"gap decay slope {slope:.4f}, splitting errors "
                  f"{err_plus:.2e}/{err_minus:.2e}")


def test_criterion_3_round_trip_sol(tmp_path, sol):
    t0 = time.perf_counter()
    code, rep = run_cli(tmp_path, "construct-bi-engel", "--model", "sol")
    legs = rep["legs"]
    p = sol.point()
    worst_angle = 0.0
    for leg, target in ((legs["plus"], "D+"), (legs["minus"], "D-")):
        built = np.column_stack([np.asarray(sol.w_handle.coeffs),
                                 np.asarray(leg)])
        worst_angle = max(worst_angle, subspace_distance(
            built, sol.distributions[target].matrix(p)))
    roundtrip = rep["roundtrip_angle"]
    elapsed = time.perf_counter() - t0
    ok = (code == 0 and rep["bi_engel"]["passed"]
          and worst_angle < 1e-2 and roundtrip < 1e-6 and elapsed < 60.0)
    assert report(3, ok,
                  f"plane angle {worst_angle:.2e}, roundtrip splitting "
                  f"{roundtrip:.2e}, {elapsed:.1f}s")


def test_criterion_4a_prolongation_pair_rejected(tmp_path):
    code, rep = run_cli(tmp_path, "certify-bi-engel", "--model",
                        "prolongation")
    ok = code == 1 and not rep["bi_engel"]["passed"]
    assert report("4a", ok, f"certify-bi-engel exit {code}")


def test_criterion_4b_prolongation_planes_individually_engel(tmp_path):
    codes = []
    for dist in ("D+", "D-"):
        code, _ = run_cli(tmp_path, "verify-engel", "--model", "prolongation",
                          "--dist", dist, "--tol", "1e-6",
                          name=f"engel{dist[-1]}.json")
        codes.append(code)
    ok = codes == [0, 0]
    assert report("4b", ok, f"verify-engel exits {codes}")


def test_criterion_4c_witness_locations(tmp_path):
    code, rep = run_cli(tmp_path, "certify-bi-engel", "--model",
                        "prolongation")
    witnesses = [w[3] for w in rep["bi_engel"]["coincidence_witnesses"]]
    offsets = [min(abs(t % (2 * math.pi)),
                   abs(t % (2 * math.pi) - math.pi),
                   abs(t % (2 * math.pi) - 2 * math.pi))
               for t in witnesses]
    ok = bool(witnesses) and all(o < 1e-6 for o in offsets)
    assert report(
        "4c", ok,
        f"witness angles {sorted(round(t, 8) for t in witnesses)} vs "
        f"expected {{0, pi}}")


def test_criterion_5_sl2_suspension(tmp_path, sl2):
    code_ec, rep_ec = run_cli(tmp_path, "verify-even-contact", "--model",
                              "sl2-suspension", name="ec.json")
    line = np.asarray(rep_ec.get("characteristic_line", [0, 0, 0, 0]))
    w = np.asarray(sl2.w_handle.coeffs, dtype=float)
    w = w / np.linalg.norm(w)
    line_err = min(np.linalg.norm(line - w), np.linalg.norm(line + w))

    code_h, rep_h = run_cli(tmp_path, "certify-hyperbolic", "--model",
                            "sl2-suspension", name="hyp.json")
    cert = rep_h["certificate"]
    flags = cert.get("strong_flags", {})

    splitting = estimate_splitting(sl2, [sl2.point()],
                                   method="power-direction", W=sl2.w_handle)
    d_plus, d_minus = construct_bi_engel(sl2, sl2.w_handle, splitting)
    pair = certify_bi_engel(sl2, d_plus, d_minus, sl2.default_samples(5))
    variations = []
    for D in (d_plus, d_minus):
        prof = rotation_profile(sl2, sl2.w_handle, D, sl2.point(), T=20.0)
        variations.append(prof.variation_forward)
    ok = (code_ec == 0 and rep_ec["even_contact"]["passed"]
          and line_err < 1e-8
          and code_h == 0 and abs(cert["c_hat"] - 2.0) < 1e-3
          and abs(flags.get("b_plus", 0.0) - 1.0) < 1e-3
          and abs(flags.get("b_minus", 0.0) - 1.0) < 1e-3
          and pair.passed
          and all(v < math.pi for v in variations))
    assert report(5, ok,
                  f"char line err {line_err:.2e}, c_hat {cert['c_hat']:.6f}, "
                  f"b {flags.get('b_plus', 0):.6f}/{flags.get('b_minus', 0):.6f}, "
                  f"pair passed {pair.passed}, rotation {max(variations):.3f}")


def test_criterion_6_cross_ratio_suite(tmp_path, sol):
    t0 = time.perf_counter()
    code, rep = run_cli(tmp_path, "cross-ratio-audit",
                        "--count-homography", "10000",
                        "--count-chain", "1000",
                        "--count-ordered", "1000")
    rows = projective_series(sol, sol.distributions["D+"],
                             sol.distributions["D-"], sol.point(),
                             [float(k) for k in range(1, 16)])
    alpha = rows[0].cr
    crs = [r.cr for r in rows]
    monotone = all(a < b for a, b in zip(crs, crs[1:]))
    exceeds = all(r.cr >= alpha ** math.floor(r.t) * (1.0 - 1e-12)
                  for r in rows)
    elapsed = time.perf_counter() - t0
    ok = (code == 0
          and rep["homography_invariance_residual"] < 1e-9
          and rep["chain_relation_residual"] < 1e-9
          and rep["ordered_inequality_strict"]
          and alpha > 1.0 and monotone and exceeds
          and elapsed < 5.0)
    assert report(6, ok,
                  f"homography {rep['homography_invariance_residual']:.2e}, "
                  f"chain {rep['chain_relation_residual']:.2e}, "
                  f"alpha {alpha:.4f}, {elapsed:.1f}s")


def test_criterion_7_oracle_equivalence(tmp_path):
    results = {}
    for name in ("sol", "sl2-suspension"):
        code, rep = run_cli(tmp_path, "oracle-diff", "--model", name,
                            name=f"oracle-{name}.json")
        results[name] = (code, rep["holonomy_max_diff"], rep["bracket_slope"])
    ok = all(code == 0 and diff < 1e-6 and abs(slope - 2.0) < 0.1
             for code, diff, slope in results.values())
    assert report(7, ok,
                  ", ".join(f"{n}: diff {d:.2e}, slope {s:.4f}"
                            for n, (_, d, s) in results.items()))


def test_criterion_8_structural_invariants(sol, sl2):
    checks = {}
    checks["jacobi"] = max(sol.jacobi_residual, sl2.jacobi_residual) < 1e-12
    checks["divergence"] = (
        divergence(sol, sol.w_handle, sol.point()) == 0.0
        and divergence(sl2, sl2.w_handle, sl2.point()) == 0.0)

    sol_split = estimate_splitting(
        sol, [sol.point()], method="plane-limit",
        D_plus=sol.distributions["D+"], D_minus=sol.distributions["D-"])
    sl2_split = estimate_splitting(sl2, [sl2.point()],
                                   method="power-direction", W=sl2.w_handle)
    checks["isotropy"] = (isotropy_residual(sol, sol_split) < 1e-10
                          and isotropy_residual(sl2, sl2_split) < 1e-10)
    checks["dalpha"] = (
        abs(dalpha(sol, sol.handle("X"), sol.handle("Y"), sol.point())) > 0.5
        and abs(dalpha(sl2, sl2.handle("U+"), sl2.handle("U-"),
                       sl2.point())) > 0.5)

    containments = []
    for model, names in ((sol, ("D+", "D-")),):
        pts = model.default_samples(5)
        for nm in names:
            rep, induced = is_engel(model, model.distributions[nm], pts)
            assert rep.passed
            containments.append(characteristic_containment(
                model, model.distributions[nm], induced, pts))
    checks["containment"] = max(containments) < 1e-6

    neg_w = FieldHandle("-W", None,
                        coeffs=tuple(-np.asarray(sol.w_handle.coeffs)))
    fwd = estimate_splitting_from_flow(sol, sol.w_handle, sol.point())
    bwd = estimate_splitting_from_flow(sol, neg_w, sol.point())
    checks["w_reversal"] = (
        projective_separation(fwd.e_plus, bwd.e_minus) < 1e-12
        and projective_separation(fwd.e_minus, bwd.e_plus) < 1e-12)

    ok = all(checks.values())
    assert report(8, ok, ", ".join(f"{k}={'ok' if v else 'FAIL'}"
                                   for k, v in checks.items()))
