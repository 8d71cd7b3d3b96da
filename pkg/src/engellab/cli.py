"""Command-line front door.

Exit codes: 0 = pass/converged, 1 = checked and failed (witnesses in
the report), 2 = usage or configuration error, 3 = numerically
inconclusive.  Reports are JSON (schema 1); time series go to CSV, and
--plot renders a PNG figure next to each CSV.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import engel as engel_mod
from . import hyperbolicity as hyp
from .dynamics import (
    DynamicsError,
    cross_ratio,
    chain_relation_residual,
    is_cyclically_ordered,
    linearized_holonomy,
    projective_series,
    ProjectivePoint,
)
from .geometry import (
    DomainError,
    GeometryError,
    characteristic_line,
    is_even_contact,
)
from .models import (
    BUILTIN_NAMES,
    LieAlgebraModel,
    ModelError,
    builtin,
    exact_holonomy,
    load_model,
)
from .reporting import Stopwatch, build_report, dump_report, write_csv

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INCONCLUSIVE = 3


def _thread_cap():
    raw = os.environ.get("ENGEL_LAB_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ModelError(f"ENGEL_LAB_THREADS must be a positive integer, "
                         f"got {raw!r}")
    if n < 1:
        raise ModelError("ENGEL_LAB_THREADS must be a positive integer")
    return n


def _resolve_model(spec: str, chart: bool = False):
    if spec in BUILTIN_NAMES:
        model = builtin(spec)
    elif os.path.exists(spec):
        model = load_model(spec)
    else:
        raise ModelError(
            f"unknown model '{spec}': not a builtin "
            f"({', '.join(BUILTIN_NAMES)}) and no such file"
        )
    if chart:
        if getattr(model, "chart_twin", None) is None:
            raise ModelError(f"model '{spec}' has no chart realization")
        model = model.chart_twin
    return model


def _distribution(model, name):
    if name in model.distributions:
        return model.distributions[name]
    raise ModelError(
        f"model declares no distribution '{name}' "
        f"(available: {', '.join(sorted(model.distributions))})"
    )


def _samples(model, n, seed):
    return model.default_samples(n, np.random.default_rng(seed))


def _periodic_sweep(model, count=32):
    pts = []
    for i, per in enumerate(model.periods):
        if per is None:
            continue
        for k in range(count):
            c = [0.0, 0.0, 0.0, 0.0]
            c[i] = per * k / count
            pts.append(model.point(c))
    return pts


def _positive(value, name):
    if value <= 0:
        raise ModelError(f"{name} must be positive, got {value}")
    return value


def _maybe_plot(args, kind, target, csv_path):
    if not getattr(args, "plot", False) or not csv_path:
        return None
    from . import plots
    png = os.path.splitext(csv_path)[0] + ".png"
    if kind == "series":
        plots.plot_projective_series(target, png)
    else:
        plots.plot_rotation_profile(target, png)
    return png


# ---------------------------------------------------------------------------
# Subcommand handlers: each returns (exit_code, payload dict)


def cmd_verify_even_contact(args):
    model = _resolve_model(args.model, args.chart)
    _positive(args.tol, "--tol")
    E = _distribution(model, args.dist)
    pts = _samples(model, args.samples, args.seed) + _periodic_sweep(model, 8)
    report = is_even_contact(model, E, pts, tol=args.tol)
    payload = {"even_contact": report.as_dict()}
    if report.passed:
        line = characteristic_line(model, E, pts[0])
        payload["characteristic_line"] = list(line.components)
    return (EXIT_PASS if report.passed else EXIT_FAIL), payload


def cmd_verify_engel(args):
    model = _resolve_model(args.model, args.chart)
    _positive(args.tol, "--tol")
    D = _distribution(model, args.dist)
    pts = _samples(model, args.samples, args.seed) + _periodic_sweep(model, 8)
    report, induced = engel_mod.is_engel(model, D, pts, tol=args.tol)
    payload = {"engel": report.as_dict()}
    ok = report.passed
    if report.passed:
        cont = engel_mod.characteristic_containment(model, D, induced, pts)
        cont_tol = 1e-6 if isinstance(model, LieAlgebraModel) else 1e-4
        payload["characteristic_containment"] = cont
        payload["containment_tol"] = cont_tol
        ok = cont < cont_tol
    return (EXIT_PASS if ok else EXIT_FAIL), payload


def cmd_certify_bi_engel(args):
    model = _resolve_model(args.model, args.chart)
    Dp = _distribution(model, args.dist_plus)
    Dm = _distribution(model, args.dist_minus)
    pts = _samples(model, args.samples, args.seed) + _periodic_sweep(model)
    cert = engel_mod.certify_bi_engel(model, Dp, Dm, pts, tol=args.tol)
    return (EXIT_PASS if cert.passed else EXIT_FAIL), \
        {"bi_engel": cert.as_dict()}


def _auto_splitting(model, args):
    pts = _samples(model, args.samples, args.seed)
    has_planes = "D+" in model.distributions and "D-" in model.distributions
    method = args.method
    if method == "auto":
        method = "plane-limit" if has_planes else "power-direction"
    return hyp.estimate_splitting(
        model, pts, method=method, W=model.w_handle,
        D_plus=model.distributions.get("D+"),
        D_minus=model.distributions.get("D-"),
        T=args.splitting_horizon, step=args.step,
    )


def cmd_splitting(args):
    model = _resolve_model(args.model, args.chart)
    _positive(args.splitting_horizon, "--horizon")
    splitting = _auto_splitting(model, args)
    payload = {"splitting": splitting.as_dict()}
    if args.csv and "D+" in model.distributions:
        times = [args.splitting_horizon * (k + 1) / args.csv_points
                 for k in range(args.csv_points)]
        rows = projective_series(
            model, model.distributions["D+"], model.distributions["D-"],
            splitting.samples[0].point, times, step=args.step)
        write_csv(args.csv, ["t", "theta_plus", "theta_minus", "cr"],
                  [(r.t, r.theta_plus, r.theta_minus, r.cr) for r in rows])
        payload["csv"] = args.csv
        png = _maybe_plot(args, "series", rows, args.csv)
        if png:
            payload["figure"] = png
    return EXIT_PASS, payload


def cmd_certify_hyperbolic(args):
    model = _resolve_model(args.model, args.chart)
    _positive(args.horizon, "--horizon")
    _positive(args.dt, "--dt")
    splitting = _auto_splitting(model, args)
    metric = hyp.QuotientMetric.identity([s.point for s in splitting.samples])
    cert = hyp.certify_weak_hyperbolicity(
        model, model.w_handle, splitting, metric=metric,
        T=args.horizon, dt=args.dt, step=args.step)
    payload = {
        "splitting": splitting.as_dict(),
        "certificate": cert.as_dict(),
    }
    if args.average_T is not None:
        _positive(args.average_T, "--average-T")
        avg = hyp.average_metric(model, model.w_handle, metric,
                                 T=args.average_T, step=args.step)
        cert_avg = hyp.certify_weak_hyperbolicity(
            model, model.w_handle, splitting, metric=avg,
            T=args.horizon, dt=args.dt, step=args.step)
        payload["averaged_certificate"] = cert_avg.as_dict()
        payload["average_T"] = args.average_T
    return EXIT_PASS, payload


def cmd_construct_bi_engel(args):
    model = _resolve_model(args.model, args.chart)
    splitting = _auto_splitting(model, args)
    pts = _samples(model, args.samples, args.seed)
    d_plus, d_minus = engel_mod.construct_bi_engel(
        model, model.w_handle, splitting, kappa=args.kappa,
        quadrature_steps=args.quadrature_steps, samples=pts, step=args.step)
    cert = engel_mod.certify_bi_engel(model, d_plus, d_minus, pts)
    resplit = hyp.estimate_splitting(
        model, [splitting.samples[0].point], method="plane-limit",
        D_plus=d_plus, D_minus=d_minus, T=args.splitting_horizon,
        step=args.step)
    roundtrip = max(
        hyp.projective_separation(splitting.samples[0].e_plus,
                                  resplit.samples[0].e_plus),
        hyp.projective_separation(splitting.samples[0].e_minus,
                                  resplit.samples[0].e_minus),
    )
    payload = {
        "splitting": splitting.as_dict(),
        "bi_engel": cert.as_dict(),
        "roundtrip_angle": roundtrip,
        "legs": {
            "plus": list(d_plus.frame[1].coeffs or ()),
            "minus": list(d_minus.frame[1].coeffs or ()),
        },
    }
    return (EXIT_PASS if cert.passed else EXIT_FAIL), payload


def cmd_rotation_profile(args):
    model = _resolve_model(args.model, args.chart)
    D = _distribution(model, args.dist)
    p = model.point(args.point if args.point else (0.0, 0.0, 0.0, 0.0))
    profile = engel_mod.rotation_profile(
        model, model.w_handle, D, p, T=args.horizon, step=args.step,
        dt=args.dt)
    payload = {"rotation_profile": profile.as_dict()}
    if args.csv:
        write_csv(args.csv, ["t", "theta", "total_variation"], profile.rows())
        payload["csv"] = args.csv
        png = _maybe_plot(args, "rotation", profile, args.csv)
        if png:
            payload["figure"] = png
    return (EXIT_FAIL if profile.full_turn else EXIT_PASS), payload


def _random_projective(rng):
    return ProjectivePoint(rng.uniform(0.0, math.pi))


def _distinct_tuple(rng, n):
    while True:
        pts = [_random_projective(rng) for _ in range(n)]
        ok = True
        for i in range(n):
            for j in range(i + 1, n):
                if hyp.projective_separation(pts[i], pts[j]) < 1e-3:
                    ok = False
        if ok:
            return pts


def cmd_cross_ratio_audit(args):
    rng = np.random.default_rng(args.seed)
    worst_h = 0.0
    for _ in range(args.count_homography):
        pts = _distinct_tuple(rng, 4)
        base = cross_ratio(*pts)
        mat = rng.uniform(-1.0, 1.0, size=(2, 2))
        while abs(np.linalg.det(mat)) < 0.1:
            mat = rng.uniform(-1.0, 1.0, size=(2, 2))
        moved = [ProjectivePoint.from_vector(mat @ p.vector) for p in pts]
        worst_h = max(worst_h, abs(cross_ratio(*moved) - base))
    worst_c = 0.0
    for _ in range(args.count_chain):
        pts = _distinct_tuple(rng, 6)
        try:
            worst_c = max(worst_c, chain_relation_residual(*pts))
        except DynamicsError:
            continue
    ordered_ok = True
    checked = 0
    while checked < args.count_ordered:
        angles = np.sort(rng.uniform(0.0, math.pi, size=6))
        if np.min(np.diff(angles)) < 1e-3:
            continue
        x, a, a2, b2, b, y = [ProjectivePoint(float(v)) for v in angles]
        if not is_cyclically_ordered([x, a, a2, b2, b, y]):
            continue
        lhs = cross_ratio(x, a2, b2, y)
        rhs = cross_ratio(x, a, b, y) * cross_ratio(a, a2, b2, b)
        if not (lhs > rhs):
            ordered_ok = False
        checked += 1
    payload = {
        "homography_invariance_residual": worst_h,
        "chain_relation_residual": worst_c,
        "ordered_inequality_strict": ordered_ok,
        "counts": {
            "homography": args.count_homography,
            "chain": args.count_chain,
            "ordered": args.count_ordered,
        },
    }
    ok = worst_h < 1e-9 and worst_c < 1e-9 and ordered_ok
    return (EXIT_PASS if ok else EXIT_FAIL), payload


def cmd_oracle_diff(args):
    lie = _resolve_model(args.model, chart=False)
    if not isinstance(lie, LieAlgebraModel):
        raise ModelError("oracle-diff needs an algebra-backed model")
    chart = lie.chart_twin
    if chart is None:
        raise ModelError(f"model '{args.model}' has no chart realization")
    p = chart.point((0.1, -0.2, 0.3, 0.4))
    worst = 0.0
    t = args.tgrid
    while t <= args.tmax + 1e-12:
        for signed in (t, -t):
            exact = exact_holonomy(lie, signed)
            numeric = linearized_holonomy(chart, chart.w_handle, p, signed,
                                          step=args.step).full_array
            worst = max(worst, float(np.abs(exact - numeric).max()))
        t += args.tgrid

    # order of the difference-stencil bracket error
    hs = [4e-2, 2e-2, 1e-2, 5e-3]
    errs = []
    pts = chart.default_samples(4, np.random.default_rng(args.seed))
    names = chart.frame_names
    for h in hs:
        worst_b = 0.0
        for q in pts:
            for i in range(4):
                for j in range(i + 1, 4):
                    X = chart.handle(names[i], scheme="fd", fd_step=h)
                    Y = chart.handle(names[j], scheme="fd", fd_step=h)
                    num = chart.bracket(X, Y, q)
                    ex = lie.bracket_coeffs(np.eye(4)[i], np.eye(4)[j])
                    worst_b = max(worst_b, float(np.abs(num - ex).max()))
        errs.append(worst_b)
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    payload = {
        "holonomy_max_diff": worst,
        "holonomy_tol": 1e-6,
        "bracket_errors": dict(zip([repr(h) for h in hs], errs)),
        "bracket_slope": slope,
    }
    ok = worst < 1e-6 and abs(slope - 2.0) < 0.1
    return (EXIT_PASS if ok else EXIT_FAIL), payload


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(sp, dist=None, needs_tol=True):
    sp.add_argument("--model", required=True,
                    help="builtin name or model-file path")
    sp.add_argument("--chart", action="store_true",
                    help="use the chart realization of a builtin")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--samples", type=int, default=5)
    sp.add_argument("--output", "-o", default=None,
                    help="report path (default: stdout)")
    if dist is not None:
        sp.add_argument("--dist", default=dist)
    if needs_tol:
        sp.add_argument("--tol", type=float, default=1e-6)


def _add_flow(sp):
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--splitting-horizon", type=float, default=20.0,
                    dest="splitting_horizon")
    sp.add_argument("--method", default="auto",
                    choices=["auto", "plane-limit", "power-direction"])


def build_parser():
    parser = argparse.ArgumentParser(
        prog="engellab",
        description="Verification toolkit for even contact and Engel "
                    "structures and weakly hyperbolic characteristic flows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify-even-contact",
                        help="transverse-form nondegeneracy over a grid")
    _add_common(sp, dist="E")
    sp.set_defaults(handler=cmd_verify_even_contact)

    sp = sub.add_parser("verify-engel",
                        help="bracket-generating ladder of a rank-2 plane")
    _add_common(sp, dist="D+")
    sp.set_defaults(handler=cmd_verify_engel)

    sp = sub.add_parser("certify-bi-engel",
                        help="shared structure / orientations / intersection")
    _add_common(sp, needs_tol=False)
    sp.add_argument("--dist-plus", default="D+", dest="dist_plus")
    sp.add_argument("--dist-minus", default="D-", dest="dist_minus")
    sp.add_argument("--tol", type=float, default=None)
    sp.set_defaults(handler=cmd_certify_bi_engel)

    sp = sub.add_parser("splitting",
                        help="invariant splitting of E/W with diagnostics")
    _add_common(sp, needs_tol=False)
    _add_flow(sp)
    sp.add_argument("--csv", default=None)
    sp.add_argument("--csv-points", type=int, default=80, dest="csv_points")
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(handler=cmd_splitting)

    sp = sub.add_parser("certify-hyperbolic",
                        help="weak-hyperbolicity certificate with constants")
    _add_common(sp, needs_tol=False)
    _add_flow(sp)
    sp.add_argument("--horizon", type=float, default=20.0)
    sp.add_argument("--dt", type=float, default=0.25)
    sp.add_argument("--average-T", type=float, default=None, dest="average_T")
    sp.set_defaults(handler=cmd_certify_hyperbolic)

    sp = sub.add_parser("construct-bi-engel",
                        help="bi-Engel pair from a weakly hyperbolic flow")
    _add_common(sp, needs_tol=False)
    _add_flow(sp)
    sp.add_argument("--kappa", type=float, default=30.0)
    sp.add_argument("--quadrature-steps", type=int, default=61,
                    dest="quadrature_steps")
    sp.set_defaults(handler=cmd_construct_bi_engel)

    sp = sub.add_parser("rotation-profile",
                        help="unwrapped plane angle along the orbit")
    _add_common(sp, dist="D+", needs_tol=False)
    sp.add_argument("--horizon", type=float, default=20.0)
    sp.add_argument("--dt", type=float, default=0.05)
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--point", type=float, nargs=4, default=None)
    sp.add_argument("--csv", default=None)
    sp.add_argument("--plot", action="store_true")
    sp.set_defaults(handler=cmd_rotation_profile)

    sp = sub.add_parser("cross-ratio-audit",
                        help="randomized projective-invariant sweeps")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count-homography", type=int, default=10000,
                    dest="count_homography")
    sp.add_argument("--count-chain", type=int, default=1000,
                    dest="count_chain")
    sp.add_argument("--count-ordered", type=int, default=1000,
                    dest="count_ordered")
    sp.add_argument("--output", "-o", default=None)
    sp.set_defaults(handler=cmd_cross_ratio_audit)

    sp = sub.add_parser("oracle-diff",
                        help="exact vs numeric backend comparison")
    sp.add_argument("--model", required=True)
    sp.add_argument("--tmax", type=float, default=5.0)
    sp.add_argument("--tgrid", type=float, default=0.5)
    sp.add_argument("--step", type=float, default=1e-3)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--output", "-o", default=None)
    sp.set_defaults(handler=cmd_oracle_diff)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0,) else 0
    watch = Stopwatch()
    config = {k: v for k, v in vars(args).items()
              if k not in ("handler",) and not callable(v)}
    seed = getattr(args, "seed", 0)
    try:
        threads = _thread_cap()
        config["threads"] = threads
        code, payload = args.handler(args)
    except hyp.InconclusiveError as exc:
        code, payload = EXIT_INCONCLUSIVE, {"error": str(exc)}
    except (hyp.CertificateRefused, engel_mod.ConstructionError) as exc:
        code, payload = EXIT_FAIL, {"error": str(exc)}
    except ModelError as exc:
        code, payload = EXIT_USAGE, {"error": str(exc)}
    except DomainError as exc:
        code, payload = EXIT_INCONCLUSIVE, {"error": str(exc)}
    except GeometryError as exc:
        code, payload = EXIT_FAIL, {"error": str(exc)}
    report = build_report(args.command, config, payload, seed,
                          watch.elapsed())
    report["exit_code"] = code
    dump_report(report, getattr(args, "output", None))
    return code


if __name__ == "__main__":
    sys.exit(main())
