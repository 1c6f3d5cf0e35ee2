"""Command-line front end.

Subcommands: space, forms, cutoff, certify, prop, harnack, hke, run,
plot-data.  Exit codes: 0 when everything passed or was not applicable,
2 when any check failed, 1 on usage or config errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import families
from .config import ExperimentConfig, load_config, KNOWN_SUITES
from .cutoff import layered_cutoff, measure_layer_constants, certify_csa
from .forms import ReferenceForm, harmonic_profile
from .harnack import phi_estimate, DEFAULT_TAUS
from .hke import upper_hke_fit, gaussian_slope_diagnostic
from .nonsym import build_nonsymmetric, FormSchedule
from .poincare import certify_pi
from .propagator import SolverConfig, kernel, check_positivity
from .report import ReportBundle, suite_csv
from .space import build_space, parse_space_spec
from .suites import run as run_suites, emit_plot_data

EXIT_FAIL = 2
EXIT_USAGE = 1


def _json_out(obj, path=None):
    text = json.dumps(obj, sort_keys=True, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        print(text)


def _load_profile(path, form):
    with open(path) as fh:
        doc = json.load(fh)
    from .forms import HarmonicProfile
    return HarmonicProfile(values=np.asarray(doc["values"], dtype=float),
                           c_h_prime=doc.get("c_h_prime", float("nan")),
                           c_h=doc.get("c_h", float("nan")),
                           family=doc.get("family", ""))


def _schedule_from_args(args, form):
    skew = getattr(args, "skew", None)
    if not skew:
        return FormSchedule(form)
    path, _, scale = skew.partition(":")
    profile = _load_profile(path, form)
    return build_nonsymmetric(form, profile, float(scale or 1.0))


def cmd_space(args):
    g = build_space(parse_space_spec(args.spec))
    out = {"family": g.family, "vertices": g.n, "edges": len(g.weights),
           "mesh": g.mesh, "total_mass": g.total_mass(),
           "diameter": g.diameter(), "meta": g.meta}
    if args.dump:
        with open(args.dump, "w") as fh:
            fh.write(g.to_json())
        out["dumped_to"] = args.dump
    _json_out(out, args.out)
    return 0


def cmd_forms(args):
    g = build_space(parse_space_spec(args.space))
    form = ReferenceForm(g)
    if args.action == "build-skew":
        if args.profile:
            profile = _load_profile(args.profile, form)
        else:
            d = g.dist_row(0)
            far = int(np.argmax(d))
            nn = families.nonnegative_family(g, seed=args.seed, count=16)
            profile = harmonic_profile(form, [0, far], [0.0, 1.0],
                                       test_family=nn.functions, family_id=nn.id)
        sched = build_nonsymmetric(form, profile, args.scale)
        doc = {"schedule": sched.schedule_id,
               "windows": [{"t0": w.t0, "t1": w.t1, "scale": w.scale,
                            "profile": {"values": w.profile.values.tolist(),
                                        "c_h_prime": w.profile.c_h_prime,
                                        "c_h": w.profile.c_h,
                                        "family": w.profile.family}}
                           for w in sched.windows]}
        _json_out(doc, args.out)
        return 0
    if args.action == "profile":
        d = g.dist_row(0)
        far = int(np.argmax(d))
        nn = families.nonnegative_family(g, seed=args.seed, count=16)
        profile = harmonic_profile(form, [0, far], [0.0, 1.0],
                                   test_family=nn.functions, family_id=nn.id)
        _json_out({"values": profile.values.tolist(),
                   "c_h_prime": profile.c_h_prime, "c_h": profile.c_h,
                   "family": profile.family}, args.out)
        return 0
    raise SystemExit(EXIT_USAGE)


def cmd_cutoff(args):
    g = build_space(parse_space_spec(args.space))
    form = ReferenceForm(g)
    cfg_scaling = parse_space_spec(args.space)
    from .config import ExperimentConfig as _EC
    scal = _EC(space=cfg_scaling).scaling()
    fam = families.default_family(g, seed=args.seed)
    c1, c2 = measure_layer_constants(g, form, scal, fam)
    psi = layered_cutoff(g, args.center, args.R, args.r, eps=args.eps,
                         c1=c1, c2=c2, beta2=scal.beta2)
    rep = certify_csa(g, form, psi, scal, fam)
    _json_out({"cutoff": {"center": args.center, "R": args.R, "r": args.r,
                          "eps": args.eps, "tag": psi.tag,
                          "values": psi.values.tolist()},
               "certification": rep.to_dict()}, args.out)
    return 0 if rep.passed else EXIT_FAIL


def cmd_certify(args):
    g = build_space(parse_space_spec(args.space))
    form = ReferenceForm(g)
    from .config import ExperimentConfig as _EC
    scal = _EC(space=parse_space_spec(args.space)).scaling()
    x = args.center if args.center is not None else g.n // 2
    R = args.R if args.R is not None else g.diameter() / 4
    r = args.r if args.r is not None else R / 2
    rep = certify_pi(g, form, scal, (x, R, r),
                     mode="strong" if not args.weak else "weak")
    _json_out(rep.to_dict(), args.out)
    return 0 if rep.passed else EXIT_FAIL


def cmd_prop(args):
    g = build_space(parse_space_spec(args.space))
    form = ReferenceForm(g)
    sched = _schedule_from_args(args, form)
    cfg = SolverConfig(steps_per_unit=args.steps_per_unit)
    domain = "global"
    if args.domain and args.domain != "global":
        kind, _, ball = args.domain.partition(":")
        if kind != "dirichlet":
            raise SystemExit(EXIT_USAGE)
        inner = ball.strip("ball()").split(",")
        domain = g.ball(int(inner[0]), float(inner[1]))
    k = kernel(sched, args.s, args.t, cfg, domain=domain)
    pos = check_positivity(k)
    out = {"s": args.s, "t": args.t, "min_entry": k.min_entry(),
           "positivity": pos.to_dict(),
           "entries": k.values.tolist() if g.n <= 64 else "suppressed (large)"}
    _json_out(out, args.out)
    return 0 if pos.passed else EXIT_FAIL


def cmd_harnack(args):
    g = build_space(parse_space_spec(args.space))
    form = ReferenceForm(g)
    sched = _schedule_from_args(args, form)
    from .config import ExperimentConfig as _EC
    scal = _EC(space=parse_space_spec(args.space)).scaling()
    taus = tuple(float(Fraction(t)) for t in args.tau.split(","))
    n_kernel = 8
    if args.family.startswith("kernels:"):
        n_kernel = int(args.family.split(":")[1])
    x = args.center if args.center is not None else g.n // 2
    r = args.radius if args.radius is not None else g.diameter() / 2
    rep = phi_estimate(sched, x, 0.0, r, scal, SolverConfig(), taus=taus,
                       delta=args.delta, n_kernel=n_kernel, seed=args.seed)
    print(suite_csv([rep]), end="")
    if args.out:
        _json_out(rep.to_dict(), args.out)
    return 0 if rep.passed else EXIT_FAIL


def cmd_hke(args):
    g = build_space(parse_space_spec(args.space))
    form = ReferenceForm(g)
    sched = _schedule_from_args(args, form)
    from .config import ExperimentConfig as _EC
    scal = _EC(space=parse_space_spec(args.space)).scaling()
    lo, hi, kind, count = args.t_grid.split(":")
    ts = (np.geomspace(float(lo), float(hi), int(count)) if kind == "geometric"
          else np.linspace(float(lo), float(hi), int(count)))
    cfg = SolverConfig()
    kers = [kernel(sched, 0.0, float(t), cfg) for t in ts]
    rep = upper_hke_fit(kers, g, scal)
    slope = gaussian_slope_diagnostic(kers, g, g.n // 2)
    rows = []
    for k in kers:
        rows.append({"inequality": "upper-kernel-bound", "constant": k.t,
                     "status": "point", "family": rep.family})
    _json_out({"fit": rep.to_dict(), "slope": slope}, args.out)
    return 0 if rep.passed else EXIT_FAIL


def cmd_run(args):
    try:
        cfg = load_config(args.config)
    except (ValueError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    bundle = run_suites(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    out_json = os.path.join(cfg.output_dir, args.name + ".json")
    bundle.save(out_json)
    for suite, entry in bundle.suites.items():
        rows = entry.get("reports", [])
        if rows:
            with open(os.path.join(cfg.output_dir, f"{args.name}-{suite}.csv"),
                      "w") as fh:
                fh.write(suite_csv(rows))
    print(out_json)
    return 0 if bundle.all_passed() else EXIT_FAIL


def cmd_plot_data(args):
    bundle = ReportBundle.load(args.bundle)
    try:
        text = emit_plot_data(bundle, args.kind)
    except KeyError as exc:
        print(f"missing suite: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fractalheat",
                                description="heat-flow inequality certification "
                                            "on finite metric measure graphs")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("space", help="build a space and print its summary")
    sp.add_argument("spec", help="family=gasket,level=4 or gasket:4")
    sp.add_argument("--dump", help="write the graph JSON here")
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_space)

    fo = sub.add_parser("forms", help="profiles and skew schedules")
    fo.add_argument("action", choices=["build-skew", "profile"])
    fo.add_argument("--space", default="path:8")
    fo.add_argument("--profile", help="profile JSON (for build-skew)")
    fo.add_argument("--scale", type=float, default=1.0)
    fo.add_argument("--seed", type=int, default=0)
    fo.add_argument("--out")
    fo.set_defaults(fn=cmd_forms)

    cu = sub.add_parser("cutoff", help="build and certify a layered cutoff")
    cu.add_argument("action", choices=["build"])
    cu.add_argument("--space", default="path:32")
    cu.add_argument("--eps", type=float, default=0.125)
    cu.add_argument("--center", type=int, default=0)
    cu.add_argument("--R", type=float, required=True)
    cu.add_argument("--r", type=float, required=True)
    cu.add_argument("--seed", type=int, default=0)
    cu.add_argument("--out")
    cu.set_defaults(fn=cmd_cutoff)

    ce = sub.add_parser("certify", help="Poincare certification of one ball")
    ce.add_argument("--space", default="path:32")
    ce.add_argument("--center", type=int)
    ce.add_argument("--R", type=float)
    ce.add_argument("--r", type=float)
    ce.add_argument("--weak", action="store_true")
    ce.add_argument("--out")
    ce.set_defaults(fn=cmd_certify)

    pr = sub.add_parser("prop", help="kernels and their checks")
    pr.add_argument("action", choices=["kernel"])
    pr.add_argument("--space", default="path:8")
    pr.add_argument("--skew", help="profile.json:scale")
    pr.add_argument("--s", type=float, default=0.0)
    pr.add_argument("--t", type=float, required=True)
    pr.add_argument("--domain", default="global",
                    help="global or dirichlet:ball(center,radius)")
    pr.add_argument("--steps-per-unit", type=float, default=64)
    pr.add_argument("--out")
    pr.set_defaults(fn=cmd_prop)

    ha = sub.add_parser("harnack", help="Harnack constant estimation")
    ha.add_argument("action", choices=["phi"])
    ha.add_argument("--space", default="gasket:3")
    ha.add_argument("--skew", help="profile.json:scale")
    ha.add_argument("--tau", default="1/6,1/3,1/2,1")
    ha.add_argument("--delta", type=float, default=0.5)
    ha.add_argument("--family", default="kernels:8")
    ha.add_argument("--center", type=int)
    ha.add_argument("--radius", type=float)
    ha.add_argument("--seed", type=int, default=0)
    ha.add_argument("--out")
    ha.set_defaults(fn=cmd_harnack)

    hk = sub.add_parser("hke", help="kernel-bound fits")
    hk.add_argument("action", choices=["upper"])
    hk.add_argument("--space", default="path:128")
    hk.add_argument("--skew")
    hk.add_argument("--t-grid", default="0.01:1:geometric:16")
    hk.add_argument("--out")
    hk.set_defaults(fn=cmd_hke)

    ru = sub.add_parser("run", help="execute a config-driven suite bundle")
    ru.add_argument("--config", required=True)
    ru.add_argument("--name", default="report")
    ru.set_defaults(fn=cmd_run)

    pl = sub.add_parser("plot-data", help="extract plot-ready CSV from a bundle")
    pl.add_argument("--bundle", required=True)
    pl.add_argument("--kind", required=True,
                    choices=["kernel-profile", "phi-vs-lambda", "constant-vs-level"])
    pl.add_argument("--out")
    pl.set_defaults(fn=cmd_plot_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
