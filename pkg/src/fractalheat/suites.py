"""Certification suites: named bundles of checks the runner executes in
dependency order (space -> forms/cutoff -> geometry -> propagator ->
harnack/hke).  Each suite returns CertReports plus any plot-ready extras.

All randomness flows from the single seeded generator recorded in the
bundle, so reruns with the same config are byte-identical.
"""

from __future__ import annotations

import math

import numpy as np

from . import families
from .config import ExperimentConfig
from .cutoff import layered_cutoff, measure_layer_constants, plateau_cutoff, certify_csa
from .forms import ReferenceForm, harmonic_profile
from .harnack import holder_estimate, phi_estimate
from .hke import (RateFunction, davies_gaffney_check, gaussian_slope_diagnostic,
                  lower_hke_fit, upper_hke_fit)
from .nonsym import FormSchedule, build_nonsymmetric, verify_assumption0, \
    verify_skew_assumptions
from .poincare import certify_pi, certify_pseudo_pi, certify_sobolev, \
    certify_weighted_pi
from .propagator import SolverConfig, check_caloric_axioms, \
    check_chapman_kolmogorov, check_max_principle, check_positivity, kernel, \
    solve_ivp
from .report import CertReport, PASS, FAIL, ReportBundle, suite_csv
from .scaling import verify_psi
from .space import BallFamily, build_space, certify_rvd, certify_vd


class RunContext:
    """Lazily built shared state for one run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.graph = build_space(cfg.space)
        self.scaling = cfg.scaling()
        self.form = ReferenceForm(self.graph)
        self._schedule = None
        self._profile = None
        self._family = None
        self._cutoff = None
        self._layer_consts = None

    # default geometry anchors per family
    def default_ball(self):
        g = self.graph
        if g.family == "path":
            n = g.meta["n"]
            h = g.mesh
            return (n // 2, 5 * n / 16 * h, n / 4 * h)
        if g.family == "grid":
            side = g.meta["side"]
            h = g.mesh
            return (side * side // 2 + side // 2, side / 4 * h, side / 8 * h)
        diam = g.diameter()
        center = int(np.argmin(((g.coords - g.coords.mean(axis=0)) ** 2).sum(axis=1)))
        return (center, diam / 4, diam / 4)

    def ball_family(self) -> BallFamily:
        x, R, r = self.default_ball()
        g = self.graph
        triples = [(x, R, r)]
        diam = g.diameter()
        for frac in (0.15, 0.3, 0.45):
            triples.append((x, frac * diam, 0.5 * frac * diam))
        return BallFamily(triples)

    @property
    def family(self):
        if self._family is None:
            self._family = families.default_family(self.graph, seed=self.cfg.seed)
        return self._family

    @property
    def profile(self):
        if self._profile is None:
            g = self.graph
            d = g.dist_row(0)
            far = int(np.argmax(d))
            nn = families.nonnegative_family(g, seed=self.cfg.seed + 1, count=16)
            self._profile = harmonic_profile(self.form, [0, far], [0.0, 1.0],
                                             test_family=nn.functions,
                                             family_id=nn.id)
        return self._profile

    @property
    def schedule(self) -> FormSchedule:
        if self._schedule is None:
            if self.cfg.skew_scale == 0.0:
                self._schedule = FormSchedule(self.form)
            else:
                self._schedule = build_nonsymmetric(self.form, self.profile,
                                                    self.cfg.skew_scale)
        return self._schedule

    @property
    def cutoff(self):
        if self._cutoff is None:
            x, R, r = self.default_ball()
            c1, c2 = self.layer_constants
            psi = layered_cutoff(self.graph, x, R, r, eps=0.125, c1=c1, c2=c2,
                                 beta2=self.scaling.beta2)
            certify_csa(self.graph, self.form, psi, self.scaling, self.family)
            self._cutoff = psi
        return self._cutoff

    @property
    def layer_constants(self):
        if self._layer_consts is None:
            self._layer_consts = measure_layer_constants(
                self.graph, self.form, self.scaling, self.family)
        return self._layer_consts

    def solver(self) -> SolverConfig:
        return SolverConfig()


def suite_vd(ctx: RunContext):
    return [certify_vd(ctx.graph, ctx.ball_family())], {}


def suite_rvd(ctx: RunContext):
    x, _, _ = ctx.default_ball()
    diam = ctx.graph.diameter()
    triples = [(x, f * diam, f * diam / 2) for f in (0.2, 0.35, 0.5)]
    return [certify_rvd(ctx.graph, BallFamily(triples))], {}


def suite_psi(ctx: RunContext):
    diam = ctx.graph.diameter()
    rng = np.random.default_rng(ctx.cfg.seed + 7)
    lo = rng.uniform(0.01, 0.2, size=16) * diam
    hi = lo * rng.uniform(1.5, 20.0, size=16)
    return [verify_psi(ctx.scaling, list(zip(lo, hi)))], {}


def suite_pi(ctx: RunContext):
    return [certify_pi(ctx.graph, ctx.form, ctx.scaling, ctx.default_ball())], {}


def suite_wpi(ctx: RunContext):
    return [certify_weighted_pi(ctx.graph, ctx.form, ctx.scaling, ctx.cutoff)], {}


def suite_pseudo(ctx: RunContext):
    x, R, r = ctx.default_ball()
    grid = [R / 4, R / 2, R]
    return [certify_pseudo_pi(ctx.graph, ctx.form, ctx.scaling, (x, R, r),
                              grid, ctx.family)], {}


def suite_sobolev(ctx: RunContext):
    vd = certify_vd(ctx.graph, ctx.ball_family())
    rep = certify_sobolev(ctx.graph, ctx.form, ctx.scaling, ctx.default_ball(),
                          ctx.family, kappa=None, c_vd=vd.constant)
    return [rep], {}


def suite_csa(ctx: RunContext):
    psi = ctx.cutoff
    rep = certify_csa(ctx.graph, ctx.form, psi, ctx.scaling, ctx.family)
    return [rep], {}


def suite_assumptions(ctx: RunContext):
    reps = [verify_assumption0(ctx.schedule, ctx.family)]
    nn = families.nonnegative_family(ctx.graph, seed=ctx.cfg.seed + 2,
                                     count=8, floor=0.05)
    reps.append(verify_skew_assumptions(ctx.schedule, [ctx.cutoff], nn))
    return reps, {}


def suite_propagator(ctx: RunContext):
    g = ctx.graph
    cfg = ctx.solver()
    span = ctx.scaling(g.diameter() / 4)
    sch = ctx.schedule
    k1 = kernel(sch, 0.0, span / 2, cfg)
    k2 = kernel(sch, span / 2, span, cfg)
    kref = kernel(sch, 0.0, span, cfg)
    reps = [check_chapman_kolmogorov(k1, k2, g.mu, kref), check_positivity(kref)]
    x, R, r = ctx.default_ball()
    U = g.ball(x, R + r)
    rng = np.random.default_rng(ctx.cfg.seed + 3)
    f = -np.abs(rng.normal(size=g.n))
    traj = solve_ivp(sch, f, 0.0, span, cfg, domain=U)
    reps.append(check_max_principle(sch, traj, U, theta=cfg.theta))
    reps.append(check_caloric_axioms(sch, U, (0.0, span), cfg,
                                     seed=ctx.cfg.seed + 4))
    profile = [[float(t)] + [float(kernel(sch, 0.0, float(t), cfg).values[i, j])
                             for (i, j) in ((0, 0), (0, min(1, g.n - 1)))]
               for t in np.linspace(span / 8, span, 8)]
    return reps, {"kernel_profile": profile}


def suite_harnack(ctx: RunContext):
    x, R, r = ctx.default_ball()
    radius = R + r
    rep = phi_estimate(ctx.schedule, x, 0.0, radius, ctx.scaling, ctx.solver(),
                       seed=ctx.cfg.seed + 5)
    cfg = ctx.solver()
    g = ctx.graph
    z = int(g.ball(x, radius / 2)[0])
    f = np.zeros(g.n)
    f[z] = 1.0 / g.mu[z]
    span = ctx.scaling(radius)
    traj = solve_ivp(ctx.schedule, f, 0.0, span, cfg)
    hold = holder_estimate(g, traj, (span / 4, span), g.ball(x, radius / 2),
                           ctx.scaling, radius, seed=ctx.cfg.seed + 6)
    return [rep, hold], {"phi": rep.constant}


def suite_hke(ctx: RunContext):
    g = ctx.graph
    cfg = ctx.solver()
    sch = ctx.schedule
    scal = ctx.scaling
    reps = []
    d = g.distance_matrix()
    far = np.unravel_index(np.argmax(d), d.shape)
    reps.append(davies_gaffney_check(sch, int(far[0]), int(far[1]), scal, cfg))
    t_grid = np.geomspace(scal(4 * g.mesh), scal(g.diameter() / 2), 4)
    kers = [kernel(sch, 0.0, float(t), cfg) for t in t_grid]
    reps.append(upper_hke_fit(kers, g, scal))
    x, R, r = ctx.default_ball()
    U = g.ball(x, R + r)
    kers_d = [kernel(sch, 0.0, float(t), cfg, domain=U) for t in t_grid[:2]]
    reps.append(lower_hke_fit(kers_d, g, (x, R + r), scal))
    slope = gaussian_slope_diagnostic(kers, g, x)
    return reps, {"gaussian_slope": slope}


SUITES = {
    "vd": suite_vd, "rvd": suite_rvd, "psi": suite_psi, "pi": suite_pi,
    "wpi": suite_wpi, "pseudo": suite_pseudo, "sobolev": suite_sobolev,
    "csa": suite_csa, "assumptions": suite_assumptions,
    "propagator": suite_propagator, "harnack": suite_harnack, "hke": suite_hke,
}

SUITE_ORDER = ("vd", "rvd", "psi", "pi", "wpi", "pseudo", "sobolev", "csa",
               "assumptions", "propagator", "harnack", "hke")


def run(cfg: ExperimentConfig) -> ReportBundle:
    """Execute the selected suites (dependency order) plus any sweeps."""
    bundle = ReportBundle(seed=cfg.seed, config=cfg.to_dict())
    selected = [s for s in SUITE_ORDER if s in cfg.suites]
    ctx = RunContext(cfg)
    for name in selected:
        reports, extras = SUITES[name](ctx)
        bundle.add(name, reports, extras)
    if cfg.sweep.get("level") and selected:
        rows = []
        for level in cfg.sweep["level"]:
            sp = cfg.space
            sub = ExperimentConfig(space=type(sp)(family=sp.family, level=int(level),
                                                  spacing=sp.spacing,
                                                  conductance=sp.conductance,
                                                  measure=sp.measure,
                                                  metric=sp.metric, cap=sp.cap),
                                   psi_beta=cfg.psi_beta, psi_coeff=cfg.psi_coeff,
                                   psi_c=cfg.psi_c, skew_scale=cfg.skew_scale,
                                   suites=cfg.suites, seed=cfg.seed)
            sctx = RunContext(sub)
            for name in selected:
                reports, _ = SUITES[name](sctx)
                for rep in reports:
                    rows.append({"constant_name": rep.inequality,
                                 "level": int(level), "value": rep.constant})
        bundle.suites["sweep"] = {"reports": [], "constant_vs_level": rows}
    if cfg.sweep.get("lambda"):
        rows = []
        for lam in cfg.sweep["lambda"]:
            sub = ExperimentConfig(space=cfg.space, psi_beta=cfg.psi_beta,
                                   psi_coeff=cfg.psi_coeff, psi_c=cfg.psi_c,
                                   skew_scale=float(lam), suites=cfg.suites,
                                   seed=cfg.seed)
            sctx = RunContext(sub)
            rep = suite_harnack(sctx)[0][0]
            rows.append({"lambda": float(lam), "c_phi": rep.constant})
        bundle.suites.setdefault("sweep", {"reports": []})["phi_vs_lambda"] = rows
    return bundle


def emit_plot_data(bundle: ReportBundle, kind: str) -> str:
    """Long-format CSV extracted from a bundle; no rendering."""
    import io, csv as _csv
    buf = io.StringIO()
    w = _csv.writer(buf, lineterminator="\n")
    if kind == "kernel-profile":
        if "propagator" not in bundle.suites:
            raise KeyError("bundle is missing the propagator suite")
        w.writerow(["t", "p11", "p12"])
        for row in bundle.suites["propagator"].get("kernel_profile", []):
            w.writerow(row)
    elif kind == "phi-vs-lambda":
        sweep = bundle.suites.get("sweep", {})
        if "phi_vs_lambda" not in sweep:
            raise KeyError("bundle is missing a lambda sweep")
        w.writerow(["lambda", "c_phi"])
        for row in sweep["phi_vs_lambda"]:
            w.writerow([row["lambda"], row["c_phi"]])
    elif kind == "constant-vs-level":
        sweep = bundle.suites.get("sweep", {})
        if "constant_vs_level" not in sweep:
            raise KeyError("bundle is missing a level sweep")
        w.writerow(["constant_name", "level", "value"])
        for row in sweep["constant_vs_level"]:
            w.writerow([row["constant_name"], row["level"], row["value"]])
    else:
        raise ValueError(f"unknown plot-data kind {kind!r}")
    return buf.getvalue()
