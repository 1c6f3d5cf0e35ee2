"""Off-diagonal rate functions and sub-Gaussian kernel-bound fits.

The rate functions are the suprema

    rate_plain(R, t)  = sup_{r>0} [ R/r - t / psi_scale(r) ]
    rate_upper(R, t)  = sup_{r>0} [ R/r - (t / r^beta2) R^beta2 / psi_scale(R) ]

clamped at zero.  For a pure power scaling both coincide and have the
stationary-point closed form; otherwise a log-spaced golden-section search
evaluates them.  For psi_scale(r) = r^2 both reduce to R^2 / (4 t).

Fits are suprema of ratios over the sampled kernel sets (certificates for
the samples, not asymptotic claims); regression slopes are diagnostics.
"""

from __future__ import annotations

import math

import numpy as np

from .nonsym import FormSchedule
from .propagator import KernelMatrix, SolverConfig, transition
from .report import CertReport, FAIL, NOT_APPLICABLE, PASS
from .scaling import ScalingFunction
from .space import MetricMeasureGraph


class RateFunction:
    """Evaluates one of the two off-diagonal decay rates."""

    def __init__(self, scaling: ScalingFunction, variant: str = "phi",
                 beta2: float | None = None):
        if variant not in ("phi", "phi_beta"):
            raise ValueError("variant must be 'phi' or 'phi_beta'")
        self.scaling = scaling
        self.variant = variant
        self.beta2 = scaling.beta2 if beta2 is None else beta2
        self.closed_form = scaling.kind == "power"

    def __call__(self, R: float, t: float) -> float:
        return rate(self, R, t)


def _power_rate(beta: float, a: float, R: float, t: float) -> float:
    # stationary point of R/r - (t/a) r^(-beta)
    val = (1.0 - 1.0 / beta) * beta ** (-1.0 / (beta - 1.0)) \
        * (a * R ** beta / t) ** (1.0 / (beta - 1.0))
    return max(val, 0.0)


def _golden_max(fun, lo: float, hi: float, rel_tol: float = 1e-10) -> float:
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = fun(math.exp(c)), fun(math.exp(d))
    while (b - a) > rel_tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fun(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fun(math.exp(d))
    return max(fc, fd)


def rate_array(rf: RateFunction, R, t: float) -> np.ndarray:
    """Vectorized rate over an array of distances at one time."""
    R = np.asarray(R, dtype=float)
    out = np.zeros_like(R)
    pos = R > 0
    if rf.closed_form and rf.variant == "phi":
        s = rf.scaling
        out[pos] = np.maximum(
            (1.0 - 1.0 / s.beta1) * s.beta1 ** (-1.0 / (s.beta1 - 1.0))
            * (s.coeff * R[pos] ** s.beta1 / t) ** (1.0 / (s.beta1 - 1.0)), 0.0)
        return out
    if rf.closed_form and rf.variant == "phi_beta" and rf.beta2 == rf.scaling.beta1:
        s = rf.scaling
        b = rf.beta2     # psi(R)/R^b is the constant coefficient here
        out[pos] = np.maximum(
            (1.0 - 1.0 / b) * b ** (-1.0 / (b - 1.0))
            * (s.coeff * R[pos] ** b / t) ** (1.0 / (b - 1.0)), 0.0)
        return out
    uniq, inv = np.unique(R[pos], return_inverse=True)
    vals = np.array([rate(rf, float(u), t) for u in uniq])
    out[pos] = vals[inv]
    return out


def rate(rf: RateFunction, R: float, t: float) -> float:
    """Supremum over r > 0 of the variant's expression, clamped at 0."""
    if t <= 0:
        raise ValueError("time must be positive")
    if R < 0:
        raise ValueError("distance must be nonnegative")
    if R == 0:
        return 0.0
    s = rf.scaling
    if rf.closed_form:
        if rf.variant == "phi":
            return _power_rate(s.beta1, s.coeff, R, t)
        # phi_beta with beta2 = power exponent coincides with phi
        a_eff = s(R) / R ** rf.beta2
        return _power_rate(rf.beta2, a_eff, R, t)
    if rf.variant == "phi":
        fun = lambda r: R / r - t / s(r)
    else:
        coef = t * R ** rf.beta2 / s(R)
        fun = lambda r: R / r - coef / r ** rf.beta2
    # the maximizer lives between tiny and huge multiples of R
    lo, hi = 1e-8 * R, 1e8 * R
    # coarse log grid then golden refinement around the best cell
    grid = np.geomspace(lo, hi, 200)
    vals = [fun(r) for r in grid]
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    return max(_golden_max(fun, a, b), 0.0)


def davies_gaffney_check(schedule: FormSchedule, x: int, y: int,
                         scaling: ScalingFunction, cfg: SolverConfig,
                         t_grid=None, cprime_grid=None, s: float = 0.0,
                         alpha_minus_c: float = 0.0) -> CertReport:
    """Smallest rate constant C' making the bilinear off-diagonal bound hold.

    f1, f2 default to L2-normalized indicators of the quarter-distance balls
    around x and y.  For each C' on the grid the bound is tested across the
    time grid; the report carries the smallest feasible C' and its binding
    time.
    """
    g = schedule.graph
    d = float(g.dist_row(x)[y])
    if d <= 0:
        raise ValueError("need distinct points")
    bx = g.ball(x, d / 4.0)
    by = g.ball(y, d / 4.0)
    if np.intersect1d(bx, by).size:
        return CertReport(inequality="bilinear-offdiagonal", constant=float("nan"),
                          family=schedule.schedule_id, status=NOT_APPLICABLE,
                          notes="support balls overlap at this mesh")
    mu = g.mu
    f1 = np.zeros(g.n)
    f1[bx] = 1.0
    f1 /= math.sqrt(float(np.sum(f1 ** 2 * mu)))
    f2 = np.zeros(g.n)
    f2[by] = 1.0
    f2 /= math.sqrt(float(np.sum(f2 ** 2 * mu)))
    if t_grid is None:
        t_grid = np.geomspace(scaling(max(4 * g.mesh, d / 8)), scaling(d), 8)
    if cprime_grid is None:
        cprime_grid = np.geomspace(0.01, 100.0, 80)
    rf = RateFunction(scaling, "phi_beta")
    pair_vals = []
    for dt in t_grid:
        T = transition(schedule, s, s + float(dt), cfg)
        lhs = float(np.sum(mu * f2 * (T @ f1)))
        pair_vals.append((float(dt), lhs))
    feasible, binding = None, None
    for cp in cprime_grid:
        ok = True
        worst = None
        for dt, lhs in pair_vals:
            rhs = math.exp(-rf(d, cp * dt) + alpha_minus_c * dt)
            margin = rhs - lhs
            if worst is None or margin < worst[1]:
                worst = (dt, margin)
            if lhs > rhs * (1 + 1e-12):
                ok = False
                break
        if ok:
            feasible, binding = float(cp), worst
            break
    if feasible is None:
        return CertReport(inequality="bilinear-offdiagonal", constant=float("inf"),
                          family=schedule.schedule_id, status=FAIL,
                          notes="no feasible rate constant on the grid",
                          details={"d": d, "t_grid": list(map(float, t_grid))})
    return CertReport(inequality="bilinear-offdiagonal", constant=feasible,
                      witness={"binding_time": binding[0]},
                      family=schedule.schedule_id,
                      details={"d": d, "margin_at_binding": binding[1],
                               "pairings": pair_vals,
                               "alpha_minus_c": alpha_minus_c})


def gaussian_slope_diagnostic(kernels, g: MetricMeasureGraph, x: int,
                              max_arg: float = 4.0) -> dict:
    """Pooled regression slope of log p against d^2/(4 t), per-time demeaned.

    Restricted to the near-field d^2/(4t) <= max_arg: the far lattice tail
    decays sub-Gaussianly and would bias the slope.
    """
    xs, ys, groups = [], [], []
    for k in kernels:
        dt = k.t - k.s
        row = k.values[:, x]
        d = g.dist_row(x)
        arg = (d ** 2) / (4 * dt)
        mask = (row > 1e-300) & (arg <= max_arg)
        xs.append(arg[mask])
        ys.append(np.log(row[mask]))
        groups.append(np.full(mask.sum(), len(groups)))
    xs = np.concatenate(xs)
    ys = np.concatenate(ys)
    groups = np.concatenate(groups)
    # demean per time group: absorbs the on-diagonal normalization
    for gid in np.unique(groups):
        sel = groups == gid
        xs[sel] -= xs[sel].mean()
        ys[sel] -= ys[sel].mean()
    denom = float(np.sum(xs * xs))
    slope = float(np.sum(xs * ys) / denom) if denom > 0 else float("nan")
    return {"slope": slope, "points": int(len(xs))}


def upper_hke_fit(kernels, g: MetricMeasureGraph, scaling: ScalingFunction,
                  alpha_minus_c: float = 0.0, region_radius: float | None = None,
                  cprime_grid=None, slack: float = 4.0) -> CertReport:
    """Sup-of-ratios fit of the two-sided-volume upper bound.

    On-diagonal: smallest C with p(t,x,s,x) <= C e^{(a-c)(t-s)} / V(x, tau).
    Off-diagonal: for each candidate C' the required prefactor is the sup of
    p sqrt(V V) exp(rate - (a-c) dt); the reported C' is the smallest one
    whose prefactor is within ``slack`` of the on-diagonal constant.
    """
    if not kernels:
        raise ValueError("empty fit set")
    if region_radius is None:
        region_radius = g.diameter() / 2.0
    rf = RateFunction(scaling, "phi_beta")
    mu_vol = {}

    def vol(xi, tau):
        key = (xi, round(tau, 12))
        if key not in mu_vol:
            mu_vol[key] = max(g.volume(xi, tau), float(g.mu[xi]))
        return mu_vol[key]

    c_diag = 0.0
    diag_wit = None
    entries = []
    for k in kernels:
        dt = k.t - k.s
        tau = min(scaling.inverse(dt / 2.0), region_radius)
        for xi in range(g.n):
            p_xx = k.values[xi, xi]
            val = p_xx * vol(xi, tau) * math.exp(-alpha_minus_c * dt)
            if val > c_diag:
                c_diag, diag_wit = val, {"x": xi, "t": k.t}
        entries.append((k, dt, tau))
    if cprime_grid is None:
        cprime_grid = np.geomspace(0.01, 100.0, 60)
    chosen = None
    D = g.distance_matrix()
    for cp in cprime_grid:
        log_c_off = -math.inf
        for (k, dt, tau) in entries:
            P = k.values
            mask = P > 1e-300
            if not mask.any():
                continue
            volv = np.array([vol(xi, tau) for xi in range(g.n)])
            log_ratio = np.log(P[mask]) + 0.5 * np.log(np.outer(volv, volv))[mask]
            rates = rate_array(rf, D[mask], cp * dt)
            log_c_off = max(log_c_off, float(
                np.max(log_ratio + rates - alpha_minus_c * dt)))
        if log_c_off <= math.log(slack * max(c_diag, 1e-300)):
            chosen = (float(cp), math.exp(log_c_off))
            break
    excluded = int(sum((k.values <= 1e-300).sum() for k in kernels))
    details = {"on_diagonal": c_diag, "on_diagonal_witness": diag_wit,
               "excluded_entries": excluded}
    if chosen is None:
        details["note"] = "no rate constant met the slack target"
        return CertReport(inequality="upper-kernel-bound", constant=c_diag,
                          family=f"kernels:{len(kernels)}", status=PASS,
                          notes="on-diagonal certificate only", details=details)
    details.update({"c_prime": chosen[0], "off_diagonal": chosen[1]})
    return CertReport(inequality="upper-kernel-bound", constant=chosen[1],
                      witness=diag_wit or {}, family=f"kernels:{len(kernels)}",
                      notes="sup-of-ratios certificate over the sampled set",
                      details=details)


def lower_hke_fit(kernels, g: MetricMeasureGraph, ball, scaling: ScalingFunction,
                  eps: float = 0.25, geodesic_fit: bool | None = None,
                  c2_grid=None, cdd_grid=None) -> CertReport:
    """Near-diagonal (and, on geodesic metrics, off-diagonal) lower fits.

    ``ball`` is (center a, radius r_a) of the Dirichlet domain the kernels
    were built on.  Near-diagonal: the largest c' with
    p >= c' / V(x, psi_inverse(t-s) ^ R_x) over pairs with
    d(x,y) <= eps psi_inverse(t-s) inside the (1-eps) ball.  The chained
    off-diagonal fit runs only when the metric is flagged geodesic.
    """
    a_c, r_a = ball
    if geodesic_fit is None:
        geodesic_fit = g.geodesic
    inner = g.ball(a_c, (1 - eps) * r_a)
    domain_mask = np.zeros(g.n, dtype=bool)
    dom = kernels[0].domain
    domain_mask[np.asarray(dom) if not isinstance(dom, str) else np.arange(g.n)] = True
    comp = np.nonzero(~domain_mask)[0]
    c_near = math.inf
    wit = None
    negative = 0
    for k in kernels:
        dt = k.t - k.s
        rad = scaling.inverse(dt)
        if eps * dt > scaling(r_a):
            continue
        for xi in inner:
            d_row = g.dist_row(xi)
            R_x = float(d_row[comp].min()) if comp.size else r_a
            v = max(g.volume(xi, min(rad, R_x)), float(g.mu[xi]))
            near = inner[d_row[inner] <= eps * rad]
            for yi in near:
                p = k.values[yi, xi]
                if p <= 0:
                    negative += 1
                    continue
                val = p * v
                if val < c_near:
                    c_near, wit = val, {"x": int(xi), "y": int(yi), "t": k.t}
    if not math.isfinite(c_near):
        return CertReport(inequality="lower-kernel-bound", constant=0.0,
                          family=f"kernels:{len(kernels)}", status=NOT_APPLICABLE,
                          notes="no admissible near-diagonal pair at this mesh")
    if negative:
        return CertReport(inequality="lower-kernel-bound", constant=0.0,
                          witness=wit or {}, family=f"kernels:{len(kernels)}",
                          status=FAIL,
                          notes="nonpositive kernel entries in the fit region: "
                                "see the positivity check")
    details = {"near_diagonal": c_near, "eps": eps}
    if geodesic_fit:
        rf = RateFunction(scaling, "phi")
        c2_grid = c2_grid if c2_grid is not None else np.geomspace(0.1, 10.0, 6)
        cdd_grid = cdd_grid if cdd_grid is not None else np.geomspace(0.5, 8.0, 6)
        best = None
        for c2 in c2_grid:
            for cdd in cdd_grid:
                c_off = math.inf
                for k in kernels:
                    dt = k.t - k.s
                    tau = min(scaling.inverse(dt / 2.0), r_a)
                    for xi in inner:
                        v = max(g.volume(xi, tau), float(g.mu[xi]))
                        d_row = g.dist_row(xi)[inner]
                        p_col = k.values[inner, xi]
                        ok = p_col > 0
                        if not ok.any():
                            continue
                        rates = rate_array(rf, d_row[ok], c2 * dt)
                        c_off = min(c_off, float(np.min(
                            p_col[ok] * v * np.exp(cdd * rates))))
                if best is None or (math.isfinite(c_off) and c_off > best[0]):
                    best = (c_off, float(c2), float(cdd))
        details["off_diagonal"] = {"c_prime": best[0], "c_rate": best[1],
                                   "c_exponent": best[2]}
    else:
        details["off_diagonal"] = "not applicable: metric not flagged geodesic"
    return CertReport(inequality="lower-kernel-bound", constant=c_near,
                      witness=wit or {}, family=f"kernels:{len(kernels)}",
                      details=details)
