"""Time-space cylinders, solution estimates, and Harnack-constant estimation.

Cylinders pair a metric ball with a time window proportional to the scaling
of its radius.  Two conventions are supported: windows cut at fractions
tau_i of psi_scale(r) (the default), and hat windows cut at psi_scale(sigma_i r).
The conversion between them picks sigma_i = psi_inverse(tau_i psi_scale(r)) / r,
which realizes the hat cylinders inside the plain ones.

All suprema and infima are exact maxima over realized grid points; nothing
is interpolated.  The estimators measure the constants the sub/supersolution
and mean-value bounds would need on the supplied trajectories, and the
Harnack constant is the family supremum of sup(early)/inf(late) over
nonnegative solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cutoff import plateau_cutoff
from .forms import ReferenceForm
from .nonsym import FormSchedule
from .propagator import SolverConfig, Trajectory, solve_ivp
from .report import CertReport, FAIL, NOT_APPLICABLE, PASS
from .scaling import ScalingFunction
from .space import MetricMeasureGraph

DEFAULT_TAUS = (1.0 / 6.0, 1.0 / 3.0, 0.5, 1.0)
DEFAULT_DELTA = 0.5


@dataclass
class Cylinder:
    """One realized time-space cylinder: a vertex set and a time window."""
    center: int
    anchor: float
    radius: float
    window: tuple          # (t0, t1)
    vertices: np.ndarray
    label: str = ""

    @property
    def empty(self) -> bool:
        return self.vertices.size == 0 or self.window[1] <= self.window[0]


@dataclass
class HarnackCylinders:
    full: Cylinder
    early: Cylinder        # Q^-
    late: Cylinder         # Q^+
    params: dict = field(default_factory=dict)


def make_cylinders(g: MetricMeasureGraph, x: int, a: float, r: float,
                   scaling: ScalingFunction, taus=DEFAULT_TAUS,
                   delta: float = DEFAULT_DELTA,
                   convention: str = "tau") -> HarnackCylinders:
    t1, t2, t3, t4 = taus
    if not (0 < t1 < t2 < t3 < t4 <= 1):
        raise ValueError("need 0 < tau1 < tau2 < tau3 < tau4 <= 1")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    psi_r = scaling(r)
    ball = g.ball(x, r)
    core = g.ball(x, delta * r)
    if convention == "tau":
        cuts = [a + t * psi_r for t in taus]
    elif convention == "hat-sigma":
        cuts = [a + scaling(scaling.inverse(t * psi_r) / r * r) for t in taus]
        # by construction psi(sigma_i r) = tau_i psi(r): identical cuts, the
        # hat cylinders realize inside the plain ones with equality
    else:
        raise ValueError(f"unknown cylinder convention {convention!r}")
    sigmas = [scaling.inverse(t * psi_r) / r for t in taus]
    full = Cylinder(x, a, r, (a, a + psi_r), ball, "Q")
    early = Cylinder(x, a, r, (cuts[0], cuts[1]), core, "Q-")
    late = Cylinder(x, a, r, (cuts[2], cuts[3]), core, "Q+")
    if early.empty or late.empty:
        raise ValueError("cylinder empty at this mesh (delta r or the time "
                         "window is too small)")
    return HarnackCylinders(full=full, early=early, late=late,
                            params={"taus": list(taus), "delta": delta,
                                    "sigmas": sigmas, "psi_r": psi_r,
                                    "convention": convention})


def _cyl_values(traj: Trajectory, cyl: Cylinder) -> np.ndarray:
    ks = traj.window(*cyl.window)
    if ks.size == 0:
        return np.empty((0, cyl.vertices.size))
    return traj.states[np.ix_(ks, cyl.vertices)]


def _time_weights(traj: Trajectory, window) -> tuple[np.ndarray, np.ndarray]:
    """Grid indices in the window and their (right-endpoint) cell widths."""
    ks = traj.window(*window)
    ks = ks[ks > 0]
    widths = traj.times[ks] - traj.times[ks - 1]
    return ks, widths


def backward_interval(a: float, sigma: float, psi_r: float, orientation: str):
    if orientation == "minus":
        return (a - sigma * psi_r, a)
    return (a, a + sigma * psi_r)


def energy_estimate_check(schedule: FormSchedule, traj: Trajectory, psi,
                          p: float, x: int, a: float, r: float,
                          scaling: ScalingFunction,
                          sigma_pair=(0.5, 1.0), delta_pair=(0.5, 1.0),
                          orientation: str = "minus", a1: float = 0.5,
                          eps_floor: float | None = None,
                          skew_constants=(0.0, 0.0)) -> CertReport:
    """Measured prefactor of the sup + gradient energy bound for u^p.

    LHS is the sup over the inner time window of the psi^2-weighted p-mass
    plus a1 times the time-integrated energy of u^{p/2}; the driver is the
    p-mass over the larger cylinder.  The report normalizes the raw ratio by
    the structural shape ((1+C2)/psi_scale(dhat r) + C3) p^beta2
    + 2/(shat psi_scale(r)).
    """
    if p == 0:
        raise ValueError("p must be nonzero")
    g = schedule.graph
    mu = g.mu
    form = schedule.reference
    sigma_p, sigma = sigma_pair
    delta_p, delta = delta_pair
    if not (0 < sigma_p < sigma <= 1 and 0 < delta_p < delta <= 1):
        raise ValueError("need 0 < sigma' < sigma <= 1 and 0 < delta' < delta <= 1")
    psi_r = scaling(r)
    core = g.ball(x, delta * r)
    u = traj.states
    if float(u.min()) < -1e-9 * max(1.0, float(np.abs(u).max())):
        raise ValueError("trajectory must be nonnegative on the cylinder")
    if p < 1:
        eps = eps_floor if eps_floor is not None else 1e-12 * max(float(u.max()), 1.0)
        u = u + eps
    pv = psi.values

    inner = backward_interval(a, sigma_p, psi_r, orientation)
    outer = backward_interval(a, sigma, psi_r, orientation)
    ks_in = traj.window(*inner)
    if ks_in.size == 0:
        raise ValueError("inner time window contains no grid point")
    sup_mass = max(float(np.sum(u[k] ** p * pv ** 2 * mu)) for k in ks_in)
    ks_g, widths = _time_weights(traj, inner)
    grad = 0.0
    for k, w in zip(ks_g, widths):
        up2 = u[k] ** (p / 2.0)
        grad += w * float(np.sum(pv ** 2 * form.energy_density(up2, up2) * mu))
    lhs = sup_mass + a1 * grad

    ks_o, widths_o = _time_weights(traj, outer)
    driver = sum(w * float(np.sum((u[k] ** p * mu)[core]))
                 for k, w in zip(ks_o, widths_o))
    if driver <= 0:
        return CertReport(inequality="energy-estimate", constant=float("inf"),
                          family=traj.schedule_id, status=NOT_APPLICABLE,
                          notes="zero driver mass on the outer cylinder")
    c2, c3 = skew_constants
    dhat = delta - delta_p
    shat = sigma - sigma_p
    shape = ((1 + c2) / scaling(dhat * r) + c3) * abs(p) ** scaling.beta2 \
        + 2.0 / (shat * psi_r)
    raw = lhs / driver
    return CertReport(inequality="energy-estimate", constant=raw / shape,
                      family=traj.schedule_id,
                      notes="raw LHS/driver normalized by the structural shape",
                      details={"raw_prefactor": raw, "shape": shape, "p": p,
                               "sup_mass": sup_mass, "gradient_term": grad,
                               "driver": driver, "a1": a1,
                               "orientation": orientation})


def mve_check(traj: Trajectory, p: float, g: MetricMeasureGraph, x: int,
              a: float, r: float, scaling: ScalingFunction, kappa: float,
              sigma_pair=(0.5, 1.0), delta_pair=(0.5, 1.0),
              orientation: str = "minus", a1_prime: float = 1.0,
              a2_prime: float = 1.0, eps_floor: float | None = None) -> CertReport:
    """Measured mean-value constant: sup u^p over the inner cylinder against
    the bracket-weighted p-mass of the outer one."""
    if p == 0:
        raise ValueError("p must be nonzero")
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    mu = g.mu
    sigma_p, sigma = sigma_pair
    delta_p, delta = delta_pair
    psi_r = scaling(r)
    ball = g.ball(x, r)
    inner_core = g.ball(x, delta_p * r)
    outer_core = g.ball(x, delta * r)
    u = traj.states
    if p < 1:
        eps = eps_floor if eps_floor is not None else 1e-12 * max(float(u.max()), 1.0)
        u = u + eps
    inner = backward_interval(a, sigma_p, psi_r, orientation)
    outer = backward_interval(a, sigma, psi_r, orientation)
    ks_in = traj.window(*inner)
    if ks_in.size == 0 or inner_core.size == 0:
        raise ValueError("empty inner cylinder")
    sup_p = float(np.max(u[np.ix_(ks_in, inner_core)] ** p))
    ks_o, widths = _time_weights(traj, outer)
    mass = sum(w * float(np.sum((u[k] ** p * mu)[outer_core]))
               for k, w in zip(ks_o, widths))
    if mass <= 0:
        return CertReport(inequality="mean-value", constant=float("inf"),
                          family=traj.schedule_id, status=NOT_APPLICABLE,
                          notes="zero p-mass on the outer cylinder")
    dhat = delta - delta_p
    shat = sigma - sigma_p
    p_pow = abs(p) ** scaling.beta2 if p > 0 else 1.0 + abs(p) ** scaling.beta2
    bracket = (a1_prime + a2_prime * scaling(dhat * r)) * dhat ** (-scaling.beta2) \
        * p_pow + 1.0 / shat
    expo = (2 * kappa - 1) / (kappa - 1)
    vol_b = float(mu[ball].sum())
    A = sup_p * psi_r * vol_b / (bracket ** expo * mass)
    return CertReport(inequality="mean-value", constant=A,
                      family=traj.schedule_id,
                      details={"p": p, "sup_p": sup_p, "mass": mass,
                               "bracket": bracket, "kappa": kappa,
                               "orientation": orientation})


def log_lemma_stat(g: MetricMeasureGraph, traj: Trajectory, x: int, a: float,
                   r: float, scaling: ScalingFunction, orientation: str = "plus",
                   sigma: float = 0.5, delta: float = 0.5,
                   psi_values: np.ndarray | None = None,
                   eps_floor: float | None = None, n_lambda: int = 16) -> CertReport:
    """Superlevel-measure statistic of log u against its weighted anchor mean.

    Centers log u_eps at c = the psi^2-weighted spatial average of -log u_eps
    at the anchor time, then reports sup over a lambda grid of

        lambda * mubar{ (t,z) : +/- (log u_eps + c) > lambda } / (psi_scale(r) mu(B)).
    """
    u = traj.states
    sup_u = float(u.max())
    eps = eps_floor if eps_floor is not None else (1e-12 * sup_u if sup_u > 0 else 0.0)
    if float(u.min()) + eps <= 0:
        raise ValueError("need a strictly positive floor for the log statistic")
    mu = g.mu
    core = g.ball(x, delta * r)
    ball = g.ball(x, r)
    psi = psi_values
    if psi is None:
        psi = plateau_cutoff(g, x, delta * r, (1 - delta) * r).values \
            if delta < 1 else np.ones(g.n)
    log_u = np.log(u + eps)
    k_anchor = int(np.argmin(np.abs(traj.times - a)))
    c = -float(np.sum(log_u[k_anchor] * psi ** 2 * mu) / np.sum(psi ** 2 * mu))
    window = backward_interval(a, sigma, scaling(r), orientation)
    ks, widths = _time_weights(traj, window)
    v = log_u[np.ix_(ks, core)] + c
    sign = 1.0 if orientation == "minus" else -1.0
    w = sign * v     # count where w > lambda
    w_max = float(w.max(initial=0.0))
    if w_max <= 0:
        return CertReport(inequality="log-superlevel", constant=0.0,
                          family=traj.schedule_id,
                          details={"c": c, "lambda_grid": []})
    lam_grid = np.geomspace(w_max / 100.0, w_max, n_lambda)
    cellw = widths[:, None] * mu[core][None, :]
    norm = scaling(r) * float(mu[ball].sum())
    best, best_lam = 0.0, None
    for lam in lam_grid:
        measure = float(cellw[w > lam].sum())
        val = lam * measure / norm
        if val > best:
            best, best_lam = val, float(lam)
    return CertReport(inequality="log-superlevel", constant=best,
                      witness={"lambda": best_lam}, family=traj.schedule_id,
                      details={"c": c, "n_lambda": n_lambda,
                               "orientation": orientation})


def phi_estimate(schedule: FormSchedule, x: int, a: float, r: float,
                 scaling: ScalingFunction, cfg: SolverConfig,
                 taus=DEFAULT_TAUS, delta: float = DEFAULT_DELTA,
                 n_kernel: int = 8, n_random: int = 4, seed: int = 0,
                 constants_bundle=None) -> CertReport:
    """Harnack constant over a family of nonnegative solutions on the cylinder.

    Default family: Dirichlet kernel columns started from sources in the
    core ball, plus global evolutions of random nonnegative data.  Members
    with nonpositive late infimum are skipped and counted.  The hat-window
    statistic (windows cut at psi_scale(sigma_i r)) demonstrates containment
    of the converted cylinders.
    """
    g = schedule.graph
    cyls = make_cylinders(g, x, a, r, scaling, taus=taus, delta=delta)
    ball = cyls.full.vertices
    rng = np.random.default_rng(seed)
    members = []
    sources = rng.choice(cyls.early.vertices, size=min(n_kernel, cyls.early.vertices.size),
                         replace=False)
    for z in sources:
        f = np.zeros(g.n)
        f[z] = 1.0 / g.mu[z]
        members.append(("kernel-column", z,
                        solve_ivp(schedule, f, a, a + cyls.params["psi_r"], cfg,
                                  domain=ball)))
    for j in range(n_random):
        f = np.abs(rng.normal(size=g.n)) + 0.1
        members.append(("random-data", j,
                        solve_ivp(schedule, f, a, a + cyls.params["psi_r"], cfg)))
    best, witness, skipped = 0.0, None, 0
    for kind, tag, traj in members:
        early = _cyl_values(traj, cyls.early)
        late = _cyl_values(traj, cyls.late)
        if early.size == 0 or late.size == 0:
            skipped += 1
            continue
        inf_late = float(late.min())
        if inf_late <= 0:
            skipped += 1
            continue
        ratio = float(early.max()) / inf_late
        if ratio > best:
            best, witness = ratio, {"member": kind, "tag": int(tag)}
    if witness is None:
        return CertReport(inequality="harnack", constant=float("nan"),
                          family=f"kernels:{n_kernel}+random:{n_random}",
                          status=NOT_APPLICABLE, notes="no usable family member")
    details = {"taus": list(taus), "delta": delta, "skipped": skipped,
               "sigmas": cyls.params["sigmas"]}
    if constants_bundle:
        details["constants_bundle"] = dict(constants_bundle)
    return CertReport(inequality="harnack", constant=best, witness=witness,
                      family=f"kernels:{len(sources)}+random:{n_random}/seed:{seed}",
                      notes="sup(early)/inf(late) over the family; exact grid maxima",
                      details=details)


def holder_estimate(g: MetricMeasureGraph, traj: Trajectory, window,
                    vertices, scaling: ScalingFunction, r: float,
                    budget: float | None = None, seed: int = 0,
                    max_pairs: int = 4000) -> CertReport:
    """Holder exponent fit over sampled time-space pairs in the cylinder.

    Sampled pairs are binned by the combined separation
    rho = psi_inverse(|t - t'|) + d(y, y'); the per-bin maximum of
    |u(t,y) - u(t',y')| is the empirical modulus of continuity, and its
    log-log regression slope is the exponent estimate.  The best prefactor
    against sup|u| / r^alpha is certified over all sampled pairs.
    """
    ks = traj.window(*window)
    verts = np.asarray(vertices)
    if ks.size < 2 or verts.size < 2:
        raise ValueError("cylinder too small for pair sampling")
    rng = np.random.default_rng(seed)
    sup_u = float(np.abs(traj.states[np.ix_(ks, verts)]).max())
    if sup_u == 0:
        return CertReport(inequality="holder", constant=0.0,
                          family=traj.schedule_id, status=NOT_APPLICABLE,
                          notes="zero trajectory on the cylinder")
    pairs = []
    for _ in range(max_pairs):
        k1, k2 = rng.choice(ks, size=2)
        y1, y2 = rng.choice(verts, size=2)
        if k1 == k2 and y1 == y2:
            continue
        du = abs(traj.states[k1, y1] - traj.states[k2, y2])
        rho = scaling.inverse(abs(traj.times[k1] - traj.times[k2])) \
            + g.dist_row(y1)[y2]
        if du > 0 and rho > 0:
            pairs.append((math.log(rho), math.log(du)))
    if len(pairs) < 8:
        return CertReport(inequality="holder", constant=float("inf"),
                          family=traj.schedule_id, status=NOT_APPLICABLE,
                          notes="constant trajectory: exponent unbounded "
                                "(capped report)",
                          details={"alpha": 1.0, "capped": True})
    arr = np.array(pairs)
    edges = np.linspace(arr[:, 0].min(), arr[:, 0].max() + 1e-12, 13)
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (arr[:, 0] >= lo) & (arr[:, 0] < hi)
        if sel.any():
            xs.append(0.5 * (lo + hi))
            ys.append(arr[sel, 1].max())
    xs, ys = np.array(xs), np.array(ys)
    A = np.stack([xs, np.ones(len(xs))], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, ys, rcond=None)
    alpha = float(coef[0])
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(res[0]) / ss_tot if res.size and ss_tot > 0 else 1.0
    alpha_hat = min(max(alpha, 1e-6), 1.0)
    # best prefactor at the fitted exponent, over every sampled pair
    c_best = float(np.max(np.exp(arr[:, 1] - alpha_hat * arr[:, 0]))
                   / (sup_u / r ** alpha_hat))
    status = PASS if budget is None or c_best <= budget else FAIL
    return CertReport(inequality="holder", constant=c_best,
                      family=traj.schedule_id, budget=budget, status=status,
                      notes="slope of the binned modulus-of-continuity envelope",
                      details={"alpha": alpha_hat, "alpha_raw": alpha,
                               "r_squared": r2, "pairs": len(pairs),
                               "bins": len(xs)})


def bombieri_parameters(sigma_star: float, delta_star: float, count: int = 8):
    """The bookkeeping schedule sigma_j = 1 - (1 - sigma*) / (1 + j).

    Documented for reproducing the abstract iteration's parameter choices;
    it has no runtime role (the Harnack estimator measures the conclusion
    directly).
    """
    js = np.arange(count)
    return (1 - (1 - sigma_star) / (1 + js)), (1 - (1 - delta_star) / (1 + js))
