"""Heat propagators for time-dependent (possibly non-symmetric) schedules.

Implicit theta stepping (backward Euler by default, Crank-Nicolson at
theta = 1/2) on window-aligned uniform grids, plus an exact matrix
exponential for time-independent schedules.  Transition operators compose
exactly over aligned grids, so the two-time kernel identities (composition,
adjoint-transpose duality under the measure weighting) hold to rounding.

Kernels are densities against mu: column x of the kernel matrix is the
evolution of delta_x / mu(x).  Dirichlet restriction deletes rows and
columns outside the domain (absorbing boundary).

Positivity is never assumed: each step records whether its implicit matrix
was structurally an M-matrix (sufficient for positivity preservation), and
``check_positivity`` reports the measured minimum entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .nonsym import FormSchedule
from .report import CertReport, FAIL, NOT_APPLICABLE, PASS

DEFAULT_STEPS_PER_UNIT = 64


@dataclass
class SolverConfig:
    scheme: str = "backward-euler"   # backward-euler | theta | exact-exponential
    theta: float = 1.0
    steps_per_unit: float = DEFAULT_STEPS_PER_UNIT
    steps: int | None = None         # override: total steps on [s, t]
    tol: float = 1e-12

    def __post_init__(self):
        if self.scheme == "backward-euler":
            self.theta = 1.0
        elif self.scheme == "theta":
            if not 0.5 <= self.theta <= 1.0:
                raise ValueError("theta must lie in [1/2, 1]")
        elif self.scheme != "exact-exponential":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.steps is not None and self.steps < 1:
            raise ValueError("step count must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray               # (len(times), n)
    schedule_id: str = ""
    initial: np.ndarray | None = None
    domain: np.ndarray | None = None  # None = global

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if self.initial is not None and not np.allclose(self.states[0], self.initial):
            raise ValueError("first snapshot must equal the initial datum")

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"t={t} not on the trajectory grid")
        return self.states[k]

    def window(self, t0: float, t1: float) -> np.ndarray:
        """Indices of grid times inside [t0, t1]."""
        return np.nonzero((self.times >= t0 - 1e-12) & (self.times <= t1 + 1e-12))[0]


@dataclass
class KernelMatrix:
    s: float
    t: float
    values: np.ndarray               # full (n, n); zero off the domain
    domain: object = "global"
    grid: np.ndarray | None = None
    schedule_id: str = ""
    meta: dict = field(default_factory=dict)

    def min_entry(self) -> float:
        if isinstance(self.domain, str):
            return float(self.values.min())
        U = np.asarray(self.domain)
        return float(self.values[np.ix_(U, U)].min())


def _segments(schedule: FormSchedule, s: float, t: float, cfg: SolverConfig):
    """Split [s, t] at window breakpoints; mid-window generator per segment."""
    pts = [s] + [b for b in schedule.breakpoints() if s < b < t] + [t]
    segs = []
    for a, b in zip(pts[:-1], pts[1:]):
        if cfg.steps is not None:
            n_k = max(1, round(cfg.steps * (b - a) / (t - s)))
        else:
            n_k = max(1, math.ceil((b - a) * cfg.steps_per_unit - 1e-12))
        segs.append((a, b, n_k))
    return segs


def _restrict(Mat: np.ndarray, U) -> np.ndarray:
    if isinstance(U, str):
        return Mat
    U = np.asarray(U)
    return Mat[np.ix_(U, U)]


def _step_diagnostics(S_impl: np.ndarray, S_expl: np.ndarray | None) -> bool:
    """True when the implicit matrix is structurally an M-matrix (nonpositive
    off-diagonal, strict diagonal dominance) and the explicit side, if any,
    is entrywise nonnegative."""
    off = S_impl - np.diag(np.diag(S_impl))
    if off.max() > 1e-13:
        return False
    dom = np.abs(np.diag(S_impl)) - np.abs(off).sum(axis=1)
    if dom.min() <= 0:
        return False
    if S_expl is not None and S_expl.min() < -1e-13:
        return False
    return True


def transition(schedule: FormSchedule, s: float, t: float, cfg: SolverConfig,
               domain="global", want_diagnostics=False):
    """Dense operator mapping data at time s to the solution at time t."""
    if t < s:
        raise ValueError("need s <= t")
    mu = schedule.graph.mu
    n = schedule.graph.n
    U = domain
    if not isinstance(U, str):
        U = np.asarray(U, dtype=np.int64)
        if U.size == 0:
            raise ValueError("empty Dirichlet domain")
    size = n if isinstance(U, str) else len(U)
    T = np.eye(size)
    m_matrix_all = True
    if t == s:
        return (T, True) if want_diagnostics else T
    if cfg.scheme == "exact-exponential":
        if len(set(schedule.window_index(0.5 * (a + b))
                   for a, b, _ in _segments(schedule, s, t, cfg))) > 1:
            raise ValueError("exact exponential needs a time-independent schedule")
        L = _restrict(schedule.generator(0.5 * (s + t)), U)
        T = la.expm((t - s) * L)
        return (T, True) if want_diagnostics else T
    theta = cfg.theta
    for (a, b, n_k) in _segments(schedule, s, t, cfg):
        L = _restrict(schedule.generator(0.5 * (a + b)), U)
        dt = (b - a) / n_k
        S_impl = np.eye(size) - theta * dt * L
        S_expl = np.eye(size) + (1 - theta) * dt * L if theta < 1.0 else None
        m_matrix_all = m_matrix_all and _step_diagnostics(S_impl, S_expl)
        try:
            step = np.linalg.solve(S_impl, S_expl if S_expl is not None else np.eye(size))
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(
                "near-singular step matrix: time step too large for the "
                "schedule's coercivity") from exc
        T = np.linalg.matrix_power(step, n_k) @ T
    return (T, m_matrix_all) if want_diagnostics else T


def solve_ivp(schedule: FormSchedule, f, s: float, T_end: float,
              cfg: SolverConfig, domain="global") -> Trajectory:
    """Theta-scheme trajectory of u' = L_t u from u(s) = f."""
    f = np.asarray(f, dtype=float)
    n = schedule.graph.n
    if f.shape != (n,):
        raise ValueError("initial datum length must match the vertex count")
    U = domain if isinstance(domain, str) else np.asarray(domain, dtype=np.int64)
    restricted = not isinstance(U, str)
    size = n if not restricted else len(U)
    times = [s]
    state = f[U] if restricted else f.copy()
    states = [state.copy()]
    if cfg.scheme == "exact-exponential":
        segs = _segments(schedule, s, T_end, cfg)
        L = _restrict(schedule.generator(0.5 * (s + T_end)), U)
        n_total = sum(nk for _, _, nk in segs)
        dt = (T_end - s) / n_total
        E1 = la.expm(dt * L)
        for k in range(n_total):
            state = E1 @ state
            times.append(s + (k + 1) * dt)
            states.append(state.copy())
    else:
        theta = cfg.theta
        for (a, b, n_k) in _segments(schedule, s, T_end, cfg):
            L = _restrict(schedule.generator(0.5 * (a + b)), U)
            dt = (b - a) / n_k
            S_impl = np.eye(len(state)) - theta * dt * L
            lu_piv = la.lu_factor(S_impl)
            for k in range(n_k):
                rhs = state if theta == 1.0 else state + (1 - theta) * dt * (L @ state)
                state = la.lu_solve(lu_piv, rhs)
                times.append(a + (k + 1) * dt)
                states.append(state.copy())
    states = np.array(states)
    if restricted:
        full = np.zeros((len(times), n))
        full[:, U] = states
        states = full
        f0 = np.zeros(n)
        f0[U] = f[U]
    else:
        f0 = f
    return Trajectory(times=np.array(times), states=states,
                      schedule_id=schedule.schedule_id, initial=f0,
                      domain=None if not restricted else U)


def kernel(schedule: FormSchedule, s: float, t: float, cfg: SolverConfig,
           domain="global") -> KernelMatrix:
    """Two-time kernel p(t, y, s, x): columns are evolutions of delta_x/mu(x)."""
    if t < s:
        raise ValueError("need s <= t")
    n = schedule.graph.n
    mu = schedule.graph.mu
    U = domain if isinstance(domain, str) else np.asarray(domain, dtype=np.int64)
    if not isinstance(U, str):
        if U.size == 0:
            raise ValueError("empty Dirichlet interior")
    T, m_matrix = transition(schedule, s, t, cfg, domain=U, want_diagnostics=True)
    if isinstance(U, str):
        values = T / mu[None, :]
    else:
        values = np.zeros((n, n))
        values[np.ix_(U, U)] = T / mu[U][None, :]
    segs = _segments(schedule, s, t, cfg) if t > s else []
    grid = [s]
    for (a, b, n_k) in segs:
        grid.extend(a + (b - a) * (np.arange(n_k) + 1) / n_k)
    grid = np.array(grid)
    return KernelMatrix(s=s, t=t, values=values, domain=domain, grid=grid,
                        schedule_id=schedule.schedule_id,
                        meta={"m_matrix": m_matrix, "scheme": cfg.scheme,
                              "theta": cfg.theta,
                              "steps": sum(nk for _, _, nk in segs)})


def adjoint_transition(schedule: FormSchedule, s: float, t: float,
                       cfg: SolverConfig) -> np.ndarray:
    """Backward stepping of the adjoint forms; equals the mu-weighted
    transpose of the forward operator on aligned grids."""
    mu = schedule.graph.mu
    n = schedule.graph.n
    T = np.eye(n)
    theta = cfg.theta if cfg.scheme != "exact-exponential" else None
    segs = _segments(schedule, s, t, cfg)
    for (a, b, n_k) in reversed(segs):
        B = schedule.matrix(0.5 * (a + b))
        L_adj = -(B.T / mu[:, None])
        dt = (b - a) / n_k
        if theta is None:
            step = la.expm(dt * L_adj)
        else:
            S_impl = np.eye(n) - theta * dt * L_adj
            S_expl = np.eye(n) + (1 - theta) * dt * L_adj if theta < 1 else np.eye(n)
            step = np.linalg.solve(S_impl, S_expl)
        T = np.linalg.matrix_power(step, n_k) @ T
    return T


def check_chapman_kolmogorov(k1: KernelMatrix, k2: KernelMatrix,
                             mu: np.ndarray, reference: KernelMatrix) -> CertReport:
    """Defect of p(t,.,s,.) against the mu-weighted product of the halves."""
    if abs(k1.t - k2.s) > 1e-12:
        raise ValueError("kernels must share the intermediate time")
    dt1 = np.diff(k1.grid)
    dt2 = np.diff(k2.grid)
    aligned = (dt1.size and dt2.size
               and abs(dt1[0] - dt2[0]) < 1e-12 * max(dt1[0], dt2[0]))
    product = k2.values @ (mu[:, None] * k1.values)
    defect = float(np.max(np.abs(product - reference.values)))
    scale = max(float(np.max(np.abs(reference.values))), 1e-300)
    status = PASS if (not aligned or defect <= 1e-10 * scale) else FAIL
    return CertReport(inequality="kernel-composition", constant=defect / scale,
                      family=k1.schedule_id,
                      status=status,
                      notes="aligned grids compose exactly; misalignment reported, "
                            "never interpolated",
                      details={"aligned": bool(aligned), "defect": defect,
                               "scale": scale})


def check_positivity(k: KernelMatrix, tol: float = 1e-12) -> CertReport:
    m = k.min_entry()
    scale = max(float(np.max(np.abs(k.values))), 1e-300)
    ok = m >= -tol * scale
    return CertReport(inequality="kernel-positivity", constant=m,
                      family=k.schedule_id,
                      status=PASS if ok else FAIL,
                      notes="min entry; the M-matrix flag is the structural "
                            "sufficient condition for the implicit steps",
                      details={"m_matrix_steps": k.meta.get("m_matrix"),
                               "scheme": k.meta.get("scheme")})


def steklov_average(traj: Trajectory, h: float) -> Trajectory:
    """Sliding trapezoidal time average over [t, t+h], on the shortened grid."""
    times = traj.times
    dt_min = float(np.min(np.diff(times)))
    if h < dt_min - 1e-12:
        raise ValueError("averaging window must span at least one grid cell")
    if h > times[-1] - times[0] + 1e-12:
        raise ValueError("averaging window longer than the trajectory")
    # cumulative trapezoid of the states against time
    dt = np.diff(times)[:, None]
    cum = np.vstack([np.zeros((1, traj.states.shape[1])),
                     np.cumsum(0.5 * dt * (traj.states[1:] + traj.states[:-1]), axis=0)])
    out_times, out_states = [], []
    for k, t0 in enumerate(times):
        target = t0 + h
        j = int(np.argmin(np.abs(times - target)))
        if abs(times[j] - target) > 1e-9 * max(1.0, abs(target)):
            continue   # window must end on the grid
        out_times.append(t0)
        out_states.append((cum[j] - cum[k]) / h)
    if len(out_times) < 1:
        raise ValueError("averaging window does not align with the grid")
    return Trajectory(times=np.array(out_times), states=np.array(out_states),
                      schedule_id=traj.schedule_id, initial=out_states[0],
                      domain=traj.domain)


def subsolution_defect(schedule: FormSchedule, traj: Trajectory, U,
                       theta: float = 1.0) -> np.ndarray:
    """Per-step variational defect vector on U (positive = violates).

    Tests the time-integrated inequality against every nonnegative indicator
    supported in U, which on a finite graph reduces to componentwise signs of

        mu (u_{k+1} - u_k) + dt B u_theta   restricted to U.
    """
    U = np.asarray(U, dtype=np.int64)
    mu = schedule.graph.mu
    out = np.full((len(traj.times) - 1, len(U)), 0.0)
    for k in range(len(traj.times) - 1):
        dt = traj.times[k + 1] - traj.times[k]
        t_mid = 0.5 * (traj.times[k] + traj.times[k + 1])
        B = schedule.matrix(t_mid)
        u_eval = theta * traj.states[k + 1] + (1 - theta) * traj.states[k]
        vec = mu * (traj.states[k + 1] - traj.states[k]) + dt * (B @ u_eval)
        out[k] = vec[U]
    return out


def check_max_principle(schedule: FormSchedule, traj: Trajectory, U,
                        theta: float = 1.0, tol: float = 1e-10) -> CertReport:
    """Nonpositivity of a subsolution with nonpositive initial part on U.

    Hypothesis violations (nonzero initial positive part on U, or positive
    exterior values) make the check not-applicable rather than a failure.
    """
    U = np.asarray(U, dtype=np.int64)
    scale = max(float(np.max(np.abs(traj.states))), 1e-300)
    init_pos = float(np.max(traj.states[0][U], initial=-np.inf))
    comp = np.setdiff1d(np.arange(schedule.graph.n), U)
    ext_pos = float(np.max(traj.states[:, comp], initial=-np.inf)) if comp.size else -np.inf
    if init_pos > tol * scale or ext_pos > tol * scale:
        return CertReport(inequality="parabolic-max-principle", constant=float("nan"),
                          status=NOT_APPLICABLE, family=traj.schedule_id,
                          notes="hypothesis violated: positive part present at the "
                                "initial time or outside the domain")
    defect = subsolution_defect(schedule, traj, U, theta=theta)
    sub_def = float(defect.max(initial=0.0))
    worst = float(traj.states[:, U].max())
    status = PASS if worst <= tol * scale else FAIL
    return CertReport(inequality="parabolic-max-principle", constant=worst,
                      family=traj.schedule_id, status=status,
                      notes="max over the cylinder of the evolved data",
                      details={"subsolution_defect": sub_def, "scale": scale})


def check_super_mean_value(schedule: FormSchedule, traj: Trajectory, U,
                           s: float, cfg: SolverConfig,
                           tol: float = 1e-10) -> CertReport:
    """u(t, x) >= (Dirichlet evolution of u(s, .))(x) for supersolutions."""
    U = np.asarray(U, dtype=np.int64)
    f = traj.at(s)
    scale = max(float(np.max(np.abs(traj.states))), 1e-300)
    if float(traj.states.min()) < -tol * scale:
        return CertReport(inequality="super-mean-value", constant=float("nan"),
                          status=NOT_APPLICABLE, family=traj.schedule_id,
                          notes="trajectory not nonnegative")
    worst = np.inf
    for k, t in enumerate(traj.times):
        if t <= s:
            continue
        T = transition(schedule, s, t, cfg, domain=U)
        evolved = np.zeros(schedule.graph.n)
        evolved[U] = T @ f[U]
        worst = min(worst, float((traj.states[k] - evolved)[U].min()))
    if not np.isfinite(worst):
        worst = 0.0
    status = PASS if worst >= -tol * scale else FAIL
    return CertReport(inequality="super-mean-value", constant=worst,
                      family=traj.schedule_id, status=status,
                      notes="min over the cylinder of u minus its Dirichlet sweep",
                      details={"scale": scale})


def check_caloric_axioms(schedule: FormSchedule, U, interval, cfg: SolverConfig,
                         seed: int = 0, tol: float = 1e-9) -> CertReport:
    """Sample checks of the caloric-space axioms for the solution space.

    (i) linearity, (ii) restriction stability, (iii) Dirichlet evolutions
    solve, (iv) constants solve (gated on left-strong locality), (v) the
    super-mean-value property.
    """
    U = np.asarray(U, dtype=np.int64)
    s, T_end = interval
    rng = np.random.default_rng(seed)
    n = schedule.graph.n
    mu = schedule.graph.mu
    theta = cfg.theta
    results = {}

    f1 = np.abs(rng.normal(size=n))
    f2 = np.abs(rng.normal(size=n))
    tr1 = solve_ivp(schedule, f1, s, T_end, cfg, domain=U)
    tr2 = solve_ivp(schedule, f2, s, T_end, cfg, domain=U)
    tr_sum = Trajectory(times=tr1.times, states=tr1.states + tr2.states,
                        schedule_id=schedule.schedule_id,
                        initial=tr1.states[0] + tr2.states[0], domain=U)
    d_lin = np.abs(subsolution_defect(schedule, tr_sum, U, theta=theta)).max()
    scale = max(float(np.abs(tr_sum.states).max()), 1e-300)
    results["linearity"] = float(d_lin / scale)

    # restriction: the same solution tested inside a sub-domain
    inner = U[: max(1, len(U) // 2)]
    d_res = np.abs(subsolution_defect(schedule, tr1, inner, theta=theta)).max()
    results["restriction"] = float(d_res / scale)

    d_dir = np.abs(subsolution_defect(schedule, tr1, U, theta=theta)).max()
    results["dirichlet_solves"] = float(d_dir / scale)

    if schedule.is_left_local:
        const_defect = float(np.abs(schedule.matrix(s if math.isfinite(s) else 0.0).T
                                    @ np.ones(n)).max())
        # E_t(1, g) = 0 for all g iff B^T 1 = 0
        results["constants"] = const_defect
    else:
        results["constants"] = None

    f3 = np.abs(rng.normal(size=n))
    tr3 = solve_ivp(schedule, f3, s, T_end, cfg, domain=U)
    smv = check_super_mean_value(schedule, tr3, U, s, cfg, tol=tol)
    results["super_mean_value"] = smv.constant

    worst = max(v for k, v in results.items()
                if v is not None and k != "super_mean_value")
    ok = worst <= tol and smv.passed and \
        (results["constants"] is None or results["constants"] <= tol)
    return CertReport(inequality="caloric-axioms", constant=worst,
                      family=schedule.schedule_id,
                      status=PASS if ok else FAIL,
                      notes="axiom (constants) gated on left-strong locality",
                      details=results)
