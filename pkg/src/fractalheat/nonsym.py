"""Time-dependent, possibly non-symmetric perturbations of the reference form.

A schedule is the reference energy plus a skew part built from a profile h:

    E_t(f, g) = E(f, g) + int g dG(f, h_t) - int f dG(g, h_t),

with h_t piecewise constant in t (a finite window list), so propagator
composition over aligned grids stays exact.  The skew part vanishes on the
diagonal, the symmetric part equals the reference form, and the structural
decomposition into a strongly local part, a boundary part and the pair of
first-order parts (l, r) holds by construction.

Assumption checks (continuity, ellipticity sandwich, coercivity pair,
product/chain-rule defects for l, and the quantitative skew bounds against
certified cutoffs) are measured over explicit test families and reported,
never proved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .forms import ReferenceForm, HarmonicProfile
from .report import CertReport, INFEASIBLE, PASS


def _weighted_gamma_matrix(form: ReferenceForm, h: np.ndarray) -> np.ndarray:
    """M_h with int g dG(f,h) dmu = g^T M_h f."""
    n = form.n
    a, b, w = form.graph.edges_a, form.graph.edges_b, form.graph.weights
    dh = h[a] - h[b]
    M = np.zeros((n, n))
    np.add.at(M, (a, a), 0.5 * w * dh)
    np.add.at(M, (b, b), 0.5 * w * (-dh))
    np.add.at(M, (a, b), -0.5 * w * dh)
    np.add.at(M, (b, a), -0.5 * w * (-dh))
    return M


@dataclass
class Window:
    t0: float
    t1: float
    profile: HarmonicProfile
    scale: float = 1.0

    def contains(self, t: float) -> bool:
        return self.t0 <= t <= self.t1


class FormSchedule:
    """Reference form plus an optional piecewise-constant-in-time skew part."""

    def __init__(self, reference: ReferenceForm, windows=None, schedule_id=""):
        self.reference = reference
        self.windows = list(windows or [])
        for win in self.windows:
            if len(win.profile.values) != reference.n:
                raise ValueError("profile lives on a different graph")
        self.schedule_id = schedule_id or ("symmetric" if not self.windows else "skew")
        self._cache: dict[int, dict] = {}

    @property
    def graph(self):
        return self.reference.graph

    @property
    def is_skew_free(self) -> bool:
        return all(w.scale == 0.0 or not np.any(w.profile.values) for w in self.windows)

    @property
    def span(self):
        if not self.windows:
            return (-math.inf, math.inf)
        return (min(w.t0 for w in self.windows), max(w.t1 for w in self.windows))

    def window_index(self, t: float) -> int:
        if not self.windows:
            return -1
        for i, w in enumerate(self.windows):
            if w.contains(t):
                return i
        raise ValueError(f"t={t} outside the schedule span {self.span}")

    def breakpoints(self):
        pts = set()
        for w in self.windows:
            if math.isfinite(w.t0):
                pts.add(w.t0)
            if math.isfinite(w.t1):
                pts.add(w.t1)
        return sorted(pts)

    def profile_at(self, t: float) -> np.ndarray:
        i = self.window_index(t)
        if i < 0:
            return np.zeros(self.reference.n)
        w = self.windows[i]
        return w.scale * w.profile.values

    def _parts(self, t: float) -> dict:
        i = self.window_index(t)
        if i not in self._cache:
            h = (self.windows[i].scale * self.windows[i].profile.values
                 if i >= 0 else np.zeros(self.reference.n))
            A = self.reference.laplacian.toarray()
            M_h = _weighted_gamma_matrix(self.reference, h)
            self._cache[i] = {"A": A, "M_h": M_h, "K": M_h - M_h.T, "h": h}
        return self._cache[i]

    def matrix(self, t: float) -> np.ndarray:
        """B_t with E_t(f, g) = g^T B_t f."""
        p = self._parts(t)
        return p["A"] + p["K"]

    def skew_matrix(self, t: float) -> np.ndarray:
        return self._parts(t)["K"]

    def generator(self, t: float) -> np.ndarray:
        """L_t = -diag(1/mu) B_t, so u' = L_t u is the heat equation."""
        return -(self.matrix(t) / self.graph.mu[:, None])

    def bilinear(self, t: float, f, g) -> float:
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        return float(g @ (self.matrix(t) @ f))

    def adjoint(self) -> "FormSchedule":
        """Schedule of the transposed forms E_t(g, f)."""
        adj = FormSchedule(self.reference, schedule_id=self.schedule_id + "-adjoint")
        adj.windows = [Window(w.t0, w.t1, w.profile, -w.scale) for w in self.windows]
        return adj

    # left-strong locality (constants killed in the first slot) holds only
    # without a skew part; used to gate the caloric-constant axiom
    @property
    def is_left_local(self) -> bool:
        return self.is_skew_free


def build_nonsymmetric(form: ReferenceForm, profile: HarmonicProfile,
                       scale: float, t0=-math.inf, t1=math.inf) -> FormSchedule:
    if len(profile.values) != form.n:
        raise ValueError("profile lives on a different graph")
    return FormSchedule(form, [Window(t0, t1, profile, scale)],
                        schedule_id=f"skew:{scale}")


def time_dependent_schedule(form: ReferenceForm, windows) -> FormSchedule:
    """windows: iterable of (t0, t1, profile, scale)."""
    ws = [Window(t0, t1, prof, s) for (t0, t1, prof, s) in windows]
    return FormSchedule(form, ws, schedule_id=f"windows:{len(ws)}")


# -- structural decomposition --------------------------------------------------

class Decomposition:
    """The four-part split of E_t: strongly local + boundary + l + r."""

    def __init__(self, schedule: FormSchedule, t: float):
        self.B = schedule.matrix(t)
        self.ones = np.ones(schedule.reference.n)

    def full(self, f, g):
        return float(g @ (self.B @ f))

    def sym(self, f, g):
        return 0.5 * (self.full(f, g) + self.full(g, f))

    def boundary(self, f, g):
        """E_t^sym(fg, 1)."""
        return self.sym(np.asarray(f) * np.asarray(g), self.ones)

    def strongly_local(self, f, g):
        return self.sym(f, g) - self.boundary(f, g)

    def left(self, f, g):
        fg = np.asarray(f) * np.asarray(g)
        return 0.25 * (self.full(fg, self.ones) - self.full(self.ones, fg)
                       + self.full(f, g) - self.full(g, f))

    def right(self, f, g):
        return -self.left(g, f)

    def identity_defect(self, f, g):
        lhs = self.full(f, g)
        rhs = (self.strongly_local(f, g) + self.boundary(f, g)
               + self.left(f, g) + self.right(f, g))
        return abs(lhs - rhs)


def decompose(schedule: FormSchedule, t: float) -> Decomposition:
    return Decomposition(schedule, t)


def l_product_defect(dec: Decomposition, u, f, v) -> float:
    """l(uf, v) - l(u, fv) - l(f, uv); exact for affine triples."""
    u, f, v = (np.asarray(x, dtype=float) for x in (u, f, v))
    return abs(dec.left(u * f, v) - dec.left(u, f * v) - dec.left(f, u * v))


def l_chain_defect(dec: Decomposition, phi, dphi, u, v) -> float:
    """l(phi(u), v) - l(u, phi'(u) v)."""
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    return abs(dec.left(phi(u), v) - dec.left(u, dphi(u) * v))


# -- structural assumption checks ---------------------------------------------

def verify_assumption0(schedule: FormSchedule, family, times=None,
                       c_grid=None) -> CertReport:
    """Measure the structural constants of the form family.

    Reports: the continuity constant (sup |E_t(f,g)| / ||f||_F ||g||_F over
    family pairs), the ellipticity sandwich constant of the strongly local
    part against the reference energy, a feasible coercivity pair (alpha, c)
    minimizing alpha - c over a c-grid, and the l product/chain rule defects.
    """
    fns = list(family)
    if not fns:
        raise ValueError("empty test family")
    ref = schedule.reference
    if times is None:
        lo, hi = schedule.span
        times = [0.0 if not math.isfinite(lo) else 0.5 * (lo + hi)]
    c_grid = np.linspace(0.05, 1.0, 20) if c_grid is None else np.asarray(c_grid)

    c_star = 0.0
    sandwich = 1.0
    energies = np.array([ref.energy(f) for f in fns])
    norms = np.array([ref.norm_f_sq(f) for f in fns])
    masses = np.array([float(np.sum(np.asarray(f) ** 2 * ref.graph.mu)) for f in fns])
    diag_vals = {}
    for t in times:
        dec = decompose(schedule, t)
        for i, f in enumerate(fns):
            diag_vals[(t, i)] = dec.full(f, f)
            for j in range(i, len(fns)):
                g = fns[j]
                denom = math.sqrt(norms[i] * norms[j])
                if denom > 0:
                    c_star = max(c_star, abs(dec.full(f, g)) / denom)
            if energies[i] > 1e-14 * norms[i]:
                s = dec.strongly_local(f, f) / energies[i]
                if s > 0:
                    sandwich = max(sandwich, s, 1.0 / s)

    # coercivity: E_t(f,f) + alpha |f|^2 >= c ||f||_F^2, with 0 < c <= alpha
    best = None
    for c in c_grid:
        alpha_req = c
        for (t, i), e_t in diag_vals.items():
            if masses[i] > 0:
                alpha_req = max(alpha_req, (c * norms[i] - e_t) / masses[i])
        gap = alpha_req - c
        if best is None or gap < best["gap"] - 1e-15 or \
                (abs(gap - best["gap"]) <= 1e-15 and c > best["c"]):
            best = {"alpha": float(alpha_req), "c": float(c), "gap": float(gap)}

    # product/chain rule defects for l, on consecutive family triples
    t0 = times[0]
    dec = decompose(schedule, t0)
    prod_defs, chain_defs = [], []
    for i in range(min(len(fns) - 2, 8)):
        u, f, v = fns[i], fns[i + 1], fns[i + 2]
        prod_defs.append(l_product_defect(dec, u, f, v))
        chain_defs.append(l_chain_defect(dec, lambda s: s ** 2, lambda s: 2 * s, u, v))
    return CertReport(
        inequality="structural-assumptions",
        constant=c_star,
        family=getattr(family, "id", f"family:{len(fns)}"),
        status=PASS,
        notes="constants measured over the family; defects exact only for affine data",
        details={
            "continuity": c_star,
            "sandwich": sandwich,
            "alpha": best["alpha"], "c": best["c"], "alpha_minus_c": best["gap"],
            "l_product_defect": max(prod_defs) if prod_defs else 0.0,
            "l_chain_defect": max(chain_defs) if chain_defs else 0.0,
            "times": list(times),
        })


def _solve_bundle(rows):
    """Min-sum nonnegative (C_first, C_second, C_11) covering lhs <= a*C11 + b*Cf + c*Cs."""
    usable = [(a, b, c, l) for (a, b, c, l) in rows if l > 0 or max(a, b, c) > 0]
    infeasible = [i for i, (a, b, c, l) in enumerate(rows)
                  if l > 1e-13 and max(a, b, c) <= 1e-300]
    if infeasible:
        return None, infeasible
    if not usable:
        return (0.0, 0.0, 0.0), []
    A_ub = [[-b, -c, -a] for (a, b, c, _) in usable]
    b_ub = [-l for (_, _, _, l) in usable]
    res = linprog(c=[1.0, 1.0, 1.0], A_ub=A_ub, b_ub=b_ub,
                  bounds=[(0, None)] * 3, method="highs")
    if not res.success:
        return None, list(range(len(rows)))
    cf, cs, c11 = (float(v) for v in res.x)
    return (cf, cs, c11), []


def verify_skew_assumptions(schedule: FormSchedule, cutoffs, family,
                            times=None, m_grid=(1.0, 2.0, 4.0),
                            positivity_floor=1e-8) -> CertReport:
    """Smallest feasible constant bundles for the quantitative skew bounds.

    For each certified cutoff (carrying epsilon and C0) and family member,
    both sides of the three bounds are evaluated; the smallest nonnegative
    (C2, C3, C11), (C4, C5, C11) and (C6, C7, C11) covering every instance
    solve a small linear program.  Uniform positivity is required of the
    family for the reciprocal bound (enforced by flooring).
    """
    fns = [np.asarray(f, dtype=float) for f in family]
    if not fns:
        raise ValueError("empty test family")
    for f in fns:
        if np.any(f < 0):
            raise ValueError("skew-assumption families must be nonnegative")
    ref = schedule.reference
    mu = ref.graph.mu
    if times is None:
        lo, hi = schedule.span
        times = [0.0 if not math.isfinite(lo) else 0.5 * (lo + hi)]

    rows1, rows2, rows_dav = [], [], []
    ones = np.ones(ref.n)
    for t in times:
        A = schedule.reference.laplacian.toarray()
        K = schedule.skew_matrix(t)
        for psi in cutoffs:
            eps = psi.epsilon
            c0 = psi.c0
            if eps is None or c0 is None or not np.isfinite(c0):
                raise ValueError("cutoffs must carry a certified (epsilon, C0)")
            beta2 = psi.beta2
            c1_eps = c0 * eps ** ((1.0 - beta2) / 2.0)
            psi_r = psi.psi_of_r
            ball = psi.outer_ball
            pv = psi.values
            for f in fns:
                g_ff = ref.energy_density(f, f)
                a_coef = math.sqrt(eps) * float(np.sum(pv ** 2 * g_ff * mu))
                mass_B = float(np.sum((f ** 2 * mu)[ball]))
                b_coef = c1_eps / psi_r * mass_B
                c_coef = c1_eps * mass_B
                fp = f * pv
                f2p2 = f ** 2 * pv ** 2
                lhs = (abs(float(ones @ A @ f2p2))
                       + abs(float(ones @ K @ f2p2))
                       + abs(float((fp * pv) @ K @ f)))
                rows1.append((a_coef, b_coef, c_coef, lhs))

                f_pos = np.maximum(f, positivity_floor * max(1.0, float(f.max())))
                logf = np.log(f_pos)
                g_log = ref.energy_density(logf, logf)
                a2 = math.sqrt(eps) * float(np.sum(pv ** 2 * g_log * mu))
                vol_B = float(np.sum(mu[ball]))
                rows2.append((a2, c1_eps / psi_r * vol_B, c1_eps * vol_B,
                              abs(float((pv ** 2 / f_pos) @ K @ f_pos))))

                for M in m_grid:
                    phi = np.exp(-M * pv)
                    phi2 = phi ** 2
                    aD = math.sqrt(eps) * M * float(np.sum(phi2 * g_ff * mu))
                    massD = float(np.sum(f ** 2 * phi2 * mu))
                    lhsD = (abs(float(ones @ A @ (f ** 2 * phi2)))
                            + abs(float((f * phi2) @ K @ f)))
                    rows_dav.append((aD, c1_eps / psi_r * M * massD,
                                     c1_eps * M * massD, lhsD))

    bundle1, bad1 = _solve_bundle(rows1)
    bundle2, bad2 = _solve_bundle(rows2)
    bundle_d, bad_d = _solve_bundle(rows_dav)
    failed = bundle1 is None or bundle2 is None or bundle_d is None
    details = {
        "zero_order": None if bundle1 is None else
            {"C2": bundle1[0], "C3": bundle1[1], "C11": bundle1[2]},
        "reciprocal": None if bundle2 is None else
            {"C4": bundle2[0], "C5": bundle2[1], "C11": bundle2[2]},
        "exponential": None if bundle_d is None else
            {"C6": bundle_d[0], "C7": bundle_d[1], "C11": bundle_d[2]},
        "infeasible_rows": {"zero_order": bad1, "reciprocal": bad2,
                            "exponential": bad_d},
        "m_grid": list(m_grid),
    }
    headline = 0.0 if bundle1 is None else sum(bundle1)
    return CertReport(
        inequality="skew-bounds",
        constant=headline,
        family=getattr(family, "id", f"family:{len(fns)}"),
        status=INFEASIBLE if failed else PASS,
        notes="min-sum bundles over (cutoff, member, time) instances",
        details=details)
