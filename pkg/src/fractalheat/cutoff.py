"""Cutoff functions and the annulus cutoff-energy certification.

Two constructions: a plain plateau (linear ramp in the distance across the
annulus) and a layered sum of plateau cutoffs over a geometric sequence of
sub-annuli.  The layered construction takes a target epsilon and per-layer
constants (c1, c2); its layer widths shrink geometrically and the series is
truncated at the mesh, with the residual weight folded into one final layer
so the total weight telescopes to exactly 1 on the inner ball.

Certification measures the smallest C0 with

    int_A f^2 dG(psi, psi)
        <= eps int_A psi^2 dG(f, f)
           + C0 eps^(1 - beta2/2) / psi_scale(r) int_A psi f^2 dmu

over a test family, where A is the annulus.  The exponential variant checks
the same control for phi = exp(M psi), with the measured chain-rule defect
reported as an explicit additive allowance (graph energies only satisfy the
chain rule approximately).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .forms import ReferenceForm
from .report import CertReport, FAIL, INFEASIBLE, PASS, NOT_APPLICABLE
from .scaling import ScalingFunction
from .space import MetricMeasureGraph


@dataclass
class CutoffFunction:
    values: np.ndarray
    center: int
    inner: float              # R: plateau radius
    width: float              # r: declared annulus width
    epsilon: float | None = None
    c0: float | None = None
    beta2: float | None = None
    psi_of_r: float | None = None   # scaling evaluated at the width
    family: str = ""
    tag: str = "plateau"
    outer_ball: np.ndarray = field(default=None, repr=False)
    annulus: np.ndarray = field(default=None, repr=False)
    annulus_empty: bool = False
    meta: dict = field(default_factory=dict)

    def check_invariants(self, g: MetricMeasureGraph, tol=1e-12):
        d = g.dist_row(self.center)
        v = self.values
        assert np.all(v >= -tol) and np.all(v <= 1 + tol)
        assert np.all(np.abs(v[d < self.inner] - 1.0) <= tol)
        assert np.all(np.abs(v[d >= self.inner + self.width]) <= tol)


def plateau_cutoff(g: MetricMeasureGraph, x: int, R: float, r: float,
                   epsilon: float = 0.125) -> CutoffFunction:
    """Linear ramp: 1 on B(x,R), 0 outside B(x,R+r)."""
    if r <= 0 or R <= 0:
        raise ValueError("need positive R and r")
    d = g.dist_row(x)
    values = np.clip((R + r - d) / r, 0.0, 1.0)
    outer = np.nonzero(d < R + r)[0]
    ann = np.nonzero((d >= R) & (d < R + r))[0]
    return CutoffFunction(values=values, center=x, inner=R, width=r,
                          epsilon=epsilon, tag="plateau",
                          outer_ball=outer, annulus=ann,
                          annulus_empty=(ann.size == 0))


def layered_cutoff(g: MetricMeasureGraph, x: int, R: float, r: float,
                   eps: float, c1: float, c2: float, beta2: float,
                   rho: float = 0.75, weight_floor: float = 1e-12) -> CutoffFunction:
    """Geometric stack of plateau cutoffs over shrinking sub-annuli.

    The decay rate lam = log(1 + sqrt(eps/c1)) ties the layer weights
    b_n = exp(-n lam) to the target eps; layer widths s_n shrink like
    exp(-n lam / beta2) and sum to rho * r.  Construction stops when the
    next layer would fall below the mesh width or its weight below
    ``weight_floor``; the leftover weight goes to one last plateau over the
    remaining annulus so the weights sum to exactly 1.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if r <= g.mesh:
        raise ValueError("annulus width at or below mesh: no vertex separates the balls")
    if not 0 < rho < 1:
        raise ValueError("rho = r'/r must lie in (0, 1)")
    lam = math.log(1.0 + math.sqrt(eps / c1))
    r_prime = rho * r
    c_lam = (math.exp(lam / beta2) - 1.0) * rho
    layers = []          # (inner radius offset, width, weight)
    r_prev, b_prev = 0.0, 1.0
    n = 1
    while True:
        s_n = c_lam * r * math.exp(-n * lam / beta2)
        b_n = math.exp(-n * lam)
        if s_n < g.mesh or b_prev - b_n < weight_floor or r_prev + s_n > r_prime + 1e-15:
            break
        layers.append((r_prev, s_n, b_prev - b_n))
        r_prev += s_n
        b_prev = b_n
        n += 1
    # residual layer: all remaining weight on the remaining annulus
    if r_prime - r_prev > 1e-15 and b_prev > 0:
        layers.append((r_prev, r_prime - r_prev, b_prev))
        b_prev = 0.0
    values = np.zeros(g.n)
    total_w = 0.0
    for (off, s, wgt) in layers:
        sub = plateau_cutoff(g, x, R + off, s)
        values += wgt * sub.values
        total_w += wgt
    if total_w > 0:
        values /= total_w   # guards rounding; total_w is 1 by construction
    d = g.dist_row(x)
    outer = np.nonzero(d < R + r)[0]
    ann = np.nonzero((d >= R) & (d < R + r))[0]
    out = CutoffFunction(values=values, center=x, inner=R, width=r,
                         epsilon=eps, beta2=beta2,
                         tag=f"layered(lam={lam:.4g},n={len(layers)})",
                         outer_ball=outer, annulus=ann,
                         annulus_empty=(ann.size == 0),
                         meta={"lambda": lam, "layers": len(layers),
                               "layer_list": layers,
                               "r_prime": r_prime, "c1": c1, "c2": c2})
    return out


def measure_layer_constants(g: MetricMeasureGraph, form: ReferenceForm,
                            scaling: ScalingFunction, family,
                            probes=None) -> tuple[float, float]:
    """Per-layer constants (c1, c2) for plateau cutoffs on this graph family.

    Smallest nonnegative pair with, for every probe annulus and family member,

        int_A f^2 dG(psi,psi) <= c1 int_A dG(f,f) + c2/psi_scale(s) int_A f^2 dmu.
    """
    if probes is None:
        diam = g.diameter()
        probes = [(0, 0.25 * diam, s * diam) for s in (0.1, 0.2, 0.4)]
    mu = g.mu
    rows = []
    for (x, R, s) in probes:
        psi = plateau_cutoff(g, x, R, s)
        if psi.annulus_empty:
            continue
        A = psi.annulus
        g_pp = form.energy_density(psi.values, psi.values)
        for f in family:
            f = np.asarray(f, dtype=float)
            g_ff = form.energy_density(f, f)
            lhs = float(np.sum((f ** 2 * g_pp * mu)[A]))
            a1 = float(np.sum((g_ff * mu)[A]))
            a2 = float(np.sum((f ** 2 * mu)[A])) / scaling(s)
            rows.append((a1, a2, lhs))
    if not rows:
        raise ValueError("no probe annulus contains a vertex at this mesh")
    res = linprog(c=[1.0, 1.0],
                  A_ub=[[-a1, -a2] for (a1, a2, _) in rows],
                  b_ub=[-l for (_, _, l) in rows],
                  bounds=[(0, None)] * 2, method="highs")
    if not res.success:
        raise RuntimeError("no feasible per-layer constants over the probe set")
    return float(res.x[0]), float(res.x[1])


def certify_csa(g: MetricMeasureGraph, form: ReferenceForm, psi: CutoffFunction,
                scaling: ScalingFunction, family) -> CertReport:
    """Smallest C0 making the annulus cutoff-energy bound hold family-wide.

    Per-member rearrangement: the needed constant is the positive part of
    (lhs - eps * gradient term) scaled back by psi_scale(r) eps^(beta2/2-1)
    and divided by the annulus zero-order mass.  Sets psi.c0 on success.
    """
    if psi.epsilon is None:
        raise ValueError("cutoff must carry its epsilon")
    eps = psi.epsilon
    beta2 = scaling.beta2
    psi_r = scaling(psi.width)
    A = psi.annulus
    mu = g.mu
    if A.size == 0:
        return CertReport(inequality="cutoff-energy-annulus", constant=0.0,
                          family=getattr(family, "id", ""), status=NOT_APPLICABLE,
                          notes="empty annulus at this mesh")
    g_pp = form.energy_density(psi.values, psi.values)
    best = 0.0
    witness = None
    for i, f in enumerate(family):
        f = np.asarray(f, dtype=float)
        g_ff = form.energy_density(f, f)
        lhs = float(np.sum((f ** 2 * g_pp * mu)[A]))
        grad = float(np.sum((psi.values ** 2 * g_ff * mu)[A]))
        zero = float(np.sum((psi.values * f ** 2 * mu)[A]))
        excess = lhs - eps * grad
        if excess <= 0:
            continue
        if zero <= 0:
            return CertReport(inequality="cutoff-energy-annulus", constant=float("inf"),
                              witness={"member": i}, family=getattr(family, "id", ""),
                              status=INFEASIBLE,
                              notes="member vanishes on the annulus with nonzero "
                                    "left side")
        needed = excess * psi_r * eps ** (beta2 / 2.0 - 1.0) / zero
        if needed > best:
            best = needed
            witness = {"member": i, "lhs": lhs, "gradient_term": grad,
                       "zero_order_mass": zero}
    psi.c0 = best
    psi.beta2 = beta2
    psi.psi_of_r = psi_r
    psi.family = getattr(family, "id", f"family:{len(list(family))}")
    return CertReport(inequality="cutoff-energy-annulus", constant=best,
                      witness=witness or {}, family=psi.family,
                      details={"epsilon": eps, "beta2": beta2, "psi_of_r": psi_r,
                               "tag": psi.tag})


def exp_cutoff_check(form: ReferenceForm, psi: CutoffFunction, M: float, f,
                     scaling: ScalingFunction) -> CertReport:
    """Check the exponential-weight energy bound for phi = exp(M psi).

    The continuum bound rests on the exact chain rule, so the discrete check
    carries the measured chain-rule defect |dG(phi,phi) - M^2 phi^2 dG(psi,psi)|
    as an additive allowance, reported separately.  Requires eps < 1/2.
    """
    if psi.epsilon is None or psi.c0 is None:
        raise ValueError("cutoff must be certified before the exponential check")
    eps = psi.epsilon
    if eps >= 0.5:
        raise ValueError("exponential variant needs eps < 1/2")
    beta2 = psi.beta2 if psi.beta2 is not None else scaling.beta2
    psi_r = scaling(psi.width)
    f = np.asarray(f, dtype=float)
    mu = form.graph.mu
    A = psi.annulus
    phi = np.exp(M * psi.values)
    g_phph = form.energy_density(phi, phi)
    g_ff = form.energy_density(f, f)
    g_psps = form.energy_density(psi.values, psi.values)
    lhs = float(np.sum(f ** 2 * g_phph * mu))
    grad = float(np.sum((phi ** 2 * g_ff * mu)[A]))
    zero = float(np.sum((phi ** 2 * f ** 2 * mu)[A]))
    rhs = (2 * eps / (1 - 2 * eps)) * M ** 2 * grad \
        + psi.c0 * eps ** (1 - beta2 / 2.0) / ((1 - 2 * eps) * psi_r) * M ** 2 * zero
    allowance = float(np.sum(f ** 2 * np.abs(g_phph - M ** 2 * phi ** 2 * g_psps) * mu))
    margin = rhs + allowance - lhs
    return CertReport(inequality="exp-cutoff-energy",
                      constant=lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else float("inf")),
                      family="single-function",
                      status=PASS if margin >= 0 else FAIL,
                      notes="margin includes the measured chain-rule allowance",
                      details={"lhs": lhs, "rhs": rhs, "chain_allowance": allowance,
                               "margin": margin, "M": M})
