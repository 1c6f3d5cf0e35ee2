"""Poincare-type and localized Sobolev certifications.

Best constants for the variance-versus-energy inequalities are computed
exactly as generalized eigenvalues (the extremizer is an eigenfunction),
with random-family Rayleigh sweeps retained as cross-checks.  The weighted
variant runs the same pencil with cutoff-squared weights in both the mass
and the energy; pseudo-Poincare and Sobolev constants are family suprema.

Ball conventions: the strong inequality compares the variance on
B(x, R+r) (mean over the same ball) against the energy of the subgraph
induced on it; the weak mode integrates the energy over B(x, 2R) instead.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .cutoff import CutoffFunction
from .forms import ReferenceForm
from .report import CertReport, FAIL, INFEASIBLE, NOT_APPLICABLE, PASS
from .scaling import ScalingFunction
from .space import MetricMeasureGraph

DENSE_LIMIT = 2000


def _induced_edges(g: MetricMeasureGraph, vertices: np.ndarray):
    mask = np.zeros(g.n, dtype=bool)
    mask[vertices] = True
    keep = mask[g.edges_a] & mask[g.edges_b]
    return g.edges_a[keep], g.edges_b[keep], g.weights[keep]


def _edge_form_matrix(n, ea, eb, w) -> np.ndarray:
    """Dense quadratic-form matrix of sum w (f_a - f_b)^2."""
    Q = np.zeros((n, n))
    np.add.at(Q, (ea, ea), w)
    np.add.at(Q, (eb, eb), w)
    np.add.at(Q, (ea, eb), -w)
    np.add.at(Q, (eb, ea), -w)
    return Q


def _kernel_complement(n, ea, eb, w, rel_tol=1e-13):
    """Orthonormal basis of the complement of the edge-form kernel.

    The kernel is spanned by indicators of the connected components of the
    edge graph with non-negligible weight (isolated vertices are their own
    components); weights below ``rel_tol`` of the maximum count as absent.
    """
    cut = rel_tol * (w.max() if w.size else 1.0)
    pos = w > cut
    adj = sp.csr_matrix((w[pos], (ea[pos], eb[pos])), shape=(n, n))
    n_comp, labels = connected_components(adj + adj.T, directed=False)
    kernel = np.zeros((n, n_comp))
    for c in range(n_comp):
        idx = labels == c
        kernel[idx, c] = 1.0 / math.sqrt(idx.sum())
    # complement via full QR of the kernel basis
    q, _ = np.linalg.qr(kernel, mode="complete")
    return q[:, n_comp:], n_comp


def _pencil_max(N: np.ndarray, E: np.ndarray, W: np.ndarray, rel_tol=1e-12):
    """max of f^T N f / f^T E f over the span of W, where E is PSD there.

    Whitens E and drops directions below ``rel_tol`` of its top eigenvalue;
    both forms carry the same vanishing weights off a cutoff's support, so
    the dropped directions cannot host the maximizer.
    """
    Nr = W.T @ N @ W
    Er = W.T @ E @ W
    if Nr.size == 0:
        return 0.0, np.zeros(N.shape[0])
    Er = 0.5 * (Er + Er.T)
    w_e, V_e = la.eigh(Er)
    keep = w_e > rel_tol * max(float(w_e[-1]), 1e-300)
    if not keep.any():
        return 0.0, np.zeros(N.shape[0])
    white = V_e[:, keep] / np.sqrt(w_e[keep])
    S = white.T @ Nr @ white
    S = 0.5 * (S + S.T)
    vals, vecs = la.eigh(S)
    return float(vals[-1]), W @ (white @ vecs[:, -1])


def certify_pi(g: MetricMeasureGraph, form: ReferenceForm, scaling: ScalingFunction,
               ball, mode="strong") -> CertReport:
    """Best Poincare constant of one ball, by exact eigen-solve.

    ``ball`` is a (center, R, r) triple.  In strong mode both the variance
    and the energy live on S = B(x, R+r); in weak mode the energy is the
    induced form on B(x, 2R).  The constant is the largest variance/energy
    ratio divided by psi_scale(R+r) (resp. psi_scale(2R)); the witness is
    the extremal eigenfunction.
    """
    x, R, r = ball
    S = g.ball(x, R + r)
    if S.size == 0:
        raise ValueError("empty ball")
    weak = (mode != "strong")
    S_energy = g.ball(x, 2 * R) if weak else S
    if weak and S_energy.size < S.size:
        raise ValueError("weak mode needs B(x,2R) to cover B(x,R+r)")
    n_loc = S_energy.size
    pos = {v: i for i, v in enumerate(S_energy)}
    ea, eb, w = _induced_edges(g, S_energy)
    ea = np.array([pos[v] for v in ea], dtype=np.int64)
    eb = np.array([pos[v] for v in eb], dtype=np.int64)
    E = _edge_form_matrix(n_loc, ea, eb, w)

    in_S = np.isin(S_energy, S)
    q = np.where(in_S, g.mu[S_energy], 0.0)
    N = np.diag(q) - np.outer(q, q) / q.sum()

    Wc, n_comp = _kernel_complement(n_loc, ea, eb, w)
    if not weak and n_comp > 1:
        return CertReport(inequality="poincare", constant=float("inf"),
                          witness={"components": int(n_comp)},
                          family=f"ball:({x},{R},{r})", status=INFEASIBLE,
                          notes="ball disconnected: zero eigenvalue with "
                                "multiplicity > 1")
    ratio, vec = _pencil_max(N, E, Wc)
    norm = scaling(2 * R) if weak else scaling(R + r)
    witness_f = np.zeros(g.n)
    witness_f[S_energy] = vec
    return CertReport(inequality="weak-poincare" if weak else "poincare",
                      constant=ratio / norm,
                      witness={"center": int(x), "R": R, "r": r,
                               "eigen_ratio": ratio},
                      family="eigen-exact",
                      notes="exact generalized eigen-solve",
                      details={"ball_size": int(S.size), "norm": norm,
                               "witness_function": witness_f.tolist()
                               if g.n <= 256 else None})


def certify_weighted_pi(g: MetricMeasureGraph, form: ReferenceForm,
                        scaling: ScalingFunction, psi: CutoffFunction,
                        reference: dict | None = None) -> CertReport:
    """Weighted Poincare constant with cutoff-squared mass and energy.

    The mass weight is psi^2 mu with the psi^2-weighted mean subtracted;
    the energy weight multiplies each edge by the vertex-average of psi^2.
    Extra zero modes where psi vanishes are projected out (restriction to
    the support, reported).  ``reference`` may carry the (C0, C_VD, C_PI)
    bundle measured on the same ball for the dependence record.
    """
    if not np.any(psi.values > 0):
        raise ValueError("cutoff is identically zero")
    n = g.n
    pv = psi.values
    ea, eb, w = g.edges_a, g.edges_b, g.weights
    w_tilde = w * 0.5 * (pv[ea] ** 2 + pv[eb] ** 2)
    E = _edge_form_matrix(n, ea, eb, w_tilde)
    q = pv ** 2 * g.mu
    N = np.diag(q) - np.outer(q, q) / q.sum()
    Wc, n_comp = _kernel_complement(n, ea, eb, w_tilde)
    ratio, vec = _pencil_max(N, E, Wc)
    norm = scaling(psi.inner + psi.width)
    details = {"eigen_ratio": ratio, "kernel_dim": int(n_comp),
               "support_size": int(np.count_nonzero(pv))}
    if reference:
        details["reference_bundle"] = dict(reference)
    return CertReport(inequality="weighted-poincare", constant=ratio / norm,
                      witness={"center": int(psi.center), "R": psi.inner,
                               "r": psi.width},
                      family="eigen-exact",
                      notes="psi^2-weighted pencil, zero modes off the support "
                            "projected out",
                      details=details)


def certify_pseudo_pi(g: MetricMeasureGraph, form: ReferenceForm,
                      scaling: ScalingFunction, ball, s_grid, family) -> CertReport:
    """Supremum of |f - f_s|^2-mass over psi_scale(s) * energy, plus the
    compact-support variant int f^2 <= C psi_scale(R) int dG(f,f)."""
    x, R, _ = ball
    s_grid = [float(s) for s in s_grid]
    if not s_grid:
        raise ValueError("empty s-grid")
    D = g.distance_matrix()
    mu = g.mu
    support = g.ball(x, R)
    mask = np.zeros(g.n)
    mask[support] = 1.0
    best, witness = 0.0, None
    for i, f in enumerate(family):
        f = np.asarray(f, dtype=float) * mask
        en = form.energy(f)
        if en <= 0:
            continue
        for s in s_grid:
            inball = D < s
            vol = inball @ mu
            f_s = (inball @ (f * mu)) / vol
            num = float(np.sum((f - f_s) ** 2 * mu))
            val = num / (scaling(s) * en)
            if val > best:
                best, witness = val, {"member": i, "s": s}
    # compact-support variant on B(x, R/4)
    small = g.ball(x, R / 4)
    mask_small = np.zeros(g.n)
    mask_small[small] = 1.0
    cs_best, cs_wit = 0.0, None
    applicable = g.ball(x, R).size < g.n
    if applicable:
        for i, f in enumerate(family):
            f = np.asarray(f, dtype=float) * mask_small
            en = form.energy(f)
            if en <= 0:
                continue
            val = float(np.sum(f ** 2 * mu)) / (scaling(R) * en)
            if val > cs_best:
                cs_best, cs_wit = val, {"member": i}
    return CertReport(inequality="pseudo-poincare", constant=best,
                      witness=witness or {}, family=getattr(family, "id", ""),
                      details={"s_grid": s_grid,
                               "compact_support_constant": cs_best,
                               "compact_support_witness": cs_wit,
                               "compact_support_applicable": applicable})


def certify_sobolev(g: MetricMeasureGraph, form: ReferenceForm,
                    scaling: ScalingFunction, ball, family, kappa=None,
                    c_vd=None) -> CertReport:
    """Localized Sobolev constant over compactly supported family members.

    When ``kappa`` is omitted it is derived from the measured doubling
    constant: 1 - 1/kappa = beta1 / log2(C_VD), recorded in the report.
    """
    x, R, _ = ball
    S = g.ball(x, R)
    if S.size == g.n:
        return CertReport(inequality="sobolev", constant=float("inf"),
                          family=getattr(family, "id", ""), status=NOT_APPLICABLE,
                          notes="ball covers the whole graph: constants not "
                                "excluded by compact support")
    derived = False
    if kappa is None:
        if c_vd is None:
            raise ValueError("need kappa or a measured doubling constant")
        nu = math.log2(c_vd)
        if nu <= scaling.beta1:
            return CertReport(inequality="sobolev", constant=float("nan"),
                              family=getattr(family, "id", ""), status=NOT_APPLICABLE,
                              notes=f"derived kappa invalid: log2(C_VD)={nu:.3f} "
                                    f"<= beta1={scaling.beta1:.3f}")
        kappa = 1.0 / (1.0 - scaling.beta1 / nu)
        derived = True
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    mask = np.zeros(g.n)
    mask[S] = 1.0
    mu = g.mu
    vol = float(mu[S].sum())
    best, witness = 0.0, None
    for i, f in enumerate(family):
        f = np.asarray(f, dtype=float) * mask
        en_density = form.energy_density(f, f)
        en = float(np.sum((en_density * mu)[S]))
        if en <= 0:
            continue
        lp = float(np.sum((np.abs(f) ** (2 * kappa) * mu)[S])) ** (1.0 / kappa)
        val = lp * vol ** (1.0 - 1.0 / kappa) / (scaling(R) * en)
        if val > best:
            best, witness = val, {"member": i}
    return CertReport(inequality="sobolev", constant=best, witness=witness or {},
                      family=getattr(family, "id", ""),
                      details={"kappa": kappa, "kappa_derived": derived,
                               "volume": vol})


def rayleigh_sweep_pi(g: MetricMeasureGraph, form: ReferenceForm,
                      scaling: ScalingFunction, ball, family) -> float:
    """Family-sweep cross-check of the strong Poincare constant."""
    x, R, r = ball
    S = g.ball(x, R + r)
    pos = {v: i for i, v in enumerate(S)}
    ea, eb, w = _induced_edges(g, S)
    ea = np.array([pos[v] for v in ea], dtype=np.int64)
    eb = np.array([pos[v] for v in eb], dtype=np.int64)
    mu = g.mu[S]
    best = 0.0
    for f in family:
        f = np.asarray(f, dtype=float)[S]
        en = float(np.sum(w * (f[ea] - f[eb]) ** 2))
        if en <= 0:
            continue
        mean = float(np.sum(f * mu) / mu.sum())
        best = max(best, float(np.sum((f - mean) ** 2 * mu)) / en)
    return best / scaling(R + r)
