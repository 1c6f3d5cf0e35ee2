"""Symmetric reference energy form and its per-vertex energy density.

The reference form on a weighted graph is

    E(f, g) = sum_edges w(x,y) (f(x)-f(y)) (g(x)-g(y)),

and the energy density (the discrete carre du champ, normalized so that
its mu-integral reproduces E exactly) is

    G(f, g)(x) = (1 / 2 mu(x)) sum_y w(x,y) (f(x)-f(y)) (g(x)-g(y)).

Graph forms are not strongly local: the chain rule holds only up to a
defect that is higher order in the edge increments.  The defect is exposed
as a functional rather than asserted away; refinement tests measure its
decay.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .space import MetricMeasureGraph


class ReferenceForm:
    """Dirichlet energy of a metric measure graph, with its generator."""

    def __init__(self, graph: MetricMeasureGraph):
        self.graph = graph
        n = graph.n
        a, b, w = graph.edges_a, graph.edges_b, graph.weights
        deg = np.zeros(n)
        np.add.at(deg, a, w)
        np.add.at(deg, b, w)
        off = sp.csr_matrix((np.concatenate([w, w]),
                             (np.concatenate([a, b]), np.concatenate([b, a]))),
                            shape=(n, n))
        self.laplacian = sp.diags(deg) - off   # energy operator: E(f,g) = g^T A f
        self._inv_mu = 1.0 / graph.mu

    @property
    def n(self) -> int:
        return self.graph.n

    def generator_matrix(self) -> np.ndarray:
        """L = -diag(1/mu) A, so that <L f, g>_mu = -E(f, g)."""
        return -(self.laplacian.toarray() * self._inv_mu[:, None])

    def energy(self, f, g=None) -> float:
        f = np.asarray(f, dtype=float)
        g = f if g is None else np.asarray(g, dtype=float)
        if f.shape != (self.n,) or g.shape != (self.n,):
            raise ValueError("function length must match the vertex count")
        a, b, w = self.graph.edges_a, self.graph.edges_b, self.graph.weights
        return float(np.sum(w * (f[a] - f[b]) * (g[a] - g[b])))

    def energy_density(self, f, g=None) -> np.ndarray:
        """Per-vertex density of the energy measure against mu."""
        f = np.asarray(f, dtype=float)
        g = f if g is None else np.asarray(g, dtype=float)
        if f.shape != (self.n,) or g.shape != (self.n,):
            raise ValueError("function length must match the vertex count")
        a, b, w = self.graph.edges_a, self.graph.edges_b, self.graph.weights
        contrib = w * (f[a] - f[b]) * (g[a] - g[b])
        out = np.zeros(self.n)
        np.add.at(out, a, contrib)
        np.add.at(out, b, contrib)
        return out * (0.5 * self._inv_mu)

    def norm_f_sq(self, f) -> float:
        """Form norm squared: energy plus L2(mu) mass."""
        f = np.asarray(f, dtype=float)
        return self.energy(f) + float(np.sum(f * f * self.graph.mu))

    def integrate(self, values) -> float:
        return float(np.sum(np.asarray(values) * self.graph.mu))


def chain_rule_defect(form: ReferenceForm, phi, dphi, u, v) -> float:
    """mu-weighted 1-norm of G(phi(u), v) - phi'(u) G(u, v).

    Zero exactly when phi is affine; positive in general on graphs.  phi
    must satisfy phi(0) = 0 (composition stays in the form domain).
    """
    if abs(phi(0.0)) > 1e-14:
        raise ValueError("phi(0) must be 0")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    lhs = form.energy_density(phi(u), v)
    rhs = dphi(u) * form.energy_density(u, v)
    return float(np.sum(np.abs(lhs - rhs) * form.graph.mu))


@dataclass
class HarmonicProfile:
    """Nonnegative profile driving a skew perturbation, with its certified
    zero-order and energy-control constants over a named test family."""

    values: np.ndarray
    c_h_prime: float = float("nan")   # |E(f, h)| <= c_h_prime * int f dmu, f >= 0
    c_h: float = float("nan")         # int f^2 dG(h,h) <= c_h * ||f||_F^2
    family: str = ""
    boundary: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)

    def scaled(self, lam: float) -> "HarmonicProfile":
        return HarmonicProfile(values=lam * self.values,
                               c_h_prime=abs(lam) * self.c_h_prime,
                               c_h=lam * lam * self.c_h,
                               family=self.family, boundary=dict(self.boundary),
                               witnesses=dict(self.witnesses))


def certify_profile_constants(form: ReferenceForm, h, test_family, family_id="") -> tuple:
    """Measure (c_h_prime, c_h) for a profile over a test family.

    c_h_prime is taken over the nonnegative members (|f| is used otherwise);
    c_h over all members.
    """
    h = np.asarray(h, dtype=float)
    mu = form.graph.mu
    gamma_hh = form.energy_density(h, h)
    c_hp, c_h = 0.0, 0.0
    wit_p, wit_e = None, None
    for i, f in enumerate(test_family):
        f = np.abs(np.asarray(f, dtype=float))
        mass = float(np.sum(f * mu))
        if mass > 0:
            val = abs(form.energy(f, h)) / mass
            if val > c_hp:
                c_hp, wit_p = val, i
        denom = form.norm_f_sq(f)
        if denom > 0:
            val = float(np.sum(f * f * gamma_hh * mu)) / denom
            if val > c_h:
                c_h, wit_e = val, i
    return c_hp, c_h, {"zero_order": wit_p, "energy_control": wit_e}


def harmonic_profile(form: ReferenceForm, boundary_vertices, boundary_values,
                     test_family=None, family_id="") -> HarmonicProfile:
    """Solve the discrete Dirichlet problem and certify the profile constants.

    The solution satisfies (A h)(x) = 0 off the boundary set, is nonnegative
    for nonnegative boundary data (discrete maximum principle), and equals
    the boundary data on the boundary set.
    """
    bset = np.asarray(boundary_vertices, dtype=np.int64)
    bval = np.asarray(boundary_values, dtype=float)
    if bset.size == 0:
        raise ValueError("boundary set must be nonempty")
    if np.any(bval < 0):
        raise ValueError("boundary data must be nonnegative")
    n = form.n
    interior = np.setdiff1d(np.arange(n), bset)
    h = np.zeros(n)
    h[bset] = bval
    if interior.size:
        A = form.laplacian.tocsc()
        A_ii = A[np.ix_(interior, interior)].toarray()
        A_ib = A[np.ix_(interior, bset)].toarray()
        try:
            h[interior] = np.linalg.solve(A_ii, -A_ib @ bval)
        except np.linalg.LinAlgError as exc:
            raise ValueError("singular Dirichlet system: interior not connected "
                             "to the boundary") from exc
    if test_family is None:
        test_family = [np.ones(n)]
        family_id = family_id or "constants:1"
    c_hp, c_h, wits = certify_profile_constants(form, h, test_family, family_id)
    return HarmonicProfile(values=h, c_h_prime=c_hp, c_h=c_h,
                           family=family_id or f"family:{len(test_family)}",
                           boundary={"vertices": bset.tolist(), "values": bval.tolist()},
                           witnesses=wits)
