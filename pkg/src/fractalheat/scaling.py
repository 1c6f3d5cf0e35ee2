"""Time-space scaling functions.

A scaling function maps a spatial radius r to the time scale on which
diffusion crosses that radius.  Three kinds are supported: pure power laws
(the generic case, e.g. r^2 for Euclidean-like spaces or r^(log5/log2) for
the gasket walk scaling), continuous piecewise power laws, and tabulated
monotone data interpolated log-log.  Every instance declares two exponents
``beta1 <= beta2`` and a constant ``c_psi`` bounding the growth ratio

    c_psi^-1 (R/s)^beta1  <=  psi(R)/psi(s)  <=  c_psi (R/s)^beta2

for 0 < s < R, which ``verify_psi`` checks sample-wise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .report import CertReport

GASKET_WALK_EXPONENT = math.log(5.0) / math.log(2.0)


@dataclass(frozen=True)
class ScalingFunction:
    """Strictly increasing bijection of [0, inf) with power-law bounds."""

    kind: str
    beta1: float
    beta2: float
    c_psi: float = 1.0
    coeff: float = 1.0
    # piecewise data: sorted breakpoints and one exponent per segment
    breaks: tuple = ()
    exponents: tuple = ()
    # tabulated data
    nodes: tuple = ()
    values: tuple = ()
    _seg_coeffs: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.beta1 < 2.0:
            raise ValueError("beta1 must be >= 2 (scaling exponents live in [2, inf))")
        if self.beta2 < self.beta1:
            raise ValueError("beta2 must be >= beta1")
        if self.c_psi < 1.0:
            raise ValueError("c_psi must be >= 1")

    # -- constructors ------------------------------------------------------

    @classmethod
    def power(cls, beta: float, a: float = 1.0, c_psi: float = 1.0) -> "ScalingFunction":
        if a <= 0:
            raise ValueError("power coefficient must be positive")
        return cls(kind="power", beta1=beta, beta2=beta, c_psi=c_psi, coeff=a)

    @classmethod
    def piecewise_power(cls, breaks, exponents, a: float = 1.0,
                        c_psi: float | None = None) -> "ScalingFunction":
        """Continuous piecewise power law.

        ``exponents`` has one entry per segment, ``breaks`` the interior
        breakpoints separating them (so len(exponents) == len(breaks) + 1).
        Segment coefficients are chosen for continuity, anchored at
        psi(r) = a * r^exponents[0] on the first segment.
        """
        breaks = tuple(float(b) for b in breaks)
        exponents = tuple(float(e) for e in exponents)
        if len(exponents) != len(breaks) + 1:
            raise ValueError("need one exponent per segment")
        if any(b <= 0 for b in breaks) or list(breaks) != sorted(breaks):
            raise ValueError("breakpoints must be positive and increasing")
        coeffs = [float(a)]
        for i, b in enumerate(breaks):
            # continuity: c_i b^e_i = c_{i+1} b^e_{i+1}
            coeffs.append(coeffs[i] * b ** (exponents[i] - exponents[i + 1]))
        b1, b2 = min(exponents), max(exponents)
        return cls(kind="piecewise-power", beta1=b1, beta2=b2,
                   c_psi=1.0 if c_psi is None else c_psi, coeff=a,
                   breaks=breaks, exponents=exponents, _seg_coeffs=tuple(coeffs))

    @classmethod
    def tabulated(cls, nodes, values, beta1: float, beta2: float,
                  c_psi: float = 1.0) -> "ScalingFunction":
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or len(nodes) < 2:
            raise ValueError("need matching 1-d node/value arrays, length >= 2")
        if np.any(nodes <= 0) or np.any(values <= 0):
            raise ValueError("tabulated nodes and values must be positive")
        if np.any(np.diff(nodes) <= 0) or np.any(np.diff(values) <= 0):
            raise ValueError("tabulated scaling must be strictly increasing")
        return cls(kind="tabulated", beta1=beta1, beta2=beta2, c_psi=c_psi,
                   nodes=tuple(nodes), values=tuple(values))

    @classmethod
    def gasket_default(cls) -> "ScalingFunction":
        return cls.power(GASKET_WALK_EXPONENT)

    # -- evaluation --------------------------------------------------------

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        if self.kind == "power":
            out = self.coeff * r ** self.beta1
        elif self.kind == "piecewise-power":
            out = self._piecewise(r, self.breaks, self.exponents, self._seg_coeffs)
        else:
            out = self._interp_loglog(r, self.nodes, self.values)
        return float(out) if out.ndim == 0 else out

    def inverse(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("time must be nonnegative")
        if self.kind == "power":
            out = (t / self.coeff) ** (1.0 / self.beta1)
        elif self.kind == "piecewise-power":
            vals = tuple(self._seg_coeffs[i] * b ** self.exponents[i]
                         for i, b in enumerate(self.breaks))
            inv_exp = tuple(1.0 / e for e in self.exponents)
            inv_coeff = tuple(c ** (-1.0 / e) for c, e in zip(self._seg_coeffs, self.exponents))
            out = self._piecewise(t, vals, inv_exp, inv_coeff)
        else:
            out = self._interp_loglog(t, self.values, self.nodes)
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def _piecewise(x, breaks, exponents, coeffs):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(breaks), x, side="right")
        e = np.asarray(exponents)[idx]
        c = np.asarray(coeffs)[idx]
        return c * x ** e

    @staticmethod
    def _interp_loglog(x, nodes, values):
        # power-law interpolation keeps pure powers exact; extrapolate the
        # end segments so the bijection covers (0, inf)
        x = np.asarray(x, dtype=float)
        logn = np.log(np.asarray(nodes))
        logv = np.log(np.asarray(values))
        out = np.empty_like(x)
        pos = x > 0
        lx = np.log(np.where(pos, x, 1.0))
        slopes = np.diff(logv) / np.diff(logn)
        idx = np.clip(np.searchsorted(logn, lx) - 1, 0, len(slopes) - 1)
        out[pos] = np.exp(logv[idx] + slopes[idx] * (lx - logn[idx]))[pos]
        out[~pos] = 0.0
        return out


def verify_psi(psi: ScalingFunction, samples) -> CertReport:
    """Check the two-sided power bound on every (s, R) sample pair.

    Reports the tightest feasible c_psi over the samples; the pair pushing
    it is the witness.  Pass iff the declared ``psi.c_psi`` covers it.
    """
    pairs = [(float(s), float(R)) for s, R in samples]
    if not pairs:
        raise ValueError("empty sample set")
    for s, R in pairs:
        if not 0 < s < R:
            raise ValueError(f"samples need 0 < s < R, got ({s}, {R})")
    needed = 1.0
    witness = None
    for s, R in pairs:
        ratio = psi(R) / psi(s)
        q = R / s
        req = max(q ** psi.beta1 / ratio, ratio / q ** psi.beta2)
        if req > needed:
            needed = req
            witness = {"s": s, "R": R, "ratio": ratio}
    passed = needed <= psi.c_psi * (1 + 1e-12)
    return CertReport(
        inequality="psi-scaling",
        constant=needed,
        witness=witness or {"s": pairs[0][0], "R": pairs[0][1]},
        family=f"samples:{len(pairs)}",
        budget=psi.c_psi,
        status="pass" if passed else "fail",
        notes="tightest feasible c_psi over sample pairs",
        details={"beta1": psi.beta1, "beta2": psi.beta2, "kind": psi.kind},
    )
