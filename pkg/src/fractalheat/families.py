"""Seeded test-function families.

Measured constants are always relative to an explicit, named family; these
helpers build the default ones: smooth ambient restrictions (low-frequency
trigonometric polynomials of the embedding coordinates), ball indicators,
and whatever solution snapshots the caller wants to fold in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .space import MetricMeasureGraph


@dataclass
class TestFamily:
    __test__ = False    # not a pytest class despite the name
    id: str
    functions: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.functions)

    def __len__(self):
        return len(self.functions)

    def extended(self, more, tag: str) -> "TestFamily":
        return TestFamily(id=f"{self.id}+{tag}",
                          functions=list(self.functions) + list(more))


def smooth_functions(g: MetricMeasureGraph, rng: np.random.Generator,
                     count: int, max_freq: float = 3.0) -> list:
    pts = g.coords
    scale = max(g.diameter(), 1e-12)
    out = []
    for _ in range(count):
        k = rng.uniform(-max_freq, max_freq, size=pts.shape[1]) * (2 * np.pi / scale)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.5, 1.5)
        lin = rng.uniform(-1, 1, size=pts.shape[1]) / scale
        out.append(amp * np.cos(pts @ k + phase) + pts @ lin)
    return out


def indicator_functions(g: MetricMeasureGraph, rng: np.random.Generator,
                        count: int) -> list:
    diam = g.diameter()
    out = []
    for _ in range(count):
        x = int(rng.integers(g.n))
        r = rng.uniform(0.1, 0.6) * diam
        f = np.zeros(g.n)
        f[g.ball(x, r)] = 1.0
        out.append(f)
    return out


def default_family(g: MetricMeasureGraph, seed: int = 0, smooth: int = 64,
                   indicators: int = 8, snapshots=None) -> TestFamily:
    rng = np.random.default_rng(seed)
    fns = smooth_functions(g, rng, smooth) + indicator_functions(g, rng, indicators)
    tag = f"smooth:{smooth}+ind:{indicators}"
    if snapshots is not None:
        fns += [np.asarray(s, dtype=float) for s in snapshots]
        tag += f"+snap:{len(snapshots)}"
    return TestFamily(id=f"{g.family}/seed:{seed}/{tag}", functions=fns)


def nonnegative_family(g: MetricMeasureGraph, seed: int = 0, count: int = 32,
                       floor: float = 0.0) -> TestFamily:
    """Nonnegative (optionally uniformly positive) smooth profiles."""
    rng = np.random.default_rng(seed)
    fns = []
    for f in smooth_functions(g, rng, count):
        f = f - f.min()
        fns.append(f + floor)
    kind = "pos" if floor > 0 else "nonneg"
    return TestFamily(id=f"{g.family}/seed:{seed}/{kind}:{count}", functions=fns)
