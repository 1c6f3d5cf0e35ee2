"""Finite metric measure graphs and their purely geometric certifications.

Supported families: triadic-subdivision triangle graphs (Sierpinski gasket
approximations), discretized intervals (paths), square lattices (grids),
and arbitrary user graphs from JSON files.  Balls are open (strict
inequality); the metric is either the embedded Euclidean distance or the
hop distance scaled by the mesh width.

Defaults for the gasket level-m graph follow the standard resistance
renormalization: edge conductance (5/3)^m, uniform vertex measure 3^-m,
mesh width 2^-m.  Both are configurable; nothing downstream hard-codes
them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, shortest_path

from .report import CertReport, INFEASIBLE

DEFAULT_VERTEX_CAP = 20000


@dataclass
class SpaceSpec:
    family: str
    level: int = 1
    spacing: float | None = None
    conductance: float | None = None
    measure: float | None = None
    metric: str = "euclidean"
    path: str = ""  # for family == "file"
    cap: int = DEFAULT_VERTEX_CAP


def parse_space_spec(text) -> SpaceSpec:
    """Parse 'gasket:3', 'path:64' or 'family=gasket,level=4' style specs."""
    if isinstance(text, SpaceSpec):
        return text
    if isinstance(text, dict):
        return SpaceSpec(**text)
    text = text.strip()
    if ":" in text and "=" not in text:
        fam, _, lvl = text.partition(":")
        lvl = lvl.rstrip("²")
        return SpaceSpec(family=fam.strip(), level=int(lvl))
    kv = {}
    for part in text.split(","):
        k, _, v = part.partition("=")
        kv[k.strip()] = v.strip()
    fam = kv.pop("family", "path")
    lvl = int(kv.pop("level", kv.pop("n", kv.pop("side", 1))))
    spec = SpaceSpec(family=fam, level=lvl)
    if "spacing" in kv:
        spec.spacing = float(kv.pop("spacing"))
    if "conductance" in kv:
        spec.conductance = float(kv.pop("conductance"))
    if "measure" in kv:
        spec.measure = float(kv.pop("measure"))
    if "metric" in kv:
        spec.metric = kv.pop("metric")
    if "path" in kv:
        spec.path = kv.pop("path")
    if kv:
        raise ValueError(f"unknown space spec keys: {sorted(kv)}")
    return spec


class MetricMeasureGraph:
    """Connected weighted graph with vertex measure and a metric."""

    def __init__(self, coords, mu, edges_a, edges_b, weights, metric="euclidean",
                 mesh=1.0, family="custom", meta=None):
        self.coords = np.asarray(coords, dtype=float)
        self.mu = np.asarray(mu, dtype=float)
        self.edges_a = np.asarray(edges_a, dtype=np.int64)
        self.edges_b = np.asarray(edges_b, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=float)
        self.metric = metric
        self.mesh = float(mesh)
        self.family = family
        self.meta = dict(meta or {})
        self._dist = None
        self._validate()

    # geodesic in the length-space sense: hop metric is a path metric
    @property
    def geodesic(self) -> bool:
        return self.metric == "graph"

    @property
    def n(self) -> int:
        return len(self.mu)

    def _validate(self):
        if np.any(self.mu <= 0):
            raise ValueError("vertex measure must be positive everywhere")
        if np.any(self.weights <= 0):
            raise ValueError("edge conductances must be positive")
        if self.edges_a.shape != self.edges_b.shape or self.edges_a.shape != self.weights.shape:
            raise ValueError("edge arrays must have matching shapes")
        n_comp, _ = connected_components(self.adjacency(), directed=False)
        if n_comp != 1:
            raise ValueError(f"graph must be connected (found {n_comp} components)")

    def adjacency(self) -> sp.csr_matrix:
        n = self.n
        data = np.concatenate([self.weights, self.weights])
        rows = np.concatenate([self.edges_a, self.edges_b])
        cols = np.concatenate([self.edges_b, self.edges_a])
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    # -- metric ------------------------------------------------------------

    def distance_matrix(self) -> np.ndarray:
        if self._dist is None:
            if self.metric == "euclidean":
                diff = self.coords[:, None, :] - self.coords[None, :, :]
                self._dist = np.sqrt((diff ** 2).sum(axis=2))
            else:
                hop = sp.csr_matrix(
                    (np.ones_like(self.weights),
                     (self.edges_a, self.edges_b)), shape=(self.n, self.n))
                d = shortest_path(hop + hop.T, directed=False, unweighted=False)
                self._dist = d * self.mesh
        return self._dist

    def dist_row(self, x: int) -> np.ndarray:
        if self._dist is not None:
            return self._dist[x]
        if self.metric == "euclidean":
            diff = self.coords - self.coords[x]
            return np.sqrt((diff ** 2).sum(axis=1))
        hop = sp.csr_matrix((np.ones_like(self.weights),
                             (self.edges_a, self.edges_b)), shape=(self.n, self.n))
        d = shortest_path(hop + hop.T, directed=False, indices=x)
        return d * self.mesh

    def diameter(self) -> float:
        return float(self.distance_matrix().max())

    # -- balls and volumes ---------------------------------------------------

    def ball(self, x: int, r: float) -> np.ndarray:
        """Indices of the open ball {y : d(x,y) < r}."""
        if r < 0:
            raise ValueError("radius must be nonnegative")
        return np.nonzero(self.dist_row(x) < r)[0]

    def volume(self, x: int, r: float) -> float:
        return float(self.mu[self.ball(x, r)].sum())

    def total_mass(self) -> float:
        return float(self.mu.sum())

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "vertices": [
                {"id": int(i), "coords": list(map(float, self.coords[i])),
                 "measure": float(self.mu[i])}
                for i in range(self.n)
            ],
            "edges": [
                {"a": int(a), "b": int(b), "conductance": float(w)}
                for a, b, w in zip(self.edges_a, self.edges_b, self.weights)
            ],
            "metric": self.metric,
            "mesh": self.mesh,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str, family="custom") -> "MetricMeasureGraph":
        doc = json.loads(text)
        verts = doc["vertices"]
        order = {v["id"]: i for i, v in enumerate(verts)}
        coords = [v.get("coords") or [0.0] for v in verts]
        width = max(len(c) for c in coords)
        coords = [list(c) + [0.0] * (width - len(c)) for c in coords]
        mu = [float(v["measure"]) for v in verts]
        ea = [order[e["a"]] for e in doc["edges"]]
        eb = [order[e["b"]] for e in doc["edges"]]
        w = [float(e["conductance"]) for e in doc["edges"]]
        return cls(coords, mu, ea, eb, w, metric=doc.get("metric", "euclidean"),
                   mesh=float(doc.get("mesh", 1.0)), family=family)


# -- builders ----------------------------------------------------------------

def gasket_graph(level: int, conductance: float | None = None,
                 measure: float | None = None, metric: str = "euclidean",
                 cap: int = DEFAULT_VERTEX_CAP) -> MetricMeasureGraph:
    """Level-m triadic subdivision of the unit triangle.

    3(3^m+1)/2 vertices, 3^(m+1) edges, mesh width 2^-m.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    n_expected = 3 * (3 ** level + 1) // 2
    if n_expected > cap:
        raise ValueError(
            f"gasket level {level} has {n_expected} vertices, over the cap {cap} "
            "(desk-scale violation)")
    side = 2 ** level
    # integer lattice coordinates: point = (i + j/2, j*sqrt(3)/2) / side
    tri = [((0, 0), (side, 0), (0, side))]
    for _ in range(level):
        nxt = []
        for (p, q, r) in tri:
            pq = ((p[0] + q[0]) // 2, (p[1] + q[1]) // 2)
            qr = ((q[0] + r[0]) // 2, (q[1] + r[1]) // 2)
            rp = ((r[0] + p[0]) // 2, (r[1] + p[1]) // 2)
            nxt += [(p, pq, rp), (pq, q, qr), (rp, qr, r)]
        tri = nxt
    index: dict[tuple, int] = {}

    def vid(p):
        if p not in index:
            index[p] = len(index)
        return index[p]

    edge_set = set()
    for (p, q, r) in tri:
        for u, v in ((p, q), (q, r), (r, p)):
            iu, iv = vid(u), vid(v)
            edge_set.add((min(iu, iv), max(iu, iv)))
    pts = sorted(index, key=index.get)
    coords = np.array([(i + 0.5 * j, 0.5 * math.sqrt(3.0) * j) for i, j in pts]) / side
    w = (5.0 / 3.0) ** level if conductance is None else conductance
    m = 3.0 ** (-level) if measure is None else measure
    ea, eb = zip(*sorted(edge_set))
    g = MetricMeasureGraph(coords, np.full(len(pts), m), ea, eb,
                           np.full(len(edge_set), w), metric=metric,
                           mesh=1.0 / side, family="gasket",
                           meta={"level": level})
    assert g.n == n_expected
    return g


def path_graph(n: int, spacing: float = 1.0, conductance: float | None = None,
               measure: float | None = None, metric: str = "euclidean",
               cap: int = DEFAULT_VERTEX_CAP) -> MetricMeasureGraph:
    """Path of length n: n+1 vertices at x = 0, h, ..., nh.

    Defaults pair conductance 1/h with measure h so the energy and mass
    discretize the unit-coefficient interval forms at any resolution.
    """
    if n < 1:
        raise ValueError("path length must be >= 1")
    if n + 1 > cap:
        raise ValueError(f"path with {n + 1} vertices exceeds the cap {cap}")
    h = float(spacing)
    w = (1.0 / h) if conductance is None else conductance
    m = h if measure is None else measure
    coords = np.arange(n + 1, dtype=float)[:, None] * h
    ea = np.arange(n)
    return MetricMeasureGraph(coords, np.full(n + 1, m), ea, ea + 1,
                              np.full(n, w), metric=metric, mesh=h,
                              family="path", meta={"n": n})


def grid_graph(side: int, spacing: float = 1.0, conductance: float | None = None,
               measure: float | None = None, metric: str = "euclidean",
               cap: int = DEFAULT_VERTEX_CAP) -> MetricMeasureGraph:
    """side x side four-neighbor lattice with mesh width = spacing."""
    if side < 2:
        raise ValueError("grid side must be >= 2")
    if side * side > cap:
        raise ValueError(f"grid with {side * side} vertices exceeds the cap {cap}")
    h = float(spacing)
    w = 1.0 if conductance is None else conductance  # 2-d: conductance is scale-free
    m = h * h if measure is None else measure
    ii, jj = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    coords = np.stack([ii.ravel() * h, jj.ravel() * h], axis=1)
    ea, eb = [], []
    for i in range(side):
        for j in range(side):
            v = i * side + j
            if i + 1 < side:
                ea.append(v); eb.append(v + side)
            if j + 1 < side:
                ea.append(v); eb.append(v + 1)
    return MetricMeasureGraph(coords, np.full(side * side, m), ea, eb,
                              np.full(len(ea), w), metric=metric, mesh=h,
                              family="grid", meta={"side": side})


def build_space(spec) -> MetricMeasureGraph:
    spec = parse_space_spec(spec)
    kw = {"metric": spec.metric, "cap": spec.cap}
    if spec.conductance is not None:
        kw["conductance"] = spec.conductance
    if spec.measure is not None:
        kw["measure"] = spec.measure
    if spec.family == "gasket":
        return gasket_graph(spec.level, **kw)
    if spec.family == "path":
        if spec.spacing is not None:
            kw["spacing"] = spec.spacing
        return path_graph(spec.level, **kw)
    if spec.family == "grid":
        if spec.spacing is not None:
            kw["spacing"] = spec.spacing
        return grid_graph(spec.level, **kw)
    if spec.family == "file":
        with open(spec.path) as fh:
            return MetricMeasureGraph.from_json(fh.read())
    raise ValueError(f"unknown space family {spec.family!r}")


# -- ball families and geometric certifications -------------------------------

@dataclass
class BallFamily:
    """(center, R, r) triples with optional working-region containment flags."""

    triples: list
    region: np.ndarray | None = None  # vertex subset Y
    scale_cap: float | None = None    # R_0
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if not self.triples:
            raise ValueError("ball family must be nonempty")
        for (x, R, r) in self.triples:
            if not (0 < r < R) and not (0 < r == R):
                if r <= 0 or R <= 0:
                    raise ValueError(f"ball triple needs positive radii, got {(x, R, r)}")

    def check_containment(self, g: MetricMeasureGraph) -> list:
        """Flag triples whose doubled ball leaves the declared region."""
        self.flags = []
        for (x, R, r) in self.triples:
            ok = True
            if self.scale_cap is not None and R > self.scale_cap:
                ok = False
            if self.region is not None:
                outside = np.setdiff1d(g.ball(x, 2 * R), self.region)
                ok = ok and outside.size == 0
            self.flags.append(ok)
        return self.flags


def certify_vd(g: MetricMeasureGraph, balls: BallFamily) -> CertReport:
    """Measure the volume-doubling constant max V(x,R+r)/V(x,R)."""
    worst = 0.0
    witness = None
    for (x, R, r) in balls.triples:
        v_small = g.volume(x, R)
        if v_small == 0:
            return CertReport(inequality="volume-doubling", constant=float("inf"),
                              witness={"center": int(x), "R": R, "r": r},
                              family=f"balls:{len(balls.triples)}", status=INFEASIBLE,
                              notes="empty ball in family (degenerate geometry)")
        ratio = g.volume(x, R + r) / v_small
        if ratio > worst:
            worst = ratio
            witness = {"center": int(x), "R": R, "r": r, "ratio": ratio}
    nu = math.log2(worst) if worst > 0 else 0.0
    return CertReport(inequality="volume-doubling", constant=worst,
                      witness=witness, family=f"balls:{len(balls.triples)}",
                      details={"nu": nu})


def certify_rvd(g: MetricMeasureGraph, balls: BallFamily) -> CertReport:
    """Fit (C, nu0) with V(x,R)/V(x,s) >= C (R/s)^nu0 over the family.

    Triples where B(x,R) already covers the whole graph violate the
    condition's hypothesis and are skipped (flagged in the report).
    """
    total = g.total_mass()
    logs_q, logs_ratio, skipped = [], [], []
    for (x, R, s) in balls.triples:
        if g.volume(x, R) >= total:
            skipped.append({"center": int(x), "R": R, "s": s})
            continue
        v_R, v_s = g.volume(x, R), g.volume(x, s)
        if v_s == 0:
            skipped.append({"center": int(x), "R": R, "s": s})
            continue
        logs_q.append(math.log(R / s))
        logs_ratio.append(math.log(v_R / v_s))
    if not logs_q:
        return CertReport(inequality="reverse-volume-doubling", constant=0.0,
                          family=f"balls:{len(balls.triples)}", status=INFEASIBLE,
                          notes="no usable triples", details={"skipped": skipped})
    lq = np.array(logs_q)
    lr = np.array(logs_ratio)
    if np.allclose(lq, 0.0):
        nu0 = 0.0
    else:
        # least-squares slope through the cloud; intercept absorbed into C
        A = np.stack([lq, np.ones_like(lq)], axis=1)
        nu0 = float(np.linalg.lstsq(A, lr, rcond=None)[0][0])
    c_rvd = float(np.exp(np.min(lr - nu0 * lq)))
    i_min = int(np.argmin(lr - nu0 * lq))
    return CertReport(inequality="reverse-volume-doubling", constant=c_rvd,
                      witness={"pair_index": i_min},
                      family=f"balls:{len(balls.triples)}",
                      details={"nu0": nu0, "skipped": skipped},
                      notes="log-log regression slope nu0, C from worst pair")
