import json

import numpy as np
import pytest

from fractalheat import (BallFamily, MetricMeasureGraph, build_space,
                         certify_rvd, certify_vd, gasket_graph, grid_graph,
                         parse_space_spec, path_graph)


def test_gasket_counts():
    g1 = gasket_graph(1)
    assert g1.n == 6 and len(g1.weights) == 9
    assert gasket_graph(3).n == 42          # 3 (3^m + 1) / 2 by enumeration
    for m in (0, 1, 2, 3, 4):
        assert gasket_graph(m).n == 3 * (3 ** m + 1) // 2


def test_path_and_grid_counts():
    g = path_graph(2)
    assert g.n == 3 and len(g.weights) == 2
    assert grid_graph(4).n == 16


def test_vertex_cap():
    with pytest.raises(ValueError):
        gasket_graph(12)
    with pytest.raises(ValueError):
        path_graph(10, cap=5)


def test_unknown_family():
    with pytest.raises(ValueError):
        build_space("moebius:3")


def test_spec_parsing():
    s = parse_space_spec("family=gasket,level=4")
    assert s.family == "gasket" and s.level == 4
    s2 = parse_space_spec("path:64")
    assert s2.family == "path" and s2.level == 64
    with pytest.raises(ValueError):
        parse_space_spec("family=path,bogus=1")


def test_ball_examples():
    g = path_graph(4)
    assert g.ball(2, 0.0).size == 0
    assert sorted(g.ball(2, 1.5)) == [1, 2, 3]
    assert g.ball(2, 100.0).size == g.n
    assert g.volume(2, 0.0) == 0.0
    assert g.volume(2, 1.5) == 3.0
    assert g.volume(2, 100.0) == g.total_mass()


def test_ball_monotone_in_radius():
    g = gasket_graph(2)
    rng = np.random.default_rng(1)
    for _ in range(25):
        x = int(rng.integers(g.n))
        r1, r2 = sorted(rng.uniform(0, 1.2, size=2))
        assert set(g.ball(x, r1)) <= set(g.ball(x, r2))


def test_volume_is_ball_mass():
    g = gasket_graph(2)
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = int(rng.integers(g.n))
        r = float(rng.uniform(0, 1.2))
        assert g.volume(x, r) == pytest.approx(g.mu[g.ball(x, r)].sum(), abs=0)


def test_metric_triangle_inequality_sampled():
    for g in (gasket_graph(2), gasket_graph(2, metric="graph")):
        D = g.distance_matrix()
        rng = np.random.default_rng(3)
        idx = rng.integers(g.n, size=(40, 3))
        for i, j, k in idx:
            assert D[i, j] <= D[i, k] + D[k, j] + 1e-12
            assert D[i, j] == pytest.approx(D[j, i], abs=1e-12)


def test_certify_vd_documented_ball():
    g = path_graph(8)
    rep = certify_vd(g, BallFamily([(4, 2.5, 2.0)]))
    assert rep.constant == pytest.approx(9.0 / 5.0)
    assert rep.details["nu"] == pytest.approx(np.log2(1.8))


def test_certify_vd_single_vertex_graph_is_trivial():
    g = path_graph(1)
    rep = certify_vd(g, BallFamily([(0, 5.0, 1.0)]))
    assert rep.constant == pytest.approx(1.0)


def test_certify_vd_scale_invariance():
    g = path_graph(16)
    fam = BallFamily([(8, 3.5, 2.0), (8, 2.0, 1.5)])
    base = certify_vd(g, fam).constant
    g_scaled = path_graph(16, measure=7.0)
    assert certify_vd(g_scaled, fam).constant == pytest.approx(base)


def test_certify_rvd_degenerate_triple():
    g = path_graph(8)
    rep = certify_rvd(g, BallFamily([(4, 2.0, 2.0)]))
    assert rep.constant == pytest.approx(1.0)
    assert rep.details["nu0"] == 0.0


def test_certify_rvd_path_exponent():
    # half-integer radii make V(x, r) = 2r exactly on the centered path
    g = path_graph(16)
    triples = [(8, 4.5, 1.5), (8, 7.5, 1.5), (8, 7.5, 2.5), (8, 6.5, 1.5)]
    rep = certify_rvd(g, BallFamily(triples))
    assert abs(rep.details["nu0"] - 1.0) <= 0.15
    assert rep.constant == pytest.approx(1.0, rel=1e-9)


def test_certify_rvd_gasket_positive_exponent():
    g = gasket_graph(4)
    x = int(np.argmin(np.sum((g.coords - [0.5, 0.0]) ** 2, axis=1)))
    triples = [(x, R, R / 2) for R in (0.2, 0.3, 0.4)]
    rep = certify_rvd(g, BallFamily(triples))
    assert rep.details["nu0"] > 0.0


def test_certify_rvd_skips_whole_graph_balls():
    g = path_graph(8)
    rep = certify_rvd(g, BallFamily([(4, 100.0, 1.0), (4, 3.0, 1.5)]))
    assert len(rep.details["skipped"]) == 1


def test_gasket_vd_stable_across_levels():
    vals = {}
    for level in (3, 4):
        g = gasket_graph(level)
        x = int(np.argmin(np.sum((g.coords - [0.5, 0.0]) ** 2, axis=1)))
        fam = BallFamily([(x, 0.25, 0.25), (x, 0.2, 0.1), (x, 0.35, 0.15)])
        vals[level] = certify_vd(g, fam).constant
    assert 0.5 <= vals[4] / vals[3] <= 2.0


def test_json_roundtrip():
    g = gasket_graph(1)
    g2 = MetricMeasureGraph.from_json(g.to_json())
    assert g2.n == g.n
    assert np.allclose(np.sort(g2.mu), np.sort(g.mu))
    assert g2.mesh == g.mesh
    doc = json.loads(g.to_json())
    assert set(doc) == {"vertices", "edges", "metric", "mesh"}


def test_graph_metric_is_hop_times_mesh():
    g = path_graph(4, metric="graph")
    assert g.dist_row(0)[3] == pytest.approx(3.0)
    assert g.geodesic
    assert not path_graph(4).geodesic


def test_disconnected_rejected():
    with pytest.raises(ValueError):
        MetricMeasureGraph([[0.0], [1.0], [2.0]], [1, 1, 1], [0], [1], [1.0])


def test_ball_family_validation_and_flags():
    with pytest.raises(ValueError):
        BallFamily([])
    g = path_graph(8)
    fam = BallFamily([(0, 1.5, 0.5)], region=np.arange(2), scale_cap=2.0)
    assert fam.check_containment(g) == [False]   # B(0, 3) reaches vertex 2
    fam_ok = BallFamily([(0, 1.0, 0.5)], region=np.arange(3), scale_cap=2.0)
    assert fam_ok.check_containment(g) == [True]
