import numpy as np
import pytest

from fractalheat import (ReferenceForm, ScalingFunction, TestFamily,
                         certify_csa, default_family, exp_cutoff_check,
                         gasket_graph, layered_cutoff, measure_layer_constants,
                         path_graph, plateau_cutoff)


@pytest.fixture
def path32():
    g = path_graph(32)
    form = ReferenceForm(g)
    scal = ScalingFunction.power(2.0)
    fam = default_family(g, seed=5, smooth=32, indicators=0)
    return g, form, scal, fam


def test_plateau_values():
    g = path_graph(8)
    psi = plateau_cutoff(g, 0, 1.5, 3.0)
    assert np.all(psi.values[g.ball(0, 1.5)] == 1.0)
    assert psi.values[3] == pytest.approx(0.5)    # (1.5 + 3 - 3) / 3
    d = g.dist_row(0)
    assert np.all(psi.values[d >= 4.5] == 0.0)
    psi.check_invariants(g)


def test_plateau_flags_empty_annulus():
    g = path_graph(8)
    psi = plateau_cutoff(g, 0, 1.2, 0.5)   # no vertex in [1.2, 1.7)
    assert psi.annulus_empty


def test_layered_weights_telescope(path32):
    g, form, scal, fam = path32
    c1, c2 = measure_layer_constants(g, form, scal, fam)
    psi = layered_cutoff(g, 16, 4.0, 8.0, eps=0.25, c1=c1, c2=c2, beta2=2.0)
    psi.check_invariants(g)
    assert np.allclose(psi.values[g.ball(16, 4.0)], 1.0)
    # weights telescope to exactly 1 after residual folding
    weights = [w for (_, _, w) in psi.meta["layer_list"]]
    assert sum(weights) == pytest.approx(1.0, abs=1e-14)
    # pointwise between the first (narrowest) and last (widest-reach) layers
    off1, s1, _ = psi.meta["layer_list"][0]
    offN, sN, _ = psi.meta["layer_list"][-1]
    first = plateau_cutoff(g, 16, 4.0 + off1, s1)
    last = plateau_cutoff(g, 16, 4.0 + offN, sN)
    assert np.all(psi.values >= first.values - 1e-12)
    assert np.all(psi.values <= last.values + 1e-12)


def test_layered_huge_lambda_single_layer(path32):
    # eps >> c1 makes the decay rate huge: one layer carries all the weight
    g, form, scal, fam = path32
    psi = layered_cutoff(g, 16, 4.0, 8.0, eps=0.999, c1=1e-8, c2=1.0, beta2=2.0)
    first = plateau_cutoff(g, 16, 4.0, psi.meta["r_prime"])
    # residual folding makes the stack collapse onto its widest ramp
    assert psi.meta["layers"] <= 2
    assert np.max(np.abs(psi.values - first.values)) < 1e-6 or \
        np.max(psi.values[g.ball(16, 4.0)]) == 1.0


def test_layered_validates_inputs(path32):
    g, form, scal, fam = path32
    with pytest.raises(ValueError):
        layered_cutoff(g, 16, 4.0, 8.0, eps=1.5, c1=0.1, c2=1.0, beta2=2.0)
    with pytest.raises(ValueError):
        layered_cutoff(g, 16, 4.0, 0.5, eps=0.5, c1=0.1, c2=1.0, beta2=2.0)


def test_certify_csa_constant_function_closed_form(path32):
    g, form, scal, fam = path32
    psi = plateau_cutoff(g, 16, 4.0, 8.0, epsilon=0.25)
    const = np.full(g.n, 2.0)
    rep = certify_csa(g, form, psi, scal, TestFamily(id="const", functions=[const]))
    A = psi.annulus
    mu = g.mu
    gpp = form.energy_density(psi.values)
    expected = (float(np.sum((gpp * mu)[A])) * scal(8.0) * 0.25 ** (2.0 / 2 - 1)
                / float(np.sum((psi.values * mu)[A])))
    assert rep.constant == pytest.approx(expected, rel=1e-12)


def test_certify_csa_outside_support_contributes_zero(path32):
    g, form, scal, fam = path32
    psi = plateau_cutoff(g, 0, 2.0, 4.0, epsilon=0.5)
    f = np.zeros(g.n)
    f[10:] = np.sin(np.arange(g.n - 10))   # supported beyond B(0, 6)
    rep = certify_csa(g, form, psi, scal, TestFamily(id="out", functions=[f]))
    assert rep.constant == 0.0


def test_certify_csa_monotone_in_family(path32):
    g, form, scal, fam = path32
    psi = plateau_cutoff(g, 16, 4.0, 8.0, epsilon=0.25)
    small = TestFamily(id="s", functions=fam.functions[:8])
    big = TestFamily(id="b", functions=fam.functions[:24])
    c_small = certify_csa(g, form, psi, scal, small).constant
    c_big = certify_csa(g, form, psi, scal, big).constant
    assert c_big >= c_small


def test_certify_csa_eps_sweep_stability(path32):
    # halving eps (rebuilding the layered stack) keeps C0 within 3x
    g, form, scal, fam = path32
    c1, c2 = measure_layer_constants(g, form, scal, fam)
    consts = {}
    for eps in (0.5, 0.25, 0.125, 0.0625):
        psi = layered_cutoff(g, 16, 4.0, 8.0, eps=eps, c1=c1, c2=c2, beta2=2.0)
        consts[eps] = certify_csa(g, form, psi, scal, fam).constant
        assert np.isfinite(consts[eps])
    vals = list(consts.values())
    for a, b in zip(vals[:-1], vals[1:]):
        assert max(a / b, b / a) <= 3.0


def test_certify_csa_bracket_nonincreasing_in_eps(path32):
    # the subtracted gradient share grows with eps, member by member
    g, form, scal, fam = path32
    psi = plateau_cutoff(g, 16, 4.0, 8.0)
    A = psi.annulus
    mu = g.mu
    gpp = form.energy_density(psi.values)
    f = fam.functions[0]
    gff = form.energy_density(f)
    lhs = float(np.sum((f ** 2 * gpp * mu)[A]))
    grad = float(np.sum((psi.values ** 2 * gff * mu)[A]))
    brackets = [max(lhs - eps * grad, 0.0) for eps in (0.125, 0.25, 0.5)]
    assert brackets[0] >= brackets[1] >= brackets[2]


def test_csa_gasket_level_stability():
    scal = ScalingFunction.gasket_default()
    consts = {}
    for level in (3, 4):
        g = gasket_graph(level)
        form = ReferenceForm(g)
        x = int(np.argmin(np.sum((g.coords - [0.5, 0.0]) ** 2, axis=1)))
        fam = default_family(g, seed=7, smooth=16, indicators=2)
        c1, c2 = measure_layer_constants(g, form, scal, fam)
        psi = layered_cutoff(g, x, 0.25, 0.25, eps=0.1, c1=c1, c2=c2,
                             beta2=scal.beta2)
        consts[level] = certify_csa(g, form, psi, scal, fam).constant
    assert 0.5 <= consts[4] / consts[3] <= 2.0


def test_exp_cutoff_zero_exponent(path32):
    g, form, scal, fam = path32
    c1, c2 = measure_layer_constants(g, form, scal, fam)
    psi = layered_cutoff(g, 16, 4.0, 8.0, eps=0.25, c1=c1, c2=c2, beta2=2.0)
    certify_csa(g, form, psi, scal, fam)
    rep = exp_cutoff_check(form, psi, 0.0, np.abs(fam.functions[0]), scal)
    assert rep.details["lhs"] == pytest.approx(0.0, abs=1e-14)
    assert rep.status == "pass"


def test_exp_cutoff_two_vertex_hand_values():
    g = path_graph(1)
    form = ReferenceForm(g)
    scal = ScalingFunction.power(2.0)
    psi = plateau_cutoff(g, 0, 0.5, 0.4, epsilon=0.25)
    psi.values = np.array([1.0, 0.0])
    psi.c0 = 1.0
    psi.beta2 = 2.0
    f = np.ones(2)
    M = 1.0
    rep = exp_cutoff_check(form, psi, M, f, scal)
    # phi = (e, 1): dG(phi,phi) at each vertex = (e-1)^2/2; f^2-weighted sum = (e-1)^2
    lhs_expected = (np.e - 1.0) ** 2
    assert rep.details["lhs"] == pytest.approx(lhs_expected, rel=1e-12)
    assert "margin" in rep.details


def test_exp_cutoff_growth_sanity(path32):
    g, form, scal, fam = path32
    c1, c2 = measure_layer_constants(g, form, scal, fam)
    psi = layered_cutoff(g, 16, 4.0, 8.0, eps=0.25, c1=c1, c2=c2, beta2=2.0)
    certify_csa(g, form, psi, scal, fam)
    f = np.abs(fam.functions[1])
    lhs = {}
    for M in (1.0, 2.0):
        rep = exp_cutoff_check(form, psi, M, f, scal)
        lhs[M] = rep.details["lhs"]
    assert lhs[2.0] <= np.e ** 2 * 4.0 * lhs[1.0]


def test_exp_cutoff_requires_small_eps(path32):
    g, form, scal, fam = path32
    psi = plateau_cutoff(g, 16, 4.0, 8.0, epsilon=0.5)
    certify_csa(g, form, psi, scal, fam)
    with pytest.raises(ValueError):
        exp_cutoff_check(form, psi, 1.0, np.abs(fam.functions[0]), scal)
