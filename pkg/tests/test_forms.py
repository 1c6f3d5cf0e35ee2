import numpy as np
import pytest

from fractalheat import (ReferenceForm, chain_rule_defect, gasket_graph,
                         harmonic_profile, path_graph, default_family,
                         nonnegative_family)


@pytest.fixture
def edge_form():
    return ReferenceForm(path_graph(1))


def test_energy_examples(edge_form):
    form = ReferenceForm(path_graph(2))
    assert form.energy(np.array([0.0, 1.0, 2.0])) == pytest.approx(2.0)
    assert form.energy(np.full(3, 4.2), np.array([1.0, -2.0, 0.5])) == 0.0
    assert edge_form.energy(np.array([1.0, 0.0])) == pytest.approx(1.0)


def test_energy_dimension_mismatch(edge_form):
    with pytest.raises(ValueError):
        edge_form.energy(np.ones(3))


def test_energy_density_examples(edge_form):
    f = np.array([0.0, 1.0])
    assert np.allclose(edge_form.energy_density(f), [0.5, 0.5])
    assert np.allclose(edge_form.energy_density(np.full(2, 3.0)), 0.0)
    # bilinearity: G(f, 2f) = 2 G(f, f)
    assert np.allclose(edge_form.energy_density(f, 2 * f),
                       2 * edge_form.energy_density(f))


def test_density_integrates_to_energy():
    g = gasket_graph(2)
    form = ReferenceForm(g)
    rng = np.random.default_rng(0)
    for _ in range(20):
        f, h = rng.normal(size=(2, g.n))
        lhs = form.integrate(form.energy_density(f, h))
        assert lhs == pytest.approx(form.energy(f, h), rel=1e-12, abs=1e-12)


def test_pointwise_cauchy_schwarz():
    g = gasket_graph(2)
    form = ReferenceForm(g)
    rng = np.random.default_rng(1)
    for _ in range(20):
        f, h = rng.normal(size=(2, g.n))
        cross = np.abs(form.energy_density(f, h))
        bound = np.sqrt(form.energy_density(f) * form.energy_density(h))
        assert np.all(cross <= bound * (1 + 1e-12) + 1e-15)


def test_energy_scaling_in_weights_and_measure():
    f = np.random.default_rng(2).normal(size=9)
    g1 = path_graph(8)
    g2 = path_graph(8, conductance=2.0)
    g3 = path_graph(8, measure=2.0)
    e1, e2 = ReferenceForm(g1), ReferenceForm(g2)
    assert e2.energy(f) == pytest.approx(2 * e1.energy(f))
    e3 = ReferenceForm(g3)
    assert e3.energy(f) == pytest.approx(e1.energy(f))
    assert np.sum(f ** 2 * g3.mu) == pytest.approx(2 * np.sum(f ** 2 * g1.mu))


def test_generator_pairing():
    g = gasket_graph(1)
    form = ReferenceForm(g)
    L = form.generator_matrix()
    rng = np.random.default_rng(3)
    f, h = rng.normal(size=(2, g.n))
    assert np.sum((L @ f) * h * g.mu) == pytest.approx(-form.energy(f, h))
    assert np.abs(L @ np.ones(g.n)).max() < 1e-12


def test_chain_rule_defect_affine_zero():
    g = path_graph(6)
    form = ReferenceForm(g)
    u = np.linspace(0, 2, 7)
    v = np.random.default_rng(4).normal(size=7)
    assert chain_rule_defect(form, lambda s: 3 * s, lambda s: 3 + 0 * s, u, v) \
        == pytest.approx(0.0, abs=1e-13)


def test_chain_rule_defect_hand_example(edge_form):
    u = np.array([0.0, 1.0])
    d = chain_rule_defect(edge_form, lambda s: s ** 2, lambda s: 2 * s, u, u)
    assert d == pytest.approx(1.0)


def test_chain_rule_defect_requires_origin_fixed(edge_form):
    with pytest.raises(ValueError):
        chain_rule_defect(edge_form, lambda s: s + 1, lambda s: 1 + 0 * s,
                          np.zeros(2), np.zeros(2))


def test_chain_rule_defect_decreases_with_level():
    vals = []
    for level in (2, 4):
        g = gasket_graph(level)
        form = ReferenceForm(g)
        u = np.sin(2.0 * g.coords[:, 0]) + 0.3 * g.coords[:, 1]
        v = np.cos(1.5 * g.coords[:, 1])
        vals.append(chain_rule_defect(form, lambda s: s ** 2, lambda s: 2 * s, u, v))
    assert vals[1] < vals[0]


def test_harmonic_profile_path_linear():
    form = ReferenceForm(path_graph(4))
    hp = harmonic_profile(form, [0, 4], [0.0, 1.0])
    assert np.allclose(hp.values, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)


def test_harmonic_profile_constant_boundary():
    form = ReferenceForm(path_graph(4))
    hp = harmonic_profile(form, [0, 4], [2.5, 2.5],
                          test_family=nonnegative_family(path_graph(4), 0, 6))
    assert np.allclose(hp.values, 2.5)
    assert hp.c_h_prime == pytest.approx(0.0, abs=1e-12)
    assert hp.c_h == pytest.approx(0.0, abs=1e-12)


def test_harmonic_profile_gasket_extension_weights():
    # the level-2 solve must reproduce the level-1 harmonic extension:
    # midpoint weights 1/5 (opposite edge) and 2/5 (adjacent edges)
    g = gasket_graph(2)
    form = ReferenceForm(g)

    def find(px, py):
        return int(np.argmin(np.sum((g.coords - [px, py]) ** 2, axis=1)))

    corners = [find(0, 0), find(1, 0), find(0.5, np.sqrt(3) / 2)]
    hp = harmonic_profile(form, corners, [0.0, 0.0, 1.0])
    assert hp.values[find(0.5, 0.0)] == pytest.approx(1.0 / 5.0, rel=1e-10)
    assert hp.values[find(0.75, np.sqrt(3) / 4)] == pytest.approx(2.0 / 5.0, rel=1e-10)
    assert hp.values[find(0.25, np.sqrt(3) / 4)] == pytest.approx(2.0 / 5.0, rel=1e-10)
    # cross-check against the direct level-1 solve
    g1 = gasket_graph(1)
    form1 = ReferenceForm(g1)

    def find1(px, py):
        return int(np.argmin(np.sum((g1.coords - [px, py]) ** 2, axis=1)))

    c1 = [find1(0, 0), find1(1, 0), find1(0.5, np.sqrt(3) / 2)]
    hp1 = harmonic_profile(form1, c1, [0.0, 0.0, 1.0])
    assert hp1.values[find1(0.5, 0.0)] == pytest.approx(
        hp.values[find(0.5, 0.0)], rel=1e-10)


def test_harmonic_profile_nonnegative_by_maximum_principle():
    g = gasket_graph(2)
    form = ReferenceForm(g)
    hp = harmonic_profile(form, [0, 5], [0.0, 1.0])
    assert hp.values.min() >= -1e-13


def test_harmonic_profile_rejects_negative_boundary():
    form = ReferenceForm(path_graph(4))
    with pytest.raises(ValueError):
        harmonic_profile(form, [0, 4], [-1.0, 1.0])


def test_profile_constants_finite_over_family():
    g = gasket_graph(2)
    form = ReferenceForm(g)
    fam = nonnegative_family(g, seed=5, count=10)
    hp = harmonic_profile(form, [0, 5], [0.0, 1.0], test_family=fam.functions,
                          family_id=fam.id)
    assert np.isfinite(hp.c_h_prime) and np.isfinite(hp.c_h)
    assert hp.family == fam.id


def test_leibniz_inequality_holds_exactly():
    # int dG(fg, fg) <= 2 int f^2 dG(g,g) + 2 int g^2 dG(f,f)
    g = gasket_graph(2)
    form = ReferenceForm(g)
    rng = np.random.default_rng(7)
    for _ in range(20):
        f, h = rng.normal(size=(2, g.n))
        lhs = form.energy(f * h)
        rhs = 2 * form.integrate(f ** 2 * form.energy_density(h)) \
            + 2 * form.integrate(h ** 2 * form.energy_density(f))
        assert lhs <= rhs * (1 + 1e-12) + 1e-14
