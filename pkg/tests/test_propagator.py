import numpy as np
import pytest

from fractalheat import (FormSchedule, ReferenceForm, SolverConfig, Trajectory,
                         adjoint_transition, build_nonsymmetric,
                         check_caloric_axioms, check_chapman_kolmogorov,
                         check_max_principle, check_positivity,
                         check_super_mean_value, gasket_graph,
                         harmonic_profile, kernel, path_graph, solve_ivp,
                         steklov_average, subsolution_defect, transition)


@pytest.fixture
def edge():
    g = path_graph(1)
    return g, FormSchedule(ReferenceForm(g))


@pytest.fixture
def gasket3():
    g = gasket_graph(3)
    form = ReferenceForm(g)
    corners = [int(np.argmin(np.sum((g.coords - c) ** 2, axis=1)))
               for c in ([0, 0], [1, 0], [0.5, np.sqrt(3) / 2])]
    hp = harmonic_profile(form, corners, [0.0, 0.5, 1.0])
    return g, form, hp


def two_vertex_exact(t):
    e = np.exp(-2.0 * t)
    return 0.5 * np.array([[1 + e, 1 - e], [1 - e, 1 + e]])


def test_two_vertex_kernel_exact(edge):
    g, sch = edge
    k = kernel(sch, 0.0, 0.7, SolverConfig(scheme="exact-exponential"))
    assert np.abs(k.values - two_vertex_exact(0.7)).max() < 1e-12


def test_solve_ivp_two_vertex(edge):
    g, sch = edge
    traj = solve_ivp(sch, np.array([1.0, 0.0]), 0.0, 1.0,
                     SolverConfig(scheme="exact-exponential"))
    e = np.exp(-2.0 * traj.times)
    expected = np.stack([(1 + e) / 2, (1 - e) / 2], axis=1)
    assert np.abs(traj.states - expected).max() < 1e-12


def test_solve_ivp_zero_datum(edge):
    g, sch = edge
    traj = solve_ivp(sch, np.zeros(2), 0.0, 1.0, SolverConfig())
    assert np.all(traj.states == 0.0)


def test_constants_are_stationary_for_reference():
    g = path_graph(6)
    sch = FormSchedule(ReferenceForm(g))
    traj = solve_ivp(sch, np.ones(g.n), 0.0, 0.5, SolverConfig())
    assert np.abs(traj.states - 1.0).max() < 1e-12


def test_step_halving_orders(edge):
    g, sch = edge
    exact = two_vertex_exact(0.7)
    for scheme, theta, nominal in (("backward-euler", 1.0, 1.0),
                                   ("theta", 0.5, 2.0)):
        errs = []
        for n in (8, 16, 32):
            cfg = SolverConfig(scheme=scheme, theta=theta, steps=n)
            errs.append(np.abs(kernel(sch, 0.0, 0.7, cfg).values - exact).max())
        order = np.log2(errs[0] / errs[1])
        assert 0.75 * nominal <= order <= 1.25 * nominal


def test_transition_identity_at_equal_times(edge):
    g, sch = edge
    T = transition(sch, 0.3, 0.3, SolverConfig())
    assert np.allclose(T, np.eye(2))


def test_kernel_initial_is_delta_over_mu():
    g = gasket_graph(2)
    sch = FormSchedule(ReferenceForm(g))
    k = kernel(sch, 0.2, 0.2, SolverConfig())
    assert np.allclose(k.values, np.diag(1.0 / g.mu))


def test_composition_and_chapman_kolmogorov(gasket3):
    g, form, hp = gasket3
    sch = build_nonsymmetric(form, hp, 1.0)
    cfg = SolverConfig(steps_per_unit=64)
    T1 = transition(sch, 0.0, 0.25, cfg)
    T2 = transition(sch, 0.25, 0.5, cfg)
    T = transition(sch, 0.0, 0.5, cfg)
    assert np.abs(T2 @ T1 - T).max() < 1e-12 * np.abs(T).max()
    k1 = kernel(sch, 0.0, 0.25, cfg)
    k2 = kernel(sch, 0.25, 0.5, cfg)
    kref = kernel(sch, 0.0, 0.5, cfg)
    rep = check_chapman_kolmogorov(k1, k2, g.mu, kref)
    assert rep.status == "pass" and rep.details["aligned"]
    assert rep.constant < 1e-12


def test_chapman_kolmogorov_misaligned_reported(gasket3):
    g, form, hp = gasket3
    sch = FormSchedule(form)
    k1 = kernel(sch, 0.0, 0.25, SolverConfig(steps=7))
    k2 = kernel(sch, 0.25, 0.5, SolverConfig(steps=11))
    kref = kernel(sch, 0.0, 0.5, SolverConfig(steps=22))
    rep = check_chapman_kolmogorov(k1, k2, g.mu, kref)
    assert not rep.details["aligned"]
    # refinement shrinks the defect
    k1b = kernel(sch, 0.0, 0.25, SolverConfig(steps=14))
    k2b = kernel(sch, 0.25, 0.5, SolverConfig(steps=22))
    krefb = kernel(sch, 0.0, 0.5, SolverConfig(steps=44))
    rep_b = check_chapman_kolmogorov(k1b, k2b, g.mu, krefb)
    assert rep_b.details["defect"] < rep.details["defect"]


def test_adjoint_duality(gasket3):
    g, form, hp = gasket3
    sch = build_nonsymmetric(form, hp, 1.0)
    cfg = SolverConfig(steps_per_unit=64)
    T = transition(sch, 0.0, 0.5, cfg)
    T_adj = adjoint_transition(sch, 0.0, 0.5, cfg)
    M = np.diag(g.mu)
    assert np.abs(T_adj - np.linalg.inv(M) @ T.T @ M).max() < 1e-12
    # kernel of the adjoint is the transpose
    k = kernel(sch, 0.0, 0.5, cfg)
    p_adj = T_adj / g.mu[None, :]
    assert np.abs(p_adj - k.values.T).max() < 1e-12


def test_symmetric_kernel_symmetry(gasket3):
    g, form, _ = gasket3
    k = kernel(FormSchedule(form), 0.0, 0.3, SolverConfig())
    assert np.abs(k.values - k.values.T).max() < 1e-10 * np.abs(k.values).max()


def test_positivity_and_m_matrix(gasket3):
    g, form, _ = gasket3
    k = kernel(FormSchedule(form), 0.0, 0.3, SolverConfig())
    rep = check_positivity(k)
    assert rep.status == "pass"
    assert rep.details["m_matrix_steps"] is True
    assert k.min_entry() > 0.0      # strict positivity on a connected graph


def test_positivity_breaks_and_recovers(gasket3):
    # a coarse midpoint scheme with a strong skew part undershoots zero;
    # step refinement restores nonnegativity
    g, form, hp = gasket3
    sch = build_nonsymmetric(form, hp, 6.0)
    coarse = kernel(sch, 0.0, 0.5, SolverConfig(scheme="theta", theta=0.5,
                                                steps=2))
    fine = kernel(sch, 0.0, 0.5, SolverConfig(steps=512))
    assert check_positivity(coarse).status == "fail"
    assert not coarse.meta["m_matrix"]
    assert fine.min_entry() >= -1e-10 * np.abs(fine.values).max()


def test_mass_conservation_reference_only(gasket3):
    g, form, hp = gasket3
    k = kernel(FormSchedule(form), 0.0, 0.4, SolverConfig())
    col_mass = g.mu @ k.values * g.mu   # integral of p(t, ., s, x) dmu(y) * mu-norm
    col_mass = (g.mu[:, None] * k.values).sum(axis=0)
    assert np.abs(col_mass - 1.0).max() < 1e-10
    ks = kernel(build_nonsymmetric(form, hp, 1.0), 0.0, 0.4, SolverConfig())
    drift = np.abs((g.mu[:, None] * ks.values).sum(axis=0) - 1.0).max()
    assert drift > 1e-8    # reported, not conserved, for skew schedules


def test_dirichlet_below_global_and_monotone(gasket3):
    g, form, _ = gasket3
    sch = FormSchedule(form)
    cfg = SolverConfig()
    U = g.ball(0, 0.8)
    V = g.ball(0, 0.5)
    k_glob = kernel(sch, 0.0, 0.3, cfg)
    k_U = kernel(sch, 0.0, 0.3, cfg, domain=U)
    k_V = kernel(sch, 0.0, 0.3, cfg, domain=V)
    assert float((k_glob.values - k_U.values).min()) >= -1e-10
    assert float((k_U.values - k_V.values).min()) >= -1e-10


def test_steklov_average_identities():
    times = np.linspace(0.0, 1.0, 11)
    const = Trajectory(times=times, states=np.ones((11, 3)), initial=np.ones(3))
    avg = steklov_average(const, 0.2)
    assert np.allclose(avg.states, 1.0)
    lin = Trajectory(times=times, states=np.tile(times[:, None], (1, 3)),
                     initial=np.zeros(3))
    avg2 = steklov_average(lin, 0.2)
    assert np.allclose(avg2.states, avg2.times[:, None] + 0.1, atol=1e-12)
    # one grid cell: average of adjacent snapshots
    avg3 = steklov_average(lin, 0.1)
    assert np.allclose(avg3.states[0], 0.05)


def test_steklov_commutes_with_linear_maps():
    rng = np.random.default_rng(0)
    times = np.linspace(0.0, 1.0, 9)
    states = rng.normal(size=(9, 4))
    A = rng.normal(size=(4, 4))
    t1 = Trajectory(times=times, states=states, initial=states[0])
    t2 = Trajectory(times=times, states=states @ A.T, initial=states[0] @ A.T)
    lhs = steklov_average(t1, 0.25).states @ A.T
    rhs = steklov_average(t2, 0.25).states
    assert np.abs(lhs - rhs).max() < 1e-12


def test_steklov_window_validation():
    times = np.linspace(0.0, 1.0, 11)
    traj = Trajectory(times=times, states=np.ones((11, 2)), initial=np.ones(2))
    with pytest.raises(ValueError):
        steklov_average(traj, 0.01)
    with pytest.raises(ValueError):
        steklov_average(traj, 2.0)


def test_max_principle_nonpositive_data(gasket3):
    g, form, _ = gasket3
    sch = FormSchedule(form)
    U = g.ball(0, 0.7)
    rng = np.random.default_rng(1)
    f = -np.abs(rng.normal(size=g.n))
    traj = solve_ivp(sch, f, 0.0, 0.3, SolverConfig(), domain=U)
    rep = check_max_principle(sch, traj, U)
    assert rep.status == "pass"
    assert rep.constant <= 1e-10
    assert rep.details["subsolution_defect"] < 1e-10


def test_max_principle_zero_solution(gasket3):
    g, form, _ = gasket3
    sch = FormSchedule(form)
    U = g.ball(0, 0.7)
    traj = solve_ivp(sch, np.zeros(g.n), 0.0, 0.2, SolverConfig(), domain=U)
    assert check_max_principle(sch, traj, U).status == "pass"


def test_max_principle_not_applicable_path(gasket3):
    g, form, _ = gasket3
    sch = FormSchedule(form)
    U = g.ball(0, 0.7)
    rng = np.random.default_rng(2)
    f = rng.normal(size=g.n)           # sign-changing with positive part
    traj = solve_ivp(sch, f, 0.0, 0.2, SolverConfig(), domain=U)
    rep = check_max_principle(sch, traj, U)
    assert rep.status == "not-applicable"
    f_neg = -np.abs(f)
    traj2 = solve_ivp(sch, f_neg, 0.0, 0.2, SolverConfig(), domain=U)
    assert check_max_principle(sch, traj2, U).status == "pass"


def test_super_mean_value_cases(gasket3):
    g, form, _ = gasket3
    sch = FormSchedule(form)
    cfg = SolverConfig()
    U = g.ball(0, 0.7)
    rng = np.random.default_rng(3)
    f = np.abs(rng.normal(size=g.n))
    dir_traj = solve_ivp(sch, f, 0.0, 0.3, cfg, domain=U)
    rep = check_super_mean_value(sch, dir_traj, U, 0.0, cfg)
    assert rep.status == "pass"
    assert abs(rep.constant) <= 1e-10      # equality against itself
    glob = solve_ivp(sch, f, 0.0, 0.3, cfg)
    rep2 = check_super_mean_value(sch, glob, U, 0.0, cfg)
    assert rep2.status == "pass" and rep2.constant >= -1e-10
    shifted = Trajectory(times=dir_traj.times, states=dir_traj.states + 0.5,
                         initial=dir_traj.states[0] + 0.5)
    rep3 = check_super_mean_value(sch, shifted, U, 0.0, cfg)
    assert rep3.constant > 1e-3            # strict domination


def test_caloric_axioms(gasket3):
    g, form, hp = gasket3
    sch = FormSchedule(form)
    U = g.ball(0, 0.7)
    rep = check_caloric_axioms(sch, U, (0.0, 0.3), SolverConfig(), seed=4)
    assert rep.status == "pass"
    assert rep.details["constants"] == pytest.approx(0.0, abs=1e-12)
    skew = build_nonsymmetric(form, hp, 1.0)
    rep2 = check_caloric_axioms(skew, U, (0.0, 0.3), SolverConfig(), seed=4)
    assert rep2.details["constants"] is None   # gated on left-strong locality


def test_subsolution_defect_exact_for_backward_euler(gasket3):
    g, form, hp = gasket3
    sch = build_nonsymmetric(form, hp, 1.0)
    U = g.ball(0, 0.7)
    rng = np.random.default_rng(5)
    traj = solve_ivp(sch, np.abs(rng.normal(size=g.n)), 0.0, 0.2,
                     SolverConfig(), domain=U)
    d = subsolution_defect(sch, traj, U)
    assert np.abs(d).max() < 1e-12


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(scheme="theta", theta=0.3)
    with pytest.raises(ValueError):
        SolverConfig(scheme="mystery")
    with pytest.raises(ValueError):
        SolverConfig(steps=0)


def test_exact_exponential_rejects_time_dependence():
    g = path_graph(4)
    form = ReferenceForm(g)
    hp = harmonic_profile(form, [0, 4], [0.0, 1.0])
    from fractalheat import time_dependent_schedule
    sch = time_dependent_schedule(form, [(0.0, 1.0, hp, 1.0),
                                         (1.0, 2.0, hp, 2.0)])
    with pytest.raises(ValueError):
        transition(sch, 0.0, 2.0, SolverConfig(scheme="exact-exponential"))
