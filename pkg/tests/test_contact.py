import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from histinc.contact import (
    ContactLaw, FemSpaces, MaterialLaw, Mesh2D, assemble_problem, default_contact, default_material,
    relaxation_constants, solve_assembled, solve_contact, symmetric_benchmark, write_vtk,
)
from histinc.contact.laws import isotropic_tensor, ramp_selection, tensor_norm
from histinc.dvhi import power_iteration_norm
from histinc.errors import ConfigurationError, GateError, NonConvergence
from histinc.operators import history_apply, history_eval
from histinc.probes import (
    ProbeSampler, check_contact_smallness, probe_four_point, probe_history_lipschitz, probe_mixed_monotonicity,
    probe_prox_nonexpansive, probe_relaxed_monotonicity,
)
from histinc.spaces import TimeGrid, Trajectory, bochner_norm
from histinc.system import solve_monolithic_oracle


@pytest.fixture(scope="module")
def bench():
    return symmetric_benchmark()


@pytest.fixture(scope="module")
def problem(bench):
    return assemble_problem(bench["mesh"], bench["material"], bench["contact"], bench["loads"], bench["initial"])


@pytest.fixture(scope="module")
def solution64(bench):
    return solve_contact(**bench, grid=TimeGrid(1.0, 64))


# --- mesh


def test_rectangle_counts_and_tags():
    m = Mesh2D.rectangle(2.0, 1.0, 8, 4)
    assert m.n_nodes == 45 and m.n_triangles == 64
    assert len(m.boundary_edges) == 2 * (8 + 4)
    assert m.part_length("D") == 2.0 and m.part_length("C") == 2.0 and m.part_length("N") == 2.0


def test_mirror_permutation_is_reflection():
    m = Mesh2D.rectangle(2.0, 1.0, 8, 4)
    P = m.mirror_permutation()
    assert np.array_equal(P[P], np.arange(m.n_nodes))
    assert np.allclose(m.nodes[P, 0], 2.0 - m.nodes[:, 0]) and np.allclose(m.nodes[P, 1], m.nodes[:, 1])


def test_mesh_needs_dirichlet_part():
    with pytest.raises(ConfigurationError):
        Mesh2D.rectangle(1.0, 1.0, 2, 2, sides={"left": "N", "right": "N"})


def test_mesh_rejects_bad_tagging():
    m = Mesh2D.rectangle(1.0, 1.0, 2, 2)
    with pytest.raises(ConfigurationError):
        Mesh2D(m.Lx, m.Ly, m.nx, m.ny, m.nodes, m.triangles, m.boundary_edges[:-1], m.boundary_tags[:-1])
    edges = np.vstack([m.boundary_edges, m.boundary_edges[:1]])
    with pytest.raises(ConfigurationError):
        Mesh2D(m.Lx, m.Ly, m.nx, m.ny, m.nodes, m.triangles, edges, m.boundary_tags + ("D",))
    with pytest.raises(ConfigurationError):
        Mesh2D(m.Lx, m.Ly, m.nx, m.ny, m.nodes, m.triangles, m.boundary_edges, ("X",) * len(m.boundary_edges))
    with pytest.raises(ConfigurationError):
        Mesh2D.rectangle(1.0, 1.0, 2, 2, sides={"front": "D"})


# --- finite element spaces


def test_grams_and_frames():
    fem = FemSpaces(Mesh2D.rectangle(2.0, 1.0, 8, 4))
    for G in (fem.V.gram_strong, fem.V.gram_weak, fem.E.gram_strong, fem.E.gram_weak):
        assert np.linalg.eigvalsh(G)[0] > 0
    assert np.allclose(np.linalg.norm(fem.normals, axis=1), 1.0)
    assert np.allclose(np.sum(fem.normals * fem.tangents, axis=1), 0.0)
    assert fem.contact_weights.sum() == pytest.approx(2.0)


def test_strain_adjoint_is_the_gram():
    fem = FemSpaces(Mesh2D.rectangle(2.0, 1.0, 8, 4))
    rng = np.random.default_rng(0)
    v, th = rng.standard_normal(fem.nV), rng.standard_normal(fem.nE)
    assert np.allclose(fem.div_back(fem.strain(v)), fem.V.gram_strong @ v, atol=1e-13)
    assert np.allclose(fem.grad_back(fem.grad(th)), fem.E.gram_strong @ th, atol=1e-13)


def test_rigid_rotation_has_no_strain():
    fem = FemSpaces(Mesh2D.rectangle(1.0, 1.0, 4, 4, sides={"left": "C", "right": "N", "bottom": "D"}))
    x = fem.mesh.nodes
    field = np.column_stack([-(x[:, 1]), x[:, 0]])
    # only the restriction matters for strain; rebuild nodal values including the clamped nodes
    U = field[fem.mesh.triangles]
    G = np.einsum("eai,eaj->eij", U, fem.grads)
    assert np.abs(G + np.swapaxes(G, 1, 2)).max() < 1e-13


def test_single_element_trace_norm():
    fem = FemSpaces(Mesh2D.rectangle(1.0, 1.0, 1, 1, sides={"right": "N"}))
    assert 0 < fem.trace_norm < np.inf


def test_trace_norm_dense_crosscheck():
    fem = FemSpaces(Mesh2D.rectangle(1.0, 1.0, 4, 4))
    W2 = np.diag(np.repeat(fem.contact_weights, 2))
    G = fem.trace_matrix
    lam = sla.eigh(G.T @ W2 @ G, fem.V.gram_strong, eigvals_only=True)[-1]
    assert fem.trace_norm == pytest.approx(math.sqrt(lam), rel=1e-8)
    P = fem.temperature_trace
    W = np.diag(fem.contact_weights)
    lamE = sla.eigh(P.T @ W @ P, fem.E.gram_strong, eigvals_only=True)[-1]
    assert fem.trace_norm_E == pytest.approx(math.sqrt(lamE), rel=1e-8)


def test_trace_norm_refinement():
    a = FemSpaces(Mesh2D.rectangle(1.0, 1.0, 8, 8)).trace_norm
    b = FemSpaces(Mesh2D.rectangle(1.0, 1.0, 16, 16)).trace_norm
    assert abs(a - b) / b < 0.05


def test_power_iteration_budget_exhausted():
    fem = FemSpaces(Mesh2D.rectangle(1.0, 1.0, 4, 4))
    W2 = np.diag(np.repeat(fem.contact_weights, 2))
    from histinc.spaces import DiscreteSpace
    with pytest.raises(NonConvergence):
        power_iteration_norm(fem.trace_matrix, fem.V, DiscreteSpace(W2, W2), tol=1e-15, max_iter=2, strict=True)


def test_regularizer_rows_sum_to_one():
    fem = FemSpaces(Mesh2D.rectangle(2.0, 1.0, 8, 4))
    R = fem.regularizer()
    assert np.allclose(R.sum(axis=1), 1.0)
    assert R[3, 3] == 0.5 and R[3, 2] == R[3, 4] == 0.25
    assert R[0, 0] == 0.75 and R[0, 1] == 0.25


# --- laws


def test_material_law_checks():
    good = default_material()
    assert good.m_visc == 1.0
    with pytest.raises(ConfigurationError):
        MaterialLaw(**{**good.__dict__, "visc": lambda t, th, e: e + 1.0})
    bad = np.zeros((2, 2, 2, 2))
    bad[0, 1, 0, 0] = 1.0
    with pytest.raises(ConfigurationError):
        MaterialLaw(**{**good.__dict__, "relax": lambda t: bad})
    with pytest.raises(ConfigurationError):
        MaterialLaw(**{**good.__dict__, "relax_bound": 0.5 * good.relax_bound})
    with pytest.raises(ConfigurationError):
        MaterialLaw(**{**good.__dict__, "m_cond": 0.0})


def test_contact_law_checks():
    good = default_contact()
    with pytest.raises(ConfigurationError):
        ContactLaw(**{**good.__dict__, "damper": lambda t, r, z: 0.4 + 0 * r})
    with pytest.raises(ConfigurationError):
        ContactLaw(**{**good.__dict__, "damper": lambda t, r, z: 2.0 + 0 * r})
    with pytest.raises(ConfigurationError):
        ContactLaw(**{**good.__dict__, "c0_bar": 0.1})
    with pytest.raises(ConfigurationError):
        ContactLaw(**{**good.__dict__, "k1": 0.0})


def test_isotropic_tensor_symmetries():
    C = isotropic_tensor(0.3, 0.7)
    assert np.allclose(C, C.transpose(1, 0, 2, 3)) and np.allclose(C, C.transpose(2, 3, 0, 1))
    eps = np.array([[1.0, 0.2], [0.2, -0.5]])
    assert np.allclose(np.einsum("ijkl,kl->ij", C, eps), 0.6 * eps + 0.7 * np.trace(eps) * np.eye(2))
    assert tensor_norm(C) == pytest.approx(2 * 0.3 + 2 * 0.7)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_ramp_selection_relaxed_monotone(r1, r2):
    c0, delta, beta = 0.5, 0.2, 0.1
    s1, s2 = ramp_selection(np.array(r1), c0, delta, beta), ramp_selection(np.array(r2), c0, delta, beta)
    assert (s1 - s2) * (r1 - r2) >= -beta * (r1 - r2) ** 2 - 1e-12
    assert abs(s1) <= c0


@given(st.floats(0, 50), st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 10))
@settings(max_examples=50)
def test_material_pointwise_ledger(theta_shift, a, b, c):
    mat = default_material()
    e1 = np.array([[a, b], [b, c]])
    e2 = np.array([[c, a], [a, b]])
    th = np.array([theta_shift - 25.0])
    d = e1 - e2
    lhs = float(np.sum((mat.visc(0.0, th, e1[None]) - mat.visc(0.0, th, e2[None]))[0] * d))
    assert lhs >= mat.m_visc * float(np.sum(d * d)) - 1e-9


# --- ledger and gate


def test_relaxation_constant_examples():
    assert relaxation_constants(0.1, 2.0, 0.0, 2.0)["m_J"] == pytest.approx(0.8)
    assert relaxation_constants(0.0, 1.0, 0.05, 2.0)["m_g"] == pytest.approx(0.2)


def test_gate_examples():
    led = {"m_visc": 1.0, "beta_bar": 0.2, "k2": 1.0, "trace_norm": 2.0, "m_cond": 1.0, "m0": 0.05}
    rep = check_contact_smallness(led)
    assert rep.passed and rep.margins == pytest.approx((0.2, 0.8))
    rep = check_contact_smallness({**led, "beta_bar": 0.25})
    assert not rep.passed


def test_assembled_ledger(problem):
    led = problem.ledger
    c = problem.constants
    assert led["m_J"] == c["beta_bar"] * c["k2"] * c["trace_norm"] ** 2
    assert led["m_g"] == c["m0"] * c["trace_norm_E"] ** 2
    assert led["m_A"] == c["m_visc"] and led["m_B"] == c["m_cond"]
    rep = check_contact_smallness(problem.contact_ledger)
    assert rep.passed and all(m > 0 for m in rep.margins)
    assert rep.margins[0] == pytest.approx(led["m_A"] - led["m_J"])


def test_gate_blocks_solve(bench):
    weak = default_material(eta=0.05)
    with pytest.raises(GateError):
        solve_contact(bench["mesh"], weak, bench["contact"], grid=TimeGrid(1.0, 4))


def test_zero_data_loads_vanish(bench):
    p = assemble_problem(bench["mesh"], bench["material"], bench["contact"],
                         {"f0": lambda t, x: np.zeros((len(x), 2)), "h0": lambda t, x: np.zeros(len(x))})
    for t in np.linspace(0, 1, 5):
        assert np.all(p.load1(t) == 0) and np.all(p.load2(t) == 0)
    q = assemble_problem(bench["mesh"], bench["material"], bench["contact"])
    assert q.load1 is None and q.load2 is None


def test_initial_data_checks(bench):
    m = bench["mesh"]
    with pytest.raises(ConfigurationError):
        assemble_problem(m, bench["material"], bench["contact"], initial={"u0": np.ones((m.n_nodes, 2))})
    with pytest.raises(ConfigurationError):
        assemble_problem(m, bench["material"], bench["contact"], initial={"theta0": np.ones(3)})
    with pytest.raises(ConfigurationError):
        assemble_problem(m, bench["material"], bench["contact"], loads={"g": None})


# --- probes on the assembled operators


def test_J_probe(problem):
    rep = probe_relaxed_monotonicity(problem.potJ, ProbeSampler(problem.V, (problem.X, problem.Z), seed=3),
                                     n_samples=128)
    assert rep.estimated_constant <= problem.ledger["m_J"] + 1e-8
    assert rep.passed


def test_g_probe(problem):
    rep = probe_relaxed_monotonicity(problem.potG, ProbeSampler(problem.E, (problem.V,), seed=4), n_samples=128)
    assert rep.passed


def test_A_and_B_probes(problem):
    assert probe_mixed_monotonicity(problem.opA, ProbeSampler(problem.V, (problem.X,), seed=5), 128).passed
    assert probe_mixed_monotonicity(problem.opB, ProbeSampler(problem.E, (problem.V, problem.Q), seed=6),
                                    128).passed


def test_phi_probes(problem):
    s = ProbeSampler(problem.V, (problem.X, problem.Y), seed=7)
    assert probe_prox_nonexpansive(problem.potPhi, s, 128).passed
    assert probe_four_point(problem.potPhi, s, 128).passed


def test_phi_positively_homogeneous(problem):
    rng = np.random.default_rng(8)
    val = problem.potPhi.value
    for _ in range(32):
        th, y, v = rng.standard_normal(problem.E.dim), rng.standard_normal(problem.Y.dim), rng.standard_normal(
            problem.V.dim)
        a = float(np.exp(rng.uniform(-3, 3)))
        assert val(0.3, th, y, a * v) == pytest.approx(a * val(0.3, th, y, v), rel=1e-12)


def test_phi_prox_minimises(problem):
    rng = np.random.default_rng(9)
    val, prox = problem.potPhi.value, problem.potPhi.resolvent
    for _ in range(16):
        th, y, x = rng.standard_normal(problem.E.dim), rng.standard_normal(problem.Y.dim), rng.standard_normal(
            problem.V.dim)
        rho = 0.7
        p = prox(0.0, th, y, rho, x)
        obj = lambda u: val(0.0, th, y, u) + np.sum((u - x) ** 2) / (2 * rho)
        for _ in range(8):
            assert obj(p) <= obj(p + 1e-3 * rng.standard_normal(x.size)) + 1e-14


@pytest.mark.parametrize("name", ["histS", "histR", "histR1"])
def test_history_lipschitz(problem, name):
    op = getattr(problem, name)
    rep = probe_history_lipschitz(op, ProbeSampler(problem.V, seed=10), n_samples=16, grid=TimeGrid(1.0, 8))
    assert rep.passed


@pytest.mark.parametrize("name", ["histS", "histR", "histR1"])
def test_history_prefix_matches_full(problem, name):
    op = getattr(problem, name)
    g = TimeGrid(1.0, 12)
    traj = Trajectory(problem.V, g, np.random.default_rng(11).standard_normal((13, problem.V.dim)))
    full = history_apply(op, traj).values
    for k in range(13):
        assert np.array_equal(history_eval(op, traj, k), full[k])


def test_S_exact_for_constant_velocity(bench):
    m = bench["mesh"]
    rng = np.random.default_rng(12)
    fem = FemSpaces(m)
    u0n = np.zeros((m.n_nodes, 2))
    u0n[fem.v_nodes] = rng.integers(-4, 5, (len(fem.v_nodes), 2)) / 4.0
    p = assemble_problem(m, bench["material"], bench["contact"], initial={"u0": u0n}, fem=fem)
    v = rng.integers(-8, 9, fem.nV) / 8.0
    g = TimeGrid(1.0, 64)
    out = history_apply(p.histS, Trajectory(p.V, g, np.tile(v, (65, 1)))).values
    vn, u0nu = fem.normal_trace @ v, fem.normal_trace @ p.u0
    for k, t in enumerate(g.nodes):
        assert np.array_equal(out[k], t * vn + u0nu)


def test_relaxation_part_for_constant_strain_rate(bench):
    tau = 0.5
    mat = default_material(mu_e=0.0, lam_e=0.0, relax_time=tau)
    p = assemble_problem(bench["mesh"], mat, bench["contact"])
    g = TimeGrid(1.0, 32)
    v = np.random.default_rng(13).standard_normal(p.V.dim)
    eps = p.fem.strain(v)
    mem = p.histR1.stresses(np.tile(v, (33, 1)), g)
    C = isotropic_tensor(0.1, 0.05)
    Ce = np.einsum("ijkl,ekl->eij", C, eps)
    scale = np.abs(Ce).max()
    for k, t in enumerate(g.nodes):
        exact = tau * (1.0 - math.exp(-t / tau)) * Ce
        assert np.abs(mem[k] - exact).max() <= 2 * g.dt * scale


def test_slip_history_constant_tangential_velocity(problem):
    g = TimeGrid(1.0, 16)
    v = np.random.default_rng(14).standard_normal(problem.V.dim)
    out = history_apply(problem.histR, Trajectory(problem.V, g, np.tile(v, (17, 1)))).values
    vt = np.abs(problem.fem.tangential_trace @ v)
    # u0 = 0, so slip_k = sum_{j<k} dt * t_j |v_tau| = dt^2 k(k-1)/2 |v_tau|
    for k in range(17):
        assert np.allclose(out[k], g.dt ** 2 * k * (k - 1) / 2 * vt, rtol=1e-13, atol=1e-15)


# --- solving


def test_zero_data_gives_zero_solution(bench):
    sol = solve_contact(bench["mesh"], bench["material"], bench["contact"], grid=TimeGrid(1.0, 16))
    assert np.abs(sol.u.values).max() <= 1e-12
    assert np.abs(sol.theta.values).max() <= 1e-12
    assert np.abs(sol.sigma).max() <= 1e-12


def test_mirror_symmetry():
    b = symmetric_benchmark(8, 4)
    sol = solve_contact(**b, grid=TimeGrid(1.0, 32))
    fem, P = sol.problem.fem, b["mesh"].mirror_permutation()
    W = fem.velocity_field(sol.w.values)
    assert np.abs(W - W[:, P, :] * np.array([-1.0, 1.0])).max() <= 1e-10
    TH = fem.temperature_field(sol.theta.values)
    assert np.abs(TH - TH[:, P]).max() <= 1e-10
    assert np.abs(TH).max() > 0.1


def test_isothermal_consistency(bench):
    mat = default_material(heating=0.0)
    con = default_contact(L_tau=0.0, heat_gain=0.0, m0=0.0)
    loads = {k: v for k, v in bench["loads"].items() if k != "h0"}
    g = TimeGrid(1.0, 32)
    a = solve_contact(bench["mesh"], mat, con, loads, grid=g)
    b = solve_contact(bench["mesh"], mat, con, loads, grid=g, freeze_theta=True)
    assert np.all(a.theta.values == 0)
    assert np.array_equal(a.w.values, b.w.values)


def test_oracle_agreement(solution64):
    w2, th2 = solve_monolithic_oracle(solution64.problem, TimeGrid(1.0, 64))
    assert bochner_norm(solution64.w - w2) <= 1e-5 * bochner_norm(w2)
    assert bochner_norm(solution64.theta - th2) <= 1e-5 * bochner_norm(th2)


def test_recovery(solution64):
    s = solution64
    dt = s.w.grid.dt
    assert np.array_equal(s.u.values[0], s.problem.u0)
    assert np.allclose(np.diff(s.u.values, axis=0), dt * s.w.values[:-1], atol=1e-15)
    assert s.sigma.shape == (65, s.problem.fem.mesh.n_triangles, 2, 2)
    assert np.allclose(s.sigma, np.swapaxes(s.sigma, -1, -2))
    assert s.diag.extra["contact_margins"] == list(s.gate.margins)
    assert set(s.diag.extra["interpenetration"]) == {"max_normal_displacement", "penetrating_node_steps"}


def test_stress_at_rest_is_elastic(bench):
    m = bench["mesh"]
    fem = FemSpaces(m)
    u0n = np.zeros((m.n_nodes, 2))
    u0n[fem.v_nodes, 0] = 0.1 * m.nodes[fem.v_nodes, 1]
    p = assemble_problem(m, bench["material"], bench["contact"], initial={"u0": u0n}, fem=fem)
    sol = solve_assembled(p, TimeGrid(1.0, 2))
    mat = bench["material"]
    assert np.allclose(sol.sigma[0], mat.visc(0.0, np.zeros(m.n_triangles), fem.strain(p.w0))
                       + mat.elast(0.0, fem.strain(p.u0)))


def test_vtk_export(tmp_path, solution64):
    s = solution64
    fem = s.problem.fem
    path = write_vtk(tmp_path / "out.vtk", fem.mesh,
                     {"u": fem.velocity_field(s.u.values[-1]), "theta": fem.temperature_field(s.theta.values[-1])},
                     {"sigma": s.sigma[-1]})
    text = path.read_text().splitlines()
    assert text[0].startswith("# vtk DataFile") and "POINT_DATA 45" in text and "CELL_DATA 64" in text
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "bad.vtk", fem.mesh, {"bad": np.zeros(3)})
