import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import fsolve

from histinc.benchmark import random_spd
from histinc.dvhi import (
    ConstraintPotential, CoupledSource, DvhiProblem, LipschitzSource, MonotoneOperator, build_system,
    check_inequality_residual, dvhi_benchmark, linear_matrix, map_constants, power_iteration_norm, solve_dvhi,
)
from histinc.errors import ConfigurationError, GateError
from histinc.probes import ProbeSampler, probe_mixed_monotonicity, probe_relaxed_monotonicity
from histinc.spaces import DiscreteSpace, TimeGrid, Trajectory, bochner_norm, operator_norm
from histinc.system import FrozenData, solve_monolithic_oracle, solve_system

R1 = DiscreteSpace.euclidean(1)


def scalar_dvhi(u0=1.0, th0=1.0, m_G=0.0, L_os=0.0, m_Abar=1.0, M=1.0):
    return DvhiProblem(
        R1, R1, R1, R1,
        MonotoneOperator(lambda t, v: m_Abar * v, m=m_Abar, c1=m_Abar),
        ConstraintPotential(lambda t, th, x: -m_G * x, m_G=m_G, c2G=m_G),
        [[M]], [[1.0]],
        LipschitzSource(lambda t, th: np.zeros(1)),
        MonotoneOperator(lambda t, th: th, m=1.0, c1=1.0),
        CoupledSource(lambda t, th, y: np.zeros(1), L_os=L_os),
        [u0], [th0])


# --- ledger mapping


def test_mapping_examples():
    c = {"m_Abar": 5.0, "m_G": 1.0, "norm_M": 2.0, "mbar_G": 3.0, "L_F": 5.0,
         "m_Bbar": 2.0, "L_os": 0.5, "L_f": 1.0, "norm_theta": 3.0}
    out = map_constants(c)
    assert out["m_J"] == 4.0 and out["mbar_J"] == 11.0
    assert out["m_B"] == 1.5 and out["mbar_B"] == 3.0
    assert out["m_A"] == 5.0 and out["mbar_A"] == 0.0
    assert out["m_g"] == 0.0 and out["mbar_g"] == 0.0


pos = st.floats(0.0, 50.0, allow_nan=False)


@given(pos, pos, pos, pos, pos, pos, pos, pos, pos)
def test_mapping_property(mA, mG, mbG, nM, LF, mB, Los, Lf, nth):
    c = dict(m_Abar=mA, m_G=mG, mbar_G=mbG, norm_M=nM, L_F=LF, m_Bbar=mB, L_os=Los, L_f=Lf, norm_theta=nth)
    out = map_constants(c)
    assert out["m_J"] == mG * nM ** 2
    assert out["mbar_J"] == mbG * nM + LF
    assert out["m_B"] == mB - Los
    assert out["mbar_B"] == Lf * nth
    assert out["m_A"] == mA


def test_built_ledger_matches_mapping():
    d = dvhi_benchmark(1)
    led = build_system(d).ledger
    for k, v in map_constants(d.constants).items():
        assert led[k] == v
    assert all(led[k] == 0.0 for k in ("c_R", "c_R1", "c_R2", "c_S"))


def test_smooth_selection_is_minus_F():
    V = DiscreteSpace(np.diag([2.0, 1.0]), np.diag([1.0, 1.0]))
    E = DiscreteSpace.euclidean(1)
    X0 = V
    F = lambda t, th: np.array([th[0], 2.0 * t])
    d = DvhiProblem(V, E, X0, DiscreteSpace.euclidean(2), MonotoneOperator(lambda t, v: V.gram_strong @ v, 1.0),
                    ConstraintPotential(lambda t, th, x: np.zeros(2)), np.eye(2), np.zeros((2, 2)),
                    LipschitzSource(F, L_F=1.0), MonotoneOperator(lambda t, th: th, 1.0), CoupledSource(
                        lambda t, th, y: np.zeros(1)), [0.0, 0.0], [0.0])
    sys = build_system(d)
    assert sys.potJ.m_J == 0.0
    th, v = np.array([0.7]), np.array([1.0, -3.0])
    assert np.array_equal(sys.potJ(0.3, th, np.zeros(1), v), -F(0.3, th))


def test_h7_violation_rejected():
    with pytest.raises(GateError):
        build_system(scalar_dvhi(m_G=1.0, m_Abar=1.0))
    with pytest.raises(GateError):
        build_system(scalar_dvhi(L_os=1.0))


def test_embedding_must_hold():
    V = DiscreteSpace(np.eye(1), 4.0 * np.eye(1))
    d = scalar_dvhi()
    bad = DvhiProblem(V, d.E, d.X0, d.Y0, d.opAbar, d.potG, d.mapM, d.mapTheta, d.rhsF, d.opBbar, d.rhsf,
                      d.u0, d.theta0)
    with pytest.raises(ConfigurationError):
        build_system(bad)


def test_linear_map_checks():
    A = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 1.0]])
    assert np.array_equal(linear_matrix(lambda x: A @ x, 2, 3), A)
    with pytest.raises(ConfigurationError):
        linear_matrix(lambda x: A @ x + 1e-6, 2, 3)
    with pytest.raises(ConfigurationError):
        linear_matrix(lambda x: A @ np.sin(x), 2, 3)
    with pytest.raises(ConfigurationError):
        linear_matrix(np.ones((2, 2)), 2, 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10 ** 6))
def test_power_iteration_matches_dense(n, m, seed):
    rng = np.random.default_rng(seed)
    src = DiscreteSpace(random_spd(rng, n), random_spd(rng, n))
    dst = DiscreteSpace(random_spd(rng, m), random_spd(rng, m))
    P = rng.standard_normal((m, n))
    assert power_iteration_norm(P, src, dst) == pytest.approx(operator_norm(P, src, dst), rel=1e-10)


def test_power_iteration_zero_map():
    assert power_iteration_norm(np.zeros((2, 3)), DiscreteSpace.euclidean(3), DiscreteSpace.euclidean(2)) == 0.0


# --- solving


def test_decoupled_decays():
    g = TimeGrid(1.0, 64)
    u, th, diag = solve_dvhi(scalar_dvhi(), g)
    exact = (1 + g.dt) ** -np.arange(g.N + 1.0)
    assert np.max(np.abs(u.values[:, 0] - exact)) < 1e-12
    assert np.max(np.abs(th.values[:, 0] - exact)) < 1e-12
    assert "ledger_mapping" in diag.extra


def test_zero_data():
    u, th, _ = solve_dvhi(scalar_dvhi(0.0, 0.0), TimeGrid(1.0, 16))
    assert np.all(u.values == 0) and np.all(th.values == 0)


def test_benchmark_matches_oracle():
    d = dvhi_benchmark(2)
    g = TimeGrid(1.0, 64)
    u, th, _ = solve_dvhi(d, g)
    u2, th2 = solve_monolithic_oracle(build_system(d), g)
    assert bochner_norm(u - u2) <= 1e-6 * bochner_norm(u2)
    assert bochner_norm(th - th2) <= 1e-6 * bochner_norm(th2)


def test_benchmark_uniqueness():
    d = dvhi_benchmark(3)
    sys = build_system(d)
    g = TimeGrid(1.0, 64)
    u1, th1, _ = solve_system(sys, g)
    u2, th2, _ = solve_system(sys, g, start=FrozenData.random(sys, g, np.random.default_rng(9), 3.0))
    assert math.hypot(bochner_norm(u1 - u2), bochner_norm(th1 - th2)) <= 1e-8 * math.hypot(
        bochner_norm(u1), bochner_norm(th1))


def test_built_system_ledger_probes():
    d = dvhi_benchmark(4)
    sys = build_system(d)
    assert probe_relaxed_monotonicity(sys.potJ, ProbeSampler(sys.V, (sys.X, sys.Z), seed=1)).passed
    assert probe_mixed_monotonicity(sys.opB, ProbeSampler(sys.E, (sys.V, sys.Q), seed=2)).passed
    assert probe_mixed_monotonicity(sys.opA, ProbeSampler(sys.V, (sys.X,), seed=3)).passed


def _plain_integrator(d, g):
    """Implicit Euler for the smooth coupled equations, solved jointly by fsolve."""
    nu, ne = d.V.dim, d.E.dim
    U, TH = np.zeros((g.N + 1, nu)), np.zeros((g.N + 1, ne))
    U[0], TH[0] = d.u0, d.theta0
    for k in range(1, g.N + 1):
        t = g.nodes[k]

        def res(z):
            u, th = z[:nu], z[nu:]
            ru = d.V.gram_weak @ (u - U[k - 1]) / g.dt + d.opAbar(t, u) - d.rhsF(t, th)
            rt = d.E.gram_weak @ (th - TH[k - 1]) / g.dt + d.opBbar(t, th) - d.rhsf(t, th, d.mapTheta @ u)
            return np.concatenate([ru, rt])

        z = fsolve(res, np.concatenate([U[k - 1], TH[k - 1]]), xtol=1e-12)
        U[k], TH[k] = z[:nu], z[nu:]
    return U, TH


def test_smooth_case_matches_plain_integrator():
    d = dvhi_benchmark(5, nonsmooth=False)
    g = TimeGrid(1.0, 64)
    u, th, _ = solve_dvhi(d, g)
    U, TH = _plain_integrator(d, g)
    assert np.max(np.abs(u.values - U)) <= 1e-8 and np.max(np.abs(th.values - TH)) <= 1e-8


# --- inequality check


def test_zero_direction_gives_zero_slack():
    d = dvhi_benchmark(0)
    g = TimeGrid(1.0, 16)
    u, th, _ = solve_dvhi(d, g)
    rep = check_inequality_residual(d, u, th, g, directions=np.zeros((1, d.V.dim)))
    assert rep.min_slack == 0.0


def test_smooth_linear_slack():
    d = dvhi_benchmark(1, nonsmooth=False)
    g = TimeGrid(1.0, 32)
    u, th, _ = solve_dvhi(d, g)
    rep = check_inequality_residual(d, u, th, g, n_test_dirs=16)
    assert rep.min_slack >= -1e-8
    assert rep.theta_residual <= 1e-8


def test_benchmark_slack():
    d = dvhi_benchmark(0)
    g = TimeGrid(1.0, 128)
    u, th, _ = solve_dvhi(d, g)
    rep = check_inequality_residual(d, u, th, g, n_test_dirs=64)
    assert rep.n_nodes == 128 and rep.n_directions == 64
    assert rep.min_slack >= -1e-6
    assert rep.theta_residual <= 1e-6


def test_wrong_solution_is_detected():
    d = dvhi_benchmark(0)
    g = TimeGrid(1.0, 32)
    u, th, _ = solve_dvhi(d, g)
    rep = check_inequality_residual(d, Trajectory(d.V, g, 1.1 * u.values), th, g, n_test_dirs=32)
    assert rep.min_slack < -1e-3
