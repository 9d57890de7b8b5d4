import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from histinc.operators import (
    AccumulateThenMap, ClarkePotentialJ, ConvexPotentialPhi, CustomHistory, IntegralOfMap, OperatorFamilyA,
    OperatorFamilyB, VolterraKernel, ZeroHistory, growth_bound, history_apply, history_eval, soft_threshold,
)
from histinc.spaces import DiscreteSpace, TimeGrid, Trajectory

R1 = DiscreteSpace.euclidean(1)
R2 = DiscreteSpace.euclidean(2)


def _ops(space):
    n = space.dim
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])[:n, :n]
    return [
        VolterraKernel(space, 1.0, kernel=lambda t, s: 1.0),
        VolterraKernel(space, 1.0, kernel=lambda t, s: math.exp(-(t - s))),
        VolterraKernel(space, 2.0, kernel=lambda t, s: 2.0 * rot if n == 2 else 2.0),
        IntegralOfMap(space, 1.0, map=np.tanh),
        AccumulateThenMap(space, 1.0, post=np.sin, offset=np.full(n, 0.3)),
        AccumulateThenMap(R1, 1.0, post=lambda x: [np.linalg.norm(x)]),
        ZeroHistory(space),
    ]


@pytest.mark.parametrize("N", [1, 2, 3, 4, 8, 10, 1024])
def test_identity_kernel_integrates_one(N):
    g = TimeGrid(1.0, N)
    op = VolterraKernel(R1, 1.0, kernel=lambda t, s: 1.0)
    assert history_eval(op, Trajectory.constant(R1, g, 1.0), N)[0] == pytest.approx(1.0, abs=1e-15)


def test_exponential_kernel():
    g = TimeGrid(1.0, 1024)
    op = VolterraKernel(R1, 1.0, kernel=lambda t, s: math.exp(-(t - s)))
    val = history_eval(op, Trajectory.constant(R1, g, 1.0), 1024)[0]
    assert abs(val - (1 - math.exp(-1))) <= 2 * g.dt


@pytest.mark.parametrize("idx", [0, 1, 2, 3, 5, 6])
def test_zero_trajectory_gives_zero(idx):
    op = _ops(R2)[idx]
    g = TimeGrid(1.0, 5)
    tr = Trajectory.zeros(R2, g)
    for k in range(6):
        assert np.all(history_eval(op, tr, k) == 0)


def test_offset_at_initial_node():
    op = IntegralOfMap(R2, 1.0, map=lambda v: v, offset=np.array([1.0, -2.0]))
    tr = Trajectory.constant(R2, TimeGrid(1.0, 4), [5.0, 5.0])
    assert np.array_equal(history_eval(op, tr, 0), [1.0, -2.0])


def test_range_checked():
    tr = Trajectory.zeros(R1, TimeGrid(1.0, 4))
    with pytest.raises(ValueError):
        history_eval(ZeroHistory(R1), tr, 5)
    with pytest.raises(ValueError):
        history_eval(ZeroHistory(R1), tr, -1)


def test_custom_history():
    op = CustomHistory(R1, 1.0, fn=lambda prefix, grid, k: [grid.dt * prefix[:, 0].sum()])
    tr = Trajectory.constant(R1, TimeGrid(1.0, 4), 1.0)
    assert history_apply(op, tr).values[:, 0] == pytest.approx([0, 0.25, 0.5, 0.75, 1.0])


vals_pair = st.integers(2, 10).flatmap(lambda N: st.tuples(
    arrays(float, (N + 1, 2), elements=st.floats(-10, 10)),
    arrays(float, (N + 1, 2), elements=st.floats(-10, 10)),
    st.integers(0, N)))


@settings(max_examples=40)
@given(vals_pair)
def test_causality_bitwise(data):
    a, b, k = data
    b = b.copy()
    b[:k] = a[:k]
    g = TimeGrid(1.0, len(a) - 1)
    ta, tb = Trajectory(R2, g, a), Trajectory(R2, g, b)
    for op in _ops(R2)[:5] + [_ops(R2)[6]]:
        assert np.array_equal(history_eval(op, ta, k), history_eval(op, tb, k))
        # the all-nodes evaluation agrees with the nodewise one
        assert np.array_equal(history_apply(op, ta).values[k], history_eval(op, ta, k))


@settings(max_examples=40)
@given(vals_pair)
def test_volterra_lipschitz(data):
    a, b, _ = data
    g = TimeGrid(2.0, len(a) - 1)
    ta, tb = Trajectory(R2, g, a), Trajectory(R2, g, b)
    diff = np.concatenate([[0.0], np.cumsum(g.dt * np.linalg.norm(a - b, axis=1))[:-1]])
    for op in _ops(R2):
        out = history_apply(op, ta).values - history_apply(op, tb).values
        lhs = np.linalg.norm(out, axis=1)
        assert np.all(lhs <= op.lipschitz_const * diff * (1 + 1e-12) + 1e-12)


def test_growth_bound_examples():
    fam = OperatorFamilyA(lambda t, th, v: v, m_A=1.0, a0=1.0, a1=0.0, a2=2.0)
    assert growth_bound(fam, 0.0, (5.0, 3.0)) == 7.0
    zero = OperatorFamilyA(lambda t, th, v: v, m_A=1.0)
    assert growth_bound(zero, 0.3, (4.0, 9.0)) == 0.0
    fam = OperatorFamilyA(lambda t, th, v: v, m_A=1.0, a0=lambda t: 0.5, a1=1.0, a2=0.0)
    assert growth_bound(fam, 0.0, (2.0, 100.0)) == 2.5
    with pytest.raises(ValueError):
        growth_bound(fam, 0.0, (1.0, 2.0, 3.0))


def test_family_validation():
    with pytest.raises(ValueError):
        OperatorFamilyA(lambda t, th, v: v, m_A=0.0)
    with pytest.raises(ValueError):
        OperatorFamilyB(lambda t, w, wb, th: th, m_B=-1.0)
    with pytest.raises(ValueError):
        IntegralOfMap(R1, -1.0, map=np.tanh)


@given(arrays(float, 3, elements=st.floats(-10, 10)), st.floats(0.01, 5), st.floats(0.0, 3))
def test_soft_threshold_prox_consistency(x, rho, c):
    phi = ConvexPotentialPhi(lambda t, th, y, r, x: soft_threshold(x, r * c),
                             subgrad=lambda t, th, y, v: c * np.sign(v))
    p = phi.resolvent(0.0, None, None, rho, x)
    # on the kinks the subdifferential is the interval [-c, c]; check membership
    resid = (x - p) / rho
    active = p != 0
    assert np.allclose(resid[active], phi.subgrad(0, None, None, p)[active], atol=1e-8)
    assert np.all(np.abs(resid[~active]) <= c + 1e-12)


def test_clarke_dirderiv_surrogate_dominates_selection():
    pot = ClarkePotentialJ(lambda t, th, z, v: np.clip(v, -1, 1) - v / 2, m_J=0.5)
    v = np.array([0.3, 1.0])
    d = np.array([1.0, -1.0])
    assert pot.dirderiv(0, None, None, v, d) >= pot(0, None, None, v) @ d
