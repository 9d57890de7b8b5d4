import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from histinc.spaces import (
    DiscreteSpace, TimeGrid, Trajectory, bochner_norm, dual_pair, norm_strong, product_bochner_norm,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_norm_examples():
    assert norm_strong(DiscreteSpace(np.array([[1.0]])), [2.0]) == 2.0
    assert norm_strong(DiscreteSpace.euclidean(2), [3.0, 4.0]) == 5.0
    assert norm_strong(DiscreteSpace(np.diag([4.0, 9.0])), [1.0, 1.0]) == pytest.approx(math.sqrt(13), rel=1e-15)


def test_norm_dimension_mismatch():
    with pytest.raises(ValueError):
        norm_strong(DiscreteSpace.euclidean(2), [1.0, 2.0, 3.0])


def test_dual_pair_examples():
    assert dual_pair([1, 0], [0, 1]) == 0
    assert dual_pair([2], [3]) == 6
    assert dual_pair([1, 1, 1], [1, 1, 1]) == 3
    with pytest.raises(ValueError):
        dual_pair([1, 2], [1])


def test_dual_norm_inverts_gram():
    sp = DiscreteSpace(np.diag([4.0, 9.0]))
    f = np.array([2.0, 3.0])
    assert sp.norm_dual(f) == pytest.approx(math.sqrt(1 + 1))
    assert sp.dual().norm(f) == pytest.approx(sp.norm_dual(f))


def test_space_validation():
    with pytest.raises(ValueError):
        DiscreteSpace(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        DiscreteSpace(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        DiscreteSpace(np.eye(2), -np.eye(2))


def test_grid():
    g = TimeGrid(1.0, 3)
    assert g.nodes[-1] == 1.0
    assert np.all(np.diff(g.nodes) > 0)
    assert g.index(g.nodes[2]) == 2
    with pytest.raises(ValueError):
        g.index(0.5)
    for bad in [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5)]:
        with pytest.raises(ValueError):
            TimeGrid(*bad)


def test_bochner_examples():
    sp = DiscreteSpace.euclidean(1)
    assert bochner_norm(Trajectory.constant(sp, TimeGrid(2.0, 10), 1.0)) == pytest.approx(math.sqrt(2), rel=1e-14)
    assert bochner_norm(Trajectory.zeros(sp, TimeGrid(1.0, 10)), 3.0) == 0.0
    g = TimeGrid(1.0, 1024)
    val = bochner_norm(Trajectory.constant(sp, g, 1.0), 2.0)
    assert abs(val - math.sqrt((1 - math.exp(-2)) / 2)) <= 2 * g.dt
    with pytest.raises(ValueError):
        bochner_norm(Trajectory.constant(sp, g, 1.0), -1.0)


def test_trajectory_rejects_nonfinite():
    with pytest.raises(ValueError):
        Trajectory(DiscreteSpace.euclidean(1), TimeGrid(1.0, 2), [0.0, np.nan, 1.0])


@st.composite
def gram_and_pair(draw):
    n = draw(st.integers(1, 5))
    a = draw(arrays(float, (n, n), elements=st.floats(-2, 2)))
    gram = a @ a.T + np.eye(n)
    u = draw(arrays(float, n, elements=finite))
    v = draw(arrays(float, n, elements=finite))
    return DiscreteSpace(gram), u, v


@given(gram_and_pair())
def test_parallelogram_law(data):
    sp, u, v = data
    lhs = sp.norm(u + v) ** 2 + sp.norm(u - v) ** 2
    rhs = 2 * sp.norm(u) ** 2 + 2 * sp.norm(v) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


traj_values = st.integers(1, 12).flatmap(
    lambda N: arrays(float, (N + 1, 2), elements=st.floats(-100, 100)))


@given(traj_values, st.floats(0, 10), st.floats(0, 10))
def test_bochner_monotone_in_weight(vals, r1, r2):
    tr = Trajectory(DiscreteSpace.euclidean(2), TimeGrid(1.5, len(vals) - 1), vals)
    lo, hi = sorted((r1, r2))
    assert bochner_norm(tr, lo) >= bochner_norm(tr, hi) * (1 - 1e-15)


@given(traj_values, st.floats(-50, 50).filter(lambda a: a == 0 or abs(a) > 1e-100), st.floats(0, 5))
def test_bochner_homogeneous(vals, alpha, weight):
    tr = Trajectory(DiscreteSpace.euclidean(2), TimeGrid(1.0, len(vals) - 1), vals)
    assert bochner_norm(tr.scaled(alpha), weight) == pytest.approx(abs(alpha) * bochner_norm(tr, weight), rel=1e-12, abs=1e-300)


@given(gram_and_pair(), st.floats(0.1, 10), st.integers(1, 64))
def test_constant_trajectory_norm(data, T, N):
    sp, u, _ = data
    tr = Trajectory.constant(sp, TimeGrid(T, N), u)
    assert bochner_norm(tr) == pytest.approx(math.sqrt(T) * sp.norm(u), rel=1e-12, abs=1e-300)


def test_product_norm():
    sp = DiscreteSpace.euclidean(1)
    g = TimeGrid(1.0, 4)
    a = Trajectory.constant(sp, g, 3.0)
    b = Trajectory.constant(sp, g, 4.0)
    assert product_bochner_norm([a, b]) == pytest.approx(5.0)


@settings(max_examples=30)
@given(arrays(float, (6, 3), elements=st.floats(-1e300, 1e300)))
def test_csv_round_trip_exact(vals):
    sp = DiscreteSpace.euclidean(3)
    tr = Trajectory(sp, TimeGrid(0.7, 5), vals)
    back = Trajectory.from_csv(tr.to_csv(), sp)
    assert np.array_equal(back.values, tr.values)
    assert np.array_equal(back.grid.nodes, tr.grid.nodes)


def test_csv_file(tmp_path):
    tr = Trajectory.from_function(DiscreteSpace.euclidean(2), TimeGrid(1.0, 8), lambda t: [t, t * t])
    path = tmp_path / "w.csv"
    tr.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,c0,c1"
    assert np.array_equal(Trajectory.from_csv(path).values, tr.values)


def test_values_immutable():
    tr = Trajectory.zeros(DiscreteSpace.euclidean(1), TimeGrid(1.0, 2))
    with pytest.raises(ValueError):
        tr.values[0, 0] = 1.0
