"""Bundled test problems for the coupled system.

``coupled_benchmark`` builds a randomized problem with every ingredient
active (nonmonotone selections, a state-dependent friction-like convex
term and four history operators).  Its constants ledger is computed from
the random matrices, so the declared constants are valid bounds by
construction.
"""

from __future__ import annotations

import math

import numpy as np

from .operators import (
    AccumulateThenMap, ClarkePotentialG, ClarkePotentialJ, ConvexPotentialPhi, IntegralOfMap, OperatorFamilyA,
    OperatorFamilyB, VolterraKernel, ZeroHistory, soft_threshold, zero_potential_G, zero_potential_J,
    zero_potential_phi,
)
from .spaces import DiscreteSpace, operator_norm
from .system import SystemProblem


def random_spd(rng: np.random.Generator, n: int, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * rng.uniform(lo, hi, n)) @ q.T


def sawtooth(x, beta: float):
    """Odd piecewise-linear map: slope 1 on [-1, 1], slope ``-beta`` outside."""
    ax = np.abs(x)
    return np.where(ax <= 1.0, x, np.sign(x) * (1.0 - beta * (ax - 1.0)))


def _scaled(rng, shape, target, src, dst):
    P = rng.standard_normal(shape)
    return P * (target / operator_norm(P, src, dst))


def coupled_benchmark(seed: int = 0, dim_v: int = 2, dim_e: int = 2, margin: float = 0.5, T: float = 1.0,
                      coupling: float = 0.3, m_J: float = 0.4, m_g: float = 0.3, linear: bool = False,
                      zero_data: bool = False) -> SystemProblem:
    """Randomized coupled problem with ``m_A - m_J = m_B - m_g = margin``.

    ``coupling`` scales every cross term and history constant.  With
    ``linear=True`` all nonlinear maps are replaced by linear ones and the
    convex term is switched off; with ``zero_data=True`` loads, initial
    values and history offsets vanish.
    """
    rng = np.random.default_rng(seed)
    V = DiscreteSpace(random_spd(rng, dim_v), random_spd(rng, dim_v, 0.5, 1.5), "V")
    E = DiscreteSpace(random_spd(rng, dim_e), random_spd(rng, dim_e, 0.5, 1.5), "E")
    X = E.pivot("X")
    Y = DiscreteSpace.euclidean(dim_v, "Y")
    Z = DiscreteSpace.euclidean(dim_v, "Z")
    Q = DiscreteSpace.euclidean(dim_v, "Q")
    Vd, Ed = V.dual(), E.dual()
    P_eu = DiscreteSpace.euclidean(dim_v)
    P_eu_e = DiscreteSpace.euclidean(dim_e)

    # --- A: a G_V v + skew v + nonlinear monotone + coupling to theta
    a = m_J + margin
    Kskew = rng.standard_normal((dim_v, dim_v))
    Kskew = 0.5 * (Kskew - Kskew.T)
    Pnl = _scaled(rng, (dim_v, dim_v), 1.0, V, P_eu)
    C_A = _scaled(rng, (dim_v, dim_e), coupling, X, Vd)
    GV = V.gram_strong
    nl = 0.0 if linear else 0.5
    fa = lambda t, th, v: a * (GV @ v) + Kskew @ v + nl * (Pnl.T @ np.tanh(Pnl @ v)) + C_A @ th
    opA = OperatorFamilyA(fa, m_A=a, mbar_A=coupling, a0=0.0, a1=coupling,
                          a2=a + operator_norm(Kskew, V, Vd) + nl)

    # --- J: D^T sigma(D v + C_th theta + C_z z)
    beta = 0.5
    D = _scaled(rng, (dim_v, dim_v), math.sqrt(m_J / beta), V, P_eu)
    C_th = _scaled(rng, (dim_v, dim_e), coupling, X, P_eu)
    C_z = _scaled(rng, (dim_v, dim_v), coupling, Z, P_eu)
    nD = math.sqrt(m_J / beta)
    if linear:
        sig, Lsig = (lambda x: -beta * x), beta
    else:
        sig, Lsig = (lambda x: sawtooth(x, beta)), max(1.0, beta)
    fj = lambda t, th, z, v: D.T @ sig(D @ v + C_th @ th + C_z @ z)
    potJ = ClarkePotentialJ(fj, m_J=m_J, mbar_J=Lsig * nD * coupling, c0J=0.0,
                            c1J=(1 + beta) * nD * coupling, c2J=(1 + beta) * nD * coupling,
                            c3J=(1 + beta) * nD ** 2)

    # --- phi: sum_i c_i(theta, y) |v_i|
    if linear:
        potPhi = zero_potential_phi()
    else:
        c_phi = 0.2
        P_th = _scaled(rng, (dim_v, dim_e), 1.0, X, P_eu)
        P_y = _scaled(rng, (dim_v, dim_v), 1.0, Y, P_eu)
        wts = lambda th, y: c_phi * (1.0 + 0.5 * np.tanh(P_th @ th + P_y @ y))
        inv_sqrt_lmin = 1.0 / math.sqrt(float(np.linalg.eigvalsh(GV)[0]))
        potPhi = ConvexPotentialPhi(
            prox=lambda t, th, y, rho, x: soft_threshold(x, rho * wts(th, y)),
            m_phi=0.5 * c_phi * inv_sqrt_lmin,
            c0phi=1.5 * c_phi * math.sqrt(dim_v) * inv_sqrt_lmin,
            value=lambda t, th, y, v: float(wts(th, y) @ np.abs(v)),
            subgrad=lambda t, th, y, v: wts(th, y) * np.sign(v),
        )

    # --- B: b G_E theta + skew + nonlinear + couplings to w and wbar
    b = m_g + margin
    Kb = rng.standard_normal((dim_e, dim_e))
    Kb = 0.5 * (Kb - Kb.T)
    Pb = _scaled(rng, (dim_e, dim_e), 1.0, E, P_eu_e)
    C_Bw = _scaled(rng, (dim_e, dim_v), coupling, V, Ed)
    C_Bq = _scaled(rng, (dim_e, dim_v), coupling, Q, Ed)
    GE = E.gram_strong
    fb = lambda t, w, wb, th: b * (GE @ th) + Kb @ th + nl * (Pb.T @ np.tanh(Pb @ th)) + C_Bw @ w + C_Bq @ wb
    opB = OperatorFamilyB(fb, m_B=b, mbar_B=coupling, b0=0.0, b1=coupling, b2=coupling,
                          b3=b + operator_norm(Kb, E, Ed) + nl)

    # --- g: H^T sigma(H theta + C_gw w)
    Hm = _scaled(rng, (dim_e, dim_e), math.sqrt(m_g / beta), E, P_eu_e)
    nH = math.sqrt(m_g / beta)
    C_gw = _scaled(rng, (dim_e, dim_v), coupling, V, P_eu_e)
    fg = lambda t, w, th: Hm.T @ sig(Hm @ th + C_gw @ w)
    potG = ClarkePotentialG(fg, m_g=m_g, mbar_g=Lsig * nH * coupling, c0g=0.0,
                            c1g=(1 + beta) * nH * coupling, c2g=(1 + beta) * nH ** 2)

    # --- history operators
    P1 = _scaled(rng, (dim_v, dim_v), coupling, V, Vd)
    histR1 = VolterraKernel(Vd, coupling, kernel=lambda t, s: math.exp(-(t - s)) * P1,
                            stationary=True)
    QR = _scaled(rng, (dim_v, dim_v), coupling, V, Y)
    QS = _scaled(rng, (dim_v, dim_v), coupling, V, Z)
    Q2 = _scaled(rng, (dim_v, dim_v), coupling, V, Q)
    off_r = np.zeros(dim_v) if zero_data else 0.5 * rng.standard_normal(dim_v)
    off_s = np.zeros(dim_v) if zero_data else 0.5 * rng.standard_normal(dim_v)
    if linear:
        histR = AccumulateThenMap(Y, coupling, post=lambda x: QR @ x, offset=off_r)
        histR2 = IntegralOfMap(Q, coupling, map=lambda v: Q2 @ v)
    else:
        histR = AccumulateThenMap(Y, coupling, post=lambda x: np.tanh(QR @ x), offset=off_r)
        histR2 = IntegralOfMap(Q, coupling, map=lambda v: np.sin(Q2 @ v))
    histS = AccumulateThenMap(Z, coupling, post=lambda x: QS @ x, offset=off_s)

    if zero_data:
        w0, th0, h1, h2 = np.zeros(dim_v), np.zeros(dim_e), None, None
    else:
        w0, th0 = rng.standard_normal(dim_v), rng.standard_normal(dim_e)
        c1, s1 = rng.standard_normal(dim_v), rng.standard_normal(dim_v)
        c2 = rng.standard_normal(dim_e)
        h1 = lambda t: c1 * math.sin(2 * math.pi * t) + s1
        h2 = lambda t: c2 * math.cos(math.pi * t)

    return SystemProblem(V, E, Y, Z, Q, opA, potJ, potPhi, opB, potG, histR, histR1, histR2, histS,
                         w0, th0, h1, h2)


def linear_decay_problem() -> SystemProblem:
    """Scalar ``w' + w = 0``, ``theta' + theta = 0`` with unit initial values."""
    R = DiscreteSpace.euclidean(1)
    return SystemProblem(
        R, R, R, R, R,
        OperatorFamilyA(lambda t, th, v: v, m_A=1.0, a2=1.0), zero_potential_J(), zero_potential_phi(),
        OperatorFamilyB(lambda t, w, wb, th: th, m_B=1.0, b3=1.0), zero_potential_G(),
        ZeroHistory(R), ZeroHistory(R.dual()), ZeroHistory(R), ZeroHistory(R),
        np.ones(1), np.ones(1))


def manufactured_problem(kappa: float = 0.5, couple: float = 0.3):
    """Linear coupled problem with a known smooth solution.

    Exact fields are ``w(t) = (cos(pi t), sin(t))`` and
    ``theta(t) = exp(-t) (1, 1 + t)``; the loads are chosen accordingly,
    including the memory term ``kappa * int_0^t w``.  Returns
    ``(problem, w_exact, theta_exact)``.
    """
    R2 = DiscreteSpace.euclidean(2)
    Cw = couple * np.array([[1.0, 0.5], [-0.5, 1.0]])
    Ct = couple * np.array([[0.5, -1.0], [1.0, 0.5]])

    def w_ex(t):
        return np.array([math.cos(math.pi * t), math.sin(t)])

    def dw_ex(t):
        return np.array([-math.pi * math.sin(math.pi * t), math.cos(t)])

    def int_w(t):
        return np.array([math.sin(math.pi * t) / math.pi, 1.0 - math.cos(t)])

    def th_ex(t):
        return math.exp(-t) * np.array([1.0, 1.0 + t])

    def dth_ex(t):
        return math.exp(-t) * np.array([-1.0, -t])

    h1 = lambda t: dw_ex(t) + 2.0 * w_ex(t) + Ct @ th_ex(t) + kappa * int_w(t)
    h2 = lambda t: dth_ex(t) + 2.0 * th_ex(t) + Cw @ w_ex(t)
    prob = SystemProblem(
        R2, R2, R2, R2, R2,
        OperatorFamilyA(lambda t, th, v: 2.0 * v + Ct @ th, m_A=2.0, mbar_A=float(np.linalg.norm(Ct, 2))),
        zero_potential_J(), zero_potential_phi(),
        OperatorFamilyB(lambda t, w, wb, th: 2.0 * th + Cw @ w, m_B=2.0, mbar_B=float(np.linalg.norm(Cw, 2))),
        zero_potential_G(),
        ZeroHistory(R2), VolterraKernel(R2.dual(), kappa, kernel=lambda t, s: kappa, stationary=True), ZeroHistory(R2),
        ZeroHistory(R2),
        w_ex(0.0), th_ex(0.0), h1, h2)
    return prob, w_ex, th_ex
