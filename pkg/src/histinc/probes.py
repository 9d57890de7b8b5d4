"""Empirical probes of the structural constants and the smallness gates.

Every probe draws random points with a seeded generator, evaluates the
relevant quotient, and compares the extreme value with the declared
constant.  Constants reported here are empirical: sampling can only ever
show that a declaration is wrong, never that it is right.

All operator callables follow one convention: ``fn(t, *params, x)`` with
the variable in which monotonicity is measured last (``A(t, theta, v)``,
``B(t, w, wbar, theta)``, ``dJ(t, theta, z, v)``, ``dg(t, w, theta)``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigurationError, ProbeError
from .operators import (
    ClarkePotentialG, ClarkePotentialJ, ConvexPotentialPhi, HistoryOperator, OperatorFamilyA, OperatorFamilyB,
    growth_bound, history_apply,
)
from .spaces import DiscreteSpace, TimeGrid, Trajectory

PROBE_TOL = 1e-10
MARGIN_WARN = 1e-6


@dataclass(frozen=True)
class ProbeSampler:
    """Random probe points.

    ``space`` is the space of the monotone variable, ``params`` those of the
    remaining arguments in call order.  Directions are standard normal,
    normalised to unit strong norm, then scaled by a log-uniform radius in
    ``radius`` so that one-dimensional samples are not confined to +-1.
    """

    space: DiscreteSpace
    params: tuple = ()
    seed: int = 0
    t_range: tuple = (0.0, 1.0)
    radius: tuple = (0.1, 10.0)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def vector(self, rng: np.random.Generator, space: DiscreteSpace) -> np.ndarray:
        d = rng.standard_normal(space.dim)
        n = space.norm(d)
        while n == 0.0:
            d = rng.standard_normal(space.dim)
            n = space.norm(d)
        lo, hi = self.radius
        r = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        return d * (r / n)

    def time(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(*self.t_range))


@dataclass
class ProbeReport:
    target: str
    samples: int
    estimated_constant: float
    declared_constant: float
    worst_pair: tuple | None
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, np.ndarray):
                return x.tolist()
            if isinstance(x, (tuple, list)):
                return [clean(y) for y in x]
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            return x

        return {
            "target": self.target,
            "samples": self.samples,
            "estimated_constant": float(self.estimated_constant),
            "declared_constant": float(self.declared_constant),
            "empirical": True,
            "worst_pair": clean(self.worst_pair),
            "pass": bool(self.passed),
            "extra": clean(self.extra),
        }


# --------------------------------------------------------------------------
# monotonicity probes


def _jacobian(f: Callable, x: np.ndarray, h: float) -> np.ndarray:
    n = x.size
    J = np.empty((f(x).size, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (f(x + e) - f(x - e)) / (2 * h)
    return J


def _refine_min_ratio(f: Callable, space: DiscreteSpace, x: np.ndarray) -> tuple[float, np.ndarray, np.ndarray] | None:
    """Most antimonotone direction of the linearisation of ``f`` at ``x``,
    then the true quotient along it."""
    import scipy.linalg as sla

    scale = max(1.0, float(np.linalg.norm(x)))
    try:
        J = _jacobian(f, x, 1e-6 * scale)
    except Exception:  # selection undefined near x
        return None
    if J.shape[0] != J.shape[1] or not np.all(np.isfinite(J)):
        return None
    sym = 0.5 * (J + J.T)
    _, vecs = sla.eigh(sym, space.gram_strong)
    e = vecs[:, 0]
    s = 1e-3 * scale / max(space.norm(e), 1e-300)
    x1, x2 = x + s * e, x - s * e
    dx = x1 - x2
    q = float((f(x1) - f(x2)) @ dx) / space.norm(dx) ** 2
    return q, x1, x2


def _monotone_probe(fn, sampler: ProbeSampler, n_samples: int, target: str, lower_m: float,
                    declared_mbar: float, sign: float) -> ProbeReport:
    """Shared driver.  ``sign=+1`` estimates an inf (strong monotonicity),
    ``sign=-1`` a relaxation constant ``-inf``."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = sampler.rng()
    sp = sampler.space
    best_q, worst = np.inf, None
    n_ok = 0
    for _ in range(n_samples):
        t = sampler.time(rng)
        p = [sampler.vector(rng, s) for s in sampler.params]
        x1, x2 = sampler.vector(rng, sp), sampler.vector(rng, sp)
        dx = x1 - x2
        nd = sp.norm(dx)
        if nd == 0.0:
            continue
        n_ok += 1
        q = float((np.asarray(fn(t, *p, x1)) - np.asarray(fn(t, *p, x2))) @ dx) / nd ** 2
        if q < best_q:
            best_q, worst = q, (t, p, x1, x2)
    if n_ok == 0:
        raise ProbeError(f"{target}: every sampled pair was degenerate")
    t, p, x1, x2 = worst
    ref = _refine_min_ratio(lambda x: np.asarray(fn(t, *p, x), dtype=float), sp, 0.5 * (x1 + x2))
    if ref is not None and ref[0] < best_q:
        best_q, worst = ref[0], (t, p, ref[1], ref[2])

    # full mixed inequality with all arguments varying
    mbar_est = 0.0
    mixed_worst = None
    if sampler.params:
        for _ in range(n_samples):
            t = sampler.time(rng)
            p1 = [sampler.vector(rng, s) for s in sampler.params]
            p2 = [sampler.vector(rng, s) for s in sampler.params]
            x1, x2 = sampler.vector(rng, sp), sampler.vector(rng, sp)
            dx = x1 - x2
            nd = sp.norm(dx)
            dp = sum(s.norm(a - b) for s, a, b in zip(sampler.params, p1, p2))
            if nd == 0.0 or dp == 0.0:
                continue
            lhs = float((np.asarray(fn(t, *p1, x1)) - np.asarray(fn(t, *p2, x2))) @ dx)
            need = (lower_m * nd ** 2 - lhs) / (dp * nd)
            if need > mbar_est:
                mbar_est, mixed_worst = need, (t, p1, p2, x1, x2)

    estimated = sign * best_q
    declared = sign * lower_m
    if sign > 0:
        ok_m = estimated >= declared - PROBE_TOL
    else:
        ok_m = estimated <= declared + PROBE_TOL
    ok_mbar = mbar_est <= declared_mbar + PROBE_TOL * max(1.0, declared_mbar)
    return ProbeReport(target, n_samples, estimated, declared, worst, bool(ok_m and ok_mbar),
                       {"mbar_estimated": mbar_est, "mbar_declared": declared_mbar, "mixed_worst": mixed_worst})


def probe_mixed_monotonicity(family: OperatorFamilyA | OperatorFamilyB, sampler: ProbeSampler,
                             n_samples: int = 256) -> ProbeReport:
    """Estimate the strong monotonicity constant of ``A`` (or ``B``) and check
    the two-term mixed inequality with the declared ``(m, mbar)``."""
    if isinstance(family, OperatorFamilyA):
        return _monotone_probe(family, sampler, n_samples, "A", family.m_A, family.mbar_A, +1.0)
    if isinstance(family, OperatorFamilyB):
        return _monotone_probe(family, sampler, n_samples, "B", family.m_B, family.mbar_B, +1.0)
    raise TypeError(f"expected OperatorFamilyA or OperatorFamilyB, got {type(family).__name__}")


def probe_relaxed_monotonicity(pot: ClarkePotentialJ | ClarkePotentialG, sampler: ProbeSampler,
                               n_samples: int = 256) -> ProbeReport:
    """Estimate the relaxation constant ``m = -inf <ds, dv>/|dv|^2`` of a selection."""
    if isinstance(pot, ClarkePotentialJ):
        return _monotone_probe(pot, sampler, n_samples, "J", -pot.m_J, pot.mbar_J, -1.0)
    if isinstance(pot, ClarkePotentialG):
        return _monotone_probe(pot, sampler, n_samples, "g", -pot.m_g, pot.mbar_g, -1.0)
    raise TypeError(f"expected ClarkePotentialJ or ClarkePotentialG, got {type(pot).__name__}")


def probe_selection(selection: Callable, sampler: ProbeSampler, n_samples: int = 256,
                    declared: float = 0.0, target: str = "selection") -> ProbeReport:
    """Relaxation constant of a bare selection ``s(t, *params, x)``."""
    return _monotone_probe(selection, sampler, n_samples, target, -declared, 0.0, -1.0)


# --------------------------------------------------------------------------
# growth, prox and history probes


def probe_growth(family, sampler: ProbeSampler, n_samples: int = 256, target: str | None = None) -> ProbeReport:
    """Worst ratio of the dual norm of the output to the declared affine envelope."""
    rng = sampler.rng()
    worst_ratio, worst = 0.0, None
    for _ in range(n_samples):
        t = sampler.time(rng)
        p = [sampler.vector(rng, s) for s in sampler.params]
        x = sampler.vector(rng, sampler.space)
        out = sampler.space.norm_dual(np.asarray(family(t, *p, x)))
        bound = growth_bound(family, t, [s.norm(a) for s, a in zip(sampler.params, p)] + [sampler.space.norm(x)])
        if out == 0.0:
            continue
        r = out / bound if bound > 0 else np.inf
        if r > worst_ratio:
            worst_ratio, worst = r, (t, p, x)
    return ProbeReport(target or f"growth:{type(family).__name__}", n_samples, worst_ratio, 1.0, worst,
                       bool(worst_ratio <= 1.0 + PROBE_TOL))


def probe_prox_nonexpansive(phi: ConvexPotentialPhi, sampler: ProbeSampler, n_samples: int = 256,
                            rho: float = 1.0) -> ProbeReport:
    """``|prox(x1) - prox(x2)| <= |x1 - x2|`` in coefficients (params: theta, y)."""
    rng = sampler.rng()
    worst_ratio, worst = 0.0, None
    for _ in range(n_samples):
        t = sampler.time(rng)
        p = [sampler.vector(rng, s) for s in sampler.params]
        x1, x2 = sampler.vector(rng, sampler.space), sampler.vector(rng, sampler.space)
        d = np.linalg.norm(x1 - x2)
        if d == 0:
            continue
        r = np.linalg.norm(phi.resolvent(t, *p, rho, x1) - phi.resolvent(t, *p, rho, x2)) / d
        if r > worst_ratio:
            worst_ratio, worst = float(r), (t, p, x1, x2)
    return ProbeReport("prox", n_samples, worst_ratio, 1.0, worst, bool(worst_ratio <= 1.0 + PROBE_TOL))


def probe_four_point(phi: ConvexPotentialPhi, sampler: ProbeSampler, n_samples: int = 256) -> ProbeReport:
    """Sup of the four-point quotient of ``phi`` against its declared ``m_phi``."""
    if phi.value is None:
        raise ProbeError("four-point probe needs phi values")
    rng = sampler.rng()
    est, worst = 0.0, None
    for _ in range(n_samples):
        t = sampler.time(rng)
        th1, y1 = (sampler.vector(rng, s) for s in sampler.params)
        th2, y2 = (sampler.vector(rng, s) for s in sampler.params)
        v1, v2 = sampler.vector(rng, sampler.space), sampler.vector(rng, sampler.space)
        den = (sampler.params[0].norm(th1 - th2) + sampler.params[1].norm(y1 - y2)) * sampler.space.norm(v1 - v2)
        if den == 0:
            continue
        f = phi.value
        lhs = f(t, th1, y1, v2) - f(t, th1, y1, v1) + f(t, th2, y2, v1) - f(t, th2, y2, v2)
        if lhs / den > est:
            est, worst = float(lhs / den), (t, th1, th2, y1, y2, v1, v2)
    return ProbeReport("phi:four_point", n_samples, est, phi.m_phi, worst,
                       bool(est <= phi.m_phi + PROBE_TOL * max(1.0, phi.m_phi)))


def probe_history_lipschitz(op: HistoryOperator, sampler: ProbeSampler, n_samples: int = 64,
                            grid: TimeGrid | None = None) -> ProbeReport:
    """Sup over sampled pairs and nodes of ``|d out_k| / sum_{j<k} dt |d v_j|``."""
    grid = grid or TimeGrid(sampler.t_range[1] - sampler.t_range[0] or 1.0, 16)
    rng = sampler.rng()
    sp = sampler.space
    est, worst = 0.0, None
    for _ in range(n_samples):
        a = np.array([sampler.vector(rng, sp) for _ in range(grid.N + 1)])
        b = np.array([sampler.vector(rng, sp) for _ in range(grid.N + 1)])
        ta, tb = Trajectory(sp, grid, a), Trajectory(sp, grid, b)
        out = history_apply(op, ta).values - history_apply(op, tb).values
        lhs = op.target_space.norms(out)
        den = np.concatenate([[0.0], np.cumsum(grid.dt * sp.norms(a - b))[:-1]])
        mask = den > 0
        if not np.any(mask):
            continue
        r = lhs[mask] / den[mask]
        k = int(np.argmax(r))
        if r[k] > est:
            est, worst = float(r[k]), (a, b, int(np.flatnonzero(mask)[k]))
    c = op.lipschitz_const
    return ProbeReport(f"history:{type(op).__name__}", n_samples, est, c, worst,
                       bool(est <= c + PROBE_TOL * max(1.0, c)))


# --------------------------------------------------------------------------
# smallness gates


@dataclass(frozen=True)
class GateReport:
    condition: str
    passed: bool
    margins: tuple
    warnings: tuple = ()

    def __getitem__(self, key):
        # dict-style access mirrors the JSON layout
        return self.to_dict()[key]

    def to_dict(self) -> dict:
        return {"condition": self.condition, "pass": self.passed,
                "margins": [float(m) for m in self.margins], "warnings": list(self.warnings)}


_REQUIRED = {
    "system": ("m_A", "m_J", "m_B", "m_g"),
    "single": ("m_A", "m_psi"),
    "dvhi": ("m_Abar", "m_G", "norm_M", "m_Bbar", "L_os"),
    "contact": ("m_visc", "beta_bar", "k2", "trace_norm", "m_cond", "m0"),
}


def _infer_kind(ledger: Mapping) -> str:
    if "kind" in ledger:
        return str(ledger["kind"])
    if "m_psi" in ledger:
        return "single"
    if "m_Abar" in ledger or "L_os" in ledger:
        return "dvhi"
    if "m_visc" in ledger or "beta_bar" in ledger:
        return "contact"
    return "system"


def _as_mapping(ledger) -> Mapping:
    if isinstance(ledger, Mapping):
        return ledger
    if hasattr(ledger, "ledger"):
        return ledger.ledger
    raise ConfigurationError(f"cannot read a constants ledger from {type(ledger).__name__}")


def check_smallness(ledger) -> GateReport:
    """Evaluate the strict smallness condition matching the ledger's kind.

    ``system``: ``m_A > m_J`` and ``m_B > m_g``; ``single``: ``m_A > m_psi``;
    ``dvhi``: ``m_Abar > m_G |M|^2`` and ``m_Bbar > L_os``; ``contact``:
    ``m_visc > beta_bar k2 |gamma|^2`` and ``m_cond > m0 |gamma|^2``.
    """
    ledger = _as_mapping(ledger)
    kind = _infer_kind(ledger)
    if kind not in _REQUIRED:
        raise ConfigurationError(f"unknown ledger kind {kind!r}", "ledger.kind")
    missing = [k for k in _REQUIRED[kind] if ledger.get(k) is None]
    if missing:
        raise ConfigurationError(f"missing constants {missing}", "ledger")
    c = {k: float(ledger[k]) for k in _REQUIRED[kind]}
    bad = [k for k, v in c.items() if not np.isfinite(v)]
    if bad:
        raise ConfigurationError(f"non-finite constants {bad}", "ledger")
    if kind == "system":
        margins = (c["m_A"] - c["m_J"], c["m_B"] - c["m_g"])
        cond = "m_A > m_J, m_B > m_g"
    elif kind == "single":
        margins = (c["m_A"] - c["m_psi"],)
        cond = "m_A > m_psi"
    elif kind == "dvhi":
        margins = (c["m_Abar"] - c["m_G"] * c["norm_M"] ** 2, c["m_Bbar"] - c["L_os"])
        cond = "m_Abar > m_G |M|^2, m_Bbar > L_os"
    else:
        g2 = c["trace_norm"] ** 2
        # the temperature trace may be measured in its own norm
        gE = ledger.get("trace_norm_E")
        g2E = g2 if gE is None else float(gE) ** 2
        margins = (c["m_visc"] - c["beta_bar"] * c["k2"] * g2, c["m_cond"] - c["m0"] * g2E)
        cond = "m_visc > beta_bar k2 |gamma|^2, m_cond > m0 |gamma|^2"
    passed = all(m > 0 for m in margins)
    warnings = tuple(f"margin {i} = {m:.3e} is below {MARGIN_WARN:g}; contraction degrades like 1/margin"
                     for i, m in enumerate(margins) if 0 < m < MARGIN_WARN)
    return GateReport(cond, passed, margins, warnings)


def check_contact_smallness(ledger) -> GateReport:
    led = dict(_as_mapping(ledger))
    led["kind"] = "contact"
    return check_smallness(led)
