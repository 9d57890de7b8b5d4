"""Constitutive and contact laws with their declared constants.

All functions are vectorised over elements (volume laws) or contact nodes
(boundary laws).  Strains and stresses are ``(..., 2, 2)`` arrays and the
inner product on them is the Frobenius one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ConfigurationError

I2 = np.eye(2)


def isotropic_tensor(mu: float, lam: float) -> np.ndarray:
    """``C eps = 2 mu eps + lam tr(eps) I`` as a 4th-order array."""
    d = np.eye(2)
    return (mu * (np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,jk->ijkl", d, d))
            + lam * np.einsum("ij,kl->ijkl", d, d))


def tensor_norm(C: np.ndarray) -> float:
    """Operator norm of a 4th-order array acting on 2x2 matrices (Frobenius)."""
    return float(np.linalg.norm(np.asarray(C).reshape(4, 4), 2))


def _sample_points(rng, n=16):
    theta = 3.0 * rng.standard_normal(n)
    eps = rng.standard_normal((n, 2, 2))
    return theta, 0.5 * (eps + np.swapaxes(eps, -1, -2))


@dataclass(frozen=True)
class MaterialLaw:
    """Volume laws: viscosity, elasticity, relaxation, thermal stress, conduction, heat source.

    Declared constants (all with respect to the Frobenius/Euclidean norms):

    * ``visc(t, theta, eps)``: strongly monotone in ``eps`` with ``m_visc``,
      Lipschitz in ``theta`` with ``L_visc``, ``|visc| <= a0 + a1|theta| + a2|eps|``.
    * ``elast(t, eps)``: Lipschitz with ``L_elast``, ``|elast| <= b0 + b1|eps|``.
    * ``relax(t)``: 4th-order array with ``sup_t |relax(t)| <= relax_bound``.
    * ``thermal(t, theta)``: Lipschitz with ``L_thermal``, ``|.| <= c0e + c1e|theta|``.
    * ``conduct(t, g)``: strongly monotone with ``m_cond``, ``|.| <= k0 + k1|g|``.
    * ``source(t, v)``: Lipschitz in the velocity with ``L_source``, ``|source(t, 0)| <= n0``.
    """

    visc: Callable
    m_visc: float
    L_visc: float
    a2: float
    elast: Callable
    L_elast: float
    relax: Callable
    relax_bound: float
    thermal: Callable
    L_thermal: float
    conduct: Callable
    m_cond: float
    k1: float
    source: Callable
    L_source: float
    a0: float = 0.0
    a1: float = 0.0
    b0: float = 0.0
    c0e: float = 0.0
    c1e: float = 0.0
    k0: float = 0.0
    n0: float = 0.0

    def __post_init__(self):
        for name in ("m_visc", "m_cond"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive", f"material.{name}")
        for name in ("L_visc", "a2", "L_elast", "relax_bound", "L_thermal", "k1", "L_source"):
            if not getattr(self, name) >= 0:
                raise ConfigurationError(f"{name} must be nonnegative", f"material.{name}")
        rng = np.random.default_rng(0)
        theta, _ = _sample_points(rng)
        zero = np.zeros((len(theta), 2, 2))
        if np.abs(self.visc(0.0, theta, zero)).max() > 0:
            raise ConfigurationError("viscosity must vanish at zero strain", "material.visc")
        for t in np.linspace(0.0, 4.0, 9):
            C = np.asarray(self.relax(t), dtype=float)
            if C.shape != (2, 2, 2, 2):
                raise ConfigurationError(f"relaxation tensor has shape {C.shape}", "material.relax")
            if not (np.allclose(C, C.transpose(1, 0, 2, 3)) and np.allclose(C, C.transpose(2, 3, 0, 1))):
                raise ConfigurationError("relaxation tensor lacks the minor/major symmetries", "material.relax")
            if tensor_norm(C) > self.relax_bound * (1 + 1e-12):
                raise ConfigurationError(f"relaxation tensor exceeds its declared bound at t={t:g}",
                                         "material.relax_bound")


@dataclass(frozen=True)
class ContactLaw:
    """Boundary laws on the contact part.

    * ``jnu_sel(r)``: selection of the Clarke gradient of the normal
      potential, ``|jnu_sel| <= c0_bar``; relaxed monotone with ``beta_bar``.
    * ``damper(t, rtheta, z)`` takes values in ``[k1, k2]``, Lipschitz
      ``L_k`` in ``|d rtheta| + |d z|``.
    * ``friction(t, rtheta, y) >= 0``, Lipschitz ``L_Fb``, bounded by ``Fb_max``.
    * ``heat_sel(t, r)``: selection of the Clarke gradient of ``j``;
      ``|heat_sel| <= c0 + c1|r|``, relaxed monotone with ``m0``.
    * ``h_tau(r) >= 0`` for ``r >= 0``, Lipschitz ``L_tau``.
    * ``reg_centre``: weight kept on the node by the boundary smoothing.
    """

    jnu_sel: Callable
    c0_bar: float
    beta_bar: float
    damper: Callable
    k1: float
    k2: float
    L_k: float
    friction: Callable
    L_Fb: float
    Fb_max: float
    heat_sel: Callable
    m0: float
    c0: float
    c1: float
    h_tau: Callable
    L_tau: float
    reg_centre: float = 0.5
    jnu_value: Callable | None = None

    def __post_init__(self):
        if not 0 < self.k1 <= self.k2:
            raise ConfigurationError(f"need 0 < k1 <= k2, got {self.k1}, {self.k2}", "contact.damper")
        for name in ("c0_bar", "beta_bar", "L_k", "L_Fb", "Fb_max", "m0", "c0", "c1", "L_tau"):
            if not getattr(self, name) >= 0:
                raise ConfigurationError(f"{name} must be nonnegative", f"contact.{name}")
        if not 0 <= self.reg_centre <= 1:
            raise ConfigurationError("reg_centre must lie in [0, 1]", "contact.reg_centre")
        rng = np.random.default_rng(1)
        r, z = 5.0 * rng.standard_normal((2, 256))
        for t in (0.0, 0.5, 1.0):
            k = np.asarray(self.damper(t, r, z))
            if k.min() < self.k1 - 1e-14 or k.max() > self.k2 + 1e-14:
                raise ConfigurationError("damper leaves [k1, k2] on sampled points", "contact.damper")
            if np.asarray(self.friction(t, r, np.abs(z))).min() < 0:
                raise ConfigurationError("friction bound must be nonnegative", "contact.friction")
        if np.abs(self.jnu_sel(r)).max() > self.c0_bar * (1 + 1e-14):
            raise ConfigurationError("normal selection exceeds c0_bar on sampled points", "contact.jnu_sel")
        if np.asarray(self.h_tau(np.abs(r))).min() < 0:
            raise ConfigurationError("h_tau must be nonnegative on [0, inf)", "contact.h_tau")


# --------------------------------------------------------------------------
# a concrete law set


def default_material(eta: float = 0.5, lam_visc: float = 0.25, alpha: float = 0.2, mu_e: float = 0.5,
                     lam_e: float = 0.5, relax_mu: float = 0.1, relax_lam: float = 0.05, relax_time: float = 0.5,
                     expansion: float = 0.2, kappa: float = 1.0, kappa_nl: float = 0.2, heating: float = 0.1
                     ) -> MaterialLaw:
    """Isotropic laws with a temperature-softened viscous part.

    ``visc = 2 eta eps + lam_visc tr(eps) I + alpha s(theta) eps/max(1,|eps|)`` with
    ``s = (1 + tanh)/2``; the last term is monotone in ``eps`` and bounded,
    so it keeps ``m_visc = 2 eta`` and contributes ``alpha/2`` to ``L_visc``.
    """

    def visc(t, theta, eps):
        nrm = np.linalg.norm(eps, axis=(-2, -1))
        sat = eps / np.maximum(1.0, nrm)[..., None, None]
        tr = np.trace(eps, axis1=-2, axis2=-1)
        s = 0.5 * (1.0 + np.tanh(theta))
        return 2 * eta * eps + lam_visc * tr[..., None, None] * I2 + alpha * s[..., None, None] * sat

    def elast(t, eps):
        tr = np.trace(eps, axis1=-2, axis2=-1)
        return 2 * mu_e * eps + lam_e * tr[..., None, None] * I2

    C = isotropic_tensor(relax_mu, relax_lam)

    def relax(t):
        return math.exp(-t / relax_time) * C

    def thermal(t, theta):
        return -expansion * np.asarray(theta)[..., None, None] * I2

    def conduct(t, g):
        r = np.sqrt(1.0 + np.sum(g * g, axis=-1))
        return kappa * g + kappa_nl * g / r[..., None]

    def source(t, v):
        return heating * (np.sqrt(1.0 + np.sum(v * v, axis=-1)) - 1.0)

    lip_visc = 2 * eta + 2 * lam_visc + alpha
    return MaterialLaw(visc=visc, m_visc=2 * eta, L_visc=0.5 * alpha, a2=lip_visc,
                       elast=elast, L_elast=2 * mu_e + 2 * lam_e, b0=0.0,
                       relax=relax, relax_bound=tensor_norm(C),
                       thermal=thermal, L_thermal=math.sqrt(2) * expansion, c1e=math.sqrt(2) * expansion,
                       conduct=conduct, m_cond=kappa, k1=kappa + kappa_nl,
                       source=source, L_source=heating)


def ramp_selection(r, c0_bar: float, delta: float, beta_bar: float):
    """Odd, bounded, nonmonotone: rises to ``c0_bar`` on ``[0, delta]``, then decays with slope ``-beta_bar`` to ``c0_bar/2``."""
    a = np.abs(r)
    if beta_bar > 0:
        decay = np.maximum(c0_bar - beta_bar * (a - delta), 0.5 * c0_bar)
    else:
        decay = np.full_like(a, c0_bar, dtype=float)
    return np.sign(r) * np.where(a <= delta, c0_bar * a / delta, decay)


def default_contact(c0_bar: float = 0.5, delta: float = 0.2, beta_bar: float = 0.1, k1: float = 0.5,
                    k2: float = 1.0, damper_slope: float = 0.5, mu_f: float = 0.2, friction_slope: float = 0.5,
                    m0: float = 0.2, heat_gain: float = 1.0, L_tau: float = 0.05) -> ContactLaw:
    """Nonmonotone normal damping, temperature dependent friction and a nonmonotone heat exchange."""

    def damper(t, rtheta, z):
        return k1 + (k2 - k1) * 0.5 * (1.0 + np.tanh(damper_slope * (rtheta + z)))

    def friction(t, rtheta, y):
        return mu_f * (1.0 + 0.5 * np.tanh(friction_slope * rtheta)) * (1.0 + 0.5 * np.tanh(friction_slope * y))

    def heat_sel(t, r):
        # slope heat_gain near zero, slope -m0 beyond |r| = 1
        a = np.abs(r)
        return np.where(a <= 1.0, heat_gain * r, np.sign(r) * (heat_gain - m0 * (a - 1.0)))

    def h_tau(r):
        return L_tau * r / (1.0 + r)

    # d/dx of 1.5*tanh(s x) * 1.5 bounds the product rule terms
    L_Fb = mu_f * 1.5 * 0.5 * friction_slope
    return ContactLaw(jnu_sel=lambda r: ramp_selection(r, c0_bar, delta, beta_bar), c0_bar=c0_bar, beta_bar=beta_bar,
                      damper=damper, k1=k1, k2=k2, L_k=0.5 * (k2 - k1) * damper_slope,
                      friction=friction, L_Fb=L_Fb, Fb_max=2.25 * mu_f,
                      heat_sel=heat_sel, m0=m0, c0=0.0, c1=heat_gain, h_tau=h_tau, L_tau=L_tau)
