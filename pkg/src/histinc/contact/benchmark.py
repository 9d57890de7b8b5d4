"""A mirror-symmetric loading scenario on a block clamped at both sides."""

from __future__ import annotations

import math

import numpy as np

from .laws import default_contact, default_material
from .mesh import Mesh2D


def symmetric_benchmark(nx: int = 8, ny: int = 4, Lx: float = 2.0, Ly: float = 1.0, load: float = 1.0,
                        heat: float = 0.5, material: dict | None = None, contact: dict | None = None) -> dict:
    """Keyword arguments for :func:`solve_contact`.

    Downward body force with a horizontal part odd about ``x = Lx/2``,
    a pulsating traction on top, a uniform heat source and an initial
    temperature bump; every datum is mirror symmetric.
    """
    mid = 0.5 * Lx

    def f0(t, x):
        fx = 0.5 * load * np.sin(math.pi * (x[:, 0] - mid) / mid)
        fy = -load * (1.0 + 0.5 * math.cos(math.pi * t)) * np.ones(len(x))
        return np.column_stack([fx, fy])

    def fN(t, x):
        return np.column_stack([np.zeros(len(x)), -0.5 * load * math.sin(math.pi * t) * np.ones(len(x))])

    def h0(t, x):
        return heat * np.ones(len(x))

    def theta0(x):
        return np.sin(math.pi * x[:, 0] / Lx) * (1.0 - x[:, 1] / Ly)

    return {"mesh": Mesh2D.rectangle(Lx, Ly, nx, ny), "material": default_material(**(material or {})),
            "contact": default_contact(**(contact or {})), "loads": {"f0": f0, "fN": fN, "h0": h0},
            "initial": {"theta0": theta0}}
