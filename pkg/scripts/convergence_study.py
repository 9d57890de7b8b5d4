"""Observed temporal order on the manufactured problem (errors against the exact solution)."""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass, field

import numpy as np

from histinc.benchmark import manufactured_problem
from histinc.spaces import TimeGrid
from histinc.system import SystemConfig, solve_system


@dataclass
class StudyConfig:
    steps: list = field(default_factory=lambda: [32, 64, 128, 256, 512])
    kappa: float = 0.5
    couple: float = 0.3
    mode: str = "proof-faithful"


def run(cfg: StudyConfig) -> list[tuple]:
    p, w_ex, th_ex = manufactured_problem(cfg.kappa, cfg.couple)
    out = []
    for N in cfg.steps:
        g = TimeGrid(1.0, N)
        w, th, diag = solve_system(p, g, SystemConfig(mode=cfg.mode))
        ew = np.linalg.norm(w.values - np.array([w_ex(t) for t in g.nodes]), axis=1).max()
        et = np.linalg.norm(th.values - np.array([th_ex(t) for t in g.nodes]), axis=1).max()
        out.append((N, ew, et, diag.picard_iters))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mode", default="proof-faithful", choices=["proof-faithful", "staggered"])
    args = ap.parse_args()
    rows = run(StudyConfig(mode=args.mode))
    print(f"{'N':>5} {'err_w':>11} {'order':>6} {'err_theta':>11} {'order':>6} {'picard':>6}")
    prev = None
    for N, ew, et, its in rows:
        ow = math.log2(prev[0] / ew) if prev else math.nan
        ot = math.log2(prev[1] / et) if prev else math.nan
        print(f"{N:5d} {ew:11.3e} {ow:6.3f} {et:11.3e} {ot:6.3f} {its:6d}")
        prev = (ew, et)


if __name__ == "__main__":
    main()
