"""Command line front end: ``histinc <command> --config scenario.json``.

Exit status: 0 success, 2 smallness gate failure, 3 non-convergence,
4 configuration error, 1 anything unexpected.  Failures are printed as a
JSON object ``{"status": "error", "error": {...}}``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .contact.assemble import assemble_problem
from .contact.solve import gate_contact, solve_assembled
from .contact.vtk import write_vtk
from .dvhi import build_system, check_inequality_residual, solve_dvhi
from .errors import ConfigurationError, GateError, HistincError
from .probes import (ProbeSampler, check_smallness, probe_four_point, probe_history_lipschitz,
                     probe_mixed_monotonicity, probe_prox_nonexpansive, probe_relaxed_monotonicity)
from .scenario import ScenarioConfig, file_entry, load_config, parse_config, write_json, write_nodal_csv
from .spaces import TimeGrid, Trajectory
from .system import MODES, solve_system

COMMANDS = ("check", "solve", "dvhi", "contact", "convergence")
ENV_OUT = "HISTINC_OUT"
ENV_SEED = "HISTINC_SEED"
_LEDGER_KIND = {"abstract": "system", "dvhi": "dvhi", "contact": "contact"}


@dataclass
class RunReport:
    command: str
    digest: str
    status: str = "ok"
    gate: dict | None = None
    diagnostics: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)
    wall_clock: float = 0.0
    error: dict | None = None

    def to_dict(self) -> dict:
        return {"command": self.command, "digest": self.digest, "status": self.status, "gate": self.gate,
                "diagnostics": self.diagnostics, "manifest": self.manifest, "wall_clock": self.wall_clock,
                "error": self.error}


class _Outputs:
    """Collects emitted files; the manifest lists exactly these."""

    def __init__(self, directory):
        self.root = Path(directory)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        self.files.append(p)
        return p

    def manifest(self) -> list:
        return [file_entry(p, self.root) for p in self.files if p.exists()]


def _grid(cfg: ScenarioConfig, N: int | None = None) -> TimeGrid:
    return TimeGrid(cfg.T, N or cfg.N)


def _require_kind(cfg: ScenarioConfig, command: str, kinds):
    if cfg.kind not in kinds:
        raise ConfigurationError(f"command {command!r} needs a scenario of kind {' or '.join(kinds)}, "
                                 f"got {cfg.kind!r}", "kind")


# --------------------------------------------------------------------------
# check


def _probe_reports(p, seed: int, n_samples: int = 128) -> list:
    reps = [
        probe_mixed_monotonicity(p.opA, ProbeSampler(p.V, (p.X,), seed=seed), n_samples),
        probe_relaxed_monotonicity(p.potJ, ProbeSampler(p.V, (p.X, p.Z), seed=seed + 1), n_samples),
        probe_mixed_monotonicity(p.opB, ProbeSampler(p.E, (p.V, p.Q), seed=seed + 2), n_samples),
        probe_relaxed_monotonicity(p.potG, ProbeSampler(p.E, (p.V,), seed=seed + 3), n_samples),
    ]
    if p.potPhi.value is not None:
        s = ProbeSampler(p.V, (p.X, p.Y), seed=seed + 4)
        reps += [probe_four_point(p.potPhi, s, n_samples), probe_prox_nonexpansive(p.potPhi, s, n_samples)]
    grid = TimeGrid(1.0, 16)
    for i, name in enumerate(("histR", "histR1", "histR2", "histS")):
        rep = probe_history_lipschitz(getattr(p, name), ProbeSampler(p.V, seed=seed + 5 + i), 16, grid)
        rep.target = f"{name}:{rep.target}"
        reps.append(rep)
    return reps


def cmd_check(cfg: ScenarioConfig, out: _Outputs, report: RunReport, jobs: int = 1):
    system = None
    if cfg.builtin is None:
        ledger = {"kind": _LEDGER_KIND[cfg.kind], **cfg.ledger}
    elif cfg.kind == "abstract":
        system = cfg.build()
        ledger = system.ledger
    elif cfg.kind == "dvhi":
        dvhi = cfg.build()
        ledger = {"kind": "dvhi", **dvhi.constants}
    else:
        kw = cfg.build()
        system = assemble_problem(kw["mesh"], kw["material"], kw["contact"], kw["loads"], kw["initial"], T=cfg.T)
        ledger = system.contact_ledger
    gate = check_smallness(ledger)
    report.gate = gate.to_dict()
    entries = [{"target": "smallness", **gate.to_dict(), "ledger": _plain(ledger)}]
    if gate.passed:
        if cfg.kind == "dvhi" and cfg.builtin is not None:
            system = build_system(dvhi)
        if system is not None:
            entries += [r.to_dict() for r in _probe_reports(system, cfg.seed)]
    write_json(out.path("check.json"), entries)
    report.diagnostics = {"probes_passed": all(e["pass"] for e in entries[1:]), "n_reports": len(entries)}
    if not gate.passed:
        raise GateError(f"smallness condition violated: {gate.condition}; margins {gate.margins}", gate.margins)


def _plain(d: dict) -> dict:
    return {k: (v if isinstance(v, str) else float(v)) for k, v in d.items()}


# --------------------------------------------------------------------------
# solve / dvhi / contact


def _write_traj(out: _Outputs, name: str, traj: Trajectory):
    traj.to_csv(out.path(name))


def cmd_solve(cfg: ScenarioConfig, out: _Outputs, report: RunReport, jobs: int = 1):
    _require_kind(cfg, "solve", ("abstract",))
    problem = cfg.build()
    report.gate = check_smallness(problem.ledger).to_dict()
    w, theta, diag = solve_system(problem, _grid(cfg), cfg.solver)
    _write_traj(out, "w.csv", w)
    _write_traj(out, "theta.csv", theta)
    report.diagnostics = diag.to_dict()
    write_json(out.path("diagnostics.json"), report.diagnostics)


def cmd_dvhi(cfg: ScenarioConfig, out: _Outputs, report: RunReport, jobs: int = 1):
    _require_kind(cfg, "dvhi", ("dvhi",))
    dvhi = cfg.build()
    report.gate = check_smallness({"kind": "dvhi", **dvhi.constants}).to_dict()
    grid = _grid(cfg)
    u, theta, diag = solve_dvhi(dvhi, grid, cfg.solver)
    slack = check_inequality_residual(dvhi, u, theta, grid, n_test_dirs=cfg.extras.get("slack_directions", 64),
                                      seed=cfg.seed)
    _write_traj(out, "u.csv", u)
    _write_traj(out, "theta.csv", theta)
    write_json(out.path("ledger_mapping.json"), diag.extra["ledger_mapping"])
    write_json(out.path("slack.json"), slack.to_dict())
    report.diagnostics = {**diag.to_dict(), "slack": slack.to_dict()}
    write_json(out.path("diagnostics.json"), report.diagnostics)


def _nodal_stress(fem, sigma_k: np.ndarray) -> np.ndarray:
    """Area-weighted average of the element stresses around each node, ``(n_nodes, 3)``."""
    mesh = fem.mesh
    acc = np.zeros((mesh.n_nodes, 3))
    wts = np.zeros(mesh.n_nodes)
    comps = np.column_stack([sigma_k[:, 0, 0], sigma_k[:, 1, 1], sigma_k[:, 0, 1]])
    for e, tri in enumerate(mesh.triangles):
        for a in tri:
            acc[a] += fem.areas[e] * comps[e]
            wts[a] += fem.areas[e]
    return acc / wts[:, None]


def cmd_contact(cfg: ScenarioConfig, out: _Outputs, report: RunReport, jobs: int = 1):
    _require_kind(cfg, "contact", ("contact",))
    kw = cfg.build()
    grid = _grid(cfg)
    snaps = []
    for i, t in enumerate(cfg.extras.get("snapshots", [cfg.T])):
        try:
            snaps.append(grid.index(t))
        except ValueError as exc:
            raise ConfigurationError(str(exc), f"problem.snapshots[{i}]") from None
    problem = assemble_problem(kw["mesh"], kw["material"], kw["contact"], kw["loads"], kw["initial"], T=cfg.T)
    report.gate = check_smallness(problem.contact_ledger).to_dict()
    gate_contact(problem)
    sol = solve_assembled(problem, grid, cfg.solver)
    fem, mesh = problem.fem, problem.fem.mesh
    u = fem.velocity_field(sol.u.values)
    w = fem.velocity_field(sol.w.values)
    th = fem.temperature_field(sol.theta.values)
    for k in snaps:
        s = _nodal_stress(fem, sol.sigma[k])
        cols = {"u_x": u[k, :, 0], "u_y": u[k, :, 1], "w_x": w[k, :, 0], "w_y": w[k, :, 1], "theta": th[k],
                "sigma_xx": s[:, 0], "sigma_yy": s[:, 1], "sigma_xy": s[:, 2]}
        write_nodal_csv(out.path(f"fields_k{k:05d}.csv"), mesh.nodes, cols)
        if "vtk" in cfg.formats:
            write_vtk(out.path(f"fields_k{k:05d}.vtk"), mesh,
                      point_data={"u": u[k], "w": w[k], "theta": th[k]}, cell_data={"sigma": sol.sigma[k]})
    report.diagnostics = {**sol.diag.to_dict(), "constants": _plain(problem.constants),
                          "snapshot_nodes": snaps, "snapshot_times": [float(grid.nodes[k]) for k in snaps]}
    write_json(out.path("diagnostics.json"), report.diagnostics)


# --------------------------------------------------------------------------
# convergence


def _convergence_job(raw: dict, seed: int, directory: str, mode: str, N: int) -> dict:
    cfg = _apply_mode(parse_config(raw, seed=seed, out_dir=directory), mode)
    grid = _grid(cfg, N)
    if cfg.kind == "abstract":
        w, theta, diag = solve_system(cfg.build(), grid, cfg.solver)
    else:
        w, theta, diag = solve_dvhi(cfg.build(), grid, cfg.solver)
    root = Path(directory)
    w.to_csv(root / f"w_N{N}.csv")
    theta.to_csv(root / f"theta_N{N}.csv")
    return {"N": N, "picard_iters": diag.picard_iters}


def _max_diff_on_coarse(coarse: Trajectory, fine: Trajectory) -> float:
    stride = fine.grid.N // coarse.grid.N
    return float(np.abs(coarse.values - fine.values[::stride]).max())


def convergence_table(directory, Ns) -> list[dict]:
    """Observed orders recomputed from the emitted trajectory files alone.

    ``err`` is the max coefficient difference between the run at ``N`` and
    the run at ``2N`` on the coarse nodes; ``order = log2(err_N / err_2N)``.
    ``err_vs_finest`` compares against the finest run in the list.
    """
    root = Path(directory)
    runs = {N: {c: Trajectory.from_csv(root / f"{c}_N{N}.csv") for c in ("w", "theta")} for N in Ns}
    finest = runs[Ns[-1]]
    rows = []
    for i, N in enumerate(Ns):
        row = {"N": N, "dt": runs[N]["w"].grid.dt}
        for c in ("w", "theta"):
            row[f"{c}_err_vs_finest"] = _max_diff_on_coarse(runs[N][c], finest[c])
            row[f"{c}_err"] = _max_diff_on_coarse(runs[N][c], runs[Ns[i + 1]][c]) if i + 1 < len(Ns) else math.nan
        rows.append(row)
    for i, row in enumerate(rows):
        for c in ("w", "theta"):
            nxt = rows[i + 1][f"{c}_err"] if i + 1 < len(rows) else math.nan
            e = row[f"{c}_err"]
            row[f"{c}_order"] = math.log2(e / nxt) if e > 0 and nxt > 0 else math.nan
    return rows


def cmd_convergence(cfg: ScenarioConfig, out: _Outputs, report: RunReport, jobs: int = 1):
    _require_kind(cfg, "convergence", ("abstract", "dvhi"))
    Ns = cfg.convergence_N
    if not Ns:
        raise ConfigurationError("missing convergence block with a list of step counts", "convergence")
    args = (cfg.raw, cfg.seed, str(out.root), cfg.solver.mode)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_convergence_job, *zip(*[args] * len(Ns)), Ns))
    else:
        runs = [_convergence_job(*args, N) for N in Ns]
    for N in Ns:
        out.path(f"w_N{N}.csv")
        out.path(f"theta_N{N}.csv")
    rows = convergence_table(out.root, Ns)
    lines = ["N,dt,w_err,w_order,theta_err,theta_order,w_err_vs_finest,theta_err_vs_finest"]
    for r in rows:
        lines.append(",".join(f"{r[k]:.17g}" if k != "N" else str(r[k]) for k in
                              ("N", "dt", "w_err", "w_order", "theta_err", "theta_order",
                               "w_err_vs_finest", "theta_err_vs_finest")))
    out.path("convergence.csv").write_text("\n".join(lines) + "\n")
    orders = [r[k] for r in rows for k in ("w_order", "theta_order") if not math.isnan(r[k])]
    report.diagnostics = {"runs": runs, "table": rows, "observed_orders": orders,
                          "min_order": min(orders) if orders else math.nan,
                          "max_order": max(orders) if orders else math.nan}
    write_json(out.path("convergence.json"), report.diagnostics)


HANDLERS = {"check": cmd_check, "solve": cmd_solve, "dvhi": cmd_dvhi, "contact": cmd_contact,
            "convergence": cmd_convergence}


# --------------------------------------------------------------------------
# entry points


def _apply_mode(cfg: ScenarioConfig, mode: str | None) -> ScenarioConfig:
    if mode is None or mode == cfg.solver.mode:
        return cfg
    return replace(cfg, solver=replace(cfg.solver, mode=mode))


def _env_seed() -> int | None:
    raw = os.environ.get(ENV_SEED)
    if raw is None or raw == "":
        return None
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigurationError(f"not an integer: {raw!r}", ENV_SEED) from None


def run(config_path, command: str, out: str | None = None, seed: int | None = None, jobs: int = 1,
        mode: str | None = None) -> RunReport:
    """Execute one command; on failure the report is still written and the error re-raised."""
    if command not in COMMANDS:
        raise ConfigurationError(f"unknown command {command!r}; expected one of {COMMANDS}", "command")
    if jobs < 1:
        raise ConfigurationError("must be at least 1", "--jobs")
    seed = seed if seed is not None else _env_seed()
    out = out or os.environ.get(ENV_OUT) or None
    cfg = _apply_mode(load_config(config_path, seed=seed, out_dir=out), mode)
    outputs = _Outputs(cfg.directory)
    report = RunReport(command, cfg.digest)
    start = time.perf_counter()
    try:
        HANDLERS[command](cfg, outputs, report, jobs)
    except HistincError as exc:
        report.status, report.error = "error", exc.to_dict()
        raise
    finally:
        report.wall_clock = time.perf_counter() - start
        report.manifest = outputs.manifest()
        write_json(outputs.root / "report.json", report.to_dict())
    return report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # keep exit status 2 for gate failures only
        raise ConfigurationError(message, "arguments")


def _seed_arg(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="histinc", description="Solve coupled history-dependent evolution inclusions.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="scenario JSON file")
    parser.add_argument("--out", help=f"output directory (env {ENV_OUT})")
    parser.add_argument("--seed", type=_seed_arg, help=f"random seed (env {ENV_SEED})")
    parser.add_argument("--jobs", type=int, default=1, help="parallel runs for sweeps")
    parser.add_argument("--mode", choices=MODES, help="Picard mode override")
    return parser


def _emit(obj, stream):
    stream.write(json.dumps(obj, sort_keys=True) + "\n")
    stream.flush()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        report = run(args.config, args.command, args.out, args.seed, args.jobs, args.mode)
    except HistincError as exc:
        _emit({"status": "error", "error": exc.to_dict()}, sys.stdout)
        return exc.exit_status
    except Exception as exc:  # noqa: BLE001 - last-resort structured report
        _emit({"status": "error", "error": {"code": "internal_error", "message": f"{type(exc).__name__}: {exc}"}},
              sys.stdout)
        return 1
    summary = {k: v for k, v in report.to_dict().items() if k != "diagnostics"}
    _emit(summary, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
