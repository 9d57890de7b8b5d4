"""Scenario files: parsing, built-in problem constructors and output writers.

A scenario is a JSON object::

    {"schema": "histinc/1", "kind": "abstract",
     "grid": {"T": 1.0, "N": 64},
     "problem": {"builtin": "coupled_benchmark", "params": {"margin": 0.5}},
     "solver": {"tol": 1e-10, "max_picard": 200, "bielecki_weight": null, "mode": "proof-faithful"},
     "outputs": {"directory": "out", "formats": ["csv", "json"]},
     "seed": 0}

``problem`` may instead carry a ``ledger`` block (constants only), which
is enough for the ``check`` command.  ``convergence`` holds ``{"N": [...]}``
for the order study.
"""

from __future__ import annotations

import hashlib
import inspect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .benchmark import coupled_benchmark, linear_decay_problem, manufactured_problem
from .contact.benchmark import symmetric_benchmark
from .contact.laws import default_contact, default_material
from .dvhi import dvhi_benchmark
from .errors import ConfigurationError
from .system import MODES, SystemConfig

SCHEMA = "histinc/1"
KINDS = ("abstract", "dvhi", "contact")
FORMATS = ("csv", "json", "vtk")
_TOP_KEYS = {"schema", "kind", "grid", "problem", "solver", "outputs", "seed", "convergence", "name"}


def _zero_data(seed: int = 0, dim_v: int = 2, dim_e: int = 2, margin: float = 0.5):
    return coupled_benchmark(seed=seed, dim_v=dim_v, dim_e=dim_e, margin=margin, zero_data=True)


def _manufactured(kappa: float = 0.5, couple: float = 0.3):
    return manufactured_problem(kappa, couple)[0]


def _symmetric(nx: int = 8, ny: int = 4, Lx: float = 2.0, Ly: float = 1.0, load: float = 1.0, heat: float = 0.5,
               material: dict | None = None, contact: dict | None = None):
    return symmetric_benchmark(nx=nx, ny=ny, Lx=Lx, Ly=Ly, load=load, heat=heat, material=material, contact=contact)


# builtin name -> (constructor, whether it takes the scenario seed)
BUILTINS = {
    "abstract": {
        "coupled_benchmark": (coupled_benchmark, True),
        "linear_decay": (linear_decay_problem, False),
        "manufactured": (_manufactured, False),
        "zero_data": (_zero_data, True),
    },
    "dvhi": {"dvhi_benchmark": (dvhi_benchmark, True)},
    "contact": {"symmetric": (_symmetric, False)},
}


# --------------------------------------------------------------------------
# validation helpers


def _expect_mapping(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigurationError(f"expected an object, got {type(value).__name__}", where)
    return value


def _number(value, where: str, *, positive: bool = False, integer: bool = False, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"expected a number, got {value!r}", where)
    if not math.isfinite(value):
        raise ConfigurationError("must be finite", where)
    if integer:
        if float(value) != int(value):
            raise ConfigurationError(f"expected an integer, got {value!r}", where)
        value = int(value)
    if positive and not value > 0:
        raise ConfigurationError(f"must be positive, got {value!r}", where)
    return value


def _no_extra(block: dict, allowed, where: str):
    extra = sorted(set(block) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown keys {extra}", where)


def _check_params(params, fn, where: str) -> dict:
    params = _expect_mapping(params, where)
    accepted = inspect.signature(fn).parameters
    for key, val in params.items():
        if key not in accepted:
            raise ConfigurationError(f"unknown parameter {key!r}; accepted: {sorted(accepted)}", f"{where}.{key}")
        if isinstance(val, dict):
            _check_params(val, _law_ctor(key, where), f"{where}.{key}")
        elif not isinstance(val, bool):
            _number(val, f"{where}.{key}")
    return params


def _law_ctor(key: str, where: str):
    laws = {"material": default_material, "contact": default_contact}
    if key not in laws:
        raise ConfigurationError("nested blocks are only allowed for material and contact laws", f"{where}.{key}")
    return laws[key]


# --------------------------------------------------------------------------
# polynomial data for contact scenarios


def _poly_terms(terms, where: str, nvars: int) -> np.ndarray:
    """Rows ``[coef, px, py(, pt)]`` of a polynomial in ``(x, y[, t])``."""
    if not isinstance(terms, list) or not terms:
        raise ConfigurationError("expected a nonempty list of terms [coef, px, py, pt]", where)
    rows = []
    for i, term in enumerate(terms):
        if not isinstance(term, list) or len(term) != nvars + 1:
            raise ConfigurationError(f"term must have {nvars + 1} entries", f"{where}[{i}]")
        coef = _number(term[0], f"{where}[{i}][0]")
        powers = [_number(p, f"{where}[{i}][{j + 1}]", integer=True) for j, p in enumerate(term[1:])]
        if min(powers) < 0:
            raise ConfigurationError("powers must be nonnegative", f"{where}[{i}]")
        rows.append([coef] + powers)
    return np.array(rows, dtype=float)


def _eval_poly(rows: np.ndarray, x: np.ndarray, t: float | None = None) -> np.ndarray:
    out = np.zeros(len(x))
    for row in rows:
        term = row[0] * x[:, 0] ** row[1] * x[:, 1] ** row[2]
        if t is not None and len(row) > 3:
            term = term * t ** row[3]
        out += term
    return out


def polynomial_field(spec, where: str, components: int, timed: bool = True):
    """Function ``(t, x) -> values`` (or ``x -> values``) from polynomial terms.

    Vector fields are given as one term list per component.
    """
    nvars = 3 if timed else 2
    if components == 1:
        polys = [_poly_terms(spec, where, nvars)]
    else:
        if not isinstance(spec, list) or len(spec) != components:
            raise ConfigurationError(f"expected {components} component term lists", where)
        polys = [_poly_terms(s, f"{where}[{c}]", nvars) for c, s in enumerate(spec)]

    def values(x, t=None):
        cols = [_eval_poly(p, x, t) for p in polys]
        return cols[0] if components == 1 else np.column_stack(cols)

    if timed:
        return lambda t, x: values(x, t)
    return lambda x: values(x)


_LOAD_SHAPES = {"f0": 2, "fN": 2, "h0": 1}
_INITIAL_SHAPES = {"u0": 2, "w0": 2, "theta0": 1}


# --------------------------------------------------------------------------
# the config object


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    T: float
    N: int
    builtin: str | None
    params: dict
    ledger: dict | None
    solver: SystemConfig
    directory: str
    formats: tuple
    seed: int
    convergence_N: tuple = ()
    extras: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical JSON of the effective configuration."""
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def canonical(self) -> dict:
        out = dict(self.raw)
        out["seed"] = self.seed
        return out

    def build(self):
        """Construct the built-in problem (a problem object, or solve kwargs for contact)."""
        if self.builtin is None:
            raise ConfigurationError("this command needs a built-in problem, not a bare ledger", "problem.builtin")
        fn, seeded = BUILTINS[self.kind][self.builtin]
        kwargs = dict(self.params)
        if seeded:
            kwargs.setdefault("seed", self.seed)
        if self.kind == "contact":
            out = fn(**kwargs)
            out["loads"].update(self.extras.get("loads", {}))
            out["initial"].update(self.extras.get("initial", {}))
            return out
        if self.kind == "abstract" and "T" in inspect.signature(fn).parameters:
            kwargs.setdefault("T", self.T)
        return fn(**kwargs)


def parse_config(data, seed: int | None = None, out_dir: str | None = None) -> ScenarioConfig:
    """Validate a decoded scenario; ``seed`` and ``out_dir`` override the file."""
    data = _expect_mapping(data, "<root>")
    _no_extra(data, _TOP_KEYS, "<root>")
    if data.get("schema") != SCHEMA:
        raise ConfigurationError(f"expected schema {SCHEMA!r}, got {data.get('schema')!r}", "schema")
    kind = data.get("kind")
    if kind not in KINDS:
        raise ConfigurationError(f"kind must be one of {KINDS}, got {kind!r}", "kind")

    grid = _expect_mapping(data.get("grid", {}), "grid")
    _no_extra(grid, {"T", "N"}, "grid")
    T = float(_number(grid.get("T", 1.0), "grid.T", positive=True))
    N = _number(grid.get("N", 64), "grid.N", positive=True, integer=True)

    problem = _expect_mapping(data.get("problem"), "problem") if "problem" in data else None
    if problem is None:
        raise ConfigurationError("missing problem block", "problem")
    _no_extra(problem, {"builtin", "params", "ledger", "loads", "initial", "snapshots", "slack_directions"},
              "problem")
    builtin, params, ledger, extras = problem.get("builtin"), {}, None, {}
    if builtin is None and "ledger" not in problem:
        raise ConfigurationError("need either a builtin or a ledger", "problem")
    if builtin is not None:
        if builtin not in BUILTINS[kind]:
            raise ConfigurationError(f"unknown {kind} builtin {builtin!r}; available: {sorted(BUILTINS[kind])}",
                                     "problem.builtin")
        params = _check_params(problem.get("params", {}), BUILTINS[kind][builtin][0], "problem.params")
    if "ledger" in problem:
        ledger = _expect_mapping(problem["ledger"], "problem.ledger")
        for key, val in ledger.items():
            if key != "kind":
                _number(val, f"problem.ledger.{key}")
    if kind == "contact":
        for block, shapes in (("loads", _LOAD_SHAPES), ("initial", _INITIAL_SHAPES)):
            spec = _expect_mapping(problem.get(block, {}), f"problem.{block}")
            _no_extra(spec, shapes, f"problem.{block}")
            extras[block] = {k: polynomial_field(v, f"problem.{block}.{k}", shapes[k], timed=block == "loads")
                             for k, v in spec.items()}
        snaps = problem.get("snapshots", [T])
        if not isinstance(snaps, list) or not snaps:
            raise ConfigurationError("expected a nonempty list of times", "problem.snapshots")
        extras["snapshots"] = [float(_number(s, f"problem.snapshots[{i}]")) for i, s in enumerate(snaps)]
        for i, s in enumerate(extras["snapshots"]):
            if not 0.0 <= s <= T:
                raise ConfigurationError(f"time {s} outside [0, T]", f"problem.snapshots[{i}]")
    if "slack_directions" in problem:
        extras["slack_directions"] = _number(problem["slack_directions"], "problem.slack_directions",
                                             positive=True, integer=True)

    solver = _expect_mapping(data.get("solver", {}), "solver")
    _no_extra(solver, {"tol", "max_picard", "bielecki_weight", "mode"}, "solver")
    mode = solver.get("mode", "proof-faithful")
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}", "solver.mode")
    cfg = SystemConfig(tol=float(_number(solver.get("tol", 1e-10), "solver.tol", positive=True)),
                       max_picard=_number(solver.get("max_picard", 200), "solver.max_picard", positive=True,
                                          integer=True),
                       bielecki_weight=_number(solver.get("bielecki_weight"), "solver.bielecki_weight",
                                               allow_none=True),
                       mode=mode)

    outputs = _expect_mapping(data.get("outputs", {}), "outputs")
    _no_extra(outputs, {"directory", "formats"}, "outputs")
    directory = outputs.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        raise ConfigurationError("expected a nonempty string", "outputs.directory")
    formats = outputs.get("formats", ["csv", "json"])
    if not isinstance(formats, list) or any(f not in FORMATS for f in formats):
        raise ConfigurationError(f"formats must be a list drawn from {FORMATS}", "outputs.formats")

    file_seed = _number(data.get("seed", 0), "seed", integer=True)
    seed = file_seed if seed is None else seed
    if not 0 <= seed < 2 ** 64:
        raise ConfigurationError("seed must be an unsigned 64-bit integer", "seed")

    conv = ()
    if "convergence" in data:
        block = _expect_mapping(data["convergence"], "convergence")
        _no_extra(block, {"N"}, "convergence")
        Ns = block.get("N")
        if not isinstance(Ns, list) or len(Ns) < 3:
            raise ConfigurationError("need a list of at least three step counts", "convergence.N")
        conv = tuple(sorted({_number(n, f"convergence.N[{i}]", positive=True, integer=True)
                             for i, n in enumerate(Ns)}))
        if len(conv) != len(Ns):
            raise ConfigurationError("step counts must be distinct", "convergence.N")
        for a, b in zip(conv, conv[1:]):
            if b != 2 * a:
                raise ConfigurationError("step counts must double", "convergence.N")

    return ScenarioConfig(kind, T, N, builtin, params, ledger, cfg, out_dir or directory, tuple(formats), seed,
                          conv, extras, raw=data)


def load_config(path, seed: int | None = None, out_dir: str | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc.msg}", f"{path.name}:{exc.lineno}:{exc.colno}") from None
    return parse_config(data, seed=seed, out_dir=out_dir)


# --------------------------------------------------------------------------
# writers


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def write_nodal_csv(path: Path, nodes: np.ndarray, columns: dict) -> Path:
    """One row per mesh node: ``node,x,y,<columns...>`` at 17 significant digits."""
    names = list(columns)
    lines = [",".join(["node", "x", "y"] + names)]
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    for i, (xy, row) in enumerate(zip(nodes, data)):
        lines.append(",".join([str(i), f"{xy[0]:.17g}", f"{xy[1]:.17g}"] + [f"{v:.17g}" for v in row]))
    path.write_text("\n".join(lines) + "\n")
    return path


def file_entry(path: Path, root: Path) -> dict:
    data = path.read_bytes()
    return {"path": str(path.relative_to(root)), "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()}
