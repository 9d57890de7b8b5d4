"""Exception hierarchy shared by the solvers and the command line."""

from __future__ import annotations


class HistincError(Exception):
    """Base class. ``code`` is the machine-readable tag used in JSON error objects."""

    code = "error"
    exit_status = 1

    def to_dict(self) -> dict:
        return {"code": self.code, "message": str(self)}


class ConfigurationError(HistincError, ValueError):
    code = "config_error"
    exit_status = 4

    def __init__(self, message: str, location: str | None = None):
        super().__init__(message if location is None else f"{location}: {message}")
        self.location = location

    def to_dict(self) -> dict:
        out = super().to_dict()
        if self.location is not None:
            out["location"] = self.location
        return out


class GateError(HistincError):
    """A smallness condition failed; raised before any iteration starts."""

    code = "gate_failure"
    exit_status = 2

    def __init__(self, message: str, margins=None):
        super().__init__(message)
        self.margins = tuple(margins) if margins is not None else ()

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["margins"] = [float(m) for m in self.margins]
        return out


class NonConvergence(HistincError):
    code = "non_convergence"
    exit_status = 3

    def __init__(self, message: str, residual: float = float("nan"),
                 iterations: int = 0, node: int | None = None, stage: str | None = None):
        self.message = message
        self.residual = float(residual)
        self.iterations = int(iterations)
        self.node = node
        self.stage = stage
        text = message
        if stage:
            text = f"[{stage}] {text}"
        if node is not None:
            text += f" (node {node})"
        text += f": residual={self.residual:.3e} after {self.iterations} iterations"
        super().__init__(text)

    def annotate(self, stage: str | None = None, node: int | None = None) -> "NonConvergence":
        """Copy with the failing stage/node filled in (existing values win)."""
        return type(self)(self.message, self.residual, self.iterations,
                          self.node if self.node is not None else node,
                          self.stage if self.stage is not None else stage)

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(residual=self.residual, iterations=self.iterations,
                   node=self.node, stage=self.stage)
        return out


class MaxIterations(NonConvergence):
    code = "max_iterations"


class ProbeError(HistincError):
    code = "probe_error"
