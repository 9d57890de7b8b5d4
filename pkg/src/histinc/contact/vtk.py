"""Legacy ASCII VTK export of nodal and cell fields."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Mesh2D


def write_vtk(path, mesh: Mesh2D, point_data: dict | None = None, cell_data: dict | None = None) -> Path:
    """Write an unstructured grid; 2-vectors are padded to 3 components, 2x2 tensors to 3x3."""
    path = Path(path)
    lines = ["# vtk DataFile Version 3.0", "histinc contact field", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.nodes]
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    for header, count, data in (("POINT_DATA", mesh.n_nodes, point_data), ("CELL_DATA", nt, cell_data)):
        if not data:
            continue
        lines.append(f"{header} {count}")
        for name, arr in data.items():
            lines += _field(name, np.asarray(arr, dtype=float), count)
    path.write_text("\n".join(lines) + "\n")
    return path


def _field(name, arr, count):
    if arr.shape == (count,):
        return [f"SCALARS {name} double 1", "LOOKUP_TABLE default"] + [f"{v:.17g}" for v in arr]
    if arr.shape == (count, 2):
        return [f"VECTORS {name} double"] + [f"{a:.17g} {b:.17g} 0" for a, b in arr]
    if arr.shape == (count, 2, 2):
        out = [f"TENSORS {name} double"]
        for m in arr:
            out += [f"{m[0, 0]:.17g} {m[0, 1]:.17g} 0", f"{m[1, 0]:.17g} {m[1, 1]:.17g} 0", "0 0 0"]
        return out
    raise ValueError(f"field {name!r} has unsupported shape {arr.shape}")
