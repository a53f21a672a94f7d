"""CSV tables and legacy-VTK snapshots."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .mesh import TriMesh


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[Mapping]) -> Path:
    """Write rows (mappings keyed by column) with a header line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_vtk_snapshot(mesh: TriMesh, m, path, title: str = "magnetization") -> Path:
    """Legacy ASCII VTK unstructured grid with the nodal field as VECTORS."""
    m = np.asarray(m, dtype=float)
    if m.shape != (mesh.n_nodes, 3):
        raise ValueError(f"field shape {m.shape} does not match {mesh.n_nodes} nodes")
    title = title.replace("\n", " ")[:255]
    n, t = mesh.n_nodes, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {n} double")
    lines.extend(f"{x!r} {y!r} 0" for x, y in mesh.nodes.tolist())
    lines.append(f"CELLS {t} {4 * t}")
    lines.extend(f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist())
    lines.append(f"CELL_TYPES {t}")
    lines.extend("5" for _ in range(t))
    lines.append(f"POINT_DATA {n}")
    lines.append("VECTORS magnetization double")
    lines.extend(f"{a!r} {b!r} {c!r}" for a, b, c in m.tolist())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_points_and_vectors(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimal reader for files produced by write_vtk_snapshot: (points, cells, vectors)."""
    tokens = Path(path).read_text().splitlines()
    i = 0
    points = cells = vectors = None
    while i < len(tokens):
        line = tokens[i].split()
        if line and line[0] == "POINTS":
            n = int(line[1])
            points = np.array([list(map(float, s.split())) for s in tokens[i + 1 : i + 1 + n]])
            i += n
        elif line and line[0] == "CELLS":
            n = int(line[1])
            cells = np.array([list(map(int, s.split()))[1:] for s in tokens[i + 1 : i + 1 + n]])
            i += n
        elif line and line[0] == "VECTORS":
            n = len(points)
            vectors = np.array([list(map(float, s.split())) for s in tokens[i + 1 : i + 1 + n]])
            i += n
        i += 1
    return points, cells, vectors
