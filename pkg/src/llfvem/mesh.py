"""Structured triangulations of rectangles and their barycentric dual."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class TriMesh:
    """Counterclockwise P1 triangulation in dimensionless coordinates.

    Attributes
    ----------
    nodes : (N, 2) float array
    triangles : (T, 3) int array, counterclockwise
    boundary_nodes : sorted int array of nodes on the rectangle boundary
    h_max : longest edge over all elements
    rect : (x0, x1, y0, y1)
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    h_max: float
    rect: tuple[float, float, float, float]
    shape: tuple[int, int] | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.rect
        return (x1 - x0) * (y1 - y0)

    def signed_areas(self) -> np.ndarray:
        return self.element_areas.copy()

    @cached_property
    def element_areas(self) -> np.ndarray:
        """Signed element areas (cached, read-only)."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        area.flags.writeable = False
        return area

    @cached_property
    def midpoint_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """(T, 3) weights turning vertex values into d/dx and d/dy on each element.

        For local vertices P_l and midpoints M_l of edge (l, l+1)::

            du/dx = 1/S * sum_l u(P_l) (y(M_l) - y(M_{l+2}))
            du/dy = 1/S * sum_l u(P_l) (x(M_{l+2}) - x(M_l))
        """
        area = self.element_areas
        if np.any(area <= 0):
            bad = int(np.flatnonzero(area <= 0)[0])
            raise MeshError(f"degenerate element {bad}")
        p = self.nodes[self.triangles]
        mid = 0.5 * (p + np.roll(p, -1, axis=1))
        mid2 = np.roll(mid, -2, axis=1)
        wx = (mid[..., 1] - mid2[..., 1]) / area[:, None]
        wy = (mid2[..., 0] - mid[..., 0]) / area[:, None]
        wx.flags.writeable = False
        wy.flags.writeable = False
        return wx, wy

    def node_index(self, i: int, j: int) -> int:
        """Row-major index of structured grid node (i along x, j along y)."""
        if self.shape is None:
            raise MeshError("node_index requires a structured mesh")
        return j * (self.shape[0] + 1) + i


def build_rect_mesh(nx: int, ny: int, rect=(0.0, 1.0, 0.0, 1.0)) -> TriMesh:
    """Split an nx-by-ny grid on ``rect = (x0, x1, y0, y1)`` into triangles.

    Every cell is cut along its lower-left to upper-right diagonal and nodes
    are numbered row-major (x fastest).
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"subdivision counts must be positive integers, got ({nx}, {ny})")
    nx, ny = int(nx), int(ny)
    x0, x1, y0, y1 = (float(v) for v in rect)
    if not (x1 > x0 and y1 > y0):
        raise MeshError(f"degenerate rectangle {rect!r}")

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    a = j * (nx + 1) + i
    b = a + 1
    c = a + nx + 2
    d = a + nx + 1
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, c])
    tris[1::2] = np.column_stack([a, c, d])

    gi, gj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    on_edge = (gi == 0) | (gi == nx) | (gj == 0) | (gj == ny)
    boundary = np.flatnonzero(on_edge.ravel())

    p = nodes[tris]
    edges = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
    h_max = float(np.sqrt((edges**2).sum(axis=2)).max())

    mesh = TriMesh(nodes, tris, boundary, h_max, (x0, x1, y0, y1), (nx, ny))
    validate_mesh(mesh)
    return mesh


def validate_mesh(mesh: TriMesh) -> None:
    areas = mesh.signed_areas()
    if np.any(areas <= 0):
        bad = int(np.flatnonzero(areas <= 0)[0])
        raise MeshError(f"triangle {bad} has non-positive signed area {areas[bad]:.3e}")


@dataclass(frozen=True)
class DualGeometry:
    """Barycentric dual of a TriMesh.

    ``seg_normal[k, l]`` is the normal of the dual segment joining the
    midpoint of local edge (l, l+1) to the barycenter, scaled by the segment
    length and pointing out of the subregion of local vertex ``l``.  The same
    segment bounds the subregion of vertex ``l+1`` with the opposite sign.
    """

    mesh: TriMesh
    cv_area: np.ndarray  # (N,)
    tri_area: np.ndarray  # (T,)
    barycenter: np.ndarray  # (T, 2)
    midpoints: np.ndarray  # (T, 3, 2), edge (l, l+1) midpoint at index l
    seg_normal: np.ndarray  # (T, 3, 2)
    shape_grad: np.ndarray  # (T, 3, 2), gradients of the P1 basis on each element

    def vertex_flux_normals(self) -> np.ndarray:
        """Net outward scaled normal of each vertex subregion's interior boundary.

        Shape (T, 3, 2): entry l is n_l - n_{l-1}.
        """
        return self.seg_normal - np.roll(self.seg_normal, 1, axis=1)

    def subregion_polygons(self) -> np.ndarray:
        """Quadrilaterals (P_l, M_l, Q, M_{l-1}) in counterclockwise order, (T, 3, 4, 2)."""
        p = self.mesh.nodes[self.mesh.triangles]
        q = np.broadcast_to(self.barycenter[:, None, :], p.shape)
        m_next = self.midpoints
        m_prev = np.roll(self.midpoints, 1, axis=1)
        return np.stack([p, m_next, q, m_prev], axis=2)


def build_dual(mesh: TriMesh) -> DualGeometry:
    validate_mesh(mesh)
    p = mesh.nodes[mesh.triangles]  # (T, 3, 2)
    area = mesh.signed_areas()
    q = p.mean(axis=1)
    mid = 0.5 * (p + np.roll(p, -1, axis=1))

    d = q[:, None, :] - mid  # segment direction M_l -> Q
    # (P_l, M_l, Q, M_{l-1}) is traversed counterclockwise, so the outward
    # normal of M_l -> Q is the direction rotated clockwise.
    seg_normal = np.stack([d[..., 1], -d[..., 0]], axis=-1)

    # grad phi_l = rot90(edge opposite l) / (2 S)
    opp = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
    shape_grad = np.stack([-opp[..., 1], opp[..., 0]], axis=-1) / (2.0 * area[:, None, None])

    cv_area = np.bincount(
        mesh.triangles.ravel(), weights=np.repeat(area / 3.0, 3), minlength=mesh.n_nodes
    )
    return DualGeometry(mesh, cv_area, area, q, mid, seg_normal, shape_grad)


def polygon_area(pts: np.ndarray) -> np.ndarray:
    """Shoelace area of polygons stored along the second-to-last axis."""
    x, y = pts[..., 0], pts[..., 1]
    return 0.5 * (x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y).sum(axis=-1)
