import numpy as np
import pytest

from llfvem.mesh import build_dual, build_rect_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


@pytest.fixture(scope="module")
def unit8():
    mesh = build_rect_mesh(8, 8)
    return mesh, build_dual(mesh)


def galerkin_stiffness(mesh):
    """Dense P1 stiffness from edge vectors: K_ij = e_i . e_j / (4 S)."""
    n = mesh.n_nodes
    K = np.zeros((n, n))
    for tri in mesh.triangles:
        p = mesh.nodes[tri]
        edges = np.array([p[2] - p[1], p[0] - p[2], p[1] - p[0]])  # opposite each vertex
        area = 0.5 * abs(edges[0, 0] * edges[1, 1] - edges[0, 1] * edges[1, 0])
        K[np.ix_(tri, tri)] += edges @ edges.T / (4 * area)
    return K
