"""FVEM forms on the barycentric dual: mass, stiffness, cross-product flux, norms.

Nodal 3-vector fields are plain ``(N, 3)`` float arrays.  Element gradients
are ``(T, 3, 2)`` arrays: row c holds (d/dx, d/dy) of component c.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import DualGeometry, TriMesh


def as_field(u, n_nodes: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (n_nodes, 3):
        raise ValueError(f"expected a ({n_nodes}, 3) nodal field, got {u.shape}")
    return u


def _scatter(mesh: TriMesh, local: np.ndarray, n_nodes: int | None = None) -> sp.csr_matrix:
    """Sum (T, 3, 3) element matrices into a CSR matrix."""
    n = mesh.n_nodes if n_nodes is None else n_nodes
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    mat = sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


def local_mass(dual: DualGeometry) -> np.ndarray:
    """Element blocks ``[l, j] = integral over subregion(l) of phi_j``.

    Each vertex quadrilateral is split into (P, M_l, Q) and (P, Q, M_{l-1});
    the centroid rule is exact for the linear integrand.
    """
    poly = dual.subregion_polygons()  # (T, 3, 4, 2) = P, M_l, Q, M_{l-1}
    sub_a = poly[:, :, [0, 1, 2]]
    sub_b = poly[:, :, [0, 2, 3]]
    out = np.zeros((dual.mesh.n_triangles, 3, 3))
    for sub in (sub_a, sub_b):
        e1 = sub[:, :, 1] - sub[:, :, 0]
        e2 = sub[:, :, 2] - sub[:, :, 0]
        area = 0.5 * (e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])  # (T, 3)
        centroid = sub.mean(axis=2)  # (T, 3, 2)
        # phi_j(x) = 1/3 + grad phi_j . (x - Q) on each element
        rel = centroid - dual.barycenter[:, None, :]
        phi = 1.0 / 3.0 + np.einsum("tld,tjd->tlj", rel, dual.shape_grad)
        out += area[..., None] * phi
    return out


def assemble_mass(dual: DualGeometry, weights: np.ndarray | None = None) -> sp.csr_matrix:
    """FVEM mass pairing ``M[i, j] = integral over V_i of phi_j``.

    ``weights`` optionally scales each element's contribution (an
    elementwise-constant coefficient inside the integral).
    """
    local = local_mass(dual)
    if weights is not None:
        local = local * np.asarray(weights, dtype=float)[:, None, None]
    return _scatter(dual.mesh, local)


def lumped_mass(dual: DualGeometry) -> sp.csr_matrix:
    """Diagonal |V_i| matrix; diagnostics only, the scheme uses assemble_mass."""
    return sp.diags(dual.cv_area).tocsr()


def assemble_stiffness(dual: DualGeometry) -> sp.csr_matrix:
    """Coefficient-free flux stiffness ``A[i, j] = -sum_{dV_i} grad phi_j . n``."""
    flux = dual.vertex_flux_normals()  # (T, 3, 2)
    local = -np.einsum("tld,tjd->tlj", flux, dual.shape_grad)
    return _scatter(dual.mesh, local)


def element_gradients(u, mesh: TriMesh) -> np.ndarray:
    """Per-element gradients from edge-midpoint differences (see TriMesh.midpoint_weights)."""
    u = as_field(u, mesh.n_nodes)
    wx, wy = mesh.midpoint_weights
    uv = u[mesh.triangles]  # (T, 3, 3) vertex, component
    gx = np.einsum("tl,tlc->tc", wx, uv)
    gy = np.einsum("tl,tlc->tc", wy, uv)
    return np.stack([gx, gy], axis=-1)


def shape_function_gradients(u, dual: DualGeometry) -> np.ndarray:
    """Same quantity as element_gradients via the P1 basis gradients."""
    u = as_field(u, dual.mesh.n_nodes)
    return np.einsum("tlc,tld->tcd", u[dual.mesh.triangles], dual.shape_grad)


def apply_bh(phi, u, dual: DualGeometry) -> np.ndarray:
    """Cross-product flux ``r_i = sum_{dV_i} phi(Q) x (grad u . n)``.

    phi is evaluated at each element barycenter.
    """
    mesh = dual.mesh
    phi = as_field(phi, mesh.n_nodes)
    u = as_field(u, mesh.n_nodes)
    phi_q = phi[mesh.triangles].mean(axis=1)  # (T, 3)
    grad = element_gradients(u, mesh)  # (T, 3, 2)
    flux = np.einsum("tcd,tld->tlc", grad, dual.vertex_flux_normals())  # (T, 3 vertices, 3)
    local = np.cross(phi_q[:, None, :], flux)
    out = np.zeros((mesh.n_nodes, 3))
    np.add.at(out, mesh.triangles.ravel(), local.reshape(-1, 3))
    return out


def _skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrices, ``_skew(v) @ w == cross(v, w)``; v is (..., 3)."""
    z = np.zeros(v.shape[:-1])
    return np.stack(
        [
            np.stack([z, -v[..., 2], v[..., 1]], axis=-1),
            np.stack([v[..., 2], z, -v[..., 0]], axis=-1),
            np.stack([-v[..., 1], v[..., 0], z], axis=-1),
        ],
        axis=-2,
    )


def assemble_bh_matrix(phi, dual: DualGeometry) -> sp.csr_matrix:
    """Linear operator u -> apply_bh(phi, u) on interleaved unknowns (3N x 3N).

    Unknown ``3*i + c`` is component c of node i.  On each element the flux
    of phi_j through the interior boundary of V_l equals -S grad phi_l . grad phi_j,
    so block (l, j) is that scalar times the cross-product matrix of phi(Q).
    """
    mesh = dual.mesh
    phi = as_field(phi, mesh.n_nodes)
    phi_q = phi[mesh.triangles].mean(axis=1)
    coeff = np.einsum("tld,tjd->tlj", dual.vertex_flux_normals(), dual.shape_grad)  # (T, 3, 3)
    blocks = coeff[:, :, :, None, None] * _skew(phi_q)[:, None, None, :, :]  # (T, l, j, 3, 3)

    tri = mesh.triangles
    comp = np.arange(3)
    rows = 3 * tri[:, :, None, None, None] + comp[None, None, None, :, None]
    cols = 3 * tri[:, None, :, None, None] + comp[None, None, None, None, :]
    rows = np.broadcast_to(rows, blocks.shape).ravel()
    cols = np.broadcast_to(cols, blocks.shape).ravel()
    n = 3 * mesh.n_nodes
    mat = sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


def nodal_rhs(f, dual: DualGeometry) -> np.ndarray:
    """Lumped pairing ``F_i = f(x_i) |V_i|`` for nodal samples f (N,) or (N, k)."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != dual.mesh.n_nodes:
        raise ValueError(f"expected {dual.mesh.n_nodes} nodal samples, got {f.shape[0]}")
    if f.ndim == 1:
        return f * dual.cv_area
    return f * dual.cv_area[:, None]


def grad_linf(u, mesh: TriMesh) -> float:
    """Max over elements of the Frobenius norm of the 3x2 gradient."""
    g = element_gradients(u, mesh)
    return float(np.sqrt((g**2).sum(axis=(1, 2))).max())


def discrete_h1_seminorm(u, mesh: TriMesh) -> float:
    g = element_gradients(u, mesh)
    return float(np.sqrt(np.sum(mesh.element_areas * (g**2).sum(axis=(1, 2)))))


def discrete_l2_norm(u, dual: DualGeometry) -> float:
    """Mass-weighted nodal norm ``sqrt(sum |V_i| |u_i|^2)``."""
    u = np.asarray(u, dtype=float)
    sq = u**2 if u.ndim == 1 else (u**2).sum(axis=1)
    return float(np.sqrt(np.sum(dual.cv_area * sq)))


def discrete_h1_norm(u, dual: DualGeometry) -> float:
    return float(np.hypot(discrete_l2_norm(u, dual), discrete_h1_seminorm(u, dual.mesh)))


def sample(func, mesh: TriMesh, *args) -> np.ndarray:
    """Evaluate a vectorized ``func(x, y, *args) -> (..., 3)`` at the nodes."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    out = np.asarray(func(x, y, *args), dtype=float)
    if out.shape == (3, mesh.n_nodes):
        out = out.T
    return np.broadcast_to(out, (mesh.n_nodes, 3)).copy()


def error_norms(u, exact, dual: DualGeometry) -> tuple[float, float, float]:
    """(L-inf, L2, H1) norms of the nodal error ``exact(x_i) - u_i``.

    ``exact`` is either a callable ``f(x, y) -> 3-vector`` or an (N, 3)
    array of nodal values.
    """
    mesh = dual.mesh
    u = as_field(u, mesh.n_nodes)
    ref = sample(exact, mesh) if callable(exact) else as_field(exact, mesh.n_nodes)
    err = ref - u
    linf = float(np.sqrt((err**2).sum(axis=1)).max())
    l2 = discrete_l2_norm(err, dual)
    h1 = float(np.hypot(l2, discrete_h1_seminorm(err, mesh)))
    return linf, l2, h1
