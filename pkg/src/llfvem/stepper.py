"""Time stepping: Gauss-Seidel projection (GSPM) and a Picard backward-Euler solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fvem
from .mesh import DualGeometry, TriMesh, build_dual
from .physics import DimensionlessParams, effective_field_loworder
from .solver import FactorizedOperator, LinearOperatorSpec, SolverError, prepare, with_dirichlet_rows

FieldFn = Callable[..., np.ndarray]  # (x, y, t) -> (..., 3)


class SteppingError(RuntimeError):
    pass


class PicardConvergenceError(SteppingError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


@dataclass(frozen=True)
class Discretization:
    """Mesh, dual geometry, and the coefficient-free FVEM matrices."""

    mesh: TriMesh
    dual: DualGeometry
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix

    @classmethod
    def from_mesh(cls, mesh: TriMesh) -> "Discretization":
        dual = build_dual(mesh)
        return cls(mesh, dual, fvem.assemble_mass(dual), fvem.assemble_stiffness(dual))

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.mesh.boundary_nodes

    def sample(self, func: FieldFn, *args) -> np.ndarray:
        return fvem.sample(func, self.mesh, *args)

    def boundary_values(self, func: FieldFn, t: float) -> np.ndarray:
        xy = self.mesh.nodes[self.boundary_nodes]
        out = np.asarray(func(xy[:, 0], xy[:, 1], t), dtype=float)
        return np.broadcast_to(out, (len(xy), 3)).copy()


class GspmOperators:
    """The heat operator ``M + dt*eps*A`` factorized once for a fixed step."""

    def __init__(self, disc: Discretization, cfg: DimensionlessParams, dt: float, method: str = "direct"):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.disc = disc
        self.dt = float(dt)
        spec = LinearOperatorSpec(disc.mass, disc.stiffness, self.dt * cfg.eps, disc.boundary_nodes)
        self.heat: FactorizedOperator = prepare(spec, method=method)


@dataclass
class GspmWorkspace:
    m_star: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    m_hat: np.ndarray
    dt: float


# --- pointwise Gauss-Seidel update ------------------------------------------
#
# damping="printed" is the literal update, where the
# damping dot product of components 2 and 3 mixes updated and old values.
# damping="consistent" uses m^n . m* in all three damping terms; see
# README for why this is the default.


def _damping_dot(m, ms, m1h=None, g1=None, m2h=None, g2=None, damping="consistent"):
    if damping == "consistent" or m1h is None:
        return m[..., 0] * ms[..., 0] + m[..., 1] * ms[..., 1] + m[..., 2] * ms[..., 2]
    if damping != "printed":
        raise ValueError(f"unknown damping variant {damping!r}")
    if m2h is None:
        return m1h * g1 + m[..., 1] * ms[..., 1] + m[..., 2] * ms[..., 2]
    return m1h * g1 + m2h * g2 + m[..., 2] * ms[..., 2]


def gs_first(m, ms, alpha):
    d = _damping_dot(m, ms)
    return m[..., 0] - (m[..., 1] * ms[..., 2] - m[..., 2] * ms[..., 1]) - alpha * d * m[..., 0] + alpha * ms[..., 0]


def gs_second(m, ms, m1h, g1, alpha, damping="consistent"):
    d = _damping_dot(m, ms, m1h, g1, damping=damping)
    return m[..., 1] - (m[..., 2] * g1 - m1h * ms[..., 2]) - alpha * d * m[..., 1] + alpha * ms[..., 1]


def gs_third(m, ms, m1h, m2h, g1, g2, alpha, damping="consistent"):
    d = _damping_dot(m, ms, m1h, g1, m2h, g2, damping=damping)
    return m[..., 2] - (m1h * g2 - m2h * g1) - alpha * d * m[..., 2] + alpha * ms[..., 2]


def gauss_seidel_update(m_n, m_star, g1, g2, alpha, damping="consistent") -> np.ndarray:
    """Sequential update of the three components; broadcasts over leading axes."""
    m = np.asarray(m_n, dtype=float)
    ms = np.asarray(m_star, dtype=float)
    m1 = gs_first(m, ms, alpha)
    m2 = gs_second(m, ms, m1, g1, alpha, damping)
    m3 = gs_third(m, ms, m1, m2, g1, g2, alpha, damping)
    return np.stack([m1, m2, m3], axis=-1)


def project(m_hat) -> np.ndarray:
    """Normalize every nodal vector to unit length."""
    m_hat = np.asarray(m_hat, dtype=float)
    if not np.all(np.isfinite(m_hat)):
        bad = int(np.flatnonzero(~np.isfinite(m_hat).all(axis=-1).ravel())[0])
        raise SteppingError(f"non-finite magnetization at node {bad}")
    norm = np.linalg.norm(m_hat, axis=-1, keepdims=True)
    if np.any(norm == 0):
        bad = int(np.flatnonzero(norm.ravel() == 0)[0])
        raise SteppingError(f"zero-magnitude vector at node {bad}; cannot project")
    return m_hat / norm


def _boundary_lift(g_now, g_next, dt, alpha, disc, source, t_n):
    """dt * h_perp at boundary nodes, recovered from the prescribed motion.

    On the unit sphere m_t = -m x h + alpha h_perp, which inverts to
    h_perp = (alpha m_t + m x m_t) / (1 + alpha^2).
    """
    rate = (g_next - g_now) / dt
    if source is not None:
        xy = disc.mesh.nodes[disc.boundary_nodes]
        rate = rate - np.asarray(source(xy[:, 0], xy[:, 1], t_n), dtype=float)
    h_perp = (alpha * rate + np.cross(g_now, rate)) / (1.0 + alpha**2)
    return dt * h_perp


def gspm_step(
    m_n,
    t_n: float,
    cfg: DimensionlessParams,
    ops: GspmOperators,
    boundary: FieldFn | None = None,
    source: FieldFn | None = None,
    damping: str = "consistent",
    workspace: GspmWorkspace | None = None,
    boundary_mode: str = "next",
) -> np.ndarray:
    """Advance one GSPM step from t_n to t_n + dt.

    ``boundary(x, y, t)`` gives Dirichlet data; ``None`` keeps the boundary
    values of m_n.  The result always carries g(t_n + dt) on the boundary.
    With ``boundary_mode="next"`` every heat solve uses g(t_n + dt) too.
    ``"lifted"`` instead feeds the solves the boundary value plus the
    increment implied by the prescribed boundary motion, which removes the
    O(dt) boundary layer of the intermediate fields.
    ``source(x, y, t)`` is added as ``dt * source(t_n)`` before projection.
    """
    disc = ops.disc
    dt = ops.dt
    m = fvem.as_field(m_n, disc.mesh.n_nodes)
    if not np.all(np.isfinite(m)):
        raise SteppingError("non-finite input magnetization")
    dev = np.abs(np.linalg.norm(m, axis=1) - 1.0).max()
    if dev > 1e-12:
        raise SteppingError(f"input magnetization is not unit length (max deviation {dev:.2e})")

    bnodes = disc.boundary_nodes
    g_next = m[bnodes].copy() if boundary is None else disc.boundary_values(boundary, t_n + dt)
    if boundary_mode == "lifted":
        lift = _boundary_lift(m[bnodes], g_next, dt, cfg.alpha, disc, source, t_n)
        star_bc = m[bnodes] + lift
    elif boundary_mode == "next":
        lift = None
        star_bc = g_next
    else:
        raise ValueError(f"unknown boundary_mode {boundary_mode!r}")
    heat = ops.heat
    w = disc.dual.cv_area[:, None]
    lower = cfg.has_lower_order

    rhs = disc.mass @ m
    if lower:
        rhs = rhs + dt * w * effective_field_loworder(m, cfg)
    m_star = heat.solve(rhs, star_bc)

    f_star = effective_field_loworder(m_star, cfg) if lower else None
    m1 = gs_first(m, m_star, cfg.alpha)
    rhs1 = disc.mass @ m1
    if lower:
        rhs1 = rhs1 + dt * w[:, 0] * f_star[:, 0]
    g1 = heat.solve(rhs1, g_next[:, 0] if lift is None else m1[bnodes] + lift[:, 0])
    m2 = gs_second(m, m_star, m1, g1, cfg.alpha, damping)
    rhs2 = disc.mass @ m2
    if lower:
        rhs2 = rhs2 + dt * w[:, 0] * f_star[:, 1]
    g2 = heat.solve(rhs2, g_next[:, 1] if lift is None else m2[bnodes] + lift[:, 1])
    m3 = gs_third(m, m_star, m1, m2, g1, g2, cfg.alpha, damping)
    m_hat = np.column_stack([m1, m2, m3])

    if source is not None:
        m_hat = m_hat + dt * disc.sample(source, t_n)
    m_hat[bnodes] = g_next
    if workspace is not None:
        workspace.m_star, workspace.g1, workspace.g2, workspace.m_hat = m_star, g1, g2, m_hat.copy()
        workspace.dt = dt
    m_next = project(m_hat)
    # projection may move unit-length data by an ulp; keep the prescribed values verbatim
    m_next[bnodes] = g_next
    return m_next


# --- Picard / linearized backward Euler -----------------------------------------


@dataclass
class PicardState:
    iterate: np.ndarray | None = None
    increment_h1: float = float("inf")
    tol: float = 1e-10
    max_iters: int = 50
    iterations: int = 0
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def _kron3(mat: sp.spmatrix) -> sp.csr_matrix:
    return sp.kron(mat, sp.identity(3), format="csr")


def picard_implicit_step(
    m_n,
    tau: float,
    cfg: DimensionlessParams,
    disc: Discretization,
    state: PicardState | None = None,
    boundary: FieldFn | None = None,
    t_n: float = 0.0,
    source: FieldFn | None = None,
):
    """One backward-Euler step of the exchange-only LL equation by Picard iteration.

    Each sweep solves the linear system

        [M/tau + a*e*A + e*B(m_l) - a*e*W(m_l)] m_{l+1} = M m_n / tau

    where B is the cross-product flux operator and W the mass form weighted
    by |grad m_l|^2 on each element.  Returns ``(m, trace)`` with the
    discrete H1 norm of every increment m_{l+1} - m_l.
    """
    if cfg.has_lower_order:
        raise ValueError("the Picard stepper models the exchange-only equation (q=0, stray=False, h_e=0)")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    state = state or PicardState()
    mesh, dual = disc.mesh, disc.dual
    m_n = fvem.as_field(m_n, mesh.n_nodes)
    bnodes = disc.boundary_nodes
    g_next = m_n[bnodes].copy() if boundary is None else disc.boundary_values(boundary, t_n + tau)
    dof_b = (3 * bnodes[:, None] + np.arange(3)).ravel()

    mass3 = _kron3(disc.mass)
    base = mass3 / tau + cfg.alpha * cfg.eps * _kron3(disc.stiffness)
    rhs = mass3 @ m_n.ravel() / tau
    if source is not None:
        rhs = rhs + fvem.nodal_rhs(disc.sample(source, t_n + tau), dual).ravel()
    rhs[dof_b] = g_next.ravel()

    current = m_n.copy()
    current[bnodes] = g_next
    state.trace = []
    for it in range(1, state.max_iters + 1):
        grad = fvem.element_gradients(current, mesh)
        weight = (grad**2).sum(axis=(1, 2))
        op = base + cfg.eps * fvem.assemble_bh_matrix(current, dual) - cfg.alpha * cfg.eps * _kron3(
            fvem.assemble_mass(dual, weight)
        )
        op = with_dirichlet_rows(op, dof_b)
        try:
            new = spla.spsolve(op.tocsc(), rhs).reshape(-1, 3)
        except RuntimeError as exc:
            raise SolverError(f"Picard linear solve failed: {exc}") from exc
        if not np.all(np.isfinite(new)):
            raise PicardConvergenceError("Picard iterate became non-finite", state.trace)
        inc = fvem.discrete_h1_norm(new - current, dual)
        state.trace.append(inc)
        state.iterate, state.increment_h1, state.iterations = new, inc, it
        current = new
        if inc < state.tol:
            return current, list(state.trace)
    raise PicardConvergenceError(
        f"Picard iteration did not reach tol={state.tol:g} in {state.max_iters} iterations", state.trace
    )


def contraction_ratios(trace) -> np.ndarray:
    t = np.asarray(trace, dtype=float)
    return t[1:] / t[:-1]


class Simulation:
    """Owns one magnetization run: operators, data functions, and the clock."""

    def __init__(
        self,
        disc: Discretization,
        cfg: DimensionlessParams,
        dt: float,
        boundary: FieldFn | None = None,
        source: FieldFn | None = None,
        method: str = "direct",
        damping: str = "consistent",
        boundary_mode: str = "next",
    ):
        self.disc = disc
        self.cfg = cfg
        self.ops = GspmOperators(disc, cfg, dt, method=method)
        self.boundary = boundary
        self.source = source
        self.damping = damping
        self.boundary_mode = boundary_mode

    @property
    def dt(self) -> float:
        return self.ops.dt

    def step(self, m, t: float) -> np.ndarray:
        return gspm_step(
            m, t, self.cfg, self.ops, self.boundary, self.source, self.damping, boundary_mode=self.boundary_mode
        )

    def run(self, m0, n_steps: int, t0: float = 0.0, callback=None) -> np.ndarray:
        """Take n_steps; ``callback(k, t, m)`` is called after every step (and at k=0)."""
        m = np.array(m0, dtype=float)
        if callback is not None:
            callback(0, t0, m)
        for k in range(1, n_steps + 1):
            m = self.step(m, t0 + (k - 1) * self.dt)
            if callback is not None:
                callback(k, t0 + k * self.dt, m)
        return m
