"""Constant-coefficient heat solves ``(M + shift * A) x = b`` with Dirichlet rows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

RTOL = 1e-10


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearOperatorSpec:
    mass: sp.spmatrix
    stiffness: sp.spmatrix
    shift: float
    dirichlet_nodes: np.ndarray

    def __post_init__(self):
        if self.mass.shape != self.stiffness.shape or self.mass.shape[0] != self.mass.shape[1]:
            raise ValueError(f"shape mismatch: mass {self.mass.shape}, stiffness {self.stiffness.shape}")
        if not np.isfinite(self.shift) or self.shift < 0:
            raise ValueError(f"shift must be finite and >= 0, got {self.shift}")


def with_dirichlet_rows(mat: sp.spmatrix, nodes: np.ndarray) -> sp.csr_matrix:
    """Replace the given rows by identity rows."""
    mat = sp.csr_matrix(mat, copy=True)
    n = mat.shape[0]
    keep = np.ones(n)
    keep[nodes] = 0.0
    ident = np.zeros(n)
    ident[nodes] = 1.0
    out = sp.diags(keep) @ mat + sp.diags(ident)
    out = out.tocsr()
    out.eliminate_zeros()
    return out


class FactorizedOperator:
    """Reusable factorization of ``M + shift * A`` with Dirichlet identity rows.

    ``method="direct"`` uses a sparse LU; ``method="iterative"`` uses
    BiCGSTAB with a Jacobi preconditioner at relative tolerance 1e-10.
    """

    def __init__(self, spec: LinearOperatorSpec, method: str = "direct"):
        self.spec = spec
        self.method = method
        self.dirichlet_nodes = np.asarray(spec.dirichlet_nodes, dtype=np.int64)
        self.operator = (spec.mass + spec.shift * spec.stiffness).tocsr()
        self.matrix = with_dirichlet_rows(self.operator, self.dirichlet_nodes)
        self.n = self.matrix.shape[0]
        if method == "direct":
            try:
                self._lu = spla.splu(self.matrix.tocsc())
            except RuntimeError as exc:
                raise SolverError(f"factorization failed ({exc}); {self._condition_note()}") from exc
            diag_u = np.abs(self._lu.U.diagonal())
            if diag_u.min() <= np.finfo(float).eps * diag_u.max():
                raise SolverError(f"operator is numerically singular; {self._condition_note()}")
        elif method == "iterative":
            d = self.matrix.diagonal()
            if np.any(d == 0):
                raise SolverError("zero diagonal entry; Jacobi preconditioner undefined")
            self._precond = spla.LinearOperator(self.matrix.shape, matvec=lambda v: v / d)
        else:
            raise ValueError(f"unknown method {method!r}")

    def _condition_note(self) -> str:
        try:
            inv_est = spla.onenormest(spla.inv(self.matrix.tocsc())) if self.n <= 2000 else float("nan")
        except RuntimeError:
            inv_est = float("inf")
        norm = spla.norm(self.matrix, 1)
        return f"1-norm condition estimate {norm * inv_est:.3e}"

    def boundary_rhs(self, rhs: np.ndarray, bc_values) -> np.ndarray:
        rhs = np.array(rhs, dtype=float)
        if len(self.dirichlet_nodes):
            rhs[self.dirichlet_nodes] = bc_values
        return rhs

    def solve(self, rhs, bc_values=0.0) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ValueError(f"rhs has {rhs.shape[0]} rows, operator has {self.n}")
        if not np.all(np.isfinite(rhs)):
            raise SolverError("non-finite right-hand side")
        b = self.boundary_rhs(rhs, bc_values)
        if self.method == "direct":
            x = self._lu.solve(b)
        else:
            cols = b[:, None] if b.ndim == 1 else b
            out = np.empty_like(cols)
            for k in range(cols.shape[1]):
                xk, info = spla.bicgstab(
                    self.matrix, cols[:, k], rtol=RTOL, atol=0.0, M=self._precond, maxiter=10 * self.n
                )
                if info != 0:
                    raise SolverError(f"BiCGSTAB breakdown or no convergence (info={info})")
                out[:, k] = xk
            x = out[:, 0] if b.ndim == 1 else out
        if not np.all(np.isfinite(x)):
            raise SolverError("solver produced non-finite values")
        if len(self.dirichlet_nodes):
            x[self.dirichlet_nodes] = b[self.dirichlet_nodes]
        return x

    def residual(self, x, rhs, bc_values=0.0) -> float:
        """Relative residual against the boundary-adjusted right-hand side."""
        b = self.boundary_rhs(rhs, bc_values)
        r = self.matrix @ x - b
        return float(np.linalg.norm(r) / max(np.linalg.norm(b), np.finfo(float).tiny))


def prepare(spec: LinearOperatorSpec, method: str = "direct") -> FactorizedOperator:
    return FactorizedOperator(spec, method=method)


def solve(op: FactorizedOperator, rhs, bc_values=0.0) -> np.ndarray:
    return op.solve(rhs, bc_values)
