"""Material parameters, lower-order field, discrete energy, and model data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fvem
from .mesh import DualGeometry

MU0 = 4e-7 * math.pi
GAMMA_E = 1.76086e11  # rad s^-1 T^-1


@dataclass(frozen=True)
class MaterialParams:
    """SI material description.  L is the length unit of the mesh (m)."""

    Ms: float
    A_ex: float
    Ku: float = 0.0
    alpha: float = 1.0
    L: float = 1e-6
    mu0: float = MU0
    gamma: float = GAMMA_E

    def __post_init__(self):
        for name in ("Ms", "A_ex", "mu0", "gamma", "L", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.Ku < 0:
            raise ValueError(f"Ku must be non-negative, got {self.Ku}")


@dataclass(frozen=True)
class DimensionlessParams:
    """Coefficients of the dimensionless LL equation.

    ``stray=False`` together with ``q=0`` and ``h_e=0`` reduces the
    lower-order field to zero, giving the pure exchange model used by the
    accuracy, energy and blow-up studies.
    """

    eps: float = 1.0
    q: float = 0.0
    alpha: float = 0.1
    h_e: tuple[float, float, float] = (0.0, 0.0, 0.0)
    anisotropy_axis: str = "e1"
    stray: bool = True
    time_unit: float | None = None  # seconds per unit of dimensionless time

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.q < 0:
            raise ValueError(f"q must be non-negative, got {self.q}")
        if self.anisotropy_axis not in ("e1", "e3"):
            raise ValueError(f"anisotropy_axis must be 'e1' or 'e3', got {self.anisotropy_axis!r}")
        object.__setattr__(self, "h_e", tuple(float(v) for v in self.h_e))
        if len(self.h_e) != 3:
            raise ValueError("h_e must have three components")

    @property
    def has_lower_order(self) -> bool:
        return self.q != 0 or self.stray or any(self.h_e)


def nondimensionalize(p: MaterialParams, h_e=(0.0, 0.0, 0.0), anisotropy_axis="e1") -> DimensionlessParams:
    scale = p.mu0 * p.Ms**2
    return DimensionlessParams(
        eps=2.0 * p.A_ex / (scale * p.L**2),
        q=2.0 * p.Ku / scale,
        alpha=p.alpha,
        h_e=h_e,
        anisotropy_axis=anisotropy_axis,
        stray=True,
        time_unit=1.0 / (p.mu0 * p.gamma * p.Ms),
    )


def _hard_components(axis: str) -> list[int]:
    return [1, 2] if axis == "e1" else [0, 1]


def effective_field_loworder(m, cfg: DimensionlessParams) -> np.ndarray:
    """Pointwise lower-order field: anisotropy, thin-film stray term, external field."""
    m = np.asarray(m, dtype=float)
    f = np.zeros_like(m)
    hard = _hard_components(cfg.anisotropy_axis)
    f[..., hard] -= cfg.q * m[..., hard]
    if cfg.stray:
        f[..., 2] -= m[..., 2]
    f += np.asarray(cfg.h_e)
    return f


@dataclass(frozen=True)
class DiscreteEnergy:
    exchange_part: float
    anisotropy_part: float
    zeeman_part: float
    stray_part: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "total", self.exchange_part + self.anisotropy_part + self.zeeman_part + self.stray_part
        )

    def as_dict(self) -> dict:
        return {
            "energy": self.total,
            "exchange": self.exchange_part,
            "anisotropy": self.anisotropy_part,
            "zeeman": self.zeeman_part,
            "stray": self.stray_part,
        }


def energy(m, cfg: DimensionlessParams, dual: DualGeometry) -> DiscreteEnergy:
    """Exchange part from the element-wise seminorm; the rest lumped on |V_i|."""
    m = fvem.as_field(m, dual.mesh.n_nodes)
    w = dual.cv_area
    semi = fvem.discrete_h1_seminorm(m, dual.mesh)
    hard = _hard_components(cfg.anisotropy_axis)
    aniso = 0.5 * cfg.q * float(np.sum(w * (m[:, hard] ** 2).sum(axis=1)))
    zeeman = -float(np.sum(w * (m @ np.asarray(cfg.h_e))))
    stray = 0.5 * float(np.sum(w * m[:, 2] ** 2)) if cfg.stray else 0.0
    return DiscreteEnergy(0.5 * cfg.eps * semi**2, aniso, zeeman, stray)


# --- manufactured problem ---------------------------------------------------


def manufactured_solution(x, y, t=0.0) -> np.ndarray:
    """(sin x cos(y+t), cos x cos(y+t), sin(y+t)), last axis = component."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    c = np.cos(y + t)
    return np.stack([np.sin(x) * c, np.cos(x) * c, np.sin(y + t)], axis=-1)


def manufactured_dt(x, y, t=0.0) -> np.ndarray:
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    s = np.sin(y + t)
    return np.stack([-np.sin(x) * s, -np.cos(x) * s, np.cos(y + t)], axis=-1)


def manufactured_laplacian(x, y, t=0.0) -> np.ndarray:
    m = manufactured_solution(x, y, t)
    return m * np.array([-2.0, -2.0, -1.0])


def manufactured_source(x, y, t=0.0, alpha=0.1) -> np.ndarray:
    """Source making the manufactured field solve m_t = -m x Lm - a m x (m x Lm) + f."""
    m = manufactured_solution(x, y, t)
    lap = manufactured_laplacian(x, y, t)
    mxl = np.cross(m, lap)
    return manufactured_dt(x, y, t) + mxl + alpha * np.cross(m, mxl)


def static_boundary_field(x, y, t=0.0) -> np.ndarray:
    """The manufactured field frozen at t = 0."""
    return manufactured_solution(x, y, 0.0)


# --- initial conditions -----------------------------------------------------


def blowup_ic(x, y, center=(0.0, 0.0)) -> np.ndarray:
    """Bubble profile with A = (1 - 2 r^2)^4 inside r < 1/2, (0, 0, -1) outside."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    dx = x - center[0]
    dy = y - center[1]
    r2 = dx * dx + dy * dy
    a = (1.0 - 2.0 * r2) ** 4
    den = a * a + r2
    inside = r2 < 0.25
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.stack([2.0 * dx * a / den, 2.0 * dy * a / den, (a * a - r2) / den], axis=-1)
    out[~inside] = (0.0, 0.0, -1.0)
    return out


def uniform_field(direction):
    v = np.asarray(direction, dtype=float)
    v = v / np.linalg.norm(v)

    def field(x, y, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(v, x.shape + (3,)).copy()

    return field


def vortex_frame_bc(x, y, t=0.0, rect=(0.0, 2.0, 0.0, 1.0)) -> np.ndarray:
    """Edge data (0,1,0) left, (0,-1,0) right, (-1,0,0) bottom, (1,0,0) top.

    Corners take the normalized average of their two edges.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    x0, x1, y0, y1 = rect
    tol = 1e-12 * max(x1 - x0, y1 - y0)
    out = np.zeros(x.shape + (3,))
    out[np.abs(x - x0) < tol] += (0.0, 1.0, 0.0)
    out[np.abs(x - x1) < tol] += (0.0, -1.0, 0.0)
    out[np.abs(y - y0) < tol] += (-1.0, 0.0, 0.0)
    out[np.abs(y - y1) < tol] += (1.0, 0.0, 0.0)
    norm = np.linalg.norm(out, axis=-1, keepdims=True)
    on = norm[..., 0] > 0
    out[on] /= norm[on]
    return out


def landau_ic(x, y, center=(1.0, 0.5), tilt=0.1) -> np.ndarray:
    """Closed in-plane circulation around ``center`` with a small out-of-plane tilt."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    v = np.stack([y - center[1], -(x - center[0]), np.full(x.shape, tilt)], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
