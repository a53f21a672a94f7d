"""Experiment drivers: convergence tables, energy histories, blow-up and micromagnetic runs."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fvem, physics
from .config import ExperimentConfig
from .io import write_csv, write_vtk_snapshot
from .mesh import build_rect_mesh
from .stepper import Discretization, PicardState, Simulation, contraction_ratios, picard_implicit_step

log = logging.getLogger(__name__)

ERROR_COLUMNS = ("n", "dx", "dt", "linf", "linf_order", "l2", "l2_order", "h1", "h1_order")
ENERGY_COLUMNS = ("step", "t", "energy", "exchange", "anisotropy", "zeeman", "stray", "grad_linf")
PICARD_COLUMNS = ("tau", "iteration", "increment_h1", "ratio")


@dataclass
class RunArtifacts:
    """Tables, snapshot paths and a short summary of one experiment."""

    error_table: list = field(default_factory=list)
    timeseries: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def observed_orders(errors, sizes) -> list:
    """log(e_c / e_f) / log(h_c / h_f) for consecutive levels; None for the first."""
    out = [None]
    for (e0, h0), (e1, h1) in zip(zip(errors, sizes), zip(errors[1:], sizes[1:])):
        if e0 > 0 and e1 > 0:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
        else:
            out.append(float("nan"))
    return out


# --- problem data -----------------------------------------------------------


def boundary_function(cfg: ExperimentConfig):
    """Dirichlet data as ``g(x, y, t)``, or None to hold the initial boundary values."""
    if cfg.bc == "fixed-from-ic":
        return None
    if cfg.bc == "manufactured-static":
        return physics.static_boundary_field
    if cfg.bc == "manufactured-moving":
        return physics.manufactured_solution
    rect = tuple(cfg.rect)
    return lambda x, y, t=0.0: physics.vortex_frame_bc(x, y, t, rect)


def initial_field(cfg: ExperimentConfig, disc: Discretization, boundary=None, t0: float = 0.0) -> np.ndarray:
    mesh = disc.mesh
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    if cfg.ic == "manufactured":
        m = physics.manufactured_solution(x, y, t0)
    elif cfg.ic == "blowup":
        m = physics.blowup_ic(x, y, cfg.ic_center)
    elif cfg.ic == "uniform":
        m = disc.sample(physics.uniform_field((0.0, 0.0, 1.0)))
    elif cfg.ic == "landau":
        x0, x1, y0, y1 = cfg.rect
        m = physics.landau_ic(x, y, center=(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
    else:
        rng = np.random.default_rng(cfg.seed)
        m = rng.normal(size=(mesh.n_nodes, 3))
        m /= np.linalg.norm(m, axis=1, keepdims=True)
    m = np.array(m, dtype=float)
    if boundary is not None:
        m[disc.boundary_nodes] = disc.boundary_values(boundary, t0)
    return m


def _source_for(cfg: ExperimentConfig):
    if cfg.bc != "manufactured-moving" or cfg.experiment not in ("convergence", "picard-check"):
        return None
    alpha = cfg.alpha
    return lambda x, y, t: physics.manufactured_source(x, y, t, alpha)


def _square_mesh(n: int):
    return build_rect_mesh(n, n, (0.0, 1.0, 0.0, 1.0))


# --- drivers ----------------------------------------------------------------


def run_convergence(cfg: ExperimentConfig, out_dir=None) -> RunArtifacts:
    """Errors at time T against the manufactured solution on a refinement sequence.

    In linked mode dt = dx = 1/n; in quadratic mode dt = dx^2.  Orders are
    measured against dx.
    """
    params = cfg.dimensionless()
    source = (lambda x, y, t: physics.manufactured_source(x, y, t, params.alpha)) if cfg.T > 0 else None
    rows = []
    for n in cfg.levels:
        disc = Discretization.from_mesh(_square_mesh(n))
        dx = 1.0 / n
        dt = dx if cfg.mode == "linked" else dx * dx
        n_steps = int(round(cfg.T / dt))
        m = initial_field(cfg, disc, physics.manufactured_solution)
        if n_steps:
            sim = Simulation(
                disc,
                params,
                dt,
                boundary=physics.manufactured_solution,
                source=source,
                method=cfg.solver,
                damping=cfg.damping,
                boundary_mode=cfg.boundary_mode,
            )
            m = sim.run(m, n_steps)
        t_end = n_steps * dt
        linf, l2, h1 = fvem.error_norms(m, lambda x, y: physics.manufactured_solution(x, y, t_end), disc.dual)
        log.info("n=%d dt=%.3g  Linf=%.3e L2=%.3e H1=%.3e", n, dt, linf, l2, h1)
        rows.append(dict(n=n, dx=dx, dt=dt, linf=linf, l2=l2, h1=h1))
    sizes = [r["dx"] for r in rows]
    for key in ("linf", "l2", "h1"):
        for row, order in zip(rows, observed_orders([r[key] for r in rows], sizes)):
            row[f"{key}_order"] = order
    art = RunArtifacts(error_table=rows)
    art.summary = {"mode": cfg.mode, "alpha": params.alpha, "levels": list(cfg.levels)}
    if out_dir is not None:
        art.files.append(write_csv(Path(out_dir) / f"{cfg.label}.csv", ERROR_COLUMNS, rows))
    return art


def _snapshot_steps(times, dt: float, n_steps: int, scale: float = 1.0) -> dict:
    """Map step index -> requested time (in the config's own unit)."""
    steps = {}
    for t in times:
        k = int(round(t / scale / dt))
        if 0 <= k <= n_steps:
            steps.setdefault(k, t)
    return steps


def evolve(
    cfg: ExperimentConfig,
    disc: Discretization,
    params,
    dt: float,
    n_steps: int,
    m0: np.ndarray,
    boundary=None,
    source=None,
    out_dir=None,
    time_scale: float = 1.0,
    monitor=None,
) -> RunArtifacts:
    """Run GSPM and track energy and max gradient after every step.

    ``time_scale`` converts dimensionless time to the unit of
    ``cfg.snapshot_times`` (seconds for micromagnetic runs).  ``monitor``,
    if given, is called as ``monitor(step, t, m)`` after every step.
    """
    sim = Simulation(
        disc,
        params,
        dt,
        boundary=boundary,
        source=source,
        method=cfg.solver,
        damping=cfg.damping,
        boundary_mode=cfg.boundary_mode,
    )
    snaps = _snapshot_steps(cfg.snapshot_times, dt, n_steps, time_scale)
    art = RunArtifacts()
    state = {"prev": None, "worst": -math.inf}

    def record(k, t, m):
        e = physics.energy(m, params, disc.dual)
        g = fvem.grad_linf(m, disc.mesh)
        if state["prev"] is not None:
            prev = state["prev"]
            state["worst"] = max(state["worst"], (e.total - prev) / max(abs(prev), 1e-300))
        state["prev"] = e.total
        if monitor is not None:
            monitor(k, t, m)
        if k % cfg.record_every == 0 or k == n_steps:
            row = {"step": k, "t": t * time_scale, **e.as_dict(), "grad_linf": g}
            art.timeseries.append(row)
        if k in snaps and out_dir is not None:
            path = Path(out_dir) / f"{cfg.label}_step{k:07d}.vtk"
            art.snapshots.append(write_vtk_snapshot(disc.mesh, m, path, f"{cfg.label} t={snaps[k]!r}"))

    m = sim.run(m0, n_steps, callback=record)
    series = art.timeseries
    art.summary = {
        "steps": n_steps,
        "dt": dt,
        "energy_initial": series[0]["energy"],
        "energy_final": series[-1]["energy"],
        "max_relative_energy_increase": state["worst"] if n_steps else 0.0,
        "grad_linf_initial": series[0]["grad_linf"],
        "grad_linf_max": max(r["grad_linf"] for r in series),
    }
    art.summary["final_field"] = m
    if out_dir is not None:
        art.files.append(write_csv(Path(out_dir) / f"{cfg.label}.csv", ENERGY_COLUMNS, series))
        art.files.extend(art.snapshots)
    return art


def run_energy(cfg: ExperimentConfig, out_dir=None, monitor=None) -> RunArtifacts:
    disc = Discretization.from_mesh(build_rect_mesh(cfg.nx, cfg.ny, cfg.rect))
    boundary = boundary_function(cfg)
    dt, n_steps = cfg.time_grid()
    m0 = initial_field(cfg, disc, boundary)
    return evolve(cfg, disc, cfg.dimensionless(), dt, n_steps, m0, boundary, out_dir=out_dir, monitor=monitor)


def run_blowup(cfg: ExperimentConfig, out_dir=None) -> RunArtifacts:
    """Energy run plus tracking of m3 at the centre node and within radius 0.2 of it.

    Summary keys ending in ``_min`` are minima over the whole run; the others
    are final values.
    """
    nodes = build_rect_mesh(cfg.nx, cfg.ny, cfg.rect).nodes
    r = np.hypot(nodes[:, 0] - cfg.ic_center[0], nodes[:, 1] - cfg.ic_center[1])
    center = int(np.argmin(r))
    near = np.flatnonzero(r < 0.2)
    track = {"center": math.inf, "near": math.inf, "near_time": None}

    def monitor(k, t, m):
        track["center"] = min(track["center"], m[center, 2])
        if near.size:
            low = m[near, 2].min()
            if low < track["near"]:
                track["near"] = low
            if low < -0.5 and track["near_time"] is None:
                track["near_time"] = t

    art = run_energy(cfg, out_dir, monitor=monitor)
    m = art.summary["final_field"]
    art.summary["center_m3"] = float(m[center, 2])
    art.summary["center_m3_min"] = float(track["center"])
    art.summary["min_m3_near_center"] = float(m[near, 2].min()) if near.size else float("nan")
    art.summary["near_center_m3_min"] = float(track["near"]) if near.size else float("nan")
    art.summary["first_time_near_center_below_-0.5"] = track["near_time"]
    return art


def run_micromag(cfg: ExperimentConfig, out_dir=None) -> RunArtifacts:
    """SI scenario converted to dimensionless form; times in the CSV are seconds."""
    params = cfg.dimensionless()
    disc = Discretization.from_mesh(build_rect_mesh(cfg.nx, cfg.ny, cfg.rect))
    boundary = boundary_function(cfg)
    dt, n_steps = cfg.time_grid()
    m0 = initial_field(cfg, disc, boundary)
    art = evolve(cfg, disc, params, dt, n_steps, m0, boundary, out_dir=out_dir, time_scale=params.time_unit)
    art.summary.update(eps=params.eps, q=params.q, time_unit=params.time_unit, scenario=cfg.scenario)
    return art


def run_picard_check(cfg: ExperimentConfig, out_dir=None) -> RunArtifacts:
    """One backward-Euler step of the manufactured problem per tau; records increment norms."""
    params = cfg.dimensionless()
    disc = Discretization.from_mesh(build_rect_mesh(cfg.nx, cfg.ny, cfg.rect))
    boundary = boundary_function(cfg)
    source = _source_for(cfg)
    m0 = initial_field(cfg, disc, boundary)
    rows, worst = [], {}
    for tau in cfg.tau:
        state = PicardState(tol=cfg.picard_tol, max_iters=cfg.picard_max_iters)
        _, trace = picard_implicit_step(m0, tau, params, disc, state, boundary=boundary, source=source)
        ratios = [None, *contraction_ratios(trace).tolist()]
        rows.extend(dict(tau=tau, iteration=i + 1, increment_h1=w, ratio=r) for i, (w, r) in enumerate(zip(trace, ratios)))
        worst[tau] = max((r for r in ratios if r is not None), default=0.0)
    art = RunArtifacts(timeseries=rows, summary={"max_ratio": worst})
    if out_dir is not None:
        art.files.append(write_csv(Path(out_dir) / f"{cfg.label}.csv", PICARD_COLUMNS, rows))
    return art


RUNNERS = {
    "convergence": run_convergence,
    "energy": run_energy,
    "blowup": run_blowup,
    "micromag": run_micromag,
    "picard-check": run_picard_check,
}


def run(cfg: ExperimentConfig, out_dir=None) -> RunArtifacts:
    return RUNNERS[cfg.experiment](cfg, out_dir)
