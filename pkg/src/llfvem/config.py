"""Flat ``key = value`` experiment configuration.

Blank lines and text after ``#`` are ignored.  Every other line must be
``key = value`` with a known key; errors name the file and line.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .physics import DimensionlessParams, MaterialParams, nondimensionalize

EXPERIMENTS = ("convergence", "energy", "blowup", "micromag", "picard-check")
BOUNDARY_FAMILIES = ("fixed-from-ic", "manufactured-static", "manufactured-moving", "vortex-frame")
INITIAL_CONDITIONS = ("manufactured", "blowup", "uniform", "landau", "random")
SCENARIOS = ("anisotropy-e1", "anisotropy-e3", "vortex", "metastable-landau", "metastable-random")


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.replace(",", " ").split())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.replace(",", " ").split())


def _choice(options):
    def conv(s: str) -> str:
        s = s.strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {s!r}")
        return s

    return conv


# key -> converter; keys map one-to-one onto ExperimentConfig fields
_KEYS = {
    "experiment": _choice(EXPERIMENTS),
    "name": str.strip,
    "scenario": _choice(SCENARIOS),
    "nx": int,
    "ny": int,
    "rect": _floats,
    "dt": float,
    "T": float,
    "alpha": float,
    "eps": float,
    "q": float,
    "stray": _bool,
    "h_e": _floats,
    "anisotropy_axis": _choice(("e1", "e3")),
    "Ms": float,
    "A_ex": float,
    "Ku": float,
    "L": float,
    "dt_s": float,
    "T_s": float,
    "bc": _choice(BOUNDARY_FAMILIES),
    "ic": _choice(INITIAL_CONDITIONS),
    "ic_center": _floats,
    "mode": _choice(("linked", "quadratic")),
    "levels": _ints,
    "snapshot_times": _floats,
    "record_every": int,
    "damping": _choice(("consistent", "printed")),
    "boundary_mode": _choice(("next", "lifted")),
    "solver": _choice(("direct", "iterative")),
    "tau": _floats,
    "picard_tol": float,
    "picard_max_iters": int,
    "seed": int,
    "out": str.strip,
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse config text into typed values keyed by field name."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if not value:
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        try:
            values[key] = _KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, str(path))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run needs.

    For ``micromag`` the SI material (Ms, A_ex, Ku, L) and the physical
    step ``dt_s``/``T_s`` in seconds replace eps, q, dt and T.
    """

    experiment: str
    name: str = ""
    scenario: str = ""
    nx: int = 32
    ny: int = 32
    rect: tuple = (0.0, 1.0, 0.0, 1.0)
    dt: float = 0.01
    T: float = 1.0
    alpha: float = 0.1
    eps: float = 1.0
    q: float = 0.0
    stray: bool = False
    h_e: tuple = (0.0, 0.0, 0.0)
    anisotropy_axis: str = "e1"
    Ms: float | None = None
    A_ex: float | None = None
    Ku: float = 0.0
    L: float = 1e-6
    dt_s: float | None = None
    T_s: float | None = None
    bc: str = "fixed-from-ic"
    ic: str = "manufactured"
    ic_center: tuple = (0.0, 0.0)
    mode: str = "linked"
    levels: tuple = ()
    snapshot_times: tuple = ()
    record_every: int = 1
    damping: str = "consistent"
    boundary_mode: str = "next"
    solver: str = "direct"
    tau: tuple = (1e-3, 5e-4)
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    seed: int = 0
    out: str = "results"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.nx < 1 or self.ny < 1:
            raise ConfigError(f"mesh counts must be >= 1, got nx={self.nx}, ny={self.ny}")
        if len(self.rect) != 4 or not (self.rect[1] > self.rect[0] and self.rect[3] > self.rect[2]):
            raise ConfigError(f"rect must be x0, x1, y0, y1 with x1 > x0 and y1 > y0, got {self.rect}")
        if len(self.h_e) != 3:
            raise ConfigError("h_e needs three components")
        if len(self.ic_center) != 2:
            raise ConfigError("ic_center needs two components")
        if self.experiment == "micromag":
            if self.Ms is None or self.A_ex is None:
                raise ConfigError("micromag needs Ms and A_ex")
            if self.dt_s is None or self.T_s is None:
                raise ConfigError("micromag needs dt_s and T_s (seconds)")
            if not self.dt_s > 0 or self.T_s < self.dt_s:
                raise ConfigError(f"need dt_s > 0 and T_s >= dt_s, got {self.dt_s}, {self.T_s}")
        elif self.experiment != "convergence":
            if not self.dt > 0 or self.T < self.dt:
                raise ConfigError(f"need dt > 0 and T >= dt, got dt={self.dt}, T={self.T}")
        elif self.T < 0:
            raise ConfigError(f"T must be >= 0, got {self.T}")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if any(t <= 0 for t in self.tau):
            raise ConfigError("tau values must be positive")

    @property
    def label(self) -> str:
        return self.name or self.experiment.replace("-", "_")

    def material(self) -> MaterialParams:
        return MaterialParams(Ms=self.Ms, A_ex=self.A_ex, Ku=self.Ku, alpha=self.alpha, L=self.L)

    def dimensionless(self) -> DimensionlessParams:
        if self.experiment == "micromag":
            return nondimensionalize(self.material(), h_e=self.h_e, anisotropy_axis=self.anisotropy_axis)
        return DimensionlessParams(
            eps=self.eps,
            q=self.q,
            alpha=self.alpha,
            h_e=self.h_e,
            anisotropy_axis=self.anisotropy_axis,
            stray=self.stray,
        )

    def time_grid(self) -> tuple[float, int]:
        """Dimensionless step and number of steps."""
        if self.experiment == "micromag":
            unit = self.dimensionless().time_unit
            dt = self.dt_s / unit
            n = int(round(self.T_s / self.dt_s))
        else:
            dt = self.dt
            n = int(round(self.T / self.dt))
        return dt, n


_SHARED_MICROMAG = dict(Ms=8.0e5, A_ex=1.3e-11, stray=True)

_DEFAULTS = {
    "convergence": dict(alpha=0.1, T=1.0, bc="manufactured-moving", ic="manufactured", mode="linked"),
    "energy": dict(nx=5, ny=5, dt=0.1, T=10.0, alpha=0.1, bc="manufactured-static", ic="manufactured"),
    "blowup": dict(
        nx=256,
        ny=256,
        rect=(-0.5, 0.5, -0.5, 0.5),
        dt=1e-4,
        T=0.6,
        alpha=1.0,
        bc="fixed-from-ic",
        ic="blowup",
        snapshot_times=(0.0, 0.001, 0.05, 0.1, 0.2, 0.4, 0.5, 0.6),
        record_every=10,
    ),
    "picard-check": dict(nx=16, ny=16, alpha=0.1, bc="manufactured-moving", ic="manufactured"),
}

_SCENARIO_DEFAULTS = {
    "anisotropy-e1": dict(
        **_SHARED_MICROMAG,
        Ku=500.0,
        alpha=1.0,
        L=1e-6,
        nx=50,
        ny=50,
        anisotropy_axis="e1",
        dt_s=1e-12,
        T_s=1e-8,
        ic="blowup",
        ic_center=(0.5, 0.5),
        bc="fixed-from-ic",
        record_every=10,
        snapshot_times=(0.0, 1e-10, 5e-10, 1e-9, 2e-9, 5e-9, 1e-8),
    ),
    "vortex": dict(
        **_SHARED_MICROMAG,
        Ku=100.0,
        alpha=1.0,
        L=1e-8,
        rect=(0.0, 2.0, 0.0, 1.0),
        nx=100,
        ny=50,
        anisotropy_axis="e3",
        dt_s=1e-13,
        T_s=5e-9,
        ic="uniform",
        bc="vortex-frame",
        record_every=100,
        snapshot_times=(0.0, 5e-9),
    ),
}
_SCENARIO_DEFAULTS["anisotropy-e3"] = dict(_SCENARIO_DEFAULTS["anisotropy-e1"], anisotropy_axis="e3")
_SCENARIO_DEFAULTS["metastable-landau"] = dict(_SCENARIO_DEFAULTS["vortex"], alpha=0.01, ic="landau")
_SCENARIO_DEFAULTS["metastable-random"] = dict(_SCENARIO_DEFAULTS["vortex"], alpha=0.01, ic="random")


def build_config(experiment: str | None = None, values: dict | None = None, **overrides) -> ExperimentConfig:
    """Merge per-experiment defaults, parsed config values and overrides."""
    values = dict(values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    exp = values.pop("experiment", None)
    if experiment is not None and exp is not None and exp != experiment:
        raise ConfigError(f"config is for experiment {exp!r}, not {experiment!r}")
    exp = experiment or exp
    if exp is None:
        raise ConfigError("no experiment given")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {exp!r}")
    merged = dict(_DEFAULTS.get(exp, {}))
    if exp == "micromag":
        scenario = values.get("scenario", "anisotropy-e1")
        merged.update(_SCENARIO_DEFAULTS[scenario])
        merged["scenario"] = scenario
    merged.update(values)
    if exp == "convergence" and "levels" not in merged:
        merged["levels"] = (32, 64, 128, 256) if merged.get("mode", "linked") == "linked" else (8, 16, 24, 32)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(f"unknown settings: {', '.join(sorted(unknown))}")
    return ExperimentConfig(experiment=exp, **merged)
