"""Benchmark problems, experiment configuration and the convergence harness."""

from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .spectral import get_discretization
from .splitting import make_split
from .stencil import SchemeSpec, as_fraction
from .stepper import Mode, RunConfig, RunResult, run, write_timeseries

__all__ = [
    "example1_initial",
    "example2_exact",
    "example2_forcing",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "serialize_config",
    "build_run_config",
    "SlopeFit",
    "fit_slope",
    "ConvergenceRow",
    "ConvergenceReport",
    "run_convergence",
    "Example1Cell",
    "Example1Outcome",
    "DEFAULT_EXAMPLE1_CELLS",
    "run_example1",
]

PI = math.pi


# ---------------------------------------------------------------- problems
def example1_initial(x, y):
    """Initial velocity of the lid-free vortex test (divergence free, zero on the boundary)."""
    return (
        np.sin(2 * PI * y) * np.sin(PI * x) ** 2,
        -np.sin(2 * PI * x) * np.sin(PI * y) ** 2,
    )


def example2_exact(x, y, t):
    """Manufactured solution ``(u1, u2, p)``."""
    s = math.sin(t)
    u1 = np.sin(2 * PI * y) * np.sin(PI * x) ** 2 * s
    u2 = -np.sin(2 * PI * x) * np.sin(PI * y) ** 2 * s
    p = np.cos(PI * x) * np.sin(PI * y) * s
    return u1, u2, p


def example2_forcing(nu: float, mode=Mode.NAVIER_STOKES):
    """Forcing ``f = u_t + (u.grad)u - nu Lap u + grad p`` for :func:`example2_exact`.

    In Stokes mode the convective term is left out.
    """
    nonlinear = Mode.parse(mode) is Mode.NAVIER_STOKES

    def forcing(x, y, t):
        s, c = math.sin(t), math.cos(t)
        sx, sy = np.sin(PI * x), np.sin(PI * y)
        s2x, s2y = np.sin(2 * PI * x), np.sin(2 * PI * y)
        c2x, c2y = np.cos(2 * PI * x), np.cos(2 * PI * y)
        cx, cy = np.cos(PI * x), np.cos(PI * y)

        g1 = s2y * sx**2  # spatial shape of u1
        g2 = -s2x * sy**2
        lap1 = 2 * PI**2 * c2x * s2y - 4 * PI**2 * sx**2 * s2y
        lap2 = -(2 * PI**2 * c2y * s2x - 4 * PI**2 * sy**2 * s2x)
        f1 = c * g1 - nu * s * lap1 - PI * sx * sy * s
        f2 = c * g2 - nu * s * lap2 + PI * cx * cy * s
        if nonlinear:
            d1x = PI * s2x * s2y
            d1y = 2 * PI * c2y * sx**2
            d2x = -2 * PI * c2x * sy**2
            d2y = -PI * s2x * s2y
            f1 = f1 + s * s * (g1 * d1x + g2 * d1y)
            f2 = f2 + s * s * (g1 * d2x + g2 * d2y)
        return f1, f2

    return forcing


PROBLEMS = ("example1", "example2")


# ------------------------------------------------------------------ config
class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "run"
    k: int = 2
    beta: Fraction = Fraction(3)
    nu: float = 1.0
    dt: float = 0.01
    t_end: float = 1.0
    n_modes: int = 32
    mode: Mode = Mode.NAVIER_STOKES
    problem: str = "example2"
    dt_ladder: tuple = ()
    out_dir: str = "out"
    record_stride: int = 1
    snapshot_stride: int = 0
    cells: tuple = ()

    def __post_init__(self):
        try:
            object.__setattr__(self, "beta", as_fraction(self.beta))
            object.__setattr__(self, "mode", Mode.parse(self.mode))
            object.__setattr__(self, "dt_ladder", tuple(float(v) for v in self.dt_ladder))
            object.__setattr__(self, "cells", tuple(str(c).strip() for c in self.cells))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.name not in ("coeffs", "certify", "region", "run", "converge", "example1"):
            raise ConfigError(f"unknown experiment {self.name!r}")
        if self.k < 1:
            raise ConfigError("scheme.k must be >= 1")
        if self.beta < 1:
            raise ConfigError("scheme.beta must be >= 1")
        if self.nu <= 0 or self.dt <= 0 or self.t_end < 0:
            raise ConfigError("run.nu and run.dt must be positive, run.t_end nonnegative")
        if self.n_modes < 4:
            raise ConfigError("run.n_modes must be at least 4")
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.record_stride < 1 or self.snapshot_stride < 0:
            raise ConfigError("io strides must be positive")
        if self.name == "converge" or self.dt_ladder:
            ladder = self.dt_ladder
            if len(ladder) < 3:
                raise ConfigError("experiment.dt_ladder needs at least 3 entries")
            if any(not (b < a) for a, b in zip(ladder, ladder[1:])) or ladder[-1] <= 0:
                raise ConfigError("experiment.dt_ladder must be strictly decreasing and positive")
        for c in self.cells:
            Example1Cell.parse(c, self.mode)

    @property
    def example1_cells(self) -> tuple:
        if not self.cells:
            return DEFAULT_EXAMPLE1_CELLS
        return tuple(Example1Cell.parse(c, self.mode) for c in self.cells)

    @property
    def spec(self) -> SchemeSpec:
        return SchemeSpec(self.k, self.beta)


_KEYS = {
    "experiment.name": ("name", str),
    "scheme.k": ("k", int),
    "scheme.beta": ("beta", as_fraction),
    "run.nu": ("nu", float),
    "run.dt": ("dt", float),
    "run.t_end": ("t_end", float),
    "run.n_modes": ("n_modes", int),
    "run.mode": ("mode", Mode.parse),
    "run.problem": ("problem", str),
    "experiment.dt_ladder": ("dt_ladder", lambda s: tuple(float(v) for v in s.replace(";", ",").split(",") if v.strip())),
    "experiment.cells": ("cells", lambda s: tuple(c.strip() for c in s.split(";") if c.strip())),
    "io.out_dir": ("out_dir", str),
    "io.record_stride": ("record_stride", int),
    "io.snapshot_stride": ("snapshot_stride", int),
}
_ROOT = "__root__"


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse ``key = value`` text; keys are dotted (``run.dt``) or grouped in ``[run]`` sections."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_ROOT}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    raw = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            full = key if section == _ROOT else f"{section}.{key}"
            if full not in _KEYS:
                raise ConfigError(f"unknown config key {full!r}")
            raw[full] = value.strip()
    kwargs = {}
    for full, value in raw.items():
        attr, conv = _KEYS[full]
        try:
            kwargs[attr] = conv(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad value for {full}: {value!r}") from exc
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, **overrides)


def serialize_config(cfg: ExperimentConfig) -> str:
    out = io.StringIO()
    for full, (attr, _) in _KEYS.items():
        value = getattr(cfg, attr)
        if attr == "dt_ladder":
            if not value:
                continue
            text = ", ".join(repr(float(v)) for v in value)
        elif attr == "cells":
            if not value:
                continue
            text = "; ".join(value)
        elif attr == "mode":
            text = value.value
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        out.write(f"{full} = {text}\n")
    return out.getvalue()


def build_run_config(cfg: ExperimentConfig, dt: Optional[float] = None) -> RunConfig:
    """RunConfig for the configured problem; example2 gets its exact solution and forcing."""
    spec = cfg.spec
    split = make_split(spec) if spec.k in (2, 3, 4) else None
    common = dict(spec=spec, nu=cfg.nu, dt=cfg.dt if dt is None else dt, t_end=cfg.t_end, N=cfg.n_modes, mode=cfg.mode, split=split)
    if cfg.problem == "example2":
        return RunConfig(**common, exact_solution=example2_exact, forcing=example2_forcing(cfg.nu, cfg.mode))
    return RunConfig(**common, initial_velocity=example1_initial)


# ------------------------------------------------------------- slope fits
FLOOR_FACTOR = 100.0
FLOOR_ORDER_DROP = 0.5


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    used: tuple  # indices of the points entering the fit
    floor_detected: bool
    rule: str = (
        "floor present if a local order touching an error <= 100*min(e) falls below half the reference order; "
        "then only errors > 100*min(e) are fitted"
    )


def _local_orders(h: np.ndarray, e: np.ndarray) -> np.ndarray:
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


def fit_slope_detail(pairs: Sequence[tuple]) -> SlopeFit:
    """Least-squares log-log slope with automatic exclusion of an error floor."""
    pts = sorted(((float(h), float(e)) for h, e in pairs), key=lambda p: -p[0])
    idx = [i for i, (h, e) in enumerate(pts) if h > 0 and e > 0 and math.isfinite(e)]
    if len(idx) < 3:
        raise ValueError("need at least 3 usable (dt, error) points")
    h = np.array([pts[i][0] for i in idx])
    e = np.array([pts[i][1] for i in idx])
    cut = FLOOR_FACTOR * e.min()
    orders = _local_orders(h, e)
    clean = [j for j in range(orders.size) if e[j] > cut and e[j + 1] > cut]
    ref = float(np.median(orders[clean])) if clean else float(orders[0])
    floor = any(
        orders[j] < FLOOR_ORDER_DROP * ref for j in range(orders.size) if not (e[j] > cut and e[j + 1] > cut)
    )
    keep = np.flatnonzero(e > cut) if floor else np.arange(e.size)
    if keep.size < 3:
        raise ValueError("fewer than 3 pre-floor points")
    slope = float(np.polyfit(np.log(h[keep]), np.log(e[keep]), 1)[0])
    return SlopeFit(slope, tuple(int(idx[i]) for i in keep), bool(floor))


def fit_slope(pairs: Sequence[tuple]) -> float:
    return fit_slope_detail(pairs).slope


# ------------------------------------------------------------ convergence
@dataclass
class ConvergenceRow:
    dt: float
    err_u: float
    err_p: float
    div: float
    diverged: bool = False


@dataclass
class ConvergenceReport:
    spec: SchemeSpec
    rows: list
    fits: dict
    expected_order: int
    checks: dict = field(default_factory=dict)

    @property
    def slopes(self) -> dict:
        return {key: (fit.slope if fit is not None else float("nan")) for key, fit in self.fits.items()}

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(self.checks.values())

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("dt,err_u_L2,err_p_L2,div_norm,diverged\n")
            for r in self.rows:
                fh.write(f"{r.dt!r},{r.err_u!r},{r.err_p!r},{r.div!r},{int(r.diverged)}\n")

    def summary(self) -> dict:
        return {
            "k": self.spec.k,
            "beta": str(self.spec.beta),
            "expected_order": self.expected_order,
            "slopes": self.slopes,
            "segments": {key: (list(f.used) if f else None) for key, f in self.fits.items()},
            "floor_detected": {key: (f.floor_detected if f else None) for key, f in self.fits.items()},
            "checks": self.checks,
            "passed": self.passed,
            "fit_rule": SlopeFit.rule,
        }


def convergence_checks(fits: dict, k: int) -> dict:
    def ok(key, lo, hi=math.inf):
        f = fits.get(key)
        return f is not None and lo <= f.slope <= hi

    return {
        "velocity_slope": ok("velocity", k - 0.3, k + 0.5),
        "pressure_slope": ok("pressure", k - 0.5),
        "divergence_slope": ok("divergence", k - 0.5),
    }


def run_convergence(cfg: ExperimentConfig, ladder: Optional[Sequence[float]] = None) -> ConvergenceReport:
    """Run the manufactured problem over the dt ladder and fit observed orders at ``t_end``."""
    ladder = tuple(cfg.dt_ladder if ladder is None else ladder)
    if len(ladder) < 3 or any(not (b < a) for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("dt ladder must be strictly decreasing with at least 3 entries")
    if cfg.problem != "example2":
        raise ConfigError("convergence runs need the manufactured problem (run.problem = example2)")
    rows = []
    for dt in ladder:
        rc = build_run_config(cfg, dt)
        res = run(rc, stride=rc.n_steps + 1)
        if not res.stable or not res.records:
            rows.append(ConvergenceRow(dt, math.inf, math.inf, math.inf, True))
            continue
        last = res.records[-1]
        rows.append(ConvergenceRow(dt, last.err_u, last.err_p, last.div_norm, False))
    good = [i for i, r in enumerate(rows) if not r.diverged]
    fits = {}
    for key, attr in (("velocity", "err_u"), ("pressure", "err_p"), ("divergence", "div")):
        try:
            fit = fit_slope_detail([(rows[i].dt, getattr(rows[i], attr)) for i in good])
        except ValueError:
            fits[key] = None
            continue
        # report fitted points as indices into the full ladder
        fits[key] = replace(fit, used=tuple(good[j] for j in fit.used))
    k = cfg.k
    return ConvergenceReport(cfg.spec, rows, fits, k, convergence_checks(fits, k))


# --------------------------------------------------------------- example 1
@dataclass(frozen=True)
class Example1Cell:
    k: int
    beta: Fraction
    dt: float
    t_end: float
    expect: str  # "blowup" or "stable"
    mode: Mode = Mode.STOKES

    @property
    def label(self) -> str:
        beta = str(self.beta).replace("/", "_")
        return f"{self.mode.value}_k{self.k}_b{beta}_dt{self.dt:g}"

    @classmethod
    def parse(cls, text: str, default_mode=Mode.STOKES) -> "Example1Cell":
        parts = [p.strip() for p in text.split(":")]
        if len(parts) not in (5, 6):
            raise ConfigError(f"cell {text!r} must be k:beta:dt:t_end:expect[:mode]")
        try:
            mode = Mode.parse(parts[5]) if len(parts) == 6 else Mode.parse(default_mode)
            cell = cls(int(parts[0]), as_fraction(parts[1]), float(parts[2]), float(parts[3]), parts[4], mode)
        except ValueError as exc:
            raise ConfigError(f"bad cell {text!r}: {exc}") from exc
        if cell.expect not in ("blowup", "stable"):
            raise ConfigError(f"cell expectation must be blowup or stable, got {cell.expect!r}")
        return cell


DEFAULT_EXAMPLE1_CELLS = (
    Example1Cell(3, Fraction(1), 5e-4, 2.0, "blowup"),
    Example1Cell(4, Fraction(1), 2e-4, 2.0, "blowup"),
    Example1Cell(3, Fraction(6), 0.05, 5.0, "stable"),
    Example1Cell(4, Fraction(9), 0.05, 5.0, "stable"),
)


@dataclass
class Example1Outcome:
    cell: Example1Cell
    result: RunResult
    initial_energy: float
    max_energy: float
    final_energy: float
    passed: bool

    @property
    def verdict(self) -> str:
        b = self.result.blowup
        return "stable" if b is None else f"blowup(step={b.step}, t={b.time:.6g})"


def initial_energy(N: int) -> float:
    disc = get_discretization(N)
    return disc.energy(disc.project_velocity(example1_initial))


def evaluate_example1(cell: Example1Cell, result: RunResult, e0: float) -> Example1Outcome:
    """Blowup cells must blow up before ``t_end``; stable cells must stay below ``2 e0`` and end below ``e0``."""
    energies = [r.energy for r in result.records]
    emax = max(energies) if energies else math.nan
    efin = energies[-1] if energies else math.nan
    if cell.expect == "blowup":
        passed = result.blowup is not None and result.blowup.time < cell.t_end
    else:
        passed = result.blowup is None and emax <= 2.0 * e0 and efin < e0
    return Example1Outcome(cell, result, e0, emax, efin, bool(passed))


def run_example1(
    cells: Sequence[Example1Cell] = DEFAULT_EXAMPLE1_CELLS,
    N: int = 64,
    nu: float = 0.005,
    out_dir: Optional[str] = None,
    record_every: float = 0.01,
) -> list:
    """Run every cell on the vortex initial data; write one time-series CSV per cell."""
    outcomes = []
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    for cell in cells:
        spec = SchemeSpec(cell.k, cell.beta)
        rc = RunConfig(spec, nu=nu, dt=cell.dt, t_end=cell.t_end, N=N, mode=cell.mode, initial_velocity=example1_initial)
        stride = max(1, int(round(record_every / cell.dt)))
        res = run(rc, stride=stride)
        outcome = evaluate_example1(cell, res, initial_energy(N))
        outcomes.append(outcome)
        if out_dir is not None:
            write_timeseries(os.path.join(out_dir, f"{cell.label}.csv"), res)
    return outcomes
