"""Time integration of the consistent splitting schemes.

One step from level ``n`` to ``n+1`` (``k`` = order, levels oldest first):

1. momentum, each velocity component independently::

       A(u^{n+1})/dt - nu Lap B(u^{n+1}) + grad C(p^n) [+ C(u^n).grad C(u^n)] = f(t^{n+beta})

   solved as a Helmholtz problem for ``u^{n+1}`` with
   ``alpha = a[k]/dt`` and diffusion weight ``nu * b[k-1]``;
2. pressure, weak Neumann Poisson problem::

       (grad p^{n+1}, grad q) = (f(t^{n+1}) [- u^{n+1}.grad u^{n+1}] - nu curl curl u^{n+1}, grad q)

The bracketed terms are present only in Navier-Stokes mode.
"""

from __future__ import annotations

import enum
import logging
import math
import time as _time
from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterator, Optional

import numpy as np

from .spectral import (
    PRESSURE,
    VELOCITY,
    Field2D,
    LegendreGalerkin2D,
    PressureField,
    VelocityField,
    get_discretization,
    mean_zero,
)
from .splitting import SplitSet
from .stencil import SchemeSpec, StencilSet, make_stencils

log = logging.getLogger(__name__)

# forcing(x, y, t) -> (f1, f2); exact_solution(x, y, t) -> (u1, u2, p); initial_velocity(x, y) -> (u1, u2)
Forcing = Callable[[np.ndarray, np.ndarray, float], tuple]
ExactSolution = Callable[[np.ndarray, np.ndarray, float], tuple]
InitialVelocity = Callable[[np.ndarray, np.ndarray], tuple]

BLOWUP_THRESHOLD = 1e12
MIN_SPINUP_STEP = 1e-8
SPINUP_SPEC = SchemeSpec(2, 3)
STARTER_SPEC = SchemeSpec(1, 1)


class Mode(str, enum.Enum):
    STOKES = "stokes"
    NAVIER_STOKES = "navier-stokes"

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        v = str(value).strip().lower().replace("_", "-")
        aliases = {"ns": cls.NAVIER_STOKES, "nse": cls.NAVIER_STOKES, "navierstokes": cls.NAVIER_STOKES}
        if v in aliases:
            return aliases[v]
        return cls(v)


class BlowupError(RuntimeError):
    """Raised when a norm exceeds the blowup threshold or becomes non-finite."""

    def __init__(self, step: int, time: float, norm: float):
        super().__init__(f"blowup at step {step} (t={time:g}): |u| = {norm:g}")
        self.step = step
        self.time = time
        self.norm = norm


@dataclass(frozen=True)
class Blowup:
    step: int
    time: float
    norm: float


@dataclass(frozen=True)
class RunConfig:
    spec: SchemeSpec
    nu: float
    dt: float
    t_end: float
    N: int
    mode: Mode = Mode.STOKES
    split: Optional[SplitSet] = None
    forcing: Optional[Forcing] = None
    exact_solution: Optional[ExactSolution] = None
    initial_velocity: Optional[InitialVelocity] = None
    blowup_threshold: float = BLOWUP_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if self.nu <= 0:
            raise ValueError("viscosity must be positive")
        if self.dt <= 0:
            raise ValueError("time step must be positive")
        if self.t_end < 0:
            raise ValueError("final time must be nonnegative")
        if self.exact_solution is None and self.initial_velocity is None:
            raise ValueError("need an exact solution or an initial velocity")

    @property
    def n_steps(self) -> int:
        """Number of steps so that ``n_steps * dt`` covers ``t_end`` within one step."""
        return max(0, math.ceil(self.t_end / self.dt - 1e-9))

    @property
    def stencils(self) -> StencilSet:
        return _stencils(self.spec)


@lru_cache(maxsize=64)
def _stencils(spec: SchemeSpec) -> StencilSet:
    return make_stencils(spec)


@dataclass
class StepperState:
    u: deque  # VelocityField levels n-k+1 .. n, oldest first
    p: deque  # PressureField levels n-k+1 .. n
    n: int
    t: float
    N: int
    wall_time: float = 0.0

    @property
    def k(self) -> int:
        return len(self.u)

    @property
    def velocity(self) -> VelocityField:
        return self.u[-1]

    @property
    def pressure(self) -> PressureField:
        return self.p[-1]

    def copy(self) -> "StepperState":
        return replace(self, u=deque(self.u, maxlen=self.u.maxlen), p=deque(self.p, maxlen=self.p.maxlen))


@dataclass(frozen=True)
class StepDiagnostics:
    energy: float
    div_norm: float
    grad_p_norm: float
    wall_time: float
    blowup: bool = False


# ----------------------------------------------------------------- helpers
def _project_vector(disc: LegendreGalerkin2D, func, t: float, space: str) -> tuple[Field2D, Field2D]:
    f1, f2 = func(disc.X, disc.Y, t)
    shape = disc.X.shape
    f1 = np.broadcast_to(np.asarray(f1, float), shape)
    f2 = np.broadcast_to(np.asarray(f2, float), shape)
    return disc.to_coeffs(f1, space), disc.to_coeffs(f2, space)


def _combine_velocity(weights, fields) -> VelocityField:
    c1 = sum(float(w) * f.u1.coeffs for w, f in zip(weights, fields))
    c2 = sum(float(w) * f.u2.coeffs for w, f in zip(weights, fields))
    return VelocityField(Field2D(c1, VELOCITY), Field2D(c2, VELOCITY))


def _combine_pressure(weights, fields) -> Field2D:
    return Field2D(sum(float(w) * f.p.coeffs for w, f in zip(weights, fields)), PRESSURE)


def velocity_norm(disc: LegendreGalerkin2D, u: VelocityField) -> float:
    return math.sqrt(2.0 * disc.energy(u))


def solve_pressure(disc: LegendreGalerkin2D, cfg: RunConfig, u: VelocityField, t: float) -> PressureField:
    """Pressure from ``(grad p, grad q) = (f(t) - N(u) - nu curl curl u, grad q)``."""
    c1, c2 = disc.curlcurl(u)
    g1 = -cfg.nu * c1.coeffs
    g2 = -cfg.nu * c2.coeffs
    if cfg.mode is Mode.NAVIER_STOKES:
        n1, n2 = disc.nonlinear_term(u)
        g1 = g1 - n1.coeffs
        g2 = g2 - n2.coeffs
    if cfg.forcing is not None:
        f1, f2 = _project_vector(disc, cfg.forcing, t, PRESSURE)
        g1 = g1 + f1.coeffs
        g2 = g2 + f2.coeffs
    return disc.pressure_poisson((Field2D(g1, PRESSURE), Field2D(g2, PRESSURE)))


def _advance(
    disc: LegendreGalerkin2D,
    cfg: RunConfig,
    st: StencilSet,
    u_hist,
    p_hist,
    n: int,
    dt: float,
) -> tuple[VelocityField, PressureField]:
    """Compute ``(u^{n+1}, p^{n+1})`` from ``k`` stored levels with time step ``dt``."""
    k = st.k
    a = [float(x) for x in st.a]
    b = [float(x) for x in st.b]
    t_new = (n + 1) * dt
    t_beta = (n + float(st.spec.beta)) * dt

    known_a = _combine_velocity(a[:k], u_hist)
    cp = _combine_pressure(st.c, p_hist)
    gpx, gpy = disc.grad(cp)

    r1 = -disc.to_full(known_a.u1) / dt - gpx.coeffs
    r2 = -disc.to_full(known_a.u2) / dt - gpy.coeffs
    if k > 1:
        known_b = _combine_velocity(b[: k - 1], list(u_hist)[1:])
        r1 = r1 + cfg.nu * disc.laplacian(known_b.u1).coeffs
        r2 = r2 + cfg.nu * disc.laplacian(known_b.u2).coeffs
    if cfg.mode is Mode.NAVIER_STOKES:
        cu = _combine_velocity(st.c, u_hist)
        n1, n2 = disc.nonlinear_term(cu)
        r1 = r1 - n1.coeffs
        r2 = r2 - n2.coeffs
    if cfg.forcing is not None:
        f1, f2 = _project_vector(disc, cfg.forcing, t_beta, PRESSURE)
        r1 = r1 + f1.coeffs
        r2 = r2 + f2.coeffs

    alpha = a[k] / dt
    nu_b = cfg.nu * b[k - 1]
    u1 = disc.helmholtz_solve(alpha, nu_b, Field2D(r1, PRESSURE))
    u2 = disc.helmholtz_solve(alpha, nu_b, Field2D(r2, PRESSURE))
    u_new = VelocityField(u1, u2)
    p_new = solve_pressure(disc, cfg, u_new, t_new)
    return u_new, p_new


def _check_blowup(disc, cfg: RunConfig, u: VelocityField, step: int, t: float) -> None:
    norm = velocity_norm(disc, u) if u.is_finite() else math.inf
    if not math.isfinite(norm) or norm > cfg.blowup_threshold:
        raise BlowupError(step, t, norm)


# ----------------------------------------------------------------- spin-up
def exact_levels(cfg: RunConfig, times) -> list[tuple[VelocityField, PressureField]]:
    disc = get_discretization(cfg.N)
    out = []
    for t in times:
        u1, u2, p = cfg.exact_solution(disc.X, disc.Y, t)
        vel = VelocityField(disc.to_coeffs(u1, VELOCITY), disc.to_coeffs(u2, VELOCITY))
        out.append((vel, PressureField(mean_zero(disc.to_coeffs(p, PRESSURE)))))
    return out


def spinup_substeps(dt: float) -> int:
    """Substeps per macro step: ``dt_sub = dt/m ~ max(dt**2, 1e-8)``."""
    target = max(dt * dt, MIN_SPINUP_STEP)
    return max(1, round(dt / target))


def spin_up(cfg: RunConfig, substeps: Optional[int] = None) -> StepperState:
    """Levels ``0 .. k-1`` for a ``k``-step run.

    With an exact solution the levels are sampled from it. Otherwise the
    initial velocity is advanced by the (k=2, beta=3) scheme with step
    ``dt_sub`` (started by one backward Euler step), and every pressure
    level comes from the pressure equation.
    """
    disc = get_discretization(cfg.N)
    k = cfg.spec.k
    if cfg.exact_solution is not None:
        levels = exact_levels(cfg, [i * cfg.dt for i in range(k)])
        return StepperState(
            u=deque((v for v, _ in levels), maxlen=k),
            p=deque((p for _, p in levels), maxlen=k),
            n=k - 1,
            t=(k - 1) * cfg.dt,
            N=cfg.N,
        )

    u0 = disc.project_velocity(cfg.initial_velocity)
    p0 = solve_pressure(disc, cfg, u0, 0.0)
    us, ps = [u0], [p0]
    if k > 1:
        m = spinup_substeps(cfg.dt) if substeps is None else int(substeps)
        dt_sub = cfg.dt / m
        sub_u = deque([u0], maxlen=2)
        sub_p = deque([p0], maxlen=2)
        for j in range(m * (k - 1)):
            st = _stencils(STARTER_SPEC) if j == 0 else _stencils(SPINUP_SPEC)
            hist_u = list(sub_u)[-st.k:]
            hist_p = list(sub_p)[-st.k:]
            u_new, p_new = _advance(disc, cfg, st, hist_u, hist_p, j, dt_sub)
            _check_blowup(disc, cfg, u_new, 0, (j + 1) * dt_sub)
            sub_u.append(u_new)
            sub_p.append(p_new)
            if (j + 1) % m == 0:
                us.append(u_new)
                ps.append(p_new)
    return StepperState(u=deque(us, maxlen=k), p=deque(ps, maxlen=k), n=k - 1, t=(k - 1) * cfg.dt, N=cfg.N)


# ------------------------------------------------------------------- steps
def _step(state: StepperState, cfg: RunConfig) -> StepperState:
    disc = get_discretization(cfg.N)
    st = cfg.stencils
    if state.k != st.k:
        raise ValueError(f"state holds {state.k} levels, scheme needs {st.k}")
    tic = _time.perf_counter()
    u_new, p_new = _advance(disc, cfg, st, state.u, state.p, state.n, cfg.dt)
    n = state.n + 1
    _check_blowup(disc, cfg, u_new, n, n * cfg.dt)
    new = state.copy()
    new.u.append(u_new)
    new.p.append(p_new)
    new.n = n
    new.t = n * cfg.dt
    new.wall_time = _time.perf_counter() - tic
    return new


def stokes_step(state: StepperState, cfg: RunConfig) -> StepperState:
    if cfg.mode is not Mode.STOKES:
        raise ValueError("stokes_step requires Stokes mode")
    return _step(state, cfg)


def nse_step(state: StepperState, cfg: RunConfig) -> StepperState:
    if cfg.mode is not Mode.NAVIER_STOKES:
        raise ValueError("nse_step requires Navier-Stokes mode")
    if cfg.forcing is not None and not callable(cfg.forcing):
        raise TypeError("forcing must be a callable of (x, y, t)")
    return _step(state, cfg)


def step(state: StepperState, cfg: RunConfig) -> StepperState:
    return stokes_step(state, cfg) if cfg.mode is Mode.STOKES else nse_step(state, cfg)


def diagnostics(state: StepperState) -> StepDiagnostics:
    disc = get_discretization(state.N)
    u, p = state.velocity, state.pressure
    if not (u.is_finite() and p.is_finite()):
        nan = float("nan")
        return StepDiagnostics(nan, nan, nan, state.wall_time, blowup=True)
    gx, gy = disc.grad(p)
    return StepDiagnostics(
        energy=disc.energy(u),
        div_norm=disc.norm(disc.div(u)),
        grad_p_norm=disc.vector_norm((gx, gy)),
        wall_time=state.wall_time,
    )


def solution_errors(state: StepperState, cfg: RunConfig) -> tuple[float, float]:
    """L2 errors of velocity and of mean-zero pressure against the exact solution."""
    disc = get_discretization(cfg.N)
    u1, u2, p = cfg.exact_solution(disc.X, disc.Y, state.t)
    shape = disc.X.shape
    e1 = disc.to_nodes(state.velocity.u1) - np.broadcast_to(u1, shape)
    e2 = disc.to_nodes(state.velocity.u2) - np.broadcast_to(u2, shape)
    p_exact = np.broadcast_to(np.asarray(p, float), shape)
    p_exact = p_exact - disc.integrate(p_exact) / 4.0
    ep = disc.to_nodes(state.pressure.p) - p_exact
    return math.sqrt(disc.integrate(e1 * e1 + e2 * e2)), math.sqrt(disc.integrate(ep * ep))


# --------------------------------------------------------------------- runs
@dataclass
class RunRecord:
    step: int
    time: float
    energy: float
    div_norm: float
    grad_p_norm: float
    err_u: Optional[float] = None
    err_p: Optional[float] = None


@dataclass
class RunResult:
    records: list = field(default_factory=list)
    state: Optional[StepperState] = None
    blowup: Optional[Blowup] = None

    @property
    def stable(self) -> bool:
        return self.blowup is None


def _record(state: StepperState, cfg: RunConfig) -> RunRecord:
    d = diagnostics(state)
    rec = RunRecord(state.n, state.t, d.energy, d.div_norm, d.grad_p_norm)
    if cfg.exact_solution is not None:
        rec.err_u, rec.err_p = solution_errors(state, cfg)
    return rec


def iterate(cfg: RunConfig, state: Optional[StepperState] = None) -> Iterator[StepperState]:
    """Yield the spun-up state and then every subsequent state up to ``t_end``."""
    state = spin_up(cfg) if state is None else state
    yield state
    while state.n < cfg.n_steps:
        state = step(state, cfg)
        yield state


def run(cfg: RunConfig, stride: int = 1, callback=None) -> RunResult:
    """Run to ``t_end``; a blowup ends the run with a :class:`Blowup` record instead of raising."""
    result = RunResult()
    state = None
    try:
        for state in iterate(cfg):
            if callback is not None:
                callback(state)
            if state.n % stride == 0 or state.n == cfg.n_steps:
                result.records.append(_record(state, cfg))
    except BlowupError as exc:
        log.info("%s", exc)
        result.blowup = Blowup(exc.step, exc.time, exc.norm)
    result.state = state
    return result


def write_timeseries(path, result: RunResult) -> None:
    with_err = any(r.err_u is not None for r in result.records)
    cols = ["step", "time", "energy", "div_norm", "grad_p_norm"]
    if with_err:
        cols += ["err_u_L2", "err_p_L2"]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for r in result.records:
            vals = [str(r.step), repr(r.time), repr(r.energy), repr(r.div_norm), repr(r.grad_p_norm)]
            if with_err:
                vals += [repr(r.err_u), repr(r.err_p)]
            fh.write(",".join(vals) + "\n")
