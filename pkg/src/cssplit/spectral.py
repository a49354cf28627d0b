"""Legendre-Galerkin discretization on the square (-1, 1)^2.

``N`` is the polynomial degree per direction.

* Pressure (and generic "full") space: tensor Legendre polynomials
  ``L_i(x) L_j(y)``, ``0 <= i, j <= N``; coefficient arrays are (N+1, N+1).
* Velocity space: ``phi_j = L_j - L_{j+2}``, ``0 <= j <= N-2``, the degree-N
  polynomials vanishing at +-1; coefficient arrays are (N-1, N-1).

Coefficient array axis 0 is x, axis 1 is y. Derivatives of either space are
represented exactly in the full space, so every differential operator
returns a full-space :class:`Field2D`.

All quadrature uses ``M = ceil(3N/2) + 2`` Legendre-Gauss-Lobatto points per
direction, which integrates degree ``2M - 3 >= 3N + 1`` exactly: mass and
stiffness forms are exact, and the quadratic nonlinearity is projected
without aliasing.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Union

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import linalg, special

VELOCITY = "velocity"
PRESSURE = "pressure"
_SPACES = (VELOCITY, PRESSURE)

SNAPSHOT_MAGIC = b"CSSF"
_SNAPSHOT_HEADER = struct.Struct("<4siiid")
_SPACE_CODES = {VELOCITY: 0, PRESSURE: 1}


def lgl_nodes_weights(m: int) -> tuple[np.ndarray, np.ndarray]:
    """``m`` Legendre-Gauss-Lobatto nodes (ascending) and weights on [-1, 1]."""
    if m < 2:
        raise ValueError("need at least two Lobatto points")
    n = m - 1
    interior = special.roots_jacobi(n - 1, 1.0, 1.0)[0] if n > 1 else np.empty(0)
    x = np.concatenate(([-1.0], np.sort(interior), [1.0]))
    # polish the interior nodes as roots of P_n'
    for _ in range(2):
        p = npleg.legval(x[1:-1], npleg.legder([0] * n + [1]))
        dp = npleg.legval(x[1:-1], npleg.legder([0] * n + [1], 2))
        x[1:-1] -= p / dp
    w = 2.0 / (n * (n + 1) * special.eval_legendre(n, x) ** 2)
    return x, w


def legendre_derivative_matrix(n: int) -> np.ndarray:
    """Exact matrix ``D`` with ``L_j' = sum_i D[i, j] L_i`` for degrees 0..n."""
    d = np.zeros((n + 1, n + 1))
    for j in range(1, n + 1):
        for i in range(j - 1, -1, -2):
            d[i, j] = 2 * i + 1
    return d


@dataclass(frozen=True)
class Field2D:
    """Tensor-product coefficients of one scalar field."""

    coeffs: np.ndarray
    space: str

    def __post_init__(self):
        if self.space not in _SPACES:
            raise ValueError(f"unknown space tag {self.space!r}")
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("coefficient array must be square")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        n = self.coeffs.shape[0]
        return n + 1 if self.space == VELOCITY else n - 1

    def _check(self, other: "Field2D") -> None:
        if not isinstance(other, Field2D) or other.space != self.space:
            raise ValueError("fields live in different spaces")

    def __add__(self, other: "Field2D") -> "Field2D":
        self._check(other)
        return Field2D(self.coeffs + other.coeffs, self.space)

    def __sub__(self, other: "Field2D") -> "Field2D":
        self._check(other)
        return Field2D(self.coeffs - other.coeffs, self.space)

    def __mul__(self, scalar: float) -> "Field2D":
        return Field2D(self.coeffs * float(scalar), self.space)

    __rmul__ = __mul__

    def __neg__(self) -> "Field2D":
        return Field2D(-self.coeffs, self.space)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))


@dataclass(frozen=True)
class VelocityField:
    """Two velocity components in the homogeneous Dirichlet space."""

    u1: Field2D
    u2: Field2D

    def __post_init__(self):
        if self.u1.space != VELOCITY or self.u2.space != VELOCITY:
            raise ValueError("velocity components must be in the velocity space")

    def __add__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar: float) -> "VelocityField":
        return VelocityField(self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__

    def is_finite(self) -> bool:
        return self.u1.is_finite() and self.u2.is_finite()


@dataclass(frozen=True)
class PressureField:
    """Mean-zero pressure in the full Legendre space."""

    p: Field2D

    def __post_init__(self):
        if self.p.space != PRESSURE:
            raise ValueError("pressure must be in the pressure space")

    def __add__(self, other: "PressureField") -> "PressureField":
        return PressureField(self.p + other.p)

    def __mul__(self, scalar: float) -> "PressureField":
        return PressureField(self.p * scalar)

    __rmul__ = __mul__

    def is_finite(self) -> bool:
        return self.p.is_finite()


NodeFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
FieldLike = Union[Field2D, np.ndarray]


class LegendreGalerkin2D:
    """Bases, transforms, differential operators and elliptic solvers for degree ``N``.

    Instances are immutable after construction; use :func:`get_discretization`
    to share one per ``N``.
    """

    def __init__(self, n: int):
        if n < 2:
            raise ValueError("polynomial degree N must be >= 2")
        self.N = n
        self.M = math.ceil(3 * n / 2) + 2
        self.x, self.w = lgl_nodes_weights(self.M)

        # full Legendre space
        self.mass_p = 2.0 / (2.0 * np.arange(n + 1) + 1.0)
        self.D = legendre_derivative_matrix(n)
        self.D2 = self.D @ self.D
        self.Vp = npleg.legvander(self.x, n)
        self.Vp1 = self.Vp @ self.D

        # Dirichlet space as a composite of Legendre polynomials
        comp = np.zeros((n + 1, n - 1))
        idx = np.arange(n - 1)
        comp[idx, idx] = 1.0
        comp[idx + 2, idx] = -1.0
        self.composite = comp
        self.Vv = self.Vp @ comp
        self.Vv1 = self.Vp1 @ comp

        w = self.w[:, None]
        self.mass_v = self.Vv.T @ (w * self.Vv)
        self.stiff_v = self.Vv1.T @ (w * self.Vv1)
        self.stiff_p = self.Vp1.T @ (w * self.Vp1)
        # (L_a, phi_i) and (L_a, L_i')
        self.T = self.mass_p[:, None] * comp
        self.E = self.mass_p[:, None] * self.D

        self.proj_p = (self.Vp * w).T / self.mass_p[:, None]
        self.proj_v = linalg.solve(self.mass_v, (self.Vv * w).T, assume_a="pos")

        self.lam_v, self.Q_v = linalg.eigh(self.stiff_v, self.mass_v)
        self.lam_p, self.Q_p = linalg.eigh(self.stiff_p, np.diag(self.mass_p))
        scale = max(1.0, float(np.max(np.abs(self.lam_p))))
        null = np.flatnonzero(np.abs(self.lam_p) <= 1e-10 * scale)
        if null.size != 1:
            raise np.linalg.LinAlgError(
                f"pressure stiffness has {null.size} near-zero modes, expected exactly one"
            )
        self._null_p = int(null[0])
        self._lam_sum_p = self.lam_p[:, None] + self.lam_p[None, :]
        self._lam_sum_p[self._null_p, self._null_p] = 1.0

        self.X, self.Y = np.meshgrid(self.x, self.x, indexing="ij")
        self.W2 = np.outer(self.w, self.w)

    # ------------------------------------------------------------------ spaces
    def zero(self, space: str) -> Field2D:
        size = self.N - 1 if space == VELOCITY else self.N + 1
        return Field2D(np.zeros((size, size)), space)

    def zero_velocity(self) -> VelocityField:
        return VelocityField(self.zero(VELOCITY), self.zero(VELOCITY))

    def zero_pressure(self) -> PressureField:
        return PressureField(self.zero(PRESSURE))

    def _expect(self, f: Field2D) -> None:
        size = self.N - 1 if f.space == VELOCITY else self.N + 1
        if f.coeffs.shape != (size, size):
            raise ValueError(f"{f.space} field of shape {f.coeffs.shape} does not match N={self.N}")

    def to_full(self, f: Field2D) -> np.ndarray:
        """Legendre coefficients of ``f`` (exact embedding for velocity fields)."""
        self._expect(f)
        if f.space == PRESSURE:
            return f.coeffs
        c = self.composite
        return c @ f.coeffs @ c.T

    # -------------------------------------------------------------- transforms
    def to_nodes(self, f: Field2D) -> np.ndarray:
        """Values of ``f`` on the M x M Lobatto grid (``indexing='ij'``)."""
        self._expect(f)
        v = self.Vv if f.space == VELOCITY else self.Vp
        return v @ f.coeffs @ v.T

    def to_coeffs(self, grid: np.ndarray, space: str) -> Field2D:
        """Discrete L2 projection of node values onto ``space``."""
        grid = np.asarray(grid, dtype=float)
        if grid.shape != (self.M, self.M):
            raise ValueError(f"node grid must be {self.M}x{self.M}, got {grid.shape}")
        if space == VELOCITY:
            return Field2D(self.proj_v @ grid @ self.proj_v.T, VELOCITY)
        if space == PRESSURE:
            return Field2D(self.proj_p @ grid @ self.proj_p.T, PRESSURE)
        raise ValueError(f"unknown space tag {space!r}")

    def project(self, func: NodeFunction, space: str) -> Field2D:
        return self.to_coeffs(func(self.X, self.Y), space)

    def project_velocity(self, func: Callable) -> VelocityField:
        u1, u2 = func(self.X, self.Y)
        return VelocityField(self.to_coeffs(u1, VELOCITY), self.to_coeffs(u2, VELOCITY))

    def project_pressure(self, func: NodeFunction) -> PressureField:
        return PressureField(mean_zero(self.project(func, PRESSURE)))

    def evaluate(self, f: Field2D, x, y) -> np.ndarray:
        """Point values of ``f`` at arbitrary (broadcastable) ``x``, ``y``."""
        c = self.to_full(f)
        return npleg.legval2d(np.asarray(x, float), np.asarray(y, float), c)

    # --------------------------------------------------------------- operators
    def dx(self, f: Field2D) -> Field2D:
        return Field2D(self.D @ self.to_full(f), PRESSURE)

    def dy(self, f: Field2D) -> Field2D:
        return Field2D(self.to_full(f) @ self.D.T, PRESSURE)

    def laplacian(self, f: Field2D) -> Field2D:
        c = self.to_full(f)
        return Field2D(self.D2 @ c + c @ self.D2.T, PRESSURE)

    def grad(self, p: Union[Field2D, PressureField]) -> tuple[Field2D, Field2D]:
        p = p.p if isinstance(p, PressureField) else p
        c = self.to_full(p)
        return Field2D(self.D @ c, PRESSURE), Field2D(c @ self.D.T, PRESSURE)

    def div(self, u: VelocityField) -> Field2D:
        return Field2D(self.D @ self.to_full(u.u1) + self.to_full(u.u2) @ self.D.T, PRESSURE)

    def vorticity(self, u: VelocityField) -> Field2D:
        return Field2D(self.D @ self.to_full(u.u2) - self.to_full(u.u1) @ self.D.T, PRESSURE)

    def curlcurl(self, u: VelocityField) -> tuple[Field2D, Field2D]:
        """``curl curl u = (d_y w, -d_x w)`` with ``w = d_x u2 - d_y u1``."""
        w = self.vorticity(u).coeffs
        return Field2D(w @ self.D.T, PRESSURE), Field2D(-(self.D @ w), PRESSURE)

    def nonlinear_term(self, u: VelocityField) -> tuple[Field2D, Field2D]:
        """L2 projection of ``(u . grad) u`` onto the full space, products taken at nodes."""
        vv, vv1 = self.Vv, self.Vv1
        c1, c2 = u.u1.coeffs, u.u2.coeffs
        u1 = vv @ c1 @ vv.T
        u2 = vv @ c2 @ vv.T
        n1 = u1 * (vv1 @ c1 @ vv.T) + u2 * (vv @ c1 @ vv1.T)
        n2 = u1 * (vv1 @ c2 @ vv.T) + u2 * (vv @ c2 @ vv1.T)
        pp = self.proj_p
        return Field2D(pp @ n1 @ pp.T, PRESSURE), Field2D(pp @ n2 @ pp.T, PRESSURE)

    # --------------------------------------------------------- weak forms / solvers
    def load_velocity(self, rhs: Field2D) -> np.ndarray:
        """``(rhs, phi_i phi_j)`` for every velocity basis function."""
        return self.T.T @ self.to_full(rhs) @ self.T

    def apply_helmholtz(self, alpha: float, nu_b: float, u: Field2D) -> np.ndarray:
        """Weak Helmholtz operator ``alpha (u, v) + nu_b (grad u, grad v)`` as a load array."""
        if u.space != VELOCITY:
            raise ValueError("Helmholtz operator acts on the velocity space")
        mv, sv, c = self.mass_v, self.stiff_v, u.coeffs
        return alpha * (mv @ c @ mv) + nu_b * (sv @ c @ mv + mv @ c @ sv)

    def solve_helmholtz_load(self, alpha: float, nu_b: float, load: np.ndarray) -> Field2D:
        if alpha < 0 or nu_b < 0 or (alpha == 0 and nu_b == 0):
            raise ValueError(f"singular or indefinite Helmholtz problem (alpha={alpha}, nu*b={nu_b})")
        q = self.Q_v
        lam = self.lam_v
        tilde = (q.T @ load @ q) / (alpha + nu_b * (lam[:, None] + lam[None, :]))
        return Field2D(q @ tilde @ q.T, VELOCITY)

    def helmholtz_solve(self, alpha: float, nu_b: float, rhs: Field2D) -> Field2D:
        """Solve ``alpha (u, v) + nu_b (grad u, grad v) = (rhs, v)`` over the Dirichlet space."""
        return self.solve_helmholtz_load(alpha, nu_b, self.load_velocity(rhs))

    def pressure_load(self, g1: Field2D, g2: Field2D) -> np.ndarray:
        """``(g, grad q)`` for every pressure basis function ``q``."""
        mp = self.mass_p
        return self.E.T @ self.to_full(g1) * mp[None, :] + (mp[:, None] * self.to_full(g2)) @ self.E

    def apply_pressure_stiffness(self, p: Field2D) -> np.ndarray:
        c, k, mp = self.to_full(p), self.stiff_p, self.mass_p
        return k @ c * mp[None, :] + (mp[:, None] * c) @ k

    def pressure_poisson(self, gvec: tuple[Field2D, Field2D]) -> PressureField:
        """Mean-zero ``p`` with ``(grad p, grad q) = (g, grad q)`` for every ``q``."""
        g1, g2 = gvec
        load = self.pressure_load(g1, g2)
        q = self.Q_p
        tilde = (q.T @ load @ q) / self._lam_sum_p
        tilde[self._null_p, self._null_p] = 0.0
        return PressureField(mean_zero(Field2D(q @ tilde @ q.T, PRESSURE)))

    # ------------------------------------------------------------ integrals
    def integrate(self, grid: np.ndarray) -> float:
        return float(np.sum(self.W2 * grid))

    def inner(self, f: FieldLike, g: FieldLike) -> float:
        fa = self.to_nodes(f) if isinstance(f, Field2D) else f
        ga = self.to_nodes(g) if isinstance(g, Field2D) else g
        return self.integrate(fa * ga)

    def norm(self, f: FieldLike) -> float:
        return math.sqrt(max(self.inner(f, f), 0.0))

    def vector_norm(self, comps) -> float:
        return math.sqrt(sum(self.inner(c, c) for c in comps))

    def energy(self, u: VelocityField) -> float:
        return 0.5 * (self.inner(u.u1, u.u1) + self.inner(u.u2, u.u2))

    def mean(self, f: Field2D) -> float:
        return float(self.to_full(f)[0, 0])


def mean_zero(f: Field2D) -> Field2D:
    """Remove the constant Legendre mode (the domain mean) from a full-space field."""
    if f.space != PRESSURE:
        raise ValueError("mean-zero normalization applies to the pressure space")
    c = f.coeffs.copy()
    c[0, 0] = 0.0
    return Field2D(c, PRESSURE)


@lru_cache(maxsize=8)
def get_discretization(n: int) -> LegendreGalerkin2D:
    return LegendreGalerkin2D(n)


def degree_of(f: Field2D) -> int:
    return f.degree


# ------------------------------------------------------------------ file I/O
def write_snapshot(path, field: Field2D, time: float = 0.0) -> None:
    """Binary snapshot: little-endian header (magic, N, space, ncoef, time) + row-major float64."""
    n = field.degree
    data = np.ascontiguousarray(field.coeffs, dtype="<f8")
    header = _SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, n, _SPACE_CODES[field.space], data.shape[0], float(time))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))


def read_snapshot(path) -> tuple[Field2D, float]:
    raw = Path(path).read_bytes()
    magic, n, code, size, time = _SNAPSHOT_HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a field snapshot")
    space = {v: k for k, v in _SPACE_CODES.items()}[code]
    expected = n - 1 if space == VELOCITY else n + 1
    if size != expected:
        raise ValueError(f"{path}: size {size} inconsistent with N={n}, space={space}")
    body = np.frombuffer(raw, dtype="<f8", offset=_SNAPSHOT_HEADER.size)
    if body.size != size * size:
        raise ValueError(f"{path}: truncated coefficient block")
    return Field2D(body.reshape(size, size).astype(float), space), time


def write_nodes_csv(path, disc: LegendreGalerkin2D, fields: dict[str, Field2D]) -> None:
    """CSV of node values: ``x,y,<name>...`` on the Lobatto grid."""
    cols = {name: disc.to_nodes(f).ravel() for name, f in fields.items()}
    xs, ys = disc.X.ravel(), disc.Y.ravel()
    with open(path, "w") as fh:
        fh.write(",".join(["x", "y", *cols]) + "\n")
        for i in range(xs.size):
            vals = [repr(float(xs[i])), repr(float(ys[i]))] + [repr(float(c[i])) for c in cols.values()]
            fh.write(",".join(vals) + "\n")
