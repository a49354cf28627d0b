"""Linear stability of generalized BDF schemes.

Applying a scheme to ``u' = lambda u`` with ``z = lambda * dt`` gives the
recurrence ``sum_q (a_q - b_{q-1} z) u^{n+q} = 0``. Its characteristic roots
decide stability at ``z``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .stencil import SchemeSpec, StencilSet, make_stencils

__all__ = [
    "Verdict",
    "CharPoly",
    "RootResult",
    "char_poly",
    "roots_at",
    "is_stable",
    "RegionRaster",
    "grid_axis",
    "region_scan",
    "DEFAULT_WINDOW",
]

DEFAULT_WINDOW = (-6.0, 1.0, -4.0, 4.0)
DEGREE_DROP_TOL = kernels._kernels_py.DEGREE_DROP_TOL
MULTIPLE_ROOT_TOL = kernels._kernels_py.MULTIPLE_ROOT_TOL


class Verdict(enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    BOUNDARY = "Boundary"


_CODE = {kernels.STABLE: Verdict.STABLE, kernels.UNSTABLE: Verdict.UNSTABLE, kernels.BOUNDARY: Verdict.BOUNDARY}


@dataclass(frozen=True)
class CharPoly:
    """Characteristic polynomial with ``coeff_q(z) = a_q - b_{q-1} z`` (``b_{-1} = 0``)."""

    a: tuple
    b: tuple

    @property
    def k(self) -> int:
        return len(self.a) - 1

    @classmethod
    def from_stencils(cls, st: StencilSet) -> "CharPoly":
        return cls(tuple(st.a), tuple(st.b))

    def coeffs(self, z) -> np.ndarray:
        """Coefficients in ascending powers of mu."""
        a = np.array([float(x) for x in self.a])
        b = np.concatenate(([0.0], [float(x) for x in self.b]))
        return a - b * complex(z)

    def exact_coeffs(self, z: Fraction = Fraction(0)) -> list:
        """Exact ascending coefficients at rational real ``z``."""
        z = Fraction(z)
        return [Fraction(self.a[q]) - (Fraction(self.b[q - 1]) * z if q > 0 else 0) for q in range(self.k + 1)]

    def __call__(self, mu, z) -> complex:
        return np.polynomial.polynomial.polyval(mu, self.coeffs(z))

    @property
    def pole(self):
        """The ``z`` at which the leading coefficient vanishes, or None."""
        bk = Fraction(self.b[-1])
        return None if bk == 0 else Fraction(self.a[-1]) / bk


def char_poly(spec: SchemeSpec) -> CharPoly:
    return CharPoly.from_stencils(make_stencils(spec))


class RootResult(NamedTuple):
    roots: np.ndarray
    degree: int
    degree_dropped: bool
    residual: float


def _newton_polish(c: np.ndarray, roots: np.ndarray) -> np.ndarray:
    p = np.polynomial.polynomial
    dc = p.polyder(c)
    val = p.polyval(roots, c)
    der = p.polyval(roots, dc)
    step = np.divide(val, der, out=np.zeros_like(val), where=der != 0)
    return roots - step


def roots_at(cp: CharPoly, z) -> RootResult:
    """All characteristic roots at ``z``.

    Near the pole ``z = a_k / b_{k-1}`` the leading coefficient vanishes and
    the reduced-degree roots are returned with ``degree_dropped`` set.
    """
    c = cp.coeffs(z)
    scale = np.max(np.abs(c))
    deg = cp.k
    while deg > 0 and abs(c[deg]) <= DEGREE_DROP_TOL * scale:
        deg -= 1
    c = c[: deg + 1]
    if deg == 0:
        return RootResult(np.zeros(0, dtype=complex), 0, True, 0.0)
    monic = c / c[deg]
    comp = np.zeros((deg, deg), dtype=complex)
    comp[0, :] = -monic[deg - 1 :: -1]
    comp[np.arange(1, deg), np.arange(deg - 1)] = 1.0
    roots = _newton_polish(monic, np.linalg.eigvals(comp))
    order = np.lexsort((roots.imag, roots.real))
    roots = roots[order]
    resid = float(np.max(np.abs(np.polynomial.polynomial.polyval(roots, c)))) / scale
    return RootResult(roots, deg, deg < cp.k, resid)


def is_stable(cp: CharPoly, z, tol: float = 1e-9) -> Verdict:
    """Root-condition verdict at ``z``. A degree drop counts as Unstable.

    A unit-modulus root is simple when it is separated from the other unit
    roots by more than ``10 tol`` and the derivative there is not negligible.
    """
    rr = roots_at(cp, z)
    if rr.degree_dropped:
        return Verdict.UNSTABLE
    mod = np.abs(rr.roots)
    if np.any(mod > 1.0 + tol):
        return Verdict.UNSTABLE
    if np.all(mod < 1.0 - tol):
        return Verdict.STABLE
    on = rr.roots[mod >= 1.0 - tol]
    monic = cp.coeffs(z) / cp.coeffs(z)[-1]
    deriv = np.polynomial.polynomial.polyval(on, np.polynomial.polynomial.polyder(monic))
    if np.any(np.abs(deriv) <= MULTIPLE_ROOT_TOL * np.abs(monic).max()):
        return Verdict.BOUNDARY
    for i in range(on.size):
        for j in range(i + 1, on.size):
            if abs(on[i] - on[j]) <= 10.0 * tol:
                return Verdict.BOUNDARY
    return Verdict.STABLE


def grid_axis(lo: float, hi: float, n: int) -> np.ndarray:
    """Uniform axis whose values are exact mirror images for symmetric windows."""
    j = np.arange(n, dtype=float)
    return (lo * (n - 1 - j) + hi * j) / (n - 1)


@dataclass
class RegionRaster:
    """Boolean stability mask; rows follow the imaginary axis, columns the real."""

    window: tuple
    resolution: tuple
    mask: np.ndarray
    spec: SchemeSpec | None = None

    def __post_init__(self):
        nx, ny = self.resolution
        if self.mask.shape != (ny, nx):
            raise ValueError(f"mask shape {self.mask.shape} does not match resolution {self.resolution}")

    @property
    def re(self) -> np.ndarray:
        return grid_axis(self.window[0], self.window[1], self.resolution[0])

    @property
    def im(self) -> np.ndarray:
        return grid_axis(self.window[2], self.window[3], self.resolution[1])

    @property
    def stable_count(self) -> int:
        return int(self.mask.sum())

    def write_csv(self, path) -> None:
        re, im = self.re, self.im
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im", "stable"])
            for i, y in enumerate(im):
                for j, x in enumerate(re):
                    w.writerow([repr(float(x)), repr(float(y)), int(self.mask[i, j])])

    def write_pgm(self, path) -> None:
        """Binary P5 image, top row = largest imaginary part, stable = 255."""
        ny, nx = self.mask.shape
        img = np.where(self.mask[::-1], 255, 0).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
            fh.write(img.tobytes())

    def to_text(self) -> str:
        """Plain-text grid (``#`` stable, ``.`` otherwise), top row = largest Im z."""
        return "\n".join("".join("#" if v else "." for v in row) for row in self.mask[::-1])

    @staticmethod
    def read_pgm(path) -> np.ndarray:
        with open(path, "rb") as fh:
            data = fh.read()
        parts = data.split(maxsplit=4)
        if parts[0] != b"P5":
            raise ValueError("not a binary PGM file")
        nx, ny, maxval = int(parts[1]), int(parts[2]), int(parts[3])
        pix = np.frombuffer(parts[4][: nx * ny], dtype=np.uint8).reshape(ny, nx)
        return pix[::-1] == maxval


def classify_grid(cp: CharPoly, z: np.ndarray, tol: float = 1e-9, backend=None) -> np.ndarray:
    """Batched verdict codes (see ``kernels``) for an array of ``z``."""
    fn = kernels.classify_points if backend is None else backend
    a = np.array([float(x) for x in cp.a])
    b = np.array([float(x) for x in cp.b])
    return fn(a, b, z, tol)


def region_scan(
    spec: SchemeSpec,
    window: Sequence[float] = DEFAULT_WINDOW,
    resolution: Sequence[int] = (256, 256),
    tol: float = 1e-9,
    backend=None,
) -> RegionRaster:
    """Stable-point raster of ``spec`` over ``window = (re_min, re_max, im_min, im_max)``."""
    nx, ny = (int(r) for r in resolution)
    if nx < 16 or ny < 16:
        raise ValueError("resolution must be at least 16x16")
    window = tuple(float(w) for w in window)
    if not (window[0] < window[1] and window[2] < window[3]):
        raise ValueError("window bounds must be increasing")
    cp = char_poly(spec)
    re = grid_axis(window[0], window[1], nx)
    im = grid_axis(window[2], window[3], ny)
    z = re[None, :] + 1j * im[:, None]
    codes = classify_grid(cp, z, tol, backend)
    return RegionRaster(window, (nx, ny), codes == kernels.STABLE, spec)


def verdict_from_code(code: int) -> Verdict:
    return _CODE[int(code)]
