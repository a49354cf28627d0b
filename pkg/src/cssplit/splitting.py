"""Viscous-term splitting ``B = eta*C + D + F`` and multiplier certificates.

For the canonical pairs (k, beta) = (2, 3), (3, 6), (4, 9) the F stencils and
coercivity constants ``kappa`` are tabulated; ``D`` follows from
``d = b - eta*c - f``. Certificates reduce ``Re P(zeta)/Q(zeta) > 0`` on
``|zeta| > 1`` to positivity of the trigonometric polynomial
``Re[P(e^{it}) Q(e^{-it})]``, written as an exact polynomial in ``y = cos t``
and minimized over ``[-1, 1]`` at its endpoints and critical points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .stencil import Rational, SchemeSpec, StencilSet, as_fraction, make_stencils

__all__ = [
    "SplitSet",
    "CertResult",
    "TelescopeForm",
    "TelescopeValue",
    "make_split",
    "certify_DC",
    "certify_AC",
    "telescope_form",
    "telescope_eval",
    "trig_poly_in_cos",
    "resultant",
    "ETA_DEFAULT",
    "k4_constants",
]

ETA_DEFAULT = Fraction(71, 100)
_F = Fraction

# oldest level first: F_k(u^{n+1}) = sum_q f[q] u^{n+2-k+q}
F_TABLE: dict[tuple[int, Fraction], tuple[Fraction, ...]] = {
    (2, _F(3)): (_F(0), _F(1, 100)),
    (3, _F(6)): (_F(0), _F(-21, 100), _F(27, 100)),
    (4, _F(9)): (_F(0), _F(330, 10**5), _F(-750, 10**5), _F(430, 10**5)),
}
KAPPA_TABLE: dict[tuple[int, Fraction], Fraction] = {
    (2, _F(3)): _F(1, 100),
    (3, _F(6)): _F(3, 50),
    (4, _F(9)): _F(1, 10**4),
}


@dataclass(frozen=True)
class SplitSet:
    eta: Fraction
    f: tuple[Fraction, ...]
    d: tuple[Fraction, ...]
    kappa: Fraction
    spec: SchemeSpec
    canonical: bool = True

    @property
    def k(self) -> int:
        return self.spec.k


def _check_eta(eta: Fraction) -> None:
    # eta > sqrt(2)/2  <=>  eta > 0 and 2*eta^2 > 1
    if eta <= 0 or 2 * eta * eta <= 1:
        raise ValueError(f"eta = {eta} must exceed sqrt(2)/2 ~ 0.7071 for the pressure term to be controlled")


def make_split(spec: SchemeSpec, eta: Rational = ETA_DEFAULT) -> SplitSet:
    """Split ``B`` for ``spec``; non-canonical specs get ``F = 0``, ``kappa = 0``."""
    eta = as_fraction(eta)
    _check_eta(eta)
    st = make_stencils(spec)
    key = (spec.k, spec.beta)
    canonical = key in F_TABLE
    f = F_TABLE[key] if canonical else tuple(Fraction(0) for _ in range(spec.k))
    kappa = KAPPA_TABLE[key] if canonical else Fraction(0)
    d = tuple(bq - eta * cq - fq for bq, cq, fq in zip(st.b, st.c, f))
    return SplitSet(eta=eta, f=f, d=d, kappa=kappa, spec=spec, canonical=canonical)


# ------------------------------------------------------------ polynomial tools
def _chebyshev_monomial(m: int) -> list[int]:
    """Monomial coefficients (ascending) of the Chebyshev polynomial ``T_m``."""
    t0, t1 = [1], [0, 1]
    if m == 0:
        return t0
    for _ in range(m - 1):
        nxt = [0] * (len(t1) + 1)
        for i, c in enumerate(t1):
            nxt[i + 1] += 2 * c
        for i, c in enumerate(t0):
            nxt[i] -= c
        t0, t1 = t1, nxt
    return t1


def trig_poly_in_cos(p: Sequence[Fraction], q: Sequence[Fraction]) -> list[Fraction]:
    """Ascending coefficients in ``y`` of ``Re[P(e^{it}) Q(e^{-it})]`` with ``y = cos t``."""
    deg = max(len(p), len(q))
    r = [Fraction(0)] * deg
    for j, pj in enumerate(p):
        for l, ql in enumerate(q):
            r[abs(j - l)] += as_fraction(pj) * as_fraction(ql)
    out = [Fraction(0)] * deg
    for m, rm in enumerate(r):
        for i, t in enumerate(_chebyshev_monomial(m)):
            out[i] += rm * t
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


def _peval(coeffs: Sequence, y):
    acc = 0 * y
    for c in reversed(coeffs):
        acc = acc * y + c
    return acc


def _pderiv(coeffs: Sequence[Fraction]) -> list[Fraction]:
    return [i * c for i, c in enumerate(coeffs)][1:]


def _critical_points(poly: Sequence[Fraction]) -> list[Fraction]:
    """Real roots in [-1, 1] of ``poly'``; exact for linear, closed form for quadratic."""
    der = _pderiv(poly)
    while der and der[-1] == 0:
        der.pop()
    if len(der) <= 1:
        return []
    if len(der) == 2:
        roots = [-der[0] / der[1]]
    else:
        if len(der) == 3:
            c, b, a = (float(x) for x in der)
            disc = b * b - 4 * a * c
            if disc < 0:
                return []
            sq = math.copysign(math.sqrt(disc), b)
            qq = -0.5 * (b + sq)
            cand = [qq / a] + ([c / qq] if qq != 0 else [])
        else:
            cand = [r.real for r in np.roots([float(x) for x in reversed(der)]) if abs(r.imag) < 1e-9]
        dder = _pderiv(der)
        roots = []
        for y in cand:
            y = Fraction(y)
            for _ in range(2):  # Newton polish in exact arithmetic, then round
                slope = _peval(dder, y)
                if slope == 0:
                    break
                y = Fraction(float(y - _peval(der, y) / slope))
            roots.append(y)
    return [y for y in roots if -1 <= y <= 1]


def resultant(p: Sequence[Fraction], q: Sequence[Fraction]) -> Fraction:
    """Exact resultant of two polynomials (ascending coefficients) via the Sylvester matrix."""
    p = [as_fraction(x) for x in p]
    q = [as_fraction(x) for x in q]
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    while len(q) > 1 and q[-1] == 0:
        q.pop()
    m, n = len(p) - 1, len(q) - 1
    if m == 0 and n == 0:
        return Fraction(1)
    size = m + n
    rows = []
    for i in range(n):
        rows.append([Fraction(0)] * i + list(reversed(p)) + [Fraction(0)] * (size - m - 1 - i))
    for i in range(m):
        rows.append([Fraction(0)] * i + list(reversed(q)) + [Fraction(0)] * (size - n - 1 - i))
    det = Fraction(1)
    for col in range(size):
        piv = next((r for r in range(col, size) if rows[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            rows[col], rows[piv] = rows[piv], rows[col]
            det = -det
        det *= rows[col][col]
        for r in range(col + 1, size):
            factor = rows[r][col] / rows[col][col]
            if factor:
                for c in range(col, size):
                    rows[r][c] -= factor * rows[col][c]
    return det


class CertResult(NamedTuple):
    min_value: float
    argmin_y: float
    polynomial: tuple  # ascending exact coefficients in y = cos(theta)
    passed: bool
    coprime: bool
    denominator_roots: tuple
    holomorphic: bool
    exact_min: Optional[Fraction] = None
    forced_zeros: int = 0  # factors (1 - y) divided out before minimizing

    @property
    def lemma_holds(self) -> bool:
        return self.passed and self.coprime and self.holomorphic

    def as_dict(self) -> dict:
        return {
            "min_value": self.min_value,
            "argmin_y": self.argmin_y,
            "polynomial": [str(c) for c in self.polynomial],
            "passed": self.passed,
            "coprime": self.coprime,
            "denominator_roots": [[r.real, r.imag] for r in self.denominator_roots],
            "denominator_root_moduli": [abs(r) for r in self.denominator_roots],
            "holomorphic_outside_unit_disk": self.holomorphic,
            "forced_zeros_at_y1": self.forced_zeros,
        }


def _deflate_at_one(poly: list[Fraction]) -> tuple[list[Fraction], int]:
    """Divide out every exact factor ``(1 - y)``; returns the quotient and the count."""
    count = 0
    while len(poly) > 1 and _peval(poly, Fraction(1)) == 0:
        # synthetic division by (y - 1), then flip the sign
        h = [Fraction(0)] * (len(poly) - 1)
        acc = Fraction(0)
        for i in range(len(poly) - 1, 0, -1):
            acc = poly[i] + acc
            h[i - 1] = acc
        poly = [-c for c in h]
        count += 1
    return poly, count


def _certify(num: Sequence[Fraction], den: Sequence[Fraction]) -> CertResult:
    poly = trig_poly_in_cos(num, den)
    # a consistent A stencil has sum(a) = 0, so theta = 0 is a zero of the real part
    # that carries no stability information; certify the quotient instead
    reduced, forced = _deflate_at_one(list(poly))
    candidates = [Fraction(-1), Fraction(1)] + _critical_points(reduced)
    values = [(_peval(reduced, y), y) for y in candidates]
    vmin, ymin = min(values, key=lambda t: (t[0], t[1]))
    den_trim = list(den)
    while len(den_trim) > 1 and den_trim[-1] == 0:
        den_trim.pop()
    roots = np.roots([float(x) for x in reversed(den_trim)]) if len(den_trim) > 1 else np.empty(0)
    roots = tuple(sorted((complex(r) for r in roots), key=lambda z: (round(z.real, 12), z.imag)))
    return CertResult(
        min_value=float(vmin),
        argmin_y=float(ymin),
        polynomial=tuple(poly),
        passed=vmin > 0,
        coprime=resultant(num, den) != 0,
        denominator_roots=roots,
        holomorphic=all(abs(r) < 1 for r in roots),
        exact_min=vmin,
        forced_zeros=forced,
    )


def certify_DC(split: SplitSet) -> CertResult:
    """Certificate for ``Re D~(zeta)/C~(zeta) > 0`` outside the unit disk."""
    if not split.canonical:
        raise ValueError(f"no tabulated splitting for {split.spec}; certify_DC is unsupported")
    st = make_stencils(split.spec)
    return _certify(split.d, st.c)


def certify_AC(st: StencilSet) -> CertResult:
    """Certificate for ``Re A~(zeta)/(zeta C~(zeta)) > 0`` outside the unit disk."""
    return _certify(st.a, (Fraction(0),) + tuple(st.c))


def diagnostic_split_certificate(spec: SchemeSpec, eta: Rational = ETA_DEFAULT) -> CertResult:
    """``D/C`` certificate for any spec, using ``F = 0`` off the canonical table."""
    split = make_split(spec, eta)
    return _certify(split.d, make_stencils(spec).c)


# ------------------------------------------------------------------ telescoping
@dataclass(frozen=True)
class Radical:
    """A value kept both as an exact sympy expression string and as a float."""

    expr: str
    value: float


@lru_cache(maxsize=1)
def k4_constants() -> dict[str, Radical]:
    """Constants of the k=4 decomposition of ``(210x-375y+165z, 5x-4y)``."""
    import sympy as sp

    e = -sp.sqrt(sp.Rational(3375, 2))
    f = (-sp.sqrt(sp.Rational(75, 2)) + sp.sqrt(sp.Rational(3375, 2))) / 2
    c = f
    d = sp.sqrt(sp.Rational(75, 2)) + f
    b = (660 + 2 * e * f) / (2 * c)
    a = 1050 - b**2 - d**2
    vals = {"a": a, "b": b, "c": c, "d": d, "e": e, "f": f}
    x, y, z = sp.symbols("x y z")
    lhs = sp.expand((210 * x - 375 * y + 165 * z) * (5 * x - 4 * y))
    rhs = sp.expand(a * x**2 - a * y**2 + (b * x + c * y) ** 2 - (b * y + c * z) ** 2 + (d * x + e * y + f * z) ** 2)
    if sp.simplify(lhs - rhs) != 0:
        raise ArithmeticError("k=4 telescoping constants fail to reproduce the bilinear form")
    return {name: Radical(str(sp.nsimplify(v)), float(v)) for name, v in vals.items()}


@dataclass(frozen=True)
class TelescopeForm:
    """``(F(u^{n+1}), C(u^{n+1})) = kappa|u^{n+1}|^2 + U(new) - U(old) + squares``.

    All weight vectors are ordered oldest level first. ``u_terms`` act on a
    window of ``k-1`` levels (the newest ``k-1`` for ``U(new)``, the oldest
    ``k-1`` for ``U(old)``); ``squares`` act on all ``k`` levels.
    """

    k: int
    kappa: float
    f: tuple[float, ...]
    c: tuple[float, ...]
    u_terms: tuple[tuple[float, tuple[float, ...]], ...]
    squares: tuple[tuple[float, tuple[float, ...]], ...]


class TelescopeValue(NamedTuple):
    lhs: float
    rhs: float
    residual: float
    slack: float  # lhs - (kappa|u|^2 + U_new - U_old): the discarded squares


def telescope_form(k: int) -> TelescopeForm:
    st = make_stencils(SchemeSpec(k, {2: 3, 3: 6, 4: 9}[k]))
    c = tuple(float(x) for x in st.c)
    if k == 2:
        u_terms = ((3 / 200, (1.0,)),)
        squares = ((3 / 200, (-1.0, 1.0)),)
    elif k == 3:
        u_terms = ((21 / 200, (0.0, 1.0)), (1 / 200, (-21.0, 27.0)))
        squares = ((21 / 200, (0.0, -1.0, 1.0)), (1 / 200, (21.0, -48.0, 27.0)))
    elif k == 4:
        K = {n: r.value for n, r in k4_constants().items()}
        u_terms = (
            (2e-5 * K["a"] + 2e-4, (0.0, 0.0, 1.0)),
            (2e-5, (0.0, K["c"], K["b"])),
            (1e-5, (165.0, -375.0, 215.0)),
        )
        squares = (
            (2e-5, (0.0, K["f"], K["e"], K["d"])),
            (2e-4, (0.0, 0.0, -1.0, 1.0)),
            (1e-5, (-165.0, 540.0, -590.0, 215.0)),
        )
    else:
        raise ValueError("telescoping forms exist for k = 2, 3, 4")
    key = (k, Fraction({2: 3, 3: 6, 4: 9}[k]))
    return TelescopeForm(
        k=k,
        kappa=float(KAPPA_TABLE[key]),
        f=tuple(float(x) for x in F_TABLE[key]),
        c=c,
        u_terms=u_terms,
        squares=squares,
    )


def telescope_eval(form: TelescopeForm, history: Sequence) -> TelescopeValue:
    """Evaluate both sides of the telescoping identity on ``k`` levels (oldest first)."""
    if len(history) != form.k:
        raise ValueError(f"need {form.k} levels, got {len(history)}")
    h = [np.asarray(v, dtype=float).ravel() for v in history]
    if any(v.shape != h[0].shape for v in h):
        raise ValueError("history levels differ in dimension")

    def comb(weights, levels):
        out = np.zeros_like(h[0])
        for w, v in zip(weights, levels):
            out += w * v
        return out

    def sq(v):
        return float(np.dot(v, v))

    lhs = float(np.dot(comb(form.f, h), comb(form.c, h)))
    kappa_term = form.kappa * sq(h[-1])
    u_new = sum(w * sq(comb(v, h[1:])) for w, v in form.u_terms)
    u_old = sum(w * sq(comb(v, h[:-1])) for w, v in form.u_terms)
    squares = sum(w * sq(comb(v, h)) for w, v in form.squares)
    base = kappa_term + u_new - u_old
    rhs = base + squares
    return TelescopeValue(lhs, rhs, abs(lhs - rhs) / (1.0 + abs(lhs)), lhs - base)
