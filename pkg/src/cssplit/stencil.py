"""Exact generalized BDF stencils obtained by Taylor expansion at ``t^{n+beta}``.

Three stencils define a scheme of order ``k`` with shift ``beta``:

* ``a`` (k+1 weights): ``sum_q a[q] phi(t^{n+1-k+q}) / dt ~ phi'(t^{n+beta})``
* ``b`` (k weights):   ``sum_q b[q] phi(t^{n+2-k+q})      ~ phi(t^{n+beta})``
* ``c`` (k weights):   ``sum_q c[q] phi(t^{n+1-k+q})      ~ phi(t^{n+beta})``

Every coefficient vector is ordered oldest level first, so ``a[k]`` and
``b[k-1]`` multiply the newest (implicit) level and ``c[k-1]`` multiplies the
newest known level. All coefficients are :class:`fractions.Fraction`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Sequence, TypeVar, Union

__all__ = [
    "SchemeSpec",
    "StencilSet",
    "make_stencils",
    "apply_A",
    "apply_B",
    "apply_C",
    "as_fraction",
    "solve_vandermonde",
]

Rational = Union[int, float, str, Fraction]
T = TypeVar("T")


def as_fraction(value: Rational) -> Fraction:
    """Convert ``value`` to an exact rational.

    Floats are read through their shortest decimal repr, so ``2.9`` becomes
    ``29/10`` rather than the nearest binary fraction. Strings may be decimals
    (``"0.71"``) or ratios (``"29/10"``).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a rational value")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational number")


@dataclass(frozen=True)
class SchemeSpec:
    """Order ``k`` and shift ``beta`` of one generalized BDF scheme."""

    k: int
    beta: Fraction

    def __init__(self, k: int, beta: Rational = 1):
        if isinstance(k, bool) or int(k) != k:
            raise ValueError(f"order k must be an integer, got {k!r}")
        beta = as_fraction(beta)
        if k < 1:
            raise ValueError(f"order k must be >= 1, got {k}")
        if beta < 1:
            raise ValueError(f"shift beta must be >= 1, got {beta}")
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "beta", beta)

    def __str__(self) -> str:
        return f"k={self.k}, beta={self.beta}"


@dataclass(frozen=True)
class StencilSet:
    """Exact coefficient vectors of the A, B and C stencils (oldest level first)."""

    a: tuple[Fraction, ...]
    b: tuple[Fraction, ...]
    c: tuple[Fraction, ...]
    spec: SchemeSpec

    @property
    def k(self) -> int:
        return self.spec.k

    def as_floats(self) -> tuple[list[float], list[float], list[float]]:
        return [float(x) for x in self.a], [float(x) for x in self.b], [float(x) for x in self.c]


def _bareiss(matrix: list[list[int]]) -> tuple[list[list[int]], list[int]]:
    """Fraction-free forward elimination of an integer augmented matrix.

    Returns the reduced matrix and the row permutation. Every intermediate
    entry stays an integer (Bareiss' division is exact).
    """
    m = [row[:] for row in matrix]
    n = len(m)
    perm = list(range(n))
    prev = 1
    for i in range(n - 1):
        if m[i][i] == 0:
            for r in range(i + 1, n):
                if m[r][i] != 0:
                    m[i], m[r] = m[r], m[i]
                    perm[i], perm[r] = perm[r], perm[i]
                    break
            else:
                raise ZeroDivisionError("singular Vandermonde system")
        for r in range(i + 1, n):
            for col in range(i + 1, len(m[r])):
                m[r][col] = (m[r][col] * m[i][i] - m[r][i] * m[i][col]) // prev
            m[r][i] = 0
        prev = m[i][i]
    if m[n - 1][n - 1] == 0:
        raise ZeroDivisionError("singular Vandermonde system")
    return m, perm


def solve_vandermonde(nodes: Sequence[Fraction], rhs: Sequence[Fraction]) -> list[Fraction]:
    """Solve ``sum_j x_j * nodes[j]**m = rhs[m]`` for ``m = 0..len(nodes)-1`` exactly.

    Rows are scaled to integers and reduced by fraction-free elimination;
    only the final back substitution produces fractions.
    """
    n = len(nodes)
    if len(rhs) != n:
        raise ValueError("nodes and rhs must have equal length")
    nodes = [as_fraction(x) for x in nodes]
    rows: list[list[Fraction]] = [[x**m for x in nodes] + [as_fraction(rhs[m])] for m in range(n)]
    int_rows = []
    for row in rows:
        scale = lcm(*(x.denominator for x in row))
        int_rows.append([int(x * scale) for x in row])
    red, _ = _bareiss(int_rows)
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        acc = Fraction(red[i][n])
        for j in range(i + 1, n):
            acc -= red[i][j] * x[j]
        x[i] = acc / red[i][i]
    return x


def make_stencils(spec: SchemeSpec) -> StencilSet:
    """Exact A/B/C stencils for ``spec``.

    >>> st = make_stencils(SchemeSpec(2, 3))
    >>> [str(x) for x in st.a], [str(x) for x in st.b], [str(x) for x in st.c]
    (['5/2', '-6', '7/2'], ['-2', '3'], ['-3', '4'])
    """
    if not isinstance(spec, SchemeSpec):
        raise TypeError("spec must be a SchemeSpec")
    k, beta = spec.k, spec.beta
    one = Fraction(1)

    # unknowns are ordered newest level first, as in the moment systems
    a_nodes = [beta - 1 + j for j in range(k + 1)]
    a_rhs = [Fraction(0)] * (k + 1)
    a_rhs[1] = -one
    a_rev = solve_vandermonde(a_nodes, a_rhs)

    b_nodes = [beta - 1 + j for j in range(k)]
    c_nodes = [beta + j for j in range(k)]
    unit = [one] + [Fraction(0)] * (k - 1)
    b_rev = solve_vandermonde(b_nodes, unit)
    c_rev = solve_vandermonde(c_nodes, unit)

    return StencilSet(a=tuple(reversed(a_rev)), b=tuple(reversed(b_rev)), c=tuple(reversed(c_rev)), spec=spec)


def _combine(coeffs: Sequence, history: Sequence[T], name: str) -> T:
    if len(history) != len(coeffs):
        raise ValueError(f"{name} needs {len(coeffs)} history levels, got {len(history)}")
    total = None
    for w, h in zip(coeffs, history):
        term = h * w
        total = term if total is None else total + term
    return total


def _weights(coeffs: Sequence[Fraction], history: Sequence) -> Sequence:
    # exact weights for exact inputs, floats for everything else (arrays, fields)
    if all(isinstance(h, (int, Fraction)) for h in history):
        return coeffs
    return [float(w) for w in coeffs]


def apply_A(st: StencilSet, history: Sequence[T]) -> T:
    """``sum_q a[q] * history[q]``; ``history`` holds k+1 levels, newest last."""
    return _combine(_weights(st.a, history), history, "A")


def apply_B(st: StencilSet, history: Sequence[T]) -> T:
    """``sum_q b[q] * history[q]``; levels ``n+2-k .. n+1``, newest last."""
    return _combine(_weights(st.b, history), history, "B")


def apply_C(st: StencilSet, history: Sequence[T]) -> T:
    """``sum_q c[q] * history[q]``; levels ``n+1-k .. n``, newest last."""
    return _combine(_weights(st.c, history), history, "C")
