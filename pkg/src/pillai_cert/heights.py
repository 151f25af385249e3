"""Logarithmic heights, Matveev's lower bound and the Guzman-Luca inversion.

Heights are returned as balls.  Combination rules (:func:`height_bound`)
give upper bounds, not exact heights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Optional, Sequence, Union

import flint
import sympy

from .rigor import DEFAULT_BITS, BallReal, RigorError, _working_precision
from .sequence import PADOVAN, RecurrenceSpec, characteristic_roots

__all__ = [
    "NotReduced",
    "HypothesisViolated",
    "AlgebraicNumberDesc",
    "MatveevInstance",
    "height_rational",
    "height_from_minpoly",
    "height_bound",
    "matveev_constant",
    "matveev_lower_bound",
    "guzman_luca_bound",
    "field_minimal_polynomial",
    "lambda_preset",
    "lambda1_preset",
    "lambda2_preset",
    "lambda3_preset",
]


class NotReduced(ValueError):
    """Numerator and denominator share a factor."""


class HypothesisViolated(RigorError):
    """The input does not satisfy a lemma's hypothesis."""


@dataclass(frozen=True)
class AlgebraicNumberDesc:
    """Primitive minimal polynomial (leading coefficient first) and |conjugates|."""

    minpoly_coeffs: tuple[int, ...]
    conjugate_abs: tuple[BallReal, ...]

    def __post_init__(self):
        coeffs = tuple(int(c) for c in self.minpoly_coeffs)
        object.__setattr__(self, "minpoly_coeffs", coeffs)
        object.__setattr__(self, "conjugate_abs", tuple(self.conjugate_abs))
        if len(coeffs) < 2 or coeffs[0] <= 0:
            raise ValueError("minimal polynomial needs degree >= 1 and a positive leading coefficient")
        if reduce(math.gcd, coeffs) != 1:
            raise ValueError("minimal polynomial must be primitive")
        if len(self.conjugate_abs) != self.degree:
            raise ValueError(f"expected {self.degree} conjugates, got {len(self.conjugate_abs)}")

    @property
    def degree(self) -> int:
        return len(self.minpoly_coeffs) - 1

    @classmethod
    def from_minpoly(cls, coeffs: Sequence[int], prec: int = DEFAULT_BITS) -> "AlgebraicNumberDesc":
        """Describe a number by its minimal polynomial; conjugates via Arb."""
        coeffs = [int(c) for c in coeffs]
        poly = flint.fmpz_poly(list(reversed(coeffs)))
        with _working_precision(prec):
            roots = poly.complex_roots()
            mods = []
            for root, mult in roots:
                if mult != 1:
                    raise ValueError("minimal polynomial must be squarefree")
                mods.append(BallReal._wrap(abs(root), prec))
        return cls(tuple(coeffs), tuple(mods))


def height_rational(p: int, q: int = 1, prec: int = DEFAULT_BITS) -> BallReal:
    """``h(p/q) = log max(|p|, q)`` for a reduced fraction."""
    if q <= 0:
        raise ValueError("denominator must be positive")
    if math.gcd(p, q) != 1:
        raise NotReduced(f"{p}/{q} is not in lowest terms")
    return BallReal(max(abs(p), q), prec).log()


def height_from_minpoly(desc: AlgebraicNumberDesc) -> BallReal:
    prec = max(c.prec for c in desc.conjugate_abs)
    total = BallReal(desc.minpoly_coeffs[0], prec).log()
    for mod in desc.conjugate_abs:
        if mod.certainly_at_most(1):
            continue
        if mod.lower >= 1:
            total = total + mod.log()
        else:
            # straddles 1: log max(|z|, 1) lies in [0, log upper]
            top = BallReal(mod.upper, prec).log()
            total = total + BallReal.from_interval(0, top.upper, prec)
    h = total / desc.degree
    if h.lower < 0:
        h = BallReal.from_interval(0, h.upper, prec)
    return h


def height_bound(kind: str, *heights: Union[BallReal, int, Fraction],
                 s: Optional[int] = None) -> BallReal:
    """Upper bound for the height of a sum, product or power.

    ``sum``: ``h1 + h2 + log 2``; ``product``: ``h1 + h2``; ``power``: ``|s| h``.
    """
    balls = [h if isinstance(h, BallReal) else BallReal(h) for h in heights]
    prec = max((b.prec for b in balls), default=DEFAULT_BITS)
    if kind == "sum":
        if len(balls) != 2:
            raise ValueError("sum takes two heights")
        return balls[0] + balls[1] + BallReal(2, prec).log()
    if kind == "product":
        if len(balls) != 2:
            raise ValueError("product takes two heights")
        return balls[0] + balls[1]
    if kind == "power":
        if len(balls) != 1 or s is None:
            raise ValueError("power takes one height and an exponent s")
        return balls[0] * abs(s)
    raise ValueError(f"unknown kind {kind!r}")


# Matveev ---------------------------------------------------------------------


@dataclass(frozen=True)
class MatveevInstance:
    """Data for a lower bound on ``|g_1^b_1 ... g_t^b_t - 1|``."""

    t: int
    D: int
    B: Union[int, BallReal]
    A: tuple[BallReal, ...]

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(self.A))
        if self.t < 1 or self.D < 1:
            raise ValueError("t and D must be positive")
        if len(self.A) != self.t:
            raise ValueError(f"expected {self.t} A-values, got {len(self.A)}")
        # V grows with each A_i, so its upper end is the bound for A_i = a.upper
        for i, a in enumerate(self.A, 1):
            if not a.upper >= Fraction(16, 100):
                raise HypothesisViolated(f"A_{i} = {a} is not certified >= 0.16")
        b = self.B if isinstance(self.B, BallReal) else BallReal(self.B)
        if not b.lower >= 1:
            raise HypothesisViolated("B must be at least 1")

    def coefficient(self) -> BallReal:
        """The bound divided by ``1 + log B``."""
        value = matveev_constant(self.t, self.D, self.A[0].prec)
        for a in self.A:
            value = value * a
        return value


def matveev_constant(t: int, D: int, prec: int = DEFAULT_BITS) -> BallReal:
    """``1.4 * 30**(t+3) * t**4.5 * D**2 * (1 + log D)``."""
    t4 = BallReal(t, prec)
    root_t = t4.sqrt()
    base = BallReal(Fraction(7, 5) * 30 ** (t + 3) * t ** 4 * D * D, prec)
    return base * root_t * (1 + BallReal(D, prec).log())


def matveev_lower_bound(inst: MatveevInstance) -> BallReal:
    """``V`` with ``log|Lambda| > -V`` whenever ``Lambda`` is non-zero."""
    coef = inst.coefficient()
    b = inst.B if isinstance(inst.B, BallReal) else BallReal(inst.B, coef.prec)
    return coef * (1 + b.log())


def guzman_luca_bound(m: int, Y: Union[BallReal, int, Fraction]) -> BallReal:
    """``2**m * Y * (log Y)**m``; any ``x`` with ``x / (log x)**m < Y`` lies below it."""
    if m < 1:
        raise ValueError("m must be positive")
    y = Y if isinstance(Y, BallReal) else BallReal(Y)
    floor = (4 * m * m) ** m
    if not y.lower > floor:
        raise HypothesisViolated(f"need Y > (4m^2)^m = {floor}, got {y}")
    return 2 ** m * y * y.log() ** m


# exact field elements ------------------------------------------------------------


def field_minimal_polynomial(element: Sequence[Fraction], spec: RecurrenceSpec = PADOVAN,
                             prec: int = DEFAULT_BITS) -> tuple[int, ...]:
    """Primitive minimal polynomial of ``sum e_i alpha**i`` over the integers.

    ``alpha`` is the dominant characteristic root; the characteristic
    polynomial must be irreducible.
    """
    x = sympy.Symbol("x")
    f = sympy.Poly(spec.characteristic(), x, domain="QQ")
    if not f.is_irreducible:
        raise ValueError(f"{spec.name}: characteristic polynomial is reducible")
    d = spec.order
    value = sympy.Poly(list(reversed([sympy.Rational(e.numerator, e.denominator)
                                      for e in map(Fraction, element)])), x, domain="QQ")
    # column j holds value * x**j reduced mod f
    columns = []
    for j in range(d):
        r = (value * sympy.Poly(x ** j, x, domain="QQ")).rem(f)
        coeffs = list(reversed(r.all_coeffs()))
        columns.append(coeffs + [0] * (d - len(coeffs)))
    matrix = sympy.Matrix(d, d, lambda i, j: columns[j][i])
    char = matrix.charpoly(x).as_expr()
    _, factors = sympy.factor_list(char, x)
    alpha = characteristic_roots(spec, prec).alpha
    point = sum((BallReal(e, prec) * alpha ** i for i, e in enumerate(map(Fraction, element))),
                BallReal(0, prec))
    for poly, _ in factors:
        p = sympy.Poly(poly, x)
        coeffs = [int(c) for c in (p * sympy.lcm([sympy.Rational(c).q for c in p.all_coeffs()])).all_coeffs()]
        g = reduce(math.gcd, coeffs)
        coeffs = [c // g for c in coeffs]
        if coeffs[0] < 0:
            coeffs = [-c for c in coeffs]
        acc = BallReal(0, prec)
        for c in coeffs:
            acc = acc * point + c
        if acc.contains(0):
            return tuple(coeffs)
    raise RigorError("no factor of the characteristic polynomial vanishes at the element")


# presets for the four linear forms -----------------------------------------------
#
# Each form is g1 * alpha**b2 * 3**b3 - 1 with D = 3, A2 = log alpha and
# A3 = 3 log 3; the presets differ in g1 and in the height bound for it.


def _common(prec: int, alpha: Optional[BallReal]):
    if alpha is None:
        alpha = characteristic_roots(PADOVAN, prec).alpha
    return alpha, alpha.log(), 3 * BallReal(3, prec).log()


def _h_coefficient(prec: int) -> BallReal:
    # h(a) for a with minimal polynomial 23x^3 - 23x^2 + 6x - 1
    return BallReal(23, prec).log() / 3


def lambda_preset(n: int, prec: int = DEFAULT_BITS, alpha: Optional[BallReal] = None) -> MatveevInstance:
    """``g1 = a``: ``A1 = 3 h(a) = log 23``."""
    alpha, a2, a3 = _common(prec, alpha)
    return MatveevInstance(3, 3, n, (3 * _h_coefficient(prec), a2, a3))


def lambda1_preset(n: int, k: int, prec: int = DEFAULT_BITS, alpha: Optional[BallReal] = None) -> MatveevInstance:
    """``g1 = a (alpha**k - 1)``: ``A1 = 3 (h(a) + (k/3) log alpha + log 2)``."""
    alpha, a2, a3 = _common(prec, alpha)
    h = height_bound("sum", height_bound("power", a2 / 3, s=k), 0)
    h = height_bound("product", _h_coefficient(prec), h)
    return MatveevInstance(3, 3, n, (3 * h, a2, a3))


def lambda2_preset(n: int, l: int, prec: int = DEFAULT_BITS, alpha: Optional[BallReal] = None) -> MatveevInstance:
    """``g1 = a / (3**l - 1)``: ``A1 = 3 (h(a) + log(3**l - 1))``."""
    alpha, a2, a3 = _common(prec, alpha)
    h = height_bound("product", _h_coefficient(prec), height_rational(3 ** l - 1, 1, prec))
    return MatveevInstance(3, 3, n, (3 * h, a2, a3))


def lambda3_preset(n: int, k: int, l: int, prec: int = DEFAULT_BITS,
                   alpha: Optional[BallReal] = None) -> MatveevInstance:
    """``g1 = a (alpha**k - 1) / (3**l - 1)``."""
    alpha, a2, a3 = _common(prec, alpha)
    h_num = height_bound("sum", height_bound("power", a2 / 3, s=k), 0)
    h = height_bound("product", _h_coefficient(prec), h_num)
    h = height_bound("product", h, height_rational(3 ** l - 1, 1, prec))
    return MatveevInstance(3, 3, n, (3 * h, a2, a3))
