"""Exact linear recurrences and their certified Binet data.

Terms are exact Python integers.  Everything analytic (the dominant root,
the other characteristic roots, the Binet coefficients) is a ball.

Two index conventions are in play for the Padovan sequence.  The *listing*
convention is ``P_0, P_1, P_2 = 0, 1, 1``.  The *analytic* convention shifts
by one, ``Q_k = P_{k+1}``, and is the one for which ``Q_k ~ a * alpha**k``
with ``a`` in (0.72, 0.73).  :class:`BinetCoefficients` records the shift as
``convention_offset``.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import sympy

from .rigor import (
    DEFAULT_BITS,
    BallComplex,
    BallReal,
    InsufficientPrecision,
    RigorError,
)

__all__ = [
    "RecurrenceSpec",
    "PADOVAN",
    "FIBONACCI",
    "TRIBONACCI",
    "PRESETS",
    "CubicRoots",
    "BinetCoefficients",
    "ConventionMismatch",
    "term",
    "terms",
    "characteristic_roots",
    "real_root",
    "radical_alpha",
    "binet_fit",
    "binet_residual",
    "dominant_coefficient_exact",
    "growth_bounds_check",
    "GrowthReport",
]


class ConventionMismatch(RigorError):
    """No index shift puts the dominant Binet coefficient in the target window."""


@dataclass(frozen=True)
class RecurrenceSpec:
    """``U_{n+d} = c_1 U_{n+d-1} + ... + c_d U_n`` with given ``U_0..U_{d-1}``."""

    order: int
    coefficients: tuple[int, ...]
    initial: tuple[int, ...]
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(int(c) for c in self.coefficients))
        object.__setattr__(self, "initial", tuple(int(u) for u in self.initial))
        if not isinstance(self.order, int) or self.order < 1:
            raise ValueError("order must be a positive integer")
        if len(self.coefficients) != self.order or len(self.initial) != self.order:
            raise ValueError(
                f"order {self.order} needs {self.order} coefficients and initial values, "
                f"got {len(self.coefficients)} and {len(self.initial)}")
        if self.coefficients[-1] == 0:
            raise ValueError("last coefficient must be non-zero")

    @classmethod
    def from_mapping(cls, data: Mapping[str, object]) -> "RecurrenceSpec":
        def ints(value) -> tuple[int, ...]:
            if isinstance(value, str):
                return tuple(int(v) for v in value.replace(",", " ").split())
            return tuple(int(v) for v in value)

        return cls(order=int(data["order"]), coefficients=ints(data["coefficients"]),
                   initial=ints(data["initial"]), name=str(data.get("name", "custom")))

    def characteristic(self) -> list[int]:
        """Coefficients of the characteristic polynomial, leading first."""
        return [1] + [-c for c in self.coefficients]

    def evaluate(self, x):
        """Characteristic polynomial at ``x`` (exact or ball), Horner form."""
        acc = 0
        for c in self.characteristic():
            acc = acc * x + c
        return acc

    def derivative(self, x):
        d = self.order
        acc = 0
        for i, c in enumerate(self.characteristic()[:-1]):
            acc = acc * x + c * (d - i)
        return acc


PADOVAN = RecurrenceSpec(3, (0, 1, 1), (0, 1, 1), "padovan")
FIBONACCI = RecurrenceSpec(2, (1, 1), (0, 1), "fibonacci")
TRIBONACCI = RecurrenceSpec(3, (1, 1, 1), (0, 1, 1), "tribonacci")
PRESETS = {s.name: s for s in (PADOVAN, FIBONACCI, TRIBONACCI)}

# largest index served by extending the cached list; beyond it, matrix powers
_SCAN_LIMIT = 1 << 16


class _TermCache:
    def __init__(self):
        self._lock = threading.Lock()
        self._values: dict[RecurrenceSpec, list[int]] = {}

    def upto(self, spec: RecurrenceSpec, n: int) -> list[int]:
        with self._lock:
            values = self._values.setdefault(spec, list(spec.initial))
            coeffs = spec.coefficients
            while len(values) <= n:
                values.append(sum(c * values[-1 - i] for i, c in enumerate(coeffs)))
            return values[: n + 1] if len(values) > n + 1 else list(values)

    def get(self, spec: RecurrenceSpec, n: int) -> int:
        with self._lock:
            values = self._values.get(spec)
            if values is not None and n < len(values):
                return values[n]
        return self.upto(spec, n)[n]


_CACHE = _TermCache()


def _matrix_term(spec: RecurrenceSpec, n: int) -> int:
    d = spec.order
    # companion matrix acting on (U_{k+d-1}, ..., U_k)
    step = [list(spec.coefficients)] + [[1 if j == i else 0 for j in range(d)] for i in range(d - 1)]

    def mul(x, y):
        return [[sum(x[i][t] * y[t][j] for t in range(d)) for j in range(d)] for i in range(d)]

    power = [[1 if i == j else 0 for j in range(d)] for i in range(d)]
    base, e = step, n - (d - 1)
    while e:
        if e & 1:
            power = mul(power, base)
        base = mul(base, base)
        e >>= 1
    state = list(reversed(spec.initial))
    return sum(power[0][j] * state[j] for j in range(d))


def term(spec: RecurrenceSpec, n: int) -> int:
    """Exact ``U_n``."""
    if n < 0:
        raise ValueError("index must be non-negative")
    if n < spec.order:
        return spec.initial[n]
    if n > _SCAN_LIMIT:
        return _matrix_term(spec, n)
    return _CACHE.get(spec, n)


def terms(spec: RecurrenceSpec, n_max: int) -> list[int]:
    """``[U_0, ..., U_{n_max}]``."""
    if n_max < 0:
        return []
    return _CACHE.upto(spec, n_max)[: n_max + 1]


# roots ---------------------------------------------------------------------


@dataclass(frozen=True)
class CubicRoots:
    """Characteristic roots: the dominant real ``alpha`` and the rest.

    ``beta_re``/``beta_im`` describe one non-dominant root (the other in a
    complex pair is its conjugate); ``others`` lists every non-dominant root.
    """

    alpha: BallReal
    beta_re: BallReal
    beta_im: BallReal
    beta_abs: BallReal
    others: tuple[BallComplex, ...] = field(default=(), repr=False)

    @property
    def prec(self) -> int:
        return self.alpha.prec


def _sign_at(spec: RecurrenceSpec, x: Fraction) -> int:
    v = spec.evaluate(x)
    return (v > 0) - (v < 0)


def _bracket_dominant(spec: RecurrenceSpec) -> tuple[Fraction, Fraction]:
    # every root has modulus below 1 + max|c_i|
    hi = Fraction(1 + max(abs(c) for c in spec.coefficients))
    lo = Fraction(1)
    if _sign_at(spec, lo) >= 0:
        raise ValueError(f"{spec.name}: characteristic polynomial is not negative at 1")
    for _ in range(40):
        mid = (lo + hi) / 2
        if _sign_at(spec, mid) > 0:
            hi = mid
        else:
            lo = mid
    return lo, hi


def _interval_newton(spec: RecurrenceSpec, lo: Fraction, hi: Fraction, prec: int) -> BallReal:
    box = BallReal.from_interval(lo, hi, prec)
    target = Fraction(1, 1 << max(prec - 8, 8))
    for _ in range(4 * prec.bit_length() + 16):
        m = BallReal(box.midpoint, prec)
        slope = spec.derivative(box)
        if slope.contains(0):
            raise InsufficientPrecision("derivative not bounded away from zero")
        step = m - spec.evaluate(m) / slope
        if not (box.lower < step.lower and step.upper < box.upper):
            if step.radius >= box.radius:
                break
        narrowed = step.intersect(box)
        if narrowed.radius >= box.radius:
            box = narrowed
            break
        box = narrowed
        if box.radius < target:
            break
    return box


def _certify_root(spec: RecurrenceSpec, box: BallReal) -> BallReal:
    # a Newton image strictly inside the box proves a unique root in it
    prec = box.prec
    m = BallReal(box.midpoint, prec)
    image = m - spec.evaluate(m) / spec.derivative(box)
    if not (box.lower < image.lower and image.upper < box.upper):
        wide = BallReal.from_interval(box.lower - 4 * box.radius, box.upper + 4 * box.radius, prec)
        m = BallReal(wide.midpoint, prec)
        image = m - spec.evaluate(m) / spec.derivative(wide)
        if not (wide.lower < image.lower and image.upper < wide.upper):
            raise InsufficientPrecision("interval Newton failed to verify the root")
    return image


def characteristic_roots(spec: RecurrenceSpec = PADOVAN, prec: int = DEFAULT_BITS) -> CubicRoots:
    """Certified roots of the characteristic polynomial (orders 2 and 3)."""
    if prec < 64:
        raise ValueError("precision must be at least 64 bits")
    if spec.order not in (2, 3):
        raise ValueError("only orders 2 and 3 are supported")
    lo, hi = _bracket_dominant(spec)
    alpha = _certify_root(spec, _interval_newton(spec, lo, hi, prec))

    if spec.order == 2:
        other = spec.coefficients[0] - alpha
        zero = BallReal(0, prec)
        return CubicRoots(alpha, other, zero, abs(other), (BallComplex(other, zero),))

    c1, c2, _ = spec.coefficients
    # x^3 - c1 x^2 - c2 x - c3 = (x - alpha)(x^2 + p x + q)
    p = alpha - c1
    q = alpha * alpha - c1 * alpha - c2
    disc = p * p - 4 * q
    if disc.certainly_less(0):
        re = -p / 2
        im = (-disc).sqrt() / 2
        beta = BallComplex(re, im)
        return CubicRoots(alpha, re, im, q.sqrt(), (beta, beta.conjugate()))
    if disc.certainly_greater(0):
        root = disc.sqrt()
        r1, r2 = (-p + root) / 2, (-p - root) / 2
        zero = BallReal(0, prec)
        big = r1 if abs(r1).upper >= abs(r2).upper else r2
        return CubicRoots(alpha, big, zero, abs(big), (BallComplex(r1, zero), BallComplex(r2, zero)))
    raise InsufficientPrecision("discriminant sign undecided")


def real_root(prec: int = DEFAULT_BITS, spec: RecurrenceSpec = PADOVAN) -> CubicRoots:
    return characteristic_roots(spec, prec)


def radical_alpha(prec: int = DEFAULT_BITS) -> BallReal:
    """The plastic number from its Cardano radicals, as a cross-check."""
    root69 = BallReal(69, prec).sqrt()
    third = BallReal(1, prec) / 3
    r1 = (108 + 12 * root69) ** third
    r2 = (108 - 12 * root69) ** third
    return (r1 + r2) / 6


# Binet data ----------------------------------------------------------------


@dataclass(frozen=True)
class BinetCoefficients:
    """``U_{k+offset} = a*alpha**k + sum of coef*root**k`` over the other roots."""

    a: BallReal
    b_re: BallReal
    b_im: BallReal
    convention_offset: int
    roots: CubicRoots = field(repr=False, default=None)
    others: tuple[BallComplex, ...] = field(default=(), repr=False)

    @property
    def b_abs(self) -> BallReal:
        return abs(BallComplex(self.b_re, self.b_im))

    def evaluate(self, k: int) -> BallReal:
        """The Binet ball for ``U_{k + convention_offset}``."""
        total = BallComplex(self.a * self.roots.alpha ** k, 0)
        for coef, root in zip(self.others, self.roots.others):
            total = total + coef * root ** k
        return total.re


def _lagrange_coefficient(spec: RecurrenceSpec, root, others, u: Sequence[int]):
    # coefficient of root**k in the solution with U_0..U_{d-1} = u
    if spec.order == 2:
        (r2,) = others
        return (u[1] - r2 * u[0]) / (root - r2)
    r2, r3 = others
    num = u[2] - (r2 + r3) * u[1] + r2 * r3 * u[0]
    return num / ((root - r2) * (root - r3))


def _fit_listing(spec: RecurrenceSpec, roots: CubicRoots):
    alpha = BallComplex(roots.alpha, 0)
    all_roots = (alpha,) + roots.others
    u = spec.initial
    coefs = []
    for i, r in enumerate(all_roots):
        rest = all_roots[:i] + all_roots[i + 1:]
        coefs.append(_lagrange_coefficient(spec, r, rest, u))
    return coefs


def binet_fit(spec: RecurrenceSpec = PADOVAN, roots: Optional[CubicRoots] = None,
              prec: int = DEFAULT_BITS,
              target: Optional[tuple[Fraction, Fraction]] = (Fraction(72, 100), Fraction(73, 100)),
              offsets: Iterable[int] = (0, 1, -1, 2, -2)) -> BinetCoefficients:
    """Fit the Binet form against exact terms and pick the index shift.

    With ``target`` set, the shift is the one in ``offsets`` placing the
    dominant coefficient inside the open window; without it the shift is 0.
    """
    if roots is None:
        roots = characteristic_roots(spec, prec)
    coefs = _fit_listing(spec, roots)
    a0 = coefs[0].re
    candidates = [0] if target is None else list(offsets)
    for delta in candidates:
        a = a0 * roots.alpha ** delta if delta >= 0 else a0 / roots.alpha ** -delta
        if target is not None and not a.inside(*target):
            continue
        shifted = tuple(c * _complex_pow(r, delta) for c, r in zip(coefs[1:], roots.others))
        b = shifted[0]
        return BinetCoefficients(a, b.re, b.im, delta, roots, shifted)
    raise ConventionMismatch(
        f"{spec.name}: no offset in {candidates} puts a in {target}; a(0) = {a0}")


def _complex_pow(z: BallComplex, e: int) -> BallComplex:
    if e >= 0:
        return z ** e
    return BallComplex(1, 0, z.prec) / z ** -e


def binet_residual(k: int, binet: Optional[BinetCoefficients] = None) -> BallReal:
    """Ball whose upper end bounds ``|U_{k+offset} - a*alpha**k|``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if binet is None:
        binet = _default_binet()
    total = BallReal(0, binet.a.prec)
    for coef, root in zip(binet.others, binet.roots.others):
        total = total + abs(coef) * abs(root) ** k
    return total


_DEFAULT_BINET: dict[int, BinetCoefficients] = {}
_DEFAULT_LOCK = threading.Lock()


def _default_binet(prec: int = DEFAULT_BITS) -> BinetCoefficients:
    with _DEFAULT_LOCK:
        if prec not in _DEFAULT_BINET:
            _DEFAULT_BINET[prec] = binet_fit(PADOVAN, prec=prec)
        return _DEFAULT_BINET[prec]


def dominant_coefficient_exact(spec: RecurrenceSpec = PADOVAN, offset: int = 1) -> tuple[Fraction, ...]:
    """The dominant Binet coefficient as an exact element of Q(alpha).

    Returns ``(e_0, ..., e_{d-1})`` with the coefficient equal to
    ``sum e_i alpha**i``, reduced modulo the characteristic polynomial.
    """
    x = sympy.Symbol("x")
    f = sympy.Poly(spec.characteristic(), x, domain="QQ")
    if spec.order == 2:
        # U_k = (U_1 - r2 U_0)/(alpha - r2) alpha^k with r2 = c1 - alpha
        r2 = sympy.Poly(spec.coefficients[0], x, domain="QQ") - sympy.Poly(x, x, domain="QQ")
        numerator = spec.initial[1] - r2 * spec.initial[0]
        denominator = sympy.Poly(x, x, domain="QQ") - r2
    elif spec.order == 3:
        c1, c2, _ = spec.coefficients
        xp = sympy.Poly(x, x, domain="QQ")
        p = xp - c1
        q = xp * xp - c1 * xp - c2
        u = spec.initial
        numerator = p * u[1] + q * u[0] + u[2]
        denominator = f.diff(x)
    else:
        raise ValueError("only orders 2 and 3 are supported")
    inverse = sympy.invert(sympy.Poly(denominator, x, domain="QQ"), f)
    shift = sympy.Poly(x, x, domain="QQ") ** offset if offset >= 0 else \
        sympy.invert(sympy.Poly(x, x, domain="QQ") ** -offset, f)
    value = (sympy.Poly(numerator, x, domain="QQ") * inverse * shift).rem(f)
    coeffs = [Fraction(int(c.p), int(c.q)) for c in reversed(value.all_coeffs())]
    return tuple(coeffs + [Fraction(0)] * (spec.order - len(coeffs)))


# growth bounds -------------------------------------------------------------


@dataclass(frozen=True)
class GrowthFailure:
    check: str
    index: int
    reason: str


@dataclass(frozen=True)
class GrowthReport:
    """Outcome of the three growth checks over a range of indices."""

    analytic_range: tuple[int, int]
    failures: tuple[GrowthFailure, ...]

    def failed(self, check: str) -> list[int]:
        return [f.index for f in self.failures if f.check == check]

    @property
    def analytic_ok(self) -> bool:
        return not self.failed("analytic")


def _between(lo: BallReal, value: int, hi: BallReal) -> Optional[str]:
    if lo.certainly_at_most(value) and hi.lower >= value:
        return None
    if lo.certainly_greater(value):
        return "lower bound exceeds term"
    if hi.certainly_less(value):
        return "term exceeds upper bound"
    return "undecided at working precision"


def growth_bounds_check(k_range: Iterable[int], prec: int = DEFAULT_BITS,
                        spec: RecurrenceSpec = PADOVAN) -> GrowthReport:
    """Check ``alpha**(k-2) <= U_{k+1} <= alpha**(k-1)`` and two listing variants.

    Three checks, each reported separately:

    * ``analytic``: the shifted form above, for every ``k`` in ``k_range``.
    * ``listing_as_printed``: ``alpha**(n-2) <= U_n <= alpha**(n-1)`` for ``n >= 4``.
    * ``listing_translated``: ``alpha**(n-3) <= U_n <= alpha**(n-1)`` for ``n >= 1``.
    """
    ks = sorted(set(k_range))
    if not ks:
        return GrowthReport((0, -1), ())
    alpha = characteristic_roots(spec, prec).alpha
    top = ks[-1] + 1
    values = terms(spec, top)

    def power(e: int) -> BallReal:
        return alpha ** e if e >= 0 else 1 / alpha ** -e

    failures = []
    for k in ks:
        reason = _between(power(k - 2), values[k + 1], power(k - 1))
        if reason:
            failures.append(GrowthFailure("analytic", k, reason))
    for n in range(max(4, ks[0]), top + 1):
        reason = _between(power(n - 2), values[n], power(n - 1))
        if reason:
            failures.append(GrowthFailure("listing_as_printed", n, reason))
    for n in range(max(1, ks[0]), top + 1):
        reason = _between(power(n - 3), values[n], power(n - 1))
        if reason:
            failures.append(GrowthFailure("listing_translated", n, reason))
    return GrowthReport((ks[0], ks[-1]), tuple(failures))
