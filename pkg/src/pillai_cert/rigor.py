"""Ball arithmetic with certified error radii.

Every inexact real in the package is a :class:`BallReal`: a midpoint and a
non-negative radius such that the represented number lies in
``[midpoint - radius, midpoint + radius]``.  The arithmetic itself is done by
Arb (through python-flint), which rounds every endpoint outward, so each
operation returns a ball containing the exact image of its inputs.

Arb keeps its working precision in a process-wide context.  Each operation
sets that context to the precision carried by its operands while holding a
lock, so balls can be shared between threads.
"""
from __future__ import annotations

import enum
import math
import re
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal, localcontext
from fractions import Fraction
from typing import Callable, Iterator, Optional, TypeVar, Union

import flint

DEFAULT_BITS = 192

Number = Union[int, Fraction, float, str, "BallReal"]
T = TypeVar("T")

_FLINT_LOCK = threading.RLock()


class RigorError(Exception):
    """Base class for failures of certified computation."""

    retryable = False


class InsufficientPrecision(RigorError):
    """The answer cannot be decided at the current working precision."""

    retryable = True


class AmbiguousNearestInteger(InsufficientPrecision):
    """Ball too wide to locate its nearest integer."""


class NonPositiveInput(RigorError, ValueError):
    """A function defined on the positive reals received a ball touching 0."""

    def __init__(self, message: str, straddles_zero: bool = False):
        super().__init__(message)
        # a ball around a positive value may simply be too wide
        self.retryable = straddles_zero


class PrecisionExhausted(RigorError):
    """Refinement reached ``max_bits`` without deciding the computation."""


@contextmanager
def _working_precision(bits: int) -> Iterator[None]:
    with _FLINT_LOCK:
        saved = flint.ctx.prec
        flint.ctx.prec = bits
        try:
            yield
        finally:
            flint.ctx.prec = saved


def _to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    if isinstance(value, (str, Decimal)):
        return Fraction(Decimal(value))
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def _arb_to_fraction(point: "flint.arb") -> Fraction:
    if not point.is_finite():
        raise InsufficientPrecision("ball is not finite")
    man, exp = point.man_exp()
    man = int(man)
    exp = int(exp)
    if exp >= 0:
        return Fraction(man << exp)
    return Fraction(man, 1 << -exp)


def _coerce(value) -> "flint.arb":
    # call only while holding the working precision
    if isinstance(value, BallReal):
        return value._arb
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return flint.arb(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("non-finite float")
        return flint.arb(value)
    if isinstance(value, (Fraction, str, Decimal)):
        q = _to_fraction(value)
        if q.denominator == 1:
            return flint.arb(q.numerator)
        return flint.arb(flint.fmpq(q.numerator, q.denominator))
    raise TypeError(f"unsupported operand type {type(value).__name__}")


def _prec_of(*values) -> int:
    return max((v.prec for v in values if isinstance(v, BallReal)), default=DEFAULT_BITS)


class BallReal:
    """A real number enclosed by a midpoint and an error radius.

    Instances are immutable.  Integers (and dyadic rationals that fit the
    precision) become radius-0 balls; other rationals get the smallest
    enclosing ball Arb produces at ``prec`` bits.
    """

    __slots__ = ("_arb", "prec")

    def __init__(self, value: Number = 0, prec: int = DEFAULT_BITS):
        if prec < 2:
            raise ValueError("precision must be at least 2 bits")
        with _working_precision(prec):
            if isinstance(value, BallReal):
                inner = +value._arb
            else:
                inner = _coerce(value)
        object.__setattr__(self, "_arb", inner)
        object.__setattr__(self, "prec", int(prec))

    def __setattr__(self, name, value):
        raise AttributeError("BallReal is immutable")

    @classmethod
    def _wrap(cls, inner: "flint.arb", prec: int) -> "BallReal":
        obj = object.__new__(cls)
        object.__setattr__(obj, "_arb", inner)
        object.__setattr__(obj, "prec", prec)
        return obj

    @classmethod
    def from_interval(cls, lower, upper, prec: int = DEFAULT_BITS,
                      within: Optional[tuple[Number, Number]] = None) -> "BallReal":
        """A ball containing the closed interval [lower, upper].

        With ``within=(floor, ceil)`` the ball is additionally kept inside
        [floor, ceil], which must itself contain [lower, upper].
        """
        lo, hi = _to_fraction(lower), _to_fraction(upper)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        mid, rad = _center(lo, hi)
        inner = _exact_ball(mid, rad, prec)
        if within is not None:
            floor, ceil = (_to_fraction(w) for w in within)
            if not floor <= lo <= hi <= ceil:
                raise ValueError("interval not inside its bounds")
            # Arb may round the radius up, so anchor on the radius it stored
            if mid - _arb_to_fraction(inner.rad()) < floor:
                inner = _anchored_ball(floor, (hi - floor) / 2, +1, prec)
            elif mid + _arb_to_fraction(inner.rad()) > ceil:
                inner = _anchored_ball(ceil, (ceil - lo) / 2, -1, prec)
            result = cls._wrap(inner, prec)
            if result.lower < floor or result.upper > ceil:
                raise InsufficientPrecision("cannot enclose interval inside its bounds")
            return result
        return cls._wrap(inner, prec)

    @classmethod
    def hull(cls, *balls: "BallReal") -> "BallReal":
        if not balls:
            raise ValueError("hull of nothing")
        lo = min(b.lower for b in balls)
        hi = max(b.upper for b in balls)
        return cls.from_interval(lo, hi, max(b.prec for b in balls))

    # exact views -----------------------------------------------------------

    @property
    def midpoint(self) -> Fraction:
        return _arb_to_fraction(self._arb.mid())

    @property
    def radius(self) -> Fraction:
        return _arb_to_fraction(self._arb.rad())

    @property
    def lower(self) -> Fraction:
        return self.midpoint - self.radius

    @property
    def upper(self) -> Fraction:
        return self.midpoint + self.radius

    @property
    def is_exact(self) -> bool:
        return self._arb.rad() == 0

    def __float__(self) -> float:
        return float(self.midpoint)

    def __repr__(self) -> str:
        return f"BallReal({self._arb.str(radius=True)}, prec={self.prec})"

    def __str__(self) -> str:
        return self.interval_string(12)

    def with_prec(self, prec: int) -> "BallReal":
        """Same enclosure, re-tagged to compute at ``prec`` bits from now on."""
        return BallReal._wrap(self._arb, prec)

    # arithmetic ------------------------------------------------------------

    def _binary(self, other, op) -> "BallReal":
        prec = _prec_of(self, other)
        with _working_precision(prec):
            result = op(self._arb, _coerce(other))
        return BallReal._wrap(result, prec)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    def __radd__(self, other):
        return self._binary(other, lambda a, b: b + a)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, lambda a, b: a * b)

    def __rmul__(self, other):
        return self._binary(other, lambda a, b: b * a)

    def __truediv__(self, other):
        divisor = other if isinstance(other, BallReal) else BallReal(other, _prec_of(self))
        _require_nonzero(divisor)
        return self._binary(divisor, lambda a, b: a / b)

    def __rtruediv__(self, other):
        _require_nonzero(self)
        return self._binary(other, lambda a, b: b / a)

    def __neg__(self):
        with _working_precision(self.prec):
            return BallReal._wrap(-self._arb, self.prec)

    def __pos__(self):
        return self

    def __abs__(self):
        with _working_precision(self.prec):
            return BallReal._wrap(abs(self._arb), self.prec)

    def __pow__(self, exponent):
        if isinstance(exponent, int) and not isinstance(exponent, bool):
            if exponent < 0:
                return 1 / (self ** -exponent)
            with _working_precision(self.prec):
                return BallReal._wrap(self._arb ** exponent, self.prec)
        return (ball_log(self) * exponent).exp()

    def sqrt(self) -> "BallReal":
        if self.upper < 0:
            raise NonPositiveInput(f"sqrt of negative ball {self}")
        if self.lower < 0:
            # the root over the non-negative part of the ball
            top = BallReal(self.upper, self.prec).sqrt()
            return BallReal.from_interval(0, top.upper, self.prec)
        with _working_precision(self.prec):
            return BallReal._wrap(self._arb.sqrt(), self.prec)

    def log(self) -> "BallReal":
        return ball_log(self)

    def exp(self) -> "BallReal":
        with _working_precision(self.prec):
            return BallReal._wrap(self._arb.exp(), self.prec)

    def floor(self) -> int:
        """The floor of every point in the ball, or InsufficientPrecision."""
        lo, hi = self.lower, self.upper
        f = math.floor(lo)
        if math.floor(hi) != f:
            raise InsufficientPrecision(f"floor undecided for {self}")
        return f

    # comparisons -----------------------------------------------------------

    def contains(self, value: Number) -> bool:
        if isinstance(value, BallReal):
            return self.lower <= value.lower and value.upper <= self.upper
        q = _to_fraction(value)
        return self.lower <= q <= self.upper

    def overlaps(self, other: "BallReal") -> bool:
        return self.lower <= other.upper and other.lower <= self.upper

    def inside(self, lo: Number, hi: Number) -> bool:
        """True iff the whole ball lies in the open interval (lo, hi)."""
        return _to_fraction(lo) < self.lower and self.upper < _to_fraction(hi)

    def certainly_less(self, other: Number) -> bool:
        other_lo = other.lower if isinstance(other, BallReal) else _to_fraction(other)
        return self.upper < other_lo

    def certainly_greater(self, other: Number) -> bool:
        other_hi = other.upper if isinstance(other, BallReal) else _to_fraction(other)
        return self.lower > other_hi

    def certainly_at_most(self, other: Number) -> bool:
        other_lo = other.lower if isinstance(other, BallReal) else _to_fraction(other)
        return self.upper <= other_lo

    def sign(self) -> "Sign":
        return certified_sign(self)

    def intersect(self, other: "BallReal") -> "BallReal":
        lo = max(self.lower, other.lower)
        hi = min(self.upper, other.upper)
        if lo > hi:
            raise ValueError("balls do not intersect")
        return BallReal.from_interval(lo, hi, _prec_of(self, other))

    # serialization -----------------------------------------------------------

    def interval(self, digits: int = 40) -> tuple[str, str]:
        """Decimal endpoints, lower rounded toward -inf and upper toward +inf."""
        return (_decimal_string(self.lower, digits, ROUND_FLOOR),
                _decimal_string(self.upper, digits, ROUND_CEILING))

    def interval_string(self, digits: int = 40) -> str:
        lo, hi = self.interval(digits)
        return f"[{lo}, {hi}]"


def _mag_ceil(x: Fraction) -> Fraction:
    """Round a non-negative rational up to a 30-bit mantissa, as Arb radii are stored."""
    if x <= 0:
        return Fraction(0)
    e = x.numerator.bit_length() - x.denominator.bit_length()
    shift = 29 - e
    scaled = x * (Fraction(2) ** shift)
    n = -((-scaled.numerator) // scaled.denominator)
    return Fraction(n) / (Fraction(2) ** shift)


def _center(lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
    if lo == hi and _is_dyadic(lo):
        return lo, Fraction(0)
    half = (hi - lo) / 2
    if half == 0:
        half = abs(lo) / (1 << 200) or Fraction(1, 1 << 200)
    rad = _mag_ceil(half)
    # a dyadic midpoint fine enough that rounding it costs < 2^-25 of the radius
    shift = 25 - (rad.numerator.bit_length() - rad.denominator.bit_length())
    scale = Fraction(2) ** shift
    mid = Fraction(round((lo + hi) / 2 * scale)) / scale
    rad = _mag_ceil(max(hi - mid, mid - lo))
    return mid, rad


def _is_dyadic(q: Fraction) -> bool:
    d = q.denominator
    return d & (d - 1) == 0


def _exact_ball(mid: Fraction, rad: Fraction, prec: int) -> "flint.arb":
    if not _is_dyadic(mid):
        raise ValueError("midpoint must be dyadic")
    bits = max(prec, abs(mid.numerator).bit_length() + 2)
    exp = -(mid.denominator.bit_length() - 1)
    with _working_precision(bits):
        centre = flint.arb((mid.numerator, exp))
        if rad == 0:
            return centre
        radius = _mag_ceil(rad)
        rexp = -(radius.denominator.bit_length() - 1)
        return flint.arb((mid.numerator, exp), (radius.numerator, rexp))


def _anchored_ball(anchor: Fraction, half_width: Fraction, direction: int, prec: int) -> "flint.arb":
    """Ball with one endpoint exactly at ``anchor``, extending in ``direction``."""
    probe = _exact_ball(anchor, half_width, prec)
    actual = _arb_to_fraction(probe.rad())
    return _exact_ball(anchor + direction * actual, half_width, prec)


def _require_nonzero(x: BallReal) -> None:
    # Arb comparisons are true only when certain
    if x._arb > 0 or x._arb < 0:
        return
    if x.lower <= 0 <= x.upper:
        if x.is_exact:
            raise ZeroDivisionError("division by exact zero")
        raise InsufficientPrecision(f"divisor {x} not certified nonzero")


def _decimal_string(q: Fraction, digits: int, rounding) -> str:
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = rounding
        d = Decimal(q.numerator) / Decimal(q.denominator)
    return str(d)


_INTERVAL_RE = re.compile(r"^\s*\[\s*([^,\s]+)\s*,\s*([^\]\s]+)\s*\]\s*$")


def parse_interval(text: str, prec: int = DEFAULT_BITS) -> BallReal:
    """Inverse of :meth:`BallReal.interval_string`."""
    match = _INTERVAL_RE.match(text)
    if not match:
        raise ValueError(f"not a decimal interval: {text!r}")
    return BallReal.from_interval(match.group(1), match.group(2), prec)


class Sign(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNDECIDABLE = "undecidable"


def certified_sign(x: BallReal) -> Sign:
    if x._arb > 0:
        return Sign.POSITIVE
    if x._arb < 0:
        return Sign.NEGATIVE
    if x.lower > 0:
        return Sign.POSITIVE
    if x.upper < 0:
        return Sign.NEGATIVE
    return Sign.UNDECIDABLE


def ball_log(x: BallReal) -> BallReal:
    """Natural logarithm; the input ball must lie strictly right of 0."""
    if x.lower <= 0:
        raise NonPositiveInput(f"log of non-positive ball {x}", straddles_zero=x.upper > 0)
    with _working_precision(x.prec):
        return BallReal._wrap(x._arb.log(), x.prec)


def nearest_int_distance(x: BallReal) -> BallReal:
    """Ball containing min |x - n| over integers n, clipped to [0, 1/2].

    The distance function is 1-Lipschitz, so the value at the midpoint
    widened by the radius is a valid enclosure.
    """
    r = x.radius
    if r >= Fraction(1, 4):
        raise AmbiguousNearestInteger(f"radius {float(r):.3g} too large for {x}")
    m = x.midpoint
    n = math.floor(m + Fraction(1, 2))
    d = abs(m - n)
    if Fraction(1, 1 << 40) < d - r and d + r < Fraction(1, 2) - Fraction(1, 1 << 40):
        # well inside (0, 1/2): |x - n| in Arb encloses it, margins absorb rounding
        with _working_precision(x.prec):
            inner = abs(x._arb - n)
        return BallReal._wrap(inner, x.prec)
    lo = max(Fraction(0), d - r)
    hi = min(Fraction(1, 2), d + r)
    return BallReal.from_interval(lo, hi, x.prec, within=(0, Fraction(1, 2)))


class BallComplex:
    """Minimal complex ball: rectangular, built from two real balls."""

    __slots__ = ("re", "im")

    def __init__(self, re: Number = 0, im: Number = 0, prec: int = DEFAULT_BITS):
        self.re = re if isinstance(re, BallReal) else BallReal(re, prec)
        self.im = im if isinstance(im, BallReal) else BallReal(im, prec)

    @property
    def prec(self) -> int:
        return max(self.re.prec, self.im.prec)

    @staticmethod
    def _lift(value) -> "BallComplex":
        if isinstance(value, BallComplex):
            return value
        return BallComplex(value, 0, _prec_of(value))

    def __add__(self, other):
        o = BallComplex._lift(other)
        return BallComplex(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = BallComplex._lift(other)
        return BallComplex(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return BallComplex._lift(other) - self

    def __neg__(self):
        return BallComplex(-self.re, -self.im)

    def __mul__(self, other):
        o = BallComplex._lift(other)
        return BallComplex(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = BallComplex._lift(other)
        denom = o.re * o.re + o.im * o.im
        return BallComplex((self.re * o.re + self.im * o.im) / denom,
                           (self.im * o.re - self.re * o.im) / denom)

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("only non-negative integer powers")
        result = BallComplex(1, 0, self.prec)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    def conjugate(self) -> "BallComplex":
        return BallComplex(self.re, -self.im)

    def __abs__(self) -> BallReal:
        return (self.re * self.re + self.im * self.im).sqrt()

    def __repr__(self) -> str:
        return f"BallComplex({self.re!r}, {self.im!r})"


@dataclass(frozen=True)
class PrecisionPolicy:
    """Schedule of working precisions tried by :func:`with_refinement`."""

    initial_bits: int = DEFAULT_BITS
    max_bits: int = 1 << 16
    growth_factor: Fraction = Fraction(2)

    def __post_init__(self):
        if self.initial_bits < 2:
            raise ValueError("initial_bits must be at least 2")
        if self.initial_bits > self.max_bits:
            raise ValueError(f"initial_bits {self.initial_bits} exceeds max_bits {self.max_bits}")
        if Fraction(self.growth_factor) <= 1:
            raise ValueError("growth_factor must exceed 1")
        object.__setattr__(self, "growth_factor", Fraction(self.growth_factor))

    def schedule(self) -> Iterator[int]:
        bits = self.initial_bits
        while bits < self.max_bits:
            yield bits
            bits = max(bits + 1, math.ceil(bits * self.growth_factor))
        yield self.max_bits


DEFAULT_POLICY = PrecisionPolicy()


def with_refinement(computation: Callable[[int], T],
                    policy: PrecisionPolicy = DEFAULT_POLICY,
                    decided: Optional[Callable[[T], bool]] = None) -> T:
    """Run ``computation(bits)`` at growing precision until it is decided.

    A run counts as undecided when it raises a retryable :class:`RigorError`
    or when ``decided`` rejects its result.
    """
    last: Optional[BaseException] = None
    for bits in policy.schedule():
        try:
            result = computation(bits)
        except RigorError as exc:
            if not exc.retryable:
                raise
            last = exc
            continue
        if decided is None or decided(result):
            return result
        last = None
    raise PrecisionExhausted(f"still undecided at {policy.max_bits} bits") from last
