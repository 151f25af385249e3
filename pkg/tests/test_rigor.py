import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pillai_cert.rigor import (
    AmbiguousNearestInteger,
    BallReal,
    InsufficientPrecision,
    NonPositiveInput,
    PrecisionExhausted,
    PrecisionPolicy,
    Sign,
    certified_sign,
    nearest_int_distance,
    parse_interval,
    with_refinement,
)


def mp_inside(ball: BallReal, value) -> bool:
    lo, hi = ball.lower, ball.upper
    return mpmath.mpf(lo.numerator) / lo.denominator <= value <= mpmath.mpf(hi.numerator) / hi.denominator


def random_rational(rng: random.Random) -> Fraction:
    num = rng.randint(-10 ** rng.randint(1, 30), 10 ** rng.randint(1, 30))
    den = rng.randint(1, 10 ** rng.randint(1, 25))
    return Fraction(num, den)


def test_inclusion_randomized_rationals():
    # 10^4 cases: every result must contain the exact rational value
    rng = random.Random(20240611)
    ops = [
        ("add", lambda x, y: x + y),
        ("sub", lambda x, y: x - y),
        ("mul", lambda x, y: x * y),
        ("div", lambda x, y: x / y),
    ]
    for i in range(10_000):
        a, b = random_rational(rng), random_rational(rng)
        if b == 0:
            b = Fraction(1, 3)
        prec = rng.choice([53, 64, 128, 192, 300])
        name, op = ops[i % 4]
        got = op(BallReal(a, prec), BallReal(b, prec))
        assert got.contains(op(a, b)), (name, a, b, prec)


def test_transcendental_inclusion_against_mpmath():
    rng = random.Random(7)
    mpmath.mp.prec = 600
    for _ in range(400):
        x = Fraction(rng.randint(1, 10 ** 12), rng.randint(1, 10 ** 9))
        prec = rng.choice([64, 192, 400])
        xm = mpmath.mpf(x.numerator) / x.denominator
        assert mp_inside(BallReal(x, prec).log(), mpmath.log(xm))
        assert mp_inside(BallReal(x, prec).sqrt(), mpmath.sqrt(xm))
        small = Fraction(rng.randint(-5000, 5000), 100)
        assert mp_inside(BallReal(small, prec).exp(), mpmath.exp(mpmath.mpf(small.numerator) / small.denominator))


@settings(max_examples=300, deadline=None)
@given(st.fractions(min_value=-10 ** 6, max_value=10 ** 6, max_denominator=10 ** 8),
       st.integers(min_value=0, max_value=12))
def test_integer_powers_contain_exact(x, e):
    assert (BallReal(x, 128) ** e).contains(x ** e)


@settings(max_examples=300, deadline=None)
@given(st.fractions(min_value=-1000, max_value=1000, max_denominator=10 ** 6),
       st.fractions(min_value=0, max_value=Fraction(1, 1000), max_denominator=10 ** 9))
def test_from_interval_encloses(lo, width):
    ball = BallReal.from_interval(lo, lo + width, 96)
    assert ball.lower <= lo and ball.upper >= lo + width


def test_integers_are_exact():
    b = BallReal(12345678901234567890123, 64)
    assert b.is_exact
    assert b.midpoint == 12345678901234567890123


def test_negation_keeps_precision():
    x = BallReal(2, 256).sqrt()
    assert (-x).radius <= x.radius * 2
    assert (-x).radius < Fraction(1, 2 ** 240)


def test_floor_is_certified():
    assert BallReal(Fraction(7, 2), 64).floor() == 3
    straddle = BallReal.from_interval(Fraction(99, 100), Fraction(101, 100), 64)
    with pytest.raises(InsufficientPrecision):
        straddle.floor()


def test_log_rejects_nonpositive():
    with pytest.raises(NonPositiveInput) as info:
        BallReal.from_interval(-1, 1, 64).log()
    assert info.value.retryable
    with pytest.raises(NonPositiveInput):
        BallReal(-3, 64).log()


def test_division_by_straddling_ball_is_retryable():
    with pytest.raises(InsufficientPrecision):
        BallReal(1) / BallReal.from_interval(-1, 1)
    with pytest.raises(ZeroDivisionError):
        BallReal(1) / BallReal(0)


def test_certified_sign():
    assert certified_sign(BallReal(Fraction(1, 10 ** 30), 192)) is Sign.POSITIVE
    assert certified_sign(BallReal(-5)) is Sign.NEGATIVE
    assert certified_sign(BallReal.from_interval(-1, 1)) is Sign.UNDECIDABLE


def test_nearest_int_distance():
    d = nearest_int_distance(BallReal(Fraction(37, 10), 128))
    assert d.contains(Fraction(3, 10))
    assert d.lower >= 0 and d.upper <= Fraction(1, 2)
    half = nearest_int_distance(BallReal(Fraction(5, 2), 128))
    assert half.upper <= Fraction(1, 2) and half.contains(Fraction(1, 2))
    with pytest.raises(AmbiguousNearestInteger):
        nearest_int_distance(BallReal.from_interval(0, 1, 64))


@settings(max_examples=300, deadline=None)
@given(st.fractions(min_value=-10 ** 9, max_value=10 ** 9, max_denominator=10 ** 12))
def test_nearest_int_distance_contains_exact(x):
    exact = abs(x - round(x))
    d = nearest_int_distance(BallReal(x, 200))
    assert d.contains(min(exact, 1 - exact) if exact > Fraction(1, 2) else exact)
    assert 0 <= d.lower and d.upper <= Fraction(1, 2)


def test_interval_string_round_trip():
    x = BallReal(3, 256).log()
    back = parse_interval(x.interval_string(40), 256)
    assert back.lower <= x.lower and back.upper >= x.upper


def test_refinement_grows_until_decided():
    seen = []

    def computation(bits):
        seen.append(bits)
        if bits < 500:
            raise InsufficientPrecision("more")
        return bits

    assert with_refinement(computation, PrecisionPolicy(100, 4000)) == 800
    assert seen == [100, 200, 400, 800]
    with pytest.raises(PrecisionExhausted):
        with_refinement(computation, PrecisionPolicy(64, 256))


def test_policy_validation():
    with pytest.raises(ValueError):
        PrecisionPolicy(512, 256)
    with pytest.raises(ValueError):
        PrecisionPolicy(64, 128, 1)
