import math
from fractions import Fraction

import numpy as np
import pytest

from pillai_cert.heights import (
    AlgebraicNumberDesc,
    HypothesisViolated,
    MatveevInstance,
    NotReduced,
    field_minimal_polynomial,
    guzman_luca_bound,
    height_bound,
    height_from_minpoly,
    height_rational,
    lambda1_preset,
    lambda_preset,
    matveev_constant,
    matveev_lower_bound,
)
from pillai_cert.rigor import BallReal
from pillai_cert.sequence import FIBONACCI, PADOVAN, dominant_coefficient_exact


def test_height_of_rationals():
    assert abs(float(height_rational(3)) - math.log(3)) < 1e-15
    assert abs(float(height_rational(-7, 5)) - math.log(7)) < 1e-15
    with pytest.raises(NotReduced):
        height_rational(6, 4)


def test_height_of_plastic_number():
    desc = AlgebraicNumberDesc.from_minpoly((1, 0, -1, -1), 192)
    h = height_from_minpoly(desc)
    alpha_log = 0.28119957432296184
    assert abs(float(h) - alpha_log / 3) < 1e-14


def test_minimal_polynomial_of_a():
    e = dominant_coefficient_exact(PADOVAN, 1)
    assert field_minimal_polynomial(e, PADOVAN, 192) == (23, -23, 6, -1)
    desc = AlgebraicNumberDesc.from_minpoly((23, -23, 6, -1), 192)
    # every conjugate of a has modulus below 1
    assert abs(float(height_from_minpoly(desc)) - math.log(23) / 3) < 1e-14


def test_minimal_polynomial_fibonacci():
    e = dominant_coefficient_exact(FIBONACCI, 0)
    assert field_minimal_polynomial(e, FIBONACCI, 128) == (5, 0, -1)


def test_desc_validation():
    with pytest.raises(ValueError):
        AlgebraicNumberDesc((2, 0, -4), (BallReal(1), BallReal(1)))
    with pytest.raises(ValueError):
        AlgebraicNumberDesc((1, -2), ())


def test_height_bound_rules():
    h = height_bound("sum", BallReal(1), BallReal(2))
    assert abs(float(h) - (3 + math.log(2))) < 1e-14
    assert float(height_bound("product", 1, 2)) == 3
    assert float(height_bound("power", BallReal(Fraction(1, 3)), s=-6)) == 2
    with pytest.raises(ValueError):
        height_bound("quotient", 1, 2)


def test_matveev_constant_value():
    c = matveev_constant(3, 3)
    expected = 1.4 * 30 ** 6 * 3 ** 4.5 * 9 * (1 + math.log(3))
    assert abs(float(c) / expected - 1) < 1e-14


def test_lambda_preset_coefficient():
    coef = lambda_preset(10 ** 6).coefficient()
    # log 23 * log alpha * 3 log 3 times the constant; within 2% of 7.97e12
    assert abs(float(coef) / 7.97e12 - 1) < 0.02
    assert abs(float(coef) - 7.85890974968e12) < 1e3


def test_matveev_lower_bound_grows_with_B():
    inst1 = lambda1_preset(1000, 5)
    inst2 = lambda1_preset(10 ** 9, 5)
    assert matveev_lower_bound(inst2).lower > matveev_lower_bound(inst1).upper


def test_matveev_hypotheses():
    with pytest.raises(HypothesisViolated):
        MatveevInstance(1, 1, 10, (BallReal(Fraction(1, 10)),))
    with pytest.raises(ValueError):
        MatveevInstance(2, 1, 10, (BallReal(1),))


def test_guzman_luca_values():
    assert abs(float(guzman_luca_bound(1, 100)) - 921.0340371976183) < 1e-9
    assert abs(float(guzman_luca_bound(3, Fraction(31, 10) * 10 ** 39)) / 1.8647e46 - 1) < 1e-3
    with pytest.raises(HypothesisViolated):
        guzman_luca_bound(3, 1000)


@pytest.mark.parametrize("m", [1, 2])
def test_guzman_luca_exhaustive_up_to_1e7(m):
    # for every integer x <= 10^7 take the tightest Y = x / (log x)^m allowed
    floor = (4 * m * m) ** m
    x = np.arange(3, 10 ** 7 + 1, dtype=np.float64)
    y = x / np.log(x) ** m
    keep = y > floor
    x, y = x[keep], y[keep]
    bound = 2.0 ** m * y * np.log(y) ** m
    margin = bound / x
    assert margin.min() > 1.0 + 1e-6
    # spot check the worst case in exact arithmetic
    worst = int(x[np.argmin(margin)])
    y_exact = BallReal(worst, 128) / BallReal(worst, 128).log() ** m
    assert guzman_luca_bound(m, y_exact).lower > worst
