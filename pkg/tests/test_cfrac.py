import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pillai_cert.cfrac import (
    EpsilonNeverPositive,
    IndexBeyondCertified,
    ReductionProblem,
    convergent,
    dp_reduce,
    expand,
    family_reduce,
)
from pillai_cert.rigor import BallReal, PrecisionExhausted, PrecisionPolicy
from pillai_cert.sequence import PADOVAN, binet_fit, characteristic_roots

M = 2 * 10 ** 46


def log_alpha(bits):
    return characteristic_roots(PADOVAN, bits).alpha.log()


def tau(bits):
    return log_alpha(bits) / BallReal(3, bits).log()


def mu(bits):
    return binet_fit(PADOVAN, prec=bits).a.log() / BallReal(3, bits).log()


def mp_quotients(x, count):
    out = []
    for _ in range(count):
        a = int(mpmath.floor(x))
        out.append(a)
        x = 1 / (x - a)
    return out


@pytest.fixture(scope="module")
def tau_expansion():
    return expand(tau, q_exceeds=6 * M, extra=16)


def test_quotients_match_oracle(tau_expansion):
    with mpmath.workdps(1500):
        alpha = max(r.real for r in mpmath.polyroots([1, 0, -1, -1], maxsteps=500, extraprec=6000)
                    if abs(r.imag) < mpmath.mpf(10) ** -1000)
        oracle = mp_quotients(mpmath.log(alpha) / mpmath.log(3), len(tau_expansion.quotients))
    assert list(tau_expansion.quotients) == oracle


def test_convergent_88(tau_expansion):
    p, q = convergent(tau_expansion, 88)
    assert tau_expansion.first_index_above(6 * M) == 88
    assert q == 12201370578769620000479260876419428374896683408344
    assert p == 3123049185137266854491675319812527194766363593581
    with pytest.raises(IndexBeyondCertified):
        convergent(tau_expansion, tau_expansion.certified_through + 1)


def test_convergent_recurrence_and_coprimality(tau_expansion):
    a = tau_expansion.quotients
    conv = tau_expansion.convergents
    for k in range(2, len(conv)):
        assert conv[k][0] == a[k] * conv[k - 1][0] + conv[k - 2][0]
        assert conv[k][1] == a[k] * conv[k - 1][1] + conv[k - 2][1]
    for k in range(1, len(conv)):
        p, q = conv[k]
        assert math.gcd(p, q) == 1
        assert conv[k][0] * conv[k - 1][1] - conv[k - 1][0] * conv[k][1] == (-1) ** (k + 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=10 ** 6).filter(lambda n: math.isqrt(n) ** 2 != n))
def test_sqrt_expansions_satisfy_recurrence(n):
    exp = expand(lambda bits: BallReal(n, bits).sqrt(), count=25)
    for k in range(len(exp.convergents)):
        p, q = exp.convergents[k]
        assert math.gcd(p, q) == 1
        if k >= 1:
            p0, q0 = exp.convergents[k - 1]
            assert p * q0 - p0 * q == (-1) ** (k + 1)
    # |sqrt(n) - p/q| < 1/q^2
    p, q = exp.convergents[-1]
    assert abs(p * p - n * q * q) < 2 * math.isqrt(n) + 2


def test_golden_ratio_and_rationals():
    phi = expand(lambda bits: (1 + BallReal(5, bits).sqrt()) / 2, count=40)
    assert set(phi.quotients) == {1}
    r = expand(lambda bits: BallReal(Fraction(13, 8), bits), count=10)
    assert r.terminated and list(r.quotients) == [1, 1, 1, 1, 2]


def test_expand_needs_a_target():
    with pytest.raises(ValueError):
        expand(tau)


def test_expand_precision_exhausted():
    with pytest.raises(PrecisionExhausted):
        expand(tau, count=200, policy=PrecisionPolicy(64, 128))


def test_round_gamma_alpha_branch(tau_expansion):
    prob = ReductionProblem(tau, mu, BallReal(36), characteristic_roots(PADOVAN, 192).alpha, M)
    out = dp_reduce(prob, expansion=tau_expansion)
    assert out.convergent_index == 88
    assert out.epsilon.lower > Fraction(394, 1000)
    assert 0.4365 < float(out.epsilon) < 0.4366
    assert out.w_bound == 418 and out.max_gap == 417
    assert 417.6 < float(out.x_upper) < 417.7


def test_round_gamma_base_branch(tau_expansion):
    prob = ReductionProblem(tau, mu, BallReal(9), BallReal(3), M)
    out = dp_reduce(prob, expansion=tau_expansion)
    assert out.max_gap == 105


def test_epsilon_never_positive_for_mu_zero(tau_expansion):
    prob = ReductionProblem(tau, lambda bits: BallReal(0, bits), BallReal(9), BallReal(3), M)
    with pytest.raises(EpsilonNeverPositive):
        dp_reduce(prob, expansion=tau_expansion, tries=3)


def test_family_resolves_exceptional_keys(tau_expansion):
    def member(l, bits):
        # mu_l = log(a (alpha^l - 1)) / log 3
        alpha = characteristic_roots(PADOVAN, bits).alpha
        a = binet_fit(PADOVAN, prec=bits).a
        return (a * (alpha ** l - 1)).log() / BallReal(3, bits).log()

    template = ReductionProblem(tau, lambda bits: BallReal(0, bits), BallReal(9), BallReal(3), M)
    fam = family_reduce(template, member, range(285, 300), expansion=tau_expansion)
    assert fam.complete
    assert 294 in fam.exceptional
    assert fam.per_key[294].convergent_index > 88
    assert fam.max_gap <= 110
    assert fam.min_epsilon.lower > 0


def test_family_rejects_empty():
    template = ReductionProblem(tau, mu, BallReal(9), BallReal(3), M)
    with pytest.raises(ValueError):
        family_reduce(template, lambda key, bits: mu(bits), [])


def test_problem_validation():
    with pytest.raises(ValueError):
        ReductionProblem(tau, mu, BallReal(9), BallReal(1), M)
    with pytest.raises(ValueError):
        ReductionProblem(tau, mu, BallReal(0), BallReal(3), M)
