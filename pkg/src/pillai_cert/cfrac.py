"""Certified continued fractions and the Dujella-Petho reduction.

A *provider* is a callable ``provider(bits) -> BallReal`` returning an
enclosure of a fixed real at the requested working precision.  Quotients are
read off the ball of each complete quotient and kept only when both
endpoints share a floor, so every stored quotient is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Optional

from .rigor import (
    DEFAULT_POLICY,
    BallReal,
    InsufficientPrecision,
    PrecisionExhausted,
    PrecisionPolicy,
    RigorError,
    Sign,
    certified_sign,
    nearest_int_distance,
    with_refinement,
)

__all__ = [
    "Provider",
    "CFExpansion",
    "IndexBeyondCertified",
    "EpsilonNeverPositive",
    "expand",
    "convergent",
    "ReductionProblem",
    "ReductionOutcome",
    "FamilyOutcome",
    "dp_reduce",
    "family_reduce",
]

Provider = Callable[[int], BallReal]


class IndexBeyondCertified(RigorError, IndexError):
    """Asked for a convergent past the certified quotients."""


class EpsilonNeverPositive(RigorError):
    """No tried convergent gave a positive epsilon."""


@dataclass(frozen=True)
class CFExpansion:
    quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    certified_through: int
    source_precision: int
    terminated: bool = False

    def first_index_above(self, threshold: int) -> Optional[int]:
        for k, (_, q) in enumerate(self.convergents):
            if q > threshold:
                return k
        return None

    def as_dict(self) -> dict:
        return {
            "quotients": [str(a) for a in self.quotients],
            "certified_through": self.certified_through,
            "source_precision": self.source_precision,
            "terminated": self.terminated,
        }


def _convergents(quotients: Iterable[int]) -> list[tuple[int, int]]:
    out = []
    p_prev, q_prev, p, q = 0, 1, 1, 0
    for a in quotients:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        out.append((p, q))
    return out


def _exact_quotients(value: Fraction) -> list[int]:
    quotients = []
    while True:
        a = math.floor(value)
        quotients.append(a)
        value -= a
        if value == 0:
            return quotients
        value = 1 / value


def _quotients_at(x: BallReal) -> tuple[list[int], bool]:
    if x.is_exact:
        return _exact_quotients(x.midpoint), True
    quotients: list[int] = []
    ball = x
    while True:
        try:
            a = ball.floor()
        except InsufficientPrecision:
            return quotients, False
        quotients.append(a)
        frac = ball - a
        if frac.is_exact and frac.midpoint == 0:
            return quotients, True
        if frac.lower <= 0:
            return quotients, False
        ball = 1 / frac


def _enough(quotients: list[int], count: Optional[int], q_exceeds: Optional[int], extra: int) -> bool:
    if count is not None and len(quotients) < count:
        return False
    if q_exceeds is not None:
        convs = _convergents(quotients)
        hit = next((k for k, (_, q) in enumerate(convs) if q > q_exceeds), None)
        if hit is None or len(quotients) < hit + 1 + extra:
            return False
    return True


def expand(x: Provider, count: Optional[int] = None, q_exceeds: Optional[int] = None,
           extra: int = 0, policy: PrecisionPolicy = DEFAULT_POLICY) -> CFExpansion:
    """Certified partial quotients of ``x``.

    Stops after ``count`` quotients, or once a convergent denominator exceeds
    ``q_exceeds`` plus ``extra`` further quotients, whichever needs more.
    A rational input whose expansion ends sooner is returned as terminated.
    """
    if count is None and q_exceeds is None:
        raise ValueError("give count or q_exceeds")

    def attempt(bits: int) -> CFExpansion:
        quotients, terminated = _quotients_at(x(bits))
        if not terminated and not _enough(quotients, count, q_exceeds, extra):
            raise InsufficientPrecision(f"only {len(quotients)} quotients certified at {bits} bits")
        if count is not None and q_exceeds is None:
            quotients = quotients[:count]
        elif q_exceeds is not None:
            convs = _convergents(quotients)
            hit = next((k for k, (_, q) in enumerate(convs) if q > q_exceeds), len(quotients) - 1)
            keep = max(hit + 1 + extra, count or 0)
            quotients = quotients[:keep]
        convs = _convergents(quotients)
        return CFExpansion(tuple(quotients), tuple(convs), len(quotients) - 1, bits, terminated)

    return with_refinement(attempt, policy)


def convergent(exp: CFExpansion, k: int) -> tuple[int, int]:
    """``(p_k, q_k)`` in lowest terms."""
    if k < 0 or k > exp.certified_through:
        raise IndexBeyondCertified(f"convergent {k} requested, certified through {exp.certified_through}")
    return exp.convergents[k]


# reduction ----------------------------------------------------------------------


@dataclass(frozen=True)
class ReductionProblem:
    """``0 < |u tau - v + mu| < A B**(-w)`` with ``u <= M``."""

    tau: Provider
    mu: Provider
    A: BallReal
    B: BallReal
    M: int
    label: str = ""

    def __post_init__(self):
        if not self.A.lower > 0:
            raise ValueError("A must be certified positive")
        if not self.B.lower > 1:
            raise ValueError("B must be certified greater than 1")
        if self.M < 1:
            raise ValueError("M must be positive")


@dataclass(frozen=True)
class ReductionOutcome:
    """A successful application of the lemma at one convergent.

    Solutions satisfy ``w < log(A q / eps) / log B <= x_upper``, so
    ``w_bound = ceil(x_upper)`` is excluded and ``max_gap`` is the largest
    ``w`` still possible.
    """

    convergent_index: int
    q: int
    epsilon: BallReal
    w_bound: int
    x_upper: Fraction

    @property
    def epsilon_lower(self) -> Fraction:
        return self.epsilon.lower

    @property
    def max_gap(self) -> int:
        return self.w_bound - 1

    def as_dict(self, digits: int = 30) -> dict:
        return {
            "convergent_index": self.convergent_index,
            "q": str(self.q),
            "epsilon": self.epsilon.interval_string(digits),
            "w_bound": self.w_bound,
            "log_ratio_upper": _up(self.x_upper, digits),
        }


def _up(q: Fraction, digits: int) -> str:
    return BallReal(q).interval(digits)[1]


def _bits_for(q: int, M: int, policy: PrecisionPolicy) -> int:
    # the error in tau is scaled by q and then by M before it meets eps
    return max(policy.initial_bits, q.bit_length() + M.bit_length() + 64)


def _epsilon(mu_q: BallReal, tau_dist: BallReal, M: int) -> BallReal:
    return nearest_int_distance(mu_q) - M * tau_dist


def _outcome(prob: ReductionProblem, k: int, q: int, eps: BallReal,
             head: Optional[tuple[BallReal, BallReal]] = None) -> ReductionOutcome:
    """``head`` caches ``(log(A q), log B)`` when many members share ``q``."""
    prec = eps.prec
    if head is None:
        head = ((BallReal(prob.A.upper, prec) * q).log(), BallReal(prob.B.lower, prec).log())
    log_aq, log_b = head
    ratio = (log_aq - BallReal(eps.lower, prec).log()) / log_b
    x_up = ratio.upper
    return ReductionOutcome(k, q, eps, max(1, math.ceil(x_up)), x_up)


def _policy_from(policy: PrecisionPolicy, bits: int) -> PrecisionPolicy:
    start = min(bits, policy.max_bits)
    return PrecisionPolicy(start, policy.max_bits, policy.growth_factor)


def dp_reduce(prob: ReductionProblem, policy: PrecisionPolicy = DEFAULT_POLICY,
              tries: int = 16, expansion: Optional[CFExpansion] = None) -> ReductionOutcome:
    """First convergent with ``q > 6M`` giving a certified ``eps > 0``.

    Up to ``tries`` further convergents are tried after the first qualifying
    one before giving up with :class:`EpsilonNeverPositive`.
    """
    if expansion is None:
        expansion = expand(prob.tau, q_exceeds=6 * prob.M, extra=tries, policy=policy)
    start = expansion.first_index_above(6 * prob.M)
    if start is None:
        raise PrecisionExhausted("expansion never reached q > 6M")
    last = min(start + tries, expansion.certified_through)
    for k in range(start, last + 1):
        _, q = expansion.convergents[k]

        def attempt(bits: int) -> BallReal:
            tau_dist = nearest_int_distance(prob.tau(bits) * q)
            return _epsilon(prob.mu(bits) * q, tau_dist, prob.M)

        eps = with_refinement(attempt, _policy_from(policy, _bits_for(q, prob.M, policy)),
                              decided=lambda e: certified_sign(e) is not Sign.UNDECIDABLE)
        if certified_sign(eps) is Sign.POSITIVE:
            return _outcome(prob, k, q, eps)
    raise EpsilonNeverPositive(
        f"{prob.label or 'reduction'}: eps <= 0 for convergents {start}..{last}")


@dataclass(frozen=True)
class FamilyOutcome:
    """Aggregate of one reduction per family member.

    ``exceptional`` lists members whose epsilon was not positive at the
    shared convergent; each is retried at later convergents and, if that
    works, appears in ``per_key`` like any other member.  ``unresolved``
    lists the ones that never succeeded.
    """

    shared_index: int
    per_key: dict
    exceptional: tuple
    unresolved: tuple
    min_epsilon: Optional[BallReal]
    max_w_bound: int

    @property
    def max_gap(self) -> int:
        return self.max_w_bound - 1

    @property
    def complete(self) -> bool:
        return not self.unresolved

    def worst_key(self):
        return max(self.per_key, key=lambda key: self.per_key[key].x_upper) if self.per_key else None

    def summary(self, digits: int = 30) -> dict:
        worst = self.worst_key()
        resolved_later = {str(key): self.per_key[key].convergent_index
                          for key in self.exceptional if key in self.per_key}
        return {
            "shared_convergent_index": self.shared_index,
            "members": len(self.per_key) + len(self.unresolved),
            "min_epsilon": None if self.min_epsilon is None else self.min_epsilon.interval_string(digits),
            "max_w_bound": self.max_w_bound,
            "worst_member": None if worst is None else str(worst),
            "exceptional": [str(k) for k in self.exceptional],
            "resolved_at": resolved_later,
            "unresolved": [str(k) for k in self.unresolved],
        }


def family_reduce(template: ReductionProblem, mu_family: Callable[[Hashable, int], BallReal],
                  keys: Iterable[Hashable], policy: PrecisionPolicy = DEFAULT_POLICY,
                  tries: int = 16, expansion: Optional[CFExpansion] = None) -> FamilyOutcome:
    """Run the reduction for every ``mu_family(key, bits)`` on one convergent.

    ``template`` supplies ``tau``, ``A``, ``B`` and ``M``; its ``mu`` is
    ignored.  The distance ``||tau q||`` is computed once per precision.
    """
    keys = list(keys)
    if not keys:
        raise ValueError("family must be non-empty")
    if expansion is None:
        expansion = expand(template.tau, q_exceeds=6 * template.M, extra=tries, policy=policy)
    start = expansion.first_index_above(6 * template.M)
    if start is None:
        raise PrecisionExhausted("expansion never reached q > 6M")
    _, q = expansion.convergents[start]
    bits = _bits_for(q, template.M, policy)
    if bits > policy.max_bits:
        raise PrecisionExhausted(f"need {bits} bits for q_{start}, policy allows {policy.max_bits}")
    tau_dist = nearest_int_distance(template.tau(bits) * q)

    head = ((BallReal(template.A.upper, bits) * q).log(), BallReal(template.B.lower, bits).log())
    per_key: dict = {}
    exceptional = []
    for key in keys:
        eps = _epsilon(mu_family(key, bits) * q, tau_dist, template.M)
        if certified_sign(eps) is Sign.POSITIVE:
            per_key[key] = _outcome(template, start, q, eps, head)
        else:
            exceptional.append(key)

    unresolved = []
    for key in exceptional:
        prob = ReductionProblem(template.tau, lambda b, key=key: mu_family(key, b),
                                template.A, template.B, template.M, f"{template.label}[{key}]")
        try:
            per_key[key] = dp_reduce(prob, policy, tries, expansion)
        except EpsilonNeverPositive:
            unresolved.append(key)

    outcomes = list(per_key.values())
    min_eps = min((o.epsilon for o in outcomes), key=lambda e: e.lower, default=None)
    max_w = max((o.w_bound for o in outcomes), default=1)
    ordered = {key: per_key[key] for key in keys if key in per_key}
    return FamilyOutcome(start, ordered, tuple(exceptional), tuple(unresolved), min_eps, max_w)
