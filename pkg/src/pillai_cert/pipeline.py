"""End-to-end certification of the representation problem ``U_n - b^m = c``.

The run has four stages:

``search``
    brute force over ``n <= n_max``, ``m <= m_max`` under both index
    conventions, plus the exact argument that a solution with ``n < n_max``
    has ``m`` inside the searched range.
``absolute_bound``
    Matveev's theorem applied to four linear forms, unwound with the
    Guzman-Luca lemma into an absolute bound ``N_max`` on ``n``.
``reductions``
    four rounds of Dujella-Petho reduction (both signs of each linear form)
    shrinking the bound below ``n_max``.
``conclusion``
    exact integer comparison of the reduced bound with the search ceiling.

All analytic work uses the shifted index ``N = n - offset`` for which the
Binet form ``U_{N+offset} = a alpha^N + ...`` holds, ``offset`` being the
Binet ``convention_offset`` (1 for Padovan).

Every derived real is recorded twice: as a certified interval and as a
*declared bound*, its upper end rounded up to 12 significant digits.
Downstream arithmetic uses only the declared bounds, so
:func:`verify_certificate` can redo each step exactly from the record.
"""
from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass, field
from decimal import ROUND_CEILING, Decimal, localcontext
from fractions import Fraction
from typing import Callable, Optional

from . import search as search_mod
from .cfrac import (
    CFExpansion,
    EpsilonNeverPositive,
    FamilyOutcome,
    ReductionOutcome,
    ReductionProblem,
    dp_reduce,
    expand,
    family_reduce,
)
from .heights import (
    AlgebraicNumberDesc,
    field_minimal_polynomial,
    guzman_luca_bound,
    height_from_minpoly,
    matveev_constant,
)
from .rigor import (
    DEFAULT_POLICY,
    BallReal,
    InsufficientPrecision,
    PrecisionExhausted,
    PrecisionPolicy,
    RigorError,
    parse_interval,
    with_refinement,
)
from .sequence import (
    PADOVAN,
    BinetCoefficients,
    RecurrenceSpec,
    binet_fit,
    characteristic_roots,
    dominant_coefficient_exact,
    term,
)

__all__ = [
    "PipelineConfig",
    "Certificate",
    "SoundnessViolation",
    "PUBLISHED",
    "stage_search",
    "stage_absolute_bound",
    "stage_reductions",
    "run_all",
    "verify_certificate",
]

DIGITS = 40
BOUND_DIGITS = 12
MODES = ("faithful", "strict")


class SoundnessViolation(RigorError):
    """A certified constant exceeds the published constant it should bound."""


@dataclass(frozen=True)
class PipelineConfig:
    spec: RecurrenceSpec = PADOVAN
    base: int = 3
    n_max: int = 500
    m_max: int = 200
    convention: str = "theorem"
    policy: PrecisionPolicy = DEFAULT_POLICY
    mode: str = "faithful"
    M: int = 2 * 10 ** 46

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.convention not in search_mod.CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        if self.base < 2 or self.n_max < 1 or self.m_max < 0 or self.M < 1:
            raise ValueError("invalid search or reduction parameters")

    @property
    def canonical(self) -> bool:
        return self.spec == PADOVAN and self.base == 3

    def as_dict(self) -> dict:
        return {
            "recurrence": {"name": self.spec.name, "order": self.spec.order,
                           "coefficients": list(self.spec.coefficients),
                           "initial": list(self.spec.initial)},
            "base": self.base,
            "search": {"nmax": self.n_max, "mmax": self.m_max, "convention": self.convention},
            "precision": {"initial_bits": self.policy.initial_bits,
                          "max_bits": self.policy.max_bits,
                          "growth_factor": str(self.policy.growth_factor)},
            "mode": self.mode,
            "reduction": {"M": str(self.M)},
        }

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# Published constants for the Padovan / base 3 instance, as printed.
PUBLISHED = {
    "lambda_coefficient": "7.97e12",
    "min_gap_coefficient": "7.98e12",
    "case1_coefficient": "6.40e25",
    "case2_coefficient": "1.92e26",
    "lambda3_height_coefficient": "3.86e26",
    "cubic_coefficient": "3.10e39",
    "absolute_bound": "2e46",
    "gamma_epsilon": "0.394",
    "gamma_n_gap": 416,
    "gamma_m_gap": 105,
    "gamma1_epsilon": "9.9954e-8",
    "gamma1_m_gap": 110,
    "gamma2_epsilon": "7.7434e-11",
    "gamma2_n_gap": 464,
    "gamma3_epsilon": "4.579572e-10",
    "gamma3_n": 458,
    "gamma_convergent_positive": 88,
    "gamma_convergent_negative": 91,
    "case2_height_printed": "8.00e13",
    "case2_A1_printed": "2.40e13",
}

# A-values printed for each reduction; keyed by (round, orientation, branch)
PUBLISHED_A = {
    ("gamma", "positive", "alpha"): 36,
    ("gamma", "positive", "base"): 9,
    ("gamma", "negative", "alpha"): 64,
    ("gamma", "negative", "base"): 15,
    ("gamma1", "positive", "base"): 9,
    ("gamma2", "positive", "alpha"): 106,
    ("gamma3", "positive", "alpha"): 116,
}


# helpers ------------------------------------------------------------------------


def _iv(ball: BallReal) -> str:
    return ball.interval_string(DIGITS)


def _declare(ball: BallReal) -> str:
    """Upper end of ``ball`` rounded up to BOUND_DIGITS significant digits."""
    up = ball.upper
    with localcontext() as ctx:
        ctx.prec = BOUND_DIGITS
        ctx.rounding = ROUND_CEILING
        value = Decimal(up.numerator) / Decimal(up.denominator)
    return str(value)


def _exact(text) -> Fraction:
    return Fraction(Decimal(str(text)))


def _ball_max(*balls: BallReal) -> BallReal:
    lo = max(b.lower for b in balls)
    hi = max(b.upper for b in balls)
    return BallReal.from_interval(lo, hi, max(b.prec for b in balls))


def _pos_log(x: BallReal) -> BallReal:
    """``max(0, log x)``, as a ball."""
    if x.upper <= 1:
        return BallReal(0, x.prec)
    lg = BallReal(x.upper, x.prec).log()
    return BallReal.from_interval(0 if x.lower <= 1 else x.log().lower, lg.upper, x.prec)


def _ceil_int(ball: BallReal) -> int:
    return math.ceil(ball.upper)


# basic constants -------------------------------------------------------------


class _Providers:
    """Cached, precision-indexed evaluations of the constants the rounds need."""

    def __init__(self, spec: RecurrenceSpec, base: int, target):
        self.spec, self.base, self.target = spec, base, target
        self._lock = threading.Lock()
        self._cache: dict = {}

    def _get(self, key, make):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = make()
        with self._lock:
            self._cache.setdefault(key, value)
            return self._cache[key]

    def binet(self, bits: int) -> BinetCoefficients:
        if bits < 64:
            raise InsufficientPrecision(f"{bits} bits is below the 64-bit floor for root isolation")
        return self._get(("binet", bits), lambda: binet_fit(
            self.spec, characteristic_roots(self.spec, bits), bits, target=self.target))

    def alpha(self, bits: int) -> BallReal:
        return self.binet(bits).roots.alpha

    def log_alpha(self, bits: int) -> BallReal:
        return self._get(("log_alpha", bits), lambda: self.alpha(bits).log())

    def log_base(self, bits: int) -> BallReal:
        if bits < 64:
            raise InsufficientPrecision("precision below 64 bits")
        return self._get(("log_base", bits), lambda: BallReal(self.base, bits).log())

    def log_a(self, bits: int) -> BallReal:
        return self._get(("log_a", bits), lambda: self.binet(bits).a.log())

    def log_alpha_gap(self, k: int, bits: int) -> BallReal:
        return self._get(("la", k, bits), lambda: (self.alpha(bits) ** k - 1).log())

    def log_base_gap(self, l: int, bits: int) -> BallReal:
        return self._get(("lb", l, bits), lambda: BallReal(self.base ** l - 1, bits).log())


@dataclass
class _Basics:
    bits: int
    binet: BinetCoefficients
    alpha: BallReal
    log_alpha: BallReal
    log_base: BallReal
    a: BallReal
    E0: BallReal
    D: int
    h_a: BallReal
    h_alpha: BallReal
    minpoly_a: tuple
    offset: int


def _basics(cfg: PipelineConfig, providers: _Providers, bits: int) -> _Basics:
    binet = providers.binet(bits)
    alpha = binet.roots.alpha
    E0 = BallReal(0, bits)
    for coef in binet.others:
        E0 = E0 + abs(coef)
    element = dominant_coefficient_exact(cfg.spec, binet.convention_offset)
    minpoly = field_minimal_polynomial(element, cfg.spec, bits)
    h_a = height_from_minpoly(AlgebraicNumberDesc.from_minpoly(minpoly, bits))
    char = cfg.spec.characteristic()
    h_alpha = height_from_minpoly(AlgebraicNumberDesc.from_minpoly(char, bits))
    return _Basics(bits, binet, alpha, providers.log_alpha(bits), providers.log_base(bits),
                   binet.a, E0, cfg.spec.order, h_a, h_alpha, minpoly, binet.convention_offset)


def _mode_constants(cfg: PipelineConfig, b: _Basics) -> tuple[str, dict]:
    """Numerators of the four linear-form inequalities.

    ``|L|  < max(C_alpha alpha^-k, C_base base^-l)``, ``|L1| < C_L1 base^-l``,
    ``|L2| < C_L2 alpha^-k`` and ``|L3| < C_L3 alpha^-N``.
    """
    if cfg.mode == "faithful" and cfg.canonical:
        a5 = b.alpha ** 5
        return "faithful", {"C_alpha": a5, "C_base": BallReal(3, b.bits), "C_L1": BallReal(3, b.bits),
                            "C_L2": a5, "C_L3": b.alpha ** 4}
    # U_N - U_N1 >= a alpha^N (1 - 1/alpha) - 2 E0 >= alpha^N / G on the validity range
    G = 2 / (b.a * (1 - 1 / b.alpha))
    lead = b.a + 2 * b.E0
    return "strict", {"C_alpha": 2 * lead * G, "C_base": BallReal(2, b.bits),
                      "C_L1": 1 + 2 * b.E0, "C_L2": lead * G, "C_L3": 2 * b.E0 * G, "G": G}


# stage: search ---------------------------------------------------------------------


def stage_search(cfg: PipelineConfig, basics: Optional[_Basics] = None) -> dict:
    rec: dict = {"name": "search", "inputs": {"n_max": cfg.n_max, "m_max": cfg.m_max, "base": cfg.base,
                                              "recurrence": cfg.spec.name}}
    sets = {}
    reps = {}
    for conv in ("theorem", "stated"):
        table = search_mod.enumerate_table(
            search_mod.SearchConfig.preset(conv, cfg.n_max, cfg.m_max, cfg.base, cfg.spec))
        multi = search_mod.multi_represented(table, 2)
        sets[conv] = [c for c, _ in multi]
        reps[conv] = {str(c): [[r.n, r.m] for r in rr] for c, rr in multi}
    extras = sorted(set(sets["stated"]) - set(sets["theorem"]))

    # m - 1 < m - m1 ... 2 * b^(m-1) <= b^m - b^m1 = U_n - U_n1 < U_n <= U_{n_max}
    top = term(cfg.spec, cfg.n_max)
    m_ceiling = 0
    while 2 * cfg.base ** m_ceiling <= top:
        m_ceiling += 1
    rec["certified_constants"] = {}
    rec["published_constants"] = {}
    if basics is not None:
        ratio = basics.log_base / basics.log_alpha
        rec["certified_constants"]["log_base_over_log_alpha"] = _iv(ratio)
        if cfg.canonical:
            rec["published_constants"]["log_base_over_log_alpha_window"] = "(3.90, 3.91)"
            rec["certified_constants"]["ratio_in_window"] = ratio.inside(Fraction(390, 100), Fraction(391, 100))
    claimed = search_mod.CLAIMED_REPRESENTATIONS if cfg.canonical else ()
    rec["conclusion"] = {
        "multi_represented": sets,
        "representations": reps,
        "stated_minus_theorem": extras,
        "m_ceiling_below_n_max": m_ceiling,
        "m_covered": m_ceiling <= cfg.m_max,
        "n_covered": cfg.n_max,
        "claim_diff": search_mod.diff_against_claim(
            search_mod.enumerate_table(search_mod.SearchConfig.preset(
                "stated", cfg.n_max, cfg.m_max, cfg.base, cfg.spec)), claimed).as_dict() if claimed else None,
    }
    return rec


# stage: absolute bound -----------------------------------------------------------


class _Chain:
    """Builds certified constants and their declared bounds in order."""

    def __init__(self, bits: int):
        self.bits = bits
        self.intervals: dict[str, str] = {}
        self.bounds: dict[str, str] = {}

    def put(self, name: str, ball: BallReal) -> BallReal:
        self.intervals[name] = _iv(ball)
        self.bounds[name] = _declare(ball)
        return BallReal(_exact(self.bounds[name]), self.bits)

    def note(self, name: str, ball: BallReal) -> BallReal:
        self.intervals[name] = _iv(ball)
        return ball


_CHAIN_ORDER = ("lambda_coefficient", "min_gap_coefficient", "case1_coefficient", "case2_coefficient",
                "lambda3_height_coefficient", "cubic_coefficient", "absolute_bound")


def _run_chain(inputs: dict[str, BallReal], D: int, bits: int, chain: _Chain) -> dict[str, BallReal]:
    declared: dict[str, BallReal] = {}

    def v(name: str) -> BallReal:
        if name.endswith("@"):
            return declared[name[:-1]]
        return inputs[name]

    # evaluate in dependency order, declaring each bound before it is used
    for name in _CHAIN_ORDER:
        declared[name] = chain.put(name, _chain_formulas_single(name, v, D, bits))
    return declared


def _chain_formulas_single(name: str, v, D: int, bits: int) -> BallReal:
    log2 = BallReal(2, bits).log()
    zero = BallReal(0, bits)
    if name == "lambda_coefficient":
        return v("Cm") * v("A1_lambda")
    if name == "min_gap_coefficient":
        return v("lambda_coefficient@") + _ball_max(zero, v("log_C_alpha"), v("log_C_base"))
    rho = v("A2") / v("log_alpha")
    dha = D * v("h_a")
    if name == "case1_coefficient":
        return v("Cm") * (dha + D * log2 + rho * v("min_gap_coefficient@")) + v("pos_log_C_L1")
    if name == "case2_coefficient":
        return v("Cm") * (dha + D * v("min_gap_coefficient@")) + v("pos_log_C_L2")
    if name == "lambda3_height_coefficient":
        return dha + D * log2 + _ball_max(rho * v("min_gap_coefficient@") + D * v("case1_coefficient@"),
                                          rho * v("case2_coefficient@") + D * v("min_gap_coefficient@"))
    if name == "cubic_coefficient":
        return (v("Cm") * v("lambda3_height_coefficient@") + v("pos_log_C_L3")) / v("log_alpha") + v("offset")
    if name == "absolute_bound":
        e = BallReal(1, bits).exp()
        return guzman_luca_bound(3, e * v("cubic_coefficient@")) / e
    raise KeyError(name)


def _chain_inputs(b: _Basics, consts: dict) -> dict[str, BallReal]:
    bits = b.bits
    D = b.D
    sixteen = BallReal(Fraction(16, 100), bits)
    A2 = _ball_max(D * b.h_alpha, b.log_alpha, sixteen)
    A3 = _ball_max(D * b.log_base, sixteen)
    A1 = _ball_max(D * b.h_a, abs(b.a.log()), sixteen)
    Cm = matveev_constant(3, D, bits) * A2 * A3
    return {
        "log_alpha": b.log_alpha,
        "log_base": b.log_base,
        "h_a": b.h_a,
        "h_alpha": b.h_alpha,
        "A2": A2,
        "A3": A3,
        "A1_lambda": A1,
        "Cm": Cm,
        "log_C_alpha": consts["C_alpha"].log(),
        "log_C_base": consts["C_base"].log(),
        "pos_log_C_L1": _pos_log(consts["C_L1"]),
        "pos_log_C_L2": _pos_log(consts["C_L2"]),
        "pos_log_C_L3": _pos_log(consts["C_L3"]),
        "offset": BallReal(b.offset, bits),
    }


def stage_absolute_bound(cfg: PipelineConfig, b: _Basics) -> dict:
    mode, consts = _mode_constants(cfg, b)
    inputs = _chain_inputs(b, consts)
    chain = _Chain(b.bits)
    declared = _run_chain(inputs, b.D, b.bits, chain)
    n_max_abs = _ceil_int(declared["absolute_bound"])

    comparisons = []
    published = {}
    if cfg.canonical:
        for name in _CHAIN_ORDER:
            pub = PUBLISHED[name]
            published[name] = pub
            ours = _exact(chain.bounds[name])
            holds = ours <= _exact(pub)
            comparisons.append({"constant": name, "ours": chain.bounds[name], "published": pub,
                                "relation": "<=", "holds": holds})
        c0 = BallReal(_exact(chain.bounds["lambda_coefficient"]), b.bits)
        rel = abs(c0 - _exact(PUBLISHED["lambda_coefficient"])) / _exact(PUBLISHED["lambda_coefficient"])
        comparisons.append({"constant": "lambda_coefficient", "ours": chain.bounds["lambda_coefficient"],
                            "published": PUBLISHED["lambda_coefficient"], "relation": "within 2%",
                            "relative_gap": _declare(rel), "holds": rel.upper <= Fraction(2, 100)})
        published["case2_height_printed"] = PUBLISHED["case2_height_printed"]
        published["case2_A1_printed"] = PUBLISHED["case2_A1_printed"]
    rec = {
        "name": "absolute_bound",
        "inputs": {"mode": mode, "D": b.D, "offset": b.offset,
                   "minpoly_a": list(b.minpoly_a),
                   "inequality_constants": {k: _iv(v) for k, v in consts.items()},
                   "base_constants": {k: _iv(v) for k, v in inputs.items()}},
        "certified_constants": chain.intervals,
        "declared_bounds": chain.bounds,
        "published_constants": published,
        "comparisons": comparisons,
        "conclusion": {"n_absolute": n_max_abs, "M": str(cfg.M), "M_covers": n_max_abs <= cfg.M},
    }
    return rec


# stage: reductions -----------------------------------------------------------------


@dataclass
class _Orientation:
    name: str
    expansion: CFExpansion
    tau: Callable[[int], BallReal]
    denominator: Callable[[int], BallReal]
    sign: int


def _orientations(prov: _Providers, cfg: PipelineConfig) -> dict[str, _Orientation]:
    def tau_pos(bits):
        return prov.log_alpha(bits) / prov.log_base(bits)

    def tau_neg(bits):
        return prov.log_base(bits) / prov.log_alpha(bits)

    out = {}
    for name, tau, den, sign in (("positive", tau_pos, prov.log_base, 1),
                                 ("negative", tau_neg, prov.log_alpha, -1)):
        exp = expand(tau, q_exceeds=6 * cfg.M, extra=16, policy=cfg.policy)
        out[name] = _Orientation(name, exp, tau, den, sign)
    return out


def _required_A(numerator: BallReal, orient: _Orientation, bits: int) -> BallReal:
    # |Gamma| < 2 |Lambda| once |Lambda| < 1/2, then divide by the log in tau's denominator
    return 2 * numerator / orient.denominator(bits)


def _pick_A(required: BallReal, key, use_published: bool) -> tuple[int, str]:
    need = math.ceil(required.upper)
    pub = PUBLISHED_A.get(key)
    if use_published and pub is not None and pub >= required.upper:
        return pub, "published"
    return need, "derived"


def _small_gap_threshold(C: BallReal, log_B: BallReal) -> int:
    """Least ``w >= 1`` with ``C B^-w <= 1/2``."""
    x = (2 * C).log() / log_B if C.upper > Fraction(1, 2) else BallReal(0, C.prec)
    return max(1, math.ceil(x.upper))


def _outcome_record(o: ReductionOutcome, A: int, B_name: str) -> dict:
    d = o.as_dict()
    d.update({"A": A, "B": B_name, "max_gap": o.max_gap})
    return d


def _family_record(f: FamilyOutcome, A: int, B_name: str, key_ranges) -> dict:
    worst = f.worst_key()
    d = f.summary()
    d.update({"A": A, "B": B_name, "max_gap": f.max_gap, "key_ranges": key_ranges,
              "worst": None if worst is None else _outcome_record(f.per_key[worst], A, B_name),
              "q_used": sorted({str(o.q) for o in f.per_key.values()}, key=int)})
    return d


def stage_reductions(cfg: PipelineConfig, b: _Basics, prov: _Providers, n_absolute: int) -> dict:
    mode, consts = _mode_constants(cfg, b)
    bits = b.bits
    use_pub = cfg.canonical and mode == "faithful"
    M = cfg.M
    if n_absolute > M:
        raise SoundnessViolation(f"absolute bound {n_absolute} exceeds M = {M}")
    orients = _orientations(prov, cfg)
    la, lb = b.log_alpha, b.log_base
    B_of = {"alpha": (b.alpha, la), "base": (BallReal(cfg.base, bits), lb)}
    rounds: dict = {}

    def mu_for(orient: _Orientation, L: Callable[[int], BallReal]):
        def mu(bits_):
            return orient.sign * L(bits_) / orient.denominator(bits_)
        return mu

    def run_single(round_name, orient, L, numerator, branch):
        key = (round_name, orient.name, branch)
        required = _required_A(numerator, orient, bits)
        A, source = _pick_A(required, key, use_pub)
        B, _ = B_of[branch]
        prob = ReductionProblem(orient.tau, mu_for(orient, L), BallReal(A, bits), B, M, "/".join(key))
        out = dp_reduce(prob, cfg.policy, expansion=orient.expansion)
        rec = _outcome_record(out, A, branch)
        rec.update({"A_required": _iv(required), "A_source": source})
        return out, rec

    def run_family(round_name, orient, L_of, keys, numerator, branch, key_ranges):
        key = (round_name, orient.name, branch)
        required = _required_A(numerator, orient, bits)
        A, source = _pick_A(required, key, use_pub)
        B, _ = B_of[branch]
        template = ReductionProblem(orient.tau, lambda _b: BallReal(0, _b), BallReal(A, bits), B, M,
                                    "/".join(key))

        def mu(member, bits_):
            return orient.sign * L_of(member, bits_) / orient.denominator(bits_)

        fam = family_reduce(template, mu, keys, cfg.policy, expansion=orient.expansion)
        rec = _family_record(fam, A, branch, key_ranges)
        rec.update({"A_required": _iv(required), "A_source": source})
        if rec["worst"] is not None:
            rec["worst"].update({"A_required": rec["A_required"], "A_source": source})
        return fam, rec

    # round gamma: N log alpha - m log b + log a
    g_records = {}
    gap_alpha = gap_base = 0
    for orient in orients.values():
        for branch, num in (("alpha", consts["C_alpha"]), ("base", consts["C_base"])):
            out, rec = run_single("gamma", orient, prov.log_a, num, branch)
            g_records[f"{orient.name}/{branch}"] = rec
            if branch == "alpha":
                gap_alpha = max(gap_alpha, out.max_gap)
            else:
                gap_base = max(gap_base, out.max_gap)
    w0_alpha = _small_gap_threshold(consts["C_alpha"], la)
    w0_base = _small_gap_threshold(consts["C_base"], lb)
    rounds["gamma"] = {
        "outcomes": g_records,
        "complete": True,
        "n_gap": gap_alpha, "m_gap": gap_base,
        "small_gap_thresholds": {"alpha": w0_alpha, "base": w0_base},
        "small_gaps_covered": w0_alpha - 1 <= gap_alpha and w0_base - 1 <= gap_base,
        "conclusion": f"n - n1 <= {gap_alpha} or m - m1 <= {gap_base}",
    }

    # round gamma1: given k <= gap_alpha, family over k
    def L1(k, bits_):
        return prov.log_a(bits_) + prov.log_alpha_gap(k, bits_)

    keys1 = list(range(1, gap_alpha + 1))
    g1 = {}
    complete1 = True
    m_gap1 = 0
    for orient in orients.values():
        fam, rec = run_family("gamma1", orient, L1, keys1, consts["C_L1"], "base", [[1, gap_alpha]])
        complete1 = complete1 and fam.complete
        g1[orient.name] = rec
        m_gap1 = max(m_gap1, fam.max_gap)
    w0 = _small_gap_threshold(consts["C_L1"], lb)
    rounds["gamma1"] = {"outcomes": g1, "complete": complete1, "m_gap": m_gap1, "small_gap_threshold": w0,
                        "small_gaps_covered": w0 - 1 <= m_gap1,
                        "conclusion": f"n - n1 <= {gap_alpha} implies m - m1 <= {m_gap1}"}

    # round gamma2: given l <= gap_base; the form carries a / (b^l - 1)
    def L2(l, bits_):
        return prov.log_a(bits_) - prov.log_base_gap(l, bits_)

    keys2 = list(range(1, gap_base + 1))
    g2 = {}
    complete2 = True
    n_gap2 = 0
    for orient in orients.values():
        fam, rec = run_family("gamma2", orient, L2, keys2, consts["C_L2"], "alpha", [[1, gap_base]])
        complete2 = complete2 and fam.complete
        g2[orient.name] = rec
        n_gap2 = max(n_gap2, fam.max_gap)
    w0 = _small_gap_threshold(consts["C_L2"], la)
    rounds["gamma2"] = {"outcomes": g2, "complete": complete2, "n_gap": n_gap2, "small_gap_threshold": w0,
                        "small_gaps_covered": w0 - 1 <= n_gap2,
                        "conclusion": f"m - m1 <= {gap_base} implies n - n1 <= {n_gap2}"}

    # round gamma3 over the two boxes left by the previous rounds
    def L3(key, bits_):
        k, l = key
        return prov.log_a(bits_) + prov.log_alpha_gap(k, bits_) - prov.log_base_gap(l, bits_)

    boxes = [[gap_alpha, m_gap1], [n_gap2, gap_base]]
    keys3 = sorted({(k, l) for kk, ll in boxes for k in range(1, kk + 1) for l in range(1, ll + 1)})
    g3 = {}
    complete3 = True
    n_final = 0
    for orient in orients.values():
        fam, rec = run_family("gamma3", orient, L3, keys3, consts["C_L3"], "alpha",
                              [[[1, kk], [1, ll]] for kk, ll in boxes])
        complete3 = complete3 and fam.complete
        g3[orient.name] = rec
        n_final = max(n_final, fam.max_gap)
    w0 = _small_gap_threshold(consts["C_L3"], la)
    N_floor = cfg.n_max - b.offset
    rounds["gamma3"] = {"outcomes": g3, "complete": complete3, "N_bound": n_final, "n_bound": n_final + b.offset,
                        "small_gap_threshold": w0, "assumed_N_at_least": N_floor,
                        "small_gaps_covered": w0 <= N_floor,
                        "conclusion": f"n <= {n_final + b.offset}"}

    # |y| < 2|e^y - 1| on |e^y - 1| < 1/2: the worst case is y = log(1/2)
    ratio = BallReal(2, bits).log() * 2
    technical = {"log_ratio_at_half": _iv(ratio), "holds": ratio.upper < 2}
    # gaps below 20 sit inside every family range, so assuming min gap >= 20 costs nothing
    technical["min_gap_20_inside_ranges"] = 19 <= min(gap_alpha, gap_base, m_gap1, n_gap2)
    if mode == "strict":
        # validity of U_N - U_N1 >= alpha^N / G for N >= N_floor
        lhs = b.a * b.alpha ** N_floor * (1 - 1 / b.alpha)
        technical["strict_lower_bound_valid"] = lhs.lower >= (4 * b.E0).upper

    comparisons = []
    published = {}
    if cfg.canonical:
        pairs = [("gamma_n_gap", gap_alpha), ("gamma_m_gap", gap_base), ("gamma1_m_gap", m_gap1),
                 ("gamma2_n_gap", n_gap2), ("gamma3_n", n_final)]
        for name, ours in pairs:
            published[name] = PUBLISHED[name]
            comparisons.append({"constant": name, "ours": ours, "published": PUBLISHED[name],
                                "relation": "<=", "holds": ours <= PUBLISHED[name]})
        for name in ("gamma_epsilon", "gamma1_epsilon", "gamma2_epsilon", "gamma3_epsilon",
                     "gamma_convergent_positive", "gamma_convergent_negative"):
            published[name] = PUBLISHED[name]
        published["A_presets"] = {"/".join(k): v for k, v in PUBLISHED_A.items()}

    return {
        "name": "reductions",
        "inputs": {"mode": mode, "M": str(M), "offset": b.offset,
                   "alpha": _iv(b.alpha), "log_alpha": _iv(la), "log_base": _iv(lb),
                   "inequality_constants": {k: _iv(v) for k, v in consts.items()},
                   "convergents": {name: {"first_index_above_6M": o.expansion.first_index_above(6 * M),
                                          "quotients": o.expansion.as_dict()["quotients"]}
                                   for name, o in orients.items()}},
        "certified_constants": {"technical": technical},
        "published_constants": published,
        "comparisons": comparisons,
        "rounds": rounds,
        "conclusion": {"n_bound": n_final + b.offset,
                       "cascade": [rounds[r]["conclusion"] for r in ("gamma", "gamma1", "gamma2", "gamma3")]},
    }


# certificate ------------------------------------------------------------------------


@dataclass
class Certificate:
    config_digest: str
    config: dict
    stages: list
    final_conclusion: dict
    assumed_hypotheses: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"config_digest": self.config_digest, "config": self.config,
                           "stages": self.stages, "final_conclusion": self.final_conclusion,
                           "assumed_hypotheses": self.assumed_hypotheses},
                          indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Certificate":
        d = json.loads(text)
        return cls(d["config_digest"], d["config"], d["stages"], d["final_conclusion"],
                   d.get("assumed_hypotheses", []))

    def stage(self, name: str) -> Optional[dict]:
        return next((s for s in self.stages if s.get("name") == name), None)


HYPOTHESES = [
    "Lambda, Lambda1, Lambda2, Lambda3 are non-zero (Galois conjugation argument, not machine-checked)",
    "the characteristic polynomial is irreducible, so Q(alpha) has degree D = order",
]


def run_all(cfg: PipelineConfig) -> Certificate:
    """Run every stage; a failing stage is recorded and the certificate marked inconsistent."""
    stages: list = []
    final = {"threshold_n": cfg.n_max, "threshold_m": cfg.m_max, "consistent": False,
             "final_n_bound": None, "failed_stage": None, "error": None}
    hyps = list(HYPOTHESES)
    if cfg.mode == "faithful" and cfg.canonical:
        hyps.append("faithful mode: linear-form numerators taken as published, not re-derived")
    prov = _Providers(cfg.spec, cfg.base,
                      (Fraction(72, 100), Fraction(73, 100)) if cfg.canonical else None)
    current = "basic_constants"
    try:
        basics = with_refinement(lambda bits: _basics(cfg, prov, bits), cfg.policy)
        current = "search"
        search_rec = stage_search(cfg, basics)
        stages.append(search_rec)
        current = "absolute_bound"
        abs_rec = stage_absolute_bound(cfg, basics)
        stages.append(abs_rec)
        violated = [c["constant"] for c in abs_rec["comparisons"] if not c["holds"]]
        if violated:
            raise SoundnessViolation(f"certified constants exceed published ones: {violated}")
        current = "reductions"
        red_rec = stage_reductions(cfg, basics, prov, abs_rec["conclusion"]["n_absolute"])
        stages.append(red_rec)
        current = "conclusion"
        n_bound = red_rec["conclusion"]["n_bound"]
        sc = search_rec["conclusion"]
        rounds = red_rec["rounds"]
        technical_ok = all(v for k, v in red_rec["certified_constants"]["technical"].items()
                           if isinstance(v, bool)) and all(rounds[r]["small_gaps_covered"] for r in rounds)
        complete = all(rounds[r]["complete"] for r in rounds)
        consistent = (n_bound < cfg.n_max and sc["m_covered"] and technical_ok and complete
                      and abs_rec["conclusion"]["M_covers"])
        stages.append({"name": "conclusion",
                       "inputs": {"n_bound": n_bound, "search_n_max": cfg.n_max,
                                  "m_ceiling": sc["m_ceiling_below_n_max"], "search_m_max": cfg.m_max},
                       "certified_constants": {}, "published_constants": {},
                       "conclusion": {"n_bound_below_search": n_bound < cfg.n_max,
                                      "m_covered": sc["m_covered"], "technical_ok": technical_ok,
                                      "reductions_complete": complete}})
        final.update({"consistent": consistent, "final_n_bound": n_bound})
    except (RigorError, ValueError, ArithmeticError) as exc:
        final.update({"consistent": False, "failed_stage": current,
                      "error": f"{type(exc).__name__}: {exc}"})
    return Certificate(cfg.digest(), cfg.as_dict(), stages, final, hyps)


# verification -------------------------------------------------------------------------

VERIFY_BITS = 256


def _check_search(stage: dict, cfg_dict: dict) -> list[str]:
    errors = []
    c = stage["conclusion"]
    base = cfg_dict["base"]
    rec = cfg_dict["recurrence"]
    spec = RecurrenceSpec(rec["order"], tuple(rec["coefficients"]), tuple(rec["initial"]), rec["name"])
    for conv, reps in c["representations"].items():
        for cval, pairs in reps.items():
            for n, m in pairs:
                if not search_mod.verify_representation(n, m, int(cval), base, spec):
                    errors.append(f"search: ({n},{m}) does not give {cval}")
            if len(pairs) < 2:
                errors.append(f"search: {cval} listed with fewer than two representations")
    mc = c["m_ceiling_below_n_max"]
    top = term(spec, c["n_covered"])
    if not (2 * base ** (mc - 1) <= top < 2 * base ** mc) and mc > 0:
        errors.append("search: m ceiling does not re-derive")
    if c["m_covered"] != (mc <= cfg_dict["search"]["mmax"]):
        errors.append("search: m coverage flag wrong")
    return errors


def _check_absolute(stage: dict) -> list[str]:
    errors = []
    bits = VERIFY_BITS
    inp = {k: parse_interval(v, bits) for k, v in stage["inputs"]["base_constants"].items()}
    D = stage["inputs"]["D"]
    bounds = stage["declared_bounds"]
    declared = {}

    def v(name):
        if name.endswith("@"):
            return declared[name[:-1]]
        return inp[name]

    for name in _CHAIN_ORDER:
        if name not in bounds:
            return [f"absolute_bound: {name} missing"]
        try:
            value = _chain_formulas_single(name, v, D, bits)
        except RigorError as exc:
            return [f"absolute_bound: {name} fails to recompute ({exc})"]
        declared[name] = BallReal(_exact(bounds[name]), bits)
        if not value.upper <= _exact(bounds[name]):
            errors.append(f"absolute_bound: {name} recomputes above its declared bound")
    for comp in stage["comparisons"]:
        if comp["relation"] == "<=":
            holds = _exact(bounds[comp["constant"]]) <= _exact(comp["published"])
            if holds != comp["holds"] or not holds:
                errors.append(f"absolute_bound: {comp['constant']} not <= published")
    n_abs = math.ceil(_exact(bounds["absolute_bound"]))
    if stage["conclusion"]["n_absolute"] != n_abs:
        errors.append("absolute_bound: n_absolute does not match the declared bound")
    if stage["conclusion"]["M_covers"] != (n_abs <= int(stage["conclusion"]["M"])):
        errors.append("absolute_bound: M coverage flag wrong")
    return errors


def _recheck_outcome(rec: dict, alpha: BallReal, base: int, M: int, where: str) -> list[str]:
    bits = VERIFY_BITS
    q = int(rec["q"])
    eps = parse_interval(rec["epsilon"], bits)
    errors = []
    if not q > 6 * M:
        errors.append(f"{where}: q <= 6M")
    if not eps.lower > 0:
        errors.append(f"{where}: epsilon not positive")
        return errors
    B = alpha if rec["B"] == "alpha" else BallReal(base, bits)
    x = (BallReal(rec["A"], bits) * q / BallReal(eps.lower, bits)).log() / BallReal(B.lower, bits).log()
    if math.ceil(x.upper) > rec["w_bound"]:
        errors.append(f"{where}: w_bound {rec['w_bound']} below recomputed {math.ceil(x.upper)}")
    if rec["max_gap"] != rec["w_bound"] - 1:
        errors.append(f"{where}: max_gap inconsistent")
    if rec["A"] < parse_interval(rec["A_required"], bits).upper:
        errors.append(f"{where}: A below the required value")
    return errors


def _check_reductions(stage: dict, cfg_dict: dict, n_absolute: Optional[int],
                      shortfalls: list[str]) -> list[str]:
    """Errors in the recorded arithmetic; gaps in the argument go to ``shortfalls``."""
    errors = []
    inp = stage["inputs"]
    M = int(inp["M"])
    base = cfg_dict["base"]
    alpha = parse_interval(inp["alpha"], VERIFY_BITS)
    if n_absolute is not None and n_absolute > M:
        errors.append("reductions: M below the absolute bound")
    r = stage["rounds"]
    g = r["gamma"]
    na = nb = 0
    for key, rec in g["outcomes"].items():
        errors += _recheck_outcome(rec, alpha, base, M, f"gamma/{key}")
        if key.endswith("alpha"):
            na = max(na, rec["max_gap"])
        else:
            nb = max(nb, rec["max_gap"])
    if (na, nb) != (g["n_gap"], g["m_gap"]):
        errors.append("gamma: gaps do not match outcomes")

    def family(name, expect_ranges, field_name):
        worst_gap = 0
        for orient, rec in r[name]["outcomes"].items():
            if rec["key_ranges"] != expect_ranges:
                errors.append(f"{name}/{orient}: family range {rec['key_ranges']} != {expect_ranges}")
            if rec["unresolved"]:
                shortfalls.append(f"{name}/{orient}: unresolved members")
            if rec["worst"] is None:
                errors.append(f"{name}/{orient}: empty family")
                continue
            errors.extend(_recheck_outcome(rec["worst"], alpha, base, M, f"{name}/{orient}"))
            if rec["worst"]["w_bound"] != rec["max_w_bound"]:
                errors.append(f"{name}/{orient}: worst member is not the maximum")
            worst_gap = max(worst_gap, rec["max_gap"])
        if worst_gap != r[name][field_name]:
            errors.append(f"{name}: {field_name} does not match outcomes")
        return worst_gap

    m1 = family("gamma1", [[1, g["n_gap"]]], "m_gap")
    n2 = family("gamma2", [[1, g["m_gap"]]], "n_gap")
    n3 = family("gamma3", [[[1, g["n_gap"]], [1, m1]], [[1, n2], [1, g["m_gap"]]]], "N_bound")
    if r["gamma3"]["n_bound"] != n3 + inp["offset"]:
        errors.append("gamma3: listing bound does not match")
    for name in r:
        if not r[name]["small_gaps_covered"]:
            shortfalls.append(f"{name}: small-gap case not covered")
        if r[name]["complete"] != all(not o.get("unresolved") for o in r[name]["outcomes"].values()):
            errors.append(f"{name}: completeness flag wrong")
    if stage["conclusion"]["n_bound"] != r["gamma3"]["n_bound"]:
        errors.append("reductions: conclusion does not match the last round")
    tech = stage["certified_constants"]["technical"]
    if not all(v for v in tech.values() if isinstance(v, bool)):
        shortfalls.append("reductions: a technical condition fails")
    return errors


def verify_certificate(cert: Certificate, details: Optional[list] = None) -> bool:
    """Re-derive each stage's arithmetic from the recorded constants."""
    errors: list[str] = []
    shortfalls: list[str] = []
    names = [s.get("name") for s in cert.stages]
    required = ["search", "absolute_bound", "reductions", "conclusion"]
    if names != required:
        errors.append(f"stages {names} != {required}")
    else:
        try:
            cfg_blob = json.dumps(cert.config, sort_keys=True, separators=(",", ":"))
            if hashlib.sha256(cfg_blob.encode()).hexdigest() != cert.config_digest:
                errors.append("config digest mismatch")
            errors += _check_search(cert.stage("search"), cert.config)
            abs_stage = cert.stage("absolute_bound")
            errors += _check_absolute(abs_stage)
            errors += _check_reductions(cert.stage("reductions"), cert.config,
                                        abs_stage["conclusion"]["n_absolute"], shortfalls)
            n_bound = cert.stage("reductions")["conclusion"]["n_bound"]
            n_max = cert.config["search"]["nmax"]
            concl = cert.stage("conclusion")["conclusion"]
            if concl["n_bound_below_search"] != (n_bound < n_max):
                errors.append("conclusion: comparison flag wrong")
            consistent = (n_bound < n_max and cert.stage("search")["conclusion"]["m_covered"]
                          and abs_stage["conclusion"]["M_covers"] and not shortfalls)
            if cert.final_conclusion.get("consistent") != consistent:
                errors.append("final conclusion does not follow")
            if cert.final_conclusion.get("final_n_bound") != n_bound:
                errors.append("final bound mismatch")
        except (KeyError, TypeError, ValueError, RigorError) as exc:
            errors.append(f"malformed certificate: {type(exc).__name__}: {exc}")
    if details is not None:
        details.extend(errors)
    return not errors
