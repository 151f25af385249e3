import copy
import json
from fractions import Fraction

import pytest

from pillai_cert.pipeline import PUBLISHED, Certificate, PipelineConfig, run_all, verify_certificate
from pillai_cert.rigor import PrecisionPolicy, parse_interval
from pillai_cert.sequence import FIBONACCI


def clone(cert: Certificate) -> Certificate:
    return Certificate.from_json(cert.to_json())


def test_canonical_run_is_consistent(canonical_certificate):
    cert = canonical_certificate
    assert cert.final_conclusion["consistent"] is True
    assert cert.final_conclusion["final_n_bound"] == 459
    assert [s["name"] for s in cert.stages] == ["search", "absolute_bound", "reductions", "conclusion"]
    assert len(cert.config_digest) == 64
    assert any("non-zero" in h for h in cert.assumed_hypotheses)


def test_search_stage(canonical_certificate):
    search = canonical_certificate.stage("search")
    c = search["conclusion"]
    assert c["multi_represented"]["theorem"] == [-6, 0, 1, 22, 87]
    assert c["stated_minus_theorem"] == [-2, 2, 3, 4, 6]
    assert c["m_ceiling_below_n_max"] == 127
    assert search["certified_constants"]["ratio_in_window"] is True
    ratio = parse_interval(search["certified_constants"]["log_base_over_log_alpha"])
    assert ratio.inside(Fraction(3906, 1000), Fraction(3907, 1000))
    assert sorted(map(tuple, c["claim_diff"]["index_mismatches"])) == [(22, 20, 5), (87, 17, 3), (87, 24, 6)]


def test_absolute_bound_stage(canonical_certificate):
    stage = canonical_certificate.stage("absolute_bound")
    bounds = {k: float(v) for k, v in stage["declared_bounds"].items()}
    assert 7.858e12 < bounds["lambda_coefficient"] < 7.86e12
    assert 1.9e25 < bounds["case1_coefficient"] < 2.0e25
    assert 5.8e25 < bounds["case2_coefficient"] < 6.0e25
    assert 5.2e38 < bounds["cubic_coefficient"] < 5.4e38
    assert bounds["absolute_bound"] <= 2e46
    assert all(c["holds"] for c in stage["comparisons"])
    assert stage["conclusion"]["M_covers"]


def test_reduction_cascade(canonical_certificate):
    rounds = canonical_certificate.stage("reductions")["rounds"]
    assert (rounds["gamma"]["n_gap"], rounds["gamma"]["m_gap"]) == (417, 105)
    assert rounds["gamma1"]["m_gap"] == 110
    assert rounds["gamma2"]["n_gap"] == 440
    assert rounds["gamma3"]["N_bound"] == 458
    assert all(r["complete"] and r["small_gaps_covered"] for r in rounds.values())
    pos = rounds["gamma"]["outcomes"]["positive/alpha"]
    assert pos["convergent_index"] == PUBLISHED["gamma_convergent_positive"]
    assert parse_interval(pos["epsilon"]).lower > Fraction(394, 1000)
    # published (15, 3) is below the required A for the negative base branch
    neg = rounds["gamma"]["outcomes"]["negative/base"]
    assert neg["A_source"] == "derived" and neg["A"] > 15


def test_verify_round_trip(canonical_certificate):
    problems = []
    assert verify_certificate(clone(canonical_certificate), problems), problems


def test_verify_rejects_tampered_bound(canonical_certificate):
    cert = clone(canonical_certificate)
    cert.stage("absolute_bound")["declared_bounds"]["cubic_coefficient"] = "4.0E+39"
    assert not verify_certificate(cert)


def test_verify_rejects_tampered_reduction(canonical_certificate):
    cert = clone(canonical_certificate)
    cert.stage("reductions")["rounds"]["gamma"]["outcomes"]["positive/alpha"]["w_bound"] = 300
    assert not verify_certificate(cert)


def test_verify_rejects_missing_stage(canonical_certificate):
    cert = clone(canonical_certificate)
    cert.stages = [s for s in cert.stages if s["name"] != "absolute_bound"]
    assert not verify_certificate(cert)


def test_verify_rejects_changed_config(canonical_certificate):
    cert = clone(canonical_certificate)
    cert.config["search"]["nmax"] = 400
    assert not verify_certificate(cert)


def test_precision_exhausted_is_recorded():
    cert = run_all(PipelineConfig(policy=PrecisionPolicy(8, 8)))
    final = cert.final_conclusion
    assert final["consistent"] is False
    assert final["error"].startswith("PrecisionExhausted")
    assert final["failed_stage"] == "basic_constants"


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(mode="lenient")
    with pytest.raises(ValueError):
        PipelineConfig(convention="other")
    assert PipelineConfig().digest() == PipelineConfig().digest()
    assert PipelineConfig(mode="strict").digest() != PipelineConfig().digest()


@pytest.mark.slow
def test_fibonacci_structural_run_is_deterministic():
    cfg = PipelineConfig(spec=FIBONACCI, n_max=200, m_max=100, mode="strict")
    first, second = run_all(cfg), run_all(cfg)
    assert first.to_json() == second.to_json()
    assert [s["name"] for s in first.stages] == ["search", "absolute_bound", "reductions", "conclusion"]
    assert first.stage("absolute_bound")["comparisons"] == []
    # some family members have mu dependent on tau, which the lemma cannot handle
    assert first.final_conclusion["consistent"] is False
    assert verify_certificate(first)


@pytest.mark.slow
def test_strict_mode_closes():
    cert = run_all(PipelineConfig(mode="strict"))
    assert cert.final_conclusion["consistent"]
    assert cert.final_conclusion["final_n_bound"] < 500
    assert verify_certificate(cert)
