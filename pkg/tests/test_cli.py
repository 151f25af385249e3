import json

import pytest

from pillai_cert.cli import AppConfig, ConfigError, main, parse_expr


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_search_theorem_json(capsys):
    code, out, _ = run(capsys, "search", "--nmax", "500", "--mmax", "200", "--convention", "theorem",
                       "--format", "json")
    assert code == 0
    assert set(json.loads(out)) == {"-6", "0", "1", "22", "87"}


def test_search_small_range(capsys):
    code, out, _ = run(capsys, "search", "--nmax", "20", "--mmax", "3", "--convention", "theorem",
                       "--format", "csv")
    assert code == 0
    rows = out.splitlines()
    assert rows[0] == "c,n,m"
    assert {r.split(",")[0] for r in rows[1:]} >= {"-6", "0", "1"}


def test_search_empty(capsys):
    code, out, _ = run(capsys, "search", "--nmax", "0", "--mmax", "0", "--format", "json")
    assert code == 0 and json.loads(out) == {}


def test_bad_flags_exit_2(capsys):
    assert run(capsys, "search", "--format", "xml")[0] == 2
    assert run(capsys, "search", "--nmax", "-1")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2


def test_cf_lists(capsys):
    code, out, _ = run(capsys, "cf", "--expr", "log(alpha)/log(3)", "--terms", "18", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["quotients"][:8] == [0, 3, 1, 9, 1, 2, 1, 4]
    lo, hi = data["value"].strip("[]").split(",")
    assert float(lo) <= 0.25595888305952867 <= float(hi)


def test_cf_convergents(capsys):
    code, out, _ = run(capsys, "cf", "--expr", "log(alpha)/log(3)", "--qmin", str(12 * 10 ** 46),
                       "--convergents", "88", "--format", "json")
    assert code == 0
    p, q = json.loads(out)["convergents"]["88"]
    assert q == "12201370578769620000479260876419428374896683408344"


@pytest.mark.parametrize("expr", ["log(2)/log(2)", "log(alpha)/log(alpha)", "log(alpha)/log(1)",
                                  "log(alpha)+log(3)", "exp(alpha)/log(3)"])
def test_cf_grammar_violations(capsys, expr):
    assert run(capsys, "cf", "--expr", expr, "--terms", "5")[0] == 2


def test_parse_expr():
    assert parse_expr("log(alpha)/log(3)") == (True, 3)
    assert parse_expr(" log( 7 ) / log(alpha) ") == (False, 7)
    with pytest.raises(ConfigError):
        parse_expr("log(3)/log(5)")


def test_sequence(capsys):
    code, out, _ = run(capsys, "sequence", "--start", "10", "--stop", "14", "--format", "csv")
    assert code == 0
    assert out.splitlines() == ["n,value", "10,9", "11,12", "12,16", "13,21", "14,28"]


def test_config_parsing(tmp_path):
    path = tmp_path / "x.conf"
    path.write_text("# comment\nrecurrence.name = fibonacci\nbase = 3\nsearch.nmax = 50 # inline\n")
    cfg = AppConfig.load(str(path))
    assert cfg.spec().name == "fibonacci"
    assert cfg.pipeline().n_max == 50
    with pytest.raises(ConfigError):
        AppConfig.parse("nonsense.key = 1")
    with pytest.raises(ConfigError):
        AppConfig.parse("no equals sign")


def test_env_overrides_and_clamp():
    cfg = AppConfig.parse("precision.max_bits = 4096").with_env({"PILLAI_MAX_BITS": "100"})
    policy = cfg.policy()
    assert policy.max_bits == 100 and policy.initial_bits == 100
    cfg = AppConfig().with_env({"PILLAI_INITIAL_BITS": "300", "PILLAI_GROWTH_FACTOR": "3/2"})
    assert cfg.policy().initial_bits == 300


def test_certify_precision_exhausted(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("PILLAI_MAX_BITS", "8")
    out = tmp_path / "cert.json"
    code, _, err = run(capsys, "certify", "--out", str(out))
    assert code == 3
    assert json.loads(out.read_text())["final_conclusion"]["consistent"] is False


def test_verify_bad_inputs(capsys, tmp_path, canonical_certificate):
    assert run(capsys, "verify", "--cert", str(tmp_path / "missing.json"))[0] == 2
    data = json.loads(canonical_certificate.to_json())
    data["stages"][2]["rounds"]["gamma3"]["N_bound"] = 300
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert run(capsys, "verify", "--cert", str(bad))[0] == 1
    good = tmp_path / "good.json"
    good.write_text(canonical_certificate.to_json())
    assert run(capsys, "verify", "--cert", str(good))[0] == 0
