"""Command-line front end.

Subcommands: ``search``, ``cf``, ``certify``, ``verify`` and ``sequence``.

Exit codes: 0 success, 1 internal error or inconsistent certificate,
2 invalid flags or configuration, 3 precision exhausted.

Configuration files hold one ``key = value`` per line; ``#`` starts a
comment.  Known keys::

    recurrence.name  recurrence.order  recurrence.coefficients  recurrence.initial
    base  search.nmax  search.mmax  search.convention
    precision.initial_bits  precision.max_bits  precision.growth_factor
    mode  reduction.M

``PILLAI_INITIAL_BITS``, ``PILLAI_MAX_BITS`` and ``PILLAI_GROWTH_FACTOR``
override the precision keys.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import search as search_mod
from .cfrac import expand
from .pipeline import MODES, Certificate, PipelineConfig, run_all, verify_certificate
from .rigor import DEFAULT_BITS, BallReal, PrecisionExhausted, PrecisionPolicy, RigorError
from .sequence import PADOVAN, PRESETS, RecurrenceSpec, characteristic_roots, terms

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PRECISION = 0, 1, 2, 3

ENV_KEYS = {
    "PILLAI_INITIAL_BITS": "precision.initial_bits",
    "PILLAI_MAX_BITS": "precision.max_bits",
    "PILLAI_GROWTH_FACTOR": "precision.growth_factor",
}

KNOWN_KEYS = frozenset({
    "recurrence.name", "recurrence.order", "recurrence.coefficients", "recurrence.initial",
    "base", "search.nmax", "search.mmax", "search.convention",
    "precision.initial_bits", "precision.max_bits", "precision.growth_factor",
    "mode", "reduction.M",
})


class ConfigError(ValueError):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.replace(" ", "").split(",") if part)
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from None


def _int(key: str, text: str) -> int:
    try:
        value = Fraction(text.replace("_", ""))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key}: not a number: {text!r}") from None
    if value.denominator != 1:
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(value)


@dataclass
class AppConfig:
    """Settings shared by the subcommands."""

    values: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "AppConfig":
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in KNOWN_KEYS:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            values[key] = value
        return cls(values)

    @classmethod
    def load(cls, path: Optional[str]) -> "AppConfig":
        if path is None:
            return cls()
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.parse(text, path)

    def with_env(self, environ=os.environ) -> "AppConfig":
        values = dict(self.values)
        for env, key in ENV_KEYS.items():
            if environ.get(env):
                values[key] = environ[env]
        return AppConfig(values)

    def spec(self) -> RecurrenceSpec:
        v = self.values
        name = v.get("recurrence.name", "padovan")
        if not any(k in v for k in ("recurrence.order", "recurrence.coefficients", "recurrence.initial")):
            if name not in PRESETS:
                raise ConfigError(f"unknown recurrence {name!r}; presets: {sorted(PRESETS)}")
            return PRESETS[name]
        base = PRESETS.get(name, PADOVAN)
        coefficients = _int_list(v["recurrence.coefficients"]) if "recurrence.coefficients" in v \
            else base.coefficients
        initial = _int_list(v["recurrence.initial"]) if "recurrence.initial" in v else base.initial
        order = _int("recurrence.order", v["recurrence.order"]) if "recurrence.order" in v \
            else len(coefficients)
        try:
            return RecurrenceSpec(order, coefficients, initial, name)
        except ValueError as exc:
            raise ConfigError(f"recurrence: {exc}") from None

    def policy(self) -> PrecisionPolicy:
        v = self.values
        max_bits = _int("precision.max_bits", v.get("precision.max_bits", str(1 << 16)))
        if "precision.initial_bits" in v:
            initial = _int("precision.initial_bits", v["precision.initial_bits"])
        else:
            initial = min(DEFAULT_BITS, max_bits)
        try:
            growth = Fraction(v.get("precision.growth_factor", "2"))
            return PrecisionPolicy(initial, max_bits, growth)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"precision: {exc}") from None

    def pipeline(self, mode: Optional[str] = None) -> PipelineConfig:
        v = self.values
        try:
            return PipelineConfig(
                spec=self.spec(),
                base=_int("base", v.get("base", "3")),
                n_max=_int("search.nmax", v.get("search.nmax", "500")),
                m_max=_int("search.mmax", v.get("search.mmax", "200")),
                convention=v.get("search.convention", "theorem"),
                policy=self.policy(),
                mode=mode or v.get("mode", "faithful"),
                M=_int("reduction.M", v.get("reduction.M", "2e46")),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None


# search ----------------------------------------------------------------------


def _render_table(rows) -> str:
    lines = [f"{'c':>8}  representations (n, m)"]
    for c, reps in rows:
        lines.append(f"{c:>8}  " + ", ".join(f"({r.n}, {r.m})" for r in reps))
    return "\n".join(lines) + "\n"


def cmd_search(args, cfg: AppConfig) -> int:
    spec = PRESETS[args.recurrence] if args.recurrence else cfg.spec()
    base = args.base if args.base is not None else _int("base", cfg.values.get("base", "3"))
    convention = args.convention or cfg.values.get("search.convention", "theorem")
    n_max = args.nmax if args.nmax is not None else _int("search.nmax", cfg.values.get("search.nmax", "500"))
    m_max = args.mmax if args.mmax is not None else _int("search.mmax", cfg.values.get("search.mmax", "200"))
    if n_max < 0 or m_max < 0 or base < 2:
        raise ConfigError("nmax and mmax must be non-negative and base at least 2")
    config = search_mod.SearchConfig.preset(convention, n_max, m_max, base, spec)
    table = search_mod.enumerate_table(config, workers=args.workers)
    if args.format == "json":
        out = search_mod.table_to_json(table, threshold=2) + "\n"
    elif args.format == "csv":
        out = search_mod.table_to_csv(table, threshold=2)
    else:
        out = _render_table(search_mod.multi_represented(table, 2))
    _emit(out, args.out)
    return EXIT_OK


# cf ----------------------------------------------------------------------------

_EXPR = re.compile(r"^\s*log\(\s*(alpha|\d+)\s*\)\s*/\s*log\(\s*(alpha|\d+)\s*\)\s*$")


def parse_expr(text: str):
    """``log(alpha)/log(INT)`` or ``log(INT)/log(alpha)``, INT >= 2."""
    match = _EXPR.match(text)
    if not match:
        raise ConfigError(f"expression {text!r} is not log(alpha)/log(INT) or log(INT)/log(alpha)")
    top, bottom = match.groups()
    if (top == "alpha") == (bottom == "alpha"):
        raise ConfigError("exactly one side must be log(alpha)")
    integer = int(bottom if top == "alpha" else top)
    if integer < 2:
        raise ConfigError("INT must be at least 2")
    return top == "alpha", integer


def cmd_cf(args, cfg: AppConfig) -> int:
    alpha_on_top, integer = parse_expr(args.expr)
    spec = PRESETS[args.recurrence] if args.recurrence else cfg.spec()
    policy = cfg.policy()
    if args.terms is None and args.qmin is None:
        raise ConfigError("give --terms or --qmin")
    if args.terms is not None and args.terms < 1:
        raise ConfigError("--terms must be positive")

    def value(bits: int) -> BallReal:
        la = characteristic_roots(spec, bits).alpha.log()
        li = BallReal(integer, bits).log()
        return la / li if alpha_on_top else li / la

    exp = expand(value, count=args.terms, q_exceeds=args.qmin, policy=policy)
    shown = value(exp.source_precision)
    convs = args.convergents if args.convergents is not None else []
    payload = {
        "expr": args.expr,
        "value": shown.interval_string(40),
        "precision_bits": exp.source_precision,
        "quotients": list(exp.quotients),
        "convergents": {str(k): [str(exp.convergents[k][0]), str(exp.convergents[k][1])]
                        for k in convs if 0 <= k <= exp.certified_through},
    }
    missing = [k for k in convs if not 0 <= k <= exp.certified_through]
    if args.format == "json":
        out = json.dumps(payload, indent=2) + "\n"
    else:
        lines = [f"value      {payload['value']}",
                 f"precision  {exp.source_precision} bits",
                 "quotients  [" + ", ".join(map(str, exp.quotients)) + "]"]
        for k, (p, q) in payload["convergents"].items():
            lines.append(f"p_{k} = {p}")
            lines.append(f"q_{k} = {q}")
        out = "\n".join(lines) + "\n"
    _emit(out, args.out)
    if missing:
        print(f"convergents {missing} are beyond the certified range", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


# certify / verify -----------------------------------------------------------------


def cmd_certify(args, cfg: AppConfig) -> int:
    config = cfg.pipeline(args.mode)
    cert = run_all(config)
    _emit(cert.to_json() + "\n", args.out)
    final = cert.final_conclusion
    summary = (f"consistent={str(final['consistent']).lower()} "
               f"final_n_bound={final['final_n_bound']} threshold_n={final['threshold_n']}")
    if final.get("error"):
        summary += f" failed_stage={final['failed_stage']} error={final['error']}"
    print(summary, file=sys.stderr)
    if final["consistent"]:
        return EXIT_OK
    if (final.get("error") or "").startswith(PrecisionExhausted.__name__):
        return EXIT_PRECISION
    return EXIT_FAIL


def cmd_verify(args, cfg: AppConfig) -> int:
    try:
        cert = Certificate.from_json(Path(args.cert).read_text())
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read certificate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    problems: list[str] = []
    ok = verify_certificate(cert, problems)
    for line in problems:
        print(line, file=sys.stderr)
    print("verified" if ok else "NOT verified")
    return EXIT_OK if ok else EXIT_FAIL


# sequence ------------------------------------------------------------------------


def cmd_sequence(args, cfg: AppConfig) -> int:
    spec = PRESETS[args.recurrence] if args.recurrence else cfg.spec()
    if args.start < 0 or args.stop < args.start:
        raise ConfigError("need 0 <= start <= stop")
    values = terms(spec, args.stop)[args.start:]
    indices = range(args.start, args.stop + 1)
    if args.format == "json":
        out = json.dumps({str(n): str(u) for n, u in zip(indices, values)}, indent=2) + "\n"
    elif args.format == "csv":
        out = "n,value\n" + "".join(f"{n},{u}\n" for n, u in zip(indices, values))
    else:
        out = "".join(f"{n:>6}  {u}\n" for n, u in zip(indices, values))
    _emit(out, args.out)
    return EXIT_OK


# plumbing --------------------------------------------------------------------------


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _int_csv(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pillai-cert",
                                     description="Certified search and bounds for U_n - b^m = c.")
    parser.add_argument("--config", help="key = value configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="list c with at least two representations")
    p.add_argument("--nmax", type=int)
    p.add_argument("--mmax", type=int)
    p.add_argument("--base", type=int)
    p.add_argument("--convention", choices=sorted(search_mod.CONVENTIONS))
    p.add_argument("--recurrence", choices=sorted(PRESETS))
    p.add_argument("--format", choices=("json", "csv", "table"), default="table")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("cf", help="certified continued fraction of a log ratio")
    p.add_argument("--expr", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--terms", type=int)
    group.add_argument("--qmin", type=int, help="expand until a denominator exceeds this")
    p.add_argument("--convergents", type=_int_csv, help="indices k to print p_k, q_k for")
    p.add_argument("--recurrence", choices=sorted(PRESETS))
    p.add_argument("--format", choices=("json", "table"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_cf)

    p = sub.add_parser("certify", help="run the whole pipeline and write a certificate")
    p.add_argument("--config", dest="sub_config")
    p.add_argument("--out")
    p.add_argument("--mode", choices=MODES)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", help="re-check a certificate")
    p.add_argument("--cert", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sequence", help="print terms of the recurrence")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--stop", type=int, default=20)
    p.add_argument("--recurrence", choices=sorted(PRESETS))
    p.add_argument("--format", choices=("json", "csv", "table"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sequence)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        path = getattr(args, "sub_config", None) or args.config
        cfg = AppConfig.load(path).with_env()
        return args.func(args, cfg)
    except ValueError as exc:
        # ConfigError and invalid values raised while building module configs
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PrecisionExhausted as exc:
        print(f"precision exhausted: {exc}", file=sys.stderr)
        return EXIT_PRECISION
    except (RigorError, ArithmeticError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
