"""Command-line interface.

Exit codes: 0 pass/valid, 1 fail/nonconformance/invalid, 2 usage or model
error, 3 a resource cap was hit.  Reports are JSON on stdout (or ``--out``);
a one-line summary goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .behavior import CapExceeded
from .conformance import PREFIX_MODES, check
from .convex import DEFAULT_FACET_CAP
from .model import ModelError, load, parse_document, validate
from .sched import DEFAULT_ADVERSARY_CAP
from .stat import DEFAULT_OUTCOME_CAP, VerdictReport, load_sample, statistical_verdict
from .testgen import (
    FAIL,
    ExternalSut,
    exec_traces,
    generate_tests,
    load_test,
    run_test,
    serialize_test,
    structure_problems,
)

EXIT_PASS, EXIT_FAIL, EXIT_ERROR, EXIT_CAP = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    path: str | None = None
    spec: str | None = None
    impl: str | None = None
    test: str | None = None
    sample: str | None = None
    depth: int = 2
    relation: str = "pioco"
    alpha: Fraction = Fraction(1, 20)
    metric: str = "l2"
    seed: int = 0
    runs: int = 100
    timeout_ms: int | None = None
    sut: str | None = None
    method: str = "exact"
    cap_adversaries: int = DEFAULT_ADVERSARY_CAP
    cap_facets: int = DEFAULT_FACET_CAP
    cap_outcomes: int = DEFAULT_OUTCOME_CAP
    prefix_mode: str = "all"
    count: int = 1
    out: str | None = None

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise UsageError("--alpha must lie in [0, 1]")
        if self.depth < 0:
            raise UsageError("--depth must be non-negative")
        if self.runs < 1:
            raise UsageError("--runs must be at least 1")

    def need(self, *names):
        for n in names:
            if getattr(self, n) is None:
                raise UsageError(f"{self.command} needs --{n.replace('_', '-')}")


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"{text!r} is not a rational like 1/20") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pioco", description="probabilistic model-based testing")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="write the report here instead of stdout")

    v = sub.add_parser("validate", help="check a model or test file")
    v.add_argument("path")
    common(v)

    c = sub.add_parser("check", help="decide a conformance relation up to a depth")
    c.add_argument("--spec", required=True)
    c.add_argument("--impl", required=True)
    c.add_argument("--depth", type=int, default=2)
    c.add_argument("--relation", choices=("ioco", "td", "pioco"), default="pioco")
    c.add_argument("--prefix-mode", choices=PREFIX_MODES, default="all")
    c.add_argument("--cap-adversaries", type=int, default=DEFAULT_ADVERSARY_CAP)
    c.add_argument("--cap-facets", type=int, default=DEFAULT_FACET_CAP)
    common(c)

    g = sub.add_parser("gentest", help="generate annotated tests from a specification")
    g.add_argument("--spec", required=True)
    g.add_argument("--depth", type=int, default=2)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    common(g)

    for name, help_ in (("exec", "run a test and report the output verdict"),
                        ("sample", "run a test and write the recorded sample")):
        e = sub.add_parser(name, help=help_)
        e.add_argument("--test", required=True)
        e.add_argument("--impl")
        e.add_argument("--sut", help="command line of an external system")
        e.add_argument("--timeout-ms", type=int)
        e.add_argument("--runs", type=int, default=100)
        e.add_argument("--seed", type=int, default=0)
        common(e)

    d = sub.add_parser("verdict", help="statistical and combined verdict for a sample")
    d.add_argument("--spec", required=True)
    d.add_argument("--test", required=True)
    d.add_argument("--sample", required=True)
    d.add_argument("--alpha", type=_fraction, default=Fraction(1, 20))
    d.add_argument("--metric", choices=("l2", "linf"), default="l2")
    d.add_argument("--method", default="exact", help="exact, mc:<N> or auto:<N>")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--cap-adversaries", type=int, default=DEFAULT_ADVERSARY_CAP)
    d.add_argument("--cap-outcomes", type=int, default=DEFAULT_OUTCOME_CAP)
    common(d)
    return p


def _emit(cfg: RunConfig, report: dict):
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _say(msg: str):
    print(msg, file=sys.stderr)


def cmd_validate(cfg: RunConfig) -> int:
    text = Path(cfg.path).read_text(encoding="utf-8")
    doc = parse_document(text)
    if doc.kind == "test":
        problems = structure_problems(doc.pqts)
        if not problems:
            load_test(cfg.path)  # annotation coverage
    else:
        problems = [str(v) for v in validate(doc.pqts)]
    _emit(cfg, {"file": cfg.path, "kind": doc.kind, "valid": not problems,
                "violations": problems})
    for msg in problems:
        _say(msg)
    _say(f"{cfg.path}: {'valid' if not problems else f'{len(problems)} violation(s)'}")
    return EXIT_FAIL if problems else EXIT_PASS


def cmd_check(cfg: RunConfig) -> int:
    spec, impl = load(cfg.spec), load(cfg.impl)
    kw = {"cap_adversaries": cfg.cap_adversaries, "cap_facets": cfg.cap_facets}
    if cfg.relation == "pioco":
        kw["prefix"] = cfg.prefix_mode
    verdict = check(cfg.relation, impl, spec, cfg.depth, **({} if cfg.relation == "ioco" else kw))
    report = verdict.to_json()
    report.update({"spec": cfg.spec, "impl": cfg.impl})
    if cfg.relation == "pioco":
        report["prefix_mode"] = cfg.prefix_mode
    _emit(cfg, report)
    _say(f"{cfg.relation} up to depth {cfg.depth}: {report['result']}")
    return EXIT_PASS if verdict.passed else EXIT_FAIL


def cmd_gentest(cfg: RunConfig) -> int:
    spec = load(cfg.spec)
    tests = generate_tests(spec, cfg.depth, cfg.count, cfg.seed)
    if len(tests) == 1 and cfg.out is None:
        sys.stdout.write(serialize_test(tests[0]))
    elif len(tests) == 1:
        Path(cfg.out).write_text(serialize_test(tests[0]), encoding="utf-8")
    else:
        cfg.need("out")
        base = Path(cfg.out)
        for i, t in enumerate(tests):
            path = base.with_name(f"{base.stem}_{i}{base.suffix or '.test'}")
            path.write_text(serialize_test(t), encoding="utf-8")
    _say(f"generated {len(tests)} test(s) of depth {cfg.depth}")
    return EXIT_PASS


def _execute(cfg: RunConfig):
    at = load_test(cfg.test)
    if (cfg.impl is None) == (cfg.sut is None):
        raise UsageError(f"{cfg.command} needs exactly one of --impl and --sut")
    if cfg.impl is not None:
        target = impl = load(cfg.impl)
    else:
        cfg.need("timeout_ms")
        impl = None
        target = ExternalSut(cfg.sut, at.test.inputs, cfg.timeout_ms)
    return at, impl, run_test(at, target, cfg.runs, cfg.seed)


def cmd_exec(cfg: RunConfig) -> int:
    at, impl, ex = _execute(cfg)
    report = {
        "test": cfg.test,
        "runs": cfg.runs,
        "seed": cfg.seed,
        "output_verdict": ex.verdict,
        "failing_traces": [" ".join(s) for s in ex.failing],
    }
    if impl is not None:
        report["exec_traces"] = {" ".join(s): at.annotation[s] for s in exec_traces(at, impl)}
    _emit(cfg, report)
    _say(f"output verdict: {ex.verdict}")
    return EXIT_FAIL if ex.verdict == FAIL else EXIT_PASS


def cmd_sample(cfg: RunConfig) -> int:
    _, _, ex = _execute(cfg)
    text = ex.sample.to_text()
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    _say(f"recorded {ex.sample.m} traces of length {ex.sample.depth}")
    return EXIT_PASS


def cmd_verdict(cfg: RunConfig) -> int:
    spec = load(cfg.spec)
    at = load_test(cfg.test)
    sample = load_sample(cfg.sample)
    output = FAIL if any(at.verdict(s) == FAIL for s in sample.traces) else "pass"
    sv = statistical_verdict(sample, spec, at, cfg.alpha, cfg.metric, cfg.method, cfg.seed,
                             cfg.cap_outcomes, cfg.cap_adversaries)
    report = VerdictReport(cfg.alpha, cfg.metric, sv.acceptance.radius, sv.acceptance.distance_key,
                           output, sv.verdict, sv.candidate, sv.candidates)
    data = report.to_json()
    data.update({"m": sample.m, "depth": sample.depth})
    _emit(cfg, data)
    _say(f"output {output}, statistical {sv.verdict}, combined {report.combined}")
    return EXIT_PASS if report.combined == "pass" else EXIT_FAIL


COMMANDS = {
    "validate": cmd_validate,
    "check": cmd_check,
    "gentest": cmd_gentest,
    "exec": cmd_exec,
    "sample": cmd_sample,
    "verdict": cmd_verdict,
}


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    try:
        cfg = RunConfig(**args)
        return COMMANDS[cfg.command](cfg)
    except CapExceeded as exc:
        _say(f"error: {exc}")
        return EXIT_CAP
    except (UsageError, ModelError, OSError, ValueError, KeyError) as exc:
        _say(f"error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
