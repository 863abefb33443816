"""Statistical verdicts on samples of recorded traces.

Distances are compared through exact integer-valued keys: the max-coordinate
metric compares ``max |n_i D - m a_i|`` and the euclidean metric compares the
sum of squares, where ``a_i / D`` are the expected probabilities over a common
denominator and ``n_i`` the observed counts.  Square roots only appear in
reports.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, lcm

import numpy as np

from .behavior import CapExceeded, trace_key
from .model import DELTA, ModelError
from .sched import DEFAULT_ADVERSARY_CAP, TraceDistVector, vertices

METRICS = {"l2": "l2", "euclidean": "l2", "linf": "linf", "max": "linf"}
DEFAULT_OUTCOME_CAP = 10**6


def _metric(name: str) -> str:
    try:
        return METRICS[name]
    except KeyError:
        raise ValueError(f"unknown metric {name!r} (use l2 or linf)") from None


@dataclass(frozen=True)
class Sample:
    depth: int
    traces: tuple

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(tuple(s) for s in self.traces))
        for s in self.traces:
            if len(s) != self.depth:
                raise ModelError(f"sample trace {' '.join(s) or 'ε'} does not have length {self.depth}")

    @property
    def m(self) -> int:
        return len(self.traces)

    def to_text(self) -> str:
        lines = [f"sample k={self.depth} m={self.m}"]
        lines += [" ".join(s) for s in self.traces]
        return "\n".join(lines) + "\n"


_SAMPLE_HEADER = re.compile(r"^sample\s+k=(\d+)\s+m=(\d+)\s*$")


def parse_sample(text: str) -> Sample:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    while lines and not lines[0]:
        lines.pop(0)
    if not lines or not (head := _SAMPLE_HEADER.match(lines[0])):
        raise ModelError("expected header 'sample k=<k> m=<m>'")
    k, m = int(head.group(1)), int(head.group(2))
    body = lines[1:]
    if k > 0:
        body = [ln for ln in body if ln]
    else:
        while body and len(body) > m and not body[-1]:
            body.pop()
    if len(body) != m:
        raise ModelError(f"header announces {m} traces, found {len(body)}")
    return Sample(k, tuple(tuple(ln.split()) for ln in body))


def load_sample(path) -> Sample:
    with open(path, encoding="utf-8") as fh:
        return parse_sample(fh.read())


def freq(o: Sample) -> dict:
    if o.m == 0:
        raise ModelError("empty sample")
    counts = Counter(o.traces)
    return {s: Fraction(n, o.m) for s, n in sorted(counts.items(), key=lambda e: trace_key(e[0]))}


def expected(h, k: int) -> dict:
    """Mean of the length-``k`` cone probabilities of one or several trace distributions."""
    hs = [h] if isinstance(h, TraceDistVector) else list(h)
    if not hs:
        raise ValueError("no trace distributions given")
    total: dict = {}
    for v in hs:
        part = {s: q for s, q in v.items if len(s) == k}
        if sum(part.values(), Fraction(0)) != 1:
            raise ModelError(f"trace distribution does not put all its mass on length {k}")
        for s, q in part.items():
            total[s] = total.get(s, Fraction(0)) + q
    return {s: q / len(hs) for s, q in sorted(total.items(), key=lambda e: trace_key(e[0]))}


def distance_key(a: dict, b: dict, metric: str = "l2") -> Fraction:
    """Exact comparison key: the max-coordinate distance, or the squared euclidean one."""
    metric = _metric(metric)
    diffs = [a.get(s, 0) - b.get(s, 0) for s in set(a) | set(b)]
    if metric == "linf":
        return max((abs(d) for d in diffs), default=Fraction(0))
    return sum((d * d for d in diffs), Fraction(0))


def distance(a: dict, b: dict, metric: str = "l2"):
    key = distance_key(a, b, metric)
    return key if _metric(metric) == "linf" else math.sqrt(key)


@dataclass(frozen=True)
class Radius:
    metric: str
    key: Fraction | None  # None means unbounded
    exact: bool = True

    @property
    def value(self):
        if self.key is None:
            return math.inf
        return self.key if self.metric == "linf" else math.sqrt(self.key)

    def admits(self, dkey: Fraction) -> bool:
        return self.key is None or dkey <= self.key


def _outcome_count(m: int, s: int) -> int:
    return comb(m + s - 1, s - 1)


def _exact_weights(nums: list[int], den: int, m: int, metric: str) -> dict:
    """Integer weight of every distance key, summed over all count vectors.

    Weights are ``multinomial(n) * prod(a_i ** n_i)``; they add up to ``den ** m``.
    Coordinates are folded one by one with the partial key as state, which is
    the enumeration of all compositions of ``m`` grouped by shared prefixes.
    """
    layer = {(0, 0): 1}  # (counts used, partial key) -> weight
    for i, a in enumerate(nums):
        last = i == len(nums) - 1
        powers = [1]
        for _ in range(m):
            powers.append(powers[-1] * a)
        nxt: dict = {}
        for (used, part), w in layer.items():
            rest = m - used
            choices = (rest,) if last else range(rest + 1)
            for n in choices:
                dev = abs(n * den - m * a)
                key = max(part, dev) if metric == "linf" else part + dev * dev
                wt = w * comb(rest, n) * powers[n]
                if wt:
                    nk = (used + n, key)
                    nxt[nk] = nxt.get(nk, 0) + wt
        layer = nxt
    out: dict = {}
    for (_, key), w in layer.items():
        out[key] = out.get(key, 0) + w
    return out


def _mc_keys(nums: list[int], den: int, m: int, metric: str, draws: int, seed: int) -> list:
    rng = np.random.Generator(np.random.Philox(seed))
    pvals = np.array([a / den for a in nums], dtype=float)
    pvals /= pvals.sum()
    counts = rng.multinomial(m, pvals, size=draws)
    keys = []
    for row in counts.tolist():
        devs = [abs(n * den - m * a) for n, a in zip(row, nums)]
        keys.append(max(devs) if metric == "linf" else sum(d * d for d in devs))
    return keys


def radius(
    h,
    m: int,
    alpha: Fraction,
    metric: str = "l2",
    method: str = "exact",
    seed: int = 0,
    cap: int = DEFAULT_OUTCOME_CAP,
) -> Radius:
    """Smallest ball radius around the expected distribution holding more than
    ``1 - alpha`` of the sample mass, for ``m`` runs of the constant vector ``(h, ..., h)``.

    ``h`` is a trace distribution vector or an expected-frequency mapping.
    ``method`` is ``exact``, ``mc:<N>``, or ``auto:<N>`` (exact unless the
    outcome count passes ``cap``, then Monte-Carlo with ``N`` draws).
    """
    metric = _metric(metric)
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if m < 1:
        raise ValueError("m must be at least 1")
    probs = h if isinstance(h, dict) else expected(h, h.depth)
    probs = sorted(q for q in probs.values() if q)
    den = lcm(*(q.denominator for q in probs))
    nums = [int(q * den) for q in probs]
    scale = Fraction(1, m * den) if metric == "linf" else Fraction(1, (m * den) ** 2)

    kind, _, arg = method.partition(":")
    if kind not in ("exact", "mc", "auto"):
        raise ValueError(f"unknown method {method!r}")
    if kind == "exact" or (kind == "auto" and _outcome_count(m, len(nums)) <= cap):
        if _outcome_count(m, len(nums)) > cap:
            raise CapExceeded("multinomial outcomes", cap)
        weights = _exact_weights(nums, den, m, metric)
        total = den**m
        need = (1 - alpha) * total
        acc = 0
        for key in sorted(weights):
            acc += weights[key]
            if acc > need:
                return Radius(metric, key * scale)
        return Radius(metric, None)
    draws = int(arg) if arg else 0
    if draws < 1:
        raise ValueError("Monte-Carlo needs a positive number of draws, as in mc:10000")
    keys = sorted(_mc_keys(nums, den, m, metric, draws, seed))
    need = (1 - alpha) * draws
    for i, key in enumerate(keys):
        if i + 1 > need and (i + 1 == draws or keys[i + 1] != key):
            return Radius(metric, key * scale, exact=False)
    return Radius(metric, None, exact=False)


@dataclass(frozen=True)
class Acceptance:
    accepted: bool
    distance_key: Fraction
    radius: Radius
    expected: dict = field(default_factory=dict)

    @property
    def distance(self):
        return self.distance_key if self.radius.metric == "linf" else math.sqrt(self.distance_key)


def accept(o: Sample, h, alpha, metric: str = "l2", method: str = "exact",
           seed: int = 0, cap: int = DEFAULT_OUTCOME_CAP) -> Acceptance:
    e = h if isinstance(h, dict) else expected(h, o.depth)
    if any(len(s) != o.depth for s in e):
        raise ModelError("sample and expected distribution have different depths")
    r = radius(e, o.m, alpha, metric, method, seed, cap)
    dkey = distance_key(freq(o), e, metric)
    return Acceptance(r.admits(dkey), dkey, r, e)


def padded_expectation(v: TraceDistVector, k: int) -> dict:
    """Length-``k`` distribution where mass halted early is extended by quiescence."""
    out: dict = {}
    for s, q in v.halted().items():
        full = s + (DELTA,) * (k - len(s))
        out[full] = out.get(full, Fraction(0)) + q
    return dict(sorted(out.items(), key=lambda e: trace_key(e[0])))


@dataclass(frozen=True)
class StatVerdict:
    verdict: str
    candidate: dict  # accepted candidate, or the closest one on failure
    acceptance: Acceptance
    candidates: int


def statistical_verdict(o: Sample, spec, at, alpha, metric: str = "l2", method: str = "exact",
                        seed: int = 0, cap: int = DEFAULT_OUTCOME_CAP,
                        cap_adversaries: int = DEFAULT_ADVERSARY_CAP) -> StatVerdict:
    """Pass iff the sample is acceptable for some deterministic spec behaviour under the test."""
    from .testgen import compose

    if o.depth != at.depth:
        raise ModelError(f"sample depth {o.depth} differs from test depth {at.depth}")
    composed = compose(spec, at.test)
    seen = []
    for v in vertices(composed, o.depth, allow_halt=False, cap=cap_adversaries):
        e = padded_expectation(v, o.depth)
        if e not in seen:
            seen.append(e)
    if not seen:
        raise ModelError("the specification offers no behaviour under this test")
    observed = freq(o)
    radii: dict = {}
    best = None
    for e in seen:
        shape = tuple(sorted(e.values()))
        if shape not in radii:
            radii[shape] = radius(e, o.m, alpha, metric, method, seed, cap)
        r = radii[shape]
        dkey = distance_key(observed, e, metric)
        acc = Acceptance(r.admits(dkey), dkey, r, e)
        if acc.accepted:
            return StatVerdict("pass", e, acc, len(seen))
        if best is None or dkey < best.distance_key:
            best = acc
    return StatVerdict("fail", best.expected, best, len(seen))


def combined_verdict(output: str, statistical: str) -> str:
    return "pass" if output == "pass" and statistical == "pass" else "fail"


def _q(x) -> str:
    return str(Fraction(x))


@dataclass(frozen=True)
class VerdictReport:
    alpha: Fraction
    metric: str
    radius: Radius
    distance_key: Fraction
    output: str
    statistical: str
    candidate: dict
    candidates: int = 1

    @property
    def combined(self) -> str:
        return combined_verdict(self.output, self.statistical)

    def to_json(self) -> dict:
        r = self.radius
        d = {
            "alpha": _q(self.alpha),
            "metric": r.metric,
            "radius": None if r.key is None else (_q(r.key) if r.metric == "linf" else r.value),
            "radius_exact": r.exact,
            "distance": _q(self.distance_key) if r.metric == "linf" else math.sqrt(self.distance_key),
            "output_verdict": self.output,
            "statistical_verdict": self.statistical,
            "combined_verdict": self.combined,
            "candidates": self.candidates,
            "expected": {" ".join(s): _q(q) for s, q in self.candidate.items()},
        }
        if r.metric == "l2":
            d["radius_squared"] = None if r.key is None else _q(r.key)
            d["distance_squared"] = _q(self.distance_key)
        return d
