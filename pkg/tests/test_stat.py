import math
from fractions import Fraction
from itertools import product
from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import model
from pioco.behavior import CapExceeded
from pioco.model import ModelError
from pioco.sched import TraceDistVector
from pioco.stat import (
    Sample,
    VerdictReport,
    accept,
    combined_verdict,
    distance,
    distance_key,
    expected,
    freq,
    parse_sample,
    radius,
    statistical_verdict,
)
from pioco.testgen import generate_tests, run_test

F = Fraction
AB, AC = ("a", "b"), ("a", "c")
COIN = {AB: F(1, 2), AC: F(1, 2)}


def coin_sample(heads, m=100):
    return Sample(2, [AB] * heads + [AC] * (m - heads))


def coin_vector():
    return TraceDistVector.of(2, {(): 1, ("a",): 1, AB: F(1, 2), AC: F(1, 2)})


def test_freq():
    assert freq(coin_sample(42)) == {AB: F(21, 50), AC: F(29, 50)}
    assert freq(Sample(2, [AB] * 7)) == {AB: 1}
    assert AC not in freq(Sample(2, [AB] * 7))


def test_sample_invariants():
    with pytest.raises(ModelError):
        Sample(2, [("a",)])


def test_expected():
    assert expected(coin_vector(), 2) == COIN
    dirac = TraceDistVector.of(1, {(): 1, ("x",): 1})
    assert expected([dirac] * 5, 1) == {("x",): 1}
    left = TraceDistVector.of(1, {(): 1, ("x",): 1})
    right = TraceDistVector.of(1, {(): 1, ("y",): 1})
    assert expected([left, right], 1) == {("x",): F(1, 2), ("y",): F(1, 2)}
    with pytest.raises(ModelError):
        expected(TraceDistVector.of(1, {(): 1, ("x",): F(1, 2)}), 1)


def test_distance():
    f = freq(coin_sample(42))
    assert distance(f, f) == 0
    assert distance(f, COIN, "l2") == pytest.approx(4 / 50 * math.sqrt(2), rel=1e-12)
    assert distance_key(f, COIN, "l2") == 2 * F(4, 50) ** 2
    assert distance(f, COIN, "linf") == F(2, 25)
    with pytest.raises(ValueError):
        distance(f, COIN, "l3")


def binomial_mass(lo, hi, m=100):
    return F(sum(comb(m, i) for i in range(lo, hi + 1)), 2**m)


def test_coin_radius():
    assert binomial_mass(40, 60) > F(19, 20) >= binomial_mass(41, 59)
    r = radius(coin_vector(), 100, F(1, 20), "linf")
    assert r.key == F(1, 10) and r.value == F(1, 10) and r.exact


def test_radius_edge_cases():
    dirac = {("x",): F(1)}
    for alpha in (F(1, 100), F(1, 2), F(1)):
        assert radius(dirac, 10, alpha, "l2").key == 0
    assert radius(COIN, 10, F(0), "linf").value == math.inf
    with pytest.raises(ValueError):
        radius(COIN, 10, F(3, 2))
    with pytest.raises(CapExceeded):
        radius({(str(i),): F(1, 20) for i in range(20)}, 100, F(1, 20), cap=1000)


def brute_radius(probs, m, alpha, metric):
    """Oracle: enumerate every count vector of m draws directly."""
    s = len(probs)
    weights = {}
    for counts in product(range(m + 1), repeat=s):
        if sum(counts) != m:
            continue
        p = F(math.factorial(m))
        for n, q in zip(counts, probs):
            p *= q**n / math.factorial(n)
        d = [F(n, m) - q for n, q in zip(counts, probs)]
        key = max(abs(x) for x in d) if metric == "linf" else sum(x * x for x in d)
        weights[key] = weights.get(key, 0) + p
    acc = 0
    for key in sorted(weights):
        acc += weights[key]
        if acc > 1 - alpha:
            return key
    return None


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=3), st.integers(1, 9),
       st.fractions(0, 1, max_denominator=20), st.sampled_from(["l2", "linf"]))
def test_radius_matches_enumeration(ws, m, alpha, metric):
    probs = [F(w, sum(ws)) for w in ws]
    h = {(str(i),): q for i, q in enumerate(probs)}
    assert radius(h, m, alpha, metric).key == brute_radius(probs, m, alpha, metric)


@settings(max_examples=30, deadline=None)
@given(st.fractions(0, 1, max_denominator=30), st.fractions(0, 1, max_denominator=30),
       st.integers(1, 30))
def test_radius_monotone_in_alpha(a1, a2, m):
    lo, hi = sorted((a1, a2))
    h = {("x",): F(1, 3), ("y",): F(2, 3)}
    r_lo, r_hi = radius(h, m, lo, "linf"), radius(h, m, hi, "linf")
    assert r_lo.value >= r_hi.value
    o = Sample(1, [("x",)] * (m // 2) + [("y",)] * (m - m // 2))
    # a larger ball (smaller alpha) never rejects what a smaller one accepts
    if accept(o, h, hi, "linf").accepted:
        assert accept(o, h, lo, "linf").accepted


def test_monte_carlo_agrees_with_exact():
    exact = radius(COIN, 100, F(1, 20), "linf")
    mc = radius(COIN, 100, F(1, 20), "linf", method="mc:20000", seed=3)
    assert not mc.exact
    # radii live on the 1/100 grid; the estimate may sit one step off
    assert abs(mc.key - exact.key) <= F(1, 100)
    assert radius(COIN, 100, F(1, 20), "linf", method="mc:20000", seed=3) == mc
    with pytest.raises(ValueError):
        radius(COIN, 100, F(1, 20), method="mc:0")


def test_accept_coin():
    assert accept(coin_sample(42), coin_vector(), F(1, 20), "linf").accepted
    assert not accept(coin_sample(38), coin_vector(), F(1, 20), "linf").accepted
    for alpha in (F(1, 100), F(1, 2), F(99, 100)):
        assert accept(coin_sample(50), COIN, alpha, "l2").accepted


def test_statistical_verdicts_music(music):
    [t] = generate_tests(music, 2, 1, 7)
    uniform = {("shuffle", "Song1"): F(1, 2), ("shuffle", "Song2"): F(1, 2)}
    o = run_test(t, model("music_impl2_uniform"), 100, 0).sample
    sv = statistical_verdict(o, music, t, F(1, 20), "linf")
    assert sv.verdict == ("pass" if accept(o, uniform, F(1, 20), "linf").accepted else "fail")
    assert sv.verdict == "pass" and sv.candidate == uniform
    skew = run_test(t, model("music_impl2_skew"), 100, 0).sample
    assert statistical_verdict(skew, music, t, F(1, 20), "linf").verdict == "fail"
    stray = Sample(2, [("shuffle", "done")] * 50 + [("shuffle", "Song1")] * 50)
    assert statistical_verdict(stray, music, t, F(1, 20), "l2").verdict == "fail"
    with pytest.raises(ModelError):
        statistical_verdict(Sample(1, [("shuffle",)]), music, t, F(1, 20))


def test_combined_verdict():
    assert combined_verdict("pass", "pass") == "pass"
    assert combined_verdict("pass", "fail") == "fail"
    assert combined_verdict("fail", "pass") == "fail"


def test_sample_file_roundtrip():
    o = coin_sample(42)
    assert parse_sample(o.to_text()) == o
    assert parse_sample("sample k=0 m=2\n\n\n") == Sample(0, [(), ()])
    with pytest.raises(ModelError):
        parse_sample("sample k=2 m=3\na b\n")
    with pytest.raises(ModelError):
        parse_sample("samples k=2\n")


def test_report_json():
    acc = accept(coin_sample(42), COIN, F(1, 20), "linf")
    rep = VerdictReport(F(1, 20), "linf", acc.radius, acc.distance_key, "pass", "pass", COIN)
    data = rep.to_json()
    assert data["radius"] == "1/10" and data["distance"] == "2/25" and data["alpha"] == "1/20"
    assert data["combined_verdict"] == "pass" and data["expected"] == {"a b": "1/2", "a c": "1/2"}


def test_self_acceptance_rate(coin):
    """A conforming simulated system is rejected at most about alpha of the time."""
    [t] = generate_tests(coin, 2, 1, 0)
    alpha, R = F(1, 10), 100
    rejected = 0
    for i in range(R):
        o = run_test(t, coin, 40, 1000 + i).sample
        rejected += statistical_verdict(o, coin, t, alpha, "l2").verdict == "fail"
    assert rejected / R <= alpha + 3 * math.sqrt(alpha / R)
