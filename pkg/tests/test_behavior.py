import random

from hypothesis import given, settings
from hypothesis import strategies as st

import pytest
from pioco.behavior import (
    CapExceeded,
    Path,
    after,
    ctraces,
    has_trace,
    is_acyclic,
    out,
    reach,
    traces_upto,
)
from pioco.model import DELTA, ModelError, parse_pqts
from randmodels import random_pqts


def brute_traces(p, k):
    """Oracle: enumerate every path of length <= k and collect its trace."""
    found = set()
    stack = [((), p.initial)]
    while stack:
        trace, s = stack.pop()
        found.add(trace)
        if len(trace) == k:
            continue
        for i in p.outgoing(s):
            for a, t, _ in p.transitions[i].dist:
                stack.append((trace + (a,), t))
    return found


def brute_reach(p, start, trace):
    cur = set(start)
    for a in trace:
        cur = {t for s in cur for i in p.outgoing(s) for b, t, q in p.transitions[i].dist if b == a}
    return cur


def test_reach_choice(choice):
    assert reach(choice, {"s0"}, ("a",)) == {"s1", "s2", "s3", "s4"}
    assert reach(choice, {"s0"}, ("a", "b")) == {"s5", "s8"}
    assert reach(choice, {"s0"}, ("a", "b")) == brute_reach(choice, {"s0"}, ("a", "b"))
    assert reach(choice, {"s3", "s7"}, ()) == {"s3", "s7"}
    assert reach(choice, {"s0"}, ("nonsense",)) == set()


def test_after_and_out_choice(choice):
    assert after(choice) == {"a", DELTA}
    assert after(choice, ("a",)) == {"b", "c", "d"}
    assert after(choice, ("b",)) == set()
    assert out(choice) == {DELTA}
    assert out(choice, ("b", "b")) == set()


def test_out_music(music):
    assert out(music, ("shuffle",)) == {"Song1", "Song2"}


def test_traces_upto(choice, split):
    assert traces_upto(split, 1) == [(), ("a",), ("b",)]
    assert traces_upto(choice, 0) == [()]
    t2 = traces_upto(choice, 2)
    assert set(t2) == brute_traces(choice, 2)
    assert t2 == [(), ("a",), ("delta",), ("a", "b"), ("a", "c"), ("a", "d"),
                  ("delta", "a"), ("delta", "delta")]


def test_traces_cap(choice):
    with pytest.raises(CapExceeded):
        traces_upto(choice, 6, cap=10)


def test_ctraces(player_test):
    assert set(ctraces(player_test)) == {
        (DELTA,), ("Song1",), ("Song2",),
        ("shuffle", DELTA), ("shuffle", "Song1"), ("shuffle", "Song2"),
    }
    single = parse_pqts("pqts z\ninputs:\noutputs:\nstates: s init\n")
    assert ctraces(single) == [()]
    chain = parse_pqts("pqts c\ninputs: a?\noutputs: x!\nstates: s0 init, s1, s2, s3\n"
                       "trans s0: { a? 1 -> s1 }\ntrans s1: { x! 1 -> s2 }\ntrans s2: { delta 1 -> s3 }\n")
    assert ctraces(chain) == [("a", "x", DELTA)]


def test_ctraces_rejects_cycles(choice):
    assert not is_acyclic(choice)
    with pytest.raises(ModelError):
        ctraces(choice)


def test_path_validity(choice):
    mu01 = choice.outgoing("s0")[0]
    mu1 = choice.outgoing("s1")[0]
    pi = Path("s0").extend(mu01, "a", "s1").extend(mu1, "b", "s5")
    assert pi.trace == ("a", "b") and pi.last == "s5" and pi.is_valid(choice)
    assert not Path("s0").extend(mu01, "a", "s3").is_valid(choice)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 3))
def test_trace_properties(seed, k):
    rng = random.Random(seed)
    p = random_pqts(rng)
    tk, tk1 = traces_upto(p, k), traces_upto(p, k + 1)
    assert () in tk and set(tk) <= set(tk1)
    assert set(tk) == brute_traces(p, k)
    assert all(has_trace(p, s) for s in tk)
    xs = set(rng.sample(p.states, rng.randint(1, len(p.states))))
    ys = set(rng.sample(p.states, rng.randint(1, len(p.states))))
    for sigma in tk:
        assert reach(p, xs | ys, sigma) == reach(p, xs, sigma) | reach(p, ys, sigma)


def test_acyclic_prefixes_extend_to_complete_traces(player_test):
    complete = ctraces(player_test)
    for sigma in traces_upto(player_test, len(player_test.states)):
        assert any(c[: len(sigma)] == sigma for c in complete)
