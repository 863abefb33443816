"""Language-theoretic views of a pQTS: reachability, enabled actions, traces."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

from .model import ModelError, Pqts

DEFAULT_TRACE_CAP = 10**6


class CapExceeded(ModelError):
    """An enumeration grew past its configured limit."""

    def __init__(self, what: str, cap: int):
        self.what = what
        self.cap = cap
        super().__init__(f"{what} exceeded the cap of {cap}")


def trace_key(trace):
    return (len(trace), trace)


@dataclass(frozen=True)
class Path:
    """A finite path: a start state and steps ``(transition, label, target)``."""

    start: str
    steps: tuple = ()

    @property
    def last(self) -> str:
        return self.steps[-1][2] if self.steps else self.start

    @property
    def trace(self) -> tuple:
        return tuple(a for _, a, _ in self.steps)

    def __len__(self):
        return len(self.steps)

    def extend(self, transition: int, label: str, target: str) -> Path:
        return Path(self.start, self.steps + ((transition, label, target),))

    def is_valid(self, p: Pqts) -> bool:
        state = self.start
        for i, a, s in self.steps:
            if not 0 <= i < len(p.transitions):
                return False
            t = p.transitions[i]
            if t.source != state or t.dist.prob(a, s) <= 0:
                return False
            state = s
        return True


def reach(p: Pqts, start: Iterable[str], trace: Iterable[str]) -> frozenset:
    current = frozenset(start)
    for a in trace:
        if not current:
            break
        current = frozenset(t for s in current for t in p.successors(s, a))
    return current


def after(p: Pqts, trace: Iterable[str] = ()) -> frozenset:
    return frozenset().union(*(p.enabled(s) for s in reach(p, {p.initial}, trace)))


def out(p: Pqts, trace: Iterable[str] = ()) -> frozenset:
    return after(p, trace) & p.signature.observable


def has_trace(p: Pqts, trace: Iterable[str]) -> bool:
    return bool(reach(p, {p.initial}, trace))


def traces_upto(p: Pqts, k: int, cap: int = DEFAULT_TRACE_CAP) -> list:
    """All traces of length at most ``k``, sorted by length then lexicographically."""
    if k < 0:
        raise ValueError("depth must be non-negative")
    result = [()]
    frontier = {(): frozenset({p.initial})}
    for _ in range(k):
        nxt = {}
        for trace, states in frontier.items():
            for a in sorted(frozenset().union(*(p.enabled(s) for s in states))):
                nxt[trace + (a,)] = frozenset(t for s in states for t in p.successors(s, a))
        result.extend(nxt)
        if len(result) > cap:
            raise CapExceeded("trace enumeration", cap)
        frontier = nxt
    return sorted(result, key=trace_key)


def is_acyclic(p: Pqts) -> bool:
    """No cycle among the states reachable from the initial state."""
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {s: WHITE for s in p.states}
    stack = [(p.initial, iter(sorted({t for lab in p.enabled(p.initial) for t in p.successors(p.initial, lab)})))]
    colour[p.initial] = GREY
    while stack:
        state, children = stack[-1]
        for child in children:
            c = colour.get(child, WHITE)
            if c == GREY:
                return False
            if c == WHITE:
                colour[child] = GREY
                succ = {t for lab in p.enabled(child) for t in p.successors(child, lab)}
                stack.append((child, iter(sorted(succ))))
                break
        else:
            colour[state] = BLACK
            stack.pop()
    return True


def ctraces(t: Pqts) -> list:
    """Traces of the maximal paths of an acyclic system, sorted."""
    if not is_acyclic(t):
        raise ModelError("complete traces are only computed for acyclic systems")
    found = set()
    stack = [((), t.initial)]
    while stack:
        trace, state = stack.pop()
        labels = t.enabled(state)
        if not labels:
            found.add(trace)
            continue
        for a in labels:
            for s in t.successors(state, a):
                stack.append((trace + (a,), s))
    return sorted(found, key=trace_key)
