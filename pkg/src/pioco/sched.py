"""Adversaries on the depth-k unfolding and the trace distributions they induce.

A trace distribution at depth ``k`` is represented by its finite cone algebra:
the probability of every trace of length at most ``k`` being observed as a
prefix.  Deterministic adversaries are enumerated per unfolding node; since
the unfolding is a tree, a randomised adversary is a mixture of deterministic
ones and its vector lies in the convex hull of theirs.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Mapping

from .behavior import CapExceeded, Path, trace_key
from .model import ModelError, Pqts

HALT = None

DEFAULT_NODE_CAP = 10**5
DEFAULT_ADVERSARY_CAP = 10**5


def _choice_key(c):
    return (1, 0) if c is HALT else (0, c)


@dataclass(frozen=True)
class TraceDistVector:
    """Exact cone probabilities ``P(C_σ)`` for every trace up to ``depth``.

    Only non-zero entries are stored.
    """

    depth: int
    items: tuple

    @classmethod
    def of(cls, depth: int, probs: Mapping) -> TraceDistVector:
        entries = [(tuple(s), Fraction(q)) for s, q in probs.items() if q != 0]
        return cls(depth, tuple(sorted(entries, key=lambda e: trace_key(e[0]))))

    def __getitem__(self, trace) -> Fraction:
        return self.as_dict().get(tuple(trace), Fraction(0))

    def as_dict(self) -> dict:
        return dict(self.items)

    @property
    def traces(self) -> tuple:
        return tuple(s for s, _ in self.items)

    def coordinates(self, index) -> tuple:
        d = self.as_dict()
        return tuple(d.get(s, Fraction(0)) for s in index)

    def problems(self) -> list[str]:
        d = self.as_dict()
        found = []
        if d.get((), 0) != 1:
            found.append("P(ε) must be 1")
        children = defaultdict(Fraction)
        for s, q in d.items():
            if not 0 <= q <= 1:
                found.append(f"P({s}) = {q} outside [0, 1]")
            if len(s) > self.depth:
                found.append(f"trace {s} longer than depth {self.depth}")
            if s:
                children[s[:-1]] += q
        for s, total in children.items():
            if total > d.get(s, 0):
                found.append(f"extensions of {s} carry {total} > {d.get(s, 0)}")
        return found

    def halted(self) -> dict:
        """Mass that stops exactly at each trace: P(σ) minus its one-step extensions."""
        d = self.as_dict()
        rest = dict(d)
        for s, q in d.items():
            if s:
                rest[s[:-1]] -= q
        return {s: q for s, q in rest.items() if q != 0}


@dataclass
class UnfoldTree:
    model: Pqts
    depth: int
    nodes: dict  # Path -> tuple of transition indices available there

    def options(self, path: Path) -> tuple:
        return self.nodes[path]

    def children(self, path: Path) -> list:
        if len(path) >= self.depth:
            return []
        out = []
        for i in self.nodes[path]:
            for a, s, _ in self.model.transitions[i].dist:
                out.append(path.extend(i, a, s))
        return out

    @property
    def root(self) -> Path:
        return Path(self.model.initial)

    def __len__(self):
        return len(self.nodes)


def unfold(p: Pqts, k: int, cap: int = DEFAULT_NODE_CAP) -> UnfoldTree:
    if k < 0:
        raise ValueError("depth must be non-negative")
    tree = UnfoldTree(p, k, {})
    stack = [Path(p.initial)]
    while stack:
        path = stack.pop()
        tree.nodes[path] = p.outgoing(path.last)
        if len(tree.nodes) > cap:
            raise CapExceeded("unfolding", cap)
        stack.extend(reversed(tree.children(path)))
    return tree


class Adversary:
    """A partial, randomised, history-dependent scheduler halting after ``depth`` steps.

    ``choices`` maps a path to weights over transition indices and ``HALT``.
    Paths missing from the map halt.
    """

    def __init__(self, model: Pqts, depth: int, choices: Mapping | None = None):
        self.model = model
        self.depth = depth
        self.choices = {
            path: {c: Fraction(w) for c, w in ws.items() if w != 0}
            for path, ws in (choices or {}).items()
        }

    @classmethod
    def from_policy(cls, p: Pqts, k: int, policy: Callable) -> Adversary:
        """Build from ``policy(path, options) -> {choice: weight}`` over the unfolding."""
        tree = unfold(p, k)
        choices = {}
        for path in tree.nodes:
            if len(path) < k:
                choices[path] = policy(path, tree.options(path))
        return cls(p, k, choices)

    def weights(self, path: Path) -> dict:
        if len(path) >= self.depth:
            return {HALT: Fraction(1)}
        return self.choices.get(path, {HALT: Fraction(1)})

    @property
    def is_deterministic(self) -> bool:
        return all(len(ws) == 1 for ws in self.choices.values())

    def problems(self) -> list[str]:
        found = []
        for path, ws in self.choices.items():
            total = sum(ws.values(), Fraction(0))
            if total != 1:
                found.append(f"weights at {path.trace} sum to {total}")
            if any(w < 0 for w in ws.values()):
                found.append(f"negative weight at {path.trace}")
            allowed = set(self.model.outgoing(path.last))
            for c, w in ws.items():
                if c is not HALT and c not in allowed and w > 0:
                    found.append(f"transition {c} is not available after {path.trace}")
            if len(path) >= self.depth and ws.get(HALT, 0) != 1:
                found.append(f"node {path.trace} at depth {len(path)} must halt")
        return found


def path_prob(E: Adversary, path: Path) -> Fraction:
    if path.start != E.model.initial:
        raise ModelError("path does not start in the initial state")
    if len(path) > E.depth or not path.is_valid(E.model):
        raise ModelError("path is not a node of the adversary's unfolding")
    q = Fraction(1)
    prefix = Path(path.start)
    for i, a, s in path.steps:
        q *= E.weights(prefix).get(i, 0) * E.model.transitions[i].dist.prob(a, s)
        if q == 0:
            return q
        prefix = prefix.extend(i, a, s)
    return q


def trace_vector(p: Pqts, E: Adversary, k: int | None = None) -> TraceDistVector:
    """Cone probability of every trace, summed over the paths carrying it."""
    if E.model is not p and E.model != p:
        raise ModelError("adversary belongs to a different model")
    k = E.depth if k is None else k
    probs: dict = defaultdict(Fraction)
    stack = [(Path(p.initial), Fraction(1))]
    while stack:
        path, q = stack.pop()
        probs[path.trace] += q
        if len(path) >= k:
            continue
        for c, w in E.weights(path).items():
            if c is HALT:
                continue
            for a, s, mu in p.transitions[c].dist:
                stack.append((path.extend(c, a, s), q * w * mu))
    return TraceDistVector.of(k, probs)


def vertices(
    p: Pqts,
    k: int,
    output_final_only: bool = False,
    allow_halt: bool = True,
    cap: int = DEFAULT_ADVERSARY_CAP,
) -> list[TraceDistVector]:
    """Trace vectors of every deterministic adversary halting after ``k`` steps.

    With ``output_final_only`` the last scheduled step may not take an
    input-labelled distribution.  With ``allow_halt=False`` an adversary halts
    only where nothing may be scheduled (used for sample expectations).
    """
    if k < 0:
        raise ValueError("depth must be non-negative")
    memo: dict = {}
    inputs = p.inputs

    def sub(state: str, remaining: int) -> frozenset:
        key = (state, remaining)
        if key in memo:
            return memo[key]
        stop = (((), Fraction(1)),)
        result = set()
        options = []
        if remaining > 0:
            for i in p.outgoing(state):
                dist = p.transitions[i].dist
                if output_final_only and remaining == 1 and dist.labels & inputs:
                    continue
                options.append(dist)
        if allow_halt or not options:
            result.add(stop)
        for dist in options:
            child_sets = [sorted(sub(s, remaining - 1)) for _, s, _ in dist]
            count = 1
            for cs in child_sets:
                count *= len(cs)
            if count > cap:
                raise CapExceeded("adversary enumeration", cap)
            for combo in product(*child_sets):
                vec: dict = defaultdict(Fraction)
                vec[()] = Fraction(1)
                for (a, _, mu), child in zip(dist, combo):
                    for suffix, q in child:
                        vec[(a,) + suffix] += mu * q
                result.add(tuple(sorted(vec.items())))
            if len(result) > cap:
                raise CapExceeded("adversary enumeration", cap)
        memo[key] = frozenset(result)
        return memo[key]

    vecs = [TraceDistVector.of(k, dict(v)) for v in sub(p.initial, k)]
    return sorted(set(vecs), key=lambda v: [(trace_key(s), q) for s, q in v.items])


# -- text form ------------------------------------------------------------------

_NODE = re.compile(r"^node((?:\s+[^\s#:]+)*)\s+#(\d+)\s*:(.*)$")


def _node_names(tree: UnfoldTree) -> dict:
    """Path -> (trace, index among paths sharing that trace)."""
    by_trace = defaultdict(list)
    for path in tree.nodes:
        by_trace[path.trace].append(path)
    names = {}
    for trace, paths in by_trace.items():
        for idx, path in enumerate(sorted(paths, key=lambda q: q.steps)):
            names[path] = (trace, idx)
    return names


def format_adversary(E: Adversary) -> str:
    tree = unfold(E.model, E.depth)
    names = _node_names(tree)
    lines = [f"adversary {E.depth}"]
    for path in sorted(tree.nodes, key=lambda q: (trace_key(names[q][0]), names[q][1])):
        if len(path) >= E.depth:
            continue
        options = tree.options(path)
        ws = E.weights(path)
        parts = [f"mu{j} {ws.get(i, Fraction(0))}" for j, i in enumerate(options)]
        parts.append(f"halt {ws.get(HALT, Fraction(0))}")
        trace, idx = names[path]
        head = " ".join(("node",) + trace)
        lines.append(f"{head} #{idx}: " + ", ".join(parts))
    return "\n".join(lines) + "\n"


def parse_adversary(p: Pqts, text: str) -> Adversary:
    lines = [ln.split("#", 1)[0] if not ln.lstrip().startswith("node") else ln
             for ln in text.splitlines()]
    lines = [ln.strip() for ln in lines if ln.strip()]
    if not lines or not re.fullmatch(r"adversary\s+\d+", lines[0]):
        raise ModelError("expected header 'adversary <depth>'")
    depth = int(lines[0].split()[1])
    tree = unfold(p, depth)
    lookup = {v: k for k, v in _node_names(tree).items()}
    choices = {}
    for ln in lines[1:]:
        m = _NODE.match(ln)
        if not m:
            raise ModelError(f"bad adversary line {ln!r}")
        key = (tuple(m.group(1).split()), int(m.group(2)))
        if key not in lookup:
            raise ModelError(f"no unfolding node {key}")
        path = lookup[key]
        options = tree.options(path)
        ws = {}
        for part in m.group(3).split(","):
            name, w = part.split()
            if name == "halt":
                ws[HALT] = Fraction(w)
            else:
                j = int(name[2:])
                if not name.startswith("mu") or j >= len(options):
                    raise ModelError(f"unknown option {name!r} at node {key}")
                ws[options[j]] = Fraction(w)
        choices[path] = ws
    return Adversary(p, depth, choices)
