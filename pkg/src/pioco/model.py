"""Probabilistic quiescent transition systems (pQTS) with exact probabilities.

Labels are plain names; whether a name is an input or an output is decided by
the signature of the system it belongs to.  This is what makes mirroring a
signature (for test cases) and synchronising two systems on shared names
straightforward.  Quiescence is the reserved output name ``delta``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple

DELTA = "delta"

INPUT = "input"
OUTPUT = "output"
QUIESCENCE = "quiescence"

Trace = tuple  # tuple[str, ...]


class ModelError(Exception):
    """A model is unusable for the requested operation."""


class ParseError(ModelError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class Label(NamedTuple):
    name: str
    kind: str

    def render(self) -> str:
        if self.kind == INPUT:
            return self.name + "?"
        if self.kind == OUTPUT:
            return self.name + "!"
        return DELTA


@dataclass(frozen=True)
class Signature:
    inputs: frozenset = frozenset()
    outputs: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "outputs", frozenset(self.outputs))

    def kind(self, name: str) -> str | None:
        if name == DELTA:
            return QUIESCENCE
        if name in self.inputs:
            return INPUT
        if name in self.outputs:
            return OUTPUT
        return None

    def label(self, name: str) -> Label:
        kind = self.kind(name)
        if kind is None:
            raise ModelError(f"label {name!r} is not in the signature")
        return Label(name, kind)

    @property
    def observable(self) -> frozenset:
        """Outputs together with quiescence."""
        return self.outputs | {DELTA}

    @property
    def labels(self) -> tuple:
        return tuple(sorted(self.inputs | self.outputs | {DELTA}))

    def mirrored(self) -> Signature:
        return Signature(inputs=self.outputs, outputs=self.inputs)

    def render(self, name: str) -> str:
        kind = self.kind(name)
        return Label(name, kind).render() if kind else name


@dataclass(frozen=True)
class Distribution:
    """Finite distribution over (label, target) pairs.

    ``entries`` is kept sorted so that equal distributions compare equal.
    """

    entries: tuple = ()

    def __post_init__(self):
        norm = tuple(sorted((str(a), str(s), Fraction(p)) for a, s, p in self.entries))
        object.__setattr__(self, "entries", norm)

    @classmethod
    def of(cls, support: Mapping | Iterable) -> Distribution:
        """Build from ``{(label, target): p}`` or an iterable of triples."""
        if isinstance(support, Mapping):
            return cls(tuple((a, s, p) for (a, s), p in support.items()))
        return cls(tuple(support))

    @classmethod
    def dirac(cls, label: str, target: str) -> Distribution:
        return cls(((label, target, Fraction(1)),))

    @property
    def mass(self) -> Fraction:
        return sum((p for _, _, p in self.entries), Fraction(0))

    @property
    def labels(self) -> frozenset:
        return frozenset(a for a, _, _ in self.entries)

    @property
    def is_dirac(self) -> bool:
        return len(self.entries) == 1 and self.entries[0][2] == 1

    def prob(self, label: str, target: str) -> Fraction:
        for a, s, p in self.entries:
            if a == label and s == target:
                return p
        return Fraction(0)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class Transition:
    source: str
    dist: Distribution


@dataclass(frozen=True)
class Pqts:
    states: tuple
    initial: str
    signature: Signature
    transitions: tuple = ()
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "transitions", tuple(self.transitions))

    @property
    def inputs(self) -> frozenset:
        return self.signature.inputs

    @property
    def outputs(self) -> frozenset:
        return self.signature.outputs

    @cached_property
    def _by_source(self) -> dict:
        index: dict = {s: [] for s in self.states}
        for i, t in enumerate(self.transitions):
            index.setdefault(t.source, []).append(i)
        return {s: tuple(v) for s, v in index.items()}

    @cached_property
    def _succ(self) -> dict:
        succ: dict = {}
        for t in self.transitions:
            for a, s, p in t.dist:
                if p > 0:
                    succ.setdefault((t.source, a), set()).add(s)
        return {k: frozenset(v) for k, v in succ.items()}

    def outgoing(self, state: str) -> tuple:
        """Indices of the transitions leaving ``state``, in model order."""
        return self._by_source.get(state, ())

    def enabled(self, state: str) -> frozenset:
        return frozenset(
            a for i in self.outgoing(state) for a, _, p in self.transitions[i].dist if p > 0
        )

    def successors(self, state: str, label: str) -> frozenset:
        return self._succ.get((state, label), frozenset())

    def render_trace(self, trace: Iterable[str]) -> str:
        return " ".join(self.signature.render(a) for a in trace) or "ε"


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    transition: int | None = None

    def __str__(self):
        where = f" (transition {self.transition})" if self.transition is not None else ""
        return f"{self.kind}: {self.message}{where}"


def validate(p: Pqts) -> list[Violation]:
    """Every structural defect of ``p``; an empty list means ``p`` is valid."""
    out: list[Violation] = []
    sig = p.signature
    if sig.inputs & sig.outputs:
        names = ", ".join(sorted(sig.inputs & sig.outputs))
        out.append(Violation("signature", f"labels both input and output: {names}"))
    if DELTA in sig.inputs | sig.outputs:
        out.append(Violation("signature", "quiescence must not be declared"))
    if len(set(p.states)) != len(p.states):
        out.append(Violation("duplicate state", "state identifiers repeat"))
    known = set(p.states)
    if p.initial not in known:
        out.append(Violation("unknown state", f"initial state {p.initial!r} is undeclared"))
    for i, t in enumerate(p.transitions):
        if t.source not in known:
            out.append(Violation("unknown state", f"source {t.source!r} is undeclared", i))
        if not t.dist.entries:
            out.append(Violation("empty distribution", "no support", i))
            continue
        for a, s, prob in t.dist:
            if s not in known:
                out.append(Violation("unknown state", f"target {s!r} is undeclared", i))
            if sig.kind(a) is None:
                out.append(Violation("unknown label", f"label {a!r} is not in the signature", i))
            if not 0 < prob <= 1:
                out.append(Violation("probability range", f"{a} -> {s} has probability {prob}", i))
        if t.dist.mass != 1:
            out.append(Violation("mass ≠ 1", f"probabilities sum to {t.dist.mass}", i))
        inputs = t.dist.labels & sig.inputs
        if inputs and len(t.dist.labels) > 1:
            out.append(Violation(
                "input-reactivity",
                "an input shares a distribution with other labels: "
                + ", ".join(sorted(sig.render(a) for a in t.dist.labels)),
                i,
            ))
    return out


def is_input_enabled(p: Pqts) -> bool:
    return all(p.inputs <= p.enabled(s) for s in p.states)


def is_qts(p: Pqts) -> bool:
    return all(t.dist.is_dirac for t in p.transitions)


# -- text format --------------------------------------------------------------

_NAME = r"[^\s,{}:?!#]+"
_HEADER = re.compile(rf"^(pqts|test)\s+({_NAME})\s*$")
_SECTION = re.compile(r"^(inputs|outputs|states)\s*:(.*)$")
_TRANS = re.compile(rf"^trans\s+({_NAME})\s*:\s*\{{(.*)\}}\s*$")
_ENTRY = re.compile(rf"^\s*({_NAME}[?!]?)\s+(\S+)\s*->\s*({_NAME})\s*$")
_ANNOT = re.compile(r"^annot\b(.*)=\s*(pass|fail)\s*$")
_RATIONAL = re.compile(r"^\d+(/\d+)?$")
_STATE = re.compile(rf"^\s*({_NAME})(\s+init)?\s*$")


@dataclass
class Document:
    kind: str
    pqts: Pqts
    annotations: list = field(default_factory=list)  # (trace, verdict, line)


def _split(body: str, offset: int):
    """Comma-separated items with their 1-based column."""
    col = offset
    for item in body.split(","):
        yield item, col + len(item) - len(item.lstrip()) + 1
        col += len(item) + 1


def _parse_rational(token: str, line: int, column: int) -> Fraction:
    if not _RATIONAL.match(token):
        raise ParseError(f"probability {token!r} is not a rational literal", line, column)
    try:
        return Fraction(token)
    except ZeroDivisionError:
        raise ParseError(f"probability {token!r} has a zero denominator", line, column) from None


def parse_document(text: str, headers=("pqts", "test")) -> Document:
    kind = name = None
    inputs: list = []
    outputs: list = []
    states: list = []
    initial = None
    raw_trans: list = []
    annotations: list = []

    def label_decl(body, offset, suffix, lineno, into):
        for item, col in _split(body, offset):
            tok = item.strip()
            if not tok:
                continue
            if not tok.endswith(suffix) or not re.fullmatch(_NAME, tok[:-1]):
                raise ParseError(f"expected a label like 'x{suffix}', got {tok!r}", lineno, col)
            if tok[:-1] == DELTA:
                raise ParseError("quiescence is implicit and must not be declared", lineno, col)
            if tok[:-1] in inputs or tok[:-1] in outputs:
                raise ParseError(f"label {tok[:-1]!r} declared twice", lineno, col)
            into.append(tok[:-1])

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if kind is None:
            m = _HEADER.match(line.strip())
            if not m or m.group(1) not in headers:
                expected = " or ".join(repr(h + " <name>") for h in headers)
                raise ParseError(f"expected header {expected}", lineno, 1)
            kind, name = m.groups()
            continue
        stripped = line.lstrip()
        lead = len(line) - len(stripped)
        if m := _SECTION.match(stripped):
            section, body = m.groups()
            offset = lead + m.start(2)
            if section == "inputs":
                label_decl(body, offset, "?", lineno, inputs)
            elif section == "outputs":
                label_decl(body, offset, "!", lineno, outputs)
            else:
                for item, col in _split(body, offset):
                    if not item.strip():
                        continue
                    sm = _STATE.match(item)
                    if not sm:
                        raise ParseError(f"bad state declaration {item.strip()!r}", lineno, col)
                    if sm.group(1) in states:
                        raise ParseError(f"duplicate state {sm.group(1)!r}", lineno, col)
                    states.append(sm.group(1))
                    if sm.group(2):
                        if initial is not None:
                            raise ParseError("more than one initial state", lineno, col)
                        initial = sm.group(1)
        elif m := _TRANS.match(stripped):
            raw_trans.append((m.group(1), m.group(2), lineno, lead + m.start(2)))
        elif m := _ANNOT.match(stripped):
            if kind != "test":
                raise ParseError("annotations are only allowed in test files", lineno, lead + 1)
            annotations.append((tuple(m.group(1).split()), m.group(2), lineno))
        else:
            raise ParseError(f"unrecognised line {stripped!r}", lineno, lead + 1)

    if kind is None:
        raise ParseError("empty document")
    if not states:
        raise ParseError("no states declared")
    if initial is None:
        raise ParseError("no initial state (mark one state with 'init')")
    sig = Signature(inputs, outputs)

    transitions = []
    for source, body, lineno, offset in raw_trans:
        entries = []
        seen = set()
        for item, col in _split(body, offset):
            if not item.strip():
                raise ParseError("empty support entry", lineno, col)
            em = _ENTRY.match(item)
            if not em:
                raise ParseError(f"expected '<label> <p> -> <state>', got {item.strip()!r}", lineno, col)
            tok, prob_tok, target = em.groups()
            name_ = tok.rstrip("?!")
            kind_ = sig.kind(name_)
            if kind_ is None:
                raise ParseError(f"unknown label {tok!r}", lineno, col)
            if Label(name_, kind_).render() != tok:
                raise ParseError(f"label {tok!r} is declared as {sig.render(name_)}", lineno, col)
            prob = _parse_rational(prob_tok, lineno, col + em.start(2))
            if (name_, target) in seen:
                raise ParseError(f"duplicate support entry {tok} -> {target}", lineno, col)
            seen.add((name_, target))
            entries.append((name_, target, prob))
        transitions.append(Transition(source, Distribution(tuple(entries))))
    return Document(kind, Pqts(tuple(states), initial, sig, tuple(transitions), name), annotations)


def parse_pqts(text: str, check: bool = True) -> Pqts:
    """Parse the line-oriented pQTS format.

    With ``check`` the result is validated and the first violation is raised
    as a :class:`ModelError`.
    """
    p = parse_document(text, headers=("pqts",)).pqts
    if check:
        problems = validate(p)
        if problems:
            raise ModelError(str(problems[0]))
    return p


def serialize(p: Pqts, header: str = "pqts") -> str:
    sig = p.signature
    lines = [
        f"{header} {p.name}",
        "inputs: " + ", ".join(a + "?" for a in sorted(sig.inputs)),
        "outputs: " + ", ".join(a + "!" for a in sorted(sig.outputs)),
        "states: " + ", ".join(s + (" init" if s == p.initial else "") for s in p.states),
    ]
    for t in p.transitions:
        body = ", ".join(f"{sig.render(a)} {prob} -> {s}" for a, s, prob in t.dist)
        lines.append(f"trans {t.source}: {{ {body} }}")
    return "\n".join(line.rstrip() for line in lines) + "\n"


def load(path) -> Pqts:
    with open(path, encoding="utf-8") as fh:
        return parse_pqts(fh.read())
