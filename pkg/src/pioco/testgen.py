"""Test cases: mirrored-signature acyclic pQTSs with pass/fail annotations,
parallel composition, and test execution against simulated or external systems."""

from __future__ import annotations

import queue
import random
import shlex
import subprocess
import threading
from dataclasses import dataclass
from math import lcm

from .behavior import CapExceeded, after, ctraces, has_trace, is_acyclic, reach, trace_key
from .model import (
    DELTA,
    Distribution,
    ModelError,
    Pqts,
    Signature,
    Transition,
    parse_document,
    serialize,
    validate,
)
from .stat import Sample

PASS = "pass"
FAIL = "fail"
DEFAULT_TEST_STATE_CAP = 10**5


class SutError(ModelError):
    """The external system broke the adapter protocol."""


@dataclass(frozen=True)
class AnnotatedTest:
    test: Pqts
    annotation: dict  # complete trace -> "pass" | "fail"

    @property
    def depth(self) -> int:
        return max((len(s) for s in self.annotation), default=0)

    def verdict(self, trace) -> str:
        """Annotation of an executed trace; trailing quiescence padding is ignored."""
        trace = tuple(trace)
        while trace not in self.annotation and trace and trace[-1] == DELTA:
            trace = trace[:-1]
        if trace not in self.annotation:
            raise KeyError(f"{trace} is not a complete trace of the test")
        return self.annotation[trace]


def structure_problems(t: Pqts) -> list[str]:
    """Structural defects of ``t`` as a test case."""
    found = [str(v) for v in validate(t)]
    if found:
        return found
    if not all(tr.dist.is_dirac for tr in t.transitions):
        found.append("test transitions must be Dirac")
    if not is_acyclic(t):
        found.append("test contains a cycle")
    observations = t.inputs | {DELTA}
    for s in t.states:
        labels = [a for i in t.outgoing(s) for a in t.transitions[i].dist.labels]
        if len(labels) != len(set(labels)):
            found.append(f"state {s} is not deterministic")
        en = set(labels)
        stimuli = en & t.outputs
        if en and not (observations <= en and len(stimuli) <= 1 and en <= observations | stimuli):
            found.append(f"state {s} enables {sorted(en)}, which is no test state shape")
    reachable = {t.initial}
    frontier = [t.initial]
    while frontier:
        s = frontier.pop()
        for i in t.outgoing(s):
            for _, u, _ in t.transitions[i].dist:
                if u not in reachable:
                    reachable.add(u)
                    frontier.append(u)
    if reachable != set(t.states):
        found.append("test has unreachable states")
    return found


def compatible(a: Pqts, b: Pqts) -> bool:
    """Output sets meet only in quiescence (which both carry implicitly)."""
    return not (a.outputs & b.outputs)


def compose(a: Pqts, b: Pqts) -> Pqts:
    """Parallel composition, restricted to the reachable product states.

    Shared labels synchronise with multiplied probabilities; a distribution
    touching a shared label needs, for each such label, a partner distribution
    of the other side over that label alone.  Without one it is blocked.
    """
    if not compatible(a, b):
        raise ModelError("systems are not compatible: they share output labels")
    la = a.inputs | a.outputs | {DELTA}
    lb = b.inputs | b.outputs | {DELTA}
    shared = la & lb
    sig = Signature((a.inputs | b.inputs) - (a.outputs | b.outputs), a.outputs | b.outputs)

    def name(s, t):
        return f"{s}|{t}"

    def partners(m: Pqts, state: str, label: str):
        return [m.transitions[i].dist for i in m.outgoing(state)
                if m.transitions[i].dist.labels == {label}]

    def combine(dist, state_self, other, state_other, self_first):
        """All composed distributions driven by ``dist``."""
        needed = sorted(dist.labels & shared)
        choices = []
        for lab in needed:
            ps = partners(other, state_other, lab)
            if not ps:
                return []
            choices.append(ps)
        results = [{}]
        for lab, ps in zip(needed, choices):
            results = [dict(r, **{lab: p}) for r in results for p in ps]
        out = []
        for pick in results:
            entries = []
            for lab, tgt, q in dist:
                if lab in pick:
                    for _, tgt2, q2 in pick[lab]:
                        pair = (tgt, tgt2) if self_first else (tgt2, tgt)
                        entries.append((lab, pair, q * q2))
                else:
                    pair = (tgt, state_other) if self_first else (state_other, tgt)
                    entries.append((lab, pair, q))
            out.append(entries)
        return out

    start = (a.initial, b.initial)
    seen = {start}
    order = [start]
    transitions = []
    i = 0
    while i < len(order):
        s, t = order[i]
        i += 1
        dists = []
        for j in a.outgoing(s):
            dists += combine(a.transitions[j].dist, s, b, t, True)
        for j in b.outgoing(t):
            dists += combine(b.transitions[j].dist, t, a, s, False)
        unique = []
        for entries in dists:
            d = Distribution(tuple((lab, name(*pair), q) for lab, pair, q in entries))
            if d not in unique:
                unique.append(d)
            for _, pair, _ in entries:
                if pair not in seen:
                    seen.add(pair)
                    order.append(pair)
        transitions += [Transition(name(s, t), d) for d in unique]
    states = tuple(name(*p) for p in order)
    return Pqts(states, name(*start), sig, tuple(transitions), f"{a.name}|{b.name}")


def annotate(spec: Pqts, t: Pqts) -> AnnotatedTest:
    """Fail exactly the complete traces that leave the spec through an output or quiescence."""
    if t.signature != spec.signature.mirrored():
        raise ModelError("test signature is not the mirror of the specification's")
    observable = spec.signature.observable
    annotation = {}
    for sigma in ctraces(t):
        verdict = PASS
        states = frozenset({spec.initial})
        for a in sigma:
            nxt = reach(spec, states, (a,))
            if not nxt:
                if a in observable:
                    verdict = FAIL
                break
            states = nxt
        annotation[sigma] = verdict
    return AnnotatedTest(t, annotation)


def generate_test(spec: Pqts, k: int, rng: random.Random, name: str = "test",
                  cap: int = DEFAULT_TEST_STATE_CAP) -> AnnotatedTest:
    """One depth-uniform Dirac test of depth ``k``.

    The root stimulates whenever the spec accepts an input; a state reached by
    a stimulus only observes; elsewhere a seeded coin decides.
    """
    observations = sorted(spec.outputs) + [DELTA]
    states = []
    transitions = []
    stack = [((), "t0", False)]
    counter = 0
    while stack:
        trace, state, after_stimulus = stack.pop()
        states.append(state)
        if len(states) > cap:
            raise CapExceeded("test construction", cap)
        if len(trace) == k:
            continue
        children = []
        inputs = sorted(after(spec, trace) & spec.inputs)
        if inputs and not after_stimulus and (not trace or rng.random() < 0.5):
            children.append((rng.choice(inputs), True))
        children += [(o, False) for o in observations]
        for label, stim in children:
            counter += 1
            child = f"t{counter}"
            transitions.append(Transition(state, Distribution.dirac(label, child)))
            stack.append((trace + (label,), child, stim))
    order = {s: int(s[1:]) for s in states}
    t = Pqts(tuple(sorted(states, key=order.get)), "t0", spec.signature.mirrored(),
             tuple(transitions), name)
    return annotate(spec, t)


def generate_tests(spec: Pqts, k: int, n: int, seed: int) -> list[AnnotatedTest]:
    if not spec.transitions:
        raise ModelError("the specification has no transitions")
    if k < 0 or n < 0:
        raise ValueError("depth and count must be non-negative")
    return [generate_test(spec, k, random.Random(f"{seed}:gentest:{i}"), f"{spec.name}_t{i}")
            for i in range(n)]


def exec_traces(at: AnnotatedTest, impl: Pqts) -> list:
    """Complete test traces the implementation can exhibit."""
    if at.test.signature != impl.signature.mirrored():
        raise ModelError("test signature is not the mirror of the implementation's")
    return sorted((s for s in at.annotation if has_trace(impl, s)), key=trace_key)


# -- execution ------------------------------------------------------------------


def _draw(rng: random.Random, dist: Distribution):
    """Exact sampling of one (label, target) entry."""
    den = lcm(*(q.denominator for _, _, q in dist))
    u = rng.randrange(den)
    acc = 0
    for a, s, q in dist:
        acc += q.numerator * (den // q.denominator)
        if u < acc:
            return a, s
    raise ArithmeticError("distribution mass below 1")


def _test_step(t: Pqts, state: str, label: str) -> str:
    succ = t.successors(state, label)
    if not succ:
        raise ModelError(f"test state {state} has no reaction to {label!r}")
    return min(succ)


def _stimulus(t: Pqts, state: str):
    for i in t.outgoing(state):
        for a, s, _ in t.transitions[i].dist:
            if a in t.outputs:
                return a, s
    return None


class SimulatedTarget:
    """Resolves the model's nondeterminism uniformly at random, per step."""

    def __init__(self, model: Pqts):
        self.model = model

    def start(self, rng: random.Random):
        self.rng = rng
        self.state = self.model.initial

    def stimulate(self, label: str):
        m = self.model
        opts = [m.transitions[i].dist for i in m.outgoing(self.state)
                if label in m.transitions[i].dist.labels]
        if not opts:
            raise ModelError(f"implementation refuses input {label!r} in state {self.state}")
        _, self.state = _draw(self.rng, self.rng.choice(opts))

    def observe(self) -> str:
        m = self.model
        opts = [m.transitions[i].dist for i in m.outgoing(self.state)
                if not m.transitions[i].dist.labels & m.inputs]
        if not opts:
            return DELTA
        label, self.state = _draw(self.rng, self.rng.choice(opts))
        return label

    def close(self):
        pass


class ExternalSut:
    """Line-oriented adapter around a subprocess.

    Stimuli are written as bare label names, ``RESET`` separates runs, and a
    missing reply within the timeout counts as quiescence.
    """

    def __init__(self, command: str, outputs, timeout_ms: int | None):
        if timeout_ms is None:
            raise ValueError("an external system needs a timeout for quiescence")
        self.command = command
        self.outputs = frozenset(outputs)
        self.timeout = timeout_ms / 1000
        self.proc = None
        self.lines: queue.Queue = queue.Queue()

    def _reader(self):
        for line in self.proc.stdout:
            self.lines.put(line.strip())
        self.lines.put(None)

    def start(self, rng: random.Random):
        if self.proc is None:
            self.proc = subprocess.Popen(
                shlex.split(self.command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1,
            )
            threading.Thread(target=self._reader, daemon=True).start()
        else:
            self._send("RESET")
            while True:
                try:
                    if self.lines.get_nowait() is None:
                        raise SutError("system terminated")
                except queue.Empty:
                    break

    def _send(self, token: str):
        try:
            self.proc.stdin.write(token + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SutError(f"cannot write to the system: {exc}") from None

    def stimulate(self, label: str):
        self._send(label)

    def observe(self) -> str:
        try:
            token = self.lines.get(timeout=self.timeout)
        except queue.Empty:
            return DELTA
        if token is None:
            raise SutError("system terminated")
        if token not in self.outputs:
            raise SutError(f"unexpected token {token!r}")
        return token

    def close(self):
        if self.proc is not None:
            self.proc.stdin.close()
            try:
                self.proc.wait(timeout=1)
            except subprocess.TimeoutExpired:
                self.proc.kill()
            self.proc = None


@dataclass(frozen=True)
class Execution:
    sample: Sample
    verdict: str
    failing: tuple  # distinct executed traces annotated fail


def run_once(at: AnnotatedTest, target, rng: random.Random) -> tuple:
    t = at.test
    target.start(rng)
    state = t.initial
    trace = []
    while t.outgoing(state):
        stim = _stimulus(t, state)
        if stim is not None:
            target.stimulate(stim[0])
            trace.append(stim[0])
            state = stim[1]
        else:
            label = target.observe()
            trace.append(label)
            state = _test_step(t, state, label)
    trace += [DELTA] * (at.depth - len(trace))
    return tuple(trace)


def run_test(at: AnnotatedTest, target, m: int, seed: int) -> Execution:
    """Execute ``m`` runs; simulated runs use independent per-run seeds."""
    if m < 1:
        raise ValueError("at least one run is needed")
    if isinstance(target, Pqts):
        if at.test.signature != target.signature.mirrored():
            raise ModelError("test signature is not the mirror of the implementation's")
        target = SimulatedTarget(target)
    traces = []
    try:
        for i in range(m):
            traces.append(run_once(at, target, random.Random(f"{seed}:run:{i}")))
    finally:
        target.close()
    failing = sorted({s for s in traces if at.verdict(s) == FAIL}, key=trace_key)
    verdict = FAIL if failing else PASS
    return Execution(Sample(at.depth, tuple(traces)), verdict, tuple(failing))


# -- files ----------------------------------------------------------------------


def serialize_test(at: AnnotatedTest) -> str:
    lines = [serialize(at.test, header="test").rstrip("\n")]
    for sigma in sorted(at.annotation, key=trace_key):
        body = " ".join(sigma)
        lines.append(f"annot {body} = {at.annotation[sigma]}" if body else f"annot = {at.annotation[sigma]}")
    return "\n".join(lines) + "\n"


def parse_test(text: str) -> AnnotatedTest:
    doc = parse_document(text, headers=("test",))
    t = doc.pqts
    problems = structure_problems(t)
    if problems:
        raise ModelError(problems[0])
    annotation = {}
    for sigma, verdict, line in doc.annotations:
        if sigma in annotation:
            raise ModelError(f"line {line}: trace annotated twice")
        annotation[sigma] = verdict
    complete = set(ctraces(t))
    if set(annotation) != complete:
        missing = sorted(complete - set(annotation), key=trace_key)
        extra = sorted(set(annotation) - complete, key=trace_key)
        raise ModelError(f"annotations must cover exactly the complete traces "
                         f"(missing {missing[:3]}, unexpected {extra[:3]})")
    return AnnotatedTest(t, annotation)


def load_test(path) -> AnnotatedTest:
    with open(path, encoding="utf-8") as fh:
        return parse_test(fh.read())
