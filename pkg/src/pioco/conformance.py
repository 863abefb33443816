"""Bounded-depth conformance checks: ioco, trace-distribution inclusion, pioco."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .behavior import has_trace, out, traces_upto
from .convex import DEFAULT_FACET_CAP, Facet, HRep, Polytope, contains, hrep
from .model import ModelError, Pqts, is_input_enabled, is_qts
from .sched import DEFAULT_ADVERSARY_CAP, vertices

PREFIX_MODES = ("all", "exact")


@dataclass(frozen=True)
class Witness:
    depth: int
    trace: tuple | None = None
    output: str | None = None
    point: dict | None = None  # trace -> Fraction, non-zero entries only
    facet: dict | None = None  # trace -> coefficient
    offset: Fraction | None = None

    def to_json(self) -> dict:
        d: dict = {"depth": self.depth}
        if self.trace is not None:
            d["trace"] = list(self.trace)
        if self.output is not None:
            d["output"] = self.output
        if self.point is not None:
            d["point"] = {" ".join(s): str(q) for s, q in self.point.items()}
        if self.facet is not None:
            d["facet"] = {
                "normal": {" ".join(s): str(q) for s, q in self.facet.items()},
                "offset": str(self.offset),
            }
        return d


@dataclass(frozen=True)
class ConformanceVerdict:
    relation: str
    depth: int
    passed: bool
    witness: Witness | None = None

    def __post_init__(self):
        if self.passed == (self.witness is not None):
            raise ValueError("a failing verdict needs a witness and a passing one none")

    def __bool__(self):
        return self.passed

    def to_json(self) -> dict:
        d = {"relation": self.relation, "depth": self.depth,
             "result": "pass" if self.passed else "fail"}
        if self.witness is not None:
            d["witness"] = self.witness.to_json()
        return d


def _check_signatures(a: Pqts, b: Pqts):
    if a.signature != b.signature:
        raise ModelError("the two systems have different action signatures")


def check_ioco(impl: Pqts, spec: Pqts, K: int) -> ConformanceVerdict:
    """``out(impl, σ) ⊆ out(spec, σ)`` for every spec trace σ with ``|σ| < K``.

    The bound counts the observed output, so ``K`` here inspects the same
    traces as :func:`check_pioco` with the same ``K``.
    """
    _check_signatures(impl, spec)
    for name, m in (("implementation", impl), ("specification", spec)):
        if not is_qts(m):
            raise ModelError(f"ioco needs Dirac transitions; the {name} is probabilistic")
    if not is_input_enabled(impl):
        raise ModelError("the implementation is not input-enabled")
    if K < 0:
        raise ValueError("depth must be non-negative")
    if K == 0:
        return ConformanceVerdict("ioco", K, True)
    for sigma in traces_upto(spec, K - 1):
        if not has_trace(impl, sigma):
            continue
        extra = out(impl, sigma) - out(spec, sigma)
        if extra:
            return ConformanceVerdict("ioco", K, False, Witness(len(sigma) + 1, sigma, min(extra)))
    return ConformanceVerdict("ioco", K, True)


def _coords(vecs, index):
    return sorted({v.coordinates(index) for v in vecs})


def _witness(k, index, result) -> Witness:
    point = {s: q for s, q in zip(index, result.point) if q != 0}
    facet = {s: c for s, c in zip(index, result.facet.normal) if c != 0}
    return Witness(k, point=point, facet=facet, offset=result.facet.offset)


def check_td_inclusion(
    a: Pqts,
    b: Pqts,
    K: int,
    cap_adversaries: int = DEFAULT_ADVERSARY_CAP,
    cap_facets: int = DEFAULT_FACET_CAP,
) -> ConformanceVerdict:
    """``trd(a, k) ⊆ trd(b, k)`` for every ``k <= K``, on the traces of ``a``."""
    _check_signatures(a, b)
    if K < 0:
        raise ValueError("depth must be non-negative")
    for k in range(K + 1):
        index = traces_upto(a, k)
        P = Polytope(tuple(_coords(vertices(a, k, cap=cap_adversaries), index)))
        Q = hrep(_coords(vertices(b, k, cap=cap_adversaries), index), cap_facets)
        res = contains(P, Q)
        if not res:
            return ConformanceVerdict("td", K, False, _witness(k, index, res))
    return ConformanceVerdict("td", K, True)


def _prefix_constraint(impl, spec, k, index, mode, cap_adversaries, cap_facets) -> HRep:
    """Constraints on impl vectors (over ``index``) saying the depth-``k``
    projection is a spec trace distribution."""
    keep = (lambda s: len(s) == k) if mode == "exact" else (lambda s: True)
    sub = sorted({s for s in traces_upto(impl, k) + traces_upto(spec, k) if keep(s)},
                 key=lambda s: (len(s), s))
    H = hrep(_coords(vertices(spec, k, cap=cap_adversaries), sub), cap_facets)
    position = {s: i for i, s in enumerate(index)}

    def lift(f: Facet) -> Facet:
        # impl vectors are zero outside ``index``, so those coefficients drop out
        normal = [Fraction(0)] * len(index)
        for s, c in zip(sub, f.normal):
            if c and s in position:
                normal[position[s]] = c
        return Facet(tuple(normal), f.offset)

    return HRep(len(index), tuple(lift(e) for e in H.equalities),
                tuple(lift(f) for f in H.facets))


def check_pioco(
    impl: Pqts,
    spec: Pqts,
    K: int,
    prefix: str = "all",
    cap_adversaries: int = DEFAULT_ADVERSARY_CAP,
    cap_facets: int = DEFAULT_FACET_CAP,
) -> ConformanceVerdict:
    """Output-continuation inclusion for ``k = 0 .. K-1``.

    ``prefix`` selects which cones the prefix relation pins: every cone up to
    length ``k`` ("all", the default) or only those of length exactly ``k``.
    """
    _check_signatures(impl, spec)
    if prefix not in PREFIX_MODES:
        raise ValueError(f"prefix mode must be one of {PREFIX_MODES}")
    if not is_input_enabled(impl):
        raise ModelError("the implementation is not input-enabled")
    if K < 1:
        raise ValueError("pioco needs a depth bound of at least 1")
    for k in range(K):
        index = traces_upto(impl, k + 1)
        verts = tuple(_coords(vertices(impl, k + 1, output_final_only=True,
                                       cap=cap_adversaries), index))
        extra = _prefix_constraint(impl, spec, k, index, prefix, cap_adversaries, cap_facets)
        if all(extra.contains_point(v) for v in verts):
            extra = None  # implied by the hull, so skip the LPs
        P = Polytope(verts, extra)
        Q = hrep(_coords(vertices(spec, k + 1, output_final_only=True, cap=cap_adversaries),
                         index), cap_facets)
        res = contains(P, Q)
        if not res:
            return ConformanceVerdict("pioco", K, False, _witness(k, index, res))
    return ConformanceVerdict("pioco", K, True)


def check(relation: str, impl: Pqts, spec: Pqts, K: int, **kw) -> ConformanceVerdict:
    if relation == "ioco":
        return check_ioco(impl, spec, K)
    if relation == "td":
        return check_td_inclusion(impl, spec, K, **{k: v for k, v in kw.items() if k != "prefix"})
    if relation == "pioco":
        return check_pioco(impl, spec, K, **kw)
    raise ValueError(f"unknown relation {relation!r}")
