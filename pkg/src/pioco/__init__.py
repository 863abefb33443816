"""Probabilistic model-based testing with pQTS models.

Exact rational arithmetic throughout: models, trace distributions, the LP and
polytope kernel, and the statistical radius computation.
"""

from .behavior import CapExceeded, after, ctraces, out, reach, traces_upto
from .conformance import ConformanceVerdict, check_ioco, check_pioco, check_td_inclusion
from .model import DELTA, ModelError, ParseError, Pqts, Signature, load, parse_pqts, serialize, validate
from .sched import Adversary, TraceDistVector, path_prob, trace_vector, unfold, vertices

__all__ = [
    "DELTA",
    "Adversary",
    "CapExceeded",
    "ConformanceVerdict",
    "ModelError",
    "ParseError",
    "Pqts",
    "Signature",
    "TraceDistVector",
    "after",
    "check_ioco",
    "check_pioco",
    "check_td_inclusion",
    "ctraces",
    "load",
    "out",
    "parse_pqts",
    "path_prob",
    "reach",
    "serialize",
    "trace_vector",
    "traces_upto",
    "unfold",
    "validate",
    "vertices",
]
