import sys
from pathlib import Path

import pytest

from pioco.model import load, parse_pqts

MODELS = Path(__file__).resolve().parent.parent / "models"
sys.path.insert(0, str(Path(__file__).resolve().parent))


def model(name):
    return load(MODELS / f"{name}.pqts")


def mixed(p):
    """Left system of the two-output example: one distribution a! p, b! 1-p."""
    from fractions import Fraction

    p = Fraction(p)
    entries = [f"{lab} {q} -> {s}" for lab, q, s in (("a!", p, "s1"), ("b!", 1 - p, "s2")) if q]
    return parse_pqts(
        "pqts A\ninputs:\noutputs: a!, b!\nstates: s0 init, s1, s2\n"
        f"trans s0: {{ {', '.join(entries)} }}\n"
    )


PLAYER_TEST = """\
test player_test
inputs: Song1?, Song2?, StartSong1?, done?
outputs: shuffle!
states: r init, a, b, c, d, e, f, g
trans r: { shuffle! 1 -> a }
trans r: { Song1? 1 -> b }
trans r: { Song2? 1 -> c }
trans r: { delta 1 -> d }
trans a: { Song1? 1 -> e }
trans a: { Song2? 1 -> f }
trans a: { delta 1 -> g }
"""


@pytest.fixture
def choice():
    return model("choice")


@pytest.fixture
def split():
    return model("split")


@pytest.fixture
def music():
    return model("music_spec")


@pytest.fixture
def coin():
    return model("coin")


@pytest.fixture
def player_test():
    from pioco.model import parse_document

    return parse_document(PLAYER_TEST, headers=("test",)).pqts


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
