import os
import shutil

import pytest

from buchi_rank import corpus
from buchi_rank.automata import from_ltl_text
from buchi_rank.parser import load_program
from buchi_rank.product import build_product

HAVE_Z3 = shutil.which("z3") is not None
needs_z3 = pytest.mark.skipif(not HAVE_Z3, reason="z3 executable not on PATH")

FIGURE1 = os.path.join(corpus.CORPUS_DIR, "figure1.prog")

_acceptance = []


def record(criterion, ok, detail=""):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
    _acceptance.append(line)
    print(line)


@pytest.fixture(scope="session")
def figure1():
    return load_program(FIGURE1)


@pytest.fixture(scope="session")
def figure2(figure1):
    """Figure 1 program times the automaton for G F at(l2)."""
    aut = from_ltl_text("G F at(l2)", figure1.variables, figure1.locations)
    return build_product(figure1, aut)


def pytest_terminal_summary(terminalreporter):
    if _acceptance:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance:
            terminalreporter.write_line(line)
