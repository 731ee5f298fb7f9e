from __future__ import annotations

from pathlib import Path

import pytest

from vdc.parser import parse_file, parse_program
from vdc.smt import SolverConfig, find_solver

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


def corpus(name: str):
    return parse_file(CORPUS / f"{name}.vdc")


def corpus_files():
    return sorted(CORPUS.glob("*.vdc"))


HAVE_SOLVER = find_solver(SolverConfig()) is not None
needs_solver = pytest.mark.skipif(not HAVE_SOLVER, reason="no SMT solver on PATH")


@pytest.fixture
def parse():
    return parse_program
