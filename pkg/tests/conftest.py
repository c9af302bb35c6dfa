import pathlib

import pytest

from nlpflow.io import load_problem

ROOT = pathlib.Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "problems"


@pytest.fixture(scope="session")
def p41():
    """Full and reduced forms of the 3-variable linearly constrained problem."""
    return load_problem(PROBLEMS / "p41.nlp")


@pytest.fixture(scope="session")
def p42():
    """Full and reduced forms of the Rosen-Suzuki problem."""
    return load_problem(PROBLEMS / "p42.nlp")
