from pathlib import Path

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from declarealign.model import Constraint, Model, Trace, parse_model

DATA = Path(__file__).resolve().parent.parent / "data"
GOLDEN = Path(__file__).resolve().parent / "golden"

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

LETTERS = ["A", "B", "C", "D"]
sequences = st.lists(st.sampled_from(LETTERS), max_size=8).map(tuple)


def running_model() -> Model:
    return Model((Constraint.of("Response", "A", ["B", "C"]), Constraint.of("Precedence", "C", "B")))


def hospital_model() -> Model:
    return parse_model((DATA / "hospital.decl").read_text())


@pytest.fixture
def running():
    return Trace(("A", "A"), "r1"), running_model()


@pytest.fixture
def hospital():
    return Trace(("ANC", "L", "IVA", "RB"), "t1"), hospital_model()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
