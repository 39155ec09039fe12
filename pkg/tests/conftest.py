import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from snes.rdf import Term, Triple

settings.register_profile("default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parent.parent
HOUSEHOLD = ROOT / "data" / "household"
FIXTURES = Path(__file__).resolve().parent / "fixtures"

EX = "http://example.org/"


def iri(local: str) -> Term:
    return Term.iri(EX + local)


def triple(s: str, p: str, o) -> Triple:
    obj = o if isinstance(o, Term) else iri(o)
    return Triple(iri(s), iri(p), obj)


iris = st.sampled_from([f"r{i}" for i in range(6)]).map(iri)
literals = st.one_of(
    st.text(min_size=0, max_size=12).map(Term.string),
    st.integers(-(2**31), 2**31 - 1).map(Term.integer),
    st.floats(width=32, allow_nan=False, allow_infinity=False).map(Term.float),
)
objects = st.one_of(iris, literals)
triples = st.builds(Triple, iris, st.sampled_from(["p", "q", "r"]).map(iri), objects)


@pytest.fixture
def household():
    return HOUSEHOLD


# -- acceptance summary -------------------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record(n: int, name: str, ok: bool, detail: str) -> None:
    """Remember one verdict line per acceptance criterion; printed after the run."""
    ACCEPTANCE_LINES[n] = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {name} ({detail})"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
