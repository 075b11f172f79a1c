from __future__ import annotations

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from lfpsynth.cli import corpus_files, corpus_path  # noqa: E402
from lfpsynth.engine import Budgets, run_ip_synthesis, run_lemma_synthesis  # noqa: E402
from lfpsynth.parser import parse_problem  # noqa: E402
from lfpsynth.smt import SolverNotFound, default_config  # noqa: E402

ACCEPTANCE: dict = {}


def load(name: str):
    with open(corpus_path(name)) as fh:
        return parse_problem(fh.read())


@pytest.fixture(scope="session")
def solver():
    try:
        return default_config(timeout=60)
    except SolverNotFound as e:
        pytest.fail("an SMT solver is required: %s" % e)


@pytest.fixture(scope="session")
def corpus_runs(solver):
    """Every corpus problem under both loops, with default budgets."""
    runs = {}
    for path in corpus_files():
        name = os.path.basename(path)[:-4]
        p = load(name)
        # each failed candidate grows the goal query in the ip loop, so its rounds are capped
        for alg, fn, rounds in (("lemma", run_lemma_synthesis, 200), ("ip", run_ip_synthesis, 12)):
            runs[(name, alg)] = (p, fn(p, 1, Budgets(candidates=20000, rounds=rounds), solver))
    return runs


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, note = ACCEPTANCE[n]
        terminalreporter.write_line("criterion %2d: %s  %s" % (n, "PASS" if ok else "FAIL", note))
