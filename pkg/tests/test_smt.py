from __future__ import annotations

import importlib.util
import os
import re
import sys

import pytest
from hypothesis import given, strategies as st

from conftest import load
from lfpsynth.models import eval_formula
from lfpsynth.natproofs import SkolemEnv, build_instances, lower_problem, skolemize
from lfpsynth.parser import parse_formula, parse_problem
from lfpsynth.smt import (
    SolverConfig, SolverNotFound, build_script, check_sat, extract_finite_model, find_solver,
    mangle, unmangle,
)

CVC5_REPL = os.path.join(os.path.dirname(__file__), "cvc5_repl.py")


def cvc5_config(timeout=60.0):
    if importlib.util.find_spec("cvc5") is None:
        pytest.skip("cvc5 bindings not installed")
    return SolverConfig((sys.executable, CVC5_REPL), timeout, set_encoding="native")


@given(st.text(max_size=12))
def test_mangle_round_trip(name):
    m = mangle(name)
    assert re.fullmatch(r"[A-Za-z0-9_]+", m)
    assert unmangle(m) == name


def test_mangle_is_injective_on_lookalikes():
    names = ["a_b", "a__b", "a-b", "a_2d", "A", "UA"]
    assert len({mangle(n) for n in names}) == len(names)


def test_find_solver_errors():
    with pytest.raises(SolverNotFound):
        find_solver("/nonexistent/solver")


def test_timeout_must_be_positive():
    with pytest.raises(ValueError):
        SolverConfig(("z3",), 0)


SETS = """
(foreground-sort Loc) (const a Loc) (const b Loc) (const s SetInt) (const t SetInt)
(func key (Loc) Int)
(goal true)
"""


def _ground(problem_text, formulas):
    p = parse_problem(problem_text)
    return p.signature, [parse_formula(f, p.signature) for f in formulas]


@pytest.mark.parametrize("which", ["z3", "cvc5"])
def test_sat_unsat_and_sets(solver, which):
    cfg = solver if which == "z3" else cvc5_config()
    sig, fs = _ground(SETS, ["(member (key a) s)", "(not (member (key b) s))", "(= t (union s s))"])
    with check_sat(fs, sig, cfg) as r:
        assert r.is_sat
    sig, fs = _ground(SETS, ["(member (key a) s)", "(= s emptyset)"])
    with check_sat(fs, sig, cfg) as r:
        assert r.is_unsat


def test_encodings_differ_only_in_sets(solver):
    sig, fs = _ground(SETS, ["(member (key a) (union s (singleton 3)))"])
    arr = build_script(fs, sig, solver)
    nat = build_script(fs, sig, SolverConfig(solver.command, set_encoding="native"))
    assert "(Array Int Bool)" in arr and "(Set Int)" in nat
    assert "set.union" in nat and "(_ map or)" in arr


def _countermodel_query(name):
    p = load(name)
    low = lower_problem(p)
    env = SkolemEnv(low.signature)
    neg, _ = skolemize(p.goal, env)
    sig = env.signature(low.signature)
    insts, T = build_instances(low.universals(), [neg], sig, 1)
    return insts, T, sig


@pytest.mark.parametrize("name", ["lseg_keys_split", "lseg1_length", "slseg_ret"])
@pytest.mark.parametrize("which", ["z3", "cvc5"])
def test_extracted_model_satisfies_instances(solver, name, which):
    cfg = solver if which == "z3" else cvc5_config()
    insts, T, sig = _countermodel_query(name)
    with check_sat(insts, sig, cfg) as r:
        assert r.is_sat, "%s should not be provable without lemmas" % name
        m = extract_finite_model(r.handle, T, insts)
    values = [eval_formula(m, f) for f in insts]
    assert False not in values
    assert values.count(True) > len(values) // 2
    assert set(m.core_elements()) <= set(m.elements)


def test_solvers_agree_on_corpus_queries(solver):
    cfg = cvc5_config()
    for name in ("dlist_next_list", "lseg_list_list", "lseg_keys_split"):
        insts, T, sig = _countermodel_query(name)
        with check_sat(insts, sig, solver) as a, check_sat(insts, sig, cfg) as b:
            assert a.status == b.status, name


def test_quantified_assertions_are_rejected(solver):
    sig, fs = _ground(SETS, ["(forall ((x Loc)) (= x a))"])
    with pytest.raises(ValueError):
        check_sat(fs, sig, solver)


def test_dump_dir(tmp_path, solver):
    cfg = SolverConfig(solver.command, 10, dump_dir=str(tmp_path))
    sig, fs = _ground(SETS, ["(= a b)"])
    with check_sat(fs, sig, cfg):
        pass
    dumped = list(tmp_path.iterdir())
    assert len(dumped) == 1 and "(check-sat)" in dumped[0].read_text()
