from __future__ import annotations

import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import load
from oracles import is_list, random_heap, walk
from lfpsynth import logic as L
from lfpsynth.logic import Var
from lfpsynth.models import (
    FiniteModel, eval_formula, gen_true_models, k_and, k_not, k_or, lfp_eval, model_json,
)
from lfpsynth.natproofs import lower_problem
from lfpsynth.parser import parse_formula, parse_problem

kleene = st.sampled_from([True, False, None])


@given(kleene, kleene)
def test_kleene_de_morgan(a, b):
    assert k_not(k_and([a, b])) == k_or([k_not(a), k_not(b)])
    assert k_and([a, b]) == k_and([b, a])


@given(st.lists(kleene, max_size=4))
def test_kleene_agrees_with_boolean_logic_on_known_values(vals):
    if None not in vals:
        assert k_and(vals) == all(vals) and k_or(vals) == any(vals)
    # refining an unknown never flips a known result
    for fill in (True, False):
        refined = [fill if v is None else v for v in vals]
        if k_and(vals) is not None:
            assert k_and(refined) == k_and(vals)
        if k_or(vals) is not None:
            assert k_or(refined) == k_or(vals)


SIG_TEXT = """
(foreground-sort Loc) (const nil Loc) (func n (Loc) Loc) (func key (Loc) Int)
(pred p (Loc))
(define-rec (list (x Loc)) (or (= x nil) (list (n x))))
(define-recfun (keys (x Loc)) SetInt
  (ite (= x nil) emptyset (union (singleton (key x)) (keys (n x)))))
(goal true)
"""


def test_partial_model_unknowns():
    p = parse_problem(SIG_TEXT)
    m = FiniteModel("Loc", ("a", "b"), (0, 1), {"nil": "a"}, {"n": {("b",): "a"}}, {"p": {("a",): True}})
    x = Var("x", "Loc")
    f = parse_formula("(forall ((x Loc)) (or (p x) (= (n x) nil)))", p.signature)
    assert eval_formula(m, f) is True
    assert eval_formula(m, parse_formula("(p (n nil))", p.signature)) is None
    # a known disjunct decides the disjunction
    assert eval_formula(m, parse_formula("(or (p (n nil)) (p nil))", p.signature)) is True
    assert eval_formula(m, parse_formula("(ite (p (n nil)) (p nil) (p nil))", p.signature)) is True
    assert eval_formula(m, L.Atom("p", (x,)), {x: "b"}) is None


def test_lfp_excludes_cycles_and_counts_rounds():
    low = lower_problem(parse_problem(SIG_TEXT))
    # a -> b -> nil, c -> d -> c
    m = FiniteModel("Loc", ("nil", "a", "b", "c", "d"), (0, 1, 2), {"nil": "nil"},
                    {"n": {("nil",): "nil", ("a",): "b", ("b",): "nil", ("c",): "d", ("d",): "c"},
                     "key": {(e,): i % 3 for i, e in enumerate(("nil", "a", "b", "c", "d"))}},
                    {"p": {}}, True)
    out, rounds = lfp_eval(m, low.rel_defs, low.fun_defs, with_rounds=True)
    assert {e for (e,), v in out.rels["list"].items() if v} == {"nil", "a", "b"}
    assert rounds == 4          # nil, b, a, then a round with no change
    assert out.funcs["keys"][("a",)] == frozenset({1, 2})
    assert out.funcs["keys"][("c",)] != out.funcs["keys"][("nil",)]
    assert out.rels["keys_b"][("c",)] is False


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 100_000))
def test_keys_match_walk(seed):
    low = lower_problem(parse_problem(SIG_TEXT))
    m = random_heap(random.Random(seed), 5)
    m.rels["p"] = {}
    out = lfp_eval(m, low.rel_defs, low.fun_defs)
    n, nil, size = m.funcs["n"], m.consts["nil"], len(m.elements)
    for e in m.elements:
        if is_list(n, nil, e, size):
            cells = walk(n, e, size)
            cells = cells[:cells.index(nil)]
            assert out.funcs["keys"][(e,)] == frozenset(m.funcs["key"][(c,)] for c in cells)
        assert out.rels["keys_b"][(e,)] == is_list(n, nil, e, size)


@pytest.mark.parametrize("name", ["bst_left_tree", "lseg_concat_list", "loop_trail"])
def test_true_models_satisfy_axioms(name):
    p = load(name)
    models = gen_true_models(p, 20, 4, seed=3)
    assert len(models) == 20
    for m in models:
        assert all(eval_formula(m, a) is True for a in p.axioms)
        assert 1 <= len(m.elements) <= 4


def test_true_models_are_deterministic():
    p = load("lseg_list_list")
    a = [model_json(m) for m in gen_true_models(p, 5, 4, seed=11)]
    b = [model_json(m) for m in gen_true_models(p, 5, 4, seed=11)]
    assert a == b
    json.loads(a[0])


def test_true_models_reject_bad_arguments():
    with pytest.raises(ValueError):
        gen_true_models(load("slseg_ret"), 1, 0)
