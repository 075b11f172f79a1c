from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import load
from lfpsynth import logic as L
from lfpsynth.induction import make_ip, make_pfp, pfp_matrix
from lfpsynth.logic import App, Forall, Lemma, LogicError, Var
from lfpsynth.models import eval_formula, gen_true_models, lfp_model, random_base_model
from lfpsynth.natproofs import (
    INT_BOTTOM, InstantiationError, LoweringError, SkolemEnv, ground_terms,
    instantiate, lower_problem, lower_recfun, skolemize,
)
from lfpsynth.parser import parse_formula, parse_problem
from lfpsynth.synth import LemmaGrammar, enumerate_candidates

LIST = """
(foreground-sort Loc) (const nil Loc) (const c Loc) (func n (Loc) Loc) (func p (Loc) Loc)
(func key (Loc) Int)
(define-rec (list (x Loc)) (or (= x nil) (list (n x))))
(define-recfun (len (x Loc)) Int (ite (= x nil) 0 (+ (len (n x)) 1)))
(goal (list c))
"""


def test_ground_term_counts():
    p = parse_problem(LIST)
    sig = p.signature
    f = parse_formula("(and (list (n c)) (= (p nil) nil))", sig)
    # seeds: nil, c, (n c), (p nil); only functions occurring in the formulas are applied
    counts = [len(ground_terms([f], sig, k)) for k in range(3)]
    assert counts[0] == 4
    assert counts[1] == 4 + 2 * 2 - 2          # f(const) for two functions and two constants
    assert len(ground_terms([parse_formula("(list c)", sig)], sig, 2)) == 1
    t1 = set(ground_terms([f], sig, 1))
    assert App("n", (App("c", (), "Loc"),), "Loc") in t1
    assert all(L.term_depth(t, "Loc") <= 2 for t in ground_terms([f], sig, 2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2))
def test_ground_terms_grow_monotonically(k):
    p = parse_problem(LIST)
    f = parse_formula("(list (n c))", p.signature)
    small, big = set(ground_terms([f], p.signature, k)), set(ground_terms([f], p.signature, k + 1))
    assert small <= big


def test_ground_terms_negative_depth():
    p = parse_problem(LIST)
    with pytest.raises(InstantiationError):
        ground_terms([p.goal], p.signature, -1)


def test_instantiate_counts():
    p = parse_problem(LIST)
    x, y = Var("x", "Loc"), Var("y", "Loc")
    uni = [Forall((x,), L.Atom("list", (x,))), Forall((x, y), L.Eq(x, y))]
    f = parse_formula("(= (n c) (p nil))", p.signature)
    T = ground_terms([f], p.signature, 1)     # c, nil, (n c), (n nil), (p c), (p nil)
    assert len(T) == 6
    assert len(instantiate(uni, T, "Loc")) == 6 + 36


def test_skolemize_records_tuple():
    p = parse_problem(LIST)
    env = SkolemEnv(p.signature)
    f = parse_formula("(forall ((x Loc) (y Loc)) (=> (list x) (list y)))", p.signature)
    neg, consts = skolemize(f, env, key="k")
    assert len(consts) == 2 and env.tuples["k"] == consts
    assert L.is_quantifier_free(neg) and L.is_ground(neg)
    assert set(env.signature().consts) >= {c.fn for c in consts}
    with pytest.raises(InstantiationError):
        skolemize(L.Not(f), env)


def test_lower_recfun_shape():
    p = parse_problem(LIST)
    dom, axioms = lower_recfun(p.definition("len"))
    assert dom.name == "len_b"
    assert str(dom.body) == "(ite (= x nil) true (len_b (n x)))"
    assert len(axioms) == 3
    assert str(axioms[-1]) == "(forall ((x Loc)) (=> (not (len_b x)) (= (len x) %d)))" % INT_BOTTOM


def test_lower_rejects_calls_in_conditions():
    p = parse_problem("""
        (foreground-sort Loc) (const nil Loc) (func n (Loc) Loc)
        (define-recfun (f (x Loc)) Int (ite (= (f (n x)) 0) 0 1))
        (goal true)""")
    with pytest.raises(LoweringError):
        lower_recfun(p.definition("f"))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["lseg1_length", "lseg_keys_split", "bst_left_tree"]))
def test_lfp_models_satisfy_the_lowered_theory(seed, name):
    low = lower_problem(load(name))
    rng = random.Random(seed)
    m = lfp_model(low, random_base_model(low, rng.randint(1, 4), rng))
    for u in low.universals()[len(low.problem.axioms):]:
        assert eval_formula(m, u) is True, str(u)


# -- pre-fixpoints and induction principles ---------------------------------

def test_pfp_shape_and_errors():
    p = load("slseg_ret")
    u, v = Var("u", "Loc"), Var("v", "Loc")
    lem = Lemma("slseg", (u, v), L.Atom("lseg", (u, v)))
    m = pfp_matrix(lem, p.rel_defs())
    assert str(m) == ("(=> (ite (= u v) true (and (and (lseg (n u) v) (slseg (n u) v))"
                      " (or (= (n u) v) (<= (key u) (key (n u)))))) (lseg u v))")
    with pytest.raises(LogicError):
        make_pfp(Lemma("slseg", (u,), L.TRUE), p.rel_defs())
    with pytest.raises(LogicError):
        make_pfp(Lemma("nosuch", (u,), L.TRUE), p.rel_defs())


def test_ip_structure():
    p = load("slseg_ret")
    u, v = Var("u", "Loc"), Var("v", "Loc")
    env = SkolemEnv(p.signature)
    ip = make_ip(Lemma("lseg", (u, v), L.Atom("slseg", (u, v))), p.rel_defs(), env)
    assert len(ip.consts) == 2 and L.is_ground(ip.neg_pfp)
    assert isinstance(ip.formula, Forall) and ip.formula.vars == (u, v)
    assert str(ip.formula.body).startswith("(or (not ")


def _ip_holds_for_some_witness(m, ip, lemma):
    """The induction principle is valid: some choice of its Skolem constants satisfies it."""
    free = [c.fn for c in ip.consts]
    for tup in itertools.product(m.elements, repeat=len(free)):
        m.consts.update(zip(free, tup))
        if eval_formula(m, ip.formula) is True:
            return True
    return False


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_induction_principles_are_sound(seed):
    p = load("slseg_ret")
    low = lower_problem(p)
    g = LemmaGrammar.from_problem(low)
    lemmas = [c.lemma for c in itertools.islice(enumerate_candidates(g), 0, 400, 7)]
    models = gen_true_models(low, 3, 3, seed=seed)
    for lem in lemmas:
        env = SkolemEnv(low.signature)
        ip = make_ip(lem, low.rel_defs, env)
        for m in models:
            assert _ip_holds_for_some_witness(m, ip, lem), str(lem)
