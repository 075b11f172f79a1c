"""Quantifier instantiation over ground terms of bounded depth.

This is the first-order half of the prover: recursive definitions are
abstracted to fixpoint equations, recursive functions are lowered to
guarded axioms, negated universals are Skolemized, and every universal
formula is instantiated with the ground terms ``T_k``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from . import logic as L
from .logic import (
    App, Atom, Eq, Forall, Iff, Implies, IntLit, Ite, LogicError, Not, Op, Problem, RecDef,
    Signature, TermIte,
)

log = logging.getLogger(__name__)

UNDEF_SET = "undef_set"
INT_BOTTOM = -1


class LoweringError(LogicError):
    pass


class InstantiationError(LogicError):
    pass


class SkolemEnv:
    """Source of fresh constants; remembers which formula each tuple came from."""

    def __init__(self, sig: Signature, prefix: str = "sk"):
        self.base = sig
        self.prefix = prefix
        self.counter = 0
        self.tuples: dict = {}    # key -> tuple of App
        self.sorts: dict = {}     # name -> sort

    def fresh(self, sort: str) -> App:
        while True:
            name = "%s%d" % (self.prefix, self.counter)
            self.counter += 1
            if name not in self.base.names() and name not in self.sorts:
                break
        self.sorts[name] = sort
        return App(name, (), sort)

    def record(self, key, consts: tuple) -> None:
        self.tuples[key] = consts

    def signature(self, sig: Signature | None = None) -> Signature:
        return (sig or self.base).extend(consts=dict(self.sorts))

    def copy(self) -> "SkolemEnv":
        out = SkolemEnv(self.base, self.prefix)
        out.counter = self.counter
        out.tuples = dict(self.tuples)
        out.sorts = dict(self.sorts)
        return out


def skolemize(f, env: SkolemEnv, key=None) -> tuple:
    """Matrix of ``not f`` with the universal variables of ``f`` replaced by fresh constants."""
    if not isinstance(f, Forall):
        if not L.is_quantifier_free(f):
            raise InstantiationError("expected a universal formula: %s" % f)
        return L.neg(f), ()
    if not L.is_quantifier_free(f.body):
        raise InstantiationError("nested quantifier in %s" % f)
    consts = tuple(env.fresh(v.sort) for v in f.vars)
    env.record(key if key is not None else f, consts)
    return L.neg(L.subst_vars(f.body, dict(zip(f.vars, consts)))), consts


# ---------------------------------------------------------------------------
# Abstraction and lowering
# ---------------------------------------------------------------------------


def fo_abstraction(d: RecDef):
    if d.is_function:
        raise LogicError("%s is a function; lower it first" % d.name)
    iff = Iff(d.head(), d.body)
    return Forall(d.params, iff) if d.params else iff


def dom_name(fn: str) -> str:
    return fn + "_b"


def _paths(t, conds=()):
    if isinstance(t, TermIte):
        yield from _paths(t.then, conds + (t.cond,))
        yield from _paths(t.els, conds + (L.neg(t.cond),))
    else:
        yield conds, t


def _calls(t, rec: set) -> list:
    return [n for n in L.walk(t) if isinstance(n, App) and n.fn in rec]


def _check_call_contexts(t, rec: set, name: str) -> None:
    def visit(node, allowed: bool):
        if isinstance(node, App) and node.fn in rec:
            if not allowed:
                raise LoweringError("call to %s in %s occurs under an unsupported context" % (node.fn, name))
            for a in node.args:
                visit(a, False)
            return
        ok = isinstance(node, Op)
        for k in L.children(node):
            visit(k, ok)

    visit(t, True)


def lower_recfun(d: RecDef, rec_funcs=None) -> tuple:
    """Domain predicate and guarded value axioms for a recursive function.

    Returns ``(dom_def or None, axioms)``.  ``dom_def`` is None when the
    domain is everything (no recursive calls), in which case the axioms
    carry no guard and there is no bottom axiom.
    """
    if not d.is_function:
        raise LoweringError("%s is not a function definition" % d.name)
    rec = set(rec_funcs) if rec_funcs is not None else {d.name}
    rec.add(d.name)
    if d.result_sort == L.INT:
        bottom = IntLit(INT_BOTTOM)
    elif d.result_sort == L.SETINT:
        bottom = App(UNDEF_SET, (), L.SETINT)
    else:
        raise LoweringError("recursive function %s must return Int or SetInt" % d.name)

    def dom_of(t):
        if isinstance(t, TermIte):
            if _calls(t.cond, rec):
                raise LoweringError("recursive call inside a condition of %s" % d.name)
            a, b = dom_of(t.then), dom_of(t.els)
            if a == b:
                return a
            return Ite(t.cond, a, b)
        _check_call_contexts(t, rec, d.name)
        return L.conj(*(Atom(dom_name(c.fn), c.args) for c in _calls(t, rec)))

    dom_body = dom_of(d.body)
    head = d.head()
    axioms = []
    if dom_body == L.TRUE:
        for conds, res in _paths(d.body):
            ax = Eq(head, res) if not conds else Implies(L.conj(*conds), Eq(head, res))
            axioms.append(Forall(d.params, ax) if d.params else ax)
        return None, tuple(axioms)
    dom = RecDef(dom_name(d.name), d.params, dom_body)
    dom_atom = dom.head()
    for conds, res in _paths(d.body):
        axioms.append(Forall(d.params, Implies(L.conj(dom_atom, *conds), Eq(head, res))))
    axioms.append(Forall(d.params, Implies(Not(dom_atom), Eq(head, bottom))))
    return dom, tuple(axioms)


@dataclass(frozen=True)
class Lowered:
    """A problem with recursive functions replaced by domain predicates and axioms."""

    problem: Problem
    signature: Signature
    rel_defs: tuple
    fun_defs: tuple
    fun_axioms: tuple
    dom_of: dict = field(default_factory=dict)

    def definition(self, name: str) -> RecDef | None:
        for d in self.rel_defs:
            if d.name == name:
                return d
        return None

    def universals(self) -> list:
        """Axioms, fixpoint abstractions and function axioms."""
        return list(self.problem.axioms) + [fo_abstraction(d) for d in self.rel_defs] + list(self.fun_axioms)


def lower_problem(p: Problem) -> Lowered:
    rec_funcs = {d.name for d in p.fun_defs()}
    rel_defs = list(p.rel_defs())
    axioms = []
    dom_of = {}
    new_rels, new_consts = {}, {}
    for d in p.fun_defs():
        dom, ax = lower_recfun(d, rec_funcs)
        axioms.extend(ax)
        if dom is not None:
            if dom.name in p.signature.names():
                raise LoweringError("name %s is already taken" % dom.name)
            rel_defs.append(dom)
            new_rels[dom.name] = tuple(v.sort for v in dom.params)
            dom_of[d.name] = dom.name
        if d.result_sort == L.SETINT:
            new_consts[UNDEF_SET] = L.SETINT
    # a function whose body calls a function with trivial domain refers to a
    # predicate that was never defined; such calls are always in-domain
    missing = {dom_name(f) for f in rec_funcs} - set(new_rels)
    if missing:
        rel_defs = [RecDef(r.name, r.params, _drop_atoms(r.body, missing)) for r in rel_defs]
    sig = p.signature.extend(consts=new_consts, rels=new_rels)
    return Lowered(p, sig, tuple(rel_defs), p.fun_defs(), tuple(axioms), dom_of)


def _drop_atoms(f, names: set):
    return L.transform(f, lambda n: L.TRUE if isinstance(n, Atom) and n.rel in names else None)


# ---------------------------------------------------------------------------
# Ground terms and instantiation
# ---------------------------------------------------------------------------


def term_key(t, fg: str) -> tuple:
    return (L.term_depth(t, fg), str(t))


@dataclass(frozen=True)
class GroundTermSet:
    k: int
    terms: tuple                  # foreground terms, ordered by (depth, printed form)
    ints: tuple = ()              # Int terms used for Int-sorted binders

    def __iter__(self):
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, t) -> bool:
        return t in self.terms

    def domain(self, sort: str, fg: str) -> tuple:
        if sort == fg:
            return self.terms
        if sort == L.INT:
            return self.ints
        raise InstantiationError("cannot instantiate a variable of sort %s" % sort)


def _fg_function_table(formulas, sig: Signature) -> list:
    used = set()
    for f in formulas:
        used |= L.functions_in(f)
    return [f for f in sig.fg_functions() if f in used]


def ground_terms(formulas, sig: Signature, k: int, ints=()) -> GroundTermSet:
    """``T_k``: foreground constants and ground foreground subterms of
    ``formulas`` closed under foreground functions up to depth ``k``."""
    if k < 0:
        raise InstantiationError("depth must be non-negative")
    fg = sig.fg_sort
    formulas = list(formulas)
    seeds = set()
    for f in formulas:
        seeds |= L.ground_subterms(f, fg)
    if not seeds:
        log.warning("no foreground constants: T_%d is empty", k)
        return GroundTermSet(k, (), tuple(ints))
    funcs = _fg_function_table(formulas, sig)
    terms = set(seeds)
    for depth in range(1, k + 1):
        new = set()
        pool = sorted(terms, key=lambda t: term_key(t, fg))
        for fn in funcs:
            args, _ = sig.funcs[fn]
            for tup in itertools.product(pool, repeat=len(args)):
                t = App(fn, tup, fg)
                if t not in terms and L.term_depth(t, fg) <= depth:
                    new.add(t)
        if not new:
            break
        terms |= new
    return GroundTermSet(k, tuple(sorted(terms, key=lambda t: term_key(t, fg))), tuple(ints))


def instantiate(universals, T: GroundTermSet, fg: str) -> list:
    """``Phi[T]``: every universal formula instantiated with tuples from ``T``."""
    out = []
    seen = set()
    for f in universals:
        if not isinstance(f, Forall):
            if not L.is_quantifier_free(f):
                raise InstantiationError("not a universal formula: %s" % f)
            inst = [f]
        else:
            if not L.is_quantifier_free(f.body):
                raise InstantiationError("not a universal formula: %s" % f)
            doms = [T.domain(v.sort, fg) for v in f.vars]
            inst = (L.subst_vars(f.body, dict(zip(f.vars, tup))) for tup in itertools.product(*doms))
        for g in inst:
            if g not in seen:
                seen.add(g)
                out.append(g)
    return out


def int_args(formulas, sig: Signature) -> set:
    """Ground Int terms at Int positions of relation atoms."""
    out = set()
    for f in formulas:
        for n in L.walk(f):
            if isinstance(n, Atom) and n.rel in sig.rels:
                for s, a in zip(sig.rels[n.rel], n.args):
                    if s == L.INT and L.is_ground(a):
                        out.add(a)
    return out


def needs_ints(universals) -> bool:
    return any(isinstance(f, Forall) and any(v.sort == L.INT for v in f.vars) for f in universals)


def build_instances(universals, ground, sig: Signature, k: int) -> tuple:
    """Instantiate ``universals`` alongside quantifier-free ``ground`` formulas.

    Returns ``(quantifier-free formulas, GroundTermSet)``.  Int-sorted
    binders range over Int arguments of relation atoms; that set is grown
    for ``k`` rounds from the instances themselves.
    """
    universals, ground = list(universals), list(ground)
    T = ground_terms(universals + ground, sig, k)
    if not needs_ints(universals):
        return ground + instantiate(universals, T, sig.fg_sort), T
    ints = int_args(ground, sig) | {App(c, (), L.INT) for c, s in sig.consts.items()
                                   if s == L.INT and any(App(c, (), L.INT) in L.walk(g) for g in ground)}
    insts = []
    for _ in range(max(k, 0) + 1):
        T = GroundTermSet(T.k, T.terms, tuple(sorted(ints, key=str)))
        insts = instantiate(universals, T, sig.fg_sort)
        grown = ints | int_args(insts, sig)
        if grown == ints:
            break
        ints = grown
    return ground + insts, T
