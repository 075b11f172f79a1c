"""Finite models: three-valued evaluation, least-fixpoint evaluation,
random true models and the universal model that packs several models
into one.

Truth values are ``True``, ``False`` and ``None`` (unknown).  Unknown only
arises from points where a partial model's interpretation is undefined.
"""

from __future__ import annotations

import functools
import itertools
import json
import logging
import random
from dataclasses import dataclass, field

from . import logic as L
from .logic import (
    And, App, Atom, BgAtom, BoolConst, Eq, Forall, Iff, Implies, IntLit, Ite, LogicError, Not,
    Op, Or, TermIte, Var,
)
from .natproofs import INT_BOTTOM, UNDEF_SET, Lowered, lower_problem

log = logging.getLogger(__name__)

UNKNOWN = None
# Value of a set-valued recursive function outside its domain.  The marker
# member keeps it distinct from every set of integers.
UNDEF_SET_VALUE = frozenset({"undefined"})
DEFAULT_INT_RANGE = (-2, 8)


@dataclass(frozen=True)
class SetRef:
    """An opaque set value from a solver model; equal refs denote equal sets."""

    id: str

    def __str__(self) -> str:
        return self.id


@dataclass(eq=False)
class FiniteModel:
    """A finite, possibly partial interpretation.

    ``rels[r]`` maps argument tuples to booleans and ``funcs[f]`` maps
    argument tuples to values.  In a total model a missing relation entry
    means false (arguments outside the grid); in a partial model it means
    unknown.  ``terms`` records the value of ground terms the model was
    built from, keyed by their printed form.
    """

    fg_sort: str
    elements: tuple
    ints: tuple = ()
    consts: dict = field(default_factory=dict)
    funcs: dict = field(default_factory=dict)
    rels: dict = field(default_factory=dict)
    total: bool = False
    terms: dict = field(default_factory=dict)
    set_members: dict = field(default_factory=dict)   # SetRef -> frozenset of members among ints
    label: str = ""
    core: tuple = ()    # elements denoted by the instantiation terms; empty means all

    def core_elements(self) -> tuple:
        return self.core or self.elements

    def domain(self, sort: str) -> tuple:
        if sort == self.fg_sort:
            return self.elements
        if sort == L.INT:
            return self.ints
        raise LogicError("no finite domain for sort %s" % sort)

    def tuples(self, sorts) -> list:
        return list(itertools.product(*(self.domain(s) for s in sorts)))

    def relation(self, name: str, args: tuple):
        table = self.rels.get(name)
        if table is None:
            return False if self.total else UNKNOWN
        v = table.get(args)
        if v is None and self.total:
            return False
        return v

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, frozenset):
                return sorted(map(str, v))
            if isinstance(v, SetRef):
                return {"set": v.id}
            return v

        def key(args):
            return ",".join(map(str, args))

        return {
            "label": self.label,
            "total": self.total,
            "elements": list(self.elements),
            "ints": list(self.ints),
            "consts": {k: enc(v) for k, v in self.consts.items()},
            "funcs": {f: {key(a): enc(v) for a, v in t.items()} for f, t in self.funcs.items()},
            "rels": {r: {key(a): v for a, v in t.items()} for r, t in self.rels.items()},
            "terms": {k: enc(v) for k, v in self.terms.items()},
        }


def model_json(m: FiniteModel, indent: int | None = 2) -> str:
    return json.dumps(m.to_json(), indent=indent, sort_keys=True)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=100000)
def _ground_key(t):
    return str(t) if L.is_ground(t) else None


def eval_term(m: FiniteModel, t, env: dict):
    if isinstance(t, Var):
        if t not in env:
            raise LogicError("unassigned variable %s" % t.name)
        return env[t]
    if isinstance(t, IntLit):
        return t.value
    if m.terms and not isinstance(t, Var):
        key = _ground_key(t)
        if key is not None and key in m.terms:
            return m.terms[key]
    if isinstance(t, App):
        if not t.args:
            return m.consts.get(t.fn)
        args = tuple(eval_term(m, a, env) for a in t.args)
        if any(a is None for a in args):
            return None
        table = m.funcs.get(t.fn)
        return table.get(args) if table is not None else None
    if isinstance(t, Op):
        if t.op == "emptyset":
            return frozenset()
        args = [eval_term(m, a, env) for a in t.args]
        if any(a is None for a in args):
            return None
        if t.op == "+":
            return sum(args)
        if t.op == "-":
            return -args[0] if len(args) == 1 else args[0] - args[1]
        if t.op == "singleton":
            return frozenset([args[0]])
        if t.op == "union":
            if all(isinstance(a, frozenset) for a in args):
                return args[0] | args[1]
            return None
        raise LogicError("unknown operator %s" % t.op)
    if isinstance(t, TermIte):
        c = eval_formula(m, t.cond, env)
        if c is True:
            return eval_term(m, t.then, env)
        if c is False:
            return eval_term(m, t.els, env)
        a, b = eval_term(m, t.then, env), eval_term(m, t.els, env)
        return a if a is not None and a == b else None
    raise LogicError("not a term: %r" % (t,))


def _members(m: FiniteModel, s):
    """Known members of ``s`` among the model's ints, and whether that is exact."""
    if isinstance(s, frozenset):
        return s, True
    return m.set_members.get(s), False


def _set_eq(m: FiniteModel, a, b):
    if isinstance(a, frozenset) and isinstance(b, frozenset):
        return a == b
    if isinstance(a, SetRef) and isinstance(b, SetRef):
        return a == b
    ma, _ = _members(m, a)
    mb, _ = _members(m, b)
    if ma is None or mb is None:
        return UNKNOWN
    universe = set(m.ints)
    if (set(ma) & universe) != (set(mb) & universe):
        return False
    return UNKNOWN


def _values_eq(m: FiniteModel, a, b):
    if a is None or b is None:
        return UNKNOWN
    if isinstance(a, (frozenset, SetRef)) or isinstance(b, (frozenset, SetRef)):
        return _set_eq(m, a, b)
    return a == b


def _bg(m: FiniteModel, op: str, a, b):
    if a is None or b is None:
        return UNKNOWN
    if op == "<=":
        return a <= b
    if op == "<":
        return a < b
    if op == ">=":
        return a >= b
    if op == ">":
        return a > b
    if op == "member":
        if isinstance(b, frozenset):
            return a in b
        known = m.set_members.get(b)
        if known is None or a not in m.ints:
            return UNKNOWN
        return a in known
    if op == "subset":
        if isinstance(a, frozenset) and isinstance(b, frozenset):
            return a <= b
        ma, _ = _members(m, a)
        mb, _ = _members(m, b)
        if ma is None or mb is None:
            return UNKNOWN
        if any(x in m.ints and x not in mb for x in ma):
            return False
        return UNKNOWN
    raise LogicError("unknown predicate %s" % op)


def k_not(v):
    return None if v is None else not v


def k_and(vals):
    unknown = False
    for v in vals:
        if v is False:
            return False
        if v is None:
            unknown = True
    return None if unknown else True


def k_or(vals):
    unknown = False
    for v in vals:
        if v is True:
            return True
        if v is None:
            unknown = True
    return None if unknown else False


def eval_formula(m: FiniteModel, f, env: dict | None = None):
    """Strong-Kleene evaluation; returns True, False or None (unknown)."""
    env = env or {}
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Atom):
        args = tuple(eval_term(m, a, env) for a in f.args)
        if any(a is None for a in args):
            return UNKNOWN
        return m.relation(f.rel, args)
    if isinstance(f, Eq):
        return _values_eq(m, eval_term(m, f.lhs, env), eval_term(m, f.rhs, env))
    if isinstance(f, BgAtom):
        return _bg(m, f.op, eval_term(m, f.args[0], env), eval_term(m, f.args[1], env))
    if isinstance(f, Not):
        return k_not(eval_formula(m, f.arg, env))
    if isinstance(f, And):
        return k_and(eval_formula(m, a, env) for a in f.args)
    if isinstance(f, Or):
        return k_or(eval_formula(m, a, env) for a in f.args)
    if isinstance(f, Implies):
        return k_or((k_not(eval_formula(m, f.lhs, env)), eval_formula(m, f.rhs, env)))
    if isinstance(f, Iff):
        a, b = eval_formula(m, f.lhs, env), eval_formula(m, f.rhs, env)
        return None if a is None or b is None else a == b
    if isinstance(f, Ite):
        c = eval_formula(m, f.cond, env)
        if c is True:
            return eval_formula(m, f.then, env)
        if c is False:
            return eval_formula(m, f.els, env)
        a, b = eval_formula(m, f.then, env), eval_formula(m, f.els, env)
        return a if a == b else None
    if isinstance(f, Forall):
        vals = []
        for tup in m.tuples([v.sort for v in f.vars]):
            inner = dict(env)
            inner.update(zip(f.vars, tup))
            v = eval_formula(m, f.body, inner)
            if v is False:
                return False
            vals.append(v)
        return k_and(vals)
    raise LogicError("not a formula: %r" % (f,))


def holds_everywhere(m: FiniteModel, f) -> bool:
    """True iff the universal formula ``f`` is definitely true in ``m``."""
    return eval_formula(m, f) is True


# ---------------------------------------------------------------------------
# Least fixpoints
# ---------------------------------------------------------------------------


def _grid(m: FiniteModel, params) -> list:
    return m.tuples([p.sort for p in params])


def lfp_eval(m: FiniteModel, rel_defs, fun_defs=(), with_rounds: bool = False):
    """Fill in recursive functions and relations with their least fixpoint.

    Functions are computed first over the flat lattice (undefined until
    the recursion bottoms out), then undefined points get the bottom value.
    Relations are then iterated simultaneously from the empty relation.
    """
    out = FiniteModel(m.fg_sort, m.elements, m.ints, dict(m.consts),
                      {k: dict(v) for k, v in m.funcs.items()},
                      {k: dict(v) for k, v in m.rels.items()}, True, dict(m.terms),
                      dict(m.set_members), m.label)
    out.total = False   # undefined function points must read as unknown while iterating
    for d in fun_defs:
        if any(p.sort != m.fg_sort for p in d.params):
            raise LogicError("recursive function %s must take foreground arguments" % d.name)
        out.funcs[d.name] = {}
    changed = bool(fun_defs)
    while changed:
        changed = False
        for d in fun_defs:
            table = out.funcs[d.name]
            for tup in _grid(out, d.params):
                if tup in table:
                    continue
                v = eval_term(out, d.body, dict(zip(d.params, tup)))
                if v is not None:
                    table[tup] = v
                    changed = True
    for d in fun_defs:
        bottom = INT_BOTTOM if d.result_sort == L.INT else UNDEF_SET_VALUE
        table = out.funcs[d.name]
        for tup in _grid(out, d.params):
            table.setdefault(tup, bottom)
    if any(d.result_sort == L.SETINT for d in fun_defs):
        out.consts.setdefault(UNDEF_SET, UNDEF_SET_VALUE)

    out.total = True
    for d in rel_defs:
        out.rels[d.name] = {}
    rounds = 0
    while True:
        rounds += 1
        new = {}
        for d in rel_defs:
            new[d.name] = {tup: True for tup in _grid(out, d.params)
                           if eval_formula(out, d.body, dict(zip(d.params, tup))) is True}
        if all(new[d.name].keys() == out.rels[d.name].keys() for d in rel_defs):
            break
        for d in rel_defs:
            out.rels[d.name] = new[d.name]
    for d in rel_defs:
        table = out.rels[d.name]
        for tup in _grid(out, d.params):
            table.setdefault(tup, False)
    return (out, rounds) if with_rounds else out


def lfp_model(lowered: Lowered, base: FiniteModel) -> FiniteModel:
    return lfp_eval(base, lowered.rel_defs, lowered.fun_defs)


# ---------------------------------------------------------------------------
# Random true models
# ---------------------------------------------------------------------------


def _random_value(rng: random.Random, sort: str, elements, int_range):
    lo, hi = int_range
    if sort == L.INT:
        return rng.randint(lo, hi)
    if sort == L.SETINT:
        return frozenset(i for i in range(lo, hi + 1) if rng.random() < 0.3)
    if sort == L.BOOL:
        return rng.random() < 0.5
    return rng.choice(elements)


def random_base_model(lowered: Lowered, size: int, rng: random.Random,
                      int_range=DEFAULT_INT_RANGE, label: str = "") -> FiniteModel:
    sig = lowered.signature
    elements = tuple("e%d" % i for i in range(size))
    ints = tuple(range(int_range[0], int_range[1] + 1))
    m = FiniteModel(sig.fg_sort, elements, ints, total=True, label=label)
    defined_funcs = {d.name for d in lowered.fun_defs}
    defined_rels = {d.name for d in lowered.rel_defs}
    for c, s in sorted(sig.consts.items()):
        if c == UNDEF_SET:
            m.consts[c] = UNDEF_SET_VALUE
        else:
            m.consts[c] = _random_value(rng, s, elements, int_range)
    for f, (args, res) in sorted(sig.funcs.items()):
        if f in defined_funcs:
            continue
        m.funcs[f] = {tup: _random_value(rng, res, elements, int_range) for tup in m.tuples(args)}
    for r, args in sorted(sig.rels.items()):
        if r in defined_rels:
            continue
        m.rels[r] = {tup: rng.random() < 0.5 for tup in m.tuples(args)}
    return m


def satisfies_all(m: FiniteModel, formulas) -> bool:
    return all(eval_formula(m, f) is True for f in formulas)


def gen_true_models(problem, count: int, size: int, seed: int = 0, lemmas=(),
                    int_range=DEFAULT_INT_RANGE, max_rejections: int = 200) -> list:
    """Sample up to ``count`` least-fixpoint models of the axioms and ``lemmas``.

    Models violating an axiom or a lemma are resampled; a model slot is
    abandoned after ``max_rejections`` attempts, so fewer models may come back.
    """
    if count < 0 or size < 1:
        raise ValueError("count must be >= 0 and size >= 1")
    lowered = problem if isinstance(problem, Lowered) else lower_problem(problem)
    required = list(lowered.problem.axioms) + [lem.formula() if hasattr(lem, "formula") else lem
                                               for lem in lemmas]
    rng = random.Random(seed)
    out = []
    for i in range(count):
        for _ in range(max_rejections):
            base = random_base_model(lowered, rng.randint(1, size), rng, int_range, "true-%d" % i)
            m = lfp_model(lowered, base)
            if satisfies_all(m, required):
                out.append(m)
                break
        else:
            log.warning("gave up on true model %d after %d rejections", i, max_rejections)
    if len(out) < count:
        log.info("generated %d of %d true models", len(out), count)
    return out


# ---------------------------------------------------------------------------
# Universal model
# ---------------------------------------------------------------------------


class _Bottom:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "BOTTOM"

    __str__ = __repr__


BOTTOM = _Bottom()


@dataclass
class UniversalModel:
    """Members' universes side by side plus one bottom element per sort.

    Foreground elements are ``(i, e)`` pairs for member ``i``; ``BOTTOM``
    stands for the bottom of every sort.  Applications whose arguments come
    from two members, touch ``BOTTOM`` or hit an undefined member point
    yield ``BOTTOM``.
    """

    members: list
    elements: tuple
    funcs: dict
    rels: dict
    consts: dict

    def member_of(self, e):
        return e[0] if isinstance(e, tuple) else None

    def apply(self, fn: str, args: tuple):
        return self.funcs[fn].get(tuple(args), BOTTOM)

    def holds(self, rel: str, args: tuple):
        return self.rels[rel].get(tuple(args), BOTTOM)

    def points(self, sorts, ints) -> list:
        doms = [self.elements if s == self.members[0].fg_sort else tuple(ints) + (BOTTOM,) for s in sorts]
        return list(itertools.product(*doms))


def build_universal_model(models, sig) -> UniversalModel:
    if not models:
        raise ValueError("need at least one model")
    fg = sig.fg_sort
    for m in models:
        if m.fg_sort != fg:
            raise LogicError("signature mismatch: foreground sorts differ")
    elements = tuple((i, e) for i, m in enumerate(models) for e in m.elements) + (BOTTOM,)

    def lift(i, v, sort):
        if v is None:
            return BOTTOM
        return (i, v) if sort == fg else v

    funcs, rels, consts = {}, {}, {}
    for f, (args, res) in sig.funcs.items():
        table = {}
        fgpos = [j for j, s in enumerate(args) if s == fg]
        for i, m in enumerate(models):
            mt = m.funcs.get(f, {})
            for tup, v in mt.items():
                key = tuple((i, a) if s == fg else a for s, a in zip(args, tup))
                if fgpos or i == 0:
                    table[key] = lift(i, v, res)
        funcs[f] = table
    for r, args in sig.rels.items():
        table = {}
        fgpos = [j for j, s in enumerate(args) if s == fg]
        for i, m in enumerate(models):
            for tup, v in m.rels.get(r, {}).items():
                if v is None:
                    continue
                key = tuple((i, a) if s == fg else a for s, a in zip(args, tup))
                if fgpos or i == 0:
                    table[key] = v
        rels[r] = table
    for c, s in sig.consts.items():
        consts[c] = tuple(lift(i, m.consts.get(c), s) for i, m in enumerate(models))
    return UniversalModel(list(models), elements, funcs, rels, consts)


def member_view(u: UniversalModel, i: int) -> FiniteModel:
    """Restriction of ``u`` to member ``i``, with ``(i, e)`` elements renamed back to ``e``."""
    m = u.members[i]
    fg = m.fg_sort

    def down(v):
        if isinstance(v, tuple) and len(v) == 2 and v[0] == i:
            return v[1]
        return None if v is BOTTOM else v

    funcs = {f: {tuple(down(a) if isinstance(a, tuple) else a for a in k): down(v)
                 for k, v in t.items() if all(not isinstance(a, tuple) or a[0] == i for a in k)}
             for f, t in u.funcs.items()}
    rels = {r: {tuple(down(a) if isinstance(a, tuple) else a for a in k): v
                for k, v in t.items() if all(not isinstance(a, tuple) or a[0] == i for a in k)}
            for r, t in u.rels.items()}
    consts = {c: down(vs[i]) for c, vs in u.consts.items()}
    return FiniteModel(fg, m.elements, m.ints, consts,
                       {f: {k: v for k, v in t.items() if v is not None} for f, t in funcs.items()},
                       rels, m.total, {}, dict(m.set_members), m.label)
