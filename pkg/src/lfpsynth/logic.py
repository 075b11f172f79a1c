"""Sorted syntax for first-order logic with recursive definitions.

Terms and formulas are frozen dataclasses, so they hash and compare
structurally and can be shared freely.  The printed form is the same
S-expression syntax the problem parser reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence, Union

INT = "Int"
SETINT = "SetInt"
BOOL = "Bool"
BACKGROUND_SORTS = (INT, SETINT, BOOL)


class LogicError(Exception):
    """Raised for ill-formed syntax trees (sort errors, arity errors)."""


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str
    sort: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class App:
    """Application of a declared function; constants have ``args == ()``."""

    fn: str
    args: tuple = ()
    sort: str = ""

    def __str__(self) -> str:
        if not self.args:
            return self.fn
        return "(%s %s)" % (self.fn, " ".join(map(str, self.args)))


@dataclass(frozen=True)
class IntLit:
    value: int

    @property
    def sort(self) -> str:
        return INT

    def __str__(self) -> str:
        return str(self.value)


# Built-in background operators and their result sorts.
TERM_OPS = {"+": INT, "-": INT, "union": SETINT, "singleton": SETINT, "emptyset": SETINT}


@dataclass(frozen=True)
class Op:
    op: str
    args: tuple = ()

    @property
    def sort(self) -> str:
        return TERM_OPS[self.op]

    def __str__(self) -> str:
        if self.op == "emptyset":
            return "emptyset"
        return "(%s %s)" % (self.op, " ".join(map(str, self.args)))


@dataclass(frozen=True)
class TermIte:
    cond: "Formula"
    then: "Term"
    els: "Term"

    @property
    def sort(self) -> str:
        return self.then.sort

    def __str__(self) -> str:
        return "(ite %s %s %s)" % (self.cond, self.then, self.els)


Term = Union[Var, App, IntLit, Op, TermIte]


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoolConst:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True)
class Atom:
    rel: str
    args: tuple = ()

    def __str__(self) -> str:
        if not self.args:
            return self.rel
        return "(%s %s)" % (self.rel, " ".join(map(str, self.args)))


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term

    def __str__(self) -> str:
        return "(= %s %s)" % (self.lhs, self.rhs)


BG_PREDICATES = ("<=", "<", ">=", ">", "member", "subset")


@dataclass(frozen=True)
class BgAtom:
    op: str
    args: tuple

    def __str__(self) -> str:
        return "(%s %s)" % (self.op, " ".join(map(str, self.args)))


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __str__(self) -> str:
        return "(not %s)" % self.arg


@dataclass(frozen=True)
class And:
    args: tuple

    def __str__(self) -> str:
        if not self.args:
            return "true"
        return "(and %s)" % " ".join(map(str, self.args))


@dataclass(frozen=True)
class Or:
    args: tuple

    def __str__(self) -> str:
        if not self.args:
            return "false"
        return "(or %s)" % " ".join(map(str, self.args))


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"

    def __str__(self) -> str:
        return "(=> %s %s)" % (self.lhs, self.rhs)


@dataclass(frozen=True)
class Iff:
    lhs: "Formula"
    rhs: "Formula"

    def __str__(self) -> str:
        return "(iff %s %s)" % (self.lhs, self.rhs)


@dataclass(frozen=True)
class Ite:
    cond: "Formula"
    then: "Formula"
    els: "Formula"

    def __str__(self) -> str:
        return "(ite %s %s %s)" % (self.cond, self.then, self.els)


@dataclass(frozen=True)
class Forall:
    vars: tuple
    body: "Formula"

    def __str__(self) -> str:
        binders = " ".join("(%s %s)" % (v.name, v.sort) for v in self.vars)
        return "(forall (%s) %s)" % (binders, self.body)


Formula = Union[BoolConst, Atom, Eq, BgAtom, Not, And, Or, Implies, Iff, Ite, Forall]
Node = Union[Term, Formula]

FORMULA_TYPES = (BoolConst, Atom, Eq, BgAtom, Not, And, Or, Implies, Iff, Ite, Forall)
TERM_TYPES = (Var, App, IntLit, Op, TermIte)


def conj(*args: Formula) -> Formula:
    flat = []
    for a in args:
        if isinstance(a, And):
            flat.extend(a.args)
        elif a != TRUE:
            flat.append(a)
    if any(a == FALSE for a in flat):
        return FALSE
    if not flat:
        return TRUE
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(*args: Formula) -> Formula:
    flat = []
    for a in args:
        if isinstance(a, Or):
            flat.extend(a.args)
        elif a != FALSE:
            flat.append(a)
    if any(a == TRUE for a in flat):
        return TRUE
    if not flat:
        return FALSE
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def neg(f: Formula) -> Formula:
    if isinstance(f, BoolConst):
        return BoolConst(not f.value)
    if isinstance(f, Not):
        return f.arg
    return Not(f)


# ---------------------------------------------------------------------------
# Generic traversal
# ---------------------------------------------------------------------------


def children(node: Node) -> tuple:
    if isinstance(node, (Var, IntLit, BoolConst)):
        return ()
    if isinstance(node, (App, Op, Atom, BgAtom, And, Or)):
        return node.args
    if isinstance(node, Eq):
        return (node.lhs, node.rhs)
    if isinstance(node, (Implies, Iff)):
        return (node.lhs, node.rhs)
    if isinstance(node, (TermIte, Ite)):
        return (node.cond, node.then, node.els)
    if isinstance(node, Not):
        return (node.arg,)
    if isinstance(node, Forall):
        return (node.body,)
    raise LogicError("not a syntax node: %r" % (node,))


def rebuild(node: Node, kids: Sequence[Node]) -> Node:
    """Return ``node`` with its children replaced by ``kids``."""
    if isinstance(node, (Var, IntLit, BoolConst)):
        return node
    if isinstance(node, App):
        return App(node.fn, tuple(kids), node.sort)
    if isinstance(node, Op):
        return Op(node.op, tuple(kids))
    if isinstance(node, Atom):
        return Atom(node.rel, tuple(kids))
    if isinstance(node, BgAtom):
        return BgAtom(node.op, tuple(kids))
    if isinstance(node, And):
        return And(tuple(kids))
    if isinstance(node, Or):
        return Or(tuple(kids))
    if isinstance(node, Eq):
        return Eq(*kids)
    if isinstance(node, Implies):
        return Implies(*kids)
    if isinstance(node, Iff):
        return Iff(*kids)
    if isinstance(node, TermIte):
        return TermIte(*kids)
    if isinstance(node, Ite):
        return Ite(*kids)
    if isinstance(node, Not):
        return Not(kids[0])
    if isinstance(node, Forall):
        return Forall(node.vars, kids[0])
    raise LogicError("not a syntax node: %r" % (node,))


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def transform(node: Node, fn: Callable[[Node], Node | None]) -> Node:
    """Bottom-up rewrite.  ``fn`` returns a replacement or None to keep."""
    kids = children(node)
    if kids:
        new_kids = tuple(transform(k, fn) for k in kids)
        if any(a is not b for a, b in zip(new_kids, kids)):
            node = rebuild(node, new_kids)
    out = fn(node)
    return node if out is None else out


def free_vars(node: Node) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node])
    if isinstance(node, Forall):
        return free_vars(node.body) - frozenset(node.vars)
    out: frozenset = frozenset()
    for k in children(node):
        out |= free_vars(k)
    return out


def is_quantifier_free(node: Node) -> bool:
    return not any(isinstance(n, Forall) for n in walk(node))


def is_ground(node: Node) -> bool:
    return not any(isinstance(n, Var) for n in walk(node))


def subst_vars(node: Node, mapping: dict) -> Node:
    """Capture-avoiding enough for our use: bound variables shadow the map."""
    if not mapping:
        return node
    if isinstance(node, Var):
        return mapping.get(node, node)
    if isinstance(node, Forall):
        inner = {k: v for k, v in mapping.items() if k not in node.vars}
        return Forall(node.vars, subst_vars(node.body, inner))
    kids = children(node)
    if not kids:
        return node
    return rebuild(node, [subst_vars(k, mapping) for k in kids])


def term_depth(t: Term, fg_sort: str) -> int:
    """Nesting of foreground-sorted function applications."""
    if isinstance(t, App) and t.args:
        inner = max((term_depth(a, fg_sort) for a in t.args), default=0)
        return inner + (1 if t.sort == fg_sort else 0)
    kids = [k for k in children(t) if isinstance(k, TERM_TYPES)]
    return max((term_depth(k, fg_sort) for k in kids), default=0)


def size(f: Node) -> int:
    return sum(1 for _ in walk(f))


def relations_in(node: Node) -> set:
    return {n.rel for n in walk(node) if isinstance(n, Atom)}


def functions_in(node: Node) -> set:
    return {n.fn for n in walk(node) if isinstance(n, App) and n.args}


def constants_in(node: Node) -> set:
    return {n for n in walk(node) if isinstance(n, App) and not n.args}


def ground_subterms(node: Node, sort: str | None = None) -> set:
    out = set()
    for n in walk(node):
        if isinstance(n, TERM_TYPES) and not isinstance(n, TermIte) and is_ground(n):
            if sort is None or n.sort == sort:
                out.add(n)
    return out


# ---------------------------------------------------------------------------
# Signatures, definitions, problems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    fg_sort: str
    consts: dict = field(default_factory=dict)   # name -> sort
    funcs: dict = field(default_factory=dict)    # name -> (arg sorts, result sort)
    rels: dict = field(default_factory=dict)     # name -> arg sorts

    def __post_init__(self) -> None:
        names = list(self.consts) + list(self.funcs) + list(self.rels)
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise LogicError("names declared twice: %s" % ", ".join(sorted(dup)))
        for name, sort in self.consts.items():
            self._check_sort(sort, name)
        for name, (args, res) in self.funcs.items():
            for s in (*args, res):
                self._check_sort(s, name)
        for name, args in self.rels.items():
            for s in args:
                self._check_sort(s, name)

    def _check_sort(self, sort: str, owner: str) -> None:
        if sort != self.fg_sort and sort not in BACKGROUND_SORTS:
            raise LogicError("unknown sort %s in declaration of %s" % (sort, owner))

    @property
    def sorts(self) -> tuple:
        return (self.fg_sort,) + BACKGROUND_SORTS

    def names(self) -> set:
        return set(self.consts) | set(self.funcs) | set(self.rels)

    def fg_functions(self) -> list:
        """Functions from foreground arguments to the foreground sort."""
        return sorted(
            name for name, (args, res) in self.funcs.items()
            if args and res == self.fg_sort and all(a == self.fg_sort for a in args)
        )

    def fg_constants(self) -> list:
        return sorted(n for n, s in self.consts.items() if s == self.fg_sort)

    def extend(self, consts=None, funcs=None, rels=None) -> "Signature":
        return Signature(
            self.fg_sort,
            {**self.consts, **(consts or {})},
            {**self.funcs, **(funcs or {})},
            {**self.rels, **(rels or {})},
        )


@dataclass(frozen=True)
class RecDef:
    """``name(params) :=lfp body``; ``result_sort`` is set for functions."""

    name: str
    params: tuple
    body: Node
    result_sort: str | None = None

    @property
    def is_function(self) -> bool:
        return self.result_sort is not None

    def head(self) -> Node:
        if self.is_function:
            return App(self.name, self.params, self.result_sort)
        return Atom(self.name, self.params)

    def __str__(self) -> str:
        params = " ".join("(%s %s)" % (v.name, v.sort) for v in self.params)
        if self.is_function:
            return "(define-recfun (%s %s) %s %s)" % (self.name, params, self.result_sort, self.body)
        return "(define-rec (%s %s) %s)" % (self.name, params, self.body)


@dataclass(frozen=True)
class Lemma:
    """``forall vars. head(vars) -> body``."""

    head: str
    vars: tuple
    body: Formula

    def __post_init__(self) -> None:
        if not is_quantifier_free(self.body):
            raise LogicError("lemma body must be quantifier-free")

    def formula(self) -> Forall:
        return Forall(self.vars, Implies(Atom(self.head, self.vars), self.body))

    def __str__(self) -> str:
        return str(self.formula())


@dataclass(frozen=True)
class Problem:
    signature: Signature
    recdefs: tuple = ()
    axioms: tuple = ()
    goal: Formula = TRUE
    grammar: tuple = ()          # raw grammar config entries, see synth.LemmaGrammar
    expected: tuple = ()         # expect-lemma formulas
    name: str = ""
    provenance: str = ""

    def definition(self, name: str) -> RecDef | None:
        for d in self.recdefs:
            if d.name == name:
                return d
        return None

    def rel_defs(self) -> tuple:
        return tuple(d for d in self.recdefs if not d.is_function)

    def fun_defs(self) -> tuple:
        return tuple(d for d in self.recdefs if d.is_function)

    def recursive_symbols(self) -> set:
        return {d.name for d in self.recdefs}


# ---------------------------------------------------------------------------
# Sort checking
# ---------------------------------------------------------------------------


def sort_of(t: Term, sig: Signature) -> str:
    """Check ``t`` against ``sig`` and return its sort."""
    if isinstance(t, Var):
        return t.sort
    if isinstance(t, IntLit):
        return INT
    if isinstance(t, App):
        if not t.args:
            if t.fn not in sig.consts:
                raise LogicError("unknown constant %s" % t.fn)
            return sig.consts[t.fn]
        if t.fn not in sig.funcs:
            raise LogicError("unknown function %s" % t.fn)
        arg_sorts, res = sig.funcs[t.fn]
        _check_args(t.fn, arg_sorts, t.args, sig)
        return res
    if isinstance(t, Op):
        want = {"+": None, "-": None, "union": (SETINT, SETINT), "singleton": (INT,), "emptyset": ()}[t.op]
        if want is None:
            want = (INT,) * len(t.args)
            if not t.args or (t.op == "-" and len(t.args) > 2):
                raise LogicError("bad arity for %s" % t.op)
        _check_args(t.op, want, t.args, sig)
        return t.sort
    if isinstance(t, TermIte):
        check_formula(t.cond, sig)
        a, b = sort_of(t.then, sig), sort_of(t.els, sig)
        if a != b:
            raise LogicError("ite branches have sorts %s and %s" % (a, b))
        return a
    raise LogicError("not a term: %r" % (t,))


def _check_args(name: str, want: Sequence[str], args: Sequence[Term], sig: Signature) -> None:
    if len(want) != len(args):
        raise LogicError("%s expects %d arguments, got %d" % (name, len(want), len(args)))
    for w, a in zip(want, args):
        got = sort_of(a, sig)
        if got != w:
            raise LogicError("argument %s of %s has sort %s, expected %s" % (a, name, got, w))


def check_formula(f: Formula, sig: Signature) -> None:
    if isinstance(f, BoolConst):
        return
    if isinstance(f, Atom):
        if f.rel not in sig.rels:
            raise LogicError("unknown relation %s" % f.rel)
        _check_args(f.rel, sig.rels[f.rel], f.args, sig)
    elif isinstance(f, Eq):
        a, b = sort_of(f.lhs, sig), sort_of(f.rhs, sig)
        if a != b:
            raise LogicError("equality between sorts %s and %s: %s" % (a, b, f))
    elif isinstance(f, BgAtom):
        want = {"member": (INT, SETINT), "subset": (SETINT, SETINT)}.get(f.op, (INT, INT))
        _check_args(f.op, want, f.args, sig)
    elif isinstance(f, Forall):
        for v in f.vars:
            if v.sort != sig.fg_sort:
                raise LogicError("quantified variable %s must range over %s" % (v.name, sig.fg_sort))
        check_formula(f.body, sig)
    else:
        for k in children(f):
            check_formula(k, sig)


# ---------------------------------------------------------------------------
# Substitution of relation atoms and positivity
# ---------------------------------------------------------------------------


def substitute(f: Formula, rel: str, replacement: Callable[[tuple], Formula], arity: int | None = None) -> Formula:
    """Replace every atom ``rel(t...)`` in ``f`` by ``replacement(t...)``."""

    def rw(node: Node) -> Node | None:
        if isinstance(node, Atom) and node.rel == rel:
            if arity is not None and len(node.args) != arity:
                raise LogicError("arity mismatch substituting %s" % rel)
            return replacement(node.args)
        return None

    return transform(f, rw)


def check_positivity(d: RecDef, all_defs) -> tuple | None:
    """Return None if every recursive atom in the body occurs positively,
    otherwise the path (node labels) to the first negative one.

    ``all_defs`` may hold RecDefs or bare relation names.
    """
    recursive = {x.name if isinstance(x, RecDef) else x for x in all_defs}

    def visit(node: Node, positive: bool, path: tuple) -> tuple | None:
        label = path + (type(node).__name__,)
        if isinstance(node, Atom):
            if node.rel in recursive and not positive:
                return path + (str(node),)
            return None
        if isinstance(node, Not):
            return visit(node.arg, not positive, label)
        if isinstance(node, Implies):
            return visit(node.lhs, not positive, label) or visit(node.rhs, positive, label)
        if isinstance(node, Iff):
            # both polarities
            for sub in (node.lhs, node.rhs):
                hit = visit(sub, positive, label) or visit(sub, not positive, label)
                if hit:
                    return hit
            return None
        if isinstance(node, (Ite, TermIte)):
            # ite(c, a, b) = (c and a) or (not c and b): condition has both polarities
            hit = visit(node.cond, positive, label) or visit(node.cond, not positive, label)
            return hit or visit(node.then, positive, label) or visit(node.els, positive, label)
        for k in children(node):
            hit = visit(k, positive, label)
            if hit:
                return hit
        return None

    return visit(d.body, True, (d.name,))
