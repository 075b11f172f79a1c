"""Problem-file reader and printer.

The format is a sequence of S-expressions::

    (foreground-sort Loc)
    (const nil Loc)
    (func n (Loc) Loc)
    (define-rec (list (x Loc)) (or (= x nil) (list (n x))))
    (goal (forall ((x Loc)) (=> (list x) (list x))))
"""

from __future__ import annotations

from . import logic as L
from .logic import (
    App, Atom, BgAtom, BoolConst, Eq, Forall, Iff, Implies, IntLit, Ite, LogicError, Not,
    Op, Problem, RecDef, Signature, TermIte, Var,
)
from .sexpr import SexprError, SList, Sym, dumps, parse_all, position


class ParseError(Exception):
    def __init__(self, msg: str, node=None):
        self.line, self.col = position(node) if node is not None else (0, 0)
        where = "line %d, column %d: " % (self.line, self.col) if self.line else ""
        super().__init__(where + msg)


class PositivityError(ParseError):
    pass


class DuplicateDefinitionError(ParseError):
    pass


DECL_KEYS = (
    "problem", "provenance", "foreground-sort", "const", "func", "pred", "define-rec",
    "define-recfun", "axiom", "goal", "grammar", "expect-lemma",
)

GRAMMAR_KEYS = ("depth", "max-size", "heads", "constants", "functions", "relations",
                "connectives", "atoms", "vocabulary", "tuple-limit")


def _sym(x, what: str) -> str:
    if isinstance(x, list):
        raise ParseError("expected %s, got a list" % what, x)
    return str(x)


class _Builder:
    def __init__(self, sig: Signature, recursive_funcs: set):
        self.sig = sig
        self.recursive_funcs = recursive_funcs

    # terms ---------------------------------------------------------------
    def term(self, x, env: dict):
        try:
            t = self._term(x, env)
            L.sort_of(t, self.sig)
            return t
        except LogicError as e:
            raise ParseError(str(e), x) from None

    def _term(self, x, env):
        if not isinstance(x, list):
            s = str(x)
            if s in env:
                return env[s]
            if s == "emptyset":
                return Op("emptyset", ())
            if _is_int(s):
                return IntLit(int(s))
            if s in self.sig.consts:
                return App(s, (), self.sig.consts[s])
            raise ParseError("unknown identifier %s" % s, x)
        if not x:
            raise ParseError("empty application", x)
        head = _sym(x[0], "operator")
        if head == "ite":
            if len(x) != 4:
                raise ParseError("ite takes three arguments", x)
            return TermIte(self.formula(x[1], env), self._term(x[2], env), self._term(x[3], env))
        args = tuple(self._term(a, env) for a in x[1:])
        if head in ("+", "-", "union", "singleton"):
            if head == "-" and len(args) == 1 and isinstance(args[0], IntLit):
                return IntLit(-args[0].value)
            return Op(head, args)
        if head in self.sig.funcs:
            return App(head, args, self.sig.funcs[head][1])
        raise ParseError("unknown function %s" % head, x)

    # formulas ------------------------------------------------------------
    def formula(self, x, env: dict, allow_forall: bool = False, int_binders: bool = False):
        if not isinstance(x, list):
            s = str(x)
            if s == "true":
                return L.TRUE
            if s == "false":
                return L.FALSE
            if s in self.sig.rels and not self.sig.rels[s]:
                return Atom(s, ())
            raise ParseError("expected a formula, got %s" % s, x)
        if not x:
            raise ParseError("empty formula", x)
        head = _sym(x[0], "connective")
        rest = x[1:]
        if head == "forall":
            if not allow_forall:
                raise ParseError("quantifier not allowed here (formulas must be universal)", x)
            if len(rest) != 2 or not isinstance(rest[0], list):
                raise ParseError("malformed forall", x)
            vs = []
            inner = dict(env)
            for b in rest[0]:
                if not isinstance(b, list) or len(b) != 2:
                    raise ParseError("malformed binder", b)
                name, sort = _sym(b[0], "variable"), _sym(b[1], "sort")
                if sort != self.sig.fg_sort and not (int_binders and sort == L.INT):
                    raise ParseError("quantified variable %s must have the foreground sort %s"
                                     % (name, self.sig.fg_sort), b)
                v = Var(name, sort)
                vs.append(v)
                inner[name] = v
            body = self.formula(rest[1], inner, allow_forall=True, int_binders=int_binders)
            if isinstance(body, Forall):
                return Forall(tuple(vs) + body.vars, body.body)
            return Forall(tuple(vs), body)
        if head == "not":
            self._arity(x, 1)
            return Not(self.formula(rest[0], env))
        if head == "and":
            return L.And(tuple(self.formula(a, env) for a in rest)) if rest else L.TRUE
        if head == "or":
            return L.Or(tuple(self.formula(a, env) for a in rest)) if rest else L.FALSE
        if head in ("=>", "implies"):
            self._arity(x, 2)
            return Implies(self.formula(rest[0], env), self.formula(rest[1], env))
        if head in ("iff", "<=>"):
            self._arity(x, 2)
            return Iff(self.formula(rest[0], env), self.formula(rest[1], env))
        if head == "ite":
            self._arity(x, 3)
            return Ite(*(self.formula(a, env) for a in rest))
        if head == "=":
            self._arity(x, 2)
            f = Eq(self.term(rest[0], env), self.term(rest[1], env))
        elif head in L.BG_PREDICATES:
            self._arity(x, 2)
            f = BgAtom(head, (self.term(rest[0], env), self.term(rest[1], env)))
        elif head in self.sig.rels:
            f = Atom(head, tuple(self.term(a, env) for a in rest))
        else:
            raise ParseError("unknown relation %s" % head, x)
        try:
            L.check_formula(f, self.sig)
        except LogicError as e:
            raise ParseError(str(e), x) from None
        return f

    @staticmethod
    def _arity(x, n: int) -> None:
        if len(x) != n + 1:
            raise ParseError("%s takes %d argument(s)" % (x[0], n), x)


def _is_int(s: str) -> bool:
    return s.isdigit() or (s.startswith("-") and s[1:].isdigit())


def _params(x, sig_sorts) -> tuple:
    if not isinstance(x, list) or not x:
        raise ParseError("expected (NAME (VAR SORT)*)", x)
    name = _sym(x[0], "name")
    params = []
    for b in x[1:]:
        if not isinstance(b, list) or len(b) != 2:
            raise ParseError("malformed parameter", b)
        sort = _sym(b[1], "sort")
        if sort not in sig_sorts:
            raise ParseError("unknown sort %s" % sort, b)
        params.append(Var(_sym(b[0], "parameter"), sort))
    return name, tuple(params)


def _sorts(x, what) -> tuple:
    if not isinstance(x, list):
        raise ParseError("expected a list of sorts for %s" % what, x)
    return tuple(_sym(s, "sort") for s in x)


def parse_problem(text: str, name: str = "") -> Problem:
    """Parse and validate a problem file."""
    try:
        decls = parse_all(text)
    except SexprError as e:
        raise ParseError(str(e)) from None

    fg = None
    consts: dict = {}
    funcs: dict = {}
    rels: dict = {}
    provenance = ""
    seen_defs: dict = {}
    pending = []
    for d in decls:
        if not isinstance(d, list) or not d:
            raise ParseError("expected a declaration", d)
        key = _sym(d[0], "declaration keyword")
        if key not in DECL_KEYS:
            raise ParseError("unknown declaration %s" % key, d)
        if key == "problem":
            name = _sym(d[1], "name")
        elif key == "provenance":
            provenance = " ".join(_unquote(_sym(a, "text")) for a in d[1:])
        elif key == "foreground-sort":
            if fg is not None:
                raise ParseError("exactly one foreground sort may be declared", d)
            fg = _sym(d[1], "sort name")
            if fg in L.BACKGROUND_SORTS:
                raise ParseError("%s is a background sort" % fg, d)
        elif key == "const":
            _declare(d, consts, funcs, rels)
            consts[_sym(d[1], "name")] = _sym(d[2], "sort")
        elif key == "func":
            _declare(d, consts, funcs, rels)
            args, res = _sorts(d[2], d[1]), _sym(d[3], "sort")
            if res == L.BOOL:
                rels[_sym(d[1], "name")] = args
            else:
                funcs[_sym(d[1], "name")] = (args, res)
        elif key == "pred":
            _declare(d, consts, funcs, rels)
            rels[_sym(d[1], "name")] = _sorts(d[2], d[1])
        elif key in ("define-rec", "define-recfun"):
            if fg is None:
                raise ParseError("foreground-sort must be declared before definitions", d)
            hname, params = _params(d[1], (fg,) + L.BACKGROUND_SORTS)
            if hname in seen_defs:
                raise DuplicateDefinitionError("duplicate definition of %s" % hname, d)
            if hname in consts or hname in funcs or hname in rels:
                raise DuplicateDefinitionError("%s is already declared" % hname, d)
            if key == "define-rec":
                if len(d) != 3:
                    raise ParseError("define-rec takes a head and a body", d)
                rels[hname] = tuple(p.sort for p in params)
            else:
                if len(d) != 4:
                    raise ParseError("define-recfun takes a head, a sort and a body", d)
                funcs[hname] = (tuple(p.sort for p in params), _sym(d[2], "sort"))
            seen_defs[hname] = (key, params, d)
        else:
            pending.append((key, d))

    if fg is None:
        raise ParseError("no foreground-sort declared")
    try:
        sig = Signature(fg, consts, funcs, rels)
    except LogicError as e:
        raise ParseError(str(e)) from None
    b = _Builder(sig, {n for n, v in seen_defs.items() if v[0] == "define-recfun"})

    recdefs = []
    for hname, (key, params, d) in seen_defs.items():
        env = {p.name: p for p in params}
        if key == "define-rec":
            body = b.formula(d[2], env)
            recdefs.append(RecDef(hname, params, body))
        else:
            body = b.term(d[3], env)
            if body.sort != funcs[hname][1]:
                raise ParseError("body of %s has sort %s" % (hname, body.sort), d)
            recdefs.append(RecDef(hname, params, body, funcs[hname][1]))
    rel_names = {r.name for r in recdefs if not r.is_function}
    for r in recdefs:
        if r.is_function:
            continue
        bad = L.check_positivity(r, rel_names)
        if bad is not None:
            raise PositivityError("recursive relation occurs negatively in %s at %s"
                                  % (r.name, bad[-1]), seen_defs[r.name][2])

    axioms, goal, expected, grammar = [], None, [], []
    for key, d in pending:
        if key in ("axiom", "goal", "expect-lemma"):
            if len(d) != 2:
                raise ParseError("%s takes one formula" % key, d)
            f = b.formula(d[1], {}, allow_forall=True, int_binders=(key == "expect-lemma"))
            if key == "axiom":
                axioms.append(f)
            elif key == "expect-lemma":
                expected.append(f)
            else:
                if goal is not None:
                    raise ParseError("more than one goal", d)
                goal = f
        elif key == "grammar":
            grammar.extend(_grammar(d[1:], b, {r.name: r for r in recdefs}))
    if goal is None:
        raise ParseError("no goal declared")
    return Problem(sig, tuple(recdefs), tuple(axioms), goal, tuple(grammar),
                   tuple(expected), name, provenance)


def _unquote(s: str) -> str:
    return s[1:-1] if len(s) >= 2 and s[0] == s[-1] == '"' else s


def _declare(d, consts, funcs, rels) -> None:
    if len(d) < 3:
        raise ParseError("malformed declaration", d)
    n = _sym(d[1], "name")
    if n in consts or n in funcs or n in rels:
        raise DuplicateDefinitionError("%s declared twice" % n, d)


def _grammar(entries, b: _Builder, defs: dict) -> list:
    out = []
    for e in entries:
        if not isinstance(e, list) or not e:
            raise ParseError("malformed grammar entry", e)
        key = _sym(e[0], "grammar key")
        if key not in GRAMMAR_KEYS:
            raise ParseError("unknown grammar key %s" % key, e)
        if key in ("depth", "max-size", "tuple-limit"):
            out.append((key, int(_sym(e[1], "integer"))))
        elif key == "vocabulary":
            out.append((key, _sym(e[1], "vocabulary mode")))
        elif key == "atoms":
            head = _sym(e[1], "head relation")
            if head not in defs:
                raise ParseError("atoms given for %s, which has no recursive definition" % head, e)
            env = {p.name: p for p in defs[head].params}
            out.append((key, head, tuple(b.formula(a, env) for a in e[2:])))
        else:
            out.append((key, tuple(_sym(a, "name") for a in e[1:])))
    return out


def print_problem(p: Problem) -> str:
    """Render ``p`` in the problem-file syntax (inverse of parse_problem)."""
    lines = []
    if p.name:
        lines.append("(problem %s)" % p.name)
    if p.provenance:
        lines.append('(provenance "%s")' % p.provenance.replace('"', "'"))
    sig = p.signature
    lines.append("(foreground-sort %s)" % sig.fg_sort)
    defined = p.recursive_symbols()
    for c, s in sig.consts.items():
        lines.append("(const %s %s)" % (c, s))
    for f, (args, res) in sig.funcs.items():
        if f not in defined:
            lines.append("(func %s (%s) %s)" % (f, " ".join(args), res))
    for r, args in sig.rels.items():
        if r not in defined:
            lines.append("(pred %s (%s))" % (r, " ".join(args)))
    for d in p.recdefs:
        lines.append(str(d))
    for a in p.axioms:
        lines.append("(axiom %s)" % a)
    lines.append("(goal %s)" % p.goal)
    for e in p.expected:
        lines.append("(expect-lemma %s)" % e)
    if p.grammar:
        parts = []
        for entry in p.grammar:
            if entry[0] == "atoms":
                parts.append("(atoms %s %s)" % (entry[1], " ".join(map(str, entry[2]))))
            elif isinstance(entry[1], tuple):
                parts.append("(%s %s)" % (entry[0], " ".join(entry[1])))
            else:
                parts.append("(%s %s)" % entry)
        lines.append("(grammar %s)" % " ".join(parts))
    return "\n".join(lines) + "\n"


def parse_formula(text: str, sig: Signature, env: dict | None = None):
    """Parse a single (possibly universal) formula against ``sig``."""
    try:
        x = parse_all(text)
    except SexprError as e:
        raise ParseError(str(e)) from None
    if len(x) != 1:
        raise ParseError("expected one formula")
    return _Builder(sig, set()).formula(x[0], dict(env or {}), allow_forall=True, int_binders=True)


def parse_term(text: str, sig: Signature, env: dict | None = None):
    try:
        x = parse_all(text)
    except SexprError as e:
        raise ParseError(str(e)) from None
    return _Builder(sig, set()).term(x[0], dict(env or {}))


__all__ = ["ParseError", "PositivityError", "DuplicateDefinitionError", "parse_problem",
           "print_problem", "parse_formula", "parse_term", "dumps", "SList", "Sym", "BoolConst"]
