"""Lemma proposals: grammar, fair enumeration, model-based filtering and
SyGuS-IF output.

Candidates are lemmas ``forall x. R(x) -> psi(x)``.  The enumerator emits
them by increasing body size, then head order, then a fixed body order, so
the prefix before any candidate depends only on the grammar.

Filtering works on finite models.  For each (model, head) pair the truth of
every grammar atom over all argument tuples is stored as two bitmasks
(definitely true, definitely false); bodies are then evaluated with
strong-Kleene bit operations.
"""

from __future__ import annotations

import itertools
import logging
import weakref
from dataclasses import dataclass, field

from . import logic as L
from .induction import pfp_matrix
from .logic import (
    And, App, Atom, BgAtom, Eq, Iff, Implies, IntLit, Ite, Lemma, LogicError, Not, Op, Or,
    RecDef, Var,
)
from .models import BOTTOM, FiniteModel, build_universal_model, eval_formula, eval_term
from .sexpr import SexprError, dumps, parse_all

log = logging.getLogger(__name__)

CONNECTIVES = ("not", "and", "or", "=>", "iff", "ite")
DEFAULT_CONNECTIVES = ("not", "and", "or", "=>", "ite")
_OP_OF = {"and": "&", "or": "|", "=>": "=>", "iff": "<=>"}


# ---------------------------------------------------------------------------
# Grammar
# ---------------------------------------------------------------------------


@dataclass
class LemmaGrammar:
    heads: tuple                   # relation RecDefs usable as lemma heads
    atoms: dict                    # head name -> tuple of atomic formulas over the head's params
    connectives: tuple = DEFAULT_CONNECTIVES
    max_size: int = 3
    depth: int = 1
    tuple_limit: int = 20000

    def head_index(self, name: str) -> int:
        for i, d in enumerate(self.heads):
            if d.name == name:
                return i
        raise KeyError(name)

    def head(self, name: str) -> RecDef:
        return self.heads[self.head_index(name)]

    @classmethod
    def from_problem(cls, lowered, entries=None, **overrides) -> "LemmaGrammar":
        """Grammar from the problem's ``(grammar ...)`` entries plus keyword overrides."""
        p = lowered.problem
        sig = lowered.signature
        fg = sig.fg_sort
        cfg = {"depth": 1, "max-size": 3, "connectives": DEFAULT_CONNECTIVES, "tuple-limit": 20000}
        extras: dict = {}
        for e in (p.grammar if entries is None else entries):
            if e[0] == "atoms":
                extras.setdefault(e[1], []).extend(e[2])
            else:
                cfg[e[0]] = e[1]
        for k, v in overrides.items():
            if v is not None:
                cfg[k.replace("_", "-")] = v
        depth = int(cfg["depth"])
        if not 0 <= depth <= 2:
            raise ValueError("grammar depth must be 0, 1 or 2")
        defs = {d.name: d for d in lowered.rel_defs}
        head_names = cfg.get("heads") or tuple(defs)
        for h in head_names:
            if h not in defs:
                raise ValueError("grammar head %s has no recursive definition" % h)
        heads = tuple(defs[h] for h in head_names)
        if "constants" in cfg:
            consts = [c for c in cfg["constants"]]
            for c in consts:
                if sig.consts.get(c) != fg:
                    raise ValueError("grammar constant %s is not a foreground constant" % c)
        else:
            consts = _definition_constants(lowered)
        funcs = list(cfg.get("functions") or sig.fg_functions())
        for f in funcs:
            if f not in sig.fg_functions():
                raise ValueError("grammar function %s is not a foreground function" % f)
        if "relations" in cfg:
            rels = list(cfg["relations"])
        else:
            rels = [d.name for d in lowered.rel_defs] + sorted(r for r in sig.rels if r not in defs)
        for c in cfg["connectives"]:
            if c not in CONNECTIVES:
                raise ValueError("unknown connective %s" % c)
        explicit = cfg.get("vocabulary") == "explicit"
        atoms = {}
        for d in heads:
            generated = () if explicit else _atoms_for(d, sig, consts, funcs, rels, depth)
            extra = tuple(a for a in extras.get(d.name, ()) if a not in generated)
            atoms[d.name] = tuple(generated) + extra
        return cls(heads, atoms, tuple(cfg["connectives"]), int(cfg["max-size"]), depth,
                   int(cfg["tuple-limit"]))


def _definition_constants(lowered) -> list:
    fg = lowered.signature.fg_sort
    found = set()
    for f in list(lowered.problem.axioms) + [d.body for d in lowered.rel_defs] + \
            [d.body for d in lowered.fun_defs]:
        found |= {c.fn for c in L.constants_in(f) if c.sort == fg}
    return sorted(found)


def _term_pool(vars_, consts, funcs, sig, depth) -> list:
    fg = sig.fg_sort
    pool = list(vars_) + [App(c, (), fg) for c in sorted(consts)]
    for _ in range(depth):
        new = []
        for f in funcs:
            arity = len(sig.funcs[f][0])
            for args in itertools.product(pool, repeat=arity):
                t = App(f, args, fg)
                if L.term_depth(t, fg) <= depth and t not in pool and t not in new:
                    new.append(t)
        pool += new
    return sorted(pool, key=lambda t: (L.term_depth(t, fg), isinstance(t, App) and not t.args, str(t)))


def _atoms_for(d: RecDef, sig, consts, funcs, rels, depth) -> tuple:
    fg = sig.fg_sort
    fg_vars = [v for v in d.params if v.sort == fg]
    int_vars = [v for v in d.params if v.sort == L.INT]
    pool = _term_pool(fg_vars, consts, funcs, sig, depth)
    out = []
    for a, b in itertools.combinations(pool, 2):
        out.append(Eq(a, b))
    head = d.head()
    for r in rels:
        doms = []
        for s in sig.rels[r]:
            doms.append(pool if s == fg else int_vars if s == L.INT else [])
        for args in itertools.product(*doms):
            at = Atom(r, tuple(args))
            if at != head:
                out.append(at)
    return tuple(out)


# ---------------------------------------------------------------------------
# Bodies: index trees over a head's atoms
# ---------------------------------------------------------------------------
#   ("T",) ("F",) ("A", i) ("N", i) ("&", b, ...) ("|", b, ...) ("=>", a, b)
#   ("<=>", a, b) ("ite", c, a, b)

TRUE_B, FALSE_B = ("T",), ("F",)


def body_size(b) -> int:
    if b[0] in ("T", "F", "A"):
        return 1
    if b[0] == "N":
        return 2
    kids = b[1:]
    return 1 * (len(kids) - 1 if b[0] in ("&", "|") else 1) + sum(body_size(k) for k in kids)


def canon(b):
    """Cheap normal form: sorted commutative arguments, idempotence, trivial implications."""
    tag = b[0]
    if tag in ("T", "F", "A", "N"):
        return b
    if tag in ("&", "|"):
        args = []
        for k in b[1:]:
            k = canon(k)
            args.extend(k[1:] if k[0] == tag else (k,))
        unit, zero = (TRUE_B, FALSE_B) if tag == "&" else (FALSE_B, TRUE_B)
        if zero in args:
            return zero
        args = sorted(set(a for a in args if a != unit))
        if not args:
            return unit
        return args[0] if len(args) == 1 else (tag,) + tuple(args)
    if tag == "=>":
        a, c = canon(b[1]), canon(b[2])
        if a == c or c == TRUE_B or a == FALSE_B:
            return TRUE_B
        if a == TRUE_B:
            return c
        return ("=>", a, c)
    if tag == "<=>":
        a, c = canon(b[1]), canon(b[2])
        if a == c:
            return TRUE_B
        return ("<=>",) + tuple(sorted((a, c)))
    if tag == "ite":
        c, a, e = canon(b[1]), canon(b[2]), canon(b[3])
        if a == e:
            return a
        if c == TRUE_B:
            return a
        if c == FALSE_B:
            return e
        return ("ite", c, a, e)
    raise ValueError("bad body %r" % (b,))


def body_formula(b, atoms):
    tag = b[0]
    if tag == "T":
        return L.TRUE
    if tag == "F":
        return L.FALSE
    if tag == "A":
        return atoms[b[1]]
    if tag == "N":
        return Not(atoms[b[1]])
    kids = [body_formula(k, atoms) for k in b[1:]]
    if tag == "&":
        return And(tuple(kids))
    if tag == "|":
        return Or(tuple(kids))
    if tag == "=>":
        return Implies(*kids)
    if tag == "<=>":
        return Iff(*kids)
    return Ite(*kids)


@dataclass(frozen=True)
class Candidate:
    lemma: Lemma
    head_index: int
    size: int
    body: tuple            # canonical index tree

    @property
    def key(self) -> tuple:
        return (self.lemma.head, self.body)

    def __str__(self) -> str:
        return str(self.lemma)


def _compound(conn, sizes, size):
    """Bodies of exactly ``size`` built from smaller cached body lists."""
    ops = [_OP_OF[c] for c in ("and", "or", "=>", "iff") if c in conn]
    for op in ops:
        for s1 in range(1, size - 1):
            s2 = size - 1 - s1
            if s1 not in sizes or s2 not in sizes:
                continue
            for a in sizes[s1]:
                for b in sizes[s2]:
                    yield (op, a, b)
    if "ite" in conn:
        for s1 in range(1, size - 2):
            for s2 in range(1, size - 1 - s1):
                s3 = size - 1 - s1 - s2
                if s3 < 1 or any(s not in sizes for s in (s1, s2, s3)):
                    continue
                for c in sizes[s1]:
                    for a in sizes[s2]:
                        for b in sizes[s3]:
                            yield ("ite", c, a, b)


def _raw_bodies(n_atoms: int, size: int, conn, sizes: dict):
    if size == 1:
        yield TRUE_B
        yield FALSE_B
        for i in range(n_atoms):
            yield ("A", i)
    elif size == 2:
        if "not" in conn:
            for i in range(n_atoms):
                yield ("N", i)
    else:
        yield from _compound(conn, sizes, size)


def enumerate_candidates(g: LemmaGrammar, max_size: int | None = None):
    """Fair stream of candidates: by body size, then head order, then body order."""
    top = g.max_size if max_size is None else max_size
    leaves: dict = {d.name: {} for d in g.heads}
    seen: dict = {d.name: set() for d in g.heads}
    for size in range(1, top + 1):
        for hi, d in enumerate(g.heads):
            atoms = g.atoms[d.name]
            cache = leaves[d.name]
            keep = size < top
            bucket = []
            for raw in _raw_bodies(len(atoms), size, g.connectives, cache):
                if keep and raw not in (TRUE_B, FALSE_B):
                    bucket.append(raw)
                b = canon(raw)
                if b in seen[d.name]:
                    continue
                seen[d.name].add(b)
                if body_size(b) < size and b not in (TRUE_B, FALSE_B):
                    # a smaller equivalent that was never emitted on its own
                    pass
                yield Candidate(Lemma(d.name, d.params, body_formula(b, atoms)), hi, size, b)
            if keep:
                cache[size] = bucket


# ---------------------------------------------------------------------------
# Bitmask views of models
# ---------------------------------------------------------------------------


def _mask_of(model: FiniteModel, f, params, tuples) -> tuple:
    t = fl = 0
    for i, tup in enumerate(tuples):
        v = eval_formula(model, f, dict(zip(params, tup)))
        if v is True:
            t |= 1 << i
        elif v is False:
            fl |= 1 << i
    return t, fl


def _not(m):
    return m[1], m[0]


def _and(a, b):
    return a[0] & b[0], a[1] | b[1]


def _or(a, b):
    return a[0] | b[0], a[1] & b[1]


def _implies(a, b):
    return _or(_not(a), b)


def _iff(a, b):
    return (a[0] & b[0]) | (a[1] & b[1]), (a[0] & b[1]) | (a[1] & b[0])


def _ite(c, a, b):
    return ((c[0] & a[0]) | (c[1] & b[0]) | (a[0] & b[0]),
            (c[0] & a[1]) | (c[1] & b[1]) | (a[1] & b[1]))


def _permute(mask: int, groups: dict) -> int:
    out = 0
    while mask:
        low = mask & -mask
        out |= groups.get(low.bit_length() - 1, 0)
        mask ^= low
    return out


class ModelView:
    """Truth of a head's grammar atoms over the argument tuples of one model."""

    def __init__(self, model: FiniteModel, head: RecDef, atoms, elements=None, tuple_limit: int = 20000):
        self.model = model
        self.head = head
        self.params = head.params
        fg = model.fg_sort
        elems = model.core_elements() if elements is None else elements
        doms = [elems if p.sort == fg else model.ints for p in head.params]
        count = 1
        for dmn in doms:
            count *= len(dmn)
        if count > tuple_limit:
            log.warning("model %s has %d tuples for %s; using the first %d",
                        model.label, count, head.name, tuple_limit)
        self.tuples = list(itertools.islice(itertools.product(*doms), tuple_limit))
        self.index = {t: i for i, t in enumerate(self.tuples)}
        self.full = (1 << len(self.tuples)) - 1
        self.atom_formulas = atoms
        self._atoms: dict = {}
        self.head_mask = self.mask(head.head())
        self._rho = None
        self._body_cache: dict = {}

    def mask(self, f) -> tuple:
        return _mask_of(self.model, f, self.params, self.tuples)

    def atom(self, i: int) -> tuple:
        m = self._atoms.get(i)
        if m is None:
            m = self._atoms[i] = self.mask(self.atom_formulas[i])
        return m

    def body(self, b) -> tuple:
        tag = b[0]
        if tag == "T":
            return self.full, 0
        if tag == "F":
            return 0, self.full
        if tag == "A":
            return self.atom(b[1])
        if tag == "N":
            return _not(self.atom(b[1]))
        hit = self._body_cache.get(b)
        if hit is not None:
            return hit
        kids = [self.body(k) for k in b[1:]]
        if tag == "&":
            out = kids[0]
            for k in kids[1:]:
                out = _and(out, k)
        elif tag == "|":
            out = kids[0]
            for k in kids[1:]:
                out = _or(out, k)
        elif tag == "=>":
            out = _implies(*kids)
        elif tag == "<=>":
            out = _iff(*kids)
        else:
            out = _ite(*kids)
        if len(self._body_cache) < 50000:
            self._body_cache[b] = out
        return out

    # pre-fixpoint matrix ------------------------------------------------
    def _compile(self, f):
        R = self.head.name
        if R not in L.relations_in(f):
            return ("C", self.mask(f))
        if isinstance(f, Atom) and f.rel == R:
            groups: dict = {}
            for i, tup in enumerate(self.tuples):
                env = dict(zip(self.params, tup))
                vals = tuple(eval_term(self.model, a, env) for a in f.args)
                k = self.index.get(vals, -1) if None not in vals else -1
                if k >= 0:
                    groups[k] = groups.get(k, 0) | (1 << i)
            return ("R", groups, self.mask(f))
        if isinstance(f, Not):
            return ("N", self._compile(f.arg))
        if isinstance(f, And):
            return ("&",) + tuple(self._compile(a) for a in f.args)
        if isinstance(f, Or):
            return ("|",) + tuple(self._compile(a) for a in f.args)
        if isinstance(f, Implies):
            return ("=>", self._compile(f.lhs), self._compile(f.rhs))
        if isinstance(f, Iff):
            return ("<=>", self._compile(f.lhs), self._compile(f.rhs))
        if isinstance(f, Ite):
            return ("ite", self._compile(f.cond), self._compile(f.then), self._compile(f.els))
        raise LogicError("unexpected recursive occurrence in %s" % f)

    def _run(self, node, psi):
        tag = node[0]
        if tag == "C":
            return node[1]
        if tag == "R":
            _, groups, own = node
            p = (_permute(psi[0], groups), _permute(psi[1], groups))
            return _and(p, own)
        kids = [self._run(k, psi) for k in node[1:]]
        if tag == "N":
            return _not(kids[0])
        if tag == "&":
            out = kids[0]
            for k in kids[1:]:
                out = _and(out, k)
            return out
        if tag == "|":
            out = kids[0]
            for k in kids[1:]:
                out = _or(out, k)
            return out
        if tag == "=>":
            return _implies(*kids)
        if tag == "<=>":
            return _iff(*kids)
        return _ite(*kids)

    def pfp_false(self, body) -> int:
        """Tuples where the pre-fixpoint matrix for ``body`` is definitely false."""
        if self._rho is None:
            self._rho = self._compile(self.head.body)
        psi = self.body(body)
        rho = self._run(self._rho, psi)
        return rho[0] & psi[1]


# ---------------------------------------------------------------------------
# Constraints and filtering
# ---------------------------------------------------------------------------


@dataclass
class SynthesisConstraints:
    pseudomodel: FiniteModel | None = None
    countermodels: dict = field(default_factory=dict)    # head -> [FiniteModel]
    skolem_tuples: dict = field(default_factory=dict)    # head -> [element tuple in pseudomodel]
    true_models: list = field(default_factory=list)

    def reset_inductive(self) -> None:
        self.countermodels.clear()
        self.skolem_tuples.clear()

    def add_countermodel(self, head: str, m: FiniteModel) -> None:
        self.countermodels.setdefault(head, []).append(m)

    def models(self) -> list:
        out = [self.pseudomodel] if self.pseudomodel is not None else []
        for ms in self.countermodels.values():
            out.extend(ms)
        return out + list(self.true_models)


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    constraint: str | None = None    # "a", "b" or "c" when rejected

    def __str__(self) -> str:
        return "accept" if self.accepted else "reject(%s)" % self.constraint


ACCEPT = Verdict(True)


class CandidateFilter:
    """Fast constraint checks for grammar candidates."""

    def __init__(self, grammar: LemmaGrammar):
        self.g = grammar
        self._views: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()

    def view(self, model: FiniteModel, head: str, all_elements: bool = False) -> ModelView:
        per = self._views.setdefault(model, {})
        key = (head, all_elements)
        v = per.get(key)
        if v is None:
            d = self.g.head(head)
            v = per[key] = ModelView(model, d, self.g.atoms[head],
                                     model.elements if all_elements else None, self.g.tuple_limit)
        return v

    def check_a(self, c: Candidate, pseudomodel: FiniteModel) -> bool:
        v = self.view(pseudomodel, c.lemma.head)
        return bool(v.head_mask[0] & v.body(c.body)[1])

    def check_b(self, c: Candidate, countermodels) -> bool:
        for m in countermodels:
            if self.view(m, c.lemma.head).pfp_false(c.body):
                return False
        return True

    def check_b_skolem(self, c: Candidate, pseudomodel: FiniteModel, tuples) -> bool:
        if not tuples:
            return True
        v = self.view(pseudomodel, c.lemma.head)
        bad = v.pfp_false(c.body)
        for tup in tuples:
            i = v.index.get(tuple(tup))
            if i is not None and (bad >> i) & 1:
                return False
        return True

    def check_c(self, c: Candidate, true_models) -> bool:
        for m in true_models:
            v = self.view(m, c.lemma.head, all_elements=True)
            if v.head_mask[0] & ~v.body(c.body)[0] & v.full:
                return False
        return True

    def verdict(self, c: Candidate, C: SynthesisConstraints) -> Verdict:
        if C.pseudomodel is not None and not self.check_a(c, C.pseudomodel):
            return Verdict(False, "a")
        if not self.check_c(c, C.true_models):
            return Verdict(False, "c")
        if not self.check_b(c, C.countermodels.get(c.lemma.head, ())):
            return Verdict(False, "b")
        if C.pseudomodel is not None and not self.check_b_skolem(
                c, C.pseudomodel, C.skolem_tuples.get(c.lemma.head, ())):
            return Verdict(False, "b")
        return ACCEPT


def _tuples(m: FiniteModel, params, elements) -> list:
    doms = [elements if p.sort == m.fg_sort else m.ints for p in params]
    return list(itertools.product(*doms))


def filter_candidate(lemma: Lemma, C: SynthesisConstraints, defs) -> Verdict:
    """Reference implementation of the three constraints by direct evaluation."""
    head = L.Atom(lemma.head, lemma.vars)
    if C.pseudomodel is not None:
        m = C.pseudomodel
        ok = any(eval_formula(m, head, dict(zip(lemma.vars, t))) is True
                 and eval_formula(m, lemma.body, dict(zip(lemma.vars, t))) is False
                 for t in _tuples(m, lemma.vars, m.core_elements()))
        if not ok:
            return Verdict(False, "a")
    imp = Implies(head, lemma.body)
    for g in C.true_models:
        if any(eval_formula(g, imp, dict(zip(lemma.vars, t))) is not True
               for t in _tuples(g, lemma.vars, g.elements)):
            return Verdict(False, "c")
    matrix = pfp_matrix(lemma, defs)
    for m in C.countermodels.get(lemma.head, ()):
        if any(eval_formula(m, matrix, dict(zip(lemma.vars, t))) is False
               for t in _tuples(m, lemma.vars, m.core_elements())):
            return Verdict(False, "b")
    if C.pseudomodel is not None:
        for t in C.skolem_tuples.get(lemma.head, ()):
            if eval_formula(C.pseudomodel, matrix, dict(zip(lemma.vars, t))) is False:
                return Verdict(False, "b")
    return ACCEPT


# ---------------------------------------------------------------------------
# SyGuS-IF output
# ---------------------------------------------------------------------------


def _sym(name: str) -> str:
    from .smt import mangle
    return mangle(name)


class _SygusWriter:
    def __init__(self, u, sig):
        self.u = u
        self.sig = sig
        self.fg = sig.fg_sort
        self.idx = {e: i for i, e in enumerate(u.elements)}
        self.bot = self.idx[BOTTOM]
        ints = [0]
        for m in u.members:
            ints.extend(m.ints)
            for t in m.funcs.values():
                ints.extend(v for v in t.values() if isinstance(v, int) and not isinstance(v, bool))
        self.bot_int = min(ints) - 1

    def enc(self, v, sort):
        if sort == self.fg:
            return str(self.idx.get(v, self.bot))
        if sort == L.INT:
            v = self.bot_int if v is BOTTOM or v is None else v
            return str(v) if v >= 0 else "(- %d)" % -v
        if sort == L.BOOL:
            return "true" if v is True else "false"
        raise ValueError(sort)

    def lookup(self, params, table, default: str) -> str:
        body = default
        for key, val in sorted(table.items(), key=lambda kv: str(kv[0]), reverse=True):
            conds = ["(= %s %s)" % (p, k) for p, k in zip(params, key)]
            cond = conds[0] if len(conds) == 1 else "(and %s)" % " ".join(conds)
            body = "(ite %s %s %s)" % (cond, val, body)
        return body

    def definitions(self) -> list:
        out = []
        owner = {str(i): str(e[0]) for e, i in self.idx.items() if e is not BOTTOM}
        out.append("(define-fun %s ((w Int)) Int %s)" % (
            _sym("model-of"), self.lookup(["w"], {(k,): v for k, v in owner.items()}, "(- 1)")))
        for c, s in sorted(self.sig.consts.items()):
            if s not in (self.fg, L.INT):
                out.append("; constant %s of sort %s omitted" % (c, s))
                continue
            table = {(str(i),): self.enc(v, s) for i, v in enumerate(self.u.consts[c])}
            default = self.enc(BOTTOM, s)
            out.append("(define-fun %s ((w Int)) %s %s" % (_sym(c), "Int", self.lookup(
                ["(%s w)" % _sym("model-of")], table, default)) + ")")
        for f, (args, res) in sorted(self.sig.funcs.items()):
            if res not in (self.fg, L.INT) or any(a not in (self.fg, L.INT) for a in args):
                out.append("; function %s omitted" % f)
                continue
            params = ["a%d" % i for i in range(len(args))]
            table = {tuple(self.enc(a, s) for a, s in zip(k, args)): self.enc(v, res)
                     for k, v in self.u.funcs[f].items()}
            out.append("(define-fun %s (%s) Int %s)" % (
                _sym(f), " ".join("(%s Int)" % p for p in params), self.lookup(params, table, self.enc(BOTTOM, res))))
        for r, args in sorted(self.sig.rels.items()):
            if any(a not in (self.fg, L.INT) for a in args):
                out.append("; relation %s omitted" % r)
                continue
            params = ["a%d" % i for i in range(len(args))]
            table = {tuple(self.enc(a, s) for a, s in zip(k, args)): "true"
                     for k, v in self.u.rels[r].items() if v is True}
            out.append("(define-fun %s (%s) Bool %s)" % (
                _sym(r), " ".join("(%s Int)" % p for p in params), self.lookup(params, table, "false")))
        return out

    def term(self, t, env: dict, anchor: str) -> str:
        if isinstance(t, Var):
            return env[t]
        if isinstance(t, IntLit):
            return str(t.value) if t.value >= 0 else "(- %d)" % -t.value
        if isinstance(t, App):
            if not t.args:
                return "(%s %s)" % (_sym(t.fn), anchor)
            return "(%s %s)" % (_sym(t.fn), " ".join(self.term(a, env, anchor) for a in t.args))
        if isinstance(t, Op) and t.op in ("+", "-"):
            return "(%s %s)" % (t.op, " ".join(self.term(a, env, anchor) for a in t.args))
        raise ValueError("term %s has no SyGuS encoding" % t)

    def formula(self, f, env: dict, anchor: str, rhs=None) -> str:
        if isinstance(f, L.BoolConst):
            return "true" if f.value else "false"
        if isinstance(f, Atom):
            return "(%s %s)" % (_sym(f.rel), " ".join(self.term(a, env, anchor) for a in f.args))
        if isinstance(f, Eq):
            return "(= %s %s)" % (self.term(f.lhs, env, anchor), self.term(f.rhs, env, anchor))
        if isinstance(f, BgAtom):
            if f.op in ("member", "subset"):
                raise ValueError("set atoms have no SyGuS encoding")
            return "(%s %s %s)" % (f.op, self.term(f.args[0], env, anchor), self.term(f.args[1], env, anchor))
        if isinstance(f, Not):
            return "(not %s)" % self.formula(f.arg, env, anchor, rhs)
        if isinstance(f, (And, Or)):
            op = "and" if isinstance(f, And) else "or"
            return "(%s %s)" % (op, " ".join(self.formula(a, env, anchor, rhs) for a in f.args))
        if isinstance(f, Implies):
            return "(=> %s %s)" % (self.formula(f.lhs, env, anchor, rhs), self.formula(f.rhs, env, anchor, rhs))
        if isinstance(f, Iff):
            return "(= %s %s)" % (self.formula(f.lhs, env, anchor, rhs), self.formula(f.rhs, env, anchor, rhs))
        if isinstance(f, Ite):
            return "(ite %s %s %s)" % tuple(self.formula(x, env, anchor, rhs) for x in (f.cond, f.then, f.els))
        if isinstance(f, _RhsCall):
            return rhs(f, env, anchor)
        raise ValueError("formula %s has no SyGuS encoding" % f)


@dataclass(frozen=True)
class _RhsCall:
    args: tuple


def emit_sygus(C: SynthesisConstraints, g: LemmaGrammar, sig, defs=None) -> str:
    """SyGuS-IF v2 query whose solutions are lemmas meeting the constraints.

    All constraint models are packed into one universal model; foreground
    elements become integers, ``lemmalhs`` picks the head and ``lemmarhs``
    the body.
    """
    models = C.models()
    if not models:
        raise ValueError("no models to encode")
    u = build_universal_model(models, sig)
    w = _SygusWriter(u, sig)
    member = {id(m): i for i, m in enumerate(models)}
    arity = max(len(d.params) for d in g.heads)
    xs = ["x%d" % i for i in range(arity)]
    lines = ["; lemma synthesis query", "(set-logic ALL)"]
    lines += w.definitions()

    # grammar: atoms of every head, variables renamed by position
    atoms = []
    for d in g.heads:
        env = {p: xs[i] for i, p in enumerate(d.params)}
        for a in g.atoms[d.name]:
            try:
                s = w.formula(a, env, xs[0])
            except ValueError:
                continue
            if s not in atoms:
                atoms.append(s)
    heads = " ".join(str(i) for i in range(len(g.heads)))
    lines.append("(synth-fun lemmalhs () Int ((I Int)) ((I Int (%s))))" % heads)
    ops = []
    if "and" in g.connectives:
        ops.append("(and B B)")
    if "or" in g.connectives:
        ops.append("(or B B)")
    if "=>" in g.connectives:
        ops.append("(=> B B)")
    if "iff" in g.connectives:
        ops.append("(= B B)")
    if "ite" in g.connectives:
        ops.append("(ite B B B)")
    if "not" in g.connectives:
        ops.append("(not A)")
    lines.append("(synth-fun lemmarhs (%s) Bool ((B Bool) (A Bool)) ((B Bool (A %s)) (A Bool (true false %s))))" % (
        " ".join("(%s Int)" % x for x in xs), " ".join(ops), " ".join(atoms)))

    def pad(vals):
        vals = list(vals)
        return vals + [vals[0]] * (arity - len(vals))

    def rhs_call(vals):
        return "(lemmarhs %s)" % " ".join(pad(vals))

    def enc_tuple(i, d, tup):
        return [w.enc((i, v) if p.sort == sig.fg_sort else v, p.sort) for p, v in zip(d.params, tup)]

    # usefulness on the pseudomodel
    pm = C.pseudomodel
    if pm is not None:
        disj = []
        i = member[id(pm)]
        for hi, d in enumerate(g.heads):
            for tup in _tuples(pm, d.params, pm.core_elements()):
                vals = enc_tuple(i, d, tup)
                disj.append("(and (= lemmalhs %d) (%s %s) (not %s))" % (
                    hi, _sym(d.name), " ".join(vals), rhs_call(vals)))
        if disj:
            lines.append("(constraint (or %s))" % " ".join(disj))

    # pre-fixpoint constraints on stored countermodels and Skolem tuples
    def pfp_conj(hi, d, m, tuples):
        i = member[id(m)]
        conj = []
        for tup in tuples:
            vals = enc_tuple(i, d, tup)
            env = dict(zip(d.params, vals))

            def repl(args, d=d):
                return And((_RhsCall(tuple(args)), Atom(d.name, tuple(args))))

            rho = L.substitute(d.body, d.name, repl)

            def rhs(call, env2, anchor):
                return rhs_call([w.term(a, env2, anchor) for a in call.args])

            conj.append("(=> %s %s)" % (w.formula(rho, env, vals[0], rhs), rhs_call(vals)))
        return conj

    for hi, d in enumerate(g.heads):
        for m in C.countermodels.get(d.name, ()):
            conj = pfp_conj(hi, d, m, _tuples(m, d.params, m.core_elements()))
            if conj:
                lines.append("(constraint (=> (= lemmalhs %d) (and %s)))" % (hi, " ".join(conj)))
        if pm is not None and C.skolem_tuples.get(d.name):
            conj = pfp_conj(hi, d, pm, C.skolem_tuples[d.name])
            lines.append("(constraint (=> (= lemmalhs %d) (and %s)))" % (hi, " ".join(conj)))

    # truth on true models
    for gm in C.true_models:
        i = member[id(gm)]
        for hi, d in enumerate(g.heads):
            conj = []
            for tup in _tuples(gm, d.params, gm.elements):
                vals = enc_tuple(i, d, tup)
                conj.append("(=> (%s %s) %s)" % (_sym(d.name), " ".join(vals), rhs_call(vals)))
            if conj:
                lines.append("(constraint (=> (= lemmalhs %d) (and %s)))" % (hi, " ".join(conj)))
    lines.append("(check-synth)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SyGuS-IF reader
# ---------------------------------------------------------------------------


class SygusError(Exception):
    pass


SYGUS_COMMANDS = ("set-logic", "define-fun", "synth-fun", "declare-var", "constraint", "check-synth",
                  "set-option")
_BUILTINS = {"and", "or", "not", "=>", "=", "ite", "<=", "<", ">=", ">", "+", "-", "true", "false"}


@dataclass
class SygusFile:
    logic: str = ""
    defines: dict = field(default_factory=dict)     # name -> (params, sort, body)
    synth: dict = field(default_factory=dict)       # name -> (params, sort, grammar)
    constraints: list = field(default_factory=list)
    order: list = field(default_factory=list)       # command order for printing


def parse_sygus(text: str) -> SygusFile:
    try:
        cmds = parse_all(text)
    except SexprError as e:
        raise SygusError(str(e)) from None
    sf = SygusFile()
    done = False
    for c in cmds:
        if not isinstance(c, list) or not c or c[0] not in SYGUS_COMMANDS:
            raise SygusError("unknown command %s" % dumps(c)[:60])
        if done:
            raise SygusError("command after check-synth")
        kind = str(c[0])
        if kind == "set-logic":
            sf.logic = str(c[1])
        elif kind == "define-fun":
            name = str(c[1])
            if name in sf.defines or name in sf.synth:
                raise SygusError("%s defined twice" % name)
            params = tuple((str(p[0]), dumps(p[1])) for p in c[2])
            sf.defines[name] = (params, dumps(c[3]), dumps(c[4]))
            _check_scope(c[4], sf, {p for p, _ in params})
        elif kind == "synth-fun":
            name = str(c[1])
            if name in sf.defines or name in sf.synth:
                raise SygusError("%s defined twice" % name)
            params = tuple((str(p[0]), dumps(p[1])) for p in c[2])
            sf.synth[name] = (params, dumps(c[3]), dumps(c[4]) + " " + dumps(c[5]) if len(c) > 5 else "")
        elif kind == "constraint":
            _check_scope(c[1], sf, set())
            sf.constraints.append(dumps(c[1]))
        elif kind == "check-synth":
            done = True
        sf.order.append(kind)
    if not done:
        raise SygusError("missing check-synth")
    return sf


def _check_scope(x, sf: SygusFile, bound: set) -> None:
    if isinstance(x, list):
        if not x:
            raise SygusError("empty application")
        head = x[0]
        if isinstance(head, list):
            raise SygusError("higher-order application")
        if head not in _BUILTINS and head not in sf.defines and head not in sf.synth:
            raise SygusError("undefined function %s" % head)
        for a in x[1:]:
            _check_scope(a, sf, bound)
    else:
        s = str(x)
        if s in _BUILTINS or s in bound or s in sf.synth or s in sf.defines:
            return
        if s.lstrip("-").isdigit():
            return
        raise SygusError("unbound symbol %s" % s)


def print_sygus(sf: SygusFile) -> str:
    lines = []
    if sf.logic:
        lines.append("(set-logic %s)" % sf.logic)
    for name, (params, sort, body) in sf.defines.items():
        lines.append("(define-fun %s (%s) %s %s)" % (
            name, " ".join("(%s %s)" % p for p in params), sort, body))
    for name, (params, sort, grammar) in sf.synth.items():
        lines.append("(synth-fun %s (%s) %s %s)" % (
            name, " ".join("(%s %s)" % p for p in params), sort, grammar))
    for c in sf.constraints:
        lines.append("(constraint %s)" % c)
    lines.append("(check-synth)")
    return "\n".join(lines) + "\n"


def sygus_holds(sf: SygusFile, lhs: int, rhs_params, rhs_body: str) -> bool:
    """Evaluate every constraint with ``lemmalhs := lhs`` and
    ``lemmarhs := lambda rhs_params. rhs_body`` (a SyGuS-syntax string)."""
    funcs = {n: (tuple(p for p, _ in params), parse_all(body)[0]) for n, (params, _, body) in sf.defines.items()}
    funcs["lemmarhs"] = (tuple(rhs_params), parse_all(rhs_body)[0])

    def ev(x, env):
        if not isinstance(x, list):
            s = str(x)
            if s in env:
                return env[s]
            if s == "true":
                return True
            if s == "false":
                return False
            if s == "lemmalhs":
                return lhs
            if s in funcs and not funcs[s][0]:
                return ev(funcs[s][1], {})
            return int(s)
        op = str(x[0])
        if op == "ite":
            return ev(x[2], env) if ev(x[1], env) else ev(x[3], env)
        if op == "and":
            return all(ev(a, env) for a in x[1:])
        if op == "or":
            return any(ev(a, env) for a in x[1:])
        if op == "=>":
            return (not ev(x[1], env)) or ev(x[2], env)
        args = [ev(a, env) for a in x[1:]]
        if op == "not":
            return not args[0]
        if op == "=":
            return args[0] == args[1]
        if op == "<=":
            return args[0] <= args[1]
        if op == "<":
            return args[0] < args[1]
        if op == ">=":
            return args[0] >= args[1]
        if op == ">":
            return args[0] > args[1]
        if op == "+":
            return sum(args)
        if op == "-":
            return -args[0] if len(args) == 1 else args[0] - args[1]
        params, body = funcs[op]
        return ev(body, dict(zip(params, args)))

    return all(ev(parse_all(c)[0], {}) for c in sf.constraints)
