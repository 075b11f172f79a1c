"""SMT-LIB2 solver client.

Each query runs in its own solver process.  Ground formulas are printed
with mangled identifiers, ``check-sat`` is issued, and on ``sat`` the
process stays alive behind a :class:`ModelHandle` so values can be read
back with ``get-value``.
"""

from __future__ import annotations

import itertools
import logging
import os
import select
import shutil
import subprocess
import time
from dataclasses import dataclass

from . import logic as L
from .logic import (
    And, App, Atom, BgAtom, BoolConst, Eq, Forall, Iff, Implies, IntLit, Ite, Not, Op, Or,
    Signature, TermIte, Var,
)
from .models import FiniteModel, SetRef
from .sexpr import SexprError, dumps, parse_all

log = logging.getLogger(__name__)

SAT, UNSAT, UNKNOWN = "sat", "unsat", "unknown"


class SolverError(Exception):
    """The solver is missing, crashed on startup, or rejected our input."""


class SolverNotFound(SolverError):
    pass


class SolverTimeout(Exception):
    pass


# ---------------------------------------------------------------------------
# Identifier mangling
# ---------------------------------------------------------------------------


def mangle(name: str) -> str:
    """Map any identifier to an SMT-LIB simple symbol; inverse is :func:`unmangle`."""
    out = ["U"]
    for ch in name:
        if ch == "_":
            out.append("__")
        elif ch.isascii() and ch.isalnum():
            out.append(ch)
        elif ord(ch) < 256:
            out.append("_%02x" % ord(ch))
        elif ord(ch) < 0x10000:
            out.append("_u%04x" % ord(ch))
        else:
            out.append("_U%06x" % ord(ch))
    return "".join(out)


def unmangle(sym: str) -> str:
    if not sym.startswith("U"):
        raise ValueError("not a mangled symbol: %s" % sym)
    s, i, out = sym[1:], 0, []
    while i < len(s):
        ch = s[i]
        if ch != "_":
            out.append(ch)
            i += 1
        elif s[i + 1] == "_":
            out.append("_")
            i += 2
        elif s[i + 1] == "u":
            out.append(chr(int(s[i + 2:i + 6], 16)))
            i += 6
        elif s[i + 1] == "U":
            out.append(chr(int(s[i + 2:i + 8], 16)))
            i += 8
        else:
            out.append(chr(int(s[i + 1:i + 3], 16)))
            i += 3
    return "".join(out)


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    command: tuple = ()
    timeout: float = 30.0
    logic: str = "ALL"
    seed: int | None = None
    set_encoding: str = "auto"     # "array" (z3), "native" (cvc5 finite sets) or "auto"
    dump_dir: str | None = None

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    @property
    def encoding(self) -> str:
        if self.set_encoding != "auto":
            return self.set_encoding
        exe = os.path.basename(self.command[0]) if self.command else ""
        return "native" if "cvc" in " ".join(self.command).lower() and "z3" not in exe else "array"

    @property
    def name(self) -> str:
        return os.path.basename(self.command[0]) if self.command else "?"


def find_solver(path: str | None = None) -> tuple:
    """Resolve a solver command line; ``path`` may name z3, cvc5 or a script."""
    cand = path or os.environ.get("LFPSYNTH_SOLVER") or "z3"
    exe = shutil.which(cand) or (cand if os.path.isfile(cand) and os.access(cand, os.X_OK) else None)
    if exe is None:
        raise SolverNotFound("SMT solver %r not found (set --solver or LFPSYNTH_SOLVER)" % cand)
    base = os.path.basename(exe)
    if base.startswith("z3"):
        return (exe, "-in", "-smt2")
    if base.startswith("cvc"):
        return (exe, "--lang=smt2", "--incremental", "--produce-models")
    return (exe,)


def default_config(path: str | None = None, timeout: float = 30.0, **kw) -> SolverConfig:
    return SolverConfig(find_solver(path), timeout, **kw)


def smt_sort(sort: str, sig: Signature, enc: str) -> str:
    if sort == sig.fg_sort:
        return mangle(sort)
    if sort == L.INT:
        return "Int"
    if sort == L.BOOL:
        return "Bool"
    if sort == L.SETINT:
        return "(Array Int Bool)" if enc == "array" else "(Set Int)"
    raise ValueError("unknown sort %s" % sort)


def _empty(enc: str) -> str:
    return "((as const (Array Int Bool)) false)" if enc == "array" else "(as set.empty (Set Int))"


def smt_term(t, enc: str) -> str:
    if isinstance(t, App):
        if not t.args:
            return mangle(t.fn)
        return "(%s %s)" % (mangle(t.fn), " ".join(smt_term(a, enc) for a in t.args))
    if isinstance(t, IntLit):
        return str(t.value) if t.value >= 0 else "(- %d)" % -t.value
    if isinstance(t, Op):
        args = [smt_term(a, enc) for a in t.args]
        if t.op in ("+", "-"):
            return "(%s %s)" % (t.op, " ".join(args))
        if t.op == "emptyset":
            return _empty(enc)
        if t.op == "singleton":
            if enc == "array":
                return "(store %s %s true)" % (_empty(enc), args[0])
            return "(set.singleton %s)" % args[0]
        if t.op == "union":
            if enc == "array":
                return "((_ map or) %s %s)" % tuple(args)
            return "(set.union %s %s)" % tuple(args)
    if isinstance(t, TermIte):
        return "(ite %s %s %s)" % (smt_formula(t.cond, enc), smt_term(t.then, enc), smt_term(t.els, enc))
    if isinstance(t, Var):
        raise ValueError("free variable %s in a solver query" % t.name)
    raise ValueError("cannot print %r" % (t,))


def smt_formula(f, enc: str) -> str:
    if isinstance(f, BoolConst):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        if not f.args:
            return mangle(f.rel)
        return "(%s %s)" % (mangle(f.rel), " ".join(smt_term(a, enc) for a in f.args))
    if isinstance(f, Eq):
        return "(= %s %s)" % (smt_term(f.lhs, enc), smt_term(f.rhs, enc))
    if isinstance(f, BgAtom):
        a, b = (smt_term(x, enc) for x in f.args)
        if f.op == "member":
            return "(select %s %s)" % (b, a) if enc == "array" else "(set.member %s %s)" % (a, b)
        if f.op == "subset":
            return "(subset %s %s)" % (a, b) if enc == "array" else "(set.subset %s %s)" % (a, b)
        return "(%s %s %s)" % (f.op, a, b)
    if isinstance(f, Not):
        return "(not %s)" % smt_formula(f.arg, enc)
    if isinstance(f, And):
        return "(and %s)" % " ".join(smt_formula(a, enc) for a in f.args)
    if isinstance(f, Or):
        return "(or %s)" % " ".join(smt_formula(a, enc) for a in f.args)
    if isinstance(f, Implies):
        return "(=> %s %s)" % (smt_formula(f.lhs, enc), smt_formula(f.rhs, enc))
    if isinstance(f, Iff):
        return "(= %s %s)" % (smt_formula(f.lhs, enc), smt_formula(f.rhs, enc))
    if isinstance(f, Ite):
        return "(ite %s %s %s)" % tuple(smt_formula(x, enc) for x in (f.cond, f.then, f.els))
    if isinstance(f, Forall):
        raise ValueError("quantified formula in a solver query: %s" % f)
    raise ValueError("cannot print %r" % (f,))


def build_script(assertions, sig: Signature, cfg: SolverConfig) -> str:
    enc = cfg.encoding
    lines = ["(set-option :produce-models true)"]
    if cfg.seed is not None and cfg.name.startswith("z3"):
        lines.append("(set-option :random-seed %d)" % cfg.seed)
    lines.append("(set-logic %s)" % cfg.logic)
    lines.append("(declare-sort %s 0)" % mangle(sig.fg_sort))
    for c, s in sorted(sig.consts.items()):
        lines.append("(declare-fun %s () %s)" % (mangle(c), smt_sort(s, sig, enc)))
    for f, (args, res) in sorted(sig.funcs.items()):
        lines.append("(declare-fun %s (%s) %s)" % (
            mangle(f), " ".join(smt_sort(a, sig, enc) for a in args), smt_sort(res, sig, enc)))
    for r, args in sorted(sig.rels.items()):
        lines.append("(declare-fun %s (%s) Bool)" % (mangle(r), " ".join(smt_sort(a, sig, enc) for a in args)))
    for a in assertions:
        lines.append("(assert %s)" % smt_formula(a, enc))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Process handling
# ---------------------------------------------------------------------------


def _complete_sexpr(buf: str):
    """Return (text, rest) if ``buf`` starts with a complete S-expression."""
    i, n = 0, len(buf)
    while i < n and buf[i] in " \t\r\n":
        i += 1
    if i >= n:
        return None
    if buf[i] != "(":
        j = i
        while j < n and buf[j] not in " \t\r\n()":
            j += 1
        if j >= n:
            return None
        return buf[i:j], buf[j:]
    depth, j = 0, i
    while j < n:
        ch = buf[j]
        if ch == '"':
            k = buf.find('"', j + 1)
            if k < 0:
                return None
            j = k
        elif ch == "|":
            k = buf.find("|", j + 1)
            if k < 0:
                return None
            j = k
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return buf[i:j + 1], buf[j + 1:]
        j += 1
    return None


class _Process:
    def __init__(self, cfg: SolverConfig):
        if not cfg.command:
            raise SolverNotFound("no solver command configured")
        try:
            self.proc = subprocess.Popen(
                list(cfg.command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, bufsize=0,
            )
        except OSError as e:
            raise SolverNotFound("cannot start %s: %s" % (cfg.command[0], e)) from None
        self.buf = ""
        self.fd = self.proc.stdout.fileno()

    def send(self, text: str) -> None:
        try:
            self.proc.stdin.write(text.encode())
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise OSError("solver pipe closed: %s" % e) from None

    def read(self, timeout: float) -> str:
        deadline = time.monotonic() + timeout
        while True:
            got = _complete_sexpr(self.buf)
            if got is not None:
                text, self.buf = got
                return text
            left = deadline - time.monotonic()
            if left <= 0:
                raise SolverTimeout()
            ready, _, _ = select.select([self.fd], [], [], left)
            if not ready:
                raise SolverTimeout()
            chunk = os.read(self.fd, 1 << 16)
            if not chunk:
                raise OSError("solver closed its output")
            self.buf += chunk.decode(errors="replace")

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.write(b"(exit)\n")
                self.proc.stdin.flush()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=0.5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        for s in (self.proc.stdin, self.proc.stdout):
            try:
                s.close()
            except OSError:
                pass


@dataclass
class SatResult:
    status: str
    handle: "ModelHandle | None" = None
    reason: str = ""
    seconds: float = 0.0

    @property
    def is_sat(self) -> bool:
        return self.status == SAT

    @property
    def is_unsat(self) -> bool:
        return self.status == UNSAT

    def close(self) -> None:
        if self.handle is not None:
            self.handle.close()
            self.handle = None

    def __enter__(self):
        return self

    def __exit__(self, *exc) -> None:
        self.close()


_dump_counter = itertools.count()


def check_sat(assertions, sig: Signature, cfg: SolverConfig) -> SatResult:
    """Decide the quantifier-free ``assertions``; SAT keeps the process open."""
    for a in assertions:
        if not L.is_quantifier_free(a):
            raise ValueError("assertions must be quantifier-free: %s" % a)
    script = build_script(assertions, sig, cfg)
    if cfg.dump_dir:
        os.makedirs(cfg.dump_dir, exist_ok=True)
        with open(os.path.join(cfg.dump_dir, "q%05d.smt2" % next(_dump_counter)), "w") as fh:
            fh.write(script + "(check-sat)\n")
    start = time.monotonic()
    proc = _Process(cfg)
    try:
        proc.send(script + "(check-sat)\n")
        answer = proc.read(cfg.timeout)
    except SolverTimeout:
        proc.close()
        return SatResult(UNKNOWN, reason="timeout", seconds=time.monotonic() - start)
    except OSError as e:
        proc.close()
        log.warning("solver i/o error: %s", e)
        return SatResult(UNKNOWN, reason="io-error", seconds=time.monotonic() - start)
    took = time.monotonic() - start
    if answer == SAT:
        return SatResult(SAT, ModelHandle(proc, sig, cfg), seconds=took)
    proc.close()
    if answer == UNSAT:
        return SatResult(UNSAT, seconds=took)
    if answer == UNKNOWN:
        return SatResult(UNKNOWN, reason="solver-said-unknown", seconds=took)
    raise SolverError("solver rejected the query: %s" % answer)


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


class ModelHandle:
    CHUNK = 400

    def __init__(self, proc: _Process, sig: Signature, cfg: SolverConfig):
        self.proc = proc
        self.sig = sig
        self.cfg = cfg
        self.enc = cfg.encoding

    def close(self) -> None:
        if self.proc is not None:
            self.proc.close()
            self.proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def get_values(self, smt_terms) -> list:
        """Values of the given SMT-LIB terms, as printed value strings."""
        if self.proc is None:
            raise SolverError("model handle is closed")
        out = []
        smt_terms = list(smt_terms)
        for i in range(0, len(smt_terms), self.CHUNK):
            chunk = smt_terms[i:i + self.CHUNK]
            self.proc.send("(get-value (%s))\n" % " ".join(chunk))
            try:
                text = self.proc.read(self.cfg.timeout)
            except (SolverTimeout, OSError) as e:
                raise SolverError("value query failed: %s" % (e or "timeout")) from None
            try:
                resp = parse_all(text)[0]
            except (SexprError, IndexError):
                raise SolverError("cannot parse solver values: %s" % text[:200]) from None
            if isinstance(resp, list) and resp and resp[0] == "error":
                raise SolverError("solver refused value query: %s" % dumps(resp))
            if len(resp) != len(chunk):
                raise SolverError("expected %d values, got %d" % (len(chunk), len(resp)))
            out.extend(dumps(pair[1]) for pair in resp)
        return out

    def eval_terms(self, terms) -> list:
        return self.get_values([smt_term(t, self.enc) for t in terms])

    def eval_formulas(self, formulas) -> list:
        vals = self.get_values([smt_formula(f, self.enc) for f in formulas])
        return [_bool(v) for v in vals]


def _int(v: str) -> int:
    v = v.strip()
    if v.startswith("("):
        items = parse_all(v)[0]
        if len(items) == 2 and items[0] == "-":
            return -_int(dumps(items[1]))
        raise SolverError("unexpected integer value %s" % v)
    return int(v)


def _bool(v: str) -> bool:
    if v == "true":
        return True
    if v == "false":
        return False
    raise SolverError("unexpected Boolean value %s" % v)


def _ground_subterms(formulas) -> set:
    out = set()
    for f in formulas:
        out |= L.ground_subterms(f)
    return out


def _ground_atoms(formulas) -> set:
    out = set()
    for f in formulas:
        for n in L.walk(f):
            if isinstance(n, Atom) and L.is_ground(n):
                out.add(n)
    return out


def extract_finite_model(h: ModelHandle, T, assertions=(), label: str = "") -> FiniteModel:
    """Read a finite partial model over the instantiation terms back from the solver.

    Elements are the classes of foreground terms (the terms of ``T`` and
    every ground foreground subterm of ``assertions``) under the solver's
    equality.  Relations are recorded on all tuples over the classes of
    ``T`` (the core) and at every ground atom of ``assertions``; functions
    on core tuples whose value is a known element.
    """
    sig = h.sig
    fg = sig.fg_sort
    subterms = _ground_subterms(assertions)
    fg_terms = list(T.terms) + sorted((t for t in subterms if t.sort == fg and t not in set(T.terms)), key=str)
    int_terms = sorted((t for t in subterms if t.sort == L.INT and not isinstance(t, IntLit)), key=str)
    set_terms = sorted((t for t in subterms if t.sort == L.SETINT), key=str)

    vals = h.eval_terms(fg_terms) if fg_terms else []
    cls: dict = {}          # solver value -> element id
    elem_of: dict = {}
    rep: dict = {}
    for t, v in zip(fg_terms, vals):
        if v not in cls:
            e = "e%d" % len(cls)
            cls[v] = e
            rep[e] = t
        elem_of[t] = cls[v]
    core = tuple(dict.fromkeys(elem_of[t] for t in T.terms))
    elements = tuple(rep)

    terms: dict = {str(t): elem_of[t] for t in fg_terms}
    ints = set()
    if int_terms:
        for t, v in zip(int_terms, h.eval_terms(int_terms)):
            terms[str(t)] = _int(v)
            ints.add(terms[str(t)])
    for f in subterms:
        if isinstance(f, IntLit):
            ints.add(f.value)

    funcs: dict = {}
    core_reps = [rep[e] for e in core]
    for fn, (args, res) in sorted(sig.funcs.items()):
        if any(a != fg for a in args) or res == L.SETINT:
            continue
        tuples = list(itertools.product(core_reps, repeat=len(args)))
        if not tuples:
            continue
        apps = [App(fn, tup, res) for tup in tuples]
        table = {}
        for tup, v in zip(tuples, h.eval_terms(apps)):
            key = tuple(elem_of[a] for a in tup)
            if res == fg:
                if v in cls:
                    table[key] = cls[v]
            elif res == L.INT:
                table[key] = _int(v)
                ints.add(table[key])
            elif res == L.BOOL:
                table[key] = _bool(v)
        funcs[fn] = table
    int_universe = tuple(sorted(ints))

    consts = {}
    for c, s in sig.consts.items():
        if s in (fg, L.INT) and c in terms:
            consts[c] = terms[c]

    # sets: membership over the Int universe
    set_members: dict = {}
    set_funcs = [(fn, args) for fn, (args, res) in sorted(sig.funcs.items())
                 if res == L.SETINT and all(a == fg for a in args)]
    for fn, args in set_funcs:
        for tup in itertools.product(core_reps, repeat=len(args)):
            t = App(fn, tup, L.SETINT)
            if t not in set(set_terms):
                set_terms.append(t)
    if set_terms:
        # sets with equal members are identified; solvers do not always
        # reduce set equalities to a Boolean in get-value
        by_members: dict = {}
        for t in set_terms:
            if int_universe:
                mem = h.eval_formulas([BgAtom("member", (IntLit(i), t)) for i in int_universe])
                members = frozenset(i for i, b in zip(int_universe, mem) if b)
            else:
                members = frozenset()
            ref = by_members.get(members)
            if ref is None:
                ref = by_members[members] = SetRef("s%d" % len(by_members))
                set_members[ref] = members
            terms[str(t)] = ref
        for fn, args in set_funcs:
            table = {}
            for tup in itertools.product(core_reps, repeat=len(args)):
                table[tuple(elem_of[a] for a in tup)] = terms[str(App(fn, tup, L.SETINT))]
            funcs[fn] = table
        for c, s in sig.consts.items():
            if s == L.SETINT and c in terms:
                consts[c] = terms[c]

    rels: dict = {}
    for r, args in sorted(sig.rels.items()):
        if any(a not in (fg, L.INT) for a in args):
            continue
        doms = [core_reps if a == fg else [IntLit(i) for i in int_universe] for a in args]
        tuples = list(itertools.product(*doms))
        table = {}
        if tuples:
            for tup, b in zip(tuples, h.eval_formulas([Atom(r, tup) for tup in tuples])):
                table[tuple(elem_of[a] if a.sort == fg else a.value for a in tup)] = b
        rels[r] = table
    atoms = sorted(_ground_atoms(assertions), key=str)
    if atoms:
        for a, b in zip(atoms, h.eval_formulas(atoms)):
            key = []
            for t in a.args:
                if t.sort == fg:
                    key.append(elem_of[t])
                elif isinstance(t, IntLit):
                    key.append(t.value)
                else:
                    key.append(terms.get(str(t)))
            if None not in key:
                rels.setdefault(a.rel, {})[tuple(key)] = b

    return FiniteModel(fg, elements, int_universe, consts, funcs, rels, False, terms,
                       set_members, label, core)


def uk_elements(m: FiniteModel, T) -> tuple:
    return tuple(dict.fromkeys(m.terms[str(t)] for t in T.terms))
