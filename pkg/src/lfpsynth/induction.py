"""Pre-fixpoint formulas and induction principles for lemmas."""

from __future__ import annotations

from dataclasses import dataclass

from . import logic as L
from .logic import And, Atom, Forall, Implies, Lemma, LogicError, Or
from .natproofs import SkolemEnv, skolemize


def _definition(lemma: Lemma, defs):
    for d in defs:
        if d.name == lemma.head and not d.is_function:
            if len(d.params) != len(lemma.vars):
                raise LogicError("lemma for %s has %d variables, definition has %d"
                                 % (lemma.head, len(lemma.vars), len(d.params)))
            if tuple(v.sort for v in d.params) != tuple(v.sort for v in lemma.vars):
                raise LogicError("lemma variables for %s have the wrong sorts" % lemma.head)
            return d
    raise LogicError("%s has no recursive definition" % lemma.head)


def pfp_matrix(lemma: Lemma, defs):
    """``rho_R[R <- psi and R](x) -> psi(x)`` over the lemma's variables."""
    d = _definition(lemma, defs)
    rho = L.subst_vars(d.body, dict(zip(d.params, lemma.vars)))

    def replace(args):
        psi = L.subst_vars(lemma.body, dict(zip(lemma.vars, args)))
        return And((psi, Atom(lemma.head, tuple(args))))

    return Implies(L.substitute(rho, lemma.head, replace, len(lemma.vars)), lemma.body)


def make_pfp(lemma: Lemma, defs):
    m = pfp_matrix(lemma, defs)
    return Forall(lemma.vars, m) if lemma.vars else m


@dataclass(frozen=True)
class InductionPrinciple:
    lemma: Lemma
    consts: tuple          # Skolem constants of the negated pre-fixpoint part
    neg_pfp: object        # quantifier-free, over ``consts``
    formula: object        # forall x. neg_pfp or L(x)

    def __str__(self) -> str:
        return str(self.formula)


def make_ip(lemma: Lemma, defs, env: SkolemEnv) -> InductionPrinciple:
    neg, consts = skolemize(make_pfp(lemma, defs), env, key=("ip", lemma, env.counter))
    body = Or((neg, Implies(Atom(lemma.head, lemma.vars), lemma.body)))
    f = Forall(lemma.vars, body) if lemma.vars else body
    return InductionPrinciple(lemma, consts, neg, f)
