"""Counterexample-guided lemma synthesis.

Two loops are provided.  ``run_lemma_synthesis`` admits only lemmas whose
pre-fixpoint formula is FO-valid; ``run_ip_synthesis`` also keeps the
induction principle of every lemma whose proof failed.  Both use depth-k
instantiation for FO reasoning and the enumerate-and-filter synthesizer of
:mod:`lfpsynth.synth`.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

from . import logic as L
from .induction import make_ip, make_pfp
from .logic import Lemma, Problem
from .models import FiniteModel, eval_formula, gen_true_models
from .natproofs import Lowered, SkolemEnv, build_instances, lower_problem, skolemize
from .smt import SolverConfig, check_sat, default_config, extract_finite_model
from .synth import CandidateFilter, LemmaGrammar, SynthesisConstraints, enumerate_candidates

log = logging.getLogger(__name__)

PROVED = "proved"
NO_PROOF = "no-proof"
REASONS = ("grammar-exhausted", "budget", "solver-unknown")


# ---------------------------------------------------------------------------
# Configuration, state and results
# ---------------------------------------------------------------------------


@dataclass
class Budgets:
    candidates: int = 20000      # distinct candidates drawn from the enumerator, per depth
    rounds: int = 200            # inductive proof attempts, per depth
    unknown_retries: int = 3     # inconclusive solver answers tolerated per depth
    true_models: int = 0
    model_size: int = 4
    seed: int = 0
    grammar: dict = field(default_factory=dict)   # overrides for LemmaGrammar.from_problem


class EventLog:
    """Structured run log; ``t`` is the only non-deterministic field."""

    def __init__(self, path: str | None = None):
        self.events: list = []
        self._start = time.monotonic()
        self._fh = open(path, "w") if path else None

    def emit(self, event: str, **fields) -> dict:
        rec = {"event": event, **fields, "t": round(time.monotonic() - self._start, 4)}
        self.events.append(rec)
        if self._fh:
            self._fh.write(json.dumps(rec, default=str) + "\n")
            self._fh.flush()
        return rec

    def of(self, event: str) -> list:
        return [e for e in self.events if e["event"] == event]

    def stable(self) -> list:
        """Events without timing fields, for determinism comparisons."""
        return [{k: v for k, v in e.items() if k not in ("t", "seconds")} for e in self.events]

    def close(self) -> None:
        if self._fh:
            self._fh.close()
            self._fh = None


@dataclass
class EngineState:
    problem: Problem
    lowered: Lowered
    cfg: SolverConfig
    k: int = 1
    lemmas: list = field(default_factory=list)         # admitted, LFP-valid
    ips: list = field(default_factory=list)            # InductionPrinciple
    ip_tuples: dict = field(default_factory=dict)      # head -> [tuple of Skolem constants]
    true_models: list = field(default_factory=list)
    rounds: int = 0
    enumerated: int = 0
    unknowns: int = 0
    log: EventLog = field(default_factory=EventLog)
    env: SkolemEnv | None = None
    timings: dict = field(default_factory=lambda: {"solver": 0.0, "filter": 0.0, "models": 0.0})
    constraints: SynthesisConstraints | None = None
    grammar: LemmaGrammar | None = None

    def __post_init__(self) -> None:
        if self.env is None:
            self.env = SkolemEnv(self.lowered.signature)

    @classmethod
    def create(cls, problem: Problem, cfg: SolverConfig | None = None, k: int = 1,
               log: EventLog | None = None) -> "EngineState":
        return cls(problem, lower_problem(problem), cfg or default_config(), k,
                   log=log or EventLog())

    def lemma_formulas(self) -> list:
        return [lem.formula() for lem in self.lemmas]

    def reset_for_depth(self, k: int) -> None:
        self.k = k
        self.ips.clear()
        self.ip_tuples.clear()
        self.rounds = 0
        self.enumerated = 0
        self.unknowns = 0


@dataclass
class RunResult:
    status: str
    reason: str | None = None
    lemmas: list = field(default_factory=list)
    ips: list = field(default_factory=list)
    rounds: int = 0
    enumerated: int = 0
    depth: int = 0
    timings: dict = field(default_factory=dict)
    log: EventLog | None = None
    constraints: SynthesisConstraints | None = None   # as left by the last round
    grammar: LemmaGrammar | None = None
    signature: object = None                          # signature including Skolem constants

    @property
    def proved(self) -> bool:
        return self.status == PROVED

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "lemmas": [str(lem.formula()) for lem in self.lemmas],
            "ips": [str(ip.formula) for ip in self.ips],
            "rounds": self.rounds,
            "candidates": self.enumerated,
            "depth": self.depth,
            "timings": {k: round(v, 3) for k, v in self.timings.items()},
        }


@dataclass
class ProofAttempt:
    status: str                      # "proved", "countermodel" or "unknown"
    model: FiniteModel | None = None
    terms: object = None             # GroundTermSet used for the instantiation
    skolems: tuple = ()
    seconds: float = 0.0

    @property
    def proved(self) -> bool:
        return self.status == "proved"


# ---------------------------------------------------------------------------
# FO checks
# ---------------------------------------------------------------------------


def _check(st: EngineState, universals, ground, sig, label: str) -> ProofAttempt:
    t0 = time.monotonic()
    insts, T = build_instances(universals, ground, sig, st.k)
    res = check_sat(insts, sig, st.cfg)
    with res:
        st.timings["solver"] += res.seconds
        if res.is_unsat:
            return ProofAttempt("proved", terms=T, seconds=time.monotonic() - t0)
        if not res.is_sat:
            log.info("%s: solver returned unknown (%s)", label, res.reason)
            return ProofAttempt("unknown", terms=T, seconds=time.monotonic() - t0)
        m = extract_finite_model(res.handle, T, insts, label)
    return ProofAttempt("countermodel", m, T, seconds=time.monotonic() - t0)


def prove_goal(st: EngineState) -> ProofAttempt:
    """Instantiate axioms, abstractions, admitted lemmas and induction
    principles together with the negated goal."""
    if "goal" in st.env.tuples:
        consts = st.env.tuples["goal"]
        g = st.problem.goal
        neg = L.neg(L.subst_vars(g.body, dict(zip(g.vars, consts)))) if consts else L.neg(g)
    else:
        neg, consts = skolemize(st.problem.goal, st.env, key="goal")
    universals = st.lowered.universals() + st.lemma_formulas() + [ip.formula for ip in st.ips]
    sig = st.env.signature(st.lowered.signature)
    att = _check(st, universals, [neg], sig, "pseudo%d" % len(st.log.of("goal")))
    att.skolems = consts
    return att


def prove_lemma_inductive(lemma: Lemma, st: EngineState) -> ProofAttempt:
    """FO-validity of the lemma's pre-fixpoint formula, at the current depth."""
    env = st.env.copy()
    neg, consts = skolemize(make_pfp(lemma, st.lowered.rel_defs), env, key=("pfp", lemma))
    universals = st.lowered.universals() + st.lemma_formulas()
    att = _check(st, universals, [neg], env.signature(st.lowered.signature),
                 "counter%d" % st.rounds)
    att.skolems = consts
    return att


def check_implies(st: EngineState, hyp: Lemma | object, concl: Lemma | object) -> bool:
    """True when the solver shows ``hyp`` entails ``concl`` under the axioms
    and fixpoint abstractions at the state's depth."""
    h = hyp.formula() if isinstance(hyp, Lemma) else hyp
    c = concl.formula() if isinstance(concl, Lemma) else concl
    env = st.env.copy()
    neg, _ = skolemize(c, env, key=("implies", c))
    universals = st.lowered.universals() + [h]
    ground = [neg]
    if not isinstance(h, L.Forall):
        universals.pop()
        ground.append(h)
    return _check(st, universals, ground, env.signature(st.lowered.signature), "implies").proved


def lemmas_equivalent(st: EngineState, a, b) -> bool:
    return check_implies(st, a, b) and check_implies(st, b, a)


# ---------------------------------------------------------------------------
# Synthesis loops
# ---------------------------------------------------------------------------


def _result(st: EngineState, status: str, reason: str | None = None) -> RunResult:
    st.log.emit("result", status=status, reason=reason, lemmas=[str(x) for x in st.lemmas],
                ips=len(st.ips), rounds=st.rounds, candidates=st.enumerated, depth=st.k)
    return RunResult(status, reason, list(st.lemmas), list(st.ips), st.rounds, st.enumerated,
                     st.k, dict(st.timings), st.log, st.constraints, st.grammar,
                     st.env.signature(st.lowered.signature))


def _sample_true_models(st: EngineState, b: Budgets) -> None:
    if b.true_models <= 0:
        st.true_models = []
        return
    t0 = time.monotonic()
    st.true_models = gen_true_models(st.lowered, b.true_models, b.model_size, b.seed, st.lemmas)
    st.timings["models"] += time.monotonic() - t0
    st.log.emit("true-models", count=len(st.true_models), size=b.model_size, seed=b.seed)


def _refilter_true_models(st: EngineState) -> None:
    keep = []
    for g in st.true_models:
        if all(eval_formula(g, lem.formula()) is True for lem in st.lemmas):
            keep.append(g)
    if len(keep) != len(st.true_models):
        st.log.emit("true-models-dropped", count=len(st.true_models) - len(keep))
    st.true_models = keep


def _skolem_tuples(st: EngineState, m: FiniteModel) -> dict:
    out = {}
    for head, tuples in st.ip_tuples.items():
        vals = []
        for consts in tuples:
            tup = tuple(m.consts.get(c.fn) for c in consts)
            if None not in tup:
                vals.append(tup)
        out[head] = vals
    return out


def _model_size(m: FiniteModel | None) -> int:
    return len(m.elements) if m is not None else 0


def _run(problem: Problem | EngineState, k: int, budgets: Budgets | None, algorithm: str,
         cfg: SolverConfig | None = None, log_path: str | None = None) -> RunResult:
    b = budgets or Budgets()
    if isinstance(problem, EngineState):
        st = problem
        st.reset_for_depth(k)
    else:
        st = EngineState.create(problem, cfg, k, EventLog(log_path))
    grammar = LemmaGrammar.from_problem(st.lowered, **b.grammar)
    filt = CandidateFilter(grammar)
    _sample_true_models(st, b)
    C = SynthesisConstraints(true_models=st.true_models)
    st.constraints, st.grammar = C, grammar
    st.log.emit("start", algorithm=algorithm, depth=k, problem=st.problem.name,
                heads=[d.name for d in grammar.heads],
                atoms={h: len(a) for h, a in grammar.atoms.items()}, true_models=len(st.true_models))
    drawn: set = set()
    submitted: set = set()

    while True:
        goal = prove_goal(st)
        st.log.emit("goal", result=goal.status, terms=len(goal.terms or ()),
                    model_size=_model_size(goal.model), seconds=round(goal.seconds, 4))
        if goal.proved:
            return _result(st, PROVED)
        if goal.status == "unknown":
            return _result(st, NO_PROOF, "solver-unknown")
        C.pseudomodel = goal.model
        if algorithm == "ip":
            C.skolem_tuples = _skolem_tuples(st, goal.model)
        advanced = False
        for cand in enumerate_candidates(grammar):
            if cand.key not in drawn:
                if st.enumerated >= b.candidates:
                    return _result(st, NO_PROOF, "budget")
                drawn.add(cand.key)
                st.enumerated += 1
            t0 = time.monotonic()
            verdict = filt.verdict(cand, C)
            st.timings["filter"] += time.monotonic() - t0
            if not verdict.accepted:
                continue
            if cand.key in submitted:
                # partial countermodels may fail to exclude a candidate; never retry it
                continue
            if st.rounds >= b.rounds:
                return _result(st, NO_PROOF, "budget")
            st.rounds += 1
            submitted.add(cand.key)
            att = prove_lemma_inductive(cand.lemma, st)
            st.log.emit("candidate", round=st.rounds, candidate=str(cand.lemma), size=cand.size,
                        verdict=str(verdict), result=att.status, model_size=_model_size(att.model),
                        seconds=round(att.seconds, 4))
            if att.proved:
                st.lemmas.append(cand.lemma)
                # earlier failures may be inductive relative to the new lemma
                submitted.clear()
                C.reset_inductive()
                st.ips.clear()
                st.ip_tuples.clear()
                _refilter_true_models(st)
                C.true_models = st.true_models
                st.log.emit("admit", round=st.rounds, lemma=str(cand.lemma), total=len(st.lemmas))
                advanced = True
                break
            if att.status == "unknown":
                st.unknowns += 1
                if st.unknowns > b.unknown_retries:
                    return _result(st, NO_PROOF, "solver-unknown")
                continue
            if algorithm == "ip":
                ip = make_ip(cand.lemma, st.lowered.rel_defs, st.env)
                st.ips.append(ip)
                st.ip_tuples.setdefault(cand.lemma.head, []).append(ip.consts)
                st.log.emit("add-ip", round=st.rounds, lemma=str(cand.lemma),
                            skolems=[str(c) for c in ip.consts])
                advanced = True
                break
            C.add_countermodel(cand.lemma.head, att.model)
            again = filt.verdict(cand, C)
            st.log.emit("recheck", round=st.rounds, candidate=str(cand.lemma),
                        verdict=str(again), pruned=not again.accepted)
        if not advanced:
            return _result(st, NO_PROOF, "grammar-exhausted")


def run_lemma_synthesis(problem, k: int = 1, budgets: Budgets | None = None,
                        cfg: SolverConfig | None = None, log_path: str | None = None) -> RunResult:
    """Admit inductive lemmas until the goal becomes FO-provable."""
    return _run(problem, k, budgets, "lemma", cfg, log_path)


def run_ip_synthesis(problem, k: int = 1, budgets: Budgets | None = None,
                     cfg: SolverConfig | None = None, log_path: str | None = None) -> RunResult:
    """Like run_lemma_synthesis, but failed candidates contribute their
    induction principles to the goal check."""
    return _run(problem, k, budgets, "ip", cfg, log_path)


def dovetail(problem: Problem, schedule, algorithm: str = "lemma", budgets: Budgets | None = None,
             cfg: SolverConfig | None = None, log_path: str | None = None) -> RunResult:
    """Run the chosen loop for each ``(k, candidate budget)`` entry, carrying
    admitted lemmas forward."""
    schedule = list(schedule)
    if not schedule:
        raise ValueError("schedule must be nonempty")
    if algorithm not in ("lemma", "ip"):
        raise ValueError("algorithm must be 'lemma' or 'ip'")
    base = budgets or Budgets()
    st = EngineState.create(problem, cfg, schedule[0][0], EventLog(log_path))
    res = None
    for k, limit in schedule:
        b = Budgets(limit, base.rounds, base.unknown_retries, base.true_models, base.model_size,
                    base.seed, base.grammar)
        res = _run(st, k, b, algorithm)
        if res.proved:
            break
    st.log.close()
    return res
