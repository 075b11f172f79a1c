"""Command-line frontend: prove one problem, run the bundled corpus, or check files."""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources

from .engine import Budgets, EngineState, dovetail, lemmas_equivalent
from .parser import ParseError, parse_problem, print_problem
from .logic import LogicError
from .smt import SolverConfig, SolverError, SolverNotFound, default_config
from .synth import emit_sygus

log = logging.getLogger("lfpsynth")

EXIT_PROVED, EXIT_NO_PROOF, EXIT_ERROR = 0, 1, 2


@dataclass
class RunConfig:
    input: str
    algorithm: str = "lemma"
    schedule: list = field(default_factory=lambda: [(1, 20000)])
    true_models: int = 0
    model_size: int = 4
    solver: str | None = None
    timeout: float = 30.0
    seed: int = 0
    rounds: int = 200
    grammar: dict = field(default_factory=dict)
    result: str | None = None
    events: str | None = None
    sygus: str | None = None

    def validate(self) -> None:
        if not self.schedule:
            raise ValueError("the depth schedule is empty")
        for k, b in self.schedule:
            if k < 0 or b < 0:
                raise ValueError("depths and budgets must be >= 0")
        for name in ("true_models", "model_size", "timeout", "seed", "rounds"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be >= 0" % name.replace("_", "-"))
        if self.algorithm not in ("lemma", "ip"):
            raise ValueError("algorithm must be lemma or ip")


def corpus_dir() -> str:
    return str(resources.files("lfpsynth") / "corpus")


def corpus_files() -> list:
    d = corpus_dir()
    return sorted(os.path.join(d, f) for f in os.listdir(d) if f.endswith(".lfp"))


def corpus_path(name: str) -> str:
    return os.path.join(corpus_dir(), name if name.endswith(".lfp") else name + ".lfp")


def parse_schedule(text: str, budget: int) -> list:
    """``"1"`` or ``"0:50,1:500"`` into ``[(k, candidate budget), ...]``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            k, b = part.split(":", 1)
            out.append((int(k), int(b)))
        else:
            out.append((int(part), budget))
    return out


def _write_json(path: str | None, payload: dict) -> None:
    if path:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def run(cfg: RunConfig, solver_cfg: SolverConfig | None = None) -> tuple:
    """Run one problem; returns ``(exit status, result payload, RunResult or None)``."""
    started = time.monotonic()
    payload = {"status": "error", "lemmas": [], "ips": [], "rounds": 0, "depth": None,
               "timings": {}, "input": cfg.input}
    try:
        cfg.validate()
        with open(cfg.input) as fh:
            problem = parse_problem(fh.read())
        scfg = solver_cfg or default_config(cfg.solver, cfg.timeout)
        budgets = Budgets(cfg.schedule[0][1], cfg.rounds, true_models=cfg.true_models,
                          model_size=cfg.model_size, seed=cfg.seed, grammar=dict(cfg.grammar))
        res = dovetail(problem, cfg.schedule, cfg.algorithm, budgets, scfg, cfg.events)
    except (OSError, ParseError, LogicError, SolverError, ValueError) as e:
        payload["error"] = str(e)
        payload["timings"] = {"total": round(time.monotonic() - started, 3)}
        _write_json(cfg.result, payload)
        return EXIT_ERROR, payload, None
    payload.update(res.to_json())
    payload["timings"]["total"] = round(time.monotonic() - started, 3)
    if cfg.sygus:
        C = res.constraints
        if C is None or not C.models():
            log.warning("no constraint models were collected; SyGuS file not written")
        else:
            with open(cfg.sygus, "w") as fh:
                fh.write(emit_sygus(C, res.grammar, res.signature))
    _write_json(cfg.result, payload)
    return (EXIT_PROVED if res.proved else EXIT_NO_PROOF), payload, res


def _corpus_job(args: tuple) -> dict:
    path, cfg_fields, check_expected = args
    cfg = RunConfig(path, **cfg_fields)
    code, payload, res = run(cfg)
    row = {
        "problem": os.path.basename(path)[:-4],
        "status": payload["status"],
        "reason": payload.get("reason") or payload.get("error") or "",
        "rounds": payload.get("rounds", 0),
        "candidates": payload.get("candidates", 0),
        "lemmas": len(payload.get("lemmas", [])),
        "ips": len(payload.get("ips", [])),
        "expected": "",
        "matched": "",
        "seconds": payload["timings"].get("total", 0.0),
        "admitted": " | ".join(payload.get("lemmas", [])),
    }
    if res is not None and check_expected:
        problem = parse_problem(open(path).read())
        row["expected"] = len(problem.expected)
        if problem.expected:
            st = EngineState.create(problem, default_config(cfg.solver, cfg.timeout), res.depth)
            row["matched"] = sum(
                1 for e in problem.expected
                if any(lemmas_equivalent(st, lem, e) for lem in res.lemmas))
    return row


CSV_FIELDS = ("problem", "status", "reason", "rounds", "candidates", "lemmas", "ips", "expected",
              "matched", "seconds", "admitted")


def run_corpus(paths, cfg_fields: dict, jobs: int = 1, report: str | None = None,
               check_expected: bool = True) -> list:
    tasks = [(p, cfg_fields, check_expected) for p in paths]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_corpus_job, tasks))
    else:
        rows = [_corpus_job(t) for t in tasks]
    if report:
        with open(report, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            w.writeheader()
            w.writerows(rows)
    return rows


# ---------------------------------------------------------------------------
# argparse
# ---------------------------------------------------------------------------


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--algorithm", choices=("lemma", "ip"), default="lemma",
                   help="lemma: admit inductive lemmas only; ip: also use induction principles")
    p.add_argument("--depth", default="1", help="instantiation depth, or a schedule like 0:50,1:500")
    p.add_argument("--budget", type=int, default=20000, help="candidate budget per depth")
    p.add_argument("--rounds", type=int, default=200, help="inductive proof attempts per depth")
    p.add_argument("--true-models", type=int, default=0)
    p.add_argument("--model-size", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", help="solver binary (default: $LFPSYNTH_SOLVER, else z3)")
    p.add_argument("--timeout", type=float, default=30.0, help="seconds per solver call")
    p.add_argument("--max-size", type=int, help="largest lemma body size")
    p.add_argument("--grammar-depth", type=int, help="term depth in lemma bodies")


def _fields(a: argparse.Namespace) -> dict:
    grammar = {}
    if a.max_size is not None:
        grammar["max_size"] = a.max_size
    if a.grammar_depth is not None:
        grammar["depth"] = a.grammar_depth
    return dict(algorithm=a.algorithm, schedule=parse_schedule(a.depth, a.budget),
                true_models=a.true_models, model_size=a.model_size, solver=a.solver,
                timeout=a.timeout, seed=a.seed, rounds=a.rounds, grammar=grammar)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lfpsynth", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prove", help="prove the goal of one problem file")
    p.add_argument("input")
    _add_run_options(p)
    p.add_argument("--result", default="result.json", help="result JSON path")
    p.add_argument("--events", help="JSON-lines event log path")
    p.add_argument("--emit-sygus", dest="sygus", help="write the final synthesis query as SyGuS-IF")

    c = sub.add_parser("corpus", help="run the bundled corpus and write a CSV report")
    c.add_argument("names", nargs="*", help="problem names (default: all)")
    _add_run_options(c)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--report", default="corpus_report.csv")
    c.add_argument("--no-expected", action="store_true", help="skip matching against expected lemmas")

    k = sub.add_parser("check", help="parse problem files and print them back")
    k.add_argument("inputs", nargs="+")
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(a.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if a.command == "check":
        code = EXIT_PROVED
        for path in a.inputs:
            try:
                with open(path) as fh:
                    sys.stdout.write(print_problem(parse_problem(fh.read())))
            except (OSError, ParseError) as e:
                print("%s: %s" % (path, e), file=sys.stderr)
                code = EXIT_ERROR
        return code
    try:
        fields = _fields(a)
    except ValueError as e:
        print("bad --depth: %s" % e, file=sys.stderr)
        return EXIT_ERROR
    if a.command == "prove":
        cfg = RunConfig(a.input, result=a.result, events=a.events, sygus=a.sygus, **fields)
        try:
            code, payload, _ = run(cfg)
        except SolverNotFound as e:
            print(str(e), file=sys.stderr)
            return EXIT_ERROR
        if code == EXIT_ERROR:
            print("error: %s" % payload.get("error"), file=sys.stderr)
        else:
            print(payload["status"] + ("" if code == EXIT_PROVED else " (%s)" % payload["reason"]))
            for lem in payload["lemmas"]:
                print("(lemma %s)" % lem)
            for ip in payload["ips"]:
                print("(induction-principle %s)" % ip)
        return code
    paths = [corpus_path(n) for n in a.names] if a.names else corpus_files()
    missing = [p for p in paths if not os.path.exists(p)]
    if missing:
        print("unknown corpus problem(s): %s" % ", ".join(missing), file=sys.stderr)
        return EXIT_ERROR
    rows = run_corpus(paths, fields, a.jobs, a.report, not a.no_expected)
    for r in rows:
        print("%-22s %-9s %-18s rounds=%-3s candidates=%-6s lemmas=%s matched=%s/%s" % (
            r["problem"], r["status"], r["reason"], r["rounds"], r["candidates"], r["lemmas"],
            r["matched"], r["expected"]))
    if any(r["status"] == "error" for r in rows):
        return EXIT_ERROR
    return EXIT_PROVED if all(r["status"] == "proved" for r in rows) else EXIT_NO_PROOF


if __name__ == "__main__":
    sys.exit(main())
