#!/usr/bin/env python3
"""Line-oriented SMT-LIB front end over the cvc5 Python bindings.

Reads commands from stdin and prints each command's response as soon as
the command is complete, like the solver binary in incremental mode.  Used
by the tests as a second solver when no cvc5 executable is installed.
"""

from __future__ import annotations

import sys

import cvc5


def main(argv) -> int:
    lang = cvc5.InputLanguage.SYGUS_2_1 if "--lang=sygus2" in argv else cvc5.InputLanguage.SMT_LIB_2_6
    tm = cvc5.TermManager()
    solver = cvc5.Solver(tm)
    solver.setOption("produce-models", "true")
    solver.setOption("incremental", "true")
    if lang == cvc5.InputLanguage.SYGUS_2_1:
        solver.setOption("sygus", "true")
    sm = cvc5.SymbolManager(tm)
    depth, buf = 0, []
    for line in sys.stdin:
        if "|" not in line:
            line = line.split(";", 1)[0]
        for ch in line:
            buf.append(ch)
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth == 0:
                    # a fresh parser per command; declarations live in the symbol manager
                    parser = cvc5.InputParser(solver, sm)
                    parser.setStringInput(lang, "".join(buf), "stdin")
                    buf = []
                    while True:
                        cmd = parser.nextCommand()
                        if cmd.isNull():
                            break
                        out = cmd.invoke(solver, sm)
                        if out:
                            sys.stdout.write(out if out.endswith("\n") else out + "\n")
                            sys.stdout.flush()
                        if cmd.getCommandName() == "exit":
                            return 0
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
