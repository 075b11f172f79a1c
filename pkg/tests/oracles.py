"""Independent reference computations used by the tests.

None of these go through the package's fixpoint evaluator: each walks the
successor function directly.
"""

from __future__ import annotations

import random

from lfpsynth.models import FiniteModel


def walk(n: dict, x, limit: int):
    """Cells visited from ``x`` following ``n`` for at most ``limit`` steps."""
    out = [x]
    for _ in range(limit):
        x = n[(x,)]
        out.append(x)
    return out


def reaches(n: dict, x, target, size: int) -> bool:
    return target in walk(n, x, size)


def is_list(n: dict, nil, x, size: int) -> bool:
    return reaches(n, x, nil, size)


def is_lseg(n: dict, x, y, size: int) -> bool:
    return reaches(n, x, y, size)


def is_sorted_list(n: dict, key: dict, nil, x, size: int) -> bool:
    if not is_list(n, nil, x, size):
        return False
    cells = []
    while x != nil:
        cells.append(x)
        x = n[(x,)]
    return all(key[(a,)] <= key[(n[(a,)],)] for a in cells if n[(a,)] != nil)


def list_length(n: dict, nil, x, size: int) -> int:
    steps = 0
    while x != nil:
        if steps > size:
            return -1
        x = n[(x,)]
        steps += 1
    return steps


def random_heap(rng: random.Random, max_size: int = 5, key_range=(-2, 8)) -> FiniteModel:
    """A total model with a random successor function, nil and keys."""
    size = rng.randint(1, max_size)
    elems = tuple("e%d" % i for i in range(size))
    n = {(e,): rng.choice(elems) for e in elems}
    key = {(e,): rng.randint(*key_range) for e in elems}
    m = FiniteModel("Loc", elems, tuple(range(key_range[0], key_range[1] + 1)), total=True)
    m.consts["nil"] = rng.choice(elems)
    m.funcs["n"] = n
    m.funcs["key"] = key
    return m
