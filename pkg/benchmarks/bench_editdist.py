"""Compare the compiled edit-distance kernel against the pure-Python fallback.

Run: python benchmarks/bench_editdist.py
"""

from __future__ import annotations

import random
import time

from lacuna import kernels
from lacuna._editdist_py import levenshtein as py_levenshtein

ALPHABET = "αβγδεζηθικλμνξοπρστυφχψω ·"


def make_pairs(n: int, length: int, rng: random.Random) -> list[tuple[str, str]]:
    return [
        (
            "".join(rng.choice(ALPHABET) for _ in range(length)),
            "".join(rng.choice(ALPHABET) for _ in range(length)),
        )
        for _ in range(n)
    ]


def bench(fn, pairs) -> float:
    started = time.perf_counter()
    for a, b in pairs:
        fn(a, b)
    return time.perf_counter() - started


def main() -> None:
    rng = random.Random(0)
    impls = [("python", py_levenshtein)]
    if kernels.BACKEND == "cython":
        impls.insert(0, ("cython", kernels.levenshtein))
    else:
        print("compiled kernel not available; benchmarking the fallback only\n")

    header = f"{'length':>8} {'pairs':>8}"
    for name, _ in impls:
        header += f"{name + ' (s)':>14}{name + ' pairs/s':>16}"
    print(header)
    for length in (5, 10, 20, 50, 100):
        n = max(200, 20000 // length)
        pairs = make_pairs(n, length, rng)
        row = f"{length:>8} {n:>8}"
        timings = []
        for name, fn in impls:
            elapsed = bench(fn, pairs)
            timings.append(elapsed)
            row += f"{elapsed:>14.4f}{n / elapsed:>16.0f}"
        print(row)
    if len(impls) == 2:
        # consistency spot check
        pairs = make_pairs(500, 12, rng)
        assert all(impls[0][1](a, b) == impls[1][1](a, b) for a, b in pairs)
        print("\nbackends agree on 500 random pairs")


if __name__ == "__main__":
    main()
