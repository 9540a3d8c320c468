"""Hot-kernel dispatch: compiled extension when available, pure Python otherwise.

`BACKEND` reports which implementation was selected at import time;
benchmarks/bench_editdist.py compares the two.
"""

try:
    from lacuna._editdist import levenshtein

    BACKEND = "cython"
except ImportError:  # extension not built
    from lacuna._editdist_py import levenshtein

    BACKEND = "python"

__all__ = ["levenshtein", "BACKEND"]
