"""Pure-Python Levenshtein fallback, used when the compiled kernel is absent.

Must stay behaviour-identical to _editdist.pyx.
"""


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance between two strings."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a

    row = list(range(len(b) + 1))
    for i, ca in enumerate(a):
        diag = row[0]
        row[0] = i + 1
        for j, cb in enumerate(b):
            above = row[j + 1]
            best = diag if ca == cb else diag + 1
            if above + 1 < best:
                best = above + 1
            if row[j] + 1 < best:
                best = row[j] + 1
            row[j + 1] = best
            diag = above
    return row[-1]
