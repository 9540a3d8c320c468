# cython: boundscheck=False, wraparound=False
"""Compiled Levenshtein kernel. Must stay behaviour-identical to _editdist_py."""

from cpython.mem cimport PyMem_Free, PyMem_Malloc


def levenshtein(str a, str b):
    """Unit-cost edit distance between two strings."""
    cdef Py_ssize_t la = len(a)
    cdef Py_ssize_t lb = len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la

    cdef int *ca = <int *> PyMem_Malloc(la * sizeof(int))
    cdef int *cb = <int *> PyMem_Malloc(lb * sizeof(int))
    cdef int *row = <int *> PyMem_Malloc((lb + 1) * sizeof(int))
    if ca == NULL or cb == NULL or row == NULL:
        PyMem_Free(ca)
        PyMem_Free(cb)
        PyMem_Free(row)
        raise MemoryError()

    cdef Py_ssize_t i, j
    cdef int cost, above, diag, best
    try:
        for i in range(la):
            ca[i] = <int> ord(a[i])
        for j in range(lb):
            cb[j] = <int> ord(b[j])
        for j in range(lb + 1):
            row[j] = <int> j
        for i in range(la):
            diag = row[0]
            row[0] = <int> (i + 1)
            for j in range(lb):
                above = row[j + 1]
                cost = 0 if ca[i] == cb[j] else 1
                best = diag + cost
                if above + 1 < best:
                    best = above + 1
                if row[j] + 1 < best:
                    best = row[j] + 1
                row[j + 1] = best
                diag = above
        return row[lb]
    finally:
        PyMem_Free(ca)
        PyMem_Free(cb)
        PyMem_Free(row)
