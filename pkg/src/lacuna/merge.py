"""TIES merging on flat parameter vectors: trim, elect sign, disjoint mean.

A desk-scale reference of the procedure, for testing and pedagogy; it
never touches real checkpoints. Defaults (density 0.5, lambda 1.0) are
toolkit-conventional.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ParamVector:
    name: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError(f"{self.name}: non-finite parameter value")


def ties_merge(
    base: ParamVector,
    tuned: Sequence[ParamVector],
    density: float = 0.5,
    lam: float = 1.0,
) -> ParamVector:
    """Merge tuned vectors into the base.

    Per tuned vector the delta against the base is trimmed to its top
    ceil(density*n) entries by magnitude (ties to the lower index), a sign
    is elected per coordinate from the sum of kept values (zero elects +),
    and kept values agreeing with that sign are averaged. The result is
    base + lam * merged.
    """
    if not tuned:
        raise ValueError("need at least one tuned vector")
    if not 0 < density <= 1:
        raise ValueError(f"density must be in (0, 1], got {density}")
    n = len(base.values)
    for vec in tuned:
        if len(vec.values) != n:
            raise ValueError(f"{vec.name}: length {len(vec.values)} != base {n}")

    base_arr = np.asarray(base.values, dtype=np.float64)
    keep = math.ceil(density * n)
    kept_rows = []
    for vec in tuned:
        tau = np.asarray(vec.values, dtype=np.float64) - base_arr
        # stable sort on (-|tau|, index) keeps the lower index on ties
        order = np.lexsort((np.arange(n), -np.abs(tau)))
        trimmed = np.zeros(n)
        trimmed[order[:keep]] = tau[order[:keep]]
        kept_rows.append(trimmed)
    kept = np.stack(kept_rows)

    elected = np.where(kept.sum(axis=0) >= 0, 1.0, -1.0)
    agreeing = (kept != 0) & (np.sign(kept) == elected)
    counts = agreeing.sum(axis=0)
    sums = np.where(agreeing, kept, 0.0).sum(axis=0)
    merged = np.divide(sums, counts, out=np.zeros(n), where=counts > 0)

    return ParamVector(
        name=f"ties({', '.join(v.name for v in tuned)})",
        values=tuple((base_arr + lam * merged).tolist()),
    )


def read_vector(path: str | Path) -> ParamVector:
    """Single-column CSV of numbers; blank lines ignored."""
    path = Path(path)
    values = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                values.append(float(line))
    return ParamVector(name=path.stem, values=tuple(values))


def write_vector(vector: ParamVector, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for value in vector.values:
            fh.write(f"{value!r}\n")
