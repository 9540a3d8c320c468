from __future__ import annotations

import math
import random

import pytest

from lacuna.merge import ParamVector, read_vector, ties_merge, write_vector


def vec(name: str, *values: float) -> ParamVector:
    return ParamVector(name, tuple(float(v) for v in values))


class TestTiesMerge:
    def test_single_vector_identity(self):
        tuned = vec("t", 4, 0, 7)
        merged = ties_merge(vec("b", 1, 2, 3), [tuned], density=1.0, lam=1.0)
        assert merged.values == tuned.values

    def test_hand_example(self):
        merged = ties_merge(
            vec("b", 0, 0), [vec("t1", 2, -1), vec("t2", 2, 1)], density=1.0, lam=1.0
        )
        assert merged.values == (2.0, 1.0)

    def test_trim_keeps_top_half(self):
        merged = ties_merge(vec("b", 0, 0, 0, 0), [vec("t", 4, 3, 2, 1)], density=0.5)
        assert merged.values == (4.0, 3.0, 0.0, 0.0)

    def test_trim_tie_keeps_lower_index(self):
        merged = ties_merge(vec("b", 0, 0, 0, 0), [vec("t", 2, 2, 2, 2)], density=0.5)
        assert merged.values == (2.0, 2.0, 0.0, 0.0)

    def test_identical_vectors_pass_through(self):
        tuned = vec("t", 0.5, -1.5, 3.25)
        merged = ties_merge(vec("b", 0, 0, 0), [tuned, tuned, tuned], density=1.0, lam=1.0)
        assert merged.values == tuned.values

    def test_permutation_invariant(self):
        base = vec("b", 1, -2, 0.5, 4)
        tuned = [vec("t1", 2, -1, 0, 3), vec("t2", 0, 1, 2, 5), vec("t3", 1, 1, 1, 1)]
        forward = ties_merge(base, tuned, density=0.5)
        shuffled = ties_merge(base, tuned[::-1], density=0.5)
        assert forward.values == shuffled.values

    def test_single_vector_density_one_within_1e12(self):
        rng = random.Random(3)
        base = vec("b", *(rng.uniform(-5, 5) for _ in range(64)))
        tuned = vec("t", *(rng.uniform(-5, 5) for _ in range(64)))
        merged = ties_merge(base, [tuned], density=1.0, lam=1.0)
        assert all(abs(m - t) < 1e-12 for m, t in zip(merged.values, tuned.values))

    def test_output_bounded_by_kept_deltas(self):
        rng = random.Random(11)
        base = vec("b", *(rng.uniform(-1, 1) for _ in range(32)))
        tuned = [vec(f"t{i}", *(rng.uniform(-2, 2) for _ in range(32))) for i in range(4)]
        lam = 0.7
        merged = ties_merge(base, tuned, density=0.5, lam=lam)
        # the disjoint mean stays within the kept deltas (trimmed entries are 0)
        n = 32
        keep = math.ceil(0.5 * n)
        kept = []
        for t in tuned:
            tau = [t.values[i] - base.values[i] for i in range(n)]
            order = sorted(range(n), key=lambda i: (-abs(tau[i]), i))
            keep_set = set(order[:keep])
            kept.append([tau[i] if i in keep_set else 0.0 for i in range(n)])
        for i in range(n):
            lo = min(row[i] for row in kept)
            hi = max(row[i] for row in kept)
            assert base.values[i] + lam * lo - 1e-12 <= merged.values[i]
            assert merged.values[i] <= base.values[i] + lam * hi + 1e-12

    def test_zero_sum_elects_positive(self):
        merged = ties_merge(vec("b", 0), [vec("t1", -3), vec("t2", 3)], density=1.0)
        assert merged.values == (3.0,)

    def test_errors(self):
        with pytest.raises(ValueError):
            ties_merge(vec("b", 0), [])
        with pytest.raises(ValueError):
            ties_merge(vec("b", 0, 0), [vec("t", 1)])
        with pytest.raises(ValueError):
            ties_merge(vec("b", 0), [vec("t", 1)], density=0)
        with pytest.raises(ValueError):
            ParamVector("nan", (float("nan"),))


def test_csv_roundtrip(tmp_path):
    vector = vec("t", 1.5, -2.25, 1e-9, 42)
    path = tmp_path / "vector.csv"
    write_vector(vector, path)
    loaded = read_vector(path)
    assert loaded.values == vector.values
    assert loaded.name == "vector"
