"""Acceptance suite: one test per release criterion, pass/fail line each.

Criteria are oracle- and property-based and run at desk scale; every
tolerance is pinned here. Run with `pytest tests/test_acceptance.py -v -s`
to see the per-criterion lines.
"""

from __future__ import annotations

import itertools
import json
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

from lacuna import kernels
from lacuna.baseline import random_filler, restore, train_lm
from lacuna.corpus import DateInterval, TextRecord, index_to_year, is_letter, resolve_date, year_to_index
from lacuna.dataset import SplitPlan, make_splits, write_split_manifest
from lacuna.inference import EndpointConfig, build_request_body, request_candidates
from lacuna.masking import mask_at, sample_mask
from lacuna.merge import ParamVector, ties_merge
from lacuna.metrics import cer, date_deviation, eval_normalize
from tests.conftest import FIXTURES, JOHN_SENTENCE, templated_corpus
from tests.mockserver import MockChatServer, choices_body


def report(line: str) -> None:
    print(f"\nACCEPTANCE PASS: {line}", flush=True)


def test_cer_matches_bruteforce_dp_exhaustively():
    """CER equals a brute-force DP on all pairs of length <= 6 over {α,β,γ},
    zero tolerance, under one minute."""
    started = time.monotonic()
    alphabet = "αβγ"
    strings = [""]
    for length in range(1, 7):
        strings.extend("".join(p) for p in itertools.product(alphabet, repeat=length))
    index = {s: i for i, s in enumerate(strings)}
    parent = [index[s[:-1]] if s else -1 for s in strings]
    n = len(strings)

    # independent oracle: the textbook recurrence memoized over the whole
    # (prefix-closed) string universe at once
    dist = [[0] * n for _ in range(n)]
    for i, s in enumerate(strings):
        row = dist[i]
        pi = parent[i]
        for j, t in enumerate(strings):
            if not s:
                row[j] = len(t)
            elif not t:
                row[j] = len(s)
            else:
                pj = parent[j]
                cost = 0 if s[-1] == t[-1] else 1
                row[j] = min(dist[pi][j] + 1, row[pj] + 1, dist[pi][pj] + cost)

    levenshtein = kernels.levenshtein
    mismatches = 0
    for i, s in enumerate(strings):
        row = dist[i]
        for j, t in enumerate(strings):
            if levenshtein(s, t) != row[j]:
                mismatches += 1
            if t and cer(s, t) != row[j] / len(t):
                mismatches += 1
    elapsed = time.monotonic() - started
    assert mismatches == 0
    assert elapsed < 60, f"exhaustive CER check took {elapsed:.1f}s"
    report(
        f"CER oracle equivalence on {n * n} pairs ({kernels.BACKEND} kernel), "
        f"{elapsed:.1f}s"
    )


def test_worked_example_fidelity():
    """Masking the motivating sentence at 6 letters yields the right gold,
    the fixture-trained baseline ranks it top-1, and its CER is exactly 0."""
    letter_positions = [i for i, ch in enumerate(JOHN_SENTENCE) if is_letter(ch)]
    sample = mask_at(JOHN_SENTENCE, letter_positions[7], 6)
    assert sample.gold == "ος ην πρ"
    assert sample.prompt_text == "και ο λογ[6 letters missing]ος τον θεον"
    assert sample.gold_letter_count == 6

    lm = train_lm([JOHN_SENTENCE] * 5, order=6)
    result = restore(lm, "και ο λογ", "ος τον θεον", 6, beam_width=60, top_n=20)
    assert result.candidates[0][0] == "ος ην πρ"
    assert cer(eval_normalize(result.candidates[0][0]), eval_normalize(sample.gold)) == 0.0
    report("worked-example fidelity: gold 'ος ην πρ' recovered at rank 1, CER 0")


def test_masking_distribution():
    """100,000 seeded draws on the 10/20-letter two-span fixture select the
    spans at 0.2/0.8 within ±0.01, never violate the 50% cap, and always
    match placeholder count to gold letters. Under one minute."""
    started = time.monotonic()
    record = TextRecord(
        id="twospan",
        corpus_kind="inscription",
        text_edited="α" * 10 + "---" + "β" * 20,
        text_diplomatic="α" * 10 + "---" + "β" * 20,
    )
    rng = random.Random(20260811)
    draws = 100_000
    short_span = 0
    for _ in range(draws):
        sample = sample_mask(record, rng, (3, 20))
        assert sample is not None
        span_letters = 10 if sample.gold[0] == "α" else 20
        short_span += span_letters == 10
        assert sample.gold_letter_count <= span_letters // 2, "50% cap violated"
        assert f"[{sample.gold_letter_count} letters missing]" == sample.placeholder
        assert sum(1 for ch in sample.gold if is_letter(ch)) == sample.gold_letter_count
    freq = short_span / draws
    elapsed = time.monotonic() - started
    assert abs(freq - 0.2) < 0.01, f"short-span frequency {freq:.4f}"
    assert elapsed < 60, f"distribution check took {elapsed:.1f}s"
    report(f"masking distribution 0.2/0.8 within ±0.01 (measured {freq:.4f}), {elapsed:.1f}s")


def test_date_rules():
    """Post-only 292 resolves to midpoint 317; deviation(304, [292,292]) = 12;
    deviations respect the no-year-0 timeline on 1,000 randomized cases."""
    assert resolve_date(292, None).midpoint == 317
    assert date_deviation(304, DateInterval(292, 292, 292)) == 12

    # independent oracle: positions in an explicit year list without 0
    years = [y for y in range(-1500, 1501) if y != 0]
    position = {y: i for i, y in enumerate(years)}

    def oracle(predicted: int, post: int, ante: int) -> int:
        p, lo, hi = position[predicted], position[post], position[ante]
        if lo <= p <= hi:
            return 0
        return min(abs(p - lo), abs(p - hi))

    rng = random.Random(1234)
    for _ in range(1000):
        lo_idx = rng.randrange(len(years) - 200)
        hi_idx = lo_idx + rng.randrange(200)
        predicted = rng.choice(years)
        post, ante = years[lo_idx], years[hi_idx]
        expected = oracle(predicted, post, ante)
        midpoint = index_to_year((year_to_index(post) + year_to_index(ante) + 1) // 2)
        assert date_deviation(predicted, DateInterval(post, ante, midpoint)) == expected
    report("date rules: midpoint 317, anecdote deviation 12, 1000/1000 timeline cases")


def test_split_fidelity(tmp_path):
    """phi_shared on 10,000 synthetic ids puts exactly the digit-3 ids in
    test and no digit-3/4 id in train; seeded splits re-run byte-identically."""
    ids = [f"phi{i}" for i in range(10_000)]
    parts = make_splits(ids, SplitPlan("phi_shared"))
    assert set(parts["test"]) == {i for i in ids if i.endswith("3")}
    assert set(parts["excluded"]) == {i for i in ids if i.endswith("4")}
    assert not any(i.endswith(("3", "4")) for i in parts["train"])
    assert sorted(parts["train"] + parts["test"] + parts["excluded"]) == sorted(ids)

    for scheme in ("train95_test5", "train80_val10_test10"):
        plan = SplitPlan(scheme, seed=99)
        paths = []
        for run in range(2):
            partitions = make_splits(list(reversed(ids)) if run else ids, plan)
            path = tmp_path / f"{scheme}-{run}.json"
            write_split_manifest(partitions, plan, path)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()
    report("split fidelity: digit-3 test of 1000 ids exact, manifests byte-identical")


def _enumerate_candidates(vocabulary, letters):
    """All gap fills satisfying the shape constraints, plus all partials."""
    alphabet = [c for c in vocabulary if c != "-"]
    max_chars = 2 * letters + 2
    complete: list[str] = []
    partials: list[str] = []

    def grow(prefix: str, done: int):
        if done == letters:
            complete.append(prefix)
            return
        partials.append(prefix)
        if len(prefix) >= max_chars:
            return
        for ch in alphabet:
            if is_letter(ch):
                grow(prefix + ch, done + 1)
            elif prefix and is_letter(prefix[-1]) and len(prefix) + 1 < max_chars:
                grow(prefix + ch, done)

    grow("", 0)
    return complete, partials


def test_beam_search_oracle():
    """With beam width at least the search-space size, beam search returns
    the exhaustive-enumeration argmax in 200/200 randomized small cases."""
    rng = random.Random(77)
    cases = 0
    while cases < 200:
        n_letters = rng.randint(2, 4)
        alphabet = "αβγδ"[:n_letters] + (" " if rng.random() < 0.7 else "")
        texts = [
            rng.choice("αβγδ"[:n_letters])
            + "".join(rng.choice(alphabet) for _ in range(rng.randint(5, 12)))
            for _ in range(rng.randint(1, 3))
        ]
        lm = train_lm(texts, order=rng.randint(2, 4))
        letters = rng.randint(1, 3)
        left = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 5)))
        right = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 5)))

        complete, partials = _enumerate_candidates(lm.vocabulary, letters)
        if not complete:
            continue
        scored = []
        for text in complete:
            score = 0.0
            for i, ch in enumerate(text):
                score += lm.logp(left + text[:i], ch)
            context = left + text
            for j in range(min(lm.order - 1, len(right))):
                score += lm.logp(context + right[:j], right[j])
            scored.append((text, score))
        oracle_best = max(scored, key=lambda pair: (pair[1], [-ord(c) for c in pair[0]]))[0]

        width = len(partials) + len(complete) + 1
        beam = restore(lm, left, right, letters, beam_width=width, top_n=1)
        assert beam.candidates[0][0] == oracle_best, (
            f"case {cases}: beam {beam.candidates[0][0]!r} != oracle {oracle_best!r}"
        )
        cases += 1
    report("beam-search oracle equivalence in 200/200 randomized cases")


def test_ties_reference():
    """Single-vector density-1 merge passes through to 1e-12; the two-vector
    hand example is exact."""
    rng = random.Random(5)
    base = ParamVector("base", tuple(rng.uniform(-3, 3) for _ in range(256)))
    tuned = ParamVector("tuned", tuple(rng.uniform(-3, 3) for _ in range(256)))
    merged = ties_merge(base, [tuned], density=1.0, lam=1.0)
    worst = max(abs(m - t) for m, t in zip(merged.values, tuned.values))
    assert worst < 1e-12

    hand = ties_merge(
        ParamVector("b", (0.0, 0.0)),
        [ParamVector("t1", (2.0, -1.0)), ParamVector("t2", (2.0, 1.0))],
        density=1.0,
        lam=1.0,
    )
    assert hand.values == (2.0, 1.0)
    report(f"TIES reference: pass-through worst error {worst:.2e}, hand example exact")


def _run_pipeline(workdir: Path, seed: int) -> bytes:
    def run(*argv: str) -> None:
        proc = subprocess.run(
            [sys.executable, "-m", "lacuna.cli", *argv],
            cwd=workdir,
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, f"{argv}: {proc.stderr}"

    run(
        "ingest",
        "--input", str(FIXTURES / "appendix.tsv"),
        "--places", str(FIXTURES / "places.tsv"),
        "--output", "records.jsonl",
        "--errors", "errors.jsonl",
    )
    run(
        "build-dataset",
        "--records", "records.jsonl",
        "--task", "restore",
        "--output", "eval.jsonl",
        "--seed", str(seed),
        "--eval-per-length", "5",
    )
    run("train-baseline", "--records", "records.jsonl", "--output", "model.json")
    run(
        "restore",
        "--dataset", "eval.jsonl",
        "--model", "model.json",
        "--candidates-out", "candidates.jsonl",
    )
    run(
        "evaluate",
        "--gold", "eval.jsonl",
        "--candidates", "candidates.jsonl",
        "--output", "report.json",
        "--csv", "report.csv",
    )
    return (workdir / "report.json").read_bytes()


def test_end_to_end_smoke(tmp_path):
    """Ingest the 8 bundled texts, build a seeded restore set, train the
    baseline, generate candidates, evaluate; the report is byte-identical
    across two runs with the same seed and finishes well under 5 minutes."""
    started = time.monotonic()
    runs = []
    for name in ("run1", "run2"):
        workdir = tmp_path / name
        workdir.mkdir()
        runs.append(_run_pipeline(workdir, seed=42))
    elapsed = time.monotonic() - started
    assert runs[0] == runs[1], "reports differ between identically seeded runs"
    assert elapsed < 300, f"smoke pipeline took {elapsed:.0f}s"
    parsed = json.loads(runs[0])
    assert parsed["n_samples"]["restore"] > 0
    report(f"end-to-end smoke byte-identical across runs, {elapsed:.0f}s total")


def test_baseline_sanity():
    """On 500 templated texts the baseline's top-20 restoration accuracy
    beats a uniform-random letter filler by a factor of at least 5,
    measured over 1,000 samples."""
    texts = templated_corpus(500, seed=3)
    lm = train_lm(texts, order=6)
    records = [
        TextRecord(id=f"t{i}", corpus_kind="inscription", text_edited=t, text_diplomatic=t)
        for i, t in enumerate(texts)
    ]
    rng = random.Random(17)
    filler_rng = random.Random(18)
    baseline_hits = 0
    random_hits = 0
    samples = 0
    i = 0
    while samples < 1000:
        record = records[i % len(records)]
        i += 1
        sample = sample_mask(record, rng, (2, 6))
        if sample is None:
            continue
        samples += 1
        gold_norm = eval_normalize(sample.gold)
        gap = sample.prompt_text.index(sample.placeholder)
        left = sample.prompt_text[:gap]
        right = sample.prompt_text[gap + len(sample.placeholder):]
        predicted = restore(lm, left, right, sample.gold_letter_count, beam_width=60, top_n=20)
        baseline_hits += any(
            eval_normalize(text) == gold_norm for text, _ in predicted.candidates
        )
        filler = random_filler(lm.vocabulary, sample.gold_letter_count, filler_rng, top_n=20)
        random_hits += any(
            eval_normalize(text) == gold_norm for text, _ in filler.candidates
        )
    assert baseline_hits >= max(5 * random_hits, 1), (
        f"baseline {baseline_hits}/1000 vs random {random_hits}/1000"
    )
    report(
        f"baseline sanity: top-20 hits {baseline_hits}/1000 vs random "
        f"{random_hits}/1000 (factor >= 5)"
    )


def test_inference_adapter_contract(tmp_path, caplog):
    """Golden request/response fixtures hold against a mock server; retry,
    dedup-to-20, and secret scrubbing behave exactly as specified."""
    from lacuna.dataset import ChatExample, SYSTEM_PROMPTS

    example = ChatExample(
        system=SYSTEM_PROMPTS[("restore", "papyrus")],
        user="και ο λογ[6 letters missing]ος τον θεον",
        assistant="ος ην πρ",
        task="restore",
        id="sample-1",
        meta={"task": "restore", "gold_letter_count": 6},
    )
    golden_request = json.loads((FIXTURES / "golden_request.json").read_text("utf-8"))
    golden_response = json.loads((FIXTURES / "golden_response.json").read_text("utf-8"))

    cfg = EndpointConfig(
        base_url="http://example", model_name="resto-8b", n_best=60,
        decode_options={"temperature": 0.7},
    )
    assert build_request_body(cfg, example) == golden_request

    with MockChatServer([(200, golden_response)]) as server:
        live = EndpointConfig(
            base_url=server.url, model_name="resto-8b", n_best=60, retry_base_delay=0.01
        )
        parsed = request_candidates(live, example)
    assert [t for t, _ in parsed.candidates] == ["ος ην πρ", "ος ην τα"]

    # retry: two 5xx then success
    script = [(500, {}), (500, {}), (200, choices_body(["ος ην πρ"]))]
    with MockChatServer(script) as server:
        live = EndpointConfig(
            base_url=server.url, model_name="resto-8b", retry_base_delay=0.01
        )
        retried = request_candidates(live, example)
        assert len(server.requests) == 3
    assert retried.candidates[0][0] == "ος ην πρ"

    # dedup: 60 texts with 30 normalization duplicates collapse to <= 20
    texts = []
    for i in range(30):
        texts.append(f"ος ην π{chr(0x3b1 + i % 15)}")
        texts.append(f"οσηνπ{chr(0x3b1 + i % 15)}")
    with MockChatServer([(200, choices_body(texts))]) as server:
        live = EndpointConfig(
            base_url=server.url, model_name="resto-8b", n_best=60, retry_base_delay=0.01
        )
        deduped = request_candidates(live, example)
    assert len(deduped.candidates) <= 20
    keys = [eval_normalize(t) for t, _ in deduped.candidates]
    assert len(set(keys)) == len(keys)

    # secrets never reach logs, exceptions, or repr
    secret = "sk-scrub-me-9000"
    import logging

    with MockChatServer([(500, {})] * 8) as server:
        live = EndpointConfig(
            base_url=server.url, model_name="resto-8b",
            auth_token=secret, retry_base_delay=0.01,
        )
        with caplog.at_level(logging.DEBUG):
            with pytest.raises(Exception) as exc:
                request_candidates(live, example)
        assert server.headers_seen[0]["Authorization"] == f"Bearer {secret}"
    assert secret not in str(exc.value)
    assert secret not in caplog.text
    assert secret not in repr(live)
    report("inference adapter contract: golden fixtures, retry, dedup, scrubbing")
