"""Evaluation protocol: CER, top-k restoration accuracy, attribution scores.

All comparisons run on an evaluation normalization that ignores spaces,
punctuation, hyphens, and numerals and folds final sigma, so scoring is
insensitive to word boundaries and sigma spelling. CER buckets restorations
by gold letter count and macro-averages lengths 1-10.
"""

from __future__ import annotations

import csv
import json
import statistics
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from lacuna.corpus import DateInterval, year_to_index
from lacuna.kernels import levenshtein

MIN_SOURCE_CHARS = 90
CER_BUCKETS = range(1, 11)
TOP_K = 20

_EVAL_DROP = frozenset(" ·-0123456789")


def eval_normalize(text: str) -> str:
    """Drop spaces, punctuation, hyphens, and digits; fold ς to σ."""
    return "".join("σ" if ch == "ς" else ch for ch in text if ch not in _EVAL_DROP)


def cer(pred: str, gold: str) -> float:
    """Unit-cost edit distance divided by gold length.

    Empty gold scores 0 against empty pred and len(pred) otherwise; the
    masking pipeline never produces empty golds but the function is total.
    """
    if not gold:
        return 0.0 if not pred else float(len(pred))
    return levenshtein(pred, gold) / len(gold)


@dataclass(frozen=True, slots=True)
class CandidateList:
    """Ranked model outputs for one sample, best first."""

    sample_id: str
    candidates: tuple[tuple[str, float], ...]
    produced_by: str = ""

    def __post_init__(self) -> None:
        scores = [s for _, s in self.candidates]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError(f"candidates for {self.sample_id} not in descending score order")

    def texts(self) -> list[str]:
        return [text for text, _ in self.candidates]


@dataclass(frozen=True, slots=True)
class RestorationSample:
    id: str
    gold: str
    gold_letter_count: int
    source_chars: int


@dataclass(frozen=True, slots=True)
class PlaceSample:
    id: str
    gold_label: str


@dataclass(frozen=True, slots=True)
class DateSample:
    id: str
    interval: DateInterval


@dataclass
class EvalPartial:
    """Mergeable per-task tallies; aggregate() folds any number of these."""

    cer_by_bucket: dict[int, list[float]] = field(default_factory=dict)
    bucket_top1: int = 0
    bucket_top20: int = 0
    bucket_n: int = 0
    all_n: int = 0
    all_top1: int = 0
    all_top20: int = 0
    all_cer: list[float] = field(default_factory=list)
    place_n: int = 0
    place_top1: int = 0
    place_top3: int = 0
    deviations: list[int] = field(default_factory=list)
    flagged: list[str] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)

    def merge(self, other: EvalPartial) -> None:
        for bucket, values in other.cer_by_bucket.items():
            self.cer_by_bucket.setdefault(bucket, []).extend(values)
        self.bucket_top1 += other.bucket_top1
        self.bucket_top20 += other.bucket_top20
        self.bucket_n += other.bucket_n
        self.all_n += other.all_n
        self.all_top1 += other.all_top1
        self.all_top20 += other.all_top20
        self.all_cer.extend(other.all_cer)
        self.place_n += other.place_n
        self.place_top1 += other.place_top1
        self.place_top3 += other.place_top3
        self.deviations.extend(other.deviations)
        self.flagged.extend(other.flagged)
        self.rows.extend(other.rows)


def score_restoration(
    samples: Sequence[RestorationSample],
    candidates: Mapping[str, CandidateList],
) -> EvalPartial:
    """Score restorations against gold; see module docstring for the rules.

    Samples whose source text is shorter than 90 characters are excluded
    entirely; gold letter counts above 10 are kept in a separate
    all-lengths tally. Samples with no candidates score as a miss with
    CER 1.0 and are flagged.
    """
    partial = EvalPartial()
    for sample in samples:
        if sample.source_chars < MIN_SOURCE_CHARS:
            continue
        gold_norm = eval_normalize(sample.gold)
        clist = candidates.get(sample.id)
        texts = clist.texts() if clist else []
        if not texts:
            partial.flagged.append(sample.id)
            rank = None
            top1_cer = 1.0
        else:
            rank = next(
                (
                    k + 1
                    for k, text in enumerate(texts[:TOP_K])
                    if eval_normalize(text) == gold_norm
                ),
                None,
            )
            top1_cer = cer(eval_normalize(texts[0]), gold_norm)
        hit1 = rank == 1
        hit20 = rank is not None
        partial.all_n += 1
        partial.all_top1 += hit1
        partial.all_top20 += hit20
        partial.all_cer.append(top1_cer)
        in_bucket = sample.gold_letter_count in CER_BUCKETS
        if in_bucket:
            partial.bucket_n += 1
            partial.bucket_top1 += hit1
            partial.bucket_top20 += hit20
            partial.cer_by_bucket.setdefault(sample.gold_letter_count, []).append(top1_cer)
        partial.rows.append(
            {"id": sample.id, "task": "restore", "rank_of_gold": rank, "cer": top1_cer}
        )
    return partial


def score_place(
    samples: Sequence[PlaceSample],
    predictions: Mapping[str, Sequence[str]],
    known_labels: set[str] | None = None,
) -> EvalPartial:
    """Exact-match top-1/top-3 fractions over ranked place predictions."""
    partial = EvalPartial()
    for sample in samples:
        if known_labels is not None and sample.gold_label not in known_labels:
            partial.flagged.append(sample.id)
            continue
        ranked = list(predictions.get(sample.id, []))
        rank = next((k + 1 for k, label in enumerate(ranked) if label == sample.gold_label), None)
        partial.place_n += 1
        partial.place_top1 += rank == 1
        partial.place_top3 += rank is not None and rank <= 3
        partial.rows.append({"id": sample.id, "task": "place", "rank_of_gold": rank})
    return partial


def date_deviation(predicted: int, interval: DateInterval) -> int:
    """Years from the predicted year to the interval, 0 inside it.

    Computed on a timeline with no year 0, so -1 and 1 are adjacent.
    """
    p = year_to_index(predicted)
    lo, hi = year_to_index(interval.post), year_to_index(interval.ante)
    if lo <= p <= hi:
        return 0
    return min(abs(p - lo), abs(p - hi))


def score_date(
    samples: Sequence[DateSample],
    predictions: Mapping[str, int],
) -> EvalPartial:
    """Deviations of predicted years from the gold dating spans."""
    partial = EvalPartial()
    for sample in samples:
        predicted = predictions.get(sample.id)
        if predicted is None:
            partial.flagged.append(sample.id)
            continue
        dev = date_deviation(predicted, sample.interval)
        partial.deviations.append(dev)
        partial.rows.append({"id": sample.id, "task": "date", "deviation": dev})
    return partial


@dataclass(frozen=True)
class EvalReport:
    """Aggregated metrics; absent tasks report None."""

    cer_by_length: dict[int, float]
    cer_avg: float | None
    cer_micro: float | None
    top1: float | None
    top20: float | None
    place_top1: float | None
    place_top3: float | None
    date_mean_dev: float | None
    date_median_dev: float | None
    n_samples: dict[str, int]
    all_lengths: dict[str, float | int | None]
    flagged: list[str]

    def to_dict(self) -> dict:
        return {
            "cer_by_length": {str(k): v for k, v in sorted(self.cer_by_length.items())},
            "cer_avg": self.cer_avg,
            "cer_micro": self.cer_micro,
            "top1": self.top1,
            "top20": self.top20,
            "place_top1": self.place_top1,
            "place_top3": self.place_top3,
            "date_mean_dev": self.date_mean_dev,
            "date_median_dev": self.date_median_dev,
            "n_samples": dict(sorted(self.n_samples.items())),
            "all_lengths": dict(sorted(self.all_lengths.items())),
            "flagged": sorted(self.flagged),
        }


def _mean(values: Iterable[float]) -> float:
    # summed in sorted order so merge order can never perturb the result
    ordered = sorted(values)
    return sum(ordered) / len(ordered)


def aggregate(partials: Sequence[EvalPartial]) -> EvalReport:
    """Merge partials (associative, commutative) into a final report."""
    merged = EvalPartial()
    for partial in partials:
        merged.merge(partial)
    cer_by_length = {
        bucket: _mean(values) for bucket, values in sorted(merged.cer_by_bucket.items())
    }
    restoration = merged.all_n > 0
    return EvalReport(
        cer_by_length=cer_by_length,
        cer_avg=_mean(cer_by_length.values()) if cer_by_length else None,
        cer_micro=(
            _mean(v for b, vs in merged.cer_by_bucket.items() for v in vs)
            if merged.cer_by_bucket
            else None
        ),
        top1=merged.bucket_top1 / merged.bucket_n if merged.bucket_n else None,
        top20=merged.bucket_top20 / merged.bucket_n if merged.bucket_n else None,
        place_top1=merged.place_top1 / merged.place_n if merged.place_n else None,
        place_top3=merged.place_top3 / merged.place_n if merged.place_n else None,
        date_mean_dev=_mean(merged.deviations) if merged.deviations else None,
        date_median_dev=(
            float(statistics.median(merged.deviations)) if merged.deviations else None
        ),
        n_samples={
            "restore": merged.bucket_n,
            "place": merged.place_n,
            "date": len(merged.deviations),
        },
        all_lengths={
            "n": merged.all_n,
            "top1": merged.all_top1 / merged.all_n if restoration else None,
            "top20": merged.all_top20 / merged.all_n if restoration else None,
            "cer_micro": _mean(merged.all_cer) if merged.all_cer else None,
        },
        flagged=sorted(merged.flagged),
    )


def write_report_json(
    report: EvalReport, path: str | Path, provenance: dict | None = None
) -> None:
    payload = report.to_dict()
    if provenance is not None:
        payload["provenance"] = provenance
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


CSV_COLUMNS = ("id", "task", "rank_of_gold", "cer", "deviation")


def write_per_sample_csv(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({col: row.get(col, "") for col in CSV_COLUMNS})
