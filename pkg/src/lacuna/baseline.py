"""Character n-gram baseline: beam-search gap filling and attribution.

A desk-scale stand-in for a fine-tuned LLM. The language model uses stupid
backoff (factor 0.4) with add-0.5 smoothing at the unigram floor,
renormalized so the next-character distribution sums to one exactly. Gap
filling counts letters only: generated spaces and punctuation are free, at
most one non-letter may appear in a row, and the completed beam is scored
against the first (order-1) characters of the right context.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from lacuna.corpus import is_letter, letter_count
from lacuna.metrics import CandidateList, eval_normalize

SENTINEL = "\x02"  # begin-of-text marker, never part of the vocabulary

FORMAT_VERSION = 1

DATE_BIN_YEARS = 50
DATE_RANGE = (-800, 800)

_DIST_CACHE_LIMIT = 200_000


class UntrainedModelError(ValueError):
    pass


@dataclass
class CharLM:
    """Count-based character language model with stupid backoff.

    `counts` maps a context string (length 0..order-1, possibly starting
    with the begin-of-text sentinel) to next-character counts. Models are
    immutable after training and safe to share across threads.
    """

    order: int = 6
    backoff_factor: float = 0.4
    counts: dict[str, dict[str, int]] = field(default_factory=dict)
    vocabulary: tuple[str, ...] = ()
    _totals: dict[str, int] = field(default_factory=dict, repr=False)
    _floor: dict[str, float] = field(default_factory=dict, repr=False)
    _dist_cache: dict[str, tuple[dict[str, float], float]] = field(
        default_factory=dict, repr=False
    )
    _logdist_cache: dict[str, dict[str, float]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self._totals:
            self._totals = {ctx: sum(nxt.values()) for ctx, nxt in self.counts.items()}
        # add-0.5 unigram floor keeps every vocabulary character positive
        uni = self.counts.get("", {})
        denom = self._totals.get("", 0) + 0.5 * len(self.vocabulary)
        if denom:
            self._floor = {ch: (uni.get(ch, 0) + 0.5) / denom for ch in self.vocabulary}

    def _raw_single(self, key: str, char: str) -> float:
        # top-down backoff walk for one (usually out-of-vocabulary) character
        multiplier = 1.0
        for k in range(min(self.order - 1, len(key)), 0, -1):
            table = self.counts.get(key[-k:])
            if not table:
                continue
            count = table.get(char, 0)
            if count > 0:
                return multiplier * count / self._totals[key[-k:]]
            multiplier *= self.backoff_factor
        uni = self.counts.get("", {})
        denom = self._totals.get("", 0) + 0.5 * len(self.vocabulary)
        return multiplier * (uni.get(char, 0) + 0.5) / denom

    def distribution(self, context: str) -> tuple[dict[str, float], float]:
        """Normalized next-char distribution over the vocabulary plus its
        raw normalizer (used to keep out-of-vocabulary queries finite)."""
        key = context[-(self.order - 1) :]
        cached = self._dist_cache.get(key)
        if cached is not None:
            return cached
        # bottom-up overlay: each present level either takes over with its
        # count estimate or backs the running score off by the factor
        scores = dict(self._floor)
        backoff = self.backoff_factor
        for k in range(1, min(self.order - 1, len(key)) + 1):
            table = self.counts.get(key[-k:])
            if not table:
                continue
            total = self._totals[key[-k:]]
            for ch in scores:
                count = table.get(ch, 0)
                scores[ch] = count / total if count else backoff * scores[ch]
        z = sum(scores.values())
        dist = {ch: score / z for ch, score in scores.items()}
        if len(self._dist_cache) >= _DIST_CACHE_LIMIT:
            self._dist_cache.clear()
        self._dist_cache[key] = (dist, z)
        return dist, z

    def log_distribution(self, context: str) -> dict[str, float]:
        key = context[-(self.order - 1) :]
        cached = self._logdist_cache.get(key)
        if cached is None:
            dist, _ = self.distribution(key)
            cached = {ch: math.log(p) for ch, p in dist.items()}
            if len(self._logdist_cache) >= _DIST_CACHE_LIMIT:
                self._logdist_cache.clear()
            self._logdist_cache[key] = cached
        return cached

    def logp(self, context: str, char: str) -> float:
        """Log P(char | context); finite even for unseen characters."""
        logdist = self.log_distribution(context)
        logprob = logdist.get(char)
        if logprob is None:
            key = context[-(self.order - 1) :]
            _, z = self.distribution(key)
            logprob = math.log(self._raw_single(key, char) / z)
        return logprob

    def sequence_logp(self, text: str) -> float:
        """Log-probability of a whole text, begin-of-text sentinel included."""
        padded = SENTINEL + text
        return sum(self.logp(padded[:i], padded[i]) for i in range(1, len(padded)))


def train_lm(texts: Iterable[str], order: int = 6, backoff_factor: float = 0.4) -> CharLM:
    """Accumulate n-gram counts over all context lengths below `order`."""
    if order < 2:
        raise ValueError(f"order must be >= 2, got {order}")
    texts = [t for t in texts if t]
    if not texts:
        raise UntrainedModelError("empty training corpus")
    counts: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    vocabulary: set[str] = set()
    for text in texts:
        padded = SENTINEL + text
        for i in range(1, len(padded)):
            char = padded[i]
            vocabulary.add(char)
            for k in range(min(order - 1, i) + 1):
                counts[padded[i - k : i]][char] += 1
    frozen = {ctx: dict(nxt) for ctx, nxt in counts.items()}
    return CharLM(
        order=order,
        backoff_factor=backoff_factor,
        counts=frozen,
        vocabulary=tuple(sorted(vocabulary)),
    )


@dataclass(frozen=True, slots=True)
class Beam:
    filled: str
    letters_done: int
    score: float


def restore(
    lm: CharLM,
    left: str,
    right: str,
    letters: int,
    beam_width: int = 60,
    top_n: int = 20,
    sample_id: str = "",
) -> CandidateList:
    """Beam-search fill of a gap of exactly `letters` letters.

    Candidates never start or end on a non-letter, never contain two
    consecutive non-letters, and are capped at 2*letters+2 characters.
    Complete beams add the log-probability of the first (order-1) right
    context characters, so the fill has to connect both ways. The output
    is deduplicated on the evaluation normalization, best score first,
    ties broken lexicographically.
    """
    if not 1 <= letters <= 20:
        raise ValueError(f"letters must be in [1, 20], got {letters}")
    max_chars = 2 * letters + 2
    key_len = lm.order - 1
    letter_chars = [ch for ch in lm.vocabulary if is_letter(ch)]
    other_chars = [ch for ch in lm.vocabulary if not is_letter(ch) and ch != "-"]
    coupling_len = min(key_len, len(right))

    # the coupling score depends on left+filled only through its last
    # (order-1) characters, so completed beams sharing that suffix share it
    coupling_cache: dict[str, float] = {}

    def coupling(context: str) -> float:
        key = context[-key_len:]
        value = coupling_cache.get(key)
        if value is None:
            value = 0.0
            for j in range(coupling_len):
                value += lm.logp(context + right[:j], right[j])
            coupling_cache[key] = value
        return value

    # beams are (filled, letters_done, score) tuples during the search
    active = [("", 0, 0.0)]
    complete: list[tuple[str, float]] = []
    while active:
        extensions: list[tuple[str, int, float]] = []
        for filled, done, score in active:
            logdist = lm.log_distribution(left + filled)
            budget = max_chars - len(filled) - 1
            missing = letters - done
            if missing == 1:
                for ch in letter_chars:
                    grown = filled + ch
                    complete.append((grown, score + logdist[ch] + coupling(left + grown)))
            elif missing <= budget + 1:  # an all-letter finish may use every char
                for ch in letter_chars:
                    extensions.append((filled + ch, done + 1, score + logdist[ch]))
            if missing <= budget and filled and is_letter(filled[-1]):
                # one non-letter at a time, never leading or trailing
                for ch in other_chars:
                    extensions.append((filled + ch, done, score + logdist[ch]))
        extensions.sort(key=lambda b: (-b[2], b[0]))
        active = extensions[:beam_width]

    complete.sort(key=lambda b: (-b[1], b[0]))
    seen: set[str] = set()
    chosen: list[tuple[str, float]] = []
    for text, score in complete:
        key = eval_normalize(text)
        if key in seen:
            continue
        seen.add(key)
        chosen.append((text, score))
        if len(chosen) >= top_n:
            break
    return CandidateList(
        sample_id=sample_id,
        candidates=tuple(chosen),
        produced_by=f"charlm-order{lm.order}",
    )


@dataclass
class ClassifierSet:
    """Per-label LMs for place labels and per-bin LMs for 50-year date bins."""

    place_models: dict[str, CharLM] = field(default_factory=dict)
    place_counts: dict[str, int] = field(default_factory=dict)
    date_models: dict[int, CharLM] = field(default_factory=dict)
    date_counts: dict[int, int] = field(default_factory=dict)


def date_bin_index(year: int) -> int:
    lo, hi = DATE_RANGE
    n_bins = (hi - lo) // DATE_BIN_YEARS
    return min(max((year - lo) // DATE_BIN_YEARS, 0), n_bins - 1)


def date_bin_bounds(index: int) -> tuple[int, int]:
    start = DATE_RANGE[0] + index * DATE_BIN_YEARS
    return start, start + DATE_BIN_YEARS


def date_bin_midpoint(index: int) -> float:
    start, _ = date_bin_bounds(index)
    return start + DATE_BIN_YEARS / 2


def train_classifiers(
    place_pairs: Iterable[tuple[str, str]] = (),
    date_pairs: Iterable[tuple[str, int]] = (),
    order: int = 6,
    backoff_factor: float = 0.4,
) -> ClassifierSet:
    """Train per-place and per-date-bin models from (text, label) pairs."""
    by_place: dict[str, list[str]] = defaultdict(list)
    for text, label in place_pairs:
        by_place[label].append(text)
    by_bin: dict[int, list[str]] = defaultdict(list)
    for text, year in date_pairs:
        by_bin[date_bin_index(year)].append(text)
    return ClassifierSet(
        place_models={
            label: train_lm(texts, order, backoff_factor) for label, texts in by_place.items()
        },
        place_counts={label: len(texts) for label, texts in by_place.items()},
        date_models={
            idx: train_lm(texts, order, backoff_factor) for idx, texts in by_bin.items()
        },
        date_counts={idx: len(texts) for idx, texts in by_bin.items()},
    )


def _label_score(lm: CharLM, prior: float, text: str) -> float:
    # per-letter likelihood so the ranking is insensitive to text length
    letters = max(letter_count(text), 1)
    return math.log(prior) + lm.sequence_logp(text) / letters


def classify_place(classifiers: ClassifierSet, text: str) -> list[tuple[str, float]]:
    """Ranked (label, score) pairs; ties broken lexicographically."""
    if not classifiers.place_models:
        raise UntrainedModelError("no place models trained")
    total = sum(classifiers.place_counts.values())
    scored = [
        (label, _label_score(lm, classifiers.place_counts[label] / total, text))
        for label, lm in classifiers.place_models.items()
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored


def estimate_date(
    classifiers: ClassifierSet, text: str
) -> tuple[int, list[tuple[int, int, float]]]:
    """Expected year under the posterior over date bins.

    Returns (year, distribution) where the distribution lists
    (bin_start, bin_end, probability) for every trained bin.
    """
    if not classifiers.date_models:
        raise UntrainedModelError("no date models trained")
    total = sum(classifiers.date_counts.values())
    scores = {
        idx: _label_score(lm, classifiers.date_counts[idx] / total, text)
        for idx, lm in classifiers.date_models.items()
    }
    peak = max(scores.values())
    weights = {idx: math.exp(s - peak) for idx, s in scores.items()}
    z = sum(weights.values())
    posterior = {idx: w / z for idx, w in weights.items()}
    expectation = sum(p * date_bin_midpoint(idx) for idx, p in posterior.items())
    year = round(expectation)
    if year == 0:  # the timeline has no year 0
        year = 1
    distribution = [
        (*date_bin_bounds(idx), posterior[idx]) for idx in sorted(posterior)
    ]
    return year, distribution


def _lm_to_dict(lm: CharLM) -> dict:
    return {
        "order": lm.order,
        "backoff_factor": lm.backoff_factor,
        "vocabulary": list(lm.vocabulary),
        "counts": {ctx: dict(sorted(nxt.items())) for ctx, nxt in sorted(lm.counts.items())},
    }


def _lm_from_dict(data: dict) -> CharLM:
    return CharLM(
        order=data["order"],
        backoff_factor=data["backoff_factor"],
        counts={ctx: dict(nxt) for ctx, nxt in data["counts"].items()},
        vocabulary=tuple(data["vocabulary"]),
    )


def save_model(model: CharLM | ClassifierSet, path: str | Path) -> None:
    """Persist a model as a versioned JSON count table; round-trip exact."""
    if isinstance(model, CharLM):
        payload = {
            "format_version": FORMAT_VERSION,
            "type": "charlm",
            "order": model.order,
            "backoff_factor": model.backoff_factor,
            **_lm_to_dict(model),
        }
    else:
        any_lm = next(iter(model.place_models.values()), None) or next(
            iter(model.date_models.values()), None
        )
        payload = {
            "format_version": FORMAT_VERSION,
            "type": "classifiers",
            "order": any_lm.order if any_lm else 6,
            "backoff_factor": any_lm.backoff_factor if any_lm else 0.4,
            "place": {
                "models": {lbl: _lm_to_dict(lm) for lbl, lm in sorted(model.place_models.items())},
                "counts": dict(sorted(model.place_counts.items())),
            },
            "date": {
                "models": {str(i): _lm_to_dict(lm) for i, lm in sorted(model.date_models.items())},
                "counts": {str(i): n for i, n in sorted(model.date_counts.items())},
            },
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")


def load_model(path: str | Path) -> CharLM | ClassifierSet:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {data.get('format_version')!r}")
    if data["type"] == "charlm":
        return _lm_from_dict(data)
    return ClassifierSet(
        place_models={lbl: _lm_from_dict(d) for lbl, d in data["place"]["models"].items()},
        place_counts=dict(data["place"]["counts"]),
        date_models={int(i): _lm_from_dict(d) for i, d in data["date"]["models"].items()},
        date_counts={int(i): n for i, n in data["date"]["counts"].items()},
    )


def random_filler(
    vocabulary: Sequence[str], letters: int, rng, top_n: int = 20, sample_id: str = ""
) -> CandidateList:
    """Uniform-random letter sequences; the null model baselines are scored against."""
    alphabet = sorted({ch for ch in vocabulary if is_letter(ch)})
    if not alphabet:
        raise UntrainedModelError("no letters in vocabulary")
    seen: set[str] = set()
    out: list[tuple[str, float]] = []
    for rank in range(top_n):
        text = "".join(rng.choice(alphabet) for _ in range(letters))
        if text in seen:
            continue
        seen.add(text)
        out.append((text, float(-rank)))
    return CandidateList(sample_id=sample_id, candidates=tuple(out), produced_by="random")
