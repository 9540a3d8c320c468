"""Gap sampling and training-time augmentations.

Gaps are sized in letters, not characters: the placeholder counts only
Greek letters, while the hidden gold string keeps its spaces, punctuation,
and digits. Span selection is weighted by the square of the span's letter
length, and at most half of a span's letters may ever be masked.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from lacuna.corpus import HIGH_DOT, TextRecord, is_letter, letter_count

PLACEHOLDER_RE = re.compile(r"\[(\d+) letters? missing\]")

NOISE_FRACTIONS = (0.05, 0.10, 0.15, 0.20, 0.25)

MAX_GAP_LETTERS = 20


def placeholder_for(n: int) -> str:
    return f"[{n} letter missing]" if n == 1 else f"[{n} letters missing]"


@dataclass(frozen=True, slots=True)
class IntactSpan:
    """Maximal hyphen-free run of text; letters exclude spaces, "·", digits."""

    start: int
    length_chars: int
    length_letters: int


@dataclass(frozen=True, slots=True)
class MaskedSample:
    """One text with a single sampled gap and its hidden gold sequence."""

    id: str
    prompt_text: str
    placeholder: str
    gold: str
    gold_letter_count: int
    source_version: str

    def __post_init__(self) -> None:
        if not 1 <= self.gold_letter_count <= MAX_GAP_LETTERS:
            raise ValueError(f"gap of {self.gold_letter_count} letters out of range")
        if self.placeholder != placeholder_for(self.gold_letter_count):
            raise ValueError(f"malformed placeholder {self.placeholder!r}")
        if letter_count(self.gold) != self.gold_letter_count:
            raise ValueError("placeholder letter count disagrees with gold")
        if not (is_letter(self.gold[0]) and is_letter(self.gold[-1])):
            raise ValueError("gold must start and end on a letter")
        if self.source_version not in ("edited", "diplomatic"):
            raise ValueError(f"unknown source version {self.source_version!r}")

    def splice(self) -> str:
        """Reconstruct the source text by substituting gold for the placeholder."""
        return self.prompt_text.replace(self.placeholder, self.gold, 1)


def find_intact_spans(text: str) -> list[IntactSpan]:
    """Maximal hyphen-free runs in order; runs with zero letters excluded."""
    spans: list[IntactSpan] = []
    i, n = 0, len(text)
    while i < n:
        if text[i] == "-":
            i += 1
            continue
        j = i
        while j < n and text[j] != "-":
            j += 1
        letters = letter_count(text[i:j])
        if letters > 0:
            spans.append(IntactSpan(i, j - i, letters))
        i = j
    return spans


def mask_at(
    text: str,
    start: int,
    letters: int,
    *,
    sample_id: str = "",
    source_version: str = "edited",
) -> MaskedSample:
    """Mask exactly `letters` letters starting at char offset `start`.

    `start` must sit on a letter; the gap ends on its last letter, so the
    gold keeps interior spaces and punctuation but never edge ones.
    """
    if not (0 <= start < len(text)) or not is_letter(text[start]):
        raise ValueError(f"gap start {start} is not on a letter")
    seen = 0
    end = start
    for i in range(start, len(text)):
        if text[i] == "-":
            raise ValueError("gap crosses a lacuna hyphen")
        if is_letter(text[i]):
            seen += 1
            end = i
            if seen == letters:
                break
    if seen < letters:
        raise ValueError(f"only {seen} letters available from offset {start}")
    gold = text[start : end + 1]
    placeholder = placeholder_for(letters)
    return MaskedSample(
        id=sample_id or f"@{start}+{letters}",
        prompt_text=text[:start] + placeholder + text[end + 1 :],
        placeholder=placeholder,
        gold=gold,
        gold_letter_count=letters,
        source_version=source_version,
    )


def sample_mask(
    record: TextRecord,
    rng: random.Random,
    letter_range: tuple[int, int] = (3, 20),
    source_version: str = "edited",
) -> MaskedSample | None:
    """Sample one gap from a record, or None when no span is big enough.

    Eligible spans can give up at least `letter_range[0]` letters without
    crossing the 50% cap; one is chosen with probability proportional to
    its squared letter length, then the gap size and position uniformly.
    """
    lmin, lmax = letter_range
    if lmin < 1 or lmax > MAX_GAP_LETTERS or lmin > lmax:
        raise ValueError(f"letter range {letter_range} outside [1, {MAX_GAP_LETTERS}]")
    text = record.text_edited if source_version == "edited" else record.text_diplomatic
    eligible = [s for s in find_intact_spans(text) if s.length_letters // 2 >= lmin]
    if not eligible:
        return None
    weights = [s.length_letters**2 for s in eligible]
    span = rng.choices(eligible, weights=weights)[0]
    letters = rng.randint(lmin, min(lmax, span.length_letters // 2))
    positions = [
        i for i in range(span.start, span.start + span.length_chars) if is_letter(text[i])
    ]
    start = rng.choice(positions[: span.length_letters - letters + 1])
    return mask_at(
        text,
        start,
        letters,
        sample_id=f"{record.id}:{source_version}:{start}+{letters}",
        source_version=source_version,
    )


def add_noise(text: str, fraction: float, rng: random.Random) -> str:
    """Replace round(fraction * preserved letters) letters with "-".

    Only letters are ever replaced (spaces, punctuation, and digits carry
    the letter-count semantics), and the placeholder region is exempt.
    Rounding is half-up.
    """
    if fraction not in NOISE_FRACTIONS:
        raise ValueError(f"noise fraction must be one of {NOISE_FRACTIONS}, got {fraction}")
    gap = PLACEHOLDER_RE.search(text)
    exempt = range(gap.start(), gap.end()) if gap else range(0)
    positions = [i for i, ch in enumerate(text) if is_letter(ch) and i not in exempt]
    k = int(fraction * len(positions) + 0.5)
    chars = list(text)
    for i in rng.sample(positions, k):
        chars[i] = "-"
    return "".join(chars)


def shuffle_sentences(text: str, rng: random.Random) -> str:
    """Uniformly permute "·"-separated segments, keeping a trailing delimiter."""
    trailing = text.endswith(HIGH_DOT)
    parts = text.split(HIGH_DOT)
    if trailing:
        parts = parts[:-1]
    if len(parts) <= 1:
        return text
    rng.shuffle(parts)
    return HIGH_DOT.join(parts) + (HIGH_DOT if trailing else "")


def truncate(text: str, min_chars: int, max_chars: int, rng: random.Random) -> str | None:
    """Window the text to at most max_chars without splitting a placeholder.

    Texts shorter than min_chars are rejected (None); texts within bounds
    pass through; longer ones get a uniformly placed window of exactly
    max_chars that contains the placeholder whenever one is present.
    """
    if min_chars > max_chars:
        raise ValueError(f"min {min_chars} exceeds max {max_chars}")
    if len(text) < min_chars:
        return None
    if len(text) <= max_chars:
        return text
    last = len(text) - max_chars
    gap = PLACEHOLDER_RE.search(text)
    if gap:
        lo = max(0, gap.end() - max_chars)
        hi = min(last, gap.start())
        if lo > hi:
            raise ValueError("placeholder longer than the truncation window")
    else:
        lo, hi = 0, last
    start = rng.randint(lo, hi)
    return text[start : start + max_chars]
