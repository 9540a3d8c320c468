"""Corpus ingestion for ancient Greek documentary texts.

Parses Leiden-lite markup into edited and diplomatic versions, normalizes
Greek to a closed lowercase alphabet, and resolves date/place metadata.
The notation understood here is deliberately minimal: ``[abc]`` marks an
editorial restoration, ``[---]`` a long gap of unknown extent, and runs of
``.`` or ``-`` outside brackets a counted number of lost letters.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import unicodedata
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

# Lowercase Greek letters (U+03B1..U+03C9 includes final sigma) plus the
# archaic numerals stigma, koppa, and sampi that occur in dated texts.
GREEK_LETTERS = frozenset(chr(c) for c in range(0x3B1, 0x3CA)) | frozenset("ϛϙϡ")

HIGH_DOT = "·"

# Punctuation folded into the high dot during normalization.
_TO_HIGH_DOT = frozenset({".", ";", ":", "?", "·", "·", ";", "՝"})
# Dash-like characters treated as the plain hyphen loss marker.
_TO_HYPHEN = frozenset({"-", "‐", "‑", "‒", "–", "—", "−"})

_LONG_GAP_HYPHENS = 10

CORPUS_KINDS = ("inscription", "papyrus")


class CorpusError(Exception):
    """Base class for ingestion failures."""


class LeidenParseError(CorpusError):
    """Malformed Leiden-lite markup; carries the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class MetadataError(CorpusError):
    """Invalid date or place metadata."""


def is_letter(ch: str) -> bool:
    return ch in GREEK_LETTERS


def letter_count(text: str) -> int:
    """Number of Greek letters, excluding spaces, punctuation, and digits."""
    return sum(1 for ch in text if ch in GREEK_LETTERS)


def _normalize(text: str, keep: frozenset[str] = frozenset()) -> tuple[str, int]:
    """Shared normalization pipeline; returns (normalized, dropped_count).

    `keep` lists characters exempt from mapping/dropping — ingestion uses it
    to protect Leiden markup, where ``.`` is a loss marker, not punctuation.
    """
    decomposed = unicodedata.normalize("NFD", text)
    stripped = "".join(c for c in decomposed if unicodedata.category(c) != "Mn")
    lowered = stripped.lower()

    out: list[str] = []
    dropped = 0
    for ch in lowered:
        if ch in keep:
            out.append(ch)
        elif ch in GREEK_LETTERS or "0" <= ch <= "9":
            out.append(ch)
        elif ch.isspace():
            out.append(" ")
        elif ch in _TO_HYPHEN:
            out.append("-")
        elif ch == ",":
            continue
        elif ch in _TO_HIGH_DOT:
            out.append(HIGH_DOT)
        else:
            dropped += 1
    collapsed = re.sub(r" +", " ", "".join(out)).strip()
    return collapsed, dropped


def normalize_greek(text: str) -> str:
    """Normalize arbitrary Unicode Greek to the closed corpus alphabet.

    Canonical decomposition with all combining marks dropped, lowercased,
    commas deleted, remaining punctuation folded to "·", whitespace runs
    collapsed. Sigma forms are preserved as written. Idempotent.
    """
    normalized, dropped = _normalize(text)
    if dropped:
        log.warning("normalize_greek dropped %d unknown symbol(s)", dropped)
    return normalized


_LEIDEN_KEEP = frozenset("[].")


def parse_leiden(leiden_text: str) -> tuple[str, str]:
    """Split Leiden-lite markup into (edited, diplomatic) text versions.

    The edited version keeps restored letters in place; the diplomatic
    version replaces each restored character with one "-". ``[---]``
    becomes exactly 10 hyphens in both versions; counted lost letters
    (``.`` or ``-`` runs outside brackets) become that many hyphens in both.
    """
    edited: list[str] = []
    diplomatic: list[str] = []
    bracket_start = -1
    content: list[str] = []

    def byte_offset(i: int) -> int:
        return len(leiden_text[:i].encode("utf-8"))

    for i, ch in enumerate(leiden_text):
        if ch == "[":
            if bracket_start >= 0:
                raise LeidenParseError("nested bracket", byte_offset(i))
            bracket_start = i
            content = []
        elif ch == "]":
            if bracket_start < 0:
                raise LeidenParseError("unbalanced closing bracket", byte_offset(i))
            restored = "".join(content)
            if restored == "---":
                edited.append("-" * _LONG_GAP_HYPHENS)
                diplomatic.append("-" * _LONG_GAP_HYPHENS)
            elif "-" in restored or "." in restored:
                raise LeidenParseError(
                    "loss markers inside a restoration", byte_offset(bracket_start)
                )
            else:
                edited.append(restored)
                diplomatic.append("-" * len(restored))
            bracket_start = -1
        elif bracket_start >= 0:
            content.append(ch)
        elif ch in (".", "-"):
            edited.append("-")
            diplomatic.append("-")
        else:
            edited.append(ch)
            diplomatic.append(ch)

    if bracket_start >= 0:
        raise LeidenParseError("unbalanced opening bracket", byte_offset(bracket_start))
    return "".join(edited), "".join(diplomatic)


# Years live on a timeline with no year 0: index(-1) and index(+1) are adjacent.
def year_to_index(year: int) -> int:
    if year == 0:
        raise MetadataError("year 0 does not exist")
    return year - 1 if year > 0 else year


def index_to_year(index: int) -> int:
    return index + 1 if index >= 0 else index


@dataclass(frozen=True, slots=True)
class DateInterval:
    """Closed year interval with its midpoint; years are never 0."""

    post: int
    ante: int
    midpoint: int

    def __post_init__(self) -> None:
        if year_to_index(self.post) > year_to_index(self.ante):
            raise MetadataError(f"post {self.post} after ante {self.ante}")
        if not (
            year_to_index(self.post) <= year_to_index(self.midpoint) <= year_to_index(self.ante)
        ):
            raise MetadataError("midpoint outside interval")


_OPEN_SPAN_YEARS = 50
_OPEN_SPAN_OFFSET = 25


def resolve_date(date_post: int | None, date_ante: int | None) -> DateInterval | None:
    """Resolve a (possibly one-sided) date span into a DateInterval.

    Both bounds: midpoint of the span, rounded toward the ante bound on
    half-years. Post-only: [post, post+50] with midpoint 25 years after.
    Ante-only: the mirror. Neither: absent. All arithmetic skips year 0.
    """
    if date_post is None and date_ante is None:
        return None
    if date_post is not None and date_ante is not None:
        ip, ia = year_to_index(date_post), year_to_index(date_ante)
        if ip > ia:
            raise MetadataError(f"post {date_post} after ante {date_ante}")
    elif date_post is not None:
        ip = year_to_index(date_post)
        ia = ip + _OPEN_SPAN_YEARS
    else:
        ia = year_to_index(date_ante)
        ip = ia - _OPEN_SPAN_YEARS
    mid = (ip + ia + 1) // 2  # toward ante on half-years
    return DateInterval(index_to_year(ip), index_to_year(ia), index_to_year(mid))


@dataclass(frozen=True, slots=True)
class RawRecord:
    """One record as read from the input file, markup unparsed."""

    id: str
    corpus_kind: str
    leiden_text: str
    date_post: int | None = None
    date_ante: int | None = None
    place: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise MetadataError("empty record id")
        if self.corpus_kind not in CORPUS_KINDS:
            raise MetadataError(f"unknown corpus kind {self.corpus_kind!r}")
        for year in (self.date_post, self.date_ante):
            if year == 0:
                raise MetadataError(f"record {self.id}: year 0 does not exist")
        if (
            self.date_post is not None
            and self.date_ante is not None
            and year_to_index(self.date_post) > year_to_index(self.date_ante)
        ):
            raise MetadataError(
                f"record {self.id}: post {self.date_post} after ante {self.date_ante}"
            )


_NORMALIZED_RE = re.compile(r"[α-ωϛϙϡ0-9 ·-]*\Z")


@dataclass(frozen=True, slots=True)
class TextRecord:
    """A parsed, normalized text with resolved metadata.

    `text_edited` integrates editorial restorations; `text_diplomatic`
    replaces every restored character with "-". The two are always the
    same length, hyphen positions in the edited version are a subset of
    those in the diplomatic one, and intact runs agree letter-for-letter.
    """

    id: str
    corpus_kind: str
    text_edited: str
    text_diplomatic: str
    date: DateInterval | None = None
    place: str | None = None
    origin: str = "source"

    def __post_init__(self) -> None:
        if len(self.text_edited) != len(self.text_diplomatic):
            raise CorpusError(f"record {self.id}: version length mismatch")
        for text in (self.text_edited, self.text_diplomatic):
            if not _NORMALIZED_RE.match(text):
                raise CorpusError(f"record {self.id}: text outside normalized alphabet")
        for ed, dip in zip(self.text_edited, self.text_diplomatic):
            if ed == "-" and dip != "-":
                raise CorpusError(f"record {self.id}: edited hyphen over intact diplomatic")
            if ed != "-" and dip != "-" and ed != dip:
                raise CorpusError(f"record {self.id}: intact runs disagree")


@dataclass(frozen=True)
class PlaceTable:
    """Raw place label -> canonical label, loaded from a two-column TSV."""

    mapping: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_tsv(cls, path: str | Path) -> PlaceTable:
        mapping: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                raw, _, canonical = line.partition("\t")
                if not canonical:
                    raise CorpusError(f"place table line missing tab: {line!r}")
                mapping[raw] = canonical
        return cls(mapping)

    def lookup(self, raw: str) -> str | None:
        return self.mapping.get(raw)


@dataclass(frozen=True)
class IngestResult:
    records: list[TextRecord]
    errors: list[dict]


def ingest(records: Iterable[RawRecord], places: PlaceTable | None = None) -> IngestResult:
    """Parse, normalize, and resolve metadata for a batch of raw records.

    Per-record failures are collected into the error report instead of
    aborting the batch; output order equals input order.
    """
    out: list[TextRecord] = []
    errors: list[dict] = []
    for raw in records:
        try:
            cleaned, dropped = _normalize(raw.leiden_text, keep=_LEIDEN_KEEP)
            if dropped:
                log.warning("record %s: dropped %d unknown symbol(s)", raw.id, dropped)
            edited, diplomatic = parse_leiden(cleaned)
        except LeidenParseError as exc:
            errors.append(
                {"id": raw.id, "stage": "leiden", "message": str(exc), "offset": exc.offset}
            )
            continue
        try:
            interval = resolve_date(raw.date_post, raw.date_ante)
        except MetadataError as exc:
            errors.append({"id": raw.id, "stage": "date", "message": str(exc)})
            continue
        place = None
        if raw.place:
            place = places.lookup(raw.place) if places else None
            if place is None:
                log.warning("record %s: unmapped place %r", raw.id, raw.place)
        out.append(
            TextRecord(
                id=raw.id,
                corpus_kind=raw.corpus_kind,
                text_edited=edited,
                text_diplomatic=diplomatic,
                date=interval,
                place=place,
            )
        )
    return IngestResult(out, errors)


def _parse_year(value: str | int | None) -> int | None:
    if value is None or value == "":
        return None
    return int(value)


def _raw_from_fields(fields: dict) -> RawRecord:
    return RawRecord(
        id=str(fields.get("id") or ""),
        corpus_kind=str(fields.get("kind") or ""),
        leiden_text=str(fields.get("text") or ""),
        date_post=_parse_year(fields.get("date_post")),
        date_ante=_parse_year(fields.get("date_ante")),
        place=(fields.get("place") or None),
    )


def read_raw_records(path: str | Path) -> tuple[list[RawRecord], list[dict]]:
    """Read RawRecords from TSV or JSONL, selected by file extension.

    Row-level failures (bad year, unknown kind) are reported, not fatal;
    an unreadable file raises.
    """
    path = Path(path)
    records: list[RawRecord] = []
    errors: list[dict] = []
    if path.suffix in (".jsonl", ".json"):
        with open(path, encoding="utf-8") as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh, delimiter="\t"))
    for lineno, row in enumerate(rows, start=1):
        try:
            records.append(_raw_from_fields(row))
        except (MetadataError, ValueError) as exc:
            errors.append(
                {"id": str(row.get("id") or f"line {lineno}"), "stage": "read", "message": str(exc)}
            )
    return records, errors


def write_error_report(errors: Sequence[dict], path: str | Path) -> None:
    """One JSON object per failure: {id, stage, message, offset?}."""
    with open(path, "w", encoding="utf-8") as fh:
        for err in errors:
            fh.write(json.dumps(err, ensure_ascii=False) + "\n")


def record_to_dict(record: TextRecord) -> dict:
    return {
        "id": record.id,
        "kind": record.corpus_kind,
        "text_edited": record.text_edited,
        "text_diplomatic": record.text_diplomatic,
        "date_post": record.date.post if record.date else None,
        "date_ante": record.date.ante if record.date else None,
        "date_midpoint": record.date.midpoint if record.date else None,
        "place": record.place,
        "origin": record.origin,
    }


def record_from_dict(data: dict) -> TextRecord:
    date = None
    if data.get("date_post") is not None:
        date = DateInterval(data["date_post"], data["date_ante"], data["date_midpoint"])
    return TextRecord(
        id=data["id"],
        corpus_kind=data["kind"],
        text_edited=data["text_edited"],
        text_diplomatic=data["text_diplomatic"],
        date=date,
        place=data.get("place"),
        origin=data.get("origin", "source"),
    )


def write_text_records(records: Sequence[TextRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


def load_text_records(path: str | Path) -> list[TextRecord]:
    with open(path, encoding="utf-8") as fh:
        return [record_from_dict(json.loads(line)) for line in fh if line.strip()]
