"""Instruction-chat dataset construction: examples, filters, splits, JSONL.

Chat examples use a neutral `messages` schema (system/user/assistant); any
vendor-specific template is the consumer's business. Token counting is
pluggable because the 75/847 length bounds are tokenizer-specific; the
default proxy is ceil(chars / 2.5).
"""

from __future__ import annotations

import json
import math
import random
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from lacuna import corpus as corpus_mod
from lacuna.corpus import TextRecord
from lacuna.masking import MaskedSample, sample_mask, add_noise, shuffle_sentences, truncate

TASKS = ("restore", "place", "date")

_KIND_PHRASE = {"papyrus": "papyrus fragment", "inscription": "inscription"}

SYSTEM_PROMPTS = {
    (task, kind): template.format(phrase=phrase)
    for kind, phrase in _KIND_PHRASE.items()
    for task, template in {
        "restore": "Reconstruct the missing letters in this {phrase}!",
        "place": "Assign this {phrase} to an exact place!",
        "date": "Date this {phrase} to an exact year!",
    }.items()
}

MIN_TOKENS = 75
MAX_TOKENS = 847

SPLIT_SCHEMES = ("train95_test5", "train80_val10_test10", "phi_shared")


def default_token_counter(text: str) -> int:
    """Proxy token count: ceil(chars / 2.5). Swap in a real tokenizer via
    the `counter` argument of length_filter when exact bounds matter."""
    return math.ceil(len(text) / 2.5)


@dataclass(frozen=True, slots=True)
class ChatExample:
    """One system/user/assistant triple ready for JSONL serialization."""

    system: str
    user: str
    assistant: str
    task: str
    id: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.system not in SYSTEM_PROMPTS.values():
            raise ValueError(f"system prompt not one of the fixed prompts: {self.system!r}")


@dataclass(frozen=True, slots=True)
class MaskingOptions:
    """Knobs for restore-example construction."""

    letter_range: tuple[int, int] = (3, 20)
    versions: tuple[str, ...] = ("edited",)
    samples_per_version: int = 1
    noise_fractions: tuple[float, ...] = ()
    shuffle: bool = False
    truncate_range: tuple[int, int] | None = None


def _restore_meta(record: TextRecord, sample: MaskedSample, split_tag: str) -> dict:
    return {
        "corpus_kind": record.corpus_kind,
        "gold_letter_count": sample.gold_letter_count,
        "source_version": sample.source_version,
        "source_chars": len(sample.splice()),
        "split_tag": split_tag,
        "train_on_assistant_only": True,
        "task": "restore",
    }


def build_examples(
    record: TextRecord,
    task: str,
    rng: random.Random,
    options: MaskingOptions | None = None,
    split_tag: str = "unsplit",
) -> tuple[list[ChatExample], list[dict]]:
    """Build chat examples for one record; failures reported, not raised.

    Place and date examples present the diplomatic text; restore examples
    mask whichever versions the options request, with optional noise,
    sentence-shuffle, and truncation variants of the prompt.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    system = SYSTEM_PROMPTS[(task, record.corpus_kind)]
    base_meta = {
        "corpus_kind": record.corpus_kind,
        "split_tag": split_tag,
        "train_on_assistant_only": True,
        "task": task,
    }

    if task == "place":
        if record.place is None:
            return [], [{"id": record.id, "stage": "place", "message": "place missing"}]
        example = ChatExample(
            system, record.text_diplomatic, record.place, task, f"{record.id}:place", base_meta
        )
        return [example], []

    if task == "date":
        if record.date is None:
            return [], [{"id": record.id, "stage": "date", "message": "date missing"}]
        meta = {**base_meta, "date_post": record.date.post, "date_ante": record.date.ante}
        example = ChatExample(
            system,
            record.text_diplomatic,
            str(record.date.midpoint),
            task,
            f"{record.id}:date",
            meta,
        )
        return [example], []

    options = options or MaskingOptions()
    examples: list[ChatExample] = []
    errors: list[dict] = []
    for version in options.versions:
        for _ in range(options.samples_per_version):
            sample = sample_mask(record, rng, options.letter_range, version)
            if sample is None:
                errors.append(
                    {
                        "id": record.id,
                        "stage": "mask",
                        "message": f"no maskable span in {version} version",
                    }
                )
                continue
            meta = _restore_meta(record, sample, split_tag)
            variants: list[tuple[str, str]] = [("", sample.prompt_text)]
            for fraction in options.noise_fractions:
                variants.append((f"noise{fraction:.2f}", add_noise(sample.prompt_text, fraction, rng)))
            if options.shuffle:
                variants.append(("shuffle", shuffle_sentences(sample.prompt_text, rng)))
            for tag, user in variants:
                if options.truncate_range is not None:
                    user = truncate(user, *options.truncate_range, rng)
                    if user is None:
                        errors.append(
                            {"id": sample.id, "stage": "truncate", "message": "text below minimum"}
                        )
                        continue
                variant_meta = {**meta, "augmentation": tag} if tag else meta
                suffix = f"+{tag}" if tag else ""
                examples.append(
                    ChatExample(
                        system, user, sample.gold, task, f"{sample.id}{suffix}", variant_meta
                    )
                )
    return examples, errors


def build_restore_eval(
    records: Sequence[TextRecord],
    rng: random.Random,
    per_length: int = 100,
    lengths: Iterable[int] = range(1, 11),
    source_version: str = "diplomatic",
    min_source_chars: int = 90,
    split_tag: str = "test",
) -> list[ChatExample]:
    """Fixed-size evaluation set: up to `per_length` samples per gap length.

    Draws gaps of each exact length from eligible records until the quota
    is met or the corpus is exhausted (then: all available).
    """
    eligible = [
        r
        for r in records
        if len(r.text_edited if source_version == "edited" else r.text_diplomatic)
        >= min_source_chars
    ]
    out: list[ChatExample] = []
    for length in lengths:
        seen_ids: set[str] = set()
        collected: list[ChatExample] = []
        stagnant = 0
        while len(collected) < per_length and stagnant < 4:
            progress = False
            for record in eligible:
                if len(collected) >= per_length:
                    break
                sample = sample_mask(record, rng, (length, length), source_version)
                if sample is None or sample.id in seen_ids:
                    continue
                seen_ids.add(sample.id)
                system = SYSTEM_PROMPTS[("restore", record.corpus_kind)]
                collected.append(
                    ChatExample(
                        system,
                        sample.prompt_text,
                        sample.gold,
                        "restore",
                        sample.id,
                        _restore_meta(record, sample, split_tag),
                    )
                )
                progress = True
            stagnant = 0 if progress else stagnant + 1
        out.extend(collected)
    return out


def length_filter(
    example: ChatExample,
    counter: Callable[[str], int] | None = None,
    min_tokens: int = MIN_TOKENS,
    max_tokens: int = MAX_TOKENS,
) -> bool:
    """True iff the user text's token count lies within [min, max]."""
    counter = counter or default_token_counter
    return min_tokens <= counter(example.user) <= max_tokens


@dataclass(frozen=True, slots=True)
class SplitPlan:
    scheme: str
    seed: int = 0

    def __post_init__(self) -> None:
        if self.scheme not in SPLIT_SCHEMES:
            raise ValueError(f"unknown split scheme {self.scheme!r}")


def make_splits(ids: Sequence[str], plan: SplitPlan) -> dict[str, list[str]]:
    """Partition ids per the plan; deterministic given (scheme, seed).

    phi_shared puts ids with final decimal digit 3 in test and keeps ids
    ending in 3 or 4 out of train (digit-4 ids land in `excluded`).
    """
    ids = list(ids)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate ids in split input")
    if plan.scheme == "phi_shared":
        test = sorted(i for i in ids if i.endswith("3"))
        excluded = sorted(i for i in ids if i.endswith("4"))
        train = sorted(i for i in ids if not i.endswith(("3", "4")))
        return {"train": train, "test": test, "excluded": excluded}

    shuffled = sorted(ids)
    random.Random(plan.seed).shuffle(shuffled)
    n = len(shuffled)
    if plan.scheme == "train95_test5":
        n_test = round(n * 0.05)
        return {"train": sorted(shuffled[n_test:]), "test": sorted(shuffled[:n_test])}
    n_test = round(n * 0.10)
    n_val = round(n * 0.10)
    return {
        "train": sorted(shuffled[n_test + n_val :]),
        "val": sorted(shuffled[n_test : n_test + n_val]),
        "test": sorted(shuffled[:n_test]),
    }


def write_split_manifest(
    partitions: dict[str, list[str]], plan: SplitPlan, path: str | Path
) -> None:
    payload = {"scheme": plan.scheme, "seed": plan.seed, **partitions}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def read_split_manifest(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def example_to_dict(example: ChatExample) -> dict:
    return {
        "messages": [
            {"role": "system", "content": example.system},
            {"role": "user", "content": example.user},
            {"role": "assistant", "content": example.assistant},
        ],
        "id": example.id,
        "meta": example.meta,
    }


def example_from_dict(data: dict) -> ChatExample:
    by_role = {msg["role"]: msg["content"] for msg in data["messages"]}
    meta = data.get("meta", {})
    return ChatExample(
        system=by_role["system"],
        user=by_role["user"],
        assistant=by_role["assistant"],
        task=meta["task"],
        id=data["id"],
        meta=meta,
    )


def emit_jsonl(examples: Iterable[ChatExample], path: str | Path) -> None:
    """One compact JSON object per line; byte-stable given the same order."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for example in examples:
                fh.write(
                    json.dumps(example_to_dict(example), ensure_ascii=False, sort_keys=True)
                )
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write dataset to {path}: {exc}") from exc


def read_jsonl(path: str | Path) -> list[ChatExample]:
    with open(path, encoding="utf-8") as fh:
        return [example_from_dict(json.loads(line)) for line in fh if line.strip()]


def _augmentation_prompts() -> list[str]:
    text = resources.files("lacuna").joinpath("data/augmentation_prompts.json").read_text("utf-8")
    return json.loads(text)


AUGMENTATION_VARIANTS = 10


@dataclass(frozen=True, slots=True)
class AugmentationRequest:
    """Chat request asking a generative model for a text variant."""

    system: str
    user: str
    id: str
    task: str = "augment"
    meta: dict = field(default_factory=dict)


def build_augmentation_request(
    record: TextRecord, variant_index: int, rng: random.Random | None = None
) -> AugmentationRequest:
    """Deterministic augmentation request; variant 0 is the canonical prompt."""
    if not 0 <= variant_index < AUGMENTATION_VARIANTS:
        raise ValueError(f"variant_index must be in [0, {AUGMENTATION_VARIANTS}), got {variant_index}")
    prompts = _augmentation_prompts()
    return AugmentationRequest(
        system=prompts[variant_index],
        user=record.text_edited,
        id=f"{record.id}:aug{variant_index}",
        meta={"corpus_kind": record.corpus_kind, "variant": variant_index},
    )


def ingest_augmented(record: TextRecord, response_text: str, variant_index: int) -> TextRecord:
    """Fold a generated variant back in as a synthetic TextRecord."""
    result = corpus_mod.ingest(
        [
            corpus_mod.RawRecord(
                id=f"{record.id}-aug{variant_index}",
                corpus_kind=record.corpus_kind,
                leiden_text=response_text,
                date_post=record.date.post if record.date else None,
                date_ante=record.date.ante if record.date else None,
            )
        ]
    )
    if result.errors:
        raise corpus_mod.CorpusError(f"augmented text unparseable: {result.errors[0]['message']}")
    parsed = result.records[0]
    return TextRecord(
        id=parsed.id,
        corpus_kind=parsed.corpus_kind,
        text_edited=parsed.text_edited,
        text_diplomatic=parsed.text_diplomatic,
        date=record.date,
        place=record.place,
        origin="augmented",
    )
