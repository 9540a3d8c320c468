"""Adapter for remote chat-completion endpoints.

Speaks the de-facto chat JSON shape ({model, messages, n, ...}); candidate
scores are endpoint-defined and fall back to rank order when absent. The
auth token is never logged, never repr'd, and never written to caches.
"""

from __future__ import annotations

import json
import logging
import os
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from lacuna.corpus import letter_count, normalize_greek
from lacuna.metrics import CandidateList, eval_normalize

log = logging.getLogger(__name__)

AUTH_TOKEN_ENV = "LACUNA_API_TOKEN"

MAX_RETRIES = 3
MAX_CANDIDATES = 20


class EndpointError(RuntimeError):
    """Non-2xx response after retries."""

    def __init__(self, status: int, url: str):
        super().__init__(f"endpoint returned {status} for {url}")
        self.status = status


class ProtocolError(RuntimeError):
    """Response body not in the expected JSON shape."""


@dataclass
class EndpointConfig:
    base_url: str
    model_name: str
    auth_token: str | None = field(default=None, repr=False)
    timeout: float = 30.0
    max_parallel: int = 4
    n_best: int = 60
    decode_options: dict = field(default_factory=dict)
    retry_base_delay: float = 0.5

    def __post_init__(self) -> None:
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        if self.n_best < 1:
            raise ValueError("n_best must be >= 1")

    def resolved_token(self) -> str | None:
        return self.auth_token or os.environ.get(AUTH_TOKEN_ENV)


@dataclass(frozen=True, slots=True)
class ParsedCandidate:
    text: str
    flags: tuple[str, ...] = ()


def parse_assistant(
    raw: str, task: str, expected_letters: int | None = None
) -> ParsedCandidate | None:
    """Validate one assistant text; None means the candidate is dropped.

    Restorations are re-normalized through the corpus rules and flagged
    (not dropped) when the letter count disagrees with the request; dates
    must parse as a signed integer year; places are lowercased labels.
    """
    text = raw.strip()
    if task == "restore":
        text = normalize_greek(text)
        flags: tuple[str, ...] = ()
        if expected_letters is not None and letter_count(text) != expected_letters:
            flags = ("length_mismatch",)
        return ParsedCandidate(text, flags)
    if task == "date":
        try:
            int(text)
        except ValueError:
            return None
        return ParsedCandidate(str(int(text)))
    return ParsedCandidate(text.lower())


def candidate_flags(text: str, expected_letters: int | None) -> tuple[str, ...]:
    if expected_letters is not None and letter_count(text) != expected_letters:
        return ("length_mismatch",)
    return ()


def build_request_body(cfg: EndpointConfig, example) -> dict:
    """Deterministic JSON body for one example; the assistant turn is never sent."""
    return {
        "model": cfg.model_name,
        "messages": [
            {"role": "system", "content": example.system},
            {"role": "user", "content": example.user},
        ],
        "n": cfg.n_best,
        **cfg.decode_options,
    }


def _dedup_key(task: str, text: str) -> str:
    return eval_normalize(text) if task == "restore" else text


def _post_with_retries(cfg: EndpointConfig, url: str, body: dict, client: httpx.Client):
    headers = {}
    token = cfg.resolved_token()
    if token:
        headers["Authorization"] = f"Bearer {token}"
    last_status = None
    for attempt in range(MAX_RETRIES + 1):
        if attempt:
            time.sleep(cfg.retry_base_delay * 2 ** (attempt - 1))
        try:
            response = client.post(url, json=body, headers=headers, timeout=cfg.timeout)
        except httpx.TransportError as exc:
            log.warning("transport error on attempt %d: %s", attempt + 1, type(exc).__name__)
            last_status = None
            continue
        if response.status_code // 100 == 2:
            return response
        last_status = response.status_code
        if response.status_code < 500:
            break  # client errors are not retried
        log.warning("HTTP %d on attempt %d", response.status_code, attempt + 1)
    raise EndpointError(last_status or 0, url)


def request_candidates(
    cfg: EndpointConfig, example, client: httpx.Client | None = None
) -> CandidateList:
    """Fetch, parse, dedup, and rank candidates for one chat example.

    Retries idempotently on transport errors and 5xx up to 3 times with
    exponential backoff. An empty candidate list is a valid result the
    caller scores as a miss.
    """
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    body = build_request_body(cfg, example)
    own_client = client is None
    client = client or httpx.Client()
    try:
        response = _post_with_retries(cfg, url, body, client)
    finally:
        if own_client:
            client.close()

    try:
        data = response.json()
        choices = data["choices"]
        raw = [(c["message"]["content"], c.get("score")) for c in choices]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed response from {url}: {type(exc).__name__}") from exc

    if raw and all(score is not None for _, score in raw):
        raw.sort(key=lambda pair: -pair[1])
        scored = raw
    else:
        # rank order is the fallback score
        scored = [(text, float(-rank)) for rank, (text, _) in enumerate(raw)]

    expected = example.meta.get("gold_letter_count") if hasattr(example, "meta") else None
    seen: set[str] = set()
    kept: list[tuple[str, float]] = []
    for text, score in scored:
        parsed = parse_assistant(text, example.task, expected)
        if parsed is None:
            log.warning("dropped unparseable %s candidate for %s", example.task, example.id)
            continue
        key = _dedup_key(example.task, parsed.text)
        if key in seen:
            continue
        seen.add(key)
        kept.append((parsed.text, float(score)))
        if len(kept) >= MAX_CANDIDATES:
            break
    if not kept:
        log.warning("no usable candidates for %s", example.id)
    return CandidateList(
        sample_id=example.id, candidates=tuple(kept), produced_by=cfg.model_name
    )


def run_batch(
    cfg: EndpointConfig,
    examples: Sequence,
    cache_path: str | Path,
    client: httpx.Client | None = None,
) -> list[CandidateList]:
    """Fetch candidates for a batch, up to max_parallel in flight.

    Results are appended to the cache in input order as they complete, one
    whole line at a time, so an interrupted run leaves a valid prefix.
    """
    own_client = client is None
    client = client or httpx.Client()
    results: list[CandidateList] = []
    try:
        with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
            futures = [pool.submit(request_candidates, cfg, ex, client) for ex in examples]
            with open(cache_path, "a", encoding="utf-8") as fh:
                for future in futures:
                    clist = future.result()
                    fh.write(json.dumps(candidate_list_to_dict(clist), ensure_ascii=False))
                    fh.write("\n")
                    fh.flush()
                    results.append(clist)
    finally:
        if own_client:
            client.close()
    return results


def candidate_list_to_dict(clist: CandidateList) -> dict:
    return {
        "sample_id": clist.sample_id,
        "candidates": [{"text": text, "score": score} for text, score in clist.candidates],
    }


def candidate_list_from_dict(data: dict) -> CandidateList:
    return CandidateList(
        sample_id=data["sample_id"],
        candidates=tuple((c["text"], float(c.get("score", 0.0))) for c in data["candidates"]),
    )


def write_candidate_cache(lists: Iterable[CandidateList], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for clist in lists:
            fh.write(json.dumps(candidate_list_to_dict(clist), ensure_ascii=False))
            fh.write("\n")


def read_candidate_cache(path: str | Path) -> dict[str, CandidateList]:
    out: dict[str, CandidateList] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                clist = candidate_list_from_dict(json.loads(line))
                out[clist.sample_id] = clist
    return out
