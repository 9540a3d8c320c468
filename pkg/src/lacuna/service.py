"""HTTP service backing the workbench UI.

JSON API under /v1: gap restoration, place/date attribution, corpus stats.
Loaded models are read-only shared state; every response carries provenance
(model id, seed, version) and identical request + seed yields an identical
response. Restoration work is bounded by a small worker semaphore.
"""

from __future__ import annotations

import os
import threading

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from lacuna import __version__
from lacuna import baseline as baseline_mod
from lacuna import corpus as corpus_mod
from lacuna import inference as inference_mod
from lacuna import masking as masking_mod

SERVICE_TOKEN_ENV = "LACUNA_SERVICE_TOKEN"


class RestoreBody(BaseModel):
    text: str
    n: int = 20
    gap_start: int | None = None
    gap_chars: int | None = None
    letters: int | None = None
    beam_width: int = 60


class AttributeBody(BaseModel):
    text: str


def _split_gap(body: RestoreBody) -> tuple[str, str, int]:
    match = masking_mod.PLACEHOLDER_RE.search(body.text)
    if match:
        return body.text[: match.start()], body.text[match.end() :], int(match.group(1))
    if body.gap_start is None or body.letters is None:
        raise HTTPException(
            status_code=400,
            detail=[
                {
                    "field": "text",
                    "message": "need a [N letters missing] placeholder or gap_start+letters",
                }
            ],
        )
    gap_chars = body.gap_chars or 0
    return body.text[: body.gap_start], body.text[body.gap_start + gap_chars :], body.letters


def create_app(
    model_path: str | None = None,
    classifiers_path: str | None = None,
    records_path: str | None = None,
    seed: int = 0,
    static_dir: str | None = None,
    max_workers: int = 4,
) -> FastAPI:
    lm = None
    if model_path:
        model = baseline_mod.load_model(model_path)
        if not isinstance(model, baseline_mod.CharLM):
            raise ValueError(f"{model_path} is not a restoration model")
        lm = model
    classifiers = None
    if classifiers_path:
        loaded = baseline_mod.load_model(classifiers_path)
        if not isinstance(loaded, baseline_mod.ClassifierSet):
            raise ValueError(f"{classifiers_path} is not an attribution model")
        classifiers = loaded
    records = corpus_mod.load_text_records(records_path) if records_path else []

    provenance = {
        "model_id": os.path.basename(model_path) if model_path else None,
        "classifiers_id": os.path.basename(classifiers_path) if classifiers_path else None,
        "seed": seed,
        "version": __version__,
    }
    workers = threading.Semaphore(max_workers)
    app = FastAPI(title="lacuna service", version=__version__)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        detail = [
            {"field": ".".join(str(p) for p in err["loc"] if p != "body"), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    async def _check_token(request: Request) -> None:
        token = os.environ.get(SERVICE_TOKEN_ENV)
        if token and request.headers.get("Authorization") != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="invalid bearer token")

    auth = Depends(_check_token)

    @app.get("/v1/health")
    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/v1/corpus/stats", dependencies=[auth])
    def corpus_stats():
        return {
            "records": len(records),
            "inscriptions": sum(1 for r in records if r.corpus_kind == "inscription"),
            "papyri": sum(1 for r in records if r.corpus_kind == "papyrus"),
            "dated": sum(1 for r in records if r.date is not None),
            "placed": sum(1 for r in records if r.place is not None),
            "provenance": provenance,
        }

    @app.post("/v1/restore", dependencies=[auth])
    def restore(body: RestoreBody):
        if lm is None:
            raise HTTPException(status_code=503, detail="no restoration model loaded")
        left, right, letters = _split_gap(body)
        if not 1 <= letters <= masking_mod.MAX_GAP_LETTERS:
            raise HTTPException(
                status_code=400,
                detail=[{"field": "letters", "message": "letters must be in [1, 20]"}],
            )
        with workers:
            clist = baseline_mod.restore(
                lm, left, right, letters, beam_width=body.beam_width, top_n=body.n
            )
        return {
            "letters": letters,
            "candidates": [
                {
                    "text": text,
                    "score": score,
                    "letters_ok": not inference_mod.candidate_flags(text, letters),
                }
                for text, score in clist.candidates
            ],
            "provenance": provenance,
        }

    @app.post("/v1/attribute/place", dependencies=[auth])
    def attribute_place(body: AttributeBody):
        if classifiers is None or not classifiers.place_models:
            raise HTTPException(status_code=503, detail="no place model loaded")
        ranked = baseline_mod.classify_place(classifiers, body.text)
        return {
            "labels": [{"label": label, "score": score} for label, score in ranked],
            "provenance": provenance,
        }

    @app.post("/v1/attribute/date", dependencies=[auth])
    def attribute_date(body: AttributeBody):
        if classifiers is None or not classifiers.date_models:
            raise HTTPException(status_code=503, detail="no date model loaded")
        year, distribution = baseline_mod.estimate_date(classifiers, body.text)
        return {
            "year": year,
            "distribution": [{"start": lo, "end": hi, "p": p} for lo, hi, p in distribution],
            "provenance": provenance,
        }

    if static_dir:
        app.mount("/app", StaticFiles(directory=static_dir, html=True), name="workbench")

    return app
