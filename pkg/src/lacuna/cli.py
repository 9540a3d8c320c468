"""Command-line entry points for the full pipeline.

Every artifact the CLI writes gets a `<path>.provenance.json` sidecar
recording the producing command, its arguments, and the seed, enough to
re-run it. Exit codes: 0 success, 1 validation/usage error, 2 runtime
error. `--seed` makes every stage reproducible byte-for-byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
from pathlib import Path

from lacuna import __version__
from lacuna import baseline as baseline_mod
from lacuna import corpus as corpus_mod
from lacuna import dataset as dataset_mod
from lacuna import inference as inference_mod
from lacuna import masking as masking_mod
from lacuna import merge as merge_mod
from lacuna import metrics as metrics_mod


class UsageError(Exception):
    def __init__(self, message: str, parser: argparse.ArgumentParser):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 instead of argparse's 2
        raise UsageError(message, self)


def _record_rng(seed: int, record_id: str, purpose: str = "") -> random.Random:
    digest = hashlib.sha256(f"{seed}:{record_id}:{purpose}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _provenance(command: str, args: argparse.Namespace) -> dict:
    skip = {"func", "command"}
    return {
        "tool": "lacuna",
        "version": __version__,
        "command": command,
        "args": {
            k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None
        },
    }


def _write_provenance(artifact: str | Path, command: str, args: argparse.Namespace) -> None:
    path = Path(str(artifact) + ".provenance.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_provenance(command, args), fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    records, errors = corpus_mod.read_raw_records(args.input)
    places = corpus_mod.PlaceTable.from_tsv(args.places) if args.places else None
    result = corpus_mod.ingest(records, places)
    errors = errors + result.errors
    corpus_mod.write_text_records(result.records, args.output)
    _write_provenance(args.output, "ingest", args)
    if args.errors:
        corpus_mod.write_error_report(errors, args.errors)
        _write_provenance(args.errors, "ingest", args)
    print(f"ingested {len(result.records)} records, {len(errors)} failures", file=sys.stderr)
    return 0


def _filtered_records(args) -> list[corpus_mod.TextRecord]:
    records = corpus_mod.load_text_records(args.records)
    if getattr(args, "split_manifest", None):
        manifest = dataset_mod.read_split_manifest(args.split_manifest)
        wanted = set(manifest[args.split])
        records = [r for r in records if r.id in wanted]
    return records


def cmd_build_dataset(args) -> int:
    records = _filtered_records(args)
    errors: list[dict] = []
    if args.eval_per_length:
        rng = random.Random(args.seed)
        examples = dataset_mod.build_restore_eval(
            records,
            rng,
            per_length=args.eval_per_length,
            source_version=args.versions.split(",")[0],
        )
    else:
        options = dataset_mod.MaskingOptions(
            letter_range=(args.letter_min, args.letter_max),
            versions=tuple(args.versions.split(",")),
            samples_per_version=args.per_record,
            noise_fractions=tuple(args.noise or ()),
            shuffle=args.shuffle,
            truncate_range=tuple(args.truncate) if args.truncate else None,
        )
        examples = []
        for record in records:
            built, errs = dataset_mod.build_examples(
                record,
                args.task,
                _record_rng(args.seed, record.id, args.task),
                options,
                split_tag=args.split or "unsplit",
            )
            examples.extend(built)
            errors.extend(errs)
        if not args.no_length_filter:
            examples = [ex for ex in examples if dataset_mod.length_filter(ex)]
    dataset_mod.emit_jsonl(examples, args.output)
    _write_provenance(args.output, "build-dataset", args)
    if args.errors:
        corpus_mod.write_error_report(errors, args.errors)
    print(f"wrote {len(examples)} examples, {len(errors)} skipped", file=sys.stderr)
    return 0


def cmd_split(args) -> int:
    ids = [line.strip() for line in Path(args.ids).read_text("utf-8").splitlines() if line.strip()]
    plan = dataset_mod.SplitPlan(scheme=args.scheme.replace("-", "_"), seed=args.seed)
    partitions = dataset_mod.make_splits(ids, plan)
    dataset_mod.write_split_manifest(partitions, plan, args.output)
    _write_provenance(args.output, "split", args)
    print(
        " ".join(f"{name}={len(part)}" for name, part in sorted(partitions.items())),
        file=sys.stderr,
    )
    return 0


def cmd_train_baseline(args) -> int:
    records = _filtered_records(args)
    if args.task == "restore":
        model: baseline_mod.CharLM | baseline_mod.ClassifierSet = baseline_mod.train_lm(
            [r.text_edited for r in records], order=args.order, backoff_factor=args.backoff
        )
    else:
        place_pairs = (
            [(r.text_diplomatic, r.place) for r in records if r.place]
            if args.task in ("place", "attribution")
            else []
        )
        date_pairs = (
            [(r.text_diplomatic, r.date.midpoint) for r in records if r.date]
            if args.task in ("date", "attribution")
            else []
        )
        model = baseline_mod.train_classifiers(
            place_pairs, date_pairs, order=args.order, backoff_factor=args.backoff
        )
    baseline_mod.save_model(model, args.output)
    _write_provenance(args.output, "train-baseline", args)
    print(f"saved {args.task} model to {args.output}", file=sys.stderr)
    return 0


def _split_gap(args) -> tuple[str, str, int]:
    """Resolve (left, right, letters) from --text plus the gap flags."""
    text = args.text
    match = masking_mod.PLACEHOLDER_RE.search(text)
    if match:
        return text[: match.start()], text[match.end() :], int(match.group(1))
    if args.gap_start is None or args.letters is None:
        raise ValueError("need a placeholder in --text or --gap-start/--letters")
    gap_chars = args.gap_chars if args.gap_chars is not None else 0
    return text[: args.gap_start], text[args.gap_start + gap_chars :], args.letters


def _endpoint_config(args) -> inference_mod.EndpointConfig:
    # with --endpoint, --model (or --endpoint-model) names the remote model
    return inference_mod.EndpointConfig(
        base_url=args.endpoint,
        model_name=args.endpoint_model or args.model or "default",
        n_best=args.n_best,
    )


def cmd_restore(args) -> int:
    if args.dataset:
        examples = dataset_mod.read_jsonl(args.dataset)
        if args.endpoint:
            cfg = _endpoint_config(args)
            lists = [inference_mod.request_candidates(cfg, ex) for ex in examples]
        else:
            lm = baseline_mod.load_model(args.model)
            if not isinstance(lm, baseline_mod.CharLM):
                raise ValueError(f"{args.model} is not a restoration model")
            lists = []
            for ex in examples:
                left, right, letters = _split_gap(
                    argparse.Namespace(text=ex.user, gap_start=None, gap_chars=None, letters=None)
                )
                lists.append(
                    baseline_mod.restore(
                        lm,
                        left,
                        right,
                        letters,
                        beam_width=args.beam_width,
                        top_n=args.top_n,
                        sample_id=ex.id,
                    )
                )
        out = args.candidates_out or "candidates.jsonl"
        inference_mod.write_candidate_cache(lists, out)
        _write_provenance(out, "restore", args)
        print(f"wrote candidates for {len(lists)} samples to {out}", file=sys.stderr)
        return 0

    left, right, letters = _split_gap(args)
    if args.endpoint:
        cfg = _endpoint_config(args)
        prompt = dataset_mod.SYSTEM_PROMPTS[("restore", args.kind)]
        user = left + masking_mod.placeholder_for(letters) + right
        example = dataset_mod.ChatExample(
            prompt, user, "", "restore", "cli", {"gold_letter_count": letters, "task": "restore"}
        )
        clist = inference_mod.request_candidates(cfg, example)
    else:
        lm = baseline_mod.load_model(args.model)
        if not isinstance(lm, baseline_mod.CharLM):
            raise ValueError(f"{args.model} is not a restoration model")
        clist = baseline_mod.restore(
            lm, left, right, letters, beam_width=args.beam_width, top_n=args.top_n
        )
    payload = [
        {
            "text": text,
            "score": score,
            "letters_ok": not inference_mod.candidate_flags(text, letters),
        }
        for text, score in clist.candidates
    ]
    print(json.dumps(payload, ensure_ascii=False, indent=2))
    return 0


def _load_classifiers(path: str) -> baseline_mod.ClassifierSet:
    model = baseline_mod.load_model(path)
    if not isinstance(model, baseline_mod.ClassifierSet):
        raise ValueError(f"{path} is not an attribution model")
    return model


def cmd_attribute(args) -> int:
    classifiers = _load_classifiers(args.model)
    if args.dataset:
        examples = dataset_mod.read_jsonl(args.dataset)
        lists = []
        for ex in examples:
            ranked = baseline_mod.classify_place(classifiers, ex.user)
            lists.append(
                metrics_mod.CandidateList(
                    sample_id=ex.id,
                    candidates=tuple((label, score) for label, score in ranked),
                    produced_by="classifier",
                )
            )
        out = args.candidates_out or "place_candidates.jsonl"
        inference_mod.write_candidate_cache(lists, out)
        _write_provenance(out, "attribute", args)
        print(f"wrote rankings for {len(lists)} samples to {out}", file=sys.stderr)
        return 0
    ranked = baseline_mod.classify_place(classifiers, args.text)
    print(
        json.dumps(
            [{"label": label, "score": score} for label, score in ranked[: args.top]],
            ensure_ascii=False,
            indent=2,
        )
    )
    return 0


def cmd_date(args) -> int:
    classifiers = _load_classifiers(args.model)
    if args.dataset:
        examples = dataset_mod.read_jsonl(args.dataset)
        lists = []
        for ex in examples:
            year, _ = baseline_mod.estimate_date(classifiers, ex.user)
            lists.append(
                metrics_mod.CandidateList(
                    sample_id=ex.id, candidates=((str(year), 0.0),), produced_by="classifier"
                )
            )
        out = args.candidates_out or "date_candidates.jsonl"
        inference_mod.write_candidate_cache(lists, out)
        _write_provenance(out, "date", args)
        print(f"wrote predictions for {len(lists)} samples to {out}", file=sys.stderr)
        return 0
    year, distribution = baseline_mod.estimate_date(classifiers, args.text)
    print(
        json.dumps(
            {
                "year": year,
                "distribution": [
                    {"start": lo, "end": hi, "p": p} for lo, hi, p in distribution
                ],
            },
            ensure_ascii=False,
            indent=2,
        )
    )
    return 0


def cmd_evaluate(args) -> int:
    gold = dataset_mod.read_jsonl(args.gold)
    candidates = inference_mod.read_candidate_cache(args.candidates)
    partials = []
    restore_samples = [
        metrics_mod.RestorationSample(
            id=ex.id,
            gold=ex.assistant,
            gold_letter_count=ex.meta["gold_letter_count"],
            source_chars=ex.meta["source_chars"],
        )
        for ex in gold
        if ex.task == "restore"
    ]
    if restore_samples:
        partials.append(metrics_mod.score_restoration(restore_samples, candidates))
    place_samples = [
        metrics_mod.PlaceSample(id=ex.id, gold_label=ex.assistant)
        for ex in gold
        if ex.task == "place"
    ]
    if place_samples:
        ranked = {sid: clist.texts() for sid, clist in candidates.items()}
        partials.append(metrics_mod.score_place(place_samples, ranked))
    date_samples = []
    for ex in gold:
        if ex.task != "date":
            continue
        interval = corpus_mod.DateInterval(
            ex.meta["date_post"], ex.meta["date_ante"], int(ex.assistant)
        )
        date_samples.append(metrics_mod.DateSample(id=ex.id, interval=interval))
    if date_samples:
        predictions = {}
        for sample in date_samples:
            clist = candidates.get(sample.id)
            if clist and clist.candidates:
                try:
                    predictions[sample.id] = int(clist.candidates[0][0])
                except ValueError:
                    pass
        partials.append(metrics_mod.score_date(date_samples, predictions))
    report = metrics_mod.aggregate(partials)
    metrics_mod.write_report_json(report, args.output, provenance=_provenance("evaluate", args))
    _write_provenance(args.output, "evaluate", args)
    if args.csv:
        merged = metrics_mod.EvalPartial()
        for partial in partials:
            merged.merge(partial)
        metrics_mod.write_per_sample_csv(merged.rows, args.csv)
        _write_provenance(args.csv, "evaluate", args)
    print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2))
    return 0


def cmd_merge_demo(args) -> int:
    base = merge_mod.read_vector(args.base)
    tuned = [merge_mod.read_vector(path) for path in args.tuned]
    merged = merge_mod.ties_merge(base, tuned, density=args.density, lam=args.lam)
    merge_mod.write_vector(merged, args.output)
    _write_provenance(args.output, "merge-demo", args)
    print(
        f"merged {len(tuned)} vectors (density={args.density}, lambda={args.lam}; "
        "zero-sum sign elections resolve to +)",
        file=sys.stderr,
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from lacuna.service import create_app

    host, _, port = args.bind.partition(":")
    app = create_app(
        model_path=args.model,
        classifiers_path=args.classifiers,
        records_path=args.records,
        seed=args.seed,
        static_dir=args.static,
    )
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(prog="lacuna", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lacuna {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse and normalize a raw corpus file")
    p.add_argument("--input", required=True, help="TSV or JSONL corpus file")
    p.add_argument("--places", help="two-column place table TSV")
    p.add_argument("--output", required=True, help="normalized records JSONL")
    p.add_argument("--errors", help="error report JSONL")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-dataset", help="build chat examples from records")
    p.add_argument("--records", required=True)
    p.add_argument("--task", choices=dataset_mod.TASKS, default="restore")
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--letter-min", type=int, default=3)
    p.add_argument("--letter-max", type=int, default=20)
    p.add_argument("--versions", default="edited", help="comma list: edited,diplomatic")
    p.add_argument("--per-record", type=int, default=1)
    p.add_argument("--noise", type=float, action="append", help="noise fraction, repeatable")
    p.add_argument("--shuffle", action="store_true", help="add sentence-shuffled variants")
    p.add_argument("--truncate", type=int, nargs=2, metavar=("MIN", "MAX"))
    p.add_argument("--no-length-filter", action="store_true")
    p.add_argument("--eval-per-length", type=int, help="build eval set: N samples per length 1-10")
    p.add_argument("--split-manifest")
    p.add_argument("--split", help="partition name from the manifest")
    p.add_argument("--errors")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("split", help="partition record ids")
    p.add_argument("--ids", required=True, help="file with one id per line")
    p.add_argument(
        "--scheme",
        required=True,
        choices=["train95-test5", "train80-val10-test10", "phi-shared"],
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train-baseline", help="train the n-gram baseline")
    p.add_argument("--records", required=True)
    p.add_argument("--task", choices=["restore", "place", "date", "attribution"], default="restore")
    p.add_argument("--order", type=int, default=6)
    p.add_argument("--backoff", type=float, default=0.4)
    p.add_argument("--split-manifest")
    p.add_argument("--split")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("restore", help="fill a gap with ranked candidates")
    p.add_argument("--model", help="baseline model file (or remote model name with --endpoint)")
    p.add_argument("--endpoint", help="remote chat-completion base URL")
    p.add_argument("--endpoint-model", help="remote model name (alias for --model with --endpoint)")
    p.add_argument("--n-best", type=int, default=60)
    p.add_argument("--text", help="text with [N letters missing] placeholder")
    p.add_argument("--gap-start", type=int, help="char offset of the gap")
    p.add_argument("--gap-chars", type=int, help="chars to replace at --gap-start")
    p.add_argument("--letters", type=int, help="letters to restore")
    p.add_argument("--kind", choices=corpus_mod.CORPUS_KINDS, default="inscription")
    p.add_argument("--beam-width", type=int, default=60)
    p.add_argument("--top-n", type=int, default=20)
    p.add_argument("--dataset", help="JSONL of chat examples to restore in batch")
    p.add_argument("--candidates-out", help="candidate cache JSONL for batch mode")
    p.set_defaults(func=cmd_restore)

    p = sub.add_parser("attribute", help="rank places for a text")
    p.add_argument("--model", required=True)
    p.add_argument("--text")
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--dataset")
    p.add_argument("--candidates-out")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("date", help="estimate the year of a text")
    p.add_argument("--model", required=True)
    p.add_argument("--text")
    p.add_argument("--dataset")
    p.add_argument("--candidates-out")
    p.set_defaults(func=cmd_date)

    p = sub.add_parser("evaluate", help="score candidates against gold examples")
    p.add_argument("--gold", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("merge-demo", help="TIES-merge flat parameter vectors")
    p.add_argument("--base", required=True)
    p.add_argument("--tuned", required=True, nargs="+")
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--lam", "--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_merge_demo)

    p = sub.add_parser("serve", help="run the HTTP service for the workbench")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--model", help="restoration model file")
    p.add_argument("--classifiers", help="attribution model file")
    p.add_argument("--records", help="records JSONL for corpus stats")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--static", help="directory with the workbench build")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        ValueError,
        KeyError,
        corpus_mod.CorpusError,
        FileNotFoundError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures (endpoint, I/O, ...)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
