"""Single entry point: dataset generation, decoding runs, evaluation, mode
comparison, fixture emission, and the mock logit server."""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

from . import benchgen, evaluate, fixtures
from .backends import NgramBackend, ScriptedBackend, ScriptedScenario
from .decoding import AmplificationGrid, DecodeConfig, run_decode
from .errors import IntentAmpError
from .masking import (
    WHOLE_INTENT,
    build_masked_prompt,
    locate_intent_span,
    mask_single_constraint,
)

VERSION = "intentamp-0.1.0"
BACKEND_ENV = "INTENTAMP_BACKEND"


def _parse_levels(text: str) -> dict:
    counts = {}
    for part in text.split(","):
        level_str, _, count_str = part.partition(":")
        try:
            level, count = int(level_str), int(count_str)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad level spec {part!r}, expected L:N")
        if level not in (1, 2, 3, 4):
            raise argparse.ArgumentTypeError(f"level must be 1-4, got {level}")
        if count < 0:
            raise argparse.ArgumentTypeError("counts must be non-negative")
        counts[level] = count
    return counts


def _parse_grid(text: str) -> AmplificationGrid:
    try:
        return AmplificationGrid(tuple(float(a) for a in text.split(",")))
    except (ValueError, IntentAmpError) as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}")


def build_backend(spec: str):
    if not spec:
        raise IntentAmpError(
            f"no backend given: pass --backend or set ${BACKEND_ENV}"
        )
    kind, _, rest = spec.partition(":")
    if kind == "scripted":
        return ScriptedBackend(ScriptedScenario.load(rest))
    if kind == "ngram":
        # ngram:CORPUS:ORDER or ngram:CORPUS:ORDER:SMOOTHING
        parts = rest.rsplit(":", 2)
        try:
            if len(parts) == 3 and not parts[1].isdigit():
                raise ValueError
            if len(parts) == 3:
                corpus_path, order, smoothing = parts[0], int(parts[1]), float(parts[2])
            elif len(parts) == 2:
                corpus_path, order, smoothing = parts[0], int(parts[1]), 0.0
            else:
                raise ValueError
        except ValueError:
            raise IntentAmpError(f"ngram backend needs ngram:CORPUS:ORDER[:SMOOTHING], got {spec!r}")
        text = Path(corpus_path).read_text(encoding="utf-8")
        return NgramBackend.from_text(text, order, smoothing)
    if kind == "remote":
        from .remote import RemoteBackend

        host, _, port = rest.partition(":")
        return RemoteBackend(host, int(port))
    raise IntentAmpError(f"unknown backend spec {spec!r}")


def cmd_gen(args) -> int:
    manifest, instances = benchgen.generate_dataset(args.levels, seed=args.seed)
    dataset_path, manifest_path = benchgen.write_dataset(args.out, manifest, instances)
    print(f"wrote {manifest.total} instances to {dataset_path}")
    print(f"manifest: {manifest_path}")
    return 0


def _build_pair(instance, args, vocabulary):
    if args.mask_constraint:
        pair = mask_single_constraint(instance, args.mask_constraint)
    elif args.mask_template == "explicit-markers":
        span = instance.whole_span()
        pair = build_masked_prompt(instance.prompt_text, [span])
    else:
        spans = locate_intent_span(instance.prompt_text, args.mask_template)
        pair = build_masked_prompt(instance.prompt_text, spans)
    return pair.encode(vocabulary)


def _resolve_config(args) -> tuple[DecodeConfig, dict]:
    settings = {
        "mode": args.mode,
        "beam_size": args.beam,
        "max_tokens": args.max_tokens,
        "top_p": args.p,
        "temperature": args.temp,
        "fixed_alpha": args.alpha,
        "grid": list(args.grid.alphas),
        "seed": args.seed,
        "mask_template": args.mask_template,
        "mask_constraint": args.mask_constraint,
    }
    if args.config:
        file_settings = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(file_settings) - set(settings)
        if unknown:
            raise IntentAmpError(f"unknown config keys: {sorted(unknown)}")
        settings.update(file_settings)
    config = DecodeConfig(
        mode=settings["mode"],
        beam_size=int(settings["beam_size"]),
        max_tokens=int(settings["max_tokens"]),
        top_p=float(settings["top_p"]),
        temperature=float(settings["temperature"]),
        fixed_alpha=float(settings["fixed_alpha"]),
        grid=AmplificationGrid(tuple(settings["grid"])),
        seed=int(settings["seed"]),
    )
    return config, settings


def cmd_decode(args) -> int:
    instances = benchgen.load_dataset(args.dataset)
    manifest_path = Path(args.dataset).with_name("manifest.json")
    dataset_hash = ""
    if manifest_path.exists():
        dataset_hash = benchgen.load_manifest(manifest_path).dataset_sha256

    backend = build_backend(args.backend)
    config, settings = _resolve_config(args)
    args.mode = settings["mode"]
    args.mask_template = settings["mask_template"]
    args.mask_constraint = settings["mask_constraint"]

    lock = threading.Lock() if not backend.concurrent_safe else None

    def decode_one(instance):
        try:
            pair = _build_pair(instance, args, backend.vocabulary)
            trace: list | None = [] if args.trace else None
            if lock:
                with lock:
                    hypotheses = run_decode(backend, pair, config, trace=trace)
            else:
                hypotheses = run_decode(backend, pair, config, trace=trace)
            best = hypotheses[0]
            tokens = list(best.tokens)
            text_tokens = tokens[:-1] if tokens and tokens[-1] == backend.eos_id else tokens
            record = {
                "problem_id": instance.id,
                "mode": config.mode,
                "tokens": tokens,
                "text": backend.vocabulary.decode(text_tokens),
                "cum_log_score": best.cum_log_score,
            }
            if trace is not None:
                record["per_step_candidates"] = trace
            return record
        except IntentAmpError as exc:
            return {"problem_id": instance.id, "mode": config.mode,
                    "error": type(exc).__name__, "detail": str(exc)}

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(decode_one, instances))
    else:
        records = [decode_one(inst) for inst in instances]

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.jsonl"
    with open(records_path, "w", encoding="utf-8") as fh:
        for record in records:  # dataset order regardless of completion order
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
    run_manifest = {
        "config": settings,
        "dataset_manifest_hash": dataset_hash,
        "version": VERSION,
    }
    (out_dir / "run_manifest.json").write_text(
        json.dumps(run_manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    failures = sum(1 for r in records if "error" in r)
    print(f"wrote {len(records)} records ({failures} failed instances) to {records_path}")
    return 0


def cmd_eval(args) -> int:
    instances = benchgen.load_dataset(args.dataset)
    manifest_path = Path(args.dataset).with_name("manifest.json")
    dataset_hash = ""
    if manifest_path.exists():
        dataset_hash = benchgen.load_manifest(manifest_path).dataset_sha256
    records = evaluate.load_records(args.records)
    run_manifest_path = Path(args.records).with_name("run_manifest.json")
    run_hash = None
    mode = args.mode
    if run_manifest_path.exists():
        run_manifest = json.loads(run_manifest_path.read_text(encoding="utf-8"))
        run_hash = run_manifest.get("dataset_manifest_hash") or None
        mode = mode or run_manifest.get("config", {}).get("mode")
    mode = mode or (records[0]["mode"] if records else "unknown")
    report = evaluate.evaluate_run(
        instances, records, mode, manifest_hash=dataset_hash, run_manifest_hash=run_hash
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n",
                   encoding="utf-8")
    print(f"{mode}: accuracy {report.accuracy:.3f} over {report.total} instances")
    print(f"report: {out}")
    return 0


def cmd_compare(args) -> int:
    reports = [evaluate.load_report(p) for p in args.reports]
    rows, table = evaluate.compare_modes(reports, baseline_mode=args.baseline)
    print(table, end="")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(table, encoding="utf-8")
        out.with_suffix(".json").write_text(
            json.dumps(rows, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    return 0


def cmd_fixture(args) -> int:
    written = fixtures.write_fixtures(args.out, which=args.which)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_serve_mock(args) -> int:
    from .remote import serve_scenario

    server = serve_scenario(args.scenario, host=args.host, port=args.port)
    host, port = server.address
    print(f"serving {args.scenario} on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intentamp")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a constraint benchmark dataset")
    p.add_argument("--levels", type=_parse_levels, default=dict(benchgen.DEFAULT_COUNTS),
                   help="per-level counts, e.g. 2:300,3:100,4:100")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("decode", help="run a decoding mode over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--backend", default=os.environ.get(BACKEND_ENV),
                   help="scripted:FILE | ngram:CORPUS:ORDER[:SMOOTHING] | remote:HOST:PORT "
                        f"(default from ${BACKEND_ENV})")
    p.add_argument("--mode", default="intent_coding",
                   choices=["greedy", "beam", "nucleus", "fixed_alpha", "intent_coding"])
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--grid", type=_parse_grid, default=AmplificationGrid())
    p.add_argument("--p", type=float, default=1.0, help="nucleus top-p")
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.0, help="fixed_alpha strength")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--mask-template", default="explicit-markers",
                   choices=["humaneval-docstring", "livecodebench-question",
                            "codeconstraints-docstring", "ifevalcode-constraints",
                            "explicit-markers"])
    p.add_argument("--mask-constraint", default=None,
                   help="mask a single constraint sentence instead of the whole intent")
    p.add_argument("--config", default=None,
                   help="JSON run-config; file values override flags")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trace", action="store_true",
                   help="record per-step ensemble candidates")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="grade decode records against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--mode", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="tabulate reports against a baseline mode")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--baseline", default="greedy")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fixture", help="write the bundled scripted scenarios")
    p.add_argument("--which", default="all", choices=["all", "flip", "grouping"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("serve-mock", help="serve a scripted scenario over the wire protocol")
    p.add_argument("--scenario", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.set_defaults(func=cmd_serve_mock)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "decode" and not args.backend:
        parser.error(f"--backend is required (or set ${BACKEND_ENV})")
    try:
        return args.func(args)
    except IntentAmpError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
