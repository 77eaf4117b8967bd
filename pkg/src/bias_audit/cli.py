"""Pipeline command-line interface.

One executable, one subcommand per stage. Stages exchange data only
through files under a run directory, each stage writes a manifest, logs
are JSON lines on stderr, and stdout carries nothing but primary output.
Exit codes: 0 success, 1 validation or usage error, 2 failure rate above
the configured threshold.
"""

import argparse
import json
import logging
import re
import sys
from dataclasses import replace
from pathlib import Path

from .analytics import emit_report, join_scores, load_gazetteer, tag_corpus
from .annotations import load_annotations, synthesize_mock_annotations, write_annotations
from .cache import ResponseCache
from .corpus import (
    article_to_record,
    corpus_stats,
    load_corpus,
    paragraph_to_record,
    segment_paragraphs,
)
from .debias import debias_flagged, reassess, select_flagged
from .detection import assess_corpus
from .errors import BiasAuditError
from .gateway import LlmGateway, ProviderConfig
from .metrics import bootstrap_ci
from .reports import (
    MetricsReport,
    debias_outcome_report,
    detection_report,
    similarity_report,
    write_table1,
    write_table2,
    write_table3,
)
from .runconfig import (
    DEFAULT_FAILURE_THRESHOLD,
    RunConfig,
    build_manifest,
    resolve_provider,
    write_manifest,
)
from .storage import (
    dumps_pretty,
    read_jsonl,
    sha256_dir,
    sha256_file,
    write_json,
    write_jsonl,
)

logger = logging.getLogger("bias_audit.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_THRESHOLD = 2

EVAL_MODES = ("detection", "debias", "similarity")


class _JsonLineFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        doc = {
            "level": record.levelname.lower(),
            "logger": record.name,
            "message": record.getMessage(),
        }
        return json.dumps(doc, ensure_ascii=False, sort_keys=True)


def configure_logging(verbose: bool = False) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLineFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


class _Parser(argparse.ArgumentParser):
    """argparse reserves exit code 2 for usage problems; this pipeline
    reserves 2 for exceeded failure thresholds, so usage errors exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name) or "model"


def _required(value, flag: str):
    if value is None:
        print(f"error: {flag} is required (pass the flag or provide it via --config)",
              file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is not a fraction in [0, 1]")
    return value


def _load_config(args) -> RunConfig | None:
    return RunConfig.load(args.config) if getattr(args, "config", None) else None


def _gateway(cfg: ProviderConfig, cache_dir=None, concurrency=None) -> LlmGateway:
    if concurrency:
        cfg = replace(cfg, max_concurrency=concurrency)
    cache = ResponseCache(Path(cache_dir)) if cache_dir else ResponseCache()
    return LlmGateway(cfg, cache=cache)


def _pick_provider(args, rc: RunConfig | None, which: str) -> ProviderConfig:
    if getattr(args, "provider", None):
        return resolve_provider(args.provider)
    if rc is not None:
        return getattr(rc, which)
    return _required(None, "--provider")


def _threshold(args, rc: RunConfig | None) -> float:
    if getattr(args, "failure_threshold", None) is not None:
        return args.failure_threshold
    if rc is not None:
        return rc.failure_threshold
    return DEFAULT_FAILURE_THRESHOLD


def _check_threshold(n_failed: int, n_total: int, threshold: float, stage: str) -> int:
    rate = n_failed / n_total if n_total else 0.0
    logger.info("%s finished: %d/%d failed (rate %.4f, threshold %.4f)",
                stage, n_failed, n_total, rate, threshold)
    if rate > threshold:
        logger.error("%s failure rate %.4f exceeds threshold %.4f", stage, rate, threshold)
        return EXIT_THRESHOLD
    return EXIT_OK


def _group_by_level(paths) -> dict[int, list[dict]]:
    grouped: dict[int, list[dict]] = {}
    for path in paths:
        for record in read_jsonl(Path(path)):
            grouped.setdefault(record["prompt_level"], []).append(record)
    return grouped


def _input_digests(paths) -> dict[str, str]:
    return {f"input_{i:02d}": sha256_file(Path(p)) for i, p in enumerate(sorted(map(str, paths)))}


# -- subcommand handlers -------------------------------------------------


def _cmd_ingest(args) -> int:
    rc = _load_config(args)
    corpus_root = Path(_required(args.corpus or (rc.corpus_root if rc else None), "--corpus"))
    run_dir = Path(_required(args.out or (rc.run_dir if rc else None), "--out"))

    articles = load_corpus(corpus_root)
    article_path = run_dir / "corpus" / "articles.jsonl"
    paragraph_path = run_dir / "corpus" / "paragraphs.jsonl"
    write_jsonl(article_path, (article_to_record(a) for a in articles))
    n_paragraphs = write_jsonl(
        paragraph_path,
        (paragraph_to_record(p) for a in articles for p in segment_paragraphs(a)),
    )
    logger.info("ingested %d articles, %d paragraphs", len(articles), n_paragraphs)

    manifest = build_manifest(
        stage="ingest",
        config_doc={},
        inputs={"corpus": sha256_dir(corpus_root)},
        parameters={},
        outputs=["corpus/articles.jsonl", "corpus/paragraphs.jsonl"],
    )
    write_manifest(run_dir, "ingest", manifest)
    return EXIT_OK


def _cmd_stats(args) -> int:
    rc = _load_config(args)
    corpus_root = Path(_required(args.corpus or (rc.corpus_root if rc else None), "--corpus"))
    articles = load_corpus(corpus_root)
    print(dumps_pretty(corpus_stats(articles).to_doc()))
    return EXIT_OK


def _cmd_detect(args) -> int:
    rc = _load_config(args)
    corpus_root = Path(_required(args.corpus or (rc.corpus_root if rc else None), "--corpus"))
    run_dir = Path(_required(args.out or (rc.run_dir if rc else None), "--out"))
    provider = _pick_provider(args, rc, "detection_provider")
    if args.model:
        provider = replace(provider, model_id=args.model)
    threshold = _threshold(args, rc)

    articles = load_corpus(corpus_root)
    paragraphs = [p for a in articles for p in segment_paragraphs(a)]
    gateway = _gateway(provider, args.cache_dir, args.concurrency)
    records = assess_corpus(gateway, paragraphs)

    out_name = f"assessments/{_safe_name(provider.model_id)}.jsonl"
    write_jsonl(run_dir / out_name, records)

    manifest = build_manifest(
        stage="detect",
        config_doc={"provider": provider.to_doc()},
        inputs={"corpus": sha256_dir(corpus_root)},
        parameters={"failure_threshold": threshold, "model_id": provider.model_id},
        outputs=[out_name],
    )
    write_manifest(run_dir, "detect", manifest)

    n_failed = sum(1 for r in records if r["status"] == "failed")
    if n_failed:
        failed_ids = [r["paragraph_id"] for r in records if r["status"] == "failed"]
        logger.warning("failed paragraphs: %s", " ".join(failed_ids))
    return _check_threshold(n_failed, len(records), threshold, "detect")


def _cmd_debias(args) -> int:
    rc = _load_config(args)
    assessments = Path(_required(args.assessments, "--assessments"))
    run_dir = Path(_required(args.out or (rc.run_dir if rc else None), "--out"))
    provider = _pick_provider(args, rc, "debias_provider")
    threshold = _threshold(args, rc)

    detect_records = list(read_jsonl(assessments))
    flagged = select_flagged(detect_records)
    logger.info("rewriting %d flagged paragraphs at level %d", len(flagged), args.level)
    gateway = _gateway(provider, args.cache_dir, args.concurrency)
    records = debias_flagged(gateway, flagged, args.level)

    out_name = f"debias/level{args.level}.jsonl"
    write_jsonl(run_dir / out_name, records)

    manifest = build_manifest(
        stage=f"debias-level{args.level}",
        config_doc={"provider": provider.to_doc()},
        inputs={"assessments": sha256_file(assessments)},
        parameters={"failure_threshold": threshold, "level": args.level},
        outputs=[out_name],
    )
    write_manifest(run_dir, f"debias-level{args.level}", manifest)

    n_failed = sum(1 for r in records if r["status"] == "failed")
    return _check_threshold(n_failed, len(records), threshold, f"debias-level{args.level}")


def _cmd_reassess(args) -> int:
    rc = _load_config(args)
    infile = Path(_required(args.infile, "--in"))
    run_dir = Path(_required(args.out or (rc.run_dir if rc else None), "--out"))
    provider = _pick_provider(args, rc, "detection_provider")
    if args.detector:
        provider = replace(provider, model_id=args.detector)
    threshold = _threshold(args, rc)

    debias_records = list(read_jsonl(infile))
    levels = {r["prompt_level"] for r in debias_records}
    if len(levels) != 1:
        print(f"error: input must hold exactly one prompt level, found {sorted(levels)}",
              file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    level = levels.pop()

    gateway = _gateway(provider, args.cache_dir, args.concurrency)
    records = reassess(gateway, debias_records)

    out_name = f"reassess/level{level}.jsonl"
    write_jsonl(run_dir / out_name, records)

    manifest = build_manifest(
        stage=f"reassess-level{level}",
        config_doc={"provider": provider.to_doc()},
        inputs={"debias": sha256_file(infile)},
        parameters={"failure_threshold": threshold, "level": level,
                    "model_id": provider.model_id},
        outputs=[out_name],
    )
    write_manifest(run_dir, f"reassess-level{level}", manifest)

    attempted = {r["paragraph_id"] for r in debias_records if r.get("status") == "ok"}
    n_failed = sum(
        1 for r in records if r["status"] == "failed" and r["paragraph_id"] in attempted)
    return _check_threshold(n_failed, len(attempted), threshold, f"reassess-level{level}")


def _cmd_evaluate(args) -> int:
    rc = _load_config(args)
    annotations_path = Path(_required(args.annotations, "--annotations"))
    run_dir = Path(_required(args.out or (rc.run_dir if rc else None), "--out"))
    annotations = load_annotations(annotations_path)
    eval_dir = run_dir / "evaluation"

    if args.mode == "detection":
        if len(args.assessments) != 1:
            print("error: evaluate detection takes exactly one assessments file",
                  file=sys.stderr)
            raise SystemExit(EXIT_USAGE)
        path = Path(args.assessments[0])
        records = list(read_jsonl(path))
        report = detection_report(
            records,
            annotations,
            alpha_level=args.alpha_level,
            kappa_weight=args.kappa_weight,
            beta=args.beta,
            alpha_basis=args.alpha_basis,
        )
        doc = report.to_doc()
        if args.bootstrap:
            from .annotations import build_ground_truth

            truth = build_ground_truth(annotations)
            scores = {r["paragraph_id"]: r["score"] for r in records if r.get("status") == "ok"}
            matches = [1.0 if scores[p] == truth[p].value else 0.0 for p in sorted(truth)]
            seed = args.seed if args.seed is not None else (rc.seed if rc else 0)
            low, high = bootstrap_ci(matches, n_resamples=args.bootstrap, seed=seed)
            doc["exact_match_ci"] = {
                "low": low, "high": high, "confidence": 0.95,
                "n_resamples": args.bootstrap, "seed": seed,
            }
        name = _safe_name(report.model_id)
        write_json(eval_dir / f"detection_{name}.json", doc)
        write_table1(eval_dir / f"detection_{name}.csv", [report])
        outputs = [f"evaluation/detection_{name}.json", f"evaluation/detection_{name}.csv"]
        stage = f"evaluate-detection-{name}"
        params = {
            "alpha_level": args.alpha_level, "kappa_weight": args.kappa_weight,
            "beta": args.beta, "alpha_basis": args.alpha_basis,
        }
    elif args.mode == "debias":
        by_level = _group_by_level(args.assessments)
        rows = debias_outcome_report(by_level, annotations)
        write_json(eval_dir / "debias.json", rows)
        write_table2(eval_dir / "debias.csv", rows)
        outputs = ["evaluation/debias.json", "evaluation/debias.csv"]
        stage = "evaluate-debias"
        params = {}
    else:
        provider = _pick_provider(args, rc, "embedding_provider")
        gateway = _gateway(provider, args.cache_dir, args.concurrency)
        by_level = _group_by_level(args.assessments)
        rows = similarity_report(
            by_level, annotations, embed_fn=lambda text: gateway.embed(text).values)
        write_json(eval_dir / "similarity.json", rows)
        write_table3(eval_dir / "similarity.csv", rows)
        outputs = ["evaluation/similarity.json", "evaluation/similarity.csv"]
        stage = "evaluate-similarity"
        params = {"embedding_model": provider.model_id}

    inputs = {"annotations": sha256_file(annotations_path)}
    inputs.update(_input_digests(args.assessments))
    manifest = build_manifest(
        stage=stage, config_doc={}, inputs=inputs, parameters=params, outputs=outputs)
    write_manifest(run_dir, stage, manifest)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    rc = _load_config(args)
    corpus_root = Path(_required(args.corpus or (rc.corpus_root if rc else None), "--corpus"))
    assessments = Path(_required(args.assessments, "--assessments"))
    out_dir = Path(_required(args.out or (rc.run_dir if rc else None), "--out"))

    articles = load_corpus(corpus_root)
    records = list(read_jsonl(assessments))
    joined = join_scores(articles, records)
    gazetteer = load_gazetteer(args.gazetteer)
    tags = tag_corpus(articles, gazetteer)
    written = emit_report(out_dir / "analytics", joined, tags, charts=args.charts)

    manifest = build_manifest(
        stage="analyze",
        config_doc={},
        inputs={"assessments": sha256_file(assessments), "corpus": sha256_dir(corpus_root)},
        parameters={"charts": bool(args.charts)},
        outputs=[str(p.relative_to(out_dir)) for p in written],
    )
    write_manifest(out_dir, "analyze", manifest)
    return EXIT_OK


def _cmd_report(args) -> int:
    rc = _load_config(args)
    run_dir = Path(_required(args.run or (rc.run_dir if rc else None), "--run"))
    out_dir = Path(args.out) if args.out else run_dir / "report"
    eval_dir = run_dir / "evaluation"

    produced: list[str] = []
    inputs: dict[str, str] = {}

    detection_docs = []
    for path in sorted(eval_dir.glob("detection_*.json")):
        detection_docs.append(json.loads(path.read_text("utf-8")))
        inputs[path.stem] = sha256_file(path)
    if detection_docs:
        reports = [MetricsReport.from_doc(d) for d in detection_docs]
        write_table1(out_dir / "table1.csv", reports)
        write_json(out_dir / "table1.json", detection_docs)
        produced.extend(["table1.csv", "table1.json"])

    debias_path = eval_dir / "debias.json"
    if debias_path.exists():
        rows = json.loads(debias_path.read_text("utf-8"))
        write_table2(out_dir / "table2.csv", rows)
        write_json(out_dir / "table2.json", rows)
        inputs["debias"] = sha256_file(debias_path)
        produced.extend(["table2.csv", "table2.json"])

    similarity_path = eval_dir / "similarity.json"
    if similarity_path.exists():
        rows = json.loads(similarity_path.read_text("utf-8"))
        write_table3(out_dir / "table3.csv", rows)
        write_json(out_dir / "table3.json", rows)
        inputs["similarity"] = sha256_file(similarity_path)
        produced.extend(["table3.csv", "table3.json"])

    if not produced:
        print("error: no evaluation outputs found to report on", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)

    manifest = build_manifest(
        stage="report",
        config_doc={},
        inputs=inputs,
        parameters={},
        outputs=sorted(produced),
    )
    write_manifest(run_dir, "report", manifest)
    logger.info("report tables written to %s", out_dir)
    return EXIT_OK


def _cmd_mock_annotate(args) -> int:
    detect_records = list(read_jsonl(Path(args.detect)))
    debias_records: list[dict] = []
    for path in args.debias or []:
        debias_records.extend(read_jsonl(Path(path)))
    annotations = synthesize_mock_annotations(detect_records, debias_records)
    write_annotations(Path(args.out), annotations)
    logger.info("wrote %d synthetic annotations to %s", len(annotations), args.out)
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="bias-audit",
                     description="Corpus-scale bias detection, rewriting, and evaluation.")
    parser.add_argument("--verbose", action="store_true", help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON supplying defaults")

    batch = argparse.ArgumentParser(add_help=False)
    batch.add_argument("--provider", help='provider config JSON path, or the literal "mock"')
    batch.add_argument("--concurrency", type=int, help="override provider max_concurrency")
    batch.add_argument("--failure-threshold", type=_fraction, dest="failure_threshold",
                       help="tolerated failed fraction before exit code 2")
    batch.add_argument("--cache-dir", help="response cache directory override")

    p = sub.add_parser("ingest", parents=[common],
                       help="materialize articles and paragraphs as line-delimited records")
    p.add_argument("--corpus", help="corpus root: <root>/<publisher>/<file>.json")
    p.add_argument("--out", help="run directory")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("stats", parents=[common], help="print corpus counts")
    p.add_argument("--corpus", help="corpus root")
    p.set_defaults(handler=_cmd_stats)

    p = sub.add_parser("detect", parents=[common, batch],
                       help="score every paragraph for biased language")
    p.add_argument("--corpus", help="corpus root")
    p.add_argument("--model", help="model id override (names the output file)")
    p.add_argument("--out", help="run directory")
    p.set_defaults(handler=_cmd_detect)

    p = sub.add_parser("debias", parents=[common, batch],
                       help="rewrite flagged paragraphs at one prompt level")
    p.add_argument("--assessments", help="detect output file")
    p.add_argument("--level", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--out", help="run directory")
    p.set_defaults(handler=_cmd_debias)

    p = sub.add_parser("reassess", parents=[common, batch],
                       help="score rewritten paragraphs with the detection prompt")
    p.add_argument("--in", dest="infile", help="debias output file")
    p.add_argument("--detector", help="detector model id override")
    p.add_argument("--out", help="run directory")
    p.set_defaults(handler=_cmd_reassess)

    p = sub.add_parser("evaluate", parents=[common, batch],
                       help="compare stage outputs against human annotations")
    p.add_argument("mode", choices=EVAL_MODES)
    p.add_argument("--annotations", help="annotation CSV")
    p.add_argument("--assessments", nargs="+",
                   help="stage output file(s): detect output, reassess files, or debias files")
    p.add_argument("--out", help="run directory")
    p.add_argument("--alpha-level", default="nominal",
                   choices=("nominal", "ordinal", "interval"))
    p.add_argument("--kappa-weight", default="none",
                   choices=("none", "linear", "quadratic"))
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--alpha-basis", default="majority", choices=("majority", "annotators"))
    p.add_argument("--bootstrap", type=int, default=0,
                   help="resamples for an exact-match confidence interval")
    p.add_argument("--seed", type=int, help="bootstrap seed")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("analyze", parents=[common],
                       help="publisher, state, and pairwise aggregate tables")
    p.add_argument("--assessments", help="detect output file")
    p.add_argument("--corpus", help="corpus root")
    p.add_argument("--out", help="output directory")
    p.add_argument("--charts", action="store_true", help="also render SVG charts")
    p.add_argument("--gazetteer", help="state lexicon file override")
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("report", parents=[common],
                       help="consolidate evaluation outputs into table-shaped files")
    p.add_argument("--run", help="run directory holding evaluation outputs")
    p.add_argument("--out", help="table output directory (default <run>/report)")
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("mock-annotate", parents=[common],
                       help="synthesize deterministic annotations for offline runs")
    p.add_argument("--detect", required=True, help="detect output file")
    p.add_argument("--debias", nargs="*", default=[], help="debias output files")
    p.add_argument("--out", required=True, help="annotation CSV to write")
    p.set_defaults(handler=_cmd_mock_annotate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except BiasAuditError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_USAGE
    except ValueError as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_USAGE
    except OSError as exc:
        target = exc.filename if getattr(exc, "filename", None) else "file"
        logger.error("cannot access %s: %s", target, exc.strerror or exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
