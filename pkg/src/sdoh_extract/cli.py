"""Command-line entry point: ``sdoh-extract <subcommand> [flags]``.

Every flag can also come from a JSON config file (``--config`` or the
``SDOH_EXTRACT_CONFIG`` environment variable). Top-level keys apply to all
subcommands, a nested object named after a subcommand applies to that one
only, and flags given on the command line win over both. Keys use the flag
name with dashes or underscores.

Exit codes: 0 ok, 2 usage error, 3 data error, 4 model error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__, corpus, linker, pipeline, scorer, selector, synth, tagger
from .documents import AnnotatedDoc
from .errors import DocIdMismatch, SdohError, UsageError
from .schema import load_schema
from .tagger import TrainConfig

log = logging.getLogger("sdoh_extract")

CONFIG_ENV = "SDOH_EXTRACT_CONFIG"
_FAMILY = {2: "usage", 3: "data", 4: "model"}


# ---------------------------------------------------------------------------
# option plumbing


class _Opts:
    """Registers flags on a subparser while keeping real defaults out of
    argparse, so config-file values can sit between flags and defaults."""

    def __init__(self, parser: argparse.ArgumentParser):
        self.parser = parser
        self.specs: dict[str, dict] = {}

    def add(self, flag: str, help: str, default=None, required=False, exists=False, **kw):
        dest = flag.lstrip("-").replace("-", "_")
        if kw.get("action") is argparse.BooleanOptionalAction:
            default = bool(default)
        text = help
        if required:
            text += " (required)"
        elif default is not None:
            text += f" (default: {default})"
        self.parser.add_argument(flag, dest=dest, default=None, help=text, **kw)
        self.specs[dest] = {"flag": flag, "default": default, "required": required, "exists": exists}


def _common(opts: _Opts) -> None:
    opts.add("--config", "JSON config file; falls back to $" + CONFIG_ENV)
    opts.add("--schema", "schema JSON file (default: packaged 19-category schema)", exists=True)
    opts.add("--log-level", "logging level on stderr", default="INFO",
             choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _training(opts: _Opts, window: bool, distance: bool) -> None:
    opts.add("--max-epochs", "maximum training epochs", default=30, type=int)
    opts.add("--patience", "epochs without validation gain before stopping", default=5, type=int)
    opts.add("--seed", "random seed for example order", default=0, type=int)
    opts.add("--learning-rate", "SGD step size", default=0.1, type=float)
    if window:
        opts.add("--feature-window", "context words on each side", default=2, type=int)
    if distance:
        opts.add("--max-sentence-distance", "largest sentence gap for candidate pairs", default=1, type=int)


def _train_sets(opts: _Opts) -> None:
    opts.add("--train", "training corpus directory", exists=True)
    opts.add("--val", "validation corpus directory", exists=True)
    opts.add("--corpus", "corpus directory used with --split instead of --train/--val", exists=True)
    opts.add("--split", "split JSON from the split subcommand", exists=True)


def _load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data


def _resolve(ns: argparse.Namespace, specs: dict[str, dict]) -> argparse.Namespace:
    config = _load_config(ns.config)
    norm = lambda d: {k.replace("-", "_"): v for k, v in d.items()}  # noqa: E731
    section = norm({k: v for k, v in config.items() if not isinstance(v, dict)})
    own = config.get(ns.command, {})
    if not isinstance(own, dict):
        raise UsageError(f"config section {ns.command!r} must be an object")
    own = norm(own)
    unknown = sorted(set(own) - set(specs))
    if unknown:
        raise UsageError(f"unknown config keys for {ns.command}: {', '.join(unknown)}")
    section.update(own)
    for dest, spec in specs.items():
        if getattr(ns, dest) is None:
            setattr(ns, dest, section.get(dest, spec["default"]))
        value = getattr(ns, dest)
        if spec["required"] and value is None:
            raise UsageError(f"{spec['flag']} is required")
        if spec["exists"] and value is not None and not Path(value).exists():
            raise UsageError(f"{spec['flag']}: {value} does not exist")
    return ns


def _config(args) -> TrainConfig:
    kw = {k: getattr(args, k) for k in ("max_epochs", "patience", "seed", "learning_rate",
                                        "feature_window", "max_sentence_distance") if hasattr(args, k)}
    try:
        return TrainConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write_json(path: str | None, data) -> None:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_sets(args, schema) -> tuple[list[AnnotatedDoc], list[AnnotatedDoc]]:
    if args.corpus and args.split:
        docs = {d.doc_id: d for d in corpus.load_corpus(args.corpus, schema)}
        split = corpus.CorpusSplit.from_dict(json.loads(Path(args.split).read_text("utf-8")))
        missing = [i for i in split.train + split.validation if i not in docs]
        if missing:
            raise DocIdMismatch(f"split lists documents missing from {args.corpus}: {missing[:5]}")
        return [docs[i] for i in split.train], [docs[i] for i in split.validation]
    if args.train and args.val:
        return corpus.load_corpus(args.train, schema), corpus.load_corpus(args.val, schema)
    raise UsageError("give --train and --val, or --corpus and --split")


def _fraction_complement(x: float) -> float:
    return float(1 - Fraction(str(x)))


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, schema) -> int:
    docs = corpus.load_corpus(args.input, schema, manifest=args.manifest)
    corpus.write_corpus(args.out, docs)
    n_ent = sum(len(d.entities) for d in docs)
    n_rel = sum(len(d.relations) for d in docs)
    log.info("ingest documents=%d entities=%d relations=%d out=%s", len(docs), n_ent, n_rel, args.out)
    print(f"{len(docs)} documents, {n_ent} entities, {n_rel} relations -> {args.out}")
    return 0


def cmd_validate(args, schema) -> int:
    docs = corpus.load_corpus(args.corpus, schema, manifest=args.manifest, check_relations=False)
    report = corpus.validate_corpus(docs, schema)
    if report.violations or report.warnings:
        print(report.format())
    print(f"{len(docs)} documents: {len(report.violations)} violations, {len(report.warnings)} warnings")
    if args.json:
        _write_json(args.json, {
            "documents": len(docs),
            "violations": [vars(v) for v in report.violations],
            "warnings": [vars(v) for v in report.warnings],
        })
    return 0 if report.ok else 3


def cmd_split(args, schema) -> int:
    if args.manifest:
        doc_ids = list(corpus.read_manifest(args.manifest))
    elif args.corpus:
        doc_ids = sorted(p.stem for p in Path(args.corpus).glob("*.txt"))
    else:
        raise UsageError("give --manifest or --corpus")
    test = args.test if args.test is not None else _fraction_complement(args.ratio)
    try:
        split = corpus.split_corpus(doc_ids, (args.ratio, test, args.val), args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    n_train, n_val, n_test = split.sizes()
    log.info("split documents=%d train=%d validation=%d test=%d seed=%d",
             len(doc_ids), n_train, n_val, n_test, args.seed)
    data = split.to_dict()
    data["sizes"] = {"train": n_train, "validation": n_val, "test": n_test}
    if args.out:
        _write_json(args.out, data)
        print(f"train {n_train}  validation {n_val}  test {n_test}")
    else:
        _write_json(None, data)
    return 0


def cmd_select(args, schema) -> int:
    lexicon = selector.load_lexicon(args.lexicon)
    notes = [(p.stem, corpus.read_text(p)) for p in sorted(Path(args.notes).glob("*.txt"))]
    try:
        chosen = selector.select_notes(notes, lexicon, args.min_unique, args.unique_by, args.substring)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    text = dict(notes)
    lines = ["doc_id\tunique_phrases\ttotal_matches"]
    for doc_id in chosen:
        unique, total = selector.count_matches(text[doc_id], lexicon, args.substring)
        lines.append(f"{doc_id}\t{unique}\t{total}")
    out = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    log.info("select notes=%d selected=%d lexicon=%s", len(notes), len(chosen), lexicon.version)
    return 0


def cmd_synth(args, schema) -> int:
    templates = synth.load_templates(args.templates)
    try:
        docs = synth.generate_corpus(
            schema, templates, n_docs=args.n_docs, seed=args.seed, shift=args.shift,
            domain=args.domain, id_prefix=args.id_prefix, docs_per_patient=args.docs_per_patient,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    corpus.write_corpus(args.out, docs)
    print(f"{len(docs)} documents -> {args.out}")
    return 0


def cmd_train_ner(args, schema) -> int:
    train, val = _load_sets(args, schema)
    config = _config(args)
    if args.init:
        model = tagger.fine_tune_tagger(tagger.TokenClassifierModel.load(args.init), train, val, config, schema)
    else:
        model = tagger.train_tagger(train, val, config, schema)
    model.save(args.out)
    meta = model.training_meta
    log.info("train-ner epochs_run=%s best_epoch=%s best_val_f1=%s", meta.get("epochs_run"),
             meta.get("best_epoch"), meta.get("best_val_f1"))
    print(f"model {model.fingerprint} -> {args.out} (validation strict F1 {meta.get('best_val_f1', 0.0):.4f})")
    return 0


def cmd_train_re(args, schema) -> int:
    train, val = _load_sets(args, schema)
    config = _config(args)
    if args.init:
        model = linker.fine_tune_linker(linker.PairClassifierModel.load(args.init), train, val, config, schema)
    else:
        model = linker.train_linker(train, val, config, schema)
    model.save(args.out)
    meta = model.training_meta
    log.info("train-re epochs_run=%s best_epoch=%s best_val_f1=%s", meta.get("epochs_run"),
             meta.get("best_epoch"), meta.get("best_val_f1"))
    print(f"model {model.fingerprint} -> {args.out} (validation strict F1 {meta.get('best_val_f1', 0.0):.4f})")
    return 0


def cmd_predict(args, schema) -> int:
    ner = tagger.TokenClassifierModel.load(args.ner)
    re_model = linker.PairClassifierModel.load(args.re)
    src = Path(args.input)
    manifest = args.manifest or (src / corpus.MANIFEST_NAME if (src / corpus.MANIFEST_NAME).exists() else None)
    entries = corpus.read_manifest(manifest) if manifest else {}
    items = [(p, entries.get(p.stem)) for p in sorted(src.glob("*.txt"))]
    result = pipeline.run_batch(ner, re_model, items, schema, parallelism=args.parallelism)
    out = Path(args.out)
    corpus.write_corpus(out, [e.as_annotated() for e in result.extractions])
    pipeline.write_records(out / "records.tsv", result.records)
    _write_json(str(out / "diagnostics.json"), result.diagnostics)
    log.info("predict documents=%d records=%d diagnostics=%d seconds=%.3f parallelism=%d",
             len(items), len(result.records), len(result.diagnostics),
             result.timing["seconds"], args.parallelism)
    print(f"{len(result.extractions)} documents, {len(result.records)} records, "
          f"{len(result.diagnostics)} diagnostics -> {out}")
    return 0


def _modes(mode: str) -> list[str]:
    return [scorer.STRICT, scorer.LENIENT] if mode == "both" else [mode]


def cmd_score(args, schema) -> int:
    gold = corpus.load_corpus(args.gold, schema)
    pred = corpus.load_corpus(args.pred, schema, check_relations=False)
    modes = _modes(args.mode)
    concept = {m: scorer.score_concepts(gold, pred, m) for m in modes}
    e2e = {m: scorer.score_end_to_end(gold, pred, m)[1] for m in modes}
    rel = {}
    if args.relation_pred:
        rpred = corpus.load_corpus(args.relation_pred, schema, check_relations=False)
        rel = {m: scorer.score_relations(gold, rpred, m) for m in modes}
    row = lambda label, reps: (label, reps.get(scorer.STRICT), reps.get(scorer.LENIENT))  # noqa: E731
    print(scorer.format_table([
        row("Concept extraction", concept),
        row("Relation classification", rel),
        row("End-to-end", e2e),
    ]), end="")
    if args.per_class:
        for m in modes:
            print(f"\nConcept extraction, {m}")
            print(scorer.format_per_class(concept[m]), end="")
    if args.json:
        _write_json(args.json, {
            "concept": {m: r.to_dict() for m, r in concept.items()},
            "relation": {m: r.to_dict() for m, r in rel.items()},
            "end_to_end": {m: r.to_dict() for m, r in e2e.items()},
        })
    return 0


def _split_docs(docs, split_path, ratio, val, seed):
    if split_path:
        split = corpus.CorpusSplit.from_dict(json.loads(Path(split_path).read_text("utf-8")))
    else:
        split = corpus.split_corpus([d.doc_id for d in docs], (ratio, _fraction_complement(ratio), val), seed)
    by_id = {d.doc_id: d for d in docs}
    try:
        return tuple([by_id[i] for i in ids] for ids in (split.train, split.validation, split.test))
    except KeyError as exc:
        raise DocIdMismatch(f"split names unknown document {exc}") from exc


def cmd_adapt(args, schema) -> int:
    config = _config(args)
    s_train, s_val, s_test = _split_docs(corpus.load_corpus(args.source_corpus, schema),
                                         args.source_split, args.ratio, args.val, args.seed)
    t_train, t_val, t_test = _split_docs(corpus.load_corpus(args.target_corpus, schema),
                                         args.target_split, args.target_ratio, args.val, args.seed)
    if args.ner and args.re:
        ner = tagger.TokenClassifierModel.load(args.ner)
        re_model = linker.PairClassifierModel.load(args.re)
    else:
        log.info("adapt training source models on %d documents", len(s_train))
        ner = tagger.train_tagger(s_train, s_val, config, schema)
        re_model = linker.train_linker(s_train, s_val, config, schema)

    def evaluate(ner_m, re_m, docs):
        result = pipeline.run_batch(ner_m, re_m, [d.document for d in docs], schema)
        pred = [e.as_annotated() for e in result.extractions]
        return {m: (scorer.score_concepts(docs, pred, m), scorer.score_end_to_end(docs, pred, m)[1])
                for m in (scorer.STRICT, scorer.LENIENT)}

    results = {}
    if s_test:
        results["Source (in-domain)"] = evaluate(ner, re_model, s_test)
    names = {pipeline.DIRECT: "Direct evaluation", pipeline.FINE_TUNE: "Fine-tuning",
             pipeline.MERGE_RETRAIN: "Merge and retrain"}
    for strategy in (pipeline.DIRECT, pipeline.FINE_TUNE, pipeline.MERGE_RETRAIN):
        models = pipeline.adapt(ner, re_model, strategy, s_train, t_train, t_val, config, schema)
        results[names[strategy]] = evaluate(*models, t_test)
        log.info("adapt strategy=%s strict_f1=%.4f", strategy, results[names[strategy]][scorer.STRICT][0].f1)
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            models[0].save(out / f"{strategy}.ner.model")
            models[1].save(out / f"{strategy}.re.model")

    print("Concept extraction")
    print(scorer.format_table([(k, v[scorer.STRICT][0], v[scorer.LENIENT][0]) for k, v in results.items()]), end="")
    print("\nEnd-to-end relations")
    print(scorer.format_table([(k, v[scorer.STRICT][1], v[scorer.LENIENT][1]) for k, v in results.items()]), end="")
    if args.json:
        _write_json(args.json, {
            k: {m: {"concept": c.to_dict(), "end_to_end": e.to_dict()} for m, (c, e) in v.items()}
            for k, v in results.items()
        })
    return 0


def cmd_aggregate(args, schema) -> int:
    records = pipeline.read_records(args.records)
    roster = {e.patient_id for e in corpus.read_manifest(args.manifest).values()}
    table = pipeline.aggregate_rates(records, roster, schema)
    print(table.format(args.title or ""), end="")
    if args.json:
        _write_json(args.json, table.to_dict())
    return 0


def cmd_kappa(args, schema) -> int:
    a = {d.doc_id: d for d in corpus.load_corpus(args.a, schema, check_relations=False)}
    b = {d.doc_id: d for d in corpus.load_corpus(args.b, schema, check_relations=False)}
    if set(a) != set(b):
        raise DocIdMismatch(f"annotators cover different documents: {sorted(set(a) ^ set(b))[:5]}")
    report = corpus.kappa_for_documents((a[k], b[k]) for k in sorted(a))
    print(f"kappa {report.kappa:.4f}  p_o {report.observed_agreement:.4f}  "
          f"p_e {report.expected_agreement:.4f}  tokens {report.unit_count}")
    if args.json:
        _write_json(args.json, vars(report))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, _Opts]]:
    parser = argparse.ArgumentParser(
        prog="sdoh-extract",
        description="Extract social determinants of health from clinical notes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    registry: dict[str, _Opts] = {}

    def command(name, help):
        opts = _Opts(sub.add_parser(name, help=help, description=help))
        _common(opts)
        registry[name] = opts
        return opts

    o = command("ingest", "Parse a brat standoff directory and write a normalized copy.")
    o.add("--input", "directory of <doc_id>.txt/.ann pairs", required=True, exists=True)
    o.add("--manifest", "manifest TSV (default: manifest.tsv in --input)", exists=True)
    o.add("--out", "output directory", required=True)

    o = command("validate", "Check every annotation and relation rule; exit 3 on violations.")
    o.add("--corpus", "corpus directory", required=True, exists=True)
    o.add("--manifest", "manifest TSV (default: manifest.tsv in --corpus)", exists=True)
    o.add("--json", "write the report as JSON to this file")

    o = command("split", "Split documents into train, validation and test lists.")
    o.add("--manifest", "manifest TSV listing documents", exists=True)
    o.add("--corpus", "corpus directory, used when no manifest is given", exists=True)
    o.add("--ratio", "train fraction before the validation hold-out", default=0.8, type=float)
    o.add("--test", "test fraction (default: 1 - ratio)", type=float)
    o.add("--val", "fraction of the training pool held out for validation", default=0.1, type=float)
    o.add("--seed", "shuffle seed", default=0, type=int)
    o.add("--out", "split JSON file (default: stdout)")

    o = command("select", "Select notes with enough distinct keyword mentions.")
    o.add("--notes", "directory of <doc_id>.txt notes", required=True, exists=True)
    o.add("--lexicon", "keyword file, one phrase per line", required=True, exists=True)
    o.add("--min-unique", "minimum distinct mentions", default=3, type=int)
    o.add("--unique-by", "what counts as distinct", default="phrase", choices=["phrase", "offset"])
    o.add("--substring", "match raw substrings instead of whole tokens", default=False,
          action=argparse.BooleanOptionalAction)
    o.add("--out", "output TSV (default: stdout)")

    o = command("synth", "Generate a synthetic annotated corpus.")
    o.add("--out", "output directory", required=True)
    o.add("--n-docs", "number of documents", default=100, type=int)
    o.add("--seed", "generation seed", default=0, type=int)
    o.add("--shift", "probability of drawing each phrase from the alternate lexicon", default=0.0, type=float)
    o.add("--domain", "domain written to the manifest", default="cancer")
    o.add("--id-prefix", "document id prefix", default="synth")
    o.add("--docs-per-patient", "documents per synthetic patient", default=3, type=int)
    o.add("--templates", "template JSON (default: packaged templates)", exists=True)

    o = command("train-ner", "Train the concept tagger.")
    _train_sets(o)
    o.add("--init", "existing tagger to fine-tune instead of training from scratch", exists=True)
    o.add("--out", "model file to write", required=True)
    _training(o, window=True, distance=False)

    o = command("train-re", "Train the attribute-concept linker.")
    _train_sets(o)
    o.add("--init", "existing linker to fine-tune instead of training from scratch", exists=True)
    o.add("--out", "model file to write", required=True)
    _training(o, window=False, distance=True)

    o = command("predict", "Run tagger and linker over a directory of notes.")
    o.add("--ner", "tagger model file", required=True, exists=True)
    o.add("--re", "linker model file", required=True, exists=True)
    o.add("--input", "directory of <doc_id>.txt notes", required=True, exists=True)
    o.add("--manifest", "manifest TSV (default: manifest.tsv in --input)", exists=True)
    o.add("--out", "output directory for standoff files, records.tsv and diagnostics.json", required=True)
    o.add("--parallelism", "worker processes", default=1, type=int)

    o = command("score", "Score predictions against gold annotations.")
    o.add("--gold", "gold corpus directory", required=True, exists=True)
    o.add("--pred", "predicted corpus directory (concepts and end-to-end relations)", required=True, exists=True)
    o.add("--relation-pred", "relations predicted from gold concepts", exists=True)
    o.add("--mode", "matching mode", default="both", choices=["strict", "lenient", "both"])
    o.add("--per-class", "also print per-category concept counts", default=False,
          action=argparse.BooleanOptionalAction)
    o.add("--json", "write the full report as JSON to this file")

    o = command("adapt", "Compare direct, fine-tune and merge-retrain transfer to a target domain.")
    o.add("--source-corpus", "source-domain corpus directory", required=True, exists=True)
    o.add("--target-corpus", "target-domain corpus directory", required=True, exists=True)
    o.add("--source-split", "split JSON for the source corpus", exists=True)
    o.add("--target-split", "split JSON for the target corpus", exists=True)
    o.add("--ratio", "source train fraction when no split file is given", default=0.8, type=float)
    o.add("--target-ratio", "target train fraction when no split file is given", default=0.5, type=float)
    o.add("--val", "validation fraction of each training pool", default=0.1, type=float)
    o.add("--ner", "source tagger (trained on the source split when omitted)", exists=True)
    o.add("--re", "source linker (trained on the source split when omitted)", exists=True)
    o.add("--out-dir", "directory to save the adapted models")
    o.add("--json", "write all scores as JSON to this file")
    _training(o, window=True, distance=True)

    o = command("aggregate", "Patient-level extraction rates per category.")
    o.add("--records", "records.tsv from predict", required=True, exists=True)
    o.add("--manifest", "manifest TSV; its patient ids form the roster", required=True, exists=True)
    o.add("--title", "table title")
    o.add("--json", "write the table as JSON to this file")

    o = command("kappa", "Token-level Cohen's kappa between two annotators.")
    o.add("--a", "first annotator's corpus directory", required=True, exists=True)
    o.add("--b", "second annotator's corpus directory", required=True, exists=True)
    o.add("--json", "write the report as JSON to this file")

    return parser, registry


COMMANDS = {
    "ingest": cmd_ingest,
    "validate": cmd_validate,
    "split": cmd_split,
    "select": cmd_select,
    "synth": cmd_synth,
    "train-ner": cmd_train_ner,
    "train-re": cmd_train_re,
    "predict": cmd_predict,
    "score": cmd_score,
    "adapt": cmd_adapt,
    "aggregate": cmd_aggregate,
    "kappa": cmd_kappa,
}


def main(argv: list[str] | None = None) -> int:
    parser, registry = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    if ns.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = _resolve(ns, registry[ns.command].specs)
        logging.basicConfig(
            level=args.log_level, stream=sys.stderr, force=True,
            format="%(asctime)s level=%(levelname)s logger=%(name)s %(message)s",
        )
        schema = load_schema(args.schema)
        return COMMANDS[ns.command](args, schema)
    except SdohError as exc:
        family = _FAMILY.get(exc.exit_code, "error")
        print(f"sdoh-extract: {family} error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"sdoh-extract: data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
