"""Command-line entry point for the full pipeline.

Subcommands: ingest, build-dict, match, distill, al-loop, train, tag,
eval, relex, serve, report.  Every command reads config plus flags,
writes its declared outputs, and exits 0 on success; failures print one
machine-readable JSON error line on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import load_config
from .core import (
    PipelineError,
    dataset_from_annotations,
    read_annotations,
    read_corpus,
    tags_to_spans,
    spans_to_tags,
    validate_document,
    write_annotations,
    write_corpus,
)
from .dictionary import load_lookup_tables, load_stopwords, save_lookup_tables
from .distiller import PosTaggerPlugin, apply_pos_rules, discard_entries, pos_tag, read_rules
from .evaluation import agreement, evaluate, stage_coverage
from .matcher import MatchConfig, annotate_corpus


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _match_config(cfg, stopwords) -> MatchConfig:
    kwargs = {"stopwords": stopwords}
    if cfg.match.url_pattern:
        kwargs["url_pattern"] = cfg.match.url_pattern
    if cfg.match.regex_rejectors:
        kwargs["regex_rejectors"] = tuple(cfg.match.regex_rejectors)
    return MatchConfig(**kwargs)


def cmd_ingest(args, cfg) -> int:
    docs = read_corpus(Path(args.corpus))
    accepted, rejected = [], {}
    for doc in docs:
        result = validate_document(doc)
        if result.accepted:
            accepted.append(doc)
        else:
            rejected[result.reason] = rejected.get(result.reason, 0) + 1
    write_corpus(Path(args.out), accepted)
    report = {"read": len(docs), "accepted": len(accepted), "rejected": rejected}
    if args.report:
        _write_json(Path(args.report), report)
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_build_dict(args, cfg) -> int:
    stopwords = load_stopwords(Path(args.stopwords) if args.stopwords else None)
    dictionary = load_lookup_tables([Path(p) for p in args.tables], stopwords)
    save_lookup_tables(Path(args.out), dictionary)
    print(json.dumps({"entries": len(dictionary), "counts": dictionary.counts()},
                     sort_keys=True))
    return 0


def cmd_match(args, cfg) -> int:
    stopwords = load_stopwords(Path(args.stopwords) if args.stopwords else None)
    corpus = read_corpus(Path(args.corpus))
    dictionary = load_lookup_tables([Path(p) for p in args.dict], stopwords)
    match_cfg = _match_config(cfg, stopwords)
    dataset, stats = annotate_corpus(corpus, dictionary, match_cfg)
    spans_by_doc = {ex.document.id: tags_to_spans(ex.tags) for ex in dataset.items}
    # Dictionary provenance on everything Stage 1 emits.
    from .core import Provenance, Span

    spans_by_doc = {
        doc_id: [
            Span(s.token_start, s.token_end, s.entity_type, Provenance.DICTIONARY)
            for s in spans
        ]
        for doc_id, spans in spans_by_doc.items()
    }
    write_annotations(Path(args.out), spans_by_doc)
    if args.stats:
        _write_json(Path(args.stats), stats.to_json())
    print(json.dumps(stats.to_json(), sort_keys=True))
    return 0


def cmd_distill(args, cfg) -> int:
    corpus = read_corpus(Path(args.corpus))
    spans_by_doc = read_annotations(Path(args.annotations))
    rules = read_rules(Path(args.rules))
    tagger = PosTaggerPlugin(args.pos_plugin.split() if args.pos_plugin else None)
    tagged = [pos_tag(doc, tagger) for doc in corpus]
    dataset = dataset_from_annotations(tagged, spans_by_doc, name="stage1")
    distilled, demotions = apply_pos_rules(dataset, rules)
    out_spans = {ex.document.id: tags_to_spans(ex.tags) for ex in distilled.items}
    write_annotations(Path(args.out), out_spans)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as handle:
            for d in demotions:
                handle.write(json.dumps({
                    "doc_id": d.doc_id,
                    "token_start": d.span.token_start,
                    "token_end": d.span.token_end,
                    "entity_type": d.span.entity_type.value,
                    "surface": d.surface,
                    "rule": [d.rule.surface, d.rule.prev_pos, d.rule.self_pos,
                             d.rule.next_pos, d.rule.from_type.value],
                }, sort_keys=True) + "\n")
    summary = {"documents": len(distilled), "demotions": len(demotions)}
    if args.dict and args.dict_out:
        stopwords = load_stopwords(Path(args.stopwords) if args.stopwords else None)
        dictionary = load_lookup_tables([Path(p) for p in args.dict], stopwords)
        dictionary, removed = discard_entries(dictionary, demotions, args.discard_threshold)
        save_lookup_tables(Path(args.dict_out), dictionary)
        summary["dict_removed"] = len(removed)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_al_loop(args, cfg) -> int:
    from .active_learning import (
        FixtureProvider,
        LoopState,
        SamplePlan,
        ScriptedAnnotator,
        run_loop,
        write_audit_log,
    )
    from .dictionary import Dictionary

    corpus = read_corpus(Path(args.corpus))
    stopwords = load_stopwords(Path(args.stopwords) if args.stopwords else None)
    dictionary = (
        load_lookup_tables([Path(p) for p in args.dict], stopwords)
        if args.dict
        else Dictionary(stopwords=stopwords)
    )
    spans_by_doc = read_annotations(Path(args.annotations)) if args.annotations else {}
    provider = FixtureProvider.from_file(Path(args.provider))
    annotator = ScriptedAnnotator.from_file(Path(args.annotator))
    sample_plan = None
    if args.per_year:
        first, last = (int(y) for y in args.years.split(":"))
        sample_plan = SamplePlan(args.per_year, tuple(range(first, last + 1)))
    state = LoopState(
        labeled_data=dataset_from_annotations(corpus, spans_by_doc, name="L"),
        sample_plan=sample_plan,
        threshold=args.threshold,
    )
    state, dictionary, audit = run_loop(
        state,
        corpus,
        provider,
        annotator,
        dictionary,
        max_rounds=args.max_rounds,
        seed=args.seed,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_audit_log(out_dir / "audit.jsonl", audit)
    save_lookup_tables(out_dir / "dictionary.tsv", dictionary)
    final_spans = {
        ex.document.id: tags_to_spans(ex.tags) for ex in state.labeled_data.items
    }
    write_annotations(out_dir / "labeled.jsonl", final_spans)
    summary = {
        "rounds": state.round,
        "stopped": state.stopped,
        "reason": state.stop_reason,
        "human_labels": state.human_labels,
        "dict_size": len(dictionary),
    }
    _write_json(out_dir / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_train(args, cfg) -> int:
    from .crf import save_model, tag_accuracy, train_pa

    corpus = read_corpus(Path(args.corpus))
    spans_by_doc = read_annotations(Path(args.annotations))
    dataset = dataset_from_annotations(corpus, spans_by_doc, name="train")
    model = train_pa(
        dataset,
        iterations=args.iterations,
        aggressiveness=args.aggressiveness,
        seed=args.seed,
    )
    save_model(Path(args.out), model)
    print(json.dumps({
        "documents": len(dataset),
        "iterations": args.iterations,
        "train_accuracy": tag_accuracy(model, dataset),
    }, sort_keys=True))
    return 0


def cmd_tag(args, cfg) -> int:
    from .crf import TaggerPlugin, load_model, tag_corpus

    corpus = read_corpus(Path(args.corpus))
    if args.plugin:
        tagger = TaggerPlugin(args.plugin.split())
    else:
        tagger = load_model(Path(args.model))
    spans_by_doc, failures = tag_corpus(tagger, corpus)
    write_annotations(Path(args.out), spans_by_doc)
    print(json.dumps({
        "documents": len(corpus),
        "spans": sum(len(v) for v in spans_by_doc.values()),
        "failures": failures,
    }, sort_keys=True))
    return 0


def cmd_eval(args, cfg) -> int:
    gold = read_annotations(Path(args.gold))
    pred = read_annotations(Path(args.pred))
    if args.corpus:
        ids = [doc.id for doc in read_corpus(Path(args.corpus))]
    else:
        ids = sorted(set(gold) | set(pred))
    gold = {doc_id: gold.get(doc_id, []) for doc_id in ids}
    pred = {doc_id: pred.get(doc_id, []) for doc_id in ids}
    modes = ["exact", "type_at_token"] if args.matching == "both" else [args.matching]
    payload = {}
    for mode in modes:
        payload[mode] = evaluate(gold, pred, mode).to_json()
    if args.out:
        _write_json(Path(args.out), payload)
    print(json.dumps({m: payload[m]["overall_recall"] for m in payload}, sort_keys=True))
    return 0


def cmd_relex(args, cfg) -> int:
    from .crf import load_model
    from .relations import (
        BagOfWordsEncoder,
        NativeCrfEncoder,
        read_triplets,
        relation_report,
        train_relation_clf,
    )

    corpus = read_corpus(Path(args.corpus))
    docs_by_id = {d.id: d for d in corpus}
    triplets = read_triplets(Path(args.triplets))
    if args.encoder == "native":
        encoder = NativeCrfEncoder(load_model(Path(args.model)))
    else:
        encoder = BagOfWordsEncoder()
    model, held_out = train_relation_clf(
        triplets, docs_by_id, encoder,
        train_fraction=args.train_fraction, seed=args.seed,
    )
    report = relation_report(model, held_out, docs_by_id, encoder)
    if args.out:
        _write_json(Path(args.out), report)
    print(json.dumps({"accuracy": report["accuracy"],
                      "held_out": report["triplets"]}, sort_keys=True))
    return 0


def cmd_serve(args, cfg) -> int:
    import uvicorn

    from .service import build_service, create_app

    service = build_service(cfg, prime=cfg.service.prime)
    static_dir = Path(cfg.service.static_dir) if cfg.service.static_dir else None
    app = create_app(service, static_dir=static_dir)
    uvicorn.run(app, host=cfg.service.host, port=cfg.service.port, log_level="warning")
    return 0


def cmd_report(args, cfg) -> int:
    if args.kind == "coverage":
        stage1 = read_annotations(Path(args.stage1))
        stage2 = read_annotations(Path(args.stage2))
        payload = stage_coverage(stage1, stage2)
    else:
        corpus = read_corpus(Path(args.corpus))
        ann_a = read_annotations(Path(args.a))
        ann_b = read_annotations(Path(args.b))
        tags_a = [spans_to_tags(doc, ann_a.get(doc.id, [])) for doc in corpus]
        tags_b = [spans_to_tags(doc, ann_b.get(doc.id, [])) for doc in corpus]
        payload = {"kappa": agreement(tags_a, tags_b)}
    if args.out:
        _write_json(Path(args.out), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ossner",
        description="Distantly supervised NER pipeline for software-ecosystem text",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="TOML pipeline config", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flag(subparser):
        # accepted after the subcommand as well; SUPPRESS keeps a global
        # --config visible when the subcommand flag is absent
        subparser.add_argument("--config", default=argparse.SUPPRESS,
                               help="TOML pipeline config")

    p = sub.add_parser("ingest", help="validate and filter a raw corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    add_config_flag(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-dict", help="merge lookup tables into one dictionary")
    p.add_argument("--tables", nargs="+", required=True)
    p.add_argument("--stopwords")
    p.add_argument("--out", required=True)
    add_config_flag(p)
    p.set_defaults(func=cmd_build_dict)

    p = sub.add_parser("match", help="Stage 1 dictionary matching")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dict", nargs="+", required=True)
    p.add_argument("--stopwords")
    p.add_argument("--out", required=True)
    p.add_argument("--stats")
    add_config_flag(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("distill", help="Stage 2a POS-rule distillation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--pos-plugin")
    p.add_argument("--out", required=True)
    p.add_argument("--log")
    p.add_argument("--dict", nargs="+")
    p.add_argument("--dict-out")
    p.add_argument("--discard-threshold", type=int, default=10)
    p.add_argument("--stopwords")
    add_config_flag(p)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("al-loop", help="Stage 2b active-learning loop")
    p.add_argument("--corpus", required=True)
    p.add_argument("--annotations")
    p.add_argument("--dict", nargs="+")
    p.add_argument("--stopwords")
    p.add_argument("--provider", required=True, help="fixture mention JSONL")
    p.add_argument("--annotator", required=True, help="scripted oracle JSONL")
    p.add_argument("--per-year", type=int, default=0)
    p.add_argument("--years", default="2004:2019")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    add_config_flag(p)
    p.set_defaults(func=cmd_al_loop)

    p = sub.add_parser("train", help="train the native sequence tagger")
    p.add_argument("--corpus", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--iterations", type=int, default=150)
    p.add_argument("--aggressiveness", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    add_config_flag(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tag", help="tag a corpus with a model or plugin")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model")
    p.add_argument("--plugin", help="external tagger command")
    p.add_argument("--out", required=True)
    add_config_flag(p)
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("eval", help="recall rate and macro-F1")
    p.add_argument("--corpus", help="align document ids over this corpus")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--matching", choices=["exact", "type_at_token", "both"],
                   default="both")
    p.add_argument("--out")
    add_config_flag(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("relex", help="relation classification over triplets")
    p.add_argument("--corpus", required=True)
    p.add_argument("--triplets", required=True)
    p.add_argument("--model", help="tagger model for the native encoder")
    p.add_argument("--encoder", choices=["native", "bow"], default="native")
    p.add_argument("--train-fraction", type=float, default=0.03)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    add_config_flag(p)
    p.set_defaults(func=cmd_relex)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    add_config_flag(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="stage coverage or annotator agreement")
    p.add_argument("--kind", choices=["coverage", "agreement"], required=True)
    p.add_argument("--stage1")
    p.add_argument("--stage2")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--corpus")
    p.add_argument("--out")
    add_config_flag(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(Path(args.config) if args.config else None)
        return args.func(args, cfg)
    except PipelineError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
