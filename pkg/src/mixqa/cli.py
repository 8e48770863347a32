"""Command-line entry points wiring the pipeline together.

Subcommands: synth, ingest, train-ranker, train-reader, retrieve, answer,
evaluate, gradcheck. Hyperparameters come from an optional key=value
config file plus repeatable --set key=value overrides; flags win.

Exit codes: 0 success, 2 validation error (arguments, config, file
formats), 1 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_run_config
from .corpus import Corpus, CorpusFormatError, load_corpus, load_corpus_dir, tokenize, write_corpus_dir
from .corpus import _encode  # standard encoding path for ad-hoc questions
from .diagnostics import run_gradcheck
from .metrics import PredictionRecord, reader_report, retrieval_report
from .reader import bundle_context, train_reader
from .retrieval import build_oracle, make_retriever, rank_r1, candidates_r0, train_ranker
from .rngs import substream
from .serialize import CheckpointError, load_ranker, load_reader, save_ranker, save_reader
from .synth import SynthConfig, write_synth_dir

logger = logging.getLogger(__name__)

PREDICTIONS_HEADER = "# mixqa predictions v1"
RETRIEVAL_HEADER = "# mixqa retrieval v1"


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one setting (repeatable)")


def _run_config(args) -> RunConfig:
    overrides: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    config = load_run_config(args.config, overrides)
    if not config.deterministic:
        config.seed = int(np.random.SeedSequence().entropy % (2**31 - 1))
        logger.info("deterministic off: drew seed %d", config.seed)
    return config


def _load_corpus_arg(args) -> Corpus:
    return load_corpus_dir(args.corpus)


def _build_retriever(args, corpus: Corpus, config: RunConfig):
    ranker = None
    if args.retriever == "r2":
        if not getattr(args, "ranker", None):
            raise ConfigError("--retriever r2 needs --ranker CHECKPOINT")
        ranker = load_ranker(args.ranker, corpus)
    return make_retriever(corpus, args.retriever, config.M, seed=config.seed, ranker=ranker)


def _encode_question(corpus: Corpus, text: str):
    tokens, caps = tokenize(text)
    if not tokens:
        raise ConfigError("question is empty after tokenization")
    return _encode(tokens, caps, corpus.vocab, corpus.lexicon)


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    config = SynthConfig(
        n_movies=args.movies,
        seed=args.seed,
        consistency=args.consistency,
        collision_rate=args.collision_rate,
        min_count=args.min_count,
    )
    out = write_synth_dir(args.out, config)
    corpus = load_corpus_dir(out)
    print(f"wrote {out}: {len(corpus.articles)} articles, "
          f"{ {s: len(p) for s, p in sorted(corpus.qa.items())} } questions, "
          f"{corpus.n_entities} entities")
    return 0


def cmd_ingest(args) -> int:
    qa_files = {}
    for split in ("train", "dev", "test"):
        path = getattr(args, split)
        if path:
            qa_files[split] = path
    if not qa_files:
        raise ConfigError("ingest needs at least one of --train/--dev/--test")
    corpus = load_corpus(
        args.entities,
        args.articles,
        qa_files,
        min_count=args.min_count,
        max_articles=args.max_articles,
        max_questions=args.max_questions,
    )
    # re-emit in the standard layout
    from .corpus import _read_entity_file, _read_articles_jsonl, _read_articles_text, _read_qa_file

    displays = _read_entity_file(Path(args.entities))
    apath = Path(args.articles)
    raw_articles = (
        _read_articles_jsonl(apath, args.max_articles)
        if apath.suffix == ".jsonl"
        else _read_articles_text(apath, args.max_articles)
    )
    raw_qa = {s: _read_qa_file(Path(p), args.max_questions) for s, p in qa_files.items()}
    write_corpus_dir(args.out, displays, raw_articles, raw_qa, meta={"source": "ingest", "min_count": args.min_count})
    drops = {s: n for s, n in corpus.dropped_pairs.items() if n}
    print(f"wrote {args.out}: {len(corpus.articles)} articles, "
          f"{ {s: len(p) for s, p in sorted(corpus.qa.items())} } questions kept, dropped {drops or 0}")
    return 0


def cmd_train_ranker(args) -> int:
    config = _run_config(args)
    corpus = _load_corpus_arg(args)
    model, stats = train_ranker(corpus, config.ranker_config())
    save_ranker(args.out, model)
    print(f"trained ranker: {stats.steps} steps, best dev R@1 {stats.best_dev:.4f}; saved to {args.out}")
    return 0


def cmd_train_reader(args) -> int:
    config = _run_config(args)
    corpus = _load_corpus_arg(args)
    retriever = _build_retriever(args, corpus, config)
    model, stats = train_reader(corpus, retriever, config.reader_config())
    save_reader(args.out, model)
    print(f"trained reader ({config.variant}): {stats.instances_seen} instances, "
          f"best dev hits@1 {stats.best_dev:.4f}, skipped {stats.skipped_empty}; saved to {args.out}")
    return 0


def cmd_retrieve(args) -> int:
    config = _run_config(args)
    corpus = _load_corpus_arg(args)
    ranker = load_ranker(args.ranker, corpus) if args.ranker else None
    if args.kind == "r2" and ranker is None:
        raise ConfigError("--kind r2 needs --ranker CHECKPOINT")
    retriever = make_retriever(corpus, args.kind, args.M or config.M, seed=config.seed, ranker=ranker)
    pairs = corpus.qa.get(args.split)
    if pairs is None:
        raise ConfigError(f"corpus has no split {args.split!r}")
    lines = [f"{RETRIEVAL_HEADER} split={args.split} kind={args.kind}"]
    for qid, pair in enumerate(pairs):
        ranked = retriever(pair.question)
        cand = candidates_r0(pair.question, corpus)
        if args.kind == "r1":
            from .retrieval import score_r1

            scores = [score_r1(cand, aid) for aid in ranked]
        else:
            scores = [float(len(ranked) - i) for i in range(len(ranked))]
        lines.append(
            f"{qid}\t{','.join(str(a) for a in ranked)}\t{','.join(f'{s:g}' for s in scores)}"
        )
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out}: {len(pairs)} questions")
    if args.oracle_out:
        oracle = build_oracle(corpus, args.split)
        rows = [f"{qid}\t{','.join(str(a) for a in sorted(labels))}" for qid, labels in enumerate(oracle)]
        Path(args.oracle_out).write_text("\n".join(rows) + "\n")
        print(f"wrote {args.oracle_out}")
    return 0


def _format_top(corpus: Corpus, top: list[tuple[int, float]]) -> str:
    return "|".join(f"{corpus.entity_display(e) if e >= 0 else '<none>'}={p:.6g}" for e, p in top)


def cmd_answer(args) -> int:
    config = _run_config(args)
    corpus = _load_corpus_arg(args)
    model = load_reader(args.model, corpus)
    retriever = _build_retriever(args, corpus, config)

    if args.question:
        q_seq = _encode_question(corpus, args.question)
        bundle = bundle_context(corpus, retriever(q_seq))
        anon = model.fresh_anon_map(q_seq, bundle, substream(config.seed, "eval", 0))
        dist = model.predict(q_seq, bundle, anon)
        top1 = dist.top1()
        display = corpus.entity_display(top1) if top1 >= 0 else "<none>"
        source = _answer_source(model.config.variant, dist, top1)
        g_text = f"{dist.gate:.4f}" if dist.gate is not None else "-"
        print(f"answer: {display}  g={g_text}  source={source}")
        for rank, (eid, p) in enumerate(dist.top(5), start=1):
            print(f"  {rank}. {corpus.entity_display(eid)}  p={p:.4f}")
        return 0

    pairs = corpus.qa.get(args.split)
    if pairs is None:
        raise ConfigError(f"corpus has no split {args.split!r}")
    lines = [f"{PREDICTIONS_HEADER} split={args.split}"]
    for qid, pair in enumerate(pairs):
        bundle = bundle_context(corpus, retriever(pair.question))
        anon = model.fresh_anon_map(pair.question, bundle, substream(config.seed, "eval", qid))
        dist = model.predict(pair.question, bundle, anon)
        top1 = dist.top1()
        display = corpus.entity_display(top1) if top1 >= 0 else "<none>"
        g_text = f"{dist.gate:.6f}" if dist.gate is not None else "-"
        lines.append(f"{qid}\t{display}\t{g_text}\t{_format_top(corpus, dist.top(5))}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out}: {len(pairs)} predictions")
    return 0


def _answer_source(variant: str, dist, top1: int) -> str:
    if variant == "a" or dist.att_empty and variant != "v":
        return "attention" if variant == "a" else "vocabulary"
    if variant == "v":
        return "vocabulary"
    att_mass = 0.0
    if top1 in dist.att_ids:
        att_mass = (1.0 - dist.gate) * float(dist.p_att[list(dist.att_ids).index(top1)])
    vocab_mass = 0.0
    ids = list(dist.vocab_ids)
    if top1 in ids:
        vocab_mass = dist.gate * float(dist.p_vocab[ids.index(top1)])
    return "attention" if att_mass >= vocab_mass else "vocabulary"


def _display_to_id(corpus: Corpus) -> dict[str, int]:
    mapping: dict[str, int] = {}
    for ent in corpus.entities:
        mapping.setdefault(ent.display, ent.id)
    return mapping


def cmd_evaluate(args) -> int:
    corpus = _load_corpus_arg(args)
    if bool(args.predictions) == bool(args.retrieval):
        raise ConfigError("evaluate needs exactly one of --predictions or --retrieval")

    if args.predictions:
        pairs = corpus.qa.get(args.split)
        if pairs is None:
            raise ConfigError(f"corpus has no split {args.split!r}")
        by_display = _display_to_id(corpus)
        records = []
        for line in Path(args.predictions).read_text().splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise CorpusFormatError(f"{args.predictions}: bad prediction line {line!r}")
            qid = int(fields[0])
            pred_id = by_display.get(fields[1], -1)
            gate = None if fields[2] == "-" else float(fields[2])
            pair = pairs[qid]
            records.append(
                PredictionRecord(
                    qid=qid,
                    ranked=[(pred_id, 1.0)],
                    gold=frozenset(pair.answers),
                    gate=gate,
                    category=pair.category,
                )
            )
        report = reader_report(records)
    else:
        rankings: dict[int, list[int]] = {}
        for line in Path(args.retrieval).read_text().splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            qid = int(fields[0])
            rankings[qid] = [int(a) for a in fields[1].split(",") if a] if len(fields) > 1 and fields[1] else []
        oracle = build_oracle(corpus, args.split)
        ordered = [rankings.get(qid, []) for qid in range(len(oracle))]
        report = retrieval_report(ordered, oracle)

    print(report.to_text())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n")
        print(f"wrote {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    ok, lines = run_gradcheck(tol=args.tol, h=args.h)
    for line in lines:
        print(line)
    print("gradcheck: " + ("PASS" if ok else "FAIL"))
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixqa", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--movies", type=int, default=200)
    p.add_argument("--consistency", type=float, default=1.0)
    p.add_argument("--collision-rate", type=float, default=0.0)
    p.add_argument("--min-count", type=int, default=10)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("ingest", help="validate external files and write a corpus directory")
    p.add_argument("--entities", required=True)
    p.add_argument("--articles", required=True)
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--test")
    p.add_argument("--out", required=True)
    p.add_argument("--min-count", type=int, default=10)
    p.add_argument("--max-articles", type=int)
    p.add_argument("--max-questions", type=int)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("train-ranker", help="train the word-level attention ranker")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_train_ranker)

    p = sub.add_parser("train-reader", help="train the comprehension model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--retriever", choices=["r0", "r1", "r2"], default="r1")
    p.add_argument("--ranker", help="ranker checkpoint (for --retriever r2)")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_train_reader)

    p = sub.add_parser("retrieve", help="dump ranked articles for a split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--kind", choices=["r0", "r1", "r2"], required=True)
    p.add_argument("--ranker")
    p.add_argument("--split", default="dev")
    p.add_argument("--M", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--oracle-out")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_retrieve)

    p = sub.add_parser("answer", help="answer one question or dump predictions for a split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--retriever", choices=["r0", "r1", "r2"], default="r1")
    p.add_argument("--ranker")
    p.add_argument("--question")
    p.add_argument("--split")
    p.add_argument("--out")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_answer)

    p = sub.add_parser("evaluate", help="score a prediction or retrieval dump")
    p.add_argument("--corpus", required=True)
    p.add_argument("--predictions")
    p.add_argument("--retrieval")
    p.add_argument("--split", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="verify analytic gradients on frozen toy losses")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--h", type=float, default=1e-5)
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "answer" and not args.question and not (args.split and args.out):
        parser.error("answer needs --question or both --split and --out")
    try:
        return args.fn(args)
    except (ConfigError, CorpusFormatError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
