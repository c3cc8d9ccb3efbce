"""Command line entry point: synth, train, generate, evaluate, compare, cost, pipeline.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import PROFILES, ConfigError, ExperimentConfig
from .corpus import (
    CorpusFormatError,
    CorpusIOError,
    LoadReport,
    compute_stats,
    load_mimics,
    load_native,
    synthesize_corpus,
    write_native,
)
from .embeddings import get_provider
from .estimator import FacetGenerator
from .inference import read_predictions, write_predictions
from .metrics import EvalOptions, MetricReport, evaluate
from .model import NumericError
from .permute import (
    OBJECTIVES,
    Limits,
    SamplingPlan,
    build_examples,
    count_full_examples,
    default_limits,
    estimate_epoch_cost,
)
from .reports import compare, comparison_markdown, report_markdown
from .text import build_vocabulary
from .training import epoch_rng

logger = logging.getLogger("facetgen")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_corpus(cfg: ExperimentConfig):
    c = cfg.corpus
    source = c["source"]
    if source == "synthetic":
        dist = {int(k): float(v) for k, v in c["facet_count_distribution"].items()}
        return synthesize_corpus(c["num_queries"], dist, c["vocab_size"], c["seed"])
    report = LoadReport()
    if source == "native":
        records = load_native(cfg.resolve(c["path"]), report)
    else:
        snippets = c.get("snippets")
        records = load_mimics(cfg.resolve(c["tsv"]), cfg.resolve(snippets) if snippets else None, report)
    if report.skipped:
        logger.warning("%d corpus lines skipped", len(report.skipped))
    if not records:
        raise CorpusFormatError("corpus has no valid records")
    return records


def make_estimator(cfg: ExperimentConfig, objective: str) -> FacetGenerator:
    m, t, s, inf = cfg.model, cfg.training, cfg.sampling, cfg.inference
    return FacetGenerator(
        objective=objective,
        embedding_dim=m["embedding_dim"],
        hidden_dim=m["hidden_dim"],
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        learning_rate=t["learning_rate"],
        weight_decay=t["weight_decay"],
        permutations_per_query=s["permutations_per_query"],
        seq_set_schedule=cfg.seq_set_schedule,
        sampling_replace=s["replace"],
        n_facets=inf["n_facets"],
        beam_width=inf["beam_width"],
        max_input_tokens=m.get("max_input_tokens"),
        max_output_tokens=m.get("max_output_tokens"),
        min_frequency=m.get("min_frequency", 1),
        random_state=t["seed"],
        init_seed=m["init_seed"],
    )


def _objectives(cfg, args) -> list[str]:
    if args.objective:
        return [args.objective]
    return list(cfg.objectives)


def cmd_synth(cfg, args, out: Path) -> int:
    if cfg.corpus["source"] != "synthetic":
        raise ConfigError("synth needs a synthetic corpus source")
    records = load_corpus(cfg)
    write_native(records, out / "corpus.jsonl")
    _dump(compute_stats(records).to_dict(), out / "corpus.stats.json")
    print(f"wrote {len(records)} records to {out / 'corpus.jsonl'}")
    return EXIT_OK


def _write_log(est: FacetGenerator, cfg, path: Path) -> None:
    log = est.training_log_
    header = {"objective": log.objective, "training_seed": log.seed, "init_seed": log.init_seed,
              "corpus_seed": cfg.corpus.get("seed")}
    with open(path.with_suffix(".log.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for entry in log.epochs:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    _dump({"objective": log.objective, "epoch_seconds": log.wall_time}, path.with_suffix(".timing.json"))


def dump_examples(cfg, objective: str, records, path: Path) -> None:
    """Epoch-0 training examples as JSONL, for inspection."""
    vocab = build_vocabulary(records, cfg.model.get("min_frequency", 1))
    plan = SamplingPlan(objective, cfg.sampling["permutations_per_query"], cfg.seq_set_schedule, cfg.sampling["replace"])
    rng = epoch_rng(cfg.training["seed"], 0)
    with open(path, "w", encoding="utf-8") as fh:
        for i, rec in enumerate(records):
            for ex in build_examples(objective, rec, plan, vocab, Limits.for_objective(objective), rng, group_key=i):
                fh.write(json.dumps({
                    "query": rec.query, "group": ex.group_key, "weight": ex.weight,
                    "input": vocab.decode(ex.input), "target": vocab.decode(ex.target),
                }) + "\n")


def cmd_train(cfg, args, out: Path) -> int:
    records = load_corpus(cfg)
    for objective in _objectives(cfg, args):
        if args.dump_examples:
            dump_examples(cfg, objective, records, out / f"{objective}.examples.jsonl")
        est = make_estimator(cfg, objective).fit(records)
        ckpt = out / f"{objective}.ckpt"
        est.save(ckpt)
        _write_log(est, cfg, ckpt)
        losses = est.training_log_.losses
        if losses:
            print(f"{objective}: loss {losses[0]:.4f} -> {losses[-1]:.4f} ({len(losses)} epochs), saved {ckpt}")
        else:
            print(f"{objective}: no training epochs, saved initial parameters to {ckpt}")
    return EXIT_OK


def _generate(cfg, est: FacetGenerator, records, path: Path) -> None:
    vocab = build_vocabulary(records, est.min_frequency)
    if vocab.id_to_token != est.vocabulary_.id_to_token:
        raise ValueError("vocabulary mismatch between checkpoint and corpus")
    write_predictions(((r.query, est.predict_one(r)) for r in records), path)


def cmd_generate(cfg, args, out: Path) -> int:
    records = load_corpus(cfg)
    if args.checkpoint and args.objective is None:
        jobs = [(None, Path(args.checkpoint))]
    else:
        jobs = [(o, Path(args.checkpoint) if args.checkpoint else out / f"{o}.ckpt") for o in _objectives(cfg, args)]
    for objective, ckpt in jobs:
        est = FacetGenerator.load(ckpt)
        if objective is not None and est.objective != objective:
            raise ValueError(f"checkpoint {ckpt} was trained with {est.objective}, not {objective}")
        est.set_params(n_facets=cfg.inference["n_facets"], beam_width=cfg.inference["beam_width"])
        path = out / f"{est.objective}.predictions.jsonl"
        _generate(cfg, est, records, path)
        print(f"wrote {path}")
    return EXIT_OK


def _eval_options(cfg) -> EvalOptions:
    m = cfg.metrics
    return EvalOptions(tuple(m["ngram_orders"]), m["bleu_mode"], bool(m["diversity"]))


def _evaluate_file(cfg, pred_path: Path, gold, name: str, out: Path) -> MetricReport:
    report = evaluate(read_predictions(pred_path), gold, get_provider(cfg.metrics["embedding_provider"]),
                      _eval_options(cfg), method=name)
    _dump(report.to_dict(), out / f"{name}.report.json")
    (out / f"{name}.report.md").write_text(report_markdown(report), encoding="utf-8")
    return report


def cmd_evaluate(cfg, args, out: Path) -> int:
    gold = load_native(args.gold) if args.gold else load_corpus(cfg)
    if args.predictions:
        paths = [Path(p) for p in args.predictions]
    else:
        paths = [out / f"{o}.predictions.jsonl" for o in _objectives(cfg, args)]
    for path in paths:
        name = args.name if args.name and len(paths) == 1 else path.name.split(".predictions")[0].split(".jsonl")[0]
        report = _evaluate_file(cfg, path, gold, name, out)
        print(f"{name}: term-overlap F1 {report.macro['term_overlap_f1']:.4f}, "
              f"exact-match F1 {report.macro['exact_match_f1']:.4f}")
    return EXIT_OK


def cmd_compare(cfg, args, out: Path) -> int:
    if args.reports:
        paths = [Path(p) for p in args.reports]
    else:
        paths = [out / f"{o}.report.json" for o in _objectives(cfg, args)]
    reports = [MetricReport.from_dict(json.loads(p.read_text(encoding="utf-8"))) for p in paths]
    comp = compare(reports, baseline=args.baseline)
    _dump(comp.to_dict(), out / "comparison.json")
    text = comparison_markdown(comp, reports)
    (out / "comparison.md").write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


def cost_table(cfg, records) -> list[dict]:
    stats = compute_stats(records)
    vocab = build_vocabulary(records, cfg.model.get("min_frequency", 1))
    rows = []
    for objective in cfg.objectives:
        plan = SamplingPlan(objective, cfg.sampling["permutations_per_query"], cfg.seq_set_schedule, cfg.sampling["replace"])
        rng = epoch_rng(cfg.training["seed"], 0)
        sampled = sum(len(build_examples(objective, r, plan, vocab, Limits(*default_limits(objective)), rng))
                      for r in records)
        rows.append({
            "objective": objective,
            "estimated_cost": estimate_epoch_cost(objective, stats),
            "full_examples": sum(count_full_examples(objective, r.n_facets) for r in records),
            "sampled_examples": sampled,
        })
    return rows


def cmd_cost(cfg, args, out: Path) -> int:
    records = load_corpus(cfg)
    rows = cost_table(cfg, records)
    _dump({"stats": compute_stats(records).to_dict(), "objectives": rows}, out / "cost.json")
    lines = ["| Objective | Est. token ops / epoch | Full examples | Sampled examples (epoch 0) |", "|---|---|---|---|"]
    lines += [f"| {r['objective']} | {r['estimated_cost']:.4g} | {r['full_examples']} | {r['sampled_examples']} |"
              for r in rows]
    text = "\n".join(lines) + "\n"
    (out / "cost.md").write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_pipeline(cfg, args, out: Path) -> int:
    """Train, generate and evaluate every configured objective, then compare."""
    records = load_corpus(cfg)
    if cfg.corpus["source"] == "synthetic":
        write_native(records, out / "corpus.jsonl")
    reports = []
    for objective in _objectives(cfg, args):
        est = make_estimator(cfg, objective).fit(records)
        ckpt = out / f"{objective}.ckpt"
        est.save(ckpt)
        _write_log(est, cfg, ckpt)
        pred_path = out / f"{objective}.predictions.jsonl"
        _generate(cfg, est, records, pred_path)
        reports.append(_evaluate_file(cfg, pred_path, records, objective, out))
        logger.info("%s done", objective)
    comp = compare(reports, baseline=args.baseline)
    _dump(comp.to_dict(), out / "comparison.json")
    text = comparison_markdown(comp, reports)
    (out / "comparison.md").write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "cost": cmd_cost,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="facetgen", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config (JSON)")
    common.add_argument("--profile", choices=sorted(PROFILES), help="defaults profile (overrides the config's)")
    common.add_argument("--objective", choices=OBJECTIVES, help="restrict to one objective")
    common.add_argument("--checkpoint", help="checkpoint path (generate)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="override every seed in the config")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("synth", "generate", "cost"):
        sub.add_parser(name, parents=[common])
    p = sub.add_parser("train", parents=[common])
    p.add_argument("--dump-examples", action="store_true", help="also write epoch-0 training examples as JSONL")
    p = sub.add_parser("evaluate", parents=[common])
    p.add_argument("--predictions", nargs="+", help="prediction JSONL files (default: one per objective in --out)")
    p.add_argument("--gold", help="gold corpus JSONL (default: the configured corpus)")
    p.add_argument("--name", help="method name for a single predictions file")
    p = sub.add_parser("compare", parents=[common])
    p.add_argument("--reports", nargs="+", help="report JSON files (default: one per objective in --out)")
    p.add_argument("--baseline", help="method name to test every other method against")
    p = sub.add_parser("pipeline", parents=[common])
    p.add_argument("--baseline")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config, args.profile)
        if args.seed is not None:
            cfg.override_seed(args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusFormatError, CorpusIOError, OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
