"""Command-line entry point: ``mammodet <command> [options]``.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .evaluation import (
    UndefinedAucError,
    auc,
    ensemble_predictions,
    labeled_scores,
    metrics_dict,
    read_roc_csv,
    roc_curve,
    run_statistics,
    write_metrics,
    write_roc_csv,
)
from .inference import (
    Aggregation,
    InferenceConfig,
    predict_breasts,
    read_detections,
    read_predictions,
    write_detections,
    write_predictions,
)
from .report import format_summary, roc_svg, summary_rows
from .sampling import SamplerConfig, sample_batch
from .synthetic import SynthConfig, generate_corpus, simulate_detections

logger = logging.getLogger("mammodet")


class CommandError(Exception):
    """Runtime failure reported on stderr with exit code 1."""


def _float_in(low, high, low_open=False, high_open=False):
    def parse(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        ok = math.isfinite(v)
        ok = ok and (v > low if low_open else v >= low)
        ok = ok and (v < high if high_open else v <= high)
        if not ok:
            lb, hb = "(" if low_open else "[", ")" if high_open else "]"
            raise argparse.ArgumentTypeError(f"{v} is outside {lb}{low}, {high}{hb}")
        return v
    return parse


def _int_at_least(minimum):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
        if v < minimum:
            raise argparse.ArgumentTypeError(f"must be >= {minimum}, got {v}")
        return v
    return parse


probability = _float_in(0.0, 1.0)
real = _float_in(-math.inf, math.inf)
seed_type = _int_at_least(0)


def _load_corpus(path, strict=False):
    try:
        return corpus_mod.load_corpus(path, strict=strict)
    except FileNotFoundError:
        raise CommandError(f"corpus not found: {path}") from None


def _check_distinct(parser, **paths):
    seen = {}
    for name, p in paths.items():
        if p is None:
            continue
        key = Path(p).resolve()
        if key in seen:
            parser.error(f"--{seen[key]} and --{name} point to the same file {p}")
        seen[key] = name


# --- commands ---------------------------------------------------------------

def cmd_gen_corpus(args, parser):
    _check_distinct(parser, output=args.output, truth=args.truth)
    try:
        config = SynthConfig(
            n_exams=args.n_exams,
            malignant_prevalence=args.malignant_prevalence,
            benign_prevalence=args.benign_prevalence,
            both_prevalence=args.both_prevalence,
            seed=args.seed,
        )
    except ValueError as exc:
        parser.error(str(exc))
    corpus = generate_corpus(config)
    corpus_mod.save_corpus(corpus, args.output)
    if args.truth:
        with open(args.truth, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("exam_id", "side", "malignant"))
            for exam_id, side in corpus_mod.breast_keys(corpus):
                writer.writerow((exam_id, side.value,
                                 corpus_mod.breast_ground_truth(corpus.exam(exam_id), side)))
    s = corpus_mod.summarize(corpus)
    logger.info("wrote %d exams, %d images to %s", s.n_exams, s.n_images, args.output)


def cmd_simulate(args, parser):
    try:
        config = SynthConfig(
            mu_pos=args.mu_pos,
            mu_neg=args.mu_neg,
            sigma=args.sigma,
            boxes_per_view=args.boxes_per_view,
            min_boxes_per_view=args.min_boxes_per_view,
            shared_view_latent=args.shared_view_latent,
            seed=args.seed,
            model_id=args.model_id,
        )
    except ValueError as exc:
        parser.error(str(exc))
    corpus = _load_corpus(args.corpus, args.strict)
    dets = simulate_detections(corpus, config)
    write_detections(dets, args.output)
    logger.info("wrote %d detections to %s", len(dets), args.output)


def cmd_infer(args, parser):
    _check_distinct(parser, corpus=args.corpus, detections=args.detections, output=args.output)
    config = InferenceConfig(args.score_threshold, args.nms_iou, args.aggregation)
    corpus = _load_corpus(args.corpus, args.strict)
    dets = read_detections(args.detections)
    model_id = args.model_id
    if model_id is None:
        model_id = dets[0].model_id if dets else ""
    preds = predict_breasts(corpus, dets, config, model_id)
    write_predictions(preds, args.output)
    logger.info("wrote %d breast predictions to %s", len(preds), args.output)


def _auc_of(corpus, path):
    items = labeled_scores(corpus, read_predictions(path))
    return items, auc(items)


def cmd_evaluate(args, parser):
    _check_distinct(parser, metrics=args.metrics, roc=args.roc)
    corpus = _load_corpus(args.corpus, args.strict)
    preds = read_predictions(args.predictions)
    items = labeled_scores(corpus, preds)
    value = auc(items)
    run_aucs = [value] + [_auc_of(corpus, p)[1] for p in args.seed_run]
    runs = run_statistics(run_aucs)
    n_pos = sum(it.label for it in items)
    model_id = args.model_id if args.model_id is not None else (preds[0].model_id if preds else "")
    write_metrics(metrics_dict(model_id, value, n_pos, len(items) - n_pos, runs), args.metrics)
    write_roc_csv(roc_curve(items), args.roc)
    line = f"AUC {value:.6f} (n_pos={n_pos}, n_neg={len(items) - n_pos})"
    if runs.n_runs > 1:
        line += f"; over {runs.n_runs} runs {runs.mean:.4f} +/- {runs.std:.4f}"
    print(line)


def cmd_ensemble(args, parser):
    if args.output in args.predictions:
        parser.error("output must differ from every input")
    preds = ensemble_predictions([read_predictions(p) for p in args.predictions], args.model_id)
    write_predictions(preds, args.output)


def cmd_report(args, parser):
    labels = args.label or [Path(p).stem for p in args.roc]
    if len(labels) != len(args.roc):
        parser.error("give one --label per ROC file, or none")
    curves = [read_roc_csv(p) for p in args.roc]
    Path(args.output).write_text(roc_svg(curves, labels), encoding="utf-8")
    table = format_summary(summary_rows(curves, labels, args.baseline_auc), args.baseline_auc)
    if args.summary:
        Path(args.summary).write_text(table, encoding="utf-8")
    sys.stdout.write(table)


def cmd_sample(args, parser):
    config = SamplerConfig(args.biopsy_ratio, args.seed, args.exact_quota, args.exam_uniform)
    corpus = _load_corpus(args.corpus, args.strict)
    ids = sample_batch(corpus, args.n, config)
    text = "".join(f"{i}\n" for i in ids)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --- parser -----------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="mammodet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func, subparser=p)
        return p

    def corpus_arg(p):
        p.add_argument("--corpus", required=True, help="corpus.jsonl")
        p.add_argument("--strict", action="store_true", help="reject unknown fields in the corpus")

    p = add("gen-corpus", cmd_gen_corpus, "generate a synthetic corpus.jsonl")
    p.add_argument("--n-exams", type=_int_at_least(0), default=100)
    p.add_argument("--malignant-prevalence", type=_float_in(0, 1, low_open=True), default=0.05)
    p.add_argument("--benign-prevalence", type=_float_in(0, 1, high_open=True), default=0.1)
    p.add_argument("--both-prevalence", type=probability, default=0.0)
    p.add_argument("--seed", type=seed_type, default=0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--truth", help="also write per-breast malignancy labels as CSV")

    p = add("simulate", cmd_simulate, "simulate detector output for a corpus")
    corpus_arg(p)
    p.add_argument("--mu-pos", type=real, default=2.0)
    p.add_argument("--mu-neg", type=real, default=0.0)
    p.add_argument("--sigma", type=_float_in(0, math.inf, low_open=True, high_open=True), default=1.0)
    p.add_argument("--boxes-per-view", type=_float_in(0, math.inf, high_open=True), default=1.0,
                   help="Poisson mean of extra boxes per view")
    p.add_argument("--min-boxes-per-view", type=_int_at_least(0), default=0)
    p.add_argument("--shared-view-latent", action="store_true")
    p.add_argument("--seed", type=seed_type, default=0)
    p.add_argument("--model-id", default="synthetic")
    p.add_argument("-o", "--output", required=True)

    p = add("infer", cmd_infer, "aggregate detections into breast predictions")
    corpus_arg(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--score-threshold", type=probability, default=0.001)
    p.add_argument("--nms-iou", type=probability, default=0.1)
    p.add_argument("--aggregation", choices=[a.value for a in Aggregation],
                   default=Aggregation.MAX_BOX_MEAN_VIEW.value)
    p.add_argument("--model-id", help="defaults to the detections' model_id")
    p.add_argument("-o", "--output", required=True)

    p = add("evaluate", cmd_evaluate, "AUC and ROC of breast predictions")
    corpus_arg(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--seed-run", action="append", default=[],
                   help="predictions of another seed of the same setup, for mean/std")
    p.add_argument("--model-id")
    p.add_argument("--metrics", default="metrics.json")
    p.add_argument("--roc", default="roc.csv")

    p = add("ensemble", cmd_ensemble, "average breast predictions across runs")
    p.add_argument("predictions", nargs="+")
    p.add_argument("--model-id", default="ensemble")
    p.add_argument("-o", "--output", required=True)

    p = add("report", cmd_report, "overlay ROC curves as SVG with an AUC table")
    p.add_argument("roc", nargs="+")
    p.add_argument("--label", action="append")
    p.add_argument("--baseline-auc", type=_float_in(0, 1, high_open=True))
    p.add_argument("-o", "--output", required=True, help="SVG path")
    p.add_argument("--summary", help="also write the table to this path")

    p = add("sample", cmd_sample, "draw training image ids by biopsy ratio")
    corpus_arg(p)
    p.add_argument("-n", type=_int_at_least(1), required=True)
    p.add_argument("--biopsy-ratio", type=probability, default=0.5)
    p.add_argument("--seed", type=seed_type, default=0)
    p.add_argument("--exact-quota", action="store_true")
    p.add_argument("--exam-uniform", action="store_true")
    p.add_argument("-o", "--output")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, args.subparser)
    except (CommandError, UndefinedAucError, ValueError, OSError) as exc:
        print(f"mammodet {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
