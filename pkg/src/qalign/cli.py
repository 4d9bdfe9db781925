"""``qalign`` command-line entry point."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .align import write_mappings
from .bench import BenchReport, compare_reports, measure_latency, size_mb
from .encoder import Corpus, TokenizerConfig, collect_calibration, encode_corpus, iter_layer_inputs
from .errors import QalignError
from .fileio import atomic_write_text
from .metrics import (
    classification_metrics,
    edrm,
    load_edrm_records,
    load_ranked_queries,
    load_value_pairs,
    mean_average_precision,
    spearman_rho,
)
from .model import DYNAMIC, STATIC, EncoderModel, generate_model, quantize_model
from .pipeline import PipelineEvaluator, align_corpora
from .quant import SmoothingConfig, load_calibration, save_calibration
from .search import Constraints, SearchSpace, run_search

log = logging.getLogger("qalign")


def _common(p: argparse.ArgumentParser, encode: bool = True) -> None:
    p.add_argument("--seed", type=int, default=42, help="seed for every random choice (default 42)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    if encode:
        p.add_argument("--batch-size", type=int, default=10)
        p.add_argument("--max-length", type=int, default=512)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qalign", description="Quantized embedding alignment toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("gen-model", help="write a seeded floating-point encoder")
    _common(p, encode=False)
    p.add_argument("--vocab-size", type=int, default=4096)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--outlier-channels", type=int, default=2)
    p.add_argument("--outlier-scale", type=float, default=6.0)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("calibrate", help="collect per-channel activation maxima")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True, action="append", help="TSV corpus; repeatable")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("quantize", help="convert an FP model to smoothed W8A8")
    _common(p, encode=False)
    p.add_argument("--model", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--act-policy", choices=(STATIC, DYNAMIC), default=STATIC)
    p.add_argument("--per-tensor-weights", action="store_true")
    p.add_argument("--keep-fp-embedding", action="store_true")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("align", help="map each left record to its most similar right record")
    _common(p)
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--no-rescale", action="store_true", help="probability = (score + 1) / 2 instead of min-max")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("eval", help="score predictions against gold data")
    _common(p, encode=False)
    p.add_argument("metric", choices=("edrm", "map", "spearman", "cls"))
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--scale-min", type=float, default=0.0)
    p.add_argument("--scale-max", type=float, default=5.0)

    p = sub.add_parser("debug-activations", help="dump per-token per-channel |activation| for one batch")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--threshold", type=float, default=2.5, help="flag channels whose max exceeds this")
    p.add_argument("--quantized", help="quantized model to overlay in the figure")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("bench", help="time corpus encoding and write a report")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--label")
    p.add_argument("--energy-kwh", type=float, default=0.0)
    p.add_argument("--repetitions", type=int, default=30)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--baseline", help="earlier report to compare against")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("search", help="search quantization settings under quality/latency gates")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--calibration", help="calibration corpus (default: left + right)")
    p.add_argument("--alphas", type=lambda s: [float(a) for a in s.split(",")], default=None)
    p.add_argument("--budget", type=int, help="evaluate a seeded random subset of this many configs")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--max-degradation", type=float, default=0.0001)
    p.add_argument("--min-latency-improvement", type=float, default=0.20)
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("-o", "--output", required=True)
    return parser


def _tokenizer(args, model: EncoderModel) -> TokenizerConfig:
    return TokenizerConfig(max_length=args.max_length, vocab_size=model.vocab_size, seed=args.seed)


def cmd_gen_model(args) -> int:
    model = generate_model(args.vocab_size, args.dim, args.layers, args.seed, args.outlier_channels, args.outlier_scale)
    n = model.save(args.output)
    print(f"wrote {args.output} ({n} bytes)")
    return 0


def cmd_calibrate(args) -> int:
    model = EncoderModel.load(args.model)
    texts = [t for path in args.corpus for t in Corpus.read(path).texts]
    stats = collect_calibration(model, texts, _tokenizer(args, model), args.batch_size)
    save_calibration(args.output, stats)
    print(f"wrote {args.output} ({len(stats)} layers, {len(texts)} texts)")
    return 0


def cmd_quantize(args) -> int:
    model = EncoderModel.load(args.model)
    q = quantize_model(
        model,
        SmoothingConfig(args.alpha),
        load_calibration(args.stats),
        act_policy=args.act_policy,
        quantize_embedding=not args.keep_fp_embedding,
        per_tensor_weights=args.per_tensor_weights,
    )
    n_fp, n_q = len(model.to_bytes()), q.save(args.output)
    print(f"wrote {args.output} ({n_q} bytes, {n_q / n_fp:.3f} of FP)")
    return 0


def cmd_align(args) -> int:
    model = EncoderModel.load(args.model)
    left, right = Corpus.read(args.left), Corpus.read(args.right)
    maps = align_corpora(model, left, right, _tokenizer(args, model), args.batch_size, rescale=not args.no_rescale)
    write_mappings(args.output, maps, left.ids, right.ids)
    print(f"wrote {args.output} ({len(maps)} mappings)")
    return 0


def cmd_eval(args) -> int:
    if args.metric == "edrm":
        print(f"{edrm(load_edrm_records(args.pred, args.gold, args.scale_min, args.scale_max)):.4f}")
    elif args.metric == "map":
        print(f"{mean_average_precision(load_ranked_queries(args.pred, args.gold)):.4f}")
    elif args.metric == "spearman":
        res = spearman_rho(*load_value_pairs(args.pred, args.gold))
        print(f"rho\t{res.rho:.4f}\np_value\t{res.pvalue:.4e}")
    else:
        pred, gold = load_value_pairs(args.pred, args.gold)
        rep = classification_metrics(pred, gold)
        for name in ("accuracy", "precision", "recall", "f1"):
            print(f"{name}\t{getattr(rep, name):.4f}")
        if rep.precision_degenerate or rep.recall_degenerate:
            print("warning: zero denominator in precision or recall, reported as 0", file=sys.stderr)
    return 0


def cmd_debug_activations(args) -> int:
    model = EncoderModel.load(args.model)
    if not 0 <= args.layer < len(model.layers):
        raise QalignError(f"layer {args.layer} out of range; model has {len(model.layers)} layers")
    cfg = _tokenizer(args, model)
    name = model.layer_name(args.layer)
    corpus = Corpus.read(args.corpus)
    _, capture = next(iter_layer_inputs(model, corpus, cfg, args.batch_size))
    acts = np.abs(capture[name])  # (B, L, H)
    b, l, h = acts.shape
    flat = acts.reshape(b * l, h)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["token", "channel", "abs_value"])
    tok, ch = np.divmod(np.arange(flat.size), h)
    w.writerows(zip(tok.tolist(), ch.tolist(), (f"{v:.6g}" for v in flat.ravel().tolist())))
    atomic_write_text(args.output, buf.getvalue())

    peaks = flat.max(axis=0)
    flagged = np.flatnonzero(peaks > args.threshold)
    print(f"wrote {args.output} ({flat.size} rows: {b}x{l}x{h})")
    print("flagged channels: " + (", ".join(f"{c} ({peaks[c]:.3f})" for c in flagged) or "none"))
    if not args.no_plot:
        from .plotting import figure_path, plot_activation_magnitudes

        q_flat = None
        if args.quantized:
            qm = EncoderModel.load(args.quantized)
            _, qcap = next(iter_layer_inputs(qm, corpus, cfg, args.batch_size))
            q_flat = np.abs(qcap[name]).reshape(b * l, h)
        fig = plot_activation_magnitudes(flat, figure_path(args.output), f"{name} input", args.threshold, q_flat)
        print(f"wrote {fig}")
    return 0


def cmd_bench(args) -> int:
    model = EncoderModel.load(args.model)
    corpus = Corpus.read(args.corpus)
    cfg = _tokenizer(args, model)
    lat = measure_latency(lambda: encode_corpus(model, corpus, cfg, args.batch_size, workers=1), args.repetitions, args.warmup)
    label = args.label or ("w8a8" if model.quantized else "fp32")
    report = BenchReport(label, lat, size_mb(len(model.to_bytes())), args.energy_kwh)
    report.save(args.output)
    print(f"wrote {args.output}: avg {lat.avg_ms:.4f} ms (cv {lat.cv:.3f}), size {report.size_mb:.4f} MB")
    if args.baseline:
        base = BenchReport.load(args.baseline)
        tr = compare_reports(base, report)
        print(f"speedup\t{tr.speedup:.4f}\nsize_reduction\t{tr.size_reduction:.4f}\nenergy_reduction\t{tr.energy_reduction:.4f}")
        if not args.no_plot:
            from .plotting import figure_path, plot_tradeoff

            print(f"wrote {plot_tradeoff(base, report, tr, figure_path(args.output))}")
    return 0


def cmd_search(args) -> int:
    model = EncoderModel.load(args.model)
    left, right = Corpus.read(args.left), Corpus.read(args.right)
    calib = Corpus.read(args.calibration) if args.calibration else Corpus.from_texts(left.texts + right.texts)
    evaluator = PipelineEvaluator(
        model, left, right, _tokenizer(args, model), calib, args.batch_size, args.repetitions, warmup=1
    )
    space = SearchSpace.grid(args.alphas) if args.alphas else SearchSpace.grid()
    constraints = Constraints(args.max_degradation, args.min_latency_improvement)
    outcome = run_search(space, evaluator.baseline(), evaluator, constraints, args.budget, args.seed)
    outcome.save(args.output)
    print(f"wrote {args.output} ({len(outcome.trials)} trials, {len(outcome.frontier)} on the frontier)")
    if outcome.selected is not None:
        s = outcome.selected
        print(f"selected {s.key}: quality {s.quality:.4f}, latency {s.latency_ms:.3f} ms")
    else:
        print("no configuration satisfies both constraints")
        for gate, miss in outcome.nearest_miss.items():
            print(f"  nearest miss on {gate}: {miss['key']}")
    if not args.no_plot:
        from .plotting import figure_path, plot_pareto

        print(f"wrote {plot_pareto(outcome, figure_path(args.output))}")
    return 0


COMMANDS = {
    "gen-model": cmd_gen_model,
    "calibrate": cmd_calibrate,
    "quantize": cmd_quantize,
    "align": cmd_align,
    "eval": cmd_eval,
    "debug-activations": cmd_debug_activations,
    "bench": cmd_bench,
    "search": cmd_search,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (QalignError, OSError, ValueError, KeyError) as exc:
        log.debug("command failed", exc_info=True)
        print(f"qalign: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
