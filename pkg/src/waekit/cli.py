"""``waekit`` command line: augment, synth, train-head, predict, evaluate,
ensemble-search and ensemble-apply.

Exit status is 0 on success, 1 on domain or parse errors and 2 on usage
errors.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import ensemble, formats, head, imageprep, synth
from .core import PredictionSet, align
from .errors import WaeError
from .metrics import evaluate_scores, roc_curve

log = logging.getLogger("waekit")

PNM_SUFFIXES = (".pgm", ".ppm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _report_doc(report, names, weights, threshold):
    return formats.report_to_dict(report, model_names=names, weights=weights, threshold=threshold)


def cmd_augment(args):
    cfg = imageprep.AugmentConfig()
    if args.config:
        cfg = imageprep.AugmentConfig.from_dict(formats.read_json(args.config))
    src = sorted(p for p in Path(args.in_dir).iterdir() if p.suffix.lower() in PNM_SUFFIXES)
    if not src:
        raise WaeError(f"no .pgm/.ppm images in {args.in_dir}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = [imageprep.preprocess(formats.read_pnm(p), (args.size, args.size)) for p in src]
    variants = imageprep.augment_batch(images, cfg, args.seed, args.count)
    for i, p in enumerate(src):
        for k in range(args.count):
            img = variants[i * args.count + k]
            formats.write_pnm(out / f"{p.stem}_aug{k:03d}{p.suffix.lower()}", imageprep.to_uint8(img))
    log.info("wrote %d images to %s", len(variants), out)


def cmd_synth(args):
    prefix = args.out_prefix
    if args.preset == "paper-like":
        sets = synth.reference_fixture(seed=args.seed)
        feats = synth.gen_features(512, 16, 4, 4, separation=4.0, n_pos=370, seed=args.seed)
    else:
        misses = [float(x) for x in args.miss_rates.split(",")]
        alarms = [float(x) for x in args.false_alarm_rates.split(",")]
        if len(misses) != len(alarms):
            raise WaeError("--miss-rates and --false-alarm-rates need the same number of models")
        spec = synth.SynthSpec(
            n=args.n, n_pos=args.n_pos,
            profiles=tuple(synth.ErrorProfile(m, a) for m, a in zip(misses, alarms)),
            error_correlation=args.correlation, score_margin=args.margin, seed=args.seed,
        )
        sets = synth.gen_predictions(spec)
        feats = None
        if args.features:
            feats = synth.gen_features(args.n, args.channels, 4, 4, separation=args.separation,
                                       n_pos=args.n_pos, seed=args.seed)
    for s in sets:
        formats.write_prediction_csv(f"{prefix}_{s.model_name}.csv", s)
    if feats is not None:
        formats.write_ftb(f"{prefix}_features.ftb", feats)


def cmd_train_head(args):
    overrides = formats.read_json(args.config) if args.config else {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = head.TrainConfig.from_dict(overrides)
    batch = formats.read_ftb(args.features)
    model, history = head.train(batch, cfg)
    formats.save_head(args.out, model)
    if args.history:
        with open(args.history, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss", "val_accuracy", "learning_rate"])
            for r in history.records:
                w.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss),
                            repr(r.val_accuracy), repr(r.learning_rate)])
    log.info("best epoch %s of %s", history.best_epoch, history.stopped_epoch)


def cmd_predict(args):
    model = formats.load_head(args.model)
    batch = formats.read_ftb(args.features)
    probs = head.predict_proba(model, batch)
    ids = synth.sample_ids(len(batch))
    name = args.name or Path(args.out).stem
    formats.write_prediction_csv(args.out, PredictionSet.from_arrays(name, ids, batch.labels, probs))


def cmd_evaluate(args):
    pset = formats.read_prediction_csv(args.preds)
    report = evaluate_scores(pset.labels, pset.scores, args.threshold)
    doc = _report_doc(report, [pset.model_name], None, args.threshold)
    if args.report:
        formats.write_json(args.report, doc)
    if args.roc:
        formats.write_roc_csv(args.roc, roc_curve(pset.scores, pset.labels))
    print(formats.format_table(doc))


def _load_aligned(paths):
    return align([formats.read_prediction_csv(p) for p in paths])


def cmd_ensemble_search(args):
    aligned = _load_aligned(args.preds)
    result = ensemble.search(aligned, args.step, args.threshold, workers=args.workers)
    weights = result.best_weights.weights
    if args.out:
        formats.write_weights(args.out, aligned.model_names, weights, args.step)
    doc = _report_doc(result.best_report, aligned.model_names, weights, args.threshold)
    doc["search"] = {
        "step": args.step,
        "grid_size": result.grid_size,
        "per_model_accuracy": dict(zip(aligned.model_names, result.per_model_accuracy)),
        # the grid is scored on the same samples it is chosen on
        "note": "weights optimised on the evaluated samples; accuracy is optimistic",
    }
    if args.report:
        formats.write_json(args.report, doc)
    print(formats.format_table(doc))


def _parse_weights(text, n_models):
    p = Path(text)
    if p.suffix == ".json" and p.exists():
        _, raw, _ = formats.read_weights(p)
    else:
        try:
            raw = [float(x) for x in text.split(",")]
        except ValueError:
            raise WaeError(f"--weights must be a comma list of numbers, got {text!r}") from None
    if len(raw) != n_models:
        raise WaeError(f"{len(raw)} weights given for {n_models} prediction files")
    return ensemble.WeightVector.normalized(raw)


def cmd_ensemble_apply(args):
    aligned = _load_aligned(args.preds)
    w = _parse_weights(args.weights, aligned.n_models)
    scores, report = ensemble.apply(aligned, w, args.threshold)
    if args.out:
        name = args.name or Path(args.out).stem
        formats.write_prediction_csv(
            args.out, PredictionSet.from_arrays(name, aligned.sample_ids, aligned.true_labels, scores)
        )
    doc = _report_doc(report, aligned.model_names, w.weights, args.threshold)
    if args.report:
        formats.write_json(args.report, doc)
    print(formats.format_table(doc))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="waekit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("augment", help="augment PGM/PPM images at a fixed size")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--size", type=int, default=imageprep.TARGET_SIZE[0])
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("synth", help="write synthetic prediction CSVs and feature tensors")
    p.add_argument("--preset", choices=["paper-like", "custom"], default="paper-like")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--n", type=int, default=synth.REF_N)
    p.add_argument("--n-pos", type=int, default=synth.REF_N_POS)
    p.add_argument("--miss-rates", default="0.03,0.04")
    p.add_argument("--false-alarm-rates", default="0.03,0.04")
    p.add_argument("--correlation", type=float, default=0.5)
    p.add_argument("--margin", type=float, default=0.45)
    p.add_argument("--features", action="store_true", help="custom preset: also write an FTB file")
    p.add_argument("--channels", type=int, default=16)
    p.add_argument("--separation", type=float, default=4.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-head", help="train the classification head on FTB features")
    p.add_argument("--features", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train_head)

    p = sub.add_parser("predict", help="score FTB features with a trained head")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--name")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="classification report and ROC for one prediction CSV")
    p.add_argument("--preds", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--report")
    p.add_argument("--roc")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ensemble-search", help="grid-search ensemble weights")
    p.add_argument("--preds", action="append", required=True)
    p.add_argument("--step", type=float, default=ensemble.DEFAULT_STEP)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_ensemble_search)

    p = sub.add_parser("ensemble-apply", help="combine prediction CSVs with fixed weights")
    p.add_argument("--preds", action="append", required=True)
    p.add_argument("--weights", required=True, help="comma list, e.g. 0.45,0.55, or a weights JSON")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--name")
    p.add_argument("--report")
    p.set_defaults(func=cmd_ensemble_apply)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 2
    except SystemExit as e:  # --help
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (WaeError, OSError) as e:
        print(f"waekit {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
