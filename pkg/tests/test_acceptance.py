"""Acceptance suite: one PASS/FAIL line per criterion, then a hard assert.

Run with ``pytest -v tests/test_acceptance.py``; the verdict lines show
even when output capture is on.
"""
import json
import math
import time

import numpy as np
import pytest

from conftest import decisions_from_counts
from test_ensemble import aligned_from, brute_force_search
from test_head import adversarial_fixture, max_gradient_error
from test_imageprep import checker_pattern, reference_warp
from test_metrics import pairwise_auc
from waekit import ensemble, head, synth
from waekit.cli import run
from waekit.core import Label, align
from waekit.imageprep import AugmentConfig, AugmentParams, apply_augment, augment_batch, sample_params
from waekit.metrics import ConfusionCounts, as_percent, auc, classification_report, report_from_counts, roc_curve

# rounded to two decimals: accuracy, weighted P/R/F1, then P/R/F1 per class
TARGETS = {
    "WAE": dict(counts=(417, 6, 2, 161), accuracy=98.63, weighted=(98.66, 98.63, 98.64),
                pneumonia=(99.52, 98.58, 99.05), normal=(96.41, 98.77, 97.58)),
    "MobileNetV2": dict(counts=(413, 10, 7, 156), accuracy=97.10, weighted=(97.12, 97.10, 97.11),
                        pneumonia=(98.33, 97.64, 97.98), normal=(93.98, 95.71, 94.83)),
    "NASNetMobile": dict(counts=(410, 13, 9, 154), accuracy=96.25, weighted=None,
                         pneumonia=(97.85, 96.93, 97.39), normal=(92.22, 94.48, 93.33)),
}
NASNET_WEIGHTED_RECOMPUTED = (96.28, 96.25, 96.26)
NASNET_NORMAL_ROW = (92.22, 94.48, 93.33)


class Verdict:
    def __init__(self, capsys, number, title):
        self.capsys, self.number, self.title = capsys, number, title
        self.failures = []
        self.start = time.perf_counter()

    def check(self, ok, what):
        if not ok:
            self.failures.append(what)

    def elapsed(self):
        return time.perf_counter() - self.start

    def finish(self):
        status = "PASS" if not self.failures else "FAIL"
        detail = "" if not self.failures else "  <- " + "; ".join(self.failures)
        with self.capsys.disabled():
            print(f"\ncriterion {self.number} [{status}] {self.title} ({self.elapsed():.2f}s){detail}")
        assert not self.failures, self.failures


def percents(report):
    pos, neg = report.per_class[Label.PNEUMONIA], report.per_class[Label.NORMAL]
    return dict(
        accuracy=as_percent(report.accuracy),
        weighted=tuple(as_percent(v) for v in report.weighted),
        pneumonia=tuple(as_percent(v) for v in pos[:3]),
        normal=tuple(as_percent(v) for v in neg[:3]),
    )


def test_criterion_1_table_reproduction(capsys):
    v = Verdict(capsys, 1, "classification reports from the target confusion matrices")
    for name, row in TARGETS.items():
        truth, pred = decisions_from_counts(*row["counts"])
        got = percents(classification_report(truth, pred))
        for key in ("accuracy", "weighted", "pneumonia", "normal"):
            if row[key] is not None:
                v.check(got[key] == row[key], f"{name} {key}: {got[key]} != {row[key]}")
    v.check(v.elapsed() < 1.0, f"runtime {v.elapsed():.2f}s >= 1s")
    v.finish()


def test_criterion_2_nasnet_weighted_row(capsys):
    v = Verdict(capsys, 2, "NASNetMobile weighted row recomputed from its confusion matrix")
    truth, pred = decisions_from_counts(410, 13, 9, 154)
    got = percents(classification_report(truth, pred))
    v.check(got["weighted"] == NASNET_WEIGHTED_RECOMPUTED, f"weighted {got['weighted']}")
    # the reference weighted row repeats the NORMAL class row, which recomputation cannot give
    v.check(got["normal"] == NASNET_NORMAL_ROW, f"normal row {got['normal']}")
    v.check(got["weighted"] != NASNET_NORMAL_ROW, "weighted row collapsed onto the NORMAL row")
    v.finish()


def test_criterion_3_grid_contract(capsys):
    v = Verdict(capsys, 3, "weight grid and search against brute force")
    grid = ensemble.enumerate_weight_grid(2, 0.005)
    v.check(len(grid) == 201, f"grid has {len(grid)} vectors")
    v.check(all(abs(math.fsum(w.weights) - 1) <= 1e-9 and min(w.weights) >= 0 for w in grid),
            "a grid vector leaves the simplex")

    rng = np.random.default_rng(2024)
    n_sets = mismatches = 0
    for _ in range(60):
        n = int(rng.integers(5, 201))
        labels = rng.integers(0, 2, n)
        scores = np.round(rng.random((n, 2)), 3)
        al = aligned_from(scores, labels)
        res = ensemble.search(al, 0.01)
        w, acc = brute_force_search(scores.tolist(), labels.tolist(), 0.01, 0.5)
        n_sets += 1
        mismatches += (res.best_weights.weights != w) or (res.best_accuracy != acc)
        v.check(res.best_accuracy >= max(res.per_model_accuracy), "search below best single model")
    v.check(n_sets >= 50 and mismatches == 0, f"{mismatches} of {n_sets} sets disagree with brute force")

    al = align(synth.reference_fixture(0))
    one = ensemble.search(al, 0.005, workers=1, chunk_size=16)
    eight = ensemble.search(al, 0.005, workers=8, chunk_size=16)
    v.check(one.best_weights == eight.best_weights and one.best_accuracy == eight.best_accuracy
            and one.best_report == eight.best_report, "1 vs 8 workers differ")
    v.finish()


def test_criterion_4_reference_fixture(capsys, tmp_path):
    v = Verdict(capsys, 4, "constructed score pair reproduces the target ensemble decisions")
    sets = synth.reference_fixture(0)
    al = align(sets)
    single = [np.sum((al.scores[:, j] >= 0.5) == (al.true_labels == 1)) for j in range(2)]
    v.check(single == [569, 564], f"single-model correct counts {single}")

    paths = []
    from waekit import formats

    for s in sets:
        p = tmp_path / f"{s.model_name}.csv"
        formats.write_prediction_csv(p, s)
        paths += ["--preds", str(p)]
    rep = tmp_path / "apply.json"
    v.check(run(["ensemble-apply", *paths, "--weights", "0.45,0.55", "--report", str(rep)]) == 0,
            "ensemble-apply failed")
    doc = json.loads(rep.read_text())
    c = doc["confusion"]
    v.check((c["tp"], c["fn"], c["fp"], c["tn"]) == (417, 6, 2, 161), f"confusion {c}")
    v.check(doc["accuracy"] == 578 / 586 and doc["percent"]["accuracy"] == 98.63, f"accuracy {doc['accuracy']}")

    res = ensemble.search(al)
    v.check(res.best_accuracy >= 578 / 586, f"search best {res.best_accuracy}")
    v.check(v.elapsed() < 1.0, f"runtime {v.elapsed():.2f}s >= 1s")
    v.finish()


def test_criterion_5_gradient_check(capsys):
    v = Verdict(capsys, 5, "analytic head gradients against central differences")
    errors = max_gradient_error()
    worst = max(errors, key=errors.get)
    v.check(errors[worst] <= 1e-4, f"{worst} relative error {errors[worst]:.2e}")
    v.check(set(errors) == set(head.PARAM_NAMES), "not every parameter was checked")
    v.check(v.elapsed() < 10.0, f"runtime {v.elapsed():.2f}s >= 10s")
    v.finish()


def test_criterion_6_training_behavior(capsys):
    v = Verdict(capsys, 6, "training loop and its callbacks")
    fb = synth.gen_features(n=512, c=16, separation=4.0, seed=0)
    t0 = time.perf_counter()
    model, hist = head.train(fb, head.TrainConfig(seed=0))
    best_acc = max(hist.column("val_accuracy"))
    v.check(len(hist) <= 20 and best_acc >= 0.95, f"val accuracy {best_acc} in {len(hist)} epochs")
    v.check(time.perf_counter() - t0 < 60, "separable training took a minute or more")

    train_set, val = adversarial_fixture()
    cfg = head.TrainConfig(seed=0)
    model, hist = head.train(train_set, cfg, val=val)
    v.check(hist.stopped_epoch == len(hist) == 1 + cfg.es_patience, f"stopped after {len(hist)} epochs")
    losses = hist.column("val_loss")
    v.check(abs(head.evaluate(model, val)[0] - min(losses)) <= 1e-12, "returned model is not the best checkpoint")
    v.check(hist.best_epoch == int(np.argmin(losses)) + 1, "best_epoch does not point at the minimum")

    floor_cfg = head.TrainConfig(seed=0, epochs=12, es_patience=20, lr_patience=1, min_delta=1.0)
    _, hist = head.train(train_set, floor_cfg, val=val)
    lrs = hist.column("learning_rate")
    v.check(all(b <= a for a, b in zip(lrs, lrs[1:])), f"LR increased: {lrs}")
    v.check(min(lrs) == 1e-6 and lrs[-1] == 1e-6, f"LR floor not reached or crossed: {lrs}")
    v.finish()


def test_criterion_7_augmentation(capsys):
    v = Verdict(capsys, 7, "augmentation against the reference warp")
    rng = np.random.default_rng(7)
    img = rng.random((16, 12, 3))
    out = augment_batch([img], AugmentConfig.identity(), seed=0, count_per_image=1)[0]
    v.check(np.array_equal(out, img), "identity config changed pixels")

    pattern = checker_pattern()
    p = AugmentParams(angle_deg=5.0)
    err = float(np.max(np.abs(apply_augment(pattern, p) - reference_warp(pattern, p))))
    v.check(err <= 1e-6, f"5 degree rotation differs from reference by {err:.2e}")

    imgs = [rng.random((20, 24, 1)), rng.random((18, 18, 3))]
    a = augment_batch(imgs, AugmentConfig(), seed=11, count_per_image=5)
    b = augment_batch(imgs, AugmentConfig(), seed=11, count_per_image=5)
    v.check(all(x.shape == imgs[i // 5].shape for i, x in enumerate(a)), "augmented shape changed")
    v.check(all(x.min() >= 0 and x.max() <= 1 for x in a), "augmented value outside [0, 1]")
    v.check(all(x.tobytes() == y.tobytes() for x, y in zip(a, b)), "same seed gave different bytes")

    cfg = AugmentConfig()
    draw_rng = np.random.default_rng(99)
    h, w = 224, 224
    inside = 0
    for _ in range(10_000):
        d = sample_params(cfg, draw_rng, (h, w))
        inside += (abs(d.angle_deg) <= 5 and abs(d.dx) <= 0.05 * w and abs(d.dy) <= 0.05 * h
                   and abs(d.shear) <= 0.05 and 0.95 <= d.zoom <= 1.05 and 0.9 <= d.brightness <= 1.1)
    v.check(inside == 10_000, f"{10_000 - inside} draws outside the configured intervals")
    v.finish()


def test_criterion_8_metric_properties(capsys):
    v = Verdict(capsys, 8, "metric identities and AUC anchors")
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(1000):
        t = rng.integers(0, 500, 4)
        if t.sum() == 0:
            t[0] = 1
        r = report_from_counts(ConfusionCounts(*t))
        worst = max(worst, abs(r.weighted.recall - r.accuracy))
    v.check(worst <= 1e-12, f"weighted recall off accuracy by {worst:.2e}")

    for _ in range(100):
        n = int(rng.integers(4, 60))
        y = np.r_[0, 1, rng.integers(0, 2, n - 2)]
        s = np.round(rng.random(n), 2)
        base = auc(roc_curve(s, y))
        for f in (np.exp, lambda x: x**3, lambda x: np.log1p(5 * x)):
            v.check(abs(auc(roc_curve(f(s), y)) - base) <= 1e-12, "AUC changed under a monotone map")
        v.check(abs(base - pairwise_auc(s, y)) <= 1e-12, "AUC disagrees with the pairwise count")

    v.check(auc(roc_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])) == 1.0, "perfect AUC")
    v.check(auc(roc_curve([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0])) == 0.0, "anti-perfect AUC")
    v.check(auc(roc_curve([0.5] * 4, [1, 0, 1, 0])) == 0.5, "tied AUC")

    scores = [0.9] * 419 + [0.1] * 167
    labels = [1] * 417 + [0] * 2 + [1] * 6 + [0] * 161
    two_level = auc(roc_curve(scores, labels))
    v.check(abs(two_level - 0.98678) <= 1e-5, f"two-level AUC {two_level:.6f}")
    v.check(abs(two_level - 0.9977) > 1e-3, "two-level AUC should stay clear of the 0.9977 reference value")
    v.finish()
