"""Readers and writers for every on-disk format waekit uses.

* prediction CSV: header ``sample_id,label,score``; label 1 = PNEUMONIA
* FTB1 feature tensors: ``b"FTB1"``, uint32 LE n, h, w, c, float32 LE
  values in (n, h, w, c) order, then n label bytes
* binary PGM (P5) / PPM (P6) with maxval 255
* report JSON, ROC CSV (``fpr,tpr,threshold``), weights JSON, head JSON
"""
from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .core import Label, PredictionRecord, PredictionSet
from .errors import DomainError, FormatError, ParseError
from .head import FeatureBatch, HeadModel
from .metrics import ClassificationReport, RocCurve, as_percent

CSV_HEADER = ["sample_id", "label", "score"]
FTB_MAGIC = b"FTB1"
_FTB_DIMS = struct.Struct("<4I")


# -- prediction CSV ---------------------------------------------------------

def read_prediction_csv(path, model_name: str | None = None) -> PredictionSet:
    path = Path(path)
    name = model_name or path.stem
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file, expected header sample_id,label,score", path, 1)
    if [h.strip() for h in rows[0]] != CSV_HEADER:
        raise ParseError(f"bad header {rows[0]!r}, expected {','.join(CSV_HEADER)}", path, 1)

    records, seen = [], set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 columns, got {len(row)}", path, lineno)
        sid, label, score = (x.strip() for x in row)
        if not sid:
            raise ParseError("empty sample_id", path, lineno)
        if sid in seen:
            raise ParseError(f"duplicate sample_id {sid!r}", path, lineno)
        if label not in ("0", "1"):
            raise ParseError(f"invalid label {label!r}, expected 0 or 1", path, lineno)
        try:
            value = float(score)
        except ValueError:
            raise ParseError(f"non-numeric score {score!r}", path, lineno) from None
        if not (0.0 <= value <= 1.0):
            raise ParseError(f"score {score!r} outside [0, 1]", path, lineno)
        seen.add(sid)
        records.append(PredictionRecord(sid, Label(int(label)), value))
    if not records:
        raise ParseError("no prediction rows", path, len(rows))
    return PredictionSet(name, tuple(records))


def write_prediction_csv(path, pset: PredictionSet):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in pset.records:
            w.writerow([r.sample_id, int(r.true_label), repr(float(r.score))])


# -- FTB1 feature tensors ---------------------------------------------------

def write_ftb(path, batch: FeatureBatch):
    n, h, w, c = batch.values.shape
    with open(path, "wb") as fh:
        fh.write(FTB_MAGIC)
        fh.write(_FTB_DIMS.pack(n, h, w, c))
        fh.write(batch.values.astype("<f4").tobytes(order="C"))
        fh.write(batch.labels.astype(np.uint8).tobytes())


def read_ftb(path) -> FeatureBatch:
    data = Path(path).read_bytes()
    head = len(FTB_MAGIC) + _FTB_DIMS.size
    if len(data) < head:
        raise FormatError(f"truncated header ({len(data)} bytes)", path)
    if data[:4] != FTB_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {FTB_MAGIC!r}", path)
    n, h, w, c = _FTB_DIMS.unpack_from(data, 4)
    count = n * h * w * c
    expected = head + 4 * count + n
    if len(data) != expected:
        raise FormatError(f"file is {len(data)} bytes, header implies {expected}", path)
    if min(n, h, w, c) == 0:
        raise FormatError("zero dimension in header", path)
    values = np.frombuffer(data, dtype="<f4", count=count, offset=head).reshape(n, h, w, c)
    labels = np.frombuffer(data, dtype=np.uint8, count=n, offset=head + 4 * count)
    bad = np.flatnonzero(labels > 1)
    if bad.size:
        raise FormatError(f"label byte {labels[bad[0]]} at sample {bad[0]} is not 0 or 1", path)
    try:
        return FeatureBatch(values.astype(np.float64), labels.astype(np.int8))
    except DomainError as e:
        raise FormatError(str(e), path) from None


# -- PGM / PPM --------------------------------------------------------------

def _pnm_tokens(data: bytes, count: int):
    """First ``count`` header tokens and the offset of the raster."""
    tokens, i = [], 0
    while len(tokens) < count:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise FormatError("truncated header")
        tokens.append(data[start:i])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, i + 1


def read_pnm(path) -> np.ndarray:
    """Binary PGM/PPM as a uint8 array of shape (h, w, 1) or (h, w, 3)."""
    data = Path(path).read_bytes()
    try:
        tokens, offset = _pnm_tokens(data, 4)
    except FormatError as e:
        raise FormatError(str(e), path) from None
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported magic {magic!r}; only P5 and P6 are read", path)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("non-integer header field", path) from None
    if maxval != 255:
        raise FormatError(f"maxval {maxval} unsupported, expected 255", path)
    channels = 1 if magic == b"P5" else 3
    size = width * height * channels
    raster = data[offset : offset + size]
    if len(raster) != size or width < 1 or height < 1:
        raise FormatError(f"raster holds {len(raster)} bytes, expected {size}", path)
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels).copy()


def write_pnm(path, img):
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.dtype != np.uint8:
        raise DomainError("write_pnm expects uint8 pixels")
    h, w, c = img.shape
    if c not in (1, 3):
        raise DomainError("write_pnm expects 1 or 3 channels")
    magic = "P5" if c == 1 else "P6"
    with open(path, "wb") as fh:
        fh.write(f"{magic} {w} {h} 255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


# -- reports ----------------------------------------------------------------

def _class_dict(m):
    return {"precision": m.precision, "recall": m.recall, "f1": m.f1, "support": m.support}


def report_to_dict(report: ClassificationReport, *, model_names=(), weights=None,
                   threshold: float = 0.5) -> dict:
    c = report.counts
    pos, neg = report.per_class[Label.PNEUMONIA], report.per_class[Label.NORMAL]
    wavg = report.weighted

    def pct(m):
        return {"precision": as_percent(m.precision), "recall": as_percent(m.recall),
                "f1": as_percent(m.f1)}

    return {
        "tool": "waekit",
        "version": __version__,
        "model_names": list(model_names),
        "weights": None if weights is None else [float(x) for x in weights],
        "threshold": float(threshold),
        "n_samples": c.total,
        "confusion": {"tp": c.tp, "fn": c.fn, "fp": c.fp, "tn": c.tn},
        "accuracy": report.accuracy,
        "weighted": {"precision": wavg.precision, "recall": wavg.recall, "f1": wavg.f1},
        "per_class": {"PNEUMONIA": _class_dict(pos), "NORMAL": _class_dict(neg)},
        "auc": report.auc,
        "percent": {
            "accuracy": as_percent(report.accuracy),
            "weighted": pct(wavg),
            "PNEUMONIA": pct(pos),
            "NORMAL": pct(neg),
        },
    }


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, path, e.lineno) from None


def format_table(doc: dict) -> str:
    """Human-readable two-decimal summary of a report document."""
    p = doc["percent"]
    names = ", ".join(doc["model_names"]) or "-"
    lines = [f"models: {names}"]
    if doc.get("weights") is not None:
        lines.append("weights: " + ", ".join(f"{w:g}" for w in doc["weights"]))
    lines.append(f"accuracy: {p['accuracy']:.2f}%")
    lines.append(f"{'':12}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>9}")
    for cls in ("PNEUMONIA", "NORMAL"):
        r = p[cls]
        lines.append(f"{cls:12}{r['precision']:>10.2f}{r['recall']:>10.2f}{r['f1']:>10.2f}"
                     f"{doc['per_class'][cls]['support']:>9d}")
    r = p["weighted"]
    lines.append(f"{'weighted':12}{r['precision']:>10.2f}{r['recall']:>10.2f}{r['f1']:>10.2f}"
                 f"{doc['n_samples']:>9d}")
    if doc.get("auc") is not None:
        lines.append(f"auc: {doc['auc']:.4f}")
    return "\n".join(lines)


def write_roc_csv(path, curve: RocCurve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr", "threshold"])
        for f, t, th in curve.points:
            w.writerow([repr(f), repr(t), "inf" if math.isinf(th) else repr(th)])


def read_roc_csv(path) -> RocCurve:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["fpr", "tpr", "threshold"]:
        raise ParseError("expected header fpr,tpr,threshold", path, 1)
    try:
        arr = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=np.float64)
    except ValueError as e:
        raise ParseError(str(e), path) from None
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ParseError("expected three numeric columns", path)
    return RocCurve(arr[:, 0], arr[:, 1], arr[:, 2])


# -- weights and models -----------------------------------------------------

def write_weights(path, model_names, weights, step):
    write_json(path, {"model_names": list(model_names), "weights": [float(w) for w in weights],
                      "step": float(step)})


def read_weights(path):
    doc = read_json(path)
    try:
        return list(doc["model_names"]), [float(w) for w in doc["weights"]], doc.get("step")
    except (KeyError, TypeError, ValueError):
        raise ParseError("weights file needs model_names and weights", path) from None


def save_head(path, model: HeadModel):
    write_json(path, model.to_dict())


def load_head(path) -> HeadModel:
    try:
        return HeadModel.from_dict(read_json(path))
    except (KeyError, TypeError) as e:
        raise ParseError(f"malformed head model: {e}", path) from None
    except DomainError as e:
        raise ParseError(str(e), path) from None
