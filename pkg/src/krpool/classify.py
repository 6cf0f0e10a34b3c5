"""One-vs-rest kernel ridge classification over precomputed Grams."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import FormatError, IoError, NumericalError, ParamError, ShapeError
from .seqdata import atomic_write

MODEL_MAGIC = b"KRPM"
MODEL_VERSION = 1
REG_GRID = (1e-4, 1e-3, 1e-2, 1e-1)


@dataclass(frozen=True, eq=False)
class GramModel:
    dual_coeffs: np.ndarray  # m x C
    reg: float
    train_refs: tuple = ()
    label_names: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.dual_coeffs.shape[0]

    @property
    def class_count(self):
        return self.dual_coeffs.shape[1]


def _values(G):
    return np.asarray(getattr(G, "values", G), dtype=np.float64)


def one_vs_rest_targets(labels, class_count):
    labels = np.asarray(labels, dtype=int)
    Y = -np.ones((labels.shape[0], class_count))
    Y[np.arange(labels.shape[0]), labels] = 1.0
    return Y


def train(G, labels, reg, class_count=None, train_refs=(), label_names=(), meta=None):
    """Solve ``(G + reg I) alpha_c = y_c`` for every class c, y_c in {-1, +1}."""
    Gv = _values(G)
    labels = np.asarray(labels, dtype=int)
    m = Gv.shape[0]
    if Gv.shape != (m, m) or labels.shape != (m,):
        raise ShapeError(f"Gram {Gv.shape} does not match {labels.shape[0]} labels")
    if not reg > 0:
        raise ParamError("ridge parameter must be positive")
    if class_count is None:
        class_count = int(labels.max()) + 1
    Y = one_vs_rest_targets(labels, class_count)
    try:
        cf = cho_factor(Gv + reg * np.eye(m), lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("G + reg*I is not positive definite; raise reg") from exc
    alpha = cho_solve(cf, Y)
    return GramModel(alpha, float(reg), tuple(train_refs), tuple(label_names), dict(meta or {}))


def scores(model, rows):
    """Score matrix for kernel rows (one row per query, aligned with training)."""
    R = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if R.shape[1] != model.m:
        raise ShapeError(f"kernel rows have {R.shape[1]} columns, model has {model.m}")
    return R @ model.dual_coeffs


def predict(model, kernel_row):
    """(label, per-class scores); ties go to the smallest class index."""
    row = np.asarray(kernel_row, dtype=np.float64)
    if row.shape != (model.m,):
        raise ShapeError(f"kernel row has shape {row.shape}, model has {model.m}")
    s = row @ model.dual_coeffs
    return int(np.argmax(s)), s


def predict_many(model, rows):
    S = scores(model, rows)
    return np.argmax(S, axis=1), S


def accuracy(predictions, truth):
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if predictions.shape != truth.shape:
        raise ShapeError("predictions and truth differ in length")
    if truth.size == 0:
        return 0.0
    return float(np.mean(predictions == truth))


def average_precision(class_scores, positives):
    """Mean precision at the rank of each positive (stable descending sort)."""
    order = np.argsort(-np.asarray(class_scores, dtype=np.float64), kind="stable")
    hits = np.asarray(positives, dtype=bool)[order]
    if not hits.any():
        return float("nan")
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, ranks.size + 1) / ranks))


def mean_average_precision(score_matrix, truth):
    S = np.atleast_2d(np.asarray(score_matrix, dtype=np.float64))
    truth = np.asarray(truth, dtype=int)
    if S.shape[0] != truth.shape[0]:
        raise ShapeError("score rows and truth differ in length")
    aps = [average_precision(S[:, c], truth == c) for c in range(S.shape[1])]
    aps = [a for a in aps if not np.isnan(a)]
    return float(np.mean(aps)) if aps else 0.0


def evaluate(predictions, truth, metric="accuracy"):
    """``accuracy`` takes predicted labels; ``mAP`` takes the score matrix."""
    if metric == "accuracy":
        return accuracy(predictions, truth)
    if metric == "mAP":
        return mean_average_precision(predictions, truth)
    raise ParamError(f"unknown metric {metric!r}")


def cross_validate_reg(G, labels, grid=REG_GRID, folds=5, class_count=None):
    """Pick the ridge parameter by stratified-by-position k-fold accuracy."""
    Gv = _values(G)
    labels = np.asarray(labels, dtype=int)
    m = labels.shape[0]
    folds = max(2, min(folds, m))
    fold_of = np.arange(m) % folds
    best = (-1.0, grid[0])
    for reg in grid:
        correct = 0
        for f in range(folds):
            tr, te = fold_of != f, fold_of == f
            if len(np.unique(labels[tr])) < 2:
                continue
            model = train(Gv[np.ix_(tr, tr)], labels[tr], reg, class_count)
            pred, _ = predict_many(model, Gv[np.ix_(te, tr)])
            correct += int(np.sum(pred == labels[te]))
        acc = correct / m
        if acc > best[0]:
            best = (acc, reg)
    return best[1]


# ------------------------------------------------------------ serialization


def model_bytes(model):
    meta = {
        "reg": model.reg,
        "train_refs": list(model.train_refs),
        "label_names": list(model.label_names),
        "meta": model.meta,
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    m, C = model.dual_coeffs.shape
    return (
        MODEL_MAGIC
        + struct.pack("<III", MODEL_VERSION, len(blob), 0)
        + blob
        + struct.pack("<II", m, C)
        + np.ascontiguousarray(model.dual_coeffs, dtype="<f8").tobytes()
    )


def model_from_bytes(buf, name="<bytes>"):
    if buf[:4] != MODEL_MAGIC:
        raise FormatError(f"{name}: not a model file (bad magic)")
    try:
        version, nblob, _ = struct.unpack_from("<III", buf, 4)
        if version != MODEL_VERSION:
            raise FormatError(f"{name}: unsupported model version {version}")
        off = 16
        meta = json.loads(buf[off : off + nblob].decode("utf-8"))
        off += nblob
        m, C = struct.unpack_from("<II", buf, off)
        off += 8
        raw = buf[off : off + 8 * m * C]
        if len(raw) != 8 * m * C:
            raise FormatError(f"{name}: truncated model")
        alpha = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(m, C)
    except (struct.error, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{name}: corrupt model file") from exc
    return GramModel(
        alpha, meta["reg"], tuple(meta["train_refs"]), tuple(meta["label_names"]), meta["meta"]
    )


def save_model(model, path):
    atomic_write(path, model_bytes(model))


def load_model(path):
    path = Path(path)
    try:
        buf = path.read_bytes()
    except FileNotFoundError as exc:
        raise IoError(f"no such model file: {path}") from exc
    return model_from_bytes(buf, str(path))
