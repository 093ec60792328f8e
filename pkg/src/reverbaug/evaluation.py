"""Frame-level detection measures, ROC/AUC and paired condition comparisons."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import EvaluationError

MEASURES = ("accuracy", "precision", "recall", "f1", "auc")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for k in ("tp", "fp", "tn", "fn"):
            v = getattr(self, k)
            if int(v) != v or v < 0:
                raise ValueError(f"{k} must be a non-negative integer, got {v}")
            object.__setattr__(self, k, int(v))

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    threshold: float
    counts: ConfusionCounts
    dataset_id: str = ""

    def to_dict(self):
        d = asdict(self)
        d["counts"] = asdict(self.counts)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["counts"] = ConfusionCounts(**d["counts"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Points ``(fa, det)`` from (0, 0) to (1, 1); ``thresholds[i]`` produced point ``i``."""

    fa: np.ndarray
    det: np.ndarray
    thresholds: np.ndarray
    auc: float


def _check(scores, truth):
    s = np.asarray(scores, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=bool).ravel()
    if s.shape != t.shape:
        raise ValueError(f"scores ({s.size}) and truth ({t.size}) differ in length")
    return s, t


def confusion(scores, truth, threshold=0.5):
    """Counts with decision ``score >= threshold``."""
    if not np.isfinite(threshold):
        raise ValueError("threshold must be finite")
    s, t = _check(scores, truth)
    d = s >= threshold
    tp = int(np.count_nonzero(d & t))
    fp = int(np.count_nonzero(d & ~t))
    fn = int(np.count_nonzero(~d & t))
    return ConfusionCounts(tp, fp, s.size - tp - fp - fn, fn)


def metrics(counts, threshold=0.5, dataset_id=""):
    """Accuracy, precision, recall and F1 from confusion counts.

    Zero denominators give 0 (precision when nothing is flagged, F1 when both
    precision and recall are 0, recall when there are no positives).
    """
    tp, fp, tn, fn = counts.tp, counts.fp, counts.tn, counts.fn
    total = counts.total
    if total == 0:
        raise EvaluationError("no frames to evaluate")
    acc = (tp + tn) / total
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return MetricReport(acc, prec, rec, f1, float(threshold), counts, dataset_id)


def trapezoid_auc(fa, det):
    fa = np.asarray(fa, dtype=np.float64)
    det = np.asarray(det, dtype=np.float64)
    return float(np.sum(np.diff(fa) * (det[1:] + det[:-1]) * 0.5))


def roc_and_auc(scores, truth):
    """ROC over every distinct score plus the (0, 0) sentinel at ``+inf``.

    Tied scores move together, so ties contribute a diagonal segment.
    """
    s, t = _check(scores, truth)
    n_pos = int(np.count_nonzero(t))
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("ROC needs both speech and non-speech frames")
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]  # end of each tie group
    tp = np.cumsum(t)[last]
    fp = (last + 1) - tp
    fa = np.r_[0.0, fp / n_neg]
    det = np.r_[0.0, tp / n_pos]
    thr = np.r_[np.inf, s[last]]
    return RocCurve(fa, det, thr, trapezoid_auc(fa, det))


def evaluate(scores, truth, threshold=0.5, dataset_id=""):
    """``(MetricReport, RocCurve)`` for one scored dataset."""
    report = metrics(confusion(scores, truth, threshold), threshold, dataset_id)
    return report, roc_and_auc(scores, truth)


@dataclass(frozen=True)
class Comparison:
    dataset_id: str
    condition_a: str
    condition_b: str
    values_a: dict
    values_b: dict
    delta: dict
    relative: dict
    consistent: bool

    def to_dict(self):
        return asdict(self)


def _values(report, roc):
    d = {k: getattr(report, k) for k in ("accuracy", "precision", "recall", "f1")}
    d["auc"] = roc.auc
    return d


def compare_conditions(a, b, name_a="anechoic", name_b="augmented"):
    """Deltas ``b - a`` per measure; ``a`` and ``b`` are ``(MetricReport, RocCurve)`` pairs.

    ``consistent`` records whether the AUC and accuracy deltas agree in sign.
    """
    (ra, ca), (rb, cb) = a, b
    if ra.dataset_id != rb.dataset_id:
        raise EvaluationError(f"reports are on different datasets "
                              f"({ra.dataset_id!r} vs {rb.dataset_id!r})")
    va, vb = _values(ra, ca), _values(rb, cb)
    delta = {k: vb[k] - va[k] for k in MEASURES}
    rel = {k: (delta[k] / va[k] if va[k] else float("nan")) for k in MEASURES}
    consistent = bool(np.sign(delta["auc"]) == np.sign(delta["accuracy"]))
    return Comparison(ra.dataset_id, name_a, name_b, va, vb, delta, rel, consistent)


def write_roc_csv(roc, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "false_alarm_rate", "detection_rate"])
        for t, f, d in zip(roc.thresholds, roc.fa, roc.det):
            w.writerow([repr(float(t)), repr(float(f)), repr(float(d))])


def write_report_csv(rows, path):
    """``rows``: dicts sharing keys; written in the given order."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
