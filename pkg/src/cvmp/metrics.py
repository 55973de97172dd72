"""Classification and estimation metrics for activation maps."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .exceptions import DataError

REPORT_FIELDS = ("accuracy", "precision", "recall", "f1", "auc",
                 "beta1_slope", "gamma1_slope", "runtime_seconds")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self):
        return (self.tp + self.tn) / self.total

    @property
    def precision_defined(self):
        return self.tp + self.fp > 0

    @property
    def recall_defined(self):
        return self.tp + self.fn > 0

    @property
    def precision(self):
        """Fraction of declared-active voxels that are active (0 if none)."""
        return self.tp / (self.tp + self.fp) if self.precision_defined else 0.0

    @property
    def recall(self):
        return self.tp / (self.tp + self.fn) if self.recall_defined else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _indicators(values, name):
    values = np.asarray(values).ravel()
    if not np.all((values == 0) | (values == 1)):
        raise DataError("{} must contain only 0/1 indicators".format(name))
    return values.astype(bool)


def confusion(true_map, predicted):
    """Confusion counts with "active" as the positive class."""
    t = _indicators(true_map, "true_map")
    p = _indicators(predicted, "predicted")
    if t.shape != p.shape:
        raise DataError("length mismatch: {} vs {}".format(t.size, p.size))
    return ConfusionCounts(tp=int(np.sum(t & p)), fp=int(np.sum(~t & p)),
                           tn=int(np.sum(~t & ~p)), fn=int(np.sum(t & ~p)))


def auc(true_map, scores):
    """ROC area as the Mann-Whitney statistic, ties counted one half."""
    t = _indicators(true_map, "true_map")
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.shape != t.shape:
        raise DataError("length mismatch: {} vs {}".format(t.size,
                                                           scores.size))
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC undefined: truth has a single class")
    ranks = rankdata(scores)
    u = ranks[t].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def slope(true_values, estimates, mask=None):
    """OLS slope (with intercept) of ``estimates`` on ``true_values``."""
    x = np.asarray(true_values, dtype=float).ravel()
    y = np.asarray(estimates, dtype=float).ravel()
    if x.shape != y.shape:
        raise DataError("length mismatch: {} vs {}".format(x.size, y.size))
    if mask is not None:
        keep = np.asarray(mask, dtype=bool).ravel()
        x, y = x[keep], y[keep]
    xc = x - x.mean() if x.size else x
    sxx = float(xc @ xc)
    if x.size < 2 or sxx <= 0:
        raise DataError("slope undefined: true values have zero variance")
    return float(xc @ (y - y.mean()) / sxx)


@dataclass
class MetricsReport:
    """One row of a results table. Absent metrics are ``None``."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float = None
    beta1_slope: float = None
    gamma1_slope: float = None
    runtime_seconds: float = None
    counts: ConfusionCounts = None
    flags: tuple = field(default=())

    def as_dict(self):
        return {k: getattr(self, k) for k in REPORT_FIELDS}


def classification_report(true_map, predicted, scores=None):
    counts = confusion(true_map, predicted)
    flags = []
    if not counts.precision_defined:
        flags.append("precision-undefined")
    if not counts.recall_defined:
        flags.append("recall-undefined")
    value = None
    if scores is not None:
        try:
            value = auc(true_map, scores)
        except DataError:
            flags.append("auc-undefined")
    return MetricsReport(counts.accuracy, counts.precision, counts.recall,
                         counts.f1, auc=value, counts=counts,
                         flags=tuple(flags))


def _maybe_slope(truth, estimate, mask):
    if estimate is None:
        return None
    try:
        return slope(truth, estimate, mask)
    except DataError:
        return None


def evaluate(summary, truth, slope_voxels="all"):
    """Score a fitted summary against truth maps.

    Predictions are the model's combined activation map and scores the
    larger indicator probability, both compared with the union of the true
    magnitude and phase maps. Slopes use every voxel (``"all"``) or only
    truly active ones (``"active"``); a slope whose truth map is constant
    is left out.
    """
    # local import keeps metrics free of the sampler stack
    from .baselines import derived_estimates

    if slope_voxels not in ("all", "active"):
        raise DataError("slope_voxels must be 'all' or 'active'")
    report = classification_report(truth.active_any, summary.active_any,
                                   summary.score)
    beta1_hat, gamma1_hat = derived_estimates(summary)
    mag_mask = truth.active_mag == 1 if slope_voxels == "active" else None
    ph_mask = truth.active_phase == 1 if slope_voxels == "active" else None
    report.beta1_slope = _maybe_slope(truth.beta1_true, beta1_hat, mag_mask)
    report.gamma1_slope = _maybe_slope(truth.gamma1_true, gamma1_hat,
                                       ph_mask)
    report.runtime_seconds = summary.runtime_seconds
    return report


@dataclass
class AggregateStat:
    mean: float
    min: float
    max: float
    sd: float
    count: int

    def format(self, digits=4):
        return "{0:.{d}f} ({1:.{d}f}, {2:.{d}f}, {3:.{d}f})".format(
            self.mean, self.min, self.max, self.sd, d=digits)


def aggregate(reports):
    """Per-metric mean, min, max and sample sd over reports.

    Metrics that are absent in some reports are summarised over the
    reports that have them; ``count`` records how many.
    """
    reports = list(reports)
    if not reports:
        raise DataError("nothing to aggregate")
    out = {}
    for name in REPORT_FIELDS:
        values = [getattr(r, name) for r in reports]
        values = np.array([v for v in values if v is not None
                           and not (isinstance(v, float) and math.isnan(v))],
                          dtype=float)
        if values.size == 0:
            out[name] = None
            continue
        sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
        out[name] = AggregateStat(float(values.mean()), float(values.min()),
                                  float(values.max()), sd, int(values.size))
    return out


__all__ = ["ConfusionCounts", "MetricsReport", "AggregateStat", "confusion",
           "auc", "slope", "classification_report", "evaluate", "aggregate",
           "REPORT_FIELDS"]
