"""Outlier filtering, splitting, classification metrics and rank tests."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .netdata import LabeledDataset


def zscore_filter(X, threshold: float = 3.0) -> np.ndarray:
    """Indices of rows whose every |z| is below ``threshold``.

    z uses the column mean and population standard deviation over all rows;
    a zero-variance column contributes z = 0.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    sd = X.std(axis=0)
    z = np.zeros_like(X)
    nz = sd > 0
    z[:, nz] = (X[:, nz] - X[:, nz].mean(axis=0)) / sd[nz]
    return np.nonzero(np.all(np.abs(z) < threshold, axis=1))[0]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def train_test_split(
    dataset: LabeledDataset,
    train_fraction: float = 0.7,
    seed: int = 0,
    stratify: bool = True,
) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded split, stratified by label.

    Rows are put in subject-id order before shuffling, so the partition does
    not depend on input order.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    ids = dataset.subject_ids
    train_idx: list[int] = []
    test_idx: list[int] = []
    groups = (
        [[i for i in range(len(dataset)) if dataset.y[i] == c] for c in (0, 1)]
        if stratify
        else [list(range(len(dataset)))]
    )
    for rows in groups:
        if not rows:
            continue
        if len(rows) < 2:
            raise ValueError(f"stratum of size {len(rows)} cannot be split")
        rows = sorted(rows, key=lambda i: ids[i])
        perm = [rows[i] for i in rng.permutation(len(rows))]
        n_train = min(max(_round_half_up(train_fraction * len(rows)), 1), len(rows) - 1)
        train_idx += perm[:n_train]
        test_idx += perm[n_train:]
    key = lambda i: ids[i]  # noqa: E731
    return dataset.subset(sorted(train_idx, key=key)), dataset.subset(sorted(test_idx, key=key))


@dataclass
class MetricsReport:
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    specificity: float
    roc: list[tuple[float, float, float]] = field(default_factory=list)  # (threshold, fpr, tpr)
    auc: float | None = None
    undefined: list[str] = field(default_factory=list)

    @property
    def roc_points(self) -> list[tuple[float, float]]:
        return [(f, t) for _, f, t in self.roc]

    def to_dict(self) -> dict:
        return {
            "confusion": {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn},
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "specificity": self.specificity,
            "auc": self.auc,
            "undefined": list(self.undefined),
            "support": {"positive": self.tp + self.fn, "negative": self.tn + self.fp},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def roc_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for t, f, r in self.roc:
            w.writerow([repr(float(t)), repr(float(f)), repr(float(r))])
        return buf.getvalue()


def roc_curve(y_true, scores) -> list[tuple[float, float, float]]:
    """ROC points sweeping the threshold down through the unique scores.

    A sample is called positive when its score is >= the threshold. The
    first point (threshold +inf) is (0, 0), the last is (1, 1).
    """
    y = np.asarray(y_true).astype(int)
    s = np.asarray(scores, dtype=float)
    pos = max(int(y.sum()), 1)
    neg = max(int((1 - y).sum()), 1)
    points = [(math.inf, 0.0, 0.0)]
    for t in np.unique(s)[::-1]:
        called = s >= t
        points.append((float(t), float(np.sum(called & (y == 0)) / neg), float(np.sum(called & (y == 1)) / pos)))
    return points


def auc_trapezoid(points: Sequence[tuple[float, float]]) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2
    return area


def _ratio(num: int, den: int, name: str, undefined: list[str]) -> float:
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def compute_metrics(y_true, y_pred, scores=None) -> MetricsReport:
    y_true = np.asarray(y_true).astype(int).reshape(-1)
    y_pred = np.asarray(y_pred).astype(int).reshape(-1)
    if y_true.size == 0:
        raise ValueError("empty input")
    if y_true.size != y_pred.size:
        raise ValueError("y_true and y_pred lengths differ")
    for arr in (y_true, y_pred):
        if not np.all(np.isin(arr, (0, 1))):
            raise ValueError("labels must be binary 0/1")
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    undefined: list[str] = []
    accuracy = (tp + tn) / (tp + tn + fp + fn)
    precision = _ratio(tp, tp + fp, "precision", undefined)
    recall = _ratio(tp, tp + fn, "recall", undefined)
    specificity = _ratio(tn, tn + fp, "specificity", undefined)
    f1 = _ratio(2 * tp, 2 * tp + fp + fn, "f1", undefined)
    roc, auc = [], None
    if scores is not None:
        scores = np.asarray(scores, dtype=float).reshape(-1)
        if scores.size != y_true.size:
            raise ValueError("scores length differs from labels")
        roc = roc_curve(y_true, scores)
        if 0 < y_true.sum() < y_true.size:
            auc = auc_trapezoid([(f, t) for _, f, t in roc])
        else:
            undefined.append("auc")
    return MetricsReport(tp, tn, fp, fn, accuracy, precision, recall, f1, specificity, roc, auc, undefined)


# -- Mann-Whitney U ---------------------------------------------------------


@dataclass(frozen=True)
class UTestResult:
    U: float
    p_value: float
    n_x: int
    n_y: int
    U_x: float
    U_y: float
    method: str


def pair_count_u(xs, ys) -> float:
    """#{x > y} + 0.5 #{x == y} over all pairs."""
    x = np.asarray(xs, dtype=float)[:, None]
    y = np.asarray(ys, dtype=float)[None, :]
    return float(np.sum(x > y) + 0.5 * np.sum(x == y))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sorted_v = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _exact_two_sided(ranks2: np.ndarray, n_x: int, stat2: int) -> float:
    """P(|2 U_x - n_x n_y| >= |stat2 - n_x n_y|) over all label assignments.

    ``ranks2`` are doubled midranks (integers) of the pooled sample and
    ``stat2`` is the observed doubled U_x. Counts subsets by dynamic
    programming over (size, doubled rank sum).
    """
    N = ranks2.size
    n_y = N - n_x
    table: list[dict[int, int]] = [dict() for _ in range(n_x + 1)]
    table[0][0] = 1
    for r in ranks2.astype(int):
        for size in range(min(n_x, N) - 1, -1, -1):
            for s, c in table[size].items():
                dst = table[size + 1]
                dst[s + r] = dst.get(s + r, 0) + c
    base2 = n_x * (n_x + 1)  # doubled n_x(n_x+1)/2
    center2 = n_x * n_y
    obs = abs(stat2 - center2)
    hits = sum(c for s, c in table[n_x].items() if abs((s - base2) - center2) >= obs)
    return hits / math.comb(N, n_x)


def mann_whitney_u(xs, ys, method: str = "auto", exact_max: int = 8) -> UTestResult:
    """Two-sided Mann-Whitney U test.

    ``U_x`` counts pairs with x > y (ties count one half) and ``U`` is
    ``min(U_x, U_y)``. ``method="auto"`` enumerates the exact permutation
    distribution when both groups have at most ``exact_max`` values and
    otherwise uses the normal approximation with tie and continuity
    corrections.
    """
    x = np.asarray(xs, dtype=float).reshape(-1)
    y = np.asarray(ys, dtype=float).reshape(-1)
    if x.size == 0 or y.size == 0:
        raise ValueError("both groups must be nonempty")
    n_x, n_y = x.size, y.size
    pooled = np.concatenate([x, y])
    ranks = _midranks(pooled)
    u_x = float(ranks[:n_x].sum() - n_x * (n_x + 1) / 2)
    u_y = n_x * n_y - u_x
    if method == "auto":
        method = "exact" if n_x <= exact_max and n_y <= exact_max else "asymptotic"
    if method == "exact":
        ranks2 = np.rint(2 * ranks).astype(int)
        p = _exact_two_sided(ranks2, n_x, int(round(2 * u_x)))
    elif method == "asymptotic":
        p = _normal_p(u_x, n_x, n_y, pooled)
    else:
        raise ValueError(f"unknown method {method!r}")
    return UTestResult(min(u_x, u_y), float(min(p, 1.0)), n_x, n_y, u_x, u_y, method)


def _normal_p(u_x: float, n_x: int, n_y: int, pooled: np.ndarray) -> float:
    N = n_x + n_y
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (N * (N - 1))
    var = n_x * n_y / 12 * ((N + 1) - tie_term)
    if var <= 0:
        return 1.0
    mu = n_x * n_y / 2
    dev = max(abs(u_x - mu) - 0.5, 0.0)
    z = dev / math.sqrt(var)
    return math.erfc(z / math.sqrt(2))


@dataclass(frozen=True)
class RoiResult:
    name: str
    loading: float
    U: float
    p_value: float


def rank_rois(
    loadings: Mapping[str, float],
    psp_values: Mapping[str, Sequence[float]],
    hc_values: Mapping[str, Sequence[float]],
    alpha: float = 0.05,
    method: str = "auto",
) -> list[RoiResult]:
    """ROIs whose PSP and HC values differ at p < alpha, by |loading| descending."""
    missing = (set(loadings) - set(psp_values)) | (set(loadings) - set(hc_values))
    if missing:
        raise KeyError(f"missing ROI data for {sorted(missing)}")
    hits = []
    for name, loading in loadings.items():
        res = mann_whitney_u(psp_values[name], hc_values[name], method=method)
        if res.p_value < alpha:
            hits.append(RoiResult(name, float(loading), res.U, res.p_value))
    hits.sort(key=lambda r: -abs(r.loading))
    return hits


def rois_csv(results: Sequence[RoiResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["roi", "loading", "U", "p_value"])
    for r in results:
        w.writerow([r.name, repr(r.loading), repr(r.U), repr(r.p_value)])
    return buf.getvalue()
