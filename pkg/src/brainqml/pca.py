"""Principal component analysis on centrality features."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np


def jacobi_eigh(S: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with eigenvectors in columns, unsorted.
    """
    a = np.array(S, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1)) if theta != 0 else 1.0
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                # rotate rows/columns p and q
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    return vec if vec[np.argmax(np.abs(vec))] >= 0 else -vec


@dataclass(frozen=True)
class PcaModel:
    """Fitted PCA.

    ``components`` holds the retained k principal axes as rows; each row's
    largest-magnitude entry is positive. ``spectrum`` keeps all d covariance
    eigenvalues so explained-variance ratios cover the full space.
    """

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    spectrum: np.ndarray
    feature_names: tuple[str, ...]

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]

    @property
    def explained_ratio_all(self) -> np.ndarray:
        total = self.spectrum.sum()
        return self.spectrum / total if total > 0 else np.zeros_like(self.spectrum)

    @property
    def explained_ratio(self) -> np.ndarray:
        return self.explained_ratio_all[: self.k]


def pca_fit(data, k: int, feature_names: Sequence[str] = ()) -> PcaModel:
    X = np.atleast_2d(np.asarray(data, dtype=float))
    m, d = X.shape
    if m < 2:
        raise ValueError("PCA needs at least 2 rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("data has non-finite entries")
    if not 1 <= k <= min(m - 1, d):
        raise ValueError(f"k must lie in [1, {min(m - 1, d)}], got {k}")
    names = tuple(feature_names) or tuple(f"f{i}" for i in range(d))
    if len(names) != d:
        raise ValueError("feature_names length does not match columns")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (m - 1)
    vals, vecs = jacobi_eigh(cov)
    order = np.argsort(-vals, kind="stable")
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    comps = np.array([_fix_sign(vecs[:, i]) for i in range(k)])
    return PcaModel(mean, comps, vals[:k].copy(), vals, names)


def pca_transform(model: PcaModel, data) -> np.ndarray:
    X = np.atleast_2d(np.asarray(data, dtype=float))
    if X.shape[1] != model.d:
        raise ValueError(f"data has {X.shape[1]} columns, model expects {model.d}")
    return (X - model.mean) @ model.components.T


def pca_inverse_transform(model: PcaModel, scores) -> np.ndarray:
    return np.atleast_2d(scores) @ model.components + model.mean


@dataclass(frozen=True)
class ExplainedVarianceReport:
    ratio: np.ndarray
    cumulative: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["component", "ratio", "cumulative"])
        for i, (r, c) in enumerate(zip(self.ratio, self.cumulative), 1):
            w.writerow([i, repr(float(r)), repr(float(c))])
        return buf.getvalue()


def explained_variance_report(model: PcaModel, n: int | None = None) -> ExplainedVarianceReport:
    """Per-component and cumulative explained-variance ratios (all d by default)."""
    ratio = model.explained_ratio_all[: (n or model.d)]
    return ExplainedVarianceReport(ratio, np.minimum(np.cumsum(ratio), 1.0))


def n_components_for(model: PcaModel, threshold: float) -> int:
    """Smallest count whose cumulative explained variance reaches ``threshold``."""
    cum = np.cumsum(model.explained_ratio_all)
    return int(min(np.searchsorted(cum, threshold - 1e-12) + 1, model.d))


def loadings(model: PcaModel, component_index: int) -> list[tuple[str, float]]:
    """Named loadings of one component, largest magnitude first."""
    if not 0 <= component_index < model.k:
        raise IndexError(f"component {component_index} not in [0, {model.k})")
    row = model.components[component_index]
    order = np.argsort(-np.abs(row), kind="stable")
    return [(model.feature_names[i], float(row[i])) for i in order]


def loadings_csv(pairs: Sequence[tuple[str, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "loading"])
    for name, value in pairs:
        w.writerow([name, repr(float(value))])
    return buf.getvalue()


def factorial_plane(model: PcaModel, i: int, j: int) -> list[tuple[str, float, float]]:
    """Each feature's loadings on components i and j."""
    if i == j:
        raise ValueError("plane needs two distinct components")
    for idx in (i, j):
        if not 0 <= idx < model.k:
            raise IndexError(f"component {idx} not in [0, {model.k})")
    ci, cj = model.components[i], model.components[j]
    return [(name, float(a), float(b)) for name, a, b in zip(model.feature_names, ci, cj)]
