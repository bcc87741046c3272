"""Fidelity quantum kernels, classical kernels and an SMO-style SVM dual solver."""
from __future__ import annotations

import csv
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import numpy as np

from .circuits import FeatureMapSpec, fidelity_circuit, zz_feature_map
from .qsim import NoiseModel, run_exact, sample_outcomes


@dataclass(frozen=True)
class KernelMatrix:
    values: np.ndarray
    row_ids: tuple[str, ...] = ()
    col_ids: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "row_ids", tuple(self.row_ids) or tuple(str(i) for i in range(v.shape[0])))
        object.__setattr__(self, "col_ids", tuple(self.col_ids) or tuple(str(j) for j in range(v.shape[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", *self.col_ids])
        for rid, row in zip(self.row_ids, self.values):
            w.writerow([rid, *(repr(float(v)) for v in row)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "KernelMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        cols = tuple(rows[0][1:])
        ids = tuple(r[0] for r in rows[1:])
        vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(vals, ids, cols)


def _check_dims(A, fmap: FeatureMapSpec) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[1] != fmap.n_qubits:
        raise ValueError(f"data has {A.shape[1]} features, feature map expects {fmap.n_qubits}")
    return A


def feature_states(A, fmap: FeatureMapSpec, threads: int | None = None) -> np.ndarray:
    """Rows of feature-map amplitudes, one per data point."""
    A = _check_dims(A, fmap)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        states = list(pool.map(lambda x: run_exact(zz_feature_map(fmap, x)).amplitudes, A))
    return np.array(states).reshape(A.shape[0], 2**fmap.n_qubits)


def quantum_kernel_exact(A, B, fmap: FeatureMapSpec, threads: int | None = None) -> KernelMatrix:
    """K[i, j] = |<phi(b_j)|phi(a_i)>|^2 from exact statevectors."""
    SA = feature_states(A, fmap, threads)
    SB = SA if B is A else feature_states(B, fmap, threads)
    K = np.abs(SA.conj() @ SB.T) ** 2
    if B is A:
        K = (K + K.T) / 2
        np.fill_diagonal(K, 1.0)
    return KernelMatrix(np.clip(K, 0.0, 1.0))


def quantum_kernel_sampled(
    A,
    B,
    fmap: FeatureMapSpec,
    shots: int = 1024,
    seed: int = 0,
    noise: NoiseModel | None = None,
    threads: int | None = None,
) -> KernelMatrix:
    """All-zeros frequency of U(b_j)^dagger U(a_i)|0> over ``shots`` shots.

    When ``B is A`` the diagonal is set to 1 and the (i, j) and (j, i)
    estimates are averaged. Without noise the zero-outcome count is drawn
    from its exact binomial law, which is the same distribution the full
    circuit sampler produces for that outcome; with noise every pair circuit
    is run through the trajectory sampler.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    A = _check_dims(A, fmap)
    same = B is A
    B = A if same else _check_dims(B, fmap)
    ss = np.random.SeedSequence(seed)
    pair_seeds = ss.generate_state(A.shape[0] * B.shape[0], dtype=np.uint64).reshape(A.shape[0], B.shape[0])
    if noise is None:
        exact = quantum_kernel_exact_raw(A, B, fmap, threads)
        est = np.empty_like(exact)
        for i in range(A.shape[0]):
            for j in range(B.shape[0]):
                rng = np.random.default_rng(int(pair_seeds[i, j]))
                est[i, j] = rng.binomial(shots, min(max(exact[i, j], 0.0), 1.0)) / shots
    else:
        def entry(ij):
            i, j = ij
            outcomes = sample_outcomes(fidelity_circuit(fmap, A[i], B[j]), None, shots, int(pair_seeds[i, j]), noise)
            return np.mean(outcomes == 0)

        pairs = [(i, j) for i in range(A.shape[0]) for j in range(B.shape[0])]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            est = np.array(list(pool.map(entry, pairs))).reshape(A.shape[0], B.shape[0])
    if same:
        est = (est + est.T) / 2
        np.fill_diagonal(est, 1.0)
    return KernelMatrix(est)


def quantum_kernel_exact_raw(A, B, fmap: FeatureMapSpec, threads: int | None = None) -> np.ndarray:
    SA = feature_states(A, fmap, threads)
    SB = feature_states(B, fmap, threads)
    return np.abs(SA.conj() @ SB.T) ** 2


def zero_probability(fmap: FeatureMapSpec, x, y) -> float:
    """Exact all-zeros probability of the fidelity circuit for (x, y)."""
    state = run_exact(fidelity_circuit(fmap, x, y))
    return float(abs(state.amplitudes[0]) ** 2)


def default_gamma(X) -> float:
    """1 / (d * var(X)) over all entries."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    var = float(X.var())
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def classical_kernel(kind: str, A, B, gamma: float | None = None) -> KernelMatrix:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError("feature dimensions differ")
    if kind == "linear":
        return KernelMatrix(A @ B.T)
    if kind == "rbf":
        if gamma is None or gamma <= 0:
            raise ValueError("rbf kernel needs gamma > 0")
        sq = np.sum(A**2, 1)[:, None] + np.sum(B**2, 1)[None, :] - 2 * A @ B.T
        return KernelMatrix(np.exp(-gamma * np.maximum(sq, 0.0)))
    raise ValueError(f"unknown kernel kind {kind!r}")


# -- SVM dual ----------------------------------------------------------------


@dataclass
class SvmModel:
    alphas: np.ndarray
    bias: float
    labels: np.ndarray
    C: float
    kernel: str = "precomputed"
    psd_clip: float = 0.0
    n_iter: int = 0
    kkt_gap: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def support(self) -> np.ndarray:
        return np.nonzero(self.alphas > 1e-12)[0]

    def dual_objective(self, K) -> float:
        return dual_objective(self.alphas, np.asarray(K, dtype=float), self.labels)


def dual_objective(alpha: np.ndarray, K: np.ndarray, y: np.ndarray) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def _as_array(K) -> np.ndarray:
    return K.values if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)


def nearest_psd(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Clip negative eigenvalues at zero; returns the matrix and the clip size."""
    vals, vecs = np.linalg.eigh((K + K.T) / 2)
    clip = float(max(0.0, -vals.min()))
    return (vecs * np.maximum(vals, 0.0)) @ vecs.T, clip


def svm_fit(K, y, C: float = 1.0, tol: float = 1e-9, max_iter: int = 100_000) -> SvmModel:
    """Maximize the soft-margin dual by two-variable analytic updates.

    Working pairs are the maximal KKT violators; the loop stops when the
    violation gap drops below ``tol``. The bias averages ``y_i - f_i`` over
    free support vectors, falling back to the midpoint of the feasible range.
    """
    K = _as_array(K)
    y = np.asarray(y, dtype=float).reshape(-1)
    m = y.size
    if K.shape != (m, m):
        raise ValueError(f"kernel shape {K.shape} does not match {m} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if C <= 0:
        raise ValueError("C must be positive")
    if np.all(y == y[0]):
        raise ValueError("all labels belong to one class; the dual has no feasible progress")
    if np.max(np.abs(K - K.T)) > 1e-6:
        raise ValueError("kernel matrix is not symmetric")
    K = (K + K.T) / 2
    clip = 0.0
    lam_min = float(np.linalg.eigvalsh(K).min())
    if lam_min < -1e-6:
        K, clip = nearest_psd(K)
        warnings.warn(f"kernel not PSD; clipped eigenvalues by {clip:.3g}", RuntimeWarning, stacklevel=2)

    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(m)
    G = -np.ones(m)  # gradient of 0.5 a'Qa - e'a
    it = 0
    gap = np.inf
    while it < max_iter:
        # I_up: can move alpha_t y_t upward; I_low: downward
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * G
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        j = int(np.flatnonzero(low)[np.argmin(score[low])])
        gap = score[i] - score[j]
        if gap <= tol:
            break
        a = Q[i, i] + Q[j, j] - 2 * y[i] * y[j] * Q[i, j]
        a = a if a > 1e-12 else 1e-12
        # step along direction (y_i, -y_j) on (alpha_i, alpha_j)
        t = gap / a
        # box limits for alpha_i + y_i t and alpha_j - y_j t
        ti = C - alpha[i] if y[i] > 0 else alpha[i]
        tj = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min(t, ti, tj)
        di, dj = y[i] * t, -y[j] * t
        alpha[i] += di
        alpha[j] += dj
        G += Q[:, i] * di + Q[:, j] * dj
        # snap to bounds to keep the active sets exact
        for k in (i, j):
            if alpha[k] < 1e-15 * C:
                alpha[k] = 0.0
            elif alpha[k] > C * (1 - 1e-15):
                alpha[k] = C
        it += 1

    f_no_b = (alpha * y) @ K
    free = (alpha > 1e-10 * C) & (alpha < C * (1 - 1e-10))
    if free.any():
        b = float(np.mean(y[free] - f_no_b[free]))
    else:
        r = y - f_no_b
        ub = [r[t] for t in range(m) if (y[t] > 0 and alpha[t] >= C) or (y[t] < 0 and alpha[t] <= 0)]
        lb = [r[t] for t in range(m) if (y[t] > 0 and alpha[t] <= 0) or (y[t] < 0 and alpha[t] >= C)]
        lo = max(lb) if lb else -np.inf
        hi = min(ub) if ub else np.inf
        if np.isfinite(lo) and np.isfinite(hi):
            b = 0.5 * (lo + hi)
        else:
            b = float(lo if np.isfinite(lo) else hi if np.isfinite(hi) else 0.0)
    return SvmModel(alpha, b, y, float(C), psd_clip=clip, n_iter=it, kkt_gap=float(gap))


def svm_decision(model: SvmModel, k_rows) -> np.ndarray:
    """Sum_i alpha_i y_i K(x_i, s) + b for each row of kernel values."""
    k = np.atleast_2d(_as_array(k_rows))
    if k.shape[1] != model.alphas.size:
        raise ValueError(f"kernel rows have {k.shape[1]} entries, model was trained on {model.alphas.size}")
    return k @ (model.alphas * model.labels) + model.bias


def svm_classify(model: SvmModel, k_rows) -> np.ndarray:
    """Signs of the decision values; a score of exactly 0 maps to +1."""
    return np.where(svm_decision(model, k_rows) >= 0, 1, -1)


def kkt_residual(model: SvmModel, K) -> float:
    """Largest violation of the soft-margin KKT conditions."""
    K = _as_array(K)
    f = svm_decision(model, K)
    yf = model.labels * f
    a, C = model.alphas, model.C
    res = 0.0
    for t in range(a.size):
        if a[t] <= 1e-10 * C:
            res = max(res, 1 - yf[t])
        elif a[t] >= C * (1 - 1e-10):
            res = max(res, yf[t] - 1)
        else:
            res = max(res, abs(yf[t] - 1))
    res = max(res, abs(float(a @ model.labels)))
    return float(max(res, 0.0))


def to_pm1(y01) -> np.ndarray:
    return np.where(np.asarray(y01) == 1, 1.0, -1.0)


def fit_predict_precomputed(K_train, y01, K_test, C: float = 1.0):
    model = svm_fit(K_train, to_pm1(y01), C)
    scores = svm_decision(model, K_test)
    return model, scores, (scores >= 0).astype(int)

