import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brainqml.pca import (
    explained_variance_report,
    factorial_plane,
    jacobi_eigh,
    loadings,
    loadings_csv,
    n_components_for,
    pca_fit,
    pca_inverse_transform,
    pca_transform,
)


def oracle(X):
    """Eigenpairs of the sample covariance by numpy, sorted descending, sign-fixed."""
    X = np.asarray(X, float)
    C = (X - X.mean(0)).T @ (X - X.mean(0)) / (X.shape[0] - 1)
    w, v = np.linalg.eigh(C)
    w, v = w[::-1], v[:, ::-1]
    for i in range(v.shape[1]):
        if v[np.argmax(np.abs(v[:, i])), i] < 0:
            v[:, i] *= -1
    return w, v.T


def test_line_data_rank_one():
    t = np.linspace(-2, 3, 9)
    X = np.c_[t, 2 * t]
    m = pca_fit(X, 1, ["a", "b"])
    assert np.allclose(m.components[0], np.array([1, 2]) / np.sqrt(5))
    assert m.explained_ratio[0] == pytest.approx(1.0)
    assert np.allclose(explained_variance_report(m).ratio, [1.0, 0.0])
    scores = pca_transform(m, X)[:, 0]
    assert np.allclose(scores, (t - t.mean()) * np.sqrt(5))
    assert dict(loadings(m, 0)) == pytest.approx({"a": 1 / np.sqrt(5), "b": 2 / np.sqrt(5)})


def test_isotropic_cloud():
    X = np.random.default_rng(0).normal(size=(4000, 2))
    m = pca_fit(X, 2)
    assert m.eigenvalues[0] / m.eigenvalues[1] == pytest.approx(1.0, abs=0.1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_matches_oracle(seed):
    X = np.random.default_rng(seed).normal(size=(10, 6))
    m = pca_fit(X, 6)
    w, v = oracle(X)
    assert np.max(np.abs(m.spectrum - w)) <= 1e-8
    assert np.max(np.abs(m.components - v)) <= 1e-8


def test_jacobi_reconstructs_matrix():
    A = np.random.default_rng(2).normal(size=(7, 7))
    A = A + A.T
    vals, vecs = jacobi_eigh(A)
    assert np.allclose(vecs @ np.diag(vals) @ vecs.T, A, atol=1e-10)
    assert np.allclose(vecs.T @ vecs, np.eye(7), atol=1e-12)


def test_mean_row_maps_to_origin_and_roundtrip():
    X = np.random.default_rng(4).normal(size=(12, 5))
    m = pca_fit(X, 5)
    assert np.allclose(pca_transform(m, X.mean(0)), 0, atol=1e-12)
    assert np.max(np.abs(pca_inverse_transform(m, pca_transform(m, X)) - X)) <= 1e-8


def test_cumulative_matches_oracle_partial_sums():
    X = np.random.default_rng(5).normal(size=(10, 5))
    rep = explained_variance_report(pca_fit(X, 3))
    w, _ = oracle(X)
    assert np.allclose(rep.cumulative, np.cumsum(w) / w.sum(), atol=1e-12)
    assert rep.cumulative[-1] == pytest.approx(1.0)
    assert rep.to_csv().splitlines()[0] == "component,ratio,cumulative"


def test_unit_norm_loadings_and_sign_rule():
    m = pca_fit(np.random.default_rng(6).normal(size=(15, 8)), 4)
    for i in range(4):
        row = m.components[i]
        assert np.sum(row**2) == pytest.approx(1.0, abs=1e-8)
        assert row[np.argmax(np.abs(row))] > 0
    values = [v for _, v in loadings(m, 0)]
    assert values == sorted(values, key=lambda v: -abs(v))
    assert loadings_csv(loadings(m, 0)).startswith("feature,loading\n")


def test_factorial_plane():
    X = np.random.default_rng(7).normal(size=(10, 2))
    m = pca_fit(X, 2, ["u", "v"])
    pts = np.array([(a, b) for _, a, b in factorial_plane(m, 0, 1)])
    assert np.allclose(pts.T @ pts, np.eye(2), atol=1e-10)
    # a constant feature has zero loading everywhere
    Y = np.c_[np.random.default_rng(8).normal(size=(50, 2)) * [3, 2], np.full(50, 5.0)]
    plane = factorial_plane(pca_fit(Y, 2, ["p", "q", "r"]), 0, 1)
    assert np.hypot(plane[2][1], plane[2][2]) < 1e-12
    m4 = pca_fit(np.random.default_rng(9).normal(size=(10, 4)), 3)
    for name, a, b in factorial_plane(m4, 0, 2):
        assert dict(loadings(m4, 0))[name] == a and dict(loadings(m4, 2))[name] == b


def test_invalid_k_and_threshold_helper():
    X = np.random.default_rng(1).normal(size=(5, 8))
    with pytest.raises(ValueError):
        pca_fit(X, 5)
    m = pca_fit(X, 4)
    k = n_components_for(m, 0.9)
    cum = np.cumsum(m.explained_ratio_all)
    assert cum[k - 1] >= 0.9 - 1e-12 and (k == 1 or cum[k - 2] < 0.9)
