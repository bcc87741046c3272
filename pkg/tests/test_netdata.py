import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brainqml.netdata import (
    ROI_NAMES,
    ROI_TABLE,
    ConnectivityMatrix,
    ConvergenceError,
    MatrixFormatError,
    SubjectRecord,
    build_evc_dataset,
    eigenvector_centrality,
    format_matrix,
    load_manifest,
    load_matrix,
    write_manifest,
)
from oracles import power_free_centrality


def test_roi_atlas():
    assert len(ROI_TABLE) == 27 and len(set(ROI_NAMES)) == 27
    assert ROI_NAMES[1] == "Lparcing"


def test_parse_two_by_two():
    m = load_matrix("0 0.5\n0.5 0\n")
    assert m.weights[0][1] == 0.5 and m.n == 2


def test_parse_comma_and_identity():
    m = load_matrix("1,0,0\n0,1,0\n0,0,1")
    off = m.weights[~np.eye(3, dtype=bool)]
    assert np.all(off == 0)


def test_ragged_rows_rejected():
    text = "\n".join(" ".join("0.1" for _ in range(26)) for _ in range(27))
    with pytest.raises(MatrixFormatError, match="ragged"):
        load_matrix(text)


def test_asymmetry_policy():
    m = load_matrix("0 0.5\n0.5000005 0")
    assert m.weights[0, 1] == m.weights[1, 0]
    with pytest.raises(MatrixFormatError, match="asymmetric"):
        load_matrix("0 0.5\n0.6 0")


def test_matrix_is_read_only_and_names_default():
    m = ConnectivityMatrix(np.eye(27))
    assert m.node_names == tuple(ROI_NAMES)
    with pytest.raises(ValueError):
        m.weights[0, 0] = 3


def test_complete_graph():
    x = eigenvector_centrality(np.ones((3, 3)) - np.eye(3))
    assert np.allclose(x, 1 / math.sqrt(3), atol=1e-9)


def test_star_hub_dominates():
    W = np.zeros((4, 4))
    W[0, 1:] = W[1:, 0] = 1
    x = eigenvector_centrality(W)
    assert np.all(x[0] > x[1:])
    assert np.ptp(x[1:]) < 1e-9


def test_bipartite_graph_does_not_oscillate():
    # plain power iteration oscillates on bipartite graphs; the diagonal shift prevents it
    W = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=float)
    x = eigenvector_centrality(W)
    assert np.allclose(x, power_free_centrality(W), atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_matches_dense_oracle(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (n, n))
    A = (A + A.T) / 2
    x = eigenvector_centrality(A)
    assert abs(np.linalg.norm(x) - 1) < 1e-12
    ref = power_free_centrality(A)
    vals = np.linalg.eigvalsh(np.abs(A) - np.diag(np.diag(np.abs(A))))
    if vals[-1] - vals[-2] > 1e-3 * vals[-1]:  # well-separated dominant eigenvalue
        assert np.max(np.abs(x - ref)) <= 1e-8


def test_negative_weights_use_magnitudes():
    A = np.array([[1.0, -0.8, 0.2], [-0.8, 1.0, 0.5], [0.2, 0.5, 1.0]])
    assert np.allclose(eigenvector_centrality(A), eigenvector_centrality(np.abs(A)))


def test_convergence_error_and_zero_matrix():
    rng = np.random.default_rng(0)
    A = rng.random((6, 6))
    with pytest.raises(ConvergenceError):
        eigenvector_centrality(A + A.T, tol=1e-15, max_iter=2)
    with pytest.raises(ValueError):
        eigenvector_centrality(np.eye(3))


def _subject(i, n=27, label="HC", cohort="male"):
    rng = np.random.default_rng(i)
    A = rng.uniform(-1, 1, (n, n))
    A = (A + A.T) / 2
    np.fill_diagonal(A, 1)
    return SubjectRecord(f"s{i:02d}", cohort, label, ConnectivityMatrix(A))


def test_dataset_shapes():
    subjects = [_subject(i, label="PSP" if i % 2 else "HC") for i in range(28)]
    ds = build_evc_dataset(subjects, threads=2)
    assert ds.X.shape == (28, 27)
    assert list(ds.y[:4]) == [0, 1, 0, 1]
    one = build_evc_dataset([subjects[3]])
    assert np.allclose(one.X[0], eigenvector_centrality(subjects[3].matrix))


def test_mixed_dimensions_rejected():
    with pytest.raises(ValueError, match="mixed"):
        build_evc_dataset([_subject(0), _subject(1, n=25)])


def test_threads_do_not_change_result():
    subjects = [_subject(i) for i in range(6)]
    assert np.array_equal(build_evc_dataset(subjects, threads=1).X, build_evc_dataset(subjects, threads=4).X)


def test_manifest_roundtrip(tmp_path):
    subjects = [_subject(i, n=5, label=["HC", "PSP"][i % 2], cohort=["male", "female"][i // 2]) for i in range(4)]
    path = write_manifest(subjects, tmp_path)
    back = load_manifest(path)
    assert [s.id for s in back] == [s.id for s in subjects]
    assert all(np.array_equal(a.matrix.weights, b.matrix.weights) for a, b in zip(back, subjects))
    assert [s.id for s in load_manifest(path, cohort="female")] == ["s02", "s03"]


def test_format_matrix_is_exact():
    m = _subject(3, n=4).matrix
    assert np.array_equal(load_matrix(format_matrix(m)).weights, m.weights)
