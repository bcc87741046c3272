"""Connectivity-matrix ingestion and eigenvector-centrality reduction."""
from __future__ import annotations

import csv
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

LABELS = {"HC": 0, "PSP": 1}
COHORTS = ("male", "female")

# 27-node rostral midbrain tegmentum atlas: abbreviation and MNI coordinates (mm)
ROI_TABLE = [
    ("LMFG", -32.4058, 30.89855, 32.11594),
    ("Lparcing", -2.9, 31.8, 32.3),
    ("LSMG", -54.252, -46.3465, 41.00787),
    ("LPreCu", -4.46296, -73.0741, 39.53704),
    ("LRSC", -7.01587, -52.6349, 9.650794),
    ("LACC", -5.91667, 37.91667, 17.20833),
    ("LpMCC", -2.31579, -28.6316, 38.94737),
    ("LIns", -43.4, 15.25, 0.85),
    ("RMFG", 39.22124, 26.1062, 34.63717),
    ("Rparacing", 4.983051, 32.20339, 39.83051),
    ("RSMG", 60.37895, -47.7053, 27.2),
    ("RPreCu", 10.33766, -69.2208, 38.8052),
    ("RRSC", 6.0, -54.4381, 18.59048),
    ("RACC", 10.2029, 35.13044, 19.50725),
    ("RpMCC", 2.059406, -28.7723, 38.13861),
    ("RIns", 41.16279, 14.51163, -6.51163),
    ("LBG", -18.1767, 10.90763, 2.586345),
    ("LThal", -9.71795, -19.3846, 6.487179),
    ("RBG", 17.6063, 10.17323, 3.944882),
    ("RThal", 12.42953, -14.8859, 7.422819),
    ("LMTJ", -5.2973, -13.4054, -5.94595),
    ("RMTJ", 5.64486, -13.7009, -6.61682),
    ("rPons", 4.184615, -24.9538, -25.2),
    ("cPons", 1.632653, -32.8571, -36.2449),
    ("LDentN", -11.5556, -49.8889, -24.9444),
    ("RDentN", 11.04615, -46.3692, -25.7538),
    ("Vermis", 0.926316, -51.6, -14.2316),
]
ROI_NAMES = [r[0] for r in ROI_TABLE]


class MatrixFormatError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def default_node_names(n: int) -> list[str]:
    return list(ROI_NAMES) if n == len(ROI_NAMES) else [f"roi{i}" for i in range(n)]


@dataclass(frozen=True)
class ConnectivityMatrix:
    weights: np.ndarray
    node_names: tuple[str, ...] = ()
    mni_coords: np.ndarray | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise MatrixFormatError(f"connectivity matrix must be square, got shape {w.shape}")
        if w.shape[0] < 2:
            raise MatrixFormatError("need at least 2 nodes")
        if not np.all(np.isfinite(w)):
            raise MatrixFormatError("matrix has non-finite entries")
        if np.max(np.abs(w - w.T)) > 1e-9:
            raise MatrixFormatError("matrix is not symmetric")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        names = tuple(self.node_names) or tuple(default_node_names(w.shape[0]))
        if len(names) != w.shape[0]:
            raise MatrixFormatError(f"{len(names)} node names for {w.shape[0]} nodes")
        object.__setattr__(self, "node_names", names)
        if self.mni_coords is not None:
            coords = np.asarray(self.mni_coords, dtype=float)
            if coords.shape != (w.shape[0], 3):
                raise MatrixFormatError("mni_coords must be n x 3")
            object.__setattr__(self, "mni_coords", coords)

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class SubjectRecord:
    id: str
    cohort: str
    label: str
    matrix: ConnectivityMatrix

    def __post_init__(self):
        if self.cohort not in COHORTS:
            raise ValueError(f"cohort must be one of {COHORTS}, got {self.cohort!r}")
        if self.label not in LABELS:
            raise ValueError(f"label must be HC or PSP, got {self.label!r}")


@dataclass(frozen=True)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    subject_ids: tuple[str, ...]
    cohorts: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=int).reshape(-1)
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
        if not np.all(np.isin(y, (0, 1))):
            raise ValueError("labels must be 0 (HC) or 1 (PSP)")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length does not match columns")
        if len(self.subject_ids) != X.shape[0]:
            raise ValueError("subject_ids length does not match rows")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))
        object.__setattr__(self, "cohorts", tuple(self.cohorts))

    def __len__(self) -> int:
        return self.y.size

    def subset(self, rows) -> "LabeledDataset":
        rows = list(rows)
        return LabeledDataset(
            self.X[rows],
            self.y[rows],
            self.feature_names,
            tuple(self.subject_ids[i] for i in rows),
            tuple(self.cohorts[i] for i in rows) if self.cohorts else (),
        )

    def with_features(self, X, names: Sequence[str]) -> "LabeledDataset":
        return LabeledDataset(X, self.y, tuple(names), self.subject_ids, self.cohorts)


_SPLIT = re.compile(r"[,\s]+")


def load_matrix(text: str, node_names: Sequence[str] = (), mni_coords=None) -> ConnectivityMatrix:
    """Parse whitespace- or comma-delimited square numeric text.

    Asymmetry up to 1e-6 is averaged away; anything larger is rejected.
    """
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c for c in _SPLIT.split(line) if c]
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise MatrixFormatError(f"line {lineno}: non-numeric cell ({exc})") from None
    if not rows:
        raise MatrixFormatError("empty matrix text")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() != len(rows):
        raise MatrixFormatError(
            f"ragged rows: {len(rows)} rows with lengths {sorted({len(r) for r in rows})}"
        )
    a = np.array(rows)
    if not np.all(np.isfinite(a)):
        raise MatrixFormatError("matrix has non-finite entries")
    asym = float(np.max(np.abs(a - a.T)))
    if asym > 1e-6:
        raise MatrixFormatError(f"matrix asymmetric by {asym:.3g} (tolerance 1e-6)")
    return ConnectivityMatrix((a + a.T) / 2, tuple(node_names), mni_coords)


def load_matrix_file(path, **kwargs) -> ConnectivityMatrix:
    return load_matrix(Path(path).read_text(), **kwargs)


def format_matrix(m: ConnectivityMatrix) -> str:
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in m.weights) + "\n"


def centrality_weights(m: ConnectivityMatrix) -> np.ndarray:
    """Absolute weights with a zeroed diagonal."""
    w = np.abs(m.weights).copy()
    np.fill_diagonal(w, 0.0)
    return w


def eigenvector_centrality(m: ConnectivityMatrix | np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Unit-norm dominant eigenvector of the preprocessed weight matrix.

    Power iteration from the uniform vector on ``W + s I`` (s = half the
    largest row sum); the shift keeps bipartite graphs from oscillating and
    leaves the eigenvectors unchanged. Converged when
    ``|W x - lam x| <= tol * lam``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not isinstance(m, ConnectivityMatrix):
        m = ConnectivityMatrix(np.asarray(m, dtype=float))
    w = centrality_weights(m)
    if not np.any(w):
        raise ValueError("all-zero connectivity matrix has no centrality")
    n = w.shape[0]
    shift = 0.5 * w.sum(axis=1).max()
    x = np.full(n, 1 / np.sqrt(n))
    for _ in range(max_iter):
        wx = w @ x
        lam = float(x @ wx)
        if np.linalg.norm(wx - lam * x) <= tol * lam:
            return np.abs(x)
        y = wx + shift * x
        x = y / np.linalg.norm(y)
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def _labels_for(subjects):
    return np.array([LABELS[s.label] for s in subjects])


def build_evc_dataset(
    subjects: Sequence[SubjectRecord],
    tol: float = 1e-10,
    max_iter: int = 10_000,
    threads: int | None = None,
) -> LabeledDataset:
    subjects = list(subjects)
    if not subjects:
        raise ValueError("no subjects given")
    sizes = {s.matrix.n for s in subjects}
    if len(sizes) != 1:
        raise ValueError(f"subjects have mixed node counts {sorted(sizes)}")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(lambda s: eigenvector_centrality(s.matrix, tol, max_iter), subjects))
    return LabeledDataset(
        np.vstack(rows),
        _labels_for(subjects),
        subjects[0].matrix.node_names,
        tuple(s.id for s in subjects),
        tuple(s.cohort for s in subjects),
    )


MANIFEST_HEADER = ["subject_id", "cohort", "label", "matrix_path"]


def load_manifest(path, cohort: str | None = None) -> list[SubjectRecord]:
    """Read a ``subject_id,cohort,label,matrix_path`` CSV.

    Matrix paths are resolved relative to the manifest's directory.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(MANIFEST_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"manifest missing columns {sorted(missing)}")
        records = []
        for row in reader:
            if cohort is not None and row["cohort"] != cohort:
                continue
            mpath = Path(row["matrix_path"])
            if not mpath.is_absolute():
                mpath = path.parent / mpath
            records.append(SubjectRecord(row["subject_id"], row["cohort"], row["label"], load_matrix_file(mpath)))
    return records


def write_manifest(subjects: Sequence[SubjectRecord], directory, matrix_dir: str = "matrices") -> Path:
    directory = Path(directory)
    (directory / matrix_dir).mkdir(parents=True, exist_ok=True)
    manifest = directory / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for s in subjects:
            rel = f"{matrix_dir}/{s.id}.txt"
            (directory / rel).write_text(format_matrix(s.matrix))
            w.writerow([s.id, s.cohort, s.label, rel])
    return manifest
