"""Feature-map and ansatz builders plus feature scaling into the encoding range."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable

import numpy as np

from .qsim import Circuit, GateOp


def _phase_single(xi: float) -> float:
    return xi


def _phase_pair(xi: float, xj: float) -> float:
    return (np.pi - xi) * (np.pi - xj)


@dataclass(frozen=True)
class FeatureMapSpec:
    """Second-order Pauli-Z feature map.

    Per repetition: H on every qubit, RZ(2*phi(x_i)) on qubit i, and for each
    entangled pair (i, j) the block CNOT(i,j) RZ(2*phi(x_i,x_j))_j CNOT(i,j).
    Custom phase functions are not serialized; saved models always use the
    defaults.
    """

    n_qubits: int
    depth: int = 2
    entanglement: str = "full"
    phase_single: Callable[[float], float] = field(default=_phase_single, compare=False, repr=False)
    phase_pair: Callable[[float, float], float] = field(default=_phase_pair, compare=False, repr=False)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.entanglement not in ("full", "linear"):
            raise ValueError(f"unknown entanglement {self.entanglement!r}")

    def pairs(self) -> list[tuple[int, int]]:
        if self.entanglement == "full":
            return list(combinations(range(self.n_qubits), 2))
        return [(i, i + 1) for i in range(self.n_qubits - 1)]

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "depth": self.depth, "entanglement": self.entanglement}

    @classmethod
    def from_dict(cls, d) -> "FeatureMapSpec":
        return cls(int(d["n_qubits"]), int(d.get("depth", 2)), d.get("entanglement", "full"))


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    layers: int = 2
    entangler: str = "CNOT_chain"

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.entangler not in ("CNOT_chain", "CZ_chain"):
            raise ValueError(f"unknown entangler {self.entangler!r}")

    @property
    def n_parameters(self) -> int:
        return self.n_qubits * (self.layers + 1)

    def slot_names(self) -> list[str]:
        """Layer-major, then qubit ascending."""
        return [f"theta[{t}][{i}]" for t in range(self.layers + 1) for i in range(self.n_qubits)]

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "layers": self.layers, "entangler": self.entangler}

    @classmethod
    def from_dict(cls, d) -> "AnsatzSpec":
        return cls(int(d["n_qubits"]), int(d.get("layers", 2)), d.get("entangler", "CNOT_chain"))


def zz_feature_map(spec: FeatureMapSpec, x) -> Circuit:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != spec.n_qubits:
        raise ValueError(f"feature vector has {x.size} entries, map expects {spec.n_qubits}")
    n = spec.n_qubits
    block: list[GateOp] = [GateOp("H", (q,)) for q in range(n)]
    block += [GateOp("RZ", (q,), angle=2.0 * float(spec.phase_single(x[q]))) for q in range(n)]
    for i, j in spec.pairs():
        block += [
            GateOp("CNOT", (i, j)),
            GateOp("RZ", (j,), angle=2.0 * float(spec.phase_pair(x[i], x[j]))),
            GateOp("CNOT", (i, j)),
        ]
    return Circuit(n, tuple(block) * spec.depth)


def real_amplitudes_ansatz(spec: AnsatzSpec) -> Circuit:
    n = spec.n_qubits
    names = spec.slot_names()
    kind = "CNOT" if spec.entangler == "CNOT_chain" else "CZ"
    gates: list[GateOp] = []
    for t in range(spec.layers + 1):
        if t > 0:
            gates += [GateOp(kind, (i, i + 1)) for i in range(n - 1)]
        gates += [GateOp("RY", (i,), slot=names[t * n + i]) for i in range(n)]
    return Circuit(n, tuple(gates))


def fidelity_circuit(spec: FeatureMapSpec, x, y) -> Circuit:
    """U(y)^dagger U(x); its all-zeros probability is |<phi(y)|phi(x)>|^2."""
    return zz_feature_map(spec, x).compose(zz_feature_map(spec, y).inverse())


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature affine map of the training range onto ``[lo, hi]``."""

    minimum: np.ndarray
    maximum: np.ndarray
    lo: float = 0.0
    hi: float = float(np.pi)

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("hi must exceed lo")
        if np.any(np.asarray(self.maximum) < np.asarray(self.minimum)):
            raise ValueError("maximum below minimum")

    def transform(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.minimum):
            raise ValueError(f"expected {len(self.minimum)} features, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite feature values")
        span = self.maximum - self.minimum
        mid = 0.5 * (self.lo + self.hi)
        safe = np.where(span > 0, span, 1.0)
        out = self.lo + (X - self.minimum) / safe * (self.hi - self.lo)
        out = np.where(span > 0, out, mid)
        return np.clip(out, self.lo, self.hi)

    def to_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist(), "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d) -> "FeatureScaler":
        return cls(np.asarray(d["min"], float), np.asarray(d["max"], float), float(d["lo"]), float(d["hi"]))


def scale_features(train, lo: float = 0.0, hi: float = float(np.pi)) -> tuple[FeatureScaler, np.ndarray]:
    train = np.atleast_2d(np.asarray(train, dtype=float))
    if train.shape[0] < 1:
        raise ValueError("need at least one row")
    if not np.all(np.isfinite(train)):
        raise ValueError("non-finite feature values")
    scaler = FeatureScaler(train.min(axis=0), train.max(axis=0), float(lo), float(hi))
    return scaler, scaler.transform(train)
