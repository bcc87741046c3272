"""
Statevector simulator with shot sampling, trajectory noise and readout mitigation.

Conventions:
- qubit 0 is the least-significant bit of a basis-state index
- bitstrings are rendered most-significant qubit first, so "01" means
  qubit 0 reads 1 and qubit 1 reads 0
- RZ(t) = diag(exp(-i t/2), exp(+i t/2)); global phases are kept

Noise is simulated with the trajectory method: every shot carries its own
stochastic Pauli insertions, so memory stays at 2**n amplitudes.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from math import cos, sin, sqrt
from typing import Mapping, Sequence

import numpy as np

ONE_QUBIT_KINDS = ("H", "X", "Y", "Z", "RY", "RZ", "P")
TWO_QUBIT_KINDS = ("CNOT", "CZ")
PARAMETRIC_KINDS = ("RY", "RZ", "P")

_SQRT2_INV = 1 / sqrt(2)
_FIXED_1Q = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_PAULIS = (np.eye(2, dtype=complex), _FIXED_1Q["X"], _FIXED_1Q["Y"], _FIXED_1Q["Z"])


def gate_matrix(kind: str, angle: float | None = None) -> np.ndarray:
    """Return the 2x2 (or 4x4 for two-qubit gates) unitary for a gate kind.

    Two-qubit matrices use the basis |control, target> with the control as
    the most significant factor.
    """
    if kind in _FIXED_1Q:
        return _FIXED_1Q[kind].copy()
    if kind == "RY":
        c, s = cos(angle / 2), sin(angle / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
    if kind == "P":
        return np.diag([1.0, np.exp(1j * angle)]).astype(complex)
    if kind == "CNOT":
        return np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
    if kind == "CZ":
        return np.diag([1, 1, 1, -1]).astype(complex)
    raise ValueError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class GateOp:
    """One gate. For CNOT, ``targets`` is ``(control, target)``.

    Parametric gates carry either a numeric ``angle`` or a named ``slot`` that
    is bound at run time.
    """

    kind: str
    targets: tuple[int, ...]
    angle: float | None = None
    slot: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind in ONE_QUBIT_KINDS:
            arity = 1
        elif self.kind in TWO_QUBIT_KINDS:
            arity = 2
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind} acts on {arity} qubit(s), got {self.targets}")
        if len(set(self.targets)) != arity:
            raise ValueError(f"{self.kind} targets must be distinct, got {self.targets}")
        if any(t < 0 for t in self.targets):
            raise ValueError(f"negative qubit index in {self.targets}")
        if self.kind in PARAMETRIC_KINDS:
            if (self.angle is None) == (self.slot is None):
                raise ValueError(f"{self.kind} needs exactly one of angle or slot")
        elif self.angle is not None or self.slot is not None:
            raise ValueError(f"{self.kind} takes no angle")

    @property
    def is_bound(self) -> bool:
        return self.slot is None

    def bind(self, params: Mapping[str, float]) -> "GateOp":
        if self.slot is None:
            return self
        if self.slot not in params:
            raise KeyError(f"unbound parameter slot {self.slot!r}")
        return GateOp(self.kind, self.targets, angle=float(params[self.slot]))

    def inverse(self) -> "GateOp":
        if self.slot is not None:
            raise ValueError("cannot invert a gate with an unbound slot")
        if self.kind in PARAMETRIC_KINDS:
            return GateOp(self.kind, self.targets, angle=-self.angle)
        # H, X, Y, Z, CNOT, CZ are self-inverse
        return self

    def matrix(self) -> np.ndarray:
        if self.slot is not None:
            raise ValueError(f"gate slot {self.slot!r} is unbound")
        return gate_matrix(self.kind, self.angle)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "targets": list(self.targets)}
        if self.angle is not None:
            d["angle"] = self.angle
        if self.slot is not None:
            d["slot"] = self.slot
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "GateOp":
        return cls(d["kind"], tuple(d["targets"]), angle=d.get("angle"), slot=d.get("slot"))


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[GateOp, ...] = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.targets) >= self.n_qubits:
                raise ValueError(f"gate {g.kind}{g.targets} out of range for {self.n_qubits} qubits")

    @property
    def parameters(self) -> list[str]:
        """Slot names in first-appearance order."""
        seen: dict[str, None] = {}
        for g in self.gates:
            if g.slot is not None:
                seen.setdefault(g.slot)
        return list(seen)

    def bind(self, params: Mapping[str, float] | Sequence[float] | None) -> "Circuit":
        slots = self.parameters
        if not slots:
            return self
        if params is None:
            raise KeyError(f"circuit has unbound slots {slots}")
        if not isinstance(params, Mapping):
            values = list(params)
            if len(values) != len(slots):
                raise ValueError(f"expected {len(slots)} parameter values, got {len(values)}")
            params = dict(zip(slots, values))
        return Circuit(self.n_qubits, tuple(g.bind(params) for g in self.gates))

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g.inverse() for g in reversed(self.gates)))

    def compose(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit counts differ")
        return Circuit(self.n_qubits, self.gates + other.gates)

    def to_json(self) -> str:
        return json.dumps(
            {"n_qubits": self.n_qubits, "gates": [g.to_dict() for g in self.gates]}, indent=2
        )

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        d = json.loads(text)
        return cls(d["n_qubits"], tuple(GateOp.from_dict(g) for g in d["gates"]))


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise ValueError(f"expected {2**self.n_qubits} amplitudes, got shape {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_label(cls, bits: str) -> "Statevector":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(len(bits), amps)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def inner(self, other: "Statevector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing gate noise plus per-qubit readout flips.

    ``readout_p10`` is P(read 1 | true 0) and ``readout_p01`` is
    P(read 0 | true 1); a scalar applies to every qubit.
    """

    depolarizing_1q: float = 0.0
    depolarizing_2q: float = 0.0
    readout_p10: float | tuple[float, ...] = 0.0
    readout_p01: float | tuple[float, ...] = 0.0

    def __post_init__(self):
        for name in ("readout_p10", "readout_p01"):
            v = getattr(self, name)
            if not np.isscalar(v):
                object.__setattr__(self, name, tuple(float(p) for p in v))
        for p in [self.depolarizing_1q, self.depolarizing_2q, *self._flat_readout()]:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")

    def _flat_readout(self) -> list[float]:
        out = []
        for v in (self.readout_p10, self.readout_p01):
            out.extend([v] if np.isscalar(v) else list(v))
        return out

    def readout_for(self, n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
        def expand(v):
            arr = np.full(n_qubits, v, dtype=float) if np.isscalar(v) else np.asarray(v, float)
            if arr.shape != (n_qubits,):
                raise ValueError(f"readout probabilities given for {arr.size} qubits, need {n_qubits}")
            return arr

        return expand(self.readout_p10), expand(self.readout_p01)

    @property
    def has_gate_noise(self) -> bool:
        return self.depolarizing_1q > 0 or self.depolarizing_2q > 0

    def to_dict(self) -> dict:
        def enc(v):
            return v if np.isscalar(v) else list(v)

        return {
            "depolarizing_1q": self.depolarizing_1q,
            "depolarizing_2q": self.depolarizing_2q,
            "readout_p10": enc(self.readout_p10),
            "readout_p01": enc(self.readout_p01),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "NoiseModel":
        def dec(v):
            return v if np.isscalar(v) else tuple(v)

        return cls(
            float(d.get("depolarizing_1q", 0.0)),
            float(d.get("depolarizing_2q", 0.0)),
            dec(d.get("readout_p10", 0.0)),
            dec(d.get("readout_p01", 0.0)),
        )


@dataclass(frozen=True)
class CountsTable:
    n_qubits: int
    shots: int
    entries: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.entries.values())
        if total != self.shots:
            raise ValueError(f"counts sum to {total}, expected {self.shots}")

    @classmethod
    def from_outcomes(cls, outcomes: np.ndarray, n_qubits: int) -> "CountsTable":
        values, freq = np.unique(np.asarray(outcomes, dtype=np.int64), return_counts=True)
        entries = {format(int(v), f"0{n_qubits}b"): int(c) for v, c in zip(values, freq)}
        return cls(n_qubits, int(len(outcomes)), entries)

    def to_vector(self) -> np.ndarray:
        """Empirical distribution indexed by basis state."""
        vec = np.zeros(2**self.n_qubits)
        for bits, c in self.entries.items():
            vec[int(bits, 2)] = c
        return vec / self.shots

    def to_json(self) -> str:
        return json.dumps({"shots": self.shots, "counts": dict(sorted(self.entries.items()))}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CountsTable":
        d = json.loads(text)
        counts = d["counts"]
        n = len(next(iter(counts))) if counts else 1
        return cls(n, int(d["shots"]), {k: int(v) for k, v in counts.items()})


# -- state evolution --------------------------------------------------------


def _apply_1q(amps: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    psi = amps.reshape(2 ** (n - q - 1), 2, 2**q)
    return np.einsum("ab,ibj->iaj", u, psi).reshape(-1)


def _apply_cnot(amps: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    psi = amps.reshape([2] * n).copy()
    # axis k of the reshaped tensor holds qubit n-1-k
    ca, ta = n - 1 - control, n - 1 - target
    idx1 = [slice(None)] * n
    idx1[ca] = 1
    sub = psi[tuple(idx1)]
    t_axis = ta if ta < ca else ta - 1
    psi[tuple(idx1)] = np.flip(sub, axis=t_axis)
    return psi.reshape(-1)


def _apply_cz(amps: np.ndarray, a: int, b: int, n: int) -> np.ndarray:
    idx = np.arange(2**n)
    sign = np.where(((idx >> a) & 1) & ((idx >> b) & 1), -1.0, 1.0)
    return amps * sign


def _apply(amps: np.ndarray, gate: GateOp, n: int) -> np.ndarray:
    if gate.kind == "CNOT":
        return _apply_cnot(amps, gate.targets[0], gate.targets[1], n)
    if gate.kind == "CZ":
        return _apply_cz(amps, gate.targets[0], gate.targets[1], n)
    return _apply_1q(amps, gate.matrix(), gate.targets[0], n)


def apply_gate(state: Statevector, gate: GateOp) -> Statevector:
    if max(gate.targets) >= state.n_qubits:
        raise ValueError(f"gate {gate.kind}{gate.targets} out of range for {state.n_qubits} qubits")
    return Statevector(state.n_qubits, _apply(state.amplitudes, gate, state.n_qubits))


def evolve(amps: np.ndarray, gates: Sequence[GateOp], n: int) -> np.ndarray:
    for g in gates:
        amps = _apply(amps, g, n)
    return amps


def run_exact(
    circuit: Circuit,
    params: Mapping[str, float] | Sequence[float] | None = None,
    initial: Statevector | None = None,
) -> Statevector:
    """Evolve ``initial`` (default |0...0>) through the bound circuit."""
    bound = circuit.bind(params)
    start = initial if initial is not None else Statevector.zero(circuit.n_qubits)
    if start.n_qubits != circuit.n_qubits:
        raise ValueError("initial state size does not match circuit")
    return Statevector(circuit.n_qubits, evolve(start.amplitudes, bound.gates, circuit.n_qubits))


# -- sampling ---------------------------------------------------------------


def _streams(seed: int | None) -> list[np.random.Generator]:
    """Independent generators for outcomes, gate noise and readout noise."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(3)]


def _draw(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = np.searchsorted(cdf, u, side="right")
    return np.minimum(out, cdf.size - 1)


def _cdf(probs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs)
    return cdf / cdf[-1]


def _apply_readout(outcomes: np.ndarray, n: int, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    p10, p01 = noise.readout_for(n)
    if not (p10.any() or p01.any()):
        return outcomes
    bits = (outcomes[:, None] >> np.arange(n)) & 1
    flip_p = np.where(bits == 1, p01, p10)
    flips = rng.random(bits.shape) < flip_p
    bits = bits ^ flips
    return (bits << np.arange(n)).sum(axis=1)


def _pauli_gate(code: int, q: int) -> GateOp | None:
    return (None, GateOp("X", (q,)), GateOp("Y", (q,)), GateOp("Z", (q,)))[code]


def _trajectory_patterns(gates: Sequence[GateOp], shots: int, noise: NoiseModel, rng) -> np.ndarray:
    """Per shot and gate, a Pauli code: 0 = no error, else 1..3 (1q) or 1..15 (2q).

    A two-qubit code c encodes Pauli (c // 4) on the first target and
    (c % 4) on the second.
    """
    probs = np.array([noise.depolarizing_2q if len(g.targets) == 2 else noise.depolarizing_1q for g in gates])
    hit = rng.random((shots, len(gates))) < probs
    ncodes = np.array([15 if len(g.targets) == 2 else 3 for g in gates])
    codes = 1 + np.floor(rng.random((shots, len(gates))) * ncodes).astype(np.int64)
    return np.where(hit, codes, 0)


def _noisy_probabilities(gates, pattern, n) -> np.ndarray:
    amps = Statevector.zero(n).amplitudes
    for g, code in zip(gates, pattern):
        amps = _apply(amps, g, n)
        if code:
            if len(g.targets) == 1:
                amps = _apply_1q(amps, _PAULIS[code], g.targets[0], n)
            else:
                a, b = divmod(int(code), 4)
                if a:
                    amps = _apply_1q(amps, _PAULIS[a], g.targets[0], n)
                if b:
                    amps = _apply_1q(amps, _PAULIS[b], g.targets[1], n)
    return np.abs(amps) ** 2


def sample_outcomes(
    circuit: Circuit,
    params=None,
    shots: int = 1024,
    seed: int | None = None,
    noise: NoiseModel | None = None,
) -> np.ndarray:
    """Measured basis-state indices, one per shot."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    bound = circuit.bind(params)
    n = bound.n_qubits
    out_rng, gate_rng, ro_rng = _streams(seed)
    u = out_rng.random(shots)
    if noise is None or not noise.has_gate_noise:
        probs = np.abs(evolve(Statevector.zero(n).amplitudes, bound.gates, n)) ** 2
        outcomes = _draw(_cdf(probs), u)
    else:
        patterns = _trajectory_patterns(bound.gates, shots, noise, gate_rng)
        keys, inverse = np.unique(patterns, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        outcomes = np.empty(shots, dtype=np.int64)
        for k, pattern in enumerate(keys):
            sel = inverse == k
            cdf = _cdf(_noisy_probabilities(bound.gates, pattern, n))
            outcomes[sel] = _draw(cdf, u[sel])
    if noise is not None:
        outcomes = _apply_readout(outcomes, n, noise, ro_rng)
    return outcomes


def sample(
    circuit: Circuit,
    params=None,
    shots: int = 1024,
    seed: int | None = None,
    noise: NoiseModel | None = None,
) -> CountsTable:
    """Shot-sample the circuit from |0...0>. Identical seeds give identical counts."""
    outcomes = sample_outcomes(circuit, params, shots, seed, noise)
    return CountsTable.from_outcomes(outcomes, circuit.n_qubits)


def sample_state(state: Statevector, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Noiseless outcome indices drawn from an already evolved state."""
    return _draw(_cdf(state.probabilities()), rng.random(shots))


# -- readout mitigation -----------------------------------------------------


class SingularCalibrationError(ValueError):
    pass


def readout_calibration(noise: NoiseModel, n_qubits: int) -> list[np.ndarray]:
    """Per-qubit assignment matrices ``M[measured, true]``."""
    p10, p01 = noise.readout_for(n_qubits)
    mats = []
    for q in range(n_qubits):
        m = np.array([[1 - p10[q], p01[q]], [p10[q], 1 - p01[q]]])
        if abs(np.linalg.det(m)) <= 1e-6:
            warnings.warn(f"readout calibration for qubit {q} is singular", RuntimeWarning, stacklevel=2)
        mats.append(m)
    return mats


def _apply_tensored(vec: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    n = len(mats)
    t = vec.reshape([2] * n)
    for q, m in enumerate(mats):
        axis = n - 1 - q
        t = np.moveaxis(np.tensordot(m, t, axes=([1], [axis])), 0, axis)
    return t.reshape(-1)


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {p >= 0, sum p = 1}."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ks > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


@dataclass(frozen=True)
class MitigatedDistribution:
    quasi: dict[str, float]
    probabilities: dict[str, float]


def mitigate_counts(counts: CountsTable, calibration: Sequence[np.ndarray]) -> MitigatedDistribution:
    """Apply the tensored inverse of the calibration to the empirical distribution."""
    n = counts.n_qubits
    if len(calibration) != n:
        raise ValueError(f"calibration covers {len(calibration)} qubits, counts have {n}")
    inverses = []
    for q, m in enumerate(calibration):
        if abs(np.linalg.det(m)) <= 1e-6:
            raise SingularCalibrationError(f"calibration matrix for qubit {q} is not invertible")
        inverses.append(np.linalg.inv(m))
    quasi = _apply_tensored(counts.to_vector(), inverses)
    proj = project_to_simplex(quasi)
    labels = [format(i, f"0{n}b") for i in range(2**n)]
    return MitigatedDistribution(
        quasi={b: float(q) for b, q in zip(labels, quasi)},
        probabilities={b: float(p) for b, p in zip(labels, proj)},
    )


def total_variation(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
