"""Variational quantum classifier: ZZ feature map, RealAmplitudes ansatz, parity readout."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .circuits import AnsatzSpec, FeatureMapSpec, FeatureScaler, real_amplitudes_ansatz, scale_features, zz_feature_map
from .optim import OptimizationResult, OptimizerConfig, cobyla_minimize
from .qsim import (
    Circuit,
    CountsTable,
    NoiseModel,
    _cdf,
    _draw,
    _streams,
    evolve,
    mitigate_counts,
    readout_calibration,
    run_exact,
    sample_outcomes,
)

EPS = 1e-9

# seed-sequence tags so training and prediction draws never share a stream
_TRAIN_STREAM = 0
_PREDICT_STREAM = 1


def parity_mask(n_qubits: int) -> np.ndarray:
    """True at basis indices with an odd number of 1 bits."""
    idx = np.arange(2**n_qubits)
    bits = (idx[:, None] >> np.arange(n_qubits)) & 1
    return bits.sum(axis=1) % 2 == 1


def parity_probability(counts: CountsTable | dict) -> float:
    """Fraction of shots whose bitstring has odd parity."""
    if isinstance(counts, CountsTable):
        entries, shots = counts.entries, counts.shots
    else:
        entries = dict(counts)
        shots = sum(entries.values())
    if shots <= 0:
        raise ValueError("counts have zero shots")
    odd = sum(c for bits, c in entries.items() if bits.count("1") % 2 == 1)
    return odd / shots


def exact_parity(probabilities: np.ndarray) -> float:
    n = int(np.log2(probabilities.size))
    return float(probabilities[parity_mask(n)].sum())


def bce_loss(p, y) -> float:
    """Mean binary cross-entropy with probabilities clamped to [EPS, 1 - EPS]."""
    p = np.clip(np.asarray(p, dtype=float), EPS, 1 - EPS)
    y = np.asarray(y, dtype=float)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


@dataclass(frozen=True)
class VqcConfig:
    depth: int = 2
    layers: int = 2
    entanglement: str = "full"
    entangler: str = "CNOT_chain"
    shots: int = 300
    exact: bool = False
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(rho_begin=1.0, rho_end=1e-3, max_evals=500))
    seed: int = 0
    noise: NoiseModel | None = None
    resilience: int = 0
    threads: int | None = None
    encoding_range: tuple[float, float] = (0.0, float(np.pi))

    def __post_init__(self):
        object.__setattr__(self, "encoding_range", tuple(float(v) for v in self.encoding_range))
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.resilience not in (0, 1):
            raise ValueError("resilience level must be 0 or 1")

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "layers": self.layers,
            "entanglement": self.entanglement,
            "entangler": self.entangler,
            "shots": self.shots,
            "exact": self.exact,
            "optimizer": self.optimizer.to_dict(),
            "seed": self.seed,
            "noise": self.noise.to_dict() if self.noise else None,
            "resilience": self.resilience,
            "encoding_range": list(self.encoding_range),
        }

    @classmethod
    def from_dict(cls, d) -> "VqcConfig":
        d = dict(d)
        if "optimizer" in d:
            d["optimizer"] = OptimizerConfig.from_dict(d["optimizer"])
        if d.get("noise") is not None:
            d["noise"] = NoiseModel.from_dict(d["noise"])
        return cls(**d)


@dataclass(frozen=True)
class VqcModel:
    feature_map: FeatureMapSpec
    ansatz: AnsatzSpec
    theta: np.ndarray
    scaler: FeatureScaler
    shots: int
    seed: int
    exact: bool = False
    noise: NoiseModel | None = None
    resilience: int = 0
    training: OptimizationResult | None = field(default=None, compare=False)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if theta.size != self.ansatz.n_parameters:
            raise ValueError(f"theta has {theta.size} entries, ansatz needs {self.ansatz.n_parameters}")
        object.__setattr__(self, "theta", theta)

    def to_json(self) -> str:
        d = {
            "feature_map": self.feature_map.to_dict(),
            "ansatz": self.ansatz.to_dict(),
            "theta": [float(t) for t in self.theta],
            "scaler": self.scaler.to_dict(),
            "shots": self.shots,
            "seed": self.seed,
            "exact": self.exact,
            "noise": self.noise.to_dict() if self.noise else None,
            "resilience": self.resilience,
        }
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "VqcModel":
        d = json.loads(text)
        return cls(
            FeatureMapSpec.from_dict(d["feature_map"]),
            AnsatzSpec.from_dict(d["ansatz"]),
            np.asarray(d["theta"], dtype=float),
            FeatureScaler.from_dict(d["scaler"]),
            int(d["shots"]),
            int(d["seed"]),
            bool(d.get("exact", False)),
            NoiseModel.from_dict(d["noise"]) if d.get("noise") else None,
            int(d.get("resilience", 0)),
        )


def row_seeds(seed: int, stream: int, m: int) -> list[int]:
    """One sampling seed per row, fixed for the lifetime of a training run."""
    return [int(s) for s in np.random.SeedSequence((seed, stream)).generate_state(m, dtype=np.uint64)]


class _Evaluator:
    """Class-1 probabilities for a fixed set of scaled rows at any theta.

    Feature states are evolved once. In shot mode each row reuses the same
    seed at every theta (common random numbers), so the loss surface does not
    re-randomize between optimizer steps.
    """

    def __init__(self, fmap, ansatz, Xs, shots, exact, noise, resilience, seeds, threads=None):
        self.n = fmap.n_qubits
        self.ansatz = real_amplitudes_ansatz(ansatz)
        self.fmap = fmap
        self.Xs = Xs
        self.shots = shots
        self.exact = exact
        self.noise = noise
        self.resilience = resilience
        self.threads = threads
        self.mask = parity_mask(self.n)
        self.seeds = seeds
        noiseless = noise is None or (not noise.has_gate_noise and not _has_readout(noise, self.n))
        self.fast = exact or noiseless
        if self.fast:
            self.states = [run_exact(zz_feature_map(fmap, x)).amplitudes for x in Xs]
            # outcome uniforms drawn exactly as the full-circuit sampler would
            self.uniforms = None if exact else [_streams(s)[0].random(shots) for s in seeds]
        else:
            self.maps = [zz_feature_map(fmap, x) for x in Xs]
            self.calibration = readout_calibration(noise, self.n) if resilience == 1 else None

    def _row(self, i: int, gates) -> float:
        if self.fast:
            probs = np.abs(evolve(self.states[i], gates, self.n)) ** 2
            if self.exact:
                return float(probs[self.mask].sum())
            outcomes = _draw(_cdf(probs), self.uniforms[i])
            return float(np.mean(self.mask[outcomes]))
        circuit = self.maps[i].compose(Circuit(self.n, list(gates)))
        outcomes = sample_outcomes(circuit, None, self.shots, self.seeds[i], self.noise)
        if self.calibration is None:
            return float(np.mean(self.mask[outcomes]))
        counts = CountsTable.from_outcomes(outcomes, self.n)
        mitigated = mitigate_counts(counts, self.calibration).probabilities
        return float(sum(p for bits, p in mitigated.items() if bits.count("1") % 2 == 1))

    def __call__(self, theta) -> np.ndarray:
        gates = self.ansatz.bind(np.asarray(theta, dtype=float)).gates
        idx = range(len(self.Xs))
        if self.threads and self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                return np.array(list(pool.map(lambda i: self._row(i, gates), idx)))
        return np.array([self._row(i, gates) for i in idx])


def _has_readout(noise: NoiseModel, n: int) -> bool:
    p10, p01 = noise.readout_for(n)
    return bool(p10.any() or p01.any())


def vqc_loss(theta, X_scaled, y, fmap: FeatureMapSpec, ansatz: AnsatzSpec, shots: int = 300, seed: int = 0,
             exact: bool = False, noise: NoiseModel | None = None, resilience: int = 0) -> float:
    """Cross-entropy of the parity readout over already scaled rows."""
    X_scaled = np.atleast_2d(np.asarray(X_scaled, dtype=float))
    if X_scaled.shape[0] == 0:
        raise ValueError("empty dataset")
    ev = _Evaluator(fmap, ansatz, X_scaled, shots, exact, noise, resilience, row_seeds(seed, _TRAIN_STREAM, len(X_scaled)))
    return bce_loss(ev(theta), y)


def vqc_train(X, y, config: VqcConfig | None = None) -> VqcModel:
    """Fit the scaler, then minimize the training loss over theta with COBYLA."""
    config = config or VqcConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y).astype(int).reshape(-1)
    if X.shape[0] != y.size:
        raise ValueError("row and label counts differ")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0/1")
    if np.unique(y).size < 2:
        raise ValueError(f"training data contains only class {int(y[0])}; a classifier needs both classes")
    n = X.shape[1]
    fmap = FeatureMapSpec(n, config.depth, config.entanglement)
    ansatz = AnsatzSpec(n, config.layers, config.entangler)
    scaler, Xs = scale_features(X, *config.encoding_range)
    ev = _Evaluator(fmap, ansatz, Xs, config.shots, config.exact, config.noise, config.resilience,
                    row_seeds(config.seed, _TRAIN_STREAM, len(Xs)), config.threads)
    theta0 = np.random.default_rng(config.seed).uniform(-np.pi, np.pi, ansatz.n_parameters)
    result = cobyla_minimize(lambda t: bce_loss(ev(t), y), theta0, (), config.optimizer)
    return VqcModel(fmap, ansatz, result.x_best, scaler, config.shots, config.seed, config.exact,
                    config.noise, config.resilience, result)


def vqc_scores(model: VqcModel, X, threads: int | None = None) -> np.ndarray:
    """Class-1 (odd parity) probabilities at the trained theta."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.feature_map.n_qubits:
        raise ValueError(f"expected {model.feature_map.n_qubits} columns, got {X.shape[1]}")
    Xs = model.scaler.transform(X)
    ev = _Evaluator(model.feature_map, model.ansatz, Xs, model.shots, model.exact, model.noise, model.resilience,
                    row_seeds(model.seed, _PREDICT_STREAM, len(Xs)), threads)
    return ev(model.theta)


def vqc_predict(model: VqcModel, X, threads: int | None = None) -> np.ndarray:
    return (vqc_scores(model, X, threads) >= 0.5).astype(int)


def exact_scores(model: VqcModel, X) -> np.ndarray:
    """Infinite-shot parity probabilities from the statevector."""
    Xs = model.scaler.transform(X)
    circ = real_amplitudes_ansatz(model.ansatz).bind(model.theta)
    mask = parity_mask(model.feature_map.n_qubits)
    out = []
    for x in Xs:
        state = run_exact(circ, initial=run_exact(zz_feature_map(model.feature_map, x)))
        out.append(float(state.probabilities()[mask].sum()))
    return np.array(out)

