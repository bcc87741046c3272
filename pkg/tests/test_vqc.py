import math

import numpy as np
import pytest

from brainqml.circuits import AnsatzSpec, FeatureMapSpec, real_amplitudes_ansatz, zz_feature_map
from brainqml.optim import OptimizerConfig
from brainqml.qsim import CountsTable, NoiseModel, sample_outcomes
from brainqml.vqc import (
    VqcConfig,
    VqcModel,
    bce_loss,
    exact_scores,
    parity_probability,
    row_seeds,
    vqc_loss,
    vqc_predict,
    vqc_scores,
    vqc_train,
)
from oracles import binomial_sigma, circuit_unitary, zz_map_gates

ENCODE = (2.0, math.pi)


def _blobs(seed, m=40):
    rng = np.random.default_rng(seed)
    h = m // 2
    X = np.r_[rng.normal([-1, -1], 0.3, (h, 2)), rng.normal([1, 1], 0.3, (h, 2))]
    return X, np.r_[np.zeros(h, int), np.ones(h, int)]


def test_parity_examples():
    assert parity_probability({"00": 50, "11": 50}) == 0.0
    assert parity_probability({"01": 30, "10": 30, "00": 40}) == pytest.approx(0.6)
    assert parity_probability({"00": 25, "01": 25, "10": 25, "11": 25}) == 0.5
    with pytest.raises(ValueError):
        parity_probability({})
    table = CountsTable.from_outcomes(np.array([0, 1, 3, 2, 2]), 2)
    assert parity_probability(table) == pytest.approx(3 / 5)


def test_loss_examples():
    assert bce_loss([0.5, 0.5], [0, 1]) == pytest.approx(math.log(2))
    assert bce_loss([1.0, 0.0], [1, 0]) == pytest.approx(-math.log(1 - 1e-9), abs=1e-12)
    # clamping keeps a confidently wrong prediction finite
    assert bce_loss([0.0], [1]) == pytest.approx(-math.log(1e-9))
    by_hand = -(math.log(0.8) + math.log(1 - 0.3)) / 2
    assert bce_loss([0.8, 0.3], [1, 0]) == pytest.approx(by_hand)


def test_exact_loss_against_dense_circuit():
    fm, an = FeatureMapSpec(2, 2), AnsatzSpec(2, 2)
    theta = np.random.default_rng(1).uniform(-math.pi, math.pi, an.n_parameters)
    Xs = np.array([[0.4, 2.5], [2.9, 1.1]])
    y = np.array([0, 1])
    ps = []
    for x in Xs:
        gates = zz_map_gates(x, 2, fm.pairs())
        for t in range(3):
            if t:
                gates.append(("CNOT", (0, 1), None))
            gates += [("RY", (i,), theta[2 * t + i]) for i in range(2)]
        amp = circuit_unitary(gates, 2)[:, 0]
        ps.append(abs(amp[1]) ** 2 + abs(amp[2]) ** 2)
    ref = bce_loss(ps, y)
    got = vqc_loss(theta, Xs, y, fm, an, exact=True)
    assert abs(got - ref) < 1e-10


def test_training_on_blobs_reaches_high_accuracy():
    X, y = _blobs(0)
    model = vqc_train(X, y, VqcConfig(encoding_range=ENCODE))
    assert model.training.n_evals <= 500
    assert (vqc_predict(model, X) == y).mean() >= 0.9
    losses = model.training.best_so_far()
    assert losses[-1] < losses[0]


def test_single_class_rejected():
    X, _ = _blobs(1)
    with pytest.raises(ValueError, match="only class 1"):
        vqc_train(X, np.ones(40, int))


def test_training_is_deterministic():
    X, y = _blobs(2, 16)
    cfg = VqcConfig(encoding_range=ENCODE, optimizer=OptimizerConfig(max_evals=60), seed=5)
    a, b = vqc_train(X, y, cfg), vqc_train(X, y, cfg)
    assert np.array_equal(a.theta, b.theta)
    assert a.training.history == b.training.history
    assert np.array_equal(vqc_scores(a, X), vqc_scores(b, X))


def test_shot_scores_within_binomial_band_of_exact():
    X, y = _blobs(3, 12)
    model = vqc_train(X, y, VqcConfig(encoding_range=ENCODE, optimizer=OptimizerConfig(max_evals=30), shots=4000))
    exact = exact_scores(model, X)
    sampled = vqc_scores(model, X)
    for p, s in zip(exact, sampled):
        assert abs(s - p) <= 4 * binomial_sigma(p, 4000) + 1e-12


def test_fast_scores_equal_full_circuit_sampling():
    X, y = _blobs(4, 10)
    model = vqc_train(X, y, VqcConfig(encoding_range=ENCODE, optimizer=OptimizerConfig(max_evals=20), shots=257, seed=3))
    Xs = model.scaler.transform(X)
    ansatz = real_amplitudes_ansatz(model.ansatz).bind(model.theta)
    seeds = row_seeds(model.seed, 1, len(X))
    ref = []
    for x, s in zip(Xs, seeds):
        outcomes = sample_outcomes(zz_feature_map(model.feature_map, x).compose(ansatz), None, model.shots, s)
        ref.append(parity_probability(CountsTable.from_outcomes(outcomes, 2)))
    assert np.array_equal(vqc_scores(model, X), np.array(ref))


def test_readout_mitigation_moves_scores_toward_exact():
    X, y = _blobs(5, 8)
    base = vqc_train(X, y, VqcConfig(encoding_range=ENCODE, exact=True, optimizer=OptimizerConfig(max_evals=40)))
    noise = NoiseModel(readout_p10=0.08, readout_p01=0.12)
    kw = dict(feature_map=base.feature_map, ansatz=base.ansatz, theta=base.theta, scaler=base.scaler, shots=20000, seed=1)
    raw = vqc_scores(VqcModel(noise=noise, resilience=0, **kw), X)
    mit = vqc_scores(VqcModel(noise=noise, resilience=1, **kw), X)
    exact = exact_scores(base, X)
    assert np.mean(np.abs(mit - exact)) < np.mean(np.abs(raw - exact))
    assert np.max(np.abs(mit - exact)) < 0.03


def test_model_json_roundtrip():
    X, y = _blobs(6, 10)
    model = vqc_train(X, y, VqcConfig(encoding_range=ENCODE, optimizer=OptimizerConfig(max_evals=15),
                                      noise=NoiseModel(readout_p10=0.01), resilience=1))
    back = VqcModel.from_json(model.to_json())
    assert np.array_equal(back.theta, model.theta)
    assert (back.feature_map, back.ansatz, back.noise, back.resilience) == (
        model.feature_map, model.ansatz, model.noise, model.resilience)
    assert np.array_equal(vqc_scores(back, X), vqc_scores(model, X))
    with pytest.raises(ValueError):
        VqcModel(model.feature_map, model.ansatz, model.theta[:-1], model.scaler, 10, 0)


def test_config_validation_and_roundtrip():
    cfg = VqcConfig(depth=1, layers=3, shots=99, noise=NoiseModel(depolarizing_1q=0.01), encoding_range=ENCODE)
    assert VqcConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        VqcConfig(shots=0)
    with pytest.raises(ValueError):
        VqcConfig(resilience=2)


def test_column_mismatch_at_prediction():
    X, y = _blobs(7, 8)
    model = vqc_train(X, y, VqcConfig(optimizer=OptimizerConfig(max_evals=10)))
    with pytest.raises(ValueError, match="columns"):
        vqc_scores(model, np.ones((2, 3)))
