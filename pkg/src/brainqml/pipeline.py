"""End-to-end runs: data -> EVC -> z-filter -> split -> PCA -> scale -> classifier -> metrics."""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import kernel_svm as ks
from .circuits import AnsatzSpec, FeatureMapSpec, real_amplitudes_ansatz, scale_features, zz_feature_map
from .netdata import LABELS, LabeledDataset, build_evc_dataset, load_manifest
from .optim import OptimizerConfig
from .pca import explained_variance_report, loadings, loadings_csv, pca_fit, pca_transform
from .qsim import (
    Circuit,
    GateOp,
    NoiseModel,
    mitigate_counts,
    readout_calibration,
    run_exact,
    sample,
    total_variation,
)
from .stats import MetricsReport, compute_metrics, rank_rois, rois_csv, train_test_split, zscore_filter
from .synth import SyntheticCohortSpec, synth_cohort
from .vqc import VqcConfig, vqc_scores, vqc_train

CLASSIFIERS = ("vqc", "qsvm", "svm")
OUTPUT_ENV = "BRAINQML_OUTPUT_DIR"


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, "brainqml-out")


class PipelineError(RuntimeError):
    """A stage failure; ``stage`` names where it happened."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    manifest: str | None = None
    synthetic: SyntheticCohortSpec | None = None
    cohort: str | None = None
    n_components: int = 4
    zscore_threshold: float | None = 3.0  # None disables the filter
    train_fraction: float = 0.7
    stratify: bool = True
    classifier: str = "vqc"
    depth: int = 2
    layers: int = 2
    shots: int = 300
    exact: bool = False
    optimizer: OptimizerConfig = field(default_factory=lambda: OptimizerConfig(rho_begin=1.0, rho_end=1e-3, max_evals=500))
    kernel_shots: int | None = 1024  # None: exact fidelity kernel
    svm_kernel: str = "rbf"
    gamma: float | None = None
    C: float = 1.0
    noise: NoiseModel | None = None
    resilience: int = 0
    emit_counts: bool = False
    encoding_range: tuple[float, float] = (0.0, float(np.pi))
    seed: int = 0
    threads: int | None = None
    output_dir: str = field(default_factory=default_output_dir)

    def __post_init__(self):
        kind = "svm" if self.classifier == "svm-classical" else self.classifier
        if kind not in CLASSIFIERS:
            raise ValueError(f"classifier must be one of {CLASSIFIERS}, got {self.classifier!r}")
        object.__setattr__(self, "classifier", kind)
        object.__setattr__(self, "encoding_range", tuple(float(v) for v in self.encoding_range))
        if self.resilience not in (0, 1):
            raise ValueError("resilience must be 0 or 1")
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.manifest is None and self.synthetic is None:
            object.__setattr__(self, "synthetic", SyntheticCohortSpec(seed=self.seed))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (OptimizerConfig, SyntheticCohortSpec, NoiseModel)):
                v = v.to_dict()
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        if d.get("optimizer") is not None:
            d["optimizer"] = OptimizerConfig.from_dict(d["optimizer"])
        else:
            d.pop("optimizer", None)
        if d.get("synthetic") is not None:
            syn = dict(d["synthetic"])
            syn.setdefault("seed", d.get("seed", 0))
            d["synthetic"] = SyntheticCohortSpec.from_dict(syn)
        if d.get("noise") is not None:
            d["noise"] = NoiseModel.from_dict(d["noise"])
        return cls(**d)

    def with_overrides(self, **kw) -> "PipelineConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


# -- dataset CSV I/O ---------------------------------------------------------

_ID_COLS = ["subject_id", "label", "cohort"]
_LABEL_NAMES = {v: k for k, v in LABELS.items()}


def dataset_to_csv(ds: LabeledDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_ID_COLS + list(ds.feature_names))
    cohorts = ds.cohorts or ("",) * len(ds)
    for sid, y, c, row in zip(ds.subject_ids, ds.y, cohorts, ds.X):
        w.writerow([sid, _LABEL_NAMES[int(y)], c] + [repr(float(v)) for v in row])
    return buf.getvalue()


def dataset_from_csv(text: str) -> LabeledDataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:3] != _ID_COLS:
        raise ValueError(f"dataset CSV must start with columns {_ID_COLS}")
    body = rows[1:]
    return LabeledDataset(
        np.array([[float(v) for v in r[3:]] for r in body]).reshape(len(body), len(rows[0]) - 3),
        np.array([LABELS[r[1]] for r in body]),
        tuple(rows[0][3:]),
        tuple(r[0] for r in body),
        tuple(r[2] for r in body),
    )


# -- pipeline ----------------------------------------------------------------


@dataclass
class PipelineResult:
    metrics: MetricsReport
    outputs: dict[str, Path]
    details: dict


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


def load_dataset(config: PipelineConfig) -> LabeledDataset:
    if config.manifest is not None:
        subjects = load_manifest(config.manifest, config.cohort)
    else:
        subjects = synth_cohort(config.synthetic)
        if config.cohort is not None:
            subjects = [s for s in subjects if s.cohort == config.cohort]
    if not subjects:
        raise ValueError("no subjects after cohort filter")
    return build_evc_dataset(subjects, threads=config.threads)


def classify(config: PipelineConfig, Ztr, ytr, Zte) -> dict:
    """Train the configured classifier on PCA scores and score the test rows.

    Returns test scores, predictions and classifier-specific artifacts.
    """
    out: dict = {}
    if config.classifier == "vqc":
        vcfg = VqcConfig(config.depth, config.layers, shots=config.shots, exact=config.exact,
                         optimizer=config.optimizer, seed=config.seed, noise=config.noise,
                         resilience=config.resilience, threads=config.threads,
                         encoding_range=config.encoding_range)
        model = vqc_train(Ztr, ytr, vcfg)
        scores = vqc_scores(model, Zte, config.threads)
        out.update(model=model, scores=scores, pred=(scores >= 0.5).astype(int))
        return out
    scaler, Str = scale_features(Ztr, *config.encoding_range)
    Ste = scaler.transform(Zte)
    if config.classifier == "qsvm":
        fmap = FeatureMapSpec(Ztr.shape[1], config.depth)
        if config.kernel_shots is None:
            Ktr = ks.quantum_kernel_exact(Str, Str, fmap, config.threads)
            Kte = ks.KernelMatrix(ks.quantum_kernel_exact_raw(Ste, Str, fmap, config.threads))
        else:
            Ktr = ks.quantum_kernel_sampled(Str, Str, fmap, config.kernel_shots, config.seed, config.noise, config.threads)
            Kte = ks.quantum_kernel_sampled(Ste, Str, fmap, config.kernel_shots, config.seed + 1, config.noise, config.threads)
        out.update(K_train=Ktr, K_test=Kte)
    else:
        gamma = config.gamma if config.gamma is not None else ks.default_gamma(Str)
        Ktr = ks.classical_kernel(config.svm_kernel, Str, Str, gamma if config.svm_kernel == "rbf" else None)
        Kte = ks.classical_kernel(config.svm_kernel, Ste, Str, gamma if config.svm_kernel == "rbf" else None)
        out["gamma"] = gamma
    model, scores, pred = ks.fit_predict_precomputed(Ktr.values, ytr, Kte.values, config.C)
    out.update(model=model, scores=scores, pred=pred)
    return out


def _write(path: Path, text: str, outputs: dict, key: str) -> None:
    path.write_text(text)
    outputs[key] = path


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage and write the run directory; byte-identical for fixed seeds."""
    out_dir = Path(config.output_dir)
    with _Stage("setup"):
        out_dir.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, Path] = {}
    _write(out_dir / "config.resolved.json", config.to_json() + "\n", outputs, "config")
    with _Stage("load"):
        ds = load_dataset(config)
    with _Stage("zfilter"):
        n_before = len(ds)
        if config.zscore_threshold is not None:
            ds = ds.subset(zscore_filter(ds.X, config.zscore_threshold))
    with _Stage("split"):
        train, test = train_test_split(ds, config.train_fraction, config.seed, config.stratify)
    with _Stage("pca"):
        pca = pca_fit(train.X, config.n_components, train.feature_names)
        Ztr, Zte = pca_transform(pca, train.X), pca_transform(pca, test.X)
    with _Stage("train"):
        res = classify(config, Ztr, train.y, Zte)
    with _Stage("metrics"):
        report = compute_metrics(test.y, res["pred"], res["scores"])
        pc1 = dict(loadings(pca, 0))
        psp = {r: ds.X[ds.y == 1, i] for i, r in enumerate(ds.feature_names)}
        hc = {r: ds.X[ds.y == 0, i] for i, r in enumerate(ds.feature_names)}
        rois = rank_rois(pc1, psp, hc)
    with _Stage("write"):
        details = {
            "classifier": config.classifier,
            "n_subjects": n_before,
            "n_after_filter": len(ds),
            "n_train": len(train),
            "n_test": len(test),
            "test_ids": list(test.subject_ids),
            "test_scores": [float(s) for s in res["scores"]],
        }
        if config.classifier == "vqc":
            m = res["model"]
            details.update(train_loss=m.training.f_best, n_evals=m.training.n_evals, optimizer_status=m.training.status)
            _write(out_dir / "training_curve.csv", m.training.curve_csv(), outputs, "training_curve")
            _write(out_dir / "model.json", m.to_json() + "\n", outputs, "model")
            if config.emit_counts:
                _write(out_dir / "counts.json", _vqc_counts_json(m, Zte, test.subject_ids) + "\n", outputs, "counts")
        else:
            details.update(psd_clip=res["model"].psd_clip, n_support=int(res["model"].support.size),
                           bias=res["model"].bias)
            if "gamma" in res:
                details["gamma"] = res["gamma"]
        if config.classifier == "qsvm":
            tr_ids = train.subject_ids
            _write(out_dir / "kernel_train.csv", ks.KernelMatrix(res["K_train"].values, tr_ids, tr_ids).to_csv(), outputs, "kernel_train")
            _write(out_dir / "kernel_test.csv", ks.KernelMatrix(res["K_test"].values, test.subject_ids, tr_ids).to_csv(), outputs, "kernel_test")
        metrics = report.to_dict()
        metrics["run"] = details
        _write(out_dir / "metrics.json", json.dumps(metrics, indent=2, sort_keys=True) + "\n", outputs, "metrics")
        _write(out_dir / "scree.csv", explained_variance_report(pca).to_csv(), outputs, "scree")
        _write(out_dir / "loadings.csv", loadings_csv(loadings(pca, 0)), outputs, "loadings")
        _write(out_dir / "roc.csv", report.roc_csv(), outputs, "roc")
        _write(out_dir / "rois.csv", rois_csv(rois), outputs, "rois")
    return PipelineResult(report, outputs, details)


def _vqc_counts_json(model, Zte, ids) -> str:
    """Per-test-subject shot counts of the trained circuit (noise as configured)."""
    Xs = model.scaler.transform(Zte)
    ansatz = real_amplitudes_ansatz(model.ansatz).bind(model.theta)
    seeds = np.random.SeedSequence((model.seed, 2)).generate_state(len(Xs), dtype=np.uint64)
    out = {}
    for sid, x, s in zip(ids, Xs, seeds):
        counts = sample(zz_feature_map(model.feature_map, x).compose(ansatz), None, model.shots, int(s), model.noise)
        out[sid] = json.loads(counts.to_json())
    return json.dumps(out, indent=2, sort_keys=True)


# -- distribution study ------------------------------------------------------


def ghz_circuit(n_qubits: int) -> Circuit:
    gates = [GateOp("H", (0,))] + [GateOp("CNOT", (q, q + 1)) for q in range(n_qubits - 1)]
    return Circuit(n_qubits, gates)


def build_study_circuit(spec: dict) -> Circuit:
    """``{"kind": "ghz", "n_qubits": n}``, ``{"kind": "vqc", "x": [...], "theta": [...], "depth", "layers"}``,
    or ``{"kind": "circuit", "circuit": <circuit JSON object>}``."""
    kind = spec.get("kind", "ghz")
    if kind == "ghz":
        return ghz_circuit(int(spec.get("n_qubits", 3)))
    if kind == "vqc":
        x = np.asarray(spec["x"], dtype=float)
        fmap = FeatureMapSpec(x.size, int(spec.get("depth", 2)))
        ansatz = AnsatzSpec(x.size, int(spec.get("layers", 2)))
        theta = spec.get("theta")
        if theta is None:
            theta = np.zeros(ansatz.n_parameters)
        return zz_feature_map(fmap, x).compose(real_amplitudes_ansatz(ansatz).bind(theta))
    if kind == "circuit":
        return Circuit.from_json(json.dumps(spec["circuit"]))
    raise ValueError(f"unknown circuit kind {kind!r}")


def _cumulative(dist: dict[str, float]) -> dict[str, float]:
    total, out = 0.0, {}
    for k in sorted(dist):
        total += dist[k]
        out[k] = min(total, 1.0)
    return out


def _dense(dist: dict[str, float], n: int) -> dict[str, float]:
    return {format(i, f"0{n}b"): float(dist.get(format(i, f"0{n}b"), 0.0)) for i in range(2**n)}


def emit_distribution_study(
    circuit_spec: dict,
    noise: NoiseModel | None = None,
    shots: int = 10_000,
    resilience: int = 1,
    seed: int = 0,
) -> dict:
    """Ideal, noisy and readout-mitigated distributions of one bound circuit.

    ``ideal`` is sampled without noise using the same seed as ``noisy``, so a
    zero-noise model reproduces it exactly; ``exact`` holds the statevector
    probabilities. ``reported`` is what a run at the given resilience level
    returns: raw noisy counts at level 0, mitigated probabilities at level 1.
    """
    if resilience not in (0, 1):
        raise ValueError("resilience must be 0 or 1")
    noise = noise or NoiseModel()
    circ = build_study_circuit(circuit_spec)
    n = circ.n_qubits
    exact = run_exact(circ).probabilities()
    ideal = sample(circ, None, shots, seed)
    noisy = sample(circ, None, shots, seed, noise)
    mit = mitigate_counts(noisy, readout_calibration(noise, n))
    dists = {
        "exact": {format(i, f"0{n}b"): float(p) for i, p in enumerate(exact)},
        "ideal": _dense({k: v / shots for k, v in ideal.entries.items()}, n),
        "noisy": _dense({k: v / shots for k, v in noisy.entries.items()}, n),
        "mitigated": mit.probabilities,
        "quasi": mit.quasi,
    }
    return {
        "circuit": json.loads(circ.to_json()),
        "shots": shots,
        "seed": seed,
        "noise": noise.to_dict(),
        "resilience": resilience,
        "distributions": dists,
        "cumulative": {k: _cumulative(v) for k, v in dists.items() if k != "quasi"},
        "reported": dists["mitigated"] if resilience == 1 else dists["noisy"],
        "total_variation_to_exact": {
            k: total_variation(dists[k], dists["exact"]) for k in ("ideal", "noisy", "mitigated")
        },
    }


def distribution_json(study: dict) -> str:
    return json.dumps(study, indent=2, sort_keys=True) + "\n"

