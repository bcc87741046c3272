"""Command-line entry point: ``brainqml <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (a JSON pipeline config),
``--seed``, ``--threads`` and ``--output-dir``; explicit flags override the
file. The output directory defaults to ``$BRAINQML_OUTPUT_DIR`` or
``./brainqml-out``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import kernel_svm as ks
from .circuits import FeatureMapSpec, scale_features
from .netdata import write_manifest
from .optim import OptimizerConfig
from .pca import explained_variance_report, factorial_plane, loadings, loadings_csv, pca_fit, pca_transform
from .pipeline import (
    PipelineConfig,
    PipelineError,
    classify,
    dataset_from_csv,
    dataset_to_csv,
    distribution_json,
    emit_distribution_study,
    load_dataset,
    run_pipeline,
)
from .qsim import NoiseModel
from .stats import compute_metrics, mann_whitney_u, rank_rois, rois_csv, train_test_split, zscore_filter
from .synth import SyntheticCohortSpec, synth_cohort


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int, help="seed for every stochastic stage")
    p.add_argument("--threads", type=int, help="worker threads for per-subject and per-entry work")
    p.add_argument("--output-dir", help="run directory (default $BRAINQML_OUTPUT_DIR or ./brainqml-out)")


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="subject manifest CSV (subject_id,cohort,label,matrix_path)")
    p.add_argument("--cohort", choices=("male", "female"))
    p.add_argument("--effect-size", type=float, help="synthetic cohort effect size (no manifest)")
    p.add_argument("--n-per-class", type=int, help="synthetic subjects per class")


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--classifier", choices=("vqc", "qsvm", "svm", "svm-classical"))
    p.add_argument("-k", "--n-components", type=int)
    p.add_argument("--depth", type=int, help="feature-map repetitions")
    p.add_argument("--layers", type=int, help="ansatz entangling layers")
    p.add_argument("--shots", type=int, help="VQC shots per circuit evaluation")
    p.add_argument("--exact", action="store_true", default=None, help="VQC infinite-shot mode")
    p.add_argument("--kernel-shots", type=int, help="shots per quantum-kernel entry (0 = exact)")
    p.add_argument("--max-evals", type=int)
    p.add_argument("--C", type=float)
    p.add_argument("--encoding-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--p10", type=float, help="readout P(1|0)")
    p.add_argument("--p01", type=float, help="readout P(0|1)")
    p.add_argument("--depol1", type=float, help="1-qubit depolarizing probability")
    p.add_argument("--depol2", type=float, help="2-qubit depolarizing probability")
    p.add_argument("--resilience", type=int, choices=(0, 1))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brainqml", description="Quantum ML on brain connectivity networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic cohort as a manifest + matrix files")
    _common(p)
    _data_flags(p)
    p.add_argument("--n-nodes", type=int, default=27)

    p = sub.add_parser("evc", help="eigenvector centrality per subject -> evc.csv")
    _common(p)
    _data_flags(p)

    p = sub.add_parser("pca", help="PCA of a feature CSV -> scree/loadings/scores")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("-k", "--n-components", type=int, default=4)

    p = sub.add_parser("split", help="z-filter and stratified train/test split")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--zscore", type=float, default=3.0, help="z threshold (0 disables)")

    p = sub.add_parser("train", help="PCA on train, fit a classifier, evaluate on test")
    _common(p)
    _model_flags(p)
    p.add_argument("--train", required=True, help="train feature CSV")
    p.add_argument("--test", required=True, help="test feature CSV")

    p = sub.add_parser("kernel", help="kernel matrix of a feature CSV -> kernel.csv")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=("quantum", "linear", "rbf"), default="quantum")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--shots", type=int, default=0, help="0 = exact fidelity kernel")
    p.add_argument("--gamma", type=float)
    p.add_argument("--encoding-range", type=float, nargs=2, metavar=("LO", "HI"))

    p = sub.add_parser("stats", help="Mann-Whitney U per ROI and discriminative ROI ranking")
    _common(p)
    p.add_argument("--input", required=True, help="EVC feature CSV")
    p.add_argument("--loadings", help="loadings CSV (feature,loading); default: PC1 of the input")
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("pipeline", help="full run: data -> EVC -> filter -> split -> PCA -> classifier")
    _common(p)
    _data_flags(p)
    _model_flags(p)
    p.add_argument("--emit-counts", action="store_true", default=None)

    p = sub.add_parser("distribution", help="ideal / noisy / mitigated output distributions")
    _common(p)
    p.add_argument("--circuit", choices=("ghz", "vqc"), default="ghz")
    p.add_argument("--n-qubits", type=int, default=3)
    p.add_argument("--x", type=float, nargs="*", help="feature vector for --circuit vqc")
    p.add_argument("--shots", type=int, default=10_000)
    p.add_argument("--p10", type=float, default=0.05)
    p.add_argument("--p01", type=float, default=0.05)
    p.add_argument("--depol1", type=float, default=0.0)
    p.add_argument("--depol2", type=float, default=0.0)
    p.add_argument("--resilience", type=int, choices=(0, 1), default=1)
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """Defaults, then the JSON file, then explicit flags."""
    base: dict = {}
    if getattr(args, "config", None):
        base = json.loads(Path(args.config).read_text())
    g = lambda name: getattr(args, name, None)  # noqa: E731
    simple = {
        "seed": g("seed"),
        "threads": g("threads"),
        "output_dir": g("output_dir"),
        "manifest": g("manifest"),
        "cohort": g("cohort"),
        "classifier": g("classifier"),
        "n_components": g("n_components"),
        "depth": g("depth"),
        "layers": g("layers"),
        "shots": g("shots"),
        "exact": g("exact"),
        "C": g("C"),
        "resilience": g("resilience"),
        "emit_counts": g("emit_counts"),
    }
    base.update({k: v for k, v in simple.items() if v is not None})
    if g("encoding_range") is not None:
        base["encoding_range"] = list(g("encoding_range"))
    if g("kernel_shots") is not None:
        base["kernel_shots"] = g("kernel_shots") or None
    if g("max_evals") is not None:
        opt = dict(base.get("optimizer") or OptimizerConfig(rho_begin=1.0, rho_end=1e-3, max_evals=500).to_dict())
        opt["max_evals"] = g("max_evals")
        base["optimizer"] = opt
    noise_flags = {"readout_p10": g("p10"), "readout_p01": g("p01"), "depolarizing_1q": g("depol1"), "depolarizing_2q": g("depol2")}
    if any(v is not None for v in noise_flags.values()):
        noise = dict(base.get("noise") or {})
        noise.update({k: v for k, v in noise_flags.items() if v is not None})
        base["noise"] = noise
    if g("effect_size") is not None or g("n_per_class") is not None or g("n_nodes") is not None:
        syn = dict(base.get("synthetic") or {})
        if g("effect_size") is not None:
            syn["effect_size"] = g("effect_size")
        if g("n_per_class") is not None:
            syn["counts"] = {c: {"HC": g("n_per_class"), "PSP": g("n_per_class")} for c in (syn.get("counts") or {"female": 0})}
        if g("n_nodes") is not None:
            syn["n_nodes"] = g("n_nodes")
        base["synthetic"] = syn
    if "synthetic" in base and base.get("seed") is not None:
        base["synthetic"].setdefault("seed", base["seed"])
    return PipelineConfig.from_dict(base)


def _out(config: PipelineConfig) -> Path:
    d = Path(config.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _print(msg: str) -> None:
    print(msg, file=sys.stdout)


def cmd_synth(args, config):
    spec = config.synthetic or SyntheticCohortSpec(seed=config.seed)
    manifest = write_manifest(synth_cohort(spec), _out(config))
    _print(f"wrote {manifest}")


def cmd_evc(args, config):
    ds = load_dataset(config)
    path = _out(config) / "evc.csv"
    path.write_text(dataset_to_csv(ds))
    _print(f"wrote {path} ({len(ds)} subjects x {len(ds.feature_names)} ROIs)")


def cmd_pca(args, config):
    ds = dataset_from_csv(Path(args.input).read_text())
    model = pca_fit(ds.X, args.n_components, ds.feature_names)
    out = _out(config)
    (out / "scree.csv").write_text(explained_variance_report(model).to_csv())
    (out / "loadings.csv").write_text(loadings_csv(loadings(model, 0)))
    names = [f"PC{i + 1}" for i in range(model.k)]
    (out / "scores.csv").write_text(dataset_to_csv(ds.with_features(pca_transform(model, ds.X), names)))
    if model.k >= 2:
        lines = ["feature,pc1,pc2"] + [f"{n},{a!r},{b!r}" for n, a, b in factorial_plane(model, 0, 1)]
        (out / "factorial_plane.csv").write_text("\n".join(lines) + "\n")
    ratios = ", ".join(f"{r:.3f}" for r in model.explained_ratio)
    _print(f"explained variance ratios: {ratios}")


def cmd_split(args, config):
    ds = dataset_from_csv(Path(args.input).read_text())
    if args.zscore > 0:
        ds = ds.subset(zscore_filter(ds.X, args.zscore))
    train, test = train_test_split(ds, args.train_fraction, config.seed, config.stratify)
    out = _out(config)
    (out / "train.csv").write_text(dataset_to_csv(train))
    (out / "test.csv").write_text(dataset_to_csv(test))
    _print(f"train {len(train)} / test {len(test)}")


def cmd_train(args, config):
    train = dataset_from_csv(Path(args.train).read_text())
    test = dataset_from_csv(Path(args.test).read_text())
    k = min(config.n_components, train.X.shape[1])
    if train.X.shape[1] > k:
        model = pca_fit(train.X, k, train.feature_names)
        Ztr, Zte = pca_transform(model, train.X), pca_transform(model, test.X)
    else:
        Ztr, Zte = train.X, test.X
    res = classify(config, Ztr, train.y, Zte)
    report = compute_metrics(test.y, res["pred"], res["scores"])
    out = _out(config)
    (out / "metrics.json").write_text(report.to_json() + "\n")
    (out / "roc.csv").write_text(report.roc_csv())
    if config.classifier == "vqc":
        (out / "model.json").write_text(res["model"].to_json() + "\n")
        (out / "training_curve.csv").write_text(res["model"].training.curve_csv())
    _print(f"{config.classifier}: accuracy {report.accuracy:.3f} auc {report.auc}")


def cmd_kernel(args, config):
    ds = dataset_from_csv(Path(args.input).read_text())
    lo, hi = args.encoding_range or config.encoding_range
    if args.kind == "quantum":
        _, X = scale_features(ds.X, lo, hi)
        fmap = FeatureMapSpec(X.shape[1], args.depth)
        if args.shots:
            K = ks.quantum_kernel_sampled(X, X, fmap, args.shots, config.seed, threads=config.threads)
        else:
            K = ks.quantum_kernel_exact(X, X, fmap, config.threads)
    else:
        X = ds.X
        gamma = args.gamma if args.gamma is not None else ks.default_gamma(X)
        K = ks.classical_kernel(args.kind, X, X, gamma if args.kind == "rbf" else None)
    path = _out(config) / "kernel.csv"
    path.write_text(ks.KernelMatrix(K.values, ds.subject_ids, ds.subject_ids).to_csv())
    _print(f"wrote {path}")


def cmd_stats(args, config):
    ds = dataset_from_csv(Path(args.input).read_text())
    if args.loadings:
        rows = Path(args.loadings).read_text().strip().splitlines()[1:]
        load = {r.split(",")[0]: float(r.split(",")[1]) for r in rows}
    else:
        load = dict(loadings(pca_fit(ds.X, 1, ds.feature_names), 0))
    psp = {n: ds.X[ds.y == 1, i] for i, n in enumerate(ds.feature_names)}
    hc = {n: ds.X[ds.y == 0, i] for i, n in enumerate(ds.feature_names)}
    out = _out(config)
    lines = ["roi,U,U_psp,U_hc,p_value,method"]
    for n in ds.feature_names:
        r = mann_whitney_u(psp[n], hc[n])
        lines.append(f"{n},{r.U!r},{r.U_x!r},{r.U_y!r},{r.p_value!r},{r.method}")
    (out / "mann_whitney.csv").write_text("\n".join(lines) + "\n")
    hits = rank_rois(load, psp, hc, args.alpha)
    (out / "rois.csv").write_text(rois_csv(hits))
    _print(f"{len(hits)} ROIs with p < {args.alpha}")


def cmd_pipeline(args, config):
    result = run_pipeline(config)
    m = result.metrics
    _print(f"{config.classifier}: accuracy {m.accuracy:.3f} auc {m.auc} -> {config.output_dir}")


def cmd_distribution(args, config):
    if args.circuit == "ghz":
        spec = {"kind": "ghz", "n_qubits": args.n_qubits}
    else:
        x = args.x if args.x else list(np.linspace(0.5, 2.5, args.n_qubits))
        spec = {"kind": "vqc", "x": x, "depth": config.depth, "layers": config.layers}
    noise = NoiseModel(args.depol1, args.depol2, args.p10, args.p01)
    study = emit_distribution_study(spec, noise, args.shots, args.resilience, config.seed)
    path = _out(config) / "distribution.json"
    path.write_text(distribution_json(study))
    tv = study["total_variation_to_exact"]
    _print(f"TV to exact: noisy {tv['noisy']:.4f} mitigated {tv['mitigated']:.4f} -> {path}")


COMMANDS = {
    "synth": cmd_synth,
    "evc": cmd_evc,
    "pca": cmd_pca,
    "split": cmd_split,
    "train": cmd_train,
    "kernel": cmd_kernel,
    "stats": cmd_stats,
    "pipeline": cmd_pipeline,
    "distribution": cmd_distribution,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        COMMANDS[args.command](args, config)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
