"""Synthetic connectivity cohorts from a latent-factor correlation model.

Each subject's correlation matrix comes from node loadings ``L`` (n x f) and
unique variances ``psi``: ``C = D^-1/2 (L L' + diag(psi)) D^-1/2``. Subject
loadings scatter around a cohort-wide template; PSP subjects additionally
have the template loadings of a fixed ROI subset scaled by
``1 + effect_size``, which strengthens those nodes' coupling to the rest of
the network. With ``effect_size = 0`` the two
classes share one distribution.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netdata import COHORTS, LABELS, ConnectivityMatrix, SubjectRecord, default_node_names


def _default_counts() -> dict:
    return {"female": {"HC": 20, "PSP": 20}}


@dataclass(frozen=True)
class SyntheticCohortSpec:
    counts: dict = field(default_factory=_default_counts)  # cohort -> label -> subjects
    n_nodes: int = 27
    effect_size: float = 1.0
    effect_rois: tuple[int, ...] | None = None
    n_factors: int = 3
    subject_sd: float = 0.15
    timepoints: int | None = None  # sample correlations from this many time points
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 4:
            raise ValueError("need at least 4 nodes")
        if self.effect_size < 0:
            raise ValueError("effect_size must be >= 0")
        if self.subject_sd <= 0:
            raise ValueError("subject_sd must be positive")
        if self.timepoints is not None and self.timepoints <= self.n_nodes:
            raise ValueError("timepoints must exceed n_nodes for a full-rank sample correlation")
        for cohort, by_label in self.counts.items():
            if cohort not in COHORTS:
                raise ValueError(f"unknown cohort {cohort!r}")
            for label, k in by_label.items():
                if label not in LABELS:
                    raise ValueError(f"unknown label {label!r}")
                if int(k) < 2:
                    raise ValueError(f"{cohort}/{label}: need at least 2 subjects, got {k}")
        object.__setattr__(self, "effect_rois", tuple(self.resolved_effect_rois()))

    def resolved_effect_rois(self) -> list[int]:
        if self.effect_rois is not None:
            rois = [int(r) for r in self.effect_rois]
            if any(not 0 <= r < self.n_nodes for r in rois):
                raise ValueError("effect ROI index out of range")
            return rois
        return [1, 7, 15] if self.n_nodes >= 16 else [0, 1, 2]

    def to_dict(self) -> dict:
        return {
            "counts": {c: dict(v) for c, v in self.counts.items()},
            "n_nodes": self.n_nodes,
            "effect_size": self.effect_size,
            "effect_rois": list(self.effect_rois),
            "n_factors": self.n_factors,
            "subject_sd": self.subject_sd,
            "timepoints": self.timepoints,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d) -> "SyntheticCohortSpec":
        d = dict(d)
        if d.get("effect_rois") is not None:
            d["effect_rois"] = tuple(d["effect_rois"])
        return cls(**d)


def _correlation(L: np.ndarray, psi: np.ndarray, timepoints: int | None, rng) -> np.ndarray:
    if timepoints is None:
        cov = L @ L.T + np.diag(psi)
    else:
        z = rng.standard_normal((timepoints, L.shape[1])) @ L.T + rng.standard_normal((timepoints, L.shape[0])) * np.sqrt(psi)
        cov = np.cov(z, rowvar=False)
    d = 1 / np.sqrt(np.diag(cov))
    c = cov * d[:, None] * d[None, :]
    c = np.clip((c + c.T) / 2, -1.0, 1.0)
    np.fill_diagonal(c, 1.0)
    return c


def synth_cohort(spec: SyntheticCohortSpec) -> list[SubjectRecord]:
    """Seeded subjects, ids ``{cohort}-{label}-{k:03d}``, in a fixed order."""
    root = np.random.SeedSequence(spec.seed)
    template_rng = np.random.default_rng(root.spawn(1)[0])
    n, f = spec.n_nodes, spec.n_factors
    template = template_rng.uniform(0.2, 0.6, (n, f))
    psi = template_rng.uniform(0.5, 1.0, n)
    rois = list(spec.effect_rois)
    boost = np.zeros((n, f))
    boost[rois] = template[rois]
    names = default_node_names(n)
    subjects = []
    for cohort in sorted(spec.counts):
        for label in ("HC", "PSP"):
            k_subjects = int(spec.counts[cohort].get(label, 0))
            # one seed per (cohort, label, subject) so counts never shift other draws
            for k in range(k_subjects):
                ss = np.random.SeedSequence((spec.seed, COHORTS.index(cohort), LABELS[label], k))
                rng = np.random.default_rng(ss)
                L = template + spec.subject_sd * rng.standard_normal((n, f))
                if label == "PSP":
                    L = L + spec.effect_size * boost
                c = _correlation(L, psi, spec.timepoints, rng)
                subjects.append(SubjectRecord(f"{cohort}-{label}-{k:03d}", cohort, label, ConnectivityMatrix(c, tuple(names))))
    return subjects
