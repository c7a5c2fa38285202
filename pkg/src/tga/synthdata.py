"""Seeded synthetic fMRI cohorts with planted block connectivity.

Each ROI belongs to one block. Within a block, ROI signals share a latent
factor::

    x_roi(t) = noise * (sqrt(rho / (1 - rho)) * f_block(t) + e_roi(t))

with ``f`` and ``e`` i.i.d. standard normal, which gives an expected
within-block Pearson correlation of exactly ``rho`` and zero across blocks.
Class-1 subjects have ``rho0 + delta`` on the designated block, ``rho0``
elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from tga.errors import ConfigError
from tga.graphs import TimeSeries, pearson_matrix, write_series_csv
from tga.rng import substream

MIN_TIMEPOINTS = 230
SYNTH_TASKS = ("classification", "regression", "unlabeled")


def contiguous_blocks(n_rois: int, n_blocks: int) -> list[list[int]]:
    return [chunk.tolist() for chunk in np.array_split(np.arange(n_rois), n_blocks)]


@dataclass
class SynthSpec:
    n_per_class: int = 20
    n_rois: int = 90
    n_timepoints: int = MIN_TIMEPOINTS
    blocks: list[list[int]] | None = None
    rho0: float = 0.2
    delta: float = 0.4
    designated_block: int = 0
    noise: float = 1.0
    task: str = "classification"
    # regression/unlabeled cohorts use n_subjects instead of n_per_class
    n_subjects: int | None = None
    score_slope: float = 1.0
    score_intercept: float = 0.0
    jitter: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.blocks is None:
            self.blocks = contiguous_blocks(self.n_rois, 6)
        self.validate()

    def validate(self) -> None:
        if self.task not in SYNTH_TASKS:
            raise ConfigError(f"task must be one of {SYNTH_TASKS}, got {self.task!r}")
        if self.n_timepoints < MIN_TIMEPOINTS:
            raise ConfigError(f"n_timepoints must be >= {MIN_TIMEPOINTS}, got {self.n_timepoints}")
        flat = sorted(i for block in self.blocks for i in block)
        if flat != list(range(self.n_rois)):
            raise ConfigError("blocks must partition 0..n_rois-1 exactly once")
        if any(len(b) == 0 for b in self.blocks):
            raise ConfigError("blocks must be non-empty")
        if not 0 <= self.designated_block < len(self.blocks):
            raise ConfigError(f"designated_block {self.designated_block} out of range")
        if not 0.0 < self.rho0 or not self.rho0 + self.delta < 1.0 or self.delta < 0:
            raise ConfigError("need 0 < rho0, delta >= 0 and rho0 + delta < 1")
        if self.task == "unlabeled" and not (0 <= self.jitter < self.rho0 and self.rho0 + self.delta + self.jitter < 1):
            raise ConfigError("jitter must keep every block correlation inside (0, 1)")
        if not self.noise > 0:
            raise ConfigError("noise must be > 0")
        if self.total_subjects < 1:
            raise ConfigError("cohort must contain at least one subject")

    @property
    def total_subjects(self) -> int:
        if self.task == "classification":
            return 2 * self.n_per_class
        return self.n_subjects if self.n_subjects is not None else 2 * self.n_per_class

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> SynthSpec:
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synth spec keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def sample_series(
    spec: SynthSpec, rng: np.random.Generator, rho0: float, boost: float
) -> np.ndarray:
    """One subject's ``T x N`` series; ``boost`` is added to the designated
    block's correlation."""
    t = spec.n_timepoints
    data = rng.standard_normal((t, spec.n_rois))
    factors = rng.standard_normal((t, len(spec.blocks)))
    for b, block in enumerate(spec.blocks):
        rho = rho0 + (boost if b == spec.designated_block else 0.0)
        data[:, block] += np.sqrt(rho / (1.0 - rho)) * factors[:, [b]]
    return spec.noise * data


def block_mean_correlation(series: np.ndarray, block: list[int]) -> float:
    corr = pearson_matrix(series[:, block])
    k = len(block)
    if k < 2:
        return 0.0
    return float((corr.sum() - k) / (k * (k - 1)))


@dataclass
class Subject:
    series: TimeSeries
    label: int | None = None
    score: float | None = None


def sample_cohort(spec: SynthSpec, seed: int | None = None) -> list[Subject]:
    """Generate the cohort in memory. Subject ``i`` uses its own substream, so
    subjects are independent of each other and of generation order."""
    seed = spec.seed if seed is None else seed
    subjects = []
    for i in range(spec.total_subjects):
        rng = substream(seed, "synth", spec.task, i)
        sid = f"sub-{i:04d}"
        if spec.task == "classification":
            label = i % 2
            data = sample_series(spec, rng, spec.rho0, spec.delta * label)
            subjects.append(Subject(TimeSeries(sid, data), label=label))
        elif spec.task == "regression":
            boost = spec.delta * rng.uniform()
            data = sample_series(spec, rng, spec.rho0, boost)
            realized = block_mean_correlation(data, spec.blocks[spec.designated_block])
            score = float(np.clip(spec.score_intercept + spec.score_slope * realized, 0.0, 1.0))
            subjects.append(Subject(TimeSeries(sid, data), score=score))
        else:
            rho0 = spec.rho0 + rng.uniform(-spec.jitter, spec.jitter)
            boost = spec.delta * rng.integers(0, 2)
            boost = min(boost, max(0.0, 0.999 - rho0))
            data = sample_series(spec, rng, rho0, boost)
            subjects.append(Subject(TimeSeries(sid, data)))
    return subjects


def generate_cohort(spec: SynthSpec, out_dir: str | Path, seed: int | None = None) -> dict:
    """Write one CSV per subject plus ``manifest.json`` into ``out_dir``.

    Returns the manifest: ``{n_rois, task, subjects: [{id, path, label|score}]}``
    with paths relative to ``out_dir``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = spec.seed if seed is None else seed
    entries = []
    for subject in sample_cohort(spec, seed):
        rel = f"{subject.series.subject_id}.csv"
        write_series_csv(subject.series, out_dir / rel)
        entry: dict = {"id": subject.series.subject_id, "path": rel}
        if subject.label is not None:
            entry["label"] = subject.label
        if subject.score is not None:
            entry["score"] = subject.score
        entries.append(entry)
    manifest = {
        "n_rois": spec.n_rois,
        "task": spec.task,
        "seed": seed,
        "spec": spec.to_dict(),
        "subjects": entries,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
