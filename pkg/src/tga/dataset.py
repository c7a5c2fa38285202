"""Cohort manifests: ``{n_rois, task, subjects: [{id, path, label | score}]}``.

Subject paths are resolved relative to the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from tga.errors import ConstantSignalError, DataError, DimensionError
from tga.graphs import BrainGraph, build_graph, read_series_csv


@dataclass
class Entry:
    id: str
    path: Path
    label: int | None = None
    score: float | None = None

    def target(self, task: str):
        value = self.label if task == "classification" else self.score
        if value is None:
            field = "label" if task == "classification" else "score"
            raise DataError(f"subject {self.id!r} has no {field} for a {task} run")
        return value


@dataclass
class Manifest:
    n_rois: int
    task: str
    entries: list[Entry]


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"manifest {path} not found") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {path} is not valid JSON: {exc}") from None
    try:
        entries = [
            Entry(
                id=str(s["id"]),
                path=path.parent / s["path"],
                label=s.get("label"),
                score=s.get("score"),
            )
            for s in raw["subjects"]
        ]
        return Manifest(n_rois=int(raw["n_rois"]), task=str(raw.get("task", "unlabeled")), entries=entries)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"manifest {path} is malformed: {exc!r}") from None


def load_graphs(manifest: Manifest) -> list[BrainGraph]:
    """Read every subject's series and build its graph, checking the ROI count."""
    graphs = []
    for entry in manifest.entries:
        if not entry.path.is_file():
            raise DataError(f"subject {entry.id!r}: series file {entry.path} not found")
        ts = read_series_csv(entry.path, subject_id=entry.id)
        if ts.n_rois != manifest.n_rois:
            raise DimensionError(f"subject {entry.id!r} has {ts.n_rois} ROIs, manifest says {manifest.n_rois}")
        try:
            graphs.append(build_graph(ts))
        except ConstantSignalError as exc:
            raise ConstantSignalError(exc.column, f"subject {entry.id!r}: column {exc.column} is constant") from None
    return graphs


def load_labeled(manifest: Manifest, task: str) -> list[tuple[BrainGraph, float]]:
    targets = [e.target(task) for e in manifest.entries]
    return list(zip(load_graphs(manifest), targets))
