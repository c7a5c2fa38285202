"""Metrics, k-fold cross-validation and attention-mask edge attribution."""

from __future__ import annotations

import dataclasses
import json
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from tga import models
from tga import numerics as nx
from tga.checkpoint import Checkpoint
from tga.errors import ClassScarcityError, ConfigError, DataError, UndefinedMetricError
from tga.graphs import BrainGraph, pearson_matrix
from tga.rng import substream
from tga.train import TargetScaler, TrainConfig, finetune

CLASSIFICATION_METRICS = ("AUC", "ACC", "SEN", "SPE", "BAC")
REGRESSION_METRICS = ("MAE", "MSE", "PCC")
N_FOLDS = 5
TOP_K = 10


# --- metrics ---------------------------------------------------------------------


def auc_score(labels, scores) -> float:
    """Mann-Whitney AUC: the fraction of (positive, negative) pairs ordered
    correctly, ties counted as one half. Computed from mid-ranks."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC", "needs both classes present")
    ranks = rankdata(scores, method="average")
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def classification_metrics(labels, scores, threshold: float = 0.5) -> dict[str, float]:
    """AUC, ACC, SEN, SPE and BAC as fractions in [0, 1].

    ``scores`` are positive-class probabilities; a subject is predicted
    positive when its score is ``>= threshold``.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape:
        raise DataError(f"{labels.size} labels but {scores.size} scores")
    if not np.all(np.isin(labels, (0, 1))):
        raise DataError("labels must be 0 or 1")
    auc = auc_score(labels, scores)
    pred = scores >= threshold
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    tn = int(np.sum(~pred & ~pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    sen = tp / (tp + fn)
    spe = tn / (tn + fp)
    return {
        "AUC": auc,
        "ACC": (tp + tn) / labels.size,
        "SEN": sen,
        "SPE": spe,
        "BAC": (sen + spe) / 2.0,
    }


def regression_metrics(targets, preds) -> dict[str, float]:
    targets = np.asarray(targets, dtype=np.float64).ravel()
    preds = np.asarray(preds, dtype=np.float64).ravel()
    if targets.shape != preds.shape or targets.size < 2:
        raise DataError("regression metrics need two equal-length sequences of length >= 2")
    if np.all(targets == targets[0]):
        raise UndefinedMetricError("PCC", "targets have zero variance")
    err = preds - targets
    if np.all(preds == preds[0]):
        # a constant predictor carries no linear association
        pcc = 0.0
    else:
        pcc = float(pearson_matrix(np.column_stack([targets, preds]))[0, 1])
    return {"MAE": float(np.mean(np.abs(err))), "MSE": float(np.mean(err**2)), "PCC": pcc}


# --- folds -----------------------------------------------------------------------


def stratified_folds(labels: Sequence[int], n_folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Validation index sets of a seeded stratified partition.

    Indices are shuffled within each class, the classes concatenated in label
    order, and the sequence dealt round-robin, so the deal continues across
    class boundaries and fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    ordered = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size < n_folds:
            raise ClassScarcityError(f"class {cls} has {members.size} subjects, need at least {n_folds}")
        ordered.append(rng.permutation(members))
    sequence = np.concatenate(ordered)
    return [np.sort(sequence[f::n_folds]) for f in range(n_folds)]


def shuffled_folds(n: int, n_folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    if n < n_folds:
        raise ClassScarcityError(f"{n} subjects cannot fill {n_folds} folds")
    sequence = rng.permutation(n)
    return [np.sort(sequence[f::n_folds]) for f in range(n_folds)]


# --- reports ---------------------------------------------------------------------


def format_mean_std(mean: float, std: float, percent: bool) -> str:
    if percent:
        return f"{mean:.1f}({std:.1f})"
    return f"{mean:.4f}({std:.4f})"


@dataclass
class EvalReport:
    task: str
    folds: list[dict]
    config: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def metric_names(self) -> tuple[str, ...]:
        return CLASSIFICATION_METRICS if self.task == "classification" else REGRESSION_METRICS

    @property
    def aggregate(self) -> dict[str, dict]:
        """Mean and population std over folds. Classification metrics are in
        percent."""
        percent = self.task == "classification"
        out = {}
        for name in self.metric_names:
            vals = np.array([f["metrics"][name] for f in self.folds], dtype=np.float64)
            mean, std = float(vals.mean()), float(vals.std())
            out[name] = {"mean": mean, "std": std, "formatted": format_mean_std(mean, std, percent)}
        return out

    def lines(self) -> list[str]:
        return [f"{name}: {agg['formatted']}" for name, agg in self.aggregate.items()]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "task": self.task,
            "folds": self.folds,
            "aggregate": self.aggregate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)


# --- prediction and CV ------------------------------------------------------------


def predict_outputs(ckpt: Checkpoint, graphs: Sequence[BrainGraph]) -> np.ndarray:
    """Positive-class probabilities (classification) or scaled scores
    (regression) for each graph."""
    task = ckpt.meta.get("task", "classification")
    out = []
    for g in graphs:
        raw = models.predict(g, ckpt.tensors, task)
        out.append(nx.softmax(raw.ravel())[1] if task == "classification" else raw.item())
    return np.asarray(out, dtype=np.float64)


def evaluate_checkpoint(
    ckpt: Checkpoint, dataset: Sequence[tuple[BrainGraph, float]], threshold: float = 0.5
) -> dict[str, float]:
    """Metrics of a task checkpoint on labeled graphs. Classification metrics
    are fractions; regression targets are scaled with the checkpoint's
    training statistics."""
    graphs = [g for g, _ in dataset]
    targets = [t for _, t in dataset]
    outputs = predict_outputs(ckpt, graphs)
    if ckpt.meta.get("task", "classification") == "classification":
        return classification_metrics(targets, outputs, threshold)
    scaler = TargetScaler(ckpt.meta["target_min"], ckpt.meta["target_max"])
    return regression_metrics(scaler.transform(targets), outputs)


def cross_validate(
    dataset: Sequence[tuple[BrainGraph, float]],
    cfg: TrainConfig,
    init: Checkpoint | None = None,
    n_folds: int = N_FOLDS,
    threshold: float = 0.5,
    threads: int = 1,
) -> EvalReport:
    """k-fold CV: fine-tune on k-1 folds, score the held-out fold.

    Folds are stratified by label for classification. Folds are independent
    and may run on ``threads`` workers; the report keeps fold order.
    """
    targets = [t for _, t in dataset]
    rng = substream(cfg.seed, "folds")
    if cfg.task == "classification":
        folds = stratified_folds([int(t) for t in targets], n_folds, rng)
    else:
        folds = shuffled_folds(len(dataset), n_folds, rng)

    def run(fold_index: int) -> dict:
        val = folds[fold_index]
        train_idx = np.setdiff1d(np.arange(len(dataset)), val)
        model = finetune([dataset[i] for i in train_idx], init, cfg)
        metrics = evaluate_checkpoint(model, [dataset[i] for i in val], threshold)
        if cfg.task == "classification":
            metrics = {k: 100.0 * v for k, v in metrics.items()}
        return {
            "fold_index": fold_index,
            "n_train": int(train_idx.size),
            "n_val": int(val.size),
            "val_indices": val.tolist(),
            "metrics": metrics,
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fold_results = list(pool.map(run, range(n_folds)))
    else:
        fold_results = [run(i) for i in range(n_folds)]
    return EvalReport(task=cfg.task, folds=fold_results, config=cfg.to_dict(), seed=cfg.seed)


# --- biomarkers -------------------------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    weight: float


def top_k_edges(
    mask_logits: np.ndarray, k: int = TOP_K, init_logit: float = models.MASK_INIT_LOGIT
) -> list[Edge]:
    """Rank ROI pairs ``i < j`` by how far the learned (symmetrized) mask moved
    from its initial value; ties broken by ``(i, j)``."""
    mask = models.effective_mask(np.asarray(mask_logits, dtype=np.float64))
    n = mask.shape[0]
    n_pairs = n * (n - 1) // 2
    if not 0 <= k <= n_pairs:
        raise ConfigError(f"k must be in 0..{n_pairs}, got {k}")
    rows, cols = np.triu_indices(n, k=1)
    base = float(nx.sigmoid(np.array([init_logit]))[0])
    weight = np.abs(mask[rows, cols] - base)
    order = np.lexsort((cols, rows, -weight))[:k]
    return [Edge(int(rows[o]), int(cols[o]), float(weight[o])) for o in order]


def edges_to_json(edges: Sequence[Edge]) -> str:
    return json.dumps([dataclasses.asdict(e) for e in edges], indent=2)


def edges_to_text(edges: Sequence[Edge]) -> str:
    return "".join(f"{e.i} {e.j} {e.weight!r}\n" for e in edges)

