"""Pretext (self-supervised) training and task-specific fine-tuning."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field

import numpy as np

from tga import models
from tga.augment import AugmentStrategy, make_views, strategy_probabilities
from tga.checkpoint import Checkpoint
from tga.errors import ConfigError, DataError, DimensionError, TrainingDivergedError
from tga.graphs import BrainGraph
from tga.numerics import ADAM_BETAS, ADAM_EPS, ParamSet, adam_step
from tga.rng import substream

log = logging.getLogger(__name__)

LOSS_BOUNDS = (-2.0, 0.0)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    strategy: AugmentStrategy = field(default_factory=AugmentStrategy)
    task: str = "classification"
    naive: bool = False
    freeze_encoder: bool = False
    use_mask: bool = True
    betas: tuple[float, float] = ADAM_BETAS
    eps: float = ADAM_EPS
    hidden: int = models.HIDDEN
    mask_init: float = models.MASK_INIT_LOGIT

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.task not in models.TASKS:
            raise ConfigError(f"task must be one of {models.TASKS}, got {self.task!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["betas"] = list(self.betas)
        return out


def _check_cohort(graphs: Sequence[BrainGraph]) -> int:
    if not graphs:
        raise DataError("empty cohort")
    sizes = {g.n_nodes for g in graphs}
    if len(sizes) != 1:
        raise DimensionError(f"graphs disagree on ROI count: {sorted(sizes)}")
    return sizes.pop()


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def init_pretext_params(n_rois: int, cfg: TrainConfig) -> ParamSet:
    return ParamSet(
        {
            **models.init_encoder(n_rois, substream(cfg.seed, "init", "encoder"), cfg.hidden),
            **models.init_projector(substream(cfg.seed, "init", "projector"), cfg.hidden),
        }
    )


def pretrain(
    cohort: Sequence[BrainGraph],
    cfg: TrainConfig,
    on_step: Callable[[int, int, float], None] | None = None,
) -> Checkpoint:
    """Self-supervised training of encoder and projector on unlabeled graphs.

    Each epoch shuffles the cohort, draws two fresh views per graph, and takes
    one Adam step per batch on the mean contrastive loss. The per-epoch mean
    loss is returned in ``meta["loss_trace"]``; ``on_step(epoch, batch, loss)``
    sees every batch loss.

    Raises:
        TrainingDivergedError: on a non-finite or out-of-range batch loss.
    """
    n_rois = _check_cohort(cohort)
    params = init_pretext_params(n_rois, cfg)
    probs = [strategy_probabilities(g, cfg.strategy) for g in cohort]
    trace: list[float] = []
    lo, hi = LOSS_BOUNDS

    for epoch in range(cfg.epochs):
        epoch_losses = []
        batches = _batches(len(cohort), cfg.batch_size, substream(cfg.seed, "shuffle", "pretrain", epoch))
        for step, batch in enumerate(batches):
            tensors = params.tensors()
            batch_loss = 0.0
            for idx in batch:
                g = cohort[idx]
                rng = substream(cfg.seed, "views", epoch, int(idx), g.subject_id)
                v1, v2 = make_views(g, cfg.strategy, rng, probs[idx])
                loss, grads = models.pretext_loss_and_grad(v1, v2, tensors)
                for name, grad in grads.items():
                    params.accumulate(name, grad, 1.0 / len(batch))
                batch_loss += loss
            batch_loss /= len(batch)
            if not math.isfinite(batch_loss):
                raise TrainingDivergedError(f"non-finite pretext loss in epoch {epoch}")
            if not lo - 1e-12 <= batch_loss <= hi + 1e-12:
                raise TrainingDivergedError(f"pretext loss {batch_loss} outside [-2, 0] in epoch {epoch}")
            if on_step is not None:
                on_step(epoch, step, batch_loss)
            adam_step(params, cfg.lr, cfg.betas, cfg.eps)
            epoch_losses.append(batch_loss * len(batch))
        trace.append(sum(epoch_losses) / len(cohort))
        log.info("pretrain epoch %d loss %.6f", epoch, trace[-1])

    return Checkpoint(
        tensors={k: v.copy() for k, v in params.tensors().items()},
        config=cfg.to_dict(),
        seed=cfg.seed,
        meta={"kind": "pretext", "n_rois": n_rois, "loss_trace": trace},
    )


@dataclass
class TargetScaler:
    """Min-max map of regression targets into [0, 1], fit on training data."""

    lo: float
    hi: float

    @classmethod
    def fit(cls, targets) -> TargetScaler:
        t = np.asarray(targets, dtype=np.float64)
        return cls(float(t.min()), float(t.max()))

    def transform(self, targets) -> np.ndarray:
        span = self.hi - self.lo
        t = np.asarray(targets, dtype=np.float64)
        return (t - self.lo) / span if span > 0 else t - self.lo


def _check_targets(targets: list, task: str) -> int:
    """Validate targets for ``task``; return the class count (1 for regression)."""
    if task == "classification":
        for t in targets:
            if isinstance(t, bool) or not float(t).is_integer() or t < 0:
                raise DataError(f"classification target {t!r} is not a class index")
        return max(2, int(max(targets)) + 1)
    for t in targets:
        if not math.isfinite(float(t)):
            raise DataError(f"regression target {t!r} is not a finite number")
    return 1


def init_task_params(n_rois: int, out_dim: int, init: Checkpoint | None, cfg: TrainConfig) -> ParamSet:
    if cfg.naive:
        encoder = models.init_encoder(n_rois, substream(cfg.seed, "init", "encoder"), cfg.hidden)
    else:
        if init is None:
            raise ConfigError("fine-tuning needs a pretrained checkpoint unless naive=True")
        if not all(k in init.tensors for k in models.ENCODER):
            raise DataError("checkpoint has no encoder tensors")
        encoder = {k: init.tensors[k].copy() for k in models.ENCODER}
        if encoder["encoder.W0"].shape[0] != n_rois:
            raise DimensionError(
                f"checkpoint encoder expects {encoder['encoder.W0'].shape[0]} ROIs, data has {n_rois}"
            )
    hidden = encoder["encoder.W1"].shape[1]
    params = ParamSet()
    for name, value in encoder.items():
        params.add(name, value, trainable=not cfg.freeze_encoder)
    for name, value in models.init_head(substream(cfg.seed, "init", "head"), out_dim, hidden).items():
        params.add(name, value)
    if cfg.use_mask:
        for name, value in models.init_mask(n_rois, cfg.mask_init).items():
            params.add(name, value)
    return params


def finetune(
    labeled: Sequence[tuple[BrainGraph, float]],
    init: Checkpoint | None,
    cfg: TrainConfig,
) -> Checkpoint:
    """Train the task model (encoder, optional mask, head) on labeled graphs.

    ``cfg.naive`` ignores ``init`` entirely and starts from a seeded encoder;
    ``cfg.freeze_encoder`` keeps the encoder tensors bit-identical;
    ``cfg.use_mask=False`` drops the attention mask from the model.
    Regression targets are min-max scaled with statistics of ``labeled``;
    the scaler is stored in ``meta``.
    """
    graphs = [g for g, _ in labeled]
    targets = [t for _, t in labeled]
    n_rois = _check_cohort(graphs)
    out_dim = _check_targets(targets, cfg.task)
    params = init_task_params(n_rois, out_dim, None if cfg.naive else init, cfg)

    meta: dict = {
        "kind": "task",
        "task": cfg.task,
        "n_rois": n_rois,
        "out_dim": out_dim,
        "use_mask": cfg.use_mask,
        "mask_init": cfg.mask_init,
    }
    if cfg.task == "regression":
        scaler = TargetScaler.fit(targets)
        fit_targets = scaler.transform(targets).tolist()
        meta["target_min"], meta["target_max"] = scaler.lo, scaler.hi
    else:
        fit_targets = [int(t) for t in targets]

    trace: list[float] = []
    for epoch in range(cfg.epochs):
        total = 0.0
        for batch in _batches(len(graphs), cfg.batch_size, substream(cfg.seed, "shuffle", "finetune", epoch)):
            tensors = params.tensors()
            batch_loss = 0.0
            for idx in batch:
                loss, grads = models.task_loss_and_grad(graphs[idx], fit_targets[idx], tensors, cfg.task)
                for name, grad in grads.items():
                    params.accumulate(name, grad, 1.0 / len(batch))
                batch_loss += loss
            if not math.isfinite(batch_loss):
                raise TrainingDivergedError(f"non-finite task loss in epoch {epoch}")
            adam_step(params, cfg.lr, cfg.betas, cfg.eps)
            total += batch_loss
        trace.append(total / len(graphs))
        log.info("finetune epoch %d loss %.6f", epoch, trace[-1])
    meta["loss_trace"] = trace

    return Checkpoint(
        tensors={k: v.copy() for k, v in params.tensors().items()},
        config=cfg.to_dict(),
        seed=cfg.seed,
        meta=meta,
    )
