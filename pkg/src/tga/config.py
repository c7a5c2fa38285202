"""Run configuration: a YAML (or JSON) document validated against a fixed
schema. Unknown keys are rejected.

Example::

    seed: 0
    graph: {n_rois: 90}
    augment: {kind: wer, alpha: 0.1, beta: 0.5}
    pretrain: {epochs: 50, batch_size: 16, lr: 0.001}
    finetune: {epochs: 100, batch_size: 8, lr: 0.001, task: classification}
    eval: {folds: 5, threshold: 0.5, top_k: 10}

Precedence is command-line flags > config file > defaults.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from tga import augment, models
from tga.errors import ConfigError
from tga.train import TrainConfig


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GraphSection(_Section):
    n_rois: int | None = Field(90, ge=2)


class AugmentSection(_Section):
    kind: Literal["hnd", "wer", "uniform_node", "uniform_edge"] = "wer"
    alpha: float = Field(0.1, ge=0.0, lt=1.0)
    beta: float = Field(0.5, ge=0.0, lt=1.0)


class ModelSection(_Section):
    hidden: int = Field(models.HIDDEN, ge=1)
    mask_init: float = models.MASK_INIT_LOGIT


class OptimSection(_Section):
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0.0)


class PretrainSection(_Section):
    epochs: int = Field(50, ge=0)
    batch_size: int = Field(16, ge=1)
    lr: float = Field(1e-3, gt=0.0)


class FinetuneSection(_Section):
    epochs: int = Field(100, ge=0)
    batch_size: int = Field(8, ge=1)
    lr: float = Field(1e-3, gt=0.0)
    task: Literal["classification", "regression"] = "classification"
    naive: bool = False
    freeze_encoder: bool = False
    use_mask: bool = True


class EvalSection(_Section):
    folds: int = Field(5, ge=2)
    threshold: float = Field(0.5, ge=0.0, le=1.0)
    top_k: int = Field(10, ge=0)


class Config(_Section):
    seed: int = 0
    threads: int = Field(1, ge=1)
    graph: GraphSection = GraphSection()
    augment: AugmentSection = AugmentSection()
    model: ModelSection = ModelSection()
    optim: OptimSection = OptimSection()
    pretrain: PretrainSection = PretrainSection()
    finetune: FinetuneSection = FinetuneSection()
    eval: EvalSection = EvalSection()

    def echo(self) -> dict:
        return self.model_dump(mode="json")

    def strategy(self) -> augment.AugmentStrategy:
        return augment.AugmentStrategy(self.augment.kind, self.augment.alpha, self.augment.beta)

    def _train(self, section, **extra) -> TrainConfig:
        return TrainConfig(
            epochs=section.epochs,
            batch_size=section.batch_size,
            lr=section.lr,
            seed=self.seed,
            strategy=self.strategy(),
            betas=tuple(self.optim.betas),
            eps=self.optim.eps,
            hidden=self.model.hidden,
            mask_init=self.model.mask_init,
            **extra,
        )

    def pretrain_config(self) -> TrainConfig:
        return self._train(self.pretrain)

    def finetune_config(self) -> TrainConfig:
        ft = self.finetune
        return self._train(
            ft, task=ft.task, naive=ft.naive, freeze_encoder=ft.freeze_encoder, use_mask=ft.use_mask
        )


def _merge(base: dict, overrides: dict) -> dict:
    out = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> Config:
    """Read and validate a config file, then apply ``overrides`` (nested dict,
    typically from command-line flags)."""
    raw: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a mapping at top level")
    raw = _merge(raw, overrides or {})
    try:
        return Config.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None
