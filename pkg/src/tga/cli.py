"""Command-line entry point: ``tga {synth,pretrain,finetune,cv,evaluate,biomarkers}``.

Exit codes: 0 success, 2 config/flag error, 3 data error, 4 numeric
divergence, 5 capability mismatch. Failures print one JSON object
``{"error", "message", "exit_code"}`` on stderr.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click
import yaml

from tga import evaluation
from tga.checkpoint import load_checkpoint, save_checkpoint
from tga.config import Config, load_config
from tga.dataset import Manifest, load_graphs, load_labeled, load_manifest
from tga.errors import CapabilityError, ConfigError, DimensionError, TGAError
from tga.models import MASK
from tga.synthdata import SynthSpec, generate_cohort
from tga.train import finetune as run_finetune
from tga.train import pretrain as run_pretrain

log = logging.getLogger("tga")


def _fail(exc: TGAError) -> None:
    payload = {"error": exc.kind, "message": str(exc), "exit_code": exc.exit_code}
    click.echo(json.dumps(payload), err=True)
    sys.exit(exc.exit_code)


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TGAError as exc:
            _fail(exc)

    return wrapper


def _write_json(path: str | Path, payload) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def _resolve(config_path, seed=None, threads=None, strategy=None, pretrain_epochs=None, **finetune_flags) -> Config:
    overrides: dict = {}
    if pretrain_epochs is not None:
        overrides["pretrain"] = {"epochs": pretrain_epochs}
    if seed is not None:
        overrides["seed"] = seed
    if threads is not None:
        overrides["threads"] = threads
    if strategy is not None:
        overrides["augment"] = {"kind": strategy}
    ft = {k: v for k, v in finetune_flags.items() if v is not None}
    if ft:
        overrides["finetune"] = ft
    return load_config(config_path, overrides)


def _manifest(cfg: Config, path) -> Manifest:
    manifest = load_manifest(path)
    if cfg.graph.n_rois is not None and manifest.n_rois != cfg.graph.n_rois:
        raise DimensionError(f"manifest has {manifest.n_rois} ROIs, config expects {cfg.graph.n_rois}")
    return manifest


def _finetune_inputs(cfg: Config, init_path):
    if cfg.finetune.naive and init_path is not None:
        raise ConfigError("--naive trains without a pretrained encoder; drop --init")
    if not cfg.finetune.naive and init_path is None:
        raise ConfigError("fine-tuning needs --init CHECKPOINT unless --naive is given")
    return load_checkpoint(init_path) if init_path is not None else None


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML/JSON config file.")
manifest_option = click.option("--manifest", required=True, type=click.Path(dir_okay=False), help="Cohort manifest JSON.")
seed_option = click.option("--seed", type=int, help="Override the config seed.")
threads_option = click.option("--threads", type=click.IntRange(min=1), help="Cap on worker threads.")


def variant_options(fn):
    fn = click.option("--init", "init_path", type=click.Path(dir_okay=False), help="Pretrained checkpoint.")(fn)
    fn = click.option("--naive", is_flag=True, default=None, help="Train from scratch, no pretext model.")(fn)
    fn = click.option("--freeze-encoder", is_flag=True, default=None, help="Keep encoder tensors fixed.")(fn)
    fn = click.option(
        "--no-attention-mask", "no_mask", is_flag=True, default=None, help="Drop the learnable mask."
    )(fn)
    fn = click.option("--epochs", type=click.IntRange(min=0), help="Override finetune.epochs.")(fn)
    return fn


def _variant_flags(naive, freeze_encoder, no_mask, epochs) -> dict:
    return {
        "naive": naive,
        "freeze_encoder": freeze_encoder,
        "use_mask": False if no_mask else None,
        "epochs": epochs,
    }


@click.group()
@click.option("-v", "--verbose", count=True, help="Log progress (-v info, -vv debug).")
def main(verbose: int) -> None:
    """Topology-aware graph augmentation for brain-network learning."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@main.command()
@click.argument("spec_path", type=click.Path(dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@seed_option
@handles_errors
def synth(spec_path, out_dir, seed):
    """Generate a synthetic cohort (CSV series + manifest.json) from a spec file."""
    try:
        raw = yaml.safe_load(Path(spec_path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read synth spec {spec_path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("synth spec must be a mapping")
    spec = SynthSpec.from_dict(raw)
    manifest = generate_cohort(spec, out_dir, seed)
    click.echo(json.dumps({"manifest": str(Path(out_dir) / "manifest.json"), "subjects": len(manifest["subjects"])}))


@main.command()
@config_option
@manifest_option
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Checkpoint path.")
@click.option("--trace", type=click.Path(dir_okay=False), help="Loss trace JSON (default: OUT.trace.json).")
@click.option("--strategy", type=click.Choice(["hnd", "wer", "uniform_node", "uniform_edge"]))
@click.option("--epochs", type=click.IntRange(min=0), help="Override pretrain.epochs.")
@seed_option
@threads_option
@handles_errors
def pretrain(config_path, manifest, out, trace, strategy, epochs, seed, threads):
    """Self-supervised pretraining of the GCN encoder on an unlabeled cohort."""
    cfg = _resolve(config_path, seed, threads, strategy, pretrain_epochs=epochs)
    graphs = load_graphs(_manifest(cfg, manifest))
    ckpt = run_pretrain(graphs, cfg.pretrain_config())
    ckpt.config = cfg.echo()
    save_checkpoint(ckpt, out)
    _write_json(
        trace or f"{out}.trace.json",
        {"config": cfg.echo(), "seed": cfg.seed, "loss_trace": ckpt.meta["loss_trace"]},
    )
    click.echo(json.dumps({"checkpoint": str(out), "final_loss": (ckpt.meta["loss_trace"] or [None])[-1]}))


@main.command()
@config_option
@manifest_option
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Task checkpoint path.")
@variant_options
@seed_option
@handles_errors
def finetune(config_path, manifest, out, init_path, naive, freeze_encoder, no_mask, epochs, seed):
    """Fine-tune the task model on a labeled cohort."""
    cfg = _resolve(config_path, seed, **_variant_flags(naive, freeze_encoder, no_mask, epochs))
    init = _finetune_inputs(cfg, init_path)
    labeled = load_labeled(_manifest(cfg, manifest), cfg.finetune.task)
    ckpt = run_finetune(labeled, init, cfg.finetune_config())
    ckpt.config = cfg.echo()
    save_checkpoint(ckpt, out)
    click.echo(json.dumps({"checkpoint": str(out), "final_loss": (ckpt.meta["loss_trace"] or [None])[-1]}))


@main.command()
@config_option
@manifest_option
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Report JSON path.")
@click.option("--strategy", type=click.Choice(["hnd", "wer", "uniform_node", "uniform_edge"]))
@variant_options
@seed_option
@threads_option
@handles_errors
def cv(config_path, manifest, out, strategy, init_path, naive, freeze_encoder, no_mask, epochs, seed, threads):
    """Cross-validate fine-tuning and print "metric: mean(std)" lines."""
    cfg = _resolve(config_path, seed, threads, strategy, **_variant_flags(naive, freeze_encoder, no_mask, epochs))
    init = _finetune_inputs(cfg, init_path)
    labeled = load_labeled(_manifest(cfg, manifest), cfg.finetune.task)
    report = evaluation.cross_validate(
        labeled,
        cfg.finetune_config(),
        init,
        n_folds=cfg.eval.folds,
        threshold=cfg.eval.threshold,
        threads=cfg.threads,
    )
    report.config = cfg.echo()
    _write_json(out, report.to_dict())
    for line in report.lines():
        click.echo(line)


@main.command()
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(dir_okay=False))
@manifest_option
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Metrics JSON path.")
@config_option
@handles_errors
def evaluate(ckpt_path, manifest, out, config_path):
    """Score a fine-tuned checkpoint on a labeled cohort."""
    ckpt = load_checkpoint(ckpt_path)
    if ckpt.meta.get("kind") != "task":
        raise CapabilityError("checkpoint holds no task head; fine-tune it first")
    threshold = load_config(config_path).eval.threshold if config_path else 0.5
    task = ckpt.meta["task"]
    labeled = load_labeled(load_manifest(manifest), task)
    if labeled and labeled[0][0].n_nodes != ckpt.meta["n_rois"]:
        raise DimensionError(f"checkpoint expects {ckpt.meta['n_rois']} ROIs, data has {labeled[0][0].n_nodes}")
    metrics = evaluation.evaluate_checkpoint(ckpt, labeled, threshold)
    _write_json(out, {"config": ckpt.config, "seed": ckpt.seed, "task": task, "metrics": metrics})
    for name, value in metrics.items():
        click.echo(f"{name}: {value:.4f}")


@main.command()
@click.option("--checkpoint", "ckpt_path", required=True, type=click.Path(dir_okay=False))
@click.option("-k", "--k", "k", type=click.IntRange(min=0), default=evaluation.TOP_K, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Edge JSON path; a .txt edge list is written next to it.")
@handles_errors
def biomarkers(ckpt_path, k, out):
    """Extract the top-k connections ranked by the learned attention mask."""
    ckpt = load_checkpoint(ckpt_path)
    if MASK not in ckpt.tensors:
        raise CapabilityError(
            "checkpoint has no attention mask (trained with --no-attention-mask or not fine-tuned); "
            "edge attributions are unavailable"
        )
    edges = evaluation.top_k_edges(ckpt.tensors[MASK], k, ckpt.meta.get("mask_init", 3.0))
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(evaluation.edges_to_json(edges) + "\n", encoding="utf-8")
    out.with_suffix(".txt").write_text(evaluation.edges_to_text(edges), encoding="utf-8")
    click.echo(json.dumps({"edges": len(edges), "json": str(out), "text": str(out.with_suffix(".txt"))}))


if __name__ == "__main__":
    main()
