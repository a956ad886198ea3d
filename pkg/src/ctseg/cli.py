"""Command-line entry points.

Subcommands: synth, train, predict, evaluate, finetune, sweep, serve.
Exit code 2 on argument errors (click's convention, kept), 1 on runtime
errors with a one-line diagnostic on stderr.
"""
from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from .data import FamilySpec, generate_synthetic, load_dataset, save_contours, save_dataset
from .errors import CtsegError
from .evalharness import evaluate, predict_all, run_sweeps, write_suite
from .geometry import Contour, hausdorff, polygon_iou
from .model import load_checkpoint, save_checkpoint
from .training import DESK_PRESET, TrainConfig, finetune_hitl, train_one_shot


def _load_config(path, **overrides) -> TrainConfig:
    base = DESK_PRESET
    if path:
        with open(path, encoding="utf-8") as f:
            base = replace(base, **json.load(f))
    return replace(base, **{k: v for k, v in overrides.items() if v is not None})


@click.group()
def main():
    """One-shot contour segmentation toolkit."""


@main.command()
@click.option("--family", type=click.Choice(["ellipse", "superellipse", "bean"]),
              default="ellipse")
@click.option("--count", type=int, default=20)
@click.option("--seed", type=int, default=0)
@click.option("--n-vertices", type=int, default=100)
@click.option("--out", type=click.Path(), required=True)
def synth(family, count, seed, n_vertices, out):
    """Generate a synthetic dataset."""
    spec = FamilySpec(family=family, n_vertices=n_vertices)
    ds = generate_synthetic(spec, count, seed)
    save_dataset(ds, out)
    click.echo(f"wrote {count} images to {out}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def train(data_dir, config, epochs, seed, out):
    """One-shot training; writes checkpoints and a JSON-lines log."""
    ds = load_dataset(data_dir)
    cfg = _load_config(config, epochs=epochs, seed=seed, n_vertices=ds.n_vertices)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    params, log = train_one_shot(ds, cfg, log_path=out / "train.jsonl",
                                 checkpoint_dir=out)
    save_checkpoint(params, out / "checkpoint.bin")
    click.echo(f"trained {cfg.epochs} epochs; final loss "
               f"{log[-1]['loss_total']:.4f}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
def predict(data_dir, checkpoint, out):
    """Write predicted contour JSON per image."""
    ds = load_dataset(data_dir)
    params = load_checkpoint(checkpoint)
    save_contours(predict_all(params, ds), out)
    click.echo(f"wrote {len(ds)} contours to {out}")


@main.command("evaluate")
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", type=click.Path(exists=True), default=None)
@click.option("--predictions", type=click.Path(exists=True), default=None,
              help="Directory of contour JSONs; bypasses the checkpoint.")
@click.option("--out", type=click.Path(), required=True)
def evaluate_cmd(data_dir, checkpoint, predictions, out):
    """Score predictions against ground truth (IoU, Hausdorff)."""
    ds = load_dataset(data_dir)
    if predictions:
        preds = {p.stem: Contour.load(p)
                 for p in sorted(Path(predictions).glob("*.json"))}
        report = evaluate(None, ds, predictions=preds,
                          config={"predictions": str(predictions)})
    elif checkpoint:
        params = load_checkpoint(checkpoint)
        report = evaluate(params, ds, config={"checkpoint": str(checkpoint)})
    else:
        raise click.UsageError("need --checkpoint or --predictions")
    report.write(out)
    click.echo(f"mean IoU {report.mean_iou:.4f}  mean HD {report.mean_hd:.2f}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def finetune(data_dir, checkpoint, config, epochs, seed, out):
    """Fine-tune with the partial matching loss on corrected images."""
    ds = load_dataset(data_dir)
    params = load_checkpoint(checkpoint)
    cfg = _load_config(config, epochs=epochs, seed=seed,
                       n_vertices=params.config.n_vertices)
    cfg = replace(cfg, gcn_blocks=params.config.gcn_blocks,
                  hidden_channels=params.config.hidden_channels)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    params, log = finetune_hitl(params, ds, cfg, log_path=out / "finetune.jsonl",
                                checkpoint_dir=out)
    save_checkpoint(params, out / "checkpoint.bin")
    click.echo(f"finetuned {cfg.epochs} epochs")


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--test-data", type=click.Path(exists=True), required=True)
@click.option("--axis", type=click.Choice(["lambda1", "lambda2", "lambda3",
                                           "blocks", "exemplar"]), required=True)
@click.option("--values", required=True, help="Comma-separated sweep values.")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), required=True)
def sweep(data_dir, test_data, axis, values, config, seed, out):
    """Retrain per value along one axis and report each run."""
    train_ds = load_dataset(data_dir)
    test_ds = load_dataset(test_data)
    cfg = _load_config(config, seed=seed, n_vertices=train_ds.n_vertices)
    table = run_sweeps(train_ds, test_ds, cfg, axis, values.split(","))
    path = write_suite(table, f"sweep_{axis}", out)
    for label, report in table.items():
        click.echo(f"{axis}={label}: IoU {report.mean_iou:.4f} HD {report.mean_hd:.2f}")
    click.echo(f"reports under {path}")


@main.command()
@click.option("--project", "project_root", type=click.Path(exists=True),
              envvar="CTSEG_PROJECT_ROOT", required=True)
@click.option("--checkpoint", type=click.Path(), default=None)
@click.option("--port", type=int, default=8765)
def serve(project_root, checkpoint, port):
    """Start the HTTP project service for the annotator UI."""
    from .server import Project, serve as run_server

    run_server(Project(project_root, checkpoint_path=checkpoint), port=port)


def cli(argv=None) -> int:
    """Programmatic entry point returning an exit code."""
    try:
        main.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as e:
        print(f"error: {e.format_message()}", file=sys.stderr)
        return 2
    except click.exceptions.Exit as e:
        return e.exit_code
    except CtsegError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(cli())
