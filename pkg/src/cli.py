"""
Command-line interface for the motion retrieval toolkit.

Usage:
    python -m src.cli synth --seed 7 --n 32 --k 4 --out data/synth/manifest.jsonl
    python -m src.cli train --config config/default.yaml --datasets data/synth/manifest.jsonl --out runs/demo
    python -m src.cli eval --checkpoint runs/demo/best.ckpt --dataset data/synth/manifest.jsonl --subset 8
    python -m src.cli embed --checkpoint runs/demo/best.ckpt --dataset data/synth/manifest.jsonl --out exports/db.embd
    python -m src.cli query --db exports/db.embd --text "a person walks forward" --k 5
    python -m src.cli gradcheck

Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numeric failure.
"""

import sys
from pathlib import Path
from typing import List, Optional, Sequence

import click
from loguru import logger

from src.analysis.protocols import PROTOCOLS, average_over_protocols
from src.analysis.report import render_table, write_records
from src.common.config import config_to_dict
from src.common.errors import ConfigError, GradCheckFailure, MotionRetrievalError
from src.common.log import setup_logging
from src.data.manifest import Dataset, Split, load_manifest, unify, write_manifest
from src.data.synthetic import synth_dataset
from src.losses.cccl import LOSS_MODES
from src.models.teacher import build_teacher
from src.store.embedding_db import EmbeddingDB, build_db, query as query_db, query_by_example
from src.testing.run_gradient_checks import GradientCheckSuite
from src.training.config import DTYPES, TrainConfig
from src.training.evaluation import EvalSettings, evaluate
from src.training.model import load_model
from src.training.trainer import train as run_training

SPLITS = [s.value for s in Split]


def _split_list(value: Optional[str]) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()] if value else []


def load_datasets(paths: Sequence[str]) -> Dataset:
    """One manifest as is; several are unified for joint training."""
    if not paths:
        raise ConfigError("no dataset manifests given")
    datasets = [load_manifest(p) for p in paths]
    return datasets[0] if len(datasets) == 1 else unify(*datasets)


def parse_swipe(value: str):
    parts = value.split(":")
    try:
        start, end = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"--swipe expects start:end, got {value!r}")
    return tuple(int(v) if v.is_integer() else v for v in (start, end))


@click.group()
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["TRACE", "DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--log-file", type=click.Path(dir_okay=False), default=None, help="Also log to this file")
@click.option("--json-log", type=click.Path(dir_okay=False), default=None, help="Serialized JSON-lines log")
def cli(log_level: str, log_file: Optional[str], json_log: Optional[str]):
    """Text-to-motion and motion-to-text retrieval."""
    setup_logging(log_level, log_file, json_log)


@cli.command()
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--n", "n_pairs", type=int, default=32, show_default=True, help="Number of pairs")
@click.option("--k", "n_archetypes", type=int, default=4, show_default=True, help="Motion archetypes")
@click.option("--test-fraction", type=float, default=0.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Manifest to write")
def synth(seed: int, n_pairs: int, n_archetypes: int, test_fraction: float, out: str):
    """Generate a synthetic text-motion dataset."""
    dataset = synth_dataset(seed, n_pairs, n_archetypes, test_fraction=test_fraction)
    path = write_manifest(dataset, out)
    logger.info(f"Wrote {len(dataset)} pairs to {path}")


@cli.command()
@click.argument("manifests", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the unified manifest here")
def prepare(manifests: Sequence[str], out: Optional[str]):
    """Validate manifests (every motion is decoded) and optionally unify them."""
    dataset = load_datasets(manifests)
    for pair in dataset:
        pair.motion.validate()
    counts = {s: len(dataset.split(s)) for s in SPLITS}
    logger.info(f"{dataset.name!r}: {len(dataset)} pairs valid, splits {counts}")
    if out is not None:
        write_manifest(dataset, out)
        logger.info(f"Unified manifest written to {out}")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--datasets", default=None, help="Comma-separated manifest paths (overrides the config)")
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--lr", type=float, default=None, help="Learning rate")
@click.option("--loss", "loss_mode", type=click.Choice(LOSS_MODES), default=None)
@click.option("--swipe", default=None, help="Lambda swipe as start:end epochs")
@click.option("--dtype", type=click.Choice(sorted(DTYPES)), default=None)
@click.option("--out", type=click.Path(file_okay=False), default="runs/latest", show_default=True,
              help="Run directory for checkpoints and history")
def train(config_path, datasets, seed, epochs, batch_size, lr, loss_mode, swipe, dtype, out):
    """Train both encoders; CLI flags override the YAML config."""
    data = config_to_dict(TrainConfig.from_yaml(config_path) if config_path else TrainConfig())
    overrides = {"seed": seed, "epochs": epochs, "batch_size": batch_size, "learning_rate": lr, "dtype": dtype}
    data.update({k: v for k, v in overrides.items() if v is not None})
    if datasets is not None:
        data["datasets"] = _split_list(datasets)
    if loss_mode is not None:
        data["loss"]["mode"] = loss_mode
    if swipe is not None:
        data["swipe"]["t_start"], data["swipe"]["t_end"] = parse_swipe(swipe)
    config = TrainConfig.from_dict(data)

    dataset = load_datasets(config.datasets)
    Path(out).mkdir(parents=True, exist_ok=True)
    config.to_yaml(Path(out) / "config.yaml")
    result = run_training(config, dataset, out)
    logger.info(f"Training done: last checkpoint {result.checkpoint}"
                + (f", best Rsum {result.best_rsum:.2f}" if result.best_rsum is not None else ""))


@cli.command()
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dataset", "dataset_path", type=click.Path(dir_okay=False), required=True)
@click.option("--split", type=click.Choice(SPLITS), default="test", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def embed(checkpoint: str, dataset_path: str, split: str, out: str):
    """Build an embedding database of a split's motions."""
    db = build_db(checkpoint, load_manifest(dataset_path), split, out)
    logger.info(f"{len(db)} motion embeddings stored")


@cli.command("eval")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dataset", "dataset_path", type=click.Path(dir_okay=False), required=True)
@click.option("--split", type=click.Choice(SPLITS), default="test", show_default=True)
@click.option("--protocols", default=",".join(PROTOCOLS), show_default=True)
@click.option("--threshold", type=float, default=0.95, show_default=True)
@click.option("--subset", type=int, default=100, show_default=True)
@click.option("--batch", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--reps", type=int, default=10, show_default=True)
@click.option("--teacher-embeddings", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Teacher embedding file (otherwise the checkpoint's teacher kind)")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="JSON-lines record file")
def evaluate_cmd(checkpoint, dataset_path, split, protocols, threshold, subset, batch, seed, reps,
                 teacher_embeddings, out):
    """Evaluate a checkpoint under the retrieval protocols."""
    settings = EvalSettings(protocols=tuple(_split_list(protocols)), threshold=threshold, subset=subset,
                            batch=batch, seed=seed, reps=reps)
    model, _ = load_model(checkpoint)
    dataset = load_manifest(dataset_path)

    teacher = None
    if {"all_threshold", "dissimilar"} & set(settings.protocols):
        if teacher_embeddings is not None:
            teacher = build_teacher("embeddings", path=teacher_embeddings)
        else:
            tc = model.config.teacher
            teacher = build_teacher(tc.kind, dataset.texts(split), tc.path)

    results = evaluate(model, dataset, split, teacher, settings)
    rows = results + ([average_over_protocols(results)] if len(results) > 1 else [])
    click.echo(render_table(rows))
    if out is not None:
        write_records(out, rows)
        logger.info(f"Records written to {out}")


@cli.command()
@click.option("--db", "db_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--text", default=None, help="Query description")
@click.option("--motion-id", default=None, help="Query by a stored motion instead of text")
@click.option("--k", type=int, default=5, show_default=True)
@click.option("--checkpoint", type=click.Path(dir_okay=False), default=None,
              help="Defaults to the checkpoint recorded in the database")
def query(db_path: str, text: Optional[str], motion_id: Optional[str], k: int, checkpoint: Optional[str]):
    """Top-k motions for a text (or for a stored motion)."""
    if (text is None) == (motion_id is None):
        raise ConfigError("give exactly one of --text and --motion-id")
    db = EmbeddingDB.load(db_path)
    hits = query_db(db, text, checkpoint, k) if text is not None else query_by_example(db, motion_id, k)
    for rank, hit in enumerate(hits, start=1):
        click.echo(f"{rank}\t{hit.id}\t{hit.score:.6f}")


@cli.command()
@click.option("--tol", type=float, default=1e-4, show_default=True)
@click.option("--eps", type=float, default=1e-5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--report-dir", type=click.Path(file_okay=False), default=None, help="Write a JSON report here")
def gradcheck(tol: float, eps: float, seed: int, report_dir: Optional[str]):
    """Finite-difference verification of every loss term and both encoders."""
    report = GradientCheckSuite(tol=tol, eps=eps, seed=seed).run_full_suite(report_dir)
    if not report.overall_pass:
        failed = [c.name for c in report.checks if not c.passed]
        raise GradCheckFailure(f"gradient checks failed: {', '.join(failed)}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map failures to exit codes."""
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="motion-retrieval",
                          standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except MotionRetrievalError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
