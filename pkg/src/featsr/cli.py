"""Operator entry points: train, sr, eval, compare.

Run configuration is a JSON document; unknown keys are rejected. Any key
can be overridden from the environment with the FEATSR_ prefix, using
double underscores for nesting (FEATSR_TRAIN__ITERATIONS=10).

Exit codes: 0 success, 2 usage/config error, 3 runtime/training error.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import checkpoint as ckpt
from . import data as D
from . import metrics as MX
from . import models, training
from .losses import VARIANTS
from .nn import ConfigurationError
from .training import TrainConfig, TrainingError

ENV_PREFIX = "FEATSR_"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

RUN_CONFIG_KEYS = {"dataset", "dataset_name", "output_dir", "train", "metrics", "strategies"}
DATASET_KEYS = {"train_dir", "test_manifest", "crop_size", "crops_per_image", "seed", "lr_mode"}
METRIC_KEYS = {"random_seed", "external_nets"}


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_env_overrides(doc: dict, environ=None) -> dict:
    environ = os.environ if environ is None else environ
    for key, raw in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        path = [p.lower() for p in key[len(ENV_PREFIX) :].split("__")]
        if path == ["backend"]:  # kernel backend selector, not a config key
            continue
        node = doc
        for p in path[:-1]:
            node = node.setdefault(p, {})
        node[path[-1]] = _parse_env_value(raw)
    return doc


def load_run_config(path: str | None, seed: int | None = None, out: str | None = None) -> dict:
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}")
    doc = apply_env_overrides(doc)
    unknown = set(doc) - RUN_CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    for section, keys in (("dataset", DATASET_KEYS), ("metrics", METRIC_KEYS)):
        bad = set(doc.get(section, {})) - keys
        if bad:
            raise ConfigurationError(f"unknown {section} keys: {sorted(bad)}")
    if seed is not None:
        doc.setdefault("train", {})["seed"] = seed
    if out is not None:
        doc["output_dir"] = out
    return doc


def _train_config(doc: dict) -> TrainConfig:
    return training.config_from_dict(doc.get("train", {}))


def _load_train_dataset(doc: dict) -> D.PairDataset:
    ds_cfg = doc.get("dataset", {})
    if "train_dir" not in ds_cfg:
        raise ConfigurationError("missing config field: dataset.train_dir")
    return D.load_corpus(
        ds_cfg["train_dir"],
        crop_size=int(ds_cfg.get("crop_size", 32)),
        crops_per_image=int(ds_cfg.get("crops_per_image", 4)),
        seed=int(ds_cfg.get("seed", 0)),
        lr_mode=ds_cfg.get("lr_mode", "bicubic"),
    )


def _echo_config(doc: dict, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _grid_png(state: training.TrainState, dataset: D.PairDataset, path: Path, samples: int = 4):
    """LR (nearest-upscaled) | SR | HR, one row per sample."""
    rows = []
    for lr, hr in dataset.pairs[: min(samples, len(dataset))]:
        sr = training.sr_image(state.generator, state.config.generator, lr)
        lr_up = np.repeat(np.repeat(lr, 4, axis=1), 4, axis=2)
        row = np.concatenate([D.denormalize(a) for a in (lr_up, sr, hr)], axis=2)
        rows.append(row)
    grid = np.concatenate(rows, axis=1).transpose(1, 2, 0)
    Image.fromarray(grid).save(path)


def _metric_nets(doc: dict) -> list[MX.FeatureNet]:
    mcfg = doc.get("metrics", {})
    nets = MX.reference_nets(random_seed=int(mcfg.get("random_seed", 0)))
    for name, netpath in mcfg.get("external_nets", {}).items():
        nets.append(MX.FeatureNet(name, models.FeatureTap("external"), ckpt.load_external_net(netpath)))
    return nets


def run_train(doc: dict) -> Path:
    config = _train_config(doc)
    dataset = _load_train_dataset(doc)
    out_dir = Path(doc.get("output_dir", "runs/train"))
    _echo_config(doc, out_dir)
    dataset.save_manifest(out_dir / "train_manifest.txt")

    def on_log(state):
        _grid_png(state, dataset, out_dir / f"samples_iter{state.iteration}.png")

    state = training.train(config, dataset, out_dir=out_dir, on_log=on_log)
    click.echo(f"trained {state.iteration} iterations -> {out_dir / 'final.ckpt'}")
    return out_dir / "final.ckpt"


def run_sr(checkpoint_path: str, input_path: str, output_path: str):
    generator, spec = training.load_generator(checkpoint_path)
    with Image.open(input_path) as im:
        arr = np.asarray(im.convert("RGB"))
    lr = D.normalize(arr).transpose(2, 0, 1)
    sr = training.sr_image(generator, spec, lr)
    out = D.denormalize(sr).transpose(1, 2, 0)
    Image.fromarray(out).save(output_path)
    click.echo(f"wrote {output_path} ({out.shape[1]}x{out.shape[0]})")


def run_eval(checkpoints: list[str], manifest: str, doc: dict, out_dir: Path, dataset_name: str) -> Path:
    test_set = D.load_manifest(manifest)
    nets = _metric_nets(doc)
    rows = []
    for cp in checkpoints:
        generator, spec = training.load_generator(cp)
        gen = lambda lr, g=generator, s=spec: training.sr_image(g, s, lr)
        rows.append(MX.evaluate_method(Path(cp).parent.name or Path(cp).name, gen, test_set, nets))
    report = MX.build_report(rows, dataset_name, len(test_set), [n.name for n in nets])
    out_dir.mkdir(parents=True, exist_ok=True)
    path = report.write(out_dir)
    click.echo(report.to_csv())
    click.echo(f"report -> {path}")
    return path


def run_compare(doc: dict) -> int:
    strategies = doc.get("strategies")
    if not strategies:
        raise ConfigurationError("missing config field: strategies")
    for v in strategies:
        if v not in VARIANTS:
            raise ConfigurationError(f"unknown strategy {v!r}; expected one of {VARIANTS}")
    dataset = _load_train_dataset(doc)
    out_dir = Path(doc.get("output_dir", "runs/compare"))
    _echo_config(doc, out_dir)
    manifest_path = out_dir / "shared_manifest.txt"
    dataset.save_manifest(manifest_path)
    base = doc.get("train", {})
    failures = {}
    checkpoints = []
    for variant in strategies:
        vdoc = json.loads(json.dumps(base))
        vdoc.setdefault("strategy", {})["variant"] = variant
        try:
            config = training.config_from_dict(vdoc)
            state = training.train(config, dataset, out_dir=out_dir / variant)
            checkpoints.append((variant, out_dir / variant / "final.ckpt"))
            click.echo(f"[{variant}] done ({state.iteration} iterations)")
        except Exception as exc:
            failures[variant] = str(exc)
            click.echo(f"[{variant}] FAILED: {exc}", err=True)
    if checkpoints:
        test_set = dataset  # controlled comparison on the shared manifest
        nets = _metric_nets(doc)
        rows = []
        for variant, cp in checkpoints:
            generator, spec = training.load_generator(cp)
            gen = lambda lr, g=generator, s=spec: training.sr_image(g, s, lr)
            rows.append(MX.evaluate_method(variant, gen, test_set, nets))
        report = MX.build_report(rows, doc.get("dataset_name", "compare"), len(test_set), [n.name for n in nets])
        path = report.write(out_dir)
        click.echo(report.to_csv())
        pe_cols = [c for c in report.columns() if c.startswith("PE_")]
        ranked = sorted(rows, key=lambda r: max(r[c] for c in pe_cols))
        click.echo("rank by worst-case perceptual error: " + " > ".join(r["method"] for r in ranked))
        click.echo(f"report -> {path}")
    if failures:
        click.echo(f"failed strategies: {sorted(failures)}", err=True)
        return EXIT_RUNTIME
    return EXIT_OK


# ---------------------------------------------------------------------------
# click wiring


@click.group()
def cli():
    """Train, evaluate and apply 4x super-resolution generators."""


def _guarded(fn, *args, **kwargs) -> int:
    try:
        return fn(*args, **kwargs) or EXIT_OK
    except (ConfigurationError, D.CorpusError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    except (TrainingError, ckpt.IntegrityError, ckpt.VersionError, Exception) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_RUNTIME


@cli.command("train")
@click.option("--config", "config_path", type=str, default=None, help="JSON run config")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None)
@click.option("--strategy", type=str, default=None, help="override strategy variant")
@click.option("--iterations", type=int, default=None)
def cmd_train(config_path, seed, out, strategy, iterations):
    def body():
        doc = load_run_config(config_path, seed, out)
        if strategy is not None:
            doc.setdefault("train", {}).setdefault("strategy", {})["variant"] = strategy
        if iterations is not None:
            doc.setdefault("train", {})["iterations"] = iterations
        run_train(doc)

    sys.exit(_guarded(body))


@cli.command("sr")
@click.argument("checkpoint")
@click.argument("input_image")
@click.argument("output_image")
def cmd_sr(checkpoint, input_image, output_image):
    sys.exit(_guarded(run_sr, checkpoint, input_image, output_image))


@cli.command("eval")
@click.argument("checkpoints", nargs=-1, required=True)
@click.option("--manifest", required=True, help="test-set manifest file")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--out", type=str, default="runs/eval")
@click.option("--dataset-name", type=str, default="test")
def cmd_eval(checkpoints, manifest, config_path, out, dataset_name):
    def body():
        doc = load_run_config(config_path)
        run_eval(list(checkpoints), manifest, doc, Path(out), dataset_name)

    sys.exit(_guarded(body))


@cli.command("compare")
@click.option("--config", "config_path", required=True, help="JSON run config listing strategies")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None)
def cmd_compare(config_path, seed, out):
    def body():
        doc = load_run_config(config_path, seed, out)
        return run_compare(doc)

    sys.exit(_guarded(body))


def main():
    try:
        cli(standalone_mode=False)
    except SystemExit:
        raise
    except (click.UsageError, click.BadParameter) as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(EXIT_CONFIG)
    except click.Abort:
        sys.exit(EXIT_RUNTIME)


if __name__ == "__main__":
    main()
