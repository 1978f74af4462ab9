"""Command implementations behind `python -m beamsweep`."""

import dataclasses
import logging
from pathlib import Path
import sys

from . import errors
from .config import ExperimentConfig
from .dataset import (
    build_rate_dataset,
    load_dataset,
    save_dataset,
    split_dataset,
    to_atr,
    to_throughput_ratios,
)
from .experiment import emit_outputs, fit_role, role_targets, run_experiment
from .regressor import ModelRole, load_model, save_model
from .report import render_model
from .scene import (
    codebooks,
    generate_snapshots,
    load_corpus,
    save_corpus,
    trace_corpus,
    write_scene_index,
)
from .selection import save_plan, select_bs_coverage, write_plan_csv

__all__ = [
    "scene_gen",
    "dataset_build",
    "dataset_transform",
    "model_train",
    "model_inspect",
    "plan_build",
    "eval_run",
    "eval_heatmap",
]

logger = logging.getLogger(__name__)

SCENES_FILENAME = "scenes.bin"
SCENE_INDEX_FILENAME = "scenes.csv"
EXTENSIONS = {"binary": ".bin", "csv": ".csv"}


def _progress():
    return sys.stderr.isatty()


def _find_dataset(directory, name):
    directory = Path(directory)
    for file_format, extension in EXTENSIONS.items():
        path = directory / f"{name}{extension}"
        if path.exists():
            return path, file_format
    raise errors.DatasetError(f"No {name} dataset in {directory}")


def scene_gen(*, out, **kwargs):
    config = ExperimentConfig.load(**kwargs)
    snapshots = generate_snapshots(config.scene, config.seed, config.snapshot_count)
    corpus = trace_corpus(config.scene, snapshots)
    out = Path(out)
    save_corpus(out / SCENES_FILENAME, corpus)
    write_scene_index(out / SCENE_INDEX_FILENAME, corpus)
    logger.info(
        "Wrote %d snapshots with %d UEs to %s",
        len(corpus.snapshots),
        len(corpus.paths),
        out,
    )
    return corpus


def dataset_build(*, out, scenes=None, file_format="binary", stochastic=False, **kwargs):
    config = ExperimentConfig.load(**kwargs)
    if scenes is not None:
        scenes = Path(scenes)
        if scenes.is_dir():
            scenes = scenes / SCENES_FILENAME
        corpus = load_corpus(scenes, config.scene)
        snapshots, paths = corpus.snapshots, corpus.paths
    else:
        snapshots = generate_snapshots(config.scene, config.seed, config.snapshot_count)
        paths = None
    combiners, beamformers = codebooks(config.scene)
    rates = build_rate_dataset(
        config.scene,
        snapshots,
        combiners,
        beamformers,
        paths=paths,
        stochastic_seed=config.seed if stochastic or config.stochastic else None,
        workers=config.workers,
        progress=_progress(),
    )
    save_dataset(out, rates, file_format)
    logger.info("Wrote %d rate rows to %s", len(rates), out)
    return rates


def dataset_transform(*, rates, out, file_format=None, **kwargs):
    """Split a rate dataset and write the train/test ratio and ATR datasets."""
    config = ExperimentConfig.load(**kwargs)
    rates = Path(rates)
    source_format = "csv" if rates.suffix == ".csv" else "binary"
    file_format = file_format or source_format
    ratios = to_throughput_ratios(load_dataset(rates, source_format))
    atr = to_atr(ratios)
    split = split_dataset(len(ratios), config.test_fraction, config.folds, config.seed)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    extension = EXTENSIONS[file_format]
    for part, rows in (("train", split.train_rows), ("test", split.test_rows)):
        save_dataset(out / f"{part}_ratios{extension}", ratios.subset(rows), file_format)
        save_dataset(out / f"{part}_atr{extension}", atr.subset(rows), file_format)
    logger.info(
        "Wrote %d training and %d test rows to %s",
        len(split.train_rows),
        len(split.test_rows),
        out,
    )
    return split


def model_train(*, dataset, role, out, tune=False, **kwargs):
    config = dataclasses.replace(ExperimentConfig.load(**kwargs), tune=tune)
    role = ModelRole(role)
    ratios = load_dataset(*_find_dataset(dataset, "train_ratios"))
    atr = load_dataset(*_find_dataset(dataset, "train_atr"))
    model, chosen = fit_role(
        role,
        ratios.locations,
        role_targets(role, ratios, atr),
        config,
        progress=_progress(),
    )
    save_model(out, model)
    logger.info("Wrote %s model (%s) to %s", role.value, chosen, out)
    return model


def model_inspect(*, file):
    text = render_model(load_model(file))
    sys.stdout.write(text)
    return text


def plan_build(*, dataset, out, clusters=None, beam_count=None, **kwargs):
    config = ExperimentConfig.load(**kwargs)
    atr = load_dataset(*_find_dataset(dataset, "train_atr"))
    plan = select_bs_coverage(
        atr.locations,
        atr.atr_f,
        clusters or config.cluster_count,
        beam_count or atr.num_beamformers,
        seed=config.seed,
        use_significance=config.use_significance,
        max_iters=config.kmeans_max_iters,
    )
    out = Path(out)
    save_plan(out, plan)
    write_plan_csv(out, plan)
    logger.info(
        "Wrote coverage plan of %d clusters and %d beams to %s",
        len(plan.centroids),
        plan.beam_count,
        out,
    )
    return plan


def eval_run(*, out=None, **kwargs):
    config = ExperimentConfig.load(output_dir=out, **kwargs)
    result = run_experiment(config, progress=_progress())
    emit_outputs(result, config.output_dir)
    return result


def eval_heatmap(*, out=None, **kwargs):
    config = ExperimentConfig.load(output_dir=out, **kwargs)
    result = run_experiment(config, curves=False, clusters=False, progress=_progress())
    emit_outputs(result, config.output_dir)
    return result
