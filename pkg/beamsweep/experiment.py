"""Evaluation metrics and the end-to-end experiment.

The experiment generates a street corpus, sweeps every UE exhaustively,
trains the predictors of each scenario on 80% of the UEs and measures, on the
remaining UEs, how much throughput each beam-training scheme keeps for a
given number of swept beam pairs.
"""

import contextlib
import csv
import dataclasses
import json
import logging
from pathlib import Path

import numpy as np

from . import errors, report
from .dataset import build_rate_dataset, split_dataset, to_atr, to_throughput_ratios
from .regressor import (
    ModelRole,
    hyperparameter_grid,
    kfold_tune,
    param_count,
    role_budget,
    train,
)
from .scene import codebooks, generate_snapshots
from .selection import Scenario, overhead_bits, select_bs_coverage
from .utils import (
    FOLD_STREAM,
    KMEANS_STREAM,
    NOISE_STREAM,
    SNAPSHOT_STREAM,
    SPLIT_STREAM,
    atomic_write,
    format_float,
    top_k_rows,
)

__all__ = [
    "CurvePoint",
    "ClusterPoint",
    "TargetPoint",
    "Predictions",
    "EvalResult",
    "misalignment_probability",
    "avg_throughput_ratio",
    "decoupled_counts",
    "coupled_selection",
    "decoupled_selection",
    "evaluate_curves",
    "decoupled_heatmap",
    "beams_for_target",
    "role_targets",
    "fit_role",
    "run_experiment",
    "emit_outputs",
]

logger = logging.getLogger(__name__)

SCENARIO_ROLES = {
    Scenario.COUPLED: (ModelRole.COUPLED,),
    Scenario.DECOUPLED: (ModelRole.DECOUPLED_F, ModelRole.DECOUPLED_W),
    Scenario.LOCATION_FREE: (ModelRole.LOCATION_FREE_W,),
}


@dataclasses.dataclass(frozen=True)
class CurvePoint:
    scenario: int
    budget: int
    # Pairs actually tried; below the budget when |S_w| does not divide it.
    pairs: int
    # Decoupled set sizes; None for the coupled scenario.
    combiners: int | None
    beamformers: int | None
    throughput_ratio: float
    misalignment: float
    overhead_bits: int


@dataclasses.dataclass(frozen=True)
class ClusterPoint:
    cluster_count: int
    budget: int
    pairs: int
    combiners: int
    beamformers: int
    throughput_ratio: float
    misalignment: float


@dataclasses.dataclass(frozen=True)
class TargetPoint:
    scenario: int
    target: float
    combiners: int
    # None when even the whole heatmap row stays below the target.
    beamformers: int | None

    @property
    def pairs(self):
        return None if self.beamformers is None else self.combiners * self.beamformers


@dataclasses.dataclass(frozen=True, eq=False)
class Predictions:
    """Predicted scores for the test rows, one array per model role."""

    ratios: np.ndarray | None = None
    atr_f: np.ndarray | None = None
    atr_w: np.ndarray | None = None
    location_free_atr_w: np.ndarray | None = None


@dataclasses.dataclass(eq=False)
class EvalResult:
    curves: list
    # Scenario -> grid of mean R_T indexed by [|S_w| - 1, |S_f| - 1].
    heatmaps: dict
    cluster_curves: list
    targets: list
    test_count: int
    seeds: dict
    manifest: dict


def _ratio_matrix(ratios):
    matrix = np.asarray(getattr(ratios, "values", ratios), dtype=float)
    if matrix.ndim != 2 or len(matrix) == 0:
        raise errors.SelectionError("Ratios must be a non-empty (rows, pairs) array.")
    return matrix


def _check_lengths(ratios, selected):
    if len(selected) != len(ratios):
        raise errors.SelectionError(
            f"{len(selected)} selected sets for {len(ratios)} test rows."
        )


def misalignment_probability(ratios, selected):
    """Fraction of rows whose best pair (lowest index on ties) is not selected."""
    ratios = _ratio_matrix(ratios)
    _check_lengths(ratios, selected)
    best = np.argmax(ratios, axis=1)
    if isinstance(selected, np.ndarray) and selected.ndim == 2:
        hits = np.any(selected == best[:, None], axis=1)
    else:
        hits = np.array(
            [
                int(best[row]) in np.asarray(pairs).ravel()
                for row, pairs in enumerate(selected)
            ]
        )
    return float(1.0 - hits.mean())


def avg_throughput_ratio(ratios, selected):
    """Mean over rows of the best selected rate relative to the best rate."""
    ratios = _ratio_matrix(ratios)
    _check_lengths(ratios, selected)
    best = ratios.max(axis=1)
    if isinstance(selected, np.ndarray) and selected.ndim == 2:
        if selected.shape[1] == 0:
            raise errors.SelectionError("Subset of beam pairs is empty.")
        kept = np.take_along_axis(ratios, selected.astype(np.int64), axis=1).max(axis=1)
    else:
        kept = []
        for row, pairs in zip(ratios, selected):
            pairs = np.asarray(pairs, dtype=np.int64).ravel()
            if pairs.size == 0:
                raise errors.SelectionError("Subset of beam pairs is empty.")
            kept.append(row[pairs].max())
        kept = np.array(kept)
    with np.errstate(divide="ignore", invalid="ignore"):
        per_row = np.where(best > 0, kept / best, 1.0)
    return float(per_row.mean())


def decoupled_counts(budget, combiner_count, num_beamformers):
    """Realize a pair budget as |S_w| x |S_f| with |S_w| |S_f| <= budget."""
    if budget < 1:
        raise errors.SelectionError(f"Budget {budget} must be positive.")
    combiners = min(budget, combiner_count)
    beamformers = min(max(1, budget // combiners), num_beamformers)
    return combiners, beamformers


def coupled_selection(ratio_predictions, budget):
    return top_k_rows(ratio_predictions, budget)


def decoupled_selection(combiner_order, beamformer_order, combiners, beamformers):
    """Flattened pair indices of S_w x S_f per row.

    `beamformer_order` is either one order per row or a single location-free
    order shared by every row. Its width must be the whole codebook |F|.
    """
    combiner_order = np.asarray(combiner_order)
    beamformer_order = np.asarray(beamformer_order)
    num_beamformers = beamformer_order.shape[-1]
    chosen_w = combiner_order[:, :combiners]
    chosen_f = np.broadcast_to(
        beamformer_order[..., :beamformers], (len(chosen_w), beamformers)
    )
    pairs = chosen_w[:, :, None] * num_beamformers + chosen_f[:, None, :]
    return pairs.reshape(len(chosen_w), -1)


def _scenario_orders(scenario, predictions, plan):
    match scenario:
        case Scenario.DECOUPLED:
            if predictions.atr_f is None:
                raise errors.SelectionError("No beamformer predictions for scenario 2.")
            atr_w = predictions.atr_w
            order_f = top_k_rows(predictions.atr_f, predictions.atr_f.shape[1])
        case Scenario.LOCATION_FREE:
            if plan is None:
                raise errors.SelectionError("Scenario 3 needs a coverage plan.")
            atr_w = predictions.location_free_atr_w
            order_f = plan.ranking
        case _:
            raise errors.SelectionError(f"Scenario {scenario} has no decoupled sets.")
    if atr_w is None:
        raise errors.SelectionError(f"No combiner predictions for scenario {scenario}.")
    return top_k_rows(atr_w, atr_w.shape[1]), order_f


def evaluate_curves(
    ratios,
    predictions,
    plan,
    *,
    scenarios,
    budgets,
    combiner_count,
    num_combiners,
):
    """R_T and P_m of every scenario at every pair budget."""
    ratios = _ratio_matrix(ratios)
    curves = []
    for scenario in map(Scenario, scenarios):
        if scenario is Scenario.COUPLED:
            if predictions.ratios is None:
                raise errors.SelectionError("No pair predictions for scenario 1.")
            order = coupled_selection(predictions.ratios, max(budgets))
        else:
            order_w, order_f = _scenario_orders(scenario, predictions, plan)
            num_beamformers = np.shape(order_f)[-1]
        for budget in budgets:
            if scenario is Scenario.COUPLED:
                selected = order[:, :budget]
                combiners = beamformers = None
                bits = overhead_bits(scenario, budget, num_combiners)
            else:
                combiners, beamformers = decoupled_counts(
                    budget, min(combiner_count, num_combiners), num_beamformers
                )
                selected = decoupled_selection(order_w, order_f, combiners, beamformers)
                bits = 0
            curves.append(
                CurvePoint(
                    scenario=int(scenario),
                    budget=budget,
                    pairs=int(selected.shape[1]),
                    combiners=combiners,
                    beamformers=beamformers,
                    throughput_ratio=avg_throughput_ratio(ratios, selected),
                    misalignment=misalignment_probability(ratios, selected),
                    overhead_bits=bits,
                )
            )
    return curves


def decoupled_heatmap(ratios, combiner_order, beamformer_order, shape):
    """Mean R_T for every (|S_w|, |S_f|) up to `shape`, indexed [|S_w| - 1, |S_f| - 1].

    Selecting the top a combiners and top b beamformers of each row keeps the
    best ratio inside that block; a running maximum along both axes of the
    block permuted by the predicted orders gives every (a, b) at once.
    """
    ratios = _ratio_matrix(ratios)
    combiner_order = np.asarray(combiner_order)
    beamformer_order = np.asarray(beamformer_order)
    num_combiners = combiner_order.shape[1]
    num_beamformers = beamformer_order.shape[-1]
    rows, cols = shape
    count = len(ratios)
    grid = ratios.reshape(count, num_combiners, num_beamformers)
    best = ratios.max(axis=1)[:, None, None]
    # Rows without any positive rate count as fully recovered, as in avg_throughput_ratio.
    grid = np.divide(grid, best, out=np.ones_like(grid), where=best > 0)
    order_f = np.broadcast_to(beamformer_order[..., :cols], (count, cols))
    block = grid[
        np.arange(count)[:, None, None],
        combiner_order[:, :rows, None],
        order_f[:, None, :],
    ]
    block = np.maximum.accumulate(np.maximum.accumulate(block, axis=1), axis=2)
    return block.mean(axis=0)


def beams_for_target(heatmap, target, scenario=Scenario.DECOUPLED):
    """For every |S_w|, the fewest BS beams whose mean R_T reaches `target`."""
    points = []
    for row, values in enumerate(np.asarray(heatmap)):
        reached = np.flatnonzero(values >= target)
        points.append(
            TargetPoint(
                scenario=int(scenario),
                target=float(target),
                combiners=row + 1,
                beamformers=int(reached[0]) + 1 if reached.size else None,
            )
        )
    return points


def role_targets(role, ratios, atr):
    match role:
        case ModelRole.COUPLED:
            return ratios.values
        case ModelRole.DECOUPLED_F:
            return atr.atr_f
        case ModelRole.DECOUPLED_W | ModelRole.LOCATION_FREE_W:
            return atr.atr_w


def fit_role(role, locations, targets, config, fold_assignments=None, progress=False):
    """Tune (if enabled) and train the model of one role; returns (model, TrainConfig)."""
    grid = hyperparameter_grid(config.grid, role_budget(role, config.num_pairs))
    if config.tune:
        chosen = kfold_tune(
            locations,
            targets,
            grid,
            config.folds,
            config.seed,
            fold_assignments=fold_assignments,
        )
    else:
        chosen = grid[0]
    model = train(locations, targets, chosen, role, progress=progress)
    logger.info(
        "Trained %s: %d trees, %d of %d parameters.",
        role.value,
        model.tree_count,
        param_count(model),
        chosen.budget_parameters,
    )
    return model, chosen


@contextlib.contextmanager
def _stage(name):
    logger.info("Stage: %s", name)
    try:
        yield
    except errors.ExperimentError:
        raise
    except errors.Error as exc:
        raise errors.ExperimentError(name, str(exc)) from exc


def run_experiment(
    config,
    *,
    curves=True,
    heatmap=True,
    clusters=True,
    progress=False,
):
    """Run the whole pipeline for `config` and collect an EvalResult.

    A failure in any step is re-raised as ExperimentError naming that step.
    """
    scenarios = [Scenario(value) for value in config.scenarios] if curves else []
    if heatmap:
        scenarios = sorted(set(scenarios) | {Scenario.DECOUPLED, Scenario.LOCATION_FREE})
    if clusters:
        scenarios = sorted(set(scenarios) | {Scenario.LOCATION_FREE})

    with _stage("scene"):
        snapshots = generate_snapshots(config.scene, config.seed, config.snapshot_count)
        combiners, beamformers = codebooks(config.scene)

    with _stage("dataset"):
        rates = build_rate_dataset(
            config.scene,
            snapshots,
            combiners,
            beamformers,
            stochastic_seed=config.seed if config.stochastic else None,
            workers=config.workers,
            progress=progress,
        )
        ratios = to_throughput_ratios(rates)
        atr = to_atr(ratios)
        split = split_dataset(len(ratios), config.test_fraction, config.folds, config.seed)
        train_ratios = ratios.subset(split.train_rows)
        test_ratios = ratios.subset(split.test_rows)
        train_atr = atr.subset(split.train_rows)
        fold_assignments = split.fold_assignments[split.train_rows]
        logger.info(
            "%d UEs: %d for training, %d for testing.",
            len(ratios),
            len(split.train_rows),
            len(split.test_rows),
        )

    models = {}
    with _stage("training"):
        roles = [role for scenario in scenarios for role in SCENARIO_ROLES[scenario]]
        for role in roles:
            models[role] = fit_role(
                role,
                train_ratios.locations,
                role_targets(role, train_ratios, train_atr),
                config,
                fold_assignments,
                progress,
            )

    with _stage("coverage"):
        plan = None
        if Scenario.LOCATION_FREE in scenarios:
            plan = select_bs_coverage(
                train_atr.locations,
                train_atr.atr_f,
                config.cluster_count,
                len(beamformers),
                seed=config.seed,
                use_significance=config.use_significance,
                max_iters=config.kmeans_max_iters,
            )

    with _stage("evaluation"):
        locations = test_ratios.locations

        def predicted(role):
            return models[role][0].predict_many(locations) if role in models else None

        predictions = Predictions(
            ratios=predicted(ModelRole.COUPLED),
            atr_f=predicted(ModelRole.DECOUPLED_F),
            atr_w=predicted(ModelRole.DECOUPLED_W),
            location_free_atr_w=predicted(ModelRole.LOCATION_FREE_W),
        )
        curve_points = []
        if curves:
            curve_points = evaluate_curves(
                test_ratios,
                predictions,
                plan,
                scenarios=config.scenarios,
                budgets=config.beam_pair_budgets,
                combiner_count=config.combiner_count,
                num_combiners=config.num_combiners,
            )

        heatmaps = {}
        target_points = []
        if heatmap:
            for scenario in (Scenario.DECOUPLED, Scenario.LOCATION_FREE):
                order_w, order_f = _scenario_orders(scenario, predictions, plan)
                heatmaps[int(scenario)] = decoupled_heatmap(
                    test_ratios, order_w, order_f, config.heatmap_shape
                )
                for target in config.targets:
                    target_points.extend(
                        beams_for_target(heatmaps[int(scenario)], target, scenario)
                    )

    cluster_points = []
    if clusters:
        with _stage("cluster sweep"):
            cluster_points = _cluster_sweep(config, train_atr, test_ratios, predictions)

    seeds = {
        "master": config.seed,
        "streams": {
            "snapshots": SNAPSHOT_STREAM,
            "split": SPLIT_STREAM,
            "folds": FOLD_STREAM,
            "kmeans": KMEANS_STREAM,
            "noise": NOISE_STREAM,
        },
    }
    manifest = {
        "config_hash": config.config_hash(),
        "seeds": seeds,
        "snapshot_count": config.snapshot_count,
        "dataset": {
            "rows": len(rates),
            "train_rows": len(split.train_rows),
            "test_rows": len(split.test_rows),
            "checksums": {
                "rates": rates.checksum(),
                "ratios": ratios.checksum(),
                "atr": atr.checksum(),
            },
        },
        "models": {
            role.value: {
                "param_count": param_count(model),
                "budget_parameters": chosen.budget_parameters,
                "trees": model.tree_count,
                "train_config": dataclasses.asdict(chosen),
            }
            for role, (model, chosen) in models.items()
        },
    }
    if plan is not None:
        manifest["plan"] = {
            "cluster_count": config.cluster_count,
            "use_significance": plan.use_significance,
            "ranking": [int(beam) for beam in plan.ranking],
        }
    return EvalResult(
        curves=curve_points,
        heatmaps=heatmaps,
        cluster_curves=cluster_points,
        targets=target_points,
        test_count=len(split.test_rows),
        seeds=seeds,
        manifest=manifest,
    )


def _cluster_sweep(config, train_atr, test_ratios, predictions):
    distinct = len(np.unique(train_atr.locations, axis=0))
    points = []
    for cluster_count in config.cluster_counts:
        if cluster_count > distinct:
            logger.warning(
                "Skipping %d clusters: only %d distinct training locations.",
                cluster_count,
                distinct,
            )
            continue
        plan = select_bs_coverage(
            train_atr.locations,
            train_atr.atr_f,
            cluster_count,
            train_atr.num_beamformers,
            seed=config.seed,
            use_significance=config.use_significance,
            max_iters=config.kmeans_max_iters,
        )
        for point in evaluate_curves(
            test_ratios,
            predictions,
            plan,
            scenarios=[Scenario.LOCATION_FREE],
            budgets=config.beam_pair_budgets,
            combiner_count=config.combiner_count,
            num_combiners=config.num_combiners,
        ):
            points.append(
                ClusterPoint(
                    cluster_count=cluster_count,
                    budget=point.budget,
                    pairs=point.pairs,
                    combiners=point.combiners,
                    beamformers=point.beamformers,
                    throughput_ratio=point.throughput_ratio,
                    misalignment=point.misalignment,
                )
            )
    return points


def _write_csv(path, header, rows):
    with atomic_write(path, "w") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.info("Wrote %s", path)


def emit_outputs(result, directory):
    """Write the result files into `directory`; equal results give equal bytes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if result.curves:
        _write_csv(
            directory / "curves.csv",
            ["scenario", "N_B", "pairs", "S_w", "S_f", "R_T", "P_m", "overhead_bits"],
            [
                [
                    point.scenario,
                    point.budget,
                    point.pairs,
                    "" if point.combiners is None else point.combiners,
                    "" if point.beamformers is None else point.beamformers,
                    format_float(point.throughput_ratio),
                    format_float(point.misalignment),
                    point.overhead_bits,
                ]
                for point in result.curves
            ],
        )
    if result.heatmaps:
        _write_csv(
            directory / "heatmap.csv",
            ["scenario", "S_w", "S_f", "R_T"],
            [
                [scenario, row + 1, col + 1, format_float(value)]
                for scenario, grid in sorted(result.heatmaps.items())
                for (row, col), value in np.ndenumerate(grid)
            ],
        )
    if result.targets:
        _write_csv(
            directory / "targets.csv",
            ["scenario", "target", "S_w", "S_f", "pairs"],
            [
                [
                    point.scenario,
                    format_float(point.target),
                    point.combiners,
                    "" if point.beamformers is None else point.beamformers,
                    "" if point.pairs is None else point.pairs,
                ]
                for point in result.targets
            ],
        )
    if result.cluster_curves:
        _write_csv(
            directory / "clusters.csv",
            ["clusters", "N_B", "pairs", "S_w", "S_f", "R_T", "P_m"],
            [
                [
                    point.cluster_count,
                    point.budget,
                    point.pairs,
                    point.combiners,
                    point.beamformers,
                    format_float(point.throughput_ratio),
                    format_float(point.misalignment),
                ]
                for point in result.cluster_curves
            ],
        )
    manifest = dict(result.manifest, test_count=result.test_count)
    with atomic_write(directory / "run_manifest.json", "w") as file:
        file.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    with atomic_write(directory / "report.md", "w") as file:
        file.write(report.render_report(result))
    logger.info("Wrote run manifest and report to %s", directory)
