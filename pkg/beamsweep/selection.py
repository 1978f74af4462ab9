"""Beam subset selection for the three training scenarios.

1. Coupled with location: the BS picks the top-N_B pairs from predicted
   throughput ratios and tells the UE its combiners.
2. Decoupled with location: each side keeps its beams with the highest
   predicted ATRs.
3. Decoupled without location: the UE keeps its top-ATR combiners while the
   BS sweeps a location-free beam set chosen offline from clustered ATRs.
"""

import csv
import dataclasses
import enum
import logging
import math
from pathlib import Path

import numpy as np

from . import errors, storage
from .clustering import kmeans
from .regressor import predict
from .utils import atomic_write, format_float, top_k

__all__ = [
    "Scenario",
    "BeamPairSet",
    "DecoupledSets",
    "ClusterCoveragePlan",
    "select_coupled",
    "overhead_bits",
    "select_decoupled_with_location",
    "kth_best_probability",
    "kth_best_tables",
    "coverage_order",
    "select_bs_coverage",
    "select_decoupled_no_location",
    "save_plan",
    "load_plan",
    "write_plan_csv",
]

logger = logging.getLogger(__name__)


class Scenario(enum.IntEnum):
    COUPLED = 1
    DECOUPLED = 2
    LOCATION_FREE = 3


@dataclasses.dataclass(frozen=True, eq=False)
class BeamPairSet:
    # Flattened pair indices, best first.
    indices: np.ndarray
    num_beamformers: int

    @property
    def budget(self):
        return len(self.indices)

    @property
    def pairs(self):
        return [divmod(int(index), self.num_beamformers) for index in self.indices]


@dataclasses.dataclass(frozen=True, eq=False)
class DecoupledSets:
    combiners: np.ndarray
    beamformers: np.ndarray

    @property
    def budget(self):
        return len(self.combiners) * len(self.beamformers)

    def pair_indices(self, num_beamformers):
        return (
            self.combiners[:, None] * num_beamformers + self.beamformers[None, :]
        ).reshape(-1)


@dataclasses.dataclass(frozen=True, eq=False)
class ClusterCoveragePlan:
    centroids: np.ndarray
    assignments: np.ndarray
    significances: np.ndarray
    # probabilities[c, k - 1, j] is the chance that beamformer j ranks k-th in
    # cluster c.
    probabilities: np.ndarray
    # Greedy coverage order over the whole codebook; S_f is its prefix.
    ranking: np.ndarray
    beam_count: int
    use_significance: bool = True

    @property
    def beamformers(self):
        return self.ranking[: self.beam_count]

    def with_beam_count(self, beam_count):
        if not 1 <= beam_count <= len(self.ranking):
            raise errors.SelectionError(
                f"Plan can hold 1..{len(self.ranking)} beams, not {beam_count}."
            )
        return dataclasses.replace(self, beam_count=beam_count)

    def candidates(self, cluster, k):
        """P_{c,k}: beams with nonzero k-th-best probability, most probable first."""
        row = self.probabilities[cluster, k - 1]
        order = top_k(row, len(row))
        return order[row[order] > 0]


def select_coupled(model, location, budget, num_beamformers):
    scores = predict(model, location)
    if not 1 <= budget <= len(scores):
        raise errors.SelectionError(f"Budget {budget} outside 1..{len(scores)}.")
    return BeamPairSet(
        indices=top_k(scores, budget),
        num_beamformers=num_beamformers,
    )


def overhead_bits(scenario, subset_size, num_combiners):
    """Feedback needed to tell the UE its combiners; only scenario 1 pays it."""
    if num_combiners < 1 or num_combiners & (num_combiners - 1):
        raise errors.SelectionError(f"|W| = {num_combiners} is not a power of two.")
    if Scenario(scenario) is Scenario.COUPLED:
        return int(subset_size * math.log2(num_combiners))
    return 0


def select_decoupled_with_location(
    beamformer_model, combiner_model, location, combiner_count, beamformer_count
):
    atr_f = predict(beamformer_model, location)
    atr_w = predict(combiner_model, location)
    if not (1 <= combiner_count <= len(atr_w) and 1 <= beamformer_count <= len(atr_f)):
        raise errors.SelectionError(
            f"Infeasible split {combiner_count}x{beamformer_count} for codebooks "
            f"of {len(atr_w)} and {len(atr_f)} beams."
        )
    return DecoupledSets(
        combiners=top_k(atr_w, combiner_count),
        beamformers=top_k(atr_f, beamformer_count),
    )


def kth_best_tables(atr_f_rows):
    """All k-th-best probabilities for one cluster, shape (|F|, |F|) as [k - 1, j]."""
    rows = np.asarray(atr_f_rows, dtype=float)
    if rows.ndim != 2 or len(rows) == 0:
        raise errors.SelectionError("k-th-best probabilities need a non-empty cluster.")
    ranks = np.argsort(-rows, axis=1, kind="stable")
    size = rows.shape[1]
    counts = np.zeros((size, size))
    for k in range(size):
        counts[k] = np.bincount(ranks[:, k], minlength=size)
    return counts / len(rows)


def kth_best_probability(atr_f_rows, k):
    rows = np.asarray(atr_f_rows, dtype=float)
    if rows.ndim != 2 or len(rows) == 0:
        raise errors.SelectionError("k-th-best probabilities need a non-empty cluster.")
    if not 1 <= k <= rows.shape[1]:
        raise errors.SelectionError(f"Rank {k} outside 1..{rows.shape[1]}.")
    ranked = np.argsort(-rows, axis=1, kind="stable")[:, k - 1]
    return np.bincount(ranked, minlength=rows.shape[1]) / len(rows)


def coverage_order(probabilities, significances, beam_count):
    """Greedy location-free beam order from per-cluster k-th-best tables.

    For k = 1, 2, ... and within k for l = 1, 2, ..., the l-th most probable
    beam of every cluster is scored by G(j) = sum_c alpha_c P_c^(k)(j); the
    candidates join the set by descending G, lower index first on ties, until
    `beam_count` beams are chosen.
    """
    clusters, ranks, size = probabilities.shape
    if not 1 <= beam_count <= size:
        raise errors.SelectionError(f"Cannot select {beam_count} of {size} beams.")
    chosen = []
    seen = np.zeros(size, dtype=bool)
    for k in range(ranks):
        table = probabilities[:, k, :]
        scores = significances @ table
        candidate_lists = []
        for cluster in range(clusters):
            order = top_k(table[cluster], size)
            candidate_lists.append(order[table[cluster, order] > 0])
        depth = max((len(candidates) for candidates in candidate_lists), default=0)
        for position in range(depth):
            pool = sorted(
                {
                    int(candidates[position])
                    for candidates in candidate_lists
                    if position < len(candidates)
                },
                key=lambda beam: (-scores[beam], beam),
            )
            for beam in pool:
                if seen[beam]:
                    continue
                chosen.append(beam)
                seen[beam] = True
                if len(chosen) == beam_count:
                    return np.array(chosen, dtype=np.int64)
    missing = np.flatnonzero(~seen)[: beam_count - len(chosen)]
    logger.warning(
        "Only %d beams were ever ranked; filling %d by ascending index.",
        len(chosen),
        len(missing),
    )
    return np.concatenate([np.array(chosen, dtype=np.int64), missing])


def select_bs_coverage(
    locations, atr_f, cluster_count, beam_count, seed=0, use_significance=True, max_iters=100
):
    """Cluster the training locations and choose a location-free BS beam set."""
    atr_f = np.asarray(atr_f, dtype=float)
    if not 1 <= beam_count <= atr_f.shape[1]:
        raise errors.SelectionError(f"Cannot select {beam_count} of {atr_f.shape[1]} beams.")
    centroids, assignments = kmeans(locations, cluster_count, seed, max_iters)
    sizes = np.bincount(assignments, minlength=cluster_count)
    if use_significance:
        significances = sizes / sizes.sum()
    else:
        significances = np.ones(cluster_count)
    probabilities = np.array(
        [kth_best_tables(atr_f[assignments == cluster]) for cluster in range(cluster_count)]
    )
    ranking = coverage_order(probabilities, significances, atr_f.shape[1])
    return ClusterCoveragePlan(
        centroids=centroids,
        assignments=assignments,
        significances=significances,
        probabilities=probabilities,
        ranking=ranking,
        beam_count=beam_count,
        use_significance=use_significance,
    )


def select_decoupled_no_location(combiner_model, location, combiner_count, plan):
    atr_w = predict(combiner_model, location)
    if not 1 <= combiner_count <= len(atr_w):
        raise errors.SelectionError(f"Cannot select {combiner_count} of {len(atr_w)} combiners.")
    return DecoupledSets(
        combiners=top_k(atr_w, combiner_count),
        beamformers=plan.beamformers.copy(),
    )


def save_plan(path, plan):
    storage.write_arrays(
        path,
        "plan",
        {
            "centroids": plan.centroids,
            "assignments": plan.assignments,
            "significances": plan.significances,
            "probabilities": plan.probabilities,
            "ranking": plan.ranking,
        },
        attrs={"beam_count": plan.beam_count, "use_significance": plan.use_significance},
    )


def load_plan(path):
    arrays, attrs = storage.read_arrays(path, "plan")
    return ClusterCoveragePlan(
        beam_count=attrs["beam_count"],
        use_significance=attrs["use_significance"],
        **arrays,
    )


def write_plan_csv(plan_path, plan):
    """Write `<stem>_beams.csv` (S_f in order) and `<stem>_clusters.csv` beside the plan."""
    plan_path = Path(plan_path)
    directory, stem = plan_path.parent, plan_path.stem
    with atomic_write(directory / f"{stem}_beams.csv", "w") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["beam_rank", "beamformer"])
        for rank, beam in enumerate(plan.beamformers, start=1):
            writer.writerow([rank, int(beam)])
    with atomic_write(directory / f"{stem}_clusters.csv", "w") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["cluster", "centroid_x", "centroid_y", "significance", "size"])
        sizes = np.bincount(plan.assignments, minlength=len(plan.centroids))
        for cluster, (centroid, significance) in enumerate(
            zip(plan.centroids, plan.significances)
        ):
            writer.writerow(
                [
                    cluster,
                    format_float(centroid[0]),
                    format_float(centroid[1]),
                    format_float(significance),
                    int(sizes[cluster]),
                ]
            )
