"""Location-based datasets: per-pair rates, throughput ratios and ATRs."""

import concurrent.futures
import csv
import dataclasses
import enum
import hashlib
import logging
import re
from pathlib import Path

import numpy as np
from tqdm import tqdm

from . import errors, storage
from .link import RateRow, sweep_all
from .scene import trace_paths, ue_channel
from .utils import (
    FOLD_STREAM,
    NOISE_STREAM,
    SPLIT_STREAM,
    atomic_write,
    format_float,
    seed_stream,
)

__all__ = [
    "DatasetKind",
    "TRRow",
    "ATRRow",
    "BeamDataset",
    "DatasetSplit",
    "build_rate_dataset",
    "to_throughput_ratios",
    "to_atr",
    "assign_folds",
    "split_dataset",
    "save_dataset",
    "load_dataset",
]

logger = logging.getLogger(__name__)

CSV_VERSION = 1
PAIR_ORDER = "row-major"


class DatasetKind(enum.Enum):
    RATES = "rates"
    RATIOS = "ratios"
    ATR = "atr"


@dataclasses.dataclass(frozen=True, eq=False)
class TRRow:
    location: np.ndarray
    ratios: np.ndarray
    max_rate: float


@dataclasses.dataclass(frozen=True, eq=False)
class ATRRow:
    location: np.ndarray
    atr_f: np.ndarray
    atr_w: np.ndarray


@dataclasses.dataclass(eq=False)
class BeamDataset:
    """Columnar dataset; one row per UE, ordered by (snapshot_id, ue_index).

    `values` holds rates or throughput ratios of shape (N, |W| * |F|); ATR
    datasets keep `atr_w` (N, |W|) and `atr_f` (N, |F|) instead.
    """

    kind: DatasetKind
    locations: np.ndarray
    snapshot_ids: np.ndarray
    ue_indices: np.ndarray
    num_combiners: int
    num_beamformers: int
    values: np.ndarray | None = None
    max_rates: np.ndarray | None = None
    atr_w: np.ndarray | None = None
    atr_f: np.ndarray | None = None

    def __len__(self):
        return len(self.locations)

    def __getitem__(self, index):
        location = self.locations[index]
        match self.kind:
            case DatasetKind.RATES:
                return RateRow(
                    location,
                    self.values[index],
                    int(self.snapshot_ids[index]),
                    int(self.ue_indices[index]),
                )
            case DatasetKind.RATIOS:
                return TRRow(location, self.values[index], float(self.max_rates[index]))
            case DatasetKind.ATR:
                return ATRRow(location, self.atr_f[index], self.atr_w[index])

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)

        def take(array):
            return None if array is None else array[rows]

        return dataclasses.replace(
            self,
            locations=self.locations[rows],
            snapshot_ids=self.snapshot_ids[rows],
            ue_indices=self.ue_indices[rows],
            values=take(self.values),
            max_rates=take(self.max_rates),
            atr_w=take(self.atr_w),
            atr_f=take(self.atr_f),
        )

    def _arrays(self):
        arrays = {
            "locations": self.locations,
            "snapshot_ids": self.snapshot_ids,
            "ue_indices": self.ue_indices,
        }
        for name in ("values", "max_rates", "atr_w", "atr_f"):
            if getattr(self, name) is not None:
                arrays[name] = getattr(self, name)
        return arrays

    def checksum(self):
        digest = hashlib.sha256(self.kind.value.encode())
        for name, array in self._arrays().items():
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(array).tobytes())
        return digest.hexdigest()


@dataclasses.dataclass(frozen=True, eq=False)
class DatasetSplit:
    train_rows: np.ndarray
    test_rows: np.ndarray
    # Fold id in 1..folds for training rows, 0 for test rows.
    fold_assignments: np.ndarray


def _snapshot_rows(config, snapshot, combiners, beamformers, paths, stochastic_seed):
    rows = []
    for ue_index in snapshot.ue_indices:
        ue_paths = paths.get((snapshot.snapshot_id, ue_index)) if paths else None
        if ue_paths is None:
            ue_paths = trace_paths(config, snapshot, ue_index)
        channel = ue_channel(config, snapshot, ue_index, ue_paths)
        rng = None
        if stochastic_seed is not None:
            rng = seed_stream(
                stochastic_seed, NOISE_STREAM, snapshot.snapshot_id, ue_index
            )
        rows.append(
            sweep_all(
                channel,
                combiners,
                beamformers,
                config.noise_power,
                stochastic=rng is not None,
                rng=rng,
            )
        )
    return rows


def build_rate_dataset(
    config,
    snapshots,
    combiners,
    beamformers,
    *,
    paths=None,
    stochastic_seed=None,
    workers=1,
    progress=False,
):
    """Sweep every UE of every snapshot and collect its rate row.

    Fully blocked UEs (all-zero rows) are dropped. With `workers > 1`,
    snapshots are processed in a process pool whose results are merged in
    snapshot order.
    """
    snapshots = sorted(snapshots, key=lambda snapshot: snapshot.snapshot_id)
    args = [
        (
            config,
            snapshot,
            combiners,
            beamformers,
            paths and {
                key: paths[key]
                for key in ((snapshot.snapshot_id, ue) for ue in snapshot.ue_indices)
                if key in paths
            },
            stochastic_seed,
        )
        for snapshot in snapshots
    ]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                tqdm(
                    pool.map(_snapshot_rows, *zip(*args)),
                    total=len(args),
                    desc="channels",
                    disable=not progress,
                )
            )
    else:
        results = [
            _snapshot_rows(*arg)
            for arg in tqdm(args, desc="channels", disable=not progress)
        ]

    rows = [row for snapshot_rows in results for row in snapshot_rows]
    kept = [row for row in rows if row.rates.max() > 0]
    if len(kept) < len(rows):
        logger.info("Dropped %d fully blocked UEs.", len(rows) - len(kept))
    if not kept:
        raise errors.DatasetError("Every UE is fully blocked; the dataset is empty.")
    return BeamDataset(
        kind=DatasetKind.RATES,
        locations=np.array([row.location for row in kept], dtype=float).reshape(-1, 2),
        snapshot_ids=np.array([row.snapshot_id for row in kept], dtype=np.int64),
        ue_indices=np.array([row.ue_index for row in kept], dtype=np.int64),
        num_combiners=len(combiners),
        num_beamformers=len(beamformers),
        values=np.array([row.rates for row in kept], dtype=float),
    )


def to_throughput_ratios(dataset):
    if dataset.kind is not DatasetKind.RATES:
        raise errors.DatasetError(f"Expected a rate dataset, got {dataset.kind.value}.")
    max_rates = dataset.values.max(axis=1)
    if np.any(max_rates <= 0):
        raise errors.DatasetError(
            f"{int(np.sum(max_rates <= 0))} rows have no positive rate."
        )
    return dataclasses.replace(
        dataset,
        kind=DatasetKind.RATIOS,
        values=dataset.values / max_rates[:, None],
        max_rates=max_rates,
    )


def to_atr(dataset):
    """Average each row's ratios over the opposing codebook.

    atr_w[i] is the mean over beamformers j of r[i, j]; atr_f[j] the mean over
    combiners i.
    """
    if dataset.kind is not DatasetKind.RATIOS:
        raise errors.DatasetError(f"Expected a ratio dataset, got {dataset.kind.value}.")
    grid = dataset.values.reshape(-1, dataset.num_combiners, dataset.num_beamformers)
    return dataclasses.replace(
        dataset,
        kind=DatasetKind.ATR,
        values=None,
        max_rates=None,
        atr_w=grid.mean(axis=2),
        atr_f=grid.mean(axis=1),
    )


def assign_folds(count, folds, seed):
    """Seeded fold ids in 1..folds whose sizes differ by at most one."""
    if folds < 2:
        raise errors.DatasetError("At least two folds are required.")
    if count < folds:
        raise errors.DatasetError(f"Cannot split {count} rows into {folds} folds.")
    order = seed_stream(seed, FOLD_STREAM).permutation(count)
    assignments = np.empty(count, dtype=np.int64)
    assignments[order] = np.arange(count) % folds + 1
    return assignments


def split_dataset(count, test_fraction=0.2, folds=10, seed=0):
    """Seeded train/test split of `count` rows, with folds over the train rows."""
    count = count if isinstance(count, int) else len(count)
    if not 0 < test_fraction < 1:
        raise errors.DatasetError("Test fraction must lie strictly between 0 and 1.")
    if count < folds:
        raise errors.DatasetError(f"Cannot split {count} rows into {folds} folds.")
    order = seed_stream(seed, SPLIT_STREAM).permutation(count)
    test_count = int(round(count * test_fraction))
    if test_count == 0 or count - test_count < folds:
        raise errors.DatasetError(
            f"Splitting {count} rows at test fraction {test_fraction} leaves "
            f"{test_count} test rows and {count - test_count} rows for {folds} folds."
        )
    test_rows = np.sort(order[:test_count])
    train_rows = np.sort(order[test_count:])
    fold_assignments = np.zeros(count, dtype=np.int64)
    fold_assignments[train_rows] = assign_folds(len(train_rows), folds, seed)
    return DatasetSplit(
        train_rows=train_rows,
        test_rows=test_rows,
        fold_assignments=fold_assignments,
    )


def _csv_columns(dataset):
    if dataset.kind is DatasetKind.ATR:
        return [f"w_{i + 1}" for i in range(dataset.num_combiners)] + [
            f"f_{j + 1}" for j in range(dataset.num_beamformers)
        ]
    columns = [
        f"r_{i + 1}_{j + 1}"
        for i in range(dataset.num_combiners)
        for j in range(dataset.num_beamformers)
    ]
    if dataset.kind is DatasetKind.RATIOS:
        columns.append("max_rate")
    return columns


def _csv_matrix(dataset):
    match dataset.kind:
        case DatasetKind.RATES:
            return dataset.values
        case DatasetKind.RATIOS:
            return np.column_stack([dataset.values, dataset.max_rates])
        case DatasetKind.ATR:
            return np.column_stack([dataset.atr_w, dataset.atr_f])


def save_dataset(path, dataset, file_format="binary"):
    match file_format:
        case "binary":
            storage.write_arrays(
                path,
                "dataset",
                dataset._arrays(),
                attrs={
                    "dataset_kind": dataset.kind.value,
                    "num_combiners": dataset.num_combiners,
                    "num_beamformers": dataset.num_beamformers,
                    "pair_order": PAIR_ORDER,
                },
            )
        case "csv":
            with atomic_write(path, "w") as file:
                file.write(
                    f"# beamsweep-dataset version={CSV_VERSION} "
                    f"kind={dataset.kind.value} combiners={dataset.num_combiners} "
                    f"beamformers={dataset.num_beamformers} pair_order={PAIR_ORDER}\n"
                )
                writer = csv.writer(file, lineterminator="\n")
                writer.writerow(["x", "y", "snapshot_id", *_csv_columns(dataset)])
                matrix = _csv_matrix(dataset)
                for location, snapshot_id, values in zip(
                    dataset.locations, dataset.snapshot_ids, matrix
                ):
                    writer.writerow(
                        [
                            format_float(location[0]),
                            format_float(location[1]),
                            int(snapshot_id),
                            *(format_float(value) for value in values),
                        ]
                    )
        case _:
            raise errors.DatasetError(f"Unknown dataset format: {file_format}")
    logger.info("Wrote %s dataset (%d rows): %s", dataset.kind.value, len(dataset), path)


_CSV_HEADER = re.compile(
    r"# beamsweep-dataset version=(\d+) kind=(\w+) combiners=(\d+) "
    r"beamformers=(\d+) pair_order=([\w-]+)"
)


def _load_csv(path):
    with Path(path).open(newline="") as file:
        match = _CSV_HEADER.fullmatch(file.readline().rstrip("\n"))
        if not match:
            raise errors.FormatError(f"Missing dataset header: {Path(path).as_posix()}")
        version, kind, num_combiners, num_beamformers, pair_order = match.groups()
        if int(version) != CSV_VERSION or pair_order != PAIR_ORDER:
            raise errors.VersionMismatchError(
                f"Unsupported dataset version {version} ({pair_order})"
            )
        try:
            kind = DatasetKind(kind)
        except ValueError:
            raise errors.FormatError(f"Unknown dataset kind: {kind}") from None
        reader = csv.reader(file)
        columns = next(reader, None)
        dataset = BeamDataset(
            kind=kind,
            locations=np.zeros((0, 2)),
            snapshot_ids=np.zeros(0, dtype=np.int64),
            ue_indices=np.zeros(0, dtype=np.int64),
            num_combiners=int(num_combiners),
            num_beamformers=int(num_beamformers),
        )
        expected = ["x", "y", "snapshot_id", *_csv_columns(dataset)]
        if columns != expected:
            raise errors.FormatError("Dataset CSV columns do not match its header.")
        try:
            rows = [[float(value) for value in row] for row in reader]
        except ValueError as exc:
            raise errors.FormatError(f"Malformed dataset row: {exc}") from exc
    if any(len(row) != len(expected) for row in rows):
        raise errors.TruncatedFileError("Dataset CSV has incomplete rows.")
    table = np.array(rows, dtype=float).reshape(-1, len(expected))
    matrix = table[:, 3:]
    dataset.locations = table[:, :2]
    dataset.snapshot_ids = table[:, 2].astype(np.int64)
    # The CSV layout carries no UE index.
    dataset.ue_indices = np.full(len(table), -1, dtype=np.int64)
    match kind:
        case DatasetKind.RATES:
            dataset.values = matrix
        case DatasetKind.RATIOS:
            dataset.values, dataset.max_rates = matrix[:, :-1], matrix[:, -1]
        case DatasetKind.ATR:
            dataset.atr_w = matrix[:, : dataset.num_combiners]
            dataset.atr_f = matrix[:, dataset.num_combiners :]
    return dataset


def load_dataset(path, file_format="binary"):
    match file_format:
        case "binary":
            arrays, attrs = storage.read_arrays(path, "dataset")
            if attrs.get("pair_order") != PAIR_ORDER:
                raise errors.VersionMismatchError(
                    f"Unsupported pair order: {attrs.get('pair_order')!r}"
                )
            return BeamDataset(
                kind=DatasetKind(attrs["dataset_kind"]),
                num_combiners=attrs["num_combiners"],
                num_beamformers=attrs["num_beamformers"],
                **arrays,
            )
        case "csv":
            return _load_csv(path)
        case _:
            raise errors.DatasetError(f"Unknown dataset format: {file_format}")
