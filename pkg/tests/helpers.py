import os
import shutil
import tempfile
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import numpy as np

import beamsweep

TINY_CONFIG = """
snapshot_count = 3

[scene]
  subcarrier_count = 4

  [scene.bs_array]
    rows = 2
    cols = 4

  [scene.ue_array]
    rows = 2
    cols = 2

[dataset]
  folds = 2

[training]
  tune = false

  [training.grid]
    tree_count = [5]
    max_depth = [2]
    learning_rate = [0.5]
    min_samples_leaf = [2]

[selection]
  beam_pair_budgets = [1, 2, 4, 8, 32]
  combiner_count = 2
  cluster_count = 2
  cluster_counts = [1, 2]
"""


class TestTempWorkingDirMixin:

    def setUp(self):
        super().setUp()
        self.working_dir = Path(tempfile.mkdtemp())
        self.addCleanup(os.chdir, os.getcwd())
        os.chdir(self.working_dir)
        self.addCleanup(shutil.rmtree, self.working_dir)


def tiny_config(overrides=None, **kwargs):
    """A three-snapshot experiment with 2x2 UE and 2x4 BS arrays."""
    with (Path(beamsweep.__file__).parent / "defaults.toml").open("rb") as file:
        data = tomllib.load(file)
    data = beamsweep.deep_merge(data, tomllib.loads(TINY_CONFIG))
    data = beamsweep.deep_merge(data, overrides or {})
    return beamsweep.ExperimentConfig.from_dict(data, **kwargs)


def eye_geometry(rows, cols):
    """Array at the origin whose local frame is the world frame, half-wavelength spacing."""
    return beamsweep.ArrayGeometry(
        rows=rows,
        cols=cols,
        element_spacing=0.5,
        orientation=np.eye(3),
        reference_position=np.zeros(3),
    )


def car(x, y, heading=0.0):
    return beamsweep.Vehicle(
        kind=beamsweep.VehicleKind.CAR, center=(x, y), dims=(1.75, 4.5, 1.5), heading=heading
    )


def bus(x, y, heading=0.0):
    return beamsweep.Vehicle(
        kind=beamsweep.VehicleKind.BUS, center=(x, y), dims=(2.5, 12.0, 3.8), heading=heading
    )


def snapshot(*vehicles, ue_indices=None, snapshot_id=0):
    if ue_indices is None:
        ue_indices = [
            index
            for index, vehicle in enumerate(vehicles)
            if vehicle.kind is beamsweep.VehicleKind.CAR
        ]
    return beamsweep.SceneSnapshot(
        vehicles=tuple(vehicles),
        ue_indices=tuple(ue_indices),
        snapshot_id=snapshot_id,
        rng_seed=0,
    )


def rate_dataset(values, num_combiners, num_beamformers, locations=None):
    values = np.asarray(values, dtype=float)
    count = len(values)
    if locations is None:
        locations = np.column_stack([np.arange(count, dtype=float), np.zeros(count)])
    return beamsweep.BeamDataset(
        kind=beamsweep.DatasetKind.RATES,
        locations=np.asarray(locations, dtype=float),
        snapshot_ids=np.arange(count, dtype=np.int64),
        ue_indices=np.zeros(count, dtype=np.int64),
        num_combiners=num_combiners,
        num_beamformers=num_beamformers,
        values=values,
    )
