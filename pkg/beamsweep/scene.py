"""Randomized street snapshots and first-order geometric multipath channels.

The street runs along +x from the BS, lanes are parallel to x and centered on
y = 0, and building walls are vertical planes y = const. Paths are the direct
ray plus single specular bounces off each wall and off bus side panels, found
with the image method; buses are the only blockers.
"""

import csv
import dataclasses
import enum
import json
import logging
from pathlib import Path

import numpy as np

from . import errors, storage
from .array import (
    ArrayGeometry,
    ArraySpec,
    BeamKind,
    angles_from_direction,
    dft_codebook,
    direction_from_angles,
    orientation_from_boresight,
    steering_vector_from_direction,
)
from .utils import (
    SNAPSHOT_STREAM,
    atomic_write,
    canonical_json,
    format_float,
    seed_stream,
)

__all__ = [
    "SPEED_OF_LIGHT",
    "VehicleKind",
    "PathKind",
    "SceneConfig",
    "Vehicle",
    "SceneSnapshot",
    "PathComponent",
    "ChannelRealization",
    "SceneCorpus",
    "generate_snapshot",
    "generate_snapshots",
    "bs_geometry",
    "ue_geometry",
    "codebooks",
    "trace_paths",
    "paths_to_channel",
    "ue_channel",
    "trace_corpus",
    "save_corpus",
    "load_corpus",
    "write_scene_index",
]

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0


class VehicleKind(enum.Enum):
    CAR = "car"
    BUS = "bus"


class PathKind(enum.Enum):
    LOS = "los"
    WALL = "wall"
    BUS = "bus"


@dataclasses.dataclass(frozen=True)
class SceneConfig:
    # (x_min, y_min, x_max, y_max) of the admissible UE locations.
    region_of_interest: tuple = (10.0, -7.0, 190.0, 7.0)
    lane_count: int = 4
    lane_width: float = 3.5
    street_length: float = 200.0
    bs_position: tuple = (0.0, 0.0, 10.0)
    wall_offsets: tuple = (-10.0, 10.0)
    min_gap: float = 15.0
    max_gap: float = 60.0
    bus_fraction: float = 0.25
    # (width, length, height)
    car_dims: tuple = (1.75, 4.5, 1.5)
    bus_dims: tuple = (2.5, 12.0, 3.8)
    carrier_frequency: float = 28e9
    subcarrier_count: int = 64
    subcarrier_spacing: float = 120e3
    # Derived from the reference link below when unset.
    noise_power: float | None = None
    reference_snr_db: float = 25.0
    reference_distance: float = 30.0
    wall_reflection: float = 0.5
    bus_reflection: float = 0.7
    blockage_margin: float = 0.2
    bs_array: ArraySpec = ArraySpec(8, 8)
    ue_array: ArraySpec = ArraySpec(4, 4)

    def __post_init__(self):
        x_min, y_min, x_max, y_max = self.region_of_interest
        half_width = self.lane_count * self.lane_width / 2
        if not (x_min < x_max and y_min < y_max):
            raise errors.ConfigError("scene.region_of_interest is empty.")
        if x_min < 0 or x_max > self.street_length or y_min < -half_width or (
            y_max > half_width
        ):
            raise errors.ConfigError(
                "scene.region_of_interest must lie within the street footprint."
            )
        if not 0 <= self.bus_fraction <= 1:
            raise errors.ConfigError("scene.bus_fraction must be a probability.")
        if not 0 < self.min_gap <= self.max_gap:
            raise errors.ConfigError("scene gaps must satisfy 0 < min_gap <= max_gap.")
        if self.subcarrier_count < 1:
            raise errors.ConfigError("scene.subcarrier_count must be positive.")
        if self.noise_power is None:
            reference_gain = self.wavelength / (4 * np.pi * self.reference_distance)
            noise_power = reference_gain**2 / 10 ** (self.reference_snr_db / 10)
            object.__setattr__(self, "noise_power", float(noise_power))
        elif self.noise_power <= 0:
            raise errors.ConfigError("scene.noise_power must be positive.")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def lane_centers(self):
        half_width = self.lane_count * self.lane_width / 2
        return tuple(
            -half_width + (lane + 0.5) * self.lane_width
            for lane in range(self.lane_count)
        )

    def contains(self, x, y):
        x_min, y_min, x_max, y_max = self.region_of_interest
        return x_min <= x <= x_max and y_min <= y <= y_max


@dataclasses.dataclass(frozen=True)
class Vehicle:
    kind: VehicleKind
    center: tuple
    dims: tuple
    heading: float

    @property
    def antenna_position(self):
        # Roof mount.
        return np.array([self.center[0], self.center[1], self.dims[2]])

    def bounding_box(self, margin=0.0):
        width, length, height = self.dims
        half = np.array([length / 2 + margin, width / 2 + margin])
        lower = np.array([*(np.array(self.center) - half), -margin])
        upper = np.array([*(np.array(self.center) + half), height + margin])
        return lower, upper


@dataclasses.dataclass(frozen=True)
class SceneSnapshot:
    vehicles: tuple
    ue_indices: tuple
    snapshot_id: int
    rng_seed: int

    @property
    def buses(self):
        return [
            index
            for index, vehicle in enumerate(self.vehicles)
            if vehicle.kind is VehicleKind.BUS
        ]


@dataclasses.dataclass(frozen=True)
class PathComponent:
    complex_gain: complex
    # World-frame (azimuth, elevation) of the departure direction at the BS and
    # of the direction the wave arrives from at the UE.
    aod: tuple
    aoa: tuple
    delay: float
    kind: PathKind = PathKind.LOS


@dataclasses.dataclass(frozen=True, eq=False)
class ChannelRealization:
    location: np.ndarray
    # Shape (K, UE elements, BS elements).
    matrices: np.ndarray
    snapshot_id: int = -1
    ue_index: int = -1


@dataclasses.dataclass
class SceneCorpus:
    config: SceneConfig
    snapshots: list
    # (snapshot_id, ue_index) -> list of PathComponent
    paths: dict

    def ue_keys(self):
        return [
            (snapshot.snapshot_id, ue_index)
            for snapshot in self.snapshots
            for ue_index in snapshot.ue_indices
        ]


def generate_snapshot(config, seed, snapshot_id=0):
    """Place vehicles lane by lane with uniform gaps, reproducibly from `seed`."""
    x_min, _, x_max, _ = config.region_of_interest
    if x_max - x_min < min(config.car_dims[1], config.bus_dims[1]):
        raise errors.SceneError("Region of interest is too short to place a vehicle.")

    rng = seed_stream(seed, SNAPSHOT_STREAM, snapshot_id)
    vehicles = []
    for lane, lane_y in enumerate(config.lane_centers):
        heading = 0.0 if lane_y < 0 else np.pi
        cursor = x_min + rng.uniform(0, config.max_gap)
        while True:
            is_bus = rng.random() < config.bus_fraction
            kind = VehicleKind.BUS if is_bus else VehicleKind.CAR
            dims = config.bus_dims if is_bus else config.car_dims
            length = dims[1]
            if cursor + length > x_max:
                break
            vehicles.append(
                Vehicle(
                    kind=kind,
                    center=(float(cursor + length / 2), float(lane_y)),
                    dims=tuple(dims),
                    heading=heading,
                )
            )
            cursor += length + rng.uniform(config.min_gap, config.max_gap)

    ue_indices = tuple(
        index
        for index, vehicle in enumerate(vehicles)
        if vehicle.kind is VehicleKind.CAR and config.contains(*vehicle.center)
    )
    return SceneSnapshot(
        vehicles=tuple(vehicles),
        ue_indices=ue_indices,
        snapshot_id=snapshot_id,
        rng_seed=int(seed),
    )


def generate_snapshots(config, seed, count):
    return [generate_snapshot(config, seed, snapshot_id) for snapshot_id in range(count)]


def bs_geometry(config):
    spec = config.bs_array
    bs = np.asarray(config.bs_position, dtype=float)
    if spec.tilt is None:
        x_min, _, x_max, _ = config.region_of_interest
        tilt = np.arctan2(bs[2], (x_max - x_min) / 2)
    else:
        tilt = spec.tilt
    boresight = [np.cos(tilt), 0.0, -np.sin(tilt)]
    return ArrayGeometry(
        rows=spec.rows,
        cols=spec.cols,
        element_spacing=config.wavelength / 2,
        orientation=orientation_from_boresight(boresight, [0.0, 0.0, 1.0]),
        reference_position=bs,
    )


def ue_geometry(config, vehicle):
    """Roof array facing up with its rows along the vehicle heading."""
    spec = config.ue_array
    heading = [np.cos(vehicle.heading), np.sin(vehicle.heading), 0.0]
    return ArrayGeometry(
        rows=spec.rows,
        cols=spec.cols,
        element_spacing=config.wavelength / 2,
        orientation=orientation_from_boresight([0.0, 0.0, 1.0], heading),
        reference_position=vehicle.antenna_position,
    )


def codebooks(config):
    """Return the UE combiner and BS beamformer DFT codebooks."""
    ue = ArrayGeometry(
        rows=config.ue_array.rows,
        cols=config.ue_array.cols,
        element_spacing=config.wavelength / 2,
        orientation=np.eye(3),
        reference_position=np.zeros(3),
    )
    return (
        dft_codebook(ue, BeamKind.COMBINER),
        dft_codebook(bs_geometry(config), BeamKind.BEAMFORMER),
    )


def _segment_hits(start, end, lower, upper):
    """Slab test of segment start->end against each box; one bool per box."""
    if len(lower) == 0:
        return np.zeros(0, dtype=bool)
    direction = end - start
    parallel = direction == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (lower - start) / direction
        t1 = (upper - start) / direction
    inside = (start >= lower) & (start <= upper)
    t_near = np.where(parallel, -np.inf, np.minimum(t0, t1))
    t_far = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t0, t1))
    enter = np.maximum(t_near.max(axis=1), 0.0)
    leave = np.minimum(t_far.min(axis=1), 1.0)
    return enter <= leave


def _reflect(source, target, plane_y):
    """Image-method bounce point on the plane y = plane_y and unfolded length."""
    image = source.copy()
    image[1] = 2 * plane_y - source[1]
    t = (plane_y - image[1]) / (target[1] - image[1])
    return image + t * (target - image), float(np.linalg.norm(target - image))


def _path(config, kind, bs, ue, distance, coefficient, bounce=None):
    via = ue if bounce is None else bounce
    back = bs if bounce is None else bounce
    amplitude = coefficient * config.wavelength / (4 * np.pi * distance)
    return PathComponent(
        complex_gain=complex(
            amplitude * np.exp(-2j * np.pi * distance / config.wavelength)
        ),
        aod=angles_from_direction(via - bs),
        aoa=angles_from_direction(back - ue),
        delay=distance / SPEED_OF_LIGHT,
        kind=kind,
    )


def trace_paths(config, snapshot, ue_index):
    """Direct, wall and bus-panel paths from the BS to UE `ue_index`.

    An empty list means the UE is fully blocked.
    """
    try:
        vehicle = snapshot.vehicles[ue_index]
    except IndexError:
        raise errors.SceneError(f"No vehicle {ue_index} in snapshot") from None
    bs = np.asarray(config.bs_position, dtype=float)
    ue = vehicle.antenna_position

    bus_ids = [index for index in snapshot.buses if index != ue_index]
    boxes = [snapshot.vehicles[index].bounding_box(config.blockage_margin) for index in bus_ids]
    lower = np.array([box[0] for box in boxes]).reshape(-1, 3)
    upper = np.array([box[1] for box in boxes]).reshape(-1, 3)

    def clear(start, end, skip=None):
        hits = _segment_hits(start, end, lower, upper)
        if skip is not None:
            hits[skip] = False
        return not hits.any()

    paths = []
    if clear(bs, ue):
        paths.append(_path(config, PathKind.LOS, bs, ue, np.linalg.norm(ue - bs), 1.0))

    for wall_y in config.wall_offsets:
        if (bs[1] - wall_y) * (ue[1] - wall_y) <= 0:
            continue
        bounce, distance = _reflect(bs, ue, wall_y)
        if not 0 <= bounce[0] <= config.street_length:
            continue
        if clear(bs, bounce) and clear(bounce, ue):
            paths.append(
                _path(
                    config, PathKind.WALL, bs, ue, distance, config.wall_reflection, bounce
                )
            )

    for slot, bus_index in enumerate(bus_ids):
        bus = snapshot.vehicles[bus_index]
        width, length, height = bus.dims
        for side in (-1.0, 1.0):
            panel_y = bus.center[1] + side * width / 2
            # Both ends must face the outer side of the panel.
            if side * (bs[1] - panel_y) <= 0 or side * (ue[1] - panel_y) <= 0:
                continue
            bounce, distance = _reflect(bs, ue, panel_y)
            if abs(bounce[0] - bus.center[0]) > length / 2 or not (
                0 <= bounce[2] <= height
            ):
                continue
            if clear(bs, bounce, skip=slot) and clear(bounce, ue, skip=slot):
                paths.append(
                    _path(
                        config, PathKind.BUS, bs, ue, distance, config.bus_reflection, bounce
                    )
                )
    return paths


def paths_to_channel(
    paths, bs_geometry, ue_geometry, config, *, location=None, snapshot_id=-1, ue_index=-1
):
    """Frequency-selective channel H[k] = sum_p g_p e^{-j2pi k df tau_p} a_UE a_BS^H."""
    k = np.arange(config.subcarrier_count)
    matrices = np.zeros(
        (config.subcarrier_count, ue_geometry.size, bs_geometry.size), dtype=complex
    )
    for path in paths:
        a_ue = steering_vector_from_direction(
            ue_geometry, direction_from_angles(*path.aoa), config.wavelength
        )
        a_bs = steering_vector_from_direction(
            bs_geometry, direction_from_angles(*path.aod), config.wavelength
        )
        tones = np.exp(-2j * np.pi * k * config.subcarrier_spacing * path.delay)
        matrices += (path.complex_gain * tones)[:, None, None] * np.outer(
            a_ue, a_bs.conj()
        )
    if location is None:
        location = ue_geometry.reference_position[:2]
    return ChannelRealization(
        location=np.asarray(location, dtype=float),
        matrices=matrices,
        snapshot_id=snapshot_id,
        ue_index=ue_index,
    )


def ue_channel(config, snapshot, ue_index, paths=None):
    vehicle = snapshot.vehicles[ue_index]
    if paths is None:
        paths = trace_paths(config, snapshot, ue_index)
    return paths_to_channel(
        paths,
        bs_geometry(config),
        ue_geometry(config, vehicle),
        config,
        location=vehicle.center,
        snapshot_id=snapshot.snapshot_id,
        ue_index=ue_index,
    )


def trace_corpus(config, snapshots):
    paths = {}
    for snapshot in snapshots:
        for ue_index in snapshot.ue_indices:
            paths[snapshot.snapshot_id, ue_index] = trace_paths(config, snapshot, ue_index)
    return SceneCorpus(config=config, snapshots=list(snapshots), paths=paths)


_VEHICLE_KINDS = list(VehicleKind)
_PATH_KINDS = list(PathKind)


def save_corpus(path, corpus):
    """Persist snapshots and path components; channels are rebuilt on load."""
    snapshot_rows = []
    vehicle_rows = []
    ue_rows = []
    path_rows = []
    for snapshot in corpus.snapshots:
        snapshot_rows.append([snapshot.snapshot_id, snapshot.rng_seed, len(snapshot.vehicles)])
        for vehicle in snapshot.vehicles:
            vehicle_rows.append(
                [
                    snapshot.snapshot_id,
                    _VEHICLE_KINDS.index(vehicle.kind),
                    *vehicle.center,
                    *vehicle.dims,
                    vehicle.heading,
                ]
            )
        for ue_index in snapshot.ue_indices:
            ue_row = len(ue_rows)
            ue_rows.append([snapshot.snapshot_id, ue_index])
            for component in corpus.paths.get((snapshot.snapshot_id, ue_index), []):
                path_rows.append(
                    [
                        ue_row,
                        _PATH_KINDS.index(component.kind),
                        component.complex_gain.real,
                        component.complex_gain.imag,
                        *component.aod,
                        *component.aoa,
                        component.delay,
                    ]
                )
    storage.write_arrays(
        path,
        "scenes",
        {
            "snapshots": np.array(snapshot_rows, dtype=np.int64).reshape(-1, 3),
            "vehicles": np.array(vehicle_rows, dtype=float).reshape(-1, 8),
            "ues": np.array(ue_rows, dtype=np.int64).reshape(-1, 2),
            "paths": np.array(path_rows, dtype=float).reshape(-1, 9),
        },
        attrs={"scene_config": dataclasses.asdict(corpus.config)},
    )


def _scene_config_from_attrs(stored):
    fields = {
        name: tuple(value) if isinstance(value, list) else value
        for name, value in stored.items()
    }
    for name in ("bs_array", "ue_array"):
        fields[name] = ArraySpec(**stored[name])
    return SceneConfig(**fields)


def load_corpus(path, config=None):
    """Load a corpus written by `save_corpus`.

    The paths were traced under the stored scene config, which is used when
    `config` is None; a different `config` raises `SceneError`.
    """
    arrays, attrs = storage.read_arrays(path, "scenes")
    stored = attrs["scene_config"]
    if config is None:
        config = _scene_config_from_attrs(stored)
    else:
        given = json.loads(canonical_json(dataclasses.asdict(config)))
        changed = sorted(
            name
            for name in stored.keys() | given.keys()
            if stored.get(name) != given.get(name)
        )
        if changed:
            raise errors.SceneError(
                f"{Path(path).as_posix()} was traced under a different scene "
                f"config; changed: {', '.join(changed)}"
            )
    vehicles_by_snapshot = {}
    for row in arrays["vehicles"]:
        vehicles_by_snapshot.setdefault(int(row[0]), []).append(
            Vehicle(
                kind=_VEHICLE_KINDS[int(row[1])],
                center=(float(row[2]), float(row[3])),
                dims=(float(row[4]), float(row[5]), float(row[6])),
                heading=float(row[7]),
            )
        )
    ues_by_snapshot = {}
    for snapshot_id, ue_index in arrays["ues"]:
        ues_by_snapshot.setdefault(int(snapshot_id), []).append(int(ue_index))
    snapshots = [
        SceneSnapshot(
            vehicles=tuple(vehicles_by_snapshot.get(int(snapshot_id), [])),
            ue_indices=tuple(ues_by_snapshot.get(int(snapshot_id), [])),
            snapshot_id=int(snapshot_id),
            rng_seed=int(rng_seed),
        )
        for snapshot_id, rng_seed, _ in arrays["snapshots"]
    ]
    paths = {(int(s), int(u)): [] for s, u in arrays["ues"]}
    for row in arrays["paths"]:
        snapshot_id, ue_index = arrays["ues"][int(row[0])]
        paths[int(snapshot_id), int(ue_index)].append(
            PathComponent(
                complex_gain=complex(row[2], row[3]),
                aod=(float(row[4]), float(row[5])),
                aoa=(float(row[6]), float(row[7])),
                delay=float(row[8]),
                kind=_PATH_KINDS[int(row[1])],
            )
        )
    return SceneCorpus(config=config, snapshots=snapshots, paths=paths)


def write_scene_index(path, corpus):
    with atomic_write(Path(path), "w") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["snapshot_id", "ue_index", "x", "y", "path_count"])
        for snapshot in corpus.snapshots:
            for ue_index in snapshot.ue_indices:
                x, y = snapshot.vehicles[ue_index].center
                writer.writerow(
                    [
                        snapshot.snapshot_id,
                        ue_index,
                        format_float(x),
                        format_float(y),
                        len(corpus.paths.get((snapshot.snapshot_id, ue_index), [])),
                    ]
                )
