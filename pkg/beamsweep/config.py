import dataclasses
from pathlib import Path
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import typing

from . import errors
from .array import ArraySpec
from .regressor import TrainConfig
from .scene import SceneConfig
from .utils import canonical_json, deep_merge, sha256_hex

__all__ = ["CONFIG_FILENAME", "SCHEMA_VERSION", "ExperimentConfig"]

CONFIG_FILENAME = "beamsweep.toml"
SCHEMA_VERSION = 1


def _scene_config(data):
    data = dict(data)
    try:
        for name in ("bs_array", "ue_array"):
            if name in data:
                data[name] = ArraySpec(**data[name])
        for name, value in data.items():
            if isinstance(value, list):
                data[name] = tuple(value)
        return SceneConfig(**data)
    except TypeError as exc:
        raise errors.ConfigError(f"Invalid [scene] table: {exc}") from exc


@dataclasses.dataclass
class ExperimentConfig:
    project_dir: Path
    output_dir: Path
    seed: int
    snapshot_count: int
    workers: int
    scene: SceneConfig
    test_fraction: float
    folds: int
    stochastic: bool
    tune: bool
    grid: dict
    scenarios: typing.Tuple[int, ...]
    beam_pair_budgets: typing.Tuple[int, ...]
    combiner_count: int
    cluster_count: int
    cluster_counts: typing.Tuple[int, ...]
    use_significance: bool
    kmeans_max_iters: int
    heatmap_combiners: int
    heatmap_beamformers: int
    targets: typing.Tuple[float, ...]
    # Merged TOML the config was built from.
    raw: dict = dataclasses.field(repr=False, default_factory=dict)

    @classmethod
    def load(
        cls,
        *,
        project_dir=None,
        config_file=None,
        smoke=False,
        seed=None,
        output_dir=None,
    ):
        suppress_missing_config_file_error = config_file is None

        project_dir = Path(project_dir or ".")
        config_file = project_dir / Path(config_file or CONFIG_FILENAME)

        with (Path(__file__).parent / "defaults.toml").open("rb") as file:
            data = tomllib.load(file)

        try:
            with config_file.open("rb") as file:
                data = deep_merge(data, tomllib.load(file))
        except FileNotFoundError:
            if not suppress_missing_config_file_error:
                raise errors.ConfigError(f"Config file not found: {config_file}")
        except tomllib.TOMLDecodeError as exc:
            raise errors.ConfigError(f"{config_file}: {exc}") from exc

        return cls.from_dict(
            data, project_dir=project_dir, smoke=smoke, seed=seed, output_dir=output_dir
        )

    @classmethod
    def from_dict(cls, data, *, project_dir=".", smoke=False, seed=None, output_dir=None):
        project_dir = Path(project_dir)
        profiles = data.get("profiles", {})
        if smoke:
            if "smoke" not in profiles:
                raise errors.ConfigError("No [profiles.smoke] table to apply.")
            data = deep_merge(data, profiles["smoke"])
        data = {key: value for key, value in data.items() if key != "profiles"}
        if seed is not None:
            data["seed"] = int(seed)
        if output_dir is not None:
            data["output_dir"] = str(output_dir)

        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise errors.ConfigError(
                f"schema_version {version!r} is not supported (expected {SCHEMA_VERSION})."
            )

        try:
            dataset = data["dataset"]
            training = data["training"]
            selection = data["selection"]
            evaluation = data["evaluation"]
            config = cls(
                project_dir=project_dir,
                output_dir=project_dir / data["output_dir"],
                seed=int(data["seed"]),
                snapshot_count=int(data["snapshot_count"]),
                workers=int(data["workers"]),
                scene=_scene_config(data["scene"]),
                test_fraction=float(dataset["test_fraction"]),
                folds=int(dataset["folds"]),
                stochastic=bool(dataset["stochastic"]),
                tune=bool(training["tune"]),
                grid={name: list(values) for name, values in training["grid"].items()},
                scenarios=tuple(int(value) for value in selection["scenarios"]),
                beam_pair_budgets=tuple(
                    int(value) for value in selection["beam_pair_budgets"]
                ),
                combiner_count=int(selection["combiner_count"]),
                cluster_count=int(selection["cluster_count"]),
                cluster_counts=tuple(int(value) for value in selection["cluster_counts"]),
                use_significance=bool(selection["use_significance"]),
                kmeans_max_iters=int(selection["kmeans_max_iters"]),
                heatmap_combiners=int(evaluation["heatmap_combiners"]),
                heatmap_beamformers=int(evaluation["heatmap_beamformers"]),
                targets=tuple(float(value) for value in evaluation["targets"]),
                raw=data,
            )
        except KeyError as exc:
            raise errors.ConfigError(f"Missing config key: {exc.args[0]}") from exc
        config.validate()
        return config

    @property
    def num_combiners(self):
        return self.scene.ue_array.rows * self.scene.ue_array.cols

    @property
    def num_beamformers(self):
        return self.scene.bs_array.rows * self.scene.bs_array.cols

    @property
    def num_pairs(self):
        return self.num_combiners * self.num_beamformers

    @property
    def heatmap_shape(self):
        return (
            self.heatmap_combiners or self.num_combiners,
            self.heatmap_beamformers or self.num_beamformers,
        )

    def validate(self):
        if self.snapshot_count < 1:
            raise errors.ConfigError("snapshot_count must be positive.")
        if self.workers < 1:
            raise errors.ConfigError("workers must be positive.")
        if not 0 < self.test_fraction < 1:
            raise errors.ConfigError("dataset.test_fraction must lie in (0, 1).")
        if self.folds < 2:
            raise errors.ConfigError("dataset.folds must be at least 2.")
        if not self.grid or any(not values for values in self.grid.values()):
            raise errors.ConfigError("training.grid needs at least one value per key.")
        # Budgets follow from the model role, never from the grid.
        allowed = {field.name for field in dataclasses.fields(TrainConfig)}
        unknown = set(self.grid) - (allowed - {"budget_parameters"})
        if unknown:
            raise errors.ConfigError(f"training.grid has unknown keys: {sorted(unknown)}")
        if not set(self.scenarios) <= {1, 2, 3} or not self.scenarios:
            raise errors.ConfigError("selection.scenarios must be drawn from 1, 2, 3.")
        for budget in self.beam_pair_budgets:
            if not 1 <= budget <= self.num_pairs:
                raise errors.ConfigError(
                    f"selection.beam_pair_budgets: {budget} outside 1..{self.num_pairs}."
                )
        if not 1 <= self.combiner_count <= self.num_combiners:
            raise errors.ConfigError(
                f"selection.combiner_count must lie in 1..{self.num_combiners}."
            )
        if self.cluster_count < 1 or any(count < 1 for count in self.cluster_counts):
            raise errors.ConfigError("selection cluster counts must be positive.")
        if self.kmeans_max_iters < 1:
            raise errors.ConfigError("selection.kmeans_max_iters must be positive.")
        rows, cols = self.heatmap_shape
        if not (1 <= rows <= self.num_combiners and 1 <= cols <= self.num_beamformers):
            raise errors.ConfigError("evaluation heatmap size exceeds the codebooks.")
        if any(not 0 < target <= 1 for target in self.targets):
            raise errors.ConfigError("evaluation.targets must lie in (0, 1].")

    def as_dict(self):
        return dataclasses.asdict(self)

    def config_hash(self):
        # Where results go and how many processes compute them do not change them.
        relevant = {
            key: value
            for key, value in self.raw.items()
            if key not in ("output_dir", "workers")
        }
        return sha256_hex(canonical_json(relevant))
