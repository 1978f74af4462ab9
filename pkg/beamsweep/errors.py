class Error(Exception):
    pass


class ConfigError(Error):
    pass


class GeometryError(Error):
    pass


class SceneError(Error):
    pass


class DimensionError(Error):
    pass


class DatasetError(Error):
    pass


class FormatError(Error):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class TrainingError(Error):
    pass


class BudgetError(TrainingError):
    pass


class ClusteringError(Error):
    pass


class SelectionError(Error):
    pass


class ExperimentError(Error):
    def __init__(self, stage, message):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
