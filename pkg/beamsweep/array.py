"""Uniform planar arrays, steering vectors and DFT codebooks.

Array-local frame: x is boresight, y runs along the columns and z along the
rows. Element (r, c) sits at `r * spacing` on z and `c * spacing` on y and is
flattened row-major to index `r * cols + c`.
"""

import dataclasses
import enum

import numpy as np

from . import errors

__all__ = [
    "ArraySpec",
    "ArrayGeometry",
    "BeamKind",
    "Codebook",
    "orientation_from_boresight",
    "to_local_direction",
    "direction_from_angles",
    "angles_from_direction",
    "steering_vector",
    "steering_vector_from_direction",
    "dft_codebook",
    "beam_direction_cosines",
]


@dataclasses.dataclass(frozen=True)
class ArraySpec:
    """Array shape as read from the config; `tilt` only applies to the BS."""

    rows: int
    cols: int
    tilt: float | None = None


@dataclasses.dataclass(frozen=True, eq=False)
class ArrayGeometry:
    rows: int
    cols: int
    element_spacing: float
    # Columns are the local x (boresight), y (column axis) and z (row axis)
    # expressed in world coordinates.
    orientation: np.ndarray
    reference_position: np.ndarray

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise errors.GeometryError(
                f"Array must have at least one row and column: {self.rows}x{self.cols}"
            )
        if self.element_spacing <= 0:
            raise errors.GeometryError("Element spacing must be positive.")
        rotation = np.asarray(self.orientation, dtype=float)
        if rotation.shape != (3, 3):
            raise errors.GeometryError("Orientation must be a 3x3 rotation matrix.")
        if not np.allclose(rotation.T @ rotation, np.eye(3), atol=1e-9) or not (
            abs(np.linalg.det(rotation) - 1.0) <= 1e-9
        ):
            raise errors.GeometryError("Orientation must be a proper rotation.")
        object.__setattr__(self, "orientation", rotation)
        object.__setattr__(
            self, "reference_position", np.asarray(self.reference_position, float)
        )

    @property
    def size(self):
        return self.rows * self.cols


class BeamKind(enum.Enum):
    BEAMFORMER = "F"
    COMBINER = "W"


@dataclasses.dataclass(frozen=True, eq=False)
class Codebook:
    # One beam per row, shape (len(codebook), rows * cols).
    beams: np.ndarray
    kind: BeamKind
    rows: int
    cols: int

    def __len__(self):
        return self.beams.shape[0]

    def __getitem__(self, index):
        return self.beams[index]


def orientation_from_boresight(boresight, row_hint):
    """Rotation whose boresight is `boresight` and whose rows follow `row_hint`.

    `row_hint` is projected onto the plane orthogonal to boresight; it must not
    be parallel to it.
    """
    x_axis = np.asarray(boresight, dtype=float)
    x_axis = x_axis / np.linalg.norm(x_axis)
    z_axis = np.asarray(row_hint, dtype=float)
    z_axis = z_axis - (z_axis @ x_axis) * x_axis
    norm = np.linalg.norm(z_axis)
    if norm < 1e-12:
        raise errors.GeometryError("Row axis hint is parallel to boresight.")
    z_axis = z_axis / norm
    y_axis = np.cross(z_axis, x_axis)
    return np.column_stack([x_axis, y_axis, z_axis])


def direction_from_angles(azimuth, elevation):
    return np.array(
        [
            np.cos(elevation) * np.cos(azimuth),
            np.cos(elevation) * np.sin(azimuth),
            np.sin(elevation),
        ]
    )


def angles_from_direction(direction):
    x, y, z = np.asarray(direction, dtype=float)
    return float(np.arctan2(y, x)), float(np.arctan2(z, np.hypot(x, y)))


def to_local_direction(geometry, world_direction):
    direction = np.asarray(world_direction, dtype=float)
    return geometry.orientation.T @ (direction / np.linalg.norm(direction))


def steering_vector(geometry, azimuth, elevation, wavelength=1.0):
    """Unit-norm array response toward local (azimuth, elevation).

    Element (r, c) carries phase `2*pi/wavelength * (r*d*u_row + c*d*u_col)`
    where `u_row = sin(elevation)` and `u_col = cos(elevation) * sin(azimuth)`
    are the direction cosines along the row and column axes. `element_spacing`
    and `wavelength` share a unit; the default wavelength of 1 reads the
    spacing in wavelengths.
    """
    u_col = np.cos(elevation) * np.sin(azimuth)
    u_row = np.sin(elevation)
    return _response(geometry, u_row, u_col, wavelength)


def steering_vector_from_direction(geometry, world_direction, wavelength=1.0):
    """Array response toward a world-frame direction vector."""
    _, u_col, u_row = to_local_direction(geometry, world_direction)
    return _response(geometry, u_row, u_col, wavelength)


def _response(geometry, u_row, u_col, wavelength):
    if wavelength <= 0:
        raise errors.GeometryError(f"Wavelength must be positive, got {wavelength}.")
    ratio = geometry.element_spacing / wavelength
    row_phase = 2 * np.pi * ratio * u_row * np.arange(geometry.rows)
    col_phase = 2 * np.pi * ratio * u_col * np.arange(geometry.cols)
    vector = np.kron(np.exp(1j * row_phase), np.exp(1j * col_phase))
    return vector / np.sqrt(geometry.size)


def _dft_basis(size):
    n = np.arange(size)
    return np.exp(2j * np.pi * np.outer(n, n) / size) / np.sqrt(size)


def dft_codebook(geometry, kind):
    """Critically sampled 2-D DFT codebook, beam `p * cols + q` for row/col bins (p, q)."""
    beams = np.kron(_dft_basis(geometry.rows), _dft_basis(geometry.cols)).T
    return Codebook(
        beams=np.ascontiguousarray(beams),
        kind=BeamKind(kind) if not isinstance(kind, BeamKind) else kind,
        rows=geometry.rows,
        cols=geometry.cols,
    )


def beam_direction_cosines(codebook):
    """Return `(u_row, u_col)` arrays of the directions each beam steers to.

    Assumes half-wavelength spacing; cosines are wrapped into [-1, 1).
    """
    p, q = np.divmod(np.arange(len(codebook)), codebook.cols)
    u_row = (2.0 * p / codebook.rows + 1.0) % 2.0 - 1.0
    u_col = (2.0 * q / codebook.cols + 1.0) % 2.0 - 1.0
    return u_row, u_col
