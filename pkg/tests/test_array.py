import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

import beamsweep
from tests import oracles
from tests.helpers import eye_geometry

_angles = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False)
_sizes = st.integers(min_value=1, max_value=8)


class SteeringVectorTest(unittest.TestCase):
    def test_boresight_is_uniform(self):
        vector = beamsweep.steering_vector(eye_geometry(2, 2), 0.0, 0.0)
        np.testing.assert_allclose(vector, np.full(4, 0.5), atol=1e-12)

    def test_endfire_on_the_column_axis_alternates_sign(self):
        vector = beamsweep.steering_vector(eye_geometry(1, 2), math.pi / 2, 0.0)
        np.testing.assert_allclose(
            vector, np.array([1.0, np.exp(-1j * np.pi)]) / np.sqrt(2), atol=1e-12
        )

    def test_matches_element_by_element_phases(self):
        azimuth, elevation = 0.4, -0.3
        vector = beamsweep.steering_vector(eye_geometry(3, 4), azimuth, elevation)
        expected = oracles.steering_vector(
            3, 4, math.sin(elevation), math.cos(elevation) * math.sin(azimuth)
        )
        np.testing.assert_allclose(vector, expected, atol=1e-12)

    def test_element_spacing_is_read_against_the_wavelength(self):
        quarter = beamsweep.ArrayGeometry(
            rows=1,
            cols=2,
            element_spacing=0.0025,
            orientation=np.eye(3),
            reference_position=np.zeros(3),
        )
        vector = beamsweep.steering_vector(quarter, math.pi / 2, 0.0, wavelength=0.01)
        np.testing.assert_allclose(vector, np.array([1, 1j]) / math.sqrt(2), atol=1e-12)
        # Without a wavelength the spacing is in wavelengths: 0.0025 of one.
        self.assertFalse(
            np.allclose(vector, beamsweep.steering_vector(quarter, math.pi / 2, 0.0))
        )
        with self.assertRaises(beamsweep.GeometryError):
            beamsweep.steering_vector(quarter, 0.0, 0.0, wavelength=0.0)

    def test_world_direction_agrees_with_local_angles(self):
        geometry = eye_geometry(4, 4)
        direction = beamsweep.direction_from_angles(0.7, 0.2)
        np.testing.assert_allclose(
            beamsweep.steering_vector_from_direction(geometry, direction),
            beamsweep.steering_vector(geometry, 0.7, 0.2),
            atol=1e-12,
        )

    def test_is_continuous_in_angle(self):
        geometry = eye_geometry(8, 8)
        first = beamsweep.steering_vector(geometry, 0.3, 0.1)
        second = beamsweep.steering_vector(geometry, 0.3 + 1e-8, 0.1 - 1e-8)
        self.assertLess(np.linalg.norm(first - second), 1e-6)

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(rows=_sizes, cols=_sizes, azimuth=_angles, elevation=_angles)
    def test_has_unit_norm(self, rows, cols, azimuth, elevation):
        vector = beamsweep.steering_vector(eye_geometry(rows, cols), azimuth, elevation)
        self.assertAlmostEqual(1.0, np.linalg.norm(vector), delta=1e-9)


class DftCodebookTest(unittest.TestCase):
    def test_sizes_follow_the_arrays(self):
        config = beamsweep.SceneConfig()
        combiners, beamformers = beamsweep.codebooks(config)
        self.assertEqual(64, len(beamformers))
        self.assertEqual(16, len(combiners))
        self.assertEqual(1024, len(combiners) * len(beamformers))
        self.assertIs(beamsweep.BeamKind.BEAMFORMER, beamformers.kind)
        self.assertIs(beamsweep.BeamKind.COMBINER, combiners.kind)

    def test_beams_are_orthonormal(self):
        for rows, cols in ((8, 8), (4, 4), (2, 4), (1, 3)):
            with self.subTest(rows=rows, cols=cols):
                codebook = beamsweep.dft_codebook(
                    eye_geometry(rows, cols), beamsweep.BeamKind.BEAMFORMER
                )
                gram = codebook.beams @ codebook.beams.conj().T
                np.testing.assert_allclose(gram, np.eye(rows * cols), atol=1e-9)

    def test_beam_order_is_row_major(self):
        codebook = beamsweep.dft_codebook(eye_geometry(2, 4), "W")
        for p in range(2):
            for q in range(4):
                with self.subTest(p=p, q=q):
                    np.testing.assert_allclose(
                        codebook[p * 4 + q], oracles.dft_beam(2, 4, p, q), atol=1e-12
                    )

    def test_beams_steer_to_their_direction_cosines(self):
        geometry = eye_geometry(4, 4)
        codebook = beamsweep.dft_codebook(geometry, beamsweep.BeamKind.COMBINER)
        u_row, u_col = beamsweep.beam_direction_cosines(codebook)
        checked = 0
        for index in range(len(codebook)):
            forward = 1 - u_row[index] ** 2 - u_col[index] ** 2
            if forward <= 0:
                continue
            direction = [math.sqrt(forward), u_col[index], u_row[index]]
            np.testing.assert_allclose(
                beamsweep.steering_vector_from_direction(geometry, direction),
                codebook[index],
                atol=1e-9,
            )
            checked += 1
        self.assertGreater(checked, 0)


class ArrayGeometryTest(unittest.TestCase):
    def test_rejects_empty_arrays(self):
        with self.assertRaises(beamsweep.GeometryError):
            eye_geometry(0, 4)

    def test_rejects_reflections(self):
        with self.assertRaises(beamsweep.GeometryError):
            beamsweep.ArrayGeometry(
                rows=2,
                cols=2,
                element_spacing=0.5,
                orientation=np.diag([1.0, 1.0, -1.0]),
                reference_position=np.zeros(3),
            )

    def test_rejects_row_hint_along_boresight(self):
        with self.assertRaises(beamsweep.GeometryError):
            beamsweep.orientation_from_boresight([0, 0, 1], [0, 0, 2])

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(
        boresight=st.tuples(*[st.floats(-1, 1)] * 3).filter(
            lambda v: np.linalg.norm(v) > 0.1
        ),
        hint=st.tuples(*[st.floats(-1, 1)] * 3),
    )
    def test_orientation_is_a_proper_rotation(self, boresight, hint):
        boresight = np.array(boresight)
        hint = np.array(hint)
        unit = boresight / np.linalg.norm(boresight)
        if np.linalg.norm(hint - (hint @ unit) * unit) < 0.1:
            return
        rotation = beamsweep.orientation_from_boresight(boresight, hint)
        np.testing.assert_allclose(rotation.T @ rotation, np.eye(3), atol=1e-9)
        self.assertAlmostEqual(1.0, np.linalg.det(rotation), delta=1e-9)
        np.testing.assert_allclose(rotation[:, 0], unit, atol=1e-12)

    def test_bs_array_points_down_the_street(self):
        geometry = beamsweep.bs_geometry(beamsweep.SceneConfig())
        boresight = geometry.orientation[:, 0]
        self.assertGreater(boresight[0], 0)
        self.assertLess(boresight[2], 0)
        self.assertAlmostEqual(0.0, boresight[1], delta=1e-12)
        self.assertAlmostEqual(math.atan2(10, 90), -math.asin(boresight[2]), delta=1e-12)
