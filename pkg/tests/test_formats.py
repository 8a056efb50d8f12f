import math

import numpy as np
import pytest
from scipy.special import sph_harm_y

from satx import (
    AmbisonicsSpec,
    CoverageError,
    DimensionError,
    Direction,
    ExplicitSpec,
    ObjectsSpec,
    PointCloud,
    RingSpec,
    SpeakerLayout,
    TDesignSpec,
    VbapSpec,
    ambisonics_encode,
    build_decoder_to_speaker,
    build_encoding_matrix,
    named_layout,
    remap_baseline,
    sample_cloud,
    vbap_gains,
    vbip_gains,
)
from satx.formats import sh_matrix, vbap_matrix
from satx.geometry import (
    FibonacciSpec,
    HemisphereSpec,
    MergeSpec,
    fibonacci_sphere,
    layout_from_directions,
    to_unit_vector,
)

from conftest import random_direction


def complex_sh_oracle(order, directions):
    """N3D real spherical harmonics built from scipy's complex ones."""
    zen = np.radians([90.0 - d.elevation for d in directions])
    azi = np.radians([d.azimuth for d in directions])
    out = np.empty((len(directions), (order + 1) ** 2))
    for n in range(order + 1):
        for m in range(-n, n + 1):
            c = sph_harm_y(n, abs(m), zen, azi)
            if m == 0:
                col = c.real
            elif m > 0:
                col = math.sqrt(2) * (-1) ** m * c.real
            else:
                col = math.sqrt(2) * (-1) ** abs(m) * c.imag
            out[:, n * (n + 1) + m] = math.sqrt(4 * math.pi) * col
    return out


class TestSphericalHarmonics:
    def test_order_zero_is_ones(self):
        cloud = sample_cloud(FibonacciSpec(17))
        enc = ambisonics_encode(cloud, 0)
        np.testing.assert_array_equal(enc.entries, np.ones((17, 1)))

    def test_order_one_front(self):
        row = sh_matrix([Direction(0, 0)], 1)[0]
        np.testing.assert_allclose(row, [1, 0, 0, 1], atol=1e-15)

    def test_order_one_sn3d_formulas(self, rng):
        for _ in range(20):
            d = random_direction(rng)
            az, el = math.radians(d.azimuth), math.radians(d.elevation)
            expected = [
                1.0,
                math.cos(el) * math.sin(az),
                math.sin(el),
                math.cos(el) * math.cos(az),
            ]
            np.testing.assert_allclose(
                sh_matrix([d], 1)[0], expected, atol=1e-14
            )

    def test_order_five_row_width(self):
        row = sh_matrix([Direction(33, 12)], 5)
        assert row.shape == (1, 36)

    def test_acn_indexing_consistent_across_orders(self, rng):
        # channel n(n+1)+m is the same function regardless of max order
        dirs = [random_direction(rng) for _ in range(6)]
        low = sh_matrix(dirs, 2)
        high = sh_matrix(dirs, 5)
        np.testing.assert_allclose(high[:, :9], low, atol=1e-14)

    def test_against_complex_oracle(self, rng):
        dirs = [random_direction(rng) for _ in range(12)]
        ours = sh_matrix(dirs, 5, "N3D")
        oracle = complex_sh_oracle(5, dirs)
        np.testing.assert_allclose(ours, oracle, atol=1e-11)

    def test_n3d_gram_identity(self):
        dirs = fibonacci_sphere(10000)
        y = sh_matrix(dirs, 5, "N3D")
        gram = y.T @ y / len(dirs)
        assert np.abs(gram - np.eye(36)).max() < 1e-3

    def test_order_range(self):
        with pytest.raises(DimensionError):
            sh_matrix([Direction(0, 0)], 10)
        with pytest.raises(DimensionError):
            AmbisonicsSpec(-1)


class TestVbap:
    def test_one_hot_at_speakers(self):
        layout = named_layout("7.0.4")
        for i, d in enumerate(layout.directions):
            g = vbap_gains(layout, d)
            expected = np.zeros(len(layout))
            expected[i] = 1.0
            np.testing.assert_allclose(g, expected, atol=1e-9)

    def test_symmetric_pair(self):
        layout = SpeakerLayout(
            (("a", Direction(45, 0)), ("b", Direction(-45, 0)))
        )
        g = vbap_gains(layout, Direction(0, 0))
        np.testing.assert_allclose(g, [math.sqrt(0.5)] * 2, atol=1e-12)

    def test_energy_normalized_everywhere(self, rng):
        layout = named_layout("octahedron")
        for _ in range(300):
            g = vbap_gains(layout, random_direction(rng, (-90, 90)))
            assert abs((g**2).sum() - 1.0) < 1e-12
            assert (g >= 0).all()
            assert (g > 0).sum() <= 3

    def test_velocity_direction_exact(self, rng):
        layout = named_layout("octahedron")
        u = layout.unit_vectors()
        for _ in range(50):
            d = random_direction(rng)
            g = vbap_gains(layout, d)
            resultant = g @ u
            resultant /= np.linalg.norm(resultant)
            np.testing.assert_allclose(
                resultant, to_unit_vector(d), atol=1e-12
            )

    def test_edge_continuity(self):
        layout = named_layout("octahedron")
        # sweep across the +x/+y edge of the octahedron
        eps = 0.05
        a = vbap_gains(layout, Direction(45, eps))
        b = vbap_gains(layout, Direction(45, -eps))
        assert np.abs(a - b).max() < 0.02
        on_edge = vbap_gains(layout, Direction(45, 0))
        assert np.abs(on_edge - a).max() < 0.02
        assert (on_edge > 1e-6).sum() == 2

    def test_edge_shared_by_adjacent_triangles(self):
        # solving either face adjacent to an edge direction must agree
        layout = named_layout("octahedron")
        from satx.formats import _Panner

        panner = _Panner(layout)
        d = Direction(45, 0)
        v = np.array([np.sqrt(0.5), np.sqrt(0.5), 0.0])
        solutions = []
        for face, base in zip(panner.faces, panner._bases):
            if base is None:
                continue
            g = base @ v
            if g.min() >= -1e-9:
                full = np.zeros(len(layout))
                full[list(face)] = g
                solutions.append(full / np.linalg.norm(full))
        assert len(solutions) == 2  # the two faces sharing the edge
        np.testing.assert_allclose(solutions[0], solutions[1], atol=1e-9)

    def test_continuity_dense_sweep(self):
        layout = named_layout("7.0.4")
        prev = None
        for az in np.arange(-180.0, 180.0, 0.1):
            g = vbap_gains(layout, Direction(float(az), 20.0))
            if prev is not None:
                assert np.abs(g - prev).max() < 0.02
            prev = g

    def test_outside_hull_reports_nearest(self):
        layout = named_layout("7.0.4")
        with pytest.raises(CoverageError, match="nearest covered"):
            vbap_gains(layout, Direction(0, -40))

    def test_vbip_aligns_energy_vector(self, rng):
        layout = named_layout("octahedron")
        u = layout.unit_vectors()
        for _ in range(50):
            d = random_direction(rng)
            g = vbip_gains(layout, d)
            assert abs((g**2).sum() - 1.0) < 1e-12
            resultant = (g**2) @ u
            resultant /= np.linalg.norm(resultant)
            np.testing.assert_allclose(
                resultant, to_unit_vector(d), atol=1e-12
            )


class TestEncodingMatrix:
    def test_objects_identity(self):
        cloud = sample_cloud(RingSpec(72))
        enc = build_encoding_matrix(ObjectsSpec(), cloud)
        assert enc.shape == (72, 72)
        np.testing.assert_array_equal(enc.entries, np.eye(72))

    def test_vbap_bed_shape(self):
        cloud = sample_cloud(
            MergeSpec((
                (HemisphereSpec(TDesignSpec(56)), 6.0),
                (RingSpec(15), 3.0),
                (ExplicitSpec(named_layout("7.0.4").directions), 1.0),
            ))
        )
        enc = build_encoding_matrix(VbapSpec(named_layout("7.0.4")), cloud)
        assert enc.shape == (54, 11)
        np.testing.assert_allclose((enc.entries**2).sum(axis=1), 1.0, atol=1e-12)

    def test_ambisonics_shape(self):
        cloud = sample_cloud(TDesignSpec(56))
        enc = build_encoding_matrix(AmbisonicsSpec(5), cloud)
        assert enc.shape == (56, 36)
        assert enc.channel_labels[:3] == ("ACN0", "ACN1", "ACN2")

    def test_external_matrix_input(self, tmp_path, rng):
        from satx import ExternalSpec
        from satx.matfile import export_matrix, matrix_file

        cloud = sample_cloud(RingSpec(6))
        values = rng.normal(size=(6, 4))
        path = tmp_path / "enc.smx"
        export_matrix(matrix_file(values, kind="encoding"), path)
        enc = build_encoding_matrix(ExternalSpec(str(path)), cloud)
        np.testing.assert_array_equal(enc.entries, values)

        bad_cloud = sample_cloud(RingSpec(5))
        with pytest.raises(DimensionError, match="rows"):
            build_encoding_matrix(ExternalSpec(str(path)), bad_cloud)


class TestDecoderToSpeaker:
    def test_real_layout_identity(self):
        layout = named_layout("3.0.1")
        dec = build_decoder_to_speaker(None, layout)
        np.testing.assert_array_equal(dec.entries, np.eye(4))
        assert dec.is_identity

    def test_pseudo_inverse_projector(self):
        virtual = sample_cloud(
            MergeSpec((
                (HemisphereSpec(TDesignSpec(60)), 1.0),
                (RingSpec(36), 1.0),
            ))
        )
        layout = layout_from_directions(virtual.directions)
        dec = build_decoder_to_speaker(AmbisonicsSpec(5), layout)
        assert dec.shape == (66, 36)
        y = sh_matrix(layout.directions, 5)
        np.testing.assert_allclose(y.T @ dec.entries, np.eye(36), atol=1e-8)

    def test_square_invertible_matches_inverse(self):
        layout = layout_from_directions(
            (
                Direction(0, -10),
                Direction(120, -10),
                Direction(-120, -10),
                Direction(0, 90),
            )
        )
        dec = build_decoder_to_speaker(AmbisonicsSpec(1), layout)
        y = sh_matrix(layout.directions, 1)
        np.testing.assert_allclose(dec.entries, np.linalg.inv(y.T), atol=1e-9)

    def test_small_layout_warns_rank_deficient(self):
        layout = layout_from_directions(
            (Direction(0, 0), Direction(120, 0), Direction(-120, 30))
        )
        with pytest.warns(UserWarning, match="rank-deficient"):
            dec = build_decoder_to_speaker(AmbisonicsSpec(2), layout)
        assert dec.shape == (3, 9)


class TestRemapBaseline:
    def test_bed_to_scene_columns_are_sh_rows(self):
        layout = named_layout("7.0.4")
        t = remap_baseline(layout.directions, AmbisonicsSpec(5))
        assert t.shape == (36, 11)
        np.testing.assert_allclose(
            t, sh_matrix(layout.directions, 5).T, atol=1e-15
        )

    def test_bed_to_bed_shape(self):
        src = named_layout("5.0.2")
        dst = named_layout("3.0.1")
        t = remap_baseline(src.directions, VbapSpec(dst))
        assert t.shape == (4, 7)

    def test_objects_at_speakers_is_permutation(self, rng):
        layout = named_layout("octahedron")
        perm = rng.permutation(len(layout))
        dirs = [layout.directions[i] for i in perm]
        t = remap_baseline(dirs, VbapSpec(layout))
        assert t.shape == (6, 6)
        for col, speaker in enumerate(perm):
            expected = np.zeros(6)
            expected[speaker] = 1.0
            np.testing.assert_allclose(t[:, col], expected, atol=1e-9)


class TestMatrixTypes:
    def test_encoding_row_count_must_match_cloud(self):
        from satx import EncodingMatrix

        cloud = sample_cloud(RingSpec(4))
        with pytest.raises(DimensionError):
            EncodingMatrix(np.ones((3, 2)), cloud, ("a", "b"))

    def test_entries_immutable(self):
        cloud = sample_cloud(RingSpec(4))
        enc = build_encoding_matrix(ObjectsSpec(), cloud)
        with pytest.raises(ValueError):
            enc.entries[0, 0] = 5.0
