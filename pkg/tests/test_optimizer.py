import numpy as np
import pytest

from satx import (
    ConfigError,
    CostCoefficients,
    Direction,
    GivenInit,
    ObjectsSpec,
    OptimizationConfig,
    PointCloud,
    RandomInit,
    RemapInit,
    RemapNoiseInit,
    TranscodingProblem,
    VbapSpec,
    build_encoding_matrix,
    initialize,
    named_layout,
    optimize,
)
from satx.formats import identity_decoder, remap_baseline, sh_matrix
from satx.geometry import RingSpec, sample_cloud

INCOHERENT_SET = CostCoefficients(
    energy=5, intensity_radial=2, intensity_transverse=1,
    in_phase_quadratic=10, symmetry_quadratic=2,
)


def matched_objects_problem(layout_name="octahedron"):
    layout = named_layout(layout_name)
    cloud = PointCloud(layout.directions)
    g = build_encoding_matrix(ObjectsSpec(), cloud)
    return TranscodingProblem(
        g,
        identity_decoder(layout),
        INCOHERENT_SET,
        input_channel_directions=cloud.directions,
        output_spec=VbapSpec(layout),
    )


def bed_problem(seed=0):
    """Small 5.0-bed to 3-speaker decoding problem for fast runs."""
    src = named_layout("5.0")
    dst = named_layout("5.0_regular")
    cloud = sample_cloud(RingSpec(24))
    g = build_encoding_matrix(VbapSpec(src), cloud)
    return TranscodingProblem(
        g,
        identity_decoder(dst),
        INCOHERENT_SET,
        input_channel_directions=src.directions,
        output_spec=VbapSpec(dst),
    )


class TestInitialize:
    def test_given_identity(self):
        problem = matched_objects_problem()
        t0 = initialize(OptimizationConfig(init=GivenInit(np.eye(6))), problem)
        np.testing.assert_array_equal(t0, np.eye(6))

    def test_given_shape_checked(self):
        problem = matched_objects_problem()
        with pytest.raises(Exception, match="shape"):
            initialize(OptimizationConfig(init=GivenInit(np.eye(5))), problem)

    def test_random_deterministic(self):
        problem = matched_objects_problem()
        cfg = OptimizationConfig(init=RandomInit(seed=7))
        a = initialize(cfg, problem)
        b = initialize(cfg, problem)
        np.testing.assert_array_equal(a, b)
        assert np.abs(a).max() <= 0.5

    def test_remap_for_bed_to_scene(self):
        layout = named_layout("7.0.4")
        cloud = sample_cloud(RingSpec(12))
        g = build_encoding_matrix(VbapSpec(layout), cloud)
        from satx import AmbisonicsSpec
        from satx.geometry import layout_from_directions, FibonacciSpec
        from satx.formats import build_decoder_to_speaker

        virt = sample_cloud(FibonacciSpec(40))
        decoder = build_decoder_to_speaker(
            AmbisonicsSpec(5), layout_from_directions(virt.directions)
        )
        problem = TranscodingProblem(
            g,
            decoder,
            CostCoefficients(pressure=1),
            input_channel_directions=layout.directions,
            output_spec=AmbisonicsSpec(5),
        )
        t0 = initialize(OptimizationConfig(init=RemapInit()), problem)
        assert t0.shape == (36, 11)
        np.testing.assert_allclose(
            t0, sh_matrix(layout.directions, 5).T, atol=1e-15
        )

    def test_remap_without_channel_directions(self):
        problem = matched_objects_problem()
        problem.input_channel_directions = None
        with pytest.raises(ConfigError, match="channel directions"):
            initialize(OptimizationConfig(init=RemapInit()), problem)

    def test_default_picks_remap_noise_when_possible(self):
        problem = matched_objects_problem()
        t0 = initialize(OptimizationConfig(seed=3), problem)
        assert np.abs(t0 - np.eye(6)).max() <= 0.05


class TestOptimize:
    def test_trivial_recovery(self):
        problem = matched_objects_problem()
        report = optimize(problem, OptimizationConfig(seed=0))
        assert report.converged
        assert report.final_cost < 1e-6
        assert report.final_cost <= report.initial_cost

    def test_bit_identical_reruns(self):
        problem = bed_problem()
        cfg = OptimizationConfig(seed=42)
        a = optimize(problem, cfg)
        b = optimize(problem, cfg)
        np.testing.assert_array_equal(
            a.final_matrix.entries, b.final_matrix.entries
        )
        assert a.iterations == b.iterations

    def test_final_never_exceeds_initial_even_unconverged(self):
        problem = bed_problem()
        report = optimize(
            problem, OptimizationConfig(seed=1, max_iterations=3)
        )
        assert not report.converged
        assert report.final_cost <= report.initial_cost

    def test_needs_a_primary_coefficient(self):
        layout = named_layout("octahedron")
        cloud = PointCloud(layout.directions)
        g = build_encoding_matrix(ObjectsSpec(), cloud)
        problem = TranscodingProblem(
            g,
            identity_decoder(layout),
            CostCoefficients(in_phase_quadratic=10),
        )
        with pytest.raises(ConfigError, match="primary"):
            optimize(problem, OptimizationConfig())

    def test_progress_lines(self):
        problem = bed_problem()
        report = optimize(
            problem, OptimizationConfig(seed=0, log_every=10, max_iterations=25)
        )
        assert report.progress_lines
        iteration, cost, gnorm = report.progress_lines[0].split()
        assert iteration == "0"
        float(cost), float(gnorm)

    def test_input_permutation_equivariance(self):
        problem = bed_problem()
        perm = np.array([3, 0, 4, 1, 2])
        g = problem.encoding
        from satx.formats import EncodingMatrix

        g_p = EncodingMatrix(
            g.entries[:, perm],
            g.cloud,
            tuple(g.channel_labels[i] for i in perm),
        )
        problem_p = TranscodingProblem(
            g_p,
            problem.decoder,
            problem.coeffs,
            problem.pairs,
            input_channel_directions=tuple(
                problem.input_channel_directions[i] for i in perm
            ),
            output_spec=problem.output_spec,
        )
        cfg = OptimizationConfig(init=RemapInit(), max_iterations=200)
        t = optimize(problem, cfg).final_matrix.entries
        t_p = optimize(problem_p, cfg).final_matrix.entries
        np.testing.assert_allclose(t_p, t[:, perm], atol=1e-6)

    def test_restarts_pick_lowest(self):
        problem = bed_problem()
        single = optimize(
            problem,
            OptimizationConfig(init=RandomInit(), seed=5, max_iterations=120),
        )
        multi = optimize(
            problem,
            OptimizationConfig(
                init=RandomInit(), seed=5, restarts=3, max_iterations=120
            ),
        )
        assert multi.final_cost <= single.final_cost + 1e-15

    def test_transverse_weight_monotonicity(self):
        achieved = []
        for c_it in (0.25, 1.0, 4.0, 16.0):
            problem = bed_problem()
            problem.coeffs = CostCoefficients(
                energy=5, intensity_radial=2, intensity_transverse=c_it,
                in_phase_quadratic=10, symmetry_quadratic=2,
            )
            report = optimize(problem, OptimizationConfig(seed=9))
            achieved.append(report.final_breakdown["intensity_transverse"])
        assert all(b <= a + 1e-9 for a, b in zip(achieved, achieved[1:]))
