"""Endpoint transforms, the linear point map, and Newton inversion."""

import numpy as np
import pytest

from fibench.synth.transforms import (
    GeometricTransform,
    PhotometricTransform,
    blend_point_map,
    invert_blend_map,
    lerp_photometric,
)


def mild_perspective_pair(seed=0):
    rng = np.random.default_rng(seed)
    a = GeometricTransform.similarity(
        *rng.uniform(-20, 20, 2), rng.uniform(-0.2, 0.2), rng.uniform(0.9, 1.1)
    ).compose(GeometricTransform.perspective(*rng.uniform(-1e-5, 1e-5, 2)))
    b = GeometricTransform.similarity(
        *rng.uniform(-20, 20, 2), rng.uniform(-0.2, 0.2), rng.uniform(0.9, 1.1)
    ).compose(GeometricTransform.perspective(*rng.uniform(-1e-5, 1e-5, 2)))
    return a, b


class TestGeometricTransform:
    def test_normalization_required(self):
        with pytest.raises(ValueError):
            GeometricTransform(np.eye(3) * 2.0)

    def test_from_matrix_normalizes(self):
        t = GeometricTransform.from_matrix(np.diag([2.0, 2.0, 2.0]))
        assert t.matrix[2, 2] == 1.0

    def test_singular_rejected(self):
        m = np.eye(3)
        m[0, 0] = 0.0
        m[0, 1] = 0.0
        m[0, 2] = 0.0
        with pytest.raises(ValueError):
            GeometricTransform(m)

    def test_inverse_round_trip(self):
        a, _ = mild_perspective_pair(3)
        pts = np.random.default_rng(0).uniform(-50, 50, (100, 2))
        back = a.inverse().apply(a.apply(pts))
        assert np.abs(back - pts).max() < 1e-9

    def test_jacobian_matches_finite_differences(self):
        a, _ = mild_perspective_pair(4)
        pts = np.random.default_rng(1).uniform(-30, 30, (50, 2))
        jac = a.jacobian(pts)
        eps = 1e-6
        for axis in range(2):
            step = np.zeros(2)
            step[axis] = eps
            fd = (a.apply(pts + step) - a.apply(pts - step)) / (2 * eps)
            assert np.abs(jac[:, :, axis] - fd).max() < 1e-6


class TestPointMap:
    def test_t0_is_first_endpoint(self):
        a, b = mild_perspective_pair(5)
        pts = np.array([[1.0, 2.0], [3.0, -4.0]])
        assert np.array_equal(blend_point_map(a, b, 0.0, pts), a.apply(pts))
        assert np.array_equal(blend_point_map(a, b, 1.0, pts), b.apply(pts))

    def test_midpoint_of_translation(self):
        a = GeometricTransform.identity()
        b = GeometricTransform.translation(8.0, 0.0)
        p = np.array([[2.0, 3.0]])
        out = blend_point_map(a, b, 0.5, p)
        assert np.allclose(out, [[6.0, 3.0]])

    def test_trajectory_is_linear_constant_speed(self):
        a, b = mild_perspective_pair(6)
        pts = np.random.default_rng(2).uniform(-10, 10, (200, 2))
        p0 = blend_point_map(a, b, 0.0, pts)
        p1 = blend_point_map(a, b, 1.0, pts)
        quarter = blend_point_map(a, b, 0.25, pts)
        assert np.abs((quarter - p0) - (p1 - p0) / 4.0).max() < 1e-9


class TestInversion:
    def test_affine_blend_single_newton_step(self):
        a = GeometricTransform.similarity(3.0, -2.0, 0.3, 1.05)
        b = GeometricTransform.similarity(-5.0, 7.0, -0.2, 0.95)
        x = np.random.default_rng(3).uniform(-40, 40, (500, 2))
        p, ok = invert_blend_map(a, b, 0.37, x)
        assert ok.all()
        residual = np.linalg.norm(blend_point_map(a, b, 0.37, p) - x, axis=-1)
        assert residual.max() <= 1e-9

    def test_endpoint_is_exact_projective_inverse(self):
        a, b = mild_perspective_pair(7)
        x = np.random.default_rng(4).uniform(-40, 40, (200, 2))
        p, ok = invert_blend_map(a, b, 0.0, x)
        assert ok.all()
        assert np.abs(p - a.inverse().apply(x)).max() < 1e-7

    def test_round_trip_mild_perspective(self):
        a, b = mild_perspective_pair(8)
        x = np.random.default_rng(5).uniform(-100, 100, (10_000, 2))
        p, ok = invert_blend_map(a, b, 0.5, x)
        assert ok.all()
        residual = np.linalg.norm(blend_point_map(a, b, 0.5, p) - x, axis=-1)
        assert residual.max() <= 1e-4


class TestPhotometric:
    def test_same_endpoints_time_independent(self):
        p = PhotometricTransform(np.array([1.1, 0.9, 1.0]), np.array([1.2, 0.8, 1.0]), 0.02)
        colors = np.random.default_rng(6).random((10, 3))
        out_a = lerp_photometric(p, p, 0.3).apply(colors)
        out_b = lerp_photometric(p, p, 0.8).apply(colors)
        assert np.array_equal(out_a, out_b)

    def test_endpoints_exact(self):
        p0 = PhotometricTransform(np.array([1.1, 0.9, 1.0]), np.array([1.2, 0.8, 1.0]), 0.02)
        p1 = PhotometricTransform(np.array([0.8, 1.3, 1.1]), np.array([0.9, 1.1, 1.0]), -0.03)
        colors = np.random.default_rng(7).random((10, 3))
        assert np.array_equal(lerp_photometric(p0, p1, 0.0).apply(colors), p0.apply(colors))
        assert np.array_equal(lerp_photometric(p0, p1, 1.0).apply(colors), p1.apply(colors))

    def test_midpoint_gain_on_gray(self):
        p0 = PhotometricTransform(np.ones(3), np.ones(3), 0.0)
        p1 = PhotometricTransform(np.full(3, 1.2), np.ones(3), 0.0)
        out = lerp_photometric(p0, p1, 0.5).apply(np.array([0.5, 0.5, 0.5]))
        assert np.allclose(out, 0.55)

    def test_output_clamped(self):
        p = PhotometricTransform(np.full(3, 1.4), np.full(3, 0.8), 0.05)
        out = p.apply(np.array([[1.0, 1.0, 1.0], [0.0, 0.0, 0.0]]))
        assert out.max() <= 1.0 and out.min() >= 0.0
