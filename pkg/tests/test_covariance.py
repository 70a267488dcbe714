import numpy as np
import pytest

from surfmap.covariance import CovarianceParams, covariance_field, rbf_covariance
from surfmap.geometry import fit_plane_pca
from surfmap.grid import GridSpec
from surfmap.masks import BinaryMask

EXAMPLE_POINTS = np.array([[5.0, 5.0, 5.0], [13.0, 7.0, 7.0], [9.0, 13.0, 10.0]])


def horizontal_plane(z=0.0):
    return fit_plane_pca([(0, 0, z), (10, 0, z), (0, 10, z)])


class TestPointwise:
    def test_r_min_at_isolated_measurement_point(self):
        # other points far enough that their kernels vanish below 1e-12
        pts = np.array([[0.0, 0.0, 0.0], [100.0, 0.0, 0.0], [0.0, 100.0, 0.0]])
        plane = horizontal_plane()
        params = CovarianceParams(r_min=10.0, r_max=1e4, alpha=0.1)
        r = rbf_covariance(0.0, 0.0, plane, pts, params)
        assert float(r) == params.r_min

    def test_far_field_value(self):
        plane = fit_plane_pca(EXAMPLE_POINTS)
        params = CovarianceParams(r_min=10.0, r_max=1e4, alpha=0.1)
        r = rbf_covariance(2000.0, 2000.0, plane, EXAMPLE_POINTS, params)
        # all kernels vanish: (R_max - R_min) / L + R_min, not R_max
        assert float(r) == pytest.approx((1e4 - 10.0) / 3.0 + 10.0, abs=1e-6)

    def test_range_after_clamp(self):
        rng = np.random.default_rng(4)
        plane = fit_plane_pca(EXAMPLE_POINTS)
        params = CovarianceParams(r_min=10.0, r_max=1e4, alpha=0.1)
        x = rng.uniform(-100, 100, size=500)
        y = rng.uniform(-100, 100, size=500)
        r = rbf_covariance(x, y, plane, EXAMPLE_POINTS, params)
        assert np.all(r >= params.r_min)
        assert np.all(r <= params.r_max)

    def test_permutation_symmetry(self):
        rng = np.random.default_rng(5)
        plane = fit_plane_pca(EXAMPLE_POINTS)
        params = CovarianceParams()
        x, y = 7.3, 8.1
        base = rbf_covariance(x, y, plane, EXAMPLE_POINTS, params)
        for _ in range(5):
            perm = rbf_covariance(x, y, plane, EXAMPLE_POINTS[rng.permutation(3)], params)
            assert float(perm) == pytest.approx(float(base), rel=1e-12)

    def test_single_point_radial_monotone_and_limit(self):
        plane = horizontal_plane()
        pts = np.array([[0.0, 0.0, 0.0]])
        params = CovarianceParams(r_min=10.0, r_max=1e4, alpha=0.1)
        radii = np.linspace(0.0, 50.0, 200)
        r = rbf_covariance(radii, np.zeros_like(radii), plane, pts, params)
        assert float(r[0]) == params.r_min
        assert np.all(np.diff(r) >= -1e-9)
        # for L = 1 the far field reaches R_max exactly
        far = rbf_covariance(1e4, 0.0, plane, pts, params)
        assert float(far) == pytest.approx(params.r_max, abs=1e-9)

    def test_modes_agree_on_horizontal_plane(self):
        plane = horizontal_plane(3.0)
        pts = np.array([[1.0, 2.0, 3.0], [6.0, 1.0, 3.0], [3.0, 7.0, 3.0]])
        x = np.linspace(-5, 12, 40)
        y = np.linspace(-5, 12, 40)
        a = rbf_covariance(x, y, plane, pts, CovarianceParams(distance_mode="plane"))
        b = rbf_covariance(x, y, plane, pts, CovarianceParams(distance_mode="xy"))
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_alpha_increases_covariance(self):
        plane = horizontal_plane()
        pts = np.array([[0.0, 0.0, 0.0]])
        lo = rbf_covariance(3.0, 0.0, plane, pts, CovarianceParams(alpha=0.05))
        hi = rbf_covariance(3.0, 0.0, plane, pts, CovarianceParams(alpha=0.2))
        assert float(hi) > float(lo)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            CovarianceParams(r_min=10.0, r_max=5.0)
        with pytest.raises(ValueError):
            CovarianceParams(alpha=0.0)
        with pytest.raises(ValueError):
            CovarianceParams(distance_mode="polar")


class TestField:
    def test_empty_mask(self):
        spec = GridSpec(0, 10, 0, 10, 10, 10)
        mask = BinaryMask(np.zeros((10, 10), dtype=bool), spec)
        field = covariance_field(mask, fit_plane_pca(EXAMPLE_POINTS),
                                 EXAMPLE_POINTS, CovarianceParams())
        assert len(field.values) == 0

    def test_single_cell(self):
        spec = GridSpec(0, 10, 0, 10, 10, 10)
        bits = np.zeros((10, 10), dtype=bool)
        bits[4, 6] = True
        mask = BinaryMask(bits, spec)
        plane = fit_plane_pca(EXAMPLE_POINTS)
        params = CovarianceParams()
        field = covariance_field(mask, plane, EXAMPLE_POINTS, params)
        assert len(field.values) == 1
        x, y = spec.index_to_coord(4, 6)
        expected = rbf_covariance(x, y, plane, EXAMPLE_POINTS, params)
        assert field.values[0] == pytest.approx(float(expected), rel=1e-12)

    def test_full_mask_matches_pointwise_loop(self):
        spec = GridSpec(0, 18, 0, 18, 12, 12)
        mask = BinaryMask(np.ones((12, 12), dtype=bool), spec)
        plane = fit_plane_pca(EXAMPLE_POINTS)
        params = CovarianceParams()
        field = covariance_field(mask, plane, EXAMPLE_POINTS, params)
        for ii, jj, val in zip(field.idx_i, field.idx_j, field.values):
            x, y = spec.index_to_coord(int(ii), int(jj))
            expected = rbf_covariance(x, y, plane, EXAMPLE_POINTS, params)
            assert val == pytest.approx(float(expected), rel=1e-12)


class TestThreePointLandscape:
    def test_minima_at_projected_point_locations(self):
        # grid over [0, 18]^2 with the three example points and alpha = 0.1:
        # local minima sit at the points' xy locations, values rise radially
        plane = fit_plane_pca(EXAMPLE_POINTS)
        params = CovarianceParams(r_min=10.0, r_max=1e4, alpha=0.1)
        step = 0.25
        xs = np.arange(0.0, 18.0 + step, step)
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        r = rbf_covariance(gx, gy, plane, EXAMPLE_POINTS, params)
        for px, py, _ in EXAMPLE_POINTS:
            i = int(round(px / step))
            j = int(round(py / step))
            patch = r[i - 1:i + 2, j - 1:j + 2]
            assert r[i, j] == patch.min()
        # values increase away from the points: corners are far-field
        assert r[0, 0] > r[int(5 / step), int(5 / step)]
        assert r[-1, -1] > r[int(9 / step), int(13 / step)]
