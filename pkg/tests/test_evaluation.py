import math

import numpy as np
import pytest

from surfmap.errors import NoCountedCells
from surfmap.evaluation import (
    EvaluationConfig,
    error_map,
    evaluate,
    format_report_table,
    write_report_csv,
)
from surfmap.grid import GridSpec, new_grid
from surfmap.simulator import FlatSurface, RampSurface


def grid_1mm(n=20, z0=0.0, p0=1.0):
    return new_grid(GridSpec(0.0, float(n), 0.0, float(n), n, n), z0=z0, p0=p0)


class TestEvaluate:
    def test_perfect_grid_gives_zero_errors(self):
        grid = grid_1mm(z0=5.0)
        rep = evaluate(grid, FlatSurface(z0=5.0), EvaluationConfig(spacing=5.0))
        assert rep.mean_abs_err == 0.0
        assert rep.max_abs_err == 0.0
        assert rep.std_dev == 0.0
        assert rep.counted == 25  # 5 x 5 lattice over a 20 mm square
        assert rep.excluded == 0

    def test_all_cells_filtered_raises(self):
        grid = grid_1mm(p0=1e6)  # everything above the default 1e4 threshold
        with pytest.raises(NoCountedCells):
            evaluate(grid, FlatSurface())

    def test_hand_computed_three_cell_case(self):
        # lattice spacing equal to the extent: samples land on the four
        # corner cells; filter one, leave signed errors {+1, -1, +2}
        grid = new_grid(GridSpec(0.0, 4.0, 0.0, 4.0, 4, 4), p0=1.0)
        grid.z_hat[0, 0] = 1.0   # error +1
        grid.z_hat[3, 0] = -1.0  # error -1  (cell nearest x=4 is index 3)
        grid.z_hat[0, 3] = 2.0   # error +2
        grid.p_hat[3, 3] = 1e9   # filtered out
        rep = evaluate(grid, FlatSurface(z0=0.0), EvaluationConfig(spacing=4.0))
        assert rep.counted == 3
        assert rep.excluded == 1
        assert rep.mean_abs_err == pytest.approx(4.0 / 3.0, rel=1e-12)
        assert rep.max_abs_err == 2.0
        # population std of {+1, -1, +2}: sqrt(E[x^2] - mean^2)
        # = sqrt(2 - 4/9) = sqrt(14/9)
        assert rep.std_dev == pytest.approx(math.sqrt(14.0 / 9.0), rel=1e-12)

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(14)
        grid = grid_1mm()
        grid.p_hat[:] = rng.uniform(0.0, 100.0, size=grid.p_hat.shape)
        counts = []
        for thr in (10.0, 50.0, 200.0):
            rep = evaluate(grid, FlatSurface(),
                           EvaluationConfig(spacing=2.0, cov_threshold=thr))
            counts.append(rep.counted)
            assert rep.counted + rep.excluded == 11 * 11
        assert counts[0] <= counts[1] <= counts[2]

    def test_matches_error_map_recomputation(self):
        rng = np.random.default_rng(15)
        # clip the domain so the lattice endpoint does not alias onto the
        # same cell as the previous point (x = 20 and x = 19 both map to
        # cell 19 on a 1 mm grid)
        model = RampSurface(slope_x=0.1, slope_y=-0.05, z0=3.0,
                            domain=((0.0, 19.0), (0.0, 19.0)))
        grid = grid_1mm()
        grid.z_hat[:] = rng.normal(3.0, 1.0, size=grid.z_hat.shape)
        grid.p_hat[:] = rng.uniform(0.0, 2e4, size=grid.p_hat.shape)
        cfg = EvaluationConfig(spacing=1.0, cov_threshold=1e4)
        rep = evaluate(grid, model, cfg)
        # spacing equal to the cell size: every counted lattice point maps to
        # its own cell, so the report must agree with the dense error map
        emap = error_map(grid, model, cov_threshold=1e4)
        vals = emap[~np.isnan(emap)]
        assert rep.counted == vals.size
        assert rep.mean_abs_err == pytest.approx(np.mean(np.abs(vals)), rel=1e-12)
        assert rep.max_abs_err == pytest.approx(np.max(np.abs(vals)), rel=1e-12)
        assert rep.std_dev == pytest.approx(np.std(vals), rel=1e-12)


class TestErrorMap:
    def test_perfect_grid_all_zero(self):
        grid = grid_1mm(z0=2.0, p0=1.0)
        emap = error_map(grid, FlatSurface(z0=2.0))
        np.testing.assert_array_equal(emap, 0.0)

    def test_unmapped_cells_are_nan(self):
        grid = grid_1mm(p0=1.0)
        grid.p_hat[4, 7] = 1e9
        emap = error_map(grid, FlatSurface())
        assert math.isnan(emap[4, 7])
        assert np.isnan(emap).sum() == 1

    def test_off_domain_cells_are_nan(self):
        grid = grid_1mm(p0=1.0)
        model = FlatSurface(domain=((5.0, 500.0), (0.0, 200.0)))
        emap = error_map(grid, model)
        assert np.all(np.isnan(emap[:5, :]))
        assert not np.any(np.isnan(emap[5:, :]))

    def test_signed_bump(self):
        grid = grid_1mm(p0=1.0)
        grid.z_hat[3, 3] = 1.5
        grid.z_hat[6, 6] = -0.5
        emap = error_map(grid, FlatSurface())
        assert emap[3, 3] == 1.5
        assert emap[6, 6] == -0.5
        assert emap[0, 0] == 0.0


class TestReportOutput:
    def test_csv_and_table(self, tmp_path):
        grid = grid_1mm(z0=1.0, p0=1.0)
        rep = evaluate(grid, FlatSurface(), mask_kind="triangle")
        path = tmp_path / "report.csv"
        write_report_csv(path, [rep])
        lines = path.read_text().splitlines()
        assert lines[0].startswith("mask,")
        assert lines[1].startswith("triangle,1.0,1.0,")
        table = format_report_table([rep])
        assert "triangle" in table
        assert "1.000" in table
