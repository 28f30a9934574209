from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calibrax.calibration.curves import (CalibrationCurve, ConsistencyLevelError, convex_minorant, dm_constant,
                                         sample_complexity, uniform_grid)


def binary_curve(n: int = 101) -> CalibrationCurve:
    eps = np.linspace(0, 1, n)
    return CalibrationCurve(eps, eps**2 / 8)


class TestCurve:
    @pytest.mark.parametrize("eps, values", [([0.0, 0.0], [0.0, 1.0]), ([0.0, 1.0], [0.2, 0.1]),
                                             ([0.0, 1.0], [np.inf, 1.0]), ([0.0, 1.0], [np.nan, 1.0]),
                                             ([-1.0, 1.0], [0.0, 1.0]), ([0.0], [0.0, 1.0])])
    def test_invalid(self, eps, values):
        with pytest.raises(ValueError):
            CalibrationCurve(eps, values)

    def test_unknown_meta(self):
        with pytest.raises(ValueError, match="meta"):
            CalibrationCurve([0.0], [0.0], meta="guess")

    def test_interpolation(self):
        c = CalibrationCurve([0.0, 1.0, 2.0], [0.0, 1.0, np.inf])
        assert c(0.5) == 0.5
        assert c(1.0) == 1.0
        assert c(1.5) == math.inf
        with pytest.raises(ValueError):
            c(2.5)

    def test_zero_exit(self):
        c = CalibrationCurve([0.0, 0.1, 0.2, 0.3], [0.0, 0.0, 0.5, 1.0])
        assert c.zero_exit() == (0.1, 0.2)

    def test_csv_round_trip_is_exact(self, tmp_path):
        eps = np.linspace(0, 1.2, 13)
        vals = np.where(eps <= 1, eps**2 / 8, np.inf)
        c = CalibrationCurve(eps, vals, "exact_qp", {"pairs": "all"})
        c.to_csv(tmp_path / "c.csv")
        back = CalibrationCurve.from_csv(tmp_path / "c.csv")
        assert np.array_equal(back.eps, c.eps) and np.array_equal(back.values, c.values)
        assert back.meta == "exact_qp" and back.info == {"pairs": "all"}
        text = (tmp_path / "c.csv").read_text()
        assert text.splitlines()[:2] == ["# meta: exact_qp pairs=all", "epsilon,value"]
        assert text.splitlines()[-1] == "1.2,inf"

    @pytest.mark.parametrize("body, msg", [("eps,val\n0,0\n", "header"), ("epsilon,value\n0\n", "two columns"),
                                           ("epsilon,value\n0,x\n", "not a number")])
    def test_csv_errors(self, tmp_path, body, msg):
        path = tmp_path / "bad.csv"
        path.write_text(body)
        with pytest.raises(ValueError, match=msg):
            CalibrationCurve.from_csv(path)

    def test_uniform_grid(self):
        assert np.array_equal(uniform_grid(0, 1, 3), [0.0, 0.5, 1.0])
        with pytest.raises(ValueError):
            uniform_grid(1, 0, 3)


class TestMinorant:
    def test_convex_curve_is_unchanged(self):
        c = binary_curve()
        assert np.allclose(convex_minorant(c).values, c.values, atol=1e-18)
        assert convex_minorant(c).meta == "minorant"

    def test_step_curve(self):
        c = CalibrationCurve([0.0, 1.0, 2.0, 3.0], [0.0, 0.0, 1.0, 1.0])
        assert np.allclose(convex_minorant(c).values, [0.0, 0.0, 0.5, 1.0])

    def test_inf_tail_kept(self):
        c = CalibrationCurve([0.0, 1.0, 2.0], [0.0, 1.0, np.inf])
        assert convex_minorant(c).values[-1] == np.inf

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0, 10), min_size=2, max_size=30))
    def test_is_convex_monotone_minorant(self, incs):
        y = np.cumsum(incs)
        x = np.arange(y.size, dtype=float)
        g = convex_minorant(CalibrationCurve(x, y)).values
        assert np.all(g <= y + 1e-9)
        assert np.all(np.diff(g) >= -1e-9)
        assert np.all(np.diff(g, 2) >= -1e-7 * max(1.0, y.max()))


class TestSampleComplexity:
    def test_binary_worked_example(self):
        res = sample_complexity(convex_minorant(binary_curve()), 0.1, dm=1.0)
        assert res.n_samples == 2_560_000
        assert res.delta == pytest.approx(0.00125, rel=1e-12)

    def test_constant_breakdown(self):
        dm, parts = dm_constant(1.0, 2.0, 4, 0.5, 3.0)
        assert parts["z"] == pytest.approx(6.0) and dm == pytest.approx(42.0)
        res = sample_complexity(binary_curve(), 0.5, 1.0, 2.0, 4, 0.5, 3.0)
        assert res.n_star == pytest.approx(4 * 42.0**2 / (0.25 / 8) ** 2)

    def test_below_consistency_level(self):
        c = CalibrationCurve([0.0, 0.5, 1.0], [0.0, 0.0, 1.0])
        with pytest.raises(ConsistencyLevelError):
            sample_complexity(c, 0.5, dm=1.0)
        with pytest.raises(ConsistencyLevelError):
            sample_complexity(c, 0.0, dm=1.0)

    def test_missing_constants(self):
        with pytest.raises(ValueError):
            sample_complexity(binary_curve(), 0.5, l_max=1.0)
