import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltvcert.model import (PiecewiseLTVSystem, SystemFileError, TimeGrid,
                           UncertainPiecewiseLTVSystem, load_system, save_system)
from tests.conftest import make_system


class TestTimeGrid:
    def test_alpha_midpoint(self):
        assert TimeGrid((0.0, 1.0)).alpha(1, 0.5) == 0.5

    def test_alpha_offset_grid(self):
        assert TimeGrid((2.0, 6.0)).alpha(1, 5.0) == 0.75

    def test_alpha_exact_at_knot(self):
        g = TimeGrid((0.0, 0.1, 0.30000000000000004))
        assert g.alpha(2, 0.30000000000000004) == 1.0
        assert g.alpha(1, 0.0) == 0.0

    def test_gamma(self):
        assert TimeGrid((0.0, 0.25)).gamma(1) == 4.0

    def test_segment_right_closed(self):
        g = TimeGrid((0.0, 1.0, 2.0))
        assert g.segment_of(1.0) == 1
        assert g.segment_of(1.0 + 1e-12) == 2
        assert g.segment_of(-5.0) == 1
        assert g.segment_of(99.0) == 2

    def test_rejects_bad_grids(self):
        with pytest.raises(ValueError):
            TimeGrid((0.0, 0.0))
        with pytest.raises(ValueError):
            TimeGrid((1.0, 0.0))
        with pytest.raises(ValueError):
            TimeGrid((0.0, np.inf))

    @given(st.floats(-100, 100), st.floats(0.01, 100), st.floats(0, 1))
    @settings(max_examples=200)
    def test_alpha_translation_scaling(self, a, w, frac):
        """alpha on {a, b} at t equals alpha on {0, 1} at (t-a)/(b-a)."""
        b = a + w
        t = min(a + frac * (b - a), b)
        got = TimeGrid((a, b)).alpha(1, t)
        ref = TimeGrid((0.0, 1.0)).alpha(1, min((t - a) / (b - a), 1.0))
        assert got == pytest.approx(ref, abs=4 * np.finfo(float).eps)


class TestEvalA:
    def test_knot_is_stored_matrix(self):
        A = [np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0, 6.0], [7.0, 8.0]])]
        s = make_system([0.0, 1.0], A)
        assert s.eval_A(1.0) is s.A[1]
        assert s.eval_A(0.0) is s.A[0]

    def test_midpoint_average(self):
        s = make_system([0.0, 1.0], [-np.eye(2), -3.0 * np.eye(2)])
        np.testing.assert_array_equal(s.eval_A(0.5), -2.0 * np.eye(2))

    def test_constant_outside_grid(self):
        s = make_system([0.0, 1.0], [[[-1.0]], [[-2.0]]])
        assert s.eval_A(-10.0)[0, 0] == -1.0
        assert s.eval_A(42.0)[0, 0] == -2.0

    @given(st.floats(0, 3))
    @settings(max_examples=200)
    def test_convexity(self, t):
        A = [np.array([[-1.0, 0.2], [0.0, -2.0]]),
             np.array([[-3.0, -0.5], [1.0, -1.0]]),
             np.array([[-2.0, 0.0], [0.5, -4.0]])]
        s = make_system([0.0, 1.0, 3.0], A)
        k = s.grid.segment_of(t)
        lo = np.minimum(A[k - 1], A[k])
        hi = np.maximum(A[k - 1], A[k])
        v = s.eval_A(t)
        assert np.all(v >= lo - 1e-12) and np.all(v <= hi + 1e-12)

    def test_continuity_at_knots(self):
        s = make_system([0.0, 1.0, 2.0],
                        [np.diag([-1.0, -2.0]), np.diag([-3.0, -1.0]),
                         np.diag([-2.0, -2.0])])
        for tk in s.grid.breakpoints:
            left = s.eval_A(np.nextafter(tk, -np.inf))
            right = s.eval_A(np.nextafter(tk, np.inf))
            at = s.eval_A(tk)
            assert np.allclose(left, at, atol=1e-12)
            assert np.allclose(right, at, atol=1e-12)


class TestUncertain:
    def test_delta_zero_bitwise(self, scalar_uncertain):
        usys, _ = scalar_uncertain
        np.testing.assert_array_equal(usys.eval_perturbed(0.3, 0.0),
                                      usys.base.eval_A(0.3))
        # at a knot both sides are the stored matrix itself
        assert usys.eval_perturbed(1.0, 0.0) is usys.base.A[1]

    def test_scalar_cancellation(self, scalar_uncertain):
        usys, _ = scalar_uncertain
        assert usys.eval_perturbed(0.7, 2.0)[0, 0] == 0.0

    def test_b_equals_a_doubles(self):
        A = [np.array([[-1.0, 0.5], [0.0, -2.0]]), np.array([[-2.0, 0.0], [1.0, -1.0]])]
        usys = make_system([0.0, 1.0], A, A)
        t = 0.37
        np.testing.assert_allclose(usys.eval_perturbed(t, 1.0),
                                   2.0 * usys.base.eval_A(t), atol=1e-14)

    def test_nonfinite_delta_rejected(self, scalar_uncertain):
        usys, _ = scalar_uncertain
        with pytest.raises(ValueError):
            usys.eval_perturbed(0.0, np.nan)


class TestValidate:
    def test_well_formed_ok(self, scalar_pw_stable):
        sys_obj, _ = scalar_pw_stable
        assert sys_obj.validate() == []

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            make_system([0.0, 1.0], [np.eye(2), np.eye(3)])

    def test_nonfinite_entries(self):
        with pytest.raises(ValueError, match="non-finite"):
            make_system([0.0, 1.0], [[[np.nan]], [[-1.0]]])

    def test_count_mismatch(self):
        with pytest.raises(ValueError, match="count"):
            make_system([0.0, 1.0, 2.0], [[[-1.0]], [[-2.0]]])

    def test_b_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            make_system([0.0, 1.0], [np.eye(2), np.eye(2)],
                        [np.eye(3), np.eye(3)])


class TestFileIO:
    def test_round_trip_nominal(self, tmp_path, scalar_pw_stable):
        sys_obj, eps = scalar_pw_stable
        p = tmp_path / "s.json"
        save_system(p, sys_obj, eps.epsilon)
        loaded, eps2 = load_system(p)
        assert isinstance(loaded, PiecewiseLTVSystem)
        assert loaded.grid.breakpoints == sys_obj.grid.breakpoints
        for a, b in zip(loaded.A, sys_obj.A):
            np.testing.assert_array_equal(a, b)
        assert tuple(eps2) == eps.epsilon

    def test_round_trip_uncertain(self, tmp_path, planar_uncertain):
        usys, _ = planar_uncertain
        p = tmp_path / "u.json"
        save_system(p, usys)
        loaded, eps = load_system(p)
        assert isinstance(loaded, UncertainPiecewiseLTVSystem)
        assert eps is None
        for a, b in zip(loaded.B, usys.B):
            np.testing.assert_array_equal(a, b)

    def test_flat_row_major_accepted(self, tmp_path):
        doc = {"format": 1, "breakpoints": [0.0, 1.0],
               "A": [[-1.0, 0.5, 0.0, -2.0], [[-2.0, 0.0], [1.0, -1.0]]]}
        p = tmp_path / "flat.json"
        p.write_text(json.dumps(doc))
        loaded, _ = load_system(p)
        np.testing.assert_array_equal(loaded.A[0],
                                      np.array([[-1.0, 0.5], [0.0, -2.0]]))

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(SystemFileError):
            load_system(p)

    def test_missing_keys(self, tmp_path):
        p = tmp_path / "nokeys.json"
        p.write_text(json.dumps({"format": 1, "A": [[[-1.0]]]}))
        with pytest.raises(SystemFileError, match="breakpoints"):
            load_system(p)

    def test_epsilon_validation(self, tmp_path):
        p = tmp_path / "eps.json"
        doc = {"breakpoints": [0.0, 1.0], "A": [[[-1.0]], [[-1.0]]],
               "epsilon": [0.1]}
        p.write_text(json.dumps(doc))
        with pytest.raises(SystemFileError, match="epsilon count"):
            load_system(p)
        doc["epsilon"] = [0.1, -0.1]
        p.write_text(json.dumps(doc))
        with pytest.raises(SystemFileError, match="positive"):
            load_system(p)

    def test_bad_grid_in_file(self, tmp_path):
        p = tmp_path / "grid.json"
        p.write_text(json.dumps({"breakpoints": [0.0, 0.0],
                                 "A": [[[-1.0]], [[-1.0]]]}))
        with pytest.raises(SystemFileError):
            load_system(p)
