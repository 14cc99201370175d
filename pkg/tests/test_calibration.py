import numpy as np
import pytest

from entropy_monitor.calibration import IsotonicMap, calibrate, pava, predict_members
from entropy_monitor.classifiers.logreg import train_logreg_l1
from entropy_monitor.errors import EmptyInput
from oracles import isotonic_exhaustive


class TestPava:
    def test_already_monotone(self):
        iso = pava([1, 2, 3, 4], [0, 0, 1, 1])
        np.testing.assert_array_equal(iso([1, 2, 3, 4]), [0, 0, 1, 1])

    def test_one_violation(self):
        iso = pava([1, 2, 3, 4], [0, 1, 0, 1])
        np.testing.assert_allclose(iso([1, 2, 3, 4]), [0, 0.5, 0.5, 1])
        want, _ = isotonic_exhaustive([0, 1, 0, 1])
        np.testing.assert_allclose(iso([1, 2, 3, 4]), want)

    def test_constant_targets(self):
        iso = pava([3, 1, 2], [0.3, 0.3, 0.3])
        np.testing.assert_allclose(iso([0, 1.5, 10]), 0.3)

    def test_ties_merged_with_weights(self):
        iso = pava([1, 1, 2], [1, 0, 0], [3, 1, 1])
        np.testing.assert_array_equal(iso.breakpoints, [1, 2])
        # merged point (0.75, w=4) then 0 violates, pooled to 0.6
        np.testing.assert_allclose(iso.values, [0.6, 0.6])

    def test_interpolation_and_clamping(self):
        iso = IsotonicMap(np.array([0.0, 1.0]), np.array([0.2, 0.6]))
        np.testing.assert_allclose(iso([-5, 0.5, 7]), [0.2, 0.4, 0.6])

    def test_idempotent(self, rng):
        s = rng.random(50)
        t = (rng.random(50) < s).astype(float)
        iso = pava(s, t)
        again = pava(s, iso(s))
        np.testing.assert_allclose(again(s), iso(s), atol=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            pava([], [])

    def test_map_validation(self):
        with pytest.raises(ValueError):
            IsotonicMap(np.array([1.0, 1.0]), np.array([0.1, 0.2]))
        with pytest.raises(ValueError):
            IsotonicMap(np.array([1.0, 2.0]), np.array([0.3, 0.2]))

    def test_dict_round_trip(self):
        iso = pava([1, 2, 3], [0, 1, 1])
        back = IsotonicMap.from_dict(iso.to_dict())
        np.testing.assert_array_equal(back.values, iso.values)


def _fit_logreg(Z, y, seed):
    return train_logreg_l1(Z, y, 2.0)


class TestCalibrate:
    def _data(self, rng, n):
        z = rng.normal(size=(n, 1))
        p = 1 / (1 + np.exp(-1.5 * z[:, 0]))
        return z, (rng.random(n) < p).astype(int), p

    def test_outputs_in_unit_interval_and_members(self, rng):
        Z, y, _ = self._data(rng, 400)
        members = calibrate(_fit_logreg, Z, y, folds=5, seed=1)
        assert len(members) == 5
        p = predict_members(members, rng.normal(0, 10, size=(200, 1)))
        assert np.all((p >= 0) & (p <= 1))

    def test_calibrated_base_barely_moves(self, rng):
        Z, y, _ = self._data(rng, 5000)
        members = calibrate(_fit_logreg, Z, y, folds=5, seed=2)
        grid = np.linspace(-2, 2, 41)[:, None]
        base = _fit_logreg(Z, y, 0).predict_proba(grid)
        assert np.max(np.abs(predict_members(members, grid) - base)) <= 0.05

    def test_deterministic(self, rng):
        Z, y, _ = self._data(rng, 300)
        a = predict_members(calibrate(_fit_logreg, Z, y, seed=4), Z)
        b = predict_members(calibrate(_fit_logreg, Z, y, seed=4), Z)
        np.testing.assert_array_equal(a, b)
