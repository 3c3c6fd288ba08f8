"""Tests for the design-quality summaries."""

import numpy as np
import pytest

from smdd import GpModel, Kernel, aid, euclidean_distance, generate_lhd, mpv


class TestAid:
    def test_hand_value(self):
        pts = np.array([[0.0], [0.5], [1.0]])
        # pairwise distances 0.5, 1.0, 0.5 average to 2/3
        assert aid(pts) == pytest.approx(2.0 / 3.0)

    def test_two_points(self):
        assert aid(np.array([[0.0, 0.0], [3.0, 4.0]])) == pytest.approx(5.0)

    def test_callable_metric_matches_default(self):
        rng = np.random.default_rng(0)
        pts = rng.random((9, 3))
        assert aid(pts, metric=euclidean_distance) == pytest.approx(
            aid(pts), rel=1e-12)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            aid(np.array([[0.5, 0.5]]))

    def test_scale_linear(self):
        rng = np.random.default_rng(1)
        pts = rng.random((6, 2))
        assert aid(3.0 * pts) == pytest.approx(3.0 * aid(pts), rel=1e-12)


@pytest.fixture(scope="module")
def model():
    x = generate_lhd(12, 2, seed=3).points
    y = np.sin(4.0 * x[:, 0]) + x[:, 1] ** 2
    return x, GpModel.build(x, y, Kernel("gaussian", 8.0))


class TestMpv:
    def test_near_zero_at_training_points(self, model):
        x, m = model
        assert mpv(m, x) < 1e-6

    def test_positive_away_from_training_points(self, model):
        x, m = model
        test = np.random.default_rng(4).random((100, 2))
        assert mpv(m, test) > mpv(m, x)

    def test_is_mean_of_pointwise_variances(self, model):
        x, m = model
        test = np.random.default_rng(5).random((30, 2))
        _, var = m.posterior(test)
        assert mpv(m, test) == pytest.approx(float(var.mean()), rel=1e-12)
