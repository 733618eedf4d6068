import math

import numpy as np
import pytest

from pbgnet.bam_core import aggregate_forward_exact
from pbgnet.errors import DataFormatError, DimensionError, ModeError
from pbgnet.gradients import (
    EXACT,
    SAMPLED,
    aggregate_forward_sampled,
    grad_exact,
    grad_sampled,
    linear_loss,
    loss_gradient,
    sample_hidden,
)
from pbgnet.math_core import RngStream
from pbgnet.oracle import finite_difference_grad

from conftest import make_params, relative_error


def _prediction(x):
    return lambda p: aggregate_forward_exact(p, x).prediction[0]


def test_grad_exact_matches_finite_differences_one_hidden_layer():
    params = make_params((2, 3, 1), seed=0)
    x = np.array([0.7, -1.1])
    analytic = grad_exact(params, x, aggregate_forward_exact(params, x))
    numeric = finite_difference_grad(_prediction(x), params, h=1e-4)
    assert relative_error(analytic.flat(), numeric.flat()) <= 1e-5


@pytest.mark.parametrize("seed", range(10))
def test_grad_exact_matches_finite_differences_deep(seed):
    rng = np.random.default_rng(100 + seed)
    hidden = [int(w) for w in rng.integers(1, 5, size=int(rng.integers(1, 4)))]
    params = make_params([3] + hidden + [1], seed=seed)
    x = rng.normal(size=3)
    analytic = grad_exact(params, x, aggregate_forward_exact(params, x))
    numeric = finite_difference_grad(_prediction(x), params, h=1e-4)
    assert relative_error(analytic.flat(), numeric.flat()) <= 1e-5


def test_grad_exact_three_layer_net():
    params = make_params((2, 2, 2, 1), seed=1)
    x = np.array([-0.4, 0.9])
    analytic = grad_exact(params, x, aggregate_forward_exact(params, x))
    numeric = finite_difference_grad(_prediction(x), params, h=1e-4)
    for a, b in zip(analytic.weights, numeric.weights):
        assert relative_error(a, b) <= 1e-5


def test_zero_output_weights_zero_first_layer_gradient():
    params = make_params((2, 3, 1), seed=2)
    params.weights[-1][:] = 0.0
    x = np.array([1.0, 2.0])
    analytic = grad_exact(params, x, aggregate_forward_exact(params, x))
    assert np.max(np.abs(analytic.weights[0])) <= 1e-8
    numeric = finite_difference_grad(_prediction(x), params, h=1e-4)
    assert np.max(np.abs(numeric.weights[0])) <= 1e-8


def test_upstream_weights_sum_per_example_gradients():
    params = make_params((3, 3, 2, 1), seed=3)
    X = np.random.default_rng(4).normal(size=(5, 3))
    upstream = np.array([0.5, -1.0, 2.0, 0.0, 1.5])
    batched = grad_exact(params, X, aggregate_forward_exact(params, X), upstream)
    total = sum(
        upstream[i] * grad_exact(params, X[i], aggregate_forward_exact(params, X[i])).flat() for i in range(5)
    )
    assert np.allclose(batched.flat(), total, atol=1e-12)


def test_sample_hidden_certain_events():
    rng = RngStream(0)
    assert np.all(sample_hidden(np.ones(4), 50, rng).signs == 1.0)
    assert np.all(sample_hidden(-np.ones(4), 50, rng).signs == -1.0)


def test_sample_hidden_balanced_mean():
    T = 10 ** 5
    hidden = sample_hidden(np.zeros(3), T, RngStream(1))
    means = hidden.signs[0].mean(axis=0)
    assert np.all(np.abs(means) <= 4 / math.sqrt(T))


def test_sampled_forward_zero_output_weights():
    params = make_params((3, 4, 1), seed=5)
    params.weights[-1][:] = 0.0
    fwd = aggregate_forward_sampled(params, np.ones(3), 20, RngStream(2))
    assert fwd.prediction[0] == 0.0


def test_sampled_forward_close_to_exact_at_large_T():
    params = make_params((3, 5, 1), seed=6)
    x = np.array([0.2, -0.5, 1.3])
    exact = aggregate_forward_exact(params, x).prediction[0]
    fwd = aggregate_forward_sampled(params, x, 10 ** 5, RngStream(3))
    assert abs(fwd.prediction[0] - exact) <= 3 * math.sqrt(fwd.output_variance[0])


def test_single_draw_forward_is_unbiased():
    params = make_params((3, 4, 1), seed=7)
    x = np.array([1.0, 0.5, -0.7])
    exact = aggregate_forward_exact(params, x).prediction[0]
    runs = aggregate_forward_sampled(params, np.tile(x, (10 ** 4, 1)), 1, RngStream(4)).prediction
    std_error = runs.std(ddof=1) / math.sqrt(runs.size)
    assert abs(runs.mean() - exact) <= 3 * std_error
    assert np.all(np.isnan(aggregate_forward_sampled(params, x, 1, RngStream(4)).output_variance))


def test_sampled_variance_scales_inversely_with_T():
    params = make_params((3, 3, 1), seed=8)
    X = np.tile(np.array([0.3, 1.0, -0.2]), (1000, 1))
    sizes = np.array([10, 100, 1000])
    variances = [aggregate_forward_sampled(params, X, int(T), RngStream(5).derive("T", int(T))).prediction.var()
                 for T in sizes]
    slope = np.polyfit(np.log(sizes), np.log(variances), 1)[0]
    assert abs(slope + 1.0) <= 0.2


@pytest.mark.parametrize("widths", [(2, 3, 1), (2, 2, 2, 1), (2, 2, 2, 2, 1)])
def test_sampled_gradient_is_unbiased(widths):
    params = make_params(widths, seed=9)
    x = np.array([0.8, -0.6])
    exact = grad_exact(params, x, aggregate_forward_exact(params, x)).flat()
    batches, rows = 200, 50
    X = np.tile(x, (rows, 1))
    means = np.empty((batches, exact.size))
    root = RngStream(6)
    for b in range(batches):
        fwd = aggregate_forward_sampled(params, X, 10, root.derive("batch", b))
        means[b] = grad_sampled(params, X, fwd, np.full(rows, 1.0 / rows)).flat()
    estimate = means.mean(axis=0)
    std_error = means.std(axis=0, ddof=1) / math.sqrt(batches)
    assert np.all(np.abs(estimate - exact) <= 4 * std_error + 1e-12)


def test_sampled_gradient_zero_output_weights():
    params = make_params((2, 3, 1), seed=10)
    params.weights[-1][:] = 0.0
    x = np.array([1.0, 1.0])
    fwd = aggregate_forward_sampled(params, x, 25, RngStream(7))
    assert np.all(grad_sampled(params, x, fwd).weights[0] == 0.0)


def test_last_layer_estimator_matches_frozen_finite_differences():
    params = make_params((2, 3, 1), seed=11)
    x = np.array([0.4, 1.2])
    fwd = aggregate_forward_sampled(params, x, 15, RngStream(8))
    analytic = grad_sampled(params, x, fwd)

    def frozen(p):
        return aggregate_forward_sampled(p, x, 15, RngStream(0), frozen=fwd.samples).prediction[0]

    numeric = finite_difference_grad(frozen, params, h=1e-4)
    assert relative_error(analytic.weights[1], numeric.weights[1]) <= 1e-5


def test_sampled_passes_are_deterministic():
    params = make_params((3, 4, 2, 1), seed=12)
    X = np.random.default_rng(13).normal(size=(6, 3))
    first = aggregate_forward_sampled(params, X, 30, RngStream(9))
    second = aggregate_forward_sampled(params, X, 30, RngStream(9))
    assert np.array_equal(first.prediction, second.prediction)
    assert np.array_equal(grad_sampled(params, X, first).flat(), grad_sampled(params, X, second).flat())


def test_mode_mismatch_is_rejected():
    params = make_params((2, 2, 1), seed=14)
    x = np.array([1.0, 0.0])
    with pytest.raises(ModeError):
        grad_exact(params, x, aggregate_forward_sampled(params, x, 5, RngStream(0)))
    with pytest.raises(ModeError):
        grad_sampled(params, x, aggregate_forward_exact(params, x))


def test_linear_loss_examples():
    assert linear_loss(1.0, 1.0) == 0.0
    assert linear_loss(0.0, 1.0) == 0.5
    assert linear_loss(0.0, -1.0) == 0.5


def test_loss_gradient_matches_finite_differences():
    params = make_params((3, 3, 1), seed=15)
    rng = np.random.default_rng(16)
    X = rng.normal(size=(8, 3))
    y = np.where(rng.uniform(size=8) < 0.5, 1.0, -1.0)
    loss, grads = loss_gradient(params, X, y, EXACT)
    assert 0.0 <= loss <= 1.0
    numeric = finite_difference_grad(lambda p: loss_gradient(p, X, y, EXACT)[0], params, h=1e-4)
    assert relative_error(grads.flat(), numeric.flat()) <= 1e-5


def test_loss_is_half_when_prediction_is_zero():
    params = make_params((3, 3, 1), seed=17)
    params.weights[-1][:] = 0.0
    X = np.random.default_rng(18).normal(size=(4, 3))
    loss, _ = loss_gradient(params, X, np.array([1.0, -1.0, 1.0, 1.0]), SAMPLED, 10, RngStream(0))
    assert loss == 0.5


def test_loss_gradient_input_errors():
    params = make_params((2, 2, 1), seed=19)
    with pytest.raises(DimensionError):
        loss_gradient(params, np.empty((0, 2)), np.empty(0))
    with pytest.raises(DataFormatError):
        loss_gradient(params, np.ones((2, 2)), np.array([1.0, 0.0]))
