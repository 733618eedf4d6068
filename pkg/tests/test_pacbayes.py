import math

import numpy as np
import pytest

from pbgnet.bam_core import NetworkArchitecture
from pbgnet.errors import NumericError
from pbgnet.oracle import finite_difference_scalar
from pbgnet.pacbayes import (
    BoundInputs,
    BoundReport,
    assemble_bound_report,
    catoni_bound,
    catoni_bound_and_grads,
    catoni_delta,
    catoni_infimum,
    compute_xi,
    kl_bernoulli,
    kl_inverse,
    kl_network_divergence,
    kl_network_gradient,
    optimal_catoni_C,
)

from conftest import make_params


def test_kl_bernoulli_examples():
    assert kl_bernoulli(0.3, 0.3) == 0.0
    assert kl_bernoulli(0.0, 0.4) == pytest.approx(-math.log(0.6), abs=1e-15)
    expected = 0.1 * math.log(0.2) + 0.9 * math.log(1.8)
    assert kl_bernoulli(0.1, 0.5) == pytest.approx(expected, abs=1e-15)
    assert abs(expected - 0.3680) < 1e-4
    assert math.isinf(kl_bernoulli(0.2, 1.0))


def test_kl_inverse_closed_forms():
    assert kl_inverse(0.23, 0.0) == 0.23
    assert kl_inverse(0.0, 0.3) == pytest.approx(1 - math.exp(-0.3), abs=1e-15)
    assert kl_inverse(1.0, 0.3) == 1.0


def test_kl_inverse_solves_the_constraint():
    p = kl_inverse(0.05, 0.1)
    assert p > 0.05
    assert kl_bernoulli(0.05, p) == pytest.approx(0.1, abs=1e-9)
    assert abs(p - catoni_infimum(0.05, 0.1)[0]) <= 1e-6


def test_kl_inverse_equals_catoni_infimum():
    rng = np.random.default_rng(0)
    for q, xi in zip(rng.uniform(0, 0.99, 200), rng.uniform(1e-4, 5, 200)):
        assert abs(kl_inverse(q, xi) - catoni_infimum(q, xi)[0]) <= 1e-6


def test_kl_inverse_monotone():
    qs = np.linspace(0, 0.9, 10)
    xis = np.linspace(0.01, 2, 10)
    table = np.array([[kl_inverse(q, xi) for xi in xis] for q in qs])
    assert np.all(np.diff(table, axis=0) >= -1e-12)
    assert np.all(np.diff(table, axis=1) >= -1e-12)


def test_catoni_bound_example():
    expected = (1 - math.exp(-0.3)) / (1 - math.exp(-1))
    assert catoni_bound(0.1, 0.2, 1.0) == pytest.approx(expected, abs=1e-15)
    assert abs(expected - 0.4100) < 1e-4
    with pytest.raises(ValueError):
        catoni_bound(0.1, 0.2, 0.0)


def test_catoni_bound_tends_to_q_at_optimal_C():
    q, xi = 0.1, 1e-12
    C = optimal_catoni_C(q, kl_inverse(q, xi))
    assert abs(catoni_bound(q, xi, C) - q) <= 1e-6


def test_catoni_bound_dominates_empirical_loss():
    rng = np.random.default_rng(1)
    for q, xi, C in zip(rng.uniform(0, 1, 100), rng.uniform(0, 3, 100), rng.uniform(0.01, 20, 100)):
        assert catoni_bound(q, xi, C) >= q - 1e-12


def test_catoni_gradients_match_finite_differences():
    q, xi, C = 0.2, 0.15, 2.5
    _, d_q, d_xi, d_C = catoni_bound_and_grads(q, xi, C)
    assert d_q == pytest.approx(finite_difference_scalar(lambda v: catoni_bound(v, xi, C), q), rel=1e-6)
    assert d_xi == pytest.approx(finite_difference_scalar(lambda v: catoni_bound(q, v, C), xi), rel=1e-6)
    assert d_C == pytest.approx(finite_difference_scalar(lambda v: catoni_bound(q, xi, v), C), rel=1e-6)


def test_optimal_catoni_C_example():
    C = optimal_catoni_C(0.2, 0.5)
    assert C == pytest.approx(math.log(4.0), abs=1e-15)
    assert abs(catoni_delta(C, 0.2, 0.5) - kl_bernoulli(0.2, 0.5)) <= 1e-9
    for other in np.random.default_rng(2).uniform(1e-3, 20, 100):
        assert catoni_delta(C, 0.2, 0.5) >= catoni_delta(other, 0.2, 0.5)


def test_optimal_catoni_C_recovers_kl():
    rng = np.random.default_rng(3)
    for _ in range(100):
        q = rng.uniform(0.01, 0.9)
        p = rng.uniform(q + 1e-3, 0.99)
        assert abs(catoni_delta(optimal_catoni_C(q, p), q, p) - kl_bernoulli(q, p)) <= 1e-9


def test_optimal_catoni_C_limits_and_errors():
    assert optimal_catoni_C(0.5 - 1e-9, 0.5) < 1e-6
    assert math.isinf(optimal_catoni_C(0.0, 0.3))
    with pytest.raises(ValueError):
        optimal_catoni_C(0.5, 0.4)


def test_kl_network_divergence_one_hidden_layer():
    theta, mu = make_params((3, 4, 1), seed=4), make_params((3, 4, 1), seed=5)
    arch = theta.architecture
    assert kl_network_divergence(theta, theta, arch) == 0.0
    direct = 0.5 * np.sum((theta.flat() - mu.flat()) ** 2)
    assert kl_network_divergence(theta, mu, arch) == pytest.approx(direct, rel=1e-12)


def test_kl_network_divergence_counts_replication():
    theta, mu = make_params((2, 2, 3, 1), seed=6), make_params((2, 2, 3, 1), seed=7)
    arch = theta.architecture
    w1, w2, w3 = (t - m for t, m in zip(theta.weights, mu.weights))
    direct = 0.5 * (3 * np.sum(w1 ** 2) + np.sum(w2 ** 2) + np.sum(w3 ** 2))
    value = kl_network_divergence(theta, mu, arch)
    assert value == pytest.approx(direct, rel=1e-12)
    assert value >= 0.5 * np.sum((theta.flat() - mu.flat()) ** 2)
    grads = kl_network_gradient(theta, mu, arch)
    assert np.allclose(grads[0], 3 * w1)
    assert np.allclose(grads[2], w3)


def test_compute_xi_formula():
    xi = compute_xi(10.0, 400, 0.05, 9)
    assert xi == pytest.approx((10.0 + math.log(2 * 20 / (0.05 / 9))) / 400, rel=1e-15)


def test_report_at_zero_loss_and_zero_kl():
    n, delta = 10 ** 4, 0.05
    report = assemble_bound_report(BoundInputs(0.0, 0.0, n, delta, 1))
    closed_form = 1 - (delta / (2 * math.sqrt(n))) ** (1 / n)
    assert report.seeger_bound == pytest.approx(closed_form, abs=1e-12)
    assert report.seeger_bound == pytest.approx(report.xi, rel=1e-3)
    assert math.isinf(report.catoni_C)
    assert report.zero_one_bound == pytest.approx(2 * report.seeger_bound)
    assert report.to_dict()["catoni_C"] is None
    assert math.isinf(BoundReport.from_dict(report.to_dict()).catoni_C)


def test_report_in_the_mnist17_regime():
    report = assemble_bound_report(BoundInputs(0.005, 164.0, 11377, 0.05, 9))
    assert 0.02 < report.seeger_bound < 0.05
    assert kl_bernoulli(0.005, report.seeger_bound) == pytest.approx(report.xi, abs=1e-9)
    assert report.catoni_bound == pytest.approx(report.seeger_bound, abs=1e-6)
    assert set(["q", "kl", "n", "delta", "multiplicity", "xi", "seeger_bound", "catoni_bound", "catoni_C",
                "zero_one_bound"]) <= set(report.to_dict())


def test_union_bound_multiplicity_increases_bound():
    single = assemble_bound_report(BoundInputs(0.1, 20.0, 1000, 0.05, 1))
    grid = assemble_bound_report(BoundInputs(0.1, 20.0, 1000, 0.05, 9))
    assert grid.seeger_bound > single.seeger_bound
    assert grid.xi - single.xi == pytest.approx(math.log(9) / 1000, rel=1e-9)


def test_bound_inputs_validation():
    with pytest.raises(ValueError):
        BoundInputs(1.5, 0.0, 10, 0.05)
    with pytest.raises(ValueError):
        BoundInputs(0.1, 0.0, 10, 1.0)
    with pytest.raises(NumericError):
        BoundInputs(0.1, math.inf, 10, 0.05)
    assert BoundInputs(0.1, 0.0, 10, 0.05, 5).delta_prime == pytest.approx(0.01)
