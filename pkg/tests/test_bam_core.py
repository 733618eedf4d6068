import itertools

import numpy as np
import pytest

from pbgnet.bam_core import (
    NetworkArchitecture,
    NetworkParams,
    aggregate_forward_exact,
    bam_forward,
    init_params,
    linear_neuron_aggregate,
    psi_layer,
    sign_vectors,
    tree_replication_counts,
    tree_size,
    vote_decomposition,
)
from pbgnet.errors import CapacityError, DimensionError
from pbgnet.math_core import RngStream, erf

from conftest import make_params


def test_bam_forward_sign_conventions():
    zero = NetworkParams.zeros(NetworkArchitecture((3, 2, 1)))
    assert bam_forward(zero, np.array([1.0, -2.0, 0.5])) == -1
    x = np.array([0.3, -1.2])
    assert bam_forward(NetworkParams([x[None, :]]), x) == 1


def test_bam_forward_codomain():
    rng = np.random.default_rng(0)
    params = make_params((4, 3, 1), seed=1)
    for _ in range(50):
        assert bam_forward(params, rng.normal(size=4)) in (-1, 1)


def test_linear_neuron_aggregate_examples():
    assert linear_neuron_aggregate(np.zeros(2), np.array([1.0, 0.0])) == 0.0
    value = linear_neuron_aggregate(np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    assert abs(value - 0.6826894921370859) < 1e-12
    assert linear_neuron_aggregate(np.array([1.0, 2.0]), np.zeros(2)) == 0.0
    with pytest.raises(DimensionError):
        linear_neuron_aggregate(np.zeros(2), np.zeros(3))


def test_linear_neuron_aggregate_sign():
    rng = np.random.default_rng(2)
    for _ in range(100):
        w, x = rng.normal(size=4), rng.normal(size=4)
        assert np.sign(linear_neuron_aggregate(w, x)) == np.sign(np.dot(w, x))


def test_psi_layer_examples():
    for s in sign_vectors(3):
        assert psi_layer(np.zeros(3), s) == pytest.approx(1 / 8)
    assert psi_layer(np.array([0.5]), np.array([1.0])) == pytest.approx(0.75)
    assert psi_layer(np.array([0.5]), np.array([-1.0])) == pytest.approx(0.25)


def test_psi_layer_rejects_outputs_outside_unit_interval():
    with pytest.raises(DimensionError):
        psi_layer(np.array([1.5, 0.0]), np.array([-1.0, 1.0]))
    with pytest.raises(DimensionError):
        psi_layer(np.array([np.nan]), np.array([1.0]))
    assert psi_layer(np.array([-1.0, 1.0]), np.array([-1.0, 1.0])) == 1.0


def test_psi_sums_to_one():
    rng = np.random.default_rng(3)
    for d in (1, 4, 8, 12):
        G = rng.uniform(-1, 1, size=d)
        total = sum(psi_layer(G, s) for s in sign_vectors(d))
        assert abs(total - 1.0) <= 1e-10


def test_sign_vectors_enumeration_order():
    expected = np.array([[-1, -1], [1, -1], [-1, 1], [1, 1]], dtype=float)
    assert np.array_equal(sign_vectors(2), expected)
    with pytest.raises(ValueError):
        sign_vectors(2)[0, 0] = 5.0


def test_zero_output_weights_give_zero():
    params = make_params((3, 4, 2, 1), seed=4)
    params.weights[-1][:] = 0.0
    fwd = aggregate_forward_exact(params, np.random.default_rng(5).normal(size=(6, 3)))
    assert np.all(fwd.prediction == 0.0)


def test_negating_output_layer_negates_prediction():
    params = make_params((3, 3, 1), seed=6)
    x = np.random.default_rng(7).normal(size=(5, 3))
    negated = params.copy()
    negated.weights[-1] *= -1
    assert np.allclose(aggregate_forward_exact(negated, x).prediction,
                       -aggregate_forward_exact(params, x).prediction, atol=1e-15)


def test_layer_outputs_bounded_and_psi_normalized():
    params = make_params((4, 3, 3, 1), seed=8, scale=2.0)
    fwd = aggregate_forward_exact(params, np.random.default_rng(9).normal(size=(10, 4)))
    for G in fwd.layers:
        assert np.all(np.abs(G) < 1)
    for psi in fwd.psi:
        assert np.max(np.abs(psi.sum(axis=1) - 1.0)) <= 1e-10


def test_input_scale_invariance():
    params = make_params((3, 3, 2, 1), seed=10)
    x = np.random.default_rng(11).normal(size=(4, 3))
    base = aggregate_forward_exact(params, x).prediction
    assert np.allclose(aggregate_forward_exact(params, 7.5 * x).prediction, base, atol=1e-12)


def test_single_layer_sign_matches_deterministic_network():
    params = make_params((5, 1), seed=12)
    rng = np.random.default_rng(13)
    for _ in range(30):
        x = rng.normal(size=5)
        G = aggregate_forward_exact(params, x).prediction[0]
        assert (1 if G > 0 else -1) == bam_forward(params, x)


def test_one_hidden_layer_matches_direct_formula():
    params = make_params((3, 4, 1), seed=14)
    w1, w2 = params.weights
    rng = np.random.default_rng(15)
    for _ in range(5):
        x = rng.normal(size=3)
        first = erf(w1 @ x / (np.sqrt(2) * np.linalg.norm(x)))
        direct = 0.0
        for s in itertools.product((-1.0, 1.0), repeat=4):
            s = np.array(s)
            direct += erf(w2[0] @ s / np.sqrt(2 * 4)) * np.prod(0.5 + 0.5 * s * first)
        assert abs(aggregate_forward_exact(params, x).prediction[0] - direct) <= 1e-12


def test_exact_cap_names_the_layer():
    params = NetworkParams([np.ones((3, 2)), np.ones((21, 3)), np.ones((1, 21))])
    with pytest.raises(CapacityError, match="layer 2"):
        aggregate_forward_exact(params, np.ones(2))


def test_vote_decomposition_sums_to_prediction():
    params = make_params((2, 3, 1), seed=16)
    x = np.random.default_rng(17).normal(size=(8, 2))
    signs, psi, votes = vote_decomposition(params, x)
    assert signs.shape == (8, 3)
    assert np.allclose(votes.sum(axis=1), aggregate_forward_exact(params, x).prediction, atol=1e-12)
    assert np.allclose(psi.sum(axis=1), 1.0, atol=1e-12)


def test_tree_replication_counts_examples():
    assert tree_replication_counts(NetworkArchitecture((5, 4, 1))) == [1, 1]
    assert tree_replication_counts(NetworkArchitecture((5, 4, 3, 1))) == [3, 1, 1]
    assert tree_size(NetworkArchitecture((2, 3, 3, 1))) == 30


def test_params_flat_layout_and_checks():
    arch = NetworkArchitecture((3, 2, 1))
    theta = np.arange(arch.n_params, dtype=float)
    params = NetworkParams.from_flat(arch, theta)
    assert params.weights[0].shape == (2, 3)
    assert np.array_equal(params.flat(), theta)
    with pytest.raises(DimensionError):
        params.check_architecture(NetworkArchitecture((3, 3, 1)))
    with pytest.raises(DimensionError):
        NetworkParams([np.ones((2, 3)), np.ones((2, 2))])


def test_init_params_scale():
    arch = NetworkArchitecture((400, 300, 1))
    params = init_params(arch, RngStream(0))
    assert abs(params.weights[0].std() - 1 / np.sqrt(400)) < 0.002
