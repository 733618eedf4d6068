"""
Oracle Module

This module provides slow, independent reference computations used by the
test suite and acceptance runs: Gaussian weight-perturbation simulators for
the BAM network and for its decoupled tree, an explicit construction of the
tree map, the closed-form aggregate of a two-hidden-layer network without
the tree decoupling, and central finite-difference gradients.

None of these functions call the aggregate or gradient code they check.
"""

import itertools
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np
from scipy import special

from .bam_core import NetworkParams
from .errors import CapacityError, DimensionError
from .gradients import LayerGradients
from .math_core import RngStream

MIN_DRAWS = 100
DRAW_CHUNK = 20000
MAX_TREE_WEIGHTS = 10000
MAX_NONTREE_WIDTH = 10


@dataclass
class OracleEstimate:
    """Monte Carlo mean with its standard error."""
    mean: float
    std_error: float
    draws: int

    def __post_init__(self):
        if self.draws < 2:
            raise DimensionError(f"An estimate needs at least 2 draws, got {self.draws}")

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "OracleEstimate":
        samples = np.asarray(samples, dtype=np.float64).ravel()
        draws = samples.shape[0]
        if draws < 2:
            raise DimensionError(f"An estimate needs at least 2 draws, got {draws}")
        return cls(float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(draws)), draws)

    def contains(self, value: float, k: float = 3.0, floor: float = 1e-12) -> bool:
        """True when value lies within k standard errors (plus a tiny floor)."""
        return abs(value - self.mean) <= k * self.std_error + floor


def _sign(values: np.ndarray) -> np.ndarray:
    return np.where(values > 0, 1.0, -1.0)


def _check_draws(draws: int) -> None:
    if draws < MIN_DRAWS:
        raise DimensionError(f"Oracles need at least {MIN_DRAWS} draws, got {draws}")


def mc_bam_aggregate(theta: NetworkParams, x: np.ndarray, draws: int, rng: RngStream) -> OracleEstimate:
    """
    Average the BAM network output over weights drawn from N(θ, I).

    Every weight, including the ones shared by several downstream neurons,
    is perturbed once per draw.

    Args:
        theta: Posterior mean
        x: Single input vector
        draws: Number of perturbed networks (>= 100)
        rng: Stream to draw from

    Returns:
        OracleEstimate of the network's expected output
    """
    _check_draws(draws)
    x = np.asarray(x, dtype=np.float64)
    outputs = np.empty(draws)
    for start in range(0, draws, DRAW_CHUNK):
        count = min(DRAW_CHUNK, draws - start)
        activation = np.broadcast_to(x, (count, x.shape[0]))
        for w in theta.weights:
            noisy = w[None, :, :] + rng.normal((count,) + w.shape)
            activation = _sign(np.einsum("cij,cj->ci", noisy, activation))
        outputs[start:start + count] = activation[:, 0]
    return OracleEstimate.from_samples(outputs)


@dataclass
class TreeNode:
    """One neuron of the decoupled computation tree with its own weight copy."""
    layer: int
    neuron: int
    weights: np.ndarray
    children: List["TreeNode"] = field(default_factory=list)


def build_tree(theta: NetworkParams) -> TreeNode:
    """
    Explicitly build the tree map of a BAM network.

    Each neuron of layer k is expanded into one subtree per parent that
    reads it, so a layer-k weight row appears once per path to the output.

    Returns:
        Root node (the output neuron)
    """
    def expand(layer: int, neuron: int) -> TreeNode:
        node = TreeNode(layer, neuron, theta.weights[layer - 1][neuron].copy())
        if layer > 1:
            node.children = [expand(layer - 1, i) for i in range(theta.weights[layer - 2].shape[0])]
        return node

    return expand(len(theta.weights), 0)


def iter_tree(root: TreeNode):
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(node.children)


def tree_edge_count(theta: NetworkParams) -> int:
    """D†: total number of weights in the explicit tree."""
    return sum(node.weights.shape[0] for node in iter_tree(build_tree(theta)))


def tree_kl(theta: NetworkParams, mu: NetworkParams) -> float:
    """½‖η − η_μ‖² over explicitly replicated tree weights."""
    total = 0.0
    for node, prior_node in zip(iter_tree(build_tree(theta)), iter_tree(build_tree(mu))):
        total += float(np.sum((node.weights - prior_node.weights) ** 2))
    return 0.5 * total


def _tree_output(node: TreeNode, x: np.ndarray, count: int, rng: RngStream) -> np.ndarray:
    noisy = node.weights[None, :] + rng.normal((count, node.weights.shape[0]))
    if not node.children:
        inputs = np.broadcast_to(x, noisy.shape)
    else:
        inputs = np.stack([_tree_output(child, x, count, rng) for child in node.children], axis=1)
    return _sign(np.sum(noisy * inputs, axis=1))


def mc_tree_aggregate(theta: NetworkParams, x: np.ndarray, draws: int, rng: RngStream) -> OracleEstimate:
    """
    Average the decoupled tree network over independently perturbed copies.

    Every replicated tree weight gets its own Gaussian noise, which is the
    quantity the layer-by-layer aggregate computes in closed form.

    Args:
        theta: Posterior mean
        x: Single input vector
        draws: Number of perturbed trees (>= 100)
        rng: Stream to draw from

    Returns:
        OracleEstimate of the tree's expected output
    """
    _check_draws(draws)
    root = build_tree(theta)
    size = sum(node.weights.shape[0] for node in iter_tree(root))
    if size > MAX_TREE_WEIGHTS:
        raise CapacityError(f"The explicit tree has {size} weights, above the oracle limit of {MAX_TREE_WEIGHTS}")
    x = np.asarray(x, dtype=np.float64)
    outputs = np.empty(draws)
    for start in range(0, draws, DRAW_CHUNK):
        count = min(DRAW_CHUNK, draws - start)
        outputs[start:start + count] = _tree_output(root, x, count, rng)
    return OracleEstimate.from_samples(outputs)


def nontree_two_layer_aggregate(theta: NetworkParams, x: np.ndarray) -> float:
    """
    Exact expected output of a two-hidden-layer BAM network without decoupling.

    Sums over every joint configuration (s, t) of both hidden layers:
    Σ_t erf(w3·t/√(2 d2)) Σ_s Ψ_s(x) Π_j (½ + ½ t_j erf(w2^j·s/√(2 d1))).

    Args:
        theta: Weights of widths (d0, d1, d2, 1), d1 and d2 at most 10
        x: Single input vector

    Returns:
        The aggregate value
    """
    if len(theta.weights) != 3:
        raise DimensionError(f"Expected two hidden layers, got {len(theta.weights) - 1}")
    w1, w2, w3 = theta.weights
    d1, d2 = w1.shape[0], w2.shape[0]
    if max(d1, d2) > MAX_NONTREE_WIDTH:
        raise CapacityError(f"Hidden widths ({d1}, {d2}) exceed the oracle limit of {MAX_NONTREE_WIDTH}")
    x = np.asarray(x, dtype=np.float64)
    norm = np.sqrt(np.sum(x * x))
    first = special.erf(w1 @ x / (np.sqrt(2.0) * norm)) if norm > 0 else np.zeros(d1)
    total = 0.0
    for t in itertools.product((-1.0, 1.0), repeat=d2):
        t = np.array(t)
        vote = special.erf(np.dot(w3[0], t) / np.sqrt(2.0 * d2))
        mass = 0.0
        for s in itertools.product((-1.0, 1.0), repeat=d1):
            s = np.array(s)
            psi_s = np.prod(0.5 + 0.5 * s * first)
            psi_t = np.prod(0.5 + 0.5 * t * special.erf(w2 @ s / np.sqrt(2.0 * d1)))
            mass += psi_s * psi_t
        total += vote * mass
    return float(total)


def finite_difference_grad(f: Callable[[NetworkParams], float], theta: NetworkParams,
                           h: float = 1e-4) -> LayerGradients:
    """
    Central finite differences of a scalar function of the weights.

    Args:
        f: Scalar function of NetworkParams
        theta: Point of evaluation (left unchanged)
        h: Step size (> 0)

    Returns:
        LayerGradients with one entry per weight
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    probe = theta.copy()
    grads = []
    for w in probe.weights:
        g = np.zeros_like(w)
        for index in np.ndindex(w.shape):
            original = w[index]
            w[index] = original + h
            upper = f(probe)
            w[index] = original - h
            lower = f(probe)
            w[index] = original
            g[index] = (upper - lower) / (2.0 * h)
        grads.append(g)
    return LayerGradients(grads)


def finite_difference_scalar(f: Callable[[float], float], value: float, h: float = 1e-5) -> float:
    """Central difference of a scalar function of one real."""
    return (f(value + h) - f(value - h)) / (2.0 * h)
