"""
BAM Core Module

This module provides the network architecture and parameter types, the
deterministic forward pass of a binary activated multilayer (BAM) network,
and the exact aggregate predictor obtained by averaging the network over an
isotropic Gaussian posterior on its weights (computed layer by layer through
the BAM-to-tree parameter map).
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from .errors import CapacityError, DimensionError, ModeError
from .math_core import RngStream, as_matrix, check_finite, erf

logger = logging.getLogger(__name__)

DEFAULT_EXACT_CAP = 20
SQRT2 = np.sqrt(2.0)

# Upper bound on the number of float64 entries materialized per chunk of
# examples in the exact combinatorial sums.
CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class NetworkArchitecture:
    """
    Layer widths [d0, d1, ..., dL] of a BAM network with a single output.

    d0 is the input dimension; d1..d_{L-1} are hidden widths; dL = 1.
    """
    widths: Tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 2:
            raise DimensionError(f"An architecture needs at least one layer, got widths {widths}")
        if any(w < 1 for w in widths):
            raise DimensionError(f"All widths must be at least 1, got {widths}")
        if widths[-1] != 1:
            raise DimensionError(f"The output layer must have width 1, got {widths[-1]}")

    @classmethod
    def from_layers(cls, input_dim: int, hidden_layers: int, width: int) -> "NetworkArchitecture":
        """Architecture with `hidden_layers` hidden layers of equal `width`."""
        return cls((input_dim,) + (width,) * hidden_layers + (1,))

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def hidden_widths(self) -> Tuple[int, ...]:
        return self.widths[1:-1]

    @property
    def layer_shapes(self) -> List[Tuple[int, int]]:
        return [(self.widths[k], self.widths[k - 1]) for k in range(1, len(self.widths))]

    @property
    def n_params(self) -> int:
        """D, the number of weights."""
        return sum(rows * cols for rows, cols in self.layer_shapes)

    @property
    def replication_factors(self) -> List[int]:
        """[d†_1, ..., d†_L] with d†_k the product of widths d_k..d_L."""
        return [int(np.prod(self.widths[k:])) for k in range(1, len(self.widths))]

    def exact_feasible(self, exact_cap: int = DEFAULT_EXACT_CAP) -> bool:
        return all(w <= exact_cap for w in self.hidden_widths)

    def check_exact(self, exact_cap: int = DEFAULT_EXACT_CAP) -> None:
        """Raise CapacityError naming the first hidden layer wider than exact_cap."""
        for k, width in enumerate(self.hidden_widths, start=1):
            if width > exact_cap:
                raise CapacityError(
                    f"Hidden layer {k} has width {width}, above the exact-mode cap of {exact_cap} "
                    f"(2^{width} sign vectors); use sampled mode or raise the cap"
                )


@dataclass
class NetworkParams:
    """
    Weight matrices W_1..W_L of a BAM network (posterior mean or prior).

    W_k has shape (d_k, d_{k-1}); W_L has a single row.
    """
    weights: List[np.ndarray]

    def __post_init__(self):
        if not self.weights:
            raise DimensionError("NetworkParams needs at least one weight matrix")
        self.weights = [as_matrix(w, what=f"W{k}") for k, w in enumerate(self.weights, start=1)]
        for k in range(1, len(self.weights)):
            if self.weights[k].shape[1] != self.weights[k - 1].shape[0]:
                raise DimensionError(
                    f"W{k + 1} expects {self.weights[k].shape[1]} inputs but W{k} has "
                    f"{self.weights[k - 1].shape[0]} rows"
                )
        if self.weights[-1].shape[0] != 1:
            raise DimensionError(f"The output layer must have one row, got {self.weights[-1].shape[0]}")

    @property
    def architecture(self) -> NetworkArchitecture:
        widths = (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)
        return NetworkArchitecture(widths)

    @classmethod
    def zeros(cls, arch: NetworkArchitecture) -> "NetworkParams":
        return cls([np.zeros(shape) for shape in arch.layer_shapes])

    @classmethod
    def from_flat(cls, arch: NetworkArchitecture, theta: np.ndarray) -> "NetworkParams":
        """Rebuild matrices from vec(θ) (row-major, layer by layer)."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (arch.n_params,):
            raise DimensionError(f"theta has shape {theta.shape}, expected ({arch.n_params},)")
        weights, offset = [], 0
        for rows, cols in arch.layer_shapes:
            weights.append(theta[offset:offset + rows * cols].reshape(rows, cols))
            offset += rows * cols
        return cls(weights)

    def flat(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights])

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights])

    def sq_norm(self) -> float:
        return float(sum(np.sum(np.square(w)) for w in self.weights))

    def check_architecture(self, arch: NetworkArchitecture) -> None:
        if self.architecture != arch:
            raise DimensionError(
                f"Parameters have widths {self.architecture.widths}, expected {arch.widths}"
            )

    def check_finite(self) -> None:
        for k, w in enumerate(self.weights, start=1):
            check_finite(w, f"W{k}")


@dataclass
class AggregateForward:
    """
    Cached forward pass of the aggregate predictor over a batch of inputs.

    `layers[k-1]` holds G^(j) for layer k, shape (n, d_k). `first_args` holds
    the layer-1 erf arguments w·x/(√2‖x‖). In exact mode `psi[k-1]` holds Ψ^k
    over all 2^{d_k} sign vectors and `erf_args[k-1]` the per-sign-vector
    arguments of layer k+1; in sampled mode `samples[k-1]` holds the drawn
    sign vectors and `erf_args[k-1]` their per-draw arguments.
    """
    mode: str
    inputs: np.ndarray
    unit_inputs: np.ndarray
    first_args: np.ndarray
    layers: List[np.ndarray]
    psi: List[np.ndarray] = field(default_factory=list)
    erf_args: List[np.ndarray] = field(default_factory=list)
    # gradients.SampledHidden instances, one per sampled layer
    samples: List[Any] = field(default_factory=list)
    sample_size: Optional[int] = None
    output_variance: Optional[np.ndarray] = None

    @property
    def prediction(self) -> np.ndarray:
        """G_θ(x) for every row of the batch, shape (n,)."""
        return self.layers[-1][:, 0]

    def require_mode(self, mode: str) -> None:
        if self.mode != mode:
            raise ModeError(f"Expected a {mode} forward pass, got {self.mode}")


@lru_cache(maxsize=None)
def _sign_table(d: int) -> np.ndarray:
    codes = np.arange(1 << d, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(d, dtype=np.int64)[None, :]) & 1
    table = np.where(bits == 1, 1.0, -1.0)
    table.setflags(write=False)
    return table


def sign_vectors(d: int) -> np.ndarray:
    """
    Enumerate {-1, +1}^d in binary counting order.

    Row r has s_i = +1 iff bit i of r is set (bit 0 is s_1). The returned
    array is cached and read-only.

    Args:
        d: Dimension of the sign vectors

    Returns:
        Array of shape (2^d, d)
    """
    if d < 1:
        raise DimensionError(f"d must be at least 1, got {d}")
    return _sign_table(int(d))


def as_sign_vector(values: Sequence[float]) -> np.ndarray:
    s = np.asarray(values, dtype=np.float64)
    if s.ndim != 1 or not np.all(np.abs(s) == 1.0):
        raise DimensionError(f"A sign vector must hold only -1 and +1 entries, got {values}")
    return s


def init_params(arch: NetworkArchitecture, rng: RngStream) -> NetworkParams:
    """
    Gaussian initialization with standard deviation 1/sqrt(fan-in).

    Args:
        arch: Network architecture
        rng: Stream dedicated to initialization

    Returns:
        Freshly drawn parameters
    """
    return NetworkParams([rng.normal(shape) / np.sqrt(shape[1]) for shape in arch.layer_shapes])


def _sgn(values: np.ndarray) -> np.ndarray:
    # sgn(0) = -1
    return np.where(values > 0, 1.0, -1.0)


def bam_forward(params: NetworkParams, x: np.ndarray) -> int:
    """
    Output of the deterministic BAM network sgn(w_L · sgn(... sgn(W_1 x))).

    Args:
        params: Network weights
        x: Input vector of dimension d0

    Returns:
        -1 or +1
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.architecture.input_dim,):
        raise DimensionError(f"x has shape {x.shape}, expected ({params.architecture.input_dim},)")
    activation = x
    for w in params.weights:
        activation = _sgn(w @ activation)
    return int(activation[0])


def _unit_rows(inputs: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(inputs, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, inputs / safe, 0.0)


def linear_neuron_aggregate(w: np.ndarray, x: np.ndarray) -> float:
    """
    Gaussian-averaged sign neuron: erf(w·x / (√2‖x‖)).

    An all-zero input yields 0.

    Args:
        w: Weight vector
        x: Input vector of the same dimension

    Returns:
        Aggregate output in (-1, 1)
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.shape != x.shape or w.ndim != 1:
        raise DimensionError(f"w has shape {w.shape} but x has shape {x.shape}")
    norm = np.linalg.norm(x)
    if norm == 0.0:
        return 0.0
    return float(erf(np.dot(w, x) / (SQRT2 * norm)))


def psi_layer(prev_G: np.ndarray, s: np.ndarray) -> float:
    """
    Probability Ψ_s = Π_i (½ + ½ s_i G^(i)) that a layer emits sign vector s.

    Args:
        prev_G: Aggregate outputs of the layer, entries in [-1, 1]
        s: Sign vector of the same length

    Returns:
        Probability in [0, 1]
    """
    prev_G = np.asarray(prev_G, dtype=np.float64)
    s = as_sign_vector(s)
    if prev_G.shape != s.shape:
        raise DimensionError(f"prev_G has shape {prev_G.shape} but s has shape {s.shape}")
    if not np.all(np.abs(prev_G) <= 1.0):
        raise DimensionError(f"prev_G entries must lie in [-1, 1], got {prev_G}")
    return float(np.prod(0.5 + 0.5 * s * prev_G))


def psi_factors(G: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """ψ factors ½ + ½ s_i G^(i), shape (n, m, d) for G (n, d) and signs (m, d)."""
    return 0.5 + 0.5 * signs[None, :, :] * G[:, None, :]


def _as_batch(x: np.ndarray, input_dim: int) -> np.ndarray:
    inputs = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if inputs.ndim != 2 or inputs.shape[1] != input_dim:
        raise DimensionError(f"Inputs have shape {np.shape(x)}, expected rows of dimension {input_dim}")
    check_finite(inputs, "inputs")
    return inputs


def _chunk_rows(n_terms: int, width: int) -> int:
    return max(1, CHUNK_ELEMENTS // max(1, n_terms * width))


def _exact_layer(G: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    One exact layer: G' = Σ_s erf(w·s/√(2d)) Ψ_s over all 2^d sign vectors.

    The sum over s runs along the contiguous last axis so numpy applies
    pairwise summation.
    """
    d = G.shape[1]
    signs = sign_vectors(d)
    args = signs @ w.T / np.sqrt(2.0 * d)
    votes_t = np.ascontiguousarray(erf(args).T)
    n, m = G.shape[0], signs.shape[0]
    psi = np.empty((n, m))
    out = np.empty((n, w.shape[0]))
    step = _chunk_rows(m, max(d, w.shape[0]))
    for start in range(0, n, step):
        rows = slice(start, start + step)
        psi[rows] = np.prod(psi_factors(G[rows], signs), axis=-1)
        out[rows] = np.sum(psi[rows][:, None, :] * votes_t[None, :, :], axis=-1)
    return out, psi, args


def first_layer(params: NetworkParams, inputs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Layer 1 in closed form; returns (unit inputs, erf arguments, G^(1))."""
    unit = _unit_rows(inputs)
    args = unit @ params.weights[0].T / SQRT2
    return unit, args, erf(args)


def aggregate_forward_exact(params: NetworkParams, x: np.ndarray,
                            exact_cap: int = DEFAULT_EXACT_CAP) -> AggregateForward:
    """
    Exact aggregate predictor G_θ over a batch (or a single input).

    Layer 1 uses the closed form erf(w_1^j·x/(√2‖x‖)); each deeper layer sums
    erf(w_{k+1}^j·s/√(2 d_k)) Ψ^k_s over every sign vector s. For two layers
    this is the one-hidden-layer predictor F_θ.

    Args:
        params: Network weights
        x: Input of shape (d0,) or batch of shape (n, d0)
        exact_cap: Largest hidden width allowed

    Returns:
        AggregateForward in exact mode
    """
    arch = params.architecture
    arch.check_exact(exact_cap)
    inputs = _as_batch(x, arch.input_dim)
    unit, args, G = first_layer(params, inputs)
    fwd = AggregateForward(mode="exact", inputs=inputs, unit_inputs=unit, first_args=args, layers=[G])
    for w in params.weights[1:]:
        G, psi, layer_args = _exact_layer(G, w)
        fwd.layers.append(G)
        fwd.psi.append(psi)
        fwd.erf_args.append(layer_args)
    return fwd


def vote_decomposition(params: NetworkParams, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Majority-vote view of a one-hidden-layer predictor.

    F_θ(x) = Σ_s Ψ_s(x) F_{w_2}(s): returns the sign vectors, the weights
    Ψ_s(x) and the weighted votes Ψ_s(x)·erf(w_2·s/√(2 d_1)) per input row.

    Args:
        params: Two-layer network weights
        x: Input batch of shape (n, d0)

    Returns:
        (signs (m, d1), psi (n, m), votes (n, m))
    """
    if params.architecture.n_layers != 2:
        raise DimensionError(
            f"The vote decomposition needs exactly one hidden layer, got {params.architecture.n_layers - 1}"
        )
    fwd = aggregate_forward_exact(params, x)
    signs = sign_vectors(params.architecture.widths[1])
    votes = fwd.psi[0] * erf(fwd.erf_args[0][:, 0])[None, :]
    return signs, fwd.psi[0], votes


def tree_replication_counts(arch: NetworkArchitecture) -> List[int]:
    """
    Replication multiplicity of each layer's weights under the tree map.

    Layer k weights appear d†_{k+1} = Π_{i>k} d_i times; the output layer once.

    Args:
        arch: Network architecture

    Returns:
        [d†_2, ..., d†_L, 1]
    """
    return arch.replication_factors[1:] + [1]


def tree_size(arch: NetworkArchitecture) -> int:
    """D†, the number of weights of the decoupled computation tree."""
    counts = tree_replication_counts(arch)
    return sum(count * rows * cols for count, (rows, cols) in zip(counts, arch.layer_shapes))
