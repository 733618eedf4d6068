"""
Gradients Module

This module provides the analytic derivatives of the aggregate predictor
(exact combinatorial mode), the Monte Carlo forward pass that replaces each
combinatorial sum by T sampled sign vectors, its score-function (REINFORCE
style) backward pass, and the chain-ruled gradient of the linear loss.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .bam_core import (
    DEFAULT_EXACT_CAP,
    SQRT2,
    AggregateForward,
    NetworkParams,
    _as_batch,
    _chunk_rows,
    aggregate_forward_exact,
    first_layer,
    psi_factors,
    sign_vectors,
)
from .errors import DataFormatError, DimensionError
from .math_core import RngStream, check_finite, erf, erf_prime

logger = logging.getLogger(__name__)

# Lower bound applied to ψ in the score-function denominator only.
PSI_CLAMP = 1e-6

EXACT = "exact"
SAMPLED = "sampled"


@dataclass
class LayerGradients:
    """Per-layer derivatives, same shapes as NetworkParams.weights."""
    weights: List[np.ndarray]
    clamped: int = 0

    @classmethod
    def zeros_like(cls, params: NetworkParams) -> "LayerGradients":
        return cls([np.zeros_like(w) for w in params.weights])

    def flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.weights])

    def scaled(self, factor: float) -> "LayerGradients":
        return LayerGradients([g * factor for g in self.weights], self.clamped)

    def check_finite(self) -> None:
        for k, g in enumerate(self.weights, start=1):
            check_finite(g, f"gradient of W{k}")


@dataclass
class SampledHidden:
    """
    T sign vectors drawn per input row for one hidden layer.

    signs[n, t, i] = sgn(psi_plus[n, i] - uniforms[n, t, i]). `psi_drawn`
    is ψ of the drawn sign; `psi_clamped` is the same floored at PSI_CLAMP
    and is used only as a denominator.
    """
    signs: np.ndarray
    uniforms: np.ndarray
    psi_plus: np.ndarray
    psi_drawn: np.ndarray
    psi_clamped: np.ndarray
    n_clamped: int

    @property
    def sample_size(self) -> int:
        return self.signs.shape[1]


def _score_terms(signs: np.ndarray, G: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
    psi_drawn = 0.5 + 0.5 * signs * G[:, None, :]
    psi_clamped = np.maximum(psi_drawn, PSI_CLAMP)
    n_clamped = int(np.count_nonzero(psi_drawn < PSI_CLAMP))
    return psi_drawn, psi_clamped, n_clamped


def sample_hidden(prev_G: np.ndarray, T: int, rng: RngStream) -> SampledHidden:
    """
    Draw T sign vectors per row with Pr(s_i = +1) = ½ + ½ G^(i).

    Args:
        prev_G: Layer outputs, shape (d,) or (n, d)
        T: Number of draws per row (>= 1)
        rng: Stream to advance

    Returns:
        SampledHidden with leading batch dimension
    """
    if T < 1:
        raise DimensionError(f"T must be at least 1, got {T}")
    G = np.atleast_2d(np.asarray(prev_G, dtype=np.float64))
    psi_plus = 0.5 + 0.5 * G
    uniforms = rng.uniform((G.shape[0], T, G.shape[1]))
    signs = np.where(psi_plus[:, None, :] - uniforms > 0, 1.0, -1.0)
    psi_drawn, psi_clamped, n_clamped = _score_terms(signs, G)
    return SampledHidden(signs, uniforms, psi_plus, psi_drawn, psi_clamped, n_clamped)


def _refreeze(hidden: SampledHidden, G: np.ndarray) -> SampledHidden:
    # Reuse drawn signs, recompute ψ at the current layer outputs.
    psi_drawn, psi_clamped, n_clamped = _score_terms(hidden.signs, G)
    return SampledHidden(hidden.signs, hidden.uniforms, 0.5 + 0.5 * G, psi_drawn, psi_clamped, n_clamped)


def aggregate_forward_sampled(params: NetworkParams, x: np.ndarray, T: int, rng: RngStream,
                              frozen: Optional[List[SampledHidden]] = None) -> AggregateForward:
    """
    Monte Carlo approximation of the aggregate predictor.

    Layer 1 is computed in closed form. Each deeper layer averages
    erf(w^j·s^t/√(2 d_k)) over T sign vectors drawn from the previous
    layer's (approximated) outputs.

    Args:
        params: Network weights
        x: Input of shape (d0,) or batch (n, d0)
        T: Sample size per layer
        rng: Stream to draw from
        frozen: Previously drawn samples to reuse instead of drawing

    Returns:
        AggregateForward in sampled mode, with the output variance estimate
    """
    if T < 1:
        raise DimensionError(f"T must be at least 1, got {T}")
    arch = params.architecture
    inputs = _as_batch(x, arch.input_dim)
    unit, args, G = first_layer(params, inputs)
    fwd = AggregateForward(mode=SAMPLED, inputs=inputs, unit_inputs=unit, first_args=args,
                           layers=[G], sample_size=T)
    votes = None
    for k, w in enumerate(params.weights[1:]):
        if frozen is None:
            hidden = sample_hidden(G, T, rng)
        else:
            hidden = _refreeze(frozen[k], G)
        layer_args = hidden.signs @ w.T / np.sqrt(2.0 * G.shape[1])
        votes = erf(layer_args)
        G = votes.mean(axis=1)
        fwd.layers.append(G)
        fwd.samples.append(hidden)
        fwd.erf_args.append(layer_args)
        if hidden.n_clamped:
            logger.debug("Layer %d: %d sampled psi values below clamp", k + 1, hidden.n_clamped)
    if votes is None:
        fwd.output_variance = np.zeros(inputs.shape[0])
    elif votes.shape[1] > 1:
        fwd.output_variance = votes[:, :, 0].var(axis=1, ddof=1) / votes.shape[1]
    else:
        fwd.output_variance = np.full(inputs.shape[0], np.nan)
    return fwd


def _upstream(fwd: AggregateForward, upstream: Optional[np.ndarray]) -> np.ndarray:
    n = fwd.inputs.shape[0]
    if upstream is None:
        return np.ones((n, 1))
    upstream = np.asarray(upstream, dtype=np.float64).reshape(-1)
    if upstream.shape != (n,):
        raise DimensionError(f"upstream has {upstream.shape[0]} entries for a batch of {n}")
    return upstream[:, None]


def _check_inputs(x: Optional[np.ndarray], fwd: AggregateForward) -> None:
    if x is not None and not np.array_equal(np.atleast_2d(np.asarray(x, dtype=np.float64)), fwd.inputs):
        raise DimensionError("The forward pass was computed for different inputs")


def _reduced_products(factors: np.ndarray) -> np.ndarray:
    """Π_{i≠l} factors[..., i] for every l, without dividing."""
    ones = np.ones(factors.shape[:-1] + (1,))
    prefix = np.concatenate([ones, np.cumprod(factors[..., :-1], axis=-1)], axis=-1)
    suffix = np.concatenate([np.cumprod(factors[..., :0:-1], axis=-1)[..., ::-1], ones], axis=-1)
    return prefix * suffix


def _first_layer_grad(fwd: AggregateForward, delta: np.ndarray) -> np.ndarray:
    return (delta * erf_prime(fwd.first_args)).T @ fwd.unit_inputs / SQRT2


def grad_exact(params: NetworkParams, x: Optional[np.ndarray], fwd: AggregateForward,
               upstream: Optional[np.ndarray] = None) -> LayerGradients:
    """
    Exact derivatives of Σ_n upstream[n]·G_θ(x_n) with respect to every W_k.

    Without `upstream` this is ∂G_θ(x)/∂W_k summed over the batch (the plain
    gradient for a single input). Inter-layer propagation uses
    ∂G^(j)_{k+1}/∂G^(l)_k = Σ_s erf(w^j·s/√(2d_k)) s_l Π_{i≠l} ψ_{s_i} / 2.

    Args:
        params: Network weights
        x: Inputs the forward pass was computed on (or None to skip the check)
        fwd: Exact forward pass
        upstream: Per-row weights of the scalar objective

    Returns:
        LayerGradients
    """
    fwd.require_mode(EXACT)
    _check_inputs(x, fwd)
    delta = _upstream(fwd, upstream)
    grads: List[Optional[np.ndarray]] = [None] * len(params.weights)
    for j in range(len(params.weights) - 1, 0, -1):
        G_prev = fwd.layers[j - 1]
        d = G_prev.shape[1]
        signs = sign_vectors(d)
        psi, args = fwd.psi[j - 1], fwd.erf_args[j - 1]
        grads[j] = ((delta.T @ psi) * erf_prime(args).T) @ signs / np.sqrt(2.0 * d)
        delta_votes = delta @ erf(args).T
        propagated = np.empty_like(G_prev)
        step = _chunk_rows(signs.shape[0], d)
        for start in range(0, G_prev.shape[0], step):
            rows = slice(start, start + step)
            reduced = _reduced_products(psi_factors(G_prev[rows], signs))
            propagated[rows] = 0.5 * np.einsum("nm,ml,nml->nl", delta_votes[rows], signs, reduced)
        delta = propagated
    grads[0] = _first_layer_grad(fwd, delta)
    return LayerGradients(grads)


def grad_sampled(params: NetworkParams, x: Optional[np.ndarray], fwd: AggregateForward,
                 upstream: Optional[np.ndarray] = None) -> LayerGradients:
    """
    Monte Carlo derivatives matching a sampled forward pass.

    Each sampled layer contributes the pathwise derivative of its sample
    average with respect to its own weights, and the score-function factor
    s^t_l / (2 ψ_{s^t_l}) to propagate into the previous layer; for one
    hidden layer this is the REINFORCE-style estimator with constant
    x/(T 2^{3/2} ‖x‖) on the hidden weights.

    Args:
        params: Network weights
        x: Inputs the forward pass was computed on (or None to skip the check)
        fwd: Sampled forward pass (samples are reused, never redrawn)
        upstream: Per-row weights of the scalar objective

    Returns:
        LayerGradients with the number of clamped ψ values
    """
    fwd.require_mode(SAMPLED)
    _check_inputs(x, fwd)
    delta = _upstream(fwd, upstream)
    grads: List[Optional[np.ndarray]] = [None] * len(params.weights)
    clamped = 0
    for j in range(len(params.weights) - 1, 0, -1):
        hidden = fwd.samples[j - 1]
        args = fwd.erf_args[j - 1]
        T, d = hidden.signs.shape[1], hidden.signs.shape[2]
        grads[j] = np.einsum("no,nto,ntl->ol", delta, erf_prime(args), hidden.signs) / (T * np.sqrt(2.0 * d))
        score = hidden.signs / hidden.psi_clamped
        delta = np.einsum("no,nto,ntl->nl", delta, erf(args), score) / (2.0 * T)
        clamped += hidden.n_clamped
    grads[0] = _first_layer_grad(fwd, delta)
    if clamped:
        logger.warning("Clamped %d psi values below %g in the score-function estimator", clamped, PSI_CLAMP)
    return LayerGradients(grads, clamped)


def forward(params: NetworkParams, x: np.ndarray, mode: str = EXACT, T: Optional[int] = None,
            rng: Optional[RngStream] = None, exact_cap: int = DEFAULT_EXACT_CAP) -> AggregateForward:
    """Dispatch to the exact or sampled forward pass."""
    if mode == EXACT:
        return aggregate_forward_exact(params, x, exact_cap)
    if mode == SAMPLED:
        if T is None or rng is None:
            raise DimensionError("Sampled mode needs a sample size T and a random stream")
        return aggregate_forward_sampled(params, x, T, rng)
    raise ValueError(f"Unknown mode: {mode}")


def backward(params: NetworkParams, fwd: AggregateForward,
             upstream: Optional[np.ndarray] = None) -> LayerGradients:
    """Dispatch to the backward pass matching the forward mode."""
    if fwd.mode == EXACT:
        return grad_exact(params, None, fwd, upstream)
    return grad_sampled(params, None, fwd, upstream)


def check_labels(y: np.ndarray) -> np.ndarray:
    labels = np.asarray(y, dtype=np.float64).reshape(-1)
    if not np.all(np.abs(labels) == 1.0):
        raise DataFormatError("Labels must be -1 or +1")
    return labels


def linear_loss(predictions: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Linear loss ½(1 − y·y′) per example."""
    return 0.5 * (1.0 - y * predictions)


def loss_gradient(params: NetworkParams, X: np.ndarray, y: np.ndarray, mode: str = EXACT,
                  T: Optional[int] = None, rng: Optional[RngStream] = None,
                  exact_cap: int = DEFAULT_EXACT_CAP) -> Tuple[float, LayerGradients]:
    """
    Batch-mean linear loss of the aggregate predictor and its gradient.

    Args:
        params: Network weights
        X: Batch of inputs, shape (n, d0)
        y: Labels in {-1, +1}
        mode: "exact" or "sampled"
        T: Sample size (sampled mode)
        rng: Stream for sampling (sampled mode)
        exact_cap: Largest hidden width for exact mode

    Returns:
        (loss, gradients)
    """
    labels = check_labels(y)
    if labels.shape[0] == 0:
        raise DimensionError("Cannot compute a loss on an empty batch")
    fwd = forward(params, X, mode, T, rng, exact_cap)
    if fwd.inputs.shape[0] != labels.shape[0]:
        raise DimensionError(f"{fwd.inputs.shape[0]} inputs for {labels.shape[0]} labels")
    loss = float(np.mean(linear_loss(fwd.prediction, labels)))
    grads = backward(params, fwd, -0.5 * labels / labels.shape[0])
    return loss, grads
