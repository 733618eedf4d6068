"""
Train Module

This module provides the training objectives (the Catoni bound minimized
jointly over the weights and C = exp(γ), and the L2-regularized linear
loss), a numpy Adam optimizer, the halving learning-rate schedule with early
stopping, the pretraining protocol that learns a data-dependent prior, the
final certification step and the tanh MLP baseline.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .bam_core import DEFAULT_EXACT_CAP, NetworkArchitecture, NetworkParams, init_params
from .data import TaskData, split, with_validation
from .errors import ConfigError, DataFormatError, DimensionError, NumericError
from .experiment_config import (
    MLP,
    PBGNET,
    PBGNET_L,
    PBGNET_L_BND,
    PBGNET_PRE,
    ExperimentConfig,
    batch_size_for,
)
from .gradients import EXACT, LayerGradients, check_labels, forward, linear_loss, loss_gradient
from .math_core import RngStream, check_finite
from .pacbayes import (
    BoundInputs,
    BoundReport,
    assemble_bound_report,
    catoni_bound_and_grads,
    compute_xi,
    kl_inverse,
    kl_network_divergence,
    kl_network_gradient,
)

logger = logging.getLogger(__name__)

PAC_BOUND = "pac_bound"
LINEAR_L2 = "linear_l2"

# Float64 entries materialized per chunk of rows when predicting in sampled mode
PREDICT_CHUNK_ELEMENTS = 1 << 23


@dataclass
class Objective:
    """
    Training objective.

    pac_bound: Catoni bound with the batch loss standing in for the
    empirical loss, KL against the fixed prior, sample count n and δ'.
    linear_l2: batch linear loss plus (ρ/2)‖θ‖².
    """
    kind: str
    n: int = 1
    delta_prime: float = 0.05
    prior: Optional[NetworkParams] = None
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.kind not in (PAC_BOUND, LINEAR_L2):
            raise ConfigError(f"Unknown objective kind: {self.kind}")
        if self.kind == PAC_BOUND:
            if self.prior is None:
                raise ConfigError("The pac_bound objective needs a prior")
            if self.n < 1 or not 0 < self.delta_prime < 1:
                raise ConfigError(f"Invalid bound parameters n={self.n}, delta'={self.delta_prime}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")

    @classmethod
    def pac_bound(cls, prior: NetworkParams, n: int, delta_prime: float) -> "Objective":
        return cls(PAC_BOUND, n=n, delta_prime=delta_prime, prior=prior)

    @classmethod
    def linear_l2(cls, weight_decay: float = 0.0) -> "Objective":
        return cls(LINEAR_L2, weight_decay=weight_decay)


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(f"Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.eps <= 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")


@dataclass
class MLPParams:
    """Weights and biases of the tanh baseline network."""
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def copy(self) -> "MLPParams":
        return MLPParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    @property
    def architecture(self) -> NetworkArchitecture:
        return NetworkArchitecture((self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights))


@dataclass
class TrainState:
    """Mutable training state; owned by a single training loop."""
    params: Any
    rng: RngStream
    lr: float
    gamma: Optional[float] = None
    prior: Optional[NetworkParams] = None
    first_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    epoch: int = 0
    best_metric: float = math.inf
    best_cost: float = math.inf
    best_epoch: int = 0
    best_params: Any = None
    best_gamma: Optional[float] = None
    best_trace: List[float] = field(default_factory=list)
    epochs_since_improvement: int = 0
    history: List[Dict[str, Any]] = field(default_factory=list)
    final_report: Optional[BoundReport] = None
    final_metrics: Dict[str, Any] = field(default_factory=dict)

    @property
    def C(self) -> Optional[float]:
        return None if self.gamma is None else math.exp(self.gamma)

    def named_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {f"W{k}": w for k, w in enumerate(self.params.weights, start=1)}
        for k, b in enumerate(getattr(self.params, "biases", []), start=1):
            arrays[f"b{k}"] = b
        return arrays

    def snapshot(self) -> None:
        self.best_params = self.params.copy()
        self.best_gamma = self.gamma

    def restore_best(self) -> None:
        if self.best_params is not None:
            self.params = self.best_params.copy()
            self.gamma = self.best_gamma


@dataclass
class ObjectiveResult:
    value: float
    loss: float
    grads: LayerGradients
    kl: float = 0.0
    xi: float = 0.0
    gamma_grad: Optional[float] = None

    def named_grads(self) -> Dict[str, np.ndarray]:
        named = {f"W{k}": g for k, g in enumerate(self.grads.weights, start=1)}
        if self.gamma_grad is not None:
            named["gamma"] = np.array([self.gamma_grad])
        return named


@dataclass
class Evaluation:
    """Linear loss and 0-1 error of sgn(G), averaged over inference repetitions."""
    loss: float
    loss_std: float
    error: float
    error_std: float
    repetitions: int
    n: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def objective_value_and_grad(state: TrainState, X: np.ndarray, y: np.ndarray, objective: Objective,
                             T: Optional[int] = None, mode: str = EXACT, rng: Optional[RngStream] = None,
                             exact_cap: int = DEFAULT_EXACT_CAP) -> ObjectiveResult:
    """
    Objective value on a mini-batch and its gradient in θ (and γ for pac_bound).

    Args:
        state: Current training state
        X: Batch features
        y: Batch labels in {-1, +1}
        objective: Objective to evaluate
        T: Sample size in sampled mode
        mode: "exact" or "sampled"
        rng: Sampling stream (derived from the state step when omitted)
        exact_cap: Largest hidden width for exact mode

    Returns:
        ObjectiveResult
    """
    if rng is None:
        rng = state.rng.derive("batch", state.step)
    params = state.params
    loss, loss_grads = loss_gradient(params, X, y, mode, T, rng, exact_cap)
    if objective.kind == LINEAR_L2:
        rho = objective.weight_decay
        value = loss + 0.5 * rho * params.sq_norm()
        grads = [g + rho * w for g, w in zip(loss_grads.weights, params.weights)]
        return ObjectiveResult(value, loss, LayerGradients(grads, loss_grads.clamped))

    arch = params.architecture
    kl = kl_network_divergence(params, objective.prior, arch)
    xi = compute_xi(kl, objective.n, objective.delta_prime)
    C = state.C if state.gamma is not None else 1.0
    value, d_q, d_xi, d_C = catoni_bound_and_grads(loss, xi, C)
    kl_grads = kl_network_gradient(params, objective.prior, arch)
    grads = [d_q * g + (d_xi / objective.n) * k for g, k in zip(loss_grads.weights, kl_grads)]
    return ObjectiveResult(value, loss, LayerGradients(grads, loss_grads.clamped), kl, xi, d_C * C)


def adam_step(state: TrainState, grads: Dict[str, np.ndarray], config: AdamConfig) -> TrainState:
    """
    One bias-corrected Adam update at the state's current learning rate.

    Args:
        state: State whose arrays are updated in place
        grads: Gradients keyed like TrainState.named_arrays (plus "gamma")
        config: Moment decay rates and epsilon

    Returns:
        The same state
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"Non-finite gradient for {name} at step {state.step + 1}")
    targets = state.named_arrays()
    gamma_box = None
    if "gamma" in grads:
        gamma_box = np.array([state.gamma], dtype=np.float64)
        targets["gamma"] = gamma_box

    state.step += 1
    bc1 = 1.0 - config.beta1 ** state.step
    bc2 = 1.0 - config.beta2 ** state.step
    step_size = state.lr / bc1
    for name, g in grads.items():
        param = targets[name]
        g = np.asarray(g, dtype=np.float64).reshape(param.shape)
        if name not in state.first_moments:
            state.first_moments[name] = np.zeros_like(param)
            state.second_moments[name] = np.zeros_like(param)
        m, v = state.first_moments[name], state.second_moments[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        param -= step_size * m / (np.sqrt(v / bc2) + config.eps)
    if gamma_box is not None:
        state.gamma = float(gamma_box[0])
    for name, param in targets.items():
        check_finite(param, f"{name} after step {state.step}")
    return state


def register_epoch(state: TrainState, cost: float, patience: int, lr_patience: int,
                   selection: Optional[float] = None) -> bool:
    """
    Track the best epoch, halve the learning rate on plateaus, decide on early stopping.

    The schedule follows the epoch cost: the learning rate is halved after
    every `lr_patience` consecutive epochs without a cost decrease and
    training stops once that count exceeds `patience`. The best epoch (the
    one restored at the end) minimizes `selection`, which defaults to the cost.

    Returns:
        True when training should stop
    """
    selection = cost if selection is None else selection
    if math.isnan(cost) or math.isnan(selection):
        raise NumericError(f"Epoch {state.epoch} produced a NaN metric")
    if selection < state.best_metric:
        state.best_metric = selection
        state.best_epoch = state.epoch
        state.best_trace.append(selection)
        state.snapshot()
    if cost < state.best_cost:
        state.best_cost = cost
        state.epochs_since_improvement = 0
        return False
    state.epochs_since_improvement += 1
    if state.epochs_since_improvement % lr_patience == 0:
        state.lr /= 2.0
        logger.warning(
            "No improvement for %d epochs, learning rate halved to %g",
            state.epochs_since_improvement, state.lr,
        )
    return state.epochs_since_improvement > patience


def predict(params: NetworkParams, X: np.ndarray, mode: str = EXACT, T: Optional[int] = None,
            rng: Optional[RngStream] = None, exact_cap: int = DEFAULT_EXACT_CAP) -> np.ndarray:
    """Aggregate predictions G_θ(x) for every row, sampled in row chunks."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if mode == EXACT:
        return forward(params, X, mode, exact_cap=exact_cap).prediction
    width = max(params.architecture.widths[1:])
    step = max(1, PREDICT_CHUNK_ELEMENTS // max(1, T * width))
    out = np.empty(X.shape[0])
    for index, start in enumerate(range(0, X.shape[0], step)):
        rows = slice(start, start + step)
        out[rows] = forward(params, X[rows], mode, T, rng.derive("rows", index), exact_cap).prediction
    return out


def _errors(predictions: np.ndarray, y: np.ndarray) -> np.ndarray:
    # sgn(0) = -1
    return (np.where(predictions > 0, 1.0, -1.0) != y).astype(np.float64)


def evaluate(params: NetworkParams, X: np.ndarray, y: np.ndarray, mode: str = EXACT, T: Optional[int] = None,
             rng: Optional[RngStream] = None, repetitions: int = 1,
             exact_cap: int = DEFAULT_EXACT_CAP) -> Evaluation:
    """
    Linear loss and 0-1 error of the aggregate predictor.

    In sampled mode the prediction is repeated with independent samples and
    the results averaged; exact mode evaluates once.
    """
    y = check_labels(y)
    if y.shape[0] == 0:
        raise DimensionError("Cannot evaluate on an empty set")
    reps = 1 if mode == EXACT else repetitions
    losses, errors = np.empty(reps), np.empty(reps)
    for r in range(reps):
        stream = rng.derive("repetition", r) if rng is not None else None
        predictions = predict(params, X, mode, T, stream, exact_cap)
        losses[r] = np.mean(linear_loss(predictions, y))
        errors[r] = np.mean(_errors(predictions, y))
    return Evaluation(float(losses.mean()), float(losses.std()), float(errors.mean()), float(errors.std()),
                      reps, int(y.shape[0]))


def certify(params: NetworkParams, prior: NetworkParams, X: np.ndarray, y: np.ndarray, config: ExperimentConfig,
            delta: Optional[float] = None, epoch: Optional[int] = None) -> Tuple[BoundReport, Evaluation]:
    """
    Authoritative certificate for a trained posterior.

    Recomputes the empirical linear loss (averaged over the configured
    inference repetitions when sampled) on the bound's sample set, and the
    KL against the prior, then assembles the BoundReport.

    Args:
        params: Posterior mean
        prior: Prior mean
        X: Features of the bound's training sample
        y: Labels of the bound's training sample
        config: Run configuration (mode, T, repetitions, δ, m, seed)
        delta: Confidence override
        epoch: Epoch the parameters come from

    Returns:
        (BoundReport, Evaluation of the training sample)
    """
    rng = RngStream(config.seed).derive("certify")
    evaluation = evaluate(params, X, y, config.mode, config.inference_T, rng, config.inference_repetitions,
                          config.exact_cap)
    kl = kl_network_divergence(params, prior, params.architecture)
    inputs = BoundInputs(min(1.0, evaluation.loss), kl, X.shape[0], delta or config.delta, config.multiplicity)
    report = assemble_bound_report(inputs, epoch=epoch, sample_size=config.inference_T,
                                   repetitions=evaluation.repetitions, q_std=evaluation.loss_std)
    return report, evaluation


StepFn = Callable[[TrainState, np.ndarray, np.ndarray], Tuple[float, float]]
EpochFn = Callable[[TrainState, Dict[str, Any]], Dict[str, Any]]


def _run_epochs(config: ExperimentConfig, state: TrainState, X: np.ndarray, y: np.ndarray, step_fn: StepFn,
                epochs: int, epoch_fn: Optional[EpochFn] = None, selection: str = "cost",
                early_stopping: bool = True) -> List[Dict[str, Any]]:
    n = X.shape[0]
    batch_size = config.batch_size or batch_size_for(n)
    rows = []
    for _ in range(epochs):
        state.epoch += 1
        order = state.rng.derive("shuffle", state.epoch).permutation(n)
        costs, losses, sizes = [], [], []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            cost, loss = step_fn(state, X[idx], y[idx])
            costs.append(cost)
            losses.append(loss)
            sizes.append(idx.size)
            logger.debug("Epoch %d step %d: cost=%.6f loss=%.6f", state.epoch, state.step, cost, loss)
        row = {"epoch": state.epoch, "cost": float(np.mean(costs)), "loss": float(np.mean(losses)),
               "lr": state.lr}
        if epoch_fn is not None:
            row.update(epoch_fn(state, row))
        stop = register_epoch(state, row["cost"], config.patience, config.lr_patience, row[selection])
        row["best_epoch"] = state.best_epoch
        rows.append(row)
        state.history.append(row)
        logger.info("Epoch %d: cost=%.5f loss=%.5f %s=%.5f lr=%g", state.epoch, row["cost"], row["loss"],
                    selection, row[selection], row["lr"])
        if early_stopping and stop:
            logger.info("Early stopping after %d epochs without improvement", state.epochs_since_improvement)
            break
    return rows


def _bam_step(objective: Objective, adam: AdamConfig, config: ExperimentConfig) -> StepFn:
    def step(state: TrainState, Xb: np.ndarray, yb: np.ndarray) -> Tuple[float, float]:
        result = objective_value_and_grad(state, Xb, yb, objective, config.sample_size, config.mode,
                                          exact_cap=config.exact_cap)
        adam_step(state, result.named_grads(), adam)
        return result.value, result.loss

    return step


def train_loop(config: ExperimentConfig, data: TaskData, split_name: str = "train",
               prior: Optional[NetworkParams] = None,
               start: Optional[NetworkParams] = None) -> Tuple[TrainState, List[Dict[str, Any]]]:
    """
    Train an aggregate predictor and certify it.

    pbgnet and pbgnet_pre minimize the bound and keep the epoch with the
    lowest batch-averaged bound. pbgnet_l minimizes the L2-regularized
    linear loss and keeps the epoch with the lowest validation loss;
    pbgnet_l_bnd trains the same way but keeps the epoch with the lowest
    epoch bound. The best epoch is restored and the final BoundReport is
    computed on the training split.

    Args:
        config: Run configuration
        data: Task with the training split (and a validation split for the linear methods)
        split_name: Split to train and certify on
        prior: Prior mean (the random initialization when omitted)
        start: Starting point (the prior when omitted)

    Returns:
        (final TrainState, history rows)
    """
    if config.method == MLP:
        raise ConfigError("Use tanh_mlp_baseline for the mlp method")
    if config.method in (PBGNET_L, PBGNET_L_BND):
        data = with_validation(data, config.valid_ratio, config.seed)
    X, y = data.view(split_name)
    root = RngStream(config.seed)
    arch = config.architecture(X.shape[1])
    if prior is None:
        prior = init_params(arch, root.derive("init"))
    prior.check_architecture(arch)
    start = prior if start is None else start
    start.check_architecture(arch)

    bound_trained = config.method in (PBGNET, PBGNET_PRE)
    state = TrainState(params=start.copy(), rng=root.derive("train"), lr=config.lr,
                       gamma=0.0 if bound_trained else None, prior=prior.copy())
    n = X.shape[0]
    if bound_trained:
        objective = Objective.pac_bound(state.prior, n, config.delta_prime)
    else:
        objective = Objective.linear_l2(config.weight_decay)
    adam = AdamConfig(lr=config.lr)

    valid = data.view("valid") if config.method in (PBGNET_L, PBGNET_L_BND) else None

    def epoch_fn(state: TrainState, row: Dict[str, Any]) -> Dict[str, Any]:
        kl = kl_network_divergence(state.params, state.prior, arch)
        xi = compute_xi(kl, n, config.delta, config.multiplicity)
        extra = {"kl": kl, "C": state.C, "bound": kl_inverse(min(1.0, max(0.0, row["loss"])), xi)}
        if valid is not None:
            stream = root.derive("valid", state.epoch)
            extra["valid_loss"] = evaluate(state.params, valid[0], valid[1], config.mode, config.inference_T,
                                           stream, 1, config.exact_cap).loss
        return extra

    selection = {PBGNET: "cost", PBGNET_PRE: "cost", PBGNET_L: "valid_loss", PBGNET_L_BND: "bound"}[config.method]
    logger.info("Training %s on %d examples, widths %s, mode %s", config.method, n, arch.widths, config.mode)
    history = _run_epochs(config, state, X, y, _bam_step(objective, adam, config), config.epochs, epoch_fn, selection)
    state.restore_best()

    report, evaluation = certify(state.params, state.prior, X, y, config, epoch=state.best_epoch)
    state.final_report = report
    state.final_metrics = {"train": evaluation.to_dict(), "best_epoch": state.best_epoch, "C": state.C}
    if valid is not None:
        state.final_metrics["valid"] = evaluate(state.params, valid[0], valid[1], config.mode, config.inference_T,
                                                root.derive("valid", "final"), config.inference_repetitions,
                                                config.exact_cap).to_dict()
    return state, history


def pretrain_protocol(config: ExperimentConfig, data: TaskData) -> Tuple[NetworkParams, TrainState]:
    """
    Learn a prior on half of the training set, then minimize the bound on the other half.

    The first half trains the linear loss for `pretrain_epochs` epochs from a
    random initialization; the result is both the prior and the starting
    point of bound minimization on the second half (n = its size).

    Args:
        config: Run configuration
        data: Task with a train split of at least 2 examples

    Returns:
        (prior, final TrainState)
    """
    if data.split_size("train") < 2:
        raise DataFormatError("Pretraining needs at least 2 training examples")
    halves = split(data, (0.5, 0.5), config.seed, source="train", names=("pretrain", "train"))
    Xp, yp = halves.view("pretrain")
    root = RngStream(config.seed)
    arch = config.architecture(Xp.shape[1])
    pre_state = TrainState(params=init_params(arch, root.derive("init")), rng=root.derive("pretrain"),
                           lr=config.lr)
    logger.info("Pretraining on %d examples for %d epochs", Xp.shape[0], config.pretrain_epochs)
    _run_epochs(config, pre_state, Xp, yp, _bam_step(Objective.linear_l2(0.0), AdamConfig(lr=config.lr), config),
                config.pretrain_epochs, early_stopping=False)
    prior = pre_state.params.copy()
    state, _ = train_loop(config, halves, "train", prior=prior, start=prior)
    return prior, state


def init_mlp(arch: NetworkArchitecture, rng: RngStream) -> MLPParams:
    """Gaussian weights with std 1/sqrt(fan-in) and zero biases."""
    weights = [rng.normal(shape) / np.sqrt(shape[1]) for shape in arch.layer_shapes]
    return MLPParams(weights, [np.zeros(rows) for rows, _ in arch.layer_shapes])


def mlp_forward(params: MLPParams, X: np.ndarray) -> List[np.ndarray]:
    """Activations of every layer, inputs first; the output is activations[-1][:, 0]."""
    activations = [np.atleast_2d(np.asarray(X, dtype=np.float64))]
    for w, b in zip(params.weights, params.biases):
        activations.append(np.tanh(activations[-1] @ w.T + b))
    return activations


def mlp_loss_gradient(params: MLPParams, X: np.ndarray, y: np.ndarray,
                      weight_decay: float = 0.0) -> Tuple[float, float, Dict[str, np.ndarray]]:
    """
    Linear loss of the tanh network with L2 decay on the weights, by backpropagation.

    Returns:
        (objective value, linear loss, gradients keyed W1.., b1..)
    """
    y = check_labels(y)
    if y.shape[0] == 0:
        raise DimensionError("Cannot compute a loss on an empty batch")
    activations = mlp_forward(params, X)
    output = activations[-1][:, 0]
    loss = float(np.mean(linear_loss(output, y)))
    value = loss + 0.5 * weight_decay * sum(float(np.sum(w * w)) for w in params.weights)
    grads = {}
    delta = (-0.5 * y / y.shape[0])[:, None] * (1.0 - activations[-1] ** 2)
    for k in range(len(params.weights), 0, -1):
        grads[f"W{k}"] = delta.T @ activations[k - 1] + weight_decay * params.weights[k - 1]
        grads[f"b{k}"] = delta.sum(axis=0)
        if k > 1:
            delta = (delta @ params.weights[k - 1]) * (1.0 - activations[k - 1] ** 2)
    return value, loss, grads


def mlp_evaluate(params: MLPParams, X: np.ndarray, y: np.ndarray) -> Evaluation:
    y = check_labels(y)
    output = mlp_forward(params, X)[-1][:, 0]
    return Evaluation(float(np.mean(linear_loss(output, y))), 0.0, float(np.mean(_errors(output, y))), 0.0, 1,
                      int(y.shape[0]))


def fit_mlp(config: ExperimentConfig, data: TaskData) -> TrainState:
    """Train the tanh baseline with validation-loss model selection; returns the restored state."""
    data = with_validation(data, config.valid_ratio, config.seed)
    X, y = data.view("train")
    Xv, yv = data.view("valid")
    root = RngStream(config.seed)
    arch = config.architecture(X.shape[1])
    state = TrainState(params=init_mlp(arch, root.derive("init")), rng=root.derive("train"), lr=config.lr)
    adam = AdamConfig(lr=config.lr)

    def step(state: TrainState, Xb: np.ndarray, yb: np.ndarray) -> Tuple[float, float]:
        value, loss, grads = mlp_loss_gradient(state.params, Xb, yb, config.weight_decay)
        adam_step(state, grads, adam)
        return value, loss

    def epoch_fn(state: TrainState, row: Dict[str, Any]) -> Dict[str, Any]:
        return {"valid_loss": mlp_evaluate(state.params, Xv, yv).loss}

    logger.info("Training mlp on %d examples, widths %s", X.shape[0], arch.widths)
    _run_epochs(config, state, X, y, step, config.epochs, epoch_fn, "valid_loss")
    state.restore_best()
    state.final_metrics = {
        "train": mlp_evaluate(state.params, X, y).to_dict(),
        "valid": mlp_evaluate(state.params, Xv, yv).to_dict(),
        "best_epoch": state.best_epoch,
    }
    return state


def tanh_mlp_baseline(config: ExperimentConfig, data: TaskData) -> Tuple[MLPParams, Dict[str, Any]]:
    """
    Standard tanh network trained on the linear loss, for comparison.

    Args:
        config: Run configuration (method mlp)
        data: Task with a train split; 20% of it becomes the validation split

    Returns:
        (restored parameters, train/valid metrics)
    """
    if config.method != MLP:
        raise ConfigError(f"tanh_mlp_baseline runs the mlp method, got {config.method}")
    state = fit_mlp(config, data)
    return state.params, state.final_metrics
