"""
PAC-Bayes Module

This module provides the bound machinery used to train and certify aggregate
predictors: the Bernoulli kl divergence and its inversion (Seeger bound), the
Catoni bound with its optimal C, the tree-weighted KL between Gaussian
posterior and prior, the union-bound-corrected complexity term and the
BoundReport certificate.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize, special

from .bam_core import NetworkArchitecture, NetworkParams, tree_replication_counts
from .errors import DimensionError, NumericError

logger = logging.getLogger(__name__)

KL_INVERSE_TOL = 1e-12
KL_INVERSE_MAXITER = 200
LOG_C_RANGE = (-10.0, 10.0)
LOG_C_TOL = 1e-10


def _check_probability(value: float, what: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{what} must lie in [0, 1], got {value}")
    return value


def kl_bernoulli(q: float, p: float) -> float:
    """
    kl(q‖p) between Bernoulli distributions, with 0·ln 0 = 0.

    Args:
        q: Empirical probability in [0, 1]
        p: Reference probability in [0, 1]

    Returns:
        Non-negative divergence; +inf when p is 0 or 1 and q differs
    """
    q = _check_probability(q, "q")
    p = _check_probability(p, "p")
    return float(special.rel_entr(q, p) + special.rel_entr(1.0 - q, 1.0 - p))


def kl_inverse(q: float, xi: float, tol: float = KL_INVERSE_TOL, maxiter: int = KL_INVERSE_MAXITER) -> float:
    """
    Largest p in [q, 1] with kl(q‖p) <= xi (Seeger bound).

    Args:
        q: Empirical linear loss in [0, 1]
        xi: Complexity budget (>= 0)
        tol: Absolute bisection tolerance on p
        maxiter: Bisection iteration cap

    Returns:
        The kl-inverted bound
    """
    q = _check_probability(q, "q")
    xi = float(xi)
    if xi < 0 or math.isnan(xi):
        raise ValueError(f"xi must be non-negative, got {xi}")
    if xi == 0.0:
        return q
    if q >= 1.0:
        return 1.0
    if q == 0.0:
        return float(-math.expm1(-xi))
    p_max = 1.0 - tol / 2
    if p_max <= q:
        return 1.0

    def excess(p: float) -> float:
        return kl_bernoulli(q, p) - xi

    if excess(p_max) <= 0:
        logger.debug("No p below 1 violates kl(%g||p) <= %g", q, xi)
        return 1.0
    return float(optimize.bisect(excess, q, p_max, xtol=tol, maxiter=maxiter))


def catoni_bound(q: float, xi: float, C: float) -> float:
    """
    Catoni bound (1 − exp(−Cq − ξ)) / (1 − e^{−C}).

    Args:
        q: Empirical linear loss
        xi: Complexity term
        C: Trade-off parameter (> 0)

    Returns:
        Raw bound value (not clipped)
    """
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    if math.isinf(C):
        return 1.0 if q > 0 else float(-math.expm1(-xi))
    return float(math.expm1(-C * q - xi) / math.expm1(-C))


def catoni_bound_and_grads(q: float, xi: float, C: float) -> Tuple[float, float, float, float]:
    """
    Catoni bound with its partial derivatives in q, xi and C.

    Returns:
        (value, d/dq, d/dxi, d/dC)
    """
    value = catoni_bound(q, xi, C)
    denominator = -math.expm1(-C)
    tail = math.exp(-C * q - xi)
    d_q = C * tail / denominator
    d_xi = tail / denominator
    d_C = (q * tail - value * math.exp(-C)) / denominator
    return value, d_q, d_xi, d_C


def catoni_delta(C: float, q: float, p: float) -> float:
    """Δ(C, q, p) = −ln(1 − p(1 − e^{−C})) − Cq, whose supremum over C is kl(q‖p)."""
    return float(-math.log1p(p * math.expm1(-C)) - C * q)


def optimal_catoni_C(q: float, p: float) -> float:
    """
    Maximizer of Δ(·, q, p): C* = ln(p(1−q) / (q(1−p))).

    Args:
        q: Empirical loss, 0 <= q < p
        p: Bound value, p < 1

    Returns:
        C* > 0, or inf when q = 0 (the supremum is approached as C grows)
    """
    q = _check_probability(q, "q")
    p = _check_probability(p, "p")
    if not q < p < 1.0:
        raise ValueError(f"The optimal C needs 0 <= q < p < 1, got q={q}, p={p}")
    if q == 0.0:
        return math.inf
    return float(math.log(p * (1.0 - q) / (q * (1.0 - p))))


def catoni_infimum(q: float, xi: float) -> Tuple[float, float]:
    """
    Numerically minimize the Catoni bound over C.

    Searches ln C in [-10, 10] with bounded Brent minimization (golden-section
    steps with parabolic refinement).

    Returns:
        (minimal bound, minimizing C)
    """
    result = optimize.minimize_scalar(
        lambda log_c: catoni_bound(q, xi, math.exp(log_c)),
        bounds=LOG_C_RANGE,
        method="bounded",
        options={"xatol": LOG_C_TOL},
    )
    return float(result.fun), float(math.exp(result.x))


def kl_network_divergence(theta: NetworkParams, mu: NetworkParams, arch: NetworkArchitecture) -> float:
    """
    KL(Q_θ‖P_μ) of the tree-decoupled Gaussian posterior.

    ½(‖w_L − u_L‖² + Σ_k d†_{k+1} ‖W_k − U_k‖²), with each hidden layer
    counted as many times as the tree map replicates it.

    Args:
        theta: Posterior mean
        mu: Prior mean
        arch: Architecture both must match

    Returns:
        Non-negative divergence
    """
    theta.check_architecture(arch)
    mu.check_architecture(arch)
    counts = tree_replication_counts(arch)
    total = sum(count * np.sum(np.square(w - u)) for count, w, u in zip(counts, theta.weights, mu.weights))
    return float(0.5 * total)


def kl_network_gradient(theta: NetworkParams, mu: NetworkParams, arch: NetworkArchitecture) -> List[np.ndarray]:
    """Per-layer gradient d†_{k+1}(W_k − U_k) of kl_network_divergence in θ."""
    theta.check_architecture(arch)
    mu.check_architecture(arch)
    counts = tree_replication_counts(arch)
    return [count * (w - u) for count, w, u in zip(counts, theta.weights, mu.weights)]


def compute_xi(kl: float, n: int, delta: float, multiplicity: int = 1) -> float:
    """ξ = (KL + ln(2√n / δ')) / n with δ' = δ / multiplicity."""
    delta_prime = delta / multiplicity
    return float((kl + math.log(2.0 * math.sqrt(n) / delta_prime)) / n)


@dataclass
class BoundInputs:
    """Everything a certificate depends on; re-verifiable on its own."""
    q: float
    kl: float
    n: int
    delta: float
    multiplicity: int = 1

    def __post_init__(self):
        self.q = _check_probability(self.q, "q")
        if not math.isfinite(self.kl):
            raise NumericError(f"KL must be finite, got {self.kl}")
        if self.kl < 0:
            raise ValueError(f"KL must be non-negative, got {self.kl}")
        if int(self.n) < 1:
            raise DimensionError(f"n must be at least 1, got {self.n}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if int(self.multiplicity) < 1:
            raise ValueError(f"multiplicity must be at least 1, got {self.multiplicity}")
        self.n = int(self.n)
        self.multiplicity = int(self.multiplicity)

    @property
    def delta_prime(self) -> float:
        return self.delta / self.multiplicity


@dataclass
class BoundReport:
    """Certified risk bound with its inputs and provenance."""
    q: float
    kl: float
    n: int
    delta: float
    multiplicity: int
    xi: float
    seeger_bound: float
    catoni_bound: float
    catoni_C: float
    zero_one_bound: float
    catoni_bound_raw: float = 0.0
    q_std: float = 0.0
    epoch: Optional[int] = None
    sample_size: Optional[int] = None
    repetitions: int = 1
    created_at: str = field(default_factory=lambda: datetime.utcnow().isoformat())

    @property
    def inputs(self) -> BoundInputs:
        return BoundInputs(self.q, self.kl, self.n, self.delta, self.multiplicity)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if math.isinf(self.catoni_C):
            # JSON has no infinity; null stands for C -> inf when q = 0
            data["catoni_C"] = None
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BoundReport":
        data = dict(data)
        if data.get("catoni_C") is None:
            data["catoni_C"] = math.inf
        known = {name for name in cls.__dataclass_fields__}
        return cls(**{key: value for key, value in data.items() if key in known})


def assemble_bound_report(inputs: BoundInputs, epoch: Optional[int] = None, sample_size: Optional[int] = None,
                          repetitions: int = 1, q_std: float = 0.0) -> BoundReport:
    """
    Assemble the certificate for a trained posterior.

    Args:
        inputs: Empirical loss, KL, n, δ and union-bound multiplicity
        epoch: Epoch the parameters come from
        sample_size: Monte Carlo sample size used to estimate q (None when exact)
        repetitions: Number of inference repetitions averaged into q
        q_std: Standard deviation of q over the repetitions

    Returns:
        BoundReport with Seeger, Catoni and zero-one bounds
    """
    xi = compute_xi(inputs.kl, inputs.n, inputs.delta, inputs.multiplicity)
    seeger = kl_inverse(inputs.q, xi)
    if inputs.q < seeger < 1.0:
        C = optimal_catoni_C(inputs.q, seeger)
    else:
        _, C = catoni_infimum(inputs.q, xi)
    raw = catoni_bound(inputs.q, xi, C)
    report = BoundReport(
        q=inputs.q,
        kl=inputs.kl,
        n=inputs.n,
        delta=inputs.delta,
        multiplicity=inputs.multiplicity,
        xi=xi,
        seeger_bound=seeger,
        catoni_bound=min(1.0, max(0.0, raw)),
        catoni_C=C,
        zero_one_bound=min(1.0, 2.0 * seeger),
        catoni_bound_raw=raw,
        q_std=q_std,
        epoch=epoch,
        sample_size=sample_size,
        repetitions=repetitions,
    )
    logger.info(
        "Bound: q=%.5f KL=%.4f n=%d delta'=%.3g -> seeger=%.5f catoni=%.5f (C=%s) zero-one=%.5f",
        report.q, report.kl, report.n, inputs.delta_prime, report.seeger_bound, report.catoni_bound,
        "inf" if math.isinf(C) else f"{C:.4f}", report.zero_one_bound,
    )
    return report
