"""
Experiment Config Module

This module defines the configuration of a single training run, the default
hyperparameter grid and the per-method model-selection rules.
"""

from dataclasses import asdict, dataclass, field, replace
from itertools import product
from typing import Any, Dict, List, Optional, Tuple

from .bam_core import DEFAULT_EXACT_CAP, NetworkArchitecture
from .errors import ConfigError

PBGNET = "pbgnet"
PBGNET_PRE = "pbgnet_pre"
PBGNET_L = "pbgnet_l"
PBGNET_L_BND = "pbgnet_l_bnd"
MLP = "mlp"
METHODS = (PBGNET, PBGNET_PRE, PBGNET_L, PBGNET_L_BND, MLP)

# Methods whose run carries a validation split
VALIDATION_METHODS = (PBGNET_L, PBGNET_L_BND, MLP)

SELECT_BY_BOUND = "bound"
SELECT_BY_VALID = "valid"
SELECT_HYBRID = "hybrid"
SELECTION_RULES = {
    PBGNET: SELECT_BY_BOUND,
    PBGNET_PRE: SELECT_BY_BOUND,
    PBGNET_L: SELECT_BY_VALID,
    PBGNET_L_BND: SELECT_HYBRID,
    MLP: SELECT_BY_VALID,
}

GRID_LAYERS = (1, 2, 3)
GRID_WIDTHS = (10, 50, 100)
GRID_SAMPLE_SIZES = (10, 50, 100, 1000, 10000)
GRID_LRS = (0.1, 0.01, 0.001)
GRID_WEIGHT_DECAYS = (0.0, 1e-6, 1e-4)

# Architecture cells sharing the confidence budget (layers x widths)
DEFAULT_MULTIPLICITY = 9
DEFAULT_DELTA = 0.05
MAX_EPOCHS = 150
PATIENCE = 20
LR_PATIENCE = 5
PRETRAIN_EPOCHS = 20
INFERENCE_REPETITIONS = 20
VALID_RATIO = 0.2
SMALL_DATASET = 20000


def batch_size_for(n_train: int) -> int:
    """32 for smaller training sets, 64 from 20000 examples on."""
    return 32 if n_train < SMALL_DATASET else 64


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One training run. `sample_size` None means exact combinatorial sums.

    `inference_sample_size` defaults to the training sample size.
    """
    task: str = "blobs"
    method: str = PBGNET
    layers: int = 1
    width: int = 10
    sample_size: Optional[int] = None
    inference_sample_size: Optional[int] = None
    lr: float = 0.01
    weight_decay: float = 0.0
    delta: float = DEFAULT_DELTA
    multiplicity: int = DEFAULT_MULTIPLICITY
    seed: int = 0
    epochs: int = MAX_EPOCHS
    batch_size: Optional[int] = None
    patience: int = PATIENCE
    lr_patience: int = LR_PATIENCE
    pretrain_epochs: int = PRETRAIN_EPOCHS
    inference_repetitions: int = INFERENCE_REPETITIONS
    valid_ratio: float = VALID_RATIO
    exact_cap: int = DEFAULT_EXACT_CAP

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"Unknown method '{self.method}', expected one of {METHODS}")
        if not 1 <= self.layers <= 3:
            raise ConfigError(f"layers must be between 1 and 3, got {self.layers}")
        if self.width < 1:
            raise ConfigError(f"width must be positive, got {self.width}")
        if self.method == MLP and (self.sample_size is not None or self.inference_sample_size is not None):
            raise ConfigError("The mlp method has no sample size")
        if self.method in (PBGNET, PBGNET_PRE) and self.weight_decay != 0:
            raise ConfigError(f"The {self.method} method has no weight decay")
        if self.sample_size is not None and self.sample_size < 1:
            raise ConfigError(f"sample_size must be positive, got {self.sample_size}")
        if self.inference_sample_size is not None and self.sample_size is None:
            raise ConfigError("inference_sample_size needs a training sample_size")
        if self.inference_sample_size is not None and self.inference_sample_size < 1:
            raise ConfigError(f"inference_sample_size must be positive, got {self.inference_sample_size}")
        if self.method != MLP and self.sample_size is None and self.width > self.exact_cap:
            raise ConfigError(
                f"Exact mode supports widths up to {self.exact_cap}, got {self.width}; set a sample size"
            )
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if self.multiplicity < 1:
            raise ConfigError(f"multiplicity must be positive, got {self.multiplicity}")
        if self.epochs < 1 or self.pretrain_epochs < 0:
            raise ConfigError(f"Invalid epoch counts: epochs={self.epochs}, pretrain_epochs={self.pretrain_epochs}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.patience < 1 or self.lr_patience < 1:
            raise ConfigError("patience and lr_patience must be positive")
        if self.inference_repetitions < 1:
            raise ConfigError(f"inference_repetitions must be positive, got {self.inference_repetitions}")
        if not 0 < self.valid_ratio < 1:
            raise ConfigError(f"valid_ratio must lie in (0, 1), got {self.valid_ratio}")

    @property
    def mode(self) -> str:
        return "exact" if self.sample_size is None else "sampled"

    @property
    def inference_T(self) -> Optional[int]:
        return self.inference_sample_size or self.sample_size

    @property
    def delta_prime(self) -> float:
        return self.delta / self.multiplicity

    @property
    def selection_rule(self) -> str:
        return SELECTION_RULES[self.method]

    def architecture(self, input_dim: int) -> NetworkArchitecture:
        return NetworkArchitecture.from_layers(input_dim, self.layers, self.width)

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        return replace(self, **{key: value for key, value in overrides.items() if value is not None})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown config fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class GridSpec:
    """
    Hyperparameter grid for one method.

    Sample sizes are ignored for mlp; weight decays for pbgnet and pbgnet_pre.
    """
    method: str = PBGNET
    layers: Tuple[int, ...] = GRID_LAYERS
    widths: Tuple[int, ...] = GRID_WIDTHS
    sample_sizes: Tuple[Optional[int], ...] = GRID_SAMPLE_SIZES
    lrs: Tuple[float, ...] = GRID_LRS
    weight_decays: Tuple[float, ...] = GRID_WEIGHT_DECAYS
    base: Dict[str, Any] = field(default_factory=dict)

    def cells(self) -> List[ExperimentConfig]:
        if not (self.layers and self.widths and self.lrs):
            raise ConfigError("A grid needs at least one value per axis")
        sample_sizes = (None,) if self.method == MLP else tuple(self.sample_sizes) or (None,)
        decays = (0.0,) if self.method in (PBGNET, PBGNET_PRE) else tuple(self.weight_decays) or (0.0,)
        configs = []
        for layers, width, T, lr, decay in product(self.layers, self.widths, sample_sizes, self.lrs, decays):
            settings = dict(self.base)
            settings.update(method=self.method, layers=layers, width=width, sample_size=T, lr=lr,
                            weight_decay=decay)
            configs.append(ExperimentConfig(**settings))
        return configs
