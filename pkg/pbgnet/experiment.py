"""
Experiment Module

This module provides the run harness: executing a method end to end,
persisting checkpoints, histories and run records, union-bound-aware model
selection over grid cells, re-certification of checkpoints, verification of
recorded numbers against artifacts on disk and decision-surface grids.
"""

import json
import logging
import math
import os
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .bam_core import NetworkArchitecture, NetworkParams, aggregate_forward_exact, bam_forward, vote_decomposition
from .data import TaskData, split, with_validation
from .errors import ConfigError, DataFormatError, DimensionError
from .experiment_config import (
    MLP,
    PBGNET_L,
    PBGNET_L_BND,
    PBGNET_PRE,
    SELECT_BY_BOUND,
    SELECT_BY_VALID,
    SELECT_HYBRID,
    SELECTION_RULES,
    ExperimentConfig,
)
from .math_core import RngStream
from .pacbayes import BoundReport
from .train import (
    MLPParams,
    TrainState,
    certify,
    evaluate,
    fit_mlp,
    mlp_evaluate,
    pretrain_protocol,
    train_loop,
)

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "pbgnet-checkpoint"
CHECKPOINT_VERSION = 1
VERIFY_TOLERANCE = 1e-9
VERIFIED_BOUND_FIELDS = ("q", "kl", "n", "xi", "seeger_bound", "catoni_bound", "zero_one_bound")
VERIFIED_METRICS = ("train_loss", "train_error", "test_loss", "test_error")


@dataclass
class Checkpoint:
    """Posterior (and prior) of a finished run with the configuration that produced it."""
    kind: str
    architecture: NetworkArchitecture
    params: Any
    config: ExperimentConfig
    prior: Optional[NetworkParams] = None
    gamma: Optional[float] = None
    best_epoch: int = 0


def save_checkpoint(path: str, checkpoint: Checkpoint) -> None:
    """
    Write a versioned JSON tensor dump with an architecture header.

    Args:
        path: Destination file
        checkpoint: Checkpoint to write
    """
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": checkpoint.kind,
        "architecture": list(checkpoint.architecture.widths),
        "posterior": [w.tolist() for w in checkpoint.params.weights],
        "biases": [b.tolist() for b in checkpoint.params.biases] if checkpoint.kind == MLP else None,
        "prior": [w.tolist() for w in checkpoint.prior.weights] if checkpoint.prior is not None else None,
        "gamma": checkpoint.gamma,
        "best_epoch": checkpoint.best_epoch,
        "config": checkpoint.config.to_dict(),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)


def load_checkpoint(path: str) -> Checkpoint:
    """
    Read a checkpoint written by save_checkpoint.

    Args:
        path: Checkpoint file

    Returns:
        Checkpoint with shapes checked against its architecture header
    """
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("format") != CHECKPOINT_FORMAT or payload.get("version") != CHECKPOINT_VERSION:
        raise DataFormatError(f"{path} is not a version {CHECKPOINT_VERSION} checkpoint")
    arch = NetworkArchitecture(tuple(payload["architecture"]))
    config = ExperimentConfig.from_dict(payload["config"])
    if payload["kind"] == MLP:
        weights = [np.array(w, dtype=np.float64) for w in payload["posterior"]]
        params = MLPParams(weights, [np.array(b, dtype=np.float64) for b in payload["biases"]])
        if params.architecture != arch:
            raise DimensionError(f"Checkpoint weights do not match widths {arch.widths}")
        return Checkpoint(MLP, arch, params, config, best_epoch=payload.get("best_epoch", 0))
    params = NetworkParams(payload["posterior"])
    params.check_architecture(arch)
    prior = NetworkParams(payload["prior"]) if payload.get("prior") is not None else None
    if prior is not None:
        prior.check_architecture(arch)
    return Checkpoint("bam", arch, params, config, prior, payload.get("gamma"), payload.get("best_epoch", 0))


def write_history(path: str, rows: Iterable[Dict[str, Any]]) -> None:
    """Write training history as JSON lines."""
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row) + "\n")


def read_history(path: str) -> List[Dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


@dataclass
class RunRecord:
    """Final metrics, certificate and artifact paths of one run."""
    run_id: str
    config: Dict[str, Any]
    metrics: Dict[str, Any]
    bound: Optional[Dict[str, Any]]
    best_epoch: int
    history_path: str
    checkpoint_path: str
    record_path: str = ""
    grid_id: Optional[str] = None
    created_at: str = field(default_factory=lambda: datetime.utcnow().isoformat())

    @property
    def method(self) -> str:
        return self.config["method"]

    @property
    def seeger_bound(self) -> Optional[float]:
        return None if self.bound is None else self.bound["seeger_bound"]

    @property
    def valid_loss(self) -> Optional[float]:
        return self.metrics.get("valid_loss")

    @property
    def weight_decay(self) -> float:
        return float(self.config.get("weight_decay", 0.0))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        known = set(cls.__dataclass_fields__)
        return cls(**{key: value for key, value in data.items() if key in known})

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2)

    @classmethod
    def load(cls, path: str) -> "RunRecord":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_dict(json.load(handle))


def bound_sample(config: ExperimentConfig, data: TaskData) -> Tuple[np.ndarray, np.ndarray]:
    """The examples a method's bound is computed on, rebuilt from the seed."""
    if config.method == PBGNET_PRE:
        halves = split(data, (0.5, 0.5), config.seed, source="train", names=("pretrain", "train"))
        return halves.view("train")
    if config.method in (PBGNET_L, PBGNET_L_BND, MLP):
        return with_validation(data, config.valid_ratio, config.seed).view("train")
    return data.view("train")


def _test_evaluation(config: ExperimentConfig, params: Any, data: TaskData):
    Xt, yt = data.view("test")
    if config.method == MLP:
        return mlp_evaluate(params, Xt, yt)
    return evaluate(params, Xt, yt, config.mode, config.inference_T, RngStream(config.seed).derive("test"),
                    config.inference_repetitions, config.exact_cap)


def _summarize(state: TrainState, test) -> Dict[str, Any]:
    train = state.final_metrics["train"]
    metrics = {
        "train_error": train["error"],
        "train_error_std": train["error_std"],
        "train_loss": train["loss"],
        "test_error": test.error,
        "test_error_std": test.error_std,
        "test_loss": test.loss,
        "best_epoch": state.best_epoch,
        "epochs_run": state.epoch,
        "lr_final": state.lr,
    }
    if "valid" in state.final_metrics:
        metrics["valid_loss"] = state.final_metrics["valid"]["loss"]
        metrics["valid_error"] = state.final_metrics["valid"]["error"]
    if state.C is not None:
        metrics["C"] = state.C
    if state.final_report is not None:
        metrics["kl"] = state.final_report.kl
    return metrics


def run_experiment(config: ExperimentConfig, data: TaskData, out_dir: str,
                   grid_id: Optional[str] = None) -> RunRecord:
    """
    Run one method end to end and write its artifacts.

    Writes checkpoint.json, history.jsonl, bound.json (bound-carrying methods)
    and record.json under <out_dir>/<run_id>/.

    Args:
        config: Run configuration
        data: Task with train and test splits
        out_dir: Root directory for run artifacts
        grid_id: Grid the run belongs to

    Returns:
        RunRecord
    """
    if data.split_size("train") == 0 or data.split_size("test") == 0:
        raise DataFormatError("The task needs non-empty train and test splits")
    run_id = str(uuid.uuid4())
    run_dir = os.path.join(out_dir, run_id)
    os.makedirs(run_dir, exist_ok=True)
    logger.info("Run %s: %s on %s", run_id, config.method, config.task)

    if config.method == MLP:
        state = fit_mlp(config, data)
    elif config.method == PBGNET_PRE:
        _, state = pretrain_protocol(config, data)
    else:
        state, _ = train_loop(config, data)
    test = _test_evaluation(config, state.params, data)
    metrics = _summarize(state, test)

    arch = config.architecture(data.input_dim)
    checkpoint = Checkpoint("mlp" if config.method == MLP else "bam", arch, state.params, config,
                            state.prior, state.gamma, state.best_epoch)
    checkpoint_path = os.path.join(run_dir, "checkpoint.json")
    history_path = os.path.join(run_dir, "history.jsonl")
    save_checkpoint(checkpoint_path, checkpoint)
    write_history(history_path, state.history)
    bound = None
    if state.final_report is not None:
        bound = state.final_report.to_dict()
        with open(os.path.join(run_dir, "bound.json"), "w", encoding="utf-8") as handle:
            json.dump(bound, handle, indent=2)

    record = RunRecord(run_id, config.to_dict(), metrics, bound, state.best_epoch, history_path,
                       checkpoint_path, os.path.join(run_dir, "record.json"), grid_id)
    record.save(record.record_path)
    logger.info("Run %s finished: test error %.4f, bound %s", run_id, test.error,
                "n/a" if bound is None else f"{bound['seeger_bound']:.4f}")
    return record


def _argmin(records: Sequence[RunRecord], key) -> RunRecord:
    candidates = [record for record in records if key(record) is not None and not math.isnan(key(record))]
    if not candidates:
        raise DataFormatError("No run carries the value the selection rule needs")
    return min(candidates, key=key)


def select_run(records: Sequence[RunRecord], rule: str) -> RunRecord:
    """
    Pick one run among grid cells.

    bound: lowest Seeger bound. valid: lowest validation linear loss.
    hybrid: lowest bound per weight-decay value, then lowest validation loss
    among those.
    """
    if not records:
        raise DataFormatError("Cannot select from an empty set of runs")
    if rule == SELECT_BY_BOUND:
        return _argmin(records, lambda record: record.seeger_bound)
    if rule == SELECT_BY_VALID:
        return _argmin(records, lambda record: record.valid_loss)
    if rule == SELECT_HYBRID:
        decays = sorted({record.weight_decay for record in records})
        finalists = [
            _argmin([record for record in records if record.weight_decay == decay], lambda record: record.seeger_bound)
            for decay in decays
        ]
        return _argmin(finalists, lambda record: record.valid_loss)
    raise ConfigError(f"Unknown selection rule: {rule}")


def selection_report(records: Sequence[RunRecord], method: str, failed: Sequence[Dict[str, Any]] = ()) -> Dict[str, Any]:
    """
    Fold the runs of one method into the selected model and its certificate.

    Args:
        records: Finished runs (other methods are ignored)
        method: Method whose rule applies
        failed: Cells that raised, with their error messages

    Returns:
        Report with the selected run, its metrics and its certificate
    """
    own = [record for record in records if record.method == method]
    rule = SELECTION_RULES[method]
    chosen = select_run(own, rule)
    return {
        "method": method,
        "rule": rule,
        "n_cells": len(own),
        "failed": list(failed),
        "selected": chosen.run_id,
        "config": chosen.config,
        "metrics": chosen.metrics,
        "bound": chosen.bound,
        "multiplicity": chosen.config.get("multiplicity"),
    }


def certify_checkpoint(checkpoint: Checkpoint, data: TaskData, delta: Optional[float] = None,
                       seed: Optional[int] = None) -> BoundReport:
    """
    Recompute the certificate of a checkpoint on its bound sample.

    Args:
        checkpoint: BAM checkpoint with a prior
        data: Task the checkpoint was trained on
        delta: Confidence override
        seed: Seed override for the inference repetitions

    Returns:
        BoundReport
    """
    if checkpoint.kind == MLP or checkpoint.prior is None:
        raise ConfigError("Only aggregate-predictor checkpoints with a prior carry a bound")
    if data.input_dim != checkpoint.architecture.input_dim:
        raise DimensionError(
            f"Checkpoint expects {checkpoint.architecture.input_dim} features, the task has {data.input_dim}"
        )
    config = checkpoint.config if seed is None else checkpoint.config.with_overrides(seed=seed)
    X, y = bound_sample(checkpoint.config, data)
    report, _ = certify(checkpoint.params, checkpoint.prior, X, y, config, delta=delta, epoch=checkpoint.best_epoch)
    return report


def verify_record(record: RunRecord, data: TaskData, tolerance: float = VERIFY_TOLERANCE) -> Dict[str, Any]:
    """
    Re-derive a record's numbers from its checkpoint and the data, and diff them.

    Returns:
        {"run_id", "ok", "checked", "diffs": {field: {"recorded", "recomputed"}}}
    """
    checkpoint = load_checkpoint(record.checkpoint_path)
    recomputed: Dict[str, Any] = {}
    recorded: Dict[str, Any] = {}
    if record.bound is not None:
        report = certify_checkpoint(checkpoint, data).to_dict()
        for name in VERIFIED_BOUND_FIELDS:
            recorded[f"bound.{name}"] = record.bound[name]
            recomputed[f"bound.{name}"] = report[name]
    test = _test_evaluation(checkpoint.config, checkpoint.params, data)
    recomputed.update({"test_loss": test.loss, "test_error": test.error})
    X, y = bound_sample(checkpoint.config, data)
    if checkpoint.kind == MLP:
        train = mlp_evaluate(checkpoint.params, X, y)
    else:
        config = checkpoint.config
        train = evaluate(checkpoint.params, X, y, config.mode, config.inference_T,
                         RngStream(config.seed).derive("certify"), config.inference_repetitions, config.exact_cap)
    recomputed.update({"train_loss": train.loss, "train_error": train.error})
    for name in VERIFIED_METRICS:
        recorded[name] = record.metrics[name]

    diffs = {}
    for name, value in recomputed.items():
        if abs(float(value) - float(recorded[name])) > tolerance:
            diffs[name] = {"recorded": recorded[name], "recomputed": value}
    if diffs:
        logger.warning("Run %s: %d fields differ from their recomputation", record.run_id, len(diffs))
    return {"run_id": record.run_id, "ok": not diffs, "checked": sorted(recomputed), "diffs": diffs}


def _sign_label(s: np.ndarray) -> str:
    return "".join("+" if value > 0 else "-" for value in s)


def decision_surface(params: NetworkParams, extent: Tuple[float, float, float, float] = (-3.0, 3.0, -3.0, 3.0),
                     resolution: int = 50) -> pd.DataFrame:
    """
    Evaluate a two-input predictor on a regular grid.

    Columns: x1, x2, G (aggregate), f (deterministic BAM network at the
    posterior mean) and, for one hidden layer of width at most 3, psi_<s>
    (Ψ_s) and vote_<s> (Ψ_s·erf(w2·s/√(2 d1))) for every sign vector s.

    Args:
        params: Network weights with input dimension 2
        extent: (x1 min, x1 max, x2 min, x2 max)
        resolution: Points per axis

    Returns:
        One row per grid point
    """
    arch = params.architecture
    if arch.input_dim != 2:
        raise DimensionError(f"Decision surfaces need 2 input features, got {arch.input_dim}")
    if resolution < 2:
        raise ConfigError(f"resolution must be at least 2, got {resolution}")
    x1_min, x1_max, x2_min, x2_max = extent
    grid_x1, grid_x2 = np.meshgrid(np.linspace(x1_min, x1_max, resolution), np.linspace(x2_min, x2_max, resolution))
    points = np.column_stack([grid_x1.ravel(), grid_x2.ravel()])
    frame = pd.DataFrame({"x1": points[:, 0], "x2": points[:, 1]})
    frame["G"] = aggregate_forward_exact(params, points).prediction
    if arch.n_layers == 2 and arch.widths[1] <= 3:
        signs, psi, votes = vote_decomposition(params, points)
        for index, s in enumerate(signs):
            label = _sign_label(s)
            frame[f"psi_{label}"] = psi[:, index]
            frame[f"vote_{label}"] = votes[:, index]
    frame["f"] = [bam_forward(params, point) for point in points]
    columns = ["x1", "x2", "G", "f"] + [name for name in frame.columns if name.startswith(("psi_", "vote_"))]
    return frame[columns]
