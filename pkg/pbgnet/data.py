"""
Data Module

This module provides dataset ingestion (MNIST IDX files, CSV tables),
binary task construction, deterministic seeded splits, train-only feature
standardization, synthetic desk-scale tasks and TaskData persistence.
"""

import gzip
import json
import logging
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import ConfigError, DataFormatError
from .math_core import RngStream

logger = logging.getLogger(__name__)

IDX_LABELS_MAGIC = 0x00000801
IDX_IMAGES_MAGIC = 0x00000803

MNIST_FILES = {
    "train_images": ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
    "train_labels": ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
    "test_images": ("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
    "test_labels": ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
}

TRAIN_TEST_RATIOS = (0.75, 0.25)
SYNTHETIC_SIZE = 1000
MANIFEST_VERSION = 1


@dataclass
class RawData:
    """Loaded features and raw (unmapped) labels before a task rule applies."""
    features: np.ndarray
    labels: np.ndarray
    sources: List[str] = field(default_factory=list)
    numeric_columns: Optional[List[int]] = None


@dataclass(frozen=True)
class TaskRule:
    """
    Mapping from raw labels to {-1, +1}.

    Kinds: digit_pair (a → +1, b → −1), low_vs_high (0–4 → +1, 5–9 → −1) and
    csv_label_column (positive values → +1, everything else → −1).
    """
    kind: str
    positive: Tuple[Any, ...] = ()
    negative: Tuple[Any, ...] = ()
    column: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("digit_pair", "low_vs_high", "csv_label_column"):
            raise ConfigError(f"Unknown task rule kind: {self.kind}")
        if self.kind == "digit_pair" and set(self.positive) & set(self.negative):
            raise ConfigError(f"A digit pair needs two distinct digits, got {self.positive} and {self.negative}")

    @classmethod
    def digit_pair(cls, a: int, b: int) -> "TaskRule":
        return cls("digit_pair", (int(a),), (int(b),))

    @classmethod
    def low_vs_high(cls) -> "TaskRule":
        return cls("low_vs_high", (0, 1, 2, 3, 4), (5, 6, 7, 8, 9))

    @classmethod
    def csv_label_column(cls, column: str, positive_values: Sequence[Any]) -> "TaskRule":
        return cls("csv_label_column", tuple(positive_values), (), column)

    def apply(self, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Select the rows the rule covers and map them to ±1.

        Returns:
            (boolean row mask, labels of the selected rows)
        """
        is_positive = np.isin(labels, self.positive)
        if self.kind == "csv_label_column":
            mask = np.ones(labels.shape[0], dtype=bool)
        else:
            mask = is_positive | np.isin(labels, self.negative)
        if not np.any(is_positive & mask):
            raise DataFormatError(f"No example of the positive class {self.positive} in the data")
        if not np.any(~is_positive & mask):
            raise DataFormatError(f"No example of the negative class for rule {self.kind}")
        return mask, np.where(is_positive[mask], 1.0, -1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "positive": list(self.positive), "negative": list(self.negative),
                "column": self.column}


@dataclass
class TaskData:
    """
    Binary classification task: features, ±1 labels and named index splits.

    Training code only ever receives views of the splits it is given.
    """
    features: np.ndarray
    labels: np.ndarray
    splits: Dict[str, np.ndarray] = field(default_factory=dict)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise DataFormatError(
                f"Features of shape {self.features.shape} do not match {self.labels.shape[0]} labels"
            )
        if not np.all(np.isfinite(self.features)):
            raise DataFormatError("Feature rows must be finite")
        if not np.all(np.abs(self.labels) == 1.0):
            raise DataFormatError("Labels must be -1 or +1")
        self.splits = {name: np.asarray(idx, dtype=np.int64) for name, idx in self.splits.items()}
        seen = np.zeros(self.n, dtype=bool)
        for name, idx in self.splits.items():
            if idx.size and (idx.min() < 0 or idx.max() >= self.n):
                raise DataFormatError(f"Split '{name}' holds indices outside [0, {self.n})")
            if np.any(seen[idx]) or np.unique(idx).size != idx.size:
                raise DataFormatError(f"Split '{name}' overlaps another split")
            seen[idx] = True

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def has_split(self, name: str) -> bool:
        return name in self.splits

    def split_size(self, name: str) -> int:
        return int(self.splits[name].size) if name in self.splits else 0

    def view(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        """Features and labels of one split."""
        if name not in self.splits:
            raise DataFormatError(f"Unknown split '{name}', available: {sorted(self.splits)}")
        idx = self.splits[name]
        if idx.size == 0:
            raise DataFormatError(f"Split '{name}' is empty")
        return self.features[idx], self.labels[idx]

    def save(self, path: str) -> str:
        """
        Write the arrays to <path>.npz and the manifest to <path>.json.

        Returns:
            Manifest path
        """
        base = path[:-5] if path.endswith(".json") else path
        arrays = {"features": self.features, "labels": self.labels}
        arrays.update({f"split_{name}": idx for name, idx in self.splits.items()})
        np.savez(base + ".npz", **arrays)
        manifest = {
            "version": MANIFEST_VERSION,
            "arrays": os.path.basename(base) + ".npz",
            "splits": {name: int(idx.size) for name, idx in self.splits.items()},
            "provenance": self.provenance,
        }
        with open(base + ".json", "w", encoding="utf-8") as handle:
            json.dump(manifest, handle, indent=2)
        return base + ".json"

    @classmethod
    def load(cls, manifest_path: str) -> "TaskData":
        with open(manifest_path, "r", encoding="utf-8") as handle:
            manifest = json.load(handle)
        if manifest.get("version") != MANIFEST_VERSION:
            raise DataFormatError(f"Unsupported task manifest version: {manifest.get('version')}")
        arrays_path = os.path.join(os.path.dirname(manifest_path), manifest["arrays"])
        with np.load(arrays_path) as arrays:
            splits = {name: arrays[f"split_{name}"] for name in manifest["splits"]}
            return cls(arrays["features"], arrays["labels"], splits, manifest.get("provenance", {}))


def parse_idx(data: bytes) -> np.ndarray:
    """
    Decode an IDX container (big-endian magic, dimension sizes, raw bytes).

    Args:
        data: File contents

    Returns:
        Images as (n, rows*cols) float64 rows scaled to [0, 1], or labels as int64
    """
    if len(data) < 4:
        raise DataFormatError("IDX payload too short for a magic number")
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in (IDX_LABELS_MAGIC, IDX_IMAGES_MAGIC):
        raise DataFormatError(f"Invalid IDX magic number: 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise DataFormatError("IDX header is truncated")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    expected = math.prod(dims)
    payload = len(data) - header
    if payload < expected:
        raise DataFormatError(f"IDX payload is truncated: {payload} bytes for dimensions {dims}")
    if payload > expected:
        raise DataFormatError(f"IDX payload has {payload - expected} bytes beyond dimensions {dims}")
    values = np.frombuffer(data, dtype=np.uint8, count=expected, offset=header)
    if magic == IDX_LABELS_MAGIC:
        return values.astype(np.int64)
    return values.reshape(dims[0], math.prod(dims[1:])).astype(np.float64) / 255.0


def load_idx(path: str) -> np.ndarray:
    """Read and decode an IDX file, gzip-compressed when it ends in .gz."""
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as handle:
        return parse_idx(handle.read())


def _find_mnist_file(data_dir: str, names: Sequence[str]) -> Optional[str]:
    for directory in (data_dir, os.path.join(data_dir, "mnist")):
        for name in names:
            for candidate in (name, name + ".gz"):
                path = os.path.join(directory, candidate)
                if os.path.exists(path):
                    return path
    return None


def mnist_available(data_dir: str) -> bool:
    return all(_find_mnist_file(data_dir, names) for names in MNIST_FILES.values())


def load_mnist(data_dir: str) -> RawData:
    """
    Load the MNIST training and test files and pool them.

    Args:
        data_dir: Directory holding the four IDX files (optionally under mnist/)

    Returns:
        RawData with 784 features in [0, 1] and digit labels
    """
    paths = {}
    for key, names in MNIST_FILES.items():
        path = _find_mnist_file(data_dir, names)
        if path is None:
            raise DataFormatError(f"MNIST file {names[0]} not found under {data_dir}")
        paths[key] = path
    images = [load_idx(paths["train_images"]), load_idx(paths["test_images"])]
    labels = [load_idx(paths["train_labels"]), load_idx(paths["test_labels"])]
    for image_block, label_block in zip(images, labels):
        if image_block.shape[0] != label_block.shape[0]:
            raise DataFormatError(f"{image_block.shape[0]} images for {label_block.shape[0]} labels")
    logger.info("Loaded %d MNIST images from %s", sum(block.shape[0] for block in images), data_dir)
    return RawData(np.concatenate(images), np.concatenate(labels), sorted(paths.values()))


def load_csv(path: str, label_column: str, delimiter: str = ",", drop_columns: Sequence[str] = (),
             drop_first: int = 0) -> RawData:
    """
    Load a CSV table with a header row.

    Object columns are one-hot encoded; numeric columns are kept as is and
    remembered for train-only standardization. Rows with missing values are
    dropped after the requested columns are removed.

    Args:
        path: CSV file
        label_column: Name of the label column
        delimiter: Field delimiter
        drop_columns: Feature columns to remove by name
        drop_first: Number of leading feature columns to remove

    Returns:
        RawData with raw label values
    """
    frame = pd.read_csv(path, sep=delimiter, skipinitialspace=True, na_values=["?"])
    frame.columns = [str(column).strip() for column in frame.columns]
    if label_column not in frame.columns:
        raise DataFormatError(f"Label column '{label_column}' not found in {path}")
    feature_columns = [column for column in frame.columns if column != label_column]
    dropped = set(drop_columns) | set(feature_columns[:drop_first])
    frame = frame.drop(columns=sorted(dropped)).dropna()
    if frame.empty:
        raise DataFormatError(f"No complete rows left in {path}")
    labels = frame[label_column].astype(str).str.strip().to_numpy()
    features = frame.drop(columns=[label_column])
    numeric = features.select_dtypes(include="number").columns.tolist()
    encoded = pd.get_dummies(features, dtype=np.float64)
    numeric_columns = [encoded.columns.get_loc(column) for column in numeric]
    logger.info("Loaded %d rows and %d encoded features from %s", encoded.shape[0], encoded.shape[1], path)
    return RawData(encoded.to_numpy(dtype=np.float64), labels, [path], numeric_columns)


def build_task(raw: RawData, rule: TaskRule, name: str = "") -> TaskData:
    """
    Apply a task rule to loaded data.

    Args:
        raw: Loaded data
        rule: Label mapping
        name: Task name kept in the provenance

    Returns:
        TaskData without splits
    """
    mask, labels = rule.apply(raw.labels)
    provenance = {"task": name, "rule": rule.to_dict(), "sources": list(raw.sources)}
    if raw.numeric_columns is not None:
        provenance["numeric_columns"] = list(raw.numeric_columns)
    return TaskData(raw.features[mask], labels, {}, provenance)


def _default_names(count: int) -> Tuple[str, ...]:
    if count == 2:
        return ("train", "test")
    if count == 3:
        return ("train", "valid", "test")
    raise ConfigError(f"Name the {count} split parts explicitly")


def split(task: TaskData, ratios: Sequence[float], seed: int, source: Optional[str] = None,
          names: Optional[Sequence[str]] = None) -> TaskData:
    """
    Seeded permutation followed by a contiguous partition.

    Part sizes are floor(ratio * n) except the last, which takes the rest.

    Args:
        task: Task to split
        ratios: Fractions summing to 1
        seed: Split seed
        source: Existing split to partition (all rows when None); it is replaced
        names: Names of the new parts

    Returns:
        New TaskData sharing the feature arrays
    """
    ratios = [float(r) for r in ratios]
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"Split ratios must be positive and sum to 1, got {ratios}")
    names = tuple(names) if names is not None else _default_names(len(ratios))
    if len(names) != len(ratios):
        raise ConfigError(f"{len(names)} names for {len(ratios)} ratios")
    if source is not None and not task.has_split(source):
        raise DataFormatError(f"Unknown split '{source}', available: {sorted(task.splits)}")
    pool = np.arange(task.n) if source is None else task.splits[source]
    order = pool[RngStream(seed).derive("split", source or "all").permutation(pool.size)]
    sizes = [int(math.floor(r * pool.size + 1e-9)) for r in ratios[:-1]]
    sizes.append(pool.size - sum(sizes))
    splits = {name: idx for name, idx in task.splits.items() if name != source}
    offset = 0
    for name, size in zip(names, sizes):
        if size == 0:
            raise DataFormatError(f"Split '{name}' would be empty ({pool.size} rows, ratios {ratios})")
        splits[name] = order[offset:offset + size]
        offset += size
    provenance = dict(task.provenance)
    provenance["splits"] = list(provenance.get("splits", [])) + [
        {"source": source, "ratios": ratios, "names": list(names), "seed": int(seed)}
    ]
    return TaskData(task.features, task.labels, splits, provenance)


def with_validation(task: TaskData, ratio: float, seed: int) -> TaskData:
    """Carve a validation split out of the training split unless one exists."""
    if task.has_split("valid"):
        return task
    return split(task, (1.0 - ratio, ratio), seed, source="train", names=("train", "valid"))


def standardize(task: TaskData, columns: Optional[Sequence[int]] = None) -> TaskData:
    """
    Standardize feature columns with mean and std of the training split only.

    Args:
        task: Task with a train split
        columns: Columns to scale (the task's numeric columns, or all)

    Returns:
        New TaskData with scaled features
    """
    if columns is None:
        columns = task.provenance.get("numeric_columns", list(range(task.input_dim)))
    columns = list(columns)
    features = task.features.copy()
    if columns:
        train = features[task.splits["train"]][:, columns]
        mean = train.mean(axis=0)
        std = train.std(axis=0)
        std[std == 0] = 1.0
        features[:, columns] = (features[:, columns] - mean) / std
    provenance = dict(task.provenance)
    provenance["standardized_columns"] = columns
    return TaskData(features, task.labels, task.splits, provenance)


def make_blobs(n: int, seed: int, spread: float = 1.0) -> TaskData:
    """Two isotropic Gaussian blobs centred at ±(2, 2); the +(2, 2) blob is labelled +1."""
    if n < 2:
        raise DataFormatError(f"Need at least 2 examples, got {n}")
    rng = RngStream(seed).derive("blobs")
    labels = np.where(np.arange(n) < n // 2, 1.0, -1.0)
    features = labels[:, None] * 2.0 + spread * rng.normal((n, 2))
    return TaskData(features, labels, {}, {"task": "blobs", "n": n, "seed": int(seed)})


def make_moons(n: int, seed: int, noise: float = 0.1) -> TaskData:
    """Two interleaved half circles centred on the origin; the upper moon is labelled +1."""
    if n < 2:
        raise DataFormatError(f"Need at least 2 examples, got {n}")
    rng = RngStream(seed).derive("moons")
    upper = n // 2
    angles = np.pi * rng.uniform(n)
    features = np.empty((n, 2))
    features[:upper, 0] = np.cos(angles[:upper])
    features[:upper, 1] = np.sin(angles[:upper])
    features[upper:, 0] = 1.0 - np.cos(angles[upper:])
    features[upper:, 1] = 0.5 - np.sin(angles[upper:])
    features += noise * rng.normal((n, 2)) - np.array([0.5, 0.25])
    labels = np.where(np.arange(n) < upper, 1.0, -1.0)
    return TaskData(features, labels, {}, {"task": "moons", "n": n, "seed": int(seed)})


MNIST_TASKS = {
    "mnist17": TaskRule.digit_pair(1, 7),
    "mnist49": TaskRule.digit_pair(4, 9),
    "mnist56": TaskRule.digit_pair(5, 6),
    "mnistLH": TaskRule.low_vs_high(),
}

CSV_TASKS = {
    "adult": {"file": "adult.csv", "rule": TaskRule.csv_label_column("income", (">50K", ">50K.")), "drop_first": 0},
    "ads": {"file": "ad.csv", "rule": TaskRule.csv_label_column("label", ("ad.",)), "drop_first": 4},
}

SYNTHETIC_TASKS = {"blobs": make_blobs, "moons": make_moons}

TASK_NAMES = sorted(MNIST_TASKS) + sorted(CSV_TASKS) + sorted(SYNTHETIC_TASKS)


def load_task(name: str, data_dir: str, seed: int) -> TaskData:
    """
    Build a named task with its 75/25 train/test split.

    Names: mnist17, mnist49, mnist56, mnistLH, adult, ads, blobs[:n],
    moons[:n], or the path of a saved TaskData manifest (.json).

    Args:
        name: Task name
        data_dir: Dataset root
        seed: Seed for synthetic generation and the split

    Returns:
        TaskData with train and test splits
    """
    if name.endswith(".json"):
        return TaskData.load(name)
    base, _, size = name.partition(":")
    if base in SYNTHETIC_TASKS:
        try:
            n = int(size) if size else SYNTHETIC_SIZE
        except ValueError:
            raise ConfigError(f"Invalid synthetic task size in '{name}'")
        return split(SYNTHETIC_TASKS[base](n, seed), TRAIN_TEST_RATIOS, seed)
    if base in MNIST_TASKS:
        return split(build_task(load_mnist(data_dir), MNIST_TASKS[base], base), TRAIN_TEST_RATIOS, seed)
    if base in CSV_TASKS:
        source = CSV_TASKS[base]
        rule = source["rule"]
        raw = load_csv(os.path.join(data_dir, source["file"]), rule.column, drop_first=source["drop_first"])
        return standardize(split(build_task(raw, rule, base), TRAIN_TEST_RATIOS, seed))
    raise ConfigError(f"Unknown task '{name}', expected one of {TASK_NAMES} or a manifest path")
