"""
Math Core Module

This module provides the numerical primitives everything else builds on:
the Gauss error function and its derivative, finite-value checks for
vectors and matrices, and reproducible random-number streams.

Vectors and matrices are plain float64 numpy arrays; matrices are row-major
with one row per output neuron.
"""

import hashlib
from typing import Any, Optional

import numpy as np
from scipy import special

from .errors import DimensionError, NumericError

TWO_OVER_SQRT_PI = 2.0 / np.sqrt(np.pi)
_MASK64 = (1 << 64) - 1


def erf(x: Any) -> Any:
    """
    Gauss error function, elementwise.

    Args:
        x: Finite real or array of reals

    Returns:
        erf(x), odd and strictly increasing with range (-1, 1)
    """
    return special.erf(x)


def erf_prime(x: Any) -> Any:
    """Derivative of erf: (2/sqrt(pi)) * exp(-x^2)."""
    return TWO_OVER_SQRT_PI * np.exp(-np.square(x))


def check_finite(values: np.ndarray, what: str = "array") -> np.ndarray:
    """
    Reject arrays holding NaN or infinite entries.

    Args:
        values: Array to check
        what: Name used in the error message

    Returns:
        The same array, for chaining
    """
    if not np.all(np.isfinite(values)):
        bad = int(np.size(values) - np.count_nonzero(np.isfinite(values)))
        raise NumericError(f"{what} contains {bad} non-finite entries")
    return values


def as_vector(values: Any, dim: Optional[int] = None, what: str = "vector") -> np.ndarray:
    """
    Build a finite float64 vector.

    Args:
        values: Sequence or array of reals
        dim: Expected dimension, checked when given
        what: Name used in error messages

    Returns:
        One-dimensional float64 array (a copy)
    """
    vector = np.array(values, dtype=np.float64)
    if vector.ndim != 1:
        raise DimensionError(f"{what} must be one-dimensional, got shape {vector.shape}")
    if dim is not None and vector.shape[0] != dim:
        raise DimensionError(f"{what} has dimension {vector.shape[0]}, expected {dim}")
    return check_finite(vector, what)


def as_matrix(values: Any, shape: Optional[tuple] = None, what: str = "matrix") -> np.ndarray:
    """
    Build a finite float64 row-major matrix.

    Args:
        values: Nested sequence or array of reals
        shape: Expected (rows, columns), checked when given
        what: Name used in error messages

    Returns:
        Two-dimensional C-contiguous float64 array (a copy)
    """
    matrix = np.array(values, dtype=np.float64, order="C")
    if matrix.ndim != 2:
        raise DimensionError(f"{what} must be two-dimensional, got shape {matrix.shape}")
    if shape is not None and matrix.shape != tuple(shape):
        raise DimensionError(f"{what} has shape {matrix.shape}, expected {tuple(shape)}")
    return check_finite(matrix, what)


def derive_seed(seed: int, *labels: Any) -> int:
    """
    Derive a 64-bit sub-seed by hashing a component label and indices.

    Args:
        seed: Parent seed
        *labels: Component name followed by any indices

    Returns:
        Non-negative 64-bit integer
    """
    text = ":".join([str(int(seed) & _MASK64)] + [str(label) for label in labels])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class RngStream:
    """
    Reproducible random stream identified by (seed, stream id).

    Backed by the counter-based Philox generator keyed from both integers,
    so identical pairs replay identical sequences on every platform and
    distinct stream ids give independent streams. A stream is owned by a
    single task; derive one per logical task instead of sharing.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        sequence = np.random.SeedSequence([self.seed, self.stream_id])
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def derive(self, label: str, *indices: Any) -> "RngStream":
        """
        Create an independent child stream for a labelled sub-task.

        Args:
            label: Component name, e.g. "shuffle"
            *indices: Indices such as epoch or example number

        Returns:
            New stream with the same seed and a hashed stream id
        """
        return RngStream(self.seed, derive_seed(self.stream_id, label, *indices))

    def normal(self, size: Any) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, size: Any) -> np.ndarray:
        return self.generator.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def gaussian_sample(rng: RngStream, dim: int) -> np.ndarray:
    """
    Draw i.i.d. standard normal entries.

    Args:
        rng: Stream to advance
        dim: Number of entries (>= 1)

    Returns:
        Vector of length dim
    """
    if dim < 1:
        raise DimensionError(f"dim must be at least 1, got {dim}")
    return rng.normal(dim)
