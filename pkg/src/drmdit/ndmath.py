"""Gaussian kernel Gram matrices and small dense-matrix helpers.

All arrays are float64 numpy arrays, row-major. Kernel matrices are built
with a fixed summation/broadcast order so repeated calls are bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegeneracyError, ParameterError

RIDGE_EPSILON = 1e-6


@dataclass(frozen=True)
class GramMatrix:
    """Pairwise Gaussian kernel evaluations over one sample set."""

    raw: np.ndarray  # N x N, symmetric, positive diagonal
    sigma: float


@dataclass(frozen=True)
class NormalizedGram:
    """Trace-normalized Gram matrix: unit trace, diagonal exactly 1/N."""

    mat: np.ndarray


def _as_matrix(x, name="input"):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ParameterError(f"{name} must be 2-d, got shape {a.shape}")
    return a


def gaussian_kernel_value(sq_dist, sigma, dim):
    """(2*pi*sigma^2)^(-dim/2) * exp(-sq_dist / (2*sigma^2))."""
    norm = (2.0 * np.pi * sigma * sigma) ** (-0.5 * dim)
    return norm * np.exp(-sq_dist / (2.0 * sigma * sigma))


def pairwise_sq_dists(a, b):
    """Squared Euclidean distances between rows of a and rows of b."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def gaussian_gram(samples, sigma) -> GramMatrix:
    """Gram matrix of the isotropic Gaussian kernel over sample rows.

    raw[i, j] = (2*pi*sigma^2)^(-d/2) * exp(-||x_i - x_j||^2 / (2*sigma^2))
    """
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    x = _as_matrix(samples, "samples")
    if x.shape[0] < 1 or x.shape[1] < 1:
        raise ParameterError(f"samples must be N>=1 x d>=1, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite values in kernel input")
    sq = pairwise_sq_dists(x, x)
    # exact zeros on the diagonal regardless of rounding in the broadcast
    np.fill_diagonal(sq, 0.0)
    raw = gaussian_kernel_value(sq, float(sigma), x.shape[1])
    raw = 0.5 * (raw + raw.T)  # kill last-bit asymmetry from the subtraction order
    return GramMatrix(raw=raw, sigma=float(sigma))


def normalize_gram(g: GramMatrix) -> NormalizedGram:
    """Trace-normalize: mat[i,j] = raw[i,j] / (N * sqrt(raw_ii * raw_jj))."""
    raw = g.raw
    n = raw.shape[0]
    diag = np.diag(raw)
    if np.any(diag <= 0):
        raise DegeneracyError("non-positive diagonal entry in Gram matrix")
    scale = np.sqrt(diag)
    mat = raw / (n * np.outer(scale, scale))
    np.fill_diagonal(mat, 1.0 / n)
    return NormalizedGram(mat=mat)


def hadamard_normalized(a, b):
    """Elementwise product renormalized to unit trace."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape != b.shape:
        raise ParameterError(f"shape mismatch {a.shape} vs {b.shape}")
    prod = a * b
    tr = float(np.trace(prod))
    if tr <= 0:
        raise DegeneracyError("Hadamard product has non-positive trace")
    return prod / tr


def ridge_inverse(r, epsilon=RIDGE_EPSILON):
    """Inverse of (r + epsilon*I) for square symmetric r."""
    r = _as_matrix(r, "r")
    k = r.shape[0]
    if r.shape[1] != k:
        raise ParameterError(f"expected square matrix, got {r.shape}")
    if epsilon < 0:
        raise ParameterError("epsilon must be non-negative")
    ridged = r + epsilon * np.eye(k)
    try:
        inv = np.linalg.inv(ridged)
    except np.linalg.LinAlgError as exc:
        raise DegeneracyError(f"matrix singular after ridge {epsilon}") from exc
    # inv() can silently return garbage for nearly-singular input; check it
    resid = np.max(np.abs(ridged @ inv - np.eye(k)))
    if not np.isfinite(resid) or resid > 1e-6:
        raise DegeneracyError(
            f"matrix effectively singular after ridge {epsilon} (residual {resid:.2e})"
        )
    return 0.5 * (inv + inv.T)
