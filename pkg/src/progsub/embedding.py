"""Linear embeddings: PCA (baseline) and locality-preserving projections
(graph generalized eigenproblem), used to initialize each layer's projection.

Both fits use a fixed sign convention (the largest-magnitude entry of every
projection row is made positive) so repeated fits are bit-identical.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import InputError
from .types import matrix_values

_LPP_RIDGE = 1e-8


@dataclass(frozen=True)
class LinearEmbedding:
    projection: np.ndarray   # (d_out, d_in)
    kind: str                # "pca" | "lpp"
    eigenvalues: np.ndarray
    mean: np.ndarray = None  # subtracted before projecting (pca only)

    def transform(self, feats):
        x = matrix_values(feats)
        if x.shape[0] != self.projection.shape[1]:
            raise InputError(
                f"embedding expects {self.projection.shape[1]} rows, got "
                f"{x.shape[0]}"
            )
        if self.mean is not None:
            x = x - self.mean[:, None]
        return self.projection @ x


def _fix_signs(rows):
    rows = np.array(rows)
    for i in range(rows.shape[0]):
        j = int(np.argmax(np.abs(rows[i])))
        if rows[i, j] < 0:
            rows[i] = -rows[i]
    return rows


def pca_fit(x, d_out):
    """Top principal directions of the mean-centered covariance.

    Rows of the projection are orthonormal eigenvectors; eigenvalues are
    returned in nonincreasing order. The covariance uses the 1/n convention,
    so the mean squared reconstruction error of a rank-d fit equals the sum
    of the discarded eigenvalues.
    """
    values = matrix_values(x)
    d, n = values.shape
    if not (1 <= d_out <= min(d, n)):
        raise InputError(
            f"d_out must be in 1..min(d, n) = {min(d, n)}, got {d_out}"
        )
    mean = values.mean(axis=1)
    centered = values - mean[:, None]
    cov = (centered @ centered.T) / n
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals, kind="stable")[::-1][:d_out]
    projection = _fix_signs(vecs[:, order].T)
    return LinearEmbedding(projection, "pca", vals[order].copy(), mean=mean)


def lpp_fit(x, lap, deg, d_out):
    """Locality-preserving projection from a graph Laplacian.

    Rows a solve the generalized eigenproblem
        (X L X^T) a = lambda (X D X^T) a
    for the d_out smallest eigenvalues, with a small ridge added to X D X^T
    for invertibility. `deg` may be a 1-D degree vector or a diagonal matrix.
    """
    values = matrix_values(x)
    d, n = values.shape
    lap = sp.csr_matrix(lap)
    if lap.shape != (n, n):
        raise InputError(f"Laplacian has shape {lap.shape}, expected {(n, n)}")
    if sp.issparse(deg):
        degrees = np.asarray(deg.diagonal()).ravel()
    else:
        deg = np.asarray(deg, dtype=np.float64)
        degrees = np.diag(deg) if deg.ndim == 2 else deg.ravel()
    if degrees.size != n:
        raise InputError(f"degree vector has length {degrees.size}, expected {n}")
    if np.any(degrees <= 0):
        raise InputError("degree matrix must be positive on the diagonal")

    rank = np.linalg.matrix_rank(values)
    if d_out > rank:
        raise InputError(
            f"d_out={d_out} exceeds the data's numerical rank; achievable "
            f"rank is {rank}"
        )
    a = values @ (lap @ values.T)
    a = (a + a.T) / 2.0
    b = (values * degrees[None, :]) @ values.T
    b = (b + b.T) / 2.0 + _LPP_RIDGE * np.eye(d)
    vals, vecs = scipy.linalg.eigh(a, b)
    projection = _fix_signs(vecs[:, :d_out].T)
    return LinearEmbedding(projection, "lpp", vals[:d_out].copy())
