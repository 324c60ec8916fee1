"""Graph construction: kNN heat-kernel graphs, the segment-membership
alignment graph, the fused two-stream block graph, and Laplacians.

All adjacency matrices are stored sparse (CSR built from coordinate lists);
dense conversion happens only inside small solves and tests.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .errors import InputError
from .types import matrix_values

_SYM_TOL = 1e-10


def _check_symmetric(w, name):
    gap = abs(w - w.T)
    if gap.count_nonzero() and gap.max() > _SYM_TOL:
        raise InputError(f"{name} is asymmetric beyond {_SYM_TOL}")


def knn_heat_graph(feats, k, sigma):
    """Heat-kernel weights over mutual-ized k-nearest-neighbor pairs.

    W[i, j] = exp(-||x_i - x_j||^2 / (2 sigma^2)) when j is one of i's k
    Euclidean nearest neighbors, then W <- max(W, W.T); diagonal forced to 0.
    """
    x = matrix_values(feats)
    n = x.shape[1]
    if not (1 <= k < n):
        raise InputError(f"need 1 <= k < n, got k={k} for n={n} samples")
    if not (sigma > 0):
        raise InputError(f"sigma must be > 0, got {sigma}")
    d2 = cdist(x.T, x.T, "sqeuclidean")
    np.fill_diagonal(d2, np.inf)
    # stable sort keeps neighbor choice index-deterministic under ties
    neigh = np.argsort(d2, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = neigh.ravel()
    weights = np.exp(-d2[rows, cols] / (2.0 * sigma * sigma))
    w = sp.coo_matrix((weights, (rows, cols)), shape=(n, n)).tocsr()
    w = w.maximum(w.T)
    w.setdiag(0.0)
    w.eliminate_zeros()
    return w


def alignment_graph(segment_ids):
    """Binary graph linking every pair of pixels that share a segment.

    Uses per-pixel stream indexing: entry (i, j) is 1 iff pixel i and pixel j
    belong to the same segment, including i == j. Accepts a Segmentation or
    a per-pixel id array.
    """
    segment_ids = getattr(segment_ids, "labels", segment_ids)
    ids = np.asarray(segment_ids, dtype=np.int64).ravel()
    if ids.size == 0:
        raise InputError("segment id list is empty")
    rows = []
    cols = []
    order = np.argsort(ids, kind="stable")
    sorted_ids = ids[order]
    boundaries = np.flatnonzero(np.diff(sorted_ids)) + 1
    for members in np.split(order, boundaries):
        grid = np.meshgrid(members, members, indexing="ij")
        rows.append(grid[0].ravel())
        cols.append(grid[1].ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    n = ids.size
    w = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    return w.tocsr()


def laplacian(w):
    """Combinatorial Laplacian L = D - W with D the diagonal of row sums."""
    w = sp.csr_matrix(w)
    if w.shape[0] != w.shape[1]:
        raise InputError(f"weight matrix must be square, got {w.shape}")
    if w.nnz and w.data.min() < 0:
        raise InputError("graph weights must be nonnegative")
    _check_symmetric(w, "weight matrix")
    degrees = np.asarray(w.sum(axis=1)).ravel()
    return (sp.diags(degrees) - w).tocsr()


@dataclass(frozen=True)
class GraphBundle:
    """The three n x n blocks plus the fused 2n x 2n graph and Laplacian."""

    wp: sp.csr_matrix
    wsp: sp.csr_matrix
    wa: sp.csr_matrix
    wf: sp.csr_matrix
    lf: sp.csr_matrix

    @property
    def fused_degrees(self):
        return np.asarray(self.wf.sum(axis=1)).ravel()


def assemble_fused(wp, wsp, wa):
    """Stack the pixel, stream, and alignment blocks into the fused graph.

    Layout: [[wp, wa], [wa, wsp]]; the fused Laplacian is D - W over that
    block matrix.
    """
    wp, wsp, wa = (sp.csr_matrix(m) for m in (wp, wsp, wa))
    n = wp.shape[0]
    for name, m in (("wp", wp), ("wsp", wsp), ("wa", wa)):
        if m.shape != (n, n):
            raise InputError(f"{name} has shape {m.shape}, expected {(n, n)}")
        if m.nnz and m.data.min() < 0:
            raise InputError(f"{name} has negative weights")
        _check_symmetric(m, name)
    wf = sp.bmat([[wp, wa], [wa, wsp]], format="csr")
    return GraphBundle(wp=wp, wsp=wsp, wa=wa, wf=wf, lf=laplacian(wf))


def coordinate_dump(w):
    """Debug dump: one 'i j weight' line per stored entry, sorted by (i, j)."""
    coo = sp.coo_matrix(w)
    triples = sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
    return "".join(f"{i} {j} {v!r}\n" for i, j, v in triples)
