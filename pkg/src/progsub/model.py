"""Multi-layer subspace model: greedy layerwise pre-training followed by
alternating fine-tuning of the label readout and every layer projection.

The trained artifact is a ProjectionStack: an ordered chain of projections
T_1 ... T_m plus a linear readout P mapping the deepest subspace to one-hot
class scores. Training minimizes

    1/2 * sum_l ||X_{l-1} - T_l' T_l X_{l-1}||^2          (reconstruction)
  + alpha/2 * ||Y - P T_m ... T_1 X||^2                   (prediction)
  + beta/2  * sum_l tr(T_l X_{l-1} L X_{l-1}' T_l')       (graph alignment)
  + gamma/2 * ||P||^2                                     (readout ridge)

over the two-stream training matrix X (pixel block + superpixel stream),
subject to every layer's embedded features being nonnegative with columns
in the unit ball. Unlabeled columns simply drop out of the prediction term.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .embedding import lpp_fit
from .errors import InputError, NumericalError
from .graphs import alignment_graph, assemble_fused, knn_heat_graph
from .pretrain import (RIDGE, compute_graph_gram, pretrain_layer, run_admm)
from .superpixels import Segmentation
from .types import (AdmmConfig, FeatureMatrix, matrix_values, one_hot_encode,
                    two_stream_concat)


@dataclass(frozen=True)
class ProjectionStack:
    """Ordered layer projections plus the optional label readout."""

    projections: tuple
    readout: np.ndarray = None

    def __post_init__(self):
        mats = tuple(np.array(p, dtype=np.float64) for p in self.projections)
        if not mats:
            raise InputError("a projection stack needs at least one layer")
        for l, m in enumerate(mats):
            if m.ndim != 2 or not np.all(np.isfinite(m)):
                raise InputError(f"layer {l + 1} projection is not a finite matrix")
            if l > 0 and m.shape[1] != mats[l - 1].shape[0]:
                raise InputError(
                    f"layer {l + 1} expects {m.shape[1]} inputs but layer {l} "
                    f"produces {mats[l - 1].shape[0]}"
                )
            m.setflags(write=False)
        readout = self.readout
        if readout is not None:
            readout = np.array(readout, dtype=np.float64)
            if readout.ndim != 2 or readout.shape[1] != mats[-1].shape[0]:
                raise InputError(
                    f"readout shape {readout.shape} does not match top "
                    f"dimension {mats[-1].shape[0]}"
                )
            if not np.all(np.isfinite(readout)):
                raise InputError("readout is not finite")
            readout.setflags(write=False)
        object.__setattr__(self, "projections", mats)
        object.__setattr__(self, "readout", readout)

    @property
    def depth(self):
        return len(self.projections)

    @property
    def input_dim(self):
        return self.projections[0].shape[1]

    @property
    def output_dim(self):
        return self.projections[-1].shape[0]


def chain_apply(projections, values):
    out = values
    for p in projections:
        out = p @ out
    return out


def transform(stack, x_new):
    """Project new columns through every layer (pixel block alone suffices)."""
    values = matrix_values(x_new)
    if values.shape[0] != stack.input_dim:
        raise InputError(
            f"stack expects {stack.input_dim} feature rows, got {values.shape[0]}"
        )
    out = chain_apply(stack.projections, values)
    kind = x_new.kind if isinstance(x_new, FeatureMatrix) else "pixel"
    return FeatureMatrix(out, kind)


def _mask_columns(values, labeled_cols):
    if labeled_cols is None:
        return values
    return values[:, labeled_cols]


def objective_value(stack, xt, yt, lf, hp, labeled_cols=None):
    """Full training objective at the current stack (readout required)."""
    if stack.readout is None:
        raise InputError("objective needs a fitted readout")
    x = matrix_values(xt)
    y = np.asarray(yt, dtype=np.float64)
    recon = 0.0
    graph = 0.0
    cur = x
    for proj in stack.projections:
        emb = proj @ cur
        resid = cur - proj.T @ emb
        recon += float(np.sum(resid * resid))
        if hp.beta != 0.0 and lf is not None:
            gram = compute_graph_gram(cur, lf)
            graph += float(np.sum((proj @ gram) * proj))
        cur = emb
    pred = _mask_columns(stack.readout @ cur, labeled_cols) - _mask_columns(
        y, labeled_cols
    )
    predict = float(np.sum(pred * pred))
    ridge = float(np.sum(stack.readout * stack.readout))
    return (0.5 * recon + 0.5 * hp.alpha * predict + 0.5 * hp.beta * graph
            + 0.5 * hp.gamma * ridge)


def fit_readout(projections, xt, yt, alpha, gamma, labeled_cols=None):
    """Ridge regression of the one-hot targets on the deepest features.

    P = (alpha * Y V') (alpha * V V' + gamma I)^{-1} with V the top-layer
    features of the (labeled) training columns.
    """
    v = _mask_columns(chain_apply(projections, matrix_values(xt)), labeled_cols)
    y = _mask_columns(np.asarray(yt, dtype=np.float64), labeled_cols)
    d = v.shape[0]
    lhs = alpha * (v @ v.T) + (gamma + RIDGE) * np.eye(d)
    rhs = alpha * (y @ v.T)
    try:
        return scipy.linalg.solve(lhs, rhs.T, assume_a="pos").T
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("singular readout system") from exc


def update_features_supervised(state, x, readout_chain, yt, alpha,
                               labeled_cols=None):
    """Reconstruction-features update with the prediction term added.

    For labeled columns:
        (alpha R'R + GG' + mu I)^{-1} (alpha R'Y + GX + mu TX - D1)
    with R the composed downstream readout; unlabeled columns drop the
    alpha terms.
    """
    mu = state.penalty
    g = state.decoder
    r = readout_chain
    y = np.asarray(yt, dtype=np.float64)
    base_lhs = g @ g.T + (mu + RIDGE) * np.eye(g.shape[0])
    base_rhs = g @ x + mu * (state.proj @ x) - state.dual_feats
    sup_lhs = base_lhs + alpha * (r.T @ r)
    if labeled_cols is None:
        return _solve(sup_lhs, base_rhs + alpha * (r.T @ y))
    labeled_cols = np.asarray(labeled_cols, dtype=bool)
    out = np.empty_like(base_rhs)
    out[:, labeled_cols] = _solve(
        sup_lhs,
        base_rhs[:, labeled_cols] + alpha * (r.T @ y[:, labeled_cols]),
    )
    if not labeled_cols.all():
        out[:, ~labeled_cols] = _solve(base_lhs, base_rhs[:, ~labeled_cols])
    return out


def _solve(lhs, rhs):
    try:
        return scipy.linalg.solve(lhs, rhs, assume_a="pos")
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError("singular system in feature update") from exc


def layer_objective(proj, x_prev, readout_chain, yt, lf, alpha, beta,
                    labeled_cols=None):
    """One layer's fine-tuning objective with other layers held fixed."""
    x = matrix_values(x_prev)
    emb = proj @ x
    resid = x - proj.T @ emb
    value = 0.5 * float(np.sum(resid * resid))
    pred = _mask_columns(readout_chain @ emb, labeled_cols) - _mask_columns(
        np.asarray(yt, dtype=np.float64), labeled_cols
    )
    value += 0.5 * alpha * float(np.sum(pred * pred))
    if beta != 0.0 and lf is not None:
        gram = compute_graph_gram(x, lf)
        value += 0.5 * beta * float(np.sum((proj @ gram) * proj))
    return value


def finetune_projection(layer, stack, xt, yt, lf, hp, cfg=None,
                        labeled_cols=None, x_prev=None):
    """Re-solve one layer's projection with every other layer fixed.

    Runs the same ADMM loop as pre-training with the prediction term wired
    into the features update and the graph weight set to beta. The candidate
    is accepted only if it does not raise the layer objective (the solver is
    a fixed-point method, not a descent method, so a restarted run can land
    on a slightly worse stationary point); otherwise the entry projection is
    kept. `layer` is 1-based. Returns (projection, report).
    """
    cfg = cfg if cfg is not None else AdmmConfig()
    idx = layer - 1
    if not (0 <= idx < stack.depth):
        raise InputError(f"layer must be in 1..{stack.depth}, got {layer}")
    if stack.readout is None:
        raise InputError("fine-tuning needs a fitted readout")
    x = matrix_values(xt)
    if x_prev is None:
        x_prev = chain_apply(stack.projections[:idx], x)
    readout_chain = stack.readout
    for j in range(stack.depth - 1, idx, -1):
        readout_chain = readout_chain @ stack.projections[j]
    y = np.asarray(yt, dtype=np.float64)

    def features_update(state, xp):
        return update_features_supervised(
            state, xp, readout_chain, y, hp.alpha, labeled_cols
        )

    def extra_objective(proj):
        pred = _mask_columns(readout_chain @ (proj @ x_prev), labeled_cols)
        diff = pred - _mask_columns(y, labeled_cols)
        return 0.5 * hp.alpha * float(np.sum(diff * diff))

    entry = stack.projections[idx]
    candidate, report = run_admm(
        x_prev, lf, entry, hp.beta, cfg,
        features_update=features_update, extra_objective=extra_objective,
    )
    entry_val = layer_objective(entry, x_prev, readout_chain, y, lf,
                                hp.alpha, hp.beta, labeled_cols)
    cand_val = layer_objective(candidate, x_prev, readout_chain, y, lf,
                               hp.alpha, hp.beta, labeled_cols)
    if cand_val > entry_val:
        return entry, report
    return candidate, report


@dataclass
class FitReport:
    """Outer-loop trace plus the per-layer inner solver reports."""

    outer_iterations: int
    objective_trace: tuple
    termination: str                      # "converged" | "max_outer_iters"
    pretrain_reports: list = field(repr=False, default_factory=list)
    finetune_reports: list = field(repr=False, default_factory=list)

    @property
    def converged(self):
        return self.termination == "converged"

    def convergence_csv(self):
        lines = ["outer_iter,objective"]
        for t, obj in enumerate(self.objective_trace):
            lines.append(f"{t},{obj!r}")
        return "\n".join(lines) + "\n"


def _segment_ids(seg):
    return seg.labels if isinstance(seg, Segmentation) else np.asarray(seg)


def fit_stack(pixels, stream, labels, seg, hp, cfg=None, n_classes=None):
    """Train the full stack on a training cube slice.

    pixels / stream: matching (d0 x n) pixel and superpixel-stream matrices.
    labels: one integer per column; 0 marks an unlabeled column that joins
    the reconstruction and graph terms but not the prediction term.
    seg: segmentation (or per-column segment ids) aligned with the columns.
    """
    cfg = cfg if cfg is not None else AdmmConfig()
    x = matrix_values(pixels)
    xsp = matrix_values(stream)
    if x.shape != xsp.shape:
        raise InputError(
            f"pixel block {x.shape} and stream block {xsp.shape} differ"
        )
    labels = [int(v) for v in labels]
    n = x.shape[1]
    if len(labels) != n:
        raise InputError(f"{len(labels)} labels for {n} training columns")
    labeled = np.array([v > 0 for v in labels], dtype=bool)
    if not labeled.any():
        raise InputError("no labeled training samples")
    if n_classes is None:
        n_classes = max(labels)
    ids = np.asarray(_segment_ids(seg))
    if ids.size != n:
        raise InputError(
            f"{ids.size} segment ids for {n} training columns; pass ids "
            "restricted to the same columns as the features"
        )

    xt = two_stream_concat(
        FeatureMatrix(x, "pixel"), FeatureMatrix(xsp, "superpixel_stream")
    ).values
    wp = knn_heat_graph(x, hp.knn_k, hp.sigma)
    wsp = knn_heat_graph(xsp, hp.knn_k, hp.sigma)
    wa = alignment_graph(ids)
    bundle = assemble_fused(wp, wsp, wa)
    lf = bundle.lf
    degrees = bundle.fused_degrees

    y_small = np.zeros((n_classes, n))
    lab_idx = np.flatnonzero(labeled)
    if lab_idx.size:
        onehot = one_hot_encode([labels[i] for i in lab_idx], n_classes)
        y_small[:, lab_idx] = onehot.values
    yt = np.hstack([y_small, y_small])
    labeled2 = np.concatenate([labeled, labeled])
    mask = None if labeled2.all() else labeled2

    # greedy layerwise initialization
    pretrain_reports = []
    projections = []
    xs = [xt]
    for l in range(hp.layers):
        init = lpp_fit(xs[-1], lf, degrees, hp.dims[l])
        proj, rep = pretrain_layer(xs[-1], lf, init.projection, hp.eta, cfg)
        projections.append(proj)
        pretrain_reports.append(rep)
        xs.append(proj @ xs[-1])

    # alternating fine-tuning
    readout = fit_readout(projections, xt, yt, hp.alpha, hp.gamma, mask)
    stack = ProjectionStack(tuple(projections), readout)
    trace = [objective_value(stack, xt, yt, lf, hp, mask)]
    finetune_reports = []
    termination = "max_outer_iters"
    outer = 0
    for outer in range(1, hp.max_outer_iters + 1):
        readout = fit_readout(projections, xt, yt, hp.alpha, hp.gamma, mask)
        stack = ProjectionStack(tuple(projections), readout)
        current = objective_value(stack, xt, yt, lf, hp, mask)
        sweep_reports = []
        for l in range(1, hp.layers + 1):
            proj, rep = finetune_projection(
                l, stack, xt, yt, lf, hp, cfg, labeled_cols=mask,
                x_prev=xs[l - 1],
            )
            sweep_reports.append(rep)
            previous = projections[l - 1]
            projections[l - 1] = proj
            for j in range(l, hp.layers + 1):
                xs[j] = projections[j - 1] @ xs[j - 1]
            stack = ProjectionStack(tuple(projections), readout)
            candidate = objective_value(stack, xt, yt, lf, hp, mask)
            if candidate > current:
                # a layer step may lower its own objective yet raise the
                # downstream reconstruction terms; block descent keeps the
                # previous projection in that case
                projections[l - 1] = previous
                for j in range(l, hp.layers + 1):
                    xs[j] = projections[j - 1] @ xs[j - 1]
                stack = ProjectionStack(tuple(projections), readout)
            else:
                current = candidate
        finetune_reports.append(sweep_reports)
        obj = current
        if not np.isfinite(obj):
            raise NumericalError(f"non-finite objective at outer iteration {outer}")
        trace.append(obj)
        prev = trace[-2]
        if prev == 0.0 or abs(obj - prev) / abs(prev) < hp.zeta:
            termination = "converged"
            break

    report = FitReport(
        outer_iterations=outer,
        objective_trace=tuple(trace),
        termination=termination,
        pretrain_reports=pretrain_reports,
        finetune_reports=finetune_reports,
    )
    return stack, report
