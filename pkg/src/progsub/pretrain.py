"""Per-layer ADMM solver for the constrained reconstruction objective.

One layer's projection T is trained against its input block matrix X
(d_in x n) by minimizing

    1/2 ||X - T'TX||_F^2  +  eta/2 * tr(TX L X'T')

subject to the embedded features TX being elementwise nonnegative with
columns inside the unit ball. The solver splits TX into three auxiliary
copies (reconstruction features, nonnegative copy, norm-bounded copy) plus
a decoder copy of T itself, and alternates closed-form block updates with
dual ascent under a geometrically growing penalty.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import InputError, NumericalError
from .types import AdmmConfig, matrix_values

# numerical insurance on every solved system; the penalty term already
# regularizes, so this never moves a solution beyond ~1e-9
RIDGE = 1e-10

TRACE_COLUMNS = ("iter", "r_feats", "r_decoder", "r_nonneg", "r_norm", "mu",
                 "objective")


def prox_nonneg(mat):
    """Project a matrix onto the nonnegative orthant (elementwise max 0)."""
    return np.maximum(mat, 0.0)


def prox_unit_ball(mat):
    """Rescale every column with Euclidean norm > 1 back onto the unit sphere."""
    norms = np.linalg.norm(mat, axis=0)
    scale = np.where(norms > 1.0, norms, 1.0)
    return mat / scale


@dataclass
class AdmmState:
    """One layer's solver state: projection, auxiliaries, duals, penalty."""

    proj: np.ndarray          # (d_out, d_in) current projection
    feats: np.ndarray         # (d_out, n) reconstruction copy of proj @ x
    decoder: np.ndarray       # (d_out, d_in) decoder copy of proj
    nonneg: np.ndarray        # (d_out, n) nonnegative copy of proj @ x
    normed: np.ndarray        # (d_out, n) norm-bounded copy of proj @ x
    dual_feats: np.ndarray
    dual_decoder: np.ndarray
    dual_nonneg: np.ndarray
    dual_normed: np.ndarray
    penalty: float

    @classmethod
    def initial(cls, proj0, x, mu0):
        # warm start: every auxiliary copy starts consistent with proj0, so a
        # feasible stationary initialization is an exact fixed point instead
        # of being destroyed by the first few low-penalty iterations
        proj0 = np.array(proj0, dtype=np.float64)
        d_out, d_in = proj0.shape
        n = x.shape[1]
        feats0 = proj0 @ x
        return cls(
            proj=proj0,
            feats=feats0,
            decoder=proj0.copy(),
            nonneg=prox_nonneg(feats0),
            normed=prox_unit_ball(feats0),
            dual_feats=np.zeros((d_out, n)),
            dual_decoder=np.zeros((d_out, d_in)),
            dual_nonneg=np.zeros((d_out, n)),
            dual_normed=np.zeros((d_out, n)),
            penalty=float(mu0),
        )


def _solve_pos(lhs, rhs):
    try:
        return scipy.linalg.solve(lhs, rhs, assume_a="pos")
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(
            f"singular system in block solve (cond~{np.linalg.cond(lhs):.2e})"
        ) from exc


def update_projection(state, x, lap, graph_weight, data_gram=None,
                      graph_gram=None):
    """Closed-form projection update.

    T <- (mu*(feats + nonneg + normed) X' + mu*decoder + their duals folded
    in the same pattern) * (graph_weight * X L X' + 3 mu X X' + mu I)^{-1}
    """
    mu = state.penalty
    xT = x.T
    num = (
        mu * ((state.feats + state.nonneg + state.normed) @ xT + state.decoder)
        + (state.dual_feats + state.dual_nonneg + state.dual_normed) @ xT
        + state.dual_decoder
    )
    if data_gram is None:
        data_gram = x @ xT
    if graph_gram is None:
        graph_gram = compute_graph_gram(x, lap)
    d_in = x.shape[0]
    denom = (
        graph_weight * graph_gram
        + 3.0 * mu * data_gram
        + (mu + RIDGE) * np.eye(d_in)
    )
    return _solve_pos(denom, num.T).T


def compute_graph_gram(x, lap):
    """X L X' with a sparse or dense Laplacian, symmetrized."""
    if sp.issparse(lap):
        gram = x @ (lap @ x.T)
    else:
        gram = x @ np.asarray(lap) @ x.T
    return (gram + gram.T) / 2.0


def update_features(state, x):
    """Reconstruction-features update: (GG' + mu I)^{-1}(GX + mu TX - D1)."""
    mu = state.penalty
    g = state.decoder
    lhs = g @ g.T + (mu + RIDGE) * np.eye(g.shape[0])
    rhs = g @ x + mu * (state.proj @ x) - state.dual_feats
    return _solve_pos(lhs, rhs)


def update_decoder(state, x):
    """Decoder update: (FF' + mu I)^{-1}(FX' + mu T - D2).

    The reconstruction term participates here even though it couples decoder
    and features bilinearly; with features fixed the block is a strictly
    convex quadratic.
    """
    mu = state.penalty
    f = state.feats
    lhs = f @ f.T + (mu + RIDGE) * np.eye(f.shape[0])
    rhs = f @ x.T + mu * state.proj - state.dual_decoder
    return _solve_pos(lhs, rhs)


def update_nonneg(state, x):
    """Nonnegative copy: max(TX - D3/mu, 0)."""
    return prox_nonneg(state.proj @ x - state.dual_nonneg / state.penalty)


def update_normed(state, x):
    """Norm-bounded copy: per-column unit-ball projection of TX - D4/mu."""
    return prox_unit_ball(state.proj @ x - state.dual_normed / state.penalty)


def update_duals(state, x):
    """Dual ascent for all four constraints; returns the new duals."""
    mu = state.penalty
    px = state.proj @ x
    return (
        state.dual_feats + mu * (state.feats - px),
        state.dual_decoder + mu * (state.decoder - state.proj),
        state.dual_nonneg + mu * (state.nonneg - px),
        state.dual_normed + mu * (state.normed - px),
    )


@dataclass
class PretrainReport:
    """Residual / penalty / objective trace of one ADMM run."""

    iterations: int
    converged: bool
    final_residuals: tuple
    trace: list = field(repr=False)
    final_nonneg_min: float = 0.0   # smallest entry of the nonneg copy
    final_norm_max: float = 0.0     # largest column norm of the normed copy

    @property
    def objective_trace(self):
        return [row[6] for row in self.trace]

    def to_csv(self):
        lines = [",".join(TRACE_COLUMNS)]
        for row in self.trace:
            lines.append(
                f"{row[0]},{row[1]!r},{row[2]!r},{row[3]!r},{row[4]!r},"
                f"{row[5]!r},{row[6]!r}"
            )
        return "\n".join(lines) + "\n"


def reconstruction_objective(proj, x, graph_gram, graph_weight):
    """The layer objective with the embedded features substituted by TX."""
    recon = x - proj.T @ (proj @ x)
    value = 0.5 * float(np.sum(recon * recon))
    if graph_weight != 0.0:
        value += 0.5 * graph_weight * float(np.sum((proj @ graph_gram) * proj))
    return value


def run_admm(x, lap, proj0, graph_weight, cfg, features_update=None,
             extra_objective=None, state0=None):
    """Shared ADMM engine; returns (projection, PretrainReport).

    `features_update(state, x)` may replace the plain reconstruction-features
    update (the fine-tuning phase adds a prediction term there).
    `extra_objective(proj)` is added to the traced objective only.
    """
    x = matrix_values(x)
    if proj0.shape[1] != x.shape[0]:
        raise InputError(
            f"initial projection expects {proj0.shape[1]} input rows, data "
            f"has {x.shape[0]}"
        )
    if features_update is None:
        features_update = update_features
    data_gram = x @ x.T
    graph_gram = compute_graph_gram(x, lap) if lap is not None else np.zeros(
        (x.shape[0], x.shape[0])
    )
    state = state0 if state0 is not None else AdmmState.initial(
        proj0, x, cfg.mu0
    )

    trace = []
    residuals = (np.inf,) * 4
    converged = False
    iterations = 0
    for t in range(cfg.max_iters):
        mu_used = state.penalty
        try:
            state.proj = update_projection(
                state, x, lap, graph_weight, data_gram=data_gram,
                graph_gram=graph_gram,
            )
            state.feats = features_update(state, x)
            state.decoder = update_decoder(state, x)
            state.nonneg = update_nonneg(state, x)
            state.normed = update_normed(state, x)
            (state.dual_feats, state.dual_decoder, state.dual_nonneg,
             state.dual_normed) = update_duals(state, x)
        except (ValueError, NumericalError) as exc:
            raise NumericalError(
                f"non-finite value at ADMM iteration {t}: {exc}"
            ) from exc
        state.penalty = min(cfg.rho * state.penalty, cfg.mu_max)

        px = state.proj @ x
        residuals = (
            float(np.linalg.norm(state.feats - px)),
            float(np.linalg.norm(state.decoder - state.proj)),
            float(np.linalg.norm(state.nonneg - px)),
            float(np.linalg.norm(state.normed - px)),
        )
        obj = reconstruction_objective(state.proj, x, graph_gram, graph_weight)
        if extra_objective is not None:
            obj += extra_objective(state.proj)
        if not np.isfinite(obj) or not all(np.isfinite(r) for r in residuals):
            raise NumericalError(f"non-finite value at ADMM iteration {t}")
        trace.append((t, *residuals, mu_used, obj))
        iterations = t + 1
        if all(r < cfg.eps for r in residuals):
            converged = True
            break

    report = PretrainReport(
        iterations=iterations,
        converged=converged,
        final_residuals=residuals,
        trace=trace,
        final_nonneg_min=float(state.nonneg.min()) if state.nonneg.size else 0.0,
        final_norm_max=float(np.linalg.norm(state.normed, axis=0).max())
        if state.normed.size else 0.0,
    )
    return state.proj, report


def pretrain_layer(x, lap, proj0, eta, cfg=None):
    """Train one layer's projection on its input block (no label term).

    Returns the projection and the run report. `x` is the layer input
    (d_in x n), `lap` the fused graph Laplacian over its columns, `proj0`
    the initial projection (d_out x d_in).
    """
    cfg = cfg if cfg is not None else AdmmConfig()
    return run_admm(matrix_values(x), lap, np.asarray(proj0, dtype=np.float64),
                    float(eta), cfg)
