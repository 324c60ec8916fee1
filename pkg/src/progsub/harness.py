"""Configuration-driven experiment harness.

Configs are flat ``key=value`` text with dotted namespaces. A run executes
segment -> streams -> graphs -> fit -> transform -> classify -> metrics and
writes a deterministic artifact set (config echo, metrics CSV, convergence
CSV, class-map PPM, model file). The same config and seed reproduce every
output byte.
"""

import itertools
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import formats
from .embedding import lpp_fit, pca_fit
from .errors import InputError, PipelineError
from .graphs import coordinate_dump, knn_heat_graph, laplacian
from .metrics import compute_metrics, confusion, nn_classify
from .model import fit_stack, transform
from .superpixels import segment_count, slic_segment, superpixel_stream
from .synthetic import SyntheticSpec, generate_synthetic
from .types import AdmmConfig, FeatureMatrix, HyperParams, SampleSplit

METHODS = ("progsub", "raw", "pca", "lpp")

# hyperparameter cells that won tuning on the reference image pairs; the
# d20 variant suits ~200-band cubes, d30 the ~144-band one
PRESETS = {
    "tuned-d20": {
        "model.alpha": "1.0", "model.beta": "0.1", "model.gamma": "0.1",
        "model.dims": "20", "model.knn_k": "10", "model.sigma": "0.1",
    },
    "tuned-d30": {
        "model.alpha": "1.0", "model.beta": "0.1", "model.gamma": "0.1",
        "model.dims": "30", "model.knn_k": "10", "model.sigma": "0.1",
    },
    # desk-scale seeded benchmark used by the acceptance suite and demos
    "synth-benchmark": {
        "synthetic.width": "16", "synthetic.height": "16",
        "synthetic.bands": "12", "synthetic.classes": "6",
        "synthetic.separation": "1.0", "synthetic.noise": "0.4",
        "synthetic.blob": "5", "seed": "7",
        "split.train_per_class": "10",
        "model.alpha": "1.0", "model.beta": "0.1", "model.gamma": "0.1",
        "model.eta": "0.1", "model.layers": "2", "model.dims": "5",
        "model.knn_k": "8", "model.sigma": "0.5",
    },
}

# full tuning ranges; the cell product is huge, so grid runs usually cap it
# with a budget
DEFAULT_GRID = {
    "dims": "10,20,30,40,50",
    "knn_k": "10,20,30,40,50",
    "sigma": "0.01,0.1,1.0,10.0,100.0",
    "alpha": "0.01,0.1,1.0,10.0,100.0",
    "beta": "0.01,0.1,1.0,10.0,100.0",
    "gamma": "0.01,0.1,1.0,10.0,100.0",
}


def parse_config_text(text):
    """Parse flat ``key=value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno} is not key=value: {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _get(mapping, key, cast, default):
    if key not in mapping:
        return default
    try:
        return cast(mapping[key])
    except ValueError as exc:
        raise InputError(f"config key {key}={mapping[key]!r}: {exc}") from exc


def _bool(text):
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip() != ""]


@dataclass
class ExperimentConfig:
    """Typed view of one experiment's settings."""

    raw: dict = field(repr=False)
    method: str
    seed: int
    out_dir: str
    synthetic: SyntheticSpec
    cube_header: str
    cube_payload: str
    labels_path: str
    train_per_class: int
    unlabeled_fraction: float
    include_unlabeled: bool
    hyper: HyperParams
    admm: AdmmConfig
    slic_compactness: float
    slic_iters: int
    grid: dict
    grid_budget: int
    grid_folds: int
    sweep_layers: list
    dump_graphs: bool = False

    @classmethod
    def from_mapping(cls, mapping, seed=None, out_dir=None, grid_budget=None,
                     include_unlabeled=None):
        mapping = dict(mapping)
        preset = mapping.pop("preset", None)
        if preset is not None:
            if preset not in PRESETS:
                raise InputError(
                    f"unknown preset {preset!r}; have {sorted(PRESETS)}"
                )
            merged = dict(PRESETS[preset])
            merged.update(mapping)
            mapping = merged

        method = mapping.get("method", "progsub")
        if method not in METHODS:
            raise InputError(f"unknown method {method!r}; have {METHODS}")
        eff_seed = seed if seed is not None else _get(mapping, "seed", int, 0)

        synthetic = None
        if any(k.startswith("synthetic.") for k in mapping):
            synthetic = SyntheticSpec(
                width=_get(mapping, "synthetic.width", int, 16),
                height=_get(mapping, "synthetic.height", int, 16),
                bands=_get(mapping, "synthetic.bands", int, 12),
                n_classes=_get(mapping, "synthetic.classes", int, 6),
                separation=_get(mapping, "synthetic.separation", float, 1.0),
                noise=_get(mapping, "synthetic.noise", float, 0.3),
                blob_size=_get(mapping, "synthetic.blob", int, 5),
                seed=_get(mapping, "synthetic.seed", int, eff_seed),
            )

        layers = _get(mapping, "model.layers", int, 1)
        dims = _get(mapping, "model.dims", _int_list, [10])
        if len(dims) == 1:
            dims = dims * layers
        beta = _get(mapping, "model.beta", float, 0.1)
        hyper = HyperParams(
            alpha=_get(mapping, "model.alpha", float, 1.0),
            beta=beta,
            gamma=_get(mapping, "model.gamma", float, 0.1),
            eta=_get(mapping, "model.eta", float, beta),
            layers=layers,
            dims=tuple(dims),
            knn_k=_get(mapping, "model.knn_k", int, 10),
            sigma=_get(mapping, "model.sigma", float, 0.1),
            zeta=_get(mapping, "model.zeta", float, 1e-4),
            max_outer_iters=_get(mapping, "model.max_outer", int, 50),
            superpixel_fraction=_get(
                mapping, "model.superpixel_fraction", float, 0.10
            ),
        )
        admm = AdmmConfig(
            mu0=_get(mapping, "admm.mu0", float, 1e-3),
            mu_max=_get(mapping, "admm.mu_max", float, 1e6),
            rho=_get(mapping, "admm.rho", float, 2.0),
            eps=_get(mapping, "admm.eps", float, 1e-6),
            max_iters=_get(mapping, "admm.max_iters", int, 500),
        )
        grid = {
            key.split(".", 1)[1]: value
            for key, value in mapping.items()
            if key.startswith("grid.") and key != "grid.budget"
            and key != "grid.folds"
        }
        include = include_unlabeled if include_unlabeled is not None else _get(
            mapping, "run.include_unlabeled", _bool, False
        )
        return cls(
            raw=mapping,
            method=method,
            seed=eff_seed,
            out_dir=out_dir if out_dir is not None else mapping.get("out"),
            synthetic=synthetic,
            cube_header=mapping.get("data.cube_header"),
            cube_payload=mapping.get("data.cube_payload"),
            labels_path=mapping.get("data.labels"),
            train_per_class=_get(mapping, "split.train_per_class", int, 10),
            unlabeled_fraction=_get(
                mapping, "split.unlabeled_fraction", float, 0.0
            ),
            include_unlabeled=include,
            hyper=hyper,
            admm=admm,
            slic_compactness=_get(mapping, "slic.compactness", float, 10.0),
            slic_iters=_get(mapping, "slic.iters", int, 10),
            grid=grid,
            grid_budget=grid_budget if grid_budget is not None else _get(
                mapping, "grid.budget", int, None
            ),
            grid_folds=_get(mapping, "grid.folds", int, 10),
            sweep_layers=_get(mapping, "sweep.layers", _int_list, [1, 2, 3]),
        )


def load_config(path, **overrides):
    with open(path, "r", encoding="utf-8") as fh:
        return ExperimentConfig.from_mapping(parse_config_text(fh.read()),
                                             **overrides)


def _stage(name):
    class _StageGuard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, PipelineError):
                raise PipelineError(name, exc) from exc
            return False

    return _StageGuard()


def make_split(labels, train_per_class, unlabeled_fraction, rng):
    """Stratified split: fixed train count per class, optional pretend-
    unlabeled share of the remainder, rest is test. File-level zeros stay
    unlabeled."""
    labels = np.asarray(list(labels), dtype=np.int64)
    train, test, unlabeled = [], [], list(np.flatnonzero(labels == 0))
    for cls in sorted(set(labels[labels > 0].tolist())):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        take = min(train_per_class, idx.size)
        train.extend(int(i) for i in idx[:take])
        rest = idx[take:]
        n_hide = int(round(unlabeled_fraction * rest.size))
        unlabeled.extend(int(i) for i in rest[:n_hide])
        test.extend(int(i) for i in rest[n_hide:])
    if not train:
        raise InputError("split produced no training samples")
    return SampleSplit(tuple(sorted(train)), tuple(sorted(test)),
                       tuple(sorted(unlabeled)))


@dataclass
class PreparedData:
    cube: FeatureMatrix       # normalized features
    labels: list
    width: int
    height: int
    n_classes: int
    seg: object
    stream: FeatureMatrix
    split: SampleSplit
    scale: float


def prepare_data(config, need_split=True):
    """Load or generate the cube, normalize it, segment it, split it."""
    with _stage("load"):
        if config.cube_header is not None:
            cube, width, height = formats.load_cube(
                config.cube_header, config.cube_payload
            )
            labels = formats.load_labels(config.labels_path, width * height)
        elif config.synthetic is not None:
            cube, labels, width, height = generate_synthetic(config.synthetic)
        else:
            raise InputError("config names neither data files nor a synthetic spec")
        n_classes = max(labels) if max(labels) > 0 else 0
        # unit-ball feasibility: uniform scaling preserves nearest-neighbor
        # ordering while making column norms <= 1
        scale = float(np.linalg.norm(cube.values, axis=0).max())
        if scale == 0.0:
            scale = 1.0
        cube = FeatureMatrix(cube.values / scale, cube.kind)

    with _stage("segment"):
        n_segments = segment_count(width * height,
                                   config.hyper.superpixel_fraction)
        seg = slic_segment(cube, width, height, n_segments,
                           compactness=config.slic_compactness,
                           max_iters=config.slic_iters)

    with _stage("stream"):
        stream = superpixel_stream(cube, seg)

    split = None
    if need_split:
        with _stage("split"):
            rng = np.random.default_rng(config.seed)
            split = make_split(labels, config.train_per_class,
                               config.unlabeled_fraction, rng)
    return PreparedData(cube=cube, labels=labels, width=width, height=height,
                        n_classes=n_classes, seg=seg, stream=stream,
                        split=split, scale=scale)


def _fit_method(config, data, train_idx, unlabeled_idx, hyper):
    """Fit the configured method on the given columns.

    Returns (embed_fn, model_stack_or_none, fit_report_or_none) where
    embed_fn maps a raw pixel matrix to the learned feature space.
    """
    cube_vals = data.cube.values
    labels = data.labels
    method = config.method
    if method == "raw":
        return (lambda v: v), None, None
    if method == "pca":
        emb = pca_fit(cube_vals[:, train_idx], hyper.dims[-1])
        return emb.transform, None, None
    if method == "lpp":
        w = knn_heat_graph(cube_vals[:, train_idx], hyper.knn_k, hyper.sigma)
        lap = laplacian(w)
        deg = np.asarray(w.sum(axis=1)).ravel()
        deg = np.where(deg <= 0, 1e-12, deg)
        emb = lpp_fit(cube_vals[:, train_idx], lap, deg, hyper.dims[-1])
        return emb.transform, None, None
    # progsub
    fit_idx = list(train_idx)
    fit_labels = [labels[i] for i in train_idx]
    if config.include_unlabeled and unlabeled_idx:
        fit_idx += list(unlabeled_idx)
        fit_labels += [0] * len(unlabeled_idx)
    fit_idx = np.asarray(fit_idx, dtype=np.int64)
    stack, report = fit_stack(
        FeatureMatrix(cube_vals[:, fit_idx], "pixel"),
        FeatureMatrix(data.stream.values[:, fit_idx], "superpixel_stream"),
        fit_labels,
        data.seg.labels[fit_idx],
        hyper,
        config.admm,
        n_classes=data.n_classes,
    )
    return (lambda v: transform(stack, v).values), stack, report


def run_experiment(config):
    """End-to-end run; returns (MetricsReport, artifacts dict)."""
    data = prepare_data(config)
    split = data.split
    train_idx = np.asarray(split.train_indices, dtype=np.int64)
    test_idx = np.asarray(split.test_indices, dtype=np.int64)
    if test_idx.size == 0:
        raise PipelineError("split", InputError("split produced no test samples"))

    with _stage("fit"):
        embed, stack, report = _fit_method(
            config, data, train_idx, list(split.unlabeled_indices), config.hyper
        )

    with _stage("transform"):
        train_emb = embed(data.cube.values[:, train_idx])
        test_emb = embed(data.cube.values[:, test_idx])
        all_emb = embed(data.cube.values)

    with _stage("classify"):
        train_labels = [data.labels[i] for i in train_idx]
        preds_test = nn_classify(train_emb, train_labels, test_emb)
        preds_all = nn_classify(train_emb, train_labels, all_emb)

    with _stage("metrics"):
        truth = [data.labels[i] for i in test_idx]
        cm = confusion(truth, preds_test, n_classes=data.n_classes)
        metrics = compute_metrics(cm)

    artifacts = {}
    if config.out_dir is not None:
        with _stage("write"):
            artifacts = _write_artifacts(config, data, metrics, stack, report,
                                         preds_all)
    return metrics, artifacts


def _echo_lines(config):
    lines = [f"method={config.method}", f"seed={config.seed}"]
    for key in sorted(config.raw):
        if key in ("out", "seed"):
            continue
        lines.append(f"{key}={config.raw[key]}")
    return "\n".join(lines) + "\n"


def _write_artifacts(config, data, metrics, stack, report, preds_all):
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    artifacts = {}

    def put(name, text=None, blob=None):
        path = os.path.join(out, name)
        if text is not None:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            with open(path, "wb") as fh:
                fh.write(blob)
        artifacts[name] = path

    put("config.echo.txt", text=_echo_lines(config))
    header = "oa,aa,kappa," + ",".join(
        f"class_{i + 1}" for i in range(len(metrics.per_class))
    )
    put("metrics.csv", text=header + "\n" + metrics.csv_row() + "\n")
    if report is not None:
        put("convergence.csv", text=report.convergence_csv())
        for l, rep in enumerate(report.pretrain_reports, start=1):
            put(f"pretrain_layer{l}.csv", text=rep.to_csv())
    else:
        put("convergence.csv", text="outer_iter,objective\n")
    if stack is not None:
        put("model.bin", blob=formats.dump_model_bytes(stack))
    palette = formats.default_palette(max(data.n_classes, 1))
    put("map.ppm", blob=formats.render_class_map(
        [int(p) for p in preds_all], data.width, data.height, palette
    ))
    put("predictions.txt",
        text="".join(f"{int(p)}\n" for p in preds_all))
    if config.dump_graphs and config.method == "progsub":
        from .graphs import alignment_graph, assemble_fused

        train_idx = np.asarray(data.split.train_indices, dtype=np.int64)
        wp = knn_heat_graph(data.cube.values[:, train_idx], config.hyper.knn_k,
                            config.hyper.sigma)
        wsp = knn_heat_graph(data.stream.values[:, train_idx],
                             config.hyper.knn_k, config.hyper.sigma)
        wa = alignment_graph(data.seg.labels[train_idx])
        bundle = assemble_fused(wp, wsp, wa)
        put("graph_wp.txt", text=coordinate_dump(bundle.wp))
        put("graph_wsp.txt", text=coordinate_dump(bundle.wsp))
        put("graph_wa.txt", text=coordinate_dump(bundle.wa))
        put("graph_wf.txt", text=coordinate_dump(bundle.wf))
    return artifacts


def _stratified_folds(labels, train_idx, n_folds, rng):
    """Deterministic per-class round-robin fold assignment."""
    train_idx = np.asarray(train_idx, dtype=np.int64)
    fold_of = {}
    for cls in sorted(set(int(labels[i]) for i in train_idx)):
        members = np.asarray([i for i in train_idx if labels[i] == cls])
        members = members[rng.permutation(members.size)]
        for j, i in enumerate(members):
            fold_of[int(i)] = j % n_folds
    folds = [[] for _ in range(n_folds)]
    for i in sorted(fold_of):
        folds[fold_of[i]].append(i)
    return [f for f in folds if f]


_GRID_FIELDS = ("alpha", "beta", "gamma", "eta", "sigma", "knn_k", "dims",
                "layers")


def _apply_cell(hyper, cell):
    updates = {}
    for key, value in cell.items():
        if key == "dims":
            d = int(value)
            updates["dims"] = tuple([d] * hyper.layers)
        elif key == "layers":
            m = int(value)
            updates["layers"] = m
            updates["dims"] = tuple([hyper.dims[-1]] * m)
        elif key == "knn_k":
            updates["knn_k"] = int(value)
        else:
            updates[key] = float(value)
    return replace(hyper, **updates)


def _cv_score(config, data, hyper, folds):
    """Mean held-out-fold overall accuracy for one hyperparameter cell."""
    oas = []
    for held in range(len(folds)):
        val_idx = np.asarray(folds[held], dtype=np.int64)
        fit_idx = np.asarray(
            sorted(i for j, f in enumerate(folds) if j != held for i in f),
            dtype=np.int64,
        )
        if fit_idx.size == 0 or val_idx.size == 0:
            continue
        k = hyper.knn_k
        if k >= fit_idx.size:
            k = max(1, fit_idx.size - 1)
        fold_hyper = replace(hyper, knn_k=k)
        embed, _, _ = _fit_method(config, data, fit_idx, [], fold_hyper)
        train_emb = embed(data.cube.values[:, fit_idx])
        val_emb = embed(data.cube.values[:, val_idx])
        preds = nn_classify(train_emb, [data.labels[i] for i in fit_idx],
                            val_emb)
        truth = np.asarray([data.labels[i] for i in val_idx])
        oas.append(float((preds == truth).mean()))
    if not oas:
        raise InputError("cross-validation produced no scorable folds")
    return float(np.mean(oas))


def grid_search_cv(config):
    """Exhaustive (optionally budget-capped) grid search with stratified CV.

    Falls back to the published tuning ranges (DEFAULT_GRID) when the config
    names no grid.<param> keys. Returns (best HyperParams, table rows); rows
    are (cell dict, mean OA). Ties keep the lexicographically-first cell in
    enumeration order.
    """
    grid = {k: v for k, v in config.grid.items()}
    if not grid:
        grid = dict(DEFAULT_GRID)
    for key in grid:
        if key not in _GRID_FIELDS:
            raise InputError(f"unknown grid parameter {key!r}; have {_GRID_FIELDS}")
        if not str(grid[key]).strip():
            raise InputError(f"grid parameter {key} has no candidates")
    names = sorted(grid)
    candidates = [[v.strip() for v in str(grid[k]).split(",") if v.strip()]
                  for k in names]
    if any(not c for c in candidates):
        raise InputError("every grid parameter needs at least one candidate")
    cells = [dict(zip(names, combo))
             for combo in itertools.product(*candidates)]
    if config.grid_budget is not None and config.grid_budget < len(cells):
        take = np.unique(
            np.round(np.linspace(0, len(cells) - 1, config.grid_budget))
            .astype(int)
        )
        cells = [cells[i] for i in take]

    data = prepare_data(config)
    train_idx = list(data.split.train_indices)
    class_sizes = {}
    for i in train_idx:
        class_sizes[data.labels[i]] = class_sizes.get(data.labels[i], 0) + 1
    n_folds = max(2, min(config.grid_folds, min(class_sizes.values()),
                         len(train_idx) // 2))
    rng = np.random.default_rng(config.seed)
    folds = _stratified_folds(data.labels, train_idx, n_folds, rng)

    rows = []
    best = None
    for cell in cells:
        hyper = _apply_cell(config.hyper, cell)
        score = _cv_score(config, data, hyper, folds)
        rows.append((cell, score))
        if best is None or score > best[1]:
            best = (cell, score)

    best_hyper = _apply_cell(config.hyper, best[0])
    if config.out_dir is not None:
        os.makedirs(config.out_dir, exist_ok=True)
        header = ",".join(names) + ",mean_oa"
        lines = [header]
        for cell, score in rows:
            lines.append(",".join(cell[k] for k in names) + f",{score!r}")
        with open(os.path.join(config.out_dir, "grid.csv"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        with open(os.path.join(config.out_dir, "best.txt"), "w",
                  encoding="utf-8", newline="\n") as fh:
            for k in names:
                fh.write(f"{k}={best[0][k]}\n")
            fh.write(f"mean_oa={best[1]!r}\n")
    return best_hyper, rows


def layer_sweep(config, m_list=None):
    """Refit with each layer count; returns rows of (m, oa, aa, kappa)."""
    m_list = list(m_list if m_list is not None else config.sweep_layers)
    if not m_list:
        raise InputError("layer sweep needs at least one layer count")
    rows = []
    for m in m_list:
        hyper = replace(config.hyper, layers=int(m),
                        dims=tuple([config.hyper.dims[-1]] * int(m)))
        sub = replace(config, hyper=hyper, out_dir=None)
        metrics, _ = run_experiment(sub)
        rows.append((int(m), metrics.oa, metrics.aa, metrics.kappa))
    if config.out_dir is not None:
        os.makedirs(config.out_dir, exist_ok=True)
        lines = ["m,oa,aa,kappa"]
        for m, oa, aa, kappa in rows:
            lines.append(f"{m},{oa!r},{aa!r},{kappa!r}")
        with open(os.path.join(config.out_dir, "layer_sweep.csv"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    return rows
