"""Cross-validation experiments and the primal-vs-dual timing benchmark."""
from __future__ import annotations

import csv
import enum
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .adapt import (Method, PRIMAL_MAX_VARIABLES, alternate, apply_transform,
                    mmdtl2_build_dual, mmdtl2_build_primal, mmdtl2_recover_w)
from .core import (CapacityError, Dataset, Domain, HyperParams, InvalidArgumentError,
                   PairWeighting, compute_pair_weights)
from .dataio import (default_shift_spec, format_from_path, gen_shifted, gen_toy_two_class,
                     parse_features)
from .qp import solve_box_qp, solve_inequality_qp
from .svm import predict, train_ovr

logger = logging.getLogger(__name__)


class Setting(str, enum.Enum):
    BASELINE = "baseline"
    SOURCE_ONLY = "source-only"
    NOT_TRANSFER = "not-transfer"
    MMDT = "mmdt"
    MMDTL2 = "mmdtl2"


class HarnessError(RuntimeError):
    def __init__(self, fold, cause):
        super().__init__(f"fold {fold} failed: {cause}")
        self.fold = fold


@dataclass
class ExperimentConfig:
    setting: Setting
    folds: int = 10
    hyperparams: HyperParams = field(default_factory=HyperParams)
    dim: int | None = None
    source_path: str | None = None
    target_path: str | None = None
    synthetic: str | None = None  # "shifted" or "toy"
    seed: int = 0
    pair_weighting: PairWeighting = PairWeighting.CLASS_NORMALIZED
    mmdt_augmented: bool = True

    def __post_init__(self):
        self.setting = Setting(self.setting)
        self.pair_weighting = PairWeighting(self.pair_weighting)
        if int(self.folds) < 2:
            raise InvalidArgumentError("folds must be >= 2")
        if self.synthetic is None and (self.source_path is None or self.target_path is None):
            raise InvalidArgumentError("give both dataset paths or a synthetic generator")
        if self.synthetic not in (None, "shifted", "toy"):
            raise InvalidArgumentError(f"unknown synthetic generator {self.synthetic!r}")
        if self.synthetic == "shifted" and self.dim is None:
            raise InvalidArgumentError("the shifted generator needs a dimension")


@dataclass
class ReportRow:
    setting: str
    fold: int
    accuracy: float
    fit_seconds: float
    predict_seconds: float
    dimension: int
    seed: int
    c_source: float
    c_target: float
    d_weight: float


@dataclass
class TimingRow:
    dimension: int
    path: str
    setup: float | None
    optimization: float | None
    calculation: float | None
    total: float | None
    skipped: bool = False
    w_discrepancy: float | None = None


@dataclass
class FoldPair:
    source_test: np.ndarray
    target_test: np.ndarray

    def source_train(self, n):
        return np.setdiff1d(np.arange(n), self.source_test)

    def target_train(self, n):
        return np.setdiff1d(np.arange(n), self.target_test)


def _stratified_folds(labels, folds, rng, domain_name):
    assign = np.empty(labels.shape[0], dtype=np.int64)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < folds:
            raise InvalidArgumentError(
                f"{domain_name} class {c} has {idx.size} samples, fewer than {folds} folds")
        idx = rng.permutation(idx)
        assign[idx] = np.arange(idx.size) % folds
    return assign


def kfold_split(source: Dataset, target: Dataset, folds=10, seed=0):
    """Stratified k-fold partitions of both domains, paired by fold index."""
    if int(folds) < 2:
        raise InvalidArgumentError("folds must be >= 2")
    rng = np.random.default_rng(seed)
    fs = _stratified_folds(source.labels, folds, rng, "source")
    ft = _stratified_folds(target.labels, folds, rng, "target")
    return [FoldPair(np.flatnonzero(fs == f), np.flatnonzero(ft == f)) for f in range(folds)]


def load_datasets(cfg: ExperimentConfig):
    if cfg.synthetic == "shifted":
        return gen_shifted(default_shift_spec(cfg.dim, cfg.seed))
    if cfg.synthetic == "toy":
        return gen_toy_two_class(cfg.seed)
    src = parse_features(cfg.source_path, format_from_path(cfg.source_path), Domain.SOURCE)
    tgt = parse_features(cfg.target_path, format_from_path(cfg.target_path), Domain.TARGET)
    return src, tgt


def _accuracy(pred, truth):
    return float(np.mean(pred == truth))


def _run_fold(setting, src_tr, tgt_tr, src_te, tgt_te, cfg):
    hp = cfg.hyperparams
    K = max(src_tr.n_classes, tgt_tr.n_classes)
    t0 = time.perf_counter()
    if setting in (Setting.BASELINE, Setting.SOURCE_ONLY):
        model = train_ovr(src_tr.features, src_tr.labels,
                          np.full(src_tr.n_samples, hp.c_source), n_classes=K)
        fit_s = time.perf_counter() - t0
        test = src_te if setting is Setting.BASELINE else tgt_te
        if test.dim != model.dim:
            raise InvalidArgumentError("source-only needs equal source and target dimensions")
        t1 = time.perf_counter()
        pred = predict(model, test.features)
    elif setting is Setting.NOT_TRANSFER:
        if src_tr.dim != tgt_tr.dim:
            raise InvalidArgumentError("not-transfer needs equal source and target dimensions")
        X = np.vstack([src_tr.features, tgt_tr.features])
        y = np.concatenate([src_tr.labels, tgt_tr.labels])
        c = np.concatenate([np.full(src_tr.n_samples, hp.c_source),
                            np.full(tgt_tr.n_samples, hp.c_target)])
        model = train_ovr(X, y, c, n_classes=K)
        fit_s = time.perf_counter() - t0
        test = tgt_te
        t1 = time.perf_counter()
        pred = predict(model, test.features)
    else:
        method = Method.MMDT if setting is Setting.MMDT else Method.MMDTL2
        augmented = cfg.mmdt_augmented if method is Method.MMDT else False
        res = alternate(src_tr, tgt_tr, hp, method, cfg.pair_weighting, augmented)
        fit_s = time.perf_counter() - t0
        test = tgt_te
        t1 = time.perf_counter()
        pred = predict(res.model, apply_transform(res.transform, test.features))
    return _accuracy(pred, test.labels), fit_s, time.perf_counter() - t1


def run_setting(cfg: ExperimentConfig, source=None, target=None):
    """Paired k-fold evaluation of one setting; returns one :class:`ReportRow` per fold.

    Baseline tests on the held-out source fold; every other setting tests on
    the held-out target fold, trained on the remaining folds of the domains it
    uses.  Datasets are loaded from ``cfg`` unless given explicitly.
    """
    if source is None or target is None:
        source, target = load_datasets(cfg)
    pairs = kfold_split(source, target, cfg.folds, cfg.seed)
    hp = cfg.hyperparams
    rows = []
    for f, pair in enumerate(pairs):
        try:
            acc, fit_s, pred_s = _run_fold(
                cfg.setting,
                source.subset(pair.source_train(source.n_samples)),
                target.subset(pair.target_train(target.n_samples)),
                source.subset(pair.source_test),
                target.subset(pair.target_test),
                cfg)
        except Exception as exc:
            raise HarnessError(f, exc) from exc
        rows.append(ReportRow(cfg.setting.value, f, acc, fit_s, pred_s, source.dim, cfg.seed,
                              hp.c_source, hp.c_target, hp.d_weight))
        logger.info("%s fold %d: accuracy %.4f", cfg.setting.value, f, acc)
    return rows


GRID_C = (0.1, 1.0, 10.0)
GRID_D = (0.01, 0.1, 1.0, 10.0)


def benchmark_instance(dim, n_target, n_source, seed):
    """A shifted two-class instance plus a source-trained model for timing runs."""
    spec = default_shift_spec(dim, seed, n_source_per_class=n_source // 2,
                              n_target_per_class=n_target // 2)
    source, target = gen_shifted(spec)
    model = train_ovr(source.features, source.labels, np.ones(source.n_samples))
    return source, target, model


def time_dual(source, target, model, pw, hp):
    t0 = time.perf_counter()
    ds, qp = mmdtl2_build_dual(source, target, model, pw, hp)
    t1 = time.perf_counter()
    res = solve_box_qp(qp, tol=hp.qp_tol)
    t2 = time.perf_counter()
    W = mmdtl2_recover_w(ds, res.x, model)
    t3 = time.perf_counter()
    return W.w, (t1 - t0, t2 - t1, t3 - t2)


def time_primal(source, target, model, pw, hp):
    t0 = time.perf_counter()
    qp, _ = mmdtl2_build_primal(source, target, model, pw, hp)
    t1 = time.perf_counter()
    res = solve_inequality_qp(qp)
    t2 = time.perf_counter()
    nw = model.dim * target.dim
    return res.x[:nw].reshape(model.dim, target.dim), (t1 - t0, t2 - t1)


def benchmark_primal_vs_dual(dims, n_target=90, n_source=200, seed=0, repeats=3,
                             hp=None, primal_max_variables=PRIMAL_MAX_VARIABLES):
    """Median wall time per phase (setup / optimization / calculation) for both paths.

    The primal column is skipped at dimensions whose QP exceeds the variable
    guard.  Runs sequentially; call it from a single worker.
    """
    hp = hp or HyperParams()
    rows = []
    for dim in dims:
        source, target, model = benchmark_instance(dim, n_target, n_source, seed)
        pw = compute_pair_weights(source.labels, target.labels)
        dual_times = []
        for _ in range(repeats):
            W_dual, t = time_dual(source, target, model, pw, hp)
            dual_times.append(t)
        d = np.median(np.array(dual_times), axis=0)
        dual_row = TimingRow(dim, "dual", float(d[0]), float(d[1]), float(d[2]), float(d.sum()))

        n_vars = dim * dim + n_target * model.n_classes
        if n_vars > primal_max_variables:
            rows.append(TimingRow(dim, "primal", None, None, None, None, skipped=True))
        else:
            try:
                primal_times = []
                for _ in range(repeats):
                    W_primal, t = time_primal(source, target, model, pw, hp)
                    primal_times.append(t)
                p = np.median(np.array(primal_times), axis=0)
                rows.append(TimingRow(dim, "primal", float(p[0]), float(p[1]), None, float(p.sum())))
                dual_row.w_discrepancy = float(np.linalg.norm(W_dual - W_primal))
            except (CapacityError, MemoryError) as exc:
                logger.warning("primal skipped at dim %d: %s", dim, exc)
                rows.append(TimingRow(dim, "primal", None, None, None, None, skipped=True))
        rows.append(dual_row)
    return rows


def emit_report(rows, format="json", path=None):
    """Write dataclass rows as a JSON array or CSV (header + one line per row).

    Returns the serialized text; writes it to ``path`` when given.
    """
    if not rows:
        raise InvalidArgumentError("no rows to report")
    names = [f.name for f in fields(rows[0])]
    records = [asdict(r) for r in rows]
    if format == "json":
        text = json.dumps(records, indent=2) + "\n"
    elif format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow({k: ("" if v is None else v) for k, v in rec.items()})
        text = buf.getvalue()
    else:
        raise InvalidArgumentError(f"unknown report format {format!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
