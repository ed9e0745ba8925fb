"""Brute-force references for certifying the dual transform step at small sizes.

Everything here is deliberately naive: the system matrix is materialized as
the literal sum of ``U(x_i)`` blocks and the primal QP is solved directly.
Size guards raise :class:`~adaptqp.core.CapacityError` instead of truncating.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .adapt import (TransformMatrix, augment, mmdtl2_build_dual, mmdtl2_primal_w_step,
                    target_signs, w_step_objective)
from .core import CapacityError, Dataset, Domain, HyperParams, InvalidArgumentError, compute_pair_weights
from .numerics import build_U, build_v
from .svm import SvmModel

FULL_V_MAX_SIZE = 400


def materialize_full_V(targets, pw, d_weight, m_s):
    """``I + D sum_ij y_ij U(x_i)`` built term by term (``m_s * M_T <= 400``)."""
    X = np.asarray(targets, dtype=float)
    size = m_s * X.shape[1]
    if size > FULL_V_MAX_SIZE:
        raise CapacityError(f"full V of size {size} exceeds the oracle guard ({FULL_V_MAX_SIZE})")
    V = np.eye(size)
    if d_weight == 0:
        return V
    Y = pw.weights
    for i in range(X.shape[0]):
        Ui = build_U(X[i], m_s)
        for j in range(Y.shape[1]):
            if Y[i, j] != 0:
                V += d_weight * Y[i, j] * Ui
    return V


def _phi(theta, x):
    return np.outer(theta, x).reshape(-1)


def full_dual_coefficients(source, target, model, pw, hp, augmented=False):
    """Dual Hessian and linear term (minimization form) from explicit ``phi`` and ``V^-1``."""
    Xt = augment(target.features) if augmented else np.asarray(target.features)
    K, m_s = model.n_classes, model.dim
    D = hp.d_weight
    Vinv = np.linalg.inv(materialize_full_V(Xt, pw, D, m_s))
    q = np.zeros(m_s * Xt.shape[1])
    if D > 0:
        for i in range(Xt.shape[0]):
            for j in range(source.n_samples):
                if pw.weights[i, j] != 0:
                    q += pw.weights[i, j] * build_v(source.features[j], Xt[i])
    Y = target_signs(target.labels, K)
    Phi = np.array([Y[i, k] * _phi(model.thetas[k], Xt[i])
                    for i in range(Xt.shape[0]) for k in range(K)])
    H = Phi @ Vinv @ Phi.T
    yb = (Y * model.biases[None, :]).reshape(-1)
    g = -(1.0 - yb - D * Phi @ Vinv @ q)
    return H, g, Vinv, q, Phi


def recover_w_full(source, target, model, pw, hp, a, augmented=False):
    """``w = V^-T (sum a_ik y_ik phi_ik + D q)`` with an explicit inverse."""
    H, g, Vinv, q, Phi = full_dual_coefficients(source, target, model, pw, hp, augmented)
    w = Vinv.T @ (Phi.T @ np.asarray(a) + hp.d_weight * q)
    m_t = target.dim + int(augmented)
    return TransformMatrix(w.reshape(model.dim, m_t), augmented)


def primal_reference(source, target, model, pw, hp, augmented=False, tol=1e-9):
    """Transform from solving the dense primal QP directly."""
    m_t = target.dim + int(augmented)
    if model.dim * m_t > FULL_V_MAX_SIZE:
        raise CapacityError("primal reference is limited to the oracle guard size")
    W, _, _ = mmdtl2_primal_w_step(source, target, model, pw, hp, augmented, tol)
    return W


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass
class AuditReport:
    max_abs_error: float
    kkt_residual: float
    duality_gap: float
    passed: bool
    details: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


DEFAULT_TOLERANCES = {
    "stationarity": 1e-6,
    "box_feasibility": 0.0,
    "complementary_slackness": 1e-6,
    "duality_gap": 1e-5,
}


def audit_solution(source, target, model, pw, hp, W: TransformMatrix, a,
                   augmented=False, tolerances=None) -> AuditReport:
    """KKT and duality audit of one transform step at ``(W, a)``.

    Checks stationarity ``V w - D q - sum a_ik y_ik phi_ik = 0`` with an
    explicit ``V``; ``0 <= a <= C_T``; complementary slackness of both the
    hinge constraints and ``xi >= 0`` with optimal slacks; and the relative gap
    between the primal objective at ``W`` and the dual objective at ``a``.
    Failures are recorded in the report, never raised.
    """
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    a = np.asarray(a, dtype=float)
    Xt = augment(target.features) if augmented else np.asarray(target.features)
    K = model.n_classes
    if a.size != Xt.shape[0] * K:
        raise InvalidArgumentError(f"expected {Xt.shape[0] * K} dual variables, got {a.size}")
    D, C = hp.d_weight, hp.c_target

    V = materialize_full_V(Xt, pw, D, model.dim)
    _, _, _, q, Phi = full_dual_coefficients(source, target, model, pw, hp, augmented)
    w = np.asarray(W.w).reshape(-1)
    stationarity = float(np.max(np.abs(V @ w - D * q - Phi.T @ a), initial=0.0))

    box = float(max(0.0, -a.min(initial=0.0), a.max(initial=0.0) - C))

    Y = target_signs(target.labels, K)
    margins = (Phi @ w) + (Y * model.biases[None, :]).reshape(-1)
    xi = np.maximum(0.0, 1.0 - margins)
    cs = float(max(np.max(np.abs(a * (margins - 1.0 + xi)), initial=0.0),
                   np.max(np.abs((C - a) * xi), initial=0.0)))

    ds, qp = mmdtl2_build_dual(source, target, model, pw, hp, augmented)
    primal = w_step_objective(W, source, target, model, pw, hp)
    dual = ds.dual_value(qp, a)
    gap = float(abs(primal - dual) / max(1.0, abs(primal)))

    checks = [
        CheckResult("stationarity", stationarity, tol["stationarity"], stationarity <= tol["stationarity"]),
        CheckResult("box_feasibility", box, tol["box_feasibility"], box <= tol["box_feasibility"]),
        CheckResult("complementary_slackness", cs, tol["complementary_slackness"],
                    cs <= tol["complementary_slackness"]),
        CheckResult("duality_gap", gap, tol["duality_gap"], gap <= tol["duality_gap"]),
    ]
    return AuditReport(
        max_abs_error=stationarity,
        kkt_residual=max(stationarity, box, cs),
        duality_gap=gap,
        passed=all(c.passed for c in checks),
        details=checks,
    )


@dataclass(frozen=True)
class Instance:
    source: object
    target: object
    model: object
    pw: object
    hp: object


def random_instance(seed, max_ms=6, max_mt=6, max_nt=12, max_ns=20, max_k=3,
                    d_choices=(0.0, 0.1, 1.0, 10.0)) -> Instance:
    """Small random W-step instance: data, a random (not trained) classifier, weights."""
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, max_k + 1))
    m_s = int(rng.integers(1, max_ms + 1))
    m_t = int(rng.integers(1, max_mt + 1))
    n_t = int(rng.integers(K, max_nt + 1))
    n_s = int(rng.integers(K, max_ns + 1))

    def labels(n):
        lab = rng.permutation(np.concatenate([np.arange(1, K + 1),
                                              rng.integers(1, K + 1, n - K)]))
        return lab.astype(np.int64)

    source = Dataset(rng.standard_normal((n_s, m_s)), labels(n_s), Domain.SOURCE, K)
    target = Dataset(rng.standard_normal((n_t, m_t)), labels(n_t), Domain.TARGET, K)
    model = SvmModel(rng.standard_normal((K, m_s)), 0.5 * rng.standard_normal(K))
    pw = compute_pair_weights(source.labels, target.labels)
    hp = HyperParams(c_target=float(10 ** rng.uniform(-1, 1)),
                     d_weight=float(rng.choice(d_choices)), qp_tol=1e-10)
    return Instance(source, target, model, pw, hp)


def audit_suite(seed=0, n_instances=10):
    """Dual solve, KKT audit and primal cross-check on ``n_instances`` random instances.

    Returns ``(passed, records)`` with one JSON-ready record per instance.
    """
    from .adapt import mmdtl2_w_step

    records = []
    for t in range(n_instances):
        inst = random_instance([seed, t])
        step = mmdtl2_w_step(inst.source, inst.target, inst.model, inst.pw, inst.hp)
        report = audit_solution(inst.source, inst.target, inst.model, inst.pw, inst.hp,
                                step.transform, step.dual)
        W_ref = primal_reference(inst.source, inst.target, inst.model, inst.pw, inst.hp)
        diff = float(np.linalg.norm(step.transform.w - W_ref.w))
        tol = 1e-4 * (1.0 + float(np.linalg.norm(W_ref.w)))
        records.append({
            "instance": t,
            "shape": {"m_s": inst.model.dim, "m_t": inst.target.dim,
                      "n_t": inst.target.n_samples, "n_s": inst.source.n_samples,
                      "k": inst.model.n_classes},
            "d_weight": inst.hp.d_weight,
            "c_target": inst.hp.c_target,
            "converged": bool(step.converged),
            "primal_dual_w_diff": diff,
            "primal_dual_w_tol": tol,
            "audit": asdict(report),
            "passed": bool(report.passed and step.converged and diff <= tol),
        })
    return all(r["passed"] for r in records), records
