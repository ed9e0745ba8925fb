"""Quadratic-program solvers.

Two problem forms are supported, both in minimization convention:

* :class:`BoxQp` -- ``min 0.5 a'Qa + g'a  s.t.  lower <= a <= upper``, solved
  by cyclic exact coordinate descent (:func:`solve_box_qp`).  This is the
  production path for the dual transform step.
* :class:`InequalityQp` -- ``min 0.5 z'Hz + f'z  s.t.  A z >= b`` with optional
  non-negativity on selected coordinates, solved by a dense Mehrotra
  predictor-corrector interior-point method (:func:`solve_inequality_qp`).
  Used for the primal transform step and as a reference solver.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._kernels import box_cd
from .core import InvalidArgumentError
from .validation import check_matrix, check_symmetric, check_vector

logger = logging.getLogger(__name__)


class InfeasibleError(RuntimeError):
    """The constraint set of an inequality QP appears to be empty."""


@dataclass(frozen=True, eq=False)
class BoxQp:
    hessian: np.ndarray
    linear: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        Q = check_symmetric(check_matrix(self.hessian, "hessian"), "hessian")
        n = Q.shape[0]
        g = check_vector(self.linear, "linear", n)
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise InvalidArgumentError("box bounds must satisfy lower <= upper")
        for name, val in (("hessian", Q), ("linear", g), ("lower", lo), ("upper", hi)):
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.linear.shape[0]

    def objective(self, a):
        return 0.5 * a @ self.hessian @ a + self.linear @ a


@dataclass(frozen=True, eq=False)
class BoxQpResult:
    x: np.ndarray
    objective: float
    kkt_residual: float
    converged: bool
    sweeps: int

    def __iter__(self):
        # unpacks as (solution, objective, kkt_residual)
        return iter((self.x, self.objective, self.kkt_residual))


CD_BUDGET = 200


def solve_box_qp(p: BoxQp, tol=1e-6, max_sweeps=None, x0=None, fallback=True) -> BoxQpResult:
    """Minimize a box-constrained convex quadratic by coordinate descent.

    Each coordinate is minimized exactly and clipped.  A coordinate with a zero
    diagonal moves to the bound picked by the sign of its gradient; a zero
    gradient leaves it in place.  Iteration stops once the projected-gradient
    residual ``max_i |clip(a_i - grad_i) - a_i|`` is at most ``tol``.  Hitting
    ``max_sweeps`` (default ``max(10 n, 1000)``) is reported through
    ``converged=False`` rather than raised.

    Coordinate descent crawls on strongly rank-deficient Hessians.  With
    ``fallback`` (default), if ``CD_BUDGET`` sweeps do not reach ``tol`` the
    problem is re-solved by interior point and the clipped point is polished
    by active-set refinement (Newton on the free set, then a ratio-test move
    along the null-space part of the free gradient).  The polished point
    replaces the iterate only when its objective is no larger, and sweeps then
    resume from there.
    """
    if not tol > 0:
        raise InvalidArgumentError("tol must be > 0")
    n = p.n
    if max_sweeps is None:
        max_sweeps = max(10 * n, 1000)
    diag = np.diag(p.hessian)
    if np.any(diag < 0):
        raise InvalidArgumentError("hessian has a negative diagonal entry; it is not PSD")
    flat = diag == 0
    if np.any(flat & ~(np.isfinite(p.lower) & np.isfinite(p.upper))):
        raise InvalidArgumentError("coordinate with zero curvature needs finite bounds")
    if x0 is None:
        a = np.clip(np.zeros(n), p.lower, p.upper)
    else:
        a = np.clip(check_vector(x0, "x0", n), p.lower, p.upper)
    a = np.ascontiguousarray(a)
    Q = np.ascontiguousarray(p.hessian)
    first = min(CD_BUDGET, max_sweeps) if fallback else max_sweeps
    sweeps, res = box_cd(Q, p.linear, p.lower, p.upper, a, float(tol), int(first))
    if res > tol and fallback and sweeps < max_sweeps:
        b = _box_interior_point(p, tol)
        if b is not None:
            b = _refine_active_set(p, b, tol)
            if p.objective(b) <= p.objective(a):
                a[:] = b
        more, res = box_cd(Q, p.linear, p.lower, p.upper, a, float(tol), int(max_sweeps - sweeps))
        sweeps += more
    converged = res <= tol
    if not converged:
        logger.warning("box QP stopped after %d sweeps with residual %.3g", sweeps, res)
    return BoxQpResult(a, float(p.objective(a)), float(res), bool(converged), int(sweeps))


def _box_interior_point(p: BoxQp, tol):
    lo_ok = np.isfinite(p.lower)
    hi_ok = np.isfinite(p.upper)
    eye = np.eye(p.n)
    A = np.vstack([eye[lo_ok], -eye[hi_ok]])
    b = np.concatenate([p.lower[lo_ok], -p.upper[hi_ok]])
    try:
        res = solve_inequality_qp(InequalityQp(p.hessian, p.linear, A, b), tol=min(tol, 1e-9) * 1e-2)
    except (InfeasibleError, np.linalg.LinAlgError):
        return None
    return np.clip(res.x, p.lower, p.upper)


def _kkt_residual(p, a):
    grad = p.hessian @ a + p.linear
    return float(np.max(np.abs(np.clip(a - grad, p.lower, p.upper) - a), initial=0.0))


def _refine_active_set(p, a, tol, rounds=None, rcond=1e-10):
    Q, g, lo, hi = p.hessian, p.linear, p.lower, p.upper
    a = a.copy()
    f_a = p.objective(a)
    for _ in range(rounds or p.n):
        if _kkt_residual(p, a) <= tol:
            break
        grad = Q @ a + g
        at_lo = (a - lo <= grad) & (grad > 0)
        at_hi = (hi - a <= -grad) & (grad < 0)
        c = a.copy()
        c[at_lo] = lo[at_lo]
        c[at_hi] = hi[at_hi]
        free = np.flatnonzero(~(at_lo | at_hi))
        if free.size:
            grad_f = (Q @ c + g)[free]
            Qff = Q[np.ix_(free, free)]
            lam, vecs = np.linalg.eigh(Qff)
            keep = lam > rcond * max(lam[-1], np.finfo(float).tiny)
            coef = vecs.T @ grad_f
            x = np.clip(c[free] - vecs[:, keep] @ (coef[keep] / lam[keep]), lo[free], hi[free])
            # objective is (nearly) linear along the null-space part: move to the first bound
            nd = -(vecs[:, ~keep] @ coef[~keep])
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(nd < 0, (lo[free] - x) / nd,
                                 np.where(nd > 0, (hi[free] - x) / nd, np.inf))
            t = float(np.min(ratio))
            curv = nd @ Qff @ nd
            if curv > 0:
                t = min(t, float(nd @ nd) / curv)
            if np.isfinite(t) and t > 0:
                x = np.clip(x + t * nd, lo[free], hi[free])
            c[free] = x
        f_c = p.objective(c)
        if not f_c <= f_a + 1e-15 * abs(f_a) or np.array_equal(c, a):
            break
        a, f_a = c, f_c
    return a


@dataclass(frozen=True, eq=False)
class InequalityQp:
    """``min 0.5 z'Hz + f'z`` subject to ``A z >= b`` and ``z[nonneg] >= 0``."""

    hessian: np.ndarray
    linear: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    nonneg: np.ndarray | None = None

    def __post_init__(self):
        H = check_symmetric(check_matrix(self.hessian, "hessian"), "hessian")
        n = H.shape[0]
        f = check_vector(self.linear, "linear", n)
        if self.A is None:
            A = np.zeros((0, n))
            b = np.zeros(0)
        else:
            A = check_matrix(self.A, "A", (None, n))
            b = check_vector(self.b, "b", A.shape[0])
        mask = np.zeros(n, dtype=bool) if self.nonneg is None else np.asarray(self.nonneg, bool)
        if mask.shape != (n,):
            raise InvalidArgumentError("nonneg mask must have one entry per variable")
        for name, val in (("hessian", H), ("linear", f), ("A", A), ("b", b), ("nonneg", mask)):
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.linear.shape[0]

    def objective(self, z):
        return 0.5 * z @ self.hessian @ z + self.linear @ z

    def stacked_constraints(self):
        """All inequalities as one ``G z >= h`` block (non-negativity rows appended)."""
        idx = np.flatnonzero(self.nonneg)
        E = np.zeros((idx.size, self.n))
        E[np.arange(idx.size), idx] = 1.0
        return np.vstack([self.A, E]), np.concatenate([self.b, np.zeros(idx.size)])


@dataclass(frozen=True, eq=False)
class InequalityQpResult:
    x: np.ndarray
    objective: float
    multipliers: np.ndarray  # one per row of stacked_constraints()
    converged: bool
    iterations: int
    residuals: dict

    def __iter__(self):
        return iter((self.x, self.objective))


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def _newton_solver(M, reg):
    """Solver for ``M x = r`` through a factorization of ``M + reg``, refined against ``M``."""
    try:
        c = linalg.cho_factor(M + reg, lower=True, check_finite=False)

        def base(r):
            return linalg.cho_solve(c, r, check_finite=False)
    except linalg.LinAlgError:
        def base(r):
            return linalg.lstsq(M + reg, r, check_finite=False)[0]

    def solve(r):
        x = base(r)
        for _ in range(2):
            x = x + base(r - M @ x)
        return x
    return solve


def _newton_solve(M, rhs):
    return _newton_solver(M, np.zeros_like(M))(rhs)


def solve_inequality_qp(p: InequalityQp, tol=1e-9, max_iter=100) -> InequalityQpResult:
    """Primal-dual interior point (Mehrotra predictor-corrector) for a dense convex QP.

    Converged means stationarity, primal feasibility and the average
    complementarity ``s'lambda / m`` are all below ``tol`` (scaled by the
    problem data).  If round-off stalls progress first, the best iterate is
    returned with ``converged=False``.  Raises :class:`InfeasibleError` when the multipliers
    diverge while primal infeasibility persists.
    """
    H, f = p.hessian, p.linear
    G, h = p.stacked_constraints()
    n, m = p.n, G.shape[0]
    scale_d = 1.0 + np.max(np.abs(f), initial=0.0)
    scale_p = 1.0 + np.max(np.abs(h), initial=0.0)

    if m == 0:
        z = _newton_solve(H, -f)
        r_d = H @ z + f
        return InequalityQpResult(z, float(p.objective(z)), np.zeros(0),
                                  bool(np.max(np.abs(r_d), initial=0) <= tol * scale_d), 0,
                                  {"stationarity": float(np.max(np.abs(r_d), initial=0)),
                                   "feasibility": 0.0, "complementarity": 0.0})

    z = np.zeros(n)
    s = np.maximum(G @ z - h, 1.0)
    lam = np.ones(m)
    converged = False
    best = (np.inf, z, s, lam)
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        r_d = H @ z + f - G.T @ lam
        r_p = G @ z - s - h
        mu = s @ lam / m
        err = max(np.max(np.abs(r_d)) / scale_d, np.max(np.abs(r_p)) / scale_p, mu)
        if err < best[0]:
            best = (err, z, s, lam)
            stall = 0
        else:
            stall += 1
        if err <= tol:
            converged = True
            break
        if stall >= 8 or np.min(s) < 1e-200:
            # round-off floor reached; fall back to the best iterate seen
            break
        if np.max(lam) > 1e12 * scale_d and np.max(np.abs(r_p)) / scale_p > tol:
            raise InfeasibleError(
                f"constraints appear infeasible (primal residual {np.max(np.abs(r_p)):.3g}, "
                f"multipliers {np.max(lam):.3g})")

        d = lam / s
        M = H + (G.T * d) @ G
        solve = _newton_solver(M, np.diag(1e-14 * (1.0 + np.abs(np.diag(M)))))

        def direction(r_c):
            rhs = -r_d + G.T @ ((r_c - lam * r_p) / s)
            dz = solve(rhs)
            ds = G @ dz + r_p
            dl = (r_c - lam * ds) / s
            return dz, ds, dl

        # predictor
        dz, ds, dl = direction(-s * lam)
        a_aff = min(_max_step(s, ds), _max_step(lam, dl))
        mu_aff = (s + a_aff * ds) @ (lam + a_aff * dl) / m
        sigma = (mu_aff / mu) ** 3
        # corrector
        dz, ds, dl = direction(-s * lam - ds * dl + sigma * mu)
        step = 0.99 * min(_max_step(s, ds), _max_step(lam, dl))
        z = z + step * dz
        s = s + step * ds
        lam = lam + step * dl
    if not converged:
        _, z, s, lam = best
        log = logger.warning if best[0] > 100 * tol else logger.debug
        log("interior point stopped after %d iterations at error %.3g", it, best[0])

    r_d = H @ z + f - G.T @ lam
    residuals = {
        "stationarity": float(np.max(np.abs(r_d))),
        "feasibility": float(max(0.0, np.max(h - G @ z))),
        "complementarity": float(np.max(np.abs(s * lam))),
    }
    return InequalityQpResult(z, float(p.objective(z)), lam, converged, it, residuals)
