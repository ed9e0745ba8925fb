"""Compiled inner loops for the coordinate solvers."""
import numpy as np
from numba import njit

TAU = 1e-12


@njit(cache=True)
def _projected_residual(a, grad, lo, hi):
    res = 0.0
    for i in range(a.shape[0]):
        p = min(max(a[i] - grad[i], lo[i]), hi[i])
        r = abs(p - a[i])
        if r > res:
            res = r
    return res


@njit(cache=True)
def box_cd(Q, g, lo, hi, a, tol, max_sweeps):
    """Cyclic exact coordinate descent on ``0.5 a'Qa + g'a`` over a box.

    ``a`` is updated in place.  Returns (sweeps, residual).
    """
    n = a.shape[0]
    grad = Q @ a + g
    res = _projected_residual(a, grad, lo, hi)
    sweeps = 0
    while res > tol and sweeps < max_sweeps:
        for i in range(n):
            qii = Q[i, i]
            gi = grad[i]
            if qii > 0.0:
                new = min(max(a[i] - gi / qii, lo[i]), hi[i])
            elif gi > 0.0:
                new = lo[i]
            elif gi < 0.0:
                new = hi[i]
            else:
                new = a[i]
            d = new - a[i]
            if d != 0.0:
                a[i] = new
                for j in range(n):
                    grad[j] += d * Q[i, j]
        sweeps += 1
        res = _projected_residual(a, grad, lo, hi)
        if res <= tol:
            # refresh to shed accumulated drift before accepting
            grad = Q @ a + g
            res = _projected_residual(a, grad, lo, hi)
    return sweeps, res


@njit(cache=True)
def smo(K, y, C, tol, max_iter, alpha0):
    """SMO with second-order working-set selection for the biased SVM dual.

    Minimizes ``0.5 a'Qa - sum(a)`` with ``Q_ij = y_i y_j K_ij``, subject to
    ``y'a = 0`` and ``0 <= a_i <= C_i``, starting from the feasible point
    ``alpha0``.  Returns (alpha, rho, iterations, gap) where the decision
    function is ``sum_i a_i y_i K(x_i, x) - rho``.
    """
    n = y.shape[0]
    alpha = alpha0.copy()
    G = -np.ones(n)
    for t in range(n):
        if alpha[t] != 0.0:
            for s in range(n):
                G[s] += y[s] * y[t] * K[t, s] * alpha[t]
    it = 0
    gap = np.inf
    while it < max_iter:
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C[t]) or (y[t] < 0 and alpha[t] > 0.0):
                v = -y[t] * G[t]
                if v >= gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0.0) or (y[t] < 0 and alpha[t] < C[t]):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                if i >= 0 and v < gmax:
                    b = gmax - v
                    quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if quad <= 0.0:
                        quad = TAU
                    obj = -(b * b) / quad
                    if obj <= best:
                        best = obj
                        j = t
        gap = gmax - gmin
        if gap <= tol or i < 0 or j < 0:
            break
        it += 1

        Ci = C[i]
        Cj = C[j]
        old_i = alpha[i]
        old_j = alpha[j]
        Qij = y[i] * y[j] * K[i, j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] + 2.0 * Qij
            if quad <= 0.0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > Ci - Cj:
                if alpha[i] > Ci:
                    alpha[i] = Ci
                    alpha[j] = Ci - diff
            else:
                if alpha[j] > Cj:
                    alpha[j] = Cj
                    alpha[i] = Cj + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * Qij
            if quad <= 0.0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > Ci:
                if alpha[i] > Ci:
                    alpha[i] = Ci
                    alpha[j] = s - Ci
            else:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > Cj:
                if alpha[j] > Cj:
                    alpha[j] = Cj
                    alpha[i] = s - Cj
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = s

        di = alpha[i] - old_i
        dj = alpha[j] - old_j
        for t in range(n):
            G[t] += y[t] * (y[i] * K[i, t] * di + y[j] * K[j, t] * dj)

    # bias from free vectors, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    nfree = 0
    sfree = 0.0
    for t in range(n):
        yg = y[t] * G[t]
        if alpha[t] >= C[t]:
            if y[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0.0:
            if y[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            sfree += yg
    if nfree > 0:
        rho = sfree / nfree
    elif np.isfinite(ub) and np.isfinite(lb):
        rho = 0.5 * (ub + lb)
    elif np.isfinite(ub):
        rho = ub
    else:
        rho = lb
    return alpha, rho, it, gap
