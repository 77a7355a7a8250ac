"""Small convex solvers used by the FTRL engines and regularizer infima."""

from __future__ import annotations

import math

import numpy as np

from .core import project_simplex

MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


def box_pg_residual(w, g, lo, hi) -> float:
    """Norm of the projected-gradient step, zero exactly at a box KKT point."""
    return float(np.linalg.norm(w - np.clip(w - g, lo, hi)))


def box_qp(A, b, lo, hi, tol=1e-10, w0=None):
    """Minimize 0.5 w'Aw + b'w over lo <= w <= hi for positive definite A.

    Projected Newton with an active set, falling back to projected gradient
    if the Newton phase stalls. Returns ``(w, residual)``.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = b.shape[0]
    if w0 is None:
        try:
            w = np.clip(np.linalg.solve(A, -b), lo, hi)
        except np.linalg.LinAlgError:
            w = np.clip(np.zeros(d), lo, hi)
    else:
        w = np.clip(np.asarray(w0, dtype=np.float64), lo, hi)
    scale = max(1.0, float(np.abs(A).max()), float(np.abs(b).max()))
    for _ in range(4 * d + 20):
        g = A @ w + b
        res = box_pg_residual(w, g, lo, hi)
        if res <= tol * scale:
            return w, res
        at_lo = (w <= lo) & (g > 0)
        at_hi = (w >= hi) & (g < 0)
        free = ~(at_lo | at_hi)
        if not free.any():
            break
        step = np.zeros(d)
        AF = A[np.ix_(free, free)]
        try:
            step[free] = -np.linalg.solve(AF, g[free])
        except np.linalg.LinAlgError:
            break
        f0 = 0.5 * w @ A @ w + b @ w
        alpha = 1.0
        while alpha > 1e-12:
            cand = np.clip(w + alpha * step, lo, hi)
            if 0.5 * cand @ A @ cand + b @ cand <= f0 + 1e-4 * g @ (cand - w):
                break
            alpha *= 0.5
        if alpha <= 1e-12:
            break
        w = cand
    L = float(np.linalg.eigvalsh(0.5 * (A + A.T)).max())
    return pgd(lambda v: A @ v + b, lambda v: np.clip(v, lo, hi), w, L, tol * scale,
               residual=lambda v, gv: box_pg_residual(v, gv, lo, hi))


def pgd(grad, project, w0, lipschitz, tol, residual=None, max_iter=MAX_ITER):
    """Projected gradient descent with step 1/L and an accelerated momentum term.

    Stops when the projected-gradient residual drops below ``tol``.
    """
    step = 1.0 / max(lipschitz, 1e-300)
    if residual is None:
        def residual(v, gv):
            return float(np.linalg.norm(v - project(v - gv)))
    w = project(np.asarray(w0, dtype=np.float64))
    y, tk = w.copy(), 1.0
    res = math.inf
    for _ in range(max_iter):
        g = grad(w)
        res = residual(w, g)
        if res <= tol:
            return w, res
        gy = grad(y)
        w_new = project(y - step * gy)
        tk1 = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        y = w_new + ((tk - 1.0) / tk1) * (w_new - w)
        if (w_new - w) @ (gy) > 0:  # restart when momentum points uphill
            y, tk1 = w_new.copy(), 1.0
        w, tk = w_new, tk1
    raise ConvergenceError("projected gradient did not converge", res)


def simplex_residual(w, g) -> float:
    return float(np.linalg.norm(w - project_simplex(w - g)))


def entropic_simplex(grad_loss, eta, d, tol=1e-10, max_iter=MAX_ITER):
    """argmin_w F(w) + (1/eta) sum w log w over the simplex for convex smooth F.

    Mirror-descent fixed point w <- softmax(-eta * grad F(w)), damped in log
    space. Returns ``(w, residual)`` where the residual is the spread of
    ``grad F + (1/eta)(log w + 1)`` over the support, which is zero at the optimum.
    """
    w = np.full(d, 1.0 / d)
    lam = 1.0
    prev = math.inf
    res = math.inf
    for _ in range(max_iter):
        z = -eta * grad_loss(w)
        tgt = np.exp(z - z.max())
        tgt /= tgt.sum()
        lw = np.log(np.maximum(w, 1e-300))
        res = float(np.abs(lw - np.log(np.maximum(tgt, 1e-300))).max()) / eta
        if res <= tol:
            return w, res
        if res > prev:
            lam = max(lam * 0.5, 1e-6)
        prev = res
        lw = (1 - lam) * lw + lam * np.log(np.maximum(tgt, 1e-300))
        w = np.exp(lw - lw.max())
        w /= w.sum()
    raise ConvergenceError("entropic fixed point did not converge", res)
