"""Reference kernels in numpy / pure Python.

Every function here has a twin with the same signature in ``_ckernels.pyx``.
Results agree to a few ulps; ``search_min`` and ``dh_binary_regret`` agree
bit-for-bit because both backends read the same probability table and add in
the same order.
"""

import math

import numpy as np

MODE_RATES = 0
MODE_FTL = 1
MODE_TIMELESS = 2


def _timeless_rate(best_loss, logd):
    if best_loss <= 0.0:
        x = 0.25
    else:
        x = min(0.25, math.sqrt(2.0 * logd / best_loss))
    return -math.log1p(-x)


def kahan_cumsum(x):
    """Column-wise compensated (Neumaier) prefix sums of a 2-D array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n, k = x.shape
    out = np.empty_like(x)
    s = np.zeros(k)
    comp = np.zeros(k)
    for i in range(n):
        v = x[i]
        t = s + v
        big = np.abs(s) >= np.abs(v)
        comp += np.where(big, (s - t) + v, (v - t) + s)
        s = t
        out[i] = s + comp
    return out


def hedge_run(losses, rates, mode, logd):
    """Exponential weights over a loss matrix.

    ``rates`` holds r_1..r_{T+1} in rate mode (ignored otherwise). Returns the
    played weights (T, d), per-round algorithm losses (T,) and the rates
    actually used (T+1,), the last one being the rate of the round after T.
    """
    losses = np.ascontiguousarray(losses, dtype=np.float64)
    T, d = losses.shape
    cum = np.cumsum(losses, axis=0)
    prev = np.zeros_like(losses)
    if T > 1:
        prev[1:] = cum[:-1]
    shifted = prev - prev.min(axis=1, keepdims=True)
    if mode == MODE_FTL:
        mask = (shifted == 0.0).astype(np.float64)
        w = mask / mask.sum(axis=1, keepdims=True)
        used = np.full(T + 1, np.inf)
    else:
        if mode == MODE_TIMELESS:
            stars = np.empty(T + 1)
            stars[:T] = prev.min(axis=1) if T else []
            stars[T] = cum[-1].min() if T else 0.0
            used = np.array([_timeless_rate(s, logd) for s in stars])
        else:
            used = np.array(rates, dtype=np.float64)[: T + 1].copy()
        e = np.exp(-used[:T, None] * shifted)
        w = e / e.sum(axis=1, keepdims=True)
    algo = (w * losses).sum(axis=1)
    return w, algo, used


def prob_table(T, scale):
    """f[t, D + T] = 1 / (1 + exp(-eta_t D)) with eta_t = scale / sqrt(t)."""
    f = np.zeros((T + 1, 2 * T + 1))
    deltas = np.arange(-T, T + 1, dtype=np.float64)
    for t in range(1, T + 1):
        x = (scale / math.sqrt(t)) * deltas
        # stable logistic, same branch structure as the compiled twin
        neg = x < 0
        ex = np.exp(np.where(neg, x, -x))
        f[t] = np.where(neg, ex / (1.0 + ex), 1.0 / (1.0 + ex))
    return f


def dh_binary_regret(codes, table):
    """Regret of two-expert Hedge for a batch of coded binary sequences.

    Codes: 0=(0,0), 1=(0,1), 2=(1,0), 3=(1,1). ``table`` is ``prob_table(Tmax)``
    with Tmax >= T.
    """
    codes = np.ascontiguousarray(codes, dtype=np.int8)
    n, T = codes.shape
    off = (table.shape[1] - 1) // 2
    l1 = np.zeros(n, dtype=np.int64)
    l2 = np.zeros(n, dtype=np.int64)
    alg = np.zeros(n)
    for t in range(T):
        c = codes[:, t]
        delta = l2 - l1
        w1 = table[t + 1, delta + off]
        w2 = table[t + 1, off - delta]
        e1 = (c == 2) | (c == 3)
        e2 = (c == 1) | (c == 3)
        step = np.where(e1, w1, 0.0) + np.where(e2, w2, 0.0)
        alg = alg + step
        l1 += e1
        l2 += e2
    return alg - np.minimum(l1, l2)


def search_min(T, prefix, table, cap, eps):
    """Exhaustive minimum of two-expert Hedge regret over {(0,0),(0,1),(1,0)}^T.

    Only sequences beginning with ``prefix`` are enumerated. Returns
    ``(best, count, witnesses, witness_regrets)`` with witnesses in
    lexicographic code order.
    """
    prefix = np.asarray(prefix, dtype=np.int8)
    k = len(prefix)
    off = (table.shape[1] - 1) // 2
    l1 = l2 = 0
    alg = 0.0
    for t in range(k):
        c = int(prefix[t])
        delta = l2 - l1
        if c == 1:
            alg = alg + table[t + 1, off - delta]
            l2 += 1
        elif c == 2:
            alg = alg + table[t + 1, off + delta]
            l1 += 1
    rest = T - k
    chunk = min(rest, 12)
    outer = rest - chunk

    best = math.inf
    wit = []
    wreg = []
    count = 0
    for idx in range(3**outer):
        mid = np.array(_digits(idx, outer), dtype=np.int8)
        a, b1, b2 = alg, l1, l2
        for j, c in enumerate(mid):
            t = k + j
            delta = b2 - b1
            if c == 1:
                a = a + table[t + 1, off - delta]
                b2 += 1
            elif c == 2:
                a = a + table[t + 1, off + delta]
                b1 += 1
        A = np.array([a])
        L1 = np.array([b1], dtype=np.int64)
        L2 = np.array([b2], dtype=np.int64)
        for j in range(chunk):
            t = k + outer + j
            delta = L2 - L1
            A = np.stack([A, A + table[t + 1, off - delta], A + table[t + 1, off + delta]], axis=1).ravel()
            L1 = np.stack([L1, L1, L1 + 1], axis=1).ravel()
            L2 = np.stack([L2, L2 + 1, L2], axis=1).ravel()
        reg = A - np.minimum(L1, L2)
        count += reg.size
        lo = reg.min()
        if lo < best - eps:
            best = lo
            keep = [i for i, r in enumerate(wreg) if r <= best + eps]
            wit = [wit[i] for i in keep]
            wreg = [wreg[i] for i in keep]
        if lo <= best + eps:
            for leaf in np.flatnonzero(reg <= best + eps):
                if len(wit) >= cap:
                    break
                tail = _digits(int(leaf), chunk)
                wit.append(list(prefix) + list(mid) + tail)
                wreg.append(float(reg[leaf]))
    keep = [i for i, r in enumerate(wreg) if r <= best + eps]
    witnesses = np.array([wit[i] for i in keep], dtype=np.int8).reshape(len(keep), T)
    return best, count, witnesses, np.array([wreg[i] for i in keep])


def _digits(idx, n):
    out = [0] * n
    for i in range(n - 1, -1, -1):
        idx, out[i] = divmod(idx, 3)
    return out


def eg_run(outcomes, scale):
    """Exponentiated-gradient forecasts p_t = 1 / (1 + exp(eta_t G_{t-1}))."""
    y = np.asarray(outcomes, dtype=np.float64)
    p = np.empty(len(y))
    G = 0.0
    for i in range(len(y)):
        x = (scale / math.sqrt(i + 1)) * G
        if x > 0:
            e = math.exp(-x)
            pt = e / (1.0 + e)
        else:
            pt = 1.0 / (1.0 + math.exp(x))
        p[i] = pt
        G += pt - y[i]
    return p


def jacobi_eigh(A, V0, tol, max_sweeps):
    """Cyclic Jacobi eigendecomposition, optionally warm-started from basis V0.

    Returns ``(eigenvalues, V, sweeps)`` with ``A ~= V diag(eigenvalues) V^T``.
    """
    A = np.array(A, dtype=np.float64)
    d = A.shape[0]
    V = np.eye(d) if V0 is None else np.array(V0, dtype=np.float64)
    B = V.T @ A @ V
    B = 0.5 * (B + B.T)
    norm = math.sqrt(float((A * A).sum()))
    offdiag = ~np.eye(d, dtype=bool)
    sweeps = 0
    while sweeps < max_sweeps:
        # summed directly: total minus diagonal cancels near convergence
        off = math.sqrt(float((B[offdiag] ** 2).sum()))
        if off <= tol * norm or norm == 0.0:
            break
        sweeps += 1
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = B[p, q]
                if apq == 0.0:
                    continue
                theta = (B[q, q] - B[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                bp = B[:, p].copy()
                bq = B[:, q].copy()
                B[:, p] = c * bp - s * bq
                B[:, q] = s * bp + c * bq
                bp = B[p, :].copy()
                bq = B[q, :].copy()
                B[p, :] = c * bp - s * bq
                B[q, :] = s * bp + c * bq
                B[p, q] = B[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(B).copy(), V, sweeps
