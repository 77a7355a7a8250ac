# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Signatures mirror ``_pykernels``."""

import numpy as np

from libc.math cimport exp, sqrt, log1p, fabs, INFINITY

cdef enum:
    MAXT = 64

cdef int MODE_RATES = 0
cdef int MODE_FTL = 1
cdef int MODE_TIMELESS = 2


cdef inline double _timeless_rate(double best, double logd) nogil:
    cdef double x
    if best <= 0.0:
        x = 0.25
    else:
        x = sqrt(2.0 * logd / best)
        if x > 0.25:
            x = 0.25
    return -log1p(-x)


def kahan_cumsum(x):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], k = xv.shape[1], i, j
    out = np.empty((n, k))
    cdef double[:, ::1] ov = out
    cdef double[::1] s = np.zeros(k), comp = np.zeros(k)
    cdef double v, t
    with nogil:
        for i in range(n):
            for j in range(k):
                v = xv[i, j]
                t = s[j] + v
                if fabs(s[j]) >= fabs(v):
                    comp[j] += (s[j] - t) + v
                else:
                    comp[j] += (v - t) + s[j]
                s[j] = t
                ov[i, j] = t + comp[j]
    return out


def hedge_run(losses, rates, int mode, double logd):
    cdef const double[:, ::1] lv = np.ascontiguousarray(losses, dtype=np.float64)
    cdef Py_ssize_t T = lv.shape[0], d = lv.shape[1], t, j
    w = np.empty((T, d))
    algo = np.empty(T)
    used = np.empty(T + 1)
    cdef double[:, ::1] wv = w
    cdef double[::1] av = algo, uv = used
    cdef const double[::1] rv
    cdef double[::1] L = np.zeros(d)
    cdef double m, r, z, acc
    cdef int ties
    if mode == MODE_RATES:
        rv = np.ascontiguousarray(rates, dtype=np.float64)
    with nogil:
        for t in range(T):
            m = L[0]
            for j in range(1, d):
                if L[j] < m:
                    m = L[j]
            if mode == MODE_FTL:
                ties = 0
                for j in range(d):
                    if L[j] - m == 0.0:
                        ties += 1
                for j in range(d):
                    wv[t, j] = 1.0 / ties if L[j] - m == 0.0 else 0.0
                uv[t] = INFINITY
            else:
                if mode == MODE_TIMELESS:
                    r = _timeless_rate(m, logd)
                else:
                    r = rv[t]
                uv[t] = r
                z = 0.0
                for j in range(d):
                    wv[t, j] = exp(-r * (L[j] - m))
                    z += wv[t, j]
                for j in range(d):
                    wv[t, j] = wv[t, j] / z
            acc = 0.0
            for j in range(d):
                acc += wv[t, j] * lv[t, j]
                L[j] += lv[t, j]
            av[t] = acc
        if mode == MODE_FTL:
            uv[T] = INFINITY
        elif mode == MODE_TIMELESS:
            m = L[0] if d > 0 else 0.0
            for j in range(1, d):
                if L[j] < m:
                    m = L[j]
            uv[T] = _timeless_rate(m, logd)
        else:
            uv[T] = rv[T]
    return w, algo, used


def dh_binary_regret(codes, table):
    cdef const signed char[:, ::1] cv = np.ascontiguousarray(codes, dtype=np.int8)
    cdef const double[:, ::1] fv = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t n = cv.shape[0], T = cv.shape[1], i, t
    cdef Py_ssize_t off = (fv.shape[1] - 1) // 2
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef long l1, l2, delta
    cdef double alg, step
    cdef signed char c
    with nogil:
        for i in range(n):
            l1 = 0
            l2 = 0
            alg = 0.0
            for t in range(T):
                c = cv[i, t]
                delta = l2 - l1
                step = 0.0
                if c == 2 or c == 3:
                    step = fv[t + 1, delta + off]
                if c == 1 or c == 3:
                    step = step + fv[t + 1, off - delta]
                alg = alg + step
                if c == 2 or c == 3:
                    l1 += 1
                if c == 1 or c == 3:
                    l2 += 1
            ov[i] = alg - (l1 if l1 < l2 else l2)
    return out


cdef struct SearchState:
    int T
    int cap
    double eps
    double best
    long long count
    int nwit
    Py_ssize_t off
    Py_ssize_t width
    const double* f
    signed char* wit
    double* wreg


cdef void _dfs(SearchState* st, signed char* path, int t,
               long l1, long l2, double alg) noexcept nogil:
    cdef long delta
    cdef double reg
    cdef int i, j, keep
    cdef const double* row
    if t == st.T:
        reg = alg - (l1 if l1 < l2 else l2)
        st.count += 1
        if reg < st.best - st.eps:
            st.best = reg
            keep = 0
            for i in range(st.nwit):
                if st.wreg[i] <= reg + st.eps:
                    for j in range(st.T):
                        st.wit[keep * st.T + j] = st.wit[i * st.T + j]
                    st.wreg[keep] = st.wreg[i]
                    keep += 1
            st.nwit = keep
        if reg <= st.best + st.eps and st.nwit < st.cap:
            for j in range(st.T):
                st.wit[st.nwit * st.T + j] = path[j]
            st.wreg[st.nwit] = reg
            st.nwit += 1
        return
    delta = l2 - l1
    row = st.f + (t + 1) * st.width
    path[t] = 0
    _dfs(st, path, t + 1, l1, l2, alg)
    path[t] = 1
    _dfs(st, path, t + 1, l1, l2 + 1, alg + row[st.off - delta])
    path[t] = 2
    _dfs(st, path, t + 1, l1 + 1, l2, alg + row[st.off + delta])


def search_min(int T, prefix, table, int cap, double eps):
    if T > MAXT:
        raise ValueError("horizon too large for the search kernel")
    cdef const signed char[::1] pv = np.ascontiguousarray(prefix, dtype=np.int8)
    tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef const double[:, ::1] fv = tab
    cdef int k = pv.shape[0], t
    cdef SearchState st
    cdef signed char path[MAXT]
    cdef long l1 = 0, l2 = 0, delta
    cdef double alg = 0.0
    wit = np.zeros((max(cap, 1), T), dtype=np.int8)
    wreg = np.zeros(max(cap, 1))
    cdef signed char[:, ::1] wv = wit
    cdef double[::1] rv = wreg
    st.T = T
    st.cap = cap
    st.eps = eps
    st.best = INFINITY
    st.count = 0
    st.nwit = 0
    st.width = fv.shape[1]
    st.off = (fv.shape[1] - 1) // 2
    st.f = &fv[0, 0]
    st.wit = &wv[0, 0]
    st.wreg = &rv[0]
    for t in range(k):
        path[t] = pv[t]
        delta = l2 - l1
        if pv[t] == 1:
            alg = alg + fv[t + 1, st.off - delta]
            l2 += 1
        elif pv[t] == 2:
            alg = alg + fv[t + 1, st.off + delta]
            l1 += 1
    with nogil:
        _dfs(&st, path, k, l1, l2, alg)
    n = 0
    for t in range(st.nwit):
        if rv[t] <= st.best + eps:
            wv[n, :] = wv[t, :]
            rv[n] = rv[t]
            n += 1
    return st.best, st.count, wit[:n].copy(), wreg[:n].copy()


def eg_run(outcomes, double scale):
    cdef const double[::1] y = np.ascontiguousarray(outcomes, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0], i
    p = np.empty(n)
    cdef double[::1] pv = p
    cdef double G = 0.0, x, e, pt
    with nogil:
        for i in range(n):
            x = (scale / sqrt(i + 1)) * G
            if x > 0:
                e = exp(-x)
                pt = e / (1.0 + e)
            else:
                pt = 1.0 / (1.0 + exp(x))
            pv[i] = pt
            G += pt - y[i]
    return p


def jacobi_eigh(A, V0, double tol, int max_sweeps):
    cdef const double[:, ::1] av = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t d = av.shape[0], i, j, k, p, q
    Vn = np.eye(d) if V0 is None else np.array(V0, dtype=np.float64, order="C")
    cdef double[:, ::1] V = Vn
    Bn = np.empty((d, d))
    cdef double[:, ::1] B = Bn
    tmpn = np.empty((d, d))
    cdef double[:, ::1] tmp = tmpn
    cdef double norm = 0.0, off, acc, apq, theta, t, c, s, x, y
    cdef int sweeps = 0
    with nogil:
        for i in range(d):
            for j in range(d):
                norm += av[i, j] * av[i, j]
        norm = sqrt(norm)
        # B = V^T A V
        for i in range(d):
            for j in range(d):
                acc = 0.0
                for k in range(d):
                    acc += av[i, k] * V[k, j]
                tmp[i, j] = acc
        for i in range(d):
            for j in range(d):
                acc = 0.0
                for k in range(d):
                    acc += V[k, i] * tmp[k, j]
                B[i, j] = acc
        for i in range(d):
            for j in range(i + 1, d):
                x = 0.5 * (B[i, j] + B[j, i])
                B[i, j] = x
                B[j, i] = x
        while sweeps < max_sweeps:
            off = 0.0
            for i in range(d):
                for j in range(d):
                    if i != j:
                        off += B[i, j] * B[i, j]
            off = sqrt(off)
            if off <= tol * norm or norm == 0.0:
                break
            sweeps += 1
            for p in range(d - 1):
                for q in range(p + 1, d):
                    apq = B[p, q]
                    if apq == 0.0:
                        continue
                    theta = (B[q, q] - B[p, p]) / (2.0 * apq)
                    t = (1.0 if theta >= 0 else -1.0) / (fabs(theta) + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(d):
                        x = B[k, p]
                        y = B[k, q]
                        B[k, p] = c * x - s * y
                        B[k, q] = s * x + c * y
                    for k in range(d):
                        x = B[p, k]
                        y = B[q, k]
                        B[p, k] = c * x - s * y
                        B[q, k] = s * x + c * y
                    B[p, q] = 0.0
                    B[q, p] = 0.0
                    for k in range(d):
                        x = V[k, p]
                        y = V[k, q]
                        V[k, p] = c * x - s * y
                        V[k, q] = s * x + c * y
    evals = np.array([B[i, i] for i in range(d)])
    return evals, Vn, sweeps
