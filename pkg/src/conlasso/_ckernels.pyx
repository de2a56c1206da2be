# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the iterative solver loops in ``_pykernels``.

Signatures and return values match the NumPy fallback; matrix-vector
products go through BLAS ``dgemv`` on the row-major inputs.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()

DEF LS = 0
DEF HUBER = 1
DEF SQHINGE = 2
DEF HUBHINGE = 3


cdef inline void matvec(const double[:, ::1] A, const double* x, double* out) noexcept nogil:
    """out = A @ x for row-major A (m x n)."""
    cdef int m = A.shape[0], n = A.shape[1], inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef char t = b'T'
    cdef int i
    if m == 0:
        return
    if n == 0:
        for i in range(m):
            out[i] = 0.0
        return
    dgemv(&t, &n, &m, &one, <double*>&A[0, 0], &n, <double*>x, &inc, &zero, out, &inc)


cdef inline void rmatvec(const double[:, ::1] A, const double* r, double* out) noexcept nogil:
    """out = A.T @ r for row-major A (m x n)."""
    cdef int m = A.shape[0], n = A.shape[1], inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef char t = b'N'
    cdef int i
    if n == 0:
        return
    if m == 0:
        for i in range(n):
            out[i] = 0.0
        return
    dgemv(&t, &n, &m, &one, <double*>&A[0, 0], &n, <double*>r, &inc, &zero, out, &inc)


cdef inline double sgn(double v) noexcept nogil:
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return 0.0


cdef inline double soft1(double v, double tau) noexcept nogil:
    cdef double a = fabs(v) - tau
    if a <= 0:
        return 0.0
    return sgn(v) * a


cdef inline double grad1(int code, double t, double rho) noexcept nogil:
    if code == LS:
        return 2.0 * t
    if code == HUBER:
        if t > rho:
            return 2.0 * rho
        if t < -rho:
            return -2.0 * rho
        return 2.0 * t
    if code == SQHINGE:
        return 2.0 * (t - 1.0) if t <= 1.0 else 0.0
    if t <= rho:
        return -2.0 * (1.0 - rho)
    if t >= 1.0:
        return 0.0
    return 2.0 * (t - 1.0)


cdef inline double val1(int code, double t, double rho) noexcept nogil:
    cdef double a
    if code == LS:
        return t * t
    if code == HUBER:
        a = fabs(t)
        return a * a if a <= rho else 2.0 * rho * a - rho * rho
    if code == SQHINGE:
        return (1.0 - t) * (1.0 - t) if t <= 1.0 else 0.0
    if t <= rho:
        return (1.0 - rho) * (1.0 + rho - 2.0 * t)
    if t >= 1.0:
        return 0.0
    return (1.0 - t) * (1.0 - t)


cdef inline double amax(const double* v, Py_ssize_t n) noexcept nogil:
    cdef double m = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        if fabs(v[i]) > m:
            m = fabs(v[i])
    return m


cdef void project(const double[:, ::1] Q, double* v, double* tmp) noexcept nogil:
    """v -= Q.T @ (Q @ v) in place; tmp holds k + d scratch entries."""
    cdef Py_ssize_t k = Q.shape[0], d = Q.shape[1], j
    if k == 0:
        return
    matvec(Q, v, tmp)
    rmatvec(Q, tmp, tmp + k)
    for j in range(d):
        v[j] -= tmp[k + j]


def ppds_run(const double[:, ::1] X, const double[::1] y, const double[:, ::1] Q,
             const double[::1] wl, int code, double rho, double tau, z_in,
             int max_iter, double tol):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], k = Q.shape[0], i, j
    cdef double[::1] z = np.array(z_in, dtype=float)
    cdef double[::1] xg = np.empty(d)
    cdef double[::1] xh = np.array(z_in, dtype=float)
    cdef double[::1] r = np.empty(max(n, 1))
    cdef double[::1] g = np.empty(max(d, 1))
    cdef double[::1] tmp = np.empty(k + d + 1)
    cdef double res = np.inf, delta, m
    cdef int it = 0
    with nogil:
        while it < max_iter:
            it += 1
            for j in range(d):
                xg[j] = z[j]
            project(Q, &xg[0], &tmp[0])
            matvec(X, &xg[0], &r[0])
            for i in range(n):
                r[i] = grad1(code, r[i] - y[i], rho)
            rmatvec(X, &r[0], &g[0])
            res = 0.0
            for j in range(d):
                xh[j] = soft1(2.0 * xg[j] - z[j] - tau * g[j], tau * wl[j])
                delta = xh[j] - xg[j]
                z[j] += delta
                if fabs(delta) > res:
                    res = fabs(delta)
            m = amax(&xh[0], d)
            if res <= tol * (m if m > 1.0 else 1.0):
                break
    return np.asarray(xh), np.asarray(z), it, res


def pfpds_run(const double[:, ::1] X, const double[::1] y, const double[:, ::1] C,
              const double[::1] wl, int code, double rho, double gamma, x_in, v_in,
              int max_iter, double tol):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], k = C.shape[0], i, j
    cdef double[::1] x = np.array(x_in, dtype=float)
    cdef double[::1] v = np.array(v_in, dtype=float)
    cdef double[::1] p1 = np.array(x_in, dtype=float)
    cdef double[::1] y1 = np.empty(max(d, 1))
    cdef double[::1] y2 = np.empty(max(k, 1))
    cdef double[::1] r = np.empty(max(n, 1))
    cdef double[::1] g = np.empty(max(d, 1))
    cdef double[::1] cv = np.empty(max(d, 1))
    cdef double[::1] cx = np.empty(max(k, 1))
    cdef double res = np.inf, dx, dv, m, q
    cdef int it = 0
    with nogil:
        while it < max_iter:
            it += 1
            matvec(X, &x[0], &r[0])
            for i in range(n):
                r[i] = grad1(code, r[i] - y[i], rho)
            rmatvec(X, &r[0], &g[0])
            if k:
                rmatvec(C, &v[0], &cv[0])
                matvec(C, &x[0], &cx[0])
            for j in range(d):
                y1[j] = x[j] - gamma * (g[j] + (cv[j] if k else 0.0))
                p1[j] = soft1(y1[j], gamma * wl[j])
            for i in range(k):
                y2[i] = v[i] + gamma * cx[i]
            matvec(X, &p1[0], &r[0])
            for i in range(n):
                r[i] = grad1(code, r[i] - y[i], rho)
            rmatvec(X, &r[0], &g[0])
            if k:
                rmatvec(C, &y2[0], &cv[0])
                matvec(C, &p1[0], &cx[0])
            res = 0.0
            for j in range(d):
                q = p1[j] - gamma * (g[j] + (cv[j] if k else 0.0))
                dx = q - y1[j]
                x[j] += dx
                if fabs(dx) > res:
                    res = fabs(dx)
            for i in range(k):
                dv = (y2[i] + gamma * cx[i]) - y2[i]
                v[i] += dv
                if fabs(dv) > res:
                    res = fabs(dv)
            m = amax(&p1[0], d)
            if res <= tol * (m if m > 1.0 else 1.0):
                break
    return np.asarray(p1), np.asarray(x), np.asarray(v), it, res


cdef double _cubic_root(double eta, double gamma, double unorm2) noexcept nogil:
    cdef double lo = eta if eta > 0.0 else 0.0
    cdef double hi = lo + sqrt(gamma * unorm2) + 1.0
    cdef double s, f, df, step, scale
    cdef int t
    if unorm2 == 0.0:
        return lo
    s = hi
    scale = gamma * unorm2 if gamma * unorm2 > 1.0 else 1.0
    for t in range(200):
        f = (s - eta) * (s + 2.0 * gamma) * (s + 2.0 * gamma) - gamma * unorm2
        if fabs(f) <= 1e-12 * scale:
            break
        if f > 0:
            hi = s
        else:
            lo = s
        df = (s + 2.0 * gamma) * (3.0 * s - 2.0 * eta + 2.0 * gamma)
        step = s - f / df if df > 0 else 0.5 * (lo + hi)
        s = step if (lo < step and step < hi) else 0.5 * (lo + hi)
        if hi - lo <= 1e-16 * (hi if hi > 1.0 else 1.0):
            break
    return s


def cubic_root(double eta, double gamma, double unorm2):
    return _cubic_root(eta, gamma, unorm2)


def dr_run(const double[:, ::1] A, const double[::1] y, const double[:, ::1] K,
           const double[::1] wl, int conc, double csig, double gamma, double zs,
           zu_in, zb_in, int max_iter, double tol):
    cdef Py_ssize_t n = A.shape[0], p = A.shape[1], i, j
    cdef double[::1] zu = np.array(zu_in, dtype=float)
    cdef double[::1] zb = np.array(zb_in, dtype=float)
    cdef double[::1] yb = np.array(zb_in, dtype=float)
    cdef double[::1] xb = np.array(zb_in, dtype=float)
    cdef double[::1] t = np.empty(max(n, 1))
    cdef double[::1] a = np.empty(max(p, 1))
    cdef double[::1] xu = np.empty(max(n, 1))
    cdef double[::1] ru = np.empty(max(n, 1))
    cdef double ys = zs, res = np.inf, eta, un2, ds, fac, d1, scale, m
    cdef int it = 0
    with nogil:
        while it < max_iter:
            it += 1
            for i in range(n):
                t[i] = y[i] + zu[i]
            rmatvec(A, &t[0], &a[0])
            for j in range(p):
                a[j] += zb[j]
            matvec(K, &a[0], &xb[0])
            matvec(A, &xb[0], &xu[0])
            un2 = 0.0
            for i in range(n):
                xu[i] -= y[i]
                ru[i] = 2.0 * xu[i] - zu[i]
                un2 += ru[i] * ru[i]
            res = 0.0
            for j in range(p):
                yb[j] = soft1(2.0 * xb[j] - zb[j], gamma * wl[j])
                d1 = yb[j] - xb[j]
                zb[j] += d1
                if fabs(d1) > res:
                    res = fabs(d1)
            if conc:
                eta = zs - gamma * csig
                if eta + un2 / (4.0 * gamma) <= 0.0:
                    ys = 0.0
                    fac = 0.0
                else:
                    ys = _cubic_root(eta, gamma, un2)
                    fac = ys / (ys + 2.0 * gamma)
                ds = ys - zs
            else:
                fac = 1.0 / (1.0 + 2.0 * gamma)
                ds = 0.0
            for i in range(n):
                d1 = ru[i] * fac - xu[i]
                zu[i] += d1
                if fabs(d1) > res:
                    res = fabs(d1)
            zs += ds
            if fabs(ds) > res:
                res = fabs(ds)
            m = amax(&yb[0], p)
            scale = 1.0
            if m > scale:
                scale = m
            if fabs(ys) > scale:
                scale = fabs(ys)
            if res <= tol * scale:
                break
    return np.asarray(yb), ys, np.asarray(xb), zs, np.asarray(zu), np.asarray(zb), it, res


cdef double sigma_obj(int code, const double* r, Py_ssize_t n, double rr, double rho,
                      int conc, double csig, double s) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    if conc == 1:
        return rr / s + csig * s
    for i in range(n):
        acc += val1(code, r[i] / s, rho)
    return acc * s + csig * s


cdef double _golden(int code, const double* r, Py_ssize_t n, double rho, int conc,
                    double csig) noexcept nogil:
    cdef double rr = 0.0, am = 0.0, hi, lo, a, b, c, e, fc, fe, invphi, h1
    cdef Py_ssize_t i
    cdef int t
    for i in range(n):
        rr += r[i] * r[i]
        if fabs(r[i]) > am:
            am = fabs(r[i])
    if sqrt(rr) == 0.0:
        return 1e-12
    h1 = am / rho if conc == 2 else 0.0
    hi = sqrt(rr) / sqrt(csig)
    if h1 > hi:
        hi = h1
    hi = 1.5 * hi + 1e-12
    lo = 1e-12
    invphi = (sqrt(5.0) - 1.0) / 2.0
    a = lo
    b = hi
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc = sigma_obj(code, r, n, rr, rho, conc, csig, c)
    fe = sigma_obj(code, r, n, rr, rho, conc, csig, e)
    for t in range(90):
        if fc <= fe:
            b = e
            e = c
            fe = fc
            c = b - invphi * (b - a)
            fc = sigma_obj(code, r, n, rr, rho, conc, csig, c)
        else:
            a = c
            c = e
            fc = fe
            e = a + invphi * (b - a)
            fe = sigma_obj(code, r, n, rr, rho, conc, csig, e)
    return 0.5 * (a + b)


def golden_sigma(int code, const double[::1] r, double rho, int conc, double csig):
    return _golden(code, &r[0], r.shape[0], rho, conc, csig)


def subgrad_run(const double[:, ::1] A, const double[::1] y, const double[:, ::1] Q,
                const double[::1] wl, int code, double rho, int conc, double csig,
                double a0, int epochs, int per_epoch, double decay):
    cdef Py_ssize_t n = A.shape[0], d = A.shape[1], kq = Q.shape[0], i, j
    cdef bint margin = code >= SQHINGE
    cdef double[::1] beta = np.zeros(d)
    cdef double[::1] best_b = np.zeros(d)
    cdef double[::1] t = np.empty(max(n, 1))
    cdef double[::1] gl = np.empty(max(n, 1))
    cdef double[::1] g = np.empty(max(d, 1))
    cdef double[::1] tmp = np.empty(kq + d + 1)
    cdef double[::1] hist = np.empty(max(epochs, 1))
    cdef double best_s = 0.0, best_f = np.inf, alpha = a0, s, f, gn, step
    cdef int ep, kk
    with nogil:
        for ep in range(epochs):
            for j in range(d):
                beta[j] = best_b[j]
            for kk in range(per_epoch):
                matvec(A, &beta[0], &t[0])
                if not margin:
                    for i in range(n):
                        t[i] -= y[i]
                if conc:
                    s = _golden(code, &t[0], n, rho, conc, csig)
                    f = 0.0
                    for i in range(n):
                        f += t[i] * t[i]
                    f = sigma_obj(code, &t[0], n, f, rho, conc, csig, s)
                    for i in range(n):
                        gl[i] = grad1(code, t[i] / s, rho) if conc == 2 else 2.0 * t[i] / s
                else:
                    s = 0.0
                    f = 0.0
                    for i in range(n):
                        f += val1(code, t[i], rho)
                        gl[i] = grad1(code, t[i], rho)
                for j in range(d):
                    f += wl[j] * fabs(beta[j])
                if f < best_f:
                    best_f = f
                    for j in range(d):
                        best_b[j] = beta[j]
                    best_s = s
                rmatvec(A, &gl[0], &g[0])
                for j in range(d):
                    g[j] += wl[j] * sgn(beta[j])
                project(Q, &g[0], &tmp[0])
                gn = 0.0
                for j in range(d):
                    gn += g[j] * g[j]
                gn = sqrt(gn)
                if gn == 0.0:
                    break
                step = alpha / sqrt(kk + 1.0) / gn
                for j in range(d):
                    beta[j] -= step * g[j]
            hist[ep] = best_f
            alpha *= decay
    return np.asarray(best_b), best_s, best_f, np.asarray(hist)[:epochs].copy()
