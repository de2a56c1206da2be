"""Pure NumPy implementations of the iterative solver loops.

These mirror ``_ckernels.pyx`` operation for operation; the compiled module
is preferred at import time and this one is the fallback.
"""
import math

import numpy as np

# loss codes shared with the compiled kernels
LS, HUBER, SQHINGE, HUBHINGE = 0, 1, 2, 3


def _loss_grad(code, t, rho):
    if code == LS:
        return 2.0 * t
    if code == HUBER:
        return 2.0 * np.clip(t, -rho, rho)
    if code == SQHINGE:
        return np.where(t <= 1.0, 2.0 * (t - 1.0), 0.0)
    g = np.where(t >= 1.0, 0.0, 2.0 * (t - 1.0))
    return np.where(t <= rho, -2.0 * (1.0 - rho), g)


def _loss_val(code, t, rho):
    if code == LS:
        return float(t @ t)
    if code == HUBER:
        a = np.abs(t)
        return float(np.sum(np.where(a <= rho, a * a, 2.0 * rho * a - rho * rho)))
    if code == SQHINGE:
        return float(np.sum(np.where(t <= 1.0, (1.0 - t) ** 2, 0.0)))
    v = np.where(t >= 1.0, 0.0, (1.0 - t) ** 2)
    v = np.where(t <= rho, (1.0 - rho) * (1.0 + rho - 2.0 * t), v)
    return float(np.sum(v))


def _soft(v, tau):
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def ppds_run(X, y, Q, wl, code, rho, tau, z, max_iter, tol):
    """Projected splitting: ``xg = P z``, forward-backward step, ``z += xh - xg``.

    Without constraint rows ``xg == z`` and the loop is plain proximal
    gradient descent.
    """
    z = np.array(z, dtype=float)
    has_c = Q.shape[0] > 0
    xh = z.copy()
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        xg = z - Q.T @ (Q @ z) if has_c else z
        g = X.T @ _loss_grad(code, X @ xg - y, rho)
        xh = _soft(2.0 * xg - z - tau * g, tau * wl)
        delta = xh - xg
        z = z + delta
        res = float(np.max(np.abs(delta))) if delta.size else 0.0
        if res <= tol * max(1.0, float(np.max(np.abs(xh)))):
            break
    return xh, z, it, res


def pfpds_run(X, y, C, wl, code, rho, gamma, x, v, max_iter, tol):
    """Forward-backward-forward primal-dual loop with the constraint dualized."""
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    p1 = x.copy()
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = X.T @ _loss_grad(code, X @ x - y, rho)
        y1 = x - gamma * (g + C.T @ v)
        y2 = v + gamma * (C @ x)
        p1 = _soft(y1, gamma * wl)
        p2 = y2
        g1 = X.T @ _loss_grad(code, X @ p1 - y, rho)
        q1 = p1 - gamma * (g1 + C.T @ p2)
        q2 = p2 + gamma * (C @ p1)
        dx = q1 - y1
        dv = q2 - y2
        x = x + dx
        v = v + dv
        res = max(float(np.max(np.abs(dx))),
                  float(np.max(np.abs(dv))) if dv.size else 0.0)
        if res <= tol * max(1.0, float(np.max(np.abs(p1)))):
            break
    return p1, x, v, it, res


def cubic_root(eta, gamma, unorm2):
    lo = max(eta, 0.0)
    hi = lo + math.sqrt(gamma * unorm2) + 1.0
    if unorm2 == 0.0:
        return lo
    s = hi
    scale = max(1.0, gamma * unorm2)
    for _ in range(200):
        f = (s - eta) * (s + 2.0 * gamma) ** 2 - gamma * unorm2
        if abs(f) <= 1e-12 * scale:
            break
        if f > 0:
            hi = s
        else:
            lo = s
        df = (s + 2.0 * gamma) * (3.0 * s - 2.0 * eta + 2.0 * gamma)
        step = s - f / df if df > 0 else 0.5 * (lo + hi)
        s = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    return s


def dr_run(A, y, K, wl, conc, csig, gamma, zs, zu, zb, max_iter, tol):
    """Douglas-Rachford on ``(sigma, u, b)`` with ``u = A b - y``, ``C b = 0``.

    ``K`` applies the affine projection: ``b = K (A^T (y + a) + c)``.
    """
    zu = np.array(zu, dtype=float)
    zb = np.array(zb, dtype=float)
    zs = float(zs)
    yb = zb.copy()
    xb = zb.copy()
    ys = zs
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        xb = K @ (A.T @ (y + zu) + zb)
        xu = A @ xb - y
        ru = 2.0 * xu - zu
        rb = 2.0 * xb - zb
        yb = _soft(rb, gamma * wl)
        if conc:
            eta = zs - gamma * csig
            un2 = float(ru @ ru)
            if eta + un2 / (4.0 * gamma) <= 0.0:
                ys = 0.0
                yu = np.zeros_like(ru)
            else:
                ys = cubic_root(eta, gamma, un2)
                yu = ru * (ys / (ys + 2.0 * gamma))
            ds = ys - zs
        else:
            yu = ru / (1.0 + 2.0 * gamma)
            ds = 0.0
        du = yu - xu
        db = yb - xb
        zs += ds
        zu = zu + du
        zb = zb + db
        res = max(abs(ds), float(np.max(np.abs(du))), float(np.max(np.abs(db))))
        scale = max(1.0, float(np.max(np.abs(yb))), abs(ys))
        if res <= tol * scale:
            break
    return yb, ys, xb, zs, zu, zb, it, res


def _sigma_obj(code, r, rho, conc, csig, s):
    if conc == 1:
        return float(r @ r) / s + csig * s
    return _loss_val(code, r / s, rho) * s + csig * s


def golden_sigma(code, r, rho, conc, csig):
    """Golden-section minimization of the sigma objective at fixed residual."""
    rn = math.sqrt(float(r @ r))
    if rn == 0.0:
        return 1e-12
    amax = float(np.max(np.abs(r)))
    hi = 1.5 * max(amax / rho if conc == 2 else 0.0, rn / math.sqrt(csig)) + 1e-12
    lo = 1e-12
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc = _sigma_obj(code, r, rho, conc, csig, c)
    fe = _sigma_obj(code, r, rho, conc, csig, e)
    for _ in range(90):
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = _sigma_obj(code, r, rho, conc, csig, c)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = _sigma_obj(code, r, rho, conc, csig, e)
    return 0.5 * (a + b)


def subgrad_run(A, y, Q, wl, code, rho, conc, csig, a0, epochs, per_epoch, decay):
    """Projected normalized subgradient descent with epoch-wise step decay.

    Each epoch restarts from the best point found so far with step
    ``alpha_e / sqrt(k + 1)``; ``alpha_e`` shrinks by ``decay`` per epoch.
    For ``code >= 2`` (margin losses) the residual is ``A b`` itself.
    """
    d = A.shape[1]
    has_c = Q.shape[0] > 0
    margin = code >= SQHINGE
    beta = np.zeros(d)
    best_b = beta.copy()
    best_s = 0.0
    best_f = np.inf
    hist = []
    alpha = a0
    for _ in range(epochs):
        beta = best_b.copy()
        for k in range(per_epoch):
            t = A @ beta if margin else A @ beta - y
            if conc:
                s = golden_sigma(code, t, rho, conc, csig)
                f = _sigma_obj(code, t, rho, conc, csig, s)
                gl = _loss_grad(code, t / s, rho) if conc == 2 else 2.0 * t / s
            else:
                s = 0.0
                f = _loss_val(code, t, rho)
                gl = _loss_grad(code, t, rho)
            f += float(np.sum(wl * np.abs(beta)))
            if f < best_f:
                best_f = f
                best_b = beta.copy()
                best_s = s
            g = A.T @ gl + wl * np.sign(beta)
            if has_c:
                g = g - Q.T @ (Q @ g)
            gn = math.sqrt(float(g @ g))
            if gn == 0.0:
                break
            beta = beta - (alpha / math.sqrt(k + 1.0) / gn) * g
        hist.append(best_f)
        alpha *= decay
    return best_b, best_s, best_f, np.array(hist)
