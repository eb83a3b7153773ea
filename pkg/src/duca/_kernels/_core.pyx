# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled kernel backend.

Twin of ``pyref.py``: same floating-point operations in the same order,
so results are bit-identical across backends. Sequential accumulation
only; transcendentals via libm.
"""

from libc.math cimport exp, log, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


def gae(rewards, values, double gamma, double lam):
    """Generalized advantage estimates over one trajectory.

    Bootstraps the value past the final step with 0.0; callers append
    nothing for the terminal state.
    """
    cdef const double[::1] r = np.ascontiguousarray(rewards, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0]
    if v.shape[0] != n:
        raise ValueError("rewards and values differ in length")
    if n == 0:
        raise ValueError("empty trajectory")
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double gl = gamma * lam
    cdef double acc = 0.0
    cdef double nv, delta
    cdef Py_ssize_t t
    for t in range(n - 1, -1, -1):
        nv = v[t + 1] if t + 1 < n else 0.0
        delta = r[t] + gamma * nv - v[t]
        acc = delta + gl * acc
        out[t] = acc
    return out_arr


def whiten(x, double eps):
    """Center and scale by the population std; eps is added to the std."""
    cdef const double[::1] vals = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = vals.shape[0]
    if n == 0:
        raise ValueError("empty input")
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        s += vals[i]
    cdef double mean = s / n
    cdef double ss = 0.0
    cdef double d
    for i in range(n):
        d = vals[i] - mean
        ss += d * d
    cdef double denom = sqrt(ss / n) + eps
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = (vals[i] - mean) / denom
    return out_arr


def log_softmax(logits):
    cdef const double[::1] z = np.ascontiguousarray(logits, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0]
    if n == 0:
        raise ValueError("empty logits")
    cdef double m = z[0]
    cdef Py_ssize_t i
    for i in range(1, n):
        if z[i] > m:
            m = z[i]
    cdef double se = 0.0
    for i in range(n):
        se += exp(z[i] - m)
    cdef double logz = log(se)
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        out[i] = z[i] - m - logz
    return out_arr


def logits_one(w, b, x):
    """Linear logits for a single feature vector: w @ x + b, row by row."""
    cdef const double[:, ::1] wl = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] bl = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[::1] xl = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t a = wl.shape[0]
    cdef Py_ssize_t f = xl.shape[0]
    out_arr = np.empty(a, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double s
    cdef Py_ssize_t i, j
    for i in range(a):
        s = 0.0
        for j in range(f):
            s += wl[i, j] * xl[j]
        out[i] = s + bl[i]
    return out_arr


def sample_from_logits(logits, double u):
    """Inverse-CDF draw from softmax(logits) using one uniform u in [0, 1).

    Returns (index, log probability of the drawn index).
    """
    cdef const double[::1] z = np.ascontiguousarray(logits, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0]
    if n == 0:
        raise ValueError("empty logits")
    cdef double m = z[0]
    cdef Py_ssize_t i
    for i in range(1, n):
        if z[i] > m:
            m = z[i]
    cdef double se = 0.0
    for i in range(n):
        se += exp(z[i] - m)
    cdef double target = u * se
    cdef double c = 0.0
    cdef Py_ssize_t idx = n - 1
    for i in range(n):
        c += exp(z[i] - m)
        if target < c:
            idx = i
            break
    cdef double logp = z[idx] - m - log(se)
    return idx, logp


def action_log_probs(w, b, x, actions):
    """log softmax(w @ x_t + b)[a_t] for every row t of x."""
    cdef const double[:, ::1] wl = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] bl = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:, ::1] xl = np.ascontiguousarray(x, dtype=np.float64)
    cdef const cnp.int64_t[::1] al = np.ascontiguousarray(actions, dtype=np.int64)
    cdef Py_ssize_t n = xl.shape[0]
    if al.shape[0] != n:
        raise ValueError("x and actions differ in length")
    cdef Py_ssize_t a_count = wl.shape[0]
    cdef Py_ssize_t f = xl.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    z_arr = np.empty(a_count, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double s, m, se
    cdef Py_ssize_t t, i, j
    for t in range(n):
        for i in range(a_count):
            s = 0.0
            for j in range(f):
                s += wl[i, j] * xl[t, j]
            z[i] = s + bl[i]
        m = z[0]
        for i in range(1, a_count):
            if z[i] > m:
                m = z[i]
        se = 0.0
        for i in range(a_count):
            se += exp(z[i] - m)
        out[t] = z[al[t]] - m - log(se)
    return out_arr


def ppo_loss_grad(x, actions, old_logp, ref_logp, adv, w, b,
                  double eps_clip, double kl_coef):
    """Clipped-surrogate loss with a KL-to-reference penalty, plus its
    analytic gradient with respect to the policy weights and biases.

    Same semantics as the pure-Python twin; see pyref.ppo_loss_grad.
    """
    cdef const double[:, ::1] xl = np.ascontiguousarray(x, dtype=np.float64)
    cdef const cnp.int64_t[::1] al = np.ascontiguousarray(actions, dtype=np.int64)
    cdef const double[::1] ol = np.ascontiguousarray(old_logp, dtype=np.float64)
    cdef const double[::1] rl = np.ascontiguousarray(ref_logp, dtype=np.float64)
    cdef const double[::1] advl = np.ascontiguousarray(adv, dtype=np.float64)
    cdef const double[:, ::1] wl = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] bl = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = xl.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if not (al.shape[0] == n and ol.shape[0] == n and rl.shape[0] == n
            and advl.shape[0] == n):
        raise ValueError("batch arrays differ in length")
    cdef Py_ssize_t a_count = wl.shape[0]
    cdef Py_ssize_t f = xl.shape[1]
    gw_arr = np.zeros((a_count, f), dtype=np.float64)
    gb_arr = np.zeros(a_count, dtype=np.float64)
    cdef double[:, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    z_arr = np.empty(a_count, dtype=np.float64)
    cdef double[::1] z = z_arr
    cdef double lo = 1.0 - eps_clip
    cdef double hi = 1.0 + eps_clip
    cdef double loss_sum = 0.0
    cdef double s, m, se, lp, ratio, adv_t, surr, c, surr_c, ms, coef, p, ind, gz
    cdef Py_ssize_t t, i, j, a
    for t in range(n):
        for i in range(a_count):
            s = 0.0
            for j in range(f):
                s += wl[i, j] * xl[t, j]
            z[i] = s + bl[i]
        m = z[0]
        for i in range(1, a_count):
            if z[i] > m:
                m = z[i]
        se = 0.0
        for i in range(a_count):
            se += exp(z[i] - m)
        a = al[t]
        lp = z[a] - m - log(se)
        ratio = exp(lp - ol[t])
        adv_t = advl[t]
        surr = ratio * adv_t
        c = ratio
        if c > hi:
            c = hi
        elif c < lo:
            c = lo
        surr_c = c * adv_t
        ms = surr if surr < surr_c else surr_c
        loss_sum += -ms + kl_coef * (lp - rl[t])
        if (ratio > hi and adv_t > 0.0) or (ratio < lo and adv_t < 0.0):
            coef = kl_coef
        else:
            coef = -ratio * adv_t + kl_coef
        for i in range(a_count):
            p = exp(z[i] - m) / se
            ind = 1.0 if i == a else 0.0
            gz = coef * (ind - p)
            gb[i] += gz
            for j in range(f):
                gw[i, j] += gz * xl[t, j]
    cdef double loss = loss_sum / n
    for i in range(a_count):
        gb[i] = gb[i] / n
        for j in range(f):
            gw[i, j] = gw[i, j] / n
    return loss, gw_arr, gb_arr


def value_loss_grad(x, targets, w, double b):
    """Mean squared error of a linear value head and its gradient.

    loss = mean_t (target_t - pred_t)^2 with pred = w @ x_t + b.
    """
    cdef const double[:, ::1] xl = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] tl = np.ascontiguousarray(targets, dtype=np.float64)
    cdef const double[::1] wl = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = xl.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if tl.shape[0] != n:
        raise ValueError("x and targets differ in length")
    cdef Py_ssize_t f = wl.shape[0]
    gw_arr = np.zeros(f, dtype=np.float64)
    cdef double[::1] gw = gw_arr
    cdef double gb = 0.0
    cdef double loss_sum = 0.0
    cdef double pred, e
    cdef Py_ssize_t t, j
    for t in range(n):
        pred = 0.0
        for j in range(f):
            pred += wl[j] * xl[t, j]
        pred += b
        e = pred - tl[t]
        loss_sum += e * e
        for j in range(f):
            gw[j] += e * xl[t, j]
        gb += e
    cdef double loss = loss_sum / n
    for j in range(f):
        gw[j] = 2.0 * gw[j] / n
    gb = 2.0 * gb / n
    return loss, gw_arr, gb


def value_predict(x, w, double b):
    """Linear head predictions for every row of x."""
    cdef const double[:, ::1] xl = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] wl = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = xl.shape[0]
    cdef Py_ssize_t f = wl.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double pred
    cdef Py_ssize_t t, j
    for t in range(n):
        pred = 0.0
        for j in range(f):
            pred += wl[j] * xl[t, j]
        out[t] = pred + b
    return out_arr
