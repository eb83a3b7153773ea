"""Pure-Python kernel backend.

Every function here has a compiled twin in ``_core.pyx`` with the same
floating-point operations in the same order, so the two backends produce
bit-identical results. Keep the accumulation order sequential and route
every transcendental call through libm (``math.exp`` etc.); do not swap
loops for numpy reductions, whose pairwise summation would change the
result bits.
"""

from __future__ import annotations

from math import exp, log, sqrt

import numpy as np

BACKEND_NAME = "python"


def gae(rewards, values, gamma, lam):
    """Generalized advantage estimates over one trajectory.

    Bootstraps the value past the final step with 0.0; callers append
    nothing for the terminal state.
    """
    r = np.ascontiguousarray(rewards, dtype=np.float64).tolist()
    v = np.ascontiguousarray(values, dtype=np.float64).tolist()
    n = len(r)
    if len(v) != n:
        raise ValueError("rewards and values differ in length")
    if n == 0:
        raise ValueError("empty trajectory")
    out = [0.0] * n
    gl = gamma * lam
    acc = 0.0
    for t in range(n - 1, -1, -1):
        nv = v[t + 1] if t + 1 < n else 0.0
        delta = r[t] + gamma * nv - v[t]
        acc = delta + gl * acc
        out[t] = acc
    return np.array(out, dtype=np.float64)


def whiten(x, eps):
    """Center and scale by the population std; eps is added to the std."""
    vals = np.ascontiguousarray(x, dtype=np.float64).tolist()
    n = len(vals)
    if n == 0:
        raise ValueError("empty input")
    s = 0.0
    for v in vals:
        s += v
    mean = s / n
    ss = 0.0
    for v in vals:
        d = v - mean
        ss += d * d
    denom = sqrt(ss / n) + eps
    return np.array([(v - mean) / denom for v in vals], dtype=np.float64)


def log_softmax(logits):
    z = np.ascontiguousarray(logits, dtype=np.float64).tolist()
    n = len(z)
    if n == 0:
        raise ValueError("empty logits")
    m = z[0]
    for i in range(1, n):
        if z[i] > m:
            m = z[i]
    se = 0.0
    for i in range(n):
        se += exp(z[i] - m)
    logz = log(se)
    return np.array([z[i] - m - logz for i in range(n)], dtype=np.float64)


def logits_one(w, b, x):
    """Linear logits for a single feature vector: w @ x + b, row by row."""
    wl = np.ascontiguousarray(w, dtype=np.float64).tolist()
    bl = np.ascontiguousarray(b, dtype=np.float64).tolist()
    xl = np.ascontiguousarray(x, dtype=np.float64).tolist()
    a = len(wl)
    out = [0.0] * a
    for i in range(a):
        s = 0.0
        wi = wl[i]
        for j in range(len(xl)):
            s += wi[j] * xl[j]
        out[i] = s + bl[i]
    return np.array(out, dtype=np.float64)


def sample_from_logits(logits, u):
    """Inverse-CDF draw from softmax(logits) using one uniform u in [0, 1).

    Returns (index, log probability of the drawn index).
    """
    z = np.ascontiguousarray(logits, dtype=np.float64).tolist()
    n = len(z)
    if n == 0:
        raise ValueError("empty logits")
    m = z[0]
    for i in range(1, n):
        if z[i] > m:
            m = z[i]
    se = 0.0
    for i in range(n):
        se += exp(z[i] - m)
    target = u * se
    c = 0.0
    idx = n - 1
    for i in range(n):
        c += exp(z[i] - m)
        if target < c:
            idx = i
            break
    logp = z[idx] - m - log(se)
    return idx, logp


def action_log_probs(w, b, x, actions):
    """log softmax(w @ x_t + b)[a_t] for every row t of x."""
    wl = np.ascontiguousarray(w, dtype=np.float64).tolist()
    bl = np.ascontiguousarray(b, dtype=np.float64).tolist()
    xl = np.ascontiguousarray(x, dtype=np.float64).tolist()
    al = np.ascontiguousarray(actions, dtype=np.int64).tolist()
    n = len(xl)
    if len(al) != n:
        raise ValueError("x and actions differ in length")
    a_count = len(wl)
    out = [0.0] * n
    for t in range(n):
        xt = xl[t]
        z = [0.0] * a_count
        for i in range(a_count):
            s = 0.0
            wi = wl[i]
            for j in range(len(xt)):
                s += wi[j] * xt[j]
            z[i] = s + bl[i]
        m = z[0]
        for i in range(1, a_count):
            if z[i] > m:
                m = z[i]
        se = 0.0
        for i in range(a_count):
            se += exp(z[i] - m)
        out[t] = z[al[t]] - m - log(se)
    return np.array(out, dtype=np.float64)


def ppo_loss_grad(x, actions, old_logp, ref_logp, adv, w, b, eps_clip, kl_coef):
    """Clipped-surrogate loss with a KL-to-reference penalty, plus its
    analytic gradient with respect to the policy weights and biases.

    loss = -mean_t min(rho_t A_t, clip(rho_t, 1-eps, 1+eps) A_t)
           + kl_coef * mean_t (logpi(a_t) - logpi_ref(a_t))

    A turn whose ratio is clipped on the worsening side (rho > 1+eps with
    A > 0, or rho < 1-eps with A < 0) contributes zero surrogate gradient;
    the KL term always contributes.
    """
    xl = np.ascontiguousarray(x, dtype=np.float64).tolist()
    al = np.ascontiguousarray(actions, dtype=np.int64).tolist()
    ol = np.ascontiguousarray(old_logp, dtype=np.float64).tolist()
    rl = np.ascontiguousarray(ref_logp, dtype=np.float64).tolist()
    advl = np.ascontiguousarray(adv, dtype=np.float64).tolist()
    wl = np.ascontiguousarray(w, dtype=np.float64).tolist()
    bl = np.ascontiguousarray(b, dtype=np.float64).tolist()
    n = len(xl)
    if n == 0:
        raise ValueError("empty batch")
    if not (len(al) == len(ol) == len(rl) == len(advl) == n):
        raise ValueError("batch arrays differ in length")
    a_count = len(wl)
    f = len(wl[0]) if a_count else 0
    gw = [[0.0] * f for _ in range(a_count)]
    gb = [0.0] * a_count
    lo = 1.0 - eps_clip
    hi = 1.0 + eps_clip
    loss_sum = 0.0
    for t in range(n):
        xt = xl[t]
        z = [0.0] * a_count
        for i in range(a_count):
            s = 0.0
            wi = wl[i]
            for j in range(f):
                s += wi[j] * xt[j]
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
            gwi = gw[i]
            for j in range(f):
                gwi[j] += gz * xt[j]
    loss = loss_sum / n
    for i in range(a_count):
        gb[i] = gb[i] / n
        gwi = gw[i]
        for j in range(f):
            gwi[j] = gwi[j] / n
    return loss, np.array(gw, dtype=np.float64), np.array(gb, dtype=np.float64)


def value_loss_grad(x, targets, w, b):
    """Mean squared error of a linear value head and its gradient.

    loss = mean_t (target_t - pred_t)^2 with pred = w @ x_t + b.
    """
    xl = np.ascontiguousarray(x, dtype=np.float64).tolist()
    tl = np.ascontiguousarray(targets, dtype=np.float64).tolist()
    wl = np.ascontiguousarray(w, dtype=np.float64).tolist()
    n = len(xl)
    if n == 0:
        raise ValueError("empty batch")
    if len(tl) != n:
        raise ValueError("x and targets differ in length")
    f = len(wl)
    gw = [0.0] * f
    gb = 0.0
    loss_sum = 0.0
    bf = float(b)
    for t in range(n):
        xt = xl[t]
        pred = 0.0
        for j in range(f):
            pred += wl[j] * xt[j]
        pred += bf
        e = pred - tl[t]
        loss_sum += e * e
        for j in range(f):
            gw[j] += e * xt[j]
        gb += e
    loss = loss_sum / n
    for j in range(f):
        gw[j] = 2.0 * gw[j] / n
    gb = 2.0 * gb / n
    return loss, np.array(gw, dtype=np.float64), gb


def value_predict(x, w, b):
    """Linear head predictions for every row of x."""
    xl = np.ascontiguousarray(x, dtype=np.float64).tolist()
    wl = np.ascontiguousarray(w, dtype=np.float64).tolist()
    f = len(wl)
    bf = float(b)
    out = [0.0] * len(xl)
    for t in range(len(xl)):
        xt = xl[t]
        pred = 0.0
        for j in range(f):
            pred += wl[j] * xt[j]
        out[t] = pred + bf
    return np.array(out, dtype=np.float64)
