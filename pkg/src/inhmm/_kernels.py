"""Compiled inner loops for the latent-path update.

Only entries inside the slice-active sets are ever evaluated, which is what
keeps a sweep linear in T times the (small) active-set sizes.
"""

import math

import numpy as np
from numba import njit

_SQRT1_2 = 1.0 / math.sqrt(2.0)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@njit(cache=True)
def log_ndtr(a):
    if a > 0.0:
        return math.log1p(-0.5 * math.erfc(a * _SQRT1_2))
    if a > -37.0:
        return math.log(0.5 * math.erfc(-a * _SQRT1_2))
    # asymptotic expansion of the lower tail
    inv = 1.0 / (a * a)
    series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv)))
    return -0.5 * a * a - math.log(-a) - _HALF_LOG_2PI + math.log(series)


@njit(cache=True)
def log_q_active(alpha, beta, H, log_f, log_xi, n_act):
    """log pi_k(j, x_t) - log xi_k + log f(y_t|k) on the active entries, -inf elsewhere."""
    T, K = H.shape
    out = np.full((T, K + 1, K), -np.inf)
    for t in range(T):
        if t == 0:
            j_lo, j_hi = 0, 1
        else:
            j_lo, j_hi = 1, n_act[t - 1] + 1
        for j in range(j_lo, j_hi):
            acc = 0.0
            for k in range(n_act[t]):
                a = alpha[j, k] + beta[k] * H[t, k]
                out[t, j, k] = acc + log_ndtr(a) - log_xi[k] + log_f[t, k]
                acc += log_ndtr(-a)
    return out


@njit(cache=True)
def backward(log_q, n_act):
    """Max-normalized backward messages; returns (messages, failing t or -1)."""
    T, _, K = log_q.shape
    msg = np.zeros((T, K))
    msg[T - 1, :] = 1.0
    for t in range(T - 1, 0, -1):
        na_t = n_act[t]
        na_prev = n_act[t - 1]
        c = -np.inf
        for j in range(1, na_prev + 1):
            for k in range(na_t):
                if log_q[t, j, k] > c:
                    c = log_q[t, j, k]
        top = 0.0
        for j in range(1, na_prev + 1):
            s = 0.0
            for k in range(na_t):
                s += math.exp(log_q[t, j, k] - c) * msg[t, k]
            msg[t - 1, j - 1] = s
            if s > top:
                top = s
        if not top > 0.0:
            return msg, t
        for j in range(na_prev):
            msg[t - 1, j] /= top
    return msg, -1


@njit(cache=True)
def forward(log_q, msg, n_act, uniforms):
    """Forward draws; ``uniforms`` is (n_draws, T). Returns z (1-based) or -t-1 on failure."""
    n_draws, T = uniforms.shape
    K = log_q.shape[2]
    z = np.empty((n_draws, T), dtype=np.int64)
    p = np.empty(K)
    for d in range(n_draws):
        j = 0
        for t in range(T):
            na = n_act[t]
            m = -np.inf
            for k in range(na):
                if msg[t, k] > 0.0 and log_q[t, j, k] > m:
                    m = log_q[t, j, k]
            if m == -np.inf:
                z[d, 0] = -t - 1
                return z
            total = 0.0
            for k in range(na):
                if msg[t, k] > 0.0:
                    total += math.exp(log_q[t, j, k] - m) * msg[t, k]
                p[k] = total
            target = uniforms[d, t] * total
            pick = na - 1
            for k in range(na):
                if p[k] > target:
                    pick = k
                    break
            z[d, t] = pick + 1
            j = pick + 1
    return z
