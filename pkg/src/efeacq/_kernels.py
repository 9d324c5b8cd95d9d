"""Compiled inner loops for Poisson-mixture sweeps over candidate sets."""

import math

import numpy as np
from numba import njit

_TINY = 1e-30


@njit(cache=True)
def _cap(lam):
    return int(math.ceil(lam + 12.0 * math.sqrt(lam) + 30.0))


@njit(cache=True)
def poisson_mixture_sweep(weights, lam, y_max, censor):
    """For each column of ``lam`` (H, C) return mixture entropy, the
    weighted mean of component entropies, and ``P(y > y_max)``.

    With ``censor`` set, counts above ``y_max`` are lumped into one
    saturated reading before entropies are taken.

    Each component pmf is generated by the ratio recurrence outward from its
    mode and stops once terms fall below ``1e-30`` or past the truncation cap.
    """
    n_hyp, n_cand = lam.shape
    h_mix = np.zeros(n_cand)
    h_cond = np.zeros(n_cand)
    p_viol = np.zeros(n_cand)
    kmax_all = 0
    for c in range(n_cand):
        for h in range(n_hyp):
            k = _cap(lam[h, c])
            if k > kmax_all:
                kmax_all = k
    log_k = np.zeros(kmax_all + 2)
    for k in range(1, kmax_all + 2):
        log_k[k] = math.log(k)
    mix = np.zeros(kmax_all + 1)

    for c in range(n_cand):
        top = 0
        for h in range(n_hyp):
            k = _cap(lam[h, c])
            if k > top:
                top = k
        mix[: top + 1] = 0.0
        cond = 0.0
        for h in range(n_hyp):
            w = weights[h]
            r = lam[h, c]
            if r <= 0.0:
                mix[0] += w
                continue
            cap = _cap(r)
            lr = math.log(r)
            mode = int(r)
            lp0 = mode * lr - r - math.lgamma(mode + 1.0)
            p0 = math.exp(lp0)
            tail_h = 0.0
            if censor and mode > y_max:
                tail_h += p0
                ent = 0.0
            else:
                ent = -p0 * lp0
            mix[mode] += w * p0
            # upward
            p = p0
            lp = lp0
            k = mode
            while k < cap:
                p *= r / (k + 1)
                lp += lr - log_k[k + 1]
                k += 1
                if p < _TINY:
                    break
                mix[k] += w * p
                if censor and k > y_max:
                    tail_h += p
                else:
                    ent -= p * lp
            # downward
            p = p0
            lp = lp0
            k = mode
            while k > 0:
                p *= k / r
                lp += log_k[k] - lr
                k -= 1
                if p < _TINY:
                    break
                mix[k] += w * p
                if censor and k > y_max:
                    tail_h += p
                else:
                    ent -= p * lp
            if tail_h > 0.0:
                ent -= tail_h * math.log(tail_h)
            cond += w * ent
        hm = 0.0
        tail = 0.0
        for k in range(top + 1):
            m = mix[k]
            if m > 0.0:
                if k > y_max:
                    tail += m
                    if censor:
                        continue
                hm -= m * math.log(m)
        if censor and tail > 0.0:
            hm -= tail * math.log(tail)
        h_mix[c] = hm
        h_cond[c] = cond
        p_viol[c] = tail
    return h_mix, h_cond, p_viol
