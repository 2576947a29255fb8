"""Compiled whole-run loops for the game. They replay exactly the step logic of the
predictor classes, one round at a time, so a prediction never depends on its own
round's observation."""

import numpy as np
from numba import njit

RULE_L2 = 0
RULE_ARGMAX = 1
RULE_HELLINGER = 2
TIE = 1e-12


@njit(cache=True)
def ewa_run(E, L, xs, obs, rule, Q, n_labels, record):
    K, F, M = E.shape
    T = xs.size
    lw = np.zeros(K)
    w = np.empty(K)
    phat = np.empty(M)
    yhat = np.empty(T, dtype=np.int64)
    hist = np.zeros((T if record else 1, M))
    for t in range(T):
        x = xs[t]
        top = -np.inf
        for k in range(K):
            if lw[k] > top:
                top = lw[k]
        if top == -np.inf:
            for k in range(K):
                w[k] = 1.0 / K
        else:
            s = 0.0
            for k in range(K):
                w[k] = np.exp(lw[k] - top)
                s += w[k]
            for k in range(K):
                w[k] /= s
        for m in range(M):
            acc = 0.0
            for k in range(K):
                acc += w[k] * E[k, x, m]
            phat[m] = acc
        if record:
            hist[t] = phat
        if rule == RULE_L2:
            d0 = 0.0
            d1 = 0.0
            for m in range(M):
                d0 += (phat[m] - Q[x, 0, m]) ** 2
                d1 += (phat[m] - Q[x, 1, m]) ** 2
            yhat[t] = 0 if d0 <= d1 + TIE else 1
        elif rule == RULE_ARGMAX:
            best = 0
            for y in range(1, n_labels):
                if phat[y] > phat[best] + TIE:
                    best = y
            yhat[t] = best
        else:
            best = 0
            bestv = np.inf
            for y in range(n_labels):
                h = 0.0
                for m in range(M):
                    h += (Q[x, y, m] - np.sqrt(phat[m])) ** 2
                if h < bestv - TIE:
                    bestv = h
                    best = y
            yhat[t] = best
        o = obs[t]
        top = -np.inf
        for k in range(K):
            v = lw[k] - L[k, x, o]
            if np.isnan(v):
                v = -np.inf
            lw[k] = v
            if v > top:
                top = v
        if top > -np.inf:
            for k in range(K):
                lw[k] -= top
    return yhat, hist


@njit(cache=True)
def meta_run(labels, xs, obs, u, lecam, logp, G, target, C):
    K = labels.shape[0]
    T = xs.size
    surv = np.ones(K, dtype=np.bool_)
    nsurv = K
    cum_v = np.zeros((K, K), dtype=np.int64)
    lr = np.zeros((K, K))
    gsum = np.zeros((K, K))
    decided = np.zeros((K, K), dtype=np.bool_)
    count = np.zeros((K, K), dtype=np.int64)
    total = np.zeros((K, K), dtype=np.int64)
    favors = np.zeros((K, K), dtype=np.bool_)
    for i in range(K):
        for j in range(i + 1, K):
            favors[i, j] = True
    yhat = np.empty(T, dtype=np.int64)
    emptied = False
    thr = target * (1.0 - 1e-12)
    for t in range(T):
        x = xs[t]
        m = int(u[t] * nsurv)
        if m >= nsurv:
            m = nsurv - 1
        c = 0
        k = 0
        for i in range(K):
            if surv[i]:
                if c == m:
                    k = i
                    break
                c += 1
        yhat[t] = labels[k, x]
        o = obs[t]
        any_d = False
        for i in range(K):
            for j in range(K):
                if labels[i, x] != labels[j, x]:
                    any_d = True
                    if not favors[i, j]:
                        cum_v[i, j] += 1
        if not any_d:
            continue
        for i in range(K):
            a = labels[i, x]
            for j in range(i + 1, K):
                b = labels[j, x]
                if a == b:
                    continue
                if lecam:
                    if decided[i, j]:
                        continue
                    inc = logp[x, a, b, o] - logp[x, b, a, o]
                    if np.isnan(inc):
                        inc = 0.0
                    v = lr[i, j] + inc
                    if np.isnan(v):
                        v = 0.0
                    lr[i, j] = v
                    gsum[i, j] += G[x, a, b]
                    if gsum[i, j] >= thr:
                        decided[i, j] = True
                        favors[i, j] = lr[i, j] >= 0
                        favors[j, i] = not favors[i, j]
                else:
                    count[i, j] += 1
                    if o == b:
                        total[i, j] += 1
                    ok = 2 * total[i, j] <= count[i, j]
                    favors[i, j] = ok
                    favors[j, i] = not ok
        keep = 0
        for i in range(K):
            if surv[i]:
                mx = 0
                for j in range(K):
                    if cum_v[i, j] > mx:
                        mx = cum_v[i, j]
                if mx <= C:
                    keep += 1
        if keep == 0:
            emptied = True
        else:
            for i in range(K):
                if surv[i]:
                    mx = 0
                    for j in range(K):
                        if cum_v[i, j] > mx:
                            mx = cum_v[i, j]
                    if mx > C:
                        surv[i] = False
            nsurv = keep
    return yhat, cum_v, surv, emptied
