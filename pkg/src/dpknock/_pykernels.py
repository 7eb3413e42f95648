"""Numpy implementations of the hot loops, used when the extension is absent."""

import numpy as np


def knockoff_threshold(w, q, offset):
    w = np.asarray(w, dtype=float)
    cand = np.unique(np.abs(w[w != 0]))
    if cand.size == 0:
        return np.inf
    pos = np.sort(w[w > 0])
    neg = np.sort(-w[w < 0])
    n_pos = pos.size - np.searchsorted(pos, cand, side="left")
    n_neg = neg.size - np.searchsorted(neg, cand, side="left")
    ratio = (offset + n_neg) / np.maximum(1, n_pos)
    ok = np.flatnonzero(ratio <= q)
    return float(cand[ok[0]]) if ok.size else np.inf


def peel(scores, noise):
    scores = np.asarray(scores, dtype=float)
    noise = np.asarray(noise, dtype=float)
    alive = np.ones(scores.size, dtype=bool)
    out = np.empty(noise.shape[0], dtype=np.int64)
    for j in range(noise.shape[0]):
        vals = np.where(alive, scores + noise[j], -np.inf)
        i = int(np.argmax(vals))
        if not alive[i]:
            # every survivor evaluated to -inf; fall back to the first one
            i = int(np.flatnonzero(alive)[0])
        alive[i] = False
        out[j] = i
    return out


def sgd_pass(xb, y, lam, c, l2, r_beta):
    xb = np.asarray(xb, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = np.zeros(xb.shape[1])
    for t in range(xb.shape[0]):
        x = xb[t]
        resid = x @ beta - y[t]
        eta = (t + 1.0) ** (-c) / l2
        beta = beta - eta * (x * resid + lam * beta)
        nrm = np.sqrt(beta @ beta)
        if nrm > r_beta:
            beta *= r_beta / nrm
    return beta


def hsic_columns(kc, cols, bandwidths):
    kc = np.asarray(kc, dtype=float)
    cols = np.asarray(cols, dtype=float)
    bw = np.asarray(bandwidths, dtype=float)
    n = cols.shape[0]
    out = np.empty(cols.shape[1])
    for k in range(cols.shape[1]):
        inv = 1.0 / (2.0 * bw[k] * bw[k])
        x = cols[:, k]
        gram = np.exp(-((x[:, None] - x[None, :]) ** 2) * inv)
        out[k] = np.sum(kc * gram) / (n * n)
    return out
