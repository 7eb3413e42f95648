# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror ``dpknock._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, pow, INFINITY

cnp.import_array()


def knockoff_threshold(w, double q, long offset):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] arr = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t p = arr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pos = np.sort(arr[arr > 0])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] neg = np.sort(-arr[arr < 0])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cand = np.unique(np.abs(arr[arr != 0]))
    cdef Py_ssize_t npos = pos.shape[0], nneg = neg.shape[0], ncand = cand.shape[0]
    cdef Py_ssize_t ip = 0, ineg = 0, k
    cdef double t, denom, ratio
    # cand ascending: advance pointers past values strictly below t
    for k in range(ncand):
        t = cand[k]
        while ip < npos and pos[ip] < t:
            ip += 1
        while ineg < nneg and neg[ineg] < t:
            ineg += 1
        denom = <double>(npos - ip)
        if denom < 1.0:
            denom = 1.0
        ratio = (<double>offset + <double>(nneg - ineg)) / denom
        if ratio <= q:
            return t
    return INFINITY


def peel(scores, noise):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] z = np.ascontiguousarray(noise, dtype=np.float64)
    cdef Py_ssize_t k = z.shape[0], p = s.shape[0], j, i, best_i
    cdef double best, v
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] alive = np.ones(p, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(k, dtype=np.int64)
    for j in range(k):
        best = -INFINITY
        best_i = -1
        for i in range(p):
            if alive[i]:
                v = s[i] + z[j, i]
                if best_i < 0 or v > best:
                    best = v
                    best_i = i
        alive[best_i] = 0
        out[j] = best_i
    return out


def sgd_pass(xb, y, double lam, double c, double l2, double r_beta):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.ascontiguousarray(xb, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] Y = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], t, k
    cdef cnp.ndarray[cnp.float64_t, ndim=1] beta = np.zeros(d, dtype=np.float64)
    cdef double resid, eta, nrm, scale
    for t in range(n):
        resid = 0.0
        for k in range(d):
            resid += X[t, k] * beta[k]
        resid -= Y[t]
        eta = pow(<double>(t + 1), -c) / l2
        nrm = 0.0
        for k in range(d):
            beta[k] = beta[k] - eta * (X[t, k] * resid + lam * beta[k])
            nrm += beta[k] * beta[k]
        nrm = sqrt(nrm)
        if nrm > r_beta:
            scale = r_beta / nrm
            for k in range(d):
                beta[k] *= scale
    return beta


def hsic_columns(kc, cols, bandwidths):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] K = np.ascontiguousarray(kc, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] X = np.ascontiguousarray(cols, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] bw = np.ascontiguousarray(bandwidths, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], m = X.shape[1], i, j, col
    cdef double inv, acc, diag, diff
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    diag = 0.0
    for i in range(n):
        diag += K[i, i]
    for col in range(m):
        inv = 1.0 / (2.0 * bw[col] * bw[col])
        acc = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                diff = X[i, col] - X[j, col]
                acc += K[i, j] * exp(-diff * diff * inv)
        out[col] = (2.0 * acc + diag) / (<double>n * <double>n)
    return out
