"""Compiled coalition-label kernel for exhaustive L2 Latent SHAP.

For every background row ``j`` and every interpretable coalition ``m`` the
masked row differs from ``B'[j]`` only in the coalition's columns, so the
squared distance from a latent row to it is a subset sum over per-feature
terms. The kernel builds all ``2**n`` subset sums per latent block with a
doubling recurrence and never materialises a coalition dataset.

The softmax weighting works in float32 with a polynomial exponential (the
weights only span ``[1, e]`` so the reduced precision is harmless) and sums in
float64. Normalised proximity can span many orders of magnitude, so that
variant stays in float64 and uses ``np.exp``.
"""

from __future__ import annotations

import math

import numba
import numpy as np

BLOCK = 256

_LOG2E = np.float32(1.4426950408889634)
_LN2_HI = np.float32(0.693359375)
_LN2_LO = np.float32(-2.12194440e-4)
_SQRT_E = np.float32(1.6487212707001282)
_C2, _C3, _C4, _C5, _C6, _C7 = (np.float32(1.0 / math.factorial(i)) for i in range(2, 8))
_F32_FLOOR = np.float32(-87.0)


@numba.njit(fastmath=True, inline="always")
def _softmax_weights(D, m, s, cnt, R, ib, sc, W):
    # exp(-d2 * s) by range reduction to [-ln2/2, ln2/2] and a degree-6 polynomial
    for t in range(cnt):
        v = max(-D[m, t] * s, _F32_FLOOR)
        kk = np.floor(v * _LOG2E + np.float32(0.5))
        R[t] = (v - kk * _LN2_HI) - kk * _LN2_LO
        ib[t] = (np.int32(kk) + np.int32(127)) << np.int32(23)
    # then exp(p) around p = 0.5, with p in (0, 1]
    for t in range(cnt):
        r = R[t]
        p = (np.float32(1) + r * (np.float32(1) + r * (_C2 + r * (_C3 + r * (_C4 + r * (_C5 + r * _C6)))))) * sc[t]
        q = p - np.float32(0.5)
        W[t] = _SQRT_E * (np.float32(1) + q * (np.float32(1) + q * (_C2 + q * (_C3 + q * (_C4 + q * (_C5 + q * (_C6 + q * _C7)))))))


@numba.njit(fastmath=True, cache=True)
def _softmax_labels(L, Y, Bp, xp, inv_s2):
    nL, n = L.shape
    nB = Bp.shape[0]
    NM = 1 << n
    LT = np.ascontiguousarray(L.T).astype(np.float32)
    UT = np.empty((n, nL), np.float32)
    for k in range(n):
        for i in range(nL):
            UT[k, i] = (L[i, k] - xp[k]) ** 2
    ybar = Y.mean()
    Yc = Y - ybar
    s32 = inv_s2.astype(np.float32)
    D = np.empty((NM, BLOCK), np.float32)
    V = np.empty((n, BLOCK), np.float32)
    R = np.empty(BLOCK, np.float32)
    W = np.empty(BLOCK, np.float32)
    ib = np.empty(BLOCK, np.int32)
    sc = ib.view(np.float32)
    num = np.empty(NM)
    den = np.empty(NM)
    out = np.zeros(NM)
    for j in range(nB):
        num[:] = 0.0
        den[:] = 0.0
        for o in range(0, nL, BLOCK):
            cnt = min(BLOCK, nL - o)
            for t in range(cnt):
                D[0, t] = 0.0
            for k in range(n):
                bk = np.float32(Bp[j, k])
                for t in range(cnt):
                    a = LT[k, o + t] - bk
                    a = a * a
                    V[k, t] = UT[k, o + t] - a
                    D[0, t] += a
            size = 1
            for k in range(n):
                for m in range(size):
                    for t in range(cnt):
                        D[m + size, t] = D[m, t] + V[k, t]
                size <<= 1
            for m in range(NM):
                _softmax_weights(D, m, s32[m], cnt, R, ib, sc, W)
                an = 0.0
                ad = 0.0
                for t in range(cnt):
                    wd = np.float64(W[t])
                    an += wd * Yc[o + t]
                    ad += wd
                num[m] += an
                den[m] += ad
        for m in range(NM):
            out[m] += num[m] / den[m]
    return ybar + out / nB, 0


@numba.njit(fastmath=True, cache=True)
def _normalized_labels(L, Y, Bp, xp, inv_s2):
    nL, n = L.shape
    nB = Bp.shape[0]
    NM = 1 << n
    LT = np.ascontiguousarray(L.T)
    UT = np.empty((n, nL))
    for k in range(n):
        for i in range(nL):
            UT[k, i] = (L[i, k] - xp[k]) ** 2
    ybar = Y.mean()
    Yc = Y - ybar
    D = np.empty((NM, BLOCK))
    V = np.empty((n, BLOCK))
    num = np.empty(NM)
    den = np.empty(NM)
    out = np.zeros(NM)
    for j in range(nB):
        num[:] = 0.0
        den[:] = 0.0
        for o in range(0, nL, BLOCK):
            cnt = min(BLOCK, nL - o)
            for t in range(cnt):
                D[0, t] = 0.0
            for k in range(n):
                bk = Bp[j, k]
                for t in range(cnt):
                    a = LT[k, o + t] - bk
                    a = a * a
                    V[k, t] = UT[k, o + t] - a
                    D[0, t] += a
            size = 1
            for k in range(n):
                for m in range(size):
                    for t in range(cnt):
                        D[m + size, t] = D[m, t] + V[k, t]
                size <<= 1
            for m in range(NM):
                s = inv_s2[m]
                an = 0.0
                ad = 0.0
                for t in range(cnt):
                    w = np.exp(-max(D[m, t], 0.0) * s)
                    an += w * Yc[o + t]
                    ad += w
                num[m] += an
                den[m] += ad
        for m in range(NM):
            if den[m] == 0.0:
                return out, 1
            out[m] += num[m] / den[m]
    return ybar + out / nB, 0


def exhaustive_labels(L: np.ndarray, Y: np.ndarray, Bp: np.ndarray, xp: np.ndarray,
                      inv_s2: np.ndarray, softmax: bool) -> tuple[np.ndarray, bool]:
    """Approximate labels of all ``2**n`` coalitions in integer mask order.

    Returns the labels and a flag that is set when every proximity of some
    coalition sample underflowed to zero.
    """
    args = (
        np.ascontiguousarray(L, dtype=np.float64),
        np.ascontiguousarray(Y, dtype=np.float64),
        np.ascontiguousarray(Bp, dtype=np.float64),
        np.ascontiguousarray(xp, dtype=np.float64),
        np.ascontiguousarray(inv_s2, dtype=np.float64),
    )
    labels, status = (_softmax_labels if softmax else _normalized_labels)(*args)
    return labels, bool(status)
