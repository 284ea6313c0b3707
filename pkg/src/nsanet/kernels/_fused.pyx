# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused epoch kernel: forward, backward and Adam for a whole epoch in C.

Same contract as ``_numpy_ref.run_epoch``. Matrix products go through BLAS
(dgemm); everything else is plain loops. The GIL is released for the whole
epoch, so independent training runs scale across Python threads.
"""

import numpy as np

from libc.math cimport exp, fabs, isfinite, log, log1p, pow, sqrt
from scipy.linalg.cython_blas cimport dgemm

NAME = "fused"


cdef inline void _adam_update(double* theta, double* g, double* m, double* v,
                              Py_ssize_t size, double lr, double beta1, double beta2,
                              double eps, double wd, long decay_mode,
                              double bc1, double bc2) noexcept nogil:
    cdef Py_ssize_t i
    cdef double gi, mi, vi, step
    for i in range(size):
        gi = g[i]
        if decay_mode == 0:
            gi += wd * theta[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * gi * gi
        m[i] = mi
        v[i] = vi
        step = lr * (mi / bc1) / (sqrt(vi / bc2) + eps)
        if decay_mode == 1:
            step += lr * wd * theta[i]
        theta[i] -= step


def run_epoch(
    double[:, ::1] W, double[::1] b, double[:, ::1] Beta, double[::1] c,
    double[:, ::1] mW, double[::1] mb, double[:, ::1] mBeta, double[::1] mc,
    double[:, ::1] vW, double[::1] vb, double[:, ::1] vBeta, double[::1] vc,
    long t, double[:, ::1] X, long[::1] y, long[::1] order, long batch_size,
    double lr, double beta1, double beta2, double eps, double weight_decay,
    long loss_kind, long decay_mode=0,
):
    cdef Py_ssize_t n = order.shape[0]
    cdef int h = W.shape[0]
    cdef int p = W.shape[1]
    cdef int C = Beta.shape[1]
    cdef int Bmax = <int>min(<Py_ssize_t>batch_size, n)

    Xb_arr = np.empty((Bmax, p), dtype=np.float64)
    A_arr = np.empty((Bmax, h), dtype=np.float64)
    G_arr = np.empty((Bmax, C), dtype=np.float64)   # logits, then dlogits
    dA_arr = np.empty((Bmax, h), dtype=np.float64)  # dA, then dZ
    dW_arr = np.empty((h, p), dtype=np.float64)
    db_arr = np.empty(h, dtype=np.float64)
    dBeta_arr = np.empty((h, C), dtype=np.float64)
    dc_arr = np.empty(C, dtype=np.float64)
    yb_arr = np.empty(Bmax, dtype=np.int64)

    cdef double[:, ::1] Xb = Xb_arr
    cdef double[:, ::1] A = A_arr
    cdef double[:, ::1] G = G_arr
    cdef double[:, ::1] dA = dA_arr
    cdef double[:, ::1] dW = dW_arr
    cdef double[::1] db = db_arr
    cdef double[:, ::1] dBeta = dBeta_arr
    cdef double[::1] dc = dc_arr
    cdef long[::1] yb = yb_arr

    cdef Py_ssize_t start, i
    cdef int B, j, k, lab, batch_index = 0
    cdef long bad_batch = -1
    cdef double total = 0.0, batch_loss, z, yf, sig, ez, zmax, s, invB, bc1, bc2
    cdef double one = 1.0, zero = 0.0
    cdef char *TRANS = "T"
    cdef char *NOTRANS = "N"

    with nogil:
        start = 0
        while start < n:
            B = <int>min(<Py_ssize_t>batch_size, n - start)
            invB = 1.0 / B

            for i in range(B):
                k = <int>order[start + i]
                yb[i] = y[k]
                for j in range(p):
                    Xb[i, j] = X[k, j]

            # A = relu(Xb W^T + b)
            dgemm(TRANS, NOTRANS, &h, &B, &p, &one, &W[0, 0], &p, &Xb[0, 0], &p, &zero, &A[0, 0], &h)
            for i in range(B):
                for j in range(h):
                    z = A[i, j] + b[j]
                    A[i, j] = z if z > 0.0 else 0.0

            # G = A Beta + c  (logits)
            dgemm(NOTRANS, NOTRANS, &C, &B, &h, &one, &Beta[0, 0], &C, &A[0, 0], &h, &zero, &G[0, 0], &C)
            for i in range(B):
                for j in range(C):
                    G[i, j] += c[j]

            # loss and dlogits (G overwritten in place)
            batch_loss = 0.0
            if loss_kind == 0:
                for i in range(B):
                    z = G[i, 0]
                    yf = <double>yb[i]
                    batch_loss += (z if z > 0.0 else 0.0) - z * yf + log1p(exp(-fabs(z)))
                    if z >= 0.0:
                        sig = 1.0 / (1.0 + exp(-z))
                    else:
                        ez = exp(z)
                        sig = ez / (1.0 + ez)
                    G[i, 0] = (sig - yf) * invB
            else:
                for i in range(B):
                    lab = <int>yb[i]
                    zmax = G[i, 0]
                    for j in range(1, C):
                        if G[i, j] > zmax:
                            zmax = G[i, j]
                    s = 0.0
                    for j in range(C):
                        s += exp(G[i, j] - zmax)
                    batch_loss += log(s) - (G[i, lab] - zmax)
                    for j in range(C):
                        G[i, j] = exp(G[i, j] - zmax) / s * invB
                    G[i, lab] -= invB

            total += batch_loss
            if not isfinite(batch_loss):
                bad_batch = batch_index
                break

            # dBeta = A^T dlogits ; dc = column sums of dlogits
            dgemm(NOTRANS, TRANS, &C, &h, &B, &one, &G[0, 0], &C, &A[0, 0], &h, &zero, &dBeta[0, 0], &C)
            for j in range(C):
                dc[j] = 0.0
            for i in range(B):
                for j in range(C):
                    dc[j] += G[i, j]

            # dZ = (dlogits Beta^T) * relu'(Z), stored in dA
            dgemm(TRANS, NOTRANS, &h, &B, &C, &one, &Beta[0, 0], &C, &G[0, 0], &C, &zero, &dA[0, 0], &h)
            for i in range(B):
                for j in range(h):
                    if A[i, j] <= 0.0:
                        dA[i, j] = 0.0

            # dW = dZ^T Xb ; db = column sums of dZ
            dgemm(NOTRANS, TRANS, &p, &h, &B, &one, &Xb[0, 0], &p, &dA[0, 0], &h, &zero, &dW[0, 0], &p)
            for j in range(h):
                db[j] = 0.0
            for i in range(B):
                for j in range(h):
                    db[j] += dA[i, j]

            t += 1
            bc1 = 1.0 - pow(beta1, <double>t)
            bc2 = 1.0 - pow(beta2, <double>t)
            _adam_update(&W[0, 0], &dW[0, 0], &mW[0, 0], &vW[0, 0], <Py_ssize_t>h * p,
                         lr, beta1, beta2, eps, weight_decay, decay_mode, bc1, bc2)
            _adam_update(&b[0], &db[0], &mb[0], &vb[0], h,
                         lr, beta1, beta2, eps, weight_decay, decay_mode, bc1, bc2)
            _adam_update(&Beta[0, 0], &dBeta[0, 0], &mBeta[0, 0], &vBeta[0, 0], <Py_ssize_t>h * C,
                         lr, beta1, beta2, eps, weight_decay, decay_mode, bc1, bc2)
            _adam_update(&c[0], &dc[0], &mc[0], &vc[0], C,
                         lr, beta1, beta2, eps, weight_decay, decay_mode, bc1, bc2)

            batch_index += 1
            start += batch_size

    return total, t, bad_batch
