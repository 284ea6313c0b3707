"""Pure-numpy epoch kernel: the fallback twin of the compiled extension.

Implements the same ``run_epoch`` contract as ``_fused``: run one pass over
``order`` in batches, updating parameters and Adam moments in place, and
return (sum of per-sample losses, new timestep, index of the first batch
with a non-finite loss or -1).
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def run_epoch(
    W, b, Beta, c,
    mW, mb, mBeta, mc,
    vW, vb, vBeta, vc,
    t, X, y, order, batch_size,
    lr, beta1, beta2, eps, weight_decay, loss_kind, decay_mode=0,
):
    n = order.shape[0]
    total = 0.0
    batch_index = 0
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        Xb = X[idx]
        yb = y[idx]
        B = len(idx)

        Z = Xb @ W.T + b
        A = np.maximum(Z, 0.0)
        logits = A @ Beta + c

        if loss_kind == 0:
            z = logits[:, 0]
            yf = yb.astype(np.float64)
            batch_loss = float(np.sum(np.maximum(z, 0.0) - z * yf + np.log1p(np.exp(-np.abs(z)))))
            sig = np.empty_like(z)
            pos = z >= 0
            sig[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
            ez = np.exp(z[~pos])
            sig[~pos] = ez / (1.0 + ez)
            dlogits = ((sig - yf) / B)[:, None]
        else:
            zmax = logits.max(axis=1, keepdims=True)
            e = np.exp(logits - zmax)
            s = e.sum(axis=1, keepdims=True)
            rows = np.arange(B)
            batch_loss = float(np.sum(np.log(s[:, 0]) - (logits[rows, yb] - zmax[:, 0])))
            dlogits = e / s
            dlogits[rows, yb] -= 1.0
            dlogits /= B

        total += batch_loss
        if not np.isfinite(batch_loss):
            return total, t, batch_index

        dBeta = A.T @ dlogits
        dc = dlogits.sum(axis=0)
        dA = dlogits @ Beta.T
        dZ = np.where(Z > 0, dA, 0.0)
        dW = dZ.T @ Xb
        db = dZ.sum(axis=0)

        t += 1
        bc1 = 1.0 - beta1**t
        bc2 = 1.0 - beta2**t
        for theta, g, m, v in ((W, dW, mW, vW), (b, db, mb, vb), (Beta, dBeta, mBeta, vBeta), (c, dc, mc, vc)):
            if weight_decay != 0.0 and decay_mode == 0:
                g += weight_decay * theta
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            step = lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
            if decay_mode == 1:
                step += lr * weight_decay * theta
            theta -= step
        batch_index += 1
    return total, t, -1
