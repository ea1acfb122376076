"""Pure numpy implementations of the radial-kernel hot loops.

Mirrors ``_ckernels.pyx`` operation by operation so both backends agree to
the last bit on platforms without fused multiply-add contraction.
"""

import numpy as np


def _horner(coeffs, r):
    acc = np.zeros_like(r)
    for c in coeffs[::-1]:
        acc = acc * r + c
    return acc


def radial(r, power, coeffs):
    """Evaluate ``(1 - r)**power * p(r)`` on ``r < 1`` and zero elsewhere.

    ``coeffs`` holds the polynomial ``p`` in ascending order.
    """
    r = np.asarray(r, dtype=float)
    t = 1.0 - r
    pw = np.ones_like(r)
    for _ in range(power):
        pw = pw * t
    out = pw * _horner(np.asarray(coeffs, dtype=float), r)
    return np.where(r < 1.0, out, 0.0)


def pairwise_distances(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    acc = np.zeros((X.shape[0], Y.shape[0]))
    for k in range(X.shape[1]):
        diff = X[:, k][:, None] - Y[:, k][None, :]
        acc = acc + diff * diff
    return np.sqrt(acc)


def cross_kernel(X, Y, scale, power, coeffs):
    return radial(pairwise_distances(X, Y) / scale, power, coeffs)


def min_distances(P, C):
    return pairwise_distances(P, C).min(axis=1)
