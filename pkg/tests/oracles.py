"""Independent reference computations used by the test-suite."""
import numpy as np


def gregory_weights(n):
    """Fourth-order Gregory weights for n intervals (trapezoid for n < 6)."""
    w = np.ones(n + 1)
    if n < 6:
        w[0] = w[-1] = 0.5
        return w
    end = np.array([3 / 8, 7 / 6, 23 / 24])
    w[:3] = end
    w[-3:] = end[::-1]
    return w


def volterra_dense(kernel, source, h, t_end, coupling=2.0):
    """Nystrom solution of y + c int_0^t K(t-s) y(s) ds = S with Gregory weights.

    ``kernel`` and ``source`` are callables of t; returns (t, y) on step h.
    """
    n = int(round(t_end / h))
    t = h * np.arange(n + 1)
    K = np.asarray(kernel(t), dtype=complex)
    S = np.asarray(source(t), dtype=complex)
    y = np.zeros(n + 1, dtype=complex)
    y[0] = S[0]
    for m in range(1, n + 1):
        w = gregory_weights(m)
        acc = np.dot(w[:m] * K[m:0:-1], y[:m])
        y[m] = (S[m] - coupling * h * acc) / (1 + coupling * h * w[m] * K[0])
    return t, y
