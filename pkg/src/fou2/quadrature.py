"""Graded Gauss rules for integrands with an algebraic endpoint singularity."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@lru_cache(maxsize=64)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=256)
def _jacobi(n, power):
    x, w = roots_jacobi(n, 0.0, power)
    return x, w


def graded_rule(length, power, n_nodes=24, ratio=0.15, levels=10, min_scale=None):
    """Nodes and weights for the integral of f over (0, length].

    f may behave like v**power (power > -1) as v -> 0.  The interval is cut
    into geometric panels [r^{k+1} L, r^k L]; each gets an ``n_nodes``-point
    Gauss-Legendre rule and the innermost panel [0, r^K L] gets a Gauss-Jacobi
    rule with weight v**power.  Its weights are pre-divided by v**power so
    callers pass plain f values.

    ``min_scale`` forces the innermost panel below that width (used when a
    second singularity sits just outside the interval at distance min_scale).
    """
    if not length > 0:
        raise ValueError(f"length must be positive, got {length}")
    if not power > -1:
        raise ValueError(f"power must exceed -1, got {power}")
    if n_nodes < 2:
        raise ValueError("n_nodes must be at least 2")
    if min_scale is not None and min_scale < length:
        need = math.ceil(math.log(min_scale / (20.0 * length)) / math.log(ratio))
        levels = max(levels, min(need, 80))
    xl, wl = _legendre(n_nodes)
    nodes = []
    weights = []
    hi = length
    for _ in range(levels):
        lo = hi * ratio
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (xl + 1.0))
        weights.append(half * wl)
        hi = lo
    xj, wj = _jacobi(n_nodes, float(power))
    v = 0.5 * hi * (xj + 1.0)
    # weight (1+x)^p on [-1,1] maps to v^p (2/hi)^p; dv = hi/2 dx
    wv = wj * (0.5 * hi) ** (power + 1.0) / v**power
    nodes.append(v)
    weights.append(wv)
    return np.concatenate(nodes[::-1]), np.concatenate(weights[::-1])


def gauss_legendre(a, b, n_nodes):
    x, w = _legendre(n_nodes)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w
