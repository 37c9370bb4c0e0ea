"""Path-integral quantities for the pinned process.

With xbar(t) = x(t) - x0 the action is S = (1/2) int_0^beta (K xbar)^2 dt,
K = (D^alpha + lambda^alpha)^gamma.  Its minimizer between the pins is
x_c(t) = x0 + dx U(t)/U(beta), the minimum is dx^2 / (2 U(beta)), and the
propagator is the Gaussian with variance U(beta) = sigma^2(beta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import (
    ProcessParams,
    covariance_quadrature,
    covariance_series,
    green_g_array,
    u_of_beta,
    u_of_t_array,
    variance_quadrature,
)
from .langevin import GrunwaldOperator, _toeplitz_upper, grunwald_apply
from .quadrature import graded_rule
from .specfun import DEFAULT_CONTROL, DomainError, SeriesControl


@dataclass(frozen=True)
class BoundaryData:
    x0: float
    x_beta: float
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")

    @property
    def dx(self) -> float:
        return self.x_beta - self.x0


@dataclass(frozen=True)
class DiscretePath:
    """Positions at t_k = k dt, k = 0..n."""

    values: np.ndarray
    dt: float

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dt


def classical_path(p: ProcessParams, b: BoundaryData, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """x_c(t) = x0 + (x_beta - x0) U(t) / U(beta); accepts a scalar or an array of times."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(arr > b.beta):
        raise DomainError("t must lie in [0, beta]")
    u = u_of_t_array(p, arr.ravel(), b.beta, ctl).reshape(arr.shape)
    ub = u_of_beta(p, b.beta, ctl)
    out = b.x0 + b.dx * u / ub
    # pin the ends exactly
    out = np.where(arr == b.beta, b.x_beta, np.where(arr == 0, b.x0, out))
    return float(out) if out.ndim == 0 else out


def classical_path_grid(p: ProcessParams, b: BoundaryData, n: int, ctl: SeriesControl = DEFAULT_CONTROL) -> DiscretePath:
    return DiscretePath(classical_path(p, b, np.linspace(0.0, b.beta, n + 1), ctl), b.beta / n)


def w_kernel(p: ProcessParams, beta: float, t, ctl: SeriesControl = DEFAULT_CONTROL):
    """W(beta - t) = G(beta - t) / U(beta) for t < beta."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr >= beta) or np.any(arr < 0):
        raise DomainError("W needs 0 <= t < beta (singular at t = beta)")
    out = green_g_array(p, (beta - arr).ravel(), ctl).reshape(arr.shape) / u_of_beta(p, beta, ctl)
    return float(out) if out.ndim == 0 else out


def w_squared_integral(p: ProcessParams, beta: float, n_nodes: int = 24, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """int_0^beta W(beta - t)^2 dt on a mesh graded toward the t = beta singularity."""
    v, w = graded_rule(beta, 2.0 * p.order - 2.0, n_nodes)
    g = green_g_array(p, v, ctl)
    return float(np.dot(w, g * g)) / u_of_beta(p, beta, ctl) ** 2


def propagator(p: ProcessParams, b: BoundaryData, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """(2 pi U(beta))^{-1/2} exp(-(x_beta - x0)^2 / (2 U(beta)))."""
    u = u_of_beta(p, b.beta, ctl)
    return math.exp(-0.5 * b.dx**2 / u) / math.sqrt(2.0 * math.pi * u)


def propagator_moments(p: ProcessParams, x0: float, beta: float, n_nodes: int = 40, ctl: SeriesControl = DEFAULT_CONTROL):
    """(int K dx_beta, int (x_beta - x0)^2 K dx_beta) by Gauss-Hermite quadrature."""
    u = u_of_beta(p, beta, ctl)
    y, w = np.polynomial.hermite.hermgauss(n_nodes)
    # x_beta = x0 + sqrt(2U) y maps exp(-y^2) onto the Gaussian
    scale = math.sqrt(2.0 * u)
    xb = x0 + scale * y
    k = np.array([propagator(p, BoundaryData(x0, float(v), beta), ctl) for v in xb])
    jac = scale * np.exp(y * y)
    return float(np.sum(w * jac * k)), float(np.sum(w * jac * k * (xb - x0) ** 2))


def classical_action(p: ProcessParams, b: BoundaryData, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """S[x_c] = (x_beta - x0)^2 / (2 U(beta))."""
    return 0.5 * b.dx**2 / u_of_beta(p, b.beta, ctl)


def partition_function(p: ProcessParams, beta: float, volume: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Trace of the propagator over a box of length `volume`: V / sqrt(2 pi U(beta))."""
    if not volume > 0:
        raise DomainError(f"volume must be positive, got {volume}")
    return volume / math.sqrt(2.0 * math.pi * u_of_beta(p, beta, ctl))


def generating_covariance(p: ProcessParams, t: float, s: float, n_nodes: int = 24) -> float:
    """Second functional derivative of the free energy: int_0^{min} G(t-u) G(s-u) du."""
    if t < 0 or s < 0:
        raise DomainError("times must be non-negative")
    if min(t, s) == 0:
        return 0.0
    hi, lo = max(t, s), min(t, s)
    return covariance_quadrature(p, hi, lo, n_nodes)


# --------------------------------------------------------------------------
# Discrete action


def _check_grid(path: DiscretePath, op: GrunwaldOperator):
    if not math.isclose(path.dt, op.dt, rel_tol=1e-12):
        raise DomainError(f"grid mismatch: path dt={path.dt}, operator dt={op.dt}")
    if path.n + 1 > op.n:
        raise DomainError(f"path has {path.n + 1} points but the operator covers {op.n}")


def discrete_action(p: ProcessParams, path: DiscretePath, op: GrunwaldOperator) -> float:
    """(1/2) dt sum_{k=1}^{n} (K xbar)_k^2 with xbar = x - x(0) and zero history before t = 0."""
    _check_grid(path, op)
    if not (math.isclose(op.alpha, p.alpha) and math.isclose(op.gamma, p.gamma) and math.isclose(op.lam, p.lam)):
        raise DomainError("operator was built for different process parameters")
    xbar = path.values - path.values[0]
    y = grunwald_apply(op, xbar)
    return 0.5 * path.dt * float(np.dot(y[1:], y[1:]))


def action_cross_term(path: DiscretePath, q: np.ndarray, op: GrunwaldOperator) -> float:
    """dt sum (K xbar)_k (K q)_k, so that S[x + q] = S[x] + cross + S[q] for pinned q."""
    _check_grid(path, op)
    y = grunwald_apply(op, path.values - path.values[0])
    z = grunwald_apply(op, q)
    return path.dt * float(np.dot(y[1:], z[1:]))


def discrete_minimizer(b: BoundaryData, op: GrunwaldOperator, n: int) -> DiscretePath:
    """Pinned path minimizing the discrete action on n steps (a linear least-squares problem)."""
    dt = b.beta / n
    if not math.isclose(dt, op.dt, rel_tol=1e-12):
        raise DomainError(f"grid mismatch: beta/n={dt}, operator dt={op.dt}")
    k = _toeplitz_upper(op.weights[: n + 1]).T[1:, :]  # rows k=1..n, columns j=0..n
    free = k[:, 1:n]
    rhs = -k[:, n] * b.dx
    z, *_ = np.linalg.lstsq(free, rhs, rcond=None)
    xbar = np.concatenate([[0.0], z, [b.dx]])
    return DiscretePath(b.x0 + xbar, dt)


# --------------------------------------------------------------------------
# Ordinary OU chaining (Markov case only)


def ou_transition_density(p: ProcessParams, x_from: float, x_to: float, tau: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Transition density of the alpha = gamma = 1 process over a lag tau.

    The mean factor and conditional variance are read off the covariance of
    the process started at zero: x(t + tau) | x(t) has mean C(t+tau, t)/C(t, t) x(t)
    and variance sigma^2(t + tau) - C(t+tau, t)^2 / sigma^2(t), both independent of t.
    """
    if not (p.alpha == 1.0 and p.gamma == 1.0):
        raise DomainError("transition densities chain only in the Markov case alpha = gamma = 1")
    if not tau > 0:
        raise DomainError("tau must be positive")
    t = 1.0
    c_tt = covariance_series(p, t, t, ctl)
    c_st = covariance_series(p, t + tau, t, ctl)
    c_ss = covariance_series(p, t + tau, t + tau, ctl)
    factor = c_st / c_tt
    var = c_ss - c_st * factor
    return math.exp(-0.5 * (x_to - factor * x_from) ** 2 / var) / math.sqrt(2.0 * math.pi * var)


def ou_chaining_gap(p: ProcessParams, x0: float, x2: float, beta: float, n_nodes: int = 60, ctl: SeriesControl = DEFAULT_CONTROL):
    """(composed, direct): int K(x0 -> x1; beta/2) K(x1 -> x2; beta/2) dx1 against K(x0 -> x2; beta)."""
    half = 0.5 * beta
    t = 1.0
    c_tt = covariance_series(p, t, t, ctl)
    c_st = covariance_series(p, t + half, t, ctl)
    factor = c_st / c_tt
    var = covariance_series(p, t + half, t + half, ctl) - c_st * factor
    # integrate over x1 with Gauss-Hermite centred on the first factor's mean
    y, w = np.polynomial.hermite.hermgauss(n_nodes)
    scale = math.sqrt(2.0 * var)
    x1 = factor * x0 + scale * y
    second = np.array([ou_transition_density(p, float(v), x2, half, ctl) for v in x1])
    composed = float(np.sum(w * second)) / math.sqrt(math.pi)
    return composed, ou_transition_density(p, x0, x2, beta, ctl)
