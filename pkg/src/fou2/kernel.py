"""Green's function and second-order statistics of the two-index fractional OU process.

The process solves (D^alpha + lambda^alpha)^gamma x = xi with Riemann-Liouville
operators and x(0) = 0, so x(t) = int_0^t G(t-u) dB(u) with

    G(t) = t^{alpha gamma - 1} E^gamma_{alpha, alpha gamma}(-lambda^alpha t^alpha).

Every statistic is available from two independent routes: the closed-form
series (double sums over anti-diagonals q = m + n, 2F1 factors) and direct
quadrature of products of G.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy.special import gammaln, logsumexp

from .quadrature import graded_rule
from .specfun import (
    DEFAULT_CONTROL,
    TERM_EPS,
    Z_WINDOW,
    DomainError,
    SeriesControl,
    SeriesError,
    _digits_needed,
    escalate,
    hyp2f1_at_one,
    hyp2f1_unit_b_array,
    prabhakar_array,
)

_STALL = 3


@dataclass(frozen=True)
class ProcessParams:
    """Indices (alpha, gamma) and rate lambda; lambda = 0 is the Riemann-Liouville fBm limit."""

    alpha: float
    gamma: float
    lam: float = 0.0

    def __post_init__(self):
        a, g, lam = self.alpha, self.gamma, self.lam
        if not all(math.isfinite(v) for v in (a, g, lam)):
            raise DomainError("process parameters must be finite")
        if not (0.0 < a <= 1.0):
            raise DomainError(f"alpha must lie in (0, 1], got {a}")
        if not (0.0 < g <= 1.0):
            raise DomainError(f"gamma must lie in (0, 1], got {g}")
        if not a * g > 0.5:
            raise DomainError(f"alpha*gamma must exceed 1/2 for a finite variance, got {a * g}")
        if not lam >= 0.0:
            raise DomainError(f"lambda must be non-negative, got {lam}")

    @property
    def order(self) -> float:
        """alpha * gamma, the total order of the operator."""
        return self.alpha * self.gamma

    @property
    def hurst(self) -> float:
        return self.alpha * self.gamma - 0.5

    @property
    def rate(self) -> float:
        """lambda^alpha, the coefficient multiplying the alternating series."""
        return self.lam**self.alpha


# --------------------------------------------------------------------------
# Coefficient tables


def _log_binoms(gamma, n_max):
    n = np.arange(n_max + 1, dtype=float)
    return gammaln(gamma + n) - gammaln(gamma) - gammaln(n + 1.0)


@dataclass(frozen=True)
class CoeffTable:
    """Lambda_q from the variance formula and Omega_q from U(beta) via 2F1 at unity.

    Stored as logarithms as well, since the entries underflow for large q.
    """

    log_lambda_q: np.ndarray
    log_omega_q: np.ndarray
    q_max: int

    @property
    def lambda_q(self) -> np.ndarray:
        return np.exp(self.log_lambda_q)

    @property
    def omega_q(self) -> np.ndarray:
        return np.exp(self.log_omega_q)

    @property
    def max_mismatch(self) -> float:
        """Largest relative difference |Lambda_q - Omega_q| / Lambda_q."""
        return float(np.max(np.abs(np.expm1(self.log_omega_q - self.log_lambda_q))))


IDENTITY_TOL = 1e-12


@lru_cache(maxsize=128)
def coeff_table(alpha: float, gamma: float, q_max: int = 64) -> CoeffTable:
    """Build Lambda_q and Omega_q for q = 0..q_max by separate routes and cross-check them.

    Lambda_q = sum_{m+n=q} b_m b_n / (Gamma(a_m) Gamma(a_n)) is summed directly.
    Omega_q is assembled the way U(beta) produces it: the 2F1 factor of the U(t)
    double series is evaluated at unity and rescaled by alpha(2 gamma + q) - 1.
    The two must agree; a mismatch raises.
    """
    lb = _log_binoms(gamma, q_max)
    a = alpha * (gamma + np.arange(q_max + 1))
    lga = gammaln(a)
    lga1 = gammaln(1.0 + a)
    log_lam = np.empty(q_max + 1)
    log_om = np.empty(q_max + 1)
    for q in range(q_max + 1):
        m = np.arange(q + 1)
        n = q - m
        log_lam[q] = logsumexp(lb[m] + lb[n] - lga[m] - lga[n])
        f1 = np.array([hyp2f1_at_one(1.0 - a[j], 1.0 + a[i]) for i, j in zip(m, n)])
        log_om[q] = math.log(alpha * (2 * gamma + q) - 1.0) + logsumexp(
            lb[m] + lb[n] - lga1[m] - lga[n] + np.log(f1)
        )
    table = CoeffTable(log_lam, log_om, q_max)
    if not np.all(np.isfinite(log_lam)) or table.max_mismatch > IDENTITY_TOL:
        raise AssertionError(
            f"Lambda_q and Omega_q disagree (max rel mismatch {table.max_mismatch:.3e}) "
            f"for alpha={alpha}, gamma={gamma}"
        )
    return table


def _table_for(p: ProcessParams, q: int) -> CoeffTable:
    size = 64
    while size < q + 1:
        size *= 2
    return coeff_table(p.alpha, p.gamma, size)


# --------------------------------------------------------------------------
# Green's function


def _check_window(p: ProcessParams, t_max: float, what: str):
    z = p.rate * t_max**p.alpha
    if z > Z_WINDOW:
        raise SeriesError(
            f"{what}: lambda^alpha t^alpha = {z:.3g} exceeds the series window {Z_WINDOW}; "
            "use the quadrature route or a smaller horizon"
        )


def green_g_array(p: ProcessParams, t, ctl: SeriesControl = DEFAULT_CONTROL) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise DomainError("G(t) is only defined for t > 0")
    lead = t ** (p.order - 1.0)
    if p.lam == 0.0:
        return lead / math.gamma(p.order)
    z = -p.rate * t**p.alpha
    return lead * prabhakar_array(p.alpha, p.order, p.gamma, z, ctl).value


# Hyperbolic Bromwich contour s(theta) = mu (1 + sin(i theta - phi)), trapezoid
# in theta with step h; mu and h scale as n/t (Weideman-Trefethen optimal
# parameters).  24 nodes on each side gave ~1e-11 relative accuracy in checks
# against the series; more nodes lose accuracy to the exp(mu t) amplification.
_CONTOUR_N = 24
_CONTOUR_MU = 4.492075287
_CONTOUR_H = 1.081792140
_CONTOUR_PHI = 1.172104229


def green_g_laplace(p: ProcessParams, t) -> np.ndarray:
    """G(t) by numerical inversion of its Laplace transform (s^alpha + lambda^alpha)^{-gamma}.

    Needs no cancellation control, so it reaches arguments far outside the
    series window.  The error is relative to the algebraic tail t^{-alpha-1}
    for alpha < 1; for alpha = 1 the kernel decays exponentially and the
    closed form t^{gamma-1} e^{-lambda t} / Gamma(gamma) is returned instead.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise DomainError("G(t) is only defined for t > 0")
    if p.lam == 0.0:
        return t ** (p.order - 1.0) / math.gamma(p.order)
    if p.alpha == 1.0:
        return t ** (p.gamma - 1.0) * np.exp(-p.lam * t) / math.gamma(p.gamma)
    n = _CONTOUR_N
    theta = _CONTOUR_H / n * np.arange(-n, n + 1)
    w = 1j * theta - _CONTOUR_PHI
    mu = _CONTOUR_MU * n / t[:, None]
    s = mu * (1.0 + np.sin(w))
    ds = mu * 1j * np.cos(w)
    f = (s**p.alpha + p.rate) ** (-p.gamma)
    return (_CONTOUR_H / n / (2j * math.pi) * np.sum(np.exp(s * t[:, None]) * f * ds, axis=1)).real


def green_g(p: ProcessParams, t: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """G(t) = sum_n binom(gamma+n-1, n) (-lambda^alpha)^n t^{alpha(gamma+n)-1} / Gamma(alpha(gamma+n))."""
    return float(green_g_array(p, [t], ctl)[0])


# --------------------------------------------------------------------------
# Variance


def _stall_index(terms, ctl: SeriesControl):
    """First index at which the running sum has stalled for _STALL terms, or None."""
    total = np.cumsum(terms)
    tiny = np.abs(terms) <= ctl.rel_tol * np.maximum(np.abs(total), np.finfo(float).tiny)
    run = 0
    for i, flag in enumerate(tiny):
        run = run + 1 if flag else 0
        if run >= _STALL:
            return i
    return None


def _power_series_sum(p: ProcessParams, t: float, ctl: SeriesControl, kind: str) -> float:
    """Sum over q of (-lambda^alpha)^q Lambda_q t^{mu_q - 1} w_q for the variance-type series.

    kind = "variance": w_q = 1/(mu_q - 1);  kind = "rate": w_q = 1/2 and exponent mu_q - 2.
    kind = "omega": same as variance but with the Omega_q coefficients.
    """
    if p.lam == 0.0:
        table = _table_for(p, 0)
        mu = 2.0 * p.order
        c = math.exp(table.log_omega_q[0] if kind == "omega" else table.log_lambda_q[0])
        if kind == "rate":
            return 0.5 * c * t ** (mu - 2.0)
        return c * t ** (mu - 1.0) / (mu - 1.0)
    q_hi = 64
    while True:
        if q_hi >= ctl.max_terms:
            raise SeriesError(f"{kind} series did not converge in {ctl.max_terms} terms; use the quadrature route")
        table = _table_for(p, q_hi)
        q = np.arange(q_hi + 1)
        mu = p.alpha * (2 * p.gamma + q)
        logcoef = table.log_omega_q if kind == "omega" else table.log_lambda_q
        shift = -1.0 if kind == "rate" else 0.0
        logmag = logcoef[: q_hi + 1] + (mu - 1.0 + shift) * math.log(t) + q * p.alpha * math.log(p.lam)
        weight = 0.5 if kind == "rate" else 1.0 / (mu - 1.0)
        terms = np.where(q % 2 == 0, 1.0, -1.0) * np.exp(logmag) * weight
        stop = _stall_index(terms, ctl)
        if stop is not None:
            terms = terms[: stop + 1]
            value = float(math.fsum(terms))
            abs_sum = float(np.abs(terms).sum())
            if abs_sum * TERM_EPS <= ctl.rel_tol * abs(value):
                return value
            dps = _digits_needed(abs_sum, value, ctl.rel_tol)
            return float(escalate(lambda d: _power_series_mp(p, t, ctl, kind, d), dps, ctl.rel_tol)[0])
        q_hi *= 2


def _mp_binoms(g, n_max):
    out = [mpmath.mpf(1)]
    for k in range(n_max):
        out.append(out[-1] * (g + k) / (k + 1))
    return out


def _power_series_mp(p: ProcessParams, t: float, ctl: SeriesControl, kind: str, dps: int):
    """High-precision variant of ``_power_series_sum``; returns (value, abs_sum) as mpf."""
    with mpmath.workdps(dps):
        al, g, lam, tt = (mpmath.mpf(v) for v in (p.alpha, p.gamma, p.lam, t))
        rate = lam**al
        left, right, a = [], [], []

        def extend(n_max):
            b = _mp_binoms(g, n_max)
            for k in range(len(a), n_max + 1):
                ak = al * (g + k)
                a.append(ak)
                right.append(b[k] * mpmath.rgamma(ak))
                left.append(b[k] * mpmath.rgamma(1 + ak))

        extend(64)
        total = mpmath.mpf(0)
        abs_sum = mpmath.mpf(0)
        run = 0
        for q in range(ctl.max_terms):
            if q >= len(a):
                extend(2 * len(a))
            mu = al * (2 * g + q)
            if kind == "omega":
                # 2F1(1 - a_n, 1; 1 + a_m; 1) = a_m / (a_m + a_n - 1) with b = 1
                coef = sum(
                    left[m] * right[q - m] * a[m] / (a[m] + a[q - m] - 1) for m in range(q + 1)
                ) * (mu - 1)
            else:
                coef = sum(right[m] * right[q - m] for m in range(q + 1))
            if kind == "rate":
                term = (-rate) ** q * coef * tt ** (mu - 2) / 2
            else:
                term = (-rate) ** q * coef * tt ** (mu - 1) / (mu - 1)
            total += term
            abs_sum += abs(term)
            run = run + 1 if abs(term) <= ctl.rel_tol * abs(total) else 0
            if run >= _STALL:
                return total, abs_sum
    raise SeriesError(f"{kind} series did not converge in {ctl.max_terms} terms; use the quadrature route")


def variance_series(p: ProcessParams, t: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """sigma^2(t) = sum_q (-lambda^alpha)^q Lambda_q t^{alpha(2gamma+q)-1} / (alpha(2gamma+q)-1)."""
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t}")
    if t == 0:
        return 0.0
    _check_window(p, t, "variance series")
    return _power_series_sum(p, t, ctl, "variance")


def u_of_beta(p: ProcessParams, beta: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """U(beta) = sum_q (-lambda^alpha)^q Omega_q beta^{alpha(2gamma+q)-1} / (alpha(2gamma+q)-1)."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    _check_window(p, beta, "U(beta) series")
    return _power_series_sum(p, beta, ctl, "omega")


def diffusion_rate(p: ProcessParams, t: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """(1/2) d sigma^2/dt from the termwise-differentiated variance series."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    _check_window(p, t, "diffusion coefficient series")
    return _power_series_sum(p, t, ctl, "rate")


# --------------------------------------------------------------------------
# Covariance double series and U(t)


def _cross_float(p: ProcessParams, big: float, s: np.ndarray, ctl: SeriesControl):
    """C(big, s_i) for 0 < s_i <= big.  Returns (value, abs_sum) arrays."""
    x = s / big
    logs = np.log(s)
    logT = math.log(big)
    lb = _log_binoms(p.gamma, 64)
    total = np.zeros_like(s)
    abs_sum = np.zeros_like(s)
    run = np.zeros(s.shape, dtype=int)
    log_rate = p.alpha * math.log(p.lam) if p.lam > 0 else None
    for q in range(ctl.max_terms):
        if q > 0 and log_rate is None:
            return total, abs_sum
        if q >= len(lb):
            lb = _log_binoms(p.gamma, 2 * len(lb))
        diag = np.zeros_like(s)
        for m in range(q + 1):
            n = q - m
            am = p.alpha * (p.gamma + m)
            an = p.alpha * (p.gamma + n)
            logc = lb[m] + lb[n] - gammaln(1.0 + am) - gammaln(an) + (an - 1.0) * logT
            if q:
                logc += q * log_rate
            F = hyp2f1_unit_b_array(1.0 - an, 1.0 + am, x, ctl)
            term = np.exp(logc + am * logs) * F
            diag += term
            abs_sum += np.abs(term)
        if q % 2:
            diag = -diag
        total += diag
        run = np.where(np.abs(diag) <= ctl.rel_tol * np.abs(total), run + 1, 0)
        if np.all(run >= _STALL):
            return total, abs_sum
    raise SeriesError(f"covariance series did not converge in {ctl.max_terms} anti-diagonals")


def _cross_mp(p: ProcessParams, big: float, s: float, ctl: SeriesControl, dps: int) -> float:
    with mpmath.workdps(dps):
        al, g, lam = (mpmath.mpf(v) for v in (p.alpha, p.gamma, p.lam))
        T, ss = mpmath.mpf(big), mpmath.mpf(s)
        x = ss / T
        rate = lam**al
        left, right, a = [], [], []  # per-index factors in s and in T

        def extend(n_max):
            b = _mp_binoms(g, n_max)
            for k in range(len(left), n_max + 1):
                ak = al * (g + k)
                a.append(ak)
                left.append(b[k] * ss**ak * mpmath.rgamma(1 + ak))
                right.append(b[k] * T ** (ak - 1) * mpmath.rgamma(ak))

        extend(64)
        total = mpmath.mpf(0)
        abs_sum = mpmath.mpf(0)
        run = 0
        for q in range(ctl.max_terms):
            if q > 0 and p.lam == 0:
                return total, abs_sum
            if q >= len(left):
                extend(2 * len(left))
            diag = mpmath.mpf(0)
            scale = rate**q
            for m in range(q + 1):
                n = q - m
                piece = left[m] * right[n] * mpmath.hyp2f1(1 - a[n], 1, 1 + a[m], x)
                diag += piece
                abs_sum += scale * abs(piece)
            term = (-1) ** q * scale * diag
            total += term
            run = run + 1 if abs(term) <= ctl.rel_tol * abs(total) else 0
            if run >= _STALL:
                return total, abs_sum
    raise SeriesError(f"covariance series did not converge in {ctl.max_terms} anti-diagonals")


def cross_series_array(p: ProcessParams, big: float, s, ctl: SeriesControl = DEFAULT_CONTROL) -> np.ndarray:
    """C(big, s_i) for each 0 <= s_i <= big by the double series.

    This is also U(s) on a horizon beta = big, since the U(t) double series is
    the covariance between x(beta) and x(t).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if not big > 0:
        raise DomainError(f"t must be positive, got {big}")
    if np.any(s < 0) or np.any(s > big * (1 + 1e-15)):
        raise DomainError("arguments must satisfy 0 <= s <= t")
    s = np.minimum(s, big)
    _check_window(p, big, "covariance series")
    out = np.zeros_like(s)
    pos = s > 0
    if not np.any(pos):
        return out
    val, abs_sum = _cross_float(p, big, s[pos], ctl)
    bad = abs_sum * TERM_EPS > ctl.rel_tol * np.abs(val)
    for i in np.flatnonzero(bad):
        dps = _digits_needed(abs_sum[i], val[i], ctl.rel_tol)
        si = s[pos][i]
        val[i] = float(escalate(lambda d, si=si: _cross_mp(p, big, si, ctl, d), dps, ctl.rel_tol)[0])
    out[pos] = val
    return out


def covariance_series(p: ProcessParams, t: float, s: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """C(t, s) by the double series with 2F1(1 - alpha(gamma+n), 1, 1 + alpha(gamma+m); s/t)."""
    if t < 0 or s < 0:
        raise DomainError("times must be non-negative")
    big, small = (t, s) if t >= s else (s, t)
    if small == 0:
        return 0.0
    return float(cross_series_array(p, big, [small], ctl)[0])


def u_of_t(p: ProcessParams, t: float, beta: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """U(t) on the horizon beta: the double series with 2F1(...; t/beta)."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if not (0.0 <= t <= beta):
        raise DomainError(f"t must lie in [0, beta], got t={t}, beta={beta}")
    return float(cross_series_array(p, beta, [t], ctl)[0])


def u_of_t_array(p: ProcessParams, t, beta: float, ctl: SeriesControl = DEFAULT_CONTROL) -> np.ndarray:
    return cross_series_array(p, beta, t, ctl)


# --------------------------------------------------------------------------
# Quadrature route


def variance_quadrature(p: ProcessParams, t: float, n_nodes: int = 24, g_route: str = "series") -> float:
    """sigma^2(t) = int_0^t G(v)^2 dv on a mesh graded toward the v -> 0 singularity."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if n_nodes < 16:
        raise DomainError("n_nodes must be at least 16")
    v, w = graded_rule(t, 2.0 * p.order - 2.0, n_nodes)
    g = _kernel_route(g_route)(p, v)
    val = float(np.dot(w, g * g))
    if not math.isfinite(val):
        raise ArithmeticError(f"non-finite variance quadrature at t={t}")
    return val


def _kernel_route(route):
    if route == "series":
        return green_g_array
    if route == "laplace":
        return lambda p, v: green_g_laplace(p, v)
    raise ValueError(f"unknown kernel route {route!r}")


def covariance_quadrature(p: ProcessParams, t: float, s: float, n_nodes: int = 24, g_route: str = "series") -> float:
    """C(t, s) = int_0^{min(t,s)} G(t-u) G(s-u) du.

    ``g_route="laplace"`` evaluates G by contour inversion, which is the way to
    reach lags far beyond the series window.
    """
    if not (t > 0 and s > 0):
        raise DomainError("covariance quadrature needs t, s > 0")
    if n_nodes < 16:
        raise DomainError("n_nodes must be at least 16")
    big, small = (t, s) if t >= s else (s, t)
    gap = big - small
    if gap <= 1e-14 * big:
        return variance_quadrature(p, small, n_nodes, g_route)
    g = _kernel_route(g_route)
    v, w = graded_rule(small, p.order - 1.0, n_nodes, min_scale=gap)
    val = float(np.dot(w, g(p, v) * g(p, v + gap)))
    if not math.isfinite(val):
        raise ArithmeticError(f"non-finite covariance quadrature at t={t}, s={s}")
    return val


def cross_quadrature_array(p: ProcessParams, big: float, s, n_nodes: int = 24) -> np.ndarray:
    """covariance_quadrature(p, big, s_i) for each s_i in (0, big]."""
    return np.array([covariance_quadrature(p, big, si, n_nodes) if si > 0 else 0.0 for si in np.atleast_1d(s)])
