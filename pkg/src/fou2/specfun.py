"""Special functions: log-Gamma, generalized binomials, restricted 2F1, Prabhakar.

Every series here is evaluated in double precision first.  When the partial
sums cancel badly (sum of absolute terms much larger than the result) the
scalar entry points redo the sum in extended precision with mpmath, so the
returned float is accurate to the requested relative tolerance rather than
to ``eps * sum|terms|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import gammaln, logsumexp

# Relative rounding level assumed for one double-precision term, including the
# error of lgamma/exp used to build it.
TERM_EPS = 1e-15
_TINY = np.finfo(float).tiny
_LOG_FLOOR = math.log(TERM_EPS * 1e-3)
_STALL = 3  # consecutive small terms required before stopping


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class SeriesError(ArithmeticError):
    """A series did not reach its tolerance within the term budget."""


@dataclass(frozen=True)
class SeriesControl:
    rel_tol: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0):
            raise DomainError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise DomainError(f"max_terms must be a positive integer, got {self.max_terms}")


DEFAULT_CONTROL = SeriesControl()


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms_used: int
    converged: bool
    tail_estimate: float

    def __float__(self):
        return float(self.value)


def _digits_needed(abs_sum: float, value: float, rel_tol: float) -> int:
    """Working decimal digits so that cancellation still leaves ``rel_tol``."""
    if not math.isfinite(abs_sum):
        return 330 + int(-math.log10(rel_tol)) + 10
    ratio = abs_sum / max(abs(value), abs_sum * 1e-300, _TINY)
    return int(math.ceil(math.log10(max(ratio, 1.0)) - math.log10(rel_tol))) + 10


def _mp_digits_needed(abs_sum, value, rel_tol: float) -> int:
    """As ``_digits_needed`` for mpmath numbers that may exceed double range."""
    if value == 0:
        return int(float(mpmath.log10(abs_sum))) + 40
    lost = float(mpmath.log10(abs_sum) - mpmath.log10(abs(value)))
    return int(math.ceil(max(lost, 0.0) - math.log10(rel_tol))) + 10


def escalate(run_mp, dps: int, rel_tol: float, attempts: int = 6):
    """Repeat ``run_mp(dps) -> (value, abs_sum, *extra)`` until dps covers the cancellation.

    The digit estimate is refreshed from each high-precision result, so a
    first guess made from a double-precision sum that was pure noise is
    corrected on the next pass.  Returns the last tuple from ``run_mp``.
    """
    for _ in range(attempts):
        out = run_mp(dps)
        need = _mp_digits_needed(out[1], out[0], rel_tol)
        if need <= dps:
            return out
        dps = max(need, dps + 10)
    raise SeriesError(f"cancellation not resolved at {dps} digits")


def _cancellation_ok(abs_sum: float, value: float, rel_tol: float) -> bool:
    return abs_sum * TERM_EPS <= rel_tol * abs(value)


# --------------------------------------------------------------------------
# Gamma and binomial coefficients


def ln_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"ln_gamma needs x > 0, got {x}")
    return math.lgamma(x)


def gen_binom(gamma: float, n: int) -> float:
    """binom(gamma + n - 1, n) = Gamma(gamma + n) / (Gamma(gamma) n!)."""
    if not (0.0 < gamma <= 1.0):
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")
    if n < 0 or int(n) != n:
        raise DomainError(f"n must be a non-negative integer, got {n}")
    n = int(n)
    if n < 30:
        out = 1.0
        for k in range(n):
            out *= (gamma + k) / (k + 1)
        return out
    return math.exp(math.lgamma(gamma + n) - math.lgamma(gamma) - math.lgamma(n + 1))


def gen_binom_array(gamma: float, n_max: int) -> np.ndarray:
    """gen_binom(gamma, n) for n = 0..n_max via the stable product recurrence."""
    k = np.arange(n_max, dtype=float)
    out = np.empty(n_max + 1)
    out[0] = 1.0
    out[1:] = np.cumprod((gamma + k) / (k + 1.0))
    return out


# --------------------------------------------------------------------------
# Gauss hypergeometric 2F1(a, 1; c; x) on [0, 1]


def hyp2f1_at_one(a: float, c: float) -> float:
    """2F1(a, 1; c; 1) = Gamma(c) Gamma(c-a-1) / (Gamma(c-a) Gamma(c-1)).

    With b = 1 the Gamma recurrence collapses the ratio to (c-1)/(c-a-1),
    which is evaluated in that form: it keeps full precision where the
    log-Gamma form loses digits to large arguments.
    """
    if not c - a - 1.0 > 0:
        raise DomainError(f"2F1(a,1;c;1) diverges unless c - a - 1 > 0 (a={a}, c={c})")
    return (c - 1.0) / (c - a - 1.0)


def _terminating_degree(a: float) -> int | None:
    if a <= 0 and abs(a - round(a)) < 1e-12:
        return int(round(-a))
    return None


def _hyp_direct(a, c, x, rel_tol, max_terms, degree=None):
    """Gauss series sum_k (a)_k / (c)_k x^k, vectorized over x and k.

    Returns (value, terms, tail, abs_sum).  ``terms == max_terms`` signals
    that the stall rule was not met.
    """
    xmax = float(np.max(x)) if x.size else 0.0
    if degree is not None:
        count = degree + 1
    elif xmax <= 0.0:
        count = 1
    else:
        count = int(math.log(rel_tol * 1e-3) / math.log(xmax)) + 16
    while True:
        count = min(count, max_terms)
        k = np.arange(count - 1, dtype=float)
        coef = np.empty(count)
        coef[0] = 1.0
        coef[1:] = np.cumprod((a + k) / (c + k))
        terms = coef[None, :] * x[:, None] ** np.arange(count)
        total = terms.sum(axis=1)
        abs_sum = np.abs(terms).sum(axis=1)
        tail = np.abs(terms[:, -1])
        if degree is not None:
            return total, count, np.zeros_like(x), abs_sum
        last = np.abs(terms[:, -_STALL:])
        if np.all(last <= rel_tol * np.maximum(np.abs(total), _TINY)[:, None]):
            return total, count, tail, abs_sum
        if count >= max_terms:
            return total, max_terms, tail, abs_sum
        count *= 2


X_SPLIT = 0.75


def hyp2f1_unit_b_array(a: float, c: float, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """2F1(a, 1; c; x) for an array of x in [0, 1].  Raises SeriesError on failure.

    x <= 0.75 uses the Gauss series; larger x uses the 1 - x connection
    formula (the second branch collapses to a power because b = 1).  When
    c - a - 1 is close to an integer the two branches cancel and the point is
    handed to mpmath at raised precision.  x == 1 uses the closed form.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    if np.any((x < 0) | (x > 1)) or not np.all(np.isfinite(x)):
        raise DomainError("x must lie in [0, 1]")
    out = np.empty_like(x)
    degree = _terminating_degree(a)
    if degree is not None:
        val, _, _, _ = _hyp_direct(a, c, x, ctl.rel_tol, degree + 1, degree=degree)
        return val

    at_one = x == 1.0
    if np.any(at_one):
        out[at_one] = hyp2f1_at_one(a, c)
    lo = (~at_one) & (x <= X_SPLIT)
    if np.any(lo):
        val, n, tail, _ = _hyp_direct(a, c, x[lo], ctl.rel_tol, ctl.max_terms)
        if n >= ctl.max_terms:
            raise SeriesError(f"2F1({a},1;{c};x) did not converge in {ctl.max_terms} terms")
        out[lo] = val
    hi = (~at_one) & (x > X_SPLIT)
    if np.any(hi):
        out[hi] = _hyp_near_one(a, c, x[hi], ctl)
    return out


def _hyp_near_one(a, c, x, ctl):
    nu = c - a - 1.0
    y = 1.0 - x
    c2 = a - c + 2.0  # = 1 - nu
    near_pole = c2 <= 0 and abs(c2 - round(c2)) < 1e-9
    val = None
    if nu > 0 and not near_pole:
        A = float(mpmath.gamma(c) * mpmath.gamma(nu) * mpmath.rgamma(c - a) * mpmath.rgamma(c - 1))
        B = float(mpmath.gamma(c) * mpmath.gamma(-nu) * mpmath.rgamma(a))
        f1, n, _, _ = _hyp_direct(a, c2, y, ctl.rel_tol, ctl.max_terms)
        if n < ctl.max_terms:
            t1 = A * f1
            t2 = B * y**nu * x ** (1.0 - c)
            val = t1 + t2
            scale = np.abs(t1) + np.abs(t2)
            bad = scale * TERM_EPS * 10 > ctl.rel_tol * np.abs(val)
            if not np.any(bad):
                return val
            lost = float(np.max(scale[bad] / np.abs(val[bad])))
    if val is None:
        val = np.empty_like(x)
        bad = np.ones(x.shape, dtype=bool)
        lost = 1e20
    # c - a - 1 at or near an integer: the two branches cancel, so let mpmath
    # resolve the degenerate (logarithmic) case in extended precision.
    dps = _digits_needed(lost, 1.0, ctl.rel_tol)
    with mpmath.workdps(dps):
        for i in np.flatnonzero(bad):
            val[i] = float(mpmath.hyp2f1(a, 1, c, x[i]))
    return val


def hyp2f1_unit_b(a: float, c: float, x: float, ctl: SeriesControl = DEFAULT_CONTROL) -> SeriesResult:
    """2F1(a, 1; c; x) for 0 <= x < 1 as a SeriesResult (x = 1 is allowed too)."""
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x}")
    degree = _terminating_degree(a)
    if degree is not None:
        val, n, _, _ = _hyp_direct(a, c, np.array([x]), ctl.rel_tol, degree + 1, degree=degree)
        return SeriesResult(float(val[0]), n, True, 0.0)
    if x == 1.0:
        return SeriesResult(hyp2f1_at_one(a, c), 0, True, 0.0)
    if x <= X_SPLIT:
        val, n, tail, _ = _hyp_direct(a, c, np.array([x]), ctl.rel_tol, ctl.max_terms)
        conv = n < ctl.max_terms
        if not conv:
            raise SeriesError(f"2F1({a},1;{c};{x}) did not converge in {ctl.max_terms} terms")
        return SeriesResult(float(val[0]), n, True, float(tail[0]))
    val = hyp2f1_unit_b_array(a, c, np.array([x]), ctl)
    return SeriesResult(float(val[0]), 0, True, 0.0)


# --------------------------------------------------------------------------
# Prabhakar (three-parameter Mittag-Leffler) function

Z_WINDOW = 50.0


def _check_prabhakar(alpha, beta, gamma):
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if not (0.0 < gamma <= 1.0):
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")


@np.errstate(over="ignore", invalid="ignore")
def _prabhakar_float(alpha, beta, gamma, z, rel_tol, max_terms):
    """Vectorized double-precision sum.  Returns (value, terms, tail, log_abs_sum)."""
    az = np.abs(z)
    with np.errstate(divide="ignore"):
        logz = np.log(az)
    total = np.zeros_like(z)
    log_abs = np.full(z.shape, -np.inf)
    small = np.zeros(z.shape, dtype=int)
    last = np.zeros_like(z)
    chunk = 64
    lg_g = math.lgamma(gamma)
    for start in range(0, max_terms, chunk):
        n = np.arange(start, min(start + chunk, max_terms), dtype=float)
        logc = gammaln(gamma + n) - lg_g - gammaln(n + 1.0) - gammaln(alpha * n + beta)
        with np.errstate(invalid="ignore"):
            logt = logc[None, :] + np.outer(logz, n)
        logt = np.where(np.isnan(logt), -np.inf, logt)
        if start == 0:
            logt[:, 0] = logc[0]
        log_abs = np.logaddexp(log_abs, logsumexp(logt, axis=1))
        mag = np.exp(logt)
        sign = np.where(n % 2 == 0, 1.0, -1.0)
        terms = mag * sign[None, :]
        for j in range(terms.shape[1]):
            total = total + terms[:, j]
            last = mag[:, j]
            # a term is negligible once it is below the tolerance relative to
            # the running sum, or below what doubles resolve relative to the
            # absolute sum (such points are redone in extended precision)
            tiny = (mag[:, j] <= rel_tol * np.maximum(np.abs(total), _TINY)) | (
                logt[:, j] <= log_abs + _LOG_FLOOR
            )
            small = np.where(tiny, small + 1, 0)
        # decreasing terms and stalled sums everywhere
        grow = mag[:, -1] > mag[:, -2] if mag.shape[1] > 1 else np.zeros(z.shape, dtype=bool)
        if np.all((small >= _STALL) & ~grow):
            return total, int(n[-1]) + 1, last, log_abs
    return total, max_terms, last, log_abs


_MP_COEFFS: dict = {}


def _mp_coeffs(alpha, beta, gamma, dps, count):
    """(gamma)_n / n! / Gamma(alpha n + beta) at ``dps`` digits, cached per parameter set."""
    key = (alpha, beta, gamma, dps)
    coeffs = _MP_COEFFS.setdefault(key, [])
    if len(coeffs) < count:
        with mpmath.workdps(dps):
            a, b, g = mpmath.mpf(alpha), mpmath.mpf(beta), mpmath.mpf(gamma)
            n = len(coeffs)
            binom = mpmath.rf(g, n) / mpmath.factorial(n) if n else mpmath.mpf(1)
            while n < count:
                coeffs.append(binom * mpmath.rgamma(a * n + b))
                binom *= (g + n) / (n + 1)
                n += 1
    return coeffs


def _prabhakar_mp(alpha, beta, gamma, z, rel_tol, max_terms, dps):
    dps = 10 * ((dps + 9) // 10)
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        zp = mpmath.mpf(1)
        total = mpmath.mpf(0)
        abs_sum = mpmath.mpf(0)
        small = 0
        prev = None
        block = 256
        coeffs = []
        for n in range(max_terms):
            if n >= len(coeffs):
                coeffs = _mp_coeffs(alpha, beta, gamma, dps, n + block)
            term = coeffs[n] * zp
            total += term
            mag = abs(term)
            abs_sum += mag
            if mag <= rel_tol * abs(total) and (prev is None or mag <= prev):
                small += 1
                if small >= _STALL:
                    return total, n + 1, mag, abs_sum
            else:
                small = 0
            prev = mag
            zp *= zz
        return total, max_terms, mag, abs_sum


def prabhakar(
    alpha: float, beta: float, gamma: float, z: float, ctl: SeriesControl = DEFAULT_CONTROL
) -> SeriesResult:
    """E^gamma_{alpha,beta}(z) = sum_n (gamma)_n / n! * z^n / Gamma(alpha n + beta), z <= 0."""
    _check_prabhakar(alpha, beta, gamma)
    if not z <= 0:
        raise DomainError(f"prabhakar only handles z <= 0, got {z}")
    if -z > Z_WINDOW:
        raise SeriesError(f"|z| = {-z} exceeds the reliable window |z| <= {Z_WINDOW}")
    val = prabhakar_array(alpha, beta, gamma, np.array([z], dtype=float), ctl)
    return SeriesResult(float(val.value[0]), int(val.terms_used), True, float(val.tail_estimate[0]))


@dataclass(frozen=True)
class _ArrayResult:
    value: np.ndarray
    terms_used: int
    tail_estimate: np.ndarray


def prabhakar_array(alpha, beta, gamma, z, ctl: SeriesControl = DEFAULT_CONTROL) -> _ArrayResult:
    """Vectorized Prabhakar function; points that cancel badly are redone in mpmath."""
    _check_prabhakar(alpha, beta, gamma)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z > 0):
        raise DomainError("prabhakar only handles z <= 0")
    if np.any(-z > Z_WINDOW):
        raise SeriesError(f"|z| exceeds the reliable window |z| <= {Z_WINDOW}")
    val, n, tail, log_abs = _prabhakar_float(alpha, beta, gamma, z, ctl.rel_tol, ctl.max_terms)
    if n >= ctl.max_terms:
        raise SeriesError(f"Prabhakar series did not converge in {ctl.max_terms} terms")
    val = val.copy()
    tail = tail.copy()
    with np.errstate(divide="ignore"):
        lost = (log_abs - np.log(np.abs(val))) / math.log(10.0)
    bad = ~(lost + math.log10(TERM_EPS) <= math.log10(ctl.rel_tol))
    for i in np.flatnonzero(bad):
        # the double-precision value may be pure noise, so start from the
        # size of the largest terms; escalate refines from the true value
        dps = int(math.ceil(log_abs[i] / math.log(10.0) - math.log10(ctl.rel_tol))) + 20

        def run(d, zi=z[i]):
            v, m, t, s = _prabhakar_mp(alpha, beta, gamma, zi, ctl.rel_tol, ctl.max_terms, d)
            if m >= ctl.max_terms:
                raise SeriesError(f"Prabhakar series did not converge at z={zi}")
            return v, s, t, m

        v, _, t, m = escalate(run, dps, ctl.rel_tol)
        val[i] = float(v)
        tail[i] = float(t)
        n = max(n, m)
    return _ArrayResult(val, n, tail)
