"""Effective Fokker-Planck equation for the one-time density.

The density of x(t) obeys dP/dt = D(t) d2P/dx2 with D = (1/2) d sigma^2/dt.
A linear force adds -g dP/dx; a harmonic force adds omega d(xP)/dx and
replaces D by a kernel-weighted integral of the noise covariance.  The
evolver is Crank-Nicolson with step-doubling error control and zero
Dirichlet boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from .kernel import ProcessParams, diffusion_rate, green_g_array, variance_series
from .quadrature import graded_rule
from .specfun import DEFAULT_CONTROL, DomainError, SeriesControl


class SolverError(RuntimeError):
    """The step controller or a conservation guard failed."""


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_x: int
    t0: float
    t1: float
    n_t: int = 200

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise DomainError("x_min must be below x_max")
        if self.n_x < 3:
            raise DomainError("n_x must be at least 3")
        if not self.t0 > 0:
            raise DomainError("t0 must be positive: D(t) is singular at t = 0 when alpha*gamma < 1")
        if not self.t1 > self.t0:
            raise DomainError("t1 must exceed t0")
        if self.n_t < 1:
            raise DomainError("n_t must be at least 1")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)


@dataclass
class DensityField:
    values: np.ndarray
    t: float
    x: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def mass(self) -> float:
        return float(np.trapezoid(self.values, dx=self.dx))

    def moments(self) -> tuple[float, float]:
        """(mean, variance) of the normalized density."""
        m0 = self.mass()
        mean = float(np.trapezoid(self.x * self.values, dx=self.dx)) / m0
        var = float(np.trapezoid((self.x - mean) ** 2 * self.values, dx=self.dx)) / m0
        return mean, var


@dataclass(frozen=True)
class DriftSpec:
    """Force field: free (V = const), linear (V = g x) or harmonic (V = omega x^2 / 2)."""

    kind: str = "free"
    g: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in ("free", "linear", "harmonic"):
            raise DomainError(f"unknown drift kind {self.kind!r}")
        if self.kind == "harmonic" and not self.omega > 0:
            raise DomainError("harmonic drift needs omega > 0")
        if not (math.isfinite(self.g) and math.isfinite(self.omega)):
            raise DomainError("drift parameters must be finite")

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def linear(cls, g: float):
        return cls("linear", g=g)

    @classmethod
    def harmonic(cls, omega: float):
        return cls("harmonic", omega=omega)


def diffusion_coeff(p: ProcessParams, t: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """D(t) = (1/2) sum_q (-lambda^alpha)^q Lambda_q t^{alpha(2gamma+q)-2}."""
    return diffusion_rate(p, t, ctl)


def analytic_density(p: ProcessParams, t: float, x0: float, x, ctl: SeriesControl = DEFAULT_CONTROL):
    """Gaussian centred on x0 with variance sigma^2(t); solves the force-free equation."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    var = variance_series(p, t, ctl)
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * (x - x0) ** 2 / var) / math.sqrt(2.0 * math.pi * var)


# --------------------------------------------------------------------------
# Harmonic case


def _relaxed_kernel(p: ProcessParams, omega: float, r: np.ndarray, n_nodes: int, ctl: SeriesControl) -> np.ndarray:
    """H(r) = int_0^r G(w) e^{-omega (r - w)} dw for each r, graded toward w = 0."""
    w, wt = graded_rule(1.0, p.order - 1.0, n_nodes)
    # scaling the unit rule to (0, r] maps nodes to r w and weights to r wt
    nodes = np.outer(r, w)
    g = green_g_array(p, nodes.ravel(), ctl).reshape(nodes.shape)
    return r * ((g * np.exp(-omega * (r[:, None] - nodes))) @ wt)


def harmonic_diffusion_coeff(
    p: ProcessParams,
    omega: float,
    t: float,
    n_nodes: int = 24,
    ctl: SeriesControl = DEFAULT_CONTROL,
) -> float:
    """D_h(t) = int_0^t C_zeta(t, tau) e^{-omega (t - tau)} d tau.

    C_zeta is the covariance of the noise driving x, i.e. the mixed derivative
    of C(u, v), which is singular on the diagonal.  Integrating by parts twice
    with x(t) = int G(t - u) dB(u) leaves only G and the relaxed kernel
    H(r) = int_0^r G(w) e^{-omega (r - w)} dw:

        D_h(t) = G(t)^2 / 2 - omega G(t) H(t) + omega sigma^2(t) - omega^2 int_0^t G H dr.

    The first term is D(t); for alpha = gamma = 1, lambda = 0 the rest cancels
    and D_h = 1/2.  All integrals are graded Gauss rules on the series G.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    r, w = graded_rule(t, 2.0 * p.order - 2.0, n_nodes)
    g = green_g_array(p, r, ctl)
    h = _relaxed_kernel(p, omega, r, n_nodes, ctl)
    g_t = float(green_g_array(p, [t], ctl)[0])
    h_t = float(_relaxed_kernel(p, omega, np.array([t]), n_nodes, ctl)[0])
    var = float(np.dot(w, g * g))
    cross = float(np.dot(w, g * h))
    val = 0.5 * g_t * g_t - omega * g_t * h_t + omega * var - omega * omega * cross
    if not math.isfinite(val):
        raise SolverError(f"non-finite harmonic diffusion coefficient at t={t}")
    return val


# --------------------------------------------------------------------------
# Evolution


@dataclass
class FPEReport:
    final: DensityField
    snapshots: list = field(default_factory=list)
    steps_accepted: int = 0
    steps_rejected: int = 0
    max_mass_drift: float = 0.0
    min_before_clip: float = 0.0
    clipped: int = 0
    boundary_leakage: float = 0.0


def default_grid(
    p: ProcessParams,
    drift: DriftSpec,
    x0: float,
    t0: float,
    t1: float,
    n_x: int = 801,
    n_t: int = 200,
    width: float = 8.0,
    ctl: SeriesControl = DEFAULT_CONTROL,
) -> Grid1D:
    """Grid reaching `width` standard deviations of sigma(t1) past the drifted mean."""
    sigma = math.sqrt(variance_series(p, t1, ctl))
    if drift.kind == "harmonic":
        # stationary spread is at most the free one for the cases used here
        sigma = max(sigma, math.sqrt(0.5 / drift.omega))
    lo = hi = x0
    if drift.kind == "linear":
        end = x0 + drift.g * (t1 - t0)
        lo, hi = min(x0, end), max(x0, end)
    return Grid1D(lo - width * sigma, hi + width * sigma, n_x, t0, t1, n_t)


def _operator_bands(grid: Grid1D, drift: DriftSpec, diff: float) -> np.ndarray:
    """Tridiagonal operator on interior nodes in solve_banded layout (rows: upper, diag, lower)."""
    dx = grid.dx
    x = grid.x[1:-1]
    n = x.size
    upper = np.full(n, diff / dx**2)
    lower = np.full(n, diff / dx**2)
    diag = np.full(n, -2.0 * diff / dx**2)
    if drift.kind == "linear":
        # -g dP/dx
        upper -= drift.g / (2.0 * dx)
        lower += drift.g / (2.0 * dx)
    elif drift.kind == "harmonic":
        # omega d(xP)/dx acting on neighbours x_{i+1} P_{i+1}, x_{i-1} P_{i-1}
        upper += drift.omega * (x + dx) / (2.0 * dx)
        lower -= drift.omega * (x - dx) / (2.0 * dx)
    bands = np.zeros((3, n))
    bands[0, 1:] = upper[:-1]
    bands[1] = diag
    bands[2, :-1] = lower[1:]
    return bands


def _apply_bands(bands: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = bands[1] * v
    out[:-1] += bands[0, 1:] * v[1:]
    out[1:] += bands[2, :-1] * v[:-1]
    return out


def _cn_step(grid, drift, diff, dt, interior):
    a = _operator_bands(grid, drift, diff)
    rhs = interior + 0.5 * dt * _apply_bands(a, interior)
    lhs = -0.5 * dt * a
    lhs[1] += 1.0
    return solve_banded((1, 1), lhs, rhs)


class _Coefficient:
    """D(t) for the free and linear cases, a PCHIP table of D_h(t) for the harmonic case."""

    def __init__(self, p, drift, grid, ctl, n_table=33):
        self.p, self.ctl = p, ctl
        self.table = None
        if drift.kind == "harmonic":
            ts = np.geomspace(grid.t0, grid.t1, n_table)
            vals = np.array([harmonic_diffusion_coeff(p, drift.omega, t, ctl=ctl) for t in ts])
            self.table = PchipInterpolator(np.log(ts), vals)

    def __call__(self, t):
        if self.table is not None:
            return float(self.table(math.log(t)))
        return diffusion_rate(self.p, t, self.ctl)


def solve(
    p: ProcessParams,
    grid: Grid1D,
    drift: DriftSpec,
    x0: float,
    snapshot_times=(),
    tol: float = 1e-6,
    ctl: SeriesControl = DEFAULT_CONTROL,
) -> FPEReport:
    """Evolve from the Gaussian with variance sigma^2(t0) at t0 to t1.

    Snapshots are taken at the requested times (each in (t0, t1]) by landing
    steps exactly on them.  The local error per step is the max-norm gap
    between one step and two half steps, relative to max P.
    """
    snaps = sorted(float(s) for s in snapshot_times)
    if any(not grid.t0 < s <= grid.t1 for s in snaps):
        raise DomainError("snapshot times must lie in (t0, t1]")
    x = grid.x
    dx = grid.dx
    var0 = variance_series(p, grid.t0, ctl)
    if var0 < (2.0 * dx) ** 2:
        raise SolverError(f"initial width sqrt({var0:.3g}) is under two grid spacings; refine n_x or raise t0")
    values = np.exp(-0.5 * (x - x0) ** 2 / var0) / math.sqrt(2.0 * math.pi * var0)
    values[0] = values[-1] = 0.0
    mass0 = float(np.trapezoid(values, dx=dx))
    coeff = _Coefficient(p, drift, grid, ctl)
    report = FPEReport(final=None)
    t = grid.t0
    dt = (grid.t1 - grid.t0) / grid.n_t
    # shrink the first step: D(t) can vary like t^{2 alpha gamma - 2} near t0
    dt = min(dt, 0.05 * grid.t0)
    budget = 16 * grid.n_t
    interior = values[1:-1].copy()
    targets = snaps + ([grid.t1] if not snaps or snaps[-1] < grid.t1 else [])
    for target in targets:
        while t < target * (1.0 - 1e-14):
            if report.steps_accepted + report.steps_rejected >= budget:
                raise SolverError(
                    f"step controller exceeded {budget} steps before t={target} (reached t={t:.6g})"
                )
            step = min(dt, target - t)
            full = _cn_step(grid, drift, coeff(t + 0.5 * step), step, interior)
            half = _cn_step(grid, drift, coeff(t + 0.25 * step), 0.5 * step, interior)
            half = _cn_step(grid, drift, coeff(t + 0.75 * step), 0.5 * step, half)
            err = float(np.max(np.abs(full - half))) / max(float(np.max(np.abs(half))), 1e-300)
            if err > tol:
                report.steps_rejected += 1
                dt = step * max(0.2, 0.9 * (tol / err) ** (1.0 / 3.0))
                continue
            report.steps_accepted += 1
            t += step
            interior = half
            lowest = float(interior.min())
            report.min_before_clip = min(report.min_before_clip, lowest)
            if lowest < -1e-12 * float(interior.max()):
                neg = interior < 0
                report.clipped += int(neg.sum())
                interior[neg] = 0.0
            mass = float(np.sum(interior) * dx)
            drift_now = abs(mass - mass0)
            report.max_mass_drift = max(report.max_mass_drift, drift_now)
            if drift_now > 1e-6:
                raise SolverError(f"mass drifted by {drift_now:.3e} at t={t:.6g}; widen the domain")
            if err > 0:
                dt = step * min(2.0, max(0.2, 0.9 * (tol / err) ** (1.0 / 3.0)))
            else:
                dt = 2.0 * step
        full_vals = np.concatenate([[0.0], interior, [0.0]])
        snap = DensityField(full_vals, t, x)
        if target in snaps:
            report.snapshots.append(snap)
        report.final = snap
    edge = max(5, grid.n_x // 100)
    report.boundary_leakage = float((np.sum(report.final.values[:edge]) + np.sum(report.final.values[-edge:])) * dx)
    return report


def evolve(
    p: ProcessParams,
    grid: Grid1D,
    drift: DriftSpec,
    x0: float,
    tol: float = 1e-6,
    ctl: SeriesControl = DEFAULT_CONTROL,
) -> DensityField:
    """P(., t1) starting from the analytic Gaussian at t0."""
    return solve(p, grid, drift, x0, (), tol, ctl).final
