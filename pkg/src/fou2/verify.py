"""Self-verification checks run by ``fou2 verify``.

Each check compares one quantity against an independent route or a closed
form and returns a CheckResult.  The quick tier keeps grids small; the full
tier adds the Monte Carlo and fractional-parameter checks at desk scale.
"""
from __future__ import annotations

import math
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .fpe import DriftSpec, analytic_density, default_grid, solve
from .kernel import (
    ProcessParams,
    covariance_quadrature,
    covariance_series,
    u_of_beta,
    variance_quadrature,
    variance_series,
)
from .langevin import (
    bartlett_band,
    build_grunwald,
    build_kernel_table,
    grunwald_apply,
    residual_autocorrelation,
    simulate,
    simulate_blocks,
    write_ensemble,
)
from .pathint import (
    BoundaryData,
    action_cross_term,
    classical_action,
    classical_path_grid,
    discrete_action,
    discrete_minimizer,
    propagator_moments,
    w_squared_integral,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    expected: str
    seconds: float = 0.0


def _rel(a, b):
    return abs(a - b) / abs(b)


def ou_reduction(tier):
    worst = 0.0
    lams = (0.5, 1.0, 2.0) if tier == "full" else (1.0,)
    grid = np.linspace(0.25, 5.0, 6 if tier == "full" else 3)
    for lam in lams:
        p = ProcessParams(1.0, 1.0, lam)
        for t in grid:
            for s in grid[grid <= t]:
                exact = math.exp(-lam * (t - s)) * (1.0 - math.exp(-2.0 * lam * s)) / (2.0 * lam)
                worst = max(worst, _rel(covariance_series(p, t, s), exact))
    return worst, worst <= 1e-8, "<= 1e-8"


def _grid(tier):
    if tier == "full":
        return [(a, g, lam) for a in (0.8, 0.9, 1.0) for g in (0.8, 0.9, 1.0) for lam in (0.3, 0.7, 1.2)]
    return [(0.8, 0.9, 0.7), (0.9, 0.8, 0.5), (1.0, 1.0, 1.0)]


def variance_identity(tier):
    worst = 0.0
    for a, g, lam in _grid(tier):
        p = ProcessParams(a, g, lam)
        worst = max(worst, _rel(u_of_beta(p, 1.0), variance_series(p, 1.0)))
    return worst, worst <= 1e-12, "<= 1e-12"


def route_agreement(tier):
    worst = 0.0
    for a, g, lam in _grid(tier):
        p = ProcessParams(a, g, lam)
        worst = max(worst, _rel(variance_quadrature(p, 1.0), variance_series(p, 1.0)))
        worst = max(worst, _rel(covariance_quadrature(p, 1.5, 0.5), covariance_series(p, 1.5, 0.5)))
    return worst, worst <= 1e-6, "<= 1e-6"


def w_normalization(tier):
    sets = [(0.8, 0.9, 0.7), (0.9, 0.8, 0.5), (1.0, 1.0, 1.0), (0.7, 0.9, 0.0), (0.75, 1.0, 2.0)]
    worst = max(abs(w_squared_integral(ProcessParams(*s), 1.0) * u_of_beta(ProcessParams(*s), 1.0) - 1.0) for s in sets)
    return worst, worst <= 1e-6, "|int W^2 U - 1| <= 1e-6"


def propagator_normalization(tier):
    p = ProcessParams(0.8, 0.9, 0.7)
    mass, second = propagator_moments(p, 0.3, 1.0)
    err = max(abs(mass - 1.0), abs(second - u_of_beta(p, 1.0)))
    return err, err <= 1e-8, "<= 1e-8"


def fpe_free(tier):
    sets = [(1.0, 1.0, 1.0), (0.8, 0.9, 0.7)] if tier == "full" else [(1.0, 1.0, 1.0)]
    worst = 0.0
    for s in sets:
        p = ProcessParams(*s)
        grid = default_grid(p, DriftSpec.free(), 0.0, 0.01, 1.0)
        rep = solve(p, grid, DriftSpec.free(), 0.0)
        l1 = float(np.sum(np.abs(rep.final.values - analytic_density(p, 1.0, 0.0, grid.x))) * grid.dx)
        worst = max(worst, l1)
    return worst, worst <= 1e-3, "L1 <= 1e-3"


def fbm_slope(tier):
    p = ProcessParams(0.8, 0.9, 0.0)
    t = np.geomspace(0.1, 10.0, 9)
    v = [variance_series(p, x) for x in t]
    slope = float(np.polyfit(np.log(t), np.log(v), 1)[0])
    err = abs(slope - (2 * p.order - 1))
    return err, err <= 1e-3, "|slope - (2 alpha gamma - 1)| <= 1e-3"


def ou_action(tier):
    p = ProcessParams(1.0, 1.0, 1.0)
    b = BoundaryData(0.3, 1.3, 1.0)
    n = 2048 if tier == "full" else 512
    op = build_grunwald(p, b.beta / n, n + 1)
    err = _rel(discrete_action(p, classical_path_grid(p, b, n), op), classical_action(p, b))
    tol = 1e-3 if n == 2048 else 4e-3
    return err, err <= tol, f"<= {tol:g} at n={n}"


def cross_term(tier):
    p = ProcessParams(0.8, 0.9, 0.7)
    b = BoundaryData(0.0, 1.0, 1.0)
    n = 512
    op = build_grunwald(p, b.beta / n, n + 1)
    xd = discrete_minimizer(b, op, n)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        q = np.concatenate([[0.0], rng.standard_normal(n - 1), [0.0]])
        sq = discrete_action(p, type(xd)(q, xd.dt), op)
        worst = max(worst, abs(action_cross_term(xd, q, op)) / (1.0 + sq))
    return worst, worst <= 1e-8, "<= 1e-8 (1 + S[q])"


def monte_carlo(tier):
    """Variance at beta with the exact-variance cell-rms kernel."""
    p = ProcessParams(0.8, 0.9, 0.7)
    n_paths = 100_000 if tier == "full" else 4_000
    table = build_kernel_table(p, 1e-3, 1000, "cell-rms")
    acc = acc4 = 0.0
    for _, block in simulate_blocks(table, n_paths, 20240501):
        x = block[:, -1]
        acc += float(np.sum(x * x))
        acc4 += float(np.sum(x**4))
    var = acc / n_paths
    se = math.sqrt((acc4 / n_paths - var * var) / n_paths)
    z = (var - u_of_beta(p, 1.0)) / se
    return abs(z), abs(z) <= 3.0, "|z| <= 3"


def residual_whiteness(tier):
    """Lags 1..10 of the Grunwald residual of default-scheme paths inside the 99% band."""
    p = ProcessParams(0.8, 0.9, 0.7)
    n = 1000
    ens = simulate(p, 1e-3, n, 4_000 if tier == "full" else 500, 20240502)
    residuals = grunwald_apply(build_grunwald(p, 1e-3, n + 1), ens.paths)[:, 1:]
    rho = residual_autocorrelation(residuals, 10)
    worst = float(np.max(np.abs(rho)))
    band = bartlett_band(n)
    return worst, worst <= band, f"max |rho| <= {band:.3f}"


def determinism(tier):
    p = ProcessParams(0.8, 0.9, 0.7)
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for threads in (1, 4):
            ens = simulate(p, 1e-2, 100, 600, 99, threads=threads)
            path = os.path.join(tmp, f"e{threads}.bin")
            write_ensemble(path, ens, {"seed": 99})
            with open(path, "rb") as fh:
                blobs.append(fh.read())
    same = float(blobs[0] == blobs[1])
    return same, bool(same), "byte-identical across 1 and 4 threads"


QUICK = [
    ("ordinary OU covariance reduction", ou_reduction),
    ("U(beta) equals sigma^2(beta)", variance_identity),
    ("series vs quadrature routes", route_agreement),
    ("W kernel normalization", w_normalization),
    ("propagator moments", propagator_normalization),
    ("free FPE vs Gaussian", fpe_free),
    ("fBm-limit variance slope", fbm_slope),
    ("classical action (OU)", ou_action),
    ("action cross-term cancellation", cross_term),
    ("ensemble determinism", determinism),
]
FULL = QUICK + [("Monte Carlo variance at beta", monte_carlo), ("residual whiteness", residual_whiteness)]


def run(tier: str = "quick"):
    if tier not in ("quick", "full"):
        raise ValueError(f"unknown tier {tier!r}")
    results = []
    for name, fn in QUICK if tier == "quick" else FULL:
        start = time.perf_counter()
        measured, ok, expected = fn(tier)
        results.append(CheckResult(name, bool(ok), float(measured), expected, time.perf_counter() - start))
    return results
