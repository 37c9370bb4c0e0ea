import math

import numpy as np
import pytest
from scipy.integrate import quad

from fou2.fpe import (
    DriftSpec,
    Grid1D,
    SolverError,
    analytic_density,
    default_grid,
    diffusion_coeff,
    evolve,
    harmonic_diffusion_coeff,
    solve,
)
from fou2.kernel import ProcessParams, variance_series
from fou2.specfun import DomainError


def test_grid_validation():
    g = Grid1D(-1.0, 1.0, 5, 0.1, 1.0)
    assert g.dx == 0.5
    assert np.allclose(g.x, [-1, -0.5, 0, 0.5, 1])
    with pytest.raises(DomainError):
        Grid1D(1.0, -1.0, 5, 0.1, 1.0)


def test_drift_validation():
    with pytest.raises(DomainError):
        DriftSpec("quadratic")
    with pytest.raises(DomainError):
        DriftSpec.harmonic(0.0)


def test_analytic_density_normalized():
    p = ProcessParams(0.8, 0.9, 0.7)
    x = np.linspace(-10, 10, 4001)
    dens = analytic_density(p, 1.0, 0.0, x)
    assert np.trapezoid(dens, x) == pytest.approx(1.0, abs=1e-12)
    assert np.trapezoid(x * x * dens, x) == pytest.approx(variance_series(p, 1.0), rel=1e-10)


@pytest.mark.parametrize("params", [(1.0, 1.0, 1.0), (0.8, 0.9, 0.7)])
def test_free_case_tracks_gaussian(params):
    p = ProcessParams(*params)
    grid = default_grid(p, DriftSpec.free(), 0.0, 0.01, 1.0)
    rep = solve(p, grid, DriftSpec.free(), 0.0, snapshot_times=(0.5, 1.0))
    for snap in rep.snapshots:
        ref = analytic_density(p, snap.t, 0.0, snap.x)
        assert np.sum(np.abs(snap.values - ref)) * snap.dx <= 1e-3
        assert snap.mass() == pytest.approx(1.0, abs=1e-6)
    assert rep.max_mass_drift <= 1e-6
    assert rep.boundary_leakage < 1e-10


def test_linear_drift_moves_mean():
    p = ProcessParams(0.8, 0.9, 0.7)
    drift = DriftSpec.linear(0.6)
    grid = default_grid(p, drift, 0.2, 0.01, 1.0)
    field = evolve(p, grid, drift, 0.2)
    mean, var = field.moments()
    assert mean == pytest.approx(0.2 + 0.6 * 0.99, abs=grid.dx)
    assert var == pytest.approx(variance_series(p, 1.0), rel=1e-3)


def test_harmonic_brownian_limit_reaches_stationary_variance():
    p = ProcessParams(1.0, 1.0, 0.0)
    drift = DriftSpec.harmonic(1.0)
    grid = default_grid(p, drift, 0.0, 0.01, 5.0)
    _, var = evolve(p, grid, drift, 0.0).moments()
    assert var == pytest.approx(0.5, rel=1e-2)


def test_harmonic_coefficient_markov_case():
    # alpha = gamma = 1 has white driving noise, so D_h = D = 1/2 exactly
    p = ProcessParams(1.0, 1.0, 0.0)
    assert harmonic_diffusion_coeff(p, 1.0, 1.0) == pytest.approx(0.5, rel=1e-6)


def test_harmonic_coefficient_weak_force_limit():
    p = ProcessParams(0.9, 0.9, 0.3)
    d = diffusion_coeff(p, 1.0)
    dh = harmonic_diffusion_coeff(p, 1e-4, 1.0)
    assert dh == pytest.approx(d, rel=1e-3)


def test_harmonic_coefficient_ordinary_ou():
    # for alpha = gamma = 1, d1C(t, tau) = -lambda C(t, tau), so
    # D_h = D(t) + omega lambda int_0^t C(t, tau) e^{-omega (t - tau)} d tau
    lam, omega, t = 1.0, 0.5, 1.0
    p = ProcessParams(1.0, 1.0, lam)

    def cov(tau):
        return math.exp(-lam * (t - tau)) * (1 - math.exp(-2 * lam * tau)) / (2 * lam)

    inner, _ = quad(lambda tau: cov(tau) * math.exp(-omega * (t - tau)), 0, t, epsabs=1e-14)
    exact = 0.5 * math.exp(-2 * lam * t) + omega * lam * inner
    assert harmonic_diffusion_coeff(p, omega, t) == pytest.approx(exact, rel=1e-12)


def test_harmonic_coefficient_converged_in_nodes():
    p = ProcessParams(0.8, 0.9, 0.7)
    a = harmonic_diffusion_coeff(p, 0.5, 1.0, n_nodes=16)
    b = harmonic_diffusion_coeff(p, 0.5, 1.0, n_nodes=32)
    assert a == pytest.approx(b, rel=1e-11)


def test_coarse_grid_is_rejected():
    p = ProcessParams(0.8, 0.9, 0.7)
    grid = Grid1D(-50.0, 50.0, 41, 0.01, 1.0)
    with pytest.raises(SolverError):
        solve(p, grid, DriftSpec.free(), 0.0)


def test_step_budget_exhaustion_is_reported():
    p = ProcessParams(0.8, 0.9, 0.7)
    grid = default_grid(p, DriftSpec.free(), 0.0, 0.01, 1.0, n_t=2)
    with pytest.raises(SolverError, match="step controller"):
        solve(p, grid, DriftSpec.free(), 0.0, tol=1e-12)


def test_narrow_domain_loses_mass():
    p = ProcessParams(1.0, 1.0, 1.0)
    grid = Grid1D(-0.6, 0.6, 201, 0.01, 1.0)
    with pytest.raises(SolverError, match="mass"):
        solve(p, grid, DriftSpec.free(), 0.0)


def test_snapshot_times_validated():
    p = ProcessParams(1.0, 1.0, 1.0)
    grid = default_grid(p, DriftSpec.free(), 0.0, 0.01, 1.0)
    with pytest.raises(DomainError):
        solve(p, grid, DriftSpec.free(), 0.0, snapshot_times=(2.0,))
