import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fou2.kernel import ProcessParams, covariance_series, u_of_beta
from fou2.langevin import build_grunwald
from fou2.pathint import (
    BoundaryData,
    DiscretePath,
    action_cross_term,
    classical_action,
    classical_path,
    classical_path_grid,
    discrete_action,
    discrete_minimizer,
    generating_covariance,
    ou_chaining_gap,
    ou_transition_density,
    partition_function,
    propagator,
    propagator_moments,
    w_kernel,
    w_squared_integral,
)
from fou2.specfun import DomainError

P = ProcessParams(0.8, 0.9, 0.7)


def test_classical_path_pins_and_monotone():
    b = BoundaryData(0.3, 1.3, 1.0)
    t = np.linspace(0, 1, 41)
    x = classical_path(P, b, t)
    assert x[0] == 0.3 and x[-1] == 1.3
    assert np.all(np.diff(x) > 0)
    assert classical_path(P, b, 0.5) == pytest.approx(x[20])


def test_classical_path_ordinary_ou():
    # U(t) on [0, beta] is sinh(lambda t) e^{-lambda beta} / lambda for alpha = gamma = 1
    lam = 1.2
    p = ProcessParams(1.0, 1.0, lam)
    b = BoundaryData(0.0, 2.0, 1.5)
    t = np.linspace(0, 1.5, 7)
    assert np.allclose(classical_path(p, b, t), 2.0 * np.sinh(lam * t) / np.sinh(lam * 1.5), rtol=1e-11)


@pytest.mark.parametrize("params", [(0.8, 0.9, 0.7), (0.9, 0.8, 0.5), (1.0, 1.0, 1.0), (0.7, 0.9, 0.0), (0.75, 1.0, 2.0)])
def test_w_normalization(params):
    p = ProcessParams(*params)
    assert w_squared_integral(p, 1.0) * u_of_beta(p, 1.0) == pytest.approx(1.0, abs=1e-6)


def test_w_kernel_singular_endpoint_rejected():
    with pytest.raises(DomainError):
        w_kernel(P, 1.0, 1.0)
    assert w_kernel(P, 1.0, 0.5) > 0


@given(x0=st.floats(-2, 2), beta=st.floats(0.2, 3.0))
def test_propagator_moments(x0, beta):
    mass, second = propagator_moments(P, x0, beta)
    assert mass == pytest.approx(1.0, abs=1e-8)
    assert second == pytest.approx(u_of_beta(P, beta), abs=1e-8)


def test_propagator_is_gaussian():
    b = BoundaryData(0.0, 0.4, 1.0)
    u = u_of_beta(P, 1.0)
    assert propagator(P, b) == pytest.approx(math.exp(-0.08 / u) / math.sqrt(2 * math.pi * u), rel=1e-14)
    assert classical_action(P, b) == pytest.approx(0.08 / u, rel=1e-14)
    assert partition_function(P, 1.0, 3.0) == pytest.approx(3.0 / math.sqrt(2 * math.pi * u), rel=1e-14)


def test_generating_covariance_matches_series():
    assert generating_covariance(P, 1.5, 0.5) == pytest.approx(covariance_series(P, 1.5, 0.5), rel=1e-8)
    assert generating_covariance(P, 0.5, 1.5) == generating_covariance(P, 1.5, 0.5)
    assert generating_covariance(P, 0.0, 1.5) == 0.0


def test_discrete_action_ordinary_ou():
    p = ProcessParams(1.0, 1.0, 1.0)
    b = BoundaryData(0.3, 1.3, 1.0)
    n = 2048
    op = build_grunwald(p, b.beta / n, n + 1)
    s = discrete_action(p, classical_path_grid(p, b, n), op)
    assert s == pytest.approx(classical_action(p, b), rel=1e-3)


def test_discrete_minimizer_beats_perturbations():
    b = BoundaryData(0.0, 1.0, 1.0)
    n = 256
    op = build_grunwald(P, b.beta / n, n + 1)
    xd = discrete_minimizer(b, op, n)
    assert xd.values[0] == 0.0 and xd.values[-1] == 1.0
    s0 = discrete_action(P, xd, op)
    rng = np.random.default_rng(1)
    for scale in (1e-3, 1e-1, 1.0):
        q = np.zeros(n + 1)
        q[1:-1] = scale * rng.standard_normal(n - 1)
        assert discrete_action(P, DiscretePath(xd.values + q, xd.dt), op) >= s0
        assert abs(action_cross_term(xd, q, op)) <= 1e-8 * (1 + discrete_action(P, DiscretePath(q, xd.dt), op))


def test_discrete_minimizer_tends_to_classical_path():
    b = BoundaryData(0.0, 1.0, 1.0)
    n = 512
    op = build_grunwald(P, b.beta / n, n + 1)
    xd = discrete_minimizer(b, op, n)
    xc = classical_path_grid(P, b, n)
    assert np.max(np.abs(xd.values - xc.values)) < 0.05


def test_grid_mismatch_rejected():
    op = build_grunwald(P, 0.01, 101)
    with pytest.raises(DomainError):
        discrete_action(P, DiscretePath(np.zeros(101), 0.02), op)
    with pytest.raises(DomainError):
        discrete_action(ProcessParams(0.9, 0.9, 0.7), DiscretePath(np.zeros(101), 0.01), op)


def test_ou_chapman_kolmogorov():
    p = ProcessParams(1.0, 1.0, 0.8)
    composed, direct = ou_chaining_gap(p, 0.4, -0.3, 1.2)
    assert composed == pytest.approx(direct, rel=1e-10)


def test_ou_transition_only_for_markov_case():
    with pytest.raises(DomainError):
        ou_transition_density(P, 0.0, 0.1, 0.5)
