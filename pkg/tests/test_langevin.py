import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fou2.kernel import ProcessParams, variance_series
from fou2.langevin import (
    BLOCK_PATHS,
    CapacityError,
    GrunwaldTruncationError,
    build_grunwald,
    build_kernel_table,
    fractional_integral,
    gl_weights,
    grunwald_apply,
    path_noise,
    read_ensemble,
    residual_autocorrelation,
    sample_covariance,
    simulate,
    write_ensemble,
    write_ensemble_csv,
)
from fou2.specfun import DomainError

P = ProcessParams(0.8, 0.9, 0.7)


def test_cell_rms_reproduces_variance_exactly():
    table = build_kernel_table(P, 1e-2, 300, "cell-rms")
    cum = table.dt * np.cumsum(table.weights**2)
    for n in (1, 10, 300):
        assert cum[n - 1] == pytest.approx(variance_series(P, n * table.dt), rel=1e-10)


def test_cell_integrated_ordinary_ou():
    lam, dt = 1.5, 0.05
    table = build_kernel_table(ProcessParams(1.0, 1.0, lam), dt, 40, "cell-integrated")
    k = np.arange(40)
    exact = (np.exp(-lam * k * dt) - np.exp(-lam * (k + 1) * dt)) / (lam * dt)
    assert np.allclose(table.weights, exact, rtol=1e-12)


def test_midpoint_samples_kernel():
    table = build_kernel_table(ProcessParams(1.0, 1.0, 2.0), 0.1, 5, "midpoint")
    assert np.allclose(table.weights, np.exp(-2.0 * (np.arange(5) + 0.5) * 0.1), rtol=1e-13)


def test_unknown_scheme():
    with pytest.raises(DomainError):
        build_kernel_table(P, 0.1, 5, "euler")


def test_paths_start_at_zero_and_have_right_shape():
    ens = simulate(P, 0.01, 50, 7, seed=3)
    assert ens.paths.shape == (7, 51)
    assert np.all(ens.paths[:, 0] == 0.0)
    assert ens.times[-1] == pytest.approx(0.5)


def test_paths_do_not_depend_on_batching():
    big = simulate(P, 0.01, 40, BLOCK_PATHS + 20, seed=11)
    small = simulate(P, 0.01, 40, 5, seed=11)
    assert np.array_equal(big.paths[:5], small.paths)


@given(seed=st.integers(0, 2**64 - 1), index=st.integers(0, 10**6))
def test_path_noise_is_reproducible(seed, index):
    assert np.array_equal(path_noise(seed, index, 8), path_noise(seed, index, 8))


def test_threads_do_not_change_numbers():
    one = simulate(P, 0.01, 60, 700, seed=5, threads=1)
    for threads in (3, 8):
        assert np.array_equal(one.paths, simulate(P, 0.01, 60, 700, seed=5, threads=threads).paths)


def test_fft_path_matches_direct(monkeypatch):
    import fou2.langevin as lg

    direct = simulate(P, 1e-3, 300, 4, seed=2)
    monkeypatch.setattr(lg, "DIRECT_MAX_STEPS", 10)
    fft = simulate(P, 1e-3, 300, 4, seed=2)
    assert np.allclose(direct.paths, fft.paths, rtol=1e-10, atol=1e-12)


def test_capacity_cap(monkeypatch):
    monkeypatch.setenv("FOU2_MAX_CELLS", "1000")
    with pytest.raises(CapacityError):
        simulate(P, 0.01, 100, 11, seed=0)
    monkeypatch.setenv("FOU2_MAX_CELLS", "lots")
    with pytest.raises(CapacityError):
        simulate(P, 0.01, 10, 1, seed=0)


def test_sample_variance_close_to_analytic():
    ens = simulate(P, 0.01, 100, 4000, seed=123, scheme="cell-rms")
    var, se = sample_covariance(ens, 100, 100)
    assert abs(var - variance_series(P, 1.0)) < 4 * se


def test_sample_covariance_standard_error():
    ens = simulate(P, 0.01, 20, 500, seed=9)
    _, se = sample_covariance(ens, 20, 10)
    prod = ens.paths[:, 20] * ens.paths[:, 10]
    assert se == pytest.approx(np.std(prod, ddof=1) / math.sqrt(500), rel=1e-10)


def test_gl_weights_special_orders():
    assert np.allclose(gl_weights(1.0, 5), [1, -1, 0, 0, 0])
    assert np.allclose(gl_weights(0.0, 4), [1, 0, 0, 0])
    assert np.allclose(gl_weights(-1.0, 4), [1, 1, 1, 1])


@given(order=st.floats(0.05, 1.0), n=st.integers(2, 300))
def test_gl_partial_sums_positive_and_decreasing(order, n):
    s = np.cumsum(gl_weights(order, n))
    assert np.all(s > -1e-15)
    assert np.all(np.diff(s) <= 1e-15)


def test_grunwald_first_order_is_backward_difference():
    lam, dt = 0.7, 0.01
    op = build_grunwald(ProcessParams(1.0, 1.0, lam), dt, 101)
    t = np.arange(101) * dt
    y = grunwald_apply(op, t)
    assert np.allclose(y[1:], 1.0 + lam * t[1:], rtol=1e-12)


def test_grunwald_power_law_converges():
    # D^a t^b = Gamma(b+1)/Gamma(b+1-a) t^{b-a}; first-order scheme
    p = ProcessParams(0.8, 1.0, 0.0)
    b = 1.5
    errs = []
    for n in (200, 400, 800):
        dt = 1.0 / n
        op = build_grunwald(p, dt, n + 1)
        y = grunwald_apply(op, (np.arange(n + 1) * dt) ** b)
        exact = math.gamma(b + 1) / math.gamma(b + 1 - 0.8)
        errs.append(abs(y[-1] - exact))
    assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.05)
    assert errs[2] / errs[1] == pytest.approx(0.5, abs=0.05)


def test_grunwald_truncation_checked():
    p = ProcessParams(0.8, 0.9, 3.0)
    op = build_grunwald(p, 0.01, 101)
    assert op.j_max > 1
    with pytest.raises(GrunwaldTruncationError):
        build_grunwald(p, 0.01, 101, j_max=1)
    # a long horizon needs more binomial terms than the cap allows
    with pytest.raises(GrunwaldTruncationError):
        build_grunwald(p, 0.01, 501)


def test_grunwald_inverts_simulation_for_ordinary_ou():
    # for alpha = gamma = 1 the cell-integrated kernel makes K x equal the noise
    # up to O(dt) on each step
    p = ProcessParams(1.0, 1.0, 1.0)
    dt, n = 1e-3, 400
    ens = simulate(p, dt, n, 3, seed=4, scheme="cell-integrated")
    op = build_grunwald(p, dt, n + 1)
    r = grunwald_apply(op, ens.paths)[:, 1:] * math.sqrt(dt)
    xi = np.array([path_noise(4, i, n) for i in range(3)])
    assert np.max(np.abs(r - xi)) < 0.05


def test_grunwald_requires_zero_start():
    op = build_grunwald(P, 0.01, 10)
    with pytest.raises(DomainError):
        grunwald_apply(op, np.ones(10))


def test_residual_autocorrelation_white_noise():
    x = np.random.default_rng(0).standard_normal((50, 400))
    rho = residual_autocorrelation(x, 5)
    assert np.all(np.abs(rho) < 3 / math.sqrt(x.size))


@given(alpha=st.floats(0.1, 1.0), n=st.integers(2, 200))
def test_fractional_integral_of_constant_is_exact(alpha, n):
    dt = 1.0 / n
    y = fractional_integral(alpha, np.ones(n + 1), dt)
    t = np.arange(n + 1) * dt
    assert np.allclose(y, t**alpha / math.gamma(alpha + 1), rtol=1e-10, atol=1e-14)


def test_ensemble_round_trip(tmp_path):
    ens = simulate(P, 0.02, 30, 9, seed=77)
    path = tmp_path / "e.bin"
    write_ensemble(path, ens, {"note": "x"})
    back, cfg = read_ensemble(path)
    assert np.array_equal(back.paths, ens.paths)
    assert (back.dt, back.seed, back.p, back.scheme) == (ens.dt, ens.seed, ens.p, ens.scheme)
    assert cfg == {"note": "x"}
    raw = path.read_bytes()
    (tmp_path / "bad.bin").write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(ValueError):
        read_ensemble(tmp_path / "bad.bin")


def test_ensemble_csv(tmp_path):
    ens = simulate(P, 0.1, 3, 2, seed=1)
    write_ensemble_csv(tmp_path / "e.csv", ens, "hello")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "# hello"
    assert lines[1] == "t,path0,path1"
    assert len(lines) == 2 + 4
    assert float(lines[-1].split(",")[1]) == ens.paths[0, -1]
