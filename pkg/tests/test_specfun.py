import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fou2.specfun import (
    DomainError,
    SeriesControl,
    SeriesError,
    gen_binom,
    gen_binom_array,
    hyp2f1_at_one,
    hyp2f1_unit_b,
    hyp2f1_unit_b_array,
    ln_gamma,
    prabhakar,
    prabhakar_array,
)


def test_prabhakar_matches_oracle(oracles):
    for row in oracles["prabhakar"]:
        got = prabhakar(row["alpha"], row["beta"], row["gamma"], row["z"]).value
        assert got == pytest.approx(row["value"], rel=1e-12, abs=1e-300), row


def test_prabhakar_array_agrees_with_scalar():
    z = np.array([0.0, -0.5, -4.0, -20.0, -49.0])
    arr = prabhakar_array(0.6, 0.6, 1.0, z).value
    for zi, v in zip(z, arr):
        assert v == prabhakar(0.6, 0.6, 1.0, zi).value


def test_prabhakar_exponential_case():
    # alpha = beta = gamma = 1 is exp(z)
    for z in (-0.1, -3.0, -30.0):
        assert prabhakar(1.0, 1.0, 1.0, z).value == pytest.approx(math.exp(z), rel=1e-12)


def test_prabhakar_large_argument_needs_extended_precision():
    # the double-precision partial sums at z = -49 are dominated by round-off
    with mpmath.workdps(120):
        z = mpmath.mpf(-49)
        exact = float(mpmath.nsum(lambda n: z**n * mpmath.rgamma(mpmath.mpf("0.6") * n + mpmath.mpf("0.6")), [0, mpmath.inf]))
    assert prabhakar(0.6, 0.6, 1.0, -49.0).value == pytest.approx(exact, rel=1e-11)


def test_prabhakar_window_and_domain():
    with pytest.raises(SeriesError):
        prabhakar(0.8, 0.72, 0.9, -51.0)
    with pytest.raises(DomainError):
        prabhakar(0.8, 0.72, 0.9, 0.5)
    with pytest.raises(DomainError):
        prabhakar(1.2, 0.72, 0.9, -1.0)


def test_hyp2f1_matches_oracle(oracles):
    for row in oracles["hyp2f1_b1"]:
        got = hyp2f1_unit_b(row["a"], row["c"], row["x"]).value
        assert got == pytest.approx(row["value"], rel=1e-12), row


@given(c=st.floats(1.0, 4.0), extra=st.floats(0.05, 3.0), x=st.floats(0.0, 0.999))
def test_hyp2f1_array_matches_mpmath(c, extra, x):
    a = c - 1.0 - extra
    got = hyp2f1_unit_b_array(a, c, np.array([x]))[0]
    assert got == pytest.approx(float(mpmath.hyp2f1(a, 1, c, x)), rel=1e-10)


@given(c=st.floats(1.0, 4.0), extra=st.floats(0.01, 3.0))
def test_hyp2f1_at_one_is_gauss_sum(c, extra):
    a = c - 1.0 - extra
    assert hyp2f1_at_one(a, c) == pytest.approx(float(mpmath.hyp2f1(a, 1, c, 1)), rel=1e-13)


def test_hyp2f1_at_one_diverges():
    with pytest.raises(DomainError):
        hyp2f1_at_one(0.5, 1.4)


@given(g=st.floats(0.01, 1.0), n=st.integers(0, 200))
def test_gen_binom_matches_mpmath(g, n):
    exact = float(mpmath.gamma(g + n) / (mpmath.gamma(g) * mpmath.factorial(n)))
    assert gen_binom(g, n) == pytest.approx(exact, rel=1e-12)
    assert gen_binom_array(g, n)[n] == pytest.approx(exact, rel=1e-12)


def test_ln_gamma_domain():
    assert ln_gamma(5.0) == pytest.approx(math.log(24.0))
    with pytest.raises(DomainError):
        ln_gamma(0.0)


def test_series_control_validation():
    with pytest.raises(DomainError):
        SeriesControl(rel_tol=0.0)
    with pytest.raises(DomainError):
        SeriesControl(max_terms=0)
