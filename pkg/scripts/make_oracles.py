"""Regenerate tests/data/oracles.json from independent mpmath computations.

Nothing here imports fou2.  Prabhakar values are summed from the definition
with enough digits to absorb the cancellation, the Green's function is
cross-checked by numerical Laplace inversion, and the variance and
covariance are tanh-sinh integrals of G products after a power substitution
that makes the integrand smooth.  None of it shares code with the
anti-diagonal series.

    python3 scripts/make_oracles.py [--out tests/data/oracles.json]
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 60

PARAM_SETS = [(0.8, 0.9, 0.7), (0.9, 0.8, 0.5), (0.6, 1.0, 1.0), (1.0, 1.0, 1.0), (0.75, 0.95, 1.3)]
TIMES = [0.5, 1.0, 3.0]
COV_PAIRS = [(1.0, 0.5), (3.0, 1.0), (2.0, 2.0)]


def _terms(alpha, beta, gamma, z, eps):
    total, n, biggest = mp.mpf(0), 0, mp.mpf(0)
    while True:
        term = mp.rf(gamma, n) / mp.factorial(n) * z**n * mp.rgamma(alpha * n + beta)
        total += term
        biggest = max(biggest, abs(term))
        if n > 10 and abs(term) < eps * max(abs(total), mp.mpf(10) ** -300) and abs(term) < eps * biggest:
            return total, biggest
        n += 1


def prabhakar(alpha, beta, gamma, z):
    """Definition series; working precision covers the cancellation of the largest term."""
    args = [mp.mpf(v) for v in (alpha, beta, gamma, z)]
    with mp.workdps(20):
        _, biggest = _terms(*args, mp.mpf(10) ** -18)
    extra = max(0, int(mp.log10(biggest)) + 1) if biggest > 0 else 0
    with mp.workdps(mp.mp.dps + extra):
        args = [mp.mpf(v) for v in (alpha, beta, gamma, z)]
        total, _ = _terms(*args, mp.mpf(10) ** -55)
    return +total


def green(a, g, lam, t):
    t = mp.mpf(t)
    return t ** (a * g - 1) * prabhakar(a, a * g, g, -(mp.mpf(lam) ** a) * t**a)


def green_laplace(a, g, lam, t):
    return mp.invertlaplace(lambda s: (s**a + mp.mpf(lam) ** a) ** (-g), t, method="talbot")


def covariance(a, g, lam, t, s):
    """int_0^s G(t-u) G(s-u) du after a power substitution that removes the endpoint singularity."""
    a, g, lam, t, s = (mp.mpf(v) for v in (a, g, lam, t, s))
    with mp.workdps(30):
        if t == s:
            k = 1 / (2 * a * g - 1)
            return mp.quad(lambda y: green(a, g, lam, t * y**k) ** 2 * t * k * y ** (k - 1), [0, 1])
        k = 1 / (a * g)
        return mp.quad(
            lambda y: green(a, g, lam, t - s + s * y**k) * green(a, g, lam, s * y**k) * s * k * y ** (k - 1), [0, 1]
        )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "data" / "oracles.json"))
    args = ap.parse_args()

    prab = []
    for alpha, beta, gamma in [(0.8, 0.72, 0.9), (0.6, 0.6, 1.0), (1.0, 1.0, 1.0), (0.5, 1.3, 0.4), (0.95, 2.0, 0.7)]:
        for z in [0.0, -0.3, -2.0, -10.0, -35.0]:
            prab.append({"alpha": alpha, "beta": beta, "gamma": gamma, "z": z, "value": float(prabhakar(alpha, beta, gamma, z))})

    hyp = []
    for a, c in [(-0.3, 1.7), (0.4, 2.2), (-1.8, 1.5), (0.1, 3.05)]:
        for x in [0.0, 0.2, 0.6, 0.9, 0.999]:
            hyp.append({"a": a, "c": c, "x": x, "value": float(mp.hyp2f1(a, 1, c, x))})

    green_rows, var_rows, cov_rows = [], [], []
    for a, g, lam in PARAM_SETS:
        for t in TIMES:
            gv = green(a, g, lam, t)
            gl = green_laplace(a, g, lam, t)
            assert abs(gv - gl) <= mp.mpf(10) ** -12 * abs(gv), (a, g, lam, t, gv, gl)
            green_rows.append({"alpha": a, "gamma": g, "lam": lam, "t": t, "value": float(gv)})
            var_rows.append({"alpha": a, "gamma": g, "lam": lam, "t": t, "value": float(covariance(a, g, lam, t, t))})
        for t, s in COV_PAIRS:
            cov_rows.append({"alpha": a, "gamma": g, "lam": lam, "t": t, "s": s, "value": float(covariance(a, g, lam, t, s))})
        print(f"done {a} {g} {lam}", flush=True)

    doc = {
        "generator": "scripts/make_oracles.py",
        "mpmath_version": mp.__version__,
        "prabhakar": prab,
        "hyp2f1_b1": hyp,
        "green": green_rows,
        "variance": var_rows,
        "covariance": cov_rows,
    }
    Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
