"""Independent reference values for the test suite.

Run once; the printed numbers are frozen in tests/test_oracles.py.
None of these paths import the production integrators.
"""
import itertools
import json
import math

import mpmath as mp
import numpy as np
from scipy.special import erf


def eps(k):
    return 0.5 * k * np.sqrt(k * k + 4)


def what(k):
    return k / np.sqrt(k * k + 4)


def sigma1_trapezoid(p, omega, z, cutoff, nk, nx):
    """S1/(g^2 n) from a plain (k, cos) trapezoid grid; valid below threshold."""
    k = np.linspace(0, cutoff, nk)
    x = np.linspace(-1, 1, nx)
    kk, xx = np.meshgrid(k, x, indexing="ij")
    den = omega - 0.5 * z * (p * p + kk * kk - 2 * p * kk * xx) - eps(kk)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(kk > 0, kk * kk * what(kk) / den, 0.0)
    inner = np.trapezoid(f, x, axis=1)
    return np.trapezoid(inner, k) / (4 * math.pi**2)


def richardson(f, n0):
    """Two grid doublings; trapezoid error ~ h^2."""
    a, b = f(n0), f(2 * n0 - 1)
    return (4 * b - a) / 3, abs(b - a)


def rate_smeared(p, z, sigma, nk=400001):
    """lambda/(g^2 n) with delta -> Gaussian of width sigma; cos integral via erf."""
    k = np.linspace(1e-12, 2 * p, nk)
    a = -0.5 * z * k * k - eps(k)
    b = z * p * k
    cdf = lambda t: 0.5 * (1 + erf(t / (sigma * math.sqrt(2))))  # noqa: E731
    ang = (cdf(a + b) - cdf(a - b)) / b
    return np.trapezoid(k * k * what(k) * ang, k) / (2 * math.pi)


def i1_small_p(z, g2n, g_m, cutoff):
    f = lambda k: k**4 * (k / mp.sqrt(k * k + 4)) / (k / 2 * mp.sqrt(k * k + 4) + z * k * k / 2) ** 3  # noqa: E731
    v = mp.quad(f, [0, 1, 10, cutoff])
    ratio = 1 - mp.mpf(2) * z / 3 / (2 * mp.pi**2) * g2n * v
    return float(mp.mpf(3) / (32 * g_m) * (1 - ratio))


def irreducible_brute(n):
    """Count irreducible matchings by brute force over all vertex permutations."""
    seen = set()
    for perm in itertools.permutations(range(1, 2 * n + 1)):
        arcs = tuple(sorted(tuple(sorted(perm[2 * i : 2 * i + 2])) for i in range(n)))
        seen.add(arcs)
    good = 0
    for arcs in seen:
        if all(any(i <= s < j for i, j in arcs) for s in range(1, 2 * n)):
            good += 1
    return len(seen), good


def main():
    mp.mp.dps = 30
    out = {}
    s1, err = richardson(lambda n: sigma1_trapezoid(0.5, 0.125, 1.0, 10.0, n, n), 2001)
    out["sigma1_z1_cut10_p05_onshell"] = [s1, err]
    s1_0 = mp.quad(lambda k: 2 * k * k * (k / mp.sqrt(k * k + 4)) / (-(k * k) / 2 - k / 2 * mp.sqrt(k * k + 4)), [0, 1, 10])
    out["sigma1_z1_cut10_p0_w0"] = float(s1_0 / (4 * mp.pi**2))

    sig = [0.004, 0.002, 0.001]
    r = [rate_smeared(2.0, 1.0, s) for s in sig]
    # smearing error is even in sigma: a + b s^2 + c s^4
    coef = np.polyfit(np.array(sig) ** 2, r, 2)
    out["rate_z1_p2"] = [float(coef[-1]), abs(r[-1] - coef[-1])]

    gp = mp.mpf("0.01")
    n = 1 / (8 * mp.pi**1.5 * gp)
    a_s = 1 / (4 * mp.pi * n)
    out["mu_b_gp001"] = float(4 * mp.pi * a_s * n * (1 + mp.mpf(32) / 3 * mp.sqrt(a_s**3 * n / mp.pi)))
    # unsimplified integrand; Gauss-Legendre in t = 1/l keeps nodes away from
    # the huge l where the subtraction loses every digit
    f0 = lambda l: 1 - 2 * l**4 / (l * mp.sqrt(l * l + 4) * (l * mp.sqrt(l * l + 4) + l * l))  # noqa: E731
    i0 = mp.quad(f0, [0, 1, 10, 100], method="gauss-legendre") + mp.quad(
        lambda t: f0(1 / t) / t**2, [0, mp.mpf(1) / 100], method="gauss-legendre"
    )
    out["i0_numeric_z1"] = float(i0)
    closed = lambda z: (2 * z * mp.sqrt(z * z - 1) - 2 * mp.log(z + mp.sqrt(z * z - 1))) / mp.sqrt((z * z - 1) ** 3 * (z * z + 1))  # noqa: E731
    out["i0_closed_z1_limit"] = float(mp.re(mp.limit(closed, 1, direction=1)))
    out["i0_closed_z2"] = float(closed(mp.mpf(2)))

    for z in (0.25, 1.0, 4.0):
        g = 2 * mp.pi * a_s * (1 + z)
        g_m = z * a_s**2 * n * (1 + z) ** 2
        out[f"i1_small_p_z{z}"] = i1_small_p(mp.mpf(z), g * g * n, g_m, 100)

    out["matchings_brute"] = {n_: irreducible_brute(n_) for n_ in (1, 2, 3, 4)}
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
