"""Impurity self-energy at first and second order in the coupling.

Conventions: internal units (hbar = m = c = 1, see :mod:`bec_polaron.model`).
``S_n(p, omega)`` denotes the order-n self-energy in the shifted-frequency
convention, so that the Green's function pole solves omega = E(p) + S(omega).
Each momentum sum is (2 pi)^-3 int d^3k, and the coupling enters only via
the spectral weight w(k) = g^2 n k^2/(2 eps(k)); every integral below is
computed with g^2 n factored out and multiplied back at the end, so that
coupling scaling is exact.

First order::

    S1(p, W) = (2 pi)^-3 int d^3k w(k) / (W - E(p-k) - eps(k) + i0)

The cos(theta) integral of the linear-in-cos denominator is done exactly
(principal value plus delta term); the radial integral is adaptive with
breakpoints at the edges of the one-phonon continuum.

Second order (two irreducible diagrams, crossed and nested)::

    S2(p, W) = -(2 pi)^-6 int d^3k d^3k' w w' (A + C) / (A^2 B C)

with A = eps(k) + E(p-k) - W - i eta, C likewise for k', and
B = eps(k) + eps(k') + E(p-k-k') - W - i eta.  The combination
S1 dS1/dW + S2 has the kernel w w' (B - A - C)/(A^2 B C), in which the
linearly divergent inner-loop pieces cancel; it serves as a control variate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import diagrams
from .errors import InputError
from .model import (
    ZERO,
    ComplexEnergy,
    DimensionlessContext,
    PhysicalParams,
    deps_internal,
    eps_internal,
    impurity_energy_internal,
    weight_kernel_internal,
)
from .numerics import (
    DEFAULT_ETA_GRID,
    McConfig,
    QuadratureConfig,
    check_eta_grid,
    integrate_1d,
    integrate_1d_log,
    integrate_2d,
    ieps_extrapolate,
    linear_extrapolate,
    mc_integrate,
    principal_value_1d,
)

FIRST_ORDER_PREFACTOR = 1.0 / (4 * math.pi**2)  # (2 pi)^-3 * 2 pi
ROOT_WINDOW = 0.05
THRESHOLD_PROXIMITY = 1e-3

_DEFAULT_QUAD = QuadratureConfig(rel_tol=1e-11, abs_tol=1e-15)


def as_context(params) -> DimensionlessContext:
    if isinstance(params, DimensionlessContext):
        return params
    if isinstance(params, PhysicalParams):
        return DimensionlessContext.from_physical(params)
    raise InputError(f"expected PhysicalParams or DimensionlessContext, got {type(params).__name__}")


@dataclass(frozen=True)
class SelfEnergyRequest:
    p: float
    omega: float
    order: int = 1
    quad: QuadratureConfig = _DEFAULT_QUAD
    mc: McConfig = McConfig()
    eta_grid: tuple = DEFAULT_ETA_GRID

    def __post_init__(self):
        if not self.p >= 0:
            raise InputError(f"p must be >= 0, got {self.p}")
        if self.order not in (1, 2):
            raise InputError(f"order must be 1 or 2, got {self.order}")
        check_eta_grid(self.eta_grid)


def evaluate_request(req: SelfEnergyRequest, params) -> ComplexEnergy:
    ctx = as_context(params)
    if req.order == 1:
        return sigma1(req.p, req.omega, ctx, req.quad)
    return sigma2(req.p, req.omega, ctx, req.mc, req.eta_grid, quad=req.quad)


# ---------------------------------------------------------------------------
# helpers


def _check_p(p):
    if not (p >= 0 and math.isfinite(p)):
        raise InputError(f"p must be finite and >= 0, got {p}")


def _scan_grid(cutoff):
    return np.unique(np.concatenate([np.geomspace(1e-9 * cutoff, cutoff, 3000), np.linspace(0, cutoff, 3001)[1:]]))


def _roots(fn, grid):
    """Simple roots of a vectorised fn on the grid, refined by brentq."""
    vals = fn(grid)
    roots = [float(k) for k, v in zip(grid, vals) if v == 0.0]
    change = np.nonzero(vals[:-1] * vals[1:] < 0)[0]
    for i in change:
        roots.append(optimize.brentq(lambda k: float(fn(np.asarray(k))), grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15))
    return sorted(roots)


def _shifted_denominator(k, omega, q, z):
    """D(k) = omega - z (k - q)^2 / 2 - eps(k).

    With p along the z axis, D for q = p and q = -p is W - E(p-k) - eps(k)
    at cos(theta) = +1 and -1, q = 0 is the p = 0 denominator.
    """
    return omega - 0.5 * z * (k - q) ** 2 - eps_internal(k)


def _denominator_quotient(k, k0, q, z):
    """D(k)/(k - k0) for a root k0 of D, computed without cancellation."""
    e, e0 = eps_internal(k), eps_internal(k0)
    return -(0.5 * z * (k + k0 - 2 * q) + (k + k0) * (k * k + k0 * k0 + 4.0) / (4.0 * (e + e0)))


def _ddenominator(k, q, z):
    return -z * (k - q) - deps_internal(k)


def angular_kernel(alpha, beta):
    """int_{-1}^{1} dx / (alpha + beta x + i0) for beta >= 0 (vectorised).

    Real part: (1/beta) ln|(alpha+beta)/(alpha-beta)| (series when beta is
    small against alpha); imaginary part: -pi/beta where |alpha| < beta.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = beta / alpha
        small = np.abs(t) < 1e-3
        t2 = t * t
        series = (2.0 / alpha) * (1.0 + t2 / 3.0 + t2 * t2 / 5.0 + t2 * t2 * t2 / 7.0)
        logs = np.log(np.abs((alpha + beta) / (alpha - beta))) / beta
        re = np.where(small, series, logs)
        im = np.where(np.abs(alpha) < beta, -math.pi / beta, 0.0)
    return re + 1j * im


def _intervals(breaks, lo, hi):
    pts = [lo] + [b for b in breaks if lo < b < hi] + [hi]
    return list(zip(pts[:-1], pts[1:]))


def continuum_edges(p, omega, ctx):
    """Momenta in (0, cutoff) where the one-phonon denominator first/last vanishes."""
    grid = _scan_grid(ctx.cutoff)
    if p == 0:
        return _roots(lambda k: _shifted_denominator(k, omega, 0.0, ctx.z), grid)
    return sorted(
        _roots(lambda k: _shifted_denominator(k, omega, p, ctx.z), grid)
        + _roots(lambda k: _shifted_denominator(k, omega, -p, ctx.z), grid)
    )


# ---------------------------------------------------------------------------
# first order


def sigma1_kernel(p, omega, ctx, cfg=_DEFAULT_QUAD) -> complex:
    """S1 / (g^2 n)."""
    _check_p(p)
    z, cutoff = ctx.z, ctx.cutoff
    w = weight_kernel_internal
    if p == 0:
        roots = continuum_edges(0.0, omega, ctx)
        if not roots:
            re = integrate_1d(lambda k: 2 * k * k * w(k) / _shifted_denominator(k, omega, 0.0, z), (0, cutoff), cfg)
            return FIRST_ORDER_PREFACTOR * re
        (k0,) = roots[:1]
        re = principal_value_1d(
            lambda k: 2 * k * k * w(k) / _denominator_quotient(k, k0, 0.0, z)
            if k != k0
            else 2 * k0 * k0 * w(k0) / _ddenominator(k0, 0.0, z),
            k0,
            (0, cutoff),
            cfg,
        )
        im = -2 * math.pi * k0 * k0 * w(k0) / abs(_ddenominator(k0, 0.0, z))
        return FIRST_ORDER_PREFACTOR * complex(re, im)

    def alpha(k):
        return omega - 0.5 * z * (p * p + k * k) - eps_internal(k)

    grid = _scan_grid(cutoff)
    signed_roots = {sign: _roots(lambda k: _shifted_denominator(k, omega, sign * p, z), grid) for sign in (1, -1)}
    root_sign = {r: sign for sign, rts in signed_roots.items() for r in rts}

    def h(k):
        return k * w(k) / (z * p)

    def re_integrand(k):
        return float(k * k * w(k) * angular_kernel(alpha(k), z * p * k).real)

    def log_remainder(k, sing):
        # ln|(alpha+beta)/(alpha-beta)| minus the logs at the roots in sing;
        # each factor goes through its nearest root so nothing cancels there
        total = 0.0
        logs = {}
        for sign, rts in signed_roots.items():
            if not rts:
                total += sign * math.log(abs(_shifted_denominator(k, omega, sign * p, z)))
                continue
            k0 = min(rts, key=lambda r: abs(r - k))
            total += sign * math.log(abs(_denominator_quotient(k, k0, sign * p, z)))
            logs[k0] = logs.get(k0, 0) + sign
        for e in sing:
            logs[e] = logs.get(e, 0) - root_sign[e]
        return total + sum(c * math.log(abs(k - pt)) for pt, c in logs.items() if c)

    def interval_re(lo, hi):
        # the log singularities at root ends are integrated with a log weight
        # on a short window; away from roots the direct kernel is more precise
        lo_root, hi_root = lo in root_sign, hi in root_sign
        width = (hi - lo) / (2 if lo_root and hi_root else 1)
        window = min(width, ROOT_WINDOW * max(1.0, lo))
        a = lo + window if lo_root else lo
        b = hi - window if hi_root else hi
        out = integrate_1d(re_integrand, (a, b), cfg) if b > a else 0.0
        for e, seg, tag in ((lo, (lo, a), "lo"), (hi, (b, hi), "hi")):
            if e in root_sign:
                out += integrate_1d(lambda k: h(k) * log_remainder(k, (e,)), seg, cfg)
                out += root_sign[e] * integrate_1d_log(h, seg, tag, cfg)
        return out

    roots = sorted(signed_roots[1] + signed_roots[-1])
    re = im = 0.0
    for lo, hi in _intervals(roots, 0.0, cutoff):
        re += interval_re(lo, hi)
        mid = 0.5 * (lo + hi)
        if abs(alpha(mid)) < z * p * mid:
            im += integrate_1d(lambda k: -math.pi * h(k), (lo, hi), cfg)
    return FIRST_ORDER_PREFACTOR * complex(re, im)


def sigma1(p, omega, params, cfg=_DEFAULT_QUAD) -> ComplexEnergy:
    """First-order self-energy S1(p, omega) in units m c^2."""
    ctx = as_context(params)
    return ComplexEnergy.from_complex(ctx.g2n * sigma1_kernel(p, omega, ctx, cfg))


def sigma1_domega_kernel(p, omega, ctx, cfg=_DEFAULT_QUAD) -> complex:
    """dS1/domega / (g^2 n), from the squared-denominator integrand.

    On the continuum the radial integrand has simple poles at the edges;
    they are taken as principal values, and the delta-function terms give
    the imaginary part.
    """
    _check_p(p)
    z, cutoff = ctx.z, ctx.cutoff
    w = weight_kernel_internal
    if p == 0:
        if continuum_edges(0.0, omega, ctx):
            raise InputError("dS1/domega at p = 0 inside the continuum is a double pole; undefined")
        return FIRST_ORDER_PREFACTOR * integrate_1d(
            lambda k: -2 * k * k * w(k) / _shifted_denominator(k, omega, 0.0, z) ** 2, (0, cutoff), cfg
        )

    def r(k, sign):
        return _shifted_denominator(k, omega, sign * p, z)

    def h(k):
        return k * w(k) / (z * p)

    def regular(k):
        return -2 * k * k * w(k) / (r(k, 1) * r(k, -1))

    grid = _scan_grid(cutoff)
    tagged = [(k0, 1) for k0 in _roots(lambda k: r(k, 1), grid)]
    tagged += [(k0, -1) for k0 in _roots(lambda k: r(k, -1), grid)]
    tagged.sort()
    if not tagged:
        return FIRST_ORDER_PREFACTOR * integrate_1d(regular, (0, cutoff), cfg)

    roots = [k0 for k0, _ in tagged]
    mids = [0.5 * (a + b) for a, b in zip(roots, roots[1:])]
    bounds = [0.0] + mids + [cutoff]
    re = im = 0.0
    for (k0, sign), lo, hi in zip(tagged, bounds[:-1], bounds[1:]):
        # integrand h (1/r+ - 1/r-); the factor with the root is sign * h / r_sign
        def f(k, k0=k0, sign=sign):
            if k == k0:
                return sign * h(k0) / _ddenominator(k0, sign * p, z)
            return sign * h(k) / _denominator_quotient(k, k0, sign * p, z) - sign * (k - k0) * h(k) / r(k, -sign)

        re += principal_value_1d(f, k0, (lo, hi), cfg)
        im += -sign * math.pi * h(k0) / abs(_ddenominator(k0, sign * p, z))
    return FIRST_ORDER_PREFACTOR * complex(re, im)


def sigma1_domega(p, omega, params, cfg=_DEFAULT_QUAD) -> ComplexEnergy:
    ctx = as_context(params)
    return ComplexEnergy.from_complex(ctx.g2n * sigma1_domega_kernel(p, omega, ctx, cfg))


# ---------------------------------------------------------------------------
# golden rule


def decay_support(p, ctx) -> list[tuple[float, float]]:
    """Momentum intervals where one-phonon emission conserves energy.

    E(p) - E(p-k) - eps(k) = 0 has a solution cos(theta) <= 1 iff
    sqrt(k^2 + 4) < z (2p - k), i.e. k < 2p and
    (1 - z^2) k^2 + 4 z^2 p k + 4 - 4 z^2 p^2 < 0.
    """
    z = ctx.z
    kmax = min(2 * p, ctx.cutoff)
    if p <= 0 or kmax <= 0:
        return []
    a, b, c = 1 - z * z, 4 * z * z * p, 4 - 4 * z * z * p * p
    if abs(a) < 1e-14:
        cands = [-c / b]
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            cands = []
        else:
            q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
            cands = [q / a] + ([c / q] if q != 0 else [])
    breaks = sorted(r for r in cands if 0 < r < kmax)
    out = []
    for lo, hi in _intervals(breaks, 0.0, kmax):
        mid = 0.5 * (lo + hi)
        if a * mid * mid + b * mid + c < 0:
            out.append((lo, hi))
    return out


def near_threshold(p, ctx) -> bool:
    return abs(p - ctx.p_c) < THRESHOLD_PROXIMITY * ctx.p_c


def golden_rule_rate(p, params, cfg=_DEFAULT_QUAD) -> float:
    """Decay rate lambda_p (units m c^2) of the bare impurity state.

    lambda_p = 2 pi (2 pi)^-3 int d^3k w(k) delta(E(p) - E(p-k) - eps(k)),
    with the delta resolved in cos(theta) (Jacobian 1/(z p k)).  Exactly 0
    for p <= p_c.
    """
    ctx = as_context(params)
    _check_p(p)
    total = 0.0
    for lo, hi in decay_support(p, ctx):
        total += integrate_1d(lambda k: k * weight_kernel_internal(k) / (ctx.z * p), (lo, hi), cfg)
    return ctx.g2n * total / (2 * math.pi)


# ---------------------------------------------------------------------------
# second order


def _second_order_geometry(u, cutoff):
    """Map the unit 5-cube to (k, k', cos, cos', phi) with k = cutoff u^3.

    Returns momenta and the full measure factor (2 pi)^-6 d^3k d^3k',
    using the overall azimuth (2 pi) and phi -> -phi symmetry.
    """
    k = cutoff * u[:, 0] ** 3
    kp = cutoff * u[:, 1] ** 3
    x = 2 * u[:, 2] - 1
    xp = 2 * u[:, 3] - 1
    phi = math.pi * u[:, 4]
    jac = (3 * cutoff * u[:, 0] ** 2) * (3 * cutoff * u[:, 1] ** 2) * 4 * (2 * math.pi)
    measure = jac * k * k * kp * kp * (2 * math.pi) / (2 * math.pi) ** 6
    sx, sxp = np.sqrt(1 - x * x), np.sqrt(1 - xp * xp)
    kvec = np.stack([k * sx, np.zeros_like(k), k * x], axis=-1)
    kpvec = np.stack([kp * sxp * np.cos(phi), kp * sxp * np.sin(phi), kp * xp], axis=-1)
    return k, kp, kvec, kpvec, measure


def _abc(p, omega, z, k, kp, kvec, kpvec):
    """Real parts of A, B, C and B - A - C (eta = 0)."""
    pvec = np.array([0.0, 0.0, p])
    e, ep = eps_internal(k), eps_internal(kp)
    imp = lambda v: 0.5 * z * np.einsum("...i,...i->...", v, v)  # noqa: E731
    a = e + imp(pvec - kvec) - omega
    c = ep + imp(pvec - kpvec) - omega
    b = e + ep + imp(pvec - kvec - kpvec) - omega
    # E(p-k-k') - E(p-k) - E(p-k') + E(p) = z k.k' exactly
    bac = z * np.einsum("...i,...i->...", kvec, kpvec) + (omega - 0.5 * z * p * p)
    return a, b, c, bac


def _check_diagram_kernel(p, omega_c, z, kvec, kpvec, abc):
    """Compare the diagram-generated order-2 kernel with the closed form.

    The kernel identity is checked on the diagram code's own denominators
    (relative 1e-12); the denominators themselves are compared with the
    closed-form ones up to roundoff in their largest term.
    """
    arcs = np.stack([kvec, kpvec])
    pvec = np.array([0.0, 0.0, p])
    imp = lambda q: impurity_energy_internal(q, z)  # noqa: E731
    generated = diagrams.self_energy_integrand(2, arcs, pvec, omega_c, eps_internal, imp)
    crossed = next(d for d in diagrams.irreducible_descriptors(2) if len(set(d.segments)) == 3)
    a, b, c = diagrams.segment_denominators(crossed, arcs, pvec, omega_c, eps_internal, imp)
    closed = -(a + c) / (a * a * b * c)
    scale = 1 / np.abs(a * a * b) + 1 / np.abs(a * b * c)
    bad = np.abs(generated - closed) > 1e-12 * scale
    if np.any(bad):
        i = int(np.argmax(bad))
        raise AssertionError(f"diagram-generated kernel {generated[i]} != closed form {closed[i]}")
    size = 1.0 + abs(omega_c) + np.abs(b + omega_c) + eps_internal(np.linalg.norm(arcs, axis=-1)).sum(axis=0)
    for mine, theirs in zip(abc, (a, b, c)):
        if np.any(np.abs(mine - theirs) > 1e-12 * size):
            raise AssertionError("diagram segment denominators disagree with the closed form")


def reflect_polar(u):
    """(cos, cos') -> (-cos, -cos'): the same point seen from -p."""
    r = u.copy()
    r[:, 2:4] = 1.0 - r[:, 2:4]
    return r


def second_order_kernels(u, p, omega, ctx, etas=(0.0,), check_diagrams=False, reflect=True):
    """Per-sample S2 and (S1 dS1 + S2) integrands, g^4 n^2 stripped.

    With ``reflect`` each sample is averaged with its polar reflection, which
    makes the estimate even in p sample by sample.  Returns two arrays of
    shape (n_samples, len(etas)).
    """
    if reflect:
        s2a, ca = _second_order_kernels(u, p, omega, ctx, etas, check_diagrams)
        s2b, cb = _second_order_kernels(reflect_polar(u), p, omega, ctx, etas, check_diagrams)
        return 0.5 * (s2a + s2b), 0.5 * (ca + cb)
    return _second_order_kernels(u, p, omega, ctx, etas, check_diagrams)


def _second_order_kernels(u, p, omega, ctx, etas, check_diagrams):
    k, kp, kvec, kpvec, measure = _second_order_geometry(u, ctx.cutoff)
    a0, b0, c0, bac0 = _abc(p, omega, ctx.z, k, kp, kvec, kpvec)
    wts = weight_kernel_internal(k) * weight_kernel_internal(kp) * measure
    s2_cols, comb_cols = [], []
    for eta in etas:
        shift = -1j * eta if eta else 0.0
        a, b, c, bac = a0 + shift, b0 + shift, c0 + shift, bac0 - shift
        closed = -(a + c) / (a * a * b * c)
        if check_diagrams:
            _check_diagram_kernel(p, omega + 1j * eta, ctx.z, kvec, kpvec, (a, b, c))
        s2_cols.append(wts * closed)
        comb_cols.append(wts * bac / (a * a * b * c))
    return np.stack(s2_cols, axis=-1), np.stack(comb_cols, axis=-1)


def below_threshold(p, omega, ctx) -> bool:
    """All second-order denominators are positive (eta may be set to 0)."""
    return p < ctx.p_c and omega <= 0.5 * ctx.z * p * p


def _mc_result(est, scale, extra_warnings=()):
    value = complex(est.value) * scale
    return ComplexEnergy.from_complex(value, (est.stderr[0] * abs(scale), est.stderr[1] * abs(scale)), extra_warnings)


def _eta_extrapolated(est, grid, scale):
    fit = ieps_extrapolate(None, grid, values=est.value)
    per_batch = np.array([linear_extrapolate(grid, bm)[0] for bm in est.batch_means])
    nb = len(per_batch)
    se_re = math.hypot(per_batch.real.std(ddof=1) / math.sqrt(nb), fit.uncertainty[0])
    se_im = math.hypot(per_batch.imag.std(ddof=1) / math.sqrt(nb), fit.uncertainty[1])
    warn = ("eta-extrapolation: F(eta) not affine on the grid",) if fit.warning else ()
    return ComplexEnergy.from_complex(fit.value * scale, (se_re * abs(scale), se_im * abs(scale)), warn)


def sigma2(p, omega, params, mc: McConfig | None = None, eta_grid=DEFAULT_ETA_GRID, *,
           control_variate=None, check_diagrams=True, quad=_DEFAULT_QUAD) -> ComplexEnergy:
    """Second-order self-energy S2(p, omega) by Monte Carlo over 5 variables.

    Below threshold (p < p_c, omega <= E(p)) eta = 0 and, by default, the
    estimator is MC[S1 dS1 + S2] - S1 dS1 with the deterministic S1 dS1 as
    an exact control variate.  Otherwise each eta of the grid is evaluated
    on the same points and extrapolated linearly to eta -> 0.
    With ``check_diagrams`` every sample's kernel is also generated from the
    two irreducible order-2 pairings and compared with the closed form.
    """
    ctx = as_context(params)
    _check_p(p)
    mc = mc or McConfig()
    scale = ctx.g2n**2
    if below_threshold(p, omega, ctx):
        use_cv = control_variate is None or control_variate

        def f(u):
            s2, comb = second_order_kernels(u, p, omega, ctx, (0.0,), check_diagrams)
            return (comb if use_cv else s2)[:, 0]

        est = mc_integrate(f, 5, mc)
        if not use_cv:
            return _mc_result(est, scale)
        cv = sigma1_kernel(p, omega, ctx, quad) * sigma1_domega_kernel(p, omega, ctx, quad)
        res = _mc_result(est, 1.0)
        return ComplexEnergy.from_complex((res.value - cv) * scale, (res.stderr_re * scale, res.stderr_im * scale))
    if control_variate:
        raise InputError("the control variate is only available below threshold")
    grid = check_eta_grid(eta_grid)
    est = mc_integrate(lambda u: second_order_kernels(u, p, omega, ctx, grid, check_diagrams)[0], 5, mc)
    return _eta_extrapolated(est, grid, scale)


def second_order_shift(p_values, ctx, mc: McConfig | None = None, eta_grid=DEFAULT_ETA_GRID):
    """S1 dS1/domega + S2 at omega = E(p) for each p, on common MC points.

    Returns a list of ComplexEnergy and the per-batch real parts (array of
    shape (batches, len(p_values))) for correlated downstream fits.
    """
    mc = mc or McConfig()
    p_values = [float(p) for p in p_values]
    scale = ctx.g2n**2
    below = [below_threshold(p, 0.5 * ctx.z * p * p, ctx) for p in p_values]
    grid = check_eta_grid(eta_grid)
    etas_for = [(0.0,) if b else grid for b in below]

    def f(u):
        cols = []
        for p, etas in zip(p_values, etas_for):
            cols.append(second_order_kernels(u, p, 0.5 * ctx.z * p * p, ctx, etas)[1])
        return np.concatenate(cols, axis=1)

    est = mc_integrate(f, 5, mc)
    out, batch_cols, col = [], [], 0
    for p, etas in zip(p_values, etas_for):
        width = len(etas)
        sub = type(est)(est.value[col : col + width], (est.stderr[0][col : col + width], est.stderr[1][col : col + width]),
                        est.samples_used, est.batch_means[:, col : col + width])
        if width == 1:
            out.append(_mc_result(type(est)(complex(sub.value[0]), (float(sub.stderr[0][0]), float(sub.stderr[1][0])),
                                            sub.samples_used, sub.batch_means[:, 0]), scale))
            batch_cols.append(sub.batch_means[:, 0].real * scale)
        else:
            out.append(_eta_extrapolated(sub, grid, scale))
            batch_cols.append(np.array([linear_extrapolate(grid, bm)[0].real for bm in sub.batch_means]) * scale)
        col += width
    return out, np.column_stack(batch_cols)


def symmetrized_shift_kernel(u, p, ctx):
    """The k <-> k' symmetrised form of the S1 dS1 + S2 kernel (eta = 0).

    z (k.k') (A + C) / (2 A^2 C^2 B); integrates to the same value as the
    unsymmetrised kernel z (k.k') / (A^2 B C) on the symmetric domain.
    """
    k, kp, kvec, kpvec, measure = _second_order_geometry(u, ctx.cutoff)
    a, b, c, bac = _abc(p, 0.5 * ctx.z * p * p, ctx.z, k, kp, kvec, kpvec)
    wts = weight_kernel_internal(k) * weight_kernel_internal(kp) * measure
    return wts * bac * (a + c) / (2 * a * a * c * c * b)


def printed_shift_kernel(u, p, ctx):
    """The published dimensionless second-order pole correction, taken literally.

    z g^4 n^2 / (4 pi^6) int dl dl' (l.l') / sqrt((1 + 4/l^2)(1 + 4/l'^2))
      (eA + eC) / (eA^2 eC^2 eB),
    eA = e(l) - 2 z p.l, eC likewise, eB = e(l) + e(l') + 2 z l.l' - 2 z p.(l + l'),
    e(l) = l^2 (sqrt(1 + 4/l^2) + z).  Returned per MC sample with g^4 n^2
    stripped; it equals twice :func:`symmetrized_shift_kernel` pointwise.
    """
    k, kp, kvec, kpvec, measure = _second_order_geometry(u, ctx.cutoff)
    z = ctx.z
    pvec = np.array([0.0, 0.0, p])
    dot = np.einsum("...i,...i->...", kvec, kpvec)
    e = k * k * (np.sqrt(1 + 4 / (k * k)) + z)
    ep = kp * kp * (np.sqrt(1 + 4 / (kp * kp)) + z)
    e_a = e - 2 * z * kvec @ pvec
    e_c = ep - 2 * z * kpvec @ pvec
    e_b = e + ep + 2 * z * dot - 2 * z * (kvec + kpvec) @ pvec
    weights = 1 / np.sqrt((1 + 4 / (k * k)) * (1 + 4 / (kp * kp)))
    # measure carries (2 pi)^-6 d^3k d^3k'; swap it for the printed 1/(4 pi^6)
    scale = (2 * math.pi) ** 6 / (4 * math.pi**6)
    return z * scale * measure * weights * dot * (e_a + e_c) / (e_a**2 * e_c**2 * e_b)


# p = 0: the relative angle integral is analytic, leaving a 2-D integral


def _atanh_ratio(t):
    """atanh(t)/t, stable for small t."""
    t = np.asarray(t, dtype=float)
    t2 = t * t
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.arctanh(t) / t
    series = 1 + t2 / 3 + t2**2 / 5 + t2**3 / 7 + t2**4 / 9 + t2**5 / 11
    return np.where(np.abs(t) < 0.05, series, direct)


def _one_minus_atanh_ratio(t):
    t = np.asarray(t, dtype=float)
    t2 = t * t
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = 1 - np.arctanh(t) / t
    series = -(t2 / 3 + t2**2 / 5 + t2**3 / 7 + t2**4 / 9 + t2**5 / 11 + t2**6 / 13)
    return np.where(np.abs(t) < 0.05, series, direct)


def _zero_momentum_parts(k, kp, omega, z):
    e, ep = eps_internal(k), eps_internal(kp)
    a = e + 0.5 * z * k * k - omega
    c = ep + 0.5 * z * kp * kp - omega
    b0 = e + ep + 0.5 * z * (k * k + kp * kp) - omega
    t = z * k * kp / b0
    meas = 8 * math.pi**2 / (2 * math.pi) ** 6 * (k * kp) ** 2 * weight_kernel_internal(k) * weight_kernel_internal(kp)
    return a, c, b0, t, meas


def _check_zero_momentum_omega(omega):
    if omega > 0:
        raise InputError("the p = 0 reduction needs omega <= 0 (below the continuum)")


def sigma2_zero_momentum(omega, ctx, cutoff=None, cfg=QuadratureConfig(rel_tol=1e-9, abs_tol=1e-14)) -> float:
    """Deterministic S2(0, omega) for omega <= 0 via 2-D cubature."""
    _check_zero_momentum_omega(omega)
    cutoff = ctx.cutoff if cutoff is None else cutoff

    def f(k, kp):
        a, c, b0, t, meas = _zero_momentum_parts(k, kp, omega, ctx.z)
        angular = 2.0 / b0 * _atanh_ratio(t)
        return -meas * (a + c) / (a * a * c) * angular

    return ctx.g2n**2 * integrate_2d(f, (0, cutoff), (0, cutoff), cfg)


def second_order_zero_point(ctx, cutoff=None, omega=0.0, cfg=QuadratureConfig(rel_tol=1e-9, abs_tol=1e-14)) -> float:
    """S1 dS1/domega + S2 at p = 0 (deterministic), the g^4 zero-point shift.

    Angular integral: int dc (b1 c + omega)/(b0 + b1 c)
    = 2 [1 - atanh(t)/t] + 2 (omega/b0) atanh(t)/t with t = b1/b0.
    """
    _check_zero_momentum_omega(omega)
    cutoff = ctx.cutoff if cutoff is None else cutoff

    def f(k, kp):
        a, c, b0, t, meas = _zero_momentum_parts(k, kp, omega, ctx.z)
        angular = 2 * _one_minus_atanh_ratio(t) + 2 * (omega / b0) * _atanh_ratio(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = meas * angular / (a * a * c)
        return np.where(k * kp > 0, out, 0.0)

    return ctx.g2n**2 * integrate_2d(f, (0, cutoff), (0, cutoff), cfg)


# ---------------------------------------------------------------------------
# zero-momentum energy at first order


def i0_closed(z: float) -> float:
    """The printed closed form [2 z s - 2 ln(z + s)] / sqrt(s^6 (z^2 + 1)), s^2 = z^2 - 1.

    Real branch for z < 1: 2 (acos z - z t)/(t^3 sqrt(1 + z^2)), t^2 = 1 - z^2,
    continuous through z = 1 where the series in u = z^2 - 1,
    (4 sum_j binom(-1/2, j) u^j/(2j+3)) / sqrt(2 + u), takes over.
    """
    if not z > 0:
        raise InputError("z must be positive")
    u = z * z - 1
    if abs(u) < 0.25:
        total, coef, term = 0.0, 1.0, 1.0
        for j in range(60):
            total += coef * term / (2 * j + 3)
            coef *= (-0.5 - j) / (j + 1)
            term *= u
        return 4 * total / math.sqrt(2 + u)
    if u > 0:
        s = math.sqrt(u)
        return (2 * z * s - 2 * math.log(z + s)) / math.sqrt(u**3 * (z * z + 1))
    t = math.sqrt(-u)
    return 2 * (math.acos(z) - z * t) / (t**3 * math.sqrt(1 + z * z))


def _i0_integrand(l, z):
    """Renormalised zero-point integrand; its integral is I0(z).

    1 - (1+z) l^4 / (4 eps (eps + z l^2/2)) rewritten without cancellation
    as 4 (1 + z l/(l + R)) / (R (R + z l)), R = sqrt(l^2 + 4).
    """
    r = math.sqrt(l * l + 4)
    return 4 * (1 + z * l / (l + r)) / (r * (r + z * l))


def i0_numeric(z: float, cfg=_DEFAULT_QUAD, cutoff=math.inf) -> float:
    """I0 from its defining integral (coefficient of 2 a m c / pi in E_i(0))."""
    if not z > 0:
        raise InputError("z must be positive")
    return integrate_1d(lambda l: _i0_integrand(l, z), (0, cutoff), cfg)


@dataclass(frozen=True)
class ZeroPointEnergy:
    """First-order energy of the resting impurity (units m c^2).

    ``value`` uses the cutoff-extrapolated I0, ``value_at_cutoff`` the
    integral truncated at the context cutoff; ``mean_field`` (g n) and
    ``loop`` (S1(0, 0)) are the unrenormalised pieces with g = g(cutoff).
    """

    value: float
    value_at_cutoff: float
    i0_numeric: float
    i0_at_cutoff: float
    i0_closed: float
    mean_field: float
    loop: float
    cutoff: float


def zero_point_energy_order1(params, cfg=_DEFAULT_QUAD, renormalize=True) -> ZeroPointEnergy:
    """E_i(0) = (2 pi a n / m_r)(1 + (2 a m c / pi) I0(z)), re-expanded through a^2.

    With ``renormalize=False`` the Born-level mean field g n with
    g = 2 pi a / m_r is returned as the value (the cutoff -> 0 limit).
    """
    ctx = as_context(params)
    z, a, n = ctx.z, ctx.a, ctx.density
    born = 2 * math.pi * a * n * (1 + z)
    i0_inf = i0_numeric(z, cfg)
    i0_cut = i0_numeric(z, cfg, cutoff=ctx.cutoff)
    g_cut = 2 * math.pi * a * (1 + z) * (1 + 2 * a * ctx.cutoff / math.pi)
    loop = g_cut**2 * n * sigma1_kernel(0.0, 0.0, ctx, cfg).real
    if not renormalize:
        return ZeroPointEnergy(born, born, i0_inf, i0_cut, i0_closed(z), g_cut * n, loop, ctx.cutoff)
    return ZeroPointEnergy(
        value=born * (1 + 2 * a / math.pi * i0_inf),
        value_at_cutoff=born * (1 + 2 * a / math.pi * i0_cut),
        i0_numeric=i0_inf,
        i0_at_cutoff=i0_cut,
        i0_closed=i0_closed(z),
        mean_field=g_cut * n,
        loop=loop,
        cutoff=ctx.cutoff,
    )


def mu_b_internal(n, a_s):
    """Bogoliubov chemical potential with the Lee-Huang-Yang term, m = 1 units."""
    return 4 * math.pi * a_s * n * (1 + 32 / 3 * math.sqrt(a_s**3 * n / math.pi))


@dataclass(frozen=True)
class MuBReport:
    """First-order E_i(0) for an impurity identical to the bosons, against mu_B.

    ``energy`` uses the cutoff-extrapolated I0, ``energy_closed`` the
    closed-form I0; ``cutoff_drift`` is the relative change of the
    truncated-integral energy when the cutoff doubles.
    """

    energy: float
    mu_b: float
    ratio: float
    i0_numeric: float
    i0_closed: float
    energy_closed: float
    energy_at_cutoff: float
    energy_at_double_cutoff: float
    cutoff_drift: float
    cutoff: float


def mu_b_report(params, cfg=_DEFAULT_QUAD) -> MuBReport:
    ctx = as_context(params)
    same = DimensionlessContext(z=1.0, density=ctx.density, a=ctx.a_s, cutoff=ctx.cutoff, m=ctx.m, c=ctx.c)
    e1 = zero_point_energy_order1(same, cfg)
    e2 = zero_point_energy_order1(same.with_cutoff(2 * same.cutoff), cfg)
    mu = mu_b_internal(same.density, same.a_s)
    born = 4 * math.pi * same.a * same.density
    return MuBReport(
        energy=e1.value,
        mu_b=mu,
        ratio=e1.value / mu,
        i0_numeric=e1.i0_numeric,
        i0_closed=e1.i0_closed,
        energy_closed=born * (1 + 2 * same.a / math.pi * e1.i0_closed),
        energy_at_cutoff=e1.value_at_cutoff,
        energy_at_double_cutoff=e2.value_at_cutoff,
        cutoff_drift=abs(e2.value_at_cutoff - e1.value_at_cutoff) / abs(e1.value_at_cutoff),
        cutoff=same.cutoff,
    )
