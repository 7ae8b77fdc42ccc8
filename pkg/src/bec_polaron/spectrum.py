"""Dressed impurity spectrum: poles, decay rates, effective mass.

The pole of the dressed propagator is expanded in the coupling about the
free dispersion E(p) = z p^2 / 2 (internal units):

    order 1:  W1 = E + S1(p, E)
    order 2:  W2 = W1 + S1(p, E) dS1/dW(p, E) + S2(p, E)

Energies are measured from the bare impurity level; the constant mean-field
shift g n is not included.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InputError
from .model import ZERO, ComplexEnergy, DimensionlessContext
from .numerics import DEFAULT_ETA_GRID, McConfig, QuadratureConfig, check_eta_grid, thread_count
from .selfenergy import (
    as_context,
    golden_rule_rate,
    near_threshold,
    second_order_shift,
    sigma1,
    sigma1_domega,
)
from .tables import Table

DEFAULT_Z_GRID = tuple(float(z) for z in np.geomspace(0.25, 4.0, 17))


@dataclass(frozen=True)
class SpectrumConfig:
    quad: QuadratureConfig = QuadratureConfig(rel_tol=1e-11, abs_tol=1e-15)
    mc: McConfig = McConfig()
    eta_grid: tuple = DEFAULT_ETA_GRID
    stencil_fraction: float = 0.05  # h / p_c
    fit_residual_tol: float = 1e-2  # rms residual / span of the correction
    linear_tol: float = 1e-6  # |dW/dp at 0| / p_c

    def __post_init__(self):
        check_eta_grid(self.eta_grid)
        if not self.stencil_fraction > 0:
            raise InputError("stencil_fraction must be positive")
        if not (self.fit_residual_tol > 0 and self.linear_tol > 0):
            raise InputError("fit tolerances must be positive")


COMPONENT_NAMES = ("E_free", "S1", "S1_correction", "S2")


@dataclass(frozen=True)
class PoleResult:
    p: float
    order: int
    omega: ComplexEnergy
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(c.re for c in self.components.values())
        if abs(total - self.omega.re) > 1e-12 * max(1.0, abs(total)):
            raise AssertionError("pole real part differs from the sum of its components")


def _free(p, ctx):
    return 0.5 * ctx.z * p * p


def _im_warning(omega: ComplexEnergy):
    if omega.im > 3 * omega.stderr_im + 1e-14 * max(1.0, abs(omega.re)):
        return ("positive imaginary part beyond 3 stderr",)
    return ()


def pole_order1(p, params, cfg: SpectrumConfig | None = None) -> PoleResult:
    cfg = cfg or SpectrumConfig()
    ctx = as_context(params)
    e = _free(p, ctx)
    s1 = sigma1(p, e, ctx, cfg.quad)
    free = ComplexEnergy(e, 0.0)
    omega = free + s1
    comps = {"E_free": free, "S1": s1, "S1_correction": ZERO, "S2": ZERO}
    return PoleResult(p, 1, ComplexEnergy.from_complex(omega.value, (0.0, 0.0), _im_warning(omega)), comps)


def _order2_from_shift(p, ctx, cfg, shift: ComplexEnergy) -> PoleResult:
    e = _free(p, ctx)
    s1 = sigma1(p, e, ctx, cfg.quad)
    ds1 = sigma1_domega(p, e, ctx, cfg.quad)
    corr = ComplexEnergy.from_complex(s1.value * ds1.value)
    s2 = ComplexEnergy.from_complex(shift.value - corr.value, (shift.stderr_re, shift.stderr_im), shift.warnings)
    free = ComplexEnergy(e, 0.0)
    total = free + s1 + shift
    comps = {"E_free": free, "S1": s1, "S1_correction": corr, "S2": s2}
    omega = ComplexEnergy.from_complex(
        total.value, (total.stderr_re, total.stderr_im), total.warnings + _im_warning(total)
    )
    return PoleResult(p, 2, omega, comps)


def pole_order2(p, params, cfg: SpectrumConfig | None = None) -> PoleResult:
    """Second-order pole; the g^4 piece S1 dS1 + S2 is one Monte Carlo integral."""
    cfg = cfg or SpectrumConfig()
    ctx = as_context(params)
    (shift,), _ = second_order_shift([p], ctx, cfg.mc, cfg.eta_grid)
    return _order2_from_shift(p, ctx, cfg, shift)


def _check_grid(p_grid):
    grid = [float(p) for p in p_grid]
    if any(not (p >= 0 and math.isfinite(p)) for p in grid):
        raise InputError("momenta must be finite and >= 0")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InputError("momentum grid must be sorted ascending")
    return grid


def _pmap(fn, items):
    n = min(thread_count(), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def rate_curve(p_grid, params, cfg: SpectrumConfig | None = None) -> Table:
    """Rows (p, rate, near_threshold) with the golden-rule rate lambda_p."""
    cfg = cfg or SpectrumConfig()
    ctx = as_context(params)
    grid = _check_grid(p_grid)
    rates = _pmap(lambda p: golden_rule_rate(p, ctx, cfg.quad), grid)
    table = Table(("p", "rate", "near_threshold"))
    for p, lam in zip(grid, rates):
        table.append((p, lam, int(near_threshold(p, ctx))))
    return table


def spectrum_scan(p_grid, order, params, cfg: SpectrumConfig | None = None) -> Table:
    """Rows (p, re, im, stderr_re, stderr_im) of the pole W(p).

    ``table.flags['monotonic']`` records whether Re W is non-decreasing on
    the part of the grid below p_c (within 3 stderr at order 2).
    """
    cfg = cfg or SpectrumConfig()
    ctx = as_context(params)
    grid = _check_grid(p_grid)
    if order == 1:
        poles = _pmap(lambda p: pole_order1(p, ctx, cfg), grid)
    elif order == 2:
        shifts, _ = second_order_shift(grid, ctx, cfg.mc, cfg.eta_grid) if grid else ([], None)
        poles = _pmap(lambda ps: _order2_from_shift(ps[0], ctx, cfg, ps[1]), list(zip(grid, shifts)))
    else:
        raise InputError(f"order must be 1 or 2, got {order}")
    table = Table(("p", "re", "im", "stderr_re", "stderr_im"))
    for r in poles:
        table.append((r.p, r.omega.re, r.omega.im, r.omega.stderr_re, r.omega.stderr_im))
    below = [r.omega for r in poles if r.p <= ctx.p_c]
    table.flags["monotonic"] = all(
        b.re >= a.re - 3 * math.hypot(a.stderr_re, b.stderr_re) for a, b in zip(below, below[1:])
    )
    table.flags["warnings"] = sorted({w for r in poles for w in r.omega.warnings})
    return table


# ---------------------------------------------------------------------------
# effective mass


@dataclass(frozen=True)
class EffectiveMassResult:
    """M_ef in units of m; I-functions from the inversion of the mass formula.

    ``mass`` is the bare M; ``linear_coefficient`` is dW/dp at p = 0 from an
    exact cubic-free interpolation, ``fit_residual`` the rms residual of the
    even fit relative to the span of the correction.
    """

    order: int
    M_ef: float
    mass: float
    fit_stencil: tuple
    fit_residual: float
    linear_coefficient: float
    g_M: float
    I1: float
    I2: float = math.nan
    I2_stderr: float = math.nan
    M_ef_order1: float = math.nan
    M_ef_stderr: float = 0.0

    def __post_init__(self):
        if not self.M_ef > 0:
            raise ConvergenceError(f"non-positive effective mass {self.M_ef}")


def inverse_mass_ratio(g_m, i1, i2=None) -> float:
    """M / M_ef = 1 - (32/3) g_M I1 [+ 8/(3 pi^2) g_M^2 I2]."""
    out = 1 - 32 / 3 * g_m * i1
    if i2 is not None:
        out += 8 / (3 * math.pi**2) * g_m**2 * i2
    return out


def extract_i1(g_m, mass_ratio_1) -> float:
    """I1 from M/M_ef at first order."""
    return 3 / (32 * g_m) * (1 - mass_ratio_1)


def extract_i2(g_m, mass_ratio_1, mass_ratio_2) -> float:
    """I2 from M/M_ef at first and second order."""
    return 3 * math.pi**2 / (8 * g_m**2) * (mass_ratio_2 - mass_ratio_1)


def _even_fit(stencil, values):
    """Least squares values = c0 + c2 p^2 + c4 p^4; returns (c2, relative rms residual)."""
    p = np.asarray(stencil)
    v = np.asarray(values)
    design = np.column_stack([np.ones_like(p), p**2, p**4])
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    resid = v - design @ coef
    span = float(np.ptp(v))
    rel = float(np.sqrt(np.mean(resid**2)) / span) if span > 0 else 0.0
    return float(coef[1]), rel


def _linear_coefficient(stencil, values):
    p = np.asarray(stencil)
    design = np.column_stack([np.ones_like(p), p, p**2, p**4])
    return float(np.linalg.solve(design, np.asarray(values))[1])


def stencil(ctx, fraction) -> tuple:
    h = fraction * ctx.p_c
    pts = tuple(i * h for i in range(4))
    if pts[-1] >= ctx.p_c:
        raise InputError(f"stencil reaches p_c (h = {fraction} p_c)")
    return pts


def effective_mass(order, params, cfg: SpectrumConfig | None = None) -> EffectiveMassResult:
    """Effective mass from the p^2 coefficient of Re W(p) - E(p) near p = 0.

    M / M_ef = 1 + 2 M c2 with c2 fitted on the stencil {0, h, 2h, 3h}
    (basis 1, p^2, p^4).  At order 2 the g^4 shift is computed on common
    random numbers for all stencil points and fitted per batch for an error
    bar.
    """
    if order not in (1, 2):
        raise InputError(f"order must be 1 or 2, got {order}")
    cfg = cfg or SpectrumConfig()
    ctx = as_context(params)
    pts = stencil(ctx, cfg.stencil_fraction)
    mass = ctx.impurity_mass
    g_m = ctx.g_m
    corr1 = np.array(_pmap(lambda p: sigma1(p, _free(p, ctx), ctx, cfg.quad).re, list(pts)))
    c2_1, resid = _even_fit(pts, corr1)
    ratio1 = 1 + 2 * mass * c2_1
    values = corr1
    i2 = i2_se = math.nan
    m_ef_se = 0.0
    ratio = ratio1
    if order == 2:
        shifts, batches = second_order_shift(pts, ctx, cfg.mc, cfg.eta_grid)
        shift = np.array([s.re for s in shifts])
        values = corr1 + shift
        c2_2, resid = _even_fit(pts, values)
        ratio = 1 + 2 * mass * c2_2
        per_batch = np.array([_even_fit(pts, row)[0] for row in batches])
        c2_se = float(per_batch.std(ddof=1) / math.sqrt(len(per_batch)))
        m_ef_se = mass * 2 * mass * c2_se / ratio**2
        if g_m > 0:
            i2 = extract_i2(g_m, ratio1, ratio)
            i2_se = 3 * math.pi**2 / (8 * g_m**2) * 2 * mass * c2_se
    if not (ratio > 0 and ratio1 > 0):
        raise ConvergenceError(f"M/M_ef = {ratio} is not positive; coupling too strong")
    result = EffectiveMassResult(
        order=order,
        M_ef=mass / ratio,
        mass=mass,
        fit_stencil=pts,
        fit_residual=resid,
        linear_coefficient=_linear_coefficient(pts, values),
        g_M=g_m,
        I1=extract_i1(g_m, ratio1) if g_m > 0 else math.nan,
        I2=i2,
        I2_stderr=i2_se,
        M_ef_order1=mass / ratio1,
        M_ef_stderr=m_ef_se,
    )
    if resid > cfg.fit_residual_tol:
        raise ConvergenceError(f"effective-mass fit residual {resid:.3g} above {cfg.fit_residual_tol}", best=result)
    if abs(result.linear_coefficient) > cfg.linear_tol * ctx.p_c:
        raise ConvergenceError(
            f"linear term {result.linear_coefficient:.3g} in the dispersion above tolerance", best=result
        )
    return result


def i_function_curves(z_grid=DEFAULT_Z_GRID, params_template=None, cfg: SpectrumConfig | None = None) -> Table:
    """Rows (z, I1, I2, stderr_I2) at fixed n and a, varying z = m/M.

    The template defaults to sqrt(a_s^3 n) = 0.01 with a = a_s.
    """
    cfg = cfg or SpectrumConfig()
    ctx0 = as_context(params_template) if params_template is not None else DimensionlessContext.from_gas_parameter(0.01, 1.0)
    zs = [float(z) for z in z_grid]
    if any(not z > 0 for z in zs):
        raise InputError("mass ratios must be positive")
    table = Table(("z", "I1", "I2", "stderr_I2"))
    for z in zs:
        res = effective_mass(2, ctx0.with_mass_ratio(z), cfg)
        table.append((z, res.I1, res.I2, res.I2_stderr))
    i1 = np.array(table.column("I1"))
    table.flags["I1_positive"] = bool(np.all(i1 > 0))
    table.flags["I1_max_jump"] = float(np.max(np.abs(np.diff(i1)) / np.abs(i1[:-1]))) if len(i1) > 1 else 0.0
    return table
