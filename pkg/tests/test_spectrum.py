import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bec_polaron import spectrum as sp
from bec_polaron.errors import ConvergenceError, InputError
from bec_polaron.model import DimensionlessContext
from bec_polaron.numerics import McConfig
from bec_polaron.selfenergy import golden_rule_rate

CTX = DimensionlessContext.from_gas_parameter(0.01, 1.0)
FAST = sp.SpectrumConfig(mc=McConfig(samples=2**14, seed=3))

# small-p first-order oracle (mpmath, scripts/compute_oracles.py)
I1_ORACLE = {0.25: 0.21717804284501047, 1.0: 0.065416874947515, 4.0: 0.006121837740883056}


def free_context(z=1.0):
    return DimensionlessContext(z=z, density=CTX.density, a=0.0, cutoff=100.0)


def test_zero_coupling_gives_free_dispersion():
    ctx = free_context(0.5)
    for p in (0.0, 0.7, 3.0):
        assert sp.pole_order1(p, ctx).omega.re == 0.5 * 0.5 * p * p
        r = sp.pole_order2(p, ctx, FAST)
        assert r.omega.re == 0.5 * 0.5 * p * p
        assert r.omega.im == 0.0


def test_pole_components_sum():
    r = sp.pole_order2(0.3, CTX, FAST)
    assert set(r.components) == set(sp.COMPONENT_NAMES)
    total = sum(c.re for c in r.components.values())
    assert total == pytest.approx(r.omega.re, abs=1e-12)
    assert r.components["S2"].stderr_re == r.omega.stderr_re


def test_pole_result_rejects_inconsistent_components():
    from bec_polaron.model import ComplexEnergy

    with pytest.raises(AssertionError):
        sp.PoleResult(0.0, 1, ComplexEnergy(1.0, 0.0), {"E_free": ComplexEnergy(0.5, 0.0)})


def test_order2_estimate_is_stable_under_refinement():
    base = sp.pole_order2(0.0, CTX, sp.SpectrumConfig(mc=McConfig(samples=2**15, seed=1)))
    finer = sp.pole_order2(0.0, CTX, sp.SpectrumConfig(mc=McConfig(samples=2**16, seed=2), eta_grid=(0.04, 0.02, 0.01, 0.005)))
    assert abs(base.omega.re - finer.omega.re) < 3 * math.hypot(base.omega.stderr_re, finer.omega.stderr_re)


def test_rate_curve_zero_below_threshold():
    grid = np.linspace(0, 0.99 * CTX.p_c, 12)
    t = sp.rate_curve(grid, CTX)
    assert t.column("rate") == [0.0] * 12
    assert len(t) == 12


def test_rate_scales_with_coupling_squared():
    grid = [1.2, 1.5, 2.0]
    a = sp.rate_curve(grid, CTX).column("rate")
    b = sp.rate_curve(grid, CTX.with_coupling(2 * CTX.coupling)).column("rate")
    for x, y in zip(a, b):
        assert y == pytest.approx(4 * x, rel=1e-12)


def test_rate_threshold_bracket_and_monotone():
    pc = CTX.p_c
    assert golden_rule_rate(pc * (1 - 1e-3), CTX) == 0.0
    assert golden_rule_rate(pc * (1 + 1e-3), CTX) > 0.0
    t = sp.rate_curve(np.linspace(pc, 1.5 * pc, 20), CTX)
    rates = t.column("rate")
    assert all(b >= a for a, b in zip(rates, rates[1:]))
    assert t.column("near_threshold")[0] == 1


@settings(max_examples=20)
@given(st.floats(0.3, 3.0))
def test_rate_threshold_tracks_mass_ratio(z):
    ctx = CTX.with_mass_ratio(z)
    assert golden_rule_rate(ctx.p_c * 0.999, ctx) == 0.0
    assert golden_rule_rate(ctx.p_c * 1.01, ctx) > 0.0


def test_grid_validation():
    with pytest.raises(InputError):
        sp.rate_curve([0.2, 0.1], CTX)
    with pytest.raises(InputError):
        sp.rate_curve([-0.1], CTX)
    with pytest.raises(InputError):
        sp.spectrum_scan([0.1], 3, CTX)


def test_spectrum_scan_first_order():
    grid = list(np.linspace(0, 0.9, 7))
    t = sp.spectrum_scan(grid, 1, CTX)
    assert len(t) == 7 and t.columns == ("p", "re", "im", "stderr_re", "stderr_im")
    assert t.flags["monotonic"]
    assert t.column("im") == [0.0] * 7
    assert t.column("re")[3] == sp.pole_order1(grid[3], CTX).omega.re


def test_spectrum_scan_second_order_matches_pole():
    t = sp.spectrum_scan([0.0, 0.2, 0.4], 2, CTX, FAST)
    assert len(t) == 3
    assert t.column("re")[0] == pytest.approx(sp.pole_order2(0.0, CTX, FAST).omega.re, rel=1e-12)
    assert t.flags["monotonic"]


def test_spectrum_scan_empty():
    t = sp.spectrum_scan([], 2, CTX, FAST)
    assert len(t) == 0


def test_mass_formula_inversion():
    g_m, i1, i2 = 3e-3, 0.07, 0.6
    r1 = sp.inverse_mass_ratio(g_m, i1)
    r2 = sp.inverse_mass_ratio(g_m, i1, i2)
    assert sp.extract_i1(g_m, r1) == pytest.approx(i1, rel=1e-10)
    assert sp.extract_i2(g_m, r1, r2) == pytest.approx(i2, rel=1e-10)


@given(st.floats(1e-5, 1e-2), st.floats(0.0, 1.0), st.floats(-5.0, 5.0))
def test_mass_formula_round_trip(g_m, i1, i2):
    r1 = sp.inverse_mass_ratio(g_m, i1)
    r2 = sp.inverse_mass_ratio(g_m, i1, i2)
    assert sp.extract_i1(g_m, r1) == pytest.approx(i1, abs=1e-12 / g_m)
    assert sp.extract_i2(g_m, r1, r2) == pytest.approx(i2, abs=1e-10 / g_m**2)


def test_free_impurity_mass_is_bare():
    ctx = free_context(2.0)
    r = sp.effective_mass(2, ctx, FAST)
    assert r.M_ef == r.mass == 0.5
    assert math.isnan(r.I1) and math.isnan(r.I2)


@pytest.mark.parametrize("z", [0.25, 1.0, 4.0])
def test_first_order_i1_against_small_p_oracle(z):
    r = sp.effective_mass(1, CTX.with_mass_ratio(z))
    # the fit carries an O(h^4) stencil error, about 1e-5 relative here
    assert r.I1 == pytest.approx(I1_ORACLE[z], rel=1e-4)
    assert r.fit_residual < 1e-6
    assert abs(r.linear_coefficient) < 1e-6 * CTX.with_mass_ratio(z).p_c


def test_stencil_halving_changes_mass_little():
    a = sp.effective_mass(2, CTX, FAST)
    b = sp.effective_mass(2, CTX, sp.SpectrumConfig(mc=FAST.mc, stencil_fraction=0.025))
    assert abs(a.M_ef - b.M_ef) / a.M_ef < 5e-3
    assert a.M_ef > a.mass
    assert a.M_ef_stderr > 0 and math.isfinite(a.I2_stderr)


def test_stencil_must_stay_below_threshold():
    with pytest.raises(InputError):
        sp.stencil(CTX, 0.4)


def test_fit_failure_carries_best_estimate():
    cfg = sp.SpectrumConfig(fit_residual_tol=1e-300, mc=FAST.mc)
    with pytest.raises(ConvergenceError) as info:
        sp.effective_mass(1, CTX, cfg)
    assert info.value.best.M_ef > 0


def test_even_fit_recovers_quadratic():
    pts = sp.stencil(CTX, 0.05)
    c2, resid = sp._even_fit(pts, [1 + 0.3 * p * p - 2 * p**4 for p in pts])
    assert c2 == pytest.approx(0.3, rel=1e-10)
    assert resid < 1e-10


def test_i_function_curves_shape():
    t = sp.i_function_curves((0.5, 1.0, 2.0), cfg=FAST)
    assert t.columns == ("z", "I1", "I2", "stderr_I2")
    assert len(t) == 3
    assert t.flags["I1_positive"]
    i1 = t.column("I1")
    assert i1[0] > i1[1] > i1[2]


def test_i1_continuous_on_dense_grid():
    zs = np.geomspace(0.25, 4.0, 65)
    i1 = np.array([sp.effective_mass(1, CTX.with_mass_ratio(z)).I1 for z in zs])
    assert np.all(i1 > 0)
    assert np.max(np.abs(np.diff(i1)) / i1[:-1]) < 0.10


def test_orders_agree_as_coupling_vanishes():
    cfg = sp.SpectrumConfig(mc=McConfig(samples=2**14, seed=8))
    gs = np.array([0.02, 0.04, 0.08])
    rel = []
    for g in gs:
        ctx = CTX.with_coupling(g)
        o1 = sp.pole_order1(0.3, ctx)
        o2 = sp.pole_order2(0.3, ctx, cfg)
        rel.append(abs(o2.omega.re - o1.omega.re) / abs(o1.omega.re - 0.5 * 0.3**2))
    assert np.polyfit(np.log(gs), np.log(rel), 1)[0] == pytest.approx(2.0, abs=0.1)


def test_threshold_bracketed_by_grid():
    grid = np.linspace(0.5, 1.5, 23) * CTX.p_c
    rates = sp.rate_curve(grid, CTX).column("rate")
    first = next(i for i, r in enumerate(rates) if r > 0)
    assert grid[first - 1] <= CTX.p_c <= grid[first]


@given(st.floats(0.0, 3.0))
def test_first_order_width_nonpositive(frac):
    assert sp.pole_order1(frac * CTX.p_c, CTX).omega.im <= 0.0


def test_second_order_width_above_threshold():
    r = sp.pole_order2(2.0, CTX, FAST)
    assert r.omega.im <= 3 * r.omega.stderr_im
