"""Values frozen from scripts/compute_oracles.py (independent mpmath and
brute-force grid evaluations; nothing here calls the production integrals
to build the reference)."""
import math

import pytest

from bec_polaron import selfenergy as se
from bec_polaron.diagrams import diagram_counts
from bec_polaron.model import DimensionlessContext

UNIT = dict(z=1.0, density=1.0, a=0.01, coupling=1.0)

# Richardson-extrapolated trapezoid on a 2-D (k, cos) grid, error ~1e-9
SIGMA1_P05_ONSHELL = -0.38843125050363997
# mpmath quadrature of the p = 0 radial integral
SIGMA1_P0_W0 = -0.38654377317185556
# Gaussian-smeared delta, extrapolated to zero width, error ~1e-8
RATE_P2 = 0.03888995908012879
MU_B_GP001 = 1.060180222245094
I0_NUMERIC_Z1 = 2.6666666666666665
I0_CLOSED_Z1 = 0.9428090415820634
I0_CLOSED_Z2 = 0.369593416113448


def test_sigma1_against_grid_oracle():
    ctx = DimensionlessContext(cutoff=10.0, **UNIT)
    assert se.sigma1(0.5, 0.125, ctx).re == pytest.approx(SIGMA1_P05_ONSHELL, rel=1e-8)
    assert se.sigma1(0.0, 0.0, ctx).re == pytest.approx(SIGMA1_P0_W0, rel=1e-10)


def test_rate_against_smeared_oracle():
    ctx = DimensionlessContext(cutoff=100.0, **UNIT)
    assert se.golden_rule_rate(2.0, ctx) == pytest.approx(RATE_P2, rel=1e-7)
    assert -2 * se.sigma1(2.0, 2.0, ctx).im == pytest.approx(RATE_P2, rel=1e-7)


def test_mu_b_against_oracle():
    ctx = DimensionlessContext.from_gas_parameter(0.01, 1.0)
    r = se.mu_b_report(ctx)
    assert r.mu_b == pytest.approx(MU_B_GP001, rel=1e-12)
    assert r.energy == pytest.approx(MU_B_GP001, rel=1e-10)


def test_i0_against_oracle():
    assert se.i0_numeric(1.0) == pytest.approx(I0_NUMERIC_Z1, rel=1e-12)
    assert se.i0_closed(1.0) == pytest.approx(I0_CLOSED_Z1, rel=1e-12)
    assert se.i0_closed(2.0) == pytest.approx(I0_CLOSED_Z2, rel=1e-12)


@pytest.mark.parametrize("n,distinct,irreducible", [(1, 1, 1), (2, 3, 2), (3, 15, 10), (4, 105, 74)])
def test_matching_counts_against_brute_force(n, distinct, irreducible):
    c = diagram_counts(n)
    assert c.distinct == distinct
    assert c.total == distinct * math.factorial(n)
    assert c.irreducible == irreducible
