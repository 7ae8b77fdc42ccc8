"""Perturbation theory for an impurity in a dilute Bose-Einstein condensate.

Energies are in units of m c^2 and momenta in units of m c, with m the
boson mass and c the Bogoliubov speed of sound.
"""
from .diagrams import Pairing, diagram_counts, enumerate_pairings, is_irreducible
from .errors import BecPolaronError, ConvergenceError, InputError, NonFiniteIntegrandError, SingularityError
from .model import (
    ComplexEnergy,
    DilutenessWarning,
    DimensionlessContext,
    PhysicalParams,
    bogoliubov_dispersion,
    chemical_potential_bogoliubov,
    load_params,
    parse_params,
)
from .numerics import McConfig, QuadratureConfig
from .selfenergy import golden_rule_rate, mu_b_report, sigma1, sigma1_domega, sigma2, zero_point_energy_order1
from .spectrum import (
    SpectrumConfig,
    effective_mass,
    i_function_curves,
    pole_order1,
    pole_order2,
    rate_curve,
    spectrum_scan,
)

__version__ = "0.1.0"

__all__ = [
    "BecPolaronError",
    "ComplexEnergy",
    "ConvergenceError",
    "DilutenessWarning",
    "DimensionlessContext",
    "InputError",
    "McConfig",
    "NonFiniteIntegrandError",
    "Pairing",
    "PhysicalParams",
    "QuadratureConfig",
    "SingularityError",
    "SpectrumConfig",
    "bogoliubov_dispersion",
    "chemical_potential_bogoliubov",
    "diagram_counts",
    "effective_mass",
    "enumerate_pairings",
    "golden_rule_rate",
    "i_function_curves",
    "is_irreducible",
    "load_params",
    "mu_b_report",
    "parse_params",
    "pole_order1",
    "pole_order2",
    "rate_curve",
    "sigma1",
    "sigma1_domega",
    "sigma2",
    "spectrum_scan",
    "zero_point_energy_order1",
]
