"""Physical parameters, the internal unit system and closed-form single-mode
quantities of an impurity immersed in a dilute Bose condensate.

Units: hbar = 1 throughout.  Internally momenta are measured in m*c and
energies in m*c^2 (boson mass m = 1, sound velocity c = 1), so that
n*U0 = 1 and the Bogoliubov dispersion reads eps(l) = (l/2) sqrt(l^2 + 4).
Public functions taking a :class:`PhysicalParams` work in physical units;
functions with an ``_internal`` suffix (or taking a
:class:`DimensionlessContext`) work in internal units.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InputError

DILUTENESS_THRESHOLD = 0.1
_LINK_RTOL = 1e-12


class DilutenessWarning(UserWarning):
    pass


def _check_nonnegative(name, x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(~np.isfinite(arr)):
        raise InputError(f"{name} must be finite and >= 0, got {x!r}")
    return arr


@dataclass(frozen=True)
class PhysicalParams:
    """Full physical input.

    Exactly one of ``scattering_length_bb`` (a_s) and ``boson_interaction``
    (U0) is needed; the other is derived from a_s = m U0 / (4 pi).  Giving
    both requires them to agree.  ``uv_cutoff`` is in units of m*c.
    """

    boson_mass: float
    impurity_mass: float
    density: float
    scattering_length_ib: float
    scattering_length_bb: float | None = None
    boson_interaction: float | None = None
    uv_cutoff: float = 100.0

    def __post_init__(self):
        for name in ("boson_mass", "impurity_mass", "density", "uv_cutoff"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be a finite positive number, got {v!r}")
        if not math.isfinite(self.scattering_length_ib):
            raise InputError("scattering_length_ib must be finite")

        a_s, u0 = self.scattering_length_bb, self.boson_interaction
        if a_s is None and u0 is None:
            raise InputError("one of scattering_length_bb or boson_interaction is required")
        if a_s is not None and u0 is not None:
            expected = self.boson_mass * u0 / (4 * math.pi)
            if abs(expected - a_s) > _LINK_RTOL * max(abs(a_s), abs(expected)):
                raise InputError(
                    f"scattering_length_bb={a_s!r} inconsistent with boson_interaction={u0!r}"
                    f" (m U0 / 4 pi = {expected!r})"
                )
        elif a_s is None:
            object.__setattr__(self, "scattering_length_bb", self.boson_mass * u0 / (4 * math.pi))
        else:
            object.__setattr__(self, "boson_interaction", 4 * math.pi * a_s / self.boson_mass)
        if self.boson_interaction < 0:
            raise InputError("boson_interaction (U0) must be >= 0")

        diluteness = self.scattering_length_bb * self.density ** (1 / 3)
        if diluteness > DILUTENESS_THRESHOLD:
            warnings.warn(
                f"a_s n^(1/3) = {diluteness:.3g} exceeds {DILUTENESS_THRESHOLD}; "
                "the dilute-gas treatment is questionable",
                DilutenessWarning,
                stacklevel=3,
            )

    @property
    def reduced_mass(self) -> float:
        return 1.0 / (1.0 / self.boson_mass + 1.0 / self.impurity_mass)

    def as_dict(self) -> dict:
        return {
            "boson_mass": self.boson_mass,
            "impurity_mass": self.impurity_mass,
            "density": self.density,
            "scattering_length_bb": self.scattering_length_bb,
            "scattering_length_ib": self.scattering_length_ib,
            "uv_cutoff": self.uv_cutoff,
        }


@dataclass(frozen=True)
class DimensionlessContext:
    """Parameters in internal units (hbar = m = c = 1).

    ``density`` is n/(m c)^3, ``a`` the impurity-boson scattering length in
    units 1/(m c), ``coupling`` the impurity-boson coupling g in units
    m c^2 / (m c)^3 and ``cutoff`` the UV cutoff in units m c.  The boson
    scattering length is not independent: n U0 = 1 fixes a_s = 1/(4 pi n).
    ``m`` and ``c`` record the physical scales for converting back.
    """

    z: float
    density: float
    a: float
    cutoff: float
    coupling: float = field(default=None)
    m: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not (self.z > 0 and self.density > 0 and self.cutoff > 0):
            raise InputError("z, density and cutoff must be positive")
        if self.coupling is None:
            object.__setattr__(self, "coupling", born_coupling_internal(self.a, self.z))

    @classmethod
    def from_physical(cls, params: PhysicalParams, coupling: str = "born") -> "DimensionlessContext":
        c = speed_of_sound(params)
        if c <= 0:
            raise InputError("internal units need c > 0 (U0 > 0)")
        m = params.boson_mass
        kc = m * c
        ctx = cls(
            z=m / params.impurity_mass,
            density=params.density / kc**3,
            a=params.scattering_length_ib * kc,
            cutoff=params.uv_cutoff,
            m=m,
            c=c,
        )
        if coupling == "renormalized":
            ctx = ctx.with_coupling(renormalized_coupling_internal(ctx.a, ctx.cutoff, ctx.z))
        elif coupling != "born":
            raise InputError(f"unknown coupling convention {coupling!r}")
        return ctx

    @classmethod
    def from_gas_parameter(cls, gas_parameter, z, cutoff=100.0, a_ratio=1.0):
        """Context with sqrt(a_s^3 n) fixed and a = a_ratio * a_s."""
        if gas_parameter <= 0:
            raise InputError("gas_parameter must be positive")
        density = 1.0 / (8 * math.pi**1.5 * gas_parameter)
        a_s = 1.0 / (4 * math.pi * density)
        return cls(z=z, density=density, a=a_ratio * a_s, cutoff=cutoff)

    def to_physical(self) -> PhysicalParams:
        kc = self.m * self.c
        return PhysicalParams(
            boson_mass=self.m,
            impurity_mass=self.m / self.z,
            density=self.density * kc**3,
            scattering_length_ib=self.a / kc,
            scattering_length_bb=self.a_s / kc,
            uv_cutoff=self.cutoff,
        )

    def with_coupling(self, g: float) -> "DimensionlessContext":
        return replace(self, coupling=float(g))

    def with_mass_ratio(self, z: float) -> "DimensionlessContext":
        """Change M at fixed m, n, a; the coupling is reset to its Born value."""
        return replace(self, z=float(z), coupling=born_coupling_internal(self.a, z))

    def with_cutoff(self, cutoff: float) -> "DimensionlessContext":
        return replace(self, cutoff=float(cutoff))

    @property
    def a_s(self) -> float:
        return 1.0 / (4 * math.pi * self.density)

    @property
    def k_c(self) -> float:
        return self.m * self.c

    @property
    def p_c(self) -> float:
        """Critical momentum M c in units of m c."""
        return 1.0 / self.z

    @property
    def impurity_mass(self) -> float:
        return 1.0 / self.z

    @property
    def m_r(self) -> float:
        return 1.0 / (1.0 + self.z)

    @property
    def gas_parameter(self) -> float:
        return math.sqrt(self.a_s**3 * self.density)

    @property
    def g_m(self) -> float:
        """Dimensionless expansion parameter a^2 n / p_c (m/m_r)^2."""
        return self.a**2 * self.density / self.p_c / self.m_r**2

    @property
    def g2n(self) -> float:
        """g^2 n, the overall scale of the spectral weight w(k)."""
        return self.coupling**2 * self.density

    @property
    def energy_unit(self) -> float:
        return self.m * self.c**2


# ---------------------------------------------------------------------------
# internal-unit kernels (vectorised)


def eps_internal(l):
    """Bogoliubov dispersion in units m c^2 for momentum l in units m c."""
    l = np.asarray(l, dtype=float)
    return 0.5 * l * np.sqrt(l * l + 4.0)


def deps_internal(l):
    l = np.asarray(l, dtype=float)
    return (l * l + 2.0) / np.sqrt(l * l + 4.0)


def impurity_energy_internal(l, z):
    l = np.asarray(l, dtype=float)
    return 0.5 * z * l * l


def weight_kernel_internal(l):
    """w(k)/(g^2 n) = k^2/(2 m eps(k)) in internal units, = l/sqrt(l^2+4)."""
    l = np.asarray(l, dtype=float)
    return l / np.sqrt(l * l + 4.0)


def born_coupling_internal(a, z):
    return 2 * math.pi * a * (1.0 + z)


def renormalized_coupling_internal(a, cutoff, z):
    return 2 * math.pi * a * (1.0 + z) * (1.0 + 2 * a * cutoff / math.pi)


# ---------------------------------------------------------------------------
# physical-unit operations


def speed_of_sound(params: PhysicalParams) -> float:
    return math.sqrt(params.density * params.boson_interaction / params.boson_mass)


def bogoliubov_dispersion(k, params: PhysicalParams):
    k = _check_nonnegative("k", k)
    kin = k * k / (2 * params.boson_mass)
    out = np.sqrt(kin * (kin + 2 * params.density * params.boson_interaction))
    return out if out.ndim else float(out)


def impurity_dispersion(q, params: PhysicalParams):
    q = _check_nonnegative("q", q)
    out = q * q / (2 * params.impurity_mass)
    return out if out.ndim else float(out)


def interaction_weight(k, params: PhysicalParams, g: float):
    """Continuum spectral weight w(k) = g^2 n k^2 / (2 m eps(k)).

    Sums sum_k gamma_k^2 f(k) become (2 pi)^-3 int d^3k w(k) f(k).  At k = 0
    the limit value 0 is returned.
    """
    k = _check_nonnegative("k", k)
    m, n = params.boson_mass, params.density
    nu0 = n * params.boson_interaction
    # k^2/(2 m eps) = sqrt(kin/(kin + 2 n U0)), kin = k^2/2m
    kin = k * k / (2 * m)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(kin > 0, np.sqrt(kin / (kin + 2 * nu0)), 0.0)
    out = g * g * n * ratio
    return out if out.ndim else float(out)


def transform_coefficients(k, params: PhysicalParams):
    """Bogoliubov coefficients (alpha, beta, mu) at momentum k > 0."""
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise InputError("transform coefficients need k > 0")
    nu0 = params.density * params.boson_interaction
    x = (bogoliubov_dispersion(k, params) + k * k / (2 * params.boson_mass)) / nu0
    mu = -(1.0 + x)
    root = np.sqrt(x * (2.0 + x))  # sqrt(mu^2 - 1) without cancellation
    return mu / root, 1.0 / root, mu


def renormalized_coupling(a: float, cutoff: float, params: PhysicalParams) -> float:
    """g(Lambda) = (2 pi a / m_r)(1 + 2 a Lambda / pi); cutoff is a physical momentum."""
    if cutoff < 0:
        raise InputError("cutoff must be >= 0")
    return 2 * math.pi * a / params.reduced_mass * (1.0 + 2 * a * cutoff / math.pi)


def coupling_expansion(cutoff: float, params: PhysicalParams) -> tuple[float, float]:
    """Coefficients (g1, g2) with g(Lambda) = g1 a + g2 a^2 exactly.

    Energies are re-expanded by substituting this series and keeping terms
    through a^2: g n contributes (g1 a + g2 a^2) n, g^2-terms only g1^2 a^2.
    """
    g1 = 2 * math.pi / params.reduced_mass
    return g1, g1 * 2 * cutoff / math.pi


def chemical_potential_bogoliubov(params: PhysicalParams) -> float:
    a, n, m = params.scattering_length_bb, params.density, params.boson_mass
    return 4 * math.pi * a * n / m * (1.0 + 32.0 / 3.0 * math.sqrt(a**3 * n / math.pi))


# ---------------------------------------------------------------------------
# parameter file


@dataclass(frozen=True)
class ComplexEnergy:
    """Complex energy in units m c^2 with (possibly zero) standard errors."""

    re: float
    im: float
    stderr_re: float = 0.0
    stderr_im: float = 0.0
    warnings: tuple = ()

    def __post_init__(self):
        if self.stderr_re < 0 or self.stderr_im < 0:
            raise InputError("standard errors must be non-negative")

    @classmethod
    def from_complex(cls, value, stderr=(0.0, 0.0), warnings=()):
        return cls(float(np.real(value)), float(np.imag(value)), float(stderr[0]), float(stderr[1]), tuple(warnings))

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    def __add__(self, other: "ComplexEnergy") -> "ComplexEnergy":
        return ComplexEnergy(
            self.re + other.re,
            self.im + other.im,
            math.hypot(self.stderr_re, other.stderr_re),
            math.hypot(self.stderr_im, other.stderr_im),
            self.warnings + other.warnings,
        )

    def scaled(self, factor: float) -> "ComplexEnergy":
        f = abs(factor)
        return ComplexEnergy(self.re * factor, self.im * factor, self.stderr_re * f, self.stderr_im * f, self.warnings)


ZERO = ComplexEnergy(0.0, 0.0)

UNIT_SYSTEM = "natural"
_FILE_KEYS = {
    "boson_mass": "boson_mass",
    "impurity_mass": "impurity_mass",
    "density": "density",
    "scattering_length_bb": "scattering_length_bb",
    "boson_interaction": "boson_interaction",
    "scattering_length_ib": "scattering_length_ib",
    "uv_cutoff": "uv_cutoff",
}


def parse_params(text: str, source: str = "<string>") -> PhysicalParams:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    A ``unit_system = natural`` header (hbar = 1) is mandatory.
    """
    values: dict[str, float] = {}
    unit_system = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "unit_system":
            unit_system = val
            continue
        if key not in _FILE_KEYS:
            raise InputError(f"{source}:{lineno}: unknown field {key!r}")
        if key in values:
            raise InputError(f"{source}:{lineno}: duplicate field {key!r}")
        try:
            values[_FILE_KEYS[key]] = float(val)
        except ValueError:
            raise InputError(f"{source}:{lineno}: field {key!r} is not a number: {val!r}") from None
    if unit_system is None:
        raise InputError(f"{source}: missing field 'unit_system'")
    if unit_system != UNIT_SYSTEM:
        raise InputError(f"{source}: field 'unit_system' must be {UNIT_SYSTEM!r}, got {unit_system!r}")
    for required in ("boson_mass", "impurity_mass", "density", "scattering_length_ib"):
        if required not in values:
            raise InputError(f"{source}: missing field {required!r}")
    try:
        return PhysicalParams(**values)
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from None


def load_params(path) -> PhysicalParams:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read parameter file {str(path)!r}: {exc.strerror}") from None
    return parse_params(text, source=str(path))


def format_params(params: PhysicalParams) -> str:
    lines = [f"unit_system = {UNIT_SYSTEM}"]
    lines += [f"{k} = {v!r}" for k, v in params.as_dict().items()]
    return "\n".join(lines) + "\n"
