"""Integration kernels: adaptive 1-D/2-D quadrature, principal values by
pole subtraction, seeded (quasi-)Monte Carlo with batch error bars, and
finite-eta extrapolation of i0-regulated quantities.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from .errors import ConvergenceError, InputError, NonFiniteIntegrandError

DEFAULT_ETA_GRID = (0.08, 0.04, 0.02, 0.01)
LOW_DISCREPANCY = "low-discrepancy"
PSEUDO_RANDOM = "pseudo-random"
THREADS_ENV = "BECPOLARON_THREADS"


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 500

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise InputError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise InputError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class McConfig:
    samples: int = 2**16
    seed: int = 20240601
    batches: int = 16
    sequence_kind: str = LOW_DISCREPANCY

    def __post_init__(self):
        if self.batches < 2:
            raise InputError("need at least 2 batches for an error estimate")
        if self.samples < self.batches:
            raise InputError("samples must be >= batches")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be a 64-bit unsigned integer")
        if self.sequence_kind not in (LOW_DISCREPANCY, PSEUDO_RANDOM):
            raise InputError(f"unknown sequence kind {self.sequence_kind!r}")

    @property
    def per_batch(self) -> int:
        return self.samples // self.batches


@dataclass
class McEstimate:
    """Batch-mean estimate.  ``value`` is complex (or an array of complex
    when the integrand returns several columns); ``stderr`` holds the
    (real, imaginary) standard errors with matching shape."""

    value: complex | np.ndarray
    stderr: tuple
    samples_used: int
    batch_means: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# deterministic quadrature


def _quad_checked(f, a, b, cfg: QuadratureConfig, points=None, **extra):
    kwargs = dict(epsabs=cfg.abs_tol, epsrel=cfg.rel_tol, limit=cfg.max_subdivisions, full_output=1, **extra)
    if points is not None and len(points) and math.isfinite(a) and math.isfinite(b):
        kwargs["points"] = points
    out = integrate.quad(f, a, b, **kwargs)
    value, err = out[0], out[1]
    if len(out) > 3:
        message = out[3]
        requested = max(cfg.abs_tol, cfg.rel_tol * abs(value))
        # QUADPACK flags tiny, nearly cancelling pieces even when its own
        # error estimate meets the request; roundoff-limited results are
        # accepted if still close to it
        if not (err <= requested or ("roundoff" in message and err <= 1e3 * requested)):
            raise ConvergenceError(
                f"quadrature on [{a}, {b}] did not converge: {message.splitlines()[0]}", best=value
            )
    if not math.isfinite(value):
        raise ConvergenceError(f"quadrature on [{a}, {b}] returned {value}", best=value)
    return value


def integrate_1d(f, interval, cfg: QuadratureConfig | None = None, points=None) -> float:
    """Adaptive Gauss-Kronrod integral of real f over ``interval`` (ends may be infinite)."""
    cfg = cfg or QuadratureConfig()
    a, b = interval
    if a == b:
        return 0.0
    return _quad_checked(f, a, b, cfg, points)


def integrate_1d_log(f, interval, end: str, cfg: QuadratureConfig | None = None) -> float:
    """int_a^b f(x) ln|x - e| dx with e the ``"lo"`` or ``"hi"`` end, f smooth."""
    cfg = cfg or QuadratureConfig()
    a, b = interval
    if a == b:
        return 0.0
    if end not in ("lo", "hi"):
        raise InputError(f"end must be 'lo' or 'hi', got {end!r}")
    weight = "alg-loga" if end == "lo" else "alg-logb"
    return _quad_checked(f, a, b, cfg, weight=weight, wvar=(0.0, 0.0))


def integrate_2d(f, x_interval, y_interval, cfg: QuadratureConfig | None = None) -> float:
    """Adaptive 2-D cubature of a vectorised f(x, y) over a rectangle.

    ``f`` receives two 1-D arrays of equal length and returns an array.
    """
    cfg = cfg or QuadratureConfig()

    def g(pts):
        return f(pts[:, 0], pts[:, 1])

    res = integrate.cubature(
        g,
        [x_interval[0], y_interval[0]],
        [x_interval[1], y_interval[1]],
        rule="gk21",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_subdivisions=cfg.max_subdivisions * 100,
    )
    value = float(res.estimate)
    if res.status != "converged" or not math.isfinite(value):
        raise ConvergenceError(f"2-D cubature did not converge (error {res.error:.3g})", best=value)
    return value


def principal_value_1d(f, x0, interval, cfg: QuadratureConfig | None = None) -> float:
    """PV int_a^b f(x)/(x - x0) dx for f smooth at x0.

    Uses int (f(x) - f(x0))/(x - x0) dx + f(x0) ln((b - x0)/(x0 - a)); the
    regular part is split at x0 so the quadrature never samples the pole.
    """
    cfg = cfg or QuadratureConfig()
    a, b = interval
    if not a < x0 < b:
        return integrate_1d(lambda x: f(x) / (x - x0), interval, cfg)
    f0 = f(x0)
    if not math.isfinite(f0):
        raise InputError(f"f is not finite at the pole x0={x0}")

    def regular(x):
        return (f(x) - f0) / (x - x0)

    total = integrate_1d(regular, (a, x0), cfg) + integrate_1d(regular, (x0, b), cfg)
    return total + f0 * math.log((b - x0) / (x0 - a))


# ---------------------------------------------------------------------------
# Monte Carlo


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise InputError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def batch_points(cfg: McConfig, dim: int, batch: int) -> np.ndarray:
    """The unit-cube points of one batch; depends only on (cfg, dim, batch)."""
    child = np.random.SeedSequence(cfg.seed).spawn(cfg.batches)[batch]
    rng = np.random.Generator(np.random.PCG64(child))
    n = cfg.per_batch
    if cfg.sequence_kind == PSEUDO_RANDOM:
        return rng.random((n, dim))
    # each batch is an independent scramble of the same Sobol sequence
    sampler = qmc.Sobol(dim, scramble=True, seed=rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return sampler.random(n)


def mc_integrate(f, dim: int, cfg: McConfig | None = None, domain_map=None, threads: int | None = None) -> McEstimate:
    """Estimate int over the unit cube of f(map(u)) * jacobian(u).

    ``domain_map(u)`` returns ``(x, jac)``; without it f is integrated over
    the unit cube directly.  ``f`` maps an (n, dim) array to shape (n,) or
    (n, m).  Batches are independent streams spawned from the seed, so the
    result is identical for any thread count.
    """
    cfg = cfg or McConfig()

    def run(b):
        u = batch_points(cfg, dim, b)
        if domain_map is None:
            x, jac = u, 1.0
        else:
            x, jac = domain_map(u)
        vals = np.asarray(f(x))
        vals = vals * (jac if np.ndim(jac) == 0 or vals.ndim == 1 else np.asarray(jac)[:, None])
        bad = ~np.isfinite(vals)
        if np.any(bad):
            row = int(np.argwhere(bad)[0][0])
            raise NonFiniteIntegrandError(
                f"integrand not finite at sample {row} of batch {b}: x={np.asarray(x)[row].tolist()}",
                point=np.asarray(x)[row],
            )
        return vals.mean(axis=0)

    nthreads = threads or thread_count()
    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            means = list(pool.map(run, range(cfg.batches)))
    else:
        means = [run(b) for b in range(cfg.batches)]
    means = np.asarray(means, dtype=complex)
    value = means.mean(axis=0)
    scale = math.sqrt(cfg.batches)
    stderr = (means.real.std(axis=0, ddof=1) / scale, means.imag.std(axis=0, ddof=1) / scale)
    if value.ndim == 0:
        value = complex(value)
        stderr = (float(stderr[0]), float(stderr[1]))
    return McEstimate(value=value, stderr=stderr, samples_used=cfg.per_batch * cfg.batches, batch_means=means)


# ---------------------------------------------------------------------------
# i0 regulator


@dataclass(frozen=True)
class EtaExtrapolation:
    value: complex
    uncertainty: tuple[float, float]
    warning: bool
    eta_grid: tuple[float, ...]
    values: tuple[complex, ...]


def check_eta_grid(eta_grid) -> tuple[float, ...]:
    grid = tuple(float(e) for e in eta_grid)
    if len(grid) < 2 or any(e <= 0 for e in grid) or any(b >= a for a, b in zip(grid, grid[1:])):
        raise InputError(f"eta grid must be >= 2 strictly decreasing positive values, got {grid}")
    return grid


def linear_extrapolate(eta_grid, values):
    """Least-squares fit values = a + b eta; returns (a, residual rms (re, im))."""
    eta = np.asarray(eta_grid, dtype=float)
    vals = np.asarray(values, dtype=complex)
    design = np.column_stack([np.ones_like(eta), eta])
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    resid = vals - design @ coef
    return coef[0], (float(np.sqrt(np.mean(resid.real**2))), float(np.sqrt(np.mean(resid.imag**2))))


def ieps_extrapolate(F, eta_grid=DEFAULT_ETA_GRID, values=None, warn_fraction: float = 0.05) -> EtaExtrapolation:
    """Evaluate F at each eta and extrapolate linearly to eta -> 0+.

    The warning flag is raised when the linear fit leaves a residual larger
    than ``warn_fraction`` of the spread of F over the grid, i.e. when F is
    visibly not affine in eta (e.g. it diverges as eta -> 0).
    """
    grid = check_eta_grid(eta_grid)
    vals = np.asarray([complex(F(e)) for e in grid] if values is None else values, dtype=complex)
    a, (r_re, r_im) = linear_extrapolate(grid, vals)
    spread = float(np.max(np.abs(vals - vals[-1])))
    warn = bool(math.hypot(r_re, r_im) > warn_fraction * spread + 1e-300) if spread > 0 else False
    return EtaExtrapolation(complex(a), (r_re, r_im), warn, grid, tuple(complex(v) for v in vals))
