"""Perturbation-series diagrams for the impurity Green's function.

A diagram of order n has 2n time-ordered vertices 1..2n on the impurity
line; every vertex is joined to exactly one other by a condensate
propagator (an *arc*).  Diagrams are therefore perfect matchings of
{1..2n}.  Between vertex s and s+1 lies gap s; the arcs spanning it fix the
energy denominator of that stretch of impurity line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .errors import InputError, SingularityError

N_MAX_DEFAULT = 6


@dataclass(frozen=True)
class Pairing:
    order: int
    arcs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        arcs = tuple(sorted((int(min(i, j)), int(max(i, j))) for i, j in self.arcs))
        object.__setattr__(self, "arcs", arcs)
        if self.order < 1 or len(arcs) != self.order:
            raise InputError(f"order {self.order} needs exactly {self.order} arcs, got {len(arcs)}")
        seen = sorted(v for arc in arcs for v in arc)
        if seen != list(range(1, 2 * self.order + 1)) or any(i == j for i, j in arcs):
            raise InputError(f"arcs {arcs} are not a perfect matching of 1..{2 * self.order}")

    @classmethod
    def parse(cls, text: str) -> "Pairing":
        """Parse canonical arc notation such as ``(1,3)(2,4)``."""
        body = text.strip()
        if not (body.startswith("(") and body.endswith(")")):
            raise InputError(f"malformed pairing {text!r}")
        try:
            arcs = [tuple(int(v) for v in chunk.split(",")) for chunk in body[1:-1].split(")(")]
        except ValueError:
            raise InputError(f"malformed pairing {text!r}") from None
        if any(len(a) != 2 for a in arcs):
            raise InputError(f"malformed pairing {text!r}")
        return cls(len(arcs), tuple(arcs))

    def __str__(self):
        return "".join(f"({i},{j})" for i, j in self.arcs)


@dataclass(frozen=True)
class SegmentDescriptor:
    """Active arcs (indices into ``Pairing.arcs``) on each of the 2n-1 internal gaps."""

    order: int
    segments: tuple[frozenset, ...]


@dataclass(frozen=True)
class DiagramCounts:
    n: int
    total: int  # L_n
    distinct: int  # D_n
    irreducible: int  # R_n

    def __post_init__(self):
        if self.total != self.distinct * math.factorial(self.n):
            raise ValueError("L_n != D_n n!")
        if self.irreducible > self.distinct:
            raise ValueError("R_n > D_n")


def _check_order(n, n_max):
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1 or n > n_max:
        raise InputError(f"order must be an integer in [1, {n_max}], got {n!r}")


def iter_pairings(n: int, n_max: int = N_MAX_DEFAULT) -> Iterator[Pairing]:
    """Yield all pairings of order n in lexicographic order.

    The smallest unpaired vertex is matched with each remaining vertex in
    turn, which makes the output canonical and duplicate-free.
    """
    _check_order(n, n_max)

    def rec(free: tuple[int, ...]):
        if not free:
            yield ()
            return
        first, rest = free[0], free[1:]
        for idx, partner in enumerate(rest):
            remaining = rest[:idx] + rest[idx + 1 :]
            for tail in rec(remaining):
                yield ((first, partner),) + tail

    for arcs in rec(tuple(range(1, 2 * n + 1))):
        yield Pairing(n, arcs)


def enumerate_pairings(n: int, n_max: int = N_MAX_DEFAULT) -> list[Pairing]:
    return list(iter_pairings(n, n_max))


def is_irreducible(p: Pairing) -> bool:
    """True iff every internal gap is spanned by some arc.

    An unspanned gap is a bare impurity line; cutting it splits the diagram
    into two lower-order pieces.
    """
    return all(any(i <= s < j for i, j in p.arcs) for s in range(1, 2 * p.order))


def double_factorial_odd(n: int) -> int:
    """(2n-1)!!"""
    return math.prod(range(1, 2 * n, 2))


def diagram_counts(n: int, n_max: int = N_MAX_DEFAULT) -> DiagramCounts:
    _check_order(n, n_max)
    total = math.factorial(2 * n) // 2**n
    irreducible = sum(1 for p in iter_pairings(n, n_max) if is_irreducible(p))
    return DiagramCounts(n=n, total=total, distinct=double_factorial_odd(n), irreducible=irreducible)


def segment_descriptor(p: Pairing) -> SegmentDescriptor:
    segments = tuple(
        frozenset(a for a, (i, j) in enumerate(p.arcs) if i <= s < j) for s in range(1, 2 * p.order)
    )
    return SegmentDescriptor(p.order, segments)


def evaluate_descriptor(d: SegmentDescriptor, denoms):
    """(-1)^n prod_s 1/denoms[s].

    ``denoms`` has leading dimension 2n-1; trailing dimensions broadcast,
    so whole sample batches are evaluated at once.
    """
    denoms = np.asarray(denoms)
    if denoms.shape[0] != len(d.segments):
        raise InputError(f"expected {len(d.segments)} denominators, got {denoms.shape[0]}")
    if np.any(denoms == 0):
        raise SingularityError("zero energy denominator")
    out = np.prod(1.0 / denoms, axis=0) * (-1) ** d.order
    return out.item() if out.ndim == 0 else out


def self_energy_sign(order: int) -> int:
    """Factor turning a summed descriptor value into the self-energy kernel.

    The self-energy of order n is -prod(w) prod_s 1/D_s, with D_s the
    positive-energy denominators.  The descriptor value already carries
    (-1)^n, so this factor is -(-1)^n.
    """
    return -((-1) ** order)


@lru_cache(maxsize=None)
def irreducible_descriptors(n: int) -> tuple[SegmentDescriptor, ...]:
    return tuple(segment_descriptor(p) for p in iter_pairings(n, max(n, N_MAX_DEFAULT)) if is_irreducible(p))


def segment_denominators(d: SegmentDescriptor, arc_momenta, p_vec, omega, eps_fn, imp_fn):
    """Physical denominators sum_{a active} eps(k_a) + E(p - sum k_a) - omega.

    ``arc_momenta`` has shape (n_arcs, ..., 3) and ``p_vec`` broadcasts
    against (..., 3).  ``omega`` may be complex (finite -i eta).
    """
    arc_momenta = np.asarray(arc_momenta, dtype=float)
    eps = eps_fn(np.linalg.norm(arc_momenta, axis=-1))
    out = []
    for active in d.segments:
        idx = sorted(active)
        q = np.asarray(p_vec, dtype=float) - arc_momenta[idx].sum(axis=0)
        out.append(eps[idx].sum(axis=0) + imp_fn(np.linalg.norm(q, axis=-1)) - omega)
    return np.stack(out)


def self_energy_integrand(n, arc_momenta, p_vec, omega, eps_fn, imp_fn):
    """Sum over irreducible order-n diagrams, coupling weights stripped.

    Returns the kernel K with S_n = (2 pi)^(-3n) int prod d^3k_a w(k_a) K.
    Arc a of every pairing carries momentum ``arc_momenta[a]``.
    """
    total = 0.0
    for d in irreducible_descriptors(n):
        total = total + evaluate_descriptor(d, segment_denominators(d, arc_momenta, p_vec, omega, eps_fn, imp_fn))
    return self_energy_sign(n) * total
