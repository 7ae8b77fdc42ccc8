import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bec_polaron import diagrams as dg
from bec_polaron.errors import InputError, SingularityError


def brute_force_matchings(n):
    """Every perfect matching, found by pairing consecutive entries of all permutations."""
    seen = set()
    for perm in itertools.permutations(range(1, 2 * n + 1)):
        seen.add(tuple(sorted(tuple(sorted(perm[2 * i : 2 * i + 2])) for i in range(n))))
    return seen


def connected_by_overlap(arcs):
    """Union-find over arcs whose open intervals intersect."""
    parent = list(range(len(arcs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in itertools.combinations(range(len(arcs)), 2):
        (i, j), (k, l) = arcs[a], arcs[b]
        if max(i, k) < min(j, l):
            parent[find(a)] = find(b)
    return len({find(i) for i in range(len(arcs))}) == 1


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_enumeration_matches_brute_force(n):
    got = [p.arcs for p in dg.enumerate_pairings(n)]
    assert len(got) == len(set(got)) == dg.double_factorial_odd(n)
    assert set(got) == brute_force_matchings(n)
    assert got == sorted(got)


def test_small_orders():
    assert [p.arcs for p in dg.enumerate_pairings(1)] == [((1, 2),)]
    assert len(dg.enumerate_pairings(2)) == 3
    assert len(dg.enumerate_pairings(3)) == 15


@pytest.mark.parametrize("n", [0, 7, 2.0, True])
def test_order_out_of_range(n):
    with pytest.raises(InputError):
        dg.enumerate_pairings(n)


def test_irreducible_examples():
    assert not dg.is_irreducible(dg.Pairing.parse("(1,2)(3,4)"))
    assert dg.is_irreducible(dg.Pairing.parse("(1,3)(2,4)"))
    assert dg.is_irreducible(dg.Pairing.parse("(1,4)(2,3)"))


@pytest.mark.parametrize("n", range(1, 7))
def test_counts(n):
    c = dg.diagram_counts(n)
    assert c.total == math.factorial(2 * n) // 2**n == c.distinct * math.factorial(n)
    assert c.distinct == dg.double_factorial_odd(n)


def test_irreducible_counts():
    # 1, 2 and 10 from the drawn blocks; 74 and 706 from enumeration (brute force oracle for 74)
    assert [dg.diagram_counts(n).irreducible for n in range(1, 6)] == [1, 2, 10, 74, 706]
    brute4 = sum(1 for arcs in brute_force_matchings(4) if connected_by_overlap(arcs))
    assert brute4 == 74


@pytest.mark.parametrize("n", range(1, 6))
def test_cut_test_equals_connectivity(n):
    for p in dg.iter_pairings(n):
        d = dg.segment_descriptor(p)
        assert dg.is_irreducible(p) == connected_by_overlap(p.arcs) == all(d.segments)


def test_segment_descriptors():
    assert dg.segment_descriptor(dg.Pairing.parse("(1,2)")).segments == (frozenset({0}),)
    nested = dg.segment_descriptor(dg.Pairing.parse("(1,4)(2,3)")).segments
    assert nested == (frozenset({0}), frozenset({0, 1}), frozenset({0}))
    crossed = dg.segment_descriptor(dg.Pairing.parse("(1,3)(2,4)")).segments
    assert crossed == (frozenset({0}), frozenset({0, 1}), frozenset({1}))


def test_evaluate_examples():
    nested = dg.segment_descriptor(dg.Pairing.parse("(1,4)(2,3)"))
    crossed = dg.segment_descriptor(dg.Pairing.parse("(1,3)(2,4)"))
    assert dg.evaluate_descriptor(nested, [1, 2, 1]) == 0.5
    assert dg.evaluate_descriptor(crossed, [1, 2, 3]) == pytest.approx(1 / 6)
    total = dg.evaluate_descriptor(nested, [1, 2, 1]) + dg.evaluate_descriptor(crossed, [1, 2, 3])
    assert total == pytest.approx(2 / 3, rel=1e-15)
    with pytest.raises(SingularityError):
        dg.evaluate_descriptor(crossed, [1, 0, 3])
    with pytest.raises(InputError):
        dg.evaluate_descriptor(crossed, [1, 2])


def test_first_order_sign():
    d = dg.segment_descriptor(dg.Pairing.parse("(1,2)"))
    assert dg.evaluate_descriptor(d, [2.0]) == -0.5
    assert dg.self_energy_sign(1) * dg.evaluate_descriptor(d, [2.0]) == -0.5


complex_nonzero = st.complex_numbers(min_magnitude=1e-2, max_magnitude=1e2, allow_nan=False, allow_infinity=False)


@given(complex_nonzero, complex_nonzero, complex_nonzero)
def test_second_order_identity(a, b, c):
    nested, crossed = (dg.segment_descriptor(dg.Pairing.parse(s)) for s in ("(1,4)(2,3)", "(1,3)(2,4)"))
    total = dg.evaluate_descriptor(nested, [a, b, a]) + dg.evaluate_descriptor(crossed, [a, b, c])
    expected = (a + c) / (a * a * b * c)
    assert abs(total - expected) <= 1e-12 * (abs(1 / (a * a * b)) + abs(1 / (a * b * c)))


def test_pairing_parse_round_trip_and_errors():
    for p in dg.iter_pairings(3):
        assert dg.Pairing.parse(str(p)) == p
    for bad in ["(1,2", "(1,1)", "(1,2)(2,3)", "(a,b)", "(1,2,3)"]:
        with pytest.raises(InputError):
            dg.Pairing.parse(bad)


def test_self_energy_integrand_vectorised():
    rng = np.random.default_rng(0)
    arcs = rng.normal(size=(2, 5, 3))
    p = np.array([0.0, 0.0, 0.3])
    eps = lambda k: 0.5 * k * np.sqrt(k * k + 4)  # noqa: E731
    imp = lambda q: 0.5 * q * q  # noqa: E731
    omega = -0.2 + 0.0j
    got = dg.self_energy_integrand(2, arcs, p, omega, eps, imp)
    for i in range(5):
        k, kp = arcs[0, i], arcs[1, i]
        a = eps(np.linalg.norm(k)) + imp(np.linalg.norm(p - k)) - omega
        c = eps(np.linalg.norm(kp)) + imp(np.linalg.norm(p - kp)) - omega
        b = eps(np.linalg.norm(k)) + eps(np.linalg.norm(kp)) + imp(np.linalg.norm(p - k - kp)) - omega
        assert got[i] == pytest.approx(-(a + c) / (a * a * b * c), rel=1e-12)
