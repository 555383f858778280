"""Tests for the finite tables and the affine bracket.

The oracle here is an independent matrix layer: basis elements are
rebuilt as plain Fraction matrices and brackets are checked against
direct matrix commutators.
"""
from __future__ import annotations

import random
from fractions import Fraction

import pytest

from wakifock.liealg import (
    AffineElement,
    FiniteIndex,
    GenIndex,
    affine_bracket,
    build_algebra,
    cartan_involution,
    height_filter,
)

Q = Fraction


# ---------------------------------------------------------------- oracle

def mat_of(idx: FiniteIndex, size: int):
    m = [[Q(0)] * size for _ in range(size)]
    if idx.kind == "root":
        m[idx.i - 1][idx.j - 1] = Q(1)
    else:
        m[idx.i - 1][idx.i - 1] = Q(1)
        m[idx.i][idx.i] = Q(-1)
    return m


def mat_mul(a, b):
    n = len(a)
    return [
        [sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)]
        for i in range(n)
    ]


def mat_comm(a, b):
    ab, ba = mat_mul(a, b), mat_mul(b, a)
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(ab, ba)]


def mat_trace(a):
    return sum(a[i][i] for i in range(len(a)))


def elem_to_matrix(alg, coeffs: dict):
    size = alg.rank + 1
    m = [[Q(0)] * size for _ in range(size)]
    for idx, c in coeffs.items():
        em = mat_of(idx, size)
        for i in range(size):
            for j in range(size):
                m[i][j] += c * em[i][j]
    return m


# ------------------------------------------------------------ finite part

def test_a1_relations():
    alg = build_algebra("A1")
    E, H, F = alg.index("a1"), alg.index("1"), alg.index("-a1")
    assert alg.finite_bracket(E, F) == {H: 1}
    assert alg.finite_bracket(H, E) == {E: 2}
    assert alg.finite_bracket(H, F) == {F: -2}
    assert alg.finite_bracket(E, E) == {}


def test_a2_positive_roots():
    alg = build_algebra("A2")
    labels = [r.label for r in alg.positive_roots]
    assert labels == ["a1", "a2", "a12"]
    assert alg.index("a12").height == 2


def test_a2_composite_root_sign():
    # e12*e23 = e13 fixes [E_a1, E_a2] = +E_a12
    alg = build_algebra("A2")
    a1, a2, a12 = alg.index("a1"), alg.index("a2"), alg.index("a12")
    assert alg.finite_bracket(a1, a2) == {a12: 1}
    assert alg.finite_bracket(a2, a1) == {a12: -1}


def test_kappa_trace_oracle():
    alg = build_algebra("A2")
    size = 3
    for a in alg.basis:
        for b in alg.basis:
            expected = mat_trace(mat_mul(mat_of(a, size), mat_of(b, size)))
            assert alg.kappa(a, b) == expected
    assert alg.kappa(alg.index("a1"), alg.index("-a1")) == 1
    assert alg.kappa(alg.index("1"), alg.index("1")) == 2
    assert alg.kappa(alg.index("1"), alg.index("2")) == -1


def test_structure_constants_match_matrix_oracle():
    for series in ("A1", "A2", "A3"):
        alg = build_algebra(series)
        size = alg.rank + 1
        for a in alg.basis:
            for b in alg.basis:
                got = elem_to_matrix(alg, alg.finite_bracket(a, b))
                want = mat_comm(mat_of(a, size), mat_of(b, size))
                assert got == want, (series, a.label, b.label)


def test_build_rejects_unknown_series():
    with pytest.raises(ValueError):
        build_algebra("B2")
    with pytest.raises(ValueError):
        build_algebra("A0")


def test_eta_values():
    alg = build_algebra("A2")
    assert alg.index("a1").eta == 0
    assert alg.index("a12").eta == 0
    assert alg.index("-a2").eta == 1
    assert alg.index("1").eta == 1


def test_label_round_trip():
    for series in ("A1", "A3"):
        alg = build_algebra(series)
        for a in alg.basis:
            assert alg.index(a.label) == a


# ------------------------------------------------------------- membership

def test_genindex_membership():
    alg = build_algebra("A1")
    E, H, F = alg.index("a1"), alg.index("1"), alg.index("-a1")
    assert GenIndex(E, 0).membership == "A+"
    assert GenIndex(F, 0).membership == "A-"
    assert GenIndex(H, 0).membership == "neither"
    assert GenIndex(F, 1).membership == "A+"
    assert GenIndex(E, -2).membership == "A-"


def test_plus_basis_count_a1():
    # enumeration oracle: {(E,0)} plus all three directions at n = 1, 2
    alg = build_algebra("A1")
    plus = alg.plus_basis(3)
    oracle = {(a.label, 0) for a in alg.positive_roots}
    oracle |= {(a.label, n) for a in alg.basis for n in (1, 2)}
    assert {(g.a.label, g.n) for g in plus} == oracle
    assert len(plus) == 7


def test_basis_heights_sign():
    alg = build_algebra("A2")
    for g in alg.plus_basis(4):
        assert g.n >= 0
        if g.n == 0:
            assert g.a.kind == "root" and g.a.is_positive
    for g in alg.minus_basis(4):
        assert g.n <= 0
        if g.n == 0:
            assert g.a.kind == "root" and not g.a.is_positive


# ---------------------------------------------------------- affine bracket

def rand_element(alg, rng, nmax=3, with_kd=True):
    x = alg.zero()
    for _ in range(rng.randint(1, 3)):
        a = rng.choice(alg.basis)
        n = rng.randint(-nmax, nmax)
        c = Q(rng.randint(-4, 4), rng.randint(1, 3))
        x = x + alg.J(a, n) * c
    if with_kd and rng.random() < 0.3:
        x = x + alg.k() * rng.randint(-2, 2)
    if with_kd and rng.random() < 0.3:
        x = x + alg.d() * rng.randint(-2, 2)
    return x


def test_affine_bracket_examples():
    alg = build_algebra("A1")
    E1 = alg.J("a1", 1)
    Fm1 = alg.J("-a1", -1)
    got = affine_bracket(E1, Fm1)
    assert got == alg.J("1", 0) + alg.k()  # kappa(E,F) = 1
    for n in (-2, 0, 3):
        x = alg.J("a1", n)
        assert affine_bracket(alg.d(), x) == x * n
        assert affine_bracket(alg.k(), x) == alg.zero()


def test_cocycle_grading():
    alg = build_algebra("A2")
    rng = random.Random(7)
    for _ in range(60):
        a, b = rng.choice(alg.basis), rng.choice(alg.basis)
        m, n = rng.randint(-3, 3), rng.randint(-3, 3)
        br = affine_bracket(alg.J(a, m), alg.J(b, n))
        if m + n != 0:
            assert br.k_coeff == 0
        else:
            assert br.k_coeff == m * alg.kappa(a, b)


def test_jacobi_200_random_triples():
    rng = random.Random(11)
    for series in ("A1", "A2"):
        alg = build_algebra(series)
        for _ in range(100):
            x = rand_element(alg, rng)
            y = rand_element(alg, rng)
            z = rand_element(alg, rng)
            total = (
                affine_bracket(x, affine_bracket(y, z))
                + affine_bracket(y, affine_bracket(z, x))
                + affine_bracket(z, affine_bracket(x, y))
            )
            assert total == alg.zero()


def test_bracket_loop_part_matches_matrix_oracle():
    # loop components of [J_{a,m}, J_{b,n}] agree with matrix commutators
    alg = build_algebra("A2")
    rng = random.Random(3)
    for _ in range(40):
        a, b = rng.choice(alg.basis), rng.choice(alg.basis)
        m, n = rng.randint(-2, 2), rng.randint(-2, 2)
        br = affine_bracket(alg.J(a, m), alg.J(b, n))
        coeffs = {}
        for g, c in br.terms.items():
            assert g.n == m + n
            coeffs[g.a] = c
        got = elem_to_matrix(alg, coeffs)
        want = mat_comm(mat_of(a, 3), mat_of(b, 3))
        assert got == want


# -------------------------------------------------------------- involution

def test_sigma_examples():
    alg = build_algebra("A2")
    assert cartan_involution(alg.J("a1", 3)) == alg.J("-a1", -3)
    assert cartan_involution(alg.J("1", 2)) == -alg.J("1", -2)


def test_sigma_is_involution():
    rng = random.Random(5)
    for series in ("A1", "A2"):
        alg = build_algebra(series)
        for _ in range(30):
            x = rand_element(alg, rng)
            assert cartan_involution(cartan_involution(x)) == x


def test_sigma_is_automorphism():
    rng = random.Random(13)
    for series in ("A1", "A2"):
        alg = build_algebra(series)
        for _ in range(60):
            x = rand_element(alg, rng)
            y = rand_element(alg, rng)
            lhs = cartan_involution(affine_bracket(x, y))
            rhs = affine_bracket(cartan_involution(x), cartan_involution(y))
            assert lhs == rhs


def test_sigma_swaps_triangular_halves():
    alg = build_algebra("A2")
    for g in alg.plus_basis(3):
        img = cartan_involution(alg.J(g.a, g.n))
        for h in img.terms:
            assert h.membership == "A-"


# ------------------------------------------------------------ height filter

def test_height_filter_examples():
    alg = build_algebra("A1")
    assert height_filter(alg.J("a1", 5), 3) == alg.zero()
    x = alg.J("a1", 2) + alg.J("-a1", 4)
    assert height_filter(x, 4) == alg.J("a1", 2)
    y = alg.J("a1", 1) + alg.k() * 2 + alg.d()
    assert height_filter(y, 2) == y  # k and d sit at height 0


def test_tables_json():
    alg = build_algebra("A1")
    data = alg.to_json()
    assert set(data["roots"]) == {"a1", "-a1"}
    assert any(row[:3] == ["a1", "-a1", "1"] for row in data["f"])  # [E,F] = H
    assert any(row[:2] == ["a1", "-a1"] and row[2] == "1" for row in data["kappa"])
