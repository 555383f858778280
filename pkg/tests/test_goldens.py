"""Packaged reference expansions reproduced by the realization."""

from fractions import Fraction

import pytest

from wakifock.liealg import build_algebra
from wakifock.realize import (
    RealizationConfig,
    golden_diff,
    list_goldens,
    load_golden,
    rho,
    widening_remainder,
)
from wakifock.weylpoly import GenIndex

Q = Fraction
A2 = build_algebra("A2")


@pytest.mark.parametrize("name", list_goldens())
def test_golden_matches_exactly(name):
    case = load_golden(name, alg=A2)
    cfg = RealizationConfig(A2, case.cutoff)
    got = rho(cfg, A2.J(case.generator.a, case.generator.n))
    assert golden_diff(got, case.expected) == []


def test_golden_diff_reports_mismatch():
    case = load_golden("a2_rho_a1_n1", alg=A2)
    cfg = RealizationConfig(A2, case.cutoff)
    got = rho(cfg, A2.J(case.generator.a, case.generator.n))
    broken = got + got
    assert golden_diff(broken, case.expected) != []


def test_remainder_monomials_at_target_seven():
    # quadratic/cubic remainder coefficients for the first simple root at
    # loop index 0, read off at target (a1, 7)
    cfg = RealizationConfig(A2, 8)
    rem, cert = widening_remainder(cfg, "a1", 0)
    assert cert.verdict == "widening"
    poly = rem.terms[GenIndex(A2.index("a1"), 7)]

    mono1 = (
        (GenIndex(A2.index("-a1"), 2), 1),
        (GenIndex(A2.index("-a2"), 2), 1),
        (GenIndex(A2.index("a12"), 3), 1),
    )
    mono2 = (
        (GenIndex(A2.index("1"), 2), 2),
        (GenIndex(A2.index("1"), 3), 1),
    )
    assert poly.coeff_of(mono1) == Q(1)
    assert poly.coeff_of(mono2) == Q(4)
    # every monomial at target 7 keeps its variables at loop index <= 3
    for mono in poly.terms:
        assert all(v.n <= 3 for v, _ in mono)
