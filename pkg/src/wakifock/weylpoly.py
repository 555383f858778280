"""Sparse polynomials in the loop variables X^{a,n} and truncated derivations.

A monomial is a multiset of GenIndex; polynomials are sparse maps from
monomials to coefficients.  Coefficients are Fractions or rational
functions in z, by instantiation; operands of a single expression always
share one instantiation.

A Derivation at cutoff K stores polynomials P^{b,m} for targets m < K,
using only variables with loop index < K.  All equalities between
derivations are equalities of such truncations.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .exactring import RationalFunction
from .liealg import AlgebraTables, FiniteIndex, GenIndex

__all__ = [
    "Derivation",
    "GapCertificate",
    "LoopPoly",
    "derivation_commutator",
    "gap_profile",
]

Q = Fraction

# monomials: tuples of (GenIndex, exponent), sorted loop-major
Monomial = tuple[tuple[GenIndex, int], ...]


def _gi_key(g: GenIndex):
    return (g.n, g.a.kind, g.a.i, g.a.j)


def _mono_sorted(pairs: Iterable[tuple[GenIndex, int]]) -> Monomial:
    return tuple(sorted(pairs, key=lambda p: _gi_key(p[0])))


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    acc: dict[GenIndex, int] = {}
    for g, e in m1:
        acc[g] = acc.get(g, 0) + e
    for g, e in m2:
        acc[g] = acc.get(g, 0) + e
    return _mono_sorted(acc.items())


def _mono_degree(m: Monomial) -> int:
    return sum(e for _, e in m)


def _mono_sort_key(m: Monomial):
    expanded = tuple(_gi_key(g) for g, e in m for _ in range(e))
    return (_mono_degree(m), expanded)


class LoopPoly:
    """Sparse polynomial; empty map is zero."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, object] | None = None):
        self.terms = {m: c for m, c in (terms or {}).items() if c}

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls) -> "LoopPoly":
        return cls()

    @classmethod
    def one(cls) -> "LoopPoly":
        return cls({(): Q(1)})

    @classmethod
    def const(cls, c) -> "LoopPoly":
        return cls({(): c})

    @classmethod
    def var(cls, g: GenIndex) -> "LoopPoly":
        return cls({((g, 1),): Q(1)})

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, LoopPoly):
            return NotImplemented
        terms = dict(self.terms)
        for m, c in other.terms.items():
            acc = terms.get(m)
            terms[m] = c if acc is None else acc + c
        return LoopPoly(terms)

    def __neg__(self):
        return LoopPoly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, LoopPoly):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, LoopPoly):
            out: dict[Monomial, object] = {}
            for m1, c1 in self.terms.items():
                for m2, c2 in other.terms.items():
                    m = _mono_mul(m1, m2)
                    c = c1 * c2
                    acc = out.get(m)
                    out[m] = c if acc is None else acc + c
            return LoopPoly(out)
        # scalar
        return LoopPoly({m: c * other for m, c in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, LoopPoly):
            return NotImplemented
        return self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)

    def __hash__(self):
        return hash(frozenset((m, repr(c)) for m, c in self.terms.items()))

    # -- calculus -------------------------------------------------------

    def partial(self, g: GenIndex) -> "LoopPoly":
        out: dict[Monomial, object] = {}
        for mono, c in self.terms.items():
            for idx, (h, e) in enumerate(mono):
                if h == g:
                    rest = list(mono)
                    if e == 1:
                        del rest[idx]
                    else:
                        rest[idx] = (h, e - 1)
                    m = tuple(rest)
                    add = c * e
                    acc = out.get(m)
                    out[m] = add if acc is None else acc + add
                    break
        return LoopPoly(out)

    # -- inspection -------------------------------------------------------

    def degree(self) -> int:
        return max((_mono_degree(m) for m in self.terms), default=0)

    def max_loop(self) -> int | None:
        loops = [g.n for m in self.terms for g, _ in m]
        return max(loops) if loops else None

    def variables(self) -> set[GenIndex]:
        return {g for m in self.terms for g, _ in m}

    def const_term(self):
        return self.terms.get((), Q(0))

    def coeff_of(self, mono: Monomial):
        return self.terms.get(_mono_sorted(mono), Q(0))

    def map_coeffs(self, fn: Callable) -> "LoopPoly":
        return LoopPoly({m: fn(c) for m, c in self.terms.items()})

    def __repr__(self):
        if not self.terms:
            return "0"
        bits = []
        for mono in sorted(self.terms, key=_mono_sort_key):
            c = self.terms[mono]
            body = "".join(
                f"X({g.a.label},{g.n})" + (f"^{e}" if e > 1 else "")
                for g, e in mono
            )
            bits.append(f"({c}){body or '1'}")
        return " + ".join(bits)


def _coeff_to_text(c) -> str:
    if isinstance(c, RationalFunction):
        return c.to_text()
    return str(c)


def _coeff_from_text(text: str):
    if "(" in text:
        return RationalFunction.from_text(text)
    return Fraction(text)


@dataclass(frozen=True)
class GapCertificate:
    """Per-loop-index variable bounds with a finite-window verdict.

    profile maps each stored target loop index m to the maximum variable
    loop index in P^{.,m} (None when only constants appear).  The family
    has widening gap when for every Kp there is a threshold past which
    all variables in P^{.,m} have loop index < m - Kp; the threshold may
    lie far beyond any fixed truncation (the realization remainders have
    bounds of shape ceil(m/2) + c with a generator-dependent offset c,
    so per-level thresholds outgrow small windows).  The finite-window
    verdict therefore certifies the gap m - bound(m) as growing: it is
    "widening" when the gap at the last stored target strictly exceeds
    the gap at every stored target at least two below it (the slowest
    widening profiles gain one unit of gap per two loop indices, so the
    adjacent sample is exempt).  Constant-gap tails such as plain
    quadratic tail sums keep a flat gap and stay "not-proven".  Empty
    profiles are vacuously widening.  The verdict is a statement about
    the recorded window only; recomputing at a larger cutoff must
    reproduce it for the family to count as stable.
    """

    profile: tuple[tuple[int, int | None], ...]
    verdict: str
    window: int

    def profile_dict(self) -> dict[int, int | None]:
        return dict(self.profile)


class Derivation:
    """Truncated derivation sum P^{b,m}(X) D_{b,m} with targets m < K."""

    __slots__ = ("K", "terms")

    def __init__(self, K: int, terms: Mapping[GenIndex, LoopPoly]):
        if K < 1:
            raise ValueError("cutoff must be at least 1")
        clean: dict[GenIndex, LoopPoly] = {}
        for g, p in terms.items():
            if not p:
                continue
            if g.n >= K:
                raise ValueError(f"target {g} at or beyond cutoff {K}")
            ml = p.max_loop()
            if ml is not None and ml >= K:
                raise ValueError(f"variable loop index {ml} at or beyond cutoff {K}")
            clean[g] = p
        self.K = K
        self.terms = clean

    def apply(self, poly: LoopPoly) -> LoopPoly:
        out = LoopPoly.zero()
        for g, p in self.terms.items():
            d = poly.partial(g)
            if d:
                out = out + p * d
        return out

    def __add__(self, other):
        if not isinstance(other, Derivation):
            return NotImplemented
        if other.K != self.K:
            raise ValueError("cutoff mismatch")
        terms = dict(self.terms)
        for g, p in other.terms.items():
            terms[g] = terms.get(g, LoopPoly.zero()) + p
        return Derivation(self.K, terms)

    def __neg__(self):
        return Derivation(self.K, {g: -p for g, p in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Derivation):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar):
        return Derivation(self.K, {g: p * scalar for g, p in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Derivation):
            return NotImplemented
        return self.K == other.K and self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)

    def truncate(self, K2: int) -> "Derivation":
        """Reduce the cutoff: drop targets and variable monomials >= K2."""
        if K2 > self.K:
            raise ValueError("cannot widen a truncation")
        terms = {}
        for g, p in self.terms.items():
            if g.n >= K2:
                continue
            kept = LoopPoly({
                m: c for m, c in p.terms.items()
                if all(v.n < K2 for v, _ in m)
            })
            if kept:
                terms[g] = kept
        return Derivation(K2, terms)

    def to_json(self) -> list[dict]:
        out = []
        for g in sorted(self.terms, key=lambda t: (t.n, t.a.kind, t.a.i, t.a.j)):
            poly = self.terms[g]
            rows = [
                [
                    _coeff_to_text(poly.terms[m]),
                    [[v.a.label, v.n] for v, e in m for _ in range(e)],
                ]
                for m in sorted(poly.terms, key=_mono_sort_key)
            ]
            out.append({"target": [g.a.label, g.n], "poly": rows})
        return out

    @classmethod
    def from_json(cls, K: int, data: list[dict], alg: AlgebraTables) -> "Derivation":
        terms: dict[GenIndex, LoopPoly] = {}
        for entry in data:
            label, m = entry["target"]
            tgt = GenIndex(alg.index(label), int(m))
            poly = LoopPoly.zero()
            for coeff_text, mono_rows in entry["poly"]:
                mono: dict[GenIndex, int] = {}
                for vl, vn in mono_rows:
                    g = GenIndex(alg.index(vl), int(vn))
                    mono[g] = mono.get(g, 0) + 1
                poly = poly + LoopPoly({_mono_sorted(mono.items()): _coeff_from_text(coeff_text)})
            terms[tgt] = terms.get(tgt, LoopPoly.zero()) + poly
        return cls(K, terms)

    def __repr__(self):
        bits = [
            f"[{p!r}]D({g.a.label},{g.n})"
            for g, p in sorted(self.terms.items(), key=lambda t: (t[0].n, t[0].a))
        ]
        return " + ".join(bits) if bits else "0"


def derivation_commutator(d1: Derivation, d2: Derivation) -> Derivation:
    """[d1, d2] on all stored targets; exact at the shared cutoff."""
    if d1.K != d2.K:
        raise ValueError("cutoff mismatch")
    terms: dict[GenIndex, LoopPoly] = {}
    for g, p in d2.terms.items():
        terms[g] = d1.apply(p)
    for g, p in d1.terms.items():
        terms[g] = terms.get(g, LoopPoly.zero()) - d2.apply(p)
    return Derivation(d1.K, terms)


def gap_profile(d: Derivation, mirrored: bool = False) -> GapCertificate:
    """Variable-loop bounds per target index and the widening verdict.

    With mirrored=True both indices are folded through absolute value,
    for derivations living on a two-sided chart.
    """
    by_m: dict[int, int | None] = {}
    for g, p in d.terms.items():
        if mirrored:
            loops = [abs(v.n) for mono in p.terms for v, _ in mono]
            ml = max(loops) if loops else None
            key = abs(g.n)
        else:
            ml = p.max_loop()
            key = g.n
        if key in by_m:
            prev = by_m[key]
            if prev is None or (ml is not None and ml > prev):
                by_m[key] = ml
        else:
            by_m[key] = ml
    gaps = sorted((m, m - bound) for m, bound in by_m.items() if bound is not None)
    verdict = "widening"
    if gaps:
        top_m, top_gap = gaps[-1]
        if any(g >= top_gap for m, g in gaps if m <= top_m - 2):
            verdict = "not-proven"
    return GapCertificate(tuple(sorted(by_m.items())), verdict, d.K)
