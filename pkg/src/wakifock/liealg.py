"""Finite A-series tables and the (untwisted) affine algebra on top of them.

Basis conventions
-----------------
* The finite algebra sl_{r+1} is presented in the defining representation:
  root vectors are elementary matrices e_{ij} (i != j), Cartan generators
  are H_i = e_{ii} - e_{i+1,i+1}.
* All structure constants and the pairing kappa (trace form of the
  defining representation) are generated from these matrices, never
  hand-entered.
* Root labels: "a1", "a2", "a12" for e_{12}, e_{23}, e_{13} and so on
  (the digits list the simple roots in the decomposition); negatives get
  a leading minus.  Cartan labels are the bare numerals "1", "2", ...
* Affine bracket: [J_{a,m}, J_{b,n}] = f_ab^c J_{c,m+n}
  + m delta_{m+n,0} kappa(a,b) k, with [d, J_{a,n}] = n J_{a,n} and k
  central.  The height of J_{a,n} is n.
* The involution sends e_{ij} to -(-1)^(j-i) e_{ji} and H_i to -H_i
  (conjugated transpose-negation); on loop indices n -> -n.  On k and d
  it acts by -1: this is the unique extension to an automorphism, which
  the bracket with the cocycle term enforces.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

__all__ = [
    "AffineElement",
    "AlgebraTables",
    "FiniteIndex",
    "GenIndex",
    "affine_bracket",
    "build_algebra",
    "cartan_involution",
    "height_filter",
]

Q = Fraction


@dataclass(frozen=True, order=True)
class FiniteIndex:
    """A finite-algebra direction: root e_{ij} (i != j) or Cartan H_i."""

    kind: str  # "root" | "cartan"
    i: int
    j: int = 0  # unused for cartan

    @property
    def is_positive(self) -> bool:
        return self.kind == "root" and self.i < self.j

    @property
    def eta(self) -> int:
        # 0 exactly on positive roots
        return 0 if self.is_positive else 1

    @property
    def height(self) -> int:
        if self.kind == "cartan":
            return 0
        return self.j - self.i

    @property
    def label(self) -> str:
        if self.kind == "cartan":
            return str(self.i)
        lo, hi = min(self.i, self.j), max(self.i, self.j)
        body = "a" + "".join(str(s) for s in range(lo, hi))
        return body if self.is_positive else "-" + body


def _parse_label(text: str) -> FiniteIndex:
    text = text.strip()
    m = re.fullmatch(r"(-?)a(\d+)", text)
    if m:
        digits = [int(ch) for ch in m.group(2)]
        if digits != list(range(digits[0], digits[0] + len(digits))):
            raise ValueError(f"root label digits must be consecutive: {text!r}")
        i, j = digits[0], digits[-1] + 1
        if m.group(1):
            i, j = j, i
        return FiniteIndex("root", i, j)
    if re.fullmatch(r"\d+", text):
        return FiniteIndex("cartan", int(text))
    raise ValueError(f"cannot parse finite index label {text!r}")


@dataclass(frozen=True, order=True)
class GenIndex:
    """Affine generator index (a, n)."""

    a: FiniteIndex
    n: int

    @property
    def membership(self) -> str:
        if self.n >= 1:
            return "A+"
        if self.n <= -1:
            return "A-"
        if self.a.kind == "root":
            return "A+" if self.a.is_positive else "A-"
        return "neither"

    @property
    def label(self) -> str:
        return f"({self.a.label},{self.n})"


Matrix = dict[tuple[int, int], Fraction]


def _basis_matrix(idx: FiniteIndex) -> Matrix:
    if idx.kind == "root":
        return {(idx.i, idx.j): Q(1)}
    return {(idx.i, idx.i): Q(1), (idx.i + 1, idx.i + 1): Q(-1)}


def _mat_commutator(a: Matrix, b: Matrix) -> Matrix:
    out: Matrix = {}
    for (i, k1), va in a.items():
        for (k2, j), vb in b.items():
            if k1 == k2:
                out[(i, j)] = out.get((i, j), Q(0)) + va * vb
    for (i, k1), vb in b.items():
        for (k2, j), va in a.items():
            if k1 == k2:
                out[(i, j)] = out.get((i, j), Q(0)) - vb * va
    return {k: v for k, v in out.items() if v}


def _mat_trace_product(a: Matrix, b: Matrix) -> Fraction:
    return sum((va * b.get((j, i), Q(0)) for (i, j), va in a.items()), Q(0))


class AlgebraTables:
    """Immutable structure constants, pairing and involution data for sl_{r+1}."""

    def __init__(self, series: str, rank: int):
        self.series = series
        self.rank = rank
        size = rank + 1
        pos = [
            FiniteIndex("root", i, j)
            for j in range(2, size + 1)
            for i in range(1, j)
        ]
        pos.sort(key=lambda a: (a.height, a.i))
        cartans = [FiniteIndex("cartan", i) for i in range(1, rank + 1)]
        neg = [FiniteIndex("root", a.j, a.i) for a in pos]
        self.positive_roots = tuple(pos)
        self.cartans = tuple(cartans)
        self.negative_roots = tuple(neg)
        self.basis = tuple(pos + cartans + neg)
        self._by_label = {a.label: a for a in self.basis}
        mats = {a: _basis_matrix(a) for a in self.basis}
        self._f: dict[tuple[FiniteIndex, FiniteIndex], dict[FiniteIndex, Fraction]] = {}
        self._kappa: dict[tuple[FiniteIndex, FiniteIndex], Fraction] = {}
        for a in self.basis:
            for b in self.basis:
                self._f[(a, b)] = self._decompose(_mat_commutator(mats[a], mats[b]))
                self._kappa[(a, b)] = _mat_trace_product(mats[a], mats[b])
        self._sigma = {}
        for a in self.basis:
            if a.kind == "cartan":
                self._sigma[a] = (a, Q(-1))
            else:
                sign = Q(-((-1) ** abs(a.j - a.i)))
                self._sigma[a] = (FiniteIndex("root", a.j, a.i), sign)

    def _decompose(self, m: Matrix) -> dict[FiniteIndex, Fraction]:
        """Write a traceless matrix in the e_{ij}/H_i basis."""
        out: dict[FiniteIndex, Fraction] = {}
        diag = [m.get((i, i), Q(0)) for i in range(1, self.rank + 2)]
        assert sum(diag) == 0
        acc = Q(0)
        for i in range(1, self.rank + 1):
            acc += diag[i - 1]  # coefficient of H_i is the partial sum
            if acc:
                out[FiniteIndex("cartan", i)] = acc
        for (i, j), v in m.items():
            if i != j and v:
                out[FiniteIndex("root", i, j)] = v
        return out

    # -- lookups -------------------------------------------------------

    def index(self, label: str) -> FiniteIndex:
        a = self._by_label.get(label.strip())
        if a is None:
            a = _parse_label(label)
            if a not in self._by_label.values():
                raise ValueError(f"{label!r} is not a basis label of {self.series}")
        return a

    def finite_bracket(self, a: FiniteIndex, b: FiniteIndex) -> dict[FiniteIndex, Fraction]:
        return dict(self._f[(a, b)])

    def kappa(self, a: FiniteIndex, b: FiniteIndex) -> Fraction:
        return self._kappa[(a, b)]

    def sigma_finite(self, a: FiniteIndex) -> tuple[FiniteIndex, Fraction]:
        return self._sigma[a]

    # -- affine layer ----------------------------------------------------

    def zero(self) -> "AffineElement":
        return AffineElement(self, {}, Q(0), Q(0))

    def J(self, a: "FiniteIndex | str", n: int) -> "AffineElement":
        if isinstance(a, str):
            a = self.index(a)
        return AffineElement(self, {GenIndex(a, n): Q(1)}, Q(0), Q(0))

    def k(self) -> "AffineElement":
        return AffineElement(self, {}, Q(1), Q(0))

    def d(self) -> "AffineElement":
        return AffineElement(self, {}, Q(0), Q(1))

    def plus_basis(self, K: int) -> list[GenIndex]:
        """Basis of n_+ modulo the ideal of heights >= K, in slot order."""
        out = [GenIndex(a, 0) for a in self.positive_roots]
        for n in range(1, K):
            out.extend(GenIndex(a, n) for a in self.basis)
        return out

    def minus_basis(self, K: int) -> list[GenIndex]:
        out = [GenIndex(a, 0) for a in self.negative_roots]
        for n in range(1, K):
            out.extend(GenIndex(a, -n) for a in self.basis)
        return out

    def to_json(self) -> dict:
        roots = [a.label for a in self.positive_roots + self.negative_roots]
        f_rows = []
        kappa_rows = []
        for a in self.basis:
            for b in self.basis:
                for c, v in self._f[(a, b)].items():
                    f_rows.append([a.label, b.label, c.label, str(v)])
                kv = self._kappa[(a, b)]
                if kv:
                    kappa_rows.append([a.label, b.label, str(kv)])
        return {
            "series": self.series,
            "rank": self.rank,
            "roots": roots,
            "cartans": [a.label for a in self.cartans],
            "f": f_rows,
            "kappa": kappa_rows,
        }

    def __repr__(self):
        return f"AlgebraTables({self.series})"


def build_algebra(series: str) -> AlgebraTables:
    m = re.fullmatch(r"A(\d+)", series.strip())
    if not m or int(m.group(1)) < 1:
        raise ValueError(f"unsupported series {series!r} (A-series only, rank >= 1)")
    return AlgebraTables(f"A{int(m.group(1))}", int(m.group(1)))


class AffineElement:
    """Finite Q-linear combination of J_{a,n} plus k and d components."""

    __slots__ = ("alg", "terms", "k_coeff", "d_coeff")

    def __init__(self, alg: AlgebraTables, terms: Mapping[GenIndex, Fraction],
                 k_coeff: Fraction = Q(0), d_coeff: Fraction = Q(0)):
        self.alg = alg
        self.terms = {g: Q(c) for g, c in terms.items() if c}
        self.k_coeff = Q(k_coeff)
        self.d_coeff = Q(d_coeff)

    def __add__(self, other: "AffineElement") -> "AffineElement":
        if not isinstance(other, AffineElement):
            return NotImplemented
        if other.alg is not self.alg:
            raise ValueError("mixing elements of different algebras")
        terms = dict(self.terms)
        for g, c in other.terms.items():
            terms[g] = terms.get(g, Q(0)) + c
        return AffineElement(self.alg, terms,
                             self.k_coeff + other.k_coeff,
                             self.d_coeff + other.d_coeff)

    def __neg__(self) -> "AffineElement":
        return self * Q(-1)

    def __sub__(self, other: "AffineElement") -> "AffineElement":
        return self + (-other)

    def __mul__(self, scalar) -> "AffineElement":
        s = Q(scalar)
        return AffineElement(
            self.alg,
            {g: c * s for g, c in self.terms.items()},
            self.k_coeff * s,
            self.d_coeff * s,
        )

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, AffineElement):
            return NotImplemented
        return (self.alg is other.alg and self.terms == other.terms
                and self.k_coeff == other.k_coeff and self.d_coeff == other.d_coeff)

    def __bool__(self):
        return bool(self.terms) or bool(self.k_coeff) or bool(self.d_coeff)

    def __repr__(self):
        parts = [f"({c})J({g.a.label},{g.n})" for g, c in sorted(
            self.terms.items(), key=lambda t: (t[0].n, t[0].a))]
        if self.k_coeff:
            parts.append(f"({self.k_coeff})k")
        if self.d_coeff:
            parts.append(f"({self.d_coeff})d")
        return " + ".join(parts) if parts else "0"


def affine_bracket(x: AffineElement, y: AffineElement) -> AffineElement:
    """[x, y] with the level cocycle and the grading derivation d."""
    if x.alg is not y.alg:
        raise ValueError("mixing elements of different algebras")
    alg = x.alg
    terms: dict[GenIndex, Fraction] = {}
    k = Q(0)

    def add(g: GenIndex, c: Fraction):
        if c:
            terms[g] = terms.get(g, Q(0)) + c

    for gx, cx in x.terms.items():
        for gy, cy in y.terms.items():
            c = cx * cy
            for tgt, f in alg._f[(gx.a, gy.a)].items():
                add(GenIndex(tgt, gx.n + gy.n), c * f)
            if gx.n + gy.n == 0:
                k += c * gx.n * alg.kappa(gx.a, gy.a)
    if x.d_coeff:
        for gy, cy in y.terms.items():
            add(gy, x.d_coeff * cy * gy.n)
    if y.d_coeff:
        for gx, cx in x.terms.items():
            add(gx, -y.d_coeff * cx * gx.n)
    return AffineElement(alg, terms, k, Q(0))


def cartan_involution(x: AffineElement) -> AffineElement:
    """The involution exchanging the two triangular halves; k, d -> -k, -d."""
    terms: dict[GenIndex, Fraction] = {}
    for g, c in x.terms.items():
        tgt, sign = x.alg.sigma_finite(g.a)
        gi = GenIndex(tgt, -g.n)
        terms[gi] = terms.get(gi, Q(0)) + sign * c
    return AffineElement(x.alg, terms, -x.k_coeff, -x.d_coeff)


def height_filter(x: AffineElement, K: int) -> AffineElement:
    """Drop components of homogeneous height >= K (the truncation ideal)."""
    if K < 1:
        raise ValueError("cutoff must be at least 1")
    return AffineElement(
        x.alg,
        {g: c for g, c in x.terms.items() if g.n < K},
        x.k_coeff,
        x.d_coeff,
    )
