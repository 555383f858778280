"""Regulated oscillator states and their zeroth and first products.

A state is kept in four exactly representable layers over Q(z):

  * a polynomial in the gamma[0] modes times the vacuum (its constant
    term is the scalar part),
  * beta[-1] tails with polynomial coefficients,
  * gamma[-1] one-form tails with polynomial coefficients,
  * symbolic quadratic tails ``QuadSum`` standing for

        coeff * sum_k w(k) z^(alpha*k) gamma^{a,k-n}[0] beta_{b,k}[-1] |0>

    over a half-line of k (positive sector k >= k0, negative sector
    k <= -k0) or over all of Z.

Infinite sums are never materialized.  Products act on the symbolic
data; scalar outputs of the first product are resummed to closed form
in Q(z), so they stay exact at any cutoff.

All product signs follow from two contraction kernels,

    beta_{a,m}(w) gamma^{b,n}(v)  ~  +z^m d_a^b d_m^n / (w - v)
    gamma^{b,n}(w) beta_{a,m}(v)  ~  -z^m d_a^b d_m^n / (w - v)

together with one Taylor step for leftover w-side factors: the first
product reads off the (w - v)^-2 coefficient, the zeroth product the
(w - v)^-1 coefficient.  A first product of two full-line quadratic
tails diverges and raises; the sector split below is how such pairs
are regulated.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .exactring import (
    RationalFunction,
    geometric_resum,
    invert_z,
    reg,
    z_power,
)
from .liealg import AffineElement, AlgebraTables, FiniteIndex, GenIndex
from .weylpoly import LoopPoly

__all__ = [
    "FockState",
    "QuadSum",
    "SState",
    "canonical_at_z1",
    "contract",
    "expand_window",
    "grades",
    "lad_map",
    "lempi_components",
    "lempi_product",
    "p_embed",
    "product0",
    "product1",
    "s_bracket",
    "s_loop_bracket",
    "split_sectors",
    "translate",
    "TranslateImage",
]

Q = Fraction
RF = RationalFunction

_SECTORS = ("positive", "negative", "full")


def _rf(x) -> RationalFunction:
    if isinstance(x, RationalFunction):
        return x
    return RationalFunction.constant(Q(x))


def _gvar(g: GenIndex) -> LoopPoly:
    return LoopPoly({((g, 1),): RF.one()})


def _gconst(c: RationalFunction) -> LoopPoly:
    return LoopPoly({(): c} if c else {})


def _gq(p: LoopPoly) -> LoopPoly:
    """Lift a Fraction-coefficient polynomial to Q(z) coefficients."""
    return p.map_coeffs(lambda c: c if isinstance(c, RationalFunction)
                        else RationalFunction.constant(c))


# ------------------------------------------------------------ weights
# Weight polynomials in the summation index are kept as coefficient
# tuples (c0, c1, ...), lowest power first.

def _w_norm(w) -> tuple[Fraction, ...]:
    w = tuple(Q(c) for c in w)
    while w and not w[-1]:
        w = w[:-1]
    return w


def _w_eval(w, k: int) -> Fraction:
    out = Q(0)
    for p, c in enumerate(w):
        out += c * k ** p
    return out


def _w_shift(w, s: int) -> tuple[Fraction, ...]:
    """Coefficients of w(k + s) as a polynomial in k."""
    out = [Q(0)] * max(len(w), 1)
    from math import comb
    for p, c in enumerate(w):
        for i in range(p + 1):
            out[i] += c * comb(p, i) * s ** (p - i)
    return _w_norm(out)


def _w_mul(w1, w2) -> tuple[Fraction, ...]:
    if not w1 or not w2:
        return ()
    out = [Q(0)] * (len(w1) + len(w2) - 1)
    for i, a in enumerate(w1):
        for j, b in enumerate(w2):
            out[i + j] += a * b
    return _w_norm(out)


def _w_add(w1, w2) -> tuple[Fraction, ...]:
    out = [Q(0)] * max(len(w1), len(w2))
    for p, c in enumerate(w1):
        out[p] += c
    for p, c in enumerate(w2):
        out[p] += c
    return _w_norm(out)


def _ray_resum(lo, hi, s: int, shift: int, w) -> RationalFunction:
    """Closed form of sum over the half-line {k >= lo} (hi is None) or
    {k <= hi} (lo is None) of w(k) z^(s k + shift), with s >= 1."""
    if (lo is None) == (hi is None):
        raise ValueError("resummation needs exactly one finite bound")
    if lo is not None:
        base = geometric_resum(lo, s, 0)
    else:
        base = invert_z(geometric_resum(-hi, s, 0))
    zddz = RationalFunction([Q(0), Q(1)])
    inv_s = RationalFunction.constant(Q(1, s))
    powers = [base]
    for _ in range(len(w) - 1):
        powers.append(zddz * powers[-1].derivative() * inv_s)
    out = RationalFunction.zero()
    for p, c in enumerate(w):
        if c:
            out = out + powers[p] * RationalFunction.constant(c)
    return z_power(shift) * out


# ------------------------------------------------------------- states

def contract(beta_mode, gamma_mode) -> RationalFunction:
    """Pairing of a beta mode (a, m, M) against a gamma mode (b, n, N):
    z^m when the finite indices agree, the loop indices agree and the
    oscillator modes add to zero; otherwise 0."""
    a, m, mm = beta_mode
    b, n, nn = gamma_mode
    if a == b and m == n and mm + nn == 0:
        return z_power(m)
    return RationalFunction.zero()


@dataclass(frozen=True)
class QuadSum:
    """Symbolic tail coeff * sum_k w(k) z^(alpha k) gamma^{a,k-n}[0]
    beta_{b,k}[-1] |0>, k running over the sector's half-line (or Z)."""
    coeff: RationalFunction
    a: FiniteIndex
    b: FiniteIndex
    n: int
    alpha: int = 0
    k0: int = 0
    sector: str = "positive"
    weight: tuple = (Q(1),)

    def __post_init__(self):
        if self.sector not in _SECTORS:
            raise ValueError(f"unknown sector {self.sector!r}")
        object.__setattr__(self, "coeff", _rf(self.coeff))
        object.__setattr__(self, "weight", _w_norm(self.weight))

    def krange(self):
        if self.sector == "positive":
            return (self.k0, None)
        if self.sector == "negative":
            return (None, -self.k0)
        return (None, None)

    def contains(self, k: int) -> bool:
        lo, hi = self.krange()
        return (lo is None or k >= lo) and (hi is None or k <= hi)

    def key(self):
        return (self.sector, self.a, self.b, self.n, self.alpha,
                self.k0, self.weight)

    def term_poly(self, k: int) -> tuple[LoopPoly, GenIndex]:
        """The explicit k-th term as (gamma-polynomial, beta target)."""
        c = self.coeff * z_power(self.alpha * k) * \
            RationalFunction.constant(_w_eval(self.weight, k))
        return _gvar(GenIndex(self.a, k - self.n)) * c, GenIndex(self.b, k)


def _merge_quads(quads) -> tuple[QuadSum, ...]:
    acc: dict[tuple, RationalFunction] = {}
    for q in quads:
        if not q.coeff or not q.weight:
            continue
        key = q.key()
        cur = acc.get(key)
        acc[key] = q.coeff if cur is None else cur + q.coeff
    out = []
    for key, c in acc.items():
        if not c:
            continue
        sector, a, b, n, alpha, k0, w = key
        out.append(QuadSum(c, a, b, n, alpha, k0, sector, w))
    out.sort(key=lambda q: (q.sector, q.n, q.a.kind, q.a.i, q.a.j,
                            q.b.kind, q.b.i, q.b.j, q.alpha, q.k0, q.weight))
    return tuple(out)


def _clean_map(m: dict) -> dict:
    return {g: p for g, p in m.items() if p}


@dataclass(frozen=True)
class FockState:
    """Depth-one state over Q(z); see the module docstring for the four
    layers.  ``pol`` carries the whole gamma[0]-polynomial layer, with
    the scalar part as its constant term.  States are compared layer by
    layer after normalization, so equality is exact."""
    K: int
    pol: LoopPoly = field(default_factory=LoopPoly)
    beta: dict = field(default_factory=dict)
    oneform: dict = field(default_factory=dict)
    quads: tuple = ()
    exact: bool = True

    def __post_init__(self):
        object.__setattr__(self, "pol", _gq(self.pol))
        object.__setattr__(self, "beta",
                           _clean_map({g: _gq(p) for g, p in self.beta.items()}))
        object.__setattr__(self, "oneform",
                           _clean_map({g: _gq(p) for g, p in self.oneform.items()}))
        object.__setattr__(self, "quads", _merge_quads(self.quads))

    # -- algebra ------------------------------------------------------
    @property
    def scalar(self) -> RationalFunction:
        c = self.pol.const_term()
        return c if isinstance(c, RationalFunction) else _rf(c)

    def __add__(self, other: "FockState") -> "FockState":
        if self.K != other.K:
            raise ValueError("cutoff mismatch")
        beta = dict(self.beta)
        for g, p in other.beta.items():
            beta[g] = beta[g] + p if g in beta else p
        one = dict(self.oneform)
        for g, p in other.oneform.items():
            one[g] = one[g] + p if g in one else p
        return FockState(self.K, self.pol + other.pol, beta, one,
                         self.quads + other.quads,
                         self.exact and other.exact)

    def __neg__(self) -> "FockState":
        return self.scale(_rf(-1))

    def __sub__(self, other: "FockState") -> "FockState":
        return self + (-other)

    def scale(self, c) -> "FockState":
        c = _rf(c)
        return FockState(
            self.K, self.pol * c,
            {g: p * c for g, p in self.beta.items()},
            {g: p * c for g, p in self.oneform.items()},
            tuple(QuadSum(q.coeff * c, q.a, q.b, q.n, q.alpha, q.k0,
                          q.sector, q.weight) for q in self.quads),
            self.exact)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FockState):
            return NotImplemented
        return (self.K == other.K and self.pol == other.pol
                and self.beta == other.beta and self.oneform == other.oneform
                and self.quads == other.quads)

    def __bool__(self) -> bool:
        return bool(self.pol) or bool(self.beta) or bool(self.oneform) \
            or bool(self.quads)

    def truncate(self, K: int) -> "FockState":
        """Drop beta and one-form entries at loop index >= K (the
        quadratic tails are symbolic and keep their closed form)."""
        return FockState(K,
                         self.pol,
                         {g: p for g, p in self.beta.items() if g.n < K},
                         {g: p for g, p in self.oneform.items() if g.n < K},
                         self.quads, self.exact)

    # -- display ------------------------------------------------------
    def __repr__(self) -> str:
        bits = []
        if self.pol:
            bits.append(f"({_poly_text(self.pol)})|0>")
        for g, p in sorted(self.beta.items(), key=_gi_sort):
            bits.append(f"({_poly_text(p)})b_{g.label}[-1]|0>")
        for g, p in sorted(self.oneform.items(), key=_gi_sort):
            bits.append(f"({_poly_text(p)})g^{g.label}[-1]|0>")
        for q in self.quads:
            lo, hi = q.krange()
            if q.sector == "positive":
                rng = f"k>={lo}"
            elif q.sector == "negative":
                rng = f"k<={hi}"
            else:
                rng = "k in Z"
            w = "" if q.weight == (Q(1),) else f" w={list(q.weight)}"
            al = "" if not q.alpha else f" z^{q.alpha}k"
            bits.append(f"({q.coeff.to_text()})Sum[{rng}]{al}{w} "
                        f"g^({q.a.label},k-{q.n})[0]b_({q.b.label},k)[-1]|0>")
        return " + ".join(bits) if bits else "0"


def _gi_sort(item):
    g = item[0]
    return (g.n, g.a.kind, g.a.i, g.a.j)


def _poly_text(p: LoopPoly) -> str:
    parts = []
    for mono, c in sorted(p.terms.items(),
                          key=lambda t: (len(t[0]), str(t[0]))):
        cs = c.to_text() if isinstance(c, RationalFunction) else str(c)
        vs = "".join(f"g^{g.label}[0]" + (f"^{e}" if e > 1 else "")
                     for g, e in mono)
        parts.append(f"{cs}*{vs}" if vs else cs)
    return " + ".join(parts) if parts else "0"


def vacuum(K: int) -> FockState:
    return FockState(K, LoopPoly({(): RF.one()}))


# ------------------------------------------------------------ products

def _check_pair(x: FockState, y: FockState) -> None:
    if x.K != y.K:
        raise ValueError("cutoff mismatch between product factors")


def _acc(d: dict, g: GenIndex, p: LoopPoly) -> None:
    if not p:
        return
    cur = d.get(g)
    d[g] = p if cur is None else cur + p


def _isect(r1, r2):
    lo = r1[0] if r2[0] is None else (r2[0] if r1[0] is None
                                      else max(r1[0], r2[0]))
    hi = r1[1] if r2[1] is None else (r2[1] if r1[1] is None
                                      else min(r1[1], r2[1]))
    return lo, hi


def _shift_range(r, s: int):
    lo, hi = r
    return (None if lo is None else lo + s,
            None if hi is None else hi + s)


def _var_loops(p: LoopPoly, a: FiniteIndex) -> set[int]:
    out = set()
    for mono in p.terms:
        for g, _ in mono:
            if g.a == a:
                out.add(g.n)
    return out


def product1(x: FockState, y: FockState) -> FockState:
    """First product: the (w - v)^-2 coefficient of the pair OPE.

    The output is a gamma[0]-polynomial times the vacuum; its constant
    term is the scalar part, resummed to a closed form in Q(z).  Tails
    of the inputs contribute scalars through paired contractions whose
    closed forms do not depend on the cutoff, so the scalar output is
    exact whenever both inputs carry the exactness flag.
    """
    _check_pair(x, y)
    pol = LoopPoly()
    # beta x beta: both beta's contracted against the partner's vars.
    for tx, px in x.beta.items():
        for ty, py in y.beta.items():
            d1 = px.partial(ty)
            if not d1:
                continue
            d2 = py.partial(tx)
            if not d2:
                continue
            pol = pol + d1 * d2 * (z_power(tx.n + ty.n) * _rf(-1))
    # beta x one-form: the beta eats the explicit gamma[-1].
    for tx, px in x.beta.items():
        qy = y.oneform.get(tx)
        if qy is not None:
            pol = pol + px * qy * z_power(tx.n)
    for ty, py in y.beta.items():
        qx = x.oneform.get(ty)
        if qx is not None:
            pol = pol + qx * py * z_power(ty.n)
    # quad x beta and mirror: both quad factors contracted, k pinned.
    for qs in x.quads:
        for ty, py in y.beta.items():
            if qs.a != ty.a:
                continue
            k = qs.n + ty.n
            if not qs.contains(k):
                continue
            d = py.partial(GenIndex(qs.b, k))
            if d:
                c = qs.coeff * z_power(qs.alpha * k + k + ty.n) * \
                    RationalFunction.constant(-_w_eval(qs.weight, k))
                pol = pol + d * c
    for qs in y.quads:
        for tx, px in x.beta.items():
            if qs.a != tx.a:
                continue
            k = qs.n + tx.n
            if not qs.contains(k):
                continue
            d = px.partial(GenIndex(qs.b, k))
            if d:
                c = qs.coeff * z_power(qs.alpha * k + k + tx.n) * \
                    RationalFunction.constant(-_w_eval(qs.weight, k))
                pol = pol + d * c
    # quad x one-form and mirror: the quad's beta eats the gamma[-1].
    for qs in x.quads:
        for gy, qy in y.oneform.items():
            if qs.b != gy.a or not qs.contains(gy.n):
                continue
            k = gy.n
            c = qs.coeff * z_power((qs.alpha + 1) * k) * \
                RationalFunction.constant(_w_eval(qs.weight, k))
            pol = pol + _gvar(GenIndex(qs.a, k - qs.n)) * qy * c
    for qs in y.quads:
        for gx, qx in x.oneform.items():
            if qs.b != gx.a or not qs.contains(gx.n):
                continue
            k = gx.n
            c = qs.coeff * z_power((qs.alpha + 1) * k) * \
                RationalFunction.constant(_w_eval(qs.weight, k))
            pol = pol + qx * _gvar(GenIndex(qs.a, k - qs.n)) * c
    # quad x quad: fully paired, resummed in closed form.
    scalar = RationalFunction.zero()
    for qx in x.quads:
        for qy in y.quads:
            if qx.b != qy.a or qx.a != qy.b or qx.n + qy.n != 0:
                continue
            lo, hi = _isect(qx.krange(), _shift_range(qy.krange(), qx.n))
            s = qx.alpha + qy.alpha + 2
            shift = -qx.n * (qy.alpha + 1)
            w = _w_mul(qx.weight, _w_shift(qy.weight, -qx.n))
            c = qx.coeff * qy.coeff * _rf(-1)
            if lo is not None and hi is not None:
                for k in range(lo, hi + 1):
                    scalar = scalar + c * z_power(s * k + shift) * \
                        RationalFunction.constant(_w_eval(w, k))
            elif lo is None and hi is None:
                raise ValueError(
                    "first product of two full-line quadratic tails "
                    "diverges; split into sectors first")
            else:
                scalar = scalar + c * _ray_resum(lo, hi, s, shift, w)
    pol = pol + _gconst(scalar)
    return FockState(x.K, pol, exact=x.exact and y.exact)


def product0(x: FockState, y: FockState) -> FockState:
    """Zeroth product: the (w - v)^-1 coefficient of the pair OPE.
    Closed on the four-layer shape; full-line tails are allowed (the
    surviving sums stay termwise finite)."""
    _check_pair(x, y)
    pol = LoopPoly()
    beta: dict[GenIndex, LoopPoly] = {}
    one: dict[GenIndex, LoopPoly] = {}
    quads: list[QuadSum] = []
    # polynomial x beta / quad (single contraction eats the tail).
    for ty, py in y.beta.items():
        d = x.pol.partial(ty)
        if d:
            pol = pol + d * py * (z_power(ty.n) * _rf(-1))
    for tx, px in x.beta.items():
        d = y.pol.partial(tx)
        if d:
            pol = pol + px * d * z_power(tx.n)
    for qs in y.quads:
        for l in sorted(_var_loops(x.pol, qs.b)):
            if not qs.contains(l):
                continue
            d = x.pol.partial(GenIndex(qs.b, l))
            c = qs.coeff * z_power((qs.alpha + 1) * l) * \
                RationalFunction.constant(-_w_eval(qs.weight, l))
            pol = pol + d * _gvar(GenIndex(qs.a, l - qs.n)) * c
    for qs in x.quads:
        for k in sorted(_var_loops(y.pol, qs.b)):
            if not qs.contains(k):
                continue
            d = y.pol.partial(GenIndex(qs.b, k))
            c = qs.coeff * z_power((qs.alpha + 1) * k) * \
                RationalFunction.constant(_w_eval(qs.weight, k))
            pol = pol + _gvar(GenIndex(qs.a, k - qs.n)) * d * c
    # beta x beta.
    for tx, px in x.beta.items():
        for ty, py in y.beta.items():
            d2 = py.partial(tx)
            if d2:
                _acc(beta, ty, px * d2 * z_power(tx.n))
            d1 = px.partial(ty)
            if d1:
                _acc(beta, tx, d1 * py * (z_power(ty.n) * _rf(-1)))
                for g in sorted({v for m in d1.terms for v, _ in m},
                                key=lambda v: (v.n, v.a.kind, v.a.i, v.a.j)):
                    dd = d1.partial(g)
                    d2b = py.partial(tx)
                    if dd and d2b:
                        _acc(one, g, dd * d2b *
                             (z_power(tx.n + ty.n) * _rf(-1)))
    # beta x one-form and mirror.
    for tx, px in x.beta.items():
        for gy, qy in y.oneform.items():
            d = qy.partial(tx)
            if d:
                _acc(one, gy, px * d * z_power(tx.n))
            if tx == gy:
                for g in sorted({v for m in px.terms for v, _ in m},
                                key=lambda v: (v.n, v.a.kind, v.a.i, v.a.j)):
                    _acc(one, g, px.partial(g) * qy * z_power(tx.n))
    for gx, qx in x.oneform.items():
        for ty, py in y.beta.items():
            d = qx.partial(ty)
            if d:
                _acc(one, gx, d * py * (z_power(ty.n) * _rf(-1)))
            if gx == ty:
                for g in sorted({v for m in qx.terms for v, _ in m},
                                key=lambda v: (v.n, v.a.kind, v.a.i, v.a.j)):
                    _acc(one, g, qx.partial(g) * py * z_power(ty.n))
    # quad x beta and mirror.
    for qs in x.quads:
        for ty, py in y.beta.items():
            for k in sorted(_var_loops(py, qs.b)):
                if not qs.contains(k):
                    continue
                d = py.partial(GenIndex(qs.b, k))
                c = qs.coeff * z_power((qs.alpha + 1) * k) * \
                    RationalFunction.constant(_w_eval(qs.weight, k))
                _acc(beta, ty, _gvar(GenIndex(qs.a, k - qs.n)) * d * c)
            if qs.a == ty.a:
                k = qs.n + ty.n
                if qs.contains(k):
                    c = qs.coeff * z_power(qs.alpha * k + ty.n) * \
                        RationalFunction.constant(-_w_eval(qs.weight, k))
                    _acc(beta, GenIndex(qs.b, k), py * c)
    for qs in y.quads:
        for tx, px in x.beta.items():
            for l in sorted(_var_loops(px, qs.b)):
                if not qs.contains(l):
                    continue
                d = px.partial(GenIndex(qs.b, l))
                c = qs.coeff * z_power((qs.alpha + 1) * l) * \
                    RationalFunction.constant(-_w_eval(qs.weight, l))
                _acc(beta, tx, d * _gvar(GenIndex(qs.a, l - qs.n)) * c)
            if qs.a == tx.a:
                l = qs.n + tx.n
                if qs.contains(l):
                    c = qs.coeff * z_power(qs.alpha * l + tx.n) * \
                        RationalFunction.constant(_w_eval(qs.weight, l))
                    _acc(beta, GenIndex(qs.b, l), px * c)
                    d = px.partial(GenIndex(qs.b, l))
                    if d:
                        ck = qs.coeff * \
                            z_power(qs.alpha * l + l + tx.n) * \
                            RationalFunction.constant(-_w_eval(qs.weight, l))
                        for g in sorted({v for m in d.terms for v, _ in m},
                                        key=lambda v: (v.n, v.a.kind,
                                                       v.a.i, v.a.j)):
                            _acc(one, g, d.partial(g) * ck)
    # quad x one-form and mirror.
    for qs in x.quads:
        for gy, qy in y.oneform.items():
            for k in sorted(_var_loops(qy, qs.b)):
                if not qs.contains(k):
                    continue
                d = qy.partial(GenIndex(qs.b, k))
                c = qs.coeff * z_power((qs.alpha + 1) * k) * \
                    RationalFunction.constant(_w_eval(qs.weight, k))
                _acc(one, gy, _gvar(GenIndex(qs.a, k - qs.n)) * d * c)
            if qs.b == gy.a and qs.contains(gy.n):
                k = gy.n
                c = qs.coeff * z_power((qs.alpha + 1) * k) * \
                    RationalFunction.constant(_w_eval(qs.weight, k))
                _acc(one, GenIndex(qs.a, k - qs.n), qy * c)
    for qs in y.quads:
        for gx, qx in x.oneform.items():
            for l in sorted(_var_loops(qx, qs.b)):
                if not qs.contains(l):
                    continue
                d = qx.partial(GenIndex(qs.b, l))
                c = qs.coeff * z_power((qs.alpha + 1) * l) * \
                    RationalFunction.constant(-_w_eval(qs.weight, l))
                _acc(one, gx, d * _gvar(GenIndex(qs.a, l - qs.n)) * c)
            if qs.b == gx.a and qs.contains(gx.n):
                l = gx.n
                c = qs.coeff * z_power((qs.alpha + 1) * l) * \
                    RationalFunction.constant(_w_eval(qs.weight, l))
                for g in sorted({v for m in qx.terms for v, _ in m},
                                key=lambda v: (v.n, v.a.kind, v.a.i, v.a.j)):
                    _acc(one, g, qx.partial(g) *
                         _gvar(GenIndex(qs.a, l - qs.n)) * c)
    # quad x quad: one contraction, the free index keeps running.
    for qx in x.quads:
        for qy in y.quads:
            if qx.b == qy.a:
                # x's beta eats y's gamma; parametrize by y's index.
                r = _isect(_shift_range(qx.krange(), qy.n), qy.krange())
                c = qx.coeff * qy.coeff * z_power(-qy.n * (qx.alpha + 1))
                w = _w_mul(_w_shift(qx.weight, -qy.n), qy.weight)
                _emit_quad(quads, beta, c, qx.a, qy.b, qx.n + qy.n,
                           qx.alpha + qy.alpha + 1, r, w)
            if qx.a == qy.b:
                # y's beta eats x's gamma; parametrize by x's index.
                r = _isect(qx.krange(), _shift_range(qy.krange(), qx.n))
                c = qx.coeff * qy.coeff * \
                    z_power(-qx.n * (qy.alpha + 1)) * _rf(-1)
                w = _w_mul(qx.weight, _w_shift(qy.weight, -qx.n))
                _emit_quad(quads, beta, c, qy.a, qx.b, qx.n + qy.n,
                           qx.alpha + qy.alpha + 1, r, w)
    return FockState(x.K, pol, beta, one, tuple(quads),
                     exact=x.exact and y.exact)


def _emit_quad(quads: list, beta: dict, coeff: RationalFunction,
               a: FiniteIndex, b: FiniteIndex, n: int, alpha: int,
               r, w) -> None:
    if not coeff or not w:
        return
    lo, hi = r
    if lo is not None and hi is not None:
        for k in range(lo, hi + 1):
            c = coeff * z_power(alpha * k) * \
                RationalFunction.constant(_w_eval(w, k))
            _acc(beta, GenIndex(b, k), _gvar(GenIndex(a, k - n)) * c)
        return
    if lo is not None:
        quads.append(QuadSum(coeff, a, b, n, alpha, lo, "positive", w))
    elif hi is not None:
        quads.append(QuadSum(coeff, a, b, n, alpha, -hi, "negative", w))
    else:
        quads.append(QuadSum(coeff, a, b, n, alpha, 0, "full", w))


# ---------------------------------------------------------- translation

@dataclass(frozen=True)
class TranslateImage:
    """Translation image split into the representable depth-one part and
    a record of the pieces that leave the depth-one window (deeper
    oscillator modes), kept symbolically for inspection in tests."""
    state: FockState
    beyond: tuple = ()


def translate(x: FockState) -> TranslateImage:
    """Infinitesimal translation T.  It kills the vacuum, sends each
    gamma[0] to the matching gamma[-1] and pushes [-1] modes to [-2];
    the latter leave the depth-one model and are only recorded."""
    one: dict[GenIndex, LoopPoly] = {}
    for g in sorted({v for m in x.pol.terms for v, _ in m},
                    key=lambda v: (v.n, v.a.kind, v.a.i, v.a.j)):
        _acc(one, g, x.pol.partial(g))
    beyond = []
    for t, p in sorted(x.beta.items(), key=_gi_sort):
        beyond.append(("beta[-2]", t, p))
        for g in sorted({v for m in p.terms for v, _ in m},
                        key=lambda v: (v.n, v.a.kind, v.a.i, v.a.j)):
            beyond.append(("gamma[-1]beta[-1]", (g, t), p.partial(g)))
    for t, p in sorted(x.oneform.items(), key=_gi_sort):
        beyond.append(("gamma[-2]", t, p * _rf(2)))
        for g in sorted({v for m in p.terms for v, _ in m},
                        key=lambda v: (v.n, v.a.kind, v.a.i, v.a.j)):
            beyond.append(("gamma[-1]gamma[-1]", (g, t), p.partial(g)))
    for q in x.quads:
        beyond.append(("quad", q, None))
    return TranslateImage(FockState(x.K, LoopPoly(), {}, one, (),
                                    exact=x.exact),
                          tuple(beyond))


# ------------------------------------------------------- the S algebra
# Loop elements are dicts over keys ("S", a, b, n) and ("D",) with
# Fraction coefficients; embedded states use SState below.

def s_loop_bracket(u: dict, v: dict) -> dict:
    out: dict = {}

    def add(key, c):
        if not c:
            return
        out[key] = out.get(key, Q(0)) + c
        if not out[key]:
            del out[key]

    for ku, cu in u.items():
        for kv, cv in v.items():
            c = cu * cv
            if ku[0] == "S" and kv[0] == "S":
                _, a, b, n = ku
                _, cc, d, m = kv
                if b == cc:
                    add(("S", a, d, n + m), c)
                if a == d:
                    add(("S", cc, b, n + m), -c)
            elif ku[0] == "D" and kv[0] == "S":
                add(kv, c * kv[3])
            elif ku[0] == "S" and kv[0] == "D":
                add(ku, -c * ku[3])
    return out


def s_bracket(u: tuple, v: tuple) -> dict:
    """Bracket of two modes: keys ("S", a, b, n, N) or ("D", N); the
    output modes sit at N + M."""
    out: dict = {}

    def add(key, c):
        if not c:
            return
        out[key] = out.get(key, Q(0)) + c
        if not out[key]:
            del out[key]

    if u[0] == "S" and v[0] == "S":
        _, a, b, n, nn = u
        _, c, d, m, mm = v
        if b == c:
            add(("S", a, d, n + m, nn + mm), Q(1))
        if a == d:
            add(("S", c, b, n + m, nn + mm), Q(-1))
    elif u[0] == "D" and v[0] == "S":
        add((v[0], v[1], v[2], v[3], u[1] + v[4]), Q(v[3]))
    elif u[0] == "S" and v[0] == "D":
        add((u[0], u[1], u[2], u[3], u[4] + v[1]), Q(-u[3]))
    return out


def lad_map(alg: AlgebraTables, x: AffineElement) -> dict:
    """Push an affine element to the gl-loop algebra: each J_{a,n} goes
    to minus the structure-constant contraction f_{ab}^c S^b_{c,n}, the
    center to zero and the grading element to D."""
    out: dict = {}
    for g, c in x.terms.items():
        for b in alg.basis:
            for tgt, f in alg._f[(g.a, b)].items():
                key = ("S", b, tgt, g.n)
                val = out.get(key, Q(0)) - c * f
                if val:
                    out[key] = val
                elif key in out:
                    del out[key]
    if x.d_coeff:
        out[("D",)] = out.get(("D",), Q(0)) + x.d_coeff
        if not out[("D",)]:
            del out[("D",)]
    return out


@dataclass(frozen=True)
class SState:
    """Linear combination over Q(z) of S^a_{b,n}[-1]|0>, D[-1]|0> and
    the vacuum, keyed by ("S", a, b, n), ("D",) and ("vac",)."""
    terms: tuple

    @classmethod
    def make(cls, entries) -> "SState":
        acc: dict = {}
        for key, c in entries:
            c = _rf(c)
            if not c:
                continue
            cur = acc.get(key)
            tot = c if cur is None else cur + c
            if tot:
                acc[key] = tot
            elif key in acc:
                del acc[key]
        return cls(tuple(sorted(acc.items(), key=lambda t: repr(t[0]))))

    @classmethod
    def S(cls, a: FiniteIndex, b: FiniteIndex, n: int, c=1) -> "SState":
        return cls.make([(("S", a, b, n), c)])

    @classmethod
    def D(cls, c=1) -> "SState":
        return cls.make([(("D",), c)])

    @classmethod
    def from_loop(cls, loop: dict) -> "SState":
        return cls.make(list(loop.items()))


def p_embed(x, alg: AlgebraTables, K: int) -> FockState:
    """Oscillator image of an S-state: every S^a_{b,n}[-1]|0> becomes
    the full-line tail sum_{k in Z} gamma^{a,k-n}[0] beta_{b,k}[-1]|0>,
    D[-1]|0> the full-line weighted diagonal sum_{a,k} k gamma^{a,k}[0]
    beta_{a,k}[-1]|0>.  FockStates pass through unchanged."""
    if isinstance(x, FockState):
        return x
    pol = LoopPoly()
    quads: list[QuadSum] = []
    for key, c in x.terms:
        if key[0] == "S":
            _, a, b, n = key
            quads.append(QuadSum(c, a, b, n, 0, 0, "full", (Q(1),)))
        elif key[0] == "D":
            for a in alg.basis:
                quads.append(QuadSum(c, a, a, 0, 0, 0, "full",
                                     (Q(0), Q(1))))
        elif key[0] == "vac":
            pol = pol + _gconst(c)
        else:
            raise ValueError(f"unknown S-state key {key!r}")
    return FockState(K, pol, quads=tuple(quads))


# --------------------------------------------------------- sector split

def _quad_sectors(q: QuadSum, low_rule: str) -> tuple[list, list, list]:
    """Split one full-line tail into (positive, negative, middle) per
    the bound max(0, n); ``low_rule`` picks the published convention at
    n <= 0 ("op": positive from 0 and a signed k=0 correction only for
    n < 0; "lemma": signed correction for every n <= 0)."""
    n = q.n
    pos, neg, mid = [], [], []
    if n > 0:
        pos.append(QuadSum(q.coeff, q.a, q.b, n, q.alpha, n, "positive",
                           q.weight))
        neg.append(QuadSum(q.coeff, q.a, q.b, n, q.alpha, n, "negative",
                           q.weight))
        mid.extend(q.term_poly(k) for k in range(-n + 1, n))
    elif n == 0 and low_rule == "op":
        pos.append(QuadSum(q.coeff, q.a, q.b, n, q.alpha, 1, "positive",
                           q.weight))
        neg.append(QuadSum(q.coeff, q.a, q.b, n, q.alpha, 1, "negative",
                           q.weight))
        mid.append(q.term_poly(0))
    else:
        pos.append(QuadSum(q.coeff, q.a, q.b, n, q.alpha, 0, "positive",
                           q.weight))
        neg.append(QuadSum(q.coeff, q.a, q.b, n, q.alpha, 0, "negative",
                           q.weight))
        p, t = q.term_poly(0)
        mid.append((p * _rf(-1), t))
    return pos, neg, mid


def _split(x: FockState, low_rule: str) -> tuple[FockState, FockState,
                                                 FockState]:
    pos_q: list[QuadSum] = []
    neg_q: list[QuadSum] = []
    mid_beta: dict[GenIndex, LoopPoly] = {}
    mid_q: list[QuadSum] = []
    for q in x.quads:
        if q.sector == "positive":
            pos_q.append(q)
        elif q.sector == "negative":
            neg_q.append(q)
        else:
            p, ng, md = _quad_sectors(q, low_rule)
            pos_q.extend(p)
            neg_q.extend(ng)
            for poly, tgt in md:
                _acc(mid_beta, tgt, poly)
    pos = FockState(x.K, LoopPoly(), {}, {}, tuple(pos_q), exact=x.exact)
    neg = FockState(x.K, LoopPoly(), {}, {}, tuple(neg_q), exact=x.exact)
    for g, p in x.beta.items():
        _acc(mid_beta, g, p)
    mid = FockState(x.K, x.pol, mid_beta, dict(x.oneform), tuple(mid_q),
                    exact=x.exact)
    return pos, neg, mid


def split_sectors(x: FockState) -> tuple[FockState, FockState, FockState]:
    """Split the full-line tails of a state into positive, negative and
    middle parts.  For tail index n > 0 the halves start at k = n and
    k = -n with the 2n - 1 middle terms explicit; at n = 0 the halves
    are k >= 1 and k <= -1 with the k = 0 term in the middle; at n < 0
    the halves overlap at k = 0 and the middle carries the signed
    correction, so the three parts always add back to the input."""
    return _split(x, "op")


def expand_window(x: FockState, lo: int, hi: int) -> FockState:
    """Materialize every tail term with lo <= k <= hi as an explicit
    beta entry, dropping the rest of the tails.  Two states whose tails
    agree beyond the window (same indices, weights and coefficients)
    are equal exactly when their expansions agree; used to compare
    partitions of a tail against the original."""
    beta = {g: p for g, p in x.beta.items()}
    for q in x.quads:
        qlo, qhi = q.krange()
        a = lo if qlo is None else max(lo, qlo)
        b = hi if qhi is None else min(hi, qhi)
        for k in range(a, b + 1):
            poly, tgt = q.term_poly(k)
            _acc(beta, tgt, poly)
    return FockState(x.K, x.pol, beta, dict(x.oneform), (), exact=x.exact)


# ------------------------------------------------- the sector identity

def lempi_components(x, y, alg: AlgebraTables, K: int) -> tuple:
    """The three sector contributions to the regulated first product of
    embedded states: the left factor is partitioned by the bound
    max(0, n) (its finite layers count as positive-half content), the
    right factor stays whole, and the three parts are evaluated with
    the regulator, with the regulator after z -> 1/z, and by plain
    evaluation at z = 1 respectively."""
    X = p_embed(x, alg, K)
    Y = p_embed(y, alg, K)
    xp, xn, xm = _split(FockState(X.K, LoopPoly(), {}, {}, X.quads,
                                  exact=X.exact), "lemma")
    # Finite layers of the left factor live on the positive half.
    xp = xp + FockState(X.K, X.pol, dict(X.beta), dict(X.oneform), (),
                        exact=X.exact)
    vp = reg(product1(xp, Y).scalar)
    vn = reg(invert_z(product1(xn, Y).scalar))
    vm = product1(xm, Y).scalar(1)
    return vp, vn, vm


def lempi_product(x, y, alg: AlgebraTables, K: int) -> Fraction:
    """Regulated first product through the sector split; always a plain
    rational number."""
    vp, vn, vm = lempi_components(x, y, alg, K)
    return vp + vn + vm


# ------------------------------------------------- canonical comparison

def _default_k0(a: FiniteIndex, b: FiniteIndex, n: int) -> int:
    return max(b.eta, n + a.eta)


def canonical_at_z1(x: FockState) -> dict:
    """Cutoff-window snapshot of a state with every coefficient read at
    z = 1 (through the regulator, which agrees with evaluation away
    from poles).  Positive-sector tails are normalized to their chart
    starting index, with the difference folded into explicit beta
    entries, so two states compare equal exactly when they agree below
    the cutoff."""
    K = x.K
    pol = {m: reg(c) for m, c in x.pol.terms.items()}
    pol = {m: c for m, c in pol.items() if c}
    beta: dict = {}
    one: dict = {}

    def fold(dst, g, mono_poly_at1):
        if g.n >= K:
            return
        cur = dst.setdefault(g, {})
        for mono, c in mono_poly_at1.items():
            tot = cur.get(mono, Q(0)) + c
            if tot:
                cur[mono] = tot
            elif mono in cur:
                del cur[mono]
        if not cur:
            del dst[g]

    for g, p in x.beta.items():
        fold(beta, g, {m: reg(c) for m, c in p.terms.items()})
    for g, p in x.oneform.items():
        fold(one, g, {m: reg(c) for m, c in p.terms.items()})
    rays: dict = {}
    for q in x.quads:
        c1 = reg(q.coeff)
        if not c1:
            continue
        k0 = q.k0
        if q.sector == "positive":
            d0 = _default_k0(q.a, q.b, q.n)
            for k in range(min(k0, d0), max(k0, d0)):
                sgn = Q(-1) if k0 > d0 else Q(1)
                mono = ((GenIndex(q.a, k - q.n), 1),)
                fold(beta, GenIndex(q.b, k),
                     {mono: sgn * c1 * _w_eval(q.weight, k)})
            k0 = d0
        key = (q.sector, q.a, q.b, q.n, k0)
        w = _w_norm(tuple(c1 * c for c in q.weight))
        tot = _w_add(rays.get(key, ()), w)
        if tot:
            rays[key] = tot
        elif key in rays:
            del rays[key]
    return {"pol": pol, "beta": beta, "oneform": one, "rays": rays}


# ----------------------------------------------------------- gradings

def grades(x: FockState) -> set:
    """Set of (loop grade, conformal weight) pairs present in a state;
    gamma modes count their loop index positively, beta modes
    negatively, and every [-1] mode adds one to the weight."""
    out = set()

    def mono_grade(mono):
        return sum(g.n * e for g, e in mono)

    for mono in x.pol.terms:
        out.add((mono_grade(mono), 0))
    for t, p in x.beta.items():
        for mono in p.terms:
            out.add((mono_grade(mono) - t.n, 1))
    for g, p in x.oneform.items():
        for mono in p.terms:
            out.add((mono_grade(mono) + g.n, 1))
    for q in x.quads:
        out.add((-q.n, 1))
    return out


# -------------------------------------------------------- serialization

def _mono_doc(mono) -> list:
    return [[g.a.label, g.n, e] for g, e in mono]


def _poly_doc(p: LoopPoly) -> list:
    return [[_mono_doc(m), c.to_text()] for m, c in
            sorted(p.terms.items(), key=lambda t: (len(t[0]), str(t[0])))]


def _mono_load(alg: AlgebraTables, doc) -> tuple:
    return tuple((GenIndex(alg.index(lbl), n), e) for lbl, n, e in doc)


def _poly_load(alg: AlgebraTables, doc) -> LoopPoly:
    return LoopPoly({_mono_load(alg, m): RationalFunction.from_text(c)
                     for m, c in doc})


def state_to_json(x: FockState) -> str:
    doc = {
        "K": x.K,
        "exact": x.exact,
        "pol": _poly_doc(x.pol),
        "beta": [[g.a.label, g.n, _poly_doc(p)]
                 for g, p in sorted(x.beta.items(), key=_gi_sort)],
        "oneform": [[g.a.label, g.n, _poly_doc(p)]
                    for g, p in sorted(x.oneform.items(), key=_gi_sort)],
        "quads": [{
            "coeff": q.coeff.to_text(), "a": q.a.label, "b": q.b.label,
            "n": q.n, "alpha": q.alpha, "k0": q.k0, "sector": q.sector,
            "weight": [str(c) for c in q.weight],
        } for q in x.quads],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def state_from_json(alg: AlgebraTables, text: str) -> FockState:
    doc = json.loads(text)
    return FockState(
        doc["K"],
        _poly_load(alg, doc["pol"]),
        {GenIndex(alg.index(lbl), n): _poly_load(alg, p)
         for lbl, n, p in doc["beta"]},
        {GenIndex(alg.index(lbl), n): _poly_load(alg, p)
         for lbl, n, p in doc["oneform"]},
        tuple(QuadSum(RationalFunction.from_text(q["coeff"]),
                      alg.index(q["a"]), alg.index(q["b"]), q["n"],
                      q["alpha"], q["k0"], q["sector"],
                      tuple(Q(c) for c in q["weight"]))
              for q in doc["quads"]),
        doc["exact"],
    )
