"""Free-field realization of the affine generators at a loop cutoff.

A chart coordinate is attached to every basis direction of the positive
half n_+ below the cutoff.  Conjugating a generator by the product of
coordinate exponentials, projecting onto n_+ and peeling coordinates off
one at a time yields the first-order differential operator that realizes
the generator on functions of the chart; peeling must respect the slot
order of the chart, since later exponentials may regenerate components
of earlier coordinates.

Inside a slot the factor order is a convention.  The default is
calibrated against the published operator tables: negative roots by
ascending height, then Cartan directions, then positive roots by
ascending height (slot zero carries positive roots only).  The
pre-calibration guess (positives first) is kept as an alternative
policy; it realizes the algebra just as faithfully but disagrees with
the tables beyond the linear terms.

The doubled realization glues this operator to its mirror image under
the compatible involutions of the algebra and of the two-sided chart.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .liealg import (
    AffineElement,
    AlgebraTables,
    FiniteIndex,
    GenIndex,
    cartan_involution,
)
from .weylpoly import Derivation, GapCertificate, LoopPoly, gap_profile

__all__ = [
    "GoldenCase",
    "PolyElement",
    "RealizationConfig",
    "ad_u",
    "coordinates",
    "golden_diff",
    "latex_derivation",
    "list_goldens",
    "load_golden",
    "nu",
    "nu_doubled",
    "nu_rays",
    "rho",
    "rho_doubled",
    "tau",
    "widening_remainder",
]

Q = Fraction

_ORDER_POLICIES = ("neg-cartan-pos", "pos-cartan-neg")


@dataclass(frozen=True)
class RealizationConfig:
    alg: AlgebraTables
    K: int
    order_policy: str = "neg-cartan-pos"

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("cutoff must be at least 1")
        if self.order_policy not in _ORDER_POLICIES:
            raise ValueError(f"unknown order policy {self.order_policy!r}")

    @property
    def key(self):
        return (self.alg.series, self.K, self.order_policy)


def _slot_order(alg: AlgebraTables, policy: str) -> list[FiniteIndex]:
    roots = [a for a in alg.basis if a.kind == "root"]
    neg = sorted((a for a in roots if not a.is_positive),
                 key=lambda a: (-a.height, a.i, a.j))
    pos = sorted((a for a in roots if a.is_positive),
                 key=lambda a: (a.height, a.i, a.j))
    cart = sorted((a for a in alg.basis if a.kind == "cartan"),
                  key=lambda a: a.i)
    if policy == "neg-cartan-pos":
        return neg + cart + pos
    return pos + cart + neg


def coordinates(cfg: RealizationConfig) -> list[GenIndex]:
    """Chart coordinates in peeling order: slots ascending; inside a
    slot the configured factor order (slot zero: positive roots by
    height)."""
    pos0 = sorted((a for a in cfg.alg.basis if a.kind == "root" and a.is_positive),
                  key=lambda a: (a.height, a.i, a.j))
    out = [GenIndex(a, 0) for a in pos0]
    inner = _slot_order(cfg.alg, cfg.order_policy)
    for n in range(1, cfg.K):
        out.extend(GenIndex(a, n) for a in inner)
    return out


class PolyElement:
    """Algebra element with polynomial coefficients on the chart."""

    __slots__ = ("terms", "k_poly", "d_poly")

    def __init__(self, terms, k_poly=None, d_poly=None):
        self.terms = {g: p for g, p in terms.items() if p}
        self.k_poly = k_poly if k_poly is not None else LoopPoly.zero()
        self.d_poly = d_poly if d_poly is not None else LoopPoly.zero()

    @classmethod
    def from_affine(cls, x: AffineElement) -> "PolyElement":
        return cls(
            {g: LoopPoly.const(c) for g, c in x.terms.items()},
            LoopPoly.const(x.k_coeff),
            LoopPoly.const(x.d_coeff),
        )

    def __bool__(self):
        return bool(self.terms or self.k_poly or self.d_poly)


def _bracket_coord(alg: AlgebraTables, K: int, a: FiniteIndex, m: int,
                   el: PolyElement) -> PolyElement:
    """[J_{a,m}, el] with heights >= K dropped; m >= 0 throughout."""
    out: dict[GenIndex, LoopPoly] = {}
    k_poly = LoopPoly.zero()

    def add(g: GenIndex, p: LoopPoly):
        acc = out.get(g)
        out[g] = p if acc is None else acc + p

    for g, P in el.terms.items():
        n2 = m + g.n
        if n2 < K:
            for c, f in alg._f[(a, g.a)].items():
                add(GenIndex(c, n2), P * f)
        if m and n2 == 0:
            kap = alg.kappa(a, g.a)
            if kap:
                k_poly = k_poly + P * (m * kap)
    if el.d_poly and m and m < K:
        add(GenIndex(a, m), el.d_poly * Q(-m))
    return PolyElement(out, k_poly)


def _ad_exp(alg: AlgebraTables, K: int, g: GenIndex, el: PolyElement,
            sign: int) -> PolyElement:
    """Ad_{exp(sign * X^g J_g)}(el), truncated at height K."""
    x = LoopPoly.var(g)
    terms = dict(el.terms)
    k_poly = el.k_poly
    cur = el
    xj = LoopPoly.one()
    denom = 1
    j = 0
    while True:
        cur = _bracket_coord(alg, K, g.a, g.n, cur)
        if not cur:
            break
        j += 1
        if j > 3 * K + 8:
            raise RuntimeError("adjoint series failed to terminate")
        denom *= j
        xj = xj * x
        scale = Q(sign ** j, denom)
        for h, P in cur.terms.items():
            add = (xj * P) * scale
            acc = terms.get(h)
            terms[h] = add if acc is None else acc + add
        if cur.k_poly:
            k_poly = k_poly + (xj * cur.k_poly) * scale
    return PolyElement(terms, k_poly, el.d_poly)


def _ad_u_poly(cfg: RealizationConfig, el: PolyElement) -> PolyElement:
    for g in reversed(coordinates(cfg)):
        el = _ad_exp(cfg.alg, cfg.K, g, el, +1)
    return el


def ad_u(cfg: RealizationConfig, x: AffineElement) -> PolyElement:
    """Conjugate x by the full product of coordinate exponentials."""
    return _ad_u_poly(cfg, PolyElement.from_affine(x))


def _push_through(cfg: RealizationConfig,
                  plus_terms: dict[GenIndex, LoopPoly]) -> dict[GenIndex, LoopPoly]:
    delta: dict[GenIndex, LoopPoly] = {}
    Z = dict(plus_terms)
    for g in coordinates(cfg):
        P = Z.pop(g, None)
        if P is not None and P:
            delta[g] = P
        if not Z:
            break
        el = _ad_exp(cfg.alg, cfg.K, g, PolyElement(Z), -1)
        if el.k_poly:
            raise AssertionError("central term leaked into the peeling")
        Z = el.terms
    if Z:
        raise AssertionError("peeling left unextracted components")
    return delta


_RHO_CACHE: dict[tuple, Derivation] = {}


def _rho_gen(cfg: RealizationConfig, g: GenIndex) -> Derivation:
    key = cfg.key + (g.a, g.n)
    hit = _RHO_CACHE.get(key)
    if hit is not None:
        return hit
    el = ad_u(cfg, cfg.alg.J(g.a, g.n))
    plus = {h: p for h, p in el.terms.items() if h.membership == "A+"}
    d = Derivation(cfg.K, _push_through(cfg, plus))
    _RHO_CACHE[key] = d
    return d


def _rho_d(cfg: RealizationConfig) -> Derivation:
    return Derivation(cfg.K, {
        g: LoopPoly.var(g) * Q(-g.n) for g in coordinates(cfg) if g.n
    })


def _rho_d_by_algorithm(cfg: RealizationConfig) -> Derivation:
    el = ad_u(cfg, cfg.alg.d())
    plus = {h: p for h, p in el.terms.items() if h.membership == "A+"}
    return Derivation(cfg.K, _push_through(cfg, plus))


def rho(cfg: RealizationConfig, x: AffineElement) -> Derivation:
    """Realize an algebra element as a derivation of the chart; the
    central element acts by zero.  Components inside the truncation
    ideal (slot >= K) act by zero on the truncated chart."""
    out = Derivation(cfg.K, {})
    for g, c in x.terms.items():
        if g.n >= cfg.K:
            continue
        out = out + _rho_gen(cfg, g) * c
    if x.d_coeff:
        out = out + _rho_d(cfg) * x.d_coeff
    return out


# --------------------------------------------------------------- tails

def nu_rays(cfg: RealizationConfig, a: FiniteIndex | str,
            n: int) -> list[tuple[Fraction, FiniteIndex, FiniteIndex, int]]:
    """Ray data for the linear tail of J_{a,n}: entries
    (coeff, b, c, k0) standing for coeff * sum_{k >= k0} X^{b,k-n} D_{c,k},
    continued past any cutoff.

    Tail entries whose variable coordinate precedes the generator's own
    chart factor in the group-product order are absorbed by the moving
    frame during the peel; those always form a prefix of the ray, so the
    survivors are again rays, with a raised starting index.  Generators
    without a chart factor keep the whole tail.
    """
    alg = cfg.alg
    if isinstance(a, str):
        a = alg.index(a)
    order = {g: i for i, g in enumerate(coordinates(cfg))}
    lead = order.get(GenIndex(a, n))
    rays: list[tuple[Fraction, FiniteIndex, FiniteIndex, int]] = []
    for b in alg.basis:
        for c, f in alg._f[(a, b)].items():
            k0 = max(c.eta, n + b.eta)
            if lead is not None:
                while True:
                    pos = order.get(GenIndex(b, k0 - n))
                    if pos is None or pos >= lead:
                        break
                    k0 += 1
            rays.append((-f, b, c, k0))
    return rays


def nu(cfg: RealizationConfig, a: FiniteIndex | str, n: int) -> Derivation:
    """The linear-in-coordinates part of the realization of J_{a,n}:
    the rays of nu_rays truncated to the chart window."""
    if isinstance(a, str):
        a = cfg.alg.index(a)
    terms: dict[GenIndex, LoopPoly] = {}
    for coeff, b, c, k0 in nu_rays(cfg, a, n):
        for k in range(k0, min(cfg.K, cfg.K + n)):
            tgt = GenIndex(c, k)
            add = LoopPoly.var(GenIndex(b, k - n)) * coeff
            acc = terms.get(tgt)
            terms[tgt] = add if acc is None else acc + add
    return Derivation(cfg.K, terms)


def widening_remainder(cfg: RealizationConfig, a: FiniteIndex | str,
                       n: int) -> tuple[Derivation, GapCertificate]:
    """rho(J_{a,n}) minus its leading unit coefficient and tail sum.

    The leading D_{a,n} (present whenever (a,n) sits on the chart) and
    the linear tail are the exactly known part; the certificate then
    judges what is left.
    """
    if isinstance(a, str):
        a = cfg.alg.index(a)
    rem = rho(cfg, cfg.alg.J(a, n)) - nu(cfg, a, n)
    lead = GenIndex(a, n)
    if lead.membership == "A+" and n < cfg.K:
        rem = rem - Derivation(cfg.K, {lead: LoopPoly.one()})
    return rem, gap_profile(rem)


# --------------------------------------------------------------- doubling

def _mirror_sign(alg: AlgebraTables, a: FiniteIndex) -> tuple[FiniteIndex, Fraction]:
    return alg.sigma_finite(a)


def tau(cfg: RealizationConfig, d: Derivation) -> Derivation:
    """Chart involution: mirrors every index through the compatible
    signed flip and negates loop indices, on targets and variables."""
    alg = cfg.alg
    out: dict[GenIndex, LoopPoly] = {}
    for g, p in d.terms.items():
        ta, ts = _mirror_sign(alg, g.a)
        tgt = GenIndex(ta, -g.n)
        new_terms = {}
        for mono, c in p.terms.items():
            sign = ts
            pairs = []
            for v, e in mono:
                va, vs = _mirror_sign(alg, v.a)
                pairs.append((GenIndex(va, -v.n), e))
                sign *= vs ** e
            new_mono = tuple(sorted(pairs, key=lambda q: (q[0].n, q[0].a.kind,
                                                          q[0].a.i, q[0].a.j)))
            new_terms[new_mono] = new_terms.get(new_mono, Q(0)) + c * sign
        q = LoopPoly(new_terms)
        acc = out.get(tgt)
        out[tgt] = q if acc is None else acc + q
    return Derivation(d.K, out)


def rho_doubled(cfg: RealizationConfig, x: AffineElement) -> Derivation:
    """Two-sided realization: rho glued to its mirror; d maps to the
    full grading operator and the center still acts by zero."""
    d = rho(cfg, x)
    mirror = tau(cfg, rho(cfg, cartan_involution(x)))
    return d + mirror


def nu_doubled(cfg: RealizationConfig, a: FiniteIndex | str, n: int) -> Derivation:
    """Two-sided tail sum over every loop index representable on the
    doubled chart (slots without a chart direction are skipped)."""
    alg = cfg.alg
    if isinstance(a, str):
        a = alg.index(a)
    K = cfg.K
    terms: dict[GenIndex, LoopPoly] = {}
    for b in alg.basis:
        for c, f in alg._f[(a, b)].items():
            for k in range(max(1 - K, 1 - K + n), min(K, K + n)):
                tgt = GenIndex(c, k)
                var = GenIndex(b, k - n)
                if tgt.membership == "neither" or var.membership == "neither":
                    continue
                add = LoopPoly.var(var) * (-f)
                acc = terms.get(tgt)
                terms[tgt] = add if acc is None else acc + add
    return Derivation(K, terms)


# --------------------------------------------------------------- reports

@dataclass(frozen=True)
class GoldenCase:
    series: str
    generator: GenIndex
    cutoff: int
    expected: Derivation


def load_golden(path_or_name: str, alg: AlgebraTables | None = None) -> GoldenCase:
    """Load a stored operator table, either from a packaged name (for
    example ``a2_rho_a1_nm1``) or from a JSON file path."""
    import json
    from importlib import resources
    from .liealg import build_algebra

    if "/" in path_or_name or path_or_name.endswith(".json"):
        with open(path_or_name, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        ref = resources.files(__package__).joinpath(f"goldens/{path_or_name}.json")
        data = json.loads(ref.read_text(encoding="utf-8"))
    if alg is None:
        alg = build_algebra(data["series"])
    label, n = data["generator"]
    gen = GenIndex(alg.index(label), int(n))
    expected = Derivation.from_json(int(data["cutoff"]), data["terms"], alg)
    return GoldenCase(data["series"], gen, int(data["cutoff"]), expected)


def list_goldens(series: str | None = None) -> list[str]:
    from importlib import resources

    names = []
    for entry in resources.files(__package__).joinpath("goldens").iterdir():
        if entry.name.endswith(".json"):
            stem = entry.name[:-5]
            if series is None or stem.startswith(series.lower() + "_"):
                names.append(stem)
    return sorted(names)


def golden_diff(d: Derivation, golden: Derivation) -> list[str]:
    """Mismatch report for exactly the monomials stored in the golden
    derivation; entries of d outside the golden are not compared."""
    issues = []
    for g, p in golden.terms.items():
        if g.n >= d.K:
            continue
        have = d.terms.get(g, LoopPoly.zero())
        for mono, want in p.terms.items():
            if any(v.n >= d.K for v, _ in mono):
                continue
            got = have.coeff_of(mono)
            if got != want:
                issues.append(
                    f"target {g.label}: monomial {mono}: expected {want}, got {got}"
                )
    return issues


def _latex_index(g: GenIndex) -> str:
    return f"{{{g.a.label},{g.n}}}"


def latex_derivation(d: Derivation, lhs: str = "\\varrho") -> str:
    """Render in the layout used for operator tables: targets by (slot,
    index), each with its polynomial in graded monomial order."""
    from .weylpoly import _mono_sort_key

    def fmt_coeff(c, lead):
        if c == 1:
            return "" if lead else "+ "
        if c == -1:
            return "- "
        s = str(c)
        if "/" in s:
            num, den = s.lstrip("-").split("/")
            s = ("-" if s.startswith("-") else "") + f"\\tfrac{{{num}}}{{{den}}}"
        if not lead and not s.startswith("-"):
            return "+ " + s + " "
        if s.startswith("-"):
            return "- " + s[1:] + " "
        return s + " "

    chunks = []
    first = True
    for g in sorted(d.terms, key=lambda h: (h.n, h.a.kind, h.a.i, h.a.j)):
        p = d.terms[g]
        for mono in sorted(p.terms, key=_mono_sort_key):
            c = p.terms[mono]
            body = "".join(
                f"X^{_latex_index(v)}" + ("" if e == 1 else f"^{{{e}}}")
                for v, e in mono
            )
            chunks.append(fmt_coeff(c, first) + body + f"D_{_latex_index(g)}")
            first = False
    rhs = " ".join(chunks) if chunks else "0"
    return f"{lhs} = {rhs}"
