"""One-form correction restoring the zeroth-product homomorphism.

The oscillator image of a realized generator preserves brackets up to
a gamma[-1]-valued defect: all other layers of the zeroth product of
two images already match the image of the bracket once coefficients
are read at z = 1 (no scalar terms can appear in zeroth products of
images, so the regulator degenerates to evaluation there).  The defect
is cancellable by adding a one-form tail to every generator image.
``solve_phi`` finds such a tail from the linear system

    phi([A,B]) = theta0(A) acting on phi(B)
                 + phi(A) acted on by theta0(B) + defect(A,B),

collected over ordered generator pairs.  Unknown coefficients are
enabled degree by degree (constant one-forms first), and within a
degree the elimination pivots on the earliest candidate in chart
order, with free unknowns pinned to zero.  That makes the answer the
sparse, deterministic representative of the solution family.

``embed_theta`` assembles the corrected image: leading beta entry,
exactly continued linear tails, certified polynomial remainder, and
the solved one-form.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .exactring import RationalFunction, reg
from .fockreg import FockState, QuadSum, canonical_at_z1, product0
from .liealg import AffineElement, AlgebraTables, FiniteIndex, GenIndex, \
    affine_bracket
from .realize import RealizationConfig, coordinates, nu_rays, \
    widening_remainder
from .weylpoly import LoopPoly

__all__ = [
    "K_GEN",
    "PhiSolution",
    "anomaly",
    "embed_theta",
    "solve_phi",
    "theta_base",
    "zeroth_images",
]

Q = Fraction

# Unknown keys are (FiniteIndex, n) for loop generators; the center is
# realized as zero yet picks up a one-form of its own, keyed separately
# (it enters the system only through bracket components).
K_GEN = ("k",)


def _gi_key(g: GenIndex):
    return (g.n, g.a.kind, g.a.i, g.a.j)


def _mono_key(mono):
    return tuple(_gi_key(g) + (e,) for g, e in mono)


def _gen_key(gen):
    if gen == K_GEN:
        return (1, 0, "", 0, 0)
    a, n = gen
    return (0, n, a.kind, a.i, a.j)


def _has_low_degree(p: LoopPoly) -> bool:
    return any(sum(e for _, e in m) <= 1 for m in p.terms)


def theta_base(cfg: RealizationConfig, a: FiniteIndex | str,
               n: int) -> FockState:
    """Uncorrected oscillator image of a realized generator: unit beta
    entry on the generator's own chart slot when it has one, the linear
    tails continued past the cutoff in closed form, and the certified
    polynomial remainder below the cutoff.  The exactness flag records
    that the unseen part of the remainder cannot reach scalar outputs
    (certified widening, no remainder term of degree one or less)."""
    alg = cfg.alg
    if isinstance(a, str):
        a = alg.index(a)
    beta: dict[GenIndex, LoopPoly] = {}
    lead = GenIndex(a, n)
    if lead.membership == "A+" and n < cfg.K:
        beta[lead] = LoopPoly.one()
    quads = tuple(QuadSum(c, b, t, n, 0, k0, "positive")
                  for c, b, t, k0 in nu_rays(cfg, a, n))
    rem, cert = widening_remainder(cfg, a, n)
    for tgt, p in rem.terms.items():
        cur = beta.get(tgt)
        beta[tgt] = p if cur is None else cur + p
    exact = cert.verdict == "widening" and \
        not any(_has_low_degree(p) for p in rem.terms.values())
    return FockState(cfg.K, LoopPoly(), beta, {}, quads, exact=exact)


def _theta_d(cfg: RealizationConfig) -> FockState:
    quads = tuple(QuadSum(Q(-1), a, a, 0, 0, a.eta, "positive",
                          (Q(0), Q(1)))
                  for a in cfg.alg.basis)
    return FockState(cfg.K, quads=quads)


def embed_theta(cfg: RealizationConfig, x,
                phi: "PhiSolution | None" = None) -> FockState:
    """Corrected image of an algebra element or a (label, n) pair:
    theta_base plus the coefficient-weighted one-forms from ``phi``.
    The center contributes only its one-form; the grading element maps
    to the loop-weighted diagonal tail."""
    alg = cfg.alg
    if not isinstance(x, AffineElement):
        a, n = x
        x = alg.J(a, n)
    if phi is not None and phi.K != cfg.K:
        raise ValueError(
            f"one-form table solved at cutoff {phi.K}, chart is at {cfg.K}")
    out = FockState(cfg.K)
    for g, c in x.terms.items():
        out = out + theta_base(cfg, g.a, g.n).scale(c)
    if x.d_coeff:
        out = out + _theta_d(cfg).scale(x.d_coeff)
    if phi is not None:
        one: dict[GenIndex, LoopPoly] = {}
        weighted = [(phi.forms.get((g.a, g.n)), c)
                    for g, c in x.terms.items()]
        weighted.append((phi.forms.get(K_GEN), x.k_coeff))
        for form, c in weighted:
            if not form or not c:
                continue
            for t, p in form.items():
                add = p * c
                cur = one.get(t)
                one[t] = add if cur is None else cur + add
        if one:
            out = out + FockState(cfg.K, oneform=one)
    return out


def zeroth_images(cfg: RealizationConfig, phi: "PhiSolution | None",
                  A, B) -> tuple[FockState, FockState]:
    """Both sides of the zeroth-product preservation identity for a
    generator pair: the product of the corrected images, and the
    corrected image of the bracket.  Both are built in a window deep
    enough for the loop depths involved and truncated back to cfg.K,
    so they can be compared term by term at z = 1."""
    alg = cfg.alg
    if isinstance(A[0], str):
        A = (alg.index(A[0]), A[1])
    if isinstance(B[0], str):
        B = (alg.index(B[0]), B[1])
    Kp = cfg.K + _window(A[1], B[1])
    cfgp = cfg if Kp == cfg.K else RealizationConfig(alg, Kp,
                                                     cfg.order_policy)
    lift = phi if phi is None or phi.K == Kp else replace(phi, K=Kp)
    lhs = product0(embed_theta(cfgp, A, lift),
                   embed_theta(cfgp, B, lift)).truncate(cfg.K)
    rhs = embed_theta(cfgp, affine_bracket(alg.J(*A), alg.J(*B)),
                      lift).truncate(cfg.K)
    return lhs, rhs


# ------------------------------------------------------------- defect

def _oneform_z1(state: FockState) -> dict[GenIndex, LoopPoly]:
    out: dict[GenIndex, LoopPoly] = {}
    for t, p in state.oneform.items():
        terms = {}
        for mono, c in p.terms.items():
            v = reg(c) if isinstance(c, RationalFunction) else Q(c)
            if v:
                terms[mono] = v
        if terms:
            out[t] = LoopPoly(terms)
    return out


def _flat(form: dict[GenIndex, LoopPoly]) -> dict:
    return {(t, mono): c
            for t, p in form.items() for mono, c in p.terms.items()}


def _layers_match(prod: FockState, target: FockState) -> bool:
    cl = canonical_at_z1(prod)
    cr = canonical_at_z1(target)
    cl.pop("oneform")
    cr.pop("oneform")
    return cl == cr


def _window(na: int, nb: int) -> int:
    # Negative loop indices route compositions through chart slots past
    # the cutoff; raising the build window by this much keeps every
    # within-window output component complete.
    return max(0, -na, -nb, -(na + nb))


def _comps(alg: AlgebraTables, A, B) -> list:
    el = affine_bracket(alg.J(*A), alg.J(*B))
    out = [((g.a, g.n), c) for g, c in el.terms.items()]
    if el.k_coeff:
        out.append((K_GEN, el.k_coeff))
    return out


def anomaly(cfg: RealizationConfig, A, B) -> dict[GenIndex, LoopPoly]:
    """gamma[-1]-valued defect, read at z = 1, of the zeroth product of
    two uncorrected generator images against the image of their
    bracket.  Every other layer must already match; a mismatch there
    means the realization conventions are broken, and raises."""
    alg = cfg.alg
    if isinstance(A[0], str):
        A = (alg.index(A[0]), A[1])
    if isinstance(B[0], str):
        B = (alg.index(B[0]), B[1])
    return _System(cfg).defect(A, B, _comps(alg, A, B))


# ------------------------------------------------------------- solver

@dataclass(frozen=True)
class PhiSolution:
    """One-form table per generator key ((FiniteIndex, n), or the
    center key), with the cutoff it was solved at, the gauge tag, and
    the residual report of the constraint system (a returned solution
    always reports an exactly zero residual)."""
    series: str
    K: int
    nrange: int
    forms: dict
    gauge: str = "min-support-deglex"
    residual: str = ""

    def coefficient(self, gen, target: GenIndex, mono=()) -> Fraction:
        form = self.forms.get(gen)
        if not form or target not in form:
            return Q(0)
        return Q(form[target].coeff_of(tuple(mono)))

    def to_json(self) -> str:
        doc = {
            "series": self.series, "K": self.K, "nrange": self.nrange,
            "gauge": self.gauge, "residual": self.residual,
            "forms": [
                ["k" if gen == K_GEN else [gen[0].label, gen[1]],
                 [[t.a.label, t.n,
                   [[[[g.a.label, g.n, e] for g, e in mono], str(c)]
                    for mono, c in sorted(p.terms.items(),
                                          key=lambda i: _mono_key(i[0]))]]
                  for t, p in sorted(form.items(),
                                     key=lambda i: _gi_key(i[0]))]]
                for gen, form in sorted(self.forms.items(),
                                        key=lambda i: _gen_key(i[0]))
            ],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, alg: AlgebraTables, text: str) -> "PhiSolution":
        doc = json.loads(text)
        forms: dict = {}
        for gen_doc, form_doc in doc["forms"]:
            gen = K_GEN if gen_doc == "k" else (alg.index(gen_doc[0]),
                                                gen_doc[1])
            form = {}
            for lbl, tn, terms in form_doc:
                form[GenIndex(alg.index(lbl), tn)] = LoopPoly(
                    {tuple((GenIndex(alg.index(vl), vn), e)
                           for vl, vn, e in mono): Q(c)
                     for mono, c in terms})
            forms[gen] = form
        return cls(doc["series"], doc["K"], doc["nrange"], forms,
                   doc["gauge"], doc["residual"])


def _mono_buckets(cfg: RealizationConfig, degree: int) -> dict:
    """Chart monomials of the given degree, bucketed by total loop
    grade, each stored with the same key canonicalization arithmetic
    produces."""
    chart = coordinates(cfg)
    buckets: dict[int, list] = {}
    for combo in itertools.combinations_with_replacement(chart, degree):
        p = LoopPoly({(): Q(1)})
        for v in combo:
            p = p * LoopPoly.var(v)
        buckets.setdefault(sum(v.n for v in combo),
                           []).append(next(iter(p.terms)))
    return buckets


def _candidates(cfg: RealizationConfig, n: int, degree: int,
                buckets: dict | None = None) -> list:
    """One-form entries (target, monomial) of the given coefficient
    degree whose total loop grade matches a generator at loop index n:
    grade(monomial) + target loop = -n.  Empty for n > 0, since chart
    loop indices are non-negative."""
    if buckets is None:
        buckets = _mono_buckets(cfg, degree)
    return [(t, m) for t in coordinates(cfg)
            for m in buckets.get(-n - t.n, ())]


@dataclass
class _System:
    """Lazy caches shared across the solve: generator images (per build
    window) and the one-form action of a unit candidate under a fixed
    partner image."""
    cfg: RealizationConfig
    theta0: dict = field(default_factory=dict)
    acts: dict = field(default_factory=dict)

    def theta(self, g, K: int | None = None) -> FockState:
        K = self.cfg.K if K is None else K
        key = (g, K)
        if key not in self.theta0:
            c = self.cfg if K == self.cfg.K else RealizationConfig(
                self.cfg.alg, K, self.cfg.order_policy)
            self.theta0[key] = theta_base(c, *g)
        return self.theta0[key]

    def defect(self, A, B, comps) -> dict[GenIndex, LoopPoly]:
        K = self.cfg.K
        Kp = K + _window(A[1], B[1])
        prod = product0(self.theta(A, Kp), self.theta(B, Kp)).truncate(K)
        img = FockState(K)
        for g, c in comps:
            if g != K_GEN:
                img = img + self.theta(g, Kp).scale(c).truncate(K)
        if not _layers_match(prod, img):
            raise ValueError(
                f"pair {A} x {B}: layers outside the one-form disagree "
                "with the bracket image; realization conventions are "
                "inconsistent")
        return _oneform_z1(prod)

    def act(self, side: str, partner, t: GenIndex, mono) -> dict:
        key = (side, partner, t, mono)
        if key not in self.acts:
            e = FockState(self.cfg.K,
                          oneform={t: LoopPoly({tuple(mono): Q(1)})})
            th = self.theta(partner)
            prod = product0(th, e) if side == "L" else product0(e, th)
            self.acts[key] = _flat(_oneform_z1(prod))
        return self.acts[key]


def solve_phi(cfg: RealizationConfig, nrange: int = 2,
              degree_cap: int = 6) -> PhiSolution:
    """Solve the one-form correction over all ordered pairs of distinct
    generators with loop index in [-nrange, nrange].  Coefficient
    degrees are enabled one at a time until the system closes; an
    uncancellable defect raises, naming a violated pair."""
    alg = cfg.alg
    gens = [(a, n) for n in range(-nrange, nrange + 1) for a in alg.basis]
    sy = _System(cfg)
    pairs = []
    ukeys: set = set(gens)
    use_k = False
    for A in gens:
        for B in gens:
            if A == B:
                continue
            comps = _comps(alg, A, B)
            ukeys.update(g for g, _ in comps if g != K_GEN)
            use_k = use_k or any(g == K_GEN for g, _ in comps)
            pairs.append((A, B, comps))
    ukeys = sorted(ukeys, key=_gen_key) + ([K_GEN] if use_k else [])
    defects = {(A, B): _flat(sy.defect(A, B, comps))
               for A, B, comps in pairs}

    cand: dict = {g: {} for g in ukeys}
    last_err = None
    for cap in range(degree_cap + 1):
        buckets = _mono_buckets(cfg, cap)
        for g in ukeys:
            cand[g][cap] = _candidates(cfg, 0 if g == K_GEN else g[1],
                                       cap, buckets)
        cols = [(g, t, mono) for g in ukeys
                for d in range(cap + 1) for t, mono in cand[g][d]]
        col_ix = {c: i for i, c in enumerate(cols)}
        rows = []
        for A, B, comps in pairs:
            acc: dict = {}

            def put(key, col, v):
                if v:
                    row = acc.setdefault(key, [Q(0), {}])
                    row[1][col] = row[1].get(col, Q(0)) + v

            for key, v in defects[(A, B)].items():
                acc.setdefault(key, [Q(0), {}])[0] += v
            for d in range(cap + 1):
                for t, mono in cand[B][d]:
                    for key, v in sy.act("L", A, t, mono).items():
                        put(key, (B, t, mono), v)
                for t, mono in cand[A][d]:
                    for key, v in sy.act("R", B, t, mono).items():
                        put(key, (A, t, mono), v)
            for g, c in comps:
                for d in range(cap + 1):
                    for t, mono in cand[g][d]:
                        put((t, mono), (g, t, mono), -c)
            for key in sorted(acc, key=lambda k: _gi_key(k[0]) +
                              _mono_key(k[1])):
                const, coeffs = acc[key]
                coeffs = {c: v for c, v in coeffs.items() if v}
                if coeffs or const:
                    rows.append((coeffs, -const, (A, B, key)))
        sol = _solve_sparse(rows, col_ix)
        if isinstance(sol, dict):
            forms: dict = {}
            for (g, t, mono), v in sol.items():
                if v:
                    forms.setdefault(g, {}).setdefault(t, {})[mono] = v
            forms = {g: {t: LoopPoly(m) for t, m in f.items()}
                     for g, f in forms.items()}
            report = (f"0 across {len(rows)} equations "
                      f"({len(pairs)} pairs, degree cap {cap})")
            return PhiSolution(alg.series, cfg.K, nrange, forms,
                               residual=report)
        last_err = sol
    raise ValueError("one-form system is inconsistent at degree cap "
                     f"{degree_cap}; first violated equation: {last_err}")


def _solve_sparse(rows: list, col_ix: dict):
    """Exact sparse elimination with free unknowns pinned to zero.
    Returns the solution dict, or the tag of the first irreducibly
    inconsistent row (so the caller can widen the candidate set)."""
    pivots: dict = {}
    order: list = []
    for coeffs, rhs, tag in rows:
        coeffs = dict(coeffs)
        while True:
            coeffs = {c: v for c, v in coeffs.items() if v}
            hit = [c for c in coeffs if c in pivots]
            if not hit:
                break
            c = min(hit, key=col_ix.get)
            prow, prhs = pivots[c]
            f = coeffs.pop(c)
            for cc, vv in prow.items():
                coeffs[cc] = coeffs.get(cc, Q(0)) - f * vv
            rhs = rhs - f * prhs
        if not coeffs:
            if rhs:
                return tag
            continue
        piv = min(coeffs, key=col_ix.get)
        pv = coeffs.pop(piv)
        pivots[piv] = ({c: v / pv for c, v in coeffs.items()}, rhs / pv)
        order.append(piv)
    # A pivot row can only reference columns that became pivots later,
    # so resolving in reverse creation order meets solved values (or
    # free columns, held at zero).
    sol: dict = {}
    for piv in reversed(order):
        prow, prhs = pivots[piv]
        v = prhs
        for c, cv in prow.items():
            v -= cv * sol.get(c, Q(0))
        sol[piv] = v
    return sol
