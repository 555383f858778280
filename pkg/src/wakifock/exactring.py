"""Exact arithmetic over Q and Q(z) with Laurent expansion at z = 1.

Conventions
-----------
* Rational scalars are ``fractions.Fraction`` (exported as ``Rational``).
* A ``RationalFunction`` is stored gcd-reduced with a monic denominator,
  so equality and hashing are structural.
* Bernoulli numbers follow the convention fixed by
  ``1/(1 - e^y) = -sum_k B_k/k! * y^(k-1)``, i.e. ``B_1 = -1/2``.
* ``reg`` substitutes ``z = e^y``, expands about ``y = 0``, discards the
  singular part and keeps the constant term.  For functions regular at
  ``z = 1`` this is plain evaluation.

All values are immutable after construction and safe to share across
threads.
"""
from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial, gcd, lcm
from typing import Sequence, Union

__all__ = [
    "Rational",
    "RationalFunction",
    "TruncatedLaurent",
    "bernoulli",
    "expand_at_one",
    "geometric_resum",
    "invert_z",
    "reg",
    "z_power",
]

Rational = Fraction

Coeffs = tuple[Fraction, ...]
Scalar = Union[int, Fraction]


# ------------------------------------------------------------------ #
# dense polynomial helpers (increasing degree, trailing zeros stripped)
# ------------------------------------------------------------------ #

def _trim(cs: Sequence[Fraction]) -> Coeffs:
    n = len(cs)
    while n and cs[n - 1] == 0:
        n -= 1
    return tuple(cs[:n])


def _padd(a: Coeffs, b: Coeffs) -> Coeffs:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, c in enumerate(b):
        out[i] += c
    return _trim(out)


def _pneg(a: Coeffs) -> Coeffs:
    return tuple(-c for c in a)


def _pmul(a: Coeffs, b: Coeffs) -> Coeffs:
    if not a or not b:
        return ()
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, ca in enumerate(a):
        if ca:
            for j, cb in enumerate(b):
                if cb:
                    out[i + j] += ca * cb
    return _trim(out)


def _pscale(a: Coeffs, s: Fraction) -> Coeffs:
    if s == 0:
        return ()
    return tuple(c * s for c in a)


def _pdivmod(a: Coeffs, b: Coeffs) -> tuple[Coeffs, Coeffs]:
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    rem = list(a)
    quot = [Fraction(0)] * max(len(a) - len(b) + 1, 0)
    inv = 1 / b[-1]
    for k in range(len(rem) - len(b), -1, -1):
        q = rem[k + len(b) - 1] * inv
        if q:
            quot[k] = q
            for j, cb in enumerate(b):
                rem[k + j] -= q * cb
    return _trim(quot), _trim(rem)


def _pgcd(a: Coeffs, b: Coeffs) -> Coeffs:
    while b:
        a, b = b, _pdivmod(a, b)[1]
    if a:
        a = _pscale(a, 1 / a[-1])  # monic normal form
    return a


def _peval(a: Coeffs, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(a):
        acc = acc * x + c
    return acc


def _pderiv(a: Coeffs) -> Coeffs:
    return _trim([i * c for i, c in enumerate(a)][1:])


def _mult_at_one(a: Coeffs) -> int:
    """Multiplicity of z = 1 as a root, by repeated synthetic division."""
    m = 0
    while a and _peval(a, Fraction(1)) == 0:
        # divide by (z - 1)
        a, r = _pdivmod(a, (Fraction(-1), Fraction(1)))
        assert not r
        m += 1
    return m


# ------------------------------------------------------------------ #
# rational functions
# ------------------------------------------------------------------ #

class RationalFunction:
    """Element of Q(z): gcd-reduced numerator over a monic denominator."""

    __slots__ = ("numer", "denom")

    def __init__(self, numer: Sequence[Scalar], denom: Sequence[Scalar] = (1,)):
        num = _trim(tuple(Fraction(c) for c in numer))
        den = _trim(tuple(Fraction(c) for c in denom))
        if not den:
            raise ZeroDivisionError("zero denominator")
        if not num:
            den = (Fraction(1),)
        else:
            g = _pgcd(num, den)
            if len(g) > 1:
                num = _pdivmod(num, g)[0]
                den = _pdivmod(den, g)[0]
            lc = den[-1]
            if lc != 1:
                num = _pscale(num, 1 / lc)
                den = _pscale(den, 1 / lc)
        object.__setattr__(self, "numer", num)
        object.__setattr__(self, "denom", den)

    def __setattr__(self, name, value):
        raise AttributeError("RationalFunction is immutable")

    # -- constructors ------------------------------------------------

    @classmethod
    def from_coeffs(cls, numer: Sequence[Scalar], denom: Sequence[Scalar] = (1,)) -> "RationalFunction":
        return cls(numer, denom)

    @classmethod
    def constant(cls, value: Scalar) -> "RationalFunction":
        return cls((Fraction(value),))

    @classmethod
    def zero(cls) -> "RationalFunction":
        return cls(())

    @classmethod
    def one(cls) -> "RationalFunction":
        return cls((1,))

    # -- ring structure ----------------------------------------------

    @staticmethod
    def _coerce(other) -> "RationalFunction | None":
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, (int, Fraction)):
            return RationalFunction((Fraction(other),))
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        num = _padd(_pmul(self.numer, o.denom), _pmul(o.numer, self.denom))
        return RationalFunction(num, _pmul(self.denom, o.denom))

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(_pneg(self.numer), self.denom)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return RationalFunction(_pmul(self.numer, o.numer), _pmul(self.denom, o.denom))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if not o.numer:
            raise ZeroDivisionError("division by zero rational function")
        return RationalFunction(_pmul(self.numer, o.denom), _pmul(self.denom, o.numer))

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, n: int):
        if n < 0:
            return (RationalFunction((1,)) / self) ** (-n)
        out = RationalFunction((1,))
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.numer == o.numer and self.denom == o.denom

    def __hash__(self):
        return hash((self.numer, self.denom))

    def __bool__(self):
        return bool(self.numer)

    # -- analysis ----------------------------------------------------

    def __call__(self, x: Scalar) -> Fraction:
        x = Fraction(x)
        d = _peval(self.denom, x)
        if d == 0:
            raise ZeroDivisionError(f"pole at z = {x}")
        return _peval(self.numer, x) / d

    def derivative(self) -> "RationalFunction":
        num = _padd(
            _pmul(_pderiv(self.numer), self.denom),
            _pneg(_pmul(self.numer, _pderiv(self.denom))),
        )
        return RationalFunction(num, _pmul(self.denom, self.denom))

    def pole_order_at_one(self) -> int:
        return _mult_at_one(self.denom)

    def is_constant(self) -> bool:
        return len(self.numer) <= 1 and len(self.denom) == 1

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("not a constant")
        return self.numer[0] if self.numer else Fraction(0)

    # -- text form ---------------------------------------------------

    def to_text(self) -> str:
        """Serialize as `(poly) / (poly)` with integer coefficients."""
        scale = lcm(
            *(c.denominator for c in self.numer + self.denom),
        ) if (self.numer or self.denom) else 1
        num = [int(c * scale) for c in self.numer]
        den = [int(c * scale) for c in self.denom]
        content = gcd(*(abs(c) for c in num + den)) or 1
        num = [c // content for c in num]
        den = [c // content for c in den]
        if den[-1] < 0:
            num = [-c for c in num]
            den = [-c for c in den]
        return f"({_poly_text(num)}) / ({_poly_text(den)})"

    @classmethod
    def from_text(cls, text: str) -> "RationalFunction":
        text = text.strip()
        m = re.fullmatch(r"\((?P<num>[^()]*)\)\s*/\s*\((?P<den>[^()]*)\)", text)
        if m:
            return cls(_poly_parse(m.group("num")), _poly_parse(m.group("den")))
        return cls(_poly_parse(text))

    def __repr__(self):
        return f"RationalFunction({self.to_text()!r})"


def _poly_text(coeffs: Sequence[int]) -> str:
    if not coeffs:
        return "0"
    parts: list[str] = []
    for k, c in enumerate(coeffs):
        if c == 0:
            continue
        mag = abs(c)
        if k == 0:
            body = str(mag)
        elif mag == 1:
            body = "z" if k == 1 else f"z^{k}"
        else:
            body = f"{mag}*z" if k == 1 else f"{mag}*z^{k}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if c > 0 else f"- {body}")
    return " ".join(parts) if parts else "0"


_TERM_RE = re.compile(
    r"(?P<sign>[+-]?)\s*(?:(?P<coeff>\d+)\s*\*?\s*)?(?P<var>z(?:\^(?P<exp>\d+))?)?"
)


def _poly_parse(text: str) -> list[Fraction]:
    text = text.strip()
    if not text or text == "0":
        return [Fraction(0)]
    coeffs: dict[int, Fraction] = {}
    pos = 0
    while pos < len(text):
        m = _TERM_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ValueError(f"cannot parse polynomial text at: {text[pos:]!r}")
        sign = -1 if m.group("sign") == "-" else 1
        coeff = m.group("coeff")
        var = m.group("var")
        if coeff is None and var is None:
            raise ValueError(f"cannot parse polynomial text at: {text[pos:]!r}")
        c = Fraction(int(coeff)) if coeff is not None else Fraction(1)
        k = 0
        if var is not None:
            k = int(m.group("exp")) if m.group("exp") else 1
        coeffs[k] = coeffs.get(k, Fraction(0)) + sign * c
        pos = m.end()
        while pos < len(text) and text[pos] == " ":
            pos += 1
    out = [Fraction(0)] * (max(coeffs) + 1)
    for k, c in coeffs.items():
        out[k] = c
    return out


# ------------------------------------------------------------------ #
# truncated Laurent series in y
# ------------------------------------------------------------------ #

class TruncatedLaurent:
    """Laurent coefficients in y for indices min_degree .. order.

    Coefficients below min_degree are exact zeros; indices above order
    are unknown and arithmetic never reads them.
    """

    __slots__ = ("min_degree", "coeffs", "order")

    def __init__(self, min_degree: int, coeffs: Sequence[Scalar], order: int):
        if order < min_degree:
            raise ValueError("order below min_degree")
        if len(coeffs) != order - min_degree + 1:
            raise ValueError("coefficient count does not match window")
        object.__setattr__(self, "min_degree", min_degree)
        object.__setattr__(self, "coeffs", tuple(Fraction(c) for c in coeffs))
        object.__setattr__(self, "order", order)

    def __setattr__(self, name, value):
        raise AttributeError("TruncatedLaurent is immutable")

    def coeff(self, j: int) -> Fraction:
        if j > self.order:
            raise IndexError(f"coefficient y^{j} beyond truncation order {self.order}")
        if j < self.min_degree:
            return Fraction(0)
        return self.coeffs[j - self.min_degree]

    def __add__(self, other: "TruncatedLaurent") -> "TruncatedLaurent":
        if not isinstance(other, TruncatedLaurent):
            return NotImplemented
        mind = min(self.min_degree, other.min_degree)
        order = min(self.order, other.order)
        return TruncatedLaurent(
            mind, [self.coeff(j) + other.coeff(j) for j in range(mind, order + 1)], order
        )

    def __neg__(self) -> "TruncatedLaurent":
        return TruncatedLaurent(self.min_degree, [-c for c in self.coeffs], self.order)

    def __sub__(self, other: "TruncatedLaurent") -> "TruncatedLaurent":
        if not isinstance(other, TruncatedLaurent):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other: "TruncatedLaurent") -> "TruncatedLaurent":
        if not isinstance(other, TruncatedLaurent):
            return NotImplemented
        mind = self.min_degree + other.min_degree
        order = min(self.min_degree + other.order, self.order + other.min_degree)
        out = [Fraction(0)] * (order - mind + 1)
        for i in range(self.min_degree, self.order + 1):
            ci = self.coeff(i)
            if not ci:
                continue
            for j in range(other.min_degree, other.order + 1):
                if mind <= i + j <= order:
                    out[i + j - mind] += ci * other.coeff(j)
        return TruncatedLaurent(mind, out, order)

    def __eq__(self, other):
        if not isinstance(other, TruncatedLaurent):
            return NotImplemented
        order = min(self.order, other.order)
        mind = min(self.min_degree, other.min_degree)
        return all(self.coeff(j) == other.coeff(j) for j in range(mind, order + 1))

    def __repr__(self):
        body = " + ".join(
            f"({c})y^{j}" for j, c in zip(range(self.min_degree, self.order + 1), self.coeffs) if c
        )
        return f"TruncatedLaurent({body or '0'} + O(y^{self.order + 1}))"


# ------------------------------------------------------------------ #
# bernoulli numbers and expansion at z = 1
# ------------------------------------------------------------------ #

@lru_cache(maxsize=None)
def bernoulli(k: int) -> Fraction:
    """Bernoulli number B_k with B_1 = -1/2."""
    if k < 0:
        raise ValueError("negative index")
    if k == 0:
        return Fraction(1)
    return Fraction(-1, k + 1) * sum(
        comb(k + 1, j) * bernoulli(j) for j in range(k)
    )


def _exp_series(order: int) -> list[Fraction]:
    return [Fraction(1, factorial(k)) for k in range(order + 1)]


def _series_mul(a: list[Fraction], b: list[Fraction], order: int) -> list[Fraction]:
    out = [Fraction(0)] * (order + 1)
    for i, ca in enumerate(a[: order + 1]):
        if ca:
            for j, cb in enumerate(b[: order + 1 - i]):
                if cb:
                    out[i + j] += ca * cb
    return out


def _compose_exp(poly: Coeffs, order: int) -> list[Fraction]:
    """Taylor coefficients of poly(e^y) through y^order, by Horner in e^y."""
    exp = _exp_series(order)
    acc = [Fraction(0)] * (order + 1)
    for c in reversed(poly):
        acc = _series_mul(acc, exp, order)
        acc[0] += c
    return acc


def expand_at_one(f: RationalFunction, order: int) -> TruncatedLaurent:
    """Laurent expansion of f(e^y) about y = 0 through the y^order term.

    min_degree always equals minus the multiplicity of z = 1 in the
    denominator of f, even when leading coefficients vanish.
    """
    if not f:
        raise ValueError("expansion of the zero function is not represented")
    m = _mult_at_one(f.denom)
    if order < -m:
        raise ValueError("requested order below the pole order")
    num = _compose_exp(f.numer, order + m)
    den = _compose_exp(f.denom, order + 2 * m)
    assert all(c == 0 for c in den[:m])  # valuation matches multiplicity
    den = den[m:]
    quot: list[Fraction] = []
    inv = 1 / den[0]
    for k in range(order + m + 1):
        acc = num[k] - sum(quot[i] * den[k - i] for i in range(k) if k - i < len(den))
        quot.append(acc * inv)
    return TruncatedLaurent(-m, quot, order)


def reg(f: RationalFunction) -> Fraction:
    """Constant term of the expansion of f(e^y) at y = 0; reg(0) = 0."""
    if not f:
        return Fraction(0)
    # two guard terms past the constant; cheap and catches window bugs
    return expand_at_one(f, 2).coeff(0)


def invert_z(f: RationalFunction) -> RationalFunction:
    """f(1/z), renormalized to canonical form."""
    if not f:
        return f
    num = list(reversed(f.numer))
    den = list(reversed(f.denom))
    e = (len(f.denom) - 1) - (len(f.numer) - 1)
    if e >= 0:
        num = [Fraction(0)] * e + num
    else:
        den = [Fraction(0)] * (-e) + den
    return RationalFunction(num, den)


def z_power(e: int) -> RationalFunction:
    """z^e as a rational function, any sign of e."""
    if e >= 0:
        return RationalFunction([0] * e + [1])
    return RationalFunction([1], [0] * (-e) + [1])


def geometric_resum(k0: int, step: int, shift: int = 0) -> RationalFunction:
    """Closed form of sum_{k >= k0} z^(step*k + shift) = z^(step*k0+shift)/(1-z^step)."""
    if step < 1:
        raise ValueError("step must be positive")
    den = [1] + [0] * (step - 1) + [-1]
    return z_power(step * k0 + shift) * RationalFunction([1], den)
