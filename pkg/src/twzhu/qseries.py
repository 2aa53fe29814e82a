"""Truncated q-series with fractional exponents, and the special series used
for one-point functions: Bernoulli polynomials, Eisenstein series E_k, the
twisted series Q_k and P_k, numeric evaluation and the weight-k slash action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import mpmath

from .exact import Cyclotomic, format_scalar, parse_scalar, root_of_unity, to_complex

BERNOULLI_BOUND = 64


# -- Bernoulli ------------------------------------------------------------------

@lru_cache(maxsize=None)
def bernoulli_number(n: int) -> Fraction:
    """B_n with the convention B_1 = -1/2 (i.e. B_n(0))."""
    if n == 0:
        return Fraction(1)
    s = sum(math.comb(n + 1, k) * bernoulli_number(k) for k in range(n))
    return -s / (n + 1)


def bernoulli_poly(k: int, x, bound: int = BERNOULLI_BOUND) -> Fraction:
    """B_k(x), exactly, from t e^{tx}/(e^t - 1) = sum_k B_k(x) t^k/k!."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k > bound:
        raise ValueError(f"Bernoulli index {k} exceeds bound {bound}")
    x = Fraction(x)
    return sum((math.comb(k, i) * bernoulli_number(i) * x ** (k - i) for i in range(k + 1)), Fraction(0))


def sigma(k: int, n: int) -> int:
    return sum(d ** k for d in range(1, n + 1) if n % d == 0)


# -- series ---------------------------------------------------------------------

def _lcm(a, b):
    return a * b // math.gcd(a, b)


class PuiseuxSeries:
    """sum_e c_e q^e over e in (1/M)Z, trusted for exponents < prec.

    ``prec=None`` marks an exact finite sum.  Coefficients are exact scalars
    or complex numbers; arithmetic keeps the smaller trusted range.
    """

    __slots__ = ("den", "coeffs", "prec")

    def __init__(self, coeffs=None, den: int = 1, prec=None):
        self.den = den
        self.prec = None if prec is None else Fraction(prec)
        self.coeffs = {}
        for e, c in (coeffs or {}).items():
            e = Fraction(e)
            if (e * den).denominator != 1:
                raise ValueError(f"exponent {e} not in (1/{den})Z")
            if c and (self.prec is None or e < self.prec):
                self.coeffs[e] = c

    @classmethod
    def constant(cls, c, prec=None):
        return cls({Fraction(0): c}, 1, prec)

    @classmethod
    def zero(cls, prec=None, den=1):
        return cls({}, den, prec)

    @classmethod
    def monomial(cls, e, c=Fraction(1), prec=None):
        e = Fraction(e)
        return cls({e: c}, e.denominator, prec)

    # basic queries
    def coefficient(self, e):
        e = Fraction(e)
        if self.prec is not None and e >= self.prec:
            raise ValueError(f"coefficient of q^{e} lies beyond the trusted order {self.prec}")
        return self.coeffs.get(e, Fraction(0))

    __getitem__ = coefficient

    def valuation(self):
        """Smallest exponent with nonzero coefficient (prec for a zero series)."""
        if self.coeffs:
            return min(self.coeffs)
        return self.prec

    def exponents(self):
        return sorted(self.coeffs)

    def is_zero(self):
        return not self.coeffs

    def truncate(self, prec):
        prec = Fraction(prec)
        if self.prec is not None:
            prec = min(prec, self.prec)
        return PuiseuxSeries(self.coeffs, self.den, prec)

    # arithmetic
    @staticmethod
    def _minprec(a, b):
        if a is None:
            return b
        if b is None:
            return a
        return min(a, b)

    def __add__(self, other):
        if not isinstance(other, PuiseuxSeries):
            other = PuiseuxSeries.constant(other)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, 0) + c
        return PuiseuxSeries(out, _lcm(self.den, other.den), self._minprec(self.prec, other.prec))

    __radd__ = __add__

    def __neg__(self):
        return PuiseuxSeries({e: -c for e, c in self.coeffs.items()}, self.den, self.prec)

    def __sub__(self, other):
        if not isinstance(other, PuiseuxSeries):
            other = PuiseuxSeries.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        return PuiseuxSeries({e: c * v for e, v in self.coeffs.items()}, self.den, self.prec)

    def __mul__(self, other):
        if not isinstance(other, PuiseuxSeries):
            return self.scale(other)
        va, vb = self.valuation(), other.valuation()
        precs = []
        if self.prec is not None and vb is not None:
            precs.append(self.prec + vb)
        if other.prec is not None and va is not None:
            precs.append(other.prec + va)
        prec = min(precs) if precs else None
        out: dict = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = e1 + e2
                if prec is None or e < prec:
                    out[e] = out.get(e, 0) + c1 * c2
        return PuiseuxSeries(out, _lcm(self.den, other.den), prec)

    def __rmul__(self, other):
        return self.scale(other)

    def shift(self, e):
        """Multiply by q^e."""
        e = Fraction(e)
        den = _lcm(self.den, e.denominator)
        return PuiseuxSeries({k + e: c for k, c in self.coeffs.items()}, den,
                             None if self.prec is None else self.prec + e)

    def q_derivative(self):
        """q d/dq, i.e. (1/2 pi i) d/d tau."""
        return PuiseuxSeries({e: e * c for e, c in self.coeffs.items()}, self.den, self.prec)

    def map_coefficients(self, fn):
        return PuiseuxSeries({e: fn(c) for e, c in self.coeffs.items()}, self.den, self.prec)

    def __eq__(self, other):
        if not isinstance(other, PuiseuxSeries):
            return NotImplemented
        return self.prec == other.prec and (self - other).is_zero()

    def agrees_with(self, other, order=None) -> bool:
        """Coefficient-wise equality on the common trusted range (below order)."""
        diff = self - other
        return all(order is not None and e >= order for e in diff.coeffs)

    def __repr__(self):
        terms = " + ".join(f"({format_scalar(c) if not isinstance(c, complex) else c})q^{e}"
                           for e, c in sorted(self.coeffs.items())[:6])
        tail = "" if self.prec is None else f" + O(q^{self.prec})"
        return f"PuiseuxSeries({terms or '0'}{tail})"

    # numerics
    def evaluate(self, tau, precision: int = 53):
        return evaluate(self, tau, precision)

    # text formats
    def dump(self) -> str:
        lines = [f"# den={self.den} prec={'exact' if self.prec is None else self.prec}"]
        for e in self.exponents():
            lines.append(f"{e.numerator}/{e.denominator}\t{format_scalar(self.coeffs[e])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str):
        den, prec, coeffs = 1, None, {}
        for ln in text.splitlines():
            if ln.startswith("#"):
                for tok in ln[1:].split():
                    k, v = tok.split("=")
                    if k == "den":
                        den = int(v)
                    elif k == "prec" and v != "exact":
                        prec = Fraction(v)
                continue
            if ln.strip():
                e, s = ln.split("\t")
                coeffs[Fraction(e)] = parse_scalar(s)
        return cls(coeffs, den, prec)

    def dump_numeric(self) -> str:
        lines = []
        for e in self.exponents():
            z = to_complex(self.coeffs[e]) if not isinstance(self.coeffs[e], complex) else self.coeffs[e]
            lines.append(f"{float(e)!r}\t{z.real!r}\t{z.imag!r}")
        return "\n".join(lines) + "\n"


# -- special series ---------------------------------------------------------------

def eisenstein(k: int, order) -> PuiseuxSeries:
    """E_k = -B_k/k! + 2/(k-1)! sum sigma_{k-1}(n) q^n, exponents < order."""
    if k < 2 or k % 2:
        raise ValueError("Eisenstein series need even k >= 2")
    order = Fraction(order)
    coeffs = {Fraction(0): -bernoulli_number(k) / math.factorial(k)}
    c = Fraction(2, math.factorial(k - 1))
    n = 1
    while n < order:
        coeffs[Fraction(n)] = c * sigma(k - 1, n)
        n += 1
    return PuiseuxSeries(coeffs, 1, order)


@dataclass(frozen=True)
class TwistPair:
    """mu = exp(2 pi i j/M), lambda = exp(2 pi i l/N)."""

    j: int
    M: int
    l: int
    N: int

    def __post_init__(self):
        if self.M <= 0 or self.N <= 0:
            raise ValueError("M and N must be positive")
        if not (0 <= self.j < self.M and 0 <= self.l < self.N):
            raise ValueError("need 0 <= j < M and 0 <= l < N")

    @classmethod
    def from_fractions(cls, mu_exp, lam_exp):
        """Build from exponents x, y with mu = e^{2 pi i x}, lambda = e^{2 pi i y}."""
        mu_exp = Fraction(mu_exp) % 1
        lam_exp = Fraction(lam_exp) % 1
        return cls(mu_exp.numerator, mu_exp.denominator, lam_exp.numerator, lam_exp.denominator)

    @property
    def mu(self):
        return root_of_unity(self.j, self.M)

    @property
    def lam(self):
        return root_of_unity(self.l, self.N)

    @property
    def trivial(self):
        return self.j == 0 and self.l == 0


class PoleError(ValueError):
    pass


def _geometric_terms(coeffs, base_exp, numer, ratio, order, start=1):
    """Add numer * sum_{m>=start} ratio^m q^{m*base_exp} below order."""
    m = start
    power = ratio ** m if m else Fraction(1)
    while m * base_exp < order:
        e = m * base_exp
        coeffs[e] = coeffs.get(e, 0) + numer * power
        m += 1
        power = power * ratio


def q_series_Q(k: int, tw: TwistPair, order) -> PuiseuxSeries:
    """Q_k(mu, lambda, tau) expanded in q^{1/M} up to (not including) order."""
    order = Fraction(order)
    if k == 0:
        return PuiseuxSeries.constant(Fraction(-1))
    if k < 0:
        raise ValueError("k must be non-negative")
    lam = tw.lam
    lam_inv = 1 / lam if isinstance(lam, Cyclotomic) else Fraction(1) / lam
    x = Fraction(tw.j, tw.M)
    fact = math.factorial(k - 1)
    coeffs: dict = {Fraction(0): -bernoulli_poly(k, x) / math.factorial(k)}
    # first sum, n >= 0: lambda e^{k-1} q^e / (1 - lambda q^e), e = n + j/M
    n = 0
    while n + x < order or (n == 0 and x == 0):
        e = n + x
        if e == 0:
            if k == 1:
                if lam == 1:
                    raise PoleError("Q_1(1, 1) has a pole in its n = 0 term")
                c = lam / (1 - lam)
                coeffs[Fraction(0)] = coeffs[Fraction(0)] + c
            # for k >= 2 the numerator e^{k-1} vanishes identically
        else:
            numer = e ** (k - 1) / fact
            _geometric_terms(coeffs, e, numer, lam, order)
        n += 1
        if n + x >= order:
            break
    # second sum, n >= 1: (-1)^k lambda^{-1} e^{k-1} q^e/(1 - lambda^{-1} q^e), e = n - j/M
    n = 1
    while n - x < order:
        e = n - x
        numer = (-1) ** k * e ** (k - 1) / fact
        _geometric_terms(coeffs, e, numer, lam_inv, order)
        n += 1
    return PuiseuxSeries(coeffs, tw.M, order)


def q_series_P(k: int, tw: TwistPair, order, z_bound) -> dict:
    """P_k(mu, lambda, z, tau) as {z-exponent n: series in q}, |n| <= z_bound.

    Terms with n < 0 are rewritten as -n^{k-1} q_z^n sum_{m>=1} lambda^{-m}
    q^{-nm}, so every q-power is non-negative.
    """
    if k < 1:
        raise ValueError("P_k needs k >= 1")
    order = Fraction(order)
    z_bound = Fraction(z_bound)
    lam = tw.lam
    lam_inv = 1 / lam if isinstance(lam, Cyclotomic) else Fraction(1) / lam
    x = Fraction(tw.j, tw.M)
    fact = math.factorial(k - 1)
    out: dict = {}
    lo = math.floor(-z_bound - x)
    hi = math.ceil(z_bound - x)
    for i in range(lo, hi + 1):
        n = x + i
        if abs(n) > z_bound:
            continue
        coeffs: dict = {}
        if n == 0:
            if tw.trivial:
                continue  # primed sum
            if k == 1:
                if lam == 1:
                    raise PoleError("P_1 n = 0 term has a pole")
                coeffs[Fraction(0)] = 1 / (1 - lam)
        elif n > 0:
            numer = n ** (k - 1) / fact
            _geometric_terms(coeffs, n, numer, lam, order, start=0)
        else:
            numer = -(n ** (k - 1)) / fact
            _geometric_terms(coeffs, -n, numer, lam_inv, order, start=1)
        s = PuiseuxSeries(coeffs, tw.M, order)
        if not s.is_zero():
            out[n] = s
    return out


# -- numerics -----------------------------------------------------------------------

def _mpc(c, prec):
    if isinstance(c, complex):
        return mpmath.mpc(c)
    if isinstance(c, (mpmath.mpc, mpmath.mpf)):
        return c
    return mpmath.mpc(to_complex(c, max(prec, 54)))


def evaluate(s: PuiseuxSeries, tau, precision: int = 53):
    """Partial sum of s at q = e^{2 pi i tau}; the caller picks the truncation."""
    tau = mpmath.mpc(tau)
    if tau.imag <= 0:
        raise ValueError("tau must lie in the upper half plane")
    with mpmath.workprec(precision + 20):
        acc = mpmath.mpc(0)
        two_pi_i_tau = 2j * mpmath.pi * tau
        for e, c in s.coeffs.items():
            acc += _mpc(c, precision) * mpmath.exp(two_pi_i_tau * (mpmath.mpf(e.numerator) / e.denominator))
        return complex(acc) if precision <= 53 else +acc


@dataclass(frozen=True)
class ModularMatrix:
    a: int
    b: int
    f: int
    d: int

    def __post_init__(self):
        if self.a * self.d - self.b * self.f != 1:
            raise ValueError("modular matrix must have determinant 1")

    @classmethod
    def parse(cls, text: str):
        a, b, f, d = (int(t) for t in text.split(","))
        return cls(a, b, f, d)

    def act(self, tau):
        den = self.f * tau + self.d
        if den == 0:
            raise ZeroDivisionError("pole of the Mobius action")
        return (self.a * tau + self.b) / den

    def __matmul__(self, other):
        return ModularMatrix(self.a * other.a + self.b * other.f, self.a * other.b + self.b * other.d,
                             self.f * other.a + self.d * other.f, self.f * other.b + self.d * other.d)


IDENTITY = ModularMatrix(1, 0, 0, 1)
T_MATRIX = ModularMatrix(1, 1, 0, 1)
S_MATRIX = ModularMatrix(0, -1, 1, 0)


def gamma_gh_member(m: ModularMatrix, g_order: int, h_order: int) -> bool:
    n = _lcm(g_order, h_order)
    return (m.b % g_order == 0 and m.f % h_order == 0
            and (m.a - 1) % n == 0 and (m.d - 1) % n == 0)


def slash(fn: Callable, k, m: ModularMatrix) -> Callable:
    """tau -> (f tau + d)^{-k} fn(gamma tau); principal branch for rational k."""
    k = Fraction(k)

    def acted(tau):
        tau = mpmath.mpc(tau)
        den = m.f * tau + m.d
        if den == 0:
            raise ZeroDivisionError("slash action evaluated at its pole")
        factor = mpmath.power(den, -mpmath.mpf(k.numerator) / k.denominator)
        return complex(factor * mpmath.mpc(fn((m.a * tau + m.b) / den)))

    return acted
