"""Exact scalars: rationals (``fractions.Fraction``) and cyclotomic numbers.

A cyclotomic number of order N is stored in the power basis of the N-th
cyclotomic field, i.e. as a polynomial in ``z`` of degree < phi(N) reduced
modulo the N-th cyclotomic polynomial.  Any value that turns out to be
rational is returned as a plain ``Fraction``, so rationals have exactly one
representation throughout the package.
"""

from __future__ import annotations

import cmath
import math
import re
from fractions import Fraction
from functools import lru_cache

import mpmath

MAX_ORDER = 1024


class OrderOverflowError(ValueError):
    pass


# -- polynomial helpers (coefficient lists, lowest degree first) ------------

def _trim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def _pmul(a, b):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            if y:
                out[i + j] += x * y
    return out


def _pdivmod(a, b):
    a = _trim(a)
    b = _trim(b)
    if len(a) < len(b):
        return [], a
    q = [Fraction(0)] * (len(a) - len(b) + 1)
    r = [Fraction(x) for x in a]
    lead = Fraction(b[-1])
    for k in range(len(a) - len(b), -1, -1):
        c = r[k + len(b) - 1] / lead
        q[k] = c
        if c:
            for j, y in enumerate(b):
                r[k + j] -= c * y
    return _trim(q), _trim(r[: len(b) - 1])


def _psub(a, b):
    n = max(len(a), len(b))
    return _trim([(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)])


@lru_cache(maxsize=None)
def cyclotomic_polynomial(n: int) -> tuple:
    """Integer coefficients of Phi_n, lowest degree first."""
    if n < 1:
        raise ValueError("order must be positive")
    p = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d == 0:
            p, r = _pdivmod(p, list(cyclotomic_polynomial(d)))
            assert not r
    return tuple(int(c) for c in p)


@lru_cache(maxsize=None)
def euler_phi(n: int) -> int:
    return len(cyclotomic_polynomial(n)) - 1


def _reduce(coeffs, order):
    mod = cyclotomic_polynomial(order)
    deg = len(mod) - 1
    c = [Fraction(x) for x in coeffs]
    # Phi_n is monic, so plain long division stays exact and cheap.
    for k in range(len(c) - 1, deg - 1, -1):
        lead = c[k]
        if lead:
            for j in range(deg + 1):
                c[k - deg + j] -= lead * mod[j]
    c = c[:deg] + [Fraction(0)] * max(0, deg - len(c))
    return tuple(c)


def _check_order(n):
    if n > MAX_ORDER:
        raise OrderOverflowError(f"cyclotomic order {n} exceeds cap {MAX_ORDER}")


class Cyclotomic:
    """Element of Q(zeta_N) in reduced power-basis form.

    Use :func:`cyclo` or :func:`zeta` to build values; arithmetic results that
    are rational come back as ``Fraction``.
    """

    __slots__ = ("order", "coeffs")

    def __init__(self, order: int, coeffs):
        if order < 1:
            raise ValueError("order must be positive")
        _check_order(order)
        self.order = order
        self.coeffs = _reduce(coeffs, order)

    # construction helpers
    def _promote(self, order):
        if order == self.order:
            return self.coeffs
        step = order // self.order
        poly = [Fraction(0)] * (step * (len(self.coeffs) - 1) + 1) if self.coeffs else []
        for k, c in enumerate(self.coeffs):
            poly[k * step] = c
        return _reduce(poly, order)

    @staticmethod
    def _common(x, y):
        n = x.order * y.order // math.gcd(x.order, y.order)
        _check_order(n)
        return n, x._promote(n), y._promote(n)

    def is_rational(self):
        return all(c == 0 for c in self.coeffs[1:])

    def simplify(self):
        """Return a ``Fraction`` when the value is rational, else ``self``."""
        if self.is_rational():
            return self.coeffs[0] if self.coeffs else Fraction(0)
        return self

    # arithmetic
    def __add__(self, other):
        other = _as_cyclo(other)
        if other is None:
            return NotImplemented
        n, a, b = Cyclotomic._common(self, other)
        return Cyclotomic(n, [x + y for x, y in zip(a, b)]).simplify()

    __radd__ = __add__

    def __neg__(self):
        return Cyclotomic(self.order, [-c for c in self.coeffs])

    def __sub__(self, other):
        other = _as_cyclo(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return Cyclotomic(self.order, [c * other for c in self.coeffs]).simplify()
        other = _as_cyclo(other)
        if other is None:
            return NotImplemented
        n, a, b = Cyclotomic._common(self, other)
        return Cyclotomic(n, _pmul(a, b)).simplify()

    __rmul__ = __mul__

    def inverse(self):
        if all(c == 0 for c in self.coeffs):
            raise ZeroDivisionError("inverse of zero cyclotomic")
        # extended Euclid: s*a + t*Phi = 1
        a = _trim(self.coeffs)
        m = list(cyclotomic_polynomial(self.order))
        r0, r1 = m, a
        s0, s1 = [], [Fraction(1)]
        while _trim(r1) and len(_trim(r1)) > 1:
            q, r = _pdivmod(r0, r1)
            r0, r1 = r1, r
            s0, s1 = s1, _psub(s0, _pmul(q, s1))
        c = Fraction(_trim(r1)[0])
        return Cyclotomic(self.order, [x / c for x in s1]).simplify()

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return Cyclotomic(self.order, [c / other for c in self.coeffs]).simplify()
        other = _as_cyclo(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = Fraction(1)
        base = self
        while k:
            if k & 1:
                out = base * out
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        other = _as_cyclo(other)
        if other is None:
            return NotImplemented
        _, a, b = Cyclotomic._common(self, other)
        return a == b

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __bool__(self):
        return any(self.coeffs)

    def __hash__(self):
        if self.is_rational():
            return hash(self.coeffs[0])
        # coarse but consistent: equal values have equal embeddings
        z = self.to_complex()
        return hash((round(z.real, 6), round(z.imag, 6)))

    def galois(self, k: int):
        """Apply the automorphism zeta -> zeta**k (k coprime to the order)."""
        if math.gcd(k, self.order) != 1:
            raise ValueError("Galois exponent must be coprime to the order")
        k %= self.order
        poly = [Fraction(0)] * (k * len(self.coeffs) + 1)
        for i, c in enumerate(self.coeffs):
            poly[(i * k)] += c
        return Cyclotomic(self.order, poly).simplify()

    def conjugate(self):
        return self.galois(-1)

    def to_complex(self, precision: int = 53):
        return to_complex(self, precision)

    def __repr__(self):
        return format_scalar(self)

    __str__ = __repr__


def _as_cyclo(x):
    if isinstance(x, Cyclotomic):
        return x
    if isinstance(x, (int, Fraction)):
        return Cyclotomic(1, [Fraction(x)])
    return None


def cyclo(order: int, coeffs) -> Fraction | Cyclotomic:
    return Cyclotomic(order, coeffs).simplify()


def zeta(order: int, power: int = 1):
    """The root of unity exp(2 pi i power/order), exactly."""
    if order < 1:
        raise ValueError("order must be positive")
    power %= order
    g = math.gcd(power, order)
    order, power = order // g, power // g
    if order == 1:
        return Fraction(1)
    poly = [0] * power + [1]
    return cyclo(order, poly)


def root_of_unity(num: int, den: int):
    """exp(2 pi i num/den) as an exact scalar."""
    return zeta(den, num)


def is_zero(x) -> bool:
    return not x


def to_complex(x, precision: int = 53):
    """Complex embedding sending zeta_N to exp(2 pi i/N).

    Returns a Python ``complex`` for precision <= 53 and an ``mpmath.mpc``
    otherwise.
    """
    if precision < 53:
        raise ValueError("precision must be at least 53 bits")
    if isinstance(x, (int, Fraction)):
        if precision <= 53:
            return complex(float(x), 0.0)
        with mpmath.workprec(precision + 16):
            return mpmath.mpc(mpmath.mpf(x.numerator) / x.denominator if isinstance(x, Fraction) else x)
    if isinstance(x, complex):
        return x
    with mpmath.workprec(precision + 16):
        acc = mpmath.mpc(0)
        for k, c in enumerate(x.coeffs):
            if c:
                acc += (mpmath.mpf(c.numerator) / c.denominator) * mpmath.expjpi(mpmath.mpf(2 * k) / x.order)
        if precision <= 53:
            return complex(acc)
        return +acc


# -- textual notation --------------------------------------------------------

def _fmt_q(c: Fraction) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def format_scalar(x) -> str:
    """"p/q" for rationals, "cyclo[N]: ..." polynomial in z otherwise."""
    if isinstance(x, (int, Fraction)):
        return _fmt_q(Fraction(x))
    if isinstance(x, Cyclotomic):
        v = x.simplify()
        if not isinstance(v, Cyclotomic):
            return _fmt_q(v)
        terms = []
        for k in range(len(x.coeffs) - 1, -1, -1):
            c = x.coeffs[k]
            if not c:
                continue
            if k == 0:
                terms.append(_fmt_q(c))
            else:
                mono = "z" if k == 1 else f"z^{k}"
                if c == 1:
                    terms.append(mono)
                elif c == -1:
                    terms.append("-" + mono)
                else:
                    terms.append(f"{_fmt_q(c)}*{mono}")
        body = " + ".join(terms).replace("+ -", "- ")
        return f"cyclo[{x.order}]: {body}"
    raise TypeError(f"not an exact scalar: {x!r}")


_TERM = re.compile(r"^(?:(-?\d+(?:/\d+)?)\*)?(-)?z(?:\^(\d+))?$|^(-?\d+(?:/\d+)?)$")


def parse_scalar(text: str):
    text = text.strip()
    m = re.match(r"^cyclo\[(\d+)\]:\s*(.*)$", text)
    if not m:
        return Fraction(text)
    order = int(m.group(1))
    body = m.group(2).replace(" ", "").replace("-", "+-")
    poly: list[Fraction] = []
    for tok in filter(None, body.split("+")):
        t = _TERM.match(tok)
        if not t:
            raise ValueError(f"bad cyclotomic term {tok!r}")
        if t.group(4) is not None:
            coeff, power = Fraction(t.group(4)), 0
        else:
            coeff = Fraction(t.group(1)) if t.group(1) else Fraction(1)
            if t.group(2):
                coeff = -coeff
            power = int(t.group(3)) if t.group(3) else 1
        poly += [Fraction(0)] * (power + 1 - len(poly))
        poly[power] += coeff
    return cyclo(order, poly)


def cyclo_arith(op: str, x, y=None):
    """Dispatch helper used by the CLI and tests: op in add, mul, neg, inv."""
    if op == "add":
        return x + y
    if op == "mul":
        return x * y
    if op == "neg":
        return -x
    if op == "inv":
        if not x:
            raise ZeroDivisionError("inverse of zero")
        return 1 / x if isinstance(x, Cyclotomic) else 1 / Fraction(x)
    raise ValueError(f"unknown op {op!r}")


def principal_power(mu: complex, r) -> complex:
    """mu**r with the branch -pi < arg(mu) <= pi."""
    if mu == 0:
        raise ValueError("zero has no fractional power")
    arg = cmath.phase(mu)
    if arg == -math.pi:
        arg = math.pi
    return abs(mu) ** float(r) * cmath.exp(1j * float(r) * arg)
