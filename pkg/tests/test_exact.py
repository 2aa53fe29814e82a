import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from twzhu.exact import (Cyclotomic, OrderOverflowError, cyclo, cyclo_arith, format_scalar, parse_scalar,
                         principal_power, root_of_unity, to_complex, zeta)


def test_zeta2_squared_is_one():
    z = zeta(2)
    assert cyclo_arith("mul", z, z) == 1


def test_inverse_of_i():
    i = zeta(4)
    assert cyclo_arith("inv", i) == -i
    assert cyclo_arith("inv", i) == zeta(4, 3)


def test_primitive_cube_roots_sum():
    assert cyclo_arith("add", zeta(3), zeta(3, 2)) == -1


def test_inverse_of_zero_raises():
    with pytest.raises(ZeroDivisionError):
        cyclo_arith("inv", Fraction(0))
    with pytest.raises(ZeroDivisionError):
        cyclo_arith("inv", zeta(5) - zeta(5))


def test_order_cap():
    with pytest.raises(OrderOverflowError):
        Cyclotomic(2048, [0, 1])


def test_mixed_orders_promote_to_lcm():
    x = zeta(4) * zeta(6)
    assert x == zeta(12, 5)


def test_to_complex_examples():
    assert to_complex(Fraction(1)) == complex(1, 0)
    assert abs(to_complex(zeta(4)) - 1j) < 1e-15
    assert abs(to_complex(zeta(3) + zeta(3, 2)) + 1) < 1e-15


def test_to_complex_high_precision():
    v = to_complex(zeta(7), 200)
    import mpmath
    with mpmath.workprec(200):
        assert abs(v - mpmath.expjpi(mpmath.mpf(2) / 7)) < mpmath.mpf(2) ** -190


def test_to_complex_rejects_low_precision():
    with pytest.raises(ValueError):
        to_complex(zeta(3), 20)


def test_principal_branch():
    assert abs(principal_power(-1, Fraction(1, 2)) - 1j) < 1e-15


def test_scalar_notation_roundtrip():
    for x in (Fraction(3, 7), Fraction(-2), zeta(4) / 2 + 3, zeta(48) * Fraction(5, 3)):
        assert parse_scalar(format_scalar(x)) == x
    assert format_scalar(zeta(4) / 2 + 3) == "cyclo[4]: 1/2*z + 3"


orders = st.sampled_from([3, 4, 5, 8, 12])
rationals = st.fractions(min_value=-5, max_value=5, max_denominator=7)


@st.composite
def cyclotomics(draw, order=None):
    n = order or draw(orders)
    coeffs = draw(st.lists(rationals, min_size=1, max_size=n))
    return cyclo(n, coeffs)


@settings(max_examples=60, deadline=None)
@given(cyclotomics(), cyclotomics(), cyclotomics())
def test_field_axioms(x, y, z):
    assert (x * y) * z == x * (y * z)
    assert x * (y + z) == x * y + x * z
    assert x + y == y + x
    if x:
        assert x * cyclo_arith("inv", x) == 1


@settings(max_examples=40, deadline=None)
@given(cyclotomics(), cyclotomics())
def test_embedding_is_ring_homomorphism(x, y):
    assert abs(to_complex(x * y) - to_complex(x) * to_complex(y)) < 1e-9
    assert abs(to_complex(x + y) - to_complex(x) - to_complex(y)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([5, 8, 12]).flatmap(lambda n: st.tuples(st.just(n), cyclotomics(n))))
def test_norm_is_rational(pair):
    n, x = pair
    prod = complex(1)
    for k in range(1, n):
        if math.gcd(k, n) == 1:
            coeffs = x.coeffs if isinstance(x, Cyclotomic) else [x]
            val = sum(complex(float(c)) * complex(to_complex(root_of_unity(k * i, n))) for i, c in enumerate(coeffs))
            prod *= val
    assert abs(prod.imag) < 1e-9 * max(1.0, abs(prod))
