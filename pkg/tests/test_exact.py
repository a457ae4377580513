from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import iv, mp, mpf

from diophantine.errors import NegativeRadicand
from diophantine.exact import (
    GAMMA,
    PSI_THRESHOLD,
    QuadRadical,
    QuadReal,
    dist_to_z,
    fraction_str,
    nearest_integer,
    parse_fraction,
    quad_sign,
    radical_ceil,
    radical_floor,
    radical_sign,
    sqrt_bounds,
    to_decimal_str,
)

rationals = st.fractions(min_value=-50, max_value=50, max_denominator=200)
quads = st.builds(QuadReal, rationals, rationals)
nonneg_quads = quads.filter(lambda x: x.sign() >= 0)


def iv_quad(x: QuadReal):
    return iv.mpf(x.a.numerator) / x.a.denominator + iv.mpf(x.b.numerator) / x.b.denominator * iv.sqrt(2)


def iv_sign(lo_hi):
    if lo_hi.a > 0:
        return 1
    if lo_hi.b < 0:
        return -1
    return None  # undecided at this precision


@pytest.fixture(autouse=True)
def _prec():
    saved = iv.prec
    iv.prec = 512
    yield
    iv.prec = saved


def test_quad_sign_examples():
    assert quad_sign(QuadReal(0, 0)) == 0
    assert quad_sign(QuadReal(3, -2)) == 1
    assert quad_sign(QuadReal(1, -1)) == -1


def test_gamma_is_exact_closed_form():
    # gamma * (9 - sqrt2) = 18 and (9 gamma)^{-1} = (9 - sqrt2)/162
    assert GAMMA * QuadReal(9, -1) == QuadReal(18)
    assert (9 * GAMMA).inverse() == PSI_THRESHOLD
    assert abs(float(GAMMA) - 2.373) < 1e-3


@given(quads, quads)
def test_field_division_roundtrip(x, y):
    if y.sign() == 0:
        return
    assert (x * y) / y == x
    assert x - y + y == x


@settings(max_examples=400)
@given(quads)
def test_quad_sign_matches_interval(x):
    s = iv_sign(iv_quad(x))
    if s is None:
        assert quad_sign(x) == 0 or x.b != 0
    else:
        assert quad_sign(x) == s


def test_radical_sign_examples():
    assert radical_sign(QuadRadical(0, 0, 5)) == 0
    assert radical_sign(QuadRadical(-2, 1, 5)) == 1


def test_radical_sign_gamma_square_against_root():
    # gamma^2 - sqrt((2 gamma / 28)^{-1}) is about 5.632 - 2.429 > 0
    r = (2 * GAMMA * F(1, 28)).inverse()
    x = QuadRadical(GAMMA * GAMMA, -1, r)
    val = iv_quad(GAMMA * GAMMA) - iv.sqrt(iv_quad(r))
    assert val.a > 0
    assert radical_sign(x) == 1


def test_radical_sign_negative_radicand():
    with pytest.raises(NegativeRadicand):
        radical_sign(QuadRadical(0, 1, -1))
    with pytest.raises(NegativeRadicand):
        radical_floor(QuadRadical(0, 1, QuadReal(1, -1)))


@settings(max_examples=400)
@given(quads, quads, nonneg_quads)
def test_radical_sign_matches_interval(p, q, r):
    x = QuadRadical(p, q, r)
    val = iv_quad(p) + iv_quad(q) * iv.sqrt(iv_quad(r))
    s = iv_sign(val)
    if s is not None:
        assert radical_sign(x) == s


def test_radical_floor_examples():
    assert radical_floor(QuadRadical(F(7, 2))) == 3
    assert radical_floor(QuadRadical(0, 1, 2)) == 1
    r = (2 * GAMMA * F(1, 28)).inverse() - GAMMA * GAMMA
    assert radical_floor(QuadRadical(0, 1, r)) == 0
    assert radical_ceil(QuadRadical(0, 1, r)) == 1


@given(quads, quads, nonneg_quads)
def test_radical_floor_brackets(p, q, r):
    x = QuadRadical(p, q, r)
    n = radical_floor(x)
    assert radical_sign(x.shift(-n)) >= 0
    assert radical_sign(x.shift(-(n + 1))) < 0
    assert radical_ceil(x) in (n, n + 1)


def test_nearest_integer_examples():
    assert nearest_integer(F(5, 7)) == 1 and dist_to_z(F(5, 7)) == F(2, 7)
    assert nearest_integer(F(-3, 2)) == -2 and dist_to_z(F(-3, 2)) == F(1, 2)
    assert nearest_integer(F(4)) == 4 and dist_to_z(F(4)) == 0


def test_nearest_integer_tie_bit_picks_other_neighbour():
    assert nearest_integer(F(-3, 2), tie_up=True) == -1
    assert nearest_integer(F(5, 2)) == 2
    assert nearest_integer(F(5, 2), tie_up=True) == 3
    assert nearest_integer(F(1, 3), tie_up=True) == 0


@given(rationals, st.integers(-100, 100))
def test_dist_to_z_symmetries(x, n):
    d = dist_to_z(x)
    assert 0 <= d <= F(1, 2)
    assert d == dist_to_z(-x) == dist_to_z(x + n)
    assert abs(x - nearest_integer(x)) == d


def test_fraction_strings():
    assert fraction_str(F(6, 4)) == "3/2"
    assert fraction_str(F(3)) == "3/1"
    assert parse_fraction(" -10/4 ") == F(-5, 2)
    with pytest.raises(ValueError):
        parse_fraction("0.5")
    with pytest.raises(ValueError):
        parse_fraction("1e3")


def test_quad_json_roundtrip():
    assert QuadReal.from_json(GAMMA.to_json()) == GAMMA


@given(st.fractions(min_value=0, max_value=10**6, max_denominator=10**6))
def test_sqrt_bounds_enclose(x):
    lo, hi = sqrt_bounds(x, 64)
    assert lo * lo <= x <= hi * hi
    assert hi - lo <= F(1, 2**64)


def test_decimal_rendering():
    assert to_decimal_str(F(1, 3), 5) == "3.3333E-1"
    assert to_decimal_str(F(0)) == "0"
    with mp.workprec(300):
        ref = mpf(162) / 79 + mpf(18) / 79 * mp.sqrt(2)
        want = mp.nstr(ref, 30, min_fixed=1, max_fixed=0)
    got = to_decimal_str(GAMMA)
    mantissa, exponent = got.split("E")
    assert exponent == "+0"
    assert mantissa == want
    assert to_decimal_str(PSI_THRESHOLD, 4) == "4.683E-2"
