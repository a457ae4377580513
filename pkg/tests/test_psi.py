import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf

from diophantine.errors import InadmissibleSpec
from diophantine.exact import PSI_THRESHOLD, QuadReal
from diophantine.psi import PsiSpec, PsiValue, enclosure, psi_argument, psi_eval

SPECS = [
    PsiSpec("constant", F(1, 28)),
    PsiSpec("power-decay", F(1, 28), F(1, 2)),
    PsiSpec("power-decay", F(1, 30), F(3, 7)),
    PsiSpec("log-reciprocal", F(1, 28)),
    PsiSpec("log-reciprocal", F(1, 25), shift=F(5, 2)),
]


def reference(spec: PsiSpec, n: int):
    with mp.workprec(512):
        x = mp.sqrt(mpf(n))
        c = mpf(spec.c.numerator) / spec.c.denominator
        if spec.kind == "constant":
            return c
        if spec.kind == "power-decay":
            e = mpf(spec.exponent.numerator) / spec.exponent.denominator
            return c * x ** (-e)
        s = mpf(spec.shift.numerator) / spec.shift.denominator
        return c / (1 + mp.log(x) / s)


def test_constant_is_exact():
    v = psi_eval(PsiSpec("constant", F(1, 28)), 12345)
    assert v == PsiValue.exact(F(1, 28))


def test_inadmissible_constant_quotes_threshold():
    with pytest.raises(InadmissibleSpec, match=r"\(9-√2\)/162"):
        psi_eval(PsiSpec("constant", F(1, 20)), 1)


def test_threshold_neighbourhood():
    # (9 - sqrt2)/162 ~ 0.046826: 1/21 ~ 0.0476 is out, 1/22 ~ 0.04545 is in
    assert QuadReal(F(1, 21)) > PSI_THRESHOLD
    psi_eval(PsiSpec("constant", F(1, 22)), 1)


def test_power_decay_at_ten():
    v = psi_eval(PsiSpec("power-decay", F(1, 28), F(1, 2)), 100)
    assert F(112, 10000) <= v.value <= F(113, 10000)
    with mp.workprec(256):
        ref = mpf(1) / 28 / mp.sqrt(10)
        assert mpf(v.lower.numerator) / v.lower.denominator <= ref <= mpf(v.upper.numerator) / v.upper.denominator


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SPECS), st.integers(1, 10**40))
def test_enclosure_contains_reference(spec, n):
    lo, hi = enclosure(spec, n)
    ref = reference(spec, n)
    with mp.workprec(512):
        assert mpf(lo.numerator) / lo.denominator <= ref <= mpf(hi.numerator) / hi.denominator
    v = psi_eval(spec, n)
    assert v.lower <= v.value <= v.upper
    assert v.upper - v.lower <= v.value / 2**32
    assert QuadReal(v.value) <= PSI_THRESHOLD


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SPECS), st.lists(st.integers(1, 10**30), min_size=2, max_size=8))
def test_staircase_non_increasing(spec, ns):
    prev = None
    for n in sorted(ns):
        v = psi_eval(spec, n, prev)
        if prev is not None:
            assert v.value <= prev.value
        prev = v


def test_tiny_values_keep_relative_accuracy():
    v = psi_eval(PsiSpec("power-decay", F(1, 28), F(1, 4)), 10**80)
    assert v.upper - v.lower <= v.value / 2**32


def test_spec_parsing():
    assert PsiSpec.parse("constant:1/28") == PsiSpec("constant", F(1, 28))
    assert PsiSpec.parse("power-decay:1/28:1/4") == PsiSpec("power-decay", F(1, 28), F(1, 4))
    assert PsiSpec.parse("log-reciprocal:1/28:2") == PsiSpec("log-reciprocal", F(1, 28), shift=F(2))
    assert PsiSpec.parse("log-reciprocal:1/28").shift == 1
    for bad in ("constant", "constant:0.03", "power-decay:1/28", "wavy:1/28", "constant:1/28:2", "constant:-1/28"):
        with pytest.raises(ValueError):
            PsiSpec.parse(bad)


def test_spec_json_file(tmp_path):
    spec = PsiSpec("power-decay", F(1, 28), F(1, 4))
    path = tmp_path / "psi.json"
    path.write_text(json.dumps(spec.to_json()))
    assert PsiSpec.parse(str(path)) == spec
    assert spec.to_json() == {"kind": "power-decay", "c": "1/28", "exponent": "1/4"}


def test_psi_argument():
    assert psi_argument("norm", 5, 104) == 104
    assert psi_argument("index", 5, 104) == 25
    with pytest.raises(ValueError):
        psi_argument("other", 5, 104)
