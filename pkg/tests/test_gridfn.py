import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phifix.gridfn import GridFunction, SeqVec, integrate, l1_norm, quadrature_rule, sup_norm

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_sup_norm_examples():
    assert sup_norm(GridFunction.constant(2.0, 8)) == 2.0
    assert sup_norm(GridFunction.constant(0.0, 8)) == 0.0
    assert sup_norm(GridFunction.from_callable(lambda t: t, 4), "max") == 1.0


def test_sup_norm_vector_norms():
    x = GridFunction(1, [[3.0, -4.0], [1.0, 1.0]])
    assert sup_norm(x, "max") == 4.0
    assert sup_norm(x, "l1") == 7.0
    assert sup_norm(x, "euclid") == 5.0
    with pytest.raises(ValueError):
        sup_norm(x, "frobenius")


def test_l1_norm_examples():
    assert l1_norm(SeqVec.basis(1)) == 1.0
    assert l1_norm(SeqVec.basis(2) - SeqVec.basis(1)) == 2.0
    assert l1_norm(SeqVec.from_list([0.5, 0.25, 0.25])) == 1.0


def test_gridfunction_rejects_bad_values():
    with pytest.raises(ValueError):
        GridFunction(2, [0.0, np.nan, 1.0])
    with pytest.raises(ValueError):
        GridFunction(2, [0.0, 1.0])
    with pytest.raises(ValueError):
        GridFunction(0, [])


def test_seqvec_drops_zeros_and_validates():
    v = SeqVec({3: 0.0, 1: 2.0})
    assert v.support == (1,)
    assert (SeqVec.basis(2) - SeqVec.basis(2)).entries == {}
    with pytest.raises(ValueError):
        SeqVec({0: 1.0})
    with pytest.raises(ValueError):
        SeqVec({1: math.inf})


@pytest.mark.parametrize("kind,n", [("trapezoid", 1), ("trapezoid", 7), ("simpson", 2), ("simpson", 64)])
def test_weights_nonnegative_and_sum_to_one(kind, n):
    w = quadrature_rule(kind, n).weights
    assert np.all(w >= 0)
    assert abs(w.sum() - 1.0) <= 1e-14


def test_simpson_needs_even_n():
    with pytest.raises(ValueError):
        quadrature_rule("simpson", 5)


def test_integrate_examples():
    for n in (1, 3, 10, 101):
        rule = quadrature_rule("trapezoid", n)
        s = np.arange(n + 1) / n
        assert integrate(rule, np.ones(n + 1)) == pytest.approx(1.0, abs=1e-15)
        assert integrate(rule, s) == pytest.approx(0.5, abs=1e-15)
    rule = quadrature_rule("simpson", 4)
    s = np.arange(5) / 4
    assert integrate(rule, s ** 2) == pytest.approx(1 / 3, abs=1e-15)
    assert integrate(rule, s ** 3) == pytest.approx(1 / 4, abs=1e-15)


def test_integrate_length_mismatch():
    with pytest.raises(ValueError):
        integrate(quadrature_rule("trapezoid", 4), np.ones(4))


def test_trapezoid_error_ratio_on_exp():
    exact = math.e - 1
    errs = []
    for n in (16, 32):
        s = np.arange(n + 1) / n
        errs.append(abs(integrate(quadrature_rule("trapezoid", n), np.exp(s)) - exact))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


@settings(max_examples=200)
@given(st.lists(finite, min_size=9, max_size=9), st.lists(finite, min_size=9, max_size=9), finite,
       st.sampled_from(["max", "euclid", "l1"]))
def test_sup_norm_triangle_and_homogeneity(a, b, lam, norm):
    x = GridFunction(2, np.reshape(a, (3, 3)))
    y = GridFunction(2, np.reshape(b, (3, 3)))
    assert sup_norm(x + y, norm) <= sup_norm(x, norm) + sup_norm(y, norm) + 1e-12 * (1 + sup_norm(x, norm) + sup_norm(y, norm))
    assert sup_norm(lam * x, norm) == pytest.approx(abs(lam) * sup_norm(x, norm), rel=1e-12, abs=1e-12)


seqvecs = st.dictionaries(st.integers(1, 30), finite, max_size=8).map(SeqVec)


@settings(max_examples=200)
@given(seqvecs, seqvecs, finite)
def test_l1_triangle_and_homogeneity(x, y, lam):
    assert l1_norm(x + y) <= l1_norm(x) + l1_norm(y) + 1e-12 * (1 + l1_norm(x) + l1_norm(y))
    assert l1_norm(lam * x) == pytest.approx(abs(lam) * l1_norm(x), rel=1e-12, abs=1e-12)


@given(st.lists(finite, min_size=5, max_size=5), st.lists(finite, min_size=5, max_size=5), finite)
def test_integrate_is_linear(a, b, lam):
    rule = quadrature_rule("simpson", 4)
    a, b = np.array(a), np.array(b)
    lhs = integrate(rule, lam * a + b)
    rhs = lam * integrate(rule, a) + integrate(rule, b)
    scale = 1 + abs(lam) * np.abs(a).sum() + np.abs(b).sum()
    assert abs(lhs - rhs) <= 1e-13 * scale
