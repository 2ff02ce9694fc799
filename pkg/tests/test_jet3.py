import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conjugate import _kernels as K
from conjugate import jet3
from conjugate.errors import DivisionByZero, DomainError
from conjugate.expr import eval_jet
from conjugate.jet3 import Jet3, arith, compose_unary, constant_jet, coordinate_jet, coordinate_jets
from conjugate.selftest import fd_jet

coef = st.floats(-2.0, 2.0, allow_nan=False)
jets = st.lists(coef, min_size=20, max_size=20).map(lambda c: Jet3(np.array(c)))


def test_coordinate_jet():
    j = coordinate_jet(1, (2, 0, 0))
    assert j.value == 2
    assert np.array_equal(j.grad, [1, 0, 0])
    assert not j.hess.any() and not j.third.any()
    j = coordinate_jet(3, (0, 0, -5))
    assert j.value == -5
    assert np.array_equal(j.grad, [0, 0, 1])


def test_coordinate_jet_bad_axis():
    with pytest.raises(ValueError):
        coordinate_jet(0, (1, 2, 3))


def test_constant_jet():
    j = constant_jet(3.5)
    assert j.value == 3.5
    assert not j.c[1:].any()


def test_product_of_coordinates():
    x1, x2, x3 = coordinate_jets(np.array([1.0, 2.0, 3.0]))
    j = x1 * x2 * x3
    assert j.value == 6
    assert np.array_equal(j.grad, [6, 3, 2])
    assert j.third_at(0, 1, 2) == 1
    assert j.third_at(0, 0, 1) == 0
    # oracle: Richardson finite differences
    g, H, T = fd_jet("x1*x2*x3", [1.0, 2.0, 3.0], h=1e-2)
    assert np.allclose(g, j.grad, atol=1e-9)
    assert np.allclose(H, j.hess, atol=1e-9)
    assert np.allclose(T, j.third, atol=1e-9)


def test_add_zero_and_self_division():
    j = eval_jet("sin(x1)*exp(x2)+x3^2", [0.3, -0.2, 0.7])
    assert np.array_equal(arith("add", j, constant_jet(0.0)).c, j.c)
    one = arith("div", j, j)
    assert abs(one.value - 1) < 1e-15
    assert np.max(np.abs(one.c[1:])) < 1e-14


def test_division_by_zero():
    with pytest.raises(DivisionByZero):
        coordinate_jet(1, (1, 1, 1)) / coordinate_jet(2, (1, 0, 1))


def test_exp_at_origin():
    j = compose_unary("exp", coordinate_jet(1, (0, 0, 0)))
    assert j.value == 1
    assert j.grad[0] == 1 and j.hess_at(0, 0) == 1 and j.third_at(0, 0, 0) == 1
    mixed = [j.hess_at(0, 1), j.hess_at(1, 2), j.third_at(0, 0, 1), j.third_at(0, 1, 2)]
    assert not any(mixed)


def test_log_r():
    j = eval_jet("log(sqrt(x1^2+x2^2+x3^2))", [1.0, 0.0, 0.0])
    assert j.value == 0
    assert np.allclose(j.grad, [1, 0, 0])
    g, _, _ = fd_jet("log(sqrt(x1^2+x2^2+x3^2))", [1.0, 0.0, 0.0])
    assert np.allclose(g, j.grad, atol=1e-9)


@pytest.mark.parametrize("fn,val", [("acos", 1.0), ("acos", -1.5), ("log", 0.0), ("sqrt", -1.0)])
def test_domain_errors(fn, val):
    a = constant_jet(val)
    with pytest.raises(DomainError) as err:
        compose_unary(fn, a)
    assert err.value.value is not None


def test_power_domain():
    jet3.power(constant_jet(-2.0), 3)  # integer exponent is fine
    with pytest.raises(DomainError):
        jet3.power(constant_jet(-2.0), 0.5)


@given(jets)
def test_symmetric_access(j):
    for i, k in itertools.product(range(3), repeat=2):
        assert j.hess_at(i, k) == j.hess_at(k, i)
        assert j.hess[i, k] == j.hess[k, i]
    for idx in itertools.product(range(3), repeat=3):
        vals = {float(j.third_at(*p)) for p in itertools.permutations(idx)}
        assert len(vals) == 1


@given(jets, jets)
def test_commutativity(a, b):
    assert np.array_equal((a + b).c, (b + a).c)
    assert np.array_equal((a * b).c, (b * a).c)


@given(jets, jets, jets)
@settings(max_examples=50)
def test_addition_associative_exactly_for_exact_inputs(a, b, c):
    # on dyadic inputs floating point addition is exact
    r = lambda j: Jet3(np.round(j.c * 8) / 8)
    a, b, c = r(a), r(b), r(c)
    assert np.array_equal(((a + b) + c).c, (a + (b + c)).c)


@given(jets)
def test_finite_outputs(a):
    out = jet3.sin(a) * jet3.exp(a / 4) + jet3.atan(a)
    assert jet3.is_finite(out)


def test_from_parts_roundtrip(rng):
    j = Jet3(rng.normal(size=20))
    k = Jet3.from_parts(j.value, j.grad, j.hess, j.third)
    assert np.array_equal(j.c, k.c)


@pytest.mark.skipif(K.numba_impl is None, reason="numba not installed")
def test_backend_parity(rng):
    a = rng.uniform(-1, 1, (200, 20))
    b = rng.uniform(-1, 1, (200, 20))
    b[:, 0] = rng.uniform(0.5, 2, 200)
    d = rng.uniform(-1, 1, (200, 4))
    for name, args in (("mul", (a, b)), ("div", (a, b)), ("compose", (a, d))):
        x = getattr(K.numpy_impl, name)(*args)
        y = getattr(K.numba_impl, name)(*args)
        assert np.max(np.abs(x - y)) < 1e-12 * (1 + np.max(np.abs(x)))


def test_select_backend():
    assert K.select_backend("numpy") is K.numpy_impl
