import numpy as np
import pytest

from conjugate import selftest as S
from conjugate.expr import eval_jet
from conjugate.jet3 import Jet3


def test_full_run_passes():
    rep = S.run(seed=1, scale=0.3)
    failed = [(s, c["identity"], c["max_residual"]) for s, v in rep["suites"].items()
              for c in v["checks"] if not c["pass"]]
    assert rep["pass"], failed
    assert set(rep["suites"]) == set(S.SUITES)


def test_inject_fault_is_caught():
    rep = S.run(seed=1, suites=["oracle"], inject_fault=True, scale=0.3)
    assert not rep["pass"]
    assert S.run(seed=1, suites=["oracle"], scale=0.3)["pass"]


def test_unknown_suite():
    with pytest.raises(KeyError):
        S.run(suites=["nope"])


def test_report_deterministic():
    a = S.run(seed=3, suites=["appendixB", "identities"], scale=0.2)
    b = S.run(seed=3, suites=["appendixB", "identities"], scale=0.2)
    strip = lambda r: {k: [c["max_residual"] for c in v["checks"]] for k, v in r["suites"].items()}
    assert strip(a) == strip(b)


def test_random_expression_parses(rng):
    for _ in range(20):
        e = S.random_expression(rng)
        assert np.isfinite(eval_jet(e, rng.uniform(-1, 1, 3)).c).all()


def test_random_jets_shape_and_real():
    j = S.random_jets(np.random.default_rng(0), 40)
    assert isinstance(j, Jet3) and j.c.shape == (40, 20)
    assert np.all(S.random_jets(np.random.default_rng(0), 40).c == j.c)


def test_fd_jet_matches_exact():
    p = np.array([0.4, 0.7, -0.2])
    src = "sin(x1)*exp(x2)+x3^3*x1"
    ex = eval_jet(src, p)
    grad, hess, third = S.fd_jet(src, p)
    assert np.allclose(grad, ex.grad, rtol=1e-8, atol=1e-8)
    assert np.allclose(hess, ex.hess, rtol=1e-8, atol=1e-8)
    assert np.allclose(third, ex.third, rtol=1e-6, atol=1e-6)


def test_brute_force_count_examples():
    assert S.brute_force_count(eval_jet("x1*x2*x3", [1.0, 1.0, 1.0])) == 0
    assert S.brute_force_count(eval_jet("x1^2-x2^2-x3^2", [1.0, 1.0, 0.0])) == 2
