import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conjugate import gallery as G
from conjugate.directions import (all_candidates, continue_branch, eta_from_omega, normal_frame,
                                  rotate_jet, solve_batch, solve_directions)
from conjugate.errors import AmbiguousBranch, ConstraintViolation, CriticalPoint, DegenerateY
from conjugate.expr import eval_jet
from conjugate.invariants import core_invariants, firstthree_residuals
from conjugate.jet3 import Jet3
from conjugate.selftest import brute_force_count, random_jets


def assert_solves(j, w, tol=1e-9):
    (r1, r2, r3), (s1, s2, s3) = firstthree_residuals(j, w)
    assert abs(r1) <= tol * s1 and abs(r2) <= tol * s2 and abs(r3) <= tol * s3


def same_up_to_sign(a, b, tol=1e-9):
    n = np.linalg.norm(a) + np.linalg.norm(b)
    return min(np.linalg.norm(a - b), np.linalg.norm(a + b)) <= tol * n


def test_normal_frame_identity():
    j = Jet3.from_parts(1.0, [0, 0, 2.0], np.diag([1.0, -3.0, 0.5]), np.zeros((3, 3, 3)))
    fr = normal_frame(j)
    assert np.allclose(np.abs(fr.Q), np.eye(3), atol=1e-15)


def test_normal_frame_x1x2x3():
    fr = normal_frame(eval_jet("x1*x2*x3", [1.0, 1.0, 1.0]))
    rj = fr.rotated
    assert abs(rj.grad[2]) == pytest.approx(np.sqrt(3.0), rel=1e-14)
    assert max(abs(rj.grad[0]), abs(rj.grad[1]), abs(rj.hess[0, 1])) < 1e-12
    assert np.allclose(fr.Q @ fr.Q.T, np.eye(3), atol=1e-12)


def test_critical_point():
    j = eval_jet("x1^2+x2^2", [0.0, 0.0, 1.0])
    with pytest.raises(CriticalPoint):
        normal_frame(j)
    with pytest.raises(CriticalPoint):
        solve_directions(j)


def test_quadratic_example():
    j = eval_jet("x1^2-x2^2-x3^2", [1.0, 1.0, 0.0])
    sol = solve_directions(j)
    assert sol.cls == "TwoDistinct" and len(sol.omegas) == 1
    assert np.allclose(sol.omegas[0], [2.0, 2.0, 0.0], atol=1e-12)


def test_linear_infinitely_many():
    sol = solve_directions(eval_jet("x1", [0.3, 0.1, 0.2]))
    assert sol.cls == "InfinitelyMany"
    for w in sol.omegas:
        assert_solves(eval_jet("x1", [0.3, 0.1, 0.2]), w)


def test_x1x2x3_none_real():
    sol = solve_directions(eval_jet("x1*x2*x3", [1.0, 1.0, 1.0]))
    assert sol.cls == "NoneReal" and sol.omegas == [] and sol.X > 0


def test_cylindrical_directions():
    e = G.get("cylindrical-1-1")
    p = np.array([0.5, 0.6, 0.8])  # r = 1
    j = eval_jet(e.f_expr, p)
    sol = solve_directions(j)
    assert sol.cls == "FourDistinct"
    expected = [np.array([1.0, p[2], -p[1]]), np.array([1.0, -p[2], p[1]])]
    for w in expected:
        assert any(same_up_to_sign(w, s) for s in sol.omegas)
    # eta of the first expected direction is the second one, up to sign
    eta = eta_from_omega(j, expected[0])
    assert same_up_to_sign(eta, expected[1])
    assert not same_up_to_sign(eta, expected[0], tol=1e-3)


def test_representative_sign_rule():
    for j in random_jets(np.random.default_rng(3), 50):
        for w in solve_directions(j).omegas:
            nz = w[np.abs(w) > 1e-12 * np.linalg.norm(w)]
            assert nz[0] > 0


@pytest.mark.parametrize("f11,f22", [(0.8, -1.4), (-1.4, 0.8)])
def test_eta_normal_frame(f11, f22):
    f3 = 1.5
    f33 = -(f11 + f22) / 2 + 0.1
    j = Jet3.from_parts(0.0, [0, 0, f3], np.diag([f11, f22, f33]), np.zeros((3, 3, 3)))
    w1 = np.sqrt(f3 ** 2 * (f22 + f33) / (f22 - f11))
    w2 = np.sqrt(f3 ** 2 * (f11 + f33) / (f11 - f22))
    w = np.array([w1, w2, 0.0])
    assert_solves(j, w)
    # in this frame sqrt(Y) eta = f3^2 (f22 - f11) (w1, -w2, 0)
    s = np.sign(f22 - f11)
    assert np.allclose(eta_from_omega(j, w), s * np.array([w1, -w2, 0.0]), rtol=1e-12)


def test_eta_degenerate_for_log_r():
    j = eval_jet("log(sqrt(x1^2+x2^2+x3^2))", [0.4, 0.5, 0.6])
    w = np.cross(j.grad, [1.0, 0.0, 0.0])
    w *= np.linalg.norm(j.grad) / np.linalg.norm(w)
    with pytest.raises(DegenerateY):
        eta_from_omega(j, w)


def test_eta_rejects_invalid_omega():
    j = random_jets(np.random.default_rng(4), 1)[0]
    with pytest.raises(ConstraintViolation):
        eta_from_omega(j, np.array([1.0, 2.0, 3.0]))


def test_continue_branch():
    j = random_jets(np.random.default_rng(5), 1)[0]
    sol = solve_directions(j)
    w = sol.omegas[0]
    eta = eta_from_omega(j, w)
    assert np.array_equal(continue_branch(w, sol), w)
    assert same_up_to_sign(continue_branch(-eta, sol), -eta)
    assert np.dot(continue_branch(-eta, sol), -eta) > 0


def test_continue_branch_tie():
    j = Jet3.from_parts(0.0, [0, 0, 1.0], np.diag([1.0, -1.0, 0.0]), np.zeros((3, 3, 3)))
    sol = solve_directions(j)
    assert sol.cls == "FourDistinct"
    w = sol.omegas[0]
    # orthogonal to every candidate
    prev = np.cross(sol.omegas[0], sol.omegas[1])
    with pytest.raises(AmbiguousBranch):
        continue_branch(prev, sol)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=100)
def test_returned_directions_solve(seed):
    j = random_jets(np.random.default_rng(seed), 1, real=False)[0]
    sol = solve_directions(j)
    assert len(sol.omegas) == {"FourDistinct": 2, "TwoDistinct": 1, "NoneReal": 0,
                               "InfinitelyMany": 2}[sol.cls]
    for w in sol.omegas:
        assert_solves(j, w)
        if sol.cls == "FourDistinct":
            assert_solves(j, eta_from_omega(j, w), tol=1e-8)
    if sol.cls != "NoneReal":
        assert sol.Xrel <= 1e-8


def test_count_matches_brute_force():
    js = random_jets(np.random.default_rng(6), 300, real=False)
    for k in range(300):
        sol = solve_directions(js[k])
        n = {"FourDistinct": 4, "TwoDistinct": 2, "NoneReal": 0, "InfinitelyMany": np.inf}[sol.cls]
        assert n == brute_force_count(js[k])


def test_frame_independence():
    rng = np.random.default_rng(7)
    js = random_jets(rng, 50)
    for k in range(50):
        Q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        a = solve_directions(js[k])
        b = solve_directions(rotate_jet(js[k], Q))
        assert a.cls == b.cls
        for w in a.omegas:
            assert any(same_up_to_sign(Q @ w, v) for v in b.omegas)


def test_batch_matches_single():
    js = random_jets(np.random.default_rng(8), 40, real=False)
    cls, om, *_ = solve_batch(js)
    for k in range(40):
        sol = solve_directions(js[k])
        for i, w in enumerate(sol.omegas):
            assert np.array_equal(om[k, i], w)


def test_all_candidates():
    sol = solve_directions(random_jets(np.random.default_rng(9), 1)[0])
    c = all_candidates(sol)
    assert len(c) == 4 and np.array_equal(c[1], -c[0])
