import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import det_by_elimination

from salsa_rl.stability.eigen import (
    EigenConvergenceError, eigenvalues, hessenberg, principal_log, sort_by_modulus, spectral_radius,
)


def _close_sets(a, b, tol):
    a, b = list(a), list(b)
    for x in a:
        j = min(range(len(b)), key=lambda k: abs(b[k] - x))
        if abs(b[j] - x) > tol:
            return False
        b.pop(j)
    return not b


def test_diagonal():
    assert _close_sets(eigenvalues(np.diag([0.5, -0.3, 0.1])), [0.5, -0.3, 0.1], 1e-15)
    assert eigenvalues(np.diag([0.5, -0.3, 0.1])) == [0.5, -0.3, 0.1]  # descending modulus


def test_rotation_generator():
    assert _close_sets(eigenvalues([[0.0, -1.0], [1.0, 0.0]]), [1j, -1j], 1e-15)


def test_one_by_one_and_zero():
    assert eigenvalues([[3.0]]) == [3.0]
    assert eigenvalues(np.zeros((4, 4))) == [0.0] * 4


def test_jordan_block_multiplicity():
    ev = eigenvalues([[0.9, 10.0, 0.0], [0.0, 0.9, 10.0], [0.0, 0.0, 0.9]])
    assert len(ev) == 3
    # a defective triple root is only determined to ~eps^(1/3)
    assert all(abs(v - 0.9) < 1e-4 for v in ev)


def test_det_trace_oracle_on_random_matrices():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        a = rng.normal(size=(n, n))
        ev = np.array(eigenvalues(a))
        assert abs(np.prod(ev) - det_by_elimination(a)) < 1e-8
        assert abs(np.sum(ev) - np.trace(a)) < 1e-8
        assert abs(np.sum(ev).imag) < 1e-8


def test_agrees_with_lapack():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(1, 12))
        a = rng.normal(size=(n, n)) * rng.uniform(0.1, 10)
        assert _close_sets(eigenvalues(a), np.linalg.eigvals(a), 1e-8 * max(1.0, np.abs(a).max()))


def test_sorted_by_descending_modulus():
    rng = np.random.default_rng(2)
    for _ in range(50):
        mods = [abs(v) for v in eigenvalues(rng.normal(size=(6, 6)))]
        assert all(x >= y - 1e-15 for x, y in zip(mods, mods[1:]))
    assert sort_by_modulus([1, -3, 2j]) == [-3, 2j, 1]


def test_hessenberg_is_similar_and_upper_hessenberg():
    a = np.random.default_rng(3).normal(size=(7, 7))
    h = hessenberg(a)
    assert np.allclose(np.tril(h, -2), 0.0, atol=1e-14)
    assert np.trace(h) == pytest.approx(np.trace(a), abs=1e-12)
    assert np.linalg.norm(h) == pytest.approx(np.linalg.norm(a), rel=1e-12)


def test_bad_inputs():
    with pytest.raises(ValueError):
        eigenvalues(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        eigenvalues(np.zeros((65, 65)))
    with pytest.raises(ValueError):
        eigenvalues([[np.nan, 0.0], [0.0, 1.0]])


def test_non_convergence_names_the_matrix():
    a = np.random.default_rng(4).normal(size=(6, 6))
    with pytest.raises(EigenConvergenceError) as info:
        eigenvalues(a, max_sweeps=1)
    assert "matrix" in str(info.value)


def test_spectral_radius_and_log():
    assert spectral_radius([[0.0, -1.2], [1.2, 0.0]]) == pytest.approx(1.2, abs=1e-15)
    assert principal_log([-1.0])[0] == pytest.approx(cmath.log(-1.0))


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=1, max_value=8), st.integers(min_value=0, max_value=2**32 - 1))
def test_similarity_invariance(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    t = np.eye(n) + 0.3 * rng.normal(size=(n, n))
    for b in (q @ a @ q.T, t @ a @ np.linalg.inv(t)):
        ev_a, ev_b = eigenvalues(a), eigenvalues(b)
        assert abs(np.prod(ev_a) - np.prod(ev_b)) < 1e-8 * max(1.0, abs(np.prod(ev_a)))
        assert abs(np.sum(ev_a) - np.sum(ev_b)) < 1e-8 * max(1.0, np.abs(a).sum())
        assert abs(max(map(abs, ev_a)) - max(map(abs, ev_b))) < 1e-6
