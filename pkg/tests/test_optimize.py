import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from entcert.optimize import (
    OptimizerConfig,
    _generator,
    _generator_grad,
    complete_to_unitary,
    expm_with_adjoint,
    minimize_isometry,
)
from entcert.sampling import random_unitary

seeds = st.integers(0, 2**32 - 1)


def polar_objective(c):
    """F(U) = -Re Tr(C^dag U); its minimum over isometries is minus the nuclear norm of C."""
    def objective(u):
        return -float(np.vdot(c, u).real), -c / 2
    return objective


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 5))
def test_expm_matches_scipy(seed, m):
    rng = np.random.default_rng(seed)
    k = _generator(rng.normal(size=m * m), m)
    assert np.allclose(k, -k.conj().T)
    ek, _ = expm_with_adjoint(k)
    assert np.max(np.abs(ek - scipy.linalg.expm(k))) < 1e-10


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 5))
def test_adjoint_of_frechet_derivative(seed, m):
    rng = np.random.default_rng(seed)
    k = _generator(rng.normal(size=m * m), m)
    dk = _generator(rng.normal(size=m * m), m)
    y = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    _, adjoint = expm_with_adjoint(k)
    frechet = scipy.linalg.expm_frechet(k, dk, compute_expm=False)
    assert abs(np.vdot(y, frechet) - np.vdot(adjoint(y), dk)) < 1e-10


def test_generator_gradient_by_finite_differences(rng):
    m = 3
    c = rng.normal(size=(m, 2)) + 1j * rng.normal(size=(m, 2))
    w0 = random_unitary(m, rng)
    obj = polar_objective(c)

    def f(theta):
        return obj((w0 @ scipy.linalg.expm(_generator(theta, m)))[:, :2])[0]

    theta = rng.normal(size=m * m) * 0.3
    ek, adjoint = expm_with_adjoint(_generator(theta, m))
    full = np.zeros((m, m), dtype=complex)
    full[:, :2] = obj((w0 @ ek)[:, :2])[1]
    grad = _generator_grad(adjoint(w0.conj().T @ full))
    h = 1e-6
    fd = np.array([(f(theta + h * e) - f(theta - h * e)) / (2 * h) for e in np.eye(m * m)])
    assert np.max(np.abs(grad - fd)) < 1e-7


@pytest.mark.parametrize("m, r", [(1, 1), (2, 1), (3, 2), (4, 4)])
def test_minimize_isometry_reaches_polar_optimum(m, r):
    rng = np.random.default_rng(m * 10 + r)
    c = rng.normal(size=(m, r)) + 1j * rng.normal(size=(m, r))
    res = minimize_isometry(polar_objective(c), m, r, OptimizerConfig(restarts=4))
    nuclear = np.sum(np.linalg.svd(c, compute_uv=False))
    assert abs(res.value + nuclear) < 1e-8
    assert np.max(np.abs(res.isometry.conj().T @ res.isometry - np.eye(r))) < 1e-10
    assert res.converged
    assert abs(polar_objective(c)(res.isometry)[0] - res.value) < 1e-12


def test_warm_start_is_used_and_seed_is_deterministic(rng):
    c = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    u, _, vh = np.linalg.svd(c)
    cfg = OptimizerConfig(restarts=0)
    res = minimize_isometry(polar_objective(c), 3, 3, cfg, warm_starts=[u @ vh])
    assert res.restarts_used == 1
    assert abs(res.value + np.sum(np.linalg.svd(c, compute_uv=False))) < 1e-10
    cfg = OptimizerConfig(restarts=3, seed=9)
    a = minimize_isometry(polar_objective(c[:, :2]), 3, 2, cfg)
    b = minimize_isometry(polar_objective(c[:, :2]), 3, 2, cfg)
    assert a.value == b.value and np.array_equal(a.isometry, b.isometry)


def test_complete_to_unitary(rng):
    iso = random_unitary(4, rng)[:, :2]
    u = complete_to_unitary(iso)
    assert np.allclose(u.conj().T @ u, np.eye(4)) and np.allclose(u[:, :2], iso)


def test_rejects_wide_isometry():
    with pytest.raises(ValueError):
        minimize_isometry(polar_objective(np.ones((2, 3))), 2, 3, OptimizerConfig())
