import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghostradar import objective as obj
from ghostradar.array import build_response, projector_complement, ula
from ghostradar.cscd_h0 import gn_gradient, gn_hessian
from ghostradar.cscd_h1 import MixedAngleSet, group_gradient, group_hessian
from ghostradar.scene import complex_normal

H = 1e-5  # radians


def separated_angles(rng, n, min_sep=1.0, lo=-70.0, hi=70.0):
    while True:
        a = rng.uniform(lo, hi, n)
        if n < 2 or np.min(np.diff(np.sort(a))) >= min_sep:
            return a


def residual(geom, angles, k1, z):
    t1, p1, t0 = obj.split_angles(angles, k1)
    A = build_response(geom, t0, np.column_stack([t1, p1])).entries
    return projector_complement(A) @ z


def fd_gradient(geom, angles, k1, z):
    g = np.zeros(angles.size)
    for i in range(angles.size):
        e = np.zeros(angles.size)
        e[i] = np.rad2deg(H)
        g[i] = (obj.objective(geom, angles + e, k1, z) - obj.objective(geom, angles - e, k1, z)) / (2 * H)
    return g


def fd_gauss_newton(geom, angles, k1, z):
    J = np.zeros((z.size, angles.size), dtype=complex)
    for i in range(angles.size):
        e = np.zeros(angles.size)
        e[i] = np.rad2deg(H)
        J[:, i] = (residual(geom, angles + e, k1, z) - residual(geom, angles - e, k1, z)) / (2 * H)
    return 2 * (J.conj().T @ J).real


def random_config(rng, k0, k1):
    angles = separated_angles(rng, k0 + 2 * k1)
    pairs = np.sort(angles[:2 * k1].reshape(-1, 2), axis=1)
    stacked = np.concatenate([pairs[:, 0], pairs[:, 1], angles[2 * k1:]])
    g = ula()
    A = build_response(g, angles[2 * k1:], pairs).entries
    amp = complex_normal(rng, 10.0, A.shape[1])
    # perturb so the gradient is not zero
    z = A @ amp + complex_normal(rng, 1.0, 48)
    return g, stacked, z


def test_objective_equals_projected_energy(geom, rng):
    g, angles, z = random_config(rng, 1, 1)
    assert obj.objective(g, angles, 1, z) == pytest.approx(np.linalg.norm(residual(g, angles, 1, z)) ** 2)
    assert obj.evaluate(g, angles, 1, z).value == pytest.approx(obj.objective(g, angles, 1, z))
    assert obj.objective(g, np.zeros(0), 0, z) == pytest.approx(np.linalg.norm(z) ** 2)


@pytest.mark.parametrize("k0,k1", [(1, 0), (3, 0), (0, 1), (1, 1), (2, 2)])
def test_gradient_matches_central_differences(k0, k1):
    rng = np.random.default_rng(100 + 10 * k0 + k1)
    for _ in range(5):
        g, angles, z = random_config(rng, k0, k1)
        if k1 == 0:
            analytic = gn_gradient(g, angles, z)
        else:
            analytic = group_gradient(g, MixedAngleSet.from_stacked(angles, k1), z)
        fd = fd_gradient(g, angles, k1, z)
        assert np.linalg.norm(analytic - fd) <= 1e-5 * np.linalg.norm(fd)


@pytest.mark.parametrize("k0,k1", [(1, 0), (3, 0), (0, 1), (1, 1), (2, 2)])
def test_hessian_matches_fd_jacobian(k0, k1):
    rng = np.random.default_rng(200 + 10 * k0 + k1)
    for _ in range(3):
        g, angles, z = random_config(rng, k0, k1)
        if k1 == 0:
            Hm = gn_hessian(g, angles, z)
        else:
            Hm = group_hessian(g, MixedAngleSet.from_stacked(angles, k1), z)
        oracle = fd_gauss_newton(g, angles, k1, z)
        assert np.max(np.abs(Hm - Hm.T)) <= 1e-10 * np.max(np.abs(Hm))
        assert np.linalg.norm(Hm - oracle) <= 1e-4 * np.linalg.norm(oracle)


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_gauss_newton_hessian_is_psd(seed):
    rng = np.random.default_rng(seed)
    g, angles, z = random_config(rng, 1, 1)
    Hm = obj.hessian(obj.evaluate(g, angles, 1, z))
    assert np.min(np.linalg.eigvalsh(Hm)) >= -1e-9 * np.max(np.abs(Hm))


def test_empty_angle_set(geom):
    z = complex_normal(np.random.default_rng(0), 1.0, 48)
    st_ = obj.evaluate(geom, np.zeros(0), 0, z)
    assert obj.gradient(st_).size == 0
    assert obj.hessian(st_).shape == (0, 0)
