import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghostradar import objective as obj
from ghostradar.array import direct_matrix, ula
from ghostradar.cscd_h0 import StopConfigH0, angle_grid, cscd_h0, gn_refine, grid_select_direct, omp_h0
from ghostradar.scene import DirectPath, Scene, complex_normal, synthesize

NOISELESS = StopConfigH0(eps=1e-6)


def test_angle_grid():
    g = angle_grid(2.0)
    assert g.size == 91 and g[0] == -90.0 and g[-1] == 90.0
    g7 = angle_grid(7.0)
    assert g7[0] == -90.0 and g7[-1] == 85.0


def test_grid_select_exact_and_ties(geom):
    grid = angle_grid(2.0)
    z = direct_matrix(geom, [-36.0])[:, 0]
    assert grid_select_direct(z, grid, geom) == -36.0
    assert grid_select_direct(np.zeros(48, complex), grid[::-1], geom) == -90.0
    with pytest.raises(ValueError):
        grid_select_direct(z, [], geom)


def test_off_grid_direct_path(geom):
    z = direct_matrix(geom, [10.7])[:, 0] * (2 - 1j)
    assert abs(cscd_h0(z, geom, NOISELESS).theta0[0] - 10.7) < 1e-3
    omp = omp_h0(z, geom, NOISELESS)
    assert abs(omp.theta0[0] - 10.7) >= 0.5


def test_two_noiseless_direct_paths(geom):
    z = direct_matrix(geom, [-20.3, 33.1]) @ np.array([1.0, 0.7j])
    est = cscd_h0(z, geom, NOISELESS)
    np.testing.assert_allclose(np.sort(est.theta0), [-20.3, 33.1], atol=1e-3)
    assert est.residual_norm < 1e-6


def test_noise_only_below_threshold_gives_empty_set(geom):
    z = np.full(48, 0.1 + 0j)
    est = cscd_h0(z, geom)
    assert est.k0 == 0 and est.iterations == 0
    assert est.residual_norm == pytest.approx(np.linalg.norm(z))


def test_identifiability_cap(geom):
    z = complex_normal(np.random.default_rng(1), 1.0, 48)
    cfg = StopConfigH0(max_iter=200, eps=1e-9, eps1=-np.inf, refine_iter=0)
    est = omp_h0(z, geom, cfg)
    assert est.k0 < geom.n_virtual - 1


def test_stops_on_small_improvement(geom):
    z = complex_normal(np.random.default_rng(2), 1.0, 48) * 3
    est = cscd_h0(z, geom, StopConfigH0(eps1=0.4))
    norms = [np.linalg.norm(z)] + [t["residual_norm"] for t in est.trace]
    gains = -np.diff(norms)
    assert np.all(gains[:-1] > 0.4)
    assert est.iterations == 10 or gains[-1] <= 0.4 or norms[-1] <= np.sqrt(48)


def test_max_iter(geom):
    z = direct_matrix(geom, [-50.0, -20.0, 10.0, 40.0]) @ np.ones(4) * 10
    est = cscd_h0(z, geom, StopConfigH0(max_iter=2, eps=1e-6))
    assert est.k0 == 2


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_gn_refine_never_increases_objective(seed):
    g = ula()
    rng = np.random.default_rng(seed)
    scene = Scene((DirectPath(rng.uniform(-60, 60), 5.0),), sigma2=1.0)
    z = synthesize(g, scene, rng).z
    start = np.array([np.round(scene.direct[0].theta / 2) * 2])
    out = gn_refine(g, start, z)
    assert obj.objective(g, out, 0, z) <= obj.objective(g, start, 0, z) + 1e-12
    assert np.all(np.abs(out) <= 90)


def test_config_validation():
    with pytest.raises(ValueError):
        StopConfigH0(max_iter=0)
    with pytest.raises(ValueError):
        StopConfigH0(grid_step=0)
    with pytest.raises(ValueError):
        StopConfigH0(eps=-1)
    assert StopConfigH0(sigma2=2.0).epsilon(48) == pytest.approx(np.sqrt(96))


def test_estimate_dict(geom):
    z = direct_matrix(geom, [10.7])[:, 0]
    d = cscd_h0(z, geom, NOISELESS).to_dict()
    assert set(d) == {"k0", "theta0_deg", "alpha", "residual_norm", "iterations"}
    assert d["k0"] == 1 and len(d["alpha"][0]) == 2


def test_wrong_snapshot_length(geom):
    with pytest.raises(ValueError):
        cscd_h0(np.zeros(10, complex), geom)
