"""Python smoke tests for the tomornn extension."""

import cmath
import math

import numpy as np
import pytest

import tomornn as tn


@pytest.fixture(scope="module")
def geom():
    return tn.AcquisitionGeometry.reference()


@pytest.fixture(scope="module")
def grid():
    return tn.ElevationGrid.reference()


def test_reference_geometry(geom, grid):
    assert geom.n == 25
    assert grid.l == 321
    assert tn.rayleigh_resolution(geom) == pytest.approx(42.0)
    r = tn.build_steering_matrix(geom, grid)
    assert r.shape == (25, 321)
    assert np.allclose(np.abs(r), 1.0, atol=1e-12)


def test_crlb_monotone_in_snr(geom):
    c6 = tn.crlb_elevation(geom, 6.0, 0.0)
    c12 = tn.crlb_elevation(geom, 12.0, 0.0)
    assert 0 < c12 < c6
    assert c6 / c12 == pytest.approx(math.sqrt(10 ** 0.6), rel=1e-9)


def test_activations():
    y = tn.soft_threshold_cv(3.0 * cmath.exp(1j * math.pi / 4), 1.0)
    assert y == pytest.approx(2.0 * cmath.exp(1j * math.pi / 4))
    assert tn.double_tanh(0.0, 0.5, 1.0) == 0.0
    assert tn.double_tanh(1.0, 0.5, 1.0) == pytest.approx(0.5 * math.tanh(2.0))
    assert tn.sigmoid(0.0) == 0.5
    out = tn.piecewise_linear_cv(0.8 + 0j, 0.5, 1.0, 0.2, 1.0, 1.5)
    assert out.real == pytest.approx(0.40)


def test_ista_reduces_the_objective(geom):
    grid = tn.ElevationGrid(0.0, 63.0, 1.0)
    r = tn.build_steering_matrix(geom, grid)
    rng = np.random.default_rng(3)
    truth = np.zeros(64, dtype=complex)
    truth[10] = 2.0
    truth[40] = 1.5j
    g = r @ truth + 0.1 * (rng.standard_normal(25) + 1j * rng.standard_normal(25))
    beta = tn.default_step_size(r)
    lam = 1.0
    f0 = tn.bpdn_objective(np.zeros(64, dtype=complex), g, r, lam)
    sol = tn.ista_solve(g, r, beta, lam, 2000)
    f1 = tn.bpdn_objective(sol, g, r, lam)
    assert f1 < f0
    # one more step barely moves a converged iterate
    nxt = tn.ista_step(sol, g, r, beta, lam)
    assert np.max(np.abs(nxt - sol)) < 1e-4


def test_forward_and_trace(geom, grid):
    ckpt = tn.init_checkpoint("cv_smgu", geom, grid, depth=3, seed=5)
    assert ckpt.architecture == "cv_smgu"
    assert ckpt.depth == 3
    truth = tn.benchmark_truth(0.8, 6.0, 1.0, 0.0, grid, 42.0)
    g = tn.synthesize(geom, truth, seed=11)
    out = tn.forward(ckpt, g, geom, grid)
    assert out.shape == (321,)
    trace = tn.forward_trace(ckpt, g, geom, grid)
    assert len(trace) == 3
    assert np.allclose(trace[-1], out)


def test_simulation_laws(grid, geom):
    t = tn.sample_single(grid, seed=9)
    assert len(t.scatterers) == 1
    assert 1.0 < t.scatterers[0].amplitude < 4.0
    d = tn.sample_double(grid, 42.0, seed=10)
    assert len(d.scatterers) == 2
    sup = d.support()
    assert sup[0] != sup[1]
    profile = d.profile()
    assert np.count_nonzero(profile) == 2
    # noise-free synthesis matches R @ profile
    d.snr_db = float("inf")
    g = tn.synthesize(geom, d, seed=1)
    r = tn.build_steering_matrix(geom, tn.ElevationGrid.reference())
    assert np.allclose(g, r @ profile, atol=1e-10)


def test_detection_chain(geom, grid):
    r = tn.build_steering_matrix(geom, grid)
    profile = np.zeros(321, dtype=complex)
    profile[100] = 1.5
    profile[130] = 1.0 + 0.5j
    g = r @ profile
    params = tn.DetectionParams()
    ext = tn.extract_scatterers(profile, grid, params, g, geom)
    assert ext.order == 2
    bins = sorted(s.bin for s in ext.scatterers)
    assert bins == [100, 130]

    truth = tn.benchmark_truth(30.0 / 42.0, 6.0, 1.5, 0.5, grid, 42.0, 80.0)
    crlb = tn.crlb_elevation(geom, 6.0, 0.0)
    # exact estimates at the truth bins are an effective detection
    d_s = abs(truth.scatterers[1].elevation - truth.scatterers[0].elevation)
    g2 = tn.synthesize(geom, truth, seed=2)
    hat = truth.profile()
    ext2 = tn.extract_scatterers(hat, grid, params, g2, geom)
    assert tn.effective_detection(ext2, truth, max(crlb, 1.0), d_s)


def test_nmse_and_wilson():
    t = np.array([1.0 + 0j, 1j])
    assert tn.nmse_db([np.zeros(2, dtype=complex)], [t]) == pytest.approx(0.0)
    lo, hi = tn.wilson_interval(50, 100)
    assert lo < 0.5 < hi


def test_checkpoint_roundtrip(tmp_path, geom, grid):
    ckpt = tn.init_checkpoint("gamma_net", geom, grid, depth=2, seed=3)
    path = str(tmp_path / "ckpt.tsck")
    tn.save_checkpoint(ckpt, path)
    back = tn.load_checkpoint(path)
    assert back.architecture == "gamma_net"
    g = tn.synthesize(geom, tn.sample_single(grid, seed=4), seed=5)
    a = tn.forward(ckpt, g, geom, grid)
    b = tn.forward(back, g, geom, grid)
    assert np.array_equal(a, b)


def test_train_tiny(tmp_path):
    geom = tn.AcquisitionGeometry.from_span_and_resolution(8, -60.0, 60.0, 4.0)
    grid = tn.ElevationGrid(0.0, 15.0, 1.0)
    ds = str(tmp_path / "tiny.tsds")
    tn.build_dataset(64, 5, geom, grid, ds)
    ckpt = tn.train("cv_smgu", depth=2, epochs=2, dataset_path=ds, geometry=geom,
                    grid=grid, seed=5, validation_samples=16)
    assert len(ckpt.train_loss) == 2
    assert ckpt.parameter_count > 0
