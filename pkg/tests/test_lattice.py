import numpy as np
import pytest

from cgentangle.gaussian import entanglement_entropy, symplectic_spectrum
from cgentangle.lattice import (
    LatticeModel,
    dispersion,
    momentum_grid,
    vacuum_covariance,
)


def test_dispersion_at_rest():
    for kind in ("lattice", "continuum"):
        assert dispersion(LatticeModel(8, 1.0, dispersion_kind=kind), 0.0) == pytest.approx(1.0)


def test_dispersion_massless_continuum():
    model = LatticeModel(8, 0.0, dispersion_kind="continuum", mass_regulator=1e-300)
    k = momentum_grid(model).wavenumbers
    np.testing.assert_allclose(dispersion(model, k), np.abs(k), atol=1e-12)


def test_dispersion_lattice_zone_edge():
    model = LatticeModel(8, 1.0, dispersion_kind="lattice")
    assert dispersion(model, np.pi) == pytest.approx(np.sqrt(5.0), abs=1e-14)


@pytest.mark.parametrize("n", [2, 7, 8, 33])
def test_momentum_grid(n):
    grid = momentum_grid(LatticeModel(n, 1.0, spacing=0.5))
    assert len(grid) == n
    k = grid.wavenumbers
    expected = 2 * np.pi * np.arange(-(n // 2), -(n // 2) + n) / (n * 0.5)
    np.testing.assert_allclose(k, expected)
    # symmetric under k -> -k except the unpaired Nyquist point for even n
    unpaired = [x for x in k if not np.any(np.isclose(k, -x))]
    assert len(unpaired) == (1 if n % 2 == 0 else 0)
    assert grid.weights.sum() == pytest.approx(1.0)


def test_single_oscillator_vacuum():
    cov = vacuum_covariance(LatticeModel(1, 1.0))
    np.testing.assert_allclose(cov.X, [[0.5]])
    np.testing.assert_allclose(cov.P, [[0.5]])


def test_massless_without_regulator_rejected():
    with pytest.raises(ValueError, match="zero mode"):
        vacuum_covariance(LatticeModel(8, 0.0, mass_regulator=None))


@pytest.mark.parametrize("bad", [dict(num_sites=0, mass=1.0), dict(num_sites=4, mass=-1.0),
                                 dict(num_sites=4, mass=1.0, spacing=0.0),
                                 dict(num_sites=4, mass=1.0, dispersion_kind="bogus")])
def test_invalid_models(bad):
    with pytest.raises(ValueError):
        LatticeModel(**bad)


@pytest.mark.parametrize("n,m,kind", [(16, 0.3, "lattice"), (17, 1.0, "continuum"), (64, 0.01, "lattice")])
def test_vacuum_is_pure_and_translation_invariant(n, m, kind):
    cov = vacuum_covariance(LatticeModel(n, m, dispersion_kind=kind))
    nu = symplectic_spectrum(cov).values
    np.testing.assert_allclose(nu, 0.5, atol=1e-10)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    assert np.max(np.abs(cov.X - cov.X[0, (j - i) % n])) < 1e-12
    assert np.max(np.abs(cov.P - cov.P[0, (j - i) % n])) < 1e-12
    assert np.all(np.linalg.eigvalsh(cov.X) > 0)
    assert np.all(np.linalg.eigvals(cov.X @ cov.P).real >= 0.25 - 1e-10)


def test_correlations_decay_on_compton_scale():
    # N=64, m a = 0.5; in 1D X_0r ~ exp(-r/xi)/sqrt(r), so fit log(sqrt(r) X_0r)
    cov = vacuum_covariance(LatticeModel(64, 0.5))
    r = np.arange(4, 20)
    slope, _ = np.polyfit(r, np.log(np.sqrt(r) * cov.X[0, r]), 1)
    assert -1 / slope == pytest.approx(2.0, rel=0.05)


def test_spacing_enters_only_through_mass_times_spacing():
    a = vacuum_covariance(LatticeModel(32, 0.4, spacing=1.0))
    b = vacuum_covariance(LatticeModel(32, 0.8, spacing=0.5))
    np.testing.assert_allclose(a.X, b.X, atol=1e-13)
    np.testing.assert_allclose(a.P, b.P, atol=1e-13)


def test_continuum_limit_adds_log_two_over_three():
    # halving the spacing at fixed physical length, region and mass
    coarse = LatticeModel(256, 0.0, mass_regulator=1e-6)
    fine = LatticeModel(512, 0.0, mass_regulator=5e-7)
    s_coarse = entanglement_entropy(coarse, range(16))
    s_fine = entanglement_entropy(fine, range(32))
    assert s_fine - s_coarse == pytest.approx(np.log(2) / 3, rel=0.05)
