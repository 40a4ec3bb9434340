import numpy as np
import pytest

from frictionlab.errors import MassNotNormalized, QuantileFailure
from frictionlab.measures import DensityProfile, ParticleEnsemble


def test_gaussian_profile_unit_mass_and_moments():
    prof = DensityProfile.gaussian(0.3, 0.5, -4, 4, 512)
    assert prof.rho.sum() * prof.dx == pytest.approx(1.0, abs=1e-14)
    mean = float((prof.centers * prof.rho).sum() * prof.dx)
    var = float(((prof.centers - mean) ** 2 * prof.rho).sum() * prof.dx)
    assert mean == pytest.approx(0.3, abs=1e-6)
    # cell-averaged variance carries a dx^2/12 correction
    assert var == pytest.approx(0.25 + prof.dx**2 / 12.0, abs=1e-6)


def test_profile_rejects_bad_mass():
    with pytest.raises(MassNotNormalized):
        DensityProfile(0.0, 1.0, np.full(10, 2.0))
    with pytest.raises(MassNotNormalized):
        DensityProfile(0.0, 1.0, -np.ones(10))


def test_profile_cdf_quantile_roundtrip():
    prof = DensityProfile.gaussian(0.0, 1.0, -6, 6, 1024)
    qs = np.linspace(0.01, 0.99, 37)
    xs = prof.quantile(qs)
    back = prof.cdf(xs)
    assert np.abs(back - qs).max() <= 1e-12


def test_quantile_midpoint_plateau_convention():
    # density supported on [0,1] and [2,3]: the q=0.5 plateau spans [1,2]
    rho = np.zeros(40)
    rho[:10] = 1.0  # [0,1]
    rho[20:30] = 1.0  # [2,3]
    prof = DensityProfile.from_masses(0.0, 4.0, rho)
    assert prof.quantile(0.5, plateau="inf") == pytest.approx(1.0, abs=1e-12)
    assert prof.quantile(0.5, plateau="mid") == pytest.approx(1.5, abs=1e-12)


def test_quantile_failure_on_bad_levels():
    prof = DensityProfile.uniform(0, 1, 0, 1, 32)
    with pytest.raises(QuantileFailure):
        prof.quantile(np.array([0.2, 1.0]))


def test_ensemble_validation():
    with pytest.raises(MassNotNormalized):
        ParticleEnsemble(np.array([0.0, 1.0]), np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        ParticleEnsemble(np.array([0.0, np.inf]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        ParticleEnsemble(np.array([0.0, 1.0]), np.array([0.5, 0.5]), np.array([1.0]))


def test_ensemble_sorted_arrays():
    ens = ParticleEnsemble(
        np.array([2.0, -1.0, 0.5]), np.array([0.2, 0.3, 0.5]), np.array([1.0, 2.0, 3.0])
    )
    pos, mass, vel = ens.sorted_arrays()
    assert list(pos) == [-1.0, 0.5, 2.0]
    assert list(mass) == [0.3, 0.5, 0.2]
    assert list(vel) == [2.0, 3.0, 1.0]
