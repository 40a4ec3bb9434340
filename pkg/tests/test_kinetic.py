import numpy as np
import pytest
from scipy.integrate import solve_ivp

from frictionlab.errors import (
    BoundaryMassLeak,
    CflViolation,
    MassLeakage,
    UnresolvedThermalWidth,
)
from frictionlab.kinetic import (
    KineticState,
    PhaseGrid,
    ScalingParams,
    init_kinetic,
    moments,
    run_kinetic,
    step_kinetic,
    step_kinetic_rates,
)
from frictionlab.measures import DensityProfile
from frictionlab.potentials import ConfinementSpec, QuadraticKernel
from frictionlab.snapshots import dump_kinetic, load_kinetic


def small_grid(nx=128, nv=128, v_half=2.5):
    return PhaseGrid(-4, 4, -v_half, v_half, nx, nv)


def gaussian_profile(nx=128, mean=0.0, sigma=0.5):
    return DensityProfile.gaussian(mean, sigma, -4, 4, nx)


FREE = dict(spec=ConfinementSpec(0.0), kernel=QuadraticKernel(0.0))


def test_scaling_params_relations():
    p = ScalingParams(epsilon=0.1, kappa=0.05)
    assert p.beta == 10.0
    assert p.lam is p.beta or p.lam == p.beta
    assert p.kappa_gamma == p.lam  # exact by construction
    assert p.gamma == pytest.approx(200.0)
    with pytest.raises(ValueError):
        ScalingParams(epsilon=0.0, kappa=0.1)


def test_grid_validation():
    with pytest.raises(ValueError):
        PhaseGrid(-1, 1, -1, 1, 4, 64)


def test_init_unit_mass_and_symmetry():
    grid = small_grid()
    state = init_kinetic(gaussian_profile(), 0.0, 0.1, grid)
    assert state.total_mass() == pytest.approx(1.0, abs=1e-14)
    assert state.f.min() >= 0.0
    mom = moments(state, ScalingParams(0.1, 0.05))
    assert float(mom.m.sum() * grid.dx) == pytest.approx(0.0, abs=1e-13)


def test_init_thermal_width():
    grid = PhaseGrid(-4, 4, -1.5, 1.5, 192, 192)
    theta = 0.05
    state = init_kinetic(gaussian_profile(192), lambda x: -x * 0.0, theta, grid)
    # second centered v-moment reproduces theta^2 within 5 percent
    vc = grid.v_centers
    rho = state.f.sum(axis=1) * grid.dv
    m = state.f @ vc * grid.dv
    u = np.where(rho > 0, m / np.where(rho > 0, rho, 1.0), 0.0)
    w2 = float(((state.f @ vc**2) * grid.dv - 2 * u * m + u**2 * rho).sum() * grid.dx)
    assert w2 == pytest.approx(theta**2, rel=0.05)


def test_init_thermal_width_with_shear():
    grid = PhaseGrid(-4, 4, -4.6, 4.6, 256, 256)
    state = init_kinetic(gaussian_profile(256, sigma=1.0), lambda x: -x, 0.05 * 4, grid)
    assert state.total_mass() == pytest.approx(1.0, abs=1e-13)


def test_init_rejects_unresolved_width():
    grid = small_grid(nv=16)
    with pytest.raises(UnresolvedThermalWidth):
        init_kinetic(gaussian_profile(), 0.0, 0.01, grid)


def test_init_detects_boundary_mass():
    grid = small_grid(v_half=0.25)  # 2.5 thermal sigmas only
    with pytest.raises(MassLeakage):
        init_kinetic(gaussian_profile(), 0.0, 0.1, grid)


def test_moments_even_distribution():
    grid = small_grid()
    state = init_kinetic(gaussian_profile(), 0.0, 0.1, grid)
    mom = moments(state, ScalingParams(0.1, 0.05))
    assert np.abs(mom.m).max() <= 1e-15
    assert np.abs(mom.u_delta).max() <= 1e-12


def test_moments_single_cell_column():
    grid = small_grid()
    f = np.zeros((grid.nx, grid.nv))
    k = 90
    f[30, k] = 1.0
    f /= f.sum() * grid.cell_area
    state = KineticState(f=f, t=0.0, grid=grid)
    mom = moments(state, ScalingParams(1.0, 1.0, delta=0.0))
    assert mom.u_delta[30] == pytest.approx(grid.v_centers[k], rel=1e-12)


def test_moments_velocity_cutoff():
    grid = small_grid()
    f = np.zeros((grid.nx, grid.nv))
    k = int(np.searchsorted(grid.v_centers, 0.7))
    f[10, k] = 1.0
    f /= f.sum() * grid.cell_area
    state = KineticState(f=f, t=0.0, grid=grid)
    mom = moments(state, ScalingParams(1.0, 1.0, delta=0.0, zeta=0.5))
    assert mom.u_cut[10] == 0.0  # beyond the cutoff the velocity is zeroed
    assert abs(mom.u_delta[10]) > 0.5


def test_free_transport_translates_blob():
    grid = PhaseGrid(-4, 4, -2, 2, 256, 64)
    prof = gaussian_profile(256, mean=-1.0, sigma=0.3)
    state = init_kinetic(prof, 1.0, 0.15, grid)
    for _ in range(100):
        state = step_kinetic_rates(state, 0.0, 0.0, 0.0, FREE["spec"], FREE["kernel"], 5e-3)
    mom = moments(state, ScalingParams(1.0, 1.0))
    mean_x = float((mom.rho * grid.x_centers).sum() * grid.dx)
    assert mean_x == pytest.approx(-0.5, abs=2e-3)
    assert state.total_mass() == pytest.approx(1.0, abs=1e-10)


def test_free_transport_conserves_v_moments():
    grid = PhaseGrid(-4, 4, -2, 2, 128, 64)
    state = init_kinetic(gaussian_profile(128, -1.0, 0.3), 0.8, 0.15, grid)
    vk0 = [float((state.f @ grid.v_centers**k).sum() * grid.cell_area) for k in (0, 1, 2)]
    for _ in range(60):
        state = step_kinetic_rates(state, 0.0, 0.0, 0.0, FREE["spec"], FREE["kernel"], 5e-3)
    vk1 = [float((state.f @ grid.v_centers**k).sum() * grid.cell_area) for k in (0, 1, 2)]
    for a, b in zip(vk0, vk1):
        assert abs(a - b) <= 1e-10


def test_step_mass_and_positivity():
    grid = small_grid()
    state = init_kinetic(gaussian_profile(), lambda x: -0.1 * x, np.sqrt(0.1), grid)
    params = ScalingParams(0.1, 0.05, zeta=4.0)
    spec, kernel = ConfinementSpec(1.0), QuadraticKernel(1.0)
    for _ in range(20):
        state = step_kinetic(state, params, spec, kernel, 1e-3)
    assert abs(state.total_mass() - 1.0) <= 1e-10
    assert state.f.min() >= 0.0
    assert abs(state.renorm_factor - 1.0) <= 1e-8


def test_step_rejects_cfl_violation():
    grid = small_grid()
    state = init_kinetic(gaussian_profile(), 0.0, 0.1, grid)
    params = ScalingParams(0.1, 0.05)
    with pytest.raises(CflViolation):
        step_kinetic(state, params, ConfinementSpec(1.0), QuadraticKernel(1.0), 1.0)


def test_step_detects_boundary_leak():
    # a blob streaming at the x-boundary must trip the leak monitor
    grid = PhaseGrid(-1, 1, -2, 2, 64, 64)
    prof = DensityProfile.gaussian(0.85, 0.04, -1, 1, 64)
    state = init_kinetic(prof, 1.5, 0.1, grid)
    with pytest.raises(BoundaryMassLeak):
        for _ in range(300):
            state = step_kinetic_rates(
                state, 0.0, 0.0, 0.0, FREE["spec"], FREE["kernel"], 2e-3
            )


def test_damped_oscillator_moment_odes():
    # independent oracle: with V harmonic and no alignment the closed system
    # (M20, M11, M02)' = (2 M11, M02 - g M11 - l M20, -2 g M02 - 2 l M11)
    # integrated with tight tolerances
    gamma, lam = 0.5, 1.0
    grid = PhaseGrid(-4, 4, -4, 4, 256, 256)
    state = init_kinetic(
        DensityProfile.gaussian(0.0, 0.6, -4, 4, 256), lambda x: -0.3 * x, 0.3, grid
    )
    spec, kernel = ConfinementSpec(1.0), QuadraticKernel(0.0)
    xc, vc = grid.x_centers, grid.v_centers

    def three_moments(f):
        area = grid.cell_area
        return (
            float((f.sum(axis=1) * grid.dv * xc**2).sum() * grid.dx),
            float((xc[:, None] * vc[None, :] * f).sum() * area),
            float((f @ vc**2).sum() * area),
        )

    m0 = three_moments(state.f)
    sol = solve_ivp(
        lambda t, y: [2 * y[1], y[2] - gamma * y[1] - lam * y[0], -2 * gamma * y[2] - 2 * lam * y[1]],
        (0.0, 0.5),
        m0,
        rtol=1e-12,
        atol=1e-14,
    )
    for _ in range(250):
        state = step_kinetic_rates(state, gamma, 0.0, lam, spec, kernel, 2e-3)
    got = three_moments(state.f)
    ref = sol.y[:, -1]
    assert got[2] == pytest.approx(ref[2], rel=1e-3)
    assert got[0] == pytest.approx(ref[0], rel=1e-3)


def test_run_identity_at_t_end():
    grid = small_grid()
    state = init_kinetic(gaussian_profile(), 0.0, 0.1, grid)
    params = ScalingParams(0.1, 0.05, zeta=4.0)
    out = run_kinetic(state, params, ConfinementSpec(1.0), QuadraticKernel(1.0), state.t)
    assert out is state


def test_run_observer_schedule():
    grid = small_grid()
    state = init_kinetic(gaussian_profile(), lambda x: -0.1 * x, np.sqrt(0.1), grid)
    params = ScalingParams(0.1, 0.05, zeta=4.0)
    seen = []
    requested = [0.0, 0.02, 0.05]
    run_kinetic(
        state, params, ConfinementSpec(1.0), QuadraticKernel(1.0), 0.05,
        observer=lambda s, mom, erep: seen.append((s.t, erep.F_total)),
        sample_times=requested, dt_max=2e-3,
    )
    assert len(seen) == len(requested)
    for (t_obs, _), t_req in zip(seen, requested):
        assert abs(t_obs - t_req) <= 2e-3 + 1e-12


def test_run_smoke_benchmark_mass():
    grid = PhaseGrid(-4, 4, -2.6, 2.6, 256, 256)
    prof = gaussian_profile(256)
    state = init_kinetic(prof, lambda x: -0.1 * x, np.sqrt(0.1), grid)
    params = ScalingParams(0.1, 0.05, zeta=4.0)
    out = run_kinetic(state, params, ConfinementSpec(1.0), QuadraticKernel(1.0), 0.5)
    assert out.t == pytest.approx(0.5, abs=1e-12)
    assert out.total_mass() == pytest.approx(1.0, abs=1e-9)
    assert out.f.min() >= 0.0


def test_kinetic_snapshot_roundtrip(tmp_path):
    grid = small_grid(nx=16, nv=12)
    f = np.random.default_rng(0).random((16, 12))
    f /= f.sum() * grid.cell_area
    state = KineticState(f=f, t=0.75, grid=grid)
    path = str(tmp_path / "state.csv")
    dump_kinetic(state, path, params={"epsilon": 0.1})
    back = load_kinetic(path)
    assert back.t == state.t
    assert back.grid == grid
    assert np.array_equal(back.f, state.f)
