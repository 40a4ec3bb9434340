"""Scalar functionals: free energy, dissipations, relative entropy, bounds.

Everything here is a pure reduction over immutable snapshots.  Quadrature is
cell-midpoint on the phase grid; particle fields are interpolated piecewise
linearly in sorted position with constant extrapolation outside the hull.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DenominatorNotPositive, EmptyOverlap, TooFewSamples
from .measures import ParticleEnsemble


@dataclass(frozen=True)
class EnergyReport:
    """Total free energy, its pieces, and both dissipation rates at time t."""

    F_total: float
    K: float
    potential_conf: float
    potential_int: float
    D1: float
    D2: float
    t: float


@dataclass(frozen=True)
class RelEntropyReport:
    """Relative entropy integral and the relative-flux integral (= 2H)."""

    H_integral: float
    relflux_integral: float
    t: float


@dataclass(frozen=True)
class BoundReport:
    """lhs <= rhs comparison with the rhs assembled term by term."""

    lhs: float
    rhs: float
    satisfied: bool
    components: dict


def free_energy(state, lam: float, spec, kernel, delta: float = 1e-8) -> EnergyReport:
    """Kinetic + potential energy of a phase density, with dissipations.

    D1 integrates f |u - v|^2 with u = m/rho on cells where rho exceeds the
    vacuum floor ``delta``; vacuum cells contribute zero.  D2 is the plain
    second v-moment.
    """
    grid = state.grid
    f = state.f
    xc = grid.x_centers
    vc = grid.v_centers
    area = grid.cell_area
    rho = f.sum(axis=1) * grid.dv
    m = f @ vc * grid.dv
    v_sq_rows = f @ (vc**2) * grid.dv  # per-x integral of v^2 f dv
    K = 0.5 * float(v_sq_rows.sum() * grid.dx)
    D2 = 2.0 * K
    conf = lam * float((spec.value(xc) * rho).sum() * grid.dx)
    wmat = kernel.value(xc[:, None] - xc[None, :])
    inter = 0.5 * lam * float(rho @ wmat @ rho) * grid.dx**2
    live = rho > delta
    u = np.zeros_like(rho)
    u[live] = m[live] / rho[live]
    # f |u - v|^2 summed per row: integral v^2 f - 2 u m + u^2 rho
    d1_rows = v_sq_rows - 2.0 * u * m + u**2 * rho
    D1 = float(np.where(live, d1_rows, 0.0).sum() * grid.dx)
    D1 = max(D1, 0.0)
    return EnergyReport(
        F_total=K + conf + inter,
        K=K,
        potential_conf=conf,
        potential_int=inter,
        D1=D1,
        D2=D2,
        t=state.t,
    )


def energy_identity_residual(reports, beta: float, gamma: float) -> np.ndarray:
    """Residual of dF/dt + beta D1 + gamma D2 = 0 on equally spaced samples.

    Uses central differences of F_total, so the series has len(reports) - 2
    entries, one per interior sample.
    """
    reports = list(reports)
    if len(reports) < 3:
        raise TooFewSamples("need at least 3 energy samples")
    ts = np.array([r.t for r in reports])
    hs = np.diff(ts)
    if not np.allclose(hs, hs[0], rtol=1e-6, atol=1e-12):
        raise TooFewSamples("samples must be equally spaced in time")
    h = hs[0]
    F = np.array([r.F_total for r in reports])
    D1 = np.array([r.D1 for r in reports])
    D2 = np.array([r.D2 for r in reports])
    dF = (F[2:] - F[:-2]) / (2.0 * h)
    return dF + beta * D1[1:-1] + gamma * D2[1:-1]


def interp_particle_velocity(hydro: ParticleEnsemble, x: np.ndarray) -> np.ndarray:
    """Velocity field of a particle ensemble at points x.

    Piecewise linear between sorted particles, constant outside the hull.
    """
    if hydro.velocities is None:
        raise ValueError("ensemble carries no velocities")
    pos, _, vel = hydro.sorted_arrays()
    return np.interp(x, pos, vel)


def relative_entropy(
    moments, hydro: ParticleEnsemble, floor: float = 1e-8
) -> RelEntropyReport:
    """H = 1/2 int rho |u - ubar|^2 dx between kinetic moments and particles.

    Cells with rho at or below the vacuum floor contribute zero.  The
    relative-flux integral equals 2H identically in one dimension.
    """
    grid = moments.grid
    xc = grid.x_centers
    live = moments.rho > floor
    if not live.any():
        raise EmptyOverlap("kinetic density is vacuum everywhere")
    lo, hi = xc[live].min(), xc[live].max()
    if hydro.positions.max() < lo - grid.dx or hydro.positions.min() > hi + grid.dx:
        raise EmptyOverlap("particle support does not meet the kinetic support")
    ubar = interp_particle_velocity(hydro, xc)
    sq = (moments.u_delta - ubar) ** 2
    H = 0.5 * float(np.where(live, moments.rho * sq, 0.0).sum() * grid.dx)
    return RelEntropyReport(H_integral=H, relflux_integral=2.0 * H, t=hydro.t)


def initial_discrepancy(kin0, hydro0: ParticleEnsemble, delta: float = 1e-8) -> float:
    """Velocity mismatch plus thermal excess between matched initial data.

    First term: int rho0 |u0 - ubar0|^2 dx.  Second term: the kinetic second
    v-moment minus the particle kinetic term sum m_i U_i^2.
    """
    grid = kin0.grid
    vc = grid.v_centers
    rho = kin0.f.sum(axis=1) * grid.dv
    m = kin0.f @ vc * grid.dv
    v_sq = float((kin0.f @ vc**2).sum() * grid.cell_area)
    live = rho > delta
    u = np.zeros_like(rho)
    u[live] = m[live] / rho[live]
    ubar = interp_particle_velocity(hydro0, grid.x_centers)
    term1 = float(np.where(live, rho * (u - ubar) ** 2, 0.0).sum() * grid.dx)
    term2 = v_sq - float(hydro0.masses @ hydro0.velocities**2)
    return term1 + term2


def bound_prop_main(
    W2_0: float,
    I_0: float,
    C_u: float,
    gamma: float,
    lam: float,
    epsilon: float,
    C_cal: float = 1.0,
    lhs: float = math.nan,
) -> BoundReport:
    """Hydrodynamic-leg bound: exp(C_u) ( W2_0 + numerator / denominator ).

    ``W2_0`` is the squared initial spatial distance.  The generic constant
    of the estimate is not computable, so ``C_cal`` parametrizes it; the
    report is a diagnostic, not a theorem check.  Raises when the denominator
    gamma - C_cal lam - exp(C_u)(1 + lam) fails to be positive.
    """
    ecu = math.exp(C_u)
    denominator = gamma - C_cal * lam - ecu * (1.0 + lam)
    if denominator <= 0:
        raise DenominatorNotPositive(
            f"gamma - C_cal*lam - e^C_u (1+lam) = {denominator!r} <= 0"
        )
    numerator = I_0 + C_u * max(1.0, lam) * epsilon + ecu * lam * W2_0
    rhs = ecu * (W2_0 + numerator / denominator)
    components = {
        "exp_C_u": ecu,
        "W2_0": W2_0,
        "I_0": I_0,
        "transient_term": C_u * max(1.0, lam) * epsilon,
        "initial_w2_term": ecu * lam * W2_0,
        "numerator": numerator,
        "denominator": denominator,
    }
    return BoundReport(lhs=lhs, rhs=rhs, satisfied=bool(lhs <= rhs), components=components)


def bound_overdamped(
    e1_0_limit: float,
    e1_0_gamma: float,
    e2_0_limit: float,
    e2_0_gamma: float,
    w2_0: float,
    u_mismatch_0: float,
    gamma: float,
    c_w: float,
    lhs: float = math.nan,
) -> BoundReport:
    """Overdamped-leg bound: M_gamma / (2 c_w gamma - 1).

    M_gamma = 4(E1 + E1^gamma) + (1+gamma) W2_0 + (2/gamma)(E2 + E2^gamma)
    + int |u_0 - u_0^gamma|^2 rho_0^gamma, with ``w2_0`` the squared initial
    distance between the two densities.
    """
    denominator = 2.0 * c_w * gamma - 1.0
    if denominator <= 0:
        raise DenominatorNotPositive(f"2 c_w gamma - 1 = {denominator!r} <= 0")
    m_gamma = (
        4.0 * (e1_0_limit + e1_0_gamma)
        + (1.0 + gamma) * w2_0
        + (2.0 / gamma) * (e2_0_limit + e2_0_gamma)
        + u_mismatch_0
    )
    rhs = m_gamma / denominator
    components = {"M_gamma": m_gamma, "denominator": denominator}
    return BoundReport(lhs=lhs, rhs=rhs, satisfied=bool(lhs <= rhs), components=components)
