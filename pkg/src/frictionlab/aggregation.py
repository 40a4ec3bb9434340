"""Particle solver for the limiting aggregation dynamics.

The density is transported by the velocity field it generates,
u = -kappa (grad V + grad W * rho), realized as the flow of particle
positions; masses are push-forward weights and never change.
"""

from __future__ import annotations

import numpy as np

from .errors import MassNotNormalized, StepTooLarge
from .measures import ParticleEnsemble
from .hydro import pairwise_interaction_force
from .potentials import ConfinementSpec, InteractionKernel


def aggregation_velocity(
    ens: ParticleEnsemble,
    kappa: float,
    spec: ConfinementSpec,
    kernel: InteractionKernel,
    query_points,
) -> np.ndarray:
    """u(x) = -kappa (c_V x + sum_j m_j grad W(x - X_j)) at the query points."""
    total = float(ens.masses.sum())
    if abs(total - 1.0) > 1e-10:
        raise MassNotNormalized(f"ensemble mass {total!r} != 1")
    q = np.atleast_1d(np.asarray(query_points, dtype=float))
    disp = q[:, None] - ens.positions[None, :]
    out = -kappa * (spec.grad(q) + kernel.grad(disp) @ ens.masses)
    if np.isscalar(query_points) or np.ndim(query_points) == 0:
        return float(out[0])
    return out


def _flow_rhs(x, kappa, spec, kernel, masses):
    return -kappa * (spec.grad(x) + pairwise_interaction_force(kernel, x, masses))


def step_aggregation(
    ens: ParticleEnsemble,
    kappa: float,
    spec: ConfinementSpec,
    kernel: InteractionKernel,
    dt: float,
) -> ParticleEnsemble:
    """RK4 step of dX_i/dt = u(X_i); masses unchanged.

    Guard: dt * kappa * (c_V + sup|W''|) <= 0.5, the contraction rate of the
    field.  In one dimension the flow of this Lipschitz field preserves the
    ordering of particles for guarded steps.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    rate = kappa * (abs(spec.c_V) + kernel.lipschitz_grad_bound)
    if dt * rate > 0.5 * (1 + 1e-12):
        raise StepTooLarge(f"dt*kappa*(c_V + sup|W''|) = {dt * rate:.3f} exceeds 0.5")
    x, m = ens.positions, ens.masses
    k1 = _flow_rhs(x, kappa, spec, kernel, m)
    k2 = _flow_rhs(x + 0.5 * dt * k1, kappa, spec, kernel, m)
    k3 = _flow_rhs(x + 0.5 * dt * k2, kappa, spec, kernel, m)
    k4 = _flow_rhs(x + dt * k3, kappa, spec, kernel, m)
    xn = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return ParticleEnsemble(positions=xn, masses=m.copy(), velocities=None, t=ens.t + dt)


def run_aggregation(
    ens: ParticleEnsemble,
    kappa: float,
    spec: ConfinementSpec,
    kernel: InteractionKernel,
    t_end: float,
    observer=None,
    sample_times=(),
    dt_max: float = 1e-2,
) -> ParticleEnsemble:
    """Drive step_aggregation to t_end, hitting sample times exactly."""
    if t_end < ens.t:
        raise ValueError("t_end must not precede the current time")
    rate = kappa * (abs(spec.c_V) + kernel.lipschitz_grad_bound)
    dt_nominal = min(dt_max, 0.45 / rate) if rate > 0 else dt_max
    pending = sorted(t for t in sample_times if t >= ens.t - 1e-12)
    while pending and pending[0] <= ens.t + 1e-12:
        if observer is not None:
            observer(ens)
        pending.pop(0)
    while ens.t < t_end - 1e-12:
        limit = pending[0] if pending else t_end
        dt = min(dt_nominal, min(limit, t_end) - ens.t)
        ens = step_aggregation(ens, kappa, spec, kernel, dt)
        while pending and pending[0] <= ens.t + 1e-12:
            if observer is not None:
                observer(ens)
            pending.pop(0)
    return ens
