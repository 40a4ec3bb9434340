"""Wasserstein distances between one-dimensional measures.

In one dimension W_p reduces to an L^p norm between quantile functions, which
keeps the metrology exact for particle pairs and quadrature-limited only for
grid densities.  A small exact discrete transport solver (successive shortest
paths on the transportation graph) doubles as the oracle for these routines.
"""

from __future__ import annotations

import numpy as np

from .errors import MassNotNormalized, SupportTooLarge
from .measures import DensityProfile, ParticleEnsemble

Measure1D = DensityProfile | ParticleEnsemble


def quantile(mu: Measure1D, q):
    """Generalized inverse CDF of a measure at level(s) q in (0, 1).

    Grid densities interpolate the piecewise-linear CDF within cells;
    particle measures use the right-continuous step CDF with the
    inf-convention at jumps.
    """
    if isinstance(mu, (DensityProfile, ParticleEnsemble)):
        return mu.quantile(q)
    raise TypeError(f"unsupported measure type {type(mu)!r}")


def _check_p(p: int) -> int:
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    return int(p)


def _particles_exact(mu: ParticleEnsemble, nu: ParticleEnsemble, p: int) -> float:
    """Exact W_p between particle measures via merged CDF breakpoints."""
    xm, mm, _ = mu.sorted_arrays()
    xn, mn, _ = nu.sorted_arrays()
    cm = np.cumsum(mm)
    cn = np.cumsum(mn)
    cm[-1] = cn[-1] = 1.0
    levels = np.union1d(cm, cn)
    levels = levels[(levels > 0.0) & (levels <= 1.0)]
    prev = np.concatenate(([0.0], levels[:-1]))
    seg = levels - prev
    mid = prev + 0.5 * seg
    xi = xm[np.searchsorted(cm, mid, side="left")]
    yi = xn[np.searchsorted(cn, mid, side="left")]
    diff = np.abs(xi - yi)
    if p == 1:
        return float(np.sum(seg * diff))
    return float(np.sqrt(np.sum(seg * diff**2)))


def wasserstein_1d(mu: Measure1D, nu: Measure1D, p: int = 2, n_quad: int = 1024) -> float:
    """W_p(mu, nu) for p in {1, 2}.

    Particle-vs-particle is evaluated exactly.  As soon as a grid density is
    involved the quantile integral is approximated by midpoint quadrature
    with ``n_quad`` nodes (n_quad >= 64).
    """
    p = _check_p(p)
    if isinstance(mu, ParticleEnsemble) and isinstance(nu, ParticleEnsemble):
        return _particles_exact(mu, nu, p)
    if n_quad < 64:
        raise ValueError("n_quad must be at least 64")
    q = (np.arange(int(n_quad)) + 0.5) / int(n_quad)
    diff = np.abs(np.asarray(quantile(mu, q)) - np.asarray(quantile(nu, q)))
    if p == 1:
        return float(diff.mean())
    return float(np.sqrt(np.mean(diff**2)))


def _as_points_and_masses(mu):
    if isinstance(mu, ParticleEnsemble):
        return mu.positions.reshape(-1, 1), mu.masses
    points, masses = mu
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    masses = np.asarray(masses, dtype=float)
    return points, masses


def _min_cost_transport(cost: np.ndarray, supply: np.ndarray, demand: np.ndarray) -> float:
    """Exact transportation LP value by successive shortest paths.

    Maintains node potentials so reduced costs stay nonnegative and augments
    along Dijkstra shortest paths until all supply has moved.  Sources are
    nodes 0..n-1, sinks n..n+m-1; arcs i->j are uncapacitated, backward arcs
    exist where flow is positive.
    """
    n, m = cost.shape
    pot = np.zeros(n + m)
    flow = np.zeros_like(cost)
    rs = supply.astype(float).copy()
    rd = demand.astype(float).copy()
    tol = 1e-15 * max(1.0, supply.sum())
    while rs.sum() > tol:
        dist = np.full(n + m, np.inf)
        dist[:n] = np.where(rs > tol, 0.0, np.inf)
        parent = np.full(n + m, -1, dtype=int)
        done = np.zeros(n + m, dtype=bool)
        target = -1
        while True:
            cand = np.where(~done, dist, np.inf)
            node = int(np.argmin(cand))
            if not np.isfinite(cand[node]):
                break
            done[node] = True
            if node >= n and rd[node - n] > tol:
                target = node
                break
            if node < n:
                red = cost[node] + pot[node] - pot[n:]
                nd = dist[node] + np.maximum(red, 0.0)
                better = nd < dist[n:]
                dist[n:][better] = nd[better]
                parent[n:][better] = node
            else:
                j = node - n
                has_flow = flow[:, j] > tol
                red = -cost[:, j] + pot[node] - pot[:n]
                nd = dist[node] + np.maximum(red, 0.0)
                better = has_flow & (nd < dist[:n])
                dist[:n][better] = nd[better]
                parent[:n][better] = node
        if target < 0:
            raise RuntimeError("transportation problem infeasible (mass mismatch)")
        # bottleneck along the augmenting path
        path = []
        node = target
        while parent[node] >= 0:
            path.append((parent[node], node))
            node = parent[node]
        root = node
        push = min(rs[root], rd[target - n])
        for a, b in path:
            if a >= n:  # backward arc (sink a) -> (source b)
                push = min(push, flow[b, a - n])
        for a, b in path:
            if a < n:
                flow[a, b - n] += push
            else:
                flow[b, a - n] -= push
        rs[root] -= push
        rd[target - n] -= push
        # unreachable nodes count as d_target, else flow arcs can go slack
        pot += np.minimum(dist, dist[target])
    return float(np.sum(flow * cost))


def w2_discrete_exact(mu, nu, dim: int | None = None) -> float:
    """Exact discrete 2-Wasserstein distance between small point measures.

    Accepts :class:`ParticleEnsemble` objects or ``(points, masses)`` pairs
    with points of any dimension.  Support sizes are capped at 64 apiece:
    this is a test oracle, not a production solver.
    """
    xp, xm = _as_points_and_masses(mu)
    yp, ym = _as_points_and_masses(nu)
    if xp.shape[0] > 64 or yp.shape[0] > 64:
        raise SupportTooLarge("oracle handles supports of at most 64 points")
    if dim is not None and (xp.shape[1] != dim or yp.shape[1] != dim):
        raise ValueError(f"points are not {dim}-dimensional")
    if xp.shape[1] != yp.shape[1]:
        raise ValueError("point dimensions differ")
    if abs(xm.sum() - 1.0) > 1e-10 or abs(ym.sum() - 1.0) > 1e-10:
        raise MassNotNormalized("both measures must have unit mass within 1e-10")
    keep_x = xm > 0
    keep_y = ym > 0
    xp, xm = xp[keep_x], xm[keep_x]
    yp, ym = yp[keep_y], ym[keep_y]
    diff = xp[:, None, :] - yp[None, :, :]
    cost = np.sum(diff**2, axis=2)
    total = _min_cost_transport(cost, xm, ym)
    return float(np.sqrt(max(total, 0.0)))
