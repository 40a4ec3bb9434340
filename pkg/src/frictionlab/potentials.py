"""Confinement and interaction potentials, forces, and hypothesis checks.

The confinement potential is quadratic, V(x) = c_V |x|^2 / 2.  Interaction
kernels come in three families (quadratic, gaussian, tabulated); all are even
with a globally Lipschitz gradient, which is what every estimate downstream
relies on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGrid, MassNotNormalized, TabulatedRangeExceeded
from .measures import DensityProfile, ParticleEnsemble


@dataclass(frozen=True)
class ConfinementSpec:
    """Quadratic confinement well with curvature ``c_V`` (any sign)."""

    c_V: float = 1.0

    def value(self, x):
        return 0.5 * self.c_V * np.square(x)

    def grad(self, x):
        return self.c_V * np.asarray(x, dtype=float)


def eval_confinement_grad(x, spec: ConfinementSpec):
    """Gradient of the confinement well, c_V * x."""
    return spec.grad(x)


def eval_confinement_value(x, spec: ConfinementSpec):
    """Companion value accessor, c_V |x|^2 / 2."""
    return spec.value(x)


class InteractionKernel:
    """Even interaction kernel with a Lipschitz gradient.

    Subclasses provide ``value`` and ``grad`` (both vectorized over numpy
    arrays) and set ``lipschitz_grad_bound`` to an upper bound on sup|W''|.
    """

    lipschitz_grad_bound: float = np.inf

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError


class QuadraticKernel(InteractionKernel):
    """W(x) = a |x|^2 / 2, the displacement-convex workhorse (modulus a)."""

    def __init__(self, a: float = 1.0):
        self.a = float(a)
        self.lipschitz_grad_bound = abs(self.a)

    def value(self, x):
        return 0.5 * self.a * np.square(x)

    def grad(self, x):
        return self.a * np.asarray(x, dtype=float)

    def __repr__(self):
        return f"QuadraticKernel(a={self.a})"


class GaussianKernel(InteractionKernel):
    """W(x) = a exp(-|x|^2 / (2 s^2)); attractive well for a < 0."""

    def __init__(self, a: float = 1.0, s: float = 1.0):
        if s <= 0:
            raise ValueError("gaussian kernel needs s > 0")
        self.a = float(a)
        self.s = float(s)
        # |W''| is maximal at the origin where W'' = -a / s^2
        self.lipschitz_grad_bound = abs(self.a) / self.s**2

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.a * np.exp(-np.square(x) / (2.0 * self.s**2))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return -self.a * x / self.s**2 * np.exp(-np.square(x) / (2.0 * self.s**2))

    def __repr__(self):
        return f"GaussianKernel(a={self.a}, s={self.s})"


class TabulatedKernel(InteractionKernel):
    """Kernel interpolated from equispaced samples of W.

    Samples are symmetrized at load, W(x) <- (W(x) + W(-x))/2, and resampled
    onto a grid symmetric about the origin so that the gradient (central
    differences, linearly interpolated) is exactly odd.  Outside the table the
    gradient is zero-extended and the value held constant; with
    ``strict_range=True`` out-of-range evaluation raises instead.
    """

    def __init__(self, x: np.ndarray, w: np.ndarray, strict_range: bool = False):
        x = np.asarray(x, dtype=float)
        w = np.asarray(w, dtype=float)
        if x.ndim != 1 or x.shape != w.shape or x.size < 3:
            raise ValueError("tabulated kernel needs two equal 1-d arrays, >= 3 samples")
        h = np.diff(x)
        if not np.allclose(h, h[0], rtol=1e-8, atol=0.0) or h[0] <= 0:
            raise ValueError("tabulated kernel needs strictly increasing equispaced x")
        self.h = float(h[0])
        radius = min(-x[0], x[-1])
        if radius <= 0:
            raise ValueError("table must straddle the origin")
        n_half = int(np.floor(radius / self.h + 1e-12))
        if n_half < 1:
            raise ValueError("table too narrow for its spacing")
        nodes = np.arange(-n_half, n_half + 1) * self.h
        w_plus = np.interp(nodes, x, w)
        w_minus = np.interp(-nodes, x, w)
        self.nodes = nodes
        self.w_nodes = 0.5 * (w_plus + w_minus)
        # odd gradient: central differences on the right half, mirrored
        g = np.zeros_like(self.w_nodes)
        mid = n_half
        if n_half > 1:
            g[mid + 1:-1] = (self.w_nodes[mid + 2:] - self.w_nodes[mid:-2]) / (2 * self.h)
        g[-1] = (self.w_nodes[-1] - self.w_nodes[-2]) / self.h
        g[:mid] = -g[mid + 1:][::-1]
        self.g_nodes = g
        self.radius = n_half * self.h
        self.strict_range = bool(strict_range)
        slopes = np.abs(np.diff(self.g_nodes)) / self.h
        self.lipschitz_grad_bound = float(slopes.max()) if slopes.size else 0.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        self._range_check(x)
        xc = np.clip(x, -self.radius, self.radius)
        return np.interp(xc, self.nodes, self.w_nodes)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        self._range_check(x)
        out = np.interp(x, self.nodes, self.g_nodes)
        # zero-extension of the gradient beyond the table
        out = np.where(np.abs(x) > self.radius, 0.0, out)
        return out

    def _range_check(self, x):
        if self.strict_range and np.any(np.abs(x) > self.radius * (1 + 1e-12)):
            raise TabulatedRangeExceeded(
                f"evaluation outside [-{self.radius}, {self.radius}]"
            )

    def __repr__(self):
        return f"TabulatedKernel(radius={self.radius}, h={self.h})"


def load_tabulated_kernel(path, strict_range: bool = False) -> TabulatedKernel:
    """Read a two-column CSV (x, W(x)) with equispaced x; header optional."""
    xs, ws = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                xv, wv = float(row[0]), float(row[1])
            except ValueError:
                continue  # header line
            xs.append(xv)
            ws.append(wv)
    return TabulatedKernel(np.array(xs), np.array(ws), strict_range=strict_range)


@dataclass(frozen=True)
class HypothesisReport:
    """Result of the confinement/interaction convexity check."""

    c_w_estimate: float
    grad_w_sup: float
    hess_w_sup: float
    h_satisfied: bool
    margin: float


def eval_kernel_grad(kernel: InteractionKernel, x):
    """Gradient of the interaction kernel at displacement x (odd in x)."""
    return kernel.grad(x)


def convolve_grad(kernel: InteractionKernel, density, query_points):
    """Evaluate (grad W * rho) at the query points by direct summation.

    ``density`` is either a :class:`DensityProfile` (midpoint-rule quadrature
    over cells) or a :class:`ParticleEnsemble` (weighted sum over particles).
    Total mass must be 1 within 1e-10.
    """
    q = np.atleast_1d(np.asarray(query_points, dtype=float))
    if isinstance(density, DensityProfile):
        weights = density.rho * density.dx
        points = density.centers
    elif isinstance(density, ParticleEnsemble):
        weights = density.masses
        points = density.positions
    else:
        raise TypeError(f"unsupported density type {type(density)!r}")
    total = float(weights.sum())
    if abs(total - 1.0) > 1e-10:
        raise MassNotNormalized(f"total mass {total!r} != 1 within 1e-10")
    out = np.empty_like(q)
    # chunk the query loop so the (Q, N) displacement block stays small
    block = max(1, int(4_000_000 // max(points.size, 1)))
    for lo in range(0, q.size, block):
        hi = min(lo + block, q.size)
        disp = q[lo:hi, None] - points[None, :]
        out[lo:hi] = kernel.grad(disp) @ weights
    if np.isscalar(query_points) or np.ndim(query_points) == 0:
        return float(out[0])
    return out


def estimate_cW(kernel: InteractionKernel, radius: float, n_pairs: int) -> float:
    """Brute-force lower envelope of <x-y, gW(x)-gW(y)> / |x-y|^2.

    Minimizes the quotient over an n_pairs x n_pairs grid of distinct points
    in [-radius, radius].  The true modulus is an infimum over all of R, so
    this is an upper bound on it: an estimate, refined by enlarging the grid.
    """
    if radius <= 0 or n_pairs < 2:
        raise DegenerateGrid("need radius > 0 and at least 2 grid points")
    pts = np.linspace(-radius, radius, int(n_pairs))
    g = np.asarray(kernel.grad(pts), dtype=float)
    dx = pts[:, None] - pts[None, :]
    dg = g[:, None] - g[None, :]
    mask = np.abs(dx) >= 1e-12
    if not mask.any():
        raise DegenerateGrid("all grid pairs coincide")
    quot = np.where(mask, dg / np.where(mask, dx, 1.0), np.inf)
    return float(quot.min())


def check_hypothesis(
    spec: ConfinementSpec,
    kernel: InteractionKernel,
    radius: float,
    n_pairs: int,
) -> HypothesisReport:
    """Check c_V + c_W > 0 with finite gradient bounds on the kernel."""
    c_w = estimate_cW(kernel, radius, n_pairs)
    pts = np.linspace(-radius, radius, int(n_pairs))
    grad_sup = float(np.abs(kernel.grad(pts)).max())
    hess_sup = float(kernel.lipschitz_grad_bound)
    margin = spec.c_V + c_w
    ok = bool(margin > 0 and np.isfinite(grad_sup) and np.isfinite(hess_sup))
    return HypothesisReport(
        c_w_estimate=c_w,
        grad_w_sup=grad_sup,
        hess_w_sup=hess_sup,
        h_satisfied=ok,
        margin=margin,
    )
