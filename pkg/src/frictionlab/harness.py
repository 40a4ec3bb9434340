"""Experiment orchestration: sweeps, rate fits, and reproducible emission.

The default scenario is the standard benchmark: a centered Gaussian of
standard deviation 0.5 truncated to [-4, 4], quadratic confinement c_V = 1,
quadratic interaction kernel a = 1 (convexity modulus exactly 1), kappa =
0.05, final time T = 0.5.  Parameter ladders are dyadic.  All pipelines are
deterministic; ``seed`` exists only for randomized test utilities.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .aggregation import aggregation_velocity, run_aggregation
from .errors import (
    FrictionLabError,
    HypothesisHViolated,
    IoFailure,
    NonPositiveData,
)
from .functionals import (
    BoundReport,
    EnergyReport,
    bound_overdamped,
    bound_prop_main,
    energy_identity_residual,
    free_energy,
    initial_discrepancy,
    relative_entropy,
)
from .hydro import (
    hydro_energies,
    lipschitz_estimate,
    run_hydro,
    sample_from_density,
)
from .kinetic import (
    KineticState,
    PhaseGrid,
    ScalingParams,
    init_kinetic,
    moments,
    run_kinetic,
    step_kinetic,
)
from .measures import DensityProfile, ParticleEnsemble
from .potentials import (
    ConfinementSpec,
    GaussianKernel,
    QuadraticKernel,
    check_hypothesis,
    convolve_grad,
    load_tabulated_kernel,
)
from .snapshots import _atomic_write, dump_ensemble
from .transport import wasserstein_1d

CSV_HEADER = "param,int_w2sq,sup_w2sq,final_H,energy_residual,lipschitz_ok,wall_time_s"


@dataclass
class ExperimentConfig:
    """Flat configuration record; every field has a benchmark default."""

    scenario: str = "benchmark"
    x_min: float = -4.0
    x_max: float = 4.0
    nx: int = 256
    nv: int = 256
    v_half: float = 0.0  # 0 -> auto: 8*theta (thermal-resolved; init leak check guards it)
    n_particles: int = 400
    T: float = 0.5
    epsilons: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    gammas: list = field(default_factory=lambda: [5.0, 10.0, 20.0, 40.0])
    kappa: float = 0.05
    theta_policy: str = "sqrt_epsilon"  # or "fixed"
    theta_fixed: float = 0.1
    c_V: float = 1.0
    kernel_form: str = "quadratic"  # quadratic | gaussian | tabulated
    kernel_a: float = 1.0
    kernel_s: float = 1.0
    kernel_table: str = ""
    rho0_mean: float = 0.0
    rho0_sigma: float = 0.5
    n_samples: int = 21
    n_quad: int = 0  # 0 -> use n_particles
    dt_max: float = 2e-3
    cfl: float = 0.45
    dt_audit: float = 1.25e-4
    delta: float = 1e-8
    zeta_factor: float = 10.0
    hydro_method: str = "rk4"
    c_cal: float = 1.0
    cw_radius: float = 0.0  # 0 -> 4x the confinement box half-width
    cw_pairs: int = 401
    dump_phase_snapshots: bool = False
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1

    def validate(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if not self.epsilons or not self.gammas:
            raise ValueError("parameter lists must be nonempty")
        if any(e <= 0 for e in self.epsilons) or any(g <= 0 for g in self.gammas):
            raise ValueError("epsilon and gamma values must be positive")
        if self.n_samples < 3:
            raise ValueError("need at least 3 sample times")
        if self.theta_policy not in ("sqrt_epsilon", "fixed"):
            raise ValueError("theta_policy must be 'sqrt_epsilon' or 'fixed'")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


_CONFIG_FIELDS = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}


def _coerce(key: str, raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_config_file(path: str) -> ExperimentConfig:
    """Read a key = value configuration file (JSON-typed values, # comments)."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, raw = line.split("=", 1)
            elif ":" in line:
                key, raw = line.split(":", 1)
            else:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip()
            if key not in _CONFIG_FIELDS:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, raw.strip())
    return ExperimentConfig(**values).validate()


def apply_overrides(config: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply --override key=value pairs on top of a config."""
    updates = {}
    for item in overrides or ():
        if "=" not in item:
            raise ValueError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        updates[key] = _coerce(key, raw.strip())
    return replace(config, **updates).validate()


@dataclass
class SweepRow:
    """One experiment record, mirrored by one line of rows.csv."""

    param: float
    int_w2sq: float
    sup_w2sq: float
    final_H: float
    energy_residual: float
    lipschitz_ok: bool
    wall_time_s: float


@dataclass
class RunManifest:
    """Run metadata: enough to reproduce and to locate every emitted file."""

    kind: str
    config: dict
    code_version: str
    csv_header: str
    row_files: list
    fitted_rate: dict | None = None
    bound_reports: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def build_kernel(config: ExperimentConfig):
    if config.kernel_form == "quadratic":
        return QuadraticKernel(config.kernel_a)
    if config.kernel_form == "gaussian":
        return GaussianKernel(config.kernel_a, config.kernel_s)
    if config.kernel_form == "tabulated":
        return load_tabulated_kernel(config.kernel_table)
    raise ValueError(f"unknown kernel form {config.kernel_form!r}")


def benchmark_profile(config: ExperimentConfig) -> DensityProfile:
    return DensityProfile.gaussian(
        config.rho0_mean, config.rho0_sigma, config.x_min, config.x_max, config.nx
    )


def sample_times(config: ExperimentConfig) -> np.ndarray:
    return np.linspace(0.0, config.T, config.n_samples)


def _aggregation_field(kappa, spec, kernel, rho0: DensityProfile):
    """Continuum velocity field -kappa (grad V + grad W * rho0) as a callable."""

    def u0(x):
        return -kappa * (spec.grad(x) + convolve_grad(kernel, rho0, x))

    return u0


def _grid_for_epsilon(config: ExperimentConfig, theta: float, u_sup: float) -> PhaseGrid:
    # auto v-domain resolves the thermal width with a fixed cell count; the
    # bulk velocity must sit well inside 8*theta, which the initialization
    # leak check enforces (set v_half explicitly for large-kappa regimes)
    v_half = config.v_half if config.v_half > 0 else 8.0 * theta
    return PhaseGrid(
        x_min=config.x_min, x_max=config.x_max, v_min=-v_half, v_max=v_half,
        nx=config.nx, nv=config.nv,
    )


def _theta(config: ExperimentConfig, epsilon: float) -> float:
    if config.theta_policy == "fixed":
        return config.theta_fixed
    return math.sqrt(epsilon)


def _rho_profile(mom) -> DensityProfile:
    grid = mom.grid
    mass = float(mom.rho.sum() * grid.dx)
    return DensityProfile(grid.x_min, grid.x_max, mom.rho / mass)


def run_epsilon_leg(config: ExperimentConfig, epsilon: float) -> dict:
    """Kinetic vs hydro vs aggregation with the singular scaling at one epsilon."""
    t_start = time.perf_counter()
    spec = ConfinementSpec(config.c_V)
    kernel = build_kernel(config)
    rho0 = benchmark_profile(config)
    theta = _theta(config, epsilon)
    u0_field = _aggregation_field(config.kappa, spec, kernel, rho0)
    probe = np.linspace(config.x_min, config.x_max, 257)
    u_sup = float(np.abs(u0_field(probe)).max())
    grid = _grid_for_epsilon(config, theta, u_sup)
    params = ScalingParams(
        epsilon=epsilon,
        kappa=config.kappa,
        delta=config.delta,
        zeta=config.zeta_factor * max(u_sup, 1e-6),
    )
    kin = init_kinetic(rho0, u0_field, theta, grid)
    ens0 = sample_from_density(rho0, None, config.n_particles)
    u0_particles = aggregation_velocity(ens0, config.kappa, spec, kernel, ens0.positions)
    hydro = ParticleEnsemble(
        positions=ens0.positions.copy(),
        masses=ens0.masses.copy(),
        velocities=np.asarray(u0_particles),
        t=0.0,
    )
    agg = ParticleEnsemble(
        positions=ens0.positions.copy(), masses=ens0.masses.copy(), velocities=None, t=0.0
    )
    lip_bound = lipschitz_estimate(hydro) + 1.0
    i_0 = initial_discrepancy(kin, hydro, delta=params.delta)
    n_quad = config.n_quad if config.n_quad > 0 else config.n_particles
    times = sample_times(config)
    series = {
        "t": [], "w2_kin_agg": [], "w2_kin_hydro": [], "w2_hydro_agg": [],
        "H": [], "F_total": [], "D1": [], "D2": [], "lipschitz": [],
    }
    lip_ok = True
    w2_0 = None
    for t_k in times:
        if t_k > kin.t + 1e-12:
            kin = run_kinetic(
                kin, params, spec, kernel, t_k,
                dt_max=config.dt_max, cfl=config.cfl,
            )
            hydro = run_hydro(
                hydro, params.gamma, config.kappa, spec, kernel, t_k,
                dt_max=config.dt_max * 5, method=config.hydro_method,
            )
            agg = run_aggregation(
                agg, config.kappa, spec, kernel, t_k, dt_max=config.dt_max * 5
            )
        mom = moments(kin, params)
        prof = _rho_profile(mom)
        w2_ka = wasserstein_1d(prof, agg, p=2, n_quad=n_quad)
        w2_kh = wasserstein_1d(prof, hydro, p=2, n_quad=n_quad)
        w2_ha = wasserstein_1d(hydro, agg, p=2)
        rel = relative_entropy(mom, hydro, floor=params.delta)
        erep = free_energy(kin, params.lam, spec, kernel, delta=params.delta)
        lip = lipschitz_estimate(hydro)
        lip_ok = lip_ok and (lip <= lip_bound)
        if w2_0 is None:
            w2_0 = w2_ka**2
        series["t"].append(t_k)
        series["w2_kin_agg"].append(w2_ka)
        series["w2_kin_hydro"].append(w2_kh)
        series["w2_hydro_agg"].append(w2_ha)
        series["H"].append(rel.H_integral)
        series["F_total"].append(erep.F_total)
        series["D1"].append(erep.D1)
        series["D2"].append(erep.D2)
        series["lipschitz"].append(lip)
    w2sq = np.asarray(series["w2_kin_agg"]) ** 2
    energy_reports = [
        EnergyReport(
            F_total=series["F_total"][k], K=0.0, potential_conf=0.0, potential_int=0.0,
            D1=series["D1"][k], D2=series["D2"][k], t=series["t"][k],
        )
        for k in range(len(times))
    ]
    residuals = energy_identity_residual(energy_reports, params.beta, params.gamma)
    sup_w2_kin_hydro_sq = float(np.max(np.asarray(series["w2_kin_hydro"]) ** 2))
    try:
        bound = bound_prop_main(
            W2_0=w2_0,
            I_0=i_0,
            C_u=config.c_cal * max(series["lipschitz"]),
            gamma=params.gamma,
            lam=params.lam,
            epsilon=epsilon,
            C_cal=config.c_cal,
            lhs=sup_w2_kin_hydro_sq,
        )
        bound_dict = {"kind": "prop_main", "param": epsilon, **asdict_bound(bound)}
    except FrictionLabError as exc:
        bound_dict = {"kind": "prop_main", "param": epsilon, "error": str(exc)}
    row = SweepRow(
        param=epsilon,
        int_w2sq=float(np.trapz(w2sq, times)),
        sup_w2sq=float(w2sq.max()),
        final_H=float(series["H"][-1]),
        energy_residual=float(np.abs(residuals).max()),
        lipschitz_ok=bool(lip_ok),
        wall_time_s=time.perf_counter() - t_start,
    )
    return {
        "row": row,
        "series": series,
        "bound": bound_dict,
        "theta": theta,
        "rates": {"gamma": params.gamma, "beta": params.beta, "lambda": params.lam},
        "initial_discrepancy": i_0,
        "final_kinetic": kin,
        "final_hydro": hydro,
        "final_agg": agg,
    }


def asdict_bound(bound: BoundReport) -> dict:
    return {
        "lhs": bound.lhs,
        "rhs": bound.rhs,
        "satisfied": bound.satisfied,
        "components": bound.components,
    }


def run_gamma_leg(config: ExperimentConfig, gamma: float, c_w: float) -> dict:
    """Damped Euler vs aggregation from matched particles at one gamma."""
    t_start = time.perf_counter()
    spec = ConfinementSpec(config.c_V)
    kernel = build_kernel(config)
    rho0 = benchmark_profile(config)
    ens0 = sample_from_density(rho0, None, config.n_particles)
    u0 = np.asarray(
        aggregation_velocity(ens0, config.kappa, spec, kernel, ens0.positions)
    )
    hydro = ParticleEnsemble(ens0.positions.copy(), ens0.masses.copy(), u0.copy(), 0.0)
    agg = ParticleEnsemble(ens0.positions.copy(), ens0.masses.copy(), None, 0.0)
    lip_bound = lipschitz_estimate(hydro) + 1.0
    e1_h, e2_h = hydro_energies(hydro, spec, kernel)
    agg_with_u = ParticleEnsemble(agg.positions.copy(), agg.masses.copy(), u0.copy(), 0.0)
    e1_a, e2_a = hydro_energies(agg_with_u, spec, kernel)
    times = sample_times(config)
    series = {"t": [], "w2_hydro_agg": [], "H_particle": [], "E1_hydro": [], "E2_hydro": [], "lipschitz": []}
    lip_ok = True
    energy_probe = []
    for t_k in times:
        if t_k > hydro.t + 1e-12:
            hydro = run_hydro(
                hydro, gamma, config.kappa, spec, kernel, t_k,
                dt_max=config.dt_max * 5, method=config.hydro_method,
            )
            agg = run_aggregation(agg, config.kappa, spec, kernel, t_k, dt_max=config.dt_max * 5)
        w2 = wasserstein_1d(hydro, agg, p=2)
        u_agg_at_hydro = aggregation_velocity(agg, config.kappa, spec, kernel, hydro.positions)
        h_part = 0.5 * float(
            hydro.masses @ (hydro.velocities - np.asarray(u_agg_at_hydro)) ** 2
        )
        e1, e2 = hydro_energies(hydro, spec, kernel)
        lip = lipschitz_estimate(hydro)
        lip_ok = lip_ok and (lip <= lip_bound)
        series["t"].append(t_k)
        series["w2_hydro_agg"].append(w2)
        series["H_particle"].append(h_part)
        series["E1_hydro"].append(e1)
        series["E2_hydro"].append(e2)
        series["lipschitz"].append(lip)
        energy_probe.append((0.5 * e2 + gamma * config.kappa * e1, e2))
    w2sq = np.asarray(series["w2_hydro_agg"]) ** 2
    lhs = float(np.trapz(w2sq, times))
    bound = bound_overdamped(
        e1_0_limit=e1_a, e1_0_gamma=e1_h, e2_0_limit=e2_a, e2_0_gamma=e2_h,
        w2_0=0.0, u_mismatch_0=0.0, gamma=gamma, c_w=c_w, lhs=lhs,
    )
    # particle energy balance: d/dt (E2/2 + gamma kappa E1) = -gamma E2
    h = times[1] - times[0]
    tot = np.array([p[0] for p in energy_probe])
    e2s = np.array([p[1] for p in energy_probe])
    resid = (tot[2:] - tot[:-2]) / (2 * h) + gamma * e2s[1:-1]
    row = SweepRow(
        param=gamma,
        int_w2sq=lhs,
        sup_w2sq=float(w2sq.max()),
        final_H=float(series["H_particle"][-1]),
        energy_residual=float(np.abs(resid).max()),
        lipschitz_ok=bool(lip_ok),
        wall_time_s=time.perf_counter() - t_start,
    )
    return {
        "row": row,
        "series": series,
        "bound": {"kind": "overdamped", "param": gamma, **asdict_bound(bound)},
        "final_hydro": hydro,
        "final_agg": agg,
    }


def _run_legs(config: ExperimentConfig, leg_fn, values):
    """Run legs sequentially or in a worker pool; order is by value index."""
    results = [None] * len(values)
    failures = []
    if config.threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.threads) as pool:
            futs = {pool.submit(leg_fn, v): i for i, v in enumerate(values)}
            for fut, i in futs.items():
                try:
                    results[i] = fut.result()
                except FrictionLabError as exc:
                    failures.append({"param": values[i], "error": str(exc)})
    else:
        for i, v in enumerate(values):
            try:
                results[i] = leg_fn(v)
            except FrictionLabError as exc:
                failures.append({"param": v, "error": str(exc)})
    return results, failures


def run_epsilon_sweep(config: ExperimentConfig):
    """Sweep the kinetic-to-aggregation comparison over the epsilon ladder."""
    config.validate()
    results, failures = _run_legs(
        config, lambda e: run_epsilon_leg(config, e), list(config.epsilons)
    )
    rows = [r["row"] for r in results if r is not None]
    manifest = RunManifest(
        kind="epsilon-sweep",
        config=config.to_dict(),
        code_version=__version__,
        csv_header=CSV_HEADER,
        row_files=[],
        bound_reports=[r["bound"] for r in results if r is not None],
        failures=failures,
        notes={
            "theta": {str(r["row"].param): r["theta"] for r in results if r is not None},
            "rates": {str(r["row"].param): r["rates"] for r in results if r is not None},
        },
    )
    if len(rows) >= 3:
        try:
            slope, intercept, r2 = fit_rate(rows, "param", "int_w2sq")
            manifest.fitted_rate = {
                "x": "param", "y": "int_w2sq",
                "slope": slope, "intercept": intercept, "r_squared": r2,
            }
        except NonPositiveData:
            manifest.fitted_rate = None
    return rows, manifest, results


def run_gamma_sweep(config: ExperimentConfig):
    """Sweep the overdamped comparison over the gamma ladder.

    The convexity hypothesis is verified first; when the estimated modulus is
    positive every listed gamma must satisfy 2 c_w gamma > 1.
    """
    config.validate()
    spec = ConfinementSpec(config.c_V)
    kernel = build_kernel(config)
    radius = config.cw_radius if config.cw_radius > 0 else 4.0 * max(
        abs(config.x_min), abs(config.x_max)
    )
    report = check_hypothesis(spec, kernel, radius, config.cw_pairs)
    if not report.h_satisfied:
        raise HypothesisHViolated(
            f"c_V + c_W = {report.margin!r} <= 0 or non-finite kernel bounds"
        )
    if report.c_w_estimate > 0:
        bad = [g for g in config.gammas if 2.0 * report.c_w_estimate * g - 1.0 <= 0]
        if bad:
            raise HypothesisHViolated(
                f"2 c_W gamma - 1 <= 0 for gamma in {bad}; enlarge gamma"
            )
    results, failures = _run_legs(
        config,
        lambda g: run_gamma_leg(config, g, report.c_w_estimate),
        list(config.gammas),
    )
    rows = [r["row"] for r in results if r is not None]
    manifest = RunManifest(
        kind="gamma-sweep",
        config=config.to_dict(),
        code_version=__version__,
        csv_header=CSV_HEADER,
        row_files=[],
        bound_reports=[r["bound"] for r in results if r is not None],
        failures=failures,
        notes={"hypothesis": {
            "c_w_estimate": report.c_w_estimate,
            "margin": report.margin,
            "grad_w_sup": report.grad_w_sup,
            "hess_w_sup": report.hess_w_sup,
        }},
    )
    if len(rows) >= 3:
        try:
            slope, intercept, r2 = fit_rate(rows, "param", "int_w2sq")
            manifest.fitted_rate = {
                "x": "param", "y": "int_w2sq",
                "slope": slope, "intercept": intercept, "r_squared": r2,
            }
        except NonPositiveData:
            manifest.fitted_rate = None
    return rows, manifest, results


def energy_audit(config: ExperimentConfig, epsilon: float = 0.1, refine: bool = False):
    """Fine-step energy-identity audit on the benchmark at one epsilon.

    Records free energy and dissipations at every solver step and returns the
    residual series plus its sup.  With ``refine=True`` a second run at
    halved (dx, dv, dt) is included for the convergence ratio.
    """
    def one(nx, nv, dt):
        spec = ConfinementSpec(config.c_V)
        kernel = build_kernel(config)
        rho0 = DensityProfile.gaussian(
            config.rho0_mean, config.rho0_sigma, config.x_min, config.x_max, nx
        )
        theta = _theta(config, epsilon)
        u0_field = _aggregation_field(config.kappa, spec, kernel, rho0)
        probe = np.linspace(config.x_min, config.x_max, 257)
        u_sup = float(np.abs(u0_field(probe)).max())
        v_half = config.v_half if config.v_half > 0 else 8.0 * theta
        grid = PhaseGrid(config.x_min, config.x_max, -v_half, v_half, nx, nv)
        params = ScalingParams(
            epsilon=epsilon, kappa=config.kappa, delta=config.delta,
            zeta=config.zeta_factor * max(u_sup, 1e-6),
        )
        state = init_kinetic(rho0, u0_field, theta, grid)
        reports = [free_energy(state, params.lam, spec, kernel, delta=params.delta)]
        n_steps = int(round(config.T / dt))
        for _ in range(n_steps):
            state = step_kinetic(state, params, spec, kernel, dt)
            reports.append(free_energy(state, params.lam, spec, kernel, delta=params.delta))
        residuals = energy_identity_residual(reports, params.beta, params.gamma)
        return {
            "nx": nx, "nv": nv, "dt": dt,
            "sup_residual": float(np.abs(residuals).max()),
            "beta_D1_0": params.beta * reports[0].D1,
            "residuals": residuals,
            "times": np.array([r.t for r in reports[1:-1]]),
            "F_series": np.array([r.F_total for r in reports]),
            "final_mass": state.total_mass(),
        }

    base = one(config.nx, config.nv, config.dt_audit)
    out = {"base": base, "epsilon": epsilon}
    if refine:
        fine = one(2 * config.nx, 2 * config.nv, config.dt_audit / 2.0)
        out["refined"] = fine
        out["ratio"] = base["sup_residual"] / fine["sup_residual"]
    return out


def fit_rate(rows, x_field: str, y_field: str):
    """Ordinary least squares on (log x, log y) over sweep rows."""
    xs = np.array([float(getattr(r, x_field)) for r in rows])
    ys = np.array([float(getattr(r, y_field)) for r in rows])
    if xs.size < 3:
        raise NonPositiveData("need at least 3 rows")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise NonPositiveData("rate fit needs positive x and y")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), float(r2)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    return f"{x:.17e}"


def emit(rows, manifest: RunManifest, out_dir: str, results=None):
    """Write rows.csv, per-row series/snapshot files, and manifest.json last.

    Returns the list of all written paths.  Floats go out in full-precision
    scientific notation so that a parse-emit round trip is exact.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out_dir}: {exc}") from exc
    paths = []
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(",".join([
            _fmt(row.param), _fmt(row.int_w2sq), _fmt(row.sup_w2sq),
            _fmt(row.final_H), _fmt(row.energy_residual),
            _fmt(row.lipschitz_ok), _fmt(row.wall_time_s),
        ]))
    rows_path = os.path.join(out_dir, "rows.csv")
    _atomic_write(rows_path, "\n".join(lines) + "\n")
    paths.append(rows_path)
    manifest.row_files = [os.path.basename(rows_path)]
    if results:
        for res in results:
            if res is None:
                continue
            tag = f"{res['row'].param:g}".replace(".", "p")
            series_path = os.path.join(out_dir, f"series_{tag}.csv")
            series = res["series"]
            keys = list(series.keys())
            s_lines = [",".join(keys)]
            for k in range(len(series["t"])):
                s_lines.append(",".join(_fmt(series[key][k]) for key in keys))
            _atomic_write(series_path, "\n".join(s_lines) + "\n")
            paths.append(series_path)
            manifest.row_files.append(os.path.basename(series_path))
            for name in ("final_hydro", "final_agg"):
                if name in res:
                    snap_path = os.path.join(out_dir, f"{name}_{tag}.csv")
                    dump_ensemble(res[name], snap_path, params={"param": res["row"].param})
                    paths.extend([snap_path, snap_path + ".json"])
                    manifest.row_files.append(os.path.basename(snap_path))
            if manifest.config.get("dump_phase_snapshots") and "final_kinetic" in res:
                from .snapshots import dump_kinetic

                kin_path = os.path.join(out_dir, f"final_kinetic_{tag}.csv")
                dump_kinetic(res["final_kinetic"], kin_path, params={"param": res["row"].param})
                paths.extend([kin_path, kin_path + ".json"])
                manifest.row_files.append(os.path.basename(kin_path))
    manifest_path = os.path.join(out_dir, "manifest.json")
    _atomic_write(manifest_path, json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    paths.append(manifest_path)
    return paths


def parse_rows(path: str):
    """Inverse of the rows.csv emission (used by tests and rate-fit)."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected rows.csv header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            rows.append(SweepRow(
                param=float(parts[0]),
                int_w2sq=float(parts[1]),
                sup_w2sq=float(parts[2]),
                final_H=float(parts[3]),
                energy_residual=float(parts[4]),
                lipschitz_ok=parts[5] == "true",
                wall_time_s=float(parts[6]),
            ))
    return rows
