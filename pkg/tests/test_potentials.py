import numpy as np
import pytest

from frictionlab.errors import DegenerateGrid, MassNotNormalized, TabulatedRangeExceeded
from frictionlab.measures import DensityProfile, ParticleEnsemble
from frictionlab.potentials import (
    ConfinementSpec,
    GaussianKernel,
    QuadraticKernel,
    TabulatedKernel,
    check_hypothesis,
    convolve_grad,
    estimate_cW,
    eval_confinement_grad,
    eval_confinement_value,
    eval_kernel_grad,
    load_tabulated_kernel,
)


def test_confinement_grad_zero():
    assert eval_confinement_grad(0.0, ConfinementSpec(1.0)) == 0.0


def test_confinement_grad_and_value():
    spec = ConfinementSpec(1.0)
    assert eval_confinement_grad(2.0, spec) == pytest.approx(2.0)
    assert eval_confinement_value(2.0, spec) == pytest.approx(2.0)
    spec2 = ConfinementSpec(2.0)
    assert eval_confinement_grad(3.0, spec2) == pytest.approx(6.0)
    assert eval_confinement_value(3.0, spec2) == pytest.approx(9.0)


def test_quadratic_kernel_grad():
    assert eval_kernel_grad(QuadraticKernel(1.0), 0.5) == pytest.approx(0.5)


def test_kernel_grad_vanishes_at_origin():
    for kernel in (QuadraticKernel(2.0), GaussianKernel(1.0, 1.0)):
        assert eval_kernel_grad(kernel, 0.0) == 0.0


def test_gaussian_kernel_grad_value():
    # d/dx [a exp(-x^2/2)] at x=1 is -exp(-1/2); cross-check by central
    # difference of the kernel value itself
    kernel = GaussianKernel(1.0, 1.0)
    expected = -np.exp(-0.5)
    assert eval_kernel_grad(kernel, 1.0) == pytest.approx(expected, abs=1e-12)
    h = 1e-6
    fd = (kernel.value(1.0 + h) - kernel.value(1.0 - h)) / (2 * h)
    assert eval_kernel_grad(kernel, 1.0) == pytest.approx(fd, abs=1e-9)


def test_kernel_grad_oddness_random():
    rng = np.random.default_rng(7)
    x = rng.uniform(-6, 6, size=1000)
    for kernel in (QuadraticKernel(1.3), GaussianKernel(-0.7, 0.9)):
        assert np.abs(kernel.grad(x) + kernel.grad(-x)).max() <= 1e-12


def test_gradient_finite_difference_second_order():
    # central-difference error of an analytic gradient scales like h^2
    kernel = GaussianKernel(1.0, 1.0)
    x = 1.0
    errs = []
    for h in (1e-3, 1e-4):
        fd = (kernel.value(x + h) - kernel.value(x - h)) / (2 * h)
        errs.append(abs(float(kernel.grad(x)) - fd))
    ratio = errs[0] / errs[1]
    assert 50 <= ratio <= 200


def test_convolve_single_particle_matches_kernel_grad():
    kernel = GaussianKernel(1.0, 0.8)
    a = 0.37
    ens = ParticleEnsemble(np.array([a]), np.array([1.0]))
    xq = np.array([-1.0, 0.2, 2.5])
    assert convolve_grad(kernel, ens, xq) == pytest.approx(kernel.grad(xq - a), abs=0.0)


def test_convolve_even_density_at_origin():
    kernel = GaussianKernel(1.0, 1.0)
    prof = DensityProfile.gaussian(0.0, 0.7, -6, 6, 512)
    assert convolve_grad(kernel, prof, 0.0) == pytest.approx(0.0, abs=1e-14)


def test_convolve_quadratic_kernel_is_mean_shift():
    # for W = |x|^2/2 the convolution is x - mean(rho); the quadrature oracle
    # is the direct midpoint sum, which the implementation must match exactly
    kernel = QuadraticKernel(1.0)
    prof = DensityProfile.gaussian(0.4, 0.6, -5, 5, 1024)
    mean = float((prof.centers * prof.rho).sum() * prof.dx)
    xq = np.array([-2.0, 0.0, 1.5])
    got = convolve_grad(kernel, prof, xq)
    assert got == pytest.approx(xq - mean, abs=1e-12)


def test_convolve_rejects_unnormalized_density():
    kernel = QuadraticKernel(1.0)
    ens = ParticleEnsemble(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    ens.masses = np.array([0.4, 0.5])  # bypass constructor check
    with pytest.raises(MassNotNormalized):
        convolve_grad(kernel, ens, 0.0)


def test_estimate_cW_quadratic_exact():
    for a in (1.0, -1.0, 2.5):
        assert estimate_cW(QuadraticKernel(a), 5.0, 41) == pytest.approx(a, abs=0.0)


def test_estimate_cW_gaussian_regression():
    # brute-force pair-grid minimum, frozen as the regression baseline
    value = estimate_cW(GaussianKernel(1.0, 1.0), 5.0, 401)
    assert value < 0
    assert value == pytest.approx(-0.9996875488230391, rel=1e-12)


def test_estimate_cW_monotone_under_nested_refinement():
    kernel = GaussianKernel(1.0, 1.0)
    prev = np.inf
    n = 11
    for _ in range(4):
        est = estimate_cW(kernel, 3.0, n)
        assert est <= prev + 1e-15
        prev = est
        n = 2 * n - 1  # nested grids share all previous points


def test_estimate_cW_degenerate():
    with pytest.raises(DegenerateGrid):
        estimate_cW(QuadraticKernel(1.0), 0.0, 41)
    with pytest.raises(DegenerateGrid):
        estimate_cW(QuadraticKernel(1.0), 1.0, 1)


def test_check_hypothesis_quadratic():
    report = check_hypothesis(ConfinementSpec(1.0), QuadraticKernel(1.0), 5.0, 101)
    assert report.margin == pytest.approx(2.0)
    assert report.h_satisfied


def test_check_hypothesis_violated():
    report = check_hypothesis(ConfinementSpec(0.0), QuadraticKernel(-1.0), 5.0, 101)
    assert report.margin == pytest.approx(-1.0)
    assert not report.h_satisfied


def test_check_hypothesis_gaussian_margin():
    spec = ConfinementSpec(1.0)
    kernel = GaussianKernel(1.0, 1.0)
    report = check_hypothesis(spec, kernel, 5.0, 401)
    assert report.margin == pytest.approx(1.0 + report.c_w_estimate)
    assert report.h_satisfied  # 1 - 0.99969 > 0


def test_tabulated_kernel_symmetrization_and_oddness(tmp_path):
    # a noisy, slightly asymmetric table must come back even with odd gradient
    x = np.linspace(-3, 3, 121)
    w = np.exp(-x**2 / 2) + 0.01 * x  # asymmetric perturbation
    path = tmp_path / "kernel.csv"
    lines = ["x,w"] + [f"{xi},{wi}" for xi, wi in zip(x, w)]
    path.write_text("\n".join(lines))
    kernel = load_tabulated_kernel(str(path))
    xs = np.linspace(-2.9, 2.9, 333)
    assert np.abs(kernel.value(xs) - kernel.value(-xs)).max() <= 1e-14
    assert np.abs(kernel.grad(xs) + kernel.grad(-xs)).max() <= 1e-14
    assert kernel.grad(0.0) == 0.0
    assert np.isfinite(kernel.lipschitz_grad_bound)


def test_tabulated_kernel_range_handling():
    x = np.linspace(-2, 2, 41)
    w = x**2 / 2
    kernel = TabulatedKernel(x, w)
    assert kernel.grad(5.0) == 0.0  # zero-extended gradient
    strict = TabulatedKernel(x, w, strict_range=True)
    with pytest.raises(TabulatedRangeExceeded):
        strict.grad(5.0)


def test_tabulated_kernel_matches_quadratic_inside():
    x = np.linspace(-2, 2, 4001)
    kernel = TabulatedKernel(x, x**2 / 2)
    xs = np.linspace(-1.5, 1.5, 101)
    assert np.abs(kernel.grad(xs) - xs).max() <= 1e-5
