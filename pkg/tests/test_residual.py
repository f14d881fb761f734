"""Residual assembly, both loss routes, and their contrast properties."""

import numpy as np
import pytest

from rvpinn import BcMode, MlpParams, mlp_init
from rvpinn.problem import (
    ConstantSource,
    Problem,
    advection_problem,
    delta_problem,
    exact_solution,
    smooth_problem,
)
from rvpinn.residual import (
    LossAssembler,
    SpdViolationError,
    assembly_from_parts,
    boundary_penalty,
    classical_vpinn_loss,
    residual_vector,
    rvpinn_loss,
    spectral_series_loss,
)
from rvpinn.testspace import FeHatSpace, SpectralSineSpace, rescale_basis
from rvpinn.trainer import _loss_with_grad


def exact_field(problem):
    exact = exact_solution(problem)
    return lambda x: (exact.u(x), exact.du_dx(x))


def zero_params(architecture=(1, 4, 1)):
    template = mlp_init(architecture, seed=0)
    return MlpParams.from_flat(architecture, np.zeros(template.n_params))


def test_exact_solution_injection_zeroes_residual():
    problem = smooth_problem(1.0, BcMode.STRONG)
    field = exact_field(problem)
    for space in (SpectralSineSpace(50, 1.0), FeHatSpace(100)):
        res = residual_vector(None, problem, space, field=field)
        assert np.max(np.abs(res)) < 1e-6


def test_exact_solution_injection_zeroes_loss():
    problem = smooth_problem(1.0, BcMode.STRONG)
    field = exact_field(problem)
    assembly = rvpinn_loss(None, problem, SpectralSineSpace(50, 1.0), field=field)
    assert assembly.loss < 1e-10
    assert assembly.phi_norm < 1e-5


def test_zero_network_constant_source_fe_residual_is_h():
    # u = 0, f = 1: r_m = int(phi_m) = h for every interior hat
    problem = Problem(1.0, 0.0, ConstantSource(1.0), BcMode.STRONG)
    space = FeHatSpace(7)
    res = residual_vector(zero_params(), problem, space)
    assert np.allclose(res, space.h, rtol=1e-13)


def test_zero_network_delta_source_spectral_residual():
    # r_1 = phi_1(0.5) = (2/pi) sin(3*pi/4) = sqrt(2)/pi
    problem = delta_problem(1.0, BcMode.STRONG)
    res = residual_vector(zero_params(), problem, SpectralSineSpace(3, 1.0))
    assert res[0] == pytest.approx(np.sqrt(2.0) / np.pi, rel=1e-14)


def test_loss_bookkeeping_identity():
    problem = smooth_problem(1.0, BcMode.CONSTRAINED)
    params = mlp_init((1, 6, 6, 1), seed=2)
    assembly = rvpinn_loss(params, problem, SpectralSineSpace(10, 1.0))
    assert assembly.loss == pytest.approx(
        float(assembly.residual @ assembly.riesz_coeffs) + assembly.penalty, rel=1e-12
    )
    assert assembly.phi_norm**2 == pytest.approx(assembly.loss - assembly.penalty, rel=1e-12)
    assert assembly.phi_norm >= 0.0


def test_strong_bc_loss_has_no_penalty():
    problem = smooth_problem(1.0, BcMode.STRONG)
    assembly = rvpinn_loss(mlp_init((1, 5, 1), seed=0), problem, FeHatSpace(5))
    assert assembly.penalty == 0.0
    assert assembly.phi_norm == pytest.approx(np.sqrt(assembly.loss), rel=1e-14)


def test_orthonormal_basis_recovers_classical_loss():
    # identity Gram: quadratic form equals the plain sum of squares
    problem = smooth_problem(1.0, BcMode.STRONG)
    space = SpectralSineSpace(20, 1.0)
    params = mlp_init((1, 8, 8, 1), seed=5)
    robust = rvpinn_loss(params, problem, space)
    classical = classical_vpinn_loss(params, problem, space)
    assert abs(robust.loss - classical) < 1e-12 * max(robust.loss, 1e-300)


@pytest.mark.parametrize("bc", [BcMode.STRONG, BcMode.CONSTRAINED])
def test_spectral_series_route_matches_quadform_route(bc):
    problem = smooth_problem(1.0, bc)
    space = SpectralSineSpace(30, 1.0)
    for seed in range(4):
        params = mlp_init((1, 6, 6, 1), seed=seed)
        robust = rvpinn_loss(params, problem, space)
        series = spectral_series_loss(params, problem, 30)
        assert abs(series - robust.loss) / robust.loss < 1e-10


def test_rescaling_leaves_robust_loss_invariant():
    problem = smooth_problem(1.0, BcMode.STRONG)
    space = FeHatSpace(10)
    params = mlp_init((1, 8, 8, 1), seed=3)
    base = rvpinn_loss(params, problem, space)
    for factor in (1e3, 1e-3, -5.0):
        scaled = rvpinn_loss(params, problem, rescale_basis(space, 4, factor))
        assert abs(scaled.loss - base.loss) / base.loss < 1e-9


def test_rescaling_scales_classical_term_by_c_squared():
    problem = smooth_problem(1.0, BcMode.STRONG)
    space = FeHatSpace(10)
    params = mlp_init((1, 8, 8, 1), seed=3)
    factor = 1e3
    base = residual_vector(params, problem, space)
    scaled = residual_vector(params, problem, rescale_basis(space, 4, factor))
    assert scaled[3] ** 2 == pytest.approx(factor**2 * base[3] ** 2, rel=1e-10)
    # classical loss moves by the scaled term, robust (above) does not
    classical_base = classical_vpinn_loss(params, problem, space)
    classical_scaled = classical_vpinn_loss(
        params, problem, rescale_basis(space, 4, factor)
    )
    expected = classical_base + (factor**2 - 1.0) * base[3] ** 2
    assert classical_scaled == pytest.approx(expected, rel=1e-9)


def test_classical_loss_zero_residual_leaves_penalty():
    problem = smooth_problem(1.0, BcMode.CONSTRAINED)
    field = exact_field(problem)
    value = classical_vpinn_loss(None, problem, SpectralSineSpace(40, 1.0), field=field)
    # exact solution satisfies the BCs, so only quadrature noise remains
    assert value < 1e-10

    # zero field on a zero source: residual is exactly zero, the loss is
    # exactly the injected boundary penalty
    quiet = Problem(1.0, 0.0, ConstantSource(0.0), BcMode.CONSTRAINED)
    offset = lambda x: (np.full(np.shape(x), 0.3), np.zeros(np.shape(x)))
    value = classical_vpinn_loss(None, quiet, SpectralSineSpace(10, 1.0), field=offset)
    assert value == pytest.approx(2 * 0.3**2, rel=1e-14)
    robust = rvpinn_loss(None, quiet, SpectralSineSpace(10, 1.0), field=offset)
    assert robust.penalty == pytest.approx(2 * 0.3**2, rel=1e-14)
    assert robust.phi_norm == 0.0


def test_boundary_penalty_values():
    # craft u(x) = w2*tanh(w1*x + b1) + b2 with u(-1) = 0.1, u(1) = -0.2
    w1 = 1.0
    w2 = -0.15 / np.tanh(1.0)
    b2 = -0.05
    params = MlpParams(
        [np.array([[w1]]), np.array([[w2]])],
        [np.array([0.0]), np.array([b2])],
        (1, 1, 1),
    )
    assert boundary_penalty(params, BcMode.STRONG) == 0.0
    assert boundary_penalty(params, BcMode.CONSTRAINED) == pytest.approx(0.05, rel=1e-12)


def test_boundary_penalty_gradient_matches_fd():
    params = mlp_init((1, 5, 1), seed=6)
    problem = Problem(1.0, 0.0, ConstantSource(0.0), BcMode.CONSTRAINED)
    assembler = LossAssembler(problem, FeHatSpace(3))

    from rvpinn.mlp import grad_scalar

    analytic = grad_scalar(params, lambda p: assembler.penalty(p))
    step = 1e-6
    flat = params.flatten()
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        up, dn = flat.copy(), flat.copy()
        up[i] += step
        dn[i] -= step
        numeric[i] = (
            boundary_penalty(MlpParams.from_flat(params.architecture, up), BcMode.CONSTRAINED)
            - boundary_penalty(MlpParams.from_flat(params.architecture, dn), BcMode.CONSTRAINED)
        ) / (2 * step)
    assert np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))) < 1e-6


@pytest.mark.parametrize(
    "problem, space",
    [
        (smooth_problem(1.0, BcMode.STRONG), FeHatSpace(5)),
        (smooth_problem(1.0, BcMode.CONSTRAINED), SpectralSineSpace(5, 1.0)),
        (advection_problem(0.1, BcMode.STRONG), SpectralSineSpace(5, 0.1)),
        (delta_problem(1.0, BcMode.CONSTRAINED), FeHatSpace(6)),
    ],
)
def test_loss_gradient_matches_fd_across_configurations(problem, space):
    assembler = LossAssembler(problem, space)
    params = mlp_init((1, 5, 5, 1), seed=8)
    _, analytic = _loss_with_grad(assembler, params)
    step = 1e-6
    flat = params.flatten()
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        up, dn = flat.copy(), flat.copy()
        up[i] += step
        dn[i] -= step
        numeric[i] = (
            assembler.rvpinn(MlpParams.from_flat(params.architecture, up))[0]
            - assembler.rvpinn(MlpParams.from_flat(params.architecture, dn))[0]
        ) / (2 * step)
    assert np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))) < 1e-4


def test_loss_invariant_under_basis_permutation():
    problem = smooth_problem(1.0, BcMode.STRONG)
    space = FeHatSpace(8)
    params = mlp_init((1, 6, 1), seed=1)
    assembler = LossAssembler(problem, space)
    loss = assembler.rvpinn(params)[0]

    from rvpinn.testspace import GramFactorization, gram_assemble, gram_factorize

    rng = np.random.default_rng(5)
    perm = rng.permutation(8)
    gram = gram_assemble(space, 1.0)[np.ix_(perm, perm)]
    residual = assembler.residual(params)[perm]
    fact = gram_factorize(gram)
    permuted = float(residual @ fact.solve(residual))
    assert permuted == pytest.approx(loss, rel=1e-12)


def test_spd_violation_guard():
    with pytest.raises(SpdViolationError):
        assembly_from_parts(-1e-6, np.ones(2), np.ones(2), -1e-6, 0.0)
    # rounding-scale negativity is clamped, not raised
    assembly = assembly_from_parts(-1e-14, np.ones(2), np.ones(2), -1e-14, 0.0)
    assert assembly.phi_norm == 0.0


def test_dirac_load_uses_point_evaluation():
    problem = delta_problem(1.0, BcMode.STRONG)
    space = FeHatSpace(100)
    assembler = LossAssembler(problem, space)
    values = np.array([float(space.eval(m, 0.5)[0]) for m in range(1, 101)])
    assert np.array_equal(assembler.load, values)
    assert np.count_nonzero(assembler.load) == 2  # 0.5 is interior to one cell
