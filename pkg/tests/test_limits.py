import pytest
from pydantic import ValidationError

from xprlab.bignum import context
from xprlab.certify import CertificateKind
from xprlab.core.errors import DomainError, LengthError, PrecisionWarning, RankError
from xprlab.core.rng import generator
from xprlab.families import SineSumParams, Wave, evaluate, sampler
from xprlab.limits import (
    RecoveredCoefficient,
    RecoveryInstance,
    ResonantTarget,
    ResonantTerm,
    RootSpec,
    SigmaLimitTarget,
    combine_waves,
    convergence_sweep,
    derivative_bound_check,
    evaluate_resonant_target,
    polynomial_combo,
    realize_resonant_target,
    recover_coefficients,
    resonance_combo,
    sigma_limit_path,
    sigma_limit_target_value,
    sine_sum_sampler,
    sup_distance,
    synthesize_samples,
)

BITS = 256
POINTS = 500


@pytest.fixture
def ctx():
    return context(BITS)


def test_resonance_degree_zero_is_the_target(ctx):
    combo = resonance_combo(3, "0.4", 0, "1e-3", BITS)
    assert combo.n == 1
    [(_, error)] = convergence_sweep(3, "0.4", 0, ["1e-3"], POINTS, BITS)
    assert error < ctx.ldexp(1, -200)


def test_resonance_degree_one_error(ctx):
    [(_, error)] = convergence_sweep(3, 0, 1, ["1e-3"], POINTS, BITS)
    assert error <= ctx.mpf("5e-4")


@pytest.mark.parametrize("m, low, high", [(1, 0.4, 0.6), (2, 0.35, 0.65)])
def test_halving_the_step_halves_the_error(ctx, m, low, high):
    dw = ctx.mpf("1e-3")
    (_, coarse), (_, fine) = convergence_sweep(3, 0, m, [dw, dw / 2], POINTS, BITS)
    assert low <= fine / coarse <= high


def test_resonance_warns_when_scale_exceeds_precision():
    with pytest.warns(PrecisionWarning):
        resonance_combo(1, 0, 3, "1e-20", BITS)


def test_resonance_input_checks():
    with pytest.raises(DomainError):
        resonance_combo(1, 0, 1, 0, BITS)
    with pytest.raises(DomainError):
        resonance_combo(1, 0, -1, "0.1", BITS)


def test_combine_waves_cancels_opposite_phases(ctx):
    merged = combine_waves([Wave(c=1, omega=2, h=0), Wave(c=1, omega=2, h=ctx.pi), Wave(c=1, omega=3)], BITS)
    assert len(merged) == 2
    assert abs(merged[0].c) < ctx.ldexp(1, -200)


def test_polynomial_combo_linear(ctx):
    dw = ctx.mpf("1e-3")
    combo = polynomial_combo(1, [0, 1], dw, BITS)
    assert combo.n == 1
    error = sup_distance(sine_sum_sampler(combo, BITS), lambda x: x, POINTS, bits=BITS)
    assert error <= dw / 6


def test_polynomial_combo_cubic_converges(ctx):
    def error(dw):
        combo = polynomial_combo(2, [0, 0, 0, 1], dw, BITS)
        assert combo.n == 2
        return sup_distance(sine_sum_sampler(combo, BITS), lambda x: x**3, POINTS, bits=BITS)

    coarse, fine = error(ctx.mpf("1e-2")), error(ctx.mpf("5e-3"))
    assert fine < coarse * ctx.mpf("0.6")
    assert coarse < ctx.mpf("1e-2")


def test_polynomial_combo_degree_limit():
    with pytest.raises(LengthError):
        polynomial_combo(1, [0, 0, 1], "1e-3", BITS)
    with pytest.raises(DomainError):
        polynomial_combo(0, [1], "1e-3", BITS)


def test_resonant_target_uses_exactly_its_wave_count(ctx):
    target = ResonantTarget(
        poly=[0, 1],
        terms=[ResonantTerm(omega=5, amplitudes=[1, "0.5"], phases=[0, "0.3"])],
    )
    assert target.n_waves == 3
    realized = realize_resonant_target(target, "1e-4", BITS)
    assert realized.n == 3
    error = sup_distance(
        sine_sum_sampler(realized, BITS), lambda x: evaluate_resonant_target(target, x, BITS), POINTS, bits=BITS
    )
    assert error < ctx.mpf("1e-2")


def test_resonant_target_validation():
    with pytest.raises(ValidationError):
        ResonantTarget(poly=[1])
    with pytest.raises(ValidationError):
        ResonantTerm(omega=1, amplitudes=[1, 2], phases=[0])


def test_sup_distance(ctx):
    assert sup_distance(ctx.sin, ctx.sin, 100, bits=BITS) == 0
    value = sup_distance(ctx.sin, lambda x: 0, 10_000, bits=BITS)
    assert abs(value - ctx.sin(1)) < ctx.ldexp(1, -200)
    coarse = sup_distance(lambda x: ctx.sin(7 * x), lambda x: 0, 1_000, bits=BITS)
    assert coarse <= sup_distance(lambda x: ctx.sin(7 * x), lambda x: 0, 10_000, bits=BITS) + ctx.mpf("1e-4")
    with pytest.raises(DomainError):
        sup_distance(ctx.sin, ctx.sin, 1, bits=BITS)


def test_recover_affine_sequence_at_plus_one(ctx):
    values = [3 + 2 * s for s in range(4)]
    instance = RecoveryInstance(
        samples=synthesize_samples([], 4, BITS).model_copy(update={"values": [ctx.mpf(v) for v in values]}),
        roots=[RootSpec(z=1)],
    )
    report = recover_coefficients(instance, BITS)
    assert [(c.degree, c.value) for c in report.coefficients] == [(0, 3), (1, 2)]
    assert report.residual < ctx.ldexp(1, -200)


def test_recover_single_complex_root(ctx):
    z = ctx.expj(ctx.mpf("0.7"))
    b = ctx.mpc(1, "0.5")
    grid = synthesize_samples([RecoveredCoefficient(root=z, degree=0, value=b)], 7, BITS)
    report = recover_coefficients(RecoveryInstance(samples=grid, roots=[RootSpec(z=z)]), BITS)
    [coefficient] = report.coefficients
    assert abs(coefficient.value - b) < ctx.ldexp(1, -BITS // 2)


def test_recover_double_roots_round_trip(ctx):
    rng = generator(31)
    roots = [ctx.expj(ctx.mpf("0.7")), ctx.expj(ctx.mpf("1.9"))]
    truth = [
        RecoveredCoefficient(root=z, degree=k, value=ctx.mpc(rng.uniform(-1, 1), rng.uniform(-1, 1)))
        for z in roots
        for k in range(2)
    ]
    grid = synthesize_samples(truth, 13, BITS)
    instance = RecoveryInstance(samples=grid, roots=[RootSpec(z=z, multiplicity=2) for z in roots])
    report = recover_coefficients(instance, BITS)
    found = {(c.root, c.degree): c.value for c in report.coefficients}
    for c in truth:
        assert abs(found[c.root, c.degree] - c.value) < ctx.ldexp(1, -BITS // 2)
    assert report.residual < ctx.ldexp(1, -BITS // 2)


def test_recover_rejects_conjugate_pair(ctx):
    z = ctx.expj(ctx.mpf("0.7"))
    grid = synthesize_samples([RecoveredCoefficient(root=z, degree=0, value=1)], 8, BITS)
    with pytest.raises(RankError):
        recover_coefficients(RecoveryInstance(samples=grid, roots=[RootSpec(z=z), RootSpec(z=ctx.conj(z))]), BITS)


def test_recover_rejects_roots_off_the_circle(ctx):
    grid = synthesize_samples([], 4, BITS)
    with pytest.raises(DomainError):
        recover_coefficients(RecoveryInstance(samples=grid, roots=[RootSpec(z=2)]), BITS)


def test_recovery_needs_enough_samples(ctx):
    grid = synthesize_samples([], 3, BITS)
    with pytest.raises(ValidationError):
        RecoveryInstance(samples=grid, roots=[RootSpec(z=ctx.expj(1), multiplicity=2)])


def test_derivative_bound_for_single_wave():
    certificate = derivative_bound_check(SineSumParams(waves=[Wave(c=1, omega=10)]), 1, n_points=400, bits=BITS)
    assert certificate.kind == CertificateKind.derivative_bound
    assert certificate.passed
    assert 9 < certificate.residual < 11


def test_derivative_bound_for_constant(ctx):
    constant = SineSumParams(waves=[Wave(c=2, omega=0, h=ctx.pi / 2)])
    certificate = derivative_bound_check(constant, 2, n_points=50, bits=BITS)
    assert certificate.passed
    assert certificate.residual == 0


def test_derivative_bound_random_members():
    for trial in range(10):
        rng = generator(41, trial)
        waves = [Wave(c=rng.uniform(-1, 1), omega=rng.uniform(-20, 20), h=rng.uniform(0, 6)) for _ in range(2)]
        certificate = derivative_bound_check(SineSumParams(waves=waves), trial % 4, 20, n_points=100, bits=BITS)
        assert certificate.passed


def test_derivative_bound_rejects_low_declared_bound():
    with pytest.raises(DomainError):
        derivative_bound_check(SineSumParams(waves=[Wave(c=1, omega=30)]), 1, 20, n_points=50, bits=BITS)


def test_affine_sigma_path_converges(ctx):
    target = SigmaLimitTarget(kind="affine-sigma", a=2, b="0.5", c=1)

    def error(t):
        params = sigma_limit_path(target, "sigmoid", t, bits=BITS)
        return sup_distance(
            sampler(params, BITS), lambda x: sigma_limit_target_value(target, "sigmoid", x, bits=BITS), 200, bits=BITS
        )

    assert error("1e-2") < ctx.mpf("1e-1")
    assert error("1e-3") < ctx.mpf("1e-2")


@pytest.mark.parametrize("kind", ["monomial", "sine-of-monomial"])
def test_monomial_paths_converge(ctx, kind):
    target = SigmaLimitTarget(kind=kind, a0="0.5", ar=2, r=1, c=1)

    def error(t):
        params = sigma_limit_path(target, "tanh", t, bits=BITS)
        return sup_distance(
            sampler(params, BITS), lambda x: sigma_limit_target_value(target, "tanh", x, bits=BITS), 200, bits=BITS
        )

    coarse, fine = error("1e-2"), error("1e-3")
    assert fine < coarse
    assert fine < ctx.mpf("1e-2")


def test_gaussian_path_uses_quadratic_order(ctx):
    target = SigmaLimitTarget(kind="monomial", a0=0, ar=1, r=2)
    params = sigma_limit_path(target, "gaussian", "1e-3", bits=BITS)
    assert abs(evaluate(params, "0.5", BITS) - ctx.mpf("0.25")) < ctx.mpf("1e-2")
    with pytest.raises(DomainError):
        sigma_limit_path(SigmaLimitTarget(kind="monomial", a0=0, ar=1, r=1), "gaussian", "1e-3", bits=BITS)


def test_path_at_one_is_a_member():
    target = SigmaLimitTarget(kind="affine-sigma", a=1, b=1, c=0)
    params = sigma_limit_path(target, "tanh", 1, bits=BITS)
    evaluate(params, "0.3", BITS)
    with pytest.raises(DomainError):
        sigma_limit_path(target, "tanh", 0, bits=BITS)


def test_sigma_target_requires_its_fields():
    with pytest.raises(ValidationError):
        SigmaLimitTarget(kind="monomial", a0=1)
