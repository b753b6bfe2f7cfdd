import pytest
from pydantic import ValidationError

from xprlab.bignum import context
from xprlab.certify import (
    ENTROPY_UNBOUNDED,
    Certificate,
    CertificateKind,
    Coloring,
    constraint_grid_size,
    det_certificate,
    discrete_derivative,
    entropy_bound,
    exp_poly_certificate,
    exp_poly_sub_certifier,
    find_monochromatic_ap,
    hankel_det_certificate,
    hankel_sub_certifier,
    vdw_composite_certificate,
    vdw_number,
    verify_vdw_number,
)
from xprlab.core.errors import BudgetError, DegenerateInputError, DomainError, LengthError, ZeroSampleError
from xprlab.core.rng import generator
from xprlab.families import SampleGrid, SineSumParams, Wave, sample, sampler
from xprlab.netlab import Edge, NetworkGraph, Neuron, branch_colorer, network_sampler

BITS = 256


@pytest.fixture
def ctx():
    return context(BITS)


def exp_grid(poly, a, h, m):
    """Samples of ``exp(poly(x))``, ``poly`` in ascending order."""
    ctx = context(BITS)
    a, h = ctx.mpf(a), ctx.mpf(h)
    values = [ctx.exp(ctx.polyval([ctx.mpf(c) for c in reversed(poly)], a + k * h)) for k in range(m + 1)]
    return SampleGrid(a=a, h=h, m=m, values=values)


def test_det_certificate_passes_for_sine(ctx):
    grid = ["0", "0.3", "0.7"]
    certificate = det_certificate(ctx.sin, 0, grid, grid, 1, bits=BITS)
    assert certificate.passed
    assert certificate.kind == CertificateKind.det


def test_det_certificate_fails_for_cube(ctx):
    grid = ["0", "0.3", "0.7"]
    certificate = det_certificate(lambda x: x**3, 0, grid, grid, 1, bits=BITS)
    assert not certificate.passed
    assert certificate.residual > ctx.mpf("1e-3")


def test_det_certificate_random_sine_sums(ctx):
    for trial in range(8):
        rng = generator(21, trial)
        n = 1 + trial % 3
        waves = [Wave(c=rng.uniform(-1, 1), omega=rng.uniform(-10, 10), h=rng.uniform(0, 6)) for _ in range(n)]
        alphas = sorted(rng.uniform(0, 0.3, 2 * n + 1))
        betas = sorted(rng.uniform(0, 0.3, 2 * n + 1))
        certificate = det_certificate(sampler(SineSumParams(waves=waves), BITS), 0, alphas, betas, n, bits=BITS)
        assert certificate.passed


def test_det_certificate_input_checks(ctx):
    with pytest.raises(DegenerateInputError):
        det_certificate(ctx.sin, 0, ["0", "0", "0.7"], ["0", "0.3", "0.7"], 1, bits=BITS)
    with pytest.raises(LengthError):
        det_certificate(ctx.sin, 0, ["0", "0.3"], ["0", "0.3"], 1, bits=BITS)


def test_hankel_certificate_on_grid(ctx):
    params = SineSumParams(waves=[Wave(c="0.7", omega=5, h=1)])
    grid = sample(params, "0.1", "0.2", 4, BITS)
    assert hankel_det_certificate(grid, 1, bits=BITS).passed
    with pytest.raises(LengthError):
        hankel_det_certificate(grid, 2, bits=BITS)


def test_certificate_serializes_pass_key():
    certificate = Certificate.build(CertificateKind.det, 0, 1, N=1)
    document = certificate.model_dump(mode="json")
    assert document["pass"] is True
    assert Certificate.model_validate(document) == certificate


def test_certificate_verdict_must_match_residual():
    with pytest.raises(ValidationError):
        Certificate(kind="det", residual=1, tolerance=0, passed=True)


def test_discrete_derivative_tables(ctx):
    constant = SampleGrid(a=0, h="0.5", m=4, values=[3] * 5)
    assert all(v == 0 for v in discrete_derivative(constant, 1).values)

    square = SampleGrid(a=0, h="0.1", m=5, values=[(ctx.mpf(k) / 10) ** 2 for k in range(6)])
    assert all(abs(v) < ctx.ldexp(1, -200) for v in discrete_derivative(square, 3).values)

    cube = SampleGrid(a=0, h=1, m=5, values=[k**3 for k in range(6)])
    assert [int(v) for v in discrete_derivative(cube, 3).values] == [6, 6, 6]

    with pytest.raises(LengthError):
        discrete_derivative(cube, 6)


def test_exp_poly_certificates():
    assert exp_poly_certificate(exp_grid([0, 1], 0, "0.1", 4), 1, bits=BITS).passed
    assert exp_poly_certificate(exp_grid([0, -3, 1], 0, "0.1", 3), 2, bits=BITS).passed
    assert not exp_poly_certificate(exp_grid([0, 0, 0, 1], 0, "0.1", 3), 2, bits=BITS).passed


def test_exp_poly_with_winding_phase(ctx):
    # imaginary exponent sweeping several turns
    values = [ctx.expj(40 * ctx.mpf(k) / 10 + ctx.mpf(k) ** 2 / 100) for k in range(8)]
    grid = SampleGrid(a=0, h="0.1", m=7, values=values)
    assert exp_poly_certificate(grid, 2, bits=BITS).passed


def test_exp_poly_rejects_zero_samples():
    grid = SampleGrid(a=0, h="0.1", m=3, values=[1, 0, 1, 1])
    with pytest.raises(ZeroSampleError):
        exp_poly_certificate(grid, 1, bits=BITS)


def test_exp_poly_needs_long_enough_grid():
    with pytest.raises(LengthError):
        exp_poly_certificate(exp_grid([0, 1], 0, "0.1", 2), 2, bits=BITS)


def test_constraint_grid_size():
    assert constraint_grid_size(2, 1, 1, 1) == 14
    assert constraint_grid_size(1, 1, 0, 0) == 6
    with pytest.raises(DomainError):
        constraint_grid_size(0, 1, 1, 1)


def test_monochromatic_progressions():
    assert find_monochromatic_ap(Coloring.from_string("RRBBRRBBR"), 3) == (1, 4)
    assert find_monochromatic_ap(Coloring.from_string("RRBBRRBB"), 3) is None
    assert find_monochromatic_ap(Coloring.from_string("AAA"), 3) == (1, 1)


def test_coloring_from_keys_is_dense():
    coloring = Coloring.from_keys([(1, 0), (1, 0), (0, 0), (1, 1)])
    assert coloring.colors == [0, 0, 1, 2]
    assert coloring.p == 3
    with pytest.raises(ValidationError):
        Coloring(colors=[0, 2], p=2)


def test_vdw_numbers():
    assert vdw_number(3, 2) == 9
    assert vdw_number(4, 1) == 4
    assert vdw_number(2, 3) == 4
    assert verify_vdw_number(3, 2)
    with pytest.raises(BudgetError):
        vdw_number(7, 2)
    with pytest.raises(BudgetError):
        verify_vdw_number(4, 2)


def single_branch_network():
    nodes = [
        Neuron(id="x"),
        Neuron(id="r", act="relu", inputs=[Edge(source="x", w=1)], bias=1),
        Neuron(id="g", act="gaussian", inputs=[Edge(source="r", w="0.5")]),
        Neuron(id="y", inputs=[Edge(source="g", w=2)]),
    ]
    return NetworkGraph(nodes=nodes, input="x", output="y")


def kinked_sine_network():
    nodes = [
        Neuron(id="x"),
        Neuron(id="r", act="relu", inputs=[Edge(source="x", w=1)], bias="-0.5"),
        Neuron(id="s", act="sin", inputs=[Edge(source="r", w=3)], bias="0.4"),
        Neuron(id="y", inputs=[Edge(source="s", w=1)]),
    ]
    return NetworkGraph(nodes=nodes, input="x", output="y")


def test_vdw_composite_with_one_branch_matches_plain_certificate():
    net = single_branch_network()
    certificate = vdw_composite_certificate(
        network_sampler(net, BITS), 0, 1, branch_colorer(net, BITS), exp_poly_sub_certifier(2, bits=BITS), 4, 1, BITS
    )
    assert certificate.metadata["n_vdw"] == 4
    assert certificate.metadata["progression"] == {"start": 1, "step": 1}
    plain = exp_poly_certificate(
        SampleGrid(a=0, h=context(BITS).mpf(1) / 3, m=3, values=[network_sampler(net, BITS)(k / 3) for k in range(4)]),
        2,
        bits=BITS,
    )
    assert certificate.passed and plain.passed


def test_vdw_composite_across_a_kink():
    net = kinked_sine_network()
    certificate = vdw_composite_certificate(
        network_sampler(net, BITS), 0, 1, branch_colorer(net, BITS), hankel_sub_certifier(1, bits=BITS), 5, 2, BITS
    )
    assert certificate.metadata["n_vdw"] == vdw_number(5, 2)
    assert certificate.metadata["colors_observed"] == 2
    assert certificate.passed
    assert certificate.kind == CertificateKind.vdw_composite


def test_vdw_composite_rejects_undeclared_branches():
    net = kinked_sine_network()
    with pytest.raises(DomainError):
        vdw_composite_certificate(
            network_sampler(net, BITS), 0, 1, branch_colorer(net, BITS), hankel_sub_certifier(1, bits=BITS), 5, 1, BITS
        )


def test_entropy_bound():
    assert entropy_bound(4, 32, 1, context(BITS).ldexp(1, -7), BITS) == 18
    assert entropy_bound(3, 10, 2, 1, BITS) == 30
    nearly = 1 - context(BITS).ldexp(1, -200)
    assert entropy_bound(1, 1, 1, nearly, BITS) == ENTROPY_UNBOUNDED
    with pytest.raises(DomainError):
        entropy_bound(1, 1, 1, 2, BITS)
