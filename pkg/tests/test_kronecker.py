import itertools
import math
from fractions import Fraction

import pytest
from pydantic import ValidationError

from xprlab.bignum import circle_distance, context
from xprlab.core.errors import DomainError, LengthError, NotFound
from xprlab.core.rng import generator
from xprlab.families import SingleSineParams, Wave, evaluate
from xprlab.kronecker import (
    DiophantineInstance,
    ShatterInstance,
    _grid_scan,
    babai_nearest_plane,
    close_vectors,
    fit_single_sine,
    lll_reduce,
    progression_sign_conflict,
    rational_independence_check,
    shatter,
    solve_orbit,
    subtorus_witness,
    three_term_identity_residual,
)

BITS = 256


@pytest.fixture
def ctx():
    return context(BITS)


def test_integer_relation_between_one_and_two():
    result = rational_independence_check([1, 2], bits=BITS)
    assert not result.independent
    assert result.relation == [2, -1]


def test_one_and_root_two_are_independent(ctx):
    result = rational_independence_check([1, ctx.sqrt(2)], bound=10**6, bits=BITS)
    assert result.independent
    assert result.relation is None


def test_relation_among_decimals():
    result = rational_independence_check(["0.3", "0.6", "0.9"], bits=BITS)
    assert not result.independent
    ctx = context(BITS)
    total = sum(l * ctx.mpf(x) for l, x in zip(result.relation, ["0.3", "0.6", "0.9"]))
    assert abs(total) < ctx.ldexp(1, -200)


def test_zero_point_is_its_own_relation():
    result = rational_independence_check([0, 1], bits=BITS)
    assert result.relation == [1, 0]


def test_lll_reduces_skewed_basis():
    assert lll_reduce([[1, 0], [1000, 1]]) == [[1, 0], [0, 1]]


def test_lll_keeps_the_lattice():
    basis = [[1, 1, 1], [-1, 0, 2], [3, 5, 6]]
    reduced = lll_reduce(basis)

    def det(m):
        return (
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        )

    assert abs(det(reduced)) == abs(det(basis))
    assert min(sum(v * v for v in row) for row in reduced) == 1


def test_lll_rejects_bad_delta():
    with pytest.raises(DomainError):
        lll_reduce([[1, 0], [0, 1]], delta=Fraction(1, 8))


def test_babai_on_scaled_grid():
    assert babai_nearest_plane([[2, 0], [0, 2]], [3, 5]) == [4, 4]
    assert babai_nearest_plane([[1, 0], [0, 1]], [3, -2]) == [3, -2]


def test_single_point_orbit_is_quarter_turn(ctx):
    instance = DiophantineInstance(points=[1], thetas=[ctx.pi / 2], eps="1e-6")
    solution = solve_orbit(instance, BITS)
    assert abs(solution.omega - ctx.pi / 2) < ctx.ldexp(1, -200)
    assert solution.verified


def test_two_independent_points(ctx):
    instance = DiophantineInstance(points=[1, ctx.sqrt(2)], thetas=[ctx.pi / 2, ctx.pi / 2], eps="0.05")
    solution = solve_orbit(instance, BITS)
    assert solution.verified
    assert all(r < ctx.mpf("0.05") for r in solution.residuals)
    assert abs(solution.omega) <= 10**4


def test_trivial_orbit_when_zero_works(ctx):
    instance = DiophantineInstance(points=[1, 2], thetas=[0, ctx.mpf("0.001")], eps="0.01")
    solution = solve_orbit(instance, BITS)
    assert solution.omega == 0
    assert solution.method == "trivial"


def test_subtorus_obstruction(ctx):
    instance = DiophantineInstance(points=["0.25", "0.75"], thetas=[ctx.pi / 2, ctx.pi / 2 + 1], eps="0.001")
    assert subtorus_witness(instance, BITS) is not None
    with pytest.raises(NotFound) as info:
        solve_orbit(instance, BITS)
    assert info.value.reason == "subtorus"
    assert info.value.exhaustive


def test_zero_point_with_nonzero_angle():
    instance = DiophantineInstance(points=[0, 1], thetas=[1, 0], eps="0.1")
    with pytest.raises(NotFound) as info:
        solve_orbit(instance, BITS)
    assert info.value.reason == "zero-point"
    assert info.value.witness == [0]


def test_instance_validation():
    with pytest.raises(ValidationError):
        DiophantineInstance(points=[1, 1], thetas=[0, 1], eps="0.1")
    with pytest.raises(ValidationError):
        DiophantineInstance(points=[1], thetas=[0, 1], eps="0.1")
    with pytest.raises(ValidationError):
        DiophantineInstance(points=[1], thetas=[0], eps=0)


def test_random_orbits_hit_every_window(ctx):
    points = [1, ctx.sqrt(2)]
    for trial in range(3):
        rng = generator(5, trial)
        thetas = list(rng.uniform(0, 6.28, 2))
        instance = DiophantineInstance(points=points, thetas=thetas, eps="0.05")
        solution = solve_orbit(instance, BITS)
        for x, t in zip(points, thetas):
            assert circle_distance(solution.omega * ctx.mpf(x), ctx.mpf(t), BITS) < ctx.mpf("0.05")


def test_fit_all_zero_targets(ctx):
    fit = fit_single_sine([1, 2, 3], [0, 0, 0], "0.01", bits=BITS)
    assert fit.c == 1
    assert fit.omega == 0
    assert fit.verified


def test_fit_two_targets(ctx):
    fit = fit_single_sine([1, ctx.sqrt(2)], ["0.5", "-0.3"], "0.05", bits=BITS)
    assert fit.verified
    params = SingleSineParams(c=fit.c, omega=fit.omega)
    assert abs(evaluate(params, 1, BITS) - ctx.mpf("0.5")) < ctx.mpf("0.05")


def test_fit_on_dependent_points_is_impossible():
    with pytest.raises(NotFound) as info:
        fit_single_sine(["0.2", "0.4"], ["0.9", "0.1"], "1e-4", bits=BITS)
    assert info.value.reason == "subtorus"


def test_fit_length_mismatch():
    with pytest.raises(LengthError):
        fit_single_sine([1, 2], [0], "0.1", bits=BITS)


def test_shatter_all_plus(ctx):
    points = [1, ctx.sqrt(2)]
    margin = ctx.mpf("0.1")
    params = shatter(ShatterInstance(points=points, pattern=["+", "+"], margin=margin), bits=BITS)
    assert all(evaluate(params, x, BITS) > margin for x in points)


def test_shatter_single_point(ctx):
    params = shatter(ShatterInstance(points=["0.5"], pattern=["+"], margin="0.2"), bits=BITS)
    assert evaluate(params, "0.5", BITS) > ctx.mpf("0.2")


def test_shatter_mixed_pattern(ctx):
    points = [ctx.sqrt(2) - 1, ctx.sqrt(3) - 1, ctx.sqrt(5) - 2]
    pattern = ["+", "-", "+"]
    params = shatter(ShatterInstance(points=points, pattern=pattern, margin="0.1"), bits=BITS)
    values = [evaluate(params, x, BITS) for x in points]
    assert values[0] > 0.1 and values[1] < -0.1 and values[2] > 0.1


def test_progression_forbids_plus_plus_plus_minus_plus(ctx):
    points = [ctx.mpf("0.1") + ctx.mpf("0.2") * k for k in range(5)]
    instance = ShatterInstance(points=points, pattern=list("+++-+"), margin="0.1")
    with pytest.raises(NotFound) as info:
        shatter(instance, bits=BITS)
    assert info.value.reason == "progression-sign"
    assert info.value.exhaustive


def test_progression_sign_conflict():
    assert progression_sign_conflict("+++-+") == (0, 2)
    assert progression_sign_conflict("+-+-+") is None
    assert progression_sign_conflict("++") is None


def test_three_term_identity(ctx):
    assert three_term_identity_residual(Wave(c=2, omega=1, h=0), "0.3", "0.5", BITS) < ctx.ldexp(1, -250)
    assert three_term_identity_residual(Wave(c=1, omega=10, h="1.2"), 0, "0.1", BITS) < ctx.ldexp(1, -240)
    assert three_term_identity_residual(SingleSineParams(c=1, omega=3), "0.2", "0.7", BITS) < ctx.ldexp(1, -240)


def test_three_term_identity_random_sweep(ctx):
    rng = generator(17)
    for _ in range(20):
        wave = Wave(c=rng.uniform(-2, 2), omega=rng.uniform(-20, 20), h=rng.uniform(0, 6))
        residual = three_term_identity_residual(wave, rng.uniform(0, 1), rng.uniform(0, 1), BITS)
        assert residual < ctx.ldexp(1, -240)


def test_close_vectors_match_brute_force():
    basis = [[3, 1], [1, 2]]
    target = [2, 3]
    radius_sq = 10
    brute = set()
    for a, b in itertools.product(range(-12, 13), repeat=2):
        v = (3 * a + b, a + 2 * b)
        if (v[0] - target[0]) ** 2 + (v[1] - target[1]) ** 2 <= radius_sq:
            brute.add(v)
    assert {tuple(v) for v in close_vectors(basis, target, radius_sq)} == brute
    assert len(close_vectors([[1, 0], [0, 1]], [0, 0], 1)) == 5


def test_lattice_search_agrees_with_grid_scan(ctx):
    eps = ctx.mpf("0.1")
    for trial in range(12):
        rng = generator(91, trial)
        n = 2 + trial % 2
        points = sorted(float(x) for x in rng.uniform(0.05, 1, n))
        thetas = [float(t) for t in rng.uniform(0, 2 * math.pi, n)]
        instance = DiophantineInstance(points=points, thetas=thetas, eps=eps, omega_max=3000)
        try:
            lattice = solve_orbit(instance, 128, scan=False).omega
        except NotFound:
            lattice = None
        scanned, covered = _grid_scan(instance, 3000, 128)
        assert covered
        if scanned is not None:
            assert lattice is not None, trial
            assert abs(lattice) <= abs(scanned) + 2 * eps / max(points)
        if lattice is not None:
            # the scan step can skip a thin intersection of windows, never the enumeration
            assert abs(lattice) <= 3000
            assert all(circle_distance(lattice * x, t, BITS) < eps for x, t in zip(points, thetas))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_shatter_every_pattern(ctx, k):
    points = [ctx.mpf("0.3"), ctx.mpf("0.3") * ctx.sqrt(2), ctx.mpf("0.3") * ctx.sqrt(3)][:k]
    margin = ctx.mpf("0.1")
    for pattern in itertools.product("+-", repeat=k):
        params = shatter(ShatterInstance(points=points, pattern=list(pattern), margin=margin), bits=BITS)
        for x, sign in zip(points, pattern):
            value = evaluate(params, x, BITS)
            assert (value > margin) if sign == "+" else (value < -margin), pattern
