import math

import numpy as np
import pytest
from pydantic import ValidationError

from xprlab.bignum import context
from xprlab.certify import constraint_grid_size
from xprlab.core.errors import LengthError
from xprlab.families import evaluate, load_family
from xprlab.fitlab import (
    FamilyModel,
    FitInstance,
    FitVerdict,
    PolyExpModel,
    RestartOutcome,
    SingleSineModel,
    _verdict,
    fit_family,
    levenberg_marquardt,
    progression_fit_obstruction,
)

BITS = 128
EPS = "1e-3"


def outcome(index, residual):
    return RestartOutcome(index=index, params=[], max_residual=residual, seeded=False)


def assert_fits(report, instance):
    assert report.verdict == FitVerdict.achieved
    assert report.verified
    ctx = context(BITS)
    params = load_family(report.params)
    for x, y in zip(instance.xs, instance.ys):
        assert abs(evaluate(params, x, BITS) - ctx.mpf(y)) < ctx.mpf(EPS)


def test_instance_validation():
    with pytest.raises(ValidationError):
        FitInstance(family="H1", xs=[0.5, 1.5], ys=[0, 0], eps=EPS)
    with pytest.raises(ValidationError):
        FitInstance(family="H1", xs=[0.5], ys=[0, 0], eps=EPS)
    with pytest.raises(ValidationError):
        FitInstance(family="H1", xs=[0.5, 0.5], ys=[0, 1], eps=EPS)
    with pytest.raises(ValidationError):
        FitInstance(family="Hsigma", sigma="polynomial", xs=[0.5], ys=[0], eps=EPS)
    with pytest.raises(ValidationError):
        FitInstance(family="H3", degree=0, xs=[0.5], ys=[0], eps=EPS)
    with pytest.raises(ValidationError):
        FitInstance(family="H4", xs=[0.5], ys=[0], eps=EPS)


def test_verdicts():
    eps = context(BITS).mpf(EPS)
    assert _verdict([outcome(0, 1), outcome(1, eps / 2)], eps) == FitVerdict.achieved
    floor = [outcome(k, 0.1 + 0.01 * k) for k in range(6)]
    assert _verdict(floor, eps) == FitVerdict.floor_detected
    scattered = [outcome(k, 0.1 * 3**k) for k in range(6)]
    assert _verdict(scattered, eps) == FitVerdict.budget_exhausted
    assert _verdict(floor[:3], eps) == FitVerdict.budget_exhausted


def test_levenberg_marquardt_polishes_a_nearby_start():
    ctx = context(BITS)
    instance = FitInstance(family="H1", xs=[0.1, 0.4, 0.8], ys=[math.sin(0.3), math.sin(1.2), math.sin(2.4)], eps="1e-20")
    model = SingleSineModel(instance, BITS)
    p, worst = levenberg_marquardt(model, [ctx.mpf("1.1"), ctx.mpf("2.8")], 50, ctx.mpf("1e-20"))
    assert worst < ctx.mpf("1e-12")
    assert abs(p[1] - 3) < ctx.mpf("1e-10")


def test_single_sine_fit():
    instance = FitInstance(family="H1", xs=[0.2, math.sqrt(2) / 4], ys=[0.5, -0.2], eps=EPS, restarts=8)
    report = fit_family(instance, seed=1)
    assert_fits(report, instance)
    assert report.family == "H1"
    assert report.bits == BITS


def test_sigmoid_family_fit():
    instance = FitInstance(family="Hsigma", sigma="sigmoid", xs=[0.1, 0.5, 0.9], ys=[0.3, -0.6, 0.8], eps=EPS, restarts=8)
    assert_fits(fit_family(instance, seed=2), instance)


def test_sine_of_sine_fit():
    instance = FitInstance(family="H5", xs=[0.15, 0.55, 0.95], ys=[-0.4, 0.7, 0.1], eps=EPS, restarts=8)
    assert_fits(fit_family(instance, seed=3), instance)


def test_fit_is_reproducible():
    instance = FitInstance(family="H2", n_waves=2, xs=[0.1, 0.3, 0.6], ys=[0.2, 0.9, -0.5], eps=EPS, restarts=4)
    first, second = fit_family(instance, seed=7), fit_family(instance, seed=7)
    assert first.params == second.params
    assert first.restarts_used == second.restarts_used


def test_squared_sigma_on_a_grid_is_not_fitted():
    xs = [k / 8 for k in range(9)]
    ys = [0.9, -0.7, 0.2, 0.8, -0.9, 0.1, -0.4, 0.6, -0.3]
    instance = FitInstance(family="Hsigma", sigma="polynomial", coeffs=[0, 0, 1], xs=xs, ys=ys, eps=EPS, restarts=6)
    report = fit_family(instance, seed=4)
    assert report.verdict != FitVerdict.achieved
    assert not report.verified
    assert report.max_residual > 1e-2


def test_progression_obstruction():
    half = 0.5
    targets = [half, half, half, -half, half]
    report = progression_fit_obstruction(1, 0.1, 0.2, targets, EPS, seed=0)
    assert not report.certificate.passed
    assert report.fit.verdict == FitVerdict.floor_detected
    assert report.certificate.metadata["H3_grid_size"] == 14
    with pytest.raises(LengthError):
        progression_fit_obstruction(1, 0.1, 0.2, targets[:4], EPS)


def test_family_model_is_abstract():
    instance = FitInstance(family="H1", xs=[0.5], ys=[0], eps=EPS)
    with pytest.raises(TypeError):
        FamilyModel(instance, BITS)


def test_poly_exp_model_matches_evaluation():
    ctx = context(BITS)
    instance = FitInstance(family="H3", n_waves=2, degree=2, xs=[0.3, 0.7], ys=[0, 0], eps=EPS)
    model = PolyExpModel(instance, BITS)
    p = [ctx.mpf(v) for v in ("0.25", "-0.5", "1.5", "-2", "0.75", "-1", "0.5")]
    params = model.params(p)
    assert params.family == "H3"
    assert (params.n, params.r, params.d) == (2, 1, 2)
    for x in model.xs:
        value, gradient = model.value_and_gradient(p, x)
        assert abs(value - evaluate(params, x, BITS)) < ctx.mpf("1e-30")
        assert len(gradient) == len(p)
        h = ctx.mpf("1e-20")
        shifted = [v + h if k == 2 else v for k, v in enumerate(p)]
        numeric = (model.value_and_gradient(shifted, x)[0] - value) / h
        assert abs(numeric - gradient[2]) < ctx.mpf("1e-15")


REALIZABLE = [
    ({"family": "H1"}, {"c": 0.8, "omega": 2.5}, 3),
    ({"family": "H2", "n_waves": 1}, {"waves": [{"c": 0.6, "omega": 4, "h": 0.3}]}, 5),
    (
        {"family": "H3", "n_waves": 1, "degree": 2},
        {"polys": [[0, 1.5, -2]], "numerator": [{"coef": 0.2}, {"coef": -0.7, "powers": [0, 1]}]},
        6,
    ),
    ({"family": "Hsigma", "sigma": "sigmoid"}, {"sigma": "sigmoid", "c": 0.7, "omega": 3, "b": 0.5, "h": 0.2}, 6),
    ({"family": "H5"}, {"c": 0.6, "h": 0.1, "inner": {"waves": [{"c": 1, "omega": 2}]}}, 6),
]


@pytest.mark.parametrize("shape,params,k", REALIZABLE, ids=[case[0]["family"] for case in REALIZABLE])
def test_in_family_data_is_recovered(shape, params, k):
    member = load_family({"family": shape["family"], "params": params})
    xs = [float(x) for x in np.linspace(0.05, 0.95, k)]
    ys = [evaluate(member, x, BITS) for x in xs]
    instance = FitInstance(**shape, xs=xs, ys=ys, eps="1e-6")
    report = fit_family(instance, seed=0)
    assert report.verdict == FitVerdict.achieved
    assert report.verified
    assert report.max_residual < 1e-6
    assert report.restarts_used <= 64


def test_two_wave_progression_obstruction():
    targets = [float(t) for t in np.random.default_rng(11).uniform(-1, 1, 9)]
    report = progression_fit_obstruction(2, 0.05, 0.1, targets, EPS, seed=0)
    assert report.certificate.metadata["H3_grid_size"] == constraint_grid_size(4, 1, 1, 1)
    assert not report.certificate.passed
    assert report.fit.verdict == FitVerdict.floor_detected
    assert not report.fit.verified
