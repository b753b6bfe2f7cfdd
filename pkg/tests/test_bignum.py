from fractions import Fraction

import pytest

from xprlab.bignum import (
    arcsin_big,
    big,
    big_complex,
    circle_distance,
    context,
    decode,
    default_tolerance,
    encode,
    encode_complex,
    exp_big,
    log_big,
    precision_of,
    reduce_mod_2pi,
    sin_big,
    to_fraction,
)
from xprlab.core.errors import DomainError, PrecisionExhausted

BITS = 256


@pytest.fixture
def ctx():
    return context(BITS)


def test_context_is_cached_per_precision():
    assert context(128) is context(128)
    assert context(128) is not context(256)
    assert context(128).prec == 128


def test_context_rejects_tiny_precision():
    with pytest.raises(DomainError):
        context(8)


def test_precision_travels_with_value():
    assert precision_of(big("0.1", 96)) == 96
    with pytest.raises(TypeError):
        precision_of(0.5)


def test_reduce_two_pi_is_zero(ctx):
    assert abs(reduce_mod_2pi(2 * ctx.pi, BITS)) < ctx.ldexp(1, -250)


def test_reduce_pi_is_identity(ctx):
    assert abs(reduce_mod_2pi(ctx.pi, BITS) - ctx.pi) < ctx.ldexp(1, -250)


def test_reduce_huge_argument_matches_high_precision_oracle(ctx):
    x = ctx.mpf(10) ** 40 * ctx.sqrt(2)
    hi = context(1024)
    oracle = hi.fmod(hi.mpf(x), 2 * hi.pi)
    assert abs(reduce_mod_2pi(x, BITS) - oracle) < ctx.ldexp(1, -200)


def test_reduce_negative_lands_in_range(ctx):
    r = reduce_mod_2pi(ctx.mpf(-1), BITS)
    assert 0 <= r < 2 * ctx.pi
    assert abs(r - (2 * ctx.pi - 1)) < ctx.ldexp(1, -250)


def test_reduce_rejects_non_finite(ctx):
    with pytest.raises(DomainError):
        reduce_mod_2pi(ctx.inf, BITS)


def test_reduce_refuses_beyond_guard_ceiling(ctx):
    with pytest.raises(PrecisionExhausted) as info:
        reduce_mod_2pi(ctx.ldexp(1, 70_000), BITS)
    assert info.value.required_bits > info.value.ceiling_bits


def test_circle_distance_wraps(ctx):
    d = circle_distance(ctx.mpf("0.1"), 2 * ctx.pi - ctx.mpf("0.1"), BITS)
    assert abs(d - ctx.mpf("0.2")) < ctx.ldexp(1, -240)


def test_elementary_values(ctx):
    assert sin_big(ctx.zero, BITS) == 0
    assert abs(sin_big(ctx.pi / 2, BITS) - 1) < ctx.ldexp(1, -250)
    assert abs(exp_big(ctx.mpc(0, ctx.pi), BITS) + 1) < default_tolerance(BITS)


def test_log_of_zero_is_a_domain_error(ctx):
    with pytest.raises(DomainError):
        log_big(ctx.zero, BITS)


def test_log_inverts_exp(ctx):
    z = ctx.mpc("0.3", "-1.2")
    assert abs(log_big(exp_big(z, BITS), BITS) - z) < ctx.ldexp(1, -240)


def test_arcsin_domain(ctx):
    with pytest.raises(DomainError):
        arcsin_big(ctx.mpf("1.5"), BITS)
    nudged = 1 + ctx.ldexp(1, -200)
    assert abs(arcsin_big(nudged, BITS, slop=ctx.ldexp(1, -100)) - ctx.pi / 2) < ctx.ldexp(1, -250)


def test_encode_decode_keeps_value_and_precision():
    x = big(1, 200) / 3
    text = encode(x)
    assert text.endswith("@200")
    y = decode(text)
    assert precision_of(y) == 200
    assert y == x


def test_decode_rejects_garbage():
    with pytest.raises(DomainError):
        decode("one half")


def test_big_accepts_fractions_and_rejects_complex():
    assert big(Fraction(1, 4), BITS) == context(BITS).mpf("0.25")
    with pytest.raises(DomainError):
        big(context(BITS).mpc(1, 1), BITS)


def test_big_complex_forms():
    ctx = context(BITS)
    assert big_complex({"re": "1", "im": "-2"}, BITS) == ctx.mpc(1, -2)
    assert big_complex([3, 4], BITS) == ctx.mpc(3, 4)
    assert encode_complex(ctx.mpc(1, 2))["im"].endswith(f"@{BITS}")


def test_to_fraction_is_exact():
    assert to_fraction(big("0.375", 64)) == Fraction(3, 8)
    assert to_fraction(big(0, 64)) == 0
