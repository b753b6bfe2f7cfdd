"""Arbitrary-precision reals and complexes on top of mpmath.

A BigReal is an ``mpf`` owned by a per-precision mpmath context, so the
precision travels with the value (``precision_of``). Contexts are cached per
thread and their precision is never reassigned, which keeps values immutable
and safe to share between threads.
"""

import logging
import math
import threading
from fractions import Fraction
from typing import Annotated, Any

import mpmath
from mpmath.ctx_mp import MPContext
from pydantic import PlainSerializer, PlainValidator

from xprlab.config import config
from xprlab.core.errors import DomainError, PrecisionExhausted

logger = logging.getLogger(__name__)

_local = threading.local()


def context(bits: int | None = None) -> MPContext:
    """The mpmath context working at ``bits`` precision for this thread."""
    bits = int(bits or config.bits)
    if bits < 16:
        raise DomainError(f"precision of {bits} bits is too small")
    cache = getattr(_local, "contexts", None)
    if cache is None:
        cache = _local.contexts = {}
    ctx = cache.get(bits)
    if ctx is None:
        ctx = MPContext()
        ctx.prec = bits
        cache[bits] = ctx
    return ctx


def is_big(value: Any) -> bool:
    return hasattr(value, "_mpf_") or hasattr(value, "_mpc_")


def precision_of(value: Any) -> int:
    if not is_big(value):
        raise TypeError(f"{type(value).__name__} carries no precision")
    return value.context.prec


def common_bits(*values: Any, bits: int | None = None) -> int:
    """Explicit ``bits`` if given, else the highest precision among the values."""
    if bits:
        return int(bits)
    found = [precision_of(v) for v in values if is_big(v)]
    return max(found) if found else config.bits


def big(value: Any, bits: int | None = None):
    """Convert ``value`` to a BigReal at ``bits`` precision.

    Accepts ints, floats, Fractions, decimal strings (optionally annotated as
    ``"<decimal>@<bits>"``) and mpmath numbers of any precision.
    """
    if isinstance(value, str):
        return decode(value, bits)
    ctx = context(bits)
    if isinstance(value, Fraction):
        return ctx.mpf(value.numerator) / value.denominator
    if hasattr(value, "_mpc_"):
        if value.imag != 0:
            raise DomainError(f"expected a real number, got {value}")
        value = value.real
    return ctx.mpf(value)


def big_complex(value: Any, bits: int | None = None):
    """Convert ``value`` (number, ``{"re", "im"}`` mapping or pair) to a BigComplex."""
    ctx = context(bits)
    if isinstance(value, dict):
        return ctx.mpc(big(value.get("re", 0), bits), big(value.get("im", 0), bits))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return ctx.mpc(big(value[0], bits), big(value[1], bits))
    if isinstance(value, str):
        return ctx.mpc(decode(value, bits))
    if isinstance(value, complex) or hasattr(value, "_mpc_"):
        return ctx.mpc(value.real, value.imag)
    return ctx.mpc(big(value, bits))


def to_fraction(value: Any) -> Fraction:
    """Exact rational value of a BigReal."""
    man, exp = value.man_exp if value != 0 else (0, 0)
    if exp >= 0:
        return Fraction(man * 2**exp)
    return Fraction(man, 2**-exp)


def reduce_mod_2pi(x: Any, bits: int | None = None):
    """Representative of ``x`` modulo 2π in ``[0, 2π)``.

    π is evaluated at ``bits + max(0, ceil(log2|x|)) + 32`` bits so that huge
    arguments keep their low-order digits.
    """
    bits = common_bits(x, bits=bits)
    ctx = context(bits)
    if not ctx.isfinite(x):
        raise DomainError(f"cannot reduce non-finite value {x}")
    if x == 0:
        return ctx.zero
    guard = bits + max(0, int(ctx.mag(x))) + 32
    if guard > config.guard_ceiling_bits:
        raise PrecisionExhausted(guard, config.guard_ceiling_bits)
    hi = context(guard)
    two_pi = 2 * hi.pi
    r = hi.fmod(hi.mpf(x), two_pi)
    if r < 0:
        r += two_pi
    result = ctx.mpf(r)
    if result >= 2 * ctx.pi:
        return ctx.zero
    return result


def circle_distance(a: Any, b: Any = 0, bits: int | None = None):
    """Distance between ``a`` and ``b`` on the circle ℝ/2πℤ."""
    bits = common_bits(a, b, bits=bits)
    ctx = context(bits)
    d = reduce_mod_2pi(ctx.mpf(a) - ctx.mpf(b), bits)
    return min(d, 2 * ctx.pi - d)


def sin_big(x: Any, bits: int | None = None):
    bits = common_bits(x, bits=bits)
    return context(bits).sin(reduce_mod_2pi(x, bits))


def cos_big(x: Any, bits: int | None = None):
    bits = common_bits(x, bits=bits)
    return context(bits).cos(reduce_mod_2pi(x, bits))


def exp_big(z: Any, bits: int | None = None):
    """Complex exponential with the imaginary part reduced modulo 2π."""
    bits = common_bits(z, bits=bits)
    ctx = context(bits)
    z = ctx.mpc(z)
    modulus = ctx.exp(z.real)
    if z.imag == 0:
        return ctx.mpc(modulus)
    phase = reduce_mod_2pi(z.imag, bits)
    return ctx.mpc(modulus * ctx.cos(phase), modulus * ctx.sin(phase))


def log_big(z: Any, bits: int | None = None):
    """Principal complex logarithm."""
    bits = common_bits(z, bits=bits)
    ctx = context(bits)
    z = ctx.mpc(z)
    if z == 0:
        raise DomainError("logarithm of zero")
    return ctx.mpc(ctx.log(abs(z)), ctx.arg(z))


def arcsin_big(x: Any, bits: int | None = None, slop: Any = None):
    """arcsin with a hard domain check.

    Inputs whose magnitude exceeds 1 by at most ``slop`` are clamped to ±1;
    anything further out raises DomainError.
    """
    bits = common_bits(x, bits=bits)
    ctx = context(bits)
    x = ctx.mpf(x)
    if abs(x) > 1:
        if slop is not None and abs(x) - 1 <= slop:
            x = ctx.mpf(1) if x > 0 else ctx.mpf(-1)
        else:
            raise DomainError(f"arcsin argument {mpmath.nstr(x, 10)} outside [-1, 1]")
    return ctx.asin(x)


def tanh_big(x: Any, bits: int | None = None):
    bits = common_bits(x, bits=bits)
    return context(bits).tanh(x)


def default_tolerance(bits: int | None = None):
    """2^(-bits/2), the default certificate tolerance."""
    bits = int(bits or config.bits)
    return context(bits).ldexp(1, -(bits // 2))


def _digits(bits: int) -> int:
    return math.ceil(bits * math.log10(2)) + 1


def encode(x: Any) -> str:
    """``"<decimal>@<bits>"`` representation that decodes back to the same value."""
    bits = precision_of(x)
    return f"{mpmath.libmp.to_str(x._mpf_, _digits(bits))}@{bits}"


def decode(text: str, bits: int | None = None):
    """Parse ``"<decimal>@<bits>"`` or a bare decimal.

    An explicit ``bits`` argument wins over the annotation.
    """
    text = text.strip()
    if "@" in text:
        decimal, annotated = text.rsplit("@", 1)
        bits = bits or int(annotated)
    else:
        decimal = text
    try:
        return context(bits).mpf(decimal)
    except ValueError as e:
        raise DomainError(f"cannot parse {text!r} as a real number") from e


def encode_complex(z: Any) -> dict[str, str]:
    bits = precision_of(z)
    ctx = context(bits)
    return {"re": encode(ctx.mpf(z.real)), "im": encode(ctx.mpf(z.imag))}


def encode_number(value: Any) -> str | dict[str, str]:
    if hasattr(value, "_mpc_"):
        return encode_complex(value)
    return encode(value)


def _validate_real(value: Any):
    if isinstance(value, bool):
        raise ValueError("booleans are not numbers")
    return big(value, precision_of(value) if is_big(value) else None)


def _validate_complex(value: Any):
    return big_complex(value, precision_of(value) if is_big(value) else None)


def _validate_number(value: Any):
    if isinstance(value, dict) or isinstance(value, complex) or hasattr(value, "_mpc_"):
        return _validate_complex(value)
    return _validate_real(value)


BigReal = Annotated[
    Any,
    PlainValidator(_validate_real),
    PlainSerializer(encode, return_type=str),
]

BigComplex = Annotated[
    Any,
    PlainValidator(_validate_complex),
    PlainSerializer(encode_complex, return_type=dict),
]

# sample values may be real or complex
BigNumber = Annotated[
    Any,
    PlainValidator(_validate_number),
    PlainSerializer(encode_number),
]
