"""Parametric families and their evaluation on uniform grids.

Every family record is an immutable pydantic model. On disk a member is the
document ``{"family": "H1|H2|H3|Hsigma|H5", "params": {...}}``.
"""

import csv
import json
import logging
from functools import singledispatch
from pathlib import Path
from typing import Any, Callable, ClassVar, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from xprlab.bignum import (
    BigComplex,
    BigNumber,
    BigReal,
    big,
    common_bits,
    context,
    encode_number,
    exp_big,
    sin_big,
)
from xprlab.config import config
from xprlab.core.errors import (
    DomainError,
    EvaluationZeroDivision,
    LengthError,
    SampleError,
    XprlabError,
)

logger = logging.getLogger(__name__)

SIGMAS = ("sigmoid", "tanh", "gaussian", "sin", "polynomial")
SigmaId = Literal["sigmoid", "tanh", "gaussian", "sin", "polynomial"]


class FamilyParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: ClassVar[str]


class Wave(BaseModel):
    model_config = ConfigDict(frozen=True)

    c: BigReal
    omega: BigReal
    h: BigReal = Field(default_factory=lambda: big(0))


class SingleSineParams(FamilyParams):
    """H1: ``c sin(omega x)``."""

    family: ClassVar[str] = "H1"

    c: BigReal
    omega: BigReal


class SineSumParams(FamilyParams):
    """H2_N: ``sum_n c_n sin(omega_n x + h_n)``."""

    family: ClassVar[str] = "H2"

    waves: list[Wave]

    @field_validator("waves")
    @classmethod
    def _at_least_one_wave(cls, waves: list[Wave]) -> list[Wave]:
        if not waves:
            raise ValueError("a sine sum needs at least one wave")
        return waves

    @property
    def n(self) -> int:
        return len(self.waves)


class Monomial(BaseModel):
    """``coef * x^powers[0] * z_1^powers[1] * ... * z_N^powers[N]``."""

    model_config = ConfigDict(frozen=True)

    coef: BigComplex
    powers: list[int] = Field(default_factory=list)

    @field_validator("powers")
    @classmethod
    def _non_negative(cls, powers: list[int]) -> list[int]:
        if any(p < 0 for p in powers):
            raise ValueError("monomial powers must be non-negative")
        return powers

    @property
    def degree(self) -> int:
        return sum(self.powers)


class PolyExpAlgParams(FamilyParams):
    """H3 restricted to a rational Q.

    ``polys[n]`` lists the complex coefficients of P_n in ascending order; Q
    is ``sum(numerator) / sum(denominator)`` over the variables
    ``(x, e^{P_1(x)}, ..., e^{P_N(x)})``.
    """

    family: ClassVar[str] = "H3"

    polys: list[list[BigComplex]]
    numerator: list[Monomial]
    denominator: list[Monomial] = Field(
        default_factory=lambda: [Monomial(coef=1, powers=[])]
    )

    @model_validator(mode="after")
    def _check_shapes(self) -> "PolyExpAlgParams":
        if not self.polys:
            raise ValueError("H3 needs at least one exponent polynomial")
        if not self.denominator:
            raise ValueError("the denominator of Q cannot be empty")
        for monomial in (*self.numerator, *self.denominator):
            if len(monomial.powers) > len(self.polys) + 1:
                raise ValueError(
                    f"monomial has {len(monomial.powers)} powers for {len(self.polys) + 1} variables"
                )
        return self

    @property
    def n(self) -> int:
        return len(self.polys)

    @property
    def q(self) -> int:
        return 1

    @property
    def r(self) -> int:
        return max(m.degree for m in (*self.numerator, *self.denominator))

    @property
    def d(self) -> int:
        return max(len(p) - 1 for p in self.polys)


class SigmaSineParams(FamilyParams):
    """H^sigma: ``c sin(omega sigma(b x) + h)`` with ``b`` in [-1, 1]."""

    family: ClassVar[str] = "Hsigma"

    sigma: SigmaId
    coeffs: list[BigReal] = Field(default_factory=list)
    c: BigReal
    omega: BigReal
    b: BigReal
    h: BigReal

    @model_validator(mode="after")
    def _check_sigma(self) -> "SigmaSineParams":
        if self.sigma == "polynomial" and not self.coeffs:
            raise ValueError("a polynomial sigma needs coefficients")
        return self


class SineOfSineParams(FamilyParams):
    """H5_N: ``c sin(g(x)) + h`` with ``g`` in H2_N."""

    family: ClassVar[str] = "H5"

    c: BigReal
    h: BigReal
    inner: SineSumParams


FAMILIES: dict[str, type[FamilyParams]] = {
    cls.family: cls
    for cls in (
        SingleSineParams,
        SineSumParams,
        PolyExpAlgParams,
        SigmaSineParams,
        SineOfSineParams,
    )
}


def load_family(document: dict[str, Any]) -> FamilyParams:
    """Parse a ``{"family", "params"}`` document."""
    try:
        cls = FAMILIES[document["family"]]
    except KeyError as e:
        raise DomainError(f"unknown family document {document!r}") from e
    return cls.model_validate(document.get("params", {}))


def dump_family(params: FamilyParams) -> dict[str, Any]:
    return {"family": params.family, "params": params.model_dump(mode="json")}


# -- sigma menu ---------------------------------------------------------------


def sigma_function(sigma: str, t: Any, coeffs: list | None = None, bits: int | None = None):
    ctx = context(common_bits(t, bits=bits))
    t = ctx.mpf(t)
    if sigma == "sigmoid":
        return 1 / (1 + ctx.exp(-t))
    if sigma == "tanh":
        return ctx.tanh(t)
    if sigma == "gaussian":
        return ctx.exp(-t * t)
    if sigma == "sin":
        return ctx.sin(t)
    if sigma == "polynomial":
        return ctx.polyval([ctx.mpf(c) for c in reversed(coeffs or [])], t)
    raise DomainError(f"unknown sigma {sigma!r}")


def sigma_derivative(sigma: str, t: Any, coeffs: list | None = None, bits: int | None = None):
    ctx = context(common_bits(t, bits=bits))
    t = ctx.mpf(t)
    if sigma == "sigmoid":
        s = 1 / (1 + ctx.exp(-t))
        return s * (1 - s)
    if sigma == "tanh":
        return 1 - ctx.tanh(t) ** 2
    if sigma == "gaussian":
        return -2 * t * ctx.exp(-t * t)
    if sigma == "sin":
        return ctx.cos(t)
    if sigma == "polynomial":
        derived = [k * ctx.mpf(c) for k, c in enumerate(coeffs or [])][1:]
        return ctx.polyval(list(reversed(derived)), t) if derived else ctx.zero
    raise DomainError(f"unknown sigma {sigma!r}")


# r and sigma^(r)(0)/r! for the fixed menu
_SIGMA_TAYLOR = {
    "sigmoid": (1, (1, 4)),
    "tanh": (1, (1, 1)),
    "sin": (1, (1, 1)),
    "gaussian": (2, (-1, 1)),
}


def sigma_order(sigma: str, coeffs: list | None = None) -> int:
    """Least ``m > 0`` with a nonzero m-th derivative of sigma at 0."""
    return _sigma_taylor(sigma, coeffs)[0]


def sigma_taylor_coefficient(sigma: str, coeffs: list | None = None, bits: int | None = None):
    """``sigma^(r)(0) / r!`` for ``r = sigma_order(sigma)``."""
    _, (num, den) = _sigma_taylor(sigma, coeffs, bits)
    return context(bits).mpf(num) / den


def _sigma_taylor(sigma: str, coeffs: list | None = None, bits: int | None = None):
    if sigma in _SIGMA_TAYLOR:
        return _SIGMA_TAYLOR[sigma]
    if sigma == "polynomial":
        for k, c in enumerate(coeffs or []):
            if k > 0 and big(c, bits) != 0:
                return k, (big(c, bits), 1)
        raise DomainError("sigma is constant")
    raise DomainError(f"unknown sigma {sigma!r}")


# -- evaluation ---------------------------------------------------------------


def evaluate(params: FamilyParams, x: Any, bits: int | None = None, restricted: bool = False):
    """Value of the family member at ``x``.

    With ``restricted`` the point must lie in [0, 1].
    """
    bits = bits or config.bits
    x = big(x, bits)
    if restricted and not 0 <= x <= 1:
        raise DomainError(f"x = {x} outside [0, 1]")
    return _evaluate(params, x, bits)


@singledispatch
def _evaluate(params: FamilyParams, x: Any, bits: int):
    raise DomainError(f"cannot evaluate {type(params).__name__}")


@_evaluate.register
def _(params: SingleSineParams, x: Any, bits: int):
    ctx = context(bits)
    return ctx.mpf(params.c) * sin_big(ctx.mpf(params.omega) * x, bits)


def wave_value(wave: Wave, x: Any, bits: int):
    ctx = context(bits)
    return ctx.mpf(wave.c) * sin_big(ctx.mpf(wave.omega) * x + ctx.mpf(wave.h), bits)


@_evaluate.register
def _(params: SineSumParams, x: Any, bits: int):
    ctx = context(bits)
    return ctx.fsum(wave_value(w, x, bits) for w in params.waves)


def _monomial_value(monomial: Monomial, variables: list, bits: int):
    ctx = context(bits)
    value = ctx.mpc(monomial.coef)
    for var, power in zip(variables, monomial.powers):
        if power:
            value *= var**power
    return value


@_evaluate.register
def _(params: PolyExpAlgParams, x: Any, bits: int):
    ctx = context(bits)
    exponents = [ctx.polyval([ctx.mpc(c) for c in reversed(p)], x) for p in params.polys]
    variables = [ctx.mpc(x), *(exp_big(e, bits) for e in exponents)]
    den_terms = [_monomial_value(m, variables, bits) for m in params.denominator]
    den = ctx.fsum(den_terms)
    scale = max((abs(t) for t in den_terms), default=ctx.zero)
    if den == 0 or abs(den) <= scale * ctx.ldexp(1, 16 - bits):
        raise EvaluationZeroDivision(f"denominator of Q vanishes at x = {x}")
    value = ctx.fsum(_monomial_value(m, variables, bits) for m in params.numerator) / den
    if abs(value.imag) > ctx.ldexp(1, -64) * max(1, abs(value.real)):
        raise DomainError(f"H3 member is not real at x = {x}: imaginary part {value.imag}")
    return ctx.mpf(value.real)


@_evaluate.register
def _(params: SigmaSineParams, x: Any, bits: int):
    ctx = context(bits)
    b = ctx.mpf(params.b)
    if not -1 <= b <= 1:
        raise DomainError(f"b = {b} outside [-1, 1]")
    s = sigma_function(params.sigma, b * x, params.coeffs, bits)
    return ctx.mpf(params.c) * sin_big(ctx.mpf(params.omega) * s + ctx.mpf(params.h), bits)


@_evaluate.register
def _(params: SineOfSineParams, x: Any, bits: int):
    ctx = context(bits)
    g = _evaluate(params.inner, x, bits)
    return ctx.mpf(params.c) * sin_big(g, bits) + ctx.mpf(params.h)


def sampler(params: FamilyParams, bits: int | None = None) -> Callable[[Any], Any]:
    """One-argument evaluator, the form certificates and sup norms consume."""
    bits = bits or config.bits
    return lambda x: evaluate(params, x, bits)


def sine_sum_to_poly_exp_alg(params: SineSumParams) -> PolyExpAlgParams:
    """The same function as a member of H3_{2N,1,1,1}.

    ``c sin(t) = (-ic/2) e^{it} + (ic/2) e^{-it}`` with ``t = omega x + h``.
    """
    polys, numerator = [], []
    n_vars = 2 * params.n + 1
    for n, wave in enumerate(params.waves):
        ctx = context(common_bits(wave.c, wave.omega, wave.h))
        i = ctx.mpc(0, 1)
        polys.append([i * wave.h, i * wave.omega])
        polys.append([-i * wave.h, -i * wave.omega])
        for offset, coef in ((1, -i * wave.c / 2), (2, i * wave.c / 2)):
            powers = [0] * n_vars
            powers[2 * n + offset] = 1
            numerator.append(Monomial(coef=coef, powers=powers))
    return PolyExpAlgParams(polys=polys, numerator=numerator)


# -- grids --------------------------------------------------------------------


class SampleGrid(BaseModel):
    """Samples ``values[k] = g(a + k h)`` for ``k = 0..m``."""

    model_config = ConfigDict(frozen=True)

    a: BigReal
    h: BigReal
    m: int
    values: list[BigNumber]
    restricted: bool = False

    @model_validator(mode="after")
    def _check_grid(self) -> "SampleGrid":
        if self.m < 0:
            raise ValueError("m must be non-negative")
        if len(self.values) != self.m + 1:
            raise ValueError(f"expected {self.m + 1} values, got {len(self.values)}")
        if self.m > 0 and not self.h > 0:
            raise ValueError("grid step must be positive")
        if self.restricted and not (0 <= self.a and self.a + self.m * self.h <= 1):
            raise ValueError("domain-restricted grid leaves [0, 1]")
        return self

    def points(self) -> list:
        return [self.a + k * self.h for k in range(self.m + 1)]

    @property
    def is_complex(self) -> bool:
        return any(hasattr(v, "_mpc_") for v in self.values)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            if self.is_complex:
                writer.writerow(["index", "x", "value_re", "value_im"])
            else:
                writer.writerow(["index", "x", "value"])
            for k, (x, v) in enumerate(zip(self.points(), self.values)):
                value = encode_number(v)
                row = [value["re"], value["im"]] if isinstance(value, dict) else [value]
                writer.writerow([k, encode_number(x), *row])

    @classmethod
    def from_csv(cls, path: str | Path, bits: int | None = None) -> "SampleGrid":
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        if not rows:
            raise LengthError(f"{path} holds no samples")
        rows.sort(key=lambda row: int(row["index"]))
        xs = [big(row["x"], bits) for row in rows]
        if "value" in rows[0]:
            values = [big(row["value"], bits) for row in rows]
        else:
            ctx = context(bits)
            values = [
                ctx.mpc(big(row["value_re"], bits), big(row["value_im"], bits))
                for row in rows
            ]
        h = (xs[-1] - xs[0]) / (len(xs) - 1) if len(xs) > 1 else big(0, bits)
        return cls(a=xs[0], h=h, m=len(xs) - 1, values=values)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2)


def sample(
    params: FamilyParams,
    a: Any,
    h: Any,
    m: int,
    bits: int | None = None,
    restricted: bool = False,
) -> SampleGrid:
    """Evaluate the family on ``a, a+h, ..., a+mh``."""
    bits = bits or config.bits
    if m < 1:
        raise LengthError("a sample grid needs m >= 1")
    a, h = big(a, bits), big(h, bits)
    values = []
    for k in range(m + 1):
        try:
            values.append(evaluate(params, a + k * h, bits, restricted=restricted))
        except (XprlabError, ZeroDivisionError) as e:
            raise SampleError(k, e) from e
    return SampleGrid(a=a, h=h, m=m, values=values, restricted=restricted)
