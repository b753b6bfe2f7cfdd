"""Constructive limit points of sine families.

Resonant targets ``x^m sin(omega x + h)`` and odd-degree polynomials arise as
uniform limits of sine sums whose frequencies coalesce. This module builds
those sums explicitly, measures the convergence, recovers resonant
coefficients from integer-step samples and follows the limit paths of
``c sin(omega sigma(b x) + h)``.
"""

import logging
import math
import warnings
from typing import Any, Callable, Literal, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from xprlab.bignum import BigComplex, BigReal, big, context, encode
from xprlab.certify import Certificate, CertificateKind
from xprlab.config import config
from xprlab.core.errors import (
    DomainError,
    IllConditionedError,
    LengthError,
    PrecisionWarning,
    RankError,
)
from xprlab.families import (
    SampleGrid,
    SigmaSineParams,
    SineSumParams,
    Wave,
    sigma_function,
    sigma_order,
    sigma_taylor_coefficient,
    wave_value,
)

logger = logging.getLogger(__name__)


class ResonantTerm(BaseModel):
    """``sum_m amplitudes[m] x^m sin(omega x + phases[m])``; multiplicity ``len(amplitudes)``."""

    model_config = ConfigDict(frozen=True)

    omega: BigReal
    amplitudes: list[BigReal]
    phases: list[BigReal]

    @model_validator(mode="after")
    def _check_term(self) -> "ResonantTerm":
        if not self.amplitudes:
            raise ValueError("a resonant term needs multiplicity at least 1")
        if len(self.amplitudes) != len(self.phases):
            raise ValueError("amplitudes and phases differ in length")
        return self

    @property
    def multiplicity(self) -> int:
        return len(self.amplitudes)


class ResonantTarget(BaseModel):
    """Polynomial part of degree ``2 M0 - 1`` plus resonant terms."""

    model_config = ConfigDict(frozen=True)

    poly: list[BigReal] = Field(default_factory=list)
    terms: list[ResonantTerm] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_target(self) -> "ResonantTarget":
        if len(self.poly) % 2:
            raise ValueError("the polynomial part needs 2*M0 coefficients")
        return self

    @property
    def m0(self) -> int:
        return len(self.poly) // 2

    @property
    def n_waves(self) -> int:
        return self.m0 + sum(t.multiplicity for t in self.terms)


class RootSpec(BaseModel):
    """A root on the unit circle; ``z = ±1`` carries degree ``2 * multiplicity``."""

    model_config = ConfigDict(frozen=True)

    z: BigComplex
    multiplicity: int = 1

    @model_validator(mode="after")
    def _check_root(self) -> "RootSpec":
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be at least 1")
        return self


class RecoveryInstance(BaseModel):
    model_config = ConfigDict(frozen=True)

    samples: SampleGrid
    roots: list[RootSpec]

    @property
    def n(self) -> int:
        return sum(r.multiplicity for r in self.roots)

    @model_validator(mode="after")
    def _check_length(self) -> "RecoveryInstance":
        if self.samples.m + 1 < 2 * self.n:
            raise ValueError(
                f"{self.samples.m + 1} samples cannot determine {2 * self.n} coefficients"
            )
        return self


class RecoveredCoefficient(BaseModel):
    model_config = ConfigDict(frozen=True)

    root: BigComplex
    degree: int
    value: BigComplex


class RecoveryReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    coefficients: list[RecoveredCoefficient]
    residual: BigReal


# -- resonance and polynomial combinations -------------------------------------


def resonance_combo(omega: Any, h: Any, m: int, dw: Any, bits: int | None = None) -> SineSumParams:
    """``m + 1`` waves converging to ``x^m sin(omega x + h)`` as ``dw -> 0``.

    This is the m-th finite difference in frequency of
    ``sin(omega x + h - m π/2)`` divided by ``dw^m``.
    """
    bits = bits or config.bits
    ctx = context(bits)
    omega, h, dw = big(omega, bits), big(h, bits), big(dw, bits)
    if not dw > 0:
        raise DomainError("frequency step must be positive")
    if m < 0:
        raise DomainError("degree must be non-negative")
    scale = dw ** (-m)
    if scale > ctx.ldexp(1, bits // 2):
        warnings.warn(
            f"dw^-m = {ctx.nstr(scale, 5)} exceeds the precision budget of 2^{bits // 2}",
            PrecisionWarning,
            stacklevel=2,
        )
    phase = h - ctx.pi * m / 2
    return SineSumParams(
        waves=[
            Wave(c=scale * (-1) ** (m - n) * math.comb(m, n), omega=omega + n * dw, h=phase)
            for n in range(m + 1)
        ]
    )


def combine_waves(waves: Sequence[Wave], bits: int | None = None) -> list[Wave]:
    """Merge waves of equal frequency: ``sum A_j sin(nu x + phi_j) = |S| sin(nu x + arg S)``."""
    bits = bits or config.bits
    ctx = context(bits)
    grouped: dict[Any, Any] = {}
    for wave in waves:
        omega = ctx.mpf(wave.omega)
        term = ctx.mpf(wave.c) * ctx.expj(ctx.mpf(wave.h))
        grouped[omega] = grouped.get(omega, ctx.mpc(0)) + term
    return [Wave(c=abs(s), omega=omega, h=ctx.arg(s) if s != 0 else ctx.zero) for omega, s in grouped.items()]


def polynomial_combo(m0: int, coeffs: Sequence[Any], dw: Any, bits: int | None = None) -> SineSumParams:
    """``m0`` waves converging to the polynomial ``sum coeffs[i] x^i`` (degree < 2 m0).

    The target is written in the basis of shifted powers ``(x - x_j)^(2 m0 - 1)``
    with ``x_j = j / (2 m0 - 1)``; each power is approximated by
    ``sin^(2 m0 - 1)(dw (x - x_j)) / dw^(2 m0 - 1)`` whose expansion has
    frequencies ``(2k + 1) dw``, ``k < m0``.
    """
    bits = bits or config.bits
    if m0 < 1:
        raise DomainError("M0 must be at least 1")
    n = 2 * m0 - 1
    if len(coeffs) > n + 1:
        raise LengthError(f"M0 = {m0} covers degree {n}, got {len(coeffs)} coefficients")
    work = bits + 32
    ctx = context(work)
    dw = big(dw, work)
    if not dw > 0:
        raise DomainError("frequency step must be positive")
    target = [ctx.mpf(big(c, bits)) for c in coeffs] + [ctx.zero] * (n + 1 - len(coeffs))
    shifts = [ctx.mpf(j) / n if n else ctx.zero for j in range(n + 1)]
    matrix = ctx.matrix(
        [[math.comb(n, i) * (-s) ** (n - i) for s in shifts] for i in range(n + 1)]
    )
    condition = ctx.mnorm(matrix, 1) * ctx.mnorm(ctx.inverse(matrix), 1)
    ceiling = ctx.ldexp(1, bits // 4)
    if condition > ceiling:
        raise IllConditionedError(condition, ceiling)
    weights, _ = ctx.qr_solve(matrix, ctx.matrix(target))

    half = m0 - 1
    base = dw ** (-n) / ctx.mpf(4) ** half
    waves = []
    for j, shift in enumerate(shifts):
        for k in range(m0):
            amplitude = weights[j] * base * (-1) ** k * math.comb(n, half - k)
            frequency = (2 * k + 1) * dw
            waves.append(Wave(c=amplitude, omega=frequency, h=-frequency * shift))
    merged = combine_waves(waves, work)
    out = context(bits)
    return SineSumParams(
        waves=[Wave(c=out.mpf(w.c), omega=out.mpf(w.omega), h=out.mpf(w.h)) for w in merged]
    )


def realize_resonant_target(target: ResonantTarget, dw: Any, bits: int | None = None) -> SineSumParams:
    """Sine sum with exactly ``target.n_waves`` waves approximating the target."""
    bits = bits or config.bits
    waves: list[Wave] = []
    for term in target.terms:
        group: list[Wave] = []
        for m, (amplitude, phase) in enumerate(zip(term.amplitudes, term.phases)):
            combo = resonance_combo(term.omega, phase, m, dw, bits)
            group.extend(Wave(c=w.c * amplitude, omega=w.omega, h=w.h) for w in combo.waves)
        waves.extend(combine_waves(group, bits))
    if target.m0:
        waves.extend(polynomial_combo(target.m0, target.poly, dw, bits).waves)
    if not waves:
        raise DomainError("empty resonant target")
    return SineSumParams(waves=waves)


def evaluate_resonant_target(target: ResonantTarget, x: Any, bits: int | None = None):
    bits = bits or config.bits
    ctx = context(bits)
    x = big(x, bits)
    total = ctx.polyval([ctx.mpf(c) for c in reversed(target.poly)], x) if target.poly else ctx.zero
    for term in target.terms:
        for m, (amplitude, phase) in enumerate(zip(term.amplitudes, term.phases)):
            total += ctx.mpf(amplitude) * x**m * ctx.sin(ctx.mpf(term.omega) * x + ctx.mpf(phase))
    return total


# -- uniform error ------------------------------------------------------------


def sup_distance(
    f: Callable[[Any], Any],
    g: Callable[[Any], Any],
    n_points: int | None = None,
    a: Any = 0,
    b: Any = 1,
    bits: int | None = None,
):
    """Max of ``|f - g|`` over ``n_points`` equispaced points of [a, b].

    A lower bound on the uniform distance.
    """
    bits = bits or config.bits
    n_points = n_points or config.sup_points
    if n_points < 2:
        raise DomainError("need at least two points")
    ctx = context(bits)
    a, b = big(a, bits), big(b, bits)
    step = (b - a) / (n_points - 1)
    return max(abs(f(a + k * step) - g(a + k * step)) for k in range(n_points))


def sine_sum_sampler(params: SineSumParams, bits: int | None = None) -> Callable[[Any], Any]:
    bits = bits or config.bits
    ctx = context(bits)
    return lambda x: ctx.fsum(wave_value(w, x, bits) for w in params.waves)


def convergence_sweep(
    omega: Any,
    h: Any,
    m: int,
    dws: Sequence[Any],
    n_points: int | None = None,
    bits: int | None = None,
) -> list[tuple[Any, Any]]:
    """``(dw, sup error)`` pairs for ``resonance_combo`` against ``x^m sin(omega x + h)``."""
    bits = bits or config.bits
    ctx = context(bits)
    omega, h = big(omega, bits), big(h, bits)

    def target(x: Any):
        return x**m * ctx.sin(omega * x + h)

    series = []
    for dw in dws:
        combo = resonance_combo(omega, h, m, dw, bits)
        error = sup_distance(sine_sum_sampler(combo, bits), target, n_points, bits=bits)
        logger.debug("dw=%s sup error=%s", dw, ctx.nstr(error, 6))
        series.append((big(dw, bits), error))
    return series


# -- coefficient recovery -----------------------------------------------------


def _poly_mul(p: list, q: list) -> list:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _apply(poly: list, sequence: list) -> list:
    """``(sum_j poly[j] T^j) u`` for the shift ``(T u)_s = u_{s+1}``."""
    degree = len(poly) - 1
    return [
        sum(c * sequence[s + j] for j, c in enumerate(poly))
        for s in range(len(sequence) - degree)
    ]


def _annihilator(factors: list[tuple[Any, int]], bits: int) -> list:
    ctx = context(bits)
    poly = [ctx.mpc(1)]
    for z, power in factors:
        for _ in range(power):
            poly = _poly_mul(poly, [-z, ctx.mpc(1)])
    return poly


def _is_real_root(z: Any, tol: Any) -> bool:
    return abs(z.imag) <= tol


def recover_coefficients(instance: RecoveryInstance, bits: int | None = None) -> RecoveryReport:
    """Coefficients of ``u_s = sum s^m (b z^s + conj(b) conj(z)^s)`` plus real-root terms.

    For each root and from the top degree down, the operator ``D = p(T) / (T - z)``
    (``p`` the annihilator of the remaining components) kills everything but
    the top-degree term at ``z``; its coefficient is read off by projecting
    ``D u`` on ``D`` applied to ``s^m z^s``, the term is subtracted and the
    multiplicity lowered.
    """
    bits = bits or config.bits
    ctx = context(bits)
    tol = ctx.ldexp(1, -(bits // 4))
    roots = [ctx.mpc(r.z) for r in instance.roots]
    for z in roots:
        if abs(abs(z) - 1) > tol:
            raise DomainError(f"root {z} is not on the unit circle")
    # (root, remaining degree, is real)
    state: list[list] = []
    for spec, z in zip(instance.roots, roots):
        real = _is_real_root(z, tol)
        if real:
            z = ctx.mpc(1 if z.real > 0 else -1)
        state.append([z, 2 * spec.multiplicity if real else spec.multiplicity, real])
    everyone = [z for z, _, real in state] + [ctx.conj(z) for z, _, real in state if not real]
    for i, j in ((i, j) for i in range(len(everyone)) for j in range(i + 1, len(everyone))):
        if abs(everyone[i] - everyone[j]) < tol:
            raise RankError(f"roots {everyone[i]} and {everyone[j]} are closer than 2^-{bits // 4}")

    u = [ctx.mpc(v) for v in instance.samples.values]
    size = len(u)
    indices = [ctx.mpf(s) for s in range(size)]
    coefficients: list[RecoveredCoefficient] = []

    def factors() -> list[tuple[Any, int]]:
        out = []
        for z, degree, real in state:
            if degree:
                out.append((z, degree))
                if not real:
                    out.append((ctx.conj(z), degree))
        return out

    for entry in state:
        z, _, real = entry
        while entry[1] > 0:
            m = entry[1] - 1
            remaining = factors()
            deflated = [(w, p - 1 if w == z else p) for w, p in remaining]
            operator = _annihilator(deflated, bits)
            basis = [s**m * z ** int(s) for s in indices]
            w = _apply(operator, basis)
            du = _apply(operator, u)
            coefficient = ctx.fsum(ctx.conj(a) * b for a, b in zip(w, du)) / ctx.fsum(
                abs(a) ** 2 for a in w
            )
            if real:
                coefficient = ctx.mpc(coefficient.real)
                u = [v - coefficient * b for v, b in zip(u, basis)]
            else:
                conj_basis = [ctx.conj(b) for b in basis]
                u = [
                    v - coefficient * b - ctx.conj(coefficient) * cb
                    for v, b, cb in zip(u, basis, conj_basis)
                ]
            coefficients.append(RecoveredCoefficient(root=z, degree=m, value=coefficient))
            entry[1] -= 1

    residual = max((abs(v) for v in u), default=ctx.zero)
    logger.debug("recovery residual %s", ctx.nstr(residual, 5))
    coefficients.sort(key=lambda c: (roots.index(c.root) if c.root in roots else 0, c.degree))
    return RecoveryReport(coefficients=coefficients, residual=residual)


def synthesize_samples(
    coefficients: Sequence[RecoveredCoefficient], length: int, bits: int | None = None
) -> SampleGrid:
    """Samples ``u_0 .. u_{length-1}`` of the resonant sequence with these coefficients."""
    bits = bits or config.bits
    ctx = context(bits)
    values = []
    for s in range(length):
        total = ctx.zero
        for c in coefficients:
            z, b = ctx.mpc(c.root), ctx.mpc(c.value)
            term = ctx.mpf(s) ** c.degree * b * z**s
            if abs(z.imag) > 0:
                total += 2 * term.real
            else:
                total += term.real
        values.append(total)
    return SampleGrid(a=0, h=1, m=length - 1, values=values)


# -- derivative bound ---------------------------------------------------------


def derivative_bound_check(
    params: SineSumParams, n: int, omega_bound: Any = None, n_points: int | None = None, bits: int | None = None
) -> Certificate:
    """Check ``max|f^(n)| <= 2^(M(M+1)) (1 + Omega)^(M max(n, M-1)) max|f|`` on a grid.

    ``M = 2N`` counts the complex exponentials of the sine sum.
    """
    bits = bits or config.bits
    ctx = context(bits)
    n_points = n_points or min(config.sup_points, 2000)
    if n < 0:
        raise DomainError("derivative order must be non-negative")
    frequencies = [ctx.mpf(w.omega) for w in params.waves]
    omega = big(omega_bound, bits) if omega_bound is not None else max(abs(w) for w in frequencies)
    if any(abs(w) > omega for w in frequencies):
        raise DomainError("a frequency exceeds the declared bound")
    big_m = 2 * params.n
    bound = ctx.ldexp(1, big_m * (big_m + 1)) * (1 + omega) ** (big_m * max(n, big_m - 1))

    def derivative(x: Any):
        return ctx.fsum(
            ctx.mpf(w.c) * ctx.mpf(w.omega) ** n * ctx.sin(ctx.mpf(w.omega) * x + ctx.mpf(w.h) + n * ctx.pi / 2)
            for w in params.waves
        )

    xs = [ctx.mpf(k) / (n_points - 1) for k in range(n_points)]
    top = max(abs(derivative(x)) for x in xs)
    base = max(abs(sine_sum_sampler(params, bits)(x)) for x in xs)
    ratio = top / base if base > 0 else ctx.zero
    return Certificate.build(
        CertificateKind.derivative_bound,
        ratio,
        bound,
        n=n,
        M=big_m,
        omega=encode(omega),
        max_derivative=encode(top),
        max_value=encode(base),
        points=n_points,
    )


# -- limits of c sin(omega sigma(b x) + h) -------------------------------------

SigmaPathKind = Literal["affine-sigma", "monomial", "sine-of-monomial"]


class SigmaLimitTarget(BaseModel):
    """Limit shapes ``a sigma(b x) + c``, ``a0 + ar x^r`` and ``c sin(a0 + ar x^r)``."""

    model_config = ConfigDict(frozen=True)

    kind: SigmaPathKind
    a: BigReal | None = None
    b: BigReal | None = None
    c: BigReal | None = None
    a0: BigReal | None = None
    ar: BigReal | None = None
    r: int | None = None

    @model_validator(mode="after")
    def _check_fields(self) -> "SigmaLimitTarget":
        required = {
            "affine-sigma": ("a", "b", "c"),
            "monomial": ("a0", "ar", "r"),
            "sine-of-monomial": ("c", "a0", "ar", "r"),
        }[self.kind]
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.kind} target needs {', '.join(missing)}")
        return self


def sigma_limit_target_value(
    target: SigmaLimitTarget, sigma: str, x: Any, coeffs: list | None = None, bits: int | None = None
):
    bits = bits or config.bits
    ctx = context(bits)
    x = big(x, bits)
    if target.kind == "affine-sigma":
        return ctx.mpf(target.a) * sigma_function(sigma, ctx.mpf(target.b) * x, coeffs, bits) + ctx.mpf(target.c)
    monomial = ctx.mpf(target.a0) + ctx.mpf(target.ar) * x**target.r
    if target.kind == "monomial":
        return monomial
    return ctx.mpf(target.c) * ctx.sin(monomial)


def sigma_limit_path(
    target: SigmaLimitTarget, sigma: str, t: Any, coeffs: list | None = None, bits: int | None = None
) -> SigmaSineParams:
    """Member of H^sigma approaching ``target`` as ``t -> 0``.

    ``t = 1`` gives an ordinary member; the sup distance to the target is
    O(t) for the monomial shapes and O(t^2) for the affine one.
    """
    bits = bits or config.bits
    ctx = context(bits)
    t = big(t, bits)
    if not 0 < t <= 1:
        raise DomainError("path parameter must lie in (0, 1]")
    sigma_zero = sigma_function(sigma, 0, coeffs, bits)
    if target.kind == "affine-sigma":
        a = ctx.mpf(target.a)
        if a == 0:
            raise DomainError("affine-sigma target needs a != 0")
        b = ctx.mpf(target.b)
        if not -1 <= b <= 1:
            raise DomainError(f"b = {b} outside [-1, 1]")
        return SigmaSineParams(
            sigma=sigma, coeffs=coeffs or [], c=a / t, omega=t, b=b, h=ctx.mpf(target.c) * t / a
        )
    r = sigma_order(sigma, coeffs)
    if target.r != r:
        raise DomainError(f"sigma has order {r} at 0, target uses x^{target.r}")
    kappa = sigma_taylor_coefficient(sigma, coeffs, bits)
    a0, ar = ctx.mpf(target.a0), ctx.mpf(target.ar)
    if target.kind == "monomial":
        omega = ar / (kappa * t ** (r - 1))
        return SigmaSineParams(
            sigma=sigma, coeffs=coeffs or [], c=1 / t, omega=omega, b=t, h=t * a0 - omega * sigma_zero
        )
    omega = ar / (kappa * t**r)
    return SigmaSineParams(
        sigma=sigma,
        coeffs=coeffs or [],
        c=ctx.mpf(target.c),
        omega=omega,
        b=t,
        h=a0 - omega * sigma_zero,
    )
