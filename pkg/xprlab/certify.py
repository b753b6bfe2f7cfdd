"""Polynomial-constraint certificates and the combinatorics around them."""

import itertools
import logging
import math
import sys
from enum import Enum
from typing import Any, Callable, Hashable, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from xprlab.bignum import (
    BigReal,
    big,
    context,
    default_tolerance,
    encode,
    encode_number,
)
from xprlab.config import config
from xprlab.core.errors import (
    BudgetError,
    DegenerateInputError,
    DomainError,
    InternalError,
    LengthError,
    ZeroSampleError,
)
from xprlab.families import SampleGrid

logger = logging.getLogger(__name__)

ENTROPY_UNBOUNDED = sys.maxsize


class CertificateKind(str, Enum):
    det = "det"
    exp_poly = "exp_poly"
    vdw_composite = "vdw_composite"
    derivative_bound = "derivative_bound"


class Certificate(BaseModel):
    model_config = ConfigDict(frozen=True, validate_by_name=True, serialize_by_alias=True)

    kind: CertificateKind
    residual: BigReal
    tolerance: BigReal
    passed: bool = Field(alias="pass")
    metadata: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _verdict_matches(self) -> "Certificate":
        if self.passed != (self.residual <= self.tolerance):
            raise ValueError("pass must equal residual <= tolerance")
        return self

    @classmethod
    def build(cls, kind: CertificateKind, residual: Any, tolerance: Any, **metadata: Any) -> "Certificate":
        return cls(
            kind=kind,
            residual=residual,
            tolerance=tolerance,
            passed=bool(residual <= tolerance),
            metadata=metadata,
        )


class Coloring(BaseModel):
    model_config = ConfigDict(frozen=True)

    colors: list[int]
    p: int

    @model_validator(mode="after")
    def _check_colors(self) -> "Coloring":
        if not self.colors:
            raise ValueError("a coloring needs at least one point")
        if any(not 0 <= c < self.p for c in self.colors):
            raise ValueError(f"colors must lie in [0, {self.p})")
        return self

    @classmethod
    def from_keys(cls, keys: Sequence[Hashable], p: int | None = None) -> "Coloring":
        """Renumber arbitrary branch keys densely from 0 in order of appearance."""
        index: dict[Hashable, int] = {}
        colors = [index.setdefault(key, len(index)) for key in keys]
        return cls(colors=colors, p=p or max(len(index), 1))

    @classmethod
    def from_string(cls, text: str) -> "Coloring":
        """``"RRBB..."`` style colorings, one character per point."""
        return cls.from_keys(list(text))


# -- determinant certificates -------------------------------------------------


def normalized_det(rows: list[list[Any]], bits: int | None = None):
    """``|det A|`` divided by the product of the row norms (Hadamard bound)."""
    ctx = context(bits)
    matrix = ctx.matrix(rows)
    bound = ctx.one
    for row in rows:
        bound *= ctx.sqrt(ctx.fsum(abs(v) ** 2 for v in row))
    if bound == 0:
        return ctx.zero
    return abs(ctx.det(matrix)) / bound


def _check_distinct(values: Sequence[Any], name: str) -> None:
    for i, j in itertools.combinations(range(len(values)), 2):
        if values[i] == values[j]:
            raise DegenerateInputError(f"{name}[{i}] and {name}[{j}] coincide")


def det_certificate(
    g_sampler: Callable[[Any], Any],
    x0: Any,
    alphas: Sequence[Any],
    betas: Sequence[Any],
    n: int,
    tol: Any = None,
    bits: int | None = None,
) -> Certificate:
    """Check ``det(g(x0 + alpha_k + beta_m)) = 0`` for a (2N+1)-square grid."""
    bits = bits or config.bits
    size = 2 * n + 1
    if len(alphas) != size or len(betas) != size:
        raise LengthError(f"N = {n} needs {size} alphas and betas")
    x0 = big(x0, bits)
    alphas = [big(a, bits) for a in alphas]
    betas = [big(b, bits) for b in betas]
    _check_distinct(alphas, "alphas")
    _check_distinct(betas, "betas")
    rows = [[g_sampler(x0 + a + b) for b in betas] for a in alphas]
    tol = big(tol, bits) if tol is not None else default_tolerance(bits)
    return Certificate.build(
        CertificateKind.det,
        normalized_det(rows, bits),
        tol,
        N=n,
        x0=encode(x0),
        alphas=[encode(a) for a in alphas],
        betas=[encode(b) for b in betas],
    )


def hankel_det_certificate(grid: SampleGrid, n: int, tol: Any = None, bits: int | None = None) -> Certificate:
    """The determinant certificate read off a grid of 4N+1 samples.

    Uses ``x0 = a`` and ``alpha_k = beta_k = k h``, so ``A[k][m] = values[k+m]``.
    """
    bits = bits or config.bits
    size = 2 * n + 1
    if grid.m + 1 < 2 * size - 1:
        raise LengthError(f"N = {n} needs {2 * size - 1} samples, grid has {grid.m + 1}")
    ctx = context(bits)
    values = [ctx.convert(v) for v in grid.values]
    rows = [[values[k + j] for j in range(size)] for k in range(size)]
    tol = big(tol, bits) if tol is not None else default_tolerance(bits)
    return Certificate.build(
        CertificateKind.det,
        normalized_det(rows, bits),
        tol,
        N=n,
        a=encode(big(grid.a, bits)),
        h=encode(big(grid.h, bits)),
        samples=2 * size - 1,
    )


# -- finite differences -------------------------------------------------------


def discrete_derivative(grid: SampleGrid, s: int) -> SampleGrid:
    """Forward difference of order ``s`` divided by ``h^s``."""
    if s < 0:
        raise LengthError("derivative order must be non-negative")
    if s > grid.m:
        raise LengthError(f"order {s} exceeds grid length m = {grid.m}")
    ctx = context(max(v.context.prec for v in grid.values))
    weights = [(-1) ** (s - k) * math.comb(s, k) for k in range(s + 1)]
    scale = ctx.mpf(grid.h) ** (-s) if s else ctx.one
    values = [
        scale * ctx.fsum(w * grid.values[j + k] for k, w in enumerate(weights))
        for j in range(grid.m - s + 1)
    ]
    return SampleGrid(a=grid.a, h=grid.h, m=grid.m - s, values=values)


def _continued_logs(values: Sequence[Any], bits: int) -> list:
    """Complex logs with each imaginary part within π of its predecessor's."""
    ctx = context(bits)
    two_pi = 2 * ctx.pi
    floor = default_tolerance(bits)
    logs = []
    for k, v in enumerate(values):
        v = ctx.mpc(v)
        if abs(v) < floor:
            raise ZeroSampleError(k)
        log = ctx.log(v)
        if logs:
            previous = logs[-1].imag
            turns = ctx.nint((previous - log.imag) / two_pi)
            log = ctx.mpc(log.real, log.imag + turns * two_pi)
        logs.append(log)
    return logs


def _wrap_pi(value: Any, bits: int):
    """Representative of ``value`` modulo 2π in (-π, π]."""
    ctx = context(bits)
    two_pi = 2 * ctx.pi
    r = value - two_pi * ctx.nint(value / two_pi)
    if r <= -ctx.pi:
        r += two_pi
    return r


def exp_poly_certificate(grid: SampleGrid, d: int, tol: Any = None, bits: int | None = None) -> Certificate:
    """Check that ``g = e^P`` with ``deg P <= d`` on the grid.

    Each window of ``d+2`` consecutive samples must satisfy
    ``prod_even g^C(d+1,k) = prod_odd g^C(d+1,k)``; in the log domain this is
    the vanishing of the (d+1)-th difference of ``Log g`` modulo 2πi.
    """
    bits = bits or config.bits
    if d < 0:
        raise DomainError("degree must be non-negative")
    if grid.m < d + 1:
        raise LengthError(f"degree {d} needs m >= {d + 1}, grid has m = {grid.m}")
    ctx = context(bits)
    logs = _continued_logs(grid.values, bits)
    weights = [(-1) ** k * math.comb(d + 1, k) for k in range(d + 2)]
    residual = ctx.zero
    for start in range(grid.m - d):
        total = ctx.fsum(w * logs[start + k] for k, w in enumerate(weights))
        window = abs(total.real) + abs(_wrap_pi(total.imag, bits))
        residual = max(residual, window)
    tol = big(tol, bits) if tol is not None else default_tolerance(bits)
    return Certificate.build(
        CertificateKind.exp_poly,
        residual,
        tol,
        d=d,
        a=encode(big(grid.a, bits)),
        h=encode(big(grid.h, bits)),
        m=grid.m,
    )


def constraint_grid_size(n: int, q: int, r: int, d: int) -> int:
    """Grid size ``m`` of the general polynomial constraint for H3_{N,q,r,d}."""
    if n < 1 or q < 1 or r < 0 or d < 0:
        raise DomainError("need N >= 1, q >= 1 and r, d >= 0")
    return (q + 1) * math.comb(n + r + 1, n + 1) + (max(1, d) + 1) * (n + 1)


# -- van der Waerden ----------------------------------------------------------


def find_monochromatic_ap(coloring: Coloring, s: int) -> tuple[int, int] | None:
    """First monochromatic ``s``-term progression as 1-indexed ``(start, step)``.

    Starts are scanned in increasing order, steps in increasing order within a
    start.
    """
    if s < 2:
        raise DomainError("progression length must be at least 2")
    colors = coloring.colors
    n = len(colors)
    for start in range(n):
        for step in range(1, (n - 1 - start) // (s - 1) + 1):
            color = colors[start]
            if all(colors[start + j * step] == color for j in range(1, s)):
                return start + 1, step
    return None


# exact van der Waerden numbers from the literature
_VDW_TABLE = {
    (3, 2): 9,
    (3, 3): 27,
    (3, 4): 76,
    (4, 2): 35,
    (4, 3): 293,
    (5, 2): 178,
    (6, 2): 1132,
}


def vdw_number(s: int, p: int) -> int:
    """Least n such that every p-coloring of {1..n} has a monochromatic s-AP."""
    if s < 1 or p < 1:
        raise DomainError("need s >= 1 and p >= 1")
    if p == 1:
        return s
    if s <= 2:
        return p * (s - 1) + 1
    try:
        return _VDW_TABLE[s, p]
    except KeyError:
        raise BudgetError(f"no stored van der Waerden number for (s, p) = ({s}, {p})") from None


def verify_vdw_number(s: int, p: int, max_colorings: int = 1 << 20) -> bool:
    """Exhaustively confirm ``vdw_number(s, p)``.

    Every coloring of {1..n} must contain a monochromatic s-AP and at least one
    coloring of {1..n-1} must avoid it.
    """
    n = vdw_number(s, p)
    if p**n > max_colorings:
        raise BudgetError(f"{p}^{n} colorings exceed the budget of {max_colorings}")

    def has_ap(colors: tuple[int, ...]) -> bool:
        return find_monochromatic_ap(Coloring(colors=list(colors), p=p), s) is not None

    every = all(has_ap(c) for c in itertools.product(range(p), repeat=n))
    if n == 1:
        return every
    some_avoids = any(not has_ap(c) for c in itertools.product(range(p), repeat=n - 1))
    return every and some_avoids


def vdw_composite_certificate(
    g_sampler: Callable[[Any], Any],
    a: Any,
    b: Any,
    branch_colorer: Callable[[Any], Hashable],
    sub_certifier: Callable[[SampleGrid], Certificate],
    s_tilde: int,
    p: int,
    bits: int | None = None,
) -> Certificate:
    """Certify a branching function through a monochromatic sub-progression.

    The grid has ``vdw_number(s_tilde, p)`` points on [a, b]; any p-coloring of
    it contains a monochromatic progression of ``s_tilde`` points, on which
    ``g`` is a single analytic branch and ``sub_certifier`` applies.
    """
    bits = bits or config.bits
    n_vdw = vdw_number(s_tilde, p)
    m = n_vdw - 1
    a, b = big(a, bits), big(b, bits)
    if m < 1 or not b > a:
        raise DomainError("need a < b and a grid of at least two points")
    h = (b - a) / m
    xs = [a + k * h for k in range(m + 1)]
    coloring = Coloring.from_keys([branch_colorer(x) for x in xs])
    if coloring.p > p:
        raise DomainError(f"observed {coloring.p} branches, more than the declared p = {p}")
    progression = find_monochromatic_ap(coloring, s_tilde)
    if progression is None:
        raise InternalError(
            f"no monochromatic {s_tilde}-progression among {n_vdw} points with {p} colors"
        )
    start, step = progression
    first = start - 1
    sub_values = [g_sampler(xs[first + j * step]) for j in range(s_tilde)]
    sub_grid = SampleGrid(a=xs[first], h=step * h, m=s_tilde - 1, values=sub_values)
    logger.debug("vdw grid of %d points, progression start=%d step=%d", n_vdw, start, step)
    sub = sub_certifier(sub_grid)
    return Certificate.build(
        CertificateKind.vdw_composite,
        sub.residual,
        sub.tolerance,
        n_vdw=n_vdw,
        s_tilde=s_tilde,
        p=p,
        colors_observed=coloring.p,
        grid={"a": encode(a), "h": encode(h), "m": m},
        progression={"start": start, "step": step},
        sub_values=[encode_number(v) for v in sub_values],
        sub_certificate=sub.model_dump(mode="json"),
    )


def exp_poly_sub_certifier(d: int, tol: Any = None, bits: int | None = None) -> Callable[[SampleGrid], Certificate]:
    return lambda grid: exp_poly_certificate(grid, d, tol=tol, bits=bits)


def hankel_sub_certifier(n: int, tol: Any = None, bits: int | None = None) -> Callable[[SampleGrid], Certificate]:
    return lambda grid: hankel_det_certificate(grid, n, tol=tol, bits=bits)


# -- entropy ------------------------------------------------------------------


def entropy_bound(p: int, bits_each: int, m_bound: Any, eps: Any, bits: int | None = None) -> int:
    """Largest N with ``N log2(M/eps) <= p B``.

    Returns ENTROPY_UNBOUNDED when ``log2(M/eps)`` is zero at working
    precision or the quotient does not fit an int.
    """
    bits = bits or config.bits
    if p < 1 or bits_each < 1:
        raise DomainError("need p >= 1 and B >= 1")
    ctx = context(bits)
    m_bound, eps = big(m_bound, bits), big(eps, bits)
    if not eps > 0:
        raise DomainError("accuracy must be positive")
    if m_bound <= eps:
        raise DomainError(f"amplitude bound {m_bound} must exceed accuracy {eps}")
    slack = default_tolerance(bits)
    ratio = ctx.log(m_bound / eps, 2)
    if ratio <= slack:
        return ENTROPY_UNBOUNDED
    quotient = ctx.mpf(p * bits_each) / ratio
    if quotient >= ENTROPY_UNBOUNDED:
        return ENTROPY_UNBOUNDED
    return int(ctx.floor(quotient + slack))
