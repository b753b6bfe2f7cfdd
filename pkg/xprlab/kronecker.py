"""Simultaneous inhomogeneous Diophantine approximation on the circle.

Given points ``x_k`` and angles ``theta_k`` the solver looks for a frequency
``omega`` with ``omega x_k = theta_k (mod 2π)`` to within ``eps`` for every k.
Candidates come from enumerating every short vector of the embedding lattice
of the problem, level by level up to the frequency budget; a dense float64
scan over small frequencies serves as fallback and cross-check. Every
returned frequency is re-verified at twice the precision.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Any, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from xprlab.bignum import (
    BigReal,
    big,
    circle_distance,
    context,
    default_tolerance,
    reduce_mod_2pi,
    sin_big,
    to_fraction,
)
from xprlab.config import config
from xprlab.core.errors import BudgetError, DomainError, LengthError, NotFound
from xprlab.families import SingleSineParams, Wave

logger = logging.getLogger(__name__)

# integer relations with coefficients up to this bound count as rational dependence
RELATION_BOUND = 10_000
LLL_DELTA = Fraction(99, 100)
SCAN_CHUNK = 1 << 18
# lattice vectors one enumeration level may produce
ENUM_LIMIT = 1 << 14


class DiophantineInstance(BaseModel):
    model_config = ConfigDict(frozen=True)

    points: list[BigReal]
    thetas: list[BigReal]
    eps: BigReal
    omega_max: BigReal = Field(default_factory=lambda: big(config.omega_budget))

    @model_validator(mode="after")
    def _check_instance(self) -> "DiophantineInstance":
        if not self.points:
            raise ValueError("need at least one point")
        if len(self.points) != len(self.thetas):
            raise ValueError("points and thetas differ in length")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if len(set(self.points)) != len(self.points):
            raise ValueError("points must be pairwise distinct")
        return self


class ShatterInstance(BaseModel):
    model_config = ConfigDict(frozen=True)

    points: list[BigReal]
    pattern: list[Literal["+", "-"]]
    margin: BigReal

    @model_validator(mode="after")
    def _check_instance(self) -> "ShatterInstance":
        if len(self.points) != len(self.pattern):
            raise ValueError("pattern length must equal the number of points")
        if not self.margin > 0:
            raise ValueError("margin must be positive")
        if len(set(self.points)) != len(self.points):
            raise ValueError("points must be pairwise distinct")
        return self


class OrbitSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    omega: BigReal
    residuals: list[BigReal]
    verified: bool
    method: str


class SingleSineFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    c: BigReal
    omega: BigReal
    residuals: list[BigReal]
    verified: bool


class IndependenceResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    independent: bool
    relation: list[int] | None = None
    bound: int


# -- integer relations --------------------------------------------------------


def rational_independence_check(
    points: Sequence[Any], bound: int = RELATION_BOUND, bits: int | None = None
) -> IndependenceResult:
    """Search for ``sum lambda_k x_k = 0`` with integer ``|lambda_k| <= bound``.

    The relation is normalized so that its first nonzero entry is positive.
    """
    if bound < 1:
        raise DomainError("coefficient bound must be at least 1")
    bits = bits or config.bits
    ctx = context(bits)
    xs = [big(x, bits) for x in points]
    tol = default_tolerance(bits)
    for k, x in enumerate(xs):
        if abs(x) <= tol:
            relation = [0] * len(xs)
            relation[k] = 1
            return IndependenceResult(independent=False, relation=relation, bound=bound)
    if len(xs) == 1:
        return IndependenceResult(independent=True, bound=bound)
    relation = ctx.pslq(xs, tol=tol, maxcoeff=bound, maxsteps=100_000)
    if relation is None:
        return IndependenceResult(independent=True, bound=bound)
    relation = [int(v) for v in relation]
    if next(v for v in relation if v) < 0:
        relation = [-v for v in relation]
    return IndependenceResult(independent=False, relation=relation, bound=bound)


# -- lattice reduction --------------------------------------------------------


def _dot(u: Sequence, v: Sequence):
    return sum(a * b for a, b in zip(u, v))


def _gram_schmidt(basis: list[list[int]]) -> tuple[list[list[Fraction]], list[Fraction], list[list[Fraction]]]:
    n = len(basis)
    mu = [[Fraction(0)] * n for _ in range(n)]
    norms: list[Fraction] = []
    star: list[list[Fraction]] = []
    for i, row in enumerate(basis):
        v = [Fraction(a) for a in row]
        for j in range(i):
            mu[i][j] = _dot(row, star[j]) / norms[j]
            v = [a - mu[i][j] * b for a, b in zip(v, star[j])]
        norm = _dot(v, v)
        if norm == 0:
            raise DomainError("lattice basis is linearly dependent")
        star.append(v)
        norms.append(norm)
    return mu, norms, star


def lll_reduce(basis: Sequence[Sequence[int]], delta: Fraction = LLL_DELTA) -> list[list[int]]:
    """LLL reduction of an integer row basis in exact rational arithmetic."""
    if not Fraction(1, 4) < delta < 1:
        raise DomainError(f"LLL delta must lie in (1/4, 1), got {delta}")
    basis = [list(row) for row in basis]
    n = len(basis)
    if n < 2:
        return basis
    mu, norms, _ = _gram_schmidt(basis)

    def size_reduce(k: int, l: int) -> None:
        if abs(mu[k][l]) > Fraction(1, 2):
            q = round(mu[k][l])
            basis[k] = [a - q * b for a, b in zip(basis[k], basis[l])]
            mu[k][l] -= q
            for i in range(l):
                mu[k][i] -= q * mu[l][i]

    def swap(k: int) -> None:
        basis[k], basis[k - 1] = basis[k - 1], basis[k]
        for j in range(k - 1):
            mu[k][j], mu[k - 1][j] = mu[k - 1][j], mu[k][j]
        m = mu[k][k - 1]
        b = norms[k] + m * m * norms[k - 1]
        mu[k][k - 1] = m * norms[k - 1] / b
        norms[k] = norms[k - 1] * norms[k] / b
        norms[k - 1] = b
        for i in range(k + 1, n):
            t = mu[i][k]
            mu[i][k] = mu[i][k - 1] - m * t
            mu[i][k - 1] = t + mu[k][k - 1] * mu[i][k]

    k = 1
    while k < n:
        size_reduce(k, k - 1)
        if norms[k] < (delta - mu[k][k - 1] ** 2) * norms[k - 1]:
            swap(k)
            k = max(k - 1, 1)
        else:
            for l in range(k - 2, -1, -1):
                size_reduce(k, l)
            k += 1
    return basis


def babai_nearest_plane(basis: Sequence[Sequence[int]], target: Sequence[int]) -> list[int]:
    """Lattice vector near ``target`` by nearest-plane rounding."""
    _, norms, star = _gram_schmidt([list(row) for row in basis])
    residual = [Fraction(t) for t in target]
    for i in reversed(range(len(basis))):
        c = round(_dot(residual, star[i]) / norms[i])
        if c:
            residual = [r - c * b for r, b in zip(residual, basis[i])]
    return [int(t - r) for t, r in zip(target, residual)]


# -- orbit solver -------------------------------------------------------------


def _angle_residuals(omega: Any, points: Sequence[Any], thetas: Sequence[Any], bits: int) -> list:
    ctx = context(bits)
    omega = ctx.mpf(omega)
    return [circle_distance(omega * ctx.mpf(x), ctx.mpf(t), bits) for x, t in zip(points, thetas)]


def _satisfies(omega: Any, instance: DiophantineInstance, bits: int) -> bool:
    if abs(omega) > instance.omega_max:
        return False
    eps = context(bits).mpf(instance.eps)
    return all(r < eps for r in _angle_residuals(omega, instance.points, instance.thetas, bits))


def _rational_period(points: Sequence[Any], bits: int) -> int | None:
    """Common denominator Q when every point is a small-denominator rational."""
    tol = default_tolerance(bits)
    q = 1
    for x in points:
        f = to_fraction(x).limit_denominator(10**6)
        if abs(x - big(f, bits)) > tol:
            return None
        q = math.lcm(q, f.denominator)
    return q


def close_vectors(
    basis: Sequence[Sequence[int]], target: Sequence[int], radius_sq: Any, limit: int | None = None
) -> list[list[int]]:
    """Every lattice vector within ``sqrt(radius_sq)`` of ``target``.

    Fincke-Pohst enumeration over the Gram-Schmidt coordinates of a square
    basis, in exact rational arithmetic; centred on the Babai point. Raises
    BudgetError once more than ``limit`` vectors turn up.
    """
    basis = [list(row) for row in basis]
    n = len(basis)
    near = babai_nearest_plane(basis, target)
    offset = [Fraction(t - v) for t, v in zip(target, near)]
    mu, norms, star = _gram_schmidt(basis)
    tau = [_dot(offset, star[i]) / norms[i] for i in range(n)]
    coeffs = [0] * n
    found: list[list[int]] = []

    def descend(i: int, remaining: Fraction) -> None:
        center = tau[i] - sum((coeffs[j] * mu[j][i] for j in range(i + 1, n)), Fraction(0))
        width = Fraction(math.sqrt(remaining / norms[i]))
        for c in range(math.floor(center - width) - 1, math.ceil(center + width) + 2):
            used = (c - center) ** 2 * norms[i]
            if used > remaining:
                continue
            coeffs[i] = c
            if i == 0:
                found.append([v + sum(coeffs[j] * basis[j][k] for j in range(n)) for k, v in enumerate(near)])
                if limit is not None and len(found) > limit:
                    raise BudgetError(f"more than {limit} lattice vectors in the search ball")
            else:
                descend(i - 1, remaining - used)
        coeffs[i] = 0

    descend(n - 1, Fraction(radius_sq))
    return found


def _nudged_frequency(
    n0: int, theta_a: Any, instance: DiophantineInstance, anchor: int, others: list[int], bits: int
):
    """Frequency near ``(theta_a + 2π n0) / x_a`` inside every window, or None.

    The anchor may sit anywhere in its own window: ``omega = (theta_a + 2π n0
    + phi) / x_a`` with ``|phi| < eps``, and each other point confines phi to
    an interval. The midpoint of their intersection is returned.
    """
    ctx = context(bits)
    two_pi = 2 * ctx.pi
    eps = ctx.mpf(instance.eps)
    x_a = ctx.mpf(instance.points[anchor])
    base = ctx.mpf(theta_a) + two_pi * n0
    lo, hi = -eps, eps
    for k in others:
        alpha = ctx.mpf(instance.points[k]) / x_a
        offset = reduce_mod_2pi(base * alpha - ctx.mpf(instance.thetas[k]), bits)
        if offset > ctx.pi:
            offset -= two_pi
        left, right = (-eps - offset) / alpha, (eps - offset) / alpha
        if alpha < 0:
            left, right = right, left
        lo, hi = max(lo, left), min(hi, right)
        if lo >= hi:
            return None
    return (base + (lo + hi) / 2) / x_a


def _lattice_search(instance: DiophantineInstance, anchor: int, others: list[int], bits: int):
    """Smallest-|omega| verified frequency from exhaustive lattice enumeration.

    With ``alpha_k = x_k / x_a`` and the anchor angle taken in (-π, π], a
    solution with multiplier ``n0`` needs ``n0 alpha_k - shift_k`` within
    ``2 eps / 2π`` of an integer. On the lattice spanned by ``(w, s alpha)``
    and ``s e_k`` the multipliers with ``|n0| <= B`` lie in a box around the
    target, and the box lies inside the enumeration ball. B doubles from 1 up
    to the budget; once a level yields a frequency one more level is searched,
    since ``|omega x_a|`` is within ``π + eps`` of ``2π |n0|``.
    """
    ctx = context(bits)
    two_pi = 2 * ctx.pi
    eps = ctx.mpf(instance.eps)
    xs = [ctx.mpf(x) for x in instance.points]
    x_a = xs[anchor]
    theta_a = reduce_mod_2pi(instance.thetas[anchor], bits)
    if theta_a > ctx.pi:
        theta_a -= two_pi
    n0_max = int(ctx.ceil((ctx.mpf(instance.omega_max) * abs(x_a) + ctx.pi + eps) / two_pi))
    precision = max(bits // 4, n0_max.bit_length() + 24)
    unit = 1 << precision
    scale = two_pi / eps
    alpha = [xs[k] / x_a for k in others]
    shift = [(ctx.mpf(instance.thetas[k]) - theta_a * a) / two_pi for k, a in zip(others, alpha)]
    row_tail = [int(ctx.nint(scale * a * unit)) for a in alpha]
    s_int = int(ctx.nint(scale * unit))
    target = [0, *(int(ctx.nint(scale * t * unit)) for t in shift)]
    dim = len(others) + 1
    # box half-widths: unit for n0, 2 unit for the others, plus rounding slack
    radius_sq = Fraction(unit * unit * (1 + 4 * len(others))) * Fraction(65, 64) ** 2

    valid: list = []
    level, last = 1, False
    while True:
        w_int = max(1, unit // level)
        basis = [[w_int, *row_tail]]
        for i in range(1, dim):
            row = [0] * dim
            row[i] = s_int
            basis.append(row)
        try:
            vectors = close_vectors(lll_reduce(basis), target, radius_sq, ENUM_LIMIT)
        except BudgetError as e:
            logger.warning("lattice search stopped at level %d: %s", level, e)
            break
        multipliers = {v[0] // w_int for v in vectors}
        for n0 in multipliers:
            if abs(n0) > n0_max:
                continue
            omega = _nudged_frequency(n0, theta_a, instance, anchor, others, bits)
            if omega is not None and _satisfies(omega, instance, bits) and _verified(omega, instance, bits):
                valid.append(omega)
        logger.debug("lattice level %d: %d multipliers, %d valid so far", level, len(multipliers), len(valid))
        if last or level >= n0_max:
            break
        last = bool(valid)
        level = min(2 * level, n0_max)
    return min(valid, key=abs, default=None)


def _omega_for(n0: int, anchor_x: Any, anchor_theta: Any, bits: int):
    ctx = context(bits)
    return (ctx.mpf(anchor_theta) + 2 * ctx.pi * n0) / ctx.mpf(anchor_x)


def _scan_chunk(
    start: int, stop: int, step: float, xs: np.ndarray, thetas: np.ndarray, eps: float
) -> list[float]:
    """Frequencies ``±j*step`` for ``start <= j < stop`` hitting every window."""
    js = np.arange(start, stop, dtype=np.float64)
    hits = []
    for sign in (1.0, -1.0):
        phases = np.outer(sign * js * step, xs) - thetas
        distance = np.abs(np.mod(phases + np.pi, 2 * np.pi) - np.pi)
        ok = np.all(distance < eps, axis=1)
        hits.extend(sign * js[ok] * step)
    hits.sort(key=abs)
    return hits


def _grid_scan(
    instance: DiophantineInstance, limit: Any, bits: int
) -> tuple[Any | None, bool]:
    """Smallest-|omega| verified solution below ``limit``.

    Returns ``(omega or None, covered)`` where ``covered`` tells whether the
    whole range up to ``limit`` was scanned.
    """
    xs = np.array([float(x) for x in instance.points])
    thetas = np.array([float(t) for t in instance.thetas])
    eps = float(instance.eps)
    step = eps / (2 * math.pi * float(np.max(np.abs(xs))))
    wanted = math.ceil(float(limit) / step) + 1
    total = min(wanted, config.scan_limit)
    chunks = [(lo, min(lo + SCAN_CHUNK, total)) for lo in range(0, total, SCAN_CHUNK)]
    logger.debug("grid scan: %d steps of %.3g in %d chunks", total, step, len(chunks))
    batch = max(1, config.max_concurrent)
    with ThreadPoolExecutor(max_workers=batch) as pool:
        for i in range(0, len(chunks), batch):
            group = chunks[i : i + batch]
            results = pool.map(lambda c: _scan_chunk(c[0], c[1], step, xs, thetas, eps), group)
            for hits in results:
                for hit in hits:
                    omega = big(hit, bits)
                    if _satisfies(omega, instance, bits):
                        return omega, True
    return None, total >= wanted


def _verified(omega: Any, instance: DiophantineInstance, bits: int) -> bool:
    return _satisfies(big(omega, 2 * bits), instance, 2 * bits)


def subtorus_witness(instance: DiophantineInstance, bits: int | None = None) -> list[int] | None:
    """Integer relation proving the instance infeasible, if one exists.

    A relation ``sum lambda_k x_k = 0`` forces ``sum lambda_k theta_k`` to lie
    within ``eps * sum |lambda_k|`` of 0 modulo 2π.
    """
    bits = bits or config.bits
    check = rational_independence_check(instance.points, bits=bits)
    if check.independent:
        return None
    ctx = context(bits)
    combined = ctx.fsum(l * ctx.mpf(t) for l, t in zip(check.relation, instance.thetas))
    slack = ctx.mpf(instance.eps) * sum(abs(l) for l in check.relation)
    if circle_distance(combined, 0, bits) >= slack:
        return check.relation
    return None


def solve_orbit(instance: DiophantineInstance, bits: int | None = None, scan: bool = True) -> OrbitSolution:
    """Smallest-|omega| frequency found that puts ``omega x_k`` within eps of ``theta_k``."""
    bits = bits or config.bits
    ctx = context(bits)
    points = [ctx.mpf(x) for x in instance.points]

    if _satisfies(ctx.zero, instance, bits):
        return _solution(ctx.zero, instance, bits, "trivial")

    zero_points = [k for k, x in enumerate(points) if x == 0]
    eps = ctx.mpf(instance.eps)
    for k in zero_points:
        if circle_distance(0, instance.thetas[k], bits) >= eps:
            raise NotFound("zero-point", witness=[k], exhaustive=True)
    active = [k for k, x in enumerate(points) if x != 0]

    witness = subtorus_witness(instance, bits)
    if witness is not None:
        raise NotFound("subtorus", witness=witness, exhaustive=True)

    anchor = max(active, key=lambda k: abs(points[k]))
    others = [k for k in active if k != anchor]
    best: tuple[Any, str] | None = None
    if not others:
        theta = reduce_mod_2pi(instance.thetas[anchor], bits)
        valid = [
            omega
            for omega in (_omega_for(n0, points[anchor], theta, bits) for n0 in (0, -1))
            if _satisfies(omega, instance, bits) and _verified(omega, instance, bits)
        ]
        if valid:
            best = (min(valid, key=abs), "closed-form")
    else:
        omega = _lattice_search(instance, anchor, others, bits)
        if omega is not None:
            best = (omega, "lattice")

    covered = False
    if scan and others:
        limit = min(ctx.mpf(instance.omega_max), abs(best[0])) if best else ctx.mpf(instance.omega_max)
        period = _rational_period(points, bits)
        if period is not None and best is None:
            limit = min(limit, 2 * ctx.pi * period)
        omega, covered = _grid_scan(instance, limit, bits)
        if omega is not None and _verified(omega, instance, bits):
            if best is None or abs(omega) < abs(best[0]):
                best = (omega, "scan")
        if best is None and period is not None and covered and limit >= 2 * ctx.pi * period:
            raise NotFound("exhaustive-period", witness=[period], exhaustive=True)

    if best is None:
        raise NotFound("budget")
    return _solution(best[0], instance, bits, best[1])


def _solution(omega: Any, instance: DiophantineInstance, bits: int, method: str) -> OrbitSolution:
    return OrbitSolution(
        omega=omega,
        residuals=_angle_residuals(omega, instance.points, instance.thetas, bits),
        verified=_verified(omega, instance, bits),
        method=method,
    )


# -- single sine fitting and shattering ---------------------------------------


def fit_single_sine(
    points: Sequence[Any],
    targets: Sequence[Any],
    eps: Any,
    omega_max: Any = None,
    bits: int | None = None,
) -> SingleSineFit:
    """``(c, omega)`` with ``|c sin(omega x_k) - y_k| < eps`` for every k.

    ``c = max|y| + 1`` and the targets become angles ``arcsin(y_k / c)``; for
    up to four points both arcsin branches are tried per target.
    """
    bits = bits or config.bits
    ctx = context(bits)
    xs = [big(x, bits) for x in points]
    ys = [big(y, bits) for y in targets]
    eps = big(eps, bits)
    if len(xs) != len(ys):
        raise LengthError("points and targets differ in length")
    if not eps > 0:
        raise DomainError("eps must be positive")
    budget = big(omega_max if omega_max is not None else config.omega_budget, bits)

    if all(abs(y) < eps for y in ys):
        return _single_sine_fit(ctx.one, ctx.zero, xs, ys, eps, bits)

    c = max(abs(y) for y in ys) + 1
    principal = [ctx.asin(y / c) for y in ys]
    branches = itertools.product((False, True), repeat=len(xs)) if len(xs) <= 4 else [(False,) * len(xs)]
    best, failures = None, []
    for flips in branches:
        thetas = [
            reduce_mod_2pi(ctx.pi - t if flip else t, bits) for t, flip in zip(principal, flips)
        ]
        limit = min(budget, abs(best)) if best is not None else budget
        instance = DiophantineInstance(points=xs, thetas=thetas, eps=eps / c, omega_max=limit)
        try:
            omega = solve_orbit(instance, bits).omega
        except NotFound as e:
            failures.append(e)
            continue
        if best is None or abs(omega) < abs(best):
            best = omega
    if best is None:
        reasons = {e.reason for e in failures}
        if reasons == {"subtorus"}:
            raise NotFound("subtorus", witness=failures[0].witness, exhaustive=True)
        raise NotFound("budget")
    return _single_sine_fit(c, best, xs, ys, eps, bits)


def _single_sine_fit(c: Any, omega: Any, xs: list, ys: list, eps: Any, bits: int) -> SingleSineFit:
    ctx = context(bits)

    def residuals(precision: int) -> list:
        hi = context(precision)
        return [
            abs(hi.mpf(c) * sin_big(hi.mpf(omega) * hi.mpf(x), precision) - hi.mpf(y))
            for x, y in zip(xs, ys)
        ]

    return SingleSineFit(
        c=c,
        omega=omega,
        residuals=residuals(bits),
        verified=all(r < ctx.mpf(eps) for r in residuals(2 * bits)),
    )


def progression_sign_conflict(pattern: Sequence[str]) -> tuple[int, int] | None:
    """Two triples on an arithmetic progression forcing opposite signs of cos(omega v).

    For ``g = c sin(omega x + h)`` on ``u + k v`` the identity
    ``g_k + g_{k+2} = 2 g_{k+1} cos(omega v)`` gives ``sign(cos) = s * m``
    for every triple whose outer signs agree (``s``) around a middle ``m``.
    Returns the starting indices of two contradicting triples.
    """
    forced: dict[int, int] = {}
    for k in range(len(pattern) - 2):
        outer, middle = pattern[k], pattern[k + 1]
        if outer != pattern[k + 2]:
            continue
        sign = 1 if outer == middle else -1
        for other, other_sign in forced.items():
            if other_sign != sign:
                return other, k
        forced.setdefault(k, sign)
    return None


def _is_progression(points: Sequence[Any], bits: int) -> bool:
    if len(points) < 3:
        return False
    tol = default_tolerance(bits)
    step = points[1] - points[0]
    return all(abs((points[k + 1] - points[k]) - step) <= tol for k in range(len(points) - 1))


def shatter(instance: ShatterInstance, omega_max: Any = None, bits: int | None = None) -> SingleSineParams:
    """H1 member realizing the sign pattern with the given margin."""
    bits = bits or config.bits
    ctx = context(bits)
    order = sorted(range(len(instance.points)), key=lambda k: instance.points[k])
    ordered = [ctx.mpf(instance.points[k]) for k in order]
    if _is_progression(ordered, bits):
        conflict = progression_sign_conflict([instance.pattern[k] for k in order])
        if conflict is not None:
            raise NotFound("progression-sign", witness=list(conflict), exhaustive=True)

    margin = ctx.mpf(instance.margin)
    c = 1 + 2 * margin
    half_pi = ctx.pi / 2
    thetas = [half_pi if s == "+" else 3 * half_pi for s in instance.pattern]
    # c sin(phi) > margin holds within arccos(margin / c) of the peak
    window = ctx.acos(margin / c) * ctx.mpf("0.9")
    budget = big(omega_max if omega_max is not None else config.omega_budget, bits)
    solution = solve_orbit(
        DiophantineInstance(points=instance.points, thetas=thetas, eps=window, omega_max=budget),
        bits,
    )
    return SingleSineParams(c=c, omega=solution.omega)


def three_term_identity_residual(params: SingleSineParams | Wave, u: Any, v: Any, bits: int | None = None):
    """``|g(u) + g(u+2v) - 2 g(u+v) cos(omega v)|`` for ``g = c sin(omega x + h)``."""
    bits = bits or config.bits
    guard = bits + 16
    hi = context(guard)
    c, omega = hi.mpf(params.c), hi.mpf(params.omega)
    h = hi.mpf(getattr(params, "h", 0))
    u, v = hi.mpf(big(u, bits)), hi.mpf(big(v, bits))

    def g(x: Any):
        return c * sin_big(omega * x + h, guard)

    residual = abs(g(u) + g(u + 2 * v) - 2 * g(u + v) * hi.cos(omega * v))
    return context(bits).mpf(residual)
