"""Multi-start damped Gauss-Newton fitting of the function families to point sets.

Restarts alternate between random starts and orbit-seeded starts, where the
frequency comes from the Kronecker solver; every start is then polished by
Levenberg-Marquardt at ``config.fit_bits``. A ``floor-detected`` verdict is
evidence of infeasibility, never a proof: the frequencies a fit needs may lie
beyond any budget.
"""

import asyncio
import logging
import math
from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from xprlab import __version__
from xprlab.bignum import BigReal, big, context, encode
from xprlab.certify import Certificate, constraint_grid_size, hankel_det_certificate
from xprlab.config import config
from xprlab.core.errors import DomainError, LengthError, NotFound
from xprlab.core.rng import generator
from xprlab.families import (
    FamilyParams,
    Monomial,
    PolyExpAlgParams,
    SigmaId,
    SigmaSineParams,
    SampleGrid,
    SineOfSineParams,
    SineSumParams,
    SingleSineParams,
    Wave,
    dump_family,
    evaluate,
    sigma_derivative,
    sigma_function,
)
from xprlab.kronecker import DiophantineInstance, solve_orbit

logger = logging.getLogger(__name__)

FREQUENCY_RANGE = (1e-2, 1e3)
ORBIT_BUDGET = 1e30
FLOOR_FACTOR = 10
FLOOR_SPREAD = 2
FLOOR_SAMPLE = 5
DAMPING_CEILING = 1e12


class FitVerdict(str, Enum):
    achieved = "achieved"
    floor_detected = "floor-detected"
    budget_exhausted = "budget-exhausted"


class FitInstance(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: Literal["H1", "H2", "H3", "Hsigma", "H5"]
    n_waves: int = 1
    degree: int = 1
    sigma: SigmaId = "sigmoid"
    coeffs: list[BigReal] = Field(default_factory=list)
    xs: list[BigReal]
    ys: list[BigReal]
    eps: BigReal
    restarts: int = 64
    max_iter: int = 100

    @model_validator(mode="after")
    def _check_instance(self) -> "FitInstance":
        if not self.xs:
            raise ValueError("need at least one data point")
        if len(self.xs) != len(self.ys):
            raise ValueError("xs and ys differ in length")
        if any(not 0 <= x <= 1 for x in self.xs):
            raise ValueError("data points must lie in [0, 1]")
        if len(set(self.xs)) != len(self.xs):
            raise ValueError("data points must be pairwise distinct")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if min(self.n_waves, self.degree, self.restarts, self.max_iter) < 1:
            raise ValueError("n_waves, degree, restarts and max_iter must be positive")
        if self.sigma == "polynomial" and not self.coeffs:
            raise ValueError("a polynomial sigma needs coefficients")
        return self


class FitReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    params: dict[str, Any]
    residuals: list[BigReal]
    max_residual: BigReal
    restarts_used: int
    verdict: FitVerdict
    verified: bool
    seed: int
    bits: int
    version: str = __version__


class RestartOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    params: list[BigReal]
    max_residual: BigReal
    seeded: bool


class ObstructionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    fit: FitReport
    certificate: Certificate


# -- family models ------------------------------------------------------------


class FamilyModel(ABC):
    """Parameter vector layout, residuals, Jacobian and starts for one family."""

    def __init__(self, instance: FitInstance, bits: int):
        self.instance = instance
        self.bits = bits
        self.ctx = context(bits)
        self.xs = [self.ctx.mpf(x) for x in instance.xs]
        self.ys = [self.ctx.mpf(y) for y in instance.ys]
        self.amplitude = float(max(abs(y) for y in self.ys)) + 1

    @abstractmethod
    def value_and_gradient(self, p: list, x: Any) -> tuple[Any, list]: ...

    @abstractmethod
    def params(self, p: list) -> FamilyParams: ...

    @abstractmethod
    def random_start(self, rng: np.random.Generator) -> list: ...

    def orbit_start(self, rng: np.random.Generator) -> list | None:
        return None

    def project(self, p: list) -> list:
        return p

    def residuals(self, p: list) -> list:
        return [self.value_and_gradient(p, x)[0] - y for x, y in zip(self.xs, self.ys)]

    def jacobian(self, p: list) -> tuple[list, list[list]]:
        rows, residuals = [], []
        for x, y in zip(self.xs, self.ys):
            value, gradient = self.value_and_gradient(p, x)
            residuals.append(value - y)
            rows.append(gradient)
        return residuals, rows

    # shared draws
    def _frequency(self, rng: np.random.Generator):
        low, high = (math.log(v) for v in FREQUENCY_RANGE)
        return self.ctx.mpf(math.exp(rng.uniform(low, high)) * rng.choice([-1.0, 1.0]))

    def _amplitude(self, rng: np.random.Generator):
        return self.ctx.mpf(rng.uniform(-self.amplitude, self.amplitude))

    def _phase(self, rng: np.random.Generator):
        return self.ctx.mpf(rng.uniform(0, 2 * math.pi))

    def _angles(self, rng: np.random.Generator, c: Any) -> list:
        """Targets as angles of ``c sin``, with a random arcsin branch per point."""
        ctx = self.ctx
        angles = []
        for y in self.ys:
            t = ctx.asin(y / c)
            angles.append(ctx.pi - t if rng.random() < 0.5 else t)
        return angles

    def _solve(self, points: list, angles: list, c: Any):
        """Frequency for ``points -> angles`` or None when the orbit solver gives up."""
        eps = self.ctx.mpf(self.instance.eps) / (2 * abs(c))
        try:
            instance = DiophantineInstance(
                points=points, thetas=angles, eps=eps, omega_max=big(ORBIT_BUDGET, self.bits)
            )
            return solve_orbit(instance, self.bits, scan=False).omega
        except (NotFound, ValidationError) as e:
            logger.debug("orbit start unavailable: %s", e)
            return None


class SingleSineModel(FamilyModel):
    def value_and_gradient(self, p: list, x: Any) -> tuple[Any, list]:
        c, omega = p
        s, co = self.ctx.sin(omega * x), self.ctx.cos(omega * x)
        return c * s, [s, c * x * co]

    def params(self, p: list) -> SingleSineParams:
        return SingleSineParams(c=p[0], omega=p[1])

    def random_start(self, rng: np.random.Generator) -> list:
        return [self._amplitude(rng), self._frequency(rng)]

    def orbit_start(self, rng: np.random.Generator) -> list | None:
        c = self.ctx.mpf(self.amplitude)
        omega = self._solve(self.xs, self._angles(rng, c), c)
        return None if omega is None else [c, omega]


class SineSumModel(FamilyModel):
    def _waves(self, p: list) -> list[tuple]:
        return [tuple(p[3 * n : 3 * n + 3]) for n in range(self.instance.n_waves)]

    def value_and_gradient(self, p: list, x: Any) -> tuple[Any, list]:
        ctx = self.ctx
        value, gradient = ctx.zero, []
        for c, omega, h in self._waves(p):
            s, co = ctx.sin(omega * x + h), ctx.cos(omega * x + h)
            value += c * s
            gradient += [s, c * x * co, c * co]
        return value, gradient

    def params(self, p: list) -> SineSumParams:
        return SineSumParams(waves=[Wave(c=c, omega=w, h=h) for c, w, h in self._waves(p)])

    def random_start(self, rng: np.random.Generator) -> list:
        p = []
        for _ in range(self.instance.n_waves):
            p += [self._amplitude(rng), self._frequency(rng), self._phase(rng)]
        return p

    def orbit_start(self, rng: np.random.Generator) -> list | None:
        c = self.ctx.mpf(self.amplitude)
        omega = self._solve(self.xs, self._angles(rng, c), c)
        if omega is None:
            return None
        p = [c, omega, self.ctx.zero]
        for _ in range(self.instance.n_waves - 1):
            p += [self.ctx.zero, self._frequency(rng), self._phase(rng)]
        return p


class PolyExpModel(FamilyModel):
    """H3 with ``Q = a_0 + sum_n a_n z_n`` and ``z_n = e^{P_n(x)}``.

    Coefficients are real, so every member is real on the line. P_n has no
    constant term since ``a_n`` absorbs it; the layout is
    ``[a_0, a_1, p_11..p_1d, a_2, p_21..p_2d, ...]``.
    """

    def _terms(self, p: list) -> list[tuple]:
        width = self.instance.degree + 1
        starts = range(1, 1 + width * self.instance.n_waves, width)
        return [(p[k], p[k + 1 : k + width]) for k in starts]

    def value_and_gradient(self, p: list, x: Any) -> tuple[Any, list]:
        ctx = self.ctx
        powers = [x**k for k in range(1, self.instance.degree + 1)]
        value, gradient = p[0], [ctx.one]
        for a, poly in self._terms(p):
            z = ctx.exp(ctx.fsum(c * t for c, t in zip(poly, powers)))
            value += a * z
            gradient += [z, *(a * z * t for t in powers)]
        return value, gradient

    def params(self, p: list) -> PolyExpAlgParams:
        numerator = [Monomial(coef=p[0], powers=[])]
        numerator += [Monomial(coef=a, powers=[0] * (n + 1) + [1]) for n, (a, _) in enumerate(self._terms(p))]
        polys = [[self.ctx.zero, *poly] for _, poly in self._terms(p)]
        return PolyExpAlgParams(polys=polys, numerator=numerator)

    def project(self, p: list) -> list:
        # keeps exp() in range while the optimizer wanders
        bound = self.ctx.mpf(64)
        d = self.instance.degree
        return [
            v if k == 0 or (k - 1) % (d + 1) == 0 else max(-bound, min(bound, v))
            for k, v in enumerate(p)
        ]

    def random_start(self, rng: np.random.Generator) -> list:
        p = [self._amplitude(rng)]
        for _ in range(self.instance.n_waves):
            p.append(self._amplitude(rng))
            p += [self.ctx.mpf(rng.uniform(-3, 3)) for _ in range(self.instance.degree)]
        return p


class SigmaSineModel(FamilyModel):
    def _sigma(self, t: Any):
        return sigma_function(self.instance.sigma, t, self.instance.coeffs, self.bits)

    def value_and_gradient(self, p: list, x: Any) -> tuple[Any, list]:
        ctx = self.ctx
        c, omega, b, h = p
        s = self._sigma(b * x)
        ds = sigma_derivative(self.instance.sigma, b * x, self.instance.coeffs, self.bits)
        phase = omega * s + h
        sn, co = ctx.sin(phase), ctx.cos(phase)
        return c * sn, [sn, c * co * s, c * co * omega * ds * x, c * co]

    def params(self, p: list) -> SigmaSineParams:
        c, omega, b, h = p
        return SigmaSineParams(
            sigma=self.instance.sigma, coeffs=self.instance.coeffs, c=c, omega=omega, b=b, h=h
        )

    def project(self, p: list) -> list:
        c, omega, b, h = p
        return [c, omega, max(-self.ctx.one, min(self.ctx.one, b)), h]

    def random_start(self, rng: np.random.Generator) -> list:
        b = self.ctx.mpf(rng.uniform(-1, 1))
        return [self._amplitude(rng), self._frequency(rng), b, self._phase(rng)]

    def orbit_start(self, rng: np.random.Generator) -> list | None:
        ctx = self.ctx
        b = ctx.mpf(rng.uniform(0.1, 1) * rng.choice([-1.0, 1.0]))
        values = [self._sigma(b * x) for x in self.xs]
        scale = max(abs(v) for v in values)
        if scale == 0:
            return None
        c = ctx.mpf(self.amplitude)
        omega = self._solve([v / scale for v in values], self._angles(rng, c), c)
        return None if omega is None else [c, omega / scale, b, ctx.zero]


class SineOfSineModel(FamilyModel):
    """``c sin(g(x)) + h`` with ``g`` a sum of ``n_waves`` sines."""

    def value_and_gradient(self, p: list, x: Any) -> tuple[Any, list]:
        ctx = self.ctx
        c, h = p[0], p[1]
        g, inner = ctx.zero, []
        for n in range(self.instance.n_waves):
            a, omega, phi = p[2 + 3 * n : 5 + 3 * n]
            s, co = ctx.sin(omega * x + phi), ctx.cos(omega * x + phi)
            g += a * s
            inner += [s, a * x * co, a * co]
        outer = c * ctx.cos(g)
        return c * ctx.sin(g) + h, [ctx.sin(g), ctx.one, *(outer * d for d in inner)]

    def params(self, p: list) -> SineOfSineParams:
        waves = [
            Wave(c=p[2 + 3 * n], omega=p[3 + 3 * n], h=p[4 + 3 * n])
            for n in range(self.instance.n_waves)
        ]
        return SineOfSineParams(c=p[0], h=p[1], inner=SineSumParams(waves=waves))

    def random_start(self, rng: np.random.Generator) -> list:
        p = [self._amplitude(rng), self.ctx.mpf(rng.uniform(-1, 1))]
        for _ in range(self.instance.n_waves):
            p += [self.ctx.mpf(rng.uniform(-3, 3)), self._frequency(rng), self._phase(rng)]
        return p

    def orbit_start(self, rng: np.random.Generator) -> list | None:
        ctx = self.ctx
        nu = ctx.mpf(rng.uniform(1e-3, 1e-2))
        values = [ctx.sin(nu * x) for x in self.xs]
        scale = max(abs(v) for v in values)
        if scale == 0:
            return None
        c = ctx.mpf(self.amplitude)
        omega = self._solve([v / scale for v in values], self._angles(rng, c), c)
        if omega is None:
            return None
        p = [c, ctx.zero, omega / scale, nu, ctx.zero]
        for _ in range(self.instance.n_waves - 1):
            p += [ctx.zero, self._frequency(rng), self._phase(rng)]
        return p


MODELS: dict[str, type[FamilyModel]] = {
    "H1": SingleSineModel,
    "H2": SineSumModel,
    "H3": PolyExpModel,
    "Hsigma": SigmaSineModel,
    "H5": SineOfSineModel,
}


# -- optimizer ----------------------------------------------------------------


def _max_abs(values: Sequence[Any]):
    return max(abs(v) for v in values)


def levenberg_marquardt(model: FamilyModel, p: list, max_iter: int, target: Any) -> tuple[list, Any]:
    """Polish ``p``; returns the parameters with the smallest max residual seen.

    The damping doubles on a rejected step and halves on an accepted one.
    """
    ctx = model.ctx
    residuals, rows = model.jacobian(p)
    cost = ctx.fsum(r * r for r in residuals)
    best = (p, _max_abs(residuals))
    damping = ctx.mpf("1e-3")
    for _ in range(max_iter):
        if best[1] < target:
            break
        jac = ctx.matrix(rows)
        normal = jac.T * jac
        gradient = jac.T * ctx.matrix(residuals)
        for i in range(normal.rows):
            normal[i, i] += damping * (1 + normal[i, i])
        try:
            step = ctx.lu_solve(normal, gradient * -1)
        except ZeroDivisionError:
            damping *= 2
            continue
        trial = model.project([v + step[i] for i, v in enumerate(p)])
        trial_residuals = model.residuals(trial)
        trial_cost = ctx.fsum(r * r for r in trial_residuals)
        if trial_cost < cost:
            p, cost = trial, trial_cost
            residuals, rows = model.jacobian(p)
            damping /= 2
            worst = _max_abs(residuals)
            if worst < best[1]:
                best = (p, worst)
        else:
            damping *= 2
            if damping > DAMPING_CEILING:
                break
    return best


def _restart(instance: FitInstance, seed: int, index: int, bits: int) -> RestartOutcome:
    model = MODELS[instance.family](instance, bits)
    rng = generator(seed, index)
    start = model.orbit_start(rng) if index % 2 else None
    seeded = start is not None
    if start is None:
        start = model.random_start(rng)
    target = context(bits).mpf(instance.eps) / 2
    p, worst = levenberg_marquardt(model, model.project(start), instance.max_iter, target)
    logger.debug("restart %d (%s): max residual %s", index, "orbit" if seeded else "random", worst)
    return RestartOutcome(index=index, params=p, max_residual=worst, seeded=seeded)


def _verdict(outcomes: list[RestartOutcome], eps: Any) -> FitVerdict:
    ranked = sorted(o.max_residual for o in outcomes)
    if ranked[0] < eps:
        return FitVerdict.achieved
    top = ranked[:FLOOR_SAMPLE]
    if len(top) == FLOOR_SAMPLE and top[0] >= FLOOR_FACTOR * eps and top[-1] <= FLOOR_SPREAD * top[0]:
        return FitVerdict.floor_detected
    return FitVerdict.budget_exhausted


async def fit_family_async(instance: FitInstance, seed: int | None = None, bits: int | None = None) -> FitReport:
    """Run the restarts concurrently in batches of ``config.max_concurrent``.

    The search stops after the first batch holding an achieved restart; the
    best restart wins, ties going to the lower index.
    """
    seed = config.seed if seed is None else seed
    bits = bits or config.fit_bits
    eps = context(bits).mpf(instance.eps)
    batch = max(1, config.max_concurrent)
    semaphore = asyncio.Semaphore(batch)

    async def run(index: int) -> RestartOutcome:
        async with semaphore:
            return await asyncio.to_thread(_restart, instance, seed, index, bits)

    outcomes: list[RestartOutcome] = []
    for start in range(0, instance.restarts, batch):
        stop = min(start + batch, instance.restarts)
        done = await asyncio.gather(*(run(k) for k in range(start, stop)))
        outcomes.extend(done)
        if any(o.max_residual < eps for o in done):
            break

    best = min(outcomes, key=lambda o: (o.max_residual, o.index))
    model = MODELS[instance.family](instance, bits)
    params = model.params(best.params)
    residuals = [abs(r) for r in model.residuals(best.params)]
    verdict = _verdict(outcomes, eps)
    logger.info(
        "%s fit: %s after %d restarts, max residual %s",
        instance.family,
        verdict.value,
        len(outcomes),
        context(bits).nstr(best.max_residual, 5),
    )
    return FitReport(
        family=instance.family,
        params=dump_family(params),
        residuals=residuals,
        max_residual=best.max_residual,
        restarts_used=len(outcomes),
        verdict=verdict,
        verified=_verified(params, instance) if verdict == FitVerdict.achieved else False,
        seed=seed,
        bits=bits,
    )


def _verified(params: FamilyParams, instance: FitInstance) -> bool:
    """Re-check the achieved residuals at full working precision."""
    bits = config.bits
    eps = context(bits).mpf(instance.eps)
    try:
        return all(
            abs(evaluate(params, x, bits) - context(bits).mpf(y)) < eps
            for x, y in zip(instance.xs, instance.ys)
        )
    except DomainError:
        return False


def fit_family(instance: FitInstance, seed: int | None = None, bits: int | None = None) -> FitReport:
    return asyncio.run(fit_family_async(instance, seed, bits))


def progression_fit_obstruction(
    n_waves: int,
    u: Any,
    v: Any,
    targets: Sequence[Any],
    eps: Any,
    restarts: int = 64,
    seed: int | None = None,
    bits: int | None = None,
) -> ObstructionReport:
    """Fit H2 to targets on ``u + j v``, ``j = 0..4N``, and certify the targets.

    The Hankel determinant of the targets is nonzero for values no member
    of H2_N can take, independent of how well the optimizer does.
    """
    size = 4 * n_waves + 1
    if len(targets) != size:
        raise LengthError(f"N = {n_waves} needs {size} targets, got {len(targets)}")
    bits = bits or config.bits
    u, v = big(u, bits), big(v, bits)
    xs = [u + j * v for j in range(size)]
    instance = FitInstance(
        family="H2", n_waves=n_waves, xs=xs, ys=list(targets), eps=eps, restarts=restarts
    )
    fit = fit_family(instance, seed)
    grid = SampleGrid(a=u, h=v, m=size - 1, values=[big(t, bits) for t in targets])
    certificate = hankel_det_certificate(grid, n_waves, bits=bits)
    metadata = {
        **certificate.metadata,
        "H3_grid_size": constraint_grid_size(2 * n_waves, 1, 1, 1),
        "eps": encode(big(eps, bits)),
    }
    return ObstructionReport(fit=fit, certificate=certificate.model_copy(update={"metadata": metadata}))
