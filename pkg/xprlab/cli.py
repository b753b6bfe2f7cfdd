"""Command line: every experiment as a subcommand printing one JSON document.

Exit codes: 0 for pass/success, 1 for fail verdicts, 2 for usage errors.
Diagnostics go to stderr.
"""

import argparse
import json
import logging
import shlex
import sys
from typing import Any, Callable

from pydantic import ValidationError

from xprlab import __version__
from xprlab.bignum import big, context, encode, encode_number
from xprlab.certify import (
    ENTROPY_UNBOUNDED,
    det_certificate,
    discrete_derivative,
    entropy_bound,
    exp_poly_certificate,
    exp_poly_sub_certifier,
    hankel_det_certificate,
    hankel_sub_certifier,
    vdw_composite_certificate,
)
from xprlab.config import config
from xprlab.core.errors import (
    DegenerateInputError,
    DomainError,
    LengthError,
    NotFound,
    UsageError,
    XprlabError,
)
from xprlab.core.io import emit_plot_data, load_json_arg, load_xy_csv, parse_list, write_json
from xprlab.core.rng import generator
from xprlab.families import (
    SampleGrid,
    SineSumParams,
    SingleSineParams,
    dump_family,
    load_family,
    sample,
    sampler,
)
from xprlab.fitlab import FitInstance, FitVerdict, fit_family
from xprlab.kronecker import DiophantineInstance, ShatterInstance, fit_single_sine, shatter, solve_orbit
from xprlab.limits import (
    RecoveryInstance,
    RootSpec,
    SigmaLimitTarget,
    convergence_sweep,
    polynomial_combo,
    recover_coefficients,
    resonance_combo,
    sigma_limit_path,
    sigma_limit_target_value,
    sine_sum_sampler,
    sup_distance,
)
from xprlab.netlab import (
    NetworkGraph,
    branch_colorer,
    branch_coloring,
    build_universal_sin_arcsin,
    eval_network,
    network_sampler,
    universal_random_weights,
    validate_single_transcendental,
)

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class ArgumentParser(argparse.ArgumentParser):
    """Raises UsageError instead of exiting, so ``run`` owns the exit code."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _grid(value: str) -> tuple[Any, Any, int]:
    parts = value.split(",")
    if len(parts) != 3:
        raise UsageError(f"--grid expects a,h,m, got {value!r}")
    return big(parts[0]), big(parts[1]), int(parts[2])


def _family(value: str):
    return load_family(load_json_arg(value))


def _n_waves(params: Any, explicit: int | None) -> int:
    if explicit:
        return explicit
    if isinstance(params, SineSumParams):
        return params.n
    if isinstance(params, SingleSineParams):
        return 1
    raise UsageError("--n is required for this family")


# -- handlers -----------------------------------------------------------------
# each returns (payload, passed)


def cmd_kronecker(args: argparse.Namespace) -> tuple[dict, bool]:
    points = [big(x) for x in load_json_arg(args.points)]
    eps = big(args.eps)
    budget = big(args.budget) if args.budget is not None else None
    try:
        if args.pattern:
            params = shatter(
                ShatterInstance(points=points, pattern=list(args.pattern), margin=args.margin or eps),
                omega_max=budget,
            )
            return {"found": True, "params": dump_family(params)}, True
        if args.angles:
            thetas = [big(t) for t in load_json_arg(args.angles)]
            instance = DiophantineInstance(
                points=points, thetas=thetas, eps=eps, omega_max=budget or big(config.omega_budget)
            )
            solution = solve_orbit(instance)
            return {"found": True, **solution.model_dump(mode="json")}, solution.verified
        if not args.targets:
            raise UsageError("one of --targets, --angles or --pattern is required")
        targets = [big(y) for y in load_json_arg(args.targets)]
        fit = fit_single_sine(points, targets, eps, omega_max=budget)
        return {"found": True, **fit.model_dump(mode="json")}, fit.verified
    except NotFound as e:
        return {
            "found": False,
            "reason": e.reason,
            "witness": e.witness,
            "exhaustive": e.exhaustive,
        }, False


def cmd_certify(args: argparse.Namespace) -> tuple[dict, bool]:
    tol = big(args.tol) if args.tol is not None else None
    if args.kind == "det":
        params = _family(args.family)
        n = _n_waves(params, args.n)
        if args.alphas:
            certificate = det_certificate(
                sampler(params),
                big(args.x0),
                parse_list(args.alphas),
                parse_list(args.betas or args.alphas),
                n,
                tol=tol,
            )
        else:
            a, h, m = _grid(args.grid or f"0,0.1,{4 * n}")
            certificate = hankel_det_certificate(sample(params, a, h, m), n, tol=tol)
    elif args.kind == "exppoly":
        params = _family(args.family)
        if not args.grid:
            raise UsageError("certify exppoly needs --grid a,h,m")
        grid = sample(params, *_grid(args.grid))
        if args.derivative:
            grid = discrete_derivative(grid, args.derivative)
        certificate = exp_poly_certificate(grid, args.d, tol=tol)
    else:
        if args.net:
            net = NetworkGraph.model_validate(load_json_arg(args.net))
            g, colorer = network_sampler(net), branch_colorer(net)
        elif args.family:
            g, colorer = sampler(_family(args.family)), (lambda x: ())
        else:
            raise UsageError("certify vdw needs --net or --family")
        sub = exp_poly_sub_certifier(args.d, tol) if args.sub == "exppoly" else hankel_sub_certifier(args.n or 1, tol)
        certificate = vdw_composite_certificate(
            g, big(args.a), big(args.b), colorer, sub, args.s_tilde, args.p
        )
    return certificate.model_dump(mode="json"), certificate.passed


def cmd_limits(args: argparse.Namespace) -> tuple[dict, bool]:
    ctx = context(config.bits)
    points = args.points or config.sup_points
    if args.kind == "resonance":
        omega, h = big(args.omega), big(args.h)
        if args.sweep:
            dws = parse_list(args.sweep)
            series = convergence_sweep(omega, h, args.m, dws, points)
            if args.plot:
                emit_plot_data(
                    [("dw", [str(dw) for dw, _ in series]), ("sup_error", [str(e) for _, e in series])],
                    args.plot,
                )
            return {"sweep": [{"dw": encode(dw), "sup_error": encode(e)} for dw, e in series]}, True
        params = resonance_combo(omega, h, args.m, big(args.dw))
        error = sup_distance(
            sine_sum_sampler(params), lambda x: x**args.m * ctx.sin(omega * x + h), points
        )
        return {"params": dump_family(params), "sup_error": encode(error)}, True
    if args.kind == "polycombo":
        if not args.coeffs:
            raise UsageError("limits polycombo needs --coeffs")
        coeffs = parse_list(args.coeffs)
        params = polynomial_combo(args.m0, coeffs, big(args.dw))
        error = sup_distance(
            sine_sum_sampler(params), lambda x: ctx.polyval(list(reversed(coeffs)), x), points
        )
        return {"params": dump_family(params), "sup_error": encode(error)}, True
    if args.kind == "recover":
        if not args.samples or not args.roots:
            raise UsageError("limits recover needs --samples and --roots")
        grid = SampleGrid.from_csv(args.samples)
        roots = [RootSpec.model_validate(r) for r in load_json_arg(args.roots)]
        report = recover_coefficients(RecoveryInstance(samples=grid, roots=roots))
        return report.model_dump(mode="json"), True
    if not args.target:
        raise UsageError("limits sigmapath needs --target")
    target = SigmaLimitTarget.model_validate(load_json_arg(args.target))
    coeffs = parse_list(args.coeffs) if args.coeffs else None
    params = sigma_limit_path(target, args.sigma, big(args.t), coeffs)
    error = sup_distance(
        sampler(params), lambda x: sigma_limit_target_value(target, args.sigma, x, coeffs), points
    )
    return {"params": dump_family(params), "sup_error": encode(error)}, True


def cmd_net(args: argparse.Namespace) -> tuple[dict, bool]:
    if args.kind == "fig1":
        if args.weights:
            weights = [big(w) for w in load_json_arg(args.weights)]
        elif args.random:
            weights = universal_random_weights(generator(config.seed, 10))
        else:
            raise UsageError("net fig1 needs --weights or --random")
        net = build_universal_sin_arcsin(weights)
        check = validate_single_transcendental(net)
        payload = {"net": net.model_dump(mode="json"), "validation": check.model_dump(mode="json")}
        if args.x is not None:
            payload["y"] = encode(eval_network(net, big(args.x))[0])
        return payload, True
    if not args.net:
        raise UsageError(f"net {args.kind} needs --net")
    net = NetworkGraph.model_validate(load_json_arg(args.net))
    if args.kind == "validate":
        check = validate_single_transcendental(net)
        return check.model_dump(mode="json"), check.ok
    if args.kind == "color":
        if not args.grid:
            raise UsageError("net color needs --grid a,h,m")
        coloring = branch_coloring(net, *_grid(args.grid))
        return coloring.model_dump(mode="json"), True
    if args.grid:
        a, h, m = _grid(args.grid)
        xs = [a + k * h for k in range(m + 1)]
    elif args.x is not None:
        xs = [big(args.x)]
    else:
        raise UsageError("net eval needs --x or --grid")
    rows = []
    for x in xs:
        y, trace = eval_network(net, x)
        rows.append({"x": encode(x), "y": encode_number(y), "branches": trace.branches})
    return {"values": rows}, True


def cmd_fit(args: argparse.Namespace) -> tuple[dict, bool]:
    document = load_json_arg(args.family)
    if not isinstance(document, dict):
        raise UsageError("--family must be a JSON object")
    xs, ys = load_xy_csv(args.data)
    instance = FitInstance(
        **{k: v for k, v in document.items() if k in FitInstance.model_fields},
        xs=xs,
        ys=ys,
        eps=big(args.eps),
        restarts=args.restarts,
    )
    report = fit_family(instance, seed=config.seed)
    return report.model_dump(mode="json"), report.verdict == FitVerdict.achieved


def cmd_bound(args: argparse.Namespace) -> tuple[dict, bool]:
    n = entropy_bound(args.p, args.B, big(args.M), big(args.eps))
    return {"max_N": None if n == ENTROPY_UNBOUNDED else n, "unbounded": n == ENTROPY_UNBOUNDED}, True


def cmd_suite(args: argparse.Namespace) -> tuple[dict, bool]:
    from xprlab.suite import AcceptanceSuite

    only = [int(v) for v in args.only.split(",")] if args.only else None
    report = AcceptanceSuite(seed=config.seed, quick=args.quick, only=only).run()
    return report.model_dump(mode="json"), report.passed


# -- parser -------------------------------------------------------------------


def _global_flags() -> ArgumentParser:
    parent = ArgumentParser(add_help=False)
    parent.add_argument("--bits", type=int, default=argparse.SUPPRESS, help="working precision")
    parent.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    parent.add_argument("--out", default=argparse.SUPPRESS, help="also write the JSON here")
    parent.add_argument("--log-level", default=argparse.SUPPRESS, help="stderr log level")
    return parent


def build_parser() -> ArgumentParser:
    common = _global_flags()
    parser = ArgumentParser(prog="xprlab", description=__doc__, parents=[common])
    parser.add_argument("--config", default=argparse.SUPPRESS, help="JSON file replacing flags")
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    def add(name: str, handler: Callable, **kwargs: Any) -> ArgumentParser:
        sub = commands.add_parser(name, parents=[common], **kwargs)
        sub.set_defaults(handler=handler)
        return sub

    kron = add("kronecker", cmd_kronecker, help="fit c sin(omega x) to points by orbit search")
    kron.add_argument("--points", required=True, help="JSON list or file")
    kron.add_argument("--targets", help="JSON list of y values")
    kron.add_argument("--angles", help="JSON list of target angles (raw orbit problem)")
    kron.add_argument("--pattern", help="sign pattern such as +++-+ (shattering)")
    kron.add_argument("--margin", help="shattering margin")
    kron.add_argument("--eps", required=True)
    kron.add_argument("--budget", help="frequency budget")

    cert = add("certify", cmd_certify, help="constraint certificates")
    cert.add_argument("kind", choices=["det", "exppoly", "vdw"])
    cert.add_argument("--family", help="family document (JSON or file)")
    cert.add_argument("--net", help="network document for vdw")
    cert.add_argument("--grid", help="a,h,m")
    cert.add_argument("--x0", default="0")
    cert.add_argument("--alphas")
    cert.add_argument("--betas")
    cert.add_argument("--n", type=int)
    cert.add_argument("--d", type=int, default=1)
    cert.add_argument("--derivative", type=int, default=0, help="apply a discrete derivative first")
    cert.add_argument("--a", default="0")
    cert.add_argument("--b", default="1")
    cert.add_argument("--s-tilde", type=int, default=4)
    cert.add_argument("--p", type=int, default=2)
    cert.add_argument("--sub", choices=["exppoly", "det"], default="exppoly")
    cert.add_argument("--tol")

    lim = add("limits", cmd_limits, help="constructive limits and recovery")
    lim.add_argument("kind", choices=["resonance", "polycombo", "recover", "sigmapath"])
    lim.add_argument("--omega", default="1")
    lim.add_argument("--h", default="0")
    lim.add_argument("--m", type=int, default=1)
    lim.add_argument("--dw", default="0.001")
    lim.add_argument("--sweep", help="comma-separated dw values")
    lim.add_argument("--plot", help="CSV path for the sweep series")
    lim.add_argument("--m0", type=int, default=1)
    lim.add_argument("--coeffs")
    lim.add_argument("--samples", help="sample CSV")
    lim.add_argument("--roots", help="JSON list of {z, multiplicity}")
    lim.add_argument("--sigma", default="sigmoid")
    lim.add_argument("--target", help="limit target JSON")
    lim.add_argument("--t", default="0.01")
    lim.add_argument("--points", type=int, help="sup-norm grid size")

    net = add("net", cmd_net, help="network evaluation and validation")
    net.add_argument("kind", choices=["eval", "validate", "color", "fig1"])
    net.add_argument("--net", help="network document")
    net.add_argument("--x")
    net.add_argument("--grid", help="a,h,m")
    net.add_argument("--weights", help="fig1 weights (JSON list)")
    net.add_argument("--random", action="store_true", help="fig1 with seeded random weights")

    fit = add(
        "fit", cmd_fit, help="multi-start family fitting; floor_detected is evidence, not proof, of infeasibility"
    )
    fit.add_argument("--family", required=True, help='e.g. {"family": "Hsigma", "sigma": "sigmoid"}')
    fit.add_argument("--data", required=True, help="CSV with columns x,y")
    fit.add_argument("--eps", required=True)
    fit.add_argument("--restarts", type=int, default=64)

    bound = add("bound", cmd_bound, help="entropy bound on N")
    bound.add_argument("--p", type=int, required=True)
    bound.add_argument("--B", type=int, required=True)
    bound.add_argument("--M", required=True)
    bound.add_argument("--eps", required=True)

    suite = add("suite", cmd_suite, help="acceptance battery")
    suite.add_argument("--only", help="comma-separated criterion numbers")
    suite.add_argument("--quick", action="store_true")
    return parser


def expand_config(argv: list[str]) -> list[str]:
    """Replace ``--config <path>`` by the flags its JSON document describes.

    Flags given on the command line come after and win.
    """
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a path")
    rest = argv[:i] + argv[i + 2 :]
    document = load_json_arg(argv[i + 1])
    if not isinstance(document, dict) or "command" not in document:
        raise UsageError("config document needs a command")
    tokens = shlex.split(document["command"])
    for key in ("seed", "bits", "out"):
        if key in document:
            tokens += [f"--{key}", str(document[key])]
    for key, value in document.get("options", {}).items():
        flag = "--" + key.replace("_", "-")
        if value is True:
            tokens.append(flag)
        elif value is False or value is None:
            continue
        elif isinstance(value, (list, dict)):
            tokens += [flag, json.dumps(value) if isinstance(value, dict) else ",".join(map(str, value))]
        else:
            tokens += [flag, str(value)]
    return tokens + rest


def _configure_logging(level: str) -> None:
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_xprlab", False):
            root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    handler._xprlab = True
    root.addHandler(handler)
    root.setLevel(level.upper())


def run(argv: list[str] | None = None) -> int:
    """Parse, execute and print; returns the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    saved = (config.bits, config.seed)
    try:
        argv = expand_config(argv)
        args = build_parser().parse_args(argv)
        if hasattr(args, "bits"):
            config.bits = args.bits
        if hasattr(args, "seed"):
            config.seed = args.seed
        _configure_logging(getattr(args, "log_level", config.log_level))
        provenance = {
            "seed": config.seed,
            "bits": config.bits,
            "version": __version__,
            "command": shlex.join(["xprlab", *argv]),
        }
        try:
            payload, passed = args.handler(args)
        except (ValidationError, DomainError, LengthError, DegenerateInputError) as e:
            raise UsageError(str(e)) from e
        result = {**payload, "provenance": provenance}
        print(json.dumps(result, indent=2))
        if hasattr(args, "out"):
            write_json(result, args.out)
        return EXIT_PASS if passed else EXIT_FAIL
    except UsageError as e:
        print(str(e), file=sys.stderr)
        print(json.dumps({"error": str(e), "exit": EXIT_USAGE}))
        return EXIT_USAGE
    except XprlabError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(json.dumps({"error": str(e), "type": type(e).__name__, "exit": EXIT_FAIL}))
        return EXIT_FAIL
    finally:
        config.bits, config.seed = saved


def main() -> None:
    sys.exit(run())
