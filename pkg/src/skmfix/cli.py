"""Command-line driver: ``skmfix {simulate,bound,qlearn,verify}``.

Exit codes: 0 success, 1 runtime or verification failure, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import sys

from . import bounds as B
from .errors import BudgetExceededError, DomainError, MdpFormatError, PreconditionError
from .harness import OPERATORS, ExperimentConfig, emit_csv, run_experiment
from .sequences import StepsizeSchedule, parse_exponent
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _int(token: str) -> int:
    """Integers written as 10000 or 1e4."""
    try:
        v = float(token)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {token!r}") from None
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {token!r}")
    return int(v)


def _int_list(token: str):
    return [_int(t) for t in token.split(",") if t.strip()]


def _schedule_args(p, alpha_help="constant stepsize in (0,1), or 'auto'"):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--a", help="power exponent: alpha_n = 1/(n+1)**a; accepts 2/3 exactly")
    g.add_argument("--alpha", help=alpha_help)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skmfix", description="Stochastic Krasnoselskii-Mann iterations and their error bounds.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="Monte Carlo residuals of the stochastic KM iteration")
    sp.add_argument("--operator", choices=OPERATORS, default="sgd-quadratic")
    sp.add_argument("--noise", default="gaussian:1.0", help="'none' or <gaussian|rademacher|uniform>:<scale>")
    _schedule_args(sp)
    sp.add_argument("--n", type=_int, default=10**4)
    sp.add_argument("--reps", type=_int, default=100)
    sp.add_argument("--seed", type=_int, default=0)
    sp.add_argument("--out", help="CSV path (standard output if omitted)")
    sp.add_argument("--stride", type=_int, help="checkpoint spacing (default n/10)")
    sp.add_argument("--dim", type=_int, default=10)
    sp.add_argument("--bounds", help="comma list from general,power,constant,fixed_horizon,asymptote")

    bp = sub.add_parser("bound", help="evaluate an error bound at several n")
    bp.add_argument("--family", required=True, choices=("general", "constant", "power", "euclidean", "asymptote"))
    bp.add_argument("--kappa", type=float, default=1.0, help="kappa_bar")
    bp.add_argument("--mu", type=float, default=1.0)
    bp.add_argument("--sigma", type=float, default=1.0)
    bp.add_argument("--radius", type=float, default=1.0, help="dist(x0, Fix T) for the euclidean family")
    _schedule_args(
        bp,
        "constant stepsize, or 'auto': 1/(6 n**(2/3)) for constant, 1/sqrt(n+1) for euclidean",
    )
    bp.add_argument("--n-list", type=_int_list, required=True, help="comma-separated n values, e.g. 100,1e4")

    qp = sub.add_parser("qlearn", help="RVI-Q-learning experiment")
    qp.add_argument("--mdp", default="duff", help="MDP text file, or 'duff' for the built-in example")
    qp.add_argument("--a", default="1")
    qp.add_argument("--f", default="max", help="max | mean | component:<i>,<u>")
    qp.add_argument("--n", type=_int, default=10**4)
    qp.add_argument("--reps", type=_int, default=100)
    qp.add_argument("--seed", type=_int, default=0)
    qp.add_argument("--stride", type=_int, help="checkpoint spacing (default n/100)")
    qp.add_argument("--out", help="CSV path (standard output if omitted)")

    vp = sub.add_parser("verify", help="run a numerical verification suite")
    vp.add_argument("--suite", choices=tuple(SUITES), action="append", help="repeatable; default all")
    vp.add_argument("--fast", action="store_true", help="smaller sweeps")
    return ap


def _emit(summary, out):
    text = emit_csv(summary, out)
    if out is None:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    if args.a is None and args.alpha is None:
        raise DomainError("one of --a or --alpha is required")
    schedule = "power" if args.a is not None else "constant"
    token = args.a if args.a is not None else args.alpha
    if args.bounds is not None:
        names = tuple(b.strip() for b in args.bounds.split(",") if b.strip())
    elif schedule == "constant":
        names = ("constant", "fixed_horizon") if token.strip() == "auto" else ("constant",)
    else:
        a = parse_exponent(token)
        names = ("general", "power") if 0.5 <= a <= 1.0 else ("general",)
    stride = args.stride or max(1, args.n // 10)
    cfg = ExperimentConfig(
        scenario="skm",
        operator=args.operator,
        noise=args.noise,
        dim=args.dim,
        schedule=schedule,
        a_or_alpha=token,
        n_steps=args.n,
        stride=stride,
        replications=args.reps,
        master_seed=args.seed,
        bounds=names,
    )
    _emit(run_experiment(cfg), args.out)
    return EXIT_OK


def _bound_values(args):
    ns = args.n_list
    if not ns:
        raise DomainError("--n-list is empty")
    fam = args.family
    k, mu, sg = args.kappa, args.mu, args.sigma
    if fam == "euclidean":
        if args.a is not None:
            a = parse_exponent(args.a)
            return [B.euclidean_power(args.radius, mu, sg, a, n) for n in ns]
        if args.alpha is None:
            raise DomainError("euclidean family needs --a or --alpha")
        if args.alpha.strip() == "auto":
            return [B.euclidean_fixed_horizon(args.radius, mu, sg, n) for n in ns]
        s = StepsizeSchedule.constant(parse_exponent(args.alpha))
        return [B.bound_euclidean(args.radius, mu, sg, s, n) for n in ns]
    if fam in ("power", "asymptote"):
        if args.a is None:
            raise DomainError(f"{fam} family needs --a")
        a = parse_exponent(args.a)
        fn = B.bound_power if fam == "power" else B.asymptote_power
        return [fn(k, mu, sg, a, n) for n in ns]
    if fam == "constant":
        if args.alpha is None:
            raise DomainError("constant family needs --alpha")
        if args.alpha.strip() == "auto":
            return [B.fixed_horizon_rate(k, mu, sg, n) for n in ns]
        alpha = parse_exponent(args.alpha)
        return [B.bound_constant(k, mu, sg, alpha, n) for n in ns]
    # general
    if args.a is not None:
        s = StepsizeSchedule.power(parse_exponent(args.a))
    elif args.alpha is not None and args.alpha.strip() != "auto":
        s = StepsizeSchedule.constant(parse_exponent(args.alpha))
    else:
        raise DomainError("general family needs --a or a numeric --alpha")
    p = B.BoundParams(k, mu, sg, s)
    nus = p.nu(max(ns))
    return [B.bound_general(p, n, nus) for n in ns]


def cmd_bound(args) -> int:
    vals = _bound_values(args)
    lines = ["n,bound"] + [f"{n},{format(v, '.17g')}" for n, v in zip(args.n_list, vals)]
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_qlearn(args) -> int:
    cfg = ExperimentConfig(
        scenario="rvi_q",
        mdp=args.mdp,
        stabilizer=args.f,
        a_or_alpha=args.a,
        n_steps=args.n,
        stride=args.stride or max(1, args.n // 100),
        replications=args.reps,
        master_seed=args.seed,
    )
    summary = run_experiment(cfg)
    if summary.metadata.get("outside_theorem_range"):
        print(f"note: a = {args.a} lies outside (4/5, 1], the range where the RVI-Q residual rate is guaranteed", file=sys.stderr)
    _emit(summary, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    names = args.suite or list(SUITES)
    ok = True
    for name in names:
        checks, secs = run_suite(name, fast=args.fast)
        for c in checks:
            ok &= c.passed
            print(f"{'PASS' if c.passed else 'FAIL'} [{name}] {c.name}: {c.detail}")
        print(f"# {name}: {secs:.2f} s")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "bound": cmd_bound, "qlearn": cmd_qlearn, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except MdpFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (RuntimeError, FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
