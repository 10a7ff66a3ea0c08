"""Command-line front end: ``poprec <subcommand> [flags]``.

Exit codes are 0 on success, 1 on usage or input errors and 2 on numerical
or solver failures.  Results go to ``--out`` when given and to standard
output otherwise; diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from . import __version__
from .analysis import (
    BoundRow,
    hellinger_sq,
    lecam_pair,
    lossy_t_bounds,
    noisy_t_bounds,
    tv_distance,
    write_bound_table,
)
from .estimators import read_batch, unbiased_coefficients
from .lpsolve import LinearProgram, SolverStalled, solve
from .minimax import (
    FunctionalVector,
    LPFailure,
    delta_of_t,
    delta_tilde_of_t,
    format_record,
    record_of,
    synthesize_estimator,
    t_of_delta,
)
from .model import LOSSY, NOISY, ChannelModel, build_phi, to_rational
from .recovery import CachedEstimatorFactory, RecoveryConfig, recover_population, write_recovery
from .simharness import ExperimentConfig, SynthesisError, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
NUMERIC_ERRORS = (LPFailure, SolverStalled, SynthesisError, ArithmeticError, np.linalg.LinAlgError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _number(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return v


def _eps(args):
    return to_rational(args.eps_text) if getattr(args, "exact", False) else float(args.eps_text)


def _channel(args) -> ChannelModel:
    return ChannelModel(args.model, _eps(args))


@contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _fmt(v) -> str:
    return str(v) if isinstance(v, Fraction) else repr(float(v))


# ---------------------------------------------------------------------------
# subcommands


def cmd_phi(args) -> int:
    phi = build_phi(_channel(args), args.d, exact=args.exact)
    with _output(args.out) as fh:
        w = csv.writer(fh)
        for row in phi.entries:
            w.writerow([_fmt(v) for v in row])
    return EXIT_OK


def cmd_synthesize(args) -> int:
    phi = build_phi(_channel(args), args.d, exact=args.exact)
    res = synthesize_estimator(phi, FunctionalVector.e0(args.d), args.n)
    with _output(args.out) as fh:
        fh.write(format_record(record_of(res, phi)) + "\n")
    print(f"value {res.value!r} bias {res.bias_bound!r} sup_norm {res.sup_norm!r}", file=sys.stderr)
    return EXIT_OK


def cmd_lp_value(args) -> int:
    phi = build_phi(_channel(args), args.d)
    h = FunctionalVector.e0(args.d)
    if args.delta is not None:
        if args.dual_tilde:
            raise UsageError("--dual-tilde applies to --t only")
        res = t_of_delta(phi, args.delta)
    elif args.dual_tilde:
        res = delta_tilde_of_t(phi, h, args.t)
    else:
        res = delta_of_t(phi, h, args.t)
    print(f"{res.value:.12g}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    eps = float(args.eps_text)
    if args.model == LOSSY:
        b = lossy_t_bounds(args.delta, eps)
        lower, upper, cap = b.lower, b.upper, b.trivial_cap
        if b.note:
            print(b.note, file=sys.stderr)
    else:
        if args.d is None:
            raise UsageError("--d is required for the noisy model")
        b = noisy_t_bounds(args.delta, args.d, eps)
        lower, upper, cap = b.lower, b.upper, b.trivial_cap
    lp_value = math.nan
    if args.d is not None:
        lp_value = t_of_delta(build_phi(ChannelModel(args.model, eps), args.d), args.delta).value
    row = BoundRow(args.model, eps, args.delta, args.d if args.d is not None else 0, lp_value, lower, upper, cap)
    write_bound_table([row], stream=sys.stdout)
    return EXIT_OK


def cmd_lecam(args) -> int:
    pair = lecam_pair(args.delta, float(args.eps_text), args.d)
    with _output(args.out) as fh:
        fh.write(f"# separation={pair.separation!r} hellinger_sq={pair.hellinger_sq!r} bound={pair.hellinger_bound!r}\n")
        w = csv.writer(fh)
        w.writerow(["k", "pi", "pi_prime", "perturbation"])
        for k in range(args.d + 1):
            w.writerow([k, repr(float(pair.pi.probs[k])), repr(float(pair.pi_prime.probs[k])), repr(float(pair.perturbation[k]))])
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    doc["seed"] = args.seed
    config = ExperimentConfig.from_dict(doc)
    result = run_experiment(config)
    if args.out is None:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["n", "mse", "stderr", "certificate_upper"])
        for s in result.summary:
            w.writerow([s.n, repr(s.mse), repr(s.stderr), repr(s.certificate_upper)])
        sys.stdout.write(buf.getvalue())
    else:
        result.write_rows(args.out)
        result.write_summary(str(args.out) + ".summary.csv")
    return EXIT_OK


def cmd_recover(args) -> int:
    try:
        batch = read_batch(args.samples)
    except OSError as exc:
        raise UsageError(f"cannot read samples {args.samples}: {exc}") from exc
    if batch.model is not None and batch.model != args.model:
        raise UsageError(f"sample file declares model {batch.model}, but --model is {args.model}")
    channel = ChannelModel(args.model, float(args.eps_text))
    config = RecoveryConfig(args.delta, args.tau)
    factory = CachedEstimatorFactory(channel, batch.n, args.estimator)
    result = recover_population(batch, channel, config, factory)
    if args.out is None:
        for x, p in result.estimate.items():
            print(f"{x} {p!r}")
    else:
        write_recovery(result, args.out)
    if result.overflowed:
        print("warning: survivor count exceeded 1/delta at some level", file=sys.stderr)
    return EXIT_OK


def run_selftest() -> list[tuple[str, bool, str]]:
    """Quick invariant checks; each entry is ``(name, passed, detail)``."""
    out = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))

    def columns():
        worst = max(
            float(np.max(np.abs(build_phi(ChannelModel(k, e), d).column_sums() - 1)))
            for k in (LOSSY, NOISY) for e in (0.1, 0.3, 0.75) for d in (1, 5, 20)
        )
        return worst < 1e-12, f"max column-sum error {worst:.2e}"

    def tiny_lp():
        lp = LinearProgram([1, 1], "max")
        lp.add([1, 2], "<=", 4)
        lp.add([3, 1], "<=", 6)
        s = solve(lp, "rational")
        return s.value == Fraction(14, 5), f"value {s.value}"

    def duality():
        gap = 0.0
        for kind, eps in ((LOSSY, 0.6), (NOISY, 0.25)):
            phi = build_phi(ChannelModel(kind, eps), 6)
            h = FunctionalVector.e0(6)
            a = synthesize_estimator(phi, h, 1e4).value
            b = delta_of_t(phi, h, 1e-2).value
            gap = max(gap, abs(a - b))
        return gap <= 1e-7, f"max synthesis/modulus gap {gap:.2e}"

    def unbiased():
        d, eps = 8, Fraction(3, 4)
        g = unbiased_coefficients(d, eps, exact=True)
        phi = build_phi(ChannelModel(LOSSY, eps), d, exact=True)
        r = [sum(phi.entries[i, j] * g.g[i] for i in range(d + 1)) for j in range(d + 1)]
        return r == [1] + [0] * d, "exact Phi^T g = e_0"

    def bracket():
        rng = np.random.Generator(np.random.Philox(12345))
        worst = -1.0
        for _ in range(200):
            p, q = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
            tv, h2 = tv_distance(p, q), hellinger_sq(p, q)
            worst = max(worst, h2 / 2 - tv, tv - math.sqrt(h2 * (1 - h2 / 4)))
        return worst <= 1e-12, f"max violation {worst:.2e}"

    check("transition columns sum to one", columns)
    check("rational simplex on a small LP", tiny_lp)
    check("synthesis value equals modulus", duality)
    check("unbiased coefficients are exact", unbiased)
    check("TV and Hellinger bracket", bracket)
    return out


def cmd_selftest(args) -> int:
    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="poprec", description="Population recovery through lossy and noisy channels.")
    p.add_argument("--version", action="version", version=f"poprec {__version__}")
    sub = p.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True

    def model_flags(sp, need_d=True, exact=False):
        sp.add_argument("--model", required=True, choices=(LOSSY, NOISY), help="channel type")
        sp.add_argument("--eps", dest="eps_text", metavar="EPS", required=True, help="per-bit corruption probability")
        if need_d:
            sp.add_argument("--d", type=int, required=True, help="string length")
        if exact:
            sp.add_argument("--exact", action="store_true", help="parse eps as an exact rational and solve exactly")

    sp = sub.add_parser("phi", help="write the transition matrix as CSV")
    model_flags(sp, exact=True)
    sp.add_argument("--out", help="output CSV path (default: stdout)")
    sp.set_defaults(func=cmd_phi)

    sp = sub.add_parser("synthesize", help="synthesize the minimax linear estimator of P_0")
    model_flags(sp, exact=True)
    sp.add_argument("--n", type=_number, required=True, help="sample size")
    sp.add_argument("--out", help="output record path (default: stdout)")
    sp.set_defaults(func=cmd_synthesize)

    sp = sub.add_parser("lp-value", help="min-TV value at --delta, or the modulus at --t")
    model_flags(sp)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--delta", type=_number, help="separation for the min-TV program")
    g.add_argument("--t", type=_number, help="output budget for the modulus program")
    sp.add_argument("--dual-tilde", action="store_true", help="restrict the modulus to zero-mass perturbations")
    sp.set_defaults(func=cmd_lp_value)

    sp = sub.add_parser("bounds", help="closed-form bounds on the min-TV value as a CSV row")
    model_flags(sp, need_d=False)
    sp.add_argument("--delta", type=_number, required=True, help="separation")
    sp.add_argument("--d", type=int, help="string length; also solves the LP when given")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("lecam", help="write the two-point lower-bound pair for the lossy channel")
    sp.add_argument("--eps", dest="eps_text", metavar="EPS", required=True, help="erasure probability, above 1/2")
    sp.add_argument("--delta", type=_number, required=True, help="target separation")
    sp.add_argument("--d", type=int, required=True, help="string length")
    sp.add_argument("--out", help="output CSV path (default: stdout)")
    sp.set_defaults(func=cmd_lecam)

    sp = sub.add_parser("simulate", help="run a Monte Carlo risk experiment from a JSON config")
    sp.add_argument("--config", required=True, help="JSON experiment description")
    sp.add_argument("--seed", type=int, required=True, help="master seed (overrides the config)")
    sp.add_argument("--out", help="per-trial CSV path; the summary goes to <out>.summary.csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("recover", help="recover a full distribution from a corrupted sample file")
    sp.add_argument("--samples", required=True, help="sample file, one record per line")
    sp.add_argument("--model", required=True, choices=(LOSSY, NOISY), help="channel type")
    sp.add_argument("--eps", dest="eps_text", metavar="EPS", required=True, help="per-bit corruption probability")
    sp.add_argument("--delta", type=_number, required=True, help="target accuracy")
    sp.add_argument("--tau", type=_number, default=0.5, help="failure probability for median boosting")
    sp.add_argument("--estimator", default="lp", choices=("lp", "unbiased", "smoothed", "empirical"))
    sp.add_argument("--out", help="distribution output path; stats go to <out>.stats.csv")
    sp.set_defaults(func=cmd_recover)

    sp = sub.add_parser("selftest", help="run quick invariant checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"poprec {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"poprec {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"poprec {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
