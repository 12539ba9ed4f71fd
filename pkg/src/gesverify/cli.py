"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 I/O failure, 4 domain error (for
example a zero-gap strategy asked to reject bad states).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .ghzw import (
    OPT_MU_X,
    ZeroGapError,
    best_on_grid,
    global_strategy,
    omega_rotation,
    optimal_xz,
    sample_complexity,
    spectral_gap,
    strategy_builder,
    sweep,
    write_sweep_csv,
)
from .linalg import LinearDependenceError
from .protocol import Custom, Depolarized, DensityOp, Ideal, SimConfig, WorstCase, run_protocol

EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_DOMAIN = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _dump(obj: dict) -> str:
    return json.dumps({"version": __version__, **obj}, sort_keys=True)


def parse_eps(spec: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (inclusive of ``stop``)."""
    if ":" in spec:
        start, stop, step = (float(x) for x in spec.split(":"))
        if step <= 0 or stop < start:
            raise ValueError(f"bad eps range {spec!r}")
        n = int(round((stop - start) / step))
        vals = [round(start + k * step, 12) for k in range(n + 1)]
    else:
        vals = [float(x) for x in spec.split(",") if x.strip()]
    for v in vals:
        if not 0 < v < 1:
            raise ValueError(f"eps values must lie in (0, 1), got {v}")
    return vals


def _default_mu(strategy: str) -> float:
    if strategy == "rotation":
        return float(OPT_MU_X)
    if strategy == "xz":
        return optimal_xz()[0]
    return 0.0


def _build(strategy: str, mu: float | None):
    if strategy == "global":
        return global_strategy()
    if mu is None:
        mu = _default_mu(strategy)
    return strategy_builder(strategy)(mu)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_classify(args) -> int:
    from .subspace2 import Subspace2, classification_report

    try:
        text = Path(args.input).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}", EXIT_INPUT)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed JSON: {exc}", EXIT_INPUT)
    try:
        v = Subspace2.from_json(data)
    except LinearDependenceError:
        raise CliError("basis not linearly independent", EXIT_INPUT)
    except (ValueError, TypeError) as exc:
        raise CliError(f"invalid subspace: {exc}", EXIT_INPUT)
    print(_dump(classification_report(v)))
    return EXIT_OK


def cmd_gap(args) -> int:
    s = _build(args.strategy, args.mu)
    report = spectral_gap(s)
    print(_dump({"strategy": s.label, **report.to_json()}))
    return EXIT_OK


def cmd_sweep(args) -> int:
    mus, nus = sweep(args.strategy, args.step, workers=args.workers)
    try:
        write_sweep_csv(args.out, mus, nus)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO)
    mu, nu = best_on_grid(mus, nus)
    name = "mu_Z" if args.strategy == "xz" else "mu_X"
    print(f"{args.strategy}: max nu = {nu:.12g} at {name} = {mu:.12g} ({len(mus)} points)")
    return EXIT_OK


def samples_table(eps_values, delta: float, exact: bool, xz_step: float = 0.001) -> list[tuple]:
    mode = "exact" if exact else "approx"
    _, nu_xz = optimal_xz(xz_step)
    nu_r = spectral_gap(omega_rotation(float(OPT_MU_X))).nu
    rows = []
    for eps in eps_values:
        n_g = sample_complexity(1.0, eps, delta, mode)
        rows.append((eps, n_g, sample_complexity(nu_xz, eps, delta, mode), sample_complexity(nu_r, eps, delta, mode)))
    return rows


def cmd_samples(args) -> int:
    if not 0 < args.delta < 1:
        raise CliError("delta must lie in (0, 1)", EXIT_INPUT)
    rows = samples_table(parse_eps(args.eps), args.delta, args.exact)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "N_G", "N_XZ", "N_R"])
    for eps, *ns in rows:
        w.writerow([f"{eps:.12g}", *ns])
    if args.out:
        try:
            Path(args.out).write_text(buf.getvalue())
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO)
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def _source(args, strategy):
    if args.source == "ideal":
        return Ideal()
    if args.source == "worst":
        return WorstCase(strategy, args.eps)
    if args.source == "depolarized":
        return Depolarized(p=args.p)
    if args.source == "custom":
        if not args.rho:
            raise CliError("--rho is required with --source custom", EXIT_INPUT)
        try:
            data = json.loads(Path(args.rho).read_text())
            if isinstance(data, dict) and "states" in data:
                return Custom([DensityOp.from_json(s) for s in data["states"]])
            return Custom(DensityOp.from_json(data))
        except OSError as exc:
            raise CliError(f"cannot read {args.rho}: {exc}", EXIT_INPUT)
        except (ValueError, TypeError, KeyError) as exc:
            raise CliError(f"invalid density operator: {exc}", EXIT_INPUT)
    raise CliError(f"unknown source {args.source!r}", EXIT_INPUT)


def cmd_simulate(args) -> int:
    strategy = _build(args.strategy, args.mu)
    nu = spectral_gap(strategy).nu
    try:
        rounds = sample_complexity(nu, args.eps, args.delta, "exact")
    except ZeroGapError:
        raise CliError("strategy has zero gap", EXIT_DOMAIN)
    source = _source(args, strategy)
    cfg = SimConfig(strategy, source, rounds, args.trials, args.seed, args.eps, nu)
    report = run_protocol(cfg, workers=args.workers)
    print(json.dumps(report.to_json(), sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _unit_open(name: str):
    def conv(text: str) -> float:
        x = float(text)
        if not 0 < x < 1:
            raise argparse.ArgumentTypeError(f"{name} must lie in (0, 1)")
        return x

    return conv


def _unit_closed(text: str) -> float:
    x = float(text)
    if not 0 <= x <= 1:
        raise argparse.ArgumentTypeError("value must lie in [0, 1]")
    return x


def _step(text: str) -> float:
    x = float(text)
    if not 0 < x <= 0.5:
        raise argparse.ArgumentTypeError("step must lie in (0, 0.5]")
    return x


def _positive_int(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _seed(text: str) -> int:
    n = int(text)
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gesverify", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify a 2-D two-qubit subspace given as JSON")
    p.add_argument("input", help='path to {"basis": [[[re,im] x4], [[re,im] x4]]}')
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("gap", help="spectral gap of a GHZ-W strategy")
    p.add_argument("--strategy", choices=["xz", "rotation", "global"], default="rotation")
    p.add_argument("--mu", type=_unit_closed, default=None,
                   help="mu(Z) for xz, mu(X) for rotation; defaults to the optimum")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("sweep", help="gap on a probability grid, written as CSV")
    p.add_argument("--strategy", choices=["xz", "rotation"], required=True)
    p.add_argument("--step", type=_step, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("samples", help="copies needed by the global, XZ and rotation strategies")
    p.add_argument("--eps", default="0.001:0.1:0.001", help="comma list or start:stop:step")
    p.add_argument("--delta", type=_unit_open("delta"), default=0.001)
    p.add_argument("--exact", action="store_true", help="use the exact logarithmic formula")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_samples)

    p = sub.add_parser("simulate", help="Monte Carlo run of the verification procedure")
    p.add_argument("--strategy", choices=["xz", "rotation", "global"], default="rotation")
    p.add_argument("--mu", type=_unit_closed, default=None)
    p.add_argument("--source", choices=["ideal", "worst", "depolarized", "custom"], default="worst")
    p.add_argument("--p", type=_unit_closed, default=0.1, help="depolarizing probability")
    p.add_argument("--rho", default=None, help="JSON density matrix for --source custom")
    p.add_argument("--eps", type=_unit_open("eps"), default=0.1)
    p.add_argument("--delta", type=_unit_open("delta"), default=0.05)
    p.add_argument("--trials", type=_positive_int, default=10_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "sweep" and args.step is None:
        args.step = 0.001 if args.strategy == "xz" else 0.05
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
