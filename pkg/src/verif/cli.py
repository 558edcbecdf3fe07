"""Command line interface.

    verif run --program P --backend {ieee|mca-rr|mca-pb|mca-full|cestac}
              --precision T --samples N --seed S --jobs J
              --format {json|csv} --out PATH [--trace] [--carrier C]
    verif corpus --manifest M [--jobs J]

Exit codes: 0 ok, 1 predicate failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import sys

from .checks import ManifestError, run_corpus
from .dsl import CheckError, DslRuntimeError, ParseError
from .harness import ExperimentSpec, emit_report, run_experiment
from .mca import BackendConfig, CARRIER_BITS


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="verif",
        description="stochastic floating-point verification harness")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one program under a backend")
    run.add_argument("--program", required=True,
                     help="kernel source path or corpus:<case-name>")
    run.add_argument("--backend", default="ieee",
                     choices=["ieee", "mca-rr", "mca-pb", "mca-full",
                              "cestac"])
    run.add_argument("--precision", type=int, default=None,
                     help="virtual precision t (default: carrier width)")
    run.add_argument("--carrier", default="binary64",
                     choices=["binary32", "binary64"])
    run.add_argument("--samples", type=int, default=100)
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--format", default="json", choices=["json", "csv"])
    run.add_argument("--out", required=True, help="report output path")
    run.add_argument("--trace", action="store_true")

    corpus = sub.add_parser("corpus", help="run a corpus manifest")
    corpus.add_argument("--manifest", required=True,
                        help="manifest path, or 'default'")
    corpus.add_argument("--jobs", type=int, default=1)
    return p


def _cmd_run(args) -> int:
    t = args.precision
    if t is None:
        t = CARRIER_BITS[args.carrier]
    try:
        backend = BackendConfig(kind=args.backend, t=t, carrier=args.carrier)
        spec = ExperimentSpec(
            program=args.program, backend=backend, n_samples=args.samples,
            root_seed=args.seed, jobs=args.jobs, trace=args.trace,
            fmt=args.format, out_path=args.out)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        report = run_experiment(spec)
    except (ParseError, CheckError, KeyError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except DslRuntimeError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 1
    emit_report(report, args.format, args.out)
    for o in report.outputs:
        print(f"{o['name']}: n={o['n']} mean={o['mean']!r} "
              f"std={o['std']!r} s10={o['s10']:.2f} s2={o['s2']:.2f} "
              f"nan={o['nan_count']}")
    print(f"report written to {args.out} "
          f"({report.wall_time_s:.2f}s)")
    return 0


def _cmd_corpus(args) -> int:
    try:
        result = run_corpus(args.manifest, jobs=args.jobs, log=print)
    except ManifestError as e:
        print(f"manifest error: {e}", file=sys.stderr)
        return 2
    n_ok = sum(1 for e in result.entries if e.ok)
    print(f"{n_ok}/{len(result.entries)} entries passed")
    return 0 if result.ok else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_corpus(args)


if __name__ == "__main__":
    sys.exit(main())
