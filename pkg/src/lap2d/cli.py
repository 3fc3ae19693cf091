"""Command-line entry point: ``lap2d study | selftest | list-problems``.

Exit codes: 0 all checks pass, 1 some check failed, 2 configuration error,
3 solver failure.
"""
import argparse
import logging
import sys

from .errors import ConfigurationError, Lap2dError, SolverError
from .harness import (STUDIES, config_from_mapping, load_config, oracle_suite,
                      run_study, study_kernels, write_report)
from .problem import builtin_problems

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="lap2d", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("study", help="run a named study")
    s.add_argument("--config", help="key = value configuration file")
    s.add_argument("--study", choices=STUDIES)
    s.add_argument("--problem")
    s.add_argument("--out", dest="out_dir", help="report directory")
    s.add_argument("--L", dest="half_width", type=float, help="grid half-width")
    s.add_argument("--n", type=int, help="grid points per side (odd)")
    s.add_argument("--eps-ladder", dest="eps_ladder", help="comma-separated, decreasing")
    s.add_argument("--k-ladder", dest="k_ladder", help="comma-separated, decreasing")
    s.add_argument("--k", type=float)
    s.add_argument("--b", type=float)
    s.add_argument("--closure")

    t = sub.add_parser("selftest", help="kernel and oracle self-checks")
    t.add_argument("--out", dest="out_dir", help="optional report directory")

    sub.add_parser("list-problems", help="print the built-in problem catalog")
    return p


def _print_report(report):
    for line in report.summary_lines():
        print(line)
    print(f"{report.study}: {'PASS' if report.passed else 'FAIL'}")


def _study(args):
    overrides = {k: getattr(args, k) for k in
                 ("study", "problem", "out_dir", "half_width", "n", "eps_ladder",
                  "k_ladder", "k", "b", "closure")}
    if args.config:
        config = load_config(args.config, overrides)
    else:
        config = config_from_mapping(overrides)
    report = run_study(config)
    _print_report(report)
    print(f"report written to {config.out_dir}")
    return EXIT_OK if report.passed else EXIT_CHECK


def _selftest(args):
    reports = [study_kernels(), oracle_suite()]
    for report in reports:
        _print_report(report)
        if args.out_dir:
            write_report(report, args.out_dir)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


def _list_problems(_args):
    for name, problem in builtin_problems().items():
        print(f"{name:20s} R={problem.perturbation_radius:g} mean={problem.mean:g}  "
              f"{problem.notes}")
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"study": _study, "selftest": _selftest,
               "list-problems": _list_problems}[args.command]
    try:
        return handler(args)
    except SolverError as exc:
        print(f"solver failure: {exc} (residual={exc.residual}, iterations={exc.iterations})",
              file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigurationError, Lap2dError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
