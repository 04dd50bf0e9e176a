"""Command line front end: ``certify``, ``solve`` and ``signs``.

Exit codes: 0 success, 1 configuration or usage error, 2 empty certificate
(or a failed sign pattern), 3 solver divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import report as rp
from .certificate import certify
from .config import ProblemConfig, load
from .errors import ConfigError, DivergenceError, HammersteinError
from .hypothesis import classify
from .kernel import verify_sign_pattern
from .solver import NODES_PER_PANEL, ConeSpec, plot_solution, solve

EXIT_OK, EXIT_CONFIG, EXIT_EMPTY, EXIT_DIVERGED = 0, 1, 2, 3

log = logging.getLogger("hammerstein")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _sibling(report: str | None, cfg: ProblemConfig, suffix: str) -> Path:
    if report:
        p = Path(report)
        return p.with_name(p.stem + suffix)
    return Path(Path(cfg.name).stem + suffix)


def _load(args) -> ProblemConfig:
    cfg = load(args.config)
    if args.seed is not None:
        cfg.certify.seed = args.seed
    return cfg


def cmd_certify(args) -> int:
    cfg = _load(args)
    if args.grid is not None:
        if args.grid < 2:
            raise ConfigError("--grid must be >= 2 for certify", "grid")
        cfg.certify.rho_count = args.grid
    opts = cfg.certify
    report_path = args.report or cfg.report
    rep = classify(cfg.kernel, cfg.cones)
    try:
        cert = certify(cfg.kernel, rep, cfg.f, lambdas=opts.lambdas, rhos=opts.rhos(),
                       samples=opts.samples, seed=opts.seed, best_window=opts.best_window)
    except HammersteinError as err:
        print(f"certify failed: {err}", file=sys.stderr)
        return EXIT_EMPTY
    text = rp.certificate_report(cfg.name, rep, cert, cfg.f.text or cfg.f.name, opts.seed,
                                 cfg.kernel.exact)
    _emit(text, report_path)
    if report_path:
        _sibling(report_path, cfg, "_conditions.csv").write_text(rp.condition_table(cert))
        if cert.profile is not None:
            _sibling(report_path, cfg, "_profile.csv").write_text(rp.profile_csv(cert.profile))
    if (args.plots or cfg.plots) and cert.profile is not None:
        rp.plot_profile(cert.profile, cert.N, cert.M, _sibling(report_path, cfg, "_profile.svg"))
    if not cert.any_window:
        print("empty window", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = _load(args)
    lam = args.lam if args.lam is not None else cfg.solver.lam
    if lam is None:
        raise ConfigError("no lambda given (use --lambda or [solver] lambda)", "solver.lambda")
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam:g}", "lambda")
    so = cfg.solver
    n = args.grid if args.grid is not None else so.grid
    if n < NODES_PER_PANEL or n % NODES_PER_PANEL:
        raise ConfigError(f"--grid must be a positive multiple of {NODES_PER_PANEL} for solve", "grid")
    report_path = args.report or cfg.report
    rep = classify(cfg.kernel, cfg.cones)
    try:
        sol = solve(cfg.kernel, cfg.f, lam, n, cone=ConeSpec.from_report(rep), slack=so.slack,
                    u0=so.u0, damping=so.damping, tol=so.tol, max_iter=so.max_iter)
    except DivergenceError as err:
        _emit(rp.divergence_dump(cfg.name, lam, str(err), err.history), report_path)
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    _emit(rp.solution_summary(cfg.name, sol, so.u0), report_path)
    if report_path or args.csv:
        Path(args.csv or _sibling(report_path, cfg, "_solution.csv")).write_text(sol.to_csv())
    if args.plots or cfg.plots:
        plot_solution(sol, _sibling(report_path, cfg, "_solution.svg"))
    return EXIT_OK


def cmd_signs(args) -> int:
    if args.n < 2:
        raise ConfigError("the sign pattern is defined for n >= 2", "n")
    if args.density < 2:
        raise ConfigError("density must be >= 2", "density")
    result = verify_sign_pattern(args.n, args.density)
    _emit(rp.signs_report(result), args.report)
    return EXIT_OK if result.passed else EXIT_EMPTY


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hammerstein", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, grid_help):
        p.add_argument("--report", help="write the report here instead of stdout")
        p.add_argument("--plots", action="store_true", help="write SVG plots next to the report")
        p.add_argument("--seed", type=int, help="sampling seed (default from config, else 42)")
        p.add_argument("--grid", type=int, help=grid_help)

    p = sub.add_parser("certify", help="check hypotheses and compute lambda windows")
    p.add_argument("config")
    common(p, "number of rho grid points")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("solve", help="solve the discretised equation by Picard iteration")
    p.add_argument("config")
    p.add_argument("--lambda", dest="lam", type=float, help="lambda (default from config)")
    p.add_argument("--csv", help="path of the solution CSV")
    common(p, "number of quadrature nodes")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("signs", help="verify the Lidstone mod-4 sign pattern")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--density", type=int, default=41)
    p.add_argument("--report")
    p.set_defaults(func=cmd_signs)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
