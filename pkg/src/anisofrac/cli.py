"""Command-line entry point.

One config file describes one experiment; the subcommand picks what to
run.  Tables land in CSV files (written atomically: temp file in the
target directory, then rename), and every run prints a one-line
summary.  Exit status: 0 on success, 2 on validation failure, 3 when a
solver stopped without reaching its tolerance.

Identical config + seed gives byte-identical CSV output regardless of
--threads.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from typing import Optional

from ._parallel import resolve_threads
from .config import ConfigError, ExperimentConfig, parse_config
from .energy import anisotropic_energy
from .gridfn import FractionalParams, write_csv
from .homogenize import coefficient_from_kernel, commute_experiment, effective_star
from .kernel import verify_hypotheses
from .limits import (
    ConvergenceTable,
    LimitDensity,
    bbm_sweep,
    default_bbm_s_list,
    default_ms_s_list,
    ms_sweep,
)
from .variational import LocalProblem, NonlocalProblem, localization_sweep, solve_local, solve_nonlocal

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3

SUBCOMMANDS = (
    "energy",
    "bbm-sweep",
    "ms-sweep",
    "solve-nonlocal",
    "solve-local",
    "localize",
    "homogenize",
    "commute",
    "verify-kernel",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".anisofrac-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _table_csv(table: ConvergenceTable) -> str:
    lines = ["param,value,extrapolated,reference,rel_error"]
    for r in table.rows:
        lines.append(
            ",".join(
                [_fmt(r.param), _fmt(r.value), _fmt(r.extrapolated),
                 _fmt(r.reference), _fmt(r.rel_error)]
            )
        )
    return "\n".join(lines) + "\n"


def _emit(cfg: ExperimentConfig, text: str, what: str) -> None:
    if cfg.out_path:
        _atomic_write(cfg.out_path, text)
        print(f"{what} -> {cfg.out_path}")


def _run_energy(cfg: ExperimentConfig, threads: int) -> int:
    kern = cfg.make_kernel()
    u = cfg.sample_u()
    if cfg.s is None:
        raise ConfigError([(1, "energy needs params.s")])
    rep = anisotropic_energy(kern, u, FractionalParams(cfg.s, cfg.p))
    cols = ["s", "p", "value", "error_bound"]
    vals = [cfg.s, cfg.p, rep.value, rep.error_bound]
    if cfg.breakdown:
        cols += ["near_diagonal", "bulk", "tail"]
        vals += [rep.near_diagonal, rep.bulk, rep.tail]
    text = ",".join(cols) + "\n" + ",".join(_fmt(v) for v in vals) + "\n"
    _emit(cfg, text, "energy report")
    print(text, end="")
    print(
        f"energy s={cfg.s:g} p={cfg.p:g}: value={rep.value:.8g} "
        f"(error bound {rep.error_bound:.2g})"
    )
    return EXIT_OK


def _run_bbm_sweep(cfg: ExperimentConfig, threads: int) -> int:
    kern = cfg.make_kernel()
    u = cfg.sample_u()
    s_list = cfg.s_list or default_bbm_s_list()
    table = bbm_sweep(kern, u, cfg.p, s_list, threads=threads)
    _emit(cfg, _table_csv(table), "sweep table")
    last = table.final
    print(
        f"bbm-sweep: {len(table.rows)} rows, best={table.best_estimate():.8g} "
        f"reference={last.reference:.8g} rel_error={last.rel_error:.3g}"
    )
    return EXIT_OK


def _run_ms_sweep(cfg: ExperimentConfig, threads: int) -> int:
    kern = cfg.make_kernel()
    u = cfg.sample_u()
    s_list = cfg.s_list or default_ms_s_list()
    table = ms_sweep(kern, u, cfg.p, s_list, threads=threads)
    _emit(cfg, _table_csv(table), "sweep table")
    last = table.final
    print(
        f"ms-sweep: {len(table.rows)} rows, best={table.best_estimate():.8g} "
        f"reference={last.reference:.8g} rel_error={last.rel_error:.3g}"
    )
    return EXIT_OK


def _run_solve_nonlocal(cfg: ExperimentConfig, threads: int) -> int:
    kern = cfg.make_kernel()
    f = cfg.sample_f()
    if cfg.s is None:
        raise ConfigError([(1, "solve-nonlocal needs params.s")])
    res = solve_nonlocal(
        NonlocalProblem(
            kern=kern, fp=FractionalParams(cfg.s, cfg.p), grid=cfg.grid, source=f
        )
    )
    if cfg.out_path:
        import io

        buf = io.StringIO()
        write_csv(res.minimizer, buf)
        _atomic_write(cfg.out_path, buf.getvalue())
        print(f"minimizer -> {cfg.out_path}")
    print(
        f"solve-nonlocal s={cfg.s:g} p={cfg.p:g}: objective={res.objective:.8g} "
        f"residual={res.residual:.2g} iterations={res.iterations} "
        f"converged={res.converged}"
    )
    return EXIT_OK if res.converged else EXIT_NO_CONVERGENCE


def _run_solve_local(cfg: ExperimentConfig, threads: int) -> int:
    kern = cfg.make_kernel()
    f = cfg.sample_f()
    res = solve_local(
        LocalProblem(
            grid=cfg.grid, p=cfg.p, source=f, density=LimitDensity(kern, cfg.p)
        )
    )
    if cfg.out_path:
        import io

        buf = io.StringIO()
        write_csv(res.minimizer, buf)
        _atomic_write(cfg.out_path, buf.getvalue())
        print(f"minimizer -> {cfg.out_path}")
    print(
        f"solve-local p={cfg.p:g}: objective={res.objective:.8g} "
        f"residual={res.residual:.2g} iterations={res.iterations} "
        f"converged={res.converged}"
    )
    return EXIT_OK if res.converged else EXIT_NO_CONVERGENCE


def _run_localize(cfg: ExperimentConfig, threads: int) -> int:
    kern = cfg.make_kernel()
    f = cfg.sample_f()
    s_list = cfg.s_list or default_bbm_s_list()
    table = localization_sweep(kern, cfg.p, f, s_list, threads=threads)
    _emit(cfg, _table_csv(table), "distance table")
    print(
        f"localize: {len(table.rows)} rows, final distance={table.final.value:.8g}"
    )
    return EXIT_OK


def _run_homogenize(cfg: ExperimentConfig, threads: int) -> int:
    kern = cfg.make_kernel()
    coeff = coefficient_from_kernel(kern, cfg.p)
    star = effective_star(coeff)
    a_bar = coeff.mean()
    gap = a_bar - star.value
    text = (
        "A_star_formula,A_star_oracle,A_bar,gap\n"
        + ",".join(_fmt(v) for v in (star.formula_value, star.value, a_bar, gap))
        + "\n"
    )
    _emit(cfg, text, "coefficients")
    print(
        f"homogenize p={cfg.p:g}: A*={star.value:.8g} "
        f"(formula {star.formula_value:.8g}, matches {star.matches}), "
        f"A_bar={a_bar:.8g}, gap={gap:.8g}"
    )
    return EXIT_OK


def _run_commute(cfg: ExperimentConfig, threads: int) -> int:
    kern = cfg.make_kernel()
    f = cfg.sample_f()
    s_list = cfg.s_list or default_bbm_s_list()
    res = commute_experiment(
        kern, cfg.p, f, cfg.eps_list, s_list, threads=threads
    )
    lines = ["path,param,value"]
    for eps, rel in res.eps_path:
        lines.append(f"eps,{_fmt(eps)},{_fmt(rel)}")
    for s, rel in res.s_path:
        lines.append(f"s,{_fmt(s)},{_fmt(rel)}")
    lines.append(f"summary,distance,{_fmt(res.distance)}")
    _emit(cfg, "\n".join(lines) + "\n", "commute table")
    print(
        f"commute p={cfg.p:g}: |u*-ubar|={res.distance:.8g} "
        f"gap={res.coefficients.gap:.8g} eps-path rel={res.eps_final_rel:.3g} "
        f"s-path rel={res.s_final_rel:.3g}"
    )
    return EXIT_OK


def _run_verify_kernel(cfg: ExperimentConfig, threads: int) -> int:
    kern = cfg.make_kernel()
    rep = verify_hypotheses(kern, cfg.samples, seed=cfg.seed)
    text = (
        "h1_violation,h2_violation,h3_slope,h3_residual,bounds_violation,passed\n"
        + ",".join(
            [_fmt(rep.h1_violation), _fmt(rep.h2_violation), _fmt(rep.h3_slope),
             _fmt(rep.h3_residual), _fmt(rep.bounds_violation),
             "1" if rep.passed else "0"]
        )
        + "\n"
    )
    _emit(cfg, text, "hypothesis report")
    verdict = "passes" if rep.passed else f"FAILS (witness {rep.witness})"
    print(
        f"verify-kernel {kern.name}: {verdict} "
        f"[H1 {rep.h1_violation:.2g}, H2 {rep.h2_violation:.2g}, "
        f"H3 slope {rep.h3_slope:.3g} residual {rep.h3_residual:.2g}]"
    )
    return EXIT_OK


_RUNNERS = {
    "energy": _run_energy,
    "bbm-sweep": _run_bbm_sweep,
    "ms-sweep": _run_ms_sweep,
    "solve-nonlocal": _run_solve_nonlocal,
    "solve-local": _run_solve_local,
    "localize": _run_localize,
    "homogenize": _run_homogenize,
    "commute": _run_commute,
    "verify-kernel": _run_verify_kernel,
}


def run(cfg: ExperimentConfig, subcommand: str, threads: Optional[int] = None) -> int:
    """Execute one experiment; returns the process exit status."""
    return _RUNNERS[subcommand](cfg, resolve_threads(threads))


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="anisofrac",
        description="anisotropic fractional energy laboratory",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment config file")
        sp.add_argument("--out", help="override output.path")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (or ANISOFRAC_THREADS)")
        sp.add_argument("--seed", type=int, default=None,
                        help="override params.seed")
        if name == "energy":
            sp.add_argument("--breakdown", action="store_true",
                            help="add the near/bulk/tail split to the report")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
        if args.out:
            cfg.out_path = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if getattr(args, "breakdown", False):
            cfg.breakdown = True
        return run(cfg, args.subcommand, threads=args.threads)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
