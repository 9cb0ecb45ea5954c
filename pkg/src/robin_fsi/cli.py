"""Command-line experiment driver.

Subcommands: mms-convergence, benchmark-channel, stability-check,
iteration-count.  Every flag has a config-file equivalent (flat INI with
[physics], [scheme], [mesh], [run] sections); flags override file values
and the effective configuration is echoed into the output directory.
Exit codes: 0 success, 1 numerical failure, 2 usage/config error.
"""

import argparse
import concurrent.futures
import configparser
import os
import sys
import traceback

from . import benchmarks, mms, reports
from .coupling import SubiterationError
from .linalg import NoConvergenceError, SingularMatrixError

# flag name -> (section, key) in the config file
CONFIG_MAP = {
    "theta": ("scheme", "theta"),
    "alpha": ("scheme", "alpha"),
    "eps": ("scheme", "eps"),
    "tau": ("scheme", "tau"),
    "levels": ("mesh", "levels"),
    "h": ("mesh", "h"),
    "halve_eps": ("run", "halve_eps"),
    "scheme": ("run", "scheme"),
    "schemes": ("run", "schemes"),
    "T": ("run", "t_final"),
    "steps": ("run", "steps"),
    "outdir": ("run", "outdir"),
}

NUMERICAL_ERRORS = (
    SubiterationError,
    SingularMatrixError,
    NoConvergenceError,
    FloatingPointError,
    ZeroDivisionError,
)


class ConfigError(ValueError):
    pass


def _parse_alpha(text):
    if text == "opt":
        return "opt"
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"--alpha must be a number or 'opt', got {text!r}") from exc


def build_parser():
    parser = argparse.ArgumentParser(
        prog="robin-fsi",
        description="Partitioned fluid-structure interaction experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--outdir", help="output directory (default: .)")
        p.add_argument("--theta", type=float)
        p.add_argument("--alpha", help="number or 'opt'")
        p.add_argument("--eps", type=float)

    p = sub.add_parser("mms-convergence", help="refinement-ladder rate study")
    common(p)
    p.add_argument("--levels", type=int)
    p.add_argument("--halve-eps", dest="halve_eps", action="store_true",
                   default=None)
    p.add_argument("--scheme")
    p.add_argument("--T", type=float)

    p = sub.add_parser("benchmark-channel", help="pressure-pulse channel")
    common(p)
    p.add_argument("--schemes", help="comma-separated scheme list")
    p.add_argument("--tau", type=float)
    p.add_argument("--T", type=float)

    p = sub.add_parser("stability-check", help="zero-forcing energy estimate")
    common(p)
    p.add_argument("--tau", type=float)
    p.add_argument("--steps", type=int)

    p = sub.add_parser("iteration-count", help="scheme sub-iteration counts")
    common(p)
    p.add_argument("--schemes")
    p.add_argument("--tau", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--T", type=float)
    return parser


def load_config(path):
    cp = configparser.ConfigParser()
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config file: {exc}") from exc
    return cp

def effective(args, cp, name, default=None, cast=str):
    """Flag value if given, else config-file value, else default."""
    val = getattr(args, name, None)
    if val is not None:
        return val
    section, key = CONFIG_MAP[name]
    if cp.has_option(section, key):
        raw = cp.get(section, key)
        try:
            if cast is bool:
                return cp.getboolean(section, key)
            return cast(raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(
                f"bad value for [{section}] {key}: {raw!r}"
            ) from exc
    return default


def _echo_config(outdir, sections):
    reports.write_config_echo(sections, os.path.join(outdir, "config.ini"))


def cmd_mms_convergence(args, cp, outdir):
    theta = effective(args, cp, "theta", 0.5, float)
    alpha = _parse_alpha(str(effective(args, cp, "alpha", "100")))
    eps = effective(args, cp, "eps", 1e-4, float)
    levels = effective(args, cp, "levels", 4, int)
    halve = bool(effective(args, cp, "halve_eps", False, bool))
    scheme = effective(args, cp, "scheme", "alg1")
    T = effective(args, cp, "T", 0.3, float)
    if levels < 1:
        raise ConfigError("--levels must be >= 1")
    _echo_config(outdir, {
        "scheme": dict(theta=theta, alpha=alpha, eps=eps),
        "mesh": dict(levels=levels),
        "run": dict(scheme=scheme, t_final=T, halve_eps=halve,
                    outdir=outdir),
    })
    ladder = mms.default_ladder(levels, eps, halve_eps=halve)
    table = mms.convergence_study(ladder, theta=theta, alpha=alpha,
                                  scheme=scheme, T=T)
    table.to_csv(os.path.join(outdir, "rates.csv"))
    return 0


def cmd_benchmark_channel(args, cp, outdir):
    alpha = _parse_alpha(str(effective(args, cp, "alpha", "opt")))
    schemes = str(effective(args, cp, "schemes", "alg1,monolithic")).split(",")
    tau = effective(args, cp, "tau", 1e-4, float)
    eps = effective(args, cp, "eps", 1e-4, float)
    theta = effective(args, cp, "theta", 0.5, float)
    T = effective(args, cp, "T", 0.012, float)
    cfg = benchmarks.ChannelConfig(tau=tau, eps=eps, theta=theta, T=T)
    _echo_config(outdir, {
        "scheme": dict(theta=theta, alpha=alpha, eps=eps, tau=tau),
        "run": dict(schemes=",".join(schemes), t_final=T, outdir=outdir),
    })

    def one(scheme):
        result, _ = benchmarks.run_channel(scheme.strip(), cfg, alpha)
        return benchmarks.qoi_series(result, cfg)

    nw = mms.max_workers(len(schemes))
    with concurrent.futures.ThreadPoolExecutor(nw) as pool:
        series = list(pool.map(one, schemes))
    for s in series:
        s.to_csv(os.path.join(outdir, f"qoi_{s.scheme}.csv"))
    return 0


def cmd_stability_check(args, cp, outdir):
    theta = effective(args, cp, "theta", 0.5, float)
    tau = effective(args, cp, "tau", 0.02, float)
    steps = effective(args, cp, "steps", 200, int)
    eps = effective(args, cp, "eps", 1e-8, float)
    alpha = _parse_alpha(str(effective(args, cp, "alpha", "100")))
    _echo_config(outdir, {
        "scheme": dict(theta=theta, alpha=alpha, eps=eps, tau=tau),
        "run": dict(steps=steps, outdir=outdir),
    })
    if alpha == "opt":
        params = mms.SchemeParams(tau=tau)
        alpha = mms.alpha_opt(params, tau)
    result, _ = mms.stability_run(theta=theta, tau=tau, nsteps=steps,
                                  eps=eps, alpha=alpha)
    budget = result.energy
    reports.write_energy_series(budget, os.path.join(outdir, "energy.csv"))
    tol = 1e-10 * budget.energy[2]
    if budget.slack > tol:
        print(f"energy estimate violated: slack {budget.slack:.6e} > {tol:.6e}",
              file=sys.stderr)
        return 1
    print(f"energy estimate holds: slack {budget.slack:.6e}")
    return 0


def cmd_iteration_count(args, cp, outdir):
    schemes = str(effective(args, cp, "schemes", "alg1,rr,rn")).split(",")
    alpha = _parse_alpha(str(effective(args, cp, "alpha", "opt")))
    eps = effective(args, cp, "eps", 1e-3, float)
    tau = effective(args, cp, "tau", 1e-2, float)
    h = effective(args, cp, "h", 0.125, float)
    theta = effective(args, cp, "theta", 0.5, float)
    T = effective(args, cp, "T", 0.3, float)
    _echo_config(outdir, {
        "scheme": dict(theta=theta, alpha=alpha, eps=eps, tau=tau),
        "mesh": dict(h=h),
        "run": dict(schemes=",".join(schemes), t_final=T, outdir=outdir),
    })
    results = mms.iteration_study(
        [s.strip() for s in schemes], tau=tau, h=h, eps=eps,
        alpha=alpha, theta=theta, T=T,
    )
    reports.write_iteration_table(results,
                                  os.path.join(outdir, "iterations.csv"))
    for scheme, (avg, conv) in results.items():
        status = "" if conv else "  (did not converge)"
        print(f"{scheme}: {avg:.10g} average sub-iterations{status}")
    return 0


COMMANDS = {
    "mms-convergence": cmd_mms_convergence,
    "benchmark-channel": cmd_benchmark_channel,
    "stability-check": cmd_stability_check,
    "iteration-count": cmd_iteration_count,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cp = load_config(args.config)
        outdir = effective(args, cp, "outdir", ".")
        os.makedirs(outdir, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, cp, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        log = os.path.join(outdir, "error.log")
        with open(log, "w", newline="\n") as f:
            f.write(traceback.format_exc())
        print(f"numerical failure: {exc} (details in {log})", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
