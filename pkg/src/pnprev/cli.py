"""Command-line front end.

Subcommands mirror the solver layer: ``vrev`` and ``flux`` tabulate the
zero-current solution over a charge or diffusion-asymmetry grid, ``qrev``
inverts for the permanent charge at given potentials, ``profile`` prints the
internal singular-orbit record with its matching residuals, ``oracle`` runs
the finite-thickness ladder against the reduced answer, and ``ghk`` prints
the constant-field comparison value.

Output is CSV with a '#'-prefixed metadata block echoing the full
configuration, so every file is reproducible on its own.  Exit codes:
0 success, 1 oracle tolerance exceeded, 2 configuration error, 3 solver
failure, 4 existence-condition violation.
"""

import argparse
import sys

import numpy as np

from .bvp import find_reversal_bvp, solve_bvp
from .config import config_json, load_config
from .errors import (
    BracketFailure,
    ConfigurationError,
    ConvergenceError,
    NoReversalChargeError,
    PnprevError,
)
from .profile import matching_residual, reconstruct
from .solvers import ghk_reversal, reversal_potential, solve_zero_current, sweep

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_EXISTENCE = 4

_ERROR_TOKENS = {
    "NoReversalChargeError": "no-reversal-charge",
    "DegenerateSystemError": "degenerate",
    "BracketFailure": "bracket-failure",
    "DomainError": "domain-error",
    "ConvergenceError": "non-convergence",
}


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_csv(stream, command, config, header, rows):
    stream.write(f"# pnprev {command}\n")
    stream.write(f"# config {config_json(config)}\n")
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def _solve_grid(config, threads):
    """Grid and parameter for vrev/flux: a Q0 sweep, a theta sweep, or one point."""
    if config.sweep is not None:
        if config.sweep.parameter == "V":
            raise ConfigurationError("sweep.parameter: V sweeps apply to qrev only")
        if config.sweep.parameter == "theta" and config.q0 is None:
            raise ConfigurationError("charge.Q0: required when sweeping theta")
        return sweep(
            config.sweep.parameter, config.sweep.grid(), config.bath, config.geometry,
            config.transport, Q0=config.q0, threads=threads,
        )
    if config.q0 is None:
        raise ConfigurationError("charge.Q0: required (or provide a sweep section)")
    return sweep("Q0", [config.q0], config.bath, config.geometry, config.transport, threads=threads)


def _check_vrev_bounds(config, result):
    l, r, z1 = config.bath.l, config.bath.r, config.bath.z1
    if l == r:
        return
    bound = abs(np.log(l / r)) / z1
    tol = 1e-9 * (1.0 + bound)
    if abs(result.Vrev) >= bound + tol or result.J * np.sign(l - r) < -1e-12 * (1.0 + abs(result.J)):
        raise BracketFailure(
            f"zero-current bounds violated at Q0={result.Q0}, theta={result.theta}: "
            f"Vrev={result.Vrev} (bound {bound}), J={result.J}; this indicates a solver bug"
        )


def _cmd_vrev(config, args):
    rows = []
    for row in _solve_grid(config, args.threads):
        if row.error is not None:
            token = _ERROR_TOKENS.get(row.error, row.error)
            rows.append((row.value, token, token, token, token, token, token))
            continue
        res = row.result
        _check_vrev_bounds(config, res)
        rows.append((res.Q0, res.theta, res.A, res.B, res.Vrev, res.J, res.residual_G2))
    return ("Q0", "theta", "A", "B", "Vrev", "J", "residual"), rows, EXIT_OK


def _cmd_flux(config, args):
    rows = []
    for row in _solve_grid(config, args.threads):
        if row.error is not None:
            token = _ERROR_TOKENS.get(row.error, row.error)
            rows.append((row.value, token, token, token, token))
            continue
        res = row.result
        rows.append((res.Q0, res.theta, res.J, res.A, res.B))
    return ("Q0", "theta", "J", "A", "B"), rows, EXIT_OK


def _cmd_qrev(config, args):
    if config.sweep is not None:
        if config.sweep.parameter != "V":
            raise ConfigurationError("sweep.parameter: qrev sweeps over V only")
        grid = config.sweep.grid()
    elif config.v is not None:
        grid = [config.v]
    else:
        raise ConfigurationError("potential.V: required (or provide a V sweep)")
    kwargs = {} if args.tol_override is None else {"qrev_tol": args.tol_override}
    table = sweep(
        "V", grid, config.bath, config.geometry, config.transport,
        threads=args.threads, **kwargs,
    )
    rows = []
    failures = 0
    for row in table:
        if row.error is not None:
            token = _ERROR_TOKENS.get(row.error, row.error)
            rows.append((row.value, token, "", ""))
            failures += 1
            continue
        res = row.result
        flag = res.multiplicity_flag or res.degenerate
        rows.append((res.Vtarget, res.Qrev, res.residual_g1, flag))
    code = EXIT_EXISTENCE if failures == len(rows) else EXIT_OK
    return ("V", "Qrev", "residual", "multiplicity_flag"), rows, code


def _cmd_profile(config, args):
    if config.q0 is None:
        raise ConfigurationError("charge.Q0: required for the profile command")
    if config.q0 == 0.0:
        raise ConfigurationError(
            "charge.Q0: the internal profile is degenerate at Q0 = 0; "
            "the zero-charge state has A = (1-alpha) l + alpha r with no layer jumps"
        )
    res = solve_zero_current(config.q0, config.transport, config.bath, config.geometry)
    prof = reconstruct(res.A, config.q0, res.Vrev, config.bath, config.geometry, config.transport)
    report = matching_residual(prof, config.q0, res.Vrev, config.bath, config.geometry, config.transport)
    rows = [("Q0", config.q0), ("theta", config.transport.theta), ("Vrev", res.Vrev)]
    for name in (
        "phi1", "phi2", "c1_1", "c2_1", "c1_2", "c2_2",
        "c1_1m", "c1_1p", "c1_2m", "c1_2p", "c2_1m", "c2_1p", "c2_2m", "c2_2p",
        "phi_1m", "phi_1p", "phi_2m", "phi_2p", "J1",
    ):
        rows.append((name, getattr(prof, name)))
    rows.append(("ystar", "n/a" if prof.ystar is None else prof.ystar))
    for label, value in report.residuals.items():
        rows.append((f"residual:{label}", value))
    rows.append(("residual_max", report.max_abs))
    return ("field", "value"), rows, EXIT_OK


def _cmd_oracle(config, args):
    if config.oracle is None:
        raise ConfigurationError("oracle: section required for the oracle command")
    if config.q0 is None:
        raise ConfigurationError("charge.Q0: required for the oracle command")
    tolerance = args.tol_override if args.tol_override is not None else config.oracle.tolerance
    v_reduced = float(
        reversal_potential(config.q0, config.transport.theta, config.bath, config.geometry)
    )
    rows = []
    failed = False
    last_diff = None
    for eps in config.oracle.epsilons:
        try:
            v_bvp = find_reversal_bvp(eps, config.q0, config.bath, config.geometry, config.transport)
        except (ConvergenceError, BracketFailure) as exc:
            rows.append((eps, _ERROR_TOKENS.get(type(exc).__name__, "non-convergence"), v_reduced, ""))
            failed = True
            continue
        last_diff = abs(v_bvp - v_reduced)
        rows.append((eps, v_bvp, v_reduced, last_diff))
        if config.oracle.fields_out:
            sol = solve_bvp(eps, v_bvp, config.q0, config.bath, config.geometry, config.transport)
            path = f"{config.oracle.fields_out}.eps{eps:g}.csv"
            with open(path, "w") as fh:
                _write_csv(
                    fh, "oracle-fields", config, ("x", "phi", "c1", "c2", "u"),
                    zip(sol.mesh, sol.phi, sol.c1, sol.c2, sol.u),
                )
    if failed:
        code = EXIT_SOLVER
    elif last_diff is not None and last_diff > tolerance:
        code = EXIT_TOLERANCE
    else:
        code = EXIT_OK
    return ("epsilon", "Vrev_bvp", "Vrev_reduced", "abs_diff"), rows, code


def _cmd_ghk(config, args):
    if config.sweep is not None:
        if config.sweep.parameter != "theta":
            raise ConfigurationError("sweep.parameter: ghk sweeps over theta only")
        thetas = config.sweep.grid()
    else:
        thetas = [config.transport.theta]
    rows = [(t, float(ghk_reversal(t, config.bath))) for t in thetas]
    return ("theta", "Vghk"), rows, EXIT_OK


_COMMANDS = {
    "vrev": _cmd_vrev,
    "flux": _cmd_flux,
    "qrev": _cmd_qrev,
    "profile": _cmd_profile,
    "oracle": _cmd_oracle,
    "ghk": _cmd_ghk,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pnprev",
        description="zero-current solvers for two-species channel electrodiffusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("vrev", "reversal potential over a Q0 or theta grid"),
        ("flux", "zero-current flux over a Q0 or theta grid"),
        ("qrev", "reversal permanent charge for given potentials"),
        ("profile", "internal singular-orbit record with matching residuals"),
        ("oracle", "finite-thickness BVP ladder vs the reduced answer"),
        ("ghk", "constant-field reversal potential for comparison"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML or JSON configuration file")
        p.add_argument("--out", default=None, help="output path ('-' for stdout)")
        p.add_argument("--format", choices=["csv"], default=None, help="output format")
        p.add_argument("--threads", type=int, default=1, help="concurrent sweep rows")
        p.add_argument(
            "--tol-override", type=float, default=None, dest="tol_override",
            help="override the qrev residual target / oracle comparison tolerance",
        )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except (ConfigurationError, OSError) as exc:
        print(f"pnprev: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        header, rows, code = _COMMANDS[args.command](config, args)
    except ConfigurationError as exc:
        print(f"pnprev: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoReversalChargeError as exc:
        print(f"pnprev: {exc}", file=sys.stderr)
        return EXIT_EXISTENCE
    except (ConvergenceError, BracketFailure) as exc:
        print(f"pnprev: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PnprevError as exc:
        print(f"pnprev: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    out_path = args.out if args.out is not None else config.output.path
    if out_path == "-":
        _write_csv(sys.stdout, args.command, config, header, rows)
    else:
        with open(out_path, "w") as fh:
            _write_csv(fh, args.command, config, header, rows)
    return code


if __name__ == "__main__":
    sys.exit(main())
