"""Command-line entry points: run, validate, steady, oracle-compare, convergence."""

import argparse
from typing import Optional, Sequence

from oseen_phs.const import MESH_INVALID
from oseen_phs.mesh import mesh_summary, read_mesh_file, validate_mesh
from oseen_phs.scenario import MODES, load_config, run_scenario
from oseen_phs.utils.errors import OseenError, get_exception_msg
from oseen_phs.utils.logger import LogLevel, logger, set_verbosity


def _parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="oseen-phs", description="Port-Hamiltonian Oseen flow simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug messages")
    commands = parser.add_subparsers(dest="command", required=True)

    for mode in MODES:
        command = commands.add_parser(mode, help=f"{mode} a scenario config")
        command.add_argument("config", help="Path to a `key = value` scenario file")
        command.add_argument("--out-dir", default=None, help="Directory for ledger, summary and VTK files")
        command.add_argument("--solver", choices=("lu", "gmres"), default=None, help="Saddle-point solver backend")
        command.add_argument("--tol", type=float, default=None, help="Relative linear solver tolerance")
        command.add_argument("--stride", type=int, default=None, help="Keep every n-th state")
        command.add_argument("--force", action="store_true", help="Skip the initial compatibility check")
        command.add_argument("--dump-matrices", action="store_true", help="Write the assembled operators as triplets")

    validate = commands.add_parser("validate", help="Check a mesh file against the domain rules")
    validate.add_argument("mesh", help="Path to a mesh file")

    return parser.parse_args(argv)


def validate_command(path: str) -> int:
    try:
        mesh = read_mesh_file(path)
    except OseenError as e:
        logger.error(get_exception_msg(e))
        return e.exit_code

    logger.info(", ".join(f"{key}={value}" for key, value in mesh_summary(mesh).items()))
    violations = validate_mesh(mesh)
    for violation in violations:
        logger.warning(str(violation))
    if violations:
        logger.error(MESH_INVALID.format(len(violations)))
        return 3

    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs the command line.
    Returns:
        int: 0 success, 2 config error, 3 mesh error, 4 solver error, 5 acceptance failure.
    """

    args = _parse_args(argv)
    if args.verbose:
        set_verbosity(LogLevel.DEBUG)

    if args.command == "validate":
        return validate_command(args.mesh)

    overrides = {
        "out_dir": args.out_dir,
        "solver": args.solver,
        "tol": args.tol,
        "stride": args.stride,
        "force": True if args.force else None,
        "dump_matrices": True if args.dump_matrices else None,
    }
    try:
        config = load_config(args.config, overrides)
    except OseenError as e:
        logger.error(get_exception_msg(e))
        return e.exit_code

    return run_scenario(config, args.command)


if __name__ == "__main__":
    raise SystemExit(main())
