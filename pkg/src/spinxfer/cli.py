"""``spinxfer`` command-line entry point."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, commands
from .er_unitary import ORDERINGS
from .io import FormatError, RunConfig, decode_matrix, dump_report, load_config, read_phi_table, write_phi_table
from .operations import OperationError, OperationSpec, linsys_sender, monomial_sender

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise FormatError(f"{what}: expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise FormatError(f"{what}: expected {n} numbers, got {len(vals)}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--ordering", choices=ORDERINGS, help="product ordering of the receiver rotations")
    common.add_argument("--restarts", type=int, metavar="N")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--tol", type=float, metavar="X", help="residual tolerance")
    common.add_argument("--out", metavar="PATH", help="write the JSON report here")
    common.add_argument("--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="spinxfer", description="Spin-chain coherence transfer with a tunable receiver unitary.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("model", parents=[common], help="chain geometry, sector sizes and spectrum")

    sp = sub.add_parser("coefficients", parents=[common], help="transfer coefficients for an angle table")
    sp.add_argument("--phi", metavar="PATH", required=True)

    sp = sub.add_parser("verify-table", parents=[common], help="check the published tables")
    sp.add_argument("--table-dir", metavar="PATH", help="directory holding the four angle tables")
    sp.add_argument("--all-orderings", action="store_true", help="evaluate every product ordering")

    sp = sub.add_parser("optimize", parents=[common], help="multi-start search for the configured operation")
    sp.add_argument("--phi-out", metavar="PATH", help="where to write the best angle table")
    sp.add_argument("--workers", type=int, metavar="N")

    sp = sub.add_parser("apply", parents=[common], help="send a sender state through the chain")
    sp.add_argument("--phi", metavar="PATH", required=True)
    sp.add_argument("--sender", metavar="PATH", help="JSON 4x4 matrix as rows of [re, im] pairs")

    sp = sub.add_parser("solve-linsys", parents=[common], help="solve a 2x2 real system through the chain")
    sp.add_argument("--A", dest="A", metavar="a11,a12,a21,a22", default="0.4,0.3,0.6,0.2")
    sp.add_argument("--b", dest="b", metavar="b1,b2", default="0.035,0.04")
    sp.add_argument("--phi", metavar="PATH")
    sp.add_argument("--workers", type=int, metavar="N")
    return p


def resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    search = {}
    if args.restarts is not None:
        search["restarts"] = args.restarts
    if args.seed is not None:
        search["seed"] = args.seed
    if args.tol is not None:
        search["residual_tol"] = args.tol
    if getattr(args, "workers", None) is not None:
        search["workers"] = args.workers
    ordering = args.ordering or config.ordering
    search["ordering"] = ordering
    search["verbose"] = bool(args.verbose)
    try:
        search_cfg = dataclasses.replace(config.search, **search)
    except ValueError as exc:
        raise FormatError(f"search: {exc}") from None
    return dataclasses.replace(config, search=search_cfg, ordering=ordering)


def _default_sender(spec: OperationSpec) -> np.ndarray:
    if spec.kind == "linsys":
        return linsys_sender(spec.A @ np.array([0.05, 0.05]))
    return monomial_sender(0.1)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        config = resolve_config(args)
        cmd = args.command
        if cmd == "model":
            report, code = commands.cmd_model(config)
        elif cmd == "coefficients":
            report, code = commands.cmd_coefficients(config, read_phi_table(args.phi),
                                                     pattern_tol=args.tol or commands.PATTERN_TOL)
        elif cmd == "verify-table":
            orderings = list(ORDERINGS) if args.all_orderings else None
            report, code = commands.cmd_verify_table(config, args.table_dir, orderings=orderings)
        elif cmd == "optimize":
            report, code, result = commands.cmd_optimize(config)
            phi_out = args.phi_out or config.io.get("phi_out")
            if phi_out and result.best_phi is not None:
                write_phi_table(result.best_phi, phi_out)
                report["phi_file"] = str(phi_out)
        elif cmd == "apply":
            rho = (decode_matrix(json.loads(Path(args.sender).read_text(encoding="utf-8")))
                   if args.sender else _default_sender(config.operation))
            report, code = commands.cmd_apply(config, read_phi_table(args.phi), rho)
        else:
            A = np.array(_floats(args.A, 4, "--A")).reshape(2, 2)
            b = np.array(_floats(args.b, 2, "--b"))
            phi = read_phi_table(args.phi) if args.phi else None
            report, code = commands.cmd_solve_linsys(config, A, b, phi)
    except (FormatError, OperationError, commands.LinsysError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"spinxfer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = dump_report(report, args.out or config.io.get("report"))
    print(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
