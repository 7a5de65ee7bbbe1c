"""
Main Application – WRFQ toolkit command line
Features:
- quotient: fine quotient of a graph by a group given by generators
- congruence: Gamma(f), Gamma_0(f) or normalizer quotients of the Bruhat-Tits tree
- transfer / obstruction: f_n transfer with ambiguity resolution, obstruction spaces
- verify: replay the published results and write the CSV report
- export-dot: DOT text of a WCFG document
Exit codes: 0 success, 1 verification failure, 2 input error.
"""

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional
import logging

# Add src/ to path
sys.path.insert(0, os.path.dirname(__file__))

# Local modules
from settings import setup_logging
from errors import WrfqError
from cf_structures import from_matrix
from fine_graph import fine_quotient, quotient_weights, reduction
from finite_field import Poly
from btree_arith import congruence_quotient, gamma0_generators, normalizer_generators, quotient_by_overgroup
from obstruction import (Shell, bad_set, candidate_shell, coarse_obstruction_space, minimal_shell,
                         obstruction_space, projected_char_poly, t3_criterion)
from transfer import assemble_candidate, resolve_ambiguity
from serialization import emit_document, export_dot, load_document, parse_action_document
import verification

logger = logging.getLogger("wrfq")

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


# -------------------------------------------------------------------
# Helpers
# -------------------------------------------------------------------

def _write(text: str, path: Optional[str]):
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
        logger.info(f"Wrote {path}")
    else:
        sys.stdout.write(text)


def _json(data) -> str:
    return json.dumps(data, indent=2) + "\n"


# -------------------------------------------------------------------
# Subcommands
# -------------------------------------------------------------------

def cmd_quotient(args) -> int:
    graph, act = parse_action_document(Path(args.input).read_text())
    fq = fine_quotient(graph, act)
    w = reduction(fq, quotient_weights(graph, act), q_param=args.q)
    _write(emit_document(w), args.output)
    if args.dot:
        _write(export_dot(w), args.dot)
    return EXIT_OK


def cmd_congruence(args) -> int:
    f = Poly.parse(args.q, args.f)
    cq = congruence_quotient(args.q, f, args.depth)
    if args.mod_group == "gamma0":
        gens = gamma0_generators(args.q, f)
    elif args.mod_group == "normalizer":
        gens = normalizer_generators(args.q, f)
    else:
        gens = []
    w = quotient_by_overgroup(cq, gens)
    _write(emit_document(w), args.output)
    if args.dot:
        _write(export_dot(w), args.dot)
    return EXIT_OK


def cmd_transfer(args) -> int:
    wp = load_document(args.input)
    basis = obstruction_space(wp)
    report = assemble_candidate(wp, args.n, basis)
    if args.resolve:
        report = resolve_ambiguity(report, basis)
    _write(_json(report.to_dict()), args.output)
    if args.dot and report.resolution is not None:
        _write(export_dot(from_matrix(report.resolution)), args.dot)
    elif args.dot:
        logger.warning(f"No DOT output: transfer status is {report.status}")
    return EXIT_OK


def cmd_obstruction(args) -> int:
    w = load_document(args.input)
    if args.shell:
        shell = Shell(tuple(w.vertex(s.strip()) for s in args.shell.split(",")))
    elif args.minimal:
        shell = minimal_shell(w)
    else:
        shell = candidate_shell(w)
    basis = obstruction_space(w, shell)
    out = {
        "shell": [w.label(v) for v in shell.vertices],
        "dimension": basis.dimension,
        "coarse_dimension": coarse_obstruction_space(w, shell).dimension,
        "bad_set": [w.label(v) for v in bad_set(w, basis)],
        "char_poly": str(projected_char_poly(w, shell).as_expr()),
        "tree_with_one_leaf": t3_criterion(w),
    }
    _write(_json(out), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.list:
        for case in verification.suite().values():
            print(f"{case.id}\t{case.description}")
        return EXIT_OK
    report = verification.verify(args.case)
    verification.write_report(report, args.report)
    print(report[["case", "status", "detail"]].to_string(index=False))
    if not verification.all_passed(report):
        logger.error(f"{int((report['status'] != 'PASS').sum())} verification case(s) failed")
        return EXIT_FAILED
    return EXIT_OK


def cmd_export_dot(args) -> int:
    _write(export_dot(load_document(args.input)), args.output)
    return EXIT_OK


# -------------------------------------------------------------------
# Argument parsing
# -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wrfq", description="Weighted reduced fine quotients of Bruhat-Tits trees")
    parser.add_argument("--log-level", default=None, help="overrides logging.level from config.json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quotient", help="fine quotient of a graph by a group action")
    p.add_argument("--input", required=True)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--output")
    p.add_argument("--dot")
    p.set_defaults(func=cmd_quotient)

    p = sub.add_parser("congruence", help="congruence quotient of the Bruhat-Tits tree")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--f", required=True, help="level, e.g. 't^2+t+1'")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--mod-group", choices=["gamma", "gamma0", "normalizer"], default="gamma")
    p.add_argument("--output")
    p.add_argument("--dot")
    p.set_defaults(func=cmd_congruence)

    p = sub.add_parser("transfer", help="transfer a neighborhood matrix from P to Q with Q = nP")
    p.add_argument("--input", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--resolve", action="store_true")
    p.add_argument("--output")
    p.add_argument("--dot")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("obstruction", help="obstruction space of a WCFG")
    p.add_argument("--input", required=True)
    p.add_argument("--shell", help="comma-separated vertex labels")
    p.add_argument("--minimal", action="store_true", help="trim the candidate shell to a minimal one")
    p.add_argument("--output")
    p.set_defaults(func=cmd_obstruction)

    p = sub.add_parser("verify", help="run verification cases")
    p.add_argument("--case", action="append", help="case id, repeatable; default all")
    p.add_argument("--report", help="CSV path; default verification.report_csv")
    p.add_argument("--list", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-dot", help="DOT text of a WCFG document")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except (WrfqError, ValueError, KeyError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
