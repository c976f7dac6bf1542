"""Command-line entry point ``woet``.

Exit codes: 0 optimal/feasible, 2 infeasible, 3 iteration limit,
4 input error, 1 unexpected failure.  Log verbosity comes from the
``WOET_LOG`` environment variable (``error``, ``info`` or ``debug``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from . import io as wio
from .errors import IoError, ParseError, ValidationError, WoetError

EXIT_OK, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_ITER, EXIT_INPUT = 0, 1, 2, 3, 4

COMMANDS = {
    "solve": ("woet", "solve the primal problem and certify it with a dual bound"),
    "dual": ("dual-only", "evaluate the potentials given in the problem file"),
    "check-feasibility": ("feasibility", "run the feasibility conditions only"),
    "check-monotone": ("monotone", "look for C-monotonicity violations"),
    "moet": ("moet", "solve over martingale couplings"),
    "homog-check": ("homogeneous-check", "compare the homogeneous formulations"),
}


def _configure_logging():
    level = os.environ.get("WOET_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def build_parser():
    parser = argparse.ArgumentParser(prog="woet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("problem", help="problem file (JSON, schema woet/1)")
        p.add_argument("--tol", type=float, help="duality-gap tolerance")
        p.add_argument("--max-iter", type=int, help="iteration limit of the inner solvers")
        p.add_argument("--seed", type=int, help="seed for randomised checks")
        p.add_argument("--out", help="write the report JSON here")
        p.add_argument("--csv", help="write the coupling (and potentials) as CSV here")
        p.add_argument("--quiet", action="store_true", help="print nothing on success")
    return parser


def _with_options(doc, args):
    changes = {}
    if args.tol is not None:
        changes["tol_gap"] = args.tol
    if args.max_iter is not None:
        changes["max_iter"] = args.max_iter
    if args.seed is not None:
        changes["seed"] = args.seed
    if not changes:
        return doc
    opts = replace(doc.spec.options, **changes)
    return replace(doc, spec=replace(doc.spec, options=opts))


def _exit_code(report):
    return {"Infeasible": EXIT_INFEASIBLE, "IterLimit": EXIT_ITER}.get(report.status, EXIT_OK)


def _error(kind, exc, code):
    obj = {"schema": wio.SCHEMA, "error": {"type": kind, "message": str(exc)}}
    print(json.dumps(obj), file=sys.stdout)
    return code


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    mode = COMMANDS[args.command][0]
    try:
        doc = _with_options(wio.load_problem(args.problem, mode=mode), args)
        report = wio.run(doc.spec, mode, potentials=doc.potentials, p=doc.p,
                         coupling=doc.coupling, trials=doc.trials)
        text = report.to_json()
        if args.out:
            wio.atomic_write(args.out, text)
        if args.csv:
            wio.emit_csv(report, args.csv)
    except (ParseError, ValidationError, IoError, WoetError, ValueError) as exc:
        return _error(type(exc).__name__, exc, EXIT_INPUT)
    except Exception as exc:  # noqa: BLE001 - every failure must produce an error object
        logging.getLogger(__name__).debug("unexpected failure", exc_info=True)
        return _error(type(exc).__name__, exc, EXIT_FAIL)
    if not args.quiet:
        sys.stdout.write(text)
    return _exit_code(report)


if __name__ == "__main__":
    sys.exit(main())

