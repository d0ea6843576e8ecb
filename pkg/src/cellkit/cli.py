"""``cellkit run <scenario.json> <command>``: batch runner for scenario files.

Exit status: 0 success, 2 invalid scenario, 3 unmet precondition, 4 budget or
precision failure.  Reports are canonical JSON (sorted keys) carrying the
scenario's sha256, so reruns are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from .cells import ClusteredCell, class_counts, fiber, is_regular, order_of
from .decomposition import (
    DEFAULT_MAX_ITER,
    decompose,
    minimality_audit,
    partition_ac1,
    partition_by_signature,
    rewrite_maximal_small,
    separate_subtrees,
    skolem_from_parts,
    union_fiber,
)
from .errors import (
    CellkitError,
    PrecisionError,
    PreconditionError,
    ScenarioError,
    UnknownBasePoint,
)
from .oracle import QuotientWindow, set_equal
from .scenario import Scenario, load_scenario
from .trees import (
    NonUniform,
    build_tree,
    is_subset_maximal,
    multiball_to_dot,
    tree_type,
)

COMMANDS = ("audit", "separate", "rewrite", "partition-ac1", "partition-signature",
            "skolem", "tree", "fiber")
EXIT_OK, EXIT_INTERNAL, EXIT_VALIDATION, EXIT_PRECONDITION, EXIT_PRECISION = 0, 1, 2, 3, 4


def atomic_write(path, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".cellkit-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def _need_cell(scn: Scenario) -> ClusteredCell:
    if scn.cell is None:
        raise ScenarioError(f"command needs a 'cell' entry in scenario {scn.name}")
    return scn.cell


def _pick(value):
    if value is None or value == "smallest":
        return "smallest"
    return int(value)


def _parts_json(X, parts, labels, window):
    verdicts = {}
    for s in X.base:
        v = set_equal(union_fiber(parts, s, window), fiber(X, s, window))
        verdicts[s] = {"ok": v.ok, "detail": v.detail}
    orders = []
    for c in parts:
        try:
            orders.append(order_of(c, window))
        except PreconditionError as e:
            orders.append(e.to_dict())
    return {
        "input_order": order_of(X, window),
        "parts": [dict(c.to_json(), label=_label(lb), order=o, regular=is_regular(c).ok)
                  for c, lb, o in zip(parts, labels, orders)],
        "union_equals_input": verdicts,
    }


def _label(lb):
    if isinstance(lb, tuple):
        return [_label(x) for x in lb]
    return lb


def cmd_audit(scn, window, args, dots):
    X = _need_cell(scn)
    rep = minimality_audit(X, window, args.ac1_pick)
    res = decompose(X, window, args.max_iter, args.ac1_pick)
    return {
        "audit": rep.to_json(),
        "decomposition": {
            "cells": [dict(c.to_json(), order=order_of(c, window)) for c in res.cells],
            "iterations": res.iterations,
            "capped": res.capped,
            "diagnostic": res.diagnostic,
        },
    }


def cmd_separate(scn, window, args, dots):
    sigma = scn.cell.centers if scn.cell is not None else scn.sigma
    trace = separate_subtrees(sigma, window, args.ac1_pick, args.strict_ac1)
    out = trace.to_json()
    dots.append(("before", multiball_to_dot(sigma)))
    if trace.sigma_prime is not None:
        dots.append(("after", multiball_to_dot(trace.sigma_prime)))
        if scn.cell is not None:
            X = scn.cell
            out["order_before"] = order_of(X, window)
            out["order_after"] = order_of(X.with_centers(trace.sigma_prime), window)
    return out


def cmd_rewrite(scn, window, args, dots):
    X = _need_cell(scn)
    rw = rewrite_maximal_small(X)
    eq = {s: set_equal(fiber(rw.cell, s, window), fiber(X, s, window)).ok for s in X.base}
    dots.append(("before", multiball_to_dot(X.centers)))
    dots.append(("after", multiball_to_dot(rw.cell.centers)))
    return {
        "branch": rw.branch,
        "ell": rw.ell,
        "input_order": order_of(X, window),
        "output_order": order_of(rw.cell, window),
        "output": rw.cell.to_json(),
        "same_point_set": eq,
    }


def cmd_partition_ac1(scn, window, args, dots):
    X = _need_cell(scn)
    res = partition_ac1(X)
    return dict(_parts_json(X, res.parts, res.labels, window), provenance=res.provenance)


def cmd_partition_signature(scn, window, args, dots):
    X = _need_cell(scn)
    res = partition_by_signature(X)
    return dict(_parts_json(X, res.parts, res.labels, window), provenance=res.provenance)


def cmd_skolem(scn, window, args, dots):
    if not scn.parts:
        raise ScenarioError("skolem needs a 'parts' list")
    f = skolem_from_parts(scn.sigma, scn.parts, window)
    return {"choice": {s: b.to_json() for s, b in sorted(f.items())}}


def _selected(scn, args):
    if args.base_point is None:
        return list(scn.base)
    if args.base_point not in scn.base:
        raise UnknownBasePoint(f"{args.base_point!r} is not a base point of {scn.name}")
    return [args.base_point]


def cmd_tree(scn, window, args, dots):
    names = _selected(scn, args)
    sigma = scn.sigma.restrict(names)
    tt = tree_type(sigma)
    out = {
        "tree_type": ({"uniform": False, "reason": tt.reason, "witness": [str(w) for w in tt.witness]}
                      if isinstance(tt, NonUniform) else
                      {"uniform": True, "d": tt.d, "ks": list(tt.ks)}),
        "subset_maximal": is_subset_maximal(sigma).ok,
        "branching_heights": {s: build_tree(sigma[s]).heights() if sigma[s] else [] for s in names},
    }
    dots.append(("", multiball_to_dot(sigma, names)))
    return out


def cmd_fiber(scn, window, args, dots):
    X = _need_cell(scn)
    names = _selected(scn, args)
    out = {"fibers": {s: fiber(X, s, window).ball_texts() for s in names}}
    try:
        out["classes"] = class_counts(X.restrict(names), window)
    except PreconditionError as e:
        out["classes"] = e.to_dict()
    return out


HANDLERS = {
    "audit": cmd_audit,
    "separate": cmd_separate,
    "rewrite": cmd_rewrite,
    "partition-ac1": cmd_partition_ac1,
    "partition-signature": cmd_partition_signature,
    "skolem": cmd_skolem,
    "tree": cmd_tree,
    "fiber": cmd_fiber,
}


def _window_arg(text):
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo:hi") from None


def _pick_arg(text):
    if text == "smallest":
        return text
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'smallest' or a residue") from None
    if v < 1:
        raise argparse.ArgumentTypeError("residue must be positive")
    return v


def build_parser():
    ap = argparse.ArgumentParser(prog="cellkit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="action", required=True)
    run = sub.add_parser("run", help="run one command on a scenario file")
    run.add_argument("scenario")
    run.add_argument("command", choices=COMMANDS)
    run.add_argument("--precision", type=int, metavar="N")
    run.add_argument("--window", type=_window_arg, metavar="lo:hi")
    run.add_argument("--ac1-pick", type=_pick_arg, default=None, metavar="smallest|RESIDUE")
    run.add_argument("--max-iter", type=int, default=None, metavar="K")
    run.add_argument("--strict-ac1", action="store_true", default=None,
                     help="refuse to separate unless ac_1 is constant on every fiber")
    run.add_argument("--base-point", metavar="S", help="restrict tree/fiber to one base point")
    run.add_argument("--dot", metavar="PATH")
    run.add_argument("--report", metavar="PATH")
    return ap


def _resolve_window(scn, args) -> QuotientWindow:
    w = scn.window
    lo, hi, N = w.lo, w.hi, w.N
    if args.precision is not None:
        if hi == N:
            hi = args.precision
        N = args.precision
    if args.window is not None:
        lo, hi = args.window
    try:
        return QuotientWindow(w.p, lo, min(hi, N), N)
    except ValueError as e:
        raise ScenarioError(f"bad window: {e}") from None


def execute(args):
    """Return ``(exit status, report dict, dot text or None)``."""
    report = {"command": args.command, "scenario_file": os.path.basename(args.scenario)}
    try:
        scn = load_scenario(args.scenario)
        report.update(scenario=scn.name, scenario_sha256=scn.sha256)
        opts = scn.options
        args.ac1_pick = _pick(args.ac1_pick if args.ac1_pick is not None else opts.get("ac1_pick"))
        if args.max_iter is None:
            args.max_iter = opts.get("max_iter", DEFAULT_MAX_ITER)
        if args.strict_ac1 is None:
            args.strict_ac1 = bool(opts.get("strict_ac1", False))
        window = _resolve_window(scn, args)
        window.check_budget()
        report["window"] = {"p": window.p, "lo": window.lo, "hi": window.hi, "N": window.N}
        dots = []
        report["result"] = HANDLERS[args.command](scn, window, args, dots)
        report["status"] = "ok"
        dot = None
        if dots:
            dot = "".join(f"// {label}\n{text}" if label else text for label, text in dots)
        return EXIT_OK, report, dot
    except CellkitError as e:
        err = e
    if isinstance(err, ScenarioError):
        code = EXIT_VALIDATION
    elif isinstance(err, PreconditionError):
        code = EXIT_PRECONDITION
    elif isinstance(err, PrecisionError):
        code = EXIT_PRECISION
    else:
        code = EXIT_INTERNAL
    report["status"] = "error"
    report["error"] = err.to_dict()
    return code, report, None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code, report, dot = execute(args)
    text = canonical_json(report)
    if args.report:
        atomic_write(args.report, text)
    else:
        sys.stdout.write(text)
    if code != EXIT_OK:
        sys.stderr.write(f"cellkit: {report['error']['error']}: {report['error']['message']}\n")
    if dot is not None and args.dot:
        atomic_write(args.dot, dot)
    return code


if __name__ == "__main__":
    sys.exit(main())
