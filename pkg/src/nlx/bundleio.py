"""Plain-text bundles and CSV report emission.

Bundle format (INI-style, parsed with configparser, case-sensitive keys):

    [tree]
    times = 0 1 2            ; strictly increasing date labels
    states = 0 1             ; state alphabet, size >= 2
    root = 0                 ; fixed root state

    [measures]
    P = 0.25 0.25 0.25 0.25  ; one weight per leaf, lexicographic leaf order

    [functionals]
    phi = 1 0 0 -1           ; one value per leaf

    [catalogue]
    order = P Q              ; measure names forming the penalty catalogue

    [penalty]
    0| |0 = 0.0              ; key is time|history|catalogue-index, history
    1|0|1 = 0.5              ; dot-separated ("-" for the root history)

    [ambiguity]
    members = P Q            ; worst-case set as catalogue names

Reports are CSV with the fixed header ``check,node,time,value,tolerance,
pass`` and %.12g numeric formatting; summaries are plain lines
``CHECK <name> <value> <tol> <PASS|FAIL>`` with failures listed first.
"""

import configparser
import csv
import io
from dataclasses import dataclass

import numpy as np

from .lattice import (AmbiguitySet, Functional, PathMeasure, PenaltyTable,
                      ScenarioTree)


def fmt(x):
    """Canonical numeric formatting for all emitted files."""
    return "%.12g" % float(x)


# ---------------------------------------------------------------- bundles

@dataclass
class Bundle:
    tree: ScenarioTree
    measures: dict            # name -> PathMeasure
    functionals: dict         # name -> Functional
    catalogue: list           # ordered measure names, possibly empty
    penalty: PenaltyTable     # None if the bundle declares no penalties
    ambiguity: AmbiguitySet   # None if the bundle declares no member set


class BundleFormatError(ValueError):
    pass


def _history_key(history):
    return "-" if not history else ".".join(str(s) for s in history)


def _parse_history(text):
    text = text.strip()
    if text in ("", "-"):
        return ()
    return tuple(int(tok) for tok in text.split("."))


def _parser():
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    return cp


def write_bundle(path, tree, measures=None, functionals=None, catalogue=None,
                 penalty=None, ambiguity=None):
    """Write a bundle; ``catalogue`` and ``ambiguity`` are measure-name lists."""
    cp = _parser()
    cp["tree"] = {
        "times": " ".join(str(t) for t in tree.times),
        "states": " ".join(str(s) for s in tree.states),
        "root": str(tree.root_history[0]),
    }
    if measures:
        cp["measures"] = {name: " ".join(fmt(w) for w in P.weights)
                          for name, P in measures.items()}
    if functionals:
        cp["functionals"] = {name: " ".join(fmt(v) for v in phi.values)
                             for name, phi in functionals.items()}
    if catalogue:
        cp["catalogue"] = {"order": " ".join(catalogue)}
    if penalty is not None:
        cp["penalty"] = {
            f"{k}|{_history_key(h)}|{i}": fmt(v)
            for (k, h, i), v in sorted(penalty.entries.items())}
    if ambiguity is not None:
        cp["ambiguity"] = {"members": " ".join(ambiguity)}
    with open(path, "w") as fh:
        cp.write(fh)


def read_bundle(path):
    cp = _parser()
    with open(path) as fh:
        cp.read_file(fh)
    if "tree" not in cp:
        raise BundleFormatError("bundle lacks a [tree] section")
    sec = cp["tree"]
    try:
        times = tuple(int(t) for t in sec["times"].split())
        states = tuple(int(s) for s in sec["states"].split())
        root = (int(sec["root"]),)
    except (KeyError, ValueError) as exc:
        raise BundleFormatError(f"bad [tree] section: {exc}") from exc
    tree = ScenarioTree(times, states, root)
    measures = {}
    for name, text in (cp["measures"] if "measures" in cp else {}).items():
        weights = np.array([float(tok) for tok in text.split()])
        if weights.size != tree.n_leaves:
            raise BundleFormatError(
                f"measure {name}: {weights.size} weights, tree has "
                f"{tree.n_leaves} leaves")
        measures[name] = PathMeasure(weights)
    functionals = {}
    for name, text in (cp["functionals"] if "functionals" in cp else {}).items():
        values = np.array([float(tok) for tok in text.split()])
        if values.size != tree.n_leaves:
            raise BundleFormatError(f"functional {name}: wrong length")
        functionals[name] = Functional(values)
    catalogue = []
    if "catalogue" in cp:
        catalogue = cp["catalogue"].get("order", "").split()
        missing = [n for n in catalogue if n not in measures]
        if missing:
            raise BundleFormatError(f"catalogue names not defined: {missing}")
    penalty = None
    if "penalty" in cp:
        if not catalogue:
            raise BundleFormatError("[penalty] requires a [catalogue] order")
        entries = {}
        for key, text in cp["penalty"].items():
            try:
                k_txt, h_txt, i_txt = key.split("|")
                k, i = int(k_txt), int(i_txt)
                history = _parse_history(h_txt)
                value = float(text)
            except ValueError as exc:
                raise BundleFormatError(f"bad penalty entry {key!r}") from exc
            if not 0 <= i < len(catalogue):
                raise BundleFormatError(f"penalty index {i} out of range")
            tree.require_node(k, history)
            entries[(k, history, i)] = value
        penalty = PenaltyTable(
            tree, [measures[n] for n in catalogue], entries)
    ambiguity = None
    if "ambiguity" in cp:
        names = cp["ambiguity"].get("members", "").split()
        missing = [n for n in names if n not in measures]
        if missing:
            raise BundleFormatError(f"ambiguity names not defined: {missing}")
        if not names:
            raise BundleFormatError("[ambiguity] declares no members")
        idx = list(range(len(names)))
        members = {(k, h): idx for k in range(tree.n_times)
                   for h in tree.nodes_at(k)}
        ambiguity = AmbiguitySet(tree, [measures[n] for n in names], members)
    return Bundle(tree, measures, functionals, catalogue, penalty, ambiguity)


# ---------------------------------------------------------------- reports

REPORT_HEADER = ["check", "node", "time", "value", "tolerance", "pass"]


@dataclass
class ReportRow:
    check: str
    node: str      # e.g. a history key, grid point, or "-"
    time: object   # date label or float
    value: float
    tolerance: float
    passed: bool


def render_report(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in rows:
        w.writerow([r.check, r.node, r.time if isinstance(r.time, str)
                    else fmt(r.time), fmt(r.value), fmt(r.tolerance),
                    "pass" if r.passed else "fail"])
    return buf.getvalue()


def write_report(path, rows):
    with open(path, "w") as fh:
        fh.write(render_report(rows))


def summary_lines(rows):
    """One CHECK line per row, failures first (stable within each group)."""
    ordered = [r for r in rows if not r.passed] + [r for r in rows if r.passed]
    return [f"CHECK {r.check} {fmt(r.value)} {fmt(r.tolerance)} "
            f"{'PASS' if r.passed else 'FAIL'}" for r in ordered]


def write_summary(path, rows):
    with open(path, "w") as fh:
        for line in summary_lines(rows):
            fh.write(line + "\n")


def write_field_csv(path, field):
    """Value-field dump: ``x[,y],value`` in row-major node order."""
    axes = field.grid.axes()
    with open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if field.grid.dim == 1:
            w.writerow(["x", "value"])
            for x, v in zip(axes[0], field.values):
                w.writerow([fmt(x), fmt(v)])
        else:
            w.writerow(["x", "y", "value"])
            for i, x in enumerate(axes[0]):
                for j, y in enumerate(axes[1]):
                    w.writerow([fmt(x), fmt(y), fmt(field.values[i, j])])


def write_policy_csv(path, grid, dt, policy, controls):
    """Feedback-policy dump ``t,x,lambda_index`` per step and node."""
    xs = grid.axes()[0]
    with open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "lambda_index"])
        for step, arg in enumerate(policy):
            flat = np.asarray(arg).reshape(-1)[:xs.size]
            for x, i in zip(xs, flat):
                w.writerow([fmt(step * dt), fmt(x), int(i)])


def write_refinement_csv(path, levels):
    with open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "dx", "dt", "error"])
        for lv in levels:
            w.writerow([lv.level, fmt(lv.dx), fmt(lv.dt), fmt(lv.error)])


def write_laplace_csv(path, rows):
    with open(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "value", "limit", "gap"])
        for r in rows:
            w.writerow([fmt(r.eps), fmt(r.value), fmt(r.limit), fmt(r.gap)])
