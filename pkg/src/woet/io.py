"""Problem documents, report documents and CSV export.

Problem and report files are JSON objects tagged ``"schema": "woet/1"``.
Non-finite numbers are written as the strings ``"+inf"``, ``"-inf"`` and
``"nan"``.  Floats are written with Python's shortest round-trip repr,
so parsing and re-emitting a document reproduces every numeric field
byte for byte.

A problem document::

    {
      "schema": "woet/1",
      "mode": "woet",
      "grounds": {"rows": [0, 1], "cols": [0, 1]},
      "measures": {"mu1": [0.5, 0.5], "mu2": [0.5, 0.5]},
      "entropies": {"F1": {"kind": "Indicator1"}, "F2": {"kind": "KL"}},
      "cost": {"kind": "linear", "matrix": [[0, 1], [1, 0]]},
      "options": {"tol_gap": 1e-6, "max_iter": 50000, "mass_cap": "auto", "seed": 0}
    }

``grounds.cols`` may be omitted to reuse the row ground (required for the
martingale modes).  Optional sections: ``potentials`` (``form`` plus
``phi1``/``phi2``/``h``) for ``dual-only``, ``p`` for
``homogeneous-check`` and ``coupling`` for the monotonicity check.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path
from typing import Optional

import numpy as np

from .cost import make_cost
from .duality import DualForm, DualPair, dual_value, rc_pair
from .entropy import make_entropy
from .errors import (InfeasiblePair, InfeasibleProblem, InfeasibleTriple, IoError, ParseError,
                     ValidationError)
from .extended import INF
from .martingale import (MartingaleSpec, check_homogeneous_equivalence, dual_value_lambda_m,
                         DualTripleM, solve_moet, triple_from_rc)
from .measures import Coupling, DiscreteMeasure, GroundSet
from .solver import (ProblemSpec, SolverOptions, Status, c_monotonicity_check,
                     check_feasibility, solve)

log = logging.getLogger(__name__)

SCHEMA = "woet/1"
MODES = ("woet", "moet", "homogeneous-check", "dual-only", "feasibility", "monotone")


# -- extended-real JSON encoding ------------------------------------------------

def encode(obj):
    """Recursively convert numpy values and non-finite floats to JSON-safe data."""
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "+inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, Status) or isinstance(obj, DualForm):
        return obj.value
    return obj


_SPECIALS = {"+inf": INF, "inf": INF, "-inf": -INF, "nan": float("nan")}


def _num(v, where):
    if isinstance(v, bool):
        raise ParseError(f"field {where!r}: expected a number, got a boolean")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str) and v in _SPECIALS:
        return _SPECIALS[v]
    raise ParseError(f"field {where!r}: expected a number, got {v!r}")


def _array(v, where, ndim=None):
    try:
        if isinstance(v, list):
            out = [(_array(x, f"{where}[{k}]") if isinstance(x, list) else _num(x, f"{where}[{k}]"))
                   for k, x in enumerate(v)]
            arr = np.array(out, dtype=float)
        else:
            arr = np.array(_num(v, where))
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"field {where!r}: ragged array") from None
    if ndim is not None and arr.ndim not in ndim:
        raise ParseError(f"field {where!r}: expected {' or '.join(map(str, ndim))}-D array")
    return arr


def _load_json(src):
    if isinstance(src, (str, Path)) and not str(src).lstrip().startswith("{"):
        try:
            text = Path(src).read_text()
        except OSError as exc:
            raise IoError(f"cannot read {src}: {exc}") from None
    else:
        text = str(src)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("line 1: document must be a JSON object")
    schema = doc.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ParseError(f"field 'schema': unsupported schema {schema!r}, expected {SCHEMA!r}")
    return doc


def _section(doc, name, required=True):
    if name not in doc:
        if required:
            raise ParseError(f"missing section {name!r}")
        return None
    val = doc[name]
    if not isinstance(val, dict):
        raise ParseError(f"field {name!r}: expected an object")
    return val


def _get(sec, key, where):
    if key not in sec:
        raise ParseError(f"missing field '{where}.{key}'")
    return sec[key]


# -- problem documents ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProblemDocument:
    mode: str
    spec: object
    potentials: Optional[dict] = None
    p: tuple = (1.0,)
    coupling: Optional[np.ndarray] = None
    trials: int = 1000


def _options(doc):
    sec = _section(doc, "options", required=False) or {}
    known = {"tol_gap", "max_iter", "mass_cap", "seed"}
    extra = set(sec) - known
    if extra:
        raise ParseError(f"field 'options': unknown keys {sorted(extra)}")
    kw = {}
    if "tol_gap" in sec:
        kw["tol_gap"] = _num(sec["tol_gap"], "options.tol_gap")
    for key in ("max_iter", "seed"):
        if key in sec:
            v = sec[key]
            if isinstance(v, bool) or not isinstance(v, int):
                raise ParseError(f"field 'options.{key}': expected an integer")
            kw[key] = v
    if "mass_cap" in sec:
        v = sec["mass_cap"]
        kw["mass_cap"] = v if v in ("auto", None) else _num(v, "options.mass_cap")
    return SolverOptions(**kw)


def _entropy(sec, key):
    d = _get(sec, key, "entropies")
    if not isinstance(d, dict) or "kind" not in d:
        raise ParseError(f"field 'entropies.{key}': expected an object with 'kind'")
    params = {k: _num(v, f"entropies.{key}.{k}") for k, v in d.items() if k != "kind"}
    return make_entropy(d["kind"], **params)


def load_problem(src, mode=None):
    """Parse a problem document; ``mode`` overrides the document's own mode."""
    doc = _load_json(src)
    mode = mode or doc.get("mode", "woet")
    if mode not in MODES:
        raise ParseError(f"field 'mode': unknown mode {mode!r}; expected one of {list(MODES)}")

    g = _section(doc, "grounds")
    rows = GroundSet(_array(_get(g, "rows", "grounds"), "grounds.rows", ndim=(1, 2)))
    if "cols" in g and g["cols"] is not None:
        cpts = _array(g["cols"], "grounds.cols", ndim=(1, 2))
        c2 = cpts[:, None] if cpts.ndim == 1 else cpts
        same = c2.shape == rows.points.shape and np.array_equal(c2, rows.points)
        cols = rows if same else GroundSet(cpts)
    else:
        cols = rows

    m = _section(doc, "measures")
    mu1 = DiscreteMeasure(rows, _array(_get(m, "mu1", "measures"), "measures.mu1", ndim=(1,)))
    mu2 = DiscreteMeasure(cols, _array(_get(m, "mu2", "measures"), "measures.mu2", ndim=(1,)))
    e = _section(doc, "entropies")
    F1, F2 = _entropy(e, "F1"), _entropy(e, "F2")
    c = _section(doc, "cost")
    kind = _get(c, "kind", "cost")
    matrix = _array(c["matrix"], "cost.matrix", ndim=(2,)) if "matrix" in c else None
    opts = _options(doc)

    if mode in ("moet", "homogeneous-check"):
        if rows.dim != 1:
            raise ValidationError("moet mode needs 1-D points")
        if cols is not rows:
            raise ValidationError("moet mode needs identical row and column grounds")
        if kind not in ("martingale", "linear") or matrix is None:
            raise ValidationError("moet mode needs a cost matrix (kind 'martingale')")
        spec = MartingaleSpec(rows, mu1, mu2, F1, F2, matrix, opts)
    else:
        if kind in ("linear", "martingale") and matrix is None:
            raise ParseError("missing field 'cost.matrix'")
        spec = ProblemSpec(mu1, mu2, F1, F2,
                           make_cost(kind, rows, cols, matrix, c.get("theta")), opts)

    pot = _section(doc, "potentials", required=False)
    if pot is not None:
        pot = {k: (v if k == "form" else _array(v, f"potentials.{k}", ndim=(1,)))
               for k, v in pot.items()}
    if mode == "dual-only" and pot is None:
        raise ParseError("dual-only mode needs a 'potentials' section")
    ps = doc.get("p", 1.0)
    ps = tuple(float(_num(v, "p")) for v in (ps if isinstance(ps, list) else [ps]))
    coupling = doc.get("coupling")
    if coupling is not None:
        coupling = _array(coupling, "coupling", ndim=(2,))
    trials = doc.get("trials", 1000)
    return ProblemDocument(mode, spec, pot, ps, coupling, int(trials))


def parse_problem(src):
    """Validated :class:`ProblemSpec` or :class:`MartingaleSpec` from a path or JSON text."""
    return load_problem(src).spec


def problem_to_dict(spec, mode="woet"):
    """Inverse of :func:`parse_problem` (options and core sections only)."""
    if isinstance(spec, MartingaleSpec):
        rows = cols = spec.X
        cost = {"kind": "martingale", "matrix": spec.c}
    else:
        rows, cols = spec.cost.rows, spec.cost.cols
        cost = spec.cost.to_dict()
    pts = lambda G: G.line if G.dim == 1 else G.points  # noqa: E731
    grounds = {"rows": pts(rows)}
    same = cols is rows or (cols.points.shape == rows.points.shape
                            and np.array_equal(cols.points, rows.points))
    if not same:
        grounds["cols"] = pts(cols)
    o = spec.options
    return encode({
        "schema": SCHEMA, "mode": mode, "grounds": grounds,
        "measures": {"mu1": spec.mu1.weights, "mu2": spec.mu2.weights},
        "entropies": {"F1": spec.F1.to_dict(), "F2": spec.F2.to_dict()},
        "cost": cost,
        "options": {"tol_gap": o.tol_gap, "max_iter": o.max_iter, "mass_cap": o.mass_cap,
                    "seed": o.seed},
    })


# -- reports ------------------------------------------------------------------

@dataclass(eq=False)
class ReportFile:
    mode: str
    status: str
    primal_value: Optional[float] = None
    dual_bound: Optional[float] = None
    gap: Optional[float] = None
    coupling: Optional[np.ndarray] = None
    rows: Optional[np.ndarray] = None
    cols: Optional[np.ndarray] = None
    potentials: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    error: Optional[dict] = None

    def to_dict(self):
        return encode({"schema": SCHEMA, "kind": "report", **self.__dict__})

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _decode(obj):
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    if isinstance(obj, str) and obj in _SPECIALS:
        return _SPECIALS[obj]
    return obj


def parse_report(src):
    doc = _decode(_load_json(src))
    if doc.get("kind") != "report":
        raise ParseError("field 'kind': not a report document")
    kw = {k: doc.get(k) for k in ("mode", "status", "primal_value", "dual_bound", "gap", "error")}
    for k in ("coupling", "rows", "cols"):
        kw[k] = None if doc.get(k) is None else np.array(doc[k], dtype=float)
    for k in ("potentials", "diagnostics", "timings"):
        kw[k] = doc.get(k) or {}
    return ReportFile(**kw)


def emit_report(report):
    return report.to_json()


def _ground_list(G):
    return G.line if G.dim == 1 else G.points


def _from_solve(mode, rep, spec):
    return ReportFile(mode=mode, status=str(rep.status), primal_value=rep.primal_value,
                      dual_bound=rep.dual_bound, gap=rep.gap, coupling=rep.coupling.mass,
                      rows=_ground_list(rep.coupling.rows), cols=_ground_list(rep.coupling.cols),
                      potentials=dict(rep.potentials or {}), diagnostics=dict(rep.diagnostics))


def _infeasible(mode, reason):
    return ReportFile(mode=mode, status=str(Status.INFEASIBLE), diagnostics={"reason": reason})


def _as_problem(spec):
    return spec.problem() if isinstance(spec, MartingaleSpec) else spec


def run(spec, mode, potentials=None, p=(1.0,), coupling=None, trials=1000):
    """Dispatch a parsed problem to the solver, dual evaluators or checks."""
    t0 = time.perf_counter()
    try:
        out = _run(spec, mode, potentials, p, coupling, trials)
    except InfeasibleProblem as exc:
        out = _infeasible(mode, exc.reason)
    out.timings["seconds"] = time.perf_counter() - t0
    return out


def _run(spec, mode, potentials, p, coupling, trials):
    prob = _as_problem(spec)
    if mode == "feasibility":
        feas = check_feasibility(prob)
        verdict = feas.feasible
        diag = {"feasibility": feas.to_dict()}
        if verdict is None:
            # no sufficient condition: decide by attempting a solve
            rep = solve(prob.with_options(certify=False))
            verdict = bool(np.isfinite(rep.primal_value))
            diag["decided_by_solve"] = True
        status = Status.FEASIBLE if verdict else Status.INFEASIBLE
        if not verdict:
            diag["reason"] = feas.reason
        return ReportFile(mode=mode, status=str(status), diagnostics=diag)

    if mode == "dual-only":
        return _run_dual(spec, prob, potentials)

    if mode == "moet":
        rep = solve_moet(spec)
        out = _from_solve(mode, rep, spec)
        if rep.potentials:
            t = triple_from_rc(spec, np.array(rep.potentials["phi"]))
            out.potentials.update({"phi1": t.phi1, "phi2": t.phi2, "h": t.h})
            out.potentials["lambda_m_value"] = dual_value_lambda_m(spec, t)
        return out

    if mode == "homogeneous-check":
        checks = [check_homogeneous_equivalence(spec, p=pp) for pp in p]
        out = _from_solve(mode, checks[0].report, spec)
        out.diagnostics["homogeneous"] = [c.to_dict() for c in checks]
        out.diagnostics["max_discrepancy"] = max(c.discrepancy for c in checks)
        return out

    if mode == "monotone":
        if coupling is None:
            rep = solve(prob)
            out = _from_solve(mode, rep, prob)
            gamma = rep.coupling
        else:
            gamma = Coupling(prob.cost.rows, prob.cost.cols, coupling)
            out = ReportFile(mode=mode, status=str(Status.FEASIBLE), coupling=gamma.mass,
                             rows=_ground_list(gamma.rows), cols=_ground_list(gamma.cols))
        mono = c_monotonicity_check(prob, gamma, trials=trials, seed=prob.options.seed)
        out.diagnostics["monotonicity"] = mono.to_dict()
        return out

    rep = solve(prob)
    out = _from_solve(mode, rep, prob)
    if rep.coupling.mass.shape[0] >= 2:
        mono = c_monotonicity_check(prob, rep.coupling, trials=min(trials, 200),
                                    seed=prob.options.seed)
        out.diagnostics["monotonicity"] = mono.to_dict()
    return out


def _run_dual(spec, prob, pot):
    form = pot.get("form", "RcForm")
    diag = {"form": form}
    try:
        if form == "LambdaM":
            if not isinstance(spec, MartingaleSpec):
                raise ValidationError("LambdaM potentials need a martingale problem")
            triple = DualTripleM(pot["phi1"], pot["phi2"], pot["h"])
            value = dual_value_lambda_m(spec, triple)
        else:
            if form == "RcForm":
                phi = pot.get("phi", pot.get("phi2"))
                if phi is None:
                    raise ParseError("missing field 'potentials.phi'")
                pair = DualPair(None, phi, DualForm.RC)
                lam = rc_pair(prob, phi)
                diag["phi1"] = encode(lam.phi1)
            else:
                pair = DualPair(pot.get("phi1"), pot.get("phi2"), form)
            value = dual_value(prob, pair)
    except (InfeasiblePair, InfeasibleTriple) as exc:
        diag["reason"] = str(exc)
        return ReportFile(mode="dual-only", status=str(Status.INFEASIBLE), diagnostics=diag,
                          potentials={k: v for k, v in pot.items()})
    except KeyError as exc:
        raise ParseError(f"missing field 'potentials.{exc.args[0]}'") from None
    return ReportFile(mode="dual-only", status=str(Status.FEASIBLE), dual_bound=value,
                      potentials={k: v for k, v in pot.items()}, diagnostics=diag)


# -- files --------------------------------------------------------------------

def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def _fmt(x):
    return "%.17g" % x


def _coord(pt):
    pt = np.atleast_1d(pt)
    return ";".join(_fmt(v) for v in pt)


def _csv_text(header, rows):
    buf = StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def emit_csv(report, path):
    """Coupling as CSV with coordinate headers; potentials go to ``<stem>.potentials.csv``.

    A report without a coupling yields a header-only file.
    """
    path = Path(path)
    G = report.coupling
    if G is None or np.size(G) == 0:
        atomic_write(path, _csv_text(["x\\y"], []))
    else:
        G = np.asarray(G, dtype=float)
        header = ["x\\y"] + [_coord(y) for y in report.cols]
        body = [[_coord(x)] + [_fmt(v) for v in row] for x, row in zip(report.rows, G)]
        atomic_write(path, _csv_text(header, body))
    vec = {k: np.asarray(v, dtype=float) for k, v in (report.potentials or {}).items()
           if isinstance(v, (list, np.ndarray)) and np.ndim(v) == 1}
    if vec:
        n = max(len(v) for v in vec.values())
        names = sorted(vec)
        body = [[str(k)] + [_fmt(vec[name][k]) if k < len(vec[name]) else "" for name in names]
                for k in range(n)]
        atomic_write(path.with_suffix(".potentials.csv"), _csv_text(["index"] + names, body))


def read_csv(path):
    """Inverse of :func:`emit_csv` for the coupling file: ``(rows, cols, matrix)``."""
    try:
        with open(path, newline="") as fh:
            data = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    if not data:
        raise ParseError("line 1: empty CSV")
    parse = lambda s: np.array([float(v) for v in s.split(";")])  # noqa: E731
    cols = [parse(s) for s in data[0][1:]]
    rows = [parse(r[0]) for r in data[1:]]
    mat = np.array([[float(v) for v in r[1:]] for r in data[1:]], dtype=float)
    return rows, cols, mat.reshape(len(rows), len(cols))
