"""CSV serialization of study results.

Reals are written with 17 significant digits so that every file parses
back to bit-identical floats. Each report type maps to a fixed file name
and column set; ``read_report`` inverts ``emit_report``.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .eigensolver import SpectrumResult
from .harmonic import HarmonicLevel, read_levels_csv, write_levels_csv
from .model import ClauseResult, ValidationReport
from .verify import (
    ConvergenceReport,
    DefectReport,
    PerssonResult,
    PsidoReport,
    QuasimodeDiagnostics,
    _safe_fit,
)

__all__ = ["emit_report", "read_report", "fmt", "COLUMNS", "FILE_NAMES"]

COLUMNS = {
    "converge": ["eps", "k", "E_k", "eps_times_e_k", "abs_error"],
    "defects": ["eps", "kind", "norm"],
    "harmonic": ["rank", "value", "well", "alpha"],
    "validate": ["clause", "passed", "violation", "detail"],
    "spectrum": ["k", "eigenvalue", "residual", "method"],
    "quasimode": ["eps", "m", "n", "well", "alpha", "gram", "rayleigh", "predicted"],
    "persson": ["eps", "radius", "center", "value", "potential_bound"],
    "psido": ["check", "eps", "order", "value"],
}
FILE_NAMES = {name: f"{name}.csv" for name in COLUMNS}


def fmt(x) -> str:
    """17-significant-digit text for reals, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _kind_of(report) -> str:
    if isinstance(report, ConvergenceReport):
        return "converge"
    if isinstance(report, DefectReport):
        return "defects"
    if isinstance(report, ValidationReport):
        return "validate"
    if isinstance(report, SpectrumResult):
        return "spectrum"
    if isinstance(report, QuasimodeDiagnostics):
        return "quasimode"
    if isinstance(report, PerssonResult):
        return "persson"
    if isinstance(report, PsidoReport):
        return "psido"
    if isinstance(report, (list, tuple)):
        if all(isinstance(r, HarmonicLevel) for r in report):
            return "harmonic"
        kinds = {_kind_of(r) for r in report}
        if len(kinds) == 1:
            return kinds.pop()
    raise TypeError(f"cannot serialize {type(report).__name__}")


def _rows(kind: str, report) -> List[list]:
    items = report if isinstance(report, (list, tuple)) else [report]
    out = []
    for rep in items:
        if kind == "converge":
            out += [list(r) for r in rep.rows]
        elif kind == "defects":
            out += [[eps, rep.kind, v] for eps, v in rep.rows]
        elif kind == "validate":
            out += [[c.clause, c.passed, c.violation, c.detail] for c in rep.clauses]
        elif kind == "spectrum":
            out += [[k + 1, w, r, rep.method] for k, (w, r) in enumerate(zip(rep.eigenvalues, rep.residuals))]
        elif kind == "quasimode":
            for m, (j, alpha) in enumerate(rep.levels):
                for n in range(len(rep.levels)):
                    a_str = " ".join(str(a) for a in alpha)
                    out.append([rep.eps, m, n, j, a_str, rep.gram[m, n], rep.rayleigh[m, n], rep.predicted[m]])
        elif kind == "persson":
            for c, v, b in zip(rep.centers, rep.values, rep.potential_bounds):
                out.append([rep.eps, rep.radius, " ".join(fmt(float(t)) for t in c), v, b])
        elif kind == "psido":
            out += [list(r) for r in rep.rows]
    return out


def emit_report(report, directory, name: str = None) -> Path:
    """Write ``report`` as ``<kind>.csv`` in ``directory`` and return the path.

    An empty list produces a header-only file; pass ``name`` to pick the
    kind explicitly in that case.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"output directory {directory} does not exist")
    if isinstance(report, (list, tuple)) and not report:
        kind = name or "converge"
    else:
        kind = name or _kind_of(report)
    path = directory / FILE_NAMES[kind]
    if kind == "harmonic":
        return write_levels_csv(list(report), path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS[kind])
        for row in _rows(kind, report):
            w.writerow([fmt(x) for x in row])
    return path


def _read(path) -> List[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _group(rows: Sequence[dict], key: str) -> dict:
    groups = {}
    for r in rows:
        groups.setdefault(r[key], []).append(r)
    return groups


def read_report(path, label: str = ""):
    """Parse a CSV written by ``emit_report`` back into its report object(s).

    Fits and diagnostics are recomputed from the parsed rows.
    """
    path = Path(path)
    kind = path.stem
    if kind not in COLUMNS:
        raise ValueError(f"unrecognized report file {path.name}")
    if kind == "harmonic":
        return read_levels_csv(path)
    rows = _read(path)
    if kind == "converge":
        data = [(float(r["eps"]), int(r["k"]), float(r["E_k"]), float(r["eps_times_e_k"]), float(r["abs_error"])) for r in rows]
        ks = max((d[1] for d in data), default=0)
        fits = {k: _safe_fit([(d[0], d[4]) for d in data if d[1] == k]) for k in range(1, ks + 1)}
        return ConvergenceReport(label, ks, data, fits)
    if kind == "defects":
        out = []
        for k, grp in _group(rows, "kind").items():
            data = [(float(r["eps"]), float(r["norm"])) for r in grp]
            out.append(DefectReport(k, data, _safe_fit(data), label))
        return out[0] if len(out) == 1 else out
    if kind == "validate":
        clauses = [ClauseResult(r["clause"], r["passed"] == "true", float(r["violation"]), r["detail"]) for r in rows]
        return ValidationReport(label, tuple(clauses))
    if kind == "spectrum":
        w = np.array([float(r["eigenvalue"]) for r in rows])
        res = np.array([float(r["residual"]) for r in rows])
        method = rows[0]["method"] if rows else "dense"
        return SpectrumResult(w, None, res, 0, method)
    if kind == "quasimode":
        out = []
        for eps, grp in _group(rows, "eps").items():
            size = int(math.isqrt(len(grp)))
            gram = np.zeros((size, size))
            ray = np.zeros((size, size))
            levels = [None] * size
            pred = np.zeros(size)
            for r in grp:
                m, n = int(r["m"]), int(r["n"])
                gram[m, n] = float(r["gram"])
                ray[m, n] = float(r["rayleigh"])
                levels[m] = (int(r["well"]), tuple(int(a) for a in r["alpha"].split()))
                pred[m] = float(r["predicted"])
            out.append(QuasimodeDiagnostics(float(eps), levels, gram, ray, pred))
        return out[0] if len(out) == 1 else out
    if kind == "persson":
        out = []
        for (eps, radius), grp in _group_pairs(rows, "eps", "radius").items():
            centers = np.array([[float(t) for t in r["center"].split()] for r in grp])
            vals = np.array([float(r["value"]) for r in grp])
            bounds = np.array([float(r["potential_bound"]) for r in grp])
            out.append(PerssonResult(float(eps), float(radius), centers, vals, bounds))
        return out[0] if len(out) == 1 else out
    data = [(r["check"], float(r["eps"]), int(r["order"]), float(r["value"])) for r in rows]
    return PsidoReport(data, label)


def _group_pairs(rows, k1, k2) -> dict:
    groups = {}
    for r in rows:
        groups.setdefault((r[k1], r[k2]), []).append(r)
    return groups
