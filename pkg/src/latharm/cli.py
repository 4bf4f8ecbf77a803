"""Configuration-driven command-line front end.

Usage::

    latharm --config run.yaml --out results/ --command converge

The config is a YAML document. ``model`` names a built-in (M1, M2, M3) or
holds an inline definition (see ``model_from_config``). The remaining keys
parameterize the command; an ``assertions`` section overrides the default
pass/fail thresholds. Every run writes ``<command>.csv`` and
``summary.txt`` into the output directory.

Exit status: 0 all assertions pass, 1 some assertion failed, 2 bad
configuration, 3 a computation raised.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import yaml

from .eigensolver import lowest_eigenvalues
from .harmonic import merged_levels
from .lattice import assemble_hamiltonian, build_lattice, operator_norm
from .model import CatalogError, ModelError, ModelSpec, default_half_width, model_from_config, validate_hypotheses
from .report import emit_report
from .verify import (
    DEFECT_KINDS,
    convergence_study,
    localization_defects,
    persson_estimate,
    psido_study,
    quasimode_gram_and_rayleigh,
    trimmed_fit,
)

__all__ = ["COMMANDS", "ConfigError", "RunConfig", "load_config", "run", "main"]

COMMANDS = ("validate", "spectrum", "harmonic", "converge", "quasimode", "defects", "psido-check", "persson")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ERROR = 0, 1, 2, 3

DEFAULT_ASSERTIONS = {
    "min_slope": 1.1,
    "residual_tol": 1e-10,
    "level_tol": 1e-5,
    "quantization_tol": 1e-12,
    "moyal_slack": 0.2,
    "cv_ratio": 2.0,
    "gram_factor": 0.5,
}


def _g(x) -> str:
    return f"{float(x):.6g}"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field or line."""


@dataclass
class RunConfig:
    model: ModelSpec
    params: Dict[str, Any]
    assertions: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_ASSERTIONS))
    command: Optional[str] = None
    seed: int = 0

    def get(self, key, default=None):
        return self.params.get(key, default)

    def eps_list(self, minimum: int = 1) -> List[float]:
        raw = self.params.get("eps")
        if raw is None:
            raise ConfigError("field 'eps': missing")
        vals = raw if isinstance(raw, (list, tuple)) else [raw]
        try:
            vals = [float(v) for v in vals]
        except (TypeError, ValueError):
            raise ConfigError(f"field 'eps': expected numbers, got {raw!r}") from None
        if any(v <= 0 for v in vals):
            raise ConfigError("field 'eps': values must be positive")
        if len(set(vals)) != len(vals):
            raise ConfigError("field 'eps': values must be distinct")
        if len(vals) < minimum:
            raise ConfigError(f"field 'eps': need at least {minimum} value(s)")
        return vals


def load_config(path) -> RunConfig:
    """Parse and check a YAML run configuration."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"YAML parse error{where}: {getattr(exc, 'problem', exc)}") from None
    return config_from_mapping(doc)


def config_from_mapping(doc) -> RunConfig:
    if not isinstance(doc, Mapping):
        raise ConfigError("config root must be a mapping")
    if "model" not in doc:
        raise ConfigError("field 'model': missing")
    try:
        model = model_from_config(doc["model"])
    except (ModelError, CatalogError, TypeError, ValueError) as exc:
        msg = exc.args[0] if exc.args else exc
        raise ConfigError(f"field 'model': {msg}") from None
    assertions = dict(DEFAULT_ASSERTIONS)
    extra = doc.get("assertions") or {}
    if not isinstance(extra, Mapping):
        raise ConfigError("field 'assertions': expected a mapping")
    assertions.update(extra)
    command = doc.get("command")
    if command is not None and command not in COMMANDS:
        raise ConfigError(f"field 'command': unknown command {command!r}")
    params = {k: v for k, v in doc.items() if k not in ("model", "assertions", "command")}
    return RunConfig(model, params, assertions, command)


# ----------------------------------------------------------------------------
# commands; each returns (report, [(ok, message), ...])


def _half_width(cfg: RunConfig) -> float:
    L = cfg.get("half_width")
    return default_half_width(cfg.model) if L is None else float(L)


def _cmd_validate(cfg: RunConfig):
    rep = validate_hypotheses(cfg.model)
    lines = [(c.passed, f"clause {c.clause}" + (f": {c.detail}" if c.detail else "")) for c in rep.clauses]
    return rep, lines


def _cmd_spectrum(cfg: RunConfig):
    eps = cfg.eps_list()[0]
    k = int(cfg.get("k", 4))
    tol = float(cfg.get("tol", 1e-10))
    box = build_lattice(cfg.model.dimension, eps, _half_width(cfg), cfg.get("boundary", "dirichlet"))
    H = assemble_hamiltonian(cfg.model, box)
    res = lowest_eigenvalues(H, k, tol)
    bound = float(cfg.assertions["residual_tol"]) * operator_norm(H)
    worst = float(np.max(res.residuals))
    lines = [(worst <= bound, f"residuals max {_g(worst)} <= {_g(bound)} ({res.method}, N={box.size})")]
    return res, lines


def _cmd_harmonic(cfg: RunConfig):
    n_max = int(cfg.get("n_max", 4))
    levels = merged_levels(cfg.model, n_max)
    lines = [(True, f"level {lv.rank}: {_g(lv.value)} well {lv.well} alpha {list(lv.alpha)}") for lv in levels]
    expected = cfg.assertions.get("expected_levels")
    if expected is not None:
        tol = float(cfg.assertions["level_tol"])
        got = np.array([lv.value for lv in levels])
        exp = np.sort(np.asarray(expected, dtype=float))
        ok = len(exp) == len(got) and bool(np.all(np.abs(got - exp) <= tol))
        lines.append((ok, f"levels match expected within {tol}"))
    return levels, lines


def _cmd_converge(cfg: RunConfig):
    ks = int(cfg.get("k", 4))
    rep = convergence_study(cfg.model, ks, cfg.eps_list(4), cfg.get("half_width"), tol=float(cfg.get("tol", 1e-10)))
    floor = float(cfg.assertions["min_slope"])
    lines = []
    for k in range(1, ks + 1):
        s = rep.slope(k)
        lines.append((s >= floor, f"slope k={k}: {_g(s)} >= {floor}"))
    for key, idx in (("max_error_largest_eps", 0), ("max_error_smallest_eps", -1)):
        if key in cfg.assertions:
            eps = sorted({r[0] for r in rep.rows}, reverse=True)[idx]
            err = float(np.max(rep.scaled_errors(eps)))
            lim = float(cfg.assertions[key])
            lines.append((err <= lim, f"max |E_k/eps - e_k| at eps={_g(eps)}: {_g(err)} <= {lim}"))
    return rep, lines


def _parse_levels(raw, model: ModelSpec):
    if raw is None:
        return [(j, (0,) * model.dimension) for j in range(len(model.wells))]
    try:
        return [(int(j), tuple(int(a) for a in alpha)) for j, alpha in raw]
    except (TypeError, ValueError):
        raise ConfigError("field 'levels': expected a list of [well, [alpha...]] pairs") from None


def _cmd_quasimode(cfg: RunConfig):
    levels = _parse_levels(cfg.get("levels"), cfg.model)
    diags = [
        quasimode_gram_and_rayleigh(cfg.model, eps, levels, half_width=cfg.get("half_width"))
        for eps in sorted(cfg.eps_list(), reverse=True)
    ]
    factor = float(cfg.assertions["gram_factor"])
    lines = []
    for q in diags:
        lim = factor * math.sqrt(q.eps)
        lines.append((q.gram_defect <= lim, f"gram defect at eps={_g(q.eps)}: {_g(q.gram_defect)} <= {_g(lim)}"))
    if len(diags) >= 3:
        floor = float(cfg.assertions["min_slope"])
        for m, (j, alpha) in enumerate(levels):
            pts = [(q.eps, q.quotient_errors()[m]) for q in diags]
            try:
                s = trimmed_fit(pts).slope
            except ValueError:
                s = float("nan")
            lines.append((s >= floor, f"rayleigh slope well {j} alpha {list(alpha)}: {_g(s)} >= {floor}"))
    return diags, lines


def _cmd_defects(cfg: RunConfig):
    kinds = cfg.get("kinds", ["ims", "microlocal", "double_commutator"])
    if isinstance(kinds, str):
        kinds = [kinds]
    bad = [k for k in kinds if k not in DEFECT_KINDS]
    if bad:
        raise ConfigError(f"field 'kinds': unknown defect kind(s) {bad}")
    s = float(cfg.get("s", 0.4))
    eps = cfg.eps_list(3)
    floor = float(cfg.assertions["min_slope"])
    reps, lines = [], []
    for kind in kinds:
        rep = localization_defects(cfg.model, kind, eps, s=s, half_width=cfg.get("half_width"))
        reps.append(rep)
        lines.append((rep.slope >= floor, f"defect {kind} slope: {_g(rep.slope)} >= {floor}"))
    return reps, lines


def _cmd_psido(cfg: RunConfig):
    orders = [int(n) for n in cfg.get("orders", [1, 2, 3])]
    rep = psido_study(cfg.model, cfg.eps_list(3), orders=orders)
    a = cfg.assertions
    lines = []
    qmax = max(v for _, v in rep.values("quantization"))
    lines.append((qmax <= float(a["quantization_tol"]), f"quantization mismatch {_g(qmax)} <= {a['quantization_tol']}"))
    for N in orders:
        s = rep.slope("moyal", N)
        floor = N - float(a["moyal_slack"])
        lines.append((s >= floor, f"moyal N={N} slope: {_g(s)} >= {_g(floor)}"))
    norms = [v for _, v in rep.values("calderon_vaillancourt")]
    ratio = max(norms) / min(norms)
    lines.append((ratio < float(a["cv_ratio"]), f"norm ratio over sweep: {_g(ratio)} < {a['cv_ratio']}"))
    return rep, lines


def _cmd_persson(cfg: RunConfig):
    eps = cfg.eps_list()[0]
    R = float(cfg.get("radius", 0.5))
    centers = cfg.get("centers")
    if centers is None:
        raise ConfigError("field 'centers': missing")
    rep = persson_estimate(cfg.model, eps, R, np.asarray(centers, dtype=float))
    lines = [
        (bool(v >= b - 1e-9), f"center {c.tolist()}: Lambda {_g(v)} >= min V {_g(b)}")
        for c, v, b in zip(rep.centers, rep.values, rep.potential_bounds)
    ]
    if "min_value" in cfg.assertions:
        lim = float(cfg.assertions["min_value"])
        lines.append((rep.minimum >= lim, f"min Lambda {_g(rep.minimum)} >= {lim}"))
    return rep, lines


_DISPATCH = {
    "validate": (_cmd_validate, "validate"),
    "spectrum": (_cmd_spectrum, "spectrum"),
    "harmonic": (_cmd_harmonic, "harmonic"),
    "converge": (_cmd_converge, "converge"),
    "quasimode": (_cmd_quasimode, "quasimode"),
    "defects": (_cmd_defects, "defects"),
    "psido-check": (_cmd_psido, "psido"),
    "persson": (_cmd_persson, "persson"),
}


def _write_summary(out: Path, command: str, cfg: RunConfig, lines: Sequence) -> Path:
    path = out / "summary.txt"
    body = [f"command: {command}", f"model: {cfg.model.label}", f"seed: {cfg.seed}"]
    body += [f"{'PASS' if ok else 'FAIL'} {msg}" for ok, msg in lines]
    n_fail = sum(1 for ok, _ in lines if not ok)
    body.append(f"result: {'PASS' if n_fail == 0 else 'FAIL'} ({len(lines) - n_fail}/{len(lines)} assertions)")
    path.write_text("\n".join(body) + "\n")
    return path


def run(command: str, cfg: RunConfig, out) -> int:
    """Run one command, write its CSV and summary.txt, return the exit status."""
    if command not in _DISPATCH:
        raise ConfigError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if command != "validate":
        val = validate_hypotheses(cfg.model)
        if not val.passed:
            lines = [(False, f"model fails clause {c.clause}: {c.detail}") for c in val.failed()]
            _write_summary(out, command, cfg, lines)
            return EXIT_FAIL
    func, kind = _DISPATCH[command]
    report, lines = func(cfg)
    emit_report(report, out, kind)
    _write_summary(out, command, cfg, lines)
    return EXIT_OK if all(ok for ok, _ in lines) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latharm", description="Harmonic-limit studies for lattice Schrödinger operators.")
    p.add_argument("--config", required=True, type=Path, help="YAML run configuration")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--command", choices=COMMANDS, help="command to run (overrides the config's 'command')")
    p.add_argument("--seed", type=int, default=0, help="seed for synthetic-noise checks; recorded in the summary")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg.seed = args.seed
        command = args.command or cfg.command
        if command is None:
            raise ConfigError("no command given (use --command or the config's 'command' field)")
        status = run(command, cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # forwarded module failures
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print((args.out / "summary.txt").read_text(), end="")
    return status


if __name__ == "__main__":
    sys.exit(main())
