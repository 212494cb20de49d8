"""Command-line experiment runner.

Verbs: ``run --config FILE``, ``convergence``, ``compare`` and ``snapshot``.
Exit status is 0 on success, 2 for configuration errors and 3 for numerical
failures, with a one-line diagnostic naming the stage that failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _validation as val
from .assembly import DGParameters, assemble
from .basis import build_bases
from .errors import ConfigError, ContractError, NumericalError, QTDGError
from .mesh import classify_boundary, generate_structured
from .problem import NEEDS_NU, builtin, validate_problem
from .solve_analyze import ErrorReport, compute_errors, convergence_rates, solve

log = logging.getLogger("qtdg")

CSV_COLUMNS = ("space", "p", "n", "h_nominal", "h_actual", "dofs", "err_L2", "err_H1",
               "err_Linf", "rate_L2", "rate_H1", "rate_Linf", "walltime_s")
VARIANT_NAMES = {-1: "sipg", 0: "iipg", 1: "nipg"}

# penalty per diffusion level, from the snapshot experiments
SNAPSHOT_GAMMA = {
    "advdom_neumann": {1e-1: 10.0, 1e-2: 1.0, 1e-3: 1e-1, 1e-4: 1e-2},
    "reactdom": {1e-1: 10.0, 1e-2: 1.0, 1e-3: 1e-1, 1e-4: 1e-2},
    "advdom_dirichlet": {1e-1: 10.0, 1e-2: 1e-1, 1e-3: 1e-2, 1e-4: 1e-3},
}
SNAPSHOT_GRID = 101


class StageError(Exception):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")
        self.stage, self.cause = stage, exc


@dataclass
class ExperimentConfig:
    problem: str
    degrees: list[int]
    levels: list[int]
    space: list[str] = field(default_factory=lambda: ["qt"])
    epsilon: list[int] = field(default_factory=lambda: [-1])
    gamma: object = "8p2"
    nu: float | None = None
    quad_order: int | None = None
    output: str = "results"
    mode: str = "convergence"
    timing: bool = False

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "problem" not in raw:
            raise ConfigError("config needs a 'problem' key")
        d = dict(raw)
        for key in ("space", "epsilon", "degrees", "levels"):
            if key in d and not isinstance(d[key], list):
                d[key] = [d[key]]
        cfg = cls(**{"degrees": [2], "levels": [4, 8, 16], **d})
        cfg.validate()
        return cfg

    def validate(self):
        try:
            self.degrees = [val.check_degree(p) for p in self.degrees]
            self.levels = val.check_levels(self.levels)
            self.space = [val.check_space(s) for s in self.space]
            self.epsilon = [val.check_epsilon(e) for e in self.epsilon]
            self.gamma = val.check_gamma(self.gamma)
        except ContractError as exc:
            raise ConfigError(str(exc)) from None
        if self.mode not in ("convergence", "compare"):
            raise ConfigError(f"mode must be 'convergence' or 'compare', got {self.mode!r}")
        if self.nu is not None and self.problem not in NEEDS_NU:
            raise ConfigError(f"nu is only meaningful for {', '.join(NEEDS_NU)}")


@dataclass
class RunRecord:
    config: ExperimentConfig
    reports: dict            # (space, epsilon, p, n) -> ErrorReport
    walltimes: dict          # same keys -> seconds
    rates: dict = field(default_factory=dict)   # (space, epsilon, p) -> list of rate triples
    files: list[str] = field(default_factory=list)


def _threads() -> int:
    raw = os.environ.get("QTDG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"QTDG_THREADS must be an integer, got {raw!r}") from None


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except QTDGError as exc:
        raise StageError(name, exc) from exc


def solve_cell(problem_name, nu, space, p, n, eps, gamma, quad_order=None):
    """mesh -> validate -> basis -> assemble -> solve for one configuration."""
    problem = _stage("problem", builtin, problem_name, nu)
    mesh = _stage("mesh", lambda: classify_boundary(generate_structured(n), problem))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        _stage("validate", validate_problem, problem, mesh, p)
    bases = _stage("basis", build_bases, mesh, problem.coefficients, p, space)
    params = _stage("assemble", DGParameters, eps, gamma, quad_order)
    system = _stage("assemble", assemble, mesh, problem, bases, params)
    return _stage("solve", solve, system)


def _cell(cfg: ExperimentConfig, space, eps, p, n):
    start = time.perf_counter()
    gamma = val.gamma_for(cfg.gamma, p)
    sol = solve_cell(cfg.problem, cfg.nu, space, p, n, eps, gamma, cfg.quad_order)
    report = _stage("errors", compute_errors, sol)
    return report, time.perf_counter() - start


def run(cfg: ExperimentConfig, write: bool = True) -> RunRecord:
    """Every (space, epsilon, p, n) cell of the config, CSVs in config order."""
    keys = [(s, e, p, n) for s in cfg.space for e in cfg.epsilon
            for p in cfg.degrees for n in cfg.levels]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(lambda k: _cell(cfg, *k), keys))
    record = RunRecord(cfg, {k: r[0] for k, r in zip(keys, results)},
                       {k: r[1] for k, r in zip(keys, results)})
    for s in cfg.space:
        for e in cfg.epsilon:
            for p in cfg.degrees:
                reps = [record.reports[(s, e, p, n)] for n in cfg.levels]
                if len(reps) > 1:
                    record.rates[(s, e, p)] = _stage("rates", convergence_rates, reps)
    if write:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        for e in cfg.epsilon:
            name = f"{cfg.problem}_{VARIANT_NAMES[e]}.csv"
            if cfg.mode == "compare":
                name = f"{cfg.problem}_{VARIANT_NAMES[e]}_compare.csv"
            path = out / name
            path.write_text(format_csv(record, e), newline="")
            record.files.append(str(path))
    return record


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if np.isnan(x) else f"{x:.10e}"
    return str(x)


def format_csv(record: RunRecord, eps: int) -> str:
    cfg = record.config
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in cfg.space:
        for p in cfg.degrees:
            rates = record.rates.get((s, eps, p), [])
            for i, n in enumerate(cfg.levels):
                r: ErrorReport = record.reports[(s, eps, p, n)]
                rt = rates[i - 1] if i > 0 and rates else (None, None, None)
                wt = record.walltimes[(s, eps, p, n)] if cfg.timing else float("nan")
                w.writerow([s, p, n, _fmt(r.h_nominal), _fmt(r.h_actual), r.dofs,
                            _fmt(r.err_L2), _fmt(r.err_H1), _fmt(r.err_Linf),
                            *(_fmt(x) for x in rt), _fmt(wt)])
    return buf.getvalue()


def snapshot(problem: str, nu: float, p: int = 3, n: int = 16, gamma: float | None = None,
             epsilon: int = -1, grid: int = SNAPSHOT_GRID) -> np.ndarray:
    """u_h on a uniform grid x grid lattice of the unit square, rows over x2."""
    if problem not in SNAPSHOT_GAMMA:
        raise ConfigError(f"snapshot supports {', '.join(SNAPSHOT_GAMMA)}, got {problem!r}")
    if gamma is None:
        table = SNAPSHOT_GAMMA[problem]
        match = [g for v, g in table.items() if np.isclose(v, nu, rtol=1e-9)]
        if not match:
            raise ConfigError(f"no default gamma for nu={nu}; pass --gamma")
        gamma = match[0]
    sol = solve_cell(problem, nu, "qt", p, n, epsilon, gamma)
    t = np.linspace(0.0, 1.0, grid)
    X1, X2 = np.meshgrid(t, t)
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    return sol(pts).reshape(grid, grid)


# argument parsing ---------------------------------------------------------------------

def _csv_ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _gamma_arg(text: str):
    return text if text.lower() == "8p2" else float(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qtdg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run an experiment described by a JSON config")
    r.add_argument("--config", required=True)

    def sweep(parser):
        parser.add_argument("--problem", required=True)
        parser.add_argument("--nu", type=float)
        parser.add_argument("--pmin", type=int, default=1)
        parser.add_argument("--pmax", type=int, default=3)
        parser.add_argument("--levels", type=_csv_ints, default=[4, 8, 16, 32])
        parser.add_argument("--epsilon", default="-1",
                            help="-1/0/1, sipg/iipg/nipg, or a comma list")
        parser.add_argument("--gamma", type=_gamma_arg, default="8p2")
        parser.add_argument("--quad-order", type=int)
        parser.add_argument("--out", default="results")
        parser.add_argument("--timing", action="store_true",
                            help="record wall times (CSV no longer byte-stable)")

    c = sub.add_parser("convergence", help="h-convergence sweep")
    sweep(c)
    c.add_argument("--space", choices=val.SPACES, default="qt")
    sweep(sub.add_parser("compare", help="quasi-Trefftz vs full polynomial space"))

    s = sub.add_parser("snapshot", help="sample u_h on a 101x101 grid")
    s.add_argument("--problem", required=True)
    s.add_argument("--nu", type=float, required=True)
    s.add_argument("--gamma", type=float)
    s.add_argument("--p", type=int, default=3)
    s.add_argument("--n", type=int, default=16)
    s.add_argument("--epsilon", default="-1")
    s.add_argument("--out", required=True)
    return ap


def _sweep_config(args, spaces, mode) -> ExperimentConfig:
    eps = [e for e in str(args.epsilon).split(",") if e]
    return ExperimentConfig.from_dict({
        "problem": args.problem, "nu": args.nu, "space": spaces,
        "degrees": list(range(args.pmin, args.pmax + 1)), "levels": args.levels,
        "epsilon": eps, "gamma": args.gamma, "quad_order": args.quad_order,
        "output": args.out, "mode": mode, "timing": args.timing})


def _summary(record: RunRecord) -> str:
    lines = []
    for (s, e, p), rates in record.rates.items():
        last = rates[-1]
        lines.append(f"{s} {VARIANT_NAMES[e]} p={p}: finest rates "
                     f"L2 {last[0]:.3f} H1 {last[1]:.3f} Linf {last[2]:.3f}")
    lines.extend(f"wrote {f}" for f in record.files)
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    stage = "config"
    try:
        if args.verb == "run":
            try:
                raw = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(raw, dict):
                raise ConfigError("config must be a JSON object")
            cfg = ExperimentConfig.from_dict(raw)
        elif args.verb == "convergence":
            cfg = _sweep_config(args, [args.space], "convergence")
        elif args.verb == "compare":
            cfg = _sweep_config(args, ["qt", "full"], "compare")
        else:
            eps = val.check_epsilon(args.epsilon)
            field_ = snapshot(args.problem, args.nu, args.p, args.n, args.gamma, eps)
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            np.savetxt(args.out, field_.ravel(), fmt="%.12e")
            print(f"wrote {args.out} ({SNAPSHOT_GRID}x{SNAPSHOT_GRID}, "
                  f"min {np.nanmin(field_):.4f}, max {np.nanmax(field_):.4f})")
            return 0
        record = run(cfg)
        print(_summary(record))
        return 0
    except StageError as exc:
        stage, err = exc.stage, exc.cause
    except QTDGError as exc:
        err = exc
    code = 3 if isinstance(err, NumericalError) else 2
    print(f"qtdg: {stage} failed: {type(err).__name__}: {err}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
