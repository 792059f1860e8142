"""Command line entry point: ``nheuler run | verify | analyze``.

Exit codes
----------
0  success
1  internal error (unexpected exception)
2  invalid configuration or arguments
3  blow-up detected (non-finite values, gradient ceiling, density loss)
4  pressure iteration failed to converge
5  verification suite failed
6  missing or corrupt run data
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import __version__
from .config import ScenarioConfig, load_config
from .diagnostics import (
    DiagnosticSeries, CriterionReport, SERIES_SCHEMA_VERSION, criterion_status, cumulative_criteria,
)
from .errors import ConfigError, DataError, InputError
from .scenarios import build_scenario
from .solver import run, save_state
from .spectral import get_grid
from .suites import SUITES, run_suite

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_PRESSURE = 4
EXIT_VERIFY = 5
EXIT_DATA = 6

OUTPUT_ROOT_ENV = "NHEULER_OUTPUT_ROOT"
RUN_MANIFEST = "run.json"
SERIES_FILE = "series.csv"
REPORT_FILE = "criterion_report.json"
PLOT_FILE = "plot.csv"

log = logging.getLogger("nheuler")


def _run_dir(cfg: ScenarioConfig, out: str | None) -> Path:
    if out:
        return Path(out)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / f"{cfg.scenario}-n{cfg.n}-seed{cfg.seed}"


def _scenario_params(cfg: ScenarioConfig) -> dict:
    params = dict(cfg.params)
    if cfg.scenario != "custom":
        params.setdefault("seed", cfg.seed)
    params["coevolve"] = cfg.solver.coevolve
    return params


class _Checkpointer:
    def __init__(self, directory: Path, every: int):
        self.dir = directory
        self.every = every
        self.last = None

    def __call__(self, state, step):
        self.last = (state, step)
        if step == 0 or (self.every and step % self.every == 0):
            self.save(state, step)

    def save(self, state, step):
        self.dir.mkdir(parents=True, exist_ok=True)
        save_state(self.dir / f"state_{step:06d}.npz", state)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.cadence is not None:
        if args.cadence < 1:
            raise ConfigError("--cadence must be >= 1")
        updates["cadence"] = args.cadence
    if updates:
        cfg = ScenarioConfig.model_validate({**cfg.model_dump(), **updates})
    grid = get_grid(cfg.n)
    try:
        state = build_scenario(cfg.scenario, grid, **_scenario_params(cfg))
    except InputError as exc:
        raise ConfigError(f"scenario '{cfg.scenario}': {exc}") from exc
    solver_cfg = cfg.solver_config()

    out = _run_dir(cfg, args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.model_dump_json(indent=2) + "\n")
    series = DiagnosticSeries()
    ckpt = _Checkpointer(out / "checkpoints", cfg.checkpoint_every)
    summary = run(state, solver_cfg, cfg.horizon, callbacks=[series, ckpt])
    if ckpt.last is not None and not (ckpt.dir / f"state_{ckpt.last[1]:06d}.npz").exists():
        ckpt.save(*ckpt.last)

    series.to_csv(out / SERIES_FILE)
    report = criterion_status(series, cfg.criterion_mode, cfg.growth_threshold)
    report.to_json(out / REPORT_FILE)
    code = {"completed": EXIT_OK, "blow_up": EXIT_BLOWUP, "pressure_divergence": EXIT_PRESSURE}[summary.status]
    manifest = {
        "series_schema_version": SERIES_SCHEMA_VERSION,
        "nheuler_version": __version__,
        "status": summary.status,
        "exit_code": code,
        "message": summary.message,
        "warnings": summary.warnings,
        "steps": summary.steps,
        "records": len(series),
        "t_start": series[0].t,
        "t_final": series[-1].t,
        "horizon": cfg.horizon,
        "criterion_mode": cfg.criterion_mode,
        "growth_threshold": cfg.growth_threshold,
    }
    (out / RUN_MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
    for w in summary.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if code != EXIT_OK:
        print(f"run stopped ({summary.status}) at t={summary.t:.6g}: {summary.message}", file=sys.stderr)
    print(f"{summary.status}: t={summary.t:.6g}, steps={summary.steps}, records={len(series)}, "
          f"K(T)={report.K:.6g}, status={report.status}; output in {out}")
    return code


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise ConfigError(f"unknown suite '{args.suite}'; choose from {', '.join(SUITES)}")
    result = run_suite(args.suite, n=args.n, seed=args.seed if args.seed is not None else 0)
    text = result.to_json(indent=2)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    print(text)
    for c in result.failures:
        op = "<=" if c.kind == "max" else ">="
        print(f"FAILED {c.name}: observed {c.observed:.6g}, required {op} {c.threshold:.6g}", file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_VERIFY


def _load_run(run_dir: Path):
    if not run_dir.is_dir():
        raise DataError(f"run directory {run_dir} does not exist")
    try:
        manifest = json.loads((run_dir / RUN_MANIFEST).read_text())
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {run_dir / RUN_MANIFEST}: {exc}") from exc
    series = DiagnosticSeries.from_csv(run_dir / SERIES_FILE)
    if len(series) == 0:
        raise DataError(f"{run_dir / SERIES_FILE}: no records (expected t in [{manifest['t_start']}, {manifest['t_final']}])")
    last = series[-1].t
    if len(series) < manifest["records"] or last < manifest["t_final"]:
        raise DataError(f"{run_dir / SERIES_FILE} is truncated: records missing for t in "
                        f"({last:.17g}, {manifest['t_final']:.17g}] "
                        f"({len(series)} of {manifest['records']} records present)")
    return manifest, series


def cmd_analyze(args) -> int:
    run_dir = Path(args.run_dir)
    manifest, series = _load_run(run_dir)
    report = criterion_status(series, manifest["criterion_mode"], manifest["growth_threshold"])
    stored_path = run_dir / REPORT_FILE
    if stored_path.exists():
        stored = CriterionReport.from_json(stored_path)
        for key in ("K", "sum_integral", "sup_dXu_b0", "grad_u_integral"):
            a, b = getattr(stored, key), getattr(report, key)
            if abs(a - b) > 1e-12 * max(1.0, abs(b)):
                print(f"warning: stored {key}={a!r} differs from recomputed {b!r}", file=sys.stderr)
    cum = cumulative_criteria(series)
    idx = np.unique(np.linspace(0, len(series) - 1, min(len(series), args.max_rows)).round().astype(int))
    cols = ["t", "K", "sum_integral", "sup_dXu_b0", "grad_u_integral"]
    extra = ["energy", "rho_min", "rho_max", "grad_u_inf", "dXu_inf", "dXu_b0", "eta_b0", "S1", "S2"]
    plot_path = Path(args.out) if args.out else run_dir / PLOT_FILE
    with open(plot_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + extra)
        for i in idx:
            rec = series[int(i)]
            w.writerow(["%.17g" % cum[c][i] for c in cols] + ["%.17g" % getattr(rec, c) for c in extra])
    print(report.to_json())
    print(f"plot data: {plot_path}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nheuler", description="Density-dependent 2-D Euler solver and verifiers.")
    p.add_argument("--version", action="version", version=f"nheuler {__version__}")
    p.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="run directory (default: $%s/<scenario>-n<n>-seed<seed>)" % OUTPUT_ROOT_ENV)
    r.add_argument("--seed", type=int)
    r.add_argument("--cadence", type=int, help="diagnostic cadence in steps")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", help="one of: " + ", ".join(SUITES))
    v.add_argument("--n", type=int, default=128)
    v.add_argument("--seed", type=int)
    v.add_argument("--out", help="write the JSON report here too")
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("analyze", help="recompute the criterion report of a run directory")
    a.add_argument("run_dir")
    a.add_argument("--out", help="plot-ready CSV path (default: <run_dir>/plot.csv)")
    a.add_argument("--max-rows", type=int, default=200)
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    ctx = sfft.set_workers(args.threads) if args.threads else nullcontext()
    try:
        with ctx:
            return args.func(args)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - the exit-code contract covers every path
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
