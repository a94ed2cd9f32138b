"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .admm import AdmmError
from .config import ConfigError, ExperimentConfig, load_config
from .io import CSV_SCHEMAS, load_cwf, save_cwf, write_csv, write_trace

log = logging.getLogger("isacwave")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON or YAML config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--oversample", action="store_true", help="design on the oversampled time grid")
    common.add_argument("--rho", type=_floats, help="trade-off weight (comma list for rho-sweep)")
    common.add_argument("--papr-db", type=_floats, help="PAPR limit in dB (comma list for papr-sweep)")
    common.add_argument("--eta", type=float, help="ADMM penalty (default: derived bound)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="isacwave", description="ISAC MIMO-OFDM waveform design")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("design-ideal", parents=[common], help="L-BFGS ideal radar waveform")
    sub.add_parser("design-isac", parents=[common], help="ADMM ISAC waveform for one channel draw")
    ev = sub.add_parser("evaluate", parents=[common], help="metrics of a saved waveform")
    ev.add_argument("waveform", type=Path, help=".cwf file")
    sub.add_parser("init-study", parents=[common], help="zero / radar / comm starting points")
    sub.add_parser("rho-sweep", parents=[common], help="radar-communication trade-off sweep")
    sub.add_parser("papr-sweep", parents=[common], help="PAPR limit sweep")
    mc = sub.add_parser("montecarlo", parents=[common], help="averaged SER and sum rate")
    mc.add_argument("--trials", type=int, help="override n_mc")
    mc.add_argument("--workers", type=int, help="parallel worker processes")
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["out_dir"] = str(args.out)
    if args.oversample:
        changes["oversample"] = True
    if args.eta is not None:
        changes["eta"] = args.eta
    if args.rho:
        changes["rho_grid"] = args.rho
        changes["rho"] = args.rho[0]
    if args.papr_db:
        changes["papr_grid_db"] = args.papr_db
        changes["papr_db"] = args.papr_db[0]
    if getattr(args, "trials", None) is not None:
        changes["n_mc"] = args.trials
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    try:
        return cfg.replace(**changes)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _rows_csv(path, rows, schema="result"):
    return write_csv(path, [r.to_dict() if hasattr(r, "to_dict") else r for r in rows], ex.ROW_COLUMNS, schema)


def cmd_design_ideal(cfg, args, out: Path):
    grid = cfg.grid()
    s0, res = ex.design_ideal(cfg, grid)
    save_cwf(out / "s0.cwf", s0, grid, kind="ideal-radar", config_hash=cfg.hash(), seed=cfg.seed)
    write_csv(out / "s0_trace.csv", ({"iter": i, "objective": f} for i, f in enumerate(res.trace)),
              CSV_SCHEMAS["lbfgs"], "lbfgs")
    log.info("ideal waveform: %s after %d iterations, objective %.6g", res.status, res.n_iter, res.fun)


def cmd_design_isac(cfg, args, out: Path):
    grid = cfg.grid()
    s0, _ = ex.design_ideal(cfg, grid)
    h, s_d = ex.make_instance(cfg, grid, "design-isac")
    problem = ex.make_problem(cfg, grid, h, s_d, s0)
    row, res = ex._design_row(cfg, "design-isac", grid, problem, "radar", 0, cfg.papr_db)
    save_cwf(out / "s.cwf", res.s, grid, kind="isac", rho=cfg.rho, papr_db=cfg.papr_db,
             config_hash=cfg.hash(), seed=cfg.seed)
    write_trace(out / "trace.csv", res.trace)
    _rows_csv(out / "result.csv", [row])


def cmd_evaluate(cfg, args, out: Path):
    s, grid, meta = load_cwf(args.waveform)
    grid = grid or cfg.grid()
    if grid.time_len != s.size:
        raise ConfigError(f"{args.waveform}: {s.size} samples do not match the grid")
    cfg = cfg.replace(n_tx=grid.n_tx, n_sub=grid.n_sub, n_cp=grid.n_cp,
                      oversample=grid.oversampled,
                      os_rate=grid.os_rate if grid.oversampled else cfg.os_rate)
    h, s_d = ex.make_instance(cfg, grid, "design-isac")
    metrics = ex.evaluate(cfg, grid, h, s_d, s)
    row = ex.ResultRow("evaluate", cfg.hash(), cfg.seed, ex.mode_name(grid), float(meta.get("rho", float("nan"))),
                       float(meta.get("papr_db", float("nan"))), metrics, init=str(meta.get("kind", "")))
    _rows_csv(out / "evaluate.csv", [row])


def cmd_init_study(cfg, args, out: Path):
    rows, traces = ex.run_init_study(cfg)
    _rows_csv(out / "init_study.csv", rows)
    for init, trace in traces.items():
        write_trace(out / f"init_study_trace_{init}.csv", trace)


def cmd_rho_sweep(cfg, args, out: Path):
    modes = (cfg.oversample,) if args.oversample else (False, True)
    _rows_csv(out / "rho_sweep.csv", ex.run_rho_sweep(cfg, modes))


def cmd_papr_sweep(cfg, args, out: Path):
    rows, traces = ex.run_papr_sweep(cfg)
    _rows_csv(out / "papr_sweep.csv", rows)
    for papr_db, trace in traces.items():
        write_trace(out / f"papr_sweep_trace_{papr_db:g}dB.csv", trace)


def cmd_montecarlo(cfg, args, out: Path):
    trials, agg = ex.run_montecarlo(cfg)
    write_csv(out / "montecarlo_trials.csv", trials, ("trial", "esn0_db", "ser", "sum_rate", "mui", "iterations"),
              "montecarlo-trial")
    write_csv(out / "montecarlo.csv", agg, tuple(agg[0]), "montecarlo")


COMMANDS = {
    "design-ideal": cmd_design_ideal,
    "design-isac": cmd_design_isac,
    "evaluate": cmd_evaluate,
    "init-study": cmd_init_study,
    "rho-sweep": cmd_rho_sweep,
    "papr-sweep": cmd_papr_sweep,
    "montecarlo": cmd_montecarlo,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, args, out)
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AdmmError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
