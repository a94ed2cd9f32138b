"""Seeded experiment drivers: design, evaluate, sweep and average."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .admm import AdmmResult, IsacProblem, derive_eps, run_admm
from .channel import ChannelConfig, ChannelRealization, sample_rician_taps
from .comm import empirical_ser, esn0_to_noise_std, mui_energy, papr_time, random_symbols, sum_rate
from .config import ExperimentConfig, derive_seed
from .ideal import IdealObjectiveSpec, LbfgsConfig, LbfgsResult, lbfgs_minimize, normalize_energy
from .operators import GridConfig, to_freq_domain
from .radar import RadarScene, default_scene, echo_snr, islr, pattern_mismatch

log = logging.getLogger(__name__)

ROW_COLUMNS = (
    "experiment", "config_hash", "seed", "mode", "init", "rho", "papr_constraint_db", "esn0_db",
    "mui", "ser", "sum_rate", "islr_db", "rsnr_db", "rsnr_min_db", "rsnr_max_db", "mismatch",
    "papr_measured_db", "comm_term", "radar_term", "objective", "iterations", "converged", "wall_time",
)


@dataclass
class ResultRow:
    experiment: str
    config_hash: str
    seed: int
    mode: str
    rho: float
    papr_constraint_db: float
    metrics: dict = field(default_factory=dict)
    init: str = "radar"
    iterations: int = 0
    converged: bool = True
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(d.pop("metrics"))
        return d


def mode_name(grid: GridConfig) -> str:
    return f"os{grid.os_rate}" if grid.oversampled else "nyquist"


def make_scene(cfg: ExperimentConfig, grid: GridConfig) -> RadarScene:
    return default_scene(grid, target_angles_deg=cfg.target_angles_deg, mask_width_deg=cfg.mask_width_deg,
                         dopplers=cfg.dopplers, avg_power=1.0)


def channel_config(cfg: ExperimentConfig) -> ChannelConfig:
    return ChannelConfig(n_taps=cfg.n_taps, rician_k=cfg.rician_k,
                         los_angles=tuple(np.radians(cfg.target_angles_deg)))


_IDEAL_CACHE: dict = {}


def design_ideal(cfg: ExperimentConfig, grid: GridConfig | None = None) -> tuple[np.ndarray, LbfgsResult]:
    """Ideal radar waveform normalized to the CP-free energy budget.

    Results are memoized per (config, grid) since every experiment reuses them.
    """
    grid = grid or cfg.grid()
    key = (cfg.hash(), grid)
    if key not in _IDEAL_CACHE:
        spec = IdealObjectiveSpec(make_scene(cfg, grid), grid)
        res = lbfgs_minimize(spec, LbfgsConfig(max_iters=cfg.lbfgs_iters), seed=derive_seed(cfg.seed, "ideal"))
        energy = cfg.n_sub / (cfg.n_sub + cfg.n_cp) * cfg.total_energy
        _IDEAL_CACHE[key] = (normalize_energy(res.x, energy), res)
    s0, res = _IDEAL_CACHE[key]
    return s0.copy(), res


def make_instance(cfg: ExperimentConfig, grid: GridConfig, experiment: str, index: int = 0):
    """Channel and data symbols for one trial."""
    h = sample_rician_taps(channel_config(cfg), grid, derive_seed(cfg.seed, f"{experiment}/channel", index))
    s_d = random_symbols(cfg.n_sub, cfg.n_users, derive_seed(cfg.seed, f"{experiment}/symbols", index))
    return h, s_d


def make_problem(cfg: ExperimentConfig, grid: GridConfig, h: ChannelRealization, s_d, s0,
                 rho: float | None = None, papr_db: float | None = None) -> IsacProblem:
    rho = cfg.rho if rho is None else rho
    papr_db = cfg.papr_db if papr_db is None else papr_db
    eps = derive_eps(papr_db, grid, cfg.total_energy)
    return IsacProblem(h, s_d, s0, rho, eps, cfg.total_energy, grid)


def design_isac(cfg: ExperimentConfig, problem: IsacProblem, init="radar") -> AdmmResult:
    return run_admm(problem, init=init, eta=cfg.eta, max_iters=cfg.admm_max_iters, tol=cfg.admm_tol)


def evaluate(cfg: ExperimentConfig, grid: GridConfig, h: ChannelRealization, s_d, s,
             esn0_db: float | None = None, ser_seed: int = 0) -> dict:
    """Radar and communication metrics of one time-domain waveform."""
    esn0_db = cfg.esn0_db if esn0_db is None else esn0_db
    scene = make_scene(cfg, grid)
    x = to_freq_domain(s, grid)
    noise = esn0_to_noise_std(esn0_db)
    rsnr = np.atleast_1d(echo_snr(s, scene.target_angles, cfg.loss_over_noise, grid))
    return {
        "esn0_db": esn0_db,
        "mui": mui_energy(h, x, s_d),
        "ser": empirical_ser(h, x, s_d, noise, cfg.ser_trials, ser_seed),
        "sum_rate": sum_rate(h, x, s_d, noise),
        "islr_db": islr(s, scene, grid),
        "rsnr_db": float(10 * np.log10(np.mean(10 ** (rsnr / 10)))),
        "rsnr_min_db": float(rsnr.min()),
        "rsnr_max_db": float(rsnr.max()),
        "mismatch": pattern_mismatch(s, scene, grid),
        "papr_measured_db": papr_time(s, grid).max_db,
    }


def _design_row(cfg, experiment, grid, problem, init, ser_seed, papr_db) -> tuple[ResultRow, AdmmResult]:
    t0 = time.perf_counter()
    res = design_isac(cfg, problem, init)
    wall = time.perf_counter() - t0
    metrics = evaluate(cfg, grid, problem.channel, problem.s_d, res.s, ser_seed=ser_seed)
    metrics.update(comm_term=problem.comm_term(res.s), radar_term=problem.radar_term(res.s),
                   objective=problem.objective(res.s))
    row = ResultRow(experiment, cfg.hash(), cfg.seed, mode_name(grid), problem.rho, papr_db, metrics,
                    init=init if isinstance(init, str) else "custom", iterations=res.n_iter,
                    converged=res.converged, wall_time=wall)
    return row, res


def run_init_study(cfg: ExperimentConfig) -> tuple[list[ResultRow], dict]:
    """Zero, radar and comm starting points on one problem instance."""
    grid = cfg.grid()
    s0, _ = design_ideal(cfg, grid)
    h, s_d = make_instance(cfg, grid, "init-study")
    problem = make_problem(cfg, grid, h, s_d, s0)
    rows, traces = [], {}
    for init in ("zero", "radar", "comm"):
        row, res = _design_row(cfg, "init-study", grid, problem, init,
                               derive_seed(cfg.seed, "init-study/ser"), cfg.papr_db)
        rows.append(row)
        traces[init] = res.trace
    return rows, traces


def run_rho_sweep(cfg: ExperimentConfig, modes=(False, True)) -> list[ResultRow]:
    rows = []
    for over in modes:
        grid = cfg.grid(over)
        s0, _ = design_ideal(cfg, grid)
        h, s_d = make_instance(cfg, grid, "rho-sweep")
        for rho in cfg.rho_grid:
            problem = make_problem(cfg, grid, h, s_d, s0, rho=rho)
            row, _ = _design_row(cfg, "rho-sweep", grid, problem, "radar",
                                 derive_seed(cfg.seed, "rho-sweep/ser"), cfg.papr_db)
            rows.append(row)
    return rows


def run_papr_sweep(cfg: ExperimentConfig) -> tuple[list[ResultRow], dict]:
    grid = cfg.grid()
    s0, _ = design_ideal(cfg, grid)
    h, s_d = make_instance(cfg, grid, "papr-sweep")
    rows, traces = [], {}
    for papr_db in cfg.papr_grid_db:
        problem = make_problem(cfg, grid, h, s_d, s0, papr_db=papr_db)
        row, res = _design_row(cfg, "papr-sweep", grid, problem, "radar",
                               derive_seed(cfg.seed, "papr-sweep/ser"), papr_db)
        rows.append(row)
        traces[papr_db] = res.trace
    return rows, traces


def montecarlo_trial(cfg: ExperimentConfig, s0, index: int) -> list[dict]:
    """One trial: fresh channel and symbols, ADMM design, metrics per Es/N0."""
    grid = cfg.grid()
    h, s_d = make_instance(cfg, grid, "montecarlo", index)
    problem = make_problem(cfg, grid, h, s_d, s0)
    res = design_isac(cfg, problem)
    x = to_freq_domain(res.s, grid)
    out = []
    for j, esn0 in enumerate(cfg.esn0_grid_db):
        noise = esn0_to_noise_std(esn0)
        out.append({
            "trial": index,
            "esn0_db": esn0,
            "ser": empirical_ser(h, x, s_d, noise, cfg.ser_trials, derive_seed(cfg.seed, "montecarlo/ser", index * 1000 + j)),
            "sum_rate": sum_rate(h, x, s_d, noise),
            "mui": mui_energy(h, x, s_d),
            "iterations": res.n_iter,
        })
    return out


def _trial_star(args):
    return montecarlo_trial(*args)


def run_montecarlo(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    """Per-trial rows and per-Es/N0 aggregates (mean and standard error).

    Trials draw seeds from their index alone, so serial and parallel runs agree.
    """
    s0, _ = design_ideal(cfg, cfg.grid())
    jobs = [(cfg, s0, i) for i in range(cfg.n_mc)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            per_trial = list(pool.map(_trial_star, jobs))
    else:
        per_trial = [_trial_star(j) for j in jobs]
    trials = [row for rows in per_trial for row in rows]
    return trials, aggregate(cfg, trials)


def aggregate(cfg: ExperimentConfig, trials: list[dict]) -> list[dict]:
    out = []
    for esn0 in cfg.esn0_grid_db:
        sel = [t for t in trials if t["esn0_db"] == esn0]
        n = len(sel)
        ser = np.array([t["ser"] for t in sel])
        rate = np.array([t["sum_rate"] for t in sel])
        se = (lambda a: float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0)
        out.append({
            "experiment": "montecarlo", "config_hash": cfg.hash(), "seed": cfg.seed, "esn0_db": esn0,
            "n_mc": n, "ser_mean": float(ser.mean()), "ser_se": se(ser),
            "sum_rate_mean": float(rate.mean()), "sum_rate_se": se(rate),
        })
    return out
