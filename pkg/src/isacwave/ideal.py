"""Ideal radar waveform synthesis and the MUI-only communication waveform.

The radar waveform minimizes the integrated sidelobe level of the ambiguity
function toward each target plus a weighted squared beampattern mismatch,
solved over the stacked real/imaginary parameters with L-BFGS.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .operators import GridConfig, direction_adjoint, direction_apply, to_time_domain
from .radar import RadarScene, mask_power

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IdealObjectiveSpec:
    scene: RadarScene
    grid: GridConfig
    beam_weight: float | None = None

    @property
    def weight(self) -> float:
        if self.beam_weight is None:
            return float(self.grid.frame_len) ** 2
        return float(self.beam_weight)


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 10
    max_iters: int = 500
    grad_tol: float = 1e-6
    c1: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 50

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    n_iter: int
    status: str  # "converged" | "max_iters" | "stalled"
    trace: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Objective and gradient
# ---------------------------------------------------------------------------


def _shift(w, k):
    """``(J_k w)_m = w_{m-k}`` along axis 0, zero-filled."""
    out = np.zeros_like(w)
    n = w.shape[0]
    if k >= n or k <= -n:
        return out
    if k >= 0:
        out[k:] = w[: n - k]
    else:
        out[:k] = w[-k:]
    return out


def _isl_terms(s, spec: IdealObjectiveSpec, with_grad: bool):
    scene, grid = spec.scene, spec.grid
    if not scene.delay_doppler:
        return 0.0, np.zeros(grid.time_len, complex) if with_grad else None
    sv = direction_apply(s, scene.target_angles, grid)  # (L, nd)
    n = sv.shape[0]
    pos = np.arange(1, n + 1)
    value = 0.0
    acc = np.zeros_like(sv) if with_grad else None
    for k, f in scene.delay_doppler:
        ramp = np.exp(2j * np.pi * f * pos)[:, None]
        msv = _shift(ramp * sv, k)  # J_k D_f sv
        u = np.sum(sv.conj() * msv, axis=0)
        value += float(np.sum(np.abs(u) ** 2))
        if with_grad:
            mhsv = ramp.conj() * _shift(sv, -k)  # D_f^H J_k^T sv
            acc += u.conj() * msv + u * mhsv
    grad = 2.0 * direction_adjoint(acc, scene.target_angles, grid) if with_grad else None
    return value, grad


def _mask_terms(s, spec: IdealObjectiveSpec, with_grad: bool):
    scene, grid = spec.scene, spec.grid
    sv = direction_apply(s, scene.pattern_grid, grid)
    q = np.sum(np.abs(sv) ** 2, axis=0) / grid.frame_len
    resid = q - scene.ideal_pattern
    value = spec.weight * float(np.sum(resid**2))
    grad = None
    if with_grad:
        grad = direction_adjoint(sv * (4.0 * spec.weight / grid.frame_len * resid), scene.pattern_grid, grid)
    return value, grad


def ideal_objective(s, spec: IdealObjectiveSpec) -> float:
    """ISL over the target angles plus the weighted beampattern mismatch."""
    s = np.asarray(s, dtype=complex)
    return _isl_terms(s, spec, False)[0] + _mask_terms(s, spec, False)[0]


def ideal_value_and_grad(s, spec: IdealObjectiveSpec) -> tuple[float, np.ndarray]:
    """Objective and ``2 dJ/ds*`` (complex), i.e. the real gradient packed as ``re + j im``."""
    s = np.asarray(s, dtype=complex)
    v1, g1 = _isl_terms(s, spec, True)
    v2, g2 = _mask_terms(s, spec, True)
    return v1 + v2, g1 + g2


def to_real(z) -> np.ndarray:
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag])


def to_complex(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    half = p.shape[0] // 2
    return p[:half] + 1j * p[half:]


def ideal_gradient(s, spec: IdealObjectiveSpec) -> np.ndarray:
    """Gradient over the ``2 * len(s)`` real parameters ``[Re s, Im s]``."""
    return to_real(ideal_value_and_grad(s, spec)[1])


# ---------------------------------------------------------------------------
# L-BFGS
# ---------------------------------------------------------------------------


def lbfgs(fun_and_grad, x0, cfg: LbfgsConfig = LbfgsConfig(), callback=None) -> LbfgsResult:
    """Two-loop-recursion L-BFGS with Armijo backtracking on a real vector.

    Only steps satisfying the sufficient-decrease test are accepted, so the
    objective trace is non-increasing. If backtracking exhausts its budget the
    best iterate is returned with status ``"stalled"``.
    """
    x = np.array(x0, dtype=float)
    f, g = fun_and_grad(x)
    trace = [f]
    pairs: deque = deque(maxlen=cfg.memory)
    status = "max_iters"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        gnorm = np.linalg.norm(g)
        if gnorm <= cfg.grad_tol:
            status = "converged"
            it -= 1
            break

        q = g.copy()
        alphas = []
        for s_k, y_k, rho_k in reversed(pairs):
            a = rho_k * (s_k @ q)
            alphas.append(a)
            q -= a * y_k
        if pairs:
            s_k, y_k, _ = pairs[-1]
            q *= (s_k @ y_k) / (y_k @ y_k)
        else:
            q /= gnorm
        for (s_k, y_k, rho_k), a in zip(pairs, reversed(alphas)):
            b = rho_k * (y_k @ q)
            q += (a - b) * s_k
        d = -q
        slope = g @ d
        if slope >= 0:
            # not a descent direction: restart from steepest descent
            pairs.clear()
            d = -g / gnorm
            slope = g @ d

        step = 1.0
        for _ in range(cfg.max_backtracks):
            x_new = x + step * d
            f_new, g_new = fun_and_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + cfg.c1 * step * slope:
                break
            step *= cfg.backtrack
        else:
            status = "stalled"
            it -= 1
            log.warning("L-BFGS line search stalled at iteration %d (f=%.6g)", it, f)
            break

        s_k = x_new - x
        y_k = g_new - g
        sy = s_k @ y_k
        if sy > 1e-12 * np.linalg.norm(s_k) * np.linalg.norm(y_k):
            pairs.append((s_k, y_k, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        if callback is not None:
            callback(it, x, f)
    return LbfgsResult(x=x, fun=float(f), grad_norm=float(np.linalg.norm(g)), n_iter=it, status=status, trace=trace)


def random_init(grid: GridConfig, energy: float, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(grid.time_len) + 1j * rng.standard_normal(grid.time_len)
    return z * np.sqrt(energy) / np.linalg.norm(z)


def lbfgs_minimize(spec: IdealObjectiveSpec, cfg: LbfgsConfig = LbfgsConfig(), init=None, seed=0,
                   init_energy: float | None = None) -> LbfgsResult:
    """Minimize :func:`ideal_objective`; ``result.x`` holds the complex waveform."""
    if init is None:
        if init_energy is None:
            init_energy = spec.grid.n_samp * mask_power(spec.scene) or 1.0
        init = random_init(spec.grid, init_energy, seed)
    init = np.asarray(init, dtype=complex)
    if init.shape != (spec.grid.time_len,):
        raise ValueError(f"init has shape {init.shape}, expected ({spec.grid.time_len},)")

    def fun_and_grad(p):
        f, g = ideal_value_and_grad(to_complex(p), spec)
        return f, to_real(g)

    res = lbfgs(fun_and_grad, to_real(init), cfg)
    res.x = to_complex(res.x)
    return res


def normalize_energy(s, target_energy: float = 1.0) -> np.ndarray:
    s = np.asarray(s)
    norm = np.linalg.norm(s)
    if norm == 0:
        raise ValueError("cannot normalize a zero waveform")
    return s * (np.sqrt(target_energy) / norm)


# ---------------------------------------------------------------------------
# Communication-only reference
# ---------------------------------------------------------------------------


def min_norm_precoder(h: ChannelRealization, s_d, ridge: float = 1e-10) -> tuple[np.ndarray, bool]:
    """Per-subcarrier minimum-norm solution of ``H_n x_n = s_Dn``.

    Returns the subcarrier vector and whether any block needed the ridge.
    """
    s_d = np.asarray(s_d).reshape(h.n_sub, h.n_users)
    out = np.empty((h.n_sub, h.n_tx), dtype=complex)
    regularized = False
    for n, hn in enumerate(h.freq_blocks):
        gram = hn @ hn.conj().T
        if np.linalg.matrix_rank(hn) < h.n_users:
            gram = gram + ridge * np.eye(h.n_users)
            regularized = True
        out[n] = hn.conj().T @ np.linalg.solve(gram, s_d[n])
    if regularized:
        log.warning("rank-deficient channel block, ridge %.1e applied", ridge)
    return out.reshape(-1), regularized


def ideal_comm_waveform(h: ChannelRealization, s_d, grid: GridConfig) -> np.ndarray:
    """Time-domain waveform of the minimum-norm zero-MUI precoder."""
    x, _ = min_norm_precoder(h, s_d)
    return to_time_domain(x, grid)
