"""ADMM for the PAPR- and energy-constrained ISAC precoding problem.

The variable is the effective time-domain waveform ``s``. Two copies split
the constraints: ``y`` carries the per-sample peak cap and ``v`` the
per-antenna energy sphere; both have closed-form projections. The ``s``
step is a Hermitian positive-definite solve whose matrix never changes, so it
is factored once per run, per subcarrier, in the frequency domain.

An oversampled grid uses the same loop: ``s`` then lives on the denser time
grid and the channel sees only its in-band content.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, apply_freq_channel, apply_freq_channel_adjoint, channel_gram
from .operators import GridConfig, per_antenna, to_freq_domain, to_time_domain

log = logging.getLogger(__name__)


class AdmmError(RuntimeError):
    """Numerical failure inside the ADMM loop."""


def antenna_energy(grid: GridConfig, energy_total: float) -> float:
    """Effective (CP-free) energy each antenna must carry."""
    return grid.n_sub / (grid.n_sub + grid.n_cp) * energy_total / grid.n_tx


def derive_eps(papr_max_db: float, grid: GridConfig, energy_total: float) -> float:
    """Per-sample peak power cap equivalent to a PAPR limit at fixed energy."""
    if papr_max_db < 0:
        raise ValueError("PAPR limit below 0 dB is infeasible")
    return 10.0 ** (papr_max_db / 10.0) * antenna_energy(grid, energy_total) / grid.n_samp


@dataclass
class IsacProblem:
    """One instance of the weighted MUI / radar-similarity problem.

    ``eps`` is the peak power cap, either a scalar or one value per antenna.
    ``s0`` is the reference radar waveform on ``grid``'s time grid.
    """

    channel: ChannelRealization
    s_d: np.ndarray
    s0: np.ndarray
    rho: float
    eps: float | np.ndarray
    energy_total: float
    grid: GridConfig

    def __post_init__(self):
        self.s_d = np.asarray(self.s_d, dtype=complex)
        self.s0 = np.asarray(self.s0, dtype=complex)
        g = self.grid
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho={self.rho} outside [0, 1]")
        if self.s0.shape != (g.time_len,):
            raise ValueError(f"s0 has shape {self.s0.shape}, expected ({g.time_len},)")
        if self.s_d.shape != (g.n_sub * self.channel.n_users,):
            raise ValueError(f"s_d has shape {self.s_d.shape}")
        if (self.channel.n_sub, self.channel.n_tx) != (g.n_sub, g.n_tx):
            raise ValueError("channel dimensions do not match the grid")
        eps = np.broadcast_to(np.asarray(self.eps, dtype=float), (g.n_tx,))
        if np.any(eps <= 0):
            raise ValueError("eps must be positive")
        if np.any(eps * g.n_samp < self.antenna_energy * (1 - 1e-12)):
            raise ValueError(
                f"infeasible: peak cap {eps.min():.4g} x {g.n_samp} samples below "
                f"per-antenna energy {self.antenna_energy:.4g}"
            )
        if np.linalg.norm(self.s_d) == 0 and self.rho > 0:
            raise ValueError("s_d must be nonzero")
        if np.linalg.norm(self.s0) == 0 and self.rho < 1:
            raise ValueError("s0 must be nonzero")

    @property
    def antenna_energy(self) -> float:
        return antenna_energy(self.grid, self.energy_total)

    @property
    def eps_per_antenna(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.eps, dtype=float), (self.grid.n_tx,)).copy()

    @property
    def comm_weight(self) -> float:
        return self.rho / float(np.vdot(self.s_d, self.s_d).real) if self.rho > 0 else 0.0

    @property
    def radar_weight(self) -> float:
        return (1.0 - self.rho) / float(np.vdot(self.s0, self.s0).real) if self.rho < 1 else 0.0

    # effective channel H (F kron I) and its adjoint
    def h_apply(self, s) -> np.ndarray:
        return apply_freq_channel(self.channel, to_freq_domain(s, self.grid))

    def h_adjoint(self, r) -> np.ndarray:
        return to_time_domain(apply_freq_channel_adjoint(self.channel, r), self.grid)

    def comm_term(self, s) -> float:
        return self.comm_weight * float(np.sum(np.abs(self.h_apply(s) - self.s_d) ** 2))

    def radar_term(self, s) -> float:
        return self.radar_weight * float(np.sum(np.abs(s - self.s0) ** 2))

    def objective(self, s) -> float:
        return self.comm_term(s) + self.radar_term(s)

    def objective_grad(self, s) -> np.ndarray:
        """Real gradient ``2 Q^H (Q s - beta)`` packed as a complex vector."""
        return 2.0 * (self.comm_weight * self.h_adjoint(self.h_apply(s) - self.s_d)
                      + self.radar_weight * (s - self.s0))

    def lagrangian(self, s, y, v, lam, mu, eta) -> float:
        return self.objective(s) + 0.5 * eta * (
            _sq(y - s + lam) - _sq(lam) + _sq(v - s + mu) - _sq(mu)
        )

    def dense_q(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``Q`` and ``beta`` with ``f(s) = ||Q s - beta||^2`` (test oracle)."""
        n = self.grid.time_len
        h_hat = np.column_stack([self.h_apply(e) for e in np.eye(n)])
        q = np.vstack([math.sqrt(self.comm_weight) * h_hat, math.sqrt(self.radar_weight) * np.eye(n)])
        beta = np.concatenate([math.sqrt(self.comm_weight) * self.s_d, math.sqrt(self.radar_weight) * self.s0])
        return q, beta


def _sq(z) -> float:
    return float(np.vdot(z, z).real)


# ---------------------------------------------------------------------------
# Closed-form steps
# ---------------------------------------------------------------------------


def _eps_vector(eps, grid: GridConfig, n: int) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    if eps.ndim == 0:
        return np.full(n, float(eps))
    return np.tile(eps, n // grid.n_tx)


def update_y(s, lam, eps, grid: GridConfig | None = None) -> np.ndarray:
    """Project ``s - lam`` entrywise onto the disc ``|y_i|^2 <= eps``."""
    t = np.asarray(s) - np.asarray(lam)
    if np.ndim(eps) and grid is None:
        raise ValueError("per-antenna eps needs the grid")
    cap = np.sqrt(_eps_vector(eps, grid, t.size)) if np.ndim(eps) else math.sqrt(eps)
    mag = np.abs(t)
    over = mag > cap
    y = t.copy()
    y[over] = (cap if np.ndim(cap) == 0 else cap[over]) * t[over] / mag[over]
    return y


def update_v(s, mu, grid: GridConfig, energy_total: float) -> np.ndarray:
    """Scale each antenna's part of ``s - mu`` onto the sphere of its energy budget.

    An antenna with an all-zero input is mapped to the equal-phase vector.
    """
    t = per_antenna(np.asarray(s) - np.asarray(mu), grid).copy()
    target = math.sqrt(antenna_energy(grid, energy_total))
    norms = np.linalg.norm(t, axis=0)
    dead = norms == 0
    if np.any(dead):
        t[:, dead] = 1.0
        norms[dead] = math.sqrt(t.shape[0])
    return (t * (target / norms)).reshape(-1)


def project_feasible(s, grid: GridConfig, eps, energy_total: float) -> np.ndarray:
    """Nearest point satisfying both the peak cap and the per-antenna energy.

    Per antenna the magnitudes become ``min(kappa |t_i|, sqrt(eps))`` with the
    phase of ``t_i`` kept and ``kappa`` chosen to meet the energy exactly.
    """
    blocks = per_antenna(np.asarray(s, dtype=complex), grid).copy()
    energy = antenna_energy(grid, energy_total)
    caps = np.broadcast_to(np.asarray(eps, dtype=float), (grid.n_tx,))
    for l in range(grid.n_tx):
        blocks[:, l] = _project_antenna(blocks[:, l], caps[l], energy)
    return blocks.reshape(-1)


def _project_antenna(t, eps, energy):
    n = t.size
    cap = math.sqrt(eps)
    mag = np.abs(t)
    phase = np.where(mag > 0, t / np.where(mag > 0, mag, 1.0), 1.0)
    nz = np.count_nonzero(mag)
    if energy >= n * eps * (1 - 1e-14):
        return cap * phase
    if nz * eps <= energy:
        # too few live samples: saturate them and spread the rest over the dead ones
        out = np.where(mag > 0, cap, 0.0)
        rest = energy - nz * eps
        out[mag == 0] = math.sqrt(rest / (n - nz))
        return out * phase
    order = np.argsort(-mag)
    a = mag[order]
    tail = np.cumsum((a**2)[::-1])[::-1]  # tail[j] = sum_{i>=j} a_i^2
    kappa = None
    for j in range(nz):
        rem = energy - j * eps
        if rem <= 0 or tail[j] <= 0:
            break
        k = math.sqrt(rem / tail[j])
        if k * a[j] <= cap * (1 + 1e-12) and (j == 0 or k * a[j - 1] >= cap * (1 - 1e-12)):
            kappa = k
            break
    if kappa is None:  # fall back to bisection on the monotone energy map
        lo, hi = 0.0, cap / a[nz - 1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.sum(np.minimum(mid * mag, cap) ** 2) < energy:
                lo = mid
            else:
                hi = mid
        kappa = hi
    out = np.minimum(kappa * mag, cap) * phase
    # absorb rounding so the energy holds to machine precision
    free = np.abs(out) < cap * (1 - 1e-12)
    e_fixed = np.sum(np.abs(out[~free]) ** 2)
    e_free = np.sum(np.abs(out[free]) ** 2)
    if e_free > 0:
        out[free] *= math.sqrt(max(energy - e_fixed, 0.0) / e_free)
    return out


class SSolver:
    """Factored solve of ``A s = b`` with ``A = c_h Hh^H Hh + c I``.

    ``Hh = H T`` where ``T`` (the possibly folded DFT) has orthonormal rows,
    so ``A^{-1} b = (b - T^H T b)/c + T^H (c_h K + c I)^{-1} T b`` with ``K``
    block diagonal over subcarriers.
    """

    def __init__(self, problem: IsacProblem, eta: float):
        self.problem = problem
        self.eta = eta
        self.c = problem.radar_weight + eta
        gram = problem.comm_weight * channel_gram(problem.channel)
        gram = gram + self.c * np.eye(problem.grid.n_tx)[None]
        try:
            chol = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as exc:
            raise AdmmError(f"factorization of the s-step matrix failed: {exc}") from exc
        lower_inv = np.linalg.inv(chol)
        self.block_inv = np.einsum("nji,njk->nik", lower_inv.conj(), lower_inv)
        p = problem
        self.b_const = p.comm_weight * p.h_adjoint(p.s_d) + p.radar_weight * p.s0

    def rhs(self, y, v, lam, mu) -> np.ndarray:
        return self.b_const + 0.5 * self.eta * (y + lam + v + mu)

    def solve(self, b) -> np.ndarray:
        grid = self.problem.grid
        tb = to_freq_domain(b, grid)
        blocks = tb.reshape(grid.n_sub, grid.n_tx)
        sol = np.einsum("nij,nj->ni", self.block_inv, blocks).reshape(-1)
        out = to_time_domain(sol, grid)
        if grid.oversampled:
            out = out + (b - to_time_domain(tb, grid)) / self.c
        return out

    def apply_a(self, s) -> np.ndarray:
        p = self.problem
        return p.comm_weight * p.h_adjoint(p.h_apply(s)) + self.c * s

    def dense_a(self) -> np.ndarray:
        n = self.problem.grid.time_len
        return np.column_stack([self.apply_a(e) for e in np.eye(n)])


def update_s(problem: IsacProblem, y, v, lam, mu, eta, solver: SSolver | None = None) -> np.ndarray:
    """Minimize the augmented Lagrangian over ``s`` (unconstrained quadratic)."""
    solver = solver or SSolver(problem, eta)
    return solver.solve(solver.rhs(y, v, lam, mu))


def update_duals(lam, mu, y, v, s) -> tuple[np.ndarray, np.ndarray]:
    return lam + (y - s), mu + (v - s)


# ---------------------------------------------------------------------------
# Convergence constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EtaBound:
    eta: float
    lipschitz: float  # lambda_max(Q^H Q)
    lambda_min: float  # lambda_min(Q^H Q)
    alpha: float
    eps_prop: float


def q_spectrum(problem: IsacProblem) -> tuple[float, float]:
    """Extreme eigenvalues of ``Q^H Q = c_h Hh^H Hh + c_r I``."""
    eig = np.linalg.eigvalsh(channel_gram(problem.channel))
    hi = float(eig.max())
    lo = float(eig.min())
    if problem.grid.oversampled:
        lo = 0.0  # out-of-band directions are invisible to the channel
    return (problem.comm_weight * hi + problem.radar_weight,
            problem.comm_weight * max(lo, 0.0) + problem.radar_weight)


def eta_bound(problem: IsacProblem, alpha: float = 1.0, eps_prop: float = 1.0) -> EtaBound:
    """Penalty above which the augmented Lagrangian is provably non-increasing."""
    lip, lmin = q_spectrum(problem)
    if lmin <= 0:
        log.warning("lambda_min(Q^H Q) = %.3g; eta bound is unbounded", lmin)
        return EtaBound(math.inf, lip, lmin, alpha, eps_prop)
    if problem.rho == 1.0:
        log.warning("rho = 1: eta bound depends on the channel floor and may be large")
    return EtaBound(alpha**2 * lip**2 / (eps_prop**2 * lmin), lip, lmin, alpha, eps_prop)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceTrace:
    objective: list = field(default_factory=list)
    comm_term: list = field(default_factory=list)
    radar_term: list = field(default_factory=list)
    lagrangian: list = field(default_factory=list)
    res_y: list = field(default_factory=list)
    res_v: list = field(default_factory=list)
    dual_step: list = field(default_factory=list)  # ||lam~(m+1) - lam~(m)||^2
    primal_step: list = field(default_factory=list)  # ||s(m+1) - s(m)||^2
    stationarity: list = field(default_factory=list)  # relative error of grad f = eta (lam + mu)
    solve_residual: list = field(default_factory=list)  # ||A s - b|| / ||b||

    def __len__(self):
        return len(self.objective)

    def rows(self):
        for i in range(len(self)):
            yield {
                "iter": i + 1,
                "objective": self.objective[i],
                "comm_term": self.comm_term[i],
                "radar_term": self.radar_term[i],
                "lagrangian": self.lagrangian[i],
                "res_y": self.res_y[i],
                "res_v": self.res_v[i],
            }

    def lagrangian_monotone(self, rel_slack: float = 1e-9) -> bool:
        lag = np.asarray(self.lagrangian)
        if lag.size < 2:
            return True
        slack = rel_slack * np.maximum(np.abs(lag[:-1]), np.abs(lag[1:]))
        return bool(np.all(np.diff(lag) <= slack))

    def prop1_violations(self, bound: EtaBound, eta: float) -> int:
        """Iterations where the dual-step bound with the configured constants fails."""
        c = bound.alpha**2 * bound.lipschitz**2 / (eta**2 * bound.eps_prop**2)
        d = np.asarray(self.dual_step)
        p = np.asarray(self.primal_step)
        return int(np.count_nonzero(d > c * p * (1 + 1e-9) + 1e-300))


@dataclass
class AdmmResult:
    s: np.ndarray  # feasible output
    s_raw: np.ndarray
    y: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    eta: float
    n_iter: int
    converged: bool
    trace: ConvergenceTrace


def initial_point(problem: IsacProblem, init) -> np.ndarray:
    from .ideal import ideal_comm_waveform

    n = problem.grid.time_len
    if isinstance(init, str):
        if init == "zero":
            return np.zeros(n, complex)
        if init == "radar":
            return problem.s0.copy()
        if init == "comm":
            return ideal_comm_waveform(problem.channel, problem.s_d, problem.grid)
        raise ValueError(f"unknown init {init!r}")
    init = np.asarray(init, dtype=complex)
    if init.shape != (n,):
        raise ValueError(f"init has shape {init.shape}, expected ({n},)")
    return init.copy()


def default_eta(problem: IsacProblem) -> float:
    return max(eta_bound(problem).eta, 1.0)


def run_admm(problem: IsacProblem, init="radar", eta: float | None = None, max_iters: int = 2000,
             tol: float = 1e-6, min_iters: int = 1, callback=None) -> AdmmResult:
    """Iterate peak/energy projections, the ``s`` solve and the dual ascent.

    Stops when ``max(||y - s||, ||v - s||) / sqrt(n)`` falls below ``tol``.
    """
    if eta is None:
        eta = default_eta(problem)
    if not eta > 0 or not math.isfinite(eta):
        raise ValueError(f"eta must be positive and finite, got {eta}")
    grid = problem.grid
    n = grid.time_len
    solver = SSolver(problem, eta)
    eps = problem.eps_per_antenna

    s = initial_point(problem, init)
    y = s.copy()
    v = s.copy()
    lam = np.zeros(n, complex)
    mu = np.zeros(n, complex)
    trace = ConvergenceTrace()
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        y = update_y(s, lam, eps, grid)
        v = update_v(s, mu, grid, problem.energy_total)
        b = solver.rhs(y, v, lam, mu)
        s_new = solver.solve(b)
        lam_new, mu_new = update_duals(lam, mu, y, v, s_new)

        if not np.all(np.isfinite(s_new)):
            raise AdmmError(f"non-finite iterate at iteration {it}")

        grad = problem.objective_grad(s_new)
        dual = eta * (lam_new + mu_new)
        scale = max(np.linalg.norm(grad), np.linalg.norm(dual), 1e-300)
        trace.stationarity.append(float(np.linalg.norm(grad - dual) / scale))
        trace.solve_residual.append(float(np.linalg.norm(solver.apply_a(s_new) - b) / max(np.linalg.norm(b), 1e-300)))
        trace.dual_step.append(_sq(lam_new - lam) + _sq(mu_new - mu))
        trace.primal_step.append(_sq(s_new - s))

        s, lam, mu = s_new, lam_new, mu_new
        comm, radar = problem.comm_term(s), problem.radar_term(s)
        trace.comm_term.append(comm)
        trace.radar_term.append(radar)
        trace.objective.append(comm + radar)
        trace.lagrangian.append(problem.lagrangian(s, y, v, lam, mu, eta))
        ry = math.sqrt(_sq(y - s))
        rv = math.sqrt(_sq(v - s))
        trace.res_y.append(ry)
        trace.res_v.append(rv)
        if callback is not None:
            callback(it, s, trace)
        if it >= min_iters and max(ry, rv) / math.sqrt(n) < tol:
            converged = True
            break

    s_out = project_feasible(s, grid, eps, problem.energy_total)
    return AdmmResult(s=s_out, s_raw=s, y=y, v=v, lam=lam, mu=mu, eta=eta, n_iter=it,
                      converged=converged, trace=trace)
