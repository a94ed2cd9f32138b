"""Rician frequency-selective multi-user MIMO channels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import GridConfig, steering_matrix, to_freq_domain, to_time_domain


@dataclass(frozen=True)
class ChannelConfig:
    """Statistical channel description.

    ``los_angles`` holds one dominant-path direction per user (radians). Tap 0
    carries the line-of-sight component with unit total power per entry; tap
    ``t`` has power ``tap_power_profile[t] / tap_power_profile[0]`` relative to
    it.
    """

    n_taps: int = 4
    rician_k: float = 1.0
    los_angles: tuple = (-np.pi / 6, np.pi / 6)
    tap_power_profile: tuple | None = None
    noise_std: float = 0.0

    def __post_init__(self):
        if self.n_taps < 1:
            raise ValueError("n_taps must be >= 1")
        if self.rician_k < 0:
            raise ValueError("rician_k must be nonnegative")
        profile = self.profile
        if profile.shape != (self.n_taps,) or np.any(profile < 0):
            raise ValueError("tap_power_profile must be n_taps nonnegative values")
        if abs(profile.sum() - 1.0) > 1e-12:
            raise ValueError(f"tap_power_profile sums to {profile.sum()}, expected 1")
        if profile[0] <= 0:
            raise ValueError("tap 0 must carry power")

    @property
    def profile(self) -> np.ndarray:
        if self.tap_power_profile is None:
            return np.full(self.n_taps, 1.0 / self.n_taps)
        return np.asarray(self.tap_power_profile, dtype=float)

    @property
    def n_users(self) -> int:
        return len(self.los_angles)


@dataclass(frozen=True)
class ChannelRealization:
    """Tap matrices ``(T, U, Nt)`` and per-subcarrier responses ``(Ns, U, Nt)``."""

    taps: np.ndarray
    freq_blocks: np.ndarray
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n_sub = self.freq_blocks.shape[0]
        err = np.max(np.abs(freq_response(self.taps, n_sub) - self.freq_blocks), initial=0.0)
        if err > 1e-12 * max(1.0, np.max(np.abs(self.taps), initial=0.0)):
            raise ValueError(f"freq_blocks inconsistent with taps (max err {err:.3g})")

    @property
    def n_users(self) -> int:
        return self.freq_blocks.shape[1]

    @property
    def n_sub(self) -> int:
        return self.freq_blocks.shape[0]

    @property
    def n_tx(self) -> int:
        return self.freq_blocks.shape[2]

    @classmethod
    def from_taps(cls, taps, n_sub: int, seed=None, **meta) -> ChannelRealization:
        taps = np.asarray(taps, dtype=complex)
        return cls(taps=taps, freq_blocks=freq_response(taps, n_sub), seed=seed, meta=meta)


def freq_response(taps, n_sub: int) -> np.ndarray:
    """``H_n = sum_t H_t exp(-j 2 pi t n / Ns)`` for every subcarrier ``n``."""
    taps = np.asarray(taps, dtype=complex)
    t = np.arange(taps.shape[0])
    phase = np.exp(-2j * np.pi * np.outer(np.arange(n_sub), t) / n_sub)
    return np.einsum("nt,tuk->nuk", phase, taps)


def assemble_freq_response(taps, grid: GridConfig) -> np.ndarray:
    return freq_response(taps, grid.n_sub)


def _cgauss(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_rician_taps(cfg: ChannelConfig, grid: GridConfig, seed: int) -> ChannelRealization:
    """Draw one channel realization.

    User ``u`` gets a line-of-sight row ``a(theta_u)^T`` with a uniformly random
    phase on tap 0, mixed with scattered Gaussian entries at ratio ``K``. The
    remaining taps are scattered only.
    """
    rng = np.random.default_rng(seed)
    n_users = cfg.n_users
    profile = cfg.profile
    scale = np.sqrt(profile / profile[0])
    taps = _cgauss(rng, (cfg.n_taps, n_users, grid.n_tx)) * scale[:, None, None]

    k = cfg.rician_k
    if np.isinf(k):
        los_w, nlos_w = 1.0, 0.0
    else:
        los_w, nlos_w = np.sqrt(k / (k + 1.0)), np.sqrt(1.0 / (k + 1.0))
    phases = np.exp(2j * np.pi * rng.random(n_users))
    los = steering_matrix(cfg.los_angles, grid.n_tx).T * phases[:, None]
    taps[0] = los_w * los + nlos_w * taps[0]
    return ChannelRealization.from_taps(taps, grid.n_sub, seed=seed, rician_k=k)


def awgn(length: int, noise_std: float, seed) -> np.ndarray:
    """Circularly-symmetric complex Gaussian noise, variance ``noise_std**2`` per entry."""
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return noise_std * _cgauss(rng, (length,))


def apply_freq_channel(h: ChannelRealization, x) -> np.ndarray:
    """``H x`` for a subcarrier-domain vector, computed blockwise."""
    xb = np.asarray(x).reshape(h.n_sub, h.n_tx)
    return np.einsum("nuk,nk->nu", h.freq_blocks, xb).reshape(-1)


def apply_freq_channel_adjoint(h: ChannelRealization, r) -> np.ndarray:
    rb = np.asarray(r).reshape(h.n_sub, h.n_users)
    return np.einsum("nuk,nu->nk", h.freq_blocks.conj(), rb).reshape(-1)


def effective_matrix_apply(h: ChannelRealization, vec, grid: GridConfig, adjoint: bool = False):
    """Apply ``H (F kron I)`` to a time-domain vector, or its adjoint to a user-domain one.

    For an oversampled ``grid`` the folded DFT replaces ``F`` so that only the
    in-band content of ``vec`` reaches the users.
    """
    vec = np.asarray(vec)
    if adjoint:
        if vec.shape != (grid.n_sub * h.n_users,):
            raise ValueError(f"adjoint input has shape {vec.shape}")
        return to_time_domain(apply_freq_channel_adjoint(h, vec), grid)
    if vec.shape != (grid.time_len,):
        raise ValueError(f"input has shape {vec.shape}, expected ({grid.time_len},)")
    return apply_freq_channel(h, to_freq_domain(vec, grid))


def channel_gram(h: ChannelRealization) -> np.ndarray:
    """Per-subcarrier ``H_n^H H_n``, shape ``(Ns, Nt, Nt)``."""
    return np.einsum("nuk,nul->nkl", h.freq_blocks.conj(), h.freq_blocks)


def dense_freq_matrix(h: ChannelRealization) -> np.ndarray:
    """Block-diagonal ``H`` as a dense matrix (test oracle)."""
    from scipy.linalg import block_diag

    return block_diag(*h.freq_blocks)


def channel_to_dict(h: ChannelRealization) -> dict:
    return {
        "format": "isacwave-channel/1",
        "seed": h.seed,
        "n_sub": h.n_sub,
        "meta": {k: v for k, v in h.meta.items() if np.isscalar(v) or v is None},
        "taps": np.stack([h.taps.real, h.taps.imag], axis=-1).tolist(),
    }


def channel_from_dict(d: dict) -> ChannelRealization:
    taps = np.asarray(d["taps"], dtype=float)
    return ChannelRealization.from_taps(
        taps[..., 0] + 1j * taps[..., 1], int(d["n_sub"]), seed=d.get("seed"), **d.get("meta", {})
    )
