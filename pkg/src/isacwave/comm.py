"""Communication-side metrics: MUI, per-antenna PAPR, QPSK, SER and sum rate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .channel import ChannelRealization, apply_freq_channel, awgn
from .operators import GridConfig, per_antenna, to_time_domain

QPSK_POINTS = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2.0)


@dataclass(frozen=True)
class PaprReport:
    per_antenna: np.ndarray  # linear ratios
    max_db: float

    @property
    def per_antenna_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.per_antenna)


def mui_energy(h: ChannelRealization, x, s_d) -> float:
    """``||H x - s_D||^2``."""
    return float(np.sum(np.abs(apply_freq_channel(h, x) - np.asarray(s_d)) ** 2))


def papr_time(s, grid: GridConfig) -> PaprReport:
    """Per-antenna PAPR of an interleaved time-domain sequence (CP excluded)."""
    power = np.abs(per_antenna(s, grid)) ** 2
    mean = power.mean(axis=0)
    if np.any(mean <= 0):
        raise ValueError("antenna silent: zero energy on at least one antenna")
    ratios = power.max(axis=0) / mean
    return PaprReport(ratios, float(10.0 * np.log10(ratios.max())))


def papr(x, grid: GridConfig) -> PaprReport:
    """Per-antenna PAPR of a subcarrier-domain vector.

    An oversampled ``grid`` measures on the ``os_rate``-times denser time grid.
    """
    return papr_time(to_time_domain(x, grid), grid)


# ---------------------------------------------------------------------------
# QPSK
# ---------------------------------------------------------------------------


def qpsk_modulate(bits) -> np.ndarray:
    """Gray-mapped unit-energy QPSK; bit pairs map to (I, Q) signs."""
    bits = np.asarray(bits, dtype=np.int8).reshape(-1, 2)
    return ((1 - 2 * bits[:, 0]) + 1j * (1 - 2 * bits[:, 1])) / np.sqrt(2.0)


def qpsk_detect(y) -> np.ndarray:
    """Nearest-point decisions returned as bits."""
    y = np.asarray(y)
    return np.stack([(y.real < 0), (y.imag < 0)], axis=1).astype(np.int8).reshape(-1)


def qpsk_slice(y) -> np.ndarray:
    y = np.asarray(y)
    return (np.where(y.real < 0, -1.0, 1.0) + 1j * np.where(y.imag < 0, -1.0, 1.0)) / np.sqrt(2.0)


def random_symbols(n_sub: int, n_users: int, seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return qpsk_modulate(rng.integers(0, 2, size=2 * n_sub * n_users))


def qpsk_ser_theory(esn0_db: float) -> float:
    """Exact SER of Gray QPSK on AWGN: ``2Q(sqrt(Es/N0)) - Q(sqrt(Es/N0))^2``."""
    q = 0.5 * erfc(np.sqrt(10.0 ** (esn0_db / 10.0)) / np.sqrt(2.0))
    return float(2 * q - q * q)


def esn0_to_noise_std(esn0_db: float, symbol_energy: float = 1.0) -> float:
    return float(np.sqrt(symbol_energy / 10.0 ** (esn0_db / 10.0)))


def empirical_ser(h: ChannelRealization, x, s_d, noise_std: float, n_trials: int, seed) -> float:
    """Symbol error rate of ``y = H x + z`` with per-symbol QPSK slicing."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    s_d = np.asarray(s_d)
    clean = apply_freq_channel(h, x)
    errors = 0
    for child in np.random.SeedSequence(seed).spawn(n_trials):
        y = clean + awgn(clean.size, noise_std, np.random.default_rng(child))
        errors += np.count_nonzero(~np.isclose(qpsk_slice(y), s_d))
    return errors / (n_trials * s_d.size)


def sum_rate(h: ChannelRealization, x, s_d, noise_std: float) -> float:
    """Sum rate in bit/s/Hz treating residual MUI as Gaussian interference."""
    if noise_std <= 0:
        raise ValueError("noise_std must be positive")
    s_d = np.asarray(s_d)
    mui = np.abs(apply_freq_channel(h, x) - s_d) ** 2
    sinr = np.abs(s_d) ** 2 / (mui + noise_std**2)
    return float(np.sum(np.log2(1.0 + sinr)) / h.n_sub)
