"""Structural linear operators of the MIMO-OFDM signal model.

Vectors follow one global layout: time (or subcarrier) index major, antenna
index fastest. A frequency-domain vector ``x`` of length ``n_sub * n_tx``
therefore reshapes to ``(n_sub, n_tx)`` and its row ``n`` is the precoded
vector of subcarrier ``n``.

Every operator is applied matrix-free. The ``*_matrix`` builders exist only
as test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class GridConfig:
    """OFDM / array dimensions.

    Attributes:
        n_tx: number of transmit antennas.
        n_sub: number of subcarriers (even).
        n_cp: cyclic prefix length in Nyquist samples.
        os_rate: time-domain oversampling rate, 1 for Nyquist sampling.
    """

    n_tx: int
    n_sub: int
    n_cp: int
    os_rate: int = 1

    def __post_init__(self):
        for name in ("n_tx", "n_sub", "n_cp", "os_rate"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if self.n_sub % 2:
            raise ValueError(f"n_sub must be even, got {self.n_sub}")
        if self.n_cp > self.n_sub:
            raise ValueError(f"n_cp ({self.n_cp}) exceeds n_sub ({self.n_sub})")

    @property
    def n_samp(self) -> int:
        """Effective time samples per antenna."""
        return self.os_rate * self.n_sub

    @property
    def n_cp_samp(self) -> int:
        return self.os_rate * self.n_cp

    @property
    def frame_len(self) -> int:
        """Samples per antenna including the cyclic prefix."""
        return self.n_samp + self.n_cp_samp

    @property
    def freq_len(self) -> int:
        return self.n_sub * self.n_tx

    @property
    def time_len(self) -> int:
        return self.n_samp * self.n_tx

    @property
    def oversampled(self) -> bool:
        return self.os_rate > 1

    def nyquist(self) -> GridConfig:
        return replace(self, os_rate=1)


def _check_len(vec, expected, what="vector"):
    vec = np.asarray(vec)
    if vec.ndim != 1 or vec.shape[0] != expected:
        raise ValueError(f"{what} has shape {vec.shape}, expected ({expected},)")
    return vec


# ---------------------------------------------------------------------------
# DFT family
# ---------------------------------------------------------------------------


def dft_matrix(grid: GridConfig) -> np.ndarray:
    """Unitary ``n_sub x n_sub`` DFT matrix."""
    n = grid.n_sub
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def oversampled_dft_matrix(grid: GridConfig) -> np.ndarray:
    """Unitary DFT matrix of size ``os_rate * n_sub``."""
    n = grid.n_samp
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def folded_bins(grid: GridConfig) -> np.ndarray:
    """Indices on the oversampled frequency grid occupied by the subcarriers.

    The lower half of the subcarriers keeps its index, the upper half wraps to
    the top of the ``os_rate * n_sub`` grid.
    """
    half = grid.n_sub // 2
    low = np.arange(half)
    high = (grid.os_rate - 1) * grid.n_sub + np.arange(half, grid.n_sub)
    return np.concatenate([low, high])


def folded_dft_matrix(grid: GridConfig) -> np.ndarray:
    """``n_sub x (os_rate * n_sub)`` DFT rows at the occupied bins.

    Normalized by ``1/sqrt(os_rate * n_sub)`` so that the rows are orthonormal
    and ``(F_os^H kron I) interpolate(x) == (F_fold^H kron I) x`` holds.
    """
    n = grid.n_samp
    return np.exp(-2j * np.pi * np.outer(folded_bins(grid), np.arange(n)) / n) / np.sqrt(n)


def interpolate_oversample(x, grid: GridConfig) -> np.ndarray:
    """Zero-pad a subcarrier vector in the middle of the band."""
    x = _check_len(x, grid.freq_len, "x")
    blocks = x.reshape(grid.n_sub, grid.n_tx)
    out = np.zeros((grid.n_samp, grid.n_tx), dtype=complex)
    out[folded_bins(grid)] = blocks
    return out.reshape(-1)


def to_time_domain(x, grid: GridConfig) -> np.ndarray:
    """Per-antenna inverse DFT.

    ``x`` may be the ``n_sub * n_tx`` precoded vector (zero-interpolated first
    when ``grid`` is oversampled) or an already interpolated vector of length
    ``os_rate * n_sub * n_tx``.
    """
    x = np.asarray(x)
    if x.ndim == 1 and x.shape[0] == grid.freq_len and grid.oversampled:
        x = interpolate_oversample(x, grid)
    x = _check_len(x, grid.time_len, "x")
    blocks = x.reshape(grid.n_samp, grid.n_tx)
    return np.fft.ifft(blocks, axis=0, norm="ortho").reshape(-1)


def to_freq_domain(s, grid: GridConfig, full: bool = False) -> np.ndarray:
    """Adjoint of :func:`to_time_domain`.

    Returns the ``n_sub * n_tx`` subcarrier vector; out-of-band content of an
    oversampled ``s`` is discarded unless ``full`` is set, in which case the
    whole ``os_rate * n_sub`` spectrum is returned.
    """
    s = _check_len(s, grid.time_len, "s")
    spec = np.fft.fft(s.reshape(grid.n_samp, grid.n_tx), axis=0, norm="ortho")
    if not full:
        spec = spec[folded_bins(grid)]
    return spec.reshape(-1)


# ---------------------------------------------------------------------------
# Selection / cyclic prefix
# ---------------------------------------------------------------------------


def add_cp(s, grid: GridConfig) -> np.ndarray:
    """Prepend the trailing ``n_cp_samp`` symbol blocks to ``s``."""
    s = _check_len(s, grid.time_len, "s")
    blocks = s.reshape(grid.n_samp, grid.n_tx)
    return np.concatenate([blocks[grid.n_samp - grid.n_cp_samp:], blocks]).reshape(-1)


def remove_cp_adjoint(s_cp, grid: GridConfig) -> np.ndarray:
    """Adjoint of :func:`add_cp`: fold the CP blocks back onto their sources."""
    s_cp = _check_len(s_cp, grid.frame_len * grid.n_tx, "s_cp")
    blocks = s_cp.reshape(grid.frame_len, grid.n_tx)
    out = blocks[grid.n_cp_samp:].copy()
    out[grid.n_samp - grid.n_cp_samp:] += blocks[: grid.n_cp_samp]
    return out.reshape(-1)


def cp_matrix(grid: GridConfig) -> np.ndarray:
    """Dense CP-extension matrix (test oracle)."""
    n = grid.time_len
    n_cp = grid.n_cp_samp * grid.n_tx
    gamma_cp = np.zeros((n_cp, n))
    gamma_cp[np.arange(n_cp), np.arange(n_cp) + n - n_cp] = 1.0
    return np.vstack([gamma_cp, np.eye(n)])


def antenna_select(s, l: int, grid: GridConfig) -> np.ndarray:
    """Samples of antenna ``l`` (0-based) from an interleaved vector."""
    if not 0 <= l < grid.n_tx:
        raise IndexError(f"antenna index {l} out of range [0, {grid.n_tx})")
    s = np.asarray(s)
    if s.ndim != 1 or s.shape[0] % grid.n_tx:
        raise ValueError(f"vector length {s.shape} not a multiple of n_tx={grid.n_tx}")
    return s[l:: grid.n_tx]


def per_antenna(s, grid: GridConfig) -> np.ndarray:
    """View ``s`` as ``(samples, n_tx)``; column ``l`` is antenna ``l``."""
    s = np.asarray(s)
    return s.reshape(-1, grid.n_tx)


# ---------------------------------------------------------------------------
# Spatial operators
# ---------------------------------------------------------------------------


def steering_matrix(thetas, n_tx: int) -> np.ndarray:
    """Steering vectors for several angles as columns, shape ``(n_tx, len(thetas))``."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    n = np.arange(1, n_tx + 1) - n_tx / 2
    return np.exp(1j * np.pi * np.outer(n, np.sin(thetas)))


def steering_vector(theta: float, grid: GridConfig) -> np.ndarray:
    """Half-wavelength ULA steering vector, entries ``exp(j(n - Nt/2) pi sin theta)``."""
    return steering_matrix([theta], grid.n_tx)[:, 0]


def direction_apply(s, thetas, grid: GridConfig) -> np.ndarray:
    """Waveforms radiated toward each angle, ``G(theta) s``.

    Returns an array of shape ``(frame_len, len(thetas))``; column ``i`` is the
    CP-extended sequence seen in direction ``thetas[i]``.
    """
    blocks = add_cp(s, grid).reshape(grid.frame_len, grid.n_tx)
    return blocks @ steering_matrix(thetas, grid.n_tx)


def direction_adjoint(w, thetas, grid: GridConfig) -> np.ndarray:
    """``sum_i G(thetas[i])^H w[:, i]`` for ``w`` of shape ``(frame_len, len(thetas))``."""
    w = np.asarray(w).reshape(grid.frame_len, -1)
    a = steering_matrix(thetas, grid.n_tx)
    return remove_cp_adjoint((w @ a.conj().T).reshape(-1), grid)


def direction_matrix(theta: float, grid: GridConfig) -> np.ndarray:
    """Dense ``G(theta)`` (test oracle)."""
    a = steering_vector(theta, grid)
    return np.kron(np.eye(grid.frame_len), a[None, :]) @ cp_matrix(grid)


def delay_doppler_apply(sv, k: int, f: float) -> np.ndarray:
    """``J_k D_f sv``: Doppler phase ramp then a zero-filled delay by ``k``."""
    sv = np.asarray(sv)
    n = sv.shape[0]
    ramp = sv * np.exp(2j * np.pi * f * np.arange(1, n + 1))
    out = np.zeros(n, dtype=complex)
    if k >= n or k <= -n:
        return out
    if k >= 0:
        out[k:] = ramp[: n - k]
    else:
        out[:k] = ramp[-k:]
    return out


def delay_doppler_matrix(n: int, k: int, f: float) -> np.ndarray:
    """Dense ``J_k D_f`` (test oracle)."""
    shift = np.eye(n, k=-k)
    return shift @ np.diag(np.exp(2j * np.pi * f * np.arange(1, n + 1)))
