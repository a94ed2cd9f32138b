"""Beampattern, ambiguity function and sidelobe metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import GridConfig, direction_apply, steering_matrix

ISLR_FLOOR_DB = -300.0


@dataclass(frozen=True)
class RadarScene:
    """Target angles, beampattern grid/mask and the delay-Doppler region.

    All angles are in radians. ``delay_doppler`` is a sequence of ``(k, f)``
    pairs that must not contain ``(0, 0)``.
    """

    target_angles: np.ndarray
    pattern_grid: np.ndarray
    ideal_pattern: np.ndarray
    delay_doppler: tuple

    def __post_init__(self):
        object.__setattr__(self, "target_angles", np.atleast_1d(np.asarray(self.target_angles, float)))
        object.__setattr__(self, "pattern_grid", np.atleast_1d(np.asarray(self.pattern_grid, float)))
        object.__setattr__(self, "ideal_pattern", np.atleast_1d(np.asarray(self.ideal_pattern, float)))
        object.__setattr__(self, "delay_doppler", tuple((int(k), float(f)) for k, f in self.delay_doppler))
        if self.ideal_pattern.shape != self.pattern_grid.shape:
            raise ValueError("ideal_pattern and pattern_grid differ in length")
        if np.any(self.ideal_pattern < 0):
            raise ValueError("ideal_pattern must be nonnegative")
        if (0, 0.0) in self.delay_doppler:
            raise ValueError("delay_doppler must exclude the mainlobe (0, 0)")
        for theta in self.target_angles:
            if not np.any(np.isclose(self.pattern_grid, theta, atol=1e-12)):
                raise ValueError(f"target angle {np.degrees(theta):.3f} deg not on pattern grid")

    @property
    def delays(self) -> np.ndarray:
        return np.array([k for k, _ in self.delay_doppler], dtype=int)

    @property
    def dopplers(self) -> np.ndarray:
        return np.array([f for _, f in self.delay_doppler], dtype=float)


@dataclass(frozen=True)
class AmbiguitySurface:
    theta: float
    delays: np.ndarray
    dopplers: np.ndarray
    values: np.ndarray  # (len(delays), len(dopplers))
    peak: float


def rect_mask(grid_angles, target_angles, width: float, total_power: float) -> np.ndarray:
    """Flat-top mask of angular ``width`` around each target.

    The level is chosen so the mask radiates ``total_power`` per sample: for a
    half-wavelength ULA ``(1/2) * integral b(theta) cos(theta) dtheta`` equals
    the per-sample power summed over antennas.
    """
    grid_angles = np.asarray(grid_angles, float)
    inside = np.zeros(grid_angles.shape, bool)
    for t in np.atleast_1d(target_angles):
        inside |= np.abs(grid_angles - t) <= width / 2 + 1e-9
    weights = _angle_weights(grid_angles)
    area = 0.5 * np.sum(np.cos(grid_angles[inside]) * weights[inside])
    mask = np.zeros(grid_angles.shape)
    if area > 0:
        mask[inside] = total_power / area
    return mask


def mask_power(scene: RadarScene) -> float:
    """Per-sample radiated power (summed over antennas) implied by the ideal mask."""
    w = _angle_weights(scene.pattern_grid)
    return float(0.5 * np.sum(scene.ideal_pattern * np.cos(scene.pattern_grid) * w))


def _angle_weights(angles) -> np.ndarray:
    """Cell widths of a sorted angle grid, cells bounded by midpoints."""
    angles = np.asarray(angles, float)
    if angles.size == 1:
        return np.ones(1)
    edges = np.concatenate([[angles[0]], (angles[1:] + angles[:-1]) / 2, [angles[-1]]])
    return np.diff(edges)


def default_scene(
    grid: GridConfig,
    target_angles_deg=(-30.0, 30.0),
    avg_power: float = 1.0,
    mask_width_deg: float = 10.0,
    max_delay: int | None = None,
    dopplers=(0.0,),
    pattern_step_deg: float = 1.0,
) -> RadarScene:
    """Scene with a rectangular two-lobe mask over -90..90 degrees.

    ``avg_power`` is the average power per sample per antenna; ``max_delay``
    defaults to ``n_cp_samp`` (32 Nyquist, 64 at twofold oversampling).
    """
    if max_delay is None:
        max_delay = grid.n_cp_samp
    pattern = np.radians(np.arange(-90.0, 90.0 + pattern_step_deg / 2, pattern_step_deg))
    targets = np.radians(np.asarray(target_angles_deg, float))
    # snap targets onto the grid so the subset invariant holds exactly
    targets = pattern[np.argmin(np.abs(pattern[None, :] - targets[:, None]), axis=1)]
    mask = rect_mask(pattern, targets, np.radians(mask_width_deg), grid.n_tx * avg_power)
    pairs = tuple((k, f) for f in dopplers for k in range(-max_delay, max_delay + 1) if (k, f) != (0, 0.0))
    return RadarScene(targets, pattern, mask, pairs)


# ---------------------------------------------------------------------------
# Beampattern
# ---------------------------------------------------------------------------


def beam_pattern_cov(snapshots, theta_grid) -> np.ndarray:
    """Average of ``|a(theta)^T s_n|^2`` over the given per-symbol snapshots.

    The transpose matches the direction operator, so this agrees with
    :func:`beam_pattern_time` on CP-extended snapshots.
    """
    snaps = np.asarray(snapshots)
    if snaps.ndim != 2 or snaps.shape[0] == 0:
        raise ValueError("need at least one snapshot, shape (N, n_tx)")
    a = steering_matrix(theta_grid, snaps.shape[1])
    return np.mean(np.abs(snaps @ a) ** 2, axis=0)


def beam_pattern_time(s, theta_grid, grid: GridConfig) -> np.ndarray:
    """``||G(theta) s||^2 / frame_len`` for each angle."""
    sv = direction_apply(s, theta_grid, grid)
    return np.sum(np.abs(sv) ** 2, axis=0) / grid.frame_len


def pattern_mismatch(s, scene: RadarScene, grid: GridConfig) -> float:
    """Euclidean distance between the realized beampattern and the mask."""
    b = beam_pattern_time(s, scene.pattern_grid, grid)
    return float(np.linalg.norm(b - scene.ideal_pattern))


# ---------------------------------------------------------------------------
# Ambiguity
# ---------------------------------------------------------------------------


def correlations(sv, delays, dopplers) -> np.ndarray:
    """``sv^H J_k D_f sv`` for every delay/Doppler pair on the outer grid.

    ``sv`` may be 1-D or ``(L, n_dirs)``; the result has shape
    ``(len(delays), len(dopplers))`` or ``(len(delays), len(dopplers), n_dirs)``.
    """
    sv = np.asarray(sv)
    squeeze = sv.ndim == 1
    if squeeze:
        sv = sv[:, None]
    n = sv.shape[0]
    delays = np.asarray(delays, dtype=int)
    dopplers = np.atleast_1d(np.asarray(dopplers, dtype=float))
    ramp = np.exp(2j * np.pi * np.outer(dopplers, np.arange(1, n + 1)))  # (F, L)
    out = np.zeros((delays.size, dopplers.size, sv.shape[1]), dtype=complex)
    for i, k in enumerate(delays):
        if abs(k) >= n:
            continue
        # (J_k w)_m = w_{m-k}
        if k >= 0:
            lhs, rhs, r = sv[k:], sv[: n - k], ramp[:, : n - k]
        else:
            lhs, rhs, r = sv[: n + k], sv[-k:], ramp[:, -k:]
        out[i] = np.einsum("ld,fl,ld->fd", lhs.conj(), r, rhs)
    return out[..., 0] if squeeze else out


def ambiguity(s, theta: float, delays, dopplers, grid: GridConfig) -> AmbiguitySurface:
    """``|s_v^H J_k D_f s_v|^2`` on a delay x Doppler grid for one direction."""
    delays = np.asarray(delays, dtype=int)
    if np.any(np.abs(delays) > grid.frame_len):
        raise ValueError("delay outside +-frame_len")
    sv = direction_apply(s, [theta], grid)[:, 0]
    vals = np.abs(correlations(sv, delays, dopplers)) ** 2
    peak = float(np.sum(np.abs(sv) ** 2) ** 2)
    return AmbiguitySurface(float(theta), delays, np.atleast_1d(np.asarray(dopplers, float)), vals, peak)


def _pair_values(s, scene: RadarScene, grid: GridConfig) -> tuple[np.ndarray, np.ndarray]:
    """Ambiguity on ``scene.delay_doppler`` per target (shape ``(n_pairs, n_targets)``) and the peaks."""
    sv = direction_apply(s, scene.target_angles, grid)
    dop = scene.dopplers
    vals = np.empty((len(scene.delay_doppler), sv.shape[1]))
    for f in np.unique(dop):
        sel = np.flatnonzero(dop == f)
        c = correlations(sv, scene.delays[sel], [f])[:, 0, :]
        vals[sel] = np.abs(c) ** 2
    peaks = np.sum(np.abs(sv) ** 2, axis=0) ** 2
    return vals, peaks


def isl(s, scene: RadarScene, grid: GridConfig) -> float:
    """Integrated sidelobe level over the target angles and delay-Doppler region."""
    if not scene.delay_doppler:
        raise ValueError("empty delay-Doppler region")
    vals, _ = _pair_values(s, scene, grid)
    return float(vals.sum())


def islr(s, scene: RadarScene, grid: GridConfig) -> float:
    """Sidelobe-to-mainlobe ratio in dB, averaged (linearly) over target angles."""
    vals, peaks = _pair_values(s, scene, grid)
    if np.any(peaks <= 0):
        raise ValueError("degenerate waveform: zero mainlobe")
    ratio = np.mean(vals.sum(axis=0) / peaks)
    if ratio <= 0:
        return ISLR_FLOOR_DB
    return max(10.0 * np.log10(ratio), ISLR_FLOOR_DB)


def echo_snr(s, theta_target, loss_over_noise: float, grid: GridConfig) -> np.ndarray | float:
    """Received echo SNR (dB): beampattern toward the target times path loss over noise."""
    if loss_over_noise <= 0:
        raise ValueError("loss_over_noise must be positive")
    b = beam_pattern_time(s, np.atleast_1d(theta_target), grid)
    out = 10.0 * np.log10(b * loss_over_noise)
    return float(out[0]) if np.ndim(theta_target) == 0 else out
