"""Experiment configuration, config files and derived seeds."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .operators import GridConfig


class ConfigError(ValueError):
    """Bad or unreadable configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment needs; defaults reproduce the reference setup.

    ``os_rate`` is the oversampling factor used whenever ``oversample`` is set.
    ``energy_total`` defaults to ``(n_sub + n_cp) / n_sub`` so that the
    CP-free frame energy is exactly 1.
    """

    carrier_hz: float = 28e9
    subcarrier_spacing_hz: float = 300e3
    n_tx: int = 8
    n_sub: int = 40
    n_cp: int = 32
    n_users: int = 2
    target_angles_deg: tuple = (-30.0, 30.0)
    os_rate: int = 2
    oversample: bool = False
    n_taps: int = 4
    rician_k: float = 1.0
    n_mc: int = 50

    mask_width_deg: float = 10.0
    dopplers: tuple = (0.0,)
    lbfgs_iters: int = 500

    rho: float = 0.5
    papr_db: float = 3.0
    energy_total: float | None = None
    eta: float | None = None
    admm_max_iters: int = 2000
    admm_tol: float = 1e-6

    rho_grid: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    papr_grid_db: tuple = (1.0, 2.0, 3.0, 5.0)
    esn0_grid_db: tuple = (0.0, 5.0, 10.0, 15.0)
    esn0_db: float = 10.0
    ser_trials: int = 200
    loss_over_noise: float = 1.0

    seed: int = 0
    workers: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        for name in ("target_angles_deg", "dopplers", "rho_grid", "papr_grid_db", "esn0_grid_db"):
            val = getattr(self, name)
            if not isinstance(val, (list, tuple)):
                val = (val,)
            object.__setattr__(self, name, tuple(float(v) for v in val))
        # canonical numeric types keep the hash independent of how a file spelled 3 vs 3.0
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if isinstance(f.default, float) and val is not None:
                object.__setattr__(self, f.name, float(val))
        if self.n_users != len(self.target_angles_deg):
            raise ConfigError("n_users must equal the number of target angles (users sit at the targets)")
        if not 0.0 <= self.rho <= 1.0 or any(not 0.0 <= r <= 1.0 for r in self.rho_grid):
            raise ConfigError("rho values must lie in [0, 1]")
        if self.papr_db < 0 or any(p < 0 for p in self.papr_grid_db):
            raise ConfigError("PAPR limits must be >= 0 dB")
        if self.n_mc < 1 or self.ser_trials < 1:
            raise ConfigError("n_mc and ser_trials must be >= 1")
        if self.eta is not None and not self.eta > 0:
            raise ConfigError("eta must be positive")
        if self.energy_total is not None and not self.energy_total > 0:
            raise ConfigError("energy_total must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            self.grid()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self, oversample: bool | None = None) -> GridConfig:
        over = self.oversample if oversample is None else oversample
        return GridConfig(self.n_tx, self.n_sub, self.n_cp, self.os_rate if over else 1)

    @property
    def total_energy(self) -> float:
        if self.energy_total is not None:
            return float(self.energy_total)
        return (self.n_sub + self.n_cp) / self.n_sub

    def replace(self, **changes) -> ExperimentConfig:
        try:
            return dataclasses.replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        """Stable digest of the canonicalized config (``out_dir`` and ``workers`` excluded)."""
        d = self.to_dict()
        d.pop("out_dir")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _flatten(tree: dict, prefix: str = "") -> dict:
    flat = {}
    for key, val in tree.items():
        if isinstance(val, dict):
            flat.update(_flatten(val, f"{prefix}{key}."))
        elif key in flat:
            raise ConfigError(f"duplicate key {key!r}")
        else:
            if key not in FIELDS:
                raise ConfigError(f"unknown config key {prefix}{key!r}")
            flat[key] = val
    return flat


def config_from_dict(tree: dict) -> ExperimentConfig:
    """Build a config from a (possibly sectioned) mapping; sections are cosmetic."""
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    flat = _flatten(tree)
    try:
        return ExperimentConfig(**flat)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Read a JSON or YAML config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    try:
        if path.suffix.lower() == ".json":
            tree = json.loads(text)
        else:
            import yaml

            tree = yaml.safe_load(text) or {}
    except Exception as exc:  # parser errors differ by backend
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    return config_from_dict(tree)


def derive_seed(master: int, experiment: str, index: int = 0) -> int:
    """Order-independent child seed from ``(master, experiment, index)``."""
    digest = hashlib.sha256(f"{int(master)}|{experiment}|{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
