"""ISAC MIMO-OFDM waveform design: ideal radar waveforms and PAPR-constrained ADMM precoding."""

from .admm import IsacProblem, derive_eps, eta_bound, run_admm
from .channel import ChannelConfig, ChannelRealization, sample_rician_taps
from .config import ExperimentConfig, load_config
from .ideal import IdealObjectiveSpec, LbfgsConfig, lbfgs_minimize, normalize_energy
from .operators import GridConfig
from .radar import RadarScene, default_scene

__all__ = [
    "ChannelConfig",
    "ChannelRealization",
    "ExperimentConfig",
    "GridConfig",
    "IdealObjectiveSpec",
    "IsacProblem",
    "LbfgsConfig",
    "RadarScene",
    "default_scene",
    "derive_eps",
    "eta_bound",
    "lbfgs_minimize",
    "load_config",
    "normalize_energy",
    "run_admm",
    "sample_rician_taps",
]

__version__ = "0.1.0"
