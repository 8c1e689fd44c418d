"""twochan - two-channel Kalman filtering with intermittent measurements."""

__version__ = "0.1.0"
__author__ = "twochan developers"

from .config import Config
from .cache import CacheManager
from .formatter import ReportFormatter
from .model_core import SystemModel, load_model_config
from .stability import RatePair, analyze_pair, check_boundedness, trace_bound
from .scheduler import CandidateSet, optimize_rates
from .sim import SimConfig, run

__all__ = [
    "Config",
    "CacheManager",
    "ReportFormatter",
    "SystemModel",
    "load_model_config",
    "RatePair",
    "analyze_pair",
    "check_boundedness",
    "trace_bound",
    "CandidateSet",
    "optimize_rates",
    "SimConfig",
    "run",
]
