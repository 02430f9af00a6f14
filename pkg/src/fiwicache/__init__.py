"""Joint transmit-power and cache optimization for cache-enabled FiWi networks."""

from .analysis import maximize_upper_bound, upper_bound
from .caching import zipf_popularity
from .config import InvalidConfig, NetworkConfig, load_config, validate_config
from .mckp import optimize
from .sim import Algorithm, run_benchmark, run_trial
from .waterfill import vabwf, verify_kkt

__all__ = [
    "Algorithm",
    "InvalidConfig",
    "NetworkConfig",
    "load_config",
    "maximize_upper_bound",
    "optimize",
    "run_benchmark",
    "run_trial",
    "upper_bound",
    "vabwf",
    "validate_config",
    "verify_kkt",
    "zipf_popularity",
]

__version__ = "0.1.0"
