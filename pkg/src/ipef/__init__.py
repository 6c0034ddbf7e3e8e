"""p-fold integrated empirical processes: statistics, limit laws and simulation."""

from .distributions import DistSpec
from .empirical import Sample, integrated_edf
from .rng import RngStream

__all__ = ["DistSpec", "Sample", "RngStream", "integrated_edf"]
__version__ = "0.1.0"
