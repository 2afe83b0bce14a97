"""UAV-enabled multi-user secure communications toolkit.

Simulates Rician air-to-ground channels, computes secrecy rates, trains a
permutation-equivariant graph beamformer unsupervised, and trains a soft
actor-critic agent to position the UAV for maximum sum secrecy rate.
"""

__version__ = "0.1.0"

from .channel import ChannelSet, ScenarioConfig, Topology  # noqa: F401
from .secrecy import RateReport, secrecy_report  # noqa: F401
