"""Energy-efficient user scheduling and power allocation for downlink NOMA HetNets."""

from .config import ConfigError, NetworkConfig, PathLoss
from .harness import CampaignSpec, empirical_cdf, emit, run_campaign, run_trial, run_trial_schemes
from .noma import Assignment, PowerAllocation, TrialReport, energy_efficiency
from .topology import ChannelRealization, Topology, estimate_csi, generate_topology, sample_channels

__all__ = [
    "Assignment",
    "CampaignSpec",
    "ChannelRealization",
    "ConfigError",
    "NetworkConfig",
    "PathLoss",
    "PowerAllocation",
    "Topology",
    "TrialReport",
    "empirical_cdf",
    "emit",
    "energy_efficiency",
    "estimate_csi",
    "generate_topology",
    "run_campaign",
    "run_trial",
    "run_trial_schemes",
    "sample_channels",
]
