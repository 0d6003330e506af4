"""storebench: pluggable data-store load benchmark with runtime-mutable
workloads, a cluster control plane, and SLA-driven throughput tuning."""

__version__ = "0.1.0"

from .metrics import MetricsRegistry, SlaPolicy, StatsSnapshot
from .properties import PropertySet
from .workload import DistributionSpec, KeyGenerator, WorkloadConfig

__all__ = [
    "DistributionSpec",
    "KeyGenerator",
    "MetricsRegistry",
    "PropertySet",
    "SlaPolicy",
    "StatsSnapshot",
    "WorkloadConfig",
    "__version__",
]
