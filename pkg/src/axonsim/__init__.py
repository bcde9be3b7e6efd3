"""Cycle-level simulator and analytic cost model for conventional and Axon systolic arrays."""

__version__ = "0.1.0"

from .analytic import (ScaleOut, feed_latency, map_dims, scaled_runtime, single_tile_runtime,
                       speedup_report, utilization_rate)
from .core import (ArrayConfig, ConvLayer, Dataflow, GemmWorkload, Orchestration, SimResult,
                   SpatialMapping, TrafficReport, validate)
from .engine import simulate_gemm, verify

__all__ = [
    "ArrayConfig", "ConvLayer", "Dataflow", "GemmWorkload", "Orchestration", "ScaleOut",
    "SimResult", "SpatialMapping", "TrafficReport", "feed_latency", "map_dims",
    "scaled_runtime", "simulate_gemm", "single_tile_runtime", "speedup_report",
    "utilization_rate", "validate", "verify",
]
