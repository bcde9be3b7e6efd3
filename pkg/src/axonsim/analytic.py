"""
Closed-form timing for conventional and Axon systolic arrays.

A tile that fills an R x C array costs ``feed + T + R`` cycles, where ``feed``
is the time for operands to reach the farthest PE:

    conventional: R + C - 2   (Manhattan distance from the top-left edge feeders)
    axon:         max(R, C) - 1   (distance from the principal-diagonal feeders)

Larger problems are tiled (scale-up) or partitioned across several arrays
(scale-out); every tile is charged the full-tile cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from statistics import mean
from typing import Iterable, Optional

from .core import ArrayConfig, Dataflow, GemmWorkload, Orchestration, SpatialMapping
from .errors import DimensionError, PartitionError


@dataclass(frozen=True)
class ScaleOut:
    """Partition the spatial dims across ``p_r * p_c`` identical arrays."""

    p_r: int
    p_c: int

    def __post_init__(self):
        if self.p_r < 1 or self.p_c < 1:
            raise PartitionError(f"partition counts must be >= 1, got {self.p_r}x{self.p_c}")

    def __str__(self) -> str:
        return f"out:{self.p_r}x{self.p_c}"


SCALE_UP = None  # mode value meaning one monolithic array


def parse_mode(text: str) -> Optional[ScaleOut]:
    """``"up"`` -> scale-up, ``"out:PRxPC"`` -> :class:`ScaleOut`."""
    text = text.strip().lower()
    if text == "up":
        return SCALE_UP
    if text.startswith("out:"):
        try:
            pr, pc = text[4:].split("x")
            return ScaleOut(int(pr), int(pc))
        except ValueError:
            pass
    raise PartitionError(f"bad scale mode {text!r}; expected 'up' or 'out:PRxPC'")


@dataclass(frozen=True)
class RuntimeBreakdown:
    feed_latency: int
    temporal: int
    readout: int
    total: int
    tiles_r: int = 1
    tiles_c: int = 1
    preload: int = 0  # per tile; only part of ``total`` when include_preload
    include_preload: bool = False
    partitions: int = 1

    @property
    def tiles(self) -> int:
        return self.tiles_r * self.tiles_c

    @property
    def per_tile(self) -> int:
        return self.feed_latency + self.temporal + self.readout + (
            self.preload if self.include_preload else 0)

    def to_dict(self) -> dict:
        return {
            "feed_latency": self.feed_latency, "temporal": self.temporal,
            "readout": self.readout, "total": self.total, "tiles_r": self.tiles_r,
            "tiles_c": self.tiles_c, "preload": self.preload,
            "include_preload": self.include_preload, "partitions": self.partitions,
        }


def _positive(**dims: int) -> None:
    for name, value in dims.items():
        if value < 1:
            raise DimensionError(f"{name} must be >= 1, got {value}")


def map_dims(dataflow: Dataflow | str, m: int, k: int, n: int) -> SpatialMapping:
    """Project GEMM (M, K, N) onto (spatial rows, spatial cols, temporal)."""
    _positive(m=m, k=k, n=n)
    dataflow = Dataflow(dataflow)
    if dataflow is Dataflow.OS:
        return SpatialMapping(m, n, k)
    if dataflow is Dataflow.WS:
        return SpatialMapping(k, m, n)
    return SpatialMapping(k, n, m)


def feed_latency(orchestration: Orchestration | str, rows: int, cols: int) -> int:
    _positive(rows=rows, cols=cols)
    if Orchestration(orchestration) is Orchestration.CONVENTIONAL:
        return rows + cols - 2
    return max(rows, cols) - 1


def preload_cycles(dataflow: Dataflow | str, rows: int) -> int:
    """Stationary-operand load time per tile; OS keeps nothing stationary."""
    return 0 if Dataflow(dataflow) is Dataflow.OS else rows


def single_tile_runtime(orchestration, dataflow, rows: int, cols: int, t: int,
                        include_preload: bool = False) -> RuntimeBreakdown:
    _positive(rows=rows, cols=cols, t=t)
    feed = feed_latency(orchestration, rows, cols)
    pre = preload_cycles(dataflow, rows)
    total = feed + t + rows + (pre if include_preload else 0)
    return RuntimeBreakdown(feed, t, rows, total, preload=pre, include_preload=include_preload)


def _partition_dims(mapping: SpatialMapping, mode: Optional[ScaleOut]) -> tuple[int, int]:
    if mode is None:
        return mapping.s_r, mapping.s_c
    # more partitions than rows/cols leaves the extra arrays idle
    return ceil(mapping.s_r / mode.p_r), ceil(mapping.s_c / mode.p_c)


def scaled_runtime(orchestration, config: ArrayConfig, workload: GemmWorkload,
                   mode: Optional[ScaleOut] = SCALE_UP,
                   include_preload: bool = False) -> RuntimeBreakdown:
    """
    Cycles to run ``workload`` on ``config`` under ``orchestration``.

    For scale-out, ``total`` is the wall-clock time of one partition (all
    partitions run concurrently and the busiest one bounds the runtime).
    """
    mapping = map_dims(config.dataflow, workload.m, workload.k, workload.n)
    s_r, s_c = _partition_dims(mapping, mode)
    tile = single_tile_runtime(orchestration, config.dataflow, config.rows, config.cols,
                               mapping.t, include_preload)
    tiles_r, tiles_c = ceil(s_r / config.rows), ceil(s_c / config.cols)
    return RuntimeBreakdown(
        tile.feed_latency, tile.temporal, tile.readout, tile.total * tiles_r * tiles_c,
        tiles_r, tiles_c, tile.preload, include_preload,
        partitions=1 if mode is None else mode.p_r * mode.p_c,
    )


def utilization_rate(orchestration, config: ArrayConfig, workload: GemmWorkload,
                     dataflow: Dataflow | str | None = None,
                     mode: Optional[ScaleOut] = SCALE_UP) -> float:
    """Useful MACs over available PE-cycles."""
    if dataflow is not None:
        config = config.with_(dataflow=dataflow)
    rt = scaled_runtime(orchestration, config, workload, mode)
    pe_cycles = config.rows * config.cols * rt.partitions * rt.total
    return workload.macs / pe_cycles


@dataclass(frozen=True)
class SpeedupRow:
    name: str
    conventional: int
    axon: int

    @property
    def speedup(self) -> float:
        return self.conventional / self.axon


@dataclass(frozen=True)
class SpeedupReport:
    rows: tuple[SpeedupRow, ...]

    @property
    def mean(self) -> float:
        return mean(r.speedup for r in self.rows)

    def table(self) -> str:
        lines = [f"{'workload':<24}{'conventional':>14}{'axon':>14}{'speedup':>9}"]
        for r in self.rows:
            lines.append(f"{r.name:<24}{r.conventional:>14}{r.axon:>14}{r.speedup:>9.3f}")
        lines.append(f"{'mean':<52}{self.mean:>9.3f}")
        return "\n".join(lines)


def speedup_report(workloads: Iterable[GemmWorkload], config: ArrayConfig,
                   dataflow: Dataflow | str | None = None,
                   mode: Optional[ScaleOut] = SCALE_UP) -> SpeedupReport:
    if dataflow is not None:
        config = config.with_(dataflow=dataflow)
    rows = tuple(
        SpeedupRow(w.name,
                   scaled_runtime(Orchestration.CONVENTIONAL, config, w, mode).total,
                   scaled_runtime(Orchestration.AXON, config, w, mode).total)
        for w in workloads)
    if not rows:
        raise ValueError("speedup_report needs at least one workload")
    return SpeedupReport(rows)
