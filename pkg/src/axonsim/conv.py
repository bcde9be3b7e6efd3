"""
im2col lowering, the diagonal-feeder MUX reuse scheme, and the resulting
memory traffic, DRAM energy and bandwidth-bound runtime.

Windows of one output row are mapped onto consecutive diagonal feeders. Each
window's stream is ordered channel-major, then filter row, then filter column
from right to left. With that order feeder w at cycle c needs exactly the
element feeder w-1 held at cycle c-1, except at the start of every filter-row
segment. So a 2-to-1 MUX per feeder selects the buffer once every n cycles and
the neighbour for the other n-1.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import ceil
from typing import Optional, Sequence

import numpy as np

from .core import ConvLayer, TrafficReport
from .errors import GeometryError, RangeError, ReuseIllegalError

PJ_PER_BYTE_LPDDR3 = 120.0


class Source(str, Enum):
    BUFFER = "B"
    NEIGHBOR = "N"


@dataclass(frozen=True, eq=False)
class LoweredConv:
    layer: ConvLayer
    out_h: int
    out_w: int
    filter_matrix: Optional[np.ndarray] = None  # M x K
    window_matrix: Optional[np.ndarray] = None  # K x N, column = flattened window

    @property
    def gemm_shape(self) -> tuple[int, int, int]:
        l = self.layer
        return l.num_filters, l.filter_h * l.filter_w * l.channels, self.out_h * self.out_w


def window_patch(ifmap: np.ndarray, layer: ConvLayer, oy: int, ox: int) -> np.ndarray:
    """IFMAP patch (C_in, fh, fw) that produces output pixel (oy, ox)."""
    y, x = oy * layer.stride, ox * layer.stride
    return ifmap[:, y:y + layer.filter_h, x:x + layer.filter_w]


def lower(layer: ConvLayer, ifmap: Optional[np.ndarray] = None,
          weights: Optional[np.ndarray] = None) -> LoweredConv:
    """
    Lower ``layer`` to a GEMM. ``ifmap`` is (C_in, H, W) and ``weights`` is
    (C_out, C_in, fh, fw); either may be omitted to get the geometry only.
    K is ordered (channel, filter row, filter column); N is row-major over the
    output grid.
    """
    out_h, out_w = layer.out_h, layer.out_w  # raises GeometryError
    windows = filt = None
    if ifmap is not None:
        ifmap = np.asarray(ifmap)
        if ifmap.shape != (layer.channels, layer.ifmap_h, layer.ifmap_w):
            raise GeometryError(f"{layer.name}: ifmap shape {ifmap.shape} does not match layer")
        s, fh, fw = layer.stride, layer.filter_h, layer.filter_w
        cols = np.empty((layer.channels, fh, fw, out_h, out_w), dtype=ifmap.dtype)
        for dy in range(fh):
            for dx in range(fw):
                cols[:, dy, dx] = ifmap[:, dy:dy + s * out_h:s, dx:dx + s * out_w:s]
        windows = cols.reshape(layer.channels * fh * fw, out_h * out_w)
    if weights is not None:
        weights = np.asarray(weights)
        want = (layer.num_filters, layer.channels, layer.filter_h, layer.filter_w)
        if weights.shape != want:
            raise GeometryError(f"{layer.name}: weights shape {weights.shape}, expected {want}")
        filt = weights.reshape(layer.num_filters, -1)
    return LoweredConv(layer, out_h, out_w, filt, windows)


def shared_element_count(n: int, stride: int) -> int:
    """Elements shared by two horizontally adjacent n x n windows."""
    if n < 1 or stride < 1:
        raise RangeError("filter length and stride must be >= 1")
    return n * max(n - stride, 0)


@dataclass(frozen=True)
class MuxSchedule:
    period: int
    sources: tuple[tuple[Source, ...], ...]  # [feeder row][cycle]

    def buffer_count(self, row: int) -> int:
        return sum(s is Source.BUFFER for s in self.sources[row])

    def render(self) -> str:
        return "\n".join("".join(s.value for s in row) for row in self.sources)


def mux_schedule(n: int, num_feeder_rows: int, stream_len: int) -> MuxSchedule:
    if n < 1:
        raise RangeError("filter length must be >= 1")
    rows = []
    for w in range(num_feeder_rows):
        if w == 0 or n == 1:
            rows.append((Source.BUFFER,) * stream_len)
        else:
            rows.append(tuple(Source.BUFFER if c % n == 0 else Source.NEIGHBOR
                              for c in range(stream_len)))
    return MuxSchedule(n, tuple(rows))


def stream_order(layer: ConvLayer) -> np.ndarray:
    """Permutation: position in a feeder stream -> index into the lowered K axis."""
    c, fh, fw = layer.channels, layer.filter_h, layer.filter_w
    idx = np.arange(c * fh * fw).reshape(c, fh, fw)
    return idx[:, :, ::-1].ravel()


@dataclass(frozen=True)
class FeederStreams:
    elements: np.ndarray  # (windows, K) values held by each feeder, in feed order
    sources: MuxSchedule
    windows: tuple[int, ...]  # lowered column indices of the mapped windows

    @property
    def buffer_loads(self) -> int:
        return sum(self.sources.buffer_count(w) for w in range(len(self.windows)))

    @property
    def total(self) -> int:
        return int(self.elements.size)


def feeder_streams(lowered: LoweredConv, mapped_rows: int, out_row: int = 0,
                   first_window: int = 0) -> FeederStreams:
    """
    Run the MUX chain for ``mapped_rows`` consecutive windows of output row
    ``out_row``. Buffer-sourced slots read the window's own element from SRAM;
    neighbour-sourced slots copy what the feeder above held last cycle. Raises
    :class:`ReuseIllegalError` if any copied element is not the one the window
    needs (e.g. stride > 1).
    """
    layer = lowered.layer
    if lowered.window_matrix is None:
        raise ValueError("feeder_streams needs a lowered conv with IFMAP data")
    if first_window + mapped_rows > lowered.out_w:
        raise ValueError("mapped windows run past the end of the output row")
    order = stream_order(layer)
    cols = tuple(out_row * lowered.out_w + first_window + w for w in range(mapped_rows))
    wanted = lowered.window_matrix[:, cols].T[:, order]  # (windows, K) in feed order
    k = wanted.shape[1]
    sched = mux_schedule(layer.filter_w, mapped_rows, k)
    held = np.empty_like(wanted)
    for c in range(k):
        for w in range(mapped_rows):
            if sched.sources[w][c] is Source.BUFFER:
                held[w, c] = wanted[w, c]
            else:
                held[w, c] = held[w - 1, c - 1]
    if layer.stride != 1 or not np.array_equal(held, wanted):
        # equality can hold by accident on constant data; the wiring is only legal at stride 1
        raise ReuseIllegalError(f"{layer.name}: neighbour reuse illegal at stride {layer.stride}")
    return FeederStreams(held, sched, cols)


def group_sizes(out_w: int, capacity: int) -> list[int]:
    full, rem = divmod(out_w, capacity)
    return [capacity] * full + ([rem] if rem else [])


def reuse_legal(layer: ConvLayer) -> bool:
    return layer.stride == 1 and layer.filter_w > 1


def traffic(layer: ConvLayer, feeder_capacity: int) -> TrafficReport:
    """
    IFMAP elements fed to the array for one pass over ``layer``. Software im2col
    loads every lowered element; on-chip reuse loads a window's full K only for
    the first window of each feeder group and K / filter_w for the rest.
    """
    if feeder_capacity < 1:
        raise RangeError("feeder capacity must be >= 1")
    m, k, n = layer.gemm_shape()
    software = k * n
    if not reuse_legal(layer):
        return TrafficReport(software, software, 0, layer.element_bytes)
    per_reused = k // layer.filter_w
    g = min(feeder_capacity, layer.out_w)
    per_row = sum(k + (size - 1) * per_reused for size in group_sizes(layer.out_w, g))
    axon = per_row * layer.out_h
    return TrafficReport(software, axon, software - axon, layer.element_bytes)


def dram_energy(num_bytes: float, pj_per_byte: float = PJ_PER_BYTE_LPDDR3) -> float:
    """Joules to move ``num_bytes`` across the DRAM interface."""
    if num_bytes < 0:
        raise RangeError("byte count must be >= 0")
    return num_bytes * pj_per_byte * 1e-12


@dataclass(frozen=True)
class BandwidthResult:
    software_cycles: int
    axon_cycles: int

    @property
    def speedup(self) -> float:
        return self.software_cycles / self.axon_cycles


def memory_cycles(num_bytes: float, bandwidth_bytes_per_s: float, clock_hz: float) -> int:
    if bandwidth_bytes_per_s <= 0 or clock_hz <= 0:
        raise RangeError("bandwidth and clock must be positive")
    return ceil(num_bytes * clock_hz / bandwidth_bytes_per_s)


def bandwidth_limited_runtime(compute_cycles: int, software_bytes: float, axon_bytes: float,
                              bandwidth_bytes_per_s: float = 6.4e9,
                              clock_hz: float = 800e6) -> BandwidthResult:
    """Roofline: a layer takes the longer of its compute time and its transfer time."""
    sw = max(compute_cycles, memory_cycles(software_bytes, bandwidth_bytes_per_s, clock_hz))
    ax = max(compute_cycles, memory_cycles(axon_bytes, bandwidth_bytes_per_s, clock_hz))
    return BandwidthResult(sw, ax)


def layer_bytes(layer: ConvLayer, ifmap_elements: int) -> int:
    """Off-chip bytes for one layer: IFMAP feed plus filters read and OFMAP written once."""
    m, k, n = layer.gemm_shape()
    return (ifmap_elements + m * k + m * n) * layer.element_bytes


def aggregate(reports: Sequence[TrafficReport]) -> TrafficReport:
    return TrafficReport(sum(r.software_elements for r in reports),
                         sum(r.axon_elements for r in reports),
                         sum(r.reused_elements for r in reports),
                         reports[0].element_bytes if reports else 2)
