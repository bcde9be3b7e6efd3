"""
Domain types shared by the analytic model, the simulator and the conv lowering.

All types are frozen dataclasses. Anything holding a matrix compares matrices
element-wise, so ``to_dict``/``from_dict`` round-trips produce equal values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Optional

import numpy as np

from .errors import DimensionError, GeometryError, RangeError, ShapeError

DEFAULT_ELEMENT_BYTES = 2  # FP16 operands


class Orchestration(str, Enum):
    CONVENTIONAL = "conventional"
    AXON = "axon"


class Dataflow(str, Enum):
    """Which quantity stays resident in the PEs."""

    OS = "os"
    WS = "ws"
    IS = "is"


def _check_positive(name: str, value: int) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DimensionError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise DimensionError(f"{name} must be >= 1, got {value}")


def _check_fraction(name: str, value: float) -> None:
    if not (0.0 <= value < 1.0):
        raise RangeError(f"{name} must lie in [0, 1), got {value}")


def _matrix(value: Any) -> Optional[np.ndarray]:
    if value is None:
        return None
    arr = np.array(value)
    arr.setflags(write=False)
    return arr


def _eq_values(a: Any, b: Any) -> bool:
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        if a is None or b is None:
            return False
        return np.array_equal(a, b)
    return a == b


class _ArrayEqMixin:
    """Field-wise equality that treats numpy arrays as values."""

    def __eq__(self, other: object) -> bool:
        if type(self) is not type(other):
            return NotImplemented
        return all(_eq_values(getattr(self, f.name), getattr(other, f.name)) for f in fields(self))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ArrayConfig:
    rows: int
    cols: int
    orchestration: Orchestration = Orchestration.AXON
    dataflow: Dataflow = Dataflow.OS

    def __post_init__(self):
        object.__setattr__(self, "orchestration", Orchestration(self.orchestration))
        object.__setattr__(self, "dataflow", Dataflow(self.dataflow))
        _check_positive("rows", self.rows)
        _check_positive("cols", self.cols)

    def with_(self, **changes) -> "ArrayConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return ArrayConfig(**data)

    def to_dict(self) -> dict:
        return {
            "rows": int(self.rows),
            "cols": int(self.cols),
            "orchestration": self.orchestration.value,
            "dataflow": self.dataflow.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArrayConfig":
        return cls(data["rows"], data["cols"], data["orchestration"], data["dataflow"])


@dataclass(frozen=True, eq=False)
class GemmWorkload(_ArrayEqMixin):
    """An (M, K, N) GEMM, optionally carrying concrete operands A (MxK) and B (KxN)."""

    name: str
    m: int
    k: int
    n: int
    a: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    sparsity_a: float = 0.0
    sparsity_b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", _matrix(self.a))
        object.__setattr__(self, "b", _matrix(self.b))
        validate_workload(self)

    @property
    def macs(self) -> int:
        return self.m * self.k * self.n

    def with_operands(self, a, b) -> "GemmWorkload":
        return GemmWorkload(self.name, self.m, self.k, self.n, a, b, self.sparsity_a, self.sparsity_b)

    def to_dict(self) -> dict:
        out = {"name": self.name, "m": int(self.m), "k": int(self.k), "n": int(self.n),
               "sparsity_a": float(self.sparsity_a), "sparsity_b": float(self.sparsity_b)}
        if self.a is not None:
            out["a"] = self.a.tolist()
        if self.b is not None:
            out["b"] = self.b.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GemmWorkload":
        return cls(data["name"], data["m"], data["k"], data["n"], data.get("a"), data.get("b"),
                   data.get("sparsity_a", 0.0), data.get("sparsity_b", 0.0))


@dataclass(frozen=True)
class ConvLayer:
    """
    A valid (unpadded) 2-D convolution. Padding, when a network uses it, is
    folded into ``ifmap_h``/``ifmap_w``.
    """

    name: str
    ifmap_h: int
    ifmap_w: int
    filter_h: int
    filter_w: int
    channels: int
    num_filters: int
    stride: int = 1
    element_bytes: int = DEFAULT_ELEMENT_BYTES

    def __post_init__(self):
        for f in ("ifmap_h", "ifmap_w", "filter_h", "filter_w", "channels", "num_filters",
                  "stride", "element_bytes"):
            _check_positive(f, getattr(self, f))
        if self.filter_h > self.ifmap_h or self.filter_w > self.ifmap_w:
            raise GeometryError(
                f"{self.name}: filter {self.filter_h}x{self.filter_w} larger than "
                f"ifmap {self.ifmap_h}x{self.ifmap_w}")

    @property
    def out_h(self) -> int:
        return _out_dim(self.name, self.ifmap_h, self.filter_h, self.stride)

    @property
    def out_w(self) -> int:
        return _out_dim(self.name, self.ifmap_w, self.filter_w, self.stride)

    def gemm_shape(self) -> tuple[int, int, int]:
        return (self.num_filters, self.filter_h * self.filter_w * self.channels,
                self.out_h * self.out_w)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "ConvLayer":
        return cls(**data)


def _out_dim(name: str, size: int, filt: int, stride: int) -> int:
    span = size - filt
    if span % stride:
        raise GeometryError(
            f"{name}: (ifmap {size} - filter {filt}) not divisible by stride {stride}")
    return span // stride + 1


@dataclass(frozen=True)
class SpatialMapping:
    s_r: int
    s_c: int
    t: int

    def __post_init__(self):
        for f in ("s_r", "s_c", "t"):
            _check_positive(f, getattr(self, f))

    def to_dict(self) -> dict:
        return {"s_r": self.s_r, "s_c": self.s_c, "t": self.t}

    @classmethod
    def from_dict(cls, data: dict) -> "SpatialMapping":
        return cls(**data)


@dataclass(frozen=True, eq=False)
class SimResult(_ArrayEqMixin):
    output: np.ndarray
    total_cycles: int
    preload_cycles: int
    compute_cycles: int
    readout_cycles: int
    mac_count: int
    gated_mac_count: int
    utilization: float
    sram_loads: int
    tiles: int = 1
    alignment_violations: int = 0
    trace: Optional[tuple[str, ...]] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "output", _matrix(self.output))
        if self.total_cycles != self.preload_cycles + self.compute_cycles + self.readout_cycles:
            raise ValueError("total_cycles must equal preload + compute + readout")
        if not (0.0 <= self.utilization <= 1.0):
            raise RangeError(f"utilization {self.utilization} outside [0, 1]")

    @property
    def gated_fraction(self) -> float:
        total = self.mac_count + self.gated_mac_count
        return self.gated_mac_count / total if total else 0.0

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("output", "trace")}
        out["output"] = self.output.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SimResult":
        return cls(**data)


@dataclass(frozen=True)
class TrafficReport:
    """IFMAP element traffic for software im2col versus on-chip neighbour reuse."""

    software_elements: int
    axon_elements: int
    reused_elements: int
    element_bytes: int = DEFAULT_ELEMENT_BYTES

    def __post_init__(self):
        if self.axon_elements + self.reused_elements != self.software_elements:
            raise ValueError("axon_elements + reused_elements must equal software_elements")
        if self.software_elements < 1 or self.axon_elements < 1 or self.reused_elements < 0:
            raise RangeError("traffic counts must be positive")

    @property
    def software_bytes(self) -> int:
        return self.software_elements * self.element_bytes

    @property
    def axon_bytes(self) -> int:
        return self.axon_elements * self.element_bytes

    @property
    def reduction(self) -> float:
        return 1.0 - self.axon_elements / self.software_elements

    def to_dict(self) -> dict:
        return {
            "software_elements": self.software_elements,
            "axon_elements": self.axon_elements,
            "reused_elements": self.reused_elements,
            "element_bytes": self.element_bytes,
            "software_bytes": self.software_bytes,
            "axon_bytes": self.axon_bytes,
            "reduction": self.reduction,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrafficReport":
        return cls(data["software_elements"], data["axon_elements"], data["reused_elements"],
                   data.get("element_bytes", DEFAULT_ELEMENT_BYTES))


def validate_workload(workload: GemmWorkload) -> None:
    for f in ("m", "k", "n"):
        _check_positive(f, getattr(workload, f))
    _check_fraction("sparsity_a", workload.sparsity_a)
    _check_fraction("sparsity_b", workload.sparsity_b)
    if workload.a is not None and workload.a.shape != (workload.m, workload.k):
        raise ShapeError(f"{workload.name}: A has shape {workload.a.shape}, "
                         f"expected {(workload.m, workload.k)}")
    if workload.b is not None and workload.b.shape != (workload.k, workload.n):
        raise ShapeError(f"{workload.name}: B has shape {workload.b.shape}, "
                         f"expected {(workload.k, workload.n)}")


def validate(config: ArrayConfig, workload: GemmWorkload) -> None:
    """Raise unless both the array and the workload satisfy their invariants."""
    _check_positive("rows", config.rows)
    _check_positive("cols", config.cols)
    Orchestration(config.orchestration)
    Dataflow(config.dataflow)
    validate_workload(workload)
