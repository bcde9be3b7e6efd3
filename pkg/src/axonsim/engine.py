"""
Cycle-level functional simulation of one systolic array.

Each cycle every PE latches the operand held by its upstream neighbour (or, for
a feeder PE, the next element of its buffer stream), then multiplies whatever
it holds. Operands carry their temporal index, so a PE that ever sees two
different indices in the same cycle is counted as an alignment violation (a
real design would have to stall there).

Operand arrays may carry a leading batch axis; timing is data independent, so
one pass simulates many GEMMs of the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil
from typing import Optional, Sequence

import numpy as np

from .analytic import ScaleOut, map_dims
from .core import ArrayConfig, Dataflow, GemmWorkload, Orchestration, SimResult, validate
from .errors import CapacityError, ShapeError, UsageError
from .schedule import BUBBLE, PEGrid, build_grid


@dataclass
class TileStats:
    compute_cycles: int = 0
    gated: Optional[np.ndarray] = None  # per batch element
    macs: int = 0  # real (non-padding) MAC slots
    sram_loads: int = 0
    violations: int = 0
    trace: list[str] = field(default_factory=list)


def _inject(tags: np.ndarray, vals: np.ndarray, feed_idx: np.ndarray, delays: np.ndarray,
            stream: np.ndarray, cycle: int) -> np.ndarray:
    """Write this cycle's buffer elements into the feeder PEs; returns the injected indices."""
    t = stream.shape[-1]
    k = cycle - delays
    ok = (k >= 0) & (k < t)
    kk = np.where(ok, k, 0)
    lanes = np.arange(len(feed_idx))
    tags[feed_idx] = np.where(ok, k, BUBBLE)
    vals[:, feed_idx] = np.where(ok, stream[:, lanes, kk], 0)
    return np.where(ok, k, BUBBLE)


def run_os_tile(grid: PEGrid, x: np.ndarray, y: np.ndarray, real: np.ndarray,
                zero_gating: bool, trace: bool = False) -> tuple[np.ndarray, TileStats]:
    """
    Output-stationary tile. ``x``: (B, R, T) row streams, ``y``: (B, C, T) column
    streams, ``real``: (R, C) mask of PEs holding real (non-padding) outputs.
    Returns accumulators (B, R, C) after readout.
    """
    rows, cols = grid.rows, grid.cols
    sched = grid.schedule
    batch, _, t = x.shape
    n = rows * cols
    h_tag = np.full(n, BUBBLE, dtype=np.int64)
    v_tag = np.full(n, BUBBLE, dtype=np.int64)
    h_val = np.zeros((batch, n), dtype=x.dtype)
    v_val = np.zeros((batch, n), dtype=y.dtype)
    acc = np.zeros((batch, n), dtype=np.result_type(x, y))
    h_feed = np.array([i * cols + f for i, f in enumerate(sched.row_feeders)])
    v_feed = np.array([f * cols + j for j, f in enumerate(sched.col_feeders)])
    h_delay = np.array(sched.row_delays)
    v_delay = np.array(sched.col_delays)
    h_has, v_has = grid.h_src >= 0, grid.v_src >= 0
    real_flat = real.ravel()
    real_rows, real_cols = real.any(axis=1), real.any(axis=0)

    stats = TileStats(gated=np.zeros(batch, dtype=np.int64))
    horizon = max(sched.row_delays + sched.col_delays) + t + rows + cols
    last = -1
    for cycle in range(horizon):
        h_tag = np.where(h_has, h_tag[grid.h_src], BUBBLE)
        v_tag = np.where(v_has, v_tag[grid.v_src], BUBBLE)
        h_val = np.where(h_has, h_val[:, grid.h_src], 0)
        v_val = np.where(v_has, v_val[:, grid.v_src], 0)
        kh = _inject(h_tag, h_val, h_feed, h_delay, x, cycle)
        kv = _inject(v_tag, v_val, v_feed, v_delay, y, cycle)
        stats.sram_loads += int(np.count_nonzero(kh[real_rows] >= 0))
        stats.sram_loads += int(np.count_nonzero(kv[real_cols] >= 0))

        present = (h_tag >= 0) | (v_tag >= 0)
        if not present.any():
            if cycle > max(sched.row_delays + sched.col_delays):
                break
            continue
        both = (h_tag >= 0) & (h_tag == v_tag)
        stats.violations += int(np.count_nonzero(present & ~both))
        prod = h_val * v_val
        if zero_gating:
            zero = (h_val == 0) | (v_val == 0)
            stats.gated += np.count_nonzero(zero & (both & real_flat), axis=1)
            acc += np.where(zero, 0, np.where(both, prod, 0))
        else:
            acc += np.where(both, prod, 0)
        stats.macs += int(np.count_nonzero(both & real_flat))
        last = cycle
        if trace:
            for p in np.flatnonzero(both):
                stats.trace.append(f"{cycle} {p // cols} {p % cols} MAC {h_tag[p]}")
    stats.compute_cycles = last + 1

    # Readout: accumulators shift down one row per cycle and leave at the bottom.
    regs = acc.reshape(batch, rows, cols).copy()
    drained = np.zeros_like(regs)
    for r in range(rows):
        drained[:, rows - 1 - r] = regs[:, rows - 1]
        regs[:, 1:] = regs[:, :-1].copy()
        regs[:, 0] = 0
        if trace:
            stats.trace.append(f"{stats.compute_cycles + r} {rows - 1} * EXIT row{rows - 1 - r}")
    return drained, stats


def run_stationary_tile(grid: PEGrid, stationary: np.ndarray, x: np.ndarray, real: np.ndarray,
                        zero_gating: bool, trace: bool = False) -> tuple[np.ndarray, TileStats]:
    """
    Weight/input-stationary tile. ``stationary``: (B, R, C) preloaded registers,
    ``x``: (B, R, T) row streams. Output (B, T, C): out[k, j] = sum_i x[i, k] * s[i, j].
    Partial sums hop one PE per cycle along each column's chain; under Axon the
    two segments split by the diagonal leave at the bottom and top edges and are
    summed by the bypass adder.
    """
    rows, cols = grid.rows, grid.cols
    sched = grid.schedule
    batch, _, t = x.shape
    n = rows * cols
    s = stationary.reshape(batch, n)
    h_tag = np.full(n, BUBBLE, dtype=np.int64)
    h_val = np.zeros((batch, n), dtype=x.dtype)
    p_tag = np.full(n, BUBBLE, dtype=np.int64)
    out_dtype = np.result_type(x, stationary)
    p_val = np.zeros((batch, n), dtype=out_dtype)
    out_bottom = np.zeros((batch, t, cols), dtype=out_dtype)
    out_top = np.zeros((batch, t, cols), dtype=out_dtype)
    h_feed = np.array([i * cols + f for i, f in enumerate(sched.row_feeders)])
    h_delay = np.array(sched.row_delays)
    h_has, p_has = grid.h_src >= 0, grid.psum_src >= 0
    real_flat = real.ravel()
    real_rows = real.any(axis=1)
    col_of = np.arange(n) % cols

    stats = TileStats(gated=np.zeros(batch, dtype=np.int64))
    horizon = max(sched.row_delays) + t + rows + cols
    last = -1
    for cycle in range(horizon):
        h_tag = np.where(h_has, h_tag[grid.h_src], BUBBLE)
        h_val = np.where(h_has, h_val[:, grid.h_src], 0)
        kh = _inject(h_tag, h_val, h_feed, h_delay, x, cycle)
        stats.sram_loads += int(np.count_nonzero(kh[real_rows] >= 0))
        in_tag = np.where(p_has, p_tag[grid.psum_src], BUBBLE)
        in_val = np.where(p_has, p_val[:, grid.psum_src], 0)

        active = h_tag >= 0
        if not active.any():
            if cycle > max(sched.row_delays):
                break
            p_tag[:] = BUBBLE
            p_val[:] = 0
            continue
        # a chain member must see its upstream psum for the same index in the same cycle
        expect = active & p_has
        stats.violations += int(np.count_nonzero(expect & (in_tag != h_tag)))
        stats.violations += int(np.count_nonzero(~active & (in_tag >= 0)))
        prod = h_val * s
        if zero_gating:
            zero = (h_val == 0) | (s == 0)
            stats.gated += np.count_nonzero(zero & (active & real_flat), axis=1)
            prod = np.where(zero, 0, prod)
        p_val = np.where(active, in_val + prod, 0)
        p_tag = np.where(active, h_tag, BUBBLE)
        stats.macs += int(np.count_nonzero(active & real_flat))
        last = cycle

        for exits, out in ((grid.bottom_exit, out_bottom), (grid.top_exit, out_top)):
            live = exits[p_tag[exits] >= 0]
            if len(live):
                out[:, p_tag[live], col_of[live]] += p_val[:, live]
                if trace:
                    for p in live:
                        stats.trace.append(f"{cycle} {p // cols} {p % cols} EXIT {p_tag[p]}")
        if trace:
            for p in np.flatnonzero(active):
                stats.trace.append(f"{cycle} {p // cols} {p % cols} MAC {h_tag[p]}")
    stats.compute_cycles = last + 1
    return bypass_add(out_top, out_bottom), stats


def bypass_add(top: np.ndarray, bottom: np.ndarray) -> np.ndarray:
    """Sum the two column segments separated by the diagonal."""
    return top + bottom


def combine_partial_sums(products: Sequence[int], diagonal: Optional[int]) -> int:
    """
    Reduce one output element's per-PE products down a column.

    ``products[i]`` is row i's contribution and ``diagonal`` the row of the
    column's diagonal PE: ``None`` for a conventional column (one chain from
    row 0 down), ``len(products)`` for a column past the diagonal of a wide
    array (one chain from the bottom up). The upper segment (rows above the diagonal)
    is accumulated outward to row 0; the diagonal PE starts the lower segment,
    which accumulates down to the last row. The two running sums are added once
    at the end, so contributions never cross into another output.
    """
    rows = len(products)
    if diagonal is None:
        diagonal = 0
    upper = 0
    for i in range(diagonal - 1, -1, -1):
        upper += products[i]
    lower = 0
    for i in range(diagonal, rows):
        lower += products[i]
    return upper + lower


def preload_stationary(config: ArrayConfig, stationary: np.ndarray) -> tuple[np.ndarray, int]:
    """
    Shift a stationary tile into the PE registers one row per cycle through the
    vertical (output) interconnect. Returns (registers, cycles); cycles equals
    the tile's row count. Under Axon this path is the output route, which is
    unidirectional, so no extra cycles are needed.
    """
    if config.dataflow is Dataflow.OS:
        raise UsageError("output-stationary arrays have nothing to preload")
    tile = np.asarray(stationary)
    squeeze = tile.ndim == 2
    if squeeze:
        tile = tile[None]
    batch, r, c = tile.shape
    if r > config.rows or c > config.cols:
        raise CapacityError(f"{r}x{c} tile does not fit a {config.rows}x{config.cols} array")
    regs = np.zeros((batch, config.rows, config.cols), dtype=tile.dtype)
    for cycle in range(r):
        regs[:, 1:] = regs[:, :-1].copy()
        regs[:, 0] = 0
        regs[:, 0, :c] = tile[:, r - 1 - cycle]
    return (regs[0] if squeeze else regs), r


def _pad(block: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    out = np.zeros(block.shape[:1] + shape, dtype=block.dtype)
    out[(slice(None),) + tuple(slice(0, s) for s in block.shape[1:])] = block
    return out


def _ranges(size: int, parts: int) -> list[tuple[int, int]]:
    step = ceil(size / parts)
    return [(lo, min(lo + step, size)) for lo in range(0, size, step)]


@dataclass
class BatchResult:
    outputs: np.ndarray  # (B, M, N)
    total_cycles: int
    preload_cycles: int
    compute_cycles: int
    readout_cycles: int
    mac_slots: int
    gated: np.ndarray  # (B,)
    sram_loads: int
    tiles: int
    alignment_violations: int
    trace: list[str]


def simulate_batch(config: ArrayConfig, a: np.ndarray, b: np.ndarray, *,
                   zero_gating: bool = True, include_preload: bool = False,
                   mode: Optional[ScaleOut] = None, allow_tiling: bool = True,
                   trace: bool = False) -> BatchResult:
    """Simulate ``a @ b`` for a batch of operand pairs (B, M, K) x (B, K, N)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim == 2:
        a = a[None]
    if b.ndim == 2:
        b = b[None]
    if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
        raise ShapeError(f"cannot multiply {a.shape[1:]} by {b.shape[1:]}")
    batch, m, k = a.shape
    n = b.shape[2]
    rows, cols = config.rows, config.cols
    df = config.dataflow
    mapping = map_dims(df, m, k, n)
    if not allow_tiling and (mapping.s_r > rows or mapping.s_c > cols):
        raise CapacityError(f"spatial dims {mapping.s_r}x{mapping.s_c} exceed the "
                            f"{rows}x{cols} array and tiling is disabled")
    grid = build_grid(config.orchestration, rows, cols)
    out = np.zeros((batch, m, n), dtype=np.result_type(a, b))
    gated = np.zeros(batch, dtype=np.int64)
    res = BatchResult(out, 0, 0, 0, 0, 0, gated, 0, 0, 0, [])

    parts_r = _ranges(mapping.s_r, 1 if mode is None else mode.p_r)
    parts_c = _ranges(mapping.s_c, 1 if mode is None else mode.p_c)

    busiest = None
    for pr in parts_r:
        for pc in parts_c:
            part = [0, 0, 0, 0]  # preload, compute, readout, tiles
            for r0 in range(pr[0], pr[1], rows):
                r1 = min(r0 + rows, pr[1])
                for c0 in range(pc[0], pc[1], cols):
                    c1 = min(c0 + cols, pc[1])
                    real = np.zeros((rows, cols), dtype=bool)
                    real[: r1 - r0, : c1 - c0] = True
                    pre = 0
                    if df is Dataflow.OS:
                        x = _pad(a[:, r0:r1, :], (rows, k))
                        y = _pad(np.swapaxes(b[:, :, c0:c1], 1, 2), (cols, k))
                        acc, st = run_os_tile(grid, x, y, real, zero_gating, trace)
                        out[:, r0:r1, c0:c1] += acc[:, : r1 - r0, : c1 - c0]
                    else:
                        if df is Dataflow.WS:
                            s_blk = np.swapaxes(a, 1, 2)[:, r0:r1, c0:c1]  # A^T: K x M
                            x = b[:, r0:r1, :]  # rows of B, streamed over N
                        else:
                            s_blk = b[:, r0:r1, c0:c1]
                            x = np.swapaxes(a, 1, 2)[:, r0:r1, :]  # columns of A, over M
                        regs, pre = preload_stationary(config, _pad(s_blk, (rows, cols)))
                        o, st = run_stationary_tile(grid, regs, _pad(x, (rows, x.shape[2])),
                                                    real, zero_gating, trace)
                        o = o[:, :, : c1 - c0]
                        if df is Dataflow.WS:
                            out[:, c0:c1, :] += np.swapaxes(o, 1, 2)
                        else:
                            out[:, :, c0:c1] += o
                        st.sram_loads += (r1 - r0) * (c1 - c0)
                    part[0] += pre if include_preload else 0
                    part[1] += st.compute_cycles
                    part[2] += rows
                    part[3] += 1
                    res.mac_slots += st.macs
                    res.gated += st.gated
                    res.sram_loads += st.sram_loads
                    res.alignment_violations += st.violations
                    res.trace.extend(st.trace)
            if busiest is None or sum(part[:3]) > sum(busiest[:3]):
                busiest = part
    res.preload_cycles, res.compute_cycles, res.readout_cycles, res.tiles = busiest
    res.total_cycles = sum(busiest[:3])
    if not zero_gating:
        res.gated[:] = 0
    return res


def synthesize_operands(workload: GemmWorkload, rng: np.random.Generator,
                        low: int = -4, high: int = 4) -> GemmWorkload:
    """Fill missing operands with small nonzero integers, zeroed at the workload's sparsity."""
    def draw(shape, sparsity):
        vals = rng.integers(1, high + 1, size=shape) * rng.choice([-1, 1], size=shape)
        if low >= 0:
            vals = np.abs(vals)
        mask = rng.random(shape) < sparsity
        return np.where(mask, 0, vals).astype(np.int64)

    a = workload.a if workload.a is not None else draw((workload.m, workload.k), workload.sparsity_a)
    b = workload.b if workload.b is not None else draw((workload.k, workload.n), workload.sparsity_b)
    return workload.with_operands(a, b)


def simulate_gemm(config: ArrayConfig, workload: GemmWorkload, *, zero_gating: bool = True,
                  include_preload: bool = False, mode: Optional[ScaleOut] = None,
                  rng: Optional[np.random.Generator] = None, allow_tiling: bool = True,
                  trace: bool = False) -> SimResult:
    validate(config, workload)
    if workload.a is None or workload.b is None:
        workload = synthesize_operands(workload, rng or np.random.default_rng(0))
    r = simulate_batch(config, workload.a, workload.b, zero_gating=zero_gating,
                       include_preload=include_preload, mode=mode,
                       allow_tiling=allow_tiling, trace=trace)
    pes = config.rows * config.cols * (1 if mode is None else mode.p_r * mode.p_c)
    gated = int(r.gated[0])
    return SimResult(
        output=r.outputs[0], total_cycles=r.total_cycles, preload_cycles=r.preload_cycles,
        compute_cycles=r.compute_cycles, readout_cycles=r.readout_cycles,
        mac_count=r.mac_slots - gated, gated_mac_count=gated,
        utilization=min(1.0, workload.macs / (pes * r.total_cycles)),
        sram_loads=r.sram_loads, tiles=r.tiles, alignment_violations=r.alignment_violations,
        trace=tuple(r.trace) if trace else None,
    )


def reference_matmul(a, b) -> list[list[int]]:
    """Plain triple loop, independent of numpy's matmul."""
    a = [list(map(int, row)) for row in np.asarray(a).tolist()]
    b = [list(map(int, row)) for row in np.asarray(b).tolist()]
    m, k, n = len(a), len(b), len(b[0]) if b else 0
    out = [[0] * n for _ in range(m)]
    for i in range(m):
        for j in range(n):
            s = 0
            for p in range(k):
                s += a[i][p] * b[p][j]
            out[i][j] = s
    return out


def verify(result: SimResult, workload: GemmWorkload) -> bool:
    if workload.a is None or workload.b is None:
        raise ShapeError("verify needs concrete operands")
    expected = reference_matmul(workload.a, workload.b)
    got = np.asarray(result.output).tolist()
    return got == expected
