"""Per-workload record builders behind the CLI subcommands, plus JSON/CSV emission."""

from __future__ import annotations

import csv
import io
import json
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import mean
from typing import Callable, Iterable, Optional

import numpy as np

from . import __version__
from .analytic import ScaleOut, map_dims, scaled_runtime, utilization_rate
from .conv import bandwidth_limited_runtime, dram_energy, layer_bytes, traffic
from .core import ArrayConfig, ConvLayer, GemmWorkload, Orchestration
from .engine import simulate_gemm, verify
from .errors import ValidationError, VerificationError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class RunOptions:
    config: ArrayConfig
    orchestrations: tuple[Orchestration, ...]
    mode: Optional[ScaleOut] = None
    include_preload: bool = False
    # simulate
    seed: int = 0
    sparsity_a: float = 0.0
    sparsity_b: float = 0.0
    zero_gating: bool = True
    check_outputs: bool = False
    max_macs: int = 2_000_000
    # conv
    bandwidth: float = 6.4e9
    clock: float = 800e6
    pj_per_byte: float = 120.0
    feeder_capacity: Optional[int] = None


def analyze_record(w: GemmWorkload, opts: RunOptions, repeat: int = 1) -> dict:
    cfg = opts.config
    mp = map_dims(cfg.dataflow, w.m, w.k, w.n)
    rec = {"name": w.name, "m": w.m, "k": w.k, "n": w.n, "repeat": repeat,
           "s_r": mp.s_r, "s_c": mp.s_c, "t": mp.t}
    for o in opts.orchestrations:
        rt = scaled_runtime(o, cfg, w, opts.mode, opts.include_preload)
        rec["tiles"] = rt.tiles
        rec[f"{o.value}_cycles"] = rt.total * repeat
        rec[f"{o.value}_utilization"] = utilization_rate(o, cfg, w, mode=opts.mode)
    if len(opts.orchestrations) == 2:
        rec["speedup"] = rec["conventional_cycles"] / rec["axon_cycles"]
    return rec


def workload_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def simulate_record(w: GemmWorkload, opts: RunOptions, repeat: int = 1) -> dict:
    if w.macs > opts.max_macs:
        raise ValidationError(f"{w.name}: {w.macs} MACs exceeds --max-macs {opts.max_macs}")
    from .engine import synthesize_operands

    w = GemmWorkload(w.name, w.m, w.k, w.n, w.a, w.b, opts.sparsity_a, opts.sparsity_b)
    w = synthesize_operands(w, workload_rng(opts.seed, w.name))
    rec = {"name": w.name, "m": w.m, "k": w.k, "n": w.n, "repeat": repeat}
    for o in opts.orchestrations:
        cfg = opts.config.with_(orchestration=o)
        res = simulate_gemm(cfg, w, zero_gating=opts.zero_gating,
                            include_preload=opts.include_preload, mode=opts.mode)
        analytic = scaled_runtime(o, cfg, w, opts.mode, opts.include_preload).total
        if res.total_cycles != analytic:
            raise VerificationError(f"{w.name} [{o.value}]: simulated {res.total_cycles} cycles, "
                                    f"analytic {analytic}")
        if res.alignment_violations:
            raise VerificationError(f"{w.name} [{o.value}]: {res.alignment_violations} "
                                    "misaligned operand arrivals")
        ok = verify(res, w) if opts.check_outputs else None
        if ok is False:
            raise VerificationError(f"{w.name} [{o.value}]: output differs from oracle matmul")
        p = o.value
        rec.update({
            f"{p}_simulated_cycles": res.total_cycles,
            f"{p}_analytic_cycles": analytic,
            f"{p}_preload_cycles": res.preload_cycles,
            f"{p}_compute_cycles": res.compute_cycles,
            f"{p}_readout_cycles": res.readout_cycles,
            f"{p}_mac_count": res.mac_count,
            f"{p}_gated_mac_count": res.gated_mac_count,
            f"{p}_gated_fraction": res.gated_fraction,
            f"{p}_utilization": res.utilization,
            f"{p}_sram_loads": res.sram_loads,
            f"{p}_verified": ok,
        })
    if len(opts.orchestrations) == 2:
        rec["speedup"] = rec["conventional_simulated_cycles"] / rec["axon_simulated_cycles"]
    return rec


def conv_record(layer: ConvLayer, opts: RunOptions, repeat: int = 1) -> dict:
    cfg = opts.config
    capacity = opts.feeder_capacity or min(cfg.rows, cfg.cols)
    m, k, n = layer.gemm_shape()
    tr = traffic(layer, capacity)
    compute = scaled_runtime(Orchestration.AXON, cfg, GemmWorkload(layer.name, m, k, n),
                             opts.mode).total
    bw = bandwidth_limited_runtime(compute, layer_bytes(layer, tr.software_elements),
                                   layer_bytes(layer, tr.axon_elements), opts.bandwidth,
                                   opts.clock)
    e_sw = dram_energy(tr.software_bytes, opts.pj_per_byte)
    e_ax = dram_energy(tr.axon_bytes, opts.pj_per_byte)
    return {
        "name": layer.name, "m": m, "k": k, "n": n, "repeat": repeat,
        "filter": layer.filter_w, "stride": layer.stride, "out_w": layer.out_w,
        "software_elements": tr.software_elements * repeat,
        "axon_elements": tr.axon_elements * repeat,
        "reused_elements": tr.reused_elements * repeat,
        "software_bytes": tr.software_bytes * repeat,
        "axon_bytes": tr.axon_bytes * repeat,
        "reduction": tr.reduction,
        "software_energy_j": e_sw * repeat,
        "axon_energy_j": e_ax * repeat,
        "energy_saving_j": (e_sw - e_ax) * repeat,
        "compute_cycles": compute * repeat,
        "software_cycles": bw.software_cycles * repeat,
        "axon_cycles": bw.axon_cycles * repeat,
        "bandwidth_speedup": bw.speedup,
    }


def gather(fn: Callable[..., dict], items: Iterable, opts: RunOptions,
           repeats: dict[str, int] | None = None, jobs: int = 1) -> list[dict]:
    """Evaluate ``fn`` per workload, possibly in worker processes; sorted by name."""
    items = list(items)
    reps = [(repeats or {}).get(it.name, 1) for it in items]
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(fn, items, [opts] * len(items), reps))
    else:
        records = [fn(it, opts, r) for it, r in zip(items, reps)]
    return sorted(records, key=lambda r: r["name"])


def aggregate_analyze(records: list[dict], orchestrations) -> dict:
    agg = {}
    for o in orchestrations:
        agg[f"{o.value}_total_cycles"] = sum(r[f"{o.value}_cycles"] for r in records)
        agg[f"{o.value}_mean_utilization"] = mean(r[f"{o.value}_utilization"] for r in records)
    if len(orchestrations) == 2:
        agg["mean_speedup"] = mean(r["speedup"] for r in records)
    return agg


def aggregate_simulate(records: list[dict], orchestrations) -> dict:
    agg = aggregate_analyze(
        [{**r, **{f"{o.value}_cycles": r[f"{o.value}_simulated_cycles"] for o in orchestrations}}
         for r in records], orchestrations)
    for o in orchestrations:
        macs = sum(r[f"{o.value}_mac_count"] for r in records)
        gated = sum(r[f"{o.value}_gated_mac_count"] for r in records)
        agg[f"{o.value}_gated_fraction"] = gated / (macs + gated) if macs + gated else 0.0
    return agg


def aggregate_conv(records: list[dict]) -> dict:
    sw = sum(r["software_elements"] for r in records)
    ax = sum(r["axon_elements"] for r in records)
    sw_b = sum(r["software_bytes"] for r in records)
    ax_b = sum(r["axon_bytes"] for r in records)
    sw_c = sum(r["software_cycles"] for r in records)
    ax_c = sum(r["axon_cycles"] for r in records)
    return {
        "layers": len(records),
        "software_elements": sw, "axon_elements": ax, "reused_elements": sw - ax,
        "software_mb": sw_b / 1e6, "axon_mb": ax_b / 1e6,
        "reduction": 1 - ax / sw if sw else 0.0,
        "energy_saving_j": sum(r["energy_saving_j"] for r in records),
        "software_cycles": sw_c, "axon_cycles": ax_c,
        "bandwidth_speedup": sw_c / ax_c if ax_c else 1.0,
    }


def make_report(command: str, opts: RunOptions, set_name: str, records: list[dict],
                aggregate: dict, extra: dict | None = None) -> dict:
    cfg = opts.config
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "axonsim",
        "version": __version__,
        "command": command,
        "config": {"rows": cfg.rows, "cols": cfg.cols, "dataflow": cfg.dataflow.value,
                   "orchestration": [o.value for o in opts.orchestrations],
                   "scale": "up" if opts.mode is None else str(opts.mode),
                   "include_preload": opts.include_preload, **(extra or {})},
        "workload_set": set_name,
        "records": records,
        "aggregate": aggregate,
    }


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"


def to_csv(report: dict) -> str:
    """Flat projection: one row per record, union of keys in first-seen order."""
    keys: list[str] = []
    for rec in report["records"]:
        keys += [k for k in rec if k not in keys]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for rec in report["records"]:
        w.writerow(rec)
    return buf.getvalue()
