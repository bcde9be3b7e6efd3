"""
Command-line front end.

    axonsim analyze  --rows 256 --cols 256 --workloads builtin:table3
    axonsim simulate --rows 3 --cols 3 --gemm 3,3,3 --verify
    axonsim conv     --layers builtin:resnet50_conv

Exit codes: 0 ok, 1 usage, 2 validation, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .analytic import parse_mode
from .core import ArrayConfig, Dataflow, GemmWorkload, Orchestration
from .errors import AxonSimError, VerificationError
from .report import (RunOptions, aggregate_analyze, aggregate_conv, aggregate_simulate,
                     analyze_record, conv_record, gather, make_report, simulate_record,
                     to_csv, to_json)
from .workloads import WorkloadSet, load

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, workloads: bool = True) -> None:
    p.add_argument("--rows", type=int, default=256)
    p.add_argument("--cols", type=int, default=256)
    p.add_argument("--dataflow", choices=[d.value for d in Dataflow], default="os")
    p.add_argument("--orchestration", choices=["conventional", "axon", "both"], default="both")
    if workloads:
        p.add_argument("--workloads", default=None, help="CSV path or builtin:<name>")
        p.add_argument("--gemm", action="append", default=[], metavar="M,K,N",
                       help="ad-hoc GEMM shape (repeatable)")
    p.add_argument("--scale", default="up", help="'up' or 'out:PRxPC'")
    p.add_argument("--include-preload", action="store_true",
                   help="add WS/IS stationary preload cycles to totals")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--output", default=None)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="axonsim", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="closed-form runtime, speedup and utilization")
    _common(p)

    p = sub.add_parser("simulate", help="cycle-level simulation with oracle checks")
    _common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sparsity-a", type=float, default=0.0)
    p.add_argument("--sparsity-b", type=float, default=0.0)
    p.add_argument("--zero-gating", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--verify", action="store_true", help="compare outputs against a triple loop")
    p.add_argument("--max-macs", type=int, default=2_000_000)
    p.add_argument("--trace", default=None, help="write a per-cycle trace of the first GEMM")

    p = sub.add_parser("conv", help="im2col traffic, DRAM energy and bandwidth-bound speedup")
    _common(p, workloads=False)
    p.add_argument("--layers", required=True, help="conv CSV path or builtin:<name>")
    p.add_argument("--bandwidth", type=float, default=6.4e9, help="DRAM bytes/s")
    p.add_argument("--clock", type=float, default=800e6, help="array clock in Hz")
    p.add_argument("--pj-per-byte", type=float, default=120.0)
    p.add_argument("--feeder-capacity", type=int, default=None,
                   help="windows co-mapped on the diagonal feeders (default min(rows, cols))")
    return parser


def _orchestrations(value: str) -> tuple[Orchestration, ...]:
    if value == "both":
        return (Orchestration.CONVENTIONAL, Orchestration.AXON)
    return (Orchestration(value),)


def _gemm_set(args) -> WorkloadSet:
    gemms = []
    for i, text in enumerate(getattr(args, "gemm", []) or []):
        try:
            m, k, n = (int(v) for v in text.split(","))
        except ValueError:
            raise AxonSimError(f"--gemm expects M,K,N, got {text!r}") from None
        gemms.append(GemmWorkload(f"gemm{i}_{m}x{k}x{n}", m, k, n))
    if args.workloads:
        wset = load(args.workloads, "gemm")
        return WorkloadSet(wset.name, wset.gemms + tuple(gemms), (), wset.provenance,
                           wset.repeats)
    if not gemms:
        raise AxonSimError("no workloads given (use --workloads or --gemm)")
    return WorkloadSet("cli", tuple(gemms))


def _options(args) -> RunOptions:
    cfg = ArrayConfig(args.rows, args.cols, Orchestration.AXON, args.dataflow)
    kw = dict(config=cfg, orchestrations=_orchestrations(args.orchestration),
              mode=parse_mode(args.scale), include_preload=args.include_preload)
    if args.command == "simulate":
        kw.update(seed=args.seed, sparsity_a=args.sparsity_a, sparsity_b=args.sparsity_b,
                  zero_gating=args.zero_gating, check_outputs=args.verify,
                  max_macs=args.max_macs)
    if args.command == "conv":
        kw.update(bandwidth=args.bandwidth, clock=args.clock, pj_per_byte=args.pj_per_byte,
                  feeder_capacity=args.feeder_capacity)
    return RunOptions(**kw)


def run(args) -> dict:
    opts = _options(args)
    if args.command == "analyze":
        wset = _gemm_set(args)
        recs = gather(analyze_record, wset.gemms, opts, wset.repeats, args.jobs)
        return make_report("analyze", opts, wset.name, recs,
                           aggregate_analyze(recs, opts.orchestrations))
    if args.command == "simulate":
        wset = _gemm_set(args)
        recs = gather(simulate_record, wset.gemms, opts, wset.repeats, args.jobs)
        if args.trace:
            _write_trace(args.trace, opts, wset.gemms[0])
        return make_report("simulate", opts, wset.name, recs,
                           aggregate_simulate(recs, opts.orchestrations),
                           {"seed": opts.seed, "sparsity_a": opts.sparsity_a,
                            "sparsity_b": opts.sparsity_b, "zero_gating": opts.zero_gating})
    wset = load(args.layers, "conv")
    if not wset.convs:
        raise AxonSimError(f"{args.layers} holds no conv layers")
    recs = gather(conv_record, wset.convs, opts, wset.repeats, args.jobs)
    return make_report("conv", opts, wset.name, recs, aggregate_conv(recs),
                       {"bandwidth": opts.bandwidth, "clock": opts.clock,
                        "pj_per_byte": opts.pj_per_byte,
                        "feeder_capacity": opts.feeder_capacity or min(args.rows, args.cols)})


def _write_trace(path: str, opts: RunOptions, w: GemmWorkload) -> None:
    from .engine import simulate_gemm, synthesize_operands
    from .report import workload_rng

    w = synthesize_operands(GemmWorkload(w.name, w.m, w.k, w.n, sparsity_a=opts.sparsity_a,
                                         sparsity_b=opts.sparsity_b),
                            workload_rng(opts.seed, w.name))
    cfg = opts.config.with_(orchestration=opts.orchestrations[-1])
    res = simulate_gemm(cfg, w, zero_gating=opts.zero_gating, mode=opts.mode, trace=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# cycle row col event index\n")
        fh.write("\n".join(res.trace) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = run(args)
    except VerificationError as exc:
        print(f"axonsim: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (AxonSimError, OSError) as exc:
        print(f"axonsim: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    text = to_json(report) if args.format == "json" else to_csv(report)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
