"""Command-line front end: benchmarks, drop rates, gradient checks,
and randomized oracle verification.

Exit codes: 0 success, 1 runtime failure or divergence, 2 invalid
configuration, 3 inconclusive gradient check.  The default seed comes
from EVENTQ_SEED; every emitted row records all of its inputs, so any
run is reproducible from its own output.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

import numpy as np

from . import bench as bench_mod
from .bench import (
    BenchRecord,
    PoissonWorkload,
    measure_drop_rate,
    run_inference_bench,
    run_rsnn_bench,
    sweep,
    write_csv,
    write_json,
)
from .errors import (
    CapabilityError,
    ConfigurationError,
    EventQError,
)
from .gradcheck import sample_usable_directions
from .verify import SWEEP_CONFIGS, equivalence_task

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3


def _default_seed() -> int:
    return int(os.environ.get("EVENTQ_SEED", "0"))


def _emit(records: List[BenchRecord], out_path: Optional[str], fmt: str) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            (write_csv if fmt == "csv" else write_json)(records, fh)
    else:
        (write_csv if fmt == "csv" else write_json)(records, sys.stdout)


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="write results to this file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, default=None,
                   help="rng seed (default: $EVENTQ_SEED or 0)")


def _add_workload_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--queue", required=True, help="queue kind identifier")
    p.add_argument("--capacity", type=int, default=None)
    p.add_argument("--max-delay", type=int, default=None)
    p.add_argument("--lambda", dest="lambda_steps", type=float, default=400.0,
                   help="mean inter-spike interval in steps")
    p.add_argument("--delay", type=int, default=80, help="delay in steps")
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--steps", type=int, default=100_000)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--warmup", type=int, default=2)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="eventq",
        description="Differentiable spike-event queue benchmarks",
    )
    sub = top.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="timing benchmarks")
    bench_sub = p_bench.add_subparsers(dest="bench_kind", required=True)

    p_poisson = bench_sub.add_parser("poisson", help="Poisson stream into queues")
    _add_workload_flags(p_poisson)
    _add_output_flags(p_poisson)

    p_rsnn = bench_sub.add_parser("rsnn", help="recurrent LIF network")
    p_rsnn.add_argument("--queue", required=True)
    p_rsnn.add_argument("--n", type=int, default=10)
    p_rsnn.add_argument("--mode", choices=("inference", "forward-ad"),
                        default="inference")
    p_rsnn.add_argument("--steps", type=int, default=1000)
    p_rsnn.add_argument("--reps", type=int, default=5)
    p_rsnn.add_argument("--warmup", type=int, default=2)
    p_rsnn.add_argument("--capacity", type=int, default=None)
    _add_output_flags(p_rsnn)

    p_sweep = bench_sub.add_parser("sweep", help="grid sweep along one axis")
    p_sweep.add_argument("--axis", choices=("batch", "capacity", "pressure"),
                         required=True)
    p_sweep.add_argument("--grid", required=True,
                         help="comma-separated ascending values")
    _add_workload_flags(p_sweep)
    _add_output_flags(p_sweep)

    p_drop = sub.add_parser("droprate", help="Monte Carlo drop rates")
    p_drop.add_argument("--queue", required=True)
    p_drop.add_argument("--capacity", type=int, default=None)
    p_drop.add_argument("--max-delay", type=int, default=None)
    p_drop.add_argument("--lambda", dest="lambda_steps", type=float, default=400.0)
    p_drop.add_argument("--pressures", default="0.1,0.2,0.5,1.0,2.0,4.0",
                        help="comma-separated delay/lambda grid")
    p_drop.add_argument("--steps", type=int, default=1_000_000)
    _add_output_flags(p_drop)

    p_grad = sub.add_parser("gradcheck", help="forward gradients vs FD")
    p_grad.add_argument("--queue", default="ring")
    p_grad.add_argument("--n", type=int, default=10)
    p_grad.add_argument("--steps", type=int, default=2000)
    p_grad.add_argument("--directions", type=int, default=20)
    p_grad.add_argument("--tolerance", type=float, default=5e-2)
    p_grad.add_argument("--seed", type=int, default=None)

    p_verify = sub.add_parser("verify", help="randomized oracle equivalence")
    p_verify.add_argument("--configs", default=",".join(SWEEP_CONFIGS),
                          help="comma-separated sweep config names")
    p_verify.add_argument("--runs", type=int, default=10,
                          help="randomized traces per config")
    p_verify.add_argument("--events", type=int, default=10_000,
                          help="events per trace")
    p_verify.add_argument("--seed", type=int, default=None)

    return top


def cmd_bench_poisson(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    wl = PoissonWorkload(args.lambda_steps, args.delay, args.batch,
                         args.steps, seed)
    rec = run_inference_bench(
        args.queue, wl, capacity=args.capacity, max_delay=args.max_delay,
        reps=args.reps, warmup=args.warmup,
    )
    _emit([rec], args.out, args.format)
    return EXIT_OK


def cmd_bench_rsnn(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    params = bench_mod.default_rsnn_params(
        args.n, args.queue, seed, queue_capacity=args.capacity
    )
    mode = args.mode.replace("-", "_")
    rec = run_rsnn_bench(params, mode, t_steps=args.steps, reps=args.reps,
                         warmup=args.warmup, rng_seed=seed)
    _emit([rec], args.out, args.format)
    return EXIT_OK


def cmd_bench_sweep(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    grid = [float(x) for x in args.grid.split(",") if x]
    wl = PoissonWorkload(args.lambda_steps, args.delay, args.batch,
                         args.steps, seed)
    records = sweep(args.axis, grid, args.queue, wl, capacity=args.capacity,
                    reps=args.reps, warmup=args.warmup)
    _emit(records, args.out, args.format)
    return EXIT_OK


def cmd_droprate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    pressures = [float(x) for x in args.pressures.split(",") if x]
    records = []
    for pr in pressures:
        delay = max(1, round(pr * args.lambda_steps))
        records.append(
            measure_drop_rate(
                args.queue, args.lambda_steps, delay, args.steps, seed,
                capacity=args.capacity, max_delay=args.max_delay,
            )
        )
    _emit(records, args.out, args.format)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    params = bench_mod.default_rsnn_params(args.n, args.queue, seed)
    drive = bench_mod.default_drive(params, args.steps, seed)
    rng = np.random.default_rng(seed)
    usable = sample_usable_directions(
        params, args.steps, args.directions, rng, drive
    )
    print("direction,jvp,fd,rel_err,status")
    for c in usable:
        print(f"{c.direction.param}[{c.direction.i}][{c.direction.j}],"
              f"{c.jvp:.6e},{c.fd:.6e},{c.rel_err:.3e},ok")
    if not usable:
        print("no usable (spike-count-preserving) directions found; "
              "inconclusive")
        return EXIT_INCONCLUSIVE
    worst = max(c.rel_err for c in usable)
    print(f"worst relative error over {len(usable)} usable directions: "
          f"{worst:.3e} (tolerance {args.tolerance:.0e})")
    return EXIT_OK if worst < args.tolerance else EXIT_RUNTIME


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    names = [x for x in args.configs.split(",") if x]
    for name in names:
        if name not in SWEEP_CONFIGS:
            raise ConfigurationError(
                f"unknown verify config {name!r}; choose from "
                f"{sorted(SWEEP_CONFIGS)}"
            )
    failures = 0
    for name in names:
        for run in range(args.runs):
            _, _, equal, divergence = equivalence_task(
                (name, args.events, seed + run)
            )
            if not equal:
                failures += 1
                step, exp, got = divergence
                print(f"{name} run {run}: diverged at step {step}: "
                      f"expected {exp}, got {got}")
        if failures == 0:
            print(f"{name}: Equal ({args.runs} runs x {args.events} events)")
    return EXIT_OK if failures == 0 else EXIT_RUNTIME


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "bench":
            if args.bench_kind == "poisson":
                return cmd_bench_poisson(args)
            if args.bench_kind == "rsnn":
                return cmd_bench_rsnn(args)
            return cmd_bench_sweep(args)
        if args.command == "droprate":
            return cmd_droprate(args)
        if args.command == "gradcheck":
            return cmd_gradcheck(args)
        if args.command == "verify":
            return cmd_verify(args)
        parser.error(f"unknown command {args.command}")
    except (ConfigurationError, CapabilityError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EventQError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
