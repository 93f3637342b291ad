"""``fftu`` command line: run, time, and verify parallel transforms.

Exit codes: 0 success, 1 verification failed, 2 bad configuration or input,
3 ``--verify`` requested above the oracle cap.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from importlib import resources
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bsp import CostModel, cost_report, serial_default
from .distribution import ConfigurationError, gather, scatter
from .engine import fftu_inverse, fftu_transform, make_plan
from .io import SignalFormatError, generate_input, read_signal, write_signal
from .kernel import dft_naive_md

log = logging.getLogger("fftu")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_ORACLE_CAP = 3

DEFAULT_ORACLE_CAP = 65536
REPORT_VERSION = 1


@dataclass
class RunConfig:
    shape: Optional[Tuple[int, ...]]
    grid: Optional[Tuple[int, ...]]
    mode: str = "forward"
    iterations: int = 1
    seed: int = 0
    verify: bool = False
    oracle_cap: int = DEFAULT_ORACLE_CAP
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    trace_path: Optional[str] = None
    baseline_path: Optional[str] = None
    report_format: str = "text"
    serial: bool = False
    g: float = 1.0
    l: float = 0.0


def verify_tolerance(N: int) -> float:
    return 1e-11 * max(1.0, math.log2(N) / 10) if N > 1 else 1e-11


def parse_dims(text: str) -> Tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected dimensions like 8x8x8, got {text!r}") from None
    if not dims or any(n < 1 for n in dims):
        raise argparse.ArgumentTypeError(f"dimensions must be positive, got {text!r}")
    return dims


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fftu",
        description="Cyclic-to-cyclic parallel multidimensional FFT on virtual BSP processors.",
    )
    parser.add_argument("--shape", type=parse_dims, help="global array shape, e.g. 256x256x16")
    parser.add_argument("--grid", type=parse_dims, help="processor grid, e.g. 2x2x1 (default: all ones)")
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--inverse", action="store_true", help="run the inverse transform")
    mode.add_argument("--roundtrip", action="store_true", help="forward followed by inverse")
    parser.add_argument("--iterations", type=int, default=1, help="transforms inside the timed region")
    parser.add_argument("--seed", type=int, default=0, help="seed for the generated input")
    parser.add_argument("--verify", action="store_true", help="compare against the direct DFT oracle")
    parser.add_argument("--oracle-cap", type=int, default=DEFAULT_ORACLE_CAP,
                        help="largest N allowed with --verify (default %(default)s)")
    parser.add_argument("--input", dest="input_path", help="read the input signal from a file")
    parser.add_argument("--output", dest="output_path", help="write the result to a file")
    parser.add_argument("--report", choices=("text", "json"), default="text")
    parser.add_argument("--trace", dest="trace_path", help="write the superstep trace as JSON")
    parser.add_argument("--baseline", dest="baseline_path", help="JSON report of a p = 1 run for speedup")
    parser.add_argument("--serial", action="store_true", help="run virtual processors one at a time")
    parser.add_argument("--g", type=float, default=1.0, help="BSP cost per communicated word")
    parser.add_argument("--l", type=float, default=0.0, help="BSP cost per charged synchronization")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        shape=args.shape,
        grid=args.grid,
        mode="inverse" if args.inverse else "roundtrip" if args.roundtrip else "forward",
        iterations=args.iterations,
        seed=args.seed,
        verify=args.verify,
        oracle_cap=args.oracle_cap,
        input_path=args.input_path,
        output_path=args.output_path,
        trace_path=args.trace_path,
        baseline_path=args.baseline_path,
        report_format=args.report,
        serial=args.serial or serial_default(),
        g=args.g,
        l=args.l,
    )


def first_mismatch(result: np.ndarray, expected: np.ndarray, tol: float) -> Optional[Tuple[int, ...]]:
    """Row-major first index whose error exceeds ``tol`` times the largest expected magnitude.

    Falls back to the index of the largest error when no single element crosses the threshold.
    """
    err = np.abs(result - expected)
    scale = max(float(np.max(np.abs(expected))), 1.0)
    bad = np.argwhere(err > tol * scale)
    idx = bad[0] if len(bad) else np.unravel_index(int(np.argmax(err)), err.shape)
    return tuple(int(i) for i in idx)


def relative_residual(result: np.ndarray, expected: np.ndarray) -> float:
    ref = float(np.linalg.norm(expected))
    err = float(np.linalg.norm(result - expected))
    return err / ref if ref > 0 else err


def run(cfg: RunConfig) -> Tuple[Dict[str, Any], np.ndarray]:
    """Execute a configuration and return ``(report, global result)``.

    Raises :class:`ConfigurationError` / :class:`SignalFormatError` for bad input.
    """
    if cfg.iterations < 1:
        raise ConfigurationError(f"--iterations must be >= 1, got {cfg.iterations}")
    if cfg.input_path:
        x = read_signal(cfg.input_path)
        if cfg.shape is not None and tuple(cfg.shape) != x.shape:
            raise ConfigurationError(f"--shape {cfg.shape} does not match input file shape {x.shape}")
    elif cfg.shape is None:
        raise ConfigurationError("either --shape or --input is required")
    else:
        x = generate_input(cfg.shape, cfg.seed)
    shape = x.shape
    grid = tuple(cfg.grid) if cfg.grid else (1,) * len(shape)
    if len(grid) != len(shape):
        raise ConfigurationError(f"grid {grid} has {len(grid)} dimensions, shape {shape} has {len(shape)}")
    N = x.size

    plan = make_plan(shape, grid, "inverse" if cfg.mode == "inverse" else "forward")
    cmap = plan.cyclic_map
    blocks = scatter(cmap, x)
    log.debug("shape %s grid %s: local box %s, packets %s", shape, grid, plan.local_shape, plan.packet_shape)

    timings: List[float] = []
    t_region = time.perf_counter()
    for _ in range(cfg.iterations):
        t0 = time.perf_counter()
        out, trace = fftu_transform(blocks, plan, serial=cfg.serial)
        if cfg.mode == "roundtrip":
            out, trace_inv = fftu_inverse(out, plan, inplace=True, serial=cfg.serial)
            trace.supersteps.extend(trace_inv.supersteps)
        timings.append(time.perf_counter() - t0)
    total = time.perf_counter() - t_region
    y = gather(cmap, out)

    per_iter = total / cfg.iterations
    transforms = 2 if cfg.mode == "roundtrip" else 1
    nominal_flops = transforms * 5.0 * N * math.log2(N) if N > 1 else 0.0
    report: Dict[str, Any] = {
        "version": REPORT_VERSION,
        "shape": list(shape),
        "grid": list(grid),
        "nprocs": plan.nprocs,
        "mode": cfg.mode,
        "execution": "serial" if cfg.serial else "parallel",
        "seed": cfg.seed if not cfg.input_path else None,
        "iterations": cfg.iterations,
        "wall_time_total": total,
        "wall_time_per_iteration": per_iter,
        "timings": timings,
        "flop_rate": nominal_flops / per_iter if per_iter > 0 else None,
        "trace": trace.summary(),
        "bsp_cost": {"g": cfg.g, "l": cfg.l, "total": cost_report(trace, CostModel(cfg.g, cfg.l))},
    }

    if cfg.verify:
        if cfg.mode == "roundtrip":
            expected = x
        else:
            expected = dft_naive_md(x, cfg.mode)
        tol = verify_tolerance(N)
        residual = relative_residual(y, expected)
        report["verification"] = {
            "residual": residual,
            "tolerance": tol,
            "passed": residual <= tol,
            "first_mismatch": None if residual <= tol else first_mismatch(y, expected, tol),
        }

    if cfg.baseline_path:
        with open(cfg.baseline_path) as fh:
            base = json.load(fh)
        base_time = float(base["wall_time_per_iteration"])
        report["baseline"] = {
            "nprocs": base.get("nprocs", 1),
            "wall_time_per_iteration": base_time,
            "speedup": base_time / per_iter if per_iter > 0 else None,
        }

    if cfg.trace_path:
        with open(cfg.trace_path, "w") as fh:
            fh.write(trace.to_json(indent=2))
    if cfg.output_path:
        write_signal(cfg.output_path, y)
    return report, y


def format_text(report: Dict[str, Any]) -> str:
    shape = "x".join(map(str, report["shape"]))
    grid = "x".join(map(str, report["grid"]))
    tr = report["trace"]
    lines = [
        f"fftu {report['mode']}  shape {shape}  grid {grid}  p = {report['nprocs']}  ({report['execution']})",
        f"iterations            {report['iterations']}",
        f"time per iteration    {report['wall_time_per_iteration']:.6f} s",
        f"total time            {report['wall_time_total']:.6f} s",
    ]
    if report["flop_rate"]:
        lines.append(f"flop rate (5N log2 N) {report['flop_rate'] / 1e9:.3f} Gflop/s")
    lines += [
        f"supersteps            {tr['supersteps']} ({tr['communicate_supersteps']} communicate, "
        f"{tr['syncs_charged']} sync charged)",
        f"max flops per rank    {tr['max_flops_per_rank']:.0f}",
        f"max words sent/recv   {tr['max_words_sent']} / {tr['max_words_received']}",
        f"BSP cost (g={report['bsp_cost']['g']:g}, l={report['bsp_cost']['l']:g})  {report['bsp_cost']['total']:.0f}",
    ]
    ver = report.get("verification")
    if ver:
        status = "PASS" if ver["passed"] else "FAIL"
        lines.append(f"verification          {status}  residual {ver['residual']:.3e} (tol {ver['tolerance']:.1e})")
        if ver["first_mismatch"] is not None:
            lines.append(f"first mismatch at     {tuple(ver['first_mismatch'])}")
    base = report.get("baseline")
    if base:
        lines += [
            "",
            f"{'p':>6} {'time (s)':>12} {'speedup':>9}",
            f"{base['nprocs']:>6} {base['wall_time_per_iteration']:>12.6f} {1.0:>9.2f}",
            f"{report['nprocs']:>6} {report['wall_time_per_iteration']:>12.6f} {base['speedup']:>9.2f}",
        ]
    return "\n".join(lines)


def report_schema() -> Dict[str, Any]:
    return json.loads(resources.files("fftu").joinpath("report.schema.json").read_text())


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    cfg = _config(args)

    if cfg.verify and cfg.shape is not None and math.prod(cfg.shape) > cfg.oracle_cap:
        print(f"fftu: --verify needs N <= {cfg.oracle_cap} (oracle cap), got N = {math.prod(cfg.shape)}",
              file=sys.stderr)
        return EXIT_ORACLE_CAP
    if cfg.verify and cfg.input_path and cfg.shape is None:
        try:
            n = read_signal(cfg.input_path).size
        except (OSError, SignalFormatError) as exc:
            print(f"fftu: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if n > cfg.oracle_cap:
            print(f"fftu: --verify needs N <= {cfg.oracle_cap} (oracle cap), got N = {n}", file=sys.stderr)
            return EXIT_ORACLE_CAP

    try:
        report, _ = run(cfg)
    except (ConfigurationError, SignalFormatError, OSError) as exc:
        print(f"fftu: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if cfg.report_format == "json":
        print(json.dumps(report, indent=2))
    else:
        print(format_text(report))

    ver = report.get("verification")
    if ver and not ver["passed"]:
        print(f"fftu: verification failed: residual {ver['residual']:.3e} > {ver['tolerance']:.1e}, "
              f"first mismatch at {tuple(ver['first_mismatch'] or ())}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
