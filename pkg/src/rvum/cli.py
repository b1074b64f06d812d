"""Command-line entry point: ``rvum run|benchgen|oracle|bench``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .benchgen import (
    DEFAULT_SCHEME, REFERENCE_COUNT, REFERENCE_FINALS, REFERENCE_INIT, BenchSpec, SchemeParams,
    find_matching_scheme, generate, oracle_simulate, render_dump,
)
from .errors import GuestTrap, LoadError, OutputMismatch, SpawnError, StepLimitExceeded
from .harness import QEMU_ENV, default_emulators, run_differential, write_report
from .loader import LoadConfig, load_elf
from .machine import DEFAULT_MEM_SIZE, DEFAULT_STACK_SIZE, Machine
from .syscall import SyscallHandler

EXIT_USAGE = 2
EXIT_MISMATCH = 1
EXIT_DATAERR = 65
EXIT_NOINPUT = 66
EXIT_TRAP = 70


def _size(text: str) -> int:
    units = {"k": 1 << 10, "m": 1 << 20, "g": 1 << 30}
    t = text.strip().lower()
    try:
        if t and t[-1] in units:
            value = int(t[:-1], 0) * units[t[-1]]
        else:
            value = int(t, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid size {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("size must be positive")
    return value


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError(f"{text} is not a 64-bit unsigned value")
    return value


def _count(text: str) -> int:
    try:
        value = int(text.replace("_", ""), 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid count {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("count must be non-negative")
    return value


def _positive(text: str) -> int:
    value = _count(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _scheme(text: str) -> tuple[int, int, int]:
    try:
        a, b, c = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected A,B,C, e.g. 0,0,1") from None
    return a, b, c


def _ops(text: str) -> tuple[str, ...]:
    return tuple(x.strip().lower() for x in text.split(",") if x.strip())


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--count", "-n", type=_count, default=REFERENCE_COUNT,
                   help=f"number of body instructions (default {REFERENCE_COUNT})")
    p.add_argument("--init", type=_u64, nargs=4, metavar="V", default=list(REFERENCE_INIT),
                   help="initial values of t0 t1 t2 t3")
    p.add_argument("--scheme", type=_scheme, metavar="A,B,C",
                   default=(DEFAULT_SCHEME.a, DEFAULT_SCHEME.b, DEFAULT_SCHEME.c),
                   help="register offsets: rd=r[(i+A)%%4], rs1=r[(i+B)%%4], rs2=r[(i+C)%%4]")
    p.add_argument("--op-order", type=_ops, default=DEFAULT_SCHEME.op_order, metavar="OPS",
                   help="comma-separated op rotation (default add,sub,sll)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rvum", description="RV64I user-mode emulator and benchmark tools")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    run = sub.add_parser("run", help="execute a static RV64I ELF binary")
    run.add_argument("--mem-size", type=_size, default=DEFAULT_MEM_SIZE,
                     help="guest memory size, e.g. 256M (default 256M)")
    run.add_argument("--stack-size", type=_size, default=DEFAULT_STACK_SIZE,
                     help="stack region at the top of memory (default 8M)")
    run.add_argument("--unchecked", action="store_true",
                     help="skip bounds checks on guest loads/stores (unsafe)")
    run.add_argument("--max-steps", type=_positive, default=None,
                     help="stop with an error after this many instructions")
    run.add_argument("--trace", action="store_true",
                     help="print each instruction and register changes to stderr")
    run.add_argument("--passthrough-fds", action="store_true",
                     help="let the guest use host file descriptors beyond 0-2")
    run.add_argument("--aux-pagesz", action="store_true",
                     help="add AT_PAGESZ to the auxiliary vector")
    run.add_argument("binary", help="guest executable")
    run.add_argument("guest_args", nargs=argparse.REMAINDER, help="arguments passed to the guest")

    gen = sub.add_parser("benchgen", help="write the straight-line benchmark ELF")
    _add_spec_args(gen)
    gen.add_argument("--out", "-o", required=True, type=Path, help="output ELF path")

    orc = sub.add_parser("oracle", help="print the expected benchmark output")
    _add_spec_args(orc)
    orc.add_argument("--match-reference", action="store_true",
                     help="search all operand schemes for the published final values instead")

    bench = sub.add_parser("bench", help="time emulators on one binary and compare outputs")
    bench.add_argument("--bin", required=True, type=Path, help="guest binary to run")
    q = bench.add_mutually_exclusive_group()
    q.add_argument("--qemu", metavar="PATH", help=f"qemu-riscv64 binary (fallback: ${QEMU_ENV}, then PATH)")
    q.add_argument("--no-qemu", action="store_true", help="only time this emulator")
    bench.add_argument("--runs", type=_positive, default=5, help="runs per emulator (default 5)")
    bench.add_argument("--format", choices=("json", "csv"), default="json", help="report format")
    bench.add_argument("--out", type=Path, help="report path (default: print summary only)")
    bench.add_argument("--expect-sha", metavar="HEX", help="required sha256 of the guest stdout")
    return parser


def _spec(args) -> BenchSpec:
    a, b, c = args.scheme
    return BenchSpec(count=args.count, init=tuple(args.init),
                     scheme=SchemeParams(a, b, c, tuple(args.op_order)))


def cmd_run(args, parser) -> int:
    config = LoadConfig(mem_size=args.mem_size, stack_size=args.stack_size,
                        checked=not args.unchecked, aux_pagesz=args.aux_pagesz)
    try:
        data = Path(args.binary).read_bytes()
    except OSError as exc:
        print(f"rvum: cannot read {args.binary}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_NOINPUT
    try:
        image = load_elf(data, config, argv=[args.binary, *args.guest_args],
                         envp=[])
    except (LoadError, ValueError) as exc:
        print(f"rvum: {args.binary}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    handler = SyscallHandler(passthrough=args.passthrough_fds)
    machine = Machine.from_image(image, handler=handler, trace=sys.stderr if args.trace else None)
    try:
        return machine.run(args.max_steps)
    except GuestTrap as exc:
        print(exc.diagnostic, file=sys.stderr)
    except StepLimitExceeded as exc:
        print(f"rvum: {exc}", file=sys.stderr)
        print(machine.state.dump(), file=sys.stderr, end="")
    return EXIT_TRAP


def cmd_benchgen(args, parser) -> int:
    spec = _spec(args)
    args.out.write_bytes(generate(spec))
    args.out.chmod(0o755)
    sys.stdout.write(render_dump(oracle_simulate(spec)))
    return 0


def cmd_oracle(args, parser) -> int:
    if args.match_reference:
        scheme = find_matching_scheme(REFERENCE_FINALS, args.count, tuple(args.init))
        if scheme is None:
            print(f"no operand scheme reproduces the published finals at count {args.count}")
            return EXIT_MISMATCH
        print(f"scheme: {scheme}")
        sys.stdout.write(render_dump(REFERENCE_FINALS))
        return 0
    sys.stdout.write(render_dump(oracle_simulate(_spec(args))))
    return 0


def cmd_bench(args, parser) -> int:
    if not args.bin.is_file():
        print(f"rvum: no such binary {args.bin}", file=sys.stderr)
        return EXIT_NOINPUT
    emulators = default_emulators(args.qemu, use_qemu=not args.no_qemu)
    if args.qemu and len(emulators) < 2:
        print(f"rvum: qemu not found at {args.qemu}", file=sys.stderr)
        return EXIT_NOINPUT
    try:
        report = run_differential(args.bin, emulators, runs=args.runs, expected_sha=args.expect_sha)
        status = 0
    except OutputMismatch as exc:
        report, status = exc.report, EXIT_MISMATCH
        print(f"rvum: output mismatch: {exc}", file=sys.stderr)
    except SpawnError as exc:
        print(f"rvum: {exc}", file=sys.stderr)
        return EXIT_NOINPUT
    for emu, med in report.medians().items():
        print(f"{emu:<14} real {med['real_ms']:8.1f} ms  user {med['user_ms']:8.1f} ms  sys {med['sys_ms']:8.1f} ms")
    if report.speedup is not None:
        print(f"user-time speedup: {report.speedup:.2f}x")
    if args.out:
        write_report(report, args.out, args.format)
    return status


COMMANDS = {"run": cmd_run, "benchgen": cmd_benchgen, "oracle": cmd_oracle, "bench": cmd_bench}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, parser)
    except ValueError as exc:
        parser.error(str(exc))


def entry() -> None:  # pragma: no cover
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    entry()
