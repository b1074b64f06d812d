"""Compare the execution backends (aot / jit / python) on the straight-line benchmark.

Each backend runs in a fresh interpreter selected through RVUM_BACKEND, so the
numbers include process start-up, as a user of ``rvum run`` would see them.
The python fallback is slow (~10 us/instruction), so it gets a smaller N by default.

    python benchmarks/bench_kernel.py --count 2000000 --python-count 100000
"""

import argparse
import os
import statistics
import sys
import tempfile
from pathlib import Path

from rvum.benchgen import BenchSpec, expected_output, generate
from rvum.harness import self_command, time_process


def bench(backend: str, binary: Path, runs: int, expected: bytes) -> dict:
    env = dict(os.environ, RVUM_BACKEND=backend)
    env.pop("RVUM_DISABLE_NUMBA", None)
    times = []
    for _ in range(runs):
        t = time_process(self_command(), [binary], env=env)
        if t.exit_code != 0 or t.stdout != expected:
            raise SystemExit(f"{backend}: wrong output (exit {t.exit_code}): {t.stderr.decode()[-300:]}")
        times.append(t)
    return {
        "user_ms": statistics.median(t.user_ms for t in times),
        "real_ms": statistics.median(t.real_ms for t in times),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=2_000_000)
    ap.add_argument("--python-count", type=int, default=100_000)
    ap.add_argument("--runs", type=int, default=3)
    ap.add_argument("--backends", default="aot,jit,python")
    args = ap.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        print(f"{'backend':<8} {'N':>10} {'user ms':>10} {'real ms':>10} {'ns/instr':>10}")
        for backend in args.backends.split(","):
            n = args.python_count if backend == "python" else args.count
            spec = BenchSpec(count=n)
            binary = Path(tmp) / f"bench{n}"
            if not binary.exists():
                binary.write_bytes(generate(spec))
            if backend == "jit":  # populate numba's on-disk cache first
                bench(backend, binary, 1, expected_output(spec))
            res = bench(backend, binary, args.runs, expected_output(spec))
            per = res["user_ms"] * 1e6 / n if n else float("nan")
            print(f"{backend:<8} {n:>10} {res['user_ms']:>10.1f} {res['real_ms']:>10.1f} {per:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
