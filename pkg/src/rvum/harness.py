"""Process timing and differential comparison of emulators on one binary."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import shutil
import statistics
import subprocess
import sys
import tempfile
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .errors import OutputMismatch, ReportError, SpawnError

log = logging.getLogger(__name__)

QEMU_ENV = "RVUM_QEMU"
QEMU_NAME = "qemu-riscv64"
SELF_NAME = "rvum"
FIELDS = ("emulator", "run", "real_ms", "user_ms", "sys_ms", "exit", "stdout_sha")


@dataclass
class ProcessTiming:
    real_ms: float
    user_ms: float
    sys_ms: float
    stdout: bytes
    exit_code: int
    stderr: bytes = b""


def time_process(command: Sequence[str], args: Sequence[str] = (),
                 env: Optional[dict] = None) -> ProcessTiming:
    """Run a child to completion, accounting its CPU time via ``wait4``.

    Non-zero exits are reported in the result, not raised.
    """
    argv = [os.fspath(c) for c in (*command, *args)]
    with tempfile.TemporaryFile() as err:
        start = time.perf_counter()
        try:
            proc = subprocess.Popen(argv, stdin=subprocess.DEVNULL, stdout=subprocess.PIPE,
                                    stderr=err, env=env)
        except OSError as exc:
            raise SpawnError(f"cannot start {argv[0]!r}: {exc}") from exc
        stdout = proc.stdout.read()
        proc.stdout.close()
        _, status, usage = os.wait4(proc.pid, 0)
        real = time.perf_counter() - start
        proc.returncode = os.waitstatus_to_exitcode(status)
        err.seek(0)
        stderr = err.read()
    return ProcessTiming(
        real_ms=real * 1e3,
        user_ms=usage.ru_utime * 1e3,
        sys_ms=usage.ru_stime * 1e3,
        stdout=stdout,
        exit_code=proc.returncode,
        stderr=stderr,
    )


@dataclass(frozen=True)
class RunRecord:
    emulator: str
    run: int
    real_ms: float
    user_ms: float
    sys_ms: float
    exit: int
    stdout_sha: str


@dataclass
class BenchReport:
    runs: list[RunRecord]
    baseline: str = QEMU_NAME
    subject: str = SELF_NAME
    passed: bool = True
    mismatch: str = ""
    stdout_bytes: int = field(default=0, compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.runs:
            raise ReportError("a report needs at least one run")
        for r in self.runs:
            if min(r.real_ms, r.user_ms, r.sys_ms) < 0:
                raise ReportError(f"negative duration in {r}")

    @property
    def emulators(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.runs:
            seen.setdefault(r.emulator)
        return list(seen)

    def medians(self) -> dict[str, dict[str, float]]:
        out = {}
        for emu in self.emulators:
            rs = [r for r in self.runs if r.emulator == emu]
            out[emu] = {
                k: statistics.median(getattr(r, k) for r in rs)
                for k in ("real_ms", "user_ms", "sys_ms")
            }
        return out

    @property
    def speedup(self) -> Optional[float]:
        """Baseline median user time over subject median user time."""
        med = self.medians()
        if self.baseline not in med or self.subject not in med:
            return None
        ours = med[self.subject]["user_ms"]
        if ours <= 0:
            return None
        return med[self.baseline]["user_ms"] / ours


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def find_qemu(explicit: Optional[str] = None) -> Optional[str]:
    """``explicit`` path, else ``$RVUM_QEMU``, else ``qemu-riscv64`` on PATH."""
    for candidate in (explicit, os.environ.get(QEMU_ENV)):
        if candidate:
            return candidate if Path(candidate).exists() else shutil.which(candidate)
    return shutil.which(QEMU_NAME)


def self_command() -> list[str]:
    return [sys.executable, "-m", "rvum", "run"]


def default_emulators(qemu: Optional[str] = None, use_qemu: bool = True) -> dict[str, list[str]]:
    emus = {SELF_NAME: self_command()}
    if use_qemu:
        path = find_qemu(qemu)
        if path:
            emus[QEMU_NAME] = [path]
        else:
            warnings.warn("qemu-riscv64 not found; differential run uses rvum only", stacklevel=2)
    return emus


def _first_divergence(a: bytes, b: bytes) -> str:
    n = next((i for i, (x, y) in enumerate(zip(a, b)) if x != y), min(len(a), len(b)))
    return (f"first difference at byte {n}: "
            f"{a[n:n + 16]!r} vs {b[n:n + 16]!r} (lengths {len(a)} and {len(b)})")


def run_differential(binary: str | os.PathLike, emulators: dict[str, Sequence[str]],
                     runs: int = 5, expected_sha: Optional[str] = None,
                     env: Optional[dict] = None) -> BenchReport:
    """Run every emulator ``runs`` times on ``binary`` and compare outputs.

    Children run one at a time. Any difference in stdout bytes or exit code,
    across runs or emulators, raises :class:`OutputMismatch` carrying the
    report; ``expected_sha`` additionally pins the stdout digest.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if not emulators:
        raise ValueError("no emulator to run")
    records: list[RunRecord] = []
    reference: Optional[tuple[str, bytes, int]] = None
    problems: list[str] = []
    for name, command in emulators.items():
        for k in range(runs):
            t = time_process(command, [os.fspath(binary)], env=env)
            digest = sha256(t.stdout)
            records.append(RunRecord(name, k, t.real_ms, t.user_ms, t.sys_ms, t.exit_code, digest))
            log.info("%s run %d: user %.1f ms exit %d", name, k, t.user_ms, t.exit_code)
            if reference is None:
                reference = (f"{name}#{k}", t.stdout, t.exit_code)
                continue
            ref_name, ref_out, ref_exit = reference
            if t.stdout != ref_out and not problems:
                problems.append(f"stdout of {name}#{k} differs from {ref_name}: "
                                + _first_divergence(ref_out, t.stdout))
            if t.exit_code != ref_exit and not problems:
                problems.append(f"exit code {t.exit_code} of {name}#{k} differs from {ref_exit} of {ref_name}")
    assert reference is not None
    if expected_sha is not None and sha256(reference[1]) != expected_sha and not problems:
        problems.append(f"stdout digest {sha256(reference[1])} differs from expected {expected_sha}")
    report = BenchReport(records, passed=not problems, mismatch="; ".join(problems),
                         stdout_bytes=len(reference[1]))
    if problems:
        raise OutputMismatch(report.mismatch, report)
    return report


# ---------------------------------------------------------------- report files


def _summary_rows(report: BenchReport) -> list[dict]:
    speedup = report.speedup
    rows = []
    for emu, med in report.medians().items():
        row = {"emulator": emu, "run": "median", **med,
               "exit": next(r.exit for r in report.runs if r.emulator == emu),
               "stdout_sha": next(r.stdout_sha for r in report.runs if r.emulator == emu)}
        if speedup is not None:
            row["speedup"] = speedup
        rows.append(row)
    return rows


def write_report(report: BenchReport, path: str | os.PathLike, fmt: str = "json") -> Path:
    """Write runs plus a median/speedup summary as JSON or CSV."""
    report.validate()
    path = Path(path)
    if fmt == "json":
        doc = {
            "baseline": report.baseline,
            "subject": report.subject,
            "passed": report.passed,
            "mismatch": report.mismatch,
            "runs": [asdict(r) for r in report.runs],
            "summary": _summary_rows(report),
        }
        if report.speedup is not None:
            doc["speedup"] = report.speedup
        path.write_text(json.dumps(doc, indent=2) + "\n")
    elif fmt == "csv":
        fields = list(FIELDS) + (["speedup"] if report.speedup is not None else [])
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for r in report.runs:
                writer.writerow(asdict(r))
            for row in _summary_rows(report):
                writer.writerow(row)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def read_report(path: str | os.PathLike) -> BenchReport:
    """Parse a file produced by :func:`write_report` (format from the suffix or content)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        runs = [RunRecord(**r) for r in doc["runs"]]
        return BenchReport(runs, baseline=doc["baseline"], subject=doc["subject"],
                           passed=doc["passed"], mismatch=doc["mismatch"])
    runs = []
    for row in csv.DictReader(text.splitlines()):
        if row["run"] == "median":
            continue
        runs.append(RunRecord(row["emulator"], int(row["run"]), float(row["real_ms"]),
                              float(row["user_ms"]), float(row["sys_ms"]), int(row["exit"]),
                              row["stdout_sha"]))
    return BenchReport(runs)
