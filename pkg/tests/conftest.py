import io
import shutil
import subprocess
from dataclasses import dataclass

import pytest

from rvum.harness import find_qemu
from rvum.loader import LoadConfig, load_elf
from rvum.machine import Machine
from rvum.syscall import RecordingHandler

CLANG_FLAGS = ["--target=riscv64-linux-gnu", "-march=rv64i", "-mabi=lp64"]


@dataclass
class GuestRun:
    exit_code: int
    stdout: bytes
    stderr: bytes
    calls: list
    machine: Machine


def run_guest(elf: bytes, argv=("prog",), stdin: bytes = b"", config: LoadConfig = None,
              max_steps=None) -> GuestRun:
    image = load_elf(elf, config or LoadConfig(mem_size=16 << 20, stack_size=1 << 20), argv=argv)
    out, err = io.BytesIO(), io.BytesIO()
    handler = RecordingHandler(stdin=io.BytesIO(stdin), stdout=out, stderr=err)
    m = Machine.from_image(image, handler=handler)
    code = m.run(max_steps)
    return GuestRun(code, out.getvalue(), err.getvalue(), handler.calls, m)


def _clang_works() -> bool:
    clang = shutil.which("clang")
    if not clang or not shutil.which("ld.lld"):
        return False
    try:
        r = subprocess.run([clang, *CLANG_FLAGS, "-c", "-x", "assembler", "-", "-o", "/dev/null"],
                           input=b"nop\n", capture_output=True, timeout=30)
    except (OSError, subprocess.TimeoutExpired):
        return False
    return r.returncode == 0


_CLANG = None


def clang_available() -> bool:
    global _CLANG
    if _CLANG is None:
        _CLANG = _clang_works()
    return _CLANG


@pytest.fixture
def clang():
    if not clang_available():
        pytest.skip("clang with the riscv64 target and ld.lld is not installed")
    return shutil.which("clang")


@pytest.fixture
def qemu():
    path = find_qemu()
    if not path:
        pytest.skip("qemu-riscv64 not found (set RVUM_QEMU)")
    return path


@pytest.fixture
def small_config():
    return LoadConfig(mem_size=16 << 20, stack_size=1 << 20)


# ---------------------------------------------------------------- acceptance lines

ACCEPTANCE_LINES: list[str] = []


class criterion:
    """Context manager recording a PASS/FAIL/SKIP line for an acceptance criterion."""

    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            status = "PASS"
        elif issubclass(exc_type, pytest.skip.Exception):
            status = "SKIP"
            self.detail = self.detail or str(exc)
        else:
            status = "FAIL"
            self.detail = self.detail or f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        line = f"criterion {self.number} [{status}] {self.title}"
        if self.detail:
            line += f" -- {self.detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return False


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
