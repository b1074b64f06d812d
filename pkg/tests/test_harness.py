import json
import sys

import pytest

from rvum.benchgen import BenchSpec, expected_output, generate
from rvum.errors import OutputMismatch, ReportError, SpawnError
from rvum.harness import (
    QEMU_NAME, SELF_NAME, BenchReport, RunRecord, default_emulators, find_qemu, read_report,
    run_differential, self_command, sha256, time_process, write_report,
)


@pytest.fixture(scope="module")
def bench_bin(tmp_path_factory):
    path = tmp_path_factory.mktemp("bin") / "bench"
    path.write_bytes(generate(BenchSpec(count=1000)))
    return path


def record(emu, run, user, real=None):
    return RunRecord(emu, run, real if real is not None else user + 1, user, 0.5, 0, "ab")


def test_time_process_reports_cpu_and_exit():
    t = time_process([sys.executable, "-c",
                      "import sys\nx=0\nfor i in range(2*10**6): x+=i\nprint('ok')\nsys.exit(3)"])
    assert t.stdout == b"ok\n"
    assert t.exit_code == 3
    assert t.user_ms > 10
    assert t.real_ms >= t.user_ms * 0.5


def test_time_process_spawn_error():
    with pytest.raises(SpawnError):
        time_process(["/nonexistent/emulator"])


def test_self_vs_self(bench_bin):
    emus = {SELF_NAME: self_command(), QEMU_NAME: self_command()}
    report = run_differential(bench_bin, emus, runs=2,
                              expected_sha=sha256(expected_output(BenchSpec(count=1000))))
    assert report.passed
    assert len(report.runs) == 4
    assert {r.stdout_sha for r in report.runs} == {sha256(expected_output(BenchSpec(count=1000)))}
    assert report.speedup is not None and report.speedup > 0
    assert report.stdout_bytes == 80


def test_mismatch_raises(bench_bin):
    with pytest.raises(OutputMismatch) as exc:
        run_differential(bench_bin, {SELF_NAME: self_command()}, runs=1, expected_sha="0" * 64)
    assert not exc.value.report.passed
    assert "expected" in str(exc.value)

    liar = [sys.executable, "-c", "import sys; sys.stdout.write('t0=0\\n')"]
    with pytest.raises(OutputMismatch) as exc:
        run_differential(bench_bin, {SELF_NAME: self_command(), QEMU_NAME: liar}, runs=1)
    assert "first difference at byte 3" in str(exc.value)


def test_speedup_is_user_time_ratio():
    report = BenchReport([record(QEMU_NAME, k, 246) for k in range(5)]
                         + [record(SELF_NAME, k, 7) for k in range(5)])
    assert report.speedup == pytest.approx(246 / 7)
    assert report.speedup == pytest.approx(35.14, abs=0.01)


def test_single_emulator_has_no_speedup(tmp_path):
    report = BenchReport([record(SELF_NAME, 0, 7)])
    assert report.speedup is None
    write_report(report, tmp_path / "r.csv", "csv")
    assert "speedup" not in (tmp_path / "r.csv").read_text().splitlines()[0]
    write_report(report, tmp_path / "r.json", "json")
    assert "speedup" not in json.loads((tmp_path / "r.json").read_text())


def test_validation():
    with pytest.raises(ReportError):
        BenchReport([])
    with pytest.raises(ReportError):
        BenchReport([record(SELF_NAME, 0, -1)])
    with pytest.raises(ValueError):
        run_differential("x", {}, runs=1)


def test_median_ignores_order():
    users = [9, 1, 5, 3, 7]
    a = BenchReport([record(SELF_NAME, k, u) for k, u in enumerate(users)])
    b = BenchReport([record(SELF_NAME, k, u) for k, u in enumerate(reversed(users))])
    assert a.medians() == b.medians()
    assert a.medians()[SELF_NAME]["user_ms"] == 5


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_report_roundtrip(tmp_path, fmt):
    report = BenchReport([record(QEMU_NAME, k, 200 + k) for k in range(3)]
                         + [record(SELF_NAME, k, 6 + k) for k in range(3)])
    path = write_report(report, tmp_path / f"r.{fmt}", fmt)
    back = read_report(path)
    assert back.runs == report.runs
    assert back.speedup == pytest.approx(201 / 7)
    text = path.read_text()
    for name in ("emulator", "run", "real_ms", "user_ms", "sys_ms", "exit", "stdout_sha", "speedup"):
        assert name in text
    with pytest.raises(ValueError):
        write_report(report, tmp_path / "r.xml", "xml")


def test_find_qemu_env(monkeypatch, tmp_path):
    fake = tmp_path / "qemu-riscv64"
    fake.write_text("#!/bin/sh\n")
    monkeypatch.setenv("RVUM_QEMU", str(fake))
    assert find_qemu() == str(fake)
    assert find_qemu(str(fake)) == str(fake)
    monkeypatch.setenv("RVUM_QEMU", "")
    monkeypatch.setenv("PATH", str(tmp_path / "empty"))
    assert find_qemu() is None
    with pytest.warns(UserWarning):
        assert list(default_emulators()) == [SELF_NAME]
