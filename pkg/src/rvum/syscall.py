"""Linux RISC-V system-call bridge for the guest.

Guest syscall numbers follow the generic Linux table used by RISC-V
(``write`` is 64, not x86-64's 1). Number in a7, arguments in a0-a5, result
in a0. Unknown calls return ``-ENOSYS`` so unsupported binaries fail soft.
Guest and host errno values are assumed equal for the calls implemented here.
"""

from __future__ import annotations

import errno
import os
import stat
import sys
from dataclasses import dataclass
from typing import BinaryIO, Union

SYS_READ = 63
SYS_WRITE = 64
SYS_FSTAT = 80
SYS_EXIT = 93
SYS_EXIT_GROUP = 94
SYS_SET_TID_ADDRESS = 96
SYS_BRK = 214

A0, A7 = 10, 17
MASK64 = (1 << 64) - 1

GUEST_TID = 1
# struct stat on riscv64 (asm-generic layout)
STAT_SIZE = 128
_ST_MODE_OFFSET = 16
_ST_BLKSIZE_OFFSET = 56


@dataclass(frozen=True)
class Return:
    value: int


@dataclass(frozen=True)
class Exit:
    code: int


SyscallOutcome = Union[Return, Exit]


def _neg(err: int) -> int:
    return -err & MASK64


class SyscallHandler:
    """Services guest ECALLs against host streams.

    Only fds 0/1/2 are reachable by default and map to ``stdin``/``stdout``/
    ``stderr`` (binary streams). With ``passthrough=True`` any other fd is
    forwarded to the host descriptor of the same number.
    """

    def __init__(self, stdin: BinaryIO | None = None, stdout: BinaryIO | None = None,
                 stderr: BinaryIO | None = None, passthrough: bool = False):
        self.streams = {
            0: stdin if stdin is not None else sys.stdin.buffer,
            1: stdout if stdout is not None else sys.stdout.buffer,
            2: stderr if stderr is not None else sys.stderr.buffer,
        }
        self.passthrough = passthrough
        self._table = {
            SYS_READ: self.sys_read,
            SYS_WRITE: self.sys_write,
            SYS_FSTAT: self.sys_fstat,
            SYS_EXIT: self.sys_exit,
            SYS_EXIT_GROUP: self.sys_exit,
            SYS_SET_TID_ADDRESS: self.sys_set_tid_address,
            SYS_BRK: self.sys_brk,
        }

    def dispatch(self, state, mem) -> SyscallOutcome:
        """Handle the call described by ``state``; never touches registers."""
        number = state[A7]
        args = [state[A0 + i] for i in range(6)]
        fn = self._table.get(number)
        if fn is None:
            return Return(_neg(errno.ENOSYS))
        return fn(mem, *args)

    def sys_write(self, mem, fd, buf, count, *_):
        payload = mem.read(buf, count)
        stream = self.streams.get(fd)
        if stream is not None:
            stream.write(payload)
            stream.flush()
            return Return(len(payload))
        if not self.passthrough:
            return Return(_neg(errno.EBADF))
        try:
            return Return(os.write(fd, payload))
        except OSError as exc:
            return Return(_neg(exc.errno or errno.EIO))

    def sys_read(self, mem, fd, buf, count, *_):
        mem.read(buf, count)  # bounds check before consuming host input
        stream = self.streams.get(fd)
        try:
            if stream is not None:
                data = stream.read(count) if count else b""
            elif self.passthrough:
                data = os.read(fd, count)
            else:
                return Return(_neg(errno.EBADF))
        except OSError as exc:
            return Return(_neg(exc.errno or errno.EIO))
        mem.write(buf, data or b"")
        return Return(len(data or b""))

    def sys_fstat(self, mem, fd, statbuf, *_):
        if fd not in self.streams and not self.passthrough:
            return Return(_neg(errno.EBADF))
        # character device, rw for the owner; everything else zero
        record = bytearray(STAT_SIZE)
        mode = stat.S_IFCHR | 0o620
        record[_ST_MODE_OFFSET:_ST_MODE_OFFSET + 4] = mode.to_bytes(4, "little")
        record[_ST_BLKSIZE_OFFSET:_ST_BLKSIZE_OFFSET + 4] = (4096).to_bytes(4, "little")
        mem.write(statbuf, bytes(record))
        return Return(0)

    def sys_exit(self, mem, code, *_):
        return Exit(code & 0xFF)

    def sys_set_tid_address(self, mem, *_):
        return Return(GUEST_TID)

    def sys_brk(self, mem, addr, *_):
        # Linux semantics: an unsatisfiable request returns the current break
        if mem.brk_start <= addr <= mem.stack_bottom:
            if addr > mem.brk:
                off = mem.translate(mem.brk, addr - mem.brk)
                mem.data[off:off + addr - mem.brk] = 0
            mem.brk = addr
        return Return(mem.brk)


class RecordingHandler(SyscallHandler):
    """A handler that logs ``(number, args)`` for every call it services."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.calls: list[tuple[int, tuple[int, ...]]] = []

    def dispatch(self, state, mem) -> SyscallOutcome:
        self.calls.append((state[A7], tuple(state[A0 + i] for i in range(6))))
        return super().dispatch(state, mem)


def dispatch(state, mem, handler: SyscallHandler | None = None) -> SyscallOutcome:
    return (handler or SyscallHandler()).dispatch(state, mem)


__all__ = [
    "Return",
    "Exit",
    "SyscallOutcome",
    "SyscallHandler",
    "RecordingHandler",
    "dispatch",
]
