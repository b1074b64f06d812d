import errno
import io
import os
import stat

import numpy as np
import pytest

from rvum.errors import MemoryFault
from rvum.machine import GuestState, MemoryImage
from rvum.syscall import (
    GUEST_TID, SYS_BRK, SYS_EXIT, SYS_EXIT_GROUP, SYS_FSTAT, SYS_READ, SYS_SET_TID_ADDRESS,
    SYS_WRITE, Exit, RecordingHandler, Return, SyscallHandler, dispatch,
)

BASE = 0x10000


def neg(e):
    return (-e) & ((1 << 64) - 1)


def setup(nr, *args, mem_size=0x10000):
    mem = MemoryImage.allocate(BASE, mem_size, stack_size=0x4000)
    mem.brk = mem.brk_start = BASE + 0x2000
    state = GuestState()
    state[17] = nr
    for i, a in enumerate(args):
        state[10 + i] = a
    return state, mem


def handler(stdin=b""):
    return SyscallHandler(stdin=io.BytesIO(stdin), stdout=io.BytesIO(), stderr=io.BytesIO())


def test_write_stdout_and_stderr():
    h = handler()
    state, mem = setup(SYS_WRITE, 1, BASE + 0x100, 5)
    mem.write(BASE + 0x100, b"hello")
    assert h.dispatch(state, mem) == Return(5)
    state[10] = 2
    assert h.dispatch(state, mem) == Return(5)
    assert h.streams[1].getvalue() == b"hello" == h.streams[2].getvalue()


def test_read_loopback():
    h = handler(b"abc")
    state, mem = setup(SYS_READ, 0, BASE + 0x200, 10)
    assert h.dispatch(state, mem) == Return(3)
    assert mem.read(BASE + 0x200, 4) == b"abc\0"
    assert h.dispatch(state, mem) == Return(0)  # EOF


def test_unknown_fd_and_number():
    h = handler()
    state, mem = setup(SYS_WRITE, 7, BASE, 1)
    assert h.dispatch(state, mem) == Return(neg(errno.EBADF))
    state, mem = setup(SYS_READ, 7, BASE, 1)
    assert h.dispatch(state, mem) == Return(neg(errno.EBADF))
    state, mem = setup(4242)
    assert h.dispatch(state, mem) == Return(neg(38))


def test_passthrough_write(tmp_path):
    path = tmp_path / "out"
    fd = os.open(path, os.O_WRONLY | os.O_CREAT)
    try:
        h = SyscallHandler(stdout=io.BytesIO(), passthrough=True)
        state, mem = setup(SYS_WRITE, fd, BASE, 4)
        mem.write(BASE, b"data")
        assert h.dispatch(state, mem) == Return(4)
    finally:
        os.close(fd)
    assert path.read_bytes() == b"data"


def test_buffer_out_of_bounds():
    state, mem = setup(SYS_WRITE, 1, BASE + 0x10000 - 2, 4)
    with pytest.raises(MemoryFault):
        handler().dispatch(state, mem)


@pytest.mark.parametrize("nr", [SYS_EXIT, SYS_EXIT_GROUP])
def test_exit_mod_256(nr):
    assert handler().dispatch(*setup(nr, 300)) == Exit(44)
    assert handler().dispatch(*setup(nr, (1 << 64) - 1)) == Exit(255)


def test_brk():
    h = handler()
    state, mem = setup(SYS_BRK, 0)
    assert h.dispatch(state, mem) == Return(BASE + 0x2000)
    mem.write(BASE + 0x2000, b"\xff" * 16)
    state[10] = BASE + 0x3000
    assert h.dispatch(state, mem) == Return(BASE + 0x3000)
    assert mem.read(BASE + 0x2000, 16) == bytes(16)  # growth is zero-filled
    state[10] = BASE + 0x2800
    assert h.dispatch(state, mem) == Return(BASE + 0x2800)
    state[10] = BASE + 0x100  # below the initial break
    assert h.dispatch(state, mem) == Return(BASE + 0x2800)
    state[10] = mem.stack_bottom + 1  # into the stack
    assert h.dispatch(state, mem) == Return(BASE + 0x2800)


def test_fstat_and_set_tid():
    h = handler()
    state, mem = setup(SYS_FSTAT, 1, BASE + 0x400)
    assert h.dispatch(state, mem) == Return(0)
    mode = int.from_bytes(mem.read(BASE + 0x400 + 16, 4), "little")
    assert stat.S_ISCHR(mode)
    state, mem = setup(SYS_FSTAT, 9, BASE + 0x400)
    assert h.dispatch(state, mem) == Return(neg(errno.EBADF))
    assert h.dispatch(*setup(SYS_SET_TID_ADDRESS, BASE)) == Return(GUEST_TID)


def test_dispatch_does_not_touch_registers():
    state, mem = setup(SYS_WRITE, 1, BASE, 3)
    before = state.regs.copy()
    h = RecordingHandler(stdout=io.BytesIO())
    dispatch(state, mem, h)
    assert (state.regs == before).all()
    assert h.calls == [(SYS_WRITE, (1, BASE, 3, 0, 0, 0))]


def test_machine_writes_only_a0_and_pc():
    from rvum.isa import Instr, Op, encode
    from rvum.machine import step

    mem = MemoryImage.allocate(BASE, 0x10000, stack_size=0x4000)
    mem.write(BASE, encode(Instr(Op.ECALL)).to_bytes(4, "little"))
    state = GuestState(np.arange(32, dtype=np.uint64) + 1000, BASE)
    state.regs[0] = 0
    state[17] = 4242
    before = state.regs.copy()
    step(state, mem, handler())
    changed = set(np.nonzero(state.regs != before)[0])
    assert changed == {10}
    assert state[10] == (1 << 64) - 38
    assert state.pc == BASE + 4
