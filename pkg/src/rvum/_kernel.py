"""Fetch-decode-execute inner loop.

Registers are handled as two's-complement int64 (a view of the unsigned
register file), so wrapping add/sub/shift fall out of the machine type and
unsigned comparisons flip the sign bit. The function runs unchanged as plain
Python when numba is disabled; numpy scalar overflow is then silenced by the
caller.

The loop stops at the first instruction it cannot complete on its own (ECALL,
traps) and reports it without advancing pc, leaving syscalls and diagnostics
to Python.
"""

import numpy as np

from ._accel import njit
from ._stops import (
    STOP_BREAK, STOP_ECALL, STOP_ILLEGAL, STOP_LIMIT, STOP_MEM_FAULT, STOP_MISALIGNED,
)

# argument/return types, shared by the ahead-of-time build
SIGNATURE = "UniTuple(i8, 4)(i8[::1], i8, u1[::1], i8, b1, i8)"

_SIGN = -9223372036854775808


@njit
def _sext32(x):
    return ((x & 0xFFFFFFFF) ^ 0x80000000) - 0x80000000


@njit
def _srl64(x, sh):
    if sh == 0:
        return x
    return (x >> sh) & ~(np.int64(-1) << (64 - sh))


@njit
def _load(mem, off, width, signed):
    v = np.int64(0)
    for k in range(width):
        v |= np.int64(mem[off + k]) << (8 * k)
    if signed and width < 8:
        top = np.int64(1) << (8 * width - 1)
        v = (v ^ top) - top
    return v


@njit
def _store(mem, off, width, v):
    for k in range(width):
        mem[off + k] = (v >> (8 * k)) & 0xFF


@njit
def execute(regs, pc, mem, base, checked, max_steps):
    """Run until a stop condition; returns ``(reason, pc, steps, detail)``.

    ``detail`` is the faulting address for memory faults and the raw word for
    illegal instructions. ``steps`` counts completed instructions only.
    """
    size = np.int64(mem.shape[0])
    pc = np.int64(pc)
    base = np.int64(base)
    steps = np.int64(0)
    regs[0] = 0
    while steps < max_steps:
        if pc & 3:
            return STOP_MISALIGNED, pc, steps, pc
        off = pc - base
        if off < 0 or off > size - 4:
            return STOP_MEM_FAULT, pc, steps, pc
        w = (
            np.int64(mem[off])
            | (np.int64(mem[off + 1]) << 8)
            | (np.int64(mem[off + 2]) << 16)
            | (np.int64(mem[off + 3]) << 24)
        )
        opcode = w & 0x7F
        rd = (w >> 7) & 31
        f3 = (w >> 12) & 7
        rs1 = (w >> 15) & 31
        rs2 = (w >> 20) & 31
        f7 = w >> 25
        npc = pc + 4
        write = True
        v = np.int64(0)

        if opcode == 0x33:  # OP
            a = regs[rs1]
            b = regs[rs2]
            if f7 == 0:
                if f3 == 0:
                    v = a + b
                elif f3 == 1:
                    v = a << (b & 63)
                elif f3 == 2:
                    v = np.int64(1) if a < b else np.int64(0)
                elif f3 == 3:
                    v = np.int64(1) if (a ^ _SIGN) < (b ^ _SIGN) else np.int64(0)
                elif f3 == 4:
                    v = a ^ b
                elif f3 == 5:
                    v = _srl64(a, b & 63)
                elif f3 == 6:
                    v = a | b
                else:
                    v = a & b
            elif f7 == 0x20 and f3 == 0:
                v = a - b
            elif f7 == 0x20 and f3 == 5:
                v = a >> (b & 63)
            else:
                return STOP_ILLEGAL, pc, steps, w
        elif opcode == 0x13:  # OP-IMM
            a = regs[rs1]
            imm = ((w >> 20) ^ 0x800) - 0x800
            if f3 == 0:
                v = a + imm
            elif f3 == 1:
                if (w >> 26) != 0:
                    return STOP_ILLEGAL, pc, steps, w
                v = a << ((w >> 20) & 63)
            elif f3 == 2:
                v = np.int64(1) if a < imm else np.int64(0)
            elif f3 == 3:
                v = np.int64(1) if (a ^ _SIGN) < (imm ^ _SIGN) else np.int64(0)
            elif f3 == 4:
                v = a ^ imm
            elif f3 == 5:
                funct6 = w >> 26
                if funct6 == 0:
                    v = _srl64(a, (w >> 20) & 63)
                elif funct6 == 0x10:
                    v = a >> ((w >> 20) & 63)
                else:
                    return STOP_ILLEGAL, pc, steps, w
            elif f3 == 6:
                v = a | imm
            else:
                v = a & imm
        elif opcode == 0x3B:  # OP-32
            a = regs[rs1]
            b = regs[rs2]
            if f3 == 0 and f7 == 0:
                v = _sext32(a + b)
            elif f3 == 0 and f7 == 0x20:
                v = _sext32(a - b)
            elif f3 == 1 and f7 == 0:
                v = _sext32(a << (b & 31))
            elif f3 == 5 and f7 == 0:
                v = _sext32((a & 0xFFFFFFFF) >> (b & 31))
            elif f3 == 5 and f7 == 0x20:
                v = _sext32(a) >> (b & 31)
            else:
                return STOP_ILLEGAL, pc, steps, w
        elif opcode == 0x1B:  # OP-IMM-32
            a = regs[rs1]
            sh = (w >> 20) & 31
            if f3 == 0:
                v = _sext32(a + (((w >> 20) ^ 0x800) - 0x800))
            elif f3 == 1 and f7 == 0:
                v = _sext32(a << sh)
            elif f3 == 5 and f7 == 0:
                v = _sext32((a & 0xFFFFFFFF) >> sh)
            elif f3 == 5 and f7 == 0x20:
                v = _sext32(a) >> sh
            else:
                return STOP_ILLEGAL, pc, steps, w
        elif opcode == 0x03:  # LOAD
            if f3 == 7:
                return STOP_ILLEGAL, pc, steps, w
            width = np.int64(1) << (f3 & 3)
            addr = regs[rs1] + (((w >> 20) ^ 0x800) - 0x800)
            moff = addr - base
            if checked and (moff < 0 or moff > size - width):
                return STOP_MEM_FAULT, pc, steps, addr
            v = _load(mem, moff, width, f3 < 4)
        elif opcode == 0x23:  # STORE
            if f3 > 3:
                return STOP_ILLEGAL, pc, steps, w
            width = np.int64(1) << f3
            addr = regs[rs1] + (((((w >> 25) << 5) | rd) ^ 0x800) - 0x800)
            moff = addr - base
            if checked and (moff < 0 or moff > size - width):
                return STOP_MEM_FAULT, pc, steps, addr
            _store(mem, moff, width, regs[rs2])
            write = False
        elif opcode == 0x63:  # BRANCH
            a = regs[rs1]
            b = regs[rs2]
            if f3 == 0:
                taken = a == b
            elif f3 == 1:
                taken = a != b
            elif f3 == 4:
                taken = a < b
            elif f3 == 5:
                taken = a >= b
            elif f3 == 6:
                taken = (a ^ _SIGN) < (b ^ _SIGN)
            elif f3 == 7:
                taken = (a ^ _SIGN) >= (b ^ _SIGN)
            else:
                return STOP_ILLEGAL, pc, steps, w
            if taken:
                imm = (
                    ((w >> 31) & 1) << 12
                    | ((w >> 7) & 1) << 11
                    | ((w >> 25) & 0x3F) << 5
                    | ((w >> 8) & 0xF) << 1
                )
                npc = pc + ((imm ^ 0x1000) - 0x1000)
            write = False
        elif opcode == 0x37:  # LUI
            v = _sext32(w & 0xFFFFF000)
        elif opcode == 0x17:  # AUIPC
            v = pc + _sext32(w & 0xFFFFF000)
        elif opcode == 0x6F:  # JAL
            imm = (
                ((w >> 31) & 1) << 20
                | ((w >> 12) & 0xFF) << 12
                | ((w >> 20) & 1) << 11
                | ((w >> 21) & 0x3FF) << 1
            )
            v = npc
            npc = pc + ((imm ^ 0x100000) - 0x100000)
        elif opcode == 0x67:  # JALR
            if f3 != 0:
                return STOP_ILLEGAL, pc, steps, w
            v = npc
            npc = (regs[rs1] + (((w >> 20) ^ 0x800) - 0x800)) & -2
        elif opcode == 0x0F:  # MISC-MEM
            if f3 != 0:
                return STOP_ILLEGAL, pc, steps, w
            write = False
        elif opcode == 0x73:  # SYSTEM
            if w == 0x73:
                return STOP_ECALL, pc, steps, w
            if w == 0x00100073:
                return STOP_BREAK, pc, steps, w
            return STOP_ILLEGAL, pc, steps, w
        else:
            return STOP_ILLEGAL, pc, steps, w

        if write and rd != 0:
            regs[rd] = v
        pc = npc
        steps += 1
    return STOP_LIMIT, pc, steps, np.int64(0)
