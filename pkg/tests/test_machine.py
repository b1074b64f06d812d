import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rvum.errors import GuestTrap, IllegalInstruction, MemoryFault, StepLimitExceeded
from rvum.isa import IMM_RANGES, BRANCHES, Fmt, Instr, Op, decode, encode
from rvum.machine import (
    Continue, Exited, GuestState, Machine, MemoryImage, Trap, TrapKind, step,
)
from rvum.syscall import SyscallHandler

from refsim import M64, W_OPS, ref_step, sext32

BASE = 0x10000


def machine_with(words, size=0x4000, checked=True):
    mem = MemoryImage.allocate(BASE, size, checked=checked, stack_size=0x1000)
    code = np.array([encode(w) if isinstance(w, Instr) else w for w in words], dtype="<u4")
    mem.write(BASE, code.tobytes())
    state = GuestState(pc=BASE)
    return state, mem


def exec_one(instr, regs=None, pc=BASE):
    state, mem = machine_with([])
    mem.write(pc, encode(instr).to_bytes(4, "little"))
    state.pc = pc
    for r, v in (regs or {}).items():
        state[r] = v
    out = step(state, mem)
    return state, mem, out


# ---------------------------------------------------------------- memory image


def test_translate_and_bounds():
    mem = MemoryImage.allocate(0x1000, 0x100)
    assert mem.translate(0x1000) == 0
    assert mem.translate(0x10F8, 8) == 0xF8
    with pytest.raises(MemoryFault):
        mem.translate(0x10F9, 8)
    with pytest.raises(MemoryFault):
        mem.translate(0xFFF)
    mem.write_u64(0x1008, 0x1122334455667788)
    assert mem.read(0x1008, 2) == b"\x88\x77"
    assert mem.read_u32(0x100C) == 0x11223344


def test_unchecked_translate_skips_bounds():
    mem = MemoryImage.allocate(0x1000, 0x100, checked=False)
    assert mem.translate(0x2000, 8) == 0x1000
    with pytest.raises(MemoryFault):  # host helpers stay checked
        mem.read(0x2000, 8)


def test_state_x0_and_dump():
    s = GuestState()
    s[0] = 5
    s[1] = -1
    assert s[0] == 0 and s[1] == M64
    lines = s.dump().splitlines()
    assert lines[0] == "zero=0000000000000000"
    assert lines[1] == "ra=ffffffffffffffff"
    assert lines[-1].startswith("pc=")


# ---------------------------------------------------------------- examples


@pytest.mark.parametrize("instr,regs,rd,expected", [
    (Instr(Op.ADD, 5, 6, 7), {6: M64, 7: 1}, 5, 0),
    (Instr(Op.SUB, 5, 6, 7), {6: 0, 7: 1}, 5, M64),
    (Instr(Op.SLL, 5, 6, 7), {6: 1, 7: 64 + 63}, 5, 1 << 63),
    (Instr(Op.SRL, 5, 6, 7), {6: 1 << 63, 7: 63}, 5, 1),
    (Instr(Op.SRA, 5, 6, 7), {6: 1 << 63, 7: 63}, 5, M64),
    (Instr(Op.SLT, 5, 6, 7), {6: M64, 7: 0}, 5, 1),
    (Instr(Op.SLTU, 5, 6, 7), {6: M64, 7: 0}, 5, 0),
    (Instr(Op.SLTIU, 5, 6, imm=-1), {6: 12345}, 5, 1),
    (Instr(Op.ADDI, 5, 0, imm=-2048), {}, 5, (-2048) & M64),
    (Instr(Op.SRAI, 5, 6, imm=4), {6: 0x8000000000000000}, 5, 0xF800000000000000),
    (Instr(Op.SRLI, 5, 6, imm=0), {6: 0x8000000000000000}, 5, 0x8000000000000000),
    (Instr(Op.ADDW, 5, 6, 7), {6: 0x7FFFFFFF, 7: 1}, 5, 0xFFFFFFFF80000000),
    (Instr(Op.ADDIW, 5, 6, imm=0), {6: 0x1_FFFF_FFFF}, 5, M64),
    (Instr(Op.SRLW, 5, 6, 7), {6: 0xFFFF_FFFF_8000_0000, 7: 0}, 5, 0xFFFFFFFF80000000),
    (Instr(Op.SRLIW, 5, 6, imm=1), {6: 0x8000_0000}, 5, 0x40000000),
    (Instr(Op.SRAW, 5, 6, 7), {6: 0x8000_0000, 7: 31}, 5, M64),
    (Instr(Op.LUI, 5, imm=-4096), {}, 5, 0xFFFFFFFFFFFFF000),
    (Instr(Op.AUIPC, 5, imm=0x1000), {}, 5, BASE + 0x1000),
])
def test_alu_examples(instr, regs, rd, expected):
    state, _, out = exec_one(instr, regs)
    assert out == Continue()
    assert state[rd] == expected
    assert state.pc == BASE + 4


def test_loads_and_stores():
    state, mem, _ = exec_one(Instr(Op.SD, rs1=6, rs2=7, imm=-8), {6: BASE + 0x108, 7: 0x80FF_7F01_8000_00FF})
    assert mem.read_u64(BASE + 0x100) == 0x80FF_7F01_8000_00FF
    cases = [
        (Op.LB, 0, 0xFFFFFFFFFFFFFFFF), (Op.LBU, 0, 0xFF), (Op.LH, 2, 0xFFFFFFFFFFFF8000),
        (Op.LHU, 2, 0x8000), (Op.LW, 4, 0xFFFFFFFF80FF7F01), (Op.LWU, 0, 0x800000FF),
        (Op.LW, 0, 0xFFFFFFFF800000FF), (Op.LD, 0, 0x80FF_7F01_8000_00FF),
    ]
    for op, off, expected in cases:
        state.pc = BASE
        mem.write(BASE, encode(Instr(op, 5, 6, imm=off - 8)).to_bytes(4, "little"))
        state[5] = 0
        assert step(state, mem) == Continue()
        assert state[5] == expected, op
    for op, width in ((Op.SB, 1), (Op.SH, 2), (Op.SW, 4)):
        mem.write_u64(BASE + 0x200, 0)
        exec_state = state
        exec_state.pc = BASE
        exec_state[7] = M64
        exec_state[6] = BASE + 0x200
        mem.write(BASE, encode(Instr(op, rs1=6, rs2=7)).to_bytes(4, "little"))
        step(exec_state, mem)
        assert mem.read_u64(BASE + 0x200) == (1 << (8 * width)) - 1


def test_branches_and_jumps():
    state, _, _ = exec_one(Instr(Op.BLT, rs1=5, rs2=6, imm=-16), {5: M64, 6: 0}, pc=BASE + 64)
    assert state.pc == BASE + 48
    state, _, _ = exec_one(Instr(Op.BLTU, rs1=5, rs2=6, imm=-16), {5: M64, 6: 0}, pc=BASE + 64)
    assert state.pc == BASE + 68
    state, _, _ = exec_one(Instr(Op.JAL, 1, imm=8))
    assert (state.pc, state[1]) == (BASE + 8, BASE + 4)
    state, _, _ = exec_one(Instr(Op.JALR, 1, 1, imm=3), {1: BASE + 0x100})
    assert (state.pc, state[1]) == (BASE + 0x102, BASE + 4)
    state, _, _ = exec_one(Instr(Op.JAL, 0, imm=0))
    assert state.pc == BASE and state[0] == 0


# ---------------------------------------------------------------- traps


def test_trap_kinds():
    _, _, out = exec_one(Instr(Op.EBREAK))
    assert out == Trap(TrapKind.BREAKPOINT, BASE, 0x00100073)
    state, mem = machine_with([0x02000033])  # mul
    assert step(state, mem) == Trap(TrapKind.ILLEGAL_INSTRUCTION, BASE, 0x02000033)
    _, _, out = exec_one(Instr(Op.LD, 5, 6, imm=0), {6: 0x100})
    assert out == Trap(TrapKind.MEMORY_FAULT, BASE, 0x100)
    _, _, out = exec_one(Instr(Op.SD, rs1=6, rs2=5, imm=-8), {6: BASE + 0x4000 + 1})
    assert out.kind is TrapKind.MEMORY_FAULT
    state, mem = machine_with([])
    state.pc = BASE + 2
    assert step(state, mem).kind is TrapKind.MISALIGNED_FETCH
    state.pc = BASE + 0x4000
    assert step(state, mem).kind is TrapKind.MEMORY_FAULT


def test_trap_keeps_state():
    state, mem = machine_with([Instr(Op.ADDI, 5, 0, imm=7), 0xFFFFFFFF])
    m = Machine(state, mem)
    with pytest.raises(GuestTrap) as exc:
        m.run()
    assert state.pc == BASE + 4 and state[5] == 7
    assert "IllegalInstruction" in exc.value.diagnostic
    assert "t0=0000000000000007" in exc.value.diagnostic


def test_unchecked_allows_in_range_access():
    state, mem = machine_with([Instr(Op.SD, rs1=6, rs2=5), Instr(Op.LD, 7, 6)], checked=False)
    state[5], state[6] = 42, BASE + 0x800
    assert step(state, mem) == Continue() and step(state, mem) == Continue()
    assert state[7] == 42


def test_step_limit_and_loop():
    state, mem = machine_with([Instr(Op.JAL, 0, imm=0)])
    m = Machine(state, mem)
    with pytest.raises(StepLimitExceeded) as exc:
        m.run(max_steps=1000)
    assert exc.value.steps == 1000
    assert m.steps == 1000


def test_ecall_exit_and_unknown():
    state, mem = machine_with([
        Instr(Op.ADDI, 17, 0, imm=999), Instr(Op.ECALL),
        Instr(Op.ADDI, 10, 10, imm=40), Instr(Op.ADDI, 17, 0, imm=93), Instr(Op.ECALL),
    ])
    code = Machine(state, mem, handler=SyscallHandler(stdout=io.BytesIO())).run()
    assert code == (-38 + 40) & 0xFF


def test_trace_lists_each_instruction():
    state, mem = machine_with([Instr(Op.ADDI, 5, 0, imm=1), Instr(Op.ADDI, 10, 0, imm=3),
                               Instr(Op.ADDI, 17, 0, imm=93), Instr(Op.ECALL)])
    buf = io.StringIO()
    assert Machine(state, mem, trace=buf).run() == 3
    lines = buf.getvalue().splitlines()
    assert len(lines) == 4
    assert lines[0] == f"{BASE:016x}: addi x5, x0, 1" + " " * 14 + " t0=0000000000000001"


# ---------------------------------------------------------------- properties

u64 = st.integers(0, M64)
nonmem_ops = [op for op in Op if op.fmt not in (Fmt.S, Fmt.SYSTEM) and op.value[0] != "l"
              or op in (Op.LUI,)]


@st.composite
def nonmem_instr(draw):
    op = draw(st.sampled_from(nonmem_ops))
    lo, hi = IMM_RANGES[op.fmt]
    imm = draw(st.integers(lo, hi))
    if op.fmt in (Fmt.B, Fmt.J):
        imm &= ~3
    if op.fmt is Fmt.U:
        imm = (imm >> 12) << 12
    if op.fmt is Fmt.FENCE:
        imm &= 0xFF
    reg = st.integers(0, 31)
    return decode(encode(Instr(op, draw(reg), draw(reg), draw(reg), imm)))


@settings(max_examples=1500, deadline=None)
@given(nonmem_instr(), st.lists(u64, min_size=32, max_size=32))
def test_kernel_matches_reference(instr, values):
    values[0] = 0
    pc = BASE + 0x2000
    state, mem = machine_with([])
    state.regs[:] = np.array(values, dtype=np.uint64)
    state.pc = pc
    mem.write(pc, encode(instr).to_bytes(4, "little"))
    ref = list(values)
    ref_pc = ref_step(instr, ref, pc)
    assert step(state, mem) == Continue()
    assert [int(x) for x in state.regs] == ref
    assert state.pc == ref_pc


@settings(max_examples=500, deadline=None)
@given(st.sampled_from(sorted(W_OPS, key=lambda o: o.value)), u64, u64)
def test_w_ops_sign_extend(op, a, b):
    if op.fmt is Fmt.R:
        instr = Instr(op, 5, 6, 7)
    else:
        lo, hi = IMM_RANGES[op.fmt]
        instr = Instr(op, 5, 6, imm=lo + b % (hi - lo + 1))
    state, _, _ = exec_one(instr, {6: a, 7: b})
    arg = b if op.fmt is Fmt.R else instr.imm
    assert state[5] == sext32(W_OPS[op](a, arg))


@settings(max_examples=3000, deadline=None)
@given(st.integers(0, 0xFFFFFFFF))
def test_kernel_legality_matches_decoder(word):
    state, mem = machine_with([word])
    for r in range(1, 32):
        state[r] = BASE + 0x1000
    out = step(state, mem)
    try:
        decode(word)
        legal = True
    except IllegalInstruction:
        legal = False
    illegal_trap = isinstance(out, Trap) and out.kind is TrapKind.ILLEGAL_INSTRUCTION
    assert illegal_trap == (not legal)
    assert state[0] == 0
