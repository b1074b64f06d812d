"""RV64I instruction representation, decoding, encoding and disassembly.

Decoding dispatches on the 7-bit major opcode through a jump table, then on
funct3/funct7 inside each handler. Extensions (M, A, F, D, C, Zicsr,
Zifencei) are rejected as illegal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, NamedTuple

from .errors import IllegalInstruction, ImmediateOutOfRange

__all__ = [
    "Op",
    "Fmt",
    "Instr",
    "decode",
    "encode",
    "disassemble",
    "ABI_NAMES",
    "IllegalInstruction",
    "ImmediateOutOfRange",
]

ABI_NAMES = (
    "zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 "
    "a6 a7 s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6"
).split()


class Fmt(enum.Enum):
    R = "R"
    I = "I"  # noqa: E741
    S = "S"
    B = "B"
    U = "U"
    J = "J"
    SHIFT = "SHIFT"  # I-type, 6-bit shamt
    SHIFTW = "SHIFTW"  # I-type, 5-bit shamt
    FENCE = "FENCE"
    SYSTEM = "SYSTEM"


class _Enc(NamedTuple):
    opcode: int
    funct3: int
    funct7: int  # funct7 for R/SHIFTW, funct6 for SHIFT, 0 otherwise
    fmt: Fmt


class Op(enum.Enum):
    LUI = "lui"
    AUIPC = "auipc"
    JAL = "jal"
    JALR = "jalr"
    BEQ = "beq"
    BNE = "bne"
    BLT = "blt"
    BGE = "bge"
    BLTU = "bltu"
    BGEU = "bgeu"
    LB = "lb"
    LH = "lh"
    LW = "lw"
    LD = "ld"
    LBU = "lbu"
    LHU = "lhu"
    LWU = "lwu"
    SB = "sb"
    SH = "sh"
    SW = "sw"
    SD = "sd"
    ADDI = "addi"
    SLTI = "slti"
    SLTIU = "sltiu"
    XORI = "xori"
    ORI = "ori"
    ANDI = "andi"
    SLLI = "slli"
    SRLI = "srli"
    SRAI = "srai"
    ADD = "add"
    SUB = "sub"
    SLL = "sll"
    SLT = "slt"
    SLTU = "sltu"
    XOR = "xor"
    SRL = "srl"
    SRA = "sra"
    OR = "or"
    AND = "and"
    FENCE = "fence"
    ECALL = "ecall"
    EBREAK = "ebreak"
    ADDIW = "addiw"
    SLLIW = "slliw"
    SRLIW = "srliw"
    SRAIW = "sraiw"
    ADDW = "addw"
    SUBW = "subw"
    SLLW = "sllw"
    SRLW = "srlw"
    SRAW = "sraw"

    @property
    def fmt(self) -> Fmt:
        return ENCODINGS[self].fmt


OPC_LUI = 0x37
OPC_AUIPC = 0x17
OPC_JAL = 0x6F
OPC_JALR = 0x67
OPC_BRANCH = 0x63
OPC_LOAD = 0x03
OPC_STORE = 0x23
OPC_OP_IMM = 0x13
OPC_OP = 0x33
OPC_MISC_MEM = 0x0F
OPC_SYSTEM = 0x73
OPC_OP_IMM_32 = 0x1B
OPC_OP_32 = 0x3B

ENCODINGS: dict[Op, _Enc] = {
    Op.LUI: _Enc(OPC_LUI, 0, 0, Fmt.U),
    Op.AUIPC: _Enc(OPC_AUIPC, 0, 0, Fmt.U),
    Op.JAL: _Enc(OPC_JAL, 0, 0, Fmt.J),
    Op.JALR: _Enc(OPC_JALR, 0, 0, Fmt.I),
    Op.BEQ: _Enc(OPC_BRANCH, 0, 0, Fmt.B),
    Op.BNE: _Enc(OPC_BRANCH, 1, 0, Fmt.B),
    Op.BLT: _Enc(OPC_BRANCH, 4, 0, Fmt.B),
    Op.BGE: _Enc(OPC_BRANCH, 5, 0, Fmt.B),
    Op.BLTU: _Enc(OPC_BRANCH, 6, 0, Fmt.B),
    Op.BGEU: _Enc(OPC_BRANCH, 7, 0, Fmt.B),
    Op.LB: _Enc(OPC_LOAD, 0, 0, Fmt.I),
    Op.LH: _Enc(OPC_LOAD, 1, 0, Fmt.I),
    Op.LW: _Enc(OPC_LOAD, 2, 0, Fmt.I),
    Op.LD: _Enc(OPC_LOAD, 3, 0, Fmt.I),
    Op.LBU: _Enc(OPC_LOAD, 4, 0, Fmt.I),
    Op.LHU: _Enc(OPC_LOAD, 5, 0, Fmt.I),
    Op.LWU: _Enc(OPC_LOAD, 6, 0, Fmt.I),
    Op.SB: _Enc(OPC_STORE, 0, 0, Fmt.S),
    Op.SH: _Enc(OPC_STORE, 1, 0, Fmt.S),
    Op.SW: _Enc(OPC_STORE, 2, 0, Fmt.S),
    Op.SD: _Enc(OPC_STORE, 3, 0, Fmt.S),
    Op.ADDI: _Enc(OPC_OP_IMM, 0, 0, Fmt.I),
    Op.SLTI: _Enc(OPC_OP_IMM, 2, 0, Fmt.I),
    Op.SLTIU: _Enc(OPC_OP_IMM, 3, 0, Fmt.I),
    Op.XORI: _Enc(OPC_OP_IMM, 4, 0, Fmt.I),
    Op.ORI: _Enc(OPC_OP_IMM, 6, 0, Fmt.I),
    Op.ANDI: _Enc(OPC_OP_IMM, 7, 0, Fmt.I),
    Op.SLLI: _Enc(OPC_OP_IMM, 1, 0x00, Fmt.SHIFT),
    Op.SRLI: _Enc(OPC_OP_IMM, 5, 0x00, Fmt.SHIFT),
    Op.SRAI: _Enc(OPC_OP_IMM, 5, 0x10, Fmt.SHIFT),
    Op.ADD: _Enc(OPC_OP, 0, 0x00, Fmt.R),
    Op.SUB: _Enc(OPC_OP, 0, 0x20, Fmt.R),
    Op.SLL: _Enc(OPC_OP, 1, 0x00, Fmt.R),
    Op.SLT: _Enc(OPC_OP, 2, 0x00, Fmt.R),
    Op.SLTU: _Enc(OPC_OP, 3, 0x00, Fmt.R),
    Op.XOR: _Enc(OPC_OP, 4, 0x00, Fmt.R),
    Op.SRL: _Enc(OPC_OP, 5, 0x00, Fmt.R),
    Op.SRA: _Enc(OPC_OP, 5, 0x20, Fmt.R),
    Op.OR: _Enc(OPC_OP, 6, 0x00, Fmt.R),
    Op.AND: _Enc(OPC_OP, 7, 0x00, Fmt.R),
    Op.FENCE: _Enc(OPC_MISC_MEM, 0, 0, Fmt.FENCE),
    Op.ECALL: _Enc(OPC_SYSTEM, 0, 0, Fmt.SYSTEM),
    Op.EBREAK: _Enc(OPC_SYSTEM, 0, 0, Fmt.SYSTEM),
    Op.ADDIW: _Enc(OPC_OP_IMM_32, 0, 0, Fmt.I),
    Op.SLLIW: _Enc(OPC_OP_IMM_32, 1, 0x00, Fmt.SHIFTW),
    Op.SRLIW: _Enc(OPC_OP_IMM_32, 5, 0x00, Fmt.SHIFTW),
    Op.SRAIW: _Enc(OPC_OP_IMM_32, 5, 0x20, Fmt.SHIFTW),
    Op.ADDW: _Enc(OPC_OP_32, 0, 0x00, Fmt.R),
    Op.SUBW: _Enc(OPC_OP_32, 0, 0x20, Fmt.R),
    Op.SLLW: _Enc(OPC_OP_32, 1, 0x00, Fmt.R),
    Op.SRLW: _Enc(OPC_OP_32, 5, 0x00, Fmt.R),
    Op.SRAW: _Enc(OPC_OP_32, 5, 0x20, Fmt.R),
}

BRANCHES = frozenset({Op.BEQ, Op.BNE, Op.BLT, Op.BGE, Op.BLTU, Op.BGEU})
JUMPS = frozenset({Op.JAL, Op.JALR})
LOADS = frozenset({Op.LB, Op.LH, Op.LW, Op.LD, Op.LBU, Op.LHU, Op.LWU})
STORES = frozenset({Op.SB, Op.SH, Op.SW, Op.SD})

# Inclusive immediate ranges per format.
IMM_RANGES: dict[Fmt, tuple[int, int]] = {
    Fmt.R: (0, 0),
    Fmt.I: (-2048, 2047),
    Fmt.S: (-2048, 2047),
    Fmt.B: (-4096, 4094),
    Fmt.U: (-(1 << 31), (1 << 31) - 4096),
    Fmt.J: (-(1 << 20), (1 << 20) - 2),
    Fmt.SHIFT: (0, 63),
    Fmt.SHIFTW: (0, 31),
    Fmt.FENCE: (-2048, 2047),
    Fmt.SYSTEM: (0, 0),
}


@dataclass(frozen=True)
class Instr:
    """A decoded instruction.

    ``imm`` is the fully sign-extended immediate. For shift-immediates it
    holds the shift amount (also exposed as :attr:`shamt`); for FENCE it holds
    the raw fm/pred/succ field so that encoding is lossless.
    """

    op: Op
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0

    @property
    def shamt(self) -> int:
        if self.op.fmt not in (Fmt.SHIFT, Fmt.SHIFTW):
            raise AttributeError(f"{self.op.value} has no shift amount")
        return self.imm

    def __str__(self) -> str:
        return disassemble(self)


def _sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


def _fields(w: int) -> tuple[int, int, int, int, int]:
    return (w >> 7) & 31, (w >> 12) & 7, (w >> 15) & 31, (w >> 20) & 31, w >> 25


def _imm_i(w: int) -> int:
    return _sext(w >> 20, 12)


def _imm_s(w: int) -> int:
    return _sext(((w >> 25) << 5) | ((w >> 7) & 31), 12)


def _imm_b(w: int) -> int:
    raw = (
        ((w >> 31) & 1) << 12
        | ((w >> 7) & 1) << 11
        | ((w >> 25) & 0x3F) << 5
        | ((w >> 8) & 0xF) << 1
    )
    return _sext(raw, 13)


def _imm_u(w: int) -> int:
    return _sext(w & 0xFFFFF000, 32)


def _imm_j(w: int) -> int:
    raw = (
        ((w >> 31) & 1) << 20
        | ((w >> 12) & 0xFF) << 12
        | ((w >> 20) & 1) << 11
        | ((w >> 21) & 0x3FF) << 1
    )
    return _sext(raw, 21)


# funct lookup tables for the nested dispatch
_BRANCH_F3 = {0: Op.BEQ, 1: Op.BNE, 4: Op.BLT, 5: Op.BGE, 6: Op.BLTU, 7: Op.BGEU}
_LOAD_F3 = {0: Op.LB, 1: Op.LH, 2: Op.LW, 3: Op.LD, 4: Op.LBU, 5: Op.LHU, 6: Op.LWU}
_STORE_F3 = {0: Op.SB, 1: Op.SH, 2: Op.SW, 3: Op.SD}
_OP_IMM_F3 = {0: Op.ADDI, 2: Op.SLTI, 3: Op.SLTIU, 4: Op.XORI, 6: Op.ORI, 7: Op.ANDI}
_OP_IMM_SHIFT = {(1, 0x00): Op.SLLI, (5, 0x00): Op.SRLI, (5, 0x10): Op.SRAI}
_OP_RR = {
    (f.funct3, f.funct7): op
    for op, f in ENCODINGS.items()
    if f.opcode == OPC_OP
}
_OP_RR_32 = {
    (f.funct3, f.funct7): op
    for op, f in ENCODINGS.items()
    if f.opcode == OPC_OP_32
}
_OP_IMM_32_SHIFT = {(1, 0x00): Op.SLLIW, (5, 0x00): Op.SRLIW, (5, 0x20): Op.SRAIW}


def _dec_lui(w: int) -> Instr:
    return Instr(Op.LUI, rd=(w >> 7) & 31, imm=_imm_u(w))


def _dec_auipc(w: int) -> Instr:
    return Instr(Op.AUIPC, rd=(w >> 7) & 31, imm=_imm_u(w))


def _dec_jal(w: int) -> Instr:
    return Instr(Op.JAL, rd=(w >> 7) & 31, imm=_imm_j(w))


def _dec_jalr(w: int) -> Instr:
    rd, f3, rs1, _, _ = _fields(w)
    if f3 != 0:
        raise IllegalInstruction(w, "jalr funct3")
    return Instr(Op.JALR, rd=rd, rs1=rs1, imm=_imm_i(w))


def _dec_branch(w: int) -> Instr:
    _, f3, rs1, rs2, _ = _fields(w)
    op = _BRANCH_F3.get(f3)
    if op is None:
        raise IllegalInstruction(w, "branch funct3")
    return Instr(op, rs1=rs1, rs2=rs2, imm=_imm_b(w))


def _dec_load(w: int) -> Instr:
    rd, f3, rs1, _, _ = _fields(w)
    op = _LOAD_F3.get(f3)
    if op is None:
        raise IllegalInstruction(w, "load funct3")
    return Instr(op, rd=rd, rs1=rs1, imm=_imm_i(w))


def _dec_store(w: int) -> Instr:
    _, f3, rs1, rs2, _ = _fields(w)
    op = _STORE_F3.get(f3)
    if op is None:
        raise IllegalInstruction(w, "store funct3")
    return Instr(op, rs1=rs1, rs2=rs2, imm=_imm_s(w))


def _dec_op_imm(w: int) -> Instr:
    rd, f3, rs1, _, _ = _fields(w)
    op = _OP_IMM_F3.get(f3)
    if op is not None:
        return Instr(op, rd=rd, rs1=rs1, imm=_imm_i(w))
    op = _OP_IMM_SHIFT.get((f3, w >> 26))
    if op is None:
        raise IllegalInstruction(w, "shift-immediate funct6")
    return Instr(op, rd=rd, rs1=rs1, imm=(w >> 20) & 63)


def _dec_op(w: int) -> Instr:
    rd, f3, rs1, rs2, f7 = _fields(w)
    op = _OP_RR.get((f3, f7))
    if op is None:
        raise IllegalInstruction(w, "register op funct7")
    return Instr(op, rd=rd, rs1=rs1, rs2=rs2)


def _dec_op_imm_32(w: int) -> Instr:
    rd, f3, rs1, _, f7 = _fields(w)
    if f3 == 0:
        return Instr(Op.ADDIW, rd=rd, rs1=rs1, imm=_imm_i(w))
    op = _OP_IMM_32_SHIFT.get((f3, f7))
    if op is None:
        raise IllegalInstruction(w, "word shift-immediate funct7")
    return Instr(op, rd=rd, rs1=rs1, imm=(w >> 20) & 31)


def _dec_op_32(w: int) -> Instr:
    rd, f3, rs1, rs2, f7 = _fields(w)
    op = _OP_RR_32.get((f3, f7))
    if op is None:
        raise IllegalInstruction(w, "word op funct7")
    return Instr(op, rd=rd, rs1=rs1, rs2=rs2)


def _dec_misc_mem(w: int) -> Instr:
    rd, f3, rs1, _, _ = _fields(w)
    if f3 != 0:
        raise IllegalInstruction(w, "only FENCE is supported in MISC-MEM")
    return Instr(Op.FENCE, rd=rd, rs1=rs1, imm=_imm_i(w))


def _dec_system(w: int) -> Instr:
    if w == 0x00000073:
        return Instr(Op.ECALL)
    if w == 0x00100073:
        return Instr(Op.EBREAK)
    raise IllegalInstruction(w, "CSR and privileged instructions are not supported")


_DECODE_TABLE: dict[int, Callable[[int], Instr]] = {
    OPC_LUI: _dec_lui,
    OPC_AUIPC: _dec_auipc,
    OPC_JAL: _dec_jal,
    OPC_JALR: _dec_jalr,
    OPC_BRANCH: _dec_branch,
    OPC_LOAD: _dec_load,
    OPC_STORE: _dec_store,
    OPC_OP_IMM: _dec_op_imm,
    OPC_OP: _dec_op,
    OPC_MISC_MEM: _dec_misc_mem,
    OPC_SYSTEM: _dec_system,
    OPC_OP_IMM_32: _dec_op_imm_32,
    OPC_OP_32: _dec_op_32,
}


def decode(word: int) -> Instr:
    """Decode a 32-bit instruction word. Raises :class:`IllegalInstruction`."""
    if not 0 <= word <= 0xFFFFFFFF:
        raise IllegalInstruction(word, "not a 32-bit word")
    if word & 3 != 3:
        raise IllegalInstruction(word, "compressed encodings are not supported")
    handler = _DECODE_TABLE.get(word & 0x7F)
    if handler is None:
        raise IllegalInstruction(word, "unknown major opcode")
    return handler(word)


def _check_imm(instr: Instr) -> None:
    fmt = instr.op.fmt
    lo, hi = IMM_RANGES[fmt]
    imm = instr.imm
    if not lo <= imm <= hi:
        raise ImmediateOutOfRange(
            f"{instr.op.value}: immediate {imm} outside [{lo}, {hi}]"
        )
    if fmt in (Fmt.B, Fmt.J) and imm & 1:
        raise ImmediateOutOfRange(f"{instr.op.value}: offset {imm} is odd")
    if fmt is Fmt.U and imm & 0xFFF:
        raise ImmediateOutOfRange(f"{instr.op.value}: low 12 bits of {imm:#x} set")


def encode(instr: Instr) -> int:
    """Encode to a 32-bit word; inverse of :func:`decode`."""
    for name in ("rd", "rs1", "rs2"):
        r = getattr(instr, name)
        if not 0 <= r < 32:
            raise ValueError(f"{name}={r} is not a register index")
    _check_imm(instr)
    enc = ENCODINGS[instr.op]
    fmt = enc.fmt
    rd, rs1, rs2, imm = instr.rd, instr.rs1, instr.rs2, instr.imm
    base = enc.opcode | (enc.funct3 << 12)
    if fmt is Fmt.R:
        return base | rd << 7 | rs1 << 15 | rs2 << 20 | enc.funct7 << 25
    if fmt in (Fmt.I, Fmt.FENCE):
        return base | rd << 7 | rs1 << 15 | (imm & 0xFFF) << 20
    if fmt is Fmt.SHIFT:
        return base | rd << 7 | rs1 << 15 | imm << 20 | enc.funct7 << 26
    if fmt is Fmt.SHIFTW:
        return base | rd << 7 | rs1 << 15 | imm << 20 | enc.funct7 << 25
    if fmt is Fmt.S:
        u = imm & 0xFFF
        return base | (u & 31) << 7 | rs1 << 15 | rs2 << 20 | (u >> 5) << 25
    if fmt is Fmt.B:
        u = imm & 0x1FFF
        return (
            base
            | ((u >> 11) & 1) << 7
            | ((u >> 1) & 0xF) << 8
            | rs1 << 15
            | rs2 << 20
            | ((u >> 5) & 0x3F) << 25
            | ((u >> 12) & 1) << 31
        )
    if fmt is Fmt.U:
        return base | rd << 7 | (imm & 0xFFFFF000)
    if fmt is Fmt.J:
        u = imm & 0x1FFFFF
        return (
            base
            | rd << 7
            | ((u >> 12) & 0xFF) << 12
            | ((u >> 11) & 1) << 20
            | ((u >> 1) & 0x3FF) << 21
            | ((u >> 20) & 1) << 31
        )
    # SYSTEM
    if rd or rs1 or rs2:
        raise ValueError(f"{instr.op.value} takes no operands")
    return 0x00100073 if instr.op is Op.EBREAK else 0x00000073


def disassemble(instr: Instr) -> str:
    """Lowercase assembly text using numeric register names (``x5``)."""
    op = instr.op
    name = op.value
    fmt = op.fmt
    rd, rs1, rs2, imm = f"x{instr.rd}", f"x{instr.rs1}", f"x{instr.rs2}", instr.imm
    if fmt is Fmt.R:
        return f"{name} {rd}, {rs1}, {rs2}"
    if op in LOADS or op is Op.JALR:
        return f"{name} {rd}, {imm}({rs1})"
    if fmt in (Fmt.I, Fmt.SHIFT, Fmt.SHIFTW):
        return f"{name} {rd}, {rs1}, {imm}"
    if fmt is Fmt.S:
        return f"{name} {rs2}, {imm}({rs1})"
    if fmt is Fmt.B:
        return f"{name} {rs1}, {rs2}, {imm}"
    if fmt is Fmt.U:
        return f"{name} {rd}, 0x{(imm >> 12) & 0xFFFFF:x}"
    if fmt is Fmt.J:
        return f"{name} {rd}, {imm}"
    if fmt is Fmt.FENCE:
        pred, succ = (imm >> 4) & 0xF, imm & 0xF
        return f"fence {_fence_set(pred)}, {_fence_set(succ)}"
    return name


def _fence_set(bits: int) -> str:
    return "".join(c for c, b in zip("iorw", (8, 4, 2, 1)) if bits & b) or "0"
