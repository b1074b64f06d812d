"""Straight-line add/sub/sll benchmark: ELF generator and arithmetic oracle.

Instruction ``i`` of the body is ``op_order[i % 3]`` with
``rd = regs[(i + a) % 4]``, ``rs1 = regs[(i + b) % 4]`` and
``rs2 = regs[(i + c) % 4]``. A prologue loads the initial values and an
epilogue prints each register as ``tN=<16 hex digits>\\n`` through
``write(1, ...)`` from a stack buffer before ``exit(0)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .elf import single_segment_executable
from .errors import ImmediateOutOfRange
from .isa import ABI_NAMES, Instr, Op, encode

MASK64 = (1 << 64) - 1

REFERENCE_COUNT = 2_000_000
REFERENCE_INIT = (8745425, 2413112, 51124341, 991232131)
REFERENCE_FINALS = (
    8697740129876948287,
    0,
    9749003943832603329,
    18220595702735330224,
)

T0, T1, T2, T3 = 5, 6, 7, 28
BENCH_REGS = (T0, T1, T2, T3)
BENCH_OPS = ("add", "sub", "sll")
_OP_CODE = {"add": 0, "sub": 1, "sll": 2}
_OP_ENUM = {"add": Op.ADD, "sub": Op.SUB, "sll": Op.SLL}

# registers the epilogue clobbers; benchmark registers must avoid them
_RESERVED = frozenset({0, 2, *range(10, 18)})


@dataclass(frozen=True)
class SchemeParams:
    a: int = 0
    b: int = 0
    c: int = 1
    op_order: tuple[str, ...] = BENCH_OPS

    def validate(self, nregs: int = 4) -> None:
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if not 0 <= v < nregs:
                raise ValueError(f"scheme offset {name}={v} outside 0..{nregs - 1}")
        if not self.op_order or any(op not in _OP_CODE for op in self.op_order):
            raise ValueError(f"op_order {self.op_order!r} must name add/sub/sll")

    def __str__(self) -> str:
        return f"a={self.a},b={self.b},c={self.c},ops={'/'.join(self.op_order)}"


DEFAULT_SCHEME = SchemeParams()
# Result of find_matching_scheme(REFERENCE_FINALS, REFERENCE_COUNT): no candidate
# reproduces the published finals, so the default scheme stays in place.
REFERENCE_SCHEME: Optional[SchemeParams] = None


@dataclass(frozen=True)
class BenchSpec:
    count: int = REFERENCE_COUNT
    init: tuple[int, ...] = REFERENCE_INIT
    regs: tuple[int, ...] = BENCH_REGS
    scheme: SchemeParams = field(default_factory=lambda: REFERENCE_SCHEME or DEFAULT_SCHEME)

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")
        if len(self.init) != len(self.regs):
            raise ValueError("one initial value per benchmark register is required")
        if len(set(self.regs)) != len(self.regs):
            raise ValueError("benchmark registers must be distinct")
        for r in self.regs:
            if not 0 < r < 32 or r in _RESERVED:
                raise ValueError(f"x{r} cannot be a benchmark register")
        for v in self.init:
            if not 0 <= v <= MASK64:
                raise ValueError(f"initial value {v} is not a 64-bit unsigned integer")
        self.scheme.validate(len(self.regs))

    @property
    def p_instr(self) -> int:
        return len(self.scheme.op_order)

    @property
    def p_reg(self) -> int:
        return len(self.regs)

    def with_count(self, count: int) -> BenchSpec:
        return replace(self, count=count)


def render_dump(values: Iterable[int], names: Optional[Sequence[str]] = None) -> str:
    """``name=<16 hex>`` lines, in the exact format the generated epilogue prints."""
    values = list(values)
    if names is None:
        names = [f"t{i}" for i in range(len(values))]
    return "".join(f"{n}={v & MASK64:016x}\n" for n, v in zip(names, values))


# ---------------------------------------------------------------- oracle


def oracle_simulate(spec: BenchSpec) -> tuple[int, ...]:
    """Expected final register values, computed without any instruction encoding."""
    vals = np.array(spec.init, dtype=np.uint64)
    ops = np.array([_OP_CODE[o] for o in spec.scheme.op_order], dtype=np.int64)
    s = spec.scheme
    from ._oracle import oracle_loop

    with np.errstate(over="ignore"):
        out = oracle_loop(vals, spec.count, s.a, s.b, s.c, ops)
    return tuple(int(v) for v in out)


def candidate_schemes(nregs: int = 4) -> list[SchemeParams]:
    """All 4*4*4*6 operand schemes in lexicographic (a, b, c, op_order) order."""
    return [
        SchemeParams(a, b, c, perm)
        for a, b, c in itertools.product(range(nregs), repeat=3)
        for perm in itertools.permutations(BENCH_OPS)
    ]


def find_matching_scheme(target: Sequence[int], count: int,
                         init: Sequence[int] = REFERENCE_INIT) -> Optional[SchemeParams]:
    """First candidate scheme whose oracle finals equal ``target``, else None."""
    if count < 1:
        raise ValueError("count must be at least 1")
    target = tuple(int(t) & MASK64 for t in target)
    base = BenchSpec(count=count, init=tuple(init))
    for scheme in candidate_schemes(len(base.regs)):
        if oracle_simulate(replace(base, scheme=scheme)) == target:
            return scheme
    return None


# ---------------------------------------------------------------- code generation


def load_constant(rd: int, value: int) -> list[Instr]:
    """Instructions that leave the 64-bit ``value`` in ``rd``.

    32-bit signed values take LUI+ADDIW (or a lone ADDI); wider values are
    built recursively from the upper bits with SLLI/ADDI steps.
    """
    value &= MASK64
    if value >> 63:
        value -= 1 << 64
    return _materialize(rd, value)


def _sext(v: int, bits: int) -> int:
    v &= (1 << bits) - 1
    return v - (1 << bits) if v >> (bits - 1) else v


def _materialize(rd: int, v: int) -> list[Instr]:
    if -(1 << 31) <= v < (1 << 31):
        lo = _sext(v, 12)
        hi = (v - lo) >> 12
        if hi == 0:
            return [Instr(Op.ADDI, rd, 0, 0, lo)]
        # hi may be 0x80000 for values near 2**31; LUI sign-extends and the
        # 32-bit ADDIW wraps it back
        seq = [Instr(Op.LUI, rd, imm=_sext(hi << 12, 32))]
        if lo:
            seq.append(Instr(Op.ADDIW, rd, rd, 0, lo))
        return seq
    lo = _sext(v, 12)
    hi = (v - lo) >> 12
    shift = 12
    while hi & 1 == 0:
        hi >>= 1
        shift += 1
    seq = _materialize(rd, hi)
    seq.append(Instr(Op.SLLI, rd, rd, 0, shift))
    if lo:
        seq.append(Instr(Op.ADDI, rd, rd, 0, lo))
    return seq


class _Asm:
    """Instruction list with backward/forward label fix-ups for branches."""

    def __init__(self):
        self.items: list = []
        self.labels: dict[str, int] = {}

    def emit(self, *instrs: Instr) -> None:
        self.items.extend(instrs)

    def label(self, name: str) -> None:
        self.labels[name] = len(self.items)

    def branch(self, op: Op, rs1: int, rs2: int, target: str) -> None:
        self.items.append((op, rs1, rs2, target))

    def jump(self, target: str) -> None:
        self.items.append((Op.JAL, 0, 0, target))

    def words(self) -> list[int]:
        out = []
        for idx, item in enumerate(self.items):
            if isinstance(item, tuple):
                op, rs1, rs2, target = item
                off = (self.labels[target] - idx) * 4
                if op is Op.JAL:
                    item = Instr(Op.JAL, 0, imm=off)
                else:
                    item = Instr(op, rs1=rs1, rs2=rs2, imm=off)
            out.append(encode(item))
        return out


def dump_epilogue(regs: Sequence[int], names: Optional[Sequence[str]] = None,
                  exit_code: int = 0) -> list[int]:
    """Code printing ``name=<16 hex>`` per register via write(1), then exit.

    Uses a0-a7 as scratch and a stack buffer below sp; no data segment.
    """
    if names is None:
        names = [ABI_NAMES[r] for r in regs]
    length = sum(len(n) + 18 for n in names)
    frame = (length + 15) & ~15
    if frame > 2032:
        raise ValueError("dump does not fit a single stack frame")
    A0, A1, A2, A3, A4, A5, A7 = 10, 11, 12, 13, 14, 15, 17
    asm = _Asm()
    asm.emit(Instr(Op.ADDI, 2, 2, 0, -frame))
    pos = 0
    for k, (reg, name) in enumerate(zip(regs, names)):
        for ch in name.encode() + b"=":
            asm.emit(Instr(Op.ADDI, A1, 0, 0, ch), Instr(Op.SB, rs1=2, rs2=A1, imm=pos))
            pos += 1
        # fill 16 digits from the least significant end
        asm.emit(
            Instr(Op.ADDI, A2, reg, 0, 0),
            Instr(Op.ADDI, A3, 2, 0, pos + 15),
            Instr(Op.ADDI, A4, 2, 0, pos - 1),
        )
        asm.label(f"digit{k}")
        asm.emit(Instr(Op.ANDI, A5, A2, 0, 15), Instr(Op.SLTI, A1, A5, 0, 10))
        asm.branch(Op.BNE, A1, 0, f"dec{k}")
        asm.emit(Instr(Op.ADDI, A5, A5, 0, ord("a") - 10))
        asm.jump(f"put{k}")
        asm.label(f"dec{k}")
        asm.emit(Instr(Op.ADDI, A5, A5, 0, ord("0")))
        asm.label(f"put{k}")
        asm.emit(
            Instr(Op.SB, rs1=A3, rs2=A5, imm=0),
            Instr(Op.SRLI, A2, A2, 0, 4),
            Instr(Op.ADDI, A3, A3, 0, -1),
        )
        asm.branch(Op.BNE, A3, A4, f"digit{k}")
        pos += 16
        asm.emit(Instr(Op.ADDI, A1, 0, 0, ord("\n")), Instr(Op.SB, rs1=2, rs2=A1, imm=pos))
        pos += 1
    asm.emit(
        Instr(Op.ADDI, A0, 0, 0, 1),
        Instr(Op.ADDI, A1, 2, 0, 0),
        Instr(Op.ADDI, A2, 0, 0, length),
        Instr(Op.ADDI, A7, 0, 0, 64),
        Instr(Op.ECALL),
        Instr(Op.ADDI, A0, 0, 0, exit_code),
        Instr(Op.ADDI, A7, 0, 0, 93),
        Instr(Op.ECALL),
    )
    return asm.words()


def body_instructions(spec: BenchSpec, count: Optional[int] = None) -> list[Instr]:
    """The first ``count`` (default: all) body instructions, for inspection."""
    n = spec.count if count is None else count
    return [_body_instr(spec, i) for i in range(n)]


def _body_instr(spec: BenchSpec, i: int) -> Instr:
    s, regs = spec.scheme, spec.regs
    p = len(regs)
    return Instr(
        _OP_ENUM[s.op_order[i % len(s.op_order)]],
        rd=regs[(i + s.a) % p],
        rs1=regs[(i + s.b) % p],
        rs2=regs[(i + s.c) % p],
    )


def body_words(spec: BenchSpec) -> np.ndarray:
    # the schedule repeats every lcm(p_instr, p_reg) instructions
    period = math.lcm(spec.p_instr, spec.p_reg)
    one = np.array([encode(_body_instr(spec, i)) for i in range(period)], dtype="<u4")
    reps = -(-spec.count // period) if spec.count else 0
    return np.tile(one, reps)[: spec.count]


def program_words(prologue: Iterable[Instr], body: np.ndarray, epilogue: Sequence[int]) -> bytes:
    head = np.array([encode(i) for i in prologue], dtype="<u4")
    tail = np.array(epilogue, dtype="<u4")
    return np.concatenate([head, body.astype("<u4"), tail]).tobytes()


def generate(spec: BenchSpec) -> bytes:
    """Static RV64I ELF executable for ``spec``."""
    prologue = []
    for reg, value in zip(spec.regs, spec.init):
        seq = load_constant(reg, value)
        if len(seq) > 8:  # pragma: no cover - 64-bit values need at most 8
            raise ImmediateOutOfRange(f"cannot materialize {value:#x}")
        prologue += seq
    names = [f"t{i}" for i in range(len(spec.regs))]
    code = program_words(prologue, body_words(spec), dump_epilogue(spec.regs, names))
    return single_segment_executable(code)


def expected_output(spec: BenchSpec) -> bytes:
    return render_dump(oracle_simulate(spec)).encode()


def straight_line_program(instrs: Sequence[Instr], init: dict[int, int],
                          dump: Sequence[int], exit_code: int = 0) -> bytes:
    """ELF running ``instrs`` after loading ``init`` and dumping ``dump`` registers."""
    prologue = [i for reg, val in init.items() for i in load_constant(reg, val)]
    body = np.array([encode(i) for i in instrs], dtype="<u4")
    return single_segment_executable(program_words(prologue, body, dump_epilogue(dump, exit_code=exit_code)))
