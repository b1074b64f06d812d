"""Guest architectural state, flat guest memory and the execution loop."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, TextIO, Union

import numpy as np

from . import _stops
from ._accel import load_kernel
from .errors import GuestTrap, IllegalInstruction, MemoryFault, StepLimitExceeded
from .isa import ABI_NAMES, decode, disassemble

from .syscall import Exit, SyscallHandler

if TYPE_CHECKING:
    from .loader import LoadedImage

MASK64 = (1 << 64) - 1
DEFAULT_MEM_SIZE = 256 << 20
DEFAULT_STACK_SIZE = 8 << 20
# large enough to never be reached, small enough for int64
UNLIMITED = 1 << 62


@dataclass
class GuestState:
    regs: np.ndarray = field(default_factory=lambda: np.zeros(32, dtype=np.uint64))
    pc: int = 0

    def __post_init__(self):
        self.regs = np.ascontiguousarray(self.regs, dtype=np.uint64)
        if self.regs.shape != (32,):
            raise ValueError("register file must hold 32 entries")

    def __getitem__(self, i: int) -> int:
        return int(self.regs[i])

    def __setitem__(self, i: int, value: int) -> None:
        if i != 0:
            self.regs[i] = value & MASK64

    def copy(self) -> GuestState:
        return GuestState(self.regs.copy(), self.pc)

    def dump(self) -> str:
        """All registers as ``name=<16 hex>`` lines, then ``pc``."""
        lines = [f"{ABI_NAMES[i]}={int(self.regs[i]):016x}" for i in range(32)]
        lines.append(f"pc={self.pc & MASK64:016x}")
        return "\n".join(lines) + "\n"


@dataclass
class MemoryImage:
    """One contiguous block of guest memory starting at ``base``.

    Guest address ``a`` lives at ``data[a - base]``. With ``checked=False``
    data accesses made by the execution kernel skip the bounds test, the way a
    pass-through emulator leaves invalid accesses to the host; instruction
    fetch and host-side helpers stay checked.
    """

    base: int
    data: np.ndarray
    brk: int = 0
    checked: bool = True
    stack_size: int = DEFAULT_STACK_SIZE
    brk_start: int = 0

    @classmethod
    def allocate(cls, base: int, size: int, **kwargs) -> MemoryImage:
        # np.zeros maps lazily, so a large mostly-unused image stays cheap
        return cls(base, np.zeros(size, dtype=np.uint8), **kwargs)

    def __post_init__(self):
        if not self.brk:
            self.brk = self.base
        if not self.brk_start:
            self.brk_start = self.brk

    @property
    def size(self) -> int:
        return int(self.data.shape[0])

    @property
    def end(self) -> int:
        return self.base + self.size

    @property
    def stack_bottom(self) -> int:
        return self.end - self.stack_size

    def translate(self, addr: int, length: int = 1) -> int:
        if length < 1:
            raise ValueError("length must be at least 1")
        off = addr - self.base
        if self.checked and (off < 0 or off + length > self.size):
            raise MemoryFault(addr, length)
        return off

    def read(self, addr: int, length: int) -> bytes:
        if length == 0:
            return b""
        off = self._host_translate(addr, length)
        return self.data[off : off + length].tobytes()

    def write(self, addr: int, payload: bytes) -> None:
        if not payload:
            return
        off = self._host_translate(addr, len(payload))
        self.data[off : off + len(payload)] = np.frombuffer(payload, dtype=np.uint8)

    def read_u64(self, addr: int) -> int:
        return int.from_bytes(self.read(addr, 8), "little")

    def write_u64(self, addr: int, value: int) -> None:
        self.write(addr, (value & MASK64).to_bytes(8, "little"))

    def read_u32(self, addr: int) -> int:
        return int.from_bytes(self.read(addr, 4), "little")

    def read_cstr(self, addr: int, limit: int = 4096) -> bytes:
        off = self._host_translate(addr, 1)
        chunk = self.data[off : off + limit].tobytes()
        nul = chunk.find(b"\0")
        if nul < 0:
            raise MemoryFault(addr + len(chunk), 1)
        return chunk[:nul]

    def _host_translate(self, addr: int, length: int) -> int:
        off = addr - self.base
        if off < 0 or off + length > self.size:
            raise MemoryFault(addr, length)
        return off


class TrapKind(enum.Enum):
    ILLEGAL_INSTRUCTION = "IllegalInstruction"
    MEMORY_FAULT = "MemoryFault"
    MISALIGNED_FETCH = "MisalignedFetch"
    BREAKPOINT = "Breakpoint"


@dataclass(frozen=True)
class Continue:
    pass


@dataclass(frozen=True)
class Exited:
    code: int


@dataclass(frozen=True)
class Trap:
    kind: TrapKind
    pc: int
    detail: int = 0


StepOutcome = Union[Continue, Exited, Trap]

_TRAP_OF_STOP = {
    _stops.STOP_ILLEGAL: TrapKind.ILLEGAL_INSTRUCTION,
    _stops.STOP_MEM_FAULT: TrapKind.MEMORY_FAULT,
    _stops.STOP_MISALIGNED: TrapKind.MISALIGNED_FETCH,
    _stops.STOP_BREAK: TrapKind.BREAKPOINT,
}


def _execute(state: GuestState, mem: MemoryImage, max_steps: int):
    regs = state.regs.view(np.int64)
    pc = state.pc & MASK64
    if pc >= 1 << 63:
        pc -= 1 << 64
    execute = load_kernel()[0]
    with np.errstate(over="ignore"):
        reason, pc, steps, detail = execute(
            regs, pc, mem.data, mem.base, bool(mem.checked), max_steps
        )
    state.pc = int(pc) & MASK64
    return int(reason), int(steps), int(detail)


def _ecall(state: GuestState, mem: MemoryImage, handler) -> StepOutcome:
    try:
        outcome = handler.dispatch(state, mem)
    except MemoryFault as exc:
        return Trap(TrapKind.MEMORY_FAULT, state.pc, exc.addr & MASK64)
    if isinstance(outcome, Exit):
        return Exited(outcome.code)
    state[10] = outcome.value
    state.pc = (state.pc + 4) & MASK64
    return Continue()


def step(state: GuestState, mem: MemoryImage, handler: Optional[SyscallHandler] = None) -> StepOutcome:
    """Apply exactly one instruction."""
    reason, steps, detail = _execute(state, mem, 1)
    if reason == _stops.STOP_LIMIT:
        return Continue()
    if reason == _stops.STOP_ECALL:
        return _ecall(state, mem, handler or SyscallHandler())
    return Trap(_TRAP_OF_STOP[reason], state.pc, detail & MASK64)


def describe_trap(trap: Trap, state: GuestState, mem: MemoryImage) -> str:
    """Human-readable trap report: kind, pc, faulting word and register dump."""
    lines = [f"guest trap: {trap.kind.value} at pc=0x{trap.pc:x}"]
    if trap.kind is TrapKind.MEMORY_FAULT:
        lines.append(f"  fault address: 0x{trap.detail:x}")
    try:
        word = mem.read_u32(trap.pc)
    except MemoryFault:
        lines.append("  instruction: <unmapped>")
    else:
        try:
            text = disassemble(decode(word))
        except IllegalInstruction:
            text = "<illegal>"
        lines.append(f"  instruction: 0x{word:08x}  {text}")
    lines.append(state.dump().rstrip("\n"))
    return "\n".join(lines)


class Machine:
    """A guest process: register file, memory and syscall bridge."""

    def __init__(self, state: GuestState, mem: MemoryImage, handler=None, trace: Optional[TextIO] = None):
        self.state = state
        self.mem = mem
        self.handler = handler if handler is not None else SyscallHandler()
        self.trace = trace
        self.steps = 0

    @classmethod
    def from_image(cls, image: LoadedImage, handler=None, trace=None) -> Machine:
        state = GuestState()
        state.pc = image.entry
        state[2] = image.initial_sp
        return cls(state, image.mem, handler=handler, trace=trace)

    def step(self) -> StepOutcome:
        before = self.state.regs.copy() if self.trace else None
        pc = self.state.pc
        outcome = step(self.state, self.mem, self.handler)
        if not isinstance(outcome, Trap):
            self.steps += 1
        if self.trace is not None:
            self._trace_line(pc, before)
        return outcome

    def run(self, max_steps: Optional[int] = None) -> int:
        """Execute until the guest exits; returns its exit code.

        Raises :class:`StepLimitExceeded` or :class:`GuestTrap`.
        """
        limit = UNLIMITED if max_steps is None else max_steps
        if limit < 1:
            raise ValueError("max_steps must be at least 1")
        if self.trace is not None:
            return self._run_traced(limit)
        while True:
            budget = limit - self.steps
            if budget <= 0:
                raise StepLimitExceeded(self.steps, self.state.pc)
            reason, n, detail = _execute(self.state, self.mem, budget)
            self.steps += n
            if reason == _stops.STOP_LIMIT:
                continue
            if reason == _stops.STOP_ECALL:
                outcome = _ecall(self.state, self.mem, self.handler)
                if isinstance(outcome, Trap):
                    self._raise(outcome)
                self.steps += 1
                if isinstance(outcome, Exited):
                    return outcome.code
                continue
            self._raise(Trap(_TRAP_OF_STOP[reason], self.state.pc, detail & MASK64))

    def _run_traced(self, limit: int) -> int:
        while True:
            if self.steps >= limit:
                raise StepLimitExceeded(self.steps, self.state.pc)
            outcome = self.step()
            if isinstance(outcome, Exited):
                return outcome.code
            if isinstance(outcome, Trap):
                self._raise(outcome)

    def _raise(self, trap: Trap):
        raise GuestTrap(trap, describe_trap(trap, self.state, self.mem))

    def _trace_line(self, pc: int, before: np.ndarray) -> None:
        try:
            text = disassemble(decode(self.mem.read_u32(pc)))
        except (IllegalInstruction, MemoryFault):
            text = "<?>"
        changed = np.nonzero(before != self.state.regs)[0]
        deltas = " ".join(f"{ABI_NAMES[i]}={int(self.state.regs[i]):016x}" for i in changed)
        self.trace.write(f"{pc:016x}: {text:<28} {deltas}".rstrip() + "\n")


def run(image: LoadedImage, max_steps: Optional[int] = None, handler=None, trace: Optional[TextIO] = None) -> int:
    """Run a loaded image to completion and return the guest exit code."""
    return Machine.from_image(image, handler=handler, trace=trace).run(max_steps)
