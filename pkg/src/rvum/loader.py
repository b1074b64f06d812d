"""Static RV64 ELF loading and Linux-style initial stack construction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .elf import (
    EHDR, ELF_MAGIC, ELFCLASS64, ELFDATA2LSB, EM_RISCV, ET_DYN, ET_EXEC, PAGE,
    PF_X, PHDR, PT_DYNAMIC, PT_INTERP, PT_LOAD, ElfHeader, ProgramHeader,
)
from .errors import (
    BadMagic, MalformedElf, SegmentOutOfRange, StackOverflow, UnsupportedArchitecture,
    UnsupportedClass, UnsupportedType,
)
from .machine import DEFAULT_MEM_SIZE, DEFAULT_STACK_SIZE, MemoryImage

AT_NULL = 0
AT_PAGESZ = 6


@dataclass(frozen=True)
class LoadConfig:
    mem_size: int = DEFAULT_MEM_SIZE
    stack_size: int = DEFAULT_STACK_SIZE
    checked: bool = True
    # emit AT_PAGESZ in the auxiliary vector
    aux_pagesz: bool = False


@dataclass
class LoadedImage:
    mem: MemoryImage
    entry: int
    initial_sp: int
    argv: list[bytes] = field(default_factory=list)
    envp: list[bytes] = field(default_factory=list)


def _page_down(x: int) -> int:
    return x & ~(PAGE - 1)


def _page_up(x: int) -> int:
    return (x + PAGE - 1) & ~(PAGE - 1)


def parse_header(data: bytes) -> tuple[ElfHeader, list[ProgramHeader]]:
    """Validate the ELF identification and return header plus program headers."""
    if len(data) < 4 or data[:4] != ELF_MAGIC:
        raise BadMagic("not an ELF file")
    if len(data) < 6 or data[4] != ELFCLASS64 or data[5] != ELFDATA2LSB:
        raise UnsupportedClass("only ELF64 little-endian images are supported")
    if len(data) < EHDR.size:
        raise MalformedElf("truncated ELF header")
    hdr = ElfHeader.unpack(data)
    if hdr.machine != EM_RISCV:
        raise UnsupportedArchitecture(f"e_machine={hdr.machine}, expected RISC-V ({EM_RISCV})")
    if hdr.type == ET_DYN:
        raise UnsupportedType("position-independent or shared objects are not supported")
    if hdr.type != ET_EXEC:
        raise UnsupportedType(f"e_type={hdr.type} is not an executable")
    if hdr.phnum == 0:
        raise MalformedElf("no program headers")
    if hdr.phentsize != PHDR.size or hdr.phoff + hdr.phnum * PHDR.size > len(data):
        raise MalformedElf("program header table out of file bounds")
    phdrs = [ProgramHeader.unpack(data, hdr.phoff + i * PHDR.size) for i in range(hdr.phnum)]
    for ph in phdrs:
        if ph.type in (PT_INTERP, PT_DYNAMIC):
            raise UnsupportedType("dynamically linked executables are not supported")
    return hdr, phdrs


def load_elf(data: bytes, config: LoadConfig = LoadConfig(),
             argv: Sequence[bytes | str] = (), envp: Sequence[bytes | str] = ()) -> LoadedImage:
    """Map every PT_LOAD segment into a fresh memory image and build the stack."""
    hdr, phdrs = parse_header(data)
    loads = [ph for ph in phdrs if ph.type == PT_LOAD and ph.memsz > 0]
    if not loads:
        raise MalformedElf("no loadable segments")
    if config.stack_size >= config.mem_size:
        raise ValueError("stack does not fit in guest memory")
    base = _page_down(min(ph.vaddr for ph in loads))
    limit = base + config.mem_size - config.stack_size
    for ph in loads:
        if ph.filesz > ph.memsz or ph.offset + ph.filesz > len(data):
            raise MalformedElf(f"segment at 0x{ph.vaddr:x} exceeds the file")
        if ph.vaddr + ph.memsz > limit:
            raise SegmentOutOfRange(
                f"segment 0x{ph.vaddr:x}+0x{ph.memsz:x} exceeds guest memory ending 0x{limit:x}"
            )
    if not any(ph.flags & PF_X and ph.vaddr <= hdr.entry < ph.vaddr + ph.memsz for ph in loads):
        raise MalformedElf(f"entry 0x{hdr.entry:x} is outside every executable segment")

    mem = MemoryImage.allocate(base, config.mem_size, checked=config.checked,
                               stack_size=config.stack_size)
    for ph in loads:
        # BSS tail is already zero in a fresh image
        mem.write(ph.vaddr, data[ph.offset : ph.offset + ph.filesz])
    mem.brk = mem.brk_start = _page_up(max(ph.vaddr + ph.memsz for ph in loads))

    argv_b = [_as_bytes(a) for a in argv]
    envp_b = [_as_bytes(e) for e in envp]
    auxv = [(AT_PAGESZ, PAGE)] if config.aux_pagesz else []
    sp = build_stack(mem, argv_b, envp_b, auxv)
    return LoadedImage(mem, hdr.entry, sp, argv_b, envp_b)


def _as_bytes(s: bytes | str) -> bytes:
    return s.encode() if isinstance(s, str) else bytes(s)


def build_stack(mem: MemoryImage, argv: Sequence[bytes], envp: Sequence[bytes],
                auxv: Sequence[tuple[int, int]] = ()) -> int:
    """Write argc/argv/envp/auxv at the top of the stack region; returns sp.

    Layout from high to low addresses: the NUL-terminated strings, padding,
    the auxiliary vector ending in AT_NULL, envp pointers + NULL, argv
    pointers + NULL, then argc at the returned 16-byte aligned sp.
    """
    top = mem.end
    bottom = mem.stack_bottom
    strings = [bytes(s) + b"\0" for s in list(argv) + list(envp)]
    if sum(map(len, strings)) > top - bottom:
        raise StackOverflow("argument and environment strings exceed the stack")

    cursor = top
    pointers = []
    for s in strings:
        cursor -= len(s)
        pointers.append(cursor)
    argv_ptrs = pointers[: len(argv)]
    envp_ptrs = pointers[len(argv):]

    words = [len(argv), *argv_ptrs, 0, *envp_ptrs, 0]
    for key, value in auxv:
        words += [key, value]
    words += [AT_NULL, 0]
    sp = (cursor - 8 * len(words)) & ~15
    if sp < bottom:
        raise StackOverflow("initial stack does not fit in the stack region")

    for s, addr in zip(strings, pointers):
        mem.write(addr, s)
    mem.write(sp, b"".join(w.to_bytes(8, "little") for w in words))
    return sp
