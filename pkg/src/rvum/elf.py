"""ELF64 little-endian header layouts, plus a writer for single-segment executables."""

from __future__ import annotations

import struct
from dataclasses import dataclass

ELF_MAGIC = b"\x7fELF"
ELFCLASS32 = 1
ELFCLASS64 = 2
ELFDATA2LSB = 1
ELFDATA2MSB = 2
EV_CURRENT = 1

ET_EXEC = 2
ET_DYN = 3
EM_RISCV = 243

PT_LOAD = 1
PT_DYNAMIC = 2
PT_INTERP = 3

PF_X = 1
PF_W = 2
PF_R = 4

# e_ident(16) type machine version entry phoff shoff flags ehsize phentsize phnum shentsize shnum shstrndx
EHDR = struct.Struct("<16sHHIQQQIHHHHHH")
# type flags offset vaddr paddr filesz memsz align
PHDR = struct.Struct("<IIQQQQQQ")

PAGE = 0x1000


@dataclass(frozen=True)
class ElfHeader:
    ident: bytes
    type: int
    machine: int
    version: int
    entry: int
    phoff: int
    shoff: int
    flags: int
    ehsize: int
    phentsize: int
    phnum: int
    shentsize: int
    shnum: int
    shstrndx: int

    @classmethod
    def unpack(cls, data: bytes) -> ElfHeader:
        return cls(*EHDR.unpack_from(data, 0))

    def pack(self) -> bytes:
        return EHDR.pack(
            self.ident, self.type, self.machine, self.version, self.entry,
            self.phoff, self.shoff, self.flags, self.ehsize, self.phentsize,
            self.phnum, self.shentsize, self.shnum, self.shstrndx,
        )


@dataclass(frozen=True)
class ProgramHeader:
    type: int
    flags: int
    offset: int
    vaddr: int
    paddr: int
    filesz: int
    memsz: int
    align: int

    @classmethod
    def unpack(cls, data: bytes, offset: int) -> ProgramHeader:
        return cls(*PHDR.unpack_from(data, offset))

    def pack(self) -> bytes:
        return PHDR.pack(
            self.type, self.flags, self.offset, self.vaddr, self.paddr,
            self.filesz, self.memsz, self.align,
        )


def ident(cls: int = ELFCLASS64, data: int = ELFDATA2LSB) -> bytes:
    return ELF_MAGIC + bytes([cls, data, EV_CURRENT]) + bytes(9)


def build_executable(segments: list[tuple[int, bytes, int, int]], entry: int,
                     *, etype: int = ET_EXEC, machine: int = EM_RISCV,
                     ident_bytes: bytes | None = None,
                     extra_phdrs: list[ProgramHeader] = ()) -> bytes:
    """Lay out an ELF image with the given loadable segments.

    Each segment is ``(vaddr, payload, memsz, flags)``. Payloads are placed
    back to back after the headers at file offsets congruent to their vaddr
    modulo the page size, as loaders expect.
    """
    nph = len(segments) + len(extra_phdrs)
    header_size = EHDR.size + nph * PHDR.size
    offset = header_size
    placed = []
    for vaddr, payload, memsz, flags in segments:
        pad = (vaddr - offset) % PAGE
        offset += pad
        placed.append((offset, vaddr, payload, memsz, flags))
        offset += len(payload)

    out = bytearray(offset)
    hdr = ElfHeader(
        ident_bytes if ident_bytes is not None else ident(),
        etype, machine, EV_CURRENT, entry,
        EHDR.size if nph else 0, 0, 0, EHDR.size, PHDR.size, nph, 0, 0, 0,
    )
    out[: EHDR.size] = hdr.pack()
    pos = EHDR.size
    for off, vaddr, payload, memsz, flags in placed:
        ph = ProgramHeader(PT_LOAD, flags, off, vaddr, vaddr, len(payload), max(memsz, len(payload)), PAGE)
        out[pos : pos + PHDR.size] = ph.pack()
        out[off : off + len(payload)] = payload
        pos += PHDR.size
    for ph in extra_phdrs:
        out[pos : pos + PHDR.size] = ph.pack()
        pos += PHDR.size
    return bytes(out)


def single_segment_executable(code: bytes, base: int = 0x10000) -> bytes:
    """A text-only executable whose one R+X segment covers headers and code.

    The entry point is the first code byte, right after the ELF and program
    headers.
    """
    header_size = EHDR.size + PHDR.size
    entry = base + header_size
    hdr = ElfHeader(ident(), ET_EXEC, EM_RISCV, EV_CURRENT, entry, EHDR.size, 0, 0,
                    EHDR.size, PHDR.size, 1, 0, 0, 0)
    total = header_size + len(code)
    ph = ProgramHeader(PT_LOAD, PF_R | PF_X, 0, base, base, total, total, PAGE)
    return hdr.pack() + ph.pack() + code
