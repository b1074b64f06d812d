"""rvum: an RV64I user-mode emulator with a straight-line benchmark generator."""

__version__ = "0.1.0"

from ._accel import backend
from .benchgen import BenchSpec, SchemeParams, generate, oracle_simulate
from .isa import Instr, Op, decode, disassemble, encode
from .loader import LoadConfig, LoadedImage, load_elf
from .machine import GuestState, Machine, MemoryImage, run, step

__all__ = [
    "BenchSpec",
    "GuestState",
    "Instr",
    "LoadConfig",
    "LoadedImage",
    "Machine",
    "MemoryImage",
    "Op",
    "SchemeParams",
    "backend",
    "decode",
    "disassemble",
    "encode",
    "generate",
    "load_elf",
    "oracle_simulate",
    "run",
    "step",
]
