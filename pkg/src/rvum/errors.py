"""Exception hierarchy shared across the package."""


class EmulatorError(Exception):
    """Base class for every error raised by rvum."""


class IllegalInstruction(EmulatorError, ValueError):
    def __init__(self, word: int, reason: str = ""):
        self.word = word
        msg = f"illegal instruction 0x{word & 0xFFFFFFFF:08x}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class ImmediateOutOfRange(EmulatorError, ValueError):
    pass


class MemoryFault(EmulatorError):
    def __init__(self, addr: int, length: int = 1):
        self.addr = addr
        self.length = length
        super().__init__(f"memory fault at 0x{addr & 0xFFFFFFFFFFFFFFFF:x} (+{length})")


class StepLimitExceeded(EmulatorError):
    def __init__(self, steps: int, pc: int):
        self.steps = steps
        self.pc = pc
        super().__init__(f"step limit of {steps} reached at pc=0x{pc:x}")


class GuestTrap(EmulatorError):
    """A fatal trap raised by the guest; carries a printable diagnostic."""

    def __init__(self, trap, diagnostic: str):
        self.trap = trap
        self.diagnostic = diagnostic
        super().__init__(diagnostic)


class LoadError(EmulatorError):
    pass


class BadMagic(LoadError):
    pass


class UnsupportedClass(LoadError):
    pass


class UnsupportedArchitecture(LoadError):
    pass


class UnsupportedType(LoadError):
    pass


class SegmentOutOfRange(LoadError):
    pass


class MalformedElf(LoadError):
    pass


class StackOverflow(LoadError):
    pass


class SpawnError(EmulatorError):
    pass


class OutputMismatch(EmulatorError):
    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class ReportError(EmulatorError, ValueError):
    pass
