"""Stop reasons reported by the execution kernel."""

STOP_LIMIT = 0
STOP_ECALL = 1
STOP_ILLEGAL = 2
STOP_MEM_FAULT = 3
STOP_MISALIGNED = 4
STOP_BREAK = 5
