"""Benchmark arithmetic oracle loop (uint64, no instruction encoding)."""

import numpy as np

from ._accel import njit


@njit
def oracle_loop(vals, count, a, b, c, ops):
    n = vals.shape[0]
    p = ops.shape[0]
    mask = np.uint64(63)
    for i in range(count):
        x = vals[(i + b) % n]
        y = vals[(i + c) % n]
        op = ops[i % p]
        if op == 0:
            r = x + y
        elif op == 1:
            r = x - y
        else:
            r = x << (y & mask)
        vals[(i + a) % n] = r
    return vals
