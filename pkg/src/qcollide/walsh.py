"""In-place fast Walsh-Hadamard transform along the leading axis.

The kernel is the +/-1 Hadamard matrix in natural binary ordering:
``out[k] = sum_m (-1)^popcount(k & m) x[m]`` (unnormalized). It is its own
inverse up to a factor 2^L, which the channel module uses to go back and
forth between Kraus operators K_k and collision blocks E_m.
"""

import numpy as np


def fwht(x: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform over axis 0; returns a new array.

    Axis 0 length must be a power of two. Remaining axes are carried along,
    so a (2^L, d, d) stack of matrices is transformed entrywise.
    """
    n = x.shape[0]
    if n & (n - 1):
        raise ValueError(f"leading axis must have power-of-two length, got {n}")
    out = np.array(x, copy=True)
    h = 1
    while h < n:
        for start in range(0, n, 2 * h):
            a = out[start : start + h]
            b = out[start + h : start + 2 * h]
            a_new = a + b
            b_new = a - b
            out[start : start + h] = a_new
            out[start + h : start + 2 * h] = b_new
        h *= 2
    return out
