"""SplitMix64 generator usable inside numba kernels.

State is a length-1 uint64 array so kernels can advance it in place.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def new_state(seed) -> np.ndarray:
    return np.array([np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)


@njit(cache=True)
def next_u64(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def randbelow(state, n):
    # modulo bias is below 2**-50 for the tiny n used here
    return np.int64(next_u64(state) % np.uint64(n))
