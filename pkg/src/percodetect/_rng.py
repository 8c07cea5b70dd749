"""Numba-compatible RNG primitives for the simulation kernels.

splitmix64 derives per-trial seeds from (master_seed, trial_index), so a batch
of trials can be partitioned across workers in any way without changing the
output stream of any single trial.  xoshiro256++ is the in-kernel generator
(numpy's Generator API is not available inside nopython code).

Reference constants follow the published splitmix64 / xoshiro256++ algorithms.
"""

import numpy as np
from numba import njit

U64_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True, inline="always")
def splitmix64(x):
    x = (x + _GOLDEN) & U64_MASK
    z = x
    z = ((z ^ (z >> np.uint64(30))) * _MIX1) & U64_MASK
    z = ((z ^ (z >> np.uint64(27))) * _MIX2) & U64_MASK
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True, inline="always")
def trial_seed(master_seed, trial_index):
    # Distinct trials get decorrelated streams for any master seed.
    return splitmix64(np.uint64(master_seed) ^ splitmix64(np.uint64(trial_index)))


@njit(cache=True, nogil=True)
def xoshiro_init(seed, state):
    # Fill the 4-word state from a splitmix64 chain, as recommended upstream.
    s = np.uint64(seed)
    for i in range(4):
        s = (s + _GOLDEN) & U64_MASK
        z = s
        z = ((z ^ (z >> np.uint64(30))) * _MIX1) & U64_MASK
        z = ((z ^ (z >> np.uint64(27))) * _MIX2) & U64_MASK
        state[i] = z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _rotl(x, k):
    return ((x << k) | (x >> (np.uint64(64) - k))) & U64_MASK


@njit(cache=True, nogil=True, inline="always")
def xoshiro_next(state):
    result = (_rotl((state[0] + state[3]) & U64_MASK, np.uint64(23)) + state[0]) & U64_MASK
    t = (state[1] << np.uint64(17)) & U64_MASK
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], np.uint64(45))
    return result


@njit(cache=True, nogil=True, inline="always")
def next_double(state):
    # 53-bit uniform in [0, 1).
    return (xoshiro_next(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, nogil=True, inline="always")
def next_below(state, bound):
    # Uniform integer in [0, bound); modulo bias is < 2**-40 for bound < 2**24.
    return int(xoshiro_next(state) % np.uint64(bound))


@njit(cache=True, nogil=True)
def shuffle(order, state):
    # Fisher-Yates, in place.
    for i in range(order.shape[0] - 1, 0, -1):
        j = next_below(state, i + 1)
        tmp = order[i]
        order[i] = order[j]
        order[j] = tmp
