"""Deterministic, per-sample-splittable pseudo-random number generation.

Every stochastic backend draws from a 64-bit Mersenne Twister (MT19937-64).
Independent Monte Carlo samples get independent streams derived from a
single experiment seed:

    derived_seed = splitmix64(root_seed XOR splitmix64(stream_id))

The derivation is fixed so that reports are reproducible across machines
and across any assignment of samples to workers: sample ``k`` always sees
the stream ``(root_seed, k)`` no matter which process runs it.

The unit draw used by the arithmetic backends is

    xi = ((raw >> 11) * 2**-53) - 0.5

a 53-bit-granular uniform value in [-0.5, 0.5).  The closed upper endpoint
has probability zero under any real-number reading, so the half-open
interval is an observationally equivalent implementation choice.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_MASK64 = 0xFFFFFFFFFFFFFFFF

MT_N = 312
_MT_M = 156
_MT_MATRIX_A = np.uint64(0xB5026F5AA96619E9)
_MT_UPPER = np.uint64(0xFFFFFFFF80000000)
_MT_LOWER = np.uint64(0x7FFFFFFF)
_MT_F = np.uint64(6364136223846793005)

TWO_POW_MINUS_53 = 2.0 ** -53


def splitmix64(x: int) -> int:
    """One splitmix64 output for integer input ``x`` (mod 2**64)."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(root_seed: int, stream_id: int) -> int:
    """Per-stream MT seed: splitmix64(root_seed XOR splitmix64(stream_id))."""
    return splitmix64((root_seed & _MASK64) ^ splitmix64(stream_id & _MASK64))


@njit(cache=True)
def _splitmix64(x):
    z = x + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _derive_seed(root_seed, stream_id):
    return _splitmix64(root_seed ^ _splitmix64(stream_id))


@njit(cache=True)
def _mt_seed(state, seed):
    """Initialize MT19937-64 state (uint64[312]) from a 64-bit seed."""
    state[0] = seed
    for i in range(1, MT_N):
        prev = state[i - 1]
        state[i] = _MT_F * (prev ^ (prev >> np.uint64(62))) + np.uint64(i)


@njit(cache=True)
def _mt_twist(state):
    for i in range(MT_N):
        x = (state[i] & _MT_UPPER) | (state[(i + 1) % MT_N] & _MT_LOWER)
        xa = x >> np.uint64(1)
        if x & np.uint64(1):
            xa ^= _MT_MATRIX_A
        state[i] = state[(i + _MT_M) % MT_N] ^ xa


@njit(cache=True)
def _mt_next(state, pos):
    """Next raw 64-bit output; ``pos`` is an int64[1] cursor into the block."""
    i = pos[0]
    if i >= MT_N:
        _mt_twist(state)
        i = 0
    y = state[i]
    pos[0] = i + 1
    y ^= (y >> np.uint64(29)) & np.uint64(0x5555555555555555)
    y ^= (y << np.uint64(17)) & np.uint64(0x71D67FFFEDA60000)
    y ^= (y << np.uint64(37)) & np.uint64(0xFFF7EEE000000000)
    y ^= y >> np.uint64(43)
    return y


@njit(cache=True)
def _next_unit_centered(state, pos):
    raw = _mt_next(state, pos)
    return float(raw >> np.uint64(11)) * TWO_POW_MINUS_53 - 0.5


@njit(cache=True)
def _stream_init(state, pos, root_seed, stream_id):
    _mt_seed(state, _derive_seed(root_seed, stream_id))
    pos[0] = MT_N


@njit(cache=True)
def _fill_unit_centered(state, pos, out):
    for i in range(out.shape[0]):
        out[i] = _next_unit_centered(state, pos)


@njit(cache=True)
def _fill_raw(state, pos, out):
    for i in range(out.shape[0]):
        out[i] = _mt_next(state, pos)


class RngStream:
    """One per-sample random stream, owned by exactly one consumer at a time."""

    __slots__ = ("root_seed", "stream_id", "state", "pos")

    def __init__(self, root_seed: int, stream_id: int = 0):
        self.root_seed = root_seed & _MASK64
        self.stream_id = stream_id & _MASK64
        self.state = np.empty(MT_N, dtype=np.uint64)
        self.pos = np.empty(1, dtype=np.int64)
        _stream_init(self.state, self.pos, np.uint64(self.root_seed),
                     np.uint64(self.stream_id))

    @property
    def derived_seed(self) -> int:
        return derive_seed(self.root_seed, self.stream_id)

    def next_raw(self) -> int:
        return int(_mt_next(self.state, self.pos))

    def next_unit_centered(self) -> float:
        """Uniform xi in [-0.5, 0.5) with 2**-53 granularity; advances one draw."""
        return float(_next_unit_centered(self.state, self.pos))

    def raw_array(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        _fill_raw(self.state, self.pos, out)
        return out

    def unit_centered_array(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        _fill_unit_centered(self.state, self.pos, out)
        return out

    def __repr__(self):
        return f"RngStream(root_seed={self.root_seed}, stream_id={self.stream_id})"


def new_stream(root_seed: int, stream_id: int) -> RngStream:
    """Create the stream for Monte Carlo sample ``stream_id`` of an experiment."""
    return RngStream(root_seed, stream_id)
