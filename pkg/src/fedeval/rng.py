"""Deterministic randomness shared by all protocol participants.

Every random choice that must agree across parties (round permutations,
leader picks, key generation) flows through a splitmix64 stream seeded
from SHA-256, so two independent processes given the same inputs derive
bit-identical values.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, TypeVar

MASK64 = 0xFFFFFFFFFFFFFFFF

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

T = TypeVar("T")


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state once; returns (new_state, output word)."""
    state = (state + _GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return state, z ^ (z >> 31)


class SplitMix64:
    """splitmix64 output stream with unbiased range reduction."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state, out = splitmix64(self.state)
        return out

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via top-bit rejection.

        Works for arbitrarily large n by concatenating 64-bit words.
        """
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        if n == 1:
            return 0
        nbits = n.bit_length()
        nwords = (nbits + 63) // 64
        shift = nwords * 64 - nbits
        while True:
            value = 0
            for _ in range(nwords):
                value = (value << 64) | self.next_u64()
            value >>= shift
            if value < n:
                return value


def hash_seed(*parts: int) -> int:
    """Low 64 bits of SHA-256 over the parts, each an 8-byte big-endian word."""
    h = hashlib.sha256()
    for part in parts:
        h.update(int(part).to_bytes(8, "big"))
    return int.from_bytes(h.digest()[24:], "big")


def derive_u64(label: bytes, *parts: int) -> int:
    """Namespaced 64-bit seed for randomness the artifact is free to choose."""
    h = hashlib.sha256()
    h.update(label)
    for part in parts:
        h.update(int(part).to_bytes(8, "big"))
    return int.from_bytes(h.digest()[24:], "big")


def fisher_yates(items: Iterable[T], rng: SplitMix64) -> list[T]:
    """Classic descending Fisher-Yates shuffle driven by the given stream."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.randbelow(i + 1)
        out[i], out[j] = out[j], out[i]
    return out
