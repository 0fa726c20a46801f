"""Pairwise-masked update exchange with exact cancellation.

Every pair of group members shares a Diffie-Hellman secret. Per round,
each member derives a mask stream from that secret, adds the mask for
peers with a higher id and subtracts it for peers with a lower id, so the
masks cancel exactly (mod 2^64) when the whole group's submissions are
summed. Weight vectors ride inside the masked payload as fixed-point
residues, which keeps the cancellation an integer identity instead of a
floating-point approximation.

The mask stream is pinned bit-exactly: ChaCha20 keyed by
SHA-256(shared_key_bytes || round as 8-byte big-endian), zero nonce,
counter starting at 0, read as little-endian 64-bit words. Verifying
miners rely on that to re-derive identical masks during re-execution.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from .rng import SplitMix64

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_probable_prime(n: int) -> bool:
    """Miller-Rabin with fixed bases (deterministic below 3.3e24)."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class DHParams:
    """Discrete-log group for key agreement.

    The default is a simulation-grade toy group; swap in a standards-based
    group via configuration when cryptographic strength matters.
    """

    p: int = 2**61 - 1
    g: int = 3

    def __post_init__(self):
        if self.p < 5:
            raise ValueError("modulus too small: need p >= 5")
        if not is_probable_prime(self.p):
            raise ValueError("modulus must be prime")
        if not 1 < self.g < self.p:
            raise ValueError("generator must lie in (1, p)")


@dataclass(frozen=True)
class KeyPair:
    private: int
    public: int

    @classmethod
    def from_private(cls, private: int, params: DHParams) -> "KeyPair":
        if not 2 <= private <= params.p - 2:
            raise ValueError("private key must lie in [2, p-2]")
        return cls(private=private, public=pow(params.g, private, params.p))


def keygen(params: DHParams, rng_seed: int) -> KeyPair:
    """Seeded keypair: private uniform in [2, p-2], public = g^private mod p."""
    rng = SplitMix64(rng_seed)
    private = 2 + rng.randbelow(params.p - 3)
    return KeyPair.from_private(private, params)


@dataclass(frozen=True)
class SharedKey:
    """Symmetric pairwise key: SHA-256 of the DH secret's minimal big-endian bytes."""

    pair: tuple[int, int]
    key_bytes: bytes


def _minimal_be(n: int) -> bytes:
    return n.to_bytes(max(1, (n.bit_length() + 7) // 8), "big")


def derive_shared(
    own: KeyPair, other_public: int, params: DHParams, own_id: int, other_id: int
) -> SharedKey:
    """Derive the pair's shared key from our private and their public key.

    Both directions produce identical key_bytes, so either party can act
    as the mask adder or subtractor.
    """
    if not 1 < other_public < params.p:
        raise ValueError("peer public key out of range")
    if own_id == other_id:
        raise ValueError("cannot derive a shared key with oneself")
    secret = pow(other_public, own.private, params.p)
    pair = (min(own_id, other_id), max(own_id, other_id))
    return SharedKey(pair=pair, key_bytes=hashlib.sha256(_minimal_be(secret)).digest())


def derive_mask(key: SharedKey, round_index: int, length: int) -> np.ndarray:
    """First `length` 64-bit words of the pair's round-specific mask stream."""
    if length <= 0:
        raise ValueError("mask length must be positive")
    if round_index < 0:
        raise ValueError("round index must be non-negative")
    stream_key = hashlib.sha256(
        key.key_bytes + int(round_index).to_bytes(8, "big")
    ).digest()
    cipher = Cipher(algorithms.ChaCha20(stream_key, b"\x00" * 16), mode=None)
    keystream = cipher.encryptor().update(b"\x00" * (8 * length))
    return np.frombuffer(keystream, dtype="<u8").copy()


@dataclass(frozen=True)
class FixedPointCodec:
    """Signed fixed-point encoding into 64-bit residues.

    frac_bits fractional bits, values clipped-checked against `bound`.
    With the defaults (f=24, B=2^20) a sum of nine encoded vectors stays
    far below 2^63, so the centered lift in decode is exact.
    """

    frac_bits: int = 24
    bound: float = float(2**20)

    def __post_init__(self):
        if not 1 <= self.frac_bits <= 52:
            raise ValueError("frac_bits must lie in [1, 52]")
        if self.bound <= 0:
            raise ValueError("bound must be positive")

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    def encode(self, values: np.ndarray) -> np.ndarray:
        x = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.isfinite(x))[0])
            raise ValueError(f"non-finite value at coordinate {bad}")
        over = np.abs(x) > self.bound
        if over.any():
            bad = int(np.flatnonzero(over)[0])
            raise ValueError(
                f"coordinate {bad} has magnitude {abs(x[bad])}, exceeds bound {self.bound}"
            )
        return np.rint(x * self.scale).astype(np.int64).view(np.uint64)

    def decode(self, residues: np.ndarray) -> np.ndarray:
        r = np.ascontiguousarray(residues, dtype=np.uint64)
        return r.view(np.int64).astype(np.float64) / self.scale


@dataclass(frozen=True)
class MaskedUpdate:
    """One owner's fixed-point payload with pairwise masks applied."""

    owner: int
    round: int
    group: int
    payload: np.ndarray = field(repr=False)


def mask_update(
    weights: np.ndarray,
    owner: int,
    group_members: list[int],
    shared: dict[tuple[int, int], SharedKey],
    round_index: int,
    codec: FixedPointCodec,
    group_index: int = 0,
) -> MaskedUpdate:
    """Encode weights and apply the owner's pairwise masks for this round.

    Sign convention: add the pair mask when the peer id is higher, subtract
    when lower. Either orientation cancels; index order generalizes to any
    group size.
    """
    if owner not in group_members:
        raise ValueError(f"owner {owner} is not a member of the group")
    payload = codec.encode(weights)
    for peer in group_members:
        if peer == owner:
            continue
        pair = (min(owner, peer), max(owner, peer))
        key = shared.get(pair)
        if key is None:
            raise ValueError(f"missing shared key for pair {pair}")
        mask = derive_mask(key, round_index, len(payload))
        if owner < peer:
            payload = payload + mask
        else:
            payload = payload - mask
    return MaskedUpdate(owner=owner, round=round_index, group=group_index, payload=payload)


def secure_aggregate(
    updates: list[MaskedUpdate], members: list[int], codec: FixedPointCodec
) -> np.ndarray:
    """Sum a full group's payloads (masks cancel exactly) and decode the mean.

    The group's entire membership must be present; there is no dropout
    recovery, so a missing or duplicated member is an error rather than a
    silently wrong aggregate.
    """
    if not updates:
        raise ValueError("no updates to aggregate")
    rounds = {u.round for u in updates}
    groups = {u.group for u in updates}
    if len(rounds) != 1 or len(groups) != 1:
        raise ValueError("updates span more than one round or group")
    seen = [u.owner for u in updates]
    if len(set(seen)) != len(seen):
        raise ValueError("duplicate member update")
    missing = set(members) - set(seen)
    extra = set(seen) - set(members)
    if missing:
        raise ValueError(f"missing updates from members {sorted(missing)}")
    if extra:
        raise ValueError(f"updates from non-members {sorted(extra)}")
    lengths = {len(u.payload) for u in updates}
    if len(lengths) != 1:
        raise ValueError("payload lengths differ")
    total = np.zeros(lengths.pop(), dtype=np.uint64)
    for update in sorted(updates, key=lambda u: u.owner):
        total = total + np.ascontiguousarray(update.payload, dtype=np.uint64)
    return codec.decode(total) / len(members)
