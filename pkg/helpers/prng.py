"""
Deterministic random streams: splitmix64 seeding a xoshiro256++ generator.

Every stochastic step in the library (dropout masks, frame shuffles, weight
init, synthetic data, epoch order) takes an explicit `Xoshiro256pp` handle,
so results depend only on seeds, never on thread identity or call timing.

Scalar draws (`next_u64`, `below`, `random`) follow the reference C
algorithms bit for bit. Bulk draws (`random_array`) run a fixed bank of
independent xoshiro256++ lanes in numpy, each lane seeded through
splitmix64 from one scalar draw of the parent stream.
"""

import hashlib
from collections.abc import Sequence
from typing import TypeVar

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# Lanes used by random_array; part of the stream definition, do not change.
ARRAY_LANES = 256

_T = TypeVar("_T")

_U64 = np.uint64


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class SplitMix64:
    """splitmix64, used to expand a 64-bit seed into generator state."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


def _key_to_u64(part: int | str) -> int:
    if isinstance(part, int):
        return part & MASK64
    digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class Xoshiro256pp:
    """xoshiro256++ 1.0 with splitmix64 seeding."""

    def __init__(self, state: Sequence[int]):
        if len(state) != 4:
            raise ValueError("xoshiro256++ state needs exactly four 64-bit words")
        if not any(state):
            raise ValueError("xoshiro256++ state must not be all zero")
        self.s = [word & MASK64 for word in state]

    @classmethod
    def from_seed(cls, seed: int) -> "Xoshiro256pp":
        sm = SplitMix64(seed)
        return cls([sm.next() for _ in range(4)])

    @classmethod
    def from_key(cls, *parts: int | str) -> "Xoshiro256pp":
        """Stream keyed by a tuple such as (master_seed, "patient", index)."""
        acc = 0
        for part in parts:
            acc = SplitMix64(acc ^ _key_to_u64(part)).next()
        return cls.from_seed(acc)

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[0] + s[3]) & MASK64, 23) + s[0]) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection of the short tail."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        threshold = ((1 << 64) - bound) % bound
        while True:
            x = self.next_u64()
            if x >= threshold:
                return x % bound

    def fork(self, *parts: int | str) -> "Xoshiro256pp":
        """Independent child stream; consumes one draw from this stream."""
        return Xoshiro256pp.from_key(self.next_u64(), *parts)

    def random_array(self, shape: int | tuple[int, ...]) -> np.ndarray:
        """Uniform float64 array in [0, 1) drawn from a bank of lanes."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64))
        if n == 0:
            return np.zeros(shape, dtype=np.float64)
        lanes = min(ARRAY_LANES, n)
        seeds = np.array([self.next_u64() for _ in range(lanes)], dtype=_U64)
        s0, s1, s2, s3 = _splitmix_lanes(seeds)
        steps = -(-n // lanes)
        out = np.empty((steps, lanes), dtype=_U64)
        with np.errstate(over="ignore"):
            for i in range(steps):
                out[i] = _rotl_lanes(s0 + s3, 23) + s0
                t = s1 << _U64(17)
                s2 ^= s0
                s3 ^= s1
                s1 ^= s2
                s0 ^= s3
                s2 ^= t
                s3 = _rotl_lanes(s3, 45)
        bits = out.reshape(-1)[:n] >> _U64(11)
        return (bits.astype(np.float64) * (1.0 / (1 << 53))).reshape(shape)

    def standard_normal(self, shape: int | tuple[int, ...]) -> np.ndarray:
        """Box-Muller transform over random_array draws."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape, dtype=np.int64))
        pairs = -(-n // 2)
        u = self.random_array((2, pairs))
        radius = np.sqrt(-2.0 * np.log1p(-u[0]))
        angle = 2.0 * np.pi * u[1]
        z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
        return z[:n].reshape(shape)


def _rotl_lanes(x: np.ndarray, k: int) -> np.ndarray:
    return (x << _U64(k)) | (x >> _U64(64 - k))


def _splitmix_lanes(seeds: np.ndarray) -> list[np.ndarray]:
    state = seeds.copy()
    words = []
    with np.errstate(over="ignore"):
        for _ in range(4):
            state = state + _U64(GOLDEN_GAMMA)
            z = state.copy()
            z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
            words.append(z ^ (z >> _U64(31)))
    return words


def fisher_yates(items: Sequence[_T], stream: Xoshiro256pp) -> list[_T]:
    """Shuffled copy of items (Durstenfeld form, last index first)."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = stream.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def shuffle_with_seed(items: Sequence[_T], seed: int) -> list[_T]:
    """Fisher-Yates driven by a stream seeded directly from splitmix64(seed)."""
    return fisher_yates(items, Xoshiro256pp.from_seed(seed))
