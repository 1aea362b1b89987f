"""Portable 64-bit PRNG used for splits, shuffles and augmentation draws.

Generator: xorshift64* (Vigna 2016) with shifts (12, 25, 27) and output
multiplier 0x2545F4914F6CDD1D. The 64-bit seed is passed once through
splitmix64 to form the initial state (a zero state is replaced by the golden
ratio constant). Reference vectors, seed 0::

    next_u64() -> 0x7bbcb40d550682d0, 0xde7fe413d00cc9fd,
                  0xb3c638353c668c91, 0xe073afc0949195fc
    permutation(10) -> [2, 3, 0, 7, 5, 9, 6, 1, 4, 8]

Derived quantities:

* ``random()``: ``(next_u64() >> 11) * 2**-53`` in [0, 1).
* ``randbelow(n)``: rejection sampling on ``next_u64()`` below the largest
  multiple of ``n``, then ``% n``.
* ``permutation(n)``: Fisher-Yates from the top, ``j = randbelow(i + 1)``
  for ``i = n-1 .. 1``.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MULT = 0x2545F4914F6CDD1D


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: int) -> int:
    """Mix integer keys (epoch, sample index, ...) into a child seed."""
    h = int(seed) & MASK64
    for k in keys:
        h = splitmix64(h ^ ((int(k) * GOLDEN) & MASK64))
    return h


class XorShift64Star:
    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        s = splitmix64(int(seed) & MASK64)
        self.state = s or GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * MULT) & MASK64

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        limit = ((1 << 64) // n) * n
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def permutation(self, n: int) -> list[int]:
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm
