"""SplitMix64, the one PRNG used for every seeded choice in the package.

It is tiny and fully specified, so other implementations can reproduce the
same circuits, site selections and sample vectors from the same seed:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)            # all arithmetic mod 2**64

``below(n)`` uses rejection sampling on the top bits, ``sample`` is a partial
Fisher-Yates shuffle.
"""

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int = 0):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def bits(self, k: int) -> int:
        """A uniformly random k-bit integer (k may exceed 64)."""
        out = 0
        got = 0
        while got < k:
            out = (out << 64) | self.next_u64()
            got += 64
        return out >> (got - k)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        k = (n - 1).bit_length()
        while True:
            r = self.bits(k) if k else 0
            if r < n:
                return r

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def sample(self, seq, k: int) -> list:
        """k distinct elements, uniformly without replacement, in draw order."""
        pool = list(seq)
        if k > len(pool):
            raise ValueError("sample larger than population")
        for i in range(k):
            j = i + self.below(len(pool) - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))
