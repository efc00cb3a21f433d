"""Reproducible 64-bit random streams.

Every stochastic routine in the package draws from xoshiro256** seeded through
splitmix64.  The compiled kernel implements the exact same generator, so a run
with a given seed produces the same trace on either backend.

Per-run seeds are derived with :func:`mix`, which only depends on the base seed
and the run index.  Runs are therefore reproducible and independent of the
order in which they are executed.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def fmix64(z):
    """splitmix64 output finaliser."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix(base_seed, run_index):
    """Seed of run ``run_index`` under ``base_seed``.

    ``mix(b, i) = fmix64(b XOR fmix64(i + GOLDEN))`` on 64-bit words.
    """
    return fmix64((base_seed & MASK64) ^ fmix64((run_index + GOLDEN) & MASK64))


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """xoshiro256** generator (Blackman and Vigna) on Python integers.

    The four state words are filled from a splitmix64 sequence started at
    ``seed``.  Methods mirror the C implementation in ``_kernel.pyx``.
    """

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, seed=0):
        x = seed & MASK64
        words = []
        for _ in range(4):
            x = (x + GOLDEN) & MASK64
            words.append(fmix64(x))
        self.s0, self.s1, self.s2, self.s3 = words

    def next_u64(self):
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, _rotl(s3, 45)
        return result

    def random(self):
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def bounded(self, n):
        """Uniform integer in [0, n) by Lemire's multiply-and-reject method."""
        m = self.next_u64() * n
        low = m & MASK64
        if low < n:
            threshold = ((1 << 64) - n) % n
            while low < threshold:
                m = self.next_u64() * n
                low = m & MASK64
        return m >> 64

    def bit(self):
        return self.next_u64() >> 63

    @property
    def state(self):
        return (self.s0, self.s1, self.s2, self.s3)


def run_seeds(base_seed, runs, start=0):
    """List of per-run seeds ``mix(base_seed, i)`` for ``i`` in ``[start, start + runs)``."""
    return [mix(base_seed, i) for i in range(start, start + runs)]
