"""Reference model of the counter-based generator, used to produce tests/data/rng_golden.txt."""

M = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
    return z ^ (z >> 31)


class Rng:
    def __init__(self, seed=0, key=None):
        self.key = mix(seed ^ 0x6A09E667F3BCC909) if key is None else key
        self.counter = 0

    @classmethod
    def stream(cls, seed, path):
        r = cls(seed)
        for p in path:
            r.key = mix(r.key ^ mix((p + GOLDEN) & M))
        return r

    def next_u64(self):
        self.counter += 1
        return mix((self.key + self.counter * GOLDEN) & M)

    def split(self):
        return Rng(key=mix(self.next_u64() ^ 0xBB67AE8584CAA73B))


def checksum(rng, n=1000):
    acc = 0
    for _ in range(n):
        acc = (acc * 31 + rng.next_u64()) & M
    return acc


if __name__ == "__main__":
    parent = Rng(2018)
    child = parent.split()
    print("split_checksum", checksum(child))
    print("parent_next", parent.next_u64())
    print("stream_first", Rng.stream(7, [1, 2, 3]).next_u64())
    print("seed0_first", Rng(0).next_u64())
