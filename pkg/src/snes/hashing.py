"""32-bit string hashes, the collision benchmark and device-side hash resolution."""

from __future__ import annotations

import enum
import random
from collections import Counter, OrderedDict
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .rdf import TupleStore

M32 = 0xFFFFFFFF
HASH_SPACE = 2**32


def additive_kr(data: bytes) -> int:
    h = 0
    for c in data:
        h += c
    return h & M32


def bernstein_sum(data: bytes) -> int:
    h = 5381
    for c in data:
        h = (h * 33 + c) & M32
    return h


def bernstein_xor(data: bytes) -> int:
    h = 5381
    for c in data:
        h = ((h * 33) & M32) ^ c
    return h


def elf(data: bytes) -> int:
    h = 0
    for c in data:
        h = ((h << 4) + c) & M32
        g = h & 0xF0000000
        if g:
            h ^= g >> 24
        h &= ~g & M32
    return h


def fnv1(data: bytes) -> int:
    h = 0x811C9DC5
    for c in data:
        h = ((h * 0x01000193) & M32) ^ c
    return h


def fnv1a(data: bytes) -> int:
    h = 0x811C9DC5
    for c in data:
        h = ((h ^ c) * 0x01000193) & M32
    return h


def jenkins_oaat(data: bytes) -> int:
    h = 0
    for c in data:
        h = (h + c) & M32
        h = (h + (h << 10)) & M32
        h ^= h >> 6
    h = (h + (h << 3)) & M32
    h ^= h >> 11
    h = (h + (h << 15)) & M32
    return h


def larson(data: bytes) -> int:
    h = 0
    for c in data:
        h = (h * 101 + c) & M32
    return h


def sdbm(data: bytes) -> int:
    h = 0
    for c in data:
        h = (c + (h << 6) + (h << 16) - h) & M32
    return h


def _mix2(a: int, b: int, c: int) -> tuple[int, int, int]:
    a = (a - b - c) & M32; a ^= c >> 13
    b = (b - c - a) & M32; b ^= (a << 8) & M32
    c = (c - a - b) & M32; c ^= b >> 13
    a = (a - b - c) & M32; a ^= c >> 12
    b = (b - c - a) & M32; b ^= (a << 16) & M32
    c = (c - a - b) & M32; c ^= b >> 5
    a = (a - b - c) & M32; a ^= c >> 3
    b = (b - c - a) & M32; b ^= (a << 10) & M32
    c = (c - a - b) & M32; c ^= b >> 15
    return a, b, c


def _le_word(data: bytes, off: int, n: int = 4) -> int:
    return int.from_bytes(data[off:off + n], "little")


def jenkins_lookup2(data: bytes, initval: int = 0) -> int:
    """Bob Jenkins' 1996 ``hash()`` from lookup2.c."""
    length = len(data)
    a = b = 0x9E3779B9
    c = initval & M32
    off = 0
    rest = length
    while rest >= 12:
        a = (a + _le_word(data, off)) & M32
        b = (b + _le_word(data, off + 4)) & M32
        c = (c + _le_word(data, off + 8)) & M32
        a, b, c = _mix2(a, b, c)
        off += 12
        rest -= 12
    c = (c + length) & M32
    tail = data[off:]
    # the low byte of c holds the length, so c's tail bytes start at bit 8
    a = (a + _le_word(tail, 0)) & M32
    b = (b + _le_word(tail, 4)) & M32
    c = (c + (_le_word(tail, 8, 3) << 8)) & M32
    _, _, c = _mix2(a, b, c)
    return c


def _rot(x: int, k: int) -> int:
    return ((x << k) | (x >> (32 - k))) & M32


def jenkins_lookup3(data: bytes, initval: int = 0) -> int:
    """``hashlittle()`` from lookup3.c, byte-at-a-time path."""
    length = len(data)
    a = b = c = (0xDEADBEEF + length + initval) & M32
    off = 0
    rest = length
    while rest > 12:
        a = (a + _le_word(data, off)) & M32
        b = (b + _le_word(data, off + 4)) & M32
        c = (c + _le_word(data, off + 8)) & M32
        a = (a - c) & M32; a ^= _rot(c, 4);  c = (c + b) & M32
        b = (b - a) & M32; b ^= _rot(a, 6);  a = (a + c) & M32
        c = (c - b) & M32; c ^= _rot(b, 8);  b = (b + a) & M32
        a = (a - c) & M32; a ^= _rot(c, 16); c = (c + b) & M32
        b = (b - a) & M32; b ^= _rot(a, 19); a = (a + c) & M32
        c = (c - b) & M32; c ^= _rot(b, 4);  b = (b + a) & M32
        off += 12
        rest -= 12
    if rest == 0:
        return c
    tail = data[off:]
    a = (a + _le_word(tail, 0)) & M32
    b = (b + _le_word(tail, 4)) & M32
    c = (c + _le_word(tail, 8)) & M32
    c ^= b; c = (c - _rot(b, 14)) & M32
    a ^= c; a = (a - _rot(c, 11)) & M32
    b ^= a; b = (b - _rot(a, 25)) & M32
    c ^= b; c = (c - _rot(b, 16)) & M32
    a ^= c; a = (a - _rot(c, 4)) & M32
    b ^= a; b = (b - _rot(a, 14)) & M32
    c ^= b; c = (c - _rot(b, 24)) & M32
    return c


class HashAlgorithm(enum.Enum):
    ADDITIVE_KR = "additive_kr"
    BERNSTEIN_SUM = "bernstein_sum"
    BERNSTEIN_XOR = "bernstein_xor"
    ELF = "elf"
    FNV1 = "fnv1"
    FNV1A = "fnv1a"
    JENKINS_LOOKUP2 = "jenkins_lookup2"
    JENKINS_LOOKUP3 = "jenkins_lookup3"
    JENKINS_OAAT = "jenkins_oaat"
    LARSON = "larson"
    SDBM = "sdbm"

    @classmethod
    def parse(cls, name: str) -> "HashAlgorithm":
        key = name.strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown hash algorithm {name!r}") from None


_FUNCS: dict[HashAlgorithm, Callable[[bytes], int]] = {
    HashAlgorithm.ADDITIVE_KR: additive_kr,
    HashAlgorithm.BERNSTEIN_SUM: bernstein_sum,
    HashAlgorithm.BERNSTEIN_XOR: bernstein_xor,
    HashAlgorithm.ELF: elf,
    HashAlgorithm.FNV1: fnv1,
    HashAlgorithm.FNV1A: fnv1a,
    HashAlgorithm.JENKINS_LOOKUP2: jenkins_lookup2,
    HashAlgorithm.JENKINS_LOOKUP3: jenkins_lookup3,
    HashAlgorithm.JENKINS_OAAT: jenkins_oaat,
    HashAlgorithm.LARSON: larson,
    HashAlgorithm.SDBM: sdbm,
}

DEFAULT_ALGORITHM = HashAlgorithm.SDBM


def hash_bytes(alg: HashAlgorithm, data: Union[bytes, str]) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return _FUNCS[alg](data)


def hash_string(s: str, alg: HashAlgorithm = DEFAULT_ALGORITHM) -> int:
    return _FUNCS[alg](s.encode("utf-8"))


# -- collision benchmark ----------------------------------------------------------


@dataclass(frozen=True)
class CollisionReport:
    algorithm: HashAlgorithm
    distinct_inputs: int
    distinct_hashes: int
    collisions: int
    # variance of elements per hash value over the whole 2**32 value space,
    # empty values included
    variance_per_hash: float
    # the same statistic restricted to hash values that occur at least once
    occupied_variance: float
    max_bucket: int

    def as_row(self) -> dict:
        return {
            "algorithm": self.algorithm.name,
            "distinct_inputs": self.distinct_inputs,
            "distinct_hashes": self.distinct_hashes,
            "collisions": self.collisions,
            "variance_per_hash": self.variance_per_hash,
            "occupied_variance": self.occupied_variance,
            "max_bucket": self.max_bucket,
        }


def collision_report(alg: HashAlgorithm, corpus: Iterable[Union[str, bytes]]) -> CollisionReport:
    func = _FUNCS[alg]
    buckets: Counter[int] = Counter()
    n = 0
    for item in corpus:
        if isinstance(item, str):
            item = item.encode("utf-8")
        buckets[func(item)] += 1
        n += 1
    distinct = len(buckets)
    sum_sq = sum(v * v for v in buckets.values())
    mean_all = n / HASH_SPACE
    var_all = sum_sq / HASH_SPACE - mean_all * mean_all
    if distinct:
        mean_occ = n / distinct
        var_occ = sum_sq / distinct - mean_occ * mean_occ
    else:
        var_occ = 0.0
    return CollisionReport(
        algorithm=alg,
        distinct_inputs=n,
        distinct_hashes=distinct,
        collisions=n - distinct,
        variance_per_hash=max(var_all, 0.0),
        occupied_variance=max(var_occ, 0.0),
        max_bucket=max(buckets.values(), default=0),
    )


_WORDS = (
    "sensor", "device", "room", "kitchen", "temperature", "humidity", "power", "door", "window",
    "light", "condition", "severity", "observation", "person", "place", "event", "value", "state",
)


def synthetic_corpus(n: int = 100_000, seed: int = 0) -> list[str]:
    """``n`` distinct RDF-like tuple elements: IRIs, quoted literals and numbers."""
    rng = random.Random(seed)
    seen: set[str] = set()
    out: list[str] = []
    while len(out) < n:
        r = rng.random()
        word = rng.choice(_WORDS)
        if r < 0.5:
            host = rng.choice(("example.org", "dbpedia.org", "home.example", "w3.org"))
            s = f"<http://{host}/{word}/{rng.choice(_WORDS)}_{rng.randrange(10**6)}>"
        elif r < 0.8:
            words = [rng.choice(_WORDS) for _ in range(rng.randint(1, 4))]
            s = '"' + " ".join(words) + f' {rng.randrange(10**5)}"'
        elif r < 0.9:
            s = str(rng.randrange(-(10**9), 10**9))
        else:
            s = f"{rng.uniform(-1e4, 1e4):.{rng.randint(1, 6)}f}"
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def birthday_expectation(n: int, bits: int = 32) -> float:
    """Expected colliding pairs for n uniform draws from 2**bits values."""
    return n * (n - 1) / 2 ** (bits + 1)


def format_reports(reports: Iterable[CollisionReport]) -> str:
    lines = [f"{'algorithm':<16} {'inputs':>9} {'hashes':>9} {'collisions':>10} {'sigma2':>10} {'max':>5}"]
    for r in reports:
        lines.append(
            f"{r.algorithm.name:<16} {r.distinct_inputs:>9} {r.distinct_hashes:>9} "
            f"{r.collisions:>10} {r.variance_per_hash:>10.3e} {r.max_bucket:>5}"
        )
    return "\n".join(lines)


# -- device-side resolution -------------------------------------------------------


class HashCache:
    """LRU map from hash value to dictionary key."""

    def __init__(self, capacity: int = 256):
        if capacity < 1:
            raise ValueError("cache capacity must be positive")
        self.capacity = capacity
        self._entries: OrderedDict[int, int] = OrderedDict()

    def get(self, h: int) -> Optional[int]:
        key = self._entries.get(h)
        if key is not None:
            self._entries.move_to_end(h)
        return key

    def put(self, h: int, key: int) -> None:
        self._entries[h] = key
        self._entries.move_to_end(h)
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, h: int) -> bool:
        return h in self._entries


def resolve_hash(
    cache: HashCache, ts: TupleStore, h: int, alg: HashAlgorithm = DEFAULT_ALGORITHM
) -> Optional[str]:
    """Find the dictionary string hashing to ``h``, consulting the cache first."""
    d = ts.dictionary
    key = cache.get(h)
    if key is not None:
        s = d.lookup(key)
        if hash_string(s, alg) == h:
            return s
    for key, s in d.items():
        if hash_string(s, alg) == h:
            cache.put(h, key)
            return s
    return None
