"""Hash-indexed symmetric states.

A password ``p`` and a random string ``r`` are concatenated at the bit level,
hashed, and the first ``n`` bits of the digest pick one of ``N = 2**n``
symmetric states in a ``D = 2**d`` dimensional space.

Conventions (fixed here, pinned by golden tests):

* bit strings convert to integers big-endian (first bit is the MSB);
* the hash input for ``p || r`` is the ASCII text of the concatenated bits,
  ``b"0110..."``, so no byte padding is ever introduced;
* the index is the integer value of the leading ``n`` digest bits.
"""
from __future__ import annotations

import cmath
import hashlib
import math
import re
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, ParameterError, RegimeWarning
from .qmath import StateVector

#: Default ``c*d <= ratio*n`` threshold for the "much smaller than" checks.
REGIME_RATIO = 0.25
#: Largest state dimension exponent (D <= 64).
MAX_D_BITS = 6

_DIGEST_BITS = {
    "sha256": 256,
    "sha512": 512,
    "sha3_256": 256,
    "sha3_512": 512,
    "blake2b": 512,
    "ideal": 512,
}


@dataclass(frozen=True)
class BitString:
    """Fixed-length bit string stored as a big-endian integer."""

    value: int
    length: int

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError("bit string length must be positive")
        if not 0 <= self.value < (1 << self.length):
            raise ValueError(f"value {self.value} does not fit in {self.length} bits")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitString":
        bits = list(bits)
        value = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"not a bit: {b!r}")
            value = (value << 1) | b
        return cls(value, len(bits))

    @classmethod
    def from_bytes(cls, data: bytes) -> "BitString":
        return cls(int.from_bytes(data, "big"), 8 * len(data))

    @classmethod
    def parse(cls, text: str | int, length: int | None = None) -> "BitString":
        """Parse ``"0b1011"``, ``"0x1f"``, a bare ``"1011"`` or an int.

        Bare digit strings are read as binary and their length is the number
        of digits unless ``length`` is given. Hex strings default to four bits
        per digit.
        """
        if isinstance(text, (int, np.integer)):
            if length is None:
                raise ValueError("length is required for integer input")
            return cls(int(text), length)
        t = text.strip().replace("_", "")
        if t.startswith(("0x", "0X")):
            digits = t[2:]
            return cls(int(digits, 16), length or 4 * len(digits))
        if t.startswith(("0b", "0B")):
            t = t[2:]
        if not re.fullmatch(r"[01]+", t):
            raise ValueError(f"cannot parse bit string {text!r}")
        return cls(int(t, 2), length or len(t))

    @classmethod
    def random(cls, rng: np.random.Generator, length: int) -> "BitString":
        return cls(random_bits(rng, length), length)

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.to_bin())

    def to_bin(self) -> str:
        return format(self.value, f"0{self.length}b")

    def to_hex(self) -> str:
        return format(self.value, f"0{(self.length + 3) // 4}x")

    def __add__(self, other: "BitString") -> "BitString":
        return BitString((self.value << other.length) | other.value, self.length + other.length)

    def __len__(self) -> int:
        return self.length

    def __str__(self) -> str:
        return self.to_bin()


def random_bits(rng: np.random.Generator, length: int) -> int:
    nbytes = (length + 7) // 8
    return int.from_bytes(rng.bytes(nbytes), "big") >> (8 * nbytes - length)


def random_bits_array(rng: np.random.Generator, length: int, count: int) -> list[int]:
    """``count`` independent uniform ``length``-bit integers (Python ints)."""
    nbytes = (length + 7) // 8
    raw = rng.bytes(nbytes * count)
    shift = 8 * nbytes - length
    return [int.from_bytes(raw[i * nbytes:(i + 1) * nbytes], "big") >> shift for i in range(count)]


@dataclass(frozen=True)
class HashSpec:
    """A standardized hash truncated to ``output_bits`` leading bits.

    ``algorithm="ideal"`` selects a keyed BLAKE2b pseudorandom function with
    ``key`` as seed: a stand-in for the ideal uniform hash that tests can
    re-key at will. It serializes as ``"ideal:<key>/trunc<n>"``; standard
    hashes as ``"sha256/trunc8"``.
    """

    algorithm: str = "sha256"
    output_bits: int = 8
    key: int | None = None

    def __post_init__(self):
        if self.algorithm not in _DIGEST_BITS:
            raise ParameterError(f"unsupported hash algorithm {self.algorithm!r}")
        if not 1 <= self.output_bits <= _DIGEST_BITS[self.algorithm]:
            raise ParameterError(
                f"output_bits={self.output_bits} outside 1..{_DIGEST_BITS[self.algorithm]}"
            )
        if self.algorithm == "ideal" and self.key is None:
            object.__setattr__(self, "key", 0)

    @classmethod
    def parse(cls, text: str) -> "HashSpec":
        m = re.fullmatch(r"(\w+)(?::(\d+))?/trunc(\d+)", text.strip())
        if not m:
            raise ParameterError(f"bad hash spec {text!r}; expected e.g. 'sha256/trunc8'")
        alg, key, bits = m.groups()
        return cls(alg, int(bits), int(key) if key is not None else None)

    @property
    def is_ideal(self) -> bool:
        return self.algorithm == "ideal"

    def with_bits(self, output_bits: int) -> "HashSpec":
        return HashSpec(self.algorithm, output_bits, self.key)

    def _hasher(self):
        if self.algorithm == "ideal":
            return hashlib.blake2b(key=self.key.to_bytes(8, "big", signed=False))
        return hashlib.new(self.algorithm)

    def index_of(self, message: BitString) -> int:
        """Leading ``output_bits`` of H(message) as an integer."""
        h = self._hasher()
        h.update(message.to_bin().encode("ascii"))
        nbytes = (self.output_bits + 7) // 8
        head = int.from_bytes(h.digest()[:nbytes], "big")
        return head >> (8 * nbytes - self.output_bits)

    def __str__(self) -> str:
        if self.algorithm == "ideal":
            return f"ideal:{self.key}/trunc{self.output_bits}"
        return f"{self.algorithm}/trunc{self.output_bits}"


@dataclass(frozen=True)
class EncodingParams:
    """Bit lengths of the encoding: password ``m``, hash ``n``, dimension ``d``.

    ``r_bits`` is the length of each random string; it defaults to ``m``.
    """

    m: int
    n: int
    d: int
    r_bits: int | None = None

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ParameterError("m and n must be positive")
        if not 1 <= self.d <= MAX_D_BITS:
            raise ParameterError(f"d must be in 1..{MAX_D_BITS} (D = 2..64), got {self.d}")
        if self.d >= self.n:
            raise ParameterError(f"need d < n, got d={self.d}, n={self.n}")
        if self.r_bits is None:
            object.__setattr__(self, "r_bits", self.m)
        elif self.r_bits < 1:
            raise ParameterError("r_bits must be positive")

    @property
    def D(self) -> int:
        return 1 << self.d

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def M(self) -> int:
        return 1 << self.m

    def default_hash(self) -> HashSpec:
        return HashSpec("sha256", self.n)


def hash_index(p: BitString, r: BitString, spec: HashSpec) -> int:
    """Index j = H(p || r) truncated to ``spec.output_bits`` bits."""
    return spec.index_of(p + r)


def hash_indices(p_values: Sequence[int], r_values: Sequence[int], p_bits: int, r_bits: int,
                 spec: HashSpec) -> np.ndarray:
    """Vectorized :func:`hash_index` over paired integer sequences."""
    if spec.output_bits > 63:
        raise ParameterError("batched hashing needs output_bits <= 63")
    total = p_bits + r_bits
    fmt = f"0{total}b"
    nbytes = (spec.output_bits + 7) // 8
    shift = 8 * nbytes - spec.output_bits
    base = spec._hasher()
    out = np.empty(len(p_values), dtype=np.int64)
    for i, (p, r) in enumerate(zip(p_values, r_values)):
        h = base.copy()
        h.update(format((int(p) << r_bits) | int(r), fmt).encode("ascii"))
        out[i] = int.from_bytes(h.digest()[:nbytes], "big") >> shift
    return out


def symmetric_phase(j: int, N: int) -> float:
    """Angle 2*pi*j/N of the symmetric state with index j."""
    return 2.0 * math.pi * ((j % N) / N)


def symmetric_phases(indices, N: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    return 2.0 * np.pi * (idx / float(N))


def symmetric_state(j: int, N: int, D: int) -> StateVector:
    """|Phi_j> with amplitudes exp(2*pi*i*j*l/N)/sqrt(D), l = 0..D-1."""
    if not 0 <= j < N:
        raise ParameterError(f"index j={j} outside [0, {N})")
    if D < 2:
        raise ParameterError("D must be at least 2")
    # reduce j*l mod N exactly before going to floating point
    amps = [cmath.exp(2j * math.pi * ((j * l) % N) / N) for l in range(D)]
    return StateVector(np.array(amps) / math.sqrt(D))


def password_state(p: BitString, r: BitString, params: EncodingParams,
                   spec: HashSpec | None = None) -> StateVector:
    """|psi_p^r> = |Phi_{H(p||r)}>."""
    if r.length != params.r_bits:
        raise ParameterError(f"random string has {r.length} bits, expected {params.r_bits}")
    spec = spec or params.default_hash()
    if spec.output_bits != params.n:
        raise ParameterError(f"hash gives {spec.output_bits} bits, params expect n={params.n}")
    return symmetric_state(hash_index(p, r, spec), params.N, params.D)


def overlap(a: StateVector, b: StateVector) -> complex:
    """Inner product <a|b>."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def symmetric_overlap(j: int, k: int, N: int, D: int) -> complex:
    """Closed form of <Phi_j|Phi_k>, a geometric sum over l."""
    delta = (k - j) % N
    if delta == 0:
        return 1.0 + 0.0j
    z = cmath.exp(2j * math.pi * delta / N)
    return (1 - z**D) / (D * (1 - z))


def weak_password_index(b: BitString, spec_prime: HashSpec, *, n: int | None = None,
                        c: int | None = None, d: int | None = None,
                        ratio: float = REGIME_RATIO) -> BitString:
    """q = H'(b): compress a possibly weak password to ``n'`` bits.

    ``q`` then replaces the password in :func:`hash_index`. When ``n`` is
    given it must exceed ``n'``; when ``c`` and ``d`` are given a
    :class:`RegimeWarning` is issued if ``c*d > ratio*n'``.
    """
    n_prime = spec_prime.output_bits
    if n is not None and not n_prime < n:
        raise ParameterError(f"need n' < n, got n'={n_prime}, n={n}")
    if c is not None and d is not None and c * d > ratio * n_prime:
        warnings.warn(
            f"c*d = {c * d} is not << n' = {n_prime} (ratio {ratio})", RegimeWarning, stacklevel=2
        )
    return BitString(spec_prime.index_of(b), n_prime)
