"""The s-round password check.

Each round Alice and Bob agree on a fresh random string ``r``, Alice sends
``|psi_p^r>`` and Bob SWAP-tests it against his own copy. Bob aborts on the
first failed test and accepts after ``s`` passes. Bob keeps a ledger of used
random strings and refuses repeats; Alice refuses to emit more than ``c_max``
states for one password.

Provers are duck-typed: anything with ``prover_round(r)`` returning a
:class:`~qpwcheck.qmath.StateVector` or :class:`~qpwcheck.qmath.DensityMatrix`
can stand in for Alice, which is how adversaries are plugged in.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .encoding import (
    REGIME_RATIO,
    BitString,
    EncodingParams,
    HashSpec,
    hash_index,
    symmetric_state,
    weak_password_index,
)
from .errors import (
    ParameterError,
    PasswordRotationRequired,
    RegimeWarning,
    ReplayedChallengeError,
    StateConsumedError,
)
from .qmath import StateVector
from .swaptest import RngSeed, SwapOutcome, as_generator, coin_flip_bits, run_swap_test

SCHEMA_VERSION = 1
RANDOMNESS_MODES = ("interleave", "xor", "oracle")
# redraws of r before giving up on finding an unused string
_MAX_REDRAWS = 1000


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol configuration.

    ``c_max`` is the lifetime number of states Alice may emit for one
    password. It defaults to ``floor(n / (4 d))``, raised to ``s`` when that is
    smaller so that at least one complete run is possible. ``weak_bits``
    (``n'``) enables weak-password mode: passwords are first compressed with
    ``q = H'(b)`` to ``n'`` bits and ``q`` is used in place of ``p``.
    """

    encoding: EncodingParams
    s: int
    c_max: int | None = None
    randomness_mode: str = "interleave"
    seed: RngSeed = RngSeed(0)
    hash_spec: HashSpec | None = None
    weak_bits: int | None = None
    regime_ratio: float = REGIME_RATIO

    def __post_init__(self):
        enc = self.encoding
        if self.s < 1:
            raise ParameterError("s must be at least 1")
        if self.randomness_mode not in RANDOMNESS_MODES:
            raise ParameterError(f"randomness_mode must be one of {RANDOMNESS_MODES}")
        if self.hash_spec is None:
            object.__setattr__(self, "hash_spec", enc.default_hash())
        if self.hash_spec.output_bits != enc.n:
            raise ParameterError(
                f"hash spec {self.hash_spec} does not produce n={enc.n} bits"
            )
        if self.weak_bits is not None and not 1 <= self.weak_bits < enc.n:
            raise ParameterError(f"weak_bits must satisfy 1 <= n' < n, got {self.weak_bits}")
        limit = self.regime_ratio * enc.n
        if self.s * enc.d > limit:
            warnings.warn(
                f"s*d = {self.s * enc.d} exceeds {self.regime_ratio}*n = {limit:g}",
                RegimeWarning, stacklevel=3,
            )
        if self.c_max is None:
            default = int(enc.n // (4 * enc.d))
            if default < self.s:
                warnings.warn(
                    f"default c_max = floor(n/4d) = {default} is below s = {self.s}; using s",
                    RegimeWarning, stacklevel=3,
                )
                default = self.s
            object.__setattr__(self, "c_max", default)
        elif self.c_max < 1:
            raise ParameterError("c_max must be positive")
        elif self.c_max * enc.d > limit:
            warnings.warn(
                f"c_max*d = {self.c_max * enc.d} exceeds {self.regime_ratio}*n = {limit:g}",
                RegimeWarning, stacklevel=3,
            )

    @property
    def D(self) -> int:
        return self.encoding.D

    @property
    def N(self) -> int:
        return self.encoding.N

    def weak_hash(self) -> HashSpec:
        return self.hash_spec.with_bits(self.weak_bits)

    def effective_password(self, p: BitString) -> BitString:
        """The string actually hashed with ``r``: ``p`` itself or ``H'(p)``."""
        if p.length != self.encoding.m:
            raise ParameterError(f"password has {p.length} bits, expected m={self.encoding.m}")
        if self.weak_bits is None:
            return p
        return weak_password_index(p, self.weak_hash(), n=self.encoding.n)

    def local_state(self, key: BitString, r: BitString) -> StateVector:
        """|Phi_{H(key || r)}> for an already-effective password ``key``."""
        if r.length != self.encoding.r_bits:
            raise ParameterError(f"random string has {r.length} bits, expected {self.encoding.r_bits}")
        return symmetric_state(hash_index(key, r, self.hash_spec), self.N, self.D)

    def to_dict(self) -> dict:
        e = self.encoding
        return {
            "m": e.m, "n": e.n, "d": e.d, "D": e.D, "r_bits": e.r_bits,
            "s": self.s, "c_max": self.c_max,
            "randomness_mode": self.randomness_mode,
            "hash": str(self.hash_spec),
            "weak_bits": self.weak_bits,
            "regime_ratio": self.regime_ratio,
            "seed": self.seed.seed, "stream": self.seed.stream,
        }


class FoolingProbability(NamedTuple):
    exact: float
    approx: float


def fooling_probability(D: int, s: int) -> FoolingProbability:
    """Chance a state-unaware adversary passes all ``s`` rounds.

    ``exact = ((1 + 1/D)/2)**s`` and the first-order expansion
    ``approx = 2**-s * (1 + s/D)``.
    """
    if D < 2 or s < 1:
        raise ParameterError("need D >= 2 and s >= 1")
    return FoolingProbability(((1 + 1 / D) / 2) ** s, 2.0**-s * (1 + s / D))


def average_pass_probability(mean_fidelity: float) -> float:
    return (1.0 + mean_fidelity) / 2.0


# ---------------------------------------------------------------- randomness

class ConstantSource:
    """Bit source that always returns the same bit (a dishonest party)."""

    def __init__(self, bit: int):
        self.bit = int(bit)

    def bits(self, k: int) -> np.ndarray:
        return np.full(k, self.bit, dtype=np.uint8)


class CoinFlipSource:
    """Bits from SWAP tests on orthogonal states."""

    def __init__(self, rng):
        self.rng = as_generator(rng)

    def bits(self, k: int) -> np.ndarray:
        return coin_flip_bits(self.rng, k)


def _bits_from(source, k: int) -> np.ndarray:
    if hasattr(source, "bits"):
        return np.asarray(source.bits(k), dtype=np.uint8)
    return coin_flip_bits(source, k)


def joint_random_string(alice, bob, mode: str, length: int, oracle=None) -> BitString:
    """Random string built from both parties' bits.

    ``interleave`` takes even positions from Alice and odd ones from Bob,
    ``xor`` combines two full-length strings bitwise, and ``oracle`` draws all
    bits from a single trusted source. Sources are generators, :class:`RngSeed`
    values, or objects with a ``bits(k)`` method.
    """
    if length < 1:
        raise ParameterError("length must be positive")
    if mode == "interleave":
        out = np.empty(length, dtype=np.uint8)
        out[0::2] = _bits_from(alice, (length + 1) // 2)
        out[1::2] = _bits_from(bob, length // 2)
    elif mode == "xor":
        out = _bits_from(alice, length) ^ _bits_from(bob, length)
    elif mode == "oracle":
        if oracle is None:
            raise ParameterError("oracle mode needs an oracle source")
        out = _bits_from(oracle, length)
    else:
        raise ParameterError(f"unknown randomness mode {mode!r}")
    return BitString(int("".join("1" if b else "0" for b in out), 2), length)


# ------------------------------------------------------------------- parties

class UsedStringLedger:
    """Random strings already used, per password identity."""

    def __init__(self):
        self._used: dict[str, set[BitString]] = {}

    def __contains__(self, item) -> bool:
        identity, r = item
        return r in self._used.get(identity, ())

    def add(self, identity: str, r: BitString) -> None:
        used = self._used.setdefault(identity, set())
        if r in used:
            raise ReplayedChallengeError(f"random string {r.to_hex()} already used")
        used.add(r)

    def used(self, identity: str) -> frozenset:
        return frozenset(self._used.get(identity, ()))

    def __len__(self) -> int:
        return sum(len(v) for v in self._used.values())


class Transmission:
    """A state in flight. It can be taken exactly once (no cloning)."""

    __slots__ = ("_state",)

    def __init__(self, state):
        self._state = state

    def take(self):
        if self._state is None:
            raise StateConsumedError("state has already been consumed")
        state, self._state = self._state, None
        return state


class Prover:
    """Honest Alice."""

    def __init__(self, password: BitString, params: ProtocolParams):
        self.params = params
        self._key = params.effective_password(password)
        self.emitted = 0
        self.ledger = UsedStringLedger()

    @property
    def identity(self) -> str:
        return self._key.to_hex()

    def prover_round(self, r: BitString) -> StateVector:
        if (self.identity, r) in self.ledger:
            raise ReplayedChallengeError(f"prover already answered r={r.to_hex()}")
        if self.emitted >= self.params.c_max:
            raise PasswordRotationRequired(
                f"{self.emitted} states emitted (c_max={self.params.c_max}); rotate the password"
            )
        state = self.params.local_state(self._key, r)
        self.ledger.add(self.identity, r)
        self.emitted += 1
        return state


class Verifier:
    """Bob: prepares his local copy and SWAP-tests the received state."""

    def __init__(self, password: BitString, params: ProtocolParams,
                 ledger: UsedStringLedger | None = None):
        self.params = params
        self._key = params.effective_password(password)
        self.ledger = ledger if ledger is not None else UsedStringLedger()

    @property
    def identity(self) -> str:
        return self._key.to_hex()

    def has_used(self, r: BitString) -> bool:
        return (self.identity, r) in self.ledger

    def verifier_round(self, received, r: BitString, rng) -> SwapOutcome:
        if self.has_used(r):
            raise ReplayedChallengeError(f"random string {r.to_hex()} was used before")
        self.ledger.add(self.identity, r)
        state = received.take() if isinstance(received, Transmission) else received
        return run_swap_test(state, self.params.local_state(self._key, r), rng)


# --------------------------------------------------------------- transcripts

@dataclass(frozen=True)
class RoundRecord:
    index: int
    r: BitString
    outcome: SwapOutcome

    def to_dict(self) -> dict:
        return {
            "i": self.index,
            "r_hex": self.r.to_hex(),
            "passed": self.outcome.passed,
            "p_pass": self.outcome.pass_probability,
        }


@dataclass
class Transcript:
    params: ProtocolParams
    rounds: list[RoundRecord] = field(default_factory=list)
    verdict: str = "aborted"
    abort_round: int | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict == "accepted"

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "params": self.params.to_dict(),
            "rounds": [rr.to_dict() for rr in self.rounds],
            "verdict": self.verdict,
            "abort_round": self.abort_round,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _fresh_string(verifier: Verifier, params: ProtocolParams, alice_g, bob_g, oracle_g) -> BitString:
    for _ in range(_MAX_REDRAWS):
        r = joint_random_string(alice_g, bob_g, params.randomness_mode,
                                params.encoding.r_bits, oracle=oracle_g)
        if not verifier.has_used(r):
            return r
    raise PasswordRotationRequired("no unused random string found; rotate the password")


def run_protocol(alice_password: BitString | None, bob_password: BitString,
                 params: ProtocolParams, *, stream: int = 0, prover=None,
                 verifier: Verifier | None = None) -> Transcript:
    """Run one authentication session of Alice (or ``prover``) to Bob.

    All randomness comes from ``params.seed`` at stream ``stream``: role 0 is
    Alice's coin, 1 Bob's coin, 2 the SWAP tests, 3 the trusted oracle.
    """
    seed = params.seed.substream(stream)
    alice_g, bob_g, test_g, oracle_g = (seed.generator(k) for k in range(4))
    if prover is None:
        if alice_password is None:
            raise ParameterError("need alice_password or a prover")
        prover = Prover(alice_password, params)
    verifier = verifier or Verifier(bob_password, params)
    transcript = Transcript(params)
    for i in range(1, params.s + 1):
        r = _fresh_string(verifier, params, alice_g, bob_g, oracle_g)
        sent = Transmission(prover.prover_round(r))
        outcome = verifier.verifier_round(sent, r, test_g)
        transcript.rounds.append(RoundRecord(i, r, outcome))
        if not outcome.passed:
            transcript.abort_round = i
            return transcript
    transcript.verdict = "accepted"
    return transcript


@dataclass
class MutualTranscript:
    alice_to_bob: Transcript
    bob_to_alice: Transcript
    emitted: int
    verdict: str
    abort_stage: int | None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "alice_to_bob": self.alice_to_bob.to_dict(),
            "bob_to_alice": self.bob_to_alice.to_dict(),
            "emitted": self.emitted,
            "verdict": self.verdict,
            "abort_stage": self.abort_stage,
        }


def run_mutual_protocol(alice_password: BitString, bob_password: BitString,
                        params: ProtocolParams, *, stream: int = 0,
                        alice_prover=None, bob_prover=None) -> MutualTranscript:
    """Both parties authenticate, taking turns stage by stage.

    Stage ``i`` is Alice's round ``i`` followed by Bob's round ``i``; the run
    stops at the first failed comparison in either direction, so a cheating
    side is caught before it collects many states.
    """
    seed = params.seed.substream(stream)
    gens = [seed.generator(k) for k in range(6)]
    a_prover = alice_prover or Prover(alice_password, params)
    b_prover = bob_prover or Prover(bob_password, params)
    bob_checks = Verifier(bob_password, params)
    alice_checks = Verifier(alice_password, params)
    ab, ba = Transcript(params), Transcript(params)
    emitted = 0
    directions = (
        (a_prover, bob_checks, ab, gens[0], gens[1], gens[2]),
        (b_prover, alice_checks, ba, gens[3], gens[4], gens[5]),
    )
    for i in range(1, params.s + 1):
        for prover, verifier, tr, g_a, g_b, g_t in directions:
            r = _fresh_string(verifier, params, g_a, g_b, g_a)
            sent = Transmission(prover.prover_round(r))
            emitted += 1
            outcome = verifier.verifier_round(sent, r, g_t)
            tr.rounds.append(RoundRecord(i, r, outcome))
            if not outcome.passed:
                tr.abort_round = i
                return MutualTranscript(ab, ba, emitted, "aborted", i)
    ab.verdict = ba.verdict = "accepted"
    return MutualTranscript(ab, ba, emitted, "accepted", None)
