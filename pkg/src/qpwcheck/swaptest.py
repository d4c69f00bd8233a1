"""Outcome-level SWAP test and the SWAP-test coin flip.

The test is simulated as a Bernoulli draw with the exact pass probability
(1 + tr(rho sigma)) / 2. The post-measurement state is not modeled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .qmath import DensityMatrix, StateVector, fidelity, outer


@dataclass(frozen=True)
class RngSeed:
    """Seed plus stream id for a counter-based (Philox) generator.

    Streams are derived through ``SeedSequence(seed, spawn_key=(stream, *roles))``
    so every (seed, stream, roles) triple yields an independent, reproducible
    sequence.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.stream < 0:
            raise ValueError("stream id must be non-negative")

    def generator(self, *roles: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *roles))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, stream: int) -> "RngSeed":
        return RngSeed(self.seed, stream)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSeed):
        return rng.generator()
    raise TypeError(f"expected Generator or RngSeed, got {type(rng).__name__}")


@dataclass(frozen=True)
class SwapOutcome:
    passed: bool
    pass_probability: float


def pass_probability(a: StateVector | DensityMatrix, b: StateVector | DensityMatrix) -> float:
    """Probability (1 + tr(a b)) / 2 that the SWAP test passes."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")
    f = fidelity(a, b)
    # tr(rho sigma) lies in [0, 1] for valid states; clip rounding only
    return (1.0 + min(max(f, 0.0), 1.0)) / 2.0


def run_swap_test(a, b, rng) -> SwapOutcome:
    p = pass_probability(a, b)
    u = as_generator(rng).random()
    return SwapOutcome(bool(u < p), p)


_ZERO = StateVector.basis(2, 0)
_ONE = StateVector.basis(2, 1)
_COIN_P = pass_probability(outer(_ZERO), outer(_ONE))


def coin_flip_bit(rng) -> int:
    """One random bit: SWAP test on two orthogonal states, 1 on pass."""
    return int(run_swap_test(_ZERO, _ONE, rng).passed)


def coin_flip_bits(rng, k: int) -> np.ndarray:
    """``k`` coin-flip bits; equivalent to ``k`` calls of :func:`coin_flip_bit`."""
    g = as_generator(rng)
    return (g.random(k) < _COIN_P).astype(np.uint8)
