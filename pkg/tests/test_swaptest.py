import math

import numpy as np
import pytest

from qpwcheck.encoding import symmetric_state
from qpwcheck.errors import DimensionMismatchError
from qpwcheck.qmath import DensityMatrix, StateVector, outer, random_pure_state, trace_product
from qpwcheck.swaptest import (
    RngSeed,
    coin_flip_bit,
    coin_flip_bits,
    pass_probability,
    run_swap_test,
)

from conftest import within_sigma


def basis(d, k):
    return outer(StateVector.basis(d, k))


class TestPassProbability:
    def test_identical(self):
        assert pass_probability(basis(4, 1), basis(4, 1)) == 1.0

    def test_orthogonal(self):
        assert pass_probability(basis(4, 1), basis(4, 2)) == 0.5

    def test_mixed(self):
        assert pass_probability(basis(8, 0), DensityMatrix.maximally_mixed(8)) == pytest.approx(0.5625)

    def test_accepts_state_vectors(self, rng):
        a, b = random_pure_state(5, rng), random_pure_state(5, rng)
        assert pass_probability(a, b) == pytest.approx(pass_probability(outer(a), outer(b)), abs=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            pass_probability(basis(2, 0), basis(4, 0))

    def test_symmetric_and_bounded(self, rng):
        for _ in range(200):
            d = int(rng.integers(2, 8))
            a, b = outer(random_pure_state(d, rng)), outer(random_pure_state(d, rng))
            p = pass_probability(a, b)
            assert p == pytest.approx(pass_probability(b, a), abs=1e-15)
            assert 0.5 <= p <= 1.0
            assert p == pytest.approx((1 + trace_product(a, b)) / 2, abs=1e-10)


class TestRunSwapTest:
    def test_identical_always_pass(self):
        g = RngSeed(1).generator()
        s = outer(symmetric_state(3, 16, 4))
        assert all(run_swap_test(s, s, g).passed for _ in range(10_000))

    def test_orthogonal_fair(self):
        g = RngSeed(2).generator()
        n = 100_000
        hits = sum(run_swap_test(basis(2, 0), basis(2, 1), g).passed for _ in range(n))
        assert within_sigma(hits / n, 0.5, math.sqrt(0.25 / n))

    def test_overlap_one_over_d(self):
        # tr(rho sigma) = 1/4 -> p = 0.625
        g = RngSeed(3).generator()
        a, b = basis(4, 0), DensityMatrix.maximally_mixed(4)
        n = 100_000
        hits = sum(run_swap_test(a, b, g).passed for _ in range(n))
        assert within_sigma(hits / n, 0.625, math.sqrt(0.625 * 0.375 / n))

    def test_outcome_records_probability(self):
        out = run_swap_test(basis(2, 0), basis(2, 1), RngSeed(0))
        assert out.pass_probability == 0.5

    def test_deterministic_given_seed(self):
        a, b = basis(2, 0), DensityMatrix.maximally_mixed(2)
        g1, g2 = RngSeed(9, 4).generator(), RngSeed(9, 4).generator()
        assert [run_swap_test(a, b, g1).passed for _ in range(200)] == \
               [run_swap_test(a, b, g2).passed for _ in range(200)]

    def test_convergence_in_repeated_experiments(self):
        # |fraction - p| <= 3 sigma in (nearly) all of 50 repeated experiments
        p = 0.5625
        a, b = basis(8, 0), DensityMatrix.maximally_mixed(8)
        n = 100_000
        sigma = math.sqrt(p * (1 - p) / n)
        ok = 0
        for k in range(50):
            g = RngSeed(100, k).generator()
            # batch draw: identical distribution to n run_swap_test calls
            frac = float((g.random(n) < pass_probability(a, b)).mean())
            ok += within_sigma(frac, p, sigma)
        assert ok >= 49


class TestCoinFlip:
    def test_fair(self):
        n = 100_000
        bits = coin_flip_bits(RngSeed(5).generator(), n)
        assert within_sigma(bits.mean(), 0.5, math.sqrt(0.25 / n))

    def test_single_matches_batch_distribution(self):
        g = RngSeed(6).generator()
        assert {coin_flip_bit(g) for _ in range(100)} == {0, 1}

    def test_reproducible(self):
        a = coin_flip_bits(RngSeed(7, 1).generator(), 64)
        b = coin_flip_bits(RngSeed(7, 1).generator(), 64)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = coin_flip_bits(RngSeed(7, 1).generator(), 64)
        b = coin_flip_bits(RngSeed(7, 2).generator(), 64)
        assert (a != b).any()


def test_rng_seed_validation():
    with pytest.raises(ValueError):
        RngSeed(-1)
    with pytest.raises(ValueError):
        RngSeed(2**64)
    with pytest.raises(ValueError):
        RngSeed(1, -2)
