import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from qpwcheck.adversary import FixedStateProver, simulate_fixed_state_sessions
from qpwcheck.encoding import BitString, EncodingParams, hash_index, symmetric_state
from qpwcheck.errors import (
    ParameterError,
    PasswordRotationRequired,
    RegimeWarning,
    ReplayedChallengeError,
    StateConsumedError,
)
from qpwcheck.protocol import (
    CoinFlipSource,
    ConstantSource,
    ProtocolParams,
    Prover,
    Transmission,
    UsedStringLedger,
    Verifier,
    fooling_probability,
    joint_random_string,
    run_mutual_protocol,
    run_protocol,
)
from qpwcheck.qmath import DensityMatrix, outer, random_pure_state, trace_product
from qpwcheck.swaptest import RngSeed

from conftest import make_params, within_sigma


class OrthogonalProver:
    """Test double that knows Bob's state and sends one orthogonal to it."""

    def __init__(self, bob_password, params):
        self.key = params.effective_password(bob_password)
        self.params = params

    def prover_round(self, r):
        N, D = self.params.N, self.params.D
        j = hash_index(self.key, r, self.params.hash_spec)
        # <Phi_j|Phi_{j+N/D}> is a full geometric sum of D-th roots of unity: zero
        return symmetric_state((j + N // D) % N, N, D)


class TestJointRandomString:
    def test_xor_identical_streams(self):
        r = joint_random_string(RngSeed(4).generator(), RngSeed(4).generator(), "xor", 32)
        assert r == BitString(0, 32)

    def test_interleave_pattern(self):
        r = joint_random_string(ConstantSource(1), ConstantSource(0), "interleave", 8)
        assert r.to_bin() == "10101010"

    def test_interleave_odd_length(self):
        r = joint_random_string(ConstantSource(1), ConstantSource(0), "interleave", 5)
        assert r.to_bin() == "10101"

    def test_oracle_mode(self):
        r1 = joint_random_string(None, None, "oracle", 16, oracle=RngSeed(1).generator())
        r2 = joint_random_string(ConstantSource(0), ConstantSource(0), "oracle", 16,
                                 oracle=RngSeed(1).generator())
        assert r1 == r2
        with pytest.raises(ParameterError):
            joint_random_string(None, None, "oracle", 16)

    def test_unknown_mode(self):
        with pytest.raises(ParameterError):
            joint_random_string(ConstantSource(0), ConstantSource(0), "and", 4)

    def test_xor_uniform_with_dishonest_alice(self):
        bob = CoinFlipSource(RngSeed(10).generator())
        firsts = [joint_random_string(ConstantSource(0), bob, "xor", 16).value >> 8
                  for _ in range(100_000)]
        counts = np.bincount(firsts, minlength=256)
        assert chisquare(counts).pvalue > 0.001

    def test_interleave_honest_half_uniform(self):
        # with Alice stuck at 0 only Bob's positions carry randomness; they stay uniform
        bob = CoinFlipSource(RngSeed(11).generator())
        vals = []
        for _ in range(100_000):
            bits = joint_random_string(ConstantSource(0), bob, "interleave", 16).bits
            assert not any(bits[0::2])
            vals.append(int("".join(map(str, bits[1::2])), 2))
        assert chisquare(np.bincount(vals, minlength=256)).pvalue > 0.001


class TestParams:
    def test_default_c_max(self):
        params = make_params(m=16, n=48, d=2, s=3)
        assert params.c_max == 6

    def test_c_max_raised_to_s(self):
        enc = EncodingParams(16, 8, 3)
        with pytest.warns(RegimeWarning):
            params = ProtocolParams(enc, 4)
        assert params.c_max == 4

    def test_regime_warning(self):
        with pytest.warns(RegimeWarning, match="s\\*d"):
            ProtocolParams(EncodingParams(16, 8, 3), 5, c_max=5)

    def test_no_warning_in_regime(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", RegimeWarning)
            ProtocolParams(EncodingParams(64, 48, 2), 4)

    @pytest.mark.parametrize("kw", [{"s": 0}, {"randomness_mode": "magic"}, {"c_max": 0},
                                    {"weak_bits": 8}])
    def test_rejects(self, kw):
        base = {"s": 2}
        base.update(kw)
        s = base.pop("s")
        with pytest.raises(ParameterError):
            make_params(16, 8, 3, s, **base)


class TestProverVerifier:
    def setup_method(self):
        self.params = make_params(16, 8, 4, 3, c_max=3)
        self.p = BitString(0xACE1, 16)

    def test_first_round(self):
        state = Prover(self.p, self.params).prover_round(BitString(7, 16))
        assert abs(np.linalg.norm(state.amplitudes) - 1) < 1e-12

    def test_repeated_r_refused(self):
        alice = Prover(self.p, self.params)
        alice.prover_round(BitString(7, 16))
        with pytest.raises(ReplayedChallengeError):
            alice.prover_round(BitString(7, 16))

    def test_cap(self):
        alice = Prover(self.p, self.params)
        for k in range(3):
            alice.prover_round(BitString(k, 16))
        with pytest.raises(PasswordRotationRequired):
            alice.prover_round(BitString(99, 16))

    def test_honest_round_passes(self):
        bob = Verifier(self.p, self.params)
        g = RngSeed(0).generator()
        for k in range(200):
            r = BitString(k, 16)
            out = bob.verifier_round(self.params.local_state(self.p, r), r, g)
            assert out.passed and out.pass_probability == pytest.approx(1.0)

    def test_orthogonal_fake(self):
        bob = Verifier(self.p, self.params)
        r = BitString(5, 16)
        fake = OrthogonalProver(self.p, self.params).prover_round(r)
        assert bob.verifier_round(fake, r, RngSeed(0)).pass_probability == pytest.approx(0.5, abs=1e-12)

    def test_mixed_fake(self):
        bob = Verifier(self.p, self.params)
        out = bob.verifier_round(DensityMatrix.maximally_mixed(16), BitString(5, 16), RngSeed(0))
        assert out.pass_probability == pytest.approx(0.53125)

    def test_replayed_r_rejected_before_test(self):
        bob = Verifier(self.p, self.params)
        r = BitString(5, 16)
        bob.verifier_round(DensityMatrix.maximally_mixed(16), r, RngSeed(0))
        with pytest.raises(ReplayedChallengeError):
            bob.verifier_round(DensityMatrix.maximally_mixed(16), r, RngSeed(0))

    def test_transmission_single_use(self):
        t = Transmission(DensityMatrix.maximally_mixed(2))
        t.take()
        with pytest.raises(StateConsumedError):
            t.take()

    def test_ledger(self):
        led = UsedStringLedger()
        led.add("a", BitString(1, 4))
        led.add("b", BitString(1, 4))
        assert ("a", BitString(1, 4)) in led and len(led) == 2
        with pytest.raises(ReplayedChallengeError):
            led.add("a", BitString(1, 4))


class TestRunProtocol:
    def test_honest_s20(self):
        params = make_params(16, 8, 4, 20)
        p = BitString(1234, 16)
        tr = run_protocol(p, p, params)
        assert tr.accepted and len(tr.rounds) == 20 and tr.abort_round is None

    def test_aborts_on_first_failure(self):
        params = make_params(16, 8, 4, 20)
        tr = run_protocol(BitString(1, 16), BitString(2, 16), params)
        assert tr.verdict == "aborted"
        assert tr.abort_round == len(tr.rounds)
        assert all(rr.outcome.passed for rr in tr.rounds[:-1])
        assert not tr.rounds[-1].outcome.passed

    def test_mismatched_passwords_acceptance(self):
        params = make_params(16, 8, 4, 10, seed=5)
        g = np.random.default_rng(1)
        # per-round pass probability by brute-force averaging over sampled (p, p', r)
        probs = []
        for _ in range(20_000):
            p, q, r = (BitString(int(v), 16) for v in g.integers(0, 2**16, 3))
            a, b = params.local_state(p, r), params.local_state(q, r)
            probs.append((1 + abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2) / 2)
        baseline = float(np.mean(probs)) ** 10
        assert baseline == pytest.approx(0.53125**10, rel=0.1)
        n, acc = 10_000, 0
        for t in range(n):
            pw = g.integers(0, 2**16, 2)
            tr = run_protocol(BitString(int(pw[0]), 16), BitString(int(pw[1]), 16), params, stream=t)
            acc += tr.accepted
        assert 0.5 * baseline <= acc / n <= 2 * baseline

    def test_orthogonal_adversary_single_round(self):
        params = make_params(16, 8, 4, 1, seed=8)
        n, acc = 100_000, 0
        bob = BitString(777, 16)
        for t in range(n):
            acc += run_protocol(None, bob, params, stream=t,
                                prover=OrthogonalProver(bob, params)).accepted
        assert within_sigma(acc / n, 0.5, math.sqrt(0.25 / n))

    def test_needs_password_or_prover(self):
        with pytest.raises(ParameterError):
            run_protocol(None, BitString(1, 16), make_params())

    def test_ledger_monotone(self):
        params = make_params(8, 6, 2, 12, r_bits=5)
        p = BitString(3, 8)
        bob = Verifier(p, params)
        for t in range(2):
            tr = run_protocol(p, p, params, stream=t, verifier=bob)
            used = bob.ledger.used(bob.identity)
            assert all(rr.r in used for rr in tr.rounds)
        assert len(bob.ledger) == 24
        # the 5-bit string space (32) cannot fit another 12 fresh rounds
        with pytest.raises(PasswordRotationRequired):
            run_protocol(p, p, params, stream=3, verifier=bob)

    def test_deterministic(self):
        params = make_params(16, 8, 3, 6, seed=42)
        a = run_protocol(BitString(1, 16), BitString(9, 16), params, stream=3).to_json()
        b = run_protocol(BitString(1, 16), BitString(9, 16), params, stream=3).to_json()
        assert a == b

    @pytest.mark.parametrize("mode", ["interleave", "xor", "oracle"])
    def test_randomness_modes(self, mode):
        params = make_params(16, 8, 3, 8, randomness_mode=mode)
        p = BitString(5, 16)
        assert run_protocol(p, p, params).accepted

    def test_weak_password_mode(self):
        params = make_params(64, 24, 2, 5, weak_bits=16)
        b = BitString.from_bytes(b"password")
        assert run_protocol(b, b, params).accepted
        assert not all(run_protocol(b, BitString.from_bytes(b"passw0rd"), params, stream=t).accepted
                       for t in range(20))

    def test_transcript_json_shape(self):
        params = make_params(16, 8, 3, 3)
        tr = run_protocol(BitString(5, 16), BitString(5, 16), params)
        d = json.loads(tr.to_json())
        assert set(d) == {"schema_version", "params", "rounds", "verdict", "abort_round"}
        assert set(d["rounds"][0]) == {"i", "r_hex", "passed", "p_pass"}
        assert d["rounds"][0]["i"] == 1 and len(d["rounds"][0]["r_hex"]) == 4
        assert d["params"]["hash"] == "sha256/trunc8"


@settings(max_examples=25, deadline=None)
@given(m=st.integers(8, 24), extra=st.integers(1, 8), d=st.integers(1, 4),
       s=st.integers(1, 12), seed=st.integers(0, 2**32), mode=st.sampled_from(["interleave", "xor", "oracle"]))
def test_honest_completeness(m, extra, d, s, seed, mode):
    params = make_params(m, d + extra, d, s, seed=seed, randomness_mode=mode)
    p = BitString.random(np.random.default_rng(seed), m)
    tr = run_protocol(p, p, params)
    assert tr.accepted and len(tr.rounds) == s
    assert all(rr.outcome.pass_probability == pytest.approx(1.0, abs=1e-12) for rr in tr.rounds)


def test_soundness_fixed_state():
    params = make_params(16, 8, 3, 3, seed=21)
    trial = outer(random_pure_state(8, np.random.default_rng(2)))
    rep = simulate_fixed_state_sessions(params, trial, 100_000)
    # independent F estimate: explicit trace products over the same (p, r) distribution
    g = np.random.default_rng(3)
    fs = []
    for _ in range(10_000):
        p, r = (BitString(int(v), 16) for v in g.integers(0, 2**16, 2))
        fs.append(trace_product(trial, outer(params.local_state(p, r))))
    F, F_se = float(np.mean(fs)), float(np.std(fs) / math.sqrt(len(fs)))
    expected = ((1 + F) / 2) ** 3
    slope = 1.5 * ((1 + F) / 2) ** 2
    sigma = math.hypot(rep.stderr, slope * F_se)
    assert within_sigma(rep.empirical, expected, sigma)


def test_protocol_engine_agrees_with_batch_engine():
    from qpwcheck.adversary import protocol_attack_sessions
    params = make_params(16, 8, 2, 2, seed=4)
    trial = DensityMatrix.maximally_mixed(4)
    a = protocol_attack_sessions(params, lambda: FixedStateProver(trial), 20_000)
    b = simulate_fixed_state_sessions(params, trial, 20_000)
    assert abs(a.empirical - b.empirical) <= 3 * math.hypot(a.stderr, b.stderr)


class TestMutual:
    def test_honest(self):
        params = make_params(16, 8, 3, 5)
        p = BitString(11, 16)
        mt = run_mutual_protocol(p, p, params)
        assert mt.verdict == "accepted" and mt.emitted == 10

    def test_interleaving_limits_exposure(self):
        params = make_params(16, 8, 3, 10)
        for t in range(300):
            mt = run_mutual_protocol(BitString(1, 16), BitString(2, 16), params, stream=t)
            if mt.verdict == "aborted":
                assert mt.emitted <= 2 * mt.abort_stage


class TestFoolingProbability:
    def test_large_d_limit(self):
        exact, _ = fooling_probability(2**16, 10)
        assert exact == pytest.approx(2**-10, rel=1e-3)

    def test_d16_s10(self):
        assert fooling_probability(16, 10).exact == pytest.approx(0.53125**10, rel=1e-12)
        assert fooling_probability(16, 10).exact == pytest.approx(1.79e-3, rel=1e-2)

    def test_single_round(self):
        assert fooling_probability(4, 1) == (0.625, 0.625)

    def test_rejects(self):
        with pytest.raises(ParameterError):
            fooling_probability(1, 3)
