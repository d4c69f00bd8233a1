"""Eavesdropper strategies and the replay-fidelity bound.

Strategies measured here are concrete and suboptimal: a fixed trial state
sent every round, replaying a captured state unchanged, and a dictionary
search that spends each captured state on one SWAP test. The general
upper bound on any physical transformation of captured states is computed
from the averaged operator R = E[rho_1 (x) ... (x) rho_{c+1}] as
``D**c * max_eigenvalue(R)``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .encoding import (
    BitString,
    hash_indices,
    random_bits_array,
    symmetric_phases,
    symmetric_state,
)
from .errors import DimensionCapError, ParameterError, RegimeWarning
from .protocol import SCHEMA_VERSION, ProtocolParams, run_protocol
from .qmath import (
    DIM_CAP,
    DensityMatrix,
    as_density,
    max_eigenvalue,
    outer,
    random_pure_state,
)
from .swaptest import RngSeed

#: Largest number of index tuples any enumeration will visit.
MAX_TUPLES = 2**24
R_MODES = ("exhaustive", "sampled", "ideal_hash")
_Z95 = 1.959963984540054
_CHUNK = 8192


# ------------------------------------------------------------------ reports

def binomial_summary(successes: int, trials: int):
    """Rate, binomial standard error and 95% Wilson interval."""
    if trials <= 0:
        raise ValueError("need at least one trial")
    p = successes / trials
    se = math.sqrt(p * (1 - p) / trials)
    z2 = _Z95**2
    centre = (p + z2 / (2 * trials)) / (1 + z2 / trials)
    half = _Z95 * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials**2)) / (1 + z2 / trials)
    return p, se, max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


CSV_FIELDS = [
    "schema_version", "strategy", "D", "n", "m", "s", "c", "B", "trials", "successes",
    "empirical", "stderr", "ci_low", "ci_high", "prediction", "prediction_kind",
    "analytic_bound", "bound_kind", "per_round_rate", "per_round_stderr",
    "bound_respected", "regime_valid",
]


@dataclass
class AttackReport:
    """Outcome of an attack experiment.

    ``empirical`` is the measured success rate (session acceptance or correct
    identification) with binomial ``stderr`` and a 95% Wilson interval.
    ``prediction`` is the analytic value the rate should match; for the
    dictionary attack, which has no closed form, it is the 1/B guessing
    baseline. ``analytic_bound`` is the per-round pass bound (1 + 1/D)/2 for
    state attacks and the guessing baseline for the dictionary attack.
    """

    strategy: str
    params: dict
    trials: int
    successes: int
    empirical: float
    stderr: float
    ci_low: float
    ci_high: float
    prediction: float
    prediction_kind: str
    analytic_bound: float
    bound_kind: str
    bound_respected: bool
    regime_valid: bool
    per_round_rate: float | None = None
    per_round_stderr: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def sigma(self) -> float:
        return self.stderr

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def csv_row(self) -> dict:
        p = self.params
        row = {
            "schema_version": SCHEMA_VERSION,
            "strategy": self.strategy,
            "D": p.get("D"), "n": p.get("n"), "m": p.get("m"), "s": p.get("s"),
            "c": self.extras.get("c", ""), "B": self.extras.get("B", ""),
            "trials": self.trials, "successes": self.successes,
            "empirical": self.empirical, "stderr": self.stderr,
            "ci_low": self.ci_low, "ci_high": self.ci_high,
            "prediction": self.prediction, "prediction_kind": self.prediction_kind,
            "analytic_bound": self.analytic_bound, "bound_kind": self.bound_kind,
            "per_round_rate": "" if self.per_round_rate is None else self.per_round_rate,
            "per_round_stderr": "" if self.per_round_stderr is None else self.per_round_stderr,
            "bound_respected": self.bound_respected,
            "regime_valid": self.regime_valid,
        }
        return row


def _regime_valid(params: ProtocolParams, c: int) -> bool:
    return c * params.encoding.d <= params.regime_ratio * params.encoding.n


def _round_bound(D: int) -> float:
    return (1 + 1 / D) / 2


# ---------------------------------------------------------------- fidelities

class Estimate(NamedTuple):
    mean: float
    stderr: float
    count: int


def symmetric_fidelities(trial, indices, N: int) -> np.ndarray:
    """tr(trial |Phi_j><Phi_j|) for every index j in ``indices``."""
    g = kernels.diagonal_sums(as_density(trial).matrix)
    return kernels.symmetric_fidelities(g, symmetric_phases(indices, N))


def _effective_keys(params: ProtocolParams, values: list[int]) -> tuple[list[int], int]:
    """Password integers as hashed with r, and their bit length."""
    if params.weak_bits is None:
        return values, params.encoding.m
    spec = params.weak_hash()
    m = params.encoding.m
    return [spec.index_of(BitString(v, m)) for v in values], params.weak_bits


def _sampled_indices(params: ProtocolParams, count: int, rng: np.random.Generator) -> np.ndarray:
    enc = params.encoding
    ps, kb = _effective_keys(params, random_bits_array(rng, enc.m, count))
    rs = random_bits_array(rng, enc.r_bits, count)
    return hash_indices(ps, rs, kb, enc.r_bits, params.hash_spec)


def fidelity_estimate(trial, params: ProtocolParams, sample: int | None = None, *,
                      rng: np.random.Generator | None = None,
                      exhaustive: bool | None = None) -> Estimate:
    """Average fidelity of a fixed trial state with the legitimate states.

    Exhaustive mode averages over every index j in [0, N), which is the
    ideal-hash distribution; it is the default for an ideal hash spec.
    Otherwise ``sample`` random (p, r) pairs are hashed.
    """
    trial = as_density(trial)
    N = params.N
    if trial.dim != params.D:
        raise ParameterError(f"trial state has dimension {trial.dim}, expected D={params.D}")
    if exhaustive is None:
        exhaustive = params.hash_spec.is_ideal and sample is None
    if exhaustive:
        if N > MAX_TUPLES:
            raise ParameterError(f"N = {N} too large to enumerate")
        f = symmetric_fidelities(trial, np.arange(N), N)
        return Estimate(float(f.mean()), 0.0, N)
    sample = 10_000 if sample is None else sample
    pair_space = params.encoding.M * (1 << params.encoding.r_bits)
    if not 1 <= sample <= pair_space:
        raise ParameterError(f"sample must be in 1..{pair_space}")
    rng = rng if rng is not None else params.seed.generator(30)
    f = symmetric_fidelities(trial, _sampled_indices(params, sample, rng), N)
    se = float(f.std(ddof=1) / math.sqrt(sample)) if sample > 1 else 0.0
    return Estimate(float(f.mean()), se, sample)


def random_state_attack_fidelity(trial, params: ProtocolParams, sample: int | None = None, *,
                                 rng=None, exhaustive: bool | None = None) -> float:
    """Mean fidelity F of a constant trial state; 1/D for a pure state."""
    return fidelity_estimate(trial, params, sample, rng=rng, exhaustive=exhaustive).mean


def best_fixed_state_search(params: ProtocolParams, candidates: int, *,
                            sample: int | None = None, rng=None,
                            exhaustive: bool | None = None) -> tuple[DensityMatrix, float]:
    """Best of ``candidates`` Haar-random pure states by estimated fidelity.

    All candidates are scored on the same sampled (p, r) pairs.
    """
    if candidates < 1:
        raise ParameterError("need at least one candidate")
    rng = rng if rng is not None else params.seed.generator(31)
    states = [outer(random_pure_state(params.D, rng)) for _ in range(candidates)]
    if exhaustive is None:
        exhaustive = params.hash_spec.is_ideal and sample is None
    if exhaustive:
        idx = np.arange(params.N)
    else:
        idx = _sampled_indices(params, 10_000 if sample is None else sample, rng)
    scores = [float(symmetric_fidelities(s, idx, params.N).mean()) for s in states]
    best = int(np.argmax(scores))
    return states[best], scores[best]


# ------------------------------------------------------------ state provers

class FixedStateProver:
    """Eve sends the same prepared state every round."""

    def __init__(self, state):
        self.state = as_density(state)
        self.emitted = 0

    def prover_round(self, r):
        self.emitted += 1
        return self.state


class ReplayProver:
    """Eve replays captured states unchanged, one per round.

    Each capture is a single physical copy; once they are spent she sends
    ``fallback`` if one was given.
    """

    def __init__(self, captures, fallback=None):
        self._captures = list(captures)
        self.fallback = fallback

    def prover_round(self, r):
        if self._captures:
            return self._captures.pop(0)
        if self.fallback is None:
            raise ParameterError("replay prover has no captures left and no fallback state")
        return self.fallback


def protocol_attack_sessions(params: ProtocolParams, prover_factory: Callable[[], object],
                             trials: int, *, strategy: str = "custom",
                             mean_fidelity: float | None = None) -> AttackReport:
    """Run ``trials`` full protocol sessions against an adversarial prover.

    Bob's password is drawn fresh for each session from stream ``t`` of the
    params seed, and each session uses its own stream, so results do not
    depend on execution order.
    """
    enc = params.encoding
    accepted = rounds = passes = 0
    for t in range(trials):
        g = params.seed.substream(t).generator(9)
        bob = BitString.random(g, enc.m)
        tr = run_protocol(None, bob, params, stream=t, prover=prover_factory())
        accepted += tr.accepted
        rounds += len(tr.rounds)
        passes += sum(rr.outcome.passed for rr in tr.rounds)
    F = 1 / params.D if mean_fidelity is None else mean_fidelity
    return _state_attack_report(strategy, params, trials, accepted, rounds, passes, F)


def _state_attack_report(strategy, params, trials, accepted, rounds, passes, F,
                         extras=None) -> AttackReport:
    rate, se, lo, hi = binomial_summary(accepted, trials)
    pr, pr_se, _, _ = binomial_summary(passes, rounds)
    bound = _round_bound(params.D)
    return AttackReport(
        strategy=strategy, params=params.to_dict(), trials=trials, successes=accepted,
        empirical=rate, stderr=se, ci_low=lo, ci_high=hi,
        prediction=((1 + F) / 2) ** params.s, prediction_kind="acceptance ((1+F)/2)^s",
        analytic_bound=bound, bound_kind="per_round_pass_upper",
        bound_respected=pr <= bound + 3 * pr_se,
        regime_valid=_regime_valid(params, params.s),
        per_round_rate=pr, per_round_stderr=pr_se,
        extras={"mean_fidelity": F, "rounds": rounds, "round_passes": passes, **(extras or {})},
    )


def simulate_fixed_state_sessions(params: ProtocolParams, trial, trials: int, *,
                                  seed: RngSeed | None = None,
                                  strategy: str = "fixed_state") -> AttackReport:
    """Batched Monte Carlo of full sessions against a constant trial state.

    Statistically equivalent to :func:`protocol_attack_sessions` with a
    :class:`FixedStateProver`, but vectorized through the kernels. Random
    strings are drawn uniformly; repeats within a session are not filtered
    (probability below s**2 / 2**(r_bits + 1)).
    """
    trial = as_density(trial)
    seed = seed or params.seed
    enc, s, N = params.encoding, params.s, params.N
    g = kernels.diagonal_sums(trial.matrix)
    accepted = rounds = passes = 0
    for k, start in enumerate(range(0, trials, _CHUNK)):
        T = min(_CHUNK, trials - start)
        rng = seed.generator(10, k)
        keys, kb = _effective_keys(params, random_bits_array(rng, enc.m, T))
        rs = random_bits_array(rng, enc.r_bits, T * s)
        j = hash_indices(np.repeat(keys, s).tolist(), rs, kb, enc.r_bits, params.hash_spec)
        F = kernels.symmetric_fidelities(g, symmetric_phases(j, N)).reshape(T, s)
        ff = kernels.first_failure((1 + F) / 2, rng.random((T, s)))
        acc = ff < 0
        accepted += int(acc.sum())
        n_rounds = np.where(acc, s, ff + 1)
        rounds += int(n_rounds.sum())
        passes += int(n_rounds.sum() - (~acc).sum())
    F_exact = trial.trace() / params.D
    return _state_attack_report(strategy, params, trials, accepted, rounds, passes, F_exact)


# ------------------------------------------------------------- naive replay

def replay_overlap_oracle(N: int, D: int) -> float:
    """Mean |<Phi_j1|Phi_j2>|^2 over all N**2 index pairs, by enumeration."""
    phi = np.array([symmetric_state(j, N, D).amplitudes for j in range(N)])
    return float((np.abs(phi.conj() @ phi.T) ** 2).mean())


def naive_replay_success(params: ProtocolParams, trials: int, *,
                         seed: RngSeed | None = None,
                         force_collision: bool = False) -> AttackReport:
    """Eve replays a state captured for r1 unchanged against challenge r2.

    With an ideal hash spec the two indices are independent uniform draws;
    otherwise (p, r1, r2) are drawn with r2 != r1 and hashed. Success is one
    passed SWAP test.
    """
    seed = seed or params.seed
    enc, N, D = params.encoding, params.N, params.D
    g = kernels.diagonal_sums(outer(symmetric_state(0, N, D)).matrix)
    successes = 0
    for k, start in enumerate(range(0, trials, _CHUNK)):
        T = min(_CHUNK, trials - start)
        rng = seed.generator(11, k)
        if params.hash_spec.is_ideal:
            j1 = rng.integers(0, N, T)
            j2 = rng.integers(0, N, T)
        else:
            keys, kb = _effective_keys(params, random_bits_array(rng, enc.m, T))
            r1 = random_bits_array(rng, enc.r_bits, T)
            r2 = random_bits_array(rng, enc.r_bits, T)
            for i in range(T):
                while r2[i] == r1[i]:
                    r2[i] = random_bits_array(rng, enc.r_bits, 1)[0]
            j1 = hash_indices(keys, r1, kb, enc.r_bits, params.hash_spec)
            j2 = hash_indices(keys, r2, kb, enc.r_bits, params.hash_spec)
        if force_collision:
            j2 = j1
        # |<Phi_j1|Phi_j2>|^2 depends only on j2 - j1
        F = kernels.symmetric_fidelities(g, symmetric_phases((j2 - j1) % N, N))
        successes += int((rng.random(T) < (1 + F) / 2).sum())
    rate, se, lo, hi = binomial_summary(successes, trials)
    overlap = 1.0 if force_collision else replay_overlap_oracle(N, D)
    bound = _round_bound(D)
    return AttackReport(
        strategy="naive_replay", params=params.to_dict(), trials=trials, successes=successes,
        empirical=rate, stderr=se, ci_low=lo, ci_high=hi,
        prediction=(1 + overlap) / 2, prediction_kind="pass (1+E|<Phi|Phi'>|^2)/2",
        analytic_bound=bound, bound_kind="per_round_pass_upper",
        bound_respected=rate <= bound + 3 * se,
        regime_valid=_regime_valid(params, 1),
        per_round_rate=rate, per_round_stderr=se,
        extras={"c": 1, "mean_overlap_sq": overlap, "force_collision": force_collision},
    )


# ---------------------------------------------------------------- R operator

@dataclass(frozen=True)
class ROperator:
    c: int
    matrix: DensityMatrix
    mode: str
    tuples: int
    stderr: float | None = None

    @property
    def dim(self) -> int:
        return self.matrix.dim


def _mix_matrix(index_tuples: np.ndarray, weights: np.ndarray, N: int, D: int) -> np.ndarray:
    k = index_tuples.shape[1]
    grid = np.zeros((2 * D - 1) ** k, dtype=np.complex128)
    for start in range(0, index_tuples.shape[0], 1 << 16):
        block = index_tuples[start:start + (1 << 16)]
        grid += kernels.symmetric_tensor_mix(symmetric_phases(block, N), weights[start:start + (1 << 16)], D)
    m = kernels.expand_difference_grid(grid, D, k)
    # entries for +delta and -delta are summed separately; average out rounding
    return (m + m.conj().T) / 2


def _counts_to_mix(counts: np.ndarray, N: int, k: int, D: int) -> np.ndarray:
    nz = np.flatnonzero(counts)
    tuples = np.stack(np.unravel_index(nz, (N,) * k), axis=1)
    weights = counts[nz] / counts.sum()
    return _mix_matrix(tuples, weights, N, D)


def build_R(params: ProtocolParams, c: int, mode: str = "ideal_hash", *,
            samples: int | None = None, rng: np.random.Generator | None = None,
            cap: int | None = None) -> ROperator:
    """Average of rho_p^{r_1} (x) ... (x) rho_p^{r_{c+1}} over p and the r_i.

    ``ideal_hash`` enumerates all index tuples (j_1..j_{c+1}) in [0, N)^{c+1}
    with equal weight. ``exhaustive`` enumerates every (p, r_1..r_{c+1}) with
    the configured hash. ``sampled`` averages ``samples`` random tuples
    (default 10**6) and reports the standard error of the largest eigenvalue
    from ten batch means.
    """
    if mode not in R_MODES:
        raise ParameterError(f"mode must be one of {R_MODES}")
    if c < 1:
        raise ParameterError("capture count c must be at least 1")
    enc, N, D = params.encoding, params.N, params.D
    k = c + 1
    cap = DIM_CAP if cap is None else cap
    if D**k > cap:
        raise DimensionCapError(f"R has dimension D^(c+1) = {D**k}, cap is {cap}")
    if not _regime_valid(params, c):
        warnings.warn(f"c*d = {c * enc.d} is not << n = {enc.n}", RegimeWarning, stacklevel=2)

    if mode == "ideal_hash":
        total = N**k
        if total > MAX_TUPLES:
            raise ParameterError(f"N^(c+1) = {total} tuples exceeds {MAX_TUPLES}; use sampled")
        counts = np.ones(total, dtype=np.int64)
        m = _counts_to_mix(counts, N, k, D)
        return ROperator(c, DensityMatrix(m), mode, total)

    bins = N**k
    if bins > MAX_TUPLES:
        raise ParameterError(f"N^(c+1) = {bins} index tuples exceeds {MAX_TUPLES}")

    if mode == "exhaustive":
        Mr = 1 << enc.r_bits
        total = enc.M * Mr**k
        if total > MAX_TUPLES:
            raise ParameterError(f"{total} (p, r_1..r_(c+1)) tuples exceeds {MAX_TUPLES}; use sampled")
        counts = np.zeros(bins, dtype=np.int64)
        keys, kb = _effective_keys(params, list(range(enc.M)))
        r_all = list(range(Mr))
        for key in keys:
            row = hash_indices([key] * Mr, r_all, kb, enc.r_bits, params.hash_spec)
            # every (r_1..r_k) combination: key = sum_f row[r_f] * N^(k-1-f)
            code = np.zeros(1, dtype=np.int64)
            for _ in range(k):
                code = (code[:, None] * N + row[None, :]).ravel()
            counts += np.bincount(code, minlength=bins)
        return ROperator(c, DensityMatrix(_counts_to_mix(counts, N, k, D)), mode, total)

    samples = 10**6 if samples is None else samples
    if samples < 10:
        raise ParameterError("sampled mode needs at least 10 samples")
    rng = rng if rng is not None else params.seed.generator(40)
    batches = np.array_split(np.arange(samples), 10)
    total_counts = np.zeros(bins, dtype=np.int64)
    batch_max = []
    for b in batches:
        size = len(b)
        keys, kb = _effective_keys(params, random_bits_array(rng, enc.m, size))
        code = np.zeros(size, dtype=np.int64)
        for _ in range(k):
            rs = random_bits_array(rng, enc.r_bits, size)
            code = code * N + hash_indices(keys, rs, kb, enc.r_bits, params.hash_spec)
        counts = np.bincount(code, minlength=bins)
        total_counts += counts
        batch_max.append(max_eigenvalue(_counts_to_mix(counts, N, k, D)))
    se = float(np.std(batch_max, ddof=1) / math.sqrt(len(batch_max)))
    return ROperator(c, DensityMatrix(_counts_to_mix(total_counts, N, k, D)), mode, samples, se)


def replay_bound(r_op: ROperator, params: ProtocolParams) -> float:
    """Upper bound D**c * R_max on the average fidelity of any replay map."""
    return params.D**r_op.c * max_eigenvalue(r_op.matrix)


# ---------------------------------------------------------------- dictionary

def dictionary_attack_sim(params: ProtocolParams, B: int, c: int, trials: int, *,
                          seed: RngSeed | None = None) -> AttackReport:
    """Eve tries to identify the password from a dictionary of ``B`` candidates.

    She holds ``c`` captured states for known random strings. Candidates are
    visited in a random cyclic order and each captured state is consumed by
    one SWAP test against the next candidate's locally prepared state. A
    candidate with any failed test is eliminated; among the survivors she
    picks the one with the most passes, breaking ties uniformly.
    """
    enc, N, D = params.encoding, params.N, params.D
    if not 1 <= B <= enc.M:
        raise ParameterError(f"B must be in 1..{enc.M}")
    if c < 0:
        raise ParameterError("c must be non-negative")
    if c > (1 << enc.r_bits):
        raise ParameterError("more captures than distinct random strings")
    regime = _regime_valid(params, c)
    if not regime:
        warnings.warn(f"c*d = {c * enc.d} is not << n = {enc.n}", RegimeWarning, stacklevel=2)
    seed = seed or params.seed
    g = kernels.diagonal_sums(outer(symmetric_state(0, N, D)).matrix)
    successes = 0
    for k, start in enumerate(range(0, trials, _CHUNK)):
        rng = seed.generator(12, k)
        for _ in range(min(_CHUNK, trials - start)):
            words = _distinct_bits(rng, enc.m, B)
            truth = int(rng.integers(B))
            if c > 0:
                keys, kb = _effective_keys(params, words)
                order = rng.permutation(B)
                rs = _distinct_bits(rng, enc.r_bits, c)
                tested = [int(order[i % B]) for i in range(c)]
                j_true = hash_indices([keys[truth]] * c, rs, kb, enc.r_bits, params.hash_spec)
                j_cand = hash_indices([keys[t] for t in tested], rs, kb, enc.r_bits, params.hash_spec)
                F = kernels.symmetric_fidelities(g, symmetric_phases((j_cand - j_true) % N, N))
                passed = rng.random(c) < (1 + F) / 2
                fails = np.zeros(B, dtype=np.int64)
                wins = np.zeros(B, dtype=np.int64)
                np.add.at(fails, tested, ~passed)
                np.add.at(wins, tested, passed)
                score = np.where(fails > 0, -1, wins)
                best = np.flatnonzero(score == score.max())
            else:
                best = np.arange(B)
            guess = int(best[rng.integers(len(best))])
            successes += guess == truth
    rate, se, lo, hi = binomial_summary(successes, trials)
    return AttackReport(
        strategy="dictionary", params=params.to_dict(), trials=trials, successes=successes,
        empirical=rate, stderr=se, ci_low=lo, ci_high=hi,
        prediction=1 / B, prediction_kind="guessing baseline 1/B",
        analytic_bound=1 / B, bound_kind="guessing_baseline",
        bound_respected=rate <= 1 / B + 3 * se,
        regime_valid=regime,
        extras={"B": B, "c": c},
    )


def _distinct_bits(rng: np.random.Generator, length: int, count: int) -> list[int]:
    if length <= 62:
        return [int(v) for v in rng.choice(1 << length, size=count, replace=False)]
    out: list[int] = []
    seen = set()
    while len(out) < count:
        v = random_bits_array(rng, length, 1)[0]
        if v not in seen:
            seen.add(v)
            out.append(v)
    return out
