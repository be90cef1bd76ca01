"""Binary hypothesis tests: exact acceptance, Monte Carlo, K-sigma, martingale.

A test is a prescription for choosing the next input from the history plus a
final decision probability in [0, 1].  The acceptance probability of a
multi-round behavior is the sum over all transcripts of the product of
output marginals, input-policy weights and the final decision; that sum is
linear in the behavior, which is what makes memory attacks on non-convex
membership tests possible in the first place.

Exact acceptance is duck-typed over the number system: feed it behaviors,
policies and decisions built from :class:`fractions.Fraction` and the result
is exact; feed floats and it is ordinary double precision.

Variable-length protocols are encoded with an *absorbing input*: once the
policy emits it, the device is no longer queried and a dummy output 0 is
recorded for the remaining rounds.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .correlations import (
    Alphabet,
    Behavior,
    FrequencyTable,
    LinearWitness,
    NRoundBehavior,
    Transcript,
    frequency_estimate,
    iid_behavior,
)
from .devices import DeterministicStrategy, DeviceModel, derive_rng, iid_device

__all__ = [
    "AbsorbingPolicy",
    "FunctionTest",
    "HypothesisTest",
    "IIDInputPolicy",
    "KSigmaTest",
    "MartingaleTest",
    "SearchSpaceTooLarge",
    "StateSpaceTooLarge",
    "TabularTest",
    "TestFamilyRow",
    "TestReport",
    "UndefinedFrequency",
    "UnboundedScore",
    "acceptance_of",
    "enumerate_deterministic_max",
    "exact_acceptance",
    "ksigma_frequency_test",
    "martingale_witness_test",
    "monte_carlo_acceptance",
    "verify_test_family",
    "wilson_interval",
]

STATE_SPACE_LIMIT = 10**7


class StateSpaceTooLarge(ValueError):
    """(A*X)^n exceeds the exact-summation budget."""


class SearchSpaceTooLarge(ValueError):
    """The deterministic-strategy space exceeds the enumeration budget."""


class UndefinedFrequency(ValueError):
    """The witness needs an input that was never sampled."""

    def __init__(self, x):
        super().__init__(f"input {x} was never sampled but the witness needs it")
        self.x = x


class UnboundedScore(ValueError):
    """A per-round score falls outside the declared score range."""


# -- input policies ----------------------------------------------------------


class InputPolicy:
    """Per-round input distribution, conditioned on the history."""

    history_free = False

    def weights(self, k: int, history: Transcript) -> Sequence:
        raise NotImplementedError


class IIDInputPolicy(InputPolicy):
    """Same input distribution every round, independent of the history."""

    history_free = True

    def __init__(self, dist: Sequence):
        self.dist = tuple(dist)
        total = sum(self.dist)
        if total != 1 and abs(float(total) - 1) > 1e-12:
            raise ValueError("input distribution must sum to 1")

    def weights(self, k, history):
        return self.dist


class AbsorbingPolicy(InputPolicy):
    """Variable-length protocols: emit the absorbing input once stopped.

    ``stop(history)`` decides whether measurement should cease; after the
    absorbing input appears in the history it is emitted forever, making the
    decision measurable on the stopped prefix.
    """

    def __init__(self, base: InputPolicy, absorbing_index: int, stop: Callable[[Transcript], bool]):
        self.base = base
        self.absorbing_index = absorbing_index
        self.stop = stop

    def weights(self, k, history):
        absorbed = self.absorbing_index in history.xs or self.stop(history)
        base_w = self.base.weights(k, history)
        w = list(base_w) + [0] * (self.absorbing_index + 1 - len(base_w))
        if absorbed:
            w = [0] * (self.absorbing_index + 1)
            w[self.absorbing_index] = 1
        return w


# -- test objects ------------------------------------------------------------


class HypothesisTest:
    """An n-round binary test: input policy plus final decision.

    ``decision(history)`` returns the probability of outcome 1 (null
    rejected).  ``statistic`` and ``trajectory`` are optional hooks used for
    reporting and trace files.  Tests whose decision depends on the
    transcript only through the outcome counts may set ``exchangeable`` so
    the strategy enumeration can memoize decisions per count vector.
    """

    exchangeable = False

    def __init__(self, n: int, alphabet: Alphabet, input_policy: InputPolicy = None,
                 descriptor: str = "test", absorbing_input: int = None):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self.alphabet = alphabet
        if input_policy is None:
            if alphabet.input_size == 1:
                input_policy = IIDInputPolicy((1,))
            else:
                input_policy = IIDInputPolicy(tuple(1.0 / alphabet.input_size for _ in range(alphabet.input_size)))
        self.input_policy = input_policy
        self.descriptor = descriptor
        self.absorbing_input = absorbing_input

    def decision(self, history: Transcript):
        raise NotImplementedError

    def statistic(self, history: Transcript):
        return None

    def trajectory(self, history: Transcript):
        """Optional per-round (statistics, pvalues) arrays for traces."""
        return None

    @property
    def input_range(self) -> int:
        extra = 1 if self.absorbing_input is not None else 0
        return self.alphabet.input_size + extra


class FunctionTest(HypothesisTest):
    """Test whose decision (and optional statistic) are plain callables."""

    def __init__(self, n, alphabet, decision_fn, input_policy=None, descriptor="function test",
                 statistic_fn=None, absorbing_input=None):
        super().__init__(n, alphabet, input_policy, descriptor, absorbing_input)
        self._decision_fn = decision_fn
        self._statistic_fn = statistic_fn

    def decision(self, history):
        return self._decision_fn(history)

    def statistic(self, history):
        return None if self._statistic_fn is None else self._statistic_fn(history)


class TabularTest(HypothesisTest):
    """Decision read from a table over full output sequences (X = 1).

    The table maps the tuple of outputs to the decision probability; missing entries
    default to 0.  Fraction-valued tables make the test exact.
    """

    def __init__(self, n, alphabet, table: dict, descriptor="tabular test"):
        if alphabet.input_size != 1:
            raise ValueError("tabular tests assume a single (dummy) input")
        super().__init__(n, alphabet, IIDInputPolicy((1,)), descriptor)
        self.table = dict(table)

    def decision(self, history):
        return self.table.get(history.outputs, 0)


# -- exact acceptance --------------------------------------------------------


def exact_acceptance(test: HypothesisTest, behavior: NRoundBehavior, *, state_space_limit: int = STATE_SPACE_LIMIT):
    """Acceptance probability as an exact sum over all length-n transcripts.

    Exact (Fraction) when every probability involved is exact.  Raises
    :class:`StateSpaceTooLarge` when (A * X)^n exceeds the budget.
    """
    n = test.n
    if behavior.n != n:
        raise ValueError(f"behavior has {behavior.n} rounds, test has {n}")
    if behavior.alphabet != test.alphabet:
        raise ValueError("behavior and test alphabets differ")
    A = test.alphabet.output_size
    x_range = test.input_range
    if (A * x_range) ** n > state_space_limit:
        raise StateSpaceTooLarge(f"(A*X)^n = {(A * x_range) ** n} exceeds {state_space_limit}")

    absorbing = test.absorbing_input

    def rec(k, history, weight):
        if k == n:
            return weight * test.decision(history)
        total = 0
        w = test.input_policy.weights(k, history)
        marginal = None
        for x in range(x_range):
            wx = w[x] if x < len(w) else 0
            if wx == 0:
                continue
            if absorbing is not None and x == absorbing:
                total += rec(k + 1, history.extended(x, 0), weight * wx)
                continue
            if marginal is None:
                marginal = behavior.marginal(k, history)
            for a in range(A):
                p = marginal[a, x]
                if p == 0:
                    continue
                total += rec(k + 1, history.extended(x, a), weight * wx * p)
        return total

    return rec(0, Transcript(), 1)


# -- Monte Carlo -------------------------------------------------------------


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phat = successes / trials
    denom = 1 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return (lo, hi)


@dataclass
class TestReport:
    """Monte Carlo acceptance estimate with a Wilson 95% interval."""

    test: str
    device: str
    n: int
    trials: int
    accepted: int
    accept_rate: float
    ci95: tuple[float, float]
    seed: int
    wall_time_s: float = 0.0
    statistics: Optional[np.ndarray] = None
    trace_path: Optional[str] = None

    def to_dict(self) -> dict:
        d = {
            "test": self.test,
            "device": self.device,
            "n": self.n,
            "trials": self.trials,
            "accepted": self.accepted,
            "accept_rate": self.accept_rate,
            "ci95": [self.ci95[0], self.ci95[1]],
            "seed": self.seed,
            "wall_time_s": self.wall_time_s,
        }
        if self.trace_path is not None:
            d["trace"] = self.trace_path
        return d


def _sample_inputs(policy_dist, n, rng):
    dist = np.asarray([float(v) for v in policy_dist])
    if dist.size == 1:
        return np.zeros(n, dtype=np.int64)
    cdf = np.cumsum(dist)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right").astype(np.int64)


def run_trial(test: HypothesisTest, device: DeviceModel, n: int, rng: np.random.Generator) -> Transcript:
    """One full experimental run, returning the transcript."""
    fast = (
        test.input_policy.history_free
        and getattr(device, "respond_rounds", None) is not None
        and test.absorbing_input is None
    )
    if fast:
        xs = _sample_inputs(test.input_policy.weights(0, Transcript()), n, rng)
        outs = device.respond_rounds(np.arange(n), xs, rng)
        return Transcript(xs, outs)
    history = Transcript()
    for k in range(n):
        w = test.input_policy.weights(k, history)
        x = int(_sample_inputs(w, 1, rng)[0]) if len(w) > 1 else 0
        if test.absorbing_input is not None and x == test.absorbing_input:
            a = 0
        else:
            a = device.respond(x, history, rng)
        history = history.extended(x, a)
    return history


def monte_carlo_acceptance(test: HypothesisTest, device: DeviceModel, n: int = None, trials: int = 1000,
                           master_seed: int = 0, collect_statistics: bool = False) -> TestReport:
    """Unbiased estimate of the acceptance probability over seeded trials.

    Trial t uses the independent stream derived from (master_seed, t), so
    results are reproducible and independent of any parallel split.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = test.n if n is None else n
    t0 = time.perf_counter()
    accepted = 0
    stats = np.full(trials, np.nan) if collect_statistics else None
    for t in range(trials):
        rng = derive_rng(master_seed, t)
        transcript = run_trial(test, device, n, rng)
        p = float(test.decision(transcript))
        if p >= 1.0:
            ok = True
        elif p <= 0.0:
            ok = False
        else:
            ok = rng.random() < p
        accepted += ok
        if collect_statistics:
            s = test.statistic(transcript)
            if s is not None:
                stats[t] = float(s)
    rate = accepted / trials
    return TestReport(
        test=test.descriptor,
        device=device.descriptor,
        n=n,
        trials=trials,
        accepted=accepted,
        accept_rate=rate,
        ci95=wilson_interval(accepted, trials),
        seed=master_seed,
        wall_time_s=time.perf_counter() - t0,
        statistics=stats,
    )


# -- the iid-designed K-sigma frequency test ---------------------------------


class KSigmaTest(HypothesisTest):
    """Reject the null when F of the observed frequencies clears alpha + K*sigma.

    ``witness`` is either a :class:`LinearWitness` or any callable of a
    :class:`FrequencyTable` (it may be non-linear).  sigma is a seeded
    nonparametric bootstrap of the transcript rows, stratified by input so
    every observed input keeps its sample size; stratified multinomial
    resampling of the per-input counts is used, which is equivalent in
    distribution and much cheaper.
    """

    def __init__(self, witness, alpha: float, K: float, input_dist, n: int, alphabet: Alphabet = None,
                 bootstrap_resamples: int = 200, bootstrap_seed: int = 0, descriptor: str = None):
        if K <= 0:
            raise ValueError("K must be > 0")
        if isinstance(witness, LinearWitness):
            alphabet = witness.alphabet
        elif alphabet is None:
            raise ValueError("a callable witness needs an explicit alphabet")
        if input_dist is None:
            if isinstance(witness, LinearWitness):
                input_dist = tuple(witness.input_weights)
            else:
                input_dist = tuple(1.0 / alphabet.input_size for _ in range(alphabet.input_size))
        policy = IIDInputPolicy(input_dist)
        super().__init__(n, alphabet, policy, descriptor or f"ksigma(alpha={alpha}, K={K})")
        self.witness = witness
        self.alpha = alpha
        self.K = K
        self.B = bootstrap_resamples
        self.bootstrap_seed = bootstrap_seed
        self.exchangeable = True  # the decision sees the transcript only through counts

    # a witness may expose `batch_values(estimates)` over (B, A, X) stacks
    def _value(self, ft: FrequencyTable) -> float:
        if isinstance(self.witness, LinearWitness):
            w = self.witness
            return float((w.coeffs * w.input_weights[None, :] * ft.estimate).sum())
        return float(self.witness(ft))

    def _check_defined(self, ft: FrequencyTable):
        if not ft.undefined_inputs:
            return
        if isinstance(self.witness, LinearWitness):
            w = self.witness
            for x in sorted(ft.undefined_inputs):
                if w.input_weights[x] > 0 and np.any(w.coeffs[:, x] != 0):
                    raise UndefinedFrequency(x)
        else:
            raise UndefinedFrequency(min(ft.undefined_inputs))

    def _bootstrap_sigma(self, ft: FrequencyTable) -> float:
        rng = derive_rng(self.bootstrap_seed)
        A, X = ft.counts.shape
        totals = ft.input_totals()
        estimates = np.zeros((self.B, A, X))
        for x in range(X):
            if totals[x] == 0:
                continue
            draws = rng.multinomial(totals[x], ft.counts[:, x] / totals[x], size=self.B)
            estimates[:, :, x] = draws / totals[x]
        if isinstance(self.witness, LinearWitness):
            w = self.witness
            values = np.einsum("ax,bax->b", w.coeffs * w.input_weights[None, :], estimates)
        elif hasattr(self.witness, "batch_values"):
            values = np.asarray(self.witness.batch_values(estimates, ft))
        else:
            values = np.array([
                self.witness(FrequencyTable(ft.alphabet, ft.counts, estimates[b], ft.undefined_inputs))
                for b in range(self.B)
            ])
        return float(values.std(ddof=1))

    def decision(self, history):
        ft = frequency_estimate(history, self.alphabet)
        self._check_defined(ft)
        sigma = self._bootstrap_sigma(ft)
        return 1.0 if self._value(ft) > self.alpha + self.K * sigma else 0.0

    def statistic(self, history):
        ft = frequency_estimate(history, self.alphabet)
        self._check_defined(ft)
        return self._value(ft)

    def trajectory(self, history):
        xs, outs = history.as_arrays()
        stats = np.full(len(xs), np.nan)
        for k in range(1, len(xs) + 1):
            ft = frequency_estimate(Transcript(xs[:k], outs[:k]), self.alphabet)
            if not ft.undefined_inputs:
                stats[k - 1] = self._value(ft)
        return stats, np.full(len(xs), np.nan)


def ksigma_frequency_test(witness, alpha: float, K: float, input_dist=None, n: int = 1000, **kwargs) -> KSigmaTest:
    """The standard iid-regime recipe: estimate, then demand K sigmas above alpha."""
    return KSigmaTest(witness, alpha, K, input_dist, n, **kwargs)


# -- the sound non-iid martingale test ----------------------------------------


class MartingaleTest(HypothesisTest):
    """Sequential witness test with an Azuma-Hoeffding guarantee.

    Per-round scores z(a, x) = coeffs(a, x) * w(x) / q(x) are importance-
    corrected so their conditional mean under any null round behavior is the
    witness value, hence at most alpha.  The centered sum is then a
    supermartingale with increments in a window of width M - m, and

        P[S_n >= (M - m) * sqrt(n * ln(1/eps) / 2)] <= eps

    under the null, *without* any iid assumption.  The reported p-value is
    exp(-2 * max(S_n, 0)^2 / (n * (M - m)^2)).
    """

    def __init__(self, witness: LinearWitness, epsilon: float, input_dist=None, n: int = 1000,
                 descriptor: str = None):
        if not 0 < epsilon < 1:
            raise ValueError("epsilon must be in (0, 1)")
        alphabet = witness.alphabet
        X = alphabet.input_size
        if input_dist is None:
            input_dist = witness.input_weights
        q = np.asarray([float(v) for v in input_dist])
        if q.shape != (X,) or q.min() < 0 or abs(q.sum() - 1) > 1e-12:
            raise ValueError("input_dist must be a distribution over inputs")
        m, M = witness.score_range
        if M <= m:
            raise ValueError("score_range must have positive width")
        w = witness.input_weights
        needed = (w > 0) & np.any(witness.coeffs != 0, axis=0)
        if np.any(needed & (q == 0)):
            x = int(np.nonzero(needed & (q == 0))[0][0])
            raise ValueError(f"input {x} carries witness weight but is never sampled")
        scores = np.zeros_like(witness.coeffs)
        pos = q > 0
        scores[:, pos] = witness.coeffs[:, pos] * (w[pos] / q[pos])[None, :]
        if scores[:, pos].min() < m - 1e-12 or scores[:, pos].max() > M + 1e-12:
            raise UnboundedScore(
                f"corrected scores span [{scores[:, pos].min():.6g}, {scores[:, pos].max():.6g}], "
                f"outside the declared range [{m}, {M}]"
            )
        super().__init__(n, alphabet, IIDInputPolicy(tuple(q)),
                         descriptor or f"martingale(eps={epsilon})")
        self.witness = witness
        self.epsilon = epsilon
        self.scores = scores
        self.threshold = (M - m) * math.sqrt(n * math.log(1 / epsilon) / 2)
        self.exchangeable = True  # the score sum is permutation-invariant

    def _running_sum(self, history):
        xs, outs = history.as_arrays()
        return np.cumsum(self.scores[outs, xs] - self.witness.alpha)

    def statistic(self, history):
        xs, outs = history.as_arrays()
        return float((self.scores[outs, xs] - self.witness.alpha).sum())

    def decision(self, history):
        return 1.0 if self.statistic(history) >= self.threshold else 0.0

    def p_value(self, history) -> float:
        s = max(self.statistic(history), 0.0)
        width = self.witness.width
        return min(1.0, math.exp(-2 * s * s / (self.n * width * width)))

    def trajectory(self, history):
        s = self._running_sum(history)
        ks = np.arange(1, len(s) + 1)
        width = self.witness.width
        pv = np.minimum(1.0, np.exp(-2 * np.maximum(s, 0.0) ** 2 / (ks * width * width)))
        return s, pv


def martingale_witness_test(witness: LinearWitness, epsilon: float, input_dist=None, n: int = 1000,
                            **kwargs) -> MartingaleTest:
    """Hypothesis test that keeps its p-value guarantee against memory attacks."""
    return MartingaleTest(witness, epsilon, input_dist, n, **kwargs)


# -- deterministic-strategy enumeration ---------------------------------------


class _StrategyBehavior(NRoundBehavior):
    """Deterministic n-round behavior replaying fixed outputs (any input)."""

    def __init__(self, alphabet, outputs):
        super().__init__(alphabet, len(outputs))
        self.exact = True
        self._tables = []
        for a in outputs:
            t = np.zeros((alphabet.output_size, alphabet.input_size), dtype=object)
            t[:, :] = 0
            t[a, :] = 1
            self._tables.append(t)

    def marginal(self, k, history):
        return self._tables[k]


def _strategy_acceptance(test: HypothesisTest, strategy: DeterministicStrategy):
    outputs = strategy.flattened_outputs()
    if test.alphabet.input_size == 1 and test.absorbing_input is None:
        transcript = Transcript(np.zeros(len(outputs), dtype=np.int64), outputs)
        return test.decision(transcript)
    return exact_acceptance(test, _StrategyBehavior(test.alphabet, outputs))


def enumerate_deterministic_max(test: HypothesisTest, n: int = None, party_structure=(2, 2, 2),
                                tie_tol: float = 1e-9, search_limit: int = STATE_SPACE_LIMIT):
    """Exhaustive max of the acceptance over deterministic strategies.

    Returns (max_prob, argmax list); the list keeps lexicographic order of
    the strategy key (party 1 outputs, then party 2, then party 3) and
    collects every strategy within ``tie_tol`` of the maximum.  Decisions of
    exchangeable tests are memoized per outcome-count vector, which turns
    the 8^n transcript evaluations into one per count pattern.
    """
    n = test.n if n is None else n
    if n != test.n:
        raise ValueError("n must match the test length")
    total = 1
    for s in party_structure:
        total *= s**n
    if total > search_limit:
        raise SearchSpaceTooLarge(f"{total} strategies exceed the budget {search_limit}")
    A = int(np.prod(party_structure))
    if A != test.alphabet.output_size:
        raise ValueError("party_structure does not match the test output alphabet")

    memo = {} if (test.exchangeable and test.alphabet.input_size == 1
                  and test.absorbing_input is None) else None
    xs = np.zeros(n, dtype=np.int64)
    best = None
    argmax: list[tuple] = []
    per_party = [list(itertools.product(range(s), repeat=n)) for s in party_structure]
    places = np.cumprod([1] + list(party_structure[:0:-1]))[::-1]
    for seqs in itertools.product(*per_party):
        outputs = (np.asarray(seqs) * places[:, None]).sum(axis=0)
        if memo is not None:
            key = tuple(np.bincount(outputs, minlength=A))
            acc = memo.get(key)
            if acc is None:
                acc = test.decision(Transcript(xs, outputs))
                memo[key] = acc
        else:
            acc = _strategy_acceptance(test, DeterministicStrategy(seqs, tuple(party_structure)))
        if best is None or acc > best:
            best = acc
            argmax = [(acc, seqs)]
        elif acc >= best - tie_tol:
            argmax.append((acc, seqs))
    if best is None:
        raise ValueError("empty strategy space")
    winners = [DeterministicStrategy(seqs, tuple(party_structure))
               for acc, seqs in argmax if acc >= best - tie_tol]
    return best, winners


# -- family verification -------------------------------------------------------


def acceptance_of(test: HypothesisTest, model, trials: int = 1000, master_seed: int = 0,
                  exact_limit: int = 2 * 10**5):
    """Acceptance of a model under a test, exactly when cheap, else Monte Carlo.

    ``model`` may be a single-round :class:`Behavior` (used iid), an
    :class:`NRoundBehavior`, or a :class:`DeviceModel`.  Returns
    (value, method) with method in {"exact", "monte_carlo"}.
    """
    if isinstance(model, Behavior):
        size = (test.alphabet.output_size * test.input_range) ** test.n
        if size <= exact_limit:
            return float(exact_acceptance(test, iid_behavior(model, test.n))), "exact"
        return monte_carlo_acceptance(test, iid_device(model), trials=trials, master_seed=master_seed).accept_rate, "monte_carlo"
    if isinstance(model, NRoundBehavior):
        return float(exact_acceptance(test, model)), "exact"
    if isinstance(model, DeviceModel):
        return monte_carlo_acceptance(test, model, trials=trials, master_seed=master_seed).accept_rate, "monte_carlo"
    raise TypeError(f"cannot evaluate acceptance of {type(model)!r}")


@dataclass
class TestFamilyRow:
    n: int
    epsilon_estimate: float
    detection: float
    method: str


@dataclass
class TestFamilyReport:
    """Empirical p-value curve vs detection curve for a family of tests."""

    rows: list[TestFamilyRow] = field(default_factory=list)

    @property
    def epsilon_curve(self):
        return [(r.n, r.epsilon_estimate) for r in self.rows]

    @property
    def detection_curve(self):
        return [(r.n, r.detection) for r in self.rows]


def verify_test_family(tests: Sequence[HypothesisTest], null_models: Sequence, target: Behavior,
                       trials: int = 1000, master_seed: int = 0, exact_limit: int = 2 * 10**5) -> TestFamilyReport:
    """Empirical epsilon_n (max acceptance over supplied null models) and detection.

    The null maximization runs over the finite family supplied by the
    caller; suprema over all memory behaviors are out of reach and the
    report should be read accordingly.
    """
    report = TestFamilyReport()
    for test in tests:
        eps, methods = 0.0, set()
        for model in null_models:
            val, method = acceptance_of(test, model, trials=trials, master_seed=master_seed, exact_limit=exact_limit)
            eps = max(eps, val)
            methods.add(method)
        detection, method = acceptance_of(test, target, trials=trials, master_seed=master_seed, exact_limit=exact_limit)
        methods.add(method)
        report.rows.append(TestFamilyRow(test.n, eps, detection, "+".join(sorted(methods))))
    return report
