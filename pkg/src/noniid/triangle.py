"""Triangle-scenario assets: the shared-coin target, attacks, demos.

The scenario has three no-input parties with binary outcomes; joint outputs
are flattened party-major, index = a1 * 4 + a2 * 2 + a3.  The interesting
target is the *shared coin*: all three parties show the same fair coin, mass
1/2 on (0,0,0) and 1/2 on (1,1,1).  It lies in the convex hull of the
triangle-local set (mix the two constant points) but not in the set itself,
which is exactly the gap memory strategies exploit: a device that alternates
the two constant points reproduces the shared-coin frequencies without ever
leaving the local set in any single round.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .correlations import (
    Alphabet,
    Behavior,
    FrequencyTable,
    LinearWitness,
    Transcript,
    frequency_estimate,
)
from .devices import (
    ClockDevice,
    DeterministicStrategy,
    DeviceModel,
    TriangleLocalModel,
    derive_rng,
    iid_device,
    strategy_device,
    triangle_exact_distribution,
)
from .hypothesis import (
    FunctionTest,
    HypothesisTest,
    KSigmaTest,
    TestReport,
    enumerate_deterministic_max,
    ksigma_frequency_test,
    monte_carlo_acceptance,
    run_trial,
)

__all__ = [
    "AttackDemoConfig",
    "AttackDemoReport",
    "FreshSharedSequenceDevice",
    "TriangleScenario",
    "agreement_witness",
    "all_agree_point",
    "balanced_agreement_test",
    "best_local_approx",
    "closeness_score",
    "meta_strategy",
    "attack_demo",
    "shared_coin",
]


@dataclass(frozen=True)
class TriangleScenario:
    """Three no-input parties; outputs flattened party-major."""

    party_sizes: tuple[int, ...] = (2, 2, 2)

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(1, int(np.prod(self.party_sizes)))

    def flatten(self, outputs: Sequence[int]) -> int:
        idx = 0
        for a, s in zip(outputs, self.party_sizes):
            idx = idx * s + a
        return idx

    def unflatten(self, idx: int) -> tuple[int, ...]:
        parts = []
        for s in reversed(self.party_sizes):
            parts.append(idx % s)
            idx //= s
        return tuple(reversed(parts))


SCENARIO = TriangleScenario()
ALL_ZEROS = 0
ALL_ONES = 7


def shared_coin(exact: bool = False) -> Behavior:
    """Mass 1/2 on (0,0,0) and 1/2 on (1,1,1): perfect three-way agreement."""
    half = Fraction(1, 2) if exact else 0.5
    return Behavior.from_outcome_masses(SCENARIO.alphabet, {ALL_ZEROS: half, ALL_ONES: half}, exact=exact)


def all_agree_point(bit: int, exact: bool = False) -> Behavior:
    """Point mass on all parties outputting the same fixed bit."""
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    one = Fraction(1) if exact else 1.0
    return Behavior.from_outcome_masses(SCENARIO.alphabet, {ALL_ONES if bit else ALL_ZEROS: one}, exact=exact)


def agreement_witness(alpha: float = 0.9) -> LinearWitness:
    """Total mass on the two all-agree outcomes; 1 for the shared coin."""
    coeffs = np.zeros((8, 1))
    coeffs[ALL_ZEROS, 0] = 1.0
    coeffs[ALL_ONES, 0] = 1.0
    return LinearWitness(SCENARIO.alphabet, coeffs, alpha, (0.0, 1.0), np.array([1.0]))


class closeness_score:
    """1 - l1(observed frequencies, target): a nonlinear closeness witness."""

    def __init__(self, target: Behavior):
        if target.alphabet.input_size != 1:
            raise ValueError("closeness score assumes a no-input scenario")
        self.target = target.as_float()[:, 0]

    def __call__(self, ft: FrequencyTable) -> float:
        return 1.0 - float(np.abs(ft.estimate[:, 0] - self.target).sum())

    def batch_values(self, estimates: np.ndarray, ft: FrequencyTable) -> np.ndarray:
        return 1.0 - np.abs(estimates[:, :, 0] - self.target[None, :]).sum(axis=1)


def balanced_agreement_test(n: int) -> FunctionTest:
    """Accept iff every round all parties agree and the two agree-values balance."""

    def decide(history: Transcript) -> float:
        outs = np.asarray(history.outputs)
        agree = np.isin(outs, (ALL_ZEROS, ALL_ONES)).all()
        balanced = (outs == ALL_ZEROS).sum() == (outs == ALL_ONES).sum()
        return 1.0 if agree and balanced else 0.0

    test = FunctionTest(n, SCENARIO.alphabet, decide, descriptor="balanced agreement")
    test.exchangeable = True
    return test


# -- best local approximation -------------------------------------------------
#
# Block-coordinate search over (p1, p2, p3, q1, q2, q3) with multiplicative
# (exponentiated-gradient) updates; probability rows stay on their simplices
# by construction.  Distance mode anneals a smoothing width on the l1
# objective and finishes with a monotone squared-error refinement; witness
# mode is linear in each block, so blocks are moved straight to their best
# vertex until no block improves.

_BLOCKS = ("p1", "p2", "p3", "q1", "q2", "q3")

_EINSUM_PATHS: dict = {}


def _einsum(expr: str, *ops) -> np.ndarray:
    # einsum's per-call path search dominates these tiny contractions
    key = (expr, tuple(op.shape for op in ops))
    path = _EINSUM_PATHS.get(key)
    if path is None:
        path = np.einsum_path(expr, *ops, optimize="optimal")[0]
        _EINSUM_PATHS[key] = path
    return np.einsum(expr, *ops, optimize=path)


def _dist(v: dict) -> np.ndarray:
    return _einsum("i,j,k,ika,ijb,jkc->abc", v["p1"], v["p2"], v["p3"], v["q1"], v["q2"], v["q3"])


_GRAD_EXPRS = {
    "p1": ("j,k,ika,ijb,jkc,abc->i", ("p2", "p3", "q1", "q2", "q3")),
    "p2": ("i,k,ika,ijb,jkc,abc->j", ("p1", "p3", "q1", "q2", "q3")),
    "p3": ("i,j,ika,ijb,jkc,abc->k", ("p1", "p2", "q1", "q2", "q3")),
    "q1": ("i,j,k,ijb,jkc,abc->ika", ("p1", "p2", "p3", "q2", "q3")),
    "q2": ("i,j,k,ika,jkc,abc->ijb", ("p1", "p2", "p3", "q1", "q3")),
    "q3": ("i,j,k,ika,ijb,abc->jkc", ("p1", "p2", "p3", "q1", "q2")),
}


def _block_grad(v: dict, name: str, G: np.ndarray) -> np.ndarray:
    expr, names = _GRAD_EXPRS[name]
    return _einsum(expr, *(v[m] for m in names), G)


def _renormalize(z: np.ndarray) -> np.ndarray:
    z = np.maximum(z, 1e-300)
    return z / z.sum(axis=-1, keepdims=True)


def _random_blocks(rng, supports, output_sizes) -> dict:
    m = TriangleLocalModel.random(rng, supports, output_sizes)
    return {name: np.array(getattr(m, name)) for name in _BLOCKS}


def _blocks_to_model(v: dict) -> TriangleLocalModel:
    return TriangleLocalModel(**{name: v[name] for name in _BLOCKS})


def _l1(v: dict, target: np.ndarray) -> float:
    return float(np.abs(_dist(v) - target).sum())


def _distance_restart(target3: np.ndarray, rng, supports, output_sizes, iters: int,
                      improvement_tol: float = 1e-8) -> tuple[dict, float]:
    v = _random_blocks(rng, supports, output_sizes)
    best_v = {k: a.copy() for k, a in v.items()}
    best = _l1(v, target3)

    # stage 1: annealed, smoothed l1 with normalized multiplicative steps
    n1 = max(1, int(iters * 0.6))
    etas = np.geomspace(0.8, 0.02, n1)
    mus = np.geomspace(0.3, 1e-4, n1)
    stall = 0
    for t in range(n1):
        for name in _BLOCKS:
            diff = _dist(v) - target3
            G = np.clip(diff / mus[t], -1.0, 1.0)
            g = _block_grad(v, name, G)
            scale = np.abs(g).max()
            if scale > 0:
                v[name] = _renormalize(v[name] * np.exp(-etas[t] * g / scale))
        val = _l1(v, target3)
        if val < best - improvement_tol:
            best, best_v, stall = val, {k: a.copy() for k, a in v.items()}, 0
        else:
            stall += 1
            if stall > 40:
                break

    # stage 2: monotone squared-error refinement from the best point
    v = {k: a.copy() for k, a in best_v.items()}
    sq = float(((_dist(v) - target3) ** 2).sum())
    eta = {name: 0.5 for name in _BLOCKS}
    n2 = max(1, iters - n1)
    for _ in range(n2):
        sweep_start = sq
        for name in _BLOCKS:
            diff = _dist(v) - target3
            g = _block_grad(v, name, 2.0 * diff)
            for _try in range(8):
                cand = _renormalize(v[name] * np.exp(-eta[name] * g))
                old = v[name]
                v[name] = cand
                cand_sq = float(((_dist(v) - target3) ** 2).sum())
                if cand_sq < sq:
                    sq = cand_sq
                    eta[name] = min(eta[name] * 1.3, 50.0)
                    break
                v[name] = old
                eta[name] *= 0.5
        if sweep_start - sq <= 1e-16 * max(sweep_start, 1e-30):
            break
    val = _l1(v, target3)
    if val < best:
        best, best_v = val, v
    return best_v, best


def _witness_restart(coeffs3: np.ndarray, rng, supports, output_sizes, iters: int) -> tuple[dict, float]:
    # linear objective: move each block to its best vertex until stable
    v = _random_blocks(rng, supports, output_sizes)
    value = float((coeffs3 * _dist(v)).sum())
    for _ in range(iters):
        improved = False
        for name in _BLOCKS:
            g = _block_grad(v, name, coeffs3)
            vertex = np.zeros_like(v[name])
            idx = np.argmax(g, axis=-1)
            np.put_along_axis(vertex, idx[..., None], 1.0, axis=-1)
            old = v[name]
            v[name] = vertex
            cand = float((coeffs3 * _dist(v)).sum())
            if cand > value + 1e-12:
                value = cand
                improved = True
            else:
                v[name] = old
        if not improved:
            break
    return v, value


def best_local_approx(target: Behavior, objective: Union[str, LinearWitness] = "distance",
                      restarts: int = 50, iters: int = 500, seed: int = 0,
                      supports=(4, 4, 4)) -> tuple[TriangleLocalModel, float]:
    """Heuristic best triangle-local model for a target distribution.

    ``objective="distance"`` minimizes the l1 distance between the model's
    exact distribution and the target; passing a :class:`LinearWitness`
    maximizes the witness value instead.  Restart r runs on the stream
    derived from (seed, r); ties in the final value resolve to the lowest
    restart index, so results are reproducible.  The returned value is a
    heuristic bound only: an achieved distance, not a certified minimum.
    """
    if target.alphabet.input_size != 1:
        raise ValueError("the triangle scenario has no inputs")
    sizes = SCENARIO.party_sizes
    if target.alphabet.output_size != int(np.prod(sizes)):
        raise ValueError("target alphabet does not match the triangle scenario")
    if max(supports) > 8:
        raise ValueError("source supports larger than 8 are not supported")
    target3 = target.as_float()[:, 0].reshape(sizes)

    minimize = objective == "distance"
    if not minimize and not isinstance(objective, LinearWitness):
        raise ValueError("objective must be 'distance' or a LinearWitness")
    if not minimize:
        coeffs3 = (objective.coeffs * objective.input_weights[None, :])[:, 0].reshape(sizes)

    best_blocks, best_value = None, None
    for r in range(restarts):
        rng = derive_rng(seed, r)
        if minimize:
            blocks, value = _distance_restart(target3, rng, supports, sizes, iters)
            better = best_value is None or value < best_value - 1e-15
        else:
            blocks, value = _witness_restart(coeffs3, rng, supports, sizes, iters)
            better = best_value is None or value > best_value + 1e-15
        if better:
            best_blocks, best_value = blocks, value
    return _blocks_to_model(best_blocks), float(best_value)


# -- the coordination meta-strategy -------------------------------------------


def meta_strategy(test: HypothesisTest, n: int = None, party_structure=(2, 2, 2),
                  search_limit: int = 4 * 10**6) -> DeterministicStrategy:
    """First optimal deterministic strategy in lexicographic order.

    Separated parties that know the test can each compute this strategy
    locally and end up coordinated without communicating; it achieves the
    deterministic maximum, which equals the maximum over all behaviors.
    """
    _, winners = enumerate_deterministic_max(test, n, party_structure, search_limit=search_limit)
    return min(winners, key=lambda s: s.key())


# -- end-to-end demo -----------------------------------------------------------


@dataclass
class AttackDemoConfig:
    """Configuration of the comparative memory-attack demonstration."""

    witness: str = "agreement"        # "agreement" | "closeness"
    alpha: float = None               # default 0.9 (agreement) / 0.8 (closeness)
    K: float = 3.0
    n: int = 1000
    trials: int = 1000
    seed: int = 0
    meta_rounds: int = 4              # separate small-n test for the enumerated meta row
    restarts: int = 50
    iters: int = 500
    include: tuple[str, ...] = ("iid_pc", "clock", "clock_desync", "shared_sequence", "meta", "best_local")

    def resolved_alpha(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return 0.9 if self.witness == "agreement" else 0.8

    def make_test(self, n: int) -> KSigmaTest:
        alpha = self.resolved_alpha()
        if self.witness == "agreement":
            return ksigma_frequency_test(agreement_witness(alpha), alpha, self.K, n=n)
        if self.witness == "closeness":
            return ksigma_frequency_test(closeness_score(shared_coin()), alpha, self.K, n=n,
                                         alphabet=SCENARIO.alphabet)
        raise ValueError(f"unknown witness kind {self.witness!r}")


class FreshSharedSequenceDevice(DeviceModel):
    """A new uniform bit sequence per trial, replayed by all three parties.

    Drawing the shared bit lazily round by round is distributionally the
    same as pre-sharing the whole sequence, and lets one device instance
    serve every Monte Carlo trial.
    """

    descriptor = "shared_sequence(fresh)"

    def __init__(self):
        super().__init__(SCENARIO.alphabet)

    def respond(self, x, history, rng):
        return int(rng.integers(2)) * ALL_ONES

    def respond_rounds(self, ks, xs, rng):
        return rng.integers(2, size=len(ks)) * ALL_ONES


@dataclass
class AttackDemoRow:
    device: str
    report: TestReport
    counts: np.ndarray            # outcome counts of the first trial
    n: int
    note: str = ""


@dataclass
class AttackDemoReport:
    config: AttackDemoConfig
    rows: list[AttackDemoRow] = field(default_factory=list)
    best_local_distance: Optional[float] = None
    best_local_model: Optional[TriangleLocalModel] = None
    meta_strategy_bits: Optional[tuple] = None

    def row(self, device: str) -> AttackDemoRow:
        for r in self.rows:
            if r.device == device:
                return r
        raise KeyError(device)

    def to_dict(self) -> dict:
        d = {
            "witness": self.config.witness,
            "alpha": self.config.resolved_alpha(),
            "K": self.config.K,
            "n": self.config.n,
            "trials": self.config.trials,
            "seed": self.config.seed,
            "devices": {},
        }
        for r in self.rows:
            d["devices"][r.device] = {
                **r.report.to_dict(),
                "first_trial_counts": [int(c) for c in r.counts],
                "note": r.note,
            }
        if self.best_local_distance is not None:
            d["best_local_distance"] = self.best_local_distance
        if self.meta_strategy_bits is not None:
            d["meta_strategy"] = ["".join(str(b) for b in seq) for seq in self.meta_strategy_bits]
        return d


def _first_trial_counts(test, device, n, seed) -> np.ndarray:
    transcript = run_trial(test, device, n, derive_rng(seed, 0))
    return frequency_estimate(transcript, SCENARIO.alphabet).counts[:, 0]


def attack_demo(config: AttackDemoConfig = None, **overrides) -> AttackDemoReport:
    """Run the iid-designed test against iid, memory and best-local devices.

    Emits side-by-side accept rates and first-trial frequency counts.  The
    meta-strategy row replays the lexicographically first optimal strategy,
    enumerated at ``meta_rounds`` rounds (full-length enumeration is
    astronomically large); its row records the reduced round count.
    """
    if config is None:
        config = AttackDemoConfig(**overrides)
    test = config.make_test(config.n)
    report = AttackDemoReport(config=config)

    devices: list[tuple[str, DeviceModel, HypothesisTest, int, str]] = []
    for name in config.include:
        if name == "iid_pc":
            devices.append((name, iid_device(shared_coin()), test, config.n, ""))
        elif name == "clock":
            devices.append((name, ClockDevice((0, 0, 0)), test, config.n, ""))
        elif name == "clock_desync":
            devices.append((name, ClockDevice((1, 0, 0)), test, config.n, "player 1 out of step"))
        elif name == "shared_sequence":
            devices.append((name, FreshSharedSequenceDevice(), test, config.n, ""))
        elif name == "meta":
            small_test = config.make_test(config.meta_rounds)
            strat = meta_strategy(small_test, config.meta_rounds)
            report.meta_strategy_bits = strat.party_sequences
            devices.append((name, strategy_device(strat), small_test, config.meta_rounds,
                            f"enumerated at n={config.meta_rounds}"))
        elif name == "best_local":
            model, dist = best_local_approx(shared_coin(), "distance", restarts=config.restarts,
                                            iters=config.iters, seed=config.seed)
            report.best_local_distance = dist
            report.best_local_model = model
            devices.append((name, iid_device(triangle_exact_distribution(model)), test, config.n,
                            f"heuristic l1 distance {dist:.4f}"))
        else:
            raise ValueError(f"unknown device row {name!r}")

    for name, device, row_test, n, note in devices:
        mc = monte_carlo_acceptance(row_test, device, n=n, trials=config.trials,
                                    master_seed=config.seed, collect_statistics=True)
        counts = _first_trial_counts(row_test, device, n, config.seed)
        report.rows.append(AttackDemoRow(name, mc, counts, n, note))
    return report
