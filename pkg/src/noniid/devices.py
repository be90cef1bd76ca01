"""Device samplers: iid, scheduled, memory strategies and triangle-local models.

A device is anything with ``respond(x, history, rng) -> a``.  All devices
here are history-free in the sense that the output of round k depends only on
k and x, which lets the Monte Carlo engine use the vectorized
``respond_rounds`` path; adaptive devices that actually read the transcript
can be built with :class:`AdaptiveDevice` and fall back to the round loop.

No-input scenarios use a single dummy input (X = 1), so one test engine
serves Bell-type and network-type experiments alike.  Multi-party outputs
are flattened row-major, see :func:`noniid.correlations.flatten_symbols`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .correlations import (
    Alphabet,
    Behavior,
    Transcript,
    flatten_symbols,
)

__all__ = [
    "AdaptiveDevice",
    "ClockDevice",
    "DeterministicStrategy",
    "DeviceModel",
    "IIDDevice",
    "ScheduledDevice",
    "SequenceExhausted",
    "SharedSequenceDevice",
    "StrategyDevice",
    "SupportTooLarge",
    "TriangleLocalModel",
    "clock_device",
    "derive_rng",
    "iid_device",
    "load_triangle_model",
    "save_triangle_model",
    "load_strategy",
    "save_strategy",
    "shared_sequence_device",
    "strategy_device",
    "triangle_exact_distribution",
    "triangle_sample",
    "triangle_sample_batch",
]

EXACT_SUPPORT_LIMIT = 10**7


class SupportTooLarge(ValueError):
    """The source supports are too large for exact summation."""


class SequenceExhausted(RuntimeError):
    """A pre-shared sequence ran out of symbols."""


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible RNG stream for (master_seed, key...)."""
    return np.random.default_rng(np.random.SeedSequence((int(master_seed),) + tuple(int(k) for k in key)))


class DeviceModel:
    """Contract: ``respond(x, history, rng) -> a``.

    ``descriptor`` identifies the device in reports.  Subclasses that are
    history-free may implement ``respond_rounds(ks, xs, rng)`` returning all
    outputs at once for 0-based round indices ``ks``.
    """

    descriptor: str = "device"

    def __init__(self, alphabet: Alphabet):
        self.alphabet = alphabet

    def respond(self, x: int, history: Transcript, rng: np.random.Generator) -> int:
        raise NotImplementedError

    respond_rounds: Callable = None  # set by history-free subclasses


def _sample_column(column: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(column)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


class IIDDevice(DeviceModel):
    """Samples a fixed behavior, ignoring the history."""

    def __init__(self, behavior: Behavior):
        super().__init__(behavior.alphabet)
        self.behavior = behavior
        self._table = behavior.as_float()
        self.descriptor = f"iid(A={behavior.alphabet.output_size}, X={behavior.alphabet.input_size})"

    def respond(self, x, history, rng):
        return int(_sample_column(self._table[:, x], rng.random(1))[0])

    def respond_rounds(self, ks, xs, rng):
        u = rng.random(len(ks))
        if self.alphabet.input_size == 1:
            return _sample_column(self._table[:, 0], u)
        out = np.empty(len(ks), dtype=np.int64)
        for x in np.unique(xs):
            mask = xs == x
            out[mask] = _sample_column(self._table[:, x], u[mask])
        return out


class ScheduledDevice(DeviceModel):
    """Plays behavior P_k at round k; no history dependence."""

    def __init__(self, behaviors: Sequence[Behavior]):
        super().__init__(behaviors[0].alphabet)
        self.behaviors = list(behaviors)
        self._tables = [b.as_float() for b in behaviors]
        self.descriptor = f"scheduled({len(behaviors)} rounds)"

    def respond(self, x, history, rng):
        k = len(history)
        if k >= len(self._tables):
            raise SequenceExhausted(f"schedule has {len(self._tables)} rounds, round {k + 1} requested")
        return int(_sample_column(self._tables[k][:, x], rng.random(1))[0])

    def respond_rounds(self, ks, xs, rng):
        if max(ks) >= len(self._tables):
            raise SequenceExhausted(f"schedule has {len(self._tables)} rounds")
        u = rng.random(len(ks))
        return np.array(
            [_sample_column(self._tables[k][:, x], u[i : i + 1])[0] for i, (k, x) in enumerate(zip(ks, xs))],
            dtype=np.int64,
        )


class AdaptiveDevice(DeviceModel):
    """Arbitrary memory behavior from a response function of the full history."""

    def __init__(self, alphabet: Alphabet, respond_fn: Callable[[int, Transcript, np.random.Generator], int], name="adaptive"):
        super().__init__(alphabet)
        self._fn = respond_fn
        self.descriptor = name

    def respond(self, x, history, rng):
        return int(self._fn(x, history, rng))


def iid_device(P: Behavior) -> IIDDevice:
    """Device that plays the same behavior every round."""
    return IIDDevice(P)


# -- triangle-local models -------------------------------------------------


@dataclass
class TriangleLocalModel:
    """Three parties, three independent bipartite sources.

    Party 1 reads sources (1, 3), party 2 reads (1, 2), party 3 reads (2, 3);
    ``q1[l1, l3, a1]`` etc. are the response tables, ``p1..p3`` the source
    distributions.  Every distribution row must be normalized within 1e-12.
    """

    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    q1: np.ndarray  # (L1, L3, A1)
    q2: np.ndarray  # (L1, L2, A2)
    q3: np.ndarray  # (L2, L3, A3)

    def __post_init__(self):
        for name in ("p1", "p2", "p3", "q1", "q2", "q3"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        L1, L2, L3 = len(self.p1), len(self.p2), len(self.p3)
        for q, shape, name in (
            (self.q1, (L1, L3), "q1"),
            (self.q2, (L1, L2), "q2"),
            (self.q3, (L2, L3), "q3"),
        ):
            if q.ndim != 3 or q.shape[:2] != shape:
                raise ValueError(f"{name} must have shape ({shape[0]}, {shape[1]}, A), got {q.shape}")
        for name in ("p1", "p2", "p3"):
            p = getattr(self, name)
            if p.min() < 0 or abs(p.sum() - 1) > 1e-12:
                raise ValueError(f"{name} is not a distribution")
        for name in ("q1", "q2", "q3"):
            q = getattr(self, name)
            if q.min() < 0 or np.abs(q.sum(axis=2) - 1).max() > 1e-12:
                raise ValueError(f"{name} has a non-normalized response row")

    @property
    def supports(self) -> tuple[int, int, int]:
        return len(self.p1), len(self.p2), len(self.p3)

    @property
    def output_sizes(self) -> tuple[int, int, int]:
        return self.q1.shape[2], self.q2.shape[2], self.q3.shape[2]

    @classmethod
    def random(cls, rng: np.random.Generator, supports=(4, 4, 4), output_sizes=(2, 2, 2)) -> "TriangleLocalModel":
        """Dirichlet(1)-random model; handy for tests and optimizer restarts."""
        L1, L2, L3 = supports
        A1, A2, A3 = output_sizes
        return cls(
            p1=rng.dirichlet(np.ones(L1)),
            p2=rng.dirichlet(np.ones(L2)),
            p3=rng.dirichlet(np.ones(L3)),
            q1=rng.dirichlet(np.ones(A1), size=(L1, L3)),
            q2=rng.dirichlet(np.ones(A2), size=(L1, L2)),
            q3=rng.dirichlet(np.ones(A3), size=(L2, L3)),
        )


def triangle_sample(model: TriangleLocalModel, rng: np.random.Generator) -> tuple[int, int, int]:
    """One observation (a1, a2, a3) from the local model."""
    a = triangle_sample_batch(model, 1, rng)[0]
    return int(a[0]), int(a[1]), int(a[2])


def _sample_rows(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(rows, axis=1)
    cdf[:, -1] = 1.0
    return (cdf > rng.random(len(rows))[:, None]).argmax(axis=1)


def triangle_sample_batch(model: TriangleLocalModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent observations, shape (n, 3); each draws fresh sources."""
    l1 = _sample_column(model.p1, rng.random(n))
    l2 = _sample_column(model.p2, rng.random(n))
    l3 = _sample_column(model.p3, rng.random(n))
    a1 = _sample_rows(model.q1[l1, l3], rng)
    a2 = _sample_rows(model.q2[l1, l2], rng)
    a3 = _sample_rows(model.q3[l2, l3], rng)
    return np.stack([a1, a2, a3], axis=1)


def triangle_exact_distribution(model: TriangleLocalModel) -> Behavior:
    """Exact P(a1, a2, a3) by summing out the three sources.

    Flattened row-major over (a1, a2, a3) into a no-input behavior.
    """
    L1, L2, L3 = model.supports
    if L1 * L2 * L3 > EXACT_SUPPORT_LIMIT:
        raise SupportTooLarge(f"|L1|*|L2|*|L3| = {L1 * L2 * L3} exceeds {EXACT_SUPPORT_LIMIT}")
    P = np.einsum(
        "i,j,k,ika,ijb,jkc->abc",
        model.p1, model.p2, model.p3, model.q1, model.q2, model.q3,
        optimize=True,
    )
    flat = P.reshape(-1)
    flat = flat / flat.sum()
    return Behavior(Alphabet(1, flat.size), flat[:, None])


class TriangleSamplingDevice(DeviceModel):
    """No-input device that draws fresh sources every round (iid in law)."""

    def __init__(self, model: TriangleLocalModel):
        sizes = model.output_sizes
        super().__init__(Alphabet(1, int(np.prod(sizes))))
        self.model = model
        self._places = np.array([sizes[1] * sizes[2], sizes[2], 1])
        self.descriptor = f"triangle_local(supports={model.supports})"

    def respond(self, x, history, rng):
        a = triangle_sample(self.model, rng)
        return flatten_symbols(a, self.model.output_sizes)

    def respond_rounds(self, ks, xs, rng):
        return triangle_sample_batch(self.model, len(ks), rng) @ self._places


# -- deterministic memory strategies ----------------------------------------


@dataclass(frozen=True)
class DeterministicStrategy:
    """Fixed per-party output sequences, one symbol per round.

    In a no-input scenario, any deterministic memory strategy reduces to
    such sequences: with nothing to react to, what a party outputs at round
    k is a constant of the strategy.
    """

    party_sequences: tuple[tuple[int, ...], ...]
    party_sizes: tuple[int, ...] = (2, 2, 2)

    def __post_init__(self):
        seqs = tuple(tuple(int(a) for a in s) for s in self.party_sequences)
        object.__setattr__(self, "party_sequences", seqs)
        if len(seqs) != len(self.party_sizes):
            raise ValueError("one sequence per party required")
        n = len(seqs[0])
        for seq, size in zip(seqs, self.party_sizes):
            if len(seq) != n:
                raise ValueError("all party sequences must have equal length")
            if any(not 0 <= a < size for a in seq):
                raise ValueError("strategy symbol out of the party alphabet")

    @property
    def n_rounds(self) -> int:
        return len(self.party_sequences[0])

    def flattened_outputs(self) -> np.ndarray:
        """Joint output index per round, row-major over parties."""
        return np.array(
            [flatten_symbols([s[k] for s in self.party_sequences], self.party_sizes) for k in range(self.n_rounds)],
            dtype=np.int64,
        )

    def key(self) -> tuple[int, ...]:
        """Lexicographic sort key: party 1 bits, then party 2, then party 3."""
        return tuple(a for seq in self.party_sequences for a in seq)


class _FixedOutputDevice(DeviceModel):
    def __init__(self, outputs: np.ndarray, alphabet: Alphabet, descriptor: str):
        super().__init__(alphabet)
        self._outputs = np.asarray(outputs, dtype=np.int64)
        self.descriptor = descriptor

    def respond(self, x, history, rng):
        k = len(history)
        if k >= len(self._outputs):
            raise SequenceExhausted(f"only {len(self._outputs)} rounds available, round {k + 1} requested")
        return int(self._outputs[k])

    def respond_rounds(self, ks, xs, rng):
        if max(ks) >= len(self._outputs):
            raise SequenceExhausted(f"only {len(self._outputs)} rounds available")
        return self._outputs[np.asarray(ks)]


class ClockDevice(DeviceModel):
    """Each party flips an internal bit every round, starting from its offset.

    At round k (1-based) party i outputs ``offsets[i] XOR ((k - 1) % 2)``.
    With equal offsets and an even round count the empirical frequencies put
    exactly half the mass on all-zeros and half on all-ones.
    """

    def __init__(self, offsets: Sequence[int] = (0, 0, 0)):
        offsets = tuple(int(o) for o in offsets)
        if any(o not in (0, 1) for o in offsets):
            raise ValueError("offsets must be bits")
        super().__init__(Alphabet(1, 2 ** len(offsets)))
        sizes = (2,) * len(offsets)
        self._pattern = np.array(
            [flatten_symbols([o ^ parity for o in offsets], sizes) for parity in (0, 1)],
            dtype=np.int64,
        )
        self.descriptor = f"clock(offsets={offsets})"
        self.offsets = offsets

    def respond(self, x, history, rng):
        return int(self._pattern[len(history) % 2])

    def respond_rounds(self, ks, xs, rng):
        return self._pattern[np.asarray(ks) % 2]


class SharedSequenceDevice(_FixedOutputDevice):
    """All parties replay the same pre-shared bit sequence."""

    def __init__(self, bits: Sequence[int], n_parties: int = 3):
        bits = tuple(int(b) for b in bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError("shared sequence must be bits")
        sizes = (2,) * n_parties
        outputs = np.array([flatten_symbols([b] * n_parties, sizes) for b in bits], dtype=np.int64)
        super().__init__(outputs, Alphabet(1, 2**n_parties), f"shared_sequence(n={len(bits)})")
        self.bits = bits


class StrategyDevice(_FixedOutputDevice):
    """Replays the fixed output sequences of a deterministic strategy."""

    def __init__(self, strategy: DeterministicStrategy):
        alphabet = Alphabet(1, int(np.prod(strategy.party_sizes)))
        super().__init__(strategy.flattened_outputs(), alphabet, f"strategy(n={strategy.n_rounds})")
        self.strategy = strategy


def clock_device(offsets: Sequence[int] = (0, 0, 0)) -> ClockDevice:
    return ClockDevice(offsets)


def shared_sequence_device(bits: Sequence[int], n_parties: int = 3) -> SharedSequenceDevice:
    return SharedSequenceDevice(bits, n_parties)


def strategy_device(strategy: DeterministicStrategy) -> StrategyDevice:
    return StrategyDevice(strategy)


# -- model / strategy files --------------------------------------------------
#
# Triangle model files are TOML documents with `supports`, `outputs`,
# `p1..p3` and `q1..q3`; each q is flat row-major with
# index = (first_source * L_second + second_source) * A + a.
# Strategy files carry one output string per party: party1 = "0101", ...


def _toml():
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib


def load_triangle_model(path) -> TriangleLocalModel:
    with open(path, "rb") as fh:
        head = fh.read(64)
        fh.seek(0)
        if head.lstrip().startswith(b"{"):
            import json
            doc = json.load(fh)
        else:
            doc = _toml().load(fh)
    L1, L2, L3 = (int(v) for v in doc["supports"])
    A1, A2, A3 = (int(v) for v in doc.get("outputs", (2, 2, 2)))
    return TriangleLocalModel(
        p1=np.asarray(doc["p1"], dtype=float),
        p2=np.asarray(doc["p2"], dtype=float),
        p3=np.asarray(doc["p3"], dtype=float),
        q1=np.asarray(doc["q1"], dtype=float).reshape(L1, L3, A1),
        q2=np.asarray(doc["q2"], dtype=float).reshape(L1, L2, A2),
        q3=np.asarray(doc["q3"], dtype=float).reshape(L2, L3, A3),
    )


def _write_array(fh, name, values):
    vals = ", ".join(repr(float(v)) for v in np.asarray(values).reshape(-1))
    fh.write(f"{name} = [{vals}]\n")


def save_triangle_model(model: TriangleLocalModel, path):
    with open(path, "w") as fh:
        fh.write(f"supports = [{model.supports[0]}, {model.supports[1]}, {model.supports[2]}]\n")
        fh.write(f"outputs = [{model.output_sizes[0]}, {model.output_sizes[1]}, {model.output_sizes[2]}]\n")
        for name in ("p1", "p2", "p3", "q1", "q2", "q3"):
            _write_array(fh, name, getattr(model, name))


def load_strategy(path) -> DeterministicStrategy:
    with open(path, "rb") as fh:
        doc = _toml().load(fh)
    seqs = []
    i = 1
    while f"party{i}" in doc:
        seqs.append(tuple(int(c) for c in str(doc[f"party{i}"])))
        i += 1
    if not seqs:
        raise ValueError("strategy file names no parties")
    sizes = tuple(int(v) for v in doc.get("sizes", (2,) * len(seqs)))
    return DeterministicStrategy(tuple(seqs), sizes)


def save_strategy(strategy: DeterministicStrategy, path):
    with open(path, "w") as fh:
        for i, seq in enumerate(strategy.party_sequences, start=1):
            fh.write(f'party{i} = "{"".join(str(a) for a in seq)}"\n')
        fh.write(f"sizes = [{', '.join(str(s) for s in strategy.party_sizes)}]\n")
