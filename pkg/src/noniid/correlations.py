"""Core probability objects: alphabets, behaviors, transcripts, frequencies, witnesses.

A *behavior* is a conditional distribution P(a|x) over finite alphabets and is
the single-round description of a device.  Multi-round (possibly
history-dependent) descriptions are built on top of it, see
:class:`NRoundBehavior`.

Composite outputs such as a triple (a1, a2, a3) are flattened row-major:
``index = a1 * (A2 * A3) + a2 * A3 + a3``.  The same convention applies to any
tuple of symbols and is what all file formats and tables use.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Alphabet",
    "AlphabetMismatch",
    "Behavior",
    "BehaviorError",
    "FrequencyTable",
    "LinearWitness",
    "NRoundBehavior",
    "NegativeEntry",
    "NotNormalized",
    "ProductBehavior",
    "Transcript",
    "evaluate_witness",
    "flatten_symbols",
    "frequency_estimate",
    "iid_behavior",
    "l1_distance",
    "load_behavior",
    "product_behavior",
    "save_behavior",
    "unflatten_symbol",
    "validate_behavior",
]

NORMALIZATION_TOL = 1e-12
FILE_NORMALIZATION_TOL = 1e-9


class AlphabetMismatch(ValueError):
    """Two objects that must share an alphabet do not."""


class BehaviorError(ValueError):
    """A probability table violates the behavior invariants."""


@dataclass(frozen=True)
class Alphabet:
    """Input/output symbol ranges of a single device use.

    ``input_size`` may be 1 (no-input scenarios use a single dummy input).
    Composite symbols are flattened row-major, see :func:`flatten_symbols`.
    """

    input_size: int
    output_size: int

    def __post_init__(self):
        if self.input_size < 1:
            raise ValueError(f"input_size must be >= 1, got {self.input_size}")
        if self.output_size < 2:
            raise ValueError(f"output_size must be >= 2, got {self.output_size}")

    @property
    def n_cells(self) -> int:
        return self.input_size * self.output_size


def flatten_symbols(parts: Sequence[int], sizes: Sequence[int]) -> int:
    """Row-major index of a composite symbol, e.g. (a1,a2,a3) -> a."""
    if len(parts) != len(sizes):
        raise ValueError("parts and sizes must have equal length")
    idx = 0
    for p, s in zip(parts, sizes):
        if not 0 <= p < s:
            raise ValueError(f"symbol {p} out of range [0, {s})")
        idx = idx * s + p
    return idx


def unflatten_symbol(idx: int, sizes: Sequence[int]) -> tuple:
    """Inverse of :func:`flatten_symbols`."""
    parts = []
    for s in reversed(sizes):
        parts.append(idx % s)
        idx //= s
    if idx:
        raise ValueError("index out of range for the given sizes")
    return tuple(reversed(parts))


@dataclass(frozen=True)
class NegativeEntry:
    """Violation report: probs(a, x) < 0."""

    a: int
    x: int
    value: float


@dataclass(frozen=True)
class NotNormalized:
    """Violation report: column x sums to 1 + deficit instead of 1."""

    x: int
    deficit: float


def _is_exact(table) -> bool:
    return any(isinstance(v, (Fraction, int)) and not isinstance(v, bool) for v in table.flat) and all(
        isinstance(v, (Fraction, int)) for v in table.flat
    )


class Behavior:
    """A conditional distribution P(a|x), stored as a table indexed (a, x).

    Entries may be floats or :class:`fractions.Fraction` (exact mode); exact
    tables are preserved so that multi-round transcript probabilities can be
    computed without rounding.
    """

    def __init__(self, alphabet: Alphabet, probs):
        table = np.asarray(probs)
        if table.shape != (alphabet.output_size, alphabet.input_size):
            raise BehaviorError(
                f"probs shape {table.shape} != (A, X) = "
                f"({alphabet.output_size}, {alphabet.input_size})"
            )
        self.alphabet = alphabet
        self.exact = table.dtype == object and _is_exact(table)
        if not self.exact:
            table = table.astype(float)
        table.setflags(write=False)
        self.probs = table
        violations = validate_behavior(self)
        if violations:
            raise BehaviorError("; ".join(repr(v) for v in violations))

    # -- constructors ------------------------------------------------------

    @classmethod
    def uniform(cls, alphabet: Alphabet, exact: bool = False) -> "Behavior":
        if exact:
            p = np.full((alphabet.output_size, alphabet.input_size), Fraction(1, alphabet.output_size), dtype=object)
        else:
            p = np.full((alphabet.output_size, alphabet.input_size), 1.0 / alphabet.output_size)
        return cls(alphabet, p)

    @classmethod
    def deterministic(cls, alphabet: Alphabet, outputs, exact: bool = False) -> "Behavior":
        """Point mass: output ``outputs[x]`` (or a constant) for each input."""
        if np.isscalar(outputs):
            outputs = [outputs] * alphabet.input_size
        if exact:
            p = np.zeros((alphabet.output_size, alphabet.input_size), dtype=object)
            p[:] = Fraction(0)
        else:
            p = np.zeros((alphabet.output_size, alphabet.input_size))
        for x, a in enumerate(outputs):
            p[a, x] = Fraction(1) if exact else 1.0
        return cls(alphabet, p)

    @classmethod
    def from_outcome_masses(cls, alphabet: Alphabet, masses: dict, exact: bool = False) -> "Behavior":
        """No-input behavior from a sparse {output index: mass} map."""
        if alphabet.input_size != 1:
            raise BehaviorError("from_outcome_masses requires a single-input alphabet")
        if exact:
            p = np.zeros((alphabet.output_size, 1), dtype=object)
            p[:] = Fraction(0)
        else:
            p = np.zeros((alphabet.output_size, 1))
        for a, m in masses.items():
            p[a, 0] = m
        return cls(alphabet, p)

    # -- views -------------------------------------------------------------

    def as_float(self) -> np.ndarray:
        return self.probs.astype(float)

    def column(self, x: int):
        return self.probs[:, x]

    def __repr__(self):
        return f"Behavior(X={self.alphabet.input_size}, A={self.alphabet.output_size}, exact={self.exact})"

    def __eq__(self, other):
        if not isinstance(other, Behavior):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.probs, other.probs)


def validate_behavior(behavior: Behavior) -> list:
    """Check nonnegativity and per-input normalization.

    Returns an empty list when the table is a valid behavior, otherwise a
    list of :class:`NegativeEntry` / :class:`NotNormalized` reports.
    """
    violations = []
    table = behavior.probs
    A, X = table.shape
    for x in range(X):
        for a in range(A):
            v = table[a, x]
            if v < 0:
                violations.append(NegativeEntry(a, x, float(v)))
        total = sum(table[a, x] for a in range(A)) if behavior.exact else float(table[:, x].sum())
        deficit = total - 1
        if behavior.exact:
            if deficit != 0:
                violations.append(NotNormalized(x, float(deficit)))
        elif abs(deficit) > NORMALIZATION_TOL:
            violations.append(NotNormalized(x, float(deficit)))
    return violations


class Transcript:
    """An ordered record of (input, output) rounds."""

    __slots__ = ("xs", "outputs", "_arrays")

    def __init__(self, xs: Sequence[int] = (), outputs: Sequence[int] = ()):
        if len(xs) != len(outputs):
            raise ValueError("inputs and outputs must have equal length")
        self.xs = tuple(int(v) for v in xs)
        self.outputs = tuple(int(v) for v in outputs)
        self._arrays = None

    def __len__(self):
        return len(self.xs)

    @property
    def rounds(self) -> list[tuple[int, int]]:
        return list(zip(self.xs, self.outputs))

    def extended(self, x: int, a: int) -> "Transcript":
        return Transcript(self.xs + (x,), self.outputs + (a,))

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self._arrays is None:
            self._arrays = (
                np.asarray(self.xs, dtype=np.int64),
                np.asarray(self.outputs, dtype=np.int64),
            )
        return self._arrays

    def __eq__(self, other):
        if not isinstance(other, Transcript):
            return NotImplemented
        return self.xs == other.xs and self.outputs == other.outputs

    def __hash__(self):
        return hash((self.xs, self.outputs))

    def __repr__(self):
        return f"Transcript({list(zip(self.xs, self.outputs))})"


@dataclass
class FrequencyTable:
    """Empirical counts and per-input conditional frequencies of a transcript."""

    alphabet: Alphabet
    counts: np.ndarray                 # (A, X) integers
    estimate: np.ndarray               # (A, X); columns with zero count are 0
    undefined_inputs: frozenset[int]   # inputs never used

    def input_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def as_behavior(self) -> Behavior:
        if self.undefined_inputs:
            raise ValueError(f"inputs never sampled: {sorted(self.undefined_inputs)}")
        return Behavior(self.alphabet, self.estimate)


def frequency_estimate(transcript: Transcript, alphabet: Alphabet) -> FrequencyTable:
    """Per-input empirical conditionals from a transcript.

    Inputs that never occur are reported in ``undefined_inputs`` and their
    estimate column is left at zero.
    """
    A, X = alphabet.output_size, alphabet.input_size
    xs, outs = transcript.as_arrays()
    if len(xs) and (xs.min() < 0 or xs.max() >= X or outs.min() < 0 or outs.max() >= A):
        raise ValueError("transcript symbol out of alphabet range")
    flat = np.bincount(xs * A + outs, minlength=A * X) if len(xs) else np.zeros(A * X, dtype=np.int64)
    counts = flat.reshape(X, A).T.copy()
    totals = counts.sum(axis=0)
    estimate = np.zeros((A, X))
    used = totals > 0
    estimate[:, used] = counts[:, used] / totals[used]
    undefined = frozenset(int(x) for x in np.nonzero(~used)[0])
    return FrequencyTable(alphabet, counts, estimate, undefined)


def _require_same_alphabet(P: Behavior, Q: Behavior):
    if P.alphabet != Q.alphabet:
        raise AlphabetMismatch(f"{P.alphabet} != {Q.alphabet}")


def l1_distance(P: Behavior, Q: Behavior) -> float:
    """Worst-case-input l1 distance: max over x of sum_a |P(a|x) - Q(a|x)|."""
    _require_same_alphabet(P, Q)
    diff = np.abs(P.as_float() - Q.as_float())
    return float(diff.sum(axis=0).max())


@dataclass(frozen=True)
class LinearWitness:
    """A linear functional F(P) = sum_{a,x} coeffs(a,x) * input_weights(x) * P(a|x).

    ``alpha`` is the bound the functional satisfies on the model set;
    ``score_range`` = (m, M) must bracket every coefficient and is what the
    sequential test in :mod:`noniid.hypothesis` uses to scale its threshold.
    """

    alphabet: Alphabet
    coeffs: np.ndarray
    alpha: float
    score_range: tuple[float, float]
    input_weights: np.ndarray = None

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.shape != (self.alphabet.output_size, self.alphabet.input_size):
            raise ValueError("coeffs shape must be (A, X)")
        object.__setattr__(self, "coeffs", coeffs)
        if self.input_weights is None:
            w = np.full(self.alphabet.input_size, 1.0 / self.alphabet.input_size)
        else:
            w = np.asarray(self.input_weights, dtype=float)
            if w.shape != (self.alphabet.input_size,) or w.min() < 0 or abs(w.sum() - 1) > NORMALIZATION_TOL:
                raise ValueError("input_weights must be a distribution over inputs")
        object.__setattr__(self, "input_weights", w)
        m, M = self.score_range
        if coeffs.min() < m - 1e-15 or coeffs.max() > M + 1e-15:
            raise ValueError(f"score_range [{m}, {M}] does not bracket the coefficients")

    @property
    def width(self) -> float:
        m, M = self.score_range
        return M - m


def evaluate_witness(F: LinearWitness, P: Behavior) -> float:
    """Value of the witness functional on a behavior."""
    if F.alphabet != P.alphabet:
        raise AlphabetMismatch(f"{F.alphabet} != {P.alphabet}")
    return float((F.coeffs * F.input_weights[None, :] * P.as_float()).sum())


class NRoundBehavior:
    """History-conditioned multi-round behavior.

    Subclasses provide ``marginal(k, history)``: the (A, X) conditional
    output table of round ``k`` (0-based) given the transcript so far.
    """

    def __init__(self, alphabet: Alphabet, n: int):
        self.alphabet = alphabet
        self.n = n

    def marginal(self, k: int, history: Transcript) -> np.ndarray:
        raise NotImplementedError

    def transcript_probability(self, transcript: Transcript, input_policy=None):
        """Probability of a full transcript, optionally weighting inputs.

        Without a policy this is the product of the output marginals only
        (inputs taken as given).  Exact tables yield exact results.
        """
        if len(transcript) != self.n:
            raise ValueError(f"transcript length {len(transcript)} != n = {self.n}")
        prob = 1
        history = Transcript()
        for k, (x, a) in enumerate(transcript.rounds):
            table = self.marginal(k, history)
            p = table[a][x] if isinstance(table, list) else table[a, x]
            if input_policy is not None:
                p = p * input_policy.weights(k, history)[x]
            prob = prob * p
            history = history.extended(x, a)
        return prob


class ProductBehavior(NRoundBehavior):
    """Round-k marginal ignores history: independent per-round behaviors."""

    def __init__(self, behaviors: Sequence[Behavior]):
        if not behaviors:
            raise ValueError("need at least one behavior")
        alphabet = behaviors[0].alphabet
        for b in behaviors[1:]:
            if b.alphabet != alphabet:
                raise AlphabetMismatch("product components must share one alphabet")
        super().__init__(alphabet, len(behaviors))
        self.behaviors = list(behaviors)
        self.exact = all(b.exact for b in behaviors)

    def marginal(self, k: int, history: Transcript) -> np.ndarray:
        return self.behaviors[k].probs


class CallableBehavior(NRoundBehavior):
    """Adapter for arbitrary memory behaviors given as a marginal function."""

    def __init__(self, alphabet: Alphabet, n: int, marginal_fn: Callable[[int, Transcript], np.ndarray]):
        super().__init__(alphabet, n)
        self._fn = marginal_fn
        self.exact = False

    def marginal(self, k: int, history: Transcript) -> np.ndarray:
        return self._fn(k, history)


def product_behavior(behaviors: Sequence[Behavior]) -> ProductBehavior:
    """n-round behavior with independent, per-round marginals."""
    return ProductBehavior(behaviors)


def iid_behavior(P: Behavior, n: int) -> ProductBehavior:
    """The n-fold product of a single behavior."""
    return ProductBehavior([P] * n)


# -- behavior files --------------------------------------------------------
#
# A behavior file is a TOML document with keys `input_size`, `output_size`
# and `probs`, the latter a flat row-major array of X*A reals with
# index = x * A + a.  Columns off normalization by more than 1e-9 are
# rejected; smaller deviations are renormalized.


def load_behavior(path) -> Behavior:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    for key in ("input_size", "output_size", "probs"):
        if key not in doc:
            raise BehaviorError(f"behavior file missing key `{key}`")
    X, A = int(doc["input_size"]), int(doc["output_size"])
    flat = np.asarray(doc["probs"], dtype=float)
    if flat.shape != (X * A,):
        raise BehaviorError(f"probs must hold {X * A} reals, got {flat.size}")
    table = flat.reshape(X, A).T
    sums = table.sum(axis=0)
    if np.any(np.abs(sums - 1) > FILE_NORMALIZATION_TOL):
        x = int(np.argmax(np.abs(sums - 1)))
        raise BehaviorError(f"input {x} not normalized: sum = {sums[x]!r}")
    if np.any(table < 0):
        raise BehaviorError("negative probability entry")
    table = table / sums[None, :]
    return Behavior(Alphabet(X, A), table)


def save_behavior(P: Behavior, path):
    A, X = P.alphabet.output_size, P.alphabet.input_size
    flat = P.as_float().T.reshape(-1)
    with open(path, "w") as fh:
        fh.write(f"input_size = {X}\n")
        fh.write(f"output_size = {A}\n")
        fh.write("probs = [\n")
        for x in range(X):
            row = ", ".join(repr(float(v)) for v in flat[x * A:(x + 1) * A])
            fh.write(f"  {row},\n")
        fh.write("]\n")
