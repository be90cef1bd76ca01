"""Two-copy state witness: swap operator, witness matrix, exposedness scan.

For a reference state rho the D^2 x D^2 matrix

    W = V + tr(rho^2) * I - 2 * (I (x) rho)

(V the swap of the two tensor factors) has the property that its expectation
on two copies of any state sigma equals tr{(sigma - rho)^2}, the squared
Frobenius distance.  The minimum over two-copy points is therefore 0,
attained only at sigma = rho: the pair (rho, rho (x) rho) is an exposed
point of the two-copy convex body, which is what makes mixed states
self-testable once two uses per round are allowed.

Tensor basis convention: |j>|k> maps to row-major index j * D + k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DensityMatrix",
    "DimensionMismatch",
    "ExposednessReport",
    "InvalidState",
    "exposedness_scan",
    "load_density",
    "permutation_operator",
    "random_density",
    "save_density",
    "witness_matrix",
    "witness_value",
]

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10


class InvalidState(ValueError):
    """The matrix is not a valid density matrix."""


class DimensionMismatch(ValueError):
    """Two states live in different dimensions."""


class DensityMatrix:
    """Complex Hermitian PSD matrix with unit trace."""

    __slots__ = ("matrix", "dim")

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidState(f"expected a square matrix, got shape {m.shape}")
        if np.abs(m - m.conj().T).max() > HERMITIAN_TOL:
            raise InvalidState("matrix is not Hermitian")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise InvalidState("matrix has a negative eigenvalue")
        if abs(m.trace() - 1) > TRACE_TOL:
            raise InvalidState(f"trace is {m.trace():.12g}, not 1")
        m.setflags(write=False)
        self.matrix = m
        self.dim = m.shape[0]

    @classmethod
    def pure(cls, amplitudes) -> "DensityMatrix":
        v = np.asarray(amplitudes, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    def purity(self) -> float:
        return float(np.real((self.matrix @ self.matrix).trace()))

    def frobenius_distance(self, other: "DensityMatrix") -> float:
        return float(np.linalg.norm(self.matrix - other.matrix))

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, purity={self.purity():.4f})"


def permutation_operator(dim: int) -> np.ndarray:
    """Swap of the two tensor factors: V |j>|k> = |k>|j>."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    V = np.zeros((dim * dim, dim * dim), dtype=complex)
    for j in range(dim):
        for k in range(dim):
            V[k * dim + j, j * dim + k] = 1.0
    return V


def witness_matrix(rho: DensityMatrix) -> np.ndarray:
    """W = V + tr(rho^2) I - 2 (I (x) rho); Hermitian by construction."""
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho)
    D = rho.dim
    W = permutation_operator(D) + rho.purity() * np.eye(D * D) - 2 * np.kron(np.eye(D), rho.matrix)
    assert np.abs(W - W.conj().T).max() < 1e-12
    return W


def witness_value(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """tr{W_rho (sigma (x) sigma)}, equal to tr{(sigma - rho)^2}."""
    if rho.dim != sigma.dim:
        raise DimensionMismatch(f"dims {rho.dim} != {sigma.dim}")
    value = np.trace(witness_matrix(rho) @ np.kron(sigma.matrix, sigma.matrix))
    if abs(value.imag) > 1e-10:
        raise ArithmeticError(f"witness value has imaginary part {value.imag:.3e}")
    return float(value.real)


def random_density(dim: int, rng: np.random.Generator) -> DensityMatrix:
    """Hilbert-Schmidt-random state via the Ginibre construction."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    M = G @ G.conj().T
    return DensityMatrix(M / M.trace())


def _batch_ginibre(dim: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    G = rng.standard_normal((samples, dim, dim)) + 1j * rng.standard_normal((samples, dim, dim))
    M = G @ np.conjugate(np.swapaxes(G, 1, 2))
    return M / np.trace(M, axis1=1, axis2=2)[:, None, None]


def _batch_values(W: np.ndarray, states: np.ndarray) -> np.ndarray:
    # tr{W (s (x) s)} = sum_{ijkl} W[(ij),(kl)] s[k,i] s[l,j]
    D = states.shape[1]
    W4 = W.reshape(D, D, D, D)
    vals = np.einsum("ijkl,nki,nlj->n", W4, states, states, optimize=True)
    return vals


@dataclass
class ExposednessReport:
    """Scan summary: the witness floor and how isolated the target is."""

    min_value: float
    argmin: DensityMatrix
    argmin_distance: float         # Frobenius distance of the argmin from the target
    min_is_target: bool
    second_smallest: float
    identity_max_error: float      # max |value - squared Frobenius distance|
    samples: int

    @property
    def gap(self) -> float:
        return self.second_smallest - self.min_value


def exposedness_scan(rho: DensityMatrix, samples: int, rng: np.random.Generator,
                     batch: int = 4096) -> ExposednessReport:
    """Evaluate the witness on random states plus the target itself.

    The target always scores (numerically) zero while every sampled state
    scores its squared Frobenius distance from the target, so the minimum
    sits strictly at the target: the defining property of an exposed point.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    D = rho.dim
    W = witness_matrix(rho)

    max_err = 0.0
    all_vals = []
    batch_best: list[tuple[float, np.ndarray]] = []
    target_value = float(_batch_values(W, rho.matrix[None, :, :]).real[0])
    remaining = samples
    while remaining > 0:
        m = min(batch, remaining)
        states = _batch_ginibre(D, m, rng)
        vals = _batch_values(W, states)
        if np.abs(vals.imag).max() > 1e-10:
            raise ArithmeticError("witness values drifted off the real axis")
        vals = vals.real
        dists2 = (np.abs(states - rho.matrix[None, :, :]) ** 2).sum(axis=(1, 2))
        max_err = max(max_err, float(np.abs(vals - dists2).max()))
        i = int(np.argmin(vals))
        batch_best.append((float(vals[i]), states[i]))
        all_vals.append(vals)
        remaining -= m

    max_err = max(max_err, abs(target_value))
    values = np.concatenate([np.asarray([target_value])] + all_vals)
    order = np.argsort(values)
    min_value = float(values[order[0]])
    second = float(values[order[1]]) if len(values) > 1 else np.inf
    min_is_target = order[0] == 0
    if min_is_target:
        argmin = rho
    else:
        argmin = DensityMatrix(min(batch_best, key=lambda t: t[0])[1])
    return ExposednessReport(
        min_value=min_value,
        argmin=argmin,
        argmin_distance=argmin.frobenius_distance(rho),
        min_is_target=bool(min_is_target),
        second_smallest=second,
        identity_max_error=max_err,
        samples=samples,
    )


# -- matrix files: dimension header then row-major "re im" pairs ---------------


def save_density(rho: DensityMatrix, path):
    with open(path, "w") as fh:
        fh.write(f"{rho.dim}\n")
        for row in rho.matrix:
            for v in row:
                fh.write(f"{float(v.real)!r} {float(v.imag)!r}\n")


def load_density(path) -> DensityMatrix:
    with open(path) as fh:
        tokens = fh.read().split()
    if not tokens:
        raise InvalidState("empty matrix file")
    D = int(tokens[0])
    values = [float(t) for t in tokens[1:]]
    if len(values) != 2 * D * D:
        raise InvalidState(f"expected {2 * D * D} reals after the header, got {len(values)}")
    flat = np.asarray(values[0::2]) + 1j * np.asarray(values[1::2])
    return DensityMatrix(flat.reshape(D, D))
