"""Convex-hull membership with LP certificates, separation, extremality.

The solver is a self-contained primal simplex on the standard form
min c.x s.t. Ax = b, x >= 0, using Bland's rule (no cycling) and an optional
exact :class:`fractions.Fraction` pivot mode so certificates can be checked
without rounding.  Problems here are tiny (tens of variables), so a dense
tableau in plain Python is the simplest correct tool.

``membership`` answers P in conv(S)?  A feasible phase 1 yields convex
weights, pruned to at most (number of nonzero cells of P) + 1 components;
an infeasible one yields a Farkas vector that directly reads as a
separating functional: c(Q) <= alpha on all of S while c(P) > alpha.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .correlations import (
    Alphabet,
    AlphabetMismatch,
    Behavior,
    iid_behavior,
    product_behavior,
)
from .hypothesis import exact_acceptance

__all__ = [
    "ConvexDecomposition",
    "LPResult",
    "NotSeparable",
    "LinearityRow",
    "SeparatingFunctional",
    "is_extreme",
    "membership",
    "linearity_demo",
    "separating_functional",
    "solve_lp",
]

FEASIBILITY_TOL = 1e-9
DUALITY_GAP_TOL = 1e-8


class NotSeparable(ValueError):
    """Separation requested for a point inside the hull."""


# -- primal simplex -----------------------------------------------------------


@dataclass
class LPResult:
    status: str                      # "optimal" | "infeasible" | "unbounded"
    x: Optional[list] = None
    objective: Optional[object] = None
    dual: Optional[list] = None      # optimal dual, or Farkas vector when infeasible


def _reduce_cost_row(cost, tableau, basis):
    row = list(cost) + [cost[0] * 0]
    for i, b in enumerate(basis):
        f = row[b]
        if f != 0:
            trow = tableau[i]
            row = [rv - f * tv for rv, tv in zip(row, trow)]
    return row


def _pivot(tableau, costrow, basis, leave, enter):
    piv = tableau[leave][enter]
    tableau[leave] = [v / piv for v in tableau[leave]]
    lrow = tableau[leave]
    for i in range(len(tableau)):
        if i != leave:
            f = tableau[i][enter]
            if f != 0:
                tableau[i] = [vi - f * vl for vi, vl in zip(tableau[i], lrow)]
    f = costrow[enter]
    if f != 0:
        costrow[:] = [vc - f * vl for vc, vl in zip(costrow, lrow)]
    basis[leave] = enter


def _bland_loop(tableau, costrow, basis, enterable, tol):
    m = len(tableau)
    while True:
        enter = -1
        for j in enterable:
            if costrow[j] < -tol:
                enter = j
                break
        if enter < 0:
            return "optimal"
        leave, best = -1, None
        for i in range(m):
            a = tableau[i][enter]
            if a > tol:
                ratio = tableau[i][-1] / a
                if best is None or ratio < best:
                    best, leave = ratio, i
                elif ratio == best and basis[i] < basis[leave]:
                    leave = i
        if leave < 0:
            return "unbounded"
        _pivot(tableau, costrow, basis, leave, enter)


def solve_lp(A, b, c, exact: bool = False) -> LPResult:
    """min c.x subject to Ax = b, x >= 0.

    ``exact=True`` runs every pivot in Fraction arithmetic; the inputs are
    converted with ``Fraction(value)`` (floats convert exactly).  On
    infeasibility ``dual`` is a Farkas vector y with y.A <= 0 and y.b > 0.
    """
    conv = Fraction if exact else float
    tol = 0 if exact else FEASIBILITY_TOL
    zero, one = conv(0), conv(1)
    m, n = len(A), len(c)
    rows = [[conv(v) for v in row] for row in A]
    rhs = [conv(v) for v in b]
    signs = [one] * m
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
            signs[i] = -one
    tableau = [rows[i] + [one if k == i else zero for k in range(m)] + [rhs[i]] for i in range(m)]
    basis = list(range(n, n + m))

    phase1_cost = [zero] * n + [one] * m
    costrow = _reduce_cost_row(phase1_cost, tableau, basis)
    status = _bland_loop(tableau, costrow, basis, range(n + m), tol)
    assert status == "optimal", "phase 1 is always bounded"
    infeas = -costrow[-1]
    if infeas > (0 if exact else FEASIBILITY_TOL):
        # Farkas certificate from the phase-1 duals, unflipping row signs
        y = [signs[i] * (one - costrow[n + i]) for i in range(m)]
        return LPResult(status="infeasible", dual=y)

    # drive leftover artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                if abs(tableau[i][j]) > (0 if exact else FEASIBILITY_TOL):
                    _pivot(tableau, costrow, basis, i, j)
                    break

    phase2_cost = [conv(v) for v in c] + [zero] * m
    costrow = _reduce_cost_row(phase2_cost, tableau, basis)
    status = _bland_loop(tableau, costrow, basis, range(n), tol)
    if status == "unbounded":
        return LPResult(status="unbounded")
    x = [zero] * n
    for i, bi in enumerate(basis):
        if bi < n:
            x[bi] = tableau[i][-1]
    y = [signs[i] * (-costrow[n + i]) for i in range(m)]
    objective = -costrow[-1]
    gap = abs(float(objective) - sum(float(y[i]) * float(b[i]) for i in range(m)))
    assert gap <= DUALITY_GAP_TOL * (1 + abs(float(objective)))
    return LPResult(status="optimal", x=x, objective=objective, dual=y)


# -- certificates --------------------------------------------------------------


@dataclass
class ConvexDecomposition:
    """Weights and components witnessing P in conv(S).

    ``indices`` point back into the candidate list the decomposition was
    computed from (components are the pruned subset).
    """

    weights: tuple
    components: list
    residual: float
    indices: tuple = ()

    def mixture(self) -> np.ndarray:
        acc = sum(float(w) * c.as_float() for w, c in zip(self.weights, self.components))
        return acc

    def __len__(self):
        return len(self.weights)


@dataclass
class SeparatingFunctional:
    """Linear functional with c(Q) <= alpha on the set and c(P) = alpha + margin."""

    alphabet: Alphabet
    coeffs: np.ndarray  # (A, X), sup-norm 1
    alpha: object
    margin: object

    def value(self, Q: Behavior):
        if Q.alphabet != self.alphabet:
            raise AlphabetMismatch("functional and behavior alphabets differ")
        coeffs = self.coeffs
        if isinstance(coeffs, np.ndarray) and coeffs.dtype == object:
            return sum(coeffs[a, x] * Q.probs[a, x] for a in range(coeffs.shape[0]) for x in range(coeffs.shape[1]))
        return float((np.asarray(coeffs, dtype=float) * Q.as_float()).sum())


MembershipResult = Union[ConvexDecomposition, SeparatingFunctional]


def _cells(B: Behavior):
    A, X = B.alphabet.output_size, B.alphabet.input_size
    return [B.probs[a, x] for x in range(X) for a in range(A)]


def _support_cells(p_vec, exact):
    thr = 0 if exact else 1e-12
    return [r for r, v in enumerate(p_vec) if abs(v) > thr]


def _null_vector_exact(rows, k):
    """A nonzero rational vector in the null space of the given row list."""
    M = [list(r) for r in rows]
    pivots = {}
    r = 0
    for col in range(k):
        sel = next((i for i in range(r, len(M)) if M[i][col] != 0), None)
        if sel is None:
            continue
        M[r], M[sel] = M[sel], M[r]
        piv = M[r][col]
        M[r] = [v / piv for v in M[r]]
        for i in range(len(M)):
            if i != r and M[i][col] != 0:
                f = M[i][col]
                M[i] = [vi - f * vr for vi, vr in zip(M[i], M[r])]
        pivots[col] = r
        r += 1
        if r == len(M):
            break
    free = next((col for col in range(k) if col not in pivots), None)
    if free is None:
        return None
    mu = [Fraction(0)] * k
    mu[free] = Fraction(1)
    for col, prow in pivots.items():
        mu[col] = -M[prow][free]
    return mu


def _null_vector_float(rows, k):
    M = np.asarray(rows, dtype=float)
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    null = vh[-1]
    if len(s) == vh.shape[0] and s[-1] > 1e-9 * max(1.0, s[0]):
        return None
    return null


def _caratheodory_prune(weights, vectors, support, exact):
    """Shrink the support of a convex combination to <= |support| + 1 points.

    ``vectors`` are the full cell vectors of the components; only the
    coordinates in ``support`` (plus the normalization row) constrain the
    combination, because every active component vanishes off the support.
    """
    weights = list(weights)
    bound = len(support) + 1
    active = [i for i, w in enumerate(weights) if w > (0 if exact else 1e-12)]
    while len(active) > bound:
        rows = [[vectors[i][r] for i in active] for r in support]
        rows.append([Fraction(1) if exact else 1.0] * len(active))
        mu = _null_vector_exact(rows, len(active)) if exact else _null_vector_float(rows, len(active))
        if mu is None:
            break
        if all(v <= 0 for v in mu):
            mu = [-v for v in mu]
        t, drop = None, None
        for idx, v in zip(active, mu):
            if v > (0 if exact else 1e-14):
                ratio = weights[idx] / v
                if t is None or ratio < t:
                    t, drop = ratio, idx
        if t is None:
            break
        for idx, v in zip(active, mu):
            weights[idx] = weights[idx] - t * v
        weights[drop] = Fraction(0) if exact else 0.0
        active = [i for i in active if weights[i] > (0 if exact else 1e-12)]
    return weights, active


def membership(target: Behavior, candidates: Sequence[Behavior], exact: bool = None) -> MembershipResult:
    """Decide P in conv(S) with a certificate either way.

    Returns a :class:`ConvexDecomposition` (weights sum to 1, residual at
    most 1e-9, at most nnz(P)+1 components) or a :class:`SeparatingFunctional`
    built from the Farkas dual of the infeasible LP.
    """
    if not candidates:
        raise ValueError("need at least one candidate behavior")
    for Q in candidates:
        if Q.alphabet != target.alphabet:
            raise AlphabetMismatch("candidate alphabet differs from the target's")
    if exact is None:
        exact = target.exact and all(Q.exact for Q in candidates)

    p_vec = _cells(target)
    vectors = [_cells(Q) for Q in candidates]
    d, k = len(p_vec), len(vectors)
    A = [[vectors[i][r] for i in range(k)] for r in range(d)]
    A.append([1] * k)
    b = list(p_vec) + [1]
    res = solve_lp(A, b, [0] * k, exact=exact)

    if res.status == "infeasible":
        y = res.dual
        coeffs = y[:d]
        alpha = -y[d]
        scale = max(abs(v) for v in coeffs)
        if scale == 0:
            raise AssertionError("degenerate Farkas certificate")
        coeffs = [v / scale for v in coeffs]
        alpha = alpha / scale
        Aout, X = target.alphabet.output_size, target.alphabet.input_size
        table = np.empty((Aout, X), dtype=object) if exact else np.zeros((Aout, X))
        for x in range(X):
            for a in range(Aout):
                table[a, x] = coeffs[x * Aout + a]
        value_p = sum(c * v for c, v in zip(coeffs, p_vec))
        return SeparatingFunctional(target.alphabet, table, alpha, value_p - alpha)

    weights, active = _caratheodory_prune(res.x, vectors, _support_cells(p_vec, exact), exact)
    kept = [(weights[i], candidates[i]) for i in active]
    total = sum(w for w, _ in kept)
    kept = [(w / total, Q) for w, Q in kept]
    if exact:
        residual = float(max(
            abs(sum(w * Q.probs[a, x] for w, Q in kept) - target.probs[a, x])
            for a in range(target.alphabet.output_size)
            for x in range(target.alphabet.input_size)
        ))
    else:
        mix = sum(float(w) * Q.as_float() for w, Q in kept)
        residual = float(np.abs(mix - target.as_float()).max())
    return ConvexDecomposition(tuple(w for w, _ in kept), [Q for _, Q in kept], residual, tuple(active))


def separating_functional(target: Behavior, others: Sequence[Behavior], exact: bool = None) -> SeparatingFunctional:
    """Max-margin separator: maximize c(P) - max_Q c(Q) over |c|_inf <= 1.

    Raises :class:`NotSeparable` when the target is in the hull.  The
    returned functional has sup-norm 1, threshold alpha = max_Q c(Q) and a
    strictly positive margin.
    """
    inside = membership(target, others, exact=exact)
    if isinstance(inside, ConvexDecomposition):
        raise NotSeparable("target is a convex combination of the others")
    if exact is None:
        exact = target.exact and all(Q.exact for Q in others)

    p_vec = _cells(target)
    vectors = [_cells(Q) for Q in others]
    d, k = len(p_vec), len(vectors)
    # variables: u (d, with c = u - 1), box slacks s (d), t+ , t-, set slacks (k)
    nvar = 2 * d + 2 + k
    A, b = [], []
    for r in range(d):
        row = [0] * nvar
        row[r] = 1
        row[d + r] = 1
        A.append(row)
        b.append(2)
    for j, v in enumerate(vectors):
        row = [0] * nvar
        for r in range(d):
            row[r] = v[r]
        row[2 * d] = -1
        row[2 * d + 1] = 1
        row[2 * d + 2 + j] = 1
        A.append(row)
        b.append(sum(v))
    c = [0] * nvar
    for r in range(d):
        c[r] = -p_vec[r]
    c[2 * d] = 1
    c[2 * d + 1] = -1
    res = solve_lp(A, b, c, exact=exact)
    assert res.status == "optimal", f"separation LP ended {res.status}"

    one = Fraction(1) if exact else 1.0
    coeffs = [res.x[r] - one for r in range(d)]
    alpha = res.x[2 * d] - res.x[2 * d + 1]
    scale = max(abs(v) for v in coeffs)
    if scale not in (0, 1):
        coeffs = [v / scale for v in coeffs]
        alpha = alpha / scale
    Aout, X = target.alphabet.output_size, target.alphabet.input_size
    table = np.empty((Aout, X), dtype=object) if exact else np.zeros((Aout, X))
    for x in range(X):
        for a in range(Aout):
            table[a, x] = coeffs[x * Aout + a]
    margin = sum(cc * v for cc, v in zip(coeffs, p_vec)) - alpha
    return SeparatingFunctional(target.alphabet, table, alpha, margin)


def is_extreme(target: Behavior, family: Sequence[Behavior], exact: bool = None):
    """Is the target an extreme point of conv(family)?

    The target must be one of the family's members.  Returns
    (flag, certificate): the decomposition over the other members when not
    extreme, the separating functional when extreme (None when the family
    has no other member).
    """
    others, found = [], False
    for Q in family:
        if not found and Q.alphabet == target.alphabet and (
            (target.exact and Q.exact and np.array_equal(Q.probs, target.probs))
            or (not (target.exact and Q.exact) and np.allclose(Q.as_float(), target.as_float(), atol=1e-12))
        ):
            found = True
            continue
        others.append(Q)
    if not found:
        raise ValueError("target must be a member of the family")
    if not others:
        return True, None
    result = membership(target, others, exact=exact)
    if isinstance(result, ConvexDecomposition):
        return False, result
    return True, result


# -- the linearity demonstration ------------------------------------------------


@dataclass
class LinearityRow:
    n: int
    acceptance_mixture: object          # exact acceptance of the iid mixture
    weighted_sum: object                # sum over component tuples, lambda-weighted
    max_tuple_acceptance: object
    argmax_tuple: tuple
    linearity_gap: float
    bound_satisfied: bool


def linearity_demo(test_family, target: Behavior, decomposition: ConvexDecomposition, n_max: int,
                   tol: float = 1e-12) -> list[LinearityRow]:
    """Acceptance of the mixture vs the lambda-weighted component products.

    For each n the mixture's n-round acceptance is compared with the sum
    over all component tuples; their agreement is the linearity that dooms
    non-convex membership tests, and the max over tuples is the upper bound
    the mixture can never beat.
    """
    weights, comps = decomposition.weights, decomposition.components
    rows = []
    for n in range(1, n_max + 1):
        test = test_family(n) if callable(test_family) else test_family[n]
        mix_acc = exact_acceptance(test, iid_behavior(target, n))
        weighted = 0
        best, best_tuple = None, None
        for combo in itertools.product(range(len(comps)), repeat=n):
            acc = exact_acceptance(test, product_behavior([comps[i] for i in combo]))
            w = 1
            for i in combo:
                w = w * weights[i]
            weighted = weighted + w * acc
            if best is None or acc > best:
                best, best_tuple = acc, combo
        gap = abs(float(mix_acc) - float(weighted))
        rows.append(LinearityRow(
            n=n,
            acceptance_mixture=mix_acc,
            weighted_sum=weighted,
            max_tuple_acceptance=best,
            argmax_tuple=best_tuple,
            linearity_gap=gap,
            bound_satisfied=float(mix_acc) <= float(best) + tol,
        ))
    return rows
