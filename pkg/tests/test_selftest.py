import numpy as np
import pytest

from noniid.devices import derive_rng
from noniid.selftest import (
    DensityMatrix,
    DimensionMismatch,
    InvalidState,
    exposedness_scan,
    load_density,
    permutation_operator,
    random_density,
    save_density,
    witness_matrix,
    witness_value,
)


def frobenius_sq(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Independent oracle: direct trace of the squared difference."""
    d = sigma.matrix - rho.matrix
    return float(np.real(np.trace(d @ d)))


class TestPermutationOperator:
    def test_d2_entries(self):
        V = permutation_operator(2)
        expected = np.zeros((4, 4))
        for r, c in ((0, 0), (1, 2), (2, 1), (3, 3)):
            expected[r, c] = 1.0
        assert np.abs(V - expected).max() == 0

    @pytest.mark.parametrize("D", [2, 3, 4])
    def test_trace_counts_fixed_points(self, D):
        assert permutation_operator(D).trace() == pytest.approx(D)

    @pytest.mark.parametrize("D", [2, 3, 4])
    def test_involution_and_hermitian(self, D):
        V = permutation_operator(D)
        assert np.abs(V @ V - np.eye(D * D)).max() <= 1e-14
        assert np.abs(V - V.conj().T).max() <= 1e-14

    def test_swap_trick(self):
        # tr{V (s (x) t)} = tr{s t}, matrix oracle on random states
        rng = derive_rng(1)
        for D in (2, 3, 4):
            V = permutation_operator(D)
            for _ in range(20):
                s, t = random_density(D, rng), random_density(D, rng)
                lhs = np.trace(V @ np.kron(s.matrix, t.matrix))
                rhs = np.trace(s.matrix @ t.matrix)
                assert abs(lhs - rhs) < 1e-12

    def test_dim_guard(self):
        with pytest.raises(ValueError):
            permutation_operator(1)


class TestWitnessMatrix:
    def test_maximally_mixed_closed_form(self):
        # rho = I/2: W = V + (1/2) I - I (x) I = V - I/2
        W = witness_matrix(DensityMatrix.maximally_mixed(2))
        expected = permutation_operator(2) - 0.5 * np.eye(4)
        assert np.abs(W - expected).max() <= 1e-14

    def test_value_vanishes_at_target(self):
        rng = derive_rng(2)
        for D in (2, 3):
            rho = random_density(D, rng)
            assert abs(witness_value(rho, rho)) < 1e-12

    def test_trace_formula(self):
        # trace algebra oracle: tr W = D + D^2 tr(rho^2) - 2D
        rng = derive_rng(3)
        for D in (2, 3, 4):
            rho = random_density(D, rng)
            W = witness_matrix(rho)
            assert W.trace().real == pytest.approx(D + D * D * rho.purity() - 2 * D, abs=1e-10)

    def test_hermitian(self):
        rho = random_density(3, derive_rng(4))
        W = witness_matrix(rho)
        assert np.abs(W - W.conj().T).max() <= 1e-12


class TestWitnessValue:
    def test_mixed_vs_pure(self):
        rho = DensityMatrix.maximally_mixed(2)
        sigma = DensityMatrix.pure([1, 0])
        assert witness_value(rho, sigma) == pytest.approx(0.5)

    def test_identity_random_pairs(self):
        rng = derive_rng(5)
        for D in (2, 3, 4):
            for _ in range(100):
                rho, sigma = random_density(D, rng), random_density(D, rng)
                assert abs(witness_value(rho, sigma) - frobenius_sq(rho, sigma)) < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            witness_value(random_density(2, derive_rng(0)), random_density(3, derive_rng(0)))


class TestExposednessScan:
    def test_minimum_at_target(self):
        rng = derive_rng(6)
        rho = random_density(2, rng)
        report = exposedness_scan(rho, 2000, rng)
        assert report.min_is_target
        assert abs(report.min_value) < 1e-12
        assert report.argmin_distance == 0.0

    def test_values_equal_squared_distance(self):
        rng = derive_rng(7)
        rho = random_density(3, rng)
        report = exposedness_scan(rho, 2000, rng)
        assert report.identity_max_error < 1e-10

    def test_pure_target_isolated(self):
        rng = derive_rng(8)
        rho = DensityMatrix.pure([1, 0])
        report = exposedness_scan(rho, 10**4, rng)
        assert report.min_is_target
        assert report.second_smallest > 0
        assert report.gap > 0


class TestRandomDensity:
    def test_invariants(self):
        rng = derive_rng(9)
        for D in (2, 3, 4):
            for _ in range(20):
                rho = random_density(D, rng)  # constructor re-validates
                assert 1 / D - 1e-12 <= rho.purity() <= 1 + 1e-12

    def test_mean_is_maximally_mixed(self):
        rng = derive_rng(10)
        D = 3
        mean = np.zeros((D, D), dtype=complex)
        for _ in range(10**4):
            mean += random_density(D, rng).matrix
        mean /= 10**4
        assert np.abs(mean - np.eye(D) / D).max() < 0.05


class TestDensityMatrix:
    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidState):
            DensityMatrix(np.array([[0.5, 1.0], [0.0, 0.5]]))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidState):
            DensityMatrix(np.array([[1.5, 0], [0, -0.5]]))

    def test_rejects_wrong_trace(self):
        with pytest.raises(InvalidState):
            DensityMatrix(np.eye(2))

    def test_file_roundtrip(self, tmp_path):
        rho = random_density(3, derive_rng(11))
        path = tmp_path / "rho.mat"
        save_density(rho, path)
        loaded = load_density(path)
        assert np.abs(loaded.matrix - rho.matrix).max() < 1e-15
