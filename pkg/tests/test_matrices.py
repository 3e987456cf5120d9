import math

import numpy as np
import pytest

from kmoment.core.errors import MissingMomentError, StructureError
from kmoment.core.matrices import (
    Constraint,
    MomentMatrix,
    localizing_basis,
    localizing_matrix,
    maximal_moment_basis,
    missing_moments,
    moment_matrix,
    psd_rank,
    recursive_consistency,
    smulyan_check,
)
from kmoment.core.moments import AtomicMeasure, MomentSequence, moments_of_atomic
from kmoment.core.poly import MonomialSet, Polynomial

from conftest import random_measure, truncation

X = Polynomial.variable(0, 1)
S = Polynomial.variable(0, 2)
T = Polynomial.variable(1, 2)


def labelled(entries):
    entries = np.asarray(entries, dtype=float)
    return MomentMatrix(MonomialSet.triangular(1, entries.shape[0] - 1), entries)


class TestMomentMatrix:
    def test_weight_diagram_moments(self):
        a, b, c, d, e = 0.25, 0.25, 0.5, 0.5, 0.5
        gamma = MomentSequence(
            {(0, 0): 1.0, (1, 0): a, (0, 1): b, (2, 0): a * c, (1, 1): b * e, (0, 2): b * d}
        )
        M = moment_matrix(gamma, MonomialSet.triangular(2, 1))
        np.testing.assert_array_equal(
            M.entries, [[1, a, b], [a, a * c, b * e], [b, b * e, b * d]]
        )

    def test_hankel_of_inconsistent_data(self, inconsistent):
        M = moment_matrix(inconsistent, MonomialSet.triangular(1, 2))
        np.testing.assert_array_equal(M.entries, [[1, 1, 1], [1, 1, 1], [1, 1, 2]])

    def test_dirac_at_origin(self):
        gamma = moments_of_atomic(AtomicMeasure([[0.0]], [1.0]), MonomialSet.triangular(1, 2))
        M = moment_matrix(gamma, MonomialSet.triangular(1, 1))
        np.testing.assert_array_equal(M.entries, [[1, 0], [0, 0]])

    def test_missing_moment_reports_entry(self, inconsistent):
        with pytest.raises(MissingMomentError) as info:
            moment_matrix(inconsistent, MonomialSet.triangular(1, 3))
        assert info.value.indices == [(5,), (6,)]
        assert info.value.pairs

    def test_asymmetric_entries_rejected(self):
        with pytest.raises(StructureError):
            labelled([[1.0, 2.0], [0.0, 1.0]])

    def test_principal_submatrix(self, inconsistent):
        M = moment_matrix(inconsistent, MonomialSet.triangular(1, 2))
        sub = M.principal(MonomialSet([(0,), (2,)]))
        np.testing.assert_array_equal(sub.entries, [[1, 1], [1, 2]])


class TestLocalizingMatrix:
    def test_product_constraint_at_centre(self):
        gamma = moments_of_atomic(AtomicMeasure([[0.5, 0.5]], [1.0]), MonomialSet.triangular(2, 2))
        M = localizing_matrix(gamma, S * (1 - S), MonomialSet.triangular(2, 0))
        np.testing.assert_allclose(M.entries, [[0.25]])

    def test_unit_constraint_is_moment_matrix(self, two_atoms):
        gamma = truncation(two_atoms, 4)
        basis = MonomialSet.triangular(1, 2)
        np.testing.assert_array_equal(
            localizing_matrix(gamma, Polynomial.constant(1.0, 1), basis).entries,
            moment_matrix(gamma, basis).entries,
        )

    def test_atom_outside_interval(self):
        gamma = moments_of_atomic(AtomicMeasure([[2.0]], [1.0]), MonomialSet.triangular(1, 2))
        M = localizing_matrix(gamma, Constraint(g=1 - X**2, name="1-X^2"), MonomialSet.triangular(1, 0))
        np.testing.assert_allclose(M.entries, [[-3.0]])
        assert M.constraint.name == "1-X^2"

    @pytest.mark.parametrize("seed", range(8))
    def test_unit_square_measures(self, seed):
        rng = np.random.default_rng(seed)
        mu = random_measure(rng, 2, 3, lo=0.0, hi=1.0)
        box = [S, 1 - S, T, 1 - T]
        basis = MonomialSet.triangular(2, 1)
        gamma = truncation(mu, 4)
        assert all(psd_rank(localizing_matrix(gamma, g, basis)).is_psd for g in box)

        displaced = mu.atoms.copy()
        displaced[0, 0] = 3.0
        gamma = truncation(AtomicMeasure(displaced, mu.weights), 4)
        assert not psd_rank(localizing_matrix(gamma, 1 - S, basis)).is_psd

    def test_zero_constraint_rejected(self):
        with pytest.raises(ValueError):
            Constraint(g=Polynomial.zero(1))

    def test_localizing_basis_truncates_to_available_data(self, inconsistent):
        basis = MonomialSet.triangular(1, 2)
        sub, skipped = localizing_basis(inconsistent, 1 - X, basis)
        assert sub == MonomialSet.triangular(1, 1)
        assert skipped == [(2,)]
        assert missing_moments(inconsistent, basis, 1 - X) == [(5,)]


class TestMaximalBasis:
    def test_even_and_odd_degrees(self, inconsistent):
        assert maximal_moment_basis(inconsistent) == MonomialSet.triangular(1, 2)
        assert maximal_moment_basis(inconsistent.restrict(MonomialSet.triangular(1, 3))) == MonomialSet.triangular(1, 1)

    def test_two_variables(self, three_atoms_2d):
        assert maximal_moment_basis(truncation(three_atoms_2d, 3)) == MonomialSet.triangular(2, 1)


class TestPsdRank:
    def test_rank_and_kernel(self):
        report = psd_rank(labelled([[1, 1, 1], [1, 1, 1], [1, 1, 2]]))
        assert report.is_psd
        assert report.rank == 2
        assert len(report.kernel_basis) == 1
        assert (report.kernel_basis[0] * math.sqrt(2)).allclose(X - 1, tol=1e-9)

    def test_identity(self):
        report = psd_rank(labelled(np.eye(3)))
        assert report.is_psd
        assert report.rank == 3
        assert report.kernel_basis == []

    def test_indefinite(self):
        report = psd_rank(labelled([[0, 1], [1, 0]]))
        assert not report.is_psd
        assert report.min_eigenvalue == pytest.approx(-1.0)

    def test_empty_matrix(self):
        report = psd_rank(MomentMatrix(MonomialSet([], 1), np.zeros((0, 0))))
        assert report.is_psd
        assert report.rank == 0

    def test_rank_plus_kernel_is_size(self):
        points = np.array([[-0.8], [0.1], [0.9]])
        gamma = moments_of_atomic(AtomicMeasure(points, [0.2, 0.3, 0.5]), MonomialSet.triangular(1, 8))
        report = psd_rank(moment_matrix(gamma, MonomialSet.triangular(1, 4)))
        assert report.rank == 3
        assert report.rank + len(report.kernel_basis) == 5


class TestRecursiveConsistency:
    def test_inconsistent_data(self, inconsistent):
        M = moment_matrix(inconsistent, MonomialSet.triangular(1, 2))
        report = recursive_consistency(M, inconsistent)
        assert not report.consistent
        violation = report.violations[0]
        assert violation.beta == (2,)
        assert abs(violation.value) == pytest.approx(1 / math.sqrt(2))

    def test_dirac_at_one(self):
        gamma = moments_of_atomic(AtomicMeasure([[1.0]], [1.0]), MonomialSet.triangular(1, 4))
        M = moment_matrix(gamma, MonomialSet.triangular(1, 2))
        report = recursive_consistency(M, gamma)
        assert report.consistent
        assert report.untested

    def test_full_rank_is_vacuous(self):
        gamma = MomentSequence({(0,): 1.0, (1,): 0.0, (2,): 1.0})
        report = recursive_consistency(moment_matrix(gamma, MonomialSet.triangular(1, 1)), gamma)
        assert report.consistent
        assert report.violations == [] and report.untested == []

    @pytest.mark.parametrize("seed", range(8))
    def test_measures_are_consistent(self, seed):
        rng = np.random.default_rng(seed)
        nvars = 1 + seed % 2
        mu = random_measure(rng, nvars, 1 + seed % 3, lo=-1.0, hi=1.0, separation=0.3)
        gamma = truncation(mu, 6)
        M = moment_matrix(gamma, MonomialSet.triangular(nvars, 2))
        report = recursive_consistency(M, gamma)
        assert report.consistent


class TestSmulyan:
    def test_psd_moment_matrix_passes_every_split(self, two_atoms):
        M = moment_matrix(truncation(two_atoms, 4), MonomialSet.triangular(1, 2))
        assert all(smulyan_check(M, split) for split in range(4))

    def test_negative_schur_complement(self):
        assert not smulyan_check(np.array([[1.0, 1.0], [1.0, 0.0]]), 1)

    def test_identity(self):
        assert smulyan_check(np.eye(2), 1)

    def test_range_violation(self):
        assert not smulyan_check(np.array([[0.0, 1.0], [1.0, 1.0]]), 1)

    @pytest.mark.parametrize("seed", range(8))
    def test_random_positive_matrices(self, seed):
        rng = np.random.default_rng(seed)
        size = int(rng.integers(2, 6))
        factor = rng.normal(size=(size, int(rng.integers(1, size + 1))))
        M = factor @ factor.T
        assert all(smulyan_check(M, split) for split in range(size + 1))
        bent = M.copy()
        bent[-1, -1] -= 2.0 * np.linalg.eigvalsh(M).max() + 1.0
        assert not smulyan_check(bent, size - 1)

    def test_split_out_of_bounds(self):
        with pytest.raises(StructureError):
            smulyan_check(np.eye(2), 3)
