import numpy as np
import pytest

from kmoment.core.config import SolveOptions
from kmoment.core.errors import ExtensionError, NestingError, StructureError
from kmoment.core.flat import (
    GENERATION_NOTE,
    Verdict,
    build_flat_extension,
    frame_consistency,
    is_flat,
    solve_tmp,
)
from kmoment.core.matrices import Constraint, moment_matrix
from kmoment.core.moments import AtomicMeasure, MomentSequence
from kmoment.core.poly import MonomialSet, Polynomial

from conftest import random_measure, truncation

X = Polynomial.variable(0, 1)
S = Polynomial.variable(0, 2)
T = Polynomial.variable(1, 2)


def unit_box():
    return [
        Constraint(g=S, name="s"),
        Constraint(g=1 - S, name="1-s"),
        Constraint(g=T, name="t"),
        Constraint(g=1 - T, name="1-t"),
    ]


class TestIsFlat:
    def test_two_atoms(self, two_atoms):
        gamma = truncation(two_atoms, 4)
        small = moment_matrix(gamma, MonomialSet.triangular(1, 1))
        big = moment_matrix(gamma, MonomialSet.triangular(1, 2))
        assert is_flat(small, big)

    def test_rank_jump(self, inconsistent):
        small = moment_matrix(inconsistent, MonomialSet.triangular(1, 1))
        big = moment_matrix(inconsistent, MonomialSet.triangular(1, 2))
        assert not is_flat(small, big)

    def test_same_matrix(self, inconsistent):
        M = moment_matrix(inconsistent, MonomialSet.triangular(1, 0))
        assert is_flat(M, M)

    def test_nesting_required(self, inconsistent):
        small = moment_matrix(inconsistent, MonomialSet([(0,), (2,)]))
        big = moment_matrix(inconsistent, MonomialSet.triangular(1, 1))
        with pytest.raises(NestingError):
            is_flat(small, big)


class TestBuildFlatExtension:
    def test_dirac_closes_at_rank_one(self):
        gamma = MomentSequence({(0,): 1.0, (1,): 0.7})
        result = build_flat_extension(gamma, MonomialSet.triangular(1, 0))
        assert result.steps == 1
        assert result.extended[(2,)] == pytest.approx(0.49)
        assert result.matrix.basis == MonomialSet.triangular(1, 1)

    def test_two_atoms_with_hint(self, two_atoms):
        gamma = truncation(two_atoms, 2)
        result = build_flat_extension(gamma, MonomialSet.triangular(1, 1), hint={(3,): 0.5})
        assert result.extended[(3,)] == pytest.approx(0.5)
        assert result.extended[(4,)] == pytest.approx(0.5)
        assert result.added == MonomialSet([(3,), (4,)])

    def test_known_odd_moment_fixes_the_extension(self, two_atoms):
        gamma = truncation(two_atoms, 3)
        result = build_flat_extension(gamma, MonomialSet.triangular(1, 1))
        assert result.extended[(4,)] == pytest.approx(0.5)
        assert result.added == MonomialSet([(4,)])

    def test_minimum_corner_choice_without_hint(self, two_atoms):
        # 0.5 delta_0 + 0.5 delta_1 through degree 2 closes on the same two atoms
        gamma = truncation(two_atoms, 2)
        result = build_flat_extension(gamma, MonomialSet.triangular(1, 1))
        assert result.extended[(3,)] == pytest.approx(0.5)
        assert result.extended[(4,)] == pytest.approx(0.5)
        assert np.linalg.matrix_rank(result.matrix.entries, tol=1e-9) == 2

    def test_free_moments_stay_bounded(self, three_atoms_1d):
        gamma = truncation(three_atoms_1d, 4)
        result = build_flat_extension(gamma, MonomialSet.triangular(1, 2))
        assert result.steps == 1
        assert result.added == MonomialSet([(5,), (6,)])
        # about the mean, the chosen gamma_6 is no larger than the measure's own
        mean = gamma[(1,)]
        chosen = result.extended.translated([-mean])[(6,)]
        actual = truncation(three_atoms_1d, 6).translated([-mean])[(6,)]
        assert 0.0 < chosen <= actual + 1e-12

    def test_inconsistent_data(self, inconsistent):
        with pytest.raises(ExtensionError) as info:
            build_flat_extension(inconsistent, MonomialSet.triangular(1, 2))
        assert info.value.stage == "consistency"

    def test_not_positive(self):
        gamma = MomentSequence({(0,): 1.0, (1,): 0.0, (2,): -1.0})
        with pytest.raises(ExtensionError) as info:
            build_flat_extension(gamma, MonomialSet.triangular(1, 1))
        assert info.value.stage == "psd"


class TestSolveTmp:
    def test_three_atoms_on_the_unit_square(self, three_atoms_2d):
        gamma = truncation(three_atoms_2d, 3)
        certificate = solve_tmp(gamma, gamma.support, unit_box())
        assert certificate.verdict is Verdict.REPRESENTABLE
        assert certificate.extension_steps == 1
        np.testing.assert_allclose(certificate.measure.atoms, three_atoms_2d.atoms, atol=1e-6)
        np.testing.assert_allclose(certificate.measure.weights, [0.25, 0.25, 0.5], atol=1e-6)
        assert certificate.residual < 1e-8
        assert (4, 0) in certificate.extended_moments

    def test_three_atoms_through_degree_four(self, three_atoms_1d):
        certificate = solve_tmp(truncation(three_atoms_1d, 4))
        assert certificate.verdict is Verdict.REPRESENTABLE
        assert certificate.extension_steps == 1
        assert certificate.measure.size == 3
        assert certificate.residual < 1e-8

    def test_directly_flat_data(self, two_atoms):
        certificate = solve_tmp(truncation(two_atoms, 4))
        assert certificate.representable
        assert certificate.extension_steps == 0
        assert certificate.extended_moments is None
        np.testing.assert_allclose(certificate.measure.atoms, [[0.0], [1.0]], atol=1e-8)

    def test_inconsistent_data(self, inconsistent):
        certificate = solve_tmp(inconsistent)
        assert certificate.verdict is Verdict.CONSISTENCY_FAILURE
        assert certificate.verdict.exit_code == 2
        assert certificate.measure is None
        assert certificate.witness["violations"][0]["beta"] == [2]

    def test_atom_outside_the_support_set(self):
        gamma = MomentSequence({(0,): 1.0, (1,): 2.0, (2,): 4.0})
        certificate = solve_tmp(gamma, constraints=[Constraint(g=1 - X, name="1-X")])
        assert certificate.verdict is Verdict.LOCALIZING_FAILURE
        assert certificate.witness["constraint"] == "1-X"
        assert certificate.witness["min_eigenvalue"] == pytest.approx(-1.0)

    def test_negative_eigenvalue(self):
        gamma = MomentSequence({(0,): 1.0, (1,): 0.0, (2,): -1.0})
        certificate = solve_tmp(gamma)
        assert certificate.verdict is Verdict.PSD_FAILURE
        assert certificate.witness["min_eigenvalue"] == pytest.approx(-1.0)

    def test_zero_depth(self, two_atoms):
        certificate = solve_tmp(truncation(two_atoms, 3), opts=SolveOptions(depth=0))
        assert certificate.verdict is Verdict.DEPTH_EXHAUSTED
        assert certificate.witness["stage"] == "flatness"

    def test_probability_rescaling(self, two_atoms):
        gamma = truncation(two_atoms.scaled(3.0), 4)
        certificate = solve_tmp(gamma, opts=SolveOptions(probability=True))
        assert certificate.representable
        assert certificate.measure.mass == pytest.approx(3.0)
        np.testing.assert_allclose(certificate.measure.weights, [1.5, 1.5], atol=1e-8)

    def test_unit_added_with_warning(self, two_atoms):
        gamma = truncation(two_atoms, 4)
        C = MonomialSet([(1,), (2,), (3,), (4,)])
        certificate = solve_tmp(gamma, C)
        assert certificate.representable
        assert any("unit" in w for w in certificate.warnings)

    def test_records_dominator_and_note(self, two_atoms):
        certificate = solve_tmp(truncation(two_atoms, 4))
        assert certificate.dominating_polynomial.degree == 4
        assert GENERATION_NOTE in certificate.notes

    def test_untested_localizing_entries(self, two_atoms):
        gamma = truncation(two_atoms, 4)
        certificate = solve_tmp(gamma, constraints=[Constraint(g=X, name="x")])
        assert certificate.representable
        assert certificate.untested == {"x": ["X^2"]}

    def test_empty_set(self, two_atoms):
        with pytest.raises(StructureError):
            solve_tmp(truncation(two_atoms, 2), MonomialSet([], 1))

    def test_certificate_fields(self, two_atoms):
        data = solve_tmp(truncation(two_atoms, 4)).to_dict()
        assert list(data)[:5] == ["verdict", "atoms", "weights", "residual", "witness"]
        assert data["verdict"] == "Representable"
        np.testing.assert_allclose(data["atoms"], [[0.0], [1.0]], atol=1e-8)


class TestRandomSolve:
    @pytest.mark.parametrize("seed", range(16))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        nvars = 1 + seed % 2
        size = 1 + seed % (3 if nvars == 1 else 4)
        mu = random_measure(rng, nvars, size).sorted()
        certificate = solve_tmp(truncation(mu, 6))
        assert certificate.verdict is Verdict.REPRESENTABLE
        assert certificate.residual < 1e-8
        assert certificate.measure.size == size
        np.testing.assert_allclose(certificate.measure.atoms, mu.atoms, atol=1e-5)
        np.testing.assert_allclose(certificate.measure.weights, mu.weights, atol=1e-5)

    @pytest.mark.parametrize("seed", range(8))
    def test_extension_reproduces_the_data(self, seed):
        rng = np.random.default_rng(100 + seed)
        mu = random_measure(rng, 1, 2 + seed % 2)
        # 2 atoms from degree 2 data, 3 from degree 4: one free moment each
        gamma = truncation(mu, 2 * mu.size - 2)
        certificate = solve_tmp(gamma)
        assert certificate.verdict is Verdict.REPRESENTABLE
        assert certificate.extension_steps == 1
        assert certificate.measure.size == mu.size
        assert certificate.residual < 1e-8


class TestFrameConsistency:
    def test_nested_truncations_of_a_dirac(self):
        mu = AtomicMeasure([[0.5]], [1.0])
        report = frame_consistency([truncation(mu, d) for d in (2, 4, 6)])
        assert report.all_solvable
        assert report.masses == [1.0, 1.0, 1.0]
        assert report.shared_moment_max_discrepancy < 1e-8
        assert [level["atoms"] for level in report.levels] == [1, 1, 1]

    def test_nested_truncations_of_three_atoms(self, three_atoms_1d):
        report = frame_consistency([truncation(three_atoms_1d, d) for d in (2, 4, 6)])
        assert report.all_solvable
        assert report.masses == pytest.approx([1.0, 1.0, 1.0])
        assert report.shared_moment_max_discrepancy < 1e-6
        assert [level["atoms"] for level in report.levels] == [2, 3, 3]
        np.testing.assert_allclose(report.certificates[2].measure.atoms, three_atoms_1d.atoms, atol=1e-6)

    def test_single_level(self, two_atoms):
        report = frame_consistency([truncation(two_atoms, 4)])
        assert report.all_solvable
        assert report.shared_moment_max_discrepancy == 0.0
        assert len(report.certificates) == 1

    def test_failed_level(self, inconsistent):
        report = frame_consistency([inconsistent.restrict(MonomialSet.triangular(1, 2)), inconsistent])
        assert not report.all_solvable
        assert report.levels[1]["verdict"] == "ConsistencyFailure"

    def test_levels_must_nest(self, two_atoms):
        with pytest.raises(NestingError):
            frame_consistency([truncation(two_atoms, 4), truncation(two_atoms, 2)])

    def test_needs_a_level(self):
        with pytest.raises(StructureError):
            frame_consistency([])
