import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bilinsphere.linalg3 import ComplexPair, RealDistinct, random_rotation, rotation, skew
from bilinsphere.system import (COMPLEX_ATTRACTING, COMPLEX_NEUTRAL, COMPLEX_REPULSIVE, DEGENERATE,
                                REAL_STABLE, BilinearSystem, Box, DimensionMismatch, FiniteSet,
                                SampleOutsideControlSet, SubsystemUN, build_subsystem, check_cc1,
                                check_cc3_cc4, check_ck1, classify, evaluate_operator,
                                subsystem_from_matrices)

DIAG = np.diag([1.0, 2.0, 3.0])
BLOCK_FAST_POLE = np.array([[2.0, 0, 0], [0, 1, -1], [0, 1, 1]])
BLOCK_SLOW_POLE = np.array([[0.0, 0, 0], [0, 1, -1], [0, 1, 1]])


def single(matrix, box=((-1.0,), (1.0,))):
    return BilinearSystem(matrix, (np.zeros((3, 3)),), Box(*box))


class TestEvaluateOperator:
    def test_zero_control(self):
        sys = BilinearSystem(DIAG, (skew((0, 0, 1)),), Box((-1.0,), (1.0,)))
        np.testing.assert_array_equal(evaluate_operator(sys, [0.0]), DIAG)

    def test_linear_in_control(self):
        sys = BilinearSystem(np.zeros((3, 3)), (np.eye(3),), Box((-5.0,), (5.0,)))
        np.testing.assert_array_equal(evaluate_operator(sys, [2.0]), 2 * np.eye(3))

    def test_entrywise_sum(self):
        sz = skew((0, 0, 1))
        sys = BilinearSystem(DIAG, (sz,), Box((-1.0,), (1.0,)))
        np.testing.assert_allclose(evaluate_operator(sys, [0.5]), DIAG + 0.5 * sz, atol=0)

    def test_dimension_mismatch(self):
        sys = BilinearSystem(DIAG, (np.eye(3),), Box((-1.0,), (1.0,)))
        with pytest.raises(DimensionMismatch):
            evaluate_operator(sys, [0.1, 0.2])

    @given(st.lists(st.floats(-3, 3), min_size=2, max_size=2),
           st.lists(st.floats(-3, 3), min_size=2, max_size=2))
    def test_affine(self, u, v):
        rng = np.random.default_rng(7)
        sys = BilinearSystem(rng.normal(size=(3, 3)), tuple(rng.normal(size=(2, 3, 3))),
                             Box((-1.0, -1.0), (1.0, 1.0)))
        u, v = np.array(u), np.array(v)
        lhs = (evaluate_operator(sys, u + v) - evaluate_operator(sys, u)
               - evaluate_operator(sys, v) + evaluate_operator(sys, [0.0, 0.0]))
        assert np.max(np.abs(lhs)) <= 1e-12 * max(1.0, np.abs(u).max(), np.abs(v).max())


class TestSystemConstruction:
    def test_rejects_bad_shapes(self):
        with pytest.raises(DimensionMismatch):
            BilinearSystem(np.eye(2), (np.eye(3),), Box((-1.0,), (1.0,)))
        with pytest.raises(DimensionMismatch):
            BilinearSystem(np.eye(3), (), Box((-1.0,), (1.0,)))
        with pytest.raises(DimensionMismatch):
            BilinearSystem(np.eye(3), (np.eye(3),), Box((-1.0, -1.0), (1.0, 1.0)))

    def test_rejects_non_finite(self):
        bad = np.eye(3)
        bad[0, 1] = np.inf
        with pytest.raises(ValueError):
            BilinearSystem(bad, (np.eye(3),), Box((-1.0,), (1.0,)))

    def test_box_is_open(self):
        box = Box((-1.0,), (1.0,))
        assert box.contains((0.999,))
        assert not box.contains((1.0,))
        with pytest.raises(ValueError):
            Box((1.0,), (1.0,))

    def test_finite_set(self):
        fs = FiniteSet(((0.0,), (1.0,)))
        assert fs.contains((1.0,)) and not fs.contains((0.5,))
        with pytest.raises(ValueError):
            FiniteSet(())


class TestClassification:
    def test_real_stable(self):
        sub = build_subsystem(single(DIAG), [(0.0,)])
        assert sub[0].dyn_class == REAL_STABLE
        assert isinstance(sub[0].spectrum, RealDistinct)

    def test_fast_real_eigenvalue_repels_the_circle(self):
        # real eigenvalue 2 beats the pair's real part 1: the poles attract
        sub = build_subsystem(single(BLOCK_FAST_POLE), [(0.0,)])
        assert sub[0].dyn_class == COMPLEX_REPULSIVE

    def test_slow_real_eigenvalue_attracts_to_the_circle(self):
        sub = build_subsystem(single(BLOCK_SLOW_POLE), [(0.0,)])
        assert sub[0].dyn_class == COMPLEX_ATTRACTING

    def test_neutral_and_degenerate(self):
        neutral = np.array([[1.0, 0, 0], [0, 1, -1], [0, 1, 1]])
        sub = subsystem_from_matrices([neutral, np.eye(3)])
        assert [s.dyn_class for s in sub.samples] == [COMPLEX_NEUTRAL, DEGENERATE]
        assert sub.excluded_idx == [0, 1]
        assert sub.real_idx == []

    def test_sample_outside_control_set(self):
        with pytest.raises(SampleOutsideControlSet) as info:
            build_subsystem(single(DIAG), [(0.0,), (0.5,), (1.0,)])
        assert info.value.index == 2

    def test_empty_sample_list(self):
        with pytest.raises(ValueError):
            build_subsystem(single(DIAG), [])

    def test_classification_is_idempotent(self, rng):
        for _ in range(100):
            m = rng.uniform(-1, 1, size=(3, 3))
            s = subsystem_from_matrices([m])[0]
            eps_abs = 1e-7 * np.linalg.norm(m)
            assert classify(s.spectrum, eps_abs) == s.dyn_class == classify(s.spectrum, eps_abs)
            if isinstance(s.spectrum, ComplexPair):
                expected = COMPLEX_REPULSIVE if s.spectrum.lambda_r > s.spectrum.re_c else COMPLEX_ATTRACTING
                assert s.dyn_class == expected

    def test_partition(self, rng):
        mats = [rng.uniform(-1, 1, size=(3, 3)) for _ in range(30)] + [np.eye(3)]
        sub = subsystem_from_matrices(mats)
        real, cplx = set(sub.real_idx), set(sub.complex_idx)
        degenerate = {s.index for s in sub.samples if s.dyn_class == DEGENERATE}
        assert real.isdisjoint(cplx)
        assert real | cplx | degenerate == set(range(len(mats)))


class TestGenericity:
    def test_shared_eigenvector(self):
        other = np.diag([1.0, 2.0, 3.0])
        other[1:, 1:] = rotation((1, 0, 0), 0.4)[1:, 1:] @ np.diag([2.0, 3.0]) @ rotation((1, 0, 0), 0.4)[1:, 1:].T
        rep = check_cc3_cc4(subsystem_from_matrices([DIAG, other]))
        assert rep.cc3 and not rep.cc4
        equal = [v for v in rep.violations if v["kind"] == "cc4-equal"]
        assert equal and equal[0]["a"] == [0, 1] and equal[0]["b"] == [1, 1]

    def test_single_sample(self):
        rep = check_cc3_cc4(subsystem_from_matrices([DIAG]))
        assert rep.cc3 and rep.cc4 and rep.violations == []

    def test_generic_rotation(self):
        r = rotation((1, 2, 3), 0.7)
        rep = check_cc3_cc4(subsystem_from_matrices([DIAG, r @ DIAG @ r.T]))
        assert rep.cc3 and rep.cc4

    def test_direction_in_plane(self):
        # rotating about e3 keeps e3 in sample 1 and moves e1, e2 inside the plane span(e1, e2)
        r = rotation((0, 0, 1), 0.3)
        rep = check_cc3_cc4(subsystem_from_matrices([DIAG, r @ np.diag([1.0, 2.0, 5.0]) @ r.T]))
        assert not rep.cc4
        assert any(v["kind"] == "cc4-plane" for v in rep.violations)

    def test_invariant_under_reorder_and_sign_flip(self, rng):
        for _ in range(30):
            rots = [random_rotation(rng) for _ in range(3)]
            mats = [r @ DIAG @ r.T for r in rots]
            base = check_cc3_cc4(subsystem_from_matrices(mats))
            shuffled = check_cc3_cc4(subsystem_from_matrices(mats[::-1]))
            # flipping eigenvector signs: conjugate by a diagonal sign matrix inside the rotation
            flips = [r @ np.diag(rng.choice([-1.0, 1.0], size=3)) for r in rots]
            flipped = check_cc3_cc4(subsystem_from_matrices([f @ DIAG @ f.T for f in flips]))
            assert (base.cc3, base.cc4) == (shuffled.cc3, shuffled.cc4) == (flipped.cc3, flipped.cc4)


class TestCC1:
    def test_scalar_operator_fails(self):
        sys = BilinearSystem(2 * np.eye(3), (np.eye(3),), Box((-1.0,), (1.0,)))
        sub = build_subsystem(sys, [(0.0,), (0.5,)])
        rep = check_cc1(sys, sub, 200)
        assert not rep.holds
        assert rep.worst_measure == 0.0

    def test_rotation_generators(self):
        sub = subsystem_from_matrices([skew((1, 0, 0)), skew((0, 1, 0))])
        rep = check_cc1(None, sub, 2000)
        assert rep.holds
        # oracle: |V_x x V_y| at q equals |q_z| for unit q
        q = rep.worst_point
        vx, vy = np.cross((1, 0, 0), q), np.cross((0, 1, 0), q)
        assert rep.worst_measure == pytest.approx(np.linalg.norm(np.cross(vx, vy)), abs=1e-15)
        assert rep.worst_measure == pytest.approx(abs(q[2]), abs=1e-12)

    def test_grid_size_contract(self):
        sub = subsystem_from_matrices([DIAG, skew((0, 0, 1))])
        assert check_cc1(None, sub, 12).evaluations == 12
        with pytest.raises(ValueError):
            check_cc1(None, sub, 11)

    def test_box_vertices_contribute(self):
        # sample matrices alone are collinear fields; the box vertex adds skew_z
        sys = BilinearSystem(DIAG, (skew((1, 1, 1)),), Box((-1.0,), (1.0,)))
        sub = build_subsystem(sys, [(0.0,)])
        assert check_cc1(None, sub, 500).evaluations == 500
        assert not check_cc1(None, sub, 500).holds
        assert check_cc1(sys, sub, 500).holds


class TestCK1:
    def test_contracting(self):
        rep = check_ck1(subsystem_from_matrices([-np.eye(3)]))
        assert rep.has_contracting and not rep.has_expanding

    def test_both(self):
        rep = check_ck1(subsystem_from_matrices([-np.eye(3), np.eye(3)]))
        assert (rep.has_contracting, rep.has_expanding) == (True, True)
        assert rep.lifts

    def test_mixed_signs(self):
        rep = check_ck1(subsystem_from_matrices([np.diag([-1.0, 2.0, 3.0])]))
        assert (rep.has_contracting, rep.has_expanding) == (False, False)


def test_restricted_keeps_indices():
    sub = subsystem_from_matrices([DIAG, 2 * DIAG, 3 * DIAG])
    part = sub.restricted([0, 2])
    assert isinstance(part, SubsystemUN)
    assert [s.index for s in part.samples] == [0, 2]
