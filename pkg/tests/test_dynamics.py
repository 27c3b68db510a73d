import math

import numpy as np
import pytest
import scipy.linalg
import suites
from hypothesis import given
from hypothesis import strategies as st

from bilinsphere.dynamics import (ControlSchedule, DegenerateSpectrum, SphereFlow, Underflow,
                                  apply_schedule, exact_flow, flow_on_sphere, integrate_projected,
                                  monte_carlo_connect, projected_field, sample_flows,
                                  simulate_schedule)
from bilinsphere.linalg3 import Degenerate, eigen_decompose, geodesic, normalize, skew
from bilinsphere.system import subsystem_from_matrices

E1, E2, E3 = np.eye(3)
DIAG = np.diag([1.0, 2.0, 3.0])
SKEW_Z = skew((0, 0, 1))

entries = st.floats(-2, 2, allow_nan=False)
matrices = st.lists(entries, min_size=9, max_size=9).map(lambda xs: np.array(xs).reshape(3, 3))
units = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 0.1).map(normalize)


class TestField:
    def test_examples(self):
        np.testing.assert_array_equal(projected_field(np.eye(3), normalize((1, 2, 3))), np.zeros(3))
        np.testing.assert_array_equal(projected_field(SKEW_Z, E1), E2)
        np.testing.assert_allclose(projected_field(DIAG, normalize((1, 1, 1))),
                                   np.array([-1, 0, 1]) / math.sqrt(3), atol=1e-15)

    @given(matrices, units)
    def test_tangency(self, m, q):
        assert abs(np.dot(projected_field(m, q), q)) <= 1e-12 * max(1.0, np.abs(m).max())

    def test_tangency_bulk(self, rng):
        m = rng.uniform(-1, 1, size=(10_000, 3, 3))
        q = rng.normal(size=(10_000, 3))
        q /= np.linalg.norm(q, axis=1)[:, None]
        worst = max(abs(np.dot(projected_field(mi, qi), qi)) for mi, qi in zip(m, q))
        assert worst <= 1e-12


class TestExactFlow:
    def test_diagonal(self):
        spec = eigen_decompose(DIAG)
        np.testing.assert_allclose(exact_flow(spec, (1, 1, 1), 1.0), np.exp([1, 2, 3]), rtol=1e-14)

    def test_quarter_turn(self):
        block = np.array([[0.0, 0, 0], [0, 0, math.pi / 2], [0, -math.pi / 2, 0]])
        spec = eigen_decompose(block)
        np.testing.assert_allclose(exact_flow(spec, E2, 1.0), -E3, atol=1e-12)

    def test_against_matrix_exponential(self, rng):
        checked = 0
        while checked < 100:
            m = rng.uniform(-1, 1, size=(3, 3))
            spec = eigen_decompose(m)
            if isinstance(spec, Degenerate):
                continue
            checked += 1
            x0, t = rng.normal(size=3), rng.uniform(0, 3)
            ref = scipy.linalg.expm(t * m) @ x0
            np.testing.assert_allclose(exact_flow(spec, x0, t), ref, rtol=1e-8,
                                       atol=1e-8 * np.linalg.norm(ref))

    @given(matrices, st.floats(0, 2), st.floats(0, 2))
    def test_group_law(self, m, t1, t2):
        spec = eigen_decompose(m)
        if isinstance(spec, Degenerate):
            return
        x0 = np.array([0.3, -0.5, 0.8])
        flow = SphereFlow.of(spec)
        if np.linalg.cond(flow.basis) > 1e6:
            return
        a = exact_flow(spec, exact_flow(spec, x0, t1), t2)
        b = exact_flow(spec, x0, t1 + t2)
        assert np.linalg.norm(a - b) <= 1e-9 * np.linalg.norm(b) * np.linalg.cond(flow.basis)

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateSpectrum):
            exact_flow(eigen_decompose(np.eye(3)), E1, 1.0)


class TestSphereFlow:
    def test_identity_at_zero(self, rng):
        spec = eigen_decompose(rng.uniform(-1, 1, size=(3, 3)))
        q0 = normalize(rng.normal(size=3))
        np.testing.assert_allclose(flow_on_sphere(spec, q0, 0.0), q0, atol=1e-14)

    def test_converges_to_sink(self):
        spec = eigen_decompose(DIAG)
        assert geodesic(flow_on_sphere(spec, normalize((0.6, 0.7, 0.2)), 20.0), E3) < 1e-3

    def test_long_horizon_does_not_overflow(self):
        spec = eigen_decompose(100 * DIAG)
        q = flow_on_sphere(spec, normalize((1, 1, 1)), 1e4)
        np.testing.assert_allclose(q, E3, atol=1e-12)

    def test_underflow_guard(self):
        flow = SphereFlow.of(eigen_decompose(DIAG))
        with pytest.raises(Underflow):
            flow.sphere(np.zeros(3), 1.0)

    def test_semigroup(self, rng):
        spec = eigen_decompose(rng.uniform(-1, 1, size=(3, 3)))
        q0 = normalize(rng.normal(size=3))
        a = flow_on_sphere(spec, flow_on_sphere(spec, q0, 0.7), 1.1)
        assert geodesic(a, flow_on_sphere(spec, q0, 1.8)) < 1e-10


class TestIntegrator:
    def test_stationary(self):
        traj = integrate_projected(np.eye(3), normalize((1, 2, 2)), 3.0)
        assert np.max(np.abs(traj.points - normalize((1, 2, 2)))) < 1e-15

    def test_rotation(self):
        traj = integrate_projected(SKEW_Z, E1, math.pi / 2, 1e-3)
        assert np.linalg.norm(traj.end - E2) < 1e-8
        assert traj.times[-1] == pytest.approx(math.pi / 2)

    def test_trajectory_invariants(self, rng):
        traj = integrate_projected(rng.uniform(-1, 1, size=(3, 3)), rng.normal(size=3), 2.0)
        assert np.all(np.diff(traj.times) > 0)
        assert np.max(np.abs(np.linalg.norm(traj.points, axis=1) - 1)) <= 1e-10

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            integrate_projected(DIAG, E1, 1.0, 0.0)

    def test_against_closed_form(self, rng):
        assert suites.flow_commutation(rng, 40)["violations"] == 0

    def test_against_closed_form_t5(self, rng):
        for _ in range(20):
            m = rng.uniform(-1, 1, size=(3, 3))
            spec = eigen_decompose(m)
            if isinstance(spec, Degenerate):
                continue
            q0 = normalize(rng.normal(size=3))
            assert geodesic(flow_on_sphere(spec, q0, 5.0), integrate_projected(m, q0, 5.0).end) < 1e-6


class TestLongRunBehaviour:
    def test_octant_invariance_and_sink(self, rng):
        assert suites.octant_sink_suite(rng, 10)["violations"] == 0

    def test_cycle_dichotomy(self, rng):
        assert suites.cycle_dichotomy_suite(rng, 8)["violations"] == 0

    def test_circle_invariance(self, rng):
        assert suites.circle_invariance(rng, 20)["violations"] == 0


class TestSchedules:
    def test_rejects_non_positive_durations(self):
        with pytest.raises(ValueError):
            ControlSchedule(((0, 0.0),))
        with pytest.raises(ValueError):
            ControlSchedule(((0, math.inf),))

    def test_concatenation(self):
        s = ControlSchedule(((0, 0.5),)) + ControlSchedule(((1, 0.25),))
        assert s.segments == ((0, 0.5), (1, 0.25))
        assert s.duration == 0.75

    def test_simulation_matches_closed_form(self):
        sub = subsystem_from_matrices([DIAG, SKEW_Z + 0.5 * np.eye(3) + np.diag([0, 0, 0.3])])
        sched = ControlSchedule(((0, 0.5), (1, 0.75), (0, 0.25)))
        q0 = normalize((0.6, 0, 0.8))
        traj = simulate_schedule(sub, q0, sched)
        assert traj.times[-1] == pytest.approx(1.5)
        assert np.all(np.diff(traj.times) > 0)
        assert geodesic(traj.end, apply_schedule(sample_flows(sub), q0, sched)) < 1e-9


class TestMonteCarlo:
    def test_same_point(self):
        sub = subsystem_from_matrices([DIAG])
        assert monte_carlo_connect(sub, E1, E1).segments == ()

    def test_unreachable_target(self):
        # a single gradient-like flow never leaves the open octant triangle
        sub = subsystem_from_matrices([DIAG])
        assert monte_carlo_connect(sub, normalize((1, 1, 1)), normalize((-1, -1, -1)),
                                   budget=500) is None

    def test_argument_checks(self):
        sub = subsystem_from_matrices([DIAG])
        with pytest.raises(ValueError):
            monte_carlo_connect(sub, E1, E2, tol=0.0)
        with pytest.raises(ValueError):
            monte_carlo_connect(sub, E1, E2, budget=0)

    def test_found_schedule_replays(self, theorem_c):
        _, sub, _ = theorem_c
        a, b = normalize((1, -2, 0.5)), normalize((-0.3, 0.4, -1))
        sched = monte_carlo_connect(sub, a, b, 0.05, 10_000, 3)
        assert sched is not None and sched.segments
        assert geodesic(apply_schedule(sample_flows(sub), a, sched), b) <= 0.05
        assert geodesic(simulate_schedule(sub, a, sched).end, b) <= 0.05 + 1e-6

    def test_reproducible(self, theorem_c):
        _, sub, _ = theorem_c
        a, b = normalize((0.2, 1, 0)), normalize((0, -1, 0.3))
        assert monte_carlo_connect(sub, a, b, rng_seed=9) == monte_carlo_connect(sub, a, b, rng_seed=9)
