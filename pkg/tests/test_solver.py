"""Behavioral tests of the per-mode segment recursion.

The two closed-form anchors are the constant-order relaxation
``E_{b,1}(-lam t**b)`` and manufactured smooth trajectories; the
multi-segment runs must reproduce the former through the memory
machinery whenever all segment orders coincide.
"""

import math

import numpy as np
import pytest

from fracstep.errors import DomainError, NumericError
from fracstep.operator import OperatorSpec
from fracstep.schedule import OrderSchedule
from fracstep.solver import (
    ProblemSpec,
    SeparableSource,
    ZeroSource,
    solve,
)
from fracstep.special import MLParams, gamma_fn, ml, relaxation

OP = OperatorSpec()
LAM1 = math.pi ** 2
BETA = 0.5
TIMES = np.linspace(0.0, 1.0, 101)


def _relax_reference(lam):
    return np.array([relaxation(BETA, lam, t) for t in TIMES])


@pytest.fixture(scope="module")
def single_run():
    sched = OrderSchedule(breakpoints=(0.0, 1.0), orders=(BETA,))
    prob = ProblemSpec(schedule=sched, operator=OP,
                       initial_coefficients=(1.0,))
    return solve(prob, n_cells=128, n_quad=24)


@pytest.fixture(scope="module")
def split_run():
    sched = OrderSchedule(breakpoints=(0.0, 0.4, 1.0), orders=(BETA, BETA))
    prob = ProblemSpec(schedule=sched, operator=OP,
                       initial_coefficients=(1.0,))
    return solve(prob, n_cells=256, n_quad=24)


@pytest.fixture(scope="module")
def mixed_run():
    sched = OrderSchedule(breakpoints=(0.0, 0.5, 1.0), orders=(0.3, 0.8))
    prob = ProblemSpec(schedule=sched, operator=OP,
                       initial_coefficients=(1.0,))
    return solve(prob, n_cells=96, n_quad=24)


class TestSources:
    def test_zero_source(self):
        src = ZeroSource(3)
        ts = np.linspace(0.0, 1.0, 7)
        assert src.num_modes == 3
        assert np.all(src.mode_values(2, ts) == 0.0)
        assert np.all(src.mode_derivative(2, ts) == 0.0)
        assert src.is_zero_mode(1) and src.is_zero_mode(3)
        with pytest.raises(DomainError):
            ZeroSource(0)

    def test_separable_source_routes_coefficients(self):
        src = SeparableSource(coefficients=(2.0, 0.0),
                              time_value=lambda t: np.asarray(t) ** 2,
                              time_derivative=lambda t: 2.0 * np.asarray(t))
        ts = np.array([0.5, 1.0])
        np.testing.assert_allclose(src.mode_values(1, ts), 2.0 * ts ** 2)
        np.testing.assert_allclose(src.mode_derivative(1, ts), 4.0 * ts)
        assert np.all(src.mode_values(2, ts) == 0.0)
        assert not src.is_zero_mode(1)
        assert src.is_zero_mode(2)

    def test_separable_source_validation(self):
        good = lambda t: np.asarray(t)
        with pytest.raises(DomainError):
            SeparableSource((), good, good)
        with pytest.raises(DomainError):
            SeparableSource(((1.0, 2.0),), good, good)
        with pytest.raises(DomainError):
            SeparableSource((math.nan,), good, good)


class TestProblemSpec:
    SCHED = OrderSchedule(breakpoints=(0.0, 0.5, 1.0), orders=(0.3, 0.8))

    def test_default_margins_take_half_the_room(self):
        prob = ProblemSpec(schedule=self.SCHED, operator=OP,
                           initial_coefficients=(1.0,))
        assert prob.regularity_margins == pytest.approx((0.35, 0.1))

    def test_margin_validation(self):
        with pytest.raises(DomainError):
            ProblemSpec(schedule=self.SCHED, operator=OP,
                        initial_coefficients=(1.0,),
                        regularity_margins=(0.35,))
        with pytest.raises(DomainError):
            ProblemSpec(schedule=self.SCHED, operator=OP,
                        initial_coefficients=(1.0,),
                        regularity_margins=(0.8, 0.1))
        with pytest.raises(DomainError):
            ProblemSpec(schedule=self.SCHED, operator=OP,
                        initial_coefficients=(1.0,),
                        regularity_margins=(0.0, 0.1))

    def test_initial_coefficient_validation(self):
        with pytest.raises(DomainError):
            ProblemSpec(schedule=self.SCHED, operator=OP,
                        initial_coefficients=())
        with pytest.raises(DomainError):
            ProblemSpec(schedule=self.SCHED, operator=OP,
                        initial_coefficients=(1.0, math.inf))

    def test_source_mode_count_must_match(self):
        with pytest.raises(DomainError):
            ProblemSpec(schedule=self.SCHED, operator=OP,
                        initial_coefficients=(1.0, 0.0),
                        source=ZeroSource(3))

    def test_num_modes(self):
        prob = ProblemSpec(schedule=self.SCHED, operator=OP,
                           initial_coefficients=(1.0, 0.5, 0.0))
        assert prob.num_modes == 3


class TestConstantOrder:
    def test_matches_relaxation_closed_form(self, single_run):
        lam = single_run.basis.eigenvalues[0]
        got = single_run.mode_trajectory(1, TIMES)
        assert np.abs(got - _relax_reference(lam)).max() <= 1e-8

    def test_initial_value_exact(self, single_run):
        assert single_run.modes[0].value(0.0) == 1.0

    def test_derivative_closed_form(self, single_run):
        lam = single_run.basis.eigenvalues[0]
        par = MLParams(BETA, BETA)
        for t in (0.01, 0.2, 0.7, 1.0):
            want = -lam * t ** (BETA - 1.0) * ml(par, -lam * t ** BETA)
            got = single_run.modes[0].derivative(t)
            assert got == pytest.approx(want, rel=1e-9)

    def test_derivative_rejected_at_initial_time(self, single_run):
        with pytest.raises(DomainError):
            single_run.modes[0].derivative(0.0)

    def test_monotone_decay(self, single_run):
        vals = single_run.mode_trajectory(1, TIMES)
        assert np.all(vals > 0.0)
        assert np.all(np.diff(vals) < 0.0)

    def test_rejects_times_outside_horizon(self, single_run):
        with pytest.raises(DomainError):
            single_run.modes[0].value(1.5)
        with pytest.raises(DomainError):
            single_run.modes[0].value(-0.1)

    def test_trajectory_preserves_shape(self, single_run):
        grid = TIMES[:10].reshape(2, 5)
        out = single_run.mode_trajectory(1, grid)
        assert out.shape == (2, 5)


class TestEqualOrderSplit:
    def test_segmentation_invariance(self, split_run):
        # splitting at 0.4 with equal orders must not disturb the
        # constant-order trajectory; the memory integrals carry the load
        lam = split_run.basis.eigenvalues[0]
        got = split_run.mode_trajectory(1, TIMES)
        assert np.abs(got - _relax_reference(lam)).max() <= 1e-6

    def test_junction_gap_exactly_zero(self, split_run):
        gaps = split_run.junction_gaps()
        assert gaps.shape == (1,)
        assert gaps[0] == 0.0

    def test_entry_value_is_handed_exactly(self, split_run):
        first, second = split_run.modes[0].segments
        assert second.entry_value == first.exit_value
        assert second.value(0.4) == first.exit_value

    def test_derivative_continues_smoothly(self, split_run):
        # equal orders leave the true derivative smooth across the
        # junction; the representation reproduces it to mesh accuracy
        lam = split_run.basis.eigenvalues[0]
        par = MLParams(BETA, BETA)
        for t in (0.45, 0.6, 0.9):
            want = -lam * t ** (BETA - 1.0) * ml(par, -lam * t ** BETA)
            got = split_run.modes[0].derivative(t)
            assert got == pytest.approx(want, rel=1e-4)

    def test_derivative_at_junction_is_left_limit(self, split_run):
        first = split_run.modes[0].segments[0]
        got = split_run.modes[0].derivative(0.4)
        assert got == first.exit_derivative


class TestThreeSegmentChain:
    def test_double_split_still_invariant(self):
        sched = OrderSchedule(breakpoints=(0.0, 0.3, 0.6, 1.0),
                              orders=(BETA, BETA, BETA))
        prob = ProblemSpec(schedule=sched, operator=OP,
                           initial_coefficients=(1.0,))
        field = solve(prob, n_cells=96, n_quad=24)
        lam = field.basis.eigenvalues[0]
        got = field.mode_trajectory(1, TIMES)
        assert np.abs(got - _relax_reference(lam)).max() <= 1e-5
        assert np.all(field.junction_gaps() == 0.0)


class TestMixedOrders:
    def test_decay_and_positivity(self, mixed_run):
        tr = mixed_run.mode_trajectory(1, TIMES)
        assert np.all(tr > 0.0)
        assert np.all(np.diff(tr) <= 0.0)

    def test_junction_gap_exactly_zero(self, mixed_run):
        assert np.all(mixed_run.junction_gaps() == 0.0)

    def test_blowup_exponent_after_order_jump(self, mixed_run):
        # the derivative right of the jump blows up like dt**(b1 - 1)
        mode = mixed_run.modes[0]
        offsets = np.array([1e-6, 1e-5, 1e-4, 1e-3])
        logs = np.log([abs(mode.derivative(0.5 + d)) for d in offsets])
        slope = np.polyfit(np.log(offsets), logs, 1)[0]
        assert slope == pytest.approx(0.8 - 1.0, abs=0.05)

    def test_value_routing_at_horizon_end(self, mixed_run):
        # t == T belongs to the final segment
        end = mixed_run.modes[0].segments[-1]
        assert mixed_run.modes[0].value(1.0) == end.exit_value


class TestLinearity:
    SCHED = OrderSchedule(breakpoints=(0.0, 1.0), orders=(BETA,))

    def _solve_scaled(self, s):
        prob = ProblemSpec(schedule=self.SCHED, operator=OP,
                           initial_coefficients=(s,))
        return solve(prob, n_cells=64, n_quad=16)

    def test_doubling_is_exact(self):
        base = self._solve_scaled(1.0).mode_trajectory(1, TIMES)
        twice = self._solve_scaled(2.0).mode_trajectory(1, TIMES)
        assert np.array_equal(twice, 2.0 * base)

    def test_superposition(self):
        a = self._solve_scaled(1.0).mode_trajectory(1, TIMES)
        b = self._solve_scaled(0.5).mode_trajectory(1, TIMES)
        c = self._solve_scaled(1.5).mode_trajectory(1, TIMES)
        np.testing.assert_allclose(a + b, c, rtol=1e-9, atol=1e-15)


class TestForcedProblems:
    def test_manufactured_linear_trajectory(self):
        # source chosen so the mode solution is exactly 1 + t
        lam = LAM1
        c = 1.0 / gamma_fn(2.0 - BETA)

        def tv(t):
            t = np.asarray(t, dtype=float)
            return c * t ** (1.0 - BETA) + lam * (1.0 + t)

        def td(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore"):
                return c * (1.0 - BETA) * t ** (-BETA) + lam

        src = SeparableSource((1.0,), tv, td)
        sched = OrderSchedule(breakpoints=(0.0, 1.0), orders=(BETA,))
        prob = ProblemSpec(schedule=sched, operator=OP,
                           initial_coefficients=(1.0,), source=src)
        field = solve(prob, n_cells=128, n_quad=24)
        got = field.mode_trajectory(1, TIMES)
        assert np.abs(got - (1.0 + TIMES)).max() <= 1e-5
        for t in (0.3, 0.8):
            assert field.modes[0].derivative(t) == pytest.approx(1.0,
                                                                 abs=1e-3)

    def test_constant_source_closed_form(self):
        # f == q constant: v = E_{b,1} + q t**b E_{b,b+1}
        q = 3.0
        src = SeparableSource(
            (1.0,),
            lambda t: np.full_like(np.asarray(t, dtype=float), q),
            lambda t: np.zeros_like(np.asarray(t, dtype=float)))
        sched = OrderSchedule(breakpoints=(0.0, 1.0), orders=(BETA,))
        prob = ProblemSpec(schedule=sched, operator=OP,
                           initial_coefficients=(1.0,), source=src)
        field = solve(prob, n_cells=128, n_quad=24)
        lam = field.basis.eigenvalues[0]
        p1, p2 = MLParams(BETA, 1.0), MLParams(BETA, BETA + 1.0)
        for t in (0.25, 0.5, 1.0):
            want = ml(p1, -lam * t ** BETA) \
                + q * t ** BETA * ml(p2, -lam * t ** BETA)
            assert field.modes[0].value(t) == pytest.approx(want, abs=1e-9)

    def test_nan_source_names_the_subproblem(self):
        src = SeparableSource(
            (1.0,),
            lambda t: np.full_like(np.asarray(t, dtype=float), math.nan),
            lambda t: np.zeros_like(np.asarray(t, dtype=float)))
        sched = OrderSchedule(breakpoints=(0.0, 1.0), orders=(BETA,))
        prob = ProblemSpec(schedule=sched, operator=OP,
                           initial_coefficients=(1.0,), source=src)
        with pytest.raises(NumericError) as info:
            solve(prob, n_cells=64, n_quad=16)
        assert info.value.mode == 1
        assert info.value.segment == 0


class TestZeroModes:
    def test_unforced_zero_mode_short_circuits(self):
        sched = OrderSchedule(breakpoints=(0.0, 0.5, 1.0),
                              orders=(0.3, 0.8))
        prob = ProblemSpec(schedule=sched, operator=OP,
                           initial_coefficients=(1.0, 0.0))
        field = solve(prob, n_cells=64, n_quad=16)
        assert field.modes[1].is_zero
        assert field.modes[1].value(0.7) == 0.0
        assert field.modes[1].derivative(0.7) == 0.0
        assert np.all(field.mode_trajectory(2, TIMES) == 0.0)

    def test_all_zero_data_gives_zero_field(self):
        sched = OrderSchedule(breakpoints=(0.0, 1.0), orders=(BETA,))
        prob = ProblemSpec(schedule=sched, operator=OP,
                           initial_coefficients=(0.0, 0.0))
        field = solve(prob, n_cells=64, n_quad=16)
        xs = np.linspace(0.0, 1.0, 11)
        assert np.all(field.evaluate_grid(xs, TIMES[:5]) == 0.0)


class TestSolutionField:
    def test_evaluate_vanishes_on_boundary(self, single_run):
        for x in (0.0, 1.0):
            assert abs(single_run.evaluate(x, 0.5)) < 1e-12

    def test_evaluate_grid_shape(self, single_run):
        xs = np.linspace(0.0, 1.0, 7)
        out = single_run.evaluate_grid(xs, TIMES[:5])
        assert out.shape == (7, 5)

    def test_evaluate_matches_mode_synthesis(self, single_run):
        x = 0.37
        got = single_run.evaluate(x, 0.6)
        want = single_run.modes[0].value(0.6) \
            * math.sqrt(2.0) * math.sin(math.pi * x)
        assert got == pytest.approx(want, rel=1e-12)

    def test_mode_index_validation(self, single_run):
        with pytest.raises(DomainError):
            single_run.mode_trajectory(2, TIMES)


class TestSolveValidation:
    SCHED = OrderSchedule(breakpoints=(0.0, 1.0), orders=(BETA,))

    def test_rejects_bad_resolutions(self):
        prob = ProblemSpec(schedule=self.SCHED, operator=OP,
                           initial_coefficients=(1.0,))
        with pytest.raises(DomainError):
            solve(prob, n_cells=4)
        with pytest.raises(DomainError):
            solve(prob, n_quad=2)

    def test_rejects_non_problem(self):
        with pytest.raises(DomainError):
            solve("not a problem")
