"""Independent L1 time-stepping oracle for the variable-order problem.

The L1 scheme replaces the solution by its piecewise-linear interpolant
in time and integrates the memory kernel against it exactly, which turns
the fractional derivative at ``t_m`` into a weighted sum of increments,

    D^b u(t_m) ~ sum_k b_k (u_{k+1} - u_k),
    b_k = ((m-k)**(1-b) - (m-k-1)**(1-b)) * tau**(-b) / Gamma(2-b).

At step ``m`` the exponent is the order at the *current* time ``t_m``,
so crossing a breakpoint reweights the entire history - exactly the
operator the segment recursion solves.  The scheme is kept deliberately
plain (full history, one implicit solve per step) because its job is to
cross-check the spectral construction, not to be fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import DomainError, NumericError
from .operator import GridOperator, ModalBasis
from .schedule import OrderSchedule
from .solver import ProblemSpec, ZeroSource
from .special import gamma_fn

__all__ = [
    "L1Grid",
    "l1_weights",
    "solve_mode_l1",
    "solve_full_l1_fd",
]

#: Largest admissible defect when checking that the step divides every
#: segment length.
ALIGNMENT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class L1Grid:
    """Uniform time grid ``t_m = m * step`` for the L1 march."""

    step: float
    num_steps: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.step) and self.step > 0.0):
            raise DomainError(f"step must be positive, got {self.step}")
        if self.num_steps < 1:
            raise DomainError(
                f"need at least one step, got {self.num_steps}")

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.num_steps + 1)

    @property
    def horizon(self) -> float:
        return self.step * self.num_steps

    @classmethod
    def for_schedule(cls, schedule: OrderSchedule, step: float) -> "L1Grid":
        """Grid over the schedule's horizon, breakpoint-aligned.

        Every breakpoint must fall on a grid node: the order jump happens
        exactly there, and a step straddling it would smear the jump.
        """
        if not isinstance(schedule, OrderSchedule):
            raise DomainError("schedule must be an OrderSchedule")
        step = float(step)
        if not step > 0.0:
            raise DomainError(f"step must be positive, got {step}")
        for t in schedule.breakpoints:
            if abs(round(t / step) * step - t) > ALIGNMENT_TOLERANCE:
                raise DomainError(
                    f"step {step} does not hit breakpoint {t} "
                    f"within {ALIGNMENT_TOLERANCE}")
        return cls(step=step, num_steps=round(schedule.horizon / step))


def l1_weights(order: float, m: int, tau: float) -> np.ndarray:
    """Increment weights of the L1 sum at step ``m``.

    Entry ``k`` multiplies ``u_{k+1} - u_k``; the weights are the exact
    kernel moments of the piecewise-linear reconstruction, positive, and
    decreasing with history depth.
    """
    if not 0.0 < order < 1.0:
        raise DomainError(f"order must be in (0, 1), got {order}")
    if m < 1:
        raise DomainError(f"step index must be >= 1, got {m}")
    if not tau > 0.0:
        raise DomainError(f"step must be positive, got {tau}")
    depth = np.arange(m, 0, -1, dtype=float)
    scale = tau ** (-order) / gamma_fn(2.0 - order)
    return (depth ** (1.0 - order) - (depth - 1.0) ** (1.0 - order)) * scale


def _segment_of_step(grid: L1Grid, schedule: OrderSchedule) -> np.ndarray:
    """Schedule segment index of each grid node, order-evaluation view.

    A node on a breakpoint belongs to the segment starting there (the
    order is right-continuous); the horizon end belongs to the final
    segment.
    """
    marks = [round(t / grid.step) for t in schedule.breakpoints]
    out = np.searchsorted(np.asarray(marks), np.arange(grid.num_steps + 1),
                          side="right") - 1
    return np.minimum(out, schedule.num_segments - 1)


class _IncrementLadder:
    """Per-order cache of the power differences behind the L1 weights."""

    def __init__(self, num_steps: int):
        self.num_steps = num_steps
        self._diffs: dict[float, np.ndarray] = {}
        self._scales: dict[float, float] = {}

    def weights(self, order: float, m: int, tau: float) -> np.ndarray:
        if order not in self._diffs:
            p = np.arange(self.num_steps + 1, dtype=float) ** (1.0 - order)
            self._diffs[order] = np.diff(p)
            self._scales[order] = tau ** (-order) / gamma_fn(2.0 - order)
        return self._diffs[order][:m][::-1] * self._scales[order]


def solve_mode_l1(lam: float, f_n, schedule: OrderSchedule, u0_n: float,
                  grid: L1Grid) -> np.ndarray:
    """March one mode equation with the L1 scheme; values at grid times.

    Each step solves the implicit balance
    ``(b_{m-1} + lam) u_m = f(t_m) + b_{m-1} u_{m-1} - sum b_k du_k``
    with the weights taken at the order of the current time.
    """
    if not isinstance(grid, L1Grid):
        raise DomainError("grid must be an L1Grid")
    if lam < 0.0:
        raise DomainError(f"modal eigenvalue must be >= 0, got {lam}")
    if abs(grid.horizon - schedule.horizon) > ALIGNMENT_TOLERANCE:
        raise DomainError("grid horizon does not match the schedule")

    times = grid.times
    loads = np.asarray(f_n(times), dtype=float)
    if loads.shape != times.shape:
        raise DomainError("source callable must map times to like shape")
    seg = _segment_of_step(grid, schedule)
    ladder = _IncrementLadder(grid.num_steps)

    u = np.empty(times.size)
    u[0] = float(u0_n)
    du = np.empty(times.size - 1)
    for m in range(1, times.size):
        order = schedule.orders[seg[m]]
        w = ladder.weights(order, m, grid.step)
        hist = float(np.dot(w[:-1], du[:m - 1])) if m > 1 else 0.0
        u[m] = (loads[m] + w[-1] * u[m - 1] - hist) / (w[-1] + lam)
        du[m - 1] = u[m] - u[m - 1]
    if not np.all(np.isfinite(u)):
        raise NumericError("non-finite L1 trajectory")
    return u


def solve_full_l1_fd(spec: ProblemSpec, grid: L1Grid,
                     spatial_points: int) -> np.ndarray:
    """Full finite-difference space-time L1 solve on the tensor grid.

    Returns ``u[i, m]`` with ``i`` over all ``spatial_points + 2`` grid
    abscissae (Dirichlet rows exactly zero) and ``m`` over grid times.
    The spatial operator is the symmetric second-order stencil; each
    step performs one banded Cholesky solve, with the factorization
    reused while the order (and hence the diagonal shift) is unchanged.
    """
    if not isinstance(spec, ProblemSpec):
        raise DomainError("spec must be a ProblemSpec")
    if not isinstance(grid, L1Grid):
        raise DomainError("grid must be an L1Grid")
    if spatial_points < 16:
        raise DomainError(
            f"need at least 16 interior points, got {spatial_points}")
    if abs(grid.horizon - spec.schedule.horizon) > ALIGNMENT_TOLERANCE:
        raise DomainError("grid horizon does not match the schedule")

    schedule = spec.schedule
    op = GridOperator(spec.operator, spatial_points)
    diag, off = op.tridiagonal()
    xs = op.x
    source = spec.source or ZeroSource(spec.num_modes)

    # data synthesized from the analytic eigenfunctions: this is input
    # data, not solver output, so no spectral machinery is borrowed
    basis = ModalBasis(spec.operator, spec.num_modes)
    shapes = basis.evaluation_matrix(xs)  # (P, N)
    u_now = shapes @ np.asarray(spec.initial_coefficients)
    times = grid.times
    mode_loads = np.vstack([
        np.asarray(source.mode_values(n, times), dtype=float)
        for n in range(1, spec.num_modes + 1)])  # (N, M+1)

    seg = _segment_of_step(grid, schedule)
    ladder = _IncrementLadder(grid.num_steps)
    factor_cache: dict[float, np.ndarray] = {}

    out = np.zeros((spatial_points + 2, times.size))
    out[1:-1, 0] = u_now
    du = np.empty((grid.num_steps, spatial_points))
    for m in range(1, times.size):
        order = schedule.orders[seg[m]]
        w = ladder.weights(order, m, grid.step)
        if order not in factor_cache:
            ab = np.zeros((2, spatial_points))
            ab[0, 1:] = off
            ab[1, :] = diag + w[-1]
            factor_cache[order] = cholesky_banded(ab)
        rhs = shapes @ mode_loads[:, m] + w[-1] * u_now
        if m > 1:
            rhs -= np.dot(w[:-1], du[:m - 1])
        u_next = cho_solve_banded((factor_cache[order], False), rhs)
        du[m - 1] = u_next - u_now
        u_now = u_next
        out[1:-1, m] = u_now
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite L1 field")
    return out
