"""Quadrature rules for integrands with endpoint power singularities.

Every integral in the segment recursion has one of three shapes and each
gets a dedicated rule here:

* ``int_a^b (s-a)**p * (b-s)**q * g(s) ds`` with smooth ``g``: Gauss-Jacobi
  after an affine map, so the endpoint weights are handled exactly.
* ``int_a^b (s-a)**p * (t-s)**(-kappa) * g(s) ds`` with ``t >= b``: the
  memory integral of a past segment.  When ``t`` is well clear of ``b`` the
  kernel factor is smooth and a single Jacobi rule suffices; when ``t``
  approaches ``b`` the interval is split and the nearly singular right part
  is integrated on an exponentially stretched grid (or with an exact
  Jacobi weight when ``t == b``).
* ``int_a^t K(t-s) * g(s) ds`` with the subdiffusive impulse response
  ``K``: product integration against samples of ``g`` on a mesh, using
  exact cell masses of ``K`` obtained from its closed-form antiderivative.
  The kernel is never evaluated pointwise, so its blow-up at ``s = t``
  costs nothing.

Graded meshes concentrate nodes near an endpoint with algebraic rate and
guard against node collapse in double precision.
"""

from __future__ import annotations

import functools
import math

import numpy as np
from scipy.special import roots_jacobi

from .errors import DomainError
from .special import ml_values

__all__ = [
    "graded_mesh",
    "gauss_cell_integral",
    "jacobi_weighted_integral",
    "weighted_history_integral",
    "scaled_power_history",
    "power_kernel_convolve",
    "duhamel_convolve",
    "composite_graded_integral",
]

#: Past-segment kernel is treated as smooth once the evaluation time is at
#: least this fraction of the segment width beyond the segment's end.
FAR_FIELD_FRACTION = 0.1

#: Cap on the first-cell compression of a graded mesh: the smallest cell
#: never drops below this fraction of the interval, which bounds the
#: grading strength actually applied for any requested exponent.
MIN_CELL_FRACTION = 1e-14

_EXP_CELL_SPAN = 1.5  # cell length in log coordinates for stretched grids


@functools.lru_cache(maxsize=256)
def _jacobi_rule(n: int, p: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    # scipy's convention: weight (1-x)**alpha * (1+x)**beta on (-1, 1);
    # our left exponent p multiplies (s-a), i.e. (1+x) after the map.
    # p + q == -1 trips a harmless divide-by-zero in a discarded branch of
    # scipy's recurrence setup, so silence it locally.
    with np.errstate(divide="ignore", invalid="ignore"):
        x, w = roots_jacobi(n, q, p)
    return x, w


@functools.lru_cache(maxsize=64)
def _legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def graded_mesh(a: float, b: float, n: int, grading: float = 2.0,
                side: str = "left") -> np.ndarray:
    """Nodes of a mesh on ``[a, b]`` algebraically refined toward an end.

    With ``side="left"`` the nodes are ``a + (b-a) * (i/n)**grading``; the
    ``"right"`` variant mirrors them and ``"both"`` grades half the cells
    toward each end.  The effective grading is reduced if the requested one
    would compress the smallest cell below ``MIN_CELL_FRACTION`` of the
    interval, which keeps all nodes distinct in double precision.
    """
    a, b = float(a), float(b)
    n = int(n)
    if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
        raise DomainError(f"need a finite interval with a < b, got [{a}, {b}]")
    if n < 1:
        raise DomainError(f"need at least one cell, got n={n}")
    if grading < 1.0:
        raise DomainError(f"grading must be >= 1, got {grading}")
    if side not in ("left", "right", "both"):
        raise DomainError(f"side must be left, right or both, got {side!r}")

    if side == "both":
        if n < 2:
            raise DomainError("two-sided grading needs at least two cells")
        half = 0.5 * (a + b)
        nl = n // 2
        left = graded_mesh(a, half, nl, grading, "left")
        right = graded_mesh(half, b, n - nl, grading, "right")
        return np.concatenate([left, right[1:]])

    if n > 1:
        # n**(-r) >= MIN_CELL_FRACTION  <=>  r <= log(1/frac) / log(n)
        grading = min(grading, math.log(1.0 / MIN_CELL_FRACTION) / math.log(n))
    frac = (np.arange(n + 1) / n) ** grading
    if side == "right":
        frac = 1.0 - frac[::-1]
    nodes = a + (b - a) * frac
    nodes[0], nodes[-1] = a, b
    return nodes


def gauss_cell_integral(smooth, a: float, b: float, n: int = 24) -> float:
    """Plain Gauss-Legendre integral of a smooth callable over ``[a, b]``."""
    if b <= a:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    x, w = _legendre_rule(int(n))
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * float(np.dot(w, np.asarray(smooth(mid + half * x),
                                             dtype=float)))


def jacobi_weighted_integral(smooth, a: float, b: float,
                             left_exponent: float = 0.0,
                             right_exponent: float = 0.0,
                             n: int = 24) -> float:
    """``int_a^b (s-a)**p * (b-s)**q * smooth(s) ds`` by Gauss-Jacobi.

    Both exponents must exceed -1 for integrability; ``smooth`` receives a
    node array and must return values of the smooth factor only, the
    endpoint weights are supplied by the rule.
    """
    a, b = float(a), float(b)
    p, q = float(left_exponent), float(right_exponent)
    if b <= a:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    if p <= -1.0 or q <= -1.0:
        raise DomainError(
            f"endpoint exponents must exceed -1, got p={p}, q={q}")
    x, w = _jacobi_rule(int(n), p, q)
    half = 0.5 * (b - a)
    nodes = a + half * (x + 1.0)
    vals = np.asarray(smooth(nodes), dtype=float)
    return half ** (p + q + 1.0) * float(np.dot(w, vals))


def _stretched_kernel_integral(smooth_of_u, lo: float, hi: float,
                               kappa: float, n: int) -> float:
    """``int_lo^hi u**(-kappa) * smooth_of_u(u) du`` with ``0 < lo < hi``.

    Substituting ``u = lo * exp(v)`` moves the origin singularity to
    ``v -> -inf``; composite Gauss-Legendre on cells of bounded span in
    ``v`` then converges rapidly even when ``lo`` is tiny.
    """
    span = math.log(hi / lo)
    cells = max(1, math.ceil(span / _EXP_CELL_SPAN))
    edges = lo * np.exp(np.linspace(0.0, span, cells + 1))
    edges[-1] = hi
    x, w = _legendre_rule(int(n))
    total = 0.0
    for ua, ub in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (ua + ub), 0.5 * (ub - ua)
        u = mid + half * x
        total += half * float(np.dot(w, u ** (-kappa) * smooth_of_u(u)))
    return total


def weighted_history_integral(smooth, a: float, b: float, t: float,
                              kernel_exponent: float,
                              left_exponent: float = 0.0,
                              n: int = 32) -> float:
    """``int_a^b (s-a)**p * (t-s)**(-kappa) * smooth(s) ds`` for ``t >= b``.

    This is the memory footprint of a past segment ``[a, b]`` evaluated at
    a later time ``t``.  The kernel exponent ``kappa`` may lie in (0, 2):
    below one the integral exists up to ``t == b``, while the stronger
    kernels of memory *rates* (exponent ``1 + order``) are only integrable
    with strict separation ``t > b``.  The left exponent ``p`` must exceed
    -1.  Three regimes:

    * far field (``t - b`` at least ``FAR_FIELD_FRACTION`` of the width):
      the kernel is smooth on the segment, one Jacobi rule in the left
      weight handles everything;
    * near field with ``t > b``: split at the midpoint; the left half is a
      Jacobi rule, the right half is integrated in the kernel variable
      ``u = t - s`` on a stretched grid reaching down to ``u = t - b``;
    * coincident (``t == b``, needs ``kappa < 1``): the right half gains
      an exact Jacobi weight ``u**(-kappa)`` instead.
    """
    a, b, t = float(a), float(b), float(t)
    kappa = float(kernel_exponent)
    p = float(left_exponent)
    if b <= a:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    if t < b:
        raise DomainError(f"evaluation time {t} precedes segment end {b}")
    if not 0.0 < kappa < 2.0:
        raise DomainError(f"kernel exponent must be in (0, 2), got {kappa}")
    if kappa >= 1.0 and t == b:
        raise DomainError(
            f"kernel exponent {kappa} is not integrable up to t == b")
    if p <= -1.0:
        raise DomainError(f"left exponent must exceed -1, got {p}")

    width = b - a
    if t - b >= FAR_FIELD_FRACTION * width:
        return jacobi_weighted_integral(
            lambda s: (t - s) ** (-kappa) * np.asarray(smooth(s), dtype=float),
            a, b, left_exponent=p, n=n)

    mid = 0.5 * (a + b)
    left = jacobi_weighted_integral(
        lambda s: (t - s) ** (-kappa) * np.asarray(smooth(s), dtype=float),
        a, mid, left_exponent=p, n=n)

    def right_smooth(u):
        s = t - np.asarray(u, dtype=float)
        return (s - a) ** p * np.asarray(smooth(s), dtype=float)

    delta = t - b
    if delta == 0.0:
        right = jacobi_weighted_integral(
            lambda u: right_smooth(u), 0.0, t - mid,
            left_exponent=-kappa, n=n)
    else:
        right = _stretched_kernel_integral(right_smooth, delta, t - mid,
                                           kappa, n)
    return left + right


def scaled_power_history(profile, a: float, b: float, t: float,
                         kernel_exponent: float, power: float,
                         n: int = 24, n_cells: int = 8) -> float:
    """Memory integral of a fractional impulse response shape.

    Computes ``int_a^b (t-s)**(-kappa) * (s-a)**(power-1)
    * profile((s-a)**power) ds`` for ``t >= b`` with analytic ``profile``
    (typically a Mittag-Leffler factor).  The profile's argument scales
    like ``(s-a)**power``, so after peeling the algebraic weight the
    remaining factor still has a branch point at ``s = a`` and a plain
    Jacobi rule stalls at low accuracy.  Substituting ``w = (s-a)**power``
    absorbs the weight exactly and removes the branch:

        (1/power) * int_0^{(b-a)**power}
            (t - a - w**(1/power))**(-kappa) * profile(w) dw.

    Composite Gauss on a mildly left-graded mesh (the map ``w**(1/power)``
    has limited smoothness at zero) integrates this to near machine
    accuracy in the far field.  Near ``t == b`` the right half is done in
    the original variable like in :func:`weighted_history_integral`, where
    the peeled weight is smooth.
    """
    a, b, t = float(a), float(b), float(t)
    kappa = float(kernel_exponent)
    power = float(power)
    if b <= a:
        raise DomainError(f"need a < b, got [{a}, {b}]")
    if t < b:
        raise DomainError(f"evaluation time {t} precedes segment end {b}")
    if not 0.0 < kappa < 2.0:
        raise DomainError(f"kernel exponent must be in (0, 2), got {kappa}")
    if kappa >= 1.0 and t == b:
        raise DomainError(
            f"kernel exponent {kappa} is not integrable up to t == b")
    if not 0.0 < power < 1.0:
        raise DomainError(f"power must be in (0, 1), got {power}")

    inv = 1.0 / power
    x, w = _legendre_rule(int(n))

    def transformed_part(s_hi: float) -> float:
        # integral over [a, s_hi] in the scaled variable
        edges = graded_mesh(0.0, (s_hi - a) ** power, int(n_cells),
                            3.0, "left")
        total = 0.0
        for ca, cb in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (ca + cb), 0.5 * (cb - ca)
            xi = mid + half * x
            kern = (t - a - xi ** inv) ** (-kappa)
            total += half * float(np.dot(
                w, kern * np.asarray(profile(xi), dtype=float)))
        return total * inv

    width = b - a
    if t - b >= FAR_FIELD_FRACTION * width:
        return transformed_part(b)

    mid = 0.5 * (a + b)

    def right_smooth(u):
        s = t - np.asarray(u, dtype=float)
        ds = s - a
        return ds ** (power - 1.0) * np.asarray(profile(ds ** power),
                                                dtype=float)

    delta = t - b
    if delta == 0.0:
        right = jacobi_weighted_integral(right_smooth, 0.0, t - mid,
                                         left_exponent=-kappa, n=n)
    else:
        right = _stretched_kernel_integral(right_smooth, delta, t - mid,
                                           kappa, n)
    return transformed_part(mid) + right


def power_kernel_convolve(nodes: np.ndarray, samples: np.ndarray, t: float,
                          kernel_exponent: float) -> float:
    """``int (t-s)**(-kappa) * g(s) ds`` for tabulated ``g``, ``t`` beyond.

    ``g`` is the piecewise-linear interpolant of ``samples`` on ``nodes``
    and the integral runs over the full node range, which must end at or
    before ``t`` (strictly before for ``kappa >= 1``).  Cells close to the
    kernel singularity use the closed-form kernel moments, which are
    stable there; cells far from it use a short Gauss rule, which is
    exact to machine accuracy at that separation and avoids the
    subtractive cancellation the moment differences would suffer.  The
    result is exact for the interpolant, so the only error is the
    interpolation error of the tabulation itself.
    """
    nodes = np.asarray(nodes, dtype=float)
    samples = np.asarray(samples, dtype=float)
    t = float(t)
    kappa = float(kernel_exponent)
    if nodes.ndim != 1 or nodes.size < 2:
        raise DomainError("need at least two mesh nodes")
    if samples.shape != nodes.shape:
        raise DomainError("samples must align with nodes")
    widths = np.diff(nodes)
    if np.any(widths <= 0.0):
        raise DomainError("mesh nodes must be strictly increasing")
    if t < nodes[-1]:
        raise DomainError(
            f"evaluation time {t} precedes the last node {nodes[-1]}")
    if not 0.0 < kappa < 2.0:
        raise DomainError(f"kernel exponent must be in (0, 2), got {kappa}")
    if kappa >= 1.0 and t == nodes[-1]:
        raise DomainError(
            f"kernel exponent {kappa} is not integrable up to t == end")

    u0 = t - nodes[:-1]
    u1 = t - nodes[1:]
    g0 = samples[:-1]
    slope = np.diff(samples) / widths

    total = 0.0
    near = u1 <= 3.0 * widths
    if np.any(near):
        a0, a1 = u0[near], u1[near]
        m0 = (a0 ** (1.0 - kappa) - a1 ** (1.0 - kappa)) / (1.0 - kappa)
        m1 = a0 * m0 - (a0 ** (2.0 - kappa) - a1 ** (2.0 - kappa)) \
            / (2.0 - kappa)
        total += float(np.dot(g0[near], m0) + np.dot(slope[near], m1))
    far = ~near
    if np.any(far):
        x, w = _legendre_rule(8)
        mid = 0.5 * (nodes[:-1][far] + nodes[1:][far])
        half = 0.5 * widths[far]
        s = mid[:, None] + half[:, None] * x[None, :]
        kern = (t - s) ** (-kappa)
        lin = g0[far][:, None] + slope[far][:, None] \
            * (s - nodes[:-1][far][:, None])
        total += float(np.dot(half, (kern * lin) @ w))
    return total


def _kernel_antiderivatives(alpha: float, lam: float,
                            tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second antiderivatives of the impulse response at ``tau``.

    ``IK(tau) = tau**a * E_{a,a+1}(-lam tau**a)`` integrates the kernel
    from zero and ``IK2(tau) = tau**(a+1) * E_{a,a+2}(-lam tau**a)``
    integrates ``IK``; both follow from term-by-term integration of the
    defining series and both vanish at zero.
    """
    tau = np.asarray(tau, dtype=float)
    ik = np.zeros_like(tau)
    ik2 = np.zeros_like(tau)
    pos = tau > 0.0
    if np.any(pos):
        tp = tau[pos]
        arg = -lam * tp ** alpha
        ik[pos] = tp ** alpha * ml_values(alpha, alpha + 1.0, arg)
        ik2[pos] = tp ** (alpha + 1.0) * ml_values(alpha, alpha + 2.0, arg)
    return ik, ik2


def duhamel_convolve(alpha: float, lam: float, nodes: np.ndarray,
                     samples: np.ndarray) -> float:
    """``int_{nodes[0]}^{t} K(t-s) g(s) ds`` with ``t = nodes[-1]``.

    ``K(u) = u**(alpha-1) * E_{alpha,alpha}(-lam * u**alpha)`` is the
    subdiffusive impulse response and ``g`` is known through ``samples``
    taken at ``nodes``.  Product integration against the piecewise-linear
    interpolant of the samples: the zeroth and first kernel moments of
    every cell are exact differences of the closed-form antiderivatives,
    so affine densities are integrated exactly, the kernel is never
    evaluated pointwise, and the global error is second order in the mesh
    width for twice-differentiable densities.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"kernel order must be in (0, 1), got {alpha}")
    if lam < 0.0:
        raise DomainError(f"modal eigenvalue must be >= 0, got {lam}")
    nodes = np.asarray(nodes, dtype=float)
    samples = np.asarray(samples, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2:
        raise DomainError("need at least two mesh nodes")
    if samples.shape != nodes.shape:
        raise DomainError("samples must align with nodes")
    widths = np.diff(nodes)
    if np.any(widths <= 0.0):
        raise DomainError("mesh nodes must be strictly increasing")

    u = nodes[-1] - nodes  # decreasing, ends at zero
    ik, ik2 = _kernel_antiderivatives(alpha, lam, u)
    # cell i spans [u[i+1], u[i]] in the kernel variable
    mass = ik[:-1] - ik[1:]
    # int (u - u[i+1]) K(u) du over the cell, via parts: exact and free of
    # the cancellation that a direct first-moment difference would incur
    right_weight = (ik2[:-1] - ik2[1:]) / widths - ik[1:]
    return float(np.dot(samples[:-1], mass)
                 + np.dot(samples[1:] - samples[:-1], right_weight))


def composite_graded_integral(smooth, a: float, b: float,
                              left_exponent: float = 0.0, n_cells: int = 32,
                              grading: float = 3.0, n_gauss: int = 12) -> float:
    """``int_a^b (s-a)**p * smooth(s) ds`` on a left-graded mesh.

    The first cell is handled with an exact Jacobi weight for the endpoint
    factor; the remaining cells use plain Gauss-Legendre on the full
    integrand, which the grading keeps accurate.
    """
    p = float(left_exponent)
    if p <= -1.0:
        raise DomainError(f"left exponent must exceed -1, got {p}")
    nodes = graded_mesh(a, b, n_cells, grading, "left")
    total = jacobi_weighted_integral(smooth, nodes[0], nodes[1],
                                     left_exponent=p, n=n_gauss)
    x, w = _legendre_rule(int(n_gauss))
    for ca, cb in zip(nodes[1:-1], nodes[2:]):
        mid, half = 0.5 * (ca + cb), 0.5 * (cb - ca)
        s = mid + half * x
        total += half * float(np.dot(
            w, (s - a) ** p * np.asarray(smooth(s), dtype=float)))
    return total
