"""Tracy-Widom limit laws for the extreme GUE eigenvalues.

The primary route evaluates the distribution function of the largest
eigenvalue as the Fredholm determinant of the Airy kernel on (s, inf);
that determinant identity is a standard result of the Tracy-Widom
literature rather than something derived here.  The exponential
Painleve-II representation F(s) = exp(-int_s^inf (x-s) q(x)^2 dx), with q
the Hastings-McLeod solution, is kept as an independent cross-check.
The smallest eigenvalue's law is the exact reflection, and the limit of
the scaled condition-number statistic is the law of -(L- + L+)/2 with
independent Tracy-Widom factors, built by numerical convolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp

from .kernels import _airy_kernel_matrix
from .specfun import airy_ai_both, gauss_legendre

__all__ = [
    "CdfTable",
    "PainleveSolution",
    "tw_cdf_plus",
    "tw_cdf_minus",
    "painleve_q",
    "tw_cdf_plus_from_painleve",
    "condition_limit_cdf",
    "tw_plus_table",
    "tw_minus_table",
    "condition_limit_table",
]

DEFAULT_RESOLUTION = 200
DEFAULT_GRID = (-10.0, 6.0)
DEFAULT_STEP = 0.02
_MAP_SCALE = 10.0

# Supported argument ranges of the determinant route and its reflection.
_PLUS_RANGE = (-12.0, 8.0)


@dataclass(frozen=True)
class CdfTable:
    """Monotone tabulation of a distribution function on an increasing grid."""

    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def evaluate(self, x):
        """Linear interpolation, clamped to the endpoint values outside."""
        out = np.interp(np.asarray(x, dtype=float), self.grid, self.values)
        return float(out) if out.ndim == 0 else out

    __call__ = evaluate

    def density(self) -> tuple[np.ndarray, np.ndarray]:
        """Central-difference density on the (uniform) grid."""
        f = np.gradient(self.values, self.grid)
        return self.grid, np.clip(f, 0.0, None)


def _monotone_table(grid, values, meta) -> CdfTable:
    values = np.maximum.accumulate(np.clip(values, 0.0, 1.0))
    return CdfTable(grid=np.asarray(grid, dtype=float), values=values, meta=meta)


@lru_cache(maxsize=8)
def _half_line_rule(m: int) -> tuple[np.ndarray, np.ndarray]:
    rule = gauss_legendre(m, (-1.0, 1.0))
    return rule.nodes, rule.weights


def _airy_gap_determinant(s: float, m: int) -> float:
    """det(I - Airy kernel on (s, inf)) by Nystrom quadrature.

    The half line is mapped through x = s + 10 (1+t)/(1-t), t in (-1, 1).
    """
    t, wt = _half_line_rule(m)
    x = s + _MAP_SCALE * (1.0 + t) / (1.0 - t)
    w = wt * 2.0 * _MAP_SCALE / (1.0 - t) ** 2
    root = np.sqrt(w)
    mat = -root[:, None] * _airy_kernel_matrix(x, x) * root[None, :]
    idx = np.arange(m)
    mat[idx, idx] += 1.0
    return float(np.linalg.det(mat))


def tw_cdf_plus(s: float, m: int = DEFAULT_RESOLUTION) -> float:
    """Limit law of the scaled largest eigenvalue, P(L+ <= s)."""
    if not _PLUS_RANGE[0] <= s <= _PLUS_RANGE[1]:
        raise ValueError(f"s={s} outside supported range {_PLUS_RANGE}")
    return min(1.0, max(0.0, _airy_gap_determinant(float(s), m)))


def tw_cdf_minus(s: float, m: int = DEFAULT_RESOLUTION) -> float:
    """Limit law of the scaled smallest eigenvalue: 1 - F+(-s) exactly."""
    return 1.0 - tw_cdf_plus(-s, m)


@dataclass(frozen=True)
class PainleveSolution:
    """Hastings-McLeod branch of Painleve II on [xmin, anchor].

    Carries q, q', and the running integrals of q^2 and x q^2 taken from
    the anchor downward, which is all the exponential representation of
    the largest-eigenvalue law needs.
    """

    grid: np.ndarray
    q: np.ndarray
    q_prime: np.ndarray
    anchor: float
    _dense: object = field(repr=False, compare=False)

    def states(self, x):
        """(q, q', int_x^anchor q^2, int_x^anchor t q^2) at the points x."""
        return self._dense(np.asarray(x, dtype=float))


def painleve_q(xmin: float = -8.0, anchor: float = 8.0, step: float = 0.05) -> PainleveSolution:
    """Integrate q'' = x q + 2 q^3 downward from q = Ai at the anchor.

    The decaying branch is a separatrix, so downward integration slowly
    feeds the growing mode; |q| > 1e3 aborts with an error (reduce xmin).
    """
    if xmin < -8.0:
        raise ValueError(f"xmin={xmin} below the supported -8")
    if not 6.0 <= anchor <= 10.0:
        raise ValueError(f"anchor {anchor} outside [6, 10]")
    ai, aip = airy_ai_both(anchor)

    def rhs(x, y):
        q, qp = y[0], y[1]
        return (qp, x * q + 2.0 * q ** 3, -q * q, -x * q * q)

    def blow_up(x, y):
        return abs(y[0]) - 1e3
    blow_up.terminal = True

    # Per-step errors are amplified by exp((2/3) sqrt(2) |x|^(3/2)) on the
    # negative axis, so the tolerance must be well below the target there.
    sol = solve_ivp(
        rhs, (anchor, xmin), (ai, aip, 0.0, 0.0),
        method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True, events=blow_up,
    )
    if sol.status == 1 or sol.t[-1] > xmin:
        raise ArithmeticError(
            f"Painleve solution left the decaying branch near x={sol.t[-1]:.3f}"
        )
    grid = np.arange(xmin, anchor + 0.5 * step, step)
    states = sol.sol(grid)
    return PainleveSolution(
        grid=grid, q=states[0], q_prime=states[1], anchor=anchor, _dense=sol.sol,
    )


def tw_cdf_plus_from_painleve(s, solution: PainleveSolution | None = None):
    """F(s) = exp(-int_s^inf (x - s) q(x)^2 dx), the cross-check route.

    The tail beyond the anchor uses q = Ai together with the closed-form
    Airy integrals int_a^inf Ai^2 = Ai'(a)^2 - a Ai(a)^2 and
    int_a^inf x Ai^2 = (a Ai'(a)^2 - a^2 Ai(a)^2 - Ai(a) Ai'(a)) / 3.
    """
    if solution is None:
        solution = _default_painleve()
    s = np.asarray(s, dtype=float)
    if np.any(s < solution.grid[0]) or np.any(s > solution.anchor):
        raise ValueError("s outside the integrated Painleve range")
    a = solution.anchor
    ai, aip = airy_ai_both(a)
    tail_q2 = aip * aip - a * ai * ai
    tail_xq2 = (a * aip * aip - a * a * ai * ai - ai * aip) / 3.0
    _, _, int_q2, int_xq2 = solution.states(s)
    total = (int_xq2 + tail_xq2) - s * (int_q2 + tail_q2)
    out = np.exp(-total)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=2)
def _default_painleve() -> PainleveSolution:
    return painleve_q()


@lru_cache(maxsize=8)
def tw_plus_table(
    lo: float = DEFAULT_GRID[0],
    hi: float = DEFAULT_GRID[1],
    step: float = DEFAULT_STEP,
    m: int = DEFAULT_RESOLUTION,
) -> CdfTable:
    """Tabulated largest-eigenvalue law on a uniform grid."""
    grid = np.arange(lo, hi + 0.5 * step, step)
    values = np.array([_airy_gap_determinant(float(s), m) for s in grid])
    return _monotone_table(grid, values, {"route": "airy_determinant", "m": m, "step": step})


@lru_cache(maxsize=8)
def tw_minus_table(
    lo: float = -DEFAULT_GRID[1],
    hi: float = -DEFAULT_GRID[0],
    step: float = DEFAULT_STEP,
    m: int = DEFAULT_RESOLUTION,
) -> CdfTable:
    """Smallest-eigenvalue law on the reflected grid, from the plus table."""
    plus = tw_plus_table(-hi, -lo, step, m)
    return CdfTable(
        grid=-plus.grid[::-1],
        values=1.0 - plus.values[::-1],
        meta=dict(plus.meta, route="reflection"),
    )


@lru_cache(maxsize=8)
def condition_limit_table(step: float = DEFAULT_STEP, m: int = DEFAULT_RESOLUTION) -> CdfTable:
    """Law of -(L- + L+)/2 with independent Tracy-Widom factors.

    Densities are central differences of the tabulated laws; the sum
    density is a trapezoidal convolution, and the final change of
    variable u = -(a + b)/2 flips and rescales the cumulative table.
    """
    plus = tw_plus_table(step=step, m=m)
    _, f_plus = plus.density()
    mass = float(np.sum(f_plus) * step)
    if abs(mass - 1.0) > 1e-5:
        raise ValueError(f"density mass {mass} off by more than 1e-5; widen the grid")
    # L- has density f+(-x) on the reflected grid.
    f_minus = f_plus[::-1]
    minus_lo = -plus.grid[-1]
    f_sum = np.convolve(f_minus, f_plus) * step
    sum_grid = (minus_lo + plus.grid[0]) + step * np.arange(f_sum.size)
    cdf_sum = cumulative_trapezoid(f_sum, dx=step, initial=0.0)

    t = np.arange(-8.0, 8.0 + 0.5 * step, step)
    # P(-(S)/2 <= t) = P(S >= -2t) = 1 - F_S(-2t)
    values = 1.0 - np.interp(-2.0 * t, sum_grid, cdf_sum, left=0.0, right=1.0)
    return _monotone_table(t, values, {"route": "convolution", "m": m, "step": step})


def condition_limit_cdf(t, table: CdfTable | None = None):
    """CDF of the condition-number limit law at t in [-8, 8]."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -8.0) or np.any(t_arr > 8.0):
        raise ValueError(f"t={t} outside supported range [-8, 8]")
    if table is None:
        table = condition_limit_table()
    return table.evaluate(t)
