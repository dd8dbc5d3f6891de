"""Special functions and quadrature shared by every other module.

Provides Gauss-Legendre rules on finite intervals, the Airy function
Ai and its derivative, and the Gaussian-weighted Hermite functions in
the matrix-size-dependent scaling used throughout the kernel code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadratureRule",
    "HermiteEvaluation",
    "gauss_legendre",
    "airy_ai",
    "airy_ai_prime",
    "airy_ai_both",
    "hermite_function",
    "hermite_function_ladder",
]

_LN2 = math.log(2.0)
_PI_QUARTER_INV = math.pi ** -0.25

# Ai(0) and Ai'(0) in closed form.
_AI_ZERO = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
_AIP_ZERO = -(3.0 ** (-1.0 / 3.0)) / math.gamma(1.0 / 3.0)

# Power series below |x| = 6.8, asymptotic expansions above 7.2, smooth
# cross-fade between.  The series is summed in extended precision, so the
# oscillatory-side cancellation in the blend zone still leaves ~1e-13
# absolute accuracy; blending keeps second differences seam-free.
_AIRY_BLEND_LO = 6.8
_AIRY_BLEND_HI = 7.2


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights of a quadrature rule on (a, b)."""

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float]

    def integrate(self, values: np.ndarray) -> float:
        """Apply the rule to function values taken at the nodes."""
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class HermiteEvaluation:
    """One Hermite-function value in the size-n scaling, with optional derivative."""

    n: int
    k: int
    value: float
    derivative: float | None = None


def _legendre_and_derivative(m: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P_m(x) and P_m'(x) by the three-term recurrence."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, m + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    if m == 1:
        p_prev = np.ones_like(x)
    dp = m * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def gauss_legendre(m: int, interval: tuple[float, float] = (-1.0, 1.0)) -> QuadratureRule:
    """m-point Gauss-Legendre rule on a finite interval (a, b).

    Nodes are the roots of the degree-m Legendre polynomial, located by
    Newton iteration started from the Chebyshev angle estimates, then
    mapped affinely onto (a, b).  The rule integrates polynomials up to
    degree 2m - 1 exactly.
    """
    if m < 1:
        raise ValueError(f"node count must be >= 1, got {m}")
    a, b = float(interval[0]), float(interval[1])
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise ValueError(f"invalid interval {interval!r}: need finite a < b")

    i = np.arange(1, m + 1, dtype=float)
    x = np.cos(math.pi * (i - 0.25) / (m + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(m, x)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:
        raise RuntimeError(f"Newton iteration for Legendre roots failed at m={m}")
    _, dp = _legendre_and_derivative(m, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    # cos() ordering is descending; report ascending nodes.
    x = x[::-1].copy()
    w = w[::-1].copy()
    half = 0.5 * (b - a)
    return QuadratureRule(nodes=0.5 * (a + b) + half * x, weights=half * w, interval=(a, b))


def _airy_series(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maclaurin series for Ai, Ai' summed in extended precision."""
    xl = np.asarray(x, dtype=np.longdouble)
    x2 = xl * xl
    x3 = x2 * xl
    f = np.ones_like(xl)
    g = xl.copy()
    fp = np.zeros_like(xl)
    gp = np.ones_like(xl)
    tf = np.ones_like(xl)
    tg = xl.copy()
    for k in range(1, 90):
        tfp = tf * x2 / (3 * k - 1)
        tgp = tg * x2 / (3 * k)
        tf = tf * x3 / ((3 * k) * (3 * k - 1))
        tg = tg * x3 / ((3 * k + 1) * (3 * k))
        f += tf
        g += tg
        fp += tfp
        gp += tgp
        if max(np.max(np.abs(tf)), np.max(np.abs(tg))) < 1e-30:
            break
    ai = _AI_ZERO * f + _AIP_ZERO * g
    aip = _AI_ZERO * fp + _AIP_ZERO * gp
    return ai.astype(float), aip.astype(float)


def _airy_asymptotic_ratios(count: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(count, dtype=float)
    ratio = np.ones(count)
    kk = k[1:]
    ratio[1:] = (6 * kk - 5) * (6 * kk - 3) * (6 * kk - 1) / ((2 * kk - 1) * 216 * kk)
    return ratio, (6 * k + 1) / (1 - 6 * k)


# _ASY_RATIO[k] = u_k / u_{k-1}; _ASY_VFACTOR[k] = v_k / u_k.
_ASY_RATIO, _ASY_VFACTOR = _airy_asymptotic_ratios(40)


def _airy_asymptotic_positive(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decaying expansion for x >= crossover, truncated at the smallest term."""
    zeta = (2.0 / 3.0) * x ** 1.5
    su = np.ones_like(x)
    sv = np.ones_like(x)
    term = np.ones_like(x)
    active = np.ones_like(x, dtype=bool)
    for k in range(1, len(_ASY_RATIO)):
        new = term * (-_ASY_RATIO[k]) / zeta
        active &= np.abs(new) < np.abs(term)
        if not active.any():
            break
        su += np.where(active, new, 0.0)
        sv += np.where(active, new * _ASY_VFACTOR[k], 0.0)
        term = np.where(active, new, term)
    with np.errstate(under="ignore"):
        damp = np.exp(-zeta)
    root = x ** 0.25
    pref = 0.5 / math.sqrt(math.pi)
    return pref * damp / root * su, -pref * damp * root * sv


def _airy_asymptotic_negative(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Oscillatory expansion for x <= -crossover."""
    z = -x
    zeta = (2.0 / 3.0) * z ** 1.5
    w = zeta - 0.25 * math.pi
    even_u = np.ones_like(z)
    odd_u = _ASY_RATIO[1] / zeta
    even_v = np.ones_like(z)
    odd_v = odd_u * _ASY_VFACTOR[1]
    even_term = np.ones_like(z)
    odd_term = odd_u.copy()
    active = np.ones_like(z, dtype=bool)
    for k in range(1, len(_ASY_RATIO) // 2 - 1):
        new_even = -even_term * _ASY_RATIO[2 * k - 1] * _ASY_RATIO[2 * k] / (zeta * zeta)
        new_odd = new_even * _ASY_RATIO[2 * k + 1] / zeta
        active &= np.abs(new_even) < np.abs(even_term)
        if not active.any():
            break
        even_u += np.where(active, new_even, 0.0)
        odd_u += np.where(active, new_odd, 0.0)
        even_v += np.where(active, new_even * _ASY_VFACTOR[2 * k], 0.0)
        odd_v += np.where(active, new_odd * _ASY_VFACTOR[2 * k + 1], 0.0)
        even_term = np.where(active, new_even, even_term)
        odd_term = np.where(active, new_odd, odd_term)
    root = z ** 0.25
    pref = 1.0 / math.sqrt(math.pi)
    ai = pref / root * (np.cos(w) * even_u + np.sin(w) * odd_u)
    aip = pref * root * (np.sin(w) * even_v - np.cos(w) * odd_v)
    return ai, aip


def airy_ai_both(x) -> tuple[np.ndarray, np.ndarray]:
    """Ai(x) and Ai'(x) together, vectorized over x."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    ai = np.empty_like(arr)
    aip = np.empty_like(arr)

    mag = np.abs(arr)
    inner = mag <= _AIRY_BLEND_HI
    if inner.any():
        ai[inner], aip[inner] = _airy_series(arr[inner])
    pos = arr > _AIRY_BLEND_HI
    if pos.any():
        ai[pos], aip[pos] = _airy_asymptotic_positive(arr[pos])
    neg = arr < -_AIRY_BLEND_HI
    if neg.any():
        ai[neg], aip[neg] = _airy_asymptotic_negative(arr[neg])

    blend = (mag > _AIRY_BLEND_LO) & (mag <= _AIRY_BLEND_HI)
    if blend.any():
        xb = arr[blend]
        pos_side = xb > 0
        ai_asy = np.empty_like(xb)
        aip_asy = np.empty_like(xb)
        if pos_side.any():
            ai_asy[pos_side], aip_asy[pos_side] = _airy_asymptotic_positive(xb[pos_side])
        if (~pos_side).any():
            ai_asy[~pos_side], aip_asy[~pos_side] = _airy_asymptotic_negative(xb[~pos_side])
        t = (np.abs(xb) - _AIRY_BLEND_LO) / (_AIRY_BLEND_HI - _AIRY_BLEND_LO)
        s = t * t * (3.0 - 2.0 * t)
        ai[blend] = (1.0 - s) * ai[blend] + s * ai_asy
        aip[blend] = (1.0 - s) * aip[blend] + s * aip_asy

    if scalar:
        return float(ai[0]), float(aip[0])
    return ai, aip


def airy_ai(x):
    """Airy function Ai(x)."""
    return airy_ai_both(x)[0]


def airy_ai_prime(x):
    """Derivative Ai'(x)."""
    return airy_ai_both(x)[1]


# Mantissa/exponent rescaling bounds for the Hermite recurrence.  The
# starting Gaussian underflows double precision once u^2/2 > 709, so the
# ladder carries a shared power-of-two exponent per evaluation point.
_LADDER_SHIFT = 512
_LADDER_HI = 2.0 ** 512
_LADDER_LO = 2.0 ** -512


def _normalized_hermite_ladder(u: np.ndarray, kmax: int) -> np.ndarray:
    """Orthonormal Hermite functions phi_0..phi_kmax at the points u.

    Upward recurrence phi_{k+1} = sqrt(2/(k+1)) u phi_k - sqrt(k/(k+1)) phi_{k-1}
    starting from the Gaussian ground state.  Values are kept as
    (mantissa, power-of-two) pairs internally so points with a deeply
    underflowing Gaussian still produce correct O(1) high-order values.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    flat = u.ravel()
    out = np.empty((kmax + 1, flat.size))

    log2_gauss = -0.5 * flat * flat / _LN2
    expo = np.floor(log2_gauss)
    v = _PI_QUARTER_INV * np.exp2(log2_gauss - expo)
    v_prev = np.zeros_like(flat)
    expo32 = expo.astype(np.int32)
    out[0] = np.ldexp(v, expo32)

    for k in range(kmax):
        v_next = math.sqrt(2.0 / (k + 1)) * flat * v - math.sqrt(k / (k + 1)) * v_prev
        mag = np.abs(v_next)
        big = mag > _LADDER_HI
        if big.any():
            v_next = np.where(big, np.ldexp(v_next, -_LADDER_SHIFT), v_next)
            v = np.where(big, np.ldexp(v, -_LADDER_SHIFT), v)
            expo32 = expo32 + big.astype(np.int32) * _LADDER_SHIFT
        small = (mag < _LADDER_LO) & (np.abs(v) < _LADDER_LO) & (mag > 0.0)
        if small.any():
            v_next = np.where(small, np.ldexp(v_next, _LADDER_SHIFT), v_next)
            v = np.where(small, np.ldexp(v, _LADDER_SHIFT), v)
            expo32 = expo32 - small.astype(np.int32) * _LADDER_SHIFT
        v_prev, v = v, v_next
        out[k + 1] = np.ldexp(v, expo32)

    return out.reshape((kmax + 1,) + u.shape)


def hermite_function_ladder(n: int, kmax: int, x) -> np.ndarray:
    """All Hermite functions of degree 0..kmax in the size-n scaling.

    Returns an array of shape (kmax + 1,) + shape(x).  Degree k at size n
    is the orthonormal Hermite function evaluated at sqrt(n/2) x and
    rescaled by (n/2)^(1/4), so the family stays orthonormal in x.
    """
    if n < 1:
        raise ValueError(f"matrix size must be >= 1, got {n}")
    if not 0 <= kmax <= n:
        raise ValueError(f"degree bound {kmax} outside [0, {n}]")
    x = np.asarray(x, dtype=float)
    scale = math.sqrt(0.5 * n)
    return (0.5 * n) ** 0.25 * _normalized_hermite_ladder(scale * x, kmax)


def hermite_function(n: int, k: int, x: float, derivative: bool = False) -> HermiteEvaluation:
    """Single Hermite-function value in the size-n scaling.

    With derivative=True the x-derivative is filled in as well, via
    phi_k'(u) = sqrt(2k) phi_{k-1}(u) - u phi_k(u) and the chain rule.
    """
    if n < 1:
        raise ValueError(f"matrix size must be >= 1, got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"degree {k} outside [0, {n}]")
    u = math.sqrt(0.5 * n) * float(x)
    phi = _normalized_hermite_ladder(np.array([u]), k)[:, 0]
    value = (0.5 * n) ** 0.25 * phi[k]
    deriv = None
    if derivative:
        lower = phi[k - 1] if k >= 1 else 0.0
        dphi = math.sqrt(2.0 * k) * lower - u * phi[k]
        deriv = (0.5 * n) ** 0.75 * dphi
    return HermiteEvaluation(n=n, k=k, value=float(value), derivative=deriv)
