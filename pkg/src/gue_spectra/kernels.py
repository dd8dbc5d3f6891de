"""Finite-n GUE correlation kernel, its scaled forms, and the limit kernels.

The finite-n kernel is evaluated by the Christoffel-Darboux two-term ratio
away from the diagonal and by the orthonormal-sum form near it, where the
ratio loses digits to cancellation.  Window scalings shrink like 1/n around
bulk centers and like 1/n^(2/3) around the spectral edges +-2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import airy_ai_both, hermite_function_ladder

__all__ = [
    "ScaledWindow",
    "KernelKind",
    "semicircle_density",
    "gue_kernel",
    "gue_kernel_matrix",
    "sine_kernel",
    "airy_kernel",
    "scaled_gue_kernel",
    "scaled_gue_kernel_matrix",
    "limiting_kernel",
    "limiting_kernel_matrix",
    "window_grid",
    "windows_disjoint",
    "kernel_sup",
]

EDGE_EXPONENT = 2.0 / 3.0
BULK_EXPONENT = 1.0

# Relative width of the near-diagonal band where the Christoffel-Darboux
# ratio is replaced by the sum form (the ratio loses ~8 digits by |x-y|~1e-8).
_CD_SWITCH = 1e-4


def semicircle_density(mu: float) -> float:
    """Semicircle eigenvalue density sqrt(4 - mu^2) / (2 pi) on (-2, 2)."""
    if abs(mu) > 2.0:
        return 0.0
    return math.sqrt(4.0 - mu * mu) / (2.0 * math.pi)


def _normalize_base(base) -> tuple[tuple[float, float], ...]:
    arr = np.asarray(base, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"base must be an (a, b) pair or a sequence of pairs, got {base!r}")
    pairs = sorted((float(a), float(b)) for a, b in arr)
    for a, b in pairs:
        if not (math.isfinite(a) and math.isfinite(b)) or a > b:
            raise ValueError(f"invalid base interval ({a}, {b})")
    for (_, b0), (a1, _) in zip(pairs, pairs[1:]):
        if a1 < b0:
            raise ValueError(f"base intervals overlap near {a1}")
    return tuple(pairs)


@dataclass(frozen=True)
class ScaledWindow:
    """A spectral window: center, base set, and shrink exponent.

    The realized window at matrix size n is center + base / n^kappa.
    kappa defaults to 2/3 at the edges (center +-2) and 1 in the bulk;
    an explicit kappa (e.g. 0 for an unscaled raw interval) overrides.
    """

    index: int
    center: float
    base: tuple[tuple[float, float], ...]
    kappa: float = field(default=math.nan)

    def __post_init__(self):
        object.__setattr__(self, "base", _normalize_base(self.base))
        if not -2.0 <= self.center <= 2.0:
            raise ValueError(f"window center {self.center} outside [-2, 2]")
        if math.isnan(self.kappa):
            default = EDGE_EXPONENT if abs(self.center) == 2.0 else BULK_EXPONENT
            object.__setattr__(self, "kappa", default)
        if self.kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")

    @property
    def is_edge(self) -> bool:
        return abs(self.center) == 2.0

    @property
    def base_length(self) -> float:
        return sum(b - a for a, b in self.base)

    def realized(self, n: int) -> tuple[tuple[float, float], ...]:
        """Interval(s) of the window at matrix size n."""
        scale = float(n) ** -self.kappa
        return tuple((self.center + a * scale, self.center + b * scale) for a, b in self.base)

    def realized_length(self, n: int) -> float:
        return self.base_length * float(n) ** -self.kappa

    def bounding_box(self) -> tuple[float, float]:
        return self.base[0][0], self.base[-1][1]


def windows_disjoint(windows, n: int) -> bool:
    """True when all realized intervals of all windows are pairwise disjoint."""
    intervals = sorted(iv for w in windows for iv in w.realized(n))
    return all(b0 < a1 for (_, b0), (a1, _) in zip(intervals, intervals[1:]))


@dataclass(frozen=True)
class KernelKind:
    """Tag for one of the three kernels handled here: finite-n, sine, airy."""

    kind: str
    n: int | None = None
    density: float | None = None

    def __post_init__(self):
        if self.kind == "finite":
            if self.n is None or self.n < 1:
                raise ValueError("finite kernel needs n >= 1")
        elif self.kind == "sine":
            if self.density is None or not 0.0 < self.density <= 1.0 / math.pi:
                raise ValueError("sine kernel density must lie in (0, 1/pi]")
        elif self.kind != "airy":
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def finite(cls, n: int) -> "KernelKind":
        return cls("finite", n=n)

    @classmethod
    def sine(cls, density: float) -> "KernelKind":
        return cls("sine", density=density)

    @classmethod
    def airy(cls) -> "KernelKind":
        return cls("airy")

    def evaluate(self, x, y):
        if self.kind == "finite":
            return gue_kernel(self.n, x, y)
        if self.kind == "sine":
            return sine_kernel(self.density, x, y)
        return airy_kernel(x, y)


def sine_kernel(density: float, x, y):
    """sin(pi rho (x-y)) / (pi (x-y)), equal to rho on the diagonal."""
    if density <= 0:
        raise ValueError(f"density must be > 0, got {density}")
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    out = density * np.sinc(density * d)
    return float(out) if out.ndim == 0 else out


def _airy_kernel_core(ax, apx, ay, apy, x, y, d):
    """Assemble the Airy kernel from precomputed Ai, Ai' values."""
    tau = _CD_SWITCH * (1.0 + np.abs(x) + np.abs(y))
    near = np.abs(d) <= tau
    dsafe = np.where(near, 1.0, d)
    ratio = (ax * apy - ay * apx) / dsafe
    # Diagonal Taylor expansion in the left argument; O(d^3) truncation.
    diag = apx * apx - x * ax * ax
    taylor = diag + (d / 2.0) * ax * ax - (d * d / 6.0) * (ax * apx + x * x * ax * ax - x * apx * apx)
    return np.where(near, taylor, ratio)


def airy_kernel(x, y):
    """Airy kernel (Ai(x)Ai'(y) - Ai(y)Ai'(x)) / (x - y).

    On and near the diagonal the value is Ai'(x)^2 - x Ai(x)^2 plus a short
    Taylor correction, which the defining ODE makes exact to O((x-y)^3).
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    ax, apx = airy_ai_both(x)
    ay, apy = airy_ai_both(y)
    out = _airy_kernel_core(ax, apx, ay, apy, x, y, x - y)
    return float(out) if np.ndim(out) == 0 else out


def _airy_kernel_matrix(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    ax, apx = airy_ai_both(xs)
    ay, apy = airy_ai_both(ys)
    X, Y = xs[:, None], ys[None, :]
    return _airy_kernel_core(ax[:, None], apx[:, None], ay[None, :], apy[None, :], X, Y, X - Y)


def gue_kernel(n: int, x, y):
    """Finite-n GUE kernel K_n(x, y), symmetric in its arguments."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    xf, yf = np.atleast_1d(x).ravel(), np.atleast_1d(y).ravel()
    px = hermite_function_ladder(n, n, xf)
    py = hermite_function_ladder(n, n, yf)
    d = xf - yf
    tau = _CD_SWITCH * (1.0 + np.abs(xf) + np.abs(yf))
    near = np.abs(d) <= tau
    dsafe = np.where(near, 1.0, d)
    cd = (px[n] * py[n - 1] - py[n] * px[n - 1]) / dsafe
    ssum = np.einsum("ki,ki->i", px[:n], py[:n])
    out = np.where(near, ssum, cd).reshape(shape)
    return float(out) if out.ndim == 0 else out


def gue_kernel_matrix(n: int, xs, ys=None) -> np.ndarray:
    """K_n on the grid xs x ys (ys defaults to xs).  Shape (len(xs), len(ys))."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    px = hermite_function_ladder(n, n, xs)
    if ys is None:
        ys, py = xs, px
    else:
        ys = np.atleast_1d(np.asarray(ys, dtype=float))
        py = hermite_function_ladder(n, n, ys)
    d = xs[:, None] - ys[None, :]
    tau = _CD_SWITCH * (1.0 + np.abs(xs)[:, None] + np.abs(ys)[None, :])
    near = np.abs(d) <= tau
    dsafe = np.where(near, 1.0, d)
    cd = (np.outer(px[n], py[n - 1]) - np.outer(px[n - 1], py[n])) / dsafe
    ssum = px[:n].T @ py[:n]
    return np.where(near, ssum, cd)


def scaled_gue_kernel(n: int, window: ScaledWindow, u, v):
    """n^(-kappa) K_n at window coordinates u, v."""
    scale = float(n) ** -window.kappa
    return scale * gue_kernel(n, window.center + scale * np.asarray(u),
                              window.center + scale * np.asarray(v))


def scaled_gue_kernel_matrix(n: int, window: ScaledWindow, us, vs=None) -> np.ndarray:
    scale = float(n) ** -window.kappa
    us = window.center + scale * np.atleast_1d(np.asarray(us, dtype=float))
    vs = None if vs is None else window.center + scale * np.atleast_1d(np.asarray(vs, dtype=float))
    return scale * gue_kernel_matrix(n, us, vs)


def limiting_kernel(window: ScaledWindow, u, v):
    """Limit of the scaled kernel on this window: sine in the bulk, Airy at +2,
    reflected Airy at -2."""
    if window.center == 2.0 and window.kappa == EDGE_EXPONENT:
        return airy_kernel(u, v)
    if window.center == -2.0 and window.kappa == EDGE_EXPONENT:
        return airy_kernel(np.negative(u), np.negative(v))
    if window.kappa == BULK_EXPONENT and abs(window.center) < 2.0:
        return sine_kernel(semicircle_density(window.center), u, v)
    raise ValueError(f"no limiting kernel for center {window.center}, kappa {window.kappa}")


def limiting_kernel_matrix(window: ScaledWindow, us, vs=None) -> np.ndarray:
    us = np.atleast_1d(np.asarray(us, dtype=float))
    vs = us if vs is None else np.atleast_1d(np.asarray(vs, dtype=float))
    if window.center == 2.0 and window.kappa == EDGE_EXPONENT:
        return _airy_kernel_matrix(us, vs)
    if window.center == -2.0 and window.kappa == EDGE_EXPONENT:
        return _airy_kernel_matrix(-us, -vs)
    if window.kappa == BULK_EXPONENT and abs(window.center) < 2.0:
        return sine_kernel(semicircle_density(window.center), us[:, None], vs[None, :])
    raise ValueError(f"no limiting kernel for center {window.center}, kappa {window.kappa}")


def window_grid(window: ScaledWindow, n: int, grid: int) -> np.ndarray:
    """grid points per realized interval of the window (zero length allowed)."""
    return np.concatenate([np.linspace(a, b, grid) for a, b in window.realized(n)])


def kernel_sup(n: int, w1: ScaledWindow, w2: ScaledWindow, grid: int = 64) -> float:
    """Grid max of |K_n| over the realized windows; a lower bound on the sup."""
    if grid < 16:
        raise ValueError(f"grid must be >= 16, got {grid}")
    pts1 = window_grid(w1, n, grid)
    pts2 = window_grid(w2, n, grid)
    return float(np.max(np.abs(gue_kernel_matrix(n, pts1, pts2))))
