"""Nystrom operators over scaled windows, Fredholm determinants, and the
joint eigenvalue-counting machinery.

The windowed kernel is discretized with Gauss-Legendre nodes restricted to
the realized windows, which is exactly the bounded version of the kernel
(everything outside the windows is annihilated by the indicator weights).
Counting probabilities come out of determinant derivatives in the window
weights, extracted by Cauchy contours; brute-force tensor quadrature of
the determinantal eigenvalue density provides an independent oracle for
matrix sizes up to 3.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .kernels import ScaledWindow, gue_kernel_matrix, semicircle_density, windows_disjoint
from .specfun import gauss_legendre

__all__ = [
    "MultiWindowOperator",
    "CountingDistribution",
    "TraceSplit",
    "ResolutionWarning",
    "discretize",
    "fredholm_det",
    "trace_powers",
    "log_derivative",
    "counting_joint_pmf",
    "independence_defect_det",
    "hadamard_bound_check",
    "brute_force_joint_pmf",
    "brute_force_gamma",
    "iterated_kernel_sups",
]

DEFAULT_BULK_POINTS = 40
DEFAULT_EDGE_POINTS = 60
CONTOUR_RADIUS = 0.5
CONTOUR_POINTS = 64
DEFAULT_LMAX = 6
PROBABILITY_SLACK = 1e-8


class ResolutionWarning(UserWarning):
    """Quadrature too coarse for the kernel oscillation in a window."""


@dataclass(frozen=True)
class MultiWindowOperator:
    """Nystrom discretization of the windowed kernel at matrix size n."""

    n: int
    windows: tuple[ScaledWindow, ...]
    nodes: np.ndarray
    weights: np.ndarray
    window_index: np.ndarray
    kernel: np.ndarray

    @property
    def size(self) -> int:
        return self.nodes.size

    @cached_property
    def block_slices(self) -> tuple[slice, ...]:
        out = []
        start = 0
        for i in range(len(self.windows)):
            count = int(np.count_nonzero(self.window_index == i))
            out.append(slice(start, start + count))
            start += count
        return tuple(out)

    @cached_property
    def core(self) -> np.ndarray:
        """Symmetrized weighted kernel sqrt(w) K sqrt(w); same determinants."""
        root = np.sqrt(self.weights)
        return root[:, None] * self.kernel * root[None, :]

    def node_lambda(self, lam) -> np.ndarray:
        """Per-node window weight from a scalar or per-window vector."""
        lam = np.asarray(lam)
        if lam.ndim == 0:
            return np.full(self.size, lam[()])
        if lam.shape != (len(self.windows),):
            raise ValueError(f"lambda must be scalar or length {len(self.windows)}")
        return lam[self.window_index]

    def weighted(self, lam) -> np.ndarray:
        """Matrix of the operator with kernel lam_i 1_window_i(x) K_n(x, y)."""
        return (self.node_lambda(lam) * self.weights)[:, None] * self.kernel

    def restrict(self, i: int) -> "MultiWindowOperator":
        """Single-window operator on window i (shares this discretization)."""
        sl = self.block_slices[i]
        return MultiWindowOperator(
            n=self.n,
            windows=(self.windows[i],),
            nodes=self.nodes[sl],
            weights=self.weights[sl],
            window_index=np.zeros(sl.stop - sl.start, dtype=np.intp),
            kernel=self.kernel[sl, sl],
        )


def _points_for(window: ScaledWindow, m: int | None) -> int:
    if m is not None:
        return m
    return DEFAULT_EDGE_POINTS if window.is_edge else DEFAULT_BULK_POINTS


def discretize(n: int, windows, m: int | None = None) -> MultiWindowOperator:
    """Build the Nystrom operator for the given windows at matrix size n.

    m is the Gauss-Legendre point count per window interval; by default 40
    for bulk windows and 60 at the edges.  Realized windows must be
    pairwise disjoint and of positive length.
    """
    windows = tuple(windows)
    if not windows:
        raise ValueError("need at least one window")
    if m is not None and m < 4:
        raise ValueError(f"points per interval must be >= 4, got {m}")
    for w in windows:
        if w.base_length == 0.0:
            raise ValueError(f"window {w.index} has zero length")
    if not windows_disjoint(windows, n):
        raise ValueError(f"realized windows overlap at n={n}")

    nodes, weights, labels = [], [], []
    for i, w in enumerate(windows):
        points = _points_for(w, m)
        oscillation = semicircle_density(w.center) * n ** (1.0 - w.kappa) * w.base_length
        if points < oscillation:
            warnings.warn(
                f"window {w.index}: {points} points may under-resolve "
                f"~{oscillation:.0f} kernel oscillations",
                ResolutionWarning,
                stacklevel=2,
            )
        for a, b in w.realized(n):
            rule = gauss_legendre(points, (a, b))
            nodes.append(rule.nodes)
            weights.append(rule.weights)
            labels.append(np.full(points, i, dtype=np.intp))

    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    labels = np.concatenate(labels)
    return MultiWindowOperator(
        n=n,
        windows=windows,
        nodes=nodes,
        weights=weights,
        window_index=labels,
        kernel=gue_kernel_matrix(n, nodes),
    )


def fredholm_det(op: MultiWindowOperator, z, lam):
    """det(I - z B(lambda)) for the weighted Nystrom matrix B."""
    mat = -z * op.weighted(lam)
    idx = np.arange(op.size)
    mat[idx, idx] += 1.0
    det = np.linalg.det(mat)
    if np.iscomplexobj(mat) and not (np.iscomplex(z) or np.iscomplexobj(np.asarray(lam))):
        return det.real
    return det if np.iscomplexobj(mat) else float(det)


@dataclass(frozen=True)
class TraceSplit:
    """Traces of operator powers, their per-window parts, and the remainder."""

    totals: np.ndarray      # T(1..kmax)
    per_window: np.ndarray  # shape (p, kmax)
    remainder: np.ndarray   # totals - per-window sums; zero at k=1 by definition


def trace_powers(op: MultiWindowOperator, lam, kmax: int) -> TraceSplit:
    """Traces of B(lambda)^k for k = 1..kmax, split across windows."""
    if kmax < 1:
        raise ValueError(f"kmax must be >= 1, got {kmax}")
    B = op.weighted(lam)
    totals = np.empty(kmax, dtype=B.dtype)
    power = B.copy()
    totals[0] = np.trace(power)
    for k in range(1, kmax):
        power = power @ B
        totals[k] = np.trace(power)

    p = len(op.windows)
    per_window = np.empty((p, kmax), dtype=B.dtype)
    for i, sl in enumerate(op.block_slices):
        Bi = B[sl, sl]
        block_power = Bi.copy()
        per_window[i, 0] = np.trace(block_power)
        for k in range(1, kmax):
            block_power = block_power @ Bi
            per_window[i, k] = np.trace(block_power)

    remainder = totals - per_window.sum(axis=0)
    remainder[0] = 0.0
    return TraceSplit(totals=totals, per_window=per_window, remainder=remainder)


def log_derivative(op: MultiWindowOperator, lam, z):
    """D'(z)/D(z) = -trace((I - z B)^{-1} B)."""
    B = op.weighted(lam)
    if np.iscomplex(z) or np.iscomplexobj(B):
        B = B.astype(complex)
    mat = np.eye(op.size, dtype=B.dtype) - z * B
    sign, _ = np.linalg.slogdet(mat)
    if sign == 0:
        raise ArithmeticError(f"determinant vanishes at z={z}; resolvent is singular")
    value = -np.trace(np.linalg.solve(mat, B))
    return value if np.iscomplexobj(B) else float(value)


def _conjugate_reflection(tensor: np.ndarray, axes) -> np.ndarray:
    """conj of the tensor with index k -> (q - k) mod q applied on the axes."""
    out = np.conj(tensor)
    for axis in axes:
        out = np.roll(np.flip(out, axis=axis), 1, axis=axis)
    return out


def _det_on_contour(op: MultiWindowOperator, contours: list[np.ndarray], z=1.0) -> np.ndarray:
    """det(I - z D_lam C) on the tensor grid of per-window contour values.

    One axis is handled through eigenvalues of a block-reduced matrix so
    only the outer q^(p-1) grid needs a factorization each; the outermost
    loop exploits the conjugate symmetry of the real-kernel determinant
    over the standard contour grid (lam_j = 1 + r exp(2 pi i j / q)).
    """
    C = op.core
    N = op.size
    p = len(op.windows)

    if p == 1:
        nu = np.linalg.eigvalsh(C)
        return np.prod(1.0 - z * contours[0][:, None] * nu[None, :], axis=1)

    # Reduce over the smallest block: its eigenproblem is the cheap one.
    sizes = [sl.stop - sl.start for sl in op.block_slices]
    red = int(np.argmin(sizes))
    order = [red] + [i for i in range(p) if i != red]

    sl_red = op.block_slices[red]
    m_red = sizes[red]
    outer_windows = order[1:]
    outer_shape = tuple(len(contours[i]) for i in outer_windows)
    out = np.empty(outer_shape + (len(contours[red]),), dtype=complex)

    q_first = len(contours[outer_windows[0]])
    symmetric = not np.iscomplex(z)
    first_cap = q_first // 2 + 1 if symmetric else q_first
    combos = [c for c in itertools.product(*[range(s) for s in outer_shape]) if c[0] < first_cap]

    eye = np.eye(N, dtype=complex)
    rhs = np.zeros((N, m_red), dtype=complex)
    rhs[sl_red] = np.eye(m_red)
    lam_red = contours[red]
    chunk = max(1, int(4e7 / (16 * N * N)))
    for start in range(0, len(combos), chunk):
        batch = combos[start:start + chunk]
        lam_nodes = np.zeros((len(batch), N), dtype=complex)
        for axis, i in enumerate(outer_windows):
            sl = op.block_slices[i]
            vals = np.array([contours[i][combo[axis]] for combo in batch])
            lam_nodes[:, sl] = vals[:, None]
        A = eye[None, :, :] - z * lam_nodes[:, :, None] * C[None, :, :]
        det_outer = np.linalg.det(A)
        X = np.linalg.solve(A, rhs)              # (B, N, m_red)
        reduced = C[sl_red, :] @ X               # (B, m_red, m_red)
        xi = np.linalg.eigvals(reduced)
        vals = det_outer[:, None] * np.prod(
            1.0 - z * lam_red[None, :, None] * xi[:, None, :], axis=2
        )
        for combo, row in zip(batch, vals):
            out[combo] = row

    if symmetric:
        # D(conj lam) = conj D(lam); conj maps grid index k to (q - k) mod q.
        computed = out[:first_cap]
        mirrored = _conjugate_reflection(computed, axes=range(1, out.ndim))
        for j in range(first_cap, q_first):
            out[j] = mirrored[q_first - j]

    tensor = np.moveaxis(out, -1, 0)            # axis j holds window order[j]
    return np.moveaxis(tensor, range(p), order)


@dataclass(frozen=True)
class CountingDistribution:
    """Joint occupancy table over the windows, with marginals and defect."""

    windows: tuple[ScaledWindow, ...]
    joint: np.ndarray
    marginals: tuple[np.ndarray, ...]
    defect: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def lmax(self) -> tuple[int, ...]:
        return tuple(d - 1 for d in self.joint.shape)

    def marginal_from_joint(self, i: int) -> np.ndarray:
        axes = tuple(a for a in range(self.joint.ndim) if a != i)
        return self.joint.sum(axis=axes)

    def max_defect(self, lmax: int | None = None) -> float:
        view = self.defect
        if lmax is not None:
            view = view[tuple(slice(0, lmax + 1) for _ in range(view.ndim))]
        return float(np.max(np.abs(view)))

    @property
    def tail_mass(self) -> float:
        return max(0.0, 1.0 - float(self.joint.sum()))


def _clip_probabilities(raw: np.ndarray) -> tuple[np.ndarray, float]:
    excess = float(max(np.max(-raw, initial=0.0), np.max(raw - 1.0, initial=0.0), 0.0))
    return np.clip(raw, 0.0, 1.0), excess


def _assemble_distribution(windows, joint_raw, marginals_raw, meta) -> CountingDistribution:
    joint, excess = _clip_probabilities(joint_raw)
    marginals = []
    for marg in marginals_raw:
        clipped, ex = _clip_probabilities(marg)
        marginals.append(clipped)
        excess = max(excess, ex)
    product = marginals[0]
    for marg in marginals[1:]:
        product = np.multiply.outer(product, marg)
    meta = dict(meta, clip_excess=excess)
    return CountingDistribution(
        windows=tuple(windows),
        joint=joint,
        marginals=tuple(marginals),
        defect=joint - product,
        meta=meta,
    )


def _pmf_from_contour(dets: np.ndarray, radius: float, shape: tuple[int, ...]) -> np.ndarray:
    """Occupancy probabilities from determinant values on the contour grid."""
    coeff = np.fft.fftn(dets) / dets.size
    block = coeff[tuple(slice(0, s) for s in shape)]
    orders = sum(np.meshgrid(*[np.arange(s) for s in shape], indexing="ij"))
    return ((-1.0) ** orders) * block.real / radius ** orders


def counting_joint_pmf(
    n: int,
    windows,
    lmax=DEFAULT_LMAX,
    m: int | None = None,
    radius: float = CONTOUR_RADIUS,
    points: int = CONTOUR_POINTS,
) -> CountingDistribution:
    """Joint and marginal occupancy probabilities for the windows at size n.

    The joint table P(counts = (l_1, ..., l_p)) comes from determinant
    derivatives in the per-window weights at weight 1, extracted by a
    Cauchy contour of the given radius with `points` samples per window.
    Marginals are computed the same way on each single-window operator.
    """
    windows = tuple(windows)
    p = len(windows)
    lmax_vec = np.broadcast_to(np.asarray(lmax, dtype=int), (p,)).copy()
    if np.any(lmax_vec < 0):
        raise ValueError("lmax must be nonnegative")
    if np.any(lmax_vec >= points):
        raise ValueError(f"lmax must stay below the contour sample count {points}")
    op = discretize(n, windows, m)

    theta = 2.0 * math.pi * np.arange(points) / points
    r = radius
    for attempt in range(3):
        contour = 1.0 + r * np.exp(1j * theta)
        dets = _det_on_contour(op, [contour] * p)
        if np.min(np.abs(dets)) > 1e-13:
            break
        r *= 0.5
    else:
        raise RuntimeError("determinant vanishes on every tried contour radius")

    joint = _pmf_from_contour(dets, r, tuple(lmax_vec + 1))

    marginals = []
    for i in range(p):
        sub = op.restrict(i)
        dets_i = _det_on_contour(sub, [contour])
        marginals.append(_pmf_from_contour(dets_i, r, (lmax_vec[i] + 1,)))

    # Derivatives beyond the polynomial degree in lambda_i vanish identically.
    for i in range(p):
        degree = int(np.count_nonzero(op.window_index == i))
        if lmax_vec[i] > degree:
            index = [slice(None)] * p
            index[i] = slice(degree + 1, None)
            joint[tuple(index)] = 0.0
            marginals[i][degree + 1:] = 0.0

    meta = {"n": n, "method": "contour", "m": m, "radius": r, "contour_points": points}
    return _assemble_distribution(windows, joint, marginals, meta)


def independence_defect_det(n: int, windows, z=1.0, lam=1.0, m: int | None = None):
    """det(I - z S) minus the product of per-window determinants.

    This difference vanishing as n grows is the determinant-level form of
    the counting measures' asymptotic independence.
    """
    windows = tuple(windows)
    if len(windows) == 1 or (np.ndim(z) == 0 and z == 0):
        return 0.0
    op = discretize(n, windows, m)
    lam_vec = np.broadcast_to(np.asarray(lam), (len(windows),))
    full = fredholm_det(op, z, lam_vec)
    product = 1.0
    for i in range(len(windows)):
        product = product * fredholm_det(op.restrict(i), z, lam_vec[i])
    return full - product


def hadamard_bound_check(op: MultiWindowOperator, lam, k: int, seed: int = 0) -> bool:
    """Check |det S(x_i, x_j)| <= row-norm product on k random window points."""
    if not 1 <= k <= 8:
        raise ValueError(f"minor order must be in [1, 8], got {k}")
    rng = np.random.default_rng(seed)
    intervals = [iv for w in op.windows for iv in w.realized(op.n)]
    owners = np.concatenate([
        np.full(1, i) for i, w in enumerate(op.windows) for _ in w.realized(op.n)
    ])
    lengths = np.array([b - a for a, b in intervals])
    pick = rng.choice(len(intervals), size=k, p=lengths / lengths.sum())
    lows = np.array([intervals[j][0] for j in pick])
    highs = np.array([intervals[j][1] for j in pick])
    pts = rng.uniform(lows, highs)
    lam_rows = np.asarray(np.broadcast_to(lam, (len(op.windows),)))[owners[pick]]
    S = lam_rows[:, None] * gue_kernel_matrix(op.n, pts)
    lhs = abs(np.linalg.det(S))
    rhs = float(np.prod(np.sqrt(np.sum(S * S, axis=1))))
    return lhs <= rhs * (1.0 + 1e-12) + 1e-300


def iterated_kernel_sups(op: MultiWindowOperator, lam, kmax: int) -> np.ndarray:
    """Block maxima of the Nystrom iterated absolute kernel, k = 1..kmax.

    Entry [k-1, i, j] is the grid sup of |S|^(k) over window i x window j.
    """
    if kmax < 1:
        raise ValueError(f"kmax must be >= 1, got {kmax}")
    s_abs = np.abs(op.node_lambda(lam)[:, None] * op.kernel)
    p = len(op.windows)
    out = np.empty((kmax, p, p))
    current = s_abs.copy()
    for k in range(kmax):
        if k:
            current = s_abs @ (op.weights[:, None] * current)
        for i, sli in enumerate(op.block_slices):
            for j, slj in enumerate(op.block_slices):
                out[k, i, j] = np.max(current[sli, slj])
    return out


# ---------------------------------------------------------------------------
# Brute-force oracles at n <= 3: direct tensor quadrature of the
# determinantal eigenvalue density over a box, partitioned by occupancy.
# ---------------------------------------------------------------------------

_BRUTE_BOX = 8.0


def _composite_grid(n: int, windows, nodes_per_unit: float, box: float):
    """Composite Gauss-Legendre grid on [-box, box] split at window endpoints.

    Returns nodes, weights, and per-node window labels (-1 outside).
    """
    windows = tuple(windows)
    cuts = {-box, box}
    spans = []
    for i, w in enumerate(windows):
        for a, b in w.realized(n):
            if a < -box or b > box:
                raise ValueError(f"window {w.index} leaves the quadrature box [-{box}, {box}]")
            cuts.update((a, b))
            spans.append((a, b, i))
    edges = sorted(cuts)
    nodes, weights, labels = [], [], []
    for a, b in zip(edges, edges[1:]):
        if b - a <= 0:
            continue
        label = -1
        mid = 0.5 * (a + b)
        for lo, hi, i in spans:
            if lo <= mid < hi:
                label = i
                break
        count = max(12, math.ceil(nodes_per_unit * (b - a)))
        rule = gauss_legendre(count, (a, b))
        nodes.append(rule.nodes)
        weights.append(rule.weights)
        labels.append(np.full(count, label, dtype=np.intp))
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(labels)


def brute_force_joint_pmf(
    n: int,
    windows,
    nodes_per_unit: float = 12.0,
    box: float = _BRUTE_BOX,
) -> CountingDistribution:
    """Joint occupancy pmf by direct quadrature of the eigenvalue density.

    The density of the n (unordered) eigenvalues is det{K_n(x_i, x_j)} / n!,
    which is self-normalizing; integrating it over the box with nodes
    labeled by window membership yields each occupancy cell.  Only n <= 3
    is supported (the tensor grid grows as N^n).
    """
    if n not in (1, 2, 3):
        raise ValueError(f"brute force supports n in {{1, 2, 3}}, got {n}")
    windows = tuple(windows)
    if not windows_disjoint(windows, n):
        raise ValueError(f"realized windows overlap at n={n}")
    nodes, w, labels = _composite_grid(n, windows, nodes_per_unit, box)
    K = gue_kernel_matrix(n, nodes)
    p = len(windows)
    base = n + 1
    # Positional code: window i contributes base^(p-1-i), so reshaping the
    # accumulator to (base,)*p puts window i on axis i.
    code = np.where(labels >= 0, base ** (p - 1 - labels.astype(np.int64)), 0)
    table = np.zeros(base ** p)

    if n == 1:
        np.add.at(table, code, w * np.diag(K))
    elif n == 2:
        d = np.diag(K)
        det2 = np.outer(d, d) - K * K
        weight2 = np.outer(w, w) * det2 / 2.0
        code2 = code[:, None] + code[None, :]
        table += np.bincount(code2.ravel(), weights=weight2.ravel(), minlength=table.size)
    else:
        d = np.diag(K)
        dd = np.outer(d, d)
        KK = K * K
        code2 = code[:, None] + code[None, :]
        for a in range(nodes.size):
            u = K[a]
            det3 = (
                d[a] * (dd - KK)
                - np.outer(u * u, d)
                - np.outer(d, u * u)
                + 2.0 * np.outer(u, u) * K
            )
            weight3 = (w[a] * np.outer(w, w)) * det3 / 6.0
            codes = code[a] + code2
            table += np.bincount(codes.ravel(), weights=weight3.ravel(), minlength=table.size)

    joint = table.reshape((base,) * p)
    marginals = [joint.sum(axis=tuple(a for a in range(p) if a != i)) for i in range(p)]
    meta = {"n": n, "method": "brute_force", "total_mass": float(joint.sum()),
            "nodes_1d": int(nodes.size)}
    return _assemble_distribution(windows, joint, marginals, meta)


def brute_force_gamma(n: int, windows, lam, nodes_per_unit: float = 12.0, box: float = _BRUTE_BOX):
    """Direct quadrature of E prod_i (1 - sum_k lam_k 1_window_k(x_i)).

    Independent route to det(I - S(lam)) at n <= 3, used to validate the
    Fredholm determinant against the eigenvalue density itself.
    """
    if n not in (1, 2, 3):
        raise ValueError(f"brute force supports n in {{1, 2, 3}}, got {n}")
    windows = tuple(windows)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (len(windows),))
    nodes, w, labels = _composite_grid(n, windows, nodes_per_unit, box)
    K = gue_kernel_matrix(n, nodes)
    factor = np.where(labels >= 0, 1.0 - lam[np.maximum(labels, 0)], 1.0)
    fw = factor * w
    d = np.diag(K)
    if n == 1:
        return float(np.dot(fw, d))
    if n == 2:
        det2 = np.outer(d, d) - K * K
        return float(fw @ det2 @ fw / 2.0)
    total = 0.0
    dd = np.outer(d, d)
    KK = K * K
    for a in range(nodes.size):
        u = K[a]
        det3 = (
            d[a] * (dd - KK)
            - np.outer(u * u, d)
            - np.outer(d, u * u)
            + 2.0 * np.outer(u, u) * K
        )
        total += fw[a] * (fw @ det3 @ fw)
    return float(total / 6.0)
