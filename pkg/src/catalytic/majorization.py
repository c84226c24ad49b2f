"""Majorization, T-transform chains, Schur-Horn unitaries and permutation mixtures.

Indices are 0-based throughout. Permutations use the destination convention:
``perm[i]`` is the position that entry ``i`` is moved to, so applying ``perm``
to ``v`` gives ``out[perm[i]] = v[i]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MajorizationError
from .statekit import eigenbasis

MAJ_TOL = 1e-10
STEP_TOL = 1e-12
PRUNE_TOL = 1e-14


# --------------------------------------------------------------------------
# predicate
# --------------------------------------------------------------------------


def _pad(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = max(a.size, b.size)
    return np.pad(a, (0, d - a.size)), np.pad(b, (0, d - b.size))


def partial_sums(w) -> np.ndarray:
    """Cumulative sums of ``w`` sorted in descending order."""
    return np.cumsum(np.sort(np.asarray(w, dtype=float))[::-1])


def majorizes(w, w_prime, tol: float = MAJ_TOL) -> bool:
    """True iff ``w`` majorizes ``w_prime`` (shorter vector zero-padded)."""
    a, b = _pad(np.asarray(w, dtype=float).ravel(), np.asarray(w_prime, dtype=float).ravel())
    return bool(np.all(partial_sums(a) >= partial_sums(b) - tol))


def majorization_gap(w, w_prime) -> float:
    """Smallest value of ``sum_k(w) - sum_k(w_prime)`` over k; negative means no majorization."""
    a, b = _pad(np.asarray(w, dtype=float).ravel(), np.asarray(w_prime, dtype=float).ravel())
    return float(np.min(partial_sums(a) - partial_sums(b)))


def sort_descending(w) -> tuple[np.ndarray, np.ndarray]:
    """Descending copy of ``w`` and the stable order used (``w[order]``)."""
    w = np.asarray(w, dtype=float)
    order = np.argsort(-w, kind="stable")
    return w[order], order


# --------------------------------------------------------------------------
# T-transforms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TTransformStep:
    """Mix entries ``j`` and ``k``: ``w_j -> t w_j + (1-t) w_k`` and symmetrically."""

    j: int
    k: int
    t: float

    def __post_init__(self):
        if self.j == self.k:
            raise ValueError("T-transform needs two distinct indices")
        if self.j < 0 or self.k < 0:
            raise ValueError("T-transform indices must be non-negative")
        if not (0.0 <= self.t <= 1.0):
            raise ValueError(f"T-transform parameter must lie in [0, 1], got {self.t}")

    def apply(self, w) -> np.ndarray:
        w = np.array(w, dtype=float)
        a, b = w[self.j], w[self.k]
        w[self.j] = self.t * a + (1.0 - self.t) * b
        w[self.k] = self.t * b + (1.0 - self.t) * a
        return w

    def matrix(self, d: int) -> np.ndarray:
        """Doubly stochastic matrix ``t I + (1-t) P_jk``."""
        m = np.eye(d)
        m[self.j, self.j] = m[self.k, self.k] = self.t
        m[self.j, self.k] = m[self.k, self.j] = 1.0 - self.t
        return m

    def rotation(self, d: int) -> np.ndarray:
        """Two-level rotation with ``|j> -> sqrt(t)|j> + sqrt(1-t)|k>``."""
        c, s = np.sqrt(self.t), np.sqrt(1.0 - self.t)
        m = np.eye(d, dtype=complex)
        m[self.j, self.j] = m[self.k, self.k] = c
        m[self.k, self.j] = s
        m[self.j, self.k] = -s
        return m

    def to_dict(self) -> dict:
        return {"j": int(self.j), "k": int(self.k), "t": float(self.t)}


def apply_chain(w, steps) -> np.ndarray:
    w = np.array(w, dtype=float)
    for st in steps:
        a, b = w[st.j], w[st.k]
        w[st.j] = st.t * a + (1.0 - st.t) * b
        w[st.k] = st.t * b + (1.0 - st.t) * a
    return w


def t_transform_chain(w, w_prime, tol: float = STEP_TOL) -> list[TTransformStep]:
    """T-transforms turning sorted ``w`` into sorted ``w_prime`` (at most d-1 steps).

    Each step picks ``k`` as the first index where ``w'_k > w_k`` and ``j`` as
    the last index before ``k`` where ``w_j > w'_j``, then moves the smaller
    of the two gaps. Entries within ``tol`` are treated as equal.
    """
    w = np.asarray(w, dtype=float).copy()
    wp = np.asarray(w_prime, dtype=float)
    if w.shape != wp.shape or w.ndim != 1:
        raise ValueError("t_transform_chain needs two vectors of equal length")
    if np.any(np.diff(w) > tol) or np.any(np.diff(wp) > tol):
        raise ValueError("t_transform_chain expects descending-sorted inputs")
    if not majorizes(w, wp):
        raise MajorizationError(f"source does not majorize target (gap {majorization_gap(w, wp):.3e})")
    steps: list[TTransformStep] = []
    for _ in range(w.size):
        diff = wp - w
        above = np.flatnonzero(diff > tol)
        if above.size == 0:
            break
        k = int(above[0])
        below = np.flatnonzero(diff[:k] < -tol)
        if below.size == 0:
            if np.max(np.abs(diff)) <= MAJ_TOL:
                break
            raise MajorizationError("T-transform chain stalled; inputs are not majorization-ordered")
        j = int(below[-1])
        move = min(w[j] - wp[j], wp[k] - w[k])
        t = float(np.clip(1.0 - move / (w[j] - w[k]), 0.0, 1.0))
        a, b = w[j], w[k]
        w[j] = t * a + (1.0 - t) * b
        w[k] = t * b + (1.0 - t) * a
        if abs(w[j] - wp[j]) <= tol:
            w[j] = wp[j]
        if abs(w[k] - wp[k]) <= tol:
            w[k] = wp[k]
        steps.append(TTransformStep(j, k, t))
    return steps


# --------------------------------------------------------------------------
# Schur-Horn synthesis
# --------------------------------------------------------------------------


def rotate_rows(m: np.ndarray, step: TTransformStep) -> None:
    """In place: ``m <- G m`` with ``G`` the rotation of ``step``."""
    c, s = np.sqrt(step.t), np.sqrt(1.0 - step.t)
    rj = m[step.j].copy()
    rk = m[step.k].copy()
    m[step.j] = c * rj - s * rk
    m[step.k] = s * rj + c * rk


def chain_unitary(steps, d: int) -> np.ndarray:
    """Ordered product ``G_m ... G_1`` of the step rotations."""
    m = np.eye(d, dtype=complex)
    for st in steps:
        rotate_rows(m, st)
    return m


@dataclass
class UnitaryPlan:
    """``post @ G_m ... G_1 @ pre`` together with its dense realization."""

    steps: list[TTransformStep]
    dim: int
    pre_rotation: np.ndarray | None = None
    post_rotation: np.ndarray | None = None
    dense: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.dense is None:
            self.dense = self.compose()

    def compose(self) -> np.ndarray:
        m = np.eye(self.dim, dtype=complex) if self.pre_rotation is None else np.array(self.pre_rotation, dtype=complex)
        for st in self.steps:
            rotate_rows(m, st)
        if self.post_rotation is not None:
            m = np.asarray(self.post_rotation) @ m
        return m

    def unitarity_residual(self) -> float:
        u = self.dense
        return float(np.max(np.abs(u.conj().T @ u - np.eye(self.dim))))

    def consistency_residual(self) -> float:
        return float(np.max(np.abs(self.compose() - self.dense)))

    def apply(self, rho) -> np.ndarray:
        rho = np.asarray(rho)
        if rho.ndim == 1:
            rho = np.diag(rho)
        return self.dense @ rho @ self.dense.conj().T


def schur_horn_unitary(omega, omega_prime) -> UnitaryPlan:
    """Unitary ``U`` with ``diag(U omega U^dagger)`` equal to the spectrum of ``omega_prime``.

    The diagonal is taken in the eigenbasis of ``omega_prime`` with
    descending eigenvalues. Vectors are read as diagonal matrices.
    """
    omega = np.asarray(omega)
    omega_prime = np.asarray(omega_prime)
    w, basis = eigenbasis(omega)
    wp, basis_p = eigenbasis(omega_prime)
    if w.size != wp.size:
        raise ValueError("schur_horn_unitary needs states of equal dimension")
    if not majorizes(w, wp):
        raise MajorizationError(f"spectrum of omega does not majorize omega' (gap {majorization_gap(w, wp):.3e})")
    steps = t_transform_chain(w, wp)
    return UnitaryPlan(
        steps=steps,
        dim=w.size,
        pre_rotation=np.asarray(basis, dtype=complex).conj().T,
        post_rotation=np.asarray(basis_p, dtype=complex),
    )


def diagonal_residual(plan: UnitaryPlan, omega, omega_prime) -> float:
    """Max deviation of ``diag(U omega U^dagger)`` in the omega' eigenbasis from its spectrum."""
    omega = np.diag(omega) if np.ndim(omega) == 1 else np.asarray(omega)
    wp, basis_p = eigenbasis(omega_prime)
    rotated = plan.apply(omega)
    diag = np.einsum("ia,ij,ja->a", np.conj(basis_p), rotated, basis_p).real
    return float(np.max(np.abs(diag - wp)))


# --------------------------------------------------------------------------
# permutation mixtures
# --------------------------------------------------------------------------


def apply_permutation(v, perm) -> np.ndarray:
    v = np.asarray(v)
    out = np.empty_like(v)
    out[np.asarray(perm)] = v
    return out


def permutation_matrix(perm) -> np.ndarray:
    perm = np.asarray(perm)
    m = np.zeros((perm.size, perm.size))
    m[perm, np.arange(perm.size)] = 1.0
    return m


@dataclass
class PermutationMixture:
    """Convex combination ``sum_a q_a P_a`` of permutation matrices."""

    weights: np.ndarray
    perms: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.perms = np.atleast_2d(np.asarray(self.perms, dtype=np.int64))
        if self.weights.ndim != 1 or self.weights.size != self.perms.shape[0]:
            raise ValueError("one weight per permutation required")
        if np.any(self.weights < -PRUNE_TOL) or abs(self.weights.sum() - 1.0) > MAJ_TOL:
            raise ValueError("mixture weights must form a probability vector")
        d = self.perms.shape[1]
        if not np.all(np.sort(self.perms, axis=1) == np.arange(d)):
            raise ValueError("every mixture component must be a bijection")

    def __len__(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.perms.shape[1]

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        for q, perm in zip(self.weights, self.perms):
            out[perm] += q * v
        return out

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.dim, self.dim))
        cols = np.arange(self.dim)
        for q, perm in zip(self.weights, self.perms):
            m[perm, cols] += q
        return m

    def terms(self):
        return list(zip(self.weights.tolist(), self.perms))


def _tight_blocks(y: np.ndarray, prefix: np.ndarray, tol: float):
    order = np.argsort(-y, kind="stable")
    cum = np.cumsum(y[order])
    cuts = np.flatnonzero(cum[:-1] >= prefix[:-1] - tol) + 1
    bounds = np.concatenate(([0], cuts, [y.size]))
    return [(order[a:b], int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def _step_length(y: np.ndarray, d: np.ndarray, prefix: np.ndarray) -> float:
    """Largest ``mu`` keeping ``y + mu d`` inside the permutohedron of the block."""

    def excess(mu):
        z = y + mu * d
        return np.max(np.cumsum(np.sort(z)[::-1])[:-1] - prefix[:-1])

    hi = 1.0
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 2.0**80:
            raise MajorizationError("permutohedron step search diverged")
    mu = hi
    for _ in range(500):
        z = y + mu * d
        order = np.argsort(-z, kind="stable")
        gap = np.cumsum(z[order])[:-1] - prefix[:-1]
        k = int(np.argmax(gap))
        top = order[: k + 1]
        slope = d[top].sum()
        new = (prefix[k] - y[top].sum()) / slope
        if new >= mu * (1.0 - 1e-15):
            break
        mu = new
    return float(mu)


def _decompose_sorted(x: np.ndarray, y: np.ndarray, tol: float = 1e-12):
    """Write ``y`` as a mixture of rearrangements of descending ``x``.

    Returns ``(weights, sources)`` with ``y[i] = sum_a weights[a] * x[sources[a, i]]``.
    The permutohedron of ``x`` is walked face by face: split ``y`` along its
    tight prefix sets, then step from the comonotone vertex through ``y`` to
    the boundary. Components of independent blocks are coupled by sharing
    one probability interval, so the result has at most ``len(x)`` terms.
    """
    n = y.size
    leaves: list[tuple[np.ndarray, np.ndarray, float, float]] = []
    stack = [(np.arange(n), 0, y.astype(float), 0.0, 1.0)]
    budget = 8 * n * n + 64
    while stack:
        budget -= 1
        if budget < 0:
            raise MajorizationError("permutation decomposition did not terminate")
        coords, off, yb, lo, hi = stack.pop()
        s = coords.size
        if s == 1:
            leaves.append((coords, np.array([off]), lo, hi))
            continue
        xb = x[off : off + s]
        prefix = np.cumsum(xb)
        blocks = _tight_blocks(yb, prefix, tol)
        if len(blocks) > 1:
            for local, a, _ in blocks:
                stack.append((coords[local], off + a, yb[local], lo, hi))
            continue
        order = np.argsort(-yb, kind="stable")
        rank = np.empty(s, dtype=np.int64)
        rank[order] = np.arange(s)
        vertex = xb[rank]
        d = yb - vertex
        if np.max(np.abs(d)) <= tol:
            leaves.append((coords, rank + off, lo, hi))
            continue
        mu = _step_length(yb, d, prefix)
        lam = 1.0 / (1.0 + mu)
        mid = lo + lam * (hi - lo)
        leaves.append((coords, rank + off, mid, hi))
        stack.append((coords, off, yb + mu * d, lo, mid))

    # global breakpoints, snapped so float noise does not create slivers
    raw = np.unique(np.concatenate([[lo, hi] for _, _, lo, hi in leaves] + [[0.0, 1.0]]))
    keep = np.concatenate(([True], np.diff(raw) > PRUNE_TOL))
    points = raw[keep]
    points[-1] = 1.0

    def snap(v):
        return points[np.clip(np.searchsorted(points, v - PRUNE_TOL), 0, points.size - 1)]

    mids = 0.5 * (points[:-1] + points[1:])
    widths = np.diff(points)
    sources = np.full((mids.size, n), -1, dtype=np.int64)
    for coords, vals, lo, hi in leaves:
        a = np.searchsorted(mids, snap(lo))
        b = np.searchsorted(mids, snap(hi))
        if b > a:
            sources[a:b, coords] = vals
    if np.any(sources < 0):
        raise MajorizationError("permutation decomposition left a gap")
    return widths, sources


def permutation_mixture(w, w_prime) -> PermutationMixture:
    """Permutations ``P_a`` and weights ``q_a`` with ``sum_a q_a P_a w = w_prime``.

    Entries of ``w`` and ``w_prime`` may be in any order. Duplicate
    permutations are merged and weights below 1e-14 pruned.
    """
    w = np.asarray(w, dtype=float)
    wp = np.asarray(w_prime, dtype=float)
    if w.shape != wp.shape or w.ndim != 1:
        raise ValueError("permutation_mixture needs two vectors of equal length")
    if not majorizes(w, wp):
        raise MajorizationError(f"source does not majorize target (gap {majorization_gap(w, wp):.3e})")
    xs, order = sort_descending(w)
    widths, sources = _decompose_sorted(xs, wp)
    # y[i] = w[order[src[i]]]; destination form is the inverse map
    origin = order[sources]
    perms = np.argsort(origin, axis=1, kind="stable")
    return _merge_terms(widths, perms)


def _merge_terms(weights: np.ndarray, perms: np.ndarray) -> PermutationMixture:
    uniq, inverse = np.unique(perms, axis=0, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=weights, minlength=uniq.shape[0])
    keep = merged >= PRUNE_TOL
    merged, uniq = merged[keep], uniq[keep]
    # deterministic order: heaviest first, ties by permutation
    order = np.lexsort(tuple(uniq.T[::-1]) + (-merged,))
    return PermutationMixture(merged[order] / merged.sum(), uniq[order])


def chain_mixture(steps, d: int) -> PermutationMixture:
    """Term-by-term expansion of a T-transform product (at most 2^m terms)."""
    weights = np.ones(1)
    perms = np.arange(d)[None, :]
    for st in steps:
        swapped = perms.copy()
        mj, mk = swapped == st.j, swapped == st.k
        swapped[mj], swapped[mk] = st.k, st.j
        weights = np.concatenate((st.t * weights, (1.0 - st.t) * weights))
        perms = np.concatenate((perms, swapped))
        live = weights >= PRUNE_TOL
        weights, perms = weights[live], perms[live]
    return _merge_terms(weights, perms)


def is_doubly_stochastic(m, tol: float = 1e-9) -> bool:
    m = np.asarray(m, dtype=float)
    return bool(
        np.all(m >= -tol)
        and np.allclose(m.sum(axis=0), 1.0, atol=tol)
        and np.allclose(m.sum(axis=1), 1.0, atol=tol)
    )

