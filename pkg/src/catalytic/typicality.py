"""Typical truncation of n-copy states and the majorized n-copy target.

Everything works on spectra: a quantum state is handled through its
eigenvalues (descending, stable ties) and eigenbasis, a classical state
through its entries in the given order. n-copy tuples are flattened with the
first copy slowest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import DegenerateTruncation, DimensionCapExceeded, EntropyGapError
from .majorization import (
    UnitaryPlan,
    apply_chain,
    majorizes,
    t_transform_chain,
)
from .statekit import (
    as_state,
    check_dimension,
    dimension_cap,
    eigh_desc,
    is_classical,
    shannon_entropy,
    trace_distance,
)

EQUAL_ENTROPY_TOL = 1e-12
ISOSPECTRAL_TOL = 1e-12
MODES = ("auto", "typical", "widened", "closest")
CLOSEST_LIMIT = 2**12


# --------------------------------------------------------------------------
# spectra helpers
# --------------------------------------------------------------------------


def spectral_data(state) -> tuple[np.ndarray, np.ndarray | None]:
    """Diagonal weights and basis (``None`` for classical states)."""
    state = np.asarray(state)
    if state.ndim == 1:
        return np.asarray(state, dtype=float), None
    return eigh_desc(state)


def n_copy(p, n: int) -> np.ndarray:
    """``p`` tensored ``n`` times as a flat vector."""
    p = np.asarray(p, dtype=float)
    out = np.ones(1)
    for _ in range(n):
        out = np.multiply.outer(out, p).ravel()
    return out


def surprisals(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(p > 0, -np.log(np.where(p > 0, p, 1.0)), np.inf)


def mean_surprisal(p, n: int) -> np.ndarray:
    """``(1/n) sum_j ln(1/p_{i_j})`` for every n-tuple; ``inf`` on zero-probability tuples."""
    s = surprisals(p)
    out = np.zeros(1)
    for _ in range(n):
        out = np.add.outer(out, s).ravel()
    return out / n


def surprisal_spread(p) -> float:
    """Range of ``ln(1/p_i)`` over the support of ``p``."""
    s = surprisals(p)
    s = s[np.isfinite(s)]
    return float(s.max() - s.min())


def hoeffding_bound(p, n: int, delta: float) -> float:
    """``2 exp(-2 n delta^2 / R^2)`` bounding the atypical mass; 0 when ``R == 0``."""
    return _hoeffding(surprisal_spread(p), n, delta)


def _hoeffding(spread: float, n: int, delta: float) -> float:
    if spread <= 0.0:
        return 0.0
    return 2.0 * math.exp(-2.0 * n * delta * delta / (spread * spread))


# --------------------------------------------------------------------------
# truncation
# --------------------------------------------------------------------------


@dataclass
class TypicalTruncation:
    """Renormalized restriction of an n-copy state to its delta-typical tuples.

    ``weights`` holds the diagonal of the base state in ``basis`` (the
    state's own entries for classical input); ``truncated`` is indexed by
    n-tuples of those basis labels.
    """

    base_state: np.ndarray
    n: int
    delta: float
    weights: np.ndarray
    basis: np.ndarray | None
    kept: np.ndarray
    truncated: np.ndarray
    tail_mass: float
    entropy: float

    @property
    def kept_count(self) -> int:
        return int(np.count_nonzero(self.kept))

    @property
    def dim(self) -> int:
        return self.weights.size

    def kept_tuples(self) -> np.ndarray:
        idx = np.flatnonzero(self.kept)
        return np.stack(np.unravel_index(idx, (self.dim,) * self.n), axis=1)

    def kept_eigenvalues(self) -> np.ndarray:
        """Unnormalized n-copy eigenvalues on the kept tuples."""
        return n_copy(self.weights, self.n)[self.kept]

    def hoeffding(self) -> float:
        return _hoeffding(surprisal_spread(self.weights), self.n, self.delta)

    def state(self) -> np.ndarray:
        """Dense truncated state (a vector for classical input)."""
        if self.basis is None:
            return self.truncated.copy()
        basis_n = tensor_basis(self.basis, self.n)
        return (basis_n * self.truncated) @ basis_n.conj().T

    def to_sparse(self) -> list[tuple[list[int], float]]:
        return [
            ([int(i) for i in tup], float(self.truncated[flat]))
            for tup, flat in zip(self.kept_tuples(), np.flatnonzero(self.kept))
        ]


def tensor_basis(basis, n: int) -> np.ndarray:
    basis = np.asarray(basis, dtype=complex)
    check_dimension(basis.shape[0] ** n, "quantum", "n-copy basis")
    out = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        out = np.kron(out, basis)
    return out


def _truncate_weights(weights: np.ndarray, n: int, delta: float):
    kind_total = weights.size**n
    check_dimension(kind_total, "classical", "n-copy spectrum")
    h = shannon_entropy(weights)
    full = n_copy(weights, n)
    kept = (np.abs(mean_surprisal(weights, n) - h) < delta) & (full > 0)
    mass = float(full[kept].sum())
    return full, kept, mass, h


def typical_truncate(state, n: int, delta: float) -> TypicalTruncation:
    """Keep n-tuples with mean surprisal strictly within ``delta`` of the entropy."""
    if n < 1:
        raise ValueError("copy number must be at least 1")
    if not delta > 0:
        raise ValueError("delta must be positive")
    state = as_state(state)
    weights, basis = spectral_data(state)
    full, kept, mass, h = _truncate_weights(weights, n, delta)
    if mass <= 0.0:
        raise DegenerateTruncation(f"no typical tuples for n={n}, delta={delta}")
    truncated = np.where(kept, full, 0.0) / mass
    return TypicalTruncation(
        base_state=state,
        n=n,
        delta=float(delta),
        weights=weights,
        basis=basis,
        kept=kept,
        truncated=truncated,
        tail_mass=max(0.0, 1.0 - mass),
        entropy=h,
    )


@dataclass
class TypeClassTruncation:
    """Typical truncation summarized by type classes (symbol counts).

    All tuples of one type share the same eigenvalue and mean surprisal, so
    the kept count, tail mass and eigenvalue range follow from the
    ``C(n+d-1, d-1)`` types without enumerating ``d^n`` tuples.
    """

    n: int
    delta: float
    weights: np.ndarray
    entropy: float
    types: np.ndarray
    multiplicities: list[int]
    log_eigenvalues: np.ndarray
    kept: np.ndarray
    tail_mass: float

    @property
    def kept_count(self) -> int:
        return sum(m for m, k in zip(self.multiplicities, self.kept) if k)

    def kept_eigenvalues(self) -> np.ndarray:
        """One unnormalized eigenvalue per kept type."""
        return np.exp(self.log_eigenvalues[self.kept])

    def hoeffding(self) -> float:
        return _hoeffding(surprisal_spread(self.weights), self.n, self.delta)


def _compositions(n: int, d: int):
    if d == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, d - 1):
            yield (first,) + rest


def typical_type_classes(state, n: int, delta: float) -> TypeClassTruncation:
    """Same selection rule as :func:`typical_truncate`, computed per type class."""
    if n < 1:
        raise ValueError("copy number must be at least 1")
    if not delta > 0:
        raise ValueError("delta must be positive")
    weights, _ = spectral_data(as_state(state))
    d = weights.size
    check_dimension(math.comb(n + d - 1, d - 1), "classical", "type classes")
    h = shannon_entropy(weights)
    types = np.array(list(_compositions(n, d)), dtype=np.int64)
    support = weights > 0
    feasible = np.all((types == 0) | support, axis=1)
    logs = np.log(np.where(support, weights, 1.0))
    log_eig = np.where(feasible, types @ logs, -np.inf)
    multiplicities = [
        math.factorial(n) // math.prod(math.factorial(int(c)) for c in row) for row in types
    ]
    log_mult = np.array([math.lgamma(n + 1) - sum(math.lgamma(int(c) + 1) for c in row) for row in types])
    with np.errstate(invalid="ignore"):
        mean = np.where(feasible, -log_eig / n, np.inf)
    kept = feasible & (np.abs(mean - h) < delta)
    mass = float(np.exp(log_mult[kept] + log_eig[kept]).sum())
    if mass <= 0.0:
        raise DegenerateTruncation(f"no typical tuples for n={n}, delta={delta}")
    return TypeClassTruncation(
        n=n,
        delta=float(delta),
        weights=weights,
        entropy=h,
        types=types,
        multiplicities=multiplicities,
        log_eigenvalues=log_eig,
        kept=kept,
        tail_mass=max(0.0, 1.0 - mass),
    )


def projector_size_bounds(t: TypicalTruncation | TypeClassTruncation) -> tuple[float, float, int]:
    """``((1 - tail) e^{n(H-delta)}, e^{n(H+delta)}, kept count)``.

    Both inequalities hold for every truncation: each kept tuple has weight
    in ``(e^{-n(H+delta)}, e^{-n(H-delta)})`` and their total is ``1 - tail``.
    """
    lower = (1.0 - t.tail_mass) * math.exp(t.n * (t.entropy - t.delta))
    upper = math.exp(t.n * (t.entropy + t.delta))
    return lower, upper, t.kept_count


# --------------------------------------------------------------------------
# error bound and size estimate
# --------------------------------------------------------------------------


def error_bound(delta_h: float, n: int, spread: float, spread_prime: float | None = None) -> float:
    """Certified joint error at ``delta = delta_h / 4``.

    Sum of the Hoeffding tail bounds of source and target, which bounds the
    n-copy distance through the triangle inequality.
    """
    if not delta_h > 0:
        raise ValueError("entropy gap must be positive")
    if spread_prime is None:
        spread_prime = spread
    delta = delta_h / 4.0
    return _hoeffding(spread, n, delta) + _hoeffding(spread_prime, n, delta)


def size_estimate(
    delta_h: float, epsilon: float, spread: float, d: int = 2, spread_prime: float | None = None
) -> dict:
    """Copy number and catalyst size at which :func:`error_bound` reaches ``epsilon``.

    Uses the larger spread, so ``n_estimate`` never undercuts the smallest n
    with ``error_bound(...) <= epsilon``.
    """
    if not delta_h > 0:
        raise ValueError("entropy gap must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    r = max(spread, spread if spread_prime is None else spread_prime)
    n_cont = 8.0 * r * r * math.log(4.0 / epsilon) / (delta_h * delta_h)
    n_est = max(1, math.ceil(n_cont - 1e-12))
    log_d = math.log(d)
    # sigma_1 on S_2..S_n x A, plus the d-dimensional randomness register
    log_quantum = (n_est - 1) * log_d + math.log(n_est) + log_d
    # q on S_2..S_n x A x R with R at most d^n mixture terms
    log_classical = (n_est - 1) * log_d + math.log(n_est) + n_est * log_d
    return {
        "n_continuous": n_cont,
        "n_estimate": n_est,
        "catalyst_dim_estimate": d ** (n_est - 1) * n_est * d,
        "log_catalyst_dim_quantum": log_quantum,
        "log_catalyst_dim_classical": log_classical,
    }


# --------------------------------------------------------------------------
# majorized target
# --------------------------------------------------------------------------


@dataclass
class MajorizedTarget:
    """n-copy state majorized by the source and close to the target's n-th power.

    ``target`` is the diagonal of the state in the n-copy eigenbasis of the
    target (``target_basis``), indexed by tuples of target eigen-labels. The
    rank maps ``source_order`` / ``target_order`` list tuples by descending
    truncated weight; the T-transform chain acts in those rank coordinates.
    """

    n: int
    delta: float | None
    mode: str
    source_weights: np.ndarray
    target_weights: np.ndarray
    source_basis: np.ndarray | None
    target_basis: np.ndarray | None
    source_order: np.ndarray
    target_order: np.ndarray
    steps: list
    target: np.ndarray
    epsilon_achieved: float
    epsilon_certified: float
    tail_source: float
    tail_target: float
    _plan: UnitaryPlan | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.source_weights.size

    @property
    def classical(self) -> bool:
        return self.source_basis is None

    def source_vector(self) -> np.ndarray:
        return n_copy(self.source_weights, self.n)

    def reference_vector(self) -> np.ndarray:
        return n_copy(self.target_weights, self.n)

    def single_site_marginals(self) -> np.ndarray:
        t = self.target.reshape((self.dim,) * self.n)
        axes = tuple(range(self.n))
        return np.stack([t.sum(axis=axes[:k] + axes[k + 1 :]) for k in range(self.n)])

    def plan(self) -> UnitaryPlan:
        """Dense n-copy unitary mapping the source power onto the target diagonal."""
        if self._plan is None:
            big = self.dim**self.n
            check_dimension(big, "quantum", "n-copy unitary")
            pin = np.zeros((big, big))
            pin[np.arange(big), self.source_order] = 1.0
            pout = np.zeros((big, big))
            pout[self.target_order, np.arange(big)] = 1.0
            pre = pin if self.source_basis is None else pin @ tensor_basis(self.source_basis, self.n).conj().T
            post = pout if self.target_basis is None else tensor_basis(self.target_basis, self.n) @ pout
            self._plan = UnitaryPlan(self.steps, big, pre_rotation=pre, post_rotation=post)
        return self._plan

    def state(self) -> np.ndarray:
        """Dense target state (vector for classical input)."""
        if self.target_basis is None:
            return self.target.copy()
        basis_n = tensor_basis(self.target_basis, self.n)
        return (basis_n * self.target) @ basis_n.conj().T


def entropy_gap(state, state_prime) -> float:
    return shannon_entropy(spectral_data(state)[0]) - shannon_entropy(spectral_data(state_prime)[0])


def isospectral(state, state_prime, tol: float = ISOSPECTRAL_TOL) -> bool:
    a = np.sort(spectral_data(state)[0])
    b = np.sort(spectral_data(state_prime)[0])
    return a.shape == b.shape and bool(np.max(np.abs(a - b)) <= tol)


def perturb_equal_entropy(state_prime, epsilon: float) -> tuple[np.ndarray, float]:
    """Mix the target with the maximally mixed state, moving it by at most ``epsilon / 2``."""
    state_prime = np.asarray(state_prime)
    d = state_prime.shape[0]
    flat = np.full(d, 1.0 / d) if state_prime.ndim == 1 else np.eye(d) / d
    gap = trace_distance(state_prime, flat)
    if gap == 0.0:
        return state_prime.copy(), 0.0
    eta = min(1.0, 0.5 * epsilon / gap)
    return (1.0 - eta) * state_prime + eta * flat, eta


def _type_windows(weights: np.ndarray, n: int) -> np.ndarray:
    s = mean_surprisal(weights, n)
    s = s[np.isfinite(s)]
    return np.unique(np.round(np.abs(s - shannon_entropy(weights)), 12))


def _closest_majorized(x_sorted: np.ndarray, y_sorted: np.ndarray) -> np.ndarray:
    """Descending ``z`` majorized by ``x`` minimizing the l1 distance to ``y``.

    Linear program in the prefix sums ``Z_k`` of ``z``: ``Z_k <= X_k``,
    ``Z`` concave (so ``z`` is sorted) and nondecreasing, ``Z_N = 1``.
    """
    n = y_sorted.size
    xs = np.cumsum(x_sorted)
    xs[-1] = 1.0
    ident = sparse.identity(n, format="csr")
    shift = sparse.eye(n, k=-1, format="csr")  # Z_{k-1}
    diff = ident - shift  # z_k
    rows = [
        sparse.hstack([diff, -ident]),
        sparse.hstack([-diff, -ident]),
    ]
    rhs = [y_sorted, -y_sorted]
    if n > 1:
        # z_k - z_{k+1} >= 0  <=>  -2 Z_k + Z_{k-1} + Z_{k+1} <= 0
        concave = (-2.0 * ident + shift + sparse.eye(n, k=1, format="csr"))[: n - 1]
        last = sparse.csr_matrix(([1.0, -1.0], ([0, 0], [n - 2, n - 1])), shape=(1, n))
        rows += [sparse.hstack([concave, sparse.csr_matrix((n - 1, n))]), sparse.hstack([last, sparse.csr_matrix((1, n))])]
        rhs += [np.zeros(n - 1), np.zeros(1)]
    bounds = [(0.0, float(v)) for v in xs[:-1]] + [(1.0, 1.0)] + [(0.0, None)] * n
    res = linprog(
        np.r_[np.zeros(n), np.ones(n)],
        A_ub=sparse.vstack(rows, format="csr"),
        b_ub=np.concatenate(rhs),
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"closest-majorized linear program failed: {res.message}")
    z = np.clip(np.diff(np.r_[0.0, res.x[:n]]), 0.0, None)
    z = np.sort(z)[::-1] / z.sum()
    # exact repair: the pointwise minimum of two concave prefix curves is concave
    prefix = np.minimum(np.cumsum(z), xs)
    prefix[-1] = 1.0
    return np.clip(np.diff(np.r_[0.0, prefix]), 0.0, None)


def _assemble(x_full, y_full, x_hat, y_hat, n, delta, mode, p, pp, basis, basis_p, tails, spreads):
    order_x = np.argsort(-x_hat, kind="stable")
    order_y = np.argsort(-y_hat, kind="stable")
    steps = t_transform_chain(x_hat[order_x], y_hat[order_y])
    ranked = apply_chain(x_full[order_x], steps)
    target = np.empty_like(ranked)
    target[order_y] = ranked
    achieved = 0.5 * float(np.abs(target - y_full).sum())
    if delta is None:
        certified = achieved
    else:
        certified = min(1.0, _hoeffding(spreads[0], n, delta) + _hoeffding(spreads[1], n, delta))
    return MajorizedTarget(
        n=n,
        delta=delta,
        mode=mode,
        source_weights=p,
        target_weights=pp,
        source_basis=basis,
        target_basis=basis_p,
        source_order=order_x,
        target_order=order_y,
        steps=steps,
        target=target,
        epsilon_achieved=achieved,
        epsilon_certified=certified,
        tail_source=tails[0],
        tail_target=tails[1],
    )


def _target_at_n(p, pp, basis, basis_p, n: int, mode: str) -> MajorizedTarget | None:
    """Majorized target at a fixed ``n``, or ``None`` if ``mode`` is not feasible there."""
    check_dimension(p.size**n, "classical", "n-copy spectrum")
    dh = shannon_entropy(pp) - shannon_entropy(p)
    spreads = (surprisal_spread(p), surprisal_spread(pp))
    x_full, y_full = n_copy(p, n), n_copy(pp, n)
    common = (p, pp, basis, basis_p)

    def attempt(delta, label):
        _, kx, mx, _ = _truncate_weights(p, n, delta)
        _, ky, my, _ = _truncate_weights(pp, n, delta)
        if mx <= 0 or my <= 0:
            return None
        x_hat = np.where(kx, x_full, 0.0) / mx
        y_hat = np.where(ky, y_full, 0.0) / my
        if not majorizes(x_hat, y_hat):
            return None
        return _assemble(x_full, y_full, x_hat, y_hat, n, delta, label, *common, (1 - mx, 1 - my), spreads)

    if mode in ("typical", "auto"):
        got = attempt(dh / 4.0, "typical")
        if got is not None or mode == "typical":
            return got
    if mode in ("widened", "auto"):
        windows = np.unique(np.concatenate([_type_windows(p, n), _type_windows(pp, n)]))
        for w in windows:
            delta = w * (1.0 + 1e-9) + 1e-12
            if delta <= dh / 4.0:
                continue
            got = attempt(delta, "widened")
            if got is not None:
                return got
        if mode == "widened":
            return None
    order_x = np.argsort(-x_full, kind="stable")
    order_y = np.argsort(-y_full, kind="stable")
    z = _closest_majorized(x_full[order_x], y_full[order_y])
    x_hat = x_full
    y_hat = np.empty_like(z)
    y_hat[order_y] = z
    return _assemble(x_full, y_full, x_hat, y_hat, n, None, "closest", *common, (0.0, 0.0), spreads)


def build_majorized_target(
    state,
    state_prime,
    epsilon: float | None = None,
    n: int | None = None,
    mode: str = "auto",
    max_n: int | None = None,
) -> MajorizedTarget:
    """n-copy state majorized by ``state^{(x)n}`` and close to ``state_prime^{(x)n}``.

    Modes: ``typical`` truncates both sides at ``delta = dH/4``; ``widened``
    uses the smallest larger common ``delta`` at which the truncations are
    majorization-ordered; ``closest`` solves for the majorized state nearest
    to the target power; ``auto`` tries them in that order.

    With ``n`` given, the construction runs at that copy number. Otherwise
    ``n`` is the smallest copy number (up to ``max_n`` and the dimension cap)
    at which either the truncation bound is at most ``epsilon`` and a
    truncation mode is feasible, or the closest majorized target is within
    ``epsilon`` (only tried up to ``CLOSEST_LIMIT`` tuples).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    state = as_state(state)
    state_prime = as_state(state_prime)
    if is_classical(state) != is_classical(state_prime) or state.shape != state_prime.shape:
        raise ValueError("source and target must be states of the same kind and dimension")
    p, basis = spectral_data(state)
    pp, basis_p = spectral_data(state_prime)
    dh = shannon_entropy(pp) - shannon_entropy(p)
    if dh <= EQUAL_ENTROPY_TOL:
        raise EntropyGapError(f"target entropy must exceed source entropy (gap {dh:.3e})")
    if n is not None:
        if n < 1:
            raise ValueError("copy number must be at least 1")
        got = _target_at_n(p, pp, basis, basis_p, n, mode)
        if got is None:
            raise DegenerateTruncation(f"mode {mode!r} has no majorization-ordered truncation at n={n}")
        return got
    if epsilon is None or not epsilon > 0:
        raise ValueError("give a positive epsilon or a copy number")
    kind = "classical" if basis is None else "quantum"
    cap = dimension_cap(kind)
    spreads = (surprisal_spread(p), surprisal_spread(pp))
    d = p.size
    top = max(1, int(math.floor(math.log(cap) / math.log(d) + 1e-12))) if d > 1 else 1
    if max_n is not None:
        top = min(top, max_n)
    best = math.inf
    for m in range(1, top + 1):
        if mode != "closest" and error_bound(dh, m, *spreads) <= epsilon:
            got = _target_at_n(p, pp, basis, basis_p, m, "typical" if mode == "auto" else mode)
            if got is None and mode == "auto":
                got = _target_at_n(p, pp, basis, basis_p, m, "widened")
            if got is not None:
                return got
        if mode in ("auto", "closest") and d**m <= CLOSEST_LIMIT:
            got = _target_at_n(p, pp, basis, basis_p, m, "closest")
            if got.epsilon_certified <= epsilon:
                return got
            best = min(best, got.epsilon_certified)
    if mode != "closest":
        best = min(best, error_bound(dh, top, *spreads))
    raise DimensionCapExceeded(
        f"no copy number up to {top} reaches epsilon={epsilon} under the {kind} cap {cap}",
        dimension=d ** (top + 1),
        cap=cap,
        best_epsilon=best,
        max_n=top,
    )
