"""States, entropies, distances and composite-system algebra.

Classical states are 1-D probability vectors and quantum states are 2-D
density matrices. Functions dispatch on ``ndim``, so the same call works for
both. All entropies are in nats.
"""

from __future__ import annotations

import contextlib
import contextvars
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

from .errors import ChannelError, DimensionCapExceeded, StateError

NEG_TOL = 1e-12
SUM_TOL = 1e-10
HERM_TOL = 1e-10
EIG_TOL = 1e-10
RENORM_TOL = 1e-12
UNITARY_TOL = 1e-9

DEFAULT_CLASSICAL_CAP = 2**20
DEFAULT_QUANTUM_CAP = 2**12
CAP_ENV_VAR = "CATALYTIC_DIM_CAP"

_caps: contextvars.ContextVar[tuple[int | None, int | None]] = contextvars.ContextVar(
    "catalytic_caps", default=(None, None)
)


# --------------------------------------------------------------------------
# dimension caps
# --------------------------------------------------------------------------


def dimension_cap(kind: str) -> int:
    """Current cap for ``kind`` ('classical' or 'quantum')."""
    if kind not in ("classical", "quantum"):
        raise ValueError(f"unknown cap kind {kind!r}")
    classical, quantum = _caps.get()
    override = classical if kind == "classical" else quantum
    if override is not None:
        return override
    env = os.environ.get(CAP_ENV_VAR)
    if env:
        return int(env)
    return DEFAULT_CLASSICAL_CAP if kind == "classical" else DEFAULT_QUANTUM_CAP


@contextlib.contextmanager
def dimension_caps(classical: int | None = None, quantum: int | None = None):
    """Temporarily override the dimension caps in the current context."""
    old_c, old_q = _caps.get()
    token = _caps.set(
        (classical if classical is not None else old_c, quantum if quantum is not None else old_q)
    )
    try:
        yield
    finally:
        _caps.reset(token)


def check_dimension(total: int, kind: str, what: str = "state") -> None:
    cap = dimension_cap(kind)
    if total > cap:
        raise DimensionCapExceeded(
            f"{what} has {kind} dimension {total}, above the cap {cap}",
            dimension=total,
            cap=cap,
        )


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def as_probability_vector(p) -> np.ndarray:
    """Validate and return ``p`` as a float array.

    Entries down to ``-1e-12`` are accepted and clamped to zero; the sum must
    be within ``1e-10`` of one.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise StateError(f"probability vector must be 1-D and non-empty, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise StateError("probability vector has non-finite entries")
    if np.any(p < -NEG_TOL):
        raise StateError(f"probability vector has negative entry {p.min():.3e}")
    total = p.sum()
    if abs(total - 1.0) > SUM_TOL:
        raise StateError(f"probability vector sums to {total!r}, not 1")
    return np.clip(p, 0.0, None)


def as_density_matrix(rho) -> np.ndarray:
    """Validate and return ``rho`` as a Hermitian complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
        raise StateError(f"density matrix must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise StateError("density matrix has non-finite entries")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERM_TOL:
        raise StateError(f"density matrix is not Hermitian (deviation {herm:.3e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > SUM_TOL:
        raise StateError(f"density matrix has trace {tr!r}, not 1")
    rho = 0.5 * (rho + rho.conj().T)
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -EIG_TOL:
        raise StateError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


def as_state(state) -> np.ndarray:
    arr = np.asarray(state)
    if arr.ndim == 1:
        return as_probability_vector(arr)
    if arr.ndim == 2:
        return as_density_matrix(arr)
    raise StateError(f"state must be a vector or a square matrix, got ndim={arr.ndim}")


def is_classical(state) -> bool:
    return np.ndim(state) == 1


def dimension(state) -> int:
    return int(np.shape(state)[0])


def _same_kind(a, b) -> None:
    if np.ndim(a) != np.ndim(b):
        raise StateError("cannot mix classical and quantum states")
    if np.shape(a) != np.shape(b):
        raise StateError(f"dimension mismatch: {np.shape(a)} vs {np.shape(b)}")


# --------------------------------------------------------------------------
# spectra
# --------------------------------------------------------------------------


def _clean_spectrum(vals: np.ndarray) -> np.ndarray:
    vals = np.where((vals < 0) & (vals >= -EIG_TOL), 0.0, vals)
    if np.any(vals < 0):
        raise StateError(f"negative eigenvalue {vals.min():.3e}")
    vals = np.minimum(vals, 1.0)
    total = vals.sum()
    if abs(total - 1.0) > RENORM_TOL:
        vals = vals / total
    return vals


def eigh_desc(rho) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition with eigenvalues in descending order.

    Ties keep the order returned by the solver (stable sort). Eigenvalues are
    clamped and renormalized so they form a probability vector.
    """
    try:
        vals, vecs = np.linalg.eigh(np.asarray(rho, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise StateError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(-vals, kind="stable")
    return _clean_spectrum(vals[order]), vecs[:, order]


def spectrum(state) -> np.ndarray:
    """Eigenvalues (descending) of a state; sorted entries for a vector."""
    if is_classical(state):
        return np.sort(np.asarray(state, dtype=float))[::-1]
    return eigh_desc(state)[0]


def eigenbasis(state) -> tuple[np.ndarray, np.ndarray]:
    """Descending spectrum and the matching orthonormal basis (as columns).

    For a probability vector the basis is the permutation matrix that sorts
    it, so classical and quantum inputs share one code path.
    """
    if is_classical(state):
        p = np.asarray(state, dtype=float)
        order = np.argsort(-p, kind="stable")
        basis = np.eye(p.size)[:, order]
        return p[order], basis
    return eigh_desc(state)


# --------------------------------------------------------------------------
# entropies and distances
# --------------------------------------------------------------------------


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def von_neumann_entropy(rho) -> float:
    try:
        vals = np.linalg.eigvalsh(np.asarray(rho, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise StateError(f"eigensolver failed: {exc}") from exc
    return shannon_entropy(_clean_spectrum(vals[::-1]))


def entropy(state) -> float:
    """Shannon or von Neumann entropy in nats, depending on the input."""
    if is_classical(state):
        return shannon_entropy(state)
    return von_neumann_entropy(state)


def surprisal_variance(state) -> float:
    """Variance of the surprisal ``-ln p`` under ``p`` (or the spectrum of rho)."""
    p = np.asarray(state, dtype=float) if is_classical(state) else eigh_desc(state)[0]
    nz = p[p > 0]
    s = -np.log(nz)
    h = float(np.sum(nz * s))
    return float(max(0.0, np.sum(nz * (s - h) ** 2)))


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b``; total variation for vectors."""
    _same_kind(a, b)
    if is_classical(a):
        return float(0.5 * np.sum(np.abs(np.asarray(a, float) - np.asarray(b, float))))
    diff = np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex)
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


# --------------------------------------------------------------------------
# composite systems
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered tensor factorization of a joint state space.

    The first factor is the slowest-varying index of the flattened state.
    """

    dims: tuple[int, ...]
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(self.labels) if self.labels else tuple(f"X{i + 1}" for i in range(len(dims)))
        if len(labels) != len(dims):
            raise StateError("layout needs one label per factor")
        if len(set(labels)) != len(labels):
            raise StateError(f"duplicate layout labels {labels}")
        if any(d < 1 for d in dims):
            raise StateError(f"layout dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise StateError(f"unknown subsystem label {label!r}; layout has {self.labels}") from None

    def indices(self, labels: Iterable[str]) -> list[int]:
        return [self.index(lab) for lab in labels]

    def dim_of(self, labels: Iterable[str]) -> int:
        return int(np.prod([self.dims[i] for i in self.indices(labels)], dtype=np.int64))

    def restrict(self, labels: Iterable[str]) -> "SubsystemLayout":
        keep = sorted(self.indices(labels))
        return SubsystemLayout(tuple(self.dims[i] for i in keep), tuple(self.labels[i] for i in keep))

    def complement(self, labels: Iterable[str]) -> tuple[str, ...]:
        drop = set(self.indices(labels))
        return tuple(lab for i, lab in enumerate(self.labels) if i not in drop)

    def __add__(self, other: "SubsystemLayout") -> "SubsystemLayout":
        return SubsystemLayout(self.dims + other.dims, self.labels + other.labels)

    def check(self, state) -> None:
        if dimension(state) != self.total:
            raise StateError(
                f"layout {dict(zip(self.labels, self.dims))} has total dimension "
                f"{self.total} but the state has dimension {dimension(state)}"
            )


def tensor(*states) -> np.ndarray:
    """Kronecker product of states of the same kind (first factor slowest)."""
    if not states:
        raise StateError("tensor needs at least one state")
    kind = np.ndim(states[0])
    total = 1
    for s in states:
        if np.ndim(s) != kind:
            raise StateError("cannot mix classical and quantum states")
        total *= dimension(s)
    check_dimension(total, "classical" if kind == 1 else "quantum", "tensor product")
    out = np.asarray(states[0])
    for s in states[1:]:
        out = np.kron(out, np.asarray(s))
    return out


def power(state, n: int) -> np.ndarray:
    """``n``-fold tensor power; ``n == 0`` gives the trivial one-dimensional state."""
    if n < 0:
        raise ValueError("copy number must be non-negative")
    state = np.asarray(state)
    if n == 0:
        return np.ones(1) if state.ndim == 1 else np.ones((1, 1), dtype=state.dtype)
    check_dimension(dimension(state) ** n, "classical" if state.ndim == 1 else "quantum", "tensor power")
    out = state
    for _ in range(n - 1):
        out = np.kron(out, state)
    return out


def partial_trace(state, layout: SubsystemLayout, keep: Iterable[str]) -> np.ndarray:
    """Marginal on the factors named in ``keep`` (returned in layout order)."""
    layout.check(state)
    keep_idx = sorted(set(layout.indices(keep)))
    drop_idx = [i for i in range(len(layout.dims)) if i not in keep_idx]
    dims = layout.dims
    dk = int(np.prod([dims[i] for i in keep_idx], dtype=np.int64))
    dd = int(np.prod([dims[i] for i in drop_idx], dtype=np.int64))
    arr = np.asarray(state)
    if arr.ndim == 1:
        t = arr.reshape(dims)
        return t.sum(axis=tuple(drop_idx)).reshape(dk) if drop_idx else t.reshape(dk).copy()
    m = len(dims)
    t = arr.reshape(dims + dims)
    order = keep_idx + drop_idx + [m + i for i in keep_idx] + [m + i for i in drop_idx]
    t = t.transpose(order).reshape(dk, dd, dk, dd)
    return np.einsum("ajbj->ab", t)


def permute_subsystems(state, layout: SubsystemLayout, order: Sequence[str]):
    """Reorder tensor factors; returns the permuted state and its layout."""
    layout.check(state)
    perm = layout.indices(order)
    if sorted(perm) != list(range(len(layout.dims))):
        raise StateError("order must name every factor exactly once")
    new_layout = SubsystemLayout(tuple(layout.dims[i] for i in perm), tuple(order))
    arr = np.asarray(state)
    m = len(layout.dims)
    if arr.ndim == 1:
        return arr.reshape(layout.dims).transpose(perm).reshape(-1), new_layout
    t = arr.reshape(layout.dims + layout.dims).transpose(perm + [m + i for i in perm])
    return t.reshape(layout.total, layout.total), new_layout


def apply_local(rho, layout: SubsystemLayout, op, targets: Sequence[str]) -> np.ndarray:
    """Compute ``O rho O^dagger`` with ``O`` acting on the ``targets`` factors.

    ``op`` is a square matrix on the ordered product of the target factors.
    The full operator is never formed.
    """
    layout.check(rho)
    idx = layout.indices(targets)
    dims = layout.dims
    m = len(dims)
    dt = int(np.prod([dims[i] for i in idx], dtype=np.int64))
    op = np.asarray(op)
    if op.shape != (dt, dt):
        raise StateError(f"operator shape {op.shape} does not match target dimension {dt}")
    rest = [i for i in range(m) if i not in idx]
    perm = idx + rest
    inv = np.argsort(perm)
    t = np.asarray(rho).reshape(dims + dims)
    t = t.transpose(perm + [m + i for i in perm])
    dr = layout.total // dt
    t = t.reshape(dt, dr, dt, dr)
    t = np.tensordot(op, t, axes=([1], [0]))
    t = np.tensordot(t, op.conj(), axes=([2], [1])).transpose(0, 1, 3, 2)
    t = t.reshape([dims[i] for i in perm] * 2)
    t = t.transpose(list(inv) + [m + i for i in inv])
    return t.reshape(layout.total, layout.total)


def embed_operator(op, layout: SubsystemLayout, targets: Sequence[str]) -> np.ndarray:
    """Dense matrix of ``op`` acting on ``targets`` and identity elsewhere."""
    idx = layout.indices(targets)
    dims = layout.dims
    m = len(dims)
    dt = int(np.prod([dims[i] for i in idx], dtype=np.int64))
    rest = [i for i in range(m) if i not in idx]
    dr = layout.total // dt
    full = np.kron(np.asarray(op), np.eye(dr))
    perm = idx + rest
    inv = list(np.argsort(perm))
    t = full.reshape([dims[i] for i in perm] * 2)
    t = t.transpose(inv + [m + i for i in inv])
    return t.reshape(layout.total, layout.total)


def mutual_information(joint, layout: SubsystemLayout, partition) -> float:
    """``H(A) + H(B) - H(AB)`` for a bipartition of all factors of ``layout``."""
    part_a, part_b = (tuple(partition[0]), tuple(partition[1]))
    ia, ib = set(layout.indices(part_a)), set(layout.indices(part_b))
    if ia & ib or (ia | ib) != set(range(len(layout.dims))) or not ia or not ib:
        raise StateError("partition must split the layout into two non-empty complementary parts")
    h_a = entropy(partial_trace(joint, layout, part_a))
    h_b = entropy(partial_trace(joint, layout, part_b))
    return h_a + h_b - entropy(joint)


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------


def _is_unitary(u, tol=UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol


def clock_unitaries(basis) -> list[np.ndarray]:
    """``Z^k`` for ``k = 0..d-1`` written in ``basis`` (columns)."""
    basis = np.asarray(basis, dtype=complex)
    d = basis.shape[0]
    phases = np.exp(2j * np.pi * np.arange(d) / d)
    return [basis @ np.diag(phases**k) @ basis.conj().T for k in range(d)]


@dataclass(frozen=True)
class Channel:
    """Dephasing in an orthonormal basis, or a mixed-unitary channel."""

    kind: str
    basis: np.ndarray | None = None
    components: tuple[tuple[float, np.ndarray], ...] = ()

    def __post_init__(self):
        if self.kind == "dephasing":
            basis = np.asarray(self.basis, dtype=complex)
            if not _is_unitary(basis):
                raise ChannelError("dephasing basis is not orthonormal")
            object.__setattr__(self, "basis", basis)
        elif self.kind == "mixed-unitary":
            comps = tuple((float(p), np.asarray(u, dtype=complex)) for p, u in self.components)
            if not comps:
                raise ChannelError("mixed-unitary channel needs at least one component")
            probs = np.array([p for p, _ in comps])
            if np.any(probs < -NEG_TOL) or abs(probs.sum() - 1.0) > SUM_TOL:
                raise ChannelError("mixed-unitary weights must be a probability vector")
            dims = {u.shape for _, u in comps}
            if len(dims) != 1:
                raise ChannelError("component unitaries have different shapes")
            for _, u in comps:
                if not _is_unitary(u):
                    raise ChannelError("component is not unitary within 1e-9")
            object.__setattr__(self, "components", comps)
        else:
            raise ChannelError(f"unknown channel kind {self.kind!r}")

    @classmethod
    def dephasing(cls, basis=None, d: int | None = None) -> "Channel":
        if basis is None:
            basis = np.eye(d)
        return cls("dephasing", basis=basis)

    @classmethod
    def mixed_unitary(cls, components) -> "Channel":
        return cls("mixed-unitary", components=tuple(components))

    @property
    def dim(self) -> int:
        if self.kind == "dephasing":
            return self.basis.shape[0]
        return self.components[0][1].shape[0]

    def as_mixed_unitary(self) -> "Channel":
        """Dephasing rewritten as a uniform mixture of clock unitaries."""
        if self.kind == "mixed-unitary":
            return self
        us = clock_unitaries(self.basis)
        return Channel.mixed_unitary([(1.0 / len(us), u) for u in us])

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if self.kind == "dephasing":
            return apply_dephasing(rho, self.basis)
        return sum(p * u @ rho @ u.conj().T for p, u in self.components)


def apply_dephasing(rho, basis=None) -> np.ndarray:
    """Remove coherences of ``rho`` in ``basis`` (columns; default computational)."""
    rho = np.asarray(rho)
    if rho.ndim == 1:
        return rho.copy()
    if basis is None:
        return np.diag(np.diag(rho))
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != rho.shape or not _is_unitary(basis):
        raise ChannelError("dephasing basis must be an orthonormal basis of matching dimension")
    pops = np.einsum("ia,ij,ja->a", basis.conj(), rho, basis)
    return (basis * pops) @ basis.conj().T


# --------------------------------------------------------------------------
# random states (tests, Monte Carlo)
# --------------------------------------------------------------------------


def random_unitary(d: int, rng=None) -> np.ndarray:
    rng = np.random.default_rng(rng)
    if d == 1:
        return np.ones((1, 1), dtype=complex)
    return unitary_group.rvs(d, random_state=rng)


def random_probability_vector(d: int, rng=None, alpha: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(rng)
    return rng.dirichlet(np.full(d, alpha))


def random_density_matrix(d: int, rng=None, rank: int | None = None) -> np.ndarray:
    """Hilbert-Schmidt random state of the given rank."""
    rng = np.random.default_rng(rng)
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real
