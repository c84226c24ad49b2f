"""Quantum catalytic transitions.

The joint space is ``S1 x S2..Sn x A x R`` with ``S1`` the system. The
catalyst is ``sigma1 (x) sigma2``: ``sigma1`` on ``S2..Sn x A`` makes the
n-copy unitary transition exact on average, and ``sigma2`` on ``R`` is the
randomness that dephases the output in the target eigenbasis.

The overall unitary is ``(V_dephase on S1 R) (W on S1..Sn A)`` where
``W = advance_A . shift_S . controlled_U``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import ChannelError, EntropyGapError, StateError
from .report import RESIDUAL_TOL, TransitionReport
from .statekit import (
    Channel,
    SubsystemLayout,
    apply_local,
    as_density_matrix,
    check_dimension,
    dimension_cap,
    eigh_desc,
    embed_operator,
    mutual_information,
    partial_trace,
    power,
    tensor,
    trace_distance,
    von_neumann_entropy,
)
from .typicality import (
    EQUAL_ENTROPY_TOL,
    MajorizedTarget,
    build_majorized_target,
    isospectral,
    perturb_equal_entropy,
    tensor_basis,
)


# --------------------------------------------------------------------------
# mixed-unitary dilation
# --------------------------------------------------------------------------


def dilate_mixed_unitary(channel: Channel) -> tuple[np.ndarray, np.ndarray]:
    """``V = sum_i V_i (x) |i><i|`` and ``sigma = sum_i p_i |i><i|``.

    ``Tr_R[V (rho (x) sigma) V^dagger]`` reproduces the channel, and the
    register ``R`` ends in ``sigma`` uncorrelated with any bystander system.
    Dephasing channels are first written as uniform clock-unitary mixtures.
    """
    if not isinstance(channel, Channel):
        raise ChannelError("dilation needs a Channel")
    mixed = channel.as_mixed_unitary()
    weights = np.array([p for p, _ in mixed.components])
    m = weights.size
    d = mixed.dim
    v = np.zeros((d * m, d * m), dtype=complex)
    for i, (_, u) in enumerate(mixed.components):
        proj = np.zeros((m, m))
        proj[i, i] = 1.0
        v += np.kron(u, proj)
    return v, np.diag(weights).astype(complex)


# --------------------------------------------------------------------------
# catalyst
# --------------------------------------------------------------------------


def _cyclic_shift(d: int, n: int) -> np.ndarray:
    """Unitary ``|s1..sn> -> |sn s1 .. s_{n-1}>``."""
    ds = d**n
    s = np.arange(ds)
    dest = (s % d) * (ds // d) + s // d
    m = np.zeros((ds, ds))
    m[dest, s] = 1.0
    return m


def _advance(n: int) -> np.ndarray:
    m = np.zeros((n, n))
    m[(np.arange(n) + 1) % n, np.arange(n)] = 1.0
    return m


@dataclass
class QuantumCatalyst:
    """Catalyst states, protocol unitaries and the data they were built from."""

    rho: np.ndarray
    rho_prime: np.ndarray
    rho_target: np.ndarray
    n: int
    d: int
    unitary: np.ndarray
    chi: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    v_dephase: np.ndarray
    epsilon_certified: float
    target: MajorizedTarget | None = None
    perturbation: float = 0.0

    @property
    def r_dim(self) -> int:
        return self.sigma2.shape[0]

    @property
    def layout(self) -> SubsystemLayout:
        labels = tuple(f"S{i + 1}" for i in range(self.n)) + ("A", "R")
        return SubsystemLayout((self.d,) * self.n + (self.n, self.r_dim), labels)

    @property
    def catalyst_labels(self) -> tuple[str, ...]:
        return self.layout.labels[1:]

    @property
    def sigma(self) -> np.ndarray:
        """Joint catalyst ``sigma1 (x) sigma2``."""
        return np.kron(self.sigma1, self.sigma2)

    def w_factors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(controlled_U, shift_S, advance_A)`` on ``S1..Sn x A``, applied in that order."""
        ds = self.d**self.n
        last = np.zeros((self.n, self.n))
        last[-1, -1] = 1.0
        controlled = np.kron(self.unitary, last) + np.kron(np.eye(ds), np.eye(self.n) - last)
        shift = np.kron(_cyclic_shift(self.d, self.n), np.eye(self.n))
        advance = np.kron(np.eye(ds), _advance(self.n))
        return controlled, shift, advance

    def w(self) -> np.ndarray:
        controlled, shift, advance = self.w_factors()
        return advance @ shift @ controlled

    def joint_unitary(self) -> np.ndarray:
        """Dense ``(V_dephase (x) 1) (W (x) 1_R)`` in the joint ordering."""
        layout = self.layout
        check_dimension(layout.total, "quantum", "joint unitary")
        w_full = embed_operator(self.w(), layout, layout.labels[:-1])
        v_full = embed_operator(self.v_dephase, layout, ("S1", "R"))
        return v_full @ w_full

    def sigma1_from_ingredients(self) -> np.ndarray:
        return catalyst_sigma1(self.rho, self.chi, self.d, self.n)


def _prefix_trace(chi: np.ndarray, d: int, n: int, i: int) -> np.ndarray:
    """Reduced state of an n-site operator on its first ``i`` sites."""
    a, b = d**i, d ** (n - i)
    return np.einsum("ajbj->ab", chi.reshape(a, b, a, b))


def catalyst_sigma1(rho: np.ndarray, chi: np.ndarray, d: int, n: int) -> np.ndarray:
    """``(1/n) sum_k rho^(k-1) (x) chi_{1..n-k} (x) |k><k|_A``."""
    blocks = []
    for k in range(1, n + 1):
        blocks.append(np.kron(power(rho, k - 1), _prefix_trace(chi, d, n, n - k)))
    dim = d ** (n - 1)
    out = np.zeros((dim * n, dim * n), dtype=complex)
    t = out.reshape(dim, n, dim, n)
    for k, blk in enumerate(blocks):
        t[:, k, :, k] = blk / n
    return out


def _trivial_catalyst(rho, rho_prime, unitary):
    d = rho.shape[0]
    one = np.ones((1, 1), dtype=complex)
    return QuantumCatalyst(
        rho=rho,
        rho_prime=rho_prime,
        rho_target=rho_prime,
        n=1,
        d=d,
        unitary=unitary,
        chi=unitary @ rho @ unitary.conj().T,
        sigma1=one,
        sigma2=one,
        v_dephase=np.eye(d, dtype=complex),
        epsilon_certified=0.0,
    )


def build_quantum_catalyst(
    rho, rho_prime, epsilon: float | None = None, n: int | None = None, mode: str = "auto"
) -> QuantumCatalyst:
    """Catalyst ``sigma1 (x) sigma2`` and unitaries taking ``rho`` close to ``rho_prime``.

    Catalysis is exact at every ``n``; the output is within
    ``epsilon_certified`` of ``rho_prime``. Isospectral targets are reached
    by a basis change with a trivial catalyst. Equal-entropy targets are
    mixed with the maximally mixed state at half the error budget.
    """
    rho = as_density_matrix(rho)
    rho_prime = as_density_matrix(rho_prime)
    if rho.shape != rho_prime.shape:
        raise StateError("source and target must have the same dimension")
    d = rho.shape[0]
    if isospectral(rho, rho_prime):
        _, basis = eigh_desc(rho)
        _, basis_p = eigh_desc(rho_prime)
        return _trivial_catalyst(rho, rho_prime, basis_p @ basis.conj().T)
    gap = von_neumann_entropy(rho_prime) - von_neumann_entropy(rho)
    if gap < -EQUAL_ENTROPY_TOL:
        raise EntropyGapError(f"target entropy is lower than source entropy by {-gap:.3e}")
    target_state, eta, budget = rho_prime, 0.0, epsilon
    if gap <= EQUAL_ENTROPY_TOL:
        if epsilon is None or not epsilon > 0:
            raise EntropyGapError("equal-entropy targets need a positive epsilon for the perturbation")
        target_state, eta = perturb_equal_entropy(rho_prime, epsilon)
        budget = epsilon / 2.0
    cap = dimension_cap("quantum")
    top = 1
    while d ** (top + 1) * (top + 1) * d <= cap:
        top += 1
    target = build_majorized_target(rho, target_state, epsilon=budget, n=n, mode=mode, max_n=top)
    m = target.n
    check_dimension(d**m * m * d, "quantum", "joint space S1..Sn x A x R")
    unitary = target.plan().dense
    chi = unitary @ power(rho, m) @ unitary.conj().T
    v_dephase, sigma2 = dilate_mixed_unitary(Channel.dephasing(target.target_basis))
    return QuantumCatalyst(
        rho=rho,
        rho_prime=rho_prime,
        rho_target=np.asarray(target_state, dtype=complex),
        n=m,
        d=d,
        unitary=unitary,
        chi=chi,
        sigma1=catalyst_sigma1(rho, chi, d, m),
        sigma2=sigma2,
        v_dephase=v_dephase,
        epsilon_certified=min(1.0, target.epsilon_certified + trace_distance(target_state, rho_prime)),
        target=target,
        perturbation=eta,
    )


# --------------------------------------------------------------------------
# protocol and verification
# --------------------------------------------------------------------------


def apply_quantum_protocol(
    rho, cat: QuantumCatalyst, epsilon_claim: float = 0.0
) -> tuple[np.ndarray, TransitionReport]:
    """Apply ``W`` then ``V_dephase`` to ``rho (x) sigma1 (x) sigma2`` and verify."""
    t0 = time.perf_counter()
    rho = as_density_matrix(rho)
    layout = cat.layout
    check_dimension(layout.total, "quantum", "joint state")
    system, rest = ("S1",), cat.catalyst_labels
    stage_a_labels = layout.labels[:-1]
    joint_in = tensor(rho, cat.sigma1, cat.sigma2)
    after_w = apply_local(joint_in, layout, cat.w(), stage_a_labels)
    joint_out = apply_local(after_w, layout, cat.v_dephase, ("S1", "R"))
    t1 = time.perf_counter()

    checks = {}
    s1_labels = layout.labels[1:-1]
    sigma1_after = partial_trace(after_w, layout, s1_labels)
    checks["stage_a_sigma1_residual"] = trace_distance(sigma1_after, cat.sigma1)
    chi_bar = np.mean(
        [_site_marginal(cat.chi, cat.d, cat.n, k) for k in range(cat.n)], axis=0
    )
    checks["stage_a_output_residual"] = float(np.max(np.abs(partial_trace(after_w, layout, system) - chi_bar)))
    r_out = partial_trace(joint_out, layout, ("R",))
    checks["stage_b_r_residual"] = trace_distance(r_out, cat.sigma2)
    checks["stage_a_exact"] = bool(checks["stage_a_sigma1_residual"] <= RESIDUAL_TOL)
    checks["stage_b_exact"] = bool(checks["stage_b_r_residual"] <= RESIDUAL_TOL)

    report = _report(joint_in, joint_out, layout, system, rest, cat.rho_prime, epsilon_claim, cat.epsilon_certified)
    report.checks.update(checks)
    report.timings.update({"protocol": t1 - t0, "verify": time.perf_counter() - t1})
    return joint_out, report


def _site_marginal(chi: np.ndarray, d: int, n: int, k: int) -> np.ndarray:
    layout = SubsystemLayout((d,) * n)
    return partial_trace(chi, layout, [layout.labels[k]])


def _report(joint_in, joint_out, layout, system, catalyst, target, epsilon_claim, epsilon_certified):
    s_in = partial_trace(joint_in, layout, system)
    s_out = partial_trace(joint_out, layout, system)
    c_in = partial_trace(joint_in, layout, catalyst)
    c_out = partial_trace(joint_out, layout, catalyst)
    n_sys = sum(1 for lab in layout.labels if lab.startswith("S"))
    dims = {
        "system": layout.dim_of(system),
        "catalyst_total": layout.dim_of(catalyst),
        "n": n_sys,
        "A": layout.dims[layout.index("A")] if "A" in layout.labels else 1,
        "R": layout.dims[layout.index("R")] if "R" in layout.labels else 1,
    }
    return TransitionReport(
        kind="quantum",
        catalyst_invariance_residual=trace_distance(c_in, c_out),
        output_distance=trace_distance(s_out, np.asarray(target, dtype=complex)),
        epsilon_certified=float(epsilon_certified),
        epsilon_claim=float(epsilon_claim),
        entropy_in=von_neumann_entropy(s_in),
        entropy_out=von_neumann_entropy(s_out),
        mutual_information=mutual_information(joint_out, layout, (system, catalyst)),
        dims=dims,
    )


@dataclass
class ExplicitCatalyst:
    """A catalyst state with a joint unitary on ``system (x) catalyst``."""

    sigma: np.ndarray
    unitary: np.ndarray
    epsilon_certified: float = 0.0


def verify_transition(rho, rho_prime, cat, epsilon_claim: float = 0.0) -> TransitionReport:
    """Check ``Tr_S[U (rho (x) sigma) U^dagger] = sigma`` and the output distance.

    ``cat`` is a :class:`QuantumCatalyst` (its two catalyst parts count as one
    catalyst and ``W`` followed by ``V_dephase`` as one unitary) or an
    :class:`ExplicitCatalyst`. The joint spectrum must be preserved.
    """
    rho = as_density_matrix(rho)
    rho_prime = as_density_matrix(rho_prime)
    if isinstance(cat, QuantumCatalyst):
        layout = cat.layout
        joint_in = tensor(rho, cat.sigma1, cat.sigma2)
        mid = apply_local(joint_in, layout, cat.w(), layout.labels[:-1])
        joint_out = apply_local(mid, layout, cat.v_dephase, ("S1", "R"))
        catalyst = cat.catalyst_labels
        certified = cat.epsilon_certified
        unitarity = max(_unitarity(cat.w()), _unitarity(cat.v_dephase))
    else:
        sigma = np.asarray(cat.sigma, dtype=complex)
        u = np.asarray(cat.unitary, dtype=complex)
        layout = SubsystemLayout((rho.shape[0], sigma.shape[0]), ("S1", "C"))
        if u.shape != (layout.total, layout.total):
            raise StateError(f"unitary shape {u.shape} does not match joint dimension {layout.total}")
        joint_in = np.kron(rho, sigma)
        joint_out = u @ joint_in @ u.conj().T
        catalyst = ("C",)
        certified = cat.epsilon_certified
        unitarity = _unitarity(u)
    report = _report(joint_in, joint_out, layout, ("S1",), catalyst, rho_prime, epsilon_claim, certified)
    spec_in = np.linalg.eigvalsh(joint_in)
    spec_out = np.linalg.eigvalsh(0.5 * (joint_out + joint_out.conj().T))
    report.checks["unitarity_residual"] = unitarity
    report.checks["unitary"] = bool(unitarity <= 1e-9)
    report.checks["spectrum_preserved"] = bool(np.max(np.abs(spec_in - spec_out)) <= 1e-9)
    return report


def _unitarity(u) -> float:
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def dephased_marginal_residual(cat: QuantumCatalyst) -> float:
    """Max over sites of ``|D[chi_k] - Tr_{not k} D^(x)n[chi]|``."""
    if cat.target is None:
        return 0.0
    basis = cat.target.target_basis
    layout = SubsystemLayout((cat.d,) * cat.n)
    basis_n = tensor_basis(basis, cat.n)
    pops = np.einsum("ia,ij,ja->a", basis_n.conj(), cat.chi, basis_n).real
    dephased = (basis_n * pops) @ basis_n.conj().T
    worst = 0.0
    dephase = Channel.dephasing(basis)
    for k in range(cat.n):
        lab = [layout.labels[k]]
        a = dephase(partial_trace(cat.chi, layout, lab))
        b = partial_trace(dephased, layout, lab)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst
