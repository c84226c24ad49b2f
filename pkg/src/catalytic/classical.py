"""Classical catalytic transitions realized by a permutation of the joint sample space.

The joint space is ``S1 x S2..Sn x A x R`` flattened with ``S1`` slowest and
``R`` fastest. The catalyst lives on ``S2..Sn x A x R``: register ``A`` counts
which of the ``n`` copies is being processed and ``R`` selects a component
of the permutation mixture.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DimensionCapExceeded, EntropyGapError, StateError
from .majorization import PermutationMixture, apply_permutation, permutation_mixture
from .report import TransitionReport
from .statekit import (
    SubsystemLayout,
    as_probability_vector,
    check_dimension,
    dimension_cap,
    mutual_information,
    partial_trace,
    shannon_entropy,
    trace_distance,
)
from .typicality import (
    EQUAL_ENTROPY_TOL,
    MajorizedTarget,
    build_majorized_target,
    isospectral,
    n_copy,
    perturb_equal_entropy,
)

PERMUTATION_TOL = 1e-12


def joint_layout(d: int, n: int, r: int) -> SubsystemLayout:
    labels = tuple(f"S{i + 1}" for i in range(n)) + ("A", "R")
    return SubsystemLayout((d,) * n + (n, r), labels)


@dataclass
class GlobalPermutation:
    """Composite protocol permutation, stored per step and composed.

    ``controlled`` applies the mixture component selected by ``R`` to the
    system tuple when ``A`` holds its last value, ``shift`` moves
    ``S_i -> S_{i+1}`` and ``S_n -> S_1``, ``advance`` increments ``A``
    cyclically. All three are destination maps on joint indices.
    """

    controlled: np.ndarray
    shift: np.ndarray
    advance: np.ndarray

    @property
    def composed(self) -> np.ndarray:
        return self.advance[self.shift[self.controlled]]

    @property
    def factors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.controlled, self.shift, self.advance

    def apply(self, joint) -> np.ndarray:
        return apply_permutation(joint, self.composed)

    def is_bijection(self) -> bool:
        c = self.composed
        seen = np.zeros(c.size, dtype=bool)
        seen[c] = True
        return bool(seen.all())


@dataclass
class ClassicalCatalyst:
    """Catalyst ``q`` on ``S2..Sn x A x R`` and the data it was built from."""

    q: np.ndarray
    layout: SubsystemLayout
    mixture: PermutationMixture
    n: int
    d: int
    p: np.ndarray
    p_prime: np.ndarray
    p_target: np.ndarray
    epsilon_certified: float
    target: MajorizedTarget | None = None
    perturbation: float = 0.0

    @property
    def joint_layout(self) -> SubsystemLayout:
        return joint_layout(self.d, self.n, len(self.mixture))

    @property
    def trivial(self) -> bool:
        return self.q.size == 1

    def block(self, k: int, alpha: int) -> np.ndarray:
        """Unnormalized slice of ``q`` at ``A = k`` (0-based) and ``R = alpha``."""
        t = self.q.reshape(self.d ** (self.n - 1), self.n, len(self.mixture))
        return t[:, k, alpha]


def _prefix_marginal(x: np.ndarray, d: int, n: int, i: int) -> np.ndarray:
    """Marginal of an n-site vector on its first ``i`` sites."""
    return x.reshape(d**i, d ** (n - i)).sum(axis=1)


def catalyst_vector(p: np.ndarray, mixture: PermutationMixture, n: int) -> np.ndarray:
    """``(1/n) sum_k sum_a q_a p^(k-1) (x) x^a_{1..n-k} (x) |k> (x) |a>``."""
    d = p.size
    k_terms = len(mixture)
    base = n_copy(p, n)
    q = np.zeros((d ** (n - 1), n, k_terms))
    for alpha, (weight, perm) in enumerate(zip(mixture.weights, mixture.perms)):
        x_alpha = apply_permutation(base, perm)
        for k in range(1, n + 1):
            head = n_copy(p, k - 1)
            tail = _prefix_marginal(x_alpha, d, n, n - k)
            q[:, k - 1, alpha] = weight * np.kron(head, tail) / n
    return q.ravel()


def protocol_permutation(d: int, n: int, mixture: PermutationMixture) -> GlobalPermutation:
    k_terms = len(mixture)
    ds = d**n
    total = ds * n * k_terms
    idx = np.arange(total, dtype=np.int64)
    r = idx % k_terms
    a = (idx // k_terms) % n
    s = idx // (k_terms * n)

    def flat(s_, a_, r_):
        return (s_ * n + a_) * k_terms + r_

    s_ctrl = np.where(a == n - 1, mixture.perms[r, s], s)
    controlled = flat(s_ctrl, a, r)
    # (s1, ..., sn) -> (sn, s1, ..., s_{n-1})
    s_shift = (s % d) * (ds // d) + s // d
    shift = flat(s_shift, a, r)
    advance = flat(s, (a + 1) % n, r)
    return GlobalPermutation(controlled, shift, advance)


def _relabel_mixture(p: np.ndarray, p_prime: np.ndarray) -> PermutationMixture:
    src = np.argsort(-p, kind="stable")
    dst = np.argsort(-p_prime, kind="stable")
    perm = np.empty(p.size, dtype=np.int64)
    perm[src] = dst
    return PermutationMixture(np.ones(1), perm[None, :])


def build_classical_catalyst(
    p, p_prime, epsilon: float | None = None, n: int | None = None, mode: str = "auto"
) -> tuple[ClassicalCatalyst, GlobalPermutation]:
    """Catalyst ``q`` and permutation turning ``p`` into (approximately) ``p_prime``.

    The catalyst marginal is returned exactly at any ``n``; the system
    output lies within ``epsilon_certified`` of ``p_prime``. Targets with the
    same entropy as ``p`` are first mixed with the uniform distribution at
    half the error budget. A target that is a relabeling of ``p`` needs no
    catalyst and is handled by a single permutation.
    """
    p = as_probability_vector(p)
    p_prime = as_probability_vector(p_prime)
    if p.shape != p_prime.shape:
        raise StateError("source and target must have the same dimension")
    d = p.size
    if isospectral(p, p_prime):
        mixture = _relabel_mixture(p, p_prime)
        cat = ClassicalCatalyst(
            q=np.ones(1),
            layout=SubsystemLayout((1, 1), ("A", "R")),
            mixture=mixture,
            n=1,
            d=d,
            p=p,
            p_prime=p_prime,
            p_target=p_prime,
            epsilon_certified=0.0,
        )
        return cat, protocol_permutation(d, 1, mixture)
    gap = shannon_entropy(p_prime) - shannon_entropy(p)
    if gap < -EQUAL_ENTROPY_TOL:
        raise EntropyGapError(f"target entropy is lower than source entropy by {-gap:.3e}")
    target_state, eta, budget = p_prime, 0.0, epsilon
    if gap <= EQUAL_ENTROPY_TOL:
        if epsilon is None or not epsilon > 0:
            raise EntropyGapError("equal-entropy targets need a positive epsilon for the perturbation")
        target_state, eta = perturb_equal_entropy(p_prime, epsilon)
        budget = epsilon / 2.0
    target = build_majorized_target(p, target_state, epsilon=budget, n=n, mode=mode)
    m = target.n
    total_s = d**m
    check_dimension(total_s, "classical", "n-copy system")
    mixture = permutation_mixture(n_copy(p, m), target.target)
    joint = total_s * m * len(mixture)
    cap = dimension_cap("classical")
    if joint > cap:
        raise DimensionCapExceeded(
            f"joint space S1..Sn x A x R has dimension {joint}, above the classical cap {cap}",
            dimension=joint,
            cap=cap,
            max_n=m - 1,
        )
    q = catalyst_vector(p, mixture, m)
    layout = SubsystemLayout(
        (d,) * (m - 1) + (m, len(mixture)), tuple(f"S{i + 2}" for i in range(m - 1)) + ("A", "R")
    )
    certified = min(1.0, target.epsilon_certified + trace_distance(target_state, p_prime))
    cat = ClassicalCatalyst(
        q=q,
        layout=layout,
        mixture=mixture,
        n=m,
        d=d,
        p=p,
        p_prime=p_prime,
        p_target=np.asarray(target_state, dtype=float),
        epsilon_certified=certified,
        target=target,
        perturbation=eta,
    )
    return cat, protocol_permutation(d, m, mixture)


def expected_output(cat: ClassicalCatalyst) -> np.ndarray:
    """Uniform mixture of the single-site marginals of the n-copy target."""
    if cat.target is None:
        return cat.p_prime.copy()
    return cat.target.single_site_marginals().mean(axis=0)


def apply_protocol(
    p, cat: ClassicalCatalyst, perm: GlobalPermutation, epsilon_claim: float = 0.0
) -> tuple[np.ndarray, TransitionReport]:
    """Run the protocol on ``p (x) q`` and verify the outcome."""
    t0 = time.perf_counter()
    p = as_probability_vector(p)
    layout = cat.joint_layout
    joint_in = np.kron(p, cat.q)
    if joint_in.size != layout.total or perm.composed.size != layout.total:
        raise StateError("catalyst, permutation and system sizes are inconsistent")
    joint_out = perm.apply(joint_in)
    t1 = time.perf_counter()
    report = verify_catalytic(
        joint_in,
        joint_out,
        layout,
        cat.p_prime,
        epsilon_claim,
        epsilon_certified=cat.epsilon_certified,
    )
    out_s = partial_trace(joint_out, layout, ["S1"])
    report.checks["output_matches_expected"] = bool(np.max(np.abs(out_s - expected_output(cat))) <= 1e-12)
    report.timings.update({"protocol": t1 - t0, "verify": time.perf_counter() - t1})
    return joint_out, report


def verify_catalytic(
    joint_in,
    joint_out,
    layout: SubsystemLayout,
    target,
    epsilon_claim: float = 0.0,
    *,
    epsilon_certified: float = 0.0,
    system: tuple[str, ...] = ("S1",),
) -> TransitionReport:
    """Check a classical catalytic transition from its joint input and output.

    The operation must be a permutation (equal entry multisets within 1e-12),
    the catalyst marginal must be unchanged and the system marginal must be
    within ``max(epsilon_certified, epsilon_claim)`` of ``target``.
    """
    joint_in = np.asarray(joint_in, dtype=float)
    joint_out = np.asarray(joint_out, dtype=float)
    layout.check(joint_in)
    layout.check(joint_out)
    catalyst = layout.complement(system)
    is_perm = bool(np.max(np.abs(np.sort(joint_in) - np.sort(joint_out))) <= PERMUTATION_TOL)
    s_in = partial_trace(joint_in, layout, system)
    s_out = partial_trace(joint_out, layout, system)
    if catalyst:
        c_in = partial_trace(joint_in, layout, catalyst)
        c_out = partial_trace(joint_out, layout, catalyst)
        residual = trace_distance(c_in, c_out)
        mi = mutual_information(joint_out, layout, (system, catalyst))
        c_dim = layout.dim_of(catalyst)
    else:
        residual, mi, c_dim = 0.0, 0.0, 1
    dims = {"system": s_in.size, "catalyst_total": c_dim}
    n_sys = sum(1 for lab in layout.labels if lab.startswith("S"))
    dims["n"] = n_sys
    dims["A"] = layout.dims[layout.index("A")] if "A" in layout.labels else 1
    dims["R"] = layout.dims[layout.index("R")] if "R" in layout.labels else 1
    return TransitionReport(
        kind="classical",
        catalyst_invariance_residual=residual,
        output_distance=trace_distance(s_out, as_probability_vector(target)),
        epsilon_certified=float(epsilon_certified),
        epsilon_claim=float(epsilon_claim),
        entropy_in=shannon_entropy(s_in),
        entropy_out=shannon_entropy(s_out),
        mutual_information=mi,
        dims=dims,
        checks={"is_permutation": is_perm},
    )
