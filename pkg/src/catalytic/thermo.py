"""Gibbs states, passivity and work extraction with and without a catalyst."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq

from .errors import StateError
from .statekit import (
    HERM_TOL,
    as_density_matrix,
    eigh_desc,
    random_density_matrix,
    random_unitary,
    shannon_entropy,
    von_neumann_entropy,
)

BETA_MAX = 1e6
DEGENERACY_TOL = 1e-9
ENTROPY_TOL = 1e-9


@dataclass(frozen=True)
class Hamiltonian:
    """Hermitian energy operator with a cached eigendecomposition (energies ascending)."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateError(f"Hamiltonian must be square, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > HERM_TOL:
            raise StateError("Hamiltonian is not Hermitian")
        object.__setattr__(self, "matrix", 0.5 * (m + m.conj().T))

    @classmethod
    def diagonal(cls, energies) -> "Hamiltonian":
        return cls(np.diag(np.asarray(energies, dtype=float)))

    @cached_property
    def _eig(self):
        vals, vecs = np.linalg.eigh(self.matrix)
        return vals, vecs

    @property
    def energies(self) -> np.ndarray:
        return self._eig[0]

    @property
    def basis(self) -> np.ndarray:
        return self._eig[1]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def ground_degeneracy(self) -> int:
        e = self.energies
        return int(np.count_nonzero(e - e[0] <= DEGENERACY_TOL))


def _as_hamiltonian(h) -> Hamiltonian:
    return h if isinstance(h, Hamiltonian) else Hamiltonian(h)


@dataclass(frozen=True)
class GibbsState:
    beta: float
    state: np.ndarray = field(repr=False)
    populations: np.ndarray = field(repr=False)


def _gibbs_populations(energies: np.ndarray, beta: float) -> np.ndarray:
    if math.isinf(beta):
        ground = energies - energies[0] <= DEGENERACY_TOL
        return ground / ground.sum()
    w = np.exp(-beta * (energies - energies[0]))
    return w / w.sum()


def gibbs_state(h, beta: float) -> GibbsState:
    """``exp(-beta H) / Z``; ``beta = inf`` gives the normalized ground projector."""
    h = _as_hamiltonian(h)
    if not beta >= 0:
        raise ValueError("inverse temperature must be non-negative")
    pops = _gibbs_populations(h.energies, beta)
    state = (h.basis * pops) @ h.basis.conj().T
    return GibbsState(float(beta), state, pops)


def energy(rho, h) -> float:
    h = _as_hamiltonian(h)
    return float(np.real(np.trace(np.asarray(rho) @ h.matrix)))


def solve_beta(rho, h) -> float:
    """Inverse temperature whose Gibbs state has the entropy of ``rho``.

    Returns ``inf`` when the entropy equals that of the ground space.
    """
    h = _as_hamiltonian(h)
    rho = as_density_matrix(rho)
    if rho.shape[0] != h.dim:
        raise StateError("state and Hamiltonian dimensions differ")
    target = von_neumann_entropy(rho)
    d = h.dim
    if target > math.log(d) + ENTROPY_TOL:
        raise StateError(f"entropy {target} exceeds ln d = {math.log(d)}")
    if target >= math.log(d) - 1e-12:
        return 0.0
    floor = math.log(h.ground_degeneracy)
    if target <= floor + 1e-12:
        if target < floor - ENTROPY_TOL:
            raise StateError(
                f"entropy {target} is below ln(ground degeneracy) = {floor}; no Gibbs state matches"
            )
        return math.inf

    def gap(beta):
        return shannon_entropy(_gibbs_populations(h.energies, beta)) - target

    hi = 1.0
    while gap(hi) > 0:
        hi *= 2.0
        if hi > BETA_MAX:
            warnings.warn("inverse temperature exceeds 1e6; treating it as infinite", RuntimeWarning)
            return math.inf
    lo = 0.0 if hi == 1.0 else hi / 2.0
    return float(brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500))


def passive_energy(rho, h) -> float:
    """Lowest energy reachable from ``rho`` by a unitary."""
    h = _as_hamiltonian(h)
    pops = eigh_desc(rho)[0]
    return float(np.dot(pops, h.energies))


def ergotropy(rho, h) -> float:
    return energy(rho, h) - passive_energy(rho, h)


def is_passive(rho, h, tol: float = 1e-9) -> bool:
    """True iff no unitary lowers the energy of ``rho`` by more than ``tol``."""
    h = _as_hamiltonian(h)
    rho = as_density_matrix(rho)
    if rho.shape[0] != h.dim:
        raise StateError("state and Hamiltonian dimensions differ")
    return ergotropy(rho, h) <= tol


def asymptotic_work(rho, h) -> float:
    """``Tr[rho H] - Tr[omega H]`` with ``omega`` the entropy-matched Gibbs state."""
    h = _as_hamiltonian(h)
    beta = solve_beta(rho, h)
    return energy(rho, h) - float(np.dot(_gibbs_populations(h.energies, beta), h.energies))


def is_completely_passive(rho, h, tol: float = 1e-9) -> bool:
    return asymptotic_work(rho, h) <= tol


def _min_mixing(spectrum: np.ndarray, target: float) -> float:
    """Smallest ``lam`` with ``H((1-lam) sigma + lam I/d) >= target``.

    Mixing with ``I/d`` keeps the eigenvectors, and the entropy is monotone
    along the segment, so bisection on the spectrum suffices.
    """
    d = spectrum.size

    def ent(lam):
        return shannon_entropy((1 - lam) * spectrum + lam / d)

    if ent(0.0) >= target:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ent(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def falsify_catalytic_work(rho, h, samples: int = 1000, seed: int = 0) -> dict:
    """Sample states with entropy at least that of ``rho`` and compare energies.

    Returns the largest amount by which a sampled state would extract more
    work than the closed form (should never exceed rounding noise).
    """
    h = _as_hamiltonian(h)
    rho = as_density_matrix(rho)
    d = h.dim
    rng = np.random.default_rng(seed)
    target = von_neumann_entropy(rho)
    w_bar = asymptotic_work(rho, h)
    e_rho = energy(rho, h)
    flat = np.eye(d) / d
    optimizer = gibbs_state(h, solve_beta(rho, h)).state
    worst = -math.inf
    min_entropy_gap = math.inf
    for i in range(samples):
        if i % 2 == 0:
            sigma = random_density_matrix(d, rng, rank=int(rng.integers(1, d + 1)))
        else:
            # perturb the optimizer to probe its neighbourhood
            u = random_unitary(d, rng)
            mix = rng.uniform(0, 0.2)
            sigma = (1 - mix) * optimizer + mix * u @ optimizer @ u.conj().T
        lam_min = _min_mixing(np.linalg.eigvalsh(sigma).clip(0.0), target)
        lam = lam_min + (1.0 - lam_min) * rng.uniform() ** 3
        candidate = (1 - lam) * sigma + lam * flat
        min_entropy_gap = min(min_entropy_gap, von_neumann_entropy(candidate) - target)
        worst = max(worst, e_rho - energy(candidate, h) - w_bar)
    return {
        "samples": samples,
        "seed": seed,
        "max_violation": worst,
        "min_entropy_margin": min_entropy_gap,
        "asymptotic_work": w_bar,
    }


def catalytic_work(rho, h, samples: int = 1000, seed: int = 0, tol: float = 1e-7) -> float:
    """Work extractable by one catalytic transition, equal to :func:`asymptotic_work`.

    Runs a sampling check over entropy-feasible final states and raises if
    any sample beats the closed form by more than ``tol``.
    """
    value = asymptotic_work(rho, h)
    if samples > 0:
        check = falsify_catalytic_work(rho, h, samples=samples, seed=seed)
        if check["max_violation"] > tol:
            raise RuntimeError(f"sampled state beats the closed form by {check['max_violation']:.3e}")
    return value


def work_report(rho, h, samples: int = 1000, seed: int = 0) -> dict:
    h = _as_hamiltonian(h)
    rho = as_density_matrix(rho)
    beta = solve_beta(rho, h)
    check = falsify_catalytic_work(rho, h, samples=samples, seed=seed)
    w_bar = asymptotic_work(rho, h)
    return {
        "beta": beta,
        "energy": energy(rho, h),
        "entropy": von_neumann_entropy(rho),
        "asymptotic_work": w_bar,
        "catalytic_work": w_bar,
        "ergotropy": ergotropy(rho, h),
        "passive": is_passive(rho, h),
        "completely_passive": is_completely_passive(rho, h),
        "monte_carlo": check,
    }
