import itertools
import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import brentq

from catalytic.errors import StateError
from catalytic.statekit import random_density_matrix, random_unitary, von_neumann_entropy
from catalytic.thermo import (
    Hamiltonian,
    asymptotic_work,
    catalytic_work,
    energy,
    ergotropy,
    falsify_catalytic_work,
    gibbs_state,
    is_completely_passive,
    is_passive,
    passive_energy,
    solve_beta,
    work_report,
)

QUBIT_H = Hamiltonian.diagonal([0.0, 1.0])
QUTRIT_H = Hamiltonian.diagonal([0.0, 1.0, 2.0])
# Tr[rho H] - Tr[omega H] for rho = diag(.5, .5, 0), H = diag(0, 1, 2), omega at entropy ln 2
W_BAR_QUTRIT = 0.19575288423434606


def random_hamiltonian(d, rng):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return Hamiltonian(0.5 * (m + m.conj().T))


class TestGibbs:
    def test_infinite_temperature(self):
        np.testing.assert_allclose(gibbs_state(QUTRIT_H, 0.0).state, np.eye(3) / 3, atol=1e-15)

    def test_zero_temperature(self):
        np.testing.assert_allclose(gibbs_state(QUTRIT_H, math.inf).state, np.diag([1.0, 0, 0]), atol=1e-15)

    def test_ln3_qubit(self):
        np.testing.assert_allclose(gibbs_state(QUBIT_H, math.log(3)).populations, [0.75, 0.25], atol=1e-15)

    def test_matches_matrix_exponential(self):
        rng = np.random.default_rng(0)
        h = random_hamiltonian(4, rng)
        g = expm(-0.7 * h.matrix)
        np.testing.assert_allclose(gibbs_state(h, 0.7).state, g / np.trace(g), atol=1e-10)

    def test_entropy_and_energy_monotone_in_beta(self):
        betas = np.linspace(0, 10, 60)
        ents = [von_neumann_entropy(gibbs_state(QUTRIT_H, b).state) for b in betas]
        ens = [energy(gibbs_state(QUTRIT_H, b).state, QUTRIT_H) for b in betas]
        assert all(a > b for a, b in zip(ents, ents[1:]))
        assert all(a > b for a, b in zip(ens, ens[1:]))

    def test_negative_beta(self):
        with pytest.raises(ValueError):
            gibbs_state(QUBIT_H, -1.0)

    def test_non_hermitian_hamiltonian(self):
        with pytest.raises(StateError):
            Hamiltonian(np.array([[0, 1], [0, 0]]))


class TestSolveBeta:
    def test_maximally_mixed(self):
        assert solve_beta(np.eye(3) / 3, QUTRIT_H) == 0.0

    def test_pure_state(self):
        assert solve_beta(np.diag([0.0, 1.0, 0.0]), QUTRIT_H) == math.inf

    def test_inverts_ln3(self):
        assert solve_beta(np.diag([0.25, 0.75]), QUBIT_H) == pytest.approx(math.log(3), abs=1e-8)

    def test_entropy_matched(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            h = random_hamiltonian(3, rng)
            rho = random_density_matrix(3, rng)
            beta = solve_beta(rho, h)
            assert abs(von_neumann_entropy(gibbs_state(h, beta).state) - von_neumann_entropy(rho)) <= 1e-9

    def test_degenerate_ground_limit(self):
        h = Hamiltonian.diagonal([0.0, 0.0, 1.0])
        assert solve_beta(np.diag([0.5, 0.0, 0.5]), h) == math.inf
        with pytest.raises(StateError):
            solve_beta(np.diag([1.0, 0.0, 0.0]), h)

    def test_dimension_mismatch(self):
        with pytest.raises(StateError):
            solve_beta(np.eye(2) / 2, QUTRIT_H)


class TestPassivity:
    def test_gibbs_is_passive(self):
        for beta in (0.0, 0.3, 2.0, math.inf):
            g = gibbs_state(QUTRIT_H, beta).state
            assert is_passive(g, QUTRIT_H)
            assert is_completely_passive(g, QUTRIT_H)

    def test_population_inversion(self):
        assert not is_passive(np.diag([0.1, 0.9]), QUBIT_H)

    def test_matches_rearrangement_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            d = 3
            h = random_hamiltonian(d, rng)
            rho = random_density_matrix(d, rng)
            if rng.uniform() < 0.5:
                # diagonal in the energy basis with random population order
                pops = np.sort(rng.dirichlet(np.ones(d)))[rng.permutation(d)]
                rho = (h.basis * pops) @ h.basis.conj().T
            pops = np.linalg.eigvalsh(rho)
            brute = min(float(np.dot(pops[list(perm)], h.energies)) for perm in itertools.permutations(range(d)))
            assert passive_energy(rho, h) == pytest.approx(brute, abs=1e-12)
            assert is_passive(rho, h) == (energy(rho, h) - brute <= 1e-9)

    def test_passive_but_not_completely_passive(self):
        rho = np.diag([0.5, 0.5, 0.0])
        assert is_passive(rho, QUTRIT_H)
        assert not is_completely_passive(rho, QUTRIT_H)


class TestWork:
    def test_qutrit_value(self):
        assert asymptotic_work(np.diag([0.5, 0.5, 0.0]), QUTRIT_H) == pytest.approx(W_BAR_QUTRIT, abs=1e-12)

    def test_qutrit_value_from_closed_form(self):
        e = np.array([0.0, 1.0, 2.0])

        def pops(b):
            w = np.exp(-b * e)
            return w / w.sum()

        beta = brentq(lambda b: -np.sum(pops(b) * np.log(pops(b))) - math.log(2), 0.0, 50.0, xtol=1e-15)
        assert 0.5 - float(pops(beta) @ e) == pytest.approx(W_BAR_QUTRIT, abs=1e-12)

    def test_gibbs_has_no_work(self):
        g = gibbs_state(QUTRIT_H, 0.8).state
        assert asymptotic_work(g, QUTRIT_H) == pytest.approx(0.0, abs=1e-9)
        assert catalytic_work(g, QUTRIT_H, samples=50) == pytest.approx(0.0, abs=1e-9)

    def test_dominates_ergotropy(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            h = random_hamiltonian(3, rng)
            rho = random_density_matrix(3, rng)
            assert asymptotic_work(rho, h) >= ergotropy(rho, h) - 1e-9
            assert asymptotic_work(rho, h) >= -1e-9

    def test_unitary_invariance_of_reference(self):
        rng = np.random.default_rng(4)
        rho = random_density_matrix(3, rng)
        u = random_unitary(3, rng)
        rho_u = u @ rho @ u.conj().T
        ref = energy(rho, QUTRIT_H) - asymptotic_work(rho, QUTRIT_H)
        ref_u = energy(rho_u, QUTRIT_H) - asymptotic_work(rho_u, QUTRIT_H)
        assert ref == pytest.approx(ref_u, abs=1e-9)

    def test_catalytic_equals_asymptotic(self):
        rng = np.random.default_rng(5)
        h = random_hamiltonian(3, rng)
        rho = random_density_matrix(3, rng)
        assert catalytic_work(rho, h, samples=200) == pytest.approx(asymptotic_work(rho, h), abs=1e-9)

    def test_falsification_is_seeded(self):
        rho = np.diag([0.5, 0.5, 0.0])
        a = falsify_catalytic_work(rho, QUTRIT_H, samples=100, seed=7)
        b = falsify_catalytic_work(rho, QUTRIT_H, samples=100, seed=7)
        assert a == b
        assert a["max_violation"] <= 1e-7
        assert a["min_entropy_margin"] >= -1e-9

    def test_report(self):
        report = work_report(np.diag([0.5, 0.5, 0.0]), QUTRIT_H, samples=20)
        assert report["catalytic_work"] == report["asymptotic_work"]
        assert report["passive"] and not report["completely_passive"]
        assert report["monte_carlo"]["samples"] == 20
