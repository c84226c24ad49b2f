import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catalytic.errors import MajorizationError
from catalytic.majorization import (
    PermutationMixture,
    TTransformStep,
    apply_chain,
    apply_permutation,
    chain_mixture,
    diagonal_residual,
    is_doubly_stochastic,
    majorizes,
    partial_sums,
    permutation_matrix,
    permutation_mixture,
    schur_horn_unitary,
    sort_descending,
    t_transform_chain,
)
from catalytic.statekit import random_density_matrix, random_unitary, shannon_entropy


def random_majorized_pair(d, rng):
    """A sorted vector and a sorted vector it majorizes (via a random doubly stochastic map)."""
    w = np.sort(rng.dirichlet(np.full(d, 0.5)))[::-1]
    k = int(rng.integers(1, 2 * d))
    weights = rng.dirichlet(np.ones(k))
    mixed = sum(q * w[rng.permutation(d)] for q in weights)
    return w, np.sort(mixed)[::-1]


class TestMajorizes:
    def test_point_mass(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert majorizes([1.0, 0.0, 0.0], rng.dirichlet(np.ones(3)))

    def test_three_level_pair_is_incomparable(self):
        a, b = [0.5, 0.5, 0.0], [2 / 3, 1 / 6, 1 / 6]
        assert not majorizes(a, b)
        assert not majorizes(b, a)

    def test_reflexive(self):
        w = np.random.default_rng(1).dirichlet(np.ones(5))
        assert majorizes(w, w)

    def test_zero_padding(self):
        assert majorizes([0.6, 0.4], [0.5, 0.3, 0.2])
        assert not majorizes([0.5, 0.3, 0.2], [0.6, 0.4])

    def test_partial_sums_sorted(self):
        np.testing.assert_allclose(partial_sums([0.1, 0.6, 0.3]), [0.6, 0.9, 1.0])

    def test_sort_descending_is_stable(self):
        values, order = sort_descending([0.25, 0.5, 0.25])
        np.testing.assert_array_equal(order, [1, 0, 2])
        np.testing.assert_allclose(values, [0.5, 0.25, 0.25])


class TestTTransformStep:
    def test_t_one_is_identity(self):
        np.testing.assert_array_equal(TTransformStep(0, 2, 1.0).matrix(3), np.eye(3))

    def test_t_zero_is_transposition(self):
        np.testing.assert_array_equal(TTransformStep(0, 2, 0.0).matrix(3), np.eye(3)[[2, 1, 0]])

    def test_rotation_entries(self):
        g = TTransformStep(0, 1, 0.75).rotation(2)
        np.testing.assert_allclose(g, [[np.sqrt(0.75), -0.5], [0.5, np.sqrt(0.75)]])

    def test_rotation_diagonal_equals_t_transform(self):
        rng = np.random.default_rng(2)
        w = rng.dirichlet(np.ones(4))
        step = TTransformStep(1, 3, 0.3)
        g = step.rotation(4)
        np.testing.assert_allclose(np.diag(g @ np.diag(w) @ g.T), step.apply(w), atol=1e-15)

    @pytest.mark.parametrize("bad", [(0, 0, 0.5), (0, 1, 1.5), (-1, 1, 0.5)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            TTransformStep(*bad)

    def test_sum_preserved_and_entropy_monotone(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            d = int(rng.integers(2, 8))
            w = rng.dirichlet(np.ones(d))
            j, k = rng.choice(d, 2, replace=False)
            out = TTransformStep(int(j), int(k), float(rng.uniform())).apply(w)
            assert abs(out.sum() - w.sum()) <= 1e-14
            assert shannon_entropy(out) >= shannon_entropy(w) - 1e-10


class TestChain:
    def test_equal_vectors(self):
        assert t_transform_chain([0.5, 0.3, 0.2], [0.5, 0.3, 0.2]) == []

    def test_two_level_example(self):
        (step,) = t_transform_chain([0.7, 0.3], [0.6, 0.4])
        assert (step.j, step.k) == (0, 1)
        assert step.t == pytest.approx(0.75, abs=1e-14)

    def test_not_majorizing(self):
        with pytest.raises(MajorizationError):
            t_transform_chain([0.6, 0.4], [0.7, 0.3])

    def test_unsorted_input(self):
        with pytest.raises(ValueError):
            t_transform_chain([0.3, 0.7], [0.5, 0.5])

    def test_random_pairs(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            d = int(rng.integers(2, 13))
            w, wp = random_majorized_pair(d, rng)
            steps = t_transform_chain(w, wp)
            assert len(steps) <= d - 1
            np.testing.assert_allclose(apply_chain(w, steps), wp, atol=1e-10)

    def test_flat_target(self):
        w = np.array([0.4, 0.3, 0.2, 0.1])
        steps = t_transform_chain(w, np.full(4, 0.25))
        assert len(steps) <= 3
        np.testing.assert_allclose(apply_chain(w, steps), 0.25, atol=1e-12)


class TestSchurHorn:
    def test_identity_when_equal(self):
        rho = random_density_matrix(3, 0)
        plan = schur_horn_unitary(rho, rho)
        assert plan.steps == []
        assert diagonal_residual(plan, rho, rho) <= 1e-12

    def test_qubit_example(self):
        plan = schur_horn_unitary(np.diag([0.7, 0.3]), np.diag([0.6, 0.4]))
        assert len(plan.steps) == 1
        s = np.sqrt(0.75)
        np.testing.assert_allclose(np.abs(plan.dense), [[s, 0.5], [0.5, s]], atol=1e-14)
        out = plan.apply(np.diag([0.7, 0.3]))
        np.testing.assert_allclose(np.diag(out).real, [0.6, 0.4], atol=1e-14)

    def test_rejects_non_majorizing(self):
        with pytest.raises(MajorizationError):
            schur_horn_unitary(np.diag([0.5, 0.5, 0]), np.diag([2 / 3, 1 / 6, 1 / 6]))

    def test_random_bases(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            d = int(rng.integers(2, 7))
            w, wp = random_majorized_pair(d, rng)
            u, v = random_unitary(d, rng), random_unitary(d, rng)
            omega = u @ np.diag(w) @ u.conj().T
            omega_p = v @ np.diag(wp) @ v.conj().T
            plan = schur_horn_unitary(omega, omega_p)
            assert plan.unitarity_residual() <= 1e-9
            assert diagonal_residual(plan, omega, omega_p) <= 1e-9
            assert plan.consistency_residual() <= 1e-12
            out = plan.apply(omega)
            assert abs(np.trace(out) - 1) <= 1e-12
            np.testing.assert_allclose(np.linalg.eigvalsh(out), np.linalg.eigvalsh(omega), atol=1e-9)


class TestPermutationMixture:
    def test_identity_for_equal(self):
        mix = permutation_mixture([0.5, 0.3, 0.2], [0.5, 0.3, 0.2])
        assert len(mix) == 1
        np.testing.assert_array_equal(mix.perms[0], [0, 1, 2])
        assert mix.weights[0] == pytest.approx(1.0)

    def test_two_level_example(self):
        mix = permutation_mixture([0.7, 0.3], [0.6, 0.4])
        terms = {tuple(int(i) for i in p): q for q, p in mix.terms()}
        assert set(terms) == {(0, 1), (1, 0)}
        assert terms[(0, 1)] == pytest.approx(0.75, abs=1e-14)
        assert terms[(1, 0)] == pytest.approx(0.25, abs=1e-14)

    def test_chain_expansion_matches(self):
        steps = t_transform_chain([0.7, 0.3], [0.6, 0.4])
        mix = chain_mixture(steps, 2)
        np.testing.assert_allclose(mix.apply([0.7, 0.3]), [0.6, 0.4], atol=1e-15)
        assert len(mix) <= 2 ** len(steps)

    def test_unsorted_inputs(self):
        w, wp = np.array([0.1, 0.6, 0.3]), np.array([0.3, 0.3, 0.4])
        mix = permutation_mixture(w, wp)
        np.testing.assert_allclose(mix.apply(w), wp, atol=1e-12)

    def test_random_reconstruction(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            d = int(rng.integers(2, 9))
            w, wp = random_majorized_pair(d, rng)
            mix = permutation_mixture(w, wp)
            np.testing.assert_allclose(mix.apply(w), wp, atol=1e-9)
            assert len(mix) <= d
            assert len(mix) <= 2 ** len(t_transform_chain(w, wp))
            assert is_doubly_stochastic(mix.matrix())

    def test_chain_mixture_is_doubly_stochastic(self):
        rng = np.random.default_rng(8)
        w, wp = random_majorized_pair(5, rng)
        steps = t_transform_chain(w, wp)
        mix = chain_mixture(steps, 5)
        np.testing.assert_allclose(mix.apply(w), wp, atol=1e-10)
        assert is_doubly_stochastic(mix.matrix())

    def test_rejects_non_majorizing(self):
        with pytest.raises(MajorizationError):
            permutation_mixture([0.5, 0.5], [0.9, 0.1])

    def test_validation(self):
        with pytest.raises(ValueError):
            PermutationMixture(np.array([0.5, 0.4]), np.array([[0, 1], [1, 0]]))
        with pytest.raises(ValueError):
            PermutationMixture(np.array([1.0]), np.array([[0, 0]]))


def test_permutation_destination_convention():
    v = np.array([10.0, 20.0, 30.0])
    perm = np.array([2, 0, 1])
    out = apply_permutation(v, perm)
    np.testing.assert_array_equal(out, [20.0, 30.0, 10.0])
    np.testing.assert_array_equal(permutation_matrix(perm) @ v, out)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_chain_property(d, seed):
    w, wp = random_majorized_pair(d, np.random.default_rng(seed))
    steps = t_transform_chain(w, wp)
    assert len(steps) <= d - 1
    np.testing.assert_allclose(apply_chain(w, steps), wp, atol=1e-10)
    assert majorizes(w, wp)
