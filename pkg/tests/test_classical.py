import numpy as np
import pytest
from scipy.optimize import brentq

from catalytic.classical import (
    apply_protocol,
    build_classical_catalyst,
    catalyst_vector,
    expected_output,
    joint_layout,
    protocol_permutation,
    verify_catalytic,
)
from catalytic.errors import DimensionCapExceeded, EntropyGapError
from catalytic.jsonio import load_golden
from catalytic.majorization import PermutationMixture
from catalytic.statekit import (
    SubsystemLayout,
    dimension_caps,
    partial_trace,
    shannon_entropy,
    trace_distance,
)
from catalytic.typicality import n_copy

THREE_LEVEL = ([0.5, 0.5, 0.0], [2 / 3, 1 / 6, 1 / 6])
QUBIT = ([0.9, 0.1], [0.7, 0.3])


def run(p, pp, **kw):
    cat, perm = build_classical_catalyst(p, pp, **kw)
    out, report = apply_protocol(p, cat, perm)
    return cat, perm, out, report


class TestConstruction:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_three_level_exact_catalysis(self, n):
        p, pp = THREE_LEVEL
        cat, _, _, report = run(p, pp, n=n)
        assert report.catalyst_invariance_residual <= 1e-10
        assert report.output_distance <= cat.epsilon_certified + 1e-12
        assert report.passed

    def test_qubit_distance_non_increasing(self):
        p, pp = QUBIT
        dists = [run(p, pp, n=n)[3].output_distance for n in (2, 4, 6)]
        assert dists[0] >= dists[1] >= dists[2]

    def test_relabeling_is_trivial(self):
        cat, perm, out, report = run([0.2, 0.5, 0.3], [0.5, 0.3, 0.2])
        assert cat.trivial
        np.testing.assert_allclose(out, [0.5, 0.3, 0.2])
        assert report.output_distance == 0.0
        assert report.passed

    def test_entropy_gap_error(self):
        with pytest.raises(EntropyGapError):
            build_classical_catalyst([0.7, 0.3], [0.9, 0.1], epsilon=0.1)

    def test_equal_entropy_is_perturbed(self):
        # same entropy, different spectrum: (0.6, 0.2, 0.2) vs a matched three-level vector
        p = np.array([0.6, 0.2, 0.2])
        h = shannon_entropy(p)
        a = brentq(lambda x: shannon_entropy([x, (1 - x) * 0.7, (1 - x) * 0.3]) - h, 0.34, 0.9)
        pp = np.array([a, (1 - a) * 0.7, (1 - a) * 0.3])
        cat, _, _, report = run(p, pp, epsilon=0.2)
        assert cat.perturbation > 0
        assert report.catalyst_invariance_residual <= 1e-10
        assert report.output_distance <= 0.2

    def test_epsilon_driven(self):
        p, pp = QUBIT
        cat, _, _, report = run(p, pp, epsilon=0.05)
        assert report.output_distance <= 0.05
        assert cat.epsilon_certified <= 0.05

    def test_cap(self):
        with dimension_caps(classical=200):
            with pytest.raises(DimensionCapExceeded):
                build_classical_catalyst(*QUBIT, n=6)


class TestCatalystStructure:
    def test_marginals(self):
        p, pp = THREE_LEVEL
        cat, _ = build_classical_catalyst(p, pp, n=4)
        assert cat.q.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(partial_trace(cat.q, cat.layout, ["A"]), np.full(4, 0.25), atol=1e-12)
        np.testing.assert_allclose(partial_trace(cat.q, cat.layout, ["R"]), cat.mixture.weights, atol=1e-12)

    def test_conditional_blocks(self):
        p, pp = QUBIT
        cat, _ = build_classical_catalyst(p, pp, n=4)
        base = n_copy(cat.p, 4)
        for alpha, (w, perm) in enumerate(cat.mixture.terms()):
            x = np.empty_like(base)
            x[perm] = base
            for k in range(1, 5):
                tail = x.reshape(2 ** (4 - k), -1).sum(axis=1)
                expected = w * np.kron(n_copy(cat.p, k - 1), tail) / 4
                np.testing.assert_allclose(cat.block(k - 1, alpha), expected, atol=1e-15)

    def test_permutation_is_bijection(self):
        cat, perm = build_classical_catalyst(*THREE_LEVEL, n=3)
        assert perm.is_bijection()
        for f in perm.factors:
            assert np.array_equal(np.sort(f), np.arange(f.size))

    def test_output_matches_marginal_mixture(self):
        for n in (2, 3, 5):
            cat, perm, out, report = run(*QUBIT, n=n)
            layout = cat.joint_layout
            s_out = partial_trace(out, layout, ["S1"])
            t = cat.target.target.reshape((2,) * n)
            marg = [t.sum(axis=tuple(i for i in range(n) if i != k)) for k in range(n)]
            np.testing.assert_allclose(s_out, np.mean(marg, axis=0), atol=1e-12)
            np.testing.assert_allclose(expected_output(cat), s_out, atol=1e-12)
            assert report.checks["output_matches_expected"]

    def test_entropy_increase_equals_mutual_information(self):
        for p, pp in (THREE_LEVEL, QUBIT):
            for n in (2, 3, 4):
                _, _, _, r = run(p, pp, n=n)
                assert r.entropy_out >= r.entropy_in - 1e-9
                assert r.entropy_change == pytest.approx(r.mutual_information, abs=1e-8)


class TestVerify:
    def test_golden_classical(self):
        g = load_golden("three_level_classical")
        p, q = np.array(g["p"]), np.array(g["q"])
        joint_in = np.kron(p, q)
        joint_out = np.empty_like(joint_in)
        joint_out[np.array(g["permutation"])] = joint_in
        layout = SubsystemLayout(tuple(g["layout"]["dims"]), tuple(g["layout"]["labels"]))
        report = verify_catalytic(joint_in, joint_out, layout, g["p_prime"], 0.0)
        assert report.catalyst_invariance_residual <= 1e-12
        assert report.output_distance <= 1e-12
        assert report.passed

    def test_corrupted_catalyst_fails(self):
        cat, perm, out, _ = run(*QUBIT, n=3)
        joint_in = np.kron(cat.p, cat.q)
        bad = out.copy()
        i, j = np.flatnonzero(bad > 1e-3)[:2]
        bad[i] += 1e-3
        bad[j] -= 1e-3
        report = verify_catalytic(joint_in, bad, cat.joint_layout, cat.p_prime, 1.0)
        assert not report.invariance_ok or not report.checks["is_permutation"]
        assert not report.passed

    def test_identity_on_target(self):
        layout = SubsystemLayout((2, 2), ("S1", "C"))
        joint = np.kron([0.6, 0.4], [0.5, 0.5])
        report = verify_catalytic(joint, joint, layout, [0.6, 0.4], 0.0)
        assert report.passed
        assert report.output_distance == 0.0

    def test_trivial_catalyst_identity(self):
        mix = PermutationMixture(np.ones(1), np.arange(3)[None, :])
        perm = protocol_permutation(3, 1, mix)
        np.testing.assert_array_equal(perm.composed, np.arange(3))

    def test_distance_failure(self):
        layout = SubsystemLayout((2, 1), ("S1", "C"))
        report = verify_catalytic([0.6, 0.4], [0.6, 0.4], layout, [0.5, 0.5], 0.05)
        assert trace_distance([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.1)
        assert not report.distance_ok
        assert not report.passed


def test_joint_layout_labels():
    layout = joint_layout(2, 3, 5)
    assert layout.labels == ("S1", "S2", "S3", "A", "R")
    assert layout.total == 2**3 * 3 * 5


def test_catalyst_vector_normalized():
    mix = PermutationMixture(np.array([0.25, 0.75]), np.array([[0, 1, 2, 3], [1, 0, 3, 2]]))
    q = catalyst_vector(np.array([0.9, 0.1]), mix, 2)
    assert q.sum() == pytest.approx(1.0, abs=1e-15)
