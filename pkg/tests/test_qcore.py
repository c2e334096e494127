import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdb92.channels import amplitude_damping_kraus, depolarizing_kraus
from hdb92.errors import InvalidArgument, InvalidChannel, InvalidState
from hdb92.qcore import (
    KrausSet,
    ProtocolConfig,
    apply_channel,
    binary_entropy,
    eigenvalues_hermitian,
    ket,
    partial_trace_first,
    projector,
    shannon_entropy,
    superposition_phi,
    von_neumann_entropy,
    weyl_operators,
)

from .conftest import random_density

S = 1 / math.sqrt(2)


def test_ket():
    assert np.array_equal(ket(2, 0), [1, 0])
    assert np.array_equal(ket(4, 3), [0, 0, 0, 1])
    with pytest.raises(InvalidArgument):
        ket(2, 2)


def test_superposition_phi():
    assert np.allclose(superposition_phi(ProtocolConfig(2, 0, 1)), [S, S], atol=1e-15)
    assert np.allclose(superposition_phi(ProtocolConfig(4, 1, 3)), [0, S, 0, S], atol=1e-15)
    assert np.linalg.norm(superposition_phi(ProtocolConfig(7, 5, 2))) == pytest.approx(1, abs=1e-12)
    with pytest.raises(InvalidArgument):
        ProtocolConfig(4, 2, 2)


@pytest.mark.parametrize("D,i,j", [(1, 0, 1), (4, 0, 4), (4, -1, 2), (2.5, 0, 1)])
def test_protocol_config_rejects(D, i, j):
    with pytest.raises(InvalidArgument):
        ProtocolConfig(D, i, j)


class TestApplyChannel:
    def test_identity(self):
        rho = projector(ket(2, 0))
        assert np.allclose(apply_channel([np.eye(2)], rho), rho)

    def test_full_damping(self):
        out = apply_channel(amplitude_damping_kraus(2, 1.0), projector(ket(2, 1)))
        # E0 |1> = 0, E1 |1> = |0>
        assert np.allclose(out, np.diag([1, 0]), atol=1e-15)

    def test_depolarizing_basis_state(self):
        out = apply_channel(depolarizing_kraus(2, 0.1), projector(ket(2, 0)))
        assert np.allclose(out, np.diag([0.9, 0.1]), atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgument):
            apply_channel([np.eye(2)], np.eye(3) / 3)

    def test_not_trace_preserving(self):
        with pytest.raises(InvalidChannel):
            apply_channel([0.9 * np.eye(2)], np.eye(2) / 2)
        with pytest.raises(InvalidChannel):
            KrausSet(np.array([np.eye(3), np.eye(3)]))

    @pytest.mark.parametrize("dim", [2, 3, 5])
    def test_output_is_state(self, dim, rng):
        kraus = depolarizing_kraus(dim, 0.3 * (dim - 1) / dim)
        for _ in range(5):
            out = apply_channel(kraus, random_density(dim, rng))
            assert np.allclose(out, out.conj().T, atol=1e-12)
            assert abs(np.trace(out) - 1) < 1e-9
            assert eigenvalues_hermitian(out)[-1] > -1e-10


class TestEigenvalues:
    def test_diagonal(self):
        assert np.allclose(eigenvalues_hermitian(np.diag([0.5, 0.5])), [0.5, 0.5])

    def test_projector(self):
        assert np.allclose(eigenvalues_hermitian(projector([S, S])), [1, 0], atol=1e-15)

    def test_half_identity_plus_x(self):
        m = 0.5 * np.eye(2) + 0.5 * np.array([[0, 1], [1, 0]])
        # eigenvalues 1/2 +- 1/2
        assert np.allclose(eigenvalues_hermitian(m), [1, 0], atol=1e-15)

    def test_descending_and_trace(self, rng):
        rho = random_density(6, rng)
        lam = eigenvalues_hermitian(rho)
        assert np.all(np.diff(lam) <= 0)
        assert abs(lam.sum() - np.trace(rho).real) < 1e-9

    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidArgument):
            eigenvalues_hermitian(np.array([[0, 1], [0, 0]]))


class TestEntropies:
    def test_von_neumann_examples(self):
        assert von_neumann_entropy(projector(ket(3, 1))) == 0
        assert von_neumann_entropy(np.eye(8) / 8) == pytest.approx(3, abs=1e-12)
        h = -0.9 * math.log2(0.9) - 0.1 * math.log2(0.1)
        assert von_neumann_entropy(np.diag([0.9, 0.1])) == pytest.approx(h, abs=1e-12)
        assert h == pytest.approx(0.469, abs=5e-4)

    def test_von_neumann_rejects_negative(self):
        with pytest.raises(InvalidState):
            von_neumann_entropy(np.diag([1.1, -0.1]))

    def test_small_negative_eigenvalue_clamped(self):
        assert von_neumann_entropy(np.diag([1 + 5e-11, -5e-11])) == pytest.approx(0, abs=1e-9)

    def test_binary_entropy(self):
        assert binary_entropy(0) == 0
        assert binary_entropy(1) == 0
        assert binary_entropy(0.5) == 1
        expected = -0.11 * math.log2(0.11) - 0.89 * math.log2(0.89)
        assert binary_entropy(0.11) == pytest.approx(expected, abs=1e-15)
        assert binary_entropy(0.11) == pytest.approx(0.4999160, abs=1e-7)
        with pytest.raises(InvalidArgument):
            binary_entropy(1.1)

    def test_shannon(self):
        assert shannon_entropy([1, 0, 0]) == 0
        assert shannon_entropy([0.25] * 4) == 2
        assert shannon_entropy([0.5, 0, 0, 0.5]) == 1
        with pytest.raises(InvalidArgument):
            shannon_entropy([0.5, 0.4])

    @given(st.floats(0, 1))
    def test_binary_entropy_symmetric(self, p):
        assert binary_entropy(p) == pytest.approx(binary_entropy(1 - p), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 2**32 - 1))
    def test_von_neumann_matches_shannon_of_spectrum(self, dim, seed):
        rho = random_density(dim, np.random.default_rng(seed), rank=1 + seed % dim)
        lam = eigenvalues_hermitian(rho)
        assert von_neumann_entropy(rho) == pytest.approx(shannon_entropy(np.clip(lam, 0, None)), abs=1e-9)

    def test_partial_trace(self, rng):
        a, b = random_density(2, rng), random_density(3, rng)
        assert np.allclose(partial_trace_first(np.kron(a, b), 2), b)


class TestWeyl:
    def test_qubit_set(self):
        X = np.array([[0, 1], [1, 0]])
        Z = np.diag([1, -1])
        ops = weyl_operators(2)
        for got, want in zip(ops, [np.eye(2), Z, X, X @ Z]):
            assert np.allclose(got, want, atol=1e-15)

    def test_shift(self):
        shift = weyl_operators(3)[3]  # a=1, b=0
        assert np.allclose(shift @ ket(3, 0), ket(3, 1))
        assert np.allclose(shift @ ket(3, 2), ket(3, 0))

    @pytest.mark.parametrize("dim", range(2, 9))
    def test_unitary_and_orthogonal(self, dim):
        ops = np.array(weyl_operators(dim))
        assert len(ops) == dim * dim
        for w in ops:
            assert np.allclose(w.conj().T @ w, np.eye(dim), atol=1e-12)
        gram = np.einsum("mab,nab->mn", ops.conj(), ops)
        assert np.allclose(gram, dim * np.eye(dim * dim), atol=1e-9)

    @pytest.mark.parametrize("dim", range(2, 9))
    def test_twirl_is_maximally_mixed(self, dim, rng):
        rho = random_density(dim, rng)
        twirl = sum(w @ rho @ w.conj().T for w in weyl_operators(dim)) / dim**2
        assert np.allclose(twirl, np.eye(dim) / dim, atol=1e-9)

    def test_rejects_small_dim(self):
        with pytest.raises(InvalidArgument):
            weyl_operators(1)
