import itertools

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from pflattice import operators as ops
from pflattice.operators import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z

from conftest import random_hermitian, random_unitary


def brute_force_embed(local, start, n):
    """Explicit index loops: <i|I⊗L⊗I|j> = L[a,b] when bits outside the window agree."""
    w = int(np.log2(local.shape[0]))
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            bits_i = [(i >> (n - q)) & 1 for q in range(1, n + 1)]
            bits_j = [(j >> (n - q)) & 1 for q in range(1, n + 1)]
            window = range(start - 1, start - 1 + w)
            if any(bits_i[q] != bits_j[q] for q in range(n) if q not in window):
                continue
            a = int("".join(str(bits_i[q]) for q in window), 2)
            b = int("".join(str(bits_j[q]) for q in window), 2)
            out[i, j] = local[a, b]
    return out


HEIS = np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y) + np.kron(PAULI_Z, PAULI_Z)


class TestEmbedLocal:
    def test_z_on_first_of_two(self):
        np.testing.assert_array_equal(ops.embed_local(PAULI_Z, 1, 2), np.diag([1, 1, -1, -1]))

    def test_identity(self):
        np.testing.assert_array_equal(ops.embed_local(np.eye(4), 1, 3), np.eye(8))

    def test_heisenberg_middle_matches_index_loops(self):
        got = ops.embed_local(HEIS, 2, 4)
        np.testing.assert_allclose(got, brute_force_embed(HEIS, 2, 4), atol=0)
        # Only the middle two qubits may differ between coupled basis states.
        for i, j in zip(*np.nonzero(got)):
            assert (i ^ j) & 0b1001 == 0

    @pytest.mark.parametrize("start", [1, 2, 3])
    def test_random_local_matches_index_loops(self, start):
        local = random_hermitian(np.random.default_rng(start), 4)
        np.testing.assert_allclose(ops.embed_local(local, start, 4), brute_force_embed(local, start, 4))

    def test_wrap_requires_flag(self):
        with pytest.raises(ops.OperatorError):
            ops.embed_local(HEIS, 4, 4)
        wrapped = ops.embed_local(np.kron(PAULI_Z, PAULI_X), 4, 4, wrap=True)
        expected = np.kron(np.kron(PAULI_X, np.eye(4)), PAULI_Z)
        np.testing.assert_array_equal(wrapped, expected)

    def test_rejects_bad_input(self):
        with pytest.raises(ops.OperatorError):
            ops.embed_local(np.array([[0, 1], [0, 0]]), 1, 2)
        with pytest.raises(ops.OperatorError):
            ops.embed_local(np.eye(3), 1, 2)
        with pytest.raises(ops.OperatorError):
            ops.embed_local(PAULI_Z, 1, 13)


class TestHermExpm:
    def test_diagonal(self):
        t = 0.37
        np.testing.assert_allclose(ops.herm_expm(PAULI_Z, t), np.diag([np.exp(-1j * t), np.exp(1j * t)]))

    def test_zero_generator(self):
        np.testing.assert_array_equal(ops.herm_expm(np.zeros((4, 4)), 7.3), np.eye(4))

    def test_x_quarter_period(self):
        t = np.pi / 2
        closed = np.cos(t) * PAULI_I - 1j * np.sin(t) * PAULI_X
        np.testing.assert_allclose(ops.herm_expm(PAULI_X, t), closed, atol=1e-10)
        np.testing.assert_allclose(ops.herm_expm(PAULI_X, t), -1j * PAULI_X, atol=1e-10)

    def test_matches_pade(self):
        a = random_hermitian(np.random.default_rng(0), 16)
        np.testing.assert_allclose(ops.herm_expm(a, 0.8), scipy.linalg.expm(-0.8j * a), atol=1e-12)
        np.testing.assert_allclose(ops.herm_expm(a, 0.8, sign=-1), scipy.linalg.expm(0.8j * a), atol=1e-12)

    def test_exact_at_zero_and_rejects_non_hermitian(self):
        np.testing.assert_array_equal(ops.herm_expm(PAULI_Y, 0.0), np.eye(2))
        with pytest.raises(ops.OperatorError):
            ops.herm_expm(np.array([[0, 1], [0, 0]]), 1.0)


@given(seed=st.integers(0, 2**32 - 1), s=st.floats(-3, 3), t=st.floats(-3, 3))
def test_herm_expm_group_law(seed, s, t):
    a = random_hermitian(np.random.default_rng(seed), 8)
    u_s, u_t = ops.herm_expm(a, s), ops.herm_expm(a, t)
    np.testing.assert_allclose(u_s @ ops.herm_expm(a, -s), np.eye(8), atol=1e-10)
    np.testing.assert_allclose(u_s @ u_t, ops.herm_expm(a, s + t), atol=1e-10)
    np.testing.assert_allclose(u_t.conj().T @ u_t, np.eye(8), atol=1e-10)


class TestSpectralNorm:
    @pytest.mark.parametrize("dim", [1, 4, 512])
    def test_identity(self, dim):
        assert ops.spectral_norm(np.eye(dim)) == pytest.approx(1.0, rel=1e-10)

    def test_nilpotent(self):
        assert ops.spectral_norm(np.array([[0, 2], [0, 0]])) == pytest.approx(2.0, rel=1e-12)

    def test_heisenberg_commutator_against_svd(self):
        from pflattice import group_even_odd, group_sum, heisenberg_random_field

        H = heisenberg_random_field(4, 1.0, 42)
        G = group_even_odd(H)
        c = ops.commutator(group_sum(H, G, 1), group_sum(H, G, 0))
        direct = np.linalg.svd(c, compute_uv=False)[0]
        assert ops.spectral_norm(c) == pytest.approx(direct, rel=1e-10)
        # Force the power-iteration path on the same matrix.
        assert ops.spectral_norm(c, svd_max_dim=1) == pytest.approx(direct, rel=1e-9)

    def test_power_iteration_above_threshold(self):
        rng = np.random.default_rng(5)
        d = 300
        u, v = random_unitary(rng, d), random_unitary(rng, d)
        s = np.linspace(0.1, 1.0, d)
        s[-1] = 3.0
        a = (u * s) @ v
        assert ops.spectral_norm(a) == pytest.approx(3.0, rel=1e-10)

    def test_power_iteration_is_bit_stable(self):
        a = random_hermitian(np.random.default_rng(9), 300)
        assert ops.spectral_norm(a) == ops.spectral_norm(a)

    def test_non_convergence_reports_estimate(self):
        # Two nearly equal top singular values with orthogonal phases converge slowly.
        d = 300
        s = np.full(d, 0.5)
        s[:2] = [1.0, 1.0 - 1e-9]
        a = random_unitary(np.random.default_rng(1), d) @ np.diag(s)
        with pytest.raises(ops.ConvergenceError) as info:
            ops.spectral_norm(a, max_iter=5, tol=1e-15)
        assert 0.5 <= info.value.estimate <= 1.0 + 1e-12


@given(seed=st.integers(0, 2**32 - 1))
def test_spectral_norm_unitarily_invariant(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    u, v = random_unitary(rng, 16), random_unitary(rng, 16)
    assert abs(ops.spectral_norm(u @ a @ v) - ops.spectral_norm(a)) <= 1e-9


class TestCommutator:
    def test_z_with_itself(self):
        np.testing.assert_array_equal(ops.commutator(PAULI_Z, PAULI_Z), np.zeros((2, 2)))

    def test_pauli_algebra(self):
        np.testing.assert_allclose(ops.commutator(PAULI_X, PAULI_Y), 2j * PAULI_Z)

    def test_anti_hermitian_for_hermitian_inputs(self):
        rng = np.random.default_rng(3)
        a, b = random_hermitian(rng, 8), random_hermitian(rng, 8)
        c = ops.commutator(a, b)
        assert np.linalg.norm(c + c.conj().T, 2) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ops.OperatorError):
            ops.commutator(np.eye(2), np.eye(4))


@given(seed=st.integers(0, 2**32 - 1))
def test_disjoint_supports_commute_exactly(seed):
    rng = np.random.default_rng(seed)
    h12 = ops.embed_local(random_hermitian(rng, 4), 1, 4)
    h34 = ops.embed_local(random_hermitian(rng, 4), 3, 4)
    assert ops.spectral_norm(ops.commutator(h12, h34)) <= 1e-12


def test_sparse_embedding_matches_dense():
    local = random_hermitian(np.random.default_rng(2), 4)
    for sites in [(1, 2), (3, 4), (4, 1)]:
        dense = ops.embed_sites(local, sites, 4)
        np.testing.assert_array_equal(ops.embed_sites_sparse(local, sites, 4).toarray(), dense)


def test_qubit_cap(monkeypatch):
    with pytest.raises(ops.OperatorError):
        ops.check_qubits(13)
    monkeypatch.setenv("PFLATTICE_MAX_QUBITS", "14")
    ops.check_qubits(13)
    monkeypatch.setenv("PFLATTICE_MAX_QUBITS", "15")
    with pytest.raises(ops.OperatorError):
        ops.max_qubits()
