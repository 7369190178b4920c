import itertools

import numpy as np
import pytest

from pflattice import lattice as lat
from pflattice import operators as ops
from pflattice.analysis import locality_expansion

from conftest import random_hermitian


def starts(H, G, g):
    return [tuple(H.terms[i].sites) for i in G.groups[g]]


class TestHeisenberg:
    def test_two_site_scale_factor_is_bond_norm(self):
        H = lat.heisenberg_random_field(2, 0.0, 1)
        evals = np.linalg.eigvalsh(lat.heisenberg_bond(0.0))
        assert H.scale_factor == pytest.approx(max(abs(evals)), rel=1e-12)
        assert H.scale_factor == pytest.approx(3.0, rel=1e-12)
        assert len(H.terms) == 1
        np.testing.assert_allclose(H.terms[0].matrix * 3.0, lat.heisenberg_bond(0.0), atol=1e-15)

    def test_zero_field_is_seed_independent(self):
        a = lat.heisenberg_random_field(4, 0.0, 1)
        b = lat.heisenberg_random_field(4, 0.0, 999)
        for ta, tb in zip(a.terms, b.terms):
            np.testing.assert_array_equal(ta.matrix, tb.matrix)

    def test_same_seed_bitwise_identical(self):
        a = lat.heisenberg_random_field(4, 1.0, 42)
        b = lat.heisenberg_random_field(4, 1.0, 42)
        assert a.scale_factor == b.scale_factor
        for ta, tb in zip(a.terms, b.terms):
            assert ta.sites == tb.sites
            assert ta.matrix.tobytes() == tb.matrix.tobytes()

    def test_fields_follow_splitmix_stream(self):
        H = lat.heisenberg_random_field(4, 1.0, 42)
        assert H.meta["fields"][0] == 2 * 0.74156487877182331 - 1

    def test_open_structure_and_normalization(self):
        H = lat.heisenberg_random_field(7, 2.0, 3)
        assert [t.sites for t in H.terms] == [(j, j + 1) for j in range(1, 7)]
        assert max(t.norm for t in H.terms) <= 1 + 1e-12
        assert max(t.norm for t in H.terms) == pytest.approx(1.0, rel=1e-12)
        assert H.scale_factor >= 3.0

    def test_periodic_adds_wrapping_bond(self):
        H = lat.heisenberg_random_field(4, 1.0, 3, boundary=lat.PERIODIC)
        assert [t.sites for t in H.terms][-1] == (4, 1)

    def test_total_matrix_is_sum_of_embedded_terms(self):
        H = lat.heisenberg_random_field(5, 1.0, 8)
        expected = sum(ops.embed_local(t.matrix, t.start, 5) for t in H.terms)
        np.testing.assert_allclose(H.total_matrix(), expected, atol=1e-15)
        np.testing.assert_allclose(H.total_sparse().toarray(), expected, atol=1e-15)

    @pytest.mark.parametrize("n", [1, 13])
    def test_rejects_size(self, n):
        with pytest.raises((lat.LatticeError, ops.OperatorError)):
            lat.heisenberg_random_field(n, 1.0, 0)


class TestGroupings:
    def test_even_odd_n4(self):
        H = lat.heisenberg_random_field(4, 1.0, 0)
        G = lat.group_even_odd(H)
        assert G.labels == ("odd", "even")
        assert starts(H, G, 0) == [(1, 2), (3, 4)]
        assert starts(H, G, 1) == [(2, 3)]

    def test_even_odd_n5(self):
        H = lat.heisenberg_random_field(5, 1.0, 0)
        G = lat.group_even_odd(H)
        assert starts(H, G, 0) == [(1, 2), (3, 4)]
        assert starts(H, G, 1) == [(2, 3), (4, 5)]

    def test_even_odd_n2_has_empty_even_group(self):
        H = lat.heisenberg_random_field(2, 1.0, 0)
        G = lat.group_even_odd(H)
        assert starts(H, G, 0) == [(1, 2)]
        assert G.groups[1] == ()
        np.testing.assert_array_equal(lat.group_sum(H, G, 1), np.zeros((4, 4)))

    def test_even_odd_rejects_periodic(self):
        H = lat.heisenberg_random_field(4, 1.0, 0, boundary=lat.PERIODIC)
        with pytest.raises(lat.LatticeError):
            lat.group_even_odd(H)

    @pytest.mark.parametrize("n,sizes", [(4, (2, 1, 1)), (6, (3, 2, 1))])
    def test_periodic(self, n, sizes):
        H = lat.heisenberg_random_field(n, 1.0, 2, boundary=lat.PERIODIC)
        G = lat.group_periodic(H)
        assert G.labels == ("odd", "even", "bndry")
        assert tuple(len(g) for g in G.groups) == sizes
        assert starts(H, G, 2) == [(n, 1)]
        if n == 4:
            assert starts(H, G, 0) == [(1, 2), (3, 4)]
            assert starts(H, G, 1) == [(2, 3)]

    def test_periodic_rejects_odd_n_and_open(self):
        with pytest.raises(lat.LatticeError):
            lat.group_periodic(lat.heisenberg_random_field(5, 1.0, 0, boundary=lat.PERIODIC))
        with pytest.raises(lat.LatticeError):
            lat.group_periodic(lat.heisenberg_random_field(4, 1.0, 0))

    def test_periodic_groups_commute_internally(self):
        H = lat.heisenberg_random_field(4, 1.0, 5, boundary=lat.PERIODIC)
        assert_within_group_commute(H, lat.group_periodic(H))

    def test_range_two_matches_even_odd(self):
        H = lat.heisenberg_random_field(7, 1.0, 1)
        assert lat.group_range(H).groups == lat.group_even_odd(H).groups

    def test_range_three(self):
        H = lat.random_lattice(7, 3, 11)
        G = lat.group_range(H)
        assert starts(H, G, 0) == [(1, 2, 3), (4, 5, 6)]
        assert starts(H, G, 1) == [(2, 3, 4), (5, 6, 7)]
        assert starts(H, G, 2) == [(3, 4, 5)]
        assert_within_group_commute(H, G)

    @pytest.mark.parametrize("H", [
        lat.heisenberg_random_field(6, 1.0, 4),
        lat.heisenberg_random_field(6, 1.0, 4, boundary=lat.PERIODIC),
        lat.random_lattice(8, 3, 2),
        lat.random_lattice(9, 4, 2),
    ], ids=["open", "periodic", "range3", "range4"])
    def test_partition_and_group_sums(self, H):
        G = lat.default_grouping(H)
        flat = sorted(i for g in G.groups for i in g)
        assert flat == list(range(len(H.terms)))
        total = sum(lat.group_sum(H, G, g) for g in range(len(G)))
        np.testing.assert_allclose(total, H.total_matrix(), atol=1e-12)

    def test_group_sum_definition_and_bad_index(self):
        H = lat.heisenberg_random_field(4, 1.0, 42)
        G = lat.group_even_odd(H)
        expected = H.terms[0].embedded(4) + H.terms[2].embedded(4)
        np.testing.assert_array_equal(lat.group_sum(H, G, 0), expected)
        with pytest.raises(lat.LatticeError):
            lat.group_sum(H, G, 2)


def assert_within_group_commute(H, G):
    for g in G.groups:
        for i, j in itertools.combinations(g, 2):
            a, b = H.terms[i].embedded(H.n), H.terms[j].embedded(H.n)
            assert ops.spectral_norm(ops.commutator(a, b)) <= 1e-12


@pytest.mark.parametrize("n", range(2, 11))
def test_commutator_locality_identity(n):
    H = lat.heisenberg_random_field(n, 1.0, n)
    G = lat.group_even_odd(H)
    full = ops.commutator(lat.group_sum(H, G, 1), lat.group_sum(H, G, 0))
    assert np.abs(full - locality_expansion(H)).max() <= 1e-12
    assert ops.spectral_norm(full - locality_expansion(H), svd_max_dim=1024) <= 1e-12


def test_from_local_terms_rescales_and_records():
    rng = np.random.default_rng(0)
    mats = [(j, random_hermitian(rng, 4, norm=2.0 + j)) for j in (1, 2, 3)]
    H = lat.from_local_terms(4, mats)
    assert H.scale_factor == pytest.approx(5.0)
    assert max(t.norm for t in H.terms) == pytest.approx(1.0)
    small = lat.from_local_terms(3, [(1, 0.5 * np.kron(ops.PAULI_Z, ops.PAULI_Z))])
    assert small.scale_factor == 1.0


def test_non_hermitian_term_rejected():
    with pytest.raises(lat.LatticeError):
        lat.LatticeTerm((1, 2), np.triu(np.ones((4, 4))))


def test_sectors_partition_and_block_structure():
    H = lat.heisenberg_random_field(6, 1.0, 3)
    sizes = sorted(len(s) for s in H.sectors)
    assert sizes == sorted([1, 6, 15, 20, 15, 6, 1])
    flat = np.sort(np.concatenate(H.sectors))
    np.testing.assert_array_equal(flat, np.arange(64))
    label = np.empty(64, dtype=int)
    for k, s in enumerate(H.sectors):
        label[s] = k
    rows, cols = np.nonzero(H.total_matrix())
    assert np.all(label[rows] == label[cols])
    assert len(lat.random_lattice(5, 2, 1).sectors) == 1
