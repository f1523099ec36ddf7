import numpy as np
import pytest

from cartanquiver import exactlinalg as la
from cartanquiver.errors import (
    DimensionMismatch,
    NonIntegerCoefficient,
    NotPrime,
    OverdeterminedMismatch,
)


def test_check_prime():
    assert la.check_prime(2) == 2
    assert la.check_prime(13) == 13
    with pytest.raises(NotPrime):
        la.check_prime(6)
    with pytest.raises(NotPrime):
        la.check_prime(1)


def test_rref_identity_and_zero():
    eye = la.identity(3)
    r, rank, piv = la.rref(eye, 5)
    assert np.array_equal(r, eye) and rank == 3 and piv == (0, 1, 2)
    z = la.zeros(2, 4)
    r, rank, piv = la.rref(z, 3)
    assert not r.any() and rank == 0 and piv == ()


def test_rref_mod2_collapse():
    r, rank, piv = la.rref(np.array([[1, 1], [1, 1]]), 2)
    assert np.array_equal(r, [[1, 1], [0, 0]])
    assert rank == 1


def test_rref_idempotent():
    rng = np.random.default_rng(7)
    for p in (2, 3, 5):
        for _ in range(20):
            a = rng.integers(0, p, size=(4, 6))
            r1, rank1, piv1 = la.rref(a, p)
            r2, rank2, piv2 = la.rref(r1, p)
            assert np.array_equal(r1, r2) and rank1 == rank2 and piv1 == piv2


def test_kernel_rank_nullity():
    rng = np.random.default_rng(3)
    for p in (2, 5):
        for _ in range(25):
            a = rng.integers(0, p, size=(3, 5))
            ker = la.kernel_basis_matrix(a, p)
            assert ker.shape[0] + la.rank(a, p) == a.shape[1]
            assert not ((a @ ker.T) % p).any()


def test_kernel_of_identity_trivial():
    assert la.kernel_basis_matrix(la.identity(4), 7).shape == (0, 4)


def test_solve_inconsistent():
    a = la.zeros(2, 3)
    assert la.solve(a, np.array([1, 0]), 5) is None


def test_solve_verified_by_substitution():
    rng = np.random.default_rng(11)
    for p in (2, 3, 5):
        for _ in range(25):
            a = rng.integers(0, p, size=(4, 3))
            x = rng.integers(0, p, size=3)
            b = (a @ x) % p
            part, ker = la.solve(a, b, p)
            assert np.array_equal((a @ part) % p, b)


def test_inv():
    rng = np.random.default_rng(5)
    p = 7
    for _ in range(10):
        while True:
            a = rng.integers(0, p, size=(4, 4))
            if la.is_invertible(a, p):
                break
        assert np.array_equal((a @ la.inv(a, p)) % p, la.identity(4))
    with pytest.raises(DimensionMismatch):
        la.inv(la.zeros(2, 2), 5)


class TestSubspace:
    def test_canonical_under_change_of_basis(self):
        rng = np.random.default_rng(1)
        p = 3
        rows = rng.integers(0, p, size=(2, 5))
        u = la.Subspace.from_rows(rows, 5, p)
        for _ in range(20):
            g = rng.integers(0, p, size=(2, 2))
            if la.rank(g, p) < 2:
                continue
            v = la.Subspace.from_rows((g @ rows) % p, 5, p)
            assert u == v and hash(u) == hash(v)

    def test_sum_and_intersection_self(self):
        u = la.Subspace.from_rows([[1, 0, 1], [0, 1, 0]], 3, 2)
        assert u + u == u
        assert u.intersection(u) == u

    def test_dimension_formula(self):
        rng = np.random.default_rng(4)
        p = 3
        for _ in range(30):
            u = la.Subspace.from_rows(rng.integers(0, p, size=(2, 4)), 4, p)
            v = la.Subspace.from_rows(rng.integers(0, p, size=(2, 4)), 4, p)
            s = u + v
            i = u.intersection(v)
            assert s.dim + i.dim == u.dim + v.dim
            assert s.contains(u) and s.contains(v)
            assert u.contains(i) and v.contains(i)

    def test_quotient_map_kernel(self):
        p = 5
        u = la.Subspace.from_rows([[1, 2, 0, 4], [0, 0, 1, 1]], 4, p)
        q, s = la.quotient_map(4, u)
        assert not ((q @ u.basis.T) % p).any()
        assert np.array_equal((q @ s) % p, la.identity(2))
        assert la.rank(q, p) == 2

    def test_coordinates(self):
        p = 3
        u = la.Subspace.from_rows([[1, 0, 2], [0, 1, 1]], 3, p)
        vec = (2 * u.basis[0] + u.basis[1]) % p
        coords = u.coordinates_rows(vec)
        assert np.array_equal(coords[0], [2, 1])
        with pytest.raises(DimensionMismatch):
            u.coordinates_rows(np.array([0, 0, 1]))


def test_image():
    a = np.array([[1, 2], [2, 4], [0, 0]])
    img = la.image(a, 5)
    assert img.dim == 1
    assert img.contains_rows(np.array([[1, 2, 0]]))


def test_gaussian_binomial_small():
    # independent product-formula values
    assert la.gaussian_binomial(4, 2, 2) == 35
    assert la.gaussian_binomial(3, 1, 3) == 13  # 1 + 3 + 9
    assert la.gaussian_binomial(5, 0, 2) == 1
    assert la.gaussian_binomial(5, 5, 3) == 1
    assert la.gaussian_binomial(2, 3, 2) == 0


@pytest.mark.parametrize("p", [2, 3])
def test_enumerate_subspaces_counts(p):
    for n in range(7):
        for d in range(n + 1):
            count = sum(1 for _ in la.enumerate_subspaces(n, d, p))
            assert count == la.gaussian_binomial(n, d, p)


def test_enumerate_subspaces_distinct():
    subs = list(la.enumerate_subspaces(4, 2, 2))
    assert len(subs) == len(set(subs)) == 35


def test_enumerate_subspaces_shards():
    full = set(la.enumerate_subspaces(4, 2, 3))
    sharded = set()
    for s in range(3):
        sharded.update(la.enumerate_subspaces(4, 2, 3, shard=(s, 3)))
    assert sharded == full


def test_lagrange_line():
    assert la.lagrange_interpolate([(2, 5), (3, 7)]) == (1, 2)


def test_lagrange_constant():
    assert la.lagrange_interpolate([(2, 4), (5, 4), (7, 4)],
                                   degree_bound=0) == (4,)


def test_lagrange_overdetermined_mismatch():
    with pytest.raises(OverdeterminedMismatch):
        la.lagrange_interpolate([(2, 5), (3, 7), (5, 12)], degree_bound=1)


def test_lagrange_non_integer():
    with pytest.raises(NonIntegerCoefficient):
        la.lagrange_interpolate([(0, 0), (2, 1)], degree_bound=1)


def test_lagrange_quadratic_exact():
    pts = [(q, 3 * q * q - q + 2) for q in (2, 3, 5, 7)]
    assert la.lagrange_interpolate(pts, degree_bound=2) == (2, -1, 3)


def test_stable_seed_deterministic():
    s1 = la.stable_seed((0, "split", (1, 2)))
    s2 = la.stable_seed((0, "split", (1, 2)))
    assert s1 == s2
    assert la.stable_seed((0, "a")) != la.stable_seed((0, "b"))


def test_kernel_basis_subspace():
    a = np.array([[1, 1, 0], [0, 0, 1]])
    ker = la.kernel_basis(a, 2)
    assert ker.dim == 1
    assert ker.contains_rows(np.array([[1, 1, 0]]))
