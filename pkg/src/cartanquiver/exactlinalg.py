"""Exact linear algebra over prime fields F_p.

Matrices are numpy int64 arrays with entries in {0, ..., p-1}; they act on
column vectors.  Subspaces are stored through their unique reduced
row-echelon basis, so two equal subspaces always compare (and hash) equal.
The module also provides echelon-form subspace enumeration, Gaussian
binomials and exact Lagrange interpolation over the integers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InternalCheckError,
    NonIntegerCoefficient,
    NotPrime,
    OverdeterminedMismatch,
)

_PRIME_CACHE: set[int] = set()


def stable_seed(obj) -> int:
    """Deterministic 64-bit seed from any repr-stable object (nested tuples
    of ints and strings); independent of PYTHONHASHSEED."""
    import hashlib

    digest = hashlib.blake2b(repr(obj).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def rng_from(seed) -> np.random.Generator:
    """Build a Generator from an int, a Generator, or any stable object."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (int, np.integer)):
        return np.random.default_rng(int(seed))
    return np.random.default_rng(stable_seed(seed))


def check_prime(p: int) -> int:
    """Return p if it is prime, raise NotPrime otherwise."""
    if p in _PRIME_CACHE:
        return p
    if p < 2 or any(p % d == 0 for d in range(2, int(p**0.5) + 1)):
        raise NotPrime(f"modulus {p} is not prime")
    _PRIME_CACHE.add(p)
    return p


def asmatrix(a, p: int) -> np.ndarray:
    """Coerce to an int64 array with entries reduced mod p."""
    m = np.asarray(a, dtype=np.int64) % p
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got ndim={m.ndim}")
    return m


def zeros(rows: int, cols: int) -> np.ndarray:
    return np.zeros((rows, cols), dtype=np.int64)


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=np.int64)


def matmul(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    return (a @ b) % p


def matpow(a: np.ndarray, e: int, p: int) -> np.ndarray:
    """a**e mod p by repeated squaring, reducing at every product."""
    n = a.shape[0]
    result = identity(n)
    base = a % p
    while e > 0:
        if e & 1:
            result = (result @ base) % p
        base = (base @ base) % p
        e >>= 1
    return result


def inv_mod(x: int, p: int) -> int:
    return pow(int(x), p - 2, p)


def rref(a: np.ndarray, p: int) -> tuple[np.ndarray, int, tuple[int, ...]]:
    """Reduced row echelon form of a mod p.

    Returns (R, rank, pivot_columns); R is a fresh array, the input is not
    modified.  The RREF is the canonical representative of the row space.
    """
    m = (np.array(a, dtype=np.int64) % p).reshape(a.shape)
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        i = r + int(nz[0])
        if i != r:
            m[[r, i]] = m[[i, r]]
        piv = int(m[r, c])
        if piv != 1:
            m[r] = (m[r] * inv_mod(piv, p)) % p
        col = m[:, c].copy()
        col[r] = 0
        nzrows = np.nonzero(col)[0]
        if nzrows.size:
            m[nzrows] = (m[nzrows] - np.outer(col[nzrows], m[r])) % p
        pivots.append(c)
        r += 1
    return m, r, tuple(pivots)


def rank(a: np.ndarray, p: int) -> int:
    return rref(a, p)[1]


def inv(a: np.ndarray, p: int) -> np.ndarray:
    """Inverse of a square matrix mod p; raises if singular."""
    n = a.shape[0]
    if a.shape != (n, n):
        raise DimensionMismatch(f"inv: matrix {a.shape} is not square")
    r, rk, _ = rref(np.concatenate([a % p, identity(n)], axis=1), p)
    if rk < n or not np.array_equal(r[:, :n], identity(n)):
        raise DimensionMismatch("inv: matrix is singular")
    return r[:, n:]


def is_invertible(a: np.ndarray, p: int) -> bool:
    n = a.shape[0]
    return a.shape == (n, n) and rank(a, p) == n


def kernel_basis_and_support(a: np.ndarray, p: int
                             ) -> tuple[np.ndarray, tuple[int, ...]]:
    """Kernel basis rows plus the free columns where they read off as
    coordinates: basis[t, support[t]] == 1 and 0 at the other support
    columns, so the coefficients of any kernel vector are its values at
    the support columns."""
    rows, cols = a.shape
    r, rk, pivots = rref(a, p)
    free = [c for c in range(cols) if c not in pivots]
    basis = zeros(len(free), cols)
    for t, f in enumerate(free):
        basis[t, f] = 1
        for row, c in enumerate(pivots):
            basis[t, c] = (-r[row, f]) % p
    return basis, tuple(free)


def kernel_basis_matrix(a: np.ndarray, p: int) -> np.ndarray:
    """Rows span the right kernel {x : a @ x == 0 mod p}."""
    return kernel_basis_and_support(a, p)[0]


def kernel_basis(a: np.ndarray, p: int) -> "Subspace":
    """Right kernel as a canonical subspace."""
    return Subspace.from_rows(kernel_basis_matrix(a, p), a.shape[1], p)


def image(a: np.ndarray, p: int) -> "Subspace":
    """Column space of a as a canonical subspace."""
    return Subspace.from_rows(a.T, a.shape[0], p)


def solve(a: np.ndarray, b: np.ndarray, p: int):
    """Solve a @ x = b mod p for a column vector (or stacked columns) b.

    Returns (particular, kernel_rows) or None when inconsistent.  Every
    returned solution is verified by substitution.
    """
    b = np.asarray(b, dtype=np.int64) % p
    single = b.ndim == 1
    bc = b.reshape(-1, 1) if single else b
    if bc.shape[0] != a.shape[0]:
        raise DimensionMismatch(
            f"solve: {a.shape} vs right-hand side {bc.shape}"
        )
    aug = np.concatenate([a % p, bc], axis=1)
    r, rk, pivots = rref(aug, p)
    ncols = a.shape[1]
    if any(c >= ncols for c in pivots):
        return None
    x = zeros(ncols, bc.shape[1])
    for row, c in enumerate(pivots):
        x[c] = r[row, ncols:]
    if ((a @ x - bc) % p).any():
        raise InternalCheckError("solve: substitution check failed")
    part = x[:, 0] if single else x
    return part, kernel_basis_matrix(a, p)


@dataclass(frozen=True)
class FpMatrix:
    """A matrix over F_p.  Entries live in {0,...,p-1}; p is checked prime."""

    p: int
    array: np.ndarray

    def __post_init__(self):
        check_prime(self.p)
        arr = asmatrix(self.array, self.p)
        arr.setflags(write=False)
        object.__setattr__(self, "array", arr)

    @property
    def rows(self) -> int:
        return self.array.shape[0]

    @property
    def cols(self) -> int:
        return self.array.shape[1]

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, FpMatrix):
            if other.p != self.p:
                raise DimensionMismatch("mixed moduli")
            return other.array
        return asmatrix(other, self.p)

    def __matmul__(self, other) -> "FpMatrix":
        return FpMatrix(self.p, (self.array @ self._coerce(other)) % self.p)

    def __add__(self, other) -> "FpMatrix":
        return FpMatrix(self.p, (self.array + self._coerce(other)) % self.p)

    def __sub__(self, other) -> "FpMatrix":
        return FpMatrix(self.p, (self.array - self._coerce(other)) % self.p)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FpMatrix):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.array, other.array)

    def __hash__(self):
        return hash((self.p, self.array.shape, self.array.tobytes()))

    def rref(self) -> tuple["FpMatrix", int, tuple[int, ...]]:
        r, rk, piv = rref(self.array, self.p)
        return FpMatrix(self.p, r), rk, piv

    def rank(self) -> int:
        return rank(self.array, self.p)

    def kernel(self) -> "Subspace":
        return Subspace.from_rows(kernel_basis_matrix(self.array, self.p),
                                  self.cols, self.p)

    def image(self) -> "Subspace":
        return Subspace.from_rows(self.array.T, self.rows, self.p)


@dataclass(frozen=True)
class Subspace:
    """A subspace of F_p^n, canonically represented by its RREF basis rows."""

    p: int
    ambient: int
    basis: np.ndarray = field(compare=False)
    pivots: tuple[int, ...] = field(compare=False, default=())

    @staticmethod
    def from_rows(rows, ambient: int, p: int) -> "Subspace":
        if ambient == 0:
            empty = zeros(0, 0)
            empty.setflags(write=False)
            return Subspace(p, 0, empty, ())
        m = asmatrix(np.asarray(rows, dtype=np.int64).reshape(-1, ambient), p)
        r, rk, piv = rref(m, p)
        b = r[:rk]
        b.setflags(write=False)
        return Subspace(p, ambient, b, piv)

    @staticmethod
    def zero(ambient: int, p: int) -> "Subspace":
        return Subspace.from_rows(zeros(0, ambient), ambient, p)

    @staticmethod
    def full(ambient: int, p: int) -> "Subspace":
        return Subspace.from_rows(identity(ambient), ambient, p)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Subspace):
            return NotImplemented
        return (self.p == other.p and self.ambient == other.ambient
                and np.array_equal(self.basis, other.basis))

    def __hash__(self):
        return hash((self.p, self.ambient, self.basis.tobytes()))

    def reduce_rows(self, vectors: np.ndarray) -> np.ndarray:
        """Residue of row vectors after subtracting their projection onto
        the subspace along the pivot coordinates."""
        v = np.atleast_2d(np.asarray(vectors, dtype=np.int64)) % self.p
        if v.shape[1] != self.ambient:
            raise DimensionMismatch("wrong ambient dimension")
        if self.dim == 0:
            return v
        coeff = v[:, list(self.pivots)]
        return (v - coeff @ self.basis) % self.p

    def contains_rows(self, vectors) -> bool:
        return not self.reduce_rows(np.asarray(vectors)).any()

    def contains(self, other: "Subspace") -> bool:
        if other.dim == 0:
            return True
        return self.contains_rows(other.basis)

    def coordinates_rows(self, vectors: np.ndarray) -> np.ndarray:
        """Coefficients of row vectors in the RREF basis; vectors must lie
        in the subspace."""
        v = np.atleast_2d(np.asarray(vectors, dtype=np.int64)) % self.p
        if self.reduce_rows(v).any():
            raise DimensionMismatch("vector not in subspace")
        if self.dim == 0:
            return zeros(v.shape[0], 0)
        return v[:, list(self.pivots)]

    def __add__(self, other: "Subspace") -> "Subspace":
        self._check(other)
        return Subspace.from_rows(
            np.concatenate([self.basis, other.basis]), self.ambient, self.p)

    def intersection(self, other: "Subspace") -> "Subspace":
        # x = a @ U = b @ V; solve for (a, b) in the kernel of [U^T | -V^T].
        self._check(other)
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(self.ambient, self.p)
        stacked = np.concatenate([self.basis.T, (-other.basis.T) % self.p],
                                 axis=1)
        ker = kernel_basis_matrix(stacked, self.p)
        vecs = (ker[:, :self.dim] @ self.basis) % self.p
        return Subspace.from_rows(vecs, self.ambient, self.p)

    def _check(self, other: "Subspace"):
        if self.p != other.p or self.ambient != other.ambient:
            raise DimensionMismatch("subspaces live in different spaces")


def quotient_map(ambient: int, sub: Subspace) -> tuple[np.ndarray, np.ndarray]:
    """Projection q onto F_p^n / U together with a section s.

    q has shape (n - dim U, n) and kernel exactly U; s has shape
    (n, n - dim U) and q @ s = identity.  The quotient coordinates are the
    non-pivot coordinates of U's RREF basis.
    """
    if sub.ambient != ambient:
        raise DimensionMismatch("subspace does not match ambient dimension")
    p = sub.p
    others = [c for c in range(ambient) if c not in sub.pivots]
    q = zeros(len(others), ambient)
    for t, c in enumerate(others):
        q[t, c] = 1
    if sub.dim:
        # subtract the U-component read off at the pivot coordinates
        q[:, list(sub.pivots)] = (-sub.basis[:, others].T) % p
    s = zeros(ambient, len(others))
    for t, c in enumerate(others):
        s[c, t] = 1
    if sub.dim and ((q @ sub.basis.T) % p).any():
        raise InternalCheckError("quotient_map: kernel check failed")
    return q, s


def gaussian_binomial(n: int, d: int, q: int) -> int:
    """Number of d-dimensional subspaces of F_q^n (exact integer)."""
    if d < 0 or d > n:
        return 0
    num = 1
    den = 1
    for t in range(d):
        num *= q ** (n - t) - 1
        den *= q ** (t + 1) - 1
    assert num % den == 0
    return num // den


def enumerate_subspaces(ambient: int, d: int, p: int,
                        shard: Optional[tuple[int, int]] = None
                        ) -> Iterator[Subspace]:
    """Yield every d-dimensional subspace of F_p^n exactly once.

    Subspaces are produced directly in RREF: one pivot-column pattern at a
    time, with the free entries (right of each pivot, off the other pivot
    columns) running over F_p.  `shard=(s, w)` keeps only every w-th pivot
    pattern starting at s, which splits the stream into independent chunks.
    """
    check_prime(p)
    if d < 0 or d > ambient:
        return
    if d == 0:
        if shard is None or shard[0] == 0:
            yield Subspace.zero(ambient, p)
        return
    for idx, pivots in enumerate(itertools.combinations(range(ambient), d)):
        if shard is not None and idx % shard[1] != shard[0]:
            continue
        free_pos = [(row, c) for row in range(d)
                    for c in range(pivots[row] + 1, ambient)
                    if c not in pivots]
        base = zeros(d, ambient)
        for row, c in enumerate(pivots):
            base[row, c] = 1
        for values in itertools.product(range(p), repeat=len(free_pos)):
            m = base.copy()
            for (row, c), v in zip(free_pos, values):
                m[row, c] = v
            b = m.copy()
            b.setflags(write=False)
            yield Subspace(p, ambient, b, tuple(pivots))


def lagrange_interpolate(points: Sequence[tuple[int, int]],
                         degree_bound: Optional[int] = None
                         ) -> tuple[int, ...]:
    """Integer-coefficient polynomial through (q, value) points.

    Interpolates on the first degree_bound + 1 points and checks the rest;
    raises NonIntegerCoefficient when the unique interpolant is not an
    integer polynomial, OverdeterminedMismatch when a surplus point
    disagrees.  Coefficients are returned in ascending degree.
    """
    qs = [q for q, _ in points]
    if len(set(qs)) != len(qs):
        raise DimensionMismatch("interpolation points must be distinct")
    if degree_bound is None:
        degree_bound = len(points) - 1
    if degree_bound < 0 or len(points) < degree_bound + 1:
        raise DimensionMismatch(
            f"need {degree_bound + 1} points, got {len(points)}")
    use = list(points[:degree_bound + 1])
    # Lagrange form with exact rational arithmetic
    coeffs = [Fraction(0)] * (degree_bound + 1)
    for qi, vi in use:
        basis = [Fraction(1)]
        denom = Fraction(1)
        for qj, _ in use:
            if qj == qi:
                continue
            denom *= Fraction(qi - qj)
            # multiply basis polynomial by (x - qj)
            nxt = [Fraction(0)] * (len(basis) + 1)
            for t, c in enumerate(basis):
                nxt[t] -= c * qj
                nxt[t + 1] += c
            basis = nxt
        scale = Fraction(vi) / denom
        for t, c in enumerate(basis):
            coeffs[t] += scale * c
    if any(c.denominator != 1 for c in coeffs):
        raise NonIntegerCoefficient(
            f"interpolant has non-integer coefficients: {coeffs}")
    out = tuple(int(c) for c in coeffs)
    for q, v in points[degree_bound + 1:]:
        if eval_poly(out, q) != v:
            raise OverdeterminedMismatch(
                f"degree-{degree_bound} fit misses point ({q}, {v})")
    return out


def eval_poly(coeffs: Sequence[int], x: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc
