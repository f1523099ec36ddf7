"""Symmetrizable Cartan data, orientations and the associated quiver.

A datum consists of a symmetrizable generalized Cartan matrix C (2 on the
diagonal, non-positive off the diagonal), a symmetrizer D = diag(c_1..c_n)
with c_i * c_ij = c_j * c_ji, and an acyclic orientation Omega of the pairs
with c_ij < 0.  The derived quantities g_ij = |gcd(c_ij, c_ji)| and
f_ij = |c_ij| / g_ij are stored on the datum.  The whole family of algebras
indexed by k >= 1 shares one datum: every operation that depends on the
symmetrizer takes k separately and applies k*D on the fly.

Vertices are 1-indexed in all file I/O and error messages, 0-indexed in
code.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import (
    BothDirections,
    CycleInOrientation,
    DiagonalNotTwo,
    LengthMismatch,
    MissingPair,
    NonPositiveSymmetrizer,
    PositiveOffDiagonal,
    SymmetrizerMismatch,
    ValidationError,
)


class RankVector(tuple):
    """A tuple of non-negative integers, one per vertex.

    Componentwise addition and comparison; the dimension vector of a
    locally free module with this rank is (k*c_1*r_1, ..., k*c_n*r_n).
    """

    def __new__(cls, entries: Iterable[int]):
        vals = tuple(int(x) for x in entries)
        if any(x < 0 for x in vals):
            raise ValidationError(f"rank vector must be >= 0, got {vals}")
        return super().__new__(cls, vals)

    def __add__(self, other):
        self._match(other)
        return RankVector(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        self._match(other)
        return RankVector(a - b for a, b in zip(self, other))

    def __le__(self, other):
        self._match(other)
        return all(a <= b for a, b in zip(self, other))

    def __ge__(self, other):
        return RankVector(other) <= self

    def _match(self, other):
        if len(self) != len(other):
            raise LengthMismatch(f"length {len(self)} vs {len(other)}")

    def total(self) -> int:
        return sum(self)

    def dims(self, datum: "CartanDatum", k: int) -> tuple[int, ...]:
        """Dimension vector (k * c_i * r_i)."""
        return tuple(k * c * r for c, r in zip(datum.d, self))

    @staticmethod
    def unit(n: int, i: int) -> "RankVector":
        return RankVector(1 if t == i else 0 for t in range(n))

    @staticmethod
    def zero(n: int) -> "RankVector":
        return RankVector([0] * n)


@dataclass(frozen=True)
class CartanDatum:
    """Validated Cartan matrix, symmetrizer and (optional) orientation."""

    n: int
    c: tuple[tuple[int, ...], ...]       # Cartan matrix, row major
    d: tuple[int, ...]                   # symmetrizer diagonal
    omega: Optional[frozenset[tuple[int, int]]] = None

    def g(self, i: int, j: int) -> int:
        return abs(math.gcd(self.c[i][j], self.c[j][i]))

    def f(self, i: int, j: int) -> int:
        return abs(self.c[i][j]) // self.g(i, j)

    @property
    def edges(self) -> list[tuple[int, int]]:
        """Unordered pairs {i, j} with c_ij < 0, as sorted tuples."""
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n)
                if self.c[i][j] < 0]

    def oriented_pairs(self) -> list[tuple[int, int]]:
        if self.omega is None:
            raise ValidationError("datum has no orientation attached")
        return sorted(self.omega)

    def with_orientation(self, omega) -> "CartanDatum":
        return validate_orientation(self, omega)


def validate_cartan(c, d) -> CartanDatum:
    """Check the axioms of a symmetrizable Cartan matrix with symmetrizer."""
    rows = [tuple(int(x) for x in row) for row in c]
    n = len(rows)
    if any(len(row) != n for row in rows):
        raise ValidationError("Cartan matrix must be square")
    dd = tuple(int(x) for x in d)
    if len(dd) != n:
        raise LengthMismatch(f"symmetrizer length {len(dd)} != {n}")
    if any(x <= 0 for x in dd):
        raise NonPositiveSymmetrizer(f"symmetrizer must be positive: {dd}")
    for i in range(n):
        if rows[i][i] != 2:
            raise DiagonalNotTwo(f"c_{i + 1}{i + 1} = {rows[i][i]} != 2")
        for j in range(n):
            if i != j and rows[i][j] > 0:
                raise PositiveOffDiagonal(
                    f"c_{i + 1}{j + 1} = {rows[i][j]} > 0")
    for i in range(n):
        for j in range(n):
            if dd[i] * rows[i][j] != dd[j] * rows[j][i]:
                raise SymmetrizerMismatch(
                    f"c_{i + 1}*c_{i + 1}{j + 1} != c_{j + 1}*c_{j + 1}{i + 1}"
                    f" ({dd[i]}*{rows[i][j]} != {dd[j]}*{rows[j][i]})")
    return CartanDatum(n, tuple(rows), dd)


def validate_orientation(datum: CartanDatum, omega) -> CartanDatum:
    """Attach an orientation: one direction per negative pair, no cycles."""
    pairs = frozenset((int(i), int(j)) for i, j in omega)
    for i, j in pairs:
        if not (0 <= i < datum.n and 0 <= j < datum.n) or i == j:
            raise ValidationError(f"bad orientation pair ({i + 1},{j + 1})")
        if datum.c[i][j] >= 0:
            raise ValidationError(
                f"({i + 1},{j + 1}) oriented but c_{i + 1}{j + 1} >= 0")
        if (j, i) in pairs:
            raise BothDirections(
                f"both ({i + 1},{j + 1}) and ({j + 1},{i + 1}) present")
    for i, j in datum.edges:
        if (i, j) not in pairs and (j, i) not in pairs:
            raise MissingPair(
                f"edge {{{i + 1},{j + 1}}} has no direction")
    _check_acyclic(datum.n, pairs)
    return CartanDatum(datum.n, datum.c, datum.d, pairs)


def _check_acyclic(n: int, pairs: frozenset[tuple[int, int]]):
    # DFS on the directed graph of oriented pairs; loops are not part of it.
    succ = {v: [] for v in range(n)}
    for i, j in pairs:
        succ[i].append(j)
    color = [0] * n
    for start in range(n):
        if color[start]:
            continue
        stack = [(start, iter(succ[start]))]
        color[start] = 1
        while stack:
            v, it = stack[-1]
            for w in it:
                if color[w] == 1:
                    raise CycleInOrientation(
                        f"orientation contains a directed cycle through "
                        f"vertex {w + 1}")
                if color[w] == 0:
                    color[w] = 1
                    stack.append((w, iter(succ[w])))
                    break
            else:
                color[v] = 2
                stack.pop()


def suggest_orientation(datum: CartanDatum) -> frozenset[tuple[int, int]]:
    """An orientation that always validates: direct every edge upward."""
    return frozenset((i, j) for i, j in datum.edges)


@dataclass(frozen=True)
class Quiver:
    """The quiver with g_ij parallel arrows j -> i per oriented pair and one
    loop per vertex; loop at i has nilpotency order k*c_i."""

    n: int
    loop_orders: tuple[int, ...]
    arrows: tuple[tuple[int, int, int], ...]   # (target i, source j, copy g)

    def arrow_count(self) -> int:
        return len(self.arrows)


def build_quiver(datum: CartanDatum, k: int) -> Quiver:
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    arrows = []
    for i, j in datum.oriented_pairs():
        for g in range(datum.g(i, j)):
            arrows.append((i, j, g))
    orders = tuple(k * c for c in datum.d)
    return Quiver(datum.n, orders, tuple(arrows))


def euler_form(datum: CartanDatum, a, b, k: int = 1) -> int:
    """<a,b> = sum_i k*c_i*a_i*b_i + sum_{(i,j) in Omega} k*c_i*c_ij*a_j*b_i.

    On rank vectors of locally free modules this equals
    dim Hom - dim Ext^1 for the algebra with symmetrizer k*D.
    """
    a = _vec(datum, a)
    b = _vec(datum, b)
    total = sum(k * c * x * y for c, x, y in zip(datum.d, a, b))
    for i, j in datum.oriented_pairs():
        total += k * datum.d[i] * datum.c[i][j] * a[j] * b[i]
    return total


def symmetrizer_form(datum: CartanDatum, a, b, k: int = 1) -> int:
    """The symmetric form of diag(k*c_1, ..., k*c_n); no arrow terms."""
    a = _vec(datum, a)
    b = _vec(datum, b)
    return sum(k * c * x * y for c, x, y in zip(datum.d, a, b))


def flag_dimension(datum: CartanDatum, brseq: Sequence) -> int:
    """d(brseq) = sum_{a<b} <r_a, r_b> at k = 1.

    The flag variety with subquotient ranks brseq has dimension k*d(brseq)
    (when non-empty), and d(brseq) is the fiber dimension of the reduction
    map between levels k and k-1.
    """
    seq = [_vec(datum, r) for r in brseq]
    if len(seq) < 1:
        raise LengthMismatch("flag rank sequence must be non-empty")
    total = 0
    for s in range(len(seq)):
        for t in range(s + 1, len(seq)):
            total += euler_form(datum, seq[s], seq[t], k=1)
    return total


def _vec(datum: CartanDatum, r) -> tuple[int, ...]:
    v = tuple(int(x) for x in r)
    if len(v) != datum.n:
        raise LengthMismatch(f"vector length {len(v)} != {datum.n}")
    return v


# --- configuration files ----------------------------------------------------

def datum_from_dict(cfg: dict) -> tuple[CartanDatum, int, int]:
    """Build (datum with orientation, k, p) from a config mapping.

    Keys: n, C (row major), D (list), omega (1-indexed pairs), optional k
    (default 1) and p (default 5).
    """
    try:
        n = int(cfg["n"])
        c = cfg["C"]
        d = cfg["D"]
        omega_raw = cfg["omega"]
    except KeyError as exc:
        raise ValidationError(f"config missing key {exc}") from exc
    datum = validate_cartan(c, d)
    if datum.n != n:
        raise ValidationError(f"n = {n} does not match C ({datum.n} rows)")
    omega = [(int(i) - 1, int(j) - 1) for i, j in omega_raw]
    datum = validate_orientation(datum, omega)
    k = int(cfg.get("k", 1))
    p = int(cfg.get("p", 5))
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    return datum, k, p


def load_config(path: str) -> tuple[CartanDatum, int, int]:
    """Read a JSON or TOML config file (TOML needs Python >= 3.11)."""
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError as exc:
            raise ValidationError(
                "TOML configs need Python >= 3.11; use JSON") from exc
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    else:
        with open(path) as fh:
            cfg = json.load(fh)
    return datum_from_dict(cfg)
