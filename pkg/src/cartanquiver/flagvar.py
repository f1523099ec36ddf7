"""Flag varieties of locally free submodules: enumeration, point counts,
tangent spaces, and the fibers of the reduction map between levels.

Enumeration works per vertex first: the free rank-e submodules of a free
module over F_p[x]/(x^m) are generated directly from ring-echelon charts
(pivot rows carry the identity, rows between pivots are constrained to
higher x-degree), which hits every eps-invariant free-restriction subspace
exactly once; arrow closure is then filtered across vertices.  Flags of
length l are translated into single submodules of the repetitive module
over the tensor algebra with the path algebra of a linear quiver on l-1
vertices; that translation also provides tangent spaces (one Hom solve)
and the affine linear system cutting out the fiber of the reduction map
over a fixed lower-level flag.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from . import exactlinalg as la
from . import hmod, homext
from . import reduction
from .cartan import CartanDatum, RankVector, flag_dimension
from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    FlagNotInReduction,
    InternalCheckError,
    KTooSmall,
    LengthMismatch,
    NotEnoughPrimes,
    NotLocallyFree,
    RankTooLarge,
    ShapeMismatch,
    ValidationError,
)
from .exactlinalg import Subspace
from .hmod import HModule

DEFAULT_PRIMES = (2, 3, 5, 7, 11, 13)
DEFAULT_VERTEX_CANDIDATE_BUDGET = 10 ** 7


# --- free submodules of one truncated polynomial column ----------------------

def _chart_free_positions(pivots: tuple[int, ...], r: int, e: int
                          ) -> list[tuple[int, int, int]]:
    """(row, col, min_degree) for the free ring entries of a chart."""
    out = []
    for q in range(r):
        if q in pivots:
            continue
        t = sum(1 for piv in pivots if piv < q)
        for col in range(e):
            out.append((q, col, 0 if col < t else 1))
    return out


def chart_count(m_order: int, r: int, e: int, p: int) -> int:
    """Number of free rank-e submodules of a free rank-r column."""
    total = 0
    for pivots in itertools.combinations(range(r), e):
        exp = 0
        for _, _, min_deg in _chart_free_positions(pivots, r, e):
            exp += m_order - min_deg
        total += p ** exp
    return total


def iter_ring_charts(m_order: int, r: int, e: int, p: int
                     ) -> Iterator[np.ndarray]:
    """All ring matrices (r x e x m_order coefficient arrays) whose column
    spans run over the free rank-e submodules, one matrix per submodule."""
    if e < 0 or e > r:
        return
    if e == 0:
        yield np.zeros((r, 0, m_order), dtype=np.int64)
        return
    for pivots in itertools.combinations(range(r), e):
        positions = _chart_free_positions(pivots, r, e)
        ranges = [range(p ** (m_order - mind)) for _, _, mind in positions]
        for codes in itertools.product(*ranges):
            mat = np.zeros((r, e, m_order), dtype=np.int64)
            for col, piv in enumerate(pivots):
                mat[piv, col, 0] = 1
            for (row, col, mind), code in zip(positions, codes):
                for t in range(mind, m_order):
                    code, digit = divmod(code, p)
                    mat[row, col, t] = digit
            yield mat


def ring_matrix_to_subspace(ring_mat: np.ndarray, m_order: int, r: int,
                            p: int) -> Subspace:
    """K-span of the ring columns and all their eps-shifts inside the
    generator-major standard basis of a free rank-r column."""
    e = ring_mat.shape[1]
    rows = la.zeros(e * m_order, r * m_order)
    for col in range(e):
        for shift in range(m_order):
            vec = rows[col * m_order + shift]
            for s in range(r):
                for deg in range(m_order - shift):
                    vec[s * m_order + deg + shift] = ring_mat[s, col, deg]
    return Subspace.from_rows(rows, r * m_order, p)


def free_submodule_subspace(m: HModule, vertex: int,
                            ring_mat) -> Subspace:
    """Subspace of M_vertex spanned by explicit ring columns (standard form)."""
    if not m.standard_form:
        raise ShapeMismatch("module must be in standard loop form")
    order = m.loop_order(vertex)
    r = m.dims[vertex] // order
    ring_mat = np.asarray(ring_mat, dtype=np.int64) % m.p
    if ring_mat.ndim == 2:
        padded = np.zeros(ring_mat.shape + (order,), dtype=np.int64)
        padded[:, :, 0] = ring_mat
        ring_mat = padded
    if ring_mat.shape[0] != r or ring_mat.shape[2] != order:
        raise ShapeMismatch(f"ring matrix shape {ring_mat.shape} does not "
                            f"match rank {r}, order {order}")
    return ring_matrix_to_subspace(ring_mat, order, r, m.p)


_CANDIDATE_CACHE_LIMIT = 20000


@functools.lru_cache(maxsize=None)
def _vertex_candidates(m_order: int, r: int, e: int, p: int
                       ) -> tuple[Subspace, ...]:
    return tuple(ring_matrix_to_subspace(mat, m_order, r, p)
                 for mat in iter_ring_charts(m_order, r, e, p))


def _vertex_candidate_stream(m_order: int, r: int, e: int, p: int):
    if chart_count(m_order, r, e, p) <= _CANDIDATE_CACHE_LIMIT:
        return iter(_vertex_candidates(m_order, r, e, p))
    return (ring_matrix_to_subspace(mat, m_order, r, p)
            for mat in iter_ring_charts(m_order, r, e, p))


# --- submodule and flag enumeration ------------------------------------------

def _active_arrows(m: HModule, rank: RankVector, e: RankVector):
    """Arrows whose closure condition actually constrains the choice: the
    image of a zero layer is zero, and a full layer contains everything."""
    active = []
    for (i, j), mats in m.arrows.items():
        if e[j] == 0 or e[i] == rank[i]:
            continue
        for a in mats:
            if a.any():
                active.append((i, j, a))
    return active


def _check_budgets(m: HModule, rank, e, max_candidates, override_budget):
    for i in range(m.n):
        count = chart_count(m.loop_order(i), rank[i], e[i], m.p)
        if count > max_candidates and not override_budget:
            raise BudgetExceeded(
                f"vertex {i + 1} has {count} candidate submodules; "
                f"pass override_budget=True to proceed")


def iter_locally_free_submodules(
        m: HModule, e, max_candidates: int = DEFAULT_VERTEX_CANDIDATE_BUDGET,
        override_budget: bool = False) -> Iterator[tuple[Subspace, ...]]:
    """Stream every tuple of per-vertex free submodules of rank e closed
    under all arrows, exactly once each (charts are disjoint)."""
    rank = hmod.rank_vector(m)
    e = RankVector(e)
    if not (e <= rank):
        raise RankTooLarge(f"requested rank {tuple(e)} exceeds {tuple(rank)}")
    std, ts = (m, None) if m.standard_form else hmod.normalize(m)
    if ts is not None:
        for tup in iter_locally_free_submodules(std, e, max_candidates,
                                                override_budget):
            yield tuple(Subspace.from_rows((sub.basis @ ts[i].T) % m.p,
                                           m.dims[i], m.p)
                        for i, sub in enumerate(tup))
        return
    _check_budgets(m, rank, e, max_candidates, override_budget)
    active = _active_arrows(m, rank, e)
    arrows_by_vertex: dict[int, list] = {i: [] for i in range(m.n)}
    for i, j, a in active:
        arrows_by_vertex[max(i, j)].append((i, j, a))
    chosen: list[Subspace] = []

    def extend(idx: int):
        if idx == m.n:
            yield tuple(chosen)
            return
        for cand in _vertex_candidate_stream(
                m.loop_order(idx), rank[idx], e[idx], m.p):
            chosen.append(cand)
            ok = True
            for i, j, a in arrows_by_vertex[idx]:
                image = (a @ chosen[j].basis.T).T
                if not chosen[i].contains_rows(image):
                    ok = False
                    break
            if ok:
                yield from extend(idx + 1)
            chosen.pop()

    yield from extend(0)


def enumerate_locally_free_submodules(
        m: HModule, e, max_candidates: int = DEFAULT_VERTEX_CANDIDATE_BUDGET,
        override_budget: bool = False) -> list[tuple[Subspace, ...]]:
    return list(iter_locally_free_submodules(m, e, max_candidates,
                                             override_budget))


def count_locally_free_submodules(
        m: HModule, e, max_candidates: int = DEFAULT_VERTEX_CANDIDATE_BUDGET,
        override_budget: bool = False) -> int:
    """Grassmannian point count with the unconstrained vertices counted in
    closed form; only vertices touched by an active arrow are enumerated."""
    rank = hmod.rank_vector(m)
    e = RankVector(e)
    if not (e <= rank):
        raise RankTooLarge(f"requested rank {tuple(e)} exceeds {tuple(rank)}")
    std = m if m.standard_form else hmod.normalize(m)[0]
    active = _active_arrows(std, rank, e)
    coupled = {v for (i, j, _) in active for v in (i, j)}
    free_factor = 1
    for i in range(std.n):
        if i not in coupled:
            free_factor *= chart_count(std.loop_order(i), rank[i], e[i],
                                       std.p)
    if not coupled:
        return free_factor
    _check_budgets(std, rank, e, max_candidates, override_budget)
    arrows_by_vertex: dict[int, list] = {i: [] for i in range(std.n)}
    for i, j, a in active:
        arrows_by_vertex[max(i, j)].append((i, j, a))
    order = sorted(coupled)
    chosen: dict[int, Subspace] = {}

    def count_from(idx: int) -> int:
        if idx == len(order):
            return 1
        v = order[idx]
        total = 0
        for cand in _vertex_candidate_stream(
                std.loop_order(v), rank[v], e[v], std.p):
            chosen[v] = cand
            ok = True
            for i, j, a in arrows_by_vertex[v]:
                if i in chosen and j in chosen:
                    image = (a @ chosen[j].basis.T).T
                    if not chosen[i].contains_rows(image):
                        ok = False
                        break
            if ok:
                total += count_from(idx + 1)
            del chosen[v]
        return total

    return free_factor * count_from(0)


@dataclass(frozen=True, eq=False)
class FlagOfSubmodules:
    """A chain of per-vertex subspaces 0 < U_1 < ... < U_{l-1} < M realizing
    a point of the flag variety with subquotient ranks brseq."""

    module: HModule
    brseq: tuple[RankVector, ...]
    layers: tuple[tuple[Subspace, ...], ...]

    @property
    def length(self) -> int:
        return len(self.brseq)

    def layer_ranks(self) -> tuple[RankVector, ...]:
        acc = RankVector.zero(self.module.n)
        out = []
        for r in self.brseq[:-1]:
            acc = acc + r
            out.append(acc)
        return tuple(out)

    def validate(self) -> None:
        m = self.module
        if len(self.layers) != self.length - 1:
            raise ShapeMismatch("layer count does not match brseq length")
        if tuple(sum(r[i] for r in self.brseq) for i in range(m.n)) != tuple(
                hmod.rank_vector(m)):
            raise ShapeMismatch("brseq does not sum to the ambient rank")
        partial = self.layer_ranks()
        prev: Optional[tuple[Subspace, ...]] = None
        for t, layer in enumerate(self.layers):
            for i in range(m.n):
                u = layer[i]
                order = m.loop_order(i)
                if u.ambient != m.dims[i]:
                    raise ShapeMismatch("layer in wrong ambient space")
                if u.dim != order * partial[t][i]:
                    raise ShapeMismatch(
                        f"layer {t + 1} has wrong dimension at vertex {i + 1}")
                restricted = (m.eps[i] @ u.basis.T).T
                if not u.contains_rows(restricted):
                    raise ValidationError("layer not closed under a loop")
                sub_rank = la.rank(u.coordinates_rows(restricted % m.p),
                                   m.p)
                if order > 1 and sub_rank != u.dim - u.dim // order:
                    raise NotLocallyFree(
                        f"layer {t + 1} not free at vertex {i + 1}")
                if prev is not None and not u.contains(prev[i]):
                    raise ValidationError("layers are not nested")
            for (i, j), mats in m.arrows.items():
                for a in mats:
                    image = (a @ layer[j].basis.T).T
                    if not layer[i].contains_rows(image):
                        raise ValidationError("layer not closed under arrow")
            prev = layer

    def to_dict(self) -> dict:
        return {
            "brseq": [list(r) for r in self.brseq],
            "layers": [[layer[i].basis.tolist()
                        for i in range(self.module.n)]
                       for layer in self.layers],
        }


def iter_flags(m: HModule, brseq,
               max_candidates: int = DEFAULT_VERTEX_CANDIDATE_BUDGET,
               override_budget: bool = False) -> Iterator[FlagOfSubmodules]:
    """Stream flags depth first: the top proper layer runs over the
    Grassmannian, the rest recurses inside that submodule.  Every yielded
    flag is validated."""
    seq = tuple(RankVector(r) for r in brseq)
    if not seq:
        raise LengthMismatch("brseq must be non-empty")
    rank = hmod.rank_vector(m)
    if tuple(sum(r[i] for r in seq) for i in range(m.n)) != tuple(rank):
        return
    for layers in _iter_layer_chains(m, seq, max_candidates,
                                     override_budget):
        flag = FlagOfSubmodules(m, seq, tuple(layers))
        flag.validate()
        yield flag


def enumerate_flags(m: HModule, brseq,
                    max_candidates: int = DEFAULT_VERTEX_CANDIDATE_BUDGET,
                    override_budget: bool = False) -> list[FlagOfSubmodules]:
    return list(iter_flags(m, brseq, max_candidates, override_budget))


def _iter_layer_chains(m: HModule, seq, max_candidates, override_budget):
    if len(seq) == 1:
        yield []
        return
    top_rank = hmod.rank_vector(m) - seq[-1]
    for tup in iter_locally_free_submodules(
            m, top_rank, max_candidates, override_budget):
        sq = hmod.sub_quotient(m, tup)
        inner = sq.sub
        for chain in _iter_layer_chains(inner, seq[:-1], max_candidates,
                                        override_budget):
            lifted = [tuple(
                Subspace.from_rows(
                    (layer[i].basis @ sq.sub_basis[i].T) % m.p,
                    m.dims[i], m.p)
                for i in range(m.n)) for layer in chain]
            yield lifted + [tup]


def point_count(m: HModule, brseq, **kwargs) -> int:
    """Number of flags; the two-step case avoids materializing the points
    and counts unconstrained vertices in closed form."""
    seq = tuple(RankVector(r) for r in brseq)
    if not seq:
        raise LengthMismatch("brseq must be non-empty")
    rank = hmod.rank_vector(m)
    if tuple(sum(r[i] for r in seq) for i in range(m.n)) != tuple(rank):
        return 0
    if len(seq) == 1:
        return 1
    if len(seq) == 2:
        return count_locally_free_submodules(m, seq[0], **kwargs)
    total = 0
    top_rank = rank - seq[-1]
    for tup in iter_locally_free_submodules(m, top_rank, **kwargs):
        total += point_count(hmod.sub_quotient(m, tup).sub, seq[:-1],
                             **kwargs)
    return total


# --- tensor modules over the linear-quiver extension --------------------------

@dataclass(frozen=True, eq=False)
class TensorModule:
    """A module over the level-k algebra tensored with the path algebra of
    the linear quiver 1 -> 2 -> ... -> (l-1): slot modules plus verified
    connector homomorphisms."""

    slots: tuple[HModule, ...]
    connectors: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        if not self.slots:
            raise ShapeMismatch("tensor module needs at least one slot")
        first = self.slots[0]
        for slot in self.slots[1:]:
            if (slot.datum, slot.k, slot.p) != (first.datum, first.k,
                                                first.p):
                raise ShapeMismatch("slots live over different algebras")
        if len(self.connectors) != len(self.slots) - 1:
            raise ShapeMismatch("need one connector between adjacent slots")
        for t, mu in enumerate(self.connectors):
            homext.check_homomorphism(self.slots[t], self.slots[t + 1], mu)

    @property
    def l(self) -> int:
        return len(self.slots) + 1


def repetitive_module(m: HModule, l: int) -> TensorModule:
    """(M, ..., M) with identity connectors; l - 1 slots."""
    if l < 2:
        raise LengthMismatch("repetitive module needs l >= 2")
    slots = (m,) * (l - 1)
    connectors = tuple(homext.identity_hom(m) for _ in range(l - 2))
    return TensorModule(slots, connectors)


def hom_tensor(x: TensorModule, y: TensorModule):
    """Basis of Hom between tensor modules: slotwise intertwiners plus the
    commuting squares with the connectors, solved as one kernel."""
    if len(x.slots) != len(y.slots):
        raise ShapeMismatch("tensor modules of different length")
    if (x.slots[0].datum, x.slots[0].k, x.slots[0].p) != (
            y.slots[0].datum, y.slots[0].k, y.slots[0].p):
        raise ShapeMismatch("tensor modules over different algebras")
    slots = len(x.slots)
    offsets = []
    total = 0
    for t in range(slots):
        off_t = []
        for i in range(x.slots[t].n):
            off_t.append(total)
            total += y.slots[t].dims[i] * x.slots[t].dims[i]
        offsets.append(off_t)
    blocks = []
    for t in range(slots):
        blocks.extend(homext.intertwiner_rows(
            x.slots[t], y.slots[t], offsets[t], total))
    p = x.slots[0].p
    for t in range(slots - 1):
        mx = x.connectors[t]
        my = y.connectors[t]
        for i in range(x.slots[t].n):
            h = y.slots[t + 1].dims[i] * x.slots[t].dims[i]
            if h == 0:
                continue
            block = np.zeros((h, total), dtype=np.int64)
            w_next = y.slots[t + 1].dims[i] * x.slots[t + 1].dims[i]
            if w_next:
                block[:, offsets[t + 1][i]:offsets[t + 1][i] + w_next] = \
                    np.kron(la.identity(y.slots[t + 1].dims[i]), mx[i].T)
            w_cur = y.slots[t].dims[i] * x.slots[t].dims[i]
            if w_cur:
                block[:, offsets[t][i]:offsets[t][i] + w_cur] = (
                    block[:, offsets[t][i]:offsets[t][i] + w_cur]
                    - np.kron(my[i], la.identity(x.slots[t].dims[i]))) % p
            blocks.append(block % p)
    if total == 0:
        return TensorHomBasis((), 0)
    system = (np.concatenate(blocks, axis=0) if blocks
              else la.zeros(0, total))
    basis, _ = la.kernel_basis_and_support(system, p)
    elements = []
    for row in basis:
        element = []
        for t in range(slots):
            fs = []
            for i in range(x.slots[t].n):
                h = y.slots[t].dims[i] * x.slots[t].dims[i]
                off = offsets[t][i]
                fs.append(row[off:off + h].reshape(
                    y.slots[t].dims[i], x.slots[t].dims[i]))
            element.append(tuple(fs))
        elements.append(tuple(element))
    for element in elements:
        _check_tensor_hom(x, y, element)
    return TensorHomBasis(tuple(elements), len(elements))


@dataclass(frozen=True, eq=False)
class TensorHomBasis:
    elements: tuple
    dim: int


def _check_tensor_hom(x: TensorModule, y: TensorModule, element):
    p = x.slots[0].p
    for t, f in enumerate(element):
        if not homext.is_homomorphism(x.slots[t], y.slots[t], f):
            raise InternalCheckError("hom_tensor: slot map not a hom")
    for t in range(len(x.slots) - 1):
        for i in range(x.slots[t].n):
            lhs = (element[t + 1][i] @ x.connectors[t][i]) % p
            rhs = (y.connectors[t][i] @ element[t][i]) % p
            if (lhs != rhs).any():
                raise InternalCheckError("hom_tensor: square does not commute")


def _flag_tensor_modules(m: HModule, flag: FlagOfSubmodules
                         ) -> tuple[TensorModule, TensorModule]:
    """The embedded chain iota(U) and the quotient chain M^(l)/iota(U)."""
    subs = []
    sub_bases = []
    quots = []
    quot_maps = []
    for layer in flag.layers:
        sq = hmod.sub_quotient(m, layer)
        subs.append(sq.sub)
        sub_bases.append(sq.sub_basis)
        quots.append(sq.quot)
        quot_maps.append((sq.quot_proj, sq.quot_section))
    incl = []
    for t in range(len(subs) - 1):
        mats = []
        for i in range(m.n):
            coords = flag.layers[t + 1][i].coordinates_rows(
                sub_bases[t][i].T)
            mats.append(coords.T)
        incl.append(tuple(mats))
    quot_conn = []
    for t in range(len(quots) - 1):
        proj_next = quot_maps[t + 1][0]
        sect_cur = quot_maps[t][1]
        quot_conn.append(tuple((proj_next[i] @ sect_cur[i]) % m.p
                               for i in range(m.n)))
    return (TensorModule(tuple(subs), tuple(incl)),
            TensorModule(tuple(quots), tuple(quot_conn)))


def tangent_dimension(m: HModule, flag: FlagOfSubmodules) -> int:
    """dim of the tangent space at a flag point, by one exact linear solve
    (never through the Euler-form shortcut)."""
    if flag.length < 2:
        return 0
    x, y = _flag_tensor_modules(m, flag)
    return hom_tensor(x, y).dim


# --- reduction of flags and its fibers ----------------------------------------

def reduce_flag(m: HModule, flag: FlagOfSubmodules) -> FlagOfSubmodules:
    """Image of a flag under the projections onto M / eps^(k-1) M."""
    if m.k < 2:
        raise KTooSmall("flag reduction needs k >= 2")
    red = reduction.reduce(m)
    layers = tuple(
        tuple(Subspace.from_rows((layer[i].basis @ red.projections[i].T)
                                 % m.p, red.module.dims[i], m.p)
              for i in range(m.n))
        for layer in flag.layers)
    out = FlagOfSubmodules(red.module, flag.brseq, layers)
    out.validate()
    return out


# ring-coefficient matrices: arrays (..., k) of ascending eps-degree

def _rmul(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    k = a.shape[-1]
    out = np.zeros((a.shape[0], b.shape[1], k), dtype=np.int64)
    for ta in range(k):
        for tb in range(k - ta):
            out[:, :, ta + tb] += a[:, :, ta] @ b[:, :, tb]
    return out % p


def _rid(n: int, k: int) -> np.ndarray:
    out = np.zeros((n, n, k), dtype=np.int64)
    out[:, :, 0] = np.eye(n, dtype=np.int64)
    return out


def _rinv(a: np.ndarray, p: int) -> np.ndarray:
    k = a.shape[-1]
    n = a.shape[0]
    out = np.zeros_like(a)
    inv0 = la.inv(a[:, :, 0], p)
    out[:, :, 0] = inv0
    for t in range(1, k):
        acc = np.zeros((n, n), dtype=np.int64)
        for s in range(1, t + 1):
            acc += a[:, :, s] @ out[:, :, t - s]
        out[:, :, t] = (-inv0 @ acc) % p
    return out


class _CentralCoordinates:
    """Coordinates of a space that is free over F_p[eps]/(eps^k), given the
    nilpotent matrix of eps; converts vectors and eps-commuting operators to
    ring form and back."""

    def __init__(self, eps_total: np.ndarray, k: int, p: int):
        self.k = k
        self.p = p
        self.dim = eps_total.shape[0]
        if self.dim % k != 0:
            raise NotLocallyFree("space is not free over the center")
        self.m = self.dim // k
        image = Subspace.from_rows(eps_total.T, self.dim, p)
        gens = [c for c in range(self.dim) if c not in image.pivots]
        if len(gens) != self.m:
            raise NotLocallyFree("space is not free over the center")
        cols = []
        for s in gens:
            v = la.zeros(self.dim, 1)
            v[s, 0] = 1
            for _ in range(k):
                cols.append(v[:, 0].copy())
                v = (eps_total @ v) % p
        self.basis = np.stack(cols, axis=1)       # column (s*k + t)
        if la.rank(self.basis, p) != self.dim:
            raise NotLocallyFree("eps sweep did not produce a basis")
        self.basis_inv = la.inv(self.basis, p)

    def operator_to_ring(self, g: np.ndarray) -> np.ndarray:
        """Ring matrix of an operator commuting with eps; verified."""
        conj = (self.basis_inv @ (g % self.p) @ self.basis) % self.p
        ring = np.zeros((self.m, self.m, self.k), dtype=np.int64)
        for s in range(self.m):
            col = conj[:, s * self.k]
            ring[:, s, :] = col.reshape(self.m, self.k)
        rebuilt = np.zeros_like(conj)
        for sp in range(self.m):
            for s in range(self.m):
                for tau in range(self.k):
                    for t in range(self.k - tau):
                        rebuilt[sp * self.k + tau + t, s * self.k + t] = \
                            ring[sp, s, tau]
        if ((rebuilt - conj) % self.p).any():
            raise InternalCheckError(
                "operator does not commute with the central nilpotent")
        return ring

    def vectors_to_ring(self, rows: np.ndarray) -> np.ndarray:
        """Each row of K-coordinates becomes an (m, k) ring vector."""
        coords = (self.basis_inv @ (rows.T % self.p)) % self.p
        return coords.T.reshape(-1, self.m, self.k)

    def ring_columns_to_rows(self, ring_mat: np.ndarray) -> np.ndarray:
        """K-row-vectors spanning the column span of a ring matrix."""
        z = ring_mat.shape[1]
        rows = la.zeros(z * self.k, self.dim)
        for col in range(z):
            for shift in range(self.k):
                vec = np.zeros((self.m, self.k), dtype=np.int64)
                vec[:, shift:] = ring_mat[:, col, :self.k - shift]
                rows[col * self.k + shift] = (
                    self.basis @ vec.reshape(-1)) % self.p
        return rows


def _total_blocks(mods: Sequence[HModule]) -> tuple[dict, int]:
    """Offsets of the (slot, vertex) blocks in the direct sum."""
    offsets = {}
    pos = 0
    for t, mod in enumerate(mods):
        for i in range(mod.n):
            offsets[(t, i)] = pos
            pos += mod.dims[i]
    return offsets, pos


def _algebra_generators(mods: Sequence[HModule], offsets: dict,
                        total: int) -> list[np.ndarray]:
    """Matrices generating the action on the direct sum of the slots of a
    repetitive chain: slot and vertex idempotents, loops, arrows, and the
    identity connectors from each slot into the next."""
    gens = []
    slots = len(mods)
    n = mods[0].n
    for t in range(slots):
        out = la.zeros(total, total)
        for i in range(n):
            off = offsets[(t, i)]
            out[off:off + mods[t].dims[i], off:off + mods[t].dims[i]] = \
                la.identity(mods[t].dims[i])
        gens.append(out)
    for i in range(n):
        out = la.zeros(total, total)
        for t in range(slots):
            off = offsets[(t, i)]
            out[off:off + mods[t].dims[i], off:off + mods[t].dims[i]] = \
                la.identity(mods[t].dims[i])
        gens.append(out)
    for i in range(n):
        out = la.zeros(total, total)
        for t in range(slots):
            off = offsets[(t, i)]
            out[off:off + mods[t].dims[i], off:off + mods[t].dims[i]] = \
                mods[t].eps[i]
        gens.append(out)
    keys = sorted(mods[0].arrows)
    for key in keys:
        for g in range(len(mods[0].arrows[key])):
            out = la.zeros(total, total)
            for t in range(slots):
                a = mods[t].arrows[key][g]
                out[offsets[(t, key[0])]:offsets[(t, key[0])] + a.shape[0],
                    offsets[(t, key[1])]:offsets[(t, key[1])] + a.shape[1]] \
                    = a
            gens.append(out)
    for t in range(slots - 1):
        out = la.zeros(total, total)
        for i in range(n):
            d = mods[t].dims[i]
            out[offsets[(t + 1, i)]:offsets[(t + 1, i)] + d,
                offsets[(t, i)]:offsets[(t, i)] + d] = la.identity(d)
        gens.append(out)
    return gens


@dataclass(frozen=True, eq=False)
class FiberOfReduction:
    """Fiber of the flag reduction map over a fixed lower-level flag:
    either empty or an affine space, parametrized by a particular solution
    and a kernel basis of the cut-out linear system."""

    base: FlagOfSubmodules
    empty: bool
    dimension: Optional[int]
    expected_dimension: int
    particular: Optional[FlagOfSubmodules] = None
    _builder: Optional[object] = field(default=None, repr=False)
    _kernel: Optional[np.ndarray] = field(default=None, repr=False)

    def flag_at(self, coeffs) -> FlagOfSubmodules:
        if self.empty:
            raise ValidationError("fiber is empty")
        coeffs = np.asarray(coeffs, dtype=np.int64)
        if coeffs.shape != (self.dimension,):
            raise ShapeMismatch(f"need {self.dimension} coefficients")
        return self._builder(coeffs)

    def enumerate_points(self) -> Iterator[FlagOfSubmodules]:
        if self.empty:
            return
        p = self.base.module.p
        for codes in itertools.product(range(p), repeat=self.dimension):
            yield self.flag_at(np.asarray(codes, dtype=np.int64))

    def point_count(self) -> int:
        if self.empty:
            return 0
        return self.base.module.p ** self.dimension


def fiber_of_reduction(m: HModule, base: FlagOfSubmodules
                       ) -> FiberOfReduction:
    """Solve for all level-k flags of M reducing to a given level-(k-1) flag.

    The chain is translated into one submodule of the repetitive chain
    module; lifts of its ring-echelon chart are cut out by an affine linear
    system in the top-degree coefficients.  The solution space dimension is
    cross-checked against the Hom space between the mod-eps reductions of
    the chain and its quotient chain.
    """
    if m.k < 2:
        raise KTooSmall("fibers of reduction need k >= 2")
    red = reduction.reduce(m)
    mbar = red.module
    if base.module is not mbar and not hmod.modules_equal(base.module, mbar):
        raise FlagNotInReduction(
            "base flag does not live in the reduction of the module")
    try:
        base.validate()
    except ValidationError as exc:
        raise FlagNotInReduction(f"base flag invalid: {exc}") from exc
    seq = tuple(RankVector(r) for r in base.brseq)
    l = len(seq)
    expected = _fiber_expected_dimension(mbar, base)
    if l < 2:
        flag = FlagOfSubmodules(m, seq, ())
        return FiberOfReduction(base, False, 0, expected, flag,
                                _builder=lambda coeffs: flag,
                                _kernel=la.zeros(0, 0))
    slots = l - 1
    p = m.p
    k = m.k
    top_mods = [m] * slots
    offsets, total = _total_blocks(top_mods)
    eps_blocks = hmod.epsilon_blocks(m)
    eps_total = la.zeros(total, total)
    for t in range(slots):
        for i in range(m.n):
            off = offsets[(t, i)]
            eps_total[off:off + m.dims[i], off:off + m.dims[i]] = \
                eps_blocks[i]
    gens = _algebra_generators(top_mods, offsets, total)
    coords = _CentralCoordinates(eps_total, k, p)

    # the base chain as one subspace of the reduced total space
    bar_mods = [mbar] * slots
    bar_offsets, bar_total = _total_blocks(bar_mods)
    base_rows = []
    for t in range(slots):
        for i in range(m.n):
            sub = base.layers[t][i]
            for row in sub.basis:
                full = la.zeros(1, bar_total)
                off = bar_offsets[(t, i)]
                full[0, off:off + mbar.dims[i]] = row
                base_rows.append(full[0])
    z_total = len(base_rows) // (k - 1) if base_rows else 0
    rho_total = la.zeros(bar_total, total)
    for t in range(slots):
        for i in range(m.n):
            rho_total[bar_offsets[(t, i)]:bar_offsets[(t, i)]
                      + mbar.dims[i],
                      offsets[(t, i)]:offsets[(t, i)] + m.dims[i]] = \
                red.projections[i]
    tbar = (rho_total @ _degree_truncated_basis(coords, k - 1)) % p
    if la.rank(tbar, p) != bar_total:
        raise InternalCheckError("reduced central basis is degenerate")
    tbar_inv = la.inv(tbar, p)

    if z_total == 0:
        zero_layers = tuple(
            tuple(Subspace.zero(m.dims[i], p) for i in range(m.n))
            for _ in range(slots))
        flag = FlagOfSubmodules(m, seq, zero_layers)
        flag.validate()
        return FiberOfReduction(base, False, 0, expected, flag,
                                _builder=lambda coeffs: flag,
                                _kernel=la.zeros(0, 0))

    ring_rows = []
    for row in base_rows:
        coeff = (tbar_inv @ row) % p
        ring_rows.append(coeff.reshape(coords.m, k - 1))
    # pick ring generators: residually independent rows
    amat = np.zeros((coords.m, z_total, k - 1), dtype=np.int64)
    residuals = la.zeros(0, coords.m)
    picked = 0
    for vec in ring_rows:
        if picked == z_total:
            break
        trial = np.concatenate([residuals, vec[:, 0].reshape(1, -1)])
        if la.rank(trial, p) > residuals.shape[0]:
            residuals = trial
            amat[:, picked, :] = vec
            picked += 1
    if picked != z_total:
        raise FlagNotInReduction("base chain is not free over the center")
    _, _, piv = la.rref(amat[:, :, 0].T, p)
    pivot_rows = list(piv)
    other_rows = [q for q in range(coords.m) if q not in pivot_rows]
    norm = _rinv(amat[pivot_rows][:, :, :], p)
    amat = _rmul(amat, norm, p)
    if not np.array_equal(amat[pivot_rows], _rid(z_total, k - 1)):
        raise InternalCheckError("chart normalization failed")
    sbar = np.zeros((len(other_rows), z_total, k), dtype=np.int64)
    sbar[:, :, :k - 1] = amat[other_rows]

    unknowns = len(other_rows) * z_total
    eq_blocks = []
    rhs_parts = []
    s0 = sbar[:, :, 0]
    for gmat in gens:
        ring = coords.operator_to_ring(gmat)
        pm = ring[pivot_rows][:, pivot_rows]
        qm = ring[pivot_rows][:, other_rows]
        rm = ring[other_rows][:, pivot_rows]
        tm = ring[other_rows][:, other_rows]
        resid = (rm + _rmul(tm, sbar, p) - _rmul(sbar, pm, p)
                 - _rmul(sbar, _rmul(qm, sbar, p), p)) % p
        if resid[:, :, :k - 1].any():
            raise FlagNotInReduction(
                "base chain is not invariant under the algebra action")
        rhs_parts.append((-resid[:, :, k - 1]) % p)
        left = (tm[:, :, 0] - s0 @ qm[:, :, 0]) % p
        right = (pm[:, :, 0] + qm[:, :, 0] @ s0) % p
        block = (np.kron(left, la.identity(z_total))
                 - np.kron(la.identity(len(other_rows)), right.T)) % p
        eq_blocks.append(block)
    system = (np.concatenate(eq_blocks, axis=0) if eq_blocks
              else la.zeros(0, unknowns))
    rhs = (np.concatenate([r.reshape(-1) for r in rhs_parts])
           if rhs_parts else la.zeros(1, 0)[0])
    solution = la.solve(system, rhs, p)
    if solution is None:
        return FiberOfReduction(base, True, None, expected)
    particular_vec, kernel = solution
    dimension = kernel.shape[0]
    if dimension != expected:
        raise InternalCheckError(
            f"fiber dimension {dimension} does not match the Hom-space "
            f"cross-check {expected}")

    block_slices = {}
    for t in range(slots):
        for i in range(m.n):
            off = offsets[(t, i)]
            block_slices[(t, i)] = slice(off, off + m.dims[i])

    def build(coeffs: np.ndarray) -> FlagOfSubmodules:
        vec = (particular_vec + (coeffs @ kernel if dimension else 0)) % p
        stilde = sbar.copy()
        stilde[:, :, k - 1] = (stilde[:, :, k - 1]
                               + vec.reshape(len(other_rows), z_total)) % p
        full = np.zeros((coords.m, z_total, k), dtype=np.int64)
        full[pivot_rows] = _rid(z_total, k)[:, :, :]
        full[other_rows] = stilde
        rows = coords.ring_columns_to_rows(full)
        layers = []
        for t in range(slots):
            layer = []
            for i in range(m.n):
                sub_rows = rows[:, block_slices[(t, i)]]
                layer.append(Subspace.from_rows(sub_rows, m.dims[i], p))
            layers.append(tuple(layer))
        flag = FlagOfSubmodules(m, seq, tuple(layers))
        flag.validate()
        return flag

    particular = build(np.zeros(dimension, dtype=np.int64))
    back = reduce_flag(m, particular)
    if any(back.layers[t][i] != base.layers[t][i]
           for t in range(slots) for i in range(m.n)):
        raise InternalCheckError("fiber solution does not reduce to base")
    return FiberOfReduction(base, False, dimension, expected, particular,
                            _builder=build, _kernel=kernel)


def _degree_truncated_basis(coords: _CentralCoordinates,
                            k_new: int) -> np.ndarray:
    """Columns eps^t v_s of the central basis with t < k_new."""
    keep = [s * coords.k + t for s in range(coords.m) for t in range(k_new)]
    return coords.basis[:, keep]


def _fiber_expected_dimension(mbar: HModule, base: FlagOfSubmodules) -> int:
    """dim Hom over the base-level tensor algebra between the mod-eps
    reductions of the chain and of its quotient chain."""
    if base.length < 2:
        return 0
    x, y = _flag_tensor_modules(mbar, base)
    x1 = _mod_epsilon_tensor(x)
    y1 = _mod_epsilon_tensor(y)
    return hom_tensor(x1, y1).dim


def _mod_epsilon(mod: HModule) -> tuple[HModule, tuple, tuple]:
    """Quotient by the image of the central nilpotent: the level-1 shadow."""
    p = mod.p
    blocks = hmod.epsilon_blocks(mod)
    subs = [Subspace.from_rows(blocks[i].T, mod.dims[i], p)
            for i in range(mod.n)]
    qmaps = [la.quotient_map(mod.dims[i], subs[i]) for i in range(mod.n)]
    eps = [(qmaps[i][0] @ mod.eps[i] @ qmaps[i][1]) % p
           for i in range(mod.n)]
    arrows = {key: [(qmaps[key[0]][0] @ a @ qmaps[key[1]][1]) % p
                    for a in mats]
              for key, mats in mod.arrows.items()}
    out = hmod.make_module(mod.datum, 1, p, eps, arrows)
    return out, tuple(q for q, _ in qmaps), tuple(s for _, s in qmaps)


def _mod_epsilon_tensor(x: TensorModule) -> TensorModule:
    reduced = []
    maps = []
    for slot in x.slots:
        out, proj, sect = _mod_epsilon(slot)
        reduced.append(out)
        maps.append((proj, sect))
    connectors = []
    for t, mu in enumerate(x.connectors):
        proj_next = maps[t + 1][0]
        sect_cur = maps[t][1]
        connectors.append(tuple(
            (proj_next[i] @ mu[i] @ sect_cur[i]) % x.slots[0].p
            for i in range(x.slots[0].n)))
    return TensorModule(tuple(reduced), tuple(connectors))


# --- point counting across primes ---------------------------------------------

@dataclass(frozen=True, eq=False)
class BundleRatioReport:
    brseq: tuple[RankVector, ...]
    k: int
    fiber_exponent: int
    rows: tuple[dict, ...]

    @property
    def ok_for_rigid(self) -> bool:
        return all(row["ok"] for row in self.rows if row["rigid"])

    @property
    def all_ok(self) -> bool:
        return all(row["ok"] for row in self.rows)


def bundle_ratio_check(m: HModule, brseq, primes=(2, 3),
                       **kwargs) -> BundleRatioReport:
    """Per prime: the level-k count must be q^d(brseq) times the count of
    the reduced flag variety at level k-1, exactly, whenever the ambient
    module is rigid at that prime.  Violations are reported, not raised."""
    if m.k < 2:
        raise KTooSmall("bundle check compares level k with k - 1")
    if not m.has_lift():
        raise ValidationError("bundle check needs an integer-defined module")
    seq = tuple(RankVector(r) for r in brseq)
    d = flag_dimension(m.datum, seq)
    rows = []
    for q in primes:
        mq = hmod.reduce_mod_p(m, q)
        rigid = homext.is_rigid(mq) if hmod.is_locally_free(mq) else False
        top = point_count(mq, seq, **kwargs)
        bottom = point_count(reduction.reduce(mq).module, seq, **kwargs)
        if d >= 0:
            ok = top == q ** d * bottom
        else:
            ok = top * q ** (-d) == bottom
        rows.append({"q": q, "rigid": rigid, "count_k": top,
                     "count_k_minus_1": bottom, "exponent": d, "ok": ok})
    return BundleRatioReport(seq, m.k, d, tuple(rows))


@dataclass(frozen=True, eq=False)
class PointCountTable:
    """q -> count table with an interpolated counting polynomial and the
    value at q = 1 as a heuristic Euler-characteristic estimate."""

    brseq: tuple[RankVector, ...]
    k: int
    counts: dict
    degree_bound: int
    polynomial: Optional[tuple[int, ...]] = None
    chi_estimate: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "brseq": [list(r) for r in self.brseq],
            "k": self.k,
            "counts": {str(q): c for q, c in sorted(self.counts.items())},
            "degree_bound": self.degree_bound,
            "polynomial": list(self.polynomial)
            if self.polynomial is not None else None,
            "chi_estimate": self.chi_estimate,
        }

    def to_csv(self) -> str:
        lines = ["q,count"]
        for q, c in sorted(self.counts.items()):
            lines.append(f"{q},{c}")
        return "\n".join(lines) + "\n"


def counting_polynomial(m: HModule, brseq, primes=DEFAULT_PRIMES,
                        degree_bound: Optional[int] = None,
                        **kwargs) -> PointCountTable:
    """Count the flag variety over several primes and interpolate.

    The default degree bound is k*d(brseq) (the dimension when non-empty,
    clamped at 0); one surplus prime is always counted so that a too-low
    bound is caught.  Failure to interpolate with integer coefficients, or
    a surplus-point mismatch, raises and means "no counting polynomial at
    this degree bound" - a heuristic verdict, not a theorem.
    """
    if not m.has_lift():
        raise ValidationError("counting needs an integer-defined module")
    seq = tuple(RankVector(r) for r in brseq)
    if not seq:
        raise LengthMismatch("brseq must be non-empty")
    d = flag_dimension(m.datum, seq)
    if degree_bound is None:
        degree_bound = max(m.k * d, 0)
    needed = degree_bound + 2
    if len(primes) < needed:
        raise NotEnoughPrimes(
            f"need {needed} primes for degree bound {degree_bound}")
    used = list(primes[:needed])
    counts = {}
    for q in used:
        counts[q] = point_count(hmod.reduce_mod_p(m, q), seq, **kwargs)
    coeffs = la.lagrange_interpolate(
        [(q, counts[q]) for q in used], degree_bound)
    return PointCountTable(seq, m.k, counts, degree_bound, coeffs,
                           la.eval_poly(coeffs, 1))


def closed_form_flag_count_no_arrows(datum: CartanDatum, k: int, q: int,
                                     brseq) -> int:
    """Exact count for data without arrows: per vertex, the classical flag
    count times q^((k*c_i - 1) * d_i) with d_i the sum of products of
    distinct layer ranks at that vertex."""
    if datum.oriented_pairs():
        raise ValidationError("closed form only applies without arrows")
    seq = [RankVector(r) for r in brseq]
    total = 1
    for i in range(datum.n):
        ranks = [r[i] for r in seq]
        msum = sum(ranks)
        classical = 1
        remaining = msum
        for r in ranks:
            classical *= la.gaussian_binomial(remaining, r, q)
            remaining -= r
        d_i = sum(ranks[a] * ranks[b]
                  for a in range(len(ranks))
                  for b in range(a + 1, len(ranks)))
        total *= classical * q ** ((k * datum.d[i] - 1) * d_i)
    return total
