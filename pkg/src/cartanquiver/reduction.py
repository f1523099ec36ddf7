"""The reduction functor between symmetrizer levels k and k-1.

With eps = sum_i eps_i^(c_i) central and eps^k = 0, reduction sends a
level-k module M to M / eps^(k-1) M; at vertex i this quotients M_i by the
image of Eps_i^((k-1)*c_i).  On locally free modules it preserves rank
vectors, and the quotient basis is chosen as the coordinates of loop degree
< (k-1)*c_i inside the standard Jordan basis, so reducing a free module in
standard form gives literally the standard free module one level down.

The converse direction is constructive: structure-matrix entries over the
shorter truncated polynomial ring are reinterpreted over the longer one
(zero-padded coefficient lists), which lifts modules and nested chains.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from . import exactlinalg as la
from . import hmod, homext
from .cartan import CartanDatum, RankVector
from .errors import (
    KTooSmall,
    InternalCheckError,
    NotAHomomorphism,
    NotLocallyFree,
    NotNested,
    ValidationError,
)
from .exactlinalg import Subspace
from .hmod import HModule, StructureMatrices


@dataclass(frozen=True, eq=False)
class Reduction:
    """A reduced module together with the per-vertex projections M_i -> M_i
    and sections picking the chosen complement of eps^(k-1) M_i."""

    module: HModule
    projections: tuple[np.ndarray, ...]
    sections: tuple[np.ndarray, ...]


def reduce(m: HModule) -> Reduction:
    """Quotient by eps^(k-1) M, re-validated over the level-(k-1) algebra."""
    if m.k < 2:
        raise KTooSmall("reduction needs k >= 2")
    p = m.p
    subs = []
    for i in range(m.n):
        power = la.matpow(m.eps[i], (m.k - 1) * m.datum.d[i], p)
        subs.append(Subspace.from_rows(power.T, m.dims[i], p))
    qmaps = [la.quotient_map(m.dims[i], subs[i]) for i in range(m.n)]
    projs = tuple(q for q, _ in qmaps)
    sects = tuple(s for _, s in qmaps)
    eps = [(projs[i] @ m.eps[i] @ sects[i]) % p for i in range(m.n)]
    arrows = {key: [(projs[key[0]] @ a @ sects[key[1]]) % p for a in mats]
              for key, mats in m.arrows.items()}
    standard = m.standard_form and hmod.is_locally_free(m)
    lift = None
    if standard and m.has_lift():
        idx = [_low_coords(m, i) for i in range(m.n)]
        lift = {
            "eps": tuple(m.lift["eps"][i][np.ix_(idx[i], idx[i])]
                         for i in range(m.n)),
            "arrows": {key: tuple(a[np.ix_(idx[key[0]], idx[key[1]])]
                                  for a in mats)
                       for key, mats in m.lift["arrows"].items()},
        }
    reduced = hmod.make_module(m.datum, m.k - 1, p, eps, arrows,
                               lift=lift, standard_form=standard)
    return Reduction(reduced, projs, sects)


def _low_coords(m: HModule, i: int) -> list[int]:
    order = m.loop_order(i)
    new_order = (m.k - 1) * m.datum.d[i]
    r = m.dims[i] // order
    return [s * order + t for s in range(r) for t in range(new_order)]


def reduce_module(m: HModule) -> HModule:
    return reduce(m).module


def lift(s: StructureMatrices) -> HModule:
    """Reinterpret level-(k-1) structure entries at level k.

    Coefficient lists are zero-padded from (k-1)*c_i to k*c_i; reducing the
    lift recovers the module the entries defined at level k-1.
    """
    datum, k_new, p = s.datum, s.k + 1, s.p
    mats = {}
    for (i, j), arr in s.mats.items():
        old_len = s.k * datum.d[i]
        new_len = k_new * datum.d[i]
        if arr.shape[2] != old_len:
            raise ValidationError("structure entries have wrong truncation")
        padded = np.zeros(arr.shape[:2] + (new_len,), dtype=np.int64)
        padded[:, :, :old_len] = arr
        mats[(i, j)] = padded
    lifted = hmod.structure_from_arrays(datum, k_new, p, s.rank, mats)
    return hmod.from_structure_matrices(lifted)


def lift_module(m: HModule) -> HModule:
    """Lift an explicit locally free module one level up via its structure."""
    return lift(hmod.to_structure_matrices(m))


def module_at_level(m: HModule, k_new: int) -> HModule:
    """Re-truncate a locally free module's structure entries at level k_new.

    Truncating coefficients agrees with iterated reduction; padding agrees
    with iterated lifting.
    """
    if k_new < 1:
        raise KTooSmall(f"level must be >= 1, got {k_new}")
    s = hmod.to_structure_matrices(m)
    datum = m.datum
    mats = {}
    for (i, j), arr in s.mats.items():
        new_len = k_new * datum.d[i]
        resized = np.zeros(arr.shape[:2] + (new_len,), dtype=np.int64)
        keep = min(new_len, arr.shape[2])
        resized[:, :, :keep] = arr[:, :, :keep]
        mats[(i, j)] = resized
    out = hmod.structure_from_arrays(datum, k_new, m.p, s.rank, mats)
    return hmod.from_structure_matrices(out)


@dataclass(frozen=True, eq=False)
class StructureChain:
    """A nested chain presented block-triangularly on one structure matrix.

    ranks is weakly increasing and ends at struct.rank; layer j is spanned
    by the first ranks[j][i] generators at each vertex, which requires the
    arrow entries out of those generators to stay inside the leading rows.
    """

    struct: StructureMatrices
    ranks: tuple[RankVector, ...]

    def __post_init__(self):
        prev = RankVector.zero(self.struct.datum.n)
        for e in self.ranks:
            if not (prev <= RankVector(e)):
                raise NotNested("chain ranks must be weakly increasing")
            prev = RankVector(e)
        if tuple(prev) != tuple(self.struct.rank):
            raise NotNested("chain must end at the full rank vector")
        datum = self.struct.datum
        for e in self.ranks[:-1]:
            for (i, j), arr in self.struct.mats.items():
                cols_per_gen = abs(datum.c[i][j])
                sub_cols = cols_per_gen * e[j]
                if arr[e[i]:, :sub_cols].any():
                    raise NotNested(
                        f"layer of rank {tuple(e)} is not spanned by leading "
                        f"generators at pair ({i + 1},{j + 1})")


@dataclass(frozen=True, eq=False)
class LiftedChain:
    module: HModule
    layers: tuple[tuple[Subspace, ...], ...]


def lift_chain(chain: StructureChain) -> LiftedChain:
    """Lift a nested chain of presentations one level up, layer by layer."""
    top = lift(chain.struct)
    layers = []
    for e in chain.ranks[:-1]:
        layers.append(generator_span(top, e))
    return LiftedChain(top, tuple(layers))


def generator_span(m: HModule, e) -> tuple[Subspace, ...]:
    """Per-vertex span of the first e_i generators (all loop degrees) of a
    standard-form module."""
    e = RankVector(e)
    out = []
    for i in range(m.n):
        order = m.loop_order(i)
        rows = la.zeros(e[i] * order, m.dims[i])
        for s in range(e[i]):
            for t in range(order):
                rows[s * order + t, s * order + t] = 1
        out.append(Subspace.from_rows(rows, m.dims[i], m.p))
    return tuple(out)


def reduce_hom(m: HModule, n: HModule, f) -> tuple[np.ndarray, ...]:
    """Induced map between the reductions; functorial by construction."""
    f = homext.check_homomorphism(m, n, f)
    red_m = reduce(m)
    red_n = reduce(n)
    p = m.p
    fbar = tuple((red_n.projections[i] @ f[i] @ red_m.sections[i]) % p
                 for i in range(m.n))
    for i in range(m.n):
        lhs = (fbar[i] @ red_m.projections[i]) % p
        rhs = (red_n.projections[i] @ f[i]) % p
        if (lhs != rhs).any():
            raise InternalCheckError("reduce_hom: induced map ill defined")
    if not homext.is_homomorphism(red_m.module, red_n.module, fbar):
        raise InternalCheckError("reduce_hom: image is not a homomorphism")
    return fbar


# --- reports ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RigidTransferReport:
    rank: RankVector
    k_max: int
    p: int
    exists: dict
    pattern_consistent: bool
    reductions_rigid: bool
    reductions_match: bool
    details: tuple

    @property
    def ok(self) -> bool:
        return (self.pattern_consistent and self.reductions_rigid
                and self.reductions_match)


def rigid_transfer_check(datum: CartanDatum, p: int, r, k_max: int,
                         trials: int = 200, seed=0) -> RigidTransferReport:
    """Search rigids at k = 1..k_max; reductions of upper-level rigids must
    be rigid and isomorphic to the rigid found one level down, and the
    existence pattern must not depend on k."""
    r = RankVector(r)
    found = {k: homext.find_rigid(datum, k, p, r, trials=trials,
                                  seed=(seed, k))
             for k in range(1, k_max + 1)}
    exists = {k: found[k].found() for k in found}
    pattern = len(set(exists.values())) <= 1
    details = []
    red_rigid = True
    red_match = True
    for k in range(k_max, 1, -1):
        if not (found[k].found() and found[k - 1].found()):
            continue
        reduced = reduce(found[k].module).module
        rig = homext.is_rigid(reduced)
        iso = homext.are_isomorphic(reduced, found[k - 1].module,
                                    seed=(seed, "iso", k))
        red_rigid = red_rigid and rig
        red_match = red_match and iso.isomorphic
        details.append({"k": k, "reduced_rigid": rig,
                        "isomorphic_to_lower": iso.isomorphic,
                        "certain": iso.certain})
    return RigidTransferReport(r, k_max, p, exists, pattern, red_rigid,
                               red_match, tuple(details))


@dataclass(frozen=True, eq=False)
class EpsilonFiltrationReport:
    layer_dims: tuple            # [j][i] = dim of layer j at vertex i
    layers_equal: bool
    multiplication_bijective: bool

    @property
    def ok(self) -> bool:
        return self.layers_equal and self.multiplication_bijective


def epsilon_filtration_check(m: HModule) -> EpsilonFiltrationReport:
    """All k successive eps-layers of a locally free module have the same
    dimension vector and eps maps each onto the next bijectively."""
    if not hmod.is_locally_free(m):
        raise NotLocallyFree("filtration check needs a locally free module")
    blocks = hmod.epsilon_blocks(m)
    ranks = []
    for j in range(m.k + 1):
        ranks.append([la.rank(la.matpow(blocks[i], j, m.p), m.p)
                      for i in range(m.n)])
    layer_dims = tuple(
        tuple(ranks[j][i] - ranks[j + 1][i] for i in range(m.n))
        for j in range(m.k))
    equal = len(set(layer_dims)) <= 1
    bijective = all(
        layer_dims[j] == layer_dims[j + 1] for j in range(m.k - 1))
    return EpsilonFiltrationReport(layer_dims, equal, bijective)
