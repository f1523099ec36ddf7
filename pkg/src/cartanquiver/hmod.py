"""Representations of the quiver algebra with symmetrizer k*D over F_p.

A module is a tuple of F_p-spaces M_i with a nilpotent loop matrix Eps_i of
order k*c_i at each vertex and an arrow matrix A_ij^(g): M_j -> M_i for
each oriented pair and each of its g_ij parallel arrows, subject to

    (H1)  Eps_i ** (k*c_i) == 0
    (H2)  Eps_i ** f_ji  @ A_ij^(g) == A_ij^(g) @ Eps_j ** f_ij.

M is locally free when every M_i is free over the truncated polynomial
ring F_p[eps_i]/(eps_i^(k*c_i)); its rank vector is (dim M_i / (k*c_i))_i.
Locally free modules are normalized so that each loop is a direct sum of
nilpotent Jordan blocks of full size k*c_i, ordered generator-major: basis
index s*(k*c_i) + t holds eps_i^t applied to generator s.  In this standard
form the module is equivalently described by its structure matrices: for
each oriented pair (i,j) a matrix over F_p[eps_i]/(eps_i^(k*c_i)) of shape
r_i x (|c_ij| * r_j), column (u, g, t) recording the image of
alpha^(g) eps_j^t applied to generator u of M_j (0 <= t < f_ij).  Higher
twists follow from the rewriting rule

    alpha^(g) eps_j^(a*f_ij + t)  =  eps_i^(a*f_ji) alpha^(g) eps_j^t,

which is the (H2) relation in normal form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import exactlinalg as la
from .cartan import CartanDatum, RankVector
from .errors import (
    DatumMismatch,
    EntryDegreeOverflow,
    InternalCheckError,
    NotInvariant,
    NotLocallyFree,
    RelationBrokenAtPrime,
    RelationH1Violated,
    RelationH2Violated,
    ShapeMismatch,
    ValidationError,
)
from .exactlinalg import Subspace


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HModule:
    """A representation of the level-k algebra over F_p.

    `eps[i]` is the loop matrix at vertex i, `arrows[(i, j)][g]` the matrix
    of the g-th arrow j -> i.  `lift`, when present, holds integer matrices
    that reduce to the module entries mod p (used for cross-prime counts).
    `standard_form` records that all loops are in generator-major Jordan
    form of full block size.
    """

    datum: CartanDatum
    k: int
    p: int
    dims: tuple[int, ...]
    eps: tuple[np.ndarray, ...]
    arrows: dict[tuple[int, int], tuple[np.ndarray, ...]]
    lift: Optional[dict] = field(default=None, compare=False)
    standard_form: bool = field(default=False, compare=False)

    @property
    def n(self) -> int:
        return self.datum.n

    def loop_order(self, i: int) -> int:
        return self.k * self.datum.d[i]

    def total_dim(self) -> int:
        return sum(self.dims)

    def arrow(self, i: int, j: int, g: int) -> np.ndarray:
        return self.arrows[(i, j)][g]

    def maps_with_labels(self):
        """All structure maps as (label, matrix, target vertex, source vertex)."""
        out = [(f"eps_{i + 1}", self.eps[i], i, i) for i in range(self.n)]
        for (i, j), mats in sorted(self.arrows.items()):
            for g, a in enumerate(mats):
                out.append((f"alpha_{i + 1}{j + 1}^{g + 1}", a, i, j))
        return out

    def has_lift(self) -> bool:
        return self.lift is not None


def make_module(datum: CartanDatum, k: int, p: int, eps, arrows,
                lift=None, standard_form=False, validate=True) -> HModule:
    """Assemble and (by default) validate a module from raw matrices."""
    la.check_prime(p)
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    eps_t = tuple(_frozen(np.asarray(e, dtype=np.int64) % p) for e in eps)
    dims = tuple(e.shape[0] for e in eps_t)
    arr = {}
    for i, j in datum.oriented_pairs():
        mats = arrows.get((i, j), None) if arrows else None
        g_count = datum.g(i, j)
        if mats is None:
            mats = [la.zeros(dims[i], dims[j]) for _ in range(g_count)]
        if len(mats) != g_count:
            raise ShapeMismatch(
                f"pair ({i + 1},{j + 1}) needs {g_count} arrow matrices")
        arr[(i, j)] = tuple(
            _frozen(np.asarray(a, dtype=np.int64) % p) for a in mats)
    mod = HModule(datum, k, p, dims, eps_t, arr, lift=lift,
                  standard_form=standard_form)
    if validate:
        validate_module(mod)
    return mod


def validate_module(m: HModule) -> None:
    """Check shapes and the defining relations (H1) and (H2) exactly."""
    for i in range(m.n):
        e = m.eps[i]
        if e.shape != (m.dims[i], m.dims[i]):
            raise ShapeMismatch(f"loop at vertex {i + 1} has shape {e.shape}")
        if la.matpow(e, m.loop_order(i), m.p).any():
            raise RelationH1Violated(i)
    for (i, j), mats in m.arrows.items():
        fij = m.datum.f(i, j)
        fji = m.datum.f(j, i)
        left = la.matpow(m.eps[i], fji, m.p)
        right = la.matpow(m.eps[j], fij, m.p)
        for g, a in enumerate(mats):
            if a.shape != (m.dims[i], m.dims[j]):
                raise ShapeMismatch(
                    f"arrow ({i + 1},{j + 1})#{g + 1} has shape {a.shape}")
            if ((left @ a - a @ right) % m.p).any():
                raise RelationH2Violated(i, j, g)


def violations(m: HModule) -> list[str]:
    """Collect human-readable relation violations instead of raising."""
    out = []
    for i in range(m.n):
        if la.matpow(m.eps[i], m.loop_order(i), m.p).any():
            out.append(f"(H1) fails at vertex {i + 1}")
    for (i, j), mats in m.arrows.items():
        left = la.matpow(m.eps[i], m.datum.f(j, i), m.p)
        right = la.matpow(m.eps[j], m.datum.f(i, j), m.p)
        for g, a in enumerate(mats):
            if ((left @ a - a @ right) % m.p).any():
                out.append(f"(H2) fails for arrow ({i + 1},{j + 1})#{g + 1}")
    return out


# --- local freeness ---------------------------------------------------------

@dataclass(frozen=True)
class LocalFreenessCertificate:
    ok: bool
    per_vertex: tuple[dict, ...]

    def __bool__(self) -> bool:
        return self.ok


def locally_free_certificate(m: HModule) -> LocalFreenessCertificate:
    """Per vertex: k*c_i must divide dim M_i and rank(Eps_i) must equal
    dim M_i - dim M_i/(k*c_i); this pins the Jordan type to free blocks."""
    rows = []
    ok = True
    for i in range(m.n):
        order = m.loop_order(i)
        d = m.dims[i]
        divisible = d % order == 0
        rk = la.rank(m.eps[i], m.p)
        want = d - d // order if divisible else None
        good = divisible and rk == want
        ok = ok and good
        rows.append({"vertex": i + 1, "dim": d, "loop_order": order,
                     "divisible": divisible, "loop_rank": rk,
                     "required_rank": want, "free": good})
    return LocalFreenessCertificate(ok, tuple(rows))


def is_locally_free(m: HModule) -> bool:
    return locally_free_certificate(m).ok


def rank_vector(m: HModule) -> RankVector:
    cert = locally_free_certificate(m)
    if not cert:
        raise NotLocallyFree(f"module is not locally free: {cert.per_vertex}")
    return RankVector(m.dims[i] // m.loop_order(i) for i in range(m.n))


# --- free modules and standard form ----------------------------------------

def _jordan_block(size: int) -> np.ndarray:
    j = la.zeros(size, size)
    for t in range(size - 1):
        j[t + 1, t] = 1
    return j


def _standard_loop(order: int, r: int) -> np.ndarray:
    e = la.zeros(order * r, order * r)
    for s in range(r):
        for t in range(order - 1):
            e[s * order + t + 1, s * order + t] = 1
    return e


def free_module(datum: CartanDatum, k: int, p: int, r) -> HModule:
    """E^r: rank r_i free column at each vertex, all arrow matrices zero."""
    r = RankVector(r)
    if len(r) != datum.n:
        raise ShapeMismatch(f"rank vector length {len(r)} != {datum.n}")
    eps = [_standard_loop(k * datum.d[i], r[i]) for i in range(datum.n)]
    mod = make_module(datum, k, p, eps, {}, standard_form=True,
                      validate=False)
    lift = _canonical_lift(mod)
    return HModule(datum, k, p, mod.dims, mod.eps, mod.arrows, lift=lift,
                   standard_form=True)


def _canonical_lift(m: HModule) -> dict:
    return {
        "eps": tuple(np.array(e) for e in m.eps),
        "arrows": {key: tuple(np.array(a) for a in mats)
                   for key, mats in m.arrows.items()},
    }


def normalize(m: HModule) -> tuple[HModule, tuple[np.ndarray, ...]]:
    """Conjugate a locally free module into standard loop form.

    Returns (standard module, per-vertex change of basis T_i); columns of
    T_i are the new basis in old coordinates and new maps are
    T_i^{-1} X T_j.
    """
    if not is_locally_free(m):
        raise NotLocallyFree("cannot normalize a non-free loop action")
    ts = []
    for i in range(m.n):
        order = m.loop_order(i)
        r = m.dims[i] // order
        if r == 0:
            ts.append(la.identity(0))
            continue
        img = Subspace.from_rows(m.eps[i].T, m.dims[i], m.p)
        gen_coords = [c for c in range(m.dims[i]) if c not in img.pivots]
        cols = []
        for s in gen_coords:
            v = la.zeros(m.dims[i], 1)
            v[s, 0] = 1
            for t in range(order):
                cols.append(v[:, 0].copy())
                v = (m.eps[i] @ v) % m.p
        t_mat = np.stack(cols, axis=1)
        if la.rank(t_mat, m.p) != m.dims[i]:
            raise InternalCheckError("normalize: generator sweep not a basis")
        ts.append(t_mat)
    tinv = [la.inv(t, m.p) if t.size else t.reshape(0, 0) for t in ts]
    eps = [(tinv[i] @ m.eps[i] @ ts[i]) % m.p for i in range(m.n)]
    arrows = {key: tuple((tinv[key[0]] @ a @ ts[key[1]]) % m.p for a in mats)
              for key, mats in m.arrows.items()}
    std = make_module(m.datum, m.k, m.p, eps, arrows, standard_form=True)
    return std, tuple(ts)


def modules_equal(a: HModule, b: HModule) -> bool:
    """Literal equality of all matrices (not isomorphism)."""
    if (a.datum, a.k, a.p, a.dims) != (b.datum, b.k, b.p, b.dims):
        return False
    if any(not np.array_equal(x, y) for x, y in zip(a.eps, b.eps)):
        return False
    for key in a.arrows:
        if any(not np.array_equal(x, y)
               for x, y in zip(a.arrows[key], b.arrows[key])):
            return False
    return True


# --- structure matrices ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StructureMatrices:
    """Arrow data of a locally free module in loop-standard form.

    mats[(i, j)] has shape (r_i, |c_ij| * r_j, k*c_i): entry [s, col, :] is
    the coefficient list (ascending eps_i-degree) of the (s, col) entry over
    F_p[eps_i]/(eps_i^(k*c_i)).  Column layout: col = (u * g_ij + g) * f_ij + t
    for source generator u, arrow copy g, twist 0 <= t < f_ij.
    """

    datum: CartanDatum
    k: int
    p: int
    rank: RankVector
    mats: dict[tuple[int, int], np.ndarray]

    def parameter_count(self) -> int:
        return sum(m.size for m in self.mats.values())


def structure_parameter_count(datum: CartanDatum, k: int, r) -> int:
    """Number of free F_p entries: sum over (i,j) of k*c_i*|c_ij|*r_i*r_j."""
    r = RankVector(r)
    return sum(k * datum.d[i] * abs(datum.c[i][j]) * r[i] * r[j]
               for i, j in datum.oriented_pairs())


def _structure_shapes(datum: CartanDatum, k: int, r: RankVector):
    shapes = {}
    for i, j in datum.oriented_pairs():
        shapes[(i, j)] = (r[i], abs(datum.c[i][j]) * r[j], k * datum.d[i])
    return shapes


def structure_from_arrays(datum: CartanDatum, k: int, p: int, r,
                          mats) -> StructureMatrices:
    r = RankVector(r)
    shapes = _structure_shapes(datum, k, r)
    out = {}
    for key, shape in shapes.items():
        m = np.asarray(mats.get(key, np.zeros(shape)), dtype=np.int64)
        if m.shape != shape:
            if m.ndim == 2 and m.shape == shape[:2]:
                # constant entries given as scalars
                full = np.zeros(shape, dtype=np.int64)
                full[:, :, 0] = m
                m = full
            else:
                raise ShapeMismatch(
                    f"structure matrix for ({key[0] + 1},{key[1] + 1}) "
                    f"has shape {m.shape}, expected {shape}")
        out[key] = _frozen(m % p)
    return StructureMatrices(datum, k, p, r, out)


def from_structure_matrices(s: StructureMatrices) -> HModule:
    """Expand structure matrices to explicit loop/arrow matrices.

    The loops come out in standard Jordan form; arrow columns at twisted
    source degrees are filled in through the rewriting rule, so (H2) holds
    by construction.  The result is locally free of rank s.rank and carries
    the canonical integer lift of its entries.
    """
    datum, k, p, r = s.datum, s.k, s.p, s.rank
    dims = r.dims(datum, k)
    eps = [_standard_loop(k * datum.d[i], r[i]) for i in range(datum.n)]
    arrows = {}
    for (i, j), u_mat in s.mats.items():
        mi, mj = k * datum.d[i], k * datum.d[j]
        fij, fji = datum.f(i, j), datum.f(j, i)
        gij = datum.g(i, j)
        if u_mat.shape[2] != mi:
            raise EntryDegreeOverflow(
                f"entries for ({i + 1},{j + 1}) must be truncated at "
                f"degree {mi}")
        mats = []
        for g in range(gij):
            a = la.zeros(dims[i], dims[j])
            for u in range(r[j]):
                for tau in range(mj):
                    shift_steps, t = divmod(tau, fij)
                    col = (u * gij + g) * fij + t
                    target_shift = shift_steps * fji
                    if target_shift >= mi:
                        continue
                    for srow in range(r[i]):
                        coeffs = u_mat[srow, col]
                        hi = mi - target_shift
                        a[srow * mi + target_shift:srow * mi + mi,
                          u * mj + tau] = coeffs[:hi]
            mats.append(a)
        arrows[(i, j)] = mats
    mod = make_module(datum, k, p, eps, arrows, standard_form=True)
    lift = _canonical_lift(mod)
    return HModule(datum, k, p, mod.dims, mod.eps, mod.arrows, lift=lift,
                   standard_form=True)


def to_structure_matrices(m: HModule) -> StructureMatrices:
    """Inverse of from_structure_matrices on standard-form modules."""
    if not m.standard_form:
        m, _ = normalize(m)
    r = rank_vector(m)
    out = {}
    for (i, j), mats in m.arrows.items():
        mi, mj = m.loop_order(i), m.loop_order(j)
        fij = m.datum.f(i, j)
        gij = m.datum.g(i, j)
        u_mat = np.zeros((r[i], abs(m.datum.c[i][j]) * r[j], mi),
                         dtype=np.int64)
        for g, a in enumerate(mats):
            for u in range(r[j]):
                for t in range(fij):
                    col = (u * gij + g) * fij + t
                    column = a[:, u * mj + t]
                    for srow in range(r[i]):
                        u_mat[srow, col] = column[srow * mi:(srow + 1) * mi]
        out[(i, j)] = _frozen(u_mat)
    return StructureMatrices(m.datum, m.k, m.p, r, out)


def random_structure(datum: CartanDatum, k: int, p: int, r,
                     seed) -> StructureMatrices:
    rng = la.rng_from(seed)
    r = RankVector(r)
    mats = {key: rng.integers(0, p, size=shape)
            for key, shape in _structure_shapes(datum, k, r).items()}
    return structure_from_arrays(datum, k, p, r, mats)


def random_locally_free(datum: CartanDatum, k: int, p: int, r,
                        seed) -> HModule:
    """Uniform sample of the structure-matrix space, expanded to a module."""
    return from_structure_matrices(random_structure(datum, k, p, r, seed))


def iter_structure_matrices(datum: CartanDatum, k: int, p: int, r
                            ) -> Iterator[StructureMatrices]:
    """All points of the structure-matrix space, in lexicographic order."""
    r = RankVector(r)
    shapes = _structure_shapes(datum, k, r)
    keys = sorted(shapes)
    sizes = [int(np.prod(shapes[key])) for key in keys]
    total = sum(sizes)
    for code in range(p ** total):
        mats = {}
        rest = code
        for key, size in zip(keys, sizes):
            digits = np.zeros(size, dtype=np.int64)
            for t in range(size):
                rest, digit = divmod(rest, p)
                digits[t] = digit
            mats[key] = digits.reshape(shapes[key])
        yield structure_from_arrays(datum, k, p, r, mats)


# --- constructions -----------------------------------------------------------

def direct_sum(a: HModule, b: HModule) -> HModule:
    _same_algebra(a, b)
    eps = [_block_diag(a.eps[i], b.eps[i]) for i in range(a.n)]
    arrows = {}
    for key in a.arrows:
        arrows[key] = [_block_diag(x, y)
                       for x, y in zip(a.arrows[key], b.arrows[key])]
    lift = None
    if a.has_lift() and b.has_lift():
        lift = {
            "eps": tuple(_block_diag(x, y) for x, y in
                         zip(a.lift["eps"], b.lift["eps"])),
            "arrows": {key: tuple(
                _block_diag(x, y) for x, y in
                zip(a.lift["arrows"][key], b.lift["arrows"][key]))
                for key in a.arrows},
        }
    return make_module(a.datum, a.k, a.p, eps, arrows, lift=lift,
                       standard_form=False, validate=False)


def _block_diag(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros((x.shape[0] + y.shape[0], x.shape[1] + y.shape[1]),
                   dtype=np.int64)
    out[:x.shape[0], :x.shape[1]] = x
    out[x.shape[0]:, x.shape[1]:] = y
    return out


def _same_algebra(a: HModule, b: HModule):
    if a.datum != b.datum or a.k != b.k or a.p != b.p:
        raise DatumMismatch("modules live over different algebras")


@dataclass(frozen=True, eq=False)
class SubQuotient:
    sub: HModule
    sub_basis: tuple[np.ndarray, ...]        # columns: basis of U_i in M_i
    quot: HModule
    quot_proj: tuple[np.ndarray, ...]        # projections M_i -> M_i/U_i
    quot_section: tuple[np.ndarray, ...]     # sections of the projections


def sub_quotient(m: HModule, subspaces) -> SubQuotient:
    """Restrict and quotient along per-vertex invariant subspaces.

    Raises NotInvariant when some loop or arrow does not preserve the
    given subspaces.
    """
    subs = list(subspaces)
    if len(subs) != m.n:
        raise ShapeMismatch(f"need {m.n} subspaces, got {len(subs)}")
    for i, u in enumerate(subs):
        if u.ambient != m.dims[i] or u.p != m.p:
            raise ShapeMismatch(f"subspace at vertex {i + 1} mismatched")
    for label, mat, i, j in m.maps_with_labels():
        image = (mat @ subs[j].basis.T).T
        if not subs[i].contains_rows(image):
            raise NotInvariant(f"{label} does not preserve the subspace")
    bases = [u.basis.T.copy() for u in subs]
    qmaps = [la.quotient_map(m.dims[i], subs[i]) for i in range(m.n)]

    def restrict(mat, i, j):
        img = (mat @ bases[j]) % m.p
        return subs[i].coordinates_rows(img.T).T

    def descend(mat, i, j):
        out = (qmaps[i][0] @ mat @ qmaps[j][1]) % m.p
        if ((qmaps[i][0] @ mat @ bases[j]) % m.p).any():
            raise InternalCheckError("quotient map not well defined")
        return out

    sub_eps = [restrict(m.eps[i], i, i) for i in range(m.n)]
    quot_eps = [descend(m.eps[i], i, i) for i in range(m.n)]
    sub_arrows = {}
    quot_arrows = {}
    for (i, j), mats in m.arrows.items():
        sub_arrows[(i, j)] = [restrict(a, i, j) for a in mats]
        quot_arrows[(i, j)] = [descend(a, i, j) for a in mats]
    sub = make_module(m.datum, m.k, m.p, sub_eps, sub_arrows)
    quot = make_module(m.datum, m.k, m.p, quot_eps, quot_arrows)
    return SubQuotient(sub, tuple(_frozen(b) for b in bases),
                       quot, tuple(_frozen(q[0]) for q in qmaps),
                       tuple(_frozen(q[1]) for q in qmaps))


# --- the central nilpotent and integer lifts ---------------------------------

def epsilon_blocks(m: HModule) -> tuple[np.ndarray, ...]:
    """Per-vertex action of the central nilpotent: Eps_i ** c_i.

    The block-diagonal of these commutes with every structure map and its
    k-th power vanishes.
    """
    return tuple(la.matpow(m.eps[i], m.datum.d[i], m.p) for i in range(m.n))


def reduce_mod_p(m: HModule, p_new: int) -> HModule:
    """Reinterpret the integer lift mod another prime and revalidate."""
    if not m.has_lift():
        raise ValidationError("module has no integer lift")
    la.check_prime(p_new)
    eps = [e % p_new for e in m.lift["eps"]]
    arrows = {key: [a % p_new for a in mats]
              for key, mats in m.lift["arrows"].items()}
    try:
        mod = make_module(m.datum, m.k, p_new, eps, arrows,
                          standard_form=m.standard_form)
    except ValidationError as exc:
        raise RelationBrokenAtPrime(
            f"integer lift violates relations mod {p_new}: {exc}") from exc
    return HModule(m.datum, m.k, p_new, mod.dims, mod.eps, mod.arrows,
                   lift=_canonical_lift_from(m.lift), standard_form=m.standard_form)


def _canonical_lift_from(lift: dict) -> dict:
    return {
        "eps": tuple(np.array(e) for e in lift["eps"]),
        "arrows": {key: tuple(np.array(a) for a in mats)
                   for key, mats in lift["arrows"].items()},
    }


def with_canonical_lift(m: HModule) -> HModule:
    """Attach the entrywise lift {0..p-1} -> Z (valid for 0/1-style data)."""
    return HModule(m.datum, m.k, m.p, m.dims, m.eps, m.arrows,
                   lift=_canonical_lift(m), standard_form=m.standard_form)


# --- serialization ------------------------------------------------------------

MODULE_FORMAT_VERSION = 1


def module_to_dict(m: HModule) -> dict:
    out = {"format_version": MODULE_FORMAT_VERSION, "k": m.k, "p": m.p}
    if m.standard_form and is_locally_free(m):
        s = to_structure_matrices(m)
        out["rank"] = list(s.rank)
        out["structure"] = {
            f"{i + 1},{j + 1}": s.mats[(i, j)].tolist()
            for (i, j) in sorted(s.mats)}
    else:
        out["dims"] = list(m.dims)
        out["eps"] = [e.tolist() for e in m.eps]
        out["arrows"] = {f"{i + 1},{j + 1}": [a.tolist() for a in mats]
                         for (i, j), mats in sorted(m.arrows.items())}
    return out


def module_from_dict(datum: CartanDatum, data: dict) -> HModule:
    version = data.get("format_version", MODULE_FORMAT_VERSION)
    if version != MODULE_FORMAT_VERSION:
        raise ValidationError(f"unsupported module format {version}")
    k = int(data["k"])
    p = int(data["p"])
    if "structure" in data:
        mats = {}
        for key, arr in data["structure"].items():
            i, j = (int(x) - 1 for x in key.split(","))
            mats[(i, j)] = np.asarray(arr, dtype=np.int64)
        s = structure_from_arrays(datum, k, p, data["rank"], mats)
        return from_structure_matrices(s)
    eps = [np.asarray(e, dtype=np.int64).reshape(d, d)
           for e, d in zip(data["eps"], data["dims"])]
    arrows = {}
    for key, mats in data.get("arrows", {}).items():
        i, j = (int(x) - 1 for x in key.split(","))
        arrows[(i, j)] = [np.asarray(a, dtype=np.int64) for a in mats]
    mod = make_module(datum, k, p, eps, arrows)
    return with_canonical_lift(mod)
