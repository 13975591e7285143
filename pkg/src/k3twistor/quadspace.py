"""Quadratic spaces over F_p and their scalar extensions.

A space is a symmetric Gram matrix with entries in F_p.  Vectors are lists of
field codes; since prime-field codes embed in every F_{p^m}, the same Gram
serves V and V (x) F_{p^m}.  Products are x^T G y, and v^2 means b(v, v).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import gfield as gf

DEFAULT_BUDGET = 10 ** 7
HYPERBOLIC = ((0, -1), (-1, 0))


class QuadError(ValueError):
    pass


class BudgetExceeded(QuadError):
    pass


@dataclass(frozen=True)
class QuadSpace:
    p: int
    gram: tuple
    allow_degenerate: bool = False

    def __post_init__(self):
        g = tuple(tuple(int(a) % self.p for a in row) for row in self.gram)
        object.__setattr__(self, "gram", g)
        n = len(g)
        if any(len(r) != n for r in g):
            raise QuadError("Gram matrix must be square")
        if any(g[i][j] != g[j][i] for i in range(n) for j in range(n)):
            raise QuadError("Gram matrix must be symmetric")
        if not self.allow_degenerate and n and gf.det(self.Fp, [list(r) for r in g]) == 0:
            raise QuadError("Gram matrix is degenerate")
        nz = tuple((i, j, a) for i, r in enumerate(g) for j, a in enumerate(r) if a)
        object.__setattr__(self, "_nz", nz)

    @property
    def dim(self) -> int:
        return len(self.gram)

    @property
    def Fp(self):
        return gf.field_create(self.p, 1)

    def gram_list(self):
        return [list(r) for r in self.gram]

    def pair(self, F, x, y) -> int:
        add, mul = F.add, F.mul
        s = 0
        for i, j, a in self._nz:
            xi, yj = x[i], y[j]
            if xi and yj:
                s = add(s, mul(a, mul(xi, yj)))
        return s

    def square(self, F, x) -> int:
        return self.pair(F, x, x)

    def gram_of(self, F, rows):
        return [[self.pair(F, x, y) for y in rows] for x in rows]

    def covector(self, F, x):
        """G x, so that pair(x, y) = covector(x) . y."""
        out = [0] * self.dim
        for i, j, a in self._nz:
            if x[j]:
                out[i] = F.add(out[i], F.mul(a, x[j]))
        return out

    def perp(self, F, rows):
        """Basis of the orthogonal complement of the span of rows."""
        if not rows:
            return gf.identity(self.dim)
        return gf.nullspace(F, [self.covector(F, r) for r in rows], self.dim)

    def to_json(self) -> dict:
        return {"p": self.p, "gram": [list(r) for r in self.gram]}

    @classmethod
    def from_json(cls, d):
        return cls(int(d["p"]), tuple(tuple(r) for r in d["gram"]))


@dataclass(frozen=True)
class Subspace:
    ambient: QuadSpace
    m: int
    basis: tuple

    @classmethod
    def spanned(cls, ambient: QuadSpace, m: int, rows):
        F = gf.field_create(ambient.p, m)
        return cls(ambient, m, tuple(tuple(r) for r in gf.row_basis(F, [list(r) for r in rows])))

    @property
    def F(self):
        return gf.field_create(self.ambient.p, self.m)

    @property
    def dim(self):
        return len(self.basis)

    def rows(self):
        return [list(r) for r in self.basis]

    def to_json(self):
        d = self.ambient.to_json()
        d.update({"m": self.m, "basis": gf.matrix_to_json(self.F, self.basis)})
        return d


def block_sum(p: int, *grams) -> tuple:
    n = sum(len(g) for g in grams)
    out = [[0] * n for _ in range(n)]
    off = 0
    for g in grams:
        for i, r in enumerate(g):
            for j, a in enumerate(r):
                out[off + i][off + j] = a % p
        off += len(g)
    return tuple(tuple(r) for r in out)


def trace_plane_gram(p: int):
    """Gram of F_{p^2} on the basis {1, theta} for b(x, y) = Tr(x y^p)."""
    F = gf.field_create(p, 2)
    basis = [1, p]
    def tr(z):
        return F.coeffs(F.add(z, F.frob(z)))[0]
    return tuple(tuple(tr(F.mul(x, F.frob(y))) for y in basis) for x in basis)


def build_standard(p: int, sigma0: int, kind: str = "nonneutral") -> QuadSpace:
    if sigma0 < 1:
        raise QuadError("sigma0 must be at least 1")
    if kind == "neutral":
        blocks = [HYPERBOLIC] * sigma0
    elif kind == "nonneutral":
        blocks = [HYPERBOLIC] * (sigma0 - 1) + [trace_plane_gram(p)]
    else:
        raise QuadError(f"unknown kind {kind!r}")
    return QuadSpace(p, block_sum(p, *blocks))


def add_hyperbolic(Q: QuadSpace) -> QuadSpace:
    """Q + U2, with the new hyperbolic pair as the last two coordinates."""
    return QuadSpace(Q.p, block_sum(Q.p, Q.gram, HYPERBOLIC))


# --- isotropic vectors and the Witt decomposition ---

def _orthogonal_basis(F, Q: QuadSpace, rows):
    """Orthogonal basis of span(rows), assumed non-degenerate."""
    rows = [list(r) for r in rows]
    out = []
    while rows:
        x = next((r for r in rows if Q.square(F, r)), None)
        if x is None:
            # all squares vanish: some pair has nonzero product, use their sum
            for a, b in itertools.combinations(rows, 2):
                if Q.pair(F, a, b):
                    x = gf.vec_add(F, a, b)
                    break
            if x is None:
                raise QuadError("subspace is degenerate")
        out.append(x)
        qx = Q.square(F, x)
        nxt = []
        for r in rows:
            c = F.div(Q.pair(F, r, x), qx)
            y = gf.vec_sub(F, r, gf.vec_scale(F, c, x))
            nxt.append(y)
        rows = gf.row_basis(F, nxt)
    return out


def _rep_one(F, a, b):
    """(x, y) with a x^2 + b y^2 = 1 for nonzero a, b; searched over F."""
    for x in range(F.q):
        r = F.div(F.sub(1, F.mul(a, F.mul(x, x))), b)
        y = F.sqrt(r)
        if y is not None:
            return x, y
    raise QuadError("no representation of 1")


def find_isotropic(F, Q: QuadSpace, rows):
    """A nonzero isotropic vector in span(rows) or None (non-degenerate span)."""
    rows = [list(r) for r in rows]
    for r in rows:
        if not Q.square(F, r):
            return r
    basis = _orthogonal_basis(F, Q, rows)
    if len(basis) < 2:
        return None
    e1, e2 = basis[0], basis[1]
    a, b = Q.square(F, e1), Q.square(F, e2)
    if len(basis) == 2:
        t = F.sqrt(F.neg(F.div(b, a)))
        if t is None:
            return None
        return gf.vec_add(F, gf.vec_scale(F, t, e1), e2)
    e3 = basis[2]
    c = Q.square(F, e3)
    # a x^2 + b y^2 = -c, then x e1 + y e2 + e3 is isotropic
    x, y = _rep_one(F, F.div(a, F.neg(c)), F.div(b, F.neg(c)))
    return gf.vec_add(F, gf.vec_add(F, gf.vec_scale(F, x, e1), gf.vec_scale(F, y, e2)), e3)


def hyperbolic_partner(F, Q: QuadSpace, v, rows=None):
    """Isotropic w in span(rows) with v.w = -1 (rows default to the whole space)."""
    rows = gf.identity(Q.dim) if rows is None else rows
    w = next((list(r) for r in rows if Q.pair(F, v, r)), None)
    if w is None:
        raise QuadError("v is orthogonal to the given span")
    w = gf.vec_scale(F, F.neg(F.inv(Q.pair(F, v, w))), w)
    half = F.div(Q.square(F, w), 2)
    return gf.vec_add(F, w, gf.vec_scale(F, half, v))


def witt_index(Q: QuadSpace, m: int = 1) -> int:
    """Number of hyperbolic planes split off greedily."""
    F = gf.field_create(Q.p, m)
    rows = gf.identity(Q.dim)
    h = 0
    while rows:
        v = find_isotropic(F, Q, rows)
        if v is None:
            break
        w = hyperbolic_partner(F, Q, v, rows)
        h += 1
        rows = gf.intersect(F, rows, Q.perp(F, [v, w]), Q.dim)
    return h


def classify(Q: QuadSpace) -> str:
    if Q.dim % 2:
        raise QuadError("classification needs even dimension")
    if Q.allow_degenerate and gf.det(Q.Fp, Q.gram_list()) == 0:
        raise QuadError("Gram matrix is degenerate")
    return "neutral" if witt_index(Q) == Q.dim // 2 else "nonneutral"


def isotropic_count(Q: QuadSpace, budget: int = DEFAULT_BUDGET) -> int:
    """Number of nonzero isotropic vectors over F_p (vectorized)."""
    p, n = Q.p, Q.dim
    if p ** n > budget:
        raise BudgetExceeded(f"{p}^{n} vectors exceed budget {budget}")
    G = np.array(Q.gram, dtype=np.int64)
    total = 0
    chunk = max(1, min(p ** n, 1 << 18))
    for start in range(0, p ** n, chunk):
        idx = np.arange(start, min(p ** n, start + chunk), dtype=np.int64)
        X = np.stack([(idx // p ** i) % p for i in range(n)], axis=1)
        vals = np.einsum("ki,ij,kj->k", X, G, X) % p
        total += int(np.count_nonzero(vals == 0))
    return total - 1


def isotropic_vectors(Q: QuadSpace, m: int = 1, budget: int = DEFAULT_BUDGET):
    """All nonzero isotropic vectors of Q (x) F_{p^m}, in code order."""
    F = gf.field_create(Q.p, m)
    n = Q.dim
    if F.q ** n > budget:
        raise BudgetExceeded(f"{F.q}^{n} vectors exceed budget {budget}")
    out = []
    for t in itertools.product(range(F.q), repeat=n):
        x = list(reversed(t))
        if any(x) and not Q.square(F, x):
            out.append(x)
    return out


def isotropic_formula(p: int, sigma0: int) -> int:
    """Nonzero isotropic vectors in the non-neutral space of dim 2 sigma0 + 2."""
    return p ** (2 * sigma0 + 1) - p ** (sigma0 + 1) + p ** sigma0 - 1


# --- isometries ---

def is_isometry(F, Q: QuadSpace, M) -> bool:
    """M^T G M = G for M acting on column vectors."""
    G = Q.gram_list()
    return gf.mat_mul(F, gf.mat_mul(F, gf.transpose(M), G), M) == G


def _normal_basis(F, Q: QuadSpace, rows):
    """Orthogonal basis with squares (1, ..., 1, d) of a non-degenerate span."""
    rows = [list(r) for r in rows]
    out = []
    while len(rows) > 1:
        e = _orthogonal_basis(F, Q, rows)
        a, b = Q.square(F, e[0]), Q.square(F, e[1])
        x, y = _rep_one(F, a, b)
        u = gf.vec_add(F, gf.vec_scale(F, x, e[0]), gf.vec_scale(F, y, e[1]))
        out.append(u)
        rows = gf.intersect(F, rows, Q.perp(F, [u]), Q.dim)
    out.extend(rows)
    return out


def _split_radical(F, Q: QuadSpace, W):
    """Coordinates (in terms of W's rows) of a radical basis and a complement."""
    r = len(W)
    Gw = Q.gram_of(F, W)
    rad = gf.nullspace(F, Gw, r) if r else []
    rad = gf.row_basis(F, rad) if rad else []
    comp = []
    cur = list(rad)
    for i in range(r):
        e = [1 if j == i else 0 for j in range(r)]
        if not gf.contains(F, cur, e):
            comp.append(e)
            cur.append(e)
    return rad, comp


def _combine(F, coeffs, rows):
    n = len(rows[0])
    out = [0] * n
    for c, r in zip(coeffs, rows):
        if c:
            out = gf.vec_add(F, out, gf.vec_scale(F, c, r))
    return out


def _dual_isotropic(F, Q, rad_vecs, comp_vecs):
    """Isotropic z_j orthogonal to comp and each other with r_i . z_j = -delta_ij."""
    k = len(rad_vecs)
    if not k:
        return []
    n = Q.dim
    # conditions: comp . z = 0, r_i . z = -delta
    A = [Q.covector(F, c) for c in comp_vecs] + [Q.covector(F, r) for r in rad_vecs]
    Z = []
    for j in range(k):
        rhs = [0] * len(comp_vecs) + [F.neg(1) if i == j else 0 for i in range(k)]
        z = gf.solve(F, A, rhs)
        if z is None:
            raise QuadError("cannot complete the radical to hyperbolic pairs")
        Z.append(z)
    S = Q.gram_of(F, Z)
    out = []
    for j in range(k):
        z = list(Z[j])
        for i in range(k):
            c = F.div(S[i][j], 2)
            if c:
                z = gf.vec_add(F, z, gf.vec_scale(F, c, rad_vecs[i]))
        out.append(z)
    return out


def witt_extend(Q: QuadSpace, W, images, m: int = 1):
    """Isometry M of Q (x) F_{p^m} with M w_i = images_i for each basis row w_i.

    W and images are lists of row vectors.  W must be linearly independent and
    the pairing matrices of W and images must agree.
    """
    F = gf.field_create(Q.p, m)
    W = [list(x) for x in W]
    U = [list(x) for x in images]
    n = Q.dim
    if len(W) != len(U):
        raise QuadError("domain and image have different lengths")
    if gf.det(F, Q.gram_list()) == 0:
        raise QuadError("ambient space is degenerate")
    if W and gf.rank(F, W) != len(W):
        raise QuadError("domain vectors are dependent")
    if Q.gram_of(F, W) != Q.gram_of(F, U):
        raise QuadError("map is not an isometry (Gram mismatch)")
    if U and gf.rank(F, U) != len(U):
        raise QuadError("image vectors are dependent")
    rad, comp = _split_radical(F, Q, W) if W else ([], [])
    src_r = [_combine(F, c, W) for c in rad]
    src_c = [_combine(F, c, W) for c in comp]
    tgt_r = [_combine(F, c, U) for c in rad]
    tgt_c = [_combine(F, c, U) for c in comp]
    src_z = _dual_isotropic(F, Q, src_r, src_c)
    tgt_z = _dual_isotropic(F, Q, tgt_r, tgt_c)
    src_fix = src_r + src_c + src_z
    tgt_fix = tgt_r + tgt_c + tgt_z
    src_rest = Q.perp(F, src_fix) if src_fix else gf.identity(n)
    tgt_rest = Q.perp(F, tgt_fix) if tgt_fix else gf.identity(n)
    if len(src_rest) != len(tgt_rest):
        raise QuadError("complement dimensions differ")
    src_n = _normal_basis(F, Q, src_rest) if src_rest else []
    tgt_n = _normal_basis(F, Q, tgt_rest) if tgt_rest else []
    if src_n:
        d, e = Q.square(F, src_n[-1]), Q.square(F, tgt_n[-1])
        c = F.sqrt(F.div(d, e))
        if c is None:
            raise QuadError("complements are not isometric")
        tgt_n[-1] = gf.vec_scale(F, c, tgt_n[-1])
    S = gf.transpose(src_fix + src_n)
    T = gf.transpose(tgt_fix + tgt_n)
    M = gf.mat_mul(F, T, gf.inverse(F, S))
    if not is_isometry(F, Q, M):
        raise QuadError("internal error: extension is not an isometry")
    return M


# --- v-perp / v and the splitting off of a hyperbolic plane ---

@dataclass(frozen=True)
class Decomposition:
    """Change of basis P = [V basis | v | w] (columns) with block Gram."""

    space: QuadSpace
    v: tuple
    w: tuple
    V: QuadSpace
    P: tuple
    Pinv: tuple

    def to_V(self, F, x):
        """Coordinates in V of a vector of v-perp (v-component discarded)."""
        y = gf.mat_vec(F, [list(r) for r in self.Pinv], x)
        if y[-1]:
            raise QuadError("vector is not orthogonal to v")
        return y[:-2]

    def coords(self, F, x):
        return gf.mat_vec(F, [list(r) for r in self.Pinv], x)

    def from_coords(self, F, y):
        return gf.mat_vec(F, [list(r) for r in self.P], y)

    def section(self, F, y):
        """Lift of a V-vector into the complement of span{v, w}."""
        return self.from_coords(F, list(y) + [0, 0])


def orthogonal_decompose(Q: QuadSpace, v) -> Decomposition:
    F = Q.Fp
    v = [int(a) % Q.p for a in v]
    if not any(v):
        raise QuadError("v must be nonzero")
    if Q.square(F, v):
        raise QuadError("v must be isotropic")
    w = hyperbolic_partner(F, Q, v)
    Vb = Q.perp(F, [v, w])
    V = QuadSpace(Q.p, tuple(tuple(r) for r in Q.gram_of(F, Vb)))
    P = gf.transpose(Vb + [v, w])
    Pinv = gf.inverse(F, P)
    return Decomposition(Q, tuple(v), tuple(w), V, tuple(map(tuple, P)), tuple(map(tuple, Pinv)))


def quotient_perp(Q: QuadSpace, v):
    """The form on v-perp / v together with projection and section maps."""
    D = orthogonal_decompose(Q, v)
    return D.V, D
