"""Supersingular K3 crystals at finite precision.

Everything lives inside an ambient T* (x) W, where T is a Z_p-model of a
supersingular K3 lattice and the ambient Frobenius is Phi = p (1 (x) sigma).
Ambient coordinates use the basis of T*: the unimodular hyperbolic blocks
keep their basis e_i, the p-scaled blocks use f_j / p.  The ambient pairing
is Gint / p with Gint an integer matrix.

A crystal H is a W-lattice given by an exact basis matrix with denominator
p^d; its intrinsic data are the Gram matrix and the matrix A of Phi in the
H-basis (Phi(x) = A sigma(x)), both known modulo p^ledger.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import gfield as gf
from .charspace import CharError, CharSubspace, validate
from .padic import (Lattice, PrecisionError, WittRing, exact_disc_valuation, semilinear_kernel,
                    solve, witt_ring, vp)
from .quadspace import HYPERBOLIC, QuadSpace, classify, trace_plane_gram

EXACT_N = 60


class CrystalError(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


def _block(*blocks):
    n = sum(len(b) for b in blocks)
    out = [[0] * n for _ in range(n)]
    off = 0
    for b in blocks:
        for i, r in enumerate(b):
            for j, a in enumerate(r):
                out[off + i][off + j] = int(a)
        off += len(b)
    return out


# --- Tate models ---

@dataclass(frozen=True)
class TateModel:
    """T = U2^extra + U2(p)^(sigma0-1) + A(p); with anisotropic=False the
    last block is U2(p) instead (a neutral control)."""

    p: int
    sigma0: int
    extra: int = 0
    N: int = 4
    anisotropic: bool = True

    def __post_init__(self):
        if self.sigma0 < 1:
            raise CrystalError("bad-sigma0", "sigma0 must be at least 1")
        if self.extra < 0:
            raise CrystalError("bad-extra")
        G = self.gram
        if exact_disc_valuation(G, self.p) != 2 * self.sigma0:
            raise CrystalError("model", "discriminant valuation is not 2 sigma0")
        inv = _frac_inverse([[Fraction(x) for x in r] for r in G])
        if any((self.p * x).denominator % self.p == 0 for r in inv for x in r):
            raise CrystalError("model", "discriminant group is not p-torsion")

    @property
    def G0(self):
        """Integer lift of the form on T0 (the p-scaled blocks divided by p)."""
        blocks = [HYPERBOLIC] * (self.sigma0 - 1)
        blocks.append(trace_plane_gram(self.p) if self.anisotropic else HYPERBOLIC)
        return _block(*blocks)

    @property
    def uni(self) -> int:
        return 2 * self.extra

    @property
    def rank(self) -> int:
        return 2 * self.extra + 2 * self.sigma0

    @property
    def gram(self):
        """Gram of T in its own basis."""
        return _block(*([HYPERBOLIC] * self.extra), [[self.p * a for a in r] for r in self.G0])

    @property
    def Gint(self):
        """p times the ambient Gram in T*-coordinates."""
        return _block(*([[[self.p * a for a in r] for r in HYPERBOLIC]] * self.extra), self.G0)

    @property
    def scale(self):
        """T-coordinates -> T*-coordinates."""
        return [1] * self.uni + [self.p] * (2 * self.sigma0)

    @property
    def T0(self) -> QuadSpace:
        return QuadSpace(self.p, tuple(tuple(a % self.p for a in r) for r in self.G0))

    def disc_valuation(self) -> int:
        return exact_disc_valuation(self.gram, self.p)

    def to_json(self):
        return {"p": self.p, "sigma0": self.sigma0, "extra": self.extra, "N": self.N,
                "anisotropic": self.anisotropic}


def tate_model(p: int, sigma0: int, extra: int = 0, N: int = 4, anisotropic: bool = True) -> TateModel:
    T = TateModel(p, sigma0, extra, N, anisotropic)
    want = "nonneutral" if anisotropic else "neutral"
    if classify(T.T0) != want:
        raise CrystalError("model", f"T0 is not {want}")
    return T


# --- embedded lattices and crystals ---

@dataclass
class Embedding:
    """H = p^-d * (columns of basis) inside an ambient with pairing Gint / p."""

    p: int
    m: int
    Gint: list
    basis: np.ndarray  # (R, n, m) object array, exact mod p^EXACT_N
    d: int

    @property
    def exact(self) -> WittRing:
        return witt_ring(self.p, self.m, EXACT_N)

    @property
    def rank(self):
        return self.basis.shape[1]

    def to_json(self):
        return {"Gint": [[int(a) for a in r] for r in self.Gint], "d": self.d,
                "basis": [[[int(c) for c in e] for e in row] for row in self.basis]}

    @classmethod
    def from_json(cls, p, m, d):
        B = np.empty((len(d["basis"]), len(d["basis"][0]), m), dtype=object)
        for i, row in enumerate(d["basis"]):
            for j, e in enumerate(row):
                for k, c in enumerate(e):
                    B[i, j, k] = int(c)
        return cls(p, m, d["Gint"], B, int(d["d"]))


@dataclass
class BField:
    """B = a / p for an integral ambient vector a (shape (r, m))."""

    a: np.ndarray
    kind: str
    ledger: int
    t: list | None = None

    def to_json(self):
        return {"a": [[int(c) for c in e] for e in self.a], "kind": self.kind,
                "ledger": self.ledger, "t": self.t}

    @classmethod
    def from_json(cls, d):
        a = np.array(d["a"], dtype=object)
        return cls(a, d["kind"], int(d["ledger"]), d.get("t"))


@dataclass
class K3Crystal:
    ring: WittRing
    gram: np.ndarray
    A: np.ndarray
    ledger: int
    emb: Embedding | None = None
    model: TateModel | None = None
    kind: str = "k3"

    @property
    def n(self) -> int:
        return self.gram.shape[0]

    @property
    def p(self):
        return self.ring.p

    @property
    def m(self):
        return self.ring.m

    def to_json(self):
        d = {"kind": self.kind, "p": self.p, "m": self.m, "N": self.ring.N, "rank": self.n,
             "ledger": self.ledger, "gram": self.ring.matrix_to_json(self.gram),
             "phi": self.ring.matrix_to_json(self.A),
             "model": self.model.to_json() if self.model else None}
        if self.emb is not None:
            d["denom_exp"] = self.emb.d
            d["embedding"] = self.emb.to_json()
        return d


@dataclass
class MukaiCrystal(K3Crystal):
    base: K3Crystal | None = None
    bfields: list = field(default_factory=list)

    def to_json(self):
        d = super().to_json()
        d["base"] = self.base.to_json() if self.base else None
        d["bfields"] = [b.to_json() for b in self.bfields]
        return d


def crystal_from_json(d) -> K3Crystal:
    p, m, L = int(d["p"]), int(d["m"]), int(d["ledger"])
    ring = witt_ring(p, m, L)
    model = TateModel(**d["model"]) if d.get("model") else None
    emb = Embedding.from_json(p, m, d["embedding"]) if d.get("embedding") else None
    kw = dict(ring=ring, gram=ring.matrix_from_json(d["gram"]), A=ring.matrix_from_json(d["phi"]),
              ledger=L, emb=emb, model=model, kind=d.get("kind", "k3"))
    if d.get("kind") == "mukai":
        base = crystal_from_json(d["base"]) if d.get("base") else None
        return MukaiCrystal(**kw, base=base, bfields=[BField.from_json(b) for b in d.get("bfields", [])])
    return K3Crystal(**kw)


def _derive(emb: Embedding, N: int):
    """Gram and Frobenius matrix of an embedded lattice, known mod p^ledger."""
    p, m, d = emb.p, emb.m, emb.d
    Ex = emb.exact
    Mx = emb.basis
    G = Ex.scalar_matrix(np.array(emb.Gint, dtype=object))
    raw = Ex.matmul(Ex.matmul(Ex.transpose(Mx), G), Mx)
    k = 2 * d + 1
    if any(int(c) % p ** k for c in raw.flat):
        raise CrystalError("not-integral", "pairing is not integral on the lattice")
    gram = np.vectorize(lambda c: int(c) // p ** k, otypes=[object])(raw)
    Nw = N + 2 * d + 4
    R = witt_ring(p, m, Nw)
    M = (Mx % R.q).astype(R.dtype)
    Y = R.flatten(p * R.mat_sigma(M) % R.q)
    try:
        X, e = solve(R.rs(M), Y, p, Nw)
    except ValueError as exc:
        raise CrystalError("frobenius-unstable", "Phi does not preserve the lattice") from exc
    ledger = min(N, Nw - e)
    L = witt_ring(p, m, ledger)
    A = R.unflatten(X, M.shape[1]) % L.q
    gram = (gram % L.q).astype(L.dtype)
    return L, gram, A.astype(L.dtype), ledger


def _lift_code(F, code):
    return [int(c) for c in F.coeffs(code)]


def crystal_from_char(K: CharSubspace, T: TateModel, N: int | None = None) -> K3Crystal:
    """H = T (x) W plus lifts of phi(K), i.e. the preimage of phi(K) in T* (x) W."""
    N = T.N if N is None else N
    if N < 3:
        raise PrecisionError(f"precision N={N} is below the required 3", N)
    if K.V != T.T0:
        raise CrystalError("ambient-mismatch", "K does not live on T0")
    K = validate(K.V, K.m, K.rows())
    F, p, m = K.F, T.p, K.m
    Hbar, piv, _ = gf.rref(F, K.frob(1))
    Hbar = Hbar[:T.sigma0]
    r, u = T.rank, T.uni
    cols = []
    for i in range(u):
        c = [[0] * m for _ in range(r)]
        c[i][0] = 1
        cols.append(c)
    for row in Hbar:
        c = [[0] * m for _ in range(r)]
        for j, a in enumerate(row):
            c[u + j] = _lift_code(F, a)
        cols.append(c)
    for j in range(2 * T.sigma0):
        if j not in piv:
            c = [[0] * m for _ in range(r)]
            c[u + j][0] = p
            cols.append(c)
    B = np.array(cols, dtype=object).transpose(1, 0, 2)
    emb = Embedding(p, m, T.Gint, B, 0)
    L, gram, A, ledger = _derive(emb, N)
    return K3Crystal(L, gram, A, ledger, emb, T, "k3")


def plain_crystal(T: TateModel, m: int, N: int | None = None) -> K3Crystal:
    """T (x) W itself, with Phi = p on the Tate basis (no overlattice)."""
    N = T.N if N is None else N
    r = T.rank
    B = np.zeros((r, r, m), dtype=object)
    for i, s in enumerate(T.scale):
        B[i, i, 0] = s
    emb = Embedding(T.p, m, T.Gint, B, 0)
    L, gram, A, ledger = _derive(emb, N)
    return K3Crystal(L, gram, A, ledger, emb, T, "k3")


def unimodular_control(p: int, m: int, n: int, N: int) -> K3Crystal:
    """U2^(n/2) (x) W with Phi = p (1 (x) sigma): every axiom but the rank-one one holds."""
    R = witt_ring(p, m, N)
    gram = R.scalar_matrix(_block(*([HYPERBOLIC] * (n // 2))))
    A = R.scalar_matrix(p * np.eye(n, dtype=np.int64))
    return K3Crystal(R, gram, A, N, None, None, "control")


def scaled_gram_control(H: K3Crystal) -> K3Crystal:
    return replace(H, gram=(H.p * H.gram) % H.ring.q, emb=None, kind="control")


# --- axioms ---

@dataclass
class AxiomReport:
    p2_in_image: bool
    rank_one: bool
    perfect: bool
    frobenius_pairing: bool
    tate_rank: int
    rank: int
    ledger: int

    @property
    def supersingular(self) -> bool:
        return self.tate_rank == self.rank

    @property
    def axioms(self):
        return [self.p2_in_image, self.rank_one, self.perfect, self.frobenius_pairing]

    def passed(self) -> bool:
        return all(self.axioms) and self.supersingular

    def to_json(self):
        return {"p2H_in_PhiH": self.p2_in_image, "Phi_mod_p_rank_one": self.rank_one,
                "pairing_perfect": self.perfect, "Phi_pairing": self.frobenius_pairing,
                "tate_rank": self.tate_rank, "rank": self.rank,
                "supersingular": self.supersingular, "ledger": self.ledger,
                "pass": self.passed()}


def verify_k3(H: K3Crystal) -> AxiomReport:
    if H.ledger < 3:
        raise PrecisionError(f"ledger precision {H.ledger} is below 3", H.ledger)
    R, A, G, n = H.ring, H.A, H.gram, H.n
    p, q = R.p, R.q
    img = Lattice.from_generators(R.rs(A).T, p, R.N)
    ax1 = img.contains_all((p * p) * np.eye(n * R.m, dtype=R.dtype))
    F = R.field
    Abar = [[R.reduce(A[i, j]) for j in range(n)] for i in range(n)]
    ax2 = gf.rank(F, Abar) == 1
    Gbar = [[R.reduce(G[i, j]) for j in range(n)] for i in range(n)]
    ax3 = gf.det(F, Gbar) != 0
    lhs = R.matmul(R.matmul(R.transpose(A), G), A)
    rhs = (p * p) * R.mat_sigma(G) % q
    ax4 = bool(np.array_equal(lhs % q, rhs % q))
    tr = semilinear_kernel(R, A, 1).free_rank
    return AxiomReport(ax1, ax2, ax3, ax4, tr, n, H.ledger)


# --- Tate modules ---

@dataclass
class TateModule:
    basis: list       # rows: ambient vectors (Fractions)
    gram: list        # exact Fractions
    disc_valuation: int
    rank: int

    @property
    def artin(self):
        return self.disc_valuation // 2

    def to_json(self):
        return {"rank": self.rank, "disc_valuation": self.disc_valuation, "artin": self.artin,
                "gram": [[str(x) for x in r] for r in self.gram]}


def tate_module(H: K3Crystal) -> TateModule:
    """T_H = {h : Phi h = p h}; since Phi = p sigma on the ambient, these are
    the vectors of H with Z_p-rational ambient coordinates."""
    emb = H.emb
    if emb is None:
        raise CrystalError("no-embedding", "Tate module needs an embedded crystal")
    p, m, d = emb.p, emb.m, emb.d
    Nw = 2 * d + 8
    R = witt_ring(p, m, Nw)
    M = (emb.basis % R.q).astype(R.dtype)
    gens = R.rs(M).T
    r = M.shape[0]
    order = [i * m + k for i in range(r) for k in range(1, m)] + [i * m for i in range(r)]
    lat = Lattice.from_generators(gens[:, order], p, Nw)
    B = lat.tail(r * (m - 1))
    rows = [[Fraction(int(x), p ** d) for x in row] for row in B]
    Gint = [[Fraction(int(x)) for x in r_] for r_ in emb.Gint]
    gram = [[sum(a * Gint[i][j] * b for i, a in enumerate(x) if a for j, b in enumerate(y) if b) / p
             for y in rows] for x in rows]
    disc = exact_disc_valuation(gram, p)
    missing = sum(1 for v in lat.vals[r * (m - 1):] if v >= Nw)
    return TateModule(rows, gram, disc, r - missing)


def char_from_crystal(H: K3Crystal) -> CharSubspace:
    """K_H = phi^-1 of the image of H in (T*/T) (x) F_{p^m}."""
    T, emb = H.model, H.emb
    if T is None or emb is None or emb.d != 0 or H.kind != "k3":
        raise CrystalError("unsupported", "need an untwisted embedded K3 crystal")
    TH = tate_module(H)
    if TH.rank != H.n:
        raise CrystalError("not-supersingular", f"Tate rank {TH.rank} < {H.n}")
    p, m = T.p, H.m
    F = gf.field_create(p, m)
    u = T.uni
    rows = []
    for j in range(emb.basis.shape[1]):
        col = emb.basis[:, j, :]
        rows.append([F.from_coeffs([int(c) % p for c in col[u + i]]) for i in range(2 * T.sigma0)])
    Hbar = gf.row_basis(F, rows)
    try:
        return validate(T.T0, m, gf.mat_frob(F, Hbar, -1) if Hbar else [])
    except CharError as exc:
        raise CrystalError("not-characteristic", str(exc)) from exc


# --- Mukai crystals, B-fields, twists ---

def mukai_extend(H: K3Crystal) -> MukaiCrystal:
    R, n, p = H.ring, H.n, H.p
    G = np.zeros((n + 2, n + 2, R.m), dtype=R.dtype)
    G[1:n + 1, 1:n + 1] = H.gram
    G[0, n + 1, 0] = G[n + 1, 0, 0] = R.q - 1
    A = np.zeros((n + 2, n + 2, R.m), dtype=R.dtype)
    A[1:n + 1, 1:n + 1] = H.A
    A[0, 0, 0] = A[n + 1, n + 1, 0] = p % R.q
    emb = None
    if H.emb is not None:
        e = H.emb
        r = len(e.Gint)
        Gi = [[0] * (r + 2) for _ in range(r + 2)]
        for i in range(r):
            for j in range(r):
                Gi[i + 1][j + 1] = int(e.Gint[i][j])
        Gi[0][r + 1] = Gi[r + 1][0] = -p
        B = np.zeros((r + 2, n + 2, e.m), dtype=object)
        B[1:r + 1, 1:n + 1] = e.basis
        B[0, 0, 0] = B[r + 1, n + 1, 0] = p ** e.d
        emb = Embedding(p, e.m, Gi, B, e.d)
    return MukaiCrystal(R, G, A, H.ledger, emb, H.model, "mukai", base=H)


def mukai_gram(N_gram):
    n = len(N_gram)
    out = [[Fraction(0)] * (n + 2) for _ in range(n + 2)]
    for i in range(n):
        for j in range(n):
            out[i + 1][j + 1] = Fraction(N_gram[i][j])
    out[0][n + 1] = out[n + 1][0] = Fraction(-1)
    return out


def _bfield_lattice(H: K3Crystal):
    """p (H + sigma H) at precision 2, which decides membership exactly."""
    e = H.emb
    R = witt_ring(e.p, e.m, 2)
    M = (e.basis % R.q).astype(R.dtype)
    gens = np.concatenate([R.rs(M).T, R.rs(R.mat_sigma(M)).T]) * e.p % R.q
    return R, Lattice.from_generators(gens, e.p, 2)


def _as_vector(H: K3Crystal, a):
    r = len(H.emb.Gint)
    a = np.array(a, dtype=object)
    if a.ndim == 1:
        out = np.zeros((r, H.m), dtype=object)
        out[:, 0] = a
        a = out
    if a.shape != (r, H.m):
        raise CrystalError("shape", f"numerator must have shape ({r}, {H.m})")
    return a


def bfield_validate(H: K3Crystal, a, kind: str = "given", t=None) -> BField:
    if H.emb is None or H.emb.d != 0 or H.kind != "k3":
        raise CrystalError("unsupported", "B-fields are checked against an untwisted K3 crystal")
    if H.ledger < 2:
        raise PrecisionError("B-field check needs precision 2", H.ledger)
    a = _as_vector(H, a)
    R, lat = _bfield_lattice(H)
    x = (a % R.q).astype(R.dtype)
    diff = (x - R.mat_sigma(x[:, None, :])[:, 0, :]) % R.q
    if not lat.contains(diff.reshape(-1)):
        raise CrystalError("invalid-bfield", "a - sigma(a) is not in p(H + sigma H)")
    return BField(a, kind, H.ledger - 1, t)


def bfield_sample(H: K3Crystal, kind: str, seed: int, t=None, retries: int = 200) -> BField:
    """Sample a valid B-field numerator.

    essentially-trivial: a = t for t in T (T-coordinates, random if omitted).
    transcendental: a = p * lift(Bbar) with Bbar a fiber point of the twistor
    projection over phi(K_H) whose lift has generic Artin invariant; such a
    is orthogonal to T mod p and not in pH.
    """
    T = H.model
    rng = gf.seeded_rng(seed, H.p, H.m, T.sigma0)
    r = T.rank
    if kind in ("essentially-trivial", "trivial"):
        if t is None:
            t = [0] * T.uni + [int(x) for x in rng.integers(H.p, size=2 * T.sigma0)]
        t = [int(x) for x in t]
        if len(t) != r:
            raise CrystalError("shape", f"t must have length {r}")
        a = [x * s for x, s in zip(t, T.scale)]
        return bfield_validate(H, a, "essentially-trivial", t)
    if kind != "transcendental":
        raise CrystalError("bad-kind", kind)
    from .twistor import fiber_group, artin_of_lift, TwistorContext
    K = char_from_crystal(H)
    Hbar = validate(K.V, K.m, K.frob(1))
    G = fiber_group(Hbar)
    if not G.quotient_basis:
        raise CrystalError("empty", "the fiber over phi(K) has a single point")
    F = Hbar.F
    ctx = TwistorContext.standard(Hbar.V)
    for _ in range(retries):
        coeffs = [int(c) for c in rng.integers(H.p, size=len(G.quotient_basis))]
        Bbar = [0] * Hbar.V.dim
        for c, b in zip(coeffs, G.quotient_basis):
            if c:
                Bbar = gf.vec_add(F, Bbar, gf.vec_scale(F, c, b))
        if not any(Bbar):
            continue
        if artin_of_lift(Hbar, Bbar, ctx, base_sigma=G.sigma).sigma == G.sigma + 1:
            a = np.zeros((r, H.m), dtype=object)
            for j, code in enumerate(Bbar):
                a[T.uni + j] = [H.p * c for c in F.coeffs(code)]
            return bfield_validate(H, a, "transcendental")
    raise CrystalError("empty", f"no transcendental B-field found in {retries} attempts")


def orthogonal_to_T(H: K3Crystal, a) -> bool:
    """a . t = 0 mod p for every t in T (pairing Gint / p, T = scale * Z_p^r)."""
    T, p = H.model, H.p
    a = _as_vector(H, a)
    for j, s in enumerate(T.scale):
        col = sum((a[i] * int(T.Gint[i][j]) for i in range(T.rank) if T.Gint[i][j]),
                  np.zeros(H.m, dtype=object)) * s
        if any(int(c) % (p * p) for c in col):
            return False
    return True


def is_transcendental(H: K3Crystal, B: BField) -> bool:
    """a orthogonal to T mod p with nonzero class, i.e. a not in T + pH."""
    if not orthogonal_to_T(H, B.a):
        return False
    p, m, e, T = H.p, H.m, H.emb, H.model
    R = witt_ring(p, m, 3)
    M = (e.basis % R.q).astype(R.dtype)
    rat = np.zeros((T.rank, T.rank * m), dtype=R.dtype)
    for i, s in enumerate(T.scale):
        rat[i, i * m] = s
    lat = Lattice.from_generators(np.concatenate([R.rs(M).T * p % R.q, rat]), p, 3)
    return not lat.contains((_as_vector(H, B.a) % R.q).astype(R.dtype).reshape(-1))


def _exp_matrix(Ex: WittRing, Gint, a, p):
    """p^3 e^{a/p} on Mukai coordinates (a, b, c), exact."""
    r = len(Gint)
    E = np.zeros((r + 2, r + 2, Ex.m), dtype=object)
    p3 = p ** 3
    E[0, 0, 0] = E[r + 1, r + 1, 0] = p3
    for i in range(r):
        E[1 + i, 1 + i, 0] = p3
        E[1 + i, 0] = (p * p) * a[i] % Ex.q
    Ga = [sum((Ex.mul(a[j], Ex.const(int(Gint[i][j]))) for j in range(r) if Gint[i][j]),
              Ex.zero()) % Ex.q for i in range(r)]
    aGa = sum((Ex.mul(a[i], Ga[i]) for i in range(r)), Ex.zero()) % Ex.q
    E[r + 1, 0] = Ex.mul(aGa, Ex.inv(Ex.const(2)))
    for j in range(r):
        E[r + 1, 1 + j] = p * Ga[j] % Ex.q
    return E


def twist(Ht: MukaiCrystal, B: BField, N: int | None = None) -> MukaiCrystal:
    """e^B applied to the Mukai crystal: (a,b,c) -> (a, b + aB, c + b.B + a B^2/2)."""
    if Ht.emb is None or Ht.kind != "mukai":
        raise CrystalError("unsupported", "twist needs an embedded Mukai crystal")
    N = Ht.ledger - 2 if N is None else min(N, Ht.ledger - 2)
    if N < 3:
        raise PrecisionError(f"ledger {Ht.ledger} leaves {N} digits after the twist; need 3", N)
    e = Ht.emb
    Ex = e.exact
    r = len(e.Gint) - 2
    Gt = [row[1:r + 1] for row in e.Gint[1:r + 1]]
    a = np.array(B.a, dtype=object) % Ex.q
    E = _exp_matrix(Ex, Gt, a, e.p)
    nb = Ex.matmul(E, e.basis)
    d = e.d + 3
    v = min(vp(int(c), e.p, EXACT_N) for c in nb.flat)
    s = min(v, d)
    nb = np.vectorize(lambda c: int(c) // e.p ** s, otypes=[object])(nb)
    emb = Embedding(e.p, e.m, e.Gint, nb, d - s)
    L, gram, A, ledger = _derive(emb, N)
    return MukaiCrystal(L, gram, A, ledger, emb, Ht.model, "mukai", base=Ht.base,
                        bfields=list(Ht.bfields) + [B])


def same_submodule(X: K3Crystal, Y: K3Crystal) -> bool:
    """Equality of the embedded W-lattices."""
    ex, ey = X.emb, Y.emb
    p, m = ex.p, ex.m
    d = max(ex.d, ey.d)
    Nw = 2 * d + 8
    R = witt_ring(p, m, Nw)
    def lat(e):
        M = (e.basis * p ** (d - e.d) % R.q).astype(R.dtype)
        return Lattice.from_generators(R.rs(M).T, p, Nw)
    return lat(ex) == lat(ey)


# --- extended Neron-Severi lattices ---

@dataclass
class ExtNSLattice:
    case: str
    N_gram: list
    p: int
    t: list | None
    basis: list          # columns as rows: vectors in (alpha, N-coords, gamma), Fractions
    gram: list
    disc_valuation: int

    def to_json(self):
        return {"case": self.case, "p": self.p, "t": self.t,
                "gram": [[str(x) for x in r] for r in self.gram],
                "N_gram": [[int(x) for x in r] for r in self.N_gram],
                "disc_valuation": self.disc_valuation}


def _frac_inverse(A):
    n = len(A)
    M = [list(map(Fraction, r)) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(A)]
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            raise ValueError("singular matrix")
        M[c], M[piv] = M[piv], M[c]
        s = M[c][c]
        M[c] = [x / s for x in M[c]]
        for i in range(n):
            if i != c and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[c])]
    return [r[n:] for r in M]


def _pair(G, x, y):
    return sum(a * G[i][j] * b for i, a in enumerate(x) if a for j, b in enumerate(y) if b)


def _check_ns(N_gram, p):
    n = len(N_gram)
    if any(N_gram[i][j] != N_gram[j][i] for i in range(n) for j in range(n)):
        raise CrystalError("bad-lattice", "Gram is not symmetric")
    if any(N_gram[i][i] % 2 for i in range(n)):
        raise CrystalError("bad-lattice", "lattice is not even")
    inv = _frac_inverse(N_gram)
    if any((p * x).denominator % p == 0 for r in inv for x in r):
        raise CrystalError("bad-lattice", "discriminant group is not p-torsion")


def ext_ns(N_gram, case: str, p: int, t=None) -> ExtNSLattice:
    """Extended Neron-Severi lattice in one of the presentations
    trivial: <(1,0,0)> + N + <(0,0,1)>
    essentially-trivial(t): e^{t/p} applied to the trivial presentation
    transcendental: <(p,0,0)> + N + <(0,0,1)>, or e^{t/p} of it when t is given."""
    N_gram = [[int(x) for x in r] for r in N_gram]
    _check_ns(N_gram, p)
    n = len(N_gram)
    if case == "essentially-trivial" and t is None:
        raise CrystalError("missing-t", "essentially-trivial presentation needs t")
    if t is not None:
        t = [int(x) for x in t]
        if len(t) != n:
            raise CrystalError("shape", "t has the wrong length")
        Nt = [sum(N_gram[i][j] * t[j] for j in range(n)) for i in range(n)]
        if any(x % p for x in Nt):
            raise CrystalError("bad-t", "t is not in p N*")
    if case == "trivial":
        lead = Fraction(1)
    elif case in ("essentially-trivial", "transcendental"):
        lead = Fraction(1) if case == "essentially-trivial" else Fraction(p)
    else:
        raise CrystalError("bad-case", case)
    cols = [[lead] + [Fraction(0)] * n + [Fraction(0)]]
    for j in range(n):
        cols.append([Fraction(0)] + [Fraction(int(i == j)) for i in range(n)] + [Fraction(0)])
    cols.append([Fraction(0)] * (n + 1) + [Fraction(1)])
    if t is not None and case != "trivial":
        tp = [Fraction(x, p) for x in t]
        def expo(v):
            a, b, c = v[0], v[1:n + 1], v[n + 1]
            nb = [bi + a * ti for bi, ti in zip(b, tp)]
            nc = c + _pair(N_gram, b, tp) + a * _pair(N_gram, tp, tp) / 2
            return [a] + nb + [nc]
        cols = [expo(v) for v in cols]
    MG = mukai_gram(N_gram)
    gram = [[_pair(MG, x, y) for y in cols] for x in cols]
    if any(x.denominator % p == 0 for r in gram for x in r):
        raise CrystalError("not-integral", "presentation is not p-integral")
    return ExtNSLattice(case, N_gram, p, t, cols, gram, exact_disc_valuation(gram, p))


def _solve_frac(A_rows, v):
    """x with sum x_i A_rows[i] = v (rows independent), or None."""
    n = len(A_rows)
    M = [[A_rows[i][k] for i in range(n)] + [v[k]] for k in range(len(v))]
    rows = len(M)
    piv_cols = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, rows) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        s = M[r][c]
        M[r] = [x / s for x in M[r]]
        for i in range(rows):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [x - f * y for x, y in zip(M[i], M[r])]
        piv_cols.append(c)
        r += 1
    if any(M[i][n] != 0 for i in range(r, rows)):
        return None
    x = [Fraction(0)] * n
    for i, c in enumerate(piv_cols):
        x[c] = M[i][n]
    return x


@dataclass
class Comparison:
    contained: bool
    ens_disc: int
    tate_disc: int

    @property
    def equal(self) -> bool:
        return self.contained and self.ens_disc == self.tate_disc

    def to_json(self):
        return {"contained": self.contained, "ens_disc_valuation": self.ens_disc,
                "tate_disc_valuation": self.tate_disc, "isomorphic": self.equal}


def compare_tate(ens: ExtNSLattice, twisted: K3Crystal) -> Comparison:
    """ens (x) Z_p inside the Tate module of the twisted crystal, with equal discriminants."""
    T = twisted.model
    TM = tate_module(twisted)
    if T is None or [list(r) for r in ens.N_gram] != T.gram or ens.p != T.p:
        return Comparison(False, ens.disc_valuation, TM.disc_valuation)
    n = T.rank
    scale = T.scale
    ok = True
    for v in ens.basis:
        amb = [v[0]] + [v[1 + i] * scale[i] for i in range(n)] + [v[n + 1]]
        x = _solve_frac(TM.basis, amb)
        if x is None or any(c.denominator % ens.p == 0 for c in x):
            ok = False
            break
    return Comparison(ok, ens.disc_valuation, TM.disc_valuation)


def reflection(gram, delta, w):
    """s_delta(w) = w + (delta.w) delta for delta^2 = -2."""
    if _pair(gram, delta, delta) != -2:
        raise CrystalError("not-a-root", "delta^2 must be -2")
    c = _pair(gram, delta, w)
    return [x + c * d for x, d in zip(w, delta)]


# --- lattice duality along twistor fibers ---

@dataclass
class DualityReport:
    sigma0: int
    sigma: int
    dim_N_over_L: int
    dim_Lstar_over_Nstar: int
    dim_pNstar_over_pL: int
    perp_matches: bool

    @property
    def passed(self) -> bool:
        return (self.dim_N_over_L == self.dim_Lstar_over_Nstar == self.sigma0 - self.sigma
                and self.dim_pNstar_over_pL == self.sigma0 + self.sigma and self.perp_matches)

    def to_json(self):
        return {"sigma0": self.sigma0, "sigma": self.sigma, "dim_N_over_L": self.dim_N_over_L,
                "dim_Lstar_over_Nstar": self.dim_Lstar_over_Nstar,
                "dim_pNstar_over_pL": self.dim_pNstar_over_pL,
                "perp_matches": self.perp_matches, "pass": self.passed}


def _det_val(rows, p):
    return exact_disc_valuation(rows, p)


def ns_duality_check(T: TateModel, R) -> DualityReport:
    """Overlattice N = T + (1/p) lift(R) for a rational totally isotropic R in T0,
    checked against the duality and orthogonality relations of T subset N."""
    p = T.p
    R = [[int(x) for x in r] for r in R]
    Fp = gf.field_create(p, 1)
    T0 = T.T0
    for x in R:
        if len(x) != T0.dim or any(not 0 <= a < p for a in x):
            raise CrystalError("bad-subspace", "R must be F_p-rational in T0")
    for x in R:
        for y in R:
            if T0.pair(Fp, x, y):
                raise CrystalError("not-isometric", "R is not totally isotropic; N is not integral")
    R = gf.row_basis(Fp, R) if R else []
    r, u = T.rank, T.uni
    G = [[Fraction(x, p) for x in row] for row in T.Gint]  # ambient pairing
    Lam = [[Fraction(int(i == j) * s) for j in range(r)] for i, s in enumerate(T.scale)]
    gens = [list(map(int, row)) for row in Lam]
    for x in R:
        gens.append([0] * u + list(x))
    lat = Lattice.from_generators(np.array(gens, dtype=np.int64), p, 3)
    Nrows = [[Fraction(int(a)) for a in row] for row in lat.full_basis()]
    for x in Nrows:
        for y in Nrows:
            if _pair(G, x, y).denominator % p == 0:
                raise CrystalError("not-isometric", "overlattice is not integral")
    dual = lambda rows: [list(c) for c in zip(*_frac_inverse(
        [[_pair(G, x, [Fraction(int(k == j)) for k in range(r)]) for j in range(r)] for x in rows]))]
    Nstar = dual(Nrows)
    Lstar = dual(Lam)
    vL, vN = _det_val(Lam, p), _det_val(Nrows, p)
    vLs, vNs = _det_val(Lstar, p), _det_val(Nstar, p)
    dim_N_L = vL - vN
    dim_Ls_Ns = vNs - vLs
    # p N* / p Lam inside p Lam* / p Lam = T0: p-block coordinates of N* mod p
    img = []
    for y in Nstar:
        if any(c.denominator % p == 0 for c in y):
            raise CrystalError("internal", "dual lattice escaped T*")
        img.append([c.numerator * pow(c.denominator, -1, p) % p for c in y[u:]])
    img = gf.row_basis(Fp, img)
    perp = gf.row_basis(Fp, T0.perp(Fp, R)) if R else gf.identity(T0.dim)
    same = len(img) == len(perp) and gf.rank(Fp, img + perp) == len(perp)
    sigma = exact_disc_valuation([[_pair(G, x, y) for y in Nrows] for x in Nrows], p) // 2
    return DualityReport(T.sigma0, sigma, dim_N_L, dim_Ls_Ns, len(img), same)
