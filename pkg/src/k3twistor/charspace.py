"""Characteristic subspaces K of V (x) F_{p^m} and their Artin invariants."""

from __future__ import annotations

from dataclasses import dataclass

from . import gfield as gf
from .quadspace import QuadSpace, QuadError, find_isotropic, hyperbolic_partner


class CharError(ValueError):
    """Failure with a short machine-readable reason."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class SamplingError(CharError):
    pass


@dataclass(frozen=True)
class CharSubspace:
    V: QuadSpace
    m: int
    basis: tuple

    @property
    def F(self):
        return gf.field_create(self.V.p, self.m)

    @property
    def sigma0(self) -> int:
        return self.V.dim // 2

    def rows(self):
        return [list(r) for r in self.basis]

    def frob(self, k: int = 1) -> list:
        """Basis rows of phi^k(K) (not necessarily characteristic order)."""
        return gf.row_basis(self.F, gf.mat_frob(self.F, self.rows(), k))

    def to_json(self):
        d = self.V.to_json()
        d.update({"m": self.m, "basis": gf.matrix_to_json(self.F, self.basis)})
        return d

    @classmethod
    def from_json(cls, d):
        V = QuadSpace.from_json(d)
        F = gf.field_create(V.p, int(d["m"]))
        return validate(V, int(d["m"]), gf.matrix_from_json(F, d["basis"]))


@dataclass(frozen=True)
class ArtinData:
    sigma0: int
    sigma: int
    rational_core: tuple

    def to_json(self):
        return {"sigma0": self.sigma0, "sigma": self.sigma,
                "rational_core": [list(r) for r in self.rational_core]}


def validate(V: QuadSpace, m: int, rows) -> CharSubspace:
    if V.dim % 2:
        raise CharError("odd-dimension", f"ambient has dimension {V.dim}")
    F = gf.field_create(V.p, m)
    rows = [list(r) for r in rows]
    if any(len(r) != V.dim for r in rows):
        raise CharError("wrong-length", "basis vectors do not live in the ambient")
    for i, x in enumerate(rows):
        for y in rows[i:]:
            if V.pair(F, x, y):
                raise CharError("not-isotropic", "basis is not totally isotropic")
    basis = gf.row_basis(F, rows)
    s0 = V.dim // 2
    if len(basis) != s0:
        raise CharError("wrong-rank", f"rank {len(basis)}, expected {s0}")
    both = gf.rank(F, basis + gf.mat_frob(F, basis, 1))
    if both != s0 + 1:
        raise CharError("frobenius-rank", f"dim(K + phi K) = {both}, expected {s0 + 1}")
    return CharSubspace(V, m, tuple(tuple(r) for r in basis))


def stable_core(K: CharSubspace):
    """K cap phi K cap phi^2 K cap ..., iterated until it stops shrinking."""
    F, n = K.F, K.V.dim
    W = K.rows()
    while W:
        nxt = gf.intersect(F, W, gf.mat_frob(F, W, 1), n)
        if len(nxt) == len(W):
            return W
        W = nxt
    return []


def rational_points(F, rows, n: int):
    """F_p-basis of the phi-fixed vectors in span(rows)."""
    if not rows:
        return []
    A = gf.annihilator(F, rows, n)
    eye = gf.identity(n)
    neg = [[F.neg(a) for a in r] for r in eye]
    L0 = eye + A
    L1 = neg + [[0] * n for _ in A]
    sols = gf.fp_solve_semilinear(F, L0, L1)
    return gf.row_basis(gf.field_create(F.p, 1), sols) if sols else []


def artin_invariant(K: CharSubspace) -> ArtinData:
    F, n = K.F, K.V.dim
    core = rational_points(F, stable_core(K), n)
    direct = rational_points(F, K.rows(), n)
    if len(core) != len(direct):
        raise CharError("inconsistent", "stable core and direct rational points disagree")
    return ArtinData(K.sigma0, K.sigma0 - len(core), tuple(tuple(r) for r in core))


def from_generator(V: QuadSpace, m: int, e) -> CharSubspace:
    F = gf.field_create(V.p, m)
    s0 = V.dim // 2
    e = list(e)
    if len(e) != V.dim:
        raise CharError("wrong-length", "generator does not live in the ambient")
    if not any(e):
        raise CharError("zero-generator")
    orbit = [e]
    for _ in range(s0):
        orbit.append(gf.vec_frob(F, orbit[-1]))
    for j in range(s0):
        if V.pair(F, e, orbit[j]):
            raise CharError("not-isotropic", f"e . phi^{j}(e) != 0")
    if gf.rank(F, orbit[:s0]) != s0:
        raise CharError("dependent", "e, phi e, ... are linearly dependent")
    if gf.rank(F, orbit) != s0 + 1:
        raise CharError("frobenius-stable", f"phi^{s0}(e) lies in the span")
    return validate(V, m, orbit[:s0])


def crystalline_line(K: CharSubspace):
    F, n = K.F, K.V.dim
    # the intersection can be a line even when K is not strict (sigma0 = 2, sigma = 1)
    if artin_invariant(K).sigma != K.sigma0:
        raise CharError("not-strict", "K meets V nontrivially")
    L = K.rows()
    for i in range(1, K.sigma0):
        L = gf.intersect(F, L, K.frob(i), n)
    if len(L) != 1:
        raise CharError("not-strict", f"intersection has dimension {len(L)}")
    return L[0]


def generator_of(K: CharSubspace):
    """e with K = span(e, phi e, ...): phi^{-(sigma0-1)} of the line generator."""
    return gf.vec_frob(K.F, crystalline_line(K), -(K.sigma0 - 1))


def _check_rational(V, W):
    for r in W:
        if len(r) != V.dim:
            raise CharError("wrong-length", "W does not live in the ambient")
        if any(a >= V.p for a in r):
            raise CharError("not-rational", "W must be an F_p-subspace")


def avoids(K: CharSubspace, W) -> bool:
    W = [list(r) for r in W]
    _check_rational(K.V, W)
    Wb = gf.row_basis(K.F, W) if W else []
    if not Wb:
        return True
    return gf.rank(K.F, K.rows() + Wb) == K.sigma0 + len(Wb)


def contains(K: CharSubspace, W) -> bool:
    W = [list(r) for r in W]
    _check_rational(K.V, W)
    if not W:
        return True
    return gf.rank(K.F, K.rows() + W) == K.sigma0


# --- the lift K(B) along a hyperbolic splitting, used by the sampler and twistor ---

def fiber_solutions(K: CharSubspace):
    """F_p-basis of {B : (1 - phi) B in K + phi K}."""
    F, n = K.F, K.V.dim
    span = gf.row_basis(F, K.rows() + K.frob(1))
    eye = gf.identity(n)
    return gf.fp_solve_semilinear(F, eye, [[F.neg(a) for a in r] for r in eye],
                                  gf.transpose(span))


def lift_coords(K: CharSubspace, B):
    """Rows of K(B) in coordinates (V-part, v-coefficient, w-coefficient)."""
    F, V = K.F, K.V
    rows = [list(x) + [V.pair(F, x, B), 0] for x in K.rows()]
    rows.append(list(B) + [F.div(V.square(F, B), 2), 1])
    return rows


def _split_planes(V: QuadSpace, d: int):
    """Rational change of basis P = [rest | v_1, w_1 | ... | v_d, w_d] (columns)."""
    F = V.Fp
    rows = gf.identity(V.dim)
    pairs = []
    for _ in range(d):
        v = find_isotropic(F, V, rows)
        if v is None:
            raise CharError("no-isotropic", "not enough hyperbolic planes")
        w = hyperbolic_partner(F, V, v, rows)
        pairs.append((v, w))
        rows = gf.intersect(F, rows, V.perp(F, [v, w]), V.dim)
    cols = list(rows)
    for v, w in pairs:
        cols += [v, w]
    return gf.transpose(cols), rows, pairs


def _strict_anisotropic_plane(V: QuadSpace, m: int, rng):
    F = gf.field_create(V.p, m)
    lines = []
    for t in range(F.q):
        e = [1, t]
        if not V.square(F, e):
            lines.append(e)
    if not lines:
        raise SamplingError("no-points", f"the anisotropic plane has no isotropic line over F_{V.p}^{m}")
    e = lines[int(rng.integers(len(lines)))]
    try:
        return from_generator(V, m, e)
    except CharError as exc:
        raise SamplingError("no-points", str(exc)) from exc


def _sample_strict(V: QuadSpace, m: int, rng, retries: int) -> CharSubspace:
    s0 = V.dim // 2
    F = gf.field_create(V.p, m)
    if s0 == 1:
        e = find_isotropic(V.Fp, V, gf.identity(2))
        if e is not None:
            raise SamplingError("neutral", "ambient plane is hyperbolic")
        return _strict_anisotropic_plane(V, m, rng)
    P, rest, pairs = _split_planes(V, 1)
    V1 = QuadSpace(V.p, tuple(tuple(r) for r in V.gram_of(V.Fp, rest)))
    K1 = _sample_strict(V1, m, rng, retries)
    sols = fiber_solutions(K1)
    Fp = gf.field_create(V.p, 1)
    for attempt in range(retries):
        coeffs = [int(c) for c in rng.integers(V.p, size=len(sols))]
        B = [0] * V1.dim
        for c, b in zip(coeffs, sols):
            if c:
                B = gf.vec_add(F, B, gf.vec_scale(F, c, b))
        rows = [gf.mat_vec(F, P, r) for r in lift_coords(K1, B)]
        K = validate(V, m, rows)
        if artin_invariant(K).sigma == s0:
            return K
    raise SamplingError("retries-exhausted",
                        f"no strictly characteristic subspace found after {retries} attempts "
                        f"(p={V.p}, sigma0={s0}, m={m})")


def random_strictly_characteristic(V: QuadSpace, m: int, seed: int, retries: int = 200) -> CharSubspace:
    """Strictly characteristic K over F_{p^m}, deterministic in the seed.

    A rational isotropic v splits V as V' + U2; a strictly characteristic K'
    of V' is sampled recursively and a random fiber point B is tried until
    K'(B) has maximal Artin invariant.  The result is re-derived from its
    generator e so that K = span(e, phi e, ...).
    """
    rng = gf.seeded_rng(seed, V.p, V.dim, m)
    K = _sample_strict(V, m, rng, retries)
    K2 = from_generator(V, m, generator_of(K))
    if K2 != K:
        raise CharError("inconsistent", "generator does not reproduce K")
    return K2


def with_artin(V: QuadSpace, m: int, sigma: int, seed: int, retries: int = 200) -> CharSubspace:
    """K with Artin invariant sigma: d = sigma0 - sigma rational isotropic
    vectors from split hyperbolic planes plus a strict piece on the rest."""
    s0 = V.dim // 2
    if not 1 <= sigma <= s0:
        raise CharError("bad-sigma", f"need 1 <= sigma <= {s0}")
    d = s0 - sigma
    if d == 0:
        return random_strictly_characteristic(V, m, seed, retries)
    F = gf.field_create(V.p, m)
    P, rest, pairs = _split_planes(V, d)
    V1 = QuadSpace(V.p, tuple(tuple(r) for r in V.gram_of(V.Fp, rest)))
    K1 = random_strictly_characteristic(V1, m, seed, retries)
    rows = [v for v, _ in pairs]
    for x in K1.rows():
        y = [0] * V.dim
        for c, r in zip(x, rest):
            if c:
                y = gf.vec_add(F, y, gf.vec_scale(F, c, r))
        rows.append(y)
    K = validate(V, m, rows)
    if artin_invariant(K).sigma != sigma:
        raise CharError("inconsistent", "constructed subspace has the wrong invariant")
    return K
