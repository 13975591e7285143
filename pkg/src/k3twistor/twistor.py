"""Twistor lines: the projection along an isotropic v, its fibers K(B), and censuses."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

from . import gfield as gf
from .charspace import (CharError, CharSubspace, artin_invariant, fiber_solutions,
                        lift_coords, rational_points, validate)
from .quadspace import (QuadSpace, Decomposition, add_hyperbolic, orthogonal_decompose,
                        is_isometry, DEFAULT_BUDGET, BudgetExceeded)


class TwistorError(ValueError):
    pass


@dataclass(frozen=True)
class TwistorContext:
    """V~ with a rational isotropic v; coordinates y = Pinv x read (V-part, a, c)
    for x = V-part + a v + c w, with v.w = -1 and w isotropic."""

    D: Decomposition

    @classmethod
    def standard(cls, V: QuadSpace):
        """V~ = V + U2 with v, w the last two basis vectors."""
        Vt = add_hyperbolic(V)
        n = V.dim
        v = [0] * (n + 2)
        v[n] = 1
        return cls(orthogonal_decompose(Vt, v))

    @classmethod
    def from_vector(cls, Vtilde: QuadSpace, v):
        return cls(orthogonal_decompose(Vtilde, v))

    @property
    def Vtilde(self):
        return self.D.space

    @property
    def V(self):
        return self.D.V

    @property
    def v(self):
        return list(self.D.v)

    @property
    def w(self):
        return list(self.D.w)

    @property
    def P(self):
        return [list(r) for r in self.D.P]

    @property
    def Pinv(self):
        return [list(r) for r in self.D.Pinv]


def _in_span(F, rows, x):
    return gf.contains(F, rows, x)


def project(Kt: CharSubspace, ctx: TwistorContext) -> CharSubspace:
    """Image of K~ cap v-perp in v-perp / v."""
    F = Kt.F
    n = ctx.V.dim
    if _in_span(F, Kt.rows(), [a for a in ctx.v]):
        raise TwistorError("v lies in the subspace; projection undefined")
    Y = [gf.mat_vec(F, ctx.Pinv, r) for r in Kt.rows()]
    # x.v = -(w-coefficient), so v-perp is the kernel of the last coordinate
    combos = gf.nullspace(F, [[y[-1] for y in Y]], len(Y))
    rows = []
    for c in combos:
        y = [0] * (n + 2)
        for a, r in zip(c, Y):
            if a:
                y = gf.vec_add(F, y, gf.vec_scale(F, a, r))
        rows.append(y[:n])
    return validate(ctx.V, Kt.m, rows)


@dataclass
class FiberGroup:
    K: CharSubspace
    ctx: TwistorContext
    sol_basis: list
    core_basis: list
    quotient_basis: list
    rational_core: list
    fp_dim: int
    sigma: int

    @property
    def m(self):
        return self.K.m

    @property
    def components(self) -> int:
        return self.K.V.p ** len(self.rational_core)

    def size(self) -> int:
        return self.K.V.p ** self.fp_dim

    def coset_reps(self, budget: int = DEFAULT_BUDGET):
        """One representative per point of S/K, as F_p-combinations of the quotient basis."""
        if self.size() > budget:
            raise BudgetExceeded(f"fiber of size {self.size()} exceeds budget {budget}")
        F = self.K.F
        n = self.K.V.dim
        for coeffs in itertools.product(range(self.K.V.p), repeat=len(self.quotient_basis)):
            B = [0] * n
            for c, b in zip(coeffs, self.quotient_basis):
                if c:
                    B = gf.vec_add(F, B, gf.vec_scale(F, c, b))
            yield B

    def component_label(self, B) -> tuple:
        """(B.w_i) over the rational core basis; these pairings are F_p-valued."""
        F, V = self.K.F, self.K.V
        return tuple(V.pair(F, B, w) for w in self.rational_core)

    def to_json(self):
        return {"p": self.K.V.p, "sigma0": self.K.sigma0, "sigma": self.sigma, "m": self.m,
                "fp_dim": self.fp_dim, "solution_dim": len(self.sol_basis),
                "components": self.components}


def fiber_group(K: CharSubspace, ctx: TwistorContext | None = None) -> FiberGroup:
    ctx = ctx or TwistorContext.standard(K.V)
    if ctx.V != K.V:
        raise TwistorError("K does not live on the context's quotient space")
    F = K.F
    Fp = gf.field_create(F.p, 1)
    sols = fiber_solutions(K)
    core = gf.fp_basis(F, K.rows())
    span = [gf.fp_expand(F, r) for r in core]
    quot = []
    cur = list(span)
    r = gf.rank(Fp, cur) if cur else 0
    for s in sols:
        ext = cur + [gf.fp_expand(F, s)]
        r2 = gf.rank(Fp, ext)
        if r2 > r:
            quot.append(s)
            cur, r = ext, r2
    data = artin_invariant(K)
    return FiberGroup(K, ctx, sols, core, quot, [list(x) for x in data.rational_core],
                      len(sols) - len(core), data.sigma)


def in_fiber(K: CharSubspace, B) -> bool:
    F = K.F
    span = gf.row_basis(F, K.rows() + K.frob(1))
    return gf.contains(F, span, gf.vec_sub(F, list(B), gf.vec_frob(F, B)))


def lift_K_B(K: CharSubspace, B, ctx: TwistorContext | None = None) -> CharSubspace:
    """K(B) = <x_i + (x_i.B) v, w + B + (B^2/2) v> inside V~."""
    ctx = ctx or TwistorContext.standard(K.V)
    if not in_fiber(K, B):
        raise TwistorError("B - phi(B) is not in K + phi K")
    F = K.F
    rows = [gf.mat_vec(F, ctx.P, y) for y in lift_coords(K, B)]
    return validate(ctx.Vtilde, K.m, rows)


@dataclass(frozen=True)
class LiftArtin:
    sigma: int
    core_in_vperp: bool
    consistent: bool
    rational_core: tuple


def artin_of_lift(K: CharSubspace, B, ctx: TwistorContext | None = None,
                  base_sigma: int | None = None, Kt: CharSubspace | None = None) -> LiftArtin:
    """Artin invariant of K(B) with the certificate K(B) cap V~ inside v-perp.

    The invariant goes up by one exactly when the rational core avoids w-directions.
    """
    ctx = ctx or TwistorContext.standard(K.V)
    Kt = Kt or lift_K_B(K, B, ctx)
    F = K.F
    core = rational_points(F, Kt.rows(), ctx.Vtilde.dim)
    sig = Kt.sigma0 - len(core)
    inside = all(ctx.Vtilde.pair(F, x, ctx.v) == 0 for x in core)
    base = artin_invariant(K).sigma if base_sigma is None else base_sigma
    consistent = sig == (base + 1 if inside else base)
    return LiftArtin(sig, inside, consistent, tuple(tuple(x) for x in core))


# --- the transvections exp(b) ---

def exp_transvection(b, ctx: TwistorContext, m: int):
    """Matrix (original coordinates) of x -> x + (x.b) v, v -> v, w -> w + b + (b^2/2) v."""
    F = gf.field_create(ctx.V.p, m)
    V = ctx.V
    n = V.dim
    b = list(b)
    gb = V.covector(F, b)
    E = gf.identity(n + 2)
    for i in range(n):
        E[n][i] = gb[i]
    for i in range(n):
        E[i][n + 1] = b[i]
    E[n][n + 1] = F.div(V.square(F, b), 2)
    return gf.mat_mul(F, gf.mat_mul(F, ctx.P, E), ctx.Pinv)


def apply_matrix(Kt: CharSubspace, M) -> CharSubspace:
    F = Kt.F
    return validate(Kt.V, Kt.m, [gf.mat_vec(F, M, r) for r in Kt.rows()])


# --- census along twistor lines ---

def _normalized_vprime(F, Vt, x, v):
    """Rescale a rational vector so that x.v = -1 (None if x is in v-perp)."""
    c = Vt.pair(F, x, v)
    if not c:
        return None
    return tuple(F.mul(F.neg(F.inv(c)), a) for a in x)


@dataclass
class CensusReport:
    p: int
    sigma0: int
    sigma: int
    m: int
    fp_dim: int
    components: int
    points_per_component: dict
    histogram: dict
    low_per_line: dict
    expected_low_per_line: int
    vprime_incidence_max: int
    vprime_pairs_checked: int
    dichotomy_exceptions: int
    projection_exceptions: int
    points: int

    @property
    def line_invariant(self):
        return self.sigma + 1

    def passed(self) -> bool:
        return (self.dichotomy_exceptions == 0 and self.projection_exceptions == 0
                and self.vprime_incidence_max <= 1
                and all(c == self.expected_low_per_line for c in self.low_per_line.values())
                and len(self.points_per_component) == self.components)

    def to_json(self):
        return {"p": self.p, "sigma0": self.sigma0, "sigma": self.sigma, "m": self.m,
                "fp_dim": self.fp_dim, "components": self.components,
                "line_invariant": self.line_invariant,
                "points": self.points,
                "points_per_component": {",".join(map(str, k)) or "0": v
                                         for k, v in sorted(self.points_per_component.items())},
                "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
                "sigma_minus_one_per_line": {",".join(map(str, k)) or "0": v
                                             for k, v in sorted(self.low_per_line.items())},
                "expected_sigma_minus_one_per_line": self.expected_low_per_line,
                "vprime_incidence_max": self.vprime_incidence_max,
                "vprime_pairs_checked": self.vprime_pairs_checked,
                "dichotomy_exceptions": self.dichotomy_exceptions,
                "projection_exceptions": self.projection_exceptions,
                "pass": self.passed()}


def line_census(K: CharSubspace, ctx: TwistorContext | None = None,
                budget: int = DEFAULT_BUDGET, check_projection: bool = True) -> CensusReport:
    """Enumerate every fiber point of the projection over K.

    Lines are the fibers' components; a line over K has generic Artin invariant
    sigma(K) + 1, and its special points (invariant sigma(K)) are counted per
    line.  For every rational isotropic v' with v.v' != 0 the number of points
    on a line whose subspace contains v' is tallied.
    """
    ctx = ctx or TwistorContext.standard(K.V)
    G = fiber_group(K, ctx)
    F = K.F
    Vt = ctx.Vtilde
    v = ctx.v
    per_comp = Counter()
    hist = Counter()
    low = Counter()
    incid = Counter()
    bad_dich = bad_proj = npts = 0
    for B in G.coset_reps(budget):
        npts += 1
        label = G.component_label(B)
        per_comp[label] += 1
        Kt = lift_K_B(K, B, ctx)
        if check_projection and project(Kt, ctx) != K:
            bad_proj += 1
        la = artin_of_lift(K, B, ctx, base_sigma=G.sigma, Kt=Kt)
        hist[la.sigma] += 1
        if not la.consistent:
            bad_dich += 1
        if la.sigma == G.sigma:
            low[label] += 1
        core = [list(x) for x in la.rational_core]
        if core:
            seen = set()
            for x in gf.fp_span_elements(F, core):
                vp = _normalized_vprime(F, Vt, x, v)
                if vp is not None and vp not in seen:
                    seen.add(vp)
                    incid[(label, vp)] += 1
    for lab in per_comp:
        low.setdefault(lab, 0)
    return CensusReport(
        p=K.V.p, sigma0=K.sigma0, sigma=G.sigma, m=K.m, fp_dim=G.fp_dim,
        components=G.components, points_per_component=dict(per_comp),
        histogram=dict(hist), low_per_line=dict(low),
        expected_low_per_line=K.V.p ** (2 * G.sigma),
        vprime_incidence_max=max(incid.values(), default=0),
        vprime_pairs_checked=len(incid),
        dichotomy_exceptions=bad_dich, projection_exceptions=bad_proj, points=npts)


def embed_char(K: CharSubspace, m2: int) -> CharSubspace:
    """The same subspace viewed over F_{p^m2}, m | m2."""
    small, big = K.F, gf.field_create(K.V.p, m2)
    f = gf.embed(small, big)
    return validate(K.V, m2, [[f(a) for a in r] for r in K.rows()])


def fiber_dims(K: CharSubspace, factors=(1, 2)) -> dict:
    """fp_dim of the fiber group after base change to F_{p^{m k}} for each k."""
    out = {}
    for k in factors:
        K2 = K if k == 1 else embed_char(K, K.m * k)
        G = fiber_group(K2)
        out[K.m * k] = {"fp_dim": G.fp_dim, "components": G.components,
                        "expected": K.m * k + (K.sigma0 - G.sigma)}
    return out


# --- Moore matrices ---

@dataclass(frozen=True)
class MooreResult:
    rank: int
    det: int | None
    relation: tuple | None

    @property
    def dependent(self) -> bool:
        return self.relation is not None


def moore_matrix(F, lambdas, sigma0: int):
    return [[F.frob(l, j) for j in range(sigma0)] for l in lambdas]


def moore_rank(F, lambdas, sigma0: int | None = None) -> MooreResult:
    """Rank of (lambda_i^{p^j}) and, if any, an F_p-linear relation among the lambdas."""
    lambdas = list(lambdas)
    sigma0 = len(lambdas) if sigma0 is None else sigma0
    if any(l == 0 for l in lambdas):
        raise TwistorError("lambdas must be nonzero")
    M = moore_matrix(F, lambdas, sigma0)
    r = gf.rank(F, M)
    d = gf.det(F, M) if len(lambdas) == sigma0 else None
    Fp = gf.field_create(F.p, 1)
    cols = [F.coeffs(l) for l in lambdas]
    kern = gf.nullspace(Fp, gf.transpose(cols), len(lambdas))
    rel = tuple(kern[0]) if kern else None
    return MooreResult(r, d, rel)
