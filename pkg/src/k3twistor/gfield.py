"""Exact arithmetic in F_{p^m} and the linear algebra kernels built on it.

Elements are stored as integer codes: the coefficient vector (c_0, ..., c_{m-1})
of c_0 + c_1 x + ... with respect to the canonical modulus is packed as
sum c_i p^i.  Codes below p are the prime-field elements, so an F_p matrix is
also a valid F_{p^m} matrix.  Multiplication, inversion and the Frobenius go
through discrete-log tables; addition uses Zech logarithms.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field

import numpy as np

TABLE_LIMIT = 1 << 21


class FieldError(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _prime_factors(n: int) -> list[int]:
    out, f = [], 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


# --- polynomial helpers over Z/p, coefficient lists constant term first ---

def _ptrim(a):
    while a and a[-1] == 0:
        a.pop()
    return a


def _pmod(a, b, p):
    a = list(a)
    inv = pow(b[-1], -1, p)
    db = len(b) - 1
    while len(_ptrim(a)) - 1 >= db:
        c = a[-1] * inv % p
        s = len(a) - 1 - db
        for i, bi in enumerate(b):
            a[s + i] = (a[s + i] - c * bi) % p
    return a


def _pmulmod(a, b, f, p):
    prod = [0] * (len(a) + len(b) - 1) if a and b else []
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                prod[i + j] = (prod[i + j] + ai * bj) % p
    return _pmod(prod, f, p)


def _ppowmod(a, e, f, p):
    result, base = [1], _pmod(a, f, p)
    while e:
        if e & 1:
            result = _pmulmod(result, base, f, p)
        base = _pmulmod(base, base, f, p)
        e >>= 1
    return result


def _pgcd(a, b, p):
    a, b = _ptrim(list(a)), _ptrim(list(b))
    while b:
        a, b = b, _ptrim(_pmod(a, b, p))
    return a


def is_irreducible(f, p: int) -> bool:
    """Rabin's test for a monic polynomial over F_p."""
    m = len(f) - 1
    if m == 1:
        return True
    x = [0, 1]
    for r in _prime_factors(m):
        h = _ppowmod(x, p ** (m // r), f, p)
        h = h + [0] * max(0, 2 - len(h))
        diff = list(h)
        diff[1] = (diff[1] - 1) % p
        if len(_pgcd(f, diff, p)) > 1:
            return False
    h = _ppowmod(x, p ** m, f, p)
    h = h + [0] * max(0, 2 - len(h))
    h[1] = (h[1] - 1) % p
    return not _ptrim(h)


def canonical_modulus(p: int, m: int) -> tuple[int, ...]:
    """Smallest monic irreducible of degree m, ranking c_0 + c_1 p + ... ."""
    if m == 1:
        return (0, 1)
    for code in range(p ** m):
        coeffs = [(code // p ** i) % p for i in range(m)] + [1]
        if coeffs[0] and is_irreducible(coeffs, p):
            return tuple(coeffs)
    raise FieldError(f"no irreducible of degree {m} mod {p}")


@dataclass(frozen=True, eq=False)
class FieldParams:
    p: int
    m: int
    modulus: tuple
    q: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "q", self.p ** self.m)
        self._build_tables()

    def __repr__(self):
        return f"GF({self.p}^{self.m})"

    def __eq__(self, other):
        return isinstance(other, FieldParams) and (self.p, self.m, self.modulus) == (
            other.p, other.m, other.modulus)

    def __hash__(self):
        return hash((self.p, self.m, self.modulus))

    def __reduce__(self):
        return (field_create, (self.p, self.m))

    # -- table construction --

    def _digits(self, codes):
        return np.stack([(codes // self.p ** i) % self.p for i in range(self.m)], axis=1)

    def _pack(self, digits):
        w = np.array([self.p ** i for i in range(self.m)], dtype=np.int64)
        return digits @ w

    def _mul_arrays(self, A, B):
        """Row-wise product of digit arrays A, B (k x m) modulo the modulus."""
        p, m = self.p, self.m
        k = A.shape[0]
        prod = np.zeros((k, 2 * m - 1), dtype=np.int64)
        for i in range(m):
            prod[:, i:i + m] += A[:, i:i + 1] * B
        prod %= p
        mod = np.array(self.modulus[:-1], dtype=np.int64)
        for d in range(2 * m - 2, m - 1, -1):
            c = prod[:, d:d + 1]
            prod[:, d - m:d] = (prod[:, d - m:d] - c * mod) % p
            prod[:, d] = 0
        return prod[:, :m]

    def _find_generator(self):
        q1 = self.q - 1
        factors = _prime_factors(q1) if q1 > 1 else []
        f = list(self.modulus)
        for code in range(1, self.q):
            g = [(code // self.p ** i) % self.p for i in range(self.m)]
            ok = True
            for r in factors:
                h = _ptrim(_ppowmod(g, q1 // r, f, self.p))
                if h == [1]:
                    ok = False
                    break
            if ok:
                return code
        raise FieldError("no generator")

    def _build_tables(self):
        p, m, q = self.p, self.m, self.q
        if q > TABLE_LIMIT:
            raise FieldError(f"field of order {q} exceeds the table limit {TABLE_LIMIT}")
        q1 = q - 1
        g = self._find_generator()
        if m == 1:
            exp = [1] * q1
            for i in range(1, q1):
                exp[i] = exp[i - 1] * g % p
            exp_arr = np.array(exp, dtype=np.int64)
        else:
            gd = self._digits(np.array([g], dtype=np.int64))
            powers = self._digits(np.array([1], dtype=np.int64))
            step = gd
            while powers.shape[0] < q1:
                nxt = self._mul_arrays(powers, np.repeat(step, powers.shape[0], axis=0))
                powers = np.concatenate([powers, nxt])
                step = self._mul_arrays(step, step)
            exp_arr = self._pack(powers[:q1])
        log_arr = np.full(q, -1, dtype=np.int64)
        log_arr[exp_arr] = np.arange(q1, dtype=np.int64)
        if (log_arr[1:] < 0).any():
            raise FieldError("generator table incomplete")
        plus1 = exp_arr - exp_arr % p + (exp_arr % p + 1) % p
        zech = log_arr[plus1]
        frob = np.zeros(q, dtype=np.int64)
        frob[1:] = exp_arr[(log_arr[1:] * p) % q1]
        exp2 = np.concatenate([exp_arr, exp_arr])
        object.__setattr__(self, "EXP", exp2.tolist())
        object.__setattr__(self, "LOG", log_arr.tolist())
        object.__setattr__(self, "ZECH", zech.tolist())
        object.__setattr__(self, "FROB", frob.tolist())
        object.__setattr__(self, "generator", g)
        object.__setattr__(self, "_half", q1 // 2)

    # -- scalar operations on codes --

    def add(self, a: int, b: int) -> int:
        if not a:
            return b
        if not b:
            return a
        if self.m == 1:
            return (a + b) % self.p
        LOG = self.LOG
        la = LOG[a]
        d = LOG[b] - la
        if d < 0:
            d += self.q - 1
        z = self.ZECH[d]
        if z < 0:
            return 0
        return self.EXP[la + z]

    def neg(self, a: int) -> int:
        if not a:
            return 0
        if self.m == 1:
            return self.p - a
        return self.EXP[self.LOG[a] + self._half]

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if not a or not b:
            return 0
        if self.m == 1:
            return a * b % self.p
        return self.EXP[self.LOG[a] + self.LOG[b]]

    def inv(self, a: int) -> int:
        if not a:
            raise ZeroDivisionError("inverse of zero in " + repr(self))
        la = self.LOG[a]
        return self.EXP[(self.q - 1 - la) % (self.q - 1)]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if not a:
            if e < 0:
                raise ZeroDivisionError("inverse of zero")
            return 1 if e == 0 else 0
        return self.EXP[(self.LOG[a] * e) % (self.q - 1)]

    def frob(self, a: int, k: int = 1) -> int:
        """a^(p^k); negative k is reduced modulo m."""
        k %= self.m
        if not a or k == 0:
            return a
        if k == 1:
            return self.FROB[a]
        return self.EXP[(self.LOG[a] * pow(self.p, k, self.q - 1)) % (self.q - 1)]

    def from_int(self, n: int) -> int:
        return n % self.p

    def coeffs(self, a: int) -> list[int]:
        return [(a // self.p ** i) % self.p for i in range(self.m)]

    def from_coeffs(self, cs) -> int:
        if len(cs) != self.m:
            raise FieldError(f"expected {self.m} coefficients")
        return sum((int(c) % self.p) * self.p ** i for i, c in enumerate(cs))

    def is_rational(self, a: int) -> bool:
        return a < self.p

    def sqrt(self, a: int):
        """Some square root of a, or None."""
        if not a:
            return 0
        la = self.LOG[a]
        if la % 2:
            return None
        return self.EXP[la // 2]

    def to_json(self) -> dict:
        return {"p": self.p, "m": self.m, "modulus": list(self.modulus)}

    def element(self, x) -> "FieldElement":
        if isinstance(x, FieldElement):
            return x
        if isinstance(x, (list, tuple)):
            return FieldElement(self, self.from_coeffs(x))
        return FieldElement(self, int(x) % self.p)


@functools.lru_cache(maxsize=None)
def _field_cached(p: int, m: int) -> FieldParams:
    return FieldParams(p, m, canonical_modulus(p, m))


def field_create(p: int, m: int) -> FieldParams:
    if not isinstance(p, int) or p < 3 or not is_prime(p):
        raise FieldError(f"p must be an odd prime, got {p}")
    if not isinstance(m, int) or m < 1:
        raise FieldError(f"extension degree must be >= 1, got {m}")
    return _field_cached(p, m)


def field_from_json(d: dict) -> FieldParams:
    F = field_create(int(d["p"]), int(d["m"]))
    if "modulus" in d and tuple(d["modulus"]) != F.modulus:
        raise FieldError("modulus is not the canonical one")
    return F


class FieldElement:
    """Immutable element of F_{p^m}, a thin wrapper over an integer code."""

    __slots__ = ("F", "code")

    def __init__(self, F: FieldParams, code: int):
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "code", code)

    def __setattr__(self, *_):
        raise AttributeError("FieldElement is immutable")

    def _other(self, o):
        if isinstance(o, FieldElement):
            if o.F != self.F:
                raise FieldError("elements of different fields")
            return o.code
        if isinstance(o, int):
            return o % self.F.p
        return NotImplemented

    def __add__(self, o):
        c = self._other(o)
        return NotImplemented if c is NotImplemented else FieldElement(self.F, self.F.add(self.code, c))

    __radd__ = __add__

    def __sub__(self, o):
        c = self._other(o)
        return NotImplemented if c is NotImplemented else FieldElement(self.F, self.F.sub(self.code, c))

    def __rsub__(self, o):
        c = self._other(o)
        return NotImplemented if c is NotImplemented else FieldElement(self.F, self.F.sub(c, self.code))

    def __mul__(self, o):
        c = self._other(o)
        return NotImplemented if c is NotImplemented else FieldElement(self.F, self.F.mul(self.code, c))

    __rmul__ = __mul__

    def __truediv__(self, o):
        c = self._other(o)
        return NotImplemented if c is NotImplemented else FieldElement(self.F, self.F.div(self.code, c))

    def __neg__(self):
        return FieldElement(self.F, self.F.neg(self.code))

    def __pow__(self, e: int):
        return FieldElement(self.F, self.F.pow(self.code, e))

    def inverse(self):
        return FieldElement(self.F, self.F.inv(self.code))

    def __eq__(self, o):
        if isinstance(o, FieldElement):
            return self.F == o.F and self.code == o.code
        if isinstance(o, int):
            return self.code == o % self.F.p
        return NotImplemented

    def __hash__(self):
        return hash((self.F, self.code))

    def __bool__(self):
        return self.code != 0

    @property
    def coeffs(self) -> list[int]:
        return self.F.coeffs(self.code)

    def __repr__(self):
        return f"FieldElement({self.coeffs})"


def frobenius(x: FieldElement, k: int = 1) -> FieldElement:
    return FieldElement(x.F, x.F.frob(x.code, k))


# --- matrices: lists of rows of codes ---

def zeros(r: int, c: int) -> list[list[int]]:
    return [[0] * c for _ in range(r)]


def identity(n: int) -> list[list[int]]:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def transpose(M):
    return [list(col) for col in zip(*M)] if M else []


def mat_mul(F: FieldParams, A, B):
    if not A:
        return []
    if len(A[0]) != len(B):
        raise FieldError("dimension mismatch in product")
    add, mul = F.add, F.mul
    Bt = transpose(B)
    out = []
    for row in A:
        nz = [(k, a) for k, a in enumerate(row) if a]
        orow = []
        for col in Bt:
            s = 0
            for k, a in nz:
                b = col[k]
                if b:
                    s = add(s, mul(a, b))
            orow.append(s)
        out.append(orow)
    return out


def mat_vec(F: FieldParams, A, x):
    add, mul = F.add, F.mul
    out = []
    for row in A:
        s = 0
        for a, b in zip(row, x):
            if a and b:
                s = add(s, mul(a, b))
        out.append(s)
    return out


def dot(F: FieldParams, x, y) -> int:
    add, mul = F.add, F.mul
    s = 0
    for a, b in zip(x, y):
        if a and b:
            s = add(s, mul(a, b))
    return s


def vec_add(F, x, y):
    return [F.add(a, b) for a, b in zip(x, y)]


def vec_sub(F, x, y):
    return [F.sub(a, b) for a, b in zip(x, y)]


def vec_scale(F, c, x):
    return [F.mul(c, a) for a in x]


def mat_frob(F: FieldParams, M, k: int = 1):
    k %= F.m
    if k == 0:
        return [list(r) for r in M]
    fr = F.frob
    return [[fr(a, k) for a in row] for row in M]


def vec_frob(F: FieldParams, x, k: int = 1):
    return [F.frob(a, k) for a in x]


def rref(F: FieldParams, M):
    """Reduced row echelon form: (R, pivot columns, rank).

    Pivot search takes the first column with a nonzero entry at or below the
    current row and, within it, the first such row.
    """
    R = [list(r) for r in M]
    if not R:
        return R, [], 0
    rows, cols = len(R), len(R[0])
    add, mul, inv, neg = F.add, F.mul, F.inv, F.neg
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = next((i for i in range(r, rows) if R[i][c]), None)
        if piv is None:
            continue
        R[r], R[piv] = R[piv], R[r]
        s = inv(R[r][c])
        if s != 1:
            R[r] = [mul(s, a) for a in R[r]]
        pr = R[r]
        nzc = [j for j in range(c, cols) if pr[j]]
        for i in range(rows):
            if i != r:
                f = R[i][c]
                if f:
                    nf = neg(f)
                    row = R[i]
                    for j in nzc:
                        row[j] = add(row[j], mul(nf, pr[j]))
        pivots.append(c)
        r += 1
    return R, pivots, r


def rank(F: FieldParams, M) -> int:
    return rref(F, M)[2] if M else 0


def row_basis(F: FieldParams, M):
    """Canonical basis of the row space (nonzero rows of the rref)."""
    if not M:
        return []
    R, _, r = rref(F, M)
    return R[:r]


def nullspace(F: FieldParams, M, ncols: int | None = None):
    """Basis of {x : M x = 0} as a list of vectors."""
    if not M:
        if ncols is None:
            raise FieldError("column count needed for an empty matrix")
        return identity(ncols)
    cols = len(M[0])
    R, piv, r = rref(F, M)
    free = [j for j in range(cols) if j not in set(piv)]
    out = []
    for f in free:
        x = [0] * cols
        x[f] = 1
        for i, pc in enumerate(piv):
            x[pc] = F.neg(R[i][f])
        out.append(x)
    return out


def annihilator(F: FieldParams, rows, n: int):
    """Rows spanning {y : y . r = 0 for every row r} (plain dot product)."""
    return nullspace(F, [list(r) for r in rows], n) if rows else identity(n)


def intersect(F: FieldParams, U, W, n: int):
    """Row-space intersection of two row-spanned subspaces of F^n."""
    if not U or not W:
        return []
    A = annihilator(F, U, n) + annihilator(F, W, n)
    if not A:
        return row_basis(F, identity(n))
    return row_basis(F, nullspace(F, A, n))


def span_sum(F: FieldParams, U, W):
    return row_basis(F, list(U) + list(W))


def contains(F: FieldParams, U, x) -> bool:
    """Whether x lies in the row space spanned by U."""
    if not any(x):
        return True
    if not U:
        return False
    return rank(F, list(U) + [list(x)]) == rank(F, U)


def solve(F: FieldParams, A, b):
    """Some x with A x = b, or None."""
    rows = len(A)
    cols = len(A[0]) if A else 0
    aug = [list(A[i]) + [b[i]] for i in range(rows)]
    R, piv, r = rref(F, aug)
    if cols in piv:
        return None
    x = [0] * cols
    for i, pc in enumerate(piv):
        x[pc] = R[i][cols]
    return x


def inverse(F: FieldParams, A):
    n = len(A)
    aug = [list(A[i]) + identity(n)[i] for i in range(n)]
    R, piv, r = rref(F, aug)
    if piv[:n] != list(range(n)) or r < n:
        raise FieldError("matrix is singular")
    return [row[n:] for row in R[:n]]


def det(F: FieldParams, A) -> int:
    n = len(A)
    M = [list(r) for r in A]
    d = 1
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c]), None)
        if piv is None:
            return 0
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            d = F.neg(d)
        d = F.mul(d, M[c][c])
        s = F.inv(M[c][c])
        for i in range(c + 1, n):
            f = M[i][c]
            if f:
                f = F.neg(F.mul(f, s))
                M[i] = [F.add(a, F.mul(f, b)) for a, b in zip(M[i], M[c])]
    return d


# --- restriction of scalars to F_p ---

def fp_expand(F: FieldParams, vec) -> list[int]:
    """Concatenated coefficient vectors: F_{p^m}^n -> F_p^{mn}."""
    out = []
    for a in vec:
        out.extend(F.coeffs(a))
    return out


def fp_collapse(F: FieldParams, digits) -> list[int]:
    m = F.m
    return [F.from_coeffs(digits[i:i + m]) for i in range(0, len(digits), m)]


def fp_basis(F: FieldParams, rows) -> list[list[int]]:
    """F_p-basis of the F_{p^m}-span of the given vectors."""
    Fp = field_create(F.p, 1)
    gens = []
    for r in row_basis(F, rows):
        for i in range(F.m):
            t = F.p ** i
            gens.append(fp_expand(F, [F.mul(t, a) for a in r]))
    return [fp_collapse(F, g) for g in row_basis(Fp, gens)]


def fp_solve_semilinear(F: FieldParams, L0, L1=None, C=None, twist: int = 1):
    """F_p-basis of {x in F_{p^m}^n : L0 x + L1 phi^twist(x) in colspan(C)}.

    L0 and L1 are s x n matrices over F_{p^m}; C is s x t (its columns span
    the target subspace) or None for the zero subspace.  The condition is
    F_p-linear, so it is solved after restricting scalars to F_p.
    """
    if not L0:
        raise FieldError("empty system")
    s, n = len(L0), len(L0[0])
    if any(len(r) != n for r in L0):
        raise FieldError("ragged L0")
    if L1 is not None and (len(L1) != s or any(len(r) != n for r in L1)):
        raise FieldError("L1 shape does not match L0")
    if C is not None and C and len(C) != s:
        raise FieldError("C must have as many rows as L0")
    if C:
        P = annihilator(F, transpose(C), s)
    else:
        P = identity(s)
    A0 = mat_mul(F, P, L0) if P else []
    A1 = mat_mul(F, P, L1) if (P and L1 is not None) else None
    m, p = F.m, F.p
    cols = []
    for j in range(n):
        for i in range(m):
            t = p ** i
            img = [F.mul(row[j], t) for row in A0]
            if A1 is not None:
                ft = F.frob(t, twist)
                img = [F.add(a, F.mul(row[j], ft)) for a, row in zip(img, A1)]
            cols.append(fp_expand(F, img))
    Fp = field_create(p, 1)
    if not cols or not cols[0]:
        kern = identity(n * m)
    else:
        kern = nullspace(Fp, transpose(cols), n * m)
    return [fp_collapse(F, k) for k in kern]


def fp_span_elements(F: FieldParams, basis):
    """All F_p-combinations of the basis vectors (generator)."""
    n = len(basis[0]) if basis else 0
    for coeffs in itertools.product(range(F.p), repeat=len(basis)):
        v = [0] * n
        for c, b in zip(coeffs, basis):
            if c:
                v = [F.add(x, F.mul(c, y)) for x, y in zip(v, b)]
        yield v


def embed(small: FieldParams, big: FieldParams):
    """Code map F_{p^a} -> F_{p^b} sending x to a fixed root of the small modulus."""
    if small.p != big.p or big.m % small.m:
        raise FieldError("no embedding between these fields")
    if small.m == 1:
        return lambda a: a
    step = (big.q - 1) // (small.q - 1)
    gamma = big.EXP[step]
    mod = small.modulus
    root = None
    y = 1
    for _ in range(small.q - 1):
        val = 0
        power = 1
        for c in mod:
            if c:
                val = big.add(val, big.mul(c, power))
            power = big.mul(power, y)
        if val == 0:
            root = y
            break
        y = big.mul(y, gamma)
    if root is None:
        raise FieldError("modulus has no root in the larger field")
    powers = [1]
    for _ in range(small.m - 1):
        powers.append(big.mul(powers[-1], root))

    @functools.lru_cache(maxsize=None)
    def image(a: int) -> int:
        out = 0
        for c, pw in zip(small.coeffs(a), powers):
            if c:
                out = big.add(out, big.mul(c, pw))
        return out

    return image


def seeded_rng(seed: int, *labels: int):
    """Deterministic numpy Generator; labels split the stream."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(x) for x in labels]])


def random_element(F: FieldParams, rng) -> int:
    return int(rng.integers(F.q))


def random_vector(F: FieldParams, n: int, rng) -> list[int]:
    return [int(x) for x in rng.integers(F.q, size=n)]


def matrix_to_json(F: FieldParams, M):
    return [[F.coeffs(a) for a in row] for row in M]


def matrix_from_json(F: FieldParams, data):
    return [[F.from_coeffs(c) if isinstance(c, list) else int(c) % F.p for c in row] for row in data]
