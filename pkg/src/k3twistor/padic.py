"""Truncated Witt vectors W_N(F_{p^m}) and linear algebra over Z/p^N.

W_N(F_{p^m}) is modelled as (Z/p^N)[x]/(f) where f is the integer lift of the
canonical modulus; the Frobenius lift sigma sends x to the root of f that
reduces to x^p.  Elements are integer coefficient vectors of length m, and a
W-matrix is an array of shape (rows, cols, m).  Restriction of scalars turns
W-linear maps into Z/p^N matrices, which is where all solving happens.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from . import gfield as gf


class PrecisionError(ArithmeticError):
    """Not enough p-adic digits to decide the question."""

    def __init__(self, msg: str, N: int | None = None, lower_bound: int | None = None):
        self.N = N
        self.lower_bound = lower_bound
        super().__init__(msg)


def int_dtype(q: int, terms: int = 4096):
    """int64 when sums of `terms` products of residues mod q cannot overflow."""
    return np.int64 if q * q * max(terms, 1) < 2 ** 62 else object


def vp(x: int, p: int, cap: int) -> int:
    """p-adic valuation of an integer, capped (0 has valuation cap)."""
    x = int(x)
    if x == 0:
        return cap
    v = 0
    while x % p == 0 and v < cap:
        x //= p
        v += 1
    return v


class WittRing:
    def __init__(self, p: int, m: int, N: int):
        if N < 1:
            raise ValueError("precision N must be >= 1")
        self.field = gf.field_create(p, m)
        self.p, self.m, self.N = p, m, N
        self.q = p ** N
        self.dtype = dt = int_dtype(self.q)
        self.modulus_lift = tuple(self.field.modulus)
        C = np.zeros((m, m), dtype=dt)
        for i in range(1, m):
            C[i, i - 1] = 1
        for i in range(m):
            C[i, m - 1] = (-self.modulus_lift[i]) % self.q
        pows = [np.eye(m, dtype=dt)]
        for _ in range(m - 1):
            pows.append(C @ pows[-1] % self.q)
        self._cpows = np.stack(pows)  # (m, m, m): x^i as a matrix
        self.frob_root = self._newton_root()
        S = np.zeros((m, m), dtype=dt)
        r = self.one()
        for j in range(m):
            S[:, j] = r
            r = self.mul(r, self.frob_root)
        self.S = S % self.q

    def __repr__(self):
        return f"W_{self.N}(F_{self.p}^{self.m})"

    def __eq__(self, other):
        return isinstance(other, WittRing) and (self.p, self.m, self.N) == (other.p, other.m, other.N)

    def __hash__(self):
        return hash((self.p, self.m, self.N))

    def with_precision(self, N: int) -> "WittRing":
        return witt_ring(self.p, self.m, N)

    # -- elements --

    def zero(self):
        return np.zeros(self.m, dtype=self.dtype)

    def one(self):
        e = self.zero()
        e[0] = 1
        return e

    def const(self, c: int):
        e = self.zero()
        e[0] = c % self.q
        return e

    def mult_matrix(self, a):
        return np.tensordot(np.asarray(a, dtype=self.dtype) % self.q, self._cpows, axes=(0, 0)) % self.q

    def mul(self, a, b):
        return self.mult_matrix(a) @ (np.asarray(b, dtype=self.dtype) % self.q) % self.q

    def add(self, a, b):
        return (np.asarray(a) + np.asarray(b)) % self.q

    def sub(self, a, b):
        return (np.asarray(a) - np.asarray(b)) % self.q

    def sigma(self, a, k: int = 1):
        a = np.asarray(a, dtype=self.dtype) % self.q
        for _ in range(k % self.m if self.m > 1 else 0):
            a = self.S @ a % self.q
        return a

    def poly_eval(self, coeffs, r):
        out = self.zero()
        for c in reversed(coeffs):
            out = self.add(self.mul(out, r), self.const(c))
        return out

    def valuation(self, a) -> int:
        return min(vp(int(c), self.p, self.N) for c in np.asarray(a))

    def inv(self, a):
        """Inverse of a unit via Newton iteration from the residue field."""
        a = np.asarray(a, dtype=self.dtype) % self.q
        if self.valuation(a) > 0:
            raise ZeroDivisionError("element is not a unit")
        F = self.field
        inv0 = F.inv(F.from_coeffs([int(c) % self.p for c in a]))
        x = np.array(F.coeffs(inv0), dtype=self.dtype)
        prec = 1
        while prec < self.N:
            x = self.mul(x, self.sub(self.const(2), self.mul(a, x)))
            prec *= 2
        if not np.array_equal(self.mul(a, x), self.one()):
            raise ArithmeticError("unit inverse failed to converge")
        return x

    def reduce(self, a) -> int:
        """Image in the residue field F_{p^m} as a field code."""
        return self.field.from_coeffs([int(c) % self.p for c in np.asarray(a)])

    def teichmuller_free_lift(self, code: int):
        """Digit lift of a field element (coefficients in [0, p))."""
        return np.array(self.field.coeffs(code), dtype=self.dtype)

    def _newton_root(self):
        f = self.modulus_lift
        df = [i * f[i] for i in range(1, len(f))]
        x = np.zeros(self.m, dtype=self.dtype)
        if self.m == 1:
            x[0] = (-f[0]) % self.q if len(f) == 2 else 0
            return x % self.q
        x[1] = 1
        r = self.one()
        for _ in range(self.p):
            r = self.mul(r, x)
        for _ in range(2 * self.N + 4):
            fr = self.poly_eval(f, r)
            if not fr.any():
                break
            r = self.sub(r, self.mul(fr, self.inv(self.poly_eval(df, r))))
        if self.poly_eval(f, r).any():
            raise ArithmeticError("Newton iteration for the Frobenius lift did not converge")
        return r

    # -- W-matrices of shape (r, c, m) --

    def rs(self, A):
        """Restriction of scalars: (r, c, m) -> (r m, c m) integer matrix."""
        A = np.asarray(A, dtype=self.dtype) % self.q
        r, c, _ = A.shape
        blocks = np.einsum("ijk,kab->iajb", A, self._cpows) % self.q
        return blocks.reshape(r * self.m, c * self.m)

    def sigma_rs(self, n: int, k: int = 1):
        """Block-diagonal matrix of sigma^k on flattened W^n."""
        Sk = np.linalg.matrix_power(self.S.astype(object), k % self.m).astype(self.dtype) % self.q \
            if self.m > 1 else np.eye(1, dtype=self.dtype)
        return np.kron(np.eye(n, dtype=self.dtype), Sk) % self.q

    def mat_sigma(self, A, k: int = 1):
        A = np.asarray(A, dtype=self.dtype) % self.q
        if self.m == 1:
            return A
        Sk = np.linalg.matrix_power(self.S.astype(object), k % self.m).astype(self.dtype) % self.q
        return np.einsum("ab,ijb->ija", Sk, A) % self.q

    def matmul(self, A, B):
        A = np.asarray(A, dtype=self.dtype)
        B = np.asarray(B, dtype=self.dtype)
        k, jc, m = B.shape
        Bf = B.transpose(0, 2, 1).reshape(k * m, jc)
        R = self.rs(A) @ (Bf % self.q) % self.q
        return R.reshape(A.shape[0], m, jc).transpose(0, 2, 1)

    def transpose(self, A):
        return np.asarray(A).transpose(1, 0, 2)

    def scalar_matrix(self, M):
        """Integer matrix -> W-matrix with constant entries."""
        M = np.asarray(M, dtype=self.dtype)
        out = np.zeros(M.shape + (self.m,), dtype=self.dtype)
        out[..., 0] = M % self.q
        return out

    def identity(self, n: int):
        return self.scalar_matrix(np.eye(n, dtype=self.dtype))

    def flatten(self, A):
        """(r, c, m) -> (r m, c): columns as flattened W-vectors."""
        A = np.asarray(A)
        r, c, m = A.shape
        return A.transpose(0, 2, 1).reshape(r * m, c)

    def unflatten(self, X, r: int):
        c = X.shape[1]
        return np.asarray(X).reshape(r, self.m, c).transpose(0, 2, 1)

    def element_to_json(self, a):
        return {"N": self.N, "coeffs": [int(c) for c in np.asarray(a) % self.q]}

    def matrix_to_json(self, A):
        return [[[int(c) for c in e] for e in row] for row in np.asarray(A) % self.q]

    def matrix_from_json(self, data):
        return np.array(data, dtype=self.dtype).reshape(len(data), -1, self.m) % self.q


@functools.lru_cache(maxsize=None)
def witt_ring(p: int, m: int, N: int) -> WittRing:
    return WittRing(p, m, N)


# --- Z/p^N linear algebra ---

def howell(M, p: int, N: int):
    """Howell form of the row span of M over Z/p^N.

    Returns (rows, pivots) where pivots[i] = (column, valuation) and rows[i]
    has p^valuation at its pivot column, zeros before it, and entries above
    each pivot reduced below p^valuation.  Every vector of the span whose
    first k entries vanish is a combination of the rows with pivot >= k.
    """
    q = p ** N
    dt = int_dtype(q, 1)
    pool = [r % q for r in np.asarray(M, dtype=dt).reshape(-1, np.shape(M)[-1]) if (r % q).any()]
    ncol = np.shape(M)[-1]
    out, piv = [], []
    for col in range(ncol):
        best = None
        for i, r in enumerate(pool):
            if r[col]:
                v = vp(r[col], p, N)
                if best is None or v < best[0]:
                    best = (v, i)
                    if v == 0:
                        break
        if best is None:
            continue
        v, i = best
        row = pool.pop(i)
        pv = p ** v
        u = int(row[col]) // pv
        row = row * pow(u, -1, q) % q
        nxt = []
        for r in pool:
            c = int(r[col]) // pv
            if c:
                r = (r - c * row) % q
            if r.any():
                nxt.append(r)
        extra = row * (p ** (N - v)) % q
        if extra.any():
            nxt.append(extra)
        for k in range(len(out)):
            c = int(out[k][col]) // pv
            if c:
                out[k] = (out[k] - c * row) % q
        out.append(row)
        piv.append((col, v))
        pool = nxt
    return (np.array(out, dtype=dt).reshape(len(out), ncol), piv)


def kernel(A, p: int, N: int):
    """Generators (rows) of {x : A x = 0 mod p^N}."""
    dt = int_dtype(p ** N, 1)
    A = np.asarray(A, dtype=dt)
    r, c = A.shape
    aug = np.concatenate([A.T % p ** N, np.eye(c, dtype=dt)], axis=1)
    H, piv = howell(aug, p, N)
    rows = [H[i, r:] for i, (col, _) in enumerate(piv) if col >= r]
    return np.array(rows, dtype=dt).reshape(len(rows), c)


def smith_valuations(M, p: int, N: int) -> list[int]:
    """Valuations of the Smith invariants of M over Z/p^N (N stands for zero)."""
    A = np.array(M, dtype=int_dtype(p ** N, 1)) % p ** N
    q = p ** N
    rows, cols = A.shape
    vals = []
    for k in range(min(rows, cols)):
        sub = A[k:, k:]
        nz = np.argwhere(sub != 0)
        if nz.size == 0:
            vals.extend([N] * (min(rows, cols) - k))
            break
        best = None
        for i, j in nz:
            v = vp(sub[i, j], p, N)
            if best is None or v < best[0]:
                best = (v, i + k, j + k)
                if v == 0:
                    break
        v, i, j = best
        A[[k, i]] = A[[i, k]]
        A[:, [k, j]] = A[:, [j, k]]
        pv = p ** v
        u = int(A[k, k]) // pv
        A[k] = A[k] * pow(u, -1, q) % q
        for t in range(k + 1, rows):
            c = int(A[t, k]) // pv
            if c:
                A[t] = (A[t] - c * A[k]) % q
        for t in range(k + 1, cols):
            c = int(A[k, t]) // pv
            if c:
                A[:, t] = (A[:, t] - c * A[:, k]) % q
        vals.append(v)
    return vals


def solve(M, Y, p: int, N: int):
    """X with M X = Y for square M of full rank over Q_p.

    Returns (X mod p^(N-e), e) with e the largest pivot valuation; raises
    PrecisionError when e >= N and ValueError when Y is not in the column span.
    """
    dt = int_dtype(p ** N, max(np.shape(M)))
    M = np.array(M, dtype=dt) % p ** N
    Y = np.array(Y, dtype=dt) % p ** N
    if Y.ndim == 1:
        Y = Y[:, None]
    q = p ** N
    n = M.shape[0]
    perm = list(range(n))
    vals = []
    for k in range(n):
        sub = M[k:, k:]
        nz = np.argwhere(sub != 0)
        if nz.size == 0:
            raise PrecisionError("matrix is singular at this precision", N)
        best = None
        for i, j in nz:
            v = vp(sub[i, j], p, N)
            if best is None or v < best[0]:
                best = (v, i + k, j + k)
                if v == 0:
                    break
        v, i, j = best
        M[[k, i]] = M[[i, k]]
        Y[[k, i]] = Y[[i, k]]
        M[:, [k, j]] = M[:, [j, k]]
        perm[k], perm[j] = perm[j], perm[k]
        pv = p ** v
        inv = pow(int(M[k, k]) // pv, -1, q)
        M[k] = M[k] * inv % q
        Y[k] = Y[k] * inv % q
        for t in range(k + 1, n):
            c = int(M[t, k]) // pv
            if c:
                M[t] = (M[t] - c * M[k]) % q
                Y[t] = (Y[t] - c * Y[k]) % q
        vals.append(v)
    e = max(vals) if vals else 0
    if e >= N:
        raise PrecisionError(f"pivot valuation {e} exhausts precision {N}", N, e)
    prec = p ** (N - e)
    X = np.zeros_like(Y)
    for k in range(n - 1, -1, -1):
        rhs = (Y[k] - M[k, k + 1:] @ X[k + 1:]) % q
        pv = p ** vals[k]
        # rhs is known mod p^(N - e + v), so its residue mod p^v is reliable
        if (rhs % pv).any():
            raise ValueError("right-hand side is not in the column span")
        X[k] = (rhs // pv) % prec
    out = np.zeros_like(X)
    for k, j in enumerate(perm):
        out[j] = X[k]
    return out % prec, e


@dataclass
class Lattice:
    """Full-rank Z_p-lattice in Z_p^D containing p^N Z_p^D, stored mod p^N
    as a triangular basis (one row per column, p^v on the diagonal)."""

    p: int
    N: int
    basis: np.ndarray
    vals: tuple

    @classmethod
    def from_generators(cls, gens, p: int, N: int, dim: int | None = None):
        dt = int_dtype(p ** N, 1)
        gens = np.asarray(gens, dtype=dt)
        D = gens.shape[-1] if dim is None else dim
        gens = gens.reshape(-1, D)
        H, piv = howell(gens, p, N)
        B = np.zeros((D, D), dtype=dt)
        vals = [N] * D
        for row, (col, v) in zip(H, piv):
            B[col] = row
            vals[col] = v
        return cls(p, N, B, tuple(vals))

    @property
    def dim(self):
        return self.basis.shape[0]

    def index_val(self) -> int:
        """ord_p [Z_p^D : L]."""
        return sum(self.vals)

    def contains(self, x) -> bool:
        q = self.p ** self.N
        x = np.array(x, dtype=self.basis.dtype) % q
        for col in range(self.dim):
            if not x[col]:
                continue
            v = self.vals[col]
            if v >= self.N:
                return False
            pv = self.p ** v
            if x[col] % pv:
                return False
            x = (x - (int(x[col]) // pv) * self.basis[col]) % q
        return True

    def contains_all(self, X) -> bool:
        return all(self.contains(x) for x in np.asarray(X, dtype=self.basis.dtype).reshape(-1, self.dim))

    def full_basis(self):
        """Integer triangular basis of the lattice (p^N e_c for missing pivots)."""
        B = self.basis.copy()
        for c in range(self.dim):
            if self.vals[c] >= self.N:
                B[c] = 0
                B[c, c] = self.p ** self.N
        return B

    def __add__(self, other):
        return Lattice.from_generators(np.concatenate([self.full_basis(), other.full_basis()]),
                                       self.p, self.N, self.dim)

    def __eq__(self, other):
        return (isinstance(other, Lattice) and self.vals == other.vals
                and np.array_equal(self.basis % self.p ** self.N, other.basis % other.p ** other.N))

    def tail(self, k: int):
        """Basis of L cap (0^k x Z_p^(D-k)), restricted to the last D-k coordinates."""
        B = self.full_basis()
        return B[k:, k:]


def disc_valuation(G, ring: WittRing | None = None, p: int | None = None, N: int | None = None) -> int:
    """ord_p det G for a Gram matrix over W_N (shape (n, n, m)) or over Z/p^N."""
    if ring is not None:
        A = ring.rs(G)
        p, N, m = ring.p, ring.N, ring.m
    else:
        A = np.asarray(G, dtype=int_dtype(p ** N, len(G)))
        m = 1
    vals = smith_valuations(A, p, N)
    if any(v >= N for v in vals):
        lb = sum(min(v, N) for v in vals)
        raise PrecisionError(f"determinant vanishes mod p^{N}; valuation >= {lb // m}", N, lb // m)
    return sum(vals) // m


def exact_disc_valuation(G, p: int) -> int:
    """ord_p det G for an exact integer or Fraction matrix."""
    from fractions import Fraction
    A = [[Fraction(x) for x in row] for row in G]
    n = len(A)
    det = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if A[i][c] != 0), None)
        if piv is None:
            raise ValueError("Gram matrix is singular")
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det *= A[c][c]
        for i in range(c + 1, n):
            f = A[i][c] / A[c][c]
            if f:
                A[i] = [a - f * b for a, b in zip(A[i], A[c])]
    num, den = det.numerator, det.denominator
    return vp(abs(num), p, 10 ** 6) - vp(den, p, 10 ** 6)


@dataclass
class KernelResult:
    generators: np.ndarray
    orders: list
    free_rank: int


def semilinear_kernel(ring: WittRing, A, c: int, twist: int = 1) -> KernelResult:
    """{h in W_N^n : A sigma^twist(h) = p^c h}, with module structure data.

    generators has shape (k, n, m); orders[i] is the exponent e with p^e
    killing the i-th Smith summand; free_rank counts summands of order p^N.
    """
    A = np.asarray(A, dtype=ring.dtype)
    n = A.shape[0]
    p, N, q = ring.p, ring.N, ring.q
    L = ring.rs(A) @ ring.sigma_rs(n, twist) % q
    L = (L - (p ** c) * np.eye(n * ring.m, dtype=ring.dtype)) % q
    K = kernel(L, p, N)
    if K.shape[0] == 0:
        return KernelResult(np.zeros((0, n, ring.m), dtype=ring.dtype), [], 0)
    sv = smith_valuations(K, p, N)
    orders = [N - v for v in sv if v < N]
    return KernelResult(K.reshape(-1, n, ring.m), orders, sum(1 for v in sv if v == 0))
