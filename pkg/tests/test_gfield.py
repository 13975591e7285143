import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from k3twistor import gfield as gf
from k3twistor.gfield import FieldError, FieldElement, field_create, frobenius


def _has_root(f, p):
    return any(sum(c * pow(x, i, p) for i, c in enumerate(f)) % p == 0 for x in range(p))


def _brute_modulus(p, m):
    """Smallest integer code among monic irreducibles of degree m <= 3 (no roots)."""
    for code in range(p ** m):
        f = [(code // p ** i) % p for i in range(m)] + [1]
        if m == 1 or not _has_root(f, p):
            return tuple(f)


@pytest.mark.parametrize("p,m", [(3, 1), (3, 2), (3, 3), (5, 2), (5, 3), (7, 2), (11, 2)])
def test_modulus_matches_exhaustive_scan(p, m):
    assert field_create(p, m).modulus == _brute_modulus(p, m)


def test_modulus_examples():
    assert field_create(3, 1).modulus == (0, 1)
    assert field_create(3, 2).modulus == (1, 0, 1)
    assert field_create(5, 2).modulus == (2, 0, 1)


@pytest.mark.parametrize("p,m", [(2, 1), (4, 1), (9, 2), (3, 0), (1, 1)])
def test_bad_parameters(p, m):
    with pytest.raises(FieldError):
        field_create(p, m)


def test_irreducibility_test_agrees_with_factor_search():
    p = 3
    for code in range(p ** 4):
        f = [(code // p ** i) % p for i in range(4)] + [1]
        # a quartic is reducible iff it has a root or factors into two monic quadratics
        reducible = _has_root(f, p)
        if not reducible:
            for a, b in itertools.product(range(p ** 2), repeat=2):
                g = [a % p, a // p, 1]
                h = [b % p, b // p, 1]
                prod = [0] * 5
                for i, x in enumerate(g):
                    for j, y in enumerate(h):
                        prod[i + j] = (prod[i + j] + x * y) % p
                if prod == f:
                    reducible = True
                    break
        assert gf.is_irreducible(f, p) == (not reducible)


@pytest.mark.parametrize("p,m", [(3, 4), (5, 3), (7, 2)])
def test_field_axioms_on_random_triples(p, m):
    F = field_create(p, m)
    rng = np.random.default_rng(p * 100 + m)
    for _ in range(1000):
        a, b, c = (int(x) for x in rng.integers(F.q, size=3))
        assert F.mul(F.mul(a, b), c) == F.mul(a, F.mul(b, c))
        assert F.add(F.add(a, b), c) == F.add(a, F.add(b, c))
        assert F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c))
        assert F.add(a, F.neg(a)) == 0
        if a:
            assert F.mul(a, F.inv(a)) == 1


def test_arithmetic_matches_polynomial_reduction():
    F = field_create(3, 2)  # x^2 + 1
    x = F.from_coeffs([0, 1])
    assert F.mul(x, x) == F.from_coeffs([2, 0])
    assert F.coeffs(F.add(F.from_coeffs([2, 1]), F.from_coeffs([2, 2]))) == [1, 0]


@pytest.mark.parametrize("p,m", [(3, 4), (5, 2), (3, 6)])
def test_frobenius_is_a_ring_homomorphism(p, m):
    F = field_create(p, m)
    rng = np.random.default_rng(7)
    for _ in range(300):
        a, b = (int(x) for x in rng.integers(F.q, size=2))
        assert F.frob(F.add(a, b)) == F.add(F.frob(a), F.frob(b))
        assert F.frob(F.mul(a, b)) == F.mul(F.frob(a), F.frob(b))
        assert F.frob(a) == F.pow(a, p)
        for k in (-3, -1, 2, 5):
            assert F.frob(F.frob(a, k), -k) == a
        assert F.frob(a, m) == a and F.frob(a, 0) == a


def test_frobenius_fixes_prime_field():
    F = field_create(5, 3)
    for c in range(5):
        assert all(F.frob(c, k) == c for k in range(-2, 4))
        assert F.is_rational(c)


def test_field_element_wrapper():
    F = field_create(3, 2)
    x = F.element([0, 1])
    assert x * x == F.element([2, 0])
    assert (x + 1) - 1 == x
    assert x / x == 1
    assert x ** 8 == 1
    assert frobenius(x) == x ** 3
    assert frobenius(frobenius(x, 1), -1) == x
    assert x.coeffs == [0, 1]
    with pytest.raises(AttributeError):
        x.code = 3
    with pytest.raises(FieldError):
        x + field_create(5, 2).element([1, 0])


def test_sqrt():
    F = field_create(5, 2)
    for a in range(F.q):
        r = F.sqrt(a)
        squares = {F.mul(b, b) for b in range(F.q)}
        assert (r is not None) == (a in squares)
        if r is not None:
            assert F.mul(r, r) == a


def test_json_roundtrip():
    F = field_create(5, 3)
    assert gf.field_from_json(F.to_json()) == F
    M = [[1, 7, 30], [0, 124, 2]]
    assert gf.matrix_from_json(F, gf.matrix_to_json(F, M)) == M


def test_rref_examples():
    F = field_create(3, 1)
    R, piv, r = gf.rref(F, gf.identity(3))
    assert R == gf.identity(3) and r == 3
    Z = gf.zeros(2, 3)
    assert gf.rref(F, Z)[2] == 0
    assert gf.rank(F, [[1, 1], [1, 1]]) == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 4), st.integers(1, 5))
def test_rref_idempotent_and_row_space(seed, r, c):
    F = field_create(3, 2)
    rng = np.random.default_rng(seed)
    M = [gf.random_vector(F, c, rng) for _ in range(r)]
    R, piv, rk = gf.rref(F, M)
    assert gf.rref(F, R)[0] == R
    rows = R[:rk]
    assert all(gf.contains(F, rows, x) for x in M)
    assert all(gf.contains(F, M, x) for x in rows)


def test_nullspace_intersect_solve():
    F = field_create(5, 2)
    rng = np.random.default_rng(3)
    for _ in range(30):
        A = [gf.random_vector(F, 5, rng) for _ in range(3)]
        for k in gf.nullspace(F, A, 5):
            assert not any(gf.mat_vec(F, A, k))
        U = [gf.random_vector(F, 5, rng) for _ in range(3)]
        W = [gf.random_vector(F, 5, rng) for _ in range(3)]
        I = gf.intersect(F, U, W, 5)
        assert len(I) == 1  # 3 + 3 - 5 generically
        assert gf.contains(F, U, I[0]) and gf.contains(F, W, I[0])
        x = gf.random_vector(F, 5, rng)
        b = gf.mat_vec(F, A, x)
        y = gf.solve(F, A, b)
        assert gf.mat_vec(F, A, y) == b
    sq = [[1, 2], [3, 4]]
    inv = gf.inverse(F, sq)
    assert gf.mat_mul(F, sq, inv) == gf.identity(2)
    assert gf.solve(F, [[1, 0], [1, 0]], [1, 2]) is None


def _brute_semilinear(F, L0, L1, C, n):
    span = gf.row_basis(F, gf.transpose(C)) if C else []
    sols = []
    for codes in itertools.product(range(F.q), repeat=n):
        x = list(codes)
        y = gf.vec_add(F, gf.mat_vec(F, L0, x), gf.mat_vec(F, L1, gf.vec_frob(F, x)))
        if (not any(y)) or (span and gf.contains(F, span, y)):
            sols.append(x)
    return sols


def test_semilinear_solver_examples():
    F = field_create(3, 4)
    fixed = gf.fp_solve_semilinear(F, [[1]], [[F.neg(1)]])
    assert len(fixed) == 1 and F.is_rational(fixed[0][0])
    assert len(gf.fp_solve_semilinear(F, [[1]], [[F.neg(1)]], [[1]])) == 4


@pytest.mark.parametrize("seed", range(6))
def test_semilinear_solver_against_enumeration(seed):
    F = field_create(3, 2)
    rng = np.random.default_rng(seed)
    n = 2
    L0 = [gf.random_vector(F, n, rng) for _ in range(3)]
    L1 = [gf.random_vector(F, n, rng) for _ in range(3)]
    C = [[x] for x in gf.random_vector(F, 3, rng)] if seed % 2 else None
    sols = gf.fp_solve_semilinear(F, L0, L1, C)
    brute = _brute_semilinear(F, L0, L1, C, n)
    assert len(brute) == 3 ** len(sols)
    assert all(x in brute for x in gf.fp_span_elements(F, sols)) if sols else brute == [[0, 0]]


def test_semilinear_condition_from_a_characteristic_subspace():
    # (1 - phi) B in K + phi K for K a line in the trace plane over F_81, against all 81^2 B
    from k3twistor.charspace import random_strictly_characteristic
    from k3twistor.quadspace import build_standard
    K = random_strictly_characteristic(build_standard(3, 1), 4, seed=0)
    F = K.F
    span = gf.row_basis(F, K.rows() + K.frob(1))
    eye = gf.identity(2)
    sols = gf.fp_solve_semilinear(F, eye, [[F.neg(a) for a in r] for r in eye], gf.transpose(span))
    count = sum(1 for a in range(F.q) for b in range(F.q)
                if gf.contains(F, span, gf.vec_sub(F, [a, b], gf.vec_frob(F, [a, b]))))
    assert count == 3 ** len(sols)


def test_fp_basis_counts_points():
    F = field_create(3, 2)
    rows = [[1, 2, 0]]
    assert len(gf.fp_basis(F, rows)) == 2
    assert len(list(gf.fp_span_elements(F, gf.fp_basis(F, rows)))) == F.q


def test_embedding_is_a_homomorphism():
    small, big = field_create(3, 2), field_create(3, 4)
    f = gf.embed(small, big)
    for a in range(small.q):
        for b in range(small.q):
            assert f(small.mul(a, b)) == big.mul(f(a), f(b))
            assert f(small.add(a, b)) == big.add(f(a), f(b))
        assert f(small.frob(a)) == big.frob(f(a))
    with pytest.raises(FieldError):
        gf.embed(field_create(3, 2), field_create(3, 3))


def test_seeded_rng_is_deterministic():
    a = gf.seeded_rng(5, 3, 4).integers(100, size=8)
    b = gf.seeded_rng(5, 3, 4).integers(100, size=8)
    c = gf.seeded_rng(6, 3, 4).integers(100, size=8)
    assert (a == b).all() and not (a == c).all()
