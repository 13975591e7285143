import itertools

import numpy as np
import pytest

from k3twistor import gfield as gf
from k3twistor.quadspace import (HYPERBOLIC, QuadError, BudgetExceeded, QuadSpace, add_hyperbolic,
                                 block_sum, build_standard, classify, find_isotropic, is_isometry,
                                 isotropic_count, isotropic_formula, isotropic_vectors,
                                 orthogonal_decompose, quotient_perp, trace_plane_gram,
                                 witt_extend, witt_index)


def reflection_matrix(F, Q, u):
    """x -> x - 2 (x.u)/(u.u) u, as a matrix on column vectors."""
    n = Q.dim
    c = F.div(2, Q.square(F, u))
    gu = Q.covector(F, u)
    return [[F.sub(int(i == j), F.mul(c, F.mul(u[i], gu[j]))) for j in range(n)] for i in range(n)]


def random_isometry(F, Q, rng, k=4):
    M = gf.identity(Q.dim)
    for _ in range(k):
        while True:
            u = gf.random_vector(F, Q.dim, rng)
            if Q.square(F, u):
                break
        M = gf.mat_mul(F, reflection_matrix(F, Q, u), M)
    return M


def brute_has_isotropic_subspace(Q, k):
    """Exhaustive search for a k-dim totally isotropic subspace over F_p."""
    F = Q.Fp
    iso = [list(reversed(t)) for t in itertools.product(range(Q.p), repeat=Q.dim)
           if any(t) and not Q.square(F, list(reversed(t)))]
    if k == 1:
        return bool(iso)
    for x, y in itertools.combinations(iso, 2):
        if not Q.pair(F, x, y) and gf.rank(F, [x, y]) == 2:
            if k == 2:
                return True
            for z in iso:
                if not Q.pair(F, x, z) and not Q.pair(F, y, z) and gf.rank(F, [x, y, z]) == 3:
                    return True
    return False


def test_build_standard_examples():
    assert build_standard(3, 1, "neutral").gram == ((0, 2), (2, 0))
    plane = build_standard(3, 1, "nonneutral")
    F = plane.Fp
    assert all(plane.square(F, [a, b]) for a in range(3) for b in range(3) if (a, b) != (0, 0))
    Q = build_standard(3, 2, "nonneutral")
    assert Q.dim == 4 and classify(Q) == "nonneutral"
    assert not brute_has_isotropic_subspace(Q, 2)
    with pytest.raises(QuadError):
        build_standard(3, 0)


@pytest.mark.parametrize("p", [3, 5, 7])
@pytest.mark.parametrize("s0", [1, 2, 3, 4])
def test_classify_standard_spaces(p, s0):
    assert classify(build_standard(p, s0, "neutral")) == "neutral"
    assert classify(build_standard(p, s0, "nonneutral")) == "nonneutral"


def test_classify_examples():
    assert classify(QuadSpace(3, HYPERBOLIC)) == "neutral"
    assert classify(QuadSpace(3, trace_plane_gram(3))) == "nonneutral"
    big = add_hyperbolic(build_standard(3, 2))
    assert classify(big) == "nonneutral"
    assert not brute_has_isotropic_subspace(big, 3)
    with pytest.raises(QuadError):
        classify(QuadSpace(3, ((1, 0, 0), (0, 1, 0), (0, 0, 1))))
    with pytest.raises(QuadError):
        QuadSpace(3, ((1, 1), (1, 1)))
    with pytest.raises(QuadError):
        QuadSpace(3, ((1, 2), (0, 1)))


def test_trace_plane_is_the_trace_form():
    # b(x, y) = Tr(x y^p) on F_{p^2} with basis {1, theta}
    for p in (3, 5, 7):
        F = gf.field_create(p, 2)
        basis = [1, F.from_coeffs([0, 1])]
        G = [[F.coeffs(F.add(F.mul(x, F.frob(y)), F.frob(F.mul(x, F.frob(y)))))[0] for y in basis]
             for x in basis]
        assert tuple(map(tuple, G)) == tuple(tuple(a % p for a in r) for r in trace_plane_gram(p))


@pytest.mark.parametrize("p,n", [(3, 2), (3, 3), (5, 2), (5, 3), (7, 2)])
def test_isotropic_count_closed_form(p, n):
    Q = build_standard(p, n, "nonneutral")
    assert isotropic_count(Q) == (p ** n + 1) * (p ** (n - 1) - 1)
    assert isotropic_count(Q) == isotropic_formula(p, n - 1)


def test_isotropic_vectors_examples():
    assert len(isotropic_vectors(build_standard(3, 2))) == 20
    assert isotropic_vectors(QuadSpace(3, trace_plane_gram(3))) == []
    assert len(isotropic_vectors(QuadSpace(3, HYPERBOLIC))) == 4
    plane = QuadSpace(3, trace_plane_gram(3))
    assert len(isotropic_vectors(plane, m=2)) == 16  # the plane splits over F_9
    with pytest.raises(BudgetExceeded):
        isotropic_vectors(build_standard(3, 4), budget=1000)


@pytest.mark.parametrize("p", [3, 5])
def test_witt_extension_of_random_partial_isometries(p):
    rng = np.random.default_rng(p)
    for trial in range(40):
        n = 2 * int(rng.integers(1, 5))
        Q = build_standard(p, n // 2, "nonneutral" if trial % 2 else "neutral")
        F = Q.Fp
        g = random_isometry(F, Q, rng)
        k = int(rng.integers(1, n + 1))
        while True:
            W = [gf.random_vector(F, n, rng) for _ in range(k)]
            if gf.rank(F, W) == k:
                break
        U = [gf.mat_vec(F, g, w) for w in W]
        M = witt_extend(Q, W, U)
        assert is_isometry(F, Q, M)
        assert all(gf.mat_vec(F, M, w) == u for w, u in zip(W, U))


def test_witt_extension_examples():
    Q = build_standard(3, 2)
    F = Q.Fp
    iso = isotropic_vectors(Q)
    M = witt_extend(Q, [iso[0]], [iso[7]])
    assert is_isometry(F, Q, M) and gf.mat_vec(F, M, iso[0]) == iso[7]
    Id = witt_extend(Q, [[1, 0, 0, 0]], [[1, 0, 0, 0]])
    assert gf.mat_vec(F, Id, [1, 0, 0, 0]) == [1, 0, 0, 0]
    with pytest.raises(QuadError):
        witt_extend(Q, [[0, 0, 1, 0]], [iso[0]])


def test_witt_extension_over_an_extension_field():
    Q = build_standard(3, 1)
    F = gf.field_create(3, 2)
    iso = isotropic_vectors(Q, m=2)
    M = witt_extend(Q, [iso[0]], [iso[5]], m=2)
    assert is_isometry(F, Q, M)


def test_transitivity_on_totally_isotropic_subspaces():
    rng = np.random.default_rng(11)
    Q = build_standard(3, 3, "neutral")
    F = Q.Fp
    for _ in range(10):
        A = [[1, 0, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0]]
        g = random_isometry(F, Q, rng)
        h = random_isometry(F, Q, rng)
        X = [gf.mat_vec(F, g, a) for a in A]
        Y = [gf.mat_vec(F, h, a) for a in A]
        M = witt_extend(Q, X, Y)
        assert is_isometry(F, Q, M)


def test_quotient_perp_examples():
    Qt = add_hyperbolic(build_standard(3, 2))
    F = Qt.Fp
    v = find_isotropic(F, Qt, gf.identity(Qt.dim))
    V, D = quotient_perp(Qt, v)
    assert V.dim == 4 and classify(V) == "nonneutral"
    H2 = QuadSpace(3, block_sum(3, HYPERBOLIC, HYPERBOLIC))
    V2, _ = quotient_perp(H2, [1, 0, 0, 0])
    assert classify(V2) == "neutral" and V2.dim == 2
    with pytest.raises(QuadError):
        quotient_perp(H2, [1, 1, 0, 0])
    with pytest.raises(QuadError):
        quotient_perp(H2, [0, 0, 0, 0])


@pytest.mark.parametrize("p,s0", [(3, 1), (3, 2), (5, 2)])
def test_orthogonal_decompose_block_gram(p, s0):
    Qt = add_hyperbolic(build_standard(p, s0))
    F = Qt.Fp
    rng = np.random.default_rng(p + s0)
    iso = isotropic_vectors(Qt)
    for _ in range(5):
        v = iso[int(rng.integers(len(iso)))]
        D = orthogonal_decompose(Qt, v)
        P = [list(r) for r in D.P]
        G = gf.mat_mul(F, gf.mat_mul(F, gf.transpose(P), Qt.gram_list()), P)
        n = Qt.dim - 2
        assert [r[:n] for r in G[:n]] == D.V.gram_list()
        assert [r[n:] for r in G[n:]] == [[0, p - 1], [p - 1, 0]]
        assert all(G[i][j] == 0 for i in range(n) for j in range(n, n + 2))
        assert list(D.v) == [a % p for a in v]


def test_orthogonal_decompose_of_standard_position():
    Qt = add_hyperbolic(build_standard(3, 1))
    D = orthogonal_decompose(Qt, [0, 0, 1, 0])
    assert [list(r) for r in D.P] == gf.identity(4)


def test_witt_index():
    assert witt_index(build_standard(5, 3, "neutral")) == 3
    assert witt_index(build_standard(5, 3, "nonneutral")) == 2
    assert witt_index(build_standard(5, 3, "nonneutral"), m=2) == 3


def test_json_roundtrip():
    Q = build_standard(5, 2)
    assert QuadSpace.from_json(Q.to_json()) == Q
