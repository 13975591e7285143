import itertools

import numpy as np
import pytest

from k3twistor import gfield as gf
from k3twistor.charspace import (CharError, CharSubspace, SamplingError, artin_invariant, avoids,
                                 contains, crystalline_line, from_generator, generator_of,
                                 random_strictly_characteristic, validate, with_artin)
from k3twistor.quadspace import build_standard


def brute_rational_core_dim(K):
    """dim_Fp of K cap V by scanning all p^(2 sigma0) rational vectors."""
    F, V = K.F, K.V
    hits = sum(1 for t in itertools.product(range(V.p), repeat=V.dim)
               if any(t) and gf.contains(F, K.rows(), list(t)))
    return round(np.log(hits + 1) / np.log(V.p))


def test_validate_errors():
    V = build_standard(3, 1)
    F = gf.field_create(3, 2)
    with pytest.raises(CharError) as e:
        validate(V, 2, [[1, 0]])
    assert e.value.reason == "not-isotropic"
    V2 = build_standard(3, 2)
    with pytest.raises(CharError) as e:
        validate(V2, 2, [[1, 0, 0, 0]])
    assert e.value.reason == "wrong-rank"
    # a rational isotropic plane is Frobenius-stable
    Vn = build_standard(3, 2, "neutral")
    with pytest.raises(CharError) as e:
        validate(Vn, 2, [[1, 0, 0, 0], [0, 0, 1, 0]])
    assert e.value.reason == "frobenius-rank"
    with pytest.raises(CharError) as e:
        validate(V2, 2, [[1, 0, 0]])
    assert e.value.reason == "wrong-length"


def test_from_generator_sigma0_one():
    V = build_standard(3, 1)
    F = gf.field_create(3, 2)
    isotropic = [[1, t] for t in range(F.q) if not V.square(F, [1, t])]
    assert isotropic
    K = from_generator(V, 2, isotropic[0])
    assert artin_invariant(K).sigma == 1
    assert crystalline_line(K) == K.rows()[0]


def test_from_generator_errors():
    V = build_standard(3, 2)
    with pytest.raises(CharError) as e:
        from_generator(V, 4, [0, 0, 0, 0])
    assert e.value.reason == "zero-generator"
    with pytest.raises(CharError):
        from_generator(V, 4, [1, 0, 0, 0])  # rational, so phi e = e
    with pytest.raises(CharError) as e:
        from_generator(V, 4, [0, 0, 1, 0])  # anisotropic direction
    assert e.value.reason == "not-isotropic"


def test_from_generator_random_sigma0_two_over_f_3_8():
    V = build_standard(3, 2)
    F = gf.field_create(3, 8)
    rng = np.random.default_rng(0)
    found = 0
    for _ in range(4000):
        e = gf.random_vector(F, 4, rng)
        try:
            K = from_generator(V, 8, e)
        except CharError:
            continue
        found += 1
        assert artin_invariant(K).sigma in (1, 2)
        if found >= 3:
            break
    # random generators rarely satisfy e.e = e.phi(e) = 0; fall back to sampled ones
    for seed in range(3):
        K = random_strictly_characteristic(V, 8, seed)
        e = generator_of(K)
        assert from_generator(V, 8, e) == K


@pytest.mark.parametrize("p,s0,m", [(3, 1, 2), (3, 2, 4), (5, 2, 4), (3, 3, 6)])
def test_sampler_gives_strictly_characteristic(p, s0, m):
    V = build_standard(p, s0)
    K = random_strictly_characteristic(V, m, seed=5)
    data = artin_invariant(K)
    assert data.sigma == s0 and data.rational_core == ()
    assert random_strictly_characteristic(V, m, seed=5) == K
    # phi-invariance of the Artin invariant
    assert artin_invariant(validate(V, m, K.frob(1))).sigma == s0
    # e, phi e, ..., phi^(2 s0 - 1) e span everything
    F = K.F
    orbit = [generator_of(K)]
    for _ in range(2 * s0 - 1):
        orbit.append(gf.vec_frob(F, orbit[-1]))
    assert gf.rank(F, orbit) == 2 * s0
    # the line generator pairs nontrivially with its phi^s0 image
    ell = crystalline_line(K)
    assert V.pair(F, ell, gf.vec_frob(F, ell, s0))


def test_sampler_failures():
    with pytest.raises(SamplingError):
        random_strictly_characteristic(build_standard(3, 2), 1, seed=0)
    with pytest.raises(SamplingError):
        random_strictly_characteristic(build_standard(3, 1), 1, seed=0)


def test_no_strict_subspace_over_f_3_when_sigma0_is_two():
    # every Lagrangian-sized isotropic pair over F_3 is rational, so nothing characteristic exists
    V = build_standard(3, 2)
    F = V.Fp
    iso = [list(t) for t in itertools.product(range(3), repeat=4)
           if any(t) and not V.square(F, list(t))]
    for x, y in itertools.combinations(iso, 2):
        if not V.pair(F, x, y) and gf.rank(F, [x, y]) == 2:
            pytest.fail("found a totally isotropic plane in a non-neutral 4-space")


@pytest.mark.parametrize("p,s0,sigma,m", [(3, 2, 1, 4), (3, 3, 2, 4), (3, 3, 1, 2), (5, 2, 1, 2)])
def test_with_artin_matches_rational_scan(p, s0, sigma, m):
    V = build_standard(p, s0)
    K = with_artin(V, m, sigma, seed=1)
    data = artin_invariant(K)
    assert data.sigma == sigma
    assert brute_rational_core_dim(K) == s0 - sigma
    assert contains(K, data.rational_core)
    assert not avoids(K, data.rational_core)
    with pytest.raises(CharError):
        crystalline_line(K)


def test_strict_subspaces_against_rational_scan():
    V = build_standard(3, 2)
    for seed in range(5):
        K = random_strictly_characteristic(V, 4, seed)
        assert brute_rational_core_dim(K) == 0


def test_avoids_and_contains():
    V = build_standard(3, 2)
    K = random_strictly_characteristic(V, 4, seed=2)
    assert avoids(K, []) and contains(K, [])
    for t in itertools.product(range(3), repeat=4):
        if any(t):
            assert avoids(K, [list(t)])
            assert not contains(K, [list(t)])
    with pytest.raises(CharError):
        avoids(K, [[1, 2, 3]])
    with pytest.raises(CharError):
        avoids(K, [[10, 0, 0, 0]])


def test_artin_bounds_on_many_samples():
    V = build_standard(3, 3)
    for seed in range(4):
        for sigma in (1, 2, 3):
            K = with_artin(V, 6, sigma, seed)
            assert 1 <= artin_invariant(K).sigma <= 3


def test_json_roundtrip():
    K = random_strictly_characteristic(build_standard(5, 1), 2, seed=3)
    assert CharSubspace.from_json(K.to_json()) == K
