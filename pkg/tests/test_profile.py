import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from profilecast.profile import (
    BehavioralProfile,
    ProfileError,
    ProfileSet,
    build_profile,
    dump_profiles,
    generate_target_profile,
    load_profiles,
    profile_from_matrix,
    similarity,
    svd,
)


def double_sum(x, y):
    total = 0.0
    for i in range(x.rank):
        for j in range(y.rank):
            dot = sum(float(a) * float(b) for a, b in zip(x.vectors[i], y.vectors[j]))
            total += x.weights[i] * y.weights[j] * abs(dot)
    return total


def random_profile(rng, k=3, dim=10):
    q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    w = np.sort(rng.random(k))[::-1]
    return BehavioralProfile(vectors=q.T.copy(), weights=w / w.sum())


def test_singular_values_match_eigen_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        m, n = rng.integers(2, 30), rng.integers(2, 20)
        a = rng.random((m, n))
        k = min(m, n)
        res = svd(a, k)
        oracle = np.sqrt(np.clip(np.linalg.eigvalsh(a.T @ a), 0, None))[::-1][:k]
        np.testing.assert_allclose(res.s, oracle, atol=1e-9 * oracle[0])


def test_reconstruction_and_orthonormality():
    rng = np.random.default_rng(2)
    a = rng.random((28, 10))
    res = svd(a, 10)
    np.testing.assert_allclose(res.u @ np.diag(res.s) @ res.v.T, a, atol=1e-10)
    np.testing.assert_allclose(res.v.T @ res.v, np.eye(10), atol=1e-12)
    np.testing.assert_allclose(res.u.T @ res.u, np.eye(10), atol=1e-12)


def test_wide_matrix_and_rank_deficiency():
    a = np.zeros((3, 6))
    a[0, 1] = 2.0
    res = svd(a, 3)
    np.testing.assert_allclose(res.s, [2.0, 0.0, 0.0])
    assert res.rank == 1
    np.testing.assert_allclose(res.u.T @ res.u, np.eye(3), atol=1e-12)
    with pytest.raises(ProfileError):
        build_profile(res, 2)


def test_sign_convention():
    res = svd(-np.eye(4)[:, :3] * [3.0, 2.0, 1.0], 3)
    for j in range(3):
        col = res.v[:, j]
        assert col[np.argmax(np.abs(col))] > 0


def test_zero_matrix_is_an_error():
    with pytest.raises(ProfileError, match="zero profile"):
        svd(np.zeros((5, 4)), 1)


def test_weights_and_single_location_node():
    a = np.zeros((28, 10))
    a[:, 3] = 0.25
    p = profile_from_matrix(a, 1)
    np.testing.assert_allclose(p.vectors, np.eye(10)[3:4])
    assert p.weights.tolist() == [1.0]
    assert similarity(p, p) == 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 4))
def test_similarity_matches_double_sum_and_is_symmetric(seed, kx, ky):
    rng = np.random.default_rng(seed)
    x, y = random_profile(rng, kx), random_profile(rng, ky)
    assert abs(similarity(x, y) - double_sum(x, y)) <= 1e-12
    assert similarity(x, y) == similarity(y, x)
    assert similarity(x, x) == pytest.approx(float((x.weights ** 2).sum()), abs=1e-12)


def test_dimension_mismatch():
    rng = np.random.default_rng(0)
    with pytest.raises(ProfileError):
        similarity(random_profile(rng, 1, 10), random_profile(rng, 1, 8))


def test_profile_set_vectorised_similarity():
    rng = np.random.default_rng(3)
    profiles = {n: random_profile(rng, 1 + n % 3) for n in range(12)}
    ps = ProfileSet(profiles)
    target = random_profile(rng, 2)
    sims = ps.similarity_to(target)
    for n in ps.nodes:
        assert sims[ps.index[n]] == pytest.approx(similarity(profiles[n], target), abs=1e-12)


def test_target_modes():
    rng = np.random.default_rng(4)
    ps = ProfileSet({n: random_profile(rng, 2) for n in range(5)})
    t, anchor = generate_target_profile(ps, "anchor", 7)
    assert t == ps[anchor]
    t0, a0 = generate_target_profile(ps, "perturbed", 7, noise=0.0)
    assert t0 == ps[a0]
    t1, a1 = generate_target_profile(ps, "perturbed", 7, noise=0.1)
    np.testing.assert_allclose(t1.vectors @ t1.vectors.T, np.eye(2), atol=1e-12)
    single = ProfileSet({n: random_profile(rng, 1) for n in range(5)})
    t2, a2 = generate_target_profile(single, "perturbed", 8, noise=0.1)
    assert 0.8 < similarity(t2, single[a2]) < 1.0
    with pytest.raises(ProfileError):
        generate_target_profile(ps, "group", 0)


def test_cache_roundtrip_is_exact():
    rng = np.random.default_rng(5)
    profiles = {n: random_profile(rng, 3) for n in (4, 1, 9)}
    buf = io.StringIO()
    dump_profiles(profiles, buf)
    back = load_profiles(io.StringIO(buf.getvalue()))
    assert back == profiles
    with pytest.raises(ProfileError):
        load_profiles(io.StringIO("# other v9\n"))


def test_similarity_bounded():
    rng = np.random.default_rng(6)
    for _ in range(50):
        x, y = random_profile(rng, 3), random_profile(rng, 3)
        s = similarity(x, y)
        assert 0.0 <= s <= 1.0 and not math.isnan(s)
