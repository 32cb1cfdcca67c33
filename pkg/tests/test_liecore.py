import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from momentkit import liecore as lc


def rng_of(seed):
    return np.random.default_rng(seed)


seeds = st.integers(0, 2**31 - 1)
dims = st.integers(1, 5)


def test_pairing_examples():
    z = np.zeros((2, 2), complex)
    s = np.diag([1j, -1j])
    assert lc.pairing(z, s) == 0
    assert lc.pairing(np.array([[1j]]), np.array([[1j]])) == pytest.approx(1)
    assert lc.pairing(s, s) == pytest.approx(2)
    with pytest.raises(lc.DimensionError):
        lc.pairing(s, np.eye(3))


@given(seeds, dims)
def test_pairing_ad_invariant_and_symmetric(seed, m):
    rng = rng_of(seed)
    s, t, k = lc.random_skew(m, rng), lc.random_skew(m, rng), lc.random_unitary(m, rng)
    ad = lambda a: k @ a @ k.conj().T  # noqa: E731
    assert abs(lc.pairing(ad(s), ad(t)) - lc.pairing(s, t)) <= 1e-10 * (1 + lc.norm(s) * lc.norm(t))
    assert abs(lc.pairing(s, t) - np.conj(lc.pairing(t, s))) <= 1e-12
    assert abs(lc.pairing(s, t).imag) <= 1e-12
    assert lc.pairing(s, s).real >= 0


def test_cartan_examples():
    k, s = lc.cartan_decompose(np.eye(3))
    assert np.allclose(k, np.eye(3)) and np.allclose(s, 0)
    u = lc.random_unitary(3, rng_of(1))
    k, s = lc.cartan_decompose(u)
    assert np.allclose(k, u, atol=1e-12) and np.abs(s).max() < 1e-12
    k, s = lc.cartan_decompose(np.diag([np.e, 1.0]))
    assert np.allclose(k, np.eye(2)) and np.allclose(s, np.diag([1.0, 0.0]))
    with pytest.raises(lc.SingularMatrixError):
        lc.cartan_decompose(np.diag([1.0, 0.0]))


@given(seeds, dims)
def test_cartan_reconstruction(seed, m):
    rng = rng_of(seed)
    g = lc.random_invertible(m, rng)
    k, s = lc.cartan_decompose(g)
    assert np.linalg.norm(k @ lc.expm(s) - g) <= 1e-10 * max(1, np.linalg.norm(g))
    assert np.abs(k @ k.conj().T - np.eye(m)).max() <= 1e-12
    assert lc.is_hermitian(s)


def test_length_log_examples():
    assert lc.length_log(np.eye(2)) == 0
    assert lc.length_log(np.diag([np.e**2, np.e**-1])) == pytest.approx(np.sqrt(5), rel=1e-14)
    assert lc.length_log(lc.random_unitary(3, rng_of(2))) < 1e-12


@given(seeds, dims)
def test_length_log_k_invariant(seed, m):
    rng = rng_of(seed)
    g, k = lc.random_invertible(m, rng), lc.random_unitary(m, rng)
    assert abs(lc.length_log(k @ g) - lc.length_log(g)) <= 1e-10
    assert abs(lc.length_log(g @ k) - lc.length_log(g)) <= 1e-10


def test_comparison_bounds():
    rng = rng_of(3)
    for _ in range(100):
        m = int(rng.integers(1, 6))
        g, h = lc.random_invertible(m, rng, 1.5), lc.random_invertible(m, rng, 0.7)
        C = max(np.linalg.norm(h, 2), np.linalg.norm(np.linalg.inv(h), 2))
        gl, ghl = lc.length_log(g), lc.length_log(g @ h)
        assert m**-0.5 * ghl - np.log(C) <= gl + 1e-12
        assert gl <= m**0.5 * (ghl + np.log(C)) + 1e-12


def test_eigen_flag_examples():
    f = lc.eigen_flag(np.zeros((3, 3)))
    assert f.ranks == (3,) and f.eigenvalues == (0.0,)
    f = lc.eigen_flag(np.diag([-2.0, -2.0, 1.0]))
    assert f.ranks == (2, 3) and np.allclose(f.eigenvalues, (-2, 1))
    f = lc.eigen_flag(np.diag([3.0, 1.0, 2.0]))
    assert f.ranks == (1, 2, 3) and np.allclose(f.eigenvalues, (1, 2, 3))
    e = np.eye(3)
    assert np.allclose(np.abs(f.bases[0][:, 0]), e[1])
    span2 = f.bases[1] @ f.bases[1].conj().T
    assert np.allclose(span2, np.diag([0, 1, 1]))


@given(seeds, st.integers(2, 6))
def test_eigen_flag_invariant_subspaces(seed, m):
    rng = rng_of(seed)
    # force repeated eigenvalues half the time
    vals = np.sort(rng.integers(-2, 3, size=m)).astype(float)
    u = lc.random_unitary(m, rng)
    chi = (u * vals) @ u.conj().T
    f = lc.eigen_flag(chi)
    assert f.ranks[-1] == m
    assert all(a < b for a, b in zip(f.eigenvalues, f.eigenvalues[1:]))
    for w in f.bases:
        p = w @ w.conj().T
        assert np.abs(chi @ w - p @ chi @ w).max() <= 1e-10
        assert np.allclose(w.conj().T @ w, np.eye(w.shape[1]), atol=1e-12)


def test_antidominant_compose():
    assert np.allclose(lc.antidominant_compose(2.0, (), (), 3), 2 * np.eye(3))
    assert np.allclose(lc.antidominant_compose(0, (1,), (-1,), 2), np.diag([-0.5, 0.5]))
    assert lc.eigen_flag(lc.antidominant_compose(0, (1,), (-1,), 2)).ranks == (1, 2)
    with pytest.raises(ValueError):
        lc.antidominant_compose(0, (1,), (1,), 2)
    with pytest.raises(ValueError):
        lc.antidominant_compose(0, (2, 1), (-1, -1), 3)


@given(seeds)
def test_antidominant_round_trip(seed):
    rng = rng_of(seed)
    m = int(rng.integers(2, 6))
    k = int(rng.integers(1, m))
    ranks = tuple(sorted(rng.choice(np.arange(1, m), size=k, replace=False).tolist()))
    ws = tuple((-rng.uniform(0.2, 2, size=k)).tolist())
    chi = lc.antidominant_compose(float(rng.normal()), ranks, ws, m)
    f = lc.eigen_flag(chi)
    assert f.ranks == ranks + (m,)
    for r, b in zip(ranks, f.bases):
        assert np.allclose(b @ b.conj().T, lc.coordinate_projection(r, m), atol=1e-10)


def test_parity_flags():
    lc.AlgebraElement(np.diag([1j, 2j]), "skew")
    lc.AlgebraElement(np.diag([1.0, 2.0]), "hermitian")
    with pytest.raises(lc.ParityError):
        lc.AlgebraElement(np.diag([1.0, 2.0]), "skew")
    with pytest.raises(lc.DimensionError):
        lc.AlgebraElement(np.zeros((2, 3)))


def test_anchor_bases_orthonormal():
    for grp in (lc.AnchorRep(3), lc.AnchorRep(3, "SU"), lc.AnchorRep(3, "torus"),
                lc.AnchorRep(3, "torus", ((1, -1, 0),))):
        b = grp.basis()
        gram = np.array([[lc.pairing(x, y) for y in b] for x in b])
        assert np.allclose(gram, np.eye(len(b)))
        assert all(lc.is_skew(x) for x in b)
    assert len(lc.AnchorRep(3).basis()) == 9 and len(lc.AnchorRep(3, "SU").basis()) == 8
    assert lc.AnchorRep(3).is_central(1j * np.eye(3))
    assert not lc.AnchorRep(3).is_central(np.diag([1j, 0, 0]))


def test_json_round_trip():
    a = lc.random_invertible(3, rng_of(4))
    assert np.array_equal(lc.from_json_matrix(lc.to_json_matrix(a)), a)
