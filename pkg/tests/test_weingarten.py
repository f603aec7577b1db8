import numpy as np
import pytest

from strongdesign import brauer
from strongdesign import tensor_core as tc
from strongdesign import weingarten as wg
from strongdesign.seeding import make_rng
from conftest import rand_op


def test_cycle_count():
    assert wg.cycle_count((0, 1, 2)) == 3
    assert wg.cycle_count((1, 0)) == 1
    assert wg.cycle_count((1, 2, 0)) == 1
    with pytest.raises(ValueError):
        wg.cycle_count((0, 0))


def test_perm_matrix_convention():
    # P_pi sends register i to slot pi(i)
    P = wg.perm_matrix((1, 2, 0), 2)
    x = tc.basis_state(3, 0b100)  # register 0 holds 1
    assert np.allclose(P @ x, tc.basis_state(3, 0b010))


@pytest.mark.parametrize("D", [2, 3, 7])
def test_wg_closed_forms(D):
    assert np.allclose(wg.weingarten_matrix(1, D).wg, [[1 / D]])
    w = wg.weingarten_matrix(2, D).wg
    assert w[0, 0] == pytest.approx(1 / (D * D - 1))
    assert w[0, 1] == pytest.approx(-1 / (D * (D * D - 1)))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
@pytest.mark.parametrize("D", [2, 4, 8])
def test_wg_inverse(k, D):
    if D < k:
        pytest.skip("singular")
    tab = wg.weingarten_matrix(k, D)
    assert np.abs(tab.wg @ tab.gram - np.eye(len(tab.perms))).max() < 1e-10


def test_wg_relabel_symmetry():
    tab = wg.weingarten_matrix(3, 4)
    pos = {p: i for i, p in enumerate(tab.perms)}
    for s in tab.perms:
        idx = [pos[wg.compose(s, p)] for p in tab.perms]
        assert np.allclose(tab.wg[np.ix_(idx, idx)], tab.wg)


def test_wg_singular():
    with pytest.raises(wg.SingularGramError):
        wg.weingarten_matrix(3, 2)
    tab = wg.weingarten_matrix(3, 2, allow_singular=True)
    g = tab.gram
    assert np.allclose(g @ tab.wg @ g, g, atol=1e-10)


def test_twirl_basic(rng):
    X = rand_op(rng, 4)
    assert np.allclose(wg.haar_twirl_exact(X, 1, 2), np.trace(X) / 4 * np.eye(4))
    assert np.allclose(wg.haar_twirl_exact(np.eye(16), 2, 2), np.eye(16))
    Y = rand_op(rng, 16)
    T = wg.haar_twirl_exact(Y, 2, 2)
    assert np.abs(wg.haar_twirl_exact(T, 2, 2) - T).max() < 1e-9
    assert abs(np.trace(T) - np.trace(Y)) < 1e-9


def test_twirl_singular_dimension(rng):
    # k=3 at D=2: pseudo-inverse still gives an invariant projection
    X = rand_op(rng, 8)
    T = wg.haar_twirl_exact(X, 3, 1)
    assert np.abs(wg.haar_twirl_exact(T, 3, 1) - T).max() < 1e-9
    assert abs(np.trace(T) - np.trace(X)) < 1e-9
    mc = wg.monte_carlo_twirl(tc.basis_state(3, 0b011), 3, 0, 1, 20000, make_rng(3, 1))
    assert mc.within_complex(wg.haar_twirl_exact(np.diag(tc.basis_state(3, 0b011).real), 3, 1)).all()


def test_mixed_twirl(rng):
    P = tc.epr_projector(1)
    assert np.allclose(wg.mixed_twirl_exact(P, 1, 1, 1), P)
    assert np.allclose(wg.mixed_twirl_exact(np.eye(4), 1, 1, 1), np.eye(4))
    X = rand_op(rng, 8)
    T = wg.mixed_twirl_exact(X, 2, 1, 1)
    # invariance under U (x) U (x) U*
    from strongdesign.circuits import haar_sample
    U = haar_sample(2, rng)
    W = tc.kron_all([U, U, U.conj()])
    assert np.abs(W @ T @ W.conj().T - T).max() < 1e-10


def test_monte_carlo_oracles():
    e00 = np.zeros(4)
    e00[0] = 1
    mc = wg.monte_carlo_twirl(e00, 2, 0, 1, 100_000, make_rng(5, 0))
    assert mc.within_complex(wg.haar_twirl_exact(np.diag(e00), 2, 1)).all()
    mc = wg.monte_carlo_twirl(e00, 1, 1, 1, 100_000, make_rng(5, 1))
    assert mc.within_complex(wg.mixed_twirl_exact(np.diag(e00), 1, 1, 1)).all()


def test_se_complex_definition():
    mc = wg.MonteCarloTwirl(np.zeros((1, 1)), np.array([[3.0]]), np.array([[4.0]]), 10)
    assert mc.se_complex[0, 0] == 5.0
    assert mc.within_complex(np.array([[14.9]]))[0, 0]
    assert not mc.within(np.array([[14.9]]))[0, 0]


def test_approx_twirl(rng):
    X = rand_op(rng, 4)
    assert np.allclose(wg.approx_twirl(X, 1, 2), wg.haar_twirl_exact(X, 1, 2))
    S = wg.perm_matrix((1, 0), 2)
    assert np.allclose(wg.approx_twirl(np.eye(4), 2, 1), (4 * np.eye(4) + 2 * S) / 4)


def test_approx_twirl_sandwich():
    k, n = 2, 2
    D = 1 << n
    r = k * k / (2 * D)
    eps = r / (1 - r)
    Ch = wg.choi_haar_twirl(k, n).real
    Ca = wg.choi_approx_twirl(k, n).real
    assert np.linalg.eigvalsh(Ch - (1 - eps) * Ca)[0] >= -1e-9
    assert np.linalg.eigvalsh((1 + eps) * Ca - Ch)[0] >= -1e-9


def test_choi_matches_channel(rng):
    C = wg.choi_of(lambda E: wg.mixed_twirl_exact(E, 1, 1, 1), 4)
    assert np.allclose(C, wg.choi_mixed_twirl_exact(1, 1, 1))
    iso = brauer.sector_isometries(1, 1, 2)
    C = wg.choi_of(lambda E: wg.approx_mixed_twirl(E, 1, 1, 1, iso), 4)
    assert np.allclose(C, wg.choi_approx_mixed_twirl(1, 1, 1, iso))


def test_approx_mixed_twirl(rng):
    iso = brauer.sector_isometries(1, 0, 4)
    X = rand_op(rng, 4)
    assert np.allclose(wg.approx_mixed_twirl(X, 1, 0, 2, iso), wg.approx_twirl(X, 1, 2))
    iso = brauer.sector_isometries(1, 1, 4)
    P = tc.epr_projector(2)
    assert np.allclose(wg.approx_mixed_twirl(P, 1, 1, 2, iso), P, atol=1e-10)
    with pytest.raises(ValueError):
        wg.approx_mixed_twirl(P, 1, 1, 2, [])


@pytest.mark.parametrize("pq", [(1, 1), (2, 1)])
def test_mixed_sandwich(pq):
    p, q = pq
    D = 4
    eps = (p + q) ** 2 / D
    iso = brauer.sector_isometries(p, q, D)
    Ca = wg.choi_approx_mixed_twirl(p, q, 2, iso)
    Ch = wg.choi_mixed_twirl_exact(p, q, 2).real
    assert np.linalg.eigvalsh(Ch - (1 - eps) * Ca)[0] >= -1e-9
    assert np.linalg.eigvalsh((1 + eps) * Ca - Ch)[0] >= -1e-9


def test_moment_matrix():
    M = wg.moment_channel_matrix(1, 1)
    assert np.linalg.matrix_rank(M, tol=1e-9) == 1
    v = np.eye(2).reshape(-1) / np.sqrt(2)
    assert np.allclose(M, np.outer(v, v))
    M3 = wg.moment_channel_matrix(1, 3)
    assert np.abs(M3 @ M3 - M3).max() < 1e-8
    Mi = wg.moment_channel_matrix(1, 1, [np.eye(2)])
    assert wg.essential_norm(Mi, M) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        wg.moment_channel_matrix(2, 2)


def test_moment_matrix_vec_convention(rng):
    X = rand_op(rng, 4)
    M = wg.moment_channel_matrix(1, 2)
    assert np.allclose(M @ X.reshape(-1), wg.haar_twirl_exact(X, 2, 1).reshape(-1))


def test_wg_submatrix_bound():
    for p, q in [(1, 1), (2, 1), (2, 2)]:
        for D in (8, 16):
            assert wg.inverse_wg_submatrix_sum(p, q, D) <= 2 * (p + q) ** 2 / D


def test_table_json():
    tab = wg.weingarten_matrix(2, 4)
    obj = tab.to_json()
    assert obj["perms"] == [[0, 1], [1, 0]]
    assert obj["wg"] == pytest.approx([1 / 15, -1 / 60, -1 / 60, 1 / 15])
