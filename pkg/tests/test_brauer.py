import itertools
from math import comb, factorial

import numpy as np
import pytest

from strongdesign import brauer as br
from strongdesign import tensor_core as tc
from strongdesign.circuits import haar_sample


def _mixed(U, p, q):
    return tc.kron_all([U] * p + [U.conj()] * q)


def test_ptp_identity_and_epr():
    lab = br.PtpLabel.from_diagram(br.identity_diagram(3), 2, 1)
    assert np.allclose(br.ptp_matrix(lab, 3), np.eye(27))
    a = br.PairingSet(1, 1, ((0, 0),))
    lab = br.PtpLabel(1, 1, a, a, (), ())
    assert np.allclose(br.ptp_matrix(lab, 4), 4 * tc.epr_projector(2))


def test_label_roundtrip():
    for p, q in [(1, 1), (2, 1), (2, 2), (3, 1)]:
        for d in br.ptp_diagrams(p, q):
            assert br.PtpLabel.from_diagram(d, p, q).to_diagram() == d


def test_ptp_multiplication_exhaustive():
    D = 3
    diags = br.ptp_diagrams(2, 1)
    mats = {d: br.diagram_matrix(d, D) for d in diags}
    for a, b in itertools.product(diags, repeat=2):
        c, loops = br.compose(a, b)
        assert np.allclose(mats[a] @ mats[b], D**loops * mats[c])


def test_ptp_commutant(rng):
    for _ in range(3):
        U = haar_sample(2, rng)
        W = _mixed(U, 2, 2)
        for d in br.ptp_diagrams(2, 2):
            M = br.diagram_matrix(d, 2)
            assert np.abs(W @ M - M @ W).max() < 1e-8


def test_ptp_size_limit():
    with pytest.raises(ValueError):
        br.ptp_matrix(br.identity_diagram(4), 16)


def test_pairing_validation():
    with pytest.raises(ValueError):
        br.PairingSet(2, 2, ((0, 0), (1, 0)))
    with pytest.raises(ValueError):
        br.PairingSet(1, 1, ((0, 1),))


def test_bare_projectors():
    D = 3
    assert np.allclose(br.bare_projector(br.PairingSet(2, 1, ()), D), np.eye(27))
    P = br.bare_projector(br.PairingSet(1, 1, ((0, 0),)), 2)
    assert np.allclose(P, tc.epr_projector(1))
    for a in br.all_pairings(2, 2):
        P = br.bare_projector(a, D)
        assert np.abs(P @ P - P).max() < 1e-9
        assert round(np.trace(P)) == D ** (4 - 2 * a.size)
    for a, b in itertools.product(br.all_pairings(2, 2), repeat=2):
        if b.issubset(a):
            Pa, Pb = br.bare_projector(a, D), br.bare_projector(b, D)
            assert np.allclose(Pa @ Pb, Pa)


def test_no_epr_projector():
    assert np.allclose(br.no_epr_projector(1, 0, 3), np.eye(3))
    P = br.no_epr_projector(1, 1, 2)
    assert np.allclose(P, np.eye(4) - tc.epr_projector(1))
    assert round(np.trace(P)) == 3
    for D in (4, 5):
        a = br.no_epr_projector(2, 1, D, "nullspace")
        b = br.no_epr_projector(2, 1, D, "weingarten")
        assert np.abs(a - b).max() < 1e-8


def test_n_epr_consistency():
    for p, q, D in [(1, 1, 3), (2, 1, 3), (2, 2, 3)]:
        S = sum(br.bare_projector(a, D) for s in range(1, min(p, q) + 1) for a in br.pairings(p, q, s))
        rank = np.linalg.matrix_rank(S, tol=1e-8)
        assert rank == br.n_epr(p, q, D)


@pytest.mark.parametrize("pqD", [(1, 1, 2), (2, 1, 3), (2, 2, 4)])
def test_orthogonal_projectors(pqD):
    p, q, D = pqD
    proj = br.orthogonal_projectors(p, q, D)
    Ps = list(proj.by_alpha.values())
    assert np.abs(sum(Ps) - np.eye(D ** (p + q))).max() < 1e-8
    for i, j in itertools.combinations(range(len(Ps)), 2):
        assert np.abs(Ps[i] @ Ps[j]).max() < 1e-8
    assert np.abs(proj.by_alpha[()] - br.no_epr_projector(p, q, D)).max() < 1e-8
    for a in proj.alphas:
        want = D ** (p + q - 2 * a.size) - br.n_epr(p - a.size, q - a.size, D)
        assert proj.rank(a) == want
    rev = br.orthogonal_projectors(p, q, D, ordering="revlex")
    for ell in proj.by_size:
        assert np.abs(proj.by_size[ell] - rev.by_size[ell]).max() < 1e-8
    mats = [br.diagram_matrix(d, D) for d in br.ptp_diagrams(p, q)]
    for P in proj.by_size.values():
        for m in mats:
            assert np.linalg.norm(P @ m - m @ P, 2) <= 1e-8


def test_near_orthogonal_cross_size():
    D = 5
    A = br.algebra(2, 2, D)
    elems = [(a, br.near_orthogonal_element(a, D)) for a in br.all_pairings(2, 2)]
    for (a, x), (b, y) in itertools.product(elems, repeat=2):
        if a.size != b.size:
            assert A.norm(A.mul(x, y)) < 1e-8


def test_algebra_norm_matches_dense():
    D = 3
    A = br.algebra(2, 1, D)
    x = np.linspace(-1, 1, A.dim)
    assert A.norm(x) == pytest.approx(np.linalg.norm(A.to_matrix(x), 2), rel=1e-9)
    M = A.to_matrix(x)
    assert np.allclose(A.coefficients(M), x)


@pytest.mark.parametrize("pqD", [(1, 1, 2), (2, 1, 3), (2, 2, 4)])
def test_sector_isometries(pqD, rng):
    p, q, D = pqD
    proj = br.orthogonal_projectors(p, q, D)
    iso = br.sector_isometries(p, q, D, proj=proj)
    total = np.zeros((D ** (p + q),) * 2)
    for I in iso:
        M = I.matrix
        assert I.a_size == comb(p, I.ell) * comb(q, I.ell) * factorial(I.ell)
        assert np.abs(M.conj().T @ M - proj.by_size[I.ell]).max() < 1e-8
        total = total + M.conj().T @ M
        # range in (no-EPR on free copies) (x) A_l
        kl, kr = I.out_copies
        Pi = np.kron(br.no_epr_projector(kl, kr, D), np.eye(I.a_size))
        assert np.abs(Pi @ M - M).max() < 1e-8
        if D == 2 or p + q <= 3:
            U = haar_sample(D, rng)
            lhs = M @ _mixed(U, p, q)
            rhs = np.kron(_mixed(U, kl, kr), np.eye(I.a_size)) @ M
            assert np.abs(lhs - rhs).max() < 1e-7
    assert np.abs(total - np.eye(D ** (p + q))).max() < 1e-8
    assert np.allclose(iso[0].matrix.conj().T @ iso[0].matrix, br.no_epr_projector(p, q, D), atol=1e-8)


def test_polar_route_agrees():
    proj = br.orthogonal_projectors(2, 1, 3)
    for a in br.pairings(2, 1, 1):
        S = br.sector_isometry_alpha(a, proj, "sqrt")
        P = br.sector_isometry_alpha(a, proj, "polar")
        assert np.abs(S - P).max() < 1e-12


@pytest.mark.parametrize("D", [16, 32])
def test_approximate_orthogonality(D):
    p, q = 2, 2
    for ell in (1, 2):
        G, F = br.orthogonality_matrices(p, q, D, ell)
        assert np.linalg.norm(G, 2) <= br.orthogonality_bounds(p, q, D, ell)
        for lp, Fm in F.items():
            assert np.linalg.norm(Fm, 2) <= br.orthogonality_bounds(p, q, D, ell, lp)
