import numpy as np
import pytest

from strongdesign import circuits as cx
from strongdesign import tensor_core as tc
from strongdesign.kwise import FunctionFamily, FunctionSample, constant_function, sample_function
from strongdesign.seeding import make_rng
from conftest import rand_state


def _table(bits_in, rng_out, values):
    return FunctionSample(FunctionFamily(bits_in, rng_out, "table"), tuple(values))


def test_haar_sample_unitary(rng):
    for _ in range(100):
        assert cx.is_unitary(cx.haar_sample(4, rng))
    B = cx.haar_batch(4, 50, rng)
    assert np.abs(B.conj().transpose(0, 2, 1) @ B - np.eye(4)).max() < 1e-9


def test_haar_moments():
    U = cx.haar_batch(4, 100_000, make_rng(11, 0))
    a = np.abs(U[:, 0, 0]) ** 2
    assert abs(a.mean() - 0.25) <= 3 * a.std(ddof=1) / np.sqrt(len(a))
    t = np.abs(np.trace(U, axis1=1, axis2=2)) ** 2
    assert abs(t.mean() - 1.0) <= 3 * t.std(ddof=1) / np.sqrt(len(t))


def test_shuffles(rng):
    zero2 = _table(2, 2, [0, 0, 0, 0])
    psi = rand_state(rng, 16)
    assert np.array_equal(cx.apply_shuffle_left(psi, zero2), psi)
    assert np.array_equal(cx.apply_shuffle_right(psi, zero2), psi)
    h1 = _table(2, 2, [0, 0b11, 0, 0])  # h1(01) = 11
    out = cx.apply_shuffle_left(tc.basis_state(4, 0b0001), h1)
    assert np.array_equal(out, tc.basis_state(4, 0b1101))
    h2 = _table(2, 2, [0, 0, 0, 0b10])  # h2(11) = 10
    out = cx.apply_shuffle_right(tc.basis_state(4, 0b1100), h2)
    assert np.array_equal(out, tc.basis_state(4, 0b1110))
    for _ in range(100):
        psi = rand_state(rng, 64)
        h = sample_function(FunctionFamily(3, 3, "table"), rng)
        assert np.array_equal(cx.apply_shuffle_left(cx.apply_shuffle_left(psi, h), h), psi)
        assert np.array_equal(cx.apply_shuffle_right(cx.apply_shuffle_right(psi, h), h), psi)
    with pytest.raises(ValueError):
        cx.apply_shuffle_left(rand_state(rng, 8), zero2)
    with pytest.raises(ValueError):
        cx.apply_shuffle_left(rand_state(rng, 64), zero2)


def test_ternary_phase(rng):
    fam = FunctionFamily(3, "ternary")
    psi = rand_state(rng, 8)
    assert np.allclose(cx.apply_ternary_phase(psi, constant_function(fam, 0)), psi)
    assert np.allclose(cx.apply_ternary_phase(psi, constant_function(fam, 1)), cx.OMEGA * psi)
    f = sample_function(fam, rng)
    out = psi
    for _ in range(3):
        out = cx.apply_ternary_phase(out, f)
    assert np.allclose(out, psi)
    with pytest.raises(ValueError):
        cx.apply_ternary_phase(psi, sample_function(FunctionFamily(3, 2), rng))


def _lrfc_parts(n, rng):
    h = n // 2
    f = sample_function(FunctionFamily(n, "ternary"), rng)
    h1 = sample_function(FunctionFamily(h, h), rng)
    h2 = sample_function(FunctionFamily(h, h), rng)
    return f, h1, h2, cx.haar_sample(1 << n, rng), cx.haar_sample(1 << n, rng)


def test_lrfc_identity():
    n = 4
    zf = constant_function(FunctionFamily(n, "ternary"), 0)
    zh = _table(2, 2, [0] * 4)
    c = cx.build_lrfc(n, zf, zh, zh, np.eye(16), np.eye(16))
    assert c.depth == 5
    assert np.allclose(cx.dense_matrix(c), np.eye(16))


def test_lrfc_closed_form(rng):
    n, h = 4, 2
    f, h1, h2, C, D = _lrfc_parts(n, rng)
    U = cx.dense_matrix(cx.build_lrfc(n, f, h1, h2, C, D))
    mid = np.zeros((16, 16), dtype=complex)
    for x in range(16):
        hi, lo = x >> h, x & 3
        hi2 = hi ^ h1.evaluate(lo)
        lo2 = lo ^ h2.evaluate(hi2)
        mid[(hi2 << h) | lo2, x] = cx.OMEGA ** f.evaluate(x)
    assert np.abs(U - D @ mid @ C).max() < 1e-9


def test_lrfc_main_text_order(rng):
    n = 4
    f, h1, h2, C, D = _lrfc_parts(n, rng)
    U = cx.dense_matrix(cx.build_lrfc(n, f, h1, h2, C, D, phase_first=False))
    SL = np.zeros((16, 16))
    SL[cx.shuffle_left_perm(n, h1), np.arange(16)] = 1
    SR = np.zeros((16, 16))
    SR[cx.shuffle_right_perm(n, h2), np.arange(16)] = 1
    F = np.diag(cx.ternary_phases(n, f))
    assert np.abs(U - D @ SR @ F @ SL @ C).max() < 1e-9


def test_lrfc_unitary_and_errors(rng):
    for i in range(50):
        c = cx.sample_lrfc(4, make_rng(3, i))
        assert cx.is_unitary(cx.dense_matrix(c))
    f, h1, h2, C, D = _lrfc_parts(4, rng)
    with pytest.raises(ValueError):
        cx.build_lrfc(4, f, h1, h2, 2 * C, D)


def test_lrfc_poly_backend():
    c = cx.sample_lrfc(6, make_rng(3, 0), backend="poly", k=2)
    assert cx.is_unitary(cx.dense_matrix(c))


def test_two_layer_structure(rng):
    c = cx.build_two_layer(4, 2, cx.haar_sample, cx.haar_sample, rng)
    assert [len(layer) for layer in c.layers] == [1, 1, 1]  # outer, one brick, outer
    c = cx.build_two_layer(8, 2, cx.identity_sampler, cx.identity_sampler, rng)
    assert np.allclose(cx.dense_matrix(c), np.eye(256))
    c = cx.build_two_layer(12, 2, cx.haar_sample, cx.identity_sampler, rng)
    first, second = c.layers[1], c.layers[2]
    assert sorted(q for g in first for q in g.targets) == list(range(12))
    tg = [q for g in second for q in g.targets]
    assert len(tg) == len(set(tg)) and tg == list(range(2, 10))
    with pytest.raises(ValueError):
        cx.build_two_layer(6, 4, cx.haar_sample, cx.haar_sample, rng)
    cp = cx.build_two_layer(8, 2, cx.haar_sample, cx.haar_sample, rng, periodic=True)
    assert len(cp.layers[2]) == 2


def test_blocked_scrambler(rng):
    c = cx.build_blocked_scrambler(8, 2, cx.haar_sample, rng)
    assert c.depth == 2
    assert [g.targets for g in c.layers[0]] == [(0, 1, 2, 3), (4, 5, 6, 7)]
    assert [g.targets for g in c.layers[1]] == [(0, 1, 4, 5), (2, 3, 6, 7)]
    for q in range(8):
        assert cx.light_cone(c, q) == set(range(8))
    c = cx.build_blocked_scrambler(8, 1, cx.haar_sample, rng)
    assert c.depth == 3
    assert [len(cx.light_cone(cx.Circuit(8, c.layers[:d]), 0)) for d in (1, 2, 3)] == [2, 4, 8]
    with pytest.raises(ValueError):
        cx.build_blocked_scrambler(6, 2, cx.haar_sample, rng)


def test_brickwork(rng):
    c = cx.build_brickwork_1d(4, 1, rng)
    assert [g.targets for g in c.layers[0]] == [(0, 1), (2, 3)]
    for d in range(1, 6):
        c = cx.build_brickwork_1d(10, d, rng)
        assert len(cx.light_cone(c, 0)) <= 2 * d
    a = cx.dense_matrix(cx.build_brickwork_1d(4, 2, make_rng(1, 0)))
    b = cx.dense_matrix(cx.build_brickwork_1d(4, 2, make_rng(1, 1)))
    assert not np.allclose(a, b)


def test_light_cone_and_dense(rng):
    assert cx.light_cone(cx.Circuit(3, []), 1) == {1}
    assert np.allclose(cx.dense_matrix(cx.Circuit(3, [])), np.eye(8))
    X = tc.PAULI["X"]
    c = cx.Circuit(2, [[cx.Gate("dense", (0,), X)]])
    assert np.allclose(cx.dense_matrix(c), np.kron(X, np.eye(2)))
    c = cx.build_brickwork_1d(5, 3, rng)
    M = cx.dense_matrix(c)
    for _ in range(20):
        psi = rand_state(rng, 32)
        assert np.abs(M @ psi - c.apply(psi)).max() < 1e-9
    with pytest.raises(ValueError):
        cx.dense_matrix(cx.Circuit(13, []))
    with pytest.raises(ValueError):
        cx.Circuit(3, [[cx.Gate("dense", (0, 1), np.eye(4)), cx.Gate("dense", (1,), np.eye(2))]])


@pytest.mark.parametrize("kind,params", [("haar", {}), ("lrfc", {}), ("two_layer", {"xi": 2}),
                                         ("blocked_scrambler", {"xi": 1}), ("brickwork", {"depth": 3})])
def test_ensemble_unitary_and_serialization(kind, params):
    spec = cx.EnsembleSpec.make(kind, 4, **params)
    assert cx.EnsembleSpec.from_json(spec.to_json()) == spec
    c = spec.sample_circuit(make_rng(9, 0))
    assert cx.is_unitary(cx.dense_matrix(c))
    obj, blobs = c.to_json()
    back = cx.Circuit.from_json(obj, blobs)
    assert np.array_equal(cx.dense_matrix(back), cx.dense_matrix(c))
    assert np.array_equal(spec.sample_unitary(make_rng(9, 0)), cx.dense_matrix(c))


def test_ensemble_spec_errors():
    with pytest.raises(ValueError):
        cx.EnsembleSpec.make("nope", 4)
    with pytest.raises(ValueError):
        cx.EnsembleSpec.make("two_layer", 5, xi=2)
    with pytest.raises(ValueError):
        cx.EnsembleSpec.make("brickwork", 4, depth=0)
