import numpy as np
import pytest

from strongdesign import path_recording as pr
from strongdesign import tensor_core as tc
from strongdesign.circuits import EnsembleSpec
from strongdesign.seeding import make_rng
from conftest import rand_state


def _random_relation_state(rng, n, m, terms=6):
    # random state on the domain: distinct images in L and R, |L| + |R| small
    N = 1 << n
    amps = {}
    for _ in range(terms):
        ys = rng.choice(N, 2, replace=False)
        xs = rng.choice(N, 2, replace=False)
        L = ((int(xs[0]), int(ys[0])),) if rng.random() < 0.5 else ()
        R = ((int(xs[1]), int(ys[1])),) if rng.random() < 0.5 else ()
        key = (int(rng.integers(N)), int(rng.integers(1 << m)), L, R)
        amps[key] = complex(rng.normal(), rng.normal())
    s = pr.RelationState(n, m, amps)
    nrm = s.norm()
    return pr.RelationState(n, m, {k: v / nrm for k, v in amps.items()})


def _inner(a, b):
    return sum(np.conj(v) * b.amps.get(k, 0) for k, v in a.amps.items())


def test_single_forward_query():
    n = 2
    s = pr.RelationState.from_vector(tc.basis_state(n, 1), n)
    out = pr.apply_V(s)
    want = {(y, 0, ((1, y),), ()): 0.5 for y in range(4)}
    assert set(out.amps) == set(want)
    assert all(abs(out.amps[k] - 0.5) < 1e-15 for k in want)


@pytest.mark.parametrize("q", pr.QUERY_TYPES)
def test_t1_maximally_mixed(q, rng):
    for n in (1, 2, 3):
        s = pr.RelationState.from_vector(rand_state(rng, 1 << n), n)
        rho = pr.ORACLE_MAP[q](s).reduced_state()
        assert np.abs(rho - np.eye(1 << n) / (1 << n)).max() <= 1e-9


def test_norm_preserved_on_domain(rng):
    for _ in range(50):
        s = _random_relation_state(rng, 3, 1)
        for V, Vd in ((pr.apply_V, pr.apply_V_dag), (pr.apply_Vbar, pr.apply_Vbar_dag)):
            out = V(s)
            assert abs(out.norm() - 1) < 1e-10
            back = Vd(out) - s
            assert back.norm() < 1e-10


def test_partial_isometry_norm_bound(rng):
    for _ in range(50):
        s = _random_relation_state(rng, 2, 0)
        for q in pr.QUERY_TYPES:
            assert pr.ORACLE_MAP[q](s).norm() <= 1 + 1e-10


def test_adjoint_pairs(rng):
    for _ in range(20):
        a = _random_relation_state(rng, 2, 0)
        b = pr.apply_V(_random_relation_state(rng, 2, 0))
        assert abs(_inner(a, pr.apply_V_dag(b)) - _inner(pr.apply_V(a), b)) < 1e-12
        assert abs(_inner(a, pr.apply_Vbar_dag(b)) - _inner(pr.apply_Vbar(a), b)) < 1e-12


def test_vbar_is_swapped_v(rng):
    s = _random_relation_state(rng, 3, 0)
    a = pr.apply_Vbar(s)
    b = pr.apply_V(s.swap_lr()).swap_lr()
    assert _inner(a - b, a - b) == 0


def test_sector_growth(rng):
    s = pr.RelationState.from_vector(rand_state(rng, 8), 3)
    for q in ("fwd", "fwd", "conj"):
        before = max(a + b for a, b in s.sectors())
        s = pr.ORACLE_MAP[q](s)
        assert max(a + b for a, b in s.sectors()) <= before + 1


def test_capacity_error():
    s = pr.RelationState.from_vector(tc.basis_state(1, 0), 1)
    s = pr.apply_V(pr.apply_V(s))
    with pytest.raises(pr.CapacityError):
        pr.apply_V(s)


def test_program_validation(rng):
    with pytest.raises(ValueError):
        pr.AdversaryProgram(1, 0, ("bad",), [np.eye(2)] * 2)
    with pytest.raises(ValueError):
        pr.AdversaryProgram(1, 0, ("fwd",), [np.eye(2)])
    with pytest.raises(ValueError):
        pr.AdversaryProgram(1, 0, ("fwd",), [np.eye(2), 2 * np.eye(2)])
    prog = pr.AdversaryProgram.random(2, 1, ("fwd", "inv"), rng)
    obj, blobs = prog.to_json()
    back = pr.AdversaryProgram.from_json(obj, blobs)
    assert all(np.array_equal(a, b) for a, b in zip(back.unitaries, prog.unitaries))


def test_t0_all_oracles(rng):
    prog = pr.AdversaryProgram.random(2, 1, (), rng)
    psi = prog.unitaries[0][:, 0]
    want = np.outer(psi, psi.conj())
    for oracle in ("path_recording", "exact_haar", "haar_monte_carlo"):
        assert np.abs(pr.run_adversary(prog, oracle, samples=3) - want).max() < 1e-12
    spec = EnsembleSpec.make("haar", 2)
    assert np.abs(pr.run_adversary(prog, "ensemble", samples=2, spec=spec) - want).max() < 1e-12


@pytest.mark.parametrize("q", pr.QUERY_TYPES)
def test_t1_matches_exact_haar(q, rng):
    for n, m in [(1, 1), (2, 1), (3, 0)]:
        prog = pr.AdversaryProgram.random(n, m, (q,), rng)
        a = pr.run_adversary(prog, "path_recording")
        b = pr.run_adversary(prog, "exact_haar")
        assert np.abs(a - b).max() <= 1e-9


def test_exact_haar_routes_agree(rng):
    for queries in [("fwd", "inv"), ("conj", "fwd"), ("transp", "inv"), ("fwd", "fwd")]:
        prog = pr.AdversaryProgram.random(1, 1, queries, rng)
        a = pr.exact_haar_reformulated(prog)
        b = pr.exact_haar_weingarten(prog)
        assert np.abs(a - b).max() < 1e-12


def test_exact_haar_vs_monte_carlo(rng):
    prog = pr.AdversaryProgram.random(1, 1, ("fwd", "conj"), rng)
    ex = pr.run_adversary(prog, "exact_haar")
    mc = pr.run_adversary(prog, "haar_monte_carlo", samples=20000, seed=1)
    assert tc.trace_distance(ex, mc) < 0.02


def test_path_sum_matches_sparse(rng):
    for queries in [("fwd", "fwd"), ("conj", "conj"), ("fwd", "fwd", "fwd")]:
        prog = pr.AdversaryProgram.random(2, 1, queries, rng)
        a = pr.run_adversary(prog, "path_recording", method="sparse")
        b = pr.run_adversary(prog, "path_recording", method="path_sum")
        assert np.abs(a - b).max() < 1e-12


def test_t2_close_to_haar(rng):
    prog = pr.AdversaryProgram.random(4, 0, ("fwd", "fwd"), make_rng(7, 4, 0))
    a = pr.run_adversary(prog, "path_recording")
    b = pr.run_adversary(prog, "exact_haar")
    assert tc.trace_distance(a, b) < 0.05
    assert abs(np.trace(a).real - 1) < 1e-12


def test_limits(rng):
    prog = pr.AdversaryProgram.random(1, 0, ("fwd",) * 4, rng)
    with pytest.raises(ValueError):
        pr.run_adversary(prog, "exact_haar")
    with pytest.raises(ValueError):
        pr.run_adversary(prog, "nope")
    with pytest.raises(ValueError):
        pr.run_adversary(prog, "ensemble")
