"""Scrambling diagnostics and distinguishing experiments.

Every ensemble-level diagnostic draws sample ``i`` from the stream
``make_rng(seed, i)`` and evaluates an exact per-sample value (no shot noise),
so the reported standard error is purely over unitaries. Haar references are
closed forms where available, otherwise a Haar Monte-Carlo run on the
independent stream ``make_rng(seed, HAAR_STREAM, i)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from math import comb

import numpy as np

from . import tensor_core as tc
from .circuits import EnsembleSpec, dense_matrix, haar_sample, light_cone
from .seeding import make_rng

HAAR_STREAM = 0x48414152
ORDERINGS = ("time_ordered", "out_of_time_ordered")


def _py(x):
    if isinstance(x, np.ndarray):
        return [_py(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_py(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _py(v) for k, v in x.items()}
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


@dataclass
class DiagnosticResult:
    name: str
    spec: dict | None
    params: dict
    estimate: float | list
    std_error: float | list
    haar_ref: float | list | None
    n_samples: int
    seed: int | None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.asarray(self.std_error, dtype=float) < 0):
            raise ValueError("std_error must be non-negative")
        if not np.all(np.isfinite(np.asarray(self.estimate, dtype=float))):
            raise ValueError("estimate must be finite")

    def zscore(self) -> float | None:
        if self.haar_ref is None or np.ndim(self.estimate):
            return None
        se = float(self.std_error)
        href = float(self.haar_ref)
        hse = float(self.meta.get("haar_std_error", 0.0))
        tot = np.hypot(se, hse)
        diff = float(self.estimate) - href
        if tot == 0:
            return 0.0 if diff == 0 else float(np.sign(diff) * np.inf)
        return diff / tot

    def to_json(self) -> dict:
        z = self.zscore()
        meta = dict(self.meta)
        if z is not None:
            meta["zscore"] = z
        return _py({
            "name": self.name,
            "spec": self.spec,
            "params": self.params,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "haar_ref": self.haar_ref,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "meta": meta,
        })


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 2:
        return v.mean(axis=0), np.zeros(v.shape[1:]) if v.ndim > 1 else 0.0
    return v.mean(axis=0), v.std(axis=0, ddof=1) / np.sqrt(v.shape[0])


def _unitaries(spec: EnsembleSpec, samples: int, seed: int, with_circuits=False):
    for i in range(samples):
        circ = spec.sample_circuit(make_rng(seed, i))
        U = dense_matrix(circ)
        yield (U, circ) if with_circuits else U


def _haar_unitaries(n, samples, seed):
    for i in range(samples):
        yield haar_sample(1 << n, make_rng(seed, HAAR_STREAM, i))


def _pauli(n, qubit, letter):
    return tc.PauliString.single(n, qubit, letter).matrix()


# ---------------------------------------------------------------- correlators


def otoc(U: np.ndarray, paulis, psi: np.ndarray, ordering: str = "out_of_time_ordered") -> complex:
    """2k-point correlator <psi| ... |psi> in time-ordered or out-of-time-ordered form.

    ``paulis`` are PauliString objects or matrices, listed P_1 .. P_2k (P_1
    acts first).
    """
    if ordering not in ORDERINGS:
        raise ValueError(f"ordering must be one of {ORDERINGS}")
    mats = [p.matrix() if isinstance(p, tc.PauliString) else np.asarray(p) for p in paulis]
    if len(mats) % 2:
        raise ValueError("need an even number of Paulis")
    dim = U.shape[0]
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (dim,) or any(m.shape != (dim, dim) for m in mats):
        raise tc.DimensionError("Paulis, state and U must act on the same qubits")
    Ud = U.conj().T
    k = len(mats) // 2
    v = psi
    if ordering == "time_ordered":
        for i, P in enumerate(mats):
            v = P @ ((U if i < k else Ud) @ v)
    else:
        for i, P in enumerate(mats):
            v = Ud @ (P @ (U @ v)) if i % 2 == 0 else P @ v
    return complex(np.vdot(psi, v))


def local_paulis(n: int, r: int) -> list:
    """Non-identity Pauli indices of weight at most r."""
    w = tc.pauli_weights(n)
    return [int(i) for i in np.nonzero((w >= 1) & (w <= r))[0]]


def _survey_values(U, tuples, mats, psi):
    out = []
    for tup in tuples:
        ps = [mats[i] for i in tup]
        out.append((otoc(U, ps, psi, "time_ordered"), otoc(U, ps, psi, "out_of_time_ordered")))
    return np.abs(np.array(out)) ** 2


def correlator_survey(spec: EnsembleSpec, r: int = 1, k: int = 2, samples: int = 50, seed: int = 0,
                      max_tuples: int = 200, threshold: float = 0.5, haar_reference: bool = True) -> DiagnosticResult:
    """Mean |C|^2 over local 2k-point correlators (both orderings) and its tail.

    Tuples are enumerated when there are at most ``max_tuples`` (capped at
    10^4) of them, otherwise drawn once from a dedicated stream and
    shared by every sample and by the Haar reference.
    """
    n = spec.n
    max_tuples = min(int(max_tuples), 10_000)
    idx = local_paulis(n, r)
    total = len(idx) ** (2 * k)
    if total <= max_tuples:
        tuples = list(product(range(len(idx)), repeat=2 * k))
    else:
        pick = make_rng(seed, 2**32 - 1).integers(0, len(idx), size=(max_tuples, 2 * k))
        tuples = [tuple(int(v) for v in row) for row in pick]
    mats = [tc.PauliString.from_index(i, n).matrix() for i in idx]
    psi = tc.basis_state(n, 0)

    def run(unitaries):
        per, mx, tail = [], 0.0, 0
        for U in unitaries:
            vals = _survey_values(U, tuples, mats, psi)
            per.append(vals.mean())
            mx = max(mx, float(np.sqrt(vals.max())))
            tail += int(np.sum(vals > threshold**2))
        return per, mx, tail

    per, mx, tail = run(_unitaries(spec, samples, seed))
    est, se = _mean_se(per)
    meta = {"max_abs": mx, "tail_fraction": tail / (2 * len(tuples) * samples), "tuples": len(tuples),
            "threshold": threshold}
    href = None
    if haar_reference:
        hper, hmx, _ = run(_haar_unitaries(n, samples, seed))
        href, hse = _mean_se(hper)
        meta.update({"haar_std_error": float(hse), "haar_max_abs": hmx, "haar_ref_kind": "monte_carlo"})
    return DiagnosticResult("correlator_survey", spec.to_json(), {"r": r, "k": k, "max_tuples": max_tuples},
                            float(est), float(se), None if href is None else float(href), samples, seed, meta)


# ---------------------------------------------------------------- operator size


def operator_size_distribution(U: np.ndarray, O) -> np.ndarray:
    """Weight distribution of U O U^dagger, O normalized so that tr(O^dag O)/2^n = 1."""
    Om = O.matrix() if isinstance(O, tc.PauliString) else np.asarray(O)
    n = tc.num_qubits_of(U.shape[0])
    if n > tc.MAX_PAULI_QUBITS:
        raise ValueError(f"size distribution limited to n <= {tc.MAX_PAULI_QUBITS}")
    norm = np.real(np.trace(Om.conj().T @ Om)) / (1 << n)
    Ot = U @ Om @ U.conj().T / np.sqrt(norm)
    c2 = np.abs(tc.pauli_coefficients(Ot, n)) ** 2
    return np.bincount(tc.pauli_weights(n), weights=c2, minlength=n + 1)


def haar_size_distribution(n: int) -> np.ndarray:
    """Flat distribution over the 4^n - 1 non-identity Paulis, binned by weight."""
    out = np.array([3**w * comb(n, w) for w in range(n + 1)], dtype=float)
    out[0] = 0.0
    return out / (4**n - 1)


def tvd(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def size_distribution_test(spec: EnsembleSpec, samples: int = 200, seed: int = 0,
                           qubit: int = 0, letter: str = "Z", nsigma: float = 3.0) -> DiagnosticResult:
    """TVD between the ensemble-mean size distribution and the Haar profile.

    The Monte-Carlo budget is ``nsigma`` standard errors per weight bin,
    passed through the same half-L1 sum.
    """
    n = spec.n
    O = _pauli(n, qubit, letter)
    dists = np.array([operator_size_distribution(U, O) for U in _unitaries(spec, samples, seed)])
    mean, se = _mean_se(dists)
    ref = haar_size_distribution(n)
    d = tvd(mean, ref)
    budget = 0.5 * nsigma * float(np.sum(se))
    meta = {"distribution": mean, "distribution_se": se, "haar_distribution": ref,
            "mc_budget": budget, "within_budget": d <= budget}
    return DiagnosticResult("size_distribution", spec.to_json(), {"qubit": qubit, "letter": letter},
                            d, 0.5 * float(np.sqrt(np.sum(se**2))), 0.0, samples, seed, meta)


def pauli_transfer_matrix(U: np.ndarray) -> np.ndarray:
    """R[Q, P] = tr(Q U P U^dagger) / 2^n over all Paulis (flat index order)."""
    n = tc.num_qubits_of(U.shape[0])
    if n > 5:
        raise ValueError("transfer matrix limited to n <= 5")
    N = 1 << n
    stack = np.array([tc.PauliString.from_index(i, n).matrix() for i in range(4**n)])
    conj = np.einsum("ij,pjk,lk->pil", U, stack, U.conj(), optimize=True)
    return (stack.reshape(4**n, N * N) @ conj.transpose(0, 2, 1).reshape(4**n, N * N).T) / N


def op_spreading_tvd(spec: EnsembleSpec, samples: int = 100, seed: int = 0, bootstrap: int = 200) -> DiagnosticResult:
    """max over P of TVD(p(.;P), uniform) with p(Q;P) = E |tr(Q U P U^dag)/2^n|^2."""
    n = spec.n
    if n > 5:
        raise ValueError("op_spreading_tvd limited to n <= 5")
    M = 4**n
    u = 1.0 / (M - 1)
    B = int(min(bootstrap, max(20, 2e7 // (M * M))))
    weights = make_rng(seed, 2**32 - 2).multinomial(samples, np.full(samples, 1.0 / samples), size=B)
    acc = np.zeros((M, M))
    boot = np.zeros((B, M, M))
    for i, U in enumerate(_unitaries(spec, samples, seed)):
        R2 = np.abs(pauli_transfer_matrix(U)) ** 2
        acc += R2
        boot += weights[:, i, None, None] * R2[None]

    def max_tvd(p):
        return float(np.max(0.5 * np.abs(p[1:, 1:] - u).sum(axis=0)))

    est = max_tvd(acc / samples)
    bvals = np.array([max_tvd(b / samples) for b in boot])
    se = float(bvals.std(ddof=1)) if B > 1 else 0.0
    return DiagnosticResult("op_spreading_tvd", spec.to_json(), {"bootstrap": B}, est, se, 0.0, samples, seed,
                            {"haar_p": u})


# ---------------------------------------------------------------- distinguishers


def inverse_echo_value(U: np.ndarray, qubit: int = 0, letter: str = "Z") -> float:
    """Expected fraction of flipped bits when measuring U^dag P U |0^n> in the Z basis."""
    n = tc.num_qubits_of(U.shape[0])
    v = tc.apply_gate(U[:, 0].copy(), tc.PAULI[letter], [qubit], n)
    probs = np.abs(U.conj().T @ v) ** 2
    return float(probs @ _hamming(n)) / n


def _hamming(n):
    x = np.arange(1 << n)
    return np.array([v.bit_count() for v in x.tolist()], dtype=float)


def inverse_echo_haar(n: int) -> float:
    N = 1 << n
    return N * N / (2.0 * (N * N - 1))


def inverse_echo(spec: EnsembleSpec, samples: int = 500, seed: int = 0, qubit: int = 0,
                 letter: str = "Z") -> DiagnosticResult:
    n = spec.n
    vals, cone = [], 0
    for U, circ in _unitaries(spec, samples, seed, with_circuits=True):
        vals.append(inverse_echo_value(U, qubit, letter))
        cone = max(cone, len(light_cone(circ, qubit)))
    est, se = _mean_se(vals)
    meta = {"light_cone": cone, "light_cone_bound": cone / n, "haar_ref_kind": "closed_form"}
    return DiagnosticResult("inverse_echo", spec.to_json(), {"qubit": qubit, "letter": letter},
                            float(est), float(se), inverse_echo_haar(n), samples, seed, meta)


def conjugate_epr_value(U: np.ndarray, qubit: int = 0, pair: int | None = None, letter: str = "X") -> float:
    """EPR fidelity of qubit pair (pair, n + pair) in (U (x) U*)(P_qubit (x) 1)|EPR>.

    With O = U P U^dag this is the Pauli weight of O acting trivially on ``pair``.
    """
    n = tc.num_qubits_of(U.shape[0])
    pair = n - 1 if pair is None else pair
    O = U @ tc.embed(tc.PAULI[letter], [qubit], n) @ U.conj().T
    keep = [j for j in range(n) if j != pair]
    red = tc.partial_trace(O, keep, n) / 2.0
    return float(np.real(np.vdot(red, red))) * 2.0 / (1 << n)


def conjugate_epr_haar(n: int) -> float:
    return (4 ** (n - 1) - 1) / (4**n - 1)


def conjugate_epr_test(spec: EnsembleSpec, samples: int = 500, seed: int = 0, qubit: int = 0,
                       pair: int | None = None) -> DiagnosticResult:
    n = spec.n
    pair = n - 1 if pair is None else pair
    vals = [conjugate_epr_value(U, qubit, pair) for U in _unitaries(spec, samples, seed)]
    est, se = _mean_se(vals)
    return DiagnosticResult("conjugate_epr_test", spec.to_json(), {"qubit": qubit, "pair": pair},
                            float(est), float(se), conjugate_epr_haar(n), samples, seed,
                            {"haar_ref_kind": "closed_form", "maximally_mixed": 0.25})


def z0_value(U: np.ndarray) -> float:
    n = tc.num_qubits_of(U.shape[0])
    z = 1.0 - 2.0 * ((np.arange(1 << n) >> (n - 1)) & 1)  # Z on qubit 0 (MSB)
    M = (z[:, None] * U) * z[None, :]  # Z U Z
    c = np.real(np.vdot(U, M)) / (1 << n)  # tr(U^dag Z U Z)/2^n
    return float(c * c)


def z0_memory(spec: EnsembleSpec, samples: int = 500, seed: int = 0) -> DiagnosticResult:
    n = spec.n
    vals = [z0_value(U) for U in _unitaries(spec, samples, seed)]
    est, se = _mean_se(vals)
    meta = {"haar_ref_kind": "closed_form"}
    p = spec.param_dict
    if spec.kind == "brickwork":
        meta["local_lower_bound"] = (1.0 / 15.0) ** p["depth"]
    return DiagnosticResult("z0_memory", spec.to_json(), {}, float(est), float(se), 1.0 / (4**n - 1),
                            samples, seed, meta)


def hp_decode(U: np.ndarray, a: int, radiation: int) -> tuple[float, float]:
    """Conjugate-based probabilistic decoder.

    Input qubits 0..a-1 of U carry the diary (EPR with reference R), the rest
    are EPR with the early radiation held by the decoder. Output qubits
    0..radiation-1 are emitted. The decoder applies U* to its mirrored copy,
    projects emitted/mirrored pairs onto EPR and returns
    (post-selection probability, root fidelity sqrt(<EPR|rho|EPR>) of the
    reference pair). With nothing emitted the pair is maximally mixed and the
    fidelity is 1/2^a.
    """
    n = tc.num_qubits_of(U.shape[0])
    if not (0 <= a <= n and 0 <= radiation <= n):
        raise ValueError("invalid register partition")
    A, Bdim, Ddim = 1 << a, 1 << (n - a), 1 << radiation
    Cdim = (1 << n) // Ddim
    # output index = d * Cdim + c (radiation qubits are the leading ones)
    U4 = U.reshape(Ddim, Cdim, A, Bdim)
    phi = np.einsum("dcrb,desb->rces", U4, U4.conj(), optimize=True)
    phi = phi / np.sqrt(float(1 << (n + a)) * Ddim)
    p = float(np.vdot(phi, phi).real)
    if p <= 1e-300:
        return 0.0, 0.0
    overlap = np.einsum("rcer->ce", phi) / np.sqrt(A)
    return p, float(np.sqrt(np.vdot(overlap, overlap).real / p))


def hp_decoder_fidelity(spec: EnsembleSpec, a: int = 1, radiation: int | None = None, samples: int = 200,
                        seed: int = 0, haar_reference: bool = True) -> DiagnosticResult:
    n = spec.n
    if n > 8:
        raise ValueError("decoder simulation limited to n <= 8")
    radiation = n if radiation is None else radiation
    res = np.array([hp_decode(U, a, radiation) for U in _unitaries(spec, samples, seed)])
    (pmean, fmean), (pse, fse) = _mean_se(res)
    zero = int(np.sum(res[:, 0] <= 1e-300))
    meta = {"postselection_probability": float(pmean), "postselection_se": float(pse), "zero_probability": zero}
    href = None
    if haar_reference:
        hres = np.array([hp_decode(U, a, radiation) for U in _haar_unitaries(n, samples, seed)])
        hm, hs = _mean_se(hres)
        href = float(hm[1])
        meta.update({"haar_std_error": float(hs[1]), "haar_ref_kind": "monte_carlo",
                     "haar_postselection_probability": float(hm[0])})
    return DiagnosticResult("hp_decoder_fidelity", spec.to_json(), {"a": a, "radiation": radiation},
                            float(fmean), float(fse), href, samples, seed, meta)


# ---------------------------------------------------------------- entropies


def _purities(state: np.ndarray, subsystem, n: int) -> tuple[float, float]:
    sub = sorted(int(q) for q in subsystem)
    rest = [q for q in range(n) if q not in sub]
    psi = np.asarray(state, dtype=complex).reshape((2,) * n).transpose(sub + rest)
    m = psi.reshape(1 << len(sub), -1)
    rho_a = m @ m.conj().T
    direct = float(np.real(np.vdot(rho_a, rho_a)))
    # EPR form: 2^|A| <EPR_A| (rho (x) rho*) |EPR_A>, traced over both B copies
    t = np.einsum("ib,jb,ic,jc->", m, m.conj(), m.conj(), m, optimize=True)
    via_epr = float(np.real(t))
    return direct, via_epr


def renyi2_entropy(state: np.ndarray, subsystem) -> float:
    n = tc.num_qubits_of(np.asarray(state).shape[0])
    direct, via_epr = _purities(state, subsystem, n)
    if abs(direct - via_epr) > 1e-9:
        raise ArithmeticError("purity routes disagree")
    return float(-np.log(direct))


def operator_renyi2(U: np.ndarray | None, O: np.ndarray, subsystem) -> float:
    """Renyi-2 operator entanglement of U O U^dag across subsystem | complement."""
    O = np.asarray(O, dtype=complex)
    n = tc.num_qubits_of(O.shape[0])
    Ot = O if U is None else U @ O @ U.conj().T
    vec = Ot.reshape(-1) / np.linalg.norm(Ot)
    sub = sorted(int(q) for q in subsystem)
    return renyi2_entropy(vec, sub + [q + n for q in sub])


CATALOG = {
    "inverse_echo": {"fn": inverse_echo, "required": ["ensemble", "n", "samples", "seed"], "limits": "n <= 10"},
    "conjugate_epr_test": {"fn": conjugate_epr_test, "required": ["ensemble", "n", "samples", "seed"],
                           "limits": "n <= 10"},
    "z0_memory": {"fn": z0_memory, "required": ["ensemble", "n", "samples", "seed"], "limits": "n <= 10"},
    "size_distribution": {"fn": size_distribution_test, "required": ["ensemble", "n", "samples", "seed"],
                          "limits": "n <= 8"},
    "op_spreading_tvd": {"fn": op_spreading_tvd, "required": ["ensemble", "n", "samples", "seed"],
                         "limits": "n <= 5"},
    "correlator_survey": {"fn": correlator_survey, "required": ["ensemble", "n", "samples", "seed"],
                          "limits": "tuples <= 10^4"},
    "hp_decoder_fidelity": {"fn": hp_decoder_fidelity, "required": ["ensemble", "n", "samples", "seed"],
                            "limits": "n <= 8"},
}
