"""Path-recording oracles and adversary simulation.

Registers: system ``A`` (n qubits, leading), ancilla ``B`` (m qubits) and two
relation registers ``L``, ``R``. A :class:`RelationState` stores amplitudes
sparsely, keyed by ``(x, b, L, R)`` with each relation a sorted tuple of
``(x, y)`` pairs, which is exactly the normalized symmetric relation-state
basis when pairs are distinct (the only case the oracles produce).

Three ways to get the adversary's final reduced state on ``AB``:

* ``path_recording``: evolve a RelationState and trace out ``L`` and ``R``.
  For programs using only forward (or only conjugate) queries a path-sum
  evaluation gives the same matrix without enumerating relations.
* ``exact_haar``: Weingarten contraction of the query network, or (for tiny
  sizes) the parallel-query reformulation fed by the exact mixed twirl.
* ``haar_monte_carlo`` / ``ensemble``: sample means over explicit unitaries.
"""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import permutations
from math import factorial

import numpy as np

from . import tensor_core as tc
from .circuits import EnsembleSpec, haar_sample, is_unitary
from .seeding import make_rng
from .weingarten import all_perms, choi_mixed_twirl_exact, weingarten_matrix

PRUNE = 1e-14
QUERY_TYPES = ("fwd", "inv", "conj", "transp")

# ---------------------------------------------------------------- relation states


def _images(rel):
    return [y for _, y in rel]


def _domain(rel):
    return [x for x, _ in rel]


def _add(rel, pair):
    return tuple(sorted(rel + (pair,)))


def _remove(rel, pair):
    lst = list(rel)
    lst.remove(pair)
    return tuple(lst)


class CapacityError(RuntimeError):
    pass


@dataclass
class RelationState:
    n: int
    m: int = 0
    amps: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return 1 << self.n

    @classmethod
    def from_vector(cls, psi: np.ndarray, n: int, m: int = 0) -> "RelationState":
        psi = np.asarray(psi).reshape(1 << n, 1 << m)
        amps = {(int(x), int(b), (), ()): complex(psi[x, b]) for x, b in zip(*np.nonzero(psi))}
        return cls(n, m, amps)

    def copy(self) -> "RelationState":
        return RelationState(self.n, self.m, dict(self.amps))

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(a) ** 2 for a in self.amps.values())))

    def sectors(self) -> set:
        return {(len(k[2]), len(k[3])) for k in self.amps}

    def _new(self, amps) -> "RelationState":
        return RelationState(self.n, self.m, {k: v for k, v in amps.items() if abs(v) > PRUNE})

    def __add__(self, other):
        out = defaultdict(complex, self.amps)
        for k, v in other.amps.items():
            out[k] += v
        return self._new(out)

    def __sub__(self, other):
        out = defaultdict(complex, self.amps)
        for k, v in other.amps.items():
            out[k] -= v
        return self._new(out)

    def swap_lr(self) -> "RelationState":
        return RelationState(self.n, self.m, {(x, b, R, L): v for (x, b, L, R), v in self.amps.items()})

    def apply_system_unitary(self, W: np.ndarray) -> "RelationState":
        """Apply W on A (x) B to every (L, R) branch."""
        dim = self.N << self.m
        groups = defaultdict(lambda: np.zeros(dim, dtype=complex))
        for (x, b, L, R), v in self.amps.items():
            groups[(L, R)][(x << self.m) | b] += v
        out = {}
        mask = (1 << self.m) - 1
        for (L, R), vec in groups.items():
            w = W @ vec
            for idx in np.nonzero(np.abs(w) > PRUNE)[0]:
                out[(int(idx) >> self.m, int(idx) & mask, L, R)] = complex(w[idx])
        return RelationState(self.n, self.m, out)

    def reduced_state(self) -> np.ndarray:
        """Trace out L and R; returns the density matrix on A (x) B."""
        dim = self.N << self.m
        groups = defaultdict(lambda: np.zeros(dim, dtype=complex))
        for (x, b, L, R), v in self.amps.items():
            groups[(L, R)][(x << self.m) | b] += v
        rho = np.zeros((dim, dim), dtype=complex)
        for vec in groups.values():
            nz = np.nonzero(vec)[0]
            rho[np.ix_(nz, nz)] += np.outer(vec[nz], vec[nz].conj())
        return rho


# ---------------------------------------------------------------- oracle parts


def apply_VL(s: RelationState) -> RelationState:
    N = s.N
    out = defaultdict(complex)
    for (x, b, L, R), v in s.amps.items():
        im = set(_images(L)) | set(_images(R))
        if len(L) + len(R) >= N:
            raise CapacityError("relation capacity exhausted")
        w = v / np.sqrt(N - len(im))
        for y in range(N):
            if y not in im:
                out[(y, b, _add(L, (x, y)), R)] += w
    return s._new(out)


def apply_VL_dag(s: RelationState) -> RelationState:
    N = s.N
    out = defaultdict(complex)
    for (y, b, L, R), v in s.amps.items():
        li = _images(L)
        ri = _images(R)
        if li.count(y) != 1 or y in ri:
            continue
        pair = next(p for p in L if p[1] == y)
        im = set(li) | set(ri)
        out[(pair[0], b, _remove(L, pair), R)] += v / np.sqrt(N - len(im) + 1)
    return s._new(out)


def apply_VR(s: RelationState) -> RelationState:
    N = s.N
    out = defaultdict(complex)
    for (y, b, L, R), v in s.amps.items():
        dom = set(_domain(L)) | set(_domain(R))
        if len(L) + len(R) >= N:
            raise CapacityError("relation capacity exhausted")
        w = v / np.sqrt(N - len(dom))
        for x in range(N):
            if x not in dom:
                out[(x, b, L, _add(R, (x, y)))] += w
    return s._new(out)


def apply_VR_dag(s: RelationState) -> RelationState:
    N = s.N
    out = defaultdict(complex)
    for (x, b, L, R), v in s.amps.items():
        rd = _domain(R)
        ld = _domain(L)
        if rd.count(x) != 1 or x in ld:
            continue
        pair = next(p for p in R if p[0] == x)
        dom = set(ld) | set(rd)
        out[(pair[1], b, L, _remove(R, pair))] += v / np.sqrt(N - len(dom) + 1)
    return s._new(out)


def apply_V(s: RelationState) -> RelationState:
    """V = V^L (1 - V^R V^R+) + (1 - V^L V^L+) V^R+."""
    first = apply_VL(s - apply_VR(apply_VR_dag(s)))
    phi = apply_VR_dag(s)
    second = phi - apply_VL(apply_VL_dag(phi))
    return first + second


def apply_V_dag(s: RelationState) -> RelationState:
    """V^+ = (1 - V^R V^R+) V^L+ + V^R (1 - V^L V^L+)."""
    phi = apply_VL_dag(s)
    first = phi - apply_VR(apply_VR_dag(phi))
    second = apply_VR(s - apply_VL(apply_VL_dag(s)))
    return first + second


def apply_Vbar(s: RelationState) -> RelationState:
    return apply_V(s.swap_lr()).swap_lr()


def apply_Vbar_dag(s: RelationState) -> RelationState:
    return apply_V_dag(s.swap_lr()).swap_lr()


ORACLE_MAP = {"fwd": apply_V, "inv": apply_V_dag, "conj": apply_Vbar, "transp": apply_Vbar_dag}


# ---------------------------------------------------------------- programs


@dataclass
class AdversaryProgram:
    n: int
    m: int
    queries: tuple
    unitaries: list  # t + 1 unitaries on n + m qubits, W_1 first

    def __post_init__(self):
        self.queries = tuple(self.queries)
        if any(q not in QUERY_TYPES for q in self.queries):
            raise ValueError(f"query types must be in {QUERY_TYPES}")
        if len(self.unitaries) != len(self.queries) + 1:
            raise ValueError("need t + 1 interleaving unitaries")
        dim = 1 << (self.n + self.m)
        for W in self.unitaries:
            if np.asarray(W).shape != (dim, dim) or not is_unitary(W):
                raise ValueError("interleaving unitaries must be unitary on n + m qubits")

    @property
    def t(self) -> int:
        return len(self.queries)

    @property
    def dim(self) -> int:
        return 1 << (self.n + self.m)

    @classmethod
    def random(cls, n, m, queries, rng) -> "AdversaryProgram":
        dim = 1 << (n + m)
        return cls(n, m, tuple(queries), [haar_sample(dim, rng) for _ in range(len(queries) + 1)])

    def to_json(self):
        import hashlib

        blobs = {}
        refs = []
        for W in self.unitaries:
            raw = np.ascontiguousarray(W, dtype="<c16").view("<f8").tobytes()
            key = hashlib.sha256(raw).hexdigest()
            blobs[key] = raw
            refs.append(key)
        return {"n": self.n, "m": self.m, "t": self.t, "queries": list(self.queries), "unitaries": refs}, blobs

    @classmethod
    def from_json(cls, obj, blobs) -> "AdversaryProgram":
        if isinstance(obj, str):
            obj = json.loads(obj)
        dim = 1 << (obj["n"] + obj["m"])
        Ws = [np.frombuffer(blobs[r], dtype="<f8").view("<c16").reshape(dim, dim).copy()
              for r in obj["unitaries"]]
        if obj.get("t", len(obj["queries"])) != len(obj["queries"]):
            raise ValueError("t does not match the query list")
        return cls(obj["n"], obj["m"], tuple(obj["queries"]), Ws)


def _initial(program):
    psi = np.zeros(program.dim, dtype=complex)
    psi[0] = 1.0
    return program.unitaries[0] @ psi


# ---------------------------------------------------------------- oracles: explicit unitaries


def _query_matrix(U, q):
    if q == "fwd":
        return U
    if q == "inv":
        return U.conj().T
    if q == "conj":
        return U.conj()
    return U.T


def run_with_unitary(program: AdversaryProgram, U: np.ndarray) -> np.ndarray:
    """Final pure state when the oracle is the fixed unitary U (on A)."""
    psi = _initial(program)
    M = 1 << program.m
    for q, W in zip(program.queries, program.unitaries[1:]):
        Q = _query_matrix(U, q)
        psi = (Q @ psi.reshape(-1, M)).reshape(-1)
        psi = W @ psi
    return psi


def _mean_state(program, unitaries):
    rho = np.zeros((program.dim, program.dim), dtype=complex)
    count = 0
    for U in unitaries:
        psi = run_with_unitary(program, U)
        rho += np.outer(psi, psi.conj())
        count += 1
    return rho / count


# ---------------------------------------------------------------- path recording


def run_path_recording(program: AdversaryProgram) -> np.ndarray:
    if all(q == "fwd" for q in program.queries) or all(q == "conj" for q in program.queries):
        if program.n >= 5 and program.t >= 2:
            return path_sum_forward(program)
    s = RelationState.from_vector(_initial(program), program.n, program.m)
    for q, W in zip(program.queries, program.unitaries[1:]):
        s = ORACLE_MAP[q](s)
        s = s.apply_system_unitary(W)
    return s.reduced_state()


def run_path_recording_sparse(program: AdversaryProgram) -> RelationState:
    s = RelationState.from_vector(_initial(program), program.n, program.m)
    for q, W in zip(program.queries, program.unitaries[1:]):
        s = ORACLE_MAP[q](s).apply_system_unitary(W)
    return s


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _mobius(part):
    out = 1
    for blk in part:
        out *= (-1) ** (len(blk) - 1) * factorial(len(blk) - 1)
    return out


class _Labels:
    def __init__(self):
        self.parent = []

    def new(self):
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _chain(program, lab, conj: bool):
    """Operands for the ket (or bra) chain with open query wires.

    Returns (operands, x_labels, y_labels, out_labels) where query k consumes
    the A index x_k and emits y_k.
    """
    N = 1 << program.n
    M = 1 << program.m
    Ws = [W.reshape(N, M, N, M) for W in program.unitaries]
    if conj:
        Ws = [W.conj() for W in Ws]
    ops = []
    a, b = lab.new(), lab.new()
    ops.append((Ws[0][:, :, 0, 0], [a, b]))
    xs, ys = [], []
    for k in range(program.t):
        xs.append(a)
        y = lab.new()
        ys.append(y)
        a2, b2 = lab.new(), lab.new()
        ops.append((Ws[k + 1], [a2, b2, y, b]))
        a, b = a2, b2
    return ops, xs, ys, [a, b]


def _contract(ops, out, lab):
    args = []
    for arr, labels in ops:
        args += [arr, [lab.find(l) for l in labels]]
    outl = [lab.find(l) for l in out]
    return np.einsum(*args, outl, optimize=True)


def path_sum_forward(program: AdversaryProgram) -> np.ndarray:
    """Reduced state of the path-recording oracle for all-forward (or all-conjugate) programs.

    rho = c_t sum_{pi in S_t} sum_{P} mu(P) <ket network, bra network>, with the
    bra's k-th wires tied to the ket's pi(k)-th wires and the emitted indices
    merged inside each block of the set partition P (inclusion-exclusion for
    the all-distinct constraint). c_t = prod_k 1/(N - k + 1).
    """
    t = program.t
    N = 1 << program.n
    dim = program.dim
    c = 1.0
    for k in range(t):
        c /= N - k
    rho = np.zeros((dim, dim), dtype=complex)
    for pi in all_perms(t):
        for part in set_partitions(range(t)):
            lab = _Labels()
            kops, kx, ky, kout = _chain(program, lab, conj=False)
            bops, bx, by, bout = _chain(program, lab, conj=True)
            for k in range(t):
                lab.union(bx[k], kx[pi[k]])
                lab.union(by[k], ky[pi[k]])
            for blk in part:
                for j in blk[1:]:
                    lab.union(ky[blk[0]], ky[j])
            val = _contract(kops + bops, kout + bout, lab)
            rho += _mobius(part) * val.reshape(dim, dim)
    return c * rho


# ---------------------------------------------------------------- exact Haar


def exact_haar_weingarten(program: AdversaryProgram) -> np.ndarray:
    """E_U over Haar of the final state, by contracting the query network.

    Each query contributes a U or conj(U) factor to the ket and the conjugate
    factor to the bra; E[prod U prod conj(U)] = sum_{s,t} Wg_{s,t} prod delta(rows)
    prod delta(cols) is realized by merging index labels.
    """
    t = program.t
    N = 1 << program.n
    dim = program.dim
    if t == 0:
        psi = _initial(program)
        return np.outer(psi, psi.conj())
    tab = weingarten_matrix(t, N, allow_singular=True)
    rho = np.zeros((dim, dim), dtype=complex)
    for si, s in enumerate(tab.perms):
        for ti, tau in enumerate(tab.perms):
            w = tab.wg[si, ti]
            if w == 0:
                continue
            lab = _Labels()
            kops, kx, ky, kout = _chain(program, lab, conj=False)
            bops, bx, by, bout = _chain(program, lab, conj=True)
            u_fac, ubar_fac = [], []  # (row, col) labels
            for k, q in enumerate(program.queries):
                # ket factor, as (row, col) of U or conj(U)
                if q in ("fwd", "conj"):
                    rc_k, rc_b = (ky[k], kx[k]), (by[k], bx[k])
                else:
                    rc_k, rc_b = (kx[k], ky[k]), (bx[k], by[k])
                if q in ("fwd", "transp"):
                    u_fac.append(rc_k)
                    ubar_fac.append(rc_b)
                else:
                    ubar_fac.append(rc_k)
                    u_fac.append(rc_b)
            for i in range(t):
                lab.union(u_fac[i][0], ubar_fac[s[i]][0])
                lab.union(u_fac[i][1], ubar_fac[tau[i]][1])
            val = _contract(kops + bops, kout + bout, lab)
            rho += w * val.reshape(dim, dim)
    return rho


def exact_haar_reformulated(program: AdversaryProgram) -> np.ndarray:
    """Exact Haar state via the parallel-query form.

    Every query k gets a fresh maximally entangled pair (r_k, s_k). The oracle
    factor (U or conj(U)) is applied once to one member; the adversary then
    feeds its A register in by contracting A with the other member against
    the unnormalized EPR bra, and continues with the acted-on member as A.
    Averaging the pairs over U replaces them by the Choi matrix of the exact
    mixed twirl, so only that twirl is needed.
    """
    t = program.t
    n, m = program.n, program.m
    N, M = 1 << n, 1 << m
    if t == 0:
        psi = _initial(program)
        return np.outer(psi, psi.conj())
    if 4 * t * n > 16 or t > 3:
        raise ValueError("reformulated exact Haar limited to 4*t*n <= 16")
    # acted-on member per query: U-type first (p of them), conj-type after (q)
    u_type = [q in ("fwd", "transp") for q in program.queries]
    order = [k for k in range(t) if u_type[k]] + [k for k in range(t) if not u_type[k]]
    p = sum(u_type)
    q = t - p
    C = choi_mixed_twirl_exact(p, q, n)  # registers: ref_0..ref_{t-1}, act_0..act_{t-1}
    # For fwd/conj the acted member is the output s_k and A pairs with the reference;
    # for inv/transp the roles flip (X^T |psi> trick), so the reference becomes the output.
    C = C.reshape((N,) * (4 * t))
    # axis names: ket refs, ket acts, bra refs, bra acts  (in "order")
    names = []
    for side in ("k", "b"):
        names += [(side, "ref", order[i]) for i in range(t)]
        names += [(side, "act", order[i]) for i in range(t)]
    psi0 = _initial(program).reshape(N, M)
    # state tensor: ket A, ket B, bra A, bra B, plus resource axes
    state = np.einsum("ab,cd->abcd", psi0, psi0.conj())
    axes = [("k", "A"), ("k", "B"), ("b", "A"), ("b", "B")]
    state = np.multiply.outer(state, C)
    axes = axes + names
    for k, qk in enumerate(program.queries):
        feed, out = ("ref", "act") if qk in ("fwd", "conj") else ("act", "ref")
        for side in ("k", "b"):
            ia = axes.index((side, "A"))
            ifd = axes.index((side, feed, k))
            state = np.trace(state, axis1=ia, axis2=ifd)
            axes = [ax for j, ax in enumerate(axes) if j not in (ia, ifd)]
            io = axes.index((side, out, k))
            axes[io] = (side, "A")
        W = program.unitaries[k + 1].reshape(N, M, N, M)
        # apply W on ket (A, B) and conj(W) on bra (A, B)
        ka, kb = axes.index(("k", "A")), axes.index(("k", "B"))
        state = np.tensordot(W, state, axes=([2, 3], [ka, kb]))
        axes = [("k", "A"), ("k", "B")] + [ax for j, ax in enumerate(axes) if j not in (ka, kb)]
        ba, bb = axes.index(("b", "A")), axes.index(("b", "B"))
        state = np.tensordot(W.conj(), state, axes=([2, 3], [ba, bb]))
        axes = [("b", "A"), ("b", "B")] + [ax for j, ax in enumerate(axes) if j not in (ba, bb)]
    perm = [axes.index(a) for a in (("k", "A"), ("k", "B"), ("b", "A"), ("b", "B"))]
    state = state.transpose(perm)
    return state.reshape(N * M, N * M)


# ---------------------------------------------------------------- dispatcher


def run_adversary(program: AdversaryProgram, oracle: str = "path_recording", samples: int = 1000,
                  seed: int = 0, spec: EnsembleSpec | None = None, method: str = "auto") -> np.ndarray:
    """Reduced final state on A (x) B.

    ``exact_haar`` uses the parallel-query form when its dense Choi matrix is
    small (``4 t n <= 16``) and otherwise contracts the same network with the
    twirl expanded over permutation pairs (``method="weingarten"``).
    """
    if program.n + program.m > 10:
        raise ValueError("n + m must be at most 10")
    if oracle == "path_recording":
        if method == "sparse":
            return run_path_recording_sparse(program).reduced_state()
        if method == "path_sum":
            return path_sum_forward(program)
        return run_path_recording(program)
    if oracle == "exact_haar":
        if program.t > 3 or program.n + program.m > 10:
            raise ValueError("exact_haar limited to t <= 3 and n + m <= 10")
        if method == "reformulated" or (method == "auto" and 4 * program.t * program.n <= 16):
            return exact_haar_reformulated(program)
        return exact_haar_weingarten(program)
    if oracle == "haar_monte_carlo":
        N = 1 << program.n
        return _mean_state(program, (haar_sample(N, make_rng(seed, i)) for i in range(samples)))
    if oracle == "ensemble":
        if spec is None or spec.n != program.n:
            raise ValueError("ensemble oracle needs a spec on n qubits")
        return _mean_state(program, (spec.sample_unitary(make_rng(seed, i)) for i in range(samples)))
    raise ValueError(f"unknown oracle {oracle!r}")
