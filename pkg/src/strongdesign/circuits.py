"""Circuit IR and random-unitary ensembles.

A :class:`Circuit` is a list of layers; each layer holds gates with disjoint
targets. Gates are either dense unitaries on a few qubits or symbolic
basis-permutation / diagonal gates built from classical functions (the
Feistel shuffles and the ternary phase), which are applied by index
arithmetic and never materialized unless :func:`dense_matrix` is called.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor_core as tc
from .kwise import FunctionFamily, FunctionSample, sample_function, TERNARY
from .seeding import make_rng

OMEGA = np.exp(2j * np.pi / 3)
UNITARY_TOL = 1e-9
MAX_DENSE_QUBITS = 12

Sampler = Callable[[int, np.random.Generator], np.ndarray]


def haar_sample(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def haar_batch(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent Haar unitaries stacked along axis 0."""
    z = (rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def identity_sampler(dim: int, rng: np.random.Generator) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return u.shape[0] == u.shape[1] and np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol


# ---------------------------------------------------------------- symbolic gates

def _split(n: int):
    if n % 2:
        raise ValueError("shuffles need an even number of qubits")
    h = n // 2
    return h, (1 << h) - 1


def shuffle_left_perm(n: int, h1: FunctionSample) -> np.ndarray:
    """Index map ``x -> S_L x`` for |x_<, x_>> -> |x_< xor h1(x_>), x_>>."""
    h, mask = _split(n)
    if h1.family.domain_bits != h or h1.family.range != h:
        raise ValueError(f"h1 must map {h} bits to {h} bits")
    x = np.arange(1 << n)
    lo, hi = x & mask, x >> h
    return ((hi ^ h1.table()[lo]) << h) | lo


def shuffle_right_perm(n: int, h2: FunctionSample) -> np.ndarray:
    h, mask = _split(n)
    if h2.family.domain_bits != h or h2.family.range != h:
        raise ValueError(f"h2 must map {h} bits to {h} bits")
    x = np.arange(1 << n)
    lo, hi = x & mask, x >> h
    return (hi << h) | (lo ^ h2.table()[hi])


def ternary_phases(n: int, f: FunctionSample) -> np.ndarray:
    if f.family.range != TERNARY or f.family.domain_bits != n:
        raise ValueError(f"phase function must map {n} bits to {{0,1,2}}")
    return OMEGA ** f.table()


def _permute(state, perm):
    out = np.empty_like(state)
    out[perm] = state
    return out


def apply_shuffle_left(state: np.ndarray, h1: FunctionSample) -> np.ndarray:
    return _permute(np.asarray(state), shuffle_left_perm(tc.num_qubits_of(len(state)), h1))


def apply_shuffle_right(state: np.ndarray, h2: FunctionSample) -> np.ndarray:
    return _permute(np.asarray(state), shuffle_right_perm(tc.num_qubits_of(len(state)), h2))


def apply_ternary_phase(state: np.ndarray, f: FunctionSample) -> np.ndarray:
    state = np.asarray(state)
    ph = ternary_phases(tc.num_qubits_of(len(state)), f)
    return state * ph.reshape((-1,) + (1,) * (state.ndim - 1))


# ---------------------------------------------------------------- IR

@dataclass(frozen=True)
class Gate:
    kind: str  # dense | shuffle_left | shuffle_right | ternary_phase
    targets: tuple
    payload: object = field(repr=False)

    def __post_init__(self):
        if self.kind == "dense":
            t = len(self.targets)
            if np.asarray(self.payload).shape != (1 << t, 1 << t):
                raise ValueError("dense payload does not match the target count")
        elif self.kind not in ("shuffle_left", "shuffle_right", "ternary_phase"):
            raise ValueError(f"unknown gate kind {self.kind!r}")

    def apply(self, state: np.ndarray, n: int) -> np.ndarray:
        if self.kind == "dense":
            return tc.apply_gate(state, self.payload, self.targets, n)
        if tuple(self.targets) != tuple(range(n)):
            raise ValueError("symbolic gates act on the full register")
        if self.kind == "shuffle_left":
            return _permute(state, shuffle_left_perm(n, self.payload))
        if self.kind == "shuffle_right":
            return _permute(state, shuffle_right_perm(n, self.payload))
        return apply_ternary_phase(state, self.payload)


@dataclass
class Circuit:
    num_qubits: int
    layers: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for li, layer in enumerate(self.layers):
            seen = set()
            for g in layer:
                for q in g.targets:
                    if q in seen or not 0 <= q < self.num_qubits:
                        raise ValueError(f"layer {li}: overlapping or invalid target {q}")
                    seen.add(q)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def apply(self, state: np.ndarray) -> np.ndarray:
        out = np.asarray(state, dtype=complex)
        for layer in self.layers:
            for g in layer:
                out = g.apply(out, self.num_qubits)
        return out

    def to_json(self):
        """JSON skeleton plus a dict of binary blobs keyed by sha256."""
        blobs = {}
        layers = []
        for layer in self.layers:
            gates = []
            for g in layer:
                if g.kind == "dense":
                    a = np.ascontiguousarray(g.payload, dtype="<c16")
                    raw = a.view("<f8").tobytes()
                    key = hashlib.sha256(raw).hexdigest()
                    blobs[key] = raw
                    ref = key
                else:
                    ref = g.payload.to_json()
                gates.append({"kind": g.kind, "targets": list(g.targets), "payload": ref})
            layers.append({"gates": gates})
        return {"n": self.num_qubits, "layers": layers, "metadata": self.metadata}, blobs

    @classmethod
    def from_json(cls, obj, blobs) -> "Circuit":
        layers = []
        for layer in obj["layers"]:
            gates = []
            for g in layer["gates"]:
                t = tuple(g["targets"])
                if g["kind"] == "dense":
                    arr = np.frombuffer(blobs[g["payload"]], dtype="<f8").view("<c16")
                    payload = arr.reshape(1 << len(t), 1 << len(t)).copy()
                else:
                    payload = FunctionSample.from_json(g["payload"])
                gates.append(Gate(g["kind"], t, payload))
            layers.append(gates)
        return cls(obj["n"], layers, dict(obj.get("metadata", {})))


def dense_matrix(circuit: Circuit) -> np.ndarray:
    n = circuit.num_qubits
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense matrices capped at {MAX_DENSE_QUBITS} qubits")
    return circuit.apply(np.eye(1 << n, dtype=complex))


def light_cone(circuit: Circuit, qubit: int) -> set:
    if not 0 <= qubit < circuit.num_qubits:
        raise ValueError("qubit out of range")
    cone = {qubit}
    for layer in circuit.layers:
        grown = set(cone)
        for g in layer:
            if cone.intersection(g.targets):
                grown.update(g.targets)
        cone = grown
    return cone


# ---------------------------------------------------------------- constructions

def _full(n):
    return tuple(range(n))


def build_lrfc(n, f, h1, h2, C, D, phase_first: bool = True) -> Circuit:
    """Five-layer LRFC circuit, C acting first.

    With ``phase_first`` (default) the layers give U = D S_R S_L F C, whose
    matrix is sum_x w^f(x) D|L(x) || R(L(x))><x| C. Otherwise U = D S_R F S_L C.
    For uniformly random f both orders define the same ensemble.
    """
    for name, u in (("C", C), ("D", D)):
        if not is_unitary(u) or np.asarray(u).shape[0] != 1 << n:
            raise ValueError(f"{name} must be a unitary on {n} qubits")
    _split(n)
    full = _full(n)
    middle = [
        [Gate("ternary_phase", full, f)],
        [Gate("shuffle_left", full, h1)],
    ]
    if not phase_first:
        middle.reverse()
    layers = (
        [[Gate("dense", full, np.asarray(C, dtype=complex))]]
        + middle
        + [[Gate("shuffle_right", full, h2)], [Gate("dense", full, np.asarray(D, dtype=complex))]]
    )
    return Circuit(n, layers, {"ensemble": "lrfc", "phase_first": phase_first})


def lrfc_function_families(n, backend="table", k=1):
    h = n // 2
    if backend == "table":
        bits = FunctionFamily(h, h, "table")
    else:
        bits = FunctionFamily(h, h, "poly", k)
    return FunctionFamily(n, TERNARY, "table"), bits


def sample_lrfc(n, rng, backend="table", k=1, outer: Sampler = haar_sample) -> Circuit:
    ffam, hfam = lrfc_function_families(n, backend, k)
    C = outer(1 << n, rng)
    f = sample_function(ffam, rng)
    h1 = sample_function(hfam, rng)
    h2 = sample_function(hfam, rng)
    D = outer(1 << n, rng)
    return build_lrfc(n, f, h1, h2, C, D)


def _patch(p, xi):
    return tuple(range(p * xi, (p + 1) * xi))


def two_layer_bricks(m: int, periodic: bool = False):
    first = [(i, i + 1) for i in range(0, m - 1, 2)]
    second = [(i, i + 1) for i in range(1, m - 1, 2)]
    if periodic and m > 2 and m % 2 == 0:
        second.append((m - 1, 0))
    return first, second


def build_two_layer(n, xi, inner_sampler: Sampler, outer_sampler: Sampler, rng,
                    periodic: bool = False) -> Circuit:
    """Outer 2-design, two brick layers of 2*xi-qubit unitaries, outer 2-design."""
    if xi < 1 or n % xi or n // xi < 2:
        raise ValueError("need xi | n and at least two patches")
    m = n // xi
    full = _full(n)
    first, second = two_layer_bricks(m, periodic)
    layers = [[Gate("dense", full, outer_sampler(1 << n, rng))]]
    for bricks in (first, second):
        layer = [
            Gate("dense", _patch(a, xi) + _patch(b, xi), inner_sampler(1 << (2 * xi), rng))
            for a, b in bricks
        ]
        if layer:
            layers.append(layer)
    layers.append([Gate("dense", full, outer_sampler(1 << n, rng))])
    meta = {"ensemble": "two_layer", "xi": xi, "periodic": periodic}
    return Circuit(n, layers, meta)


def blocked_pairs(m: int, d: int):
    s = 1 << (d - 1)
    return [(i, i + s) for i in range(m) if not i & s]


def build_blocked_scrambler(n, xi, block_sampler: Sampler, rng) -> Circuit:
    if xi < 1 or n % xi:
        raise ValueError("xi must divide n")
    m = n // xi
    if m < 2 or m & (m - 1):
        raise ValueError("patch count must be a power of 2 (>= 2)")
    depth = m.bit_length() - 1
    layers = []
    for d in range(1, depth + 1):
        layers.append([
            Gate("dense", _patch(a, xi) + _patch(b, xi), block_sampler(1 << (2 * xi), rng))
            for a, b in blocked_pairs(m, d)
        ])
    return Circuit(n, layers, {"ensemble": "blocked_scrambler", "xi": xi})


def build_brickwork_1d(n, depth, rng, gate_sampler: Sampler = haar_sample) -> Circuit:
    if depth < 1:
        raise ValueError("depth must be at least 1")
    layers = []
    for j in range(depth):
        start = j % 2
        layer = [Gate("dense", (i, i + 1), gate_sampler(4, rng)) for i in range(start, n - 1, 2)]
        layers.append(layer)
    return Circuit(n, layers, {"ensemble": "brickwork", "depth": depth})


# ---------------------------------------------------------------- ensemble specs

ENSEMBLE_KINDS = ("haar", "identity", "lrfc", "two_layer", "blocked_scrambler", "brickwork")


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    n: int
    params: tuple = ()  # sorted (key, value) pairs, kept hashable

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"unknown ensemble {self.kind!r}")
        p = self.param_dict
        if self.kind in ("two_layer", "blocked_scrambler"):
            xi = p.get("xi")
            if xi is None or self.n % xi or self.n // xi < 2:
                raise ValueError("xi must divide n with at least two patches")
        if self.kind == "brickwork" and p.get("depth", 0) < 1:
            raise ValueError("brickwork needs depth >= 1")

    @classmethod
    def make(cls, kind, n, **params):
        return cls(kind, int(n), tuple(sorted(params.items())))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def to_json(self) -> dict:
        return {"kind": self.kind, "n": self.n, **self.param_dict}

    @classmethod
    def from_json(cls, obj) -> "EnsembleSpec":
        obj = dict(obj)
        return cls.make(obj.pop("kind"), obj.pop("n"), **obj)

    def sample_circuit(self, rng: np.random.Generator) -> Circuit:
        p = self.param_dict
        n = self.n
        if self.kind == "haar":
            c = Circuit(n, [[Gate("dense", _full(n), haar_sample(1 << n, rng))]])
        elif self.kind == "identity":
            c = Circuit(n, [])
        elif self.kind == "lrfc":
            c = sample_lrfc(n, rng, p.get("backend", "table"), p.get("k", 1))
        elif self.kind == "two_layer":
            c = build_two_layer(n, p["xi"], haar_sample, haar_sample, rng, p.get("periodic", False))
        elif self.kind == "blocked_scrambler":
            c = build_blocked_scrambler(n, p["xi"], haar_sample, rng)
        else:
            c = build_brickwork_1d(n, p["depth"], rng)
        c.metadata.update({"spec": self.to_json()})
        return c

    def sample_unitary(self, rng: np.random.Generator) -> np.ndarray:
        return dense_matrix(self.sample_circuit(rng))


def sample_unitaries(spec: EnsembleSpec, samples: int, seed: int):
    """Yield ``samples`` dense unitaries; sample i uses the stream (seed, i)."""
    for i in range(samples):
        yield spec.sample_unitary(make_rng(seed, i))
