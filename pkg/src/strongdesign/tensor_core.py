"""Dense linear algebra on qubit registers.

States are 1-D complex arrays of length ``2**n``; operators are square complex
arrays. Qubit 0 is the most significant bit of a basis index, so the C-order
reshape ``(2,)*n`` puts qubit ``i`` on axis ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

STRUCT_TOL = 1e-10
SPECTRAL_TOL = 1e-9

PAULI_LETTERS = "IXYZ"
PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
PAULI_STACK = np.stack([PAULI[c] for c in PAULI_LETTERS])


class DimensionError(ValueError):
    pass


def num_qubits_of(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise DimensionError(f"dimension {dim} is not a power of 2")
    return n


def basis_state(n: int, index: int = 0) -> np.ndarray:
    psi = np.zeros(1 << n, dtype=complex)
    psi[index] = 1.0
    return psi


def normalize(psi: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise ValueError("cannot normalize the zero vector")
    return psi / nrm


def _check_targets(targets, n):
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise DimensionError(f"repeated target in {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise DimensionError(f"target {t} outside register of {n} qubits")
    return targets


def apply_gate(state: np.ndarray, gate: np.ndarray, targets, n: int | None = None) -> np.ndarray:
    """Apply ``gate`` to the listed qubits of ``state``.

    ``state`` may be a vector or a matrix whose columns are states (so
    ``apply_gate(U, G, t)`` left-multiplies ``U`` by the embedded gate).
    The first listed target is the most significant qubit of the gate.
    """
    state = np.asarray(state)
    if n is None:
        n = num_qubits_of(state.shape[0])
    targets = _check_targets(targets, n)
    t = len(targets)
    gate = np.asarray(gate)
    if gate.shape != (1 << t, 1 << t):
        raise DimensionError(f"gate of shape {gate.shape} does not act on {t} qubits")
    extra = state.shape[1:]
    psi = state.reshape((2,) * n + extra)
    psi = np.moveaxis(psi, targets, list(range(t)))
    shp = psi.shape
    out = (gate @ psi.reshape(1 << t, -1)).reshape(shp)
    out = np.moveaxis(out, list(range(t)), targets)
    return out.reshape(state.shape)


def embed(gate: np.ndarray, targets, n: int) -> np.ndarray:
    return apply_gate(np.eye(1 << n, dtype=complex), gate, targets, n)


def kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def partial_trace(op: np.ndarray, keep, total_qubits: int) -> np.ndarray:
    n = total_qubits
    op = np.asarray(op)
    if op.shape != (1 << n, 1 << n):
        raise DimensionError("operator does not match the register size")
    keep = sorted(_check_targets(keep, n))
    traced = [i for i in range(n) if i not in keep]
    t = op.reshape((2,) * (2 * n))
    rows = list(range(n))
    cols = [n + i for i in range(n)]
    for i in traced:
        cols[i] = rows[i]
    out_idx = [rows[i] for i in keep] + [cols[i] for i in keep]
    res = np.einsum(t, rows + cols, out_idx)
    d = 1 << len(keep)
    return res.reshape(d, d)


def partial_transpose(op: np.ndarray, subset, n: int | None = None) -> np.ndarray:
    op = np.asarray(op)
    if op.shape[0] != op.shape[1]:
        raise DimensionError("partial transpose needs a square operator")
    if n is None:
        n = num_qubits_of(op.shape[0])
    subset = _check_targets(subset, n)
    t = op.reshape((2,) * (2 * n))
    axes = list(range(2 * n))
    for i in subset:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    return t.transpose(axes).reshape(op.shape)


def register_transpose(op: np.ndarray, dims, subset) -> np.ndarray:
    """Partial transpose on whole registers of arbitrary local dimension."""
    k = len(dims)
    t = np.asarray(op).reshape(tuple(dims) * 2)
    axes = list(range(2 * k))
    for i in subset:
        axes[i], axes[k + i] = axes[k + i], axes[i]
    return t.transpose(axes).reshape(op.shape)


def epr_state(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one qubit per side")
    d = 1 << n
    psi = np.zeros(d * d, dtype=complex)
    psi[np.arange(d) * (d + 1)] = 1.0 / np.sqrt(d)
    return psi


def epr_projector(n: int) -> np.ndarray:
    psi = epr_state(n)
    return np.outer(psi, psi.conj())


def _hermitian_or_raise(a, tol=STRUCT_TOL):
    if a.shape[0] != a.shape[1]:
        raise DimensionError("expected a square operator")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > tol * max(1.0, np.max(np.abs(a))):
        raise ValueError(f"operator is not Hermitian (deviation {dev:.3g})")


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError("shape mismatch")
    diff = a - b
    _hermitian_or_raise(diff)
    diff = (diff + diff.conj().T) / 2
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def psd_check(a: np.ndarray, tol: float = SPECTRAL_TOL) -> tuple[bool, float]:
    a = np.asarray(a)
    _hermitian_or_raise(a, tol=max(tol, STRUCT_TOL))
    sym = a + a.conj().T
    sym *= 0.5
    lam = float(np.linalg.eigvalsh(sym)[0])
    return lam >= -tol, lam


def fidelity_pure(psi: np.ndarray, phi: np.ndarray) -> float:
    return float(abs(np.vdot(psi, phi)) ** 2)


@dataclass(frozen=True)
class PauliString:
    letters: str

    def __post_init__(self):
        if any(c not in PAULI_LETTERS for c in self.letters):
            raise ValueError(f"bad Pauli letters {self.letters!r}")

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    @property
    def index(self) -> int:
        idx = 0
        for c in self.letters:
            idx = 4 * idx + PAULI_LETTERS.index(c)
        return idx

    @classmethod
    def from_index(cls, index: int, n: int) -> "PauliString":
        chars = []
        for _ in range(n):
            chars.append(PAULI_LETTERS[index % 4])
            index //= 4
        return cls("".join(reversed(chars)))

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        s = ["I"] * n
        s[qubit] = letter
        return cls("".join(s))

    def matrix(self) -> np.ndarray:
        return kron_all(PAULI[c] for c in self.letters)

    def __str__(self):
        return self.letters


def pauli_weights(n: int) -> np.ndarray:
    """Weight of every Pauli string, indexed like :func:`pauli_coefficients`."""
    w = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        w = (w[:, None] + np.array([0, 1, 1, 1])[None, :]).ravel()
    return w


MAX_PAULI_QUBITS = 8


def pauli_coefficients(op: np.ndarray, n: int | None = None) -> np.ndarray:
    """Coefficients ``tr(P op)/2^n`` for all ``4^n`` Pauli strings.

    The flat index is base-4 in the letters ``IXYZ`` with qubit 0 leading.
    Runs in ``O(n 8^n)`` by contracting one qubit at a time.
    """
    op = np.asarray(op)
    if n is None:
        n = num_qubits_of(op.shape[0])
    if n > MAX_PAULI_QUBITS:
        raise DimensionError(f"dense Pauli expansion capped at {MAX_PAULI_QUBITS} qubits")
    t = op.reshape((2,) * (2 * n)).astype(complex)
    # T[p, r, c] = P_p[c, r] / 2  so that sum_{r,c} T[p,r,c] op[r,c] = tr(P op)/2
    kern = PAULI_STACK.transpose(0, 2, 1) / 2.0
    rows = list(range(n))
    cols = list(range(n, 2 * n))
    paulis = list(range(2 * n, 3 * n))
    operands = [t, rows + cols]
    for i in range(n):
        operands += [kern, [paulis[i], rows[i], cols[i]]]
    out = np.einsum(*operands, paulis, optimize=True)
    return out.reshape(-1)


def pauli_expand(op: np.ndarray, n: int | None = None, tol: float = 0.0) -> dict:
    coeffs = pauli_coefficients(op, n)
    n = num_qubits_of(np.asarray(op).shape[0]) if n is None else n
    return {
        PauliString.from_index(i, n): complex(c)
        for i, c in enumerate(coeffs)
        if abs(c) > tol
    }


def pauli_reconstruct(coeffs, n: int) -> np.ndarray:
    if isinstance(coeffs, dict):
        out = np.zeros((1 << n, 1 << n), dtype=complex)
        for p, c in coeffs.items():
            out += c * p.matrix()
        return out
    t = np.asarray(coeffs).reshape((4,) * n)
    rows = list(range(n))
    cols = list(range(n, 2 * n))
    paulis = list(range(2 * n, 3 * n))
    operands = [t, paulis]
    for i in range(n):
        operands += [PAULI_STACK, [paulis[i], rows[i], cols[i]]]
    out = np.einsum(*operands, rows + cols, optimize=True)
    return out.reshape(1 << n, 1 << n)


def all_pauli_strings(n: int):
    for letters in product(PAULI_LETTERS, repeat=n):
        yield PauliString("".join(letters))
