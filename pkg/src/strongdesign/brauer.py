"""Walled Brauer diagrams, EPR projectors and sector isometries.

A diagram on ``K = p + q`` strands is a perfect matching of the ``2K`` nodes
``in_0..in_{K-1}`` (numbered ``0..K-1``) and ``out_0..out_{K-1}`` (numbered
``K..2K-1``). Strands ``0..p-1`` are the left (``U``) copies, the rest are the
right (``U*``) copies. The matrix of a diagram has entry 1 when the
indices at the two ends of every edge agree and 0 otherwise; a permutation
``pi`` is the diagram with edges ``(in_i, out_pi(i))``. Products glue the
outputs of the right factor to the inputs of the left one, and every closed
loop contributes a factor ``D``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations
from math import comb, factorial

import numpy as np
from scipy import linalg as sla

from .weingarten import all_perms, block_perms, weingarten_matrix

RANK_CUTOFF = 1e-8
SQRT_CLAMP = 1e-10

# ---------------------------------------------------------------- diagrams


def perm_diagram(perm) -> tuple:
    K = len(perm)
    m = [0] * (2 * K)
    for i, j in enumerate(perm):
        m[i] = K + j
        m[K + j] = i
    return tuple(m)


def identity_diagram(K: int) -> tuple:
    return perm_diagram(tuple(range(K)))


def _swap_io(node, K, strands):
    s = node % K
    if s in strands:
        return node + K if node < K else node - K
    return node


def relabel(diag, f) -> tuple:
    m = [0] * len(diag)
    for a, b in enumerate(diag):
        m[f(a)] = f(b)
    return tuple(m)


def partial_transpose_diagram(diag, strands) -> tuple:
    K = len(diag) // 2
    strands = set(strands)
    return relabel(diag, lambda v: _swap_io(v, K, strands))


def adjoint(diag) -> tuple:
    K = len(diag) // 2
    return relabel(diag, lambda v: v + K if v < K else v - K)


def compose(a, b) -> tuple[tuple, int]:
    """Return (diagram, loops) with ``A B = D^loops * diagram``."""
    K = len(a) // 2
    # global nodes: b inputs 0..K-1, glued layer K..2K-1, a outputs 2K..3K-1
    adj = [[] for _ in range(3 * K)]
    eid = 0
    for diag, shift in ((b, 0), (a, K)):
        for u, v in enumerate(diag):
            if u < v:
                adj[u + shift].append((v + shift, eid))
                adj[v + shift].append((u + shift, eid))
                eid += 1

    def walk(start):
        seen_nodes = [start]
        cur, used = start, None
        while True:
            for nxt, e in adj[cur]:
                if e != used:
                    break
            cur, used = nxt, e
            if cur == start or cur < K or cur >= 2 * K:
                return cur, seen_nodes
            seen_nodes.append(cur)

    res = [0] * (2 * K)
    visited = set()
    for s in list(range(K)) + list(range(2 * K, 3 * K)):
        if s in visited:
            continue
        end, path = walk(s)
        visited.update(path)
        visited.add(end)
        ia = s if s < K else s - K
        ib = end if end < K else end - K
        res[ia], res[ib] = ib, ia
    loops = 0
    for m in range(K, 2 * K):
        if m not in visited:
            _, path = walk(m)
            visited.update(path)
            loops += 1
    return tuple(res), loops


def trace_loops(diag) -> int:
    """Number of loops when every out_i is closed onto in_i."""
    K = len(diag) // 2
    seen = set()
    loops = 0
    for s in range(K):
        if s in seen:
            continue
        loops += 1
        cur = s
        while True:
            seen.add(cur)
            other = diag[cur]
            seen.add(other)
            # jump across the closing wire
            cur = other - K if other >= K else other + K
            if cur in seen:
                break
    return loops


def diagram_matrix(diag, D: int) -> np.ndarray:
    K = len(diag) // 2
    eye = np.eye(D)
    operands = []
    for u, v in enumerate(diag):
        if u < v:
            operands += [eye, [u, v]]
    out = list(range(K, 2 * K)) + list(range(K))
    t = np.einsum(*operands, out)
    return t.reshape(D**K, D**K)


def ptp_diagrams(p: int, q: int) -> list[tuple]:
    """The (p+q)! partially transposed permutations, in the order of S_{p+q}."""
    K = p + q
    return [partial_transpose_diagram(perm_diagram(s), range(p, K)) for s in all_perms(K)]


# ---------------------------------------------------------------- labels


@dataclass(frozen=True)
class PairingSet:
    p: int
    q: int
    pairs: tuple  # sorted (left, right) with 0-based indices

    def __post_init__(self):
        ls = [a for a, _ in self.pairs]
        rs = [b for _, b in self.pairs]
        if len(set(ls)) != len(ls) or len(set(rs)) != len(rs):
            raise ValueError("pairs must use distinct left and right indices")
        if any(not 0 <= a < self.p for a in ls) or any(not 0 <= b < self.q for b in rs):
            raise ValueError("pair index out of range")
        if tuple(sorted(self.pairs)) != tuple(self.pairs):
            object.__setattr__(self, "pairs", tuple(sorted(self.pairs)))

    @property
    def size(self) -> int:
        return len(self.pairs)

    def lefts(self):
        return [a for a, _ in self.pairs]

    def rights(self):
        return [b for _, b in self.pairs]

    def free_left(self):
        return [i for i in range(self.p) if i not in self.lefts()]

    def free_right(self):
        return [j for j in range(self.q) if j not in self.rights()]

    def issubset(self, other: "PairingSet") -> bool:
        return set(self.pairs) <= set(other.pairs)


def pairings(p: int, q: int, size: int, ordering: str = "lex") -> list[PairingSet]:
    out = []
    for ls in combinations(range(p), size):
        for rs in permutations(range(q), size):
            out.append(PairingSet(p, q, tuple(sorted(zip(ls, rs)))))
    out = sorted(set(out), key=lambda a: a.pairs)
    if ordering == "revlex":
        out.reverse()
    elif ordering != "lex":
        raise ValueError(f"unknown ordering {ordering!r}")
    return out


def all_pairings(p: int, q: int, ordering: str = "lex") -> list[PairingSet]:
    """Size first, then the chosen within-size order."""
    out = []
    for s in range(min(p, q) + 1):
        out += pairings(p, q, s, ordering)
    return out


@dataclass(frozen=True)
class PtpLabel:
    p: int
    q: int
    alpha_in: PairingSet
    alpha_out: PairingSet
    perm_left: tuple
    perm_right: tuple

    def __post_init__(self):
        if self.alpha_in.size != self.alpha_out.size:
            raise ValueError("input and output pairings must have equal size")

    @property
    def size(self) -> int:
        return self.alpha_in.size

    @classmethod
    def from_diagram(cls, diag, p: int, q: int) -> "PtpLabel":
        K = p + q
        ins, outs = [], []
        left_through = {}
        right_through = {}
        for u, v in enumerate(diag):
            if u > v:
                continue
            if u < K and v < K:
                ins.append((u, v - p))
            elif u >= K and v >= K:
                outs.append((u - K, v - 2 * K + K - p))
            elif u < K <= v:
                # through strand in_u -> out_{v-K}
                i, o = u, v - K
                if i < p and o < p:
                    left_through[i] = o
                elif i >= p and o >= p:
                    right_through[i] = o
                else:
                    raise ValueError("not a walled Brauer diagram")
        a_in = PairingSet(p, q, tuple(sorted(ins)))
        a_out = PairingSet(p, q, tuple(sorted((a, b) for a, b in outs)))
        fin_l = a_in.free_left()
        fout_l = a_out.free_left()
        perm_left = tuple(fout_l.index(left_through[i]) for i in fin_l)
        fin_r = [p + j for j in a_in.free_right()]
        fout_r = [p + j for j in a_out.free_right()]
        perm_right = tuple(fout_r.index(right_through[i]) for i in fin_r)
        return cls(p, q, a_in, a_out, perm_left, perm_right)

    def to_diagram(self) -> tuple:
        p, q = self.p, self.q
        K = p + q
        m = [None] * (2 * K)

        def link(u, v):
            m[u] = v
            m[v] = u

        for a, b in self.alpha_in.pairs:
            link(a, p + b)
        for a, b in self.alpha_out.pairs:
            link(K + a, K + p + b)
        fin_l, fout_l = self.alpha_in.free_left(), self.alpha_out.free_left()
        for i, pi in zip(fin_l, self.perm_left):
            link(i, K + fout_l[pi])
        fin_r = [p + j for j in self.alpha_in.free_right()]
        fout_r = [p + j for j in self.alpha_out.free_right()]
        for i, pi in zip(fin_r, self.perm_right):
            link(i, K + fout_r[pi])
        return tuple(m)


def ptp_matrix(label, D: int, p: int | None = None, q: int | None = None) -> np.ndarray:
    diag = label.to_diagram() if isinstance(label, PtpLabel) else tuple(label)
    K = len(diag) // 2
    if D**K > 1 << 12:
        raise ValueError("dense PTP matrices capped at D^(p+q) <= 4096")
    return diagram_matrix(diag, D)


# ---------------------------------------------------------------- algebra


class BrauerAlgebra:
    """Span of the PTPs for fixed (p, q, D), with elements as coefficient vectors.

    Products use diagram composition (structure constants D^loops). Norms use
    the left-regular representation with the trace form, which is faithful for
    D >= p + q, so no D^{p+q}-sized matrix is ever built.
    """

    def __init__(self, p: int, q: int, D: int):
        self.p, self.q, self.D = p, q, D
        self.K = p + q
        self.diagrams = ptp_diagrams(p, q)
        self.index = {d: i for i, d in enumerate(self.diagrams)}
        self.dim = len(self.diagrams)
        n = self.dim
        self._prod = np.empty((n, n), dtype=np.int64)
        self._loops = np.empty((n, n), dtype=np.int64)
        for i, a in enumerate(self.diagrams):
            for j, b in enumerate(self.diagrams):
                c, loops = compose(a, b)
                self._prod[i, j] = self.index[c]
                self._loops[i, j] = loops
        self.gram = np.empty((n, n))
        for i, a in enumerate(self.diagrams):
            ad = adjoint(a)
            for j, b in enumerate(self.diagrams):
                c, loops = compose(ad, b)
                self.gram[i, j] = float(D) ** (loops + trace_loops(c))
        self._weights = float(D) ** self._loops

    def basis(self, diag) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.index[tuple(diag)]] = 1.0
        return v

    def mul(self, x, y) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.result_type(x, y))
        w = np.outer(x, y) * self._weights
        np.add.at(out, self._prod.ravel(), w.ravel())
        return out

    def left_regular(self, x) -> np.ndarray:
        """Matrix L with mul(x, y) = L @ y."""
        L = np.zeros((self.dim, self.dim), dtype=np.asarray(x).dtype)
        for j in range(self.dim):
            np.add.at(L[:, j], self._prod[:, j], x * self._weights[:, j])
        return L

    def norm(self, x) -> float:
        """Operator norm of the element in the D^{p+q}-dimensional representation."""
        L = self.left_regular(x)
        A = L.conj().T @ self.gram @ L
        A = (A + A.conj().T) / 2
        lam = sla.eigh(A, self.gram, eigvals_only=True)
        return float(np.sqrt(max(lam[-1], 0.0)))

    def to_matrix(self, x) -> np.ndarray:
        out = None
        for c, d in zip(x, self.diagrams):
            if c != 0:
                m = c * diagram_matrix(d, self.D)
                out = m if out is None else out + m
        if out is None:
            return np.zeros((self.D**self.K,) * 2)
        return out

    def coefficients(self, op: np.ndarray) -> np.ndarray:
        """Expand a dense operator from the commutant in the PTP basis."""
        b = np.array([np.vdot(diagram_matrix(d, self.D), op) for d in self.diagrams])
        return np.linalg.solve(self.gram, b)


@lru_cache(maxsize=None)
def algebra(p: int, q: int, D: int) -> BrauerAlgebra:
    return BrauerAlgebra(p, q, D)


# ---------------------------------------------------------------- projectors


def bare_diagram(alpha: PairingSet) -> tuple:
    p, q = alpha.p, alpha.q
    K = p + q
    m = list(identity_diagram(K))
    for a, b in alpha.pairs:
        m[a], m[p + b] = p + b, a
        m[K + a], m[K + p + b] = K + p + b, K + a
    return tuple(m)


def bare_projector_element(alpha: PairingSet, D: int) -> np.ndarray:
    A = algebra(alpha.p, alpha.q, D)
    return A.basis(bare_diagram(alpha)) / float(D) ** alpha.size


def bare_projector(alpha: PairingSet, D: int, p: int | None = None, q: int | None = None) -> np.ndarray:
    return diagram_matrix(bare_diagram(alpha), D) / float(D) ** alpha.size


def _embed_diagram(sub, strands, K):
    """Place a diagram on the listed strands; identity elsewhere."""
    k = len(strands)
    m = list(identity_diagram(K))
    for u, v in enumerate(sub):
        gu = strands[u] if u < k else K + strands[u - k]
        gv = strands[v] if v < k else K + strands[v - k]
        m[gu] = gv
    return tuple(m)


@lru_cache(maxsize=None)
def no_epr_coefficients(p: int, q: int, D: int) -> dict:
    """PTP expansion {diagram: coeff} of the no-EPR projector.

    Its overlaps with the block permutations are x = (Wg|_block)^{-1} e_id,
    and the twirl formula then gives the coefficient on the PTP of pi' as
    sum_{pi in block} x_pi Wg_{pi, pi'}.
    """
    K = p + q
    if min(p, q) == 0:
        return {identity_diagram(K): 1.0}
    tab = weingarten_matrix(K, D)
    pos = {s: i for i, s in enumerate(tab.perms)}
    rows = [pos[s] for s in block_perms(p, q)]
    sub = tab.wg[np.ix_(rows, rows)]
    e = np.zeros(len(rows))
    e[rows.index(pos[tuple(range(K))])] = 1.0
    x = np.linalg.solve(sub, e)
    coeffs = x @ tab.wg[rows, :]
    diags = ptp_diagrams(p, q)
    return {d: float(c) for d, c in zip(diags, coeffs)}


def _span_projector(op, cutoff=RANK_CUTOFF):
    op = (op + op.conj().T) / 2
    w, v = np.linalg.eigh(op)
    keep = w > cutoff
    return v[:, keep] @ v[:, keep].conj().T


def no_epr_projector(p: int, q: int, D: int, method: str = "nullspace") -> np.ndarray:
    K = p + q
    if method == "nullspace":
        dim = D**K
        if min(p, q) == 0:
            return np.eye(dim)
        S = np.zeros((dim, dim))
        for s in range(1, min(p, q) + 1):
            for a in pairings(p, q, s):
                S += bare_projector(a, D)
        return np.eye(dim) - _span_projector(S)
    if method == "weingarten":
        coeffs = no_epr_coefficients(p, q, D)
        cond = np.linalg.cond(weingarten_matrix(K, D).wg) if K > 1 else 1.0
        if cond > 1e10:
            raise np.linalg.LinAlgError("Weingarten submatrix ill-conditioned")
        return sum(c * diagram_matrix(d, D) for d, c in coeffs.items())
    raise ValueError(f"unknown method {method!r}")


def near_orthogonal_element(alpha: PairingSet, D: int) -> np.ndarray:
    """P^nE_alpha = P_alpha times the no-EPR projector on the unpaired strands."""
    p, q = alpha.p, alpha.q
    K = p + q
    fl, fr = alpha.free_left(), alpha.free_right()
    strands = fl + [p + j for j in fr]
    sub = no_epr_coefficients(len(fl), len(fr), D)
    A = algebra(p, q, D)
    pa = bare_diagram(alpha)
    out = np.zeros(A.dim)
    for d, c in sub.items():
        e = _embed_diagram(d, strands, K)
        prod, loops = compose(pa, e)
        out[A.index[prod]] += c * float(D) ** loops
    return out / float(D) ** alpha.size


def near_orthogonal_projector(alpha: PairingSet, D: int) -> np.ndarray:
    return algebra(alpha.p, alpha.q, D).to_matrix(near_orthogonal_element(alpha, D))


@dataclass
class OrthogonalProjectors:
    p: int
    q: int
    D: int
    ordering: str
    alphas: list
    by_alpha: dict  # pairs -> dense projector
    by_size: dict  # size -> dense projector

    def rank(self, alpha: PairingSet) -> int:
        return int(round(np.trace(self.by_alpha[alpha.pairs]).real))


def orthogonal_projectors(p: int, q: int, D: int, ordering: str = "lex") -> OrthogonalProjectors:
    """Gram-Schmidt over the nearly-orthogonal projectors, in the given order."""
    if p + q > 4 or D > 5:
        raise ValueError("dense projectors limited to p+q <= 4 and D <= 5")
    alphas = all_pairings(p, q, ordering)
    dim = D ** (p + q)
    acc = np.zeros((dim, dim))
    prev = np.zeros((dim, dim))
    by_alpha = {}
    by_size = {}
    for a in alphas:
        acc = acc + near_orthogonal_projector(a, D)
        cur = _span_projector(acc)
        P = cur - prev
        by_alpha[a.pairs] = (P + P.T) / 2
        by_size[a.size] = by_size.get(a.size, 0) + by_alpha[a.pairs]
        prev = cur
    return OrthogonalProjectors(p, q, D, ordering, alphas, by_alpha, by_size)


def n_epr(p: int, q: int, D: int) -> int:
    """Dimension of the span of all EPR-carrying subspaces, by numerical rank."""
    Pi = no_epr_projector(p, q, D)
    return D ** (p + q) - int(round(np.trace(Pi).real))


# ---------------------------------------------------------------- isometries


def epr_contraction(alpha: PairingSet, D: int) -> np.ndarray:
    """I_alpha = <E_alpha| (x) 1: D^{p+q} -> D^{p+q-2l}, free left strands then free right."""
    p, q = alpha.p, alpha.q
    K = p + q
    free = alpha.free_left() + [p + j for j in alpha.free_right()]
    eye = np.eye(D)
    operands = []
    # input strand s carries label s; output slot r carries K + r
    for a, b in alpha.pairs:
        operands += [eye / np.sqrt(D), [a, p + b]]
    for r, s in enumerate(free):
        operands += [eye, [K + r, s]]
    out = [K + r for r in range(len(free))] + list(range(K))
    t = np.einsum(*operands, out)
    return t.reshape(D ** len(free), D**K)


@dataclass
class SectorIsometry:
    ell: int
    p: int
    q: int
    D: int
    alphas: list
    matrix: np.ndarray  # rows: (free-strand index) * a_size + alpha index

    @property
    def a_size(self) -> int:
        return len(self.alphas)

    @property
    def out_copies(self) -> tuple:
        return (self.p - self.ell, self.q - self.ell)


def sector_isometry_alpha(alpha: PairingSet, proj: OrthogonalProjectors, route: str = "sqrt"):
    """The partial isometry for one pairing.

    ``route="sqrt"`` builds I_alpha M_alpha Ptilde_alpha, with M_alpha the square
    root of the part of Ptilde_alpha carrying input and output pairing alpha,
    sandwiched by the no-EPR projector on the free strands.
    ``route="polar"`` takes the polar isometry of I_alpha Ptilde_alpha; the two
    agree up to an equivariant unitary on the output.
    """
    p, q, D = alpha.p, alpha.q, proj.D
    K = p + q
    Pt = proj.by_alpha[alpha.pairs]
    Ia = epr_contraction(alpha, D)
    if route == "polar":
        B = Ia @ Pt
        u, s, vh = np.linalg.svd(B, full_matrices=False)
        keep = s > RANK_CUTOFF
        return u[:, keep] @ vh[keep]
    if route != "sqrt":
        raise ValueError(f"unknown route {route!r}")
    A = algebra(p, q, D)
    c = A.coefficients(Pt)
    fl, fr = alpha.free_left(), alpha.free_right()
    strands = fl + [p + j for j in fr]
    pi_sub = sum(cc * diagram_matrix(_embed_diagram(d, strands, K), D)
                 for d, cc in no_epr_coefficients(len(fl), len(fr), D).items())
    mid = np.zeros((D**K, D**K))
    for d, cc in zip(A.diagrams, c):
        lab = PtpLabel.from_diagram(d, p, q)
        if lab.alpha_in.pairs == alpha.pairs and lab.alpha_out.pairs == alpha.pairs:
            mid += cc * diagram_matrix(d, D)
    M2 = pi_sub @ mid @ pi_sub
    M2 = (M2 + M2.T) / 2
    w, v = np.linalg.eigh(M2)
    if w.min() < -1e-6 * max(1.0, w.max()):
        raise np.linalg.LinAlgError(f"M_alpha^2 not PSD (min eig {w.min():.3g})")
    w = np.where(w > SQRT_CLAMP, w, 0.0)
    M = (v * np.sqrt(w)) @ v.T
    return Ia @ M @ Pt


def sector_isometries(p: int, q: int, D: int, route: str = "sqrt",
                      proj: OrthogonalProjectors | None = None) -> list[SectorIsometry]:
    proj = orthogonal_projectors(p, q, D) if proj is None else proj
    out = []
    for ell in range(min(p, q) + 1):
        alphas = pairings(p, q, ell)
        a = len(alphas)
        if a != comb(p, ell) * comb(q, ell) * factorial(ell):
            raise AssertionError("pairing count mismatch")
        blocks = [sector_isometry_alpha(al, proj, route) for al in alphas]
        rows = blocks[0].shape[0]
        M = np.zeros((rows * a, D ** (p + q)))
        for i, B in enumerate(blocks):
            M[i::a] = B.real if np.isrealobj(B) or np.abs(B.imag).max() < 1e-12 else B
        out.append(SectorIsometry(ell, p, q, D, alphas, M))
    return out


# ---------------------------------------------------------------- approximate orthogonality


def _nE_elements(p, q, D, size):
    return [(a, near_orthogonal_element(a, D)) for a in pairings(p, q, size)]


def orthogonality_matrices(p: int, q: int, D: int, ell: int):
    """The matrices G^(l) and F^(l,l') (l' = 1..l), entries are operator norms."""
    A = algebra(p, q, D)
    elems = _nE_elements(p, q, D, ell)
    n = len(elems)
    G = np.zeros((n, n))
    for i, (a, x) in enumerate(elems):
        for j, (b, y) in enumerate(elems):
            if i != j:
                G[i, j] = A.norm(A.mul(x, y))
    F = {}
    for lp in range(1, ell + 1):
        gammas = [(g, bare_projector_element(g, D)) for g in pairings(p, q, lp)]
        Fm = np.zeros((n, n))
        for i, (a, x) in enumerate(elems):
            for j, (b, y) in enumerate(elems):
                tot = 0.0
                for g, pg in gammas:
                    if i == j and g.issubset(a):
                        continue
                    tot += A.norm(A.mul(A.mul(x, pg), y))
                Fm[i, j] = tot / comb(ell, lp)
        F[lp] = Fm
    return G, F


def orthogonality_bounds(p: int, q: int, D: int, ell: int, ellp: int | None = None) -> float:
    if ellp is None:
        return float(np.expm1(ell * (p + q) / D))
    return float(np.expm1((ell + ellp) * (p + q) / D))
