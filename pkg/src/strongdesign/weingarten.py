"""Haar moments through Weingarten calculus.

Permutations are tuples ``images`` with ``images[i] = pi(i)`` (0-based). The
operator of ``pi`` on ``k`` registers of dimension ``d`` sends register ``i``
to slot ``pi(i)``::

    P_pi |x_0, ..., x_{k-1}>  =  |y>,   y_{pi(i)} = x_i

and is stored as an index array ``idx`` with ``P_pi[idx[x], x] = 1`` instead
of a dense ``d^k x d^k`` matrix.

Vectorization is row-major (numpy ``ravel``), for which
``(A kron conj(B)) vec(X) = vec(A X B^dagger)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from . import tensor_core as tc
from .circuits import haar_batch

# ---------------------------------------------------------------- permutations


def all_perms(k: int) -> list[tuple]:
    """S_k in lexicographic order; the identity comes first."""
    return list(permutations(range(k)))


def compose(a, b) -> tuple:
    """(a*b)(i) = a(b(i))."""
    return tuple(a[b[i]] for i in range(len(b)))


def inverse(a) -> tuple:
    inv = [0] * len(a)
    for i, ai in enumerate(a):
        inv[ai] = i
    return tuple(inv)


def cycle_count(images) -> int:
    images = tuple(images)
    if sorted(images) != list(range(len(images))):
        raise ValueError(f"{images} is not a permutation")
    seen = [False] * len(images)
    cycles = 0
    for s in range(len(images)):
        if not seen[s]:
            cycles += 1
            j = s
            while not seen[j]:
                seen[j] = True
                j = images[j]
    return cycles


@lru_cache(maxsize=None)
def perm_index(perm: tuple, d: int) -> np.ndarray:
    k = len(perm)
    if k == 0:
        idx = np.zeros(1, dtype=np.intp)
        idx.setflags(write=False)
        return idx
    digits = np.unravel_index(np.arange(d**k), (d,) * k)
    pinv = inverse(perm)
    ydig = [digits[pinv[j]] for j in range(k)]
    idx = np.ravel_multi_index(ydig, (d,) * k)
    idx.setflags(write=False)
    return idx


def perm_matrix(perm, d: int) -> np.ndarray:
    idx = perm_index(tuple(perm), d)
    m = np.zeros((len(idx), len(idx)))
    m[idx, np.arange(len(idx))] = 1.0
    return m


def perm_overlap(perm, X: np.ndarray, d: int) -> complex:
    """tr(P_perm^dagger X)."""
    idx = perm_index(tuple(perm), d)
    return complex(np.sum(X[idx, np.arange(len(idx))]))


# ---------------------------------------------------------------- Weingarten table


@dataclass(frozen=True)
class WeingartenTable:
    k: int
    D: int
    perms: tuple
    gram: np.ndarray
    wg: np.ndarray

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "D": self.D,
            "perms": [list(p) for p in self.perms],
            "wg": [float(v) for v in self.wg.ravel()],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


class SingularGramError(np.linalg.LinAlgError):
    pass


def gram_matrix(k: int, D: int, perms=None) -> np.ndarray:
    perms = all_perms(k) if perms is None else perms
    g = np.empty((len(perms), len(perms)))
    for a, p in enumerate(perms):
        pinv = inverse(p)
        for b, s in enumerate(perms):
            g[a, b] = float(D) ** cycle_count(compose(pinv, s))
    return g


@lru_cache(maxsize=None)
def weingarten_matrix(k: int, D: int, allow_singular: bool = False) -> WeingartenTable:
    """Gram matrix and its inverse.

    For D < k the permutation operators are linearly dependent and the Gram
    matrix is singular; this raises unless ``allow_singular``, in which case
    the Moore-Penrose pseudo-inverse is used (still exact for twirls, since it
    yields the orthogonal projection onto the span of the permutations).
    """
    if k < 1 or k > 6:
        raise ValueError("supported for 1 <= k <= 6")
    perms = tuple(all_perms(k))
    g = gram_matrix(k, D, perms)
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > 1e12:
        if not allow_singular:
            raise SingularGramError(
                f"Gram matrix singular or ill-conditioned for k={k}, D={D} (cond {cond:.3g})")
        wg = np.linalg.pinv(g, rcond=1e-10, hermitian=True)
    else:
        wg = np.linalg.solve(g, np.eye(len(perms)))
    wg = (wg + wg.T) / 2
    g.setflags(write=False)
    wg.setflags(write=False)
    return WeingartenTable(k, D, perms, g, wg)


# ---------------------------------------------------------------- twirls


def _check_size(X, d, k):
    if X.shape != (d**k, d**k):
        raise tc.DimensionError(f"operator must be {d**k}x{d**k}")


def _expand(coeffs, perms, d, k):
    D = d**k
    out = np.zeros((D, D), dtype=complex)
    cols = np.arange(D)
    for c, p in zip(coeffs, perms):
        if c != 0:
            out[perm_index(p, d), cols] += c
    return out


def haar_twirl_exact(X: np.ndarray, k: int, n: int) -> np.ndarray:
    """E_U[U^{(x)k} X U^{dagger (x)k}] over Haar U on n qubits."""
    d = 1 << n
    X = np.asarray(X)
    _check_size(X, d, k)
    tab = weingarten_matrix(k, d, allow_singular=True)
    t = np.array([perm_overlap(p, X, d) for p in tab.perms])
    return _expand(tab.wg @ t, tab.perms, d, k)


def _last_registers(p, q, n):
    return list(range(n * p, n * (p + q)))


def mixed_twirl_exact(X: np.ndarray, p: int, q: int, n: int) -> np.ndarray:
    """E_U[(U^{(x)p} (x) U*^{(x)q}) X (...)^dagger] via partial transposition."""
    sub = _last_registers(p, q, n)
    k = p + q
    Xg = tc.partial_transpose(np.asarray(X), sub, n * k)
    return tc.partial_transpose(haar_twirl_exact(Xg, k, n), sub, n * k)


def approx_twirl(X: np.ndarray, k: int, n: int) -> np.ndarray:
    """d^{-k} sum_pi tr(P_pi^dagger X) P_pi."""
    d = 1 << n
    X = np.asarray(X)
    _check_size(X, d, k)
    perms = all_perms(k)
    t = np.array([perm_overlap(p, X, d) for p in perms]) / float(d) ** k
    return _expand(t, perms, d, k)


def block_perms(p: int, q: int) -> list[tuple]:
    """Permutations of p+q registers that keep the first p and last q apart."""
    out = []
    for a in permutations(range(p)):
        for b in permutations(range(q)):
            out.append(tuple(a) + tuple(p + j for j in b))
    return sorted(out)


def _sector_channel(Y, kl, kr, a, d):
    """(Phi_a^{(kl)} (x) Phi_a^{(kr)} (x) id_a) applied to Y on (d^{kl+kr}) (x) a."""
    k = kl + kr
    dl = d**k
    Y = Y.reshape(dl, a, dl, a)
    out = np.zeros_like(Y)
    cols = np.arange(dl)
    for rho in block_perms(kl, kr):
        idx = perm_index(rho, d)
        blk = Y[idx, :, cols, :].sum(axis=0) / float(d) ** k
        out[idx, :, cols, :] += blk[None, :, :]
    return out.reshape(dl * a, dl * a)


def approx_mixed_twirl(X: np.ndarray, p: int, q: int, n: int, isometries) -> np.ndarray:
    """sum_l I_l^dagger [Phi_a^{(p-l)} (x) Phi_a^{(q-l)} (x) id_A](I_l X I_l^dagger) I_l.

    ``isometries`` is the list returned by :func:`strongdesign.brauer.sector_isometries`.
    """
    if not isometries:
        raise ValueError("sector isometries are required")
    d = 1 << n
    X = np.asarray(X)
    _check_size(X, d, p + q)
    out = np.zeros_like(X, dtype=complex)
    for iso in isometries:
        M = iso.matrix
        Y = M @ X @ M.conj().T
        out += M.conj().T @ _sector_channel(Y, p - iso.ell, q - iso.ell, iso.a_size, d) @ M
    return out


# ---------------------------------------------------------------- Choi matrices
# Convention: Choi(Phi) = sum_{ij} E_ij (x) Phi(E_ij), input factor first.


def choi_of(channel, dim: int) -> np.ndarray:
    C = np.zeros((dim * dim, dim * dim), dtype=complex)
    for i in range(dim):
        for j in range(dim):
            E = np.zeros((dim, dim), dtype=complex)
            E[i, j] = 1.0
            C += np.kron(E, channel(E))
    return C


def _perm_sum(coeffs, mats):
    out = np.zeros_like(mats[0])
    for c, m in zip(coeffs, mats):
        if c != 0:
            out += c * m
    return out


def _ptp_mats(k, d, p=None):
    """Dense permutation matrices, partially transposed on registers >= p if given."""
    mats = [perm_matrix(s, d) for s in all_perms(k)]
    if p is not None and p < k:
        mats = [tc.register_transpose(m, [d] * k, range(p, k)) for m in mats]
    return mats


def choi_haar_twirl(k: int, n: int) -> np.ndarray:
    d = 1 << n
    tab = weingarten_matrix(k, d, allow_singular=True)
    mats = _ptp_mats(k, d)
    return sum(np.kron(mats[a], _perm_sum(tab.wg[a], mats)) for a in range(len(mats)))


def choi_mixed_twirl_exact(p: int, q: int, n: int) -> np.ndarray:
    d = 1 << n
    k = p + q
    tab = weingarten_matrix(k, d, allow_singular=True)
    mats = _ptp_mats(k, d, p)
    return sum(np.kron(mats[a], _perm_sum(tab.wg[a], mats)) for a in range(len(mats)))


def choi_approx_twirl(k: int, n: int) -> np.ndarray:
    d = 1 << n
    mats = _ptp_mats(k, d)
    return sum(np.kron(m, m) for m in mats) / float(d) ** k


def choi_approx_mixed_twirl(p: int, q: int, n: int, isometries) -> np.ndarray:
    """Choi matrix of :func:`approx_mixed_twirl`, built sector by sector.

    With Psi_l = Phi_a (x) Phi_a (x) id_A one has
    Choi = sum_l (I_l^T (x) I_l^dagger) Choi(Psi_l) (conj(I_l) (x) I_l), and Choi(Psi_l)
    is a sum of Kronecker products, so no Choi(Psi_l)-sized product is formed.
    """
    d = 1 << n
    dim = d ** (p + q)
    dtype = np.result_type(*[iso.matrix for iso in isometries])
    C = np.zeros((dim * dim, dim * dim), dtype=dtype)
    for iso in isometries:
        M = iso.matrix
        kl, kr, a = p - iso.ell, q - iso.ell, iso.a_size
        w = 1.0 / float(d) ** (kl + kr)
        for rho in block_perms(kl, kr):
            P = perm_matrix(rho, d)
            for i in range(a):
                for j in range(a):
                    E = np.zeros((a, a))
                    E[i, j] = 1.0
                    B = np.kron(P, E)
                    C += w * np.kron(M.T @ B @ M.conj(), M.conj().T @ B @ M)
    return C


# ---------------------------------------------------------------- moment operators


def _vec(A):
    return np.asarray(A).reshape(-1)


def moment_channel_matrix(n: int, k: int, unitaries=None) -> np.ndarray:
    """E[U^{(x)k} (x) conj(U)^{(x)k}] acting on row-major vec(X).

    With ``unitaries=None`` the exact Haar operator sum_{pi,s} Wg |P_s>><<P_pi|
    is returned; otherwise the sample mean over the given unitaries.
    """
    d = 1 << n
    if n * k > 3:
        raise ValueError("moment matrices are limited to n*k <= 3")
    D = d**k
    if unitaries is None:
        tab = weingarten_matrix(k, d, allow_singular=True)
        vecs = np.stack([_vec(perm_matrix(s, d)) for s in tab.perms])
        return (vecs.T @ tab.wg @ vecs.conj()).astype(complex)
    M = np.zeros((D * D, D * D), dtype=complex)
    count = 0
    for U in unitaries:
        Uk = tc.kron_all([U] * k)
        M += np.kron(Uk, Uk.conj())
        count += 1
    return M / count


def essential_norm(M_ens: np.ndarray, M_haar: np.ndarray) -> float:
    return float(np.linalg.norm(M_ens - M_haar, 2))


# ---------------------------------------------------------------- Monte-Carlo oracle


@dataclass
class MonteCarloTwirl:
    mean: np.ndarray
    se_real: np.ndarray
    se_imag: np.ndarray
    samples: int

    def zscores(self, exact: np.ndarray, floor: float = 1e-12) -> np.ndarray:
        dr = np.abs(self.mean.real - exact.real) / np.maximum(self.se_real, floor)
        di = np.abs(self.mean.imag - exact.imag) / np.maximum(self.se_imag, floor)
        return np.maximum(dr, di)

    @property
    def se_complex(self) -> np.ndarray:
        """Standard error of the complex mean, sqrt(Var|X| / S)."""
        return np.hypot(self.se_real, self.se_imag)

    def within_complex(self, exact: np.ndarray, nsig: float = 3.0, atol: float = 1e-12) -> np.ndarray:
        return np.abs(self.mean - exact) <= nsig * self.se_complex + atol

    def within(self, exact: np.ndarray, nsig: float = 3.0, atol: float = 1e-12) -> np.ndarray:
        """Component-wise check (real and imaginary parts separately)."""
        okr = np.abs(self.mean.real - exact.real) <= nsig * self.se_real + atol
        oki = np.abs(self.mean.imag - exact.imag) <= nsig * self.se_imag + atol
        return okr & oki


def _apply_on_axis(V, U, axis):
    # V: (B, d, ..., d); U: (B, d, d); act on register `axis`
    V = np.moveaxis(V, axis + 1, 1)
    shp = V.shape
    V = (U @ V.reshape(shp[0], shp[1], -1)).reshape(shp)
    return np.moveaxis(V, 1, axis + 1)


def monte_carlo_twirl(psi: np.ndarray, p: int, q: int, n: int, samples: int,
                      rng: np.random.Generator, batch: int = 10_000) -> MonteCarloTwirl:
    """Sample mean of (U^{(x)p} (x) U*^{(x)q}) |psi><psi| (...)^dagger with entrywise errors.

    Restricting to pure inputs lets each sample cost one vector per copy
    instead of a full conjugation.
    """
    d = 1 << n
    k = p + q
    D = d**k
    psi = np.asarray(psi, dtype=complex).reshape(D)
    s1 = np.zeros((D, D), dtype=complex)
    s_abs2 = np.zeros((D, D))
    s_sq = np.zeros((D, D), dtype=complex)
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        U = haar_batch(d, b, rng)
        Uc = U.conj()
        V = np.broadcast_to(psi.reshape((1,) + (d,) * k), (b,) + (d,) * k).copy()
        for j in range(k):
            V = _apply_on_axis(V, U if j < p else Uc, j)
        V = V.reshape(b, D)
        s1 += V.T @ V.conj()
        A2 = np.abs(V) ** 2
        s_abs2 += A2.T @ A2
        V2 = V * V
        s_sq += V2.T @ V2.conj()
        done += b
    S = float(samples)
    mean = s1 / S
    e_abs2 = s_abs2 / S
    e_sq = s_sq / S
    var_r = np.maximum((e_abs2 + e_sq.real) / 2 - mean.real**2, 0.0)
    var_i = np.maximum((e_abs2 - e_sq.real) / 2 - mean.imag**2, 0.0)
    scale = S / max(S - 1, 1) / S
    return MonteCarloTwirl(mean, np.sqrt(var_r * scale), np.sqrt(var_i * scale), samples)


# ---------------------------------------------------------------- submatrix bound


def inverse_wg_submatrix_sum(p: int, q: int, D: int) -> float:
    """(1/p!q!) sum_{pi,pi' in S_p x S_q} |delta - D^{-(p+q)} [(Wg|_block)^{-1}]_{pi,pi'}|."""
    k = p + q
    tab = weingarten_matrix(k, D)
    pos = {s: i for i, s in enumerate(tab.perms)}
    rows = [pos[s] for s in block_perms(p, q)]
    sub = tab.wg[np.ix_(rows, rows)]
    inv = np.linalg.inv(sub)
    dev = np.abs(np.eye(len(rows)) - inv / float(D) ** k).sum()
    return float(dev / len(rows))
