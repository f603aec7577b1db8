"""Random and 2k-wise independent functions on bit strings.

Two backends:

* ``table``: a uniformly random lookup table (a truly random function).
* ``poly``: a uniformly random polynomial of degree ``2k-1`` over GF(2^m),
  evaluated by Horner's rule, with the field element truncated to its low
  ``m_out`` bits. Any ``2k`` distinct inputs get jointly uniform outputs.

Field moduli (one fixed irreducible polynomial per degree, bit ``i`` is the
coefficient of ``x^i``) are listed in :data:`IRREDUCIBLE`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np
from scipy import stats

IRREDUCIBLE = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
}

TERNARY = "ternary"


def gf_mul(a, b, m: int):
    """Multiply field elements of GF(2^m); works elementwise on integer arrays."""
    mod = IRREDUCIBLE[m]
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    acc = np.zeros(np.broadcast(a, b).shape, dtype=np.int64)
    top = 1 << m
    for _ in range(m):
        acc ^= np.where(b & 1, a, 0)
        b = b >> 1
        a = a << 1
        a = np.where(a & top, a ^ mod, a)
    return acc


def is_irreducible(poly: int) -> bool:
    """Trial division over GF(2); fine for the small degrees used here."""
    deg = poly.bit_length() - 1
    if deg < 1:
        return False
    for d in range(2, 1 << (deg // 2 + 1)):
        if d.bit_length() - 1 > deg // 2:
            break
        r = poly
        dd = d.bit_length() - 1
        while r.bit_length() - 1 >= dd:
            r ^= d << (r.bit_length() - 1 - dd)
        if r == 0:
            return False
    return True


@dataclass(frozen=True)
class FunctionFamily:
    domain_bits: int
    range: str | int  # number of output bits, or "ternary"
    backend: str = "table"
    k: int = 1

    def __post_init__(self):
        if self.domain_bits < 1:
            raise ValueError("domain_bits must be positive")
        if self.backend not in ("table", "poly"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.range != TERNARY and (not isinstance(self.range, int) or self.range < 1):
            raise ValueError(f"range must be a positive bit count or 'ternary', got {self.range!r}")
        if self.backend == "poly":
            if self.range == TERNARY:
                raise ValueError("poly backend supports binary ranges only; use the table backend")
            if self.k < 1:
                raise ValueError("poly backend needs k >= 1")
            if self.field_bits not in IRREDUCIBLE:
                raise ValueError(f"no field modulus stored for m={self.field_bits}")

    @property
    def field_bits(self) -> int:
        return max(self.domain_bits, self.range if self.range != TERNARY else 0)

    @property
    def range_size(self) -> int:
        return 3 if self.range == TERNARY else 1 << self.range

    @property
    def degree(self) -> int:
        return 2 * self.k - 1

    def members(self):
        """Enumerate every payload of the family (only sensible for tiny families)."""
        if self.backend == "poly":
            q = 1 << self.field_bits
            for coeffs in product(range(q), repeat=self.degree + 1):
                yield FunctionSample(self, tuple(coeffs))
        else:
            for tab in product(range(self.range_size), repeat=1 << self.domain_bits):
                yield FunctionSample(self, tuple(tab))

    def family_size(self) -> int:
        if self.backend == "poly":
            return (1 << self.field_bits) ** (self.degree + 1)
        return self.range_size ** (1 << self.domain_bits)


@dataclass(frozen=True)
class FunctionSample:
    family: FunctionFamily
    payload: tuple = field(repr=False)

    def __post_init__(self):
        fam = self.family
        if fam.backend == "table" and len(self.payload) != 1 << fam.domain_bits:
            raise ValueError("table length must equal 2^domain_bits")
        if fam.backend == "poly" and len(self.payload) != fam.degree + 1:
            raise ValueError("polynomial needs degree+1 coefficients")

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        if isinstance(x, str):
            if len(x) != self.family.domain_bits or set(x) - {"0", "1"}:
                raise ValueError(f"input must be a {self.family.domain_bits}-bit string")
            x = int(x, 2)
        x = int(x)
        if not 0 <= x < 1 << self.family.domain_bits:
            raise ValueError("input outside the domain")
        return int(self.evaluate_many(np.array([x]))[0])

    def evaluate_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        fam = self.family
        if fam.backend == "table":
            return np.asarray(self.payload, dtype=np.int64)[xs]
        m = fam.field_bits
        acc = np.zeros_like(xs)
        # coefficients stored highest degree first
        for c in self.payload:
            acc = gf_mul(acc, xs, m) ^ int(c)
        return acc & ((1 << fam.range) - 1)

    def table(self) -> np.ndarray:
        return self.evaluate_many(np.arange(1 << self.family.domain_bits))

    def to_json(self) -> dict:
        fam = self.family
        width = 1 if fam.range == TERNARY else (max(fam.field_bits, 1) + 7) // 8
        blob = b"".join(int(v).to_bytes(width, "little") for v in self.payload)
        rng_label = TERNARY if fam.range == TERNARY else f"bits({fam.range})"
        backend = "table" if fam.backend == "table" else f"poly({fam.k})"
        return {
            "backend": backend,
            "domain_bits": fam.domain_bits,
            "range": rng_label,
            "payload": blob.hex(),
        }

    @classmethod
    def from_json(cls, obj) -> "FunctionSample":
        if isinstance(obj, str):
            obj = json.loads(obj)
        rng_label = obj["range"]
        rng = TERNARY if rng_label == TERNARY else int(rng_label[5:-1])
        be = obj["backend"]
        if be == "table":
            fam = FunctionFamily(obj["domain_bits"], rng, "table")
        else:
            fam = FunctionFamily(obj["domain_bits"], rng, "poly", int(be[5:-1]))
        width = 1 if rng == TERNARY else (max(fam.field_bits, 1) + 7) // 8
        raw = bytes.fromhex(obj["payload"])
        payload = tuple(
            int.from_bytes(raw[i : i + width], "little") for i in range(0, len(raw), width)
        )
        return cls(fam, payload)


def sample_function(family: FunctionFamily, rng: np.random.Generator) -> FunctionSample:
    if family.backend == "table":
        tab = rng.integers(0, family.range_size, size=1 << family.domain_bits)
        return FunctionSample(family, tuple(int(v) for v in tab))
    coeffs = rng.integers(0, 1 << family.field_bits, size=family.degree + 1)
    return FunctionSample(family, tuple(int(c) for c in coeffs))


def constant_function(family: FunctionFamily, value: int = 0) -> FunctionSample:
    if family.backend == "table":
        return FunctionSample(family, (value,) * (1 << family.domain_bits))
    return FunctionSample(family, (0,) * family.degree + (value,))


@dataclass
class KwiseReport:
    mode: str
    tuple_size: int
    passed: bool
    tuples_checked: int
    chi2: float | None = None
    p_value: float | None = None
    worst_tuple: tuple | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _joint_codes(tables: np.ndarray, pts, base: int) -> np.ndarray:
    code = np.zeros(tables.shape[0], dtype=np.int64)
    for p in pts:
        code = code * base + tables[:, p]
    return code


EXHAUSTIVE_LIMIT = 1 << 20


def verify_kwise(
    family: FunctionFamily,
    k: int,
    sample_budget: int = 100_000,
    rng: np.random.Generator | None = None,
    members=None,
    alpha: float = 1e-3,
) -> KwiseReport:
    """Check that values at every ``2k`` distinct points are jointly uniform.

    Exhaustive mode enumerates the whole family (or ``members`` if given) and
    requires exact count equality for every point tuple. Statistical mode
    draws ``sample_budget`` members, pools joint values over random tuples and
    runs a chi-square test at level ``alpha``.
    """
    t = 2 * k
    npts = 1 << family.domain_bits
    base = family.range_size
    if t > npts:
        raise ValueError("fewer domain points than the tuple size")
    exhaustive = members is not None or (
        family.domain_bits <= 4 and family.family_size() <= EXHAUSTIVE_LIMIT
    )
    if exhaustive:
        mem = list(family.members()) if members is None else list(members)
        tables = np.stack([f.table() for f in mem])
        cells = base**t
        checked = 0
        for pts in combinations(range(npts), t):
            counts = np.bincount(_joint_codes(tables, pts, base), minlength=cells)
            checked += 1
            if counts.min() != counts.max():
                return KwiseReport("exhaustive", t, False, checked, worst_tuple=pts)
        return KwiseReport("exhaustive", t, True, checked)

    if rng is None:
        raise ValueError("statistical mode needs an rng")
    tables = np.stack([sample_function(family, rng).table() for _ in range(sample_budget)])
    cells = base**t
    n_tuples = 8
    chi2_total, dof_total = 0.0, 0
    for _ in range(n_tuples):
        pts = tuple(rng.choice(npts, size=t, replace=False))
        counts = np.bincount(_joint_codes(tables, pts, base), minlength=cells)
        exp = sample_budget / cells
        chi2_total += float(np.sum((counts - exp) ** 2 / exp))
        dof_total += cells - 1
    pval = float(stats.chi2.sf(chi2_total, dof_total))
    return KwiseReport("statistical", t, pval > alpha, n_tuples, chi2_total, pval)
