"""Closed-form error bounds: translation between error notions and
term-by-term construction budgets. Pure arithmetic; every budget returns its
individual terms alongside the total so fixtures can pin each one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class TranslationBounds:
    n: int
    p: int
    q: int
    eps_additive: float
    eps_r_bound: float
    eps_m_lower: float
    eps_m_upper: float
    valid: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def error_translation_bounds(n: int, p: int, q: int, eps_additive: float) -> TranslationBounds:
    """Relative-error bound from an additive error, and the measurable-error sandwich.

    eps_r <= 4^{n(p+q)} / (p! q!) * 2 eps_a + 2 (p+q)^2 / 2^n, valid when
    2 (p+q)^2 <= 2^n; eps_a <= eps_m <= 2 eps_r.
    """
    if n < 1 or p < 0 or q < 0 or eps_additive < 0:
        raise ValueError("need n >= 1, p, q >= 0 and eps_additive >= 0")
    k = p + q
    lead = math.ldexp(1.0, 2 * n * k) / (math.factorial(p) * math.factorial(q))
    eps_r = lead * 2.0 * eps_additive + 2.0 * k * k / math.ldexp(1.0, n)
    return TranslationBounds(n, p, q, eps_additive, eps_r, eps_additive, 2.0 * eps_r,
                             2 * k * k <= (1 << n))


@dataclass(frozen=True)
class Budget:
    kind: str
    params: dict
    terms: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.terms.values()))

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params, "terms": self.terms, "total": self.total}


def _check_positive(**kw):
    for k, v in kw.items():
        if v < 0:
            raise ValueError(f"{k} must be non-negative")


def lrfc_budget(t: int, N: float, eps: float = 0.0) -> Budget:
    """Four-step budget; eps is the additive strong 2-design error of the outer layers."""
    _check_positive(t=t, eps=eps)
    if N < 2:
        raise ValueError("N must be at least 2")
    e4 = eps**0.25
    s1 = 18 * t * (t + 1) / N**0.125
    s2 = math.sqrt(70) * t * (t - 1) / N**0.125 + 2 * t * (t + 1) / N**0.25 + 4 * t**1.25 * e4
    s3 = t * (t + 1) / (2 * N)
    inner = (t * (t + 1) / (2 * N) + math.sqrt(70) * t * (t - 1) / N**0.125 + 2 * t * (t + 1) / N**0.25
             + 9 * t * (t + 2) / N**0.125 + 8 * t**1.25 * e4)
    s4 = 8 * t * math.sqrt(inner)
    return Budget("lrfc", {"t": t, "N": N, "eps": eps},
                  {"haar_to_path": s1, "path_to_projected": s2, "projected_to_shuffled": s3,
                   "shuffled_projection": s4})


def gluing_budget(t: int, N_a: float, N_b: float, N_c: float, eps: float = 0.0) -> Budget:
    """Five-step budget for gluing two overlapping patches (ab then bc)."""
    _check_positive(t=t, eps=eps)
    if min(N_a, N_b, N_c) < 2:
        raise ValueError("local dimensions must be at least 2")
    N_ab, N_bc, N_abc = N_a * N_b, N_b * N_c, N_a * N_b * N_c
    N_min = min(N_a, N_b, N_c)
    e4 = eps**0.25
    s1 = 9 * t * (t + 2) / N_abc**0.125 + 2 * t**0.25 * e4
    s2 = 17 * t * t / N_abc**0.125 + 7 * t**1.5 / math.sqrt(N_min) + 6 * t**1.25 * e4
    s3 = t * t / N_ab + t * t / N_bc
    s4 = 2 * t * math.sqrt(17 * t * t / N_abc**0.125 + 7 * t**1.5 / math.sqrt(N_min) + 2 * t * t / N_ab
                           + 2 * t * t / N_bc + 9 * t / N_abc**0.125 + 8 * t**1.25 * e4)
    s5 = 9 * t * (t + 1) / N_ab**0.125 + 9 * t * (t + 1) / N_bc**0.125
    return Budget("gluing", {"t": t, "N_a": N_a, "N_b": N_b, "N_c": N_c, "eps": eps},
                  {"haar_to_path": s1, "path_to_projected": s2, "split_projection": s3,
                   "unproject": s4, "path_to_local_haar": s5})


def two_layer_budget(n: int, xi: int, k: int, eps_brick: float = 0.0) -> Budget:
    """m = n/xi gluing steps on patches of 2^xi; each step pays eps_brick plus one gluing budget."""
    if xi < 1 or n % xi or n // xi < 2:
        raise ValueError("need xi | n with at least two patches")
    m = n // xi
    d = 2.0**xi
    g = gluing_budget(k, d, d, d, eps_brick)
    return Budget("two_layer", {"n": n, "xi": xi, "k": k, "eps_brick": eps_brick},
                  {"brick_errors": m * eps_brick, "gluing": m * g.total})


def min_xi_two_layer(n: int, k: int, eps: float) -> float:
    """Patch size (16/3) log2(n k^2 / eps), without the additive constant."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return 16.0 / 3.0 * math.log2(n * k * k / eps)


def construction_error_budget(kind: str, **params) -> Budget:
    if kind == "lrfc":
        return lrfc_budget(**params)
    if kind == "gluing":
        return gluing_budget(**params)
    if kind == "two_layer":
        return two_layer_budget(**params)
    raise ValueError(f"unknown construction {kind!r}")
