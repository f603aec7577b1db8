"""Experiment registry used by the command line driver.

Each experiment takes a flat parameter dict (already validated against its
schema) and returns a list of ``(result_name, payload)`` pairs. Payloads are
plain JSON values; no timings or host details go into them, so identical
configs give identical bytes.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import bounds, brauer, diagnostics, kwise
from . import path_recording as pr
from . import tensor_core as tc
from . import weingarten as wg
from .circuits import EnsembleSpec
from .seeding import make_rng

REQUIRED = object()


@dataclass(frozen=True)
class Experiment:
    fn: object
    schema: dict  # key -> default (REQUIRED for mandatory keys)
    stochastic: bool
    limits: str
    summary: str

    def required(self) -> list:
        return sorted(k for k, v in self.schema.items() if v is REQUIRED)

    def optional(self) -> dict:
        return {k: v for k, v in sorted(self.schema.items()) if v is not REQUIRED}


def _spec_from(params) -> EnsembleSpec:
    ens = params["ensemble"]
    if isinstance(ens, dict):
        return EnsembleSpec.from_json(ens)
    return EnsembleSpec.make(ens, params["n"], **params.get("ensemble_params", {}))


# ---------------------------------------------------------------- twirls


def twirl_oracle(params):
    out = []
    for ci, (p, q, n) in enumerate(params["cases"]):
        d = 1 << n
        dim = d ** (p + q)
        r = make_rng(params["seed"], ci, 0)
        psi = r.normal(size=dim) + 1j * r.normal(size=dim)
        psi /= np.linalg.norm(psi)
        exact = wg.mixed_twirl_exact(np.outer(psi, psi.conj()), p, q, n)
        mc = wg.monte_carlo_twirl(psi, p, q, n, params["samples"], make_rng(params["seed"], ci, 1))
        se = mc.se_complex
        z = np.abs(mc.mean - exact) / np.maximum(se, 1e-300)
        comp = ~mc.within(exact)
        tests = int((mc.se_real > 1e-12).sum() + (mc.se_imag > 1e-12).sum())
        out.append((f"twirl_p{p}_q{q}_n{n}", {
            "p": p, "q": q, "n": n, "samples": params["samples"],
            "max_z_complex": float(z.max()),
            "within_3se_complex": bool(mc.within_complex(exact).all()),
            "componentwise_exceed_3se": int(comp.sum()),
            "componentwise_tests": tests,
            "componentwise_null_expectation": float(tests * 0.0026997960632601866),
        }))
    return out


def twirl_sandwich(params):
    n = params["n"]
    D = 1 << n
    out = []
    for p, q in params["cases"]:
        eps = (p + q) ** 2 / D
        iso = brauer.sector_isometries(p, q, D)
        Ca = wg.choi_approx_mixed_twirl(p, q, n, iso)
        Ch = wg.choi_mixed_twirl_exact(p, q, n).real
        lo = float(np.linalg.eigvalsh(Ch - (1 - eps) * Ca)[0])
        hi = float(np.linalg.eigvalsh((1 + eps) * Ca - Ch)[0])
        out.append((f"sandwich_p{p}_q{q}_n{n}", {"p": p, "q": q, "n": n, "eps": eps,
                                                 "min_eig_lower": lo, "min_eig_upper": hi}))
    return out


def weingarten_table(params):
    tab = wg.weingarten_matrix(params["k"], params["D"], allow_singular=params["allow_singular"])
    return [(f"weingarten_k{params['k']}_D{params['D']}", tab.to_json())]


# ---------------------------------------------------------------- brauer


def brauer_checks(p: int, q: int, D: int) -> dict:
    """Structure checks; every value is a max deviation except the rank flags."""
    diags = brauer.ptp_diagrams(p, q)
    mats = [brauer.diagram_matrix(d, D) for d in diags]
    mul = 0.0
    for (a, ma), (b, mb) in itertools.product(zip(diags, mats), repeat=2):
        c, loops = brauer.compose(a, b)
        mul = max(mul, float(np.abs(ma @ mb - float(D) ** loops * brauer.diagram_matrix(c, D)).max()))
    dual = float(np.abs(brauer.no_epr_projector(p, q, D, "nullspace")
                        - brauer.no_epr_projector(p, q, D, "weingarten")).max())
    proj = brauer.orthogonal_projectors(p, q, D)
    ranks_ok = True
    ranks = {}
    for a in proj.alphas:
        want = D ** (p + q - 2 * a.size) - brauer.n_epr(p - a.size, q - a.size, D)
        got = proj.rank(a)
        ranks[str(a.pairs)] = [got, want]
        ranks_ok &= got == want
    iso = brauer.sector_isometries(p, q, D, proj=proj)
    comp = sum(I.matrix.conj().T @ I.matrix for I in iso)
    completeness = float(np.abs(comp - np.eye(D ** (p + q))).max())
    comm = 0.0
    for P in proj.by_size.values():
        for m in mats:
            comm = max(comm, float(np.linalg.norm(P @ m - m @ P, 2)))
    return {"p": p, "q": q, "D": D, "ptp_mul_dev": mul, "no_epr_dual_dev": dual, "ranks_ok": bool(ranks_ok),
            "ranks": ranks, "completeness_dev": completeness, "commutator_norm": comm}


def brauer_suite(params):
    out = []
    for p, q, D in params["cases"]:
        out.append((f"brauer_p{p}_q{q}_D{D}", brauer_checks(p, q, D)))
    for p, q, D in params["submatrix_cases"]:
        s = wg.inverse_wg_submatrix_sum(p, q, D)
        out.append((f"wg_submatrix_p{p}_q{q}_D{D}", {"p": p, "q": q, "D": D, "sum": s,
                                                     "bound": 2 * (p + q) ** 2 / D}))
    return out


def brauer_fixture(p: int, q: int, D: int) -> dict:
    A = brauer.algebra(p, q, D)
    proj = brauer.orthogonal_projectors(p, q, D)
    return {
        "p": p, "q": q, "D": D,
        "basis_size": A.dim,
        "gram": A.gram.tolist(),
        "n_epr": brauer.n_epr(p, q, D),
        "ranks": {str(a.pairs): proj.rank(a) for a in proj.alphas},
    }


# ---------------------------------------------------------------- path recording


def path_recording_scan(params):
    out = []
    seed = params["seed"]
    m = params["m"]
    queries = tuple(params["queries"])
    for n in params["n_values"]:
        prog = pr.AdversaryProgram.random(n, m, queries, make_rng(seed, n, m))
        rv = pr.run_adversary(prog, "path_recording")
        rh = pr.run_adversary(prog, "exact_haar")
        out.append((f"path_recording_n{n}", {"n": n, "m": m, "queries": list(queries),
                                             "trace_distance": tc.trace_distance(rv, rh),
                                             "trace_path_recording": float(np.trace(rv).real)}))
    t1 = {}
    for qi, q in enumerate(pr.QUERY_TYPES):
        prog = pr.AdversaryProgram.random(params["t1_n"], 0, (q,), make_rng(seed, 100 + qi))
        prog.unitaries[-1] = np.eye(prog.dim)
        rv = pr.run_adversary(prog, "path_recording", method="sparse")
        t1[q] = float(np.abs(rv - np.eye(prog.dim) / prog.dim).max())
    out.append(("path_recording_t1", {"n": params["t1_n"], "max_dev_from_maximally_mixed": t1}))
    return out


# ---------------------------------------------------------------- diagnostics


_DIAG_KEYS = {
    "inverse_echo": ("qubit", "letter"),
    "conjugate_epr_test": ("qubit", "pair"),
    "z0_memory": (),
    "size_distribution": ("qubit", "letter"),
    "op_spreading_tvd": ("bootstrap",),
    "correlator_survey": ("r", "k", "max_tuples", "threshold"),
    "hp_decoder_fidelity": ("a", "radiation"),
}


def _run_diag(name, spec, samples, seed, extra):
    fn = diagnostics.CATALOG[name]["fn"]
    kw = {k: v for k, v in extra.items() if k in _DIAG_KEYS[name]}
    return fn(spec, samples=samples, seed=seed, **kw)


def _tag(spec: EnsembleSpec) -> str:
    parts = [spec.kind, f"n{spec.n}"] + [f"{k}{v}" for k, v in spec.params]
    return "_".join(parts)


def _diag_experiment(name):
    def run(params):
        spec = _spec_from(params)
        res = _run_diag(name, spec, params["samples"], params["seed"], params["options"])
        return [(f"{name}__{_tag(spec)}", res.to_json())]
    return run


def diagnostic_suite(params):
    out = []
    for ens in params["ensembles"]:
        spec = EnsembleSpec.from_json(ens)
        for name in params["diagnostics"]:
            if name not in diagnostics.CATALOG:
                raise ValueError(f"unknown diagnostic {name!r}")
            res = _run_diag(name, spec, params["samples"], params["seed"], params["options"])
            out.append((f"{name}__{_tag(spec)}", res.to_json()))
    return out


# ---------------------------------------------------------------- misc


def kwise_check(params):
    out = []
    for k in params["k_values"]:
        fam = kwise.FunctionFamily(params["domain_bits"], params["range_bits"], params["backend"], k)
        rep = kwise.verify_kwise(fam, k, rng=make_rng(params["seed"], k))
        out.append((f"kwise_{params['backend']}_k{k}", {"domain_bits": params["domain_bits"], **rep.to_json()}))
    return out


def error_bounds(params):
    out = []
    for i, case in enumerate(params["translation"]):
        out.append((f"translation_{i}", bounds.error_translation_bounds(**case).to_json()))
    for i, case in enumerate(params["budgets"]):
        case = dict(case)
        kind = case.pop("kind")
        out.append((f"budget_{i}_{kind}", bounds.construction_error_budget(kind, **case).to_json()))
    return out


_DIAG_SCHEMA = {"ensemble": REQUIRED, "n": None, "ensemble_params": {}, "samples": REQUIRED,
                "seed": REQUIRED, "options": {}}

EXPERIMENTS = {
    "twirl_oracle": Experiment(twirl_oracle, {"cases": REQUIRED, "samples": 100_000, "seed": REQUIRED}, True,
                               "n <= 2, p + q <= 3", "exact twirl vs Haar Monte-Carlo mean"),
    "twirl_sandwich": Experiment(twirl_sandwich, {"cases": REQUIRED, "n": 2}, False, "p + q <= 3, D <= 4",
                                 "relative-error sandwich of the approximate mixed twirl"),
    "weingarten_table": Experiment(weingarten_table, {"k": REQUIRED, "D": REQUIRED, "allow_singular": False},
                                   False, "k <= 6", "Weingarten matrix fixture"),
    "brauer_suite": Experiment(brauer_suite, {"cases": REQUIRED, "submatrix_cases": []}, False,
                               "p + q <= 4, D <= 5", "walled Brauer structure checks"),
    "path_recording": Experiment(path_recording_scan, {"n_values": REQUIRED, "m": 0, "queries": ["fwd", "fwd"],
                                                       "t1_n": 3, "seed": REQUIRED}, True,
                                 "t <= 3, n + m <= 10", "path-recording vs exact Haar trace distances"),
    "kwise_check": Experiment(kwise_check, {"domain_bits": 3, "range_bits": 3, "backend": "poly",
                                            "k_values": [1, 2], "seed": REQUIRED}, True,
                              "exhaustive for domain <= 4 bits", "2k-wise uniformity oracle"),
    "error_bounds": Experiment(error_bounds, {"translation": [], "budgets": []}, False, "none",
                               "error translation and construction budgets"),
    "diagnostic_suite": Experiment(diagnostic_suite, {"ensembles": REQUIRED, "diagnostics": REQUIRED,
                                                      "samples": REQUIRED, "seed": REQUIRED, "options": {}},
                                   True, "per diagnostic", "several diagnostics over several ensembles"),
}
for _name, _info in diagnostics.CATALOG.items():
    EXPERIMENTS[_name] = Experiment(_diag_experiment(_name), dict(_DIAG_SCHEMA), True, _info["limits"],
                                    f"diagnostic: {_name}")


def catalog() -> list:
    return [{"name": k, "required": e.required(), "optional": sorted(e.optional()), "limits": e.limits,
             "summary": e.summary} for k, e in sorted(EXPERIMENTS.items())]
