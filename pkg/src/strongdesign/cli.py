"""Command line driver.

    strongdesign run CONFIG.json [--seed S] [--set key=value ...] [--out DIR]
    strongdesign list
    strongdesign fixtures weingarten|brauer [--out DIR]
    strongdesign selftest

Exit codes: 0 success, 2 configuration error, 3 selftest tolerance failure.
Set STRONGDESIGN_WORKERS to fan diagnostic suites out over processes.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import EXPERIMENTS, REQUIRED, brauer_fixture, catalog

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE = 0, 2, 3
RESERVED = {"experiment", "output"}


class ConfigError(ValueError):
    pass


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path, overrides=(), seed=None) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        cfg[k] = _parse_value(v)
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def normalize_config(cfg: dict) -> dict:
    """Fill defaults and reject unknown keys; returns the canonical config."""
    name = cfg.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}")
    exp = EXPERIMENTS[name]
    unknown = sorted(set(cfg) - set(exp.schema) - RESERVED)
    if unknown:
        raise ConfigError(f"unknown keys for {name}: {unknown}")
    out = {"experiment": name}
    for k, default in exp.schema.items():
        if k in cfg:
            out[k] = cfg[k]
        elif default is REQUIRED:
            hint = " (pass --seed)" if k == "seed" else ""
            raise ConfigError(f"missing required key {k!r}{hint}")
        else:
            out[k] = default
    if "seed" in out and (not isinstance(out["seed"], int) or out["seed"] < 0):
        raise ConfigError("seed must be a non-negative integer")
    return out


def config_hash(canonical: dict) -> str:
    raw = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("STRONGDESIGN_WORKERS", "1")))
    except ValueError:
        return 1


def _run_one(canonical: dict):
    exp = EXPERIMENTS[canonical["experiment"]]
    params = {k: v for k, v in canonical.items() if k != "experiment"}
    return exp.fn(params)


def _split(canonical: dict) -> list:
    """Independent sub-configs for process fan-out (diagnostic suites only)."""
    if canonical["experiment"] != "diagnostic_suite":
        return [canonical]
    return [dict(canonical, ensembles=[e], diagnostics=[d])
            for e in canonical["ensembles"] for d in canonical["diagnostics"]]


def execute(canonical: dict) -> list:
    parts = _split(canonical)
    workers = min(_workers(), len(parts))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_run_one, parts))
    else:
        chunks = [_run_one(p) for p in parts]
    return [item for chunk in chunks for item in chunk]


def _write_csv(path: Path, payload: dict) -> bool:
    meta = payload.get("meta", {}) if isinstance(payload, dict) else {}
    if "distribution" not in meta:
        return False
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["weight", "estimate", "std_error", "haar"])
        for i, row in enumerate(zip(meta["distribution"], meta["distribution_se"], meta["haar_distribution"])):
            w.writerow([i, *(repr(float(v)) for v in row)])
    return True


def run(cfg: dict, out_root: str | Path | None = None) -> Path:
    canonical = normalize_config(cfg)
    h = config_hash(canonical)
    root = Path(out_root if out_root is not None else cfg.get("output", "out")) / h
    root.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results = execute(canonical)
    files = []
    for name, payload in results:
        fn = f"{name}.json"
        (root / fn).write_text(dumps(payload))
        files.append(fn)
        if _write_csv(root / f"{name}.csv", payload):
            files.append(f"{name}.csv")
    manifest = {
        "config": canonical,
        "config_hash": h,
        "tool_version": __version__,
        "wall_clock_seconds": round(time.perf_counter() - t0, 3),
        "results": files,
    }
    (root / "manifest.json").write_text(dumps(manifest))
    return root


# ---------------------------------------------------------------- fixtures and selftest


def fixtures(kind: str) -> dict:
    from .weingarten import weingarten_matrix

    if kind == "weingarten":
        tabs = [weingarten_matrix(k, D).to_json() for k in (1, 2, 3) for D in (2, 4, 8) if D >= k]
        return {"kind": "weingarten", "tables": tabs}
    if kind == "brauer":
        cases = [(1, 1, 2), (1, 1, 4), (2, 1, 4), (2, 2, 4)]
        return {"kind": "brauer", "algebras": [brauer_fixture(*c) for c in cases]}
    raise ConfigError(f"unknown fixture kind {kind!r}")


def selftest() -> list:
    """Fast end-to-end checks; returns (name, ok, detail) triples."""
    from . import bounds, kwise
    from . import path_recording as pr
    from . import tensor_core as tc
    from .seeding import make_rng
    from .weingarten import haar_twirl_exact, weingarten_matrix

    checks = []
    tab = weingarten_matrix(2, 4)
    checks.append(("wg_k2_D4", bool(np.allclose(tab.wg, [[1 / 15, -1 / 60], [-1 / 60, 1 / 15]], atol=1e-12)), ""))
    rng = make_rng(0, 0)
    X = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    T = haar_twirl_exact(X, 2, 2)
    checks.append(("twirl_idempotent", bool(np.abs(haar_twirl_exact(T, 2, 2) - T).max() < 1e-9), ""))
    worst = 0.0
    for q in pr.QUERY_TYPES:
        prog = pr.AdversaryProgram.random(2, 0, (q,), make_rng(0, 1))
        prog.unitaries[-1] = np.eye(4)
        worst = max(worst, float(np.abs(pr.run_adversary(prog, method="sparse") - np.eye(4) / 4).max()))
    checks.append(("path_recording_t1", worst <= 1e-9, f"{worst:.2e}"))
    fam = kwise.FunctionFamily(3, 3, "poly", 1)
    checks.append(("kwise_poly_k1", kwise.verify_kwise(fam, 1).passed, ""))
    b = bounds.error_translation_bounds(4, 1, 1, 1e-6).eps_r_bound
    checks.append(("translation_example", abs(b - 0.631072) < 1e-12, f"{b!r}"))
    rho = np.diag([0.5, 0.5, 0, 0])
    checks.append(("trace_distance", abs(tc.trace_distance(rho, np.eye(4) / 4) - 0.5) < 1e-12, ""))
    return checks


# ---------------------------------------------------------------- entry point


def _origin(exc) -> str:
    tb = exc.__traceback__
    while tb.tb_next is not None:
        tb = tb.tb_next
    return tb.tb_frame.f_globals.get("__name__", "?")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="strongdesign", description="strong unitary design experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--out")
    sub.add_parser("list", help="list experiments")
    f = sub.add_parser("fixtures", help="emit regression fixtures")
    f.add_argument("kind", choices=["weingarten", "brauer"])
    f.add_argument("--out")
    sub.add_parser("selftest", help="quick tolerance checks")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            sys.stdout.write(dumps(catalog()))
            return EXIT_OK
        if args.command == "fixtures":
            text = dumps(fixtures(args.kind))
            if args.out:
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        if args.command == "selftest":
            checks = selftest()
            for name, ok, detail in checks:
                print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
            return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_TOLERANCE
        cfg = load_config(args.config, args.set, args.seed)
        root = run(cfg, args.out)
        print(root / "manifest.json")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, TypeError, KeyError) as exc:
        print(f"config error ({type(exc).__name__} in {_origin(exc)}): {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
