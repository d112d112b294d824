"""Command-line front end: ``laxtop <subcommand> --config scenario.yaml``.

Every run writes ``report.json`` (and CSV time series where relevant) to
its output directory and echoes the report on stdout. Exit status is 0
when every check passes, 1 on a tolerance failure, 2 on a bad config or
usage, 3 when the numerics themselves fail.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import yaml

from laxtop import __version__, _backend
from laxtop import apelrot, so4
from laxtop._rk import IntegrationError
from laxtop.config import ConfigError, Scenario, load_scenario
from laxtop.dynamics import BodyParams3D, integrate
from laxtop.lax import build_C, lax_residual, spectral_coeffs_3d

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_LIMITS = {
    "verify-lax": {"lax_residual": 1e-12},
    "spectral-drift": {"A_abs": 0.0, "B_abs": 1e-9, "D_rel": 1e-8, "E_rel": 1e-8, "F_abs": 1e-10},
    "reconstruct": {"state_sup": 1e-4, "phase_sup": 1e-5},
    "so4-verify": {"conservation_rel": 1e-8, "involution": 1e-11},
    "simulate": {},
}


def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, non-finite to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def dump_report(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


class Checks:
    def __init__(self, limits: dict):
        self.limits = limits
        self.rows: list[dict] = []

    def add(self, name: str, value: float, limit: Optional[float] = None) -> None:
        limit = self.limits[name] if limit is None else limit
        self.rows.append({"name": name, "value": float(value), "limit": float(limit), "ok": bool(value <= limit)})

    @property
    def ok(self) -> bool:
        return all(r["ok"] for r in self.rows)

    @property
    def failures(self) -> list[str]:
        return [r["name"] for r in self.rows if not r["ok"]]


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def _limits(sub: str, sc: Scenario) -> dict:
    lim = dict(DEFAULT_LIMITS.get(sub, {}))
    lim.update({k: v for k, v in sc.checks.items() if k in lim})
    return lim


def _lambdas(sc: Scenario):
    lams = sc.extra.get("lambdas")
    if lams is None:
        return np.linspace(-2.0, 2.0, 20)
    return np.array([float(v) for v in lams])


# ---------------------------------------------------------------------------
# subcommands: each returns (checks, results, artifacts)


def cmd_simulate(sc: Scenario, out: Path, backend):
    traj = integrate(sc.params, sc.state, sc.t_end, sc.tol, cadence=sc.cadence, backend=backend)
    traj.to_csv(out / "trajectory.csv")
    chk = Checks({})
    chk.add("t_strictly_increasing", 0.0 if np.all(np.diff(traj.t) > 0) else 1.0, 0.0)
    results = {"samples": len(traj), "steps": traj.nsteps, "rejected": traj.nrejected}
    return chk, results, ["trajectory.csv"]


def cmd_verify_lax(sc: Scenario, out: Path, backend):
    chk = Checks(_limits("verify-lax", sc))
    C = sc.extra.get("C")
    if C is None:
        try:
            C = build_C(sc.params)
        except ValueError as exc:
            chk.add("lax_residual", math.inf)
            return chk, {"error": str(exc)}, []
    worst = max(float(np.max(np.abs(lax_residual(sc.params, sc.state, lam, C)))) for lam in _lambdas(sc))
    chk.add("lax_residual", worst)
    results = {"lax_residual": worst}
    if isinstance(sc.params, BodyParams3D):
        results["hypersurface"] = apelrot.hypersurface_value(sc.state, sc.params)
        results["eq7"] = apelrot.eq7_value(sc.state, sc.params)
        results["apelrot_condition"] = apelrot.check_apelrot(sc.params).status
    return chk, results, []


def cmd_spectral_drift(sc: Scenario, out: Path, backend):
    if not isinstance(sc.params, BodyParams3D):
        raise ConfigError("spectral-drift needs a three-dimensional case", "case", source=sc.source)
    traj = integrate(sc.params, sc.state, sc.t_end, sc.tol, cadence=sc.cadence, backend=backend)
    coeffs = np.array([spectral_coeffs_3d(sc.params, s).as_array() for s in traj.states()])
    _write_csv(out / "spectral.csv", ["t", "A", "B", "D", "E", "F"], np.column_stack((traj.t, coeffs)))
    c0 = coeffs[0]
    dev = np.max(np.abs(coeffs - c0), axis=0)
    chk = Checks(_limits("spectral-drift", sc))
    chk.add("A_abs", dev[0])
    chk.add("B_abs", float(np.max(np.abs(coeffs[:, 1]))))
    chk.add("D_rel", dev[2] / max(abs(c0[2]), 1e-300))
    chk.add("E_rel", dev[3] / max(abs(c0[3]), 1e-300))
    chk.add("F_abs", float(np.max(np.abs(coeffs[:, 4] - 1.0))) if abs(c0[4] - 1) < 1e-12 else dev[4])
    results = {"initial": dict(zip("ABDEF", c0)), "max_abs_drift": dict(zip("ABDEF", dev))}
    return chk, results, ["spectral.csv"]


def cmd_reconstruct(sc: Scenario, out: Path, backend):
    if sc.case != "apelrot":
        raise ConfigError("reconstruct needs the apelrot case", "case", source=sc.source)
    res = apelrot.reconstruct(sc.params, sc.state, sc.t_end, sc.cadence or 0.01, sc.tol, backend)
    cols = ["M1", "M2", "M3", "g1", "g2", "g3"]
    header = ["t"] + cols + [c + "_rec" for c in cols] + ["phi", "phi_direct"]
    _write_csv(out / "reconstruction.csv", header,
               np.column_stack((res.t, res.direct, res.recon, res.phase, res.phase_direct)))
    chk = Checks(_limits("reconstruct", sc))
    chk.add("state_sup", res.max_error)
    chk.add("phase_sup", res.max_phase_error)
    results = {
        "state_sup": res.max_error,
        "phase_sup": res.max_phase_error,
        "integral_residuals": {k: float(np.max(np.abs(v))) for k, v in res.residuals.items()},
    }
    return chk, results, ["reconstruction.csv"]


def cmd_so4_verify(sc: Scenario, out: Path, backend):
    if isinstance(sc.params, BodyParams3D) or sc.params.n != 4:
        raise ConfigError("so4-verify needs a four-dimensional case", "case", source=sc.source)
    chk = Checks(_limits("so4-verify", sc))
    C = sc.extra.get("C")
    if C is None:
        try:
            C = build_C(sc.params)
        except ValueError as exc:
            chk.add("conservation_rel", math.inf)
            return chk, {"error": str(exc)}, []
    traj, rows = so4.conservation_run(sc.params, sc.state, sc.t_end, sc.tol, C, sc.cadence, backend)
    series = [list(so4.eight_quantities(s.M, s.G, C).values()) for s in traj.states()]
    _write_csv(out / "integrals.csv", ["t", *so4.ALL_NAMES], np.column_stack((traj.t, series)))
    for r in rows:
        chk.add("conservation_rel", r.max_rel)
        chk.rows[-1]["name"] = f"conservation_rel.{r.name}"
    rng = np.random.default_rng(sc.seed)
    worst = 0.0
    for _ in range(int(sc.extra.get("points", 100))):
        A, B = rng.normal(size=(2, 4, 4))
        worst = max(worst, float(np.max(np.abs(so4.involution_table(A - A.T, B - B.T, C)))))
    chk.add("involution", worst)
    results = {
        "drift": {r.name: {"abs": r.max_abs, "rel": r.max_rel, "initial": r.initial} for r in rows},
        "involution_max": worst,
        "C": {f"{i + 1}{j + 1}": float(C[i, j]) for i in range(4) for j in range(i + 1, 4) if C[i, j]},
    }
    return chk, results, ["integrals.csv"]


SUBCOMMANDS: dict[str, Callable] = {
    "simulate": cmd_simulate,
    "verify-lax": cmd_verify_lax,
    "spectral-drift": cmd_spectral_drift,
    "reconstruct": cmd_reconstruct,
    "so4-verify": cmd_so4_verify,
}


def run_classify(args) -> tuple[int, dict]:
    dims = args.n
    seed = args.seed
    cfg_hash = None
    if args.config:
        try:
            text = Path(args.config).read_text()
            data = yaml.safe_load(text) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config: {exc}", source=args.config)
        if not isinstance(data, dict):
            raise ConfigError("top level must be a mapping", source=args.config)
        dims = dims or data.get("n")
        seed = seed if seed is not None else data.get("seed")
        cfg_hash = hashlib.sha256(text.encode()).hexdigest()
    dims = dims or [3, 4, 5, 6]
    if isinstance(dims, int):
        dims = [dims]
    seed = 0 if seed is None else int(seed)
    chk = Checks({})
    census = {}
    for n in dims:
        if n not in (3, 4, 5, 6):
            raise ConfigError(f"census supports n in 3..6, got {n}", "n", source=args.config or "")
        scan = so4.classification_scan(int(n), seed)
        chk.add(f"census_n{n}", 0.0 if scan["ok"] else 1.0, 0.0)
        census[str(n)] = scan
    if cfg_hash is None:
        blob = json.dumps({"n": list(dims), "seed": seed}, sort_keys=True)
        cfg_hash = hashlib.sha256(blob.encode()).hexdigest()
    out = Path(args.out) if args.out else Path("laxtop-runs") / f"classify-{cfg_hash[:12]}"
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for n, scan in census.items():
        (out / f"census_n{n}.json").write_text(dump_report(scan))
        artifacts.append(f"census_n{n}.json")
    report = {
        "tool": "laxtop", "version": __version__, "subcommand": "classify",
        "config_sha256": cfg_hash, "ok": chk.ok, "checks": chk.rows, "failures": chk.failures,
        "results": {n: {"families": s["families"], "expected": s["expected"], "patterns": len(s["rows"])}
                    for n, s in census.items()},
        "artifacts": artifacts,
    }
    (out / "report.json").write_text(dump_report(report))
    return (EXIT_OK if chk.ok else EXIT_FAIL), report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="laxtop", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"laxtop {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in [*SUBCOMMANDS, "classify"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "classify", help="scenario YAML file")
        p.add_argument("--out", help="output directory (default: laxtop-runs/<command>-<hash>)")
        p.add_argument("--tol", type=float, help="integrator tolerance override")
        p.add_argument("--seed", type=int, help="random seed override")
        p.add_argument("--cadence", type=float, help="sample spacing override")
        p.add_argument("--backend", choices=sorted(_backend.BACKENDS), help="integrator backend")
        if name == "classify":
            p.add_argument("--n", type=int, nargs="+", help="dimensions to census (default 3 4 5 6)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "classify":
            code, report = run_classify(args)
            sys.stdout.write(dump_report(report))
            return code
        overrides = {"tol": args.tol, "seed": args.seed, "cadence": args.cadence}
        sc = load_scenario(args.config, overrides)
        out = Path(args.out) if args.out else Path("laxtop-runs") / f"{args.command}-{sc.sha256[:12]}"
        out.mkdir(parents=True, exist_ok=True)
        base = {
            "tool": "laxtop", "version": __version__, "subcommand": args.command,
            "config_sha256": sc.sha256, "case": sc.case, "backend": args.backend or _backend.DEFAULT,
        }
        try:
            chk, results, artifacts = SUBCOMMANDS[args.command](sc, out, args.backend)
            code = EXIT_OK if chk.ok else EXIT_FAIL
            report = {**base, "ok": chk.ok, "checks": chk.rows, "failures": chk.failures,
                      "results": results, "artifacts": artifacts}
        except (IntegrationError, apelrot.DegenerateDivisor) as exc:
            code = EXIT_NUMERIC
            report = {**base, "ok": False, "checks": [], "failures": ["numerics"],
                      "results": {"error": f"{type(exc).__name__}: {exc}"}, "artifacts": []}
        text = dump_report(report)
        (out / "report.json").write_text(text)
        sys.stdout.write(text)
        return code
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        sys.stdout.write(dump_report({
            "tool": "laxtop", "version": __version__, "subcommand": args.command, "ok": False,
            "failures": ["config"],
            "error": {"message": exc.message, "field": exc.field, "line": exc.line, "source": exc.source},
        }))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
