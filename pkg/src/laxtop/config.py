"""Scenario files: YAML with exact ``sqrt(k)`` arithmetic and line-aware errors.

Numbers may be written as plain literals or as small expressions in
strings, e.g. ``"-sqrt(3)"`` or ``"0.1*sqrt(3)"``, so that razor-thin
conditions such as the Apel'rot relation survive the round trip.
"""
from __future__ import annotations

import ast
import hashlib
import json
import math
import operator
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml

from laxtop.dynamics import BodyParams3D, BodyParamsND, EPState, Params
from laxtop.lie import index_pairs

CASES = ("apelrot", "gyrostat", "so4", "custom-nd")
ENV_PREFIX = "LAXTOP_"


class ConfigError(ValueError):
    """Bad scenario file. ``field`` is a dotted path, ``line`` is 1-based when known."""

    def __init__(self, message: str, field: str = "", line: Optional[int] = None, source: str = ""):
        self.message, self.field, self.line, self.source = message, field, line, source
        where = source or "<config>"
        if line is not None:
            where += f":{line}"
        if field:
            where += f": {field}"
        super().__init__(f"{where}: {message}")


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def parse_number(text: Union[str, int, float]) -> float:
    """Evaluate a numeric literal or an expression in ``+ - * /``, parentheses and ``sqrt``."""
    if isinstance(text, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(text, (int, float)):
        return float(text)
    if not isinstance(text, str):
        raise ValueError(f"expected a number, got {type(text).__name__}")
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse number {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and type(node.value) in (int, float):
            return float(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id == "sqrt"
            and len(node.args) == 1
            and not node.keywords
        ):
            v = ev(node.args[0])
            if v < 0:
                raise ValueError(f"sqrt of negative number in {text!r}")
            return math.sqrt(v)
        raise ValueError(f"unsupported syntax in number {text!r}")

    try:
        return ev(tree)
    except ZeroDivisionError as exc:
        raise ValueError(f"division by zero in {text!r}") from exc


def _line_map(text: str) -> dict[str, int]:
    """Dotted field path -> 1-based line of its value."""
    out: dict[str, int] = {}

    def walk(node, path):
        out.setdefault(path, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = str(k.value)
                out[f"{path}.{key}" if path else key] = k.start_mark.line + 1
                walk(v, f"{path}.{key}" if path else key)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, f"{path}[{i}]")

    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return out
    if root is not None:
        walk(root, "")
    return out


@dataclass(eq=False)
class Scenario:
    case: str
    params: Params
    state: EPState
    t_end: float
    tol: float
    cadence: Optional[float]
    seed: int
    checks: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    resolved: dict = field(default_factory=dict)
    source: str = ""

    @property
    def sha256(self) -> str:
        blob = json.dumps(self.resolved, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


class _Reader:
    def __init__(self, data: dict, lines: dict[str, int], source: str):
        self.data, self.lines, self.source = data, lines, source

    def fail(self, path: str, message: str):
        probe = path
        line = self.lines.get(probe)
        while line is None and probe:
            probe = re.sub(r"(\.[^.\[]*|\[\d+\])$", "", probe)
            line = self.lines.get(probe)
        raise ConfigError(message, path, line, self.source)

    def get(self, path: str, default=...):
        node: Any = self.data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                if default is ...:
                    self.fail(path, "missing required field")
                return default
            node = node[part]
        return node

    def number(self, path: str, default=...) -> Optional[float]:
        v = self.get(path, default)
        if v is None or (default is not ... and v is default):
            return v
        try:
            return parse_number(v)
        except ValueError as exc:
            self.fail(path, str(exc))

    def vector(self, path: str, length: Optional[int] = None, default=...) -> Optional[np.ndarray]:
        v = self.get(path, default)
        if v is None or (default is not ... and v is default):
            return v
        if not isinstance(v, list):
            self.fail(path, "expected a list of numbers")
        out = []
        for i, item in enumerate(v):
            try:
                out.append(parse_number(item))
            except ValueError as exc:
                self.fail(f"{path}[{i}]", str(exc))
        if length is not None and len(out) != length:
            self.fail(path, f"expected {length} entries, got {len(out)}")
        return np.array(out)

    def skew(self, path: str, n: int, default=...) -> Optional[np.ndarray]:
        """Skew matrix from ``{"12": v, ...}`` (1-based pair keys) or a full list of rows."""
        v = self.get(path, default)
        if v is None or (default is not ... and v is default):
            return v
        A = np.zeros((n, n))
        if isinstance(v, dict):
            valid = {f"{i + 1}{j + 1}": (i, j) for i, j in index_pairs(n)}
            for key, item in v.items():
                key = str(key)
                if key not in valid:
                    self.fail(f"{path}.{key}", f"expected a pair key among {sorted(valid)}")
                try:
                    val = parse_number(item)
                except ValueError as exc:
                    self.fail(f"{path}.{key}", str(exc))
                i, j = valid[key]
                A[i, j], A[j, i] = val, -val
            return A
        if isinstance(v, list) and len(v) == n:
            for i, row in enumerate(v):
                if not isinstance(row, list) or len(row) != n:
                    self.fail(f"{path}[{i}]", f"expected a row of {n} numbers")
                for j, item in enumerate(row):
                    try:
                        A[i, j] = parse_number(item)
                    except ValueError as exc:
                        self.fail(f"{path}[{i}]", str(exc))
            if np.max(np.abs(A + A.T)) > 1e-14 * max(1.0, np.max(np.abs(A))):
                self.fail(path, "matrix is not skew-symmetric")
            return A
        self.fail(path, f"expected a mapping of pair keys or {n} rows")


def _pairs_out(A: np.ndarray) -> dict[str, float]:
    n = A.shape[0]
    return {f"{i + 1}{j + 1}": float(A[i, j]) for i, j in index_pairs(n) if A[i, j] != 0}


def _overrides(cli: Optional[dict]) -> dict:
    """CLI flags win over ``LAXTOP_*`` environment variables, which win over the file."""
    out = {}
    for key, conv in (("tol", float), ("seed", int), ("cadence", float), ("t_end", float)):
        env = os.environ.get(ENV_PREFIX + key.upper())
        if env is not None:
            try:
                out[key] = conv(parse_number(env)) if conv is float else int(env)
            except ValueError as exc:
                raise ConfigError(f"bad environment override: {exc}", ENV_PREFIX + key.upper())
    for key, val in (cli or {}).items():
        if val is not None:
            out[key] = val
    return out


def load_scenario(path: Union[str, Path], overrides: Optional[dict] = None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from exc
    return parse_scenario(text, str(path), overrides)


def parse_scenario(text: str, source: str = "<string>", overrides: Optional[dict] = None) -> Scenario:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(
            f"YAML syntax error: {getattr(exc, 'problem', exc)}",
            line=mark.line + 1 if mark else None, source=source,
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", source=source)
    rd = _Reader(data, _line_map(text), source)
    # imported here to keep config importable from apelrot/so4 without cycles
    from laxtop import apelrot, so4

    case = rd.get("case")
    if case not in CASES:
        rd.fail("case", f"unknown case {case!r}; expected one of {', '.join(CASES)}")
    ov = _overrides(overrides)
    t_end = ov.get("t_end", rd.number("t_end", 10.0))
    tol = ov.get("tol", rd.number("tol", 1e-10))
    cadence = ov.get("cadence", rd.number("cadence", None))
    seed = int(ov.get("seed", rd.get("seed", 0)))
    if t_end is None or t_end < 0:
        rd.fail("t_end", "must be nonnegative")
    if not 1e-14 <= tol <= 1e-3:
        rd.fail("tol", f"must lie in [1e-14, 1e-3], got {tol}")
    if cadence is not None and cadence <= 0:
        rd.fail("cadence", "must be positive")
    rng = np.random.default_rng(seed)
    resolved: dict[str, Any] = {"case": case, "t_end": t_end, "tol": tol, "cadence": cadence, "seed": seed}
    extra: dict[str, Any] = {}

    if case in ("apelrot", "gyrostat"):
        I = rd.vector("params.I", 3)
        r_C = rd.vector("params.r_C", 3)
        P = rd.vector("params.P", 3, None)
        if case == "gyrostat" and P is None:
            rd.fail("params.P", "gyrostat needs rotor momentum P")
        try:
            params = BodyParams3D(I, r_C, np.zeros(3) if P is None else P)
        except ValueError as exc:
            rd.fail("params", str(exc))
        chk = apelrot.check_apelrot(params)
        if not chk.ok:
            rd.fail("params", f"Apel'rot condition {chk.status} (residual {chk.residual:.3e})")
        if case == "gyrostat" and params.P[1] != 0:
            rd.fail("params.P", "the Lax form needs P2 = 0")
        resolved["params"] = {"I": I.tolist(), "r_C": r_C.tolist(), "P": params.P.tolist()}
        if rd.get("initial.random", False):
            state = apelrot.sample_hypersurface_state(params, rng)
            resolved["initial"] = {"random": True}
        else:
            g = rd.vector("initial.gamma", 3)
            om = rd.vector("initial.omega", 3, None)
            if om is not None:
                state = EPState.from_omega(om, g, params)
            else:
                state = EPState.from_vectors(rd.vector("initial.M", 3), g)
            resolved["initial"] = {"M": state.m_vec.tolist(), "gamma": g.tolist()}
    else:
        if case == "so4":
            vals = {k: rd.number(f"params.{k}") for k in ("a", "b", "X12", "X34")}
            try:
                sp = so4.So4CaseParams(**vals)
            except ValueError as exc:
                rd.fail("params", str(exc))
            params = sp.body()
            extra["C"] = sp.C
            resolved["params"] = vals
            if rd.get("params.X13", None) is not None:
                # perturbation for negative controls: breaks the pattern, keeps C
                X = params.X.copy()
                X[0, 2] = rd.number("params.X13")
                X[2, 0] = -X[0, 2]
                params = BodyParamsND(params.I, X)
                resolved["params"]["X13"] = float(X[0, 2])
        else:
            I = rd.vector("params.I")
            n = I.shape[0]
            if not 3 <= n <= 8:
                rd.fail("params.I", "dimension must be between 3 and 8")
            X = rd.skew("params.X", n)
            try:
                params = BodyParamsND(I, X)
            except ValueError as exc:
                rd.fail("params", str(exc))
            resolved["params"] = {"I": I.tolist(), "X": _pairs_out(X)}
        n = params.n
        if rd.get("initial.random", False):
            A, B = rng.normal(size=(2, n, n))
            state = EPState(A - A.T, B - B.T)
            resolved["initial"] = {"random": True}
        else:
            state = EPState(rd.skew("initial.M", n), rd.skew("initial.G", n))
            resolved["initial"] = {"M": _pairs_out(state.M), "G": _pairs_out(state.G)}

    checks = rd.get("checks", {}) or {}
    if not isinstance(checks, dict):
        rd.fail("checks", "expected a mapping of tolerance names to numbers")
    checks = {str(k): rd.number(f"checks.{k}") for k in checks}
    resolved["checks"] = checks
    for key in ("lambdas", "points", "n"):
        if key in data:
            extra[key] = data[key]
            resolved[key] = data[key]
    return Scenario(case, params, state, float(t_end), float(tol), cadence, seed, checks, extra, resolved, source)
