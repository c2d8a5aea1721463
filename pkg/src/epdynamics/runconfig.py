"""Run configuration files: a path (or lambda prototype) plus per-command settings.

A run file is a JSON object

    {"name": ..., "path": {<path config>} | "prototype": {<prototype config>},
     "run": {...}, "delay": {...}, "noise": {...}, "oracle": {...}}

Times in the sections are in units of the loop time T. A bare path config
(an object with a "kind" key) is accepted as {"path": <it>}. Unknown keys
are rejected everywhere.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import InvalidConfig
from .paths import PathConfig, load_prototype, make_path
from .spectrum import Spectrum

TOP_KEYS = {"name", "description", "path", "prototype", "run", "delay", "noise", "oracle"}
SECTION_KEYS = {
    "run": {"t0_T", "t1_T", "grid", "tol", "init"},
    "delay": {"sweep", "crit_window_T", "with_maximal", "numeric"},
    "noise": {"N", "n_traj", "seed", "steps_per_T", "record_every", "batch", "basis", "gamma", "t0_T", "t1_T"},
    "oracle": {"n_grid", "log_tol", "window"},
}
DEFAULTS = {
    "run": {"t0_T": 0.0, "t1_T": None, "grid": 4097, "tol": 1e-10, "init": {"c": [[1.0, 0.0], [0.0, 0.0]]}},
    "delay": {"sweep": None, "crit_window_T": [0.0, 1.0], "with_maximal": True, "numeric": True},
    "noise": {
        "N": 0.1,
        "n_traj": 1000,
        "seed": 0,
        "steps_per_T": 8192,
        "record_every": 8,
        "batch": 1000,
        "basis": "eigen",
        "gamma": None,
        "t0_T": None,
        "t1_T": None,
    },
    "oracle": {"n_grid": 4001, "log_tol": 0.1, "window": 0.02},
}


def _presets():
    return resources.files("epdynamics") / "presets"


def preset_names():
    return sorted(p.name[:-5] for p in _presets().iterdir() if p.name.endswith(".json"))


def _read_json(text, origin):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{origin}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def read_run_file(ref) -> dict:
    """Raw run dict from a file path, a preset name or a run manifest."""
    if isinstance(ref, dict):
        d = ref
    else:
        p = Path(str(ref))
        if p.is_file():
            d = _read_json(p.read_text(), str(p))
        elif str(ref) in preset_names():
            d = _read_json((_presets() / f"{ref}.json").read_text(), f"preset {ref}")
        else:
            raise InvalidConfig(f"no such file or preset: {ref!r} (presets: {', '.join(preset_names())})")
    if isinstance(d, dict) and "command" in d and "config" in d:
        d = d["config"]  # a manifest: re-run its resolved config
    if isinstance(d, dict) and "kind" in d:
        d = {"path": d}
    if not isinstance(d, dict):
        raise InvalidConfig("run configuration must be a JSON object")
    return d


def _section(d, name):
    raw = d.get(name) or {}
    if not isinstance(raw, dict):
        raise InvalidConfig("must be an object", name)
    unknown = sorted(set(raw) - SECTION_KEYS[name])
    if unknown:
        raise InvalidConfig(f"unknown key(s) {unknown}", f"{name}.{unknown[0]}")
    out = copy.deepcopy(DEFAULTS[name])
    out.update(raw)
    return out


def _number(sec, name, key, lo=None, integer=False, allow_none=False):
    v = sec[key]
    if v is None and allow_none:
        return None
    bad = isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int))
    if bad or not math.isfinite(v):
        raise InvalidConfig(f"expected {'an integer' if integer else 'a finite number'}, got {v!r}", f"{name}.{key}")
    if lo is not None and v < lo:
        raise InvalidConfig(f"must be >= {lo}", f"{name}.{key}")
    return v


@dataclass
class RunSpec:
    name: str
    raw: dict
    path: PathConfig | None
    prototype: dict | None
    run: dict
    delay: dict
    noise: dict
    oracle: dict

    def source(self, overrides=None):
        """Spectrum (or prototype) with optional parameter overrides."""
        if self.path is not None:
            d = self.path.to_dict()
            d.update(overrides or {})
            return Spectrum(make_path(d))
        d = dict(self.prototype)
        over = dict(overrides or {})
        if "eps" in over:
            # circular prototype: eps = pi / (4 sqrt(r gamma) T) fixes T
            if d.get("prototype") != "circular":
                raise InvalidConfig("eps can only be swept for the circular prototype", "delay.sweep")
            eps = float(over.pop("eps"))
            if eps <= 0:
                raise InvalidConfig("must be positive", "eps")
            d["T"] = math.pi / (4 * math.sqrt(float(d["r"]) * float(d.get("gamma", 1.0))) * eps)
        d.update(over)
        return load_prototype(d)

    def to_dict(self):
        out = {"name": self.name, "run": self.run, "delay": self.delay, "noise": self.noise, "oracle": self.oracle}
        if self.path is not None:
            out["path"] = self.path.to_dict()
        else:
            out["prototype"] = self.prototype
        return out


def time_unit(source) -> float:
    return float(getattr(source, "T", None) or 1.0)


def parse_sweep(text):
    """'param=lo:hi:n' (inclusive linear grid) or 'param=v1,v2,...'."""
    if not isinstance(text, str) or "=" not in text:
        raise InvalidConfig(f"expected param=lo:hi:n or param=v1,v2,..., got {text!r}", "sweep")
    name, spec = text.split("=", 1)
    name = name.strip()
    try:
        if ":" in spec:
            lo, hi, n = spec.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            lo, hi = float(lo), float(hi)
            values = [lo] if n == 1 else [lo + (hi - lo) * k / (n - 1) for k in range(n)]
        else:
            values = [float(v) for v in spec.split(",")]
    except ValueError:
        raise InvalidConfig(f"cannot parse sweep values {spec!r}", "sweep") from None
    if not name or not values:
        raise InvalidConfig("empty sweep", "sweep")
    return name, values


def load_run(ref) -> RunSpec:
    d = read_run_file(ref)
    unknown = sorted(set(d) - TOP_KEYS)
    if unknown:
        raise InvalidConfig(f"unknown key(s) {unknown}", unknown[0])
    if ("path" in d) == ("prototype" in d):
        raise InvalidConfig("give exactly one of 'path' and 'prototype'")
    path = PathConfig.from_dict(d["path"]) if "path" in d else None
    proto = None
    if "prototype" in d:
        if not isinstance(d["prototype"], dict):
            raise InvalidConfig("must be an object", "prototype")
        proto = dict(d["prototype"])
        load_prototype(proto)  # validate now
    run = _section(d, "run")
    _number(run, "run", "t0_T")
    _number(run, "run", "t1_T", allow_none=True)
    _number(run, "run", "grid", lo=2, integer=True)
    _number(run, "run", "tol", lo=1e-15)
    _check_init(run["init"])
    delay = _section(d, "delay")
    if delay["sweep"] is not None:
        parse_sweep(delay["sweep"])
    w = delay["crit_window_T"]
    if not (isinstance(w, list) and len(w) == 2 and all(isinstance(x, (int, float)) for x in w) and w[0] < w[1]):
        raise InvalidConfig("expected [lo, hi] with lo < hi", "delay.crit_window_T")
    noise = _section(d, "noise")
    _number(noise, "noise", "N", lo=0)
    _number(noise, "noise", "n_traj", lo=2, integer=True)
    _number(noise, "noise", "seed", lo=0, integer=True)
    _number(noise, "noise", "steps_per_T", lo=8192, integer=True)
    _number(noise, "noise", "record_every", lo=1, integer=True)
    _number(noise, "noise", "batch", lo=1, integer=True)
    _number(noise, "noise", "gamma", lo=0, allow_none=True)
    _number(noise, "noise", "t0_T", allow_none=True)
    _number(noise, "noise", "t1_T", allow_none=True)
    oracle = _section(d, "oracle")
    _number(oracle, "oracle", "n_grid", lo=2, integer=True)
    _number(oracle, "oracle", "log_tol", lo=0)
    _number(oracle, "oracle", "window", lo=0)
    name = d.get("name") or (Path(str(ref)).stem if not isinstance(ref, dict) else "run")
    return RunSpec(str(name), d, path, proto, run, delay, noise, oracle)


def _check_init(init):
    if init == "stable":
        return
    if isinstance(init, dict) and set(init) == {"c"}:
        c = init["c"]
        if isinstance(c, list) and len(c) == 2 and all(isinstance(x, list) and len(x) == 2 for x in c):
            if any(abs(complex(*x)) > 0 for x in c):
                return
    if isinstance(init, dict) and set(init) == {"R"}:
        r = init["R"]
        if isinstance(r, list) and len(r) == 2:
            return
    raise InvalidConfig('expected "stable", {"c": [[re, im], [re, im]]} or {"R": [re, im]}', "run.init")
