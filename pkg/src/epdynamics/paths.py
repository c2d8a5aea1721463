"""Parameter-space loops with analytic derivatives, and model lambda(t) curves.

A path maps time to (omega, gamma, g). The phase is

    phi(t) = direction * 2 pi t / T + phi0

and every closed-form kind also accepts complex t, which the delay
machinery uses for contour shifts and level-curve tracing.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path as FilePath

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidConfig
from .model import ReducedParams

KINDS = ("circular", "displaced-circular", "tilted-ellipse", "linear-oscillation", "sampled")
PATH_KEYS = ("kind", "r", "gamma", "T", "periods", "phi0", "direction", "g_offset", "e", "theta_aa", "L", "samples")
REQUIRED = {
    "circular": ("r",),
    "displaced-circular": ("r", "g_offset"),
    "tilted-ellipse": ("r", "e", "theta_aa"),
    "linear-oscillation": ("L",),
    "sampled": ("samples",),
}


def _real(d, key, default=None):
    if key not in d:
        if default is None:
            raise InvalidConfig("missing required field", key)
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidConfig(f"expected a number, got {v!r}", key)
    v = float(v)
    if not math.isfinite(v):
        raise InvalidConfig("must be finite", key)
    return v


@dataclass(frozen=True)
class PathConfig:
    kind: str
    T: float
    direction: int = 1
    periods: int = 1
    gamma: float = 1.0
    phi0: float = 0.0
    r: float = 0.0
    g_offset: float = 0.0
    e: float = 0.0
    theta_aa: float = 0.0
    L: float = 0.0
    samples: dict | None = field(default=None, compare=False)

    @classmethod
    def from_dict(cls, d: dict) -> PathConfig:
        if not isinstance(d, dict):
            raise InvalidConfig("path configuration must be a JSON object")
        unknown = sorted(set(d) - set(PATH_KEYS))
        if unknown:
            raise InvalidConfig(f"unknown key(s) {unknown}", unknown[0])
        kind = d.get("kind")
        if kind not in KINDS:
            raise InvalidConfig(f"must be one of {list(KINDS)}, got {kind!r}", "kind")
        for key in REQUIRED[kind]:
            if key not in d:
                raise InvalidConfig(f"required for kind {kind!r}", key)
        T = _real(d, "T")
        if T <= 0:
            raise InvalidConfig("must be positive", "T")
        periods = d.get("periods", 1)
        if isinstance(periods, bool) or not isinstance(periods, int) or periods < 1:
            raise InvalidConfig("must be a positive integer", "periods")
        direction = d.get("direction")
        if kind != "sampled":
            if direction not in (1, -1):
                raise InvalidConfig("must be +1 or -1 (no default orientation)", "direction")
        else:
            direction = 1 if direction is None else direction
        kw = dict(kind=kind, T=T, periods=periods, direction=int(direction))
        kw["gamma"] = _real(d, "gamma", 1.0)
        kw["phi0"] = _real(d, "phi0", 0.0)
        kw["g_offset"] = _real(d, "g_offset", 0.0)
        if kind in ("circular", "displaced-circular", "tilted-ellipse"):
            kw["r"] = _real(d, "r")
            if kw["r"] <= 0:
                raise InvalidConfig("must be positive", "r")
        if kind == "tilted-ellipse":
            kw["e"] = _real(d, "e")
            if not 0.0 <= kw["e"] < 1.0:
                raise InvalidConfig("ellipticity must lie in [0, 1)", "e")
            kw["theta_aa"] = _real(d, "theta_aa")
        if kind == "linear-oscillation":
            kw["L"] = _real(d, "L")
        if kind == "sampled":
            kw["samples"] = _check_samples(d["samples"], T)
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        keep = {"kind", "T", "periods", "gamma", "phi0"} | set(REQUIRED[self.kind])
        if self.kind != "sampled":
            keep.add("direction")
        if self.kind == "linear-oscillation":
            keep.add("g_offset")
        return {k: v for k, v in d.items() if k in keep}


def _check_samples(s, T):
    if not isinstance(s, dict):
        raise InvalidConfig("expected an object with t, omega, g (and optionally gamma)", "samples")
    extra = sorted(set(s) - {"t", "omega", "gamma", "g"})
    if extra:
        raise InvalidConfig(f"unknown key(s) {extra}", "samples")
    try:
        t = np.asarray(s["t"], float)
        om = np.asarray(s["omega"], float)
        g = np.asarray(s["g"], float)
    except KeyError as exc:
        raise InvalidConfig(f"missing {exc.args[0]!r}", "samples") from None
    gam = np.asarray(s.get("gamma", np.ones_like(t)), float)
    if gam.ndim == 0:
        gam = np.full_like(t, float(gam))
    if not (t.shape == om.shape == g.shape == gam.shape) or t.ndim != 1:
        raise InvalidConfig("t, omega, gamma, g must be equal-length lists", "samples")
    if not np.all(np.isfinite(np.concatenate([t, om, g, gam]))):
        raise InvalidConfig("samples must be finite", "samples")
    if t.size < 4 or np.any(np.diff(t) <= 0):
        raise InvalidConfig("sample times must be strictly increasing (>= 4 samples)", "samples")
    span = t[-1] - t[0]
    if t.size - 1 < 4 * max(span / T, 1.0):
        raise InvalidConfig("need at least 4 samples per period", "samples")
    return {"t": t.tolist(), "omega": om.tolist(), "gamma": gam.tolist(), "g": g.tolist()}


def load_config(source) -> PathConfig:
    """PathConfig from a dict, a JSON string or a file path."""
    if isinstance(source, PathConfig):
        return source
    if isinstance(source, dict):
        return PathConfig.from_dict(source)
    text = str(source)
    if not text.lstrip().startswith("{"):
        text = FilePath(text).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return PathConfig.from_dict(d)


class ParameterPath:
    """Closed-form or sampled loop through (omega, gamma, g) space."""

    def __init__(self, config: PathConfig | dict):
        if isinstance(config, dict):
            config = PathConfig.from_dict(config)
        self.config = config
        self.kind = config.kind
        self.T = config.T
        self.periods = config.periods
        self.duration = config.periods * config.T
        self.gamma = config.gamma
        self.analytic = config.kind != "sampled"
        self._w = config.direction * 2 * math.pi / config.T
        if config.kind == "sampled":
            s = config.samples
            self._t = np.asarray(s["t"])
            self._splines = [CubicSpline(self._t, np.asarray(s[k])) for k in ("omega", "gamma", "g")]
            self._h = 1e-3 * float(np.min(np.diff(self._t)))

    def phase(self, t):
        return self._w * t + self.config.phi0

    def params(self, t):
        """(omega, gamma, g) at time(s) t; complex t allowed for closed forms."""
        c = self.config
        if c.kind == "sampled":
            t = np.asarray(t, float)
            return tuple(sp(t) for sp in self._splines)
        phi = self.phase(t)
        gam = c.gamma + 0 * phi
        if c.kind in ("circular", "displaced-circular"):
            return c.r * np.sin(phi), gam, 0.5 * c.gamma + c.r * np.cos(phi) + c.g_offset
        if c.kind == "tilted-ellipse":
            rho = self._radius(phi)
            return rho * np.sin(phi), gam, 0.5 * c.gamma + rho * np.cos(phi) + c.g_offset
        return -c.L * np.sin(phi), gam, 0.5 * c.gamma + c.g_offset + 0 * phi

    def derivs(self, t):
        """Time derivatives (d omega, d gamma, d g)."""
        c = self.config
        w = self._w
        if c.kind == "sampled":
            t = np.asarray(t, float)
            h = self._h
            out = []
            for sp in self._splines:
                # fourth-order central difference
                out.append((sp(t - 2 * h) - 8 * sp(t - h) + 8 * sp(t + h) - sp(t + 2 * h)) / (12 * h))
            return tuple(out)
        phi = self.phase(t)
        zero = 0 * phi
        if c.kind in ("circular", "displaced-circular"):
            return c.r * w * np.cos(phi), zero, -c.r * w * np.sin(phi)
        if c.kind == "tilted-ellipse":
            rho = self._radius(phi)
            drho = self._radius_slope(phi)
            return (
                w * (drho * np.sin(phi) + rho * np.cos(phi)),
                zero,
                w * (drho * np.cos(phi) - rho * np.sin(phi)),
            )
        return -c.L * w * np.cos(phi), zero, zero

    def _radius(self, phi):
        c = self.config
        return c.r * (1 - c.e**2) / (1 + c.e * np.cos(phi + c.theta_aa))

    def _radius_slope(self, phi):
        c = self.config
        den = 1 + c.e * np.cos(phi + c.theta_aa)
        return c.r * (1 - c.e**2) * c.e * np.sin(phi + c.theta_aa) / den**2

    def pole_height(self) -> float:
        """Distance from the real t axis to the nearest singularity of the
        parametrization (the tilted ellipse radius has poles off the axis)."""
        if self.kind == "tilted-ellipse" and self.config.e > 0:
            return math.acosh(1.0 / self.config.e) / abs(self._w)
        return math.inf

    def reduced(self, t: float) -> ReducedParams:
        om, gam, g = self.params(t)
        return ReducedParams(float(om), float(gam), float(g))

    def reduced_dot(self, t: float) -> ReducedParams:
        om, gam, g = self.derivs(t)
        return ReducedParams(float(om), float(gam), float(g))

    def lam_sq(self, z):
        om, gam, g = self.params(z)
        a = om + 0.5j * gam
        return a * a + g * g

    def lam_sq_dot(self, z):
        om, gam, g = self.params(z)
        dom, dgam, dg = self.derivs(z)
        return 2 * (om + 0.5j * gam) * (dom + 0.5j * dgam) + 2 * g * dg

    def __repr__(self):
        return f"ParameterPath({self.config.to_dict()})"


def make_path(config) -> ParameterPath:
    return ParameterPath(load_config(config))


# --- model lambda(t) curves -------------------------------------------------


class LambdaPrototype:
    """Explicit lambda(t) and f(t), analytic in complex t.

    Subclasses provide `lam`, `lam_dot`, `f` and a default integration
    `domain`; `period` is the repeat time of lambda (None if aperiodic).
    """

    kind = "prototype"
    analytic = True
    period = None

    def lam_sq(self, z):
        return self.lam(z) ** 2

    def lam_complex(self, z, ref=None):
        return self.lam(np.asarray(z, complex))

    def lam_f(self, t):
        return complex(self.lam(t)), complex(self.f(t))

    def f(self, t):
        return self.f_star + 0 * np.asarray(t, dtype=complex)

    def f_complex(self, z):
        return self.f(z)

    def epsilon(self, t):
        return np.abs(self.f(t) / (2 * self.lam(t)))


@dataclass(frozen=True)
class CircularLambda(LambdaPrototype):
    """lambda = i sqrt(r gamma) exp(-i pi t / T), f = i pi / (2T)."""

    r: float
    gamma: float
    T: float
    kind = "circular"

    @property
    def f_star(self):
        return 0.5j * math.pi / self.T

    @property
    def eps(self):
        return math.pi / (4 * math.sqrt(self.r * self.gamma) * self.T)

    @property
    def period(self):
        return 2 * self.T

    @property
    def domain(self):
        return (0.0, 4 * self.T)

    def lam(self, t):
        return 1j * math.sqrt(self.r * self.gamma) * np.exp(-1j * math.pi * np.asarray(t) / self.T)

    def lam_dot(self, t):
        return (-1j * math.pi / self.T) * self.lam(t)

    def psi_exact(self, t):
        """Psi about t* = 3T/2 in closed form."""
        return (1j * np.exp(-1j * math.pi * np.asarray(t) / self.T) + 1) / (2 * self.eps)


@dataclass(frozen=True)
class LinearLambda(LambdaPrototype):
    """lambda = lam_re + i lam_dot_im t with constant coupling f_star."""

    lam_re: float
    lam_dot_im: float
    f_star: complex
    kind = "linear"

    @property
    def domain(self):
        half = 4 * abs(self.lam_re / self.lam_dot_im) + 12 / math.sqrt(abs(self.lam_dot_im))
        return (-half, half)

    def lam(self, t):
        return self.lam_re + 1j * self.lam_dot_im * np.asarray(t)

    def lam_dot(self, t):
        return 1j * self.lam_dot_im + 0 * np.asarray(t, dtype=complex)

    def psi_exact(self, t):
        t = np.asarray(t)
        return -2j * self.lam_re * t + self.lam_dot_im * t * t


@dataclass(frozen=True)
class EllipticalLambda(LambdaPrototype):
    """lambda = lam_re cos(pi t/T) + i (T lam_dot_im / pi) sin(pi t/T)."""

    lam_re: float
    lam_dot_im: float
    T: float
    f_star: complex
    kind = "elliptical"

    @property
    def period(self):
        return 2 * self.T

    @property
    def domain(self):
        return (-self.T, 3 * self.T)

    def lam(self, t):
        x = math.pi * np.asarray(t) / self.T
        return self.lam_re * np.cos(x) + 1j * (self.T * self.lam_dot_im / math.pi) * np.sin(x)

    def lam_dot(self, t):
        x = math.pi * np.asarray(t) / self.T
        return -(math.pi / self.T) * self.lam_re * np.sin(x) + 1j * self.lam_dot_im * np.cos(x)


def _complex_field(d, key):
    v = d[key]
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    raise InvalidConfig("expected a number or [re, im]", key)


def prototype_lambda(kind: str, **params) -> LambdaPrototype:
    """Build a lambda(t) prototype: circular(r, gamma, T), linear(lam_re,
    lam_dot_im, f_star) or elliptical(lam_re, lam_dot_im, T, f_star)."""
    try:
        if kind == "circular":
            proto = CircularLambda(float(params["r"]), float(params.get("gamma", 1.0)), float(params["T"]))
        elif kind == "linear":
            proto = LinearLambda(float(params["lam_re"]), float(params["lam_dot_im"]), _complex_field(params, "f_star"))
        elif kind == "elliptical":
            proto = EllipticalLambda(float(params["lam_re"]), float(params["lam_dot_im"]), float(params["T"]), _complex_field(params, "f_star"))
        else:
            raise InvalidConfig(f"unknown prototype {kind!r}", "prototype")
    except KeyError as exc:
        raise InvalidConfig("missing required field", exc.args[0]) from None
    for name, v in vars(proto).items():
        if not np.isfinite(v):
            raise InvalidConfig("must be finite", name)
    if getattr(proto, "T", 1.0) <= 0:
        raise InvalidConfig("must be positive", "T")
    return proto


def load_prototype(d: dict) -> LambdaPrototype:
    d = dict(d)
    kind = d.pop("prototype", None)
    return prototype_lambda(kind, **d)
