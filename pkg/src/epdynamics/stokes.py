"""Closed-form solution for the circular loop in the small-radius limit.

In the circular basis (1, i)/sqrt(2), (1, -i)/sqrt(2) the ratio p of the two
amplitudes obeys, along omega = r sin(phi), g = gamma/2 + r cos(phi),

    dp/dt = r e^{i phi} + (gamma + r e^{-i phi}) p^2,

exactly. Dropping r e^{-i phi} against gamma (r << gamma) leaves a Riccati
equation whose linearization is Bessel's equation of order zero in

    zeta = i sqrt(r gamma) (2 / |phi_dot|) e^{i phi / 2},

so p = (i phi_dot / (2 gamma)) zeta C1(zeta) / C0(zeta) with C_n a fixed
combination of J_n and Y_n. The Y functions are continued in arg(zeta)
as phi winds, so the solution stays smooth over many periods.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .asymptotics import fixed_points, unit_crossings
from .errors import InvalidConfig, PoleAtInput, ValidityWarning
from .paths import ParameterPath, make_path
from .propagator import propagate_R
from .special import bessel_jy
from .spectrum import Spectrum, critical_times

VALIDITY_R = 0.2
POLE_TINY = 1e-300


def mobius_R_to_p(R, theta_phase):
    """p = e^{i theta} (1 + iR) / (1 - iR); `theta_phase` is e^{i theta}."""
    R = complex(R)
    den = 1 - 1j * R
    if abs(den) < POLE_TINY:
        raise PoleAtInput("R = -i maps to p = infinity")
    return complex(theta_phase) * (1 + 1j * R) / den


def mobius_p_to_R(p, theta_phase):
    """R = i (1 - e^{-i theta} p) / (1 + e^{-i theta} p)."""
    w = complex(p) / complex(theta_phase)
    den = 1 + w
    if abs(den) < POLE_TINY:
        raise PoleAtInput("p = -e^{i theta} maps to R = infinity")
    return 1j * (1 - w) / den


@dataclass(frozen=True)
class CircularBasisState:
    """Integration constant of the closed-form solution, fixed at t0."""

    t0: float
    p0: complex
    zeta0: complex
    cY_over_cJ: complex
    kappa: complex
    phi_dot: float
    gamma: float


def _circular_path(path) -> ParameterPath:
    if not isinstance(path, ParameterPath):
        path = make_path(path)
    c = path.config
    if c.kind != "circular" and not (c.kind == "displaced-circular" and c.g_offset == 0.0):
        raise InvalidConfig(f"closed-form solution needs a circular path centred on the EP, got kind {c.kind!r}", "kind")
    if c.r > VALIDITY_R * c.gamma:
        warnings.warn(ValidityWarning(f"r/gamma = {c.r / c.gamma:.3g} > {VALIDITY_R}: the small-radius reduction is not accurate"))
    return path


def _zeta(path: ParameterPath, t):
    """zeta(t) and the continuous argument of zeta."""
    c = path.config
    phi = path.phase(np.asarray(t, float))
    kappa_abs = 2 * math.sqrt(c.r * c.gamma) / abs(path._w)
    arg = 0.5 * math.pi + 0.5 * phi
    return kappa_abs * np.exp(1j * arg), arg


def theta_phase(path, t, spectrum: Spectrum | None = None, reduced=True):
    """e^{i theta(t)} = (a - i g) / lambda on the continuous branch of lambda.

    Along the circle a - i g = -i r e^{i phi}. With reduced=True lambda is
    replaced by sqrt(r gamma) e^{i phi/2} (same branch), which drops the same
    r/gamma term as the reduced p equation; mixing the exact angle with the
    reduced solution misplaces R by O(r/gamma), the size of R_ad itself.
    """
    spec = spectrum if spectrum is not None else Spectrum(path)
    t = np.asarray(t, float)
    om, gam, g = path.params(t)
    lam = spec.lam(t)
    if reduced:
        c = path.config
        lam0 = math.sqrt(c.r * c.gamma) * np.exp(0.5j * path.phase(t))
        lam = np.where(np.abs(lam0 - lam) <= np.abs(lam0 + lam), lam0, -lam0)
    return (om + 0.5j * gam - 1j * g) / lam


def circular_state(path, t0, p0) -> CircularBasisState:
    path = _circular_path(path)
    c = path.config
    z0, arg0 = _zeta(path, t0)
    z0, arg0 = complex(z0), float(arg0)
    j0, j1, y0, y1 = bessel_jy(z0, sheet=arg0)
    w = path._w
    q0 = c.gamma * complex(p0)
    num = 2j * q0 * j0 + w * z0 * j1
    den = 2j * q0 * y0 + w * z0 * y1
    if abs(den) < POLE_TINY:
        raise PoleAtInput("initial condition is pure J (c_J = 0 is not representable)")
    return CircularBasisState(float(t0), complex(p0), z0, -num / den, z0 / cmath.exp(0.5j * path.phase(t0)), w, c.gamma)


def exact_p(path, t, t0, p0):
    """p(t) from p(t0) along a circular path (small-radius closed form)."""
    path = _circular_path(path)
    st = circular_state(path, t0, p0)
    z, arg = _zeta(path, t)
    z = np.atleast_1d(z)
    arg = np.atleast_1d(arg)
    out = np.empty(z.size, complex)
    ratio = st.cY_over_cJ
    for i, (zi, ai) in enumerate(zip(z, arg)):
        j0, j1, y0, y1 = bessel_jy(complex(zi), sheet=float(ai))
        c0 = j0 + ratio * y0
        c1 = j1 + ratio * y1
        out[i] = (0.5j * st.phi_dot / st.gamma) * zi * c1 / c0
    return out if np.ndim(t) else complex(out[0])


def exact_R(path, t, t0, R0, spectrum: Spectrum | None = None, reduced_angle=True):
    """R(t) of the closed-form solution, starting from R(t0) = R0."""
    path = _circular_path(path)
    spec = spectrum if spectrum is not None else Spectrum(path)
    t = np.atleast_1d(np.asarray(t, float))
    e0 = complex(theta_phase(path, [t0], spec, reduced_angle)[0])
    p = exact_p(path, t, t0, mobius_R_to_p(R0, e0))
    e = theta_phase(path, t, spec, reduced_angle)
    return np.array([mobius_p_to_R(pi, ei) for pi, ei in zip(p, e)])


def stokes_asymptotic_R(path, t, t_star=None, spectrum: Spectrum | None = None):
    """First-order Stokes form R_ad(t) - 2 Theta(t - t*) exp(-u(t) / (2 eps)),
    u = exp(i (phi(t) - phi(t*)) / 2), about the crit t* where R_ad loses
    stability (the first such crit in the path's duration when omitted)."""
    path = _circular_path(path)
    spec = spectrum if spectrum is not None else Spectrum(path)
    c = path.config
    if t_star is None:
        crits = [k.t for k in critical_times(spec) if k.sign > 0]
        if not crits:
            raise InvalidConfig("no crit where the adiabatic point loses stability", "T")
        t_star = crits[0]
    eps = math.pi / (4 * math.sqrt(c.r * c.gamma) * c.T)
    t = np.atleast_1d(np.asarray(t, float))
    lam = spec.lam(t)
    f = spec.f(t)
    r_ad = np.array([fixed_points(li, fi).R_ad for li, fi in zip(lam, f)])
    u = np.exp(0.5j * (path.phase(t) - path.phase(t_star)))
    step = np.where(t > t_star, 1.0, 0.0)
    return r_ad - 2 * step * np.exp(-u / (2 * eps))


@dataclass
class OracleReport:
    grid: list
    logR_numeric: list
    logR_exact: list
    max_abs_log_diff: float
    coverage_fraction: float
    tolerance: float = 0.1
    excluded_window: float = 0.02

    def to_dict(self):
        return {
            "grid": self.grid,
            "logR_numeric": self.logR_numeric,
            "logR_exact": self.logR_exact,
            "max_abs_log_diff": self.max_abs_log_diff,
            "coverage_fraction": self.coverage_fraction,
            "tolerance": self.tolerance,
            "excluded_window": self.excluded_window,
        }


def compare_with_numeric(path, R0=0j, n_grid=4001, tol=1e-10, log_tol=0.1, window=0.02) -> OracleReport:
    """log10|R| of the closed form against Riccati integration on one grid.

    coverage_fraction is the share of grid points (outside `window`*T of a
    |R| = 1 crossing of either solution) where the two agree within log_tol.
    Points where either |R| is exactly 0 (the usual start R0 = 0) are skipped.
    """
    path = _circular_path(path)
    spec = Spectrum(path)
    grid = np.linspace(0.0, path.duration, n_grid)
    num = propagate_R(spec, R0, grid, tol=tol).log10_abs_R
    with np.errstate(divide="ignore"):
        ex = np.log10(np.abs(exact_R(path, grid, 0.0, R0, spec)))
    keep = np.isfinite(num) & np.isfinite(ex)
    for tc in unit_crossings(grid, num) + unit_crossings(grid, ex):
        keep &= np.abs(grid - tc) > window * path.T
    diff = np.where(keep, np.abs(num - ex), 0.0)
    cover = float(np.mean(diff[keep] <= log_tol)) if keep.any() else 0.0
    return OracleReport(
        grid=grid.tolist(),
        logR_numeric=num.tolist(),
        logR_exact=ex.tolist(),
        max_abs_log_diff=float(np.max(diff[keep])) if keep.any() else math.nan,
        coverage_fraction=cover,
        tolerance=log_tol,
        excluded_window=window,
    )
