"""Two-mode gain/loss model: parameter reduction, spectrum and eigenbasis.

The reduced dynamics is i d/dt (c1, c2) = M (c1, c2) with

    M = [[-a, g], [g, a]],   a = omega + i gamma / 2,

whose eigenvalues are -lambda, +lambda with lambda^2 = a^2 + g^2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import AtExceptionalPoint, GlobalFactorOverflow, InvalidConfig

EP_CUTOFF = 1e-24


@dataclass(frozen=True)
class RawParams:
    """Lab-frame mode frequencies, decay rates and coupling."""

    omega1: float
    omega2: float
    gamma1: float
    gamma2: float
    g: float

    def __post_init__(self):
        for name in ("omega1", "omega2", "gamma1", "gamma2", "g"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidConfig("must be finite", name)


@dataclass(frozen=True)
class ReducedParams:
    """Detuning, gain-loss asymmetry, coupling, and the common frequency/decay."""

    omega: float
    gamma: float
    g: float
    Omega: float = 0.0
    Gamma: float = 0.0

    @property
    def a(self):
        return self.omega + 0.5j * self.gamma


def reduce(raw: RawParams) -> ReducedParams:
    return ReducedParams(
        omega=0.5 * (raw.omega2 - raw.omega1),
        gamma=0.5 * (raw.gamma1 - raw.gamma2),
        g=raw.g,
        Omega=0.5 * (raw.omega2 + raw.omega1),
        Gamma=0.5 * (raw.gamma2 + raw.gamma1),
    )


def restore_global_factor(t, beta, Omega, Gamma):
    """Multiply reduced-frame amplitudes by exp(-i int_0^t (Omega - i Gamma/2)).

    `beta` has time along its first axis; Omega and Gamma are scalars or
    arrays on the same grid.
    """
    t = np.asarray(t, dtype=float)
    beta = np.asarray(beta, dtype=complex)
    rate = np.broadcast_to(np.asarray(Omega, float) - 0.5j * np.asarray(Gamma, float), t.shape)
    if t.size < 2:
        phase = np.zeros_like(rate)
    elif t.size == 2:
        phase = np.array([0.0, 0.5 * (rate[0] + rate[1]) * (t[1] - t[0])])
    else:
        # cumulative_simpson drops imaginary parts, so integrate them separately
        phase = cumulative_simpson(rate.real, x=t, initial=0.0) + 1j * cumulative_simpson(rate.imag, x=t, initial=0.0)
    expo = -1j * phase
    if np.any(np.abs(expo.real) > 700.0):
        raise GlobalFactorOverflow("common factor exponent exceeds 700; rescale beta first")
    factor = np.exp(expo)
    return factor.reshape(factor.shape + (1,) * (beta.ndim - 1)) * beta


@dataclass(frozen=True)
class SpectralFrame:
    """Instantaneous eigen-data at one time.

    lam is the eigenvalue of r_plus (r_minus has -lam); theta is the complex
    mixing angle with cos(theta) = a/lam, sin(theta) = -g/lam.
    """

    lam: complex
    theta: complex
    r_minus: np.ndarray
    r_plus: np.ndarray
    f: complex
    epsilon: float

    @property
    def half_phase(self) -> complex:
        """exp(i theta / 2)."""
        return cmath.exp(0.5j * self.theta)

    def left_vectors(self):
        # M is complex symmetric, so left eigenvectors are the transposes
        return self.r_minus.copy(), self.r_plus.copy()


def _pick(value, ref):
    if ref is not None and abs(value - ref) > abs(value + ref):
        return -value
    return value


def spectral_frame(p: ReducedParams, p_dot: ReducedParams, prev: SpectralFrame | None = None) -> SpectralFrame:
    """Eigenvalue, eigenvectors, coupling f and adiabaticity for one instant."""
    a = p.omega + 0.5j * p.gamma
    a_dot = p_dot.omega + 0.5j * p_dot.gamma
    lam2 = a * a + p.g * p.g
    scale = p.omega**2 + 0.25 * p.gamma**2 + p.g**2
    if abs(lam2) <= EP_CUTOFF * scale:
        raise AtExceptionalPoint(f"|lambda|^2={abs(lam2):.3e} at omega={p.omega}, gamma={p.gamma}, g={p.g}")
    lam = _pick(cmath.sqrt(lam2), None if prev is None else prev.lam)

    e_itheta = (a - 1j * p.g) / lam
    h = cmath.sqrt(e_itheta)
    if prev is not None:
        h = _pick(h, prev.half_phase)
    theta = -2j * cmath.log(h)
    if prev is not None:
        k = round((prev.theta.real - theta.real) / (4 * math.pi))
        theta += 4 * math.pi * k
    c = 0.5 * (h + 1 / h)
    s = -0.5j * (h - 1 / h)
    f = (p.g * a_dot - a * p_dot.g) / (2j * lam2)
    return SpectralFrame(
        lam=lam,
        theta=theta,
        r_minus=np.array([c, s]),
        r_plus=np.array([-s, c]),
        f=f,
        epsilon=abs(f / (2 * lam)),
    )


def model_matrix(p: ReducedParams) -> np.ndarray:
    a = p.omega + 0.5j * p.gamma
    return np.array([[-a, p.g], [p.g, a]])


def coupling(omega, gamma, g, d_omega, d_gamma, d_g):
    """Non-adiabatic coupling f, elementwise; branch free."""
    a = omega + 0.5j * gamma
    a_dot = d_omega + 0.5j * d_gamma
    return (g * a_dot - a * d_g) / (2j * (a * a + g * g))


def continue_branch(roots, ref=None):
    """Flip signs of square roots so that consecutive samples stay continuous.

    `roots` holds one choice of sqrt per sample along a finely sampled curve;
    the returned array satisfies |w[k+1] - w[k]| <= |w[k+1] + w[k]|.
    """
    w = np.asarray(roots, dtype=complex)
    if w.size == 0:
        return w
    flip = np.abs(w[1:] - w[:-1]) > np.abs(w[1:] + w[:-1])
    sign = np.concatenate([[1.0], np.where(flip, -1.0, 1.0)]).cumprod()
    if ref is not None and abs(w[0] - ref) > abs(w[0] + ref):
        sign = -sign
    return w * sign


def ep_locations(gamma: float):
    """Exceptional points (omega, g) of the reduced model."""
    if gamma == 0:
        return [(0.0, 0.0)]
    return [(0.0, 0.5 * gamma), (0.0, -0.5 * gamma)]


@dataclass(frozen=True)
class CriticalTime:
    """Zero crossing of Im(lambda).

    sign = +1 when Im(lambda) increases through zero: the adiabatic fixed
    point loses stability there. sign = -1: the non-adiabatic one does.
    """

    t: float
    sign: int
    slope: float

    @property
    def unstable(self) -> str:
        return "ad" if self.sign > 0 else "nad"
