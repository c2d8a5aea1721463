"""Branch-continuous spectral data along a path, and critical times.

Both `Spectrum` (wrapping a ParameterPath) and the lambda prototypes expose
the same small interface used by the propagator and the asymptotics:

    lam(t), f(t), lam_dot(t), epsilon(t)   arrays over real t
    lam_f(t)                                scalar fast path (python complex)
    lam_sq(z), lam_complex(z, ref)          complex t (closed forms only)
    domain, period, analytic
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy.optimize import brentq

from .errors import AtExceptionalPoint, TangentCrossing
from .model import EP_CUTOFF, CriticalTime, continue_branch, coupling
from .paths import LambdaPrototype, ParameterPath, make_path


class Spectrum:
    """lambda(t) on the branch fixed by continuity from the principal root at t=0."""

    def __init__(self, path: ParameterPath, points_per_period: int = 8192, pad_periods: float = 1.0):
        self.path = path
        self.T = path.T
        self.period = path.T
        self.analytic = path.analytic
        self.domain = (0.0, path.duration)
        lo = -pad_periods * path.T if path.analytic else 0.0
        hi = path.duration + (pad_periods * path.T if path.analytic else 0.0)
        n = int(math.ceil((hi - lo) / path.T * points_per_period)) + 1
        self._t = np.linspace(lo, hi, n)
        self._h = self._t[1] - self._t[0]
        self._lo = lo
        lam2 = path.lam_sq(self._t)
        self._check_ep(lam2, self._t)
        roots = np.sqrt(lam2.astype(complex))
        # continuity both ways from t = 0, where the principal root is used
        i0 = int(np.argmin(np.abs(self._t)))
        fwd = continue_branch(roots[i0:], roots[i0])
        bwd = continue_branch(roots[: i0 + 1][::-1], roots[i0])[::-1]
        self._lam = np.concatenate([bwd[:-1], fwd])
        self._re = self._lam.real.copy()
        self._im = self._lam.imag.copy()

    def _check_ep(self, lam2, t):
        om, gam, g = self.path.params(t)
        scale = om**2 + 0.25 * gam**2 + g**2
        bad = np.abs(lam2) <= EP_CUTOFF * scale
        if np.any(bad):
            raise AtExceptionalPoint(f"path passes through an exceptional point near t={t[np.argmax(bad)]:.6g}")

    # reference branch -------------------------------------------------------
    def _ref(self, t):
        t = np.asarray(t, float)
        return np.interp(t, self._t, self._re) + 1j * np.interp(t, self._t, self._im)

    def lam(self, t):
        t = np.asarray(t, float)
        w = np.sqrt(np.asarray(self.path.lam_sq(t), complex))
        ref = self._ref(t)
        return np.where(np.abs(w - ref) > np.abs(w + ref), -w, w)

    def f(self, t):
        om, gam, g = self.path.params(t)
        return coupling(om, gam, g, *self.path.derivs(t))

    def lam_dot(self, t):
        return self.path.lam_sq_dot(t) / (2 * self.lam(t))

    def epsilon(self, t):
        return np.abs(self.f(t) / (2 * self.lam(t)))

    def lam_f(self, t):
        """(lambda, f) at scalar real t as python complex numbers."""
        x = (t - self._lo) / self._h
        i = min(max(int(x), 0), self._t.size - 2)
        u = x - i
        ref = complex(self._re[i] + u * (self._re[i + 1] - self._re[i]), self._im[i] + u * (self._im[i + 1] - self._im[i]))
        om, gam, g = self.path.params(t)
        dom, dgam, dg = self.path.derivs(t)
        a = complex(om, 0.5 * float(gam))
        lam2 = a * a + float(g) ** 2
        lam = cmath.sqrt(lam2)
        if abs(lam - ref) > abs(lam + ref):
            lam = -lam
        f = (float(g) * complex(dom, 0.5 * float(dgam)) - a * float(dg)) / (2j * lam2)
        return lam, f

    def lam_sq(self, z):
        return self.path.lam_sq(z)

    def f_complex(self, z):
        om, gam, g = self.path.params(z)
        return coupling(om, gam, g, *self.path.derivs(z))

    def lam_complex(self, z, ref=None):
        """lambda continued along a finely sampled curve z[0], z[1], ...

        The branch at z[0] is taken from the real-axis track (or `ref`).
        """
        z = np.asarray(z, complex)
        roots = np.sqrt(np.asarray(self.path.lam_sq(z), complex))
        if ref is None:
            ref = complex(self._ref(z[0].real))
            if abs(z[0].imag) > 0:
                # walk vertically from the real axis
                ys = np.linspace(0.0, z[0].imag, 257)
                col = self.lam_complex(z[0].real + 1j * ys)
                ref = col[-1]
        return continue_branch(roots, ref)


def as_source(obj):
    """Accept a Spectrum, prototype, ParameterPath or path config."""
    if isinstance(obj, (Spectrum, LambdaPrototype)):
        return obj
    if isinstance(obj, ParameterPath):
        return Spectrum(obj)
    return Spectrum(make_path(obj))


def critical_times(source, t0=None, t1=None, points_per_period=4096):
    """Zero crossings of Im(lambda) in [t0, t1], refined by bisection."""
    source = as_source(source)
    lo, hi = source.domain
    t0 = lo if t0 is None else t0
    t1 = hi if t1 is None else t1
    scale = source.period or (hi - lo)
    n = int(math.ceil((t1 - t0) / scale * points_per_period)) + 1
    grid = np.linspace(t0, t1, max(n, 3))
    im = source.lam(grid).imag
    mag = np.abs(source.lam(grid))
    tiny = 1e-14 * mag
    s = np.where(np.abs(im) <= tiny, 0.0, np.sign(im))
    out = []
    k = 0
    while k < grid.size - 1:
        if s[k] == 0.0 and k == 0:
            k += 1
            continue
        j = k + 1
        if s[k] * s[j] < 0:
            a, b = grid[k], grid[j]
        elif s[j] == 0.0:
            # zero exactly on a node: find the next nonzero sign
            m = j
            while m < grid.size - 1 and s[m] == 0.0:
                m += 1
            if s[m] == 0.0 or s[m] == s[k]:
                k = m
                continue
            a, b = grid[k], grid[m]
            j = m
        else:
            k += 1
            continue

        def g(t):
            return float(np.imag(source.lam(np.array([t]))[0]))

        ga = g(a)
        if ga == 0.0:
            root = a
        else:
            root = brentq(g, a, b, xtol=1e-14 * max(1.0, abs(b)), rtol=1e-15, maxiter=200)
        slope = float(np.imag(source.lam_dot(np.array([root]))[0]))
        if abs(slope) < 1e-9:
            raise TangentCrossing(root)
        out.append(CriticalTime(t=float(root), sign=1 if slope > 0 else -1, slope=slope))
        k = j
    return out
