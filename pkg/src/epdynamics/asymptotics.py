"""Quasi-adiabatic asymptotics of the Riccati flow.

Near a fixed point the flow is linear, so a solution that follows the
adiabatic manifold picks up, when Im(lambda) changes sign at t*, an
exponentially small switched-on term

    R(t) ~ R_ad(t) + [A + Theta(t - t*) Delta] exp(Psi(t)),
    Psi(t) = -2i int_{t*}^t lambda,       Delta = -i int f exp(-Psi).

Delta is exponentially small, so it is computed on a contour pushed into the
complex plane where the integrand carries no large oscillating cancellation.
Crits where the non-adiabatic point loses stability are handled in the
inverse chart, i.e. with (lambda, f) -> (-lambda, -f); `sigma` below is that
sign.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as L
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import (
    CurveEscaped,
    DegenerateCoupling,
    QuasiAdiabaticViolation,
    RootNotFound,
    SeriesDiverged,
    WindowNotConverged,
)
from .model import SpectralFrame, continue_branch
from .paths import CircularLambda, EllipticalLambda, LambdaPrototype, LinearLambda
from .special import bessel_i0
from .spectrum import Spectrum, as_source, critical_times

WINDOW_DECAY = math.log(1e12)
EPS_BREAKDOWN = 0.2


# --- fixed points ------------------------------------------------------------


@dataclass(frozen=True)
class FixedPoints:
    R_ad: complex
    R_nad: complex
    stable: str  # "ad" or "nad"


def fixed_points(frame, f=None) -> FixedPoints:
    """Exact fixed points of the Riccati flow for a SpectralFrame or (lam, f)."""
    lam = frame.lam if isinstance(frame, SpectralFrame) else complex(frame)
    if isinstance(frame, SpectralFrame):
        f = frame.f
    f = complex(f)
    stable = "ad" if lam.imag < 0 else "nad"
    if abs(f) < 1e-300:
        return FixedPoints(0j, complex(math.inf), stable)
    if lam == 0:
        raise DegenerateCoupling("lambda vanishes")
    s = cmath.sqrt(lam * lam - f * f)
    if abs(s - lam) > abs(s + lam):
        s = -s
    r_ad = -f / (lam + s)
    return FixedPoints(r_ad, -(lam + s) / f, stable)


# --- Taylor jets ---------------------------------------------------------------
# Truncated power series in u = tau / rho around a point, stored as arrays.


def _jmul(a, b):
    return np.convolve(a, b)[: a.size]


def _jdiv(a, b):
    c = np.zeros(a.size, complex)
    b0 = b[0]
    c[0] = a[0] / b0
    for k in range(1, a.size):
        c[k] = (a[k] - np.dot(b[1 : k + 1], c[k - 1 :: -1])) / b0
    return c


def _jsqrt(a, s0):
    s = np.zeros(a.size, complex)
    s[0] = s0
    for k in range(1, a.size):
        s[k] = (a[k] - np.dot(s[1:k], s[k - 1 : 0 : -1])) / (2 * s0)
    return s


def _jderiv(a, rho):
    d = np.zeros(a.size, complex)
    d[:-1] = np.arange(1, a.size) * a[1:] / rho
    return d


def _jtrig(x0, w, K, kind):
    """Jet of sin or cos(x0 + w tau) in the scaled variable."""
    k = np.arange(K)
    shift = x0 + 0.5 * math.pi * k + (0.0 if kind == "sin" else 0.5 * math.pi)
    fact = np.cumprod(np.concatenate([[1.0], np.arange(1, K)]))
    return np.sin(shift.astype(complex)) * w**k / fact


def _const(v, K):
    out = np.zeros(K, complex)
    out[0] = v
    return out


def _prototype_jets(src, t, K, rho):
    lam0 = complex(src.lam(t))
    k = np.arange(K)
    fact = np.cumprod(np.concatenate([[1.0], np.arange(1, K)]))
    if isinstance(src, CircularLambda):
        lam = lam0 * (-1j * math.pi * rho / src.T) ** k / fact
    elif isinstance(src, LinearLambda):
        lam = _const(lam0, K)
        lam[1] = 1j * src.lam_dot_im * rho
    elif isinstance(src, EllipticalLambda):
        w = math.pi * rho / src.T
        x0 = math.pi * t / src.T
        lam = src.lam_re * _jtrig(x0, w, K, "cos") + 1j * (src.T * src.lam_dot_im / math.pi) * _jtrig(x0, w, K, "sin")
    else:
        raise TypeError(f"no Taylor jets for {type(src).__name__}")
    return lam, _const(complex(src.f(t)), K)


def _path_jets(spec: Spectrum, t, K, rho):
    path = spec.path
    c = path.config
    phi0 = complex(path.phase(t))
    w = path._w * rho
    sin_j, cos_j = _jtrig(phi0, w, K, "sin"), _jtrig(phi0, w, K, "cos")
    gam = _const(c.gamma, K)
    if c.kind in ("circular", "displaced-circular"):
        om = c.r * sin_j
        g = c.r * cos_j + _const(0.5 * c.gamma + c.g_offset, K)
    elif c.kind == "tilted-ellipse":
        cs = _jtrig(phi0 + c.theta_aa, w, K, "cos")
        rad = _jdiv(_const(c.r * (1 - c.e**2), K), _const(1.0, K) + c.e * cs)
        om = _jmul(rad, sin_j)
        g = _jmul(rad, cos_j) + _const(0.5 * c.gamma + c.g_offset, K)
    else:
        om = -c.L * sin_j
        g = _const(0.5 * c.gamma + c.g_offset, K)
    a = om + 0.5j * gam
    lam2 = _jmul(a, a) + _jmul(g, g)
    lam = _jsqrt(lam2, complex(spec.lam(np.array([t]))[0]))
    a_dot, g_dot = _jderiv(a, rho), _jderiv(g, rho)
    f = _jdiv(_jmul(g, a_dot) - _jmul(a, g_dot), 2j * lam2)
    return lam, f


FD_ORDER = 4


def _fd_jets(source, t, K, rho, h):
    """Jets from nested fourth-order central differences (sampled paths)."""
    m = 2 * FD_ORDER
    pts = t + h * np.arange(-m, m + 1)
    out = []
    for vals in (source.lam(pts), source.f(pts)):
        jet = np.zeros(K, complex)
        cur = np.asarray(vals, complex)
        jet[0] = cur[m]
        fact = 1.0
        for k in range(1, FD_ORDER + 1):
            cur = (cur[:-4] - 8 * cur[1:-3] + 8 * cur[3:-1] - cur[4:]) / (12 * h)
            fact *= k
            jet[k] = cur[cur.size // 2] * rho**k / fact
        out.append(jet)
    return out


def _local_scale(source, t):
    lam = complex(source.lam(np.array([t]))[0])
    lam_dot = complex(source.lam_dot(np.array([t]))[0])
    cap = (source.period or 1.0) / (2 * math.pi)
    # lam_dot vanishes at turning points of the path; the scale only conditions the jets
    if abs(lam_dot) > 0:
        return min(abs(lam / lam_dot), cap)
    return cap


# --- adiabatic manifold ----------------------------------------------------------


@dataclass
class ManifoldSeries:
    """Optimally truncated derivative series for the adiabatic manifold.

    For manifold='nad' the series is built in the inverse chart and `value`
    is the inverse-chart value; `R` always returns the R-chart value.
    """

    t: float
    terms: np.ndarray
    N_op: int
    value: complex
    manifold: str = "ad"
    converged: bool = False

    @property
    def R(self):
        if self.manifold == "ad":
            return self.value
        return complex(math.inf) if self.value == 0 else 1 / self.value


def manifold_series(source, t, N_max=64, base="exact", manifold="ad") -> ManifoldSeries:
    """Sum_n (-1/(2i lam) d/dt)^n R_fix(t), truncated before the terms grow.

    base='exact' starts from the exact fixed point, base='linear' from
    -f/(2 lam).
    """
    source = as_source(source)
    t = float(t)
    rho = _local_scale(source, t)
    K = N_max + 3
    if isinstance(source, LambdaPrototype):
        lam, f = _prototype_jets(source, t, K, rho)
    elif isinstance(source, Spectrum) and source.analytic:
        lam, f = _path_jets(source, t, K, rho)
    else:
        h = 1e-3 * (source.period or 1.0)
        lam, f = _fd_jets(source, t, K, rho, h)
        N_max = min(N_max, FD_ORDER)
    if manifold == "nad":
        lam, f = -lam, -f
    if base == "linear":
        x = _jdiv(-f, 2 * lam)
    else:
        s0 = cmath.sqrt(lam[0] ** 2 - f[0] ** 2)
        if abs(s0 - lam[0]) > abs(s0 + lam[0]):
            s0 = -s0
        s = _jsqrt(_jmul(lam, lam) - _jmul(f, f), s0)
        x = _jdiv(-f, lam + s)
    gen = _jdiv(_const(-1.0, K), 2j * lam)
    terms = [x[0]]
    for _ in range(N_max):
        x = _jmul(gen, _jderiv(x, rho))
        terms.append(x[0])
    terms = np.array(terms)
    a = np.abs(terms)
    # where f passes through zero the leading term vanishes; only steady growth is breakdown
    if a[1] > a[0] and a[2] > a[1]:
        raise SeriesDiverged(f"leading corrections grow at t={t:.6g} (|t1/t0|={a[1] / max(a[0], 1e-300):.3g})")
    first = 1 if a[1] > a[0] else 0
    floor = 1e-300 * max(a[0], a[1])
    n_op = N_max
    converged = False
    for n in range(first, N_max):
        if a[n + 1] <= floor and a[n] <= floor:
            converged = True
            break
        if a[n + 1] >= a[n] and a[n] > floor:
            n_op = n + 1
            break
    else:
        converged = True
    value = complex(np.sum(terms[:n_op])) if not converged else complex(np.sum(terms))
    return ManifoldSeries(t=t, terms=terms[: n_op if not converged else N_max + 1], N_op=n_op, value=value, manifold=manifold, converged=converged)


def manifold_values(source, t, manifold="ad", N_max=64, base="exact"):
    """Manifold (in its own chart) at many times; falls back to the exact
    fixed point where the series is not usable."""
    source = as_source(source)
    out = np.empty(np.size(t), complex)
    for i, ti in enumerate(np.atleast_1d(t)):
        try:
            out[i] = manifold_series(source, ti, N_max, base, manifold).value
        except SeriesDiverged:
            lam, f = source.lam_f(float(ti))
            fp = fixed_points(lam, f) if manifold == "ad" else fixed_points(-lam, -f)
            out[i] = fp.R_ad
    return out


# --- Psi -----------------------------------------------------------------------

_GL_X, _GL_W = L.leggauss(16)


def _cumulative_matrix(x):
    """Q with (Q v)_i = int_{-1}^{x_i} p, p the interpolant of v at nodes x."""
    n = x.size
    V = L.legvander(x, n - 1)
    Vinv = np.linalg.inv(V)
    Q = np.empty((n, n))
    for j in range(n):
        c = L.legint(Vinv[:, j], lbnd=-1)
        Q[:, j] = L.legval(x, c)
    return Q


_GL_Q = _cumulative_matrix(_GL_X)


def psi(source, t_star, t):
    """Psi(t) = -2i int_{t*}^t lambda on the real axis.

    Scalars use adaptive Gauss-Kronrod (abs tol 1e-12); arrays use composite
    16-point Gauss-Legendre between sorted sample points.
    """
    source = as_source(source)
    if np.ndim(t) == 0:
        a, b = sorted((t_star, float(t)))
        # reversed limits are handled here: quad's complex path does not flip the sign
        val, _ = quad(lambda x: source.lam_f(x)[0], a, b, complex_func=True, epsabs=1e-12, epsrel=1e-13, limit=400)
        return -2j * val * (1 if float(t) >= t_star else -1)
    t = np.asarray(t, float)
    order = np.argsort(t)
    ts = t[order]
    nodes = np.concatenate([[t_star], ts])
    ordn = np.argsort(nodes, kind="stable")
    sn = nodes[ordn]
    incr = _segment_integrals(source, sn)
    cum = np.concatenate([[0.0], np.cumsum(incr)])
    k_star = int(np.where(ordn == 0)[0][0])
    cum = cum - cum[k_star]
    vals = np.empty(nodes.size, complex)
    vals[ordn] = cum
    out = np.empty(t.size, complex)
    out[order] = vals[1:]
    return -2j * out


def _segment_integrals(source, nodes, h_max=None):
    """int lambda over each [nodes[i], nodes[i+1]] (real axis)."""
    h_max = h_max or (source.period or (nodes[-1] - nodes[0] + 1.0)) / 256
    d = np.diff(nodes)
    nsub = np.maximum(1, np.ceil(np.abs(d) / h_max).astype(int))
    if np.all(nsub == 1):
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        pts = mid[:, None] + 0.5 * d[:, None] * _GL_X[None, :]
        vals = source.lam(pts.ravel()).reshape(pts.shape)
        return 0.5 * d * (vals @ _GL_W)
    out = np.empty(d.size, complex)
    for i in range(d.size):
        edges = np.linspace(nodes[i], nodes[i + 1], nsub[i] + 1)
        out[i] = np.sum(_segment_integrals(source, edges, h_max=math.inf))
    return out


# --- contour quadrature ------------------------------------------------------------


@dataclass
class _Contour:
    z: np.ndarray  # nodes along the polyline
    dz: np.ndarray  # quadrature weights times dz/ds
    lam: np.ndarray
    f: np.ndarray
    psi: np.ndarray


def _lam_on(source, z, ref):
    if isinstance(source, LambdaPrototype):
        return np.asarray(source.lam(z), complex)
    return continue_branch(np.sqrt(np.asarray(source.lam_sq(z), complex)), ref)


def _build_contour(source, corners, psi0, lam_ref, refine=1):
    zs, ws = [], []
    for a, b in zip(corners[:-1], corners[1:]):
        length = abs(b - a)
        if length == 0:
            continue
        probe = a + (b - a) * np.linspace(0.0, 1.0, 129)
        lam_max = float(np.max(np.sqrt(np.abs(np.asarray(source.lam_sq(probe), complex)))))
        # panels no longer than a quarter of the local oscillation wavelength
        h = min(math.pi / (2 * refine * max(lam_max, 1e-12)), length / 2)
        n = max(2, int(math.ceil(length / h)))
        edges = a + (b - a) * np.linspace(0.0, 1.0, n + 1)
        half = 0.5 * (edges[1:] - edges[:-1])
        mid = 0.5 * (edges[1:] + edges[:-1])
        zs.append((mid[:, None] + half[:, None] * _GL_X[None, :]).ravel())
        ws.append((half[:, None] * _GL_W[None, :]).ravel())
    z = np.concatenate(zs)
    w = np.concatenate(ws)
    lam = _lam_on(source, z, lam_ref)
    f = np.asarray(source.f_complex(z), complex) * np.ones(z.size)
    # cumulative int lambda panel by panel
    npan = z.size // 16
    lp = lam.reshape(npan, 16)
    hp = w.reshape(npan, 16).sum(axis=1) / 2.0  # half-length times direction
    within = (lp @ _GL_Q.T) * hp[:, None]
    totals = (lp * w.reshape(npan, 16)).sum(axis=1)
    offs = np.concatenate([[0.0], np.cumsum(totals)[:-1]])
    integ = (within + offs[:, None]).ravel()
    return _Contour(z=z, dz=w, lam=lam, f=f, psi=psi0 - 2j * integ)


def _lam_sq_dot(source, z):
    if isinstance(source, Spectrum):
        return source.path.lam_sq_dot(z)
    return 2 * source.lam(z) * source.lam_dot(z)


def lambda_zeros(source, t_center, half_width, height, n_seeds=8, tol=1e-12):
    """Complex zeros of lambda^2 near a real time, by Newton from a seed grid."""
    # half on the vertical through t_center, half offset sideways
    seeds = []
    for k in range(n_seeds):
        sgn = 1 if k % 2 == 0 else -1
        if k < n_seeds // 2:
            seeds.append(t_center + sgn * 1j * height * (k // 2 + 1) / (n_seeds // 4 + 1))
        else:
            side = 1 if (k // 2) % 2 == 0 else -1
            seeds.append(t_center + side * 0.5 * half_width + sgn * 0.5j * height)
    roots = []
    for z in seeds:
        for _ in range(100):
            v = complex(source.lam_sq(z))
            dv = complex(_lam_sq_dot(source, z))
            if dv == 0:
                break
            step = v / dv
            z = z - step
            if abs(z - t_center) > 4 * (half_width + height):
                break
            if abs(step) < 1e-14 * max(1.0, abs(z)):
                if abs(cmath.sqrt(complex(source.lam_sq(z)))) < tol**0.5 or abs(complex(source.lam_sq(z))) < tol:
                    if all(abs(z - r) > 1e-8 * max(1.0, abs(z)) for r in roots):
                        roots.append(z)
                break
    return roots


@dataclass
class DiscontinuityResult:
    value: complex
    t_star: float
    sigma: int
    window: tuple
    depth: float
    converged: bool
    error_estimate: float
    boundary_term: complex = 0j


def _real_window(source, t_star, sigma, period, floor_log=math.inf):
    """Expand from t* until |f e^{-sigma Psi}| drops by 1e-12 (and below
    exp(floor_log)), capped at the neighbouring crits and one period.
    Not converged only when an edge hits the period or domain cap undecayed."""
    lo_cap, hi_cap = t_star - period, t_star + period
    dlo, dhi = source.domain
    if isinstance(source, Spectrum) and source.analytic:
        dlo, dhi = dlo - source.T, dhi + source.T
    lo_cap, hi_cap = max(lo_cap, dlo), min(hi_cap, dhi)
    crits = [c.t for c in critical_times(source, lo_cap, hi_cap) if abs(c.t - t_star) > 1e-9 * period]
    left = [c for c in crits if c < t_star]
    right = [c for c in crits if c > t_star]
    if left:
        lo_cap = max(left)
    if right:
        hi_cap = min(right)
    n = 2049
    tl = np.linspace(t_star, lo_cap, n)
    th = np.linspace(t_star, hi_cap, n)
    out = []
    converged = True
    # stopping at a neighbouring crit is fine: the manifold boundary term covers it
    for tt, at_crit in ((tl, bool(left)), (th, bool(right))):
        lg = -sigma * psi(source, t_star, tt).real + np.log(np.abs(source.f(tt)) + 1e-300)
        peak = lg.max()
        below = np.where(lg < min(peak - WINDOW_DECAY, floor_log))[0]
        below = below[below > np.argmax(lg)]
        if below.size:
            out.append(float(tt[below[0]]))
        else:
            out.append(float(tt[-1]))
            converged = converged and at_crit
    return out[0], out[1], converged


def _window_delta(source, t_star, sigma, period, t_lo, t_hi, n_depths):
    psi_lo = psi(source, t_star, t_lo)
    lam_lo = complex(source.lam(np.array([t_lo]))[0])

    def integrate(depth, refine=1):
        corners = [t_lo, t_lo + 1j * depth, t_hi + 1j * depth, t_hi] if depth else [t_lo, t_hi]
        c = _build_contour(source, corners, psi_lo, lam_lo, refine)
        lg = -sigma * c.psi.real + np.log(np.abs(c.f) + 1e-300)
        return c, lg

    depth = 0.0
    if source.analytic:
        ymax_up = ymax_dn = period
        if isinstance(source, Spectrum):
            # stay clear of branch points of lambda between the contour and the real axis
            zeros = lambda_zeros(source, t_star, t_hi - t_lo, period)
            zeros = [z for z in zeros if t_lo - period / 8 <= z.real <= t_hi + period / 8]
            up = [z.imag for z in zeros if z.imag > 0]
            dn = [-z.imag for z in zeros if z.imag < 0]
            cap = source.path.pole_height()
            ymax_up = 0.8 * min(up + [cap]) if up or cap < math.inf else period
            ymax_dn = 0.8 * min(dn + [cap]) if dn or cap < math.inf else period
        cands = np.concatenate([np.linspace(-ymax_dn, 0, n_depths // 2, endpoint=False), np.linspace(0, ymax_up, n_depths // 2 + 1)])
        best = (math.inf, 0.0)
        # deep candidates may overflow; their nan maxima simply lose the comparison
        with np.errstate(all="ignore"):
            for y in cands:
                _, lg = integrate(float(y))
                m = float(np.max(lg))
                if m < best[0]:
                    best = (m, float(y))
        depth = best[1]
    c, _ = integrate(depth)
    val = -1j * sigma * np.sum(c.f * np.exp(-sigma * c.psi) * c.dz)
    c2, _ = integrate(depth, refine=2)
    val2 = -1j * sigma * np.sum(c2.f * np.exp(-sigma * c2.psi) * c2.dz)
    # subtract the manifold's own contribution at the window ends
    man = "ad" if sigma > 0 else "nad"
    bterm = 0j
    for tb, sgn in ((t_hi, 1), (t_lo, -1)):
        mv = manifold_values(source, [tb], manifold=man)[0]
        bterm += sgn * mv * cmath.exp(-sigma * complex(psi(source, t_star, tb)))
    return complex(val2) - bterm, depth, abs(val2 - val), bterm


def discontinuity(source, t_star, sign=None, full=False, n_depths=48):
    """Delta at a critical time by contour-shifted quadrature.

    sign is the crit's sign (+1: adiabatic point loses stability); it is
    looked up when omitted. With full=True a DiscontinuityResult is returned.
    """
    source = as_source(source)
    sigma = sign if sign is not None else (1 if complex(source.lam_dot(np.array([t_star]))[0]).imag > 0 else -1)
    period = source.period or 0.5 * (source.domain[1] - source.domain[0])
    t_lo, t_hi, converged = _real_window(source, t_star, sigma, period)
    if not converged:
        warnings.warn(WindowNotConverged(f"integrand did not decay to 1e-12 of its peak in [{t_lo:.6g}, {t_hi:.6g}]"))
    value, depth, err, bterm = _window_delta(source, t_star, sigma, period, t_lo, t_hi, n_depths)
    # Delta can lie far below 1e-12 of the peak: widen until the ends are negligible
    # against it; a too-narrow window overstates Delta, so repeat until it settles
    for _ in range(8):
        if value == 0:
            break
        w_lo, w_hi, _ = _real_window(source, t_star, sigma, period, floor_log=math.log(abs(value)) - math.log(1e8))
        if w_lo >= t_lo and w_hi <= t_hi:
            break
        t_lo, t_hi = min(w_lo, t_lo), max(w_hi, t_hi)
        value, depth, err, bterm = _window_delta(source, t_star, sigma, period, t_lo, t_hi, n_depths)
    res = DiscontinuityResult(value, t_star, sigma, (t_lo, t_hi), depth, converged, err, bterm)
    return res if full else res.value


# --- delay times ---------------------------------------------------------------------


@dataclass(frozen=True)
class DelayPrediction:
    t_star: float
    Delta: complex
    t_plus: float  # math.inf: no finite exit
    t_plus_max: float = math.nan
    source: str = "numeric-quadrature"
    sign: int = 1

    @property
    def finite_exit(self) -> bool:
        return math.isfinite(self.t_plus)

    @property
    def delay(self) -> float:
        return self.t_plus - self.t_star


def _next_crit(source, t_star, period):
    hi = t_star + period
    dlo, dhi = source.domain
    if isinstance(source, Spectrum) and source.analytic:
        dhi = dhi + source.T
    hi = min(hi, dhi)
    later = [c.t for c in critical_times(source, t_star, hi) if c.t > t_star + 1e-9 * period]
    return (min(later) if later else hi), bool(later)


def delay_time(source, t_star, Delta=None, sign=None, with_maximal=False) -> DelayPrediction:
    """Exit time t+ > t* where |Delta e^{sigma Psi(t+)}| = 1."""
    source = as_source(source)
    lam_dot = complex(source.lam_dot(np.array([t_star]))[0])
    sigma = sign if sign is not None else (1 if lam_dot.imag > 0 else -1)
    if Delta is None:
        Delta = discontinuity(source, t_star, sigma)
    period = source.period or 0.5 * (source.domain[1] - source.domain[0])
    t_end, _ = _next_crit(source, t_star, period)
    logd = math.log(abs(Delta)) if Delta != 0 else -math.inf
    tt = np.linspace(t_star, t_end, 4097)
    h = logd + sigma * psi(source, t_star, tt).real
    idx = np.where(h >= 0)[0]
    idx = idx[idx > 0]
    t_plus = math.inf
    if idx.size:
        k = int(idx[0])

        def g(x):
            return logd + sigma * complex(psi(source, t_star, x)).real

        t_plus = brentq(g, tt[k - 1], tt[k], xtol=1e-9 * period, rtol=4 * np.finfo(float).eps)
    t_max = math.nan
    if with_maximal:
        try:
            t_max = maximal_delay(source, t_star, sign=sigma)
        except (RootNotFound, CurveEscaped):
            t_max = math.nan
    return DelayPrediction(t_star, complex(Delta), t_plus, t_max, "numeric-quadrature", sigma)


def predict_delays(source, t0=None, t1=None, with_maximal=False):
    """DelayPrediction for every critical time in [t0, t1]."""
    source = as_source(source)
    return [delay_time(source, c.t, sign=c.sign, with_maximal=with_maximal) for c in critical_times(source, t0, t1)]


@dataclass(frozen=True)
class NumericExit:
    t_star: float
    t_plus: float  # math.inf: no exit before the next crit
    route: str  # "real-axis" or "complex-detour"
    t0: float
    R0: complex


def numeric_exit(source, t_star, sign=None, t0=None, tol=1e-11, floor=1e-10, n_grid=16385) -> NumericExit:
    """|R| = 1 exit after t* from a full Riccati integration.

    The run starts on the stable manifold at t0 (default: midway from the
    previous crit). When |Delta| is below `floor` the switched-on term is
    lost in rounding on the real axis, so the flow instead goes round a
    complex-time detour (half the quadrature depth) and rejoins the real
    axis once the predicted term has grown to 1e-6.
    """
    from .propagator import propagate_R, propagate_R_detour

    source = as_source(source)
    lam_dot = complex(source.lam_dot(np.array([t_star]))[0])
    sigma = sign if sign is not None else (1 if lam_dot.imag > 0 else -1)
    period = source.period or 0.5 * (source.domain[1] - source.domain[0])
    if t0 is None:
        prev = [c.t for c in critical_times(source, t_star - period, t_star) if c.t < t_star - 1e-9 * period]
        t0 = 0.5 * (max(prev) + t_star) if prev else t_star - 0.5 * period
        t0 = max(t0, source.domain[0])
    if sigma > 0:
        R0 = complex(manifold_values(source, [t0], "ad")[0])
    else:
        S0 = complex(manifold_values(source, [t0], "nad")[0])
        R0 = complex(math.inf) if S0 == 0 else 1 / S0
    t_end, _ = _next_crit(source, t_star, period)
    res = discontinuity(source, t_star, sigma, full=True)
    if abs(res.value) >= floor:
        grid = np.linspace(t0, t_end, n_grid)
        logR = propagate_R(source, R0, grid, tol=tol).log10_abs_R
        route = "real-axis"
    else:
        tt = np.linspace(t_star, t_end, 4097)
        h = math.log(abs(res.value)) + sigma * psi(source, t_star, tt).real
        ok = np.where(h >= math.log(1e-6))[0]
        if ok.size == 0:
            return NumericExit(t_star, math.inf, "complex-detour", t0, R0)
        t_ret = float(tt[ok[0]])
        grid = np.linspace(t_ret, t_end, n_grid)
        logR = propagate_R_detour(source, R0, t0, t_ret, 0.5 * res.depth, grid, tol=tol).log10_abs_R
        route = "complex-detour"
    y = sigma * logR
    k = np.where((grid[:-1] >= t_star) & (y[:-1] < 0) & (y[1:] >= 0))[0]
    t_plus = math.inf
    if k.size:
        i = int(k[0])
        t_plus = float(grid[i] + (grid[i + 1] - grid[i]) * y[i] / (y[i] - y[i + 1]))
    return NumericExit(t_star, t_plus, route, float(t0), R0)


# --- closed forms for the lambda prototypes -------------------------------------------


def circular_delta(eps):
    """Delta for the circular lambda(t): pi exp(-1/(2 eps)).

    The sign is the one the defining integral produces (and the one the
    elliptical formula reduces to).
    """
    return complex(math.pi * math.exp(-0.5 / eps))


def circular_delay(eps, T):
    """t+ - t* = (T/pi) arccos(2 eps log pi)."""
    x = 2 * eps * math.log(math.pi)
    if x > 1:
        return 0.0
    return T / math.pi * math.acos(x)


def linear_delta(lam_re, lam_dot_im, f_star):
    return -1j * complex(f_star) * math.sqrt(math.pi / lam_dot_im) * math.exp(-(lam_re**2) / lam_dot_im)


def linear_delay(lam_re, lam_dot_im, f_star):
    arg = 1 + lam_dot_im / lam_re**2 * math.log(math.sqrt(lam_dot_im / math.pi) / abs(f_star))
    if arg <= 0:
        return 0.0
    return lam_re / lam_dot_im * math.sqrt(arg)


def elliptical_delta(lam_re, lam_dot_im, T, f_star):
    """-2iT f e^{-2B} I0(2 sqrt(B^2 - A^2)), A = lam_re T/pi, B = T^2 lam_dot_im/pi^2."""
    A = lam_re * T / math.pi
    B = T * T * lam_dot_im / math.pi**2
    x = 2 * cmath.sqrt(B * B - A * A)
    i0s = bessel_i0(x, scaled=True)
    return -2j * T * complex(f_star) * cmath.exp(-2 * B + abs(x.real)) * i0s


def elliptical_delay(lam_re, lam_dot_im, T, f_star):
    B = T * T * lam_dot_im / math.pi**2
    c = 1 + math.log(abs(elliptical_delta(lam_re, lam_dot_im, T, f_star))) / (2 * B)
    if c >= 1:
        return 0.0
    if c <= -1:
        return math.inf
    return T / math.pi * math.acos(c)


def analytic_prediction(proto: LambdaPrototype) -> DelayPrediction:
    """Closed-form Delta and delay for a lambda prototype."""
    if isinstance(proto, CircularLambda):
        t_star = 1.5 * proto.T
        return DelayPrediction(t_star, circular_delta(proto.eps), t_star + circular_delay(proto.eps, proto.T), t_star + 0.5 * proto.T, "circular-analytic")
    if isinstance(proto, LinearLambda):
        d = linear_delta(proto.lam_re, proto.lam_dot_im, proto.f_star)
        return DelayPrediction(0.0, d, linear_delay(proto.lam_re, proto.lam_dot_im, proto.f_star), proto.lam_re / proto.lam_dot_im, "linear-analytic")
    if isinstance(proto, EllipticalLambda):
        d = elliptical_delta(proto.lam_re, proto.lam_dot_im, proto.T, proto.f_star)
        return DelayPrediction(0.0, d, elliptical_delay(proto.lam_re, proto.lam_dot_im, proto.T, proto.f_star), math.nan, "elliptical-analytic")
    raise TypeError(type(proto).__name__)


# --- maximal delay --------------------------------------------------------------------


def _psi_at_zero(source, t_star, zs, lam_ref_real):
    """Psi(z*) via the real axis and a vertical leg ending at the branch point."""
    x0 = zs.real
    base = complex(psi(source, t_star, x0))
    # z = x0 + i Im(z*) (1 - v^2): lambda ~ v near the end, so the integrand is smooth in v
    xg, wg = L.leggauss(64)
    v = 0.5 * (xg + 1)
    wv = 0.5 * wg
    order = np.argsort(-v)  # walk from the real axis (v = 1) to z* (v = 0)
    v, wv = v[order], wv[order]
    z = x0 + 1j * zs.imag * (1 - v * v)
    col = np.concatenate([[x0], z])
    lam = _lam_on(source, col, lam_ref_real)[1:]
    dz = 1j * zs.imag * 2 * v
    return base - 2j * np.sum(lam * dz * wv), lam[-1]


_GL8 = L.leggauss(8)


def _psi_step(source, z0, z1, lam0):
    x, w = _GL8
    pts = 0.5 * (z0 + z1) + 0.5 * (z1 - z0) * x
    col = np.concatenate([[z0], pts, [z1]])
    lam = _lam_on(source, col, lam0)
    return -2j * 0.5 * (z1 - z0) * np.sum(lam[1:-1] * w), lam[-1]


def maximal_delay(source, t_star, sign=None, step=None, full=False):
    """Upper real-axis intersection of the level curve Re Psi = Re Psi(z*)
    through the complex zero z* of lambda nearest t*."""
    source = as_source(source)
    lam_dot = complex(source.lam_dot(np.array([t_star]))[0])
    sigma = sign if sign is not None else (1 if lam_dot.imag > 0 else -1)
    period = source.period or 0.5 * (source.domain[1] - source.domain[0])
    if isinstance(source, CircularLambda):
        # lambda has no finite zero; the level through z* -> t* - i infinity is Re Psi = 1/(2 eps)
        c = 0.5 / source.eps
        t_end = t_star + period / 2
        g = lambda x: sigma * complex(psi(source, t_star, x)).real - c
        tp = brentq(g, t_star + 1e-6 * period, t_end + 1e-9 * period if g(t_end) < 0 else t_end, xtol=1e-12 * period)
        return (tp, {"z_star": None, "level": c}) if full else tp
    if not source.analytic:
        raise RootNotFound("sampled paths have no closed-form continuation to complex time")
    zeros = lambda_zeros(source, t_star, period / 2, period / 2)
    if not zeros:
        raise RootNotFound(f"no complex zero of lambda found near t*={t_star:.6g}")
    cands = []
    for z in zeros:
        lam_real = complex(source.lam(np.array([z.real]))[0])
        pz, _ = _psi_at_zero(source, t_star, z, lam_real)
        if sigma * pz.real > 0:
            cands.append((abs(z - t_star), z, pz, lam_real))
    if not cands:
        raise RootNotFound("no zero of lambda gives a level above the real-axis minimum")
    cands.sort(key=lambda c: c[0])
    _, zs, pz, lam_real = cands[0]
    level = sigma * pz.real
    h = step or 1e-3 * period
    dz_side = -1j if zs.imag > 0 else 1j  # toward the real axis
    delta = min(1e-3 * abs(zs.imag), h)
    # lambda on a small circle, continued from the side facing the real axis
    col = zs.real + 1j * zs.imag * np.linspace(0, 1 - delta / abs(zs.imag), 400)
    lam_col = _lam_on(source, col, lam_real)
    th0 = cmath.phase(dz_side)
    ths = th0 + np.linspace(-math.pi, math.pi, 1441)[1:-1]
    mid = len(ths) // 2
    ring = zs + delta * np.exp(1j * ths)
    lam_up = _lam_on(source, ring[mid:], lam_col[-1])
    lam_dn = _lam_on(source, ring[: mid + 1][::-1], lam_col[-1])[::-1]
    lam_ring = np.concatenate([lam_dn[:-1], lam_up])
    loc = sigma * (pz - 2j * (2.0 / 3.0) * lam_ring * (ring - zs)).real - level
    starts = []
    for k in np.where(np.sign(loc[:-1]) != np.sign(loc[1:]))[0]:
        u = loc[k] / (loc[k] - loc[k + 1])
        z0 = ring[k] + u * (ring[k + 1] - ring[k])
        l0 = lam_ring[k] + u * (lam_ring[k + 1] - lam_ring[k])
        starts.append((z0, l0))
    crossings = []
    box = (t_star - 2 * period, t_star + 2 * period, 2 * period)
    for z0, l0 in starts:
        p0 = pz - 2j * (2.0 / 3.0) * l0 * (z0 - zs)
        z, lam, p = z0, l0, p0
        direction = (z0 - zs) / abs(z0 - zs)
        for _ in range(int(20 * period / h)):
            dpsi = -2j * lam
            tang = 1j * dpsi.conjugate() / abs(dpsi)
            if (tang * direction.conjugate()).real < 0:
                tang = -tang
            zn = z + h * tang
            dp, ln = _psi_step(source, z, zn, lam)
            pn = p + dp
            for _ in range(3):
                corr = (sigma * pn.real - level) / (sigma * (-2j * ln))
                if abs(corr) < 1e-13 * period:
                    break
                zc = zn - corr
                dp, ln = _psi_step(source, z, zc, lam)
                zn, pn = zc, p + dp
            direction = (zn - z) / abs(zn - z)
            if zn.imag * zs.imag <= 0:
                x = z.real + (zn.real - z.real) * z.imag / (z.imag - zn.imag)
                crossings.append(_refine_crossing(source, t_star, sigma, level, x, h))
                break
            z, lam, p = zn, ln, pn
            if not (box[0] < z.real < box[1]) or abs(z.imag) > box[2]:
                break
    right = [x for x in crossings if x is not None and x > t_star]
    if not right:
        raise CurveEscaped(f"level curve from z*={zs:.6g} never returns to the real axis after t*")
    tp = max(right)
    info = {"z_star": zs, "level": level, "crossings": sorted(x for x in crossings if x is not None)}
    return (tp, info) if full else tp


def _refine_crossing(source, t_star, sigma, level, x, h):
    def g(s):
        return sigma * complex(psi(source, t_star, s)).real - level

    a, b = x - 2 * h, x + 2 * h
    for _ in range(30):
        if g(a) * g(b) < 0:
            return brentq(g, a, b, xtol=1e-12 * max(1.0, abs(x)))
        a, b = a - 2 * h, b + 2 * h
    return x


# --- stitched piecewise solution ---------------------------------------------------------


@dataclass
class StitchedSolution:
    t: np.ndarray
    R: np.ndarray
    log10_abs_R: np.ndarray
    exits: list = field(default_factory=list)
    segments: list = field(default_factory=list)


def _manifold_spline(source, ts, manifold):
    vals = manifold_values(source, ts, manifold=manifold)
    return CubicSpline(ts, vals.real), CubicSpline(ts, vals.imag)


def stitched_solution(source, R0, grid, samples_per_period=512):
    """Piecewise quasi-adiabatic prediction of R on the grid.

    Each segment follows one manifold: X = M(t) + [A + Theta(t - t*) Delta] e^{sigma Psi},
    in the R chart (sigma = +1) or the inverse chart (sigma = -1). A segment
    ends where |R| = 1 and the next one starts there on the other manifold.
    """
    source = as_source(source)
    grid = np.asarray(grid, float)
    period = source.period or (grid[-1] - grid[0])
    crits = critical_times(source, grid[0] - period, grid[-1] + period)
    nsamp = max(64, int(math.ceil((grid[-1] - grid[0]) / period * samples_per_period)) + 1)
    ts = np.linspace(grid[0], grid[-1], nsamp)
    splines = {m: _manifold_spline(source, ts, m) for m in ("ad", "nad")}
    eps_grid = source.epsilon(ts)

    def man(m, t):
        sr, si = splines[m]
        return sr(t) + 1j * si(t)

    logR = np.empty(grid.size)
    Rv = np.empty(grid.size, complex)
    exits, segments = [], []
    t_in = grid[0]
    x_in = complex(R0)
    sigma = 1 if abs(x_in) <= 1 else -1
    if sigma < 0:
        x_in = 0j if not np.isfinite(x_in) else 1 / x_in
    i0 = 0
    while i0 < grid.size:
        mname = "ad" if sigma > 0 else "nad"
        # crit where the followed point loses stability: sign == sigma
        before = [c.t for c in crits if c.sign == sigma and c.t <= t_in]
        after = [c.t for c in crits if c.sign == sigma and c.t > t_in]
        stable_now = sigma * complex(source.lam(np.array([t_in]))[0]).imag < 0
        if stable_now and after:
            t_ref, delta = after[0], discontinuity(source, after[0], sigma)
        else:
            t_ref = before[-1] if before else (after[0] if after else t_in)
            delta = 0j
        p_in = complex(psi(source, t_ref, t_in))
        A = (x_in - complex(man(mname, t_in))) * cmath.exp(-sigma * p_in)
        seg_eps = float(np.max(eps_grid[(ts >= t_in)]))
        if seg_eps > EPS_BREAKDOWN:
            warnings.warn(QuasiAdiabaticViolation(f"eps_max = {seg_eps:.3g} on segment starting at {t_in:.6g}"))

        def pred(t):
            t = np.atleast_1d(t)
            ps = psi(source, t_ref, t)
            coef = A + np.where(t > t_ref, delta, 0.0)
            lx = np.log(np.abs(coef) + 1e-300) + sigma * ps.real
            x = man(mname, t) + coef * np.exp(np.minimum(sigma * ps, 700.0))
            return x, lx

        # without an exit, re-anchor once the point is stable again, before the next loss
        back = [c.t for c in crits if c.sign == -sigma and c.t > max(t_ref, t_in)]
        t_limit = math.inf
        if back:
            nxt = [c.t for c in crits if c.sign == sigma and c.t > back[0]]
            t_limit = 0.5 * (back[0] + nxt[0]) if nxt else math.inf
        tt = grid[i0:]
        x, _ = pred(tt)
        ax = np.abs(x)
        out = np.where((ax > 1) & (tt > t_in))[0]
        stop = np.where(tt > t_limit)[0]
        if stop.size and (out.size == 0 or stop[0] < out[0]):
            n_end = i0 + int(stop[0])
            seg_x = x[: n_end - i0]
            with np.errstate(divide="ignore"):
                logR[i0:n_end] = sigma * np.log10(np.abs(seg_x))
            Rv[i0:n_end] = seg_x if sigma > 0 else 1 / seg_x
            segments.append({"start": float(t_in), "manifold": mname, "t_ref": float(t_ref), "Delta": complex(delta)})
            x_in = complex(pred(t_limit)[0][0])
            t_in, i0 = t_limit, n_end
            continue
        n_end = grid.size if out.size == 0 else i0 + int(out[0])
        seg_x = x[: n_end - i0]
        with np.errstate(divide="ignore"):
            lg = np.log10(np.abs(seg_x))
        logR[i0:n_end] = sigma * lg
        Rv[i0:n_end] = seg_x if sigma > 0 else 1 / seg_x
        segments.append({"start": float(t_in), "manifold": mname, "t_ref": float(t_ref), "Delta": complex(delta)})
        if n_end >= grid.size:
            break
        a = grid[n_end - 1] if n_end - 1 >= i0 else t_in
        b = grid[n_end]
        g = lambda s: abs(pred(s)[0][0]) - 1.0
        t_x = brentq(g, a, b, xtol=1e-9 * period) if g(a) < 0 < g(b) else b
        exits.append(float(t_x))
        x_exit = complex(pred(t_x)[0][0])
        t_in, x_in = t_x, 1 / x_exit
        sigma = -sigma
        i0 = n_end
    return StitchedSolution(t=grid, R=Rv, log10_abs_R=logR, exits=exits, segments=segments)


def unit_crossings(t, log10_abs_R):
    """Times where |R| crosses 1, linearly interpolated in log|R|."""
    t = np.asarray(t)
    y = np.asarray(log10_abs_R)
    k = np.where(np.sign(y[:-1]) != np.sign(y[1:]))[0]
    out = []
    for i in k:
        if y[i] == y[i + 1]:
            continue
        out.append(float(t[i] + (t[i + 1] - t[i]) * y[i] / (y[i] - y[i + 1])))
    return out
