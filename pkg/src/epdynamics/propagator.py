"""Exact dynamics in the instantaneous eigenbasis.

    dU/dt = -i [[-lam, -f], [f, lam]] U,        U(t0) = 1
    dR/dt = -2i lam R - i f (1 + R^2),          R = U_{+-} / U_{--}

The Riccati flow is integrated in whichever of the charts R or S = 1/R keeps
the value below 1.25 in magnitude (switch back below 0.8), so the pole at
|R| = infinity never has to be crossed. S obeys the same equation with
(lam, f) -> (-lam, -f).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dopri import DormandPrince, solve
from .errors import DivisionNearZero
from .model import continue_branch
from .spectrum import Spectrum, as_source

RENORM_AT = 1e150
R_CHART, INVERSE_CHART = 0, 1
CHART_NAMES = ("R-chart", "inverse-chart")


def _gl_nodes(n=4):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def integrate_lambda(source, t):
    """Cumulative int_{t[0]}^{t} lambda dt' on the grid (Gauss-Legendre per interval)."""
    t = np.asarray(t, float)
    if t.size < 2:
        return np.zeros(t.shape, complex)
    x, w = _gl_nodes(6)
    h = np.diff(t)
    pts = t[:-1, None] + h[:, None] * x[None, :]
    vals = source.lam(pts.ravel()).reshape(pts.shape)
    inc = h * (vals @ w)
    return np.concatenate([[0.0], np.cumsum(inc)])


# --- evolution operator -----------------------------------------------------


@dataclass(frozen=True)
class EvolutionState:
    t: float
    U: np.ndarray
    c_minus: complex = 1.0 + 0j
    c_plus: complex = 0j

    @property
    def det(self):
        return self.U[0, 0] * self.U[1, 1] - self.U[0, 1] * self.U[1, 0]


@dataclass
class EvolutionTrajectory:
    """U on a grid, stored as U_scaled * exp(log_scale)."""

    t: np.ndarray
    U_scaled: np.ndarray
    log_scale: np.ndarray
    n_steps: int = 0

    def __len__(self):
        return self.t.size

    @property
    def U(self):
        return self.U_scaled * np.exp(self.log_scale)[:, None, None]

    @property
    def det(self):
        u = self.U_scaled
        return (u[:, 0, 0] * u[:, 1, 1] - u[:, 0, 1] * u[:, 1, 0]) * np.exp(2 * self.log_scale)

    def __getitem__(self, i):
        U = self.U_scaled[i] * math.exp(self.log_scale[i])
        return EvolutionState(t=float(self.t[i]), U=U, c_minus=U[0, 0], c_plus=U[1, 0])


def _u_rhs(source):
    lam_f = source.lam_f

    def rhs(t, y):
        lam, f = lam_f(t)
        # y = (U--, U+-, U-+, U++): columns of U
        return np.array(
            [
                1j * (lam * y[0] + f * y[1]),
                -1j * (f * y[0] + lam * y[1]),
                1j * (lam * y[2] + f * y[3]),
                -1j * (f * y[2] + lam * y[3]),
            ]
        )

    return rhs


def propagate_U(source, grid, tol=1e-10, renormalize=True, h_max=None):
    """Evolution operator in the eigenbasis at every grid time (U(grid[0]) = 1)."""
    source = as_source(source)
    grid = np.asarray(grid, float)
    n = grid.size
    out = np.empty((n, 4), complex)
    logs = np.zeros(n)
    y0 = np.array([1, 0, 0, 1], complex)
    out[0] = y0
    hm = math.inf if h_max is None else h_max
    st = DormandPrince(_u_rhs(source), grid[0], y0, grid[-1], rtol=tol, atol=tol, h_max=hm)
    log_scale = 0.0
    i = 1
    while i < n:
        res = st.step()
        while i < n and grid[i] <= st.t:
            out[i] = res.y1 if grid[i] == st.t else res.dense(grid[i])
            logs[i] = log_scale
            i += 1
        big = float(np.max(np.abs(st.y)))
        if big > RENORM_AT and renormalize:
            st.reset(st.y / big)
            log_scale += math.log(big)
    U = out[:, [0, 2, 1, 3]].reshape(n, 2, 2)
    return EvolutionTrajectory(t=grid, U_scaled=U, log_scale=logs, n_steps=st.n_steps)


def R_from_U(state):
    """(R_minus, R_plus, R_minus * R_plus) from an evolution state or matrix."""
    U = state.U if isinstance(state, EvolutionState) else np.asarray(state)
    if abs(U[0, 0]) < 1e-300 or abs(U[1, 1]) < 1e-300:
        raise DivisionNearZero("diagonal element of U vanished")
    rm = U[1, 0] / U[0, 0]
    rp = U[0, 1] / U[1, 1]
    return rm, rp, rm * rp


@dataclass
class PopulationTrajectory:
    t: np.ndarray
    c_minus: np.ndarray
    c_plus: np.ndarray
    c_minus_adiabatic: np.ndarray
    im_lambda: np.ndarray
    int_im_lambda: np.ndarray


def propagate_populations(source, c0, grid, tol=1e-10):
    """c(t) = U(t) c(0) plus the adiabatic prediction c_-^ad = c_-(0) e^{i int lam}."""
    source = as_source(source)
    traj = propagate_U(source, grid, tol)
    c0 = np.asarray(c0, complex)
    c = np.einsum("nij,j->ni", traj.U, c0)
    lam_int = integrate_lambda(source, traj.t)
    lam = source.lam(traj.t)
    return PopulationTrajectory(
        t=traj.t,
        c_minus=c[:, 0],
        c_plus=c[:, 1],
        c_minus_adiabatic=c0[0] * np.exp(1j * lam_int),
        im_lambda=lam.imag,
        int_im_lambda=lam_int.imag,
    )


# --- Riccati flow with chart switching ----------------------------------------


@dataclass(frozen=True)
class TransitionAmplitude:
    chart: str
    value: complex
    t: float

    @property
    def R(self):
        if self.chart == CHART_NAMES[R_CHART]:
            return self.value
        return complex(math.inf) if self.value == 0 else 1 / self.value


@dataclass
class RTrajectory:
    t: np.ndarray
    value: np.ndarray
    chart: np.ndarray
    switches: list
    n_steps: int = 0

    def __len__(self):
        return self.t.size

    def __getitem__(self, i):
        return TransitionAmplitude(CHART_NAMES[int(self.chart[i])], complex(self.value[i]), float(self.t[i]))

    @property
    def log10_abs_R(self):
        with np.errstate(divide="ignore"):
            lv = np.log10(np.abs(self.value))
        return np.where(self.chart == R_CHART, lv, -lv)

    @property
    def abs_R(self):
        return 10.0**self.log10_abs_R

    @property
    def R(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.chart == R_CHART, self.value, 1 / self.value)


def _riccati(lam_f, grid, value0, chart0, sign, tol, band, h_max):
    lo, hi = band
    state = {"s": sign * (1 if chart0 == R_CHART else -1)}

    def rhs(t, y):
        lam, f = lam_f(t)
        s = state["s"]
        x = y[0]
        return np.array([-2j * s * lam * x - 1j * s * f * (1 + x * x)])

    n = grid.size
    vals = np.empty(n, complex)
    charts = np.empty(n, int)
    vals[0], charts[0] = value0, chart0
    chart = chart0
    switches = []
    if n == 1:
        return vals, charts, switches, 0
    st = DormandPrince(rhs, grid[0], np.array([value0]), grid[-1], rtol=tol, atol=tol, h_max=h_max)
    i = 1
    while i < n:
        res = st.step()
        while i < n and st.direction * (grid[i] - st.t) <= 0:
            vals[i] = res.y1[0] if grid[i] == st.t else res.dense(grid[i])[0]
            charts[i] = chart
            i += 1
        x = st.y[0]
        if abs(x) > hi:
            new = 1 / x
            switches.append((st.t, chart, x, new))
            chart = 1 - chart
            state["s"] = -state["s"]
            st.reset(np.array([new]))
    return vals, charts, switches, st.n_steps


def propagate_R(source, R0, grid, tol=1e-10, which="minus", band=(0.8, 1.25), h_max=None, chart=None):
    """Riccati integration of R_- (or R_+ with which='plus') on the grid.

    R0 may be complex('inf'); `chart` forces the starting chart, in which
    case R0 is read as the value in that chart.
    """
    source = as_source(source)
    grid = np.asarray(grid, float)
    sign = 1 if which == "minus" else -1
    if chart is None:
        if np.isfinite(R0) and abs(R0) <= 1:
            chart, v0 = R_CHART, complex(R0)
        else:
            chart, v0 = INVERSE_CHART, 0j if not np.isfinite(R0) else 1 / complex(R0)
    else:
        v0 = complex(R0)
    hm = math.inf if h_max is None else h_max
    vals, charts, sw, nst = _riccati(source.lam_f, grid, v0, chart, sign, tol, band, hm)
    return RTrajectory(t=grid, value=vals, chart=charts, switches=sw, n_steps=nst)


class _ContourDrive:
    """lam_f along a polyline z(s) in complex time, scaled by dz/ds."""

    def __init__(self, source, nodes, samples_per_unit=64):
        self.nodes = np.asarray(nodes, complex)
        seg = np.abs(np.diff(self.nodes))
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self.cum[-1])
        m = max(2048, int(self.length * samples_per_unit))
        s = np.linspace(0.0, self.length, m)
        self._s = s
        z = self.z(s)
        self._lam = source.lam_complex(z)
        self._re, self._im = self._lam.real.copy(), self._lam.imag.copy()
        self.source = source

    def z(self, s):
        s = np.asarray(s, float)
        k = np.clip(np.searchsorted(self.cum, s, side="right") - 1, 0, len(self.nodes) - 2)
        d = self.nodes[k + 1] - self.nodes[k]
        return self.nodes[k] + d / np.abs(d) * (s - self.cum[k])

    def lam_f(self, s):
        k = min(max(int(np.searchsorted(self.cum, s, side="right")) - 1, 0), len(self.nodes) - 2)
        d = self.nodes[k + 1] - self.nodes[k]
        dz = d / abs(d)
        z = self.nodes[k] + dz * (s - self.cum[k])
        ref = complex(np.interp(s, self._s, self._re), np.interp(s, self._s, self._im))
        lam = complex(np.sqrt(complex(self.source.lam_sq(z))))
        if abs(lam - ref) > abs(lam + ref):
            lam = -lam
        f = complex(self.source.f_complex(z))
        return lam * dz, f * dz


def propagate_R_detour(source, R0, t0, t_return, depth, grid, tol=1e-10, which="minus", band=(0.8, 1.25)):
    """Riccati integration that leaves the real axis: t0 -> t0 + i*depth ->
    t_return + i*depth -> t_return, then along the real grid (grid[0] >= t_return).

    The analytic continuation keeps exponentially small terms above the
    rounding floor of the real-axis flow. Closed-form sources only.
    """
    source = as_source(source)
    if not source.analytic:
        raise ValueError("complex-time detour needs a closed-form source")
    nodes = [t0, t0 + 1j * depth, t_return + 1j * depth, t_return]
    drive = _ContourDrive(source, nodes)
    sign = 1 if which == "minus" else -1
    if np.isfinite(R0) and abs(R0) <= 1:
        chart, v0 = R_CHART, complex(R0)
    else:
        chart, v0 = INVERSE_CHART, 0j if not np.isfinite(R0) else 1 / complex(R0)
    vals, charts, sw, _ = _riccati(drive.lam_f, np.array([0.0, drive.length]), v0, chart, sign, tol, band, math.inf)
    grid = np.asarray(grid, float)
    if grid[0] > t_return:
        grid = np.concatenate([[t_return], grid])
        trim = 1
    else:
        trim = 0
    traj = propagate_R(source, vals[-1], grid, tol, which, band, chart=int(charts[-1]))
    if trim:
        traj = RTrajectory(traj.t[1:], traj.value[1:], traj.chart[1:], traj.switches, traj.n_steps)
    return traj


# --- lab-basis cross-check -----------------------------------------------------


def eigenbasis_half_phase(spec: Spectrum, t):
    """exp(i theta/2) along a fine grid, continuous from the principal value at t[0]."""
    om, gam, g = spec.path.params(t)
    lam = spec.lam(t)
    e = (om + 0.5j * gam - 1j * g) / lam
    return continue_branch(np.sqrt(e))


def propagate_lab(source, c0, grid, tol=1e-10):
    """Integrate i dpsi/dt = M psi in the lab basis and project onto the
    continuously transported eigenbasis; returns (c_minus, c_plus) arrays."""
    spec = as_source(source)
    if not isinstance(spec, Spectrum):
        raise ValueError("lab-basis integration needs a parameter path")
    path = spec.path
    grid = np.asarray(grid, float)
    h = eigenbasis_half_phase(spec, grid)
    c = 0.5 * (h + 1 / h)
    s = -0.5j * (h - 1 / h)
    c0 = np.asarray(c0, complex)
    psi0 = np.array([c[0] * c0[0] - s[0] * c0[1], s[0] * c0[0] + c[0] * c0[1]])

    def rhs(t, y):
        om, gam, g = path.params(t)
        a = complex(om, 0.5 * float(gam))
        g = float(g)
        return np.array([-1j * (-a * y[0] + g * y[1]), -1j * (g * y[0] + a * y[1])])

    psi = solve(rhs, grid, psi0, rtol=tol, atol=tol)
    cm = c * psi[:, 0] + s * psi[:, 1]
    cp = -s * psi[:, 0] + c * psi[:, 1]
    return cm, cp
