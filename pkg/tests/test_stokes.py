import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from epdynamics.errors import InvalidConfig, PoleAtInput, ValidityWarning
from epdynamics.paths import make_path
from epdynamics.stokes import compare_with_numeric, exact_p, exact_R, mobius_p_to_R, mobius_R_to_p, stokes_asymptotic_R

cplx = st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)
phase = st.floats(min_value=-math.pi, max_value=math.pi)


@given(cplx, phase)
def test_mobius_round_trip(R, th):
    e = cmath.exp(1j * th)
    assume(abs(1 - 1j * R) > 1e-6)
    p = mobius_R_to_p(R, e)
    assume(abs(1 + p / e) > 1e-6)
    back = mobius_p_to_R(p, e)
    assert abs(back - R) <= 1e-12 * max(1.0, abs(R)) ** 2


def test_mobius_poles():
    with pytest.raises(PoleAtInput):
        mobius_R_to_p(-1j, 1.0)
    with pytest.raises(PoleAtInput):
        mobius_p_to_R(-1.0, 1.0)


def _reduced_p(cfg, t_eval, p0):
    # dp/dt = r e^{i phi} + gamma p^2, integrated directly
    path = make_path(cfg)

    def rhs(t, y):
        p = y[0] + 1j * y[1]
        d = cfg["r"] * cmath.exp(1j * path.phase(t)) + cfg.get("gamma", 1.0) * p * p
        return [d.real, d.imag]

    s = solve_ivp(rhs, (t_eval[0], t_eval[-1]), [p0.real, p0.imag], method="DOP853", rtol=1e-12, atol=1e-14, t_eval=t_eval)
    return s.y[0] + 1j * s.y[1]


@pytest.mark.parametrize("direction, phi0", [(-1, math.pi), (1, 0.0), (-1, 0.3)])
def test_exact_p_solves_reduced_equation(direction, phi0):
    cfg = dict(kind="circular", r=0.1, gamma=1.0, T=45.0, direction=direction, phi0=phi0, periods=2)
    t = np.linspace(0, 90, 181)
    p0 = 0.05 + 0.02j
    ex = exact_p(make_path(cfg), t, 0.0, p0)
    ref = _reduced_p(cfg, t, p0)
    ok = np.abs(ref) < 1e3
    assert np.allclose(ex[ok], ref[ok], rtol=1e-8, atol=1e-10)


def test_exact_R_initial_value():
    cfg = dict(kind="circular", r=0.1, gamma=1.0, T=100.0, direction=-1, phi0=math.pi)
    R = exact_R(make_path(cfg), [0.0, 10.0], 0.0, 0.01 + 0.01j)
    assert R[0] == pytest.approx(0.01 + 0.01j, abs=1e-12)


def test_rejects_other_kinds_and_warns_large_radius():
    with pytest.raises(InvalidConfig):
        exact_R(dict(kind="displaced-circular", r=0.1, g_offset=0.2, T=10.0, direction=1), [0.0], 0.0, 0j)
    # a displaced circle with zero offset is the centred one
    exact_R(dict(kind="displaced-circular", r=0.1, g_offset=0.0, T=10.0, direction=1), [0.0, 1.0], 0.0, 0j)
    with pytest.warns(ValidityWarning):
        exact_R(dict(kind="circular", r=0.5, T=10.0, direction=1), [0.0, 1.0], 0.0, 0j)


def test_oracle_transitions_line_up():
    # the reduced closed form and the full flow cross |R| = 1 at nearly the same times;
    # the residual log-mismatch sits on the steep flanks of those crossings
    from epdynamics.asymptotics import unit_crossings

    T = 100 * math.sqrt(0.1 / 0.01)
    rep = compare_with_numeric(dict(kind="circular", r=0.01, gamma=1.0, T=T, direction=-1, phi0=math.pi, periods=4), n_grid=2001)
    g = np.array(rep.grid)
    a = unit_crossings(g, np.array(rep.logR_numeric))
    b = unit_crossings(g, np.array(rep.logR_exact))
    assert len(a) == len(b) == 5
    assert np.max(np.abs(np.array(a) - np.array(b))) < 0.03 * T
    assert rep.coverage_fraction > 0.9


def test_stokes_form_switches_on_after_crit():
    cfg = dict(kind="circular", r=0.1, gamma=1.0, T=100.0, direction=-1, phi0=math.pi, periods=2)
    t = np.array([10.0, 60.0, 140.0])
    R = stokes_asymptotic_R(make_path(cfg), t)
    assert R.shape == (3,)
    assert np.all(np.isfinite(R))
