"""Dormand-Prince 5(4) with dense output, for small complex-valued systems.

Written for states of a few complex numbers, where per-step Python overhead
dominates; the right-hand side receives and returns 1-d complex arrays.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import IntegrationOverflow, StepSizeUnderflow

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# dense output weights (Hairer & Wanner, DOPRI5)
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423


class StepResult:
    __slots__ = ("cont", "h", "k1", "k7", "t0", "y0", "y1")

    def dense(self, t):
        th = (t - self.t0) / self.h
        th1 = 1.0 - th
        r1, r2, r3, r4, r5 = self.cont
        return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))


class DormandPrince:
    """Adaptive stepper; call `step()` repeatedly and read `last`.

    Error control is the usual mixed test |err_i| <= atol + rtol*|y_i|
    in the RMS norm.
    """

    def __init__(self, rhs, t0, y0, t_end, rtol=1e-10, atol=1e-10, h0=None, h_max=math.inf):
        self.rhs = rhs
        self.t = float(t0)
        self.y = np.asarray(y0, dtype=complex).copy()
        self.t_end = float(t_end)
        self.rtol = rtol
        self.atol = atol
        self.h_max = h_max
        self.direction = 1.0 if t_end >= t0 else -1.0
        self.k1 = rhs(self.t, self.y)
        self.h = h0 if h0 is not None else self._initial_step()
        self.n_steps = 0
        self.n_rejected = 0
        self.last = None

    def reset(self, y):
        """Replace the state (after a change of variables) keeping t and h."""
        self.y = np.asarray(y, dtype=complex).copy()
        self.k1 = self.rhs(self.t, self.y)

    def _initial_step(self):
        sc = self.atol + self.rtol * np.abs(self.y)
        d0 = np.sqrt(np.mean(np.abs(self.y / sc) ** 2))
        d1 = np.sqrt(np.mean(np.abs(self.k1 / sc) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        y1 = self.y + self.direction * h0 * self.k1
        k = self.rhs(self.t + self.direction * h0, y1)
        d2 = np.sqrt(np.mean(np.abs((k - self.k1) / sc) ** 2)) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** 0.2
        return min(100 * h0, h1, self.h_max, abs(self.t_end - self.t))

    def done(self):
        return self.direction * (self.t_end - self.t) <= 0

    def step(self):
        rhs = self.rhs
        t, y, k1 = self.t, self.y, self.k1
        h = min(self.h, self.h_max)
        remaining = abs(self.t_end - t)
        if h >= remaining or remaining - h < 1e-12 * max(1.0, abs(t)):
            h = remaining
        while True:
            hs = self.direction * h
            if h < 1e-14 * max(1.0, abs(t)):
                raise StepSizeUnderflow(t)
            k2 = rhs(t + C2 * hs, y + hs * (A21 * k1))
            k3 = rhs(t + C3 * hs, y + hs * (A31 * k1 + A32 * k2))
            k4 = rhs(t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = rhs(t + C5 * hs, y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            k6 = rhs(t + hs, y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
            y1 = y + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
            k7 = rhs(t + hs, y1)
            err = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
            sc = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y1))
            en = math.sqrt(float(np.mean(np.abs(err / sc) ** 2)))
            if not math.isfinite(en):
                if not np.all(np.isfinite(y1)) and np.all(np.isfinite(y)) and np.max(np.abs(y)) > 1e290:
                    raise IntegrationOverflow(t)
                h *= 0.2
                self.n_rejected += 1
                continue
            if en <= 1.0:
                break
            h *= max(0.2, 0.9 * en**-0.2)
            self.n_rejected += 1
        res = StepResult()
        res.t0, res.h, res.y0, res.y1, res.k1, res.k7 = t, hs, y, y1, k1, k7
        ydiff = y1 - y
        bspl = hs * k1 - ydiff
        res.cont = (
            y,
            ydiff,
            bspl,
            ydiff - hs * k7 - bspl,
            hs * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
        )
        self.last = res
        self.t = t + hs if h != remaining else self.t_end
        self.y = y1
        self.k1 = k7
        self.n_steps += 1
        fac = 10.0 if en == 0 else min(10.0, max(0.2, 0.9 * en**-0.2))
        self.h = h * fac
        if np.max(np.abs(y1)) > 1e300:
            raise IntegrationOverflow(self.t)
        return res


def solve(rhs, t_eval, y0, rtol=1e-10, atol=1e-10, h_max=math.inf):
    """Integrate from t_eval[0] and return states at every t_eval."""
    t_eval = np.asarray(t_eval, float)
    out = np.empty((t_eval.size, np.size(y0)), dtype=complex)
    out[0] = y0
    if t_eval.size == 1:
        return out
    st = DormandPrince(rhs, t_eval[0], y0, t_eval[-1], rtol, atol, h_max=h_max)
    i = 1
    while i < t_eval.size:
        res = st.step()
        t_hi = st.t
        while i < t_eval.size and st.direction * (t_eval[i] - t_hi) <= 0:
            out[i] = res.y1 if t_eval[i] == t_hi else res.dense(t_eval[i])
            i += 1
    return out
