"""Complex-argument Bessel functions, modified Bessel I0 and the exponential integral.

Power series near the origin, Hankel-type asymptotic expansions far from it.
Y0 and Y1 accept an explicit sheet index so that solutions can be carried
continuously around the logarithmic branch point at z = 0.
"""

from __future__ import annotations

import cmath
import math

from .errors import SpecialFunctionDomain

EULER_GAMMA = 0.5772156649015329
SERIES_RADIUS = 12.0
MAX_ABS = 1e4


def _series_j(z, n):
    # sum_k (-1)^k (z/2)^{2k+n} / (k! (k+n)!)
    h = 0.5 * z
    q = -h * h
    term = h**n / math.factorial(n)
    total = term
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + n))
        total += term
        if abs(term) <= 1e-17 * abs(total) and k > 2:
            return total


def _series_y(z, j0, j1):
    h = 0.5 * z
    q = -h * h
    lg = cmath.log(h) + EULER_GAMMA
    # Y0: (2/pi)[lg J0 + sum_{k>=1} (-1)^{k+1} H_k (z^2/4)^k / (k!)^2]
    term0 = 1.0 + 0j
    s0 = 0j
    # Y1: -2/(pi z) + (2/pi) lg J1 - (1/pi) sum_k (-1)^k (H_k + H_{k+1}) (z/2)^{2k+1} / (k! (k+1)!)
    term1 = h
    s1 = term1  # k = 0: H_0 + H_1 = 1
    hk = 0.0
    k = 0
    while True:
        k += 1
        hk += 1.0 / k
        term0 *= q / (k * k)
        d0 = -term0 * hk
        s0 += d0
        term1 *= q / (k * (k + 1))
        d1 = term1 * (hk + hk + 1.0 / (k + 1))
        s1 += d1
        if k > 2 and abs(d0) <= 1e-17 * max(abs(s0), 1e-300) and abs(d1) <= 1e-17 * abs(s1):
            break
    y0 = (2 / math.pi) * (lg * j0 + s0)
    y1 = -2 / (math.pi * z) + (2 / math.pi) * lg * j1 - s1 / math.pi
    return y0, y1


def _hankel_pq(z, n):
    # P, Q of the large-argument expansion, truncated at the smallest term
    mu = 4.0 * n * n
    p = 1.0 + 0j
    q = 0j
    term = 1.0 + 0j
    k = 0
    last = math.inf
    z8 = 8.0 * z
    while k < 200:
        k += 1
        term = term * (mu - (2 * k - 1) ** 2) / (k * z8)
        a = abs(term)
        if a > last or a < 1e-17:
            break
        last = a
        if k % 2 == 1:
            q += term if (k // 2) % 2 == 0 else -term
        else:
            p += -term if (k // 2) % 2 == 1 else term
    return p, q


def _asym_jy(z, n):
    p, q = _hankel_pq(z, n)
    chi = z - (0.5 * n + 0.25) * math.pi
    amp = cmath.sqrt(2 / (math.pi * z))
    c, s = cmath.cos(chi), cmath.sin(chi)
    return amp * (p * c - q * s), amp * (p * s + q * c)


def _principal(z):
    """(J0, J1, Y0, Y1) for Re z >= 0 (principal branch)."""
    if abs(z) <= SERIES_RADIUS:
        j0, j1 = _series_j(z, 0), _series_j(z, 1)
        y0, y1 = _series_y(z, j0, j1)
        return j0, j1, y0, y1
    j0, y0 = _asym_jy(z, 0)
    j1, y1 = _asym_jy(z, 1)
    return j0, j1, y0, y1


def bessel_jy(z, sheet=None):
    """J0, J1, Y0, Y1 at complex z.

    Y is on the principal branch (cut along the negative real axis) unless
    `sheet` gives the continuous argument of z, in which case the value
    continued to that argument is returned.
    """
    z = complex(z)
    if z == 0:
        raise SpecialFunctionDomain("Y0, Y1 are singular at z = 0")
    if abs(z) > MAX_ABS:
        raise SpecialFunctionDomain(f"|z| = {abs(z):.3g} exceeds {MAX_ABS:g}")
    arg = cmath.phase(z) if sheet is None else float(sheet)
    # reduce to |arg| <= pi/2 using z = w e^{m pi i}
    m = round(arg / math.pi)
    w = abs(z) * cmath.exp(1j * (arg - m * math.pi))
    j0, j1, y0, y1 = _principal(w)
    if m == 0:
        return j0, j1, y0, y1
    s1 = -1.0 if m % 2 else 1.0
    return j0, s1 * j1, y0 + 2j * m * j0, s1 * (y1 + 2j * m * j1)


def j0(z):
    return bessel_jy(z)[0] if z != 0 else 1.0 + 0j


def j1(z):
    return bessel_jy(z)[1] if z != 0 else 0j


def y0(z):
    return bessel_jy(z)[2]


def y1(z):
    return bessel_jy(z)[3]


def bessel_i0(z, scaled=False):
    """I0(z); with scaled=True returns exp(-|Re z|) I0(z)."""
    z = complex(z)
    if z.real < 0:
        z = -z
    if abs(z) <= SERIES_RADIUS:
        h = 0.25 * z * z
        term = 1.0 + 0j
        total = term
        k = 0
        while True:
            k += 1
            term *= h / (k * k)
            total += term
            if abs(term) <= 1e-17 * abs(total):
                break
        return total * math.exp(-z.real) if scaled else total

    # large |z|, Re z >= 0: e^z/sqrt(2 pi z) sum ((2k-1)!!)^2 / (k! (8z)^k), plus the
    # recessive e^{-z} part which matters near the imaginary axis
    def series(x):
        s = 1.0 + 0j
        t = 1.0 + 0j
        last = math.inf
        for k in range(1, 200):
            t = t * (2 * k - 1) ** 2 / (k * 8.0 * x)
            if abs(t) > last or abs(t) < 1e-17:
                break
            last = abs(t)
            s += t
        return s

    sz = cmath.sqrt(2 * math.pi * z)
    dom = series(z) / sz
    # I0(z) ~ [e^z S(z) +- i e^{-z} S(-z)] / sqrt(2 pi z), sign of Im z
    sgn = 1j if z.imag >= 0 else -1j
    rec = sgn * series(-z) / sz
    if scaled:
        return cmath.exp(1j * z.imag) * dom + rec * cmath.exp(-z - z.real)
    return cmath.exp(z) * dom + rec * cmath.exp(-z)


def exp1(z):
    """Exponential integral E1(z), principal branch (cut on the negative real axis)."""
    z = complex(z)
    if z == 0:
        raise SpecialFunctionDomain("E1 is singular at z = 0")
    az = abs(z)
    if az <= 2.0 or (z.real < 0 and abs(z.imag) < 0.6 * az):
        # -gamma - log z - sum_{k>=1} (-z)^k / (k k!)
        term = 1.0 + 0j
        total = 0j
        k = 0
        while True:
            k += 1
            term *= -z / k
            d = term / k
            total += d
            if abs(d) <= 1e-17 * max(abs(total), 1e-300) and k > az:
                break
            if k > 1000:
                raise SpecialFunctionDomain("E1 series did not converge")
        return -EULER_GAMMA - cmath.log(z) - total
    # modified Lentz on the even form e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))
    tiny = 1e-300
    b = z + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 20000):
        a = -float(i * i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h * cmath.exp(-z)
    raise SpecialFunctionDomain("E1 continued fraction did not converge")
