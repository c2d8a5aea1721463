"""Eigenbasis populations under additive white noise, and ensemble statistics.

Each trajectory integrates dc = A(t) c dt + dW with A the eigenbasis
generator and dW independent complex Gaussian increments of variance
gamma N dt per component. Every trajectory owns a Philox stream spawned from
one SeedSequence, so its noise does not depend on batching or threading;
batch statistics are merged with a fixed-shape pairwise tree, so the
ensemble result is bit-reproducible for a given seed.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig, StepTooLarge
from .propagator import eigenbasis_half_phase
from .spectrum import Spectrum, as_source, critical_times

THREADS_ENV = "EPDYN_THREADS"
MAX_REL_DRIFT = 0.5
BLOCK = 1024


@dataclass(frozen=True)
class NoiseConfig:
    N: float
    n_traj: int
    seed: int
    dt: float
    gamma: float = 1.0
    basis: str = "eigen"  # "lab": noise added to the lab amplitudes instead
    record_every: int = 8
    batch: int = 1000

    def validate(self, T: float):
        if not (math.isfinite(self.N) and self.N >= 0):
            raise InvalidConfig("noise strength must be finite and >= 0", "N")
        if isinstance(self.n_traj, bool) or not isinstance(self.n_traj, int) or self.n_traj < 2:
            raise InvalidConfig("need at least 2 trajectories", "n_traj")
        if not (self.dt > 0 and self.dt <= T / 8192 * (1 + 1e-12)):
            raise InvalidConfig(f"dt must lie in (0, T/8192] = (0, {T / 8192:.6g}]", "dt")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer", "seed")
        if self.basis not in ("eigen", "lab"):
            raise InvalidConfig("basis must be 'eigen' or 'lab'", "basis")
        if self.record_every < 1 or self.batch < 1:
            raise InvalidConfig("record_every and batch must be positive", "record_every")


@dataclass
class EnsembleBand:
    """Per-time statistics of log10|R_minus| across the ensemble."""

    grid: np.ndarray
    mean_log10R: np.ndarray
    std_log10R: np.ndarray
    n_traj: int
    crossings: np.ndarray = field(repr=False, default=None)  # (n_traj, n_crits) first exits
    crit_times: np.ndarray = field(repr=False, default=None)
    crit_signs: np.ndarray = field(repr=False, default=None)

    def exit_stats(self):
        """Mean, standard deviation and standard error of each crit's exit time."""
        ok = np.isfinite(self.crossings)
        n = ok.sum(axis=0)
        x = np.where(ok, self.crossings, 0.0)
        mean = x.sum(axis=0) / np.maximum(n, 1)
        var = (np.where(ok, self.crossings - mean, 0.0) ** 2).sum(axis=0) / np.maximum(n - 1, 1)
        std = np.sqrt(var)
        return mean, std, std / np.sqrt(np.maximum(n, 1))

    @property
    def mean_absR(self):
        return 10.0**self.mean_log10R

    @property
    def std_absR(self):
        """Half-width of the band in |R|, from the log-space spread."""
        return 0.5 * (10.0 ** (self.mean_log10R + self.std_log10R) - 10.0 ** (self.mean_log10R - self.std_log10R))

    @property
    def band(self):
        return 10.0 ** (self.mean_log10R - self.std_log10R), 10.0 ** (self.mean_log10R + self.std_log10R)


def _merge(a, b):
    # Chan et al. pairwise update of (count, mean, M2)
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    # empty sides (all samples non-finite) carry a placeholder mean; skip them
    ma0, mb0 = np.where(na > 0, ma, 0.0), np.where(nb > 0, mb, 0.0)
    d = mb0 - ma0
    w = nb / np.maximum(n, 1)
    mean = np.where(na == 0, mb, np.where(nb == 0, ma, ma0 + d * w))
    return n, mean, sa + sb + d * d * (na * w)


def _tree_reduce(parts):
    while len(parts) > 1:
        nxt = [_merge(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def _threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _first_exits(t, logR, crit_t, crit_sign):
    """First |R| = 1 crossing after each crit, upward after a sign +1 crit and
    downward after a sign -1 crit (nan when none before the next crit)."""
    out = np.full((logR.shape[0], len(crit_t)), np.nan)
    up = (logR[:, :-1] < 0) & (logR[:, 1:] >= 0)
    down = (logR[:, :-1] >= 0) & (logR[:, 1:] < 0)
    for k, tc in enumerate(crit_t):
        t_end = crit_t[k + 1] if k + 1 < len(crit_t) else math.inf
        sel = (t[:-1] >= tc) & (t[:-1] < t_end)
        if not sel.any():
            continue
        idx = np.where(sel)[0]
        hit = (up if crit_sign[k] > 0 else down)[:, idx]
        any_hit = hit.any(axis=1)
        first = idx[np.argmax(hit, axis=1)]
        y0, y1 = logR[np.arange(logR.shape[0]), first], logR[np.arange(logR.shape[0]), first + 1]
        frac = np.where(y1 != y0, -y0 / np.where(y1 != y0, y1 - y0, 1.0), 0.0)
        tx = t[first] + frac * (t[first + 1] - t[first])
        out[:, k] = np.where(any_hit, tx, np.nan)
    return out


class _Drive:
    """lambda, f (and the lab->eigen map) at the step times."""

    def __init__(self, source, t0, n_steps, dt, lab):
        tn = t0 + dt * np.arange(n_steps + 1)
        self.lam_n, self.f_n = source.lam(tn), source.f(tn)
        self.lab = lab
        if lab:
            h = eigenbasis_half_phase(source, tn)
            self.cos = 0.5 * (h + 1 / h)
            self.sin = -0.5j * (h - 1 / h)


def _run_batch(drive: _Drive, c0, seqs, N, gamma, dt, n_steps, rec):
    """Euler-Maruyama over a batch; returns log10|R| at recorded steps."""
    m = len(seqs)
    gens = [np.random.Generator(np.random.Philox(s)) for s in seqs]
    cm = np.full(m, complex(c0[0]))
    cp = np.full(m, complex(c0[1]))
    out = np.empty((m, n_steps // rec + 1))
    with np.errstate(divide="ignore"):
        out[:, 0] = np.log10(np.abs(cp / cm))
    sd = math.sqrt(gamma * N * dt / 2.0)
    lam, f = drive.lam_n, drive.f_n
    k = 0
    while k < n_steps:
        nb = min(BLOCK, n_steps - k)
        if N > 0:
            # per-trajectory streams: draws are independent of batching
            z = np.stack([g.standard_normal((nb, 4)) for g in gens], axis=1) * sd
            dw_m = z[..., 0] + 1j * z[..., 1]
            dw_p = z[..., 2] + 1j * z[..., 3]
            if drive.lab:
                # lab-basis noise mapped through the (unit-determinant) inverse frame
                c, s = drive.cos[k : k + nb, None], drive.sin[k : k + nb, None]
                dw_m, dw_p = c * dw_m + s * dw_p, -s * dw_m + c * dw_p
        for j in range(nb):
            n = k + j
            la, fa = lam[n], f[n]
            cm, cp = cm + 1j * dt * (la * cm + fa * cp), cp - 1j * dt * (fa * cm + la * cp)
            if N > 0:
                cm = cm + dw_m[j]
                cp = cp + dw_p[j]
            if (n + 1) % rec == 0:
                with np.errstate(divide="ignore", invalid="ignore"):
                    out[:, (n + 1) // rec] = np.log10(np.abs(cp / cm))
        k += nb
    return out


def simulate_noisy_ensemble(source, c0, cfg: NoiseConfig, t0=0.0, t1=None) -> EnsembleBand:
    """Ensemble of noisy population trajectories; statistics of log10|R_minus|."""
    source = as_source(source)
    T = source.period or (source.domain[1] - source.domain[0])
    cfg.validate(T)
    t1 = source.domain[1] if t1 is None else t1
    n_steps = int(round((t1 - t0) / cfg.dt))
    rec = cfg.record_every
    n_steps -= n_steps % rec
    if cfg.basis == "lab" and not isinstance(source, Spectrum):
        raise InvalidConfig("lab-basis noise needs a parameter path", "basis")
    drive = _Drive(source, t0, n_steps, cfg.dt, cfg.basis == "lab")
    # |dc|/|c| <= ||A|| dt <= (|lambda| + |f|) dt whatever the state
    worst = float(np.max(np.abs(drive.lam_n) + np.abs(drive.f_n))) * cfg.dt
    if worst > MAX_REL_DRIFT:
        raise StepTooLarge(f"drift can change |c| by {worst:.3g} of itself in one step; reduce dt")
    grid = t0 + cfg.dt * np.arange(0, n_steps + 1, rec)
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.n_traj)
    batches = [seqs[i : i + cfg.batch] for i in range(0, cfg.n_traj, cfg.batch)]
    crit_list = critical_times(source, t0, t1)
    crits = [c.t for c in crit_list]
    signs = [c.sign for c in crit_list]

    def work(b):
        logR = _run_batch(drive, c0, b, cfg.N, cfg.gamma, cfg.dt, n_steps, rec)
        ok = np.isfinite(logR)
        n = ok.sum(axis=0).astype(float)
        # columns where every value is infinite (R = 0 at the start) get mean -inf
        mean = np.where(n > 0, np.where(ok, logR, 0.0).sum(axis=0) / np.maximum(n, 1), -np.inf)
        m2 = (np.where(ok, logR, 0.0) - np.where(n > 0, mean, 0.0)) ** 2 * ok
        return (n, mean, m2.sum(axis=0)), _first_exits(grid, logR, crits, signs)

    nthreads = _threads()
    if nthreads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            results = list(ex.map(work, batches))
    else:
        results = [work(b) for b in batches]
    n, mean, m2 = _tree_reduce([r[0] for r in results])
    mean = np.where(n > 0, mean, -np.inf)
    m2 = np.where(n > 0, m2, 0.0)
    std = np.sqrt(m2 / np.maximum(n - 1, 1))
    exits = np.concatenate([r[1] for r in results], axis=0)
    return EnsembleBand(grid=grid, mean_log10R=mean, std_log10R=std, n_traj=cfg.n_traj, crossings=exits, crit_times=np.array(crits), crit_signs=np.array(signs))
