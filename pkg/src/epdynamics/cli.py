"""epdyn: figure-data runs from the command line.

Every command reads a run file (path, preset name or a previous
manifest.json), writes CSV/JSON into --out and a manifest.json listing every
output with its sha256. Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 validity warning under --strict.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import analytic_prediction, delay_time, manifold_values, numeric_exit
from .errors import EPDynamicsError, InvalidConfig, QuasiAdiabaticViolation, ValidityWarning, WindowNotConverged
from .io import RunManifest, write_csv, write_json, write_rows
from .noise import NoiseConfig, simulate_noisy_ensemble
from .paths import LambdaPrototype
from .propagator import integrate_lambda, propagate_R, propagate_U
from .runconfig import load_run, parse_sweep, preset_names, time_unit
from .spectrum import critical_times
from .stokes import compare_with_numeric

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_STRICT = 0, 2, 3, 4
STRICT_WARNINGS = (ValidityWarning, QuasiAdiabaticViolation, WindowNotConverged)
DELAY_COLUMNS = [
    "param",
    "value",
    "T",
    "t_star",
    "sign",
    "Re_Delta",
    "Im_Delta",
    "t_plus",
    "t_plus_analytic",
    "t_plus_max",
    "t_plus_numeric",
    "numeric_route",
    "source",
    "error",
]


def _window(source, t0_T, t1_T):
    T = time_unit(source)
    lo, hi = source.domain
    t0 = lo + t0_T * T
    t1 = hi if t1_T is None else lo + t1_T * T
    if not t1 > t0:
        raise InvalidConfig(f"empty time window [{t0:.6g}, {t1:.6g}]", "run.t1_T")
    return t0, t1


def _initial_state(source, init, t0):
    """(c_minus, c_plus) at t0; 'stable' puts R on the stable manifold there."""
    if init == "stable":
        lam = complex(source.lam(np.array([t0]))[0])
        if lam.imag < 0:
            return np.array([1.0, complex(manifold_values(source, [t0], "ad")[0])])
        return np.array([complex(manifold_values(source, [t0], "nad")[0]), 1.0])
    if "R" in init:
        return np.array([1.0, complex(*init["R"])])
    return np.array([complex(*x) for x in init["c"]])


def _R0(c):
    return complex(math.inf) if c[0] == 0 else complex(c[1] / c[0])


def cmd_simulate(spec, args, out: Path):
    run = dict(spec.run)
    if args.grid is not None:
        run["grid"] = args.grid
    if args.tol is not None:
        run["tol"] = args.tol
    source = spec.source()
    t0, t1 = _window(source, run["t0_T"], run["t1_T"])
    grid = np.linspace(t0, t1, run["grid"])
    c0 = _initial_state(source, run["init"], t0)
    tr = propagate_U(source, grid, run["tol"])
    # c = U c0 with the renormalization scale restored in log space
    cs = np.einsum("nij,j->ni", tr.U_scaled, c0)
    scale = np.exp(tr.log_scale)
    cm, cp = cs[:, 0] * scale, cs[:, 1] * scale
    rt = propagate_R(source, _R0(c0), grid, run["tol"])
    lam = source.lam(grid)
    lam_int = integrate_lambda(source, grid)
    cm_ad = c0[0] * np.exp(1j * lam_int)
    path = write_csv(
        out / "trajectory.csv",
        {
            "t": grid,
            "re_c_minus": cm.real,
            "im_c_minus": cm.imag,
            "re_c_plus": cp.real,
            "im_c_plus": cp.imag,
            "pop_minus": np.abs(cm) ** 2,
            "pop_plus": np.abs(cp) ** 2,
            "pop_minus_adiabatic": np.abs(cm_ad) ** 2,
            "abs_R": rt.abs_R,
            "log10_abs_R": rt.log10_abs_R,
            "chart": rt.chart,
            "im_lambda": lam.imag,
            "int_im_lambda": lam_int.imag,
        },
    )
    return run, [path], []


def _delay_rows(spec, source, param, value, window_T, with_maximal, numeric):
    T = time_unit(source)
    lo = source.domain[0]
    rows = []
    crits = critical_times(source, lo + window_T[0] * T, lo + window_T[1] * T)
    if not crits:
        return [{"param": param, "value": value, "T": T, "error": "no critical time in window"}]
    analytic = None
    if isinstance(source, LambdaPrototype):
        try:
            analytic = analytic_prediction(source)
        except TypeError:
            analytic = None
    for c in crits:
        row = {"param": param, "value": value, "T": T, "t_star": c.t, "sign": c.sign, "source": "numeric-quadrature"}
        try:
            d = delay_time(source, c.t, sign=c.sign, with_maximal=with_maximal)
            row.update(Re_Delta=d.Delta.real, Im_Delta=d.Delta.imag, t_plus=d.t_plus, t_plus_max=d.t_plus_max)
            if analytic is not None and abs(analytic.t_star - c.t) <= 1e-6 * T:
                row["t_plus_analytic"] = analytic.t_plus
            if numeric:
                ne = numeric_exit(source, c.t, sign=c.sign)
                row.update(t_plus_numeric=ne.t_plus, numeric_route=ne.route)
        except EPDynamicsError as exc:
            # per-point failures stay in the table; the sweep goes on
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def cmd_predict_delay(spec, args, out: Path):
    delay = dict(spec.delay)
    if args.sweep is not None:
        delay["sweep"] = args.sweep
    if spec.path is not None and spec.path.kind == "sampled" and delay["with_maximal"]:
        raise InvalidConfig("maximal-delay columns need a closed-form path (sampled kind given)", "kind")
    if delay["sweep"] is None:
        points = [("", math.nan, {})]
    else:
        name, values = parse_sweep(delay["sweep"])
        points = [(name, v, {name: v}) for v in values]
    rows = []
    for name, v, over in points:
        try:
            source = spec.source(over)
        except InvalidConfig as exc:
            if over:
                rows.append({"param": name, "value": v, "error": f"InvalidConfig: {exc}"})
                continue
            raise
        rows += _delay_rows(spec, source, name, v, delay["crit_window_T"], delay["with_maximal"], delay["numeric"])
    path = write_rows(out / "delays.csv", DELAY_COLUMNS, rows)
    return delay, [path], []


def cmd_noise(spec, args, out: Path):
    nz = dict(spec.noise)
    for key, flag in (("N", args.N), ("n_traj", args.ntraj), ("seed", args.seed)):
        if flag is not None:
            nz[key] = flag
    source = spec.source()
    T = time_unit(source)
    t0_T = spec.run["t0_T"] if nz["t0_T"] is None else nz["t0_T"]
    t1_T = spec.run["t1_T"] if nz["t1_T"] is None else nz["t1_T"]
    t0, t1 = _window(source, t0_T, t1_T)
    gamma = nz["gamma"] if nz["gamma"] is not None else (spec.path.gamma if spec.path is not None else 1.0)
    cfg = NoiseConfig(
        N=float(nz["N"]),
        n_traj=int(nz["n_traj"]),
        seed=int(nz["seed"]),
        dt=T / nz["steps_per_T"],
        gamma=float(gamma),
        basis=nz["basis"],
        record_every=int(nz["record_every"]),
        batch=int(nz["batch"]),
    )
    c0 = _initial_state(source, spec.run["init"], t0)
    band = simulate_noisy_ensemble(source, c0, cfg, t0, t1)
    lo, hi = band.band
    csv_path = write_csv(
        out / "band.csv",
        {
            "t": band.grid,
            "mean_log10R": band.mean_log10R,
            "std_log10R": band.std_log10R,
            "mean_absR": band.mean_absR,
            "band_lo": lo,
            "band_hi": hi,
        },
    )
    mean, std, se = band.exit_stats()
    side = {
        "noise": nz,
        "dt": cfg.dt,
        "t0": t0,
        "t1": t1,
        "exits": [
            {"crit": float(tc), "sign": int(sg), "mean": m, "std": s, "stderr": e, "missing": int(np.sum(~np.isfinite(band.crossings[:, k])))}
            for k, (tc, sg, m, s, e) in enumerate(zip(band.crit_times, band.crit_signs, mean, std, se))
        ],
    }
    side_path = write_json(out / "band.json", side)
    return nz, [csv_path, side_path], [cfg.seed]


def cmd_verify_oracle(spec, args, out: Path):
    if spec.path is None:
        raise InvalidConfig("the closed-form oracle needs a circular path, not a prototype", "path")
    o = spec.oracle
    rep = compare_with_numeric(spec.source().path, n_grid=o["n_grid"], log_tol=o["log_tol"], window=o["window"])
    path = write_json(out / "oracle.json", rep.to_dict())
    return o, [path], []


COMMANDS = {
    "simulate": cmd_simulate,
    "predict-delay": cmd_predict_delay,
    "noise": cmd_noise,
    "verify-oracle": cmd_verify_oracle,
}


def build_parser():
    p = argparse.ArgumentParser(prog="epdyn", description="Eigenvector dynamics along loops around an exceptional point.")
    p.add_argument("--version", action="version", version=f"epdyn {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="run file, preset name or manifest.json")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("--strict", action="store_true", help="treat validity warnings as errors (exit 4)")

    s = sub.add_parser("simulate", help="exact propagation: populations, gain and |R|")
    common(s)
    s.add_argument("--grid", type=int, help="number of output rows")
    s.add_argument("--tol", type=float, help="integrator tolerance")
    s = sub.add_parser("predict-delay", help="delay-time table at each critical time")
    common(s)
    s.add_argument("--sweep", help="param=lo:hi:n or param=v1,v2,...")
    s = sub.add_parser("noise", help="noisy ensemble band of log10|R|")
    common(s)
    s.add_argument("--N", type=float, help="noise strength")
    s.add_argument("--ntraj", type=int, help="ensemble size (500 for a quick run)")
    s.add_argument("--seed", type=int)
    s = sub.add_parser("verify-oracle", help="closed-form circular solution against integration")
    common(s)
    sub.add_parser("presets", help="list bundled presets")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        print("\n".join(preset_names()))
        return EXIT_OK
    out = Path(args.out)
    t_start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.strict:
            for cat in STRICT_WARNINGS:
                warnings.simplefilter("error", cat)
        try:
            spec = load_run(args.config)
            out.mkdir(parents=True, exist_ok=True)
            section, outputs, seeds = COMMANDS[args.command](spec, args, out)
        except InvalidConfig as exc:
            print(f"epdyn: configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except STRICT_WARNINGS as exc:
            print(f"epdyn: {type(exc).__name__} (strict): {exc}", file=sys.stderr)
            return EXIT_STRICT
        except (EPDynamicsError, FloatingPointError, ArithmeticError) as exc:
            print(f"epdyn: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    for w in caught:
        print(f"epdyn: warning: {w.category.__name__}: {w.message}", file=sys.stderr)
    config = spec.to_dict()
    config[{"simulate": "run", "predict-delay": "delay", "noise": "noise", "verify-oracle": "oracle"}[args.command]] = section
    manifest = RunManifest(
        command=args.command,
        config=config,
        version=__version__,
        argv=list(sys.argv[1:] if argv is None else argv),
        seeds=seeds,
    )
    for p in outputs:
        manifest.add_output(p)
    manifest.wall_seconds = time.perf_counter() - t_start
    manifest.write(out)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
