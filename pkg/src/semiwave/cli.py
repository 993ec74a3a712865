"""Batch front-end: parse a run config, orchestrate experiments, emit artifacts.

Subcommands: propagate | scatter | ehrenfest | localize | validate.
Exit codes: 0 ok, 1 validation failure, 2 config error, 3 numerical failure.

Deterministic outputs (CSV, JSON) never contain wall-clock values; timings go
to a separate timings.csv so identical config + seed reproduce byte-identical
result files.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .basis import BasisCoefficients, frame_at
from .classical import initial_state, integrate_flow, lyapunov_fit
from .config import RunConfig, load_config
from .errors import ConfigError, SemiwaveError
from .hierarchy import integrate_hierarchy
from .multiindex import enumerate_upto
from .oracle import grid_norm, l2_error, orbit_grid, propagate
from .scattering import classical_asymptotics, smatrix_apply
from .truncation import (assemble_wavefunction, choose_l, ehrenfest_schedule,
                         kappa_window, localization_mass, residual_norm)
from .validate import run_all

RESULTS_SCHEMA = ("hbar", "t", "l_mode", "l", "error_vs_oracle",
                  "residual_norm", "outside_mass_b")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header, rows, schema: int = 1):
    lines = [f"# semiwave schema={schema} columns={','.join(header)}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _initial_coefficients(cfg: RunConfig, frame, hbar, l):
    """Coefficient map and tail report for the configured initial state."""
    if cfg.initial.coefficients is not None:
        return dict(cfg.initial.coefficients), None
    # declared-tail family: geometric |c_j| = exp(-K |j|), truncated at
    # J(hbar) = nu * l and renormalized; the dropped squared mass is below
    # exp(-K J)
    K = cfg.initial.tail["K"]
    nu = cfg.initial.tail["nu"]
    J = max(1, nu * l)
    d = len(cfg.initial.a)
    coeffs = {j: np.exp(-K * sum(j)) for j in enumerate_upto(d, J)}
    kept = sum(v**2 for v in coeffs.values())
    # full-family mass: per-degree shell count times exp(-2Ks)
    total = kept
    s = J + 1
    while True:
        from .multiindex import count_exact_degree
        term = count_exact_degree(d, s) * np.exp(-2.0 * K * s)
        total += term
        if term < 1e-18 * total:
            break
        s += 1
    tail_mass = (total - kept) / total
    norm = np.sqrt(kept)
    coeffs = {j: complex(v / norm) for j, v in coeffs.items()}
    report = {"J": J, "nu": nu, "K": K, "tail_mass": float(tail_mass),
              "tail_bound": float(np.exp(-K * J)),
              "tail_ok": bool(tail_mass <= np.exp(-K * J))}
    return coeffs, report


def _propagate_one(cfg: RunConfig, hbar: float, outdir: Path):
    t_wall = time.perf_counter()
    pot = cfg.potential
    init = initial_state(cfg.initial.a, cfg.initial.eta, cfg.initial.A,
                         cfg.initial.B)
    traj = integrate_flow(pot, init, cfg.T, tol=cfg.tol)

    if cfg.empirical:
        trial_l = 12
        fr0 = frame_at(traj, 0.0, hbar)
        c_trial, _ = _initial_coefficients(cfg, fr0, hbar, trial_l)
        c0 = BasisCoefficients(frame=fr0, data=c_trial,
                               support=max(sum(j) for j in c_trial))
        trial = integrate_hierarchy(traj, pot, c0, l=trial_l, tol=cfg.tol)
        l = choose_l(hbar, profile=trial.norm_profile(hbar))
        l_mode = "empirical"
    else:
        l = choose_l(hbar, g=cfg.g)
        l_mode = "fixed_g"

    fr0 = frame_at(traj, 0.0, hbar)
    cmap, tail_report = _initial_coefficients(cfg, fr0, hbar, l)
    c0 = BasisCoefficients(frame=fr0, data=cmap,
                           support=max(sum(j) for j in cmap))
    h = integrate_hierarchy(traj, pot, c0, l=l, p_resolved=cfg.p_resolved,
                            tol=cfg.tol)

    rundir = outdir / f"hbar_{hbar:g}"
    rundir.mkdir(parents=True, exist_ok=True)
    _write_json(rundir / "trajectory.json", traj.to_json_dict())
    _write_json(rundir / "hierarchy.json", h.to_json_dict())
    if tail_report:
        _write_json(rundir / "tail_report.json", tail_report)

    rows = []
    use_oracle = traj.d <= 2
    if use_oracle:
        grid = orbit_grid(traj, hbar, cfg.grid_points, cfg.grid_dt,
                          max_degree=h.J + 3 * (l - 1))
        pts = grid.mesh()
        psi0 = assemble_wavefunction(h, 0.0, hbar, l, pts)
        snaps = propagate(grid, pot, psi0, hbar, cfg.T, t_eval=cfg.times)
    b = cfg.localize_radii[0] if cfg.localize_radii else None
    for i, t in enumerate(cfg.times):
        if use_oracle:
            psi_a = assemble_wavefunction(h, t, hbar, l, pts).reshape(snaps[i].shape)
            err = l2_error(psi_a, snaps[i], grid).raw
            np.save(rundir / f"psi_{i:03d}.npy", snaps[i])
            _write_json(rundir / f"psi_{i:03d}.json", {
                "schema_version": 1, "hbar": hbar, "t": t,
                "grid": {"d": grid.d, "center": list(grid.center),
                         "halfwidths": list(grid.halfwidths),
                         "points_per_axis": grid.points_per_axis, "dt": grid.dt},
            })
        else:
            err = float("nan")
        if traj.d == 1:
            x = np.linspace(traj.state_at(t).a[0] - 10, traj.state_at(t).a[0] + 10, 4097)
            resid = residual_norm(h, t, pot, hbar, l, x)
            if b is not None:
                xl = np.linspace(traj.state_at(t).a[0] - max(10, 4 * b),
                                 traj.state_at(t).a[0] + max(10, 4 * b), 8193)
                psi_l = assemble_wavefunction(h, t, hbar, l, xl)
                mass = localization_mass(psi_l, xl, traj.state_at(t).a, b)
            else:
                mass = float("nan")
        else:
            resid = float("nan")
            mass = float("nan")
        rows.append((hbar, t, l_mode, l, err, resid, mass))
    wall_ms = (time.perf_counter() - t_wall) * 1e3
    return rows, wall_ms


def run_propagate(cfg: RunConfig, outdir: Path, jobs: int):
    all_rows = []
    timing_rows = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            futs = {h: ex.submit(_propagate_one, cfg, h, outdir)
                    for h in cfg.hbar_list}
            for h in cfg.hbar_list:
                rows, wall = futs[h].result()
                all_rows.extend(rows)
                timing_rows.append((h, wall))
    else:
        for h in cfg.hbar_list:
            rows, wall = _propagate_one(cfg, h, outdir)
            all_rows.extend(rows)
            timing_rows.append((h, wall))
    all_rows.sort(key=lambda r: (r[0], r[1]))
    _write_csv(outdir / "results.csv", RESULTS_SCHEMA, all_rows)
    _write_csv(outdir / "timings.csv", ("hbar", "wall_time_ms"),
               sorted(timing_rows))
    return 0


def run_localize(cfg: RunConfig, outdir: Path, jobs: int):
    if not cfg.localize_radii:
        raise ConfigError("localize.radii", "localize mode needs radii")
    rows = []
    for hbar in cfg.hbar_list:
        pot = cfg.potential
        init = initial_state(cfg.initial.a, cfg.initial.eta, cfg.initial.A,
                             cfg.initial.B)
        traj = integrate_flow(pot, init, cfg.T, tol=cfg.tol)
        l = choose_l(hbar, g=cfg.g) if not cfg.empirical else 8
        fr0 = frame_at(traj, 0.0, hbar)
        cmap, _ = _initial_coefficients(cfg, fr0, hbar, l)
        c0 = BasisCoefficients(frame=fr0, data=cmap,
                               support=max(sum(j) for j in cmap))
        h = integrate_hierarchy(traj, pot, c0, l=l, tol=cfg.tol)
        bmax = max(cfg.localize_radii)
        for t in cfg.times:
            center = traj.state_at(t).a
            x = np.linspace(center[0] - max(10, 4 * bmax),
                            center[0] + max(10, 4 * bmax), 8193)
            psi = assemble_wavefunction(h, t, hbar, l, x)
            for b in cfg.localize_radii:
                rows.append((hbar, t, b, localization_mass(psi, x, center, b)))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    _write_csv(outdir / "localize.csv", ("hbar", "t", "b", "outside_mass"), rows)
    return 0


def run_ehrenfest(cfg: RunConfig, outdir: Path, jobs: int):
    if cfg.ehrenfest is None:
        raise ConfigError("ehrenfest", "missing section")
    e = cfg.ehrenfest
    T_prime = float(e["T_prime"])
    tau = float(e.get("tau", 0.0))
    v = float(e.get("v", 1.0))
    kappa = float(e["kappa"]) if "kappa" in e else None
    t_fit = float(e.get("lyapunov_t_end", 10.0))
    pot = cfg.potential
    init = initial_state(cfg.initial.a, cfg.initial.eta, cfg.initial.A,
                         cfg.initial.B)
    fit = lyapunov_fit(integrate_flow(pot, init, t_fit, tol=cfg.tol))
    lam = fit.rate
    lo, hi = kappa_window(T_prime, lam, tau, v)
    rows = []
    for hbar in cfg.hbar_list:
        sch = ehrenfest_schedule(T_prime, lam, tau, v, hbar, kappa=kappa)
        traj = integrate_flow(pot, init, sch.T, tol=cfg.tol)
        fr0 = frame_at(traj, 0.0, hbar)
        cmap, _ = _initial_coefficients(cfg, fr0, hbar, sch.l)
        c0 = BasisCoefficients(frame=fr0, data=cmap,
                               support=max(sum(j) for j in cmap))
        h = integrate_hierarchy(traj, pot, c0, l=sch.l, tol=cfg.tol)
        err = float("nan")
        if traj.d <= 2:
            grid = orbit_grid(traj, hbar, cfg.grid_points, cfg.grid_dt,
                              max_degree=h.J + 3 * (sch.l - 1))
            pts = grid.mesh()
            psi0 = assemble_wavefunction(h, 0.0, hbar, sch.l, pts)
            psi_o = propagate(grid, pot, psi0, hbar, sch.T)[0]
            psi_a = assemble_wavefunction(h, sch.T, hbar, sch.l, pts).reshape(psi_o.shape)
            err = l2_error(psi_a, psi_o, grid).raw
        rows.append((hbar, sch.T, sch.g, sch.kappa, sch.l, err))
    rows.sort(key=lambda r: r[0])
    _write_csv(outdir / "ehrenfest.csv",
               ("hbar", "T", "g", "kappa", "l", "error_vs_oracle"), rows)
    _write_json(outdir / "ehrenfest_window.json", {
        "schema_version": 1, "lambda_fit": lam,
        "lambda_rms_residual": fit.rms_residual,
        "polynomial_growth_flag": fit.polynomial_like,
        "kappa_window": [lo, hi], "T_prime": T_prime, "tau": tau, "v": v,
    })
    return 0


def run_scatter(cfg: RunConfig, outdir: Path, jobs: int):
    s = cfg.scatter or {}
    g = float(s.get("g", cfg.g if cfg.g else 0.3))
    tol = float(s.get("tol", 1e-8))
    pot = cfg.potential
    init = initial_state(cfg.initial.a, cfg.initial.eta, cfg.initial.A,
                         cfg.initial.B)
    past, _ = classical_asymptotics(pot, init, "past", tol=tol)
    c_in = cfg.initial.coefficients
    if c_in is None:
        raise ConfigError("initial.coefficients",
                          "scatter mode needs explicit coefficients")
    for hbar in cfg.hbar_list:
        res = smatrix_apply(dict(c_in), past, pot, hbar, g=g, tol=tol,
                            cascade_tol=cfg.tol)
        _write_json(outdir / f"scatter_hbar_{hbar:g}.json", res.to_json_dict())
    return 0


def run_validate_cmd(outdir: Path, seed: int):
    results = run_all(seed=seed)
    width = max(len(r.name) for r in results)
    by_module = {}
    for r in results:
        by_module.setdefault(r.module, []).append(r)
    n_fail = 0
    for module, rs in by_module.items():
        print(f"[{module}]")
        for r in rs:
            mark = "PASS" if r.passed else "FAIL"
            n_fail += not r.passed
            extra = f"  ({r.detail})" if r.detail else ""
            print(f"  {mark}  {r.name:<{width}}  margin={r.margin:.3g}{extra}")
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    _write_json(outdir / "validation_report.json", {
        "schema_version": 1,
        "checks": [{"name": r.name, "module": r.module, "passed": r.passed,
                    "margin": r.margin if np.isfinite(r.margin) else None,
                    "exact": r.exact, "detail": r.detail} for r in results],
        "passed": n_fail == 0,
    })
    return 0 if n_fail == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="semiwave",
        description="semiclassical wavepacket propagation experiments")
    parser.add_argument("mode", choices=["propagate", "scatter", "ehrenfest",
                                         "localize", "validate"])
    parser.add_argument("--config", type=Path, help="TOML run configuration")
    parser.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=20240817)
    args = parser.parse_args(argv)

    args.out.mkdir(parents=True, exist_ok=True)
    try:
        if args.mode == "validate":
            return run_validate_cmd(args.out, args.seed)
        if args.config is None:
            raise ConfigError("config", f"{args.mode} mode needs --config PATH")
        cfg = load_config(args.config)
        runner = {"propagate": run_propagate, "scatter": run_scatter,
                  "ehrenfest": run_ehrenfest, "localize": run_localize}[args.mode]
        return runner(cfg, args.out, max(1, args.jobs))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SemiwaveError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
