"""Run configuration: TOML sections -> validated RunConfig.

Sections: [potential], [initial], [run], [grid], [localize], [ehrenfest],
[scatter].  Complex matrices enter as paired real/imag row-major arrays.
Every validation error names the section and field that caused it.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .classical import ClassicalState, symplectic_residuals
from .errors import ConfigError
from .potentials import (DecayMetadata, GaussianSum, Polynomial, PotentialModel,
                         double_well, free_potential, harmonic, quartic_well)


@dataclass
class InitialSpec:
    a: np.ndarray
    eta: np.ndarray
    A: np.ndarray
    B: np.ndarray
    coefficients: dict | None      # multi-index -> complex, unit norm
    tail: dict | None              # {"K": float, "nu": int} geometric family
    declared_tail_K: float | None


@dataclass
class RunConfig:
    potential: PotentialModel
    initial: InitialSpec
    hbar_list: list
    g: float | None
    empirical: bool
    T: float
    times: list
    tol: float
    p_resolved: bool
    J: int
    grid_points: int
    grid_dt: float
    localize_radii: list = field(default_factory=list)
    ehrenfest: dict | None = None
    scatter: dict | None = None
    raw: dict = field(default_factory=dict)


def _get(table, section, key, kind, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"{section}.{key}", "missing required field")
        return default
    val = table[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if kind is int and isinstance(val, int) and not isinstance(val, bool):
        return val
    if kind is bool and isinstance(val, bool):
        return val
    if kind is list and isinstance(val, list):
        return val
    if kind is str and isinstance(val, str):
        return val
    if kind is dict and isinstance(val, dict):
        return val
    raise ConfigError(f"{section}.{key}", f"expected {kind.__name__}, got {type(val).__name__}")


def _matrix(table, section, key, d, default=None):
    re_key, im_key = f"{key}_re", f"{key}_im"
    if re_key not in table and im_key not in table:
        return default
    re = np.asarray(_get(table, section, re_key, list, required=True), dtype=float)
    im_raw = _get(table, section, im_key, list)
    im = np.zeros_like(re) if im_raw is None else np.asarray(im_raw, dtype=float)
    try:
        return (re + 1j * im).reshape(d, d)
    except ValueError as exc:
        raise ConfigError(f"{section}.{re_key}", f"cannot shape to {d}x{d}: {exc}")


def _build_potential(table) -> PotentialModel:
    kind = _get(table, "potential", "kind", str, required=True)
    decay = None
    if "decay" in table:
        dt = _get(table, "potential", "decay", dict)
        for k in ("beta", "v0", "v1"):
            if k not in dt:
                raise ConfigError(f"potential.decay.{k}", "missing decay component")
        decay = DecayMetadata(beta=float(dt["beta"]), v0=float(dt["v0"]),
                              v1=float(dt["v1"]))
        if decay.beta <= 1 or decay.v0 <= 0 or decay.v1 <= 0:
            raise ConfigError("potential.decay", "need beta > 1, v0 > 0, v1 > 0")
    d = _get(table, "potential", "d", int, default=1)
    if kind == "harmonic":
        pot = harmonic(_get(table, "potential", "omega2", float, default=1.0))
    elif kind == "quartic":
        pot = quartic_well(_get(table, "potential", "quartic", float, default=0.1),
                           _get(table, "potential", "omega2", float, default=1.0))
    elif kind == "double_well":
        pot = double_well(_get(table, "potential", "barrier", float, default=0.25),
                          _get(table, "potential", "separation", float, default=1.0))
    elif kind == "free":
        pot = free_potential(d, decay)
        return pot
    elif kind == "polynomial":
        entries = _get(table, "potential", "coefficients", list, required=True)
        coeffs = {}
        for row in entries:
            try:
                m, c = tuple(int(x) for x in row[0]), float(row[1])
            except (TypeError, ValueError, IndexError) as exc:
                raise ConfigError("potential.coefficients",
                                  f"expected [[multi-index], value] rows: {exc}")
            if len(m) != d:
                raise ConfigError("potential.coefficients",
                                  f"multi-index {m} has wrong dimension (d = {d})")
            coeffs[m] = c
        try:
            pot = Polynomial(d, coeffs, decay=decay)
        except ValueError as exc:
            raise ConfigError("potential.decay", str(exc))
        return pot
    elif kind == "gaussian_sum":
        amps = _get(table, "potential", "amplitudes", list, required=True)
        centers = _get(table, "potential", "centers", list, required=True)
        widths = _get(table, "potential", "widths", list, required=True)
        try:
            pot = GaussianSum(d, amps, centers, widths, decay=decay)
        except ValueError as exc:
            raise ConfigError("potential", str(exc))
        return pot
    else:
        raise ConfigError("potential.kind", f"unknown kind {kind!r}")
    if decay is not None:
        raise ConfigError("potential.decay",
                          f"{kind} potentials never satisfy the decay hypothesis")
    return pot


def _build_initial(table, d) -> InitialSpec:
    a = np.atleast_1d(np.asarray(_get(table, "initial", "a", list, required=True),
                                 dtype=float))
    eta = np.atleast_1d(np.asarray(_get(table, "initial", "eta", list, required=True),
                                   dtype=float))
    if len(a) != d or len(eta) != d:
        raise ConfigError("initial.a", f"a and eta must have length d = {d}")
    A = _matrix(table, "initial", "A", d, default=np.eye(d, dtype=complex))
    B = _matrix(table, "initial", "B", d, default=np.eye(d, dtype=complex))
    r1, r2 = symplectic_residuals(A, B)
    if max(r1, r2) > 1e-8:
        raise ConfigError("initial.A",
                          f"(A, B) violate the normalization conditions "
                          f"(residuals {r1:.2e}, {r2:.2e})")
    coeffs = None
    tail = None
    declared_K = _get(table, "initial", "declared_tail_K", float)
    if "tail" in table:
        tail = _get(table, "initial", "tail", dict)
        if "K" not in tail or float(tail["K"]) <= 0:
            raise ConfigError("initial.tail.K", "need a positive decay rate K")
        tail = {"K": float(tail["K"]), "nu": int(tail.get("nu", 2))}
        if tail["nu"] < 1:
            raise ConfigError("initial.tail.nu", "need nu >= 1")
    else:
        rows = _get(table, "initial", "coefficients", list,
                    default=[[[0] * d, 1.0, 0.0]])
        coeffs = {}
        for row in rows:
            try:
                j = tuple(int(x) for x in row[0])
                val = complex(float(row[1]), float(row[2]))
            except (TypeError, ValueError, IndexError) as exc:
                raise ConfigError("initial.coefficients",
                                  f"expected [[multi-index], re, im] rows: {exc}")
            if len(j) != d or any(x < 0 for x in j):
                raise ConfigError("initial.coefficients", f"bad multi-index {j}")
            coeffs[j] = val
        total = sum(abs(c) ** 2 for c in coeffs.values())
        if abs(total - 1.0) > 1e-10:
            raise ConfigError("initial.coefficients",
                              f"squared amplitudes sum to {total:.12f}, not 1")
        if declared_K is not None:
            for j, c in coeffs.items():
                if abs(c) > np.exp(-declared_K * sum(j)) + 1e-15:
                    raise ConfigError(
                        "initial.declared_tail_K",
                        f"|c_{j}| = {abs(c):.3e} exceeds exp(-K |j|) "
                        f"= {np.exp(-declared_K * sum(j)):.3e}")
    return InitialSpec(a=a, eta=eta, A=A, B=B, coefficients=coeffs, tail=tail,
                       declared_tail_K=declared_K)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"no such file: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"TOML parse error: {exc}")

    if "potential" not in raw:
        raise ConfigError("potential", "missing section")
    pot = _build_potential(raw["potential"])
    if "initial" not in raw:
        raise ConfigError("initial", "missing section")
    init = _build_initial(raw["initial"], pot.d)

    run = raw.get("run", {})
    hbar_list = _get(run, "run", "hbar", list, required=True)
    try:
        hbar_list = [float(h) for h in hbar_list]
    except (TypeError, ValueError):
        raise ConfigError("run.hbar", "expected a list of positive reals")
    if any(h <= 0 for h in hbar_list):
        raise ConfigError("run.hbar", "hbar values must be positive")
    g = _get(run, "run", "g", float)
    empirical = _get(run, "run", "empirical", bool, default=False)
    if (g is None) and not empirical:
        raise ConfigError("run.g", "need g or empirical = true")
    T = _get(run, "run", "T", float, default=1.0)
    times = [float(t) for t in _get(run, "run", "times", list, default=[T])]
    if any(t < 0 or t > T + 1e-12 for t in times):
        raise ConfigError("run.times", "comparison times must lie in [0, T]")
    tol = _get(run, "run", "tol", float, default=1e-10)
    p_resolved = _get(run, "run", "p_resolved", bool, default=False)
    J = max((sum(j) for j in init.coefficients), default=0) if init.coefficients else 0

    grid = raw.get("grid", {})
    points = _get(grid, "grid", "points", int, default=4096)
    dt = _get(grid, "grid", "dt", float, default=1e-4)
    if points & (points - 1) or points < 16:
        raise ConfigError("grid.points", "must be a power of two >= 16")
    if dt <= 0:
        raise ConfigError("grid.dt", "must be positive")

    radii = [float(b) for b in _get(raw.get("localize", {}), "localize", "radii",
                                    list, default=[])]
    ehren = raw.get("ehrenfest")
    if ehren is not None:
        for k in ("T_prime",):
            if k not in ehren:
                raise ConfigError(f"ehrenfest.{k}", "missing required field")
    scatter = raw.get("scatter")
    return RunConfig(potential=pot, initial=init, hbar_list=hbar_list, g=g,
                     empirical=empirical, T=T, times=times, tol=tol,
                     p_resolved=p_resolved, J=J, grid_points=points, grid_dt=dt,
                     localize_radii=radii, ehrenfest=ehren, scatter=scatter,
                     raw=raw)
