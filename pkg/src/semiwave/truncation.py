"""Truncation choice, wavefunction assembly, residuals and localization.

The truncated approximation with l layers is

    psi_l(x, t) = exp(iS(t)/hbar) sum_j ( sum_{k<l} hbar^(k/2) c_{k,j}(t) ) phi_j(x),

supported on |j| <= J + 3(l-1).  Two ways to pick l are offered side by
side: the fixed rule l = floor(g / hbar) and an empirical rule that stops
the series at the smallest term of the layer-norm profile
hbar^(k/2) sup_t ||c_k(t)||, the usual stopping point for an asymptotic
series.  The defect of the truncation,

    xi_l = i hbar dpsi/dt + (hbar^2/2) Lap psi - V psi,

collapses to Taylor-remainder terms: for each k < l the degree-(l+1-k)
remainder of V around a(t) multiplies the k-th assembled layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import (BasisCoefficients, WavepacketFrame, evaluate_basis,
                    frame_at)
from .errors import DegenerateProfile, EmptyWindow, FrameMismatch, GridTooCoarse
from .hierarchy import CoefficientHierarchy
from .multiindex import enumerate_upto
from .potentials import PotentialModel


@dataclass(frozen=True)
class TruncationPlan:
    mode: str              # "fixed_g" or "empirical"
    l: int
    hbar: float
    g: float | None = None

    def __post_init__(self):
        if self.mode not in ("fixed_g", "empirical"):
            raise ValueError(f"unknown truncation mode {self.mode!r}")
        if self.mode == "fixed_g":
            expected = max(1, int(np.floor(self.g / self.hbar)))
            if self.l != expected:
                raise ValueError("fixed-g plan must have l = floor(g/hbar) >= 1")


def choose_l(hbar: float, g: float | None = None, profile=None) -> int:
    """Pick the number of layers.

    Fixed mode (g given): floor(g / hbar), clamped to at least 1.
    Empirical mode (profile given): the first index of the smallest entry of
    the profile hbar^(k/2) sup_t ||c_k||; keeping the layers before the
    smallest term is where the asymptotic series stops improving.
    """
    if (g is None) == (profile is None):
        raise ValueError("pass exactly one of g or profile")
    if g is not None:
        if hbar <= 0 or g <= 0:
            raise ValueError("need hbar > 0 and g > 0")
        return max(1, int(np.floor(g / hbar)))
    profile = np.asarray(profile, dtype=float)
    if len(profile) >= 2 and profile[1] >= profile[0]:
        raise DegenerateProfile(
            "layer-norm profile grows from k=1; hbar too large for asymptotics"
        )
    return max(1, int(np.argmin(profile)))


def fixed_plan(hbar: float, g: float) -> TruncationPlan:
    return TruncationPlan(mode="fixed_g", l=choose_l(hbar, g=g), hbar=hbar, g=g)


def empirical_plan(hbar: float, profile) -> TruncationPlan:
    return TruncationPlan(mode="empirical", l=choose_l(hbar, profile=profile),
                          hbar=hbar)


def combined_coefficients(h: CoefficientHierarchy, t: float, hbar: float,
                          l: int) -> np.ndarray:
    """sum_{k<l} hbar^(k/2) c_k(t) on the hierarchy's dense index space."""
    if l > h.l:
        raise ValueError(f"requested {l} layers, hierarchy holds {h.l}")
    comb = h.c0.astype(complex).copy()
    for k in range(1, l):
        comb += hbar ** (k / 2.0) * h.layer_dense(k, t)
    return comb


def _frame_for(h, t, hbar, frame):
    if frame is None:
        return frame_at(h.traj, t, hbar)
    ref = h.traj.state_at(t)
    close = (np.allclose(frame.A, ref.A, atol=1e-9)
             and np.allclose(frame.B, ref.B, atol=1e-9)
             and np.allclose(frame.a, ref.a, atol=1e-9)
             and np.allclose(frame.eta, ref.eta, atol=1e-9)
             and frame.hbar == hbar)
    if not close:
        raise FrameMismatch("frame does not match the hierarchy trajectory at t")
    return frame


def assemble_wavefunction(h: CoefficientHierarchy, t: float, hbar: float,
                          l: int, points, frame: WavepacketFrame | None = None
                          ) -> np.ndarray:
    """Evaluate psi_l(x, t) including the action phase exp(iS/hbar)."""
    frame = _frame_for(h, t, hbar, frame)
    comb = combined_coefficients(h, t, hbar, l)
    support = h.J + 3 * (l - 1)
    table = evaluate_basis(frame, support, points)
    order = enumerate_upto(h.d, support)
    pos = {j: i for i, j in enumerate(order)}
    out = np.zeros(table.shape[1], dtype=complex)
    for i, j in enumerate(h.basis.indices):
        if comb[i] != 0.0 and sum(j) <= support:
            out += comb[i] * table[pos[j]]
    return np.exp(1j * frame.S / hbar) * out


def _uniform_weight(points) -> float:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 or pts.shape[-1] == 1:
        flat = pts.reshape(-1)
        return float(flat[1] - flat[0])
    raise ValueError("expected a 1-D uniform grid")


def _grid_norm(values, dx) -> float:
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * dx))


def residual_norm(h: CoefficientHierarchy, t: float, pot: PotentialModel,
                  hbar: float, l: int, points,
                  frame: WavepacketFrame | None = None) -> float:
    """Grid L2 norm of the truncation defect xi_l at time t.

    For each k < l the Taylor remainder of V through degree l+1-k around
    a(t) multiplies the assembled k-th layer; the action phase drops out of
    the norm.  A factor-2 subsampling of the grid must agree within 10%.
    """
    frame = _frame_for(h, t, hbar, frame)
    pts = np.asarray(points, dtype=float).reshape(-1)
    dx = _uniform_weight(pts)
    a = frame.a
    vfull = pot.value(pts)
    support = h.J + 3 * (l - 1)
    table = evaluate_basis(frame, support, pts)
    order = enumerate_upto(h.d, support)
    pos = {j: i for i, j in enumerate(order)}

    xi = np.zeros(len(pts), dtype=complex)
    for k in range(l):
        q = l + 1 - k
        taylor = pot.taylor_coeffs(a, q)
        wq = vfull.copy()
        for m, c in taylor.items():
            if c != 0.0:
                wq = wq - c * (pts - a[0]) ** m[0]
        vec = h.layer_dense(k, t)
        layer_vals = np.zeros(len(pts), dtype=complex)
        for i, j in enumerate(h.basis.indices):
            if vec[i] != 0.0 and sum(j) <= support:
                layer_vals += vec[i] * table[pos[j]]
        xi += hbar ** (k / 2.0) * wq * layer_vals

    full = _grid_norm(xi, dx)
    half = _grid_norm(xi[::2], 2.0 * dx)
    if full > 1e-13 and abs(full - half) > 0.1 * full:
        raise GridTooCoarse(
            f"residual changed by {abs(full - half) / full:.1%} under coarsening"
        )
    return full


def localization_mass(psi_values, points, center, radius: float) -> float:
    """( integral_{|x - center| > radius} |psi|^2 dx )^(1/2) by masked quadrature."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    center = np.atleast_1d(np.asarray(center, dtype=float))
    span = np.min(np.max(pts, axis=0) - center)
    span = min(span, np.min(center - np.min(pts, axis=0)))
    if radius > 0 and span < 3.0 * radius:
        raise GridTooCoarse(
            f"grid extends {span:.3g} beyond the center; need >= 3 * radius = {3 * radius:.3g}"
        )
    dx = float(pts[1, 0] - pts[0, 0]) if pts.shape[1] == 1 else None
    if dx is None:
        raise ValueError("localization_mass expects a 1-D grid")
    dist = np.sqrt(np.sum((pts - center) ** 2, axis=1))
    mask = dist > radius
    vals = np.asarray(psi_values)
    return float(np.sqrt(np.sum(np.abs(vals[mask]) ** 2) * dx))


@dataclass(frozen=True)
class EhrenfestSchedule:
    """Long-time schedule: horizon T = T' ln(1/hbar) with shrinking g."""

    T_prime: float
    lam: float
    tau: float
    v: float
    kappa: float
    hbar: float
    T: float
    g: float
    l: int

    def __post_init__(self):
        lo = 6.0 * self.lam + 2.0 * self.v * self.tau
        hi = 1.0 / self.T_prime
        if not (lo < self.kappa < hi):
            raise EmptyWindow(
                f"kappa = {self.kappa} outside ({lo}, {hi})"
            )


def kappa_window(T_prime: float, lam: float, tau: float, v: float):
    lo = 6.0 * lam + 2.0 * v * tau
    hi = 1.0 / T_prime
    if lo >= hi:
        raise EmptyWindow(
            f"6*lambda + 2*v*tau = {lo:.4g} >= 1/T' = {hi:.4g}; no admissible kappa"
        )
    return lo, hi


def ehrenfest_schedule(T_prime: float, lam: float, tau: float, v: float,
                       hbar: float, kappa: float | None = None) -> EhrenfestSchedule:
    """Horizon, truncation parameter and layer count for one hbar.

    T = T' ln(1/hbar), g = exp(-kappa T) = hbar^(kappa T'), and
    l = max(1, floor(g / hbar)) = max(1, floor(hbar^(kappa T' - 1))).
    kappa defaults to the midpoint of its admissible window.
    """
    if lam <= 0:
        raise ValueError("need a positive growth rate lambda")
    lo, hi = kappa_window(T_prime, lam, tau, v)
    if kappa is None:
        kappa = 0.5 * (lo + hi)
    T = T_prime * np.log(1.0 / hbar)
    g = float(np.exp(-kappa * T))
    l = max(1, int(np.floor(g / hbar)))
    return EhrenfestSchedule(T_prime=T_prime, lam=lam, tau=tau, v=v,
                             kappa=float(kappa), hbar=hbar, T=float(T),
                             g=g, l=l)
